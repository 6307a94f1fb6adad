//! Text checkpoints.
//!
//! ```text
//! reward-sgd-checkpoint 1
//! kind=linear
//! input_dim=50
//! hidden_dim=0
//! init_scale=0.01
//! seed=3
//! featurizer=none
//! params=51
//! 0.125
//! ...
//! ```
//!
//! When the model was trained on hashed text, `featurizer=hash` is followed
//! by `featurizer.dimension`, `featurizer.ngram_min`, `featurizer.ngram_max`,
//! `featurizer.lowercase` and `featurizer.signed_hashing` lines. Parameter
//! values use the shortest decimal form that parses back to the same bits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::featurize::HashFeaturizerConfig;
use crate::model::{ModelKind, ModelSpec, ParamVector};

use super::{read_file, write_file};

pub const CHECKPOINT_MAGIC: &str = "reward-sgd-checkpoint 1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub spec: ModelSpec,
    pub featurizer: Option<HashFeaturizerConfig>,
    pub params: ParamVector,
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let s = &self.spec;
        let mut out = format!(
            "{CHECKPOINT_MAGIC}\nkind={}\ninput_dim={}\nhidden_dim={}\ninit_scale={}\nseed={}\n",
            s.kind.name(),
            s.input_dim,
            s.hidden_dim,
            s.init_scale,
            s.seed
        );
        match &self.featurizer {
            None => out.push_str("featurizer=none\n"),
            Some(f) => {
                let _ = write!(
                    out,
                    "featurizer=hash\nfeaturizer.dimension={}\nfeaturizer.ngram_min={}\nfeaturizer.ngram_max={}\nfeaturizer.lowercase={}\nfeaturizer.signed_hashing={}\n",
                    f.dimension, f.ngram_min, f.ngram_max, f.lowercase, f.signed_hashing
                );
            }
        }
        let _ = writeln!(out, "params={}", self.params.len());
        for v in self.params.as_slice() {
            let _ = writeln!(out, "{v}");
        }
        out
    }

    pub fn from_text(text: &str, path: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let header = lines.next().map(|(_, l)| l.trim_end()).unwrap_or("");
        if header != CHECKPOINT_MAGIC {
            return Err(Error::CheckpointVersion { found: header.to_string(), expected: CHECKPOINT_MAGIC.to_string() });
        }
        let perr = |line: usize, message: String| Error::Parse { path: path.to_string(), line: line + 1, message };

        let mut fields = BTreeMap::new();
        let mut count = None;
        for (n, line) in lines.by_ref() {
            let (k, v) = line.split_once('=').ok_or_else(|| perr(n, format!("expected key=value, got `{line}`")))?;
            if k == "params" {
                count = Some(v.parse::<usize>().map_err(|_| perr(n, format!("bad parameter count `{v}`")))?);
                break;
            }
            fields.insert(k.to_string(), (n, v.to_string()));
        }
        let count = count.ok_or_else(|| perr(0, "missing `params=` line".into()))?;

        fn take<T: FromStr>(
            fields: &mut BTreeMap<String, (usize, String)>,
            key: &str,
            path: &str,
        ) -> Result<T> {
            let (n, v) = fields
                .remove(key)
                .ok_or_else(|| Error::Parse { path: path.to_string(), line: 1, message: format!("missing `{key}`") })?;
            v.parse().map_err(|_| Error::Parse { path: path.to_string(), line: n + 1, message: format!("bad value `{v}` for `{key}`") })
        }

        let kind_name: String = take(&mut fields, "kind", path)?;
        let kind = ModelKind::parse(&kind_name)
            .ok_or_else(|| Error::Parse { path: path.to_string(), line: 2, message: format!("unknown model kind `{kind_name}`") })?;
        let spec = ModelSpec {
            kind,
            input_dim: take(&mut fields, "input_dim", path)?,
            hidden_dim: take(&mut fields, "hidden_dim", path)?,
            init_scale: take(&mut fields, "init_scale", path)?,
            seed: take(&mut fields, "seed", path)?,
        };
        let featurizer = match take::<String>(&mut fields, "featurizer", path)?.as_str() {
            "none" => None,
            "hash" => Some(HashFeaturizerConfig {
                dimension: take(&mut fields, "featurizer.dimension", path)?,
                ngram_min: take(&mut fields, "featurizer.ngram_min", path)?,
                ngram_max: take(&mut fields, "featurizer.ngram_max", path)?,
                lowercase: take(&mut fields, "featurizer.lowercase", path)?,
                signed_hashing: take(&mut fields, "featurizer.signed_hashing", path)?,
            }),
            other => return Err(perr(0, format!("unknown featurizer `{other}`"))),
        };
        if let Some((k, (n, _))) = fields.into_iter().next() {
            return Err(perr(n, format!("unknown key `{k}`")));
        }
        spec.validate()?;
        if count != spec.param_count() {
            return Err(Error::DimensionMismatch { expected: spec.param_count(), got: count });
        }

        let mut values = Vec::with_capacity(count);
        for (n, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            values.push(line.trim().parse::<f64>().map_err(|_| perr(n, format!("bad parameter value `{line}`")))?);
        }
        if values.len() != count {
            return Err(Error::LengthMismatch { left: count, right: values.len() });
        }
        Ok(Self { spec, featurizer, params: ParamVector::from_vec(values) })
    }
}

pub fn write_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    write_file(path, checkpoint.to_text().as_bytes())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_text(&read_file(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(featurizer: Option<HashFeaturizerConfig>) -> Checkpoint {
        let spec = ModelSpec::one_hidden(3, 2).with_seed(9);
        let params = ParamVector::from_vec(
            (0..spec.param_count()).map(|i| (i as f64 + 0.1) / 3.0 * if i % 2 == 0 { 1.0 } else { -1e-300 }).collect(),
        );
        Checkpoint { spec, featurizer, params }
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        for f in [None, Some(HashFeaturizerConfig::default())] {
            let c = sample(f);
            let back = Checkpoint::from_text(&c.to_text(), "c").unwrap();
            assert_eq!(back, c);
            for (a, b) in back.params.as_slice().iter().zip(c.params.as_slice()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn wrong_version_is_distinct_error() {
        let text = sample(None).to_text().replacen("checkpoint 1", "checkpoint 2", 1);
        assert!(matches!(Checkpoint::from_text(&text, "c"), Err(Error::CheckpointVersion { .. })));
        assert!(matches!(Checkpoint::from_text("", "c"), Err(Error::CheckpointVersion { .. })));
    }

    #[test]
    fn truncated_params_rejected() {
        let text = sample(None).to_text();
        let cut: String = text.lines().take(text.lines().count() - 1).map(|l| format!("{l}\n")).collect();
        assert!(Checkpoint::from_text(&cut, "c").is_err());
    }
}
