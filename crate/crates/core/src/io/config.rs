//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Every key is optional and
//! unknown keys are rejected. [`RunConfig::entries`] lists every setting,
//! defaults included, in a fixed order; that listing is what reports echo.

use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::experiment::Benchmark;
use crate::featurize::HashFeaturizerConfig;
use crate::losses::ScoreKind;
use crate::model::ModelKind;
use crate::trainer::Method;

use super::read_file;

/// Raw `key = value` pairs in file order, with their line numbers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvConfig {
    pub entries: Vec<(String, String, usize)>,
}

impl KvConfig {
    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let mut entries: Vec<(String, String, usize)> = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse { path: path.to_string(), line: n + 1, message };
            let (k, v) = line.split_once('=').ok_or_else(|| err(format!("expected key = value, got `{line}`")))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(err("empty key".into()));
            }
            if entries.iter().any(|(seen, _, _)| seen == k) {
                return Err(err(format!("duplicate key `{k}`")));
            }
            entries.push((k.to_string(), v.to_string(), n + 1));
        }
        Ok(Self { entries })
    }
}

/// Everything a CLI run needs besides file paths.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub benchmark: Benchmark,
    pub featurizer: HashFeaturizerConfig,
    /// Input dimension for feature-file datasets; inferred when absent.
    pub input_dim: Option<usize>,
    pub seed: u64,
    pub seeds: Vec<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            benchmark: Benchmark::default(),
            featurizer: HashFeaturizerConfig::default(),
            input_dim: None,
            seed: 0,
            seeds: vec![0, 1, 2, 3, 4],
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("`{key}`: cannot parse `{v}`"))
}

fn opt<T: FromStr>(key: &str, v: &str) -> std::result::Result<Option<T>, String> {
    if v == "none" {
        Ok(None)
    } else {
        num(key, v).map(Some)
    }
}

fn show_opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), T::to_string)
}

fn seed_list(key: &str, v: &str) -> std::result::Result<Vec<u64>, String> {
    let seeds: Vec<u64> = v.split(',').map(|s| num(key, s.trim())).collect::<std::result::Result<_, _>>()?;
    if seeds.is_empty() {
        return Err(format!("`{key}` is empty"));
    }
    Ok(seeds)
}

impl RunConfig {
    pub fn from_kv(kv: &KvConfig, path: &str) -> Result<Self> {
        let mut c = Self::default();
        for (k, v, line) in &kv.entries {
            c.set(k, v).map_err(|message| Error::Parse { path: path.to_string(), line: *line, message })?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let name = path.display().to_string();
        Self::from_kv(&KvConfig::parse(&read_file(path)?, &name)?, &name)
    }

    /// Applies one setting.
    pub fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        let b = &mut self.benchmark;
        let t = &mut b.train;
        match key {
            "seed" => self.seed = num(key, v)?,
            "seeds" => self.seeds = seed_list(key, v)?,
            "synth.n_pos" => b.synth.n_pos = num(key, v)?,
            "synth.n_neg" => b.synth.n_neg = num(key, v)?,
            "synth.n_unlabeled_pos" => b.synth.n_unlabeled_pos = num(key, v)?,
            "synth.n_unlabeled_neg" => b.synth.n_unlabeled_neg = num(key, v)?,
            "synth.n_eval_pos" => b.synth.n_eval_pos = num(key, v)?,
            "synth.n_eval_neg" => b.synth.n_eval_neg = num(key, v)?,
            "synth.dim" => b.synth.dim = num(key, v)?,
            "synth.class_separation" => b.synth.class_separation = num(key, v)?,
            "synth.noise_ratio" => b.synth.noise_ratio = num(key, v)?,
            "split.expert_ratio" => {
                b.expert_ratio = num(key, v)?;
                b.synth.expert_ratio = b.expert_ratio;
            }
            "split.imbalance_target" => b.imbalance_target = opt(key, v)?,
            "split.merge_expert_into_crowd" => b.merge_expert_into_crowd = num(key, v)?,
            "model.kind" => {
                b.model.kind = ModelKind::parse(v).ok_or_else(|| format!("`{key}`: expected linear or one_hidden, got `{v}`"))?
            }
            "model.hidden_dim" => b.model.hidden_dim = num(key, v)?,
            "model.init_scale" => b.model.init_scale = num(key, v)?,
            "model.input_dim" => self.input_dim = opt(key, v)?,
            "featurizer.dimension" => self.featurizer.dimension = num(key, v)?,
            "featurizer.ngram_min" => self.featurizer.ngram_min = num(key, v)?,
            "featurizer.ngram_max" => self.featurizer.ngram_max = num(key, v)?,
            "featurizer.lowercase" => self.featurizer.lowercase = num(key, v)?,
            "featurizer.signed_hashing" => self.featurizer.signed_hashing = num(key, v)?,
            "train.method" => {
                t.method = Method::parse(v).ok_or_else(|| format!("`{key}`: expected egal, supervised or uniform_ssl, got `{v}`"))?
            }
            "train.total_steps" => t.total_steps = num(key, v)?,
            "train.eval_every" => t.eval_every = num(key, v)?,
            "train.batch_labeled" => t.batch.labeled = num(key, v)?,
            "train.batch_unlabeled" => t.batch.unlabeled = num(key, v)?,
            "train.batch_reward" => t.batch.reward = num(key, v)?,
            "train.alpha" => t.alpha = num(key, v)?,
            "train.beta" => t.beta = num(key, v)?,
            "train.reward_lambda" => t.reward_loss.lambda = num(key, v)?,
            "train.score_kind" => {
                t.reward_loss.score_kind =
                    ScoreKind::parse(v).ok_or_else(|| format!("`{key}`: expected logit or prob, got `{v}`"))?
            }
            "train.pseudo_threshold" => t.pseudo.threshold = num(key, v)?,
            "train.patience" => t.patience = opt(key, v)?,
            "train.migration" => t.migration.enabled = num(key, v)?,
            "train.migration_window" => t.migration.window = num(key, v)?,
            "train.migration_min_encounters" => t.migration.min_encounters = num(key, v)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Every setting as `(key, value)`, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let b = &self.benchmark;
        let t = &b.train;
        let f = &self.featurizer;
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        vec![
            ("seed", self.seed.to_string()),
            ("seeds", seeds.join(",")),
            ("synth.n_pos", b.synth.n_pos.to_string()),
            ("synth.n_neg", b.synth.n_neg.to_string()),
            ("synth.n_unlabeled_pos", b.synth.n_unlabeled_pos.to_string()),
            ("synth.n_unlabeled_neg", b.synth.n_unlabeled_neg.to_string()),
            ("synth.n_eval_pos", b.synth.n_eval_pos.to_string()),
            ("synth.n_eval_neg", b.synth.n_eval_neg.to_string()),
            ("synth.dim", b.synth.dim.to_string()),
            ("synth.class_separation", b.synth.class_separation.to_string()),
            ("synth.noise_ratio", b.synth.noise_ratio.to_string()),
            ("split.expert_ratio", b.expert_ratio.to_string()),
            ("split.imbalance_target", show_opt(&b.imbalance_target)),
            ("split.merge_expert_into_crowd", b.merge_expert_into_crowd.to_string()),
            ("model.kind", b.model.kind.name().to_string()),
            ("model.hidden_dim", b.model.hidden_dim.to_string()),
            ("model.init_scale", b.model.init_scale.to_string()),
            ("model.input_dim", show_opt(&self.input_dim)),
            ("featurizer.dimension", f.dimension.to_string()),
            ("featurizer.ngram_min", f.ngram_min.to_string()),
            ("featurizer.ngram_max", f.ngram_max.to_string()),
            ("featurizer.lowercase", f.lowercase.to_string()),
            ("featurizer.signed_hashing", f.signed_hashing.to_string()),
            ("train.method", t.method.name().to_string()),
            ("train.total_steps", t.total_steps.to_string()),
            ("train.eval_every", t.eval_every.to_string()),
            ("train.batch_labeled", t.batch.labeled.to_string()),
            ("train.batch_unlabeled", t.batch.unlabeled.to_string()),
            ("train.batch_reward", t.batch.reward.to_string()),
            ("train.alpha", t.alpha.to_string()),
            ("train.beta", t.beta.to_string()),
            ("train.reward_lambda", t.reward_loss.lambda.to_string()),
            ("train.score_kind", t.reward_loss.score_kind.name().to_string()),
            ("train.pseudo_threshold", t.pseudo.threshold.to_string()),
            ("train.patience", show_opt(&t.patience)),
            ("train.migration", t.migration.enabled.to_string()),
            ("train.migration_window", t.migration.window.to_string()),
            ("train.migration_min_encounters", t.migration.min_encounters.to_string()),
        ]
    }

    /// The full `key = value` listing.
    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.benchmark;
        b.synth.validate()?;
        self.featurizer.validate()?;
        b.train.validate()?;
        if !(b.expert_ratio > 0.0 && b.expert_ratio <= 1.0) {
            return Err(Error::Config(format!("split.expert_ratio must be in (0, 1], got {}", b.expert_ratio)));
        }
        if let Some(g) = b.imbalance_target {
            if !(g >= 1.0 && g.is_finite()) {
                return Err(Error::Config(format!("split.imbalance_target must be >= 1, got {g}")));
            }
        }
        if b.model.init_scale < 0.0 || !b.model.init_scale.is_finite() {
            return Err(Error::Config("model.init_scale must be finite and >= 0".into()));
        }
        if self.input_dim == Some(0) {
            return Err(Error::Config("model.input_dim must be >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn listing_roundtrips() {
        let mut c = RunConfig::default();
        c.seed = 7;
        c.benchmark.imbalance_target = Some(5.0);
        c.benchmark.train.patience = None;
        c.benchmark.model.kind = ModelKind::OneHidden;
        let text = c.to_text();
        let back = RunConfig::from_kv(&KvConfig::parse(&text, "c").unwrap(), "c").unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn comments_and_blank_lines() {
        let kv = KvConfig::parse("# run\n\nseed = 3\n  train.alpha=0.5  \n", "c").unwrap();
        let c = RunConfig::from_kv(&kv, "c").unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.benchmark.train.alpha, 0.5);
    }

    #[test]
    fn rejects_bad_input_with_line() {
        let e = RunConfig::from_kv(&KvConfig::parse("seed = 1\nbogus = 2\n", "r.cfg").unwrap(), "r.cfg").unwrap_err();
        assert_eq!(e.to_string(), "r.cfg:2: unknown key `bogus`");
        let e = RunConfig::from_kv(&KvConfig::parse("train.alpha = fast\n", "r").unwrap(), "r").unwrap_err();
        assert!(e.to_string().starts_with("r:1:"));
        assert!(KvConfig::parse("seed\n", "r").is_err());
        assert!(KvConfig::parse("seed=1\nseed=2\n", "r").is_err());
        assert!(RunConfig::from_kv(&KvConfig::parse("split.expert_ratio = 1.5\n", "r").unwrap(), "r").is_err());
        assert!(RunConfig::from_kv(&KvConfig::parse("train.eval_every = 0\n", "r").unwrap(), "r").is_err());
    }
}
