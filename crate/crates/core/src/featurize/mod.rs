//! Text hashing and synthetic benchmark generation.

mod hashing;
mod synth;

pub use hashing::{hash64, hash_features, HashFeaturizerConfig, HashedText};
pub use synth::{empirical_noise_ratio, synth_generate, synth_pool, SynthConfig, SynthPool, TruthLabels};
