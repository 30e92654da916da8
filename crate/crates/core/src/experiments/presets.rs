//! Built-in experiment configurations.
//!
//! Each benchmark ships a desk-scale preset sized for a laptop and a
//! `-full` preset with the full ensemble size; both share the same
//! structure and data seed.

use crate::error::{Error, Result};

use super::config::ExperimentConfig;

pub const PRESETS: [(&str, &str); 11] = [
    ("bernoulli-s04", include_str!("../../presets/bernoulli-s04.json")),
    ("bernoulli-s08", include_str!("../../presets/bernoulli-s08.json")),
    ("bernoulli-s04-full", include_str!("../../presets/bernoulli-s04-full.json")),
    ("bernoulli-s08-full", include_str!("../../presets/bernoulli-s08-full.json")),
    ("lorenz-x", include_str!("../../presets/lorenz-x.json")),
    ("lorenz-y", include_str!("../../presets/lorenz-y.json")),
    ("lorenz-x-full", include_str!("../../presets/lorenz-x-full.json")),
    ("lorenz-y-full", include_str!("../../presets/lorenz-y-full.json")),
    ("erk", include_str!("../../presets/erk.json")),
    ("erk-full", include_str!("../../presets/erk-full.json")),
    ("linear", include_str!("../../presets/linear.json")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn load(name: &str) -> Result<ExperimentConfig> {
    let text = source(name).ok_or_else(|| {
        Error::Config(format!(
            "unknown preset `{name}` (available: {})",
            names().collect::<Vec<_>>().join(", ")
        ))
    })?;
    ExperimentConfig::from_json(text)
}
