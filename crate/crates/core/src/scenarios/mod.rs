//! Reproducible experiments: scenario files, batch runners and artifacts.

mod artifacts;
mod config;
mod runners;

pub use artifacts::{scenario_hash, write_outcome, RunManifest};
pub use config::{parse_scenario, parse_scenario_as, Scenario, ScenarioKind, SweepSpec};
pub use runners::*;

use crate::error::{Error, Result};

const BUILTIN: [(&str, &str); 6] = [
    ("dispersion", include_str!("../../../../configs/dispersion.toml")),
    ("tones", include_str!("../../../../configs/tones.toml")),
    ("gain", include_str!("../../../../configs/gain.toml")),
    ("phase", include_str!("../../../../configs/phase.toml")),
    ("reflect", include_str!("../../../../configs/reflect.toml")),
    ("uniform", include_str!("../../../../configs/uniform.toml")),
];

/// Names accepted by [`builtin`].
pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTIN.iter().map(|b| b.0)
}

/// Source text of a built-in scenario.
pub fn builtin_source(name: &str) -> Option<&'static str> {
    BUILTIN.iter().find(|b| b.0 == name).map(|b| b.1)
}

/// Kind of the built-in scenario `name`.
pub fn builtin_kind(name: &str) -> Result<ScenarioKind> {
    Ok(builtin(name)?.kind)
}

/// One of the canned reference-design scenarios.
pub fn builtin(name: &str) -> Result<Scenario> {
    let text = builtin_source(name)
        .ok_or_else(|| Error::Config(format!("no built-in scenario named {name:?}")))?;
    parse_scenario(text)
}
