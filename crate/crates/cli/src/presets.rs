//! Built-in scenarios. The same files ship under `presets/` so they can be
//! copied and edited.

use crate::config::ScenarioConfig;
use crate::error::ConfigError;

pub const PRESETS: &[(&str, &str)] = &[
    ("fig5", include_str!("../../../presets/fig5.cfg")),
    ("table2", include_str!("../../../presets/table2.cfg")),
    ("table3", include_str!("../../../presets/table3.cfg")),
    ("inf_timeout", include_str!("../../../presets/inf_timeout.cfg")),
    ("consensus2", include_str!("../../../presets/consensus2.cfg")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(name, _)| *name)
}

pub fn preset(name: &str) -> Result<ScenarioConfig, ConfigError> {
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| ConfigError::UnknownPreset(name.to_owned()))?;
    text.parse()
}

pub fn preset_library() -> Result<Vec<(&'static str, ScenarioConfig)>, ConfigError> {
    PRESETS
        .iter()
        .map(|(name, text)| text.parse().map(|cfg| (*name, cfg)))
        .collect()
}
