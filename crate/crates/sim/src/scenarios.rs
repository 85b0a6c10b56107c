//! Scenarios shipped with the crate, embedded at build time.

use crate::config::{ConfigError, ScenarioConfig};

macro_rules! shipped {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../scenarios/", $name, ".toml")))),*]
    };
}

/// `(name, TOML text)` for every shipped scenario.
pub const SHIPPED: &[(&str, &str)] = shipped![
    "beer_lambert",
    "dark_state_cw",
    "fig1b_comb_scan",
    "fig1c_transmitted_spectrum",
    "fig1d_matched_probe",
    "fig2a_broadband_delay",
    "fig2b_broadband_storage",
    "fig3_groupvel",
    "fig4a_conversion",
    "fig4b_two_color",
    "eit_linewidth",
    "adiabaticity_breakdown",
];

pub fn names() -> impl Iterator<Item = &'static str> {
    SHIPPED.iter().map(|(n, _)| *n)
}

pub fn source(name: &str) -> Option<&'static str> {
    SHIPPED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Parses a shipped scenario by name.
pub fn load(name: &str) -> Option<Result<ScenarioConfig, ConfigError>> {
    source(name).map(ScenarioConfig::from_toml_str)
}
