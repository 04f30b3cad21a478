//! Bundled scenarios.

use crate::config::Scenario;

const FIG2A: &str = include_str!("../presets/fig2a.toml");
const FIG2B: &str = include_str!("../presets/fig2b.toml");
const FIG2C: &str = include_str!("../presets/fig2c.toml");
const FIG2D: &str = include_str!("../presets/fig2d.toml");

pub const PRESET_NAMES: [&str; 4] = ["fig2a", "fig2b", "fig2c", "fig2d"];

/// Loads a bundled scenario by name; an "-ideal" suffix zeroes the
/// decoherence and disables the crosstalk.
pub fn preset(name: &str) -> Option<anyhow::Result<Scenario>> {
    let (base, idealized) = match name.strip_suffix("-ideal") {
        Some(base) => (base, true),
        None => (name, false),
    };
    let text = match base {
        "fig2a" => FIG2A,
        "fig2b" => FIG2B,
        "fig2c" => FIG2C,
        "fig2d" => FIG2D,
        _ => return None,
    };
    Some(Scenario::from_toml(text).map(|s| if idealized { s.idealized() } else { s }))
}

/// Loads a scenario from a preset name or a file path.
pub fn load_scenario(name_or_path: &str) -> anyhow::Result<Scenario> {
    if let Some(result) = preset(name_or_path) {
        return result;
    }
    let path = std::path::Path::new(name_or_path);
    if path.exists() {
        return Scenario::from_path(path);
    }
    anyhow::bail!(
        "'{name_or_path}' is neither a bundled scenario ({}, each optionally with an \
         -ideal suffix) nor an existing file",
        PRESET_NAMES.join(", ")
    )
}
