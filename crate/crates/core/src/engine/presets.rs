use super::{EngineError, ExperimentConfig};

pub const PRESET_NAMES: [&str; 2] = ["fig4", "fig5"];

const FIG4: &str = include_str!("../../presets/fig4.toml");
const FIG5: &str = include_str!("../../presets/fig5.toml");

pub fn preset(name: &str) -> Result<ExperimentConfig, EngineError> {
    let text = match name {
        "fig4" => FIG4,
        "fig5" => FIG5,
        other => {
            return Err(EngineError::Config(format!(
                "name: unknown preset {other:?} (expected one of {})",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    ExperimentConfig::from_toml(text)
}
