//! Built-in model files.

use super::{ModelConfig, ModelParams};
use crate::error::{Error, Result};

pub const PAPER_SEC4: &str = include_str!("../../presets/paper-sec4.toml");
pub const STICKY_PRICE: &str = include_str!("../../presets/sticky-price.toml");

pub const NAMES: [&str; 2] = ["paper-sec4", "sticky-price"];

/// Source text of a built-in model file.
pub fn source(name: &str) -> Result<&'static str> {
    match name {
        "paper-sec4" => Ok(PAPER_SEC4),
        "sticky-price" => Ok(STICKY_PRICE),
        other => Err(Error::Config(format!(
            "unknown preset `{other}`; available: {}",
            NAMES.join(", ")
        ))),
    }
}

pub fn config(name: &str) -> Result<ModelConfig> {
    ModelConfig::from_toml_str(source(name)?)
}

/// The two-dimensional benchmark: T = 10, 50 agents, uniform initial states
/// on `[0,5] x [0,2]`.
pub fn paper_sec4() -> ModelParams {
    config("paper-sec4")
        .and_then(|c| c.to_params())
        .expect("built-in preset is valid")
}

/// Sticky-price production model with indefinite weights.
pub fn sticky_price() -> ModelParams {
    config("sticky-price")
        .and_then(|c| c.to_params())
        .expect("built-in preset is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Horizon;

    #[test]
    fn paper_preset_values() {
        let p = paper_sec4();
        assert_eq!(p.horizon, Horizon::Finite(10.0));
        assert_eq!(p.b.as_slice(), &[2.5, 1.6]);
        assert_eq!(p.gamma0[(0, 0)], 0.2);
        assert_eq!(p.init_mean.as_slice(), &[2.5, 1.0]);
        let t = 4.0;
        assert_eq!(p.drift_offset.eval(t).as_slice(), &[0.2, 0.05 * 8.0]);
        assert_eq!(p.target.eval(t).as_slice(), &[0.4, 0.2]);
        assert_eq!(p.noise_offset.eval(0.0).as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn sticky_price_price_row() {
        let p = sticky_price();
        // alpha (beta - q^N + p): drift offset alpha beta, mean-field gain -alpha.
        assert_eq!(p.drift_offset.eval(0.0)[1], 5.0);
        assert_eq!(p.g[(1, 0)], -0.5);
        assert_eq!(p.init_mean.as_slice(), &[1.0, 5.0]);
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(config("nope"), Err(Error::Config(_))));
    }
}
