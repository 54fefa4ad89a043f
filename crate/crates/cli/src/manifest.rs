use std::fs;
use std::path::Path;

use mflq_core::model::{apply_override, presets, ModelConfig};
use mflq_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::args::RunArgs;

pub const DEFAULT_N_LIST: [usize; 7] = [8, 16, 32, 64, 128, 256, 512];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Riccati,
    Stationary,
    Simulate,
    Sweep,
    Nash,
    ReproduceSec4,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Riccati => "riccati",
            CommandKind::Stationary => "stationary",
            CommandKind::Simulate => "simulate",
            CommandKind::Sweep => "sweep",
            CommandKind::Nash => "nash",
            CommandKind::ReproduceSec4 => "reproduce-sec4",
        }
    }
}

/// Everything a run depends on. Written as `manifest.json` next to the
/// artifacts; running it again reproduces them byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: CommandKind,
    /// Model file path or `preset:<name>`.
    pub source: String,
    pub overrides: Vec<String>,
    /// The model file after overrides, as TOML.
    pub model: String,
    pub seed: u64,
    pub agents: usize,
    pub steps: usize,
    pub replications: usize,
    pub n_list: Vec<usize>,
    pub svg: bool,
}

impl RunManifest {
    /// Resolve the model source, apply overrides, and fill unset options from
    /// the model file's simulation section.
    pub fn from_args(command: CommandKind, args: &RunArgs) -> Result<Self> {
        let (source, text) = match (&args.model, &args.preset) {
            (Some(path), _) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    Error::Config(format!("cannot read {}: {e}", path.display()))
                })?;
                (path.display().to_string(), text)
            }
            (None, Some(name)) => (format!("preset:{name}"), presets::source(name)?.to_string()),
            (None, None) if command == CommandKind::ReproduceSec4 => {
                ("preset:paper-sec4".to_string(), presets::PAPER_SEC4.to_string())
            }
            (None, None) => {
                return Err(Error::Config("give a model with --model or --preset".into()))
            }
        };
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        for o in &args.overrides {
            apply_override(&mut table, o)?;
        }
        let config = ModelConfig::from_table(table)?;
        let sim = &config.simulation;
        let agents = args.agents.unwrap_or(sim.agents);
        let n_list = match (&args.n_list, command) {
            (Some(list), _) => list.clone(),
            (None, CommandKind::Sweep | CommandKind::ReproduceSec4) => DEFAULT_N_LIST.to_vec(),
            (None, _) => vec![agents],
        };
        Ok(RunManifest {
            tool: "mflq".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command,
            source,
            overrides: args.overrides.clone(),
            seed: args.seed.unwrap_or(sim.seed),
            agents,
            steps: args.steps.unwrap_or(sim.steps),
            replications: args.replications.unwrap_or(sim.replications),
            model: config.to_toml_string()?,
            n_list,
            svg: args.svg,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("manifest: {e}")))
    }

    pub fn config(&self) -> Result<ModelConfig> {
        ModelConfig::from_toml_str(&self.model)
    }
}
