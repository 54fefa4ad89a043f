//! TOML model files. See `model.schema.md` at the repository root.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{discount_transform, cross_term_transform, Dims, Horizon, InitLaw, ModelParams, ScalarSignal, Signal};
use crate::error::{Error, Result};

/// Matrix entry of a model file: a scalar `s` (meaning `s I`), a flat list
/// (a column, for single-column matrices) or row-major rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Scalar(f64),
    Column(Vec<f64>),
    Rows(Vec<Vec<f64>>),
}

impl MatrixSpec {
    fn build(&self, name: &str, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        match self {
            MatrixSpec::Scalar(s) if rows == cols => Ok(DMatrix::identity(rows, cols) * *s),
            MatrixSpec::Scalar(_) => Err(Error::Config(format!(
                "{name}: a scalar stands for a multiple of the identity, but {name} is {rows}x{cols}"
            ))),
            MatrixSpec::Column(v) => Ok(DMatrix::from_column_slice(v.len(), 1, v)),
            MatrixSpec::Rows(r) => {
                let ncols = r.first().map_or(0, Vec::len);
                if r.iter().any(|row| row.len() != ncols) {
                    return Err(Error::Config(format!("{name}: rows have different lengths")));
                }
                Ok(DMatrix::from_row_iterator(
                    r.len(),
                    ncols,
                    r.iter().flatten().cloned(),
                ))
            }
        }
    }
}

/// One scalar signal component as written in a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSpec {
    pub kind: String,
    #[serde(default)]
    pub coeffs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
}

impl SignalSpec {
    fn build(&self, name: &str) -> Result<ScalarSignal> {
        let c = &self.coeffs;
        let want = |k: std::ops::RangeInclusive<usize>| {
            if k.contains(&c.len()) {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "{name}: {} signal takes {}..={} coefficients, got {}",
                    self.kind,
                    k.start(),
                    k.end(),
                    c.len()
                )))
            }
        };
        let s = match self.kind.as_str() {
            "constant" => {
                want(1..=1)?;
                ScalarSignal::Constant { value: c[0] }
            }
            "polynomial" => {
                want(1..=usize::MAX)?;
                ScalarSignal::Polynomial { coeffs: c.clone() }
            }
            "sinusoid" => {
                want(2..=4)?;
                ScalarSignal::Sinusoid {
                    amplitude: c[0],
                    frequency: c[1],
                    phase: c.get(2).copied().unwrap_or(0.0),
                    offset: c.get(3).copied().unwrap_or(0.0),
                }
            }
            "power-law" => {
                want(2..=2)?;
                ScalarSignal::PowerLaw {
                    scale: c[0],
                    exponent: c[1],
                }
            }
            "tabulated" => ScalarSignal::Tabulated {
                times: self.times.clone().ok_or_else(|| {
                    Error::Config(format!("{name}: tabulated signal needs `times`"))
                })?,
                values: c.clone(),
            },
            other => {
                return Err(Error::Config(format!("{name}: unknown signal kind `{other}`")))
            }
        };
        if self.times.is_some() && self.kind != "tabulated" {
            return Err(Error::Config(format!("{name}: `times` only applies to tabulated signals")));
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComponentSpec {
    Value(f64),
    Signal(SignalSpec),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<ComponentSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<ComponentSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma0: Option<Vec<ComponentSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<Vec<ComponentSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HorizonSpec {
    Finite {
        #[serde(rename = "T")]
        t: f64,
    },
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimsSpec {
    pub n: usize,
    pub r: usize,
}

/// Simulation settings carried by a model file; command-line flags override
/// them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSpec {
    pub agents: usize,
    pub steps: usize,
    pub replications: usize,
    pub seed: u64,
    /// Simulation window for infinite-horizon models.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        SimulationSpec {
            agents: 50,
            steps: 2000,
            replications: 256,
            seed: 1,
            window: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformsSpec {
    #[serde(default)]
    pub discount_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_term: Option<MatrixSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub dims: DimsSpec,
    pub horizon: HorizonSpec,
    #[serde(default)]
    pub matrices: BTreeMap<String, MatrixSpec>,
    #[serde(default)]
    pub signals: SignalsSpec,
    pub init: InitLaw,
    #[serde(default)]
    pub simulation: SimulationSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transforms: Option<TransformsSpec>,
}

const MATRIX_KEYS: [&str; 14] = [
    "A", "B", "G", "C", "D", "F", "C0", "D0", "F0", "Q", "R", "Gamma", "H", "Gamma0",
];

impl ModelConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let value: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Self::from_table(value)
    }

    pub fn from_table(table: toml::Table) -> Result<Self> {
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Assemble the model, applying the optional discount and cross-term
    /// reductions. Missing matrices and signals are zero.
    pub fn to_params(&self) -> Result<ModelParams> {
        let DimsSpec { n, r } = self.dims;
        if n == 0 || r == 0 {
            return Err(Error::InvalidParameter {
                name: "dims",
                reason: format!("need n >= 1 and r >= 1, got n = {n}, r = {r}"),
            });
        }
        if let Some(bad) = self.matrices.keys().find(|k| !MATRIX_KEYS.contains(&k.as_str())) {
            return Err(Error::Config(format!(
                "unknown matrix `{bad}`; expected one of {}",
                MATRIX_KEYS.join(", ")
            )));
        }
        let horizon = match self.horizon {
            HorizonSpec::Finite { t } => Horizon::Finite(t),
            HorizonSpec::Infinite => Horizon::Infinite,
        };
        let mut p = ModelParams::zeros(n, r, horizon);
        p.dims = Dims { n, r };
        for (key, spec) in &self.matrices {
            let (rows, cols) = match key.as_str() {
                "B" | "D" | "D0" => (n, r),
                "R" => (r, r),
                _ => (n, n),
            };
            let m = spec.build(key, rows, cols)?;
            let slot = match key.as_str() {
                "A" => &mut p.a,
                "B" => &mut p.b,
                "G" => &mut p.g,
                "C" => &mut p.c,
                "D" => &mut p.d,
                "F" => &mut p.f,
                "C0" => &mut p.c0,
                "D0" => &mut p.d0,
                "F0" => &mut p.f0,
                "Q" => &mut p.q,
                "R" => &mut p.r,
                "Gamma" => &mut p.gamma,
                "H" => &mut p.h,
                _ => &mut p.gamma0,
            };
            *slot = m;
        }
        let signal = |name: &str, spec: &Option<Vec<ComponentSpec>>| -> Result<Signal> {
            match spec {
                None => Ok(Signal::zero(n)),
                Some(parts) => parts
                    .iter()
                    .map(|c| match c {
                        ComponentSpec::Value(v) => Ok(ScalarSignal::Constant { value: *v }),
                        ComponentSpec::Signal(s) => s.build(name),
                    })
                    .collect::<Result<Vec<_>>>()
                    .map(Signal::Components),
            }
        };
        p.drift_offset = signal("f", &self.signals.f)?;
        p.noise_offset = signal("sigma", &self.signals.sigma)?;
        p.common_noise_offset = signal("sigma0", &self.signals.sigma0)?;
        p.target = signal("eta", &self.signals.eta)?;
        if let Some(eta0) = &self.signals.eta0 {
            p.terminal_target = DVector::from_column_slice(eta0);
        }
        p = p.with_init_law(self.init.clone());
        p.check_shapes()?;

        if let Some(tr) = &self.transforms {
            p = discount_transform(&p, tr.discount_rate)?;
            if let Some(s) = &tr.cross_term {
                let s = s.build("cross_term", n, r)?;
                p = cross_term_transform(&p, &s)?.0;
            }
        }
        Ok(p)
    }
}

/// Apply one `key=value` override with a dotted key path to a parsed model
/// file. The value is read as a TOML literal, falling back to a bare string.
/// Numeric path segments index into arrays.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not of the form key=value")))?;
    let path = path.trim();
    let raw = raw.trim();
    if path.is_empty() {
        return Err(Error::Config(format!("override `{assignment}` has an empty key")));
    }
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed table has the key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };

    let segments: Vec<&str> = path.split('.').collect();
    let (last, parents) = segments.split_last().expect("path is nonempty");
    let mut wrapped = toml::Value::Table(std::mem::take(table));
    let result = descend_and_set(&mut wrapped, parents, last, value, assignment);
    if let toml::Value::Table(t) = wrapped {
        *table = t;
    }
    result
}

fn descend_and_set(
    root: &mut toml::Value,
    parents: &[&str],
    last: &str,
    value: toml::Value,
    assignment: &str,
) -> Result<()> {
    let bad = |why: &str| Error::Config(format!("override `{assignment}`: {why}"));
    let mut cur = root;
    for seg in parents {
        cur = match cur {
            toml::Value::Table(t) => t
                .entry(seg.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new())),
            toml::Value::Array(a) => {
                let i: usize = seg.parse().map_err(|_| bad("array segment must be an index"))?;
                let len = a.len();
                a.get_mut(i).ok_or_else(|| bad(&format!("index {i} out of range for length {len}")))?
            }
            _ => return Err(bad(&format!("`{seg}` descends into a scalar"))),
        };
    }
    match cur {
        toml::Value::Table(t) => {
            t.insert(last.to_string(), value);
        }
        toml::Value::Array(a) => {
            let i: usize = last.parse().map_err(|_| bad("array segment must be an index"))?;
            let len = a.len();
            *a.get_mut(i).ok_or_else(|| bad(&format!("index {i} out of range for length {len}")))? = value;
        }
        _ => return Err(bad("parent is a scalar")),
    }
    Ok(())
}
