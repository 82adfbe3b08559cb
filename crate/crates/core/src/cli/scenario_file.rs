//! TOML scenario files.
//!
//! ```toml
//! dim = 2
//! initial = { preset = "x+" }
//! final_basis = { preset = "y" }
//!
//! [[observables]]
//! name = "X+Y"
//! pauli_string = "X + Y"
//!
//! [sim]
//! g = 0.05
//! sigma = 1.0
//! shots = 200000
//! seed = 7
//! ```
//!
//! Complex entries are `[re, im]` pairs. Explicit matrices are lists of rows.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, ComplexVector, C64};
use crate::simulator::SimConfig;
use crate::states::{parse_pauli_expression, FinalBasis, Observable, PureState, Scenario};

/// Name accepted in place of a scenario path for the built-in demo.
pub const PAULI_DEMO: &str = "pauli_demo";

pub type Pair = [f64; 2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub dim: usize,
    pub initial: StateSpec,
    pub final_basis: BasisSpec,
    #[serde(default)]
    pub observables: Vec<ObservableSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimConfig>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<Pair>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vectors: Option<Vec<Vec<Pair>>>,
    /// `x`, `y`, `z`, `computational` or `eigenbasis:<observable name>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<Pair>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pauli_string: Option<String>,
}

fn scenario_error(path: impl Into<String>, message: impl std::fmt::Display) -> Error {
    Error::Scenario {
        path: path.into(),
        message: message.to_string(),
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |p| p + 1) + 1;
    (line, col)
}

fn to_c64(path: &str, pair: &Pair) -> Result<C64> {
    if pair.iter().all(|x| x.is_finite()) {
        Ok(C64::new(pair[0], pair[1]))
    } else {
        Err(scenario_error(path, "complex entry must be finite"))
    }
}

fn vector_from_pairs(path: &str, pairs: &[Pair], dim: usize) -> Result<ComplexVector> {
    if pairs.len() != dim {
        return Err(scenario_error(
            path,
            format!("expected {dim} amplitudes, got {}", pairs.len()),
        ));
    }
    let data = pairs
        .iter()
        .enumerate()
        .map(|(k, p)| to_c64(&format!("{path}[{k}]"), p))
        .collect::<Result<Vec<_>>>()?;
    ComplexVector::new(data).map_err(|e| scenario_error(path, e))
}

fn matrix_from_pairs(path: &str, rows: &[Vec<Pair>], dim: usize) -> Result<ComplexMatrix> {
    if rows.len() != dim {
        return Err(scenario_error(
            path,
            format!("expected {dim} rows, got {}", rows.len()),
        ));
    }
    let mut data = Vec::with_capacity(dim * dim);
    for (r, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(scenario_error(
                format!("{path}[{r}]"),
                format!("expected {dim} entries, got {}", row.len()),
            ));
        }
        for (c, p) in row.iter().enumerate() {
            data.push(to_c64(&format!("{path}[{r}][{c}]"), p)?);
        }
    }
    ComplexMatrix::from_row_major(dim, dim, data).map_err(|e| scenario_error(path, e))
}

fn pairs_of(v: &ComplexVector) -> Vec<Pair> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

impl StateSpec {
    fn build(&self, path: &str, dim: usize) -> Result<PureState> {
        let state = match (&self.amplitudes, &self.preset) {
            (Some(amps), None) => {
                let ket = vector_from_pairs(&format!("{path}.amplitudes"), amps, dim)?;
                PureState::new(ket, None)
                    .map_err(|e| scenario_error(format!("{path}.amplitudes"), e))?
            }
            (None, Some(name)) => {
                let s = PureState::preset(name)
                    .map_err(|e| scenario_error(format!("{path}.preset"), e))?;
                if s.dim() != dim {
                    return Err(scenario_error(
                        format!("{path}.preset"),
                        format!(
                            "preset '{name}' has dimension {}, scenario has {dim}",
                            s.dim()
                        ),
                    ));
                }
                s
            }
            _ => {
                return Err(scenario_error(
                    path,
                    "exactly one of 'amplitudes' or 'preset' is required",
                ))
            }
        };
        Ok(match &self.label {
            Some(l) => state.with_label(l.clone()),
            None => state,
        })
    }

    fn describe(state: &PureState) -> Self {
        Self {
            amplitudes: Some(pairs_of(state.ket())),
            preset: None,
            label: state.label().map(str::to_owned),
        }
    }
}

impl BasisSpec {
    fn build(&self, dim: usize, observables: &[Observable], tol: f64) -> Result<FinalBasis> {
        let path = "final_basis";
        let basis = match (&self.vectors, &self.preset) {
            (Some(vectors), None) => {
                let labels = self.labels.as_deref();
                if let Some(l) = labels {
                    if l.len() != vectors.len() {
                        return Err(scenario_error(
                            format!("{path}.labels"),
                            format!("{} labels for {} vectors", l.len(), vectors.len()),
                        ));
                    }
                }
                let states = vectors
                    .iter()
                    .enumerate()
                    .map(|(k, v)| {
                        let p = format!("{path}.vectors[{k}]");
                        let ket = vector_from_pairs(&p, v, dim)?;
                        let label = labels.map(|l| l[k].clone());
                        PureState::new(ket, label).map_err(|e| scenario_error(&p, e))
                    })
                    .collect::<Result<Vec<_>>>()?;
                return FinalBasis::new(states, tol)
                    .map_err(|e| scenario_error(format!("{path}.vectors"), e));
            }
            (None, Some(name)) => {
                let p = format!("{path}.preset");
                let basis = if name == "computational" {
                    FinalBasis::computational(dim)
                } else if let Some(obs) = name.strip_prefix("eigenbasis:") {
                    let a = observables
                        .iter()
                        .find(|a| a.label() == obs)
                        .ok_or_else(|| {
                            scenario_error(&p, format!("no observable named '{obs}'"))
                        })?;
                    FinalBasis::eigenbasis(a)
                } else {
                    FinalBasis::preset(name).map_err(|e| scenario_error(&p, e))?
                };
                if basis.dim() != dim {
                    return Err(scenario_error(
                        p,
                        format!(
                            "preset '{name}' has dimension {}, scenario has {dim}",
                            basis.dim()
                        ),
                    ));
                }
                basis
            }
            _ => {
                return Err(scenario_error(
                    path,
                    "exactly one of 'vectors' or 'preset' is required",
                ))
            }
        };
        if self.labels.is_some() {
            return Err(scenario_error(
                format!("{path}.labels"),
                "labels are only allowed with explicit vectors",
            ));
        }
        Ok(basis)
    }

    fn describe(basis: &FinalBasis) -> Self {
        Self {
            vectors: Some(basis.vectors().iter().map(|v| pairs_of(v.ket())).collect()),
            preset: None,
            labels: Some((0..basis.dim()).map(|k| basis.label(k)).collect()),
        }
    }
}

impl ObservableSpec {
    fn build(&self, path: &str, dim: usize) -> Result<Observable> {
        let matrix = match (&self.matrix, &self.pauli_string) {
            (Some(rows), None) => matrix_from_pairs(&format!("{path}.matrix"), rows, dim)?,
            (None, Some(expr)) => {
                let p = format!("{path}.pauli_string");
                let m = parse_pauli_expression(expr).map_err(|e| scenario_error(&p, e))?;
                if m.rows() != dim {
                    return Err(scenario_error(
                        p,
                        format!(
                            "'{expr}' acts on dimension {}, scenario has {dim}",
                            m.rows()
                        ),
                    ));
                }
                m
            }
            _ => {
                return Err(scenario_error(
                    path,
                    "exactly one of 'matrix' or 'pauli_string' is required",
                ))
            }
        };
        Observable::new(self.name.clone(), matrix).map_err(|e| scenario_error(path, e))
    }

    fn describe(a: &Observable) -> Self {
        let m = a.matrix();
        Self {
            name: a.label().to_owned(),
            matrix: Some(
                (0..m.rows())
                    .map(|r| m.row(r).iter().map(|z| [z.re, z.im]).collect())
                    .collect(),
            ),
            pauli_string: None,
        }
    }
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| {
            let at = e.span().map(|s| line_col(text, s.start));
            scenario_error("", with_position(e.message(), at))
        })?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let at = inner.span().map(|s| line_col(text, s.start));
            scenario_error(
                if path == "." { String::new() } else { path },
                with_position(inner.message(), at),
            )
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| scenario_error("", e))
    }

    pub fn into_scenario(&self, basis_tol: f64) -> Result<Scenario> {
        if self.dim == 0 {
            return Err(scenario_error("dim", "dimension must be positive"));
        }
        let initial = self.initial.build("initial", self.dim)?;
        let observables = self
            .observables
            .iter()
            .enumerate()
            .map(|(k, o)| o.build(&format!("observables[{k}]"), self.dim))
            .collect::<Result<Vec<_>>>()?;
        for (k, o) in observables.iter().enumerate() {
            if observables[..k].iter().any(|p| p.label() == o.label()) {
                return Err(scenario_error(
                    format!("observables[{k}].name"),
                    format!("duplicate observable name '{}'", o.label()),
                ));
            }
        }
        let final_basis = self.final_basis.build(self.dim, &observables, basis_tol)?;
        if let Some(cfg) = &self.sim {
            cfg.validate().map_err(|e| scenario_error("sim", e))?;
        }
        Scenario::new(initial, final_basis, observables, self.sim.clone())
            .map_err(|e| scenario_error("", e))
    }

    /// Fully explicit description of `s`; presets are expanded.
    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            dim: s.dim,
            initial: StateSpec::describe(&s.initial),
            final_basis: BasisSpec::describe(&s.final_basis),
            observables: s.observables.iter().map(ObservableSpec::describe).collect(),
            sim: s.sim.clone(),
        }
    }
}

fn with_position(message: &str, at: Option<(usize, usize)>) -> String {
    match at {
        Some((line, col)) => format!("{} (line {line}, column {col})", message.trim_end()),
        None => message.trim_end().to_owned(),
    }
}

pub fn parse_scenario(text: &str, basis_tol: f64) -> Result<Scenario> {
    ScenarioFile::parse(text)?.into_scenario(basis_tol)
}

/// Loads a scenario file, or the built-in demo when `path` is `pauli_demo`.
pub fn load_scenario(path: &Path, basis_tol: f64) -> Result<Scenario> {
    if path.as_os_str() == PAULI_DEMO && !path.exists() {
        return Ok(Scenario::pauli_demo());
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| scenario_error("", format!("cannot read {}: {e}", path.display())))?;
    parse_scenario(&text, basis_tol)
}
