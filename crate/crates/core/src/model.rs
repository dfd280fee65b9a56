//! Switched linear system data: mode matrices, fixed dwell times, and the
//! generator of the random part of the switching signal.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matlib::{expm, Matrix};

/// Current model file schema. Files without a `schema_version` field are
/// read as this version.
pub const SCHEMA_VERSION: u32 = 1;

/// Row sums of the generator up to this absolute residual are repaired by
/// adjusting the diagonal.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("mode {0} is absorbing (pi_ii = 0)")]
    AbsorbingMode(usize),
    #[error("mode {0} has a negative fixed dwell time")]
    NegativeDwell(usize),
    #[error("generator row {0} is not a valid rate row")]
    BadGeneratorRow(usize),
    #[error("dimension mismatch in {field}: {detail}")]
    DimensionMismatch { field: String, detail: String },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("at least two modes are required, got {0}")]
    TooFewModes(usize),
}

/// Every violated invariant found by [`SwitchedLinearSystem::validate`].
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ValidationErrors(pub Vec<ModelError>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msgs: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        write!(f, "invalid system: {}", msgs.join("; "))
    }
}

impl ValidationErrors {
    pub fn contains(&self, e: &ModelError) -> bool {
        self.0.contains(e)
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}:{column}: {msg}")]
    Parse { path: PathBuf, line: usize, column: usize, msg: String },
    #[error("{path}: unsupported schema_version {found} (expected {expected})")]
    SchemaVersion { path: PathBuf, found: u32, expected: u32 },
    #[error("{path}: {source}")]
    Invalid { path: PathBuf, source: ModelError },
}

#[derive(Debug, Error)]
#[error("cannot write {path}: {source}")]
pub struct SaveError {
    pub path: PathBuf,
    pub source: std::io::Error,
}

/// One mode: continuous-time dynamics and its fixed dwell time.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub a: Matrix,
    pub d: f64,
}

/// `ẋ = A_{r(t)} x` with a fixed-plus-exponential dwell switching signal.
///
/// Holds raw data; call [`validate`](Self::validate) before analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchedLinearSystem {
    pub n: usize,
    pub modes: Vec<Mode>,
    pub pi: Matrix,
}

impl SwitchedLinearSystem {
    pub fn new(modes: Vec<(Matrix, f64)>, pi: Matrix) -> Self {
        let n = modes.first().map_or(0, |(a, _)| a.rows());
        Self { n, modes: modes.into_iter().map(|(a, d)| Mode { a, d }).collect(), pi }
    }

    pub fn m(&self) -> usize {
        self.modes.len()
    }

    pub fn dwell_times(&self) -> Vec<f64> {
        self.modes.iter().map(|md| md.d).collect()
    }

    /// Copy with the fixed dwell times replaced.
    pub fn with_dwell(&self, d: &[f64]) -> Self {
        let mut out = self.clone();
        for (md, &di) in out.modes.iter_mut().zip(d) {
            md.d = di;
        }
        out
    }

    /// Checks every invariant and attaches the per-mode jump maps and rates.
    pub fn validate(&self) -> Result<ValidatedSystem, ValidationErrors> {
        let mut errors = Vec::new();
        let m = self.m();
        let n = self.n;

        if m < 2 {
            errors.push(ModelError::TooFewModes(m));
        }
        for (i, md) in self.modes.iter().enumerate() {
            if md.a.rows() != n || md.a.cols() != n {
                errors.push(ModelError::DimensionMismatch {
                    field: format!("modes[{i}].A"),
                    detail: format!("expected {n}x{n}, got {}x{}", md.a.rows(), md.a.cols()),
                });
            } else if md.a.check_finite().is_err() {
                errors.push(ModelError::NonFinite(format!("modes[{i}].A")));
            }
            if !md.d.is_finite() {
                errors.push(ModelError::NonFinite(format!("modes[{i}].d")));
            } else if md.d < 0.0 {
                errors.push(ModelError::NegativeDwell(i));
            }
        }

        let mut pi = self.pi.clone();
        if pi.rows() != m || pi.cols() != m {
            errors.push(ModelError::DimensionMismatch {
                field: "Pi".into(),
                detail: format!("expected {m}x{m}, got {}x{}", pi.rows(), pi.cols()),
            });
        } else if pi.check_finite().is_err() {
            errors.push(ModelError::NonFinite("Pi".into()));
        } else {
            for i in 0..m {
                let off: f64 = (0..m).filter(|&j| j != i).map(|j| pi[(i, j)]).sum();
                let negative_rate = (0..m).any(|j| j != i && pi[(i, j)] < 0.0);
                let residual = off + pi[(i, i)];
                if negative_rate || residual.abs() > ROW_SUM_TOL {
                    errors.push(ModelError::BadGeneratorRow(i));
                    continue;
                }
                pi[(i, i)] = -off;
                if pi[(i, i)] >= 0.0 {
                    errors.push(ModelError::AbsorbingMode(i));
                }
            }
        }

        if !errors.is_empty() {
            return Err(ValidationErrors(errors));
        }

        let jump_maps = self.modes.iter().map(|md| expm(&md.a, md.d).expect("finite square matrix")).collect();
        let rates = (0..m).map(|i| -pi[(i, i)]).collect();
        let mut system = self.clone();
        system.pi = pi;
        Ok(ValidatedSystem { system, derived: ModeDerived { jump_maps, rates } })
    }
}

/// Quantities derived once per validated system.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeDerived {
    /// `e^{A_i d_i}`: state map accumulated over the fixed dwell of mode `i`.
    pub jump_maps: Vec<Matrix>,
    /// `ν_i = -π_ii`: rate of the exponential part of the dwell.
    pub rates: Vec<f64>,
}

/// A system that passed validation. Immutable.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedSystem {
    system: SwitchedLinearSystem,
    derived: ModeDerived,
}

impl ValidatedSystem {
    pub fn system(&self) -> &SwitchedLinearSystem {
        &self.system
    }

    pub fn derived(&self) -> &ModeDerived {
        &self.derived
    }

    pub fn n(&self) -> usize {
        self.system.n
    }

    pub fn m(&self) -> usize {
        self.system.m()
    }

    pub fn a(&self, i: usize) -> &Matrix {
        &self.system.modes[i].a
    }

    pub fn dwell(&self, i: usize) -> f64 {
        self.system.modes[i].d
    }

    pub fn generator(&self) -> &Matrix {
        &self.system.pi
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.system.pi[(i, j)]
    }

    pub fn jump_map(&self, i: usize) -> &Matrix {
        &self.derived.jump_maps[i]
    }

    pub fn exit_rate(&self, i: usize) -> f64 {
        self.derived.rates[i]
    }

    /// Revalidates with new fixed dwell times (used by the sweep).
    pub fn with_dwell(&self, d: &[f64]) -> Result<ValidatedSystem, ValidationErrors> {
        self.system.with_dwell(d).validate()
    }
}

#[derive(Serialize, Deserialize)]
struct ModeFile {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    d: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    schema_version: Option<u32>,
    n: usize,
    m: usize,
    modes: Vec<ModeFile>,
    #[serde(rename = "Pi")]
    pi: Vec<Vec<f64>>,
}

fn square_from_rows(rows: &[Vec<f64>], order: usize, field: &str) -> Result<Matrix, ModelError> {
    if rows.len() != order {
        return Err(ModelError::DimensionMismatch {
            field: field.to_string(),
            detail: format!("expected {order} rows, got {}", rows.len()),
        });
    }
    for (r, row) in rows.iter().enumerate() {
        if row.len() != order {
            return Err(ModelError::DimensionMismatch {
                field: format!("{field}[{r}]"),
                detail: format!("expected {order} entries, got {}", row.len()),
            });
        }
    }
    Matrix::from_rows(rows).map_err(|_| ModelError::NonFinite(field.to_string()))
}

impl ModelFile {
    fn into_system(self) -> Result<SwitchedLinearSystem, ModelError> {
        if self.modes.len() != self.m {
            return Err(ModelError::DimensionMismatch {
                field: "modes".into(),
                detail: format!("m = {} but {} modes listed", self.m, self.modes.len()),
            });
        }
        let modes = self
            .modes
            .into_iter()
            .enumerate()
            .map(|(i, md)| Ok(Mode { a: square_from_rows(&md.a, self.n, &format!("modes[{i}].A"))?, d: md.d }))
            .collect::<Result<Vec<_>, ModelError>>()?;
        let pi = square_from_rows(&self.pi, self.m, "Pi")?;
        Ok(SwitchedLinearSystem { n: self.n, modes, pi })
    }

    fn from_system(sys: &SwitchedLinearSystem) -> Self {
        Self {
            schema_version: Some(SCHEMA_VERSION),
            n: sys.n,
            m: sys.m(),
            modes: sys.modes.iter().map(|md| ModeFile { a: md.a.to_rows(), d: md.d }).collect(),
            pi: sys.pi.to_rows(),
        }
    }
}

/// Parses a model from JSON text. `origin` only labels error messages.
pub fn parse_system(text: &str, origin: &Path) -> Result<SwitchedLinearSystem, LoadError> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| LoadError::Parse {
        path: origin.to_path_buf(),
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    })?;
    let version = file.schema_version.unwrap_or(SCHEMA_VERSION);
    if version != SCHEMA_VERSION {
        return Err(LoadError::SchemaVersion { path: origin.to_path_buf(), found: version, expected: SCHEMA_VERSION });
    }
    file.into_system().map_err(|source| LoadError::Invalid { path: origin.to_path_buf(), source })
}

pub fn load_system(path: impl AsRef<Path>) -> Result<SwitchedLinearSystem, LoadError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.to_path_buf(), source })?;
    parse_system(&text, path)
}

pub fn to_json(sys: &SwitchedLinearSystem) -> String {
    serde_json::to_string_pretty(&ModelFile::from_system(sys)).expect("model serializes")
}

pub fn save_system(sys: &SwitchedLinearSystem, path: impl AsRef<Path>) -> Result<(), SaveError> {
    let path = path.as_ref();
    let mut text = to_json(sys);
    text.push('\n');
    fs::write(path, text).map_err(|source| SaveError { path: path.to_path_buf(), source })
}
