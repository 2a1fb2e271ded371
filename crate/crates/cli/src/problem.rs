//! The JSON problem format and its resolution into core types.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use terrace_core::transform::{matrix_from_rows, read_matrix_csv_path};
use terrace_core::{EnumerationBudget, FidelityModel, Transform};

use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u32 = 1;

/// A matrix given inline as rows or as a CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Rows(Vec<Vec<f64>>),
    Csv { csv: PathBuf },
}

/// A vector given inline or as a CSV file holding one row or one column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VectorSpec {
    Values(Vec<f64>),
    Csv { csv: PathBuf },
}

/// `"identity"`, inline rows, or `{"csv": path}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TransformSpec {
    Keyword(String),
    Matrix(MatrixSpec),
}

impl Default for TransformSpec {
    fn default() -> Self {
        TransformSpec::Keyword("identity".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Quadratic {
        a: MatrixSpec,
        b: VectorSpec,
    },
    SpikedCone,
    CoupledQuadratic {
        q: MatrixSpec,
        c: VectorSpec,
        mu: f64,
        d: MatrixSpec,
    },
    CoupledCappedL1 {
        q: MatrixSpec,
        c: VectorSpec,
        mu: f64,
        d: MatrixSpec,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub version: u32,
    pub model: ModelSpec,
    #[serde(default)]
    pub transform: TransformSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_level: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<EnumerationBudget>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ProblemFile {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let file: ProblemFile = serde_json::from_str(text)?;
        if file.version != FORMAT_VERSION {
            return Err(CliError::Usage(format!(
                "unsupported problem version {} (expected {FORMAT_VERSION})",
                file.version
            )));
        }
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        crate::report::to_json_string(self)
    }
}

/// A problem with its matrices read and validated.
#[derive(Debug, Clone)]
pub struct LoadedProblem {
    pub file: ProblemFile,
    pub model: FidelityModel,
    pub transform: Transform,
    /// CSV references are resolved against this directory.
    pub base_dir: PathBuf,
}

impl LoadedProblem {
    pub fn from_path(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::resolve(ProblemFile::from_json(&text)?, &base)
    }

    pub fn resolve(file: ProblemFile, base_dir: &Path) -> CliResult<Self> {
        let model = build_model(&file.model, base_dir)?;
        let transform = build_transform(&file.transform, model.x_dim(), base_dir)?;
        if transform.preimage_dim() != model.x_dim() {
            return Err(CliError::Usage(format!(
                "transform is {}×{} but the model variable has dimension {}",
                transform.image_dim(),
                transform.preimage_dim(),
                model.x_dim()
            )));
        }
        transform.ensure_supported()?;
        if let Some(l) = file.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(CliError::Usage(format!("lambda must be finite and nonnegative, got {l}")));
            }
        }
        if let Some(level) = file.target_level {
            if level > transform.image_dim() {
                return Err(CliError::Usage(format!(
                    "target_level {level} exceeds the transform dimension {}",
                    transform.image_dim()
                )));
            }
        }
        Ok(LoadedProblem {
            file,
            model,
            transform,
            base_dir: base_dir.to_path_buf(),
        })
    }

    pub fn budget(&self) -> EnumerationBudget {
        self.file.budget.unwrap_or_default()
    }
}

fn resolve_path(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn load_matrix(spec: &MatrixSpec, base: &Path) -> CliResult<DMatrix<f64>> {
    Ok(match spec {
        MatrixSpec::Rows(rows) => matrix_from_rows(rows)?,
        MatrixSpec::Csv { csv } => read_matrix_csv_path(resolve_path(base, csv))?,
    })
}

fn load_vector(spec: &VectorSpec, base: &Path) -> CliResult<DVector<f64>> {
    match spec {
        VectorSpec::Values(v) => Ok(DVector::from_column_slice(v)),
        VectorSpec::Csv { csv } => {
            let m = read_matrix_csv_path(resolve_path(base, csv))?;
            if m.nrows() != 1 && m.ncols() != 1 {
                return Err(CliError::Usage(format!(
                    "{}: a vector file needs one row or one column, found {}×{}",
                    csv.display(),
                    m.nrows(),
                    m.ncols()
                )));
            }
            // Column-major storage makes either orientation read in order.
            Ok(DVector::from_column_slice(m.as_slice()))
        }
    }
}

fn build_model(spec: &ModelSpec, base: &Path) -> CliResult<FidelityModel> {
    Ok(match spec {
        ModelSpec::Quadratic { a, b } => {
            FidelityModel::quadratic(load_matrix(a, base)?, load_vector(b, base)?)?
        }
        ModelSpec::SpikedCone => FidelityModel::SpikedCone,
        ModelSpec::CoupledQuadratic { q, c, mu, d } => FidelityModel::coupled_quadratic(
            load_matrix(q, base)?,
            load_vector(c, base)?,
            *mu,
            load_matrix(d, base)?,
        )?,
        ModelSpec::CoupledCappedL1 { q, c, mu, d } => FidelityModel::coupled_capped_l1(
            load_matrix(q, base)?,
            load_vector(c, base)?,
            *mu,
            load_matrix(d, base)?,
        )?,
    })
}

/// Builds the transform from a spec; `m` is the size of the identity.
pub fn build_transform(spec: &TransformSpec, m: usize, base: &Path) -> CliResult<Transform> {
    match spec {
        TransformSpec::Keyword(k) if k == "identity" => Ok(Transform::identity(m)),
        TransformSpec::Keyword(k) => Err(CliError::Usage(format!(
            "unknown transform {k:?}: use \"identity\", inline rows or {{\"csv\": path}}"
        ))),
        TransformSpec::Matrix(spec) => Ok(Transform::with_default_tol(load_matrix(spec, base)?)?),
    }
}
