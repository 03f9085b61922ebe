//! Modal model files.
//!
//! JSON envelope:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "Nr": 2, "Nx": 1,
//!   "modes": [{"freq_hz": 40.0, "zeta": 0.05, "modal_mass": 1.0}, ...],
//!   "participation": [..Nr×Nx row-major..],
//!   "nodes": [{"id": 1, "coords": [0.0], "n_sigma": 1, "stress_shape": [..Nσ×Nr row-major..]}],
//!   "sidecar": "model.bin"
//! }
//! ```
//!
//! With `sidecar` set, node entries omit `stress_shape`; the shapes are the
//! consecutive row blocks (`n_sigma` rows each, `Nr` columns) of the raw
//! matrix file, resolved relative to the JSON file.

use std::path::{Path, PathBuf};

use modalstat::modal::{ModalModel, NodeShape};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::binary::{self, RawMatrix};
use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeEntry {
    pub freq_hz: f64,
    pub zeta: f64,
    pub modal_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeEntry {
    pub id: u64,
    #[serde(default)]
    pub coords: Vec<f64>,
    pub n_sigma: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stress_shape: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    #[serde(rename = "Nr")]
    pub n_modes: usize,
    #[serde(rename = "Nx")]
    pub n_inputs: usize,
    pub modes: Vec<ModeEntry>,
    pub participation: Vec<f64>,
    pub nodes: Vec<NodeEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sidecar: Option<String>,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

impl ModelFile {
    /// Envelope with inline stress shapes.
    pub fn from_model(model: &ModalModel) -> Self {
        let modes = model
            .freqs_hz()
            .into_iter()
            .zip(model.zeta())
            .zip(model.modal_mass())
            .map(|((freq_hz, &zeta), &modal_mass)| ModeEntry { freq_hz, zeta, modal_mass })
            .collect();
        let nodes = model
            .nodes()
            .iter()
            .map(|n| NodeEntry {
                id: n.id,
                coords: n.coords.clone(),
                n_sigma: n.stress_shape.nrows(),
                stress_shape: Some(row_major(&n.stress_shape)),
            })
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            n_modes: model.n_modes(),
            n_inputs: model.n_inputs(),
            modes,
            participation: row_major(model.participation()),
            nodes,
            sidecar: None,
        }
    }

    pub fn to_model(&self) -> CliResult<ModalModel> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::data(format!("unsupported schema_version {}", self.schema_version)));
        }
        if self.modes.len() != self.n_modes {
            return Err(CliError::data(format!("Nr = {} but {} modes listed", self.n_modes, self.modes.len())));
        }
        if self.participation.len() != self.n_modes * self.n_inputs {
            return Err(CliError::data(format!(
                "participation needs Nr·Nx = {} values, got {}",
                self.n_modes * self.n_inputs,
                self.participation.len()
            )));
        }
        let mut nodes = Vec::with_capacity(self.nodes.len());
        for n in &self.nodes {
            let values = n
                .stress_shape
                .as_ref()
                .ok_or_else(|| CliError::data(format!("node {} has no stress_shape", n.id)))?;
            if n.n_sigma == 0 || values.len() != n.n_sigma * self.n_modes {
                return Err(CliError::data(format!(
                    "node {}: stress_shape needs n_sigma·Nr = {} values, got {}",
                    n.id,
                    n.n_sigma * self.n_modes,
                    values.len()
                )));
            }
            nodes.push(NodeShape {
                id: n.id,
                coords: n.coords.clone(),
                stress_shape: DMatrix::from_row_slice(n.n_sigma, self.n_modes, values),
            });
        }
        let two_pi = 2.0 * std::f64::consts::PI;
        Ok(ModalModel::new(
            self.modes.iter().map(|m| two_pi * m.freq_hz).collect(),
            self.modes.iter().map(|m| m.zeta).collect(),
            self.modes.iter().map(|m| m.modal_mass).collect(),
            DMatrix::from_row_slice(self.n_modes, self.n_inputs, &self.participation),
            nodes,
        )?)
    }

    /// Moves inline stress shapes into one raw matrix.
    pub fn split_sidecar(&mut self, sidecar_name: &str) -> CliResult<RawMatrix> {
        let mut data = Vec::new();
        let mut rows = 0;
        for n in &mut self.nodes {
            let values = n
                .stress_shape
                .take()
                .ok_or_else(|| CliError::data(format!("node {} has no stress_shape", n.id)))?;
            rows += n.n_sigma;
            data.extend(values);
        }
        self.sidecar = Some(sidecar_name.to_string());
        RawMatrix::new(rows, self.n_modes, data)
    }

    /// Fills node stress shapes from a raw matrix.
    pub fn merge_sidecar(&mut self, m: &RawMatrix) -> CliResult<()> {
        let expected: usize = self.nodes.iter().map(|n| n.n_sigma).sum();
        if m.rows != expected || m.cols != self.n_modes {
            return Err(CliError::data(format!(
                "sidecar is {}×{}, nodes need {expected}×{}",
                m.rows, m.cols, self.n_modes
            )));
        }
        let mut row = 0;
        for n in &mut self.nodes {
            let start = row * m.cols;
            row += n.n_sigma;
            n.stress_shape = Some(m.data[start..row * m.cols].to_vec());
        }
        self.sidecar = None;
        Ok(())
    }
}

fn sidecar_path(json: &Path, name: &str) -> PathBuf {
    json.parent().map_or_else(|| PathBuf::from(name), |p| p.join(name))
}

/// Writes a model; with `sidecar` the stress shapes go to a raw file beside it.
pub fn write_model(path: &Path, model: &ModalModel, sidecar: bool) -> CliResult<()> {
    let mut file = ModelFile::from_model(model);
    if sidecar {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
        let name = format!("{stem}.shapes.bin");
        let raw = file.split_sidecar(&name)?;
        binary::write(&sidecar_path(path, &name), &raw)?;
    }
    write_model_file(path, &file)
}

pub fn write_model_file(path: &Path, file: &ModelFile) -> CliResult<()> {
    let text = serde_json::to_string_pretty(file).map_err(|e| CliError::data(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_model_file(path: &Path) -> CliResult<ModelFile> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut file: ModelFile =
        serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    if let Some(name) = file.sidecar.clone() {
        let raw = binary::read(&sidecar_path(path, &name))?;
        file.merge_sidecar(&raw)?;
    }
    Ok(file)
}

pub fn read_model(path: &Path) -> CliResult<ModalModel> {
    read_model_file(path)?.to_model()
}
