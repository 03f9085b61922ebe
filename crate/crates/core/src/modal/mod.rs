//! Modal models and their frequency response functions.
//!
//! A [`ModalModel`] holds `Nr` decoupled single-DOF oscillators (natural
//! frequency, modal damping ratio, modal mass), the load participation
//! `Φ^(x) = Φᵀ A` (`Nr × Nx`) and per-node stress mode shapes `Φ^(σ)`
//! (`Nσ × Nr`).

mod chain;
mod eigen;

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub use chain::{chain_modal_model, chain_stress_shapes, LumpedChainModel};
pub use eigen::{eigen_solve, EigenSolution};

/// Stress mode shapes of one output point.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeShape {
    pub id: u64,
    pub coords: Vec<f64>,
    /// `Nσ × Nr`.
    pub stress_shape: DMatrix<f64>,
}

impl NodeShape {
    pub fn n_components(&self) -> usize {
        self.stress_shape.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModalModel {
    omega0: Vec<f64>,
    zeta: Vec<f64>,
    modal_mass: Vec<f64>,
    participation: DMatrix<f64>,
    nodes: Vec<NodeShape>,
    index: HashMap<u64, usize>,
}

impl ModalModel {
    pub fn new(
        omega0: Vec<f64>,
        zeta: Vec<f64>,
        modal_mass: Vec<f64>,
        participation: DMatrix<f64>,
        nodes: Vec<NodeShape>,
    ) -> Result<Self> {
        let nr = omega0.len();
        if nr == 0 {
            return Err(Error::invalid("modal model needs at least one mode"));
        }
        Error::check_dim(nr, zeta.len())?;
        Error::check_dim(nr, modal_mass.len())?;
        Error::check_dim(nr, participation.nrows())?;
        if participation.ncols() == 0 {
            return Err(Error::invalid("modal model needs at least one input"));
        }
        for r in 0..nr {
            if !(omega0[r].is_finite() && omega0[r] > 0.0) {
                return Err(Error::invalid(format!("mode {r}: natural frequency must be > 0, got {}", omega0[r])));
            }
            if !(zeta[r] > 0.0 && zeta[r] < 1.0) {
                return Err(Error::invalid(format!("mode {r}: damping ratio must be in (0,1), got {}", zeta[r])));
            }
            if !(modal_mass[r].is_finite() && modal_mass[r] > 0.0) {
                return Err(Error::invalid(format!("mode {r}: modal mass must be > 0, got {}", modal_mass[r])));
            }
        }
        if omega0.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("natural frequencies must be ascending"));
        }
        if participation.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("participation matrix has non-finite entries"));
        }
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if n.stress_shape.ncols() != nr {
                return Err(Error::invalid(format!(
                    "node {}: stress shape has {} columns, model has {nr} modes",
                    n.id,
                    n.stress_shape.ncols()
                )));
            }
            if n.stress_shape.nrows() == 0 {
                return Err(Error::invalid(format!("node {}: stress shape has no components", n.id)));
            }
            if n.stress_shape.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("node {}: non-finite stress shape", n.id)));
            }
            if index.insert(n.id, i).is_some() {
                return Err(Error::invalid(format!("duplicate node id {}", n.id)));
            }
        }
        Ok(Self { omega0, zeta, modal_mass, participation, nodes, index })
    }

    pub fn n_modes(&self) -> usize {
        self.omega0.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.participation.ncols()
    }

    pub fn omega0(&self) -> &[f64] {
        &self.omega0
    }

    pub fn freqs_hz(&self) -> Vec<f64> {
        self.omega0.iter().map(|w| w / (2.0 * std::f64::consts::PI)).collect()
    }

    pub fn zeta(&self) -> &[f64] {
        &self.zeta
    }

    pub fn modal_mass(&self) -> &[f64] {
        &self.modal_mass
    }

    pub fn participation(&self) -> &DMatrix<f64> {
        &self.participation
    }

    pub fn nodes(&self) -> &[NodeShape] {
        &self.nodes
    }

    pub fn node(&self, id: u64) -> Result<&NodeShape> {
        self.index.get(&id).map(|&i| &self.nodes[i]).ok_or(Error::UnknownNode(id))
    }

    /// Same modes and inputs with a different node set.
    pub fn with_nodes(&self, nodes: Vec<NodeShape>) -> Result<Self> {
        Self::new(
            self.omega0.clone(),
            self.zeta.clone(),
            self.modal_mass.clone(),
            self.participation.clone(),
            nodes,
        )
    }
}

/// Receptance of one mode, `1 / (m (ω₀² + 2iζω₀ω − ω²))`.
pub fn sdof_receptance(omega0: f64, zeta: f64, mass: f64, omega: f64) -> Result<Complex64> {
    let den = Complex64::new(omega0 * omega0 - omega * omega, 2.0 * zeta * omega0 * omega) * mass;
    if den.norm() == 0.0 {
        return Err(Error::Singular(format!("undamped mode at resonance (ω = ω₀ = {omega0})")));
    }
    Ok(den.inv())
}

fn check_grid(freqs: &[f64]) -> Result<()> {
    if freqs.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
        return Err(Error::invalid("frequency grid must be finite and non-negative"));
    }
    if freqs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("frequency grid must be strictly ascending"));
    }
    Ok(())
}

/// Diagonal SDOF receptances `H_r(2πf)` for every grid frequency (Hz).
pub fn sdof_frf(model: &ModalModel, freqs: &[f64]) -> Result<Vec<DVector<Complex64>>> {
    check_grid(freqs)?;
    freqs
        .iter()
        .map(|&f| {
            let w = 2.0 * std::f64::consts::PI * f;
            let h: Result<Vec<_>> = (0..model.n_modes())
                .map(|r| sdof_receptance(model.omega0[r], model.zeta[r], model.modal_mass[r], w))
                .collect();
            h.map(DVector::from_vec)
        })
        .collect()
}

/// Scales the rows of the participation matrix by `h`: `diag(h) Φ^(x)`.
pub(crate) fn modal_frf_at(h: &DVector<Complex64>, participation: &DMatrix<f64>) -> DMatrix<Complex64> {
    DMatrix::from_fn(participation.nrows(), participation.ncols(), |r, c| h[r] * participation[(r, c)])
}

/// Load-to-modal-coordinate FRF `H(ω) Φ^(x)` (`Nr × Nx`) per frequency.
pub fn frf_x_to_q(model: &ModalModel, freqs: &[f64]) -> Result<Vec<DMatrix<Complex64>>> {
    Ok(sdof_frf(model, freqs)?.iter().map(|h| modal_frf_at(h, &model.participation)).collect())
}

pub(crate) fn real_times_complex(a: &DMatrix<f64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    a.map(|v| Complex64::new(v, 0.0)) * b
}

/// Load-to-stress FRF `Φ^(σ) H(ω) Φ^(x)` (`Nσ × Nx`) of one node per frequency.
pub fn frf_x_to_stress(model: &ModalModel, node: u64, freqs: &[f64]) -> Result<Vec<DMatrix<Complex64>>> {
    let shape = &model.node(node)?.stress_shape;
    Ok(frf_x_to_q(model, freqs)?.iter().map(|hq| real_times_complex(shape, hq)).collect())
}
