//! Lumped spring-mass chains used as small, fully known demo structures.
//!
//! Springs are numbered left to right: the wall spring at the left end (if
//! clamped), the springs between consecutive masses, then the wall spring at
//! the right end (if clamped). The recovered "stress" of a spring is its axial
//! force `k_j (s_right − s_left)`, with wall displacement zero.

use nalgebra::DMatrix;

use super::eigen::{eigen_solve, EigenSolution};
use super::{ModalModel, NodeShape};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LumpedChainModel {
    masses: Vec<f64>,
    stiffnesses: Vec<f64>,
    clamped: (bool, bool),
}

impl LumpedChainModel {
    pub fn new(masses: Vec<f64>, stiffnesses: Vec<f64>, clamped: (bool, bool)) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::invalid("chain needs at least one mass"));
        }
        let expected = masses.len() - 1 + clamped.0 as usize + clamped.1 as usize;
        if stiffnesses.len() != expected {
            return Err(Error::invalid(format!(
                "chain with {} masses and clamping {:?} needs {expected} springs, got {}",
                masses.len(),
                clamped,
                stiffnesses.len()
            )));
        }
        if masses.iter().chain(&stiffnesses).any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("masses and stiffnesses must be finite and positive"));
        }
        Ok(Self { masses, stiffnesses, clamped })
    }

    /// `n` equal masses, both ends clamped.
    pub fn uniform_clamped(n: usize, mass: f64, stiffness: f64) -> Result<Self> {
        Self::new(vec![mass; n], vec![stiffness; n + 1], (true, true))
    }

    pub fn n_dofs(&self) -> usize {
        self.masses.len()
    }

    pub fn n_springs(&self) -> usize {
        self.stiffnesses.len()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn stiffnesses(&self) -> &[f64] {
        &self.stiffnesses
    }

    pub fn clamped(&self) -> (bool, bool) {
        self.clamped
    }

    /// `(left dof, right dof, stiffness)` per spring; `None` is a wall.
    pub fn springs(&self) -> Vec<(Option<usize>, Option<usize>, f64)> {
        let n = self.n_dofs();
        let mut out = Vec::with_capacity(self.n_springs());
        let mut ks = self.stiffnesses.iter().copied();
        if self.clamped.0 {
            out.push((None, Some(0), ks.next().unwrap()));
        }
        for i in 1..n {
            out.push((Some(i - 1), Some(i), ks.next().unwrap()));
        }
        if self.clamped.1 {
            out.push((Some(n - 1), None, ks.next().unwrap()));
        }
        out
    }

    pub fn mass_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.masses))
    }

    pub fn stiffness_matrix(&self) -> DMatrix<f64> {
        let n = self.n_dofs();
        let mut k = DMatrix::zeros(n, n);
        for (l, r, kj) in self.springs() {
            if let Some(a) = l {
                k[(a, a)] += kj;
            }
            if let Some(b) = r {
                k[(b, b)] += kj;
            }
            if let (Some(a), Some(b)) = (l, r) {
                k[(a, b)] -= kj;
                k[(b, a)] -= kj;
            }
        }
        k
    }

    /// Spring-force recovery operator (`n_springs × n_dofs`): `f = S s`.
    pub fn force_operator(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.n_springs(), self.n_dofs());
        for (j, (l, r, kj)) in self.springs().into_iter().enumerate() {
            if let Some(a) = l {
                s[(j, a)] -= kj;
            }
            if let Some(b) = r {
                s[(j, b)] += kj;
            }
        }
        s
    }

    /// Load participation `A` (`n_dofs × inputs`): unit force at each listed DOF.
    pub fn load_matrix(&self, input_dofs: &[usize]) -> Result<DMatrix<f64>> {
        let mut a = DMatrix::zeros(self.n_dofs(), input_dofs.len());
        for (c, &d) in input_dofs.iter().enumerate() {
            if d >= self.n_dofs() {
                return Err(Error::invalid(format!("input dof {d} outside chain of {} masses", self.n_dofs())));
            }
            a[(d, c)] = 1.0;
        }
        Ok(a)
    }

    pub fn eigen(&self) -> Result<EigenSolution> {
        eigen_solve(&self.stiffness_matrix(), &self.mass_matrix())
    }
}

/// Per-spring modal force shapes `k_j (φ_right − φ_left)`, `n_springs × modes`.
pub fn chain_stress_shapes(chain: &LumpedChainModel, shapes: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Error::check_dim(chain.n_dofs(), shapes.nrows())?;
    let mut out = DMatrix::zeros(chain.n_springs(), shapes.ncols());
    for (j, (l, r, kj)) in chain.springs().into_iter().enumerate() {
        for c in 0..shapes.ncols() {
            let left = l.map_or(0.0, |a| shapes[(a, c)]);
            let right = r.map_or(0.0, |b| shapes[(b, c)]);
            out[(j, c)] = kj * (right - left);
        }
    }
    Ok(out)
}

/// Builds a modal model from the lowest `n_modes` modes of a chain, with one
/// single-component node per spring (node id = spring index + 1, coordinate =
/// spring position along the chain).
pub fn chain_modal_model(
    chain: &LumpedChainModel,
    n_modes: usize,
    zeta: f64,
    input_dofs: &[usize],
) -> Result<(ModalModel, EigenSolution)> {
    if n_modes == 0 || n_modes > chain.n_dofs() {
        return Err(Error::invalid(format!(
            "requested {n_modes} modes from a chain with {} degrees of freedom",
            chain.n_dofs()
        )));
    }
    let sol = chain.eigen()?;
    let shapes = sol.shapes.columns(0, n_modes).into_owned();
    let participation = shapes.transpose() * chain.load_matrix(input_dofs)?;
    let forces = chain_stress_shapes(chain, &shapes)?;
    let left_offset = if chain.clamped().0 { 0.0 } else { 1.0 };
    let nodes = (0..chain.n_springs())
        .map(|j| NodeShape {
            id: j as u64 + 1,
            coords: vec![j as f64 + left_offset],
            stress_shape: forces.rows(j, 1).into_owned(),
        })
        .collect();
    let model = ModalModel::new(
        sol.omega0[..n_modes].to_vec(),
        vec![zeta; n_modes],
        vec![1.0; n_modes],
        participation,
        nodes,
    )?;
    Ok((model, sol))
}
