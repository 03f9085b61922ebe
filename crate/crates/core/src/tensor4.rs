//! Rank-4 central-moment tensors.
//!
//! [`MomentTensor4`] stores all `U⁴` entries densely in row-major order even
//! though the tensors handled here are fully symmetric; `U` is a mode count or
//! a stress-component count, so the dense layout stays small and keeps the
//! four-index contraction a sequence of plain matrix products.
//!
//! The Voigt view ([`VoigtTensor4`]) folds the symmetric tensor into a
//! `(U+Q)×(U+Q)` matrix with `Q = U(U−1)/2`. Slots are ordered by the
//! diagonal pairs `(1,1)…(U,U)` followed by the upper triangle read row by row:
//! `(1,2)…(1,U),(2,3)…,(U−1,U)`. This differs from the mechanics convention for
//! stresses (`xx, yy, zz, yz, xz, xy`); callers needing that order must permute
//! through [`VoigtTensor4::pairs`].

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative tolerance used when checking symmetry of tensors and matrices.
pub const SYMMETRY_RTOL: f64 = 1e-12;

/// Dense rank-4 tensor over `dim` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTensor4 {
    dim: usize,
    data: Vec<f64>,
}

impl MomentTensor4 {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim.pow(4)] }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dim.pow(4));
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    for l in 0..dim {
                        data.push(f(i, j, k, l));
                    }
                }
            }
        }
        Self { dim, data }
    }

    /// Builds a tensor from row-major data of length `dim⁴`.
    pub fn from_vec(dim: usize, data: Vec<f64>) -> Result<Self> {
        Error::check_dim(dim.pow(4), data.len())?;
        Ok(Self { dim, data })
    }

    /// Builds a fully symmetric tensor from one value per sorted index
    /// quadruple, in the order produced by [`sorted_quadruples`].
    pub fn from_sorted_entries(dim: usize, values: &[f64]) -> Result<Self> {
        let quads = sorted_quadruples(dim);
        Error::check_dim(quads.len(), values.len())?;
        let mut t = Self::zeros(dim);
        for (q, &v) in quads.iter().zip(values) {
            for p in permutations4(*q) {
                t.set(p[0], p[1], p[2], p[3], v);
            }
        }
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * self.dim + j) * self.dim + k) * self.dim + l
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.data[self.offset(i, j, k, l)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        let o = self.offset(i, j, k, l);
        self.data[o] = v;
    }

    /// Generalized diagonal `T(a,a,a,a)`.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|a| self.get(a, a, a, a)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Largest deviation of any entry from the entry at its sorted index.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                for k in 0..self.dim {
                    for l in 0..self.dim {
                        let s = sort4([i, j, k, l]);
                        let d = (self.get(i, j, k, l) - self.get(s[0], s[1], s[2], s[3])).abs();
                        worst = worst.max(d);
                    }
                }
            }
        }
        worst
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetry_defect() <= SYMMETRY_RTOL * self.max_abs()
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        Error::check_dim(self.dim, other.dim)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect();
        Ok(Self { dim: self.dim, data })
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|x| x * s).collect() }
    }

    /// Multilinear transform on all four indices:
    /// `out(a,b,c,d) = Σ W(a,i) W(b,j) W(c,k) W(d,l) T(i,j,k,l)`.
    ///
    /// `weights` is `rows × dim`; the result is a tensor over `rows` variables.
    pub fn contract(&self, weights: &DMatrix<f64>) -> Result<Self> {
        Error::check_dim(self.dim, weights.ncols())?;
        let rows = weights.nrows();
        // Each pass contracts the trailing index and moves the new one to the
        // front, so four passes restore the original index order.
        let inner = self.dim;
        let mut cur = self.data.clone();
        for pass in 0..4u32 {
            let lead = rows.pow(pass) * inner.pow(3 - pass);
            let mut next = vec![0.0; rows * lead];
            for d in 0..rows {
                let out = &mut next[d * lead..(d + 1) * lead];
                for l in 0..inner {
                    let w = weights[(d, l)];
                    if w == 0.0 {
                        continue;
                    }
                    for (m, o) in out.iter_mut().enumerate() {
                        *o += w * cur[m * inner + l];
                    }
                }
            }
            cur = next;
        }
        Ok(Self { dim: rows, data: cur })
    }

    /// Contraction with a single row vector `w`: `Σ w_i w_j w_k w_l T(i,j,k,l)`.
    pub fn project(&self, w: &[f64]) -> Result<f64> {
        Error::check_dim(self.dim, w.len())?;
        let n = self.dim;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let wij = w[i] * w[j];
                if wij == 0.0 {
                    continue;
                }
                for k in 0..n {
                    let wijk = wij * w[k];
                    if wijk == 0.0 {
                        continue;
                    }
                    let base = self.offset(i, j, k, 0);
                    let row = &self.data[base..base + n];
                    acc += wijk * row.iter().zip(w).map(|(t, wl)| t * wl).sum::<f64>();
                }
            }
        }
        Ok(acc)
    }
}

/// Sorted index quadruples `i ≤ j ≤ k ≤ l` over `dim` variables, lexicographic.
pub fn sorted_quadruples(dim: usize) -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for i in 0..dim {
        for j in i..dim {
            for k in j..dim {
                for l in k..dim {
                    out.push([i, j, k, l]);
                }
            }
        }
    }
    out
}

pub(crate) fn sort4(mut q: [usize; 4]) -> [usize; 4] {
    q.sort_unstable();
    q
}

/// All 24 orderings of a quadruple (with repeats when indices coincide).
pub(crate) fn permutations4(q: [usize; 4]) -> impl Iterator<Item = [usize; 4]> {
    const PERMS: [[usize; 4]; 24] = [
        [0, 1, 2, 3], [0, 1, 3, 2], [0, 2, 1, 3], [0, 2, 3, 1], [0, 3, 1, 2], [0, 3, 2, 1],
        [1, 0, 2, 3], [1, 0, 3, 2], [1, 2, 0, 3], [1, 2, 3, 0], [1, 3, 0, 2], [1, 3, 2, 0],
        [2, 0, 1, 3], [2, 0, 3, 1], [2, 1, 0, 3], [2, 1, 3, 0], [2, 3, 0, 1], [2, 3, 1, 0],
        [3, 0, 1, 2], [3, 0, 2, 1], [3, 1, 0, 2], [3, 1, 2, 0], [3, 2, 0, 1], [3, 2, 1, 0],
    ];
    PERMS.into_iter().map(move |p| [q[p[0]], q[p[1]], q[p[2]], q[p[3]]])
}

pub(crate) fn check_symmetric_matrix(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::invalid(format!("{what} must be square, got {}×{}", m.nrows(), m.ncols())));
    }
    let scale = m.amax();
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_RTOL * scale {
                return Err(Error::invalid(format!("{what} is not symmetric at ({i},{j})")));
            }
        }
    }
    Ok(())
}

/// Fourth moment of a stationary Gaussian process with covariance `cov`
/// (Isserlis pairing):
/// `Σ(i,j)Σ(k,l) + Σ(i,k)Σ(j,l) + Σ(i,l)Σ(j,k)`.
pub fn isserlis_stationary(cov: &DMatrix<f64>) -> Result<MomentTensor4> {
    check_symmetric_matrix(cov, "covariance")?;
    Ok(isserlis_unchecked(cov))
}

pub(crate) fn isserlis_unchecked(cov: &DMatrix<f64>) -> MomentTensor4 {
    // evaluated on the sorted index so all permutations are bitwise equal
    MomentTensor4::from_fn(cov.nrows(), |i, j, k, l| {
        let [i, j, k, l] = sort4([i, j, k, l]);
        cov[(i, j)] * cov[(k, l)] + cov[(i, k)] * cov[(j, l)] + cov[(i, l)] * cov[(j, k)]
    })
}

/// Fourth-order cumulant: the moment minus its Isserlis baseline.
pub fn cumulant4(m4: &MomentTensor4, cov: &DMatrix<f64>) -> Result<MomentTensor4> {
    Error::check_dim(m4.dim(), cov.nrows())?;
    let stat = isserlis_stationary(cov)?;
    m4.zip_map(&stat, |a, b| a - b)
}

/// Elementwise quotient `μ4 ⊘ μ4,stat`.
///
/// Entries where both numerator and denominator vanish are `None`
/// (undefined), not a number.
#[derive(Debug, Clone, PartialEq)]
pub struct KurtosisTensor {
    dim: usize,
    data: Vec<Option<f64>>,
}

impl KurtosisTensor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> Option<f64> {
        self.data[((i * self.dim + j) * self.dim + k) * self.dim + l]
    }

    pub fn entries(&self) -> &[Option<f64>] {
        &self.data
    }

    pub fn n_undefined(&self) -> usize {
        self.data.iter().filter(|e| e.is_none()).count()
    }
}

/// Relative threshold below which an entry counts as zero in [`kurtosis_tensor`].
pub const KURTOSIS_ZERO_RTOL: f64 = 1e-12;

pub fn kurtosis_tensor(m4: &MomentTensor4, m4_stat: &MomentTensor4) -> Result<KurtosisTensor> {
    Error::check_dim(m4.dim(), m4_stat.dim())?;
    let num_floor = KURTOSIS_ZERO_RTOL * m4.max_abs();
    let den_floor = KURTOSIS_ZERO_RTOL * m4_stat.max_abs();
    let mut data = Vec::with_capacity(m4.data.len());
    for (idx, (&n, &d)) in m4.data.iter().zip(&m4_stat.data).enumerate() {
        if d.abs() <= den_floor {
            if n.abs() <= num_floor {
                data.push(None);
                continue;
            }
            return Err(Error::Singular(format!(
                "stationary fourth moment vanishes at flat index {idx} while the moment is {n}"
            )));
        }
        data.push(Some(n / d));
    }
    Ok(KurtosisTensor { dim: m4.dim(), data })
}

/// Conventional per-component kurtosis `μ4(a,a,a,a) / Σ(a,a)²`;
/// `None` where the component variance is zero.
pub fn component_kurtosis(m4: &MomentTensor4, cov: &DMatrix<f64>) -> Result<Vec<Option<f64>>> {
    Error::check_dim(m4.dim(), cov.nrows())?;
    Ok((0..m4.dim())
        .map(|a| {
            let v = cov[(a, a)];
            (v > 0.0).then(|| m4.get(a, a, a, a) / (v * v))
        })
        .collect())
}

/// Index pairs of the Voigt slots, diagonal pairs first, then the upper
/// triangle row by row.
pub fn voigt_pairs(dim: usize) -> Vec<(usize, usize)> {
    let mut pairs: Vec<_> = (0..dim).map(|u| (u, u)).collect();
    for a in 0..dim {
        for b in (a + 1)..dim {
            pairs.push((a, b));
        }
    }
    pairs
}

/// Two-dimensional projection of a symmetric rank-4 tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct VoigtTensor4 {
    matrix: DMatrix<f64>,
    pairs: Vec<(usize, usize)>,
    dim: usize,
    normalized: bool,
}

impl VoigtTensor4 {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Number of underlying variables `U`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    fn prefactor(&self, a: usize, b: usize) -> f64 {
        match (a < self.dim, b < self.dim) {
            (true, true) => 1.0,
            (false, false) => 2.0,
            _ => std::f64::consts::SQRT_2,
        }
    }

    /// Applies the `{√2, 2}` prefactors to the mixed and the off-diagonal
    /// pair blocks, making the matrix norm equal the full tensor norm.
    pub fn normalize(mut self) -> Result<Self> {
        if self.normalized {
            return Err(Error::InvalidState("Voigt tensor is already normalized".into()));
        }
        let n = self.matrix.nrows();
        for a in 0..n {
            for b in 0..n {
                let f = self.prefactor(a, b);
                self.matrix[(a, b)] *= f;
            }
        }
        self.normalized = true;
        Ok(self)
    }

    /// Rebuilds the full symmetric tensor, removing prefactors if present.
    pub fn to_tensor(&self) -> MomentTensor4 {
        let mut slot = vec![vec![0usize; self.dim]; self.dim];
        for (s, &(a, b)) in self.pairs.iter().enumerate() {
            slot[a][b] = s;
            slot[b][a] = s;
        }
        MomentTensor4::from_fn(self.dim, |i, j, k, l| {
            let (p, q) = (slot[i][j], slot[k][l]);
            let v = self.matrix[(p, q)];
            if self.normalized {
                v / self.prefactor(p, q)
            } else {
                v
            }
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.norm()
    }
}

/// Folds a symmetric tensor into its unnormalized Voigt matrix,
/// `M[p,q] = T(p₁,p₂,q₁,q₂)`.
pub fn voigt_project(t: &MomentTensor4) -> Result<VoigtTensor4> {
    if !t.is_symmetric() {
        return Err(Error::invalid(format!(
            "tensor is not permutation-symmetric (defect {:e})",
            t.symmetry_defect()
        )));
    }
    let dim = t.dim();
    let pairs = voigt_pairs(dim);
    let n = pairs.len();
    let matrix = DMatrix::from_fn(n, n, |p, q| {
        let (a, b) = pairs[p];
        let (c, d) = pairs[q];
        t.get(a, b, c, d)
    });
    Ok(VoigtTensor4 { matrix, pairs, dim, normalized: false })
}

pub fn voigt_normalize(v: VoigtTensor4) -> Result<VoigtTensor4> {
    v.normalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn random_symmetric(dim: usize, seed: u64) -> MomentTensor4 {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let vals: Vec<f64> = sorted_quadruples(dim).iter().map(|_| next()).collect();
        MomentTensor4::from_sorted_entries(dim, &vals).unwrap()
    }

    // Oracle: explicit quadruple loop.
    fn contract_oracle(t: &MomentTensor4, w: &DMatrix<f64>) -> MomentTensor4 {
        let n = t.dim();
        MomentTensor4::from_fn(w.nrows(), |a, b, c, d| {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            acc += w[(a, i)] * w[(b, j)] * w[(c, k)] * w[(d, l)] * t.get(i, j, k, l);
                        }
                    }
                }
            }
            acc
        })
    }

    #[test]
    fn voigt_of_single_variable_is_scalar() {
        let t = MomentTensor4::from_vec(1, vec![0.375]).unwrap();
        let v = voigt_project(&t).unwrap();
        assert_eq!(v.matrix().shape(), (1, 1));
        assert_eq!(v.matrix()[(0, 0)], 0.375);
        let n = v.normalize().unwrap();
        assert_eq!(n.matrix()[(0, 0)], 0.375);
    }

    #[test]
    fn voigt_two_variable_layout() {
        let t = random_symmetric(2, 3);
        let v = voigt_project(&t).unwrap();
        assert_eq!(v.pairs(), &[(0, 0), (1, 1), (0, 1)]);
        assert_eq!(v.matrix()[(0, 2)], t.get(0, 0, 0, 1));
        assert_eq!(v.matrix()[(2, 2)], t.get(0, 1, 0, 1));
        assert_eq!(v.matrix()[(0, 1)], t.get(0, 0, 1, 1));
    }

    #[test]
    fn voigt_three_variable_ordering_follows_upper_triangle_rows() {
        assert_eq!(voigt_pairs(3), vec![(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)]);
        assert_eq!(voigt_pairs(4)[4..], [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn normalize_ones_tensor() {
        let t = MomentTensor4::from_fn(2, |_, _, _, _| 1.0);
        let v = voigt_project(&t).unwrap().normalize().unwrap();
        let r2 = std::f64::consts::SQRT_2;
        let expected = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, r2, 1.0, 1.0, r2, r2, r2, 2.0]);
        assert_eq!(v.matrix(), &expected);
    }

    #[test]
    fn double_normalization_is_rejected() {
        let v = voigt_project(&random_symmetric(2, 1)).unwrap().normalize().unwrap();
        assert!(matches!(v.normalize(), Err(Error::InvalidState(_))));
    }

    #[test]
    fn asymmetric_tensor_is_rejected() {
        let mut t = random_symmetric(2, 9);
        t.set(0, 1, 0, 0, t.get(0, 1, 0, 0) + 0.5);
        assert!(matches!(voigt_project(&t), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn voigt_round_trip_reconstructs_exactly() {
        let t = random_symmetric(3, 17);
        let v = voigt_project(&t).unwrap();
        assert_eq!(v.to_tensor(), t);
    }

    #[test]
    fn isserlis_univariate() {
        let cov = DMatrix::from_element(1, 1, 2.0);
        assert_eq!(isserlis_stationary(&cov).unwrap().get(0, 0, 0, 0), 12.0);
    }

    #[test]
    fn isserlis_diagonal_covariance() {
        let cov = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 4.0]));
        let s = isserlis_stationary(&cov).unwrap();
        assert_eq!(s.get(0, 0, 1, 1), 4.0);
        assert_eq!(s.get(0, 1, 0, 1), 4.0);
        assert_eq!(s.get(0, 0, 0, 1), 0.0);
        assert_eq!(s.get(1, 1, 1, 1), 48.0);
    }

    #[test]
    fn isserlis_rejects_asymmetric() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.3, 1.0]);
        assert!(isserlis_stationary(&cov).is_err());
    }

    #[test]
    fn cumulant_of_sine_moment() {
        let m4 = MomentTensor4::from_vec(1, vec![0.375]).unwrap();
        let cov = DMatrix::from_element(1, 1, 0.5);
        assert_relative_eq!(cumulant4(&m4, &cov).unwrap().get(0, 0, 0, 0), -0.375, epsilon = 1e-15);
    }

    #[test]
    fn kurtosis_tensor_of_sine_is_half() {
        let m4 = MomentTensor4::from_vec(1, vec![0.375]).unwrap();
        let stat = isserlis_stationary(&DMatrix::from_element(1, 1, 0.5)).unwrap();
        let k = kurtosis_tensor(&m4, &stat).unwrap();
        assert_relative_eq!(k.get(0, 0, 0, 0).unwrap(), 0.5, epsilon = 1e-15);
        // conventional beta is three times the tensor value
        let beta = component_kurtosis(&m4, &DMatrix::from_element(1, 1, 0.5)).unwrap();
        assert_relative_eq!(beta[0].unwrap(), 1.5, epsilon = 1e-15);
    }

    #[test]
    fn kurtosis_tensor_marks_zero_over_zero() {
        let cov = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 4.0]));
        let stat = isserlis_stationary(&cov).unwrap();
        let k = kurtosis_tensor(&stat, &stat).unwrap();
        assert_eq!(k.get(0, 0, 0, 1), None);
        assert_eq!(k.get(0, 0, 1, 1), Some(1.0));
        assert_eq!(k.n_undefined(), 8);
    }

    #[test]
    fn kurtosis_tensor_singular_denominator() {
        let cov = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 4.0]));
        let stat = isserlis_stationary(&cov).unwrap();
        let mut m4 = stat.clone();
        for p in permutations4([0, 0, 0, 1]) {
            m4.set(p[0], p[1], p[2], p[3], 0.3);
        }
        assert!(matches!(kurtosis_tensor(&m4, &stat), Err(Error::Singular(_))));
    }

    #[test]
    fn contract_matches_quadruple_loop() {
        let t = random_symmetric(3, 5);
        let w = DMatrix::from_row_slice(2, 3, &[0.3, -1.2, 0.7, 2.0, 0.1, -0.4]);
        let fast = t.contract(&w).unwrap();
        let slow = contract_oracle(&t, &w);
        for (a, b) in fast.as_slice().iter().zip(slow.as_slice()) {
            assert_relative_eq!(a, b, epsilon = 1e-12, max_relative = 1e-12);
        }
        // widening transform
        let w = DMatrix::from_fn(5, 3, |r, c| (r as f64 + 1.0) * 0.1 - c as f64 * 0.3);
        let fast = t.contract(&w).unwrap();
        let slow = contract_oracle(&t, &w);
        for (a, b) in fast.as_slice().iter().zip(slow.as_slice()) {
            assert_relative_eq!(a, b, epsilon = 1e-12, max_relative = 1e-12);
        }
    }

    #[test]
    fn project_matches_contract_with_row() {
        let t = random_symmetric(4, 21);
        let w = [0.5, -0.25, 1.5, 0.0];
        let row = DMatrix::from_row_slice(1, 4, &w);
        assert_relative_eq!(
            t.project(&w).unwrap(),
            t.contract(&row).unwrap().get(0, 0, 0, 0),
            max_relative = 1e-13
        );
    }

    proptest! {
        #[test]
        fn normalized_voigt_preserves_norm(dim in 1usize..7, seed in any::<u64>()) {
            let t = random_symmetric(dim, seed);
            let v = voigt_project(&t).unwrap().normalize().unwrap();
            let rel = (v.frobenius_norm() - t.frobenius_norm()).abs() / t.frobenius_norm();
            prop_assert!(rel < 1e-12);
            // undoing the prefactors gives back the tensor
            let back = v.to_tensor();
            for (a, b) in back.as_slice().iter().zip(t.as_slice()) {
                prop_assert!((a - b).abs() <= 1e-14 * t.max_abs().max(1.0));
            }
        }

        #[test]
        fn isserlis_is_symmetric(dim in 1usize..6, seed in any::<u64>()) {
            let a = DMatrix::from_fn(dim, dim, |i, j| ((seed as f64 + 1.0) * (i * 7 + j * 3 + 1) as f64).sin());
            let cov = &a * a.transpose();
            let s = isserlis_stationary(&cov).unwrap();
            prop_assert_eq!(s.symmetry_defect(), 0.0);
        }

        #[test]
        fn cumulant_is_multilinear(seed in any::<u64>(), scale in 0.1f64..10.0) {
            let dim = 3;
            let m4 = random_symmetric(dim, seed);
            let a = DMatrix::from_fn(dim, dim, |i, j| ((seed % 97) as f64 * 0.1 + (i + 2 * j) as f64).cos());
            let cov = &a * a.transpose();
            let c = cumulant4(&m4, &cov).unwrap();
            // scale channel 1 by `scale`
            let mut w = DMatrix::identity(dim, dim);
            w[(1, 1)] = scale;
            let cs = cumulant4(&m4.contract(&w).unwrap(), &(&w * &cov * w.transpose())).unwrap();
            for q in sorted_quadruples(dim) {
                let k = q.iter().filter(|&&i| i == 1).count() as i32;
                let expect = c.get(q[0], q[1], q[2], q[3]) * scale.powi(k);
                let got = cs.get(q[0], q[1], q[2], q[3]);
                prop_assert!((got - expect).abs() <= 1e-10 * expect.abs().max(1e-12) + 1e-13);
            }
        }

        #[test]
        fn contraction_commutes_with_voigt_projection(seed in any::<u64>()) {
            let t = random_symmetric(3, seed);
            let b = DMatrix::from_fn(3, 3, |i, j| ((seed % 1000) as f64 * 0.01 + (i * 3 + j) as f64).sin());
            let contracted = t.contract(&b).unwrap();
            let via_voigt = voigt_project(&t).unwrap().to_tensor().contract(&b).unwrap();
            let v1 = voigt_project(&contracted).unwrap();
            let v2 = voigt_project(&via_voigt).unwrap();
            let scale = v1.matrix().amax().max(1e-300);
            prop_assert!((v1.matrix() - v2.matrix()).amax() <= 1e-10 * scale);
        }
    }
}
