//! In-plane rotation of plane-stress statistics and critical-plane search.
//!
//! Stress components are ordered `[σx, σy, τxy]`. Rotating the coordinate
//! frame by `α` maps the component vector with
//!
//! ```text
//!     ⎡  c²    s²    2cs   ⎤
//! T = ⎢  s²    c²   −2cs   ⎥     c = cos α, s = sin α
//!     ⎣ −cs    cs   c²−s²  ⎦
//! ```
//!
//! so covariances transform as `T Σ Tᵀ` and fourth moments by contracting
//! every index with `T`. All statistics of the normal and shear components
//! have period 180°, hence sweeps cover `[0°, 180°)`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::tensor4::MomentTensor4;

/// Angle grid `{0, Δα, …, 180° − Δα}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationSweep {
    delta_deg: f64,
    steps: usize,
}

impl RotationSweep {
    pub fn new(delta_deg: f64) -> Result<Self> {
        if !(delta_deg.is_finite() && delta_deg > 0.0 && delta_deg <= 180.0) {
            return Err(Error::invalid(format!("angle increment must be in (0, 180], got {delta_deg}")));
        }
        let steps = (180.0 / delta_deg).round();
        if (steps * delta_deg - 180.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("180° is not divisible by the increment {delta_deg}°")));
        }
        Ok(Self { delta_deg, steps: steps as usize })
    }

    pub fn delta_deg(&self) -> f64 {
        self.delta_deg
    }

    pub fn len(&self) -> usize {
        self.steps
    }

    pub fn is_empty(&self) -> bool {
        self.steps == 0
    }

    pub fn angles_deg(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.steps).map(|i| i as f64 * self.delta_deg)
    }
}

impl Default for RotationSweep {
    /// 2° increments, 90 angles.
    fn default() -> Self {
        Self { delta_deg: 2.0, steps: 90 }
    }
}

/// Plane-stress transformation matrix for a frame rotation of `alpha_deg`.
pub fn plane_stress_rotation(alpha_deg: f64) -> DMatrix<f64> {
    let (s, c) = alpha_deg.to_radians().sin_cos();
    DMatrix::from_row_slice(
        3,
        3,
        &[c * c, s * s, 2.0 * c * s, s * s, c * c, -2.0 * c * s, -c * s, c * s, c * c - s * s],
    )
}

fn require_plane(n: usize) -> Result<()> {
    if n == 3 {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(format!(
            "rotation sweeps need plane stress (3 components), got {n}"
        )))
    }
}

pub fn rotate_cov(cov: &DMatrix<f64>, alpha_deg: f64) -> Result<DMatrix<f64>> {
    require_plane(cov.nrows())?;
    crate::tensor4::check_symmetric_matrix(cov, "stress covariance")?;
    let t = plane_stress_rotation(alpha_deg);
    Ok(&t * cov * t.transpose())
}

pub fn rotate_m4(m4: &MomentTensor4, alpha_deg: f64) -> Result<MomentTensor4> {
    require_plane(m4.dim())?;
    m4.contract(&plane_stress_rotation(alpha_deg))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Statistic {
    /// Variance `μ2`.
    Mu2,
    /// Fourth central moment `μ4`.
    Mu4,
    /// Isserlis baseline `3 μ2²`.
    Mu4Stat,
    /// Fourth cumulant `μ4 − 3 μ2²`.
    C4,
    /// Kurtosis `μ4 / μ2²`.
    Beta,
}

impl Statistic {
    pub const ALL: [Statistic; 5] = [Statistic::Mu2, Statistic::Mu4, Statistic::Mu4Stat, Statistic::C4, Statistic::Beta];

    pub fn name(self) -> &'static str {
        match self {
            Statistic::Mu2 => "mu2",
            Statistic::Mu4 => "mu4",
            Statistic::Mu4Stat => "mu4stat",
            Statistic::C4 => "c4",
            Statistic::Beta => "beta",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub angle_deg: f64,
    pub value: f64,
}

/// Maxima over the sweep of one statistic, for the normal (`σx`) and shear
/// (`τxy`) components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatExtremes {
    pub statistic: Statistic,
    pub normal: Option<Extremum>,
    pub shear: Option<Extremum>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPlane {
    pub extremes: [StatExtremes; 5],
    /// Angles skipped for kurtosis because the component variance vanished.
    pub undefined_beta: usize,
}

impl CriticalPlane {
    pub fn get(&self, s: Statistic) -> &StatExtremes {
        &self.extremes[Statistic::ALL.iter().position(|x| *x == s).unwrap()]
    }
}

/// Values of the five statistics for one component direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentStats {
    pub mu2: f64,
    pub mu4: f64,
    pub mu4_stat: f64,
    pub c4: f64,
    pub beta: Option<f64>,
}

impl ComponentStats {
    /// Statistics of the linear combination `wᵀσ`.
    pub fn along(cov: &DMatrix<f64>, m4: &MomentTensor4, w: &[f64]) -> Result<Self> {
        let v = nalgebra::DVector::from_column_slice(w);
        let mu2 = (v.transpose() * cov * &v)[(0, 0)];
        let mu4 = m4.project(w)?;
        let floor = 1e-14 * cov.diagonal().amax();
        let beta = (mu2 > floor).then(|| mu4 / (mu2 * mu2));
        Ok(Self { mu2, mu4, mu4_stat: 3.0 * mu2 * mu2, c4: mu4 - 3.0 * mu2 * mu2, beta })
    }

    pub fn get(&self, s: Statistic) -> Option<f64> {
        match s {
            Statistic::Mu2 => Some(self.mu2),
            Statistic::Mu4 => Some(self.mu4),
            Statistic::Mu4Stat => Some(self.mu4_stat),
            Statistic::C4 => Some(self.c4),
            Statistic::Beta => self.beta,
        }
    }
}

/// Relative margin, scaled by the largest magnitude over the sweep, that a
/// later angle must exceed the running maximum by; smaller differences count
/// as ties and keep the earlier angle.
const TIE_RTOL: f64 = 1e-12;

fn max_abs(values: &[(f64, Option<f64>)]) -> f64 {
    values.iter().filter_map(|v| v.1).fold(0.0f64, |a, v| a.max(v.abs()))
}

/// The cumulant is a difference of moments, so its ties are judged against
/// the moment magnitude rather than its own (possibly round-off) size.
fn argmax(values: &[(f64, Option<f64>)], scale: f64) -> Option<Extremum> {
    let mut best: Option<Extremum> = None;
    for &(angle, value) in values {
        let Some(v) = value else { continue };
        match best {
            Some(b) if v <= b.value + TIE_RTOL * scale => {}
            _ => best = Some(Extremum { angle_deg: angle, value: v }),
        }
    }
    best
}

/// Component statistics of `σx` and `τxy` at one angle.
pub fn stats_at(cov: &DMatrix<f64>, m4: &MomentTensor4, alpha_deg: f64) -> Result<(ComponentStats, ComponentStats)> {
    require_plane(cov.nrows())?;
    require_plane(m4.dim())?;
    let t = plane_stress_rotation(alpha_deg);
    let normal: Vec<f64> = t.row(0).iter().copied().collect();
    let shear: Vec<f64> = t.row(2).iter().copied().collect();
    Ok((ComponentStats::along(cov, m4, &normal)?, ComponentStats::along(cov, m4, &shear)?))
}

/// Per-statistic argmax over the sweep of the normal and shear components,
/// ties resolved to the smallest angle.
pub fn critical_plane_from(cov: &DMatrix<f64>, m4: &MomentTensor4, sweep: &RotationSweep) -> Result<CriticalPlane> {
    let mut normal: [Vec<(f64, Option<f64>)>; 5] = Default::default();
    let mut shear: [Vec<(f64, Option<f64>)>; 5] = Default::default();
    let mut undefined_beta = 0;
    for angle in sweep.angles_deg() {
        let (n, s) = stats_at(cov, m4, angle)?;
        for (i, st) in Statistic::ALL.iter().enumerate() {
            normal[i].push((angle, n.get(*st)));
            shear[i].push((angle, s.get(*st)));
        }
        undefined_beta += n.beta.is_none() as usize + s.beta.is_none() as usize;
    }
    let mu4 = Statistic::ALL.iter().position(|s| *s == Statistic::Mu4).unwrap();
    let pick = |vals: &[Vec<(f64, Option<f64>)>; 5], i: usize| {
        let scale = match Statistic::ALL[i] {
            Statistic::C4 => max_abs(&vals[mu4]),
            _ => max_abs(&vals[i]),
        };
        argmax(&vals[i], scale)
    };
    let extremes = std::array::from_fn(|i| StatExtremes {
        statistic: Statistic::ALL[i],
        normal: pick(&normal, i),
        shear: pick(&shear, i),
    });
    Ok(CriticalPlane { extremes, undefined_beta })
}

pub fn critical_plane(node: &crate::response::NodalFieldResult, sweep: &RotationSweep) -> Result<CriticalPlane> {
    critical_plane_from(&node.cov, &node.m4, sweep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor4::{isserlis_stationary, sorted_quadruples};
    use approx::assert_relative_eq;

    fn random_state(seed: u64) -> (DMatrix<f64>, MomentTensor4) {
        let a = DMatrix::from_fn(3, 4, |i, j| ((seed as f64 + 1.0) * (i * 4 + j + 1) as f64 * 0.713).sin());
        let cov = &a * a.transpose();
        let base = isserlis_stationary(&cov).unwrap();
        let extra: Vec<f64> = sorted_quadruples(3).iter().enumerate().map(|(i, _)| ((i as f64) * 0.37 + seed as f64).cos() * 0.1).collect();
        let bump = MomentTensor4::from_sorted_entries(3, &extra).unwrap();
        (cov, base.zip_map(&bump, |x, y| x + y).unwrap())
    }

    #[test]
    fn sweep_grid() {
        let s = RotationSweep::default();
        assert_eq!(s.len(), 90);
        let angles: Vec<f64> = s.angles_deg().collect();
        assert_eq!(angles[0], 0.0);
        assert_eq!(angles[89], 178.0);
        assert!(RotationSweep::new(7.0).is_err());
        assert_eq!(RotationSweep::new(1.0).unwrap().len(), 180);
    }

    #[test]
    fn zero_rotation_is_identity() {
        let (cov, m4) = random_state(1);
        assert!((rotate_cov(&cov, 0.0).unwrap() - &cov).amax() < 1e-15);
        let r = rotate_m4(&m4, 0.0).unwrap();
        for (a, b) in r.as_slice().iter().zip(m4.as_slice()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn quarter_turn_swaps_normal_components() {
        let (cov, _) = random_state(2);
        let r = rotate_cov(&cov, 90.0).unwrap();
        assert_relative_eq!(r[(0, 0)], cov[(1, 1)], max_relative = 1e-14);
        assert_relative_eq!(r[(1, 1)], cov[(0, 0)], max_relative = 1e-14);
        assert_relative_eq!(r[(2, 2)], cov[(2, 2)], max_relative = 1e-14);
    }

    #[test]
    fn rejects_non_plane_dimension() {
        let cov = DMatrix::identity(6, 6);
        assert!(matches!(rotate_cov(&cov, 10.0), Err(Error::UnsupportedDimension(_))));
        assert!(matches!(rotate_m4(&MomentTensor4::zeros(1), 10.0), Err(Error::UnsupportedDimension(_))));
    }

    // For the 2×2 stress tensor the invariants are tr σ and σ:σ; in Voigt
    // components these read σx+σy and σx²+σy²+2τ².
    #[test]
    fn tensor_invariants_are_constant_over_sweep() {
        let (cov, m4) = random_state(3);
        let metric = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1.0, 2.0]));
        let frob2 = |c: &DMatrix<f64>| (c * &metric).trace();
        let tr = |c: &DMatrix<f64>| c[(0, 0)] + c[(1, 1)] + 2.0 * c[(0, 1)];
        let m4_inv = |t: &MomentTensor4| {
            let w = [1.0, 1.0, 2.0];
            let mut s = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    s += w[a] * w[b] * t.get(a, a, b, b);
                }
            }
            s
        };
        let (f0, t0, i0) = (frob2(&cov), tr(&cov), m4_inv(&m4));
        for alpha in RotationSweep::default().angles_deg() {
            let c = rotate_cov(&cov, alpha).unwrap();
            assert_relative_eq!(frob2(&c), f0, max_relative = 1e-12);
            assert_relative_eq!(tr(&c), t0, max_relative = 1e-12);
            assert_relative_eq!(m4_inv(&rotate_m4(&m4, alpha).unwrap()), i0, max_relative = 1e-10);
        }
    }

    #[test]
    fn statistics_have_half_turn_period() {
        let (cov, m4) = random_state(4);
        for alpha in [0.0, 13.0, 77.0, 141.0] {
            let (n0, s0) = stats_at(&cov, &m4, alpha).unwrap();
            let (n1, s1) = stats_at(&cov, &m4, alpha + 180.0).unwrap();
            assert_relative_eq!(n0.mu2, n1.mu2, max_relative = 1e-12);
            assert_relative_eq!(n0.mu4, n1.mu4, max_relative = 1e-12);
            assert_relative_eq!(s0.mu4, s1.mu4, max_relative = 1e-12);
        }
    }

    #[test]
    fn isotropic_state_ties_to_zero() {
        // equal, fully correlated normal stresses and no shear: rotation-invariant
        let cov = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let m4 = isserlis_stationary(&cov).unwrap();
        let cp = critical_plane_from(&cov, &m4, &RotationSweep::default()).unwrap();
        for e in &cp.extremes {
            let n = e.normal.unwrap();
            assert_eq!(n.angle_deg, 0.0, "{:?}", e.statistic);
        }
        let (n0, _) = stats_at(&cov, &m4, 0.0).unwrap();
        assert_relative_eq!(cp.get(Statistic::Mu2).normal.unwrap().value, n0.mu2, max_relative = 1e-12);
        // shear variance is zero at every angle, so kurtosis is undefined there
        assert!(cp.get(Statistic::Beta).shear.is_none());
        assert_eq!(cp.undefined_beta, 90);
    }

    #[test]
    fn rotated_uniaxial_state_is_found() {
        // uniaxial along the x' axis of a frame at 30°: σ = T(−30°) [s, 0, 0]
        let t_back = plane_stress_rotation(-30.0);
        let dir = t_back.column(0).into_owned();
        let cov = &dir * dir.transpose();
        let m4 = MomentTensor4::from_fn(3, |i, j, k, l| 3.0 * dir[i] * dir[j] * dir[k] * dir[l]);
        let sweep = RotationSweep::default();
        let cp = critical_plane_from(&cov, &m4, &sweep).unwrap();
        for st in [Statistic::Mu2, Statistic::Mu4, Statistic::Mu4Stat] {
            let a = cp.get(st).normal.unwrap().angle_deg;
            assert!((a - 30.0).abs() <= sweep.delta_deg() / 2.0, "{st:?} at {a}");
        }
    }

    #[test]
    fn argmax_is_stable_under_refinement() {
        let (cov, m4) = random_state(5);
        let coarse = critical_plane_from(&cov, &m4, &RotationSweep::new(2.0).unwrap()).unwrap();
        let fine = critical_plane_from(&cov, &m4, &RotationSweep::new(1.0).unwrap()).unwrap();
        for (c, f) in coarse.extremes.iter().zip(&fine.extremes) {
            for (a, b) in [(c.normal, f.normal), (c.shear, f.shear)] {
                let (a, b) = (a.unwrap().angle_deg, b.unwrap().angle_deg);
                let d = (a - b).abs().min(180.0 - (a - b).abs());
                assert!(d <= 2.0, "{:?}: {a} vs {b}", c.statistic);
            }
        }
    }

    #[test]
    fn beta_argmax_is_scale_invariant() {
        let (cov, m4) = random_state(6);
        let s = 7.5f64;
        let a = critical_plane_from(&cov, &m4, &RotationSweep::default()).unwrap();
        let b = critical_plane_from(&(&cov * (s * s)), &m4.scaled(s.powi(4)), &RotationSweep::default()).unwrap();
        let (ea, eb) = (a.get(Statistic::Beta), b.get(Statistic::Beta));
        assert_eq!(ea.normal.unwrap().angle_deg, eb.normal.unwrap().angle_deg);
        assert_eq!(ea.shear.unwrap().angle_deg, eb.shear.unwrap().angle_deg);
    }

    #[test]
    fn projection_matches_full_rotation() {
        let (cov, m4) = random_state(7);
        for alpha in [10.0, 64.0, 122.0] {
            let (n, s) = stats_at(&cov, &m4, alpha).unwrap();
            let rc = rotate_cov(&cov, alpha).unwrap();
            let rm = rotate_m4(&m4, alpha).unwrap();
            assert_relative_eq!(n.mu2, rc[(0, 0)], max_relative = 1e-12);
            assert_relative_eq!(s.mu2, rc[(2, 2)], max_relative = 1e-12);
            assert_relative_eq!(n.mu4, rm.get(0, 0, 0, 0), max_relative = 1e-12);
            assert_relative_eq!(s.mu4, rm.get(2, 2, 2, 2), max_relative = 1e-12);
        }
    }
}
