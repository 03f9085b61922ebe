//! Time-domain moment, cumulant and kurtosis estimators.
//!
//! All estimators are biased (normalized by `1/N`) and subtract the sample
//! mean of every channel first. Sums are accumulated per block of
//! [`BLOCK`] samples and the block partials are combined pairwise, which keeps
//! round-off bounded for series with millions of samples.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::series::{TimeSeries, TimeSeriesSet};
use crate::tensor4::{sorted_quadruples, MomentTensor4};

const BLOCK: usize = 1024;

/// Pairwise reduction of block partial sums.
pub(crate) fn pairwise(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise(a) + pairwise(b)
        }
    }
}

/// Sum of `f(x)` over a slice, blocked and pairwise-reduced.
fn blocked_sum(xs: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let partials: Vec<f64> = xs.chunks(BLOCK).map(|c| c.iter().map(|&x| f(x)).sum()).collect();
    pairwise(&partials)
}

pub fn mean(xs: &[f64]) -> f64 {
    blocked_sum(xs, |x| x) / xs.len() as f64
}

fn require_len(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::invalid(format!("moment estimation needs at least 2 samples, got {n}")));
    }
    Ok(())
}

/// Biased central moment `(1/N) Σ (xᵢ − x̄)ⁿ` of order 2, 3 or 4.
pub fn central_moment(ts: &TimeSeries, order: u32) -> Result<f64> {
    if !(2..=4).contains(&order) {
        return Err(Error::invalid(format!("central moment order must be 2, 3 or 4, got {order}")));
    }
    let xs = ts.samples();
    require_len(xs.len())?;
    let m = mean(xs);
    Ok(blocked_sum(xs, |x| (x - m).powi(order as i32)) / xs.len() as f64)
}

/// Mean and the second to fourth central moments in one pass set.
fn moments(xs: &[f64]) -> Result<(f64, f64, f64, f64)> {
    require_len(xs.len())?;
    let m = mean(xs);
    let n = xs.len() as f64;
    let mut p2 = Vec::with_capacity(xs.len() / BLOCK + 1);
    let mut p3 = Vec::with_capacity(p2.capacity());
    let mut p4 = Vec::with_capacity(p2.capacity());
    for c in xs.chunks(BLOCK) {
        let (mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0);
        for &x in c {
            let d = x - m;
            let d2 = d * d;
            s2 += d2;
            s3 += d2 * d;
            s4 += d2 * d2;
        }
        p2.push(s2);
        p3.push(s3);
        p4.push(s4);
    }
    Ok((m, pairwise(&p2) / n, pairwise(&p3) / n, pairwise(&p4) / n))
}

fn nondegenerate(mu2: f64) -> Result<()> {
    if mu2 > 0.0 {
        Ok(())
    } else {
        Err(Error::Degenerate("series has zero variance".into()))
    }
}

/// `γ = μ3 / μ2^{3/2}`.
pub fn skewness(ts: &TimeSeries) -> Result<f64> {
    let (_, mu2, mu3, _) = moments(ts.samples())?;
    nondegenerate(mu2)?;
    Ok(mu3 / mu2.powf(1.5))
}

/// `β = μ4 / μ2²`; 3 for a Gaussian, 1.5 for a sine.
pub fn kurtosis(ts: &TimeSeries) -> Result<f64> {
    kurtosis_of(ts.samples())
}

pub fn kurtosis_of(xs: &[f64]) -> Result<f64> {
    let (_, mu2, _, mu4) = moments(xs)?;
    nondegenerate(mu2)?;
    Ok(mu4 / (mu2 * mu2))
}

pub fn std_dev_of(xs: &[f64]) -> Result<f64> {
    Ok(moments(xs)?.1.sqrt())
}

/// First four cumulants `(mean, μ2, μ3, μ4 − 3μ2²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cumulants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

pub fn cumulants_1to4(ts: &TimeSeries) -> Result<Cumulants> {
    let (m, mu2, mu3, mu4) = moments(ts.samples())?;
    Ok(Cumulants { c1: m, c2: mu2, c3: mu3, c4: mu4 - 3.0 * mu2 * mu2 })
}

fn centered(set: &TimeSeriesSet) -> Result<Vec<Vec<f64>>> {
    require_len(set.len())?;
    Ok(set
        .channels()
        .iter()
        .map(|ch| {
            let m = mean(ch);
            ch.iter().map(|x| x - m).collect()
        })
        .collect())
}

/// Biased covariance matrix of the channels.
pub fn covariance_matrix(set: &TimeSeriesSet) -> Result<DMatrix<f64>> {
    let d = centered(set)?;
    let u = d.len();
    let n = set.len() as f64;
    let mut cov = DMatrix::zeros(u, u);
    for a in 0..u {
        for b in a..u {
            let partials: Vec<f64> = d[a]
                .chunks(BLOCK)
                .zip(d[b].chunks(BLOCK))
                .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum())
                .collect();
            let v = pairwise(&partials) / n;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    Ok(cov)
}

/// Biased rank-4 central-moment tensor of the channels.
///
/// Only the sorted quadruples are accumulated; the rest are filled by
/// symmetry, so the result is exactly permutation-invariant. Time blocks are
/// reduced in parallel but combined in a fixed order, so the output does not
/// depend on the thread count.
pub fn moment4_tensor(set: &TimeSeriesSet) -> Result<MomentTensor4> {
    let d = centered(set)?;
    let u = d.len();
    let n = set.len();
    let quads = sorted_quadruples(u);
    let pair_index = |a: usize, b: usize| a * u + b;
    let pairs: Vec<(usize, usize)> = (0..u).flat_map(|a| (a..u).map(move |b| (a, b))).collect();
    // quadruple (i,j,k,l) = pair (i,j) times pair (k,l)
    let quad_pairs: Vec<(usize, usize)> =
        quads.iter().map(|q| (pair_index(q[0], q[1]), pair_index(q[2], q[3]))).collect();

    let n_blocks = n.div_ceil(BLOCK);
    let partials: Vec<Vec<f64>> = (0..n_blocks)
        .into_par_iter()
        .map(|blk| {
            let lo = blk * BLOCK;
            let hi = (lo + BLOCK).min(n);
            let len = hi - lo;
            let mut prod = vec![0.0; u * u * len];
            for &(a, b) in &pairs {
                let dst = &mut prod[pair_index(a, b) * len..][..len];
                for (t, o) in dst.iter_mut().enumerate() {
                    *o = d[a][lo + t] * d[b][lo + t];
                }
            }
            quad_pairs
                .iter()
                .map(|&(p, q)| {
                    let x = &prod[p * len..][..len];
                    let y = &prod[q * len..][..len];
                    x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>()
                })
                .collect()
        })
        .collect();

    let mut column = vec![0.0; n_blocks];
    let sums: Vec<f64> = (0..quads.len())
        .map(|qi| {
            for (c, p) in column.iter_mut().zip(&partials) {
                *c = p[qi];
            }
            pairwise(&column) / n as f64
        })
        .collect();
    MomentTensor4::from_sorted_entries(u, &sums)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn sine(amp: f64, periods: usize, per_period: usize) -> TimeSeries {
        let n = periods * per_period;
        let xs = (0..n).map(|i| amp * (2.0 * PI * i as f64 / per_period as f64).sin()).collect();
        TimeSeries::new(xs, 1e-3).unwrap()
    }

    fn lcg_uniform(seed: u64, n: usize) -> Vec<f64> {
        let mut s = seed;
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect()
    }

    #[test]
    fn constant_series_has_zero_moments() {
        let ts = TimeSeries::new(vec![5.0; 4], 1.0).unwrap();
        for n in 2..=4 {
            assert_eq!(central_moment(&ts, n).unwrap(), 0.0);
        }
        assert!(matches!(kurtosis(&ts), Err(Error::Degenerate(_))));
        assert!(matches!(skewness(&ts), Err(Error::Degenerate(_))));
    }

    #[test]
    fn sine_moments_are_analytic() {
        assert_relative_eq!(central_moment(&sine(2.0, 10, 100), 2).unwrap(), 2.0, max_relative = 1e-12);
        assert_relative_eq!(central_moment(&sine(1.0, 10, 100), 4).unwrap(), 0.375, max_relative = 1e-12);
        assert_relative_eq!(kurtosis(&sine(1.0, 10, 100)).unwrap(), 1.5, max_relative = 1e-12);
        assert!(skewness(&sine(1.0, 10, 100)).unwrap().abs() < 1e-12);
        let c = cumulants_1to4(&sine(1.0, 10, 100)).unwrap();
        assert_relative_eq!(c.c4, -0.375, max_relative = 1e-12);
        assert!(c.c1.abs() < 1e-14);
    }

    #[test]
    fn short_or_bad_order_is_rejected() {
        let ts = TimeSeries::new(vec![1.0], 1.0).unwrap();
        assert!(central_moment(&ts, 2).is_err());
        let ts = TimeSeries::new(vec![1.0, 2.0], 1.0).unwrap();
        assert!(central_moment(&ts, 5).is_err());
    }

    #[test]
    fn identical_channels_are_fully_correlated() {
        let x = lcg_uniform(1, 500);
        let set = TimeSeriesSet::new(vec![x.clone(), x], 1.0).unwrap();
        let c = covariance_matrix(&set).unwrap();
        assert_eq!(c[(0, 1)], c[(0, 0)]);
        assert_eq!(c[(1, 0)], c[(1, 1)]);
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn covariance_matches_nested_loop() {
        let chans: Vec<Vec<f64>> = (0..3).map(|s| lcg_uniform(s + 10, 3000)).collect();
        let set = TimeSeriesSet::new(chans.clone(), 1.0).unwrap();
        let cov = covariance_matrix(&set).unwrap();
        let n = 3000.0;
        let means: Vec<f64> = chans.iter().map(|c| c.iter().sum::<f64>() / n).collect();
        for a in 0..3 {
            for b in 0..3 {
                let mut s = 0.0;
                for t in 0..3000 {
                    s += (chans[a][t] - means[a]) * (chans[b][t] - means[b]);
                }
                assert_relative_eq!(cov[(a, b)], s / n, max_relative = 1e-12);
            }
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn moment4_matches_brute_force() {
        let chans: Vec<Vec<f64>> = (0..3).map(|s| lcg_uniform(s + 100, 1000)).collect();
        let set = TimeSeriesSet::new(chans.clone(), 1.0).unwrap();
        let m4 = moment4_tensor(&set).unwrap();
        let n = 1000.0;
        let means: Vec<f64> = chans.iter().map(|c| c.iter().sum::<f64>() / n).collect();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        let mut s = 0.0;
                        for t in 0..1000 {
                            s += (chans[i][t] - means[i])
                                * (chans[j][t] - means[j])
                                * (chans[k][t] - means[k])
                                * (chans[l][t] - means[l]);
                        }
                        assert_relative_eq!(m4.get(i, j, k, l), s / n, max_relative = 1e-12);
                    }
                }
            }
        }
        assert_eq!(m4.symmetry_defect(), 0.0);
        assert_eq!(m4.get(0, 1, 0, 1), m4.get(1, 0, 1, 0));
        assert_eq!(m4.get(0, 1, 0, 1), m4.get(0, 0, 1, 1));
    }

    #[test]
    fn moment4_univariate_reduces_to_central_moment() {
        let x = lcg_uniform(7, 5000);
        let set = TimeSeriesSet::new(vec![x.clone()], 1.0).unwrap();
        let m4 = moment4_tensor(&set).unwrap();
        let mu4 = central_moment(&TimeSeries::new(x, 1.0).unwrap(), 4).unwrap();
        assert_relative_eq!(m4.get(0, 0, 0, 0), mu4, max_relative = 1e-13);
    }

    proptest! {
        #[test]
        fn kurtosis_is_scale_and_shift_invariant(seed in any::<u64>(), s in 0.01f64..100.0, c in -1e3f64..1e3) {
            let x = lcg_uniform(seed, 400);
            let base = TimeSeries::new(x.clone(), 1.0).unwrap();
            let moved = TimeSeries::new(x.iter().map(|v| s * v + c).collect(), 1.0).unwrap();
            let b0 = kurtosis(&base).unwrap();
            prop_assert!((kurtosis(&moved).unwrap() - b0).abs() <= 1e-10 * b0);
            for order in 2..=4 {
                let m0 = central_moment(&base, order).unwrap();
                let m1 = central_moment(&moved, order).unwrap();
                let expect = m0 * s.powi(order as i32);
                let scale = (central_moment(&base, 2).unwrap() * s * s).powf(order as f64 / 2.0);
                prop_assert!((m1 - expect).abs() <= 1e-9 * expect.abs().max(scale));
            }
        }

        #[test]
        fn shift_leaves_central_moments_unchanged(seed in any::<u64>(), c in -50.0f64..50.0) {
            let x = lcg_uniform(seed, 300);
            let a = TimeSeries::new(x.clone(), 1.0).unwrap();
            let b = TimeSeries::new(x.iter().map(|v| v + c).collect(), 1.0).unwrap();
            for order in [2, 4] {
                let m0 = central_moment(&a, order).unwrap();
                let m1 = central_moment(&b, order).unwrap();
                prop_assert!((m0 - m1).abs() <= 1e-10 * m0.abs());
            }
        }

        #[test]
        fn covariance_agrees_with_pairwise_moments(seed in any::<u64>()) {
            let chans: Vec<Vec<f64>> = (0..3).map(|s| lcg_uniform(seed ^ (s * 7919), 200)).collect();
            let set = TimeSeriesSet::new(chans.clone(), 1.0).unwrap();
            let cov = covariance_matrix(&set).unwrap();
            let m4 = moment4_tensor(&set).unwrap();
            for a in 0..3 {
                let var = central_moment(&set.series(a), 2).unwrap();
                prop_assert!((cov[(a, a)] - var).abs() <= 1e-13 * var);
                let mu4 = central_moment(&set.series(a), 4).unwrap();
                prop_assert!((m4.get(a, a, a, a) - mu4).abs() <= 1e-12 * mu4);
            }
        }
    }
}
