//! One-sided cross-spectral density matrices.
//!
//! Estimation uses Welch's averaged periodogram: the series is split into
//! (optionally overlapping) segments, each segment has its mean removed and is
//! windowed, and the cross-periodograms `X_a X_b*` are averaged. Densities are
//! one-sided in units²/Hz: interior bins are doubled, DC and (for even segment
//! lengths) Nyquist are not.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::series::TimeSeriesSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    Rectangular,
    #[default]
    Hann,
}

impl Window {
    /// Periodic window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

/// Welch estimator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchConfig {
    pub segment_length: usize,
    pub overlap: f64,
    pub window: Window,
}

impl WelchConfig {
    /// Hann window with 50 % overlap.
    pub fn new(segment_length: usize) -> Self {
        Self { segment_length, overlap: 0.5, window: Window::Hann }
    }

    /// One rectangular segment spanning the whole series; integrates exactly
    /// to the sample covariance.
    pub fn single_segment(n: usize) -> Self {
        Self { segment_length: n, overlap: 0.0, window: Window::Rectangular }
    }
}

/// Hermitian one-sided spectral density matrix on a uniform grid starting at 0 Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumMatrix {
    freqs: Vec<f64>,
    values: Vec<DMatrix<Complex64>>,
}

impl SpectrumMatrix {
    /// Validates grid uniformity and Hermitian symmetry of every bin.
    pub fn new(freqs: Vec<f64>, values: Vec<DMatrix<Complex64>>) -> Result<Self> {
        Error::check_dim(freqs.len(), values.len())?;
        if freqs.is_empty() {
            return Err(Error::invalid("spectrum has an empty frequency grid"));
        }
        if freqs[0] != 0.0 {
            return Err(Error::invalid("frequency grid must start at 0 Hz"));
        }
        if freqs.len() > 1 {
            let df = freqs[1] - freqs[0];
            if df <= 0.0 {
                return Err(Error::invalid("frequency grid must be ascending"));
            }
            for (k, f) in freqs.iter().enumerate() {
                if (f - k as f64 * df).abs() > 1e-9 * df.max(f.abs()) {
                    return Err(Error::invalid(format!("frequency grid not uniform at bin {k}")));
                }
            }
        }
        let u = values[0].nrows();
        for (k, m) in values.iter().enumerate() {
            if m.nrows() != u || m.ncols() != u {
                return Err(Error::invalid(format!("bin {k} is not {u}×{u}")));
            }
            let scale = m.iter().fold(0.0f64, |a, z| a.max(z.norm()));
            for a in 0..u {
                if m[(a, a)].im.abs() > 1e-12 * scale || m[(a, a)].re < -1e-12 * scale {
                    return Err(Error::invalid(format!("bin {k}: diagonal {a} is not real non-negative")));
                }
                for b in (a + 1)..u {
                    if (m[(a, b)] - m[(b, a)].conj()).norm() > 1e-12 * scale {
                        return Err(Error::invalid(format!("bin {k} is not Hermitian at ({a},{b})")));
                    }
                }
            }
        }
        Ok(Self { freqs, values })
    }

    pub(crate) fn from_parts_unchecked(freqs: Vec<f64>, values: Vec<DMatrix<Complex64>>) -> Self {
        Self { freqs, values }
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn values(&self) -> &[DMatrix<Complex64>] {
        &self.values
    }

    pub fn n_channels(&self) -> usize {
        self.values[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn df(&self) -> f64 {
        if self.freqs.len() > 1 {
            self.freqs[1] - self.freqs[0]
        } else {
            0.0
        }
    }

    /// Auto-spectrum of channel `a` as a real vector.
    pub fn auto(&self, a: usize) -> Vec<f64> {
        self.values.iter().map(|m| m[(a, a)].re).collect()
    }
}

pub(crate) fn planner_forward(n: usize) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft_forward(n)
}

pub(crate) fn planner_inverse(n: usize) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft_inverse(n)
}

/// Welch cross-spectral density matrix of all channels.
pub fn psd_matrix(set: &TimeSeriesSet, cfg: &WelchConfig) -> Result<SpectrumMatrix> {
    let n = set.len();
    let len = cfg.segment_length;
    if len < 2 {
        return Err(Error::invalid(format!("segment length must be ≥ 2, got {len}")));
    }
    if len > n {
        return Err(Error::invalid(format!("segment length {len} exceeds series length {n}")));
    }
    if !(0.0..1.0).contains(&cfg.overlap) {
        return Err(Error::invalid(format!("overlap fraction must be in [0,1), got {}", cfg.overlap)));
    }
    let step = ((len as f64 * (1.0 - cfg.overlap)).round() as usize).max(1);
    let n_seg = (n - len) / step + 1;
    let window = cfg.window.coefficients(len);
    let win_energy: f64 = window.iter().map(|w| w * w).sum();
    let fft = planner_forward(len);
    let u = set.n_channels();
    let n_bins = len / 2 + 1;

    let accumulate = |seg: usize| -> Vec<DMatrix<Complex64>> {
        let lo = seg * step;
        let spectra: Vec<Vec<Complex64>> = set
            .channels()
            .iter()
            .map(|ch| {
                let s = &ch[lo..lo + len];
                let m = s.iter().sum::<f64>() / len as f64;
                let mut buf: Vec<Complex64> =
                    s.iter().zip(&window).map(|(x, w)| Complex64::new((x - m) * w, 0.0)).collect();
                fft.process(&mut buf);
                buf.truncate(n_bins);
                buf
            })
            .collect();
        (0..n_bins)
            .map(|k| {
                let mut m = DMatrix::zeros(u, u);
                for a in 0..u {
                    m[(a, a)] = Complex64::new(spectra[a][k].norm_sqr(), 0.0);
                    for b in (a + 1)..u {
                        let v = spectra[a][k] * spectra[b][k].conj();
                        m[(a, b)] = v;
                        m[(b, a)] = v.conj();
                    }
                }
                m
            })
            .collect()
    };

    let per_segment: Vec<Vec<DMatrix<Complex64>>> = (0..n_seg).into_par_iter().map(accumulate).collect();
    let fs = set.fs();
    let base = 1.0 / (fs * win_energy * n_seg as f64);
    let values: Vec<DMatrix<Complex64>> = (0..n_bins)
        .map(|k| {
            let mut sum = DMatrix::<Complex64>::zeros(u, u);
            for seg in &per_segment {
                sum += &seg[k];
            }
            let one_sided = if k == 0 || (len.is_multiple_of(2) && k == len / 2) { 1.0 } else { 2.0 };
            sum * Complex64::new(base * one_sided, 0.0)
        })
        .collect();
    let freqs = (0..n_bins).map(|k| k as f64 * fs / len as f64).collect();
    Ok(SpectrumMatrix::from_parts_unchecked(freqs, values))
}

/// Integrates the real part of the spectrum over frequency.
///
/// Each bin contributes `Re G(f_k)·Δf`. With DC and Nyquist held at single
/// (not doubled) density this equals the trapezoidal rule applied to the
/// doubled one-sided density, and for a single rectangular full-length
/// segment it reproduces the sample covariance exactly (Parseval).
pub fn integrate_to_covariance(s: &SpectrumMatrix) -> Result<DMatrix<f64>> {
    if s.is_empty() {
        return Err(Error::invalid("cannot integrate an empty spectrum"));
    }
    let u = s.n_channels();
    let df = s.df();
    let mut cov = DMatrix::zeros(u, u);
    for a in 0..u {
        for b in a..u {
            let partials: Vec<f64> = s.values.iter().map(|m| m[(a, b)].re).collect();
            let v = crate::sigstats::pairwise(&partials) * df;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    Ok(cov)
}
