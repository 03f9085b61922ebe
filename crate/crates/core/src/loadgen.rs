//! Reproducible sine-on-random test loads.
//!
//! Gaussian samples come from the xoshiro256++ generator, seeded by expanding
//! the 64-bit seed with SplitMix64, and transformed with the Marsaglia polar
//! (Box–Muller) method. Uniforms are the top 53 bits of each draw scaled to
//! `[0, 1)`. Both generators are fully specified, so a seed reproduces the
//! same series on any platform.

use num_complex::Complex64;
use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};
use crate::series::TimeSeries;
use crate::spectra::{planner_forward, planner_inverse};

/// Zero-mean Gaussian noise settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// RMS level the output is rescaled to.
    pub sigma: f64,
    pub fs: f64,
    pub duration: f64,
    /// Pass band in Hz; `(0, fs/2)` keeps the noise white.
    pub band: (f64, f64),
    pub seed: u64,
}

impl NoiseSpec {
    pub fn white(sigma: f64, fs: f64, duration: f64, seed: u64) -> Self {
        Self { sigma, fs, duration, band: (0.0, fs / 2.0), seed }
    }
}

/// Logarithmic sine sweep settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub amplitude: f64,
    pub f_start: f64,
    pub f_end: f64,
    /// Sweep rate in octaves per minute.
    pub rate: f64,
    pub fs: f64,
    pub duration: f64,
    pub phase0: f64,
}

fn sample_count(fs: f64, duration: f64) -> Result<usize> {
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::invalid(format!("sampling rate must be > 0, got {fs}")));
    }
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::invalid(format!("duration must be > 0, got {duration}")));
    }
    let n = (duration * fs).round() as usize;
    if n < 2 {
        return Err(Error::invalid(format!("duration {duration} s at {fs} Hz gives fewer than 2 samples")));
    }
    Ok(n)
}

/// Standard normal stream (polar method over xoshiro256++).
pub struct GaussianStream {
    rng: Xoshiro256PlusPlus,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        Self { rng: Xoshiro256PlusPlus::seed_from_u64(seed), spare: None }
    }

    fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * f);
                return u * f;
            }
        }
    }
}

/// Zero-mean Gaussian series rescaled to RMS `sigma`, band-limited in the
/// frequency domain when the band is narrower than `(0, fs/2)`.
pub fn gaussian_noise(spec: &NoiseSpec) -> Result<TimeSeries> {
    let n = sample_count(spec.fs, spec.duration)?;
    if !(spec.sigma.is_finite() && spec.sigma > 0.0) {
        return Err(Error::invalid(format!("noise sigma must be > 0, got {}", spec.sigma)));
    }
    let nyquist = spec.fs / 2.0;
    let (lo, hi) = spec.band;
    if !(lo >= 0.0 && lo < hi && hi <= nyquist) {
        return Err(Error::invalid(format!("noise band [{lo}, {hi}] must satisfy 0 ≤ lo < hi ≤ {nyquist}")));
    }
    let mut g = GaussianStream::new(spec.seed);
    let mut xs: Vec<f64> = (0..n).map(|_| g.next_gaussian()).collect();
    if lo > 0.0 || hi < nyquist {
        let mut buf: Vec<Complex64> = xs.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        planner_forward(n).process(&mut buf);
        let df = spec.fs / n as f64;
        for (k, z) in buf.iter_mut().enumerate() {
            let f = k.min(n - k) as f64 * df;
            if f < lo || f > hi {
                *z = Complex64::new(0.0, 0.0);
            }
        }
        planner_inverse(n).process(&mut buf);
        xs = buf.iter().map(|z| z.re / n as f64).collect();
    }
    let mean = crate::sigstats::mean(&xs);
    xs.iter_mut().for_each(|x| *x -= mean);
    let rms = (xs.iter().map(|x| x * x).sum::<f64>() / n as f64).sqrt();
    if rms == 0.0 {
        return Err(Error::Degenerate("band-limited noise vanished; widen the band".into()));
    }
    let scale = spec.sigma / rms;
    xs.iter_mut().for_each(|x| *x *= scale);
    TimeSeries::new(xs, 1.0 / spec.fs)
}

impl SweepSpec {
    fn validate(&self) -> Result<()> {
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(Error::invalid(format!("sweep amplitude must be ≥ 0, got {}", self.amplitude)));
        }
        if !(self.f_start > 0.0 && self.f_start <= self.f_end) {
            return Err(Error::invalid(format!(
                "sweep range must satisfy 0 < f_start ≤ f_end, got [{}, {}]",
                self.f_start, self.f_end
            )));
        }
        if self.f_end >= self.fs / 2.0 {
            return Err(Error::invalid(format!("sweep end {} Hz is not below Nyquist {} Hz", self.f_end, self.fs / 2.0)));
        }
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return Err(Error::invalid(format!("sweep rate must be > 0, got {}", self.rate)));
        }
        Ok(())
    }

    /// Time to sweep once from `f_start` to `f_end`, in seconds.
    pub fn span(&self) -> f64 {
        60.0 * (self.f_end / self.f_start).log2() / self.rate
    }

    /// Instantaneous frequency at `t`, wrapping back to `f_start` after each span.
    pub fn frequency_at(&self, t: f64) -> f64 {
        let span = self.span();
        let local = if span > 0.0 { t.rem_euclid(span) } else { t };
        self.f_start * (self.rate * local / 60.0).exp2()
    }

    /// Phase at `t`, continuous across wraps.
    pub fn phase_at(&self, t: f64) -> f64 {
        let two_pi = 2.0 * std::f64::consts::PI;
        let span = self.span();
        if span <= 0.0 {
            return two_pi * self.f_start * t + self.phase0;
        }
        let k = 60.0 / (self.rate * std::f64::consts::LN_2);
        let cycles_per_span = k * (self.f_end - self.f_start);
        let wraps = (t / span).floor();
        let local = t - wraps * span;
        let cycles = wraps * cycles_per_span + k * self.f_start * ((self.rate * local / 60.0).exp2() - 1.0);
        // reduce before scaling by 2π to keep the argument small
        two_pi * cycles.fract() + self.phase0
    }
}

/// `A sin φ(t)` with logarithmically increasing frequency; after reaching
/// `f_end` the sweep restarts at `f_start` with continuous phase.
pub fn sine_sweep(spec: &SweepSpec) -> Result<TimeSeries> {
    spec.validate()?;
    let n = sample_count(spec.fs, spec.duration)?;
    let dt = 1.0 / spec.fs;
    let xs = (0..n).map(|i| spec.amplitude * spec.phase_at(i as f64 * dt).sin()).collect();
    TimeSeries::new(xs, dt)
}

/// Elementwise sum of a noise and a sweep sharing sampling rate and duration.
pub fn sine_on_random(noise: &NoiseSpec, sweep: &SweepSpec) -> Result<TimeSeries> {
    if noise.fs != sweep.fs {
        return Err(Error::invalid(format!("noise fs {} differs from sweep fs {}", noise.fs, sweep.fs)));
    }
    if sample_count(noise.fs, noise.duration)? != sample_count(sweep.fs, sweep.duration)? {
        return Err(Error::invalid("noise and sweep durations differ"));
    }
    let a = gaussian_noise(noise)?;
    let b = sine_sweep(sweep)?;
    let xs = a.samples().iter().zip(b.samples()).map(|(x, y)| x + y).collect();
    TimeSeries::new(xs, a.dt())
}

/// Kurtosis of independent sine (amplitude `a`) plus Gaussian noise (std `sigma`).
pub fn sine_on_random_kurtosis(a: f64, sigma: f64) -> f64 {
    let (a2, s2) = (a * a, sigma * sigma);
    let mu4 = 0.375 * a2 * a2 + 3.0 * a2 * s2 + 3.0 * s2 * s2;
    let mu2 = a2 / 2.0 + s2;
    mu4 / (mu2 * mu2)
}
