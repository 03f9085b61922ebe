//! Uniformly sampled real-valued signals.

use crate::error::{Error, Result};

/// A single uniformly sampled real channel.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    samples: Vec<f64>,
    dt: f64,
}

impl TimeSeries {
    /// Wraps `samples` taken every `dt` seconds. All samples must be finite.
    pub fn new(samples: Vec<f64>, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid(format!("sample interval must be > 0, got {dt}")));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample at index {i}")));
        }
        Ok(Self { samples, dt })
    }

    pub fn from_rate(samples: Vec<f64>, fs: f64) -> Result<Self> {
        Self::new(samples, 1.0 / fs)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn fs(&self) -> f64 {
        1.0 / self.dt
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { samples: self.samples.iter().map(|x| x * s).collect(), dt: self.dt }
    }
}

/// `U` synchronized channels sharing sample interval and length.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesSet {
    channels: Vec<Vec<f64>>,
    dt: f64,
}

impl TimeSeriesSet {
    pub fn new(channels: Vec<Vec<f64>>, dt: f64) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::invalid("a series set needs at least one channel"));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid(format!("sample interval must be > 0, got {dt}")));
        }
        let n = channels[0].len();
        for (u, ch) in channels.iter().enumerate() {
            if ch.len() != n {
                return Err(Error::invalid(format!(
                    "channel {u} has {} samples, channel 0 has {n}",
                    ch.len()
                )));
            }
            if let Some(i) = ch.iter().position(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("non-finite sample in channel {u} at index {i}")));
            }
        }
        Ok(Self { channels, dt })
    }

    /// Collects single series into a set; they must agree on `dt` and length.
    pub fn from_series(series: Vec<TimeSeries>) -> Result<Self> {
        let dt = series.first().map(|s| s.dt).ok_or_else(|| Error::invalid("empty series list"))?;
        if let Some(s) = series.iter().find(|s| ((s.dt - dt) / dt).abs() > 1e-12) {
            return Err(Error::invalid(format!("sample interval mismatch: {} vs {dt}", s.dt)));
        }
        Self::new(series.into_iter().map(TimeSeries::into_samples).collect(), dt)
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn fs(&self) -> f64 {
        1.0 / self.dt
    }

    pub fn channel(&self, u: usize) -> &[f64] {
        &self.channels[u]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn series(&self, u: usize) -> TimeSeries {
        TimeSeries { samples: self.channels[u].clone(), dt: self.dt }
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            channels: self.channels.iter().map(|c| c.iter().map(|x| x * s).collect()).collect(),
            dt: self.dt,
        }
    }

    /// Linear combination `y = W x` of the channels, `W` given row-major as `rows × U`.
    pub fn mix(&self, weights: &nalgebra::DMatrix<f64>) -> Result<Self> {
        Error::check_dim(self.n_channels(), weights.ncols())?;
        let n = self.len();
        let channels = (0..weights.nrows())
            .map(|r| {
                let mut out = vec![0.0; n];
                for (u, ch) in self.channels.iter().enumerate() {
                    let w = weights[(r, u)];
                    if w != 0.0 {
                        out.iter_mut().zip(ch).for_each(|(o, x)| *o += w * x);
                    }
                }
                out
            })
            .collect();
        Ok(Self { channels, dt: self.dt })
    }
}
