//! Response statistics from a single modal solution.
//!
//! The loads are filtered once into the modal coordinates `q(t)`; the modal
//! covariance `Σq` and fourth-moment tensor `μ4q` are estimated once; each
//! node's stress statistics are then contractions of those with the node's
//! stress mode shapes:
//!
//! ```text
//! Σσ = Φσ Σq Φσᵀ
//! μ4σ(a,b,c,d) = Σ Φσ(a,i) Φσ(b,j) Φσ(c,k) Φσ(d,l) μ4q(i,j,k,l)
//! ```
//!
//! Per-node work never touches the time series, so its cost depends on the
//! mode count only. [`direct_response_oracle`] computes the nodal stress
//! series explicitly for cross-checking.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use realfft::RealFftPlanner;

use crate::error::{Error, Result};
use crate::modal::{modal_frf_at, real_times_complex, sdof_receptance, ModalModel, NodeShape};
use crate::rotation::{critical_plane_from, CriticalPlane, RotationSweep};
use crate::series::TimeSeriesSet;
use crate::sigstats::{covariance_matrix, moment4_tensor};
use crate::spectra::{psd_matrix, SpectrumMatrix, WelchConfig};
use crate::tensor4::{component_kurtosis, isserlis_unchecked, MomentTensor4};

/// Where a modal solution came from.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Provenance {
    pub model: String,
    pub loads: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModalSolution {
    /// One channel per mode.
    pub q: TimeSeriesSet,
    pub provenance: Provenance,
    /// Non-fatal findings, e.g. modes close to or above Nyquist.
    pub diagnostics: Vec<String>,
}

/// Modal covariance and fourth-moment tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalStatistics {
    pub cov: DMatrix<f64>,
    pub m4: MomentTensor4,
}

impl ModalStatistics {
    pub fn estimate(q: &TimeSeriesSet) -> Result<Self> {
        Ok(Self { cov: covariance_matrix(q)?, m4: moment4_tensor(q)? })
    }

    /// Same statistics with every off-diagonal coupling between distinct
    /// modes removed.
    pub fn diagonal_only(&self) -> Self {
        let n = self.cov.nrows();
        let cov = DMatrix::from_fn(n, n, |i, j| if i == j { self.cov[(i, i)] } else { 0.0 });
        let m4 = MomentTensor4::from_fn(n, |i, j, k, l| {
            if i == j && j == k && k == l {
                self.m4.get(i, i, i, i)
            } else {
                0.0
            }
        });
        Self { cov, m4 }
    }
}

/// Zero-padded length used for circular filtering of `n` samples.
pub fn padded_length(n: usize) -> usize {
    (2 * n).next_power_of_two()
}

/// Filters every load channel through `frf(bin, f)` (`rows × Nx` per bin) by
/// zero-padded FFT convolution and returns `rows` output channels truncated
/// to the input length.
fn filter_loads<F>(loads: &TimeSeriesSet, rows: usize, frf: F) -> Result<TimeSeriesSet>
where
    F: Fn(f64) -> Result<DMatrix<Complex64>> + Sync,
{
    let n = loads.len();
    let len = padded_length(n);
    let bins = len / 2 + 1;
    let mut planner = RealFftPlanner::<f64>::new();
    let r2c = planner.plan_fft_forward(len);
    let c2r = planner.plan_fft_inverse(len);

    let spectra: Vec<Vec<Complex64>> = loads
        .channels()
        .par_iter()
        .map(|ch| {
            let mut input = vec![0.0; len];
            input[..n].copy_from_slice(ch);
            let mut out = r2c.make_output_vec();
            r2c.process(&mut input, &mut out).expect("buffer sizes match the plan");
            out
        })
        .collect();

    let df = loads.fs() / len as f64;
    // bin-major output, rows contiguous per bin
    let per_bin: Vec<Result<Vec<Complex64>>> = (0..bins)
        .into_par_iter()
        .with_min_len(1024)
        .map(|k| {
            let h = frf(k as f64 * df)?;
            let x = DVector::from_iterator(spectra.len(), spectra.iter().map(|s| s[k]));
            Ok((h * x).iter().copied().collect())
        })
        .collect();
    let mut out_spec = vec![vec![Complex64::new(0.0, 0.0); bins]; rows];
    for (k, v) in per_bin.into_iter().enumerate() {
        for (r, z) in v?.into_iter().enumerate() {
            out_spec[r][k] = z;
        }
    }

    let channels: Vec<Vec<f64>> = out_spec
        .into_par_iter()
        .map(|mut spec| {
            // a real signal has real DC and Nyquist bins
            spec[0].im = 0.0;
            spec[bins - 1].im = 0.0;
            let mut time = c2r.make_output_vec();
            c2r.process(&mut spec, &mut time).expect("buffer sizes match the plan");
            time.truncate(n);
            let scale = 1.0 / len as f64;
            time.iter_mut().for_each(|v| *v *= scale);
            time
        })
        .collect();
    TimeSeriesSet::new(channels, loads.dt())
}

fn receptances(model: &ModalModel, f: f64) -> Result<DVector<Complex64>> {
    let w = 2.0 * std::f64::consts::PI * f;
    let h: Result<Vec<_>> = (0..model.n_modes())
        .map(|r| sdof_receptance(model.omega0()[r], model.zeta()[r], model.modal_mass()[r], w))
        .collect();
    h.map(DVector::from_vec)
}

fn check_loads(model: &ModalModel, loads: &TimeSeriesSet) -> Result<()> {
    if loads.n_channels() != model.n_inputs() {
        return Err(Error::invalid(format!(
            "model has {} inputs but loads have {} channels",
            model.n_inputs(),
            loads.n_channels()
        )));
    }
    if loads.len() < 2 {
        return Err(Error::invalid("loads need at least 2 samples"));
    }
    Ok(())
}

/// Steady-state modal coordinates `q = F⁻¹{H(f) Φ^(x) X(f)}`.
pub fn modal_solution(model: &ModalModel, loads: &TimeSeriesSet) -> Result<ModalSolution> {
    check_loads(model, loads)?;
    let mut diagnostics = Vec::new();
    let nyquist = loads.fs() / 2.0;
    if let Some(fmax) = model.freqs_hz().into_iter().reduce(f64::max) {
        if nyquist < 1.5 * fmax {
            diagnostics.push(format!(
                "Nyquist frequency {nyquist:.3} Hz is below 1.5× the highest modal frequency {fmax:.3} Hz"
            ));
        }
    }
    let p = model.participation();
    let q = filter_loads(loads, model.n_modes(), |f| Ok(modal_frf_at(&receptances(model, f)?, p)))?;
    Ok(ModalSolution { q, provenance: Provenance::default(), diagnostics })
}

/// Nodal covariance `Φσ Σq Φσᵀ`.
pub fn scale_cov_to_node(cov_q: &DMatrix<f64>, shape: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Error::check_dim(cov_q.nrows(), shape.ncols())?;
    Error::check_dim(cov_q.nrows(), cov_q.ncols())?;
    let c = shape * cov_q * shape.transpose();
    Ok((&c + c.transpose()) * 0.5)
}

/// Nodal fourth-moment tensor: `μ4q` contracted with `Φσ` on all indices.
pub fn scale_m4_to_node(m4_q: &MomentTensor4, shape: &DMatrix<f64>) -> Result<MomentTensor4> {
    m4_q.contract(shape)
}

/// Propagates a load spectrum through per-bin FRFs: `H G Hᴴ`.
pub fn propagate_psd(frfs: &[DMatrix<Complex64>], gx: &SpectrumMatrix) -> Result<SpectrumMatrix> {
    if frfs.len() != gx.len() {
        return Err(Error::invalid(format!(
            "FRF grid has {} bins, spectrum grid has {}",
            frfs.len(),
            gx.len()
        )));
    }
    let values = frfs
        .iter()
        .zip(gx.values())
        .map(|(h, g)| {
            Error::check_dim(g.nrows(), h.ncols())?;
            Ok(hermitian_part(&(h * g * h.adjoint())))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectrumMatrix::from_parts_unchecked(gx.freqs().to_vec(), values))
}

fn hermitian_part(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let mut out = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    for i in 0..out.nrows() {
        out[(i, i)].im = 0.0;
    }
    out
}

/// Stress spectrum from the modal spectrum, `Φσ Gq Φσᵀ` per bin.
pub fn stress_psd_from_modal(gq: &SpectrumMatrix, shape: &DMatrix<f64>) -> Result<SpectrumMatrix> {
    Error::check_dim(gq.n_channels(), shape.ncols())?;
    let values = gq
        .values()
        .iter()
        .map(|g| {
            let sg = real_times_complex(shape, g);
            hermitian_part(&real_times_complex(shape, &sg.adjoint()).adjoint())
        })
        .collect();
    Ok(SpectrumMatrix::from_parts_unchecked(gq.freqs().to_vec(), values))
}

/// Load spectrum supplied directly or estimated from load series.
pub enum PsdInput<'a> {
    Spectrum(&'a SpectrumMatrix),
    Loads(&'a TimeSeriesSet, WelchConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModalPsd {
    pub load: SpectrumMatrix,
    pub modal: SpectrumMatrix,
    pub nodes: Vec<(u64, SpectrumMatrix)>,
}

/// Modal-coordinate spectrum `Gq = Hxq Gx Hxqᴴ`, then `Gσ = Φσ Gq Φσᵀ` for the
/// requested nodes with no further frequency-dependent work.
pub fn modal_psd_path(model: &ModalModel, input: PsdInput<'_>, nodes: &[u64]) -> Result<ModalPsd> {
    let load = match input {
        PsdInput::Spectrum(s) => s.clone(),
        PsdInput::Loads(set, cfg) => {
            check_loads(model, set)?;
            psd_matrix(set, &cfg)?
        }
    };
    Error::check_dim(model.n_inputs(), load.n_channels())?;
    let frfs = load
        .freqs()
        .iter()
        .map(|&f| Ok(modal_frf_at(&receptances(model, f)?, model.participation())))
        .collect::<Result<Vec<_>>>()?;
    let modal = propagate_psd(&frfs, &load)?;
    let nodes = nodes
        .iter()
        .map(|&id| Ok((id, stress_psd_from_modal(&modal, &model.node(id)?.stress_shape)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ModalPsd { load, modal, nodes })
}

/// Stress spectrum of one node straight from its stress FRF,
/// `Hxσ Gx Hxσᴴ`; the reference for [`modal_psd_path`].
pub fn direct_stress_psd(model: &ModalModel, node: u64, gx: &SpectrumMatrix) -> Result<SpectrumMatrix> {
    let shape = &model.node(node)?.stress_shape;
    let frfs = gx
        .freqs()
        .iter()
        .map(|&f| {
            let hq = modal_frf_at(&receptances(model, f)?, model.participation());
            Ok(real_times_complex(shape, &hq))
        })
        .collect::<Result<Vec<_>>>()?;
    propagate_psd(&frfs, gx)
}

/// Stress series `Φσ q(t)` of one node.
pub fn stress_series(q: &TimeSeriesSet, shape: &DMatrix<f64>) -> Result<TimeSeriesSet> {
    q.mix(shape)
}

/// Nodal stress series by two independent routes.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectResponse {
    /// Loads filtered through the node's own stress FRF.
    pub via_frf: TimeSeriesSet,
    /// Modal solution scaled by the node's stress shapes.
    pub via_modal: TimeSeriesSet,
}

pub fn direct_response_oracle(model: &ModalModel, loads: &TimeSeriesSet, node: u64) -> Result<DirectResponse> {
    let shape = model.node(node)?.stress_shape.clone();
    let q = modal_solution(model, loads)?;
    direct_response_with(model, loads, &q.q, &shape)
}

/// As [`direct_response_oracle`] with a precomputed modal solution.
pub fn direct_response_with(
    model: &ModalModel,
    loads: &TimeSeriesSet,
    q: &TimeSeriesSet,
    shape: &DMatrix<f64>,
) -> Result<DirectResponse> {
    check_loads(model, loads)?;
    let p = model.participation();
    let via_frf = filter_loads(loads, shape.nrows(), |f| {
        Ok(real_times_complex(shape, &modal_frf_at(&receptances(model, f)?, p)))
    })?;
    Ok(DirectResponse { via_frf, via_modal: stress_series(q, shape)? })
}

/// Statistical characterization of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalFieldResult {
    pub node_id: u64,
    pub cov: DMatrix<f64>,
    pub m4: MomentTensor4,
    pub m4_stat: MomentTensor4,
    pub c4: MomentTensor4,
    /// Conventional kurtosis `μ4/μ2²` per stress component.
    pub beta: Vec<Option<f64>>,
    /// Present for plane-stress nodes when a sweep was requested.
    pub critical_plane: Option<CriticalPlane>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldOptions {
    /// Rotation sweep for plane-stress nodes; `None` skips the search.
    pub sweep: Option<RotationSweep>,
    /// Nodes handed to the sink per parallel batch.
    pub batch: usize,
}

impl Default for FieldOptions {
    fn default() -> Self {
        Self { sweep: Some(RotationSweep::default()), batch: 4096 }
    }
}

/// Node statistics from frozen modal statistics.
pub fn nodal_result(stats: &ModalStatistics, node: &NodeShape, sweep: Option<&RotationSweep>) -> Result<NodalFieldResult> {
    let cov = scale_cov_to_node(&stats.cov, &node.stress_shape)?;
    let m4 = scale_m4_to_node(&stats.m4, &node.stress_shape)?;
    let m4_stat = isserlis_unchecked(&cov);
    let c4 = m4.zip_map(&m4_stat, |a, b| a - b)?;
    let beta = component_kurtosis(&m4, &cov)?;
    let critical_plane = match sweep {
        Some(s) if cov.nrows() == 3 => Some(critical_plane_from(&cov, &m4, s)?),
        _ => None,
    };
    Ok(NodalFieldResult { node_id: node.id, cov, m4, m4_stat, c4, beta, critical_plane })
}

/// Evaluates `nodes` in parallel batches, passing results to `sink` in node order.
pub fn analyze_nodes<F>(stats: &ModalStatistics, nodes: &[NodeShape], opts: &FieldOptions, mut sink: F) -> Result<()>
where
    F: FnMut(NodalFieldResult),
{
    for chunk in nodes.chunks(opts.batch.max(1)) {
        let results: Vec<Result<NodalFieldResult>> =
            chunk.par_iter().map(|n| nodal_result(stats, n, opts.sweep.as_ref())).collect();
        for r in results {
            sink(r?);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FieldTimings {
    pub modal_solution: Duration,
    pub statistics: Duration,
    pub nodes: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSummary {
    pub stats: ModalStatistics,
    pub n_nodes: usize,
    pub timings: FieldTimings,
    pub diagnostics: Vec<String>,
}

/// Full field evaluation: one modal solution, one statistics estimate, then
/// a per-node map streamed into `sink`.
pub fn field_analysis<F>(model: &ModalModel, loads: &TimeSeriesSet, opts: &FieldOptions, sink: F) -> Result<FieldSummary>
where
    F: FnMut(NodalFieldResult),
{
    if model.nodes().is_empty() {
        return Err(Error::invalid("model has no nodes"));
    }
    let t0 = Instant::now();
    let sol = modal_solution(model, loads)?;
    let t1 = Instant::now();
    let stats = ModalStatistics::estimate(&sol.q)?;
    let t2 = Instant::now();
    analyze_nodes(&stats, model.nodes(), opts, sink)?;
    let t3 = Instant::now();
    Ok(FieldSummary {
        stats,
        n_nodes: model.nodes().len(),
        timings: FieldTimings { modal_solution: t1 - t0, statistics: t2 - t1, nodes: t3 - t2 },
        diagnostics: sol.diagnostics,
    })
}

/// Collecting variant of [`field_analysis`].
pub fn field_analysis_collect(
    model: &ModalModel,
    loads: &TimeSeriesSet,
    opts: &FieldOptions,
) -> Result<(FieldSummary, Vec<NodalFieldResult>)> {
    let mut out = Vec::with_capacity(model.nodes().len());
    let summary = field_analysis(model, loads, opts, |r| out.push(r))?;
    Ok((summary, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loadgen::{gaussian_noise, NoiseSpec};
    use crate::modal::frf_x_to_q;
    use crate::sigstats::{central_moment, kurtosis_of};
    use crate::spectra::integrate_to_covariance;
    use crate::TimeSeries;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn noise_set(n_ch: usize, n: usize, fs: f64, seed: u64) -> TimeSeriesSet {
        let series = (0..n_ch)
            .map(|u| gaussian_noise(&NoiseSpec::white(1.0, fs, n as f64 / fs, seed + u as u64)).unwrap())
            .collect();
        TimeSeriesSet::from_series(series).unwrap()
    }

    fn three_mode_model() -> ModalModel {
        let p = DMatrix::from_row_slice(3, 2, &[0.8, -0.3, 0.5, 0.9, -0.4, 0.6]);
        let nodes = (0..4)
            .map(|i| NodeShape {
                id: i + 1,
                coords: vec![i as f64],
                stress_shape: DMatrix::from_fn(3, 3, |r, c| ((i as usize * 9 + r * 3 + c) as f64 * 0.61).sin()),
            })
            .collect();
        ModalModel::new(
            vec![2.0 * PI * 40.0, 2.0 * PI * 55.0, 2.0 * PI * 120.0],
            vec![0.04, 0.05, 0.03],
            vec![1.0, 1.3, 0.7],
            p,
            nodes,
        )
        .unwrap()
    }

    #[test]
    fn zero_loads_give_zero_solution() {
        let m = three_mode_model();
        let loads = TimeSeriesSet::new(vec![vec![0.0; 500]; 2], 1e-3).unwrap();
        let q = modal_solution(&m, &loads).unwrap();
        assert!(q.q.channels().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn input_channel_count_is_checked() {
        let m = three_mode_model();
        let loads = TimeSeriesSet::new(vec![vec![0.0; 500]], 1e-3).unwrap();
        assert!(modal_solution(&m, &loads).is_err());
    }

    #[test]
    fn low_sampling_rate_is_diagnosed() {
        let m = three_mode_model();
        let loads = noise_set(2, 400, 300.0, 1);
        let sol = modal_solution(&m, &loads).unwrap();
        assert_eq!(sol.diagnostics.len(), 1);
    }

    #[test]
    fn resonant_sine_gain() {
        let f0 = 25.0;
        let (zeta, mass, part) = (0.05, 2.0, 1.5);
        let model = ModalModel::new(
            vec![2.0 * PI * f0],
            vec![zeta],
            vec![mass],
            DMatrix::from_element(1, 1, part),
            vec![],
        )
        .unwrap();
        let fs = 1000.0;
        let n = 40_000;
        let amp = 3.0;
        let x: Vec<f64> = (0..n).map(|i| amp * (2.0 * PI * f0 * i as f64 / fs).sin()).collect();
        let loads = TimeSeriesSet::new(vec![x], 1.0 / fs).unwrap();
        let q = modal_solution(&model, &loads).unwrap().q;
        // steady-state amplitude away from the start-up transient and the tail
        let mid = &q.channel(0)[n / 4..3 * n / 4];
        let peak = mid.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let h = sdof_receptance(2.0 * PI * f0, zeta, mass, 2.0 * PI * f0).unwrap().norm();
        assert_relative_eq!(peak, h * part * amp, max_relative = 0.01);
    }

    #[test]
    fn modal_variance_matches_spectral_integral() {
        let m = three_mode_model();
        let fs = 1000.0;
        let loads = noise_set(2, 1 << 18, fs, 11);
        let q = modal_solution(&m, &loads).unwrap().q;
        let cov_q = covariance_matrix(&q).unwrap();
        let gx = psd_matrix(&loads, &WelchConfig::new(4096)).unwrap();
        let frfs = frf_x_to_q(&m, gx.freqs()).unwrap();
        let gq = propagate_psd(&frfs, &gx).unwrap();
        let spectral = integrate_to_covariance(&gq).unwrap();
        for r in 0..3 {
            assert_relative_eq!(cov_q[(r, r)], spectral[(r, r)], max_relative = 0.03);
        }
    }

    #[test]
    fn covariance_scaling_matches_time_domain() {
        let m = three_mode_model();
        let loads = noise_set(2, 20_000, 1000.0, 3);
        let q = modal_solution(&m, &loads).unwrap().q;
        let cov_q = covariance_matrix(&q).unwrap();
        for node in m.nodes() {
            let scaled = scale_cov_to_node(&cov_q, &node.stress_shape).unwrap();
            let direct = covariance_matrix(&stress_series(&q, &node.stress_shape).unwrap()).unwrap();
            for (a, b) in scaled.iter().zip(direct.iter()) {
                assert!((a - b).abs() <= 1e-10 * direct.amax());
            }
        }
        let id = scale_cov_to_node(&cov_q, &DMatrix::identity(3, 3)).unwrap();
        assert!((id - &cov_q).amax() <= 1e-15 * cov_q.amax());
        let rank1 = DMatrix::from_fn(3, 3, |r, c| (r as f64 + 1.0) * [0.3, -0.2, 0.5][c]);
        let s = scale_cov_to_node(&cov_q, &rank1).unwrap();
        let ev = nalgebra::SymmetricEigen::new(s).eigenvalues;
        let mut ev: Vec<f64> = ev.iter().map(|v| v.abs()).collect();
        ev.sort_by(f64::total_cmp);
        assert!(ev[1] <= 1e-12 * ev[2]);
    }

    #[test]
    fn m4_scaling_univariate_projection_and_permutation() {
        let m = three_mode_model();
        let loads = noise_set(2, 20_000, 1000.0, 5);
        let q = modal_solution(&m, &loads).unwrap().q;
        let m4q = moment4_tensor(&q).unwrap();
        let w = DMatrix::from_row_slice(1, 3, &[0.7, -1.1, 0.4]);
        let proj = scale_m4_to_node(&m4q, &w).unwrap().get(0, 0, 0, 0);
        let y = stress_series(&q, &w).unwrap();
        let direct = central_moment(&TimeSeries::new(y.channel(0).to_vec(), y.dt()).unwrap(), 4).unwrap();
        assert_relative_eq!(proj, direct, max_relative = 1e-10);

        let id = scale_m4_to_node(&m4q, &DMatrix::identity(3, 3)).unwrap();
        assert_eq!(id, m4q);
        let perm = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let p = scale_m4_to_node(&m4q, &perm).unwrap();
        let pi = [2usize, 0, 1];
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    for d in 0..3 {
                        assert_eq!(p.get(a, b, c, d), m4q.get(pi[a], pi[b], pi[c], pi[d]));
                    }
                }
            }
        }
    }

    #[test]
    fn both_direct_paths_agree() {
        let m = three_mode_model();
        let loads = noise_set(2, 8192, 1000.0, 9);
        for node in m.nodes() {
            let r = direct_response_oracle(&m, &loads, node.id).unwrap();
            for c in 0..3 {
                let a = r.via_frf.channel(c);
                let b = r.via_modal.channel(c);
                let rms = (b.iter().map(|v| v * v).sum::<f64>() / b.len() as f64).sqrt();
                let err = (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / b.len() as f64).sqrt();
                assert!(err <= 1e-8 * rms, "node {} comp {c}: {err} vs {rms}", node.id);
            }
            // kurtosis from the scaled tensor equals that of the scaled series
            let stats = ModalStatistics::estimate(&modal_solution(&m, &loads).unwrap().q).unwrap();
            let res = nodal_result(&stats, node, None).unwrap();
            for c in 0..3 {
                let b = kurtosis_of(r.via_modal.channel(c)).unwrap();
                assert_relative_eq!(res.beta[c].unwrap(), b, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn zero_shape_gives_zero_series() {
        let m = three_mode_model();
        let m = m
            .with_nodes(vec![NodeShape { id: 7, coords: vec![], stress_shape: DMatrix::zeros(3, 3) }])
            .unwrap();
        let loads = noise_set(2, 1000, 1000.0, 2);
        let r = direct_response_oracle(&m, &loads, 7).unwrap();
        assert!(r.via_modal.channels().iter().flatten().all(|&v| v == 0.0));
        assert!(r.via_frf.channels().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn modal_and_direct_psd_agree_per_bin() {
        let m = three_mode_model();
        let loads = noise_set(2, 1 << 14, 1000.0, 4);
        let out = modal_psd_path(&m, PsdInput::Loads(&loads, WelchConfig::new(1024)), &[1, 2, 3, 4]).unwrap();
        for (id, gs) in &out.nodes {
            let direct = direct_stress_psd(&m, *id, &out.load).unwrap();
            for (a, b) in gs.values().iter().zip(direct.values()) {
                let scale = b.iter().fold(0.0f64, |s, z| s.max(z.norm()));
                assert!((a - b).iter().all(|z| z.norm() <= 1e-10 * scale));
            }
        }
        // grid mismatch
        let frfs = frf_x_to_q(&m, &out.load.freqs()[..10]).unwrap();
        assert!(propagate_psd(&frfs, &out.load).is_err());
    }

    #[test]
    fn single_input_gives_rank_one_modal_psd() {
        let p = DMatrix::from_row_slice(3, 1, &[0.8, 0.5, -0.4]);
        let m = ModalModel::new(
            vec![2.0 * PI * 40.0, 2.0 * PI * 55.0, 2.0 * PI * 120.0],
            vec![0.04, 0.05, 0.03],
            vec![1.0; 3],
            p,
            vec![],
        )
        .unwrap();
        let loads = noise_set(1, 1 << 13, 1000.0, 8);
        let out = modal_psd_path(&m, PsdInput::Loads(&loads, WelchConfig::new(512)), &[]).unwrap();
        for g in out.modal.values().iter().skip(1) {
            let sv = g.clone().svd(false, false).singular_values;
            assert!(sv[1] <= 1e-10 * sv[0]);
        }
    }

    #[test]
    fn off_diagonal_modal_terms_matter() {
        // modes 1 and 2 overlap in frequency, so q1 and q2 are correlated
        let m = three_mode_model();
        let loads = noise_set(2, 1 << 15, 1000.0, 6);
        let stats = ModalStatistics::estimate(&modal_solution(&m, &loads).unwrap().q).unwrap();
        let diag = stats.diagonal_only();
        let node = &m.nodes()[0];
        let full = nodal_result(&stats, node, None).unwrap();
        let reduced = nodal_result(&diag, node, None).unwrap();
        assert!((full.cov.clone() - reduced.cov.clone()).amax() > 1e-6 * full.cov.amax());
        let diff = full.m4.zip_map(&reduced.m4, |a, b| (a - b).abs()).unwrap().max_abs();
        assert!(diff > 1e-6 * full.m4.max_abs());
    }

    #[test]
    fn linearity_of_field_results() {
        let m = three_mode_model();
        let loads = noise_set(2, 1 << 13, 1000.0, 10);
        let s = 3.5f64;
        let opts = FieldOptions { sweep: Some(RotationSweep::default()), batch: 2 };
        let (_, a) = field_analysis_collect(&m, &loads, &opts).unwrap();
        let (_, b) = field_analysis_collect(&m, &loads.scaled(s), &opts).unwrap();
        for (ra, rb) in a.iter().zip(&b) {
            assert!((ra.cov.clone() * (s * s) - &rb.cov).amax() <= 1e-10 * rb.cov.amax());
            for (x, y) in ra.m4.as_slice().iter().zip(rb.m4.as_slice()) {
                assert!((x * s.powi(4) - y).abs() <= 1e-10 * rb.m4.max_abs());
            }
            for (x, y) in ra.beta.iter().zip(&rb.beta) {
                assert_relative_eq!(x.unwrap(), y.unwrap(), max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn identical_nodes_give_identical_results() {
        let m = three_mode_model();
        let shape = m.nodes()[1].stress_shape.clone();
        let m = m
            .with_nodes(vec![
                NodeShape { id: 10, coords: vec![], stress_shape: shape.clone() },
                NodeShape { id: 11, coords: vec![], stress_shape: shape },
            ])
            .unwrap();
        let loads = noise_set(2, 4096, 1000.0, 12);
        let (summary, res) = field_analysis_collect(&m, &loads, &FieldOptions::default()).unwrap();
        assert_eq!(summary.n_nodes, 2);
        assert_eq!(res[0].cov, res[1].cov);
        assert_eq!(res[0].m4, res[1].m4);
        assert_eq!(res[0].critical_plane, res[1].critical_plane);
        assert_eq!(res[0].node_id, 10);
        assert!(res[0].critical_plane.is_some());
    }

    #[test]
    fn empty_model_is_rejected() {
        let m = three_mode_model().with_nodes(vec![]).unwrap();
        let loads = noise_set(2, 256, 1000.0, 1);
        assert!(field_analysis_collect(&m, &loads, &FieldOptions::default()).is_err());
    }
}
