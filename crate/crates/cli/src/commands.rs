use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use modalstat::loadgen::{gaussian_noise, sine_sweep, GaussianStream, NoiseSpec, SweepSpec};
use modalstat::modal::{chain_modal_model, LumpedChainModel, ModalModel, NodeShape};
use modalstat::response::{
    analyze_nodes, direct_response_with, field_analysis, modal_solution, FieldOptions, ModalStatistics,
};
use modalstat::rotation::{RotationSweep, Statistic};
use modalstat::sigstats::{kurtosis_of, std_dev_of};
use modalstat::{TimeSeries, TimeSeriesSet};
use nalgebra::DMatrix;
use serde_json::json;

use crate::args::{AnalyzeArgs, BenchArgs, EigenArgs, GenLoadArgs, ValidateArgs};
use crate::error::{as_usage, CliError, CliResult};
use crate::field::{oracle_check, spread, FieldCsv, OracleReport, Rankings};
use crate::model_file::{read_model, write_model};
use crate::signal::{read_signal, write_signal, SignalFormat};

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn finite_positive(name: &str, v: f64) -> CliResult<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::usage(format!("--{name} must be > 0, got {v}")))
    }
}

pub fn generate_loads(a: &GenLoadArgs) -> CliResult<TimeSeriesSet> {
    finite_positive("fs", a.fs)?;
    finite_positive("duration", a.duration)?;
    if a.channels == 0 {
        return Err(CliError::usage("--channels must be ≥ 1"));
    }
    if a.sigma < 0.0 || a.amplitude < 0.0 || (a.sigma == 0.0 && a.amplitude == 0.0) {
        return Err(CliError::usage("need sigma > 0 or amplitude > 0, neither negative"));
    }
    let band = (a.band_low, a.band_high.unwrap_or(a.fs / 2.0));
    let series = (0..a.channels)
        .map(|c| {
            let seed = a.seed.wrapping_add(c as u64);
            let noise = NoiseSpec { sigma: a.sigma, fs: a.fs, duration: a.duration, band, seed };
            let sweep = SweepSpec {
                amplitude: a.amplitude,
                f_start: a.f_start,
                f_end: a.f_end,
                rate: a.rate,
                fs: a.fs,
                duration: a.duration,
                phase0: 0.0,
            };
            let x = match (a.sigma > 0.0, a.amplitude > 0.0) {
                (true, true) => {
                    let n = as_usage(gaussian_noise(&noise))?;
                    let s = as_usage(sine_sweep(&sweep))?;
                    let xs = n.samples().iter().zip(s.samples()).map(|(x, y)| x + y).collect();
                    TimeSeries::new(xs, n.dt())?
                }
                (true, false) => as_usage(gaussian_noise(&noise))?,
                _ => as_usage(sine_sweep(&sweep))?,
            };
            Ok(x)
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(TimeSeriesSet::from_series(series)?)
}

fn format_for(path: &Path, explicit: Option<SignalFormat>) -> SignalFormat {
    explicit.unwrap_or_else(|| {
        if path.extension().is_some_and(|e| e == "bin") {
            SignalFormat::Bin
        } else {
            SignalFormat::Csv
        }
    })
}

pub fn gen_load(a: &GenLoadArgs, out: &mut dyn Write) -> CliResult<()> {
    let set = generate_loads(a)?;
    write_signal(&a.out, &set, format_for(&a.out, a.format))?;
    writeln!(out, "wrote {} samples × {} channels to {}", set.len(), set.n_channels(), a.out.display()).ok();
    for (c, ch) in set.channels().iter().enumerate() {
        writeln!(out, "ch{}: sigma = {:.4}, beta = {:.4}", c + 1, std_dev_of(ch)?, kurtosis_of(ch)?).ok();
    }
    Ok(())
}

pub fn build_chain(a: &EigenArgs) -> CliResult<LumpedChainModel> {
    let clamped = a.clamp.ends();
    let masses = a.masses.clone().unwrap_or_else(|| vec![a.mass; a.n]);
    if masses.is_empty() {
        return Err(CliError::usage("chain needs at least one mass"));
    }
    let n_springs = masses.len() - 1 + clamped.0 as usize + clamped.1 as usize;
    let stiffnesses = a.stiffnesses.clone().unwrap_or_else(|| vec![a.stiffness; n_springs]);
    as_usage(LumpedChainModel::new(masses, stiffnesses, clamped))
}

pub fn eigen(a: &EigenArgs, out: &mut dyn Write) -> CliResult<()> {
    let chain = build_chain(a)?;
    let n = chain.n_dofs();
    if a.modes == 0 || a.modes > n {
        return Err(CliError::usage(format!("--modes must be in 1..={n}, got {}", a.modes)));
    }
    if !(a.zeta > 0.0 && a.zeta < 1.0) {
        return Err(CliError::usage(format!("--zeta must be in (0, 1), got {}", a.zeta)));
    }
    let inputs = a.inputs.clone().unwrap_or_else(|| if n == 1 { vec![0] } else { vec![0, n - 1] });
    if let Some(&d) = inputs.iter().find(|&&d| d >= n) {
        return Err(CliError::usage(format!("input dof {d} outside chain of {n} masses")));
    }
    let (model, sol) = chain_modal_model(&chain, a.modes, a.zeta, &inputs)?;
    write_model(&a.out, &model, a.sidecar)?;

    let gram = sol.shapes.transpose() * chain.mass_matrix() * &sol.shapes;
    let mut off: f64 = 0.0;
    let mut diag: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                diag = diag.max((gram[(i, j)] - 1.0).abs());
            } else {
                off = off.max(gram[(i, j)].abs());
            }
        }
    }
    writeln!(out, "{} modes written to {}", a.modes, a.out.display()).ok();
    for (r, f) in model.freqs_hz().iter().enumerate() {
        writeln!(out, "mode {:>2}: {f:.6} Hz", r + 1).ok();
    }
    writeln!(out, "orthogonality: max |off-diagonal| = {off:.3e}, max |diagonal - 1| = {diag:.3e}").ok();
    if off > 1e-8 || diag > 1e-8 {
        return Err(CliError::Numerical(format!("mass orthogonality defect {:.3e}", off.max(diag))));
    }
    Ok(())
}

fn sweep_for(delta: f64) -> CliResult<RotationSweep> {
    as_usage(RotationSweep::new(delta))
}

fn load_inputs(model_path: &Path, loads_path: &Path) -> CliResult<(ModalModel, TimeSeriesSet)> {
    let model = read_model(model_path)?;
    let loads = read_signal(loads_path)?;
    if loads.n_channels() != model.n_inputs() {
        return Err(CliError::data(format!(
            "model has Nx = {} inputs but {} has {} channels",
            model.n_inputs(),
            loads_path.display(),
            loads.n_channels()
        )));
    }
    Ok((model, loads))
}

fn write_json(path: &Path, v: &serde_json::Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| CliError::data(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn print_report(out: &mut dyn Write, rep: &OracleReport) {
    writeln!(out, "direct-path check over {} nodes:", rep.nodes_checked).ok();
    writeln!(out, "  max rel deviation vs FRF-filtered series:      {:.3e}", rep.max_dev_frf).ok();
    writeln!(out, "  max rel deviation vs mode-shape-scaled series: {:.3e}", rep.max_dev_modal_series).ok();
    if let (Some(a), Some(b)) = (rep.top_mu4_modal, rep.top_mu4_direct) {
        writeln!(out, "  top node for max mu4: modal {a}, direct {b}").ok();
    }
    if let Some(d) = rep.spectral_first_variance_dev {
        writeln!(out, "  integrated stress PSD vs covariance (reported only): {d:.3e}").ok();
    }
}

fn report_failed(rep: &OracleReport, tol: f64) -> Option<String> {
    let dev = rep.max_dev_frf.max(rep.max_dev_modal_series);
    if dev >= tol {
        return Some(format!("path deviation {dev:.3e} exceeds {tol:.1e}"));
    }
    if rep.top_mu4_modal != rep.top_mu4_direct {
        return Some(format!("top mu4 node differs: modal {:?}, direct {:?}", rep.top_mu4_modal, rep.top_mu4_direct));
    }
    None
}

pub fn analyze(a: &AnalyzeArgs, out: &mut dyn Write) -> CliResult<()> {
    let t0 = Instant::now();
    let sweep = sweep_for(a.delta)?;
    let (model, loads) = load_inputs(&a.model, &a.loads)?;
    if model.nodes().is_empty() {
        return Err(CliError::usage("model has no nodes"));
    }
    std::fs::create_dir_all(&a.out_dir).map_err(|e| CliError::io(&a.out_dir, e))?;
    let t_read = t0.elapsed();

    let mut stats: Vec<Statistic> = Vec::new();
    for s in &a.stats {
        if !stats.contains(&s.statistic()) {
            stats.push(s.statistic());
        }
    }
    let max_sigma = model.nodes().iter().map(|n| n.stress_shape.nrows()).max().unwrap_or(0);
    let csv_path = a.out_dir.join("field.csv");
    let mut csv = FieldCsv::new(create(&csv_path)?, stats.clone(), max_sigma).map_err(|e| CliError::io(&csv_path, e))?;
    let mut rankings = Rankings::new(&stats, a.top_k);
    let check = if a.validate { spread(model.nodes().len(), a.validate_nodes) } else { vec![] };
    let check_ids: BTreeSet<u64> = check.iter().map(|&i| model.nodes()[i].id).collect();
    let mut kept = BTreeMap::new();
    let mut io_err = None;

    let opts = FieldOptions { sweep: Some(sweep), ..FieldOptions::default() };
    let summary = field_analysis(&model, &loads, &opts, |r| {
        if io_err.is_none() {
            io_err = csv.write(&r).err();
        }
        rankings.push(&r);
        if check_ids.contains(&r.node_id) {
            kept.insert(r.node_id, r);
        }
    })?;
    if let Some(e) = io_err {
        return Err(CliError::io(&csv_path, e));
    }
    csv.finish().map_err(|e| CliError::io(&csv_path, e))?;

    let report = if a.validate {
        let q = modal_solution(&model, &loads)?.q;
        Some(oracle_check(&model, &loads, &q, &kept, &check, &sweep, Some(a.segment))?)
    } else {
        None
    };
    let total = t0.elapsed();
    for d in &summary.diagnostics {
        writeln!(out, "warning: {d}").ok();
    }
    let secs = |d: std::time::Duration| d.as_secs_f64();
    let doc = json!({
        "n_nodes": summary.n_nodes,
        "n_modes": model.n_modes(),
        "n_samples": loads.len(),
        "fs": loads.fs(),
        "delta_deg": sweep.delta_deg(),
        "statistics": stats.iter().map(|s| s.name()).collect::<Vec<_>>(),
        "top_k": rankings.to_json(),
        "runtime_s": {
            "read": secs(t_read),
            "modal_solution": secs(summary.timings.modal_solution),
            "modal_statistics": secs(summary.timings.statistics),
            "nodes": secs(summary.timings.nodes),
            "total": secs(total),
        },
        "diagnostics": summary.diagnostics,
        "validation": report,
    });
    write_json(&a.out_dir.join("summary.json"), &doc)?;
    writeln!(
        out,
        "{} nodes analysed in {:.3} s (modal solution {:.3} s, statistics {:.3} s, nodes {:.3} s)",
        summary.n_nodes,
        secs(total),
        secs(summary.timings.modal_solution),
        secs(summary.timings.statistics),
        secs(summary.timings.nodes)
    )
    .ok();
    if let Some(top) = rankings.normal.get(Statistic::Mu4.name()).and_then(|t| t.items().first()) {
        writeln!(out, "top node for max mu4: {}", top.node_id).ok();
    }
    if let Some(rep) = &report {
        print_report(out, rep);
        if let Some(msg) = report_failed(rep, 1e-8) {
            return Err(CliError::Numerical(msg));
        }
    }
    Ok(())
}

pub fn validate(a: &ValidateArgs, out: &mut dyn Write) -> CliResult<()> {
    let sweep = sweep_for(a.delta)?;
    let model = read_model(&a.model)?;
    writeln!(
        out,
        "model: Nr = {}, Nx = {}, {} nodes, modes {:.3}..{:.3} Hz",
        model.n_modes(),
        model.n_inputs(),
        model.nodes().len(),
        model.freqs_hz().first().copied().unwrap_or(0.0),
        model.freqs_hz().last().copied().unwrap_or(0.0)
    )
    .ok();
    let Some(loads_path) = &a.loads else { return Ok(()) };
    let (model, loads) = load_inputs(&a.model, loads_path)?;
    writeln!(out, "loads: {} channels, {} samples, fs = {} Hz", loads.n_channels(), loads.len(), loads.fs()).ok();
    if model.nodes().is_empty() {
        return Ok(());
    }
    let sol = modal_solution(&model, &loads)?;
    for d in &sol.diagnostics {
        writeln!(out, "warning: {d}").ok();
    }
    let stats = ModalStatistics::estimate(&sol.q)?;
    let check = spread(model.nodes().len(), a.nodes);
    let subset: Vec<NodeShape> = check.iter().map(|&i| model.nodes()[i].clone()).collect();
    let mut kept = BTreeMap::new();
    let opts = FieldOptions { sweep: Some(sweep), ..FieldOptions::default() };
    analyze_nodes(&stats, &subset, &opts, |r| {
        kept.insert(r.node_id, r);
    })?;
    let rep = oracle_check(&model, &loads, &sol.q, &kept, &check, &sweep, None)?;
    print_report(out, &rep);
    match report_failed(&rep, a.tolerance) {
        Some(msg) => Err(CliError::Numerical(msg)),
        None => {
            writeln!(out, "ok").ok();
            Ok(())
        }
    }
}

/// Synthetic model with evenly spaced modes and random stress shapes.
pub fn synthetic_model(n_nodes: usize, n_modes: usize, n_sigma: usize, seed: u64) -> CliResult<ModalModel> {
    let mut g = GaussianStream::new(seed);
    let mut draw = |n: usize| (0..n).map(|_| g.next_gaussian()).collect::<Vec<_>>();
    let omega = (0..n_modes).map(|r| 2.0 * std::f64::consts::PI * (40.0 + 30.0 * r as f64)).collect();
    let participation = DMatrix::from_vec(n_modes, 2, draw(2 * n_modes));
    let nodes = (0..n_nodes)
        .map(|i| NodeShape {
            id: i as u64 + 1,
            coords: vec![i as f64],
            stress_shape: DMatrix::from_vec(n_sigma, n_modes, draw(n_sigma * n_modes)),
        })
        .collect();
    Ok(ModalModel::new(omega, vec![0.05; n_modes], vec![1.0; n_modes], participation, nodes)?)
}

fn bench_loads(samples: usize, seed: u64) -> CliResult<TimeSeriesSet> {
    let fs = 2000.0;
    let duration = samples as f64 / fs;
    let args = GenLoadArgs {
        out: Default::default(),
        format: None,
        fs,
        duration,
        sigma: 10.0,
        amplitude: 22.0,
        f_start: 150.0,
        f_end: 300.0,
        rate: 1.0,
        band_low: 0.0,
        band_high: None,
        channels: 2,
        seed,
    };
    generate_loads(&args)
}

pub fn bench(a: &BenchArgs, out: &mut dyn Write) -> CliResult<()> {
    if a.nodes.is_empty() || a.nodes.contains(&0) {
        return Err(CliError::usage("--nodes needs positive counts"));
    }
    if a.modes == 0 || a.n_sigma == 0 || a.samples < 16 || a.length_factor == 0 {
        return Err(CliError::usage("--modes, --n-sigma, --length-factor must be ≥ 1 and --samples ≥ 16"));
    }
    let sweep = sweep_for(a.delta)?;
    let max_nodes = *a.nodes.iter().max().unwrap();
    let full = synthetic_model(max_nodes, a.modes, a.n_sigma, a.seed)?;
    let opts = FieldOptions { sweep: Some(sweep), ..FieldOptions::default() };

    let mut w = create(&a.out)?;
    let err = |e| CliError::io(&a.out, e);
    writeln!(
        w,
        "samples,nodes,modal_solution_s,modal_statistics_s,modal_nodes_s,modal_per_node_us,direct_nodes_timed,direct_per_node_us,direct_total_est_s"
    )
    .map_err(err)?;
    let mut per_node_by_len = Vec::new();
    let mut lengths = vec![a.samples];
    if a.length_factor > 1 {
        lengths.push(a.samples * a.length_factor);
    }
    for &samples in &lengths {
        let loads = bench_loads(samples, a.seed)?;
        let mut per_node_largest = 0.0;
        for &n in &a.nodes {
            let model = full.with_nodes(full.nodes()[..n].to_vec())?;
            let summary = field_analysis(&model, &loads, &opts, |_| {})?;
            let nodes_s = summary.timings.nodes.as_secs_f64();
            let per_node = nodes_s / n as f64;
            per_node_largest = per_node;

            let q = modal_solution(&model, &loads)?.q;
            let timed = a.direct_nodes.min(n);
            let t = Instant::now();
            for node in &model.nodes()[..timed] {
                let d = direct_response_with(&model, &loads, &q, &node.stress_shape)?;
                for c in d.via_frf.channels() {
                    std::hint::black_box(kurtosis_of(c)?);
                }
            }
            let direct_per_node = if timed > 0 { t.elapsed().as_secs_f64() / timed as f64 } else { 0.0 };
            writeln!(
                w,
                "{samples},{n},{},{},{nodes_s},{},{timed},{},{}",
                summary.timings.modal_solution.as_secs_f64(),
                summary.timings.statistics.as_secs_f64(),
                per_node * 1e6,
                direct_per_node * 1e6,
                direct_per_node * n as f64
            )
            .map_err(err)?;
            writeln!(
                out,
                "N = {samples:>8}, nodes = {n:>6}: modal nodes {nodes_s:.3} s ({:.2} us/node), direct {:.1} us/node",
                per_node * 1e6,
                direct_per_node * 1e6
            )
            .ok();
        }
        per_node_by_len.push(per_node_largest);
    }
    w.flush().map_err(err)?;
    if let [a0, b0] = per_node_by_len[..] {
        writeln!(out, "per-node cost ratio between series lengths: {:.3}", a0.max(b0) / a0.min(b0)).ok();
    }
    Ok(())
}

pub fn run(cli: crate::args::Cli, out: &mut dyn Write) -> CliResult<()> {
    use crate::args::Command;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be ≥ 1"));
        }
        // a second initialisation in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::GenLoad(a) => gen_load(a, out),
        Command::Eigen(a) => eigen(a, out),
        Command::Analyze(a) => analyze(a, out),
        Command::Bench(a) => bench(a, out),
        Command::Validate(a) => validate(a, out),
    }
}
