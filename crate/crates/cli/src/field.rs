//! Field export rows, top-k ranking, and the direct-path cross-check.

use std::collections::BTreeMap;
use std::io::Write;

use modalstat::modal::ModalModel;
use modalstat::response::{direct_response_with, modal_psd_path, NodalFieldResult, PsdInput};
use modalstat::rotation::{plane_stress_rotation, RotationSweep, Statistic};
use modalstat::sigstats::{covariance_matrix, kurtosis_of, moment4_tensor};
use modalstat::spectra::{integrate_to_covariance, WelchConfig};
use modalstat::TimeSeriesSet;
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::CliResult;

/// Largest value of a statistic at a node: over the sweep for plane-stress
/// nodes, over the stress components otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeExtreme {
    pub value: f64,
    /// Sweep angle (plane-stress nodes).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angle_deg: Option<f64>,
    /// Component index (other nodes).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub component: Option<usize>,
}

fn component_value(r: &NodalFieldResult, stat: Statistic, a: usize) -> Option<f64> {
    let mu2 = r.cov[(a, a)];
    let mu4 = r.m4.get(a, a, a, a);
    match stat {
        Statistic::Mu2 => Some(mu2),
        Statistic::Mu4 => Some(mu4),
        Statistic::Mu4Stat => Some(3.0 * mu2 * mu2),
        Statistic::C4 => Some(mu4 - 3.0 * mu2 * mu2),
        Statistic::Beta => r.beta[a],
    }
}

/// `(normal, shear)` extremes; shear is only defined for plane-stress nodes.
pub fn node_extremes(r: &NodalFieldResult, stat: Statistic) -> (Option<NodeExtreme>, Option<NodeExtreme>) {
    if let Some(cp) = &r.critical_plane {
        let e = cp.get(stat);
        let conv = |x: Option<modalstat::rotation::Extremum>| {
            x.map(|x| NodeExtreme { value: x.value, angle_deg: Some(x.angle_deg), component: None })
        };
        return (conv(e.normal), conv(e.shear));
    }
    let mut best: Option<NodeExtreme> = None;
    for a in 0..r.cov.nrows() {
        if let Some(v) = component_value(r, stat, a) {
            if best.is_none_or(|b| v > b.value) {
                best = Some(NodeExtreme { value: v, angle_deg: None, component: Some(a) });
            }
        }
    }
    (best, None)
}

/// Streaming CSV writer: one row per node, empty cells for undefined values.
pub struct FieldCsv<W: Write> {
    out: W,
    stats: Vec<Statistic>,
    max_sigma: usize,
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

impl<W: Write> FieldCsv<W> {
    pub fn new(mut out: W, stats: Vec<Statistic>, max_sigma: usize) -> std::io::Result<Self> {
        let mut cols = vec!["node_id".to_string(), "n_sigma".to_string()];
        for s in &stats {
            for part in ["normal", "normal_angle", "shear", "shear_angle"] {
                cols.push(format!("{}_{part}", s.name()));
            }
        }
        cols.extend((1..=max_sigma).map(|c| format!("beta_c{c}")));
        writeln!(out, "{}", cols.join(","))?;
        Ok(Self { out, stats, max_sigma })
    }

    pub fn write(&mut self, r: &NodalFieldResult) -> std::io::Result<()> {
        let mut cells = vec![r.node_id.to_string(), r.cov.nrows().to_string()];
        for &s in &self.stats {
            let (n, sh) = node_extremes(r, s);
            cells.push(cell(n.map(|e| e.value)));
            cells.push(cell(n.and_then(|e| e.angle_deg)));
            cells.push(cell(sh.map(|e| e.value)));
            cells.push(cell(sh.and_then(|e| e.angle_deg)));
        }
        for c in 0..self.max_sigma {
            cells.push(cell(r.beta.get(c).copied().flatten()));
        }
        writeln!(self.out, "{}", cells.join(","))
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ranked {
    pub node_id: u64,
    #[serde(flatten)]
    pub extreme: NodeExtreme,
}

/// Keeps the k largest entries, ties broken by the lower node id.
#[derive(Debug, Clone)]
pub struct TopK {
    k: usize,
    items: Vec<Ranked>,
}

impl TopK {
    pub fn new(k: usize) -> Self {
        Self { k, items: Vec::with_capacity(k + 1) }
    }

    pub fn push(&mut self, node_id: u64, extreme: NodeExtreme) {
        if self.k == 0 {
            return;
        }
        let pos = self
            .items
            .iter()
            .position(|r| extreme.value > r.extreme.value || (extreme.value == r.extreme.value && node_id < r.node_id))
            .unwrap_or(self.items.len());
        if pos < self.k {
            self.items.insert(pos, Ranked { node_id, extreme });
            self.items.truncate(self.k);
        }
    }

    pub fn items(&self) -> &[Ranked] {
        &self.items
    }
}

/// Top-k per statistic, separately for the normal and shear components.
#[derive(Debug, Clone)]
pub struct Rankings {
    pub normal: BTreeMap<&'static str, TopK>,
    pub shear: BTreeMap<&'static str, TopK>,
    stats: Vec<Statistic>,
}

impl Rankings {
    pub fn new(stats: &[Statistic], k: usize) -> Self {
        let make = || stats.iter().map(|s| (s.name(), TopK::new(k))).collect();
        Self { normal: make(), shear: make(), stats: stats.to_vec() }
    }

    pub fn push(&mut self, r: &NodalFieldResult) {
        for &s in &self.stats {
            let (n, sh) = node_extremes(r, s);
            if let Some(n) = n {
                self.normal.get_mut(s.name()).unwrap().push(r.node_id, n);
            }
            if let Some(sh) = sh {
                self.shear.get_mut(s.name()).unwrap().push(r.node_id, sh);
            }
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let side = |m: &BTreeMap<&'static str, TopK>| {
            serde_json::Value::Object(
                m.iter().map(|(k, v)| (k.to_string(), serde_json::to_value(v.items()).unwrap())).collect(),
            )
        };
        serde_json::json!({ "normal": side(&self.normal), "shear": side(&self.shear) })
    }
}

fn rel_dev(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    }
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs() / scale))
}

/// Deviations between the modal-statistics path and the direct series paths.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct OracleReport {
    pub nodes_checked: usize,
    /// Max relative deviation (covariance, fourth-moment tensor, kurtosis)
    /// against per-node FRF filtering.
    pub max_dev_frf: f64,
    /// Same against mode-shape-scaled modal series.
    pub max_dev_modal_series: f64,
    /// Node with the largest fourth moment, modal path vs FRF series path.
    pub top_mu4_modal: Option<u64>,
    pub top_mu4_direct: Option<u64>,
    /// Relative gap between integrated stress spectra and covariance
    /// diagonals; reported only.
    pub spectral_first_variance_dev: Option<f64>,
}

/// Largest fourth central moment of a node's stress series, over the sweep
/// for plane-stress nodes.
fn direct_max_mu4(series: &TimeSeriesSet, sweep: &RotationSweep) -> f64 {
    let mu4 = |x: &[f64]| {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n
    };
    if series.n_channels() == 3 {
        sweep
            .angles_deg()
            .map(|a| {
                let t = plane_stress_rotation(a);
                let row = t.rows(0, 1).into_owned();
                mu4(series.mix(&row).unwrap().channel(0))
            })
            .fold(f64::NEG_INFINITY, f64::max)
    } else {
        series.channels().iter().map(|c| mu4(c)).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Evenly spread subset of `n` indices out of `len`.
pub fn spread(len: usize, n: Option<usize>) -> Vec<usize> {
    match n {
        Some(n) if n < len => (0..n).map(|i| i * len / n).collect(),
        _ => (0..len).collect(),
    }
}

#[allow(clippy::too_many_arguments)]
pub fn oracle_check(
    model: &ModalModel,
    loads: &TimeSeriesSet,
    q: &TimeSeriesSet,
    results: &BTreeMap<u64, NodalFieldResult>,
    indices: &[usize],
    sweep: &RotationSweep,
    segment: Option<usize>,
) -> CliResult<OracleReport> {
    let mut rep = OracleReport { nodes_checked: indices.len(), ..Default::default() };
    let mut best_modal: Option<(f64, u64)> = None;
    let mut best_direct: Option<(f64, u64)> = None;
    for &i in indices {
        let node = &model.nodes()[i];
        let r = &results[&node.id];
        let direct = direct_response_with(model, loads, q, &node.stress_shape)?;
        for (series, slot) in [(&direct.via_frf, &mut rep.max_dev_frf), (&direct.via_modal, &mut rep.max_dev_modal_series)] {
            let cov = covariance_matrix(series)?;
            let m4 = moment4_tensor(series)?;
            let mut dev = rel_dev(r.cov.as_slice(), cov.as_slice()).max(rel_dev(r.m4.as_slice(), m4.as_slice()));
            for (c, b) in r.beta.iter().enumerate() {
                if let Some(b) = b {
                    let d = kurtosis_of(series.channel(c))?;
                    dev = dev.max(((b - d) / d).abs());
                }
            }
            *slot = slot.max(dev);
        }
        if let (Some(m), _) = node_extremes(r, Statistic::Mu4) {
            if best_modal.is_none_or(|(v, _)| m.value > v) {
                best_modal = Some((m.value, node.id));
            }
        }
        let d = direct_max_mu4(&direct.via_frf, sweep);
        if best_direct.is_none_or(|(v, _)| d > v) {
            best_direct = Some((d, node.id));
        }
    }
    rep.top_mu4_modal = best_modal.map(|b| b.1);
    rep.top_mu4_direct = best_direct.map(|b| b.1);

    if let Some(seg) = segment {
        let ids: Vec<u64> = indices.iter().map(|&i| model.nodes()[i].id).collect();
        let seg = seg.min(loads.len());
        let psd = modal_psd_path(model, PsdInput::Loads(loads, WelchConfig::new(seg)), &ids)?;
        let mut worst = 0.0f64;
        for (id, g) in &psd.nodes {
            let integ = integrate_to_covariance(g)?;
            let cov = &results[id].cov;
            let diag = |m: &DMatrix<f64>| (0..m.nrows()).map(|a| m[(a, a)]).collect::<Vec<_>>();
            worst = worst.max(rel_dev(&diag(&integ), &diag(cov)));
        }
        rep.spectral_first_variance_dev = Some(worst);
    }
    Ok(rep)
}
