//! Monte-Carlo studies relating the absence of stable equilibria to
//! signal-based oscillation indices.
//!
//! Every study is deterministic given its configuration: network `k` of a
//! study draws from a ChaCha8 stream seeded with [`network_seed`]`(master, k)`,
//! work is spread over the current rayon pool, and results are gathered in
//! index order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{self, OscillationMetrics, DEFAULT_EPSILON};
use crate::model::Network;
use crate::simulate::{self, DEFAULT_DT, DEFAULT_T_END, DEFAULT_WINDOW};

mod eta;
mod global;
pub mod output;
mod sweep;

pub use eta::{
    ei_pair_inputs, run_eta_study, sample_ei_pair_network, EtaRecord, EtaStudyConfig, EtaStudyResult, EtaSummary,
};
pub use global::{
    run_global_study, sample_random_network, GlobalRecord, GlobalStudyConfig, GlobalStudyResult, GlobalSummary,
};
pub use sweep::{
    alpha_chi_crossing, lose_switch, run_local_sweep, run_sweep_study, select_sweep_pairs, Crossing, SweepConfig,
    SweepPair, SweepRecord, SweepStudyResult, SweepSummary, SwitchPoint,
};

/// SplitMix64 finaliser applied to `master + index`.
pub fn network_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Integration horizon and index settings shared by all studies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub t_end: f64,
    pub dt: f64,
    pub window: f64,
    pub epsilon: f64,
    /// See [`simulate::integrate_tail_with`].
    pub freeze_tol: f64,
}

/// Default convergence tolerance of the studies, relative to `m`.
///
/// Zero keeps roundoff-level motion near equilibria, which forms its own
/// mode in the distribution of `log chi_osc`; a positive value folds it
/// into the floor and moves the fitted threshold.
pub const DEFAULT_FREEZE_TOL: f64 = 0.0;

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            t_end: DEFAULT_T_END,
            dt: DEFAULT_DT,
            window: DEFAULT_WINDOW,
            epsilon: DEFAULT_EPSILON,
            freeze_tol: DEFAULT_FREEZE_TOL,
        }
    }
}

impl SimConfig {
    pub fn check(&self) -> Result<()> {
        let ok = self.t_end > 0.0
            && self.dt > 0.0
            && self.t_end.is_finite()
            && self.window > 0.0
            && self.window <= 1.0
            && self.epsilon > 0.0
            && self.epsilon < 1.0
            && self.freeze_tol >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("bad simulation settings {self:?}")))
        }
    }

    /// Simulates from `x0` and evaluates the indices on the steady window.
    pub fn oscillation(&self, net: &Network, x0: &[f64]) -> Result<OscillationMetrics> {
        let tail = simulate::integrate_tail_with(net, x0, self.t_end, self.dt, self.window, self.freeze_tol)?;
        metrics::window_metrics(&tail, net.m.as_slice(), self.epsilon)
    }
}

/// The three numbers reported per simulated network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexTriple {
    pub chi_reg: f64,
    pub chi_pp: f64,
    pub log_chi_osc: f64,
}

impl From<&OscillationMetrics> for IndexTriple {
    fn from(m: &OscillationMetrics) -> Self {
        IndexTriple { chi_reg: m.chi_reg, chi_pp: m.chi_pp, log_chi_osc: m.log_chi_osc() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub count: usize,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
}

/// Linear-interpolation quantiles; `None` for an empty sample.
pub fn quantiles(values: &[f64]) -> Option<Quantiles> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = p * (v.len() - 1) as f64;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        v[lo] + (h - lo as f64) * (v[hi] - v[lo])
    };
    Some(Quantiles { count: v.len(), q05: q(0.05), q25: q(0.25), median: q(0.5), q75: q(0.75), q95: q(0.95) })
}

pub fn median(values: &[f64]) -> Option<f64> {
    quantiles(values).map(|q| q.median)
}

/// Probability-density histogram on shared edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
    pub count: usize,
}

impl Histogram {
    pub fn new(values: &[f64], lo: f64, hi: f64, bins: usize) -> Histogram {
        let bins = bins.max(1);
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|k| lo + k as f64 * width).collect();
        let mut counts = vec![0usize; bins];
        for &x in values {
            let k = (((x - lo) / width).floor() as isize).clamp(0, bins as isize - 1) as usize;
            counts[k] += 1;
        }
        let total = values.len().max(1) as f64;
        let density = counts.iter().map(|&c| c as f64 / (total * width)).collect();
        Histogram { edges, density, count: values.len() }
    }

    /// Histograms of several samples over their common range.
    pub fn shared(samples: &[&[f64]], bins: usize) -> Vec<Histogram> {
        let all = samples.iter().flat_map(|s| s.iter().copied());
        let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 1.0) };
        samples.iter().map(|s| Histogram::new(s, lo, hi, bins)).collect()
    }
}

pub const HISTOGRAM_BINS: usize = 60;

/// Runs `f` on `0..n` in parallel, keeping index order.
pub(crate) fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

pub(crate) fn elapsed_ms(start: std::time::Instant, record: bool) -> u64 {
    if record {
        start.elapsed().as_millis() as u64
    } else {
        0
    }
}
