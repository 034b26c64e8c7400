//! Random excitatory-inhibitory networks: equilibrium verdict against the
//! oscillation index.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{elapsed_ms, network_seed, par_map, quantiles, IndexTriple, Quantiles, SimConfig, DEFAULT_FREEZE_TOL};
use crate::error::{Error, Result};
use crate::metrics::DEFAULT_EPSILON;
use crate::metrics::{fit_threshold_with, GmmConfig, ThresholdFit};
use crate::model::Network;
use crate::regions::{self, RegionConfig};
use crate::simulate::random_initial_state;
use crate::simulate::{DEFAULT_DT, DEFAULT_T_END, DEFAULT_WINDOW};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalStudyConfig {
    pub n_networks: usize,
    pub n_excitatory: usize,
    pub n_inhibitory: usize,
    /// Weight and input scale `B`.
    pub scale: f64,
    pub tau: f64,
    pub t_end: f64,
    pub dt: f64,
    /// Fraction of the trajectory kept as the steady window.
    pub window: f64,
    pub epsilon: f64,
    /// Convergence tolerance relative to `m`; `0` integrates every step.
    pub freeze_tol: f64,
    /// Initial conditions simulated for networks that have a stable equilibrium.
    pub n_init_with_stable: usize,
    pub master_seed: u64,
    pub record_timing: bool,
    pub gmm: GmmConfig,
}

impl Default for GlobalStudyConfig {
    fn default() -> Self {
        GlobalStudyConfig {
            n_networks: 20000,
            n_excitatory: 5,
            n_inhibitory: 5,
            scale: 10.0,
            tau: 1.0,
            t_end: DEFAULT_T_END,
            dt: DEFAULT_DT,
            window: DEFAULT_WINDOW,
            epsilon: DEFAULT_EPSILON,
            freeze_tol: DEFAULT_FREEZE_TOL,
            n_init_with_stable: 10,
            master_seed: 0,
            record_timing: false,
            gmm: GmmConfig::default(),
        }
    }
}

impl GlobalStudyConfig {
    pub fn sim(&self) -> SimConfig {
        SimConfig {
            t_end: self.t_end,
            dt: self.dt,
            window: self.window,
            epsilon: self.epsilon,
            freeze_tol: self.freeze_tol,
        }
    }

    pub fn check(&self) -> Result<()> {
        self.sim().check()?;
        if self.n_networks == 0
            || self.n_excitatory + self.n_inhibitory == 0
            || !(self.scale > 1.0)
            || !(self.tau > 0.0)
            || self.n_init_with_stable == 0
        {
            return Err(Error::InvalidArgument(format!("bad global study settings {self:?}")));
        }
        Ok(())
    }
}

/// Dale-compliant draw: the first `ne` columns of `W` are nonnegative, the
/// rest nonpositive, with `|w_ij| ~ U(0, B)`, `u ~ U(-B, B)`, `m ~ U(1, B)`
/// and `x0 ~ U(0, m)`.
pub fn sample_random_network(seed: u64, ne: usize, ni: usize, scale: f64, tau: f64) -> (Network, Vec<f64>) {
    let n = ne + ni;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mag = rng.gen_range(0.0..scale);
            w[(i, j)] = if j < ne { mag } else { -mag };
        }
    }
    let u = DVector::from_fn(n, |_, _| rng.gen_range(-scale..scale));
    let m = DVector::from_fn(n, |_, _| rng.gen_range(1.0..scale));
    let x0 = m.iter().map(|&mi| rng.gen_range(0.0..mi)).collect();
    (Network { w, u, m, tau: DVector::from_element(n, tau) }, x0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalRecord {
    pub index: usize,
    pub seed: u64,
    pub network: Network,
    pub x0: Vec<f64>,
    pub lose: Option<bool>,
    /// No stable equilibrium was certified but marginal or singular regions remain.
    pub indeterminate: bool,
    /// Indices of the initial condition with the largest `chi_osc`.
    pub indices: Option<IndexTriple>,
    /// `0` is `x0`; later initial conditions use `network_seed(seed, k)`.
    pub best_init: usize,
    pub error: Option<String>,
    pub runtime_ms: u64,
}

impl GlobalRecord {
    pub fn log_chi_osc(&self) -> Option<f64> {
        self.indices.map(|i| i.log_chi_osc)
    }

    /// `true` for networks with at least one certified stable equilibrium.
    pub fn has_stable(&self) -> bool {
        self.lose == Some(false) && !self.indeterminate
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalSummary {
    pub n_networks: usize,
    pub n_failed: usize,
    pub n_lose: usize,
    pub n_stable: usize,
    pub n_indeterminate: usize,
    pub lose_prevalence: f64,
    pub theta: Option<f64>,
    pub fit: Option<ThresholdFit>,
    pub fit_error: Option<String>,
    /// Share of LoSE networks with `log chi_osc < theta`.
    pub lose_below_theta: Option<f64>,
    /// Share of networks with a stable equilibrium and `log chi_osc > theta`.
    pub stable_above_theta: Option<f64>,
    pub quantiles_lose: Option<Quantiles>,
    pub quantiles_stable: Option<Quantiles>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalStudyResult {
    pub config: GlobalStudyConfig,
    pub records: Vec<GlobalRecord>,
    pub summary: GlobalSummary,
}

impl GlobalStudyResult {
    pub fn lose_samples(&self) -> Vec<f64> {
        self.records.iter().filter(|r| r.lose == Some(true)).filter_map(GlobalRecord::log_chi_osc).collect()
    }

    pub fn stable_samples(&self) -> Vec<f64> {
        self.records.iter().filter(|r| r.has_stable()).filter_map(GlobalRecord::log_chi_osc).collect()
    }
}

fn run_one(cfg: &GlobalStudyConfig, region: &RegionConfig, index: usize) -> GlobalRecord {
    let start = Instant::now();
    let seed = network_seed(cfg.master_seed, index as u64);
    let (network, x0) = sample_random_network(seed, cfg.n_excitatory, cfg.n_inhibitory, cfg.scale, cfg.tau);
    let mut rec = GlobalRecord {
        index,
        seed,
        network,
        x0,
        lose: None,
        indeterminate: false,
        indices: None,
        best_init: 0,
        error: None,
        runtime_ms: 0,
    };
    if let Err(e) = evaluate(cfg, region, &mut rec) {
        rec.error = Some(e.to_string());
    }
    rec.runtime_ms = elapsed_ms(start, cfg.record_timing);
    rec
}

fn evaluate(cfg: &GlobalStudyConfig, region: &RegionConfig, rec: &mut GlobalRecord) -> Result<()> {
    let verdict = regions::lose_with(&rec.network, region)?;
    rec.lose = Some(verdict.lose);
    rec.indeterminate = verdict.is_indeterminate();
    let inits = if verdict.lose { 1 } else { cfg.n_init_with_stable };
    let mut best: Option<(f64, IndexTriple, usize)> = None;
    for k in 0..inits {
        let x0 = if k == 0 {
            rec.x0.clone()
        } else {
            random_initial_state(rec.network.m.as_slice(), network_seed(rec.seed, k as u64))
        };
        let m = cfg.sim().oscillation(&rec.network, &x0)?;
        if best.as_ref().is_none_or(|b| m.chi_osc > b.0) {
            best = Some((m.chi_osc, IndexTriple::from(&m), k));
        }
    }
    if let Some((_, idx, k)) = best {
        rec.indices = Some(idx);
        rec.best_init = k;
    }
    Ok(())
}

pub fn run_global_study(cfg: &GlobalStudyConfig) -> Result<GlobalStudyResult> {
    cfg.check()?;
    let region = RegionConfig::default();
    let records = par_map(cfg.n_networks, |k| {
        let r = run_one(cfg, &region, k);
        if (k + 1) % 100 == 0 {
            log::info!("global study: network {} of {}", k + 1, cfg.n_networks);
        }
        r
    });
    let summary = summarize(cfg, &records);
    Ok(GlobalStudyResult { config: cfg.clone(), records, summary })
}

fn fraction(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn summarize(cfg: &GlobalStudyConfig, records: &[GlobalRecord]) -> GlobalSummary {
    let n_failed = records.iter().filter(|r| r.error.is_some()).count();
    let n_lose = records.iter().filter(|r| r.lose == Some(true)).count();
    let n_stable = records.iter().filter(|r| r.has_stable()).count();
    let n_indeterminate = records.iter().filter(|r| r.indeterminate).count();
    let lose_s: Vec<f64> =
        records.iter().filter(|r| r.lose == Some(true)).filter_map(GlobalRecord::log_chi_osc).collect();
    let stable_s: Vec<f64> = records.iter().filter(|r| r.has_stable()).filter_map(GlobalRecord::log_chi_osc).collect();
    let (fit, fit_error) = match fit_threshold_with(&stable_s, &cfg.gmm) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let theta = fit.as_ref().map(|f| f.theta);
    let lose_below_theta = theta.and_then(|t| fraction(lose_s.iter().filter(|&&x| x < t).count(), lose_s.len()));
    let stable_above_theta = theta.and_then(|t| fraction(stable_s.iter().filter(|&&x| x > t).count(), stable_s.len()));
    GlobalSummary {
        n_networks: records.len(),
        n_failed,
        n_lose,
        n_stable,
        n_indeterminate,
        lose_prevalence: fraction(n_lose, records.len() - n_failed.min(records.len())).unwrap_or(0.0),
        theta,
        fit,
        fit_error,
        lose_below_theta,
        stable_above_theta,
        quantiles_lose: quantiles(&lose_s),
        quantiles_stable: quantiles(&stable_s),
    }
}
