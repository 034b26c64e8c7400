//! Random networks of oscillating E-I pairs coupled excitatory-to-excitatory
//! with a scaled coupling matrix.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{elapsed_ms, network_seed, par_map, quantiles, IndexTriple, Quantiles, SimConfig, DEFAULT_FREEZE_TOL};
use crate::criteria::{e2e_coupled_lose, excitatory_bound};
use crate::error::{Error, Result};
use crate::metrics::DEFAULT_EPSILON;
use crate::model::{flatten_ei_pair_network, EIPairNetwork, EIPairParams};
use crate::simulate::random_initial_state;
use crate::simulate::{DEFAULT_DT, DEFAULT_T_END, DEFAULT_WINDOW};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EtaStudyConfig {
    /// Number of pairs per network.
    pub n: usize,
    pub eta_list: Vec<f64>,
    pub d_max: f64,
    pub a_min: f64,
    pub a_max: f64,
    pub b_min: f64,
    pub b_max: f64,
    pub m1_min: f64,
    pub m1_max: f64,
    pub m2_min: f64,
    pub m2_max: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub n_networks: usize,
    pub seed: u64,
    pub t_end: f64,
    pub dt: f64,
    /// Fraction of the trajectory kept as the steady window.
    pub window: f64,
    pub epsilon: f64,
    /// Convergence tolerance relative to `m`; `0` integrates every step.
    pub freeze_tol: f64,
    /// Threshold used for the per-eta share of oscillating networks.
    pub theta: Option<f64>,
    pub record_timing: bool,
}

impl Default for EtaStudyConfig {
    fn default() -> Self {
        let b_min = 8f64.sqrt() + 0.5;
        EtaStudyConfig {
            n: 10,
            eta_list: vec![0.0, 0.9, 0.99, 1.01, 1.1],
            d_max: 1.0,
            a_min: 3.5,
            a_max: 5.0,
            b_min,
            b_max: 8f64.sqrt() + 2.0,
            m1_min: 1.0,
            m1_max: 2.0,
            m2_min: 8.0 / b_min + 0.5,
            m2_max: 8.0 / b_min + 2.0,
            tau_min: 1.0,
            tau_max: 10.0,
            n_networks: 1000,
            seed: 0,
            t_end: DEFAULT_T_END,
            dt: DEFAULT_DT,
            window: DEFAULT_WINDOW,
            epsilon: DEFAULT_EPSILON,
            freeze_tol: DEFAULT_FREEZE_TOL,
            theta: None,
            record_timing: false,
        }
    }
}

impl EtaStudyConfig {
    pub fn sim(&self) -> SimConfig {
        SimConfig {
            t_end: self.t_end,
            dt: self.dt,
            window: self.window,
            epsilon: self.epsilon,
            freeze_tol: self.freeze_tol,
        }
    }

    /// Every draw from the ranges yields pairs that oscillate in isolation.
    pub fn check(&self) -> Result<()> {
        self.sim().check()?;
        let ordered = [
            (0.0, self.d_max),
            (self.a_min, self.a_max),
            (self.b_min, self.b_max),
            (0.0, self.m1_min),
            (self.m1_min, self.m1_max),
            (self.m2_min, self.m2_max),
            (0.0, self.tau_min),
            (self.tau_min, self.tau_max),
        ];
        if ordered.iter().any(|(lo, hi)| !(lo <= hi) || !hi.is_finite()) || self.m1_min <= 0.0 || self.tau_min <= 0.0 {
            return Err(Error::InvalidArgument(format!("bad parameter ranges {self:?}")));
        }
        if self.n == 0 || self.n_networks == 0 || self.eta_list.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
            return Err(Error::InvalidArgument("n, n_networks must be positive and eta nonnegative".into()));
        }
        let chain = [
            ("a_min > d_max + 2", self.a_min > self.d_max + 2.0),
            ("b_min^2 > (a_max - 1)(d_max + 1)", self.b_min * self.b_min > (self.a_max - 1.0) * (self.d_max + 1.0)),
            ("m2_min > (a_max - 1) m1_max / b_min", self.m2_min > (self.a_max - 1.0) / self.b_min * self.m1_max),
        ];
        match chain.iter().find(|(_, ok)| !ok) {
            Some((what, _)) => Err(Error::Precondition(format!("range chain violated: {what}"))),
            None => Ok(()),
        }
    }
}

/// Inputs at the centre of the admissible `u_1` range and, given `u_1`, of
/// the admissible `u_2` range.
pub fn ei_pair_inputs(a: f64, b: f64, c: f64, d: f64, m1: f64, m2: f64) -> (f64, f64) {
    let u1 = (b * m2 - (a - 1.0) * m1) / 2.0;
    let hi = (d + 1.0) * u1 / b;
    let lo = ((d + 1.0) * u1 - (b * c - (a - 1.0) * (d + 1.0)) * m1) / b;
    (u1, (lo + hi) / 2.0)
}

/// Pairs drawn from the configured ranges with `Ae = eta * Abar` and
/// `Ai = 0`, where `Abar_ij = (ubar_i - u_i1) G_ij / ((G 1)_i m_j1)` so that
/// row `i` of `Abar m_1` equals `ubar_i - u_i1`.
pub fn sample_ei_pair_network(cfg: &EtaStudyConfig, eta: f64, seed: u64) -> Result<EIPairNetwork> {
    cfg.check()?;
    let n = cfg.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(n);
    let mut tau = Vec::with_capacity(n);
    for _ in 0..n {
        let d = rng.gen_range(0.0..cfg.d_max);
        let a = rng.gen_range(cfg.a_min..cfg.a_max);
        let b = rng.gen_range(cfg.b_min..cfg.b_max);
        let m1 = rng.gen_range(cfg.m1_min..cfg.m1_max);
        let m2 = rng.gen_range(cfg.m2_min..cfg.m2_max);
        tau.push(rng.gen_range(cfg.tau_min..cfg.tau_max));
        let (u1, u2) = ei_pair_inputs(a, b, b, d, m1, m2);
        pairs.push(EIPairParams { a, b, c: b, d, m1, m2, u1, u2 });
    }
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                g[(i, j)] = rng.gen_range(0.0..1.0);
            }
        }
    }
    let mut ae = DMatrix::zeros(n, n);
    for i in 0..n {
        let row_sum: f64 = g.row(i).sum();
        if row_sum <= 0.0 {
            continue;
        }
        let gap = excitatory_bound(&pairs[i]) - pairs[i].u1;
        for j in 0..n {
            ae[(i, j)] = eta * gap * g[(i, j)] / (row_sum * pairs[j].m1);
        }
    }
    Ok(EIPairNetwork { pairs, ae, ai: DMatrix::zeros(n, n), tau })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaRecord {
    pub eta: f64,
    pub index: usize,
    pub seed: u64,
    /// The exact E-to-E coupling condition for lacking stable equilibria.
    pub lose: Option<bool>,
    pub indices: Option<IndexTriple>,
    pub error: Option<String>,
    pub runtime_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaSummary {
    pub eta: f64,
    pub count: usize,
    pub n_failed: usize,
    pub n_lose: usize,
    pub quantiles: Option<Quantiles>,
    /// Share with `log chi_osc > theta`, when a threshold is configured.
    pub above_theta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaStudyResult {
    pub config: EtaStudyConfig,
    pub records: Vec<EtaRecord>,
    pub summaries: Vec<EtaSummary>,
}

impl EtaStudyResult {
    pub fn samples(&self, eta: f64) -> Vec<f64> {
        self.records.iter().filter(|r| r.eta == eta).filter_map(|r| r.indices.map(|i| i.log_chi_osc)).collect()
    }

    pub fn summary(&self, eta: f64) -> Option<&EtaSummary> {
        self.summaries.iter().find(|s| s.eta == eta)
    }
}

fn run_one(cfg: &EtaStudyConfig, eta: f64, index: usize) -> EtaRecord {
    let start = Instant::now();
    // Network `index` shares its pair parameters, coupling pattern and initial
    // state across all eta values.
    let seed = network_seed(cfg.seed, index as u64);
    let mut rec = EtaRecord { eta, index, seed, lose: None, indices: None, error: None, runtime_ms: 0 };
    let outcome = (|| -> Result<()> {
        let pn = sample_ei_pair_network(cfg, eta, seed)?;
        rec.lose = Some(e2e_coupled_lose(&pn)?.satisfied);
        let net = flatten_ei_pair_network(&pn)?;
        let x0 = random_initial_state(net.m.as_slice(), network_seed(seed, 1));
        rec.indices = Some(IndexTriple::from(&cfg.sim().oscillation(&net, &x0)?));
        Ok(())
    })();
    if let Err(e) = outcome {
        rec.error = Some(e.to_string());
    }
    rec.runtime_ms = elapsed_ms(start, cfg.record_timing);
    rec
}

pub fn run_eta_study(cfg: &EtaStudyConfig) -> Result<EtaStudyResult> {
    cfg.check()?;
    let per = cfg.n_networks;
    let records = par_map(cfg.eta_list.len() * per, |k| {
        let r = run_one(cfg, cfg.eta_list[k / per], k % per);
        if (k + 1) % 100 == 0 {
            log::info!("eta study: run {} of {}", k + 1, cfg.eta_list.len() * per);
        }
        r
    });
    let summaries = cfg
        .eta_list
        .iter()
        .map(|&eta| {
            let rows: Vec<&EtaRecord> = records.iter().filter(|r| r.eta == eta).collect();
            let s: Vec<f64> = rows.iter().filter_map(|r| r.indices.map(|i| i.log_chi_osc)).collect();
            EtaSummary {
                eta,
                count: rows.len(),
                n_failed: rows.iter().filter(|r| r.error.is_some()).count(),
                n_lose: rows.iter().filter(|r| r.lose == Some(true)).count(),
                above_theta: cfg
                    .theta
                    .filter(|_| !s.is_empty())
                    .map(|t| s.iter().filter(|&&x| x > t).count() as f64 / s.len() as f64),
                quantiles: quantiles(&s),
            }
        })
        .collect();
    Ok(EtaStudyResult { config: cfg.clone(), records, summaries })
}
