//! Convex sweeps between an oscillating network without stable equilibria
//! and a quiet network with one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{median, par_map, GlobalStudyResult, IndexTriple, SimConfig, DEFAULT_FREEZE_TOL};
use crate::error::{Error, Result};
use crate::metrics::DEFAULT_EPSILON;
use crate::model::Network;
use crate::regions::{self, RegionConfig};
use crate::simulate::{DEFAULT_DT, DEFAULT_T_END, DEFAULT_WINDOW};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPair {
    /// Network at `alpha = 0`.
    pub osc: Network,
    pub x0_osc: Vec<f64>,
    /// Network at `alpha = 1`.
    pub stable: Network,
    pub x0_stable: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub osc_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stable_index: Option<usize>,
}

impl SweepPair {
    /// Convex combination of `W`, `u`, `m` and the initial state.
    pub fn at(&self, alpha: f64) -> Result<(Network, Vec<f64>)> {
        if self.osc.len() != self.stable.len() {
            return Err(Error::Dimension(format!(
                "sweep end points have {} and {} nodes",
                self.osc.len(),
                self.stable.len()
            )));
        }
        let mix = |a: f64, b: f64| (1.0 - alpha) * a + alpha * b;
        let net = Network {
            w: self.osc.w.zip_map(&self.stable.w, mix),
            u: self.osc.u.zip_map(&self.stable.u, mix),
            m: self.osc.m.zip_map(&self.stable.m, mix),
            tau: self.osc.tau.zip_map(&self.stable.tau, mix),
        };
        let x0 = self.x0_osc.iter().zip(&self.x0_stable).map(|(&a, &b)| mix(a, b)).collect::<Vec<_>>();
        let x0 = x0.iter().zip(net.m.iter()).map(|(&x, &m)| x.clamp(0.0, m)).collect();
        Ok((net, x0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Number of grid points on `[0, 1]`.
    pub steps: usize,
    pub theta: f64,
    pub t_end: f64,
    pub dt: f64,
    /// Fraction of the trajectory kept as the steady window.
    pub window: f64,
    pub epsilon: f64,
    /// Convergence tolerance relative to `m`; `0` integrates every step.
    pub freeze_tol: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            steps: 101,
            theta: 0.0,
            t_end: DEFAULT_T_END,
            dt: DEFAULT_DT,
            window: DEFAULT_WINDOW,
            epsilon: DEFAULT_EPSILON,
            freeze_tol: DEFAULT_FREEZE_TOL,
        }
    }
}

impl SweepConfig {
    pub fn sim(&self) -> SimConfig {
        SimConfig {
            t_end: self.t_end,
            dt: self.dt,
            window: self.window,
            epsilon: self.epsilon,
            freeze_tol: self.freeze_tol,
        }
    }

    pub fn alpha_grid(&self) -> Vec<f64> {
        (0..self.steps).map(|k| k as f64 / (self.steps - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SwitchPoint {
    At { alpha: f64 },
    NoSwitch,
    MultiSwitch { count: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Crossing {
    At { alpha: f64 },
    Undetected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub alpha_grid: Vec<f64>,
    pub lose_curve: Vec<bool>,
    /// `log chi_osc` per grid point; empty when the indices were skipped.
    pub chi_curve: Vec<Option<f64>>,
    pub alpha_lose: SwitchPoint,
    pub alpha_chi: Crossing,
    pub error: Option<String>,
}

impl SweepRecord {
    /// Both transition points, when the pair is kept for comparison.
    pub fn transition(&self) -> Option<(f64, f64)> {
        match (self.alpha_lose, self.alpha_chi) {
            (SwitchPoint::At { alpha: l }, Crossing::At { alpha: c }) => Some((l, c)),
            _ => None,
        }
    }
}

/// First grid point past the single LoSE switch.
pub fn lose_switch(lose: &[bool], alpha: &[f64]) -> SwitchPoint {
    let count = lose.windows(2).filter(|w| w[0] != w[1]).count();
    match count {
        0 => SwitchPoint::NoSwitch,
        1 => {
            let k = lose.iter().position(|&l| l != lose[0]).unwrap();
            SwitchPoint::At { alpha: alpha[k] }
        }
        count => SwitchPoint::MultiSwitch { count },
    }
}

/// First `k` where the mean of `chi[k..k+3]` exceeds `theta` and the mean of
/// `chi[k+3..k+6]` falls below it; the crossing is reported at `alpha[k + 3]`.
pub fn alpha_chi_crossing(chi: &[Option<f64>], alpha: &[f64], theta: f64) -> Crossing {
    let mean3 = |s: &[Option<f64>]| -> Option<f64> { s.iter().copied().sum::<Option<f64>>().map(|t| t / 3.0) };
    for k in 0..chi.len().saturating_sub(5) {
        if let (Some(before), Some(after)) = (mean3(&chi[k..k + 3]), mean3(&chi[k + 3..k + 6])) {
            if before > theta && after < theta {
                return Crossing::At { alpha: alpha[k + 3] };
            }
        }
    }
    Crossing::Undetected
}

fn lose_curve(pair: &SweepPair, grid: &[f64], region: &RegionConfig) -> Result<Vec<bool>> {
    grid.iter().map(|&a| Ok(regions::lose_with(&pair.at(a)?.0, region)?.lose)).collect()
}

fn chi_curve(pair: &SweepPair, grid: &[f64], sim: &SimConfig) -> Vec<Option<f64>> {
    grid.iter()
        .map(|&a| {
            let (net, x0) = pair.at(a).ok()?;
            sim.oscillation(&net, &x0).ok().map(|m| IndexTriple::from(&m).log_chi_osc)
        })
        .collect()
}

fn sweep(pair: &SweepPair, cfg: &SweepConfig, always_simulate: bool) -> Result<SweepRecord> {
    cfg.sim().check()?;
    if cfg.steps < 2 {
        return Err(Error::InvalidArgument("a sweep needs at least two grid points".into()));
    }
    let grid = cfg.alpha_grid();
    let lose = lose_curve(pair, &grid, &RegionConfig::default())?;
    let alpha_lose = lose_switch(&lose, &grid);
    let simulate = always_simulate || matches!(alpha_lose, SwitchPoint::At { .. });
    let chi = if simulate { chi_curve(pair, &grid, &cfg.sim()) } else { Vec::new() };
    let alpha_chi = alpha_chi_crossing(&chi, &grid, cfg.theta);
    let failed = chi.iter().filter(|c| c.is_none()).count();
    let error = (failed > 0).then(|| format!("{failed} grid points failed to simulate"));
    Ok(SweepRecord { alpha_grid: grid, lose_curve: lose, chi_curve: chi, alpha_lose, alpha_chi, error })
}

/// LoSE verdict and `log chi_osc` at every grid point.
pub fn run_local_sweep(pair: &SweepPair, cfg: &SweepConfig) -> Result<SweepRecord> {
    sweep(pair, cfg, true)
}

/// Draws `count` pairs: the first member uniformly among LoSE networks with
/// `log chi_osc > theta`, the second among networks with a stable
/// equilibrium whose `log chi_osc` lies below the left trough of the fit.
pub fn select_sweep_pairs(global: &GlobalStudyResult, count: usize, seed: u64) -> Result<Vec<SweepPair>> {
    let fit =
        global.summary.fit.as_ref().ok_or_else(|| Error::Precondition("global study has no threshold fit".into()))?;
    let osc: Vec<_> = global
        .records
        .iter()
        .filter(|r| r.lose == Some(true) && r.log_chi_osc().is_some_and(|x| x > fit.theta))
        .collect();
    let quiet: Vec<_> = global
        .records
        .iter()
        .filter(|r| r.has_stable() && r.log_chi_osc().is_some_and(|x| x < fit.left_trough))
        .collect();
    if osc.is_empty() || quiet.is_empty() {
        return Err(Error::Precondition(format!(
            "no sweep candidates ({} oscillating, {} quiet)",
            osc.len(),
            quiet.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let a = osc[rng.gen_range(0..osc.len())];
            let b = quiet[rng.gen_range(0..quiet.len())];
            SweepPair {
                osc: a.network.clone(),
                x0_osc: a.x0.clone(),
                stable: b.network.clone(),
                x0_stable: b.x0.clone(),
                osc_index: Some(a.index),
                stable_index: Some(b.index),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub n_evaluated: usize,
    pub n_retained: usize,
    pub n_no_switch: usize,
    pub n_multi_switch: usize,
    /// Single LoSE switch but no index crossing.
    pub n_undetected: usize,
    pub n_failed: usize,
    pub median_abs_diff: Option<f64>,
    /// Retained pairs with `|alpha_chi - alpha_lose| > 0.05`.
    pub n_off_diagonal: usize,
    /// Off-diagonal pairs with `alpha_chi > alpha_lose`.
    pub n_off_above: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepStudyResult {
    pub config: SweepConfig,
    pub records: Vec<SweepRecord>,
    pub summary: SweepSummary,
}

pub const OFF_DIAGONAL: f64 = 0.05;

/// Sweeps `pairs` in order. With `target`, stops after the pair that brings
/// the number of retained pairs (single LoSE switch and a detected index
/// crossing) to `target`; the result does not depend on the thread count.
pub fn run_sweep_study(pairs: &[SweepPair], cfg: &SweepConfig, target: Option<usize>) -> Result<SweepStudyResult> {
    cfg.sim().check()?;
    let chunk = (rayon::current_num_threads() * 2).max(4);
    let mut records: Vec<Option<SweepRecord>> = Vec::new();
    let mut retained = 0;
    let mut next = 0;
    'outer: while next < pairs.len() {
        let end = (next + chunk).min(pairs.len());
        let batch = par_map(end - next, |k| sweep(&pairs[next + k], cfg, false).ok());
        for r in batch {
            retained += r.as_ref().is_some_and(|r| r.transition().is_some()) as usize;
            records.push(r);
            if target.is_some_and(|t| retained >= t) {
                break 'outer;
            }
        }
        log::info!("sweep study: {} pairs evaluated, {} retained", records.len(), retained);
        next = end;
    }
    let n_failed = records.iter().filter(|r| r.is_none()).count();
    let records: Vec<SweepRecord> = records.into_iter().flatten().collect();
    let diffs: Vec<f64> = records.iter().filter_map(SweepRecord::transition).map(|(l, c)| c - l).collect();
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let off: Vec<f64> = diffs.iter().copied().filter(|d| d.abs() > OFF_DIAGONAL).collect();
    let summary = SweepSummary {
        n_evaluated: records.len() + n_failed,
        n_retained: diffs.len(),
        n_no_switch: records.iter().filter(|r| r.alpha_lose == SwitchPoint::NoSwitch).count(),
        n_multi_switch: records.iter().filter(|r| matches!(r.alpha_lose, SwitchPoint::MultiSwitch { .. })).count(),
        n_undetected: records
            .iter()
            .filter(|r| matches!(r.alpha_lose, SwitchPoint::At { .. }) && r.alpha_chi == Crossing::Undetected)
            .count(),
        n_failed,
        median_abs_diff: median(&abs),
        n_off_diagonal: off.len(),
        n_off_above: off.iter().filter(|d| **d > 0.0).count(),
    };
    Ok(SweepStudyResult { config: cfg.clone(), records, summary })
}
