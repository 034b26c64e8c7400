//! Closed-form structural conditions for the absence of stable equilibria.
//!
//! Every checker returns a [`ConditionVerdict`]: the overall decision, one
//! boolean per inequality, and the signed slack of each inequality
//! (positive when it holds strictly). Condition labels refer to nodes and
//! pairs with 1-based indices; witness fields are 0-based.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

mod coupled;
mod ei_pair;
mod inhibitory;
mod single_inh;

pub use coupled::{
    e2all_coupled_lose, e2all_coupled_lose_with, e2e_coupled_lose, e2e_coupled_lose_with, excitatory_bound,
};
pub use ei_pair::{ei_pair_limit_cycle, ei_pair_limit_cycle_with};
pub use inhibitory::{
    build_f_graph, construct_oscillating_input, find_valid_cycle, find_valid_cycle_with_cap,
    inhibitory_p_matrix_necessary, inhibitory_summary, node_oscillation_participation, pairwise_unstable,
    pairwise_unstable_with, t_set_membership, t_set_membership_with, FGraph, InhibitoryOutcome, ValidCycle,
};
pub use single_inh::{
    single_inhibitory_in_y, single_inhibitory_in_y_with, single_inhibitory_sufficient,
    single_inhibitory_sufficient_with, y_thresholds, OrthantThresholds,
};

use crate::model::Network;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriteriaConfig {
    /// A strict inequality holds iff its slack exceeds `tol`; a non-strict one iff slack >= -tol.
    pub tol: f64,
    /// Verdicts with a deciding slack inside `(-marginal_band, marginal_band)` are annotated marginal.
    pub marginal_band: f64,
}

impl Default for CriteriaConfig {
    fn default() -> Self {
        CriteriaConfig { tol: 1e-9, marginal_band: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    Index { i0: usize },
    Pattern { sigma: String },
    Cycle(ValidCycle),
    Input { u: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionVerdict {
    pub satisfied: bool,
    pub per_condition: BTreeMap<String, bool>,
    pub slacks: BTreeMap<String, f64>,
    pub marginal: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

impl ConditionVerdict {
    /// Smallest |slack| over all recorded inequalities.
    pub fn min_abs_slack(&self) -> f64 {
        self.slacks.values().map(|s| s.abs()).fold(f64::INFINITY, f64::min)
    }

    pub fn holds(&self, label: &str) -> bool {
        self.per_condition.get(label).copied().unwrap_or(false)
    }
}

/// Accumulates labelled inequalities.
#[derive(Debug, Clone)]
pub(crate) struct Ledger {
    cfg: CriteriaConfig,
    pub per_condition: BTreeMap<String, bool>,
    pub slacks: BTreeMap<String, f64>,
}

impl Ledger {
    pub fn new(cfg: &CriteriaConfig) -> Self {
        Ledger { cfg: *cfg, per_condition: BTreeMap::new(), slacks: BTreeMap::new() }
    }

    /// Records `lhs < rhs`.
    pub fn strict(&mut self, label: impl Into<String>, lhs: f64, rhs: f64) -> bool {
        self.record(label.into(), rhs - lhs, true)
    }

    /// Records `lhs <= rhs`.
    pub fn weak(&mut self, label: impl Into<String>, lhs: f64, rhs: f64) -> bool {
        self.record(label.into(), rhs - lhs, false)
    }

    /// Records `lo < x < hi` under one label; the slack is the nearer side.
    pub fn strict_between(&mut self, label: impl Into<String>, lo: f64, x: f64, hi: f64) -> bool {
        self.record(label.into(), (x - lo).min(hi - x), true)
    }

    pub fn weak_between(&mut self, label: impl Into<String>, lo: f64, x: f64, hi: f64) -> bool {
        self.record(label.into(), (x - lo).min(hi - x), false)
    }

    pub fn flag(&mut self, label: impl Into<String>, value: bool) -> bool {
        self.per_condition.insert(label.into(), value);
        value
    }

    pub fn slack_holds(&self, slack: f64, strict: bool) -> bool {
        if strict {
            slack > self.cfg.tol
        } else {
            slack >= -self.cfg.tol
        }
    }

    fn record(&mut self, label: String, slack: f64, strict: bool) -> bool {
        let ok = self.slack_holds(slack, strict);
        self.per_condition.insert(label.clone(), ok);
        self.slacks.insert(label, slack);
        ok
    }

    pub fn is_marginal(&self, slack: f64) -> bool {
        slack.abs() < self.cfg.marginal_band
    }

    pub fn finish(self, satisfied: bool, marginal: bool, witness: Option<Witness>) -> ConditionVerdict {
        ConditionVerdict { satisfied, per_condition: self.per_condition, slacks: self.slacks, marginal, witness }
    }
}

/// Nonnegative weights certify a stable equilibrium: `satisfied` here means
/// every entry of `W` is nonnegative, in which case the network is known not
/// to lack stable equilibria.
pub fn fully_excitatory(net: &Network) -> ConditionVerdict {
    let mut ledger = Ledger::new(&CriteriaConfig::default());
    let min = net.w.iter().copied().fold(f64::INFINITY, f64::min);
    let ok = net.w.is_empty() || min >= 0.0;
    ledger.flag("nonnegative", ok);
    ledger.finish(ok, false, None)
}
