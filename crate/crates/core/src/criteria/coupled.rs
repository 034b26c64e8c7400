//! Networks of E-I pairs coupled through their excitatory nodes.

use super::{ei_pair_limit_cycle_with, ConditionVerdict, CriteriaConfig, Ledger, Witness};
use crate::error::{Error, Result};
use crate::model::{EIPairNetwork, EIPairParams};

/// Largest excitatory drive `u_1` that keeps the isolated pair free of stable equilibria.
pub fn excitatory_bound(p: &EIPairParams) -> f64 {
    p.b * p.m2.min((p.u2 + p.c * p.m1) / (p.d + 1.0)) - (p.a - 1.0) * p.m1
}

fn require_oscillating_pairs(pn: &EIPairNetwork, cfg: &CriteriaConfig) -> Result<()> {
    pn.check()?;
    for (i, p) in pn.pairs.iter().enumerate() {
        if !ei_pair_limit_cycle_with(p, cfg)?.satisfied {
            return Err(Error::Precondition(format!("pair {} does not oscillate in isolation", i + 1)));
        }
    }
    Ok(())
}

/// Exact condition for E-to-E coupling: some pair keeps its excitatory
/// drive below the bound even with all its neighbours saturated.
pub fn e2e_coupled_lose(pn: &EIPairNetwork) -> Result<ConditionVerdict> {
    e2e_coupled_lose_with(pn, &CriteriaConfig::default())
}

pub fn e2e_coupled_lose_with(pn: &EIPairNetwork, cfg: &CriteriaConfig) -> Result<ConditionVerdict> {
    require_oscillating_pairs(pn, cfg)?;
    if !pn.is_e_to_e_only() {
        return Err(Error::Precondition("E-to-I coupling present; use the E-to-all condition".into()));
    }
    let n = pn.len();
    let mut l = Ledger::new(cfg);
    let mut witness = None;
    let mut best = f64::NEG_INFINITY;
    for i in 0..n {
        let p = &pn.pairs[i];
        let drive: f64 = (0..n).map(|j| pn.ae[(i, j)] * pn.pairs[j].m1).sum();
        let rhs = excitatory_bound(p) - p.u1;
        best = best.max(rhs - drive);
        if l.strict(format!("17_{}", i + 1), drive, rhs) && witness.is_none() {
            witness = Some(Witness::Index { i0: i });
        }
    }
    let marginal = l.is_marginal(best);
    Ok(l.finish(witness.is_some(), marginal, witness))
}

/// Sufficient condition for E-to-E plus E-to-I coupling.
pub fn e2all_coupled_lose(pn: &EIPairNetwork) -> Result<ConditionVerdict> {
    e2all_coupled_lose_with(pn, &CriteriaConfig::default())
}

pub fn e2all_coupled_lose_with(pn: &EIPairNetwork, cfg: &CriteriaConfig) -> Result<ConditionVerdict> {
    require_oscillating_pairs(pn, cfg)?;
    let n = pn.len();
    let mut l = Ledger::new(cfg);
    let mut witness = None;
    let mut best = f64::NEG_INFINITY;
    for i in 0..n {
        let EIPairParams { a, b, c, d, m1, m2, u1, u2 } = pn.pairs[i];
        let d1 = d + 1.0;
        let mut sa = 0.0;
        let mut sb = 0.0;
        let mut sc = 0.0;
        for j in 0..n {
            let mj = pn.pairs[j].m1;
            let (ae, ai) = (pn.ae[(i, j)], pn.ai[(i, j)]);
            sa += ae * mj;
            sb += (d1 * ae - b * ai).max(0.0) * mj;
            sc += (b * ai - d1 * ae).max(0.0) * mj;
        }
        let ra = b * m2 - (a - 1.0) * m1 - u1;
        let rb = (b * c - (a - 1.0) * d1) * m1 - d1 * u1 + b * u2;
        let rc = d1 * u1 - b * u2;
        let ok_a = l.strict(format!("19a_{}", i + 1), sa, ra);
        let ok_b = l.strict(format!("19b_{}", i + 1), sb, rb);
        let ok_c = l.strict(format!("19c_{}", i + 1), sc, rc);
        best = best.max((ra - sa).min(rb - sb).min(rc - sc));
        if ok_a && ok_b && ok_c && witness.is_none() {
            witness = Some(Witness::Index { i0: i });
        }
    }
    let marginal = l.is_marginal(best);
    Ok(l.finish(witness.is_some(), marginal, witness))
}
