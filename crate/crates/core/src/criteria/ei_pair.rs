use super::{ConditionVerdict, CriteriaConfig, Ledger};
use crate::error::Result;
use crate::model::EIPairParams;

/// The five inequalities under which an isolated E-I pair has a limit cycle
/// and no stable equilibrium.
pub fn ei_pair_limit_cycle(p: &EIPairParams) -> Result<ConditionVerdict> {
    ei_pair_limit_cycle_with(p, &CriteriaConfig::default())
}

pub fn ei_pair_limit_cycle_with(p: &EIPairParams, cfg: &CriteriaConfig) -> Result<ConditionVerdict> {
    p.check()?;
    let EIPairParams { a, b, c, d, m1, m2, u1, u2 } = *p;
    let mut l = Ledger::new(cfg);
    let ok = [
        l.strict("5a", d + 2.0, a),
        l.strict("5b", (a - 1.0) * (d + 1.0), b * c),
        l.strict("5c", (a - 1.0) * m1, b * m2),
        l.strict_between("5d", 0.0, u1, b * m2 - (a - 1.0) * m1),
        l.strict_between("5e", 0.0, (d + 1.0) * u1 - b * u2, (b * c - (a - 1.0) * (d + 1.0)) * m1),
    ];
    let marginal = l.slacks.values().any(|s| l.is_marginal(*s));
    Ok(l.finish(ok.iter().all(|x| *x), marginal, None))
}
