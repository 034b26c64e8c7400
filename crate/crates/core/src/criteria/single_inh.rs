//! Networks of `n` excitatory nodes sharing one inhibitory node.
//!
//! When every `a_ii > d + 2`, a region is stable iff no excitatory node is
//! linear, so only the `2^n` excitatory patterns `s' in {0, s}^n` (times the
//! three states of the inhibitory node) can host a stable equilibrium. The
//! input `u` admits one iff it lies in the union of `2^n` orthant-shaped
//! sets, one per `s'`.

use serde::{Deserialize, Serialize};

use super::{ConditionVerdict, CriteriaConfig, Ledger, Witness};
use crate::error::{Error, Result};
use crate::model::SingleInhibitoryNetwork;

/// Thresholds `y0`, `ys`, `yl` of one excitatory pattern. Bit `i` of
/// `saturated` marks excitatory node `i` as saturated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthantThresholds {
    pub saturated: u64,
    pub y0: Vec<f64>,
    pub ys: Vec<f64>,
    pub yl: Vec<f64>,
}

impl OrthantThresholds {
    pub fn is_saturated(&self, i: usize) -> bool {
        self.saturated >> i & 1 == 1
    }

    /// The orthant bound on `u_i`: a lower bound for saturated nodes, an
    /// upper bound otherwise.
    pub fn bound(&self, i: usize) -> f64 {
        let (y0, ys, yl) = (self.y0[i], self.ys[i], self.yl[i]);
        if self.is_saturated(i) {
            ys.min(y0.max(yl))
        } else {
            y0.max(ys.min(yl))
        }
    }

    /// Signed depth of `u_e` inside the orthant: `>= 0` iff inside.
    pub fn depth(&self, u_e: &[f64]) -> f64 {
        (0..u_e.len())
            .map(|i| if self.is_saturated(i) { u_e[i] - self.bound(i) } else { self.bound(i) - u_e[i] })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn pattern(&self) -> String {
        (0..self.y0.len()).map(|i| if self.is_saturated(i) { 's' } else { '0' }).collect()
    }
}

fn check_hypothesis(net: &SingleInhibitoryNetwork) -> Result<()> {
    net.check()?;
    for i in 0..net.n_excitatory() {
        if !(net.a[(i, i)] > net.d + 2.0) {
            return Err(Error::Hypothesis(format!(
                "a_{0}{0} = {1} must exceed d + 2 = {2}",
                i + 1,
                net.a[(i, i)],
                net.d + 2.0
            )));
        }
    }
    Ok(())
}

pub fn y_thresholds(net: &SingleInhibitoryNetwork, saturated: u64) -> OrthantThresholds {
    let n = net.n_excitatory();
    let sat = |j: usize| saturated >> j & 1 == 1;
    let cm: f64 = (0..n).filter(|&j| sat(j)).map(|j| net.c[j] * net.m_e[j]).sum();
    let y0: Vec<f64> = (0..n)
        .map(|i| {
            -(0..n)
                .filter(|&j| sat(j))
                .map(|j| (net.a[(i, j)] - if i == j { 1.0 } else { 0.0 }) * net.m_e[j])
                .sum::<f64>()
        })
        .collect();
    let ys = (0..n).map(|i| y0[i] + net.b[i] * net.m_inh).collect();
    let yl = (0..n).map(|i| y0[i] + net.b[i] * (net.u_inh + cm) / (net.d + 1.0)).collect();
    OrthantThresholds { saturated, y0, ys, yl }
}

/// Exact test: `satisfied` iff `u` lies outside every orthant, i.e. the
/// network has no stable equilibrium. The witness names the first orthant
/// containing `u`.
pub fn single_inhibitory_in_y(net: &SingleInhibitoryNetwork) -> Result<ConditionVerdict> {
    single_inhibitory_in_y_with(net, &CriteriaConfig::default())
}

pub fn single_inhibitory_in_y_with(net: &SingleInhibitoryNetwork, cfg: &CriteriaConfig) -> Result<ConditionVerdict> {
    check_hypothesis(net)?;
    let n = net.n_excitatory();
    if n > 20 {
        return Err(Error::SizeCap { what: "orthant enumeration", n, cap: 20 });
    }
    let mut l = Ledger::new(cfg);
    let mut witness = None;
    let mut best = f64::NEG_INFINITY;
    for sat in 0u64..1 << n {
        let t = y_thresholds(net, sat);
        let depth = t.depth(&net.u_e);
        best = best.max(depth);
        let label = format!("orthant_{}", t.pattern());
        // Membership in a closed orthant; record the slack of "u outside".
        let inside = l.weak(label, 0.0, depth);
        if inside && witness.is_none() {
            witness = Some(Witness::Pattern { sigma: t.pattern() });
        }
    }
    let in_y = witness.is_some();
    let marginal = l.is_marginal(best);
    Ok(l.finish(!in_y, marginal, witness))
}

/// The simpler necessary condition and the two sufficient blocks.
///
/// `per_condition` holds `nec`, `suf1` and `suf2` plus their components;
/// the components of a block with an existential index are reported at
/// the witness index when one exists, else at the index that satisfies
/// the most components.
pub fn single_inhibitory_sufficient(net: &SingleInhibitoryNetwork) -> Result<ConditionVerdict> {
    single_inhibitory_sufficient_with(net, &CriteriaConfig::default())
}

pub fn single_inhibitory_sufficient_with(
    net: &SingleInhibitoryNetwork,
    cfg: &CriteriaConfig,
) -> Result<ConditionVerdict> {
    check_hypothesis(net)?;
    let n = net.n_excitatory();
    let d1 = net.d + 1.0;
    let (a, b, c, u, m) = (&net.a, &net.b, &net.c, &net.u_e, &net.m_e);
    let un = net.u_inh;
    let mn = net.m_inh;
    let cme: f64 = (0..n).map(|j| c[j] * m[j]).sum();
    let min_cm = (0..n).map(|j| c[j] * m[j]).fold(f64::INFINITY, f64::min);
    let arow = |i: usize, j: usize| a[(i, j)] - if i == j { 1.0 } else { 0.0 };

    let mut l = Ledger::new(cfg);
    let nec = l.strict_between("11", -cme, un, d1 * mn);
    l.flag("nec", nec);

    // Block 1.
    let s12a = l.weak_between("12a", 0.0, un, d1 * mn - cme);
    let block1 = |i0: usize, l: &mut Ledger, record: bool| -> [bool; 3] {
        let b_ = l.slack_holds(b[i0] * c[i0] - arow(i0, i0) * d1, true);
        let lo = b[i0] * un / d1;
        let hi = b[i0] * (un + c[i0] * m[i0]) / d1 - arow(i0, i0) * m[i0];
        let c_ = l.slack_holds((u[i0] - lo).min(hi - u[i0]), true);
        let d_slack = (0..n)
            .filter(|&i| i != i0)
            .map(|i| {
                let pos: f64 = (0..n).map(|j| (arow(i, j) * d1 - b[i] * c[j]).max(0.0) * m[j]).sum();
                (b[i] * un - pos) / d1 - u[i]
            })
            .fold(f64::INFINITY, f64::min);
        let d_ = l.slack_holds(d_slack, true);
        if record {
            l.strict("12b", arow(i0, i0) * d1, b[i0] * c[i0]);
            l.strict_between("12c", lo, u[i0], hi);
            if d_slack.is_finite() {
                l.strict("12d", 0.0, d_slack);
            } else {
                l.flag("12d", true);
            }
        }
        [b_, c_, d_]
    };
    let i1 = pick_index(n, |i| block1(i, &mut l.clone(), false));
    let parts1 = block1(i1, &mut l, true);
    let suf1 = s12a && parts1.iter().all(|x| *x);
    l.flag("suf1", suf1);

    // Block 2. The printed lower bound `0 < u_i0` leaves the pattern with
    // every excitatory node off and the inhibitory node linear unexcluded;
    // `13c_floor` adds the bound that rules it out.
    let s13a = l.weak_between("13a", d1 * mn - min_cm, un, d1 * mn);
    let block2 = |i0: usize, l: &mut Ledger, record: bool| -> [bool; 4] {
        let hi = b[i0] * mn - arow(i0, i0) * m[i0];
        let floor = b[i0] * un / d1;
        let b_ = l.slack_holds(hi, true);
        let c_ = l.slack_holds(u[i0].min(hi - u[i0]), true);
        let f_ = l.slack_holds(u[i0] - floor, true);
        let d_slack = (0..n)
            .filter(|&i| i != i0)
            .map(|i| b[i] * mn - (0..n).map(|j| arow(i, j) * m[j]).sum::<f64>() - u[i])
            .fold(f64::INFINITY, f64::min);
        let d_ = l.slack_holds(d_slack, true);
        if record {
            l.strict("13b", arow(i0, i0) * m[i0], b[i0] * mn);
            l.strict_between("13c", 0.0, u[i0], hi);
            l.strict("13c_floor", floor, u[i0]);
            if d_slack.is_finite() {
                l.strict("13d", 0.0, d_slack);
            } else {
                l.flag("13d", true);
            }
        }
        [b_, c_, f_, d_]
    };
    let i2 = pick_index(n, |i| block2(i, &mut l.clone(), false));
    let parts2 = block2(i2, &mut l, true);
    let suf2 = s13a && parts2.iter().all(|x| *x);
    l.flag("suf2", suf2);

    let witness = if suf1 {
        Some(Witness::Index { i0: i1 })
    } else if suf2 {
        Some(Witness::Index { i0: i2 })
    } else {
        None
    };
    let marginal = l.slacks.values().any(|s| l.is_marginal(*s));
    Ok(l.finish(suf1 || suf2, marginal, witness))
}

/// First index satisfying all parts, else the first with the most parts.
fn pick_index<const K: usize>(n: usize, mut parts: impl FnMut(usize) -> [bool; K]) -> usize {
    let mut best = (0, 0);
    for i in 0..n {
        let k = parts(i).iter().filter(|x| **x).count();
        if k == K {
            return i;
        }
        if k > best.1 {
            best = (i, k);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    pub(crate) fn four_orthant_network(u1: f64, u2: f64) -> SingleInhibitoryNetwork {
        SingleInhibitoryNetwork {
            a: DMatrix::from_row_slice(2, 2, &[8.5, 1.0, 1.0, 5.0]),
            b: vec![5.0, 7.0],
            c: vec![4.0, 5.0],
            d: 1.0,
            u_e: vec![u1, u2],
            u_inh: -5.0,
            m_e: vec![2.0, 3.0],
            m_inh: 6.0,
        }
    }

    #[test]
    fn four_orthant_bounds() {
        let net = four_orthant_network(0.0, 0.0);
        let bounds: Vec<(String, [f64; 2])> = (0..4)
            .map(|s| {
                let t = y_thresholds(&net, s);
                (t.pattern(), [t.bound(0), t.bound(1)])
            })
            .collect();
        assert_eq!(bounds[0], ("00".into(), [0.0, 0.0]));
        assert_eq!(bounds[1], ("s0".into(), [-7.5, 8.5]));
        assert_eq!(bounds[2], ("0s".into(), [22.0, 23.0]));
        assert_eq!(bounds[3], ("ss".into(), [12.0, 28.0]));
    }

    #[test]
    fn deep_upper_right_is_in_y() {
        let v = single_inhibitory_in_y(&four_orthant_network(40.0, 40.0)).unwrap();
        assert!(!v.satisfied);
        assert_eq!(v.witness, Some(Witness::Pattern { sigma: "ss".into() }));
    }

    #[test]
    fn gap_between_orthants_lacks_equilibria() {
        // u2 in (8.5, 23) with u1 in (0, 12) avoids all four orthants.
        let v = single_inhibitory_in_y(&four_orthant_network(5.0, 15.0)).unwrap();
        assert!(v.satisfied, "{v:?}");
        assert!(v.witness.is_none());
    }

    #[test]
    fn strong_inhibitory_drive_is_in_y() {
        let mut net = four_orthant_network(5.0, 15.0);
        net.u_inh = (net.d + 1.0) * net.m_inh;
        assert!(!single_inhibitory_in_y(&net).unwrap().satisfied);
        assert!(!single_inhibitory_sufficient(&net).unwrap().holds("nec"));
    }

    #[test]
    fn hypothesis_is_enforced() {
        let mut net = four_orthant_network(0.0, 0.0);
        net.a[(1, 1)] = 3.0;
        assert!(matches!(single_inhibitory_in_y(&net), Err(Error::Hypothesis(_))));
        assert!(matches!(single_inhibitory_sufficient(&net), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn silent_excitatory_pattern_blocks_second_sufficient_set() {
        // Meets every printed part of the second block, yet all excitatory
        // nodes off with the inhibitory node linear is a stable equilibrium.
        let net = SingleInhibitoryNetwork {
            a: DMatrix::from_row_slice(
                2,
                2,
                &[6.4066326618984935, 1.5045867075061032, 0.9888778862912275, 6.524168139870001],
            ),
            b: vec![3.741108096047924, 3.5647328001818623],
            c: vec![4.040598517451263, 4.976059246918202],
            d: 0.24689074965721103,
            u_e: vec![16.3019438638009, -7.1249010672962125],
            u_inh: 6.007631026732266,
            m_e: vec![1.354025357351204, 2.733674709013534],
            m_inh: 7.442675445892385,
        };
        let v = single_inhibitory_sufficient(&net).unwrap();
        for k in ["13a", "13b", "13c", "13d"] {
            assert!(v.holds(k), "{k}");
        }
        assert!(!v.holds("13c_floor"));
        assert!(!v.holds("suf2"));
        assert!(!single_inhibitory_in_y(&net).unwrap().satisfied);
    }

    #[test]
    fn labels_are_complete() {
        let v = single_inhibitory_sufficient(&four_orthant_network(5.0, 15.0)).unwrap();
        for k in ["11", "nec", "12a", "12b", "12c", "12d", "suf1", "13a", "13b", "13c", "13c_floor", "13d", "suf2"] {
            assert!(v.per_condition.contains_key(k), "missing {k}");
        }
    }
}
