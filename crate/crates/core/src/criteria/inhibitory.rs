//! Fully inhibitory networks, `W = -D` with `D >= 0`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{ConditionVerdict, CriteriaConfig, Ledger, Witness};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::Network;
use crate::regions;

fn require_inhibitory(w: &DMatrix<f64>) -> Result<()> {
    if !w.is_square() {
        return Err(Error::Dimension("weight matrix is not square".into()));
    }
    if let Some(((i, j), v)) =
        w.iter().enumerate().map(|(k, v)| ((k % w.nrows(), k / w.nrows()), v)).find(|(_, v)| !(**v <= 0.0))
    {
        return Err(Error::Precondition(format!("W[{},{}] = {v} is not inhibitory", i + 1, j + 1)));
    }
    Ok(())
}

/// `satisfied` iff `I - W` is not a P-matrix. When it is one, every input
/// yields a stable equilibrium.
pub fn inhibitory_p_matrix_necessary(w: &DMatrix<f64>) -> Result<ConditionVerdict> {
    require_inhibitory(w)?;
    let n = w.nrows();
    let in_p = linalg::is_p_matrix(&(DMatrix::identity(n, n) - w))?;
    let mut l = Ledger::new(&CriteriaConfig::default());
    l.flag("I-W in P", in_p);
    Ok(l.finish(!in_p, false, None))
}

/// Every order-two principal minor of `-I + W` is negative.
pub fn pairwise_unstable(w: &DMatrix<f64>) -> Result<ConditionVerdict> {
    pairwise_unstable_with(w, &CriteriaConfig::default())
}

pub fn pairwise_unstable_with(w: &DMatrix<f64>, cfg: &CriteriaConfig) -> Result<ConditionVerdict> {
    require_inhibitory(w)?;
    let n = w.nrows();
    let d = -w;
    let mut l = Ledger::new(cfg);
    let mut all = true;
    for i in 0..n {
        for j in i + 1..n {
            all &= l.strict(
                format!("pair_{}_{}", i + 1, j + 1),
                (1.0 + d[(i, i)]) * (1.0 + d[(j, j)]),
                d[(i, j)] * d[(j, i)],
            );
        }
    }
    let marginal = l.slacks.values().any(|s| l.is_marginal(*s));
    Ok(l.finish(all, marginal, None))
}

/// Membership of `u` in the T-sets. Requires a pairwise unstable `W` and
/// `u` in the box `C = prod [0, (d_ii + 1) m_i)`.
pub fn t_set_membership(w: &DMatrix<f64>, u: &[f64], m: &[f64]) -> Result<ConditionVerdict> {
    t_set_membership_with(w, u, m, &CriteriaConfig::default())
}

pub fn t_set_membership_with(w: &DMatrix<f64>, u: &[f64], m: &[f64], cfg: &CriteriaConfig) -> Result<ConditionVerdict> {
    let n = w.nrows();
    if u.len() != n || m.len() != n {
        return Err(Error::Dimension("u and m must match W".into()));
    }
    if !pairwise_unstable_with(w, cfg)?.satisfied {
        return Err(Error::Precondition("network is not pairwise unstable".into()));
    }
    let d = -w;
    for i in 0..n {
        let hi = (d[(i, i)] + 1.0) * m[i];
        if !(u[i] >= 0.0 && u[i] < hi) {
            return Err(Error::Precondition(format!("u_{} = {} lies outside [0, {hi})", i + 1, u[i])));
        }
    }
    let mut l = Ledger::new(cfg);
    let mut all = l.strict("T0", 0.0, u.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    for i in 0..n {
        let slack = (0..n)
            .filter(|&j| j != i)
            .map(|j| u[j] - d[(j, i)] / (d[(i, i)] + 1.0) * u[i])
            .fold(f64::NEG_INFINITY, f64::max);
        all &= l.strict(format!("T{}", i + 1), 0.0, slack);
    }
    let marginal = l.slacks.values().any(|s| l.is_marginal(*s));
    Ok(l.finish(all, marginal, None))
}

/// `F_ij = (d_ii + 1) / d_ji`; `None` when `d_ji = 0` or `i = j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FGraph {
    pub weights: Vec<Vec<Option<f64>>>,
}

impl FGraph {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        self.weights[i][j]
    }

    pub fn from_weights(weights: Vec<Vec<Option<f64>>>) -> Self {
        FGraph { weights }
    }
}

pub fn build_f_graph(w: &DMatrix<f64>) -> Result<FGraph> {
    require_inhibitory(w)?;
    let n = w.nrows();
    let d = -w;
    let weights = (0..n)
        .map(|i| (0..n).map(|j| (i != j && d[(j, i)] > 0.0).then(|| (d[(i, i)] + 1.0) / d[(j, i)])).collect())
        .collect();
    Ok(FGraph { weights })
}

/// A simple cycle `v_0 -> v_1 -> ... -> v_0` of the F-graph with weight product above one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidCycle {
    pub vertices: Vec<usize>,
    /// `weights[k]` is the weight of the edge leaving `vertices[k]`.
    pub weights: Vec<f64>,
    pub product: f64,
    pub rho: f64,
}

impl ValidCycle {
    /// Adjacency matrix restricted to the cycle, in cycle order.
    pub fn fc(&self) -> DMatrix<f64> {
        let r = self.vertices.len();
        let mut m = DMatrix::zeros(r, r);
        for k in 0..r {
            m[(k, (k + 1) % r)] = self.weights[k];
        }
        m
    }

    /// Positive Perron vector of `fc()` with first entry one.
    pub fn perron_vector(&self) -> Vec<f64> {
        let r = self.vertices.len();
        let mut v = vec![1.0; r];
        for k in 0..r - 1 {
            v[k + 1] = self.rho * v[k] / self.weights[k];
        }
        v
    }
}

pub const DEFAULT_CYCLE_CAP: usize = 12;

pub fn find_valid_cycle(f: &FGraph) -> Result<Option<ValidCycle>> {
    find_valid_cycle_with_cap(f, DEFAULT_CYCLE_CAP)
}

/// Depth-first search over simple cycles of length at least three, each
/// rooted at its smallest vertex. Exponential in `n`; a branch is cut when
/// even the heaviest edges cannot lift its product above one.
pub fn find_valid_cycle_with_cap(f: &FGraph, cap: usize) -> Result<Option<ValidCycle>> {
    let n = f.len();
    if n > cap {
        return Err(Error::SizeCap { what: "cycle search", n, cap });
    }
    let log_w: Vec<Vec<Option<f64>>> =
        f.weights.iter().map(|row| row.iter().map(|w| w.filter(|w| *w > 0.0).map(f64::ln)).collect()).collect();
    let max_log = log_w.iter().flatten().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max_log.is_finite() {
        return Ok(None);
    }
    let mut path = Vec::with_capacity(n);
    let mut on_path = vec![false; n];
    for s in 0..n {
        path.clear();
        path.push(s);
        on_path[s] = true;
        let found = dfs(&log_w, max_log, s, 0.0, &mut path, &mut on_path);
        on_path[s] = false;
        if let Some(vertices) = found {
            let r = vertices.len();
            let weights: Vec<f64> = (0..r).map(|k| f.weights[vertices[k]][vertices[(k + 1) % r]].unwrap()).collect();
            let product: f64 = weights.iter().product();
            return Ok(Some(ValidCycle { vertices, weights, product, rho: product.powf(1.0 / r as f64) }));
        }
    }
    Ok(None)
}

const LOG_MARGIN: f64 = 1e-12;

fn dfs(
    log_w: &[Vec<Option<f64>>],
    max_log: f64,
    start: usize,
    acc: f64,
    path: &mut Vec<usize>,
    on_path: &mut [bool],
) -> Option<Vec<usize>> {
    let n = log_w.len();
    let last = *path.last().unwrap();
    if path.len() >= 3 {
        if let Some(back) = log_w[last][start] {
            if acc + back > LOG_MARGIN {
                return Some(path.clone());
            }
        }
    }
    let free = (start + 1..n).filter(|&v| !on_path[v]).count();
    // Best case: every remaining vertex plus the closing edge at max weight.
    if acc + (free as f64 + 1.0) * max_log.max(0.0) <= LOG_MARGIN {
        return None;
    }
    for v in start + 1..n {
        if on_path[v] {
            continue;
        }
        if let Some(lw) = log_w[last][v] {
            path.push(v);
            on_path[v] = true;
            let found = dfs(log_w, max_log, start, acc + lw, path, on_path);
            on_path[v] = false;
            path.pop();
            if found.is_some() {
                return found;
            }
        }
    }
    None
}

fn check_cycle(w: &DMatrix<f64>, cycle: &ValidCycle) -> Result<()> {
    let f = build_f_graph(w)?;
    let r = cycle.vertices.len();
    if r < 3 || cycle.weights.len() != r {
        return Err(Error::Precondition("a valid cycle needs at least three vertices".into()));
    }
    let mut seen = vec![false; f.len()];
    for k in 0..r {
        let (i, j) = (cycle.vertices[k], cycle.vertices[(k + 1) % r]);
        if i >= f.len() || seen[i] {
            return Err(Error::Precondition("cycle vertices must be distinct nodes of W".into()));
        }
        seen[i] = true;
        match f.weight(i, j) {
            Some(x) if (x - cycle.weights[k]).abs() <= 1e-12 * x.max(1.0) => {}
            _ => {
                return Err(Error::Precondition(format!("edge {} -> {} does not match the F-graph of W", i + 1, j + 1)))
            }
        }
    }
    if !(cycle.product > 1.0) {
        return Err(Error::Precondition("cycle weight product does not exceed one".into()));
    }
    Ok(())
}

/// Input supported on the cycle, proportional to its Perron vector and
/// scaled to the middle of the admissible range.
pub fn construct_oscillating_input(w: &DMatrix<f64>, m: &[f64], cycle: &ValidCycle) -> Result<Vec<f64>> {
    if !pairwise_unstable(w)?.satisfied {
        return Err(Error::Precondition("network is not pairwise unstable".into()));
    }
    check_cycle(w, cycle)?;
    let n = w.nrows();
    if m.len() != n {
        return Err(Error::Dimension("m must match W".into()));
    }
    let v = cycle.perron_vector();
    if v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::InvalidArgument("Perron vector is not positive".into()));
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let bound = cycle
        .vertices
        .iter()
        .zip(&v)
        .map(|(&i, &vi)| (1.0 - w[(i, i)]) * m[i] * norm / vi)
        .fold(f64::INFINITY, f64::min);
    let lambda = bound / 2.0;
    let mut u = vec![0.0; n];
    for (&i, &vi) in cycle.vertices.iter().zip(&v) {
        u[i] = vi / norm * lambda;
    }
    Ok(u)
}

/// `true` for nodes that do not oscillate: those off the supplied cycle.
pub fn node_oscillation_participation(w: &DMatrix<f64>, m: &[f64], u: &[f64], cycle: &ValidCycle) -> Result<Vec<bool>> {
    require_inhibitory(w)?;
    let n = w.nrows();
    if m.len() != n || u.len() != n {
        return Err(Error::Dimension("u and m must match W".into()));
    }
    for i in 0..n {
        if !(u[i] >= 0.0 && u[i] < (1.0 - w[(i, i)]) * m[i]) {
            return Err(Error::Precondition(format!("u_{} lies outside C", i + 1)));
        }
    }
    let net = Network::new(
        w.clone(),
        DVector::from_column_slice(u),
        DVector::from_column_slice(m),
        DVector::from_element(n, 1.0),
    )?;
    if !regions::lose(&net)?.lose {
        return Err(Error::Precondition("the network has a stable equilibrium".into()));
    }
    if cycle.vertices.iter().any(|&v| v >= n) {
        return Err(Error::Precondition("cycle vertex outside the network".into()));
    }
    Ok((0..n).map(|i| !cycle.vertices.contains(&i)).collect())
}

/// Verdict of the combined inhibitory checks used by the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InhibitoryOutcome {
    /// The T-set condition holds: no stable equilibrium.
    Lose,
    /// `I - W` is a P-matrix: a stable equilibrium exists.
    StableEquilibrium,
    Indeterminate,
}

/// Runs every applicable inhibitory criterion on `net`.
pub fn inhibitory_summary(net: &Network) -> Result<(ConditionVerdict, InhibitoryOutcome)> {
    let p = inhibitory_p_matrix_necessary(&net.w)?;
    let pu = pairwise_unstable(&net.w)?;
    let mut l = Ledger::new(&CriteriaConfig::default());
    l.flag("not_p_matrix", p.satisfied);
    l.flag("pairwise_unstable", pu.satisfied);
    for (k, v) in &pu.slacks {
        l.slacks.insert(k.clone(), *v);
    }
    let n = net.len();
    let u = net.u.as_slice();
    let m = net.m.as_slice();
    let in_c = (0..n).all(|i| u[i] >= 0.0 && u[i] < (1.0 - net.w[(i, i)]) * m[i]);
    l.flag("u_in_C", in_c);
    let mut witness = None;
    let mut outcome = if p.satisfied { InhibitoryOutcome::Indeterminate } else { InhibitoryOutcome::StableEquilibrium };
    if pu.satisfied && n <= DEFAULT_CYCLE_CAP {
        let cycle = find_valid_cycle(&build_f_graph(&net.w)?)?;
        l.flag("valid_cycle", cycle.is_some());
        witness = cycle.map(Witness::Cycle);
    }
    let mut marginal = false;
    if pu.satisfied && in_c {
        let t = t_set_membership(&net.w, u, m)?;
        marginal = t.marginal;
        for (k, v) in t.per_condition {
            l.per_condition.insert(k, v);
        }
        for (k, v) in t.slacks {
            l.slacks.insert(k, v);
        }
        outcome = if t.satisfied { InhibitoryOutcome::Lose } else { InhibitoryOutcome::StableEquilibrium };
    }
    Ok((l.finish(outcome == InhibitoryOutcome::Lose, marginal, witness), outcome))
}
