//! Switching regions, their equilibrium candidates and the exhaustive
//! search for stable equilibria.
//!
//! A pattern assigns each node one of three states. Inside the region the
//! dynamics are affine, `tau x' = (-I + L W) x + L u + S m`, where `L` and
//! `S` are the 0/1 diagonals of linear and saturated nodes.
//!
//! Enumeration groups the `3^N` patterns by their linear set: the
//! coefficient matrix, and therefore stability, depends only on which
//! nodes are linear. Each linear set is factorised once and shared by the
//! `2^(N - |L|)` patterns that complete it.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{self, Factored, LinalgConfig, SingularReport};
use crate::model::Network;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeState {
    Inactive,
    Linear,
    Saturated,
}

impl NodeState {
    pub fn digit(self) -> u64 {
        match self {
            NodeState::Inactive => 0,
            NodeState::Linear => 1,
            NodeState::Saturated => 2,
        }
    }

    pub fn from_digit(d: u64) -> Option<NodeState> {
        match d {
            0 => Some(NodeState::Inactive),
            1 => Some(NodeState::Linear),
            2 => Some(NodeState::Saturated),
            _ => None,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            NodeState::Inactive => '0',
            NodeState::Linear => 'l',
            NodeState::Saturated => 's',
        }
    }
}

/// One state per node. Displayed and serialised as a string over `0`, `l`, `s`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SwitchingPattern(pub Vec<NodeState>);

impl SwitchingPattern {
    pub fn uniform(n: usize, state: NodeState) -> Self {
        SwitchingPattern(vec![state; n])
    }

    /// Base-3 decoding with node 0 as the most significant digit.
    pub fn from_index(mut index: u64, n: usize) -> Self {
        let mut states = vec![NodeState::Inactive; n];
        for s in states.iter_mut().rev() {
            *s = NodeState::from_digit(index % 3).unwrap();
            index /= 3;
        }
        SwitchingPattern(states)
    }

    pub fn index(&self) -> u64 {
        self.0.iter().fold(0, |acc, s| acc * 3 + s.digit())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Bit `i` set iff node `i` is linear.
    pub fn linear_mask(&self) -> u64 {
        self.mask_of(NodeState::Linear)
    }

    pub fn saturated_mask(&self) -> u64 {
        self.mask_of(NodeState::Saturated)
    }

    fn mask_of(&self, state: NodeState) -> u64 {
        self.0.iter().enumerate().filter(|(_, s)| **s == state).fold(0, |m, (i, _)| m | 1 << i)
    }

    pub fn from_masks(n: usize, linear: u64, saturated: u64) -> Self {
        SwitchingPattern(
            (0..n)
                .map(|i| {
                    if linear >> i & 1 == 1 {
                        NodeState::Linear
                    } else if saturated >> i & 1 == 1 {
                        NodeState::Saturated
                    } else {
                        NodeState::Inactive
                    }
                })
                .collect(),
        )
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        SwitchingPattern(perm.iter().map(|&p| self.0[p]).collect())
    }
}

impl fmt::Display for SwitchingPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|s| write!(f, "{}", s.symbol()))
    }
}

impl FromStr for SwitchingPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(NodeState::Inactive),
                'l' | 'L' => Ok(NodeState::Linear),
                's' | 'S' => Ok(NodeState::Saturated),
                other => Err(Error::InvalidArgument(format!("unknown node state '{other}' in pattern"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(SwitchingPattern)
    }
}

impl Serialize for SwitchingPattern {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SwitchingPattern {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionConfig {
    pub linalg: LinalgConfig,
    /// Membership slack is `membership_rel * max(1, ||m||_inf)` on each interval end.
    pub membership_rel: f64,
    pub cap: usize,
    pub warn_above: usize,
}

impl Default for RegionConfig {
    fn default() -> Self {
        RegionConfig { linalg: LinalgConfig::default(), membership_rel: 1e-9, cap: 16, warn_above: 12 }
    }
}

impl RegionConfig {
    pub fn membership_tol(&self, net: &Network) -> f64 {
        self.membership_rel * net.m.amax().max(1.0)
    }

    /// Eigenvalue sign margin, scaled by `||W||_inf` so that it is the same
    /// for every pattern of a network.
    pub fn stability_tol(&self, net: &Network) -> f64 {
        self.linalg.stability_tol(&net.w)
    }

    pub fn classify(&self, abscissa: f64, tol: f64) -> Stability {
        if abscissa < -tol {
            Stability::Stable
        } else if abscissa > tol {
            Stability::Unstable
        } else {
            Stability::Marginal
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub pattern: SwitchingPattern,
    pub index: u64,
    /// `None` when `I - L W` is numerically singular.
    pub candidate: Option<Vec<f64>>,
    pub stability: Stability,
    /// `None` when there is no candidate.
    pub contained: Option<bool>,
    pub abscissa: f64,
}

impl RegionReport {
    pub fn is_equilibrium(&self) -> bool {
        self.contained == Some(true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoseVerdict {
    pub lose: bool,
    pub stable_contained: Vec<RegionReport>,
    /// Marginal regions that contain their candidate. Any entry forces `lose = false`.
    pub marginal_flags: Vec<RegionReport>,
    /// Marginal regions without a candidate; their equilibrium set is not adjudicated.
    pub singular_flags: Vec<RegionReport>,
    pub regions_scanned: u64,
}

impl LoseVerdict {
    /// `true` when the verdict rests on marginal or singular regions.
    pub fn is_indeterminate(&self) -> bool {
        self.stable_contained.is_empty() && (!self.marginal_flags.is_empty() || !self.singular_flags.is_empty())
    }
}

/// `x = (I - L W)^{-1} (L u + S m)`, solved on the full `N x N` system.
pub fn equilibrium_candidate(
    net: &Network,
    sigma: &SwitchingPattern,
    cfg: &LinalgConfig,
) -> std::result::Result<DVector<f64>, SingularReport> {
    let n = net.len();
    assert_eq!(sigma.len(), n, "pattern length differs from network size");
    let mut a = DMatrix::identity(n, n);
    let mut rhs = DVector::zeros(n);
    for (i, s) in sigma.0.iter().enumerate() {
        match s {
            NodeState::Linear => {
                for j in 0..n {
                    a[(i, j)] -= net.w[(i, j)];
                }
                rhs[i] = net.u[i];
            }
            NodeState::Saturated => rhs[i] = net.m[i],
            NodeState::Inactive => {}
        }
    }
    linalg::solve_with(&a, &rhs, cfg)
}

pub fn region_membership(net: &Network, sigma: &SwitchingPattern, x: &DVector<f64>, tol: f64) -> bool {
    let z = &net.w * x + &net.u;
    sigma.0.iter().enumerate().all(|(i, s)| in_interval(*s, z[i], net.m[i], tol))
}

#[inline]
fn in_interval(state: NodeState, z: f64, m: f64, tol: f64) -> bool {
    match state {
        NodeState::Inactive => z <= tol,
        NodeState::Linear => z >= -tol && z <= m + tol,
        NodeState::Saturated => z >= m - tol,
    }
}

/// Stability of `-I + L W`, computed from the full matrix.
pub fn region_stability(net: &Network, sigma: &SwitchingPattern, cfg: &RegionConfig) -> Result<(Stability, f64)> {
    let n = net.len();
    let a = DMatrix::from_fn(n, n, |i, j| {
        let lw = if sigma.0[i] == NodeState::Linear { net.w[(i, j)] } else { 0.0 };
        lw - if i == j { 1.0 } else { 0.0 }
    });
    let abscissa = linalg::eigen_with(&a, &cfg.linalg)?.abscissa;
    Ok((cfg.classify(abscissa, cfg.stability_tol(net)), abscissa))
}

struct LinearSet {
    nodes: Vec<usize>,
    factor: std::result::Result<Factored, SingularReport>,
    abscissa: f64,
    stability: Stability,
}

/// Per-linear-set factorisations of one network.
pub struct RegionTable<'a> {
    net: &'a Network,
    cfg: RegionConfig,
    sets: Vec<LinearSet>,
    tol: f64,
}

impl<'a> RegionTable<'a> {
    pub fn new(net: &'a Network, cfg: &RegionConfig) -> Result<Self> {
        let n = net.len();
        net.check()?;
        if n > cfg.cap {
            return Err(Error::SizeCap { what: "region enumeration", n, cap: cfg.cap });
        }
        if n > cfg.warn_above {
            log::warn!("enumerating 3^{n} switching regions");
        }
        let stab_tol = cfg.stability_tol(net);
        let sets = (0u64..1 << n)
            .map(|mask| {
                let nodes: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
                let r = nodes.len();
                let m = DMatrix::from_fn(r, r, |i, j| (if i == j { 1.0 } else { 0.0 }) - net.w[(nodes[i], nodes[j])]);
                // Spectrum of -I + L W: -1 on the non-linear nodes plus that of -(I - W_LL).
                let mut abscissa = linalg::eigen_with(&(-&m), &cfg.linalg)?.abscissa;
                if r < n {
                    abscissa = abscissa.max(-1.0);
                }
                let factor = Factored::new(&m, cfg.linalg.max_condition);
                Ok(LinearSet { nodes, factor, abscissa, stability: cfg.classify(abscissa, stab_tol) })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RegionTable { net, cfg: *cfg, sets, tol: cfg.membership_tol(net) })
    }

    pub fn len(&self) -> usize {
        self.net.len()
    }

    pub fn is_empty(&self) -> bool {
        self.net.is_empty()
    }

    pub fn pattern_count(&self) -> u64 {
        3u64.pow(self.net.len() as u32)
    }

    pub fn linear_set_stability(&self, linear: u64) -> (Stability, f64) {
        let s = &self.sets[linear as usize];
        (s.stability, s.abscissa)
    }

    pub fn report(&self, sigma: &SwitchingPattern) -> RegionReport {
        self.report_masks(sigma.linear_mask(), sigma.saturated_mask())
    }

    fn report_masks(&self, linear: u64, saturated: u64) -> RegionReport {
        let net = self.net;
        let n = net.len();
        let set = &self.sets[linear as usize];
        let pattern = SwitchingPattern::from_masks(n, linear, saturated);
        let index = pattern.index();
        let (candidate, contained) = match &set.factor {
            Err(_) => (None, None),
            Ok(f) => {
                let mut x = DVector::zeros(n);
                for i in 0..n {
                    if saturated >> i & 1 == 1 {
                        x[i] = net.m[i];
                    }
                }
                if !set.nodes.is_empty() {
                    let rhs = DVector::from_iterator(
                        set.nodes.len(),
                        set.nodes.iter().map(|&i| {
                            net.u[i]
                                + (0..n)
                                    .filter(|&j| saturated >> j & 1 == 1)
                                    .map(|j| net.w[(i, j)] * net.m[j])
                                    .sum::<f64>()
                        }),
                    );
                    let xl = f.solve(&rhs);
                    for (k, &i) in set.nodes.iter().enumerate() {
                        x[i] = xl[k];
                    }
                }
                let contained = region_membership(net, &pattern, &x, self.tol);
                (Some(x.as_slice().to_vec()), Some(contained))
            }
        };
        RegionReport { pattern, index, candidate, stability: set.stability, contained, abscissa: set.abscissa }
    }

    /// Visits every pattern in increasing index order.
    pub fn for_each(&self, mut visit: impl FnMut(RegionReport)) {
        let n = self.net.len();
        for idx in 0..self.pattern_count() {
            let mut rest = idx;
            let (mut linear, mut saturated) = (0u64, 0u64);
            for i in (0..n).rev() {
                match rest % 3 {
                    1 => linear |= 1 << i,
                    2 => saturated |= 1 << i,
                    _ => {}
                }
                rest /= 3;
            }
            visit(self.report_masks(linear, saturated));
        }
    }

    /// Visits only patterns whose linear set is stable or marginal, grouped by linear set.
    pub fn for_each_non_unstable(&self, mut visit: impl FnMut(RegionReport)) {
        let n = self.net.len();
        let full = (1u64 << n) - 1;
        for (linear, set) in self.sets.iter().enumerate() {
            if set.stability == Stability::Unstable {
                continue;
            }
            let free = full & !(linear as u64);
            // Walk all subsets of the free nodes as the saturated set.
            let mut sat = free;
            loop {
                visit(self.report_masks(linear as u64, sat));
                if sat == 0 {
                    break;
                }
                sat = (sat - 1) & free;
            }
        }
    }

    pub fn lose(&self) -> LoseVerdict {
        let mut stable_contained = Vec::new();
        let mut marginal_flags = Vec::new();
        let mut singular_flags = Vec::new();
        self.for_each_non_unstable(|r| match (r.stability, r.contained) {
            (Stability::Stable, Some(true)) => stable_contained.push(r),
            (Stability::Marginal, Some(true)) => marginal_flags.push(r),
            (_, None) => singular_flags.push(r),
            _ => {}
        });
        for v in [&mut stable_contained, &mut marginal_flags, &mut singular_flags] {
            v.sort_by_key(|r| r.index);
        }
        let lose = stable_contained.is_empty() && marginal_flags.is_empty();
        LoseVerdict { lose, stable_contained, marginal_flags, singular_flags, regions_scanned: self.pattern_count() }
    }

    pub fn config(&self) -> &RegionConfig {
        &self.cfg
    }
}

/// All `3^N` reports in increasing pattern index.
pub fn enumerate_equilibria(net: &Network) -> Result<Vec<RegionReport>> {
    enumerate_equilibria_with(net, &RegionConfig::default())
}

pub fn enumerate_equilibria_with(net: &Network, cfg: &RegionConfig) -> Result<Vec<RegionReport>> {
    let table = RegionTable::new(net, cfg)?;
    let mut out = Vec::with_capacity(table.pattern_count() as usize);
    table.for_each(|r| out.push(r));
    Ok(out)
}

pub fn lose(net: &Network) -> Result<LoseVerdict> {
    lose_with(net, &RegionConfig::default())
}

pub fn lose_with(net: &Network, cfg: &RegionConfig) -> Result<LoseVerdict> {
    Ok(RegionTable::new(net, cfg)?.lose())
}
