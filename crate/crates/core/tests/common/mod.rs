//! Random instance generators shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ltnet::experiments::ei_pair_inputs;
use ltnet::model::{EIPairNetwork, EIPairParams, Network, SingleInhibitoryNetwork};
use ltnet::regions::LoseVerdict;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}

/// Unstructured network: `W` entries in `(-scale, scale)`, `u` in
/// `(-scale, scale)`, `m` in `(1, scale)`, unit time constants.
pub fn random_network(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Network {
    let w = DMatrix::from_fn(n, n, |_, _| uniform(rng, -scale, scale));
    let u = DVector::from_fn(n, |_, _| uniform(rng, -scale, scale));
    let m = DVector::from_fn(n, |_, _| uniform(rng, 1.0, scale.max(1.5)));
    Network::new(w, u, m, DVector::from_element(n, 1.0)).unwrap()
}

pub fn random_excitatory_network(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Network {
    let mut net = random_network(rng, n, scale);
    net.w.iter_mut().for_each(|v| *v = v.abs());
    net
}

/// E-I pair with every parameter drawn independently.
pub fn random_ei_pair(rng: &mut ChaCha8Rng) -> EIPairParams {
    EIPairParams {
        a: uniform(rng, 0.0, 10.0),
        b: uniform(rng, 0.0, 10.0),
        c: uniform(rng, 0.0, 10.0),
        d: uniform(rng, 0.0, 10.0),
        m1: uniform(rng, 0.5, 5.0),
        m2: uniform(rng, 0.5, 5.0),
        u1: uniform(rng, 0.0, 10.0),
        u2: uniform(rng, -10.0, 10.0),
    }
}

/// E-I pair whose weights admit an oscillating input range, with the
/// inputs scattered around the middle of that range so both verdicts occur.
pub fn targeted_ei_pair(rng: &mut ChaCha8Rng) -> EIPairParams {
    loop {
        let mut p = random_ei_pair(rng);
        let v = ltnet::criteria::ei_pair_limit_cycle(&p).unwrap();
        if !(v.holds("5a") && v.holds("5b") && v.holds("5c")) {
            continue;
        }
        let (u1, u2) = ei_pair_inputs(p.a, p.b, p.c, p.d, p.m1, p.m2);
        p.u1 = u1 * uniform(rng, 0.0, 2.0);
        p.u2 = u2 + uniform(rng, -1.0, 1.0) * u2.abs().max(1.0);
        return p;
    }
}

/// Oscillating E-I pair with inputs at the middle of their ranges.
pub fn oscillating_pair(rng: &mut ChaCha8Rng) -> EIPairParams {
    let a = uniform(rng, 3.5, 5.0);
    let b = uniform(rng, 8f64.sqrt() + 0.5, 8f64.sqrt() + 2.0);
    let d = uniform(rng, 0.0, 1.0);
    let m1 = uniform(rng, 1.0, 2.0);
    let m2 = uniform(rng, 8.0 / b + 0.5, 8.0 / b + 2.0);
    let (u1, u2) = ei_pair_inputs(a, b, b, d, m1, m2);
    EIPairParams { a, b, c: b, d, m1, m2, u1, u2 }
}

/// Single-inhibitory network with `n` excitatory nodes and `a_ii > d + 2`.
pub fn random_single_inhibitory(rng: &mut ChaCha8Rng, n: usize) -> SingleInhibitoryNetwork {
    let d = uniform(rng, 0.0, 3.0);
    let a =
        DMatrix::from_fn(n, n, |i, j| if i == j { d + 2.0 + uniform(rng, 0.5, 6.0) } else { uniform(rng, 0.0, 3.0) });
    SingleInhibitoryNetwork {
        a,
        b: (0..n).map(|_| uniform(rng, 0.5, 8.0)).collect(),
        c: (0..n).map(|_| uniform(rng, 0.5, 8.0)).collect(),
        d,
        u_e: (0..n).map(|_| uniform(rng, -20.0, 30.0)).collect(),
        u_inh: uniform(rng, -10.0, 10.0),
        m_e: (0..n).map(|_| uniform(rng, 0.5, 5.0)).collect(),
        m_inh: uniform(rng, 1.0, 8.0),
    }
}

/// [`random_single_inhibitory`] with inputs drawn around one of the two
/// simpler sufficient regions (`block` 0 or 1), so that both verdicts occur
/// near their boundaries.
pub fn targeted_single_inhibitory(rng: &mut ChaCha8Rng, n: usize, block: usize) -> SingleInhibitoryNetwork {
    let mut s = random_single_inhibitory(rng, n);
    let d1 = s.d + 1.0;
    let cm: Vec<f64> = (0..n).map(|j| s.c[j] * s.m_e[j]).collect();
    let cme: f64 = cm.iter().sum();
    let min_cm = cm.iter().copied().fold(f64::INFINITY, f64::min);
    let arow = |s: &SingleInhibitoryNetwork, i: usize, j: usize| s.a[(i, j)] - if i == j { 1.0 } else { 0.0 };
    let (lo_inh, hi_inh) = if block == 0 { (0.0, d1 * s.m_inh - cme) } else { (d1 * s.m_inh - min_cm, d1 * s.m_inh) };
    s.u_inh = if hi_inh > lo_inh { uniform(rng, lo_inh, hi_inh) } else { uniform(rng, lo_inh - 1.0, lo_inh + 1.0) };
    let un = s.u_inh;
    for i in 0..n {
        let (lo, hi) = if i == 0 {
            if block == 0 {
                (s.b[0] * un / d1, s.b[0] * (un + s.c[0] * s.m_e[0]) / d1 - arow(&s, 0, 0) * s.m_e[0])
            } else {
                (0.0, s.b[0] * s.m_inh - arow(&s, 0, 0) * s.m_e[0])
            }
        } else if block == 0 {
            let pos: f64 = (0..n).map(|j| (arow(&s, i, j) * d1 - s.b[i] * s.c[j]).max(0.0) * s.m_e[j]).sum();
            let bound = (s.b[i] * un - pos) / d1;
            (bound - 5.0, bound)
        } else {
            let bound = s.b[i] * s.m_inh - (0..n).map(|j| arow(&s, i, j) * s.m_e[j]).sum::<f64>();
            (bound - 5.0, bound)
        };
        let pad = 0.2 * (hi - lo).abs().max(1.0);
        s.u_e[i] = uniform(rng, lo.min(hi) - pad, lo.max(hi) + pad);
    }
    s
}

/// Two excitatory nodes whose `(u_1, u_2)` cross-section at `u_inh = -5` splits into four orthants.
pub fn four_orthant_network(u1: f64, u2: f64) -> SingleInhibitoryNetwork {
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

/// Inhibitory weights `-D` with `D` entries in `[0, scale)`.
pub fn random_inhibitory(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<f64> {
    -DMatrix::from_fn(n, n, |_, _| uniform(rng, 0.0, scale))
}

/// Pairwise unstable weights whose F-graph carries the valid cycle
/// `0 -> 1 -> ... -> n-1 -> 0`.
pub fn inhibitory_with_cycle(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let mut d = DMatrix::from_fn(n, n, |i, j| if i == j { uniform(rng, 0.0, 0.1) } else { uniform(rng, 4.0, 8.0) });
    for k in 0..n {
        d[((k + 1) % n, k)] = uniform(rng, 0.3, 0.9);
    }
    -d
}

/// Symmetric strong inhibition with a zero diagonal: pairwise unstable, every cycle product below one.
pub fn inhibitory_without_cycle(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = uniform(rng, 1.5, 6.0);
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    -d
}

/// A uniform draw from the box `C = prod [0, (1 - w_ii) m_i)`.
pub fn input_in_c(rng: &mut ChaCha8Rng, w: &DMatrix<f64>, m: &[f64]) -> Vec<f64> {
    (0..m.len()).map(|i| uniform(rng, 0.0, (1.0 - w[(i, i)]) * m[i])).collect()
}

pub fn network(w: DMatrix<f64>, u: &[f64], m: &[f64]) -> Network {
    let n = m.len();
    Network::new(w, DVector::from_column_slice(u), DVector::from_column_slice(m), DVector::from_element(n, 1.0))
        .unwrap()
}

/// Two oscillating pairs coupled E-to-E with weights around the critical drive.
pub fn coupled_pairs(rng: &mut ChaCha8Rng, n: usize, with_ei: bool) -> EIPairNetwork {
    let pairs: Vec<EIPairParams> = (0..n).map(|_| oscillating_pair(rng)).collect();
    let slack: Vec<f64> = pairs.iter().map(|p| ltnet::criteria::excitatory_bound(p) - p.u1).collect();
    let ae = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            uniform(rng, 0.0, 3.0) * slack[i] / pairs[j].m1 / (n - 1) as f64
        }
    });
    let ai = DMatrix::from_fn(n, n, |i, j| if i == j || !with_ei { 0.0 } else { uniform(rng, 0.0, 1.5) });
    EIPairNetwork { pairs, ae, ai, tau: vec![1.0; n] }
}

/// A verdict that touches no tolerance band.
pub fn lose_is_clean(v: &LoseVerdict) -> bool {
    v.marginal_flags.is_empty() && v.singular_flags.is_empty()
}
