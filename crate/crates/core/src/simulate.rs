//! Fixed-step RK4 integration of `tau_i x_i' = -x_i + [W x + u]_0^m`.
//!
//! After every step the state is clamped to `[0, m]`. If a step leaves
//! the state bitwise unchanged the map has reached a fixed point, and the
//! remaining samples are filled without further evaluation.

use std::io::{Read, Write};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Network;

pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_T_END: f64 = 2000.0;
pub const DEFAULT_WINDOW: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub network: String,
    pub seed: Option<u64>,
}

/// Uniformly sampled states, stored row-major (`len x n`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    /// Grid index of the first stored sample; its time is `start * dt`.
    pub start: usize,
    pub n: usize,
    pub states: Vec<f64>,
    pub provenance: Option<Provenance>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len().checked_div(self.n).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn time(&self, k: usize) -> f64 {
        (self.start + k) as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.states[k * self.n..(k + 1) * self.n]
    }

    pub fn last(&self) -> &[f64] {
        self.row(self.len() - 1)
    }

    pub fn channel(&self, i: usize) -> Vec<f64> {
        self.states.iter().skip(i).step_by(self.n).copied().collect()
    }

    /// The last `max(1, floor(fraction * len))` samples.
    pub fn steady_window(&self, fraction: f64) -> Result<Trajectory> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!("window fraction {fraction} not in (0, 1]")));
        }
        if self.is_empty() {
            return Err(Error::SeriesTooShort { len: 0, min: 1 });
        }
        let keep = window_len(self.len(), fraction);
        let skip = self.len() - keep;
        Ok(Trajectory {
            dt: self.dt,
            start: self.start + skip,
            n: self.n,
            states: self.states[skip * self.n..].to_vec(),
            provenance: self.provenance.clone(),
        })
    }

    /// Per-channel range below `rel * m_i` for every channel.
    pub fn is_converged(&self, m: &[f64], rel: f64) -> bool {
        (0..self.n).all(|i| {
            let (lo, hi) = self.channel_range(i);
            hi - lo < rel * m[i]
        })
    }

    pub fn channel_range(&self, i: usize) -> (f64, f64) {
        self.states
            .iter()
            .skip(i)
            .step_by(self.n)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
    }

    /// CSV with header `t,x1,..,xN`; floats in shortest round-trip form.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.n).map(|i| format!("x{i}")));
        w.write_record(&header)?;
        let mut rec: Vec<String> = Vec::with_capacity(self.n + 1);
        for k in 0..self.len() {
            rec.clear();
            rec.push(self.time(k).to_string());
            rec.extend(self.row(k).iter().map(|x| x.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV layout of [`Trajectory::write_csv`]. The time step is
    /// taken from the first and last rows and checked for uniformity.
    pub fn read_csv<R: Read>(input: R) -> Result<Trajectory> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        if headers.get(0) != Some("t") || headers.len() < 2 {
            return Err(Error::InvalidArgument("trajectory CSV must start with columns t,x1,...".into()));
        }
        let n = headers.len() - 1;
        let mut times = Vec::new();
        let mut states = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != n + 1 {
                return Err(Error::InvalidArgument(format!(
                    "row {}: expected {} fields, found {}",
                    line + 2,
                    n + 1,
                    rec.len()
                )));
            }
            for (col, field) in rec.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::InvalidArgument(format!("row {}, column {}: '{field}' is not a number", line + 2, col + 1))
                })?;
                if col == 0 {
                    times.push(v);
                } else {
                    states.push(v);
                }
            }
        }
        if times.len() < 2 {
            return Err(Error::SeriesTooShort { len: times.len(), min: 2 });
        }
        let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument("time column is not increasing".into()));
        }
        for (k, t) in times.iter().enumerate() {
            if (t - times[0] - k as f64 * dt).abs() > 1e-6 * dt {
                return Err(Error::InvalidArgument(format!("row {}: time grid is not uniform", k + 2)));
            }
        }
        let start = (times[0] / dt).round() as usize;
        Ok(Trajectory { dt, start, n, states, provenance: None })
    }
}

fn window_len(len: usize, fraction: f64) -> usize {
    ((fraction * len as f64).floor() as usize).clamp(1, len)
}

pub fn sample_count(t_end: f64, dt: f64) -> usize {
    (t_end / dt).round() as usize + 1
}

/// Uniform draw in `[0, m]`.
pub fn random_initial_state(m: &[f64], seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    m.iter().map(|&mi| rng.gen_range(0.0..mi)).collect()
}

struct Stepper<'a> {
    net: &'a Network,
    n: usize,
    w: Vec<f64>,
    inv_tau: Vec<f64>,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(net: &'a Network) -> Self {
        let n = net.len();
        let w = (0..n * n).map(|k| net.w[(k / n, k % n)]).collect();
        Stepper {
            net,
            n,
            w,
            inv_tau: net.tau.iter().map(|t| 1.0 / t).collect(),
            k: [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            tmp: vec![0.0; n],
        }
    }

    #[inline]
    fn rhs(n: usize, w: &[f64], net: &Network, inv_tau: &[f64], x: &[f64], out: &mut [f64]) {
        for i in 0..n {
            let row = &w[i * n..(i + 1) * n];
            let mut z = net.u[i];
            for j in 0..n {
                z += row[j] * x[j];
            }
            out[i] = (z.clamp(0.0, net.m[i]) - x[i]) * inv_tau[i];
        }
    }

    fn step(&mut self, x: &mut [f64], dt: f64) {
        let n = self.n;
        let (k, tmp) = (&mut self.k, &mut self.tmp);
        let [k1, k2, k3, k4] = k;
        Self::rhs(n, &self.w, self.net, &self.inv_tau, x, k1);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * dt * k1[i];
        }
        Self::rhs(n, &self.w, self.net, &self.inv_tau, tmp, k2);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * dt * k2[i];
        }
        Self::rhs(n, &self.w, self.net, &self.inv_tau, tmp, k3);
        for i in 0..n {
            tmp[i] = x[i] + dt * k3[i];
        }
        Self::rhs(n, &self.w, self.net, &self.inv_tau, tmp, k4);
        for i in 0..n {
            let next = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            x[i] = next.clamp(0.0, self.net.m[i]);
        }
    }
}

fn check_inputs(net: &Network, x0: &[f64], t_end: f64, dt: f64) -> Result<()> {
    net.check()?;
    if x0.len() != net.len() {
        return Err(Error::Dimension(format!("x0 has {} entries, network has {}", x0.len(), net.len())));
    }
    if !(dt > 0.0 && dt.is_finite()) || !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument("dt must be positive and t_end nonnegative".into()));
    }
    for (i, (&x, &m)) in x0.iter().zip(net.m.iter()).enumerate() {
        if !(x >= 0.0 && x <= m) {
            return Err(Error::OutOfBox { node: i, value: x });
        }
    }
    Ok(())
}

/// Full trajectory on the grid `0, dt, ..., round(t_end / dt) * dt`.
pub fn integrate(net: &Network, x0: &[f64], t_end: f64, dt: f64) -> Result<Trajectory> {
    integrate_tail(net, x0, t_end, dt, 1.0)
}

/// Integrates the whole horizon but stores only the samples that
/// `steady_window(fraction)` of the full trajectory would keep.
pub fn integrate_tail(net: &Network, x0: &[f64], t_end: f64, dt: f64, fraction: f64) -> Result<Trajectory> {
    integrate_tail_with(net, x0, t_end, dt, fraction, 0.0)
}

/// Steps between two convergence checks in [`integrate_tail_with`].
pub const FREEZE_INTERVAL: usize = 100;

/// [`integrate_tail`] that holds the state constant once it moved by at most
/// `freeze_tol * m_i` in every coordinate over [`FREEZE_INTERVAL`] steps.
/// `freeze_tol = 0` only stops at exact fixed points of the stepper.
pub fn integrate_tail_with(
    net: &Network,
    x0: &[f64],
    t_end: f64,
    dt: f64,
    fraction: f64,
    freeze_tol: f64,
) -> Result<Trajectory> {
    check_inputs(net, x0, t_end, dt)?;
    if !(freeze_tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("freeze tolerance {freeze_tol} is negative")));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("window fraction {fraction} not in (0, 1]")));
    }
    let n = net.len();
    let total = sample_count(t_end, dt);
    let keep = window_len(total, fraction);
    let first_kept = total - keep;
    let mut states = Vec::with_capacity(keep * n);
    let mut x = x0.to_vec();
    let mut prev = x.clone();
    let mut checkpoint = x.clone();
    let mut stepper = Stepper::new(net);
    let mut fixed = false;
    for step in 0..total {
        if step > 0 && !fixed {
            prev.copy_from_slice(&x);
            stepper.step(&mut x, dt);
            if let Some(i) = x.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { step, node: i });
            }
            fixed = x == prev;
            if freeze_tol > 0.0 && step % FREEZE_INTERVAL == 0 {
                fixed |= x.iter().zip(&checkpoint).zip(net.m.iter()).all(|((a, b), m)| (a - b).abs() <= freeze_tol * m);
                checkpoint.copy_from_slice(&x);
            }
        }
        if step >= first_kept {
            states.extend_from_slice(&x);
        }
    }
    Ok(Trajectory {
        dt,
        start: first_kept,
        n,
        states,
        provenance: Some(Provenance { network: net.digest(), seed: None }),
    })
}

/// Fixed-point residual `||-x + [W x + u]_0^m||_inf`.
pub fn residual(net: &Network, x: &[f64]) -> f64 {
    let xv = DVector::from_column_slice(x);
    let z = net.clip(&(&net.w * &xv + &net.u));
    (z - xv).amax()
}
