//! Signal-based oscillation indices computed on the steady part of a
//! trajectory, and the threshold that separates oscillating from
//! non-oscillating log-index values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulate::{Trajectory, DEFAULT_WINDOW};

pub const DEFAULT_EPSILON: f64 = 0.1;
pub const MIN_SPECTRUM_LEN: usize = 16;
/// Side magnitudes below this fraction of the peak are raised to it.
pub const SPECTRAL_FLOOR: f64 = 1e-12;
/// `log_chi_osc` reports `ln(max(chi_osc, LOG_FLOOR))`.
pub const LOG_FLOOR: f64 = 1e-16;

/// Magnitude of the DFT of the mean-centred signal at bins `1..=L/2`,
/// with frequencies `k / (L dt)`.
pub fn power_spectrum(signal: &[f64], dt: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut planner = FftPlanner::new();
    spectrum_with(&mut planner, signal, dt)
}

fn spectrum_with(planner: &mut FftPlanner<f64>, signal: &[f64], dt: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let len = signal.len();
    if len < MIN_SPECTRUM_LEN {
        return Err(Error::SeriesTooShort { len, min: MIN_SPECTRUM_LEN });
    }
    let mean = signal.iter().sum::<f64>() / len as f64;
    let mut buf: Vec<Complex<f64>> = signal.iter().map(|&x| Complex::new(x - mean, 0.0)).collect();
    planner.plan_fft_forward(len).process(&mut buf);
    let half = len / 2;
    let freqs = (1..=half).map(|k| k as f64 / (len as f64 * dt)).collect();
    let mags = buf[1..=half].iter().map(|z| z.norm()).collect();
    Ok((freqs, mags))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelMetrics {
    pub chi_reg: f64,
    /// Peak frequency; zero for a flat spectrum.
    pub frequency: f64,
    pub chi_pp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationMetrics {
    pub chi_reg: f64,
    pub chi_pp: f64,
    pub chi_osc: f64,
    pub per_channel: Vec<ChannelMetrics>,
}

impl OscillationMetrics {
    pub fn log_chi_osc(&self) -> f64 {
        self.chi_osc.max(LOG_FLOOR).ln()
    }
}

/// Peak sharpness of one channel: returns `(chi_reg_i, f_i)`.
fn channel_regularity(freqs: &[f64], mags: &[f64], epsilon: f64) -> (f64, f64) {
    let (peak_idx, peak) =
        mags.iter().copied().enumerate().fold((0, 0.0), |best, (k, v)| if v > best.1 { (k, v) } else { best });
    if !(peak > 0.0) {
        return (1.0, 0.0);
    }
    // Bin k (0-based here) holds frequency (k + 1) / (L dt).
    let bin = (peak_idx + 1) as f64;
    let last = mags.len();
    let nearest = |f: f64| ((f.round() as usize).clamp(1, last)) - 1;
    let lo = mags[nearest((1.0 - epsilon) * bin)];
    let hi = mags[nearest((1.0 + epsilon) * bin)];
    let side = lo.max(hi).max(SPECTRAL_FLOOR * peak);
    ((peak / side).max(1.0), freqs[peak_idx])
}

/// `chi_reg = max_i |X_i(f_i)| / max(|X_i((1 - eps) f_i)|, |X_i((1 + eps) f_i)|)`.
pub fn regularity_index(window: &Trajectory, epsilon: f64) -> Result<(f64, Vec<(f64, f64)>)> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon {epsilon} not in (0, 1)")));
    }
    let mut planner = FftPlanner::new();
    let mut per = Vec::with_capacity(window.n);
    for i in 0..window.n {
        let (freqs, mags) = spectrum_with(&mut planner, &window.channel(i), window.dt)?;
        per.push(channel_regularity(&freqs, &mags, epsilon));
    }
    let chi = per.iter().map(|p| p.0).fold(1.0, f64::max);
    Ok((chi, per))
}

/// `chi_pp = max_i (max x_i - min x_i) / m_i` over the window.
pub fn peak_to_peak_index(window: &Trajectory, m: &[f64]) -> Result<(f64, Vec<f64>)> {
    if window.is_empty() {
        return Err(Error::SeriesTooShort { len: 0, min: 1 });
    }
    if m.len() != window.n {
        return Err(Error::Dimension(format!("m has {} entries, trajectory has {} channels", m.len(), window.n)));
    }
    let per: Vec<f64> = (0..window.n)
        .map(|i| {
            let (lo, hi) = window.channel_range(i);
            (hi - lo) / m[i]
        })
        .collect();
    Ok((per.iter().copied().fold(0.0, f64::max), per))
}

/// Both indices on the steady window of `tr`.
pub fn oscillation_index(tr: &Trajectory, m: &[f64], epsilon: f64, window_fraction: f64) -> Result<OscillationMetrics> {
    let w = tr.steady_window(window_fraction)?;
    window_metrics(&w, m, epsilon)
}

/// Both indices on a trajectory that already is the steady window.
pub fn window_metrics(window: &Trajectory, m: &[f64], epsilon: f64) -> Result<OscillationMetrics> {
    let (chi_reg, reg) = regularity_index(window, epsilon)?;
    let (chi_pp, pp) = peak_to_peak_index(window, m)?;
    let per_channel = reg
        .iter()
        .zip(&pp)
        .map(|(&(chi_reg, frequency), &chi_pp)| ChannelMetrics { chi_reg, frequency, chi_pp })
        .collect();
    Ok(OscillationMetrics { chi_reg, chi_pp, chi_osc: chi_reg * chi_pp, per_channel })
}

pub fn default_oscillation_index(tr: &Trajectory, m: &[f64]) -> Result<OscillationMetrics> {
    oscillation_index(tr, m, DEFAULT_EPSILON, DEFAULT_WINDOW)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

impl Component {
    fn density(&self, x: f64) -> f64 {
        let z = x - self.mean;
        self.weight * (-0.5 * z * z / self.variance).exp() / (2.0 * std::f64::consts::PI * self.variance).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFit {
    pub theta: f64,
    /// Components sorted by mean.
    pub mixture: Vec<Component>,
    pub trough_location: f64,
    /// Density minimum between the lowest and the middle mean.
    pub left_trough: f64,
    /// Set when the fit degenerated and `theta` is the midpoint fallback.
    pub degenerate: Option<String>,
    pub iterations: usize,
    pub log_likelihood: f64,
}

impl ThresholdFit {
    pub fn density(&self, x: f64) -> f64 {
        self.mixture.iter().map(|c| c.density(x)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmConfig {
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
    pub variance_floor: f64,
    pub min_samples: usize,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig { seed: 0, max_iter: 200, tol: 1e-8, variance_floor: 1e-6, min_samples: 300 }
    }
}

pub fn fit_threshold(samples: &[f64]) -> Result<ThresholdFit> {
    fit_threshold_with(samples, &GmmConfig::default())
}

/// Three-component mixture by EM from a k-means++ start; `theta` is the
/// density minimum between the two largest means.
pub fn fit_threshold_with(samples: &[f64], cfg: &GmmConfig) -> Result<ThresholdFit> {
    if samples.len() < cfg.min_samples {
        return Err(Error::SeriesTooShort { len: samples.len(), min: cfg.min_samples });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("threshold samples must be finite".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let distinct = sorted.len();

    let mut comps = kmeans_init(samples, cfg);
    let (iterations, ll) = em(samples, &mut comps, cfg);
    comps.sort_by(|a, b| a.mean.total_cmp(&b.mean));

    let mut degenerate = None;
    if distinct < 3 {
        degenerate = Some(format!("only {distinct} distinct values"));
    } else if comps.iter().any(|c| !(c.weight.is_finite() && c.mean.is_finite() && c.variance.is_finite())) {
        degenerate = Some("non-finite mixture parameters".into());
    } else if let Some(c) = comps.iter().find(|c| c.weight < 1e-6) {
        degenerate = Some(format!("component at {} collapsed (weight {:e})", c.mean, c.weight));
    }
    let mid = fallback_midpoint(&comps, &sorted);
    let mut fit = ThresholdFit {
        theta: mid,
        mixture: comps.clone(),
        trough_location: mid,
        left_trough: (comps[0].mean + comps[1].mean) / 2.0,
        degenerate,
        iterations,
        log_likelihood: ll,
    };
    if fit.degenerate.is_none() {
        match interior_minimum(&fit, comps[1].mean, comps[2].mean) {
            Some(x) => {
                fit.theta = x;
                fit.trough_location = x;
            }
            None => fit.degenerate = Some("no density trough between the two largest means".into()),
        }
        if let Some(x) = interior_minimum(&fit, comps[0].mean, comps[1].mean) {
            fit.left_trough = x;
        }
    }
    Ok(fit)
}

/// Midpoint of the two largest means among live components, or of the two
/// largest distinct samples when fewer than two components survive.
fn fallback_midpoint(comps: &[Component], distinct: &[f64]) -> f64 {
    let scale = distinct.iter().fold(1.0f64, |s, x| s.max(x.abs()));
    let mut live: Vec<f64> = comps.iter().filter(|c| c.weight >= 1e-6 && c.mean.is_finite()).map(|c| c.mean).collect();
    live.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * scale);
    let top = if live.len() >= 2 { &live[..] } else { distinct };
    match top.len() {
        0 => 0.0,
        1 => top[0],
        k => (top[k - 2] + top[k - 1]) / 2.0,
    }
}

/// Grid search refined by golden section; `None` if the minimum sits on an end point.
fn interior_minimum(fit: &ThresholdFit, a: f64, b: f64) -> Option<f64> {
    if !(b > a) {
        return None;
    }
    const GRID: usize = 2000;
    let h = (b - a) / GRID as f64;
    let (k, _) = (0..=GRID).map(|k| (k, fit.density(a + k as f64 * h))).fold((0, f64::INFINITY), |best, (k, d)| {
        if d < best.1 {
            (k, d)
        } else {
            best
        }
    });
    if k == 0 || k == GRID {
        return None;
    }
    let (mut lo, mut hi) = (a + (k - 1) as f64 * h, a + (k + 1) as f64 * h);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let x1 = hi - g * (hi - lo);
        let x2 = lo + g * (hi - lo);
        if fit.density(x1) < fit.density(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    Some((lo + hi) / 2.0)
}

fn kmeans_init(x: &[f64], cfg: &GmmConfig) -> Vec<Component> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut centres = vec![x[rng.gen_range(0..x.len())]];
    while centres.len() < 3 {
        let d2: Vec<f64> =
            x.iter().map(|&v| centres.iter().map(|c| (v - c) * (v - c)).fold(f64::INFINITY, f64::min)).collect();
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            centres.push(centres[0]);
            continue;
        }
        let mut r = rng.gen_range(0.0..total);
        let mut pick = x.len() - 1;
        for (i, d) in d2.iter().enumerate() {
            if r < *d {
                pick = i;
                break;
            }
            r -= d;
        }
        centres.push(x[pick]);
    }
    let mut assign = vec![0usize; x.len()];
    for _ in 0..100 {
        let mut changed = false;
        for (i, &v) in x.iter().enumerate() {
            let k = (0..3).min_by(|&a, &b| (v - centres[a]).abs().total_cmp(&(v - centres[b]).abs())).unwrap();
            if assign[i] != k {
                assign[i] = k;
                changed = true;
            }
        }
        for (k, c) in centres.iter_mut().enumerate() {
            let (s, cnt) =
                x.iter().zip(&assign).filter(|(_, a)| **a == k).fold((0.0, 0usize), |(s, c), (v, _)| (s + v, c + 1));
            if cnt > 0 {
                *c = s / cnt as f64;
            }
        }
        if !changed {
            break;
        }
    }
    let overall_var = variance(x).max(cfg.variance_floor);
    (0..3)
        .map(|k| {
            let members: Vec<f64> = x.iter().zip(&assign).filter(|(_, a)| **a == k).map(|(v, _)| *v).collect();
            if members.is_empty() {
                Component { weight: 1.0 / x.len() as f64, mean: centres[k], variance: overall_var }
            } else {
                Component {
                    weight: members.len() as f64 / x.len() as f64,
                    mean: centres[k],
                    variance: variance(&members).max(cfg.variance_floor),
                }
            }
        })
        .collect()
}

fn variance(x: &[f64]) -> f64 {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / x.len() as f64
}

fn em(x: &[f64], comps: &mut [Component], cfg: &GmmConfig) -> (usize, f64) {
    let n = x.len() as f64;
    let mut resp = vec![[0.0f64; 3]; x.len()];
    let mut prev = f64::NEG_INFINITY;
    let mut ll = prev;
    for it in 1..=cfg.max_iter {
        // E step in log space.
        let mut total = 0.0;
        for (r, &v) in resp.iter_mut().zip(x) {
            let mut logs = [0.0; 3];
            for (k, c) in comps.iter().enumerate() {
                let z = v - c.mean;
                logs[k] = c.weight.max(1e-300).ln()
                    - 0.5 * (2.0 * std::f64::consts::PI * c.variance).ln()
                    - 0.5 * z * z / c.variance;
            }
            let mx = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = logs.iter().map(|l| (l - mx).exp()).sum();
            for k in 0..3 {
                r[k] = (logs[k] - mx).exp() / s;
            }
            total += mx + s.ln();
        }
        ll = total / n;
        // M step.
        for (k, c) in comps.iter_mut().enumerate() {
            let nk: f64 = resp.iter().map(|r| r[k]).sum();
            if nk <= 0.0 {
                c.weight = 0.0;
                continue;
            }
            let mean = resp.iter().zip(x).map(|(r, v)| r[k] * v).sum::<f64>() / nk;
            let var = resp.iter().zip(x).map(|(r, v)| r[k] * (v - mean) * (v - mean)).sum::<f64>() / nk;
            *c = Component { weight: nk / n, mean, variance: var.max(cfg.variance_floor) };
        }
        if (ll - prev).abs() < cfg.tol {
            return (it, ll);
        }
        prev = ll;
    }
    (cfg.max_iter, ll)
}
