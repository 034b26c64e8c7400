//! Result files written by the studies.
//!
//! | file | content |
//! |---|---|
//! | `networks.jsonl` | one sampled network per line |
//! | `results.csv` | one row per network (or sweep pair) |
//! | `summary.json` | headline numbers |
//! | `hist_*.csv` | binned densities of `log chi_osc` |
//! | `curves.csv` | per-grid-point sweep values |

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    Crossing, EtaStudyResult, GlobalStudyResult, Histogram, SweepPair, SweepStudyResult, SwitchPoint, HISTOGRAM_BINS,
};
use crate::error::Result;

#[derive(Serialize)]
struct ResultRow {
    seed: u64,
    lose: Option<bool>,
    chi_reg: Option<f64>,
    chi_pp: Option<f64>,
    log_chi_osc: Option<f64>,
    runtime_ms: u64,
    index: usize,
    eta: Option<f64>,
    error: Option<String>,
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

fn write_jsonl<T: Serialize>(path: &Path, rows: impl Iterator<Item = T>) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    for row in rows {
        serde_json::to_writer(&mut f, &row)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

fn write_rows<T: Serialize>(path: &Path, rows: impl Iterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_histogram(path: &Path, h: &Histogram) -> Result<()> {
    #[derive(Serialize)]
    struct Bin {
        lo: f64,
        hi: f64,
        density: f64,
    }
    write_rows(
        path,
        h.density.iter().enumerate().map(|(k, &density)| Bin { lo: h.edges[k], hi: h.edges[k + 1], density }),
    )
}

pub fn write_global(dir: &Path, res: &GlobalStudyResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    #[derive(Serialize)]
    struct Line<'a> {
        index: usize,
        seed: u64,
        network: &'a crate::model::Network,
        x0: &'a [f64],
    }
    write_jsonl(
        &dir.join("networks.jsonl"),
        res.records.iter().map(|r| Line { index: r.index, seed: r.seed, network: &r.network, x0: &r.x0 }),
    )?;
    write_rows(
        &dir.join("results.csv"),
        res.records.iter().map(|r| ResultRow {
            seed: r.seed,
            lose: r.lose,
            chi_reg: r.indices.map(|i| i.chi_reg),
            chi_pp: r.indices.map(|i| i.chi_pp),
            log_chi_osc: r.indices.map(|i| i.log_chi_osc),
            runtime_ms: r.runtime_ms,
            index: r.index,
            eta: None,
            error: r.error.clone(),
        }),
    )?;
    #[derive(Serialize)]
    struct Summary<'a> {
        config: &'a super::GlobalStudyConfig,
        #[serde(flatten)]
        summary: &'a super::GlobalSummary,
    }
    write_json(&dir.join("summary.json"), &Summary { config: &res.config, summary: &res.summary })?;
    let (lose, stable) = (res.lose_samples(), res.stable_samples());
    let h = Histogram::shared(&[&lose, &stable], HISTOGRAM_BINS);
    write_histogram(&dir.join("hist_lose.csv"), &h[0])?;
    write_histogram(&dir.join("hist_stable.csv"), &h[1])?;
    Ok(())
}

/// Sweep end points together with the threshold they were selected with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPairsFile {
    pub theta: f64,
    pub pairs: Vec<SweepPair>,
}

pub fn write_sweep_pairs(path: &Path, file: &SweepPairsFile) -> Result<()> {
    write_json(path, file)
}

pub fn read_sweep_pairs(path: &Path) -> Result<SweepPairsFile> {
    Ok(serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?)
}

pub fn write_sweep(dir: &Path, res: &SweepStudyResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    #[derive(Serialize)]
    struct PairRow {
        pair: usize,
        status: &'static str,
        alpha_lose: Option<f64>,
        alpha_chi: Option<f64>,
        error: Option<String>,
    }
    write_rows(
        &dir.join("results.csv"),
        res.records.iter().enumerate().map(|(k, r)| {
            let (status, alpha_lose) = match r.alpha_lose {
                SwitchPoint::At { alpha } => ("single_switch", Some(alpha)),
                SwitchPoint::NoSwitch => ("no_switch", None),
                SwitchPoint::MultiSwitch { .. } => ("multi_switch", None),
            };
            let alpha_chi = match r.alpha_chi {
                Crossing::At { alpha } => Some(alpha),
                Crossing::Undetected => None,
            };
            PairRow { pair: k, status, alpha_lose, alpha_chi, error: r.error.clone() }
        }),
    )?;
    #[derive(Serialize)]
    struct CurveRow {
        pair: usize,
        alpha: f64,
        lose: bool,
        log_chi_osc: Option<f64>,
    }
    write_rows(
        &dir.join("curves.csv"),
        res.records.iter().enumerate().flat_map(|(k, r)| {
            r.alpha_grid.iter().enumerate().map(move |(j, &alpha)| CurveRow {
                pair: k,
                alpha,
                lose: r.lose_curve[j],
                log_chi_osc: r.chi_curve.get(j).copied().flatten(),
            })
        }),
    )?;
    #[derive(Serialize)]
    struct Summary<'a> {
        config: &'a super::SweepConfig,
        #[serde(flatten)]
        summary: &'a super::SweepSummary,
    }
    write_json(&dir.join("summary.json"), &Summary { config: &res.config, summary: &res.summary })
}

pub fn write_eta(dir: &Path, res: &EtaStudyResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_rows(
        &dir.join("results.csv"),
        res.records.iter().map(|r| ResultRow {
            seed: r.seed,
            lose: r.lose,
            chi_reg: r.indices.map(|i| i.chi_reg),
            chi_pp: r.indices.map(|i| i.chi_pp),
            log_chi_osc: r.indices.map(|i| i.log_chi_osc),
            runtime_ms: r.runtime_ms,
            index: r.index,
            eta: Some(r.eta),
            error: r.error.clone(),
        }),
    )?;
    #[derive(Serialize)]
    struct Summary<'a> {
        config: &'a super::EtaStudyConfig,
        per_eta: &'a [super::EtaSummary],
    }
    write_json(&dir.join("summary.json"), &Summary { config: &res.config, per_eta: &res.summaries })?;
    let samples: Vec<Vec<f64>> = res.config.eta_list.iter().map(|&e| res.samples(e)).collect();
    let refs: Vec<&[f64]> = samples.iter().map(Vec::as_slice).collect();
    for (eta, h) in res.config.eta_list.iter().zip(Histogram::shared(&refs, HISTOGRAM_BINS)) {
        write_histogram(&dir.join(format!("hist_eta_{eta}.csv")), &h)?;
    }
    Ok(())
}
