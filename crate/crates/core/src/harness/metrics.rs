//! Per-episode metrics, reward normalization and the convergence
//! statistic.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const METRICS_HEADER: &str = "episode,return,norm_return,mean_energy_J,violations,wall_s";

/// Minimum gain of the late over the early normalized return for a run to
/// count as converged.
pub const CONVERGENCE_THRESHOLD: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub episode: usize,
    pub ret: f64,
    pub norm_ret: f64,
    /// Episode energy divided by the number of devices.
    pub mean_energy_j: f64,
    pub violations: usize,
    pub wall_s: f64,
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{METRICS_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.episode, r.ret, r.norm_ret, r.mean_energy_j, r.violations, r.wall_s
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Min-max scaling onto `[0, 1]`; a constant trace maps to 0.5.
pub fn normalize_rewards(trace: &[f64]) -> Result<Vec<f64>> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let lo = trace.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = trace.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::NonFinite("reward trace"));
    }
    Ok(if hi > lo {
        trace.iter().map(|r| (r - lo) / (hi - lo)).collect()
    } else {
        vec![0.5; trace.len()]
    })
}

/// Episodes in a tenth of the trace, at least one.
pub fn tenth(len: usize) -> usize {
    (len / 10).max(1)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    /// Mean normalized return over the first tenth of the episodes.
    pub early: f64,
    /// Mean over the last tenth.
    pub late: f64,
    pub gain: f64,
    pub converged: bool,
}

pub fn convergence(normalized: &[f64]) -> Result<Convergence> {
    if normalized.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let k = tenth(normalized.len());
    let early = mean(&normalized[..k]);
    let late = mean(&normalized[normalized.len() - k..]);
    let gain = late - early;
    Ok(Convergence {
        early,
        late,
        gain,
        converged: gain >= CONVERGENCE_THRESHOLD,
    })
}

/// Mean of the last tenth of `normalized`.
pub fn plateau(normalized: &[f64]) -> Result<f64> {
    if normalized.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let k = tenth(normalized.len());
    Ok(mean(&normalized[normalized.len() - k..]))
}
