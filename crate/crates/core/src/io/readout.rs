//! Differential fluorescence readout: P(t) from counts with and without a
//! final π-pulse. Backgrounds common to both channels cancel in the
//! difference.

use serde::{Deserialize, Serialize};

use super::csv::parse_table;
use crate::error::{Error, Result};
use crate::fit::CurveSeries;

/// Mean counts per repetition at time `t` (µs).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawReadoutRecord {
    pub t: f64,
    pub f_no_pi: f64,
    pub f_pi: f64,
    pub repetitions: Option<u64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Divide by the difference at the earliest time, so P starts at 1.
    #[default]
    Earliest,
    /// Divide by the mean no-π fluorescence over the last few points.
    Late,
}

/// Reads a `t,f_no_pi,f_pi[,reps]` table with t in µs.
pub fn parse_readout(text: &str) -> Result<Vec<RawReadoutRecord>> {
    let t = parse_table(text)?;
    let col = |name: &str| {
        t.column_index(name)
            .ok_or_else(|| Error::config(format!("readout table lacks column '{name}'")))
    };
    let (it, ia, ib) = (col("t")?, col("f_no_pi")?, col("f_pi")?);
    if t.units[it] != "us" {
        return Err(Error::config(format!("readout times must be in us, got '{}'", t.units[it])));
    }
    for k in [ia, ib] {
        if t.units[k] != "counts" {
            return Err(Error::config(format!(
                "fluorescence columns must be in counts, got '{}'",
                t.units[k]
            )));
        }
    }
    let times = t.column(it)?;
    let a = t.column(ia)?;
    let b = t.column(ib)?;
    let reps = match t.column_index("reps") {
        Some(k) => Some(t.column(k)?),
        None => None,
    };
    (0..times.len())
        .map(|i| {
            let repetitions = match &reps {
                Some(r) if r[i] >= 1.0 && r[i].fract() == 0.0 => Some(r[i] as u64),
                Some(r) => return Err(Error::config(format!("repetition count must be a positive integer, got {}", r[i]))),
                None => None,
            };
            Ok(RawReadoutRecord {
                t: times[i],
                f_no_pi: a[i],
                f_pi: b[i],
                repetitions,
            })
        })
        .collect()
}

/// `P(t) = (F_no_π − F_π)/normalizer` with Poisson count errors.
///
/// Counts are means per repetition, so the variance of a channel is F/reps.
/// Records sharing a time are pooled.
pub fn ingest_differential(records: &[RawReadoutRecord], normalization: Normalization, late_points: usize) -> Result<CurveSeries> {
    if records.len() < 2 {
        return Err(Error::domain(format!("need >= 2 readout records, got {}", records.len())));
    }
    for r in records {
        if !(r.f_no_pi >= 0.0) || !(r.f_pi >= 0.0) || !r.f_no_pi.is_finite() || !r.f_pi.is_finite() {
            return Err(Error::domain(format!("counts must be finite and >= 0 at t = {}", r.t)));
        }
        if !r.t.is_finite() {
            return Err(Error::domain("non-finite readout time"));
        }
        if r.repetitions == Some(0) {
            return Err(Error::domain(format!("zero repetitions at t = {}", r.t)));
        }
    }
    if let Some(w) = records.windows(2).find(|w| w[1].t < w[0].t) {
        return Err(Error::domain(format!(
            "readout times must be nondecreasing ({} then {})",
            w[0].t, w[1].t
        )));
    }
    // pool equal times: (t, Σ reps·F_a, Σ reps·F_b, Σ reps)
    let mut pooled: Vec<(f64, f64, f64, f64)> = Vec::new();
    for r in records {
        let n = r.repetitions.unwrap_or(1) as f64;
        match pooled.last_mut() {
            Some(p) if p.0 == r.t => {
                p.1 += n * r.f_no_pi;
                p.2 += n * r.f_pi;
                p.3 += n;
            }
            _ => pooled.push((r.t, n * r.f_no_pi, n * r.f_pi, n)),
        }
    }
    if pooled.len() < 2 {
        return Err(Error::domain("need >= 2 distinct readout times"));
    }
    let diff: Vec<(f64, f64)> = pooled
        .iter()
        .map(|(_, a, b, n)| ((a - b) / n, ((a + b) / (n * n)).sqrt()))
        .collect();
    let (norm, norm_sigma) = match normalization {
        Normalization::Earliest => diff[0],
        Normalization::Late => {
            let k = late_points.clamp(1, pooled.len());
            let tail = &pooled[pooled.len() - k..];
            let (sum, reps) = tail.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.1, acc.1 + p.3));
            (sum / reps, (sum / (reps * reps)).sqrt())
        }
    };
    if !(norm > 0.0) {
        return Err(Error::domain(format!(
            "normalizer {norm} is not positive; the data look inverted or unpolarized"
        )));
    }
    let mut y = Vec::with_capacity(diff.len());
    let mut sigma = Vec::with_capacity(diff.len());
    for (i, (d, sd)) in diff.iter().enumerate() {
        let p = d / norm;
        y.push(p);
        let s = if i == 0 && normalization == Normalization::Earliest {
            sd / norm
        } else {
            (sd * sd + p * p * norm_sigma * norm_sigma).sqrt() / norm
        };
        sigma.push(s.max(f64::MIN_POSITIVE));
    }
    let x = pooled.iter().map(|p| p.0).collect();
    Ok(CurveSeries::new(x, y, Some(sigma), "us", "1")?
        .with_meta("quantity", "differential polarization")
        .with_meta(
            "normalization",
            match normalization {
                Normalization::Earliest => "earliest".to_string(),
                Normalization::Late => format!("late({late_points})"),
            },
        ))
}
