//! Benchmark harness: times key generation, sealing, and opening against the
//! number of attributes (n-of-n policies over n attributes, so decryption
//! touches every leaf), and fits a per-phase linear trend to the means.
//!
//! Timings use the monotonic clock and always run on system entropy.

use crate::authz::{Clock, SystemClock};
use crate::cpabe::{keygen, setup};
use crate::envelope::{open, seal, RecordMeta};
use crate::fixtures::and_chain;
use rand::rngs::OsRng;
use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("benchmark domain: {0}")]
    Domain(String),
    #[error("csv parse (line {line}): {message}")]
    Parse { line: usize, message: String },
    #[error("bench crypto failure: {0}")]
    Crypto(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Keygen,
    Encrypt,
    Decrypt,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Keygen => "keygen",
            Phase::Encrypt => "encrypt",
            Phase::Decrypt => "decrypt",
        }
    }

    pub fn parse(text: &str) -> Option<Phase> {
        match text {
            "keygen" => Some(Phase::Keygen),
            "encrypt" => Some(Phase::Encrypt),
            "decrypt" => Some(Phase::Decrypt),
            _ => None,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One timed trial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchRow {
    pub phase: Phase,
    pub attr_count: u32,
    /// 1-based; the warm-up trial is discarded and not numbered.
    pub trial: u32,
    pub elapsed_us: u64,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub max_attrs: u32,
    pub trials: u32,
    pub payload_bytes: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            max_attrs: 10,
            trials: 20,
            payload_bytes: 1024,
        }
    }
}

/// Ordinary-least-squares fit of mean elapsed time against attribute count.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendFit {
    pub phase: Phase,
    pub slope_us_per_attr: f64,
    pub intercept_us: f64,
    pub r_squared: f64,
}

/// Per-(phase, count) aggregate, reported alongside the fit.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub phase: Phase,
    pub attr_count: u32,
    pub mean_us: f64,
    pub median_us: f64,
}

fn time_us(f: impl FnOnce()) -> u64 {
    let start = Instant::now();
    f();
    (start.elapsed().as_micros().max(1)) as u64
}

/// Runs the full grid: for each attribute count 1..=max_attrs, `trials`
/// timed runs of each phase after one discarded warm-up.
pub fn bench_run(config: &BenchConfig) -> Result<Vec<BenchRow>, BenchError> {
    if config.max_attrs < 2 {
        return Err(BenchError::Domain("max_attrs must be at least 2".into()));
    }
    if config.trials < 5 {
        return Err(BenchError::Domain("trials must be at least 5".into()));
    }
    let mut rng = OsRng;
    let (pk, msk) = setup(&mut rng);
    let payload = vec![0xa5u8; config.payload_bytes];
    let mut rows = Vec::with_capacity((3 * config.max_attrs * config.trials) as usize);

    for n in 1..=config.max_attrs {
        let (attrs, tree) = and_chain(n as usize);
        let meta = RecordMeta {
            content_type: "application/octet-stream".into(),
            created_at: SystemClock.now(),
            owner_id: "bench".into(),
        };

        let mut last_key = None;
        for trial in 0..=config.trials {
            let mut key = None;
            let us = time_us(|| {
                key = Some(keygen(&pk, &msk, &attrs, &mut rng).expect("nonempty attrs"));
            });
            last_key = key;
            if trial > 0 {
                rows.push(BenchRow {
                    phase: Phase::Keygen,
                    attr_count: n,
                    trial,
                    elapsed_us: us,
                });
            }
        }
        let sk = last_key.expect("at least one keygen trial");

        let mut last_env = None;
        for trial in 0..=config.trials {
            let mut env = None;
            let us = time_us(|| {
                env = Some(
                    seal(&pk, &tree, &payload, meta.clone(), &mut rng).expect("payload in bounds"),
                );
            });
            last_env = env;
            if trial > 0 {
                rows.push(BenchRow {
                    phase: Phase::Encrypt,
                    attr_count: n,
                    trial,
                    elapsed_us: us,
                });
            }
        }
        let env = last_env.expect("at least one seal trial");

        for trial in 0..=config.trials {
            let mut out = None;
            let us = time_us(|| {
                out = Some(open(&pk, &sk, &env));
            });
            out.expect("closure ran")
                .map_err(|e| BenchError::Crypto(e.to_string()))?;
            if trial > 0 {
                rows.push(BenchRow {
                    phase: Phase::Decrypt,
                    attr_count: n,
                    trial,
                    elapsed_us: us,
                });
            }
        }
    }

    rows.sort_by_key(|r| (r.phase.as_str(), r.attr_count, r.trial));
    Ok(rows)
}

/// Deterministic CSV: `phase,attr_count,trial,elapsed_us`, rows sorted by
/// (phase, attr_count, trial).
pub fn rows_to_csv(rows: &[BenchRow]) -> String {
    let mut sorted: Vec<&BenchRow> = rows.iter().collect();
    sorted.sort_by_key(|r| (r.phase.as_str(), r.attr_count, r.trial));
    let mut out = String::from("phase,attr_count,trial,elapsed_us\n");
    for row in sorted {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.phase, row.attr_count, row.trial, row.elapsed_us
        ));
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<BenchRow>, BenchError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line.trim() != "phase,attr_count,trial,elapsed_us" {
                return Err(BenchError::Parse {
                    line: 1,
                    message: format!("unexpected header {line:?}"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(BenchError::Parse {
                line: i + 1,
                message: "expected 4 columns".into(),
            });
        }
        let phase = Phase::parse(parts[0]).ok_or_else(|| BenchError::Parse {
            line: i + 1,
            message: format!("unknown phase {:?}", parts[0]),
        })?;
        let parse_num = |s: &str| {
            s.trim().parse::<u64>().map_err(|e| BenchError::Parse {
                line: i + 1,
                message: e.to_string(),
            })
        };
        rows.push(BenchRow {
            phase,
            attr_count: parse_num(parts[1])? as u32,
            trial: parse_num(parts[2])? as u32,
            elapsed_us: parse_num(parts[3])?,
        });
    }
    Ok(rows)
}

/// Mean and median per (phase, attribute count).
pub fn summarize(rows: &[BenchRow]) -> Vec<PhasePoint> {
    let mut grouped: BTreeMap<(Phase, u32), Vec<u64>> = BTreeMap::new();
    for row in rows {
        grouped
            .entry((row.phase, row.attr_count))
            .or_default()
            .push(row.elapsed_us);
    }
    grouped
        .into_iter()
        .map(|((phase, attr_count), mut samples)| {
            samples.sort_unstable();
            let mean = samples.iter().sum::<u64>() as f64 / samples.len() as f64;
            let median = if samples.len() % 2 == 1 {
                samples[samples.len() / 2] as f64
            } else {
                (samples[samples.len() / 2 - 1] + samples[samples.len() / 2]) as f64 / 2.0
            };
            PhasePoint {
                phase,
                attr_count,
                mean_us: mean,
                median_us: median,
            }
        })
        .collect()
}

/// Least-squares line through the per-count means of each phase present.
pub fn fit_linear(rows: &[BenchRow]) -> Result<Vec<TrendFit>, BenchError> {
    let points = summarize(rows);
    let mut by_phase: BTreeMap<Phase, Vec<(f64, f64)>> = BTreeMap::new();
    for p in &points {
        by_phase
            .entry(p.phase)
            .or_default()
            .push((p.attr_count as f64, p.mean_us));
    }
    let mut fits = Vec::new();
    for (phase, xy) in by_phase {
        if xy.len() < 2 {
            return Err(BenchError::Domain(format!(
                "phase {phase} has a single attribute count; a line needs two"
            )));
        }
        let n = xy.len() as f64;
        let x_mean = xy.iter().map(|(x, _)| x).sum::<f64>() / n;
        let y_mean = xy.iter().map(|(_, y)| y).sum::<f64>() / n;
        let sxx: f64 = xy.iter().map(|(x, _)| (x - x_mean).powi(2)).sum();
        let sxy: f64 = xy.iter().map(|(x, y)| (x - x_mean) * (y - y_mean)).sum();
        let slope = sxy / sxx;
        let intercept = y_mean - slope * x_mean;
        let ss_res: f64 = xy
            .iter()
            .map(|(x, y)| (y - (intercept + slope * x)).powi(2))
            .sum();
        let ss_tot: f64 = xy.iter().map(|(_, y)| (y - y_mean).powi(2)).sum();
        let r_squared = if ss_tot == 0.0 {
            // constant means are fit exactly by the constant line
            1.0
        } else {
            (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
        };
        fits.push(TrendFit {
            phase,
            slope_us_per_attr: slope,
            intercept_us: intercept,
            r_squared,
        });
    }
    Ok(fits)
}
