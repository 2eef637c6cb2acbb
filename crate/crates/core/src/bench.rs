//! Wall-clock stage timing with warm-up, median and p95.

use serde::{Deserialize, Serialize};
use std::time::Instant;

pub const MIN_WARMUP: usize = 2;
pub const MIN_ITERATIONS: usize = 5;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum BenchError {
    #[error("need at least {MIN_WARMUP} warm-up runs, got {0}")]
    Warmup(usize),
    #[error("need at least {MIN_ITERATIONS} timed iterations, got {0}")]
    Iterations(usize),
    #[error("stage {0:?} listed twice")]
    Duplicate(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchSettings {
    pub warmup: usize,
    pub iterations: usize,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self { warmup: MIN_WARMUP, iterations: MIN_ITERATIONS }
    }
}

impl BenchSettings {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.warmup < MIN_WARMUP {
            return Err(BenchError::Warmup(self.warmup));
        }
        if self.iterations < MIN_ITERATIONS {
            return Err(BenchError::Iterations(self.iterations));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub samples_ms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub resolution: [usize; 2],
    pub warmup: usize,
    pub iterations: usize,
    pub machine: String,
    pub stages: Vec<StageTiming>,
}

impl BenchReport {
    pub fn stage(&self, name: &str) -> Option<&StageTiming> {
        self.stages.iter().find(|s| s.stage == name)
    }
}

/// Nearest-rank percentile of an ascending-sorted slice.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

pub fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Times `f` after the warm-up runs. Timings are floored at 1 ns so they
/// stay strictly positive.
pub fn time_stage(name: &str, settings: &BenchSettings, mut f: impl FnMut()) -> StageTiming {
    for _ in 0..settings.warmup {
        f();
    }
    let mut samples: Vec<f64> = (0..settings.iterations)
        .map(|_| {
            let start = Instant::now();
            f();
            (start.elapsed().as_secs_f64() * 1e3).max(1e-6)
        })
        .collect();
    let raw = samples.clone();
    samples.sort_by(f64::total_cmp);
    StageTiming { stage: name.to_string(), median_ms: median(&samples), p95_ms: percentile(&samples, 0.95), samples_ms: raw }
}

/// A named stage body for [`run_bench`].
pub type BenchStage<'a> = (&'a str, Box<dyn FnMut() + 'a>);

/// Runs every named stage in order and collects the report.
pub fn run_bench(
    stages: Vec<BenchStage<'_>>,
    settings: &BenchSettings,
    resolution: [usize; 2],
    machine: &str,
) -> Result<BenchReport, BenchError> {
    settings.validate()?;
    let mut seen = std::collections::HashSet::new();
    for (name, _) in &stages {
        if !seen.insert(*name) {
            return Err(BenchError::Duplicate(name.to_string()));
        }
    }
    let timings = stages.into_iter().map(|(name, f)| time_stage(name, settings, f)).collect();
    Ok(BenchReport {
        resolution,
        warmup: settings.warmup,
        iterations: settings.iterations,
        machine: machine.to_string(),
        stages: timings,
    })
}
