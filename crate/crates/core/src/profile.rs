//! Wall-clock latency of single inferences on the host.
//!
//! Each call is timed on its own with a monotonic clock. The mean cost of
//! timing an empty call is subtracted from every sample. Profiling runs on
//! the calling thread only.

use std::hint::black_box;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_vector, FeatureSet, Scaler};
use crate::models::Classifier;
use crate::signal::Window;

pub const MIN_REPS: usize = 30;
pub const WARMUP_CALLS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub mean_us: f64,
    pub p50_us: f64,
    pub p99_us: f64,
    pub calls: usize,
}

impl LatencyStats {
    /// Nearest-rank percentiles over the samples (microseconds).
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("latency samples".into()));
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let rank = |p: f64| s[((p * s.len() as f64).ceil() as usize).clamp(1, s.len()) - 1];
        Ok(Self {
            mean_us: s.iter().sum::<f64>() / s.len() as f64,
            p50_us: rank(0.50),
            p99_us: rank(0.99),
            calls: s.len(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyProfile {
    /// Scaled vector in, prediction out.
    pub inference: LatencyStats,
    /// Feature extraction, scaling and inference.
    pub pipeline: LatencyStats,
    /// Mean cost of timing an empty call, already subtracted.
    pub overhead_us: f64,
}

fn time_us(f: impl FnOnce()) -> f64 {
    let t = Instant::now();
    f();
    t.elapsed().as_secs_f64() * 1e6
}

fn measure(calls: usize, mut f: impl FnMut(usize), overhead: f64) -> Vec<f64> {
    for i in 0..WARMUP_CALLS {
        f(i);
    }
    (0..calls)
        .map(|i| (time_us(|| f(i)) - overhead).max(0.0))
        .collect()
}

pub fn empty_call_overhead(calls: usize) -> f64 {
    let samples = measure(
        calls.max(1),
        |i| {
            black_box(i);
        },
        0.0,
    );
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// Times `reps × windows.len()` calls of each kind after warm-up.
pub fn profile_latency<M: Classifier + ?Sized>(
    model: &M,
    windows: &[&Window],
    feature_set: &FeatureSet,
    scaler: &Scaler,
    reps: usize,
) -> Result<LatencyProfile> {
    if reps < MIN_REPS {
        return Err(Error::InvalidInput(format!(
            "profiling needs at least {MIN_REPS} repetitions"
        )));
    }
    if windows.is_empty() {
        return Err(Error::EmptyInput("profiling windows".into()));
    }
    let vectors: Vec<Vec<f64>> = windows
        .iter()
        .map(|w| scaler.apply(&extract_vector(w, feature_set)?))
        .collect::<Result<_>>()?;
    for v in &vectors {
        model.predict(v)?;
    }
    let calls = reps * windows.len();
    let overhead = empty_call_overhead(calls);
    let n = windows.len();
    let inference = measure(
        calls,
        |i| {
            let _ = black_box(model.predict(black_box(&vectors[i % n])));
        },
        overhead,
    );
    let pipeline = measure(
        calls,
        |i| {
            let w = black_box(windows[i % n]);
            let p = extract_vector(w, feature_set)
                .and_then(|f| scaler.apply(&f))
                .and_then(|v| model.predict(&v));
            let _ = black_box(p);
        },
        overhead,
    );
    Ok(LatencyProfile {
        inference: LatencyStats::from_samples(&inference)?,
        pipeline: LatencyStats::from_samples(&pipeline)?,
        overhead_us: overhead,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_percentiles() {
        let s: Vec<f64> = (1..=100).map(f64::from).collect();
        let st = LatencyStats::from_samples(&s).unwrap();
        assert_eq!(st.p50_us, 50.0);
        assert_eq!(st.p99_us, 99.0);
        assert_eq!(st.mean_us, 50.5);
        let one = LatencyStats::from_samples(&[3.0]).unwrap();
        assert_eq!((one.p50_us, one.p99_us), (3.0, 3.0));
        assert!(LatencyStats::from_samples(&[]).is_err());
    }

    #[test]
    fn overhead_is_small_and_non_negative() {
        let o = empty_call_overhead(1000);
        assert!((0.0..1000.0).contains(&o));
    }
}
