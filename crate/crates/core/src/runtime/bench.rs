use std::hint::black_box;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::{Model, Tensor};

/// Single-window inference timings in milliseconds.
#[derive(Clone, Debug, PartialEq)]
pub struct LatencyStats {
    pub iterations: usize,
    pub warmup: usize,
    /// Number of timings that entered the statistics (always `iterations`).
    pub timed: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
    pub include_preprocessing: bool,
}

impl LatencyStats {
    pub fn from_samples(mut ms: Vec<f64>, warmup: usize, include_preprocessing: bool) -> Result<Self> {
        if ms.is_empty() {
            return Err(Error::Usage("latency benchmark needs at least one iteration".into()));
        }
        ms.sort_by(f64::total_cmp);
        let n = ms.len();
        // nearest-rank percentile
        let pct = |p: f64| ms[((p * n as f64).ceil() as usize).clamp(1, n) - 1];
        Ok(LatencyStats {
            iterations: n,
            warmup,
            timed: n,
            mean_ms: ms.iter().sum::<f64>() / n as f64,
            p50_ms: pct(0.50),
            p95_ms: pct(0.95),
            min_ms: ms[0],
            max_ms: ms[n - 1],
            include_preprocessing,
        })
    }

    pub fn summary_line(&self) -> String {
        format!(
            "latency mean_ms={:.3} p50_ms={:.3} p95_ms={:.3} min_ms={:.3} max_ms={:.3} iters={} warmup={} preprocessing={}",
            self.mean_ms,
            self.p50_ms,
            self.p95_ms,
            self.min_ms,
            self.max_ms,
            self.iterations,
            self.warmup,
            self.include_preprocessing
        )
    }
}

/// Times `iterations` single-window forward passes after `warmup` untimed
/// ones. With `include_preprocessing` each timing covers normalization of
/// the raw window as well; otherwise the window is normalized once up front.
pub fn bench_latency(
    model: &Model,
    window: &Tensor,
    iterations: usize,
    warmup: usize,
    include_preprocessing: bool,
) -> Result<LatencyStats> {
    if iterations == 0 {
        return Err(Error::Usage("iterations must be ≥ 1".into()));
    }
    let normalized = model.normalizer.apply(window)?;
    let run = || -> Result<Tensor> {
        let (logits, _) = if include_preprocessing {
            model.forward_window(black_box(window))?
        } else {
            model.forward_normalized(black_box(&normalized))?
        };
        Ok(logits)
    };
    for _ in 0..warmup {
        black_box(run()?);
    }
    let mut ms = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let start = Instant::now();
        black_box(run()?);
        ms.push(start.elapsed().as_secs_f64() * 1e3);
    }
    LatencyStats::from_samples(ms, warmup, include_preprocessing)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sample_stats_collapse() {
        let s = LatencyStats::from_samples(vec![3.5], 0, false).unwrap();
        assert_eq!((s.mean_ms, s.p50_ms, s.p95_ms, s.min_ms, s.max_ms), (3.5, 3.5, 3.5, 3.5, 3.5));
    }

    #[test]
    fn percentiles_are_ordered() {
        let s = LatencyStats::from_samples((1..=100).rev().map(|v| v as f64).collect(), 5, true).unwrap();
        assert_eq!((s.min_ms, s.p50_ms, s.p95_ms, s.max_ms), (1.0, 50.0, 95.0, 100.0));
        assert_eq!(s.timed, 100);
        assert!(LatencyStats::from_samples(vec![], 0, true).is_err());
    }
}
