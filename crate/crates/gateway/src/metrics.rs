use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

/// Buckets per doubling of latency.
const SUB_BUCKETS: usize = 8;
/// Upper edge of the last finite bucket is 2^30 µs, about 18 minutes.
const OCTAVES: usize = 30;
const BUCKETS: usize = OCTAVES * SUB_BUCKETS + 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ErrorClass {
    BadRequest,
    PromptTooLarge,
    UpstreamUnavailable,
    UpstreamProtocol,
    Internal,
}

impl ErrorClass {
    pub const ALL: [ErrorClass; 5] = [
        ErrorClass::BadRequest,
        ErrorClass::PromptTooLarge,
        ErrorClass::UpstreamUnavailable,
        ErrorClass::UpstreamProtocol,
        ErrorClass::Internal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorClass::BadRequest => "bad_request",
            ErrorClass::PromptTooLarge => "prompt_too_large",
            ErrorClass::UpstreamUnavailable => "upstream_unavailable",
            ErrorClass::UpstreamProtocol => "upstream_protocol",
            ErrorClass::Internal => "internal",
        }
    }
}

/// Lock-free request counters and a log-spaced latency histogram.
pub struct Metrics {
    requests: AtomicU64,
    errors: [AtomicU64; 5],
    buckets: Vec<AtomicU64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorCounts {
    pub bad_request: u64,
    pub prompt_too_large: u64,
    pub upstream_unavailable: u64,
    pub upstream_protocol: u64,
    pub internal: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyQuantiles {
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSnapshot {
    pub requests: u64,
    pub errors: ErrorCounts,
    pub latency_ms: LatencyQuantiles,
}

fn bucket_upper_us(i: usize) -> f64 {
    2f64.powf(i as f64 / SUB_BUCKETS as f64)
}

fn bucket_of(latency: Duration) -> usize {
    let us = latency.as_secs_f64() * 1e6;
    if us <= 1.0 {
        return 0;
    }
    let idx = (us.log2() * SUB_BUCKETS as f64).ceil() as usize;
    idx.min(BUCKETS - 1)
}

impl Default for Metrics {
    fn default() -> Self {
        Metrics {
            requests: AtomicU64::new(0),
            errors: Default::default(),
            buckets: (0..BUCKETS).map(|_| AtomicU64::new(0)).collect(),
        }
    }
}

impl Metrics {
    pub fn record(&self, latency: Duration, error: Option<ErrorClass>) {
        self.requests.fetch_add(1, Ordering::Relaxed);
        if let Some(class) = error {
            self.errors[class as usize].fetch_add(1, Ordering::Relaxed);
        }
        self.buckets[bucket_of(latency)].fetch_add(1, Ordering::Relaxed);
    }

    /// Quantile as the upper edge of the bucket holding rank ⌈q·n⌉, in ms;
    /// 0 before any request.
    fn quantile(counts: &[u64], q: f64) -> f64 {
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return 0.0;
        }
        let rank = ((q * n as f64).ceil() as u64).max(1);
        let mut seen = 0;
        for (i, &c) in counts.iter().enumerate() {
            seen += c;
            if seen >= rank {
                return bucket_upper_us(i) / 1000.0;
            }
        }
        bucket_upper_us(BUCKETS - 1) / 1000.0
    }

    pub fn snapshot(&self) -> MetricsSnapshot {
        let counts: Vec<u64> = self.buckets.iter().map(|b| b.load(Ordering::Relaxed)).collect();
        let err = |c: ErrorClass| self.errors[c as usize].load(Ordering::Relaxed);
        MetricsSnapshot {
            requests: self.requests.load(Ordering::Relaxed),
            errors: ErrorCounts {
                bad_request: err(ErrorClass::BadRequest),
                prompt_too_large: err(ErrorClass::PromptTooLarge),
                upstream_unavailable: err(ErrorClass::UpstreamUnavailable),
                upstream_protocol: err(ErrorClass::UpstreamProtocol),
                internal: err(ErrorClass::Internal),
            },
            latency_ms: LatencyQuantiles {
                p50: Self::quantile(&counts, 0.5),
                p90: Self::quantile(&counts, 0.9),
                p99: Self::quantile(&counts, 0.99),
            },
        }
    }
}
