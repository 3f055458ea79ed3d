use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use crate::store::IoStats;

/// Per-query instrumentation: I/O split, record and pair counters, per-node
/// completion times, first-record latency, and the contract counters the
/// tests assert on. Rendered as the key/value metrics trailer.
#[derive(Debug)]
pub struct QueryMetrics {
    pub io: IoStats,
    pub records_scanned: AtomicU64,
    pub records_out: AtomicU64,
    pub pairs_compared: AtomicU64,
    /// Emissions observed from a blocking operator before its draining child
    /// completed. Always zero when the executor honors the contract.
    pub blocking_violations: AtomicU64,
    /// Workers that stopped because the consumer went away.
    pub cancelled_workers: AtomicU64,
    started: Instant,
    first_record_nanos: AtomicU64,
    finished_nanos: AtomicU64,
    node_completions: Mutex<Vec<(String, Duration)>>,
}

impl Default for QueryMetrics {
    fn default() -> Self {
        QueryMetrics {
            io: IoStats::new(),
            records_scanned: AtomicU64::new(0),
            records_out: AtomicU64::new(0),
            pairs_compared: AtomicU64::new(0),
            blocking_violations: AtomicU64::new(0),
            cancelled_workers: AtomicU64::new(0),
            started: Instant::now(),
            first_record_nanos: AtomicU64::new(0),
            finished_nanos: AtomicU64::new(0),
            node_completions: Mutex::new(Vec::new()),
        }
    }
}

impl QueryMetrics {
    pub fn new() -> Self {
        Self::default()
    }

    fn since_start(&self) -> u64 {
        self.started.elapsed().as_nanos().max(1) as u64
    }

    pub fn mark_first_record(&self) {
        let _ = self.first_record_nanos.compare_exchange(
            0,
            self.since_start(),
            Ordering::Relaxed,
            Ordering::Relaxed,
        );
    }

    pub fn mark_finished(&self) {
        let _ = self.finished_nanos.compare_exchange(
            0,
            self.since_start(),
            Ordering::Relaxed,
            Ordering::Relaxed,
        );
    }

    pub fn mark_node_complete(&self, label: &str) {
        self.node_completions
            .lock()
            .unwrap()
            .push((label.to_string(), self.started.elapsed()));
    }

    pub fn first_record_latency(&self) -> Option<Duration> {
        match self.first_record_nanos.load(Ordering::Relaxed) {
            0 => None,
            n => Some(Duration::from_nanos(n)),
        }
    }

    pub fn total_latency(&self) -> Duration {
        match self.finished_nanos.load(Ordering::Relaxed) {
            0 => self.started.elapsed(),
            n => Duration::from_nanos(n),
        }
    }

    pub fn node_completion(&self, label: &str) -> Option<Duration> {
        self.node_completions
            .lock()
            .unwrap()
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, d)| *d)
    }

    /// Key/value trailer emitted after a query when metrics are requested.
    pub fn render_trailer(&self) -> String {
        let (containers, bytes_tag, bytes_full, _) = self.io.snapshot();
        let first = self
            .first_record_latency()
            .map(|d| format!("{:.3}", d.as_secs_f64() * 1000.0))
            .unwrap_or_else(|| "-".into());
        format!(
            "# containers_opened={containers}\n\
             # bytes_tag={bytes_tag}\n\
             # bytes_full={bytes_full}\n\
             # records_scanned={}\n\
             # records_out={}\n\
             # pairs_compared={}\n\
             # first_record_ms={first}\n\
             # total_ms={:.3}\n",
            self.records_scanned.load(Ordering::Relaxed),
            self.records_out.load(Ordering::Relaxed),
            self.pairs_compared.load(Ordering::Relaxed),
            self.total_latency().as_secs_f64() * 1000.0,
        )
    }
}
