//! Streaming parallel execution: the query-tree executor with push-as-ready
//! semantics, the partition-parallel scan engine, and the spatial hash join
//! for pairwise searches.

mod join;
mod metrics;
mod stream;

pub use join::{
    companion_search, hash_join_neighbors, lens_search, CompanionParams, LensParams, PairResult,
};
pub use metrics::QueryMetrics;
pub use stream::{stream, StreamRx, StreamTx};

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use crate::error::Error;
use crate::htm::classify;
use crate::queryl::{Agg, Pred, QetNode, ScanNode};
use crate::sphere::Region;
use crate::store::{read_container, Catalog, Projection, Record, ScanPlan};

/// Worker and buffering knobs for one query execution.
#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub workers: usize,
    pub stream_bound: usize,
    /// Hash-join bucket depth; defaults to the catalog's storage depth.
    pub bucket_level: Option<u8>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            workers: 4,
            stream_bound: 1024,
            bucket_level: None,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> crate::error::Result<()> {
        if self.workers < 1 {
            return Err(Error::config("workers must be >= 1"));
        }
        if self.stream_bound < 1 {
            return Err(Error::config("stream bound must be >= 1"));
        }
        Ok(())
    }
}

/// One output row: a record in either projection, or an aggregate value.
#[derive(Debug, Clone, PartialEq)]
pub enum Row {
    Record(Record),
    Agg { name: String, value: f64 },
}

impl Row {
    pub fn obj_id(&self) -> Option<u64> {
        match self {
            Row::Record(r) => Some(r.obj_id()),
            Row::Agg { .. } => None,
        }
    }
}

/// The consumer end of a running query. Dropping it cancels the whole tree.
pub struct RowStream {
    rx: StreamRx<Row>,
    metrics: Arc<QueryMetrics>,
}

impl Iterator for RowStream {
    type Item = crate::error::Result<Row>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.rx.next() {
            Some(Ok(row)) => {
                self.metrics.mark_first_record();
                self.metrics
                    .records_out
                    .fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                Some(Ok(row))
            }
            Some(Err(e)) => Some(Err(e)),
            None => {
                self.metrics.mark_finished();
                None
            }
        }
    }
}

impl RowStream {
    pub fn metrics(&self) -> Arc<QueryMetrics> {
        self.metrics.clone()
    }
}

struct ExecCtx {
    catalog: Arc<Catalog>,
    config: EngineConfig,
    metrics: Arc<QueryMetrics>,
}

/// Runs a plan tree. Every node produces into a bounded stream as soon as
/// records are available; sort, aggregate, intersect, and difference drain
/// the required child before emitting anything.
pub fn execute(plan: &QetNode, catalog: &Arc<Catalog>, config: &EngineConfig) -> (RowStream, Arc<QueryMetrics>) {
    let metrics = Arc::new(QueryMetrics::new());
    let ctx = Arc::new(ExecCtx {
        catalog: catalog.clone(),
        config: config.clone(),
        metrics: metrics.clone(),
    });
    let (tx, rx) = stream(config.stream_bound);
    run_node(plan.clone(), ctx, "root".to_string(), tx);
    (
        RowStream {
            rx,
            metrics: metrics.clone(),
        },
        metrics,
    )
}

/// Whole-catalog scan machine: every container visited, predicate per object.
pub fn scan_engine(
    catalog: &Arc<Catalog>,
    predicate: Pred,
    projection: Projection,
    config: &EngineConfig,
) -> (RowStream, Arc<QueryMetrics>) {
    let node = QetNode::Scan(ScanNode {
        region: Region::whole_sky(),
        coverage: classify(&Region::whole_sky(), 0).expect("level 0 is valid"),
        residual: predicate,
        projection,
        per_container_delay: None,
    });
    execute(&node, catalog, config)
}

fn run_node(node: QetNode, ctx: Arc<ExecCtx>, label: String, tx: StreamTx<Row>) {
    match node {
        QetNode::Scan(scan) => run_scan(scan, ctx, label, tx),
        QetNode::Project { child, .. } => {
            // column selection happens at the output shape; records flow through
            run_node(*child, ctx, label, tx)
        }
        QetNode::Union(children) => run_union(children, ctx, label, tx),
        QetNode::Intersect(children) => run_blocking_setop(children, ctx, label, tx, SetKind::Intersect),
        QetNode::Except(children) => run_blocking_setop(children, ctx, label, tx, SetKind::Except),
        QetNode::Sort { child, key, desc } => run_sort(*child, key, desc, ctx, label, tx),
        QetNode::Limit { child, n } => run_limit(*child, n, ctx, label, tx),
        QetNode::Aggregate { child, agg } => run_aggregate(*child, agg, ctx, label, tx),
    }
}

fn run_scan(scan: ScanNode, ctx: Arc<ExecCtx>, label: String, tx: StreamTx<Row>) {
    let plan = ScanPlan::build(&ctx.catalog, &scan.coverage);
    let queue = Arc::new(Mutex::new(std::collections::VecDeque::from(plan.containers)));
    let shared = Arc::new((scan.region, scan.residual));
    let workers = ctx.config.workers.max(1);
    for w in 0..workers {
        let queue = queue.clone();
        let shared = shared.clone();
        let ctx = ctx.clone();
        let tx = tx.clone();
        let delay = scan.per_container_delay;
        let projection = scan.projection;
        let label = format!("{label}.w{w}");
        thread::Builder::new()
            .name(label)
            .spawn(move || {
                let (region, residual) = &*shared;
                loop {
                    if tx.is_cancelled() {
                        ctx.metrics
                            .cancelled_workers
                            .fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        return;
                    }
                    let item = queue.lock().unwrap().pop_front();
                    let (trixel, mode) = match item {
                        Some(x) => x,
                        None => return,
                    };
                    if let Some(d) = delay {
                        thread::sleep(d);
                    }
                    let path = ctx.catalog.container_path(trixel);
                    let records =
                        match read_container(&path, ctx.catalog.schema(), projection, &ctx.metrics.io) {
                            Ok(r) => r,
                            Err(e) => {
                                tx.send_err(e);
                                return;
                            }
                        };
                    for rec in records {
                        ctx.metrics
                            .records_scanned
                            .fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        let spatial_ok = match mode {
                            crate::store::ContainerMode::Full => true,
                            crate::store::ContainerMode::Partial => region.contains(rec.pos()),
                        };
                        if spatial_ok && residual.eval(&rec) {
                            if !tx.send(Row::Record(rec)) {
                                ctx.metrics
                                    .cancelled_workers
                                    .fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                                return;
                            }
                        }
                    }
                }
            })
            .expect("spawn scan worker");
    }
}

fn run_union(children: Vec<QetNode>, ctx: Arc<ExecCtx>, label: String, tx: StreamTx<Row>) {
    debug_assert!(children.len() >= 2);
    let (merge_tx, merge_rx) = stream::<Row>(ctx.config.stream_bound);
    for (i, child) in children.into_iter().enumerate() {
        let child_label = format!("{label}.{i}");
        let (ctx_tx, ctx_rx) = stream::<Row>(ctx.config.stream_bound);
        run_node(child, ctx.clone(), child_label.clone(), ctx_tx);
        let merge_tx = merge_tx.clone();
        let metrics = ctx.metrics.clone();
        thread::spawn(move || {
            for item in ctx_rx {
                let ok = match item {
                    Ok(row) => merge_tx.send(row),
                    Err(e) => {
                        merge_tx.send_err(e);
                        false
                    }
                };
                if !ok {
                    return;
                }
            }
            metrics.mark_node_complete(&child_label);
        });
    }
    drop(merge_tx);
    thread::spawn(move || {
        let mut seen = std::collections::HashSet::new();
        for item in merge_rx {
            match item {
                Ok(row) => {
                    let fresh = match row.obj_id() {
                        Some(id) => seen.insert(id),
                        None => true,
                    };
                    if fresh && !tx.send(row) {
                        return;
                    }
                }
                Err(e) => {
                    tx.send_err(e);
                    return;
                }
            }
        }
    });
}

#[derive(Clone, Copy, PartialEq)]
enum SetKind {
    Intersect,
    Except,
}

/// Runtime guard for the blocking-node contract: every emission from a
/// draining operator goes through [`BlockingGuard::send`], which counts any
/// emission happening before [`BlockingGuard::complete`] was called.
struct BlockingGuard {
    done: AtomicBool,
    metrics: Arc<QueryMetrics>,
    label: String,
}

impl BlockingGuard {
    fn new(metrics: Arc<QueryMetrics>, label: String) -> Self {
        BlockingGuard {
            done: AtomicBool::new(false),
            metrics,
            label,
        }
    }

    fn complete(&self) {
        self.done.store(true, Ordering::Relaxed);
        self.metrics
            .mark_node_complete(&format!("{}.drained", self.label));
    }

    fn send(&self, tx: &StreamTx<Row>, row: Row) -> bool {
        if !self.done.load(Ordering::Relaxed) {
            self.metrics.blocking_violations.fetch_add(1, Ordering::Relaxed);
        }
        tx.send(row)
    }
}

fn run_blocking_setop(
    children: Vec<QetNode>,
    ctx: Arc<ExecCtx>,
    label: String,
    tx: StreamTx<Row>,
    kind: SetKind,
) {
    debug_assert!(children.len() >= 2);
    let mut iter = children.into_iter();
    let first = iter.next().unwrap();
    let (first_tx, first_rx) = stream::<Row>(ctx.config.stream_bound);
    run_node(first, ctx.clone(), format!("{label}.0"), first_tx);
    let mut other_rxs = Vec::new();
    for (i, child) in iter.enumerate() {
        let (ctx_tx, ctx_rx) = stream::<Row>(ctx.config.stream_bound);
        run_node(child, ctx.clone(), format!("{label}.{}", i + 1), ctx_tx);
        other_rxs.push(ctx_rx);
    }
    let metrics = ctx.metrics.clone();
    thread::spawn(move || {
        // drain every non-first child before emitting anything
        let guard = BlockingGuard::new(metrics.clone(), label.clone());
        let mut sets: Vec<std::collections::HashSet<u64>> = Vec::with_capacity(other_rxs.len());
        for (i, rx) in other_rxs.into_iter().enumerate() {
            let mut set = std::collections::HashSet::new();
            for item in rx {
                match item {
                    Ok(row) => {
                        if let Some(id) = row.obj_id() {
                            set.insert(id);
                        }
                    }
                    Err(e) => {
                        tx.send_err(e);
                        return;
                    }
                }
            }
            metrics.mark_node_complete(&format!("{label}.{}", i + 1));
            sets.push(set);
        }
        guard.complete();
        let mut emitted = std::collections::HashSet::new();
        for item in first_rx {
            match item {
                Ok(row) => {
                    let id = match row.obj_id() {
                        Some(id) => id,
                        None => continue,
                    };
                    let keep = match kind {
                        SetKind::Intersect => sets.iter().all(|s| s.contains(&id)),
                        SetKind::Except => !sets.iter().any(|s| s.contains(&id)),
                    };
                    if keep && emitted.insert(id) && !guard.send(&tx, row) {
                        return;
                    }
                }
                Err(e) => {
                    tx.send_err(e);
                    return;
                }
            }
        }
    });
}

fn run_sort(
    child: QetNode,
    key: crate::queryl::NamedAttr,
    desc: bool,
    ctx: Arc<ExecCtx>,
    label: String,
    tx: StreamTx<Row>,
) {
    let (ctx_tx, ctx_rx) = stream::<Row>(ctx.config.stream_bound);
    run_node(child, ctx.clone(), format!("{label}.0"), ctx_tx);
    let metrics = ctx.metrics.clone();
    thread::spawn(move || {
        let guard = BlockingGuard::new(metrics, label);
        let mut rows: Vec<Record> = Vec::new();
        for item in ctx_rx {
            match item {
                Ok(Row::Record(r)) => rows.push(r),
                Ok(Row::Agg { .. }) => {
                    tx.send_err(Error::plan("SORT expects record input"));
                    return;
                }
                Err(e) => {
                    tx.send_err(e);
                    return;
                }
            }
        }
        guard.complete();
        rows.sort_by(|a, b| {
            let ord = key.attr.value(a).total_cmp(&key.attr.value(b));
            let ord = if desc { ord.reverse() } else { ord };
            ord.then_with(|| a.obj_id().cmp(&b.obj_id()))
        });
        for r in rows {
            if !guard.send(&tx, Row::Record(r)) {
                return;
            }
        }
    });
}

fn run_limit(child: QetNode, n: u64, ctx: Arc<ExecCtx>, label: String, tx: StreamTx<Row>) {
    let (ctx_tx, ctx_rx) = stream::<Row>(ctx.config.stream_bound);
    run_node(child, ctx.clone(), format!("{label}.0"), ctx_tx);
    thread::spawn(move || {
        let mut remaining = n;
        for item in ctx_rx {
            if remaining == 0 {
                return; // dropping ctx_rx cancels the subtree
            }
            match item {
                Ok(row) => {
                    remaining -= 1;
                    if !tx.send(row) {
                        return;
                    }
                }
                Err(e) => {
                    tx.send_err(e);
                    return;
                }
            }
        }
    });
}

fn run_aggregate(child: QetNode, agg: Agg, ctx: Arc<ExecCtx>, label: String, tx: StreamTx<Row>) {
    let (ctx_tx, ctx_rx) = stream::<Row>(ctx.config.stream_bound);
    run_node(child, ctx.clone(), format!("{label}.0"), ctx_tx);
    let metrics = ctx.metrics.clone();
    thread::spawn(move || {
        let guard = BlockingGuard::new(metrics, label);
        let mut count: u64 = 0;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0f64;
        for item in ctx_rx {
            match item {
                Ok(Row::Record(r)) => {
                    count += 1;
                    if let Agg::Min(a) | Agg::Max(a) | Agg::Avg(a) = &agg {
                        let v = a.attr.value(&r);
                        min = min.min(v);
                        max = max.max(v);
                        sum += v;
                    }
                }
                Ok(Row::Agg { .. }) => {
                    tx.send_err(Error::plan("AGGREGATE expects record input"));
                    return;
                }
                Err(e) => {
                    tx.send_err(e);
                    return;
                }
            }
        }
        guard.complete();
        let (name, value) = match &agg {
            Agg::Count => ("count".to_string(), count as f64),
            Agg::Min(_) => (agg.output_name(), if count == 0 { f64::NAN } else { min }),
            Agg::Max(_) => (agg.output_name(), if count == 0 { f64::NAN } else { max }),
            Agg::Avg(_) => (
                agg.output_name(),
                if count == 0 { f64::NAN } else { sum / count as f64 },
            ),
        };
        guard.send(&tx, Row::Agg { name, value });
    });
}
