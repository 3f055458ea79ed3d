use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex};
use std::thread;

use crate::error::{Error, Result};
use crate::exec::{stream, EngineConfig, QueryMetrics, StreamRx, StreamTx};
use crate::htm::{classify, locate, min_inradius};
use crate::queryl::{AttrRef, CmpOp, NamedAttr, Pred};
use crate::sphere::{arcsec_to_rad, rad_to_arcsec, Region};
use crate::store::{read_container, Catalog, ObjClass, Projection, Record, TagRecord};

/// One qualifying pair. For the symmetric neighbor join obj_a < obj_b; the
/// companion join orders the pair as (primary, companion) instead.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairResult {
    pub obj_a: u64,
    pub obj_b: u64,
    pub separation_arcsec: f64,
    /// Color-index differences a minus b: u-g, g-r, r-i, i-z.
    pub color_deltas: [f64; 4],
}

pub type PairPredicate = Arc<dyn Fn(&TagRecord, &TagRecord) -> bool + Send + Sync>;

fn colors(r: &TagRecord) -> [f64; 4] {
    [
        r.mags[0] - r.mags[1],
        r.mags[1] - r.mags[2],
        r.mags[2] - r.mags[3],
        r.mags[3] - r.mags[4],
    ]
}

fn pair_of(a: &TagRecord, b: &TagRecord, separation_arcsec: f64) -> PairResult {
    let ca = colors(a);
    let cb = colors(b);
    PairResult {
        obj_a: a.obj_id,
        obj_b: b.obj_id,
        separation_arcsec,
        color_deltas: [ca[0] - cb[0], ca[1] - cb[1], ca[2] - cb[2], ca[3] - cb[3]],
    }
}

#[derive(Clone)]
enum JoinMode {
    /// Unordered pairs, obj_a < obj_b, emitted in a's home bucket.
    Symmetric { predicate: PairPredicate },
    /// Ordered (primary, companion) pairs, emitted in the primary's home bucket.
    Companion { primary: Pred, companion: Pred },
}

struct BucketEntry {
    rec: TagRecord,
    home: u64,
    is_primary: bool,
    is_companion: bool,
}

/// Checks the bucket depth against the search radius: buckets must be much
/// larger than the radius so replication into boundary-adjacent buckets
/// never misses a partner.
fn validate_bucket_level(
    catalog: &Catalog,
    radius_arcsec: f64,
    bucket_level: Option<u8>,
) -> Result<u8> {
    if !(radius_arcsec > 0.0) || !radius_arcsec.is_finite() {
        return Err(Error::domain(format!(
            "join radius {radius_arcsec} arcsec must be positive"
        )));
    }
    let level = bucket_level.unwrap_or(catalog.storage_depth());
    let inradius = min_inradius(level)?;
    let radius = arcsec_to_rad(radius_arcsec);
    if inradius <= 2.0 * radius {
        return Err(Error::config(format!(
            "bucket level {level} too fine for radius {radius_arcsec}\": \
             min trixel inradius {:.1}\" must exceed twice the radius",
            rad_to_arcsec(inradius)
        )));
    }
    Ok(level)
}

/// Two-phase spatial hash join.
///
/// Phase 1 scans the tag sections, hashing each participating object into
/// its home bucket and replicating it into every bucket its radius-cap
/// coverage touches, so near-boundary partners always share a bucket.
/// Phase 2 compares all objects within each bucket, in parallel over
/// buckets; the home-bucket rule makes each qualifying pair come out
/// exactly once.
pub fn hash_join_neighbors(
    catalog: &Arc<Catalog>,
    radius_arcsec: f64,
    pair_predicate: PairPredicate,
    config: &EngineConfig,
) -> Result<(StreamRx<PairResult>, Arc<QueryMetrics>)> {
    run_join(
        catalog,
        radius_arcsec,
        JoinMode::Symmetric {
            predicate: pair_predicate,
        },
        config,
    )
}

/// Gravitational-lens candidate search knobs.
#[derive(Debug, Clone, Copy)]
pub struct LensParams {
    pub radius_arcsec: f64,
    /// Max per-color-index difference still counting as "identical colors".
    pub color_eps_mag: f64,
}

impl Default for LensParams {
    fn default() -> Self {
        LensParams {
            radius_arcsec: 10.0,
            color_eps_mag: 0.05,
        }
    }
}

/// Pairs within the radius whose four color indices all match within the
/// tolerance; overall brightness is deliberately unconstrained.
pub fn lens_search(
    catalog: &Arc<Catalog>,
    params: LensParams,
    config: &EngineConfig,
) -> Result<(StreamRx<PairResult>, Arc<QueryMetrics>)> {
    let eps = params.color_eps_mag;
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::domain(format!("color tolerance {eps} must be >= 0")));
    }
    let predicate: PairPredicate = Arc::new(move |a, b| {
        let ca = colors(a);
        let cb = colors(b);
        ca.iter()
            .zip(cb.iter())
            .all(|(x, y)| (x - y).abs() <= eps)
    });
    hash_join_neighbors(catalog, params.radius_arcsec, predicate, config)
}

/// Primary/companion search knobs with the conventional defaults: primaries
/// are bright quasars, companions faint blue galaxies.
#[derive(Debug, Clone)]
pub struct CompanionParams {
    pub radius_arcsec: f64,
    pub primary: Pred,
    pub companion: Pred,
}

impl CompanionParams {
    pub fn defaults(primary_r_max: f64, faint_g: f64, blue_gr: f64) -> CompanionParams {
        let mag = |band: usize, name: &str| NamedAttr {
            name: name.to_string(),
            attr: AttrRef::Mag(band),
        };
        CompanionParams {
            radius_arcsec: 5.0,
            primary: Pred::And(vec![
                Pred::ClassIs {
                    class: ObjClass::Qso,
                    negated: false,
                },
                Pred::Cmp {
                    attr: mag(2, "r"),
                    op: CmpOp::Lt,
                    value: primary_r_max,
                },
            ]),
            companion: Pred::And(vec![
                Pred::ClassIs {
                    class: ObjClass::Galaxy,
                    negated: false,
                },
                Pred::Cmp {
                    attr: mag(1, "g"),
                    op: CmpOp::Gt,
                    value: faint_g,
                },
                Pred::Cmp {
                    attr: NamedAttr {
                        name: "g - r".to_string(),
                        attr: AttrRef::Color(1, 2),
                    },
                    op: CmpOp::Lt,
                    value: blue_gr,
                },
            ]),
        }
    }
}

impl Default for CompanionParams {
    fn default() -> Self {
        CompanionParams::defaults(22.0, 20.0, 0.4)
    }
}

/// Asymmetric neighbor join: (a, b) with a passing the primary filter, b the
/// companion filter, separation within the radius. Ordered-pair identity;
/// dedup by the primary's home bucket.
pub fn companion_search(
    catalog: &Arc<Catalog>,
    params: CompanionParams,
    config: &EngineConfig,
) -> Result<(StreamRx<PairResult>, Arc<QueryMetrics>)> {
    run_join(
        catalog,
        params.radius_arcsec,
        JoinMode::Companion {
            primary: params.primary,
            companion: params.companion,
        },
        config,
    )
}

fn run_join(
    catalog: &Arc<Catalog>,
    radius_arcsec: f64,
    mode: JoinMode,
    config: &EngineConfig,
) -> Result<(StreamRx<PairResult>, Arc<QueryMetrics>)> {
    config.validate()?;
    let level = validate_bucket_level(catalog, radius_arcsec, config.bucket_level)?;
    let metrics = Arc::new(QueryMetrics::new());
    let (tx, rx) = stream(config.stream_bound);
    let catalog = catalog.clone();
    let workers = config.workers.max(1);
    let metrics_out = metrics.clone();
    thread::spawn(move || {
        if let Err(e) = drive_join(&catalog, radius_arcsec, level, &mode, workers, &metrics, &tx) {
            tx.send_err(e);
        }
    });
    Ok((rx, metrics_out))
}

fn drive_join(
    catalog: &Arc<Catalog>,
    radius_arcsec: f64,
    level: u8,
    mode: &JoinMode,
    workers: usize,
    metrics: &Arc<QueryMetrics>,
    tx: &StreamTx<PairResult>,
) -> Result<()> {
    // phase 1: hash objects into buckets, replicating across boundaries
    let containers = Arc::new(Mutex::new(VecDeque::from(catalog.container_ids())));
    let mut handles = Vec::with_capacity(workers);
    for _ in 0..workers {
        let containers = containers.clone();
        let catalog = catalog.clone();
        let metrics = metrics.clone();
        let mode = mode.clone();
        let tx = tx.clone();
        handles.push(thread::spawn(move || -> Result<HashMap<u64, Vec<BucketEntry>>> {
            let mut local: HashMap<u64, Vec<BucketEntry>> = HashMap::new();
            loop {
                if tx.is_cancelled() {
                    metrics
                        .cancelled_workers
                        .fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    return Ok(local);
                }
                let trixel = match containers.lock().unwrap().pop_front() {
                    Some(t) => t,
                    None => return Ok(local),
                };
                let records = read_container(
                    &catalog.container_path(trixel),
                    catalog.schema(),
                    Projection::Tag,
                    &metrics.io,
                )?;
                for rec in records {
                    metrics
                        .records_scanned
                        .fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    let tag = match rec {
                        Record::Tag(t) => t,
                        Record::Full(..) => unreachable!("tag projection"),
                    };
                    let (is_primary, is_companion) = match &mode {
                        JoinMode::Symmetric { .. } => (true, true),
                        JoinMode::Companion { primary, companion } => {
                            let r = Record::Tag(tag);
                            (primary.eval(&r), companion.eval(&r))
                        }
                    };
                    if !is_primary && !is_companion {
                        continue;
                    }
                    let home = locate(tag.pos, level)?.raw();
                    let entry = |bucket: u64, local: &mut HashMap<u64, Vec<BucketEntry>>| {
                        local.entry(bucket).or_default().push(BucketEntry {
                            rec: tag,
                            home,
                            is_primary,
                            is_companion,
                        });
                    };
                    if is_companion {
                        // replicate into every bucket the radius-cap touches
                        let cap_region = Region::from_cap(tag.pos, radius_arcsec)?;
                        let coverage = classify(&cap_region, level)?;
                        for b in coverage.full().iter().chain(coverage.partial().iter()) {
                            entry(b.raw(), &mut local);
                        }
                    } else {
                        // a pure primary is only ever compared in its home bucket
                        entry(home, &mut local);
                    }
                }
            }
        }));
    }
    let mut buckets: HashMap<u64, Vec<BucketEntry>> = HashMap::new();
    for h in handles {
        let local = h.join().expect("phase-1 worker panicked")?;
        for (bucket, mut entries) in local {
            buckets.entry(bucket).or_default().append(&mut entries);
        }
    }

    // phase 2: all-pairs comparison within each bucket, buckets in parallel
    let radius_rad = arcsec_to_rad(radius_arcsec);
    let work: Arc<Mutex<VecDeque<(u64, Vec<BucketEntry>)>>> =
        Arc::new(Mutex::new(buckets.into_iter().collect()));
    let mut handles = Vec::with_capacity(workers);
    for _ in 0..workers {
        let work = work.clone();
        let metrics = metrics.clone();
        let mode = mode.clone();
        let tx = tx.clone();
        handles.push(thread::spawn(move || {
            loop {
                if tx.is_cancelled() {
                    metrics
                        .cancelled_workers
                        .fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    return;
                }
                let (bucket, entries) = match work.lock().unwrap().pop_front() {
                    Some(x) => x,
                    None => return,
                };
                match &mode {
                    JoinMode::Symmetric { predicate } => {
                        for i in 0..entries.len() {
                            for j in (i + 1)..entries.len() {
                                let (x, y) = (&entries[i], &entries[j]);
                                if x.rec.obj_id == y.rec.obj_id {
                                    continue; // the same object replicated twice
                                }
                                let (a, b) = if x.rec.obj_id < y.rec.obj_id {
                                    (x, y)
                                } else {
                                    (y, x)
                                };
                                if a.home != bucket {
                                    continue;
                                }
                                metrics
                                    .pairs_compared
                                    .fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                                let sep = a.rec.pos.angular_distance(b.rec.pos);
                                if sep > radius_rad {
                                    continue;
                                }
                                if !(predicate)(&a.rec, &b.rec) {
                                    continue;
                                }
                                if !tx.send(pair_of(&a.rec, &b.rec, rad_to_arcsec(sep))) {
                                    return;
                                }
                            }
                        }
                    }
                    JoinMode::Companion { .. } => {
                        for a in &entries {
                            if !a.is_primary || a.home != bucket {
                                continue;
                            }
                            for b in &entries {
                                if !b.is_companion || b.rec.obj_id == a.rec.obj_id {
                                    continue;
                                }
                                metrics
                                    .pairs_compared
                                    .fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                                let sep = a.rec.pos.angular_distance(b.rec.pos);
                                if sep > radius_rad {
                                    continue;
                                }
                                if !tx.send(pair_of(&a.rec, &b.rec, rad_to_arcsec(sep))) {
                                    return;
                                }
                            }
                        }
                    }
                }
            }
        }));
    }
    for h in handles {
        h.join().expect("phase-2 worker panicked");
    }
    Ok(())
}

/// Exposed for bucket-size planning in the CLI and tests.
pub fn join_bucket_level(
    catalog: &Catalog,
    radius_arcsec: f64,
    bucket_level: Option<u8>,
) -> Result<u8> {
    validate_bucket_level(catalog, radius_arcsec, bucket_level)
}
