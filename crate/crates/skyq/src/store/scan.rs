use std::collections::BTreeMap;

use crate::error::Result;
use crate::htm::{Coverage, TrixelId};
use crate::sphere::Region;
use crate::store::container::{read_container, IoStats};
use crate::store::{Catalog, Projection, Record};

/// How a container participates in a scan: FULL containers stream with only
/// the residual predicate, PARTIAL containers re-test exact region
/// membership per record. Rejected containers never appear.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContainerMode {
    Full,
    Partial,
}

/// The containers a coverage touches, in id order.
#[derive(Debug, Clone, Default)]
pub struct ScanPlan {
    pub containers: Vec<(TrixelId, ContainerMode)>,
}

impl ScanPlan {
    /// Maps coverage trixels onto storage containers.
    ///
    /// A FULL trixel at or above the storage depth covers its whole subtree
    /// of containers; FULL trixels below the storage depth, and all PARTIAL
    /// trixels, map to their storage-depth ancestor with per-record
    /// re-testing. A container fully covered anywhere wins FULL mode.
    pub fn build(catalog: &Catalog, coverage: &Coverage) -> ScanPlan {
        let depth = catalog.storage_depth();
        let existing = catalog.container_ids();
        let mut modes: BTreeMap<TrixelId, ContainerMode> = BTreeMap::new();

        let mark_partial = |t: TrixelId, modes: &mut BTreeMap<TrixelId, ContainerMode>| {
            let container = if t.level() >= depth {
                t.ancestor_at(depth)
            } else {
                // coarse partial trixel: every container underneath may hold
                // boundary records
                for raw in t.subtree_range(depth) {
                    let id = TrixelId::from_raw_unchecked(raw);
                    modes.entry(id).or_insert(ContainerMode::Partial);
                }
                return;
            };
            modes.entry(container).or_insert(ContainerMode::Partial);
        };

        for t in coverage.full() {
            if t.level() <= depth {
                for raw in t.subtree_range(depth) {
                    modes.insert(TrixelId::from_raw_unchecked(raw), ContainerMode::Full);
                }
            } else {
                mark_partial(*t, &mut modes);
            }
        }
        for t in coverage.partial() {
            mark_partial(*t, &mut modes);
        }

        let containers = existing
            .into_iter()
            .filter_map(|id| modes.get(&id).map(|m| (id, *m)))
            .collect();
        ScanPlan { containers }
    }
}

/// Sequential scan over the plan's containers.
///
/// `residual` sees every surviving record; `region` is only consulted for
/// PARTIAL containers. The parallel executor distributes the same plan over
/// workers instead of using this iterator.
pub fn scan_stream<'a, F>(
    catalog: &'a Catalog,
    plan: &'a ScanPlan,
    region: &'a Region,
    residual: F,
    projection: Projection,
    io: &'a IoStats,
) -> impl Iterator<Item = Result<Record>> + 'a
where
    F: Fn(&Record) -> bool + 'a,
{
    plan.containers
        .iter()
        .flat_map(move |(trixel, mode)| {
            let path = catalog.container_path(*trixel);
            match read_container(&path, catalog.schema(), projection, io) {
                Ok(records) => records
                    .into_iter()
                    .map(Ok)
                    .collect::<Vec<Result<Record>>>()
                    .into_iter(),
                Err(e) => vec![Err(e)].into_iter(),
            }
            .map(move |r| (r, *mode))
        })
        .filter_map(move |(r, mode)| match r {
            Err(e) => Some(Err(e)),
            Ok(rec) => {
                io.records_read
                    .fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                let spatial_ok = match mode {
                    ContainerMode::Full => true,
                    ContainerMode::Partial => region.contains(rec.pos()),
                };
                if spatial_ok && residual(&rec) {
                    Some(Ok(rec))
                } else {
                    None
                }
            }
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::htm::classify;
    use crate::sphere::{from_lonlat, Frame};
    use crate::store::load::{ingest_chunk, Chunk};
    use crate::store::testutil::uniform_objects;
    use crate::store::Schema;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn build_catalog(n: u64, seed: u64, dir: &std::path::Path) -> Catalog {
        let mut cat = Catalog::create(dir, 4, Schema::default()).unwrap();
        ingest_chunk(&mut cat, Chunk::new("gen", uniform_objects(n, seed)).unwrap()).unwrap();
        cat
    }

    #[test]
    fn whole_sky_scan_sees_every_object_once() {
        let dir = tempfile::tempdir().unwrap();
        let cat = build_catalog(3000, 50, &dir.path().join("c"));
        let cov = classify(&Region::whole_sky(), 6).unwrap();
        let plan = ScanPlan::build(&cat, &cov);
        let io = IoStats::new();
        let ids: Vec<u64> = scan_stream(&cat, &plan, &Region::whole_sky(), |_| true, Projection::Full, &io)
            .map(|r| r.unwrap().obj_id())
            .collect();
        assert_eq!(ids.len(), 3000);
        let set: BTreeSet<u64> = ids.iter().copied().collect();
        assert_eq!(set.len(), 3000);
    }

    #[test]
    fn empty_coverage_opens_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let cat = build_catalog(500, 51, &dir.path().join("c"));
        let cov = classify(&Region::empty(), 6).unwrap();
        let plan = ScanPlan::build(&cat, &cov);
        let io = IoStats::new();
        let got: Vec<_> =
            scan_stream(&cat, &plan, &Region::empty(), |_| true, Projection::Tag, &io).collect();
        assert!(got.is_empty());
        assert_eq!(io.containers_opened.load(std::sync::atomic::Ordering::Relaxed), 0);
    }

    #[test]
    fn cap_scans_match_brute_force() {
        let dir = tempfile::tempdir().unwrap();
        let cat = build_catalog(20_000, 52, &dir.path().join("c"));
        let io = IoStats::new();
        // brute-force oracle: whole-sky scan, filter by membership per object
        let cov_all = classify(&Region::whole_sky(), 6).unwrap();
        let plan_all = ScanPlan::build(&cat, &cov_all);
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for _ in 0..25 {
            let center = from_lonlat(
                rng.random_range(0.0..360.0),
                rng.random_range(-89.0..89.0),
                &Frame::equatorial(),
            )
            .unwrap();
            let radius = rng.random_range(0.1..25.0) * 3600.0;
            let region = Region::from_cap(center, radius).unwrap();
            let want: BTreeSet<u64> =
                scan_stream(&cat, &plan_all, &Region::whole_sky(), |_| true, Projection::Tag, &io)
                    .map(|r| r.unwrap())
                    .filter(|r| region.contains(r.pos()))
                    .map(|r| r.obj_id())
                    .collect();
            let cov = classify(&region, 6).unwrap();
            let plan = ScanPlan::build(&cat, &cov);
            let got: BTreeSet<u64> =
                scan_stream(&cat, &plan, &region, |_| true, Projection::Tag, &io)
                    .map(|r| r.unwrap().obj_id())
                    .collect();
            assert_eq!(got, want);
            // pruning must open no more containers than exist
            assert!(plan.containers.len() <= plan_all.containers.len());
        }
    }

    #[test]
    fn placement_and_vertical_partition_audit() {
        let dir = tempfile::tempdir().unwrap();
        let cat = build_catalog(2000, 54, &dir.path().join("c"));
        let cov = classify(&Region::whole_sky(), 4).unwrap();
        let plan = ScanPlan::build(&cat, &cov);
        let io = IoStats::new();
        let fulls: Vec<Record> =
            scan_stream(&cat, &plan, &Region::whole_sky(), |_| true, Projection::Full, &io)
                .map(|r| r.unwrap())
                .collect();
        let tags: Vec<Record> =
            scan_stream(&cat, &plan, &Region::whole_sky(), |_| true, Projection::Tag, &io)
                .map(|r| r.unwrap())
                .collect();
        assert_eq!(fulls.len(), tags.len());
        for (f, t) in fulls.iter().zip(tags.iter()) {
            // tag fields equal the owning object's fields
            assert_eq!(f.as_tag(), t.as_tag());
            // placement: home trixel is the locate() of the position
            assert_eq!(
                crate::htm::locate(t.pos(), cat.storage_depth()).unwrap(),
                t.home_trixel()
            );
        }
    }
}
