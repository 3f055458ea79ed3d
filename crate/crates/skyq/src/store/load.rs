use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::htm::{locate, TrixelId};
use crate::store::catalog::{publish_current, version_dir_name, write_ids};
use crate::store::container::{read_objects, write_container, IoStats};
use crate::store::{Catalog, SkyObject};

/// One ingest unit: the parsed objects of a single source file.
#[derive(Debug, Clone)]
pub struct Chunk {
    pub source: String,
    pub objects: Vec<SkyObject>,
}

impl Chunk {
    /// Object ids within a chunk must be distinct.
    pub fn new(source: impl Into<String>, objects: Vec<SkyObject>) -> Result<Chunk> {
        let mut seen = HashSet::with_capacity(objects.len());
        for o in &objects {
            if !seen.insert(o.obj_id) {
                return Err(Error::Duplicate(o.obj_id));
            }
        }
        Ok(Chunk {
            source: source.into(),
            objects,
        })
    }
}

/// What a load did: how many objects landed where, and how often each
/// container was written (the single-touch property says: once).
#[derive(Debug, Clone)]
pub struct LoadReport {
    pub objects: u64,
    pub containers_touched: u64,
    pub touches: BTreeMap<u64, u32>,
    pub duration: Duration,
}

/// Loads a chunk into the catalog, publishing a new version.
///
/// Phase 1 locates every object and builds the per-container work list;
/// phase 2 writes each affected container exactly once (tag and full
/// sections in the same touch) into a staging directory, which is renamed
/// into place and published atomically. Any failure leaves the current
/// version untouched.
pub fn ingest_chunk(catalog: &mut Catalog, chunk: Chunk) -> Result<LoadReport> {
    let start = Instant::now();
    let depth = catalog.storage_depth();
    let fine_level = catalog.meta().counts_level();

    // id disjointness against the existing catalog
    let existing_ids = catalog.object_ids()?;
    {
        let new_ids: HashSet<u64> = chunk.objects.iter().map(|o| o.obj_id).collect();
        for id in &existing_ids {
            if new_ids.contains(id) {
                return Err(Error::Duplicate(*id));
            }
        }
    }
    for o in &chunk.objects {
        if o.extras.len() != catalog.schema().extras().len() {
            return Err(Error::domain(format!(
                "object {}: {} extras, schema has {}",
                o.obj_id,
                o.extras.len(),
                catalog.schema().extras().len()
            )));
        }
    }

    // phase 1: home containers and affected-container index
    let mut groups: BTreeMap<TrixelId, Vec<SkyObject>> = BTreeMap::new();
    let mut fine_deltas: BTreeMap<u64, u64> = BTreeMap::new();
    for o in &chunk.objects {
        let fine = locate(o.pos, fine_level)?;
        *fine_deltas.entry(fine.raw()).or_insert(0) += 1;
        groups
            .entry(fine.ancestor_at(depth))
            .or_default()
            .push(o.clone());
    }

    // phase 2: stage the next version
    let next = catalog.version() + 1;
    let stage = catalog.root().join(format!(".stage-{}", version_dir_name(next)));
    if stage.exists() {
        return Err(Error::domain(format!(
            "{}: staging directory exists (another load in progress?)",
            stage.display()
        )));
    }
    let result = stage_version(catalog, &chunk, &groups, &fine_deltas, &existing_ids, &stage);
    match result {
        Ok(report) => {
            fs::rename(&stage, catalog.root().join(version_dir_name(next)))?;
            publish_current(catalog.root(), next)?;
            *catalog = catalog.reopened()?;
            Ok(LoadReport {
                duration: start.elapsed(),
                ..report
            })
        }
        Err(e) => {
            let _ = fs::remove_dir_all(&stage);
            Err(e)
        }
    }
}

fn stage_version(
    catalog: &Catalog,
    chunk: &Chunk,
    groups: &BTreeMap<TrixelId, Vec<SkyObject>>,
    fine_deltas: &BTreeMap<u64, u64>,
    existing_ids: &[u64],
    stage: &Path,
) -> Result<LoadReport> {
    let schema = catalog.schema();
    let fine_level = catalog.meta().counts_level();
    fs::create_dir_all(stage.join("containers"))?;

    let mut touches: BTreeMap<u64, u32> = BTreeMap::new();
    let io = IoStats::new();

    // affected containers: merge old + new records, write once
    for (trixel, new_objs) in groups {
        let old_path = catalog.container_path(*trixel);
        let mut records = if old_path.exists() {
            read_objects(&old_path, schema, &io)?
        } else {
            Vec::new()
        };
        records.extend(new_objs.iter().cloned());
        sort_storage_order(&mut records, fine_level)?;
        let staged = stage.join("containers").join(format!("{}.ctr", trixel.raw()));
        write_container(&staged, *trixel, schema, &records)?;
        *touches.entry(trixel.raw()).or_insert(0) += 1;
    }

    // unaffected containers carry over by hard link (copy as fallback)
    for trixel in catalog.container_ids() {
        if groups.contains_key(&trixel) {
            continue;
        }
        let src = catalog.container_path(trixel);
        let dst = stage.join("containers").join(format!("{}.ctr", trixel.raw()));
        if fs::hard_link(&src, &dst).is_err() {
            fs::copy(&src, &dst)?;
        }
    }

    // merged id index
    let mut ids: Vec<u64> = existing_ids.to_vec();
    ids.extend(chunk.objects.iter().map(|o| o.obj_id));
    ids.sort_unstable();
    write_ids(&stage.join("ids.bin"), &ids)?;

    // meta with updated counts and history
    let mut meta = catalog.meta().clone();
    for (raw, n) in fine_deltas {
        *meta.fine_counts.entry(*raw).or_insert(0) += n;
    }
    meta.total_objects += chunk.objects.len() as u64;
    meta.load_history.push(chunk.source.clone());
    fs::write(stage.join("meta.skyq"), meta.render())?;

    Ok(LoadReport {
        objects: chunk.objects.len() as u64,
        containers_touched: touches.len() as u64,
        touches,
        duration: Duration::ZERO,
    })
}

/// Storage order inside a container: (fine trixel, obj_id).
pub(crate) fn sort_storage_order(records: &mut [SkyObject], fine_level: u8) -> Result<()> {
    let mut keyed: Vec<(u64, u64)> = Vec::with_capacity(records.len());
    for r in records.iter() {
        keyed.push((locate(r.pos, fine_level)?.raw(), r.obj_id));
    }
    // sort indices by key, then apply
    let mut idx: Vec<usize> = (0..records.len()).collect();
    idx.sort_by_key(|&i| keyed[i]);
    let mut out: Vec<SkyObject> = Vec::with_capacity(records.len());
    for i in &idx {
        out.push(records[*i].clone());
    }
    records.clone_from_slice(&out);
    Ok(())
}
