use std::path::Path;

use crate::error::{Error, Result};
use crate::store::catalog::{publish_current, version_dir_name, write_ids};
use crate::store::container::{read_objects, write_container, IoStats};
use crate::store::{Catalog, CatalogMeta};

/// 64-bit finalizer-style mixer (the splitmix64 output stage). Documented in
/// docs/FORMAT.md as part of the on-disk contract: samples are reproducible
/// from (seed, fraction) alone, on any implementation.
pub fn mix64(mut x: u64) -> u64 {
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58476d1ce4e5b9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94d049bb133111eb);
    x ^= x >> 31;
    x
}

fn keep(obj_id: u64, seed: u64, fraction: f64) -> bool {
    let threshold = (fraction * 2f64.powi(64)) as u128;
    (mix64(obj_id ^ seed) as u128) < threshold
}

/// Writes a deterministic subsample of `catalog` as a complete new catalog at
/// `dest`: identical schema and storage depth, object kept iff
/// mix64(obj_id XOR seed) / 2^64 < fraction.
///
/// Sampling preserves home containers, so this is a single filtered pass:
/// each source container read once, each surviving container written once.
pub fn sample(catalog: &Catalog, fraction: f64, seed: u64, dest: &Path) -> Result<Catalog> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::domain(format!(
            "sample fraction {fraction} out of range (0, 1]"
        )));
    }
    if dest.exists() && std::fs::read_dir(dest)?.next().is_some() {
        return Err(Error::domain(format!(
            "{}: directory exists and is not empty",
            dest.display()
        )));
    }
    std::fs::create_dir_all(dest)?;
    let vdir = dest.join(version_dir_name(0));
    std::fs::create_dir(&vdir)?;
    std::fs::create_dir(vdir.join("containers"))?;

    let io = IoStats::new();
    let fine_level = catalog.meta().counts_level();
    let mut meta = CatalogMeta::new(catalog.storage_depth(), catalog.schema().clone());
    let mut ids: Vec<u64> = Vec::new();

    for trixel in catalog.container_ids() {
        let objs = read_objects(&catalog.container_path(trixel), catalog.schema(), &io)?;
        let kept: Vec<_> = objs
            .into_iter()
            .filter(|o| keep(o.obj_id, seed, fraction))
            .collect();
        if kept.is_empty() {
            continue;
        }
        for o in &kept {
            ids.push(o.obj_id);
            let fine = crate::htm::locate(o.pos, fine_level)?;
            *meta.fine_counts.entry(fine.raw()).or_insert(0) += 1;
        }
        // source order is already storage order; filtering preserves it
        write_container(
            &vdir.join("containers").join(format!("{}.ctr", trixel.raw())),
            trixel,
            catalog.schema(),
            &kept,
        )?;
    }

    ids.sort_unstable();
    meta.total_objects = ids.len() as u64;
    meta.load_history = vec![format!(
        "sample:fraction={fraction}:seed={seed}:from={}",
        catalog.version()
    )];
    write_ids(&vdir.join("ids.bin"), &ids)?;
    std::fs::write(vdir.join("meta.skyq"), meta.render())?;
    publish_current(dest, 0)?;
    Catalog::open(dest)
}
