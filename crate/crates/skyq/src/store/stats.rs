use crate::error::{Error, Result};
use crate::htm::TrixelId;
use crate::store::container::{read_container, IoStats};
use crate::store::{Catalog, Projection, Record, BAND_NAMES};

/// Min/max of one attribute over the whole catalog.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandStats {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone)]
pub struct CatalogStats {
    pub total_objects: u64,
    pub containers: u64,
    /// Per magnitude band u,g,r,i,z; None for an empty catalog.
    pub bands: [Option<BandStats>; 5],
    pub size: Option<BandStats>,
    pub per_container: Vec<(TrixelId, u64)>,
}

/// Scans every container's tag section, cross-checking the header counts
/// against the catalog meta. Corrupt files surface as integrity errors
/// naming the file.
pub fn stats(catalog: &Catalog, io: &IoStats) -> Result<CatalogStats> {
    let expected = catalog.meta().container_counts();
    let mut bands: [Option<BandStats>; 5] = [None; 5];
    let mut size: Option<BandStats> = None;
    let mut per_container = Vec::with_capacity(expected.len());
    let mut total = 0u64;

    let widen = |slot: &mut Option<BandStats>, v: f64| {
        *slot = Some(match slot {
            None => BandStats { min: v, max: v },
            Some(b) => BandStats {
                min: b.min.min(v),
                max: b.max.max(v),
            },
        })
    };

    for trixel in catalog.container_ids() {
        let path = catalog.container_path(trixel);
        let records = read_container(&path, catalog.schema(), Projection::Tag, io)?;
        let n = records.len() as u64;
        let want = expected.get(&trixel).copied().unwrap_or(0);
        if n != want {
            return Err(Error::integrity(format!(
                "{}: holds {n} records but meta says {want}",
                path.display()
            )));
        }
        for r in &records {
            if let Record::Tag(t) = r {
                for (i, m) in t.mags.iter().enumerate() {
                    widen(&mut bands[i], *m);
                }
                widen(&mut size, t.size_arcsec);
            }
        }
        per_container.push((trixel, n));
        total += n;
    }

    if total != catalog.meta().total_objects {
        return Err(Error::integrity(format!(
            "containers hold {total} records but meta says {}",
            catalog.meta().total_objects
        )));
    }
    Ok(CatalogStats {
        total_objects: total,
        containers: per_container.len() as u64,
        bands,
        size,
        per_container,
    })
}

impl CatalogStats {
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("total_objects = {}\n", self.total_objects));
        s.push_str(&format!("containers = {}\n", self.containers));
        for (i, b) in self.bands.iter().enumerate() {
            if let Some(b) = b {
                s.push_str(&format!("band {} min={} max={}\n", BAND_NAMES[i], b.min, b.max));
            }
        }
        if let Some(b) = &self.size {
            s.push_str(&format!("size_arcsec min={} max={}\n", b.min, b.max));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::load::{ingest_chunk, Chunk};
    use crate::store::testutil::uniform_objects;
    use crate::store::Schema;

    #[test]
    fn empty_catalog_stats() {
        let dir = tempfile::tempdir().unwrap();
        let cat = Catalog::create(&dir.path().join("c"), 4, Schema::default()).unwrap();
        let s = stats(&cat, &IoStats::new()).unwrap();
        assert_eq!(s.total_objects, 0);
        assert_eq!(s.containers, 0);
        assert!(s.bands.iter().all(|b| b.is_none()));
    }

    #[test]
    fn minmax_matches_brute_force() {
        let dir = tempfile::tempdir().unwrap();
        let mut cat = Catalog::create(&dir.path().join("c"), 4, Schema::default()).unwrap();
        let objs = uniform_objects(4000, 70);
        let want_min = objs.iter().map(|o| o.mags[2]).fold(f64::MAX, f64::min);
        let want_max = objs.iter().map(|o| o.mags[2]).fold(f64::MIN, f64::max);
        ingest_chunk(&mut cat, Chunk::new("g", objs).unwrap()).unwrap();
        let s = stats(&cat, &IoStats::new()).unwrap();
        assert_eq!(s.total_objects, 4000);
        let r = s.bands[2].unwrap();
        assert_eq!(r.min, want_min);
        assert_eq!(r.max, want_max);
        let sum: u64 = s.per_container.iter().map(|(_, n)| n).sum();
        assert_eq!(sum, 4000);
    }

    #[test]
    fn corrupt_container_is_an_integrity_error_naming_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let mut cat = Catalog::create(&dir.path().join("c"), 4, Schema::default()).unwrap();
        ingest_chunk(&mut cat, Chunk::new("g", uniform_objects(200, 71)).unwrap()).unwrap();
        let victim = cat.container_path(cat.container_ids()[0]);
        let mut bytes = std::fs::read(&victim).unwrap();
        let n = bytes.len();
        bytes[n / 2] ^= 0x55;
        std::fs::write(&victim, bytes).unwrap();
        let err = stats(&cat, &IoStats::new()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("integrity"), "{msg}");
        assert!(msg.contains(".ctr"), "{msg}");
        assert_eq!(err.exit_code(), 4);
    }
}
