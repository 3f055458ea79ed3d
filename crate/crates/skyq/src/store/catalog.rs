use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::htm::{TrixelCounts, TrixelId};
use crate::store::Schema;

pub const CURRENT_FORMAT_VERSION: u16 = 1;

/// Counts granularity sits two levels below the containers to serve
/// selectivity estimates at the default classification depth.
pub const COUNTS_LEVELS_BELOW_STORAGE: u8 = 2;

/// Catalog-wide metadata, persisted as human-readable key/value text.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogMeta {
    pub format_version: u16,
    pub storage_depth: u8,
    pub schema: Schema,
    pub total_objects: u64,
    pub load_history: Vec<String>,
    /// Object counts at storage_depth + 2, keyed by raw trixel id.
    pub fine_counts: BTreeMap<u64, u64>,
}

impl CatalogMeta {
    pub fn new(storage_depth: u8, schema: Schema) -> CatalogMeta {
        CatalogMeta {
            format_version: CURRENT_FORMAT_VERSION,
            storage_depth,
            schema,
            total_objects: 0,
            load_history: Vec::new(),
            fine_counts: BTreeMap::new(),
        }
    }

    pub fn counts_level(&self) -> u8 {
        self.storage_depth + COUNTS_LEVELS_BELOW_STORAGE
    }

    pub fn trixel_counts(&self) -> TrixelCounts {
        TrixelCounts::new(self.counts_level(), self.fine_counts.clone())
    }

    /// Distinct containers (storage-depth ancestors of the fine counts).
    pub fn container_ids(&self) -> Vec<TrixelId> {
        let mut out: Vec<TrixelId> = Vec::new();
        for raw in self.fine_counts.keys() {
            let t = TrixelId::from_raw_unchecked(*raw).ancestor_at(self.storage_depth);
            if out.last() != Some(&t) {
                out.push(t);
            }
        }
        out.dedup();
        out
    }

    /// Object count per container at the storage depth.
    pub fn container_counts(&self) -> BTreeMap<TrixelId, u64> {
        let mut out: BTreeMap<TrixelId, u64> = BTreeMap::new();
        for (raw, n) in &self.fine_counts {
            let t = TrixelId::from_raw_unchecked(*raw).ancestor_at(self.storage_depth);
            *out.entry(t).or_insert(0) += n;
        }
        out
    }

    pub(crate) fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("format_version = {}\n", self.format_version));
        s.push_str(&format!("storage_depth = {}\n", self.storage_depth));
        s.push_str(&format!("schema = {}\n", self.schema.extras().join(",")));
        s.push_str(&format!("total_objects = {}\n", self.total_objects));
        s.push_str(&format!("load_history = {}\n", self.load_history.join(";")));
        for (raw, n) in &self.fine_counts {
            s.push_str(&format!("count.{raw} = {n}\n"));
        }
        s
    }

    fn parse(text: &str) -> Result<CatalogMeta> {
        let mut format_version = None;
        let mut storage_depth = None;
        let mut schema = None;
        let mut total_objects = None;
        let mut load_history = Vec::new();
        let mut fine_counts = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::integrity(format!("meta line {}: no '='", i + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| Error::integrity(format!("meta line {}: bad {what}", i + 1));
            match key {
                "format_version" => {
                    format_version = Some(value.parse::<u16>().map_err(|_| bad("version"))?)
                }
                "storage_depth" => {
                    storage_depth = Some(value.parse::<u8>().map_err(|_| bad("depth"))?)
                }
                "schema" => {
                    let extras = if value.is_empty() {
                        Vec::new()
                    } else {
                        value.split(',').map(|s| s.trim().to_string()).collect()
                    };
                    schema = Some(Schema::new(extras).map_err(|e| bad(&e.to_string()))?);
                }
                "total_objects" => {
                    total_objects = Some(value.parse::<u64>().map_err(|_| bad("total"))?)
                }
                "load_history" => {
                    if !value.is_empty() {
                        load_history = value.split(';').map(|s| s.to_string()).collect();
                    }
                }
                _ => {
                    if let Some(raw) = key.strip_prefix("count.") {
                        let raw = raw.parse::<u64>().map_err(|_| bad("trixel id"))?;
                        let n = value.parse::<u64>().map_err(|_| bad("count"))?;
                        fine_counts.insert(raw, n);
                    } else {
                        return Err(Error::integrity(format!(
                            "meta line {}: unknown key {key:?}",
                            i + 1
                        )));
                    }
                }
            }
        }
        let meta = CatalogMeta {
            format_version: format_version.ok_or_else(|| Error::integrity("meta: missing format_version"))?,
            storage_depth: storage_depth.ok_or_else(|| Error::integrity("meta: missing storage_depth"))?,
            schema: schema.ok_or_else(|| Error::integrity("meta: missing schema"))?,
            total_objects: total_objects.ok_or_else(|| Error::integrity("meta: missing total_objects"))?,
            load_history,
            fine_counts,
        };
        if meta.format_version != CURRENT_FORMAT_VERSION {
            return Err(Error::integrity(format!(
                "meta: unsupported format version {}",
                meta.format_version
            )));
        }
        let sum: u64 = meta.fine_counts.values().sum();
        if sum != meta.total_objects {
            return Err(Error::integrity(format!(
                "meta: counts sum {sum} != total_objects {}",
                meta.total_objects
            )));
        }
        Ok(meta)
    }
}

/// An open catalog pinned to one published version directory.
///
/// Readers hold a version and are unaffected by loads, which stage a new
/// version directory and atomically republish `CURRENT`.
#[derive(Debug, Clone)]
pub struct Catalog {
    root: PathBuf,
    version: u64,
    meta: CatalogMeta,
}

pub(crate) fn version_dir_name(version: u64) -> String {
    format!("v{version:06}")
}

const IDS_MAGIC: [u8; 4] = *b"SKYI";

pub(crate) fn write_ids(path: &Path, ids: &[u64]) -> Result<()> {
    debug_assert!(ids.windows(2).all(|w| w[0] < w[1]));
    let mut buf = Vec::with_capacity(12 + ids.len() * 8);
    buf.extend_from_slice(&IDS_MAGIC);
    buf.extend_from_slice(&(ids.len() as u64).to_le_bytes());
    for id in ids {
        buf.extend_from_slice(&id.to_le_bytes());
    }
    let crc = crc32fast::hash(&buf[12..]);
    buf.extend_from_slice(&crc.to_le_bytes());
    fs::write(path, buf)?;
    Ok(())
}

pub(crate) fn read_ids(path: &Path) -> Result<Vec<u64>> {
    let mut f = fs::File::open(path)?;
    let mut buf = Vec::new();
    f.read_to_end(&mut buf)?;
    let fail = |msg: &str| Error::integrity(format!("{}: {msg}", path.display()));
    if buf.len() < 16 || buf[..4] != IDS_MAGIC {
        return Err(fail("bad id index header"));
    }
    let n = u64::from_le_bytes(buf[4..12].try_into().unwrap()) as usize;
    if buf.len() != 16 + n * 8 {
        return Err(fail("bad id index length"));
    }
    let payload = &buf[12..12 + n * 8];
    let want = u32::from_le_bytes(buf[12 + n * 8..].try_into().unwrap());
    if crc32fast::hash(payload) != want {
        return Err(fail("id index CRC mismatch"));
    }
    Ok(payload
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

impl Catalog {
    /// Creates an empty catalog and publishes version 0.
    pub fn create(root: &Path, storage_depth: u8, schema: Schema) -> Result<Catalog> {
        if storage_depth + COUNTS_LEVELS_BELOW_STORAGE > crate::htm::MAX_LEVEL {
            return Err(Error::domain(format!(
                "storage depth {storage_depth} too deep (max {})",
                crate::htm::MAX_LEVEL - COUNTS_LEVELS_BELOW_STORAGE
            )));
        }
        if root.exists() && fs::read_dir(root)?.next().is_some() {
            return Err(Error::domain(format!(
                "{}: directory exists and is not empty",
                root.display()
            )));
        }
        fs::create_dir_all(root)?;
        let meta = CatalogMeta::new(storage_depth, schema);
        let vdir = root.join(version_dir_name(0));
        fs::create_dir(&vdir)?;
        fs::create_dir(vdir.join("containers"))?;
        fs::write(vdir.join("meta.skyq"), meta.render())?;
        write_ids(&vdir.join("ids.bin"), &[])?;
        publish_current(root, 0)?;
        Ok(Catalog {
            root: root.to_path_buf(),
            version: 0,
            meta,
        })
    }

    /// Opens the currently published version.
    pub fn open(root: &Path) -> Result<Catalog> {
        let current = fs::read_to_string(root.join("CURRENT")).map_err(|_| {
            Error::domain(format!("{}: not a catalog (no CURRENT file)", root.display()))
        })?;
        let name = current.trim();
        let version: u64 = name
            .strip_prefix('v')
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::integrity(format!("bad CURRENT contents {name:?}")))?;
        let vdir = root.join(name);
        let meta_text = fs::read_to_string(vdir.join("meta.skyq"))?;
        let meta = CatalogMeta::parse(&meta_text)?;
        Ok(Catalog {
            root: root.to_path_buf(),
            version,
            meta,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn meta(&self) -> &CatalogMeta {
        &self.meta
    }

    pub fn schema(&self) -> &Schema {
        &self.meta.schema
    }

    pub fn storage_depth(&self) -> u8 {
        self.meta.storage_depth
    }

    pub fn version_dir(&self) -> PathBuf {
        self.root.join(version_dir_name(self.version))
    }

    pub fn container_dir(&self) -> PathBuf {
        self.version_dir().join("containers")
    }

    pub fn container_path(&self, trixel: TrixelId) -> PathBuf {
        self.container_dir().join(format!("{}.ctr", trixel.raw()))
    }

    /// Sorted ids of all existing containers in this version.
    pub fn container_ids(&self) -> Vec<TrixelId> {
        self.meta.container_ids()
    }

    pub fn object_ids(&self) -> Result<Vec<u64>> {
        read_ids(&self.version_dir().join("ids.bin"))
    }

    /// Re-reads CURRENT, returning the newest published version.
    pub fn reopened(&self) -> Result<Catalog> {
        Catalog::open(&self.root)
    }
}

pub(crate) fn publish_current(root: &Path, version: u64) -> Result<()> {
    let tmp = root.join("CURRENT.tmp");
    let mut f = fs::File::create(&tmp)?;
    f.write_all(version_dir_name(version).as_bytes())?;
    f.sync_all()?;
    fs::rename(&tmp, root.join("CURRENT"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn create_open_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("cat");
        let schema = Schema::new(vec!["w1".into()]).unwrap();
        let c = Catalog::create(&root, 4, schema.clone()).unwrap();
        assert_eq!(c.version(), 0);
        let o = Catalog::open(&root).unwrap();
        assert_eq!(o.meta(), c.meta());
        assert_eq!(o.schema(), &schema);
        assert_eq!(o.container_ids().len(), 0);
        assert_eq!(o.object_ids().unwrap().len(), 0);
    }

    #[test]
    fn create_refuses_nonempty_dir() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("cat");
        fs::create_dir_all(root.join("junk")).unwrap();
        assert!(Catalog::create(&root, 4, Schema::default()).is_err());
    }

    #[test]
    fn meta_text_roundtrip() {
        let mut meta = CatalogMeta::new(3, Schema::new(vec!["a".into(), "b".into()]).unwrap());
        meta.total_objects = 7;
        meta.load_history = vec!["x.csv".into(), "y.csv".into()];
        meta.fine_counts.insert(TrixelId::base(7).child(0).child(1).child(2).child(3).child(0).raw(), 4);
        meta.fine_counts.insert(TrixelId::base(0).child(1).child(1).child(1).child(1).child(1).raw(), 3);
        let parsed = CatalogMeta::parse(&meta.render()).unwrap();
        assert_eq!(parsed, meta);
    }

    #[test]
    fn meta_rejects_count_mismatch() {
        let text = "format_version = 1\nstorage_depth = 4\nschema = \ntotal_objects = 5\nload_history = \ncount.8 = 2\n";
        // count.8 is level 0, fine for parsing, but the sum 2 != 5
        assert!(CatalogMeta::parse(text).is_err());
    }

    #[test]
    fn ids_file_roundtrip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ids.bin");
        write_ids(&path, &[1, 5, 9]).unwrap();
        assert_eq!(read_ids(&path).unwrap(), vec![1, 5, 9]);
        let mut bytes = fs::read(&path).unwrap();
        bytes[13] ^= 1;
        fs::write(&path, bytes).unwrap();
        assert!(read_ids(&path).is_err());
    }

    #[test]
    fn container_aggregation() {
        let mut meta = CatalogMeta::new(2, Schema::default());
        let fine = |b: u8, c1: u8, c2: u8, c3: u8, c4: u8| {
            TrixelId::base(b).child(c1).child(c2).child(c3).child(c4).raw()
        };
        meta.fine_counts.insert(fine(0, 0, 0, 0, 0), 5);
        meta.fine_counts.insert(fine(0, 0, 0, 1, 2), 3);
        meta.fine_counts.insert(fine(1, 2, 3, 0, 0), 1);
        meta.total_objects = 9;
        let containers = meta.container_counts();
        assert_eq!(containers.len(), 2);
        assert_eq!(containers[&TrixelId::base(0).child(0).child(0)], 8);
        assert_eq!(containers[&TrixelId::base(1).child(2).child(3)], 1);
    }
}
