//! Persistent catalog: trixel-keyed container files with a tag/full vertical
//! partition, a two-phase single-pass bulk loader, deterministic sampling,
//! and per-container statistics.

mod catalog;
mod container;
mod csvio;
mod load;
mod sample;
mod scan;
mod stats;

pub use catalog::{Catalog, CatalogMeta, CURRENT_FORMAT_VERSION};
pub use container::{read_container, read_header, ContainerHeader, IoStats, TAG_RECORD_SIZE};
pub use csvio::{chunk_from_csv_path, chunk_from_csv_reader, write_csv_header, write_csv_row};
pub use load::{ingest_chunk, Chunk, LoadReport};
pub use sample::{mix64, sample};
pub use scan::{scan_stream, ContainerMode, ScanPlan};
pub use stats::{stats, BandStats, CatalogStats};

use crate::error::{Error, Result};
use crate::htm::TrixelId;
use crate::sphere::UnitVec;

/// Names of the five magnitude bands, in record order.
pub const BAND_NAMES: [&str; 5] = ["u", "g", "r", "i", "z"];

/// Object classification code, stored as one byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum ObjClass {
    Star = 0,
    Galaxy = 1,
    Qso = 2,
    Unknown = 3,
}

impl ObjClass {
    pub fn from_code(code: u8) -> Result<ObjClass> {
        match code {
            0 => Ok(ObjClass::Star),
            1 => Ok(ObjClass::Galaxy),
            2 => Ok(ObjClass::Qso),
            3 => Ok(ObjClass::Unknown),
            _ => Err(Error::integrity(format!("bad class code {code}"))),
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            ObjClass::Star => "STAR",
            ObjClass::Galaxy => "GALAXY",
            ObjClass::Qso => "QSO",
            ObjClass::Unknown => "UNKNOWN",
        }
    }

    pub fn parse(s: &str) -> Result<ObjClass> {
        match s.to_ascii_uppercase().as_str() {
            "STAR" => Ok(ObjClass::Star),
            "GALAXY" => Ok(ObjClass::Galaxy),
            "QSO" => Ok(ObjClass::Qso),
            "UNKNOWN" => Ok(ObjClass::Unknown),
            _ => Err(Error::domain(format!("unknown class {s:?}"))),
        }
    }
}

/// A full catalog record: the ten tag attributes plus schema-driven extras.
#[derive(Debug, Clone, PartialEq)]
pub struct SkyObject {
    pub obj_id: u64,
    pub pos: UnitVec,
    /// Magnitudes in the order u, g, r, i, z (smaller = brighter).
    pub mags: [f64; 5],
    pub size_arcsec: f64,
    pub class: ObjClass,
    pub extras: Vec<f64>,
}

impl SkyObject {
    pub fn mag(&self, band: usize) -> f64 {
        self.mags[band]
    }
}

/// Vertical partition of a [`SkyObject`]: the most-queried attributes only.
///
/// `home_trixel` is the owning container's trixel at the storage depth; on
/// disk it lives once in the container header, not per record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TagRecord {
    pub obj_id: u64,
    pub pos: UnitVec,
    pub mags: [f64; 5],
    pub size_arcsec: f64,
    pub class: ObjClass,
    pub home_trixel: TrixelId,
}

impl TagRecord {
    pub fn of(obj: &SkyObject, home_trixel: TrixelId) -> TagRecord {
        TagRecord {
            obj_id: obj.obj_id,
            pos: obj.pos,
            mags: obj.mags,
            size_arcsec: obj.size_arcsec,
            class: obj.class,
            home_trixel,
        }
    }
}

/// The names of a catalog's extra attributes. The hash pins container files
/// to the schema they were written under.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Schema {
    extras: Vec<String>,
}

impl Schema {
    pub fn new(extras: Vec<String>) -> Result<Schema> {
        for name in &extras {
            if name.is_empty()
                || !name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_')
                || !name.chars().next().unwrap().is_ascii_alphabetic()
            {
                return Err(Error::domain(format!(
                    "bad extra attribute name {name:?} (want [a-zA-Z][a-zA-Z0-9_]*)"
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for name in &extras {
            if !seen.insert(name.as_str()) {
                return Err(Error::domain(format!("duplicate extra attribute {name:?}")));
            }
        }
        Ok(Schema { extras })
    }

    pub fn extras(&self) -> &[String] {
        &self.extras
    }

    pub fn extra_index(&self, name: &str) -> Option<usize> {
        self.extras.iter().position(|n| n == name)
    }

    /// FNV-1a over the joined extra names; stable across runs.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for name in &self.extras {
            for b in name.as_bytes() {
                h ^= *b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
            h ^= 0x1f;
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }

    pub fn full_record_size(&self) -> usize {
        TAG_RECORD_SIZE + 8 * self.extras.len()
    }
}

/// A record streamed out of a scan, in either projection.
#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    Tag(TagRecord),
    Full(SkyObject, TrixelId),
}

impl Record {
    pub fn obj_id(&self) -> u64 {
        match self {
            Record::Tag(t) => t.obj_id,
            Record::Full(o, _) => o.obj_id,
        }
    }

    pub fn pos(&self) -> UnitVec {
        match self {
            Record::Tag(t) => t.pos,
            Record::Full(o, _) => o.pos,
        }
    }

    pub fn mags(&self) -> &[f64; 5] {
        match self {
            Record::Tag(t) => &t.mags,
            Record::Full(o, _) => &o.mags,
        }
    }

    pub fn size_arcsec(&self) -> f64 {
        match self {
            Record::Tag(t) => t.size_arcsec,
            Record::Full(o, _) => o.size_arcsec,
        }
    }

    pub fn class(&self) -> ObjClass {
        match self {
            Record::Tag(t) => t.class,
            Record::Full(o, _) => o.class,
        }
    }

    pub fn home_trixel(&self) -> TrixelId {
        match self {
            Record::Tag(t) => t.home_trixel,
            Record::Full(_, home) => *home,
        }
    }

    /// Extra attribute by schema index; absent in the tag projection.
    pub fn extra(&self, index: usize) -> Option<f64> {
        match self {
            Record::Tag(_) => None,
            Record::Full(o, _) => o.extras.get(index).copied(),
        }
    }

    pub fn as_tag(&self) -> TagRecord {
        match self {
            Record::Tag(t) => *t,
            Record::Full(o, home) => TagRecord::of(o, *home),
        }
    }
}

/// Which section of the container a scan reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    Tag,
    Full,
}
