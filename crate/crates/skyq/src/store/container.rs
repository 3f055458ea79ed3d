use std::fs::File;
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::htm::TrixelId;
use crate::store::{ObjClass, Projection, Record, Schema, SkyObject, TagRecord};

pub const MAGIC: [u8; 4] = *b"SKYA";
pub const HEADER_SIZE: usize = 38;

/// Fixed-width tag record: obj_id, x, y, z, five magnitudes, size, class.
pub const TAG_RECORD_SIZE: usize = 8 + 3 * 8 + 5 * 8 + 8 + 1;

/// Byte and open counters for scan instrumentation. Shared per query (or per
/// load) so the tag/full read split is directly measurable.
#[derive(Debug, Default)]
pub struct IoStats {
    pub containers_opened: AtomicU64,
    pub bytes_tag: AtomicU64,
    pub bytes_full: AtomicU64,
    pub records_read: AtomicU64,
}

impl IoStats {
    pub fn new() -> IoStats {
        IoStats::default()
    }

    pub fn snapshot(&self) -> (u64, u64, u64, u64) {
        (
            self.containers_opened.load(Ordering::Relaxed),
            self.bytes_tag.load(Ordering::Relaxed),
            self.bytes_full.load(Ordering::Relaxed),
            self.records_read.load(Ordering::Relaxed),
        )
    }
}

/// Decoded container file header.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContainerHeader {
    pub format_version: u16,
    pub trixel: TrixelId,
    pub record_count: u64,
    pub tag_section_len: u64,
    pub schema_hash: u64,
}

fn put_u16(buf: &mut Vec<u8>, v: u16) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Cursor { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::integrity("truncated container data".to_string()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
}

fn encode_tag_fields(buf: &mut Vec<u8>, obj: &SkyObject) {
    put_u64(buf, obj.obj_id);
    put_f64(buf, obj.pos.x());
    put_f64(buf, obj.pos.y());
    put_f64(buf, obj.pos.z());
    for m in obj.mags {
        put_f64(buf, m);
    }
    put_f64(buf, obj.size_arcsec);
    buf.push(obj.class.code());
}

fn decode_tag_fields(c: &mut Cursor<'_>) -> Result<(u64, crate::sphere::UnitVec, [f64; 5], f64, ObjClass)> {
    let obj_id = c.u64()?;
    let x = c.f64()?;
    let y = c.f64()?;
    let z = c.f64()?;
    let pos = crate::sphere::UnitVec::new(x, y, z)
        .map_err(|_| Error::integrity(format!("object {obj_id}: bad position")))?;
    let mut mags = [0.0; 5];
    for m in &mut mags {
        *m = c.f64()?;
    }
    let size = c.f64()?;
    let class = ObjClass::from_code(c.u8()?)?;
    Ok((obj_id, pos, mags, size, class))
}

/// Serializes a container: header, tag section + CRC32, full section + CRC32,
/// all little-endian. Records must already be in storage order.
pub fn encode_container(trixel: TrixelId, schema: &Schema, objects: &[SkyObject]) -> Vec<u8> {
    let tag_len = objects.len() * TAG_RECORD_SIZE;
    let full_len = objects.len() * schema.full_record_size();
    let mut buf = Vec::with_capacity(HEADER_SIZE + tag_len + full_len + 8);
    buf.extend_from_slice(&MAGIC);
    put_u16(&mut buf, crate::store::CURRENT_FORMAT_VERSION);
    put_u64(&mut buf, trixel.raw());
    put_u64(&mut buf, objects.len() as u64);
    put_u64(&mut buf, tag_len as u64);
    put_u64(&mut buf, schema.hash());
    debug_assert_eq!(buf.len(), HEADER_SIZE);

    let tag_start = buf.len();
    for obj in objects {
        encode_tag_fields(&mut buf, obj);
    }
    let tag_crc = crc32fast::hash(&buf[tag_start..]);
    buf.extend_from_slice(&tag_crc.to_le_bytes());

    let full_start = buf.len();
    for obj in objects {
        encode_tag_fields(&mut buf, obj);
        debug_assert_eq!(obj.extras.len(), schema.extras().len());
        for e in &obj.extras {
            put_f64(&mut buf, *e);
        }
    }
    let full_crc = crc32fast::hash(&buf[full_start..]);
    buf.extend_from_slice(&full_crc.to_le_bytes());
    buf
}

fn parse_header(buf: &[u8], path: &Path) -> Result<ContainerHeader> {
    let mut c = Cursor::new(buf);
    let magic = c.take(4)?;
    if magic != MAGIC {
        return Err(Error::integrity(format!(
            "{}: bad magic (not a container file)",
            path.display()
        )));
    }
    let format_version = c.u16()?;
    if format_version != crate::store::CURRENT_FORMAT_VERSION {
        return Err(Error::integrity(format!(
            "{}: unsupported format version {format_version}",
            path.display()
        )));
    }
    let trixel = TrixelId::new(c.u64()?)
        .map_err(|e| Error::integrity(format!("{}: {e}", path.display())))?;
    let record_count = c.u64()?;
    let tag_section_len = c.u64()?;
    let schema_hash = c.u64()?;
    if tag_section_len != record_count * TAG_RECORD_SIZE as u64 {
        return Err(Error::integrity(format!(
            "{}: tag section length {tag_section_len} disagrees with record count {record_count}",
            path.display()
        )));
    }
    Ok(ContainerHeader {
        format_version,
        trixel,
        record_count,
        tag_section_len,
        schema_hash,
    })
}

/// Reads just the header (38 bytes), counting the read into `io`.
pub fn read_header(path: &Path, io: &IoStats) -> Result<ContainerHeader> {
    let mut f = File::open(path)?;
    io.containers_opened.fetch_add(1, Ordering::Relaxed);
    let mut buf = [0u8; HEADER_SIZE];
    f.read_exact(&mut buf)
        .map_err(|_| Error::integrity(format!("{}: truncated header", path.display())))?;
    io.bytes_tag.fetch_add(HEADER_SIZE as u64, Ordering::Relaxed);
    parse_header(&buf, path)
}

/// Reads a container in the requested projection, with CRC verification of the
/// section actually read. The tag projection reads only the file prefix.
pub fn read_container(
    path: &Path,
    schema: &Schema,
    projection: Projection,
    io: &IoStats,
) -> Result<Vec<Record>> {
    let mut f = File::open(path)?;
    io.containers_opened.fetch_add(1, Ordering::Relaxed);
    let mut head = [0u8; HEADER_SIZE];
    f.read_exact(&mut head)
        .map_err(|_| Error::integrity(format!("{}: truncated header", path.display())))?;
    let header = parse_header(&head, path)?;
    if header.schema_hash != schema.hash() {
        return Err(Error::integrity(format!(
            "{}: schema hash mismatch",
            path.display()
        )));
    }
    let n = header.record_count as usize;
    match projection {
        Projection::Tag => {
            let mut section = vec![0u8; header.tag_section_len as usize + 4];
            f.read_exact(&mut section)
                .map_err(|_| Error::integrity(format!("{}: truncated tag section", path.display())))?;
            io.bytes_tag
                .fetch_add((HEADER_SIZE + section.len()) as u64, Ordering::Relaxed);
            let (payload, crc_bytes) = section.split_at(header.tag_section_len as usize);
            let want = u32::from_le_bytes(crc_bytes.try_into().unwrap());
            if crc32fast::hash(payload) != want {
                return Err(Error::integrity(format!(
                    "{}: tag section CRC mismatch",
                    path.display()
                )));
            }
            let mut c = Cursor::new(payload);
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                let (obj_id, pos, mags, size_arcsec, class) = decode_tag_fields(&mut c)?;
                out.push(Record::Tag(TagRecord {
                    obj_id,
                    pos,
                    mags,
                    size_arcsec,
                    class,
                    home_trixel: header.trixel,
                }));
            }
            Ok(out)
        }
        Projection::Full => {
            let full_len = n * schema.full_record_size();
            f.seek(SeekFrom::Start(
                (HEADER_SIZE as u64) + header.tag_section_len + 4,
            ))?;
            let mut section = vec![0u8; full_len + 4];
            f.read_exact(&mut section).map_err(|_| {
                Error::integrity(format!("{}: truncated full section", path.display()))
            })?;
            io.bytes_full
                .fetch_add((HEADER_SIZE + section.len()) as u64, Ordering::Relaxed);
            let (payload, crc_bytes) = section.split_at(full_len);
            let want = u32::from_le_bytes(crc_bytes.try_into().unwrap());
            if crc32fast::hash(payload) != want {
                return Err(Error::integrity(format!(
                    "{}: full section CRC mismatch",
                    path.display()
                )));
            }
            let mut c = Cursor::new(payload);
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                let (obj_id, pos, mags, size_arcsec, class) = decode_tag_fields(&mut c)?;
                let mut extras = Vec::with_capacity(schema.extras().len());
                for _ in 0..schema.extras().len() {
                    extras.push(c.f64()?);
                }
                out.push(Record::Full(
                    SkyObject {
                        obj_id,
                        pos,
                        mags,
                        size_arcsec,
                        class,
                        extras,
                    },
                    header.trixel,
                ));
            }
            Ok(out)
        }
    }
}

/// Reads the full section and returns owned objects (loader merge path).
pub fn read_objects(path: &Path, schema: &Schema, io: &IoStats) -> Result<Vec<SkyObject>> {
    Ok(read_container(path, schema, Projection::Full, io)?
        .into_iter()
        .map(|r| match r {
            Record::Full(o, _) => o,
            Record::Tag(_) => unreachable!("full projection yields full records"),
        })
        .collect())
}

pub fn write_container(
    path: &Path,
    trixel: TrixelId,
    schema: &Schema,
    objects: &[SkyObject],
) -> Result<()> {
    let bytes = encode_container(trixel, schema, objects);
    let mut f = File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::UnitVec;

    fn obj(id: u64, extras: Vec<f64>) -> SkyObject {
        SkyObject {
            obj_id: id,
            pos: UnitVec::new(1.0, id as f64 * 0.01, 0.2).unwrap(),
            mags: [20.0, 19.5, 19.0, 18.8, 18.7],
            size_arcsec: 1.5,
            class: ObjClass::Galaxy,
            extras,
        }
    }

    #[test]
    fn roundtrip_both_projections() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("8.ctr");
        let schema = Schema::new(vec!["e0".into(), "e1".into()]).unwrap();
        let trixel = TrixelId::new(8).unwrap();
        let objects = vec![obj(1, vec![0.5, -0.5]), obj(2, vec![1.5, 2.5])];
        write_container(&path, trixel, &schema, &objects).unwrap();

        let io = IoStats::new();
        let tags = read_container(&path, &schema, Projection::Tag, &io).unwrap();
        assert_eq!(tags.len(), 2);
        assert_eq!(tags[0].obj_id(), 1);
        assert_eq!(tags[0].home_trixel(), trixel);
        assert_eq!(tags[0].extra(0), None);

        let fulls = read_container(&path, &schema, Projection::Full, &io).unwrap();
        assert_eq!(fulls[1].extra(1), Some(2.5));
        match &fulls[0] {
            Record::Full(o, _) => assert_eq!(o, &objects[0]),
            _ => panic!(),
        }
        assert_eq!(io.containers_opened.load(Ordering::Relaxed), 2);
    }

    #[test]
    fn tag_read_is_a_prefix() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("9.ctr");
        let schema = Schema::new(vec!["a".into(); 1].into_iter().collect::<Vec<_>>()).unwrap();
        let trixel = TrixelId::new(9).unwrap();
        let objects: Vec<SkyObject> = (0..10).map(|i| obj(i, vec![i as f64])).collect();
        write_container(&path, trixel, &schema, &objects).unwrap();

        let io = IoStats::new();
        read_container(&path, &schema, Projection::Tag, &io).unwrap();
        let (_, tag_bytes, full_bytes, _) = io.snapshot();
        assert_eq!(full_bytes, 0);
        assert_eq!(tag_bytes as usize, HEADER_SIZE + 10 * TAG_RECORD_SIZE + 4);
        let file_len = std::fs::metadata(&path).unwrap().len();
        assert!(tag_bytes < file_len);
    }

    #[test]
    fn corruption_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("10.ctr");
        let schema = Schema::default();
        let trixel = TrixelId::new(10).unwrap();
        write_container(&path, trixel, &schema, &[obj(5, vec![])]).unwrap();

        // flip one byte inside the tag payload
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[HEADER_SIZE + 3] ^= 0xff;
        std::fs::write(&path, &bytes).unwrap();
        let io = IoStats::new();
        let err = read_container(&path, &schema, Projection::Tag, &io).unwrap_err();
        assert!(err.to_string().contains("CRC"));
        assert!(err.to_string().contains("10.ctr"));

        // bad magic
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        let err = read_header(&path, &io).unwrap_err();
        assert!(err.to_string().contains("magic"));
    }

    #[test]
    fn schema_mismatch_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("11.ctr");
        let schema = Schema::new(vec!["p".into()]).unwrap();
        write_container(&path, TrixelId::new(11).unwrap(), &schema, &[obj(1, vec![1.0])]).unwrap();
        let other = Schema::new(vec!["q".into()]).unwrap();
        let io = IoStats::new();
        assert!(read_container(&path, &other, Projection::Tag, &io).is_err());
    }
}
