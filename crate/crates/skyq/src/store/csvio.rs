use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sphere::{from_lonlat, to_lonlat, Frame};
use crate::store::{Chunk, ObjClass, Schema, SkyObject};

const FIXED_COLUMNS: [&str; 10] = [
    "obj_id",
    "ra_deg",
    "dec_deg",
    "u",
    "g",
    "r",
    "i",
    "z",
    "size_arcsec",
    "class",
];

/// Parses an ingest CSV into a chunk plus the schema its extra columns imply.
///
/// Header: `obj_id,ra_deg,dec_deg,u,g,r,i,z,size_arcsec,class[,extra...]`,
/// positions in equatorial degrees. Malformed rows are rejected with their
/// line number.
pub fn chunk_from_csv_reader<R: Read>(reader: R, source: &str) -> Result<(Chunk, Schema)> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rd
        .headers()
        .map_err(|e| Error::domain(format!("{source}: bad header: {e}")))?
        .clone();
    if headers.len() < FIXED_COLUMNS.len() {
        return Err(Error::domain(format!(
            "{source}: header has {} columns, need at least {}",
            headers.len(),
            FIXED_COLUMNS.len()
        )));
    }
    for (i, want) in FIXED_COLUMNS.iter().enumerate() {
        if !headers[i].eq_ignore_ascii_case(want) {
            return Err(Error::domain(format!(
                "{source}: column {} is {:?}, expected {:?}",
                i + 1,
                &headers[i],
                want
            )));
        }
    }
    let extras: Vec<String> = headers.iter().skip(FIXED_COLUMNS.len()).map(String::from).collect();
    let schema = Schema::new(extras)?;

    let eq = Frame::equatorial();
    let mut objects = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| {
            let line = e
                .position()
                .map(|p| p.line())
                .unwrap_or(0);
            Error::domain(format!("{source}: line {line}: {e}"))
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let fail = |what: &str| Error::domain(format!("{source}: line {line}: {what}"));
        if rec.len() != FIXED_COLUMNS.len() + schema.extras().len() {
            return Err(fail(&format!(
                "{} fields, expected {}",
                rec.len(),
                FIXED_COLUMNS.len() + schema.extras().len()
            )));
        }
        let num = |i: usize, name: &str| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|_| fail(&format!("bad {name} {:?}", &rec[i])))
        };
        let obj_id = rec[0]
            .parse::<u64>()
            .map_err(|_| fail(&format!("bad obj_id {:?}", &rec[0])))?;
        let ra = num(1, "ra_deg")?;
        let dec = num(2, "dec_deg")?;
        let pos = from_lonlat(ra, dec, &eq)
            .map_err(|e| fail(&e.to_string()))?;
        let mags = [num(3, "u")?, num(4, "g")?, num(5, "r")?, num(6, "i")?, num(7, "z")?];
        let size_arcsec = num(8, "size_arcsec")?;
        if size_arcsec < 0.0 {
            return Err(fail(&format!("negative size_arcsec {size_arcsec}")));
        }
        let class = ObjClass::parse(&rec[9]).map_err(|e| fail(&e.to_string()))?;
        let mut extras = Vec::with_capacity(schema.extras().len());
        for (k, name) in schema.extras().iter().enumerate() {
            extras.push(num(FIXED_COLUMNS.len() + k, name)?);
        }
        objects.push(SkyObject {
            obj_id,
            pos,
            mags,
            size_arcsec,
            class,
            extras,
        });
    }
    Ok((Chunk::new(source, objects)?, schema))
}

pub fn chunk_from_csv_path(path: &Path) -> Result<(Chunk, Schema)> {
    let f = std::fs::File::open(path)?;
    chunk_from_csv_reader(std::io::BufReader::new(f), &path.display().to_string())
}

/// Writes the ingest-format header for a catalog schema.
pub fn write_csv_header<W: Write>(w: &mut W, schema: &Schema) -> std::io::Result<()> {
    let mut cols: Vec<&str> = FIXED_COLUMNS.to_vec();
    for e in schema.extras() {
        cols.push(e);
    }
    writeln!(w, "{}", cols.join(","))
}

/// Writes one object in ingest format (the inverse of the reader).
pub fn write_csv_row<W: Write>(w: &mut W, obj: &SkyObject) -> std::io::Result<()> {
    let (ra, dec) = to_lonlat(obj.pos, &Frame::equatorial());
    write!(
        w,
        "{},{},{},{},{},{},{},{},{},{}",
        obj.obj_id,
        ra,
        dec,
        obj.mags[0],
        obj.mags[1],
        obj.mags[2],
        obj.mags[3],
        obj.mags[4],
        obj.size_arcsec,
        obj.class.name()
    )?;
    for e in &obj.extras {
        write!(w, ",{e}")?;
    }
    writeln!(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "obj_id,ra_deg,dec_deg,u,g,r,i,z,size_arcsec,class,flux\n\
        1,10.5,-3.25,21,20.5,20,19.8,19.7,0.8,STAR,1.5\n\
        2,11.0,-3.5,22,21.5,21,20.8,20.7,1.8,galaxy,2.5\n";

    #[test]
    fn parses_good_file() {
        let (chunk, schema) = chunk_from_csv_reader(GOOD.as_bytes(), "good.csv").unwrap();
        assert_eq!(chunk.objects.len(), 2);
        assert_eq!(schema.extras(), &["flux".to_string()]);
        assert_eq!(chunk.objects[0].obj_id, 1);
        assert_eq!(chunk.objects[1].class, ObjClass::Galaxy);
        assert_eq!(chunk.objects[1].extras, vec![2.5]);
    }

    #[test]
    fn bad_latitude_names_line() {
        let text = "obj_id,ra_deg,dec_deg,u,g,r,i,z,size_arcsec,class\n\
            1,10.0,20.0,21,20,20,20,20,1,STAR\n\
            2,10.0,95.0,21,20,20,20,20,1,STAR\n";
        let err = chunk_from_csv_reader(text.as_bytes(), "t.csv").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("95"), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn bad_class_and_bad_number_name_line() {
        let text = "obj_id,ra_deg,dec_deg,u,g,r,i,z,size_arcsec,class\n\
            1,10.0,20.0,21,20,20,20,20,1,NEBULA\n";
        let err = chunk_from_csv_reader(text.as_bytes(), "t.csv").unwrap_err();
        assert!(err.to_string().contains("line 2"));

        let text = "obj_id,ra_deg,dec_deg,u,g,r,i,z,size_arcsec,class\n\
            1,ten,20.0,21,20,20,20,20,1,STAR\n";
        let err = chunk_from_csv_reader(text.as_bytes(), "t.csv").unwrap_err();
        assert!(err.to_string().contains("ra_deg"));
    }

    #[test]
    fn wrong_header_rejected() {
        let text = "id,ra,dec\n1,2,3\n";
        assert!(chunk_from_csv_reader(text.as_bytes(), "t.csv").is_err());
    }

    #[test]
    fn duplicate_ids_within_file_rejected() {
        let text = "obj_id,ra_deg,dec_deg,u,g,r,i,z,size_arcsec,class\n\
            7,10.0,20.0,21,20,20,20,20,1,STAR\n\
            7,11.0,21.0,21,20,20,20,20,1,STAR\n";
        let err = chunk_from_csv_reader(text.as_bytes(), "t.csv").unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn row_roundtrip() {
        let (chunk, schema) = chunk_from_csv_reader(GOOD.as_bytes(), "good.csv").unwrap();
        let mut out = Vec::new();
        write_csv_header(&mut out, &schema).unwrap();
        for o in &chunk.objects {
            write_csv_row(&mut out, o).unwrap();
        }
        let (chunk2, schema2) = chunk_from_csv_reader(out.as_slice(), "copy.csv").unwrap();
        assert_eq!(schema, schema2);
        assert_eq!(chunk.objects.len(), chunk2.objects.len());
        for (a, b) in chunk.objects.iter().zip(chunk2.objects.iter()) {
            assert_eq!(a.obj_id, b.obj_id);
            assert!(crate::sphere::angular_distance(a.pos, b.pos) < 1e-12);
            assert_eq!(a.mags, b.mags);
            assert_eq!(a.extras, b.extras);
        }
    }
}
