use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sphere::vector::{UnitVec, Vec3};

/// Tolerance for orthonormality and determinant checks on rotation matrices.
pub const ROTATION_TOL: f64 = 1e-12;

/// J2000 north galactic pole and the galactic longitude of the ascending
/// node of the galactic equator on the equatorial plane.
const GAL_POLE_RA_DEG: f64 = 192.85948;
const GAL_POLE_DEC_DEG: f64 = 27.12825;
const GAL_ASC_NODE_DEG: f64 = 32.93192;

/// Row-major 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        let m = &self.0;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    pub fn mul(&self, o: &Mat3) -> Mat3 {
        let mut r = [[0.0; 3]; 3];
        for (i, row) in r.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum();
            }
        }
        Mat3(r)
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Orthonormal with determinant +1, within `ROTATION_TOL` per entry.
    pub fn is_rotation(&self) -> bool {
        let should_be_identity = self.transpose().mul(self);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                if (should_be_identity.0[i][j] - expect).abs() > ROTATION_TOL {
                    return false;
                }
            }
        }
        (self.det() - 1.0).abs() <= ROTATION_TOL
    }

    /// Frame rotation about the x-axis (rotates the reference frame, not the vector).
    fn frame_rot_x(angle_rad: f64) -> Mat3 {
        let (s, c) = angle_rad.sin_cos();
        Mat3([[1.0, 0.0, 0.0], [0.0, c, s], [0.0, -s, c]])
    }

    /// Frame rotation about the z-axis.
    fn frame_rot_z(angle_rad: f64) -> Mat3 {
        let (s, c) = angle_rad.sin_cos();
        Mat3([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])
    }
}

/// A celestial coordinate frame, stored as the rotation that maps the
/// frame's own Cartesian coordinates into the base (equatorial) frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    name: String,
    rotation: Mat3,
}

impl Frame {
    pub fn equatorial() -> Frame {
        Frame {
            name: "EQUATORIAL".to_string(),
            rotation: Mat3::IDENTITY,
        }
    }

    /// Galactic frame from the standard pole and ascending-node constants.
    pub fn galactic() -> Frame {
        // Base→galactic as a product of frame rotations; the stored matrix
        // (galactic→base) is its transpose.
        let base_to_gal = Mat3::frame_rot_z(-GAL_ASC_NODE_DEG.to_radians())
            .mul(&Mat3::frame_rot_x((90.0 - GAL_POLE_DEC_DEG).to_radians()))
            .mul(&Mat3::frame_rot_z((90.0 + GAL_POLE_RA_DEG).to_radians()));
        Frame {
            name: "GALACTIC".to_string(),
            rotation: base_to_gal.transpose(),
        }
    }

    /// User-defined frame. `rotation` maps frame coordinates to the base frame
    /// and must be orthonormal with determinant +1.
    pub fn custom(name: impl Into<String>, rotation: Mat3) -> Result<Frame> {
        let name = name.into();
        if !rotation.is_rotation() {
            return Err(Error::config(format!(
                "frame {name}: matrix is not a rotation (orthonormal, det +1)"
            )));
        }
        Ok(Frame { name, rotation })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    /// Frame coordinates → base (equatorial) coordinates.
    pub fn to_base(&self, v: UnitVec) -> UnitVec {
        let r = self.rotation.mul_vec(v.as_vec3());
        UnitVec::from_unit_unchecked(r.x, r.y, r.z)
    }

    /// Base (equatorial) coordinates → frame coordinates.
    pub fn from_base(&self, v: UnitVec) -> UnitVec {
        let r = self.rotation.transpose().mul_vec(v.as_vec3());
        UnitVec::from_unit_unchecked(r.x, r.y, r.z)
    }

    /// The frame's +z pole axis expressed in base coordinates.
    pub fn pole(&self) -> UnitVec {
        self.to_base(UnitVec::from_unit_unchecked(0.0, 0.0, 1.0))
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Converts spherical (lon, lat) in `frame` to a base-frame unit vector.
///
/// Longitude is taken mod 360; latitude outside [-90, 90] is a domain error.
pub fn from_lonlat(lon_deg: f64, lat_deg: f64, frame: &Frame) -> Result<UnitVec> {
    if !(-90.0..=90.0).contains(&lat_deg) || !lat_deg.is_finite() || !lon_deg.is_finite() {
        return Err(Error::domain(format!(
            "latitude {lat_deg} out of range [-90, 90]"
        )));
    }
    let lon = lon_deg.rem_euclid(360.0).to_radians();
    let lat = lat_deg.to_radians();
    let (sin_lon, cos_lon) = lon.sin_cos();
    let (sin_lat, cos_lat) = lat.sin_cos();
    let in_frame = UnitVec::new(cos_lat * cos_lon, cos_lat * sin_lon, sin_lat)?;
    Ok(frame.to_base(in_frame))
}

/// Inverse of [`from_lonlat`]: lon in [0, 360), lat in [-90, 90].
/// At the poles the longitude is reported as 0.
pub fn to_lonlat(v: UnitVec, frame: &Frame) -> (f64, f64) {
    let p = frame.from_base(v);
    let lat = p.z().clamp(-1.0, 1.0).asin().to_degrees();
    if p.x() == 0.0 && p.y() == 0.0 {
        return (0.0, lat);
    }
    let mut lon = p.y().atan2(p.x()).to_degrees();
    if lon < 0.0 {
        lon += 360.0;
    }
    if lon >= 360.0 {
        lon = 0.0;
    }
    (lon, lat)
}

/// Named frames addressable from queries (`LATBAND(GALACTIC, ...)`) and the CLI.
///
/// EQUATORIAL and GALACTIC are built in; more can be loaded from a config file
/// holding one frame per line: the name followed by the 9 rotation-matrix
/// entries in row-major order, whitespace separated, `#` starts a comment.
#[derive(Debug, Clone)]
pub struct FrameSet {
    frames: BTreeMap<String, Frame>,
}

impl Default for FrameSet {
    fn default() -> Self {
        let mut frames = BTreeMap::new();
        for f in [Frame::equatorial(), Frame::galactic()] {
            frames.insert(f.name.clone(), f);
        }
        FrameSet { frames }
    }
}

impl FrameSet {
    pub fn get(&self, name: &str) -> Option<&Frame> {
        self.frames.get(&name.to_ascii_uppercase())
    }

    pub fn insert(&mut self, frame: Frame) {
        self.frames.insert(frame.name.to_ascii_uppercase(), frame);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.frames.keys().map(|s| s.as_str())
    }

    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.load_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn load_str(&mut self, text: &str) -> Result<()> {
        for (i, raw_line) in text.lines().enumerate() {
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let name = parts.next().expect("non-empty line");
            let nums: Vec<f64> = parts
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| Error::config(format!("line {}: bad number {t:?}", i + 1)))
                })
                .collect::<Result<_>>()?;
            if nums.len() != 9 {
                return Err(Error::config(format!(
                    "line {}: frame {name} needs 9 matrix entries, got {}",
                    i + 1,
                    nums.len()
                )));
            }
            let m = Mat3([
                [nums[0], nums[1], nums[2]],
                [nums[3], nums[4], nums[5]],
                [nums[6], nums[7], nums[8]],
            ]);
            self.insert(Frame::custom(name.to_ascii_uppercase(), m)?);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::vector::angular_distance;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    /// Independent equatorial→galactic conversion via spherical trigonometry,
    /// using only the published pole/node angles. Cross-checks the matrix route.
    fn radec_to_galactic_trig(ra_deg: f64, dec_deg: f64) -> (f64, f64) {
        let ra = ra_deg.to_radians();
        let dec = dec_deg.to_radians();
        let ra_p = GAL_POLE_RA_DEG.to_radians();
        let dec_p = GAL_POLE_DEC_DEG.to_radians();
        let l_ncp = (GAL_ASC_NODE_DEG + 90.0).to_radians();
        let sin_b =
            dec_p.sin() * dec.sin() + dec_p.cos() * dec.cos() * (ra - ra_p).cos();
        let b = sin_b.clamp(-1.0, 1.0).asin();
        let y = dec.cos() * (ra - ra_p).sin();
        let x = dec_p.cos() * dec.sin() - dec_p.sin() * dec.cos() * (ra - ra_p).cos();
        let mut l = (l_ncp - y.atan2(x)).to_degrees().rem_euclid(360.0);
        if l >= 360.0 {
            l = 0.0;
        }
        (l, b.to_degrees())
    }

    #[test]
    fn equatorial_axis_cases() {
        let eq = Frame::equatorial();
        let v = from_lonlat(0.0, 0.0, &eq).unwrap();
        assert!((v.x() - 1.0).abs() < 1e-15 && v.y().abs() < 1e-15 && v.z().abs() < 1e-15);
        let v = from_lonlat(90.0, 0.0, &eq).unwrap();
        assert!(v.x().abs() < 1e-15 && (v.y() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn latitude_out_of_range_is_domain_error() {
        let eq = Frame::equatorial();
        assert!(from_lonlat(10.0, 95.0, &eq).is_err());
        assert!(from_lonlat(10.0, -90.001, &eq).is_err());
        // longitude wraps instead
        assert!(from_lonlat(720.5, 10.0, &eq).is_ok());
    }

    #[test]
    fn pole_longitude_convention() {
        let eq = Frame::equatorial();
        let pole = UnitVec::new(0.0, 0.0, 1.0).unwrap();
        assert_eq!(to_lonlat(pole, &eq), (0.0, 90.0));
        let south = UnitVec::new(0.0, 0.0, -1.0).unwrap();
        assert_eq!(to_lonlat(south, &eq), (0.0, -90.0));
    }

    #[test]
    fn lonlat_roundtrip_random() {
        let eq = Frame::equatorial();
        let gal = Frame::galactic();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let lon: f64 = rng.random_range(0.0..360.0);
            let lat: f64 = rng.random_range(-89.999..89.999);
            for frame in [&eq, &gal] {
                let v = from_lonlat(lon, lat, frame).unwrap();
                let (lon2, lat2) = to_lonlat(v, frame);
                assert!((lon - lon2).abs() < 1e-9 || (lon - lon2).abs() > 359.999);
                assert!((lat - lat2).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn frame_roundtrip_identity() {
        let gal = Frame::galactic();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let v = crate::sphere::testing::random_unit(&mut rng);
            let back = gal.to_base(gal.from_base(v));
            assert!((back.x() - v.x()).abs() <= 1e-12);
            assert!((back.y() - v.y()).abs() <= 1e-12);
            assert!((back.z() - v.z()).abs() <= 1e-12);
        }
    }

    #[test]
    fn galactic_rotation_is_orthonormal() {
        assert!(Frame::galactic().rotation().is_rotation());
        assert!(Frame::equatorial().rotation().is_rotation());
        assert_eq!(Frame::equatorial().rotation(), &Mat3::IDENTITY);
    }

    #[test]
    fn galactic_pole_maps_to_b90() {
        let gal = Frame::galactic();
        let ngp = from_lonlat(GAL_POLE_RA_DEG, GAL_POLE_DEC_DEG, &Frame::equatorial()).unwrap();
        let (_, b) = to_lonlat(ngp, &gal);
        assert!((b - 90.0).abs() < 1e-9, "b = {b}");
    }

    #[test]
    fn galactic_center_roundtrip_within_one_arcsec() {
        // The direction at equatorial (266.40500, -28.93617) is the galactic
        // center; its galactic coordinates must be (0, 0) within 1 arcsec.
        let eq = Frame::equatorial();
        let gal = Frame::galactic();
        let v = from_lonlat(266.40500, -28.93617, &eq).unwrap();
        let origin = from_lonlat(0.0, 0.0, &gal).unwrap();
        let sep_arcsec = angular_distance(v, origin).to_degrees() * 3600.0;
        assert!(sep_arcsec < 1.0, "separation {sep_arcsec} arcsec");
    }

    #[test]
    fn matrix_route_matches_trig_route() {
        let eq = Frame::equatorial();
        let gal = Frame::galactic();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let ra: f64 = rng.random_range(0.0..360.0);
            let dec: f64 = rng.random_range(-89.9..89.9);
            let v = from_lonlat(ra, dec, &eq).unwrap();
            let (l_m, b_m) = to_lonlat(v, &gal);
            let (l_t, b_t) = radec_to_galactic_trig(ra, dec);
            let wrapped = (l_m - l_t).rem_euclid(360.0);
            let dl = wrapped.min(360.0 - wrapped);
            assert!(dl < 1e-9, "l {l_m} vs {l_t}");
            assert!((b_m - b_t).abs() < 1e-9, "b {b_m} vs {b_t}");
        }
    }

    #[test]
    fn equinox_direction_in_galactic_frame() {
        // (1,0,0) carried into the galactic frame by the transpose matrix must
        // agree with the independent trig conversion of (ra=0, dec=0).
        let gal = Frame::galactic();
        let x = UnitVec::new(1.0, 0.0, 0.0).unwrap();
        let (l, b) = to_lonlat(x, &gal);
        let (l_t, b_t) = radec_to_galactic_trig(0.0, 0.0);
        assert!((l - l_t).abs() < 1e-9);
        assert!((b - b_t).abs() < 1e-9);
    }

    #[test]
    fn frameset_config_parsing() {
        let mut fs = FrameSet::default();
        assert!(fs.get("equatorial").is_some());
        assert!(fs.get("GALACTIC").is_some());
        fs.load_str(
            "# a frame equal to the base frame\nDEMO 1 0 0  0 1 0  0 0 1\n",
        )
        .unwrap();
        assert!(fs.get("demo").is_some());
        // non-orthonormal matrix rejected
        let err = fs.load_str("BAD 1 0 0  0 2 0  0 0 1").unwrap_err();
        assert!(err.to_string().contains("rotation"));
        // wrong entry count rejected
        assert!(fs.load_str("SHORT 1 0 0").is_err());
    }

    #[test]
    fn custom_frame_validation() {
        let refl = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]]);
        assert!(Frame::custom("REFL", refl).is_err());
        assert!(Frame::custom("OK", Mat3::IDENTITY).is_ok());
    }
}
