use crate::error::{Error, Result};

/// Tolerance on |v|² - 1 for constructed unit vectors.
pub const UNIT_NORM_TOL: f64 = 1e-12;

pub const ARCSEC_PER_DEG: f64 = 3600.0;

pub fn arcsec_to_rad(arcsec: f64) -> f64 {
    (arcsec / ARCSEC_PER_DEG).to_radians()
}

pub fn rad_to_arcsec(rad: f64) -> f64 {
    rad.to_degrees() * ARCSEC_PER_DEG
}

/// Plain 3-vector used for intermediate geometry (cross products, midpoints).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3 {
            x: self.y * o.z - self.z * o.y,
            y: self.z * o.x - self.x * o.z,
            z: self.x * o.y - self.y * o.x,
        }
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }

    pub fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }

    pub fn normalized(self) -> Result<UnitVec> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::domain("cannot normalize zero or non-finite vector"));
        }
        Ok(UnitVec {
            x: self.x / n,
            y: self.y / n,
            z: self.z / n,
        })
    }
}

/// A point on the unit sphere. Construction always normalizes, so the
/// norm invariant holds for every value of this type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVec {
    x: f64,
    y: f64,
    z: f64,
}

impl UnitVec {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        Vec3::new(x, y, z).normalized()
    }

    /// Wraps components that are already unit-norm (within `UNIT_NORM_TOL`).
    pub(crate) fn from_unit_unchecked(x: f64, y: f64, z: f64) -> Self {
        debug_assert!((x * x + y * y + z * z - 1.0).abs() <= UNIT_NORM_TOL);
        UnitVec { x, y, z }
    }

    pub fn x(self) -> f64 {
        self.x
    }

    pub fn y(self) -> f64 {
        self.y
    }

    pub fn z(self) -> f64 {
        self.z
    }

    pub fn as_vec3(self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn dot(self, o: UnitVec) -> f64 {
        self.as_vec3().dot(o.as_vec3())
    }

    pub fn cross(self, o: UnitVec) -> Vec3 {
        self.as_vec3().cross(o.as_vec3())
    }

    pub fn antipode(self) -> UnitVec {
        UnitVec {
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Angular separation in radians, range [0, π].
    ///
    /// atan2 of the cross/dot pair stays accurate at arcsecond separations,
    /// where acos of the dot product loses most of its digits.
    pub fn angular_distance(self, o: UnitVec) -> f64 {
        let cross = self.cross(o).norm();
        let dot = self.dot(o);
        cross.atan2(dot)
    }
}

/// Angular separation of two unit vectors in radians.
pub fn angular_distance(a: UnitVec, b: UnitVec) -> f64 {
    a.angular_distance(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::testing::random_unit;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn construction_normalizes() {
        let v = UnitVec::new(3.0, 4.0, 0.0).unwrap();
        assert!((v.x * v.x + v.y * v.y + v.z * v.z - 1.0).abs() <= UNIT_NORM_TOL);
        assert!((v.x - 0.6).abs() < 1e-15);
        assert!((v.y - 0.8).abs() < 1e-15);
    }

    #[test]
    fn zero_vector_rejected() {
        assert!(UnitVec::new(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn random_constructions_unit_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let x: f64 = rng.random_range(-10.0..10.0);
            let y: f64 = rng.random_range(-10.0..10.0);
            let z: f64 = rng.random_range(-10.0..10.0);
            if x == 0.0 && y == 0.0 && z == 0.0 {
                continue;
            }
            let v = UnitVec::new(x, y, z).unwrap();
            let n2 = v.x * v.x + v.y * v.y + v.z * v.z;
            assert!((n2 - 1.0).abs() <= UNIT_NORM_TOL);
        }
    }

    #[test]
    fn angular_distance_identity_and_axes() {
        let ex = UnitVec::new(1.0, 0.0, 0.0).unwrap();
        let ey = UnitVec::new(0.0, 1.0, 0.0).unwrap();
        assert_eq!(angular_distance(ex, ex), 0.0);
        assert!((angular_distance(ex, ey) - FRAC_PI_2).abs() < 1e-15);
        let diag = UnitVec::new(1.0, 1.0, 0.0).unwrap();
        assert!((angular_distance(ex, diag) - FRAC_PI_4).abs() < 1e-15);
        assert!((angular_distance(ex, ex.antipode()) - PI).abs() < 1e-15);
    }

    #[test]
    fn angular_distance_symmetric_and_small_scale() {
        let a = UnitVec::new(1.0, 0.0, 0.0).unwrap();
        // 10 arcsec offset.
        let eps = arcsec_to_rad(10.0);
        let b = UnitVec::new(eps.cos(), eps.sin(), 0.0).unwrap();
        let d = angular_distance(a, b);
        assert!((d - eps).abs() < 1e-18);
        assert_eq!(d, angular_distance(b, a));
    }

    #[test]
    fn triangle_inequality_on_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let a = random_unit(&mut rng);
            let b = random_unit(&mut rng);
            let c = random_unit(&mut rng);
            let ab = angular_distance(a, b);
            let bc = angular_distance(b, c);
            let ac = angular_distance(a, c);
            assert!(ac <= ab + bc + 1e-9);
        }
    }
}
