use crate::error::{Error, Result};
use crate::sphere::frame::Frame;
use crate::sphere::vector::{arcsec_to_rad, UnitVec};

/// The closed half-space {p : normal·p ≥ offset}. With |normal| = 1 this is a
/// spherical cap; offset must lie in [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfSpace {
    normal: UnitVec,
    offset: f64,
}

impl HalfSpace {
    pub fn new(normal: UnitVec, offset: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&offset) {
            return Err(Error::domain(format!(
                "half-space offset {offset} out of range [-1, 1]"
            )));
        }
        Ok(HalfSpace { normal, offset })
    }

    pub fn normal(&self) -> UnitVec {
        self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn contains(&self, p: UnitVec) -> bool {
        self.normal.dot(p) >= self.offset
    }

    /// Closed complement: {p : -normal·p ≥ -offset}. The shared boundary
    /// circle belongs to both, which is a measure-zero double inclusion.
    pub fn complement(&self) -> HalfSpace {
        HalfSpace {
            normal: self.normal.antipode(),
            offset: -self.offset,
        }
    }
}

/// Spherical cap of the given angular radius around `center`.
/// Membership is equivalent to angular_distance(center, p) ≤ radius.
pub fn cap(center: UnitVec, radius_arcsec: f64) -> Result<HalfSpace> {
    if !(0.0..=180.0 * 3600.0).contains(&radius_arcsec) {
        return Err(Error::domain(format!(
            "cap radius {radius_arcsec} arcsec out of range [0, 648000]"
        )));
    }
    let offset = arcsec_to_rad(radius_arcsec).cos().clamp(-1.0, 1.0);
    HalfSpace::new(center, offset)
}

/// Conjunction of half-spaces. An empty constraint list is the whole sky.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Convex {
    constraints: Vec<HalfSpace>,
}

impl Convex {
    pub fn whole_sky() -> Convex {
        Convex::default()
    }

    pub fn new(constraints: Vec<HalfSpace>) -> Convex {
        Convex { constraints }
    }

    pub fn constraints(&self) -> &[HalfSpace] {
        &self.constraints
    }

    pub fn push(&mut self, h: HalfSpace) {
        self.constraints.push(h);
    }

    pub fn contains(&self, p: UnitVec) -> bool {
        self.constraints.iter().all(|h| h.contains(p))
    }
}

/// The belt lat_min ≤ lat ≤ lat_max in the given frame, as a two-constraint
/// convex: pole·p ≥ sin(lat_min) and (-pole)·p ≥ -sin(lat_max).
pub fn latitude_band(frame: &Frame, lat_min_deg: f64, lat_max_deg: f64) -> Result<Convex> {
    if !(-90.0..=90.0).contains(&lat_min_deg)
        || !(-90.0..=90.0).contains(&lat_max_deg)
        || lat_min_deg > lat_max_deg
    {
        return Err(Error::domain(format!(
            "latitude band [{lat_min_deg}, {lat_max_deg}] must satisfy -90 <= min <= max <= 90"
        )));
    }
    let pole = frame.pole();
    Ok(Convex::new(vec![
        HalfSpace::new(pole, lat_min_deg.to_radians().sin().clamp(-1.0, 1.0))?,
        HalfSpace::new(pole.antipode(), (-lat_max_deg.to_radians().sin()).clamp(-1.0, 1.0))?,
    ]))
}

/// Disjunction of convexes. An empty convex list is the empty region.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Region {
    convexes: Vec<Convex>,
}

impl Region {
    pub fn empty() -> Region {
        Region::default()
    }

    pub fn whole_sky() -> Region {
        Region {
            convexes: vec![Convex::whole_sky()],
        }
    }

    pub fn new(convexes: Vec<Convex>) -> Region {
        Region { convexes }
    }

    pub fn from_convex(c: Convex) -> Region {
        Region { convexes: vec![c] }
    }

    pub fn from_cap(center: UnitVec, radius_arcsec: f64) -> Result<Region> {
        Ok(Region::from_convex(Convex::new(vec![cap(
            center,
            radius_arcsec,
        )?])))
    }

    pub fn convexes(&self) -> &[Convex] {
        &self.convexes
    }

    pub fn is_empty(&self) -> bool {
        self.convexes.is_empty()
    }

    pub fn contains(&self, p: UnitVec) -> bool {
        self.convexes.iter().any(|c| c.contains(p))
    }

    /// Union: concatenation of the convex lists.
    pub fn union(&self, other: &Region) -> Region {
        let mut convexes = self.convexes.clone();
        convexes.extend(other.convexes.iter().cloned());
        Region { convexes }
    }

    /// Intersection: pairwise distribution, concatenating constraint lists.
    pub fn intersection(&self, other: &Region) -> Region {
        let mut convexes = Vec::with_capacity(self.convexes.len() * other.convexes.len());
        for a in &self.convexes {
            for b in &other.convexes {
                let mut constraints = a.constraints.clone();
                constraints.extend(b.constraints.iter().copied());
                convexes.push(Convex::new(constraints));
            }
        }
        Region { convexes }
    }
}
