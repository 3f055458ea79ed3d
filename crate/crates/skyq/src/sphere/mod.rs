//! Spherical geometry: unit vectors, coordinate frames, and the half-space
//! region algebra every spatial query reduces to.

mod frame;
mod region;
mod vector;

pub use frame::{from_lonlat, to_lonlat, Frame, FrameSet, Mat3, ROTATION_TOL};
pub use region::{cap, latitude_band, Convex, HalfSpace, Region};
pub use vector::{
    angular_distance, arcsec_to_rad, rad_to_arcsec, UnitVec, Vec3, UNIT_NORM_TOL,
};
