use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    classify_los, crumple, make_l_vertices, make_regular_polygon_vertices, make_shoebox_vertices, make_t_vertices, rotate,
    GeometryError, Point2, Polygon2D, SizeParams, Visibility,
};
use crate::acoustics::{assign_materials, MaterialAssignment};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RoomFamily {
    #[serde(rename = "shoebox")]
    Shoebox,
    #[serde(rename = "pentagonal")]
    Pentagonal,
    #[serde(rename = "hexagonal")]
    Hexagonal,
    L,
    T,
    #[serde(rename = "imported")]
    Imported,
}

impl RoomFamily {
    pub const STANDARD: [RoomFamily; 5] = [RoomFamily::Shoebox, RoomFamily::Pentagonal, RoomFamily::Hexagonal, RoomFamily::L, RoomFamily::T];

    pub fn as_str(self) -> &'static str {
        match self {
            RoomFamily::Shoebox => "shoebox",
            RoomFamily::Pentagonal => "pentagonal",
            RoomFamily::Hexagonal => "hexagonal",
            RoomFamily::L => "L",
            RoomFamily::T => "T",
            RoomFamily::Imported => "imported",
        }
    }

    pub fn is_convex_family(self) -> bool {
        matches!(self, RoomFamily::Shoebox | RoomFamily::Pentagonal | RoomFamily::Hexagonal)
    }
}

impl fmt::Display for RoomFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RoomFamily {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "shoebox" => Ok(RoomFamily::Shoebox),
            "pentagonal" | "pentagon" => Ok(RoomFamily::Pentagonal),
            "hexagonal" | "hexagon" => Ok(RoomFamily::Hexagonal),
            "L" | "l" => Ok(RoomFamily::L),
            "T" | "t" => Ok(RoomFamily::T),
            "imported" => Ok(RoomFamily::Imported),
            other => Err(GeometryError::InvalidParameter(format!("unknown room family {other:?}"))),
        }
    }
}

/// Device (loudspeaker at the centre of the mic ring) position in the room frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DevicePose {
    pub x: f64,
    pub y: f64,
    /// Height above the floor.
    pub z: f64,
}

impl DevicePose {
    pub fn xy(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    /// Counter-clockwise floorplan.
    pub polygon: Polygon2D,
    pub height: f64,
    pub materials: MaterialAssignment,
    pub device: DevicePose,
    pub family: RoomFamily,
    pub los_label: Visibility,
    pub seed: u64,
    /// Prototype size for generated rooms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<SizeParams>,
}

pub const DEVICE_AREA_FRACTION: f64 = 0.7;
pub const PLACEMENT_ATTEMPTS: usize = 1000;
/// Minimum distance from the device centre to any wall; keeps the 5 cm mic
/// ring inside the room.
pub const DEVICE_CLEARANCE: f64 = 0.1;

/// Uniform draw from the polygon shrunk to 70% about its centroid (kept only
/// if also inside the original), and a height in `[1, 1.5]` m.
pub fn place_device(p: &Polygon2D, rng: &mut impl Rng) -> Result<DevicePose, GeometryError> {
    let shrunk = p.scaled_about(p.centroid(), DEVICE_AREA_FRACTION);
    let (lo, hi) = shrunk.bounds();
    for _ in 0..PLACEMENT_ATTEMPTS {
        let q = Point2::new(rng.random_range(lo.x..=hi.x), rng.random_range(lo.y..=hi.y));
        if shrunk.contains(q) && p.contains(q) && p.distance_to_boundary(q) >= DEVICE_CLEARANCE {
            let z = rng.random_range(1.0..=1.5);
            return Ok(DevicePose { x: q.x, y: q.y, z });
        }
    }
    Err(GeometryError::PlacementFailed)
}

/// Stateless 64-bit mixer (splitmix64 finaliser).
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of sample `index` within a dataset seeded with `dataset_seed`.
pub fn derive_seed(dataset_seed: u64, index: u64) -> u64 {
    mix64(dataset_seed ^ mix64(index.wrapping_add(0x5EED)))
}

pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn prototype(family: RoomFamily, s: SizeParams, rng: &mut impl Rng) -> Result<Polygon2D, GeometryError> {
    match family {
        RoomFamily::Shoebox => Ok(make_shoebox_vertices(s)),
        RoomFamily::Pentagonal => make_regular_polygon_vertices(5, s),
        RoomFamily::Hexagonal => make_regular_polygon_vertices(6, s),
        RoomFamily::L => {
            let mu_l = rng.random_range(0.0..=0.5 * s.s_l);
            let mu_w = rng.random_range(0.0..=0.5 * s.s_w);
            make_l_vertices(s, mu_l, mu_w)
        }
        RoomFamily::T => {
            let mu_l1 = rng.random_range(-0.75 * s.s_l..=-0.25 * s.s_l);
            let mu_l2 = rng.random_range(0.25 * s.s_l..=0.75 * s.s_l);
            let mu_w = rng.random_range(-0.5 * s.s_w..=0.0);
            make_t_vertices(s, mu_l1, mu_l2, mu_w)
        }
        RoomFamily::Imported => Err(GeometryError::InvalidParameter("imported rooms are loaded, not sampled".into())),
    }
}

/// size → prototype → crumple → rotate → device → LOS label → materials.
/// Failures of the crumple or placement steps surface as `RoomRegenerate`.
pub fn sample_standard_room(family: RoomFamily, rng: &mut impl Rng) -> Result<RoomSpec, GeometryError> {
    let size = SizeParams::sample(rng);
    let proto = prototype(family, size, rng)?;
    let regen = |e: GeometryError| match e {
        GeometryError::CrumpleFailed | GeometryError::PlacementFailed => GeometryError::RoomRegenerate(Box::new(e)),
        other => other,
    };
    let crumpled = crumple(&proto, rng, 0.5).map_err(regen)?;
    let theta = rng.random_range(0.0..2.0 * PI);
    let polygon = rotate(&crumpled, theta).to_ccw();
    let device = place_device(&polygon, rng).map_err(regen)?;
    let los_label = classify_los(&polygon, device.xy())?;
    let materials = assign_materials(rng);
    Ok(RoomSpec { polygon, height: size.s_h, materials, device, family, los_label, seed: 0, size: Some(size) })
}

pub const ROOM_ATTEMPTS: usize = 16;

/// Deterministic room for `seed`, retrying on the same stream when a draw
/// must be regenerated.
pub fn sample_room_seeded(family: RoomFamily, seed: u64) -> Result<RoomSpec, GeometryError> {
    let mut rng = rng_for(seed);
    let mut last = None;
    for attempt in 0..ROOM_ATTEMPTS {
        match sample_standard_room(family, &mut rng) {
            Ok(mut room) => {
                room.seed = seed;
                return Ok(room);
            }
            Err(e @ GeometryError::RoomRegenerate(_)) => {
                log::debug!("room seed {seed} attempt {attempt}: {e}");
                last = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or(GeometryError::PlacementFailed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn placement_stays_within_shrunk_square() {
        let sq = Polygon2D::from_xy(&[(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]);
        let mut rng = rng_for(11);
        for _ in 0..2000 {
            let d = place_device(&sq, &mut rng).unwrap();
            assert!(d.x.abs() <= 0.7 + 1e-12 && d.y.abs() <= 0.7 + 1e-12);
            assert!((1.0..=1.5).contains(&d.z));
        }
    }

    #[test]
    fn seeded_rooms_are_reproducible() {
        for fam in RoomFamily::STANDARD {
            let a = sample_room_seeded(fam, 42).unwrap();
            let b = sample_room_seeded(fam, 42).unwrap();
            assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
            assert_eq!(a.seed, 42);
            assert!(a.polygon.signed_area() > 0.0);
        }
    }

    #[test]
    fn family_names_round_trip() {
        for fam in RoomFamily::STANDARD {
            assert_eq!(fam.as_str().parse::<RoomFamily>().unwrap(), fam);
            let json = serde_json::to_string(&fam).unwrap();
            assert_eq!(json, format!("\"{}\"", fam.as_str()));
        }
        assert!("octagon".parse::<RoomFamily>().is_err());
    }
}
