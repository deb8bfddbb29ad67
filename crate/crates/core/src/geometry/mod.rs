//! Procedural polygonal rooms, device placement and wall visibility.

mod layout;
mod polygon;
mod room;
mod shapes;
mod visibility;

pub use layout::{discretize_arc, import_layout, parse_layout, LayoutArc, LayoutFile, ARC_MAX_SAGITTA};
pub use polygon::{point_segment_distance, ray_segment_hit, segments_intersect, ArcSegment, Point2, Polygon2D};
pub use room::{
    derive_seed, mix64, place_device, rng_for, sample_room_seeded, sample_standard_room, DevicePose, RoomFamily, RoomSpec,
    DEVICE_AREA_FRACTION, DEVICE_CLEARANCE, PLACEMENT_ATTEMPTS, ROOM_ATTEMPTS,
};
pub use shapes::{
    crumple, make_l_vertices, make_regular_polygon_vertices, make_shoebox_vertices, make_t_vertices, rotate, SizeParams,
    CRUMPLE_RETRIES,
};
pub use visibility::{classify_los, sensed_walls, visible_wall_extents, Visibility, SENSING_DIRECTIONS};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("crumpled polygon stayed invalid after {} retries", CRUMPLE_RETRIES)]
    CrumpleFailed,
    #[error("no valid device position after {} draws", PLACEMENT_ATTEMPTS)]
    PlacementFailed,
    #[error("room must be regenerated: {0}")]
    RoomRegenerate(Box<GeometryError>),
    #[error("device lies outside the room polygon")]
    DeviceOutsidePolygon,
    #[error("polygon is not simple")]
    NonSimplePolygon,
    #[error("layout parse error: {0}")]
    Parse(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
