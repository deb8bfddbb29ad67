use rand::Rng;
use serde::{Deserialize, Serialize};

/// Single-band absorption coefficient by material id. These are fixed
/// constants of this crate rather than measured data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Material {
    HardSurface,
    RoughConcrete,
    RoughLimeWash,
    GlassWindow,
    Plasterboard,
    GypsumBoard,
    MetalPanel,
    PlasterboardCeiling,
    LinoleumOnConcrete,
    Carpet,
    WoodenFloor,
}

pub const SIDEWALL_MATERIALS: [Material; 5] = [
    Material::HardSurface,
    Material::RoughConcrete,
    Material::RoughLimeWash,
    Material::GlassWindow,
    Material::Plasterboard,
];
pub const CEILING_MATERIALS: [Material; 3] = [Material::GypsumBoard, Material::MetalPanel, Material::PlasterboardCeiling];
pub const FLOOR_MATERIALS: [Material; 3] = [Material::LinoleumOnConcrete, Material::Carpet, Material::WoodenFloor];

impl Material {
    pub fn absorption(self) -> f64 {
        match self {
            Material::HardSurface => 0.02,
            Material::RoughConcrete => 0.04,
            Material::RoughLimeWash => 0.06,
            Material::GlassWindow => 0.10,
            Material::Plasterboard => 0.12,
            Material::GypsumBoard => 0.10,
            Material::MetalPanel => 0.15,
            Material::PlasterboardCeiling => 0.12,
            Material::LinoleumOnConcrete => 0.03,
            Material::Carpet => 0.30,
            Material::WoodenFloor => 0.09,
        }
    }

    /// Pressure reflection factor `sqrt(1 - alpha)`.
    pub fn reflection(self) -> f64 {
        (1.0 - self.absorption()).sqrt()
    }
}

/// Floor, ceiling and a single material shared by all sidewalls.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaterialAssignment {
    pub floor: Material,
    pub ceiling: Material,
    pub sidewall: Material,
}

impl Default for MaterialAssignment {
    fn default() -> Self {
        Self { floor: Material::LinoleumOnConcrete, ceiling: Material::GypsumBoard, sidewall: Material::Plasterboard }
    }
}

pub fn assign_materials(rng: &mut impl Rng) -> MaterialAssignment {
    MaterialAssignment {
        floor: FLOOR_MATERIALS[rng.random_range(0..FLOOR_MATERIALS.len())],
        ceiling: CEILING_MATERIALS[rng.random_range(0..CEILING_MATERIALS.len())],
        sidewall: SIDEWALL_MATERIALS[rng.random_range(0..SIDEWALL_MATERIALS.len())],
    }
}
