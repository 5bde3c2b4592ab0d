use serde::{Deserialize, Serialize};

use crate::vec2::Vec2;

/// Position and velocity of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub p: Vec2,
    pub v: Vec2,
}

impl VehicleState {
    pub const fn new(p: Vec2, v: Vec2) -> Self {
        Self { p, v }
    }

    pub const fn at_rest(p: Vec2) -> Self {
        Self { p, v: Vec2::ZERO }
    }

    pub fn is_finite(&self) -> bool {
        self.p.is_finite() && self.v.is_finite()
    }
}
