//! Range-and-bearing quadrant sensors plus the local light sensor.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use crate::field::{ScalarField, G_MAX};
use crate::sim::{wrap_angle, WorldState};

/// Maximum neighbor detection range (center to center), m.
pub const SENSOR_RANGE: f64 = 2.0;
/// Distance reported by an empty quadrant.
pub const NO_NEIGHBOR_DISTANCE: f64 = 2.01;

pub const INPUT_SIZE: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrant {
    Front = 0,
    Back = 1,
    Left = 2,
    Right = 3,
}

impl Quadrant {
    /// Quadrant of a body-frame bearing in `(-pi, pi]`.
    ///
    /// Front covers `[-45, 45)` degrees, left `[45, 135)`, back `[135, 225)`
    /// and right `[225, 315)`; a bearing on a boundary goes counterclockwise.
    pub fn of_bearing(bearing: f64) -> Quadrant {
        let a = (bearing + FRAC_PI_4).rem_euclid(2.0 * PI);
        match (a / FRAC_PI_2) as usize {
            0 => Quadrant::Front,
            1 => Quadrant::Left,
            2 => Quadrant::Back,
            _ => Quadrant::Right,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadrantReading {
    pub distance: f64,
    /// Bearing of the neighbor relative to the robot heading.
    pub heading: f64,
}

impl QuadrantReading {
    pub const EMPTY: QuadrantReading = QuadrantReading {
        distance: NO_NEIGHBOR_DISTANCE,
        heading: 0.0,
    };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorFrame {
    /// Ordered front, back, left, right.
    pub quadrants: [QuadrantReading; 4],
    pub light: f64,
}

/// Controller input, every component in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedInput(pub [f64; INPUT_SIZE]);

pub fn sense(world: &WorldState, robot: usize, field: &ScalarField) -> SensorFrame {
    let me = world.robots[robot].pose;
    let mut quadrants = [QuadrantReading::EMPTY; 4];
    for (k, other) in world.robots.iter().enumerate() {
        if k == robot {
            continue;
        }
        let dx = other.pose.x - me.x;
        let dy = other.pose.y - me.y;
        let d = dx.hypot(dy);
        if d > SENSOR_RANGE {
            continue;
        }
        let bearing = wrap_angle(dy.atan2(dx) - me.heading);
        let q = &mut quadrants[Quadrant::of_bearing(bearing) as usize];
        // strict < keeps the lowest index on equal distances
        if d < q.distance {
            *q = QuadrantReading {
                distance: d,
                heading: bearing,
            };
        }
    }
    SensorFrame {
        quadrants,
        light: field.sample(me.x, me.y),
    }
}

pub fn normalize(frame: &SensorFrame) -> NormalizedInput {
    let mut out = [0.0; INPUT_SIZE];
    for (k, q) in frame.quadrants.iter().enumerate() {
        out[2 * k] = (2.0 * (q.distance / NO_NEIGHBOR_DISTANCE) - 1.0).clamp(-1.0, 1.0);
        out[2 * k + 1] = (wrap_angle(q.heading) / PI).clamp(-1.0, 1.0);
    }
    out[8] = (2.0 * (frame.light / G_MAX) - 1.0).clamp(-1.0, 1.0);
    NormalizedInput(out)
}
