//! Differential-drive kinematics, disc collisions and swarm spawning.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Physics time step in seconds.
pub const DT: f64 = 0.05;
/// Wheel speed limit, m/s.
pub const MAX_WHEEL_SPEED: f64 = 0.14;
/// Distance between the two drive wheels, m.
pub const TRACK_WIDTH: f64 = 0.094;
/// Body radius used for collisions, m.
pub const BODY_RADIUS: f64 = 0.06;
/// Side length of the spawn box, m.
pub const SPAWN_BOX: f64 = 3.0;
/// Center of the built-in arenas.
pub const ARENA_CENTER: [f64; 2] = [15.0, 15.0];

const COLLISION_PASSES: usize = 4;
const SPAWN_ATTEMPTS: usize = 64;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    /// Radians in `(-pi, pi]`.
    pub heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub pose: Pose,
    pub left_wheel: f64,
    pub right_wheel: f64,
    pub subgroup: usize,
    pub active_reservoir: usize,
}

impl RobotState {
    pub fn at(x: f64, y: f64, heading: f64, subgroup: usize) -> Self {
        Self {
            pose: Pose {
                x,
                y,
                heading: wrap_angle(heading),
            },
            left_wheel: 0.0,
            right_wheel: 0.0,
            subgroup,
            active_reservoir: subgroup,
        }
    }
}

/// Normalized controller output: target speed and turn rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WheelCommand {
    pub v: f64,
    pub w: f64,
}

impl WheelCommand {
    pub fn new(v: f64, w: f64) -> Self {
        Self {
            v: v.clamp(-1.0, 1.0),
            w: w.clamp(-1.0, 1.0),
        }
    }
}

/// Arcade mixing of `(v, w)` onto the two wheels.
pub fn apply_command(mut state: RobotState, cmd: WheelCommand) -> RobotState {
    state.left_wheel = (cmd.v - cmd.w).clamp(-1.0, 1.0) * MAX_WHEEL_SPEED;
    state.right_wheel = (cmd.v + cmd.w).clamp(-1.0, 1.0) * MAX_WHEEL_SPEED;
    state
}

#[derive(Debug, Clone)]
pub struct WorldState {
    pub robots: Vec<RobotState>,
    /// Number of physics steps taken; time is `steps * dt`.
    pub steps: u64,
    pub dt: f64,
    /// One random stream per robot, used for its regulatory draws.
    pub streams: Vec<ChaCha8Rng>,
}

impl WorldState {
    /// A world with the given robots; each robot's stream is seeded from `seed`.
    pub fn from_robots(robots: Vec<RobotState>, seed: u64) -> Self {
        let streams = (0..robots.len())
            .map(|i| {
                let mut s = ChaCha8Rng::seed_from_u64(seed);
                s.set_stream(i as u64 + 1);
                s
            })
            .collect();
        Self {
            robots,
            steps: 0,
            dt: DT,
            streams,
        }
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    /// Advances every robot by one Euler step of `dt`, then separates overlapping bodies.
    pub fn step(&mut self) {
        let dt = self.dt;
        for r in &mut self.robots {
            let forward = 0.5 * (r.left_wheel + r.right_wheel);
            let yaw_rate = (r.right_wheel - r.left_wheel) / TRACK_WIDTH;
            let (s, c) = r.pose.heading.sin_cos();
            r.pose.x += forward * c * dt;
            r.pose.y += forward * s * dt;
            r.pose.heading = wrap_angle(r.pose.heading + yaw_rate * dt);
        }
        resolve_collisions(&mut self.robots);
        self.steps += 1;
    }
}

/// Pushes overlapping discs apart symmetrically along their center line.
pub fn resolve_collisions(robots: &mut [RobotState]) {
    let min_sep = 2.0 * BODY_RADIUS;
    for _ in 0..COLLISION_PASSES {
        let mut any = false;
        for i in 0..robots.len() {
            for j in (i + 1)..robots.len() {
                let dx = robots[j].pose.x - robots[i].pose.x;
                let dy = robots[j].pose.y - robots[i].pose.y;
                let d2 = dx * dx + dy * dy;
                if d2 >= min_sep * min_sep {
                    continue;
                }
                any = true;
                let d = d2.sqrt();
                // coincident centers: separate along x
                let (ux, uy) = if d > 1e-12 {
                    (dx / d, dy / d)
                } else {
                    (1.0, 0.0)
                };
                let half = 0.5 * (min_sep - d);
                robots[i].pose.x -= ux * half;
                robots[i].pose.y -= uy * half;
                robots[j].pose.x += ux * half;
                robots[j].pose.y += uy * half;
            }
        }
        if !any {
            break;
        }
    }
}

/// Places `n` robots uniformly in a 3 x 3 m box centered `distance` meters
/// from the arena center, in a uniformly random direction.
///
/// The first `round(ratio_first * n)` robots belong to sub-group 0.
/// Positions overlapping an already placed robot are redrawn.
pub fn spawn_swarm<R: Rng + ?Sized>(
    n: usize,
    ratio_first: f64,
    distance: f64,
    rng: &mut R,
) -> Result<WorldState> {
    if n == 0 {
        return Err(Error::EmptySwarm);
    }
    if !(0.0..=1.0).contains(&ratio_first) {
        return Err(Error::Config(format!("ratio {ratio_first} outside [0, 1]")));
    }
    let alpha = rng.random_range(-PI..PI);
    let cx = ARENA_CENTER[0] + distance * alpha.cos();
    let cy = ARENA_CENTER[1] + distance * alpha.sin();
    let half = 0.5 * SPAWN_BOX;
    let n_first = (ratio_first * n as f64).round() as usize;
    let min_sep2 = (2.0 * BODY_RADIUS).powi(2);

    let mut robots: Vec<RobotState> = Vec::with_capacity(n);
    for k in 0..n {
        let mut pos = (0.0, 0.0);
        for _ in 0..SPAWN_ATTEMPTS {
            pos = (
                rng.random_range(cx - half..cx + half),
                rng.random_range(cy - half..cy + half),
            );
            let clear = robots.iter().all(|r| {
                let dx = r.pose.x - pos.0;
                let dy = r.pose.y - pos.1;
                dx * dx + dy * dy >= min_sep2
            });
            if clear {
                break;
            }
        }
        let heading = wrap_angle(rng.random_range(-PI..PI));
        let subgroup = usize::from(k >= n_first);
        robots.push(RobotState::at(pos.0, pos.1, heading, subgroup));
    }
    let stream_seed = rng.next_u64();
    Ok(WorldState::from_robots(robots, stream_seed))
}
