//! Navigation: static-obstacle environment, grid planning with string
//! pulling, and ORCA reciprocal collision avoidance.

mod crowd;
mod grid;
mod orca;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crowd::{Crowd, CrowdAgent, NavEvent, KEEP_RIGHT};
pub use grid::{astar, plan_global, polyline_length, Cell, GridPath, NavGrid, PlanError, DIAGONAL_COST};
pub use orca::{orca_lines, orca_velocity, solve_velocity, HalfPlane, Neighbor, OrcaParams};

pub type Vec2 = Vector2<f64>;

pub fn v2(p: [f64; 2]) -> Vec2 {
    Vec2::new(p[0], p[1])
}

pub fn arr(v: Vec2) -> [f64; 2] {
    [v.x, v.y]
}

/// 2D cross product.
pub fn det(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("obstacle has fewer than 3 vertices")]
    TooFewVertices,
    #[error("obstacle is degenerate (zero area)")]
    Degenerate,
    #[error("obstacle is not convex")]
    NotConvex,
    #[error("agent {0} must have positive radius and speeds")]
    BadAgent(String),
    #[error("agent id {0} is used more than once")]
    DuplicateAgent(String),
}

/// Convex polygon with counter-clockwise vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct Polygon {
    vertices: Vec<[f64; 2]>,
}

impl TryFrom<Vec<[f64; 2]>> for Polygon {
    type Error = EnvError;

    fn try_from(v: Vec<[f64; 2]>) -> Result<Self, Self::Error> {
        Polygon::new(v)
    }
}

impl From<Polygon> for Vec<[f64; 2]> {
    fn from(p: Polygon) -> Self {
        p.vertices
    }
}

impl Polygon {
    pub fn new(mut vertices: Vec<[f64; 2]>) -> Result<Self, EnvError> {
        if vertices.len() < 3 {
            return Err(EnvError::TooFewVertices);
        }
        let area2: f64 = (0..vertices.len())
            .map(|i| {
                let (a, b) = (vertices[i], vertices[(i + 1) % vertices.len()]);
                a[0] * b[1] - a[1] * b[0]
            })
            .sum();
        if area2.abs() <= 1e-12 {
            return Err(EnvError::Degenerate);
        }
        if area2 < 0.0 {
            vertices.reverse();
        }
        let n = vertices.len();
        for i in 0..n {
            let a = v2(vertices[i]);
            let b = v2(vertices[(i + 1) % n]);
            let c = v2(vertices[(i + 2) % n]);
            if det(b - a, c - b) < -1e-12 {
                return Err(EnvError::NotConvex);
            }
        }
        Ok(Polygon { vertices })
    }

    /// Axis-aligned rectangle from two corners.
    pub fn rect(min: [f64; 2], max: [f64; 2]) -> Result<Self, EnvError> {
        Polygon::new(vec![min, [max[0], min[1]], max, [min[0], max[1]]])
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (v2(self.vertices[i]), v2(self.vertices[(i + 1) % n])))
    }

    /// Signed distance of `p` to the boundary: negative inside. Returns the
    /// distance and the unit direction pointing away from the polygon.
    pub fn signed_distance(&self, p: Vec2) -> (f64, Vec2) {
        let mut inside = true;
        let mut best = (f64::INFINITY, Vec2::zeros());
        let mut least_depth = (f64::INFINITY, Vec2::zeros());
        for (a, b) in self.edges() {
            let e = b - a;
            let outward = Vec2::new(e.y, -e.x).normalize();
            let side = (p - a).dot(&outward);
            if side > 0.0 {
                inside = false;
            }
            if -side < least_depth.0 {
                least_depth = (-side, outward);
            }
            let t = ((p - a).dot(&e) / e.norm_squared()).clamp(0.0, 1.0);
            let c = a + e * t;
            let d = (p - c).norm();
            if d < best.0 {
                let dir = if d > 0.0 { (p - c) / d } else { outward };
                best = (d, dir);
            }
        }
        if inside {
            (-least_depth.0, least_depth.1)
        } else {
            best
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.signed_distance(p).0 < 0.0
    }

    /// True when the open segment `a`-`b` passes through the polygon's
    /// interior. Touching the boundary (a vertex, or sliding along an edge)
    /// does not count.
    pub fn segment_crosses_interior(&self, a: Vec2, b: Vec2) -> bool {
        let d = b - a;
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for (p, q) in self.edges() {
            let e = q - p;
            let outward = Vec2::new(e.y, -e.x);
            // inside iff (x - p) . outward <= 0
            let num = (a - p).dot(&outward);
            let den = d.dot(&outward);
            if den == 0.0 {
                if num >= 0.0 {
                    return false;
                }
            } else {
                let t = -num / den;
                if den < 0.0 {
                    t0 = t0.max(t);
                } else {
                    t1 = t1.min(t);
                }
            }
            if t0 >= t1 {
                return false;
            }
        }
        let mid = a + d * (0.5 * (t0 + t1));
        self.edges().all(|(p, q)| {
            let e = q - p;
            (mid - p).dot(&Vec2::new(e.y, -e.x)) < 0.0
        })
    }
}

fn default_pref_speed() -> f64 {
    1.0
}

fn default_max_speed() -> f64 {
    1.5
}

fn default_agent_radius() -> f64 {
    0.3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: String,
    #[serde(rename = "pos")]
    pub position: [f64; 2],
    #[serde(default)]
    pub velocity: [f64; 2],
    #[serde(default = "default_agent_radius")]
    pub radius: f64,
    #[serde(default = "default_pref_speed")]
    pub pref_speed: f64,
    #[serde(default = "default_max_speed")]
    pub max_speed: f64,
}

impl AgentState {
    pub fn new(id: impl Into<String>, position: [f64; 2], radius: f64, pref_speed: f64, max_speed: f64) -> Self {
        AgentState {
            id: id.into(),
            position,
            velocity: [0.0; 2],
            radius,
            pref_speed,
            max_speed,
        }
    }
}

/// The tracked participant: a disc that does not take part in avoidance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserState {
    #[serde(rename = "pos")]
    pub position: [f64; 2],
    #[serde(default = "default_agent_radius")]
    pub radius: f64,
    /// Eye height above the floor, meters.
    #[serde(default = "default_eye_height")]
    pub eye_height: f64,
}

fn default_eye_height() -> f64 {
    1.2
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentState {
    #[serde(default)]
    pub obstacles: Vec<Polygon>,
    #[serde(default)]
    pub agents: Vec<AgentState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user: Option<UserState>,
}

impl EnvironmentState {
    pub fn validate(&self) -> Result<(), EnvError> {
        for (i, a) in self.agents.iter().enumerate() {
            if !(a.radius > 0.0 && a.pref_speed > 0.0 && a.max_speed > 0.0) {
                return Err(EnvError::BadAgent(a.id.clone()));
            }
            if self.agents[..i].iter().any(|o| o.id == a.id) {
                return Err(EnvError::DuplicateAgent(a.id.clone()));
            }
        }
        Ok(())
    }

    /// A 4 m x 4 m study room with a doorway in the far wall leading to an
    /// adjacent room; the participant sits near the near wall.
    pub fn study_room() -> Self {
        let wall = |a: [f64; 2], b: [f64; 2]| Polygon::rect(a, b).expect("valid wall");
        EnvironmentState {
            obstacles: vec![
                // study room
                wall([-0.1, -0.1], [4.1, 0.0]),
                wall([-0.1, 0.0], [0.0, 4.0]),
                wall([4.0, 0.0], [4.1, 4.0]),
                wall([-0.1, 4.0], [1.4, 4.1]),
                wall([2.6, 4.0], [4.1, 4.1]),
                // adjacent room
                wall([-0.1, 4.1], [0.0, 7.0]),
                wall([4.0, 4.1], [4.1, 7.0]),
                wall([-0.1, 7.0], [4.1, 7.1]),
            ],
            agents: vec![AgentState::new("fva", [2.0, 2.2], 0.3, 1.0, 1.5)],
            user: Some(UserState {
                position: [2.0, 0.8],
                radius: 0.3,
                eye_height: 1.2,
            }),
        }
    }
}

/// Whether `a` and `b` can see each other past the static obstacles.
/// A degenerate segment (`a == b`) is always visible.
pub fn line_of_sight(env: &EnvironmentState, a: [f64; 2], b: [f64; 2]) -> bool {
    segment_visible(&env.obstacles, a, b)
}

pub fn segment_visible(obstacles: &[Polygon], a: [f64; 2], b: [f64; 2]) -> bool {
    if a == b {
        return true;
    }
    let (a, b) = (v2(a), v2(b));
    !obstacles.iter().any(|p| p.segment_crosses_interior(a, b))
}
