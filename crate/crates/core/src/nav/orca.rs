//! Optimal reciprocal collision avoidance. The linear programs follow the
//! structure of the RVO2 library: a 2D incremental LP over the admissible
//! half-planes inside the speed disc, and a 3D fallback that minimizes the
//! largest violation of the agent constraints when the 2D problem is
//! infeasible. Obstacle constraints stay hard in the fallback.

use serde::{Deserialize, Serialize};

use super::{det, v2, AgentState, Polygon, Vec2};

const EPSILON: f64 = 1e-10;

/// Velocities `v` with `det(direction, point - v) <= 0` are admissible,
/// that is, the admissible side is to the left of `direction`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfPlane {
    pub point: Vec2,
    pub direction: Vec2,
}

impl HalfPlane {
    pub fn admits(&self, v: Vec2, slack: f64) -> bool {
        det(self.direction, self.point - v) <= slack
    }

    /// `{v : v . n >= offset}` for unit `n`.
    fn from_normal(n: Vec2, offset: f64) -> Self {
        HalfPlane {
            point: n * offset,
            direction: Vec2::new(n.y, -n.x),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrcaParams {
    /// Agent-agent time horizon, seconds.
    pub time_horizon: f64,
    /// Agent-obstacle time horizon, seconds.
    pub obstacle_time_horizon: f64,
    pub neighbor_dist: f64,
    pub max_neighbors: usize,
}

impl Default for OrcaParams {
    fn default() -> Self {
        OrcaParams {
            time_horizon: 2.0,
            obstacle_time_horizon: 1.0,
            neighbor_dist: 5.0,
            max_neighbors: 10,
        }
    }
}

/// Another disc as seen by the agent solving for its velocity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
    /// Share of the avoidance this agent takes on: 0.5 against another
    /// ORCA agent, 1.0 against a disc that will not react.
    pub responsibility: f64,
}

impl Neighbor {
    pub fn agent(a: &AgentState) -> Self {
        Neighbor {
            position: v2(a.position),
            velocity: v2(a.velocity),
            radius: a.radius,
            responsibility: 0.5,
        }
    }

    pub fn non_responsive(position: [f64; 2], velocity: [f64; 2], radius: f64) -> Self {
        Neighbor {
            position: v2(position),
            velocity: v2(velocity),
            radius,
            responsibility: 1.0,
        }
    }
}

fn obstacle_lines(agent: &AgentState, obstacles: &[Polygon], params: &OrcaParams, dt: f64) -> Vec<HalfPlane> {
    let p = v2(agent.position);
    let reach = agent.radius + params.obstacle_time_horizon * agent.max_speed;
    obstacles
        .iter()
        .filter_map(|poly| {
            let (d, n) = poly.signed_distance(p);
            if d > reach {
                return None;
            }
            let gap = d - agent.radius;
            // ahead of contact: limit the approach speed; in contact: move out
            let offset = if gap > 0.0 {
                -gap / params.obstacle_time_horizon
            } else {
                -gap / dt
            };
            Some(HalfPlane::from_normal(n, offset))
        })
        .collect()
}

fn agent_line(agent: &AgentState, other: &Neighbor, params: &OrcaParams, dt: f64) -> HalfPlane {
    let vel = v2(agent.velocity);
    let rel_pos = other.position - v2(agent.position);
    let rel_vel = vel - other.velocity;
    let dist_sq = rel_pos.norm_squared();
    let combined = agent.radius + other.radius;
    let combined_sq = combined * combined;
    let inv_tau = 1.0 / params.time_horizon;

    let (direction, u);
    if dist_sq > combined_sq {
        let w = rel_vel - rel_pos * inv_tau;
        let w_len_sq = w.norm_squared();
        let dot1 = w.dot(&rel_pos);
        if dot1 < 0.0 && dot1 * dot1 > combined_sq * w_len_sq {
            // project on the cut-off circle
            let w_len = w_len_sq.sqrt();
            let unit_w = w / w_len;
            direction = Vec2::new(unit_w.y, -unit_w.x);
            u = unit_w * (combined * inv_tau - w_len);
        } else {
            // project on a leg
            let leg = (dist_sq - combined_sq).sqrt();
            let dir = if det(rel_pos, w) > 0.0 {
                Vec2::new(rel_pos.x * leg - rel_pos.y * combined, rel_pos.x * combined + rel_pos.y * leg) / dist_sq
            } else {
                -Vec2::new(rel_pos.x * leg + rel_pos.y * combined, -rel_pos.x * combined + rel_pos.y * leg) / dist_sq
            };
            direction = dir;
            u = dir * rel_vel.dot(&dir) - rel_vel;
        }
    } else {
        // already overlapping: resolve within one step
        let inv_dt = 1.0 / dt;
        let w = rel_vel - rel_pos * inv_dt;
        let w_len = w.norm();
        let unit_w = if w_len > 0.0 { w / w_len } else { Vec2::new(1.0, 0.0) };
        direction = Vec2::new(unit_w.y, -unit_w.x);
        u = unit_w * (combined * inv_dt - w_len);
    }
    HalfPlane {
        point: vel + u * other.responsibility,
        direction,
    }
}

/// All constraints for one agent: obstacle half-planes first, then one per
/// neighbor. Returns the lines and how many of them come from obstacles.
pub fn orca_lines(
    agent: &AgentState,
    neighbors: &[Neighbor],
    obstacles: &[Polygon],
    params: &OrcaParams,
    dt: f64,
) -> (Vec<HalfPlane>, usize) {
    let mut lines = obstacle_lines(agent, obstacles, params, dt);
    let n_obst = lines.len();
    lines.extend(neighbors.iter().map(|n| agent_line(agent, n, params, dt)));
    (lines, n_obst)
}

/// New velocity for `agent`: the admissible velocity within `max_speed`
/// closest to `pref_velocity`.
pub fn orca_velocity(
    agent: &AgentState,
    neighbors: &[Neighbor],
    obstacles: &[Polygon],
    pref_velocity: Vec2,
    params: &OrcaParams,
    dt: f64,
) -> Vec2 {
    let (lines, n_obst) = orca_lines(agent, neighbors, obstacles, params, dt);
    solve_velocity(&lines, n_obst, agent.max_speed, pref_velocity)
}

pub fn solve_velocity(lines: &[HalfPlane], n_obst: usize, max_speed: f64, pref_velocity: Vec2) -> Vec2 {
    let mut result = Vec2::zeros();
    let fail = linear_program2(lines, max_speed, pref_velocity, false, &mut result);
    if fail < lines.len() {
        linear_program3(lines, n_obst, fail, max_speed, &mut result);
    }
    result
}

fn linear_program1(lines: &[HalfPlane], line_no: usize, radius: f64, opt: Vec2, direction_opt: bool, result: &mut Vec2) -> bool {
    let line = lines[line_no];
    let dot = line.point.dot(&line.direction);
    let disc = dot * dot + radius * radius - line.point.norm_squared();
    if disc < 0.0 {
        return false;
    }
    let sqrt_disc = disc.sqrt();
    let mut t_left = -dot - sqrt_disc;
    let mut t_right = -dot + sqrt_disc;
    for other in &lines[..line_no] {
        let denominator = det(line.direction, other.direction);
        let numerator = det(other.direction, line.point - other.point);
        if denominator.abs() <= EPSILON {
            if numerator < 0.0 {
                return false;
            }
            continue;
        }
        let t = numerator / denominator;
        if denominator >= 0.0 {
            t_right = t_right.min(t);
        } else {
            t_left = t_left.max(t);
        }
        if t_left > t_right {
            return false;
        }
    }
    let t = if direction_opt {
        if opt.dot(&line.direction) > 0.0 {
            t_right
        } else {
            t_left
        }
    } else {
        line.direction.dot(&(opt - line.point)).clamp(t_left, t_right)
    };
    *result = line.point + line.direction * t;
    true
}

fn linear_program2(lines: &[HalfPlane], radius: f64, opt: Vec2, direction_opt: bool, result: &mut Vec2) -> usize {
    *result = if direction_opt {
        opt * radius
    } else if opt.norm_squared() > radius * radius {
        opt.normalize() * radius
    } else {
        opt
    };
    for i in 0..lines.len() {
        if det(lines[i].direction, lines[i].point - *result) > 0.0 {
            let saved = *result;
            if !linear_program1(lines, i, radius, opt, direction_opt, result) {
                *result = saved;
                return i;
            }
        }
    }
    lines.len()
}

fn linear_program3(lines: &[HalfPlane], n_obst: usize, begin: usize, radius: f64, result: &mut Vec2) {
    let mut distance = 0.0;
    for i in begin..lines.len() {
        if det(lines[i].direction, lines[i].point - *result) <= distance {
            continue;
        }
        let mut proj: Vec<HalfPlane> = lines[..n_obst].to_vec();
        for j in n_obst..i {
            let d = det(lines[i].direction, lines[j].direction);
            let point = if d.abs() <= EPSILON {
                if lines[i].direction.dot(&lines[j].direction) > 0.0 {
                    continue;
                }
                (lines[i].point + lines[j].point) * 0.5
            } else {
                lines[i].point + lines[i].direction * (det(lines[j].direction, lines[i].point - lines[j].point) / d)
            };
            let dir = lines[j].direction - lines[i].direction;
            proj.push(HalfPlane {
                point,
                direction: dir.normalize(),
            });
        }
        let saved = *result;
        let opt = Vec2::new(-lines[i].direction.y, lines[i].direction.x);
        if linear_program2(&proj, radius, opt, true, result) < proj.len() {
            *result = saved;
        }
        distance = det(lines[i].direction, lines[i].point - *result);
    }
}
