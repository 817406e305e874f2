use serde::{Deserialize, Serialize};

use super::{arr, orca_velocity, plan_global, v2, AgentState, EnvironmentState, NavGrid, Neighbor, OrcaParams, PlanError, Polygon, UserState, Vec2};

/// Intermediate waypoints count as reached within this distance, or twice
/// the agent radius if that is larger.
const WAYPOINT_RADIUS: f64 = 0.2;

/// Clockwise turn applied to the preferred velocity while other agents are
/// in range. Exactly opposed agents otherwise only ever get braking
/// constraints and stall; a fixed turn keeps the crowd rotation-equivariant.
pub const KEEP_RIGHT: f64 = 0.035;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrowdAgent {
    pub state: AgentState,
    pub goal: Option<[f64; 2]>,
    pub path: Vec<[f64; 2]>,
    pub waypoint: usize,
    pub arrived: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NavEvent {
    Arrived { agent: usize },
}

/// A set of ORCA agents moving through static obstacles around an
/// optional non-reacting user disc.
#[derive(Clone, Debug)]
pub struct Crowd {
    pub obstacles: Vec<Polygon>,
    pub agents: Vec<CrowdAgent>,
    pub user: Option<UserState>,
    pub params: OrcaParams,
    pub arrival_tolerance: f64,
    grid: Option<NavGrid>,
}

impl Crowd {
    pub fn new(env: EnvironmentState, params: OrcaParams) -> Self {
        Crowd {
            obstacles: env.obstacles,
            agents: env
                .agents
                .into_iter()
                .map(|state| CrowdAgent {
                    state,
                    goal: None,
                    path: Vec::new(),
                    waypoint: 0,
                    arrived: false,
                })
                .collect(),
            user: env.user,
            params,
            arrival_tolerance: 0.1,
            grid: None,
        }
    }

    /// Goals are then reached along global plans instead of straight lines.
    pub fn with_grid(mut self, grid: NavGrid) -> Self {
        self.grid = Some(grid);
        self
    }

    pub fn grid(&self) -> Option<&NavGrid> {
        self.grid.as_ref()
    }

    pub fn set_goal(&mut self, i: usize, goal: Option<[f64; 2]>) -> Result<(), PlanError> {
        let start = self.agents[i].state.position;
        let path = match (goal, &self.grid) {
            (None, _) => Vec::new(),
            (Some(g), Some(grid)) => plan_global(grid, start, g)?,
            (Some(g), None) => vec![start, g],
        };
        let a = &mut self.agents[i];
        a.goal = goal;
        a.path = path;
        a.waypoint = 1.min(a.path.len().saturating_sub(1));
        a.arrived = false;
        Ok(())
    }

    pub fn pref_velocity(&self, i: usize, dt: f64) -> Vec2 {
        let a = &self.agents[i];
        let Some(goal) = a.goal else {
            return Vec2::zeros();
        };
        let p = v2(a.state.position);
        let last = a.path.len().saturating_sub(1);
        let target = if a.waypoint < last { v2(a.path[a.waypoint]) } else { v2(goal) };
        let to = target - p;
        let dist = to.norm();
        if a.arrived && dist <= self.arrival_tolerance || dist == 0.0 {
            return Vec2::zeros();
        }
        let speed = if a.waypoint < last {
            a.state.pref_speed
        } else {
            a.state.pref_speed.min(dist / dt)
        };
        to / dist * speed
    }

    fn neighbors(&self, i: usize) -> Vec<Neighbor> {
        let me = v2(self.agents[i].state.position);
        let range = self.params.neighbor_dist;
        let mut near: Vec<(f64, usize)> = self
            .agents
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(j, o)| ((v2(o.state.position) - me).norm(), j))
            .filter(|&(d, _)| d <= range)
            .collect();
        near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        near.truncate(self.params.max_neighbors);
        let mut out: Vec<Neighbor> = near.into_iter().map(|(_, j)| Neighbor::agent(&self.agents[j].state)).collect();
        if let Some(u) = &self.user {
            if (v2(u.position) - me).norm() <= range {
                out.push(Neighbor::non_responsive(u.position, [0.0; 2], u.radius));
            }
        }
        out
    }

    /// Advances every agent by `dt`. Velocities are solved against the state
    /// at the start of the step, then all positions move together.
    pub fn step(&mut self, dt: f64) -> Vec<NavEvent> {
        let velocities: Vec<Vec2> = (0..self.agents.len())
            .map(|i| {
                let mut pref = self.pref_velocity(i, dt);
                let nb = self.neighbors(i);
                if nb.iter().any(|n| n.responsibility < 1.0) {
                    pref = nalgebra::Rotation2::new(-KEEP_RIGHT) * pref;
                }
                orca_velocity(&self.agents[i].state, &nb, &self.obstacles, pref, &self.params, dt)
            })
            .collect();
        let mut events = Vec::new();
        for (i, (a, v)) in self.agents.iter_mut().zip(velocities).enumerate() {
            a.state.velocity = arr(v);
            a.state.position = arr(v2(a.state.position) + v * dt);
            let Some(goal) = a.goal else { continue };
            let p = v2(a.state.position);
            let last = a.path.len().saturating_sub(1);
            let reach = WAYPOINT_RADIUS.max(2.0 * a.state.radius);
            while a.waypoint < last && (v2(a.path[a.waypoint]) - p).norm() <= reach {
                a.waypoint += 1;
            }
            if !a.arrived && a.waypoint >= last && (v2(goal) - p).norm() <= self.arrival_tolerance {
                a.arrived = true;
                events.push(NavEvent::Arrived { agent: i });
            }
        }
        events
    }

    pub fn environment(&self) -> EnvironmentState {
        EnvironmentState {
            obstacles: self.obstacles.clone(),
            agents: self.agents.iter().map(|a| a.state.clone()).collect(),
            user: self.user.clone(),
        }
    }

    /// Smallest center distance minus radii over all agent pairs.
    pub fn min_clearance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.agents.iter().enumerate() {
            for b in &self.agents[i + 1..] {
                let d = (v2(a.state.position) - v2(b.state.position)).norm() - a.state.radius - b.state.radius;
                best = best.min(d);
            }
        }
        best
    }
}
