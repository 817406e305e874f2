//! Fixed-timestep simulation of scripted agents: behavior state machine,
//! navigation, gait playback, gesture layers and gaze, composed per tick
//! into skeletal snapshots.

mod library;
mod trace;

use std::sync::Arc;

use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bfsm::{combine_gaze, gaze_for_state, Bfsm, BfsmError, BfsmEvent, BfsmStateId, AgentProfile, ScenarioScript, Utterance};
use crate::friendliness::{gaze_flag, select_gait, FriendlinessError};
use crate::gaze::{apply_gaze, neck_target, GazeError, NeckMapping, NeckPose};
use crate::motion::procedural::{HEAD, NECK};
use crate::motion::{forward_kinematics, overlay, ClipKind, JointConfig, JointMask, MotionClip, Skeleton};
use crate::nav::{segment_visible, Crowd, EnvError, EnvironmentState, NavEvent, NavGrid, OrcaParams};

pub use library::ClipLibrary;
pub use trace::{read_trace, run_scenario, run_scenario_with, write_trace, CommandTrace, RunError, TimedEvent, TraceRecord};

pub const DEFAULT_DT: f64 = 1.0 / 60.0;

/// Below this speed an agent counts as standing still.
const STANDING_SPEED: f64 = 1e-3;
/// Heading slew rate, radians per second.
const TURN_RATE: f64 = std::f64::consts::TAU;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub dt: f64,
    /// How long a spoken response takes before it counts as delivered.
    pub response_seconds: f64,
    /// Gesture fade-in and fade-out time.
    pub gesture_fade: f64,
    pub cell_size: f64,
    /// Extra clearance added to the largest agent radius when inflating
    /// obstacles for planning.
    pub plan_margin: f64,
    pub orca: OrcaParams,
    /// Neck tracking also requires an unobstructed sight line to the user.
    pub require_line_of_sight: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            dt: DEFAULT_DT,
            response_seconds: 2.0,
            gesture_fade: 0.3,
            cell_size: 0.1,
            plan_margin: 0.05,
            orca: OrcaParams::default(),
            require_line_of_sight: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("environment has no agents")]
    NoAgents,
    #[error("{profiles} profiles for {agents} agents")]
    ProfileCount { profiles: usize, agents: usize },
    #[error("no clip named {0:?} in the library")]
    MissingClip(String),
    #[error("clip {0:?} uses a different skeleton than the gait")]
    SkeletonMismatch(String),
    #[error("timestep must be positive, got {0}")]
    BadTimestep(f64),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Bfsm(#[from] BfsmError),
    #[error(transparent)]
    Friendliness(#[from] FriendlinessError),
    #[error(transparent)]
    Gaze(#[from] GazeError),
}

/// Event addressed to one agent, or to all when `agent` is `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentEvent {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<String>,
    pub event: BfsmEvent,
}

impl AgentEvent {
    pub fn broadcast(event: BfsmEvent) -> Self {
        AgentEvent { agent: None, event }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventSource {
    External,
    Internal,
}

/// Entries of the event log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogKind {
    Transition {
        event: BfsmEvent,
        source: EventSource,
        from: BfsmStateId,
        to: BfsmStateId,
    },
    Rejected {
        event: BfsmEvent,
        source: EventSource,
        reason: String,
    },
    Response {
        response: crate::bfsm::ResponseKind,
        text: String,
    },
    Gesture {
        clip: String,
    },
    Fault {
        message: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub tick: u64,
    pub agent: String,
    #[serde(flatten)]
    pub kind: LogKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipWeight {
    pub id: String,
    pub weight: f64,
}

/// Per-agent output of one tick.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentSnapshot {
    pub id: String,
    pub tick: u64,
    pub t: f64,
    pub position: [f64; 2],
    pub velocity: [f64; 2],
    pub heading: f64,
    pub bfsm_state: BfsmStateId,
    pub xi: bool,
    pub line_of_sight: bool,
    pub neck: NeckPose,
    pub gait_phase: f64,
    pub clips: Vec<ClipWeight>,
    /// World positions of every joint.
    pub pose: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub say: Option<Utterance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
struct ActiveGesture {
    clip: String,
    started: f64,
}

#[derive(Clone, Debug)]
struct AgentRuntime {
    id: String,
    bfsm: Bfsm,
    gait_id: String,
    gait_phase: f64,
    heading: f64,
    gestures: Vec<ActiveGesture>,
    neck: NeckPose,
    config: JointConfig,
    scheduled: Option<(u64, BfsmEvent)>,
    say: Option<Utterance>,
    fault: Option<String>,
    xi: bool,
    los: bool,
}

/// The simulation state. Advance with [`World::tick`]; observe with
/// [`World::snapshot`].
#[derive(Clone, Debug)]
pub struct World {
    tick: u64,
    config: EngineConfig,
    library: Arc<ClipLibrary>,
    skeleton: Skeleton,
    neck: NeckMapping,
    hand_mask: JointMask,
    head_mask: JointMask,
    crowd: Crowd,
    agents: Vec<AgentRuntime>,
}

impl World {
    /// One profile per agent in `env`, or a single profile shared by all.
    pub fn new(
        script: &ScenarioScript,
        profiles: &[AgentProfile],
        env: EnvironmentState,
        library: Arc<ClipLibrary>,
        config: EngineConfig,
        seed: u64,
    ) -> Result<Self, EngineError> {
        if config.dt.is_nan() || config.dt <= 0.0 {
            return Err(EngineError::BadTimestep(config.dt));
        }
        env.validate()?;
        if env.agents.is_empty() {
            return Err(EngineError::NoAgents);
        }
        if profiles.len() != env.agents.len() && profiles.len() != 1 {
            return Err(EngineError::ProfileCount {
                profiles: profiles.len(),
                agents: env.agents.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut skeleton: Option<Skeleton> = None;
        let mut agents = Vec::with_capacity(env.agents.len());
        for (i, a) in env.agents.iter().enumerate() {
            let profile = profiles[i.min(profiles.len() - 1)].clone();
            let gait_id = match &profile.gait_id {
                Some(id) => id.clone(),
                None => select_gait(library.gait_map(), profile.f_des)?.to_string(),
            };
            let clip = library.gait(&gait_id).ok_or_else(|| EngineError::MissingClip(gait_id.clone()))?;
            match &skeleton {
                Some(sk) if sk != &clip.skeleton => return Err(EngineError::SkeletonMismatch(gait_id)),
                Some(_) => {}
                None => skeleton = Some(clip.skeleton.clone()),
            }
            let heading = match &env.user {
                Some(u) => (u.position[1] - a.position[1]).atan2(u.position[0] - a.position[0]),
                None => 0.0,
            };
            let config = clip.frames()[0].clone();
            agents.push(AgentRuntime {
                id: a.id.clone(),
                bfsm: Bfsm::new(script.clone(), profile)?,
                gait_phase: rng.gen_range(0.0..clip.duration().max(f64::MIN_POSITIVE)),
                gait_id,
                heading,
                gestures: Vec::new(),
                neck: NeckPose::default(),
                config,
                scheduled: None,
                say: None,
                fault: None,
                xi: false,
                los: false,
            });
        }
        let skeleton = skeleton.expect("at least one agent");
        for g in ["head_nod", "wave_open", "wave_closed"] {
            if let Some(c) = library.gesture(g) {
                if c.skeleton != skeleton {
                    return Err(EngineError::SkeletonMismatch(g.into()));
                }
            }
        }
        let neck = NeckMapping::new(&skeleton, NECK)?;
        let radius = env.agents.iter().map(|a| a.radius).fold(0.0, f64::max);
        let grid = NavGrid::for_environment(
            &env,
            &[script.adjacent_room, script.station],
            config.cell_size,
            radius + config.plan_margin,
        );
        let crowd = Crowd::new(env, config.orca).with_grid(grid);
        let mut world = World {
            tick: 0,
            hand_mask: JointMask::subtree(&skeleton, &["RightShoulder"]),
            head_mask: JointMask::subtree(&skeleton, &[HEAD]),
            neck,
            skeleton,
            config,
            library,
            crowd,
            agents,
        };
        for i in 0..world.agents.len() {
            world.compose(i);
        }
        Ok(world)
    }

    pub fn tick_count(&self) -> u64 {
        self.tick
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.config.dt
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn skeleton(&self) -> &Skeleton {
        &self.skeleton
    }

    pub fn environment(&self) -> EnvironmentState {
        self.crowd.environment()
    }

    pub fn state_of(&self, agent: usize) -> &BfsmStateId {
        self.agents[agent].bfsm.state()
    }

    pub fn agent_ids(&self) -> impl Iterator<Item = &str> {
        self.agents.iter().map(|a| a.id.as_str())
    }

    pub fn all_done(&self) -> bool {
        self.agents.iter().all(|a| a.bfsm.state() == &BfsmStateId::Done)
    }

    /// Applies `events` at this tick boundary, advances one timestep and
    /// returns the event log entries produced.
    pub fn tick(&mut self, events: &[AgentEvent]) -> Vec<LogEntry> {
        let mut log = Vec::new();
        let now = self.tick;
        for i in 0..self.agents.len() {
            if let Some((due, _)) = &self.agents[i].scheduled {
                if *due <= now {
                    let (_, e) = self.agents[i].scheduled.take().expect("checked");
                    self.apply(i, &e, EventSource::Internal, &mut log);
                }
            }
        }
        for e in events {
            for i in 0..self.agents.len() {
                if e.agent.as_deref().is_none_or(|id| id == self.agents[i].id) {
                    self.apply(i, &e.event, EventSource::External, &mut log);
                }
            }
        }
        let arrivals = self.crowd.step(self.config.dt);
        self.tick += 1;
        for NavEvent::Arrived { agent } in arrivals {
            if self.agents[agent].bfsm.state().is_navigating() {
                self.agents[agent].scheduled = Some((self.tick, BfsmEvent::ArrivedAtGoal));
            }
        }
        for i in 0..self.agents.len() {
            self.advance_motion(i);
            self.compose(i);
        }
        log
    }

    fn ticks_for(&self, seconds: f64) -> u64 {
        (seconds / self.config.dt).round().max(1.0) as u64
    }

    fn apply(&mut self, i: usize, event: &BfsmEvent, source: EventSource, log: &mut Vec<LogEntry>) {
        let now = self.tick;
        let t = self.time();
        let id = self.agents[i].id.clone();
        let entry = |kind| LogEntry {
            tick: now,
            agent: id.clone(),
            kind,
        };
        let from = self.agents[i].bfsm.state().clone();
        let out = match self.agents[i].bfsm.step(event, t) {
            Ok(out) => out,
            Err(e) => {
                log.push(entry(LogKind::Rejected {
                    event: event.clone(),
                    source,
                    reason: e.to_string(),
                }));
                return;
            }
        };
        log.push(entry(LogKind::Transition {
            event: event.clone(),
            source,
            from,
            to: out.state.clone(),
        }));
        let agent = &mut self.agents[i];
        agent.scheduled = None;
        agent.say = None;
        let mut busy = 0.0f64;
        if let Some(u) = &out.say {
            log.push(entry(LogKind::Response {
                response: u.kind,
                text: u.text.clone(),
            }));
            agent.say = Some(u.clone());
            busy = self.config.response_seconds;
        }
        if let Some(g) = out.gesture_request {
            let clip = g.clip_id().to_string();
            if let Some(c) = self.library.gesture(&clip) {
                busy = busy.max(c.duration());
                let agent = &mut self.agents[i];
                let hand = c.kind == ClipKind::GestureHand;
                // a new gesture replaces one on the same body part
                agent.gestures.retain(|a| {
                    self.library.gesture(&a.clip).is_none_or(|o| (o.kind == ClipKind::GestureHand) != hand)
                });
                agent.gestures.push(ActiveGesture { clip: clip.clone(), started: t });
                log.push(entry(LogKind::Gesture { clip }));
            } else {
                log.push(entry(LogKind::Fault {
                    message: format!("gesture clip {clip:?} not loaded"),
                }));
            }
        }
        if out.say.is_some() {
            let due = now + self.ticks_for(busy);
            self.agents[i].scheduled = Some((due, BfsmEvent::ResponseDelivered));
        }
        if let BfsmStateId::PerformTask(_) = out.state {
            let due = now + self.ticks_for(self.agents[i].bfsm.script().dwell_seconds);
            self.agents[i].scheduled = Some((due, BfsmEvent::TimerElapsed));
        }
        self.agents[i].fault = None;
        if let Err(e) = self.crowd.set_goal(i, out.goal) {
            let message = e.to_string();
            let _ = self.crowd.set_goal(i, None);
            self.agents[i].fault = Some(message.clone());
            log.push(entry(LogKind::Fault { message }));
        }
    }

    fn advance_motion(&mut self, i: usize) {
        let dt = self.config.dt;
        let state = self.crowd.agents[i].state.clone();
        let speed = state.velocity[0].hypot(state.velocity[1]);
        let agent = &mut self.agents[i];
        if speed > STANDING_SPEED {
            agent.gait_phase += dt * speed / state.pref_speed;
            let clip = self.library.gait(&agent.gait_id).expect("checked at construction");
            let d = clip.duration();
            if d > 0.0 {
                agent.gait_phase = agent.gait_phase.rem_euclid(d);
            }
        }
        let user = self.crowd.user.as_ref().map(|u| u.position);
        let desired = match (agent.bfsm.state(), user) {
            _ if speed > STANDING_SPEED && agent.bfsm.state().is_navigating() => {
                Some(state.velocity[1].atan2(state.velocity[0]))
            }
            (BfsmStateId::PerformTask(_), Some(u)) => {
                Some((state.position[1] - u[1]).atan2(state.position[0] - u[0]))
            }
            (_, Some(u)) => Some((u[1] - state.position[1]).atan2(u[0] - state.position[0])),
            _ => None,
        };
        if let Some(h) = desired {
            let diff = crate::motion::wrap_degrees((h - agent.heading).to_degrees()).to_radians();
            let max = TURN_RATE * dt;
            agent.heading = wrap_angle(agent.heading + diff.clamp(-max, max));
        }
        // gestures that have finished are dropped
        let t = self.tick as f64 * dt;
        let lib = &self.library;
        agent.gestures.retain(|g| lib.gesture(&g.clip).is_some_and(|c| t - g.started <= c.duration()));
    }

    fn gesture_weight(&self, clip: &MotionClip, elapsed: f64) -> f64 {
        let fade = self.config.gesture_fade;
        let d = clip.duration();
        if fade <= 0.0 {
            return if (0.0..=d).contains(&elapsed) { 1.0 } else { 0.0 };
        }
        (elapsed / fade).min((d - elapsed) / fade).clamp(0.0, 1.0)
    }

    /// Builds the joint configuration for agent `i` at the current tick:
    /// gait, then gestures, then gaze on the neck.
    fn compose(&mut self, i: usize) {
        let t = self.time();
        let dt = self.config.dt;
        let nav = self.crowd.agents[i].state.clone();
        let speed = nav.velocity[0].hypot(nav.velocity[1]);
        let agent = &self.agents[i];
        let gait = self.library.gait(&agent.gait_id).expect("checked at construction");
        let mut config = if speed > STANDING_SPEED {
            gait.sample(agent.gait_phase, true)
        } else {
            gait.frames()[0].clone()
        };
        for g in &agent.gestures {
            let Some(clip) = self.library.gesture(&g.clip) else { continue };
            let elapsed = t - g.started;
            let w = self.gesture_weight(clip, elapsed);
            let mask = if clip.kind == ClipKind::GestureHand { &self.hand_mask } else { &self.head_mask };
            config = overlay(&config, &clip.sample(elapsed, false), mask, w).expect("same skeleton");
        }
        let profile = agent.bfsm.profile();
        let xi = combine_gaze(gaze_flag(profile.f_des), gaze_for_state(agent.bfsm.state()), profile.gaze_enabled);
        let user = self.crowd.user.clone();
        let los = user.as_ref().is_some_and(|u| segment_visible(&self.crowd.obstacles, nav.position, u.position));
        let track = xi && user.is_some() && (los || !self.config.require_line_of_sight);
        let target = match (&user, track) {
            (Some(u), true) => neck_target(
                &self.neck,
                &self.skeleton,
                &config,
                agent.heading,
                [nav.position[0], nav.position[1], 0.0],
                [u.position[0], u.position[1], u.eye_height],
            )
            .ok(),
            _ => None,
        };
        let agent = &mut self.agents[i];
        let config = apply_gaze(&self.neck, &config, &mut agent.neck, target.unwrap_or_default(), target.is_some(), dt);
        agent.config = config;
        agent.xi = xi;
        agent.los = los;
    }

    pub fn snapshot(&self) -> Vec<AgentSnapshot> {
        (0..self.agents.len()).map(|i| self.agent_snapshot(i)).collect()
    }

    fn agent_snapshot(&self, i: usize) -> AgentSnapshot {
        let a = &self.agents[i];
        let nav = &self.crowd.agents[i].state;
        let t = self.time();
        let yaw = Rotation3::from_axis_angle(&Vector3::z_axis(), a.heading);
        let origin = Vector3::new(nav.position[0], nav.position[1], 0.0);
        let pose = forward_kinematics(&self.skeleton, &a.config)
            .positions
            .iter()
            .map(|p| {
                let w = origin + yaw * Vector3::from(*p);
                [w.x, w.y, w.z]
            })
            .collect();
        let speed = nav.velocity[0].hypot(nav.velocity[1]);
        let mut clips = vec![ClipWeight {
            id: a.gait_id.clone(),
            weight: if speed > STANDING_SPEED { 1.0 } else { 0.0 },
        }];
        for g in &a.gestures {
            if let Some(c) = self.library.gesture(&g.clip) {
                clips.push(ClipWeight {
                    id: g.clip.clone(),
                    weight: self.gesture_weight(c, t - g.started),
                });
            }
        }
        AgentSnapshot {
            id: a.id.clone(),
            tick: self.tick,
            t,
            position: nav.position,
            velocity: nav.velocity,
            heading: a.heading,
            bfsm_state: a.bfsm.state().clone(),
            xi: a.xi,
            line_of_sight: a.los,
            neck: a.neck,
            gait_phase: a.gait_phase,
            clips,
            pose,
            say: a.say.clone(),
            fault: a.fault.clone(),
        }
    }
}

fn wrap_angle(a: f64) -> f64 {
    crate::motion::wrap_degrees(a.to_degrees()).to_radians()
}
