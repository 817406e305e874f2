//! One interactive session: the engine plus the ratings collected while it
//! runs. Independent of any transport so it can be driven from tests.

use std::sync::Arc;

use fva_core::bfsm::{AgentProfile, BfsmEvent, BfsmStateId, ScenarioScript, TaskId};
use fva_core::engine::{
    AgentEvent, ClipLibrary, CommandTrace, EngineConfig, EngineError, LogEntry, LogKind, TimedEvent,
    TraceRecord, World,
};
use fva_core::friendliness::Friendliness;
use fva_core::nav::EnvironmentState;
use fva_core::stats::{write_session_csv, SessionRecord};

use crate::protocol::{
    decode_envelope, ClientMessage, Configure, ErrorCode, EventFrame, Refusal, ServerMessage, SessionSummary,
};

/// Measure name under which per-task confidence ratings are stored.
pub const CONFIDENCE: &str = "confidence";

#[derive(Clone, Debug)]
pub struct SessionConfig {
    pub script: ScenarioScript,
    pub env: EnvironmentState,
    pub library: Arc<ClipLibrary>,
    pub engine: EngineConfig,
    pub seed: u64,
    pub profile: AgentProfile,
    pub participant: String,
}

impl SessionConfig {
    /// The study room and canonical script with the high-friendliness agent.
    pub fn study() -> Self {
        SessionConfig {
            script: ScenarioScript::canonical(),
            env: EnvironmentState::study_room(),
            library: Arc::new(ClipLibrary::procedural()),
            engine: EngineConfig::default(),
            seed: 42,
            profile: AgentProfile::fva(),
            participant: "P1".into(),
        }
    }
}

pub fn preset(name: &str) -> Option<AgentProfile> {
    match name {
        "fva" => Some(AgentProfile::fva()),
        "default" => Some(AgentProfile::default_agent()),
        _ => None,
    }
}

/// Condition label used in exported ratings.
pub fn condition_label(profile: &AgentProfile) -> String {
    if *profile == AgentProfile::fva() {
        "fva".into()
    } else if *profile == AgentProfile::default_agent() {
        "default".into()
    } else {
        format!("f{:.2}", profile.f_des.value())
    }
}

pub struct Session {
    config: SessionConfig,
    profile: AgentProfile,
    participant: String,
    condition: String,
    world: World,
    pending: Vec<AgentEvent>,
    commands: Vec<TimedEvent>,
    records: Vec<SessionRecord>,
    last_seq: Option<u64>,
    finished: bool,
    trace: Option<Vec<TraceRecord>>,
}

impl Session {
    pub fn new(config: SessionConfig) -> Result<Self, EngineError> {
        let world = build_world(&config, &config.profile)?;
        Ok(Session {
            profile: config.profile.clone(),
            participant: config.participant.clone(),
            condition: condition_label(&config.profile),
            world,
            config,
            pending: Vec::new(),
            commands: Vec::new(),
            records: Vec::new(),
            last_seq: None,
            finished: false,
            trace: None,
        })
    }

    /// Keeps the full engine trace from now on, restarting it on every
    /// reset or configure.
    pub fn record_trace(&mut self) {
        self.trace = Some(self.initial_trace());
    }

    pub fn trace(&self) -> Option<&[TraceRecord]> {
        self.trace.as_deref()
    }

    pub fn tick(&self) -> u64 {
        self.world.tick_count()
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn profile(&self) -> &AgentProfile {
        &self.profile
    }

    pub fn records(&self) -> &[SessionRecord] {
        &self.records
    }

    /// Commands applied since the last reset, with the profile and seed
    /// needed to replay them.
    pub fn command_trace(&self) -> CommandTrace {
        CommandTrace {
            profile: Some(self.profile.clone()),
            seed: Some(self.config.seed),
            commands: self.commands.clone(),
        }
    }

    pub fn is_done(&self) -> bool {
        self.world.all_done()
    }

    pub fn state(&self) -> ServerMessage {
        ServerMessage::State {
            tick: self.world.tick_count(),
            agents: self.world.snapshot(),
        }
    }

    pub fn summary(&self) -> ServerMessage {
        ServerMessage::SessionSummary(SessionSummary {
            records: self.records.clone(),
            csv: write_session_csv(&self.records),
        })
    }

    /// Handles one raw text frame. Refused frames produce a single error
    /// frame and leave the session untouched.
    pub fn handle_text(&mut self, text: &str) -> Vec<ServerMessage> {
        let result = decode_envelope(text).and_then(|env| {
            if self.last_seq.is_some_and(|s| env.seq <= s) {
                return Err(Refusal::new(
                    ErrorCode::BadSeq,
                    format!("seq {} does not follow {}", env.seq, self.last_seq.unwrap_or(0)),
                ));
            }
            self.last_seq = Some(env.seq);
            let msg = ClientMessage::try_from(&env)?;
            self.handle(msg)
        });
        result.unwrap_or_else(|r| vec![ServerMessage::error(r)])
    }

    pub fn handle(&mut self, msg: ClientMessage) -> Result<Vec<ServerMessage>, Refusal> {
        match msg {
            ClientMessage::Configure(c) => self.configure(c),
            ClientMessage::Reset => {
                self.restart(self.profile.clone())?;
                Ok(vec![self.state()])
            }
            ClientMessage::Command(c) => {
                self.pending
                    .push(AgentEvent::broadcast(BfsmEvent::UserCommand { task: TaskId::new(c.task) }));
                Ok(vec![])
            }
            ClientMessage::Rating(r) => {
                if !(1..=7).contains(&r.confidence) {
                    return Err(Refusal::new(
                        ErrorCode::InvalidPayload,
                        format!("confidence {} is outside 1..7", r.confidence),
                    ));
                }
                if self.config.script.task(&TaskId::new(r.task.as_str())).is_none() {
                    return Err(Refusal::new(ErrorCode::InvalidPayload, format!("unknown task `{}`", r.task)));
                }
                self.store(CONFIDENCE.into(), r.task, f64::from(r.confidence));
                Ok(self.finished.then(|| self.summary()).into_iter().collect())
            }
            ClientMessage::Questionnaire(q) => {
                if !(1.0..=7.0).contains(&q.score) {
                    return Err(Refusal::new(
                        ErrorCode::InvalidPayload,
                        format!("score {} is outside 1..7", q.score),
                    ));
                }
                if q.measure.is_empty() || q.item.is_empty() {
                    return Err(Refusal::new(ErrorCode::InvalidPayload, "measure and item must be named"));
                }
                self.store(q.measure, q.item, q.score);
                Ok(self.finished.then(|| self.summary()).into_iter().collect())
            }
        }
    }

    /// Advances the engine one tick, applying queued commands first.
    pub fn step(&mut self) -> Vec<ServerMessage> {
        let now = self.world.tick_count();
        let events = std::mem::take(&mut self.pending);
        self.commands.extend(events.iter().map(|e| TimedEvent {
            tick: now,
            event: e.clone(),
        }));
        let log = self.world.tick(&events);
        let mut out: Vec<ServerMessage> = log.iter().map(frame_for).collect();
        if let Some(trace) = &mut self.trace {
            trace.extend(log.into_iter().map(TraceRecord::Event));
            trace.extend(self.world.snapshot().into_iter().map(TraceRecord::Snapshot));
        }
        if !self.finished && self.world.all_done() {
            self.finished = true;
            out.push(self.summary());
        }
        out
    }

    fn configure(&mut self, c: Configure) -> Result<Vec<ServerMessage>, Refusal> {
        let invalid = |m: String| Refusal::new(ErrorCode::InvalidPayload, m);
        let mut profile = match &c.preset {
            Some(name) => preset(name).ok_or_else(|| invalid(format!("unknown preset `{name}`")))?,
            None => self.profile.clone(),
        };
        if let Some(f) = c.f_des {
            profile.f_des = Friendliness::new(f).map_err(|e| invalid(e.to_string()))?;
        }
        if let Some(v) = c.gestures_enabled {
            profile.gestures_enabled = v;
        }
        if let Some(v) = c.gaze_enabled {
            profile.gaze_enabled = v;
        }
        if let Some(v) = c.model_id {
            profile.model_id = v;
        }
        if c.gait_id.is_some() {
            profile.gait_id = c.gait_id.filter(|g| !g.is_empty());
        }
        self.restart(profile)?;
        self.condition = c.condition.unwrap_or_else(|| condition_label(&self.profile));
        if let Some(p) = c.participant {
            self.participant = p;
        }
        Ok(vec![self.state()])
    }

    fn restart(&mut self, profile: AgentProfile) -> Result<(), Refusal> {
        let world =
            build_world(&self.config, &profile).map_err(|e| Refusal::new(ErrorCode::InvalidPayload, e.to_string()))?;
        self.world = world;
        self.profile = profile;
        self.pending.clear();
        self.commands.clear();
        self.finished = false;
        if self.trace.is_some() {
            self.trace = Some(self.initial_trace());
        }
        Ok(())
    }

    fn store(&mut self, measure: String, item: String, score: f64) {
        let (participant, condition) = (self.participant.clone(), self.condition.clone());
        self.records.retain(|r| {
            !(r.participant == participant && r.condition == condition && r.measure == measure && r.item == item)
        });
        self.records.push(SessionRecord {
            participant,
            condition,
            measure,
            item,
            score,
        });
    }

    fn initial_trace(&self) -> Vec<TraceRecord> {
        self.world.snapshot().into_iter().map(TraceRecord::Snapshot).collect()
    }

    /// Whether the agent can take a new command now.
    pub fn awaiting_command(&self) -> bool {
        matches!(
            self.world.state_of(0),
            BfsmStateId::Introduction | BfsmStateId::AwaitCommand
        )
    }
}

fn build_world(config: &SessionConfig, profile: &AgentProfile) -> Result<World, EngineError> {
    World::new(
        &config.script,
        std::slice::from_ref(profile),
        config.env.clone(),
        config.library.clone(),
        config.engine.clone(),
        config.seed,
    )
}

fn frame_for(entry: &LogEntry) -> ServerMessage {
    let event = |name: &str, detail: String| {
        ServerMessage::Event(EventFrame {
            name: name.into(),
            tick: entry.tick,
            agent: entry.agent.clone(),
            detail,
        })
    };
    match &entry.kind {
        LogKind::Response { response, text } => ServerMessage::Response {
            kind: *response,
            text: text.clone(),
            tick: entry.tick,
        },
        LogKind::Transition { to, .. } => event("transition", to.to_string()),
        LogKind::Gesture { clip } => event("gesture", clip.clone()),
        LogKind::Rejected { event: e, reason, .. } => event("rejected", format!("{e}: {reason}")),
        LogKind::Fault { message } => event("fault", message.clone()),
    }
}
