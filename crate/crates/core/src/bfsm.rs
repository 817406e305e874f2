//! Behavioral finite state machine driving the scripted task protocol.
//!
//! The machine is table driven by a [`ScenarioScript`]: the participant
//! commands a task, the agent acknowledges it, walks to the adjacent room,
//! performs the task for a fixed dwell, walks back and reports completion.
//! After the last task it says farewell.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::friendliness::{hand_gesture_mode, head_gesture_mode, Friendliness, HandGesture, HeadGesture};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub String);

impl TaskId {
    pub fn new(id: impl Into<String>) -> Self {
        TaskId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: TaskId,
    pub command: String,
    pub acceptance: String,
    pub completion: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioScript {
    pub tasks: Vec<TaskSpec>,
    #[serde(default = "default_dwell")]
    pub dwell_seconds: f64,
    /// Where tasks are performed.
    pub adjacent_room: [f64; 2],
    /// Where the agent stands to talk to the participant.
    pub station: [f64; 2],
    #[serde(default = "default_farewell")]
    pub farewell: String,
}

fn default_dwell() -> f64 {
    5.0
}

fn default_farewell() -> String {
    "Bye Bye".into()
}

const CANONICAL_TASKS: [(&str, &str, &str, &str); 7] = [
    (
        "A1",
        "Please check if anyone is in the adjacent room.",
        "Okay! I am checking if anyone is in the adjacent room right now.",
        "There are a few people in the adjacent room.",
    ),
    (
        "A2",
        "Please check if it is quiet enough to perform the experiment.",
        "Okay! I am checking if it is quiet enough to perform the experiment.",
        "It is quiet enough to perform the experiment.",
    ),
    (
        "A3",
        "Please check if the temperature is high enough to conduct the experiment.",
        "Okay! I am checking if the temperature is high enough to conduct the experiment.",
        "The temperature is high enough to conduct the experiment.",
    ),
    (
        "I1",
        "Please close the adjacent room's other entrance.",
        "Okay! I am closing the adjacent room's other entrance.",
        "I closed the adjacent room's other entrance.",
    ),
    (
        "I2",
        "Please tell someone that the experiment will end in 15 minutes.",
        "Okay! I am telling someone that the experiment will end in 15 minutes.",
        "I told someone that the experiment will end in 15 minutes.",
    ),
    (
        "I3",
        "Please tell someone that I am not feeling well.",
        "Okay! I am telling someone that you are not feeling well.",
        "I told someone that you are not feeling well.",
    ),
    (
        "I4",
        "Please turn off the audio and video recording in the adjacent room.",
        "Okay! I am turning off the audio and video recording in the adjacent room.",
        "I turned off the audio and video recording in the adjacent room.",
    ),
];

impl ScenarioScript {
    /// The seven awareness and influence tasks in their standard order, in
    /// the bundled room layout.
    pub fn canonical() -> Self {
        ScenarioScript {
            tasks: CANONICAL_TASKS
                .iter()
                .map(|&(id, command, acceptance, completion)| TaskSpec {
                    id: TaskId::new(id),
                    command: command.into(),
                    acceptance: acceptance.into(),
                    completion: completion.into(),
                })
                .collect(),
            dwell_seconds: default_dwell(),
            adjacent_room: [2.0, 5.6],
            station: [2.0, 2.2],
            farewell: default_farewell(),
        }
    }

    pub fn validate(&self) -> Result<(), BfsmError> {
        if self.tasks.is_empty() {
            return Err(BfsmError::EmptyScript);
        }
        if !(self.dwell_seconds > 0.0 && self.dwell_seconds.is_finite()) {
            return Err(BfsmError::BadDwell(self.dwell_seconds));
        }
        for (i, t) in self.tasks.iter().enumerate() {
            if self.tasks[..i].iter().any(|o| o.id == t.id) {
                return Err(BfsmError::DuplicateTask(t.id.clone()));
            }
        }
        Ok(())
    }

    pub fn task(&self, id: &TaskId) -> Option<&TaskSpec> {
        self.tasks.iter().find(|t| &t.id == id)
    }
}

/// Per-agent behavior settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub f_des: Friendliness,
    pub gestures_enabled: bool,
    pub gaze_enabled: bool,
    pub model_id: String,
    /// Forces a specific gait instead of the nearest-friendliness match.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gait_id: Option<String>,
}

impl AgentProfile {
    /// High-friendliness agent with gestures and eye contact.
    pub fn fva() -> Self {
        AgentProfile {
            f_des: Friendliness::new(0.97).expect("in range"),
            gestures_enabled: true,
            gaze_enabled: true,
            model_id: "John".into(),
            gait_id: None,
        }
    }

    /// Baseline agent: default gait, no gestures, no eye contact.
    pub fn default_agent() -> Self {
        AgentProfile {
            f_des: Friendliness::new(0.52).expect("in range"),
            gestures_enabled: false,
            gaze_enabled: false,
            model_id: "John".into(),
            gait_id: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BfsmStateId {
    Introduction,
    AwaitCommand,
    AcceptTask(TaskId),
    NavigateOut(TaskId),
    PerformTask(TaskId),
    NavigateBack(TaskId),
    CompleteTask(TaskId),
    Farewell,
    Done,
}

impl BfsmStateId {
    pub fn is_navigating(&self) -> bool {
        matches!(self, BfsmStateId::NavigateOut(_) | BfsmStateId::NavigateBack(_))
    }

    pub fn task(&self) -> Option<&TaskId> {
        match self {
            BfsmStateId::AcceptTask(t)
            | BfsmStateId::NavigateOut(t)
            | BfsmStateId::PerformTask(t)
            | BfsmStateId::NavigateBack(t)
            | BfsmStateId::CompleteTask(t) => Some(t),
            _ => None,
        }
    }

    /// Whether the agent is delivering a verbal response in this state.
    pub fn is_response(&self) -> bool {
        matches!(
            self,
            BfsmStateId::AcceptTask(_) | BfsmStateId::CompleteTask(_) | BfsmStateId::Farewell
        )
    }
}

impl fmt::Display for BfsmStateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BfsmStateId::Introduction => write!(f, "Introduction"),
            BfsmStateId::AwaitCommand => write!(f, "AwaitCommand"),
            BfsmStateId::AcceptTask(t) => write!(f, "AcceptTask({t})"),
            BfsmStateId::NavigateOut(t) => write!(f, "NavigateOut({t})"),
            BfsmStateId::PerformTask(t) => write!(f, "PerformTask({t})"),
            BfsmStateId::NavigateBack(t) => write!(f, "NavigateBack({t})"),
            BfsmStateId::CompleteTask(t) => write!(f, "CompleteTask({t})"),
            BfsmStateId::Farewell => write!(f, "Farewell"),
            BfsmStateId::Done => write!(f, "Done"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BfsmEvent {
    UserCommand { task: TaskId },
    ArrivedAtGoal,
    TimerElapsed,
    ResponseDelivered,
    SessionEnd,
}

impl fmt::Display for BfsmEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BfsmEvent::UserCommand { task } => write!(f, "UserCommand({task})"),
            BfsmEvent::ArrivedAtGoal => write!(f, "ArrivedAtGoal"),
            BfsmEvent::TimerElapsed => write!(f, "TimerElapsed"),
            BfsmEvent::ResponseDelivered => write!(f, "ResponseDelivered"),
            BfsmEvent::SessionEnd => write!(f, "SessionEnd"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GestureSelector {
    HeadNod,
    WaveOpen,
    WaveClosed,
}

impl GestureSelector {
    /// Id of the clip realizing this gesture in the clip store.
    pub fn clip_id(self) -> &'static str {
        match self {
            GestureSelector::HeadNod => "head_nod",
            GestureSelector::WaveOpen => "wave_open",
            GestureSelector::WaveClosed => "wave_closed",
        }
    }

    pub fn is_hand(self) -> bool {
        !matches!(self, GestureSelector::HeadNod)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseKind {
    Acceptance,
    Completion,
    Farewell,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub kind: ResponseKind,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BfsmOutput {
    pub state: BfsmStateId,
    pub goal: Option<[f64; 2]>,
    pub gesture_request: Option<GestureSelector>,
    pub gaze_bfsm: bool,
    pub say: Option<Utterance>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BfsmError {
    #[error("scenario script has no tasks")]
    EmptyScript,
    #[error("dwell time must be positive, got {0}")]
    BadDwell(f64),
    #[error("task {0} appears more than once in the script")]
    DuplicateTask(TaskId),
    #[error("event {event} is not valid in state {state}")]
    StateMismatch { state: BfsmStateId, event: BfsmEvent },
    #[error("task {0} is not in the script")]
    UnknownTask(TaskId),
    #[error("task {0} was already performed")]
    TaskAlreadyDone(TaskId),
}

/// Gesture triggered on entering `state`, if any.
pub fn gesture_for_state(state: &BfsmStateId, profile: &AgentProfile) -> Option<GestureSelector> {
    if !profile.gestures_enabled {
        return None;
    }
    match state {
        BfsmStateId::Farewell => match hand_gesture_mode(profile.f_des) {
            HandGesture::Open => Some(GestureSelector::WaveOpen),
            HandGesture::Closed => Some(GestureSelector::WaveClosed),
            HandGesture::Absent => None,
        },
        BfsmStateId::CompleteTask(_) => {
            (head_gesture_mode(profile.f_des) == HeadGesture::Present).then_some(GestureSelector::HeadNod)
        }
        _ => None,
    }
}

/// Whether the state permits eye contact. It is withheld while walking
/// away, performing a task facing away, and after the session ends.
pub fn gaze_for_state(state: &BfsmStateId) -> bool {
    match state {
        BfsmStateId::Introduction
        | BfsmStateId::AwaitCommand
        | BfsmStateId::AcceptTask(_)
        | BfsmStateId::CompleteTask(_)
        | BfsmStateId::Farewell => true,
        BfsmStateId::NavigateOut(_)
        | BfsmStateId::PerformTask(_)
        | BfsmStateId::NavigateBack(_)
        | BfsmStateId::Done => false,
    }
}

/// Eye contact is maintained only when friendliness calls for it, the
/// behavioral state allows it, and the profile has gaze enabled.
pub fn combine_gaze(from_friendliness: bool, from_state: bool, gaze_enabled: bool) -> bool {
    from_friendliness && from_state && gaze_enabled
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bfsm {
    script: ScenarioScript,
    profile: AgentProfile,
    state: BfsmStateId,
    done: Vec<bool>,
    entered_at: f64,
}

impl Bfsm {
    pub fn new(script: ScenarioScript, profile: AgentProfile) -> Result<Self, BfsmError> {
        script.validate()?;
        let done = vec![false; script.tasks.len()];
        Ok(Bfsm {
            script,
            profile,
            state: BfsmStateId::Introduction,
            done,
            entered_at: 0.0,
        })
    }

    pub fn state(&self) -> &BfsmStateId {
        &self.state
    }

    pub fn script(&self) -> &ScenarioScript {
        &self.script
    }

    pub fn profile(&self) -> &AgentProfile {
        &self.profile
    }

    /// Simulation time at which the current state was entered.
    pub fn entered_at(&self) -> f64 {
        self.entered_at
    }

    /// First task in script order that has not been performed yet.
    pub fn next_task(&self) -> Option<&TaskId> {
        self.script
            .tasks
            .iter()
            .zip(&self.done)
            .find(|(_, &d)| !d)
            .map(|(t, _)| &t.id)
    }

    pub fn completed_tasks(&self) -> usize {
        self.done.iter().filter(|&&d| d).count()
    }

    fn goal_for(&self, state: &BfsmStateId) -> Option<[f64; 2]> {
        match state {
            BfsmStateId::NavigateOut(_) => Some(self.script.adjacent_room),
            BfsmStateId::NavigateBack(_) => Some(self.script.station),
            _ => None,
        }
    }

    /// Steady-state output for the current state (no entry actions).
    pub fn output(&self) -> BfsmOutput {
        BfsmOutput {
            state: self.state.clone(),
            goal: self.goal_for(&self.state),
            gesture_request: None,
            gaze_bfsm: gaze_for_state(&self.state),
            say: None,
        }
    }

    fn task_index(&self, task: &TaskId) -> Result<usize, BfsmError> {
        self.script
            .tasks
            .iter()
            .position(|t| &t.id == task)
            .ok_or_else(|| BfsmError::UnknownTask(task.clone()))
    }

    fn transition(&self, event: &BfsmEvent) -> Result<BfsmStateId, BfsmError> {
        use BfsmEvent as E;
        use BfsmStateId as S;
        let next = match (&self.state, event) {
            (S::Done, _) => None,
            (_, E::SessionEnd) => Some(S::Done),
            (S::Introduction | S::AwaitCommand, E::UserCommand { task }) => {
                let i = self.task_index(task)?;
                if self.done[i] {
                    return Err(BfsmError::TaskAlreadyDone(task.clone()));
                }
                Some(S::AcceptTask(task.clone()))
            }
            (S::AcceptTask(t), E::ResponseDelivered) => Some(S::NavigateOut(t.clone())),
            (S::NavigateOut(t), E::ArrivedAtGoal) => Some(S::PerformTask(t.clone())),
            (S::PerformTask(t), E::TimerElapsed) => Some(S::NavigateBack(t.clone())),
            (S::NavigateBack(t), E::ArrivedAtGoal) => Some(S::CompleteTask(t.clone())),
            (S::CompleteTask(_), E::ResponseDelivered) => {
                if self.done.iter().all(|&d| d) {
                    Some(S::Farewell)
                } else {
                    Some(S::AwaitCommand)
                }
            }
            (S::Farewell, E::ResponseDelivered) => Some(S::Done),
            _ => None,
        };
        next.ok_or_else(|| BfsmError::StateMismatch {
            state: self.state.clone(),
            event: event.clone(),
        })
    }

    /// Applies `event` at time `t`. Invalid events leave the machine unchanged.
    pub fn step(&mut self, event: &BfsmEvent, t: f64) -> Result<BfsmOutput, BfsmError> {
        let next = self.transition(event)?;
        if let BfsmStateId::CompleteTask(task) = &next {
            let i = self.task_index(task)?;
            self.done[i] = true;
        }
        self.state = next;
        self.entered_at = t;
        let say = match &self.state {
            BfsmStateId::AcceptTask(task) => self.script.task(task).map(|s| Utterance {
                kind: ResponseKind::Acceptance,
                text: s.acceptance.clone(),
            }),
            BfsmStateId::CompleteTask(task) => self.script.task(task).map(|s| Utterance {
                kind: ResponseKind::Completion,
                text: s.completion.clone(),
            }),
            BfsmStateId::Farewell => Some(Utterance {
                kind: ResponseKind::Farewell,
                text: self.script.farewell.clone(),
            }),
            _ => None,
        };
        Ok(BfsmOutput {
            gesture_request: gesture_for_state(&self.state, &self.profile),
            say,
            ..self.output()
        })
    }
}
