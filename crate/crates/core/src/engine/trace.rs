use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AgentEvent, AgentSnapshot, ClipLibrary, EngineConfig, EngineError, LogEntry, World};
use crate::bfsm::{AgentProfile, BfsmEvent, ScenarioScript, TaskId};
use crate::nav::EnvironmentState;

/// One line of a trace file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum TraceRecord {
    Snapshot(AgentSnapshot),
    Event(LogEntry),
}

/// An event to inject at the boundary of `tick`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedEvent {
    pub tick: u64,
    #[serde(flatten)]
    pub event: AgentEvent,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CommandFile {
    List(Vec<TimedEvent>),
    Session {
        #[serde(default)]
        profile: Option<AgentProfile>,
        #[serde(default)]
        seed: Option<u64>,
        commands: Vec<TimedEvent>,
    },
}

/// Commands for a run, optionally with the profile and seed they were
/// recorded under. Reads either a bare list or the object form.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "CommandFile")]
pub struct CommandTrace {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<AgentProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub commands: Vec<TimedEvent>,
}

impl From<CommandFile> for CommandTrace {
    fn from(f: CommandFile) -> Self {
        match f {
            CommandFile::List(commands) => CommandTrace {
                commands,
                ..Default::default()
            },
            CommandFile::Session { profile, seed, commands } => CommandTrace { profile, seed, commands },
        }
    }
}

impl CommandTrace {
    /// Every task of `script` in order, one command every `spacing` ticks
    /// starting at `first`.
    pub fn scripted(script: &ScenarioScript, first: u64, spacing: u64) -> Self {
        let commands = script
            .tasks
            .iter()
            .enumerate()
            .map(|(k, t)| TimedEvent {
                tick: first + k as u64 * spacing,
                event: AgentEvent::broadcast(BfsmEvent::UserCommand { task: t.id.clone() }),
            })
            .collect();
        CommandTrace {
            commands,
            ..Default::default()
        }
    }

    pub fn is_sorted(&self) -> bool {
        self.commands.windows(2).all(|w| w[0].tick <= w[1].tick)
    }

    pub fn tasks(&self) -> impl Iterator<Item = &TaskId> {
        self.commands.iter().filter_map(|c| match &c.event.event {
            BfsmEvent::UserCommand { task } => Some(task),
            _ => None,
        })
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("scenario did not finish within {max_ticks} ticks")]
    Timeout { max_ticks: u64, trace: Vec<TraceRecord> },
    #[error("command trace is not sorted by tick")]
    UnsortedCommands,
    #[error(transparent)]
    Engine(#[from] EngineError),
}

pub fn run_scenario(
    script: &ScenarioScript,
    profiles: &[AgentProfile],
    env: EnvironmentState,
    commands: &[TimedEvent],
    seed: u64,
    max_ticks: u64,
) -> Result<Vec<TraceRecord>, RunError> {
    run_scenario_with(
        script,
        profiles,
        env,
        commands,
        seed,
        max_ticks,
        Arc::new(ClipLibrary::procedural()),
        EngineConfig::default(),
    )
}

/// Runs until every agent is done. The trace starts with the tick 0
/// snapshots; each tick then adds its log entries and the new snapshots.
#[allow(clippy::too_many_arguments)]
pub fn run_scenario_with(
    script: &ScenarioScript,
    profiles: &[AgentProfile],
    env: EnvironmentState,
    commands: &[TimedEvent],
    seed: u64,
    max_ticks: u64,
    library: Arc<ClipLibrary>,
    config: EngineConfig,
) -> Result<Vec<TraceRecord>, RunError> {
    if !commands.windows(2).all(|w| w[0].tick <= w[1].tick) {
        return Err(RunError::UnsortedCommands);
    }
    let mut world = World::new(script, profiles, env, library, config, seed)?;
    let mut trace: Vec<TraceRecord> = world.snapshot().into_iter().map(TraceRecord::Snapshot).collect();
    let mut next = 0;
    while !world.all_done() {
        if world.tick_count() >= max_ticks {
            return Err(RunError::Timeout { max_ticks, trace });
        }
        let now = world.tick_count();
        let start = next;
        while next < commands.len() && commands[next].tick <= now {
            next += 1;
        }
        let events: Vec<AgentEvent> = commands[start..next].iter().map(|c| c.event.clone()).collect();
        let log = world.tick(&events);
        trace.extend(log.into_iter().map(TraceRecord::Event));
        trace.extend(world.snapshot().into_iter().map(TraceRecord::Snapshot));
    }
    Ok(trace)
}

pub fn write_trace<W: Write>(mut out: W, trace: &[TraceRecord]) -> std::io::Result<()> {
    for r in trace {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_trace<R: BufRead>(input: R) -> Result<Vec<TraceRecord>, serde_json::Error> {
    input
        .lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| serde_json::from_str(&l.map_err(serde_json::Error::io)?))
        .collect()
}
