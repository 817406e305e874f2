use std::sync::Arc;

use fva_core::bfsm::*;
use fva_core::engine::*;
use fva_core::nav::{AgentState, EnvironmentState, UserState};

fn open_env(agents: Vec<AgentState>) -> EnvironmentState {
    EnvironmentState {
        obstacles: vec![],
        agents,
        user: Some(UserState {
            position: [0.0, -3.0],
            radius: 0.3,
            eye_height: 1.2,
        }),
    }
}

fn script_with(goal: [f64; 2], station: [f64; 2]) -> ScenarioScript {
    ScenarioScript {
        adjacent_room: goal,
        station,
        ..ScenarioScript::canonical()
    }
}

fn world(script: &ScenarioScript, profile: AgentProfile, env: EnvironmentState) -> World {
    World::new(
        script,
        &[profile],
        env,
        Arc::new(ClipLibrary::procedural()),
        EngineConfig::default(),
        7,
    )
    .unwrap()
}

fn command(task: &str) -> AgentEvent {
    AgentEvent::broadcast(BfsmEvent::UserCommand { task: TaskId::new(task) })
}

fn transitions(log: &[LogEntry]) -> Vec<(u64, BfsmStateId)> {
    log.iter()
        .filter_map(|e| match &e.kind {
            LogKind::Transition { to, .. } => Some((e.tick, to.clone())),
            _ => None,
        })
        .collect()
}

#[test]
fn stationary_agent_is_a_fixed_point() {
    let env = open_env(vec![AgentState::new("a", [0.0, 0.0], 0.3, 1.0, 1.5)]);
    let mut w = world(&ScenarioScript::canonical(), AgentProfile::fva(), env);
    let before = w.snapshot();
    assert_eq!(before[0].tick, 0);
    let log = w.tick(&[]);
    assert!(log.is_empty());
    let after = w.snapshot();
    assert_eq!(after[0].tick, 1);
    assert_eq!(after[0].position, before[0].position);
    assert_eq!(after[0].gait_phase, before[0].gait_phase);
}

#[test]
fn walks_two_meters_within_kinematic_bound() {
    let env = open_env(vec![AgentState::new("a", [0.0, 0.0], 0.3, 1.0, 1.5)]);
    let script = script_with([2.0, 0.0], [0.0, 0.0]);
    let mut w = world(&script, AgentProfile::fva(), env);
    let mut log = w.tick(&[command("A1")]);
    while w.tick_count() < 2000 && !matches!(w.state_of(0), BfsmStateId::PerformTask(_)) {
        log.extend(w.tick(&[]));
    }
    let t = transitions(&log);
    let start = t.iter().find(|(_, s)| matches!(s, BfsmStateId::NavigateOut(_))).unwrap().0;
    let end = t.iter().find(|(_, s)| matches!(s, BfsmStateId::PerformTask(_))).unwrap().0;
    let bound = (2.0 / DEFAULT_DT).ceil() as u64 + 10;
    assert!(end - start <= bound, "took {} ticks, bound {bound}", end - start);
}

#[test]
fn crossing_agents_never_collide() {
    let agents = vec![
        AgentState::new("a", [-2.0, 0.0], 0.3, 1.0, 1.5),
        AgentState::new("b", [0.0, -2.0], 0.3, 1.0, 1.5),
    ];
    let env = EnvironmentState {
        user: None,
        ..open_env(agents)
    };
    // both walk to the same "room" along crossing lines, then back
    let script = script_with([0.0, 0.0], [0.0, 0.0]);
    let mut w = world(&script, AgentProfile::fva(), env);
    let mut positions = Vec::new();
    w.tick(&[command("A1")]);
    for _ in 0..1500 {
        w.tick(&[]);
        let s = w.snapshot();
        positions.push((s[0].position, s[1].position));
    }
    let collisions = positions
        .iter()
        .filter(|(a, b)| (a[0] - b[0]).hypot(a[1] - b[1]) < 0.6 - 1e-6)
        .count();
    assert_eq!(collisions, 0);
}

#[test]
fn empty_command_trace_times_out() {
    let err = run_scenario(
        &ScenarioScript::canonical(),
        &[AgentProfile::fva()],
        EnvironmentState::study_room(),
        &[],
        1,
        120,
    )
    .unwrap_err();
    let RunError::Timeout { max_ticks, trace } = err else { panic!("expected timeout") };
    assert_eq!(max_ticks, 120);
    let last = trace.iter().rev().find_map(|r| match r {
        TraceRecord::Snapshot(s) => Some(s),
        _ => None,
    });
    let last = last.unwrap();
    assert_eq!(last.tick, 120);
    assert_eq!(last.bfsm_state, BfsmStateId::Introduction);
}

#[test]
fn invalid_event_is_logged_and_ignored() {
    let mut w = world(&ScenarioScript::canonical(), AgentProfile::fva(), EnvironmentState::study_room());
    let log = w.tick(&[AgentEvent::broadcast(BfsmEvent::ArrivedAtGoal)]);
    assert!(matches!(log[0].kind, LogKind::Rejected { .. }));
    assert_eq!(w.state_of(0), &BfsmStateId::Introduction);
    let log = w.tick(&[command("Z9")]);
    assert!(matches!(log[0].kind, LogKind::Rejected { .. }));
}

#[test]
fn gaze_follows_state_and_profile() {
    let script = ScenarioScript::canonical();
    let cmds = CommandTrace::scripted(&script, 10, 1500);
    let trace = run_scenario(&script, &[AgentProfile::fva()], EnvironmentState::study_room(), &cmds.commands[..1], 3, 1400)
        .unwrap_err();
    let RunError::Timeout { trace, .. } = trace else { panic!() };
    let mut tracked = 0;
    for r in &trace {
        if let TraceRecord::Snapshot(s) = r {
            let away = matches!(
                s.bfsm_state,
                BfsmStateId::NavigateOut(_) | BfsmStateId::NavigateBack(_) | BfsmStateId::PerformTask(_)
            );
            if away {
                assert!(!s.xi, "xi set in {:?}", s.bfsm_state);
            } else {
                assert!(s.xi);
                tracked += 1;
            }
        }
    }
    assert!(tracked > 100);
}

#[test]
fn stationary_gait_is_stance_frame() {
    let env = open_env(vec![AgentState::new("a", [0.0, 0.0], 0.3, 1.0, 1.5)]);
    let mut w = world(&ScenarioScript::canonical(), AgentProfile::default_agent(), env);
    for _ in 0..5 {
        w.tick(&[]);
    }
    let s = &w.snapshot()[0];
    assert_eq!(s.clips[0].weight, 0.0);
    let lib = ClipLibrary::procedural();
    let stance = fva_core::motion::forward_kinematics(w.skeleton(), &lib.gait(&s.clips[0].id).unwrap().frames()[0]);
    // hips sit directly above the agent position at standing height
    assert!((s.pose[0][2] - stance.positions[0][2]).abs() < 1e-12);
    assert!((s.pose[0][0] - s.position[0]).abs() < 1e-12);
}

#[test]
fn replayed_ticks_reproduce_recorded_snapshots() {
    let script = ScenarioScript::canonical();
    let cmds = CommandTrace::scripted(&script, 5, 1500);
    let recorded = match run_scenario(&script, &[AgentProfile::fva()], EnvironmentState::study_room(), &cmds.commands, 11, 600) {
        Err(RunError::Timeout { trace, .. }) => trace,
        other => panic!("{other:?}"),
    };
    let mut w = World::new(
        &script,
        &[AgentProfile::fva()],
        EnvironmentState::study_room(),
        Arc::new(ClipLibrary::procedural()),
        EngineConfig::default(),
        11,
    )
    .unwrap();
    let snaps: Vec<&AgentSnapshot> = recorded
        .iter()
        .filter_map(|r| match r {
            TraceRecord::Snapshot(s) => Some(s),
            _ => None,
        })
        .collect();
    assert_eq!(&w.snapshot()[0], snaps[0]);
    for k in 0..300u64 {
        let ev: Vec<AgentEvent> = cmds.commands.iter().filter(|c| c.tick == k).map(|c| c.event.clone()).collect();
        w.tick(&ev);
        assert_eq!(&w.snapshot()[0], snaps[k as usize + 1]);
    }
}

#[test]
fn trace_round_trips_through_jsonl() {
    let script = ScenarioScript::canonical();
    let cmds = CommandTrace::scripted(&script, 5, 1500);
    let trace = match run_scenario(&script, &[AgentProfile::fva()], EnvironmentState::study_room(), &cmds.commands, 5, 200) {
        Err(RunError::Timeout { trace, .. }) => trace,
        other => panic!("{other:?}"),
    };
    let mut buf = Vec::new();
    write_trace(&mut buf, &trace).unwrap();
    let back = read_trace(&buf[..]).unwrap();
    assert_eq!(back, trace);
    let mut again = Vec::new();
    write_trace(&mut again, &back).unwrap();
    assert_eq!(buf, again);
}

#[test]
fn command_file_forms() {
    let list = r#"[{"tick": 3, "event": {"type": "user_command", "task": "A1"}}]"#;
    let t: CommandTrace = serde_json::from_str(list).unwrap();
    assert_eq!(t.commands[0].tick, 3);
    assert!(t.profile.is_none());
    let obj = serde_json::to_string(&CommandTrace {
        profile: Some(AgentProfile::fva()),
        seed: Some(9),
        commands: t.commands.clone(),
    })
    .unwrap();
    let back: CommandTrace = serde_json::from_str(&obj).unwrap();
    assert_eq!(back.seed, Some(9));
    assert_eq!(back.commands, t.commands);
}

#[test]
fn profile_count_must_match() {
    let env = open_env(vec![
        AgentState::new("a", [0.0, 0.0], 0.3, 1.0, 1.5),
        AgentState::new("b", [1.0, 0.0], 0.3, 1.0, 1.5),
        AgentState::new("c", [2.0, 0.0], 0.3, 1.0, 1.5),
    ]);
    let r = World::new(
        &ScenarioScript::canonical(),
        &[AgentProfile::fva(), AgentProfile::fva()],
        env,
        Arc::new(ClipLibrary::procedural()),
        EngineConfig::default(),
        0,
    );
    assert!(matches!(r, Err(EngineError::ProfileCount { profiles: 2, agents: 3 })));
}
