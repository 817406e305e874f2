//! Subcommands of the `fva` binary.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fva_core::bfsm::{AgentProfile, ScenarioScript};
use fva_core::engine::{run_scenario_with, write_trace, ClipLibrary, CommandTrace, EngineConfig, RunError};
use fva_core::friendliness::{aggregate_ratings, read_ratings_csv, GaitMap};
use fva_core::motion::{parse_bvh_with_scale, ClipDocument, ClipKind, CM_TO_M};
use fva_core::nav::EnvironmentState;
use fva_core::stats::{cronbach_alpha, friedman, read_session_csv, session_to_matrix, t_test_independent, RatingMatrix};

use crate::server::{self, ServeConfig, TICK_HZ_VAR};
use crate::session::{preset, SessionConfig};

/// Exit code for a run that hit its tick limit.
pub const EXIT_TIMEOUT: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "fva", version, about = "Friendly virtual agent simulation tools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a BVH file to the JSON clip format.
    ParseBvh(ParseBvhArgs),
    /// Build a gait map from questionnaire ratings.
    Calibrate(CalibrateArgs),
    /// Run a scenario headless and write its trace.
    Run(RunArgs),
    /// Reliability and significance tests on rating tables.
    Stats(StatsArgs),
    /// Serve interactive sessions over a websocket.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct ParseBvhArgs {
    pub file: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Factor from file units to meters.
    #[arg(long, default_value_t = CM_TO_M)]
    pub scale: f64,
    #[arg(long, value_enum, default_value_t = KindArg::Gait)]
    pub kind: KindArg,
    /// Clip id; the file stem when omitted.
    #[arg(long)]
    pub id: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum KindArg {
    Gait,
    GestureHand,
    GestureHead,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub ratings: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario script JSON; the canonical script when omitted.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Environment JSON; the study room when omitted.
    #[arg(long)]
    pub env: Option<PathBuf>,
    /// `fva`, `default`, or a profile JSON file. Overrides the commands file.
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long)]
    pub commands: PathBuf,
    /// Overrides the seed recorded in the commands file.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    pub max_ticks: u64,
    /// Gait map JSON replacing the bundled one.
    #[arg(long)]
    pub gait_map: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub test: TestArg,
    /// Treat the input as exported session ratings and test every measure.
    #[arg(long)]
    pub session: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum)]
pub enum TestArg {
    Friedman,
    Alpha,
    Ttest,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub env: Option<PathBuf>,
    #[arg(long, default_value = "fva")]
    pub profile: String,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 20.0)]
    pub snapshot_hz: f64,
    /// Keep the replayable command log of the current session here.
    #[arg(long)]
    pub command_log: Option<PathBuf>,
}

/// Runs a parsed command line; returns the process exit code.
pub fn execute(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::ParseBvh(a) => parse_bvh_cmd(a).map(|_| 0),
        Command::Calibrate(a) => calibrate(a).map(|_| 0),
        Command::Run(a) => run(a),
        Command::Stats(a) => {
            let stdout = std::io::stdout();
            stats(a, &mut stdout.lock()).map(|_| 0)
        }
        Command::Serve(a) => serve(a).map(|_| 0),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn parse_bvh_cmd(a: ParseBvhArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.file).with_context(|| format!("reading {}", a.file.display()))?;
    let (_, mut clip) = parse_bvh_with_scale(&text, a.scale).with_context(|| format!("parsing {}", a.file.display()))?;
    clip.kind = match a.kind {
        KindArg::Gait => ClipKind::Gait,
        KindArg::GestureHand => ClipKind::GestureHand,
        KindArg::GestureHead => ClipKind::GestureHead,
    };
    clip.id = a
        .id
        .or_else(|| a.file.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "clip".into());
    write_json(&a.out, &ClipDocument::from(&clip))
}

fn calibrate(a: CalibrateArgs) -> Result<()> {
    let file = File::open(&a.ratings).with_context(|| format!("opening {}", a.ratings.display()))?;
    let records = read_ratings_csv(file)?;
    let map = aggregate_ratings(&records)?;
    write_json(&a.out, &map)
}

fn load_profile(spec: &str) -> Result<AgentProfile> {
    match preset(spec) {
        Some(p) => Ok(p),
        None => read_json(Path::new(spec)).with_context(|| format!("profile `{spec}` is neither a preset nor a file")),
    }
}

fn load_script(path: Option<&Path>) -> Result<ScenarioScript> {
    let script = match path {
        Some(p) => read_json(p)?,
        None => ScenarioScript::canonical(),
    };
    script.validate()?;
    Ok(script)
}

fn load_env(path: Option<&Path>) -> Result<EnvironmentState> {
    let env: EnvironmentState = match path {
        Some(p) => read_json(p)?,
        None => EnvironmentState::study_room(),
    };
    env.validate()?;
    Ok(env)
}

fn run(a: RunArgs) -> Result<u8> {
    let script = load_script(a.scenario.as_deref())?;
    let env = load_env(a.env.as_deref())?;
    let commands: CommandTrace = read_json(&a.commands)?;
    let profile = match (&a.profile, &commands.profile) {
        (Some(spec), _) => load_profile(spec)?,
        (None, Some(p)) => p.clone(),
        (None, None) => bail!("no --profile given and the commands file records none"),
    };
    let seed = a.seed.or(commands.seed).unwrap_or(0);
    let mut library = ClipLibrary::procedural();
    if let Some(path) = &a.gait_map {
        library = library.with_gait_map(read_json::<GaitMap>(path)?);
    }
    let result = run_scenario_with(
        &script,
        &[profile],
        env,
        &commands.commands,
        seed,
        a.max_ticks,
        Arc::new(library),
        EngineConfig::default(),
    );
    let (trace, code) = match result {
        Ok(t) => (t, 0),
        Err(RunError::Timeout { max_ticks, trace }) => {
            eprintln!("scenario did not finish within {max_ticks} ticks; partial trace written");
            (trace, EXIT_TIMEOUT)
        }
        Err(e) => return Err(e.into()),
    };
    let file = File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_trace(BufWriter::new(file), &trace)?;
    Ok(code)
}

/// Writes the requested test on the input table to `out`.
pub fn stats(a: StatsArgs, out: &mut dyn Write) -> Result<()> {
    let file = File::open(&a.input).with_context(|| format!("opening {}", a.input.display()))?;
    if a.session {
        let records = read_session_csv(file)?;
        for (measure, m) in session_to_matrix(&records, &BTreeMap::new())? {
            writeln!(out, "measure = {measure}")?;
            report(&m, a.test, out)?;
        }
        return Ok(());
    }
    report(&RatingMatrix::read_csv(file)?, a.test, out)
}

fn report(m: &RatingMatrix, test: TestArg, out: &mut dyn Write) -> Result<()> {
    match test {
        TestArg::Alpha => writeln!(out, "alpha = {}", cronbach_alpha(m)?)?,
        TestArg::Friedman => {
            let r = friedman(m)?;
            writeln!(out, "chi2 = {}\ndf = {}\np = {}", r.statistic, r.df, r.p_value)?;
        }
        TestArg::Ttest => {
            if m.cols() != 2 {
                return Err(anyhow!("ttest needs exactly two columns, found {}", m.cols()));
            }
            let a: Vec<f64> = m.column(0).collect();
            let b: Vec<f64> = m.column(1).collect();
            let r = t_test_independent(&a, &b)?;
            writeln!(out, "t = {}\ndf = {}\np = {}", r.statistic, r.df, r.p_value)?;
        }
    }
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let mut session = SessionConfig::study();
    session.script = load_script(a.scenario.as_deref())?;
    session.env = load_env(a.env.as_deref())?;
    session.profile = load_profile(&a.profile)?;
    session.seed = a.seed;
    let mut config = ServeConfig::new(session);
    config.snapshot_hz = a.snapshot_hz;
    config.command_log = a.command_log;
    if let Ok(v) = std::env::var(TICK_HZ_VAR) {
        config.tick_hz = v
            .parse::<f64>()
            .ok()
            .filter(|hz| *hz > 0.0)
            .ok_or_else(|| anyhow!("{TICK_HZ_VAR} must be a positive number, got `{v}`"))?;
    }
    let listener =
        TcpListener::bind((a.host.as_str(), a.port)).with_context(|| format!("binding {}:{}", a.host, a.port))?;
    let server = server::spawn(listener, config)?;
    eprintln!("listening on ws://{}", server.local_addr());
    server.wait();
    Ok(())
}
