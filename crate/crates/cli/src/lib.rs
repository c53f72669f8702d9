//! Command-line front end: argument parsing, command dispatch and the
//! exit-code contract.
//!
//! | code | meaning                         |
//! |------|---------------------------------|
//! | 0    | success, all verifications pass |
//! | 1    | a verification failed           |
//! | 2    | usage error                     |
//! | 3    | I/O failure                     |
//! | 4    | toppling budget exhausted       |

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use sandpile::engine::{replay_schedule, staged_square_schedule, DEFAULT_BUDGET};
use sandpile::experiments::{
    abelian_check, default_epsilon, fit_power_law, lemma1_check, lemma2_check, lemma2_stage_check,
    log_spaced, monotonicity_check, random_bumped_pair, random_config, run_point_source,
    stabilize_point_source, sweep, sweep_records, theorem1_square_check, theorem2_bounds_check,
    theorem2_stages, SweepRecord, ALPHA_WINDOW,
};
use sandpile::geometry::{largest_diamond, match_square, radius, toppled_cluster};
use sandpile::io::{emit_odometer_csv, emit_pgm, pgm_bytes};
use sandpile::{make_point_source, make_square_config, SandpileError, Strategy};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Stabilize,
    Sweep,
    Verify(Suite),
    Replay,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Abelian,
    Monotonic,
    Lemma1,
    Lemma2,
    #[value(name = "lemma2-stages")]
    Lemma2Stages,
    #[value(name = "theorem1-square")]
    Theorem1Square,
    Theorem2,
    #[value(name = "theorem2-stages")]
    Theorem2Stages,
    Scaling,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::Abelian,
        Suite::Monotonic,
        Suite::Lemma1,
        Suite::Lemma2,
        Suite::Lemma2Stages,
        Suite::Theorem1Square,
        Suite::Theorem2,
        Suite::Theorem2Stages,
        Suite::Scaling,
    ];
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = self.to_possible_value().expect("no skipped variants");
        f.write_str(name.get_name())
    }
}

/// A fully defaulted, validated invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub command: Command,
    /// Particle counts; empty means the command's own default list.
    pub n: Vec<u64>,
    pub ground: u64,
    pub dim: usize,
    pub strategy: Strategy,
    pub budget: u64,
    pub seed: u64,
    /// `None` picks 0.1, or 0.05 from n = 10^6.
    pub epsilon: Option<f64>,
    pub rmax: u64,
    pub r1: u64,
    pub r2: u64,
    pub trials: usize,
    pub out: Option<PathBuf>,
    pub odometer: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

impl RunSpec {
    pub fn new(command: Command) -> Self {
        RunSpec {
            command,
            n: Vec::new(),
            ground: 2,
            dim: 2,
            strategy: Strategy::BulkFifo,
            budget: DEFAULT_BUDGET,
            seed: 0,
            epsilon: None,
            rmax: 10,
            r1: 2,
            r2: 4,
            trials: 5,
            out: None,
            odometer: None,
            csv: None,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "sandpile",
    about = "Abelian sandpile stabilizer and verification harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Stabilize one point source.
    Stabilize(Common),
    /// Stabilize a list of point sources and fit r ~ c n^alpha.
    Sweep(Common),
    /// Run a verification suite.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        #[command(flatten)]
        common: Common,
    },
    /// Replay the staged square schedule for radii r1 <= r2.
    Replay(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Particle counts, comma separated; accepts 1e5 notation.
    #[arg(long = "n", visible_alias = "n-list", value_delimiter = ',', value_parser = parse_count)]
    n: Vec<u64>,
    #[arg(long, default_value_t = 2)]
    ground: u64,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..=8))]
    dim: u64,
    /// fifo, lifo, random[:seed], bulk-fifo, tiled-parallel[:side]
    #[arg(long, default_value = "bulk-fifo", value_parser = parse_strategy)]
    strategy: Strategy,
    #[arg(long, default_value_t = DEFAULT_BUDGET, value_parser = parse_count)]
    budget: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_parser = parse_epsilon)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 10)]
    rmax: u64,
    #[arg(long, default_value_t = 2)]
    r1: u64,
    #[arg(long, default_value_t = 4)]
    r2: u64,
    #[arg(long, default_value_t = 5)]
    trials: usize,
    /// PGM render of the final configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Odometer CSV.
    #[arg(long)]
    odometer: Option<PathBuf>,
    /// Sweep or record CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// Non-negative integer, also in `1e6` or `2.5e3` notation.
pub fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let v: f64 = s.parse().map_err(|_| format!("not a count: {s:?}"))?;
    if !v.is_finite() || v < 0.0 || v.fract() != 0.0 || v > u64::MAX as f64 {
        return Err(format!("not a non-negative integer: {s:?}"));
    }
    Ok(v as u64)
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    let strategy = Strategy::from_str(s).map_err(|e| e.to_string())?;
    if let Strategy::TiledParallel { tile_side } = strategy {
        if tile_side < 2 {
            return Err("tile side must be at least 2".into());
        }
    }
    Ok(strategy)
}

fn parse_epsilon(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("not a number: {s:?}"))?;
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("epsilon must be finite and non-negative, got {s}"))
    }
}

/// Parses arguments (without the program name).
pub fn parse_args<I, S>(args: I) -> Result<RunSpec, clap::Error>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let argv = std::iter::once(std::ffi::OsString::from("sandpile"))
        .chain(args.into_iter().map(Into::into));
    let cli = Cli::try_parse_from(argv)?;
    let (command, common) = match cli.command {
        Cmd::Stabilize(c) => (Command::Stabilize, c),
        Cmd::Sweep(c) => (Command::Sweep, c),
        Cmd::Verify { suite, common } => (Command::Verify(suite), common),
        Cmd::Replay(c) => (Command::Replay, c),
    };
    Ok(RunSpec {
        command,
        n: common.n,
        ground: common.ground,
        dim: common.dim as usize,
        strategy: common.strategy,
        budget: common.budget,
        seed: common.seed,
        epsilon: common.epsilon,
        rmax: common.rmax,
        r1: common.r1,
        r2: common.r2,
        trials: common.trials,
        out: common.out,
        odometer: common.odometer,
        csv: common.csv,
    })
}

/// Textual form of a spec; `parse_args(render(spec)) == spec`.
pub fn render(spec: &RunSpec) -> Vec<String> {
    let mut args = Vec::new();
    match spec.command {
        Command::Stabilize => args.push("stabilize".to_string()),
        Command::Sweep => args.push("sweep".to_string()),
        Command::Verify(suite) => {
            args.push("verify".to_string());
            args.push(format!("--suite={suite}"));
        }
        Command::Replay => args.push("replay".to_string()),
    }
    if !spec.n.is_empty() {
        let list: Vec<String> = spec.n.iter().map(u64::to_string).collect();
        args.push(format!("--n={}", list.join(",")));
    }
    args.push(format!("--ground={}", spec.ground));
    args.push(format!("--dim={}", spec.dim));
    args.push(format!("--strategy={}", spec.strategy));
    args.push(format!("--budget={}", spec.budget));
    args.push(format!("--seed={}", spec.seed));
    if let Some(e) = spec.epsilon {
        args.push(format!("--epsilon={e}"));
    }
    args.push(format!("--rmax={}", spec.rmax));
    args.push(format!("--r1={}", spec.r1));
    args.push(format!("--r2={}", spec.r2));
    args.push(format!("--trials={}", spec.trials));
    for (flag, path) in [
        ("out", &spec.out),
        ("odometer", &spec.odometer),
        ("csv", &spec.csv),
    ] {
        if let Some(p) = path {
            args.push(format!("--{flag}={}", p.display()));
        }
    }
    args
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<SandpileError> for Failure {
    fn from(e: SandpileError) -> Self {
        let code = match e {
            SandpileError::Io(_) => EXIT_IO,
            SandpileError::BudgetExhausted { .. } => EXIT_BUDGET,
            SandpileError::IllegalTopple { .. } => EXIT_VERIFY_FAILED,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

/// Outcome of a command: JSON summary plus exit code.
struct Outcome {
    summary: Value,
    code: i32,
}

impl Outcome {
    fn pass_fail(summary: Value, passed: bool) -> Self {
        Outcome {
            summary,
            code: if passed { EXIT_OK } else { EXIT_VERIFY_FAILED },
        }
    }
}

/// Runs `spec`, writing the JSON summary to standard output.
pub fn run(spec: &RunSpec) -> i32 {
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    run_to(spec, &mut lock)
}

/// Runs `spec`, writing the JSON summary to `out`.
pub fn run_to(spec: &RunSpec, out: &mut dyn Write) -> i32 {
    let (summary, code) = match dispatch(spec) {
        Ok(o) => (o.summary, o.code),
        Err(f) => (
            json!({ "command": command_name(spec), "error": f.message, "exit_code": f.code }),
            f.code,
        ),
    };
    let text = serde_json::to_string_pretty(&summary).expect("summary is plain JSON");
    if writeln!(out, "{text}").is_err() {
        return EXIT_IO;
    }
    code
}

fn command_name(spec: &RunSpec) -> String {
    match spec.command {
        Command::Stabilize => "stabilize".into(),
        Command::Sweep => "sweep".into(),
        Command::Verify(s) => format!("verify {s}"),
        Command::Replay => "replay".into(),
    }
}

fn dispatch(spec: &RunSpec) -> Result<Outcome, Failure> {
    match spec.command {
        Command::Stabilize => cmd_stabilize(spec),
        Command::Sweep => cmd_sweep(spec),
        Command::Replay => cmd_replay(spec),
        Command::Verify(suite) => verify(spec, suite),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes).map_err(|e| Failure {
        code: EXIT_IO,
        message: format!("cannot write {}: {e}", path.display()),
    })
}

fn io_failure(e: SandpileError) -> Failure {
    match e {
        SandpileError::Io(io) => Failure {
            code: EXIT_IO,
            message: io.to_string(),
        },
        other => other.into(),
    }
}

fn cmd_stabilize(spec: &RunSpec) -> Result<Outcome, Failure> {
    let n = match spec.n[..] {
        [] => 1000,
        [n] => n,
        _ => return Err(Failure::usage("stabilize takes a single --n")),
    };
    let (h, d) = (spec.ground, spec.dim);
    if spec.out.is_some() && d != 2 {
        return Err(Failure::usage("PGM output needs --dim 2"));
    }
    let start = Instant::now();
    let result = stabilize_point_source(n, h, d, spec.strategy, spec.budget)?;
    let wall_time = start.elapsed().as_secs_f64();
    let toppled = toppled_cluster(&result);
    let record = SweepRecord {
        n,
        h,
        d,
        cluster_radius: radius(&toppled),
        diamond_radius: largest_diamond(&toppled),
        square_r: match_square(&toppled),
        total_topplings: result.total_topplings,
        wall_time,
    };
    let summary = json!({
        "command": "stabilize",
        "strategy": spec.strategy.to_string(),
        "record": record,
        "toppled_cells": toppled.len(),
        "budget_exhausted": result.budget_exhausted,
    });
    if result.budget_exhausted {
        return Ok(Outcome {
            summary,
            code: EXIT_BUDGET,
        });
    }
    if let Some(path) = &spec.out {
        emit_pgm(&result, path).map_err(io_failure)?;
    }
    if let Some(path) = &spec.odometer {
        emit_odometer_csv(&result.odometer, path).map_err(io_failure)?;
    }
    if let Some(path) = &spec.csv {
        let text = format!("{}\n{}\n", SweepRecord::CSV_HEADER, record.csv_row());
        write_file(path, text.as_bytes())?;
    }
    Ok(Outcome {
        summary,
        code: EXIT_OK,
    })
}

fn sweep_sizes(spec: &RunSpec) -> Vec<u64> {
    if spec.n.is_empty() {
        log_spaced(1000, 100_000, 5)
    } else {
        spec.n.clone()
    }
}

fn cmd_sweep(spec: &RunSpec) -> Result<Outcome, Failure> {
    let sizes = sweep_sizes(spec);
    let records = sweep_records(&sizes, spec.ground, spec.dim, spec.strategy, spec.budget)?;
    if let Some(path) = &spec.csv {
        let mut text = String::from(SweepRecord::CSV_HEADER);
        text.push('\n');
        for r in &records {
            text.push_str(&r.csv_row());
            text.push('\n');
        }
        write_file(path, text.as_bytes())?;
    }
    let samples: Vec<(u64, u64)> = records.iter().map(|r| (r.n, r.cluster_radius)).collect();
    let (fit, fit_error) = match fit_power_law(&samples) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(Outcome {
        summary: json!({
            "command": "sweep",
            "h": spec.ground,
            "d": spec.dim,
            "records": records,
            "fit": fit,
            "fit_error": fit_error,
        }),
        code: EXIT_OK,
    })
}

fn cmd_replay(spec: &RunSpec) -> Result<Outcome, Failure> {
    let schedule = staged_square_schedule(spec.r1, spec.r2, spec.dim)?;
    let start = make_square_config(spec.r1, spec.r2, spec.ground, spec.dim)?;
    let replay = replay_schedule(&start, &schedule);
    if let Some(path) = &spec.out {
        if spec.dim != 2 {
            return Err(Failure::usage("PGM output needs --dim 2"));
        }
        let frame = sandpile::BoundingBox::centered(2, (spec.r1 + spec.r2) as i64);
        write_file(path, &pgm_bytes(&replay.config, &frame)?)?;
    }
    if let Some(path) = &spec.odometer {
        emit_odometer_csv(&replay.odometer, path).map_err(io_failure)?;
    }
    let report = &replay.report;
    let summary = json!({
        "command": "replay",
        "r1": spec.r1,
        "r2": spec.r2,
        "h": spec.ground,
        "d": spec.dim,
        "rounds": schedule.rounds().len(),
        "rounds_completed": report.rounds_completed,
        "legal": report.legal,
        "stuck": report.stuck.as_ref().map(|s| json!({
            "round": s.round,
            "cell": s.point.to_string(),
            "height": s.height,
            "remaining": s.remaining,
        })),
        "topplings": replay.odometer.total(),
        "stable": replay.config.is_stable(),
    });
    Ok(Outcome::pass_fail(summary, report.legal))
}

fn need_dim2(spec: &RunSpec, suite: Suite) -> Result<(), Failure> {
    if spec.dim != 2 {
        return Err(Failure::usage(format!(
            "suite {suite} is defined for --dim 2 only"
        )));
    }
    Ok(())
}

fn sizes_or(spec: &RunSpec, default: &[u64]) -> Vec<u64> {
    if spec.n.is_empty() {
        default.to_vec()
    } else {
        spec.n.clone()
    }
}

fn epsilon_for(spec: &RunSpec, n: u64) -> f64 {
    spec.epsilon.unwrap_or_else(|| default_epsilon(n))
}

fn verify(spec: &RunSpec, suite: Suite) -> Result<Outcome, Failure> {
    let (strategy, budget) = (spec.strategy, spec.budget);
    let header = |extra: Value| {
        let mut v = json!({ "command": "verify", "suite": suite.to_string() });
        if let (Value::Object(a), Value::Object(b)) = (&mut v, extra) {
            a.extend(b);
        }
        v
    };
    match suite {
        Suite::Abelian => {
            let mut cases = Vec::new();
            let sources: Vec<(u64, u64)> = if spec.n.is_empty() {
                [4, 10, 100, 1000]
                    .iter()
                    .flat_map(|&n| [(n, 0), (n, 2)])
                    .collect()
            } else {
                spec.n.iter().map(|&n| (n, spec.ground)).collect()
            };
            for (n, h) in sources {
                let rep = abelian_check(
                    &make_point_source(n, h, spec.dim),
                    spec.trials,
                    spec.seed,
                    budget,
                )?;
                cases.push(json!({ "case": format!("point source n={n} h={h} d={}", spec.dim), "report": rep }));
            }
            if spec.n.is_empty() && spec.dim == 2 {
                for i in 0..10u64 {
                    let seed = spec.seed.wrapping_add(i);
                    let rep = abelian_check(&random_config(seed), spec.trials, spec.seed, budget)?;
                    cases.push(
                        json!({ "case": format!("random config seed={seed}"), "report": rep }),
                    );
                }
            }
            let passed = cases.iter().all(|c| c["report"]["passed"] == true);
            Ok(Outcome::pass_fail(
                header(json!({ "passed": passed, "cases": cases })),
                passed,
            ))
        }
        Suite::Monotonic => {
            need_dim2(spec, suite)?;
            let mut pairs = Vec::new();
            for i in 0..spec.trials as u64 {
                let seed = spec.seed.wrapping_add(i);
                let (a, b) = random_bumped_pair(seed);
                let rep = monotonicity_check(&a, &b, strategy, budget)?;
                pairs.push(json!({ "seed": seed, "report": rep }));
            }
            let mut passed = pairs.iter().all(|p| p["report"]["passed"] == true);
            let mut radii = Vec::new();
            for &n in &spec.n {
                let run = run_point_source(n, spec.ground, 2, strategy, budget)?;
                radii.push((n, run.record.cluster_radius));
            }
            let mut sorted = radii.clone();
            sorted.sort();
            let radius_monotone = sorted.windows(2).all(|w| w[0].1 <= w[1].1);
            passed &= radius_monotone;
            Ok(Outcome::pass_fail(
                header(json!({
                    "passed": passed,
                    "pairs": pairs,
                    "radii": radii,
                    "radius_monotone": radius_monotone,
                })),
                passed,
            ))
        }
        Suite::Lemma1 => {
            need_dim2(spec, suite)?;
            let mut reports = Vec::new();
            for n in sizes_or(spec, &[10_000]) {
                reports.push(lemma1_check(n, epsilon_for(spec, n), strategy, budget)?);
            }
            let passed = reports.iter().all(|r| r.passed);
            Ok(Outcome::pass_fail(
                header(json!({ "passed": passed, "reports": reports })),
                passed,
            ))
        }
        Suite::Lemma2 => {
            need_dim2(spec, suite)?;
            let mut failures = Vec::new();
            let mut checked = 0;
            for r2 in 0..=spec.rmax {
                for r1 in 0..=r2 {
                    let rep = lemma2_check(r1, r2, strategy, budget)?;
                    checked += 1;
                    if !rep.passed {
                        failures.push(rep);
                    }
                }
            }
            let passed = failures.is_empty();
            Ok(Outcome::pass_fail(
                header(
                    json!({ "passed": passed, "rmax": spec.rmax, "checked": checked, "failures": failures }),
                ),
                passed,
            ))
        }
        Suite::Lemma2Stages => {
            need_dim2(spec, suite)?;
            let mut failures = Vec::new();
            let mut anomalies = 0;
            let mut checked = 0;
            for r2 in 1..=spec.rmax {
                for r1 in 1..=r2 {
                    let rep = lemma2_stage_check(r1, r2)?;
                    checked += 1;
                    anomalies += rep.frame_anomalies.len();
                    if !rep.passed {
                        failures.push(rep);
                    }
                }
            }
            let passed = failures.is_empty();
            Ok(Outcome::pass_fail(
                header(json!({
                    "passed": passed,
                    "rmax": spec.rmax,
                    "checked": checked,
                    "frame_anomalies": anomalies,
                    "failures": failures,
                })),
                passed,
            ))
        }
        Suite::Theorem1Square => {
            need_dim2(spec, suite)?;
            let mut reports = Vec::new();
            for n in sizes_or(spec, &[1000, 10_000]) {
                reports.push(theorem1_square_check(n, strategy, budget)?);
            }
            let passed = reports.iter().all(|r| r.passed);
            Ok(Outcome::pass_fail(
                header(json!({ "passed": passed, "reports": reports })),
                passed,
            ))
        }
        Suite::Theorem2 => {
            need_dim2(spec, suite)?;
            let mut reports = Vec::new();
            for n in sizes_or(spec, &[10_000]) {
                reports.push(theorem2_bounds_check(
                    n,
                    epsilon_for(spec, n),
                    strategy,
                    budget,
                )?);
            }
            let passed = reports.iter().all(|r| r.passed);
            Ok(Outcome::pass_fail(
                header(json!({ "passed": passed, "reports": reports })),
                passed,
            ))
        }
        Suite::Theorem2Stages => {
            need_dim2(spec, suite)?;
            let mut reports = Vec::new();
            for n in sizes_or(spec, &[1000, 10_000]) {
                let (_, rep) = theorem2_stages(n, epsilon_for(spec, n), strategy, budget)?;
                reports.push(rep);
            }
            let passed = reports.iter().all(|r| r.passed);
            Ok(Outcome::pass_fail(
                header(json!({ "passed": passed, "reports": reports })),
                passed,
            ))
        }
        Suite::Scaling => {
            let sizes = sweep_sizes(spec);
            let result = sweep(&sizes, spec.ground, spec.dim, strategy, budget)?;
            if let Some(path) = &spec.csv {
                write_file(path, result.to_csv().as_bytes())?;
            }
            let target = 1.0 / spec.dim as f64;
            let window = [target - ALPHA_WINDOW, target + ALPHA_WINDOW];
            let passed = (window[0]..=window[1]).contains(&result.fit.alpha);
            Ok(Outcome::pass_fail(
                header(json!({
                    "passed": passed,
                    "h": spec.ground,
                    "d": spec.dim,
                    "alpha_window": window,
                    "fit": result.fit,
                    "records": result.records,
                })),
                passed,
            ))
        }
    }
}
