use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use risnet::allocation::{deserialize_schedule, outage_percentage, serialize_schedule, ValidationReport};
use risnet::harness::{config_from_toml, config_to_toml, run_sweep_with, SweepSpec};
use risnet::milp::{self, solution::write_highs_solution, Backend, ExternalSolver, ModelFormat, SolveStatus};
use risnet::scenario::{self, Scenario, ScenarioConfig};
use risnet::{heuristic, precompute, validate};

const EXIT_ERROR: u8 = 1;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_TIMEOUT: u8 = 4;
const EXIT_VIOLATIONS: u8 = 5;

/// Scenarios, ILP and heuristic allocation, and sweeps for RIS-assisted
/// indoor mmWave networks.
#[derive(Parser)]
#[command(name = "risnet", version, about)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Scenario seed for generate, tie-break seed for heuristic
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Write the main output here instead of stdout
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,

    /// ILP backend; defaults to highs when built in, bundled otherwise
    #[arg(long, global = true, value_enum)]
    solver: Option<SolverArg>,

    /// External solver command; {model}, {solution} and {time} are substituted
    #[arg(long, global = true)]
    solver_cmd: Option<String>,

    /// Model file format handed to the external solver
    #[arg(long, global = true, default_value = "lp")]
    solver_format: ModelFormat,

    /// Per-solve time limit in seconds
    #[arg(long, global = true)]
    timeout: Option<f64>,

    /// Floor size in meters, as WIDTHxHEIGHT
    #[arg(long, global = true)]
    floor: Option<Floor>,

    /// Number of obstacles
    #[arg(long, global = true)]
    obstacles: Option<usize>,

    /// Obstacle side range in meters, as MIN..MAX
    #[arg(long, global = true)]
    obstacle_size: Option<SideRange>,

    /// No progress or summaries on stderr
    #[arg(short, long, global = true)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Bundled,
    Highs,
    External,
}

#[derive(Clone, Copy)]
struct Floor(f64, f64);

impl FromStr for Floor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (w, h) = s.split_once(['x', 'X']).ok_or("expected WIDTHxHEIGHT")?;
        Ok(Floor(w.trim().parse().map_err(|_| "bad width")?, h.trim().parse().map_err(|_| "bad height")?))
    }
}

#[derive(Clone, Copy)]
struct SideRange(f64, f64);

impl FromStr for SideRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once("..").ok_or("expected MIN..MAX")?;
        Ok(SideRange(a.trim().parse().map_err(|_| "bad minimum")?, b.trim().parse().map_err(|_| "bad maximum")?))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random scenario file
    Generate {
        /// TOML configuration; only fields that differ from the defaults are needed
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        robots: Option<usize>,
        #[arg(long)]
        slots: Option<usize>,
        #[arg(long)]
        ris: Option<usize>,
        /// Print the default configuration as TOML instead
        #[arg(long)]
        print_config: bool,
    },
    /// Solve the allocation ILP for a scenario and write the schedule
    Solve {
        scenario: PathBuf,
        /// Also write a JSON summary with the validation report
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the nearest-link heuristic on a scenario and write the schedule
    Heuristic {
        scenario: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Check a schedule against a scenario
    Validate { scenario: PathBuf, schedule: PathBuf },
    /// Run a parameter sweep and write CSV
    Sweep {
        spec: PathBuf,
        /// Override the trial count in the sweep file
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Write the allocation ILP of a scenario as an LP or MPS file
    ExportModel {
        scenario: PathBuf,
        /// Defaults to the output extension, then lp
        #[arg(long)]
        format: Option<ModelFormat>,
    },
    /// Solve an LP or MPS file and write a HiGHS-style solution file
    LpSolve {
        model: PathBuf,
        #[arg(long)]
        format: Option<ModelFormat>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    let g = &cli.global;
    match &cli.command {
        Command::Generate { config, robots, slots, ris, print_config } => {
            if *print_config {
                emit(g, &config_to_toml(&ScenarioConfig::default()))?;
                return Ok(0);
            }
            let mut c = match config {
                Some(path) => config_from_toml(&read(path)?)?,
                None => ScenarioConfig::default(),
            };
            apply_overrides(g, &mut c);
            c.num_robots = robots.unwrap_or(c.num_robots);
            c.num_slots = slots.unwrap_or(c.num_slots);
            c.num_ris = ris.unwrap_or(c.num_ris);
            let sc = scenario::generate(&c, g.seed.unwrap_or(0))?;
            emit(g, &scenario::serialize(&sc))?;
            Ok(0)
        }
        Command::Solve { scenario, report } => solve(g, &load_scenario(g, scenario)?, report.as_deref()),
        Command::Heuristic { scenario, report } => {
            let sc = load_scenario(g, scenario)?;
            let tables = precompute(&sc);
            let out = heuristic::allocate(&tables, &sc, g.seed.unwrap_or(0));
            let rep = validate(&sc, &tables, &out.schedule);
            emit(g, &serialize_schedule(&out.schedule))?;
            if let Some(path) = report {
                let status = if out.feasible { "feasible" } else { "infeasible" };
                write_report(path, status, None, None, Some(&out.schedule), &rep)?;
            }
            if !g.quiet {
                match out.failure {
                    None => eprintln!("feasible, outage {:.2}%", outage_percentage(&out.schedule)),
                    Some(f) => eprintln!(
                        "infeasible: robot {} is in outage from slot {} to {}",
                        f.robot, f.first_slot, f.last_slot
                    ),
                }
            }
            Ok(if out.feasible { 0 } else { EXIT_INFEASIBLE })
        }
        Command::Validate { scenario, schedule } => {
            let sc = load_scenario(g, scenario)?;
            let s = deserialize_schedule(&read(schedule)?).map_err(|e| anyhow!("{}: {e}", schedule.display()))?;
            if s.num_robots() != sc.num_robots() || s.num_slots() != sc.num_slots() {
                bail!(
                    "schedule is {} robots x {} slots, scenario is {} x {}",
                    s.num_robots(),
                    s.num_slots(),
                    sc.num_robots(),
                    sc.num_slots()
                );
            }
            let rep = validate(&sc, &precompute(&sc), &s);
            emit(g, &rep.to_string())?;
            Ok(if rep.is_feasible() { 0 } else { EXIT_VIOLATIONS })
        }
        Command::Sweep { spec, trials } => {
            let mut spec = SweepSpec::from_toml(&read(spec)?).with_context(|| spec.display().to_string())?;
            if let Some(t) = trials {
                spec.trials = *t;
            }
            apply_overrides(g, &mut spec.base);
            let mut options = spec.run_options()?;
            if g.solver.is_some() {
                options.backend = backend(g)?;
            }
            if let Some(t) = g.timeout {
                options.time_limit = Some(Duration::from_secs_f64(t));
            }
            let quiet = g.quiet;
            let progress = move |done: usize, total: usize| {
                if !quiet {
                    eprint!("\r{done}/{total} trials");
                    if done == total {
                        eprintln!();
                    }
                }
            };
            let table = run_sweep_with(&spec, &options, Some(&progress))?;
            for rec in &table.records {
                if let Err(e) = &rec.result {
                    eprintln!("trial {}={} seed {}: {e}", table.axis.name(), rec.axis_value, rec.seed);
                }
            }
            emit(g, &table.to_csv()?)?;
            Ok(if table.records.iter().any(|r| r.unsound) { EXIT_ERROR } else { 0 })
        }
        Command::ExportModel { scenario, format } => {
            let sc = load_scenario(g, scenario)?;
            let format = format
                .or_else(|| g.output.as_deref().and_then(ModelFormat::from_path))
                .unwrap_or(ModelFormat::Lp);
            let model = milp::build_model(&precompute(&sc), &sc)?;
            emit(g, &milp::export_model(&model, format))?;
            Ok(0)
        }
        Command::LpSolve { model, format } => {
            let format = format
                .or_else(|| ModelFormat::from_path(model))
                .ok_or_else(|| anyhow!("cannot tell the format of {}; pass --format", model.display()))?;
            let m = milp::parse_model(&read(model)?, format).with_context(|| model.display().to_string())?;
            let result = milp::solve(&m, &backend(g)?, time_limit(g))?;
            let values = result.values.as_deref().or(result.incumbent.as_ref().map(|i| i.1.as_slice()));
            emit(g, &write_highs_solution(&m, result.status, values))?;
            if !g.quiet {
                eprintln!("{}", describe(&result));
            }
            Ok(status_code(result.status))
        }
    }
}

fn solve(g: &Global, sc: &Scenario, report: Option<&Path>) -> Result<u8> {
    let tables = precompute(sc);
    let model = milp::build_model(&tables, sc)?;
    let result = milp::solve(&model, &backend(g)?, time_limit(g))?;
    let (nr, ns) = (sc.num_robots(), sc.num_slots());
    let schedule = match (&result.values, &result.incumbent) {
        (Some(v), _) | (None, Some((_, v))) => Some(milp::extract_assignment(&model, v, nr, ns)?),
        _ => None,
    };
    let rep = schedule.as_ref().map(|s| validate(sc, &tables, s)).unwrap_or_default();
    if let Some(s) = &schedule {
        emit(g, &serialize_schedule(s))?;
    }
    if let Some(path) = report {
        let objective = result.objective.or(result.incumbent.as_ref().map(|i| i.0));
        write_report(path, &result.status.to_string(), objective, Some(result.runtime_s), schedule.as_ref(), &rep)?;
    }
    if !g.quiet {
        eprintln!("{}", describe(&result));
        if schedule.is_some() {
            eprint!("{rep}");
        }
    }
    if result.status == SolveStatus::Optimal && !rep.is_feasible() {
        bail!("solver schedule fails validation");
    }
    Ok(status_code(result.status))
}

fn describe(result: &milp::SolveResult) -> String {
    let mut s = format!("{} in {:.3} s", result.status, result.runtime_s);
    if let Some(obj) = result.objective {
        s += &format!(", objective {obj}");
    }
    if let Some((obj, _)) = &result.incumbent {
        s += &format!(", incumbent objective {obj}");
    } else if result.status == SolveStatus::Timeout {
        s += ", no incumbent";
    }
    s
}

fn status_code(status: SolveStatus) -> u8 {
    match status {
        SolveStatus::Optimal => 0,
        SolveStatus::Infeasible => EXIT_INFEASIBLE,
        SolveStatus::Timeout => EXIT_TIMEOUT,
    }
}

fn write_report(
    path: &Path,
    status: &str,
    objective: Option<f64>,
    runtime_s: Option<f64>,
    schedule: Option<&risnet::AllocationSchedule>,
    report: &ValidationReport,
) -> Result<()> {
    let value = serde_json::json!({
        "status": status,
        "objective": objective,
        "runtime_s": runtime_s,
        "outage_pct": schedule.map(outage_percentage),
        "violations": report.violations,
    });
    fs::write(path, serde_json::to_string_pretty(&value)? + "\n").with_context(|| path.display().to_string())
}

fn backend(g: &Global) -> Result<Backend> {
    Ok(match g.solver {
        None => Backend::best_available(),
        Some(SolverArg::Bundled) => Backend::Bundled,
        Some(SolverArg::Highs) => Backend::Highs,
        Some(SolverArg::External) => {
            let cmd = g.solver_cmd.clone().ok_or_else(|| anyhow!("--solver external needs --solver-cmd"))?;
            Backend::External(ExternalSolver::new(cmd, g.solver_format))
        }
    })
}

fn time_limit(g: &Global) -> Option<Duration> {
    Some(g.timeout.map(Duration::from_secs_f64).unwrap_or(milp::DEFAULT_TIME_LIMIT))
}

fn apply_overrides(g: &Global, c: &mut ScenarioConfig) {
    if let Some(Floor(w, h)) = g.floor {
        c.floor_width_m = w;
        c.floor_height_m = h;
    }
    if let Some(n) = g.obstacles {
        c.obstacle_count = n;
    }
    if let Some(SideRange(lo, hi)) = g.obstacle_size {
        c.obstacle_side_min_m = lo;
        c.obstacle_side_max_m = hi;
    }
}

fn load_scenario(g: &Global, path: &Path) -> Result<Scenario> {
    if g.floor.is_some() || g.obstacles.is_some() || g.obstacle_size.is_some() {
        bail!("floor and obstacle overrides apply to generate and sweep only");
    }
    scenario::deserialize(&read(path)?).with_context(|| path.display().to_string())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(g: &Global, text: &str) -> Result<()> {
    match &g.output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                writeln!(out)?;
            }
            Ok(())
        }
    }
}
