//! Command-line front end: plan a charging schedule (`run`), re-check a
//! report by simulation (`validate`), or draw it (`render`).
//!
//! Exit codes: 0 success, 2 infeasible schedule, 3 invalid input,
//! 4 validation failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tlfw::clustering::Variant;
use tlfw::pipeline::{run_msirsn, run_tlfw, Mode, PipelineConfig};
use tlfw::report::{build_report, sim_section, JointSection, ReportInputs, RunReport, SimSection};
use tlfw::scenario::{load_builtin_table1, load_scenario, Scenario};
use tlfw::sim::{check_renewable, simulate, simulate_baseline, trace_to_csv, Trace};

#[derive(Parser)]
#[command(name = "tlfw", version, about = "Charging-tour planner for wireless rechargeable sensor networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan a schedule and write the run report.
    Run(RunArgs),
    /// Re-simulate a report and check battery limits.
    Validate(ValidateArgs),
    /// Render a report as SVG.
    Render(RenderArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Built-in dataset name (currently `table1`).
    #[arg(long, conflicts_with = "scenario")]
    builtin: Option<String>,
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Cluster count for the layered mode.
    #[arg(long, default_value_t = 4)]
    clusters: usize,
    /// Master seed; every random choice derives from it.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Independent clustering restarts.
    #[arg(long, default_value_t = 16)]
    restarts: usize,
    /// Head update rule: centroid-snap | exact-medoid.
    #[arg(long, default_value = "centroid-snap")]
    variant: Variant,
    /// Planning mode: tlfw (layered) | msirsn (single-layer baseline).
    #[arg(long, default_value = "tlfw")]
    mode: Mode,
    /// Maximum move-epoch segment length.
    #[arg(long = "seg-max", default_value_t = 0.25)]
    seg_max: f64,
    /// Flow-target pruning: 0 = full mesh. Defaults to 0 (tlfw) or 6 (msirsn).
    #[arg(long = "prune-k")]
    prune_k: Option<usize>,
    /// Worker threads for per-cluster solves (0 = library default).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Write the JSON run report here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write an SVG rendering here.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Write the simulation trace CSV here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Simulation timestep.
    #[arg(long, default_value_t = 0.05)]
    dt: f64,
    /// Simulated periods (0 disables simulation).
    #[arg(long, default_value_t = 3)]
    periods: usize,
}

#[derive(Args)]
struct ValidateArgs {
    /// Run report to re-check.
    report: PathBuf,
    /// Override the report's timestep.
    #[arg(long)]
    dt: Option<f64>,
    /// Override the report's period count.
    #[arg(long)]
    periods: Option<usize>,
}

#[derive(Args)]
struct RenderArgs {
    /// Run report to draw.
    report: PathBuf,
    /// Output SVG path.
    #[arg(long)]
    svg: PathBuf,
}

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_INVALID: u8 = 3;
const EXIT_VALIDATION: u8 = 4;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("TLFW_LOG")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Render(args) => cmd_render(args),
    };
    match outcome {
        Ok(code) => code,
        Err(CliError::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INVALID)
        }
        Err(CliError::Infeasible(msg)) => {
            eprintln!("infeasible: {msg}");
            ExitCode::from(EXIT_INFEASIBLE)
        }
    }
}

enum CliError {
    Invalid(String),
    Infeasible(String),
}

fn invalid<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Invalid(e.to_string())
}

fn load_source(args: &RunArgs) -> Result<(Scenario, String), CliError> {
    match (&args.builtin, &args.scenario) {
        (Some(name), None) => {
            if name == "table1" {
                Ok((load_builtin_table1(), format!("builtin:{name}")))
            } else {
                Err(CliError::Invalid(format!("unknown builtin dataset `{name}`")))
            }
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(invalid)?;
            let scenario = load_scenario(&text).map_err(invalid)?;
            Ok((scenario, path.display().to_string()))
        }
        _ => Err(CliError::Invalid("pass exactly one of --builtin or --scenario".into())),
    }
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).map_err(invalid)?;
    std::fs::rename(&tmp, path).map_err(invalid)?;
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<ExitCode, CliError> {
    if args.dt <= 0.0 || args.seg_max <= 0.0 {
        return Err(CliError::Invalid("dt and seg-max must be positive".into()));
    }
    let (scenario, source) = load_source(&args)?;
    let cfg = PipelineConfig {
        clusters: args.clusters,
        seed: args.seed,
        restarts: args.restarts,
        max_iter: 100,
        variant: args.variant,
        seg_max: args.seg_max,
        prune_k: args.prune_k,
        jobs: args.jobs,
    };
    let mut infeasible: Option<String> = None;
    let mut simulation: Option<SimSection> = None;
    let mut trace_out: Option<Trace> = None;

    let report = match args.mode {
        Mode::Tlfw => {
            let out = run_tlfw(&scenario, &cfg).map_err(schedule_error)?;
            println!("clustering: heads {:?}, comm cost {:.4}", out.clustering.head_ids(), out.comm_cost);
            for p in &out.cluster_plans {
                println!(
                    "cluster {}: tour {:.4}, cycle {:.1}, vacation {:.1}, charge fraction {:.5}",
                    p.cluster_id, p.tour.length, p.cycle_time, p.vacation, p.charge_fraction
                );
            }
            let hp = &out.head_plan;
            println!(
                "head layer: tour {:.4}, cycle {:.2}, vacation {:.2}, stop time {:.2}, eta {:.4}",
                hp.tour.length,
                hp.cycle_time,
                hp.vacation,
                hp.total_stop_time(),
                hp.objective
            );
            match &out.joint {
                Ok(j) => {
                    println!(
                        "joint: T {:.1}, h {:.3}, vacation {:.1}, eta_total {:.4}",
                        j.period, j.sub_periods, j.vacation_total, j.objective
                    );
                    if args.periods >= 2 {
                        let trace = simulate(
                            &scenario,
                            &out.clustering,
                            j,
                            &out.head_plan,
                            &out.cluster_plans,
                            args.dt,
                            args.periods,
                        )
                        .map_err(invalid)?;
                        let verdict = check_renewable(&trace, 0.02);
                        println!(
                            "simulation: {} over {} periods (dt {})",
                            if verdict.pass { "pass" } else { "FAIL" },
                            args.periods,
                            args.dt
                        );
                        simulation = Some(sim_section(&trace, &verdict, args.dt, args.periods));
                        trace_out = Some(trace);
                    }
                }
                Err(e) => {
                    println!("joint: infeasible ({e})");
                    infeasible = Some(e.to_string());
                }
            }
            build_report(ReportInputs {
                scenario: &scenario,
                cfg: &cfg,
                mode: Mode::Tlfw,
                dt: args.dt,
                periods: args.periods,
                source,
                tlfw: Some(&out),
                baseline: None,
                simulation: simulation.clone(),
            })
        }
        Mode::Msirsn => {
            let out = run_msirsn(&scenario, &cfg).map_err(schedule_error)?;
            let p = &out.plan;
            println!(
                "baseline: {} stops, tour {:.4}, cycle {:.1}, vacation {:.1}, eta {:.4}",
                p.stops.len(),
                p.tour.length,
                p.cycle_time,
                p.vacation,
                p.objective
            );
            if args.periods >= 2 {
                let trace = simulate_baseline(&scenario, &out.plan, args.dt, args.periods).map_err(invalid)?;
                let verdict = check_renewable(&trace, 0.02);
                println!(
                    "simulation: {} over {} periods (dt {})",
                    if verdict.pass { "pass" } else { "FAIL" },
                    args.periods,
                    args.dt
                );
                simulation = Some(sim_section(&trace, &verdict, args.dt, args.periods));
                trace_out = Some(trace);
            }
            build_report(ReportInputs {
                scenario: &scenario,
                cfg: &cfg,
                mode: Mode::Msirsn,
                dt: args.dt,
                periods: args.periods,
                source,
                tlfw: None,
                baseline: Some(&out),
                simulation: simulation.clone(),
            })
        }
    };

    if let Some(path) = &args.out {
        write_atomic(path, &report.to_json())?;
        println!("report written to {}", path.display());
    }
    if let Some(path) = &args.svg {
        let svg = tlfw::svg::render_svg(&report).map_err(CliError::Invalid)?;
        write_atomic(path, &svg)?;
        println!("svg written to {}", path.display());
    }
    if let Some(path) = &args.trace {
        match &trace_out {
            Some(trace) => {
                write_atomic(path, &trace_to_csv(trace))?;
                println!("trace written to {}", path.display());
            }
            None => log::warn!("--trace requested but no simulation ran"),
        }
    }
    if let Some(reason) = infeasible {
        return Err(CliError::Infeasible(reason));
    }
    Ok(ExitCode::SUCCESS)
}

fn schedule_error(e: tlfw::pipeline::PipelineError) -> CliError {
    use tlfw::error::ScheduleError;
    match e {
        tlfw::pipeline::PipelineError::Cluster(c) => CliError::Invalid(c.to_string()),
        tlfw::pipeline::PipelineError::Schedule(s) => match s {
            ScheduleError::Infeasible(_)
            | ScheduleError::JointInfeasible(_)
            | ScheduleError::UnchargeableNode(_)
            | ScheduleError::ZeroConsumption => CliError::Infeasible(s.to_string()),
            other => CliError::Invalid(other.to_string()),
        },
    }
}

fn cmd_validate(args: ValidateArgs) -> Result<ExitCode, CliError> {
    let text = std::fs::read_to_string(&args.report).map_err(invalid)?;
    let report = RunReport::from_json(&text).map_err(CliError::Invalid)?;
    let scenario = report.scenario().map_err(CliError::Invalid)?;
    let dt = args.dt.unwrap_or(report.settings.dt);
    let periods = args.periods.unwrap_or(report.settings.periods).max(2);
    let trace = if let Some(layered) = &report.layered {
        let joint = match &layered.joint {
            JointSection::Solved { plan } => plan,
            JointSection::Infeasible { reason } => {
                return Err(CliError::Infeasible(format!("report carries no joint plan: {reason}")))
            }
        };
        simulate(
            &scenario,
            &layered.clustering,
            joint,
            &layered.head_plan,
            &layered.cluster_plans,
            dt,
            periods,
        )
        .map_err(invalid)?
    } else if let Some(baseline) = &report.baseline {
        simulate_baseline(&scenario, &baseline.plan, dt, periods).map_err(invalid)?
    } else {
        return Err(CliError::Invalid("report has neither a layered nor a baseline section".into()));
    };
    let verdict = check_renewable(&trace, 0.02);
    if verdict.pass {
        println!("pass: all nodes stayed above the floor across {periods} periods (dt {dt})");
        Ok(ExitCode::SUCCESS)
    } else {
        for f in verdict.failures.iter().take(10) {
            println!("fail: node {} at t = {:.2}: energy {:.2} ({})", f.node, f.time, f.energy, f.reason);
        }
        println!("{} violations total", verdict.failures.len());
        Ok(ExitCode::from(EXIT_VALIDATION))
    }
}

fn cmd_render(args: RenderArgs) -> Result<ExitCode, CliError> {
    let text = std::fs::read_to_string(&args.report).map_err(invalid)?;
    let report = RunReport::from_json(&text).map_err(CliError::Invalid)?;
    let svg = tlfw::svg::render_svg(&report).map_err(CliError::Invalid)?;
    write_atomic(&args.svg, &svg)?;
    println!("svg written to {}", args.svg.display());
    Ok(ExitCode::SUCCESS)
}
