mod config;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use config::{Mode, RunConfig, RunFlags};
use platoon_core::assessment::{
    messages_csv, report_json, run_closed_loop, run_comm_test, run_open_loop, run_sensor_test, sensor_csv, sweep_csv,
    trace_csv, Consistency, InputLog, OutputLog, Verdict,
};
use platoon_core::protocol::Role;
use platoon_core::scenario::{bundled_scenario, parse_scenario, Scenario, ScenarioError};
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "platoon", version, about = "Role-based safety assessment of V2V truck platoons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and validate a scenario file.
    Validate {
        /// Scenario file, or the name of a bundled scenario.
        scenario: String,
    },
    /// Run one test mode for one role and write the trace and report.
    Run(RunFlags),
    /// Run one simulation per row of the sweep block and write a table.
    Sweep(RunFlags),
    /// List the roles a scenario can test.
    Roles {
        scenario: String,
    },
}

#[derive(Debug)]
enum LoadError {
    Io(PathBuf, std::io::Error),
    Scenario(ScenarioError),
}

fn load_scenario(spec: &str) -> Result<Scenario, LoadError> {
    let path = Path::new(spec);
    if !path.exists() {
        let name = spec.strip_suffix(".scn").unwrap_or(spec);
        if let Some(s) = bundled_scenario(name) {
            return Ok(s);
        }
    }
    let text = std::fs::read_to_string(path).map_err(|e| LoadError::Io(path.to_path_buf(), e))?;
    parse_scenario(&text).map_err(LoadError::Scenario)
}

fn scenario_or_error(spec: &str) -> Result<Scenario> {
    match load_scenario(spec) {
        Ok(s) => Ok(s),
        Err(LoadError::Io(p, e)) => Err(anyhow::Error::new(e).context(format!("reading {}", p.display()))),
        Err(LoadError::Scenario(e)) => Err(anyhow::Error::new(e).context(spec.to_string())),
    }
}

fn print_scenario_error(spec: &str, e: &ScenarioError) {
    match e {
        ScenarioError::Validation(issues) => {
            for issue in issues {
                eprintln!("{spec}: {issue}");
            }
        }
        ScenarioError::Syntax { .. } => eprintln!("{spec}: {e}"),
    }
}

fn cmd_validate(spec: &str) -> ExitCode {
    match load_scenario(spec) {
        Ok(_) => ExitCode::SUCCESS,
        Err(LoadError::Scenario(e)) => {
            print_scenario_error(spec, &e);
            ExitCode::from(1)
        }
        Err(LoadError::Io(p, e)) => {
            eprintln!("error: reading {}: {e}", p.display());
            ExitCode::from(2)
        }
    }
}

fn cmd_roles(spec: &str) -> Result<ExitCode> {
    let s = scenario_or_error(spec)?;
    for role in s.realizable_roles() {
        println!("{role}");
    }
    Ok(ExitCode::SUCCESS)
}

/// Writes through a temporary file in the same directory, then renames.
fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating file in {}", dir.display()))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    let target = dir.join(name);
    tmp.persist(&target).with_context(|| format!("writing {}", target.display()))?;
    Ok(())
}

struct Outputs {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl Outputs {
    fn new(dir: &Path) -> Self {
        Outputs { dir: dir.to_path_buf(), files: Vec::new() }
    }

    fn add(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    /// Nothing is written unless every output was produced.
    fn commit(self) -> Result<()> {
        std::fs::create_dir_all(&self.dir).with_context(|| format!("creating {}", self.dir.display()))?;
        for (name, contents) in &self.files {
            write_atomic(&self.dir, name, contents)?;
        }
        Ok(())
    }
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn setpoints_csv(outputs: &OutputLog, dt: f64) -> String {
    let mut s = String::from("tick,t,a_cmd,messages\n");
    for e in &outputs.entries {
        let msgs: Vec<String> = e.messages.iter().map(|m| m.iter().map(|b| format!("{b:02x}")).collect()).collect();
        s.push_str(&format!("{},{},{},{}\n", e.tick, e.tick as f64 * dt, e.a_cmd, msgs.join(";")));
    }
    s
}

#[derive(Serialize)]
struct OpenLoopSummary<'a> {
    scenario: &'a str,
    role: Role,
    ticks: usize,
    consistent: bool,
    first_divergence_tick: Option<u64>,
}

fn verdict_code(pass: bool) -> ExitCode {
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn run_sweep(cfg: &RunConfig, s: &Scenario, out: &mut Outputs) -> Result<bool> {
    let role = cfg.role_for(s);
    let (table, verdicts) = match cfg.mode {
        Mode::Sensor => {
            let rows = run_sensor_test(s, role, &cfg.sim, &cfg.sweep.environment_rows(&s.environment))?;
            for r in &rows {
                out.add(format!("report_row{}.json", r.index), report_json(&r.report));
            }
            (sensor_csv(&rows), rows.iter().map(|r| r.report.verdict).collect::<Vec<_>>())
        }
        _ => {
            let rows = run_comm_test(s, role, &cfg.sim, &cfg.sweep.channel_rows())?;
            for r in &rows {
                out.add(format!("report_row{}.json", r.index), report_json(&r.report));
            }
            (sweep_csv(&rows), rows.iter().map(|r| r.report.verdict).collect::<Vec<_>>())
        }
    };
    let name = if cfg.mode == Mode::Sensor { "sensor.csv" } else { "sweep.csv" };
    out.add(name, table);
    let passed = verdicts.iter().filter(|v| **v == Verdict::Pass).count();
    println!("{passed}/{} rows pass, table {}", verdicts.len(), cfg.out_dir.join(name).display());
    Ok(passed == verdicts.len())
}

fn cmd_run(cfg: &RunConfig) -> Result<ExitCode> {
    let s = scenario_or_error(&cfg.scenario)?;
    let role = cfg.role_for(&s);
    let mut out = Outputs::new(&cfg.out_dir);
    let pass = match cfg.mode {
        Mode::Closed => {
            let run = run_closed_loop(&s, role, &cfg.sim)?;
            out.add("trace.csv", trace_csv(&run.trace));
            out.add("messages.csv", messages_csv(&run.trace));
            out.add("report.json", report_json(&run.report));
            println!("{:?}: {} as {role}, report {}", run.report.verdict, s.name, cfg.out_dir.join("report.json").display());
            run.report.verdict == Verdict::Pass
        }
        Mode::Open => {
            let (inputs, reference) = match &cfg.replay {
                Some((i, r)) => (read_json::<InputLog>(i)?, read_json::<OutputLog>(r)?),
                None => {
                    let run = run_closed_loop(&s, role, &cfg.sim)?;
                    (run.inputs, run.outputs)
                }
            };
            let result = run_open_loop(&s, role, &cfg.sim, &inputs, &reference)?;
            out.add("inputs.json", json(&inputs)?);
            out.add("reference_outputs.json", json(&reference)?);
            out.add("setpoints.csv", setpoints_csv(&result.outputs, cfg.sim.dt));
            let first_divergence_tick = match result.consistency {
                Consistency::Pass => None,
                Consistency::Fail { first_divergence_tick } => Some(first_divergence_tick),
            };
            let summary = OpenLoopSummary {
                scenario: &s.name,
                role,
                ticks: inputs.entries.len(),
                consistent: result.consistency == Consistency::Pass,
                first_divergence_tick,
            };
            out.add("open_loop.json", json(&summary)?);
            match result.consistency {
                Consistency::Pass => println!("Pass: replay of {} as {role} is bit-identical", s.name),
                Consistency::Fail { first_divergence_tick } => {
                    println!("Fail: replay of {} as {role} diverges at tick {first_divergence_tick}", s.name)
                }
            }
            result.consistency == Consistency::Pass
        }
        Mode::Comm | Mode::Sensor => run_sweep(cfg, &s, &mut out)?,
    };
    out.commit()?;
    Ok(verdict_code(pass))
}

fn cmd_sweep(flags: &RunFlags) -> Result<ExitCode> {
    let mut cfg = RunConfig::resolve(flags, Mode::Comm)?;
    if !matches!(cfg.mode, Mode::Comm | Mode::Sensor) {
        cfg.mode = if cfg.sweep.has_environment_axis() && !cfg.sweep.has_channel_axis() { Mode::Sensor } else { Mode::Comm };
    }
    cfg.validate()?;
    cmd_run(&cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { scenario } => return cmd_validate(scenario),
        Command::Roles { scenario } => cmd_roles(scenario),
        Command::Run(flags) => RunConfig::resolve(flags, Mode::Closed).and_then(|cfg| cmd_run(&cfg)),
        Command::Sweep(flags) => cmd_sweep(flags),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
