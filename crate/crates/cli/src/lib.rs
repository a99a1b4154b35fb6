//! `agc` command-line tool: synthesis, simulation, verification and the two
//! embedded demos.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use agc_core::config::RunConfig;
use agc_core::demos::{self, Example};
use agc_core::matops::{lambda_max, Matrix};
use agc_core::sim::{run as simulate_run, InitialStates, Trace};
use agc_core::synthesis::{verify_riccati_certificate, GainSet};
use agc_core::tolerances::Tolerances;
use agc_core::trace_io;
use agc_core::verify::{analyze, CostReport};
use agc_core::Error;
use clap::{Parser, Subcommand, ValueEnum};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_DIVERGENCE: i32 = 4;
pub const EXIT_BOUND_VIOLATED: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "agc", version, about = "Adaptive guaranteed-performance consensus toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the certificate and protocol gains for a configuration.
    Synthesize { config: PathBuf },
    /// Synthesise, simulate and analyse a configuration.
    Simulate {
        config: PathBuf,
        /// Write the trace CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write a gnuplot script for the CSV here (needs --out).
        #[arg(long, requires = "out")]
        plot_script: Option<PathBuf>,
        /// Number of seeded runs; run i uses seed + i.
        #[arg(long, default_value_t = 1)]
        runs: usize,
    },
    /// Run one of the embedded example systems end to end.
    Demo {
        #[arg(value_enum)]
        example: DemoArg,
        /// Also run strict gain-factor regulation (requires lambda_max(BB^T) <= 1).
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, requires = "out")]
        plot_script: Option<PathBuf>,
    },
    /// Re-analyse a trace CSV against the configuration that produced it.
    Verify { config: PathBuf, trace: PathBuf },
    /// Parse a configuration and print it back in normalised form.
    CheckConfig { config: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DemoArg {
    #[value(name = "example-1")]
    Example1,
    #[value(name = "example-2")]
    Example2,
}

impl From<DemoArg> for Example {
    fn from(d: DemoArg) -> Self {
        match d {
            DemoArg::Example1 => Example::One,
            DemoArg::Example2 => Example::Two,
        }
    }
}

/// Exit code for a core error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Divergence { .. } => EXIT_DIVERGENCE,
        Error::NotStabilizable(_)
        | Error::SignFailure(_)
        | Error::InfeasibleRegulation(_)
        | Error::Precondition { .. }
        | Error::Singular { .. }
        | Error::NoConvergence { .. } => EXIT_INFEASIBLE,
        _ => EXIT_PARSE,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
            if e.use_stderr() {
                let _ = write!(err, "{e}");
            } else {
                let _ = write!(out, "{e}");
            }
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> agc_core::Result<i32> {
    match cmd {
        Command::Synthesize { config } => synthesize(&config, out),
        Command::Simulate {
            config,
            out: csv,
            plot_script,
            runs,
        } => simulate(&config, csv.as_deref(), plot_script.as_deref(), runs, out),
        Command::Demo {
            example,
            strict,
            out: csv,
            plot_script,
        } => demo(example.into(), strict, csv.as_deref(), plot_script.as_deref(), out),
        Command::Verify { config, trace } => verify(&config, &trace, out),
        Command::CheckConfig { config } => {
            let cfg = RunConfig::load(&config)?;
            emit(out, &cfg.to_toml())?;
            Ok(EXIT_OK)
        }
    }
}

fn emit(out: &mut dyn Write, text: &str) -> agc_core::Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| Error::TraceIo(format!("writing output: {e}")))
}

pub fn format_matrix(m: &Matrix) -> String {
    let rows: Vec<String> = (0..m.rows())
        .map(|i| {
            let cells: Vec<String> = m.row(i).iter().map(|v| format!("{v:.10}")).collect();
            format!("[{}]", cells.join(", "))
        })
        .collect();
    format!("[{}]", rows.join(", "))
}

fn gains_block(gains: &GainSet, margin: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "mode = {}", gains.mode);
    let _ = writeln!(s, "gamma = {}", gains.gamma);
    let _ = writeln!(s, "certificate = {}", format_matrix(&gains.certificate));
    let _ = writeln!(s, "k_u = {}", format_matrix(&gains.k_u));
    let _ = writeln!(s, "k_w = {}", format_matrix(&gains.k_w));
    let _ = writeln!(s, "certificate_margin = {margin:.6e}");
    s
}

fn synthesize(path: &Path, out: &mut dyn Write) -> agc_core::Result<i32> {
    let cfg = RunConfig::load(path)?;
    let tol = cfg.tolerances()?;
    let plant = cfg.plant()?;
    let syn = cfg.synthesize(&tol)?;
    let margin = verify_riccati_certificate(&syn.gains.certificate, &plant, syn.gains.gamma, syn.gains.mode, &tol)?.margin;
    let mut text = gains_block(&syn.gains, margin);
    if let Some(r) = &syn.regulation {
        let _ = writeln!(text, "regulation.certificate_lambda_max = {:.10e}", r.certificate_lambda_max);
        let _ = writeln!(text, "regulation.evaluations = {}", r.evaluations.len());
        if let Some(s) = r.input_rescale {
            let _ = writeln!(
                text,
                "regulation.input_rescale = {s:.6} (equivalent to B / sqrt({s:.6}) with gamma = {:.10e})",
                r.gamma * s
            );
        }
        if let Some(l) = r.lmi {
            let _ = writeln!(text, "regulation.lmi_xi_max_eigenvalue = {:.6e}", l.xi_max_eigenvalue);
            let _ = writeln!(text, "regulation.lmi_holds = {}", l.holds);
        }
    }
    emit(out, &text)?;
    Ok(EXIT_OK)
}

fn initial_block(trace: &Trace, initial: &InitialStates) -> String {
    let mut s = String::new();
    if let InitialStates::Seeded { seed, low, high } = initial {
        let _ = writeln!(s, "initial.seed = {seed}");
        let _ = writeln!(s, "initial.box = [{low}, {high})");
    }
    let d = trace.state_dim;
    for i in 0..trace.agents {
        let v: Vec<String> = trace.initial_states[i * d..(i + 1) * d]
            .iter()
            .map(|x| format!("{x:e}"))
            .collect();
        let _ = writeln!(s, "initial.x{} = [{}]", i + 1, v.join(", "));
    }
    s
}

fn write_trace_files(trace: &Trace, csv: Option<&Path>, plot: Option<&Path>) -> agc_core::Result<()> {
    if let Some(path) = csv {
        let f = std::fs::File::create(path)
            .map_err(|e| Error::TraceIo(format!("cannot create {}: {e}", path.display())))?;
        trace_io::write_csv(trace, std::io::BufWriter::new(f))?;
        if let Some(p) = plot {
            std::fs::write(p, trace_io::plot_script(&path.display().to_string(), trace))
                .map_err(|e| Error::TraceIo(format!("cannot write {}: {e}", p.display())))?;
        }
    }
    Ok(())
}

fn report_code(report: &CostReport) -> i32 {
    if report.bound_holds {
        EXIT_OK
    } else {
        EXIT_BOUND_VIOLATED
    }
}

fn suffixed(path: &Path, i: usize) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}-{i}.{}", ext.to_string_lossy()),
        None => format!("{stem}-{i}"),
    };
    path.with_file_name(name)
}

struct RunOutcome {
    trace: Trace,
    report: CostReport,
    initial: InitialStates,
}

fn simulate_one(cfg: &RunConfig, tol: &Tolerances, gains: &GainSet) -> agc_core::Result<RunOutcome> {
    let plant = cfg.plant()?;
    let topology = cfg.topology()?;
    let sim = cfg.sim_config()?;
    let trace = simulate_run(&sim, &plant, gains, &topology)?;
    let report = analyze(&trace, &plant, gains, &topology, tol)?;
    Ok(RunOutcome {
        trace,
        report,
        initial: sim.initial,
    })
}

fn simulate(path: &Path, csv: Option<&Path>, plot: Option<&Path>, runs: usize, out: &mut dyn Write) -> agc_core::Result<i32> {
    if runs == 0 {
        return Err(Error::Config("--runs must be at least 1".into()));
    }
    let cfg = RunConfig::load(path)?;
    let tol = cfg.tolerances()?;
    let gains = cfg.synthesize(&tol)?.gains;
    let configs = (0..runs)
        .map(|i| cfg.with_seed_offset(i as u64))
        .collect::<agc_core::Result<Vec<_>>>()?;

    let results: Vec<agc_core::Result<RunOutcome>> = if runs == 1 {
        vec![simulate_one(&configs[0], &tol, &gains)]
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = configs
                .iter()
                .map(|c| s.spawn(|| simulate_one(c, &tol, &gains)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("run thread panicked")).collect()
        })
    };

    let mut code = EXIT_OK;
    let mut text = String::new();
    for (i, res) in results.into_iter().enumerate() {
        let outcome = match res {
            Ok(o) => o,
            Err(e) if runs == 1 => return Err(e),
            Err(e) => {
                let _ = writeln!(text, "run.{} = error: {e}", i + 1);
                code = code.max(exit_code(&e));
                continue;
            }
        };
        let (csv_i, plot_i) = if runs == 1 {
            (csv.map(Path::to_path_buf), plot.map(Path::to_path_buf))
        } else {
            (csv.map(|p| suffixed(p, i + 1)), plot.map(|p| suffixed(p, i + 1)))
        };
        write_trace_files(&outcome.trace, csv_i.as_deref(), plot_i.as_deref())?;
        if runs > 1 {
            let _ = writeln!(text, "# run {}", i + 1);
        }
        text.push_str(&initial_block(&outcome.trace, &outcome.initial));
        text.push_str(&outcome.report.to_key_value());
        code = code.max(report_code(&outcome.report));
    }
    emit(out, &text)?;
    Ok(code)
}

fn demo(example: Example, strict: bool, csv: Option<&Path>, plot: Option<&Path>, out: &mut dyn Write) -> agc_core::Result<i32> {
    let tol = Tolerances::from_env()?;
    let mut text = String::new();
    let _ = writeln!(text, "demo = {}", example.as_str());
    let setup = demos::setup(example);
    for note in &setup.notes {
        let _ = writeln!(text, "note = {note}");
    }
    let printed = agc_core::verify::verify_printed_certificate(example);
    text.push_str(&printed.to_key_value());

    if strict {
        let lam = lambda_max(&setup.plant.bbt())?;
        let _ = writeln!(text, "strict.lambda_max_bbt = {lam:.6}");
        emit(out, &text)?;
        text.clear();
        let delta = {
            let g = agc_core::synthesis::design(&setup.plant, setup.gamma, example.mode(), &tol)?;
            lambda_max(&g.certificate)? * 1.001
        };
        let gamma = demos::strict_regulation(example, delta, &tol)?;
        let _ = writeln!(text, "strict.delta = {delta:.6e}");
        let _ = writeln!(text, "strict.gamma = {gamma:.10e}");
    }

    let outcome = demos::run_demo(example, &tol)?;
    let margin = outcome.report.certificate_margin;
    text.push_str(&gains_block(&outcome.gains, margin));
    text.push_str(&initial_block(&outcome.trace, &outcome.setup.sim.initial));
    text.push_str(&outcome.report.to_key_value());
    let _ = writeln!(
        text,
        "informational.printed_total = {} (not reproducible: initial states unpublished)",
        match example {
            Example::One => demos::PRINTED_J_R_STAR,
            Example::Two => demos::PRINTED_J_L_STAR,
        }
    );
    write_trace_files(&outcome.trace, csv, plot)?;
    emit(out, &text)?;
    Ok(if printed.pass { report_code(&outcome.report) } else { EXIT_INFEASIBLE })
}

fn verify(cfg_path: &Path, trace_path: &Path, out: &mut dyn Write) -> agc_core::Result<i32> {
    let cfg = RunConfig::load(cfg_path)?;
    let tol = cfg.tolerances()?;
    let plant = cfg.plant()?;
    let topology = cfg.topology()?;
    let gains = cfg.synthesize(&tol)?.gains;
    let f = std::fs::File::open(trace_path)
        .map_err(|e| Error::TraceIo(format!("cannot open {}: {e}", trace_path.display())))?;
    let trace = trace_io::read_csv(std::io::BufReader::new(f), &plant, &gains, &topology)?;
    let report = analyze(&trace, &plant, &gains, &topology, &tol)?;
    emit(out, &report.to_key_value())?;
    Ok(report_code(&report))
}
