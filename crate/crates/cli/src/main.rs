use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use prionet::analysis::{
    classify, disease_free_equilibrium, endemic_equilibrium, kappa_sweep, ClassifyOptions,
    EquilibriumOptions, SweepOptions,
};
use prionet::config::{emit_model, parse_model, preset, write_csv, write_sweep_csv, PRESET_NAMES};
use prionet::dde::integrate;
use prionet::{ngm, AnalysisError, DdeError, InitialData, ModelError, NetworkModel, NgmError};

const THREADS_VAR: &str = "PRIONET_THREADS";

#[derive(Parser)]
#[command(
    name = "prionet",
    version,
    about = "Delayed prion-spread dynamics on neuron networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Next-generation matrix, R0 and the endemic-existence certificate.
    R0 {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = ngm::DEFAULT_SEED)]
        seed: u64,
        /// Also write full-precision key=value lines here (`-` for stdout).
        #[arg(long)]
        out: Option<String>,
    },
    /// Integrate the delay system and classify its long-run behaviour.
    Simulate {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 100.0)]
        horizon: f64,
        #[arg(long)]
        step: Option<f64>,
        /// Trajectory CSV (`-` for stdout; the report then goes to stderr).
        #[arg(long)]
        out: Option<String>,
        #[arg(long, default_value_t = 1)]
        stride: usize,
        /// Comma-separated x_i(0) values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        /// Comma-separated constant history values for y_i.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        y0: Option<Vec<f64>>,
    },
    /// Disease-free and endemic equilibria.
    Equilibrium {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = ngm::DEFAULT_SEED)]
        seed: u64,
        /// Also write full-precision key=value lines here (`-` for stdout).
        #[arg(long)]
        out: Option<String>,
    },
    /// Sweep a coupling parameter and report oscillation onsets.
    Sweep {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum, default_value_t = Param::Kappa)]
        param: Param,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long, default_value_t = 46)]
        points: usize,
        #[arg(long, default_value_t = 200.0)]
        horizon: f64,
        #[arg(long)]
        step: Option<f64>,
        /// Amplitude CSV (`-` for stdout; the report then goes to stderr).
        #[arg(long)]
        out: Option<String>,
    },
    /// Emit a built-in scenario as a model file; lists names without --name.
    Preset {
        #[arg(long)]
        name: Option<String>,
        #[arg(long, default_value = "-")]
        out: String,
    },
    /// Check a model against its parameter constraints.
    Validate {
        #[command(flatten)]
        source: Source,
        /// Also require incoming kappa sums <= 1 and positive outflow.
        #[arg(long)]
        strict: bool,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Model file.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Built-in scenario (fig3, fig4, fig5, fig6, fig7, fig9 or the long names).
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Param {
    Kappa,
}

#[derive(Debug)]
enum Failure {
    Model(String),
    Numerical(String),
    Usage(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Model(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Usage(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Model(m) | Failure::Numerical(m) | Failure::Usage(m) => m,
        }
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::ZeroOutflow { neuron } => Failure::Model(zero_outflow(neuron)),
            e => Failure::Model(e.to_string()),
        }
    }
}

impl From<NgmError> for Failure {
    fn from(e: NgmError) -> Self {
        match e {
            NgmError::Model(m) => m.into(),
            NgmError::NotConverged { .. } => Failure::Numerical(e.to_string()),
            e => Failure::Model(e.to_string()),
        }
    }
}

impl From<DdeError> for Failure {
    fn from(e: DdeError) -> Self {
        match e {
            DdeError::Model(m) => m.into(),
            DdeError::InvalidHorizon(_) | DdeError::InvalidStep { .. } => {
                Failure::Usage(e.to_string())
            }
            e => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Model(m) => m.into(),
            AnalysisError::Ngm(n) => n.into(),
            AnalysisError::Dde(d) => d.into(),
            AnalysisError::InvalidSweep(_) => Failure::Usage(e.to_string()),
            e => Failure::Numerical(e.to_string()),
        }
    }
}

fn zero_outflow(neuron: usize) -> String {
    format!(
        "neuron {neuron} has total outflow alpha_{neuron} = 0; R0 is defined only when every \
         neuron clears misfolded protein (alpha_i > 0), so it cannot be computed for this model"
    )
}

fn io_failure(path: &str, e: io::Error) -> Failure {
    Failure::Model(format!("{path}: {e}"))
}

fn load(source: &Source) -> Result<(NetworkModel, InitialData), Failure> {
    if let Some(name) = &source.preset {
        let p = preset(name).map_err(|e| Failure::Usage(e.to_string()))?;
        return Ok((p.model, p.initial));
    }
    let path = source.model.as_ref().expect("clap enforces one source");
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Model(format!("{}: {e}", path.display())))?;
    let model =
        parse_model(&text).map_err(|e| Failure::Model(format!("{}: {e}", path.display())))?;
    let initial = InitialData::default_for(&model);
    Ok((model, initial))
}

fn check(model: &NetworkModel, strict: bool) -> Result<(), Failure> {
    let violations = model.validate(strict);
    if violations.is_empty() {
        return Ok(());
    }
    let lines: Vec<String> = violations
        .iter()
        .map(|v| {
            if v.message.starts_with("alpha_total(") {
                let id: usize = v.field["neuron ".len()..].parse().unwrap_or(0);
                format!("{v} ({})", zero_outflow(id))
            } else {
                v.to_string()
            }
        })
        .collect();
    Err(Failure::Model(format!(
        "model violates {} constraint(s):\n  {}",
        lines.len(),
        lines.join("\n  ")
    )))
}

/// Destination for a payload; `-` is stdout.
fn open_out(path: &str) -> Result<Box<dyn Write>, Failure> {
    if path == "-" {
        Ok(Box::new(io::stdout().lock()))
    } else {
        let file = File::create(path).map_err(|e| io_failure(path, e))?;
        Ok(Box::new(BufWriter::new(file)))
    }
}

fn write_payload(path: &str, lines: &[String]) -> Result<(), Failure> {
    let mut out = open_out(path)?;
    for line in lines {
        writeln!(out, "{line}").map_err(|e| io_failure(path, e))?;
    }
    out.flush().map_err(|e| io_failure(path, e))
}

/// Report sink: stdout, or stderr when stdout carries a payload.
fn report_sink(out: &Option<String>) -> Box<dyn Write> {
    if out.as_deref() == Some("-") {
        Box::new(io::stderr())
    } else {
        Box::new(io::stdout())
    }
}

fn cmd_r0(source: &Source, seed: u64, out: &Option<String>) -> Result<(), Failure> {
    let (model, _) = load(source)?;
    check(&model, true)?;
    let report = ngm::r0_with_seed(&model, seed)?;
    let n = model.n();
    let mut rep = report_sink(out);
    let mut text = String::new();
    for (i, r) in report.local_r0.iter().enumerate() {
        text += &format!("R0_{} = {r:.4}\n", i + 1);
    }
    text += "F =\n";
    for r in 0..n {
        let row: Vec<String> = (0..n).map(|c| format!("{:.4}", report.f[(r, c)])).collect();
        text += &format!("  [{}]\n", row.join(", "));
    }
    text += &format!("R0 = {:.4}\n", report.r0);
    text += &format!("row_sum_min = {:.4}\n", report.min_row_sum);
    text += &format!("row_sum_max = {:.4}\n", report.max_row_sum);
    text += &format!("certificate = {}\n", report.ee_certificate);
    let _ = rep.write_all(text.as_bytes());
    let _ = rep.flush();

    if let Some(path) = out {
        let mut lines: Vec<String> = report
            .local_r0
            .iter()
            .enumerate()
            .map(|(i, r)| format!("r0_{}={r:e}", i + 1))
            .collect();
        for r in 0..n {
            for c in 0..n {
                lines.push(format!("f_{}_{}={:e}", r + 1, c + 1, report.f[(r, c)]));
            }
        }
        lines.push(format!("r0={:e}", report.r0));
        lines.push(format!("row_sum_min={:e}", report.min_row_sum));
        lines.push(format!("row_sum_max={:e}", report.max_row_sum));
        lines.push(format!("certificate={}", report.ee_certificate));
        write_payload(path, &lines)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    source: &Source,
    horizon: f64,
    step: Option<f64>,
    out: &Option<String>,
    stride: usize,
    x0: &Option<Vec<f64>>,
    y0: &Option<Vec<f64>>,
) -> Result<(), Failure> {
    let (model, mut initial) = load(source)?;
    check(&model, false)?;
    if stride == 0 {
        return Err(Failure::Usage("--stride must be at least 1".into()));
    }
    let n = model.n();
    for (flag, values, target) in [
        ("--x0", x0, &mut initial.x0),
        ("--y0", y0, &mut initial.history),
    ] {
        if let Some(v) = values {
            if v.len() != n {
                return Err(Failure::Usage(format!(
                    "{flag} needs {n} comma-separated values, got {}",
                    v.len()
                )));
            }
            target.clone_from(v);
        }
    }
    initial
        .check(n)
        .map_err(|e| Failure::Usage(e.to_string()))?;

    let traj = integrate(&model, &initial, horizon, step)?;
    if let Some(path) = out {
        let sink = open_out(path)?;
        write_csv(&traj, stride, sink).map_err(|e| io_failure(path, e))?;
    }
    let report = classify(&traj, &ClassifyOptions::default())?;

    let mut text = format!("classification = {}\n", report.classification);
    text += &format!(
        "window = [{:.4}, {:.4}]\n",
        report.window.0, report.window.1
    );
    for i in 0..n {
        text += &format!(
            "neuron {}: mean = {:.6e}, amplitude = {:.6e}, min = {:.6e}, max = {:.6e}, oscillating = {}\n",
            i + 1,
            report.mean[i],
            report.amplitude[i],
            report.persistence_floor[i],
            report.peak[i],
            report.neuron_oscillating[i]
        );
    }
    text += &format!("max_drift = {:.6e}\n", report.max_drift);
    text += &format!("step = {:e}\n", traj.step());
    text += &format!("max_clamp = {:e}\n", traj.max_clamp());
    let mut rep = report_sink(out);
    let _ = rep.write_all(text.as_bytes());
    let _ = rep.flush();
    Ok(())
}

fn cmd_equilibrium(source: &Source, seed: u64, out: &Option<String>) -> Result<(), Failure> {
    let (model, _) = load(source)?;
    check(&model, true)?;
    let n = model.n();
    let dfe = disease_free_equilibrium(&model);
    let options = EquilibriumOptions {
        seed,
        ..Default::default()
    };
    let ee = endemic_equilibrium(&model, None, &options)?;

    let point_lines = |label: &str, point: &[f64]| -> String {
        (0..n)
            .map(|i| {
                format!(
                    "{label} neuron {}: x = {:.10e}, y = {:.10e}\n",
                    i + 1,
                    point[i],
                    point[n + i]
                )
            })
            .collect()
    };
    let mut text = point_lines("dfe", &dfe.point);
    if ee.converged {
        text += &point_lines("endemic", &ee.point);
        text += &format!("residual = {:.3e}\n", ee.residual);
        text += &format!("iterations = {}\n", ee.iterations);
        text += &format!("distinct_roots = {}\n", ee.distinct_roots);
        text += &format!("multiple_roots = {}\n", ee.distinct_roots > 1);
    } else {
        text += &format!("no endemic equilibrium found ({} starts)\n", ee.starts);
    }
    let mut rep = report_sink(out);
    let _ = rep.write_all(text.as_bytes());
    let _ = rep.flush();

    if let Some(path) = out {
        let mut lines = Vec::new();
        for (i, v) in dfe.point.iter().enumerate() {
            lines.push(format!("dfe_{}={v:e}", state_name(i, n)));
        }
        lines.push(format!("endemic_found={}", ee.converged));
        if ee.converged {
            for (i, v) in ee.point.iter().enumerate() {
                lines.push(format!("endemic_{}={v:e}", state_name(i, n)));
            }
            lines.push(format!("residual={:e}", ee.residual));
            lines.push(format!("distinct_roots={}", ee.distinct_roots));
        }
        write_payload(path, &lines)?;
    }
    Ok(())
}

fn state_name(c: usize, n: usize) -> String {
    if c < n {
        format!("x_{}", c + 1)
    } else {
        format!("y_{}", c - n + 1)
    }
}

fn threads_from_env() -> Result<Option<usize>, Failure> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(Some(t)),
            _ => Err(Failure::Usage(format!(
                "{THREADS_VAR} must be a positive integer, got '{v}'"
            ))),
        },
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    source: &Source,
    param: Param,
    from: f64,
    to: f64,
    points: usize,
    horizon: f64,
    step: Option<f64>,
    out: &Option<String>,
) -> Result<(), Failure> {
    let Param::Kappa = param;
    let (model, initial) = load(source)?;
    check(&model, false)?;
    let mut options = SweepOptions::new(from, to, points);
    options.horizon = horizon;
    options.step = step;
    options.initial = Some(initial);
    options.threads = threads_from_env()?;
    let result = kappa_sweep(&model, &options)?;

    if let Some(path) = out {
        let sink = open_out(path)?;
        write_sweep_csv(&result, model.n(), sink).map_err(|e| io_failure(path, e))?;
    }
    let mut text = format!(
        "sweep {} over [{from}, {to}], {points} points, horizon {horizon}\n",
        result.parameter
    );
    for (i, onset) in result.onsets.iter().enumerate() {
        text += &match onset {
            None => format!("neuron {}: no onset\n", i + 1),
            Some(o) if o.at_lower_bound => {
                format!("neuron {}: oscillating from {:.4}\n", i + 1, o.value)
            }
            Some(o) => format!(
                "neuron {}: onset = {:.4} (bracket [{:.6}, {:.6}])\n",
                i + 1,
                o.value,
                o.bracket.0,
                o.bracket.1
            ),
        };
    }
    let failed: Vec<String> = result
        .points
        .iter()
        .filter_map(|p| {
            p.error
                .as_ref()
                .map(|e| format!("kappa = {}: {e}", p.kappa))
        })
        .collect();
    let mut rep = report_sink(out);
    let _ = rep.write_all(text.as_bytes());
    let _ = rep.flush();
    if !failed.is_empty() {
        return Err(Failure::Numerical(format!(
            "{} grid point(s) failed:\n  {}",
            failed.len(),
            failed.join("\n  ")
        )));
    }
    Ok(())
}

fn cmd_preset(name: &Option<String>, out: &str) -> Result<(), Failure> {
    let Some(name) = name else {
        let mut text = String::new();
        for full in PRESET_NAMES {
            text += full;
            text += "\n";
        }
        let mut stdout = io::stdout().lock();
        let _ = stdout.write_all(text.as_bytes());
        return Ok(());
    };
    let p = preset(name).map_err(|e| Failure::Usage(e.to_string()))?;
    let text = format!("# preset {}\n{}", p.name, emit_model(&p.model));
    let mut sink = open_out(out)?;
    sink.write_all(text.as_bytes())
        .and_then(|_| sink.flush())
        .map_err(|e| io_failure(out, e))
}

fn cmd_validate(source: &Source, strict: bool) -> Result<(), Failure> {
    let (model, _) = load(source)?;
    check(&model, strict)?;
    println!("ok: {} neurons, {} edges", model.n(), model.edges().len());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::R0 { source, seed, out } => cmd_r0(source, *seed, out),
        Command::Simulate {
            source,
            horizon,
            step,
            out,
            stride,
            x0,
            y0,
        } => cmd_simulate(source, *horizon, *step, out, *stride, x0, y0),
        Command::Equilibrium { source, seed, out } => cmd_equilibrium(source, *seed, out),
        Command::Sweep {
            source,
            param,
            from,
            to,
            points,
            horizon,
            step,
            out,
        } => cmd_sweep(source, *param, *from, *to, *points, *horizon, *step, out),
        Command::Preset { name, out } => cmd_preset(name, out),
        Command::Validate { source, strict } => cmd_validate(source, *strict),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
