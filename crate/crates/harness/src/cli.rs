use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use wallmodel_core::eqwm::EqwmMethod;
use wallmodel_core::quadrature::build_gll_rule;
use wallmodel_core::surface::{generate_scenario, ScenarioParams};

use crate::apriori::{run_apriori, APRIORI_HEADER};
use crate::bench::{loglog_slope, records_to_csv, run_benchmarks, BenchSweep};
use crate::config::{DriverConfig, ModelSelector};
use crate::coupled::{run_coupled_loop, OuterFlow};
use crate::gradtest::run_gradtest;
use crate::profile::{ingest_profile, ProfileFormat};
use crate::HarnessError;

/// Output directory for CSV files.
pub const OUTPUT_DIR_VAR: &str = "WMKIT_OUTPUT_DIR";
/// Fallback Re_τ = 1000 reference profile (`y⁺ u⁺` columns).
pub const DNS_PROFILE_VAR: &str = "WM_DNS_RE1000";

/// Largest acceptable a priori τ_w error.
pub const APRIORI_TAU_W_TOLERANCE: f64 = 0.03;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Values taken from the process environment.
#[derive(Debug, Clone, Default)]
pub struct CliEnv {
    pub output_dir: Option<PathBuf>,
    pub dns_profile: Option<PathBuf>,
}

impl CliEnv {
    pub fn from_process() -> Self {
        Self {
            output_dir: std::env::var_os(OUTPUT_DIR_VAR).map(PathBuf::from),
            dns_profile: std::env::var_os(DNS_PROFILE_VAR).map(PathBuf::from),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "wmkit",
    version,
    about = "Wall-model validation, coupling and benchmark driver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Drive one model with a reference profile and report the τ_w error.
    Apriori(AprioriArgs),
    /// Cost benchmarks of the equilibrium solvers.
    Bench(BenchArgs),
    /// Integral-model stepping loop against a prescribed outer flow.
    Coupled(CoupledArgs),
    /// Surface-gradient pathology checks.
    Gradtest(GradtestArgs),
    /// GLL nodes and weights as CSV.
    Quadtable(QuadArgs),
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// `key = value` file applied over the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AprioriArgs {
    #[command(flatten)]
    cfg: ConfigArg,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    retau: Option<f64>,
    #[arg(long)]
    profile: Option<PathBuf>,
    /// `yplus` or `ydelta`.
    #[arg(long)]
    profile_format: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    h_wm: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    cfg: ConfigArg,
    /// Comma-separated equilibrium models.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    retau: Option<Vec<f64>>,
    /// Fixed counts instead of each model's optimal count.
    #[arg(long, value_delimiter = ',')]
    counts: Option<Vec<usize>>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    warmups: Option<usize>,
}

#[derive(Debug, Args)]
struct CoupledArgs {
    #[command(flatten)]
    cfg: ConfigArg,
    #[arg(long)]
    scenario: Option<String>,
    /// `uniform`, `sinusoidal` or `pulse`.
    #[arg(long)]
    flow: Option<String>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    filter_passes: Option<usize>,
    /// Original sublayer formulation.
    #[arg(long)]
    iwm_legacy_sublayer: bool,
}

#[derive(Debug, Args)]
struct GradtestArgs {
    #[command(flatten)]
    cfg: ConfigArg,
    #[arg(long)]
    scenario: Option<String>,
    /// `naive` or `global-vector`.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    filter_passes: Option<usize>,
}

#[derive(Debug, Args)]
struct QuadArgs {
    #[arg(long)]
    q: usize,
}

enum Failure {
    Usage(String),
    Validation(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(_) | HarnessError::Parse { .. } => Failure::Usage(e.to_string()),
            other => Failure::Validation(other.to_string()),
        }
    }
}

fn load_config(arg: &ConfigArg) -> Result<DriverConfig, Failure> {
    let mut c = DriverConfig::default();
    if let Some(p) = &arg.config {
        let text = std::fs::read_to_string(p)
            .map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
        c.apply_text(&text)?;
    }
    Ok(c)
}

fn set_opt<T: ToString>(c: &mut DriverConfig, key: &str, v: &Option<T>) -> Result<(), Failure> {
    if let Some(v) = v {
        c.set(key, &v.to_string())?;
    }
    Ok(())
}

fn write_output(env: &CliEnv, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    let dir = env.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)
        .map_err(|e| Failure::Validation(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn apriori(a: &AprioriArgs, env: &CliEnv, out: &mut dyn Write) -> Result<bool, Failure> {
    let mut c = load_config(&a.cfg)?;
    set_opt(&mut c, "model", &a.model)?;
    set_opt(&mut c, "re_tau", &a.retau)?;
    set_opt(&mut c, "profile_format", &a.profile_format)?;
    set_opt(&mut c, "n", &a.n)?;
    set_opt(&mut c, "h_wm_over_delta", &a.h_wm)?;
    set_opt(&mut c, "steps", &a.steps)?;
    set_opt(&mut c, "dt", &a.dt)?;
    if let Some(p) = &a.profile {
        c.profile = Some(p.clone());
    }
    c.validate()?;
    let (path, format) = match (&c.profile, &env.dns_profile) {
        (Some(p), _) => (p.clone(), c.profile_format),
        (None, Some(p)) => (p.clone(), ProfileFormat::YPlusUPlus),
        (None, None) => {
            return Err(Failure::Usage(format!(
                "no reference profile: pass --profile or set {DNS_PROFILE_VAR}"
            )))
        }
    };
    let profile = ingest_profile(&path, format, c.re_tau).map_err(|e| match e {
        HarnessError::Io(m) => Failure::Usage(m),
        other => Failure::Validation(other.to_string()),
    })?;
    let r = run_apriori(&c, &profile)?;
    let csv = format!("{APRIORI_HEADER}\n{}\n", r.csv_row());
    let file = write_output(env, "apriori.csv", &csv)?;
    let pass = r.tau_w_rel_error < APRIORI_TAU_W_TOLERANCE;
    let _ = writeln!(
        out,
        "apriori model={} re_tau={} points={} u_tau={:.6} tau_w_error={:.4}% profile_l2={:.4e} max_dev={:.4}% result={} csv={}",
        r.model.label(),
        r.re_tau,
        r.points,
        r.u_tau,
        100.0 * r.tau_w_rel_error,
        r.profile_l2_error,
        100.0 * r.max_profile_deviation,
        if pass { "PASS" } else { "FAIL" },
        file.display()
    );
    Ok(pass)
}

fn bench(a: &BenchArgs, env: &CliEnv, out: &mut dyn Write) -> Result<bool, Failure> {
    let mut c = load_config(&a.cfg)?;
    set_opt(&mut c, "reps", &a.reps)?;
    set_opt(&mut c, "warmups", &a.warmups)?;
    c.validate()?;
    let mut sweep = BenchSweep {
        reps: c.reps,
        warmups: c.warmups,
        counts: a.counts.clone(),
        ..BenchSweep::default()
    };
    if let Some(models) = &a.models {
        sweep.methods = models
            .iter()
            .map(|m| {
                ModelSelector::parse(m)
                    .and_then(|s| s.eqwm_method())
                    .ok_or_else(|| Failure::Usage(format!("`{m}` is not an equilibrium model")))
            })
            .collect::<Result<_, _>>()?;
    }
    if let Some(r) = &a.retau {
        if r.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Failure::Usage("re_tau values must be positive".into()));
        }
        sweep.re_taus = r.clone();
    }
    let records = run_benchmarks(&sweep)?;
    let file = write_output(env, "bench.csv", &records_to_csv(&records, true))?;
    for &m in &sweep.methods {
        let rs: Vec<_> = records.iter().filter(|r| r.method == m).collect();
        let _ = write!(out, "bench model={}", m.label());
        if sweep.counts.is_none() && sweep.re_taus.len() > 1 {
            let x: Vec<f64> = rs.iter().map(|r| r.re_tau).collect();
            let n: Vec<f64> = rs.iter().map(|r| r.n as f64).collect();
            let _ = write!(out, " optimal_n_slope={:.3}", loglog_slope(&x, &n));
        }
        if let Some(counts) = &sweep.counts {
            if counts.len() > 1 && sweep.re_taus.len() == 1 {
                let n: Vec<f64> = rs.iter().map(|r| r.n as f64).collect();
                let f: Vec<f64> = rs.iter().map(|r| r.flops as f64).collect();
                let _ = write!(out, " flops_slope={:.3}", loglog_slope(&n, &f));
            }
        }
        let _ = writeln!(out);
    }
    if sweep.counts.is_none() && sweep.methods.contains(&EqwmMethod::FiniteVolume) {
        for &re in &sweep.re_taus {
            let fv = records
                .iter()
                .find(|r| r.re_tau == re && r.method == EqwmMethod::FiniteVolume);
            for r in records
                .iter()
                .filter(|r| r.re_tau == re && r.method != EqwmMethod::FiniteVolume)
            {
                if let Some(fv) = fv {
                    let _ = writeln!(
                        out,
                        "speedup re_tau={re} {}/fv flops={:.2} wall_time={:.2}",
                        r.method.label(),
                        fv.flops as f64 / r.flops as f64,
                        fv.wall_time_ns / r.wall_time_ns
                    );
                }
            }
        }
    }
    let _ = writeln!(out, "csv={}", file.display());
    Ok(true)
}

fn coupled(a: &CoupledArgs, env: &CliEnv, out: &mut dyn Write) -> Result<bool, Failure> {
    let mut c = load_config(&a.cfg)?;
    if !matches!(c.model, ModelSelector::Iwm | ModelSelector::IwmLegacy) {
        c.model = ModelSelector::Iwm;
    }
    set_opt(&mut c, "scenario", &a.scenario)?;
    set_opt(&mut c, "flow", &a.flow)?;
    set_opt(&mut c, "steps", &a.steps)?;
    set_opt(&mut c, "dt", &a.dt)?;
    set_opt(&mut c, "seed", &a.seed)?;
    set_opt(&mut c, "gradient_mode", &a.mode)?;
    set_opt(&mut c, "filter_passes", &a.filter_passes)?;
    if a.iwm_legacy_sublayer {
        c.model = ModelSelector::IwmLegacy;
    }
    c.validate()?;
    let scenario = coupled_scenario(&c)?;
    let flow = OuterFlow::from_config(&c, &scenario);
    let run = run_coupled_loop(&c, &scenario, &flow)?;
    let file = write_output(env, "coupled.csv", &run.to_csv())?;
    let stages: String = std::iter::once("step,stage\n".to_string())
        .chain(
            run.stage_log
                .iter()
                .map(|(s, st)| format!("{s},{}\n", st.label())),
        )
        .collect();
    write_output(env, "coupled_stages.csv", &stages)?;
    let last = run.final_states.first();
    let _ = writeln!(
        out,
        "coupled scenario={} flow={} model={} steps={} faces={} fallbacks={} homogeneity_defect={:.3e} u_tau[0]={:.6} csv={}",
        c.scenario.label(),
        c.flow.label(),
        c.model.label(),
        c.steps,
        scenario.mesh.wall_faces.len(),
        run.fallbacks,
        run.max_homogeneity_defect,
        last.map_or(f64::NAN, |s| s.params.u_tau),
        file.display()
    );
    Ok(true)
}

/// Scenario mesh for the coupled loop: cubic cells of height `2 h_wm`.
pub fn coupled_scenario(
    c: &DriverConfig,
) -> Result<wallmodel_core::surface::Scenario, HarnessError> {
    let mut p = ScenarioParams::default_for(c.scenario);
    let s = 2.0 * c.h_wm();
    p.spacing = [s, s, s];
    Ok(generate_scenario(c.scenario, p)?)
}

fn gradtest(a: &GradtestArgs, env: &CliEnv, out: &mut dyn Write) -> Result<bool, Failure> {
    let mut c = load_config(&a.cfg)?;
    set_opt(&mut c, "scenario", &a.scenario)?;
    set_opt(&mut c, "gradient_mode", &a.mode)?;
    set_opt(&mut c, "filter_passes", &a.filter_passes)?;
    c.validate()?;
    let r = run_gradtest(c.scenario, c.gradient_mode, c.filter_passes)?;
    let file = write_output(env, "gradtest.csv", &r.diagnostics_csv())?;
    let _ = writeln!(out, "{} csv={}", r.summary(), file.display());
    Ok(r.pass)
}

fn quadtable(a: &QuadArgs, out: &mut dyn Write) -> Result<bool, Failure> {
    let rule = build_gll_rule(a.q).map_err(|e| Failure::Usage(e.to_string()))?;
    let _ = write!(out, "{}", rule.to_csv());
    Ok(true)
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// exit code: 0 success, 1 validation failure, 2 usage error.
pub fn run_cli<I, T>(args: I, env: &CliEnv, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{}", e.render());
                return EXIT_OK;
            }
            let _ = write!(err, "{}", e.render());
            return EXIT_USAGE;
        }
    };
    let result = match &cli.command {
        Command::Apriori(a) => apriori(a, env, out),
        Command::Bench(a) => bench(a, env, out),
        Command::Coupled(a) => coupled(a, env, out),
        Command::Gradtest(a) => gradtest(a, env, out),
        Command::Quadtable(a) => quadtable(a, out),
    };
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_VALIDATION,
        Err(Failure::Validation(m)) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_VALIDATION
        }
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "usage error: {m}");
            EXIT_USAGE
        }
    }
}

/// Reads a config file and returns the merged configuration.
pub fn config_from_file(path: &Path) -> Result<DriverConfig, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    DriverConfig::from_text(&text)
}
