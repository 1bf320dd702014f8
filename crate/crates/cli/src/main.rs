#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod plots;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Serialize;

use lftnav_core::artifact::{fmt_f64, GainArtifact};
use lftnav_core::cr3bp::lagrange_points;
use lftnav_core::runtime::{metrics, run_closed_loop, write_result_csv};
use lftnav_core::synthesis::{certify_random, dk_iterate, synthesize_hinf, CertificationReport, SynthesisError, SynthesisProblem};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "lftnav", version, about = "Robust bearing-only navigation in the Earth–Moon CR3BP")]
struct Cli {
    /// Scenario file (JSON); the bundled Earth–Moon scenario when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Gain artifact path; defaults to `<out-dir>/<gain_file>`.
    #[arg(long, global = true)]
    gain: Option<PathBuf>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    method: Option<MethodArg>,
    /// Grid points per axis.
    #[arg(long, global = true)]
    grid: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Hinf,
    Dk,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize and certify an observer gain.
    Synthesize,
    /// Run the closed-loop scenario with a stored gain.
    Simulate,
    /// Re-certify a stored gain at random points of the box.
    Validate,
    /// Print the equilibrium points for the configured π2.
    Lagrange,
}

enum Failure {
    Config(String),
    MissingArtifact(String),
    Certification(String),
    Other(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Other(_) => 1,
            Failure::Config(_) => 2,
            Failure::MissingArtifact(_) => 3,
            Failure::Certification(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::MissingArtifact(m) => write!(f, "missing artifact: {m}"),
            Failure::Certification(m) => write!(f, "certification failure: {m}"),
            Failure::Other(e) => write!(f, "{e:#}"),
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Other(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(Failure::Config)?,
        None => RunConfig::earth_moon(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(m) = cli.method {
        cfg.synthesis.method = match m {
            MethodArg::Hinf => "hinf".into(),
            MethodArg::Dk => "dk".into(),
        };
    }
    if let Some(g) = cli.grid {
        cfg.synthesis.grid = g;
    }
    if let Some(d) = &cli.out_dir {
        cfg.output.out_dir = d.clone();
    }
    cfg.validate().map_err(Failure::Config)?;
    Ok(cfg)
}

fn gain_path(cli: &Cli, cfg: &RunConfig) -> PathBuf {
    cli.gain.clone().unwrap_or_else(|| cfg.gain_path())
}

fn load_gain(path: &Path, cfg: &RunConfig) -> Result<GainArtifact, Failure> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Failure::MissingArtifact(format!("{} not found", path.display())))
        }
        Err(e) => return Err(anyhow::Error::new(e).context(path.display().to_string()).into()),
    };
    let art = GainArtifact::from_json(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    if art.config_hash != cfg.certificate_hash() {
        return Err(Failure::Certification(format!(
            "{} was certified for a different scenario (hash {} vs {})",
            path.display(),
            art.config_hash,
            cfg.certificate_hash()
        )));
    }
    Ok(art)
}

fn problem(cfg: &RunConfig) -> Result<SynthesisProblem<f64>, Failure> {
    let spec = cfg.noise_spec().map_err(Failure::Config)?;
    SynthesisProblem::new(&cfg.parameter_box(), cfg.pi2, &spec, &cfg.weight_box())
        .map_err(|e| Failure::Config(format!("{e} (a degenerate box needs an explicit weight_box)")))
}

fn write(path: &Path, contents: &str) -> Outcome {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| anyhow::Error::new(e).context(dir.display().to_string()))?;
        }
    }
    fs::write(path, contents).map_err(|e| anyhow::Error::new(e).context(path.display().to_string()))?;
    Ok(())
}

#[derive(Serialize)]
struct ViolationRow {
    sigma: String,
    psi: String,
    on_grid: bool,
    hurwitz: bool,
    brl_max_eig: String,
    norm: Option<String>,
}

#[derive(Serialize)]
struct ReportJson {
    method: String,
    gamma: String,
    grid: Vec<[String; 2]>,
    grid_passed: usize,
    grid_points: usize,
    random_samples: usize,
    random_passed: usize,
    random_pass_rate: f64,
    worst_brl_eig: String,
    worst_norm_ratio: String,
    violations: Vec<ViolationRow>,
}

fn report_json(art: &GainArtifact, r: &CertificationReport<f64>) -> String {
    let rep = ReportJson {
        method: art.gain.method.as_str().into(),
        gamma: fmt_f64(r.gamma),
        grid: art.gain.grid.iter().map(|p| [fmt_f64(p.sigma), fmt_f64(p.psi)]).collect(),
        grid_passed: r.grid_passed,
        grid_points: r.grid_points,
        random_samples: r.random_samples,
        random_passed: r.random_passed,
        random_pass_rate: r.random_pass_rate(),
        worst_brl_eig: fmt_f64(r.worst_brl_eig),
        worst_norm_ratio: fmt_f64(r.worst_norm_ratio),
        violations: r
            .violations
            .iter()
            .map(|v| ViolationRow {
                sigma: fmt_f64(v.rho.sigma),
                psi: fmt_f64(v.rho.psi),
                on_grid: v.on_grid,
                hurwitz: v.hurwitz,
                brl_max_eig: fmt_f64(v.brl_max_eig),
                norm: v.norm.map(fmt_f64),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&rep).expect("report serializes");
    s.push('\n');
    s
}

fn cmd_synthesize(cli: &Cli) -> Outcome {
    let cfg = load_config(cli)?;
    let prob = problem(&cfg)?;
    let opts = cfg.synthesis_options();
    let result = match cfg.synthesis.method.as_str() {
        "dk" => dk_iterate(&prob, &opts).map(|r| {
            info!("scaled levels {:?}, scales {:?}", r.history, r.scales);
            r.gain
        }),
        _ => synthesize_hinf(&prob, &opts),
    };
    let gain = match result {
        Ok(g) => g,
        Err(e @ SynthesisError::Infeasible { .. }) => return Err(Failure::Certification(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let art = GainArtifact { gain, bounds: cfg.parameter_box(), config_hash: cfg.certificate_hash() };
    let path = gain_path(cli, &cfg);
    write(&path, &art.to_json())?;
    let report = certify_random(&art.gain, &prob, cfg.synthesis.validation_samples, cfg.seed)?;
    write(&cfg.output.out_dir.join("certification.json"), &report_json(&art, &report))?;
    println!("method      {}", art.gain.method.as_str());
    println!("gamma       {:e}", art.gain.gamma);
    println!("grid        {}/{} certified", report.grid_passed, report.grid_points);
    println!("random      {}/{} ({:.4}%)", report.random_passed, report.random_samples, 100.0 * report.random_pass_rate());
    println!("artifact    {}", path.display());
    if !report.violations.is_empty() {
        warn!("{} points fail the a posteriori check; refine the grid", report.violations.len());
    }
    Ok(())
}

fn cmd_simulate(cli: &Cli) -> Outcome {
    let cfg = load_config(cli)?;
    let art = load_gain(&gain_path(cli, &cfg), &cfg)?;
    let sim = cfg.sim_config(art.gain);
    let result = run_closed_loop(&sim)?;
    let m = metrics(&result);
    let dir = &cfg.output.out_dir;
    let mut csv = Vec::new();
    write_result_csv(&result, &mut csv)?;
    write(&dir.join("trajectory.csv"), std::str::from_utf8(&csv)?)?;

    #[derive(Serialize)]
    struct Summary {
        seed: u64,
        rho_schedule: String,
        samples: usize,
        initial_error: String,
        rms_steady_state: String,
        max_steady_state: String,
        settling_time: Option<String>,
        range_correlation: Option<String>,
    }
    let summary = Summary {
        seed: cfg.seed,
        rho_schedule: sim.schedule.as_str().into(),
        samples: result.len(),
        initial_error: fmt_f64(m.initial_error),
        rms_steady_state: fmt_f64(m.rms),
        max_steady_state: fmt_f64(m.max),
        settling_time: m.settling_time.map(fmt_f64),
        range_correlation: m.range_correlation.map(fmt_f64),
    };
    let mut s = serde_json::to_string_pretty(&summary)?;
    s.push('\n');
    write(&dir.join("summary.json"), &s)?;
    if cfg.output.plot_scripts {
        write(&dir.join(plots::TRAJECTORY_SCRIPT), &plots::trajectory_script("trajectory.csv", cfg.pi2))?;
        write(&dir.join(plots::ERRORS_SCRIPT), &plots::errors_script("trajectory.csv"))?;
    }
    println!("samples     {}", result.len());
    println!("rms         {:e}", m.rms);
    println!("max         {:e}", m.max);
    match m.settling_time {
        Some(t) => println!("settling    {t}"),
        None => println!("settling    not reached"),
    }
    println!("output      {}", dir.display());
    Ok(())
}

fn cmd_validate(cli: &Cli) -> Outcome {
    let cfg = load_config(cli)?;
    let art = load_gain(&gain_path(cli, &cfg), &cfg)?;
    let prob = problem(&cfg)?;
    let r = certify_random(&art.gain, &prob, cfg.synthesis.validation_samples, cfg.seed)?;
    let flag = |ok: bool| if ok { "PASS" } else { "FAIL" };
    let hurwitz_fail = r.violations.iter().filter(|v| !v.hurwitz).count();
    let brl_fail = r.violations.iter().filter(|v| !(v.brl_max_eig < 0.0)).count();
    let norm_fail = r.violations.iter().filter(|v| v.hurwitz && v.brl_max_eig < 0.0).count();
    println!("check       result  failures");
    println!("grid        {}    {}", flag(r.grid_ok()), r.grid_points - r.grid_passed);
    println!("hurwitz     {}    {}", flag(hurwitz_fail == 0), hurwitz_fail);
    println!("brl         {}    {}", flag(brl_fail == 0), brl_fail);
    println!("norm        {}    {}", flag(norm_fail == 0), norm_fail);
    println!("samples     {}/{} ({:.4}%)", r.random_passed, r.random_samples, 100.0 * r.random_pass_rate());
    if r.violations.is_empty() {
        return Ok(());
    }
    for v in r.violations.iter().take(20) {
        println!(
            "violation   sigma={:.6} psi={:.6} hurwitz={} brl_max_eig={:e}",
            v.rho.sigma, v.rho.psi, v.hurwitz, v.brl_max_eig
        );
    }
    if r.violations.len() > 20 {
        println!("violation   ... {} more", r.violations.len() - 20);
    }
    Err(Failure::Certification(format!("{} violating points", r.violations.len())))
}

fn cmd_lagrange(cli: &Cli) -> Outcome {
    let cfg = load_config(cli)?;
    for (i, (x, y)) in lagrange_points(cfg.pi2).iter().enumerate() {
        println!("L{}  x = {:+.12}  y = {:+.12}", i + 1, x, y);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("NAV_LOG_LEVEL", "warn")).init();
    let cli = Cli::parse();
    let out = match cli.command {
        Command::Synthesize => cmd_synthesize(&cli),
        Command::Simulate => cmd_simulate(&cli),
        Command::Validate => cmd_validate(&cli),
        Command::Lagrange => cmd_lagrange(&cli),
    };
    match out {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("lftnav: {f}");
            ExitCode::from(f.code())
        }
    }
}
