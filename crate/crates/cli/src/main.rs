use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fbwave::conditions::{
    check_g_growth, check_necessary_convex, check_sufficient_concave, check_sufficient_convex, ConditionReport,
    GrowthFlags,
};
use fbwave::golden::{run_golden, CaseOutcome};
use fbwave::profile::{Anchor, Junction, Plateau, ResidualStats};
use fbwave::report::{render_json, render_text, to_value, Num};
use fbwave::speeds::{Case, Selector};
use fbwave::{
    admissible_speeds, classify_at_alpha, compute_named_thresholds, direct_z, reconstruct_profile, residual,
    solve_z_for_speed, validate_problem, CoefficientSet, ProblemFile, SharpnessClass, SolverConfig, SpeedReport,
    ThresholdSet,
};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "fbwave", version, about = "Wavefronts for reaction-convection with sign-changing diffusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Problem file (JSON).
    #[arg(long, global = true)]
    problem: Option<PathBuf>,
    /// Bisection tolerance on speeds.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Grid for assumption checks and suprema.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Directory for reports and CSV.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Check the standing assumptions on the coefficients.
    Validate,
    /// The four named thresholds with their bounds.
    Thresholds,
    /// The admissible speed set.
    Speeds,
    /// Reconstruct the profile for one admissible speed.
    Profile {
        #[arg(long, allow_hyphen_values = true)]
        c: f64,
        /// Member of the family, `z(gamma) = lambda D(gamma)`.
        #[arg(long, allow_hyphen_values = true)]
        lambda: Option<f64>,
        /// Level placed at `xi = 0`.
        #[arg(long)]
        anchor: Option<f64>,
    },
    /// Behaviour of the profile where it crosses `alpha`.
    Classify {
        #[arg(long, allow_hyphen_values = true)]
        c: f64,
    },
    /// Existence conditions.
    Check {
        #[arg(long, value_enum)]
        which: Option<Which>,
    },
    /// Run the bundled reference corpus.
    Golden,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Which {
    NecessaryConvex,
    SufficientConvex,
    SufficientConcave,
    Growth,
}

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    NotAdmissible(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Invalid(_) => 2,
            Failure::NotAdmissible(_) => 3,
            Failure::Numerical(_) => 4,
        }
    }
}

impl From<fbwave::Error> for Failure {
    fn from(e: fbwave::Error) -> Self {
        use fbwave::Error as E;
        let msg = e.to_string();
        match e {
            E::Parse(_) | E::InvalidProblem(_) | E::Precondition(_) => Failure::Invalid(msg),
            E::NotAdmissible { .. } => Failure::NotAdmissible(msg),
            _ => Failure::Numerical(msg),
        }
    }
}

/// What a command produced: the report, an optional CSV, and the exit
/// status it warrants.
struct Output {
    name: &'static str,
    report: serde_json::Value,
    csv: Option<String>,
    code: u8,
}

impl Output {
    fn ok(name: &'static str, report: serde_json::Value) -> Output {
        Output { name, report, csv: None, code: 0 }
    }
}

struct Loaded {
    file: ProblemFile,
    cs: CoefficientSet,
    cfg: SolverConfig,
}

fn load(cli: &Cli) -> Result<Loaded, Failure> {
    let path = cli.problem.as_deref().ok_or_else(|| Failure::Invalid("--problem is required".into()))?;
    let file = ProblemFile::load(path)?;
    let cs = file.coefficients()?;
    let mut cfg = file.config();
    if let Some(t) = cli.tol {
        cfg.tol = t;
    }
    if let Some(g) = cli.grid {
        cfg.grid = g;
    }
    Ok(Loaded { file, cs, cfg })
}

/// Speed analysis needs the standing assumptions.
fn require_valid(l: &Loaded) -> Result<(), Failure> {
    let v = validate_problem(&l.cs, l.cfg.grid);
    if v.passed() {
        return Ok(());
    }
    let names: Vec<_> = v.failures().map(|c| format!("{} ({})", c.name, c.detail)).collect();
    Err(Failure::Invalid(format!("assumptions fail: {}", names.join("; "))))
}

#[derive(Serialize)]
struct ThresholdReport {
    case: Case,
    thresholds: ThresholdSet,
}

#[derive(Serialize)]
struct ProfileReport {
    c: Num,
    lambda: Option<Num>,
    z_gamma: Num,
    anchor: AnchorReport,
    samples: usize,
    xi_min: Num,
    xi_max: Num,
    junctions: Vec<Junction>,
    plateaus: Vec<Plateau>,
    residual: ResidualStats,
    sharpness: Option<SharpnessClass>,
    csv: Option<String>,
}

#[derive(Serialize)]
struct AnchorReport {
    phi: Num,
    xi: Num,
}

#[derive(Serialize)]
struct CheckReport {
    conditions: Vec<ConditionReport>,
    growth: Option<GrowthFlags>,
}

#[derive(Serialize)]
struct GoldenReport {
    passed: bool,
    cases: Vec<CaseOutcome>,
}

fn speeds(l: &Loaded) -> Result<SpeedReport, Failure> {
    require_valid(l)?;
    Ok(admissible_speeds(&l.cs, &l.cfg)?)
}

fn profile(l: &Loaded, c: f64, lambda: Option<f64>, anchor: Option<f64>) -> Result<Output, Failure> {
    let selector = lambda.map_or(Selector::Canonical, Selector::Lambda);
    let (z, report) = if l.file.direct {
        (direct_z(&l.cs, c, selector, &l.cfg)?, None)
    } else {
        let r = speeds(l)?;
        (solve_z_for_speed(&l.cs, &r, c, selector, &l.cfg)?, Some(r))
    };
    let anchor = anchor.map_or(Anchor::default_for(&l.cs), |phi| Anchor { phi, xi: 0.0 });
    let p = reconstruct_profile(&l.cs, &z, z.c, Some(anchor))?;
    let sharpness = report.as_ref().map(|r| classify_at_alpha(&l.cs, z.c, r)).transpose()?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Failure::Io(e.to_string());
    w.write_record(["xi", "phi", "dphi"]).map_err(io)?;
    for s in &p.samples {
        w.write_record([s.xi, s.phi, s.dphi].map(|v| format!("{v:.16e}"))).map_err(io)?;
    }
    let csv = String::from_utf8(w.into_inner().map_err(|e| Failure::Io(e.to_string()))?).expect("ascii");
    let (xi_min, xi_max) = p.xi_range();
    let rep = ProfileReport {
        c: Num(z.c),
        lambda: z.lambda.map(Num),
        z_gamma: Num(z.z_gamma),
        anchor: AnchorReport { phi: Num(anchor.phi), xi: Num(anchor.xi) },
        samples: p.samples.len(),
        xi_min: Num(xi_min),
        xi_max: Num(xi_max),
        junctions: p.junctions.clone(),
        plateaus: p.plateaus.clone(),
        residual: residual(&p, &l.cs, z.c),
        sharpness,
        csv: None,
    };
    Ok(Output { name: "profile", report: to_value(&rep), csv: Some(csv), code: 0 })
}

fn check(l: &Loaded, which: Option<Which>) -> CheckReport {
    let cs = &l.cs;
    let grid = l.cfg.grid;
    let mut conditions = Vec::new();
    let all = which.is_none();
    let wants = |w: Which| all || which == Some(w);
    if wants(Which::NecessaryConvex) {
        conditions.push(check_necessary_convex(cs));
    }
    if wants(Which::SufficientConvex) {
        conditions.push(check_sufficient_convex(cs, grid));
    }
    if wants(Which::SufficientConcave) {
        conditions.push(check_sufficient_concave(cs, grid));
    }
    let growth = wants(Which::Growth).then(|| check_g_growth(cs));
    CheckReport { conditions, growth }
}

fn run(cli: &Cli) -> Result<Output, Failure> {
    match &cli.command {
        Command::Golden => {
            let cases = run_golden();
            let passed = cases.iter().all(|c| c.passed());
            let report = to_value(&GoldenReport { passed, cases });
            Ok(Output { name: "golden", report, csv: None, code: if passed { 0 } else { 4 } })
        }
        Command::Validate => {
            let l = load(cli)?;
            let v = validate_problem(&l.cs, l.cfg.grid);
            Ok(Output { name: "validate", report: to_value(&v), csv: None, code: if v.passed() { 0 } else { 2 } })
        }
        Command::Thresholds => {
            let l = load(cli)?;
            require_valid(&l)?;
            let thresholds = compute_named_thresholds(&l.cs, &l.cfg)?;
            Ok(Output::ok("thresholds", to_value(&ThresholdReport { case: Case::of(&l.cs), thresholds })))
        }
        Command::Speeds => {
            let l = load(cli)?;
            Ok(Output::ok("speeds", to_value(&speeds(&l)?)))
        }
        Command::Profile { c, lambda, anchor } => profile(&load(cli)?, *c, *lambda, *anchor),
        Command::Classify { c } => {
            let l = load(cli)?;
            let r = speeds(&l)?;
            Ok(Output::ok("classify", to_value(&classify_at_alpha(&l.cs, *c, &r)?)))
        }
        Command::Check { which } => {
            let l = load(cli)?;
            Ok(Output::ok("check", to_value(&check(&l, *which))))
        }
    }
}

fn write(path: &Path, body: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, body).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

/// Paths from `--out` win over the ones in the problem file.
fn emit(cli: &Cli, mut out: Output) -> Result<u8, Failure> {
    let from_file = cli.problem.as_deref().and_then(|p| ProblemFile::load(p).ok()).map(|f| f.output);
    let ext = if cli.format == Format::Json { "json" } else { "txt" };
    let csv_path = match (&cli.out, &from_file) {
        (Some(d), _) => Some(d.join("profile.csv")),
        (None, Some(o)) => o.profile_csv.as_ref().map(PathBuf::from),
        _ => None,
    };
    if let Some(csv) = &out.csv {
        match &csv_path {
            Some(p) => {
                write(p, csv)?;
                out.report["csv"] = serde_json::Value::String(p.display().to_string());
            }
            None => eprintln!("profile CSV not written: give --out or output.profile_csv"),
        }
    }
    let body = match cli.format {
        Format::Json => render_json(&out.report),
        Format::Text => render_text(&out.report),
    };
    let report_path = match (&cli.out, &from_file) {
        (Some(d), _) => Some(d.join(format!("{}.{ext}", out.name))),
        (None, Some(o)) => o.report.as_ref().map(PathBuf::from),
        _ => None,
    };
    if let Some(p) = report_path {
        write(&p, &body)?;
    }
    print!("{body}");
    if out.code != 0 {
        eprintln!("{} finished with exit status {}", out.name, out.code);
    }
    Ok(out.code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli).and_then(|o| emit(&cli, o)) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
