//! Command-line front end: argument parsing, config files, CSV and console
//! output. The binary only forwards to [`main_with_args`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::experiments::{self, ErConfig, ErrorRecord, ManufacturedCase, StudyConfig, StudyResult};
use crate::mesh::{MeshStats, Triangulation};
use crate::norms::Case;
use crate::spaces::MixedPair;

pub const EXIT_OK: u8 = 0;
pub const EXIT_NUMERICAL: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

pub const CSV_HEADER: &str = "level,h,e_v,eoc_v,e_q,eoc_q,theory_v,theory_q";

#[derive(Debug, Parser)]
#[command(name = "pxflow", version, about = "Finite elements for p(x)-Navier-Stokes flows")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Manufactured-solution convergence study.
    Converge(ConvergeArgs),
    /// Electro-rheological flow around two electrodes.
    ErDemo(ErDemoArgs),
    /// Mesh statistics and conformity check.
    MeshInfo {
        file: PathBuf,
    },
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct ConvergeArgs {
    /// key=value file; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// mini or taylor-hood.
    #[arg(long)]
    pub element: Option<String>,
    /// One value or a comma-separated list; each value is an independent job.
    #[arg(long)]
    pub p_minus: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub case: Option<u8>,
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub mu0: Option<f64>,
    /// Drop the convective term.
    #[arg(long)]
    pub stokes: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Number of p_minus values solved concurrently.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, clap::Args)]
pub struct ErDemoArgs {
    /// Only run the comparison without electric field.
    #[arg(long)]
    pub no_field: bool,
    /// Mesh in node/ele format; the bundled mesh when omitted.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Fully validated convergence configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeConfig {
    pub pair: MixedPair,
    pub p_minus: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub case: Case,
    pub levels: usize,
    pub delta: f64,
    pub mu0: f64,
    pub convection: bool,
    pub out: PathBuf,
    pub jobs: usize,
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse { line: i + 1, message: format!("expected key=value, got `{line}`") })?;
        let key = k.trim().replace('-', "_");
        if map.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Parse { line: i + 1, message: format!("duplicate key `{key}`") });
        }
    }
    Ok(map)
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad p_minus value `{t}`"))))
        .collect()
}

impl ConvergeConfig {
    /// Merges flags over an optional config file and validates every
    /// parameter.
    pub fn resolve(args: &ConvergeArgs) -> Result<Self> {
        let file = match &args.config {
            Some(p) => parse_key_values(&std::fs::read_to_string(p)?)?,
            None => BTreeMap::new(),
        };
        const KEYS: [&str; 12] = [
            "element", "p_minus", "alpha", "beta", "gamma", "case", "levels", "delta", "mu0", "convection",
            "out", "jobs",
        ];
        if let Some(k) = file.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown config key `{k}`")));
        }
        let num = |flag: Option<f64>, key: &str, default: Option<f64>| -> Result<f64> {
            match (flag, file.get(key)) {
                (Some(v), _) => Ok(v),
                (None, Some(s)) => s.parse().map_err(|_| Error::Config(format!("bad value for {key}: `{s}`"))),
                (None, None) => default.ok_or_else(|| Error::Config(format!("missing {key}"))),
            }
        };
        let int = |flag: Option<usize>, key: &str, default: usize| -> Result<usize> {
            match (flag, file.get(key)) {
                (Some(v), _) => Ok(v),
                (None, Some(s)) => s.parse().map_err(|_| Error::Config(format!("bad value for {key}: `{s}`"))),
                (None, None) => Ok(default),
            }
        };
        let element = args.element.clone().or_else(|| file.get("element").cloned()).unwrap_or("mini".into());
        let pair: MixedPair = element.parse()?;
        let p_minus = match (&args.p_minus, file.get("p_minus")) {
            (Some(s), _) | (None, Some(s)) => parse_list(s)?,
            (None, None) => return Err(Error::Config("missing p_minus".into())),
        };
        let case_idx = int(args.case.map(usize::from), "case", 1)?;
        let case = Case::from_index(u8::try_from(case_idx).unwrap_or(u8::MAX))?;
        let convection = if args.stokes {
            false
        } else {
            match file.get("convection").map(String::as_str) {
                None | Some("true") | Some("1") => true,
                Some("false") | Some("0") => false,
                Some(s) => return Err(Error::Config(format!("bad value for convection: `{s}`"))),
            }
        };
        let out = args
            .out
            .clone()
            .or_else(|| file.get("out").map(PathBuf::from))
            .ok_or_else(|| Error::Config("missing out".into()))?;
        let cfg = Self {
            pair,
            p_minus,
            alpha: num(args.alpha, "alpha", None)?,
            beta: num(args.beta, "beta", None)?,
            gamma: num(args.gamma, "gamma", None)?,
            case,
            levels: int(args.levels, "levels", 6)?,
            delta: num(args.delta, "delta", Some(experiments::DEFAULT_DELTA))?,
            mu0: num(args.mu0, "mu0", Some(experiments::DEFAULT_MU0))?,
            convection,
            out,
            jobs: int(args.jobs, "jobs", 1)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p_minus.is_empty() {
            return Err(Error::Config("no p_minus value given".into()));
        }
        for &p in &self.p_minus {
            if !(p > 1.0 && p.is_finite()) {
                return Err(Error::Config(format!("p_minus must exceed 1, got {p}")));
            }
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.levels > 9 {
            return Err(Error::Config(format!("levels must not exceed 9, got {}", self.levels)));
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        for &p in &self.p_minus {
            self.case_for(p)?;
        }
        Ok(())
    }

    pub fn case_for(&self, p_minus: f64) -> Result<ManufacturedCase> {
        ManufacturedCase::with_law(self.alpha, self.beta, self.gamma, p_minus, self.case, self.delta, self.mu0)
    }

    pub fn study(&self) -> StudyConfig {
        let mut s = StudyConfig::new(self.pair, self.levels);
        s.convection = self.convection;
        s
    }

    /// CSV file name of one column.
    pub fn csv_name(&self, p_minus: f64) -> String {
        let el = match self.pair {
            MixedPair::Mini => "mini",
            MixedPair::TaylorHood => "th",
        };
        format!(
            "eoc_{el}_case{}_a{}_b{}_g{}_p{}.csv",
            self.case.index(),
            self.alpha,
            self.beta,
            self.gamma,
            p_minus
        )
    }
}

fn sci(v: f64) -> String {
    // 17 significant digits
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(sci).unwrap_or_default()
}

/// CSV with the fixed column order and full double precision.
pub fn records_to_csv(records: &[ErrorRecord]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.level,
            sci(r.h),
            sci(r.e_v),
            opt(r.eoc_v),
            sci(r.e_q),
            opt(r.eoc_q),
            sci(r.theory_v),
            sci(r.theory_q)
        );
    }
    s
}

/// Human-readable table of one study.
pub fn render_table(title: &str, records: &[ErrorRecord]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{title}");
    let _ = writeln!(s, "{:>5} {:>11} {:>11} {:>7} {:>11} {:>7} {:>6}", "level", "h", "e_v", "eoc_v", "e_q", "eoc_q", "newton");
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into());
    for r in records {
        let _ = writeln!(
            s,
            "{:>5} {:>11.4e} {:>11.4e} {:>7} {:>11.4e} {:>7} {:>6}",
            r.level,
            r.h,
            r.e_v,
            fmt(r.eoc_v),
            r.e_q,
            fmt(r.eoc_q),
            r.newton_iterations
        );
    }
    if let Some(r) = records.first() {
        let _ = writeln!(s, "theory {:>35.3} {:>19.3}", r.theory_v, r.theory_q);
    }
    s
}

/// Runs one study per `p_minus`, at most `jobs` at a time. Results keep
/// the input order.
pub fn run_columns(cfg: &ConvergeConfig) -> Vec<Result<StudyResult>> {
    let study = cfg.study();
    let run = |p: f64| -> Result<StudyResult> { experiments::run_convergence_study(&cfg.case_for(p)?, &study) };
    let mut out = Vec::with_capacity(cfg.p_minus.len());
    for chunk in cfg.p_minus.chunks(cfg.jobs.max(1)) {
        let results: Vec<Result<StudyResult>> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunk.iter().map(|&p| scope.spawn(move || run(p))).collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(Error::Unsupported("solver thread panicked".into()))))
                .collect()
        });
        out.extend(results);
    }
    out
}

fn write_csv(dir: &Path, name: &str, records: &[ErrorRecord]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, records_to_csv(records))?;
    Ok(path)
}

fn cmd_converge(args: &ConvergeArgs) -> u8 {
    let cfg = match ConvergeConfig::resolve(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let mut code = EXIT_OK;
    for (&p, result) in cfg.p_minus.iter().zip(run_columns(&cfg)) {
        let title = format!(
            "{} case {} alpha={} beta={} gamma={} p_minus={}",
            cfg.pair.name(),
            cfg.case.index(),
            cfg.alpha,
            cfg.beta,
            cfg.gamma,
            p
        );
        match result {
            Ok(res) => {
                print!("{}", render_table(&title, &res.records));
                if let Err(e) = write_csv(&cfg.out, &cfg.csv_name(p), &res.records) {
                    eprintln!("error: {e}");
                    return EXIT_NUMERICAL;
                }
                if let Some(level) = res.failed_level {
                    eprintln!("error: Newton did not converge on level {level} ({title})");
                    code = EXIT_NUMERICAL;
                }
            }
            Err(e) => {
                eprintln!("error: {title}: {e}");
                let _ = write_csv(&cfg.out, &cfg.csv_name(p), &[]);
                code = EXIT_NUMERICAL;
            }
        }
    }
    code
}

fn cmd_er_demo(args: &ErDemoArgs) -> u8 {
    let mesh = match &args.mesh {
        Some(p) => Triangulation::import(p),
        None => experiments::er_mesh(),
    };
    let mesh = match mesh {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    match experiments::run_er_demo(&mesh, Some(&args.out), args.no_field, &ErConfig::default()) {
        Ok(outcome) => {
            let mut ok = outcome.no_field.converged;
            if let Some(f) = &outcome.field {
                ok &= f.converged;
                println!(
                    "field:    p in [{:.4}, {:.4}], newton {} ({}), max|v| = {:.6e}",
                    f.p_min,
                    f.p_max,
                    f.iterations,
                    if f.converged { "converged" } else { "FAILED" },
                    f.max_speed
                );
            }
            let n = &outcome.no_field;
            println!(
                "no field: p = {:.4}, newton {} ({}), max|v| = {:.6e}",
                n.p_max,
                n.iterations,
                if n.converged { "converged" } else { "FAILED" },
                n.max_speed
            );
            if let Some(f) = &outcome.field {
                println!("max|v| field / no field = {:.6}", f.max_speed / n.max_speed);
            }
            if ok {
                EXIT_OK
            } else {
                EXIT_NUMERICAL
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_NUMERICAL
        }
    }
}

fn cmd_mesh_info(path: &Path) -> u8 {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return EXIT_USAGE;
        }
    };
    match Triangulation::from_text_unchecked(&text) {
        Ok(mesh) => {
            let s = MeshStats::of(&mesh);
            println!("vertices   {}", s.n_vertices);
            println!("triangles  {}", s.n_triangles);
            println!("max h      {:.6e}", s.max_h);
            println!("min angle  {:.4} deg", s.min_angle_degrees);
            println!("conformity {}", s.verdict());
            for v in s.violations.iter().take(10) {
                println!("  {v}");
            }
            if s.violations.is_empty() {
                EXIT_OK
            } else {
                EXIT_NUMERICAL
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    let code = match &cli.command {
        Command::Converge(a) => cmd_converge(a),
        Command::ErDemo(a) => cmd_er_demo(a),
        Command::MeshInfo { file } => cmd_mesh_info(file),
    };
    ExitCode::from(code)
}
