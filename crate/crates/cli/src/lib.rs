//! Argument handling and subcommands behind the `wapf` binary.
//!
//! [`main_with`] parses an argument list, runs one subcommand and returns the
//! text it would print; failures carry a short category used in the one-line
//! error report.

mod config;

use std::ffi::OsString;
use std::fmt;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wapf_core::nbody::{integrate_nbody, match_distances, read_bodies_csv, total_momentum, Body};
use wapf_core::scenarios::{density_peak, planets, Scenario};
use wapf_core::snapshot::export_csv;
use wapf_core::verify::{convergence_study, StudyCase};
use wapf_core::{
    bodies_to_fields, build_scenario, extract_bodies, read_snapshot, run_with, star_fraction,
    write_snapshot, ConvolutionBackend, Error, Integrator, ScenarioKind, ScenarioSpec, Snapshot,
    Softening, SolverConfig, TestFunction,
};

pub use config::ConfigFile;

/// A failed command: category (`usage`, `config`, `positivity`, `cfl`,
/// `kernel`, `bodies`, `format`, `io`) and message.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub category: &'static str,
    pub message: String,
}

impl Failure {
    pub fn new(category: &'static str, message: impl Into<String>) -> Self {
        Self {
            category,
            message: message.into(),
        }
    }

    fn config(message: impl Into<String>) -> Self {
        Self::new("config", message)
    }

    /// The single line written to stderr.
    pub fn line(&self) -> String {
        let flat: Vec<&str> = self.message.split_whitespace().collect();
        format!("error[{}]: {}", self.category, flat.join(" "))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.line())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self::new(e.category(), e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Error::from(e).into()
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

#[derive(Parser, Debug)]
#[command(name = "wapf", version, about = "Pressureless and self-gravitating dust simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evolve a scenario, writing snapshots and diagnostics.csv.
    Run(RunArgs),
    /// Weak-residual study over a list of cell sizes.
    Convergence(ConvergenceArgs),
    /// Fluid run from point bodies against the direct N-body integrator.
    NbodyCompare(NbodyArgs),
    /// Mass fraction near the density maximum of a snapshot.
    StarFraction(StarArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum IntegratorArg {
    Euler,
    Rk4,
    #[value(alias = "exact-transport-2d")]
    Exact2d,
}

impl From<IntegratorArg> for Integrator {
    fn from(v: IntegratorArg) -> Self {
        match v {
            IntegratorArg::Euler => Integrator::Euler,
            IntegratorArg::Rk4 => Integrator::Rk4,
            IntegratorArg::Exact2d => Integrator::ExactTransport2D,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Fft,
    Direct,
}

/// Options shared by the scenario-driven subcommands.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Flat `key = value` file; command-line flags win over its entries.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub cells: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub cfl: Option<f64>,
    #[arg(long = "t-end")]
    pub t_end: Option<f64>,
    #[arg(long, value_enum)]
    pub integrator: Option<IntegratorArg>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long = "G", value_name = "G")]
    pub g: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
    #[arg(long = "dt-max")]
    pub dt_max: Option<f64>,
    /// Scenario parameter, repeatable: `--set rho_disk=12`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Common,
    /// Output directory (default `out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long = "snapshot-every")]
    pub snapshot_every: Option<f64>,
    /// Also write a cell-centre CSV beside every snapshot.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Args, Debug, Clone)]
pub struct ConvergenceArgs {
    #[command(flatten)]
    pub common: Common,
    /// Strictly decreasing cell sizes, comma separated.
    #[arg(long = "eps-list", value_delimiter = ',')]
    pub eps_list: Vec<f64>,
    /// Times at which residuals are measured (default 0.5,1).
    #[arg(long = "t-samples", value_delimiter = ',')]
    pub t_samples: Vec<f64>,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct NbodyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Bodies CSV (`m, r_x, r_y, u_x, u_y`); the scenario pair when absent.
    #[arg(long, value_name = "FILE")]
    pub bodies: Option<PathBuf>,
    /// Comparison times spread evenly over the run.
    #[arg(long, default_value_t = 8)]
    pub samples: usize,
    /// Extraction density; defaults to the geometric mean of the floor and
    /// the initial peak density.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Output directory for compare.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct StarArgs {
    #[arg(long, value_name = "FILE")]
    pub snapshot: PathBuf,
    #[arg(long = "radius-cells", default_value_t = 2)]
    pub radius_cells: usize,
    /// Also count secondary concentrations above this density.
    #[arg(long = "planet-threshold")]
    pub planet_threshold: Option<f64>,
    #[arg(long = "planet-min-mass", default_value_t = 0.0)]
    pub planet_min_mass: f64,
}

/// Parses `args` (program name first) and runs the subcommand. `Ok` holds
/// the text for standard output.
pub fn main_with<I, T>(args: I) -> Result<String, Failure>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                return Ok(e.to_string());
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            return Err(Failure::new("usage", first.trim_start_matches("error: ")));
        }
    };
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Convergence(a) => cmd_convergence(a),
        Command::NbodyCompare(a) => cmd_nbody(a),
        Command::StarFraction(a) => cmd_star(a),
    }
}

struct Setup {
    spec: ScenarioSpec,
    scenario: Scenario,
    solver: SolverConfig,
}

impl Setup {
    fn rebuild(&self, eps: f64, dim: Option<usize>) -> Result<Scenario, Failure> {
        let domain = self.spec.default_domain(dim, None, Some(eps))?;
        let mut sc = build_scenario(&self.spec, &domain)?;
        sc.gravity = sc.gravity.with_backend(self.scenario.gravity.backend);
        Ok(sc)
    }
}

fn open_config(common: &Common) -> Result<ConfigFile, Failure> {
    match &common.config {
        Some(p) => ConfigFile::load(p),
        None => Ok(ConfigFile::default()),
    }
}

fn parse_set(kv: &str) -> Result<(String, f64), Failure> {
    let (k, v) = kv
        .split_once('=')
        .ok_or_else(|| Failure::new("usage", format!("--set expects KEY=VALUE, got '{kv}'")))?;
    let v = v
        .trim()
        .parse::<f64>()
        .map_err(|e| Failure::new("usage", format!("--set {k}: {e}")))?;
    Ok((k.trim().to_string(), v))
}

/// Merges flags over the config file and builds the scenario. Subcommands
/// take their own keys from `cfg` first; whatever is left becomes scenario
/// parameters.
fn resolve(c: &Common, mut cfg: ConfigFile, forced: Option<ScenarioKind>) -> Result<Setup, Failure> {
    let name: Option<String> = match &c.scenario {
        Some(s) => Some(s.clone()),
        None => cfg.take("scenario")?,
    };
    let kind = match (forced, name) {
        (Some(k), None) => k,
        (Some(k), Some(n)) => {
            let given: ScenarioKind = n.parse()?;
            if given != k {
                return Err(Failure::config(format!("this command only runs scenario {k}, not {given}")));
            }
            k
        }
        (None, Some(n)) => n.parse()?,
        (None, None) => return Err(Failure::new("usage", "--scenario is required")),
    };
    let dim = pick(c.dim, &mut cfg, "dim")?;
    let cells = pick(c.cells, &mut cfg, "cells")?;
    let epsilon = pick(c.epsilon, &mut cfg, "epsilon")?;
    let cfl = pick(c.cfl, &mut cfg, "cfl")?;
    let seed = pick(c.seed, &mut cfg, "seed")?;
    let dt_max = pick(c.dt_max, &mut cfg, "dt-max")?;
    let integrator = match c.integrator {
        Some(i) => Some(i),
        None => cfg.take_enum::<IntegratorArg>("integrator")?,
    };
    let backend = match c.backend {
        Some(b) => Some(b),
        None => cfg.take_enum::<BackendArg>("backend")?,
    };

    let mut spec = ScenarioSpec::new(kind);
    if let Some(s) = seed {
        spec = spec.with_seed(s);
    }
    let t_end_key: Option<f64> = cfg.take("t-end")?;
    for (k, v) in cfg.into_params()?.into_iter().chain(t_end_key.map(|v| ("t_end".to_string(), v))) {
        spec = spec.with(&k, v);
    }
    for kv in &c.set {
        let (k, v) = parse_set(kv)?;
        spec = spec.with(&k, v);
    }
    for (key, val) in [("G", c.g), ("alpha", c.alpha), ("t_end", c.t_end)] {
        if let Some(v) = val {
            spec = spec.with(key, v);
        }
    }
    let domain = spec.default_domain(dim, cells, epsilon)?;
    let mut scenario = build_scenario(&spec, &domain)?;
    if let Some(b) = backend {
        scenario.gravity = scenario.gravity.with_backend(match b {
            BackendArg::Fft => ConvolutionBackend::Fft,
            BackendArg::Direct => ConvolutionBackend::Direct,
        });
    }
    let integrator = integrator.map(Integrator::from).unwrap_or(scenario.integrator);
    if integrator == Integrator::ExactTransport2D && domain.dim() != 2 {
        return Err(Failure::config(format!(
            "integrator exact2d needs a 2-D domain, got {}-D",
            domain.dim()
        )));
    }
    let mut solver = SolverConfig::new(integrator, scenario.t_end);
    if let Some(v) = cfl {
        solver.cfl = v;
    }
    solver.dt_max = dt_max;
    solver.seed = spec.seed;
    solver.validate()?;
    Ok(Setup { spec, scenario, solver })
}

fn pick<T>(flag: Option<T>, cfg: &mut ConfigFile, key: &str) -> Result<Option<T>, Failure>
where
    T: std::str::FromStr,
    T::Err: fmt::Display,
{
    match flag {
        Some(v) => {
            cfg.take::<String>(key)?;
            Ok(Some(v))
        }
        None => cfg.take(key),
    }
}

const AXES: [&str; 3] = ["x", "y", "z"];

fn cmd_run(a: &RunArgs) -> Result<String, Failure> {
    let mut cfg = open_config(&a.common)?;
    let out: PathBuf = pick(a.out.clone(), &mut cfg, "out")?.unwrap_or_else(|| PathBuf::from("out"));
    let every = pick(a.snapshot_every, &mut cfg, "snapshot-every")?;
    let with_csv = a.csv | cfg.take::<bool>("csv")?.unwrap_or(false);
    let setup = resolve(&a.common, cfg, None)?;
    let mut solver = setup.solver.clone();
    solver.snapshot_every = every;
    solver.validate()?;

    fs::create_dir_all(&out)?;
    let sc = &setup.scenario;
    let domain = sc.domain.clone();
    let dim = domain.dim();
    let mut diag = csv::Writer::from_path(out.join("diagnostics.csv"))?;
    let mut header = vec!["step".to_string(), "t".into(), "dt".into(), "mass_total".into()];
    header.extend(AXES[..dim].iter().map(|a| format!("mom_{a}")));
    header.extend(["min_rho", "max_speed", "max_gradphi", "flags"].map(String::from));
    diag.write_record(&header)?;

    let mut count = 0usize;
    let final_state = run_with(
        &sc.state,
        &domain,
        &sc.gravity,
        &solver,
        |s| {
            let snap = Snapshot::new(domain.clone(), s.clone());
            write_snapshot(&snap, out.join(format!("snap_{count:05}.wapf")))?;
            if with_csv {
                let f = BufWriter::new(File::create(out.join(format!("snap_{count:05}.csv")))?);
                export_csv(&snap, f)?;
            }
            count += 1;
            Ok(())
        },
        |r| {
            let mut row = vec![r.step.to_string(), r.time.to_string(), r.dt.to_string(), r.mass_total.to_string()];
            row.extend(r.momentum.iter().map(|m| m.to_string()));
            row.extend([
                r.min_rho.to_string(),
                r.max_speed.to_string(),
                r.max_gradphi.to_string(),
                r.flags.violations().to_string(),
            ]);
            diag.write_record(&row)?;
            Ok(())
        },
    )?;
    diag.flush()?;
    Ok(format!(
        "scenario {}: {count} snapshot(s) in {}, final t = {}\n",
        setup.spec.kind,
        out.display(),
        final_state.time
    ))
}

fn cmd_convergence(a: &ConvergenceArgs) -> Result<String, Failure> {
    let mut cfg = open_config(&a.common)?;
    let eps_list = list(&a.eps_list, &mut cfg, "eps-list")?
        .ok_or_else(|| Failure::new("usage", "--eps-list is required"))?;
    let t_samples = list(&a.t_samples, &mut cfg, "t-samples")?.unwrap_or_else(|| vec![0.5, 1.0]);
    let out = pick(a.out.clone(), &mut cfg, "out")?;
    let setup = resolve(&a.common, cfg, None)?;
    let dim = Some(setup.scenario.domain.dim());
    let psis = TestFunction::default_set(&setup.rebuild(eps_list[0], dim)?.domain);
    let table = convergence_study(
        |eps| {
            let sc = setup.rebuild(eps, dim).map_err(|f| Error::Config(f.message))?;
            Ok(StudyCase {
                domain: sc.domain,
                state: sc.state,
                gravity: sc.gravity,
            })
        },
        &eps_list,
        &t_samples,
        &psis,
        &setup.solver,
    )?;
    match out {
        Some(p) => {
            table.write_csv(BufWriter::new(File::create(&p)?))?;
            let mut msg = format!("wrote {}\n", p.display());
            for o in &table.orders {
                msg += &format!("t = {}: order rho {:.3}, mom {:.3}", o.time, o.rho, o.mom);
                if let Some(p) = o.poisson {
                    msg += &format!(", poisson {p:.3}");
                }
                msg.push('\n');
            }
            Ok(msg)
        }
        None => {
            let mut buf = Vec::new();
            table.write_csv(&mut buf)?;
            Ok(String::from_utf8_lossy(&buf).into_owned())
        }
    }
}

fn list(flag: &[f64], cfg: &mut ConfigFile, key: &str) -> Result<Option<Vec<f64>>, Failure> {
    let from_cfg: Option<String> = cfg.take(key)?;
    if !flag.is_empty() {
        return Ok(Some(flag.to_vec()));
    }
    from_cfg
        .map(|s| {
            s.split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| Failure::config(format!("config key '{key}': '{v}': {e}")))
                })
                .collect()
        })
        .transpose()
}

fn cmd_nbody(a: &NbodyArgs) -> Result<String, Failure> {
    let mut cfg = open_config(&a.common)?;
    let bodies_path: Option<PathBuf> = pick(a.bodies.clone(), &mut cfg, "bodies")?;
    let threshold = pick(a.threshold, &mut cfg, "threshold")?;
    let out = pick(a.out.clone(), &mut cfg, "out")?;
    let setup = resolve(&a.common, cfg, Some(ScenarioKind::NBodyCompare))?;
    let mut sc = setup.scenario.clone();
    let floor = sc.domain.epsilon();
    if let Some(p) = &bodies_path {
        sc.bodies = read_bodies_csv(File::open(p)?)?;
        sc.state = bodies_to_fields(&sc.bodies, &sc.domain, floor)?;
    }
    if a.samples == 0 {
        return Err(Failure::new("usage", "--samples must be at least 1"));
    }
    let mut solver = setup.solver.clone();
    solver.snapshot_every = Some(solver.t_end / a.samples as f64);
    solver.validate()?;

    let soft = Softening::from_mollifier(sc.domain.epsilon(), sc.gravity.alpha);
    let g = sc.gravity.g;
    let eps = sc.domain.epsilon();
    let peak = sc.state.total_density().into_iter().fold(0.0, f64::max);
    let threshold = threshold.unwrap_or((floor * peak).sqrt());
    if threshold.is_nan() || threshold <= floor {
        return Err(Failure::config(format!("extraction threshold {threshold} must exceed the floor {floor}")));
    }
    let p0 = total_momentum(&sc.bodies);
    let mut rows: Vec<(f64, Vec<Body>, Vec<f64>)> = Vec::new();
    run_with(
        &sc.state,
        &sc.domain,
        &sc.gravity,
        &solver,
        |s| {
            let steps = ((s.time / 1e-3).ceil() as usize).max(1);
            let reference = integrate_nbody(&sc.bodies, g, soft, s.time, steps)?;
            let found = extract_bodies(s, &sc.domain, threshold);
            let dist = match_distances(&reference, &found);
            rows.push((s.time, reference, dist));
            Ok(())
        },
        |_| Ok(()),
    )?;

    let dim = sc.domain.dim();
    let mut header = vec!["t".to_string(), "body".into()];
    header.extend(AXES[..dim].iter().map(|a| format!("r_{a}")));
    header.extend(["distance".to_string(), "distance_over_eps".to_string()]);
    let mut worst = 0.0f64;
    let mut drift = 0.0f64;
    let mut records = Vec::new();
    for (t, reference, dist) in &rows {
        let p = total_momentum(reference);
        drift = p.iter().zip(&p0).map(|(a, b)| (a - b).abs()).fold(drift, f64::max);
        for (i, (b, d)) in reference.iter().zip(dist).enumerate() {
            worst = worst.max(d / eps);
            let mut row = vec![t.to_string(), i.to_string()];
            row.extend(b.position.iter().map(|x| x.to_string()));
            row.extend([d.to_string(), (d / eps).to_string()]);
            records.push(row);
        }
    }
    if let Some(dir) = &out {
        fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("compare.csv"))?;
        w.write_record(&header)?;
        for r in &records {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    Ok(format!(
        "{} bodies, {} samples: max distance {worst:.4} cells, N-body momentum drift {drift:e}\n",
        sc.bodies.len(),
        rows.len()
    ))
}

fn cmd_star(a: &StarArgs) -> Result<String, Failure> {
    let snap = read_snapshot(&a.snapshot)?;
    let frac = star_fraction(&snap.state, &snap.domain, a.radius_cells);
    let mut msg = format!("{frac}\n");
    if let Some(th) = a.planet_threshold {
        let found = planets(&snap.state, &snap.domain, th, a.planet_min_mass);
        let peak = snap.domain.center(density_peak(&snap.state));
        msg += &format!(
            "star at {:?}, {} planet(s), masses {:?}\n",
            &peak[..snap.domain.dim()],
            found.len(),
            found.iter().map(|b| b.mass).collect::<Vec<_>>()
        );
    }
    Ok(msg)
}
