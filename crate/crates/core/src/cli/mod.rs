//! The `symprod` command line.
//!
//! Every command reads the same spec-file grammar (see [`spec_file`]) and
//! writes either a CSV table or a `key = value` report, both starting with a
//! `# symprod <version> <command>` line. Exit codes: 0 success, 1 a check
//! failed, 2 usage error or malformed spec file.

pub mod selftest;
pub mod spec_file;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::capacities::{boundary_minimal_experiment, gh_capacities, BoundaryMinimalConfig};
use crate::diskmap::{disk_to_domain, jacobian_determinant, sandwich_check, CutoffMapConfig};
use crate::dynamics::ProductFlow;
use crate::error::Error;
use crate::fractal::{
    box_dimension, dyadic_scales, BoundaryPatchExperiment, DimensionEstimate, FractalFunction,
    GraphSampler,
};
use crate::geometry2d::{EllipsoidSpec, Interpolation, ProfileSource, RadialProfile};
use crate::product::{ellipsoid_volume, Factor, ProductDomain};
use crate::VERSION;

use spec_file::{DomainSpec, SpecError};

/// Environment variable read when `--threads` is absent.
pub const THREADS_ENV: &str = "SYMPROD_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "symprod",
    version,
    about = "Symplectic products of star-shaped planar domains"
)]
pub struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,

    /// Write the output here instead of stdout.
    #[arg(long, short = 'o', global = true)]
    pub output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Per-factor areas and radii, plus the ellipsoid model when there is one.
    Area(SpecArgs),
    /// Disk map of one factor on a polar grid, with Jacobian determinants.
    Map(MapArgs),
    /// Monte Carlo volume of the product.
    Volume(VolumeArgs),
    /// Trajectory of the characteristic flow through a point.
    Flow(FlowArgs),
    /// Residual of the conjugacy between the ellipsoid Reeb flow and the product flow.
    Conjugacy(ConjugacyArgs),
    /// Gutt–Hutchings capacities of an ellipsoid.
    Capacities(CapacitiesArgs),
    /// Boundary-minimality experiment: shrink near one point, check containment.
    BoundaryMinimal(BoundaryMinimalArgs),
    /// ε-sandwich check of the cut-off disk map.
    Sandwich(SandwichArgs),
    /// Box-counting dimension of a fractal graph or of a product boundary patch.
    Boxdim(BoxdimArgs),
    /// Run the bundled invariant checks.
    Selftest(SelftestArgs),
}

#[derive(Args, Debug)]
pub struct SpecArgs {
    /// Domain spec file.
    #[arg(long)]
    pub spec: PathBuf,
}

#[derive(Args, Debug)]
pub struct MapArgs {
    #[arg(long)]
    pub spec: PathBuf,
    /// 1-based index of the planar factor to map.
    #[arg(long, default_value_t = 1)]
    pub factor: usize,
    /// Radii and angles per grid direction.
    #[arg(long, default_value_t = 16)]
    pub grid: usize,
    /// Finite-difference step for the Jacobian, relative to the disk radius.
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
}

#[derive(Args, Debug)]
pub struct VolumeArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct FlowArgs {
    #[arg(long)]
    pub spec: PathBuf,
    /// Ambient coordinates `x₁,y₁,x₂,y₂,…`.
    #[arg(long, allow_hyphen_values = true)]
    pub point: String,
    /// `t0,t1`.
    #[arg(long, allow_hyphen_values = true, default_value = "0,1")]
    pub t_range: String,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
}

#[derive(Args, Debug)]
pub struct ConjugacyArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
}

#[derive(Args, Debug)]
pub struct CapacitiesArgs {
    /// Ellipsoid areas, comma separated.
    #[arg(long, conflicts_with = "spec", required_unless_present = "spec")]
    pub areas: Option<String>,
    /// Use the ellipsoid model of a spec file instead.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub count: usize,
}

#[derive(Args, Debug)]
pub struct BoundaryMinimalArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long)]
    pub seed: u64,
    /// Also write the violating samples as CSV.
    #[arg(long)]
    pub violations: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SandwichArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long)]
    pub seed: u64,
    /// RK4 steps of the cut-off flow.
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BoxTarget {
    /// Graph of a fractal function over an interval.
    Function,
    /// Patch of the boundary of `W₁ ×₂ E(a₂)` in ℝ⁴.
    Boundary,
}

#[derive(Args, Debug)]
pub struct BoxdimArgs {
    #[arg(long, value_enum)]
    pub target: BoxTarget,
    /// `key=value` pairs, comma separated (see the README for the keys).
    #[arg(long, default_value = "")]
    pub params: String,
    /// Dyadic exponents `lo..hi`: box sizes `2^-lo … 2^-hi` (times the cube side for boundaries).
    #[arg(long)]
    pub scales: Option<String>,
    /// Random grid offsets averaged per scale.
    #[arg(long, default_value_t = 4)]
    pub offsets: usize,
    #[arg(long)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

/// Failure modes of a command, mapped onto exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Spec(SpecError),
    Library(Error),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Library(
                Error::IntegrationTolerance { .. } | Error::Infeasible(_) | Error::DegenerateFit(_),
            ) => 1,
            Self::Io(_) => 1,
            _ => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) | Self::Io(m) => f.write_str(m),
            Self::Spec(e) => write!(f, "{e}"),
            Self::Library(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self::Library(e)
    }
}

impl From<SpecError> for CliError {
    fn from(e: SpecError) -> Self {
        Self::Spec(e)
    }
}

/// What a command produced: the text to emit and whether its check passed.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub text: String,
    pub passed: bool,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Self { text, passed: true }
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(k) => match rayon::ThreadPoolBuilder::new().num_threads(k).build() {
            Ok(pool) => pool.install(|| execute(&cli.command)),
            Err(e) => Err(CliError::Usage(format!("cannot start {k} threads: {e}"))),
        },
        None => execute(&cli.command),
    };
    match result {
        Ok(outcome) => {
            if let Err(e) = emit(cli.output.as_ref(), &outcome.text) {
                eprintln!("symprod: {e}");
                return e.exit_code();
            }
            if outcome.passed {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("symprod: {e}");
            e.exit_code()
        }
    }
}

fn emit(path: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Io(format!("cannot write to stdout: {e}")))
        }
    }
}

/// Runs a parsed command in the current rayon pool.
pub fn execute(command: &Command) -> Result<Outcome, CliError> {
    match command {
        Command::Area(a) => cmd_area(a),
        Command::Map(a) => cmd_map(a),
        Command::Volume(a) => cmd_volume(a),
        Command::Flow(a) => cmd_flow(a),
        Command::Conjugacy(a) => cmd_conjugacy(a),
        Command::Capacities(a) => cmd_capacities(a),
        Command::BoundaryMinimal(a) => cmd_boundary_minimal(a),
        Command::Sandwich(a) => cmd_sandwich(a),
        Command::Boxdim(a) => cmd_boxdim(a),
        Command::Selftest(a) => Ok(selftest::run(a.seed)),
    }
}

pub(crate) fn banner(command: &str) -> String {
    format!("# symprod {VERSION} {command}\n")
}

fn load(path: &Path) -> Result<DomainSpec, CliError> {
    Ok(spec_file::load(path)?)
}

fn planar(spec: &DomainSpec, what: &str) -> Result<Vec<Arc<RadialProfile>>, CliError> {
    spec.planar_profiles().ok_or_else(|| {
        CliError::Usage(format!(
            "{what} needs planar factors only (no ellipsoid blocks)"
        ))
    })
}

fn parse_numbers(flag: &str, s: &str) -> Result<Vec<f64>, CliError> {
    spec_file::parse_list(s).map_err(|m| CliError::Usage(format!("{flag}: {m}")))
}

fn cmd_area(args: &SpecArgs) -> Result<Outcome, CliError> {
    let spec = load(&args.spec)?;
    let domain = spec.domain()?;
    let mut out = banner("area");
    out.push_str("factor,kind,area,min_radius,max_radius\n");
    for (i, f) in spec.factors.iter().enumerate() {
        match &f.factor {
            Factor::Planar(w) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    i + 1,
                    w.label(),
                    w.area(),
                    w.min_radius(),
                    w.max_radius()
                );
            }
            Factor::Ellipsoid(e) => {
                for (k, a) in e.areas().iter().enumerate() {
                    let r = (a / std::f64::consts::PI).sqrt();
                    let _ = writeln!(out, "{}.{},ellipsoid,{a},{r},{r}", i + 1, k + 1);
                }
            }
            Factor::Product(_) => {}
        }
    }
    let _ = writeln!(out, "# p = {}", domain.exponent());
    match domain.ellipsoid_model_areas() {
        Some(areas) => {
            let spec = EllipsoidSpec::new(areas.clone())?;
            let _ = writeln!(out, "# ellipsoid_model = {}", join(&areas));
            let _ = writeln!(out, "# ellipsoid_volume = {}", ellipsoid_volume(&spec));
        }
        None => out.push_str("# ellipsoid_model = none\n"),
    }
    Ok(Outcome::ok(out))
}

fn cmd_map(args: &MapArgs) -> Result<Outcome, CliError> {
    let spec = load(&args.spec)?;
    let profiles = planar(&spec, "map")?;
    let w = profiles.get(args.factor.wrapping_sub(1)).ok_or_else(|| {
        CliError::Usage(format!(
            "--factor {} is out of range 1..={}",
            args.factor,
            profiles.len()
        ))
    })?;
    if args.grid == 0 || !(args.step > 0.0) {
        return Err(CliError::Usage("--grid and --step must be positive".into()));
    }
    let radius = (w.area() / std::f64::consts::PI).sqrt();
    let h = args.step * radius;
    let mut out = banner("map");
    out.push_str("x,y,u,v,jacobian\n");
    for i in 1..=args.grid {
        // interior radii only, so the difference stencil stays inside the disk
        let rho = radius * i as f64 / (args.grid as f64 + 1.0);
        for j in 0..args.grid {
            let theta = std::f64::consts::TAU * j as f64 / args.grid as f64;
            let z = [rho * theta.cos(), rho * theta.sin()];
            let img = disk_to_domain(w, z);
            let jac = jacobian_determinant(|p| disk_to_domain(w, p), z, h);
            let _ = writeln!(out, "{}", join(&[z[0], z[1], img[0], img[1], jac]));
        }
    }
    Ok(Outcome::ok(out))
}

fn cmd_volume(args: &VolumeArgs) -> Result<Outcome, CliError> {
    let spec = load(&args.spec)?;
    let domain = spec.domain()?;
    if args.samples == 0 {
        return Err(CliError::Usage("--samples must be positive".into()));
    }
    let est = domain.mc_volume(args.samples, args.seed)?;
    let reference = match domain.ellipsoid_model_areas() {
        Some(areas) => Some(ellipsoid_volume(&EllipsoidSpec::new(areas)?)),
        None => None,
    };
    let mut out = banner("volume");
    out.push_str("samples,seed,estimate,std_error,reference,deviation_se\n");
    let (r, dev) = match reference {
        Some(r) => (
            r.to_string(),
            ((est.estimate - r) / est.std_error).to_string(),
        ),
        None => ("NA".into(), "NA".into()),
    };
    let _ = writeln!(
        out,
        "{},{},{},{},{r},{dev}",
        est.samples, args.seed, est.estimate, est.std_error
    );
    Ok(Outcome::ok(out))
}

fn cmd_flow(args: &FlowArgs) -> Result<Outcome, CliError> {
    let spec = load(&args.spec)?;
    let domain = spec.domain()?;
    let flow = ProductFlow::new(&domain)?;
    let x = parse_numbers("--point", &args.point)?;
    if x.len() != domain.dim() {
        return Err(CliError::Usage(format!(
            "--point has {} coordinates, the domain has dimension {}",
            x.len(),
            domain.dim()
        )));
    }
    let t = parse_numbers("--t-range", &args.t_range)?;
    let &[t0, t1] = t.as_slice() else {
        return Err(CliError::Usage("--t-range expects 't0,t1'".into()));
    };
    if args.steps == 0 {
        return Err(CliError::Usage("--steps must be positive".into()));
    }
    let mut out = banner("flow");
    out.push('t');
    for k in 0..domain.dim() / 2 {
        let _ = write!(out, ",x{},y{}", k + 1, k + 1);
    }
    out.push_str(",gauge\n");
    for s in 0..=args.steps {
        let t = t0 + (t1 - t0) * s as f64 / args.steps as f64;
        let y = flow.flow_ambient(&x, t)?;
        let _ = writeln!(out, "{},{},{}", num(t), join(&y), num(domain.gauge(&y)?));
    }
    Ok(Outcome::ok(out))
}

fn cmd_conjugacy(args: &ConjugacyArgs) -> Result<Outcome, CliError> {
    let spec = load(&args.spec)?;
    let profiles = planar(&spec, "conjugacy")?;
    let report = conjugacy_stats(&profiles, args.samples, args.seed)?;
    let passed = report.max <= args.tolerance;
    let mut out = banner("conjugacy");
    let _ = writeln!(out, "samples = {}", args.samples);
    let _ = writeln!(out, "seed = {}", args.seed);
    let _ = writeln!(out, "max_residual = {:e}", report.max);
    let _ = writeln!(out, "mean_residual = {:e}", report.mean);
    let _ = writeln!(out, "tolerance = {:e}", args.tolerance);
    let _ = writeln!(out, "result = {}", verdict(passed));
    Ok(Outcome { text: out, passed })
}

pub(crate) struct ResidualStats {
    pub max: f64,
    pub mean: f64,
}

/// Residuals at seeded points of `∂E(a)` and times `t ∈ [0, 2·max a)`.
pub(crate) fn conjugacy_stats(
    profiles: &[Arc<RadialProfile>],
    samples: usize,
    seed: u64,
) -> Result<ResidualStats, CliError> {
    if samples == 0 {
        return Err(CliError::Usage("--samples must be positive".into()));
    }
    let flow = ProductFlow::from_profiles(profiles);
    let areas = flow.areas();
    let top = areas.iter().copied().fold(0.0, f64::max);
    let points = ProductDomain::ellipsoid(areas)?.boundary_sample(None, samples, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7157);
    let mut max = 0.0f64;
    let mut sum = 0.0;
    for z in &points {
        let t = rng.random::<f64>() * 2.0 * top;
        let r = flow.conjugacy_residual(z, t)?;
        max = max.max(r);
        sum += r;
    }
    Ok(ResidualStats {
        max,
        mean: sum / samples as f64,
    })
}

fn cmd_capacities(args: &CapacitiesArgs) -> Result<Outcome, CliError> {
    let areas = match (&args.areas, &args.spec) {
        (Some(a), _) => parse_numbers("--areas", a)?,
        (None, Some(p)) => load(p)?.domain()?.ellipsoid_model_areas().ok_or_else(|| {
            CliError::Usage("the spec has no ellipsoid model (p must be 2)".into())
        })?,
        (None, None) => return Err(CliError::Usage("give --areas or --spec".into())),
    };
    let table = gh_capacities(&areas, args.count)?;
    Ok(Outcome::ok(format!("{}\n", join(&table.values))))
}

fn cmd_boundary_minimal(args: &BoundaryMinimalArgs) -> Result<Outcome, CliError> {
    let spec = load(&args.spec)?;
    let profiles = planar(&spec, "boundary-minimal")?;
    let bm = spec.boundary_minimal.clone().ok_or_else(|| {
        CliError::Usage(format!(
            "{} has no [boundary_minimal] section",
            args.spec.display()
        ))
    })?;
    let cfg = BoundaryMinimalConfig {
        factors: profiles,
        point: bm.point,
        half_width: bm.half_width,
        target_area: bm.target_area,
        eta: bm.eta,
        samples: args.samples,
        seed: args.seed,
    };
    let report = boundary_minimal_experiment(&cfg)?;
    let passed = report.passed();
    let mut out = banner("boundary-minimal");
    let _ = writeln!(out, "area = {}", report.area);
    let _ = writeln!(out, "shrunk_areas = {}", join(&report.shrunk_areas));
    let _ = writeln!(out, "dent_amplitudes = {}", join(&report.amplitudes));
    let _ = writeln!(out, "eta = {}", report.eta);
    let _ = writeln!(out, "interior_samples = {}", report.interior_samples);
    let _ = writeln!(out, "boundary_samples = {}", report.boundary_samples);
    let _ = writeln!(out, "skipped_in_window = {}", report.in_window);
    let _ = writeln!(out, "violations = {}", report.violations);
    let _ = writeln!(out, "c1_original = {}", report.c1_original);
    let _ = writeln!(out, "c1_shrunk = {}", report.c1_shrunk);
    let _ = writeln!(out, "capacity_gap = {}", report.capacity_gap());
    let _ = writeln!(out, "result = {}", verdict(passed));
    if let Some(path) = &args.violations {
        let mut csv = banner("boundary-minimal violations");
        let dim = cfg.point.len() / 2;
        let cols: Vec<String> = (1..=dim).map(|k| format!("x{k},y{k}")).collect();
        let _ = writeln!(csv, "{}", cols.join(","));
        for p in &report.offenders {
            let _ = writeln!(csv, "{}", join(p));
        }
        emit(Some(path), &csv)?;
    }
    Ok(Outcome { text: out, passed })
}

fn cmd_sandwich(args: &SandwichArgs) -> Result<Outcome, CliError> {
    let spec = load(&args.spec)?;
    let profiles = planar(&spec, "sandwich")?;
    let config = CutoffMapConfig::calibrate(&profiles, args.epsilon, args.steps)?;
    let report = sandwich_check(&profiles, &config, args.samples, args.seed)?;
    let passed = report.passed();
    let mut out = banner("sandwich");
    let _ = writeln!(out, "epsilon = {}", report.epsilon);
    let _ = writeln!(out, "cutoffs = {}", join(&report.deltas));
    let _ = writeln!(out, "steps = {}", args.steps);
    for (name, side, bound) in [
        ("outer", &report.outer, format!("{}", 1.0 + report.epsilon)),
        ("inner", &report.inner, "1".to_string()),
    ] {
        let _ = writeln!(out, "{name}_samples = {}", side.samples);
        let _ = writeln!(out, "{name}_violations = {}", side.violations);
        let _ = writeln!(
            out,
            "{name}_worst_gauge = {} (bound {bound})",
            side.worst_gauge
        );
        let _ = writeln!(
            out,
            "{name}_integration_failures = {}",
            side.integration_failures
        );
    }
    let _ = writeln!(out, "result = {}", verdict(passed));
    Ok(Outcome { text: out, passed })
}

/// `key=value,key=value` with unknown keys rejected.
struct Params {
    map: BTreeMap<String, String>,
    used: Vec<String>,
}

impl Params {
    fn parse(s: &str) -> Result<Self, CliError> {
        let mut map = BTreeMap::new();
        for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (k, v) = item.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("--params: expected key=value, got '{item}'"))
            })?;
            if map
                .insert(k.trim().to_string(), v.trim().to_string())
                .is_some()
            {
                return Err(CliError::Usage(format!(
                    "--params: repeated key '{}'",
                    k.trim()
                )));
            }
        }
        Ok(Self {
            map,
            used: Vec::new(),
        })
    }

    fn get<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T, CliError> {
        self.used.push(key.to_string());
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| CliError::Usage(format!("--params: bad value '{v}' for '{key}'"))),
        }
    }

    fn finish(self) -> Result<(), CliError> {
        match self.map.keys().find(|k| !self.used.contains(k)) {
            Some(k) => Err(CliError::Usage(format!("--params: unknown key '{k}'"))),
            None => Ok(()),
        }
    }
}

fn parse_scales(s: Option<&str>, default: (u32, u32)) -> Result<(u32, u32), CliError> {
    let Some(s) = s else { return Ok(default) };
    let bad = || {
        CliError::Usage(format!(
            "--scales expects 'lo..hi' dyadic exponents, got '{s}'"
        ))
    };
    let (lo, hi) = s.split_once("..").ok_or_else(bad)?;
    let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
    let hi: u32 = hi.trim().parse().map_err(|_| bad())?;
    if lo >= hi || hi > 30 {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn fractal_function(p: &mut Params) -> Result<FractalFunction, CliError> {
    let family: String = p.get("family", "weierstrass".to_string())?;
    let f = match family.as_str() {
        "weierstrass" => {
            FractalFunction::weierstrass(p.get("a", 0.5)?, p.get("b", 3.0)?, p.get("terms", 30)?)
        }
        "hunt" => FractalFunction::weierstrass_phase_seeded(
            p.get("a", 0.5)?,
            p.get("b", 3.0)?,
            p.get("terms", 30)?,
            p.get("phase_seed", 0u64)?,
        ),
        "xz" => FractalFunction::xiao_zhou(
            p.get("a", 0.5)?,
            p.get("alpha", 1.5)?,
            p.get("beta", 2.0)?,
            p.get("terms", 6)?,
        ),
        other => {
            return Err(CliError::Usage(format!(
                "--params: unknown family '{other}' (weierstrass, hunt or xz)"
            )))
        }
    };
    Ok(f?)
}

fn cmd_boxdim(args: &BoxdimArgs) -> Result<Outcome, CliError> {
    let mut p = Params::parse(&args.params)?;
    let (estimate, target) = match args.target {
        BoxTarget::Function => {
            let f = fractal_function(&mut p)?;
            let x0: f64 = p.get("x0", 0.0)?;
            let x1: f64 = p.get("x1", 1.0)?;
            let interval: f64 = p.get("interval", 0.0)?;
            let (lo, hi) = parse_scales(
                args.scales.as_deref(),
                if interval > 0.0 { (3, 8) } else { (4, 14) },
            )?;
            p.finish()?;
            if !(x1 > x0) {
                return Err(CliError::Usage("--params: need x0 < x1".into()));
            }
            let target = f
                .graph_dimension()
                .map(|d| if interval > 0.0 { d + 1.0 } else { d });
            let mut g = GraphSampler::new(f, x0, x1);
            if interval > 0.0 {
                g = g.times_interval(0.0, interval);
            }
            (
                box_dimension(&g, &dyadic_scales(lo, hi), args.offsets, args.seed)?,
                target,
            )
        }
        BoxTarget::Boundary => {
            let amplitude: f64 = p.get("amplitude", 0.45)?;
            let r0: f64 = p.get("r0", 1.0)?;
            let grid: usize = p.get("grid", 1 << 16)?;
            let family: String = p.get("family", "weierstrass".to_string())?;
            let (profile, target) = if family == "disk" {
                (
                    RadialProfile::disk(std::f64::consts::PI * r0 * r0)?,
                    Some(3.0),
                )
            } else {
                p.map.insert("family".into(), family);
                let f = fractal_function(&mut p)?;
                let target = f.graph_dimension().map(|d| d + 2.0);
                let source = ProfileSource::Fractal {
                    r0,
                    amplitude,
                    function: f,
                };
                (
                    RadialProfile::new(source, grid, Interpolation::Linear)?,
                    target,
                )
            };
            let mut exp = BoundaryPatchExperiment::new(profile, p.get("a2", 1.0)?);
            exp.theta1 = p.get("theta1", exp.theta1)?;
            exp.theta2 = p.get("theta2", exp.theta2)?;
            exp.r1_fraction = p.get("r1_fraction", exp.r1_fraction)?;
            exp.side = p.get("side", exp.side)?;
            let (lo, hi) = parse_scales(args.scales.as_deref(), (2, 5))?;
            p.finish()?;
            (exp.run(lo, hi, args.offsets, args.seed)?, target)
        }
    };
    let mut out = banner("boxdim");
    out.push_str("eps,count,log_inv_eps,log_count\n");
    for (e, n) in estimate.scales.iter().zip(&estimate.counts) {
        let _ = writeln!(out, "{}", join(&[*e, *n, (1.0 / e).ln(), n.ln()]));
    }
    write_fit(&mut out, &estimate, target);
    Ok(Outcome::ok(out))
}

fn write_fit(out: &mut String, e: &DimensionEstimate, target: Option<f64>) {
    let _ = writeln!(out, "# dimension = {}", e.dimension);
    let _ = writeln!(out, "# ci95_half_width = {}", e.ci_half_width);
    let _ = writeln!(out, "# r_squared = {}", e.r_squared);
    let _ = writeln!(out, "# monotone = {}", e.monotone);
    if let Some(t) = target {
        let _ = writeln!(out, "# reference = {t}");
    }
}

pub(crate) fn verdict(passed: bool) -> &'static str {
    if passed {
        "pass"
    } else {
        "FAIL"
    }
}

pub(crate) fn join(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(",")
}

/// Shortest round-trip form, switching to exponent notation for tiny or huge values.
pub(crate) fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}
