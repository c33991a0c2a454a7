//! Command-line front end. Every command computes all of its outputs in
//! memory first, so usage and domain errors leave no files behind.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::evolution::{self, EvolutionState, EvolveConfig, Scheme};
use crate::fourier::FourierField;
use crate::io::{self, fmt_f64, FileDigest, Meta, RunManifest};
use crate::lattice::{self, fmt_rational, BifurcationSite, Cutoff, RationalFrequency};
use crate::par;
use crate::standing::{self, full_residual, Branch, SolverConfig, StandingSolver};
use crate::travel::{self, TravelConfig, TravelProfile};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "VPAIR_OUT";

#[derive(Debug, Parser)]
#[command(name = "vpair", version, about = "Standing and traveling waves of a counter-rotating vortex filament pair")]
pub struct Cli {
    /// Worker threads; output is bit-reproducible at 1.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Output directory (default: $VPAIR_OUT, else ./out).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Flat `key = value` configuration file; command-line flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact eigenvalues, kernel set and spectral gap.
    Spectrum(SpectrumArgs),
    /// Atlas of bifurcation amplitudes for a fixed q.
    Amplitudes(AmplitudesArgs),
    /// Standing-wave branch from a seeded lattice site.
    Branch(BranchArgs),
    /// Time integration of a snapshot or of the straight pair.
    Evolve(EvolveArgs),
    /// Traveling-wave branch at fixed distance.
    Travel(TravelArgs),
}

#[derive(Debug, Args)]
pub struct SiteArgs {
    #[arg(long)]
    pub p: u64,
    #[arg(long)]
    pub q: u64,
    #[arg(long, default_value_t = 1)]
    pub j0: u64,
    #[arg(long)]
    pub k0: Option<u64>,
    #[arg(long)]
    pub l0: Option<u8>,
    /// Certification box, e.g. 64x32.
    #[arg(long)]
    pub cutoff: Option<Cutoff>,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub site: SiteArgs,
    /// Explicit a^-2 as n/d instead of a seeded site.
    #[arg(long)]
    pub a2inv: Option<String>,
}

#[derive(Debug, Args)]
pub struct AmplitudesArgs {
    #[arg(long)]
    pub q: u64,
    #[arg(long)]
    pub kmax: u64,
    #[arg(long)]
    pub pmax: u64,
    #[arg(long)]
    pub cutoff: Option<Cutoff>,
}

#[derive(Debug, Args)]
pub struct BranchArgs {
    #[command(flatten)]
    pub site: SiteArgs,
    /// Comma-separated amplitudes, ascending from 0.
    #[arg(long)]
    pub b_grid: Option<String>,
    #[arg(long)]
    pub jmax: Option<usize>,
    #[arg(long)]
    pub kmax: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub oversample: Option<usize>,
    /// Sobolev index of the solver norm.
    #[arg(long)]
    pub sobolev: Option<f64>,
    #[arg(long)]
    pub guard: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    /// Field snapshot of a branch point, or a profile/state line snapshot.
    #[arg(long, conflicts_with = "straight")]
    pub snapshot: Option<PathBuf>,
    /// Evolve the straight pair at this distance instead.
    #[arg(long)]
    pub straight: Option<f64>,
    /// Spatial modes for the straight pair.
    #[arg(long)]
    pub modes: Option<usize>,
    /// Integration time in periods of the input wave (4π for the straight pair).
    #[arg(long)]
    pub periods: Option<f64>,
    /// Integration time, overriding --periods.
    #[arg(long)]
    pub time: Option<f64>,
    /// lawson or midpoint.
    #[arg(long)]
    pub scheme: Option<Scheme>,
    /// Steps per period.
    #[arg(long)]
    pub dt_divisions: Option<usize>,
    /// Collision guard as a fraction of the mean distance.
    #[arg(long)]
    pub collision_guard: Option<f64>,
    #[arg(long)]
    pub sample_every: Option<usize>,
    /// Also integrate back to t = 0 and report the recovery error.
    #[arg(long)]
    pub reverse: bool,
}

#[derive(Debug, Args)]
pub struct TravelArgs {
    #[arg(long)]
    pub a: f64,
    #[arg(long)]
    pub l: u8,
    #[arg(long)]
    pub b_grid: Option<String>,
    #[arg(long)]
    pub modes: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub oversample: Option<usize>,
}

/// Flat configuration file contents.
#[derive(Debug, Default)]
struct Config {
    values: BTreeMap<String, toml::Value>,
}

const CONFIG_KEYS: &[&str] = &[
    "cutoff", "b_grid", "jmax", "kmax", "tol", "max_iter", "oversample", "sobolev", "guard", "secant_tol",
    "secant_max_iter", "max_halvings", "modes", "scheme", "dt_divisions", "collision_guard", "periods",
    "sample_every",
];

impl Config {
    fn load(path: Option<&Path>) -> Result<(Self, Vec<FileDigest>)> {
        let Some(path) = path else { return Ok((Self::default(), Vec::new())) };
        let text = std::fs::read_to_string(path)?;
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(format!("{}: {e}", path.display())))?;
        let mut values = BTreeMap::new();
        for (k, v) in table {
            if !CONFIG_KEYS.contains(&k.as_str()) {
                return Err(Error::InvalidConfig(format!("unknown configuration key `{k}`")));
            }
            if v.is_table() || v.is_array() {
                return Err(Error::InvalidConfig(format!("configuration key `{k}` must be a scalar")));
            }
            values.insert(k, v);
        }
        let digest = FileDigest { path: path.display().to_string(), sha256: io::sha256_hex(text.as_bytes()) };
        Ok((Self { values }, vec![digest]))
    }

    fn raw(&self, key: &str) -> Option<&toml::Value> {
        self.values.get(key)
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        match self.raw(key) {
            None => Ok(None),
            Some(toml::Value::Float(x)) => Ok(Some(*x)),
            Some(toml::Value::Integer(n)) => Ok(Some(*n as f64)),
            Some(v) => Err(Error::InvalidConfig(format!("`{key}` must be a number, got {v}"))),
        }
    }

    fn usize(&self, key: &str) -> Result<Option<usize>> {
        match self.raw(key) {
            None => Ok(None),
            Some(toml::Value::Integer(n)) if *n >= 0 => Ok(Some(*n as usize)),
            Some(v) => Err(Error::InvalidConfig(format!("`{key}` must be a nonnegative integer, got {v}"))),
        }
    }

    fn string(&self, key: &str) -> Result<Option<String>> {
        match self.raw(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s.clone())),
            Some(v) => Err(Error::InvalidConfig(format!("`{key}` must be a string, got {v}"))),
        }
    }
}

fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(io::parse_f64).collect()
}

const DEFAULT_B_GRID: &[f64] = &[0.0, 0.0125, 0.025, 0.05, 0.1];

fn b_grid(flag: &Option<String>, cfg: &Config) -> Result<Vec<f64>> {
    match flag.clone().or(cfg.string("b_grid")?) {
        Some(s) => parse_grid(&s),
        None => Ok(DEFAULT_B_GRID.to_vec()),
    }
}

fn cutoff(flag: Option<Cutoff>, cfg: &Config) -> Result<Cutoff> {
    match flag {
        Some(c) => Ok(c),
        None => match cfg.string("cutoff")? {
            Some(s) => s.parse(),
            None => Ok(Cutoff::default()),
        },
    }
}

/// Outcome of a command: files to write plus what the manifest records.
struct Outcome {
    files: Vec<(String, String)>,
    warnings: Vec<String>,
}

/// Parses arguments and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let argv: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let recorded: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match run(cli, recorded) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli, args: Vec<String>) -> Result<()> {
    let start = Instant::now();
    if cli.threads == 0 {
        return Err(Error::InvalidConfig("--threads must be at least 1".into()));
    }
    let (cfg, mut inputs) = Config::load(cli.config.as_deref())?;
    let out_dir = cli
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let threads = cli.threads;
    let (name, config) = match &cli.command {
        Command::Spectrum(_) => ("spectrum", resolved_spectrum(&cli, &cfg)?),
        Command::Amplitudes(a) => ("amplitudes", json!({ "cutoff": cutoff_str(cutoff(a.cutoff, &cfg)?), "q": a.q, "kmax": a.kmax, "pmax": a.pmax })),
        Command::Branch(b) => ("branch", resolved_branch(b, &cfg)?),
        Command::Evolve(e) => ("evolve", resolved_evolve(e, &cfg, &mut inputs)?),
        Command::Travel(t) => ("travel", resolved_travel(t, &cfg)?),
    };
    let mut manifest = RunManifest::new(name, args, threads, config.clone(), inputs);
    let digest = manifest.run_digest.clone();
    let outcome = par::with_threads(threads, || match &cli.command {
        Command::Spectrum(s) => cmd_spectrum(s, &cfg, &digest),
        Command::Amplitudes(a) => cmd_amplitudes(a, &cfg, &digest),
        Command::Branch(b) => cmd_branch(b, &cfg, &config, &digest),
        Command::Evolve(e) => cmd_evolve(e, &cfg, &digest),
        Command::Travel(t) => cmd_travel(t, &cfg, &digest),
    })?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    io::write_outputs(&out_dir, &outcome.files, &mut manifest)?;
    Ok(())
}

fn cutoff_str(c: Cutoff) -> String {
    format!("{}x{}", c.j_max, c.k_max)
}

fn resolved_spectrum(cli: &Cli, cfg: &Config) -> Result<serde_json::Value> {
    let Command::Spectrum(s) = &cli.command else { unreachable!() };
    Ok(json!({
        "p": s.site.p, "q": s.site.q, "j0": s.site.j0, "k0": s.site.k0, "l0": s.site.l0,
        "a2inv": s.a2inv, "cutoff": cutoff_str(cutoff(s.site.cutoff, cfg)?),
    }))
}

fn solver_config(b: &BranchArgs, cfg: &Config) -> Result<SolverConfig> {
    let d = SolverConfig::default();
    let sc = SolverConfig {
        s: pick(b.sobolev, cfg.f64("sobolev")?, d.s),
        tol: pick(b.tol, cfg.f64("tol")?, d.tol),
        max_iter: pick(b.max_iter, cfg.usize("max_iter")?, d.max_iter),
        oversample: pick(b.oversample, cfg.usize("oversample")?, d.oversample),
        guard: pick(b.guard, cfg.f64("guard")?, d.guard),
        j_max: pick(b.jmax, cfg.usize("jmax")?, d.j_max),
        k_max: pick(b.kmax, cfg.usize("kmax")?, d.k_max),
        secant_tol: pick(None, cfg.f64("secant_tol")?, d.secant_tol),
        secant_max_iter: pick(None, cfg.usize("secant_max_iter")?, d.secant_max_iter),
        secant_offset: d.secant_offset,
        max_halvings: pick(None, cfg.usize("max_halvings")?, d.max_halvings),
    };
    sc.validate()?;
    Ok(sc)
}

fn resolved_branch(b: &BranchArgs, cfg: &Config) -> Result<serde_json::Value> {
    Ok(json!({
        "p": b.site.p, "q": b.site.q, "j0": b.site.j0, "k0": b.site.k0, "l0": b.site.l0,
        "cutoff": cutoff_str(cutoff(b.site.cutoff, cfg)?),
        "b_grid": b_grid(&b.b_grid, cfg)?.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>(),
        "solver": serde_json::to_value(solver_config(b, cfg)?).map_err(|e| Error::Parse(e.to_string()))?,
    }))
}

fn evolve_config(e: &EvolveArgs, cfg: &Config, period: f64) -> Result<EvolveConfig> {
    let d = EvolveConfig::default();
    let scheme = match (e.scheme, cfg.string("scheme")?) {
        (Some(s), _) => s,
        (None, Some(s)) => s.parse()?,
        (None, None) => d.scheme,
    };
    let divisions = pick(e.dt_divisions, cfg.usize("dt_divisions")?, 4096);
    if divisions == 0 {
        return Err(Error::InvalidConfig("dt_divisions must be positive".into()));
    }
    let ec = EvolveConfig {
        dt: period / divisions as f64,
        scheme,
        collision_guard: pick(e.collision_guard, cfg.f64("collision_guard")?, d.collision_guard),
        oversample: pick(None, cfg.usize("oversample")?, d.oversample),
        sample_every: pick(e.sample_every, cfg.usize("sample_every")?, d.sample_every),
        ..d
    };
    ec.validate()?;
    Ok(ec)
}

fn resolved_evolve(e: &EvolveArgs, cfg: &Config, inputs: &mut Vec<FileDigest>) -> Result<serde_json::Value> {
    if e.snapshot.is_none() && e.straight.is_none() {
        return Err(Error::InvalidConfig("evolve needs --snapshot or --straight".into()));
    }
    if let Some(path) = &e.snapshot {
        let bytes = std::fs::read(path)?;
        inputs.push(FileDigest { path: path.display().to_string(), sha256: io::sha256_hex(&bytes) });
    }
    let ec = evolve_config(e, cfg, 1.0)?;
    Ok(json!({
        "straight": e.straight.map(fmt_f64),
        "modes": pick(e.modes, cfg.usize("modes")?, 64),
        "periods": e.periods.or(cfg.f64("periods")?).map(fmt_f64),
        "time": e.time.map(fmt_f64),
        "scheme": ec.scheme,
        "dt_divisions": pick(e.dt_divisions, cfg.usize("dt_divisions")?, 4096),
        "collision_guard": fmt_f64(ec.collision_guard),
        "sample_every": ec.sample_every,
        "reverse": e.reverse,
    }))
}

fn travel_config(t: &TravelArgs, cfg: &Config) -> Result<TravelConfig> {
    let d = TravelConfig::default();
    let tc = TravelConfig {
        modes: pick(t.modes, cfg.usize("modes")?, d.modes),
        tol: pick(t.tol, cfg.f64("tol")?, d.tol),
        oversample: pick(t.oversample, cfg.usize("oversample")?, d.oversample),
        guard: pick(None, cfg.f64("guard")?, d.guard),
        max_halvings: pick(None, cfg.usize("max_halvings")?, d.max_halvings),
        ..d
    };
    tc.validate()?;
    Ok(tc)
}

fn resolved_travel(t: &TravelArgs, cfg: &Config) -> Result<serde_json::Value> {
    let tc = travel_config(t, cfg)?;
    Ok(json!({
        "a": fmt_f64(t.a), "l": t.l,
        "b_grid": b_grid(&t.b_grid, cfg)?.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>(),
        "modes": tc.modes, "tol": fmt_f64(tc.tol), "oversample": tc.oversample,
    }))
}

fn site_from(args: &SiteArgs, cfg: &Config) -> Result<BifurcationSite> {
    let freq = RationalFrequency::new(args.p, args.q)?;
    let (Some(k0), Some(l0)) = (args.k0, args.l0) else {
        return Err(Error::InvalidConfig("a site needs --k0 and --l0".into()));
    };
    if l0 > 1 || args.j0 == 0 || k0 == 0 {
        return Err(Error::InvalidConfig("need j0, k0 >= 1 and l0 in {0,1}".into()));
    }
    BifurcationSite::new(freq, args.j0, k0, l0, cutoff(args.cutoff, cfg)?)
}

#[derive(Serialize)]
struct SpectrumReport {
    p: u64,
    q: u64,
    a2inv: String,
    site: Option<BifurcationSite>,
    kernel: Vec<lattice::LatticeSite>,
    nonresonant: Option<bool>,
    witness: Option<lattice::LatticeSite>,
    gap: lattice::GapReport,
}

fn cmd_spectrum(s: &SpectrumArgs, cfg: &Config, digest: &str) -> Result<Outcome> {
    let freq = RationalFrequency::new(s.site.p, s.site.q)?;
    let cut = cutoff(s.site.cutoff, cfg)?;
    let mut warnings = Vec::new();
    let (a2inv, site) = match (&s.a2inv, s.site.k0.is_some() || s.site.l0.is_some()) {
        (Some(_), true) => return Err(Error::InvalidConfig("give either --a2inv or a site (--k0, --l0), not both".into())),
        (Some(text), false) => {
            let r = lattice::parse_rational(text)?;
            if r <= num_rational::BigRational::from_integer(0.into()) {
                return Err(Error::NonPositiveAmplitude { value: fmt_rational(&r) });
            }
            (r, None)
        }
        (None, _) => {
            let site = site_from(&s.site, cfg)?;
            if !site.nonresonant {
                let w = site.witness.map(|w| w.to_string()).unwrap_or_default();
                warnings.push(format!("site {} is resonant within the cutoff; witness {w}", site.seed()));
            }
            (site.a2inv.clone(), Some(site))
        }
    };
    let kernel = match &site {
        Some(s) => s.kernel.clone(),
        None => lattice::kernel_set(freq, &a2inv, cut),
    };
    let gap = lattice::gap_report(freq, &a2inv, &kernel, cut);
    let rows: Vec<Vec<String>> = lattice::eigenvalue_table(freq, &a2inv, cut)
        .into_iter()
        .map(|(site, lam)| vec![site.j.to_string(), site.k.to_string(), site.l.to_string(), fmt_rational(&lam)])
        .collect();
    let report = SpectrumReport {
        p: freq.p(),
        q: freq.q(),
        a2inv: fmt_rational(&a2inv),
        nonresonant: site.as_ref().map(|s| s.nonresonant),
        witness: site.as_ref().and_then(|s| s.witness),
        site,
        kernel,
        gap,
    };
    Ok(Outcome {
        files: vec![
            ("eigenvalues.csv".into(), io::write_csv(&["j", "k", "l", "lambda"], &rows, digest)?),
            ("spectrum.json".into(), io::write_json(&report, digest)?),
        ],
        warnings,
    })
}

fn cmd_amplitudes(a: &AmplitudesArgs, cfg: &Config, digest: &str) -> Result<Outcome> {
    if a.q == 0 || a.kmax == 0 || a.pmax == 0 {
        return Err(Error::InvalidConfig("q, kmax and pmax must be at least 1".into()));
    }
    let cut = cutoff(a.cutoff, cfg)?;
    let sites = lattice::enumerate_candidates(a.q, a.kmax, a.pmax, cut);
    let rows: Vec<Vec<String>> = sites
        .iter()
        .map(|s| {
            vec![
                fmt_rational(&s.a2inv),
                fmt_f64(s.a0()),
                s.freq.p().to_string(),
                s.freq.q().to_string(),
                s.j0.to_string(),
                s.k0.to_string(),
                s.l0.to_string(),
                s.nonresonant.to_string(),
                s.witness.map(|w| w.to_string()).unwrap_or_default(),
                fmt_rational(&s.period_over_two_pi()),
                s.condition_con.to_string(),
            ]
        })
        .collect();
    let mut distinct: Vec<&num_rational::BigRational> = sites.iter().filter(|s| s.nonresonant).map(|s| &s.a2inv).collect();
    distinct.dedup();
    let summary = json!({
        "q": a.q, "kmax": a.kmax, "pmax": a.pmax, "cutoff": cutoff_str(cut),
        "candidates": sites.len(),
        "nonresonant": sites.iter().filter(|s| s.nonresonant).count(),
        "distinct_nonresonant_amplitudes": distinct.len(),
    });
    let header = ["a2inv", "a0", "p", "q", "j0", "k0", "l0", "nonresonant", "witness", "period_over_2pi", "condition_con"];
    Ok(Outcome {
        files: vec![
            ("amplitudes.csv".into(), io::write_csv(&header, &rows, digest)?),
            ("amplitudes.json".into(), io::write_json(&summary, digest)?),
        ],
        warnings: Vec::new(),
    })
}

/// Metadata identifying a standing-wave snapshot.
fn point_meta(site: &BifurcationSite, a: f64, b: f64) -> Meta {
    let mut m = Meta::new();
    m.insert("kind".into(), "standing-point".into());
    m.insert("p".into(), site.freq.p().to_string());
    m.insert("q".into(), site.freq.q().to_string());
    m.insert("j0".into(), site.j0.to_string());
    m.insert("k0".into(), site.k0.to_string());
    m.insert("l0".into(), site.l0.to_string());
    m.insert("a2inv0".into(), fmt_rational(&site.a2inv));
    m.insert("a".into(), fmt_f64(a));
    m.insert("b".into(), fmt_f64(b));
    m
}

#[derive(Serialize)]
struct PointReport {
    b: String,
    a: String,
    drift_re: String,
    drift_im: String,
    min_abs_w1: String,
    symmetry_max_defect: String,
    pde_residual_sup: String,
}

fn cmd_branch(b: &BranchArgs, cfg: &Config, config: &serde_json::Value, digest: &str) -> Result<Outcome> {
    let site = site_from(&b.site, cfg)?;
    let sc = solver_config(b, cfg)?;
    let grid = b_grid(&b.b_grid, cfg)?;
    let solver = StandingSolver::new(&site, &sc)?;
    let mut warnings = Vec::new();
    let (branch, truncated): (Branch, Option<String>) = match solver.continue_branch(&grid) {
        Ok(br) => (br, None),
        Err(Error::BranchTruncated { b_reached, branch, cause }) => {
            warnings.push(format!("branch truncated at b = {b_reached}: {cause}"));
            (*branch, Some(cause.to_string()))
        }
        Err(e) => return Err(e),
    };
    let mut rows = Vec::new();
    let mut files = Vec::new();
    let mut points = Vec::new();
    for (i, pt) in branch.points.iter().enumerate() {
        rows.push(vec![
            fmt_f64(pt.b),
            fmt_f64(pt.a),
            fmt_f64(pt.range_residual),
            fmt_f64(pt.full_residual),
            pt.iterations.to_string(),
            fmt_f64(pt.w.sobolev_norm(sc.s)),
            pt.roundoff_limited.to_string(),
            pt.root_evaluations.to_string(),
        ]);
        let sol = solver.assemble(pt)?;
        let n = 2 * sc.j_max.max(sc.k_max) + 2;
        points.push(PointReport {
            b: fmt_f64(pt.b),
            a: fmt_f64(pt.a),
            drift_re: fmt_f64(sol.drift.re),
            drift_im: fmt_f64(sol.drift.im),
            min_abs_w1: fmt_f64(sol.min_abs_w1),
            symmetry_max_defect: fmt_f64(sol.symmetry.max_defect()),
            pde_residual_sup: fmt_f64(full_residual(&sol, n, n).sup),
        });
        let mut u = pt.u();
        u.symmetry = Some(site.standing_symmetry());
        files.push((format!("point_{i:03}.field"), io::write_field(&u, &point_meta(&site, pt.a, pt.b), digest)));
    }
    let header = ["b", "a", "range_residual", "full_residual", "iterations", "w_norm_hs", "roundoff_limited", "root_evaluations"];
    files.insert(0, ("branch.csv".into(), io::write_csv(&header, &rows, digest)?));
    let report = json!({
        "site": site,
        "config": config,
        "fit": {
            "w_exponent": branch.fit.w_exponent.map(fmt_f64),
            "a_exponent": branch.fit.a_exponent.map(fmt_f64),
            "points_used": branch.fit.points_used,
        },
        "truncated": truncated,
        "points": points,
    });
    files.insert(1, ("branch.json".into(), io::write_json(&report, digest)?));
    Ok(Outcome { files, warnings })
}

/// Initial state, its natural period and an optional profile for the translation check.
struct EvolveInput {
    state: EvolutionState,
    period: f64,
    profile: Option<TravelProfile>,
    label: String,
}

fn evolve_input(e: &EvolveArgs, cfg: &Config, ec: &EvolveConfig) -> Result<EvolveInput> {
    let modes = pick(e.modes, cfg.usize("modes")?, 64);
    if let Some(a) = e.straight {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidConfig("--straight needs a positive distance".into()));
        }
        return Ok(EvolveInput { state: EvolutionState::straight(a, modes), period: 4.0 * std::f64::consts::PI, profile: None, label: "straight".into() });
    }
    let path = e.snapshot.as_ref().expect("checked in resolved_evolve");
    let text = std::fs::read_to_string(path)?;
    if text.lines().any(|l| l.trim() == "format vortex-pair-field 1") {
        let (u, meta) = io::read_field(&text)?;
        let get = |k: &str| meta.get(k).cloned().ok_or_else(|| Error::Parse(format!("snapshot lacks meta `{k}`")));
        let int = |k: &str| -> Result<u64> { get(k)?.parse().map_err(|_| Error::Parse(format!("meta `{k}` is not an integer"))) };
        let freq = RationalFrequency::new(int("p")?, int("q")?)?;
        let l0 = int("l0")? as u8;
        let cut = Cutoff::new((u.j_max() as u64).max(int("j0")?), (u.k_max() as u64).max(int("k0")?))?;
        let site = BifurcationSite::new(freq, int("j0")?, int("k0")?, l0, cut)?;
        let (a, b) = (io::parse_f64(&get("a")?)?, io::parse_f64(&get("b")?)?);
        let sol = standing::assemble_perturbation(&site, a, b, &u, &SolverConfig::default())?;
        let state = evolution::init_from_assembled(&sol, ec)?;
        return Ok(EvolveInput { state, period: sol.period(), profile: None, label: "standing".into() });
    }
    let snap = io::read_line(&text)?;
    match snap.meta.get("kind").map(String::as_str) {
        Some("travel-profile") => {
            let u = snap.field("U").ok_or_else(|| Error::Parse("profile snapshot lacks field U".into()))?;
            let l: u8 = snap.meta.get("l").and_then(|v| v.parse().ok()).ok_or_else(|| Error::Parse("profile snapshot lacks meta l".into()))?;
            let profile = TravelProfile {
                a: snap.meta_f64("a")?,
                l,
                nu: snap.meta_f64("nu")?,
                b: snap.meta_f64("b")?,
                modes: snap.modes,
                coeffs: u.to_vec(),
                residual: snap.meta_f64("residual")?,
                newton_iterations: 0,
            };
            let state = evolution::init_from_profile(&profile, modes.max(profile.modes), ec)?;
            let period = 2.0 * std::f64::consts::PI / profile.nu;
            Ok(EvolveInput { state, period, profile: Some(profile), label: "traveling".into() })
        }
        Some("evolution-state") => {
            let w1 = snap.field("w1").ok_or_else(|| Error::Parse("state snapshot lacks field w1".into()))?;
            let w2 = snap.field("w2").ok_or_else(|| Error::Parse("state snapshot lacks field w2".into()))?;
            let mut state = EvolutionState::new(snap.modes, w1.to_vec(), w2.to_vec())?;
            state.t = snap.meta_f64("t")?;
            Ok(EvolveInput { state, period: 4.0 * std::f64::consts::PI, profile: None, label: "state".into() })
        }
        _ => Err(Error::Parse("line snapshot has no recognised `kind`".into())),
    }
}

fn cmd_evolve(e: &EvolveArgs, cfg: &Config, digest: &str) -> Result<Outcome> {
    // The step depends on the input's period, so read the input with a provisional config.
    let provisional = evolve_config(e, cfg, 1.0)?;
    let input = evolve_input(e, cfg, &provisional)?;
    let ec = evolve_config(e, cfg, input.period)?;
    let periods = pick(e.periods, cfg.f64("periods")?, 1.0);
    let t_span = e.time.unwrap_or(periods * input.period);
    let (end, samples) = evolution::integrate(&input.state, t_span, &ec)?;
    let s0 = &input.state;
    let norm = |v: &[Complex64]| v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let diff: Vec<Complex64> = end.w1.iter().zip(&s0.w1).map(|(a, b)| a - b).collect();
    let h0 = samples[0].hamiltonian;
    let reversibility = if e.reverse { Some(evolution::reversibility_check(s0, t_span, &ec)?) } else { None };
    let translation = match &input.profile {
        Some(p) => Some(evolution::translation_error(p, s0.modes, t_span, 16, &ec)?),
        None => None,
    };
    let drift = (end.mean_w2() - s0.mean_w2()) / t_span;
    let summary = json!({
        "input": input.label,
        "modes": s0.modes,
        "t_span": fmt_f64(t_span),
        "dt": fmt_f64(t_span / (t_span.abs() / ec.dt).ceil()),
        "scheme": ec.scheme,
        "return_error": fmt_f64(norm(&diff) / norm(&s0.w1)),
        "mean_w1_change": fmt_f64((end.mean_w1() - s0.mean_w1()).norm()),
        "drift_rate_re": fmt_f64(drift.re),
        "drift_rate_im": fmt_f64(drift.im),
        "hamiltonian_drift": fmt_f64(samples.iter().map(|s| (s.hamiltonian - h0).abs()).fold(0.0, f64::max)),
        "min_abs_w1": fmt_f64(samples.iter().map(|s| s.min_abs_w1).fold(f64::INFINITY, f64::min)),
        "initial_w1_velocity": fmt_f64(s0.w1_velocity()),
        "reversibility_error": reversibility.map(fmt_f64),
        "translation_error": translation.map(fmt_f64),
    });
    let rows: Vec<Vec<String>> = samples
        .iter()
        .map(|s| {
            [s.t, s.mean_w1_re, s.mean_w1_im, s.mean_w2_re, s.mean_w2_im, s.drift_rate_re, s.drift_rate_im, s.min_abs_w1, s.tail_energy, s.hamiltonian]
                .iter()
                .map(|x| fmt_f64(*x))
                .collect()
        })
        .collect();
    let header = [
        "t", "mean_w1_re", "mean_w1_im", "mean_w2_re", "mean_w2_im", "drift_rate_re", "drift_rate_im", "min_abs_w1", "tail_energy", "hamiltonian",
    ];
    let mut meta = Meta::new();
    meta.insert("kind".into(), "evolution-state".into());
    meta.insert("t".into(), fmt_f64(end.t));
    Ok(Outcome {
        files: vec![
            ("diagnostics.csv".into(), io::write_csv(&header, &rows, digest)?),
            ("evolve.json".into(), io::write_json(&summary, digest)?),
            ("final_state.line".into(), io::write_line(end.modes, &[("w1", &end.w1), ("w2", &end.w2)], &meta, digest)),
        ],
        warnings: Vec::new(),
    })
}

fn cmd_travel(t: &TravelArgs, cfg: &Config, digest: &str) -> Result<Outcome> {
    let nu_0 = travel::nu0(t.a, t.l)?;
    let tc = travel_config(t, cfg)?;
    let grid = b_grid(&t.b_grid, cfg)?;
    let profiles = travel::solve_travel_branch(t.a, t.l, &grid, &tc)?;
    let fine = 8 * tc.modes;
    let mut files = Vec::new();
    let mut rows = Vec::new();
    for (i, p) in profiles.iter().enumerate() {
        rows.push(vec![
            fmt_f64(p.b),
            fmt_f64(p.nu),
            fmt_f64(p.residual),
            p.modes.to_string(),
            fmt_f64(travel::travel_residual(p, fine)),
            p.newton_iterations.to_string(),
        ]);
        let mut meta = Meta::new();
        meta.insert("kind".into(), "travel-profile".into());
        meta.insert("a".into(), fmt_f64(p.a));
        meta.insert("l".into(), p.l.to_string());
        meta.insert("nu".into(), fmt_f64(p.nu));
        meta.insert("b".into(), fmt_f64(p.b));
        meta.insert("residual".into(), fmt_f64(p.residual));
        files.push((format!("profile_{i:03}.line"), io::write_line(p.modes, &[("U", &p.coeffs)], &meta, digest)));
    }
    let bs: Vec<f64> = profiles.iter().filter(|p| p.b > 0.0).map(|p| p.b).collect();
    let dn: Vec<f64> = profiles.iter().filter(|p| p.b > 0.0).map(|p| (p.nu - nu_0).abs()).collect();
    let summary = json!({
        "a": fmt_f64(t.a),
        "l": t.l,
        "component": 1 - t.l,
        "nu0": fmt_f64(nu_0),
        "nu_exponent": standing::loglog_slope(&bs, &dn).map(fmt_f64),
        "modes": tc.modes,
    });
    let header = ["b", "nu", "residual", "modes", "fine_residual", "newton_iterations"];
    files.insert(0, ("travel.csv".into(), io::write_csv(&header, &rows, digest)?));
    files.insert(1, ("travel.json".into(), io::write_json(&summary, digest)?));
    Ok(Outcome { files, warnings: Vec::new() })
}

/// Packed zero-mean field from a snapshot, for library users.
pub fn load_field(path: &Path) -> Result<(FourierField, Meta)> {
    io::read_field(&std::fs::read_to_string(path)?)
}
