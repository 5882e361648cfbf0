//! Command dispatch for the `hvfif` binary.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::{
    dimension_bounds, empirical_holder, estimate_dimension, ordinate_factor, smoothness_constants,
    stability_trials, write_records_csv, OmegaSummary, Perturbed, StabilityReport,
};
use crate::config::{load_config, Format, Mode, Problem, RunConfig};
use crate::curve::{BuildOptions, Hvfif};
use crate::error::{Error, Result};
use crate::eval::{node_tolerance, rb_iterate, subdivide, Method, SampleSet};
use crate::output::{write_curve_pgm, write_json};
use crate::surface::{
    dimension_bounds_surface, estimate_dimension_surface, subdivide_surface, Hvbfif, SurfaceOptions,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_HYPOTHESIS: i32 = 2;

const CURVE_PGM_SIZE: (usize, usize) = (1024, 512);

#[derive(Debug, Parser)]
#[command(
    name = "hvfif",
    version,
    about = "Hidden-variable fractal interpolation experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Generate,
    Analyze,
    Stability,
    Surface,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the curve (samples.csv, curve.pgm)
    Generate(RunArgs),
    /// Contraction, dimension, smoothness and empirical estimates (analysis.json, boxcount.csv)
    Analyze(RunArgs),
    /// Seeded perturbation experiments (stability.json)
    Stability(RunArgs),
    /// Sample a surface and bound its dimension (surface.csv, surface.pgm, surface_dimension.json)
    Surface(RunArgs),
}

#[derive(Debug, Clone, clap::Args)]
pub struct RunArgs {
    /// JSON configuration file
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides output.dir)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// RNG seed (overrides analysis.seed)
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Command {
    pub fn split(&self) -> (CommandKind, &RunArgs) {
        match self {
            Command::Generate(a) => (CommandKind::Generate, a),
            Command::Analyze(a) => (CommandKind::Analyze, a),
            Command::Stability(a) => (CommandKind::Stability, a),
            Command::Surface(a) => (CommandKind::Surface, a),
        }
    }
}

/// Result of a successful run.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// Names of hypothesis checks that failed.
    pub failed_hypotheses: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.failed_hypotheses.is_empty() {
            EXIT_OK
        } else {
            EXIT_HYPOTHESIS
        }
    }

    fn flag(&mut self, name: &str, holds: bool) {
        if !holds {
            self.failed_hypotheses.push(name.to_string());
        }
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    dir: PathBuf,
    outcome: Outcome,
}

impl Ctx<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.outcome.files.push(p.clone());
        p
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.path(name))?))
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let p = self.path(name);
        Ok(write_json(&p, value)?)
    }
}

fn config_error(path: &str, e: Error) -> Error {
    match e {
        Error::Config { .. } | Error::Io(_) => e,
        other => Error::Config {
            path: path.into(),
            message: other.to_string(),
        },
    }
}

fn build_curve(cfg: &RunConfig) -> Result<Hvfif> {
    match &cfg.problem {
        Problem::Curve {
            data,
            factors,
            orientations,
        } => {
            let opts = BuildOptions {
                orientations: orientations.clone(),
                permissive: cfg.evaluator.permissive,
            };
            Hvfif::build_with(data.clone(), factors.clone(), &opts)
                .map_err(|e| config_error("factors", e))
        }
        Problem::Surface { .. } => Err(Error::Config {
            path: "mode".into(),
            message: "this command needs a curve configuration".into(),
        }),
    }
}

fn sample_curve(h: &Hvfif, cfg: &RunConfig) -> Result<SampleSet> {
    let ev = &cfg.evaluator;
    match ev.method {
        Method::Subdivision => subdivide(h, cfg.depth()),
        Method::RbIteration => rb_iterate(h, ev.grid_size, ev.max_iters, ev.tol),
    }
    .map_err(|e| config_error("evaluator", e))
}

fn echo(cfg: &RunConfig) -> Value {
    let mut v = cfg.source.clone();
    v["analysis"]["seed"] = json!(cfg.analysis.seed);
    v
}

// a serializable value, or the error that prevented computing it
fn or_error<T: Serialize>(r: &Result<T>) -> Value {
    match r {
        Ok(v) => serde_json::to_value(v).expect("report serializes"),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn generate(ctx: &mut Ctx) -> Result<()> {
    let h = build_curve(ctx.cfg)?;
    ctx.outcome.flag("contraction", h.contraction().contractive);
    let s = sample_curve(&h, ctx.cfg)?;
    if !s.converged {
        eprintln!("warning: operator iteration stopped before reaching tol");
    }
    if ctx.cfg.output.wants(Format::Csv) {
        s.write_csv(ctx.create("samples.csv")?)?;
    }
    if ctx.cfg.output.wants(Format::Pgm) {
        let (w, hgt) = CURVE_PGM_SIZE;
        write_curve_pgm(&s, ctx.create("curve.pgm")?, w, hgt)?;
    }
    Ok(())
}

fn analyze(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let h = build_curve(cfg)?;
    let samples = sample_curve(&h, cfg)?;
    let mut dimension = dimension_bounds(&h);
    let boxes = estimate_dimension(&h, &cfg.analysis.scales);
    if let Ok(e) = &boxes {
        dimension.empirical = Some(e.clone());
        if cfg.output.wants(Format::Csv) {
            write_records_csv(&e.records, ctx.create("boxcount.csv")?)?;
        }
    }
    let smooth = smoothness_constants(&h, &samples);
    let omega = OmegaSummary::of(&h);
    let ordinate = (omega.omega + omega.omega_tilde < 1.0)
        .then(|| ordinate_factor(omega.omega, omega.omega_tilde));
    let holder = empirical_holder(&samples);

    let contractive = h.contraction().contractive;
    let hyp = &dimension.hypothesis;
    let mesh = omega.check_mesh().is_ok();
    let flags = json!({
        "contraction": contractive,
        "dimension_uniform_nodes": hyp.uniform_nodes,
        "dimension_sign_condition": hyp.sign_condition,
        "dimension_triple": hyp.triple.is_some(),
        "smoothness_mesh": mesh,
        "stability_omega_sum": ordinate.is_some(),
    });
    for (k, v) in flags.as_object().unwrap() {
        ctx.outcome.flag(k, v.as_bool().unwrap());
    }
    let report = json!({
        "config_echo": echo(cfg),
        "contraction": h.contraction(),
        "dimension": dimension,
        "smoothness": {
            "omega": omega,
            "mesh_hypothesis": mesh,
            "constants": or_error(&smooth),
        },
        "stability": {
            "omega": omega.omega,
            "omega_tilde": omega.omega_tilde,
            "ordinate_factor": ordinate,
            "mesh_hypothesis": mesh,
        },
        "empirical": {
            "samples": {
                "method": samples.method,
                "steps": samples.steps,
                "count": samples.len(),
                "residual": samples.residual,
                "converged": samples.converged,
                "node_error": samples.node_error(&h),
                "node_tolerance": node_tolerance(&h),
            },
            "box_counting": or_error(&boxes),
            "holder": or_error(&holder),
        },
        "hypotheses": flags,
    });
    if cfg.output.wants(Format::Json) {
        ctx.json("analysis.json", &report)?;
    }
    Ok(())
}

fn stability(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let h = build_curve(cfg)?;
    let st = &cfg.analysis.stability;
    let smooth = if st
        .which
        .iter()
        .any(|w| matches!(w, Perturbed::X | Perturbed::All))
    {
        smoothness_constants(&h, &sample_curve(&h, cfg)?).ok()
    } else {
        None
    };
    let settings = cfg.evaluator.settings(cfg.depth());
    let mut reports: Vec<StabilityReport> = Vec::new();
    for &which in &st.which {
        let mut mags = st.magnitudes;
        // only the perturbed quantities move
        match which {
            Perturbed::X => (mags.y, mags.z) = (0.0, 0.0),
            Perturbed::Y => (mags.x, mags.z) = (0.0, 0.0),
            Perturbed::Z => (mags.x, mags.y) = (0.0, 0.0),
            Perturbed::All => {}
        }
        match stability_trials(
            &h,
            which,
            mags,
            st.trials,
            cfg.analysis.seed,
            smooth.as_ref(),
            &settings,
        ) {
            Ok(r) => reports.extend(r),
            Err(e @ (Error::Hypothesis(_) | Error::InvalidInput(_))) => {
                eprintln!("stability {}: skipped: {e}", which.name());
                ctx.outcome
                    .flag(&format!("stability_{}", which.name()), false);
            }
            Err(e) => return Err(config_error("analysis.stability", e)),
        }
    }
    ctx.json("stability.json", &reports)
}

fn surface(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let Problem::Surface { data, factors } = &cfg.problem else {
        return Err(Error::Config {
            path: "mode".into(),
            message: "the surface command needs \"mode\": \"surface\"".into(),
        });
    };
    let opts = SurfaceOptions {
        permissive: cfg.evaluator.permissive,
    };
    let h = Hvbfif::build_with(data.clone(), factors.clone(), opts)
        .map_err(|e| config_error("factors", e))?;
    let s = subdivide_surface(&h, cfg.depth()).map_err(|e| config_error("evaluator.depth", e))?;
    if cfg.output.wants(Format::Csv) {
        s.write_csv(ctx.create("surface.csv")?)?;
    }
    if cfg.output.wants(Format::Pgm) {
        s.write_pgm(ctx.create("surface.pgm")?, cfg.output.pgm_maxval)?;
    }
    let explicit_scales =
        cfg.source["analysis"].get("scales").is_some() && !cfg.analysis.scales.is_empty();
    let scales = explicit_scales.then_some(cfg.analysis.scales.as_slice());
    let empirical = estimate_dimension_surface(&s, data.n(), data.m(), scales);
    let mut dim = dimension_bounds_surface(&h);
    if let (Ok(d), Ok(e)) = (&mut dim, &empirical) {
        d.empirical = Some(e.clone());
    }
    ctx.outcome.flag("contraction", h.contractive());
    ctx.outcome.flag("sign_condition", h.sign_condition());
    match &dim {
        Ok(d) => {
            ctx.outcome.flag("square_grid", d.hypothesis.square_grid);
            ctx.outcome
                .flag("slice_triple", d.hypothesis.slice.is_some());
        }
        Err(_) => ctx.outcome.flag("square_grid", false),
    }
    let report = json!({
        "config_echo": echo(cfg),
        "contraction": {
            "s_bar": h.s_bar(),
            "contractive": h.contractive(),
            "sign_condition": h.sign_condition(),
            "violations": h.violations(),
        },
        "samples": {
            "depth": s.depth,
            "nx": s.x.len(),
            "ny": s.y.len(),
            "node_error": s.node_error(data),
        },
        "dimension": or_error(&dim),
        "empirical": or_error(&empirical),
    });
    if cfg.output.wants(Format::Json) {
        ctx.json("surface_dimension.json", &report)?;
    }
    Ok(())
}

/// Runs one command against a loaded configuration, writing into `dir`.
pub fn run(kind: CommandKind, cfg: &RunConfig, dir: &Path) -> Result<Outcome> {
    if kind != CommandKind::Surface && cfg.mode == Mode::Surface {
        return Err(Error::Config {
            path: "mode".into(),
            message: "surface configurations only support the surface command".into(),
        });
    }
    std::fs::create_dir_all(dir)?;
    let mut ctx = Ctx {
        cfg,
        dir: dir.to_path_buf(),
        outcome: Outcome::default(),
    };
    match kind {
        CommandKind::Generate => generate(&mut ctx)?,
        CommandKind::Analyze => analyze(&mut ctx)?,
        CommandKind::Stability => stability(&mut ctx)?,
        CommandKind::Surface => surface(&mut ctx)?,
    }
    Ok(ctx.outcome)
}

/// Loads the config named in `args`, applies overrides and runs.
pub fn execute(kind: CommandKind, args: &RunArgs) -> Result<Outcome> {
    let mut cfg = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.analysis.seed = seed;
    }
    let dir = args.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    run(kind, &cfg, &dir).map_err(|e| match e {
        Error::Config { path, message } => Error::Config {
            path: format!("{}: {path}", args.config.display()),
            message,
        },
        other => other,
    })
}

/// Entry point: parses arguments, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    let (kind, args) = cli.command.split();
    match execute(kind, args) {
        Ok(outcome) => {
            for f in &outcome.failed_hypotheses {
                eprintln!("hypothesis not satisfied: {f}");
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}
