//! The `fractal-drift` command line.
//!
//! Exit codes: 0 on success, 1 when the drift is inadmissible, 2 for usage or
//! configuration errors.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::config::{load_structure, LevelSpec, LoadedStructure, RunConfig, Tolerances};
use crate::convergence::{mean_and_se, ConvergenceLab};
use crate::drift::{
    check_condition_i, verify_sandwich, verify_sd_axioms, DriftSpec, FormAssembly, LevelDrift, SmallnessReport,
};
use crate::error::Error;
use crate::generator::{
    build_generator, empirical_law, point_mass, sample_states, simulate_many, write_trajectories_jsonl,
    write_trajectory_grid_csv, GeneratorMatrix,
};
use crate::model::{FractalModel, Level};
use crate::spectral::{markov_check, Resolvent, Semigroup};
use crate::textio::{read_dense_function, write_vertex_function};
use crate::VertexId;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INADMISSIBLE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Assumption {
    /// Conditions I and II
    #[value(name = "A", alias = "a")]
    A,
    /// Conditions I and III
    #[value(name = "B", alias = "b")]
    B,
}

#[derive(Debug, Parser)]
#[command(name = "fractal-drift", version, about = "Drift-perturbed forms on self-similar fractals")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check the smallness conditions and the semi-Dirichlet axioms
    Check,
    /// Solve (α − L_n) u = f at the working level
    Resolvent,
    /// Apply T_t = exp(t L_n) at the working level
    Semigroup,
    /// Simulate the level-n jump process
    Simulate,
    /// Compare levels against a reference level
    Converge,
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct Flags {
    /// `sg` or a structure TOML file
    #[arg(long, global = true)]
    pub structure: Option<String>,
    /// Levels, e.g. `1-4` or `1,3,5`; the largest is the working level
    #[arg(long, global = true)]
    pub levels: Option<String>,
    /// `none`, `default` or a drift TOML file
    #[arg(long, global = true)]
    pub drift: Option<String>,
    /// Vertex-function file with the test function
    #[arg(long, global = true)]
    pub function: Option<PathBuf>,
    /// Resolvent parameters (comma separated); defaults to λ + 1
    #[arg(long, global = true, value_delimiter = ',')]
    pub alpha: Option<Vec<f64>>,
    /// Times (comma separated)
    #[arg(long, global = true, value_delimiter = ',')]
    pub t: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub paths: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub assumption: Option<Assumption>,
    #[arg(long, global = true)]
    pub reference_level: Option<usize>,
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Starting vertex for simulations
    #[arg(long, global = true)]
    pub start: Option<VertexId>,
    /// Run configuration TOML; its keys override flags
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

/// Fully resolved run settings.
#[derive(Debug, Clone)]
pub struct Settings {
    pub structure: String,
    pub levels: Vec<usize>,
    pub drift: String,
    pub function: Option<PathBuf>,
    pub alpha: Option<Vec<f64>>,
    pub t: Vec<f64>,
    pub paths: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub assumption: Assumption,
    pub reference_level: Option<usize>,
    pub delta: Option<f64>,
    pub start: VertexId,
    pub tolerances: Tolerances,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn inadmissible(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INADMISSIBLE,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Inadmissible(_) => EXIT_INADMISSIBLE,
            _ => EXIT_USAGE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

impl Settings {
    pub fn resolve(flags: &Flags) -> CliResult<Self> {
        let run = match &flags.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let levels = match run.levels {
            Some(spec) => spec,
            None => LevelSpec::Text(flags.levels.clone().unwrap_or_else(|| "1-4".into())),
        }
        .levels()?;
        let assumption = match run.assumption.as_deref() {
            Some("A") | Some("a") => Assumption::A,
            Some("B") | Some("b") => Assumption::B,
            Some(other) => return Err(CliError::usage(format!("assumption must be A or B, got `{other}`"))),
            None => flags.assumption.unwrap_or(Assumption::A),
        };
        let t = run.t.or_else(|| flags.t.clone()).unwrap_or_else(|| vec![0.1]);
        if t.is_empty() || t.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(CliError::usage("times must be finite and nonnegative"));
        }
        let alpha = run.alpha.or_else(|| flags.alpha.clone());
        if alpha.as_ref().is_some_and(|a| a.is_empty()) {
            return Err(CliError::usage("alpha list is empty"));
        }
        Ok(Self {
            structure: run.structure.or_else(|| flags.structure.clone()).unwrap_or_else(|| "sg".into()),
            levels,
            drift: run.drift.or_else(|| flags.drift.clone()).unwrap_or_else(|| "none".into()),
            function: run.function.or_else(|| flags.function.clone()),
            alpha,
            t,
            paths: run.paths.or(flags.paths).unwrap_or(1000),
            seed: run.seed.or(flags.seed).unwrap_or(0),
            out: run.out.or_else(|| flags.out.clone()).unwrap_or_else(|| PathBuf::from("out")),
            assumption,
            reference_level: run.reference_level.or(flags.reference_level),
            delta: run.delta.or(flags.delta),
            start: run.start.or(flags.start).unwrap_or(1),
            tolerances: run.tolerances.unwrap_or_default(),
        })
    }

    pub fn working_level(&self) -> usize {
        *self.levels.last().expect("levels are nonempty")
    }
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Diagnostics go to stderr.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let settings = Settings::resolve(&cli.flags)?;
    let ctx = Context::new(settings)?;
    fs::create_dir_all(&ctx.settings.out)?;
    match cli.command {
        Command::Check => cmd_check(&ctx),
        Command::Resolvent => cmd_resolvent(&ctx),
        Command::Semigroup => cmd_semigroup(&ctx),
        Command::Simulate => cmd_simulate(&ctx),
        Command::Converge => cmd_converge(&ctx),
    }
}

struct Context {
    settings: Settings,
    loaded: LoadedStructure,
    drift: DriftSpec,
    /// Level whose resistance diameter is the diameter proxy.
    diam_level: usize,
    diam_proxy: f64,
}

impl Context {
    fn new(settings: Settings) -> CliResult<Self> {
        let loaded = load_structure(&settings.structure)?;
        let diam_level = settings.reference_level.unwrap_or(settings.working_level()).max(settings.working_level());
        let diam_proxy = loaded.model.level(diam_level)?.network.resistance_diameter()?;
        let drift = match settings.drift.as_str() {
            "none" => DriftSpec::none(),
            "default" => DriftSpec::default_admissible(&loaded.model, diam_proxy)?,
            path => DriftSpec::from_toml(&fs::read_to_string(path)?)?,
        };
        Ok(Self {
            settings,
            loaded,
            drift,
            diam_level,
            diam_proxy,
        })
    }

    fn model(&self) -> &FractalModel {
        &self.loaded.model
    }

    fn out(&self, name: &str) -> PathBuf {
        self.settings.out.join(name)
    }

    /// The test function on `level`: from `--function` if given, otherwise
    /// [`default_test_function`].
    fn test_function(&self, level: &Level) -> CliResult<Vec<f64>> {
        if let Some(path) = &self.settings.function {
            let f = read_dense_function(BufReader::new(File::open(path)?), level.vertex_count())?;
            return Ok(f.into_inner());
        }
        Ok(default_test_function(self.model(), level)?)
    }

    /// Level `n` with its drift and generator, after checking Condition I and
    /// the jump rates.
    fn admissible_system(&self, n: usize) -> CliResult<(Level, LevelDrift, GeneratorMatrix)> {
        let level = self.model().level(n)?;
        let drift = self.drift.realize(self.model(), &level)?;
        let cond = check_condition_i(&level.network, &drift, self.diam_proxy)?;
        if !cond.satisfied {
            return Err(CliError::inadmissible(format!(
                "Condition I violated on level {n}: margin {:e} (drift energy {:e}, threshold {:e})",
                cond.margin, cond.drift_energy, cond.threshold
            )));
        }
        let gen = build_generator(&level.network, &drift, &level.measure)?;
        let rates = gen.validate_rates();
        if !rates.valid {
            let v = &rates.violations[0];
            return Err(CliError::inadmissible(format!(
                "negative jump rate on level {n}: factor 1 + eta = {:e} on edge ({}, {})",
                v.factor, v.from, v.to
            )));
        }
        Ok((level, drift, gen))
    }

    fn lambda(&self, level: &Level, drift: &LevelDrift) -> CliResult<f64> {
        let report = SmallnessReport::evaluate(level, drift, self.diam_proxy, self.settings.delta)?;
        report
            .lambda
            .ok_or_else(|| CliError::inadmissible(report.constants_error.unwrap_or_default()))
    }
}

/// The first coordinate when the level has an embedding, otherwise the
/// harmonic function with boundary values `(1, 0, ..., 0)`.
pub fn default_test_function(model: &FractalModel, level: &Level) -> crate::Result<Vec<f64>> {
    if let Some(coords) = &level.complex.coordinates {
        return Ok(coords.iter().map(|p| p[0]).collect());
    }
    let boundary: Vec<(VertexId, f64)> = (0..model.structure.boundary_size())
        .map(|x| (x, if x == 0 { 1.0 } else { 0.0 }))
        .collect();
    Ok(level.network.harmonic_extension(&boundary)?.into_inner())
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn cmd_check(ctx: &Context) -> CliResult<()> {
    let s = &ctx.settings;
    let n = s.working_level();
    let level = ctx.model().level(n)?;
    let drift = ctx.drift.realize(ctx.model(), &level)?;
    let smallness = SmallnessReport::evaluate(&level, &drift, ctx.diam_proxy, s.delta)?;

    let by_level = s
        .levels
        .iter()
        .map(|&k| {
            let lk = ctx.model().level(k)?;
            let dk = ctx.drift.realize(ctx.model(), &lk)?;
            Ok(check_condition_i(&lk.network, &dk, ctx.diam_proxy)?)
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let smallest_passing = s
        .levels
        .iter()
        .zip(&by_level)
        .find(|(_, c)| c.satisfied)
        .map(|(&k, _)| k);

    let gen = build_generator(&level.network, &drift, &level.measure)?;
    let rates = gen.validate_rates();
    let (sandwich, sd) = match smallness.constants() {
        Some(constants) => {
            let assembly = FormAssembly::for_level(&level, &drift)?;
            let sandwich = verify_sandwich(&assembly, &constants, s.tolerances.sd_draws, s.seed);
            let sd = verify_sd_axioms(
                &assembly,
                &level.network,
                &drift,
                &constants,
                ctx.diam_proxy,
                s.tolerances.sd_draws,
                s.seed,
                s.tolerances.sd4,
            )?;
            (Some(sandwich), Some(sd))
        }
        None => (None, None),
    };

    let mut violations = Vec::new();
    if !smallness.condition_i.satisfied {
        violations.push(format!(
            "Condition I violated: margin {:e} (drift energy {:e}, threshold {:e})",
            smallness.condition_i.margin, smallness.condition_i.drift_energy, smallness.condition_i.threshold
        ));
    }
    match s.assumption {
        Assumption::A if !smallness.condition_ii.satisfied => violations.push(format!(
            "Condition II violated: margin {:e} (max {:e}, threshold {:e})",
            smallness.condition_ii.margin, smallness.condition_ii.max, smallness.condition_ii.threshold
        )),
        Assumption::B if !smallness.condition_iii.satisfied => {
            violations.push(format!("Condition III violated: {}", smallness.condition_iii.note))
        }
        _ => {}
    }

    let report = json!({
        "structure": ctx.loaded.name,
        "density": if ctx.loaded.density_assumed { "assumed" } else { "not assumed" },
        "assumption": s.assumption,
        "working_level": n,
        "diam_level": ctx.diam_level,
        "diam_proxy": ctx.diam_proxy,
        "delta": smallness.delta,
        "s": smallness.s,
        "t": smallness.t,
        "lambda": smallness.lambda,
        "smallness": smallness,
        "condition_i_by_level": s.levels.iter().zip(&by_level).map(|(k, c)| json!({
            "level": k,
            "drift_energy": c.drift_energy,
            "threshold": c.threshold,
            "margin": c.margin,
            "satisfied": c.satisfied,
        })).collect::<Vec<_>>(),
        "smallest_passing_level": smallest_passing,
        "rates": rates,
        "sandwich": sandwich,
        "sd": sd,
        "seed": s.seed,
        "passed": violations.is_empty(),
        "violations": violations,
    });
    write_json(&ctx.out("check.json"), &report)?;
    if violations.is_empty() {
        println!("assumption {:?} holds on level {n}", s.assumption);
        Ok(())
    } else {
        Err(CliError::inadmissible(violations.join("; ")))
    }
}

fn cmd_resolvent(ctx: &Context) -> CliResult<()> {
    let n = ctx.settings.working_level();
    let (level, drift, gen) = ctx.admissible_system(n)?;
    let lambda = ctx.lambda(&level, &drift)?;
    let alphas = ctx.settings.alpha.clone().unwrap_or_else(|| vec![lambda + 1.0]);
    let f = ctx.test_function(&level)?;
    let mut rows = Vec::new();
    for (k, &alpha) in alphas.iter().enumerate() {
        if !(alpha > lambda) {
            return Err(CliError::usage(format!("alpha = {alpha} must exceed lambda = {lambda}")));
        }
        let solve = Resolvent::new(&gen, alpha)?.apply(&f)?;
        let file = format!("resolvent_{k}.txt");
        write_vertex_function(BufWriter::new(File::create(ctx.out(&file))?), &solve.values)?;
        rows.push(json!({ "alpha": alpha, "residual": solve.residual, "file": file }));
    }
    write_json(
        &ctx.out("resolvent.json"),
        &json!({ "level": n, "lambda": lambda, "diam_proxy": ctx.diam_proxy, "solves": rows }),
    )?;
    println!("wrote {} resolvent solves on level {n}", alphas.len());
    Ok(())
}

fn cmd_semigroup(ctx: &Context) -> CliResult<()> {
    let n = ctx.settings.working_level();
    let (level, _, gen) = ctx.admissible_system(n)?;
    let f = ctx.test_function(&level)?;
    let sg = Semigroup::new(&gen)?.with_tail(ctx.settings.tolerances.poisson_tail)?;
    let mut rows = Vec::new();
    for (k, &t) in ctx.settings.t.iter().enumerate() {
        let out = sg.apply(t, &f)?;
        let markov = markov_check(&gen, t, 8, ctx.settings.seed, ctx.settings.tolerances.markov_slack)?;
        let file = format!("semigroup_{k}.txt");
        write_vertex_function(BufWriter::new(File::create(ctx.out(&file))?), &out.values)?;
        rows.push(json!({
            "t": t,
            "uniformization_rate": out.uniformization_rate,
            "first_term": out.first_term,
            "last_term": out.last_term,
            "markov_check": markov,
            "file": file,
        }));
    }
    write_json(&ctx.out("semigroup.json"), &json!({ "level": n, "applications": rows }))?;
    println!("wrote {} semigroup applications on level {n}", ctx.settings.t.len());
    Ok(())
}

fn cmd_simulate(ctx: &Context) -> CliResult<()> {
    let s = &ctx.settings;
    let n = s.working_level();
    let (level, drift, gen) = ctx.admissible_system(n)?;
    let dim = level.vertex_count();
    if s.start >= dim {
        return Err(CliError::usage(format!("start vertex {} is not on level {n}", s.start)));
    }
    let chain = gen.jump_parameters()?;
    let initial = point_mass(dim, s.start);
    let horizon = s.t.iter().copied().fold(0.0, f64::max);
    let trajectories = simulate_many(&chain, &initial, horizon, s.seed, s.paths)?;

    write_trajectories_jsonl(BufWriter::new(File::create(ctx.out("trajectories.jsonl"))?), &trajectories)?;
    write_trajectory_grid_csv(BufWriter::new(File::create(ctx.out("grid.csv"))?), &trajectories, &s.t)?;

    let mut summary = csv::Writer::from_path(ctx.out("summary.csv")).map_err(Error::from)?;
    summary.write_record(["time", "vertex", "probability"]).map_err(Error::from)?;
    if !trajectories.is_empty() {
        for &t in &s.t {
            for (x, p) in empirical_law(&trajectories, t, dim)?.iter().enumerate() {
                summary
                    .write_record([format!("{t}"), x.to_string(), format!("{p:e}")])
                    .map_err(Error::from)?;
            }
        }
    }
    summary.flush()?;

    // censored exponential estimate: occupation time over completed sojourns
    let (mut occupation, mut completed) = (0.0, 0usize);
    for tr in &trajectories {
        for (i, &x) in tr.states.iter().enumerate() {
            if x == s.start {
                let end = tr.jump_times.get(i + 1).copied().unwrap_or(tr.horizon);
                occupation += end - tr.jump_times[i];
                completed += usize::from(i + 1 < tr.jump_times.len());
            }
        }
    }
    let holding_mean = (completed > 0).then(|| occupation / completed as f64);
    let holding_se = holding_mean.map(|m| m / (completed as f64).sqrt());

    let f = ctx.test_function(&level)?;
    let paired = if drift.is_zero() || s.paths == 0 {
        None
    } else {
        let base = build_generator(&level.network, &LevelDrift::none(n), &level.measure)?.jump_parameters()?;
        let with = sample_states(&chain, &initial, &s.t, s.seed, s.paths)?;
        let without = sample_states(&base, &initial, &s.t, s.seed, s.paths)?;
        let mut w = csv::Writer::from_path(ctx.out("paired.csv")).map_err(Error::from)?;
        w.write_record(["time", "mean_with_drift", "mean_without_drift", "mean_difference", "standard_error"])
            .map_err(Error::from)?;
        let mut rows = Vec::new();
        for (k, &t) in s.t.iter().enumerate() {
            let (m1, _) = mean_and_se(with.iter().map(|p| f[p[k]]));
            let (m0, _) = mean_and_se(without.iter().map(|p| f[p[k]]));
            let (md, se) = mean_and_se(with.iter().zip(&without).map(|(a, b)| f[a[k]] - f[b[k]]));
            w.write_record([format!("{t}"), format!("{m1:e}"), format!("{m0:e}"), format!("{md:e}"), format!("{se:e}")])
                .map_err(Error::from)?;
            rows.push(json!({ "t": t, "mean_difference": md, "standard_error": se }));
        }
        w.flush()?;
        Some(rows)
    };

    write_json(
        &ctx.out("simulate.json"),
        &json!({
            "level": n,
            "paths": s.paths,
            "seed": s.seed,
            "start": s.start,
            "horizon": horizon,
            "holding_time": {
                "vertex": s.start,
                "rate": chain.rates()[s.start],
                "expected_mean": 1.0 / chain.rates()[s.start],
                "completed_sojourns": completed,
                "occupation_time": occupation,
                "mean": holding_mean,
                "standard_error": holding_se,
            },
            "paired_difference": paired,
        }),
    )?;
    println!("simulated {} paths on level {n}", s.paths);
    Ok(())
}

fn cmd_converge(ctx: &Context) -> CliResult<()> {
    let s = &ctx.settings;
    let reference = s.reference_level.unwrap_or(s.working_level() + 1);
    if reference < s.working_level() {
        return Err(CliError::usage("reference level is below the working level"));
    }
    let mut lab = ConvergenceLab::new(ctx.model().clone(), ctx.drift.clone(), reference, s.delta)?;
    lab.poisson_tail = s.tolerances.poisson_tail;
    let top = ctx.model().level(reference)?;
    let f = ctx.test_function(&top)?;
    let alpha = s.alpha.as_ref().map(|a| a[0]).unwrap_or(lab.constants.lambda + 1.0);
    let t = s.t[0];

    let ks = lab.ks_norm_check(&f, &s.levels)?;
    let res = lab.resolvent_convergence(alpha, &f, &s.levels)?;
    let semi = lab.semigroup_convergence(t, &f, &s.levels)?;
    let start = s.start.min(ctx.model().structure.boundary_size() - 1);
    let path = lab.path_law_convergence(t, std::slice::from_ref(&f), &s.levels, start, s.paths, s.seed)?;

    for report in [&ks, &res, &semi, &path.summary] {
        let name = format!("{}.csv", report.quantity.file_stem());
        report.write_csv(BufWriter::new(File::create(ctx.out(&name))?))?;
    }
    path.write_csv(BufWriter::new(File::create(ctx.out("path_law_mc.csv"))?))?;
    write_json(
        &ctx.out("converge.json"),
        &json!({
            "reference_level": reference,
            "alpha": alpha,
            "time": t,
            "delta": lab.constants.delta,
            "s": lab.constants.s,
            "t": lab.constants.t,
            "lambda": lab.constants.lambda,
            "diam_proxy": lab.diam_proxy,
            "ks_norm": ks,
            "resolvent": res,
            "semigroup": semi,
            "path_law": path,
        }),
    )?;
    println!("wrote convergence reports for levels {:?} against level {reference}", s.levels);
    Ok(())
}
