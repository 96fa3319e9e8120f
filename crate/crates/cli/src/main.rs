use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use lacuna::config::{CexConfig, ExperimentConfig, GeneratorSpec};
use lacuna::directions::{sigma_set, DirectionSet, Dissection};
use lacuna::grid::{Field, Grid};
use lacuna::io::{read_field, read_field_csv, write_field, write_field_csv};
use lacuna::normlab::{
    counterexample_build, estimate_maximal_norm, growth_experiment, model_outer_norm, tensor_consistency,
    MultiplierFamily,
};
use lacuna::operators::{dyadic_radii, hilbert_dir, maximal_hilbert, maximal_set, strong_maximal};
use lacuna::plot::growth_svg;
use lacuna::suite::identity_suite;
use lacuna::weights::{
    a1_constant, rubio_de_francia, weight_field, weighted_norm_probe, write_probe_csv, SegmentFamily, Weight,
    WeightFamily,
};
use lacuna::Error;

const EXIT_VERIFY: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_BUDGET: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "lacuna", version, about = "Directional Hilbert transform and maximal operator laboratory")]
struct Cli {
    /// JSON experiment config; flags override its fields
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Grid as DIMxSIDE, e.g. 2x64
    #[arg(long, global = true, value_parser = parse_grid)]
    grid: Option<Grid>,
    /// Worker threads (LACUNA_THREADS takes precedence)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Print the resolved plan and exit without computing
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a direction set as JSON
    Gen(GenArgs),
    /// Sector and cell table of a direction set as CSV
    Dissect(SetArgs),
    /// Apply an operator to a field file
    Apply(ApplyArgs),
    /// Run the symbol and decomposition identity suite
    Verify,
    /// Estimate one maximal Hilbert transform norm
    Norm(NormArgs),
    /// Norm growth over the configured N list
    Growth(SetArgs),
    /// Counterexample experiment
    Cex,
    /// Weighted norm and A_p probes with a Rubio de Francia majorant
    Weights(SetArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    Carbery,
    Nsw,
    Lacunary2d,
    Slopes,
    Uniform,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    /// Dimension (carbery, uniform) or member count (nsw, slopes)
    #[arg(long)]
    n: Option<usize>,
    /// Exponent range lo..hi for carbery
    #[arg(long, value_parser = parse_range)]
    range: Option<(i32, i32)>,
    #[arg(long, default_value_t = 1)]
    order: u32,
    #[arg(long, default_value_t = 4)]
    depth: usize,
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    alphas: Vec<f64>,
    #[arg(long, default_value = "directions.json")]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct SetArgs {
    /// Direction set JSON; the config generator is used otherwise
    #[arg(long)]
    directions: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Op {
    Hilbert,
    MaximalHilbert,
    Maximal,
    Strong,
}

#[derive(Args, Debug)]
struct ApplyArgs {
    #[arg(long, value_enum)]
    op: Op,
    /// Field file, .bin or .csv
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    set: SetArgs,
    /// Member used by `hilbert`
    #[arg(long, default_value_t = 0)]
    index: usize,
}

#[derive(Args, Debug)]
struct NormArgs {
    #[command(flatten)]
    set: SetArgs,
    /// Prefix size; the largest configured N by default
    #[arg(long)]
    n: Option<usize>,
}

fn parse_grid(s: &str) -> Result<Grid, String> {
    let (d, side) = s.split_once('x').ok_or("expected DIMxSIDE")?;
    let d = d.trim().parse::<usize>().map_err(|e| e.to_string())?;
    let side = side.trim().parse::<usize>().map_err(|e| e.to_string())?;
    Grid::unit(d, side).map_err(|e| e.to_string())
}

fn parse_range(s: &str) -> Result<(i32, i32), String> {
    let (a, b) = s.split_once("..").ok_or("expected lo..hi")?;
    let lo = a.trim().parse::<i32>().map_err(|e| e.to_string())?;
    let hi = b.trim().parse::<i32>().map_err(|e| e.to_string())?;
    if lo > hi {
        return Err("empty range".into());
    }
    Ok((lo, hi))
}

enum Failure {
    Config(String),
    Budget(String),
    Verify(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        match e {
            Error::Budget(_) => Failure::Budget(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure::Config(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Failure {
        Failure::Config(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Failure {
        Failure::Config(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

struct Ctx {
    cfg: ExperimentConfig,
    out_dir: PathBuf,
    dry_run: bool,
    threads: Option<usize>,
}

impl Ctx {
    fn path(&self, name: impl AsRef<Path>) -> PathBuf {
        let name = name.as_ref();
        if name.is_absolute() {
            name.to_path_buf()
        } else {
            self.out_dir.join(name)
        }
    }

    fn create(&self, name: impl AsRef<Path>) -> Result<BufWriter<File>, Failure> {
        fs::create_dir_all(&self.out_dir)?;
        let p = self.path(name);
        log::info!("writing {}", p.display());
        Ok(BufWriter::new(File::create(p)?))
    }

    fn write_json(&self, name: &str, value: &impl serde::Serialize) -> Outcome {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    /// Prints the plan and reports whether computation should be skipped.
    fn plan(&self, command: &str, extra: serde_json::Value, outputs: &[PathBuf]) -> bool {
        if !self.dry_run {
            return false;
        }
        let plan = json!({
            "command": command,
            "config": self.cfg,
            "threads": self.threads,
            "out_dir": self.out_dir,
            "args": extra,
            "outputs": outputs,
        });
        println!("{}", serde_json::to_string_pretty(&plan).unwrap_or_default());
        true
    }

    fn direction_set(&self, args: &SetArgs) -> Result<DirectionSet, Failure> {
        match &args.directions {
            Some(p) => Ok(DirectionSet::from_json(&fs::read_to_string(p)?)?),
            None => Ok(self.cfg.generator.build()?),
        }
    }
}

fn generator(args: &GenArgs, fallback: &GeneratorSpec) -> Result<GeneratorSpec, Failure> {
    let Some(kind) = args.kind else {
        return Ok(fallback.clone());
    };
    let need_n = || args.n.ok_or_else(|| Failure::Config("--n is required for this kind".into()));
    Ok(match kind {
        Kind::Carbery => {
            let (lo, hi) = args.range.unwrap_or((0, 3));
            GeneratorSpec::Carbery { n: need_n()?, lo, hi }
        }
        Kind::Nsw => GeneratorSpec::Nsw { lambda: args.lambda, alphas: args.alphas.clone(), count: need_n()? },
        Kind::Lacunary2d => GeneratorSpec::Lacunary2d { order: args.order, depth: args.depth },
        Kind::Slopes => GeneratorSpec::Slopes { count: need_n()? },
        Kind::Uniform => GeneratorSpec::Uniform { n: need_n()? },
    })
}

fn read_any_field(path: &Path) -> Result<Field, Failure> {
    let file = File::open(path)?;
    let f = if path.extension().is_some_and(|e| e == "csv") {
        read_field_csv(file)?
    } else {
        read_field(std::io::BufReader::new(file))?
    };
    Ok(f)
}

fn write_any_field(ctx: &Ctx, path: &Path, f: &Field) -> Outcome {
    let mut w = ctx.create(path)?;
    if path.extension().is_some_and(|e| e == "csv") {
        write_field_csv(f, &mut w)?;
    } else {
        write_field(f, &mut w)?;
    }
    w.flush()?;
    Ok(())
}

fn gen(ctx: &Ctx, args: &GenArgs) -> Outcome {
    let spec = generator(args, &ctx.cfg.generator)?;
    if ctx.plan("gen", json!({ "generator": spec }), &[ctx.path(&args.output)]) {
        return Ok(());
    }
    let set = spec.build()?;
    log::info!("generated {} directions in {} dimensions", set.len(), set.dims());
    let mut w = ctx.create(&args.output)?;
    writeln!(w, "{}", set.to_json()?)?;
    w.flush()?;
    Ok(())
}

fn dissect(ctx: &Ctx, args: &SetArgs) -> Outcome {
    if ctx.plan("dissect", json!({ "directions": args.directions }), &[ctx.path("cells.csv")]) {
        return Ok(());
    }
    let set = ctx.direction_set(args)?;
    let diss = match set.basis() {
        Some(b) => Dissection::new(b.clone()),
        None => Dissection::canonical(set.dims()),
    };
    let mut w = ctx.create("cells.csv")?;
    set.write_cell_table(&diss, &mut w)?;
    w.flush()?;
    Ok(())
}

fn apply(ctx: &Ctx, args: &ApplyArgs) -> Outcome {
    let extra = json!({ "op": format!("{:?}", args.op), "input": args.input, "index": args.index });
    if ctx.plan("apply", extra, &[ctx.path(&args.output)]) {
        return Ok(());
    }
    let f = read_any_field(&args.input)?;
    let out = match args.op {
        Op::Strong => strong_maximal(&f),
        op => {
            let set = ctx.direction_set(&args.set)?;
            match op {
                Op::Hilbert => {
                    let omega = set
                        .members()
                        .get(args.index)
                        .ok_or_else(|| Failure::Config(format!("index {} outside a set of {}", args.index, set.len())))?;
                    hilbert_dir(&f, omega, ctx.cfg.convention)?
                }
                Op::MaximalHilbert => maximal_hilbert(&f, &set, ctx.cfg.convention)?,
                _ => maximal_set(&f, &set, &dyadic_radii(f.grid()))?,
            }
        }
    };
    write_any_field(ctx, &args.output, &out)
}

fn verify(ctx: &Ctx) -> Outcome {
    if ctx.plan("verify", json!({}), &[ctx.path("verify.json")]) {
        return Ok(());
    }
    let checks = identity_suite(ctx.cfg.seed)?;
    let pass = checks.iter().all(|c| c.pass);
    for c in &checks {
        println!("{} {}: {:.3e} (tolerance {:.1e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.tolerance);
    }
    ctx.write_json("verify.json", &json!({ "seed": ctx.cfg.seed, "pass": pass, "checks": checks }))?;
    if pass {
        Ok(())
    } else {
        Err(Failure::Verify("identity suite reported failures".into()))
    }
}

fn norm(ctx: &Ctx, args: &NormArgs) -> Outcome {
    let n = args.n.unwrap_or(*ctx.cfg.n_list.last().unwrap_or(&1));
    if ctx.plan("norm", json!({ "n": n, "directions": args.set.directions }), &[ctx.path("norm.json")]) {
        return Ok(());
    }
    let set = ctx.direction_set(&args.set)?;
    if n == 0 || n > set.len() {
        return Err(Failure::Config(format!("N must lie in 1..={}", set.len())));
    }
    let subset = set.prefix(n);
    let fam = MultiplierFamily::halfspaces(ctx.cfg.grid, &subset, ctx.cfg.convention)?;
    let mut rep = estimate_maximal_norm(&fam, &ctx.cfg.estimator(), None)?;
    rep.subset = Some(subset);
    println!("N = {n}: estimate {:.6}", rep.estimate);
    ctx.write_json("norm.json", &rep)
}

fn growth(ctx: &Ctx, args: &SetArgs) -> Outcome {
    let outputs = [ctx.path("growth.csv"), ctx.path("growth.svg")];
    if ctx.plan("growth", json!({ "directions": args.directions }), &outputs) {
        return Ok(());
    }
    let set = ctx.direction_set(args)?;
    let (table, _) = growth_experiment(&set, &ctx.cfg.n_list, &ctx.cfg.grid, ctx.cfg.convention, &ctx.cfg.estimator())?;
    let mut w = ctx.create("growth.csv")?;
    table.write_csv(&mut w)?;
    w.flush()?;
    let mut s = ctx.create("growth.svg")?;
    s.write_all(growth_svg(&table, "maximal Hilbert transform norm").as_bytes())?;
    s.flush()?;
    println!("c√(ln N): c = {:.4}, residual {:.4}", table.sqrt_log.c, table.sqrt_log.residual);
    println!("c·ln N:   c = {:.4}, residual {:.4}", table.log.c, table.log.residual);
    Ok(())
}

fn cex(ctx: &Ctx) -> Outcome {
    let cc = ctx.cfg.cex.clone().unwrap_or_else(CexConfig::default);
    let outputs = [ctx.path("cex.csv"), ctx.path("cex_cells.csv"), ctx.path("cex_tensor.json")];
    if ctx.plan("cex", json!({ "cex": cc }), &outputs) {
        return Ok(());
    }
    if cc.n_list.is_empty() || cc.n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Failure::Config("cex N list must be nonempty and strictly increasing".into()));
    }
    let grid = Grid::unit(2, cc.side)?;
    let est = ctx.cfg.estimator();
    let mut w = csv::Writer::from_writer(ctx.create("cex.csv")?);
    w.write_record(["n", "directions", "factor_norm", "estimate", "log_power", "ratio"])?;
    let mut warm = None;
    let mut last = None;
    for &n in &cc.n_list {
        let spec = counterexample_build(cc.d, n)?;
        let rep = model_outer_norm(cc.d, n, &grid, &est, warm.as_deref())?;
        let log_power = (n as f64).ln().powf(cc.d as f64 / 2.0);
        println!("N = {n}: {} directions, estimate {:.6}", spec.directions.len(), rep.estimate);
        w.write_record([
            n.to_string(),
            spec.directions.len().to_string(),
            format!("{:.12e}", rep.factor_norm),
            format!("{:.12e}", rep.estimate),
            format!("{:.12e}", log_power),
            format!("{:.12e}", rep.estimate / log_power),
        ])?;
        warm = Some(rep.factor.witness);
        last = Some(spec);
    }
    w.flush()?;
    if let Some(spec) = last {
        let mut c = csv::Writer::from_writer(ctx.create("cex_cells.csv")?);
        let mut header: Vec<String> = (1..=spec.d).map(|k| format!("m{k}")).collect();
        header.extend(sigma_set(2 * spec.d).iter().map(|p| format!("l{}{}", p.first + 1, p.second + 1)));
        c.write_record(&header)?;
        for (t, cell) in spec.tuples.iter().zip(&spec.cells) {
            let row: Vec<String> =
                t.iter().map(|m| m.to_string()).chain(cell.entries().iter().map(|l| l.to_string())).collect();
            c.write_record(&row)?;
        }
        c.flush()?;
    }
    if cc.d == 2 {
        let tc = tensor_consistency(cc.n_list[0].max(2), 16, ctx.cfg.seed)?;
        println!("tensor check: composition gap {:.2e}, sup gap {:.2e}", tc.composition_gap, tc.sup_gap);
        ctx.write_json("cex_tensor.json", &tc)?;
    }
    Ok(())
}

fn weights(ctx: &Ctx, args: &SetArgs) -> Outcome {
    let family = ctx.cfg.weights.clone().unwrap_or(WeightFamily::Power { exponents: vec![0.0, 0.5, 1.0], axis: 0, offset: 1.0 });
    let outputs = [ctx.path("weights.csv"), ctx.path("rdf.json")];
    if ctx.plan("weights", json!({ "weights": family, "directions": args.directions }), &outputs) {
        return Ok(());
    }
    let set = ctx.direction_set(args)?;
    let grid = ctx.cfg.grid;
    let radii = dyadic_radii(&grid);
    let segments = SegmentFamily::dyadic(&grid, &set, (grid.side() / 8).max(1))?;
    let est = ctx.cfg.estimator();
    let mut rows = Vec::new();
    for (label, w) in family.realize(&grid)? {
        let probe = weighted_norm_probe(&label, &set, &radii, 2.0, &w, &segments, &est)?;
        println!("{label}: A_2 {:.4}, norm {:.4}", probe.ap, probe.norm);
        rows.push(probe);
    }
    let mut out = ctx.create("weights.csv")?;
    write_probe_csv(&rows, &mut out)?;
    out.flush()?;

    // Majorant of the last weight, scaled by the largest norm seen.
    let unit = rows.iter().map(|r| r.norm).fold(1.0, f64::max);
    if let Some((label, w)) = family.realize(&grid)?.into_iter().last() {
        let maj = rubio_de_francia(&weight_field(&w), &set, &radii, unit, 8)?;
        let mw = Weight::new(grid, maj.value.clone())?;
        let a1 = a1_constant(&mw, &set, &radii)?;
        let tail = maj.tail.iter().cloned().fold(0.0, f64::max);
        println!("majorant of {label}: A_1 {a1:.4} against 2‖M‖ = {:.4}", 2.0 * unit);
        ctx.write_json(
            "rdf.json",
            &json!({ "weight": label, "terms": maj.terms, "norm": unit, "a1": a1, "bound": 2.0 * unit, "max_tail": tail }),
        )?;
    }
    Ok(())
}

fn resolve(cli: &Cli) -> Result<Ctx, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::from_json(&fs::read_to_string(p)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(g) = cli.grid {
        cfg.grid = g;
    }
    cfg.validate()?;
    let threads = match std::env::var("LACUNA_THREADS") {
        Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| Failure::Config(format!("bad LACUNA_THREADS {v:?}")))?),
        Err(_) => cli.threads,
    };
    Ok(Ctx { cfg, out_dir: cli.out_dir.clone(), dry_run: cli.dry_run, threads })
}

fn run(cli: &Cli) -> Outcome {
    let ctx = resolve(cli)?;
    if let Some(n) = ctx.threads.filter(|_| !ctx.dry_run) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    match &cli.command {
        Command::Gen(a) => gen(&ctx, a),
        Command::Dissect(a) => dissect(&ctx, a),
        Command::Apply(a) => apply(&ctx, a),
        Command::Verify => verify(&ctx),
        Command::Norm(a) => norm(&ctx, a),
        Command::Growth(a) => growth(&ctx, a),
        Command::Cex => cex(&ctx),
        Command::Weights(a) => weights(&ctx, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verify(m)) => {
            eprintln!("verification failed: {m}");
            ExitCode::from(EXIT_VERIFY)
        }
        Err(Failure::Budget(m)) => {
            eprintln!("{m}");
            ExitCode::from(EXIT_BUDGET)
        }
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
