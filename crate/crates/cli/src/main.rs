use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use hetswarm::controller::{Genotype, RegulatoryPolicy};
use hetswarm::field::{build_arena, ArenaKind, ScalarField};
use hetswarm::harness::evolve::{run_evolution, write_generations_csv};
use hetswarm::harness::manifest::BEST_SELECTION;
use hetswarm::harness::seeds::{derive_seed, tag};
use hetswarm::harness::sweep::{derive_policy, run_ratio_sweep, SweepGrid};
use hetswarm::harness::trial::{write_metrics_csv, write_trajectory_csv};
use hetswarm::harness::validate::run_validation;
use hetswarm::harness::{run_trial, ExperimentConfig, Manifest};
use hetswarm::metrics::two_sample_t;
use hetswarm::render::{render_series, render_snapshot, ColorBy, SnapshotSpec};

/// Worker-thread count for trial evaluation; defaults to all cores.
const THREADS_ENV: &str = "HETSWARM_THREADS";
const MANIFEST: &str = "manifest.toml";
const BEST_GENOTYPE: &str = "best_genotype.txt";

#[derive(Parser)]
#[command(name = "hetswarm", version, about = "Heterogeneous swarm experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// TOML config file; keys not given fall back to the full-scale defaults.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in settings: `desk` or `paper`.
    #[arg(long)]
    preset: Option<String>,
    /// Override one config key, e.g. `--set swarm_size=50`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve controllers with CMA-ES and save the best genotype.
    Evolve {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Run directory to create.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one trial and log its trajectory and metrics.
    Trial {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        genotype: PathBuf,
        /// Regulatory policy (TOML); makes the trial adaptive.
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Trial seed; derived from the master seed when omitted.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-test a genotype over sub-group ratios and spawn distances.
    RatioSweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        genotype: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn a ratio-sweep grid into a light-driven regulatory policy.
    DerivePolicy {
        /// `sweep.csv` written by `ratio-sweep`.
        #[arg(long)]
        sweep: PathBuf,
        /// Policy TOML to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the fixed ratio against the adaptive policy across swarm sizes and arenas.
    Validate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        genotype: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw SVG figures from trial logs.
    Render {
        #[command(subcommand)]
        what: RenderCommand,
    },
    /// Pooled two-sample t-test on two files of values (one per line).
    Stats {
        a: PathBuf,
        b: PathBuf,
        /// Number of comparisons for the Bonferroni correction.
        #[arg(long, default_value_t = 1.0)]
        bonferroni: f64,
    },
    /// Export an arena as a text grid.
    Field {
        #[arg(long)]
        arena: ArenaKind,
        #[arg(long, default_value_t = 10)]
        cells_per_meter: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ColorArg {
    Subgroup,
    Reservoir,
}

#[derive(Subcommand)]
enum RenderCommand {
    /// Robots at one tick of a trajectory CSV.
    Snapshot {
        #[arg(long)]
        trajectory: PathBuf,
        /// Index of the recorded tick.
        #[arg(long, default_value_t = 0)]
        tick: usize,
        #[arg(long, value_enum, default_value_t = ColorArg::Subgroup)]
        color_by: ColorArg,
        /// Draw this arena underneath the robots.
        #[arg(long, conflicts_with = "field")]
        arena: Option<ArenaKind>,
        /// Draw a field text grid underneath the robots.
        #[arg(long)]
        field: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Line plot of metric columns.
    Series {
        #[arg(long)]
        metrics: PathBuf,
        /// Comma-separated column names.
        #[arg(long, value_delimiter = ',', default_value = "phi")]
        columns: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    init_threads()?;
    match cli.command {
        Command::Evolve { cfg, out } => evolve(&resolve_config(&cfg, None)?, &out),
        Command::Trial {
            cfg,
            genotype,
            policy,
            seed,
            out,
        } => trial(&cfg, &genotype, policy.as_deref(), seed, &out),
        Command::RatioSweep { cfg, genotype, out } => sweep(&cfg, &genotype, &out),
        Command::DerivePolicy { sweep, out } => {
            let grid = SweepGrid::read_csv(File::open(&sweep).with_context(|| open_msg(&sweep))?)?;
            let policy = derive_policy(&grid)?;
            write_file(&out, policy.to_toml())?;
            println!(
                "thresholds {:?} -> p_green {:?}",
                policy.thresholds, policy.probabilities
            );
            Ok(())
        }
        Command::Validate {
            cfg,
            genotype,
            policy,
            out,
        } => validate(&cfg, &genotype, &policy, &out),
        Command::Render { what } => render(what),
        Command::Stats { a, b, bonferroni } => {
            let r = two_sample_t(&read_values(&a)?, &read_values(&b)?, bonferroni)?;
            println!("a: n={} mean={:.6} std={:.6}", r.a.n, r.a.mean, r.a.std);
            println!("b: n={} mean={:.6} std={:.6}", r.b.n, r.b.mean, r.b.std);
            println!(
                "t={:.6} df={} p={:.6e} bonferroni={} {}",
                r.t,
                r.df,
                r.p_value,
                r.bonferroni,
                r.stars()
            );
            Ok(())
        }
        Command::Field {
            arena,
            cells_per_meter,
            out,
        } => write_file(&out, build_arena(arena, cells_per_meter).to_text()),
    }
}

fn init_threads() -> Result<()> {
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let n: usize = raw
            .parse()
            .with_context(|| format!("{THREADS_ENV} must be a positive integer, got `{raw}`"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    Ok(())
}

fn open_msg(p: &Path) -> String {
    format!("opening {}", p.display())
}

fn write_file(path: &Path, text: String) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn run_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

/// The manifest written next to a genotype file, if any.
fn sibling_manifest(genotype: &Path) -> Result<Option<Manifest>> {
    let path = genotype
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(MANIFEST);
    if path.exists() {
        Ok(Some(
            Manifest::load(&path).with_context(|| open_msg(&path))?,
        ))
    } else {
        Ok(None)
    }
}

/// Config from `--config`, else `--preset`, else the genotype's manifest,
/// else the desk preset; `--set` overrides apply last. A genotype only makes
/// sense with the reservoirs it was evolved on, so a seed mismatch is an error.
fn resolve_config(args: &ConfigArgs, genotype: Option<&Path>) -> Result<ExperimentConfig> {
    let origin = match genotype {
        Some(g) => sibling_manifest(g)?,
        None => None,
    };
    let base = if let Some(path) = &args.config {
        let text = fs::read_to_string(path).with_context(|| open_msg(path))?;
        ExperimentConfig::from_toml(&text).with_context(|| format!("parsing {}", path.display()))?
    } else if let Some(name) = &args.preset {
        ExperimentConfig::preset(name)?
    } else if let Some(m) = &origin {
        m.config.clone()
    } else {
        ExperimentConfig::desk()
    };
    let cfg = base.with_overrides(&args.overrides)?;
    if let Some(m) = origin {
        if m.reservoir_seeds != cfg.reservoir_seeds {
            bail!(
                "genotype was evolved with reservoir seeds {:?} but the config uses {:?}",
                m.reservoir_seeds,
                cfg.reservoir_seeds
            );
        }
    }
    Ok(cfg)
}

fn load_genotype(path: &Path) -> Result<Genotype> {
    let text = fs::read_to_string(path).with_context(|| open_msg(path))?;
    Genotype::from_text(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_policy(path: &Path) -> Result<RegulatoryPolicy> {
    let text = fs::read_to_string(path).with_context(|| open_msg(path))?;
    RegulatoryPolicy::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_values(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| open_msg(path))?;
    text.lines()
        .enumerate()
        .map(|(i, l)| (i, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| {
            l.parse::<f64>()
                .with_context(|| format!("{}:{}: bad number `{l}`", path.display(), i + 1))
        })
        .collect()
}

fn evolve(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    run_dir(out)?;
    write_file(&out.join("config.toml"), cfg.to_toml())?;
    let mut overall: Option<(usize, Genotype, f64, usize)> = None;
    let mut trials = 0;
    for run in 0..cfg.runs {
        let result = run_evolution(cfg, run, |g| {
            eprintln!(
                "run {run} gen {:>3}: best {:.4} mean {:.4} sigma {:.4}",
                g.generation, g.best_fitness, g.mean_fitness, g.sigma
            );
        })
        .with_context(|| format!("evolution run {run}"))?;
        write_generations_csv(
            &result.generations,
            create(&out.join(format!("generations_run{run}.csv")))?,
        )?;
        write_file(
            &out.join(format!("best_genotype_run{run}.txt")),
            result.best.to_text(),
        )?;
        trials += result.trials_run;
        if overall.as_ref().is_none_or(|b| result.best_fitness > b.2) {
            overall = Some((
                run,
                result.best,
                result.best_fitness,
                result.best_generation,
            ));
        }
    }
    let (run, best, fitness, generation) = overall.context("config has no runs")?;
    write_file(&out.join(BEST_GENOTYPE), best.to_text())?;
    Manifest::new("evolve", cfg)
        .note("best_selection", BEST_SELECTION)
        .note("best_run", run)
        .note("best_generation", generation)
        .note("best_fitness", fitness)
        .note("trials", trials)
        .save(&out.join(MANIFEST))?;
    println!("best fitness {fitness:.4} (run {run}, generation {generation})");
    Ok(())
}

fn trial(
    args: &ConfigArgs,
    genotype_path: &Path,
    policy_path: Option<&Path>,
    seed: Option<u64>,
    out: &Path,
) -> Result<()> {
    let genotype = load_genotype(genotype_path)?;
    let mut cfg = resolve_config(args, Some(genotype_path))?;
    let policy = policy_path.map(load_policy).transpose()?;
    cfg.adaptive = policy.is_some();
    let seed = seed.unwrap_or_else(|| derive_seed(cfg.master_seed, &[tag::SINGLE]));
    let outcome = run_trial(&cfg, &genotype, seed, policy.as_ref())?;
    run_dir(out)?;
    write_trajectory_csv(
        outcome.trajectory.as_deref().unwrap_or_default(),
        create(&out.join("trajectory.csv"))?,
    )?;
    write_metrics_csv(&outcome.series, create(&out.join("metrics.csv"))?)?;
    fs::copy(genotype_path, out.join("genotype.txt"))
        .with_context(|| format!("copying {}", genotype_path.display()))?;
    let mut manifest = Manifest::new("trial", &cfg)
        .note("seed", seed)
        .note("fitness", outcome.series.fitness);
    if let Some(p) = &policy {
        write_file(&out.join("policy.toml"), p.to_toml())?;
        manifest = manifest.note("policy", "policy.toml");
    }
    manifest.save(&out.join(MANIFEST))?;
    println!("fitness {:.6}", outcome.series.fitness);
    Ok(())
}

fn sweep(args: &ConfigArgs, genotype_path: &Path, out: &Path) -> Result<()> {
    let genotype = load_genotype(genotype_path)?;
    let cfg = resolve_config(args, Some(genotype_path))?;
    let grid = run_ratio_sweep(&cfg, &genotype)?;
    run_dir(out)?;
    grid.write_csv(create(&out.join("sweep.csv"))?)?;
    fs::copy(genotype_path, out.join("genotype.txt"))
        .with_context(|| format!("copying {}", genotype_path.display()))?;
    Manifest::new("ratio-sweep", &cfg)
        .note("trials_per_cell", cfg.sweep_trials)
        .save(&out.join(MANIFEST))?;
    print!("r_dist");
    for r in &grid.ratios {
        print!("\tratio {r}");
    }
    println!();
    for (d, row) in grid.distances.iter().zip(&grid.mean) {
        print!("{d}");
        for m in row {
            print!("\t{m:.3}");
        }
        println!();
    }
    Ok(())
}

fn validate(args: &ConfigArgs, genotype_path: &Path, policy_path: &Path, out: &Path) -> Result<()> {
    let genotype = load_genotype(genotype_path)?;
    let policy = load_policy(policy_path)?;
    let cfg = resolve_config(args, Some(genotype_path))?;
    let report = run_validation(&cfg, &genotype, &policy)?;
    run_dir(out)?;
    report.write_csv(create(&out.join("validation.csv"))?)?;
    write_file(&out.join("policy.toml"), policy.to_toml())?;
    Manifest::new("validate", &cfg)
        .note("trials_per_cell", cfg.validation_trials)
        .note("bonferroni", report.aggregate.bonferroni)
        .save(&out.join(MANIFEST))?;
    for c in &report.cells {
        println!(
            "{:<16} fixed {:.3}±{:.3}  adaptive {:.3}±{:.3}  p={:.2e} {}",
            c.setting.label(),
            c.stats.b.mean,
            c.stats.b.std,
            c.stats.a.mean,
            c.stats.a.std,
            c.stats.p_value,
            c.stats.stars()
        );
    }
    let a = &report.aggregate;
    println!(
        "{:<16} fixed {:.3}±{:.3}  adaptive {:.3}±{:.3}  t={:.3} df={} p={:.2e} {}",
        "aggregate",
        a.b.mean,
        a.b.std,
        a.a.mean,
        a.a.std,
        a.t,
        a.df,
        a.p_value,
        a.stars()
    );
    Ok(())
}

fn render(what: RenderCommand) -> Result<()> {
    match what {
        RenderCommand::Snapshot {
            trajectory,
            tick,
            color_by,
            arena,
            field,
            out,
        } => {
            let csv = fs::read_to_string(&trajectory).with_context(|| open_msg(&trajectory))?;
            let underlay: Option<ScalarField> = match (arena, field) {
                (Some(kind), _) => Some(build_arena(kind, 10)),
                (None, Some(path)) => {
                    let text = fs::read_to_string(&path).with_context(|| open_msg(&path))?;
                    Some(ScalarField::from_text(&text)?)
                }
                (None, None) => None,
            };
            let spec = SnapshotSpec {
                tick,
                color_by: match color_by {
                    ColorArg::Subgroup => ColorBy::Subgroup,
                    ColorArg::Reservoir => ColorBy::ActiveReservoir,
                },
                underlay: underlay.is_some(),
            };
            let svg = render_snapshot(&csv, &spec, underlay.as_ref())
                .with_context(|| format!("rendering {}", trajectory.display()))?;
            write_file(&out, svg)
        }
        RenderCommand::Series {
            metrics,
            columns,
            out,
        } => {
            let csv = fs::read_to_string(&metrics).with_context(|| open_msg(&metrics))?;
            let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
            let svg = render_series(&csv, &cols)
                .with_context(|| format!("rendering {}", metrics.display()))?;
            write_file(&out, svg)
        }
    }
}
