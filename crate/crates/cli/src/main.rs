use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use monoslope::chernoff::{self, CacheKey, ChernoffEstimate, ChernoffSettings};
use monoslope::experiments::{self, write_rows_csv, ExperimentConfig, ExperimentKind, Summary};
use monoslope::models::{build_lambda_n, sample, Dataset, FamilyTag, ModelSpec};
use monoslope::rng::stream;
use monoslope::{asymptotics, estimate, Direction, StepFunction, Variant};

#[derive(Parser)]
#[command(name = "monoslope", version, about = "Monotone envelope estimators and their L_p-error asymptotics")]
struct Cli {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON config; fields override the experiment defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "monoslope-out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Exit with status 2 when an acceptance check fails.
    #[arg(long, global = true)]
    check: bool,
    /// Chernoff cache directory (default: <out>/chernoff-cache).
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monotone estimate from a step-process CSV (`t,value`).
    Estimate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "nonincreasing")]
        direction: Direction,
        #[arg(long, default_value = "hat")]
        variant: Variant,
    },
    /// Draw a dataset and its step process.
    Simulate {
        #[arg(long)]
        family: FamilyTag,
        #[arg(long)]
        n: usize,
        /// Model JSON; defaults to the family's reference model.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        replicate: u64,
    },
    /// Monte Carlo estimate of E|X(0)|^p and k_p.
    Chernoff {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long = "half-width")]
        half_width: Option<f64>,
        #[arg(long = "a-max")]
        a_max: Option<f64>,
        #[arg(long = "a-step")]
        a_step: Option<f64>,
        #[arg(long)]
        batches: Option<usize>,
    },
    /// Limit constants m_p and sigma_p^2 for a model.
    Constants {
        #[arg(long)]
        family: FamilyTag,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        spec: Option<PathBuf>,
        #[command(flatten)]
        source: ChernoffSource,
    },
    /// CLT experiment for the normalised L_p-error.
    Clt(ExperimentArgs),
    /// Local and global risk rates.
    Risk(ExperimentArgs),
    /// Risk near the boundary against its envelope.
    Boundary(ExperimentArgs),
    /// Modulus of the centred step process.
    Modulus(ExperimentArgs),
    /// Goodness-of-fit test of a simple null; without --data, the level and
    /// power experiment.
    Gof {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long = "null-spec")]
        null_spec: Option<PathBuf>,
        /// Number of processes for Poisson data files.
        #[arg(long)]
        processes: Option<usize>,
        #[command(flatten)]
        exp: ExperimentArgs,
    },
}

#[derive(Args, Clone, Default)]
struct ChernoffSource {
    /// Explicit ChernoffEstimate JSON file(s) instead of the cache.
    #[arg(long = "chernoff")]
    chernoff_files: Vec<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct ExperimentArgs {
    #[arg(long)]
    family: Option<FamilyTag>,
    /// Exponent(s), comma separated.
    #[arg(long, value_delimiter = ',')]
    p: Vec<f64>,
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    variant: Option<Variant>,
    #[command(flatten)]
    source: ChernoffSource,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    Ok(())
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    serde_json::to_writer_pretty(&mut lock, value)?;
    writeln!(lock)?;
    Ok(())
}

fn load_spec(path: Option<&Path>, family: FamilyTag) -> Result<ModelSpec> {
    let spec = match path {
        Some(p) => read_json::<ModelSpec>(p)?,
        None => ModelSpec::reference(family),
    };
    if spec.tag() != family {
        bail!("spec is a {} model but --family is {}", spec.tag(), family);
    }
    Ok(spec)
}

struct Ctx {
    seed: Option<u64>,
    config: Option<serde_json::Value>,
    out: PathBuf,
    cache: PathBuf,
}

impl Ctx {
    fn experiment_config(&self, kind: ExperimentKind, args: &ExperimentArgs) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(v) => ExperimentConfig::from_json_over(kind, v)?,
            None => ExperimentConfig::default_for(kind),
        };
        if let Some(f) = args.family {
            cfg.family = f;
            if cfg.spec.as_ref().is_some_and(|s| s.tag() != f) {
                cfg.spec = None;
            }
        }
        if !args.p.is_empty() {
            cfg.p = args.p.clone();
        }
        if !args.n.is_empty() {
            cfg.n_grid = args.n.clone();
        }
        if let Some(r) = args.replicates {
            cfg.replicates = r;
        }
        if let Some(v) = args.variant {
            cfg.variant = v;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }

    fn chernoff_settings(&self) -> Result<ChernoffSettings> {
        Ok(match self.config.as_ref().and_then(|v| v.get("chernoff")) {
            Some(v) => serde_json::from_value(v.clone())?,
            None => ChernoffSettings::default(),
        })
    }

    fn chernoff_estimates(
        &self,
        ps: &[f64],
        settings: &ChernoffSettings,
        seed: u64,
        source: &ChernoffSource,
    ) -> Result<Vec<ChernoffEstimate>> {
        if !source.chernoff_files.is_empty() {
            return source.chernoff_files.iter().map(|p| read_json(p)).collect();
        }
        ps.iter()
            .map(|&p| Ok(chernoff::load_cached(&self.cache, &CacheKey::new(p, settings, seed))?))
            .collect()
    }
}

fn report(summary: &Summary) -> bool {
    let mut err = io::stderr().lock();
    for c in summary.checks() {
        let _ = writeln!(err, "[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    summary.passed()
}

fn run_experiment(ctx: &Ctx, kind: ExperimentKind, cfg: &ExperimentConfig, chernoff: &[ChernoffEstimate]) -> Result<bool> {
    let res = experiments::run(kind, cfg, chernoff)?;
    let out = cfg.output.as_ref().map(PathBuf::from).unwrap_or_else(|| ctx.out.clone());
    fs::create_dir_all(&out)?;
    let rows_path = out.join(format!("{}_rows.csv", kind.as_str()));
    write_rows_csv(&res.rows, File::create(&rows_path)?)?;
    let summary_path = out.join(format!("{}_summary.json", kind.as_str()));
    write_json(&summary_path, &serde_json::json!({ "config": res.config, "summary": res.summary }))?;
    print_json(&res.summary)?;
    eprintln!("wrote {} and {}", rows_path.display(), summary_path.display());
    Ok(report(&res.summary))
}

fn run(cli: Cli) -> Result<bool> {
    let config = cli.config.as_deref().map(read_json::<serde_json::Value>).transpose()?;
    let cache = cli.cache.clone().unwrap_or_else(|| cli.out.join("chernoff-cache"));
    let ctx = Ctx {
        seed: cli.seed,
        config,
        out: cli.out.clone(),
        cache,
    };
    match cli.command {
        Command::Estimate {
            input,
            direction,
            variant,
        } => {
            let f = File::open(&input).with_context(|| format!("opening {}", input.display()))?;
            let lambda_n = StepFunction::read_csv(BufReader::new(f))?;
            let est = estimate(&lambda_n, direction, variant)?;
            fs::create_dir_all(&ctx.out)?;
            est.write_csv(File::create(ctx.out.join("estimate.csv"))?)?;
            let json = est.to_json();
            write_json(&ctx.out.join("estimate.json"), &json)?;
            print_json(&json)?;
            Ok(true)
        }
        Command::Simulate {
            family,
            n,
            spec,
            replicate,
        } => {
            let spec = load_spec(spec.as_deref(), family)?;
            let seed = ctx.seed.unwrap_or(1);
            let data = sample(&spec, n, &mut stream(seed, family.as_str(), n as u64, replicate))?;
            let lambda_n = build_lambda_n(&spec, &data)?;
            fs::create_dir_all(&ctx.out)?;
            let data_path = ctx.out.join(format!("{family}_data.csv"));
            let ln_path = ctx.out.join(format!("{family}_lambda_n.csv"));
            data.write_csv(File::create(&data_path)?)?;
            lambda_n.write_csv(File::create(&ln_path)?)?;
            write_json(&ctx.out.join(format!("{family}_spec.json")), &spec)?;
            println!("{}\n{}", data_path.display(), ln_path.display());
            Ok(true)
        }
        Command::Chernoff {
            p,
            reps,
            h,
            half_width,
            a_max,
            a_step,
            batches,
        } => {
            let mut s = ctx.chernoff_settings()?;
            s.reps = reps.unwrap_or(s.reps);
            s.step = h.unwrap_or(s.step);
            s.half_width = half_width.unwrap_or(s.half_width);
            s.a_max = a_max.unwrap_or(s.a_max);
            s.a_step = a_step.unwrap_or(s.a_step);
            s.batches = batches.unwrap_or(s.batches);
            let seed = ctx.seed.unwrap_or(1);
            let est = chernoff::load_or_estimate(&ctx.cache, p, &s, seed)?;
            fs::create_dir_all(&ctx.out)?;
            write_json(&ctx.out.join(format!("chernoff_p{p}.json")), &est)?;
            est.write_covariance_csv(File::create(ctx.out.join(format!("chernoff_p{p}_cov.csv")))?)?;
            print_json(&est)?;
            let last = est.covariance.last().expect("nonempty a-grid");
            let checks = [
                ("mean of X(0) within 4 SE of 0", est.mean_x0.abs() < 4.0 * est.mean_x0_se),
                ("covariance at a_max within 2 SE of 0", last.cov.abs() < 2.0 * last.se),
                ("k_p not significantly negative", est.k_p > -2.0 * est.k_p_se),
            ];
            let mut ok = true;
            for (name, passed) in checks {
                eprintln!("[{}] {name}", if passed { "PASS" } else { "FAIL" });
                ok &= passed;
            }
            Ok(ok)
        }
        Command::Constants {
            family,
            p,
            spec,
            source,
        } => {
            let spec = load_spec(spec.as_deref(), family)?;
            let cfg = ctx.experiment_config(ExperimentKind::Clt, &ExperimentArgs::default())?;
            let ch = ctx.chernoff_estimates(&[p], &cfg.chernoff, cfg.chernoff_seed, &source)?;
            let ch = ch.iter().find(|c| c.p == p).context("no Chernoff estimate for this p")?;
            let c = asymptotics::limit_constants(&spec, p, ch, &cfg.quadrature)?;
            fs::create_dir_all(&ctx.out)?;
            write_json(&ctx.out.join(format!("constants_{family}_p{p}.json")), &c)?;
            print_json(&c)?;
            Ok(true)
        }
        Command::Clt(args) => {
            let cfg = ctx.experiment_config(ExperimentKind::Clt, &args)?;
            let ch = ctx.chernoff_estimates(&cfg.p, &cfg.chernoff, cfg.chernoff_seed, &args.source)?;
            run_experiment(&ctx, ExperimentKind::Clt, &cfg, &ch)
        }
        Command::Risk(args) => {
            let cfg = ctx.experiment_config(ExperimentKind::Risk, &args)?;
            run_experiment(&ctx, ExperimentKind::Risk, &cfg, &[])
        }
        Command::Boundary(args) => {
            let cfg = ctx.experiment_config(ExperimentKind::Boundary, &args)?;
            run_experiment(&ctx, ExperimentKind::Boundary, &cfg, &[])
        }
        Command::Modulus(args) => {
            let cfg = ctx.experiment_config(ExperimentKind::Modulus, &args)?;
            run_experiment(&ctx, ExperimentKind::Modulus, &cfg, &[])
        }
        Command::Gof {
            data,
            null_spec,
            processes,
            exp,
        } => {
            let mut cfg = ctx.experiment_config(ExperimentKind::Gof, &exp)?;
            if let Some(path) = &null_spec {
                cfg.spec = Some(read_json(path)?);
                cfg.family = cfg.model().tag();
            }
            let ch = ctx.chernoff_estimates(&cfg.p, &cfg.chernoff, cfg.chernoff_seed, &exp.source)?;
            match data {
                None => run_experiment(&ctx, ExperimentKind::Gof, &cfg, &ch),
                Some(path) => {
                    let spec0 = cfg.model();
                    let f = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
                    let data = Dataset::read_csv(spec0.tag(), BufReader::new(f), processes)?;
                    let results = cfg
                        .p
                        .iter()
                        .map(|&p| {
                            let c = ch.iter().find(|c| c.p == p).context("no Chernoff estimate for this p")?;
                            Ok(asymptotics::gof_test(&data, &spec0, p, c, &cfg.quadrature)?)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    fs::create_dir_all(&ctx.out)?;
                    if let [single] = results.as_slice() {
                        write_json(&ctx.out.join("gof.json"), single)?;
                        print_json(single)?;
                    } else {
                        write_json(&ctx.out.join("gof.json"), &results)?;
                        print_json(&results)?;
                    }
                    Ok(true)
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads;
    let check = cli.check;
    match experiments::with_threads(threads, move || run(cli)) {
        Ok(Ok(true)) => ExitCode::SUCCESS,
        Ok(Ok(false)) if check => ExitCode::from(2),
        Ok(Ok(false)) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
