use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use nrf::anomaly::{run_anomaly, AnomalyData, AnomalyRecipe};
use nrf::evaluation::write_metrics;
use nrf::experiments::{
    conditional, generate, interpolate, load_generator, load_potential, run_gmm_ssl, run_gmm_unsup, run_sampler_bench,
    GmmSslConfig, GmmUnsupConfig, SamplerBenchConfig,
};
use nrf::samplers::{ClassChoice, SamplerConfig, SamplerKind};
use nrf::targets::write_points;
use nrf::{Error, Result};

#[derive(Parser)]
#[command(name = "nrf", version, about = "Neural random field experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML file overriding the built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for every random stream of the run.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for chain-level parallelism (results do not depend on it).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// KL-vs-iteration curves of the samplers on a random Gaussian target.
    SamplerBench {
        #[command(flatten)]
        common: Common,
        /// Comma-separated subset of sgld,sghmc,ld_exact,hmc_exact,coopnet.
        #[arg(long, value_delimiter = ',')]
        samplers: Option<Vec<SamplerKind>>,
        /// Iterations per chain.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        chains: Option<usize>,
        /// Dimension of the Gaussian target.
        #[arg(long)]
        dim: Option<usize>,
        /// Seed of the random target, independent of `--seed`.
        #[arg(long)]
        target_seed: Option<u64>,
    },
    /// Unsupervised training on the 32-mode rings plus mode coverage.
    GmmUnsup {
        #[command(flatten)]
        common: Common,
        /// Training iterations.
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Semi-supervised training on the two-ring toy.
    GmmSsl {
        #[command(flatten)]
        common: Common,
        /// Training iterations.
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Train on normal data and score a labeled test set.
    Anomaly {
        #[command(flatten)]
        common: Common,
        /// Training iterations.
        #[arg(long)]
        iterations: Option<usize>,
        /// Use CSV data instead of the synthetic rings (requires --test-csv and --label-column).
        #[arg(long, requires_all = ["test_csv", "label_column"])]
        train_csv: Option<PathBuf>,
        #[arg(long, requires = "train_csv")]
        test_csv: Option<PathBuf>,
        #[arg(long, requires = "train_csv")]
        label_column: Option<String>,
        #[arg(long)]
        quantile: Option<f64>,
    },
    /// Draw samples from trained checkpoints.
    Generate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        models: ModelArgs,
        #[arg(long)]
        n: Option<usize>,
        /// Apply sample revision (false gives plain ancestral draws).
        #[arg(long)]
        revise: Option<bool>,
        #[command(flatten)]
        sampler: SamplerArgs,
    },
    /// Decode a straight line between two latent codes.
    Interpolate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        generator: Option<PathBuf>,
        /// Comma-separated start code.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        h1: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        h2: Option<Vec<f64>>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Revise samples under a class-conditional potential.
    Conditional {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        models: ModelArgs,
        /// 1-based class; the classifier's prediction when omitted.
        #[arg(long)]
        class: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        sampler: SamplerArgs,
    },
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Potential checkpoint (JSON), e.g. `potential.json` from a training run.
    #[arg(long)]
    potential: Option<PathBuf>,
    /// Generator checkpoint (JSON).
    #[arg(long)]
    generator: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SamplerArgs {
    /// Revision steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Constant revision step size.
    #[arg(long)]
    delta: Option<f64>,
}

impl SamplerArgs {
    fn apply(&self, cfg: &mut SamplerConfig) {
        if let Some(s) = self.steps {
            cfg.steps = s;
        }
        if let Some(d) = self.delta {
            cfg.schedule = nrf::samplers::StepSchedule::Constant { delta: d };
        }
    }
}

fn default_n() -> usize {
    1000
}
fn default_true() -> bool {
    true
}
fn default_sampler() -> SamplerConfig {
    SamplerConfig::sgld(10, 0.01)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenerateConfig {
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    potential: PathBuf,
    #[serde(default)]
    generator: PathBuf,
    #[serde(default = "default_n")]
    n: usize,
    #[serde(default = "default_true")]
    revise: bool,
    #[serde(default = "default_sampler")]
    sampler: SamplerConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConditionalConfig {
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    potential: PathBuf,
    #[serde(default)]
    generator: PathBuf,
    /// 1-based; predicted per sample when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    class: Option<usize>,
    #[serde(default = "default_n")]
    n: usize,
    #[serde(default = "default_sampler")]
    sampler: SamplerConfig,
}

fn default_path_len() -> usize {
    10
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InterpolateConfig {
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    generator: PathBuf,
    #[serde(default)]
    h1: Vec<f64>,
    #[serde(default)]
    h2: Vec<f64>,
    #[serde(default = "default_path_len")]
    n: usize,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Overlay `over` onto `base`, recursing into tables.
fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Defaults, overlaid by the config file if any; unknown keys are rejected.
fn load_config<T: Serialize + DeserializeOwned>(defaults: T, path: Option<&Path>) -> Result<T> {
    let Some(path) = path else { return Ok(defaults) };
    let text = fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let over: toml::Value = toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let mut base = toml::Value::try_from(&defaults).map_err(|e| config_err(e.to_string()))?;
    // Tagged enums (schedules, data sources) are replaced wholesale when the
    // file switches variant.
    replace_on_kind_change(&mut base, &over);
    merge(&mut base, over);
    base.try_into().map_err(|e: toml::de::Error| config_err(format!("{}: {e}", path.display())))
}

fn replace_on_kind_change(base: &mut toml::Value, over: &toml::Value) {
    if let (toml::Value::Table(b), toml::Value::Table(o)) = (base, over) {
        for (k, ov) in o {
            if let Some(bv) = b.get_mut(k) {
                let kinds = (bv.get("kind").and_then(|v| v.as_str()), ov.get("kind").and_then(|v| v.as_str()));
                if let (Some(a), Some(z)) = kinds {
                    if a != z {
                        if let toml::Value::Table(t) = bv {
                            t.clear();
                        }
                        continue;
                    }
                }
                replace_on_kind_change(bv, ov);
            }
        }
    }
}

fn write_resolved<T: Serialize>(out: &Path, cfg: &T) -> Result<()> {
    let text = toml::to_string_pretty(cfg).map_err(|e| config_err(e.to_string()))?;
    fs::write(out.join("resolved_config.toml"), text)?;
    Ok(())
}

fn require_path(p: &Path, what: &str) -> Result<()> {
    if p.as_os_str().is_empty() {
        return Err(config_err(format!("{what} checkpoint path is required")));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let common = match &cli.command {
        Command::SamplerBench { common, .. }
        | Command::GmmUnsup { common, .. }
        | Command::GmmSsl { common, .. }
        | Command::Anomaly { common, .. }
        | Command::Generate { common, .. }
        | Command::Interpolate { common, .. }
        | Command::Conditional { common, .. } => common.clone(),
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(config_err("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| config_err(e.to_string()))?;
    }
    let cfg_path = common.config.as_deref();
    let out = common.out.as_path();
    fs::create_dir_all(out)?;

    match cli.command {
        Command::SamplerBench { samplers, steps, chains, dim, target_seed, .. } => {
            let mut cfg = load_config(SamplerBenchConfig::default(), cfg_path)?;
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            if let Some(s) = samplers {
                cfg.samplers = s;
            }
            if let Some(s) = steps {
                cfg.steps = s;
            }
            if let Some(c) = chains {
                cfg.chains = c;
            }
            if let Some(d) = dim {
                cfg.dim = d;
            }
            if let Some(t) = target_seed {
                cfg.target_seed = t;
            }
            cfg.validate()?;
            write_resolved(out, &cfg)?;
            for c in run_sampler_bench(&cfg, Some(out))? {
                println!("{:<10} KL {:.4} -> {:.4}", c.sampler.name(), c.initial(), c.final_kl());
            }
        }
        Command::GmmUnsup { iterations, .. } => {
            let mut cfg = load_config(GmmUnsupConfig::preset(40_000), cfg_path)?;
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            if let Some(i) = iterations {
                cfg.train.iterations = i;
            }
            cfg.train.validate()?;
            write_resolved(out, &cfg)?;
            let r = run_gmm_unsup(&cfg, Some(out))?;
            println!(
                "generation: covered {:.2} ± {:.2}, ratio {:.3} ± {:.3}",
                r.generation.covered_mean, r.generation.covered_sd, r.generation.ratio_mean, r.generation.ratio_sd
            );
            println!(
                "revision:   covered {:.2} ± {:.2}, ratio {:.3} ± {:.3}",
                r.revision.covered_mean, r.revision.covered_sd, r.revision.ratio_mean, r.revision.ratio_sd
            );
        }
        Command::GmmSsl { iterations, .. } => {
            let mut cfg = load_config(GmmSslConfig::preset(5_000), cfg_path)?;
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            if let Some(i) = iterations {
                cfg.train.iterations = i;
            }
            cfg.train.validate()?;
            write_resolved(out, &cfg)?;
            let r = run_gmm_ssl(&cfg, Some(out))?;
            println!(
                "labeled {}/{}, held-out accuracy {:.4}, grid identity error {:e}",
                r.labeled_correct, r.labeled_total, r.heldout_accuracy, r.grid_identity_error
            );
        }
        Command::Anomaly { iterations, train_csv, test_csv, label_column, quantile, .. } => {
            let defaults = match (train_csv, test_csv, label_column) {
                (Some(tr), Some(te), Some(lc)) => AnomalyRecipe::tabular(tr, te, lc, 5_000),
                _ => AnomalyRecipe::synthetic(5_000),
            };
            let switched = !matches!(defaults.data, AnomalyData::Synthetic { .. });
            let mut cfg = load_config(defaults.clone(), cfg_path)?;
            if switched {
                cfg.data = defaults.data;
            }
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            if let Some(i) = iterations {
                cfg.train.iterations = i;
            }
            if let Some(q) = quantile {
                cfg.quantile = q;
            }
            cfg.validate()?;
            write_resolved(out, &cfg)?;
            let r = run_anomaly(&cfg, Some(out))?;
            println!("precision {:.4} recall {:.4} f1 {:.4} auc {:.4}", r.prf.precision, r.prf.recall, r.prf.f1, r.auc);
        }
        Command::Generate { models, n, revise, sampler, .. } => {
            let defaults = GenerateConfig {
                seed: 0,
                potential: PathBuf::new(),
                generator: PathBuf::new(),
                n: default_n(),
                revise: true,
                sampler: default_sampler(),
            };
            let mut cfg = load_config(defaults, cfg_path)?;
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            if let Some(p) = models.potential {
                cfg.potential = p;
            }
            if let Some(g) = models.generator {
                cfg.generator = g;
            }
            if let Some(n) = n {
                cfg.n = n;
            }
            if let Some(r) = revise {
                cfg.revise = r;
            }
            sampler.apply(&mut cfg.sampler);
            cfg.sampler.validate()?;
            require_path(&cfg.potential, "potential")?;
            require_path(&cfg.generator, "generator")?;
            write_resolved(out, &cfg)?;
            let pot = load_potential(&cfg.potential)?;
            let gen = load_generator(&cfg.generator)?;
            let x = generate(&pot, &gen, &cfg.sampler, cfg.revise, cfg.n, cfg.seed)?;
            write_points(&out.join("samples.csv"), &x, None)?;
            println!("wrote {} samples", x.rows());
        }
        Command::Interpolate { generator, h1, h2, n, .. } => {
            let defaults =
                InterpolateConfig { seed: 0, generator: PathBuf::new(), h1: Vec::new(), h2: Vec::new(), n: default_path_len() };
            let mut cfg = load_config(defaults, cfg_path)?;
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            if let Some(g) = generator {
                cfg.generator = g;
            }
            if let Some(h) = h1 {
                cfg.h1 = h;
            }
            if let Some(h) = h2 {
                cfg.h2 = h;
            }
            if let Some(n) = n {
                cfg.n = n;
            }
            require_path(&cfg.generator, "generator")?;
            if cfg.n < 2 {
                return Err(config_err("interpolation needs n >= 2"));
            }
            write_resolved(out, &cfg)?;
            let gen = load_generator(&cfg.generator)?;
            if cfg.h1.is_empty() || cfg.h2.is_empty() {
                // Endpoints default to two draws from the latent prior.
                let mut r = nrf::rng::stream(cfg.seed, nrf::rng::domain::EVAL, 0);
                let mut draw = || {
                    let mut h = vec![0.0; gen.latent_dim()];
                    nrf::rng::fill_normal(&mut r, &mut h);
                    h
                };
                if cfg.h1.is_empty() {
                    cfg.h1 = draw();
                }
                if cfg.h2.is_empty() {
                    cfg.h2 = draw();
                }
                write_resolved(out, &cfg)?;
            }
            let x = interpolate(&gen, &cfg.h1, &cfg.h2, cfg.n)?;
            write_points(&out.join("interpolation.csv"), &x, None)?;
            println!("wrote {} points", x.rows());
        }
        Command::Conditional { models, class, n, sampler, .. } => {
            let defaults = ConditionalConfig {
                seed: 0,
                potential: PathBuf::new(),
                generator: PathBuf::new(),
                class: None,
                n: default_n(),
                sampler: default_sampler(),
            };
            let mut cfg = load_config(defaults, cfg_path)?;
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            if let Some(p) = models.potential {
                cfg.potential = p;
            }
            if let Some(g) = models.generator {
                cfg.generator = g;
            }
            if class.is_some() {
                cfg.class = class;
            }
            if let Some(n) = n {
                cfg.n = n;
            }
            sampler.apply(&mut cfg.sampler);
            cfg.sampler.validate()?;
            require_path(&cfg.potential, "potential")?;
            require_path(&cfg.generator, "generator")?;
            let choice = match cfg.class {
                None => ClassChoice::Predicted,
                Some(0) => return Err(config_err("classes are numbered from 1")),
                Some(c) => ClassChoice::Fixed(c - 1),
            };
            write_resolved(out, &cfg)?;
            let pot = load_potential(&cfg.potential)?;
            let gen = load_generator(&cfg.generator)?;
            let (x, labels) = conditional(&pot, &gen, choice, &cfg.sampler, cfg.n, cfg.seed)?;
            write_points(&out.join("samples.csv"), &x, Some(&labels))?;
            let counts: Vec<(String, f64)> = (0..pot.num_outputs())
                .map(|k| (format!("class{}_count", k + 1), labels.iter().filter(|&&l| l == k).count() as f64))
                .collect();
            let rows: Vec<(&str, f64)> = counts.iter().map(|(k, v)| (k.as_str(), *v)).collect();
            write_metrics(&out.join("class_counts.csv"), &rows)?;
            println!("wrote {} samples", x.rows());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 1 } else { 2 })
        }
    }
}
