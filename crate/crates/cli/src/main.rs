use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use adaptive_ph::baselines::{classic_ph, randomized_ph, BaselineConfig};
use adaptive_ph::controller::{solve, SolverConfig};
use adaptive_ph::metrics::write_iters_csv;
use adaptive_ph::model::{builtin_instance, builtin_names, load_instance, InstanceSpec};
use adaptive_ph::report::SolveReport;
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

const COMPARE_CSV_VERSION: &str = "#compare-v1";
const COMPARE_CSV_HEADER: &str = "algorithm,instance_hash,k,qps_cumulative,sample_size,dual_value,lagrangian_bound";

#[derive(Parser)]
#[command(name = "aph", version, about = "Adaptive sampling-based progressive hedging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance with one algorithm.
    Run {
        #[arg(long, value_enum, default_value = "adaptive")]
        algo: Algo,
        #[command(flatten)]
        common: Common,
    },
    /// Run several algorithms on one instance and merge their trajectories.
    Compare {
        /// Comma-separated list, at least two.
        #[arg(long, value_enum, value_delimiter = ',', default_value = "adaptive,classic")]
        algos: Vec<Algo>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algo {
    Adaptive,
    Classic,
    Randomized,
}

impl Algo {
    fn name(self) -> &'static str {
        match self {
            Algo::Adaptive => "adaptive",
            Algo::Classic => "classic",
            Algo::Randomized => "randomized",
        }
    }
}

#[derive(Args, Clone)]
struct Common {
    /// Instance file, or one of the built-in names.
    #[arg(long)]
    instance: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// TOML file with `[adaptive]` and `[baseline]` tables.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    delta0: Option<f64>,
    #[arg(long)]
    delta_min: Option<f64>,
    #[arg(long)]
    delta_max: Option<f64>,
    #[arg(long)]
    sample_cap: Option<usize>,
    /// Fixed sample size for the baselines.
    #[arg(long)]
    sample_size: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    adaptive: SolverConfig,
    baseline: BaselineConfig,
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("cannot parse config {}", path.display()))
}

fn resolve_instance(arg: &str) -> Result<InstanceSpec> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Some(spec) = builtin_instance(arg) {
            return Ok(spec?);
        }
        let names: Vec<_> = builtin_names().collect();
        bail!(
            "instance file {} does not exist (built-in names: {})",
            path.display(),
            names.join(", ")
        );
    }
    Ok(load_instance(path)?)
}

/// Flags override the config file, which overrides the defaults.
fn resolve_configs(common: &Common) -> Result<(SolverConfig, BaselineConfig)> {
    let file = load_config(common.config.as_deref())?;
    let mut a = file.adaptive;
    let mut b = file.baseline;
    if let Some(v) = common.seed {
        a.seed = Some(v);
        b.seed = Some(v);
    }
    if let Some(v) = common.max_iters {
        a.max_iters = v;
        b.max_iters = v;
    }
    if let Some(v) = common.rho {
        a.rho = v;
        b.rho = v;
    }
    if let Some(v) = common.eps {
        a.eps = v;
    }
    if let Some(v) = common.delta0 {
        a.delta0 = v;
    }
    if let Some(v) = common.delta_min {
        a.delta_min = v;
    }
    if let Some(v) = common.delta_max {
        a.delta_max = v;
    }
    if let Some(v) = common.sample_cap {
        a.sample_cap_per_iter = v;
    }
    if let Some(v) = common.sample_size {
        b.fixed_sample_size = v;
    }
    a.validate()?;
    b.validate()?;
    Ok((a, b))
}

fn run_algo(algo: Algo, instance: &InstanceSpec, a: &SolverConfig, b: &BaselineConfig) -> Result<SolveReport> {
    let report = match algo {
        Algo::Adaptive => solve(instance, a),
        Algo::Classic => classic_ph(instance, b),
        Algo::Randomized => randomized_ph(instance, b),
    };
    report.with_context(|| format!("{} run on {} failed", algo.name(), instance.name))
}

fn write_outputs(dir: &Path, report: &SolveReport) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    report.write(&dir.join("report.toml"))?;
    let csv = dir.join("iters.csv");
    let file = fs::File::create(&csv).with_context(|| format!("cannot write {}", csv.display()))?;
    write_iters_csv(std::io::BufWriter::new(file), &report.history)
        .with_context(|| format!("cannot write {}", csv.display()))?;
    Ok(())
}

fn summary(report: &SolveReport) -> String {
    format!(
        "{}: {:?} after {} iterations, {} subproblems, |S| = {}, xbar = {:?}, gap = {:e}",
        report.algorithm,
        report.termination,
        report.iterations,
        report.qps_cumulative,
        report.sample_size,
        report.xbar,
        report.duality_gap
    )
}

fn write_compare_csv(path: &Path, reports: &[SolveReport]) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(out, "{COMPARE_CSV_VERSION}")?;
    writeln!(out, "{COMPARE_CSV_HEADER}")?;
    for r in reports {
        for h in &r.history {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.algorithm, r.instance_hash, h.k, h.qps_cumulative, h.sample_size, h.dual_value, h.lagrangian_bound
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { algo, common } => {
            let instance = resolve_instance(&common.instance)?;
            let (a, b) = resolve_configs(&common)?;
            let report = run_algo(algo, &instance, &a, &b)?;
            write_outputs(&common.out, &report)?;
            println!("{}", summary(&report));
        }
        Command::Compare { algos, common } => {
            if algos.len() < 2 {
                bail!("compare needs at least two algorithms, got {}", algos.len());
            }
            if (1..algos.len()).any(|i| algos[..i].contains(&algos[i])) {
                bail!("compare got the same algorithm twice");
            }
            let instance = resolve_instance(&common.instance)?;
            let (a, b) = resolve_configs(&common)?;
            let mut reports = Vec::new();
            for algo in algos {
                let report = run_algo(algo, &instance, &a, &b)?;
                write_outputs(&common.out.join(algo.name()), &report)?;
                println!("{}", summary(&report));
                reports.push(report);
            }
            write_compare_csv(&common.out.join("compare.csv"), &reports)?;
        }
    }
    Ok(())
}
