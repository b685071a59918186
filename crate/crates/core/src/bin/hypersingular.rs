use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{Map, Value};

use hypersingular::experiment::{execute, ExperimentConfig};

/// Dyadic hypersingular operator lab: runs one experiment and emits CSV or JSON.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` file or JSON object; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// `csv` (default) or `json`.
    #[arg(long, global = true)]
    format: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Validate parameters and print the resolved config without computing.
    #[arg(long, global = true)]
    dry_run: bool,
    /// Record the generation time in the header.
    #[arg(long, global = true)]
    timestamp: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the (1/p, 1/q) square for a graded sparse operator.
    Region(RegionArgs),
    /// Exact layer-wise corner norms of a sparse family and their fitted slopes.
    LayerNorms(LayerNormsArgs),
    /// Combine two geometric corner bounds into a restricted weak-type point.
    Bourgain(BourgainArgs),
    /// Dyadic hypersingular maximal function on a Whitney grid.
    Maximal(MaximalArgs),
    /// Bergman-type operator by quadrature on a polar grid.
    Bergman(BergmanArgs),
    /// Pointwise sparse domination ratios over seeded random inputs.
    Dominate(DominateArgs),
    /// Weighted endpoint criteria and the Békollé–Bonami constant.
    Weights(WeightsArgs),
    /// The blow-up family S_m and its partitioned-region value.
    Blowup(BlowupArgs),
    /// Maximal boxes of a level set of the maximal function.
    Decompose(DecomposeArgs),
}

#[derive(Args, Serialize)]
struct RegionArgs {
    #[arg(long)]
    t: Option<f64>,
    /// `singular` or `maximal`.
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    degree: Option<f64>,
}

#[derive(Args, Serialize)]
struct LayerNormsArgs {
    /// `carleson`, `counterexample`, `full_tree`, `even_generations` or `file:<path>`.
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    jmin: Option<usize>,
    #[arg(long)]
    jmax: Option<usize>,
    #[arg(long)]
    depth: Option<u32>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    system: Option<String>,
    #[arg(long)]
    convention: Option<String>,
}

#[derive(Args, Serialize)]
struct BourgainArgs {
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    c2: Option<f64>,
    #[arg(long)]
    p1: Option<String>,
    #[arg(long)]
    q1: Option<String>,
    #[arg(long)]
    p2: Option<String>,
    #[arg(long)]
    q2: Option<String>,
    #[arg(long)]
    jmin: Option<usize>,
    #[arg(long)]
    jmax: Option<usize>,
    #[arg(long)]
    system: Option<String>,
    #[arg(long)]
    convention: Option<String>,
}

#[derive(Args, Serialize)]
struct MaximalArgs {
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    system: Option<String>,
    #[arg(long)]
    convention: Option<String>,
    #[arg(long)]
    levels: Option<u32>,
    #[arg(long)]
    rings_per_level: Option<usize>,
    #[arg(long)]
    angles_per_arc: Option<usize>,
    #[arg(long)]
    min_angles: Option<usize>,
    #[arg(long)]
    depth: Option<u32>,
    /// `one` or `annulus:<k>`.
    #[arg(long)]
    input: Option<String>,
}

#[derive(Args, Serialize)]
struct BergmanArgs {
    #[arg(long)]
    t: Option<f64>,
    /// `analytic` or `positive`.
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    n_r: Option<usize>,
    #[arg(long)]
    n_theta: Option<usize>,
    #[arg(long)]
    r_max: Option<f64>,
    /// `uniform` or `geometric`.
    #[arg(long)]
    layout: Option<String>,
    /// `one` or `power:<γ>`.
    #[arg(long)]
    input: Option<String>,
}

#[derive(Args, Serialize)]
struct DominateArgs {
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    n_r: Option<usize>,
    #[arg(long)]
    n_theta: Option<usize>,
    #[arg(long)]
    r_max: Option<f64>,
    #[arg(long)]
    layout: Option<String>,
    #[arg(long)]
    depth: Option<u32>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    modes: Option<usize>,
    #[arg(long)]
    poly_degree: Option<usize>,
}

#[derive(Args, Serialize)]
struct WeightsArgs {
    /// `none`, `power:<γ>` or `table:<path>`.
    #[arg(long, allow_hyphen_values = true)]
    weight: Option<String>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    k_max: Option<u32>,
    #[arg(long)]
    l: Option<f64>,
}

#[derive(Args, Serialize)]
struct BlowupArgs {
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    t: Option<f64>,
}

#[derive(Args, Serialize)]
struct DecomposeArgs {
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    system: Option<String>,
    #[arg(long)]
    convention: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    levels: Option<u32>,
    #[arg(long)]
    depth: Option<u32>,
    /// `one` or `random`.
    #[arg(long)]
    input: Option<String>,
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Parser)]
struct Invocation {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    cli: Cli,
}

fn overrides<T: Serialize>(args: &T) -> Map<String, Value> {
    match serde_json::to_value(args) {
        Ok(Value::Object(map)) => map.into_iter().filter(|(_, v)| !v.is_null()).collect(),
        _ => Map::new(),
    }
}

fn main() -> ExitCode {
    let Invocation { common, cli } = Invocation::parse();
    let (name, mut map) = match &cli.command {
        Command::Region(a) => ("region", overrides(a)),
        Command::LayerNorms(a) => ("layer-norms", overrides(a)),
        Command::Bourgain(a) => ("bourgain", overrides(a)),
        Command::Maximal(a) => ("maximal", overrides(a)),
        Command::Bergman(a) => ("bergman", overrides(a)),
        Command::Dominate(a) => ("dominate", overrides(a)),
        Command::Weights(a) => ("weights", overrides(a)),
        Command::Blowup(a) => ("blowup", overrides(a)),
        Command::Decompose(a) => ("decompose", overrides(a)),
    };
    if let Some(f) = &common.format {
        map.insert("format".into(), f.clone().into());
    }
    if let Some(o) = &common.output {
        map.insert("output".into(), o.display().to_string().into());
    }
    if common.timestamp {
        map.insert("timestamp".into(), true.into());
    }
    let result = ExperimentConfig::resolve(name, common.config.as_deref(), map).and_then(|config| {
        if common.dry_run {
            config.validate()?;
            let text = serde_json::to_string(&config).map_err(|e| hypersingular::Error::Io(e.to_string()))?;
            return Ok(format!("valid: {text}\n"));
        }
        let text = execute(&config)?;
        Ok(if config.output.is_some() { String::new() } else { text })
    });
    match result {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
