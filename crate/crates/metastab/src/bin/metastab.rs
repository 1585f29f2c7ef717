//! Command-line front end: build model instances, run condition checkers
//! and sweeps, compare against limit chains. Exit codes: 0 success/pass,
//! 1 usage, 2 condition fail, 3 warn, 4 internal error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use metastab::chain::Chain;
use metastab::error::Error;
use metastab::metastability::{
    check_condition_03, check_h2, check_l08, check_m1, check_m2, check_measure_ratios,
    estimate_limit_chain, exact_label_joint, partition_from_json, partition_to_json, state_convergence,
    Partition, StartPolicy,
};
use metastab::models::ModelSpec;
use metastab::report::{ConditionId, ConditionReport, RunManifest, Verdict};

#[derive(Parser)]
#[command(name = "metastab", version, about = "metastable Markov chain toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a model instance from a TOML/JSON spec and write the chain
    /// and partition artifacts.
    Model(ModelArgs),
    /// Run a condition checker (optionally over an N-sweep) and write the
    /// report.
    Check(CheckArgs),
    /// Compare the projected chain against a limit chain: label marginals
    /// and state-law TV as CSV curves.
    Converge(ConvergeArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Model spec file (.toml or .json)
    #[arg(long)]
    spec: PathBuf,
    /// Output directory for chain.json / partition.json / manifest.json
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct CheckArgs {
    /// Chain artifact (chain.json); not needed in sweep mode
    #[arg(long)]
    model: Option<PathBuf>,
    /// Partition artifact (partition.json); not needed in sweep mode
    #[arg(long)]
    partition: Option<PathBuf>,
    /// Condition id: H2, C03, M1, M2A, M2B, B09A, B09, L08, CAPEST, TMIX2, TMIX3
    #[arg(long)]
    check: String,
    /// Sweep sizes, e.g. 10,20,40 (requires --spec to regenerate per size)
    #[arg(long)]
    sweep: Option<String>,
    /// Model spec for sweep mode
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Observation time for H2
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// Window parameter for C03 / M1
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Time scale for M2
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Exhaustive starting-state maxima regardless of size
    #[arg(long, default_value_t = false)]
    full_max: bool,
    /// Report output path (JSON)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergeArgs {
    /// Chain artifact (chain.json)
    #[arg(long)]
    model: PathBuf,
    /// Partition artifact (partition.json)
    #[arg(long)]
    partition: PathBuf,
    /// Limit chain artifact; estimated from the partition when absent
    #[arg(long)]
    limit: Option<PathBuf>,
    /// Comma-separated comparison times
    #[arg(long)]
    times: String,
    /// Starting state key (must lie inside a well)
    #[arg(long)]
    init: String,
    /// Output prefix: <out>.csv and <out>.json
    #[arg(long, default_value = "converge")]
    out: PathBuf,
    /// Monte Carlo seed for the optional empirical cross-check
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Monte Carlo paths for the optional empirical cross-check (0 = off)
    #[arg(long, default_value_t = 0)]
    paths: usize,
    /// Mixing threshold (recorded in the manifest for downstream tools)
    #[arg(long, default_value_t = metastab::potential::DEFAULT_MIXING_THRESHOLD)]
    threshold: f64,
}

fn main() -> ExitCode {
    init_thread_pool();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests succeed; anything else is a usage error
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Model(args) => cmd_model(&args),
        Command::Check(args) => cmd_check(&args),
        Command::Converge(args) => cmd_converge(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::SpecParseError(_)
                | Error::ParameterOutOfRange(_)
                | Error::StateSpaceTooLarge(..) => 1,
                _ => 4,
            };
            ExitCode::from(code)
        }
    }
}

fn init_thread_pool() {
    if let Ok(v) = std::env::var("METASTAB_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    }
}

fn load_spec(path: &Path) -> Result<(ModelSpec, Vec<u8>), Error> {
    let bytes = std::fs::read(path)?;
    let text = String::from_utf8_lossy(&bytes).to_string();
    let spec = if path.extension().map(|e| e == "json").unwrap_or(false) {
        ModelSpec::from_json(&text)?
    } else {
        ModelSpec::from_toml(&text)?
    };
    Ok((spec, bytes))
}

fn cmd_model(args: &ModelArgs) -> Result<ExitCode, Error> {
    let (spec, bytes) = load_spec(&args.spec)?;
    let instance = spec.build()?;
    std::fs::create_dir_all(&args.out)?;
    let chain_json = instance.chain.to_json();
    let partition_json = partition_to_json(&instance.chain, &instance.partition);
    std::fs::write(args.out.join("chain.json"), &chain_json)?;
    std::fs::write(args.out.join("partition.json"), &partition_json)?;

    let mut params = BTreeMap::new();
    params.insert("spec".to_string(), args.spec.display().to_string());
    let mut manifest = RunManifest::new("model", params);
    manifest.hash_input("spec", &bytes);
    manifest.hash_input("chain.json", chain_json.as_bytes());
    manifest.hash_input("partition.json", partition_json.as_bytes());
    std::fs::write(args.out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;

    let res = instance.chain.stationary_residual(instance.stationary.weights());
    println!("states: {}", instance.chain.n_states());
    println!("edges: {}", instance.chain.n_edges());
    println!("theta: {:.6e}", instance.theta);
    println!("wells: {}", instance.partition.n_wells());
    println!("delta states: {}", instance.partition.delta().len());
    println!("stationary residual: {res:.3e}");
    println!("reversible: {}", instance.reversible);
    for w in &instance.warnings {
        println!("warning: {w}");
    }
    Ok(ExitCode::SUCCESS)
}

fn load_artifacts(model: &Path, partition: &Path) -> Result<(Chain, Partition, Vec<u8>, Vec<u8>), Error> {
    let chain_bytes = std::fs::read(model)?;
    let chain = Chain::from_json(&String::from_utf8_lossy(&chain_bytes))?;
    let partition_bytes = std::fs::read(partition)?;
    let partition = partition_from_json(&chain, &String::from_utf8_lossy(&partition_bytes))?;
    Ok((chain, partition, chain_bytes, partition_bytes))
}

fn run_check(
    id: ConditionId,
    chain: &Chain,
    partition: &Partition,
    args: &CheckArgs,
) -> Result<ConditionReport, Error> {
    let policy = if args.full_max { StartPolicy::FullMax } else { StartPolicy::Auto };
    Ok(match id {
        ConditionId::H2 => check_h2(chain, partition, args.t, policy)?,
        ConditionId::C03 => check_condition_03(chain, partition, args.delta, policy)?,
        ConditionId::L08 => check_l08(chain, partition)?,
        ConditionId::M1 => check_m1(chain, partition, args.delta)?,
        ConditionId::CAPEST | ConditionId::TMIX2 => {
            let mut rep = check_m1(chain, partition, args.delta)?;
            let prefix = if id == ConditionId::CAPEST { "capest_well_" } else { "tracemixing2_well_" };
            let headline = rep
                .values
                .iter()
                .filter(|(k, _)| k.starts_with(prefix))
                .map(|(_, &v)| v)
                .fold(0.0f64, f64::max);
            rep.id = id;
            rep.values.insert("value".to_string(), headline);
            rep
        }
        ConditionId::M2a => check_m2(chain, partition, args.epsilon)?.b04,
        ConditionId::M2b => check_m2(chain, partition, args.epsilon)?.b07,
        ConditionId::B09A => check_measure_ratios(chain, partition)?.b09a,
        ConditionId::B09 => check_measure_ratios(chain, partition)?.b09,
        ConditionId::TMIX3 => check_measure_ratios(chain, partition)?
            .tmix3
            .ok_or(Error::NoBottoms)?,
    })
}

fn cmd_check(args: &CheckArgs) -> Result<ExitCode, Error> {
    let id = match ConditionId::parse(&args.check) {
        Some(id) => id,
        None => {
            eprintln!("unknown condition id `{}`", args.check);
            return Ok(ExitCode::from(1));
        }
    };

    let mut params = BTreeMap::new();
    params.insert("check".to_string(), args.check.clone());
    params.insert("t".to_string(), args.t.to_string());
    params.insert("delta".to_string(), args.delta.to_string());
    params.insert("epsilon".to_string(), args.epsilon.to_string());
    params.insert("full_max".to_string(), args.full_max.to_string());
    let mut manifest = RunManifest::new("check", params);

    let report = match &args.sweep {
        Some(sweep) => {
            let spec_path = args.spec.as_ref().ok_or_else(|| {
                Error::SpecParseError("sweep mode needs --spec to regenerate the model per size".into())
            })?;
            let (spec, bytes) = load_spec(spec_path)?;
            manifest.hash_input("spec", &bytes);
            let sizes: Result<Vec<u32>, _> = sweep.split(',').map(|s| s.trim().parse::<u32>()).collect();
            let sizes = sizes.map_err(|e| Error::SpecParseError(format!("bad sweep list: {e}")))?;
            metastab::report::sweep_condition(&sizes, |n| {
                let instance = spec.with_size(n as usize).build()?;
                run_check(id, &instance.chain, &instance.partition, args)
            })?
        }
        None => {
            let model = args.model.as_ref().ok_or_else(|| {
                Error::SpecParseError("--model and --partition are required outside sweep mode".into())
            })?;
            let partition = args.partition.as_ref().ok_or_else(|| {
                Error::SpecParseError("--model and --partition are required outside sweep mode".into())
            })?;
            let (chain, partition, cb, pb) = load_artifacts(model, partition)?;
            manifest.hash_input("chain.json", &cb);
            manifest.hash_input("partition.json", &pb);
            run_check(id, &chain, &partition, args)?
        }
    };

    let doc = serde_json::json!({ "manifest": manifest, "report": report });
    let text = serde_json::to_string_pretty(&doc)?;
    match &args.out {
        Some(path) => std::fs::write(path, &text)?,
        None => println!("{text}"),
    }
    println!(
        "{:?} value {:.6e} verdict {:?}",
        report.id,
        report.value(),
        report.verdict
    );
    Ok(match report.verdict {
        Verdict::Pass | Verdict::TrendPass => ExitCode::SUCCESS,
        Verdict::Fail => ExitCode::from(2),
        Verdict::Warn => ExitCode::from(3),
    })
}

fn cmd_converge(args: &ConvergeArgs) -> Result<ExitCode, Error> {
    let (chain, partition, cb, pb) = load_artifacts(&args.model, &args.partition)?;
    let times: Result<Vec<f64>, _> = args.times.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let times = times.map_err(|e| Error::SpecParseError(format!("bad time list: {e}")))?;
    if times.is_empty() || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::SpecParseError("times must be strictly increasing".into()));
    }
    let init = chain
        .index_of(&args.init)
        .ok_or_else(|| Error::SpecParseError(format!("unknown init state `{}`", args.init)))?;

    let mut params = BTreeMap::new();
    params.insert("times".to_string(), args.times.clone());
    params.insert("init".to_string(), args.init.clone());
    params.insert("threshold".to_string(), args.threshold.to_string());
    params.insert("seed".to_string(), args.seed.to_string());
    params.insert("paths".to_string(), args.paths.to_string());
    let mut manifest = RunManifest::new("converge", params);
    manifest.hash_input("chain.json", &cb);
    manifest.hash_input("partition.json", &pb);

    let limit = match &args.limit {
        Some(path) => {
            let bytes = std::fs::read(path)?;
            manifest.hash_input("limit.json", &bytes);
            Chain::from_json(&String::from_utf8_lossy(&bytes))?
        }
        None => {
            manifest
                .params
                .insert("limit".to_string(), "estimated from the partition (mean-rate reduction)".into());
            estimate_limit_chain(&chain, &partition)?
        }
    };

    // per-time curves: label marginals of the projected chain + state TV
    let n_labels = partition.n_wells();
    let mut csv = String::from("t");
    for y in 0..=n_labels {
        csv.push_str(&format!(",p_label_{y}"));
    }
    csv.push_str(",tv\n");
    let mut rows = Vec::new();
    for &t in &times {
        let joint = exact_label_joint(&chain, &partition, init, &[t])?;
        let mut marginals = vec![0.0; n_labels + 1];
        for (tuple, p) in &joint {
            marginals[tuple[0]] += p;
        }
        let sc = state_convergence(&chain, &partition, &limit, &[t], init)?;
        let mut row = format!("{t}");
        for m in &marginals {
            row.push_str(&format!(",{m}"));
        }
        row.push_str(&format!(",{}\n", sc.tv));
        csv.push_str(&row);
        rows.push((t, marginals, sc.tv));
    }

    let mc = if args.paths > 0 {
        let horizon = times.last().copied().unwrap_or(1.0) * 1.05;
        let cfg = metastab::simulate::SimConfig { seed: args.seed, paths: args.paths, horizon };
        let paths = metastab::simulate::gillespie(&chain, init, &cfg);
        let table = metastab::simulate::empirical_fdd(&paths, &partition, &times)?;
        Some(
            table
                .into_iter()
                .map(|(tuple, est)| {
                    (
                        tuple.iter().map(|l| l.to_string()).collect::<Vec<_>>().join("-"),
                        serde_json::json!({"value": est.value, "std_error": est.std_error, "n": est.n}),
                    )
                })
                .collect::<BTreeMap<String, serde_json::Value>>(),
        )
    } else {
        None
    };

    let csv_path = args.out.with_extension("csv");
    let json_path = args.out.with_extension("json");
    std::fs::write(&csv_path, &csv)?;
    let doc = serde_json::json!({
        "manifest": manifest,
        "curve": rows.iter().map(|(t, m, tv)| serde_json::json!({"t": t, "marginals": m, "tv": tv})).collect::<Vec<_>>(),
        "empirical_fdd": mc,
    });
    std::fs::write(&json_path, serde_json::to_string_pretty(&doc)?)?;
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(ExitCode::SUCCESS)
}
