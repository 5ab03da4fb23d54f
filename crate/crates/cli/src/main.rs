mod report;

use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ddgstore::oracle::strategy_count;
use ddgstore::{
    brute_force_min_capped, derive_costs, generate_random_ddg, load_ddg_file, optimize_with,
    random_catalog, save_ddg, scr, scr_breakdown, CostedDdg, CtgVertex, ProviderCatalog,
    RandomParams, Segment, StorageStrategy, StrategyKind, DEFAULT_SEGMENT_SIZE,
};
use rayon::prelude::*;

use report::{CostReport, Format, Metadata, RunRow, StrategyRow};

#[derive(Parser)]
#[command(
    name = "ddgstore",
    version,
    about = "Cost-optimal storage of regenerable datasets across cloud providers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the multi-provider storage strategy of a DDG.
    Optimize(OptimizeArgs),
    /// Evaluate several strategies on one DDG.
    Compare(CompareArgs),
    /// Run all strategies on random DDGs and report mean costs.
    Simulate(SimulateArgs),
    /// Check the chain optimizer against exhaustive search on random chains.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct Inputs {
    #[arg(long, value_name = "FILE")]
    ddg: PathBuf,
    #[arg(long, value_name = "FILE")]
    providers: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEGMENT_SIZE, value_parser = positive)]
    segment_size: usize,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    inputs: Inputs,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Comma-separated subset of all, none, cost-rate, local-opt, tcsb.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "all,none,cost-rate,local-opt,tcsb"
    )]
    strategies: Vec<String>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_parser = positive)]
    datasets: usize,
    #[arg(long, value_name = "FILE")]
    providers: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1, value_parser = positive)]
    runs: usize,
    #[arg(long, default_value_t = DEFAULT_SEGMENT_SIZE, value_parser = positive)]
    segment_size: usize,
    /// Probability that a dataset branches off an earlier one instead of extending the chain.
    #[arg(long, default_value_t = 0.0)]
    branching: f64,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Record wall-clock time of each optimisation (JSON metadata, stderr for CSV).
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_parser = positive)]
    datasets: usize,
    #[arg(long = "m", value_parser = positive)]
    providers: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 100, value_parser = positive)]
    runs: usize,
    #[arg(long, default_value_t = ddgstore::oracle::DEFAULT_CAP)]
    cap: u64,
    /// Shrinks the start→end edge weight so the search is wrong; checks the harness itself.
    #[arg(long, hide = true)]
    corrupt_weight: bool,
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

/// An error that maps to a specific exit status.
#[derive(Debug)]
struct VerificationFailed(usize);

impl std::fmt::Display for VerificationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} run(s) disagreed with exhaustive search", self.0)
    }
}

impl std::error::Error for VerificationFailed {}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Optimize(a) => cmd_optimize(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<VerificationFailed>() => {
            eprintln!("verification failed: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load_catalog(path: &Path) -> Result<ProviderCatalog> {
    ProviderCatalog::load(path).with_context(|| format!("cannot use catalog {}", path.display()))
}

fn load_inputs(inputs: &Inputs) -> Result<CostedDdg> {
    let ddg = load_ddg_file(&inputs.ddg)
        .with_context(|| format!("cannot use DDG {}", inputs.ddg.display()))?;
    let catalog = load_catalog(&inputs.providers)?;
    Ok(derive_costs(ddg, catalog))
}

fn metadata(costed: &CostedDdg, seed: Option<u64>, segment_size: usize) -> Metadata {
    Metadata {
        seed,
        datasets: costed.len(),
        segment_size,
        catalog: costed.catalog().clone(),
        optimize_seconds: None,
    }
}

fn strategy_row(costed: &CostedDdg, kind: StrategyKind, segment_size: usize) -> StrategyRow {
    let strategy = kind.run(costed, segment_size);
    let breakdown = scr_breakdown(costed, &strategy).expect("strategies fit their graph");
    StrategyRow::new(kind.name(), breakdown).with_assignment(costed, &strategy)
}

fn cmd_optimize(args: OptimizeArgs) -> Result<()> {
    let costed = load_inputs(&args.inputs)?;
    let segment_size = args.inputs.segment_size;
    let row = strategy_row(&costed, StrategyKind::Tcsb, segment_size);
    let report = CostReport {
        strategies: vec![row],
        runs: Vec::new(),
        metadata: metadata(&costed, None, segment_size),
    };
    report.write(args.inputs.format, io::stdout().lock())
}

fn parse_strategies(names: &[String]) -> Result<Vec<StrategyKind>> {
    if names.is_empty() {
        bail!("no strategies requested");
    }
    names
        .iter()
        .map(|n| n.trim().parse::<StrategyKind>().map_err(|e| anyhow!(e)))
        .collect()
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let kinds = parse_strategies(&args.strategies)?;
    let costed = load_inputs(&args.inputs)?;
    let segment_size = args.inputs.segment_size;
    let rows = kinds
        .iter()
        .map(|&k| strategy_row(&costed, k, segment_size))
        .collect();
    let report = CostReport {
        strategies: rows,
        runs: Vec::new(),
        metadata: metadata(&costed, None, segment_size),
    };
    report.write(args.inputs.format, io::stdout().lock())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&args.branching) {
        bail!("--branching must lie in [0, 1]");
    }
    let catalog = load_catalog(&args.providers)?;
    let kinds = StrategyKind::ALL;

    // (rows, tcsb seconds) per run, gathered in run order
    let results: Vec<(Vec<StrategyRow>, f64)> = (0..args.runs)
        .into_par_iter()
        .map(|run| {
            let params = RandomParams {
                seed: args.seed.wrapping_add(run as u64),
                segment_size: args.segment_size,
                branching: args.branching,
                ..RandomParams::new(args.datasets, 0)
            };
            let costed = derive_costs(generate_random_ddg(&params), catalog.clone());
            let mut seconds = 0.0;
            let rows = kinds
                .iter()
                .map(|&k| {
                    let strategy = if k == StrategyKind::Tcsb {
                        let t = Instant::now();
                        let state = optimize_with(costed.clone(), args.segment_size);
                        seconds = t.elapsed().as_secs_f64();
                        state.strategy().clone()
                    } else {
                        k.run(&costed, args.segment_size)
                    };
                    let b = scr_breakdown(&costed, &strategy).expect("strategy fits graph");
                    StrategyRow::new(k.name(), b)
                })
                .collect();
            (rows, seconds)
        })
        .collect();

    let strategies = kinds
        .iter()
        .enumerate()
        .map(|(i, k)| {
            let rows: Vec<StrategyRow> = results.iter().map(|(r, _)| r[i].clone()).collect();
            StrategyRow::mean(k.name(), &rows)
        })
        .collect();
    let runs = results
        .iter()
        .enumerate()
        .map(|(run, (rows, _))| RunRow {
            run,
            seed: args.seed.wrapping_add(run as u64),
            scr_per_month: rows.iter().map(|r| r.scr_per_month).collect(),
        })
        .collect();
    let seconds: Vec<f64> = results.iter().map(|(_, s)| *s).collect();
    if args.timings && args.format == Format::Csv {
        for (run, s) in seconds.iter().enumerate() {
            eprintln!("run {run}: optimize {s:.6} s");
        }
    }
    let report = CostReport {
        strategies,
        runs,
        metadata: Metadata {
            seed: Some(args.seed),
            datasets: args.datasets,
            segment_size: args.segment_size,
            catalog,
            optimize_seconds: args.timings.then_some(seconds),
        },
    };
    report.write(args.format, io::stdout().lock())
}

struct Mismatch {
    run: usize,
    costed: CostedDdg,
    found: Vec<u32>,
    found_scr: f64,
    oracle: StorageStrategy,
    oracle_scr: f64,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

fn cmd_verify(args: VerifyArgs) -> Result<()> {
    if strategy_count(args.datasets, args.providers, args.cap).is_none() {
        bail!(
            "instance too large: ({}+1)^{} strategies exceed the cap of {}",
            args.providers,
            args.datasets,
            args.cap
        );
    }
    let corrupt = args.corrupt_weight;
    let outcomes: Vec<Option<Mismatch>> = (0..args.runs)
        .into_par_iter()
        .map(|run| {
            let seed = args.seed.wrapping_add(run as u64);
            let ddg = generate_random_ddg(&RandomParams::new(args.datasets, seed));
            let costed = derive_costs(ddg, random_catalog(args.providers, seed));
            let ctg = Segment::from_linear(&costed)
                .expect("generated chains are linear")
                .build_ctg();
            let sol = ctg.shortest_path_by(|from, to, w| {
                if corrupt && from == CtgVertex::Start && to == CtgVertex::End {
                    w * 0.01
                } else {
                    w
                }
            });
            let oracle = brute_force_min_capped(&costed, args.cap).expect("size checked");
            let reevaluated = scr(&costed, &sol.strategy()).expect("strategy fits graph");
            if close(sol.scr, oracle.min_scr) && close(reevaluated, sol.scr) {
                None
            } else {
                Some(Mismatch {
                    run,
                    found: sol.flags.clone(),
                    found_scr: sol.scr,
                    oracle: oracle.argmin[0].clone(),
                    oracle_scr: oracle.min_scr,
                    costed,
                })
            }
        })
        .collect();

    let failures: Vec<&Mismatch> = outcomes.iter().flatten().collect();
    println!(
        "verify: {}/{} runs match exhaustive search (n={}, m={}, seed={})",
        args.runs - failures.len(),
        args.runs,
        args.datasets,
        args.providers,
        args.seed
    );
    if let Some(first) = failures.first() {
        println!("counterexample (run {}):", first.run);
        println!(
            "  optimizer flags {:?} scr {}",
            first.found, first.found_scr
        );
        println!(
            "  oracle flags    {:?} scr {}",
            first.oracle.flags(),
            first.oracle_scr
        );
        println!(
            "  catalog: {}",
            serde_json::to_string(first.costed.catalog())?
        );
        println!("  ddg:\n{}", save_ddg(first.costed.ddg()));
        return Err(VerificationFailed(failures.len()).into());
    }
    Ok(())
}
