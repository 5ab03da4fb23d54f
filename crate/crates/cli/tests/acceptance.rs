//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any of them fails.

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use ddgstore::{
    baseline_with, brute_force_min, derive_costs, generate_random_ddg, optimize_segment,
    optimize_with, random_catalog, scr, Baseline, CostedDdg, CtgVertex, Provider, ProviderCatalog,
    RandomParams, Segment, StorageStrategy, DEFAULT_SEGMENT_SIZE,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn leq(a: f64, b: f64) -> bool {
    a <= b + 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn ddgstore() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ddgstore"))
}

fn chain(n: usize, seed: u64) -> ddgstore::Ddg {
    generate_random_ddg(&RandomParams::new(n, seed))
}

fn oracle_equivalence() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let instances = 500;
    for k in 0..instances {
        let n = rng.gen_range(1..=8);
        let m = rng.gen_range(1..=3);
        let seed = rng.gen();
        let costed = derive_costs(chain(n, seed), random_catalog(m, seed));
        let sol = optimize_segment(&costed).map_err(|e| e.to_string())?;
        let oracle = brute_force_min(&costed).map_err(|e| e.to_string())?;
        let again = scr(&costed, &sol.strategy()).map_err(|e| e.to_string())?;
        ensure(close(sol.scr, oracle.min_scr), || {
            format!(
                "instance {k} (n={n}, m={m}, seed={seed}): {} vs oracle {}",
                sol.scr, oracle.min_scr
            )
        })?;
        ensure(close(again, sol.scr), || {
            format!(
                "instance {k}: decoded strategy re-evaluates to {again}, path says {}",
                sol.scr
            )
        })?;
    }
    let elapsed = started.elapsed();
    ensure(elapsed < Duration::from_secs(60), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!("{instances} chains, n<=8, m<=3, {:.2?}", elapsed))
}

fn random_path(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<CtgVertex> {
    let mut path = vec![CtgVertex::Start];
    for position in 0..n {
        if rng.gen_bool(0.5) {
            path.push(CtgVertex::Pair {
                position,
                provider: rng.gen_range(1..=m as u32),
            });
        }
    }
    path.push(CtgVertex::End);
    path
}

fn path_bijection() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let graphs = 100;
    let paths = 50;
    for g in 0..graphs {
        let n = rng.gen_range(1..=30);
        let m = rng.gen_range(1..=5);
        let seed = rng.gen();
        let costed = derive_costs(chain(n, seed), random_catalog(m, seed));
        let ctg = Segment::from_linear(&costed)
            .map_err(|e| e.to_string())?
            .build_ctg();
        for _ in 0..paths {
            let path = random_path(&mut rng, n, m);
            let length = ctg.path_length(&path).map_err(|e| e.to_string())?;
            let flags = ctg.decode(&path).map_err(|e| e.to_string())?;
            let cost = scr(&costed, &StorageStrategy::from_flags(flags.clone()))
                .map_err(|e| e.to_string())?;
            ensure(close(length, cost), || {
                format!("graph {g}: path {path:?} has length {length}, strategy costs {cost}")
            })?;
            let back = ctg.encode(&flags).map_err(|e| e.to_string())?;
            ensure(back == path, || {
                format!("graph {g}: encode(decode(p)) != p for {path:?}")
            })?;
        }
    }
    Ok(format!("{graphs} graphs x {paths} paths"))
}

fn w1_fixture() -> Outcome {
    let root = workspace_root();
    let fixture = root.join("crates/cli/tests/fixtures/w1.json");
    let catalog = root.join("catalogs/s3_glacier.json");
    let out = ddgstore()
        .args([
            "compare",
            "--format",
            "json",
            "--strategies",
            "all,none,tcsb",
        ])
        .arg("--ddg")
        .arg(&fixture)
        .arg("--providers")
        .arg(&catalog)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        String::from_utf8_lossy(&out.stderr).into_owned()
    })?;
    let report: serde_json::Value =
        serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    let rows = report["strategies"]
        .as_array()
        .ok_or("no strategies array")?;
    let scr_of = |name: &str| {
        rows.iter()
            .find(|r| r["strategy"] == name)
            .and_then(|r| r["scr_per_month"].as_f64())
            .ok_or(format!("missing row {name}"))
    };
    let (all, none, tcsb) = (scr_of("all")?, scr_of("none")?, scr_of("tcsb")?);
    ensure(close(all, 9.0), || format!("store-all {all}"))?;
    ensure(close(none, 10.0), || format!("store-none {none}"))?;
    ensure(close(tcsb, 1.8), || format!("tcsb {tcsb}"))?;
    let tcsb_row = rows.iter().find(|r| r["strategy"] == "tcsb").unwrap();
    let providers: Vec<u64> = tcsb_row["assignment"]
        .as_array()
        .ok_or("no assignment")?
        .iter()
        .filter_map(|a| a["provider"].as_u64())
        .collect();
    ensure(providers == [2, 2, 2], || {
        format!("assignment {providers:?}")
    })?;

    let ddg = ddgstore::load_ddg_file(&fixture).map_err(|e| e.to_string())?;
    let costed = derive_costs(
        ddg,
        ProviderCatalog::load(&catalog).map_err(|e| e.to_string())?,
    );
    let oracle = brute_force_min(&costed).map_err(|e| e.to_string())?;
    ensure(close(oracle.min_scr, 1.8), || {
        format!("oracle minimum {}", oracle.min_scr)
    })?;
    ensure(
        oracle.argmin.len() == 1 && oracle.argmin[0].flags() == [2, 2, 2],
        || "oracle disagrees on the argmin".into(),
    )?;
    Ok("all 9.00, none 10.00, tcsb 1.80 at glacier (oracle-confirmed)".into())
}

struct Costs {
    all: f64,
    none: f64,
    cost_rate: f64,
    local_opt: f64,
    tcsb: f64,
}

fn all_costs(costed: &CostedDdg) -> Costs {
    let b = |k| baseline_with(costed, k, DEFAULT_SEGMENT_SIZE).1;
    Costs {
        all: b(Baseline::StoreAll),
        none: b(Baseline::StoreNone),
        cost_rate: b(Baseline::CostRateBased),
        local_opt: b(Baseline::LocalOptSingle),
        tcsb: optimize_with(costed.clone(), DEFAULT_SEGMENT_SIZE).scr(),
    }
}

fn dominance() -> Outcome {
    let instances = 30;
    let mut mean = [0.0; 5];
    for seed in 0..instances {
        let costed = derive_costs(chain(100, seed), ProviderCatalog::s3_two_services());
        let c = all_costs(&costed);
        let floor = c.all.min(c.none);
        ensure(leq(c.tcsb, c.local_opt), || {
            format!("seed {seed}: tcsb {} > local-opt {}", c.tcsb, c.local_opt)
        })?;
        ensure(leq(c.local_opt, c.cost_rate), || {
            format!(
                "seed {seed}: local-opt {} > cost-rate {}",
                c.local_opt, c.cost_rate
            )
        })?;
        ensure(leq(c.cost_rate, floor), || {
            format!("seed {seed}: cost-rate {} > {floor}", c.cost_rate)
        })?;
        for (acc, v) in mean
            .iter_mut()
            .zip([c.tcsb, c.local_opt, c.cost_rate, c.all, c.none])
        {
            *acc += ddgstore::daily_cost(v) / instances as f64;
        }
    }
    let [tcsb, local, rate, all, none] = mean;
    ensure(
        tcsb <= local && local <= rate && rate <= all.min(none),
        || format!("means {mean:?}"),
    )?;
    Ok(format!(
        "{instances} x 100 datasets, mean $/day tcsb {tcsb:.2} <= local-opt {local:.2} <= cost-rate {rate:.2} <= min(all {all:.2}, none {none:.2})"
    ))
}

fn catalog_sensitivity() -> Outcome {
    let instances = 30;
    let improvement = |catalog: &ProviderCatalog| -> Result<f64, String> {
        let mut total = 0.0;
        for seed in 0..instances {
            let costed = derive_costs(chain(100, seed), catalog.clone());
            let local = baseline_with(&costed, Baseline::LocalOptSingle, DEFAULT_SEGMENT_SIZE).1;
            let tcsb = optimize_with(costed, DEFAULT_SEGMENT_SIZE).scr();
            ensure(leq(tcsb, local), || {
                format!("seed {seed}: tcsb {tcsb} > local-opt {local}")
            })?;
            total += (local - tcsb) / local;
        }
        Ok(total / instances as f64)
    };
    let haylix = improvement(&ProviderCatalog::s3_haylix())?;
    let glacier = improvement(&ProviderCatalog::s3_glacier())?;
    ensure(haylix >= 0.0 && haylix < glacier, || {
        format!("haylix improvement {haylix:.4}, glacier {glacier:.4}")
    })?;
    Ok(format!(
        "mean improvement over local-opt: haylix {:.2}% < glacier {:.2}%",
        haylix * 100.0,
        glacier * 100.0
    ))
}

fn monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let instances = 200;
    for k in 0..instances {
        let n = rng.gen_range(1..=120);
        let m = rng.gen_range(1..=4);
        let seed = rng.gen();
        let params = RandomParams {
            branching: if k % 2 == 0 { 0.0 } else { 0.2 },
            ..RandomParams::new(n, seed)
        };
        let ddg = generate_random_ddg(&params);
        let catalog = random_catalog(m, seed);
        let extra = Provider::new(
            "extra",
            rng.gen_range(0.01..=0.15),
            rng.gen_range(0.01..=0.12),
        );
        let before = optimize_with(
            derive_costs(ddg.clone(), catalog.clone()),
            DEFAULT_SEGMENT_SIZE,
        )
        .scr();
        let after = optimize_with(
            derive_costs(ddg, catalog.with_provider(extra)),
            DEFAULT_SEGMENT_SIZE,
        )
        .scr();
        ensure(leq(after, before), || {
            format!("instance {k} (n={n}, m={m}, seed={seed}): {before} -> {after}")
        })?;
    }
    Ok(format!("{instances} instances"))
}

/// Fastest of a few repetitions, to keep scheduler noise out of the fit.
fn time_optimize(n: usize, seed: u64, reps: usize) -> f64 {
    let costed = derive_costs(chain(n, seed), random_catalog(10, seed));
    (0..reps)
        .map(|_| {
            let t = Instant::now();
            let state = optimize_with(costed.clone(), DEFAULT_SEGMENT_SIZE);
            std::hint::black_box(state.scr());
            t.elapsed().as_secs_f64()
        })
        .fold(f64::INFINITY, f64::min)
}

fn r_squared(xs: &[f64], ys: &[f64]) -> f64 {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    sxy * sxy / (sxx * syy)
}

fn efficiency() -> Outcome {
    let t100 = time_optimize(100, 7, 1);
    ensure(t100 < 3.0, || format!("100 datasets took {t100:.3} s"))?;
    let t1000 = time_optimize(1000, 7, 1);
    ensure(t1000 < 30.0, || format!("1000 datasets took {t1000:.3} s"))?;
    let ns: Vec<f64> = (1..=10).map(|k| (k * 100) as f64).collect();
    let ts: Vec<f64> = ns
        .iter()
        .map(|&n| time_optimize(n as usize, 7, 3))
        .collect();
    let r2 = r_squared(&ns, &ts);
    ensure(r2 > 0.9, || format!("R^2 {r2:.4} for times {ts:?}"))?;
    Ok(format!(
        "n=100 {t100:.3} s, n=1000 {t1000:.3} s, linear fit R^2 {r2:.4}"
    ))
}

fn locality() -> Outcome {
    let sequences = 100;
    let mut events = 0;
    for seed in 0..sequences {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(20..=150);
        let params = RandomParams {
            branching: rng.gen_range(0.0..0.3),
            ..RandomParams::new(n, seed)
        };
        let segment_size = rng.gen_range(5..=30);
        let costed = derive_costs(generate_random_ddg(&params), random_catalog(3, seed));
        let mut state = optimize_with(costed, segment_size);
        for _ in 0..10 {
            let idx = rng.gen_range(0..n);
            let unit = state
                .partition()
                .unit_of(idx)
                .ok_or("dataset outside every unit")?;
            let members = state.partition().unit_members(unit).to_vec();
            let id = state.costed().ddg().dataset(idx).id.clone();
            let before = state.strategy().clone();
            let touched = state
                .on_frequency_change(&id, rng.gen_range(0.0..3.0))
                .map_err(|e| e.to_string())?;
            ensure(touched.iter().all(|t| members.contains(t)), || {
                format!("sequence {seed}: re-decided datasets outside the unit of {id}")
            })?;
            for i in (0..n).filter(|i| !members.contains(i)) {
                ensure(state.strategy().get(i) == before.get(i), || {
                    format!("sequence {seed}: dataset {i} changed after an event on {id}")
                })?;
            }
            events += 1;
        }
    }
    Ok(format!("{sequences} sequences, {events} frequency changes"))
}

fn determinism() -> Outcome {
    let catalog = workspace_root().join("catalogs/s3_two_services.json");
    let run = || {
        ddgstore()
            .args([
                "simulate",
                "--datasets",
                "120",
                "--seed",
                "42",
                "--runs",
                "4",
                "--branching",
                "0.1",
            ])
            .args(["--segment-size", "30", "--format", "csv", "--timings"])
            .arg("--providers")
            .arg(&catalog)
            .output()
            .map_err(|e| e.to_string())
    };
    let (a, b) = (run()?, run()?);
    ensure(a.status.success() && b.status.success(), || {
        String::from_utf8_lossy(&a.stderr).into_owned()
    })?;
    ensure(!a.stdout.is_empty() && a.stdout == b.stdout, || {
        "CSV reports differ".into()
    })?;
    Ok(format!("{} identical bytes", a.stdout.len()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("oracle equivalence", oracle_equivalence),
        ("path/strategy bijection", path_bijection),
        ("fixture W1", w1_fixture),
        ("dominance ordering", dominance),
        ("catalog sensitivity", catalog_sensitivity),
        ("provider monotonicity", monotonicity),
        ("efficiency", efficiency),
        ("runtime event locality", locality),
        ("report determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
