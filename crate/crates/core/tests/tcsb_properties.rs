mod common;

use common::{close, random_chain};
use ddgstore::{
    brute_force_min, build_ctg, optimize_segment, scr, CtgVertex, StorageStrategy, HOME,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_path(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<CtgVertex> {
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

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn shortest_path_matches_exhaustive_minimum(n in 1usize..=7, m in 1usize..=3, seed in any::<u64>()) {
        let c = random_chain(n, m, seed);
        let sol = optimize_segment(&c).unwrap();
        let oracle = brute_force_min(&c).unwrap();
        prop_assert!(close(sol.scr, oracle.min_scr), "{} vs {}", sol.scr, oracle.min_scr);
        prop_assert!(close(scr(&c, &sol.strategy()).unwrap(), sol.scr));
    }

    #[test]
    fn every_path_length_is_its_strategy_cost(n in 0usize..=12, m in 1usize..=4, seed in any::<u64>()) {
        let c = random_chain(n, m, seed);
        let ctg = build_ctg(&c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let path = random_path(n, m, &mut rng);
            let flags = ctg.decode(&path).unwrap();
            prop_assert_eq!(&ctg.encode(&flags).unwrap(), &path);
            let len = ctg.path_length(&path).unwrap();
            let cost = scr(&c, &StorageStrategy::from_flags(flags)).unwrap();
            prop_assert!(close(len, cost) || (len == 0.0 && cost == 0.0), "{len} vs {cost}");
        }
    }

    #[test]
    fn extreme_paths_are_store_all_and_store_none(n in 1usize..=15, m in 1usize..=3, seed in any::<u64>()) {
        let c = random_chain(n, m, seed);
        let ctg = build_ctg(&c).unwrap();
        let all_home = ctg.encode(&vec![HOME; n]).unwrap();
        let store_all: f64 = (0..n).map(|i| c.y(i, HOME)).sum();
        prop_assert!(close(ctg.path_length(&all_home).unwrap(), store_all));
        let none = ctg.edge_weight(CtgVertex::Start, CtgVertex::End).unwrap();
        prop_assert!(close(none, scr(&c, &StorageStrategy::uniform(n, 0)).unwrap()));
    }

    #[test]
    fn weights_are_finite_and_non_negative(n in 0usize..=10, m in 1usize..=4, seed in any::<u64>()) {
        let c = random_chain(n, m, seed);
        let ctg = build_ctg(&c).unwrap();
        let mut count = 0;
        for from in ctg.vertices() {
            ctg.for_each_out_edge(from, |_, w| {
                assert!(w.is_finite() && w >= 0.0);
                count += 1;
            });
        }
        prop_assert_eq!(count, ctg.edge_count());
    }

    #[test]
    fn extra_provider_never_hurts(n in 1usize..=30, m in 1usize..=4, seed in any::<u64>()) {
        let c = random_chain(n, m + 1, seed);
        let (ddg, full) = c.into_parts();
        let mut fewer = full.clone();
        fewer.providers.pop();
        let with = optimize_segment(&ddgstore::derive_costs(ddg.clone(), full)).unwrap().scr;
        let without = optimize_segment(&ddgstore::derive_costs(ddg, fewer)).unwrap().scr;
        prop_assert!(with <= without * (1.0 + 1e-9));
    }

    #[test]
    fn price_scaling_scales_the_optimum(n in 1usize..=6, m in 1usize..=3, seed in any::<u64>(), lambda in 0.1f64..10.0) {
        let c = random_chain(n, m, seed);
        let (ddg, catalog) = c.clone().into_parts();
        let mut scaled = catalog.clone();
        scaled.compute_per_cpu_hour *= lambda;
        for p in &mut scaled.providers {
            p.storage_per_gb_month *= lambda;
            p.transfer_out_per_gb *= lambda;
        }
        let s = ddgstore::derive_costs(ddg, scaled);
        let a = brute_force_min(&c).unwrap();
        let b = brute_force_min(&s).unwrap();
        prop_assert!((b.min_scr - lambda * a.min_scr).abs() <= 1e-9 * b.min_scr);
        prop_assert_eq!(a.argmin[0].clone(), b.argmin[0].clone());
    }
}

#[test]
fn single_dataset_picks_cheapest_option() {
    for seed in 0..50 {
        let c = random_chain(1, 3, seed);
        let sol = optimize_segment(&c).unwrap();
        let v = c.v(0);
        let stored = (1..=3u32)
            .map(|s| c.y(0, s) + c.z(0, s) * v)
            .fold(f64::INFINITY, f64::min);
        assert!(close(sol.scr, stored.min(c.x(0) * v)));
    }
}
