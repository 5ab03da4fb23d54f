#![allow(dead_code)]

use ddgstore::{
    derive_costs, generate_random_ddg, random_catalog, CostedDdg, Dataset, Ddg, ProviderCatalog,
    RandomParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300)
}

/// Random chain of `n` datasets priced with a random `m`-provider catalog.
pub fn random_chain(n: usize, m: usize, seed: u64) -> CostedDdg {
    let ddg = generate_random_ddg(&RandomParams::new(n, seed));
    derive_costs(ddg, random_catalog(m, seed))
}

/// Random DAG where each dataset has zero to two predecessors among earlier ones.
pub fn random_dag(n: usize, catalog: ProviderCatalog, seed: u64) -> CostedDdg {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ds = Vec::with_capacity(n);
    for i in 0..n {
        let mut d = Dataset::new(
            format!("n{i}"),
            rng.gen_range(1.0..=100.0),
            rng.gen_range(10.0..=100.0),
            rng.gen_range(1.0 / 12.0..=1.0),
        );
        if i > 0 {
            let k = rng.gen_range(0..=2usize.min(i));
            for _ in 0..k {
                let p = format!("n{}", rng.gen_range(0..i));
                if !d.predecessors.iter().any(|q| q.as_str() == p) {
                    d.predecessors.push(p.as_str().into());
                }
            }
        }
        ds.push(d);
    }
    derive_costs(Ddg::new(ds).unwrap(), catalog)
}
