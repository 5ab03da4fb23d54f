//! Exhaustive minimum over every storage assignment of a small graph.
//!
//! Evaluates each of the `(m+1)^n` strategies with the plain cost model and
//! nothing else, so it can serve as ground truth for the optimizers.

use rayon::prelude::*;
use thiserror::Error;

use crate::ddg::{scr_unchecked, StorageStrategy, Walk};
use crate::pricing::CostedDdg;

pub const DEFAULT_CAP: u64 = 10_000_000;

/// Relative tolerance when collecting tied minimisers.
pub const ARGMIN_TOLERANCE: f64 = 1e-9;

const CHUNK: u64 = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("{providers_plus_one}^{datasets} strategies exceed the enumeration cap of {cap}")]
    InstanceTooLarge {
        datasets: usize,
        providers_plus_one: u64,
        cap: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub min_scr: f64,
    /// Every strategy within tolerance of `min_scr`, in enumeration order.
    pub argmin: Vec<StorageStrategy>,
    pub enumerated_count: u64,
}

pub fn brute_force_min(costed: &CostedDdg) -> Result<OracleResult, OracleError> {
    brute_force_min_capped(costed, DEFAULT_CAP)
}

/// Number of strategies, or `None` when it exceeds `cap`.
pub fn strategy_count(datasets: usize, providers: usize, cap: u64) -> Option<u64> {
    let radix = providers as u64 + 1;
    let mut total: u64 = 1;
    for _ in 0..datasets {
        total = total.checked_mul(radix).filter(|&t| t <= cap)?;
    }
    Some(total)
}

fn within(value: f64, min: f64) -> bool {
    value <= min + ARGMIN_TOLERANCE * min.abs()
}

/// A minimal assignment found in one chunk: (index, scr, flags).
type Tie = (u64, f64, Vec<u32>);

/// Enumerates assignments lexicographically over (topological position, flag).
pub fn brute_force_min_capped(costed: &CostedDdg, cap: u64) -> Result<OracleResult, OracleError> {
    let n = costed.len();
    let radix = costed.providers() as u64 + 1;
    let total =
        strategy_count(n, costed.providers(), cap).ok_or(OracleError::InstanceTooLarge {
            datasets: n,
            providers_plus_one: radix,
            cap,
        })?;
    let order = costed.ddg().topological_order().to_vec();
    let chunks = total.div_ceil(CHUNK);

    let partials: Vec<(f64, Vec<Tie>)> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let lo = chunk * CHUNK;
            let hi = (lo + CHUNK).min(total);
            let mut walk = Walk::new(n);
            // digits[k] is the flag of the dataset at topological position k,
            // most significant first
            let mut digits = vec![0u32; n];
            let mut rest = lo;
            for k in (0..n).rev() {
                digits[k] = (rest % radix) as u32;
                rest /= radix;
            }
            let mut flags = vec![0u32; n];
            let mut best = f64::INFINITY;
            let mut ties: Vec<(u64, f64, Vec<u32>)> = Vec::new();
            for index in lo..hi {
                for (k, &d) in order.iter().enumerate() {
                    flags[d] = digits[k];
                }
                let value = scr_unchecked(costed, &flags, &mut walk).total;
                if value < best {
                    best = value;
                    ties.retain(|&(_, v, _)| within(v, best));
                }
                if within(value, best) {
                    ties.push((index, value, flags.clone()));
                }
                for k in (0..n).rev() {
                    digits[k] += 1;
                    if (digits[k] as u64) < radix {
                        break;
                    }
                    digits[k] = 0;
                }
            }
            (best, ties)
        })
        .collect();

    let min_scr = partials
        .iter()
        .map(|(b, _)| *b)
        .fold(f64::INFINITY, f64::min);
    let mut argmin: Vec<(u64, f64, Vec<u32>)> = partials
        .into_iter()
        .flat_map(|(_, ties)| ties)
        .filter(|&(_, v, _)| within(v, min_scr))
        .collect();
    argmin.sort_by_key(|&(i, _, _)| i);

    Ok(OracleResult {
        min_scr,
        argmin: argmin
            .into_iter()
            .map(|(_, _, f)| StorageStrategy::from_flags(f))
            .collect(),
        enumerated_count: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ddg::{scr, Dataset, Ddg};
    use crate::pricing::{derive_costs, ProviderCatalog};

    fn w1() -> CostedDdg {
        let ddg = Ddg::new(vec![
            Dataset::new("d1", 10.0, 10.0, 1.0),
            Dataset::new("d2", 20.0, 20.0, 1.0).with_predecessors(["d1"]),
            Dataset::new("d3", 30.0, 30.0, 1.0).with_predecessors(["d2"]),
        ])
        .unwrap();
        derive_costs(ddg, ProviderCatalog::s3_glacier())
    }

    #[test]
    fn worked_instance() {
        let r = brute_force_min(&w1()).unwrap();
        assert_eq!(r.enumerated_count, 27);
        assert!((r.min_scr - (0.3 + 0.6 + 0.9)).abs() < 1e-12);
        assert_eq!(r.argmin, vec![StorageStrategy::from_flags(vec![2, 2, 2])]);
    }

    #[test]
    fn single_dataset_two_choices() {
        let ddg = Ddg::new(vec![Dataset::new("a", 1.0, 50.0, 1.0)]).unwrap();
        let c = derive_costs(ddg, ProviderCatalog::s3_only());
        let r = brute_force_min(&c).unwrap();
        assert_eq!(r.enumerated_count, 2);
        assert_eq!(r.argmin, vec![StorageStrategy::from_flags(vec![1])]);
    }

    #[test]
    fn unused_data_ties_at_zero() {
        let ddg = Ddg::new(vec![
            Dataset::new("a", 1.0, 50.0, 0.0),
            Dataset::new("b", 1.0, 50.0, 0.0).with_predecessors(["a"]),
        ])
        .unwrap();
        let c = derive_costs(ddg, ProviderCatalog::s3_glacier());
        let r = brute_force_min(&c).unwrap();
        assert_eq!(r.min_scr, 0.0);
        assert_eq!(r.argmin[0], StorageStrategy::from_flags(vec![0, 0]));
    }

    #[test]
    fn refuses_oversized_instances() {
        let ds: Vec<Dataset> = (0..20)
            .map(|i| Dataset::new(format!("d{i}"), 1.0, 1.0, 1.0))
            .collect();
        let mut cat = ProviderCatalog::s3_two_services();
        cat.providers.push(crate::pricing::Provider::glacier());
        cat.providers.push(crate::pricing::Provider::haylix());
        let c = derive_costs(Ddg::new(ds).unwrap(), cat);
        assert!(matches!(
            brute_force_min(&c),
            Err(OracleError::InstanceTooLarge {
                providers_plus_one: 6,
                ..
            })
        ));
        assert_eq!(strategy_count(3, 2, 100), Some(27));
        assert_eq!(strategy_count(5, 2, 100), None);
    }

    #[test]
    fn argmin_members_evaluate_to_minimum() {
        let ddg = Ddg::new(vec![
            Dataset::new("a", 4.0, 30.0, 0.3),
            Dataset::new("b", 9.0, 12.0, 0.8).with_predecessors(["a"]),
            Dataset::new("c", 2.0, 70.0, 0.1).with_predecessors(["a"]),
            Dataset::new("d", 6.0, 44.0, 0.6).with_predecessors(["b", "c"]),
        ])
        .unwrap();
        let c = derive_costs(ddg, ProviderCatalog::s3_two_services());
        let r = brute_force_min(&c).unwrap();
        assert_eq!(r.enumerated_count, 256);
        for s in &r.argmin {
            let v = scr(&c, s).unwrap();
            assert!((v - r.min_scr).abs() <= 1e-9 * r.min_scr);
        }
    }
}
