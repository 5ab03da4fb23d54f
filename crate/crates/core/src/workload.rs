//! Random graph generation and the DDG file format.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ddg::{Dataset, DatasetId, Ddg, DdgError};
use crate::engine::DEFAULT_SEGMENT_SIZE;
use crate::pricing::{Provider, ProviderCatalog, DEFAULT_COMPUTE_PER_CPU_HOUR};

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("failed to parse DDG file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("failed to read {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Invalid(#[from] DdgError),
}

/// Knobs of the random workload. Ranges are inclusive `(low, high)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomParams {
    pub n_datasets: usize,
    pub size_gb: (f64, f64),
    pub gen_time_hours: (f64, f64),
    /// Accesses per month; the default spans once a year to once a month.
    pub uses_per_month: (f64, f64),
    pub seed: u64,
    pub segment_size: usize,
    /// Probability that a new dataset derives from a random earlier dataset
    /// instead of the previous one, giving that dataset another successor.
    pub branching: f64,
}

impl Default for RandomParams {
    fn default() -> Self {
        Self {
            n_datasets: 100,
            size_gb: (1.0, 100.0),
            gen_time_hours: (10.0, 100.0),
            uses_per_month: (1.0 / 12.0, 1.0),
            seed: 0,
            segment_size: DEFAULT_SEGMENT_SIZE,
            branching: 0.0,
        }
    }
}

impl RandomParams {
    pub fn new(n_datasets: usize, seed: u64) -> Self {
        Self {
            n_datasets,
            seed,
            ..Self::default()
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    assert!(lo <= hi, "range ({lo}, {hi}) is not ordered");
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// A random graph named `d1 … dn`. With `branching = 0` it is a single chain.
pub fn generate_random_ddg(params: &RandomParams) -> Ddg {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.n_datasets;
    let mut datasets: Vec<Dataset> = Vec::with_capacity(n);
    for i in 0..n {
        let size = uniform(&mut rng, params.size_gb);
        let hours = uniform(&mut rng, params.gen_time_hours);
        let v = uniform(&mut rng, params.uses_per_month);
        let mut d = Dataset::new(format!("d{}", i + 1), size, hours, v);
        if i > 0 {
            let pred = if i > 1 && params.branching > 0.0 && rng.gen_bool(params.branching.min(1.0))
            {
                rng.gen_range(0..i - 1)
            } else {
                i - 1
            };
            d.predecessors.push(datasets[pred].id.clone());
        }
        datasets.push(d);
    }
    Ddg::new(datasets).expect("generated graphs are valid")
}

/// Catalog with S3 at home and `m - 1` extra services whose storage price is
/// drawn from [0.01, 0.15] $/GB-month and transfer price from [0.01, 0.12] $/GB.
pub fn random_catalog(m: usize, seed: u64) -> ProviderCatalog {
    assert!(m >= 1, "a catalog needs at least one provider");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut providers = vec![Provider::s3()];
    for s in 2..=m {
        providers.push(Provider::new(
            format!("service-{s}"),
            rng.gen_range(0.01..=0.15),
            rng.gen_range(0.01..=0.12),
        ));
    }
    ProviderCatalog {
        compute_per_cpu_hour: DEFAULT_COMPUTE_PER_CPU_HOUR,
        providers,
    }
}

#[derive(Serialize, Deserialize)]
struct DdgFile {
    datasets: Vec<Dataset>,
}

pub fn load_ddg(text: &str) -> Result<Ddg, WorkloadError> {
    let file: DdgFile = serde_json::from_str(text)?;
    Ok(Ddg::new(file.datasets)?)
}

pub fn load_ddg_file(path: impl AsRef<Path>) -> Result<Ddg, WorkloadError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| WorkloadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_ddg(&text)
}

pub fn save_ddg(ddg: &Ddg) -> String {
    #[derive(Serialize)]
    struct Out<'a> {
        datasets: &'a [Dataset],
    }
    serde_json::to_string_pretty(&Out {
        datasets: ddg.datasets(),
    })
    .expect("DDG serializes")
}

/// Ids of a generated chain, handy for tests and fixtures.
pub fn chain_ids(n: usize) -> Vec<DatasetId> {
    (1..=n).map(|i| DatasetId::new(format!("d{i}"))).collect()
}
