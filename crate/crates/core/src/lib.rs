//! Cost-minimising storage strategies for graphs of regenerable datasets
//! spread over several cloud storage services.
//!
//! * [`ddg`]: dependency graphs and the monthly cost model.
//! * [`pricing`]: provider catalogs and per-dataset cost attributes.
//! * [`tcsb`]: exact shortest-path optimisation of one linear chain.
//! * [`engine`]: partitioned strategy for general graphs, runtime events, baselines.
//! * [`oracle`]: exhaustive ground truth for small instances.
//! * [`workload`]: random graphs and the DDG file format.

pub mod ddg;
pub mod engine;
pub mod oracle;
pub mod pricing;
pub mod tcsb;
pub mod workload;

pub use ddg::{
    cost_rate, gen_cost, prov_set, scr, scr_breakdown, subset_scr, validate, CostBreakdown,
    Dataset, DatasetId, Ddg, DdgError, ProvSource, StorageStrategy, DELETED, HOME,
};
pub use engine::{
    baseline, baseline_with, optimize, optimize_with, partition, Baseline, EngineError,
    LinearSegment, PartitionResult, StrategyKind, StrategyState, DEFAULT_SEGMENT_SIZE,
};
pub use oracle::{brute_force_min, brute_force_min_capped, OracleError, OracleResult};
pub use pricing::{derive_costs, CostedDdg, PricingError, Provider, ProviderCatalog};
pub use tcsb::{build_ctg, optimize_segment, Ctg, CtgVertex, Segment, SegmentSolution, TcsbError};
pub use workload::{
    generate_random_ddg, load_ddg, load_ddg_file, random_catalog, save_ddg, RandomParams,
    WorkloadError,
};

/// Days per month used to turn monthly cost rates into daily costs.
pub const DAYS_PER_MONTH: f64 = 365.0 / 12.0;

/// Average daily cost of a monthly rate: `scr × 12 / 365`.
pub fn daily_cost(per_month: f64) -> f64 {
    per_month * 12.0 / 365.0
}
