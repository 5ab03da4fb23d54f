use std::io::Write;

use anyhow::Result;
use ddgstore::{daily_cost, CostBreakdown, CostedDdg, ProviderCatalog, StorageStrategy};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Serialize)]
pub struct Assignment {
    pub dataset: String,
    /// 0 = deleted, otherwise the 1-based provider index.
    pub provider: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provider_name: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StrategyRow {
    pub strategy: String,
    pub scr_per_month: f64,
    pub daily_cost: f64,
    pub computation: f64,
    pub storage: f64,
    pub bandwidth: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub assignment: Vec<Assignment>,
}

impl StrategyRow {
    pub fn new(name: &str, b: CostBreakdown) -> Self {
        Self {
            strategy: name.to_owned(),
            scr_per_month: b.total,
            daily_cost: daily_cost(b.total),
            computation: b.computation,
            storage: b.storage,
            bandwidth: b.bandwidth,
            assignment: Vec::new(),
        }
    }

    pub fn with_assignment(mut self, costed: &CostedDdg, strategy: &StorageStrategy) -> Self {
        let catalog = costed.catalog();
        self.assignment = costed
            .ddg()
            .datasets()
            .iter()
            .zip(strategy.flags())
            .map(|(d, &f)| Assignment {
                dataset: d.id.to_string(),
                provider: f,
                provider_name: (f > 0).then(|| catalog.providers[f as usize - 1].name.clone()),
            })
            .collect();
        self
    }

    /// Component-wise mean of several rows sharing a strategy name.
    pub fn mean(name: &str, rows: &[StrategyRow]) -> Self {
        let k = rows.len().max(1) as f64;
        let avg = |f: fn(&StrategyRow) -> f64| rows.iter().map(f).sum::<f64>() / k;
        Self {
            strategy: name.to_owned(),
            scr_per_month: avg(|r| r.scr_per_month),
            daily_cost: avg(|r| r.daily_cost),
            computation: avg(|r| r.computation),
            storage: avg(|r| r.storage),
            bandwidth: avg(|r| r.bandwidth),
            assignment: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRow {
    pub run: usize,
    pub seed: u64,
    /// SCR per strategy, in report row order.
    pub scr_per_month: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub datasets: usize,
    pub segment_size: usize,
    pub catalog: ProviderCatalog,
    /// Wall-clock seconds of each optimisation call, when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimize_seconds: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CostReport {
    pub strategies: Vec<StrategyRow>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub runs: Vec<RunRow>,
    pub metadata: Metadata,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    strategy: &'a str,
    scr_per_month: f64,
    daily_cost: f64,
    computation: f64,
    storage: f64,
    bandwidth: f64,
}

impl CostReport {
    pub fn write(&self, format: Format, out: impl Write) -> Result<()> {
        match format {
            Format::Json => {
                let mut out = out;
                serde_json::to_writer_pretty(&mut out, self)?;
                writeln!(out)?;
            }
            Format::Csv => {
                let mut w = csv::Writer::from_writer(out);
                for r in &self.strategies {
                    w.serialize(CsvRow {
                        strategy: &r.strategy,
                        scr_per_month: r.scr_per_month,
                        daily_cost: r.daily_cost,
                        computation: r.computation,
                        storage: r.storage,
                        bandwidth: r.bandwidth,
                    })?;
                }
                w.flush()?;
            }
        }
        Ok(())
    }
}
