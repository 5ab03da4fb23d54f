//! Data dependency graphs and the storage cost model.
//!
//! A [`Ddg`] records which generated datasets were produced from which. Any
//! dataset may be deleted and later regenerated from its nearest stored
//! ancestors, so the monthly cost of a [`StorageStrategy`] trades storage
//! and outbound transfer charges against recomputation.
//!
//! Regeneration that reaches a dataset without stored ancestors bottoms out
//! at the application's original input, which behaves like an always-stored
//! source at the home provider with zero generation and transfer cost.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pricing::CostedDdg;

/// Storage flag of a deleted dataset.
pub const DELETED: u32 = 0;
/// Storage flag of the home provider, where the application computes.
pub const HOME: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DatasetId(String);

impl DatasetId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for DatasetId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

/// A generated dataset and the statistics the cost model needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub id: DatasetId,
    pub size_gb: f64,
    /// CPU hours to produce the dataset from its direct predecessors.
    pub gen_time_hours: f64,
    pub uses_per_month: f64,
    #[serde(default)]
    pub predecessors: Vec<DatasetId>,
}

impl Dataset {
    pub fn new(
        id: impl Into<String>,
        size_gb: f64,
        gen_time_hours: f64,
        uses_per_month: f64,
    ) -> Self {
        Self {
            id: DatasetId::new(id),
            size_gb,
            gen_time_hours,
            uses_per_month,
            predecessors: Vec::new(),
        }
    }

    pub fn with_predecessors<I, S>(mut self, preds: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.predecessors = preds.into_iter().map(|p| DatasetId::new(p)).collect();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DdgError {
    #[error("duplicate dataset id `{0}`")]
    DuplicateId(DatasetId),
    #[error("dependency cycle: {}", format_cycle(.cycle))]
    CycleDetected { cycle: Vec<DatasetId> },
    #[error("dataset `{dataset}` lists unknown predecessor `{predecessor}`")]
    DanglingPredecessor {
        dataset: DatasetId,
        predecessor: DatasetId,
    },
    #[error("dataset `{0}` lists itself as a predecessor")]
    SelfReference(DatasetId),
    #[error("dataset `{0}` must have a positive size")]
    NonPositiveSize(DatasetId),
    #[error("dataset `{0}` has a negative or non-finite generation time")]
    InvalidGenTime(DatasetId),
    #[error("dataset `{0}` has a negative or non-finite usage frequency")]
    InvalidUsage(DatasetId),
    #[error("unknown dataset `{0}`")]
    UnknownDataset(DatasetId),
    #[error("strategy covers {got} datasets, graph has {expected}")]
    StrategyLength { expected: usize, got: usize },
    #[error("strategy assigns dataset `{dataset}` to provider {flag}, catalog has {providers}")]
    ProviderOutOfRange {
        dataset: DatasetId,
        flag: u32,
        providers: usize,
    },
}

fn format_cycle(cycle: &[DatasetId]) -> String {
    let mut parts: Vec<&str> = cycle.iter().map(DatasetId::as_str).collect();
    if let Some(first) = cycle.first() {
        parts.push(first.as_str());
    }
    parts.join(" -> ")
}

/// Checks that `datasets` form a well-formed dependency graph.
pub fn validate(datasets: &[Dataset]) -> Result<(), DdgError> {
    Ddg::new(datasets.to_vec()).map(|_| ())
}

/// A validated, acyclic data dependency graph.
///
/// Datasets keep their declaration order; internal indices refer to that order.
#[derive(Debug, Clone, PartialEq)]
pub struct Ddg {
    datasets: Vec<Dataset>,
    index: HashMap<DatasetId, usize>,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
    topo: Vec<usize>,
    topo_pos: Vec<usize>,
}

impl Ddg {
    pub fn new(datasets: Vec<Dataset>) -> Result<Self, DdgError> {
        let mut index = HashMap::with_capacity(datasets.len());
        for (i, d) in datasets.iter().enumerate() {
            if index.insert(d.id.clone(), i).is_some() {
                return Err(DdgError::DuplicateId(d.id.clone()));
            }
        }
        for d in &datasets {
            if !d.size_gb.is_finite() || d.size_gb <= 0.0 {
                return Err(DdgError::NonPositiveSize(d.id.clone()));
            }
            if !d.gen_time_hours.is_finite() || d.gen_time_hours < 0.0 {
                return Err(DdgError::InvalidGenTime(d.id.clone()));
            }
            if !d.uses_per_month.is_finite() || d.uses_per_month < 0.0 {
                return Err(DdgError::InvalidUsage(d.id.clone()));
            }
        }

        let n = datasets.len();
        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        for (i, d) in datasets.iter().enumerate() {
            for p in &d.predecessors {
                if *p == d.id {
                    return Err(DdgError::SelfReference(d.id.clone()));
                }
                let j = *index.get(p).ok_or_else(|| DdgError::DanglingPredecessor {
                    dataset: d.id.clone(),
                    predecessor: p.clone(),
                })?;
                // repeated predecessor entries describe the same edge
                if !preds[i].contains(&j) {
                    preds[i].push(j);
                    succs[j].push(i);
                }
            }
        }

        // Kahn's algorithm, lowest declaration index first.
        let mut indegree: Vec<usize> = preds.iter().map(Vec::len).collect();
        let mut ready: BinaryHeap<Reverse<usize>> = indegree
            .iter()
            .enumerate()
            .filter(|(_, &deg)| deg == 0)
            .map(|(i, _)| Reverse(i))
            .collect();
        let mut topo = Vec::with_capacity(n);
        while let Some(Reverse(i)) = ready.pop() {
            topo.push(i);
            for &s in &succs[i] {
                indegree[s] -= 1;
                if indegree[s] == 0 {
                    ready.push(Reverse(s));
                }
            }
        }
        if topo.len() < n {
            let cycle = find_cycle(&preds, &indegree);
            return Err(DdgError::CycleDetected {
                cycle: cycle.into_iter().map(|i| datasets[i].id.clone()).collect(),
            });
        }

        let mut topo_pos = vec![0; n];
        for (pos, &i) in topo.iter().enumerate() {
            topo_pos[i] = pos;
        }
        Ok(Self {
            datasets,
            index,
            preds,
            succs,
            topo,
            topo_pos,
        })
    }

    pub fn len(&self) -> usize {
        self.datasets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.datasets.is_empty()
    }

    pub fn datasets(&self) -> &[Dataset] {
        &self.datasets
    }

    pub fn dataset(&self, idx: usize) -> &Dataset {
        &self.datasets[idx]
    }

    pub fn index_of(&self, id: &DatasetId) -> Result<usize, DdgError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| DdgError::UnknownDataset(id.clone()))
    }

    pub fn predecessors(&self, idx: usize) -> &[usize] {
        &self.preds[idx]
    }

    pub fn successors(&self, idx: usize) -> &[usize] {
        &self.succs[idx]
    }

    /// Dataset indices in a topological order (ties broken by declaration order).
    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn topological_position(&self, idx: usize) -> usize {
        self.topo_pos[idx]
    }

    /// True when `from → to` holds, i.e. `to` is derived (transitively) from `from`.
    pub fn derives(&self, from: usize, to: usize) -> bool {
        if from == to || self.topo_pos[from] > self.topo_pos[to] {
            return false;
        }
        let mut seen = vec![false; self.len()];
        let mut stack = vec![to];
        while let Some(i) = stack.pop() {
            for &p in &self.preds[i] {
                if p == from {
                    return true;
                }
                if !seen[p] && self.topo_pos[p] > self.topo_pos[from] {
                    seen[p] = true;
                    stack.push(p);
                }
            }
        }
        false
    }

    /// True when every dataset has at most one direct predecessor and successor.
    pub fn is_linear(&self) -> bool {
        self.preds.iter().all(|p| p.len() <= 1) && self.succs.iter().all(|s| s.len() <= 1)
    }

    pub fn into_datasets(self) -> Vec<Dataset> {
        self.datasets
    }
}

/// Walks predecessor links among the nodes Kahn's algorithm could not order.
fn find_cycle(preds: &[Vec<usize>], indegree: &[usize]) -> Vec<usize> {
    let stuck: Vec<bool> = indegree.iter().map(|&d| d > 0).collect();
    let start = stuck.iter().position(|&s| s).expect("cycle exists");
    let mut order = Vec::new();
    let mut seen_at = HashMap::new();
    let mut cur = start;
    loop {
        if let Some(&pos) = seen_at.get(&cur) {
            let mut cycle: Vec<usize> = order[pos..].to_vec();
            // predecessor walk runs against edge direction
            cycle.reverse();
            return cycle;
        }
        seen_at.insert(cur, order.len());
        order.push(cur);
        cur = *preds[cur]
            .iter()
            .find(|&&p| stuck[p])
            .expect("a stuck node always has a stuck predecessor");
    }
}

/// The assignment `F = {f_i}`: `0` deletes a dataset, `s ≥ 1` stores it at provider `s`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StorageStrategy {
    flags: Vec<u32>,
}

impl StorageStrategy {
    pub fn from_flags(flags: Vec<u32>) -> Self {
        Self { flags }
    }

    pub fn uniform(n: usize, flag: u32) -> Self {
        Self {
            flags: vec![flag; n],
        }
    }

    pub fn flags(&self) -> &[u32] {
        &self.flags
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn get(&self, idx: usize) -> u32 {
        self.flags[idx]
    }

    pub fn set(&mut self, idx: usize, flag: u32) {
        self.flags[idx] = flag;
    }

    pub fn is_stored(&self, idx: usize) -> bool {
        self.flags[idx] != DELETED
    }

    pub fn stored_count(&self) -> usize {
        self.flags.iter().filter(|&&f| f != DELETED).count()
    }

    pub(crate) fn push(&mut self, flag: u32) {
        self.flags.push(flag);
    }

    /// Checks the strategy against a graph and a catalog of `providers` services.
    pub fn check(&self, ddg: &Ddg, providers: usize) -> Result<(), DdgError> {
        if self.flags.len() != ddg.len() {
            return Err(DdgError::StrategyLength {
                expected: ddg.len(),
                got: self.flags.len(),
            });
        }
        for (i, &f) in self.flags.iter().enumerate() {
            if f as usize > providers {
                return Err(DdgError::ProviderOutOfRange {
                    dataset: ddg.dataset(i).id.clone(),
                    flag: f,
                    providers,
                });
            }
        }
        Ok(())
    }
}

/// Where a regeneration fetches a stored ancestor from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProvSource {
    /// The application's original input data.
    Input,
    Stored {
        dataset: DatasetId,
        provider: u32,
    },
}

/// Regeneration cost of one dataset, split into its two charges.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GenCost {
    pub computation: f64,
    pub transfer: f64,
}

impl GenCost {
    pub fn total(&self) -> f64 {
        self.transfer + self.computation
    }
}

/// SCR and its split into the three resource types.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub total: f64,
    pub computation: f64,
    pub storage: f64,
    pub bandwidth: f64,
}

/// Reusable buffers for the backward regeneration walk.
#[derive(Debug, Default)]
pub(crate) struct Walk {
    mark: Vec<u32>,
    epoch: u32,
    stack: Vec<usize>,
}

impl Walk {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            mark: vec![0; n],
            epoch: 0,
            stack: Vec::new(),
        }
    }

    fn reset(&mut self, n: usize) {
        if self.mark.len() < n {
            self.mark.resize(n, 0);
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.mark.iter_mut().for_each(|m| *m = 0);
            self.epoch = 1;
        }
        self.stack.clear();
    }

    /// Regeneration cost of `target` under `flags`, reporting each provenance
    /// source to `on_source`. Only ancestors of `target` are inspected.
    pub(crate) fn gen_cost(
        &mut self,
        costed: &CostedDdg,
        flags: &[u32],
        target: usize,
        mut on_source: impl FnMut(Option<(usize, u32)>),
    ) -> GenCost {
        let ddg = costed.ddg();
        self.reset(ddg.len());
        let mut cost = GenCost {
            computation: costed.x(target),
            transfer: 0.0,
        };
        self.mark[target] = self.epoch;
        self.stack.push(target);
        while let Some(i) = self.stack.pop() {
            let preds = ddg.predecessors(i);
            if preds.is_empty() {
                on_source(None);
                continue;
            }
            for &p in preds {
                if self.mark[p] == self.epoch {
                    continue;
                }
                self.mark[p] = self.epoch;
                match flags[p] {
                    DELETED => {
                        cost.computation += costed.x(p);
                        self.stack.push(p);
                    }
                    s => {
                        cost.transfer += costed.z(p, s);
                        on_source(Some((p, s)));
                    }
                }
            }
        }
        cost
    }
}

fn checked_target(
    costed: &CostedDdg,
    strategy: &StorageStrategy,
    target: &DatasetId,
) -> Result<usize, DdgError> {
    strategy.check(costed.ddg(), costed.providers())?;
    costed.ddg().index_of(target)
}

/// Nearest stored predecessors of `target`: the provenance a regeneration would fetch.
pub fn prov_set(
    costed: &CostedDdg,
    strategy: &StorageStrategy,
    target: &DatasetId,
) -> Result<BTreeSet<ProvSource>, DdgError> {
    let t = checked_target(costed, strategy, target)?;
    let ddg = costed.ddg();
    let mut set = BTreeSet::new();
    Walk::new(ddg.len()).gen_cost(costed, strategy.flags(), t, |src| {
        set.insert(match src {
            None => ProvSource::Input,
            Some((p, s)) => ProvSource::Stored {
                dataset: ddg.dataset(p).id.clone(),
                provider: s,
            },
        });
    });
    Ok(set)
}

/// Dollars to regenerate `target`: transfer of its provenance to the home
/// provider plus recomputation of every deleted dataset in between and itself.
pub fn gen_cost(
    costed: &CostedDdg,
    strategy: &StorageStrategy,
    target: &DatasetId,
) -> Result<f64, DdgError> {
    let t = checked_target(costed, strategy, target)?;
    Ok(Walk::new(costed.len())
        .gen_cost(costed, strategy.flags(), t, |_| {})
        .total())
}

/// Monthly cost of `target` under `strategy`.
pub fn cost_rate(
    costed: &CostedDdg,
    strategy: &StorageStrategy,
    target: &DatasetId,
) -> Result<f64, DdgError> {
    let t = checked_target(costed, strategy, target)?;
    let mut walk = Walk::new(costed.len());
    Ok(rate_breakdown(costed, strategy.flags(), t, &mut walk).total)
}

pub(crate) fn rate_breakdown(
    costed: &CostedDdg,
    flags: &[u32],
    idx: usize,
    walk: &mut Walk,
) -> CostBreakdown {
    let v = costed.v(idx);
    match flags[idx] {
        DELETED => {
            let g = walk.gen_cost(costed, flags, idx, |_| {});
            let computation = g.computation * v;
            let bandwidth = g.transfer * v;
            CostBreakdown {
                total: g.total() * v,
                computation,
                storage: 0.0,
                bandwidth,
            }
        }
        s => {
            let bandwidth = costed.z(idx, s) * v;
            let storage = costed.y(idx, s);
            CostBreakdown {
                total: bandwidth + storage,
                computation: 0.0,
                storage,
                bandwidth,
            }
        }
    }
}

/// Sum of cost rates over the whole graph.
pub fn scr(costed: &CostedDdg, strategy: &StorageStrategy) -> Result<f64, DdgError> {
    scr_breakdown(costed, strategy).map(|b| b.total)
}

pub fn scr_breakdown(
    costed: &CostedDdg,
    strategy: &StorageStrategy,
) -> Result<CostBreakdown, DdgError> {
    strategy.check(costed.ddg(), costed.providers())?;
    let mut walk = Walk::new(costed.len());
    Ok(scr_unchecked(costed, strategy.flags(), &mut walk))
}

pub(crate) fn scr_unchecked(costed: &CostedDdg, flags: &[u32], walk: &mut Walk) -> CostBreakdown {
    let mut acc = CostBreakdown::default();
    for i in 0..costed.len() {
        let b = rate_breakdown(costed, flags, i, walk);
        acc.total += b.total;
        acc.computation += b.computation;
        acc.storage += b.storage;
        acc.bandwidth += b.bandwidth;
    }
    acc
}

/// Sum of the cost rates of the datasets at indices `members`.
pub fn subset_scr(
    costed: &CostedDdg,
    strategy: &StorageStrategy,
    members: &[usize],
) -> Result<f64, DdgError> {
    strategy.check(costed.ddg(), costed.providers())?;
    Ok(partial_scr(costed, strategy.flags(), members))
}

pub(crate) fn partial_scr(costed: &CostedDdg, flags: &[u32], members: &[usize]) -> f64 {
    let mut walk = Walk::new(costed.len());
    members
        .iter()
        .map(|&i| rate_breakdown(costed, flags, i, &mut walk).total)
        .sum()
}
