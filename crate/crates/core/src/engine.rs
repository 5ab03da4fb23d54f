//! Storage strategies for general graphs.
//!
//! A graph is cut at its join and split datasets (partition points) into
//! linear segments. Units are decided in topological order: a partition point
//! by comparing its own deleted and stored cost rates, a segment by the exact
//! CTG search with everything upstream already fixed. Runtime events only
//! revisit the units they touch.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::ddg::{
    partial_scr, scr_unchecked, CostBreakdown, Dataset, DatasetId, Ddg, DdgError, StorageStrategy,
    Walk, DELETED, HOME,
};
use crate::pricing::{derive_costs, CostedDdg};
use crate::tcsb::Segment;

/// Longest chain handed to the CTG search in one piece.
pub const DEFAULT_SEGMENT_SIZE: usize = 50;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Ddg(#[from] DdgError),
    #[error("invalid attachment: {0}")]
    InvalidAttachment(String),
    #[error("usage frequency must be finite and non-negative, got {0}")]
    InvalidUsage(f64),
}

/// A chain of datasets solved as one unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearSegment {
    /// Dataset indices, head first.
    pub datasets: Vec<usize>,
    /// Direct predecessor of the head, if any. It belongs to another unit.
    pub boundary: Option<usize>,
}

impl LinearSegment {
    pub fn head(&self) -> usize {
        self.datasets[0]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PartitionResult {
    /// Ordered by the topological position of their heads.
    pub segments: Vec<LinearSegment>,
    /// Datasets with several direct predecessors or successors, in topological order.
    pub partition_points: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Segment(usize),
    Point(usize),
}

impl PartitionResult {
    /// The unit that owns dataset `idx`.
    pub fn unit_of(&self, idx: usize) -> Option<Unit> {
        if self.partition_points.contains(&idx) {
            return Some(Unit::Point(idx));
        }
        self.segments
            .iter()
            .position(|s| s.datasets.contains(&idx))
            .map(Unit::Segment)
    }

    pub fn unit_members(&self, unit: Unit) -> &[usize] {
        match unit {
            Unit::Segment(s) => &self.segments[s].datasets,
            Unit::Point(p) => {
                let i = self
                    .partition_points
                    .iter()
                    .position(|&q| q == p)
                    .expect("known partition point");
                std::slice::from_ref(&self.partition_points[i])
            }
        }
    }

    fn sort(&mut self, ddg: &Ddg) {
        self.segments
            .sort_by_key(|s| ddg.topological_position(s.head()));
        self.partition_points
            .sort_by_key(|&p| ddg.topological_position(p));
    }

    /// All units in an order where every unit follows the units it derives from.
    pub fn units(&self, ddg: &Ddg) -> Vec<Unit> {
        let mut units: Vec<(usize, Unit)> = self
            .segments
            .iter()
            .enumerate()
            .map(|(i, s)| (ddg.topological_position(s.head()), Unit::Segment(i)))
            .chain(
                self.partition_points
                    .iter()
                    .map(|&p| (ddg.topological_position(p), Unit::Point(p))),
            )
            .collect();
        units.sort_by_key(|&(pos, _)| pos);
        units.into_iter().map(|(_, u)| u).collect()
    }
}

fn is_partition_point(ddg: &Ddg, i: usize) -> bool {
    ddg.predecessors(i).len() > 1 || ddg.successors(i).len() > 1
}

fn push_chunks(
    segments: &mut Vec<LinearSegment>,
    chain: &[usize],
    boundary: Option<usize>,
    segment_size: usize,
) {
    let size = if segment_size == 0 {
        usize::MAX
    } else {
        segment_size
    };
    let mut boundary = boundary;
    for chunk in chain.chunks(size.min(chain.len().max(1))) {
        segments.push(LinearSegment {
            datasets: chunk.to_vec(),
            boundary,
        });
        boundary = chunk.last().copied();
    }
}

/// Splits `ddg` at its partition points into maximal linear chains, cutting
/// chains longer than `segment_size` (0 = unlimited) into consecutive pieces.
pub fn partition(ddg: &Ddg, segment_size: usize) -> PartitionResult {
    let mut result = PartitionResult::default();
    let mut assigned = vec![false; ddg.len()];
    for &i in ddg.topological_order() {
        if is_partition_point(ddg, i) {
            result.partition_points.push(i);
            continue;
        }
        if assigned[i] {
            continue;
        }
        let mut chain = vec![i];
        let mut cur = i;
        while let [next] = ddg.successors(cur) {
            if is_partition_point(ddg, *next) {
                break;
            }
            chain.push(*next);
            cur = *next;
        }
        for &d in &chain {
            assigned[d] = true;
        }
        let boundary = ddg.predecessors(i).first().copied();
        push_chunks(&mut result.segments, &chain, boundary, segment_size);
    }
    result.sort(ddg);
    result
}

/// The four comparison strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Baseline {
    StoreAll,
    StoreNone,
    /// One topological sweep storing a dataset at home when regenerating
    /// it would cost more per month than keeping it.
    CostRateBased,
    /// The partitioned optimizer restricted to the home provider.
    LocalOptSingle,
}

/// Every strategy the tooling can evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrategyKind {
    Baseline(Baseline),
    Tcsb,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::Baseline(Baseline::StoreAll),
        StrategyKind::Baseline(Baseline::StoreNone),
        StrategyKind::Baseline(Baseline::CostRateBased),
        StrategyKind::Baseline(Baseline::LocalOptSingle),
        StrategyKind::Tcsb,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::Baseline(Baseline::StoreAll) => "all",
            StrategyKind::Baseline(Baseline::StoreNone) => "none",
            StrategyKind::Baseline(Baseline::CostRateBased) => "cost-rate",
            StrategyKind::Baseline(Baseline::LocalOptSingle) => "local-opt",
            StrategyKind::Tcsb => "tcsb",
        }
    }

    /// Storage assignment this strategy picks for `costed`.
    pub fn run(&self, costed: &CostedDdg, segment_size: usize) -> StorageStrategy {
        match *self {
            StrategyKind::Baseline(b) => baseline_with(costed, b, segment_size).0,
            StrategyKind::Tcsb => optimize_with(costed.clone(), segment_size).strategy,
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                format!("unknown strategy `{s}` (expected all, none, cost-rate, local-opt or tcsb)")
            })
    }
}

pub fn baseline(costed: &CostedDdg, kind: Baseline) -> (StorageStrategy, f64) {
    baseline_with(costed, kind, DEFAULT_SEGMENT_SIZE)
}

pub fn baseline_with(
    costed: &CostedDdg,
    kind: Baseline,
    segment_size: usize,
) -> (StorageStrategy, f64) {
    let n = costed.len();
    let strategy = match kind {
        Baseline::StoreAll => StorageStrategy::uniform(n, HOME),
        Baseline::StoreNone => StorageStrategy::uniform(n, DELETED),
        Baseline::CostRateBased => {
            let mut flags = vec![DELETED; n];
            let mut walk = Walk::new(n);
            for &i in costed.ddg().topological_order() {
                let regen = walk.gen_cost(costed, &flags, i, |_| {}).total() * costed.v(i);
                if regen > costed.y(i, HOME) {
                    flags[i] = HOME;
                }
            }
            StorageStrategy::from_flags(flags)
        }
        Baseline::LocalOptSingle => optimize_with(costed.home_only(), segment_size).strategy,
    };
    let total = scr_unchecked(costed, strategy.flags(), &mut Walk::new(n)).total;
    (strategy, total)
}

/// A graph, its current strategy, and the partition the strategy was built on.
///
/// Event handlers mutate the state in place; callers serialise events.
#[derive(Debug, Clone)]
pub struct StrategyState {
    costed: CostedDdg,
    strategy: StorageStrategy,
    partition: PartitionResult,
    segment_size: usize,
}

pub fn optimize(costed: CostedDdg) -> StrategyState {
    optimize_with(costed, DEFAULT_SEGMENT_SIZE)
}

/// Solves every unit in topological order, then keeps the cheapest of that
/// result and the same procedure run on each provider prefix of the catalog.
///
/// Units are decided one after another, so a cheaper service picked for one
/// unit can raise the cost of the units downstream of it. Every prefix
/// strategy is also valid for the full catalog at the same cost, which makes
/// the result never worse than the home-only run and never worse after a
/// provider is appended.
pub fn optimize_with(costed: CostedDdg, segment_size: usize) -> StrategyState {
    let partition = partition(costed.ddg(), segment_size);
    let units = partition.units(costed.ddg());
    let m = costed.providers();
    let candidates: Vec<(f64, StorageStrategy)> = (1..m)
        .into_par_iter()
        .map(|k| {
            let strategy = solve_units(costed.prefix(k), &partition, &units, segment_size);
            let total =
                scr_unchecked(&costed, strategy.flags(), &mut Walk::new(costed.len())).total;
            (total, strategy)
        })
        .collect();

    let strategy = solve_units(costed.clone(), &partition, &units, segment_size);
    let mut best = scr_unchecked(&costed, strategy.flags(), &mut Walk::new(costed.len())).total;
    let mut state = StrategyState {
        costed,
        strategy,
        partition,
        segment_size,
    };
    for (total, strategy) in candidates {
        if total < best {
            best = total;
            state.strategy = strategy;
        }
    }
    state
}

fn solve_units(
    costed: CostedDdg,
    partition: &PartitionResult,
    units: &[Unit],
    segment_size: usize,
) -> StorageStrategy {
    let mut state = StrategyState {
        strategy: StorageStrategy::uniform(costed.len(), DELETED),
        costed,
        partition: partition.clone(),
        segment_size,
    };
    for &unit in units {
        state.solve(unit);
    }
    state.strategy
}

impl StrategyState {
    pub fn costed(&self) -> &CostedDdg {
        &self.costed
    }

    pub fn strategy(&self) -> &StorageStrategy {
        &self.strategy
    }

    pub fn partition(&self) -> &PartitionResult {
        &self.partition
    }

    pub fn segment_size(&self) -> usize {
        self.segment_size
    }

    pub fn scr(&self) -> f64 {
        self.breakdown().total
    }

    pub fn breakdown(&self) -> CostBreakdown {
        scr_unchecked(
            &self.costed,
            self.strategy.flags(),
            &mut Walk::new(self.costed.len()),
        )
    }

    /// Sum of the cost rates of one unit's datasets.
    pub fn unit_scr(&self, unit: Unit) -> f64 {
        partial_scr(
            &self.costed,
            self.strategy.flags(),
            self.partition.unit_members(unit),
        )
    }

    /// Cost of obtaining the head's direct predecessor at home under the
    /// current strategy.
    fn boundary_cost(&self, head: usize) -> f64 {
        let c = &self.costed;
        match c.ddg().predecessors(head) {
            [] => 0.0,
            [p] => match self.strategy.get(*p) {
                DELETED => Walk::new(c.len())
                    .gen_cost(c, self.strategy.flags(), *p, |_| {})
                    .total(),
                s => c.z(*p, s),
            },
            _ => unreachable!("segment heads have at most one predecessor"),
        }
    }

    fn solve(&mut self, unit: Unit) {
        match unit {
            Unit::Segment(s) => {
                let seg = &self.partition.segments[s];
                let base = self.boundary_cost(seg.head());
                let solution = Segment::from_chain(&self.costed, seg.datasets.clone(), base)
                    .expect("partition yields linear chains")
                    .optimize();
                solution.apply_to(&mut self.strategy);
            }
            Unit::Point(p) => {
                let flag = self.decide_point(p);
                self.strategy.set(p, flag);
            }
        }
    }

    /// Cheapest single-dataset choice for `p` given its decided ancestors.
    /// Ties go to deletion, then to the lowest provider.
    fn decide_point(&self, p: usize) -> u32 {
        let c = &self.costed;
        let v = c.v(p);
        let regen = Walk::new(c.len())
            .gen_cost(c, self.strategy.flags(), p, |_| {})
            .total();
        let mut best = (regen * v, DELETED);
        for s in HOME..=c.providers() as u32 {
            let rate = c.z(p, s) * v + c.y(p, s);
            if rate < best.0 {
                best = (rate, s);
            }
        }
        best.1
    }

    /// Updates the usage frequency of `id` and re-decides the unit holding it.
    /// Returns the re-decided dataset indices.
    pub fn on_frequency_change(
        &mut self,
        id: &DatasetId,
        uses_per_month: f64,
    ) -> Result<Vec<usize>, EngineError> {
        let idx = self.costed.ddg().index_of(id)?;
        if !uses_per_month.is_finite() || uses_per_month < 0.0 {
            return Err(EngineError::InvalidUsage(uses_per_month));
        }
        if self.costed.v(idx) == uses_per_month {
            return Ok(Vec::new());
        }
        let (ddg, catalog) = self.costed.clone().into_parts();
        let mut datasets = ddg.into_datasets();
        datasets[idx].uses_per_month = uses_per_month;
        self.costed = derive_costs(Ddg::new(datasets)?, catalog);

        let unit = self
            .partition
            .unit_of(idx)
            .expect("every dataset belongs to a unit");
        self.solve(unit);
        Ok(self.partition.unit_members(unit).to_vec())
    }

    /// Appends a chain of newly generated datasets. The chain's head must
    /// derive from existing datasets and each later member from its
    /// predecessor in the chain. Only the new datasets and any segment split
    /// by the attachment are decided; the rest keeps its assignment.
    /// Returns the re-decided dataset indices.
    pub fn on_new_datasets(&mut self, chain: Vec<Dataset>) -> Result<Vec<usize>, EngineError> {
        let Some(head) = chain.first() else {
            return Ok(Vec::new());
        };
        let old = self.costed.ddg();
        if head.predecessors.is_empty() {
            return Err(EngineError::InvalidAttachment(format!(
                "`{}` does not derive from any existing dataset",
                head.id
            )));
        }
        let mut attach = Vec::with_capacity(head.predecessors.len());
        for p in &head.predecessors {
            let i = old.index_of(p).map_err(|_| {
                EngineError::InvalidAttachment(format!(
                    "`{}` derives from unknown dataset `{p}`",
                    head.id
                ))
            })?;
            if !attach.contains(&i) {
                attach.push(i);
            }
        }
        for w in chain.windows(2) {
            if w[1].predecessors != [w[0].id.clone()] {
                return Err(EngineError::InvalidAttachment(format!(
                    "`{}` must derive only from `{}`",
                    w[1].id, w[0].id
                )));
            }
        }

        let first_new = old.len();
        let (ddg, catalog) = self.costed.clone().into_parts();
        let mut datasets = ddg.into_datasets();
        datasets.extend(chain);
        let ddg = Ddg::new(datasets)?;
        let new_ids: Vec<usize> = (first_new..ddg.len()).collect();
        for _ in &new_ids {
            self.strategy.push(DELETED);
        }

        let mut dirty: Vec<usize> = new_ids.clone();
        for &p in &attach {
            if self.partition.partition_points.contains(&p) || ddg.successors(p).len() < 2 {
                continue;
            }
            // p gained a second successor: split its segment around it
            let Some(Unit::Segment(s)) = self.partition.unit_of(p) else {
                unreachable!("non-point datasets live in segments");
            };
            let seg = self.partition.segments.remove(s);
            let at = seg.datasets.iter().position(|&d| d == p).expect("member");
            let (before, after) = (&seg.datasets[..at], &seg.datasets[at + 1..]);
            if !before.is_empty() {
                self.partition.segments.push(LinearSegment {
                    datasets: before.to_vec(),
                    boundary: seg.boundary,
                });
            }
            if !after.is_empty() {
                self.partition.segments.push(LinearSegment {
                    datasets: after.to_vec(),
                    boundary: Some(p),
                });
            }
            self.partition.partition_points.push(p);
            dirty.extend_from_slice(&seg.datasets);
        }

        let head_idx = first_new;
        let rest = if attach.len() > 1 {
            self.partition.partition_points.push(head_idx);
            &new_ids[1..]
        } else {
            &new_ids[..]
        };
        if !rest.is_empty() {
            let boundary = ddg.predecessors(rest[0]).first().copied();
            push_chunks(
                &mut self.partition.segments,
                rest,
                boundary,
                self.segment_size,
            );
        }
        self.partition.sort(&ddg);
        self.costed = derive_costs(ddg, catalog);

        let units: Vec<Unit> = self
            .partition
            .units(self.costed.ddg())
            .into_iter()
            .filter(|&u| {
                self.partition
                    .unit_members(u)
                    .iter()
                    .any(|d| dirty.contains(d))
            })
            .collect();
        for unit in units {
            self.solve(unit);
        }
        dirty.sort_unstable();
        Ok(dirty)
    }
}
