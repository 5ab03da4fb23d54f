//! Exact minimum-cost storage for one linear chain of datasets.
//!
//! The chain is turned into a cost transitive graph (CTG): one vertex per
//! (dataset, provider) pair plus `Start` and `End`. An edge between two pair
//! vertices means "both endpoints stored, everything between them deleted";
//! its weight is the cost rate of the target plus the regeneration cost rate
//! of the deleted datasets in between. Start→end paths correspond one-to-one
//! to storage strategies of the chain and their length is the strategy's SCR,
//! so the shortest path is the optimum.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::ddg::{StorageStrategy, DELETED, HOME};
use crate::pricing::CostedDdg;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TcsbError {
    #[error("segment is not a linear chain: {0}")]
    NotLinear(String),
    #[error("no CTG edge from {from:?} to {to:?}")]
    NoSuchEdge { from: CtgVertex, to: CtgVertex },
    #[error("malformed CTG path: {0}")]
    BadPath(String),
}

/// A CTG vertex. `position` is the 0-based index of the dataset within the
/// segment, `provider` the 1-based storage flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CtgVertex {
    Start,
    Pair { position: usize, provider: u32 },
    End,
}

/// A chain of datasets `d_0 → d_1 → … → d_{n-1}` taken from a costed graph.
///
/// `base_gen_cost` is what it costs to obtain the head's direct predecessor
/// at the home provider when that predecessor is not kept by the segment
/// itself: zero for original input, the transfer cost of a stored boundary
/// dataset, or the full regeneration cost of a deleted one.
#[derive(Debug, Clone)]
pub struct Segment<'a> {
    costed: &'a CostedDdg,
    datasets: Vec<usize>,
    base_gen_cost: f64,
}

impl<'a> Segment<'a> {
    /// Builds a segment over `datasets`, which must follow each other as
    /// direct predecessor → successor. The head may have any predecessors;
    /// their cost is summarised by `base_gen_cost`.
    pub fn from_chain(
        costed: &'a CostedDdg,
        datasets: Vec<usize>,
        base_gen_cost: f64,
    ) -> Result<Self, TcsbError> {
        let ddg = costed.ddg();
        for w in datasets.windows(2) {
            if ddg.predecessors(w[1]) != [w[0]] {
                return Err(TcsbError::NotLinear(format!(
                    "`{}` is not derived solely from `{}`",
                    ddg.dataset(w[1]).id,
                    ddg.dataset(w[0]).id
                )));
            }
        }
        Ok(Self {
            costed,
            datasets,
            base_gen_cost,
        })
    }

    /// The whole graph as one segment regenerating from original input.
    pub fn from_linear(costed: &'a CostedDdg) -> Result<Self, TcsbError> {
        let ddg = costed.ddg();
        for i in 0..ddg.len() {
            if ddg.predecessors(i).len() > 1 || ddg.successors(i).len() > 1 {
                return Err(TcsbError::NotLinear(format!(
                    "`{}` branches",
                    ddg.dataset(i).id
                )));
            }
        }
        let sources = (0..ddg.len())
            .filter(|&i| ddg.predecessors(i).is_empty())
            .count();
        if sources > 1 {
            return Err(TcsbError::NotLinear(format!(
                "graph splits into {sources} separate chains"
            )));
        }
        Self::from_chain(costed, ddg.topological_order().to_vec(), 0.0)
    }

    pub fn len(&self) -> usize {
        self.datasets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.datasets.is_empty()
    }

    pub fn datasets(&self) -> &[usize] {
        &self.datasets
    }

    pub fn providers(&self) -> usize {
        self.costed.providers()
    }

    pub fn costed(&self) -> &'a CostedDdg {
        self.costed
    }

    pub fn base_gen_cost(&self) -> f64 {
        self.base_gen_cost
    }

    pub fn build_ctg(self) -> Ctg<'a> {
        Ctg { segment: self }
    }

    /// Builds the CTG and returns its shortest path.
    pub fn optimize(self) -> SegmentSolution {
        self.build_ctg().shortest_path()
    }
}

/// Cost transitive graph over a [`Segment`]. Edge weights are evaluated on
/// demand rather than stored.
#[derive(Debug, Clone)]
pub struct Ctg<'a> {
    segment: Segment<'a>,
}

pub fn build_ctg(costed: &CostedDdg) -> Result<Ctg<'_>, TcsbError> {
    Segment::from_linear(costed).map(Segment::build_ctg)
}

pub fn optimize_segment(costed: &CostedDdg) -> Result<SegmentSolution, TcsbError> {
    Ok(build_ctg(costed)?.shortest_path())
}

/// Optimal assignment for one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSolution {
    /// Dataset indices of the segment, head first.
    pub datasets: Vec<usize>,
    /// Storage flag per segment dataset.
    pub flags: Vec<u32>,
    /// Length of `path`, equal to the segment's SCR.
    pub scr: f64,
    pub path: Vec<CtgVertex>,
}

impl SegmentSolution {
    pub fn strategy(&self) -> StorageStrategy {
        StorageStrategy::from_flags(self.flags.clone())
    }

    /// Writes this solution's flags into a whole-graph strategy.
    pub fn apply_to(&self, strategy: &mut StorageStrategy) {
        for (&d, &f) in self.datasets.iter().zip(&self.flags) {
            strategy.set(d, f);
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Label {
    cost: f64,
    stored: u32,
    pred: usize,
}

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
struct QueueEntry {
    cost: f64,
    stored: u32,
    vertex: usize,
}

impl Eq for QueueEntry {}

impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed for a min-heap
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.stored.cmp(&self.stored))
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<'a> Ctg<'a> {
    pub fn segment(&self) -> &Segment<'a> {
        &self.segment
    }

    fn n(&self) -> usize {
        self.segment.len()
    }

    fn m(&self) -> usize {
        self.segment.providers()
    }

    pub fn vertex_count(&self) -> usize {
        self.n() * self.m() + 2
    }

    /// `C(n,2)·m² + 2·n·m + 1`.
    pub fn edge_count(&self) -> usize {
        let (n, m) = (self.n(), self.m());
        n * n.saturating_sub(1) / 2 * m * m + 2 * n * m + 1
    }

    fn id(&self, v: CtgVertex) -> usize {
        match v {
            CtgVertex::Start => 0,
            CtgVertex::Pair { position, provider } => {
                1 + position * self.m() + (provider as usize - 1)
            }
            CtgVertex::End => 1 + self.n() * self.m(),
        }
    }

    fn vertex(&self, id: usize) -> CtgVertex {
        let m = self.m();
        if id == 0 {
            CtgVertex::Start
        } else if id == 1 + self.n() * m {
            CtgVertex::End
        } else {
            CtgVertex::Pair {
                position: (id - 1) / m,
                provider: ((id - 1) % m) as u32 + 1,
            }
        }
    }

    pub fn vertices(&self) -> impl Iterator<Item = CtgVertex> + '_ {
        (0..self.vertex_count()).map(|id| self.vertex(id))
    }

    fn valid_pair(&self, v: CtgVertex) -> bool {
        match v {
            CtgVertex::Pair { position, provider } => {
                position < self.n() && provider >= HOME && provider as usize <= self.m()
            }
            _ => true,
        }
    }

    /// Every edge of the graph, grouped by source vertex.
    pub fn edges(&self) -> Vec<(CtgVertex, CtgVertex)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for from in self.vertices() {
            self.for_each_out_edge(from, |to, _| out.push((from, to)));
        }
        out
    }

    /// Cost of regenerating from `from`'s dataset (or the segment boundary).
    fn source_cost(&self, from: CtgVertex) -> (f64, usize) {
        match from {
            CtgVertex::Start => (self.segment.base_gen_cost, 0),
            CtgVertex::Pair { position, provider } => {
                let d = self.segment.datasets[position];
                (self.segment.costed.z(d, provider), position + 1)
            }
            CtgVertex::End => unreachable!("end has no out-edges"),
        }
    }

    fn stored_rate(&self, position: usize, provider: u32) -> f64 {
        let c = self.segment.costed;
        let d = self.segment.datasets[position];
        c.z(d, provider) * c.v(d) + c.y(d, provider)
    }

    /// Weight of `from → to`: the cost rate of `to` stored at its provider
    /// plus the cost rates of all datasets strictly between the endpoints,
    /// each deleted and regenerated from `from`.
    pub fn edge_weight(&self, from: CtgVertex, to: CtgVertex) -> Result<f64, TcsbError> {
        let no_edge = || TcsbError::NoSuchEdge { from, to };
        if !self.valid_pair(from) || !self.valid_pair(to) {
            return Err(no_edge());
        }
        let first = match from {
            CtgVertex::End => return Err(no_edge()),
            CtgVertex::Start => 0,
            CtgVertex::Pair { position, .. } => position + 1,
        };
        let (stop, stored) = match to {
            CtgVertex::Start => return Err(no_edge()),
            CtgVertex::End => (self.n(), 0.0),
            CtgVertex::Pair { position, provider } => {
                if position < first {
                    return Err(no_edge());
                }
                (position, self.stored_rate(position, provider))
            }
        };
        let (mut gen, _) = self.source_cost(from);
        let c = self.segment.costed;
        let mut deleted = 0.0;
        for &d in &self.segment.datasets[first..stop] {
            gen += c.x(d);
            deleted += gen * c.v(d);
        }
        Ok(stored + deleted)
    }

    /// Visits every out-edge of `from` with its weight. Accumulates the
    /// deleted-run sum incrementally, in the same order as [`Ctg::edge_weight`],
    /// so both produce bitwise identical weights.
    pub fn for_each_out_edge(&self, from: CtgVertex, mut visit: impl FnMut(CtgVertex, f64)) {
        if from == CtgVertex::End {
            return;
        }
        let (mut gen, first) = self.source_cost(from);
        let c = self.segment.costed;
        let m = self.m() as u32;
        let mut deleted = 0.0;
        for position in first..self.n() {
            for provider in HOME..=m {
                visit(
                    CtgVertex::Pair { position, provider },
                    self.stored_rate(position, provider) + deleted,
                );
            }
            let d = self.segment.datasets[position];
            gen += c.x(d);
            deleted += gen * c.v(d);
        }
        visit(CtgVertex::End, 0.0 + deleted);
    }

    /// Dijkstra from `Start` to `End`.
    ///
    /// Equal-length paths are ordered by fewer stored datasets, then by the
    /// lexicographically smallest (position, provider) sequence.
    pub fn shortest_path(&self) -> SegmentSolution {
        self.shortest_path_by(|_, _, w| w)
    }

    /// Dijkstra with every edge weight passed through `adjust` first. Used
    /// to inject faults when checking the verification harness.
    pub fn shortest_path_by(
        &self,
        adjust: impl Fn(CtgVertex, CtgVertex, f64) -> f64,
    ) -> SegmentSolution {
        let total = self.vertex_count();
        let end = total - 1;
        let mut labels: Vec<Option<Label>> = vec![None; total];
        let mut done = vec![false; total];
        let mut heap = BinaryHeap::new();
        labels[0] = Some(Label {
            cost: 0.0,
            stored: 0,
            pred: NONE,
        });
        heap.push(QueueEntry {
            cost: 0.0,
            stored: 0,
            vertex: 0,
        });

        while let Some(QueueEntry { vertex: u, .. }) = heap.pop() {
            if done[u] {
                continue;
            }
            done[u] = true;
            let from = self.vertex(u);
            let base = labels[u].expect("queued vertices are labelled");
            self.for_each_out_edge(from, |to, w| {
                let w = adjust(from, to, w);
                let t = self.id(to);
                let cand = Label {
                    cost: base.cost + w,
                    stored: base.stored + u32::from(to != CtgVertex::End),
                    pred: u,
                };
                let better = match labels[t] {
                    None => true,
                    Some(cur) => match cand
                        .cost
                        .total_cmp(&cur.cost)
                        .then(cand.stored.cmp(&cur.stored))
                    {
                        Ordering::Less => true,
                        Ordering::Greater => false,
                        Ordering::Equal => trace(&labels, cand.pred) < trace(&labels, cur.pred),
                    },
                };
                if better {
                    debug_assert!(!done[t] || t == end);
                    labels[t] = Some(cand);
                    heap.push(QueueEntry {
                        cost: cand.cost,
                        stored: cand.stored,
                        vertex: t,
                    });
                }
            });
        }

        let ids = trace(&labels, end);
        let path: Vec<CtgVertex> = ids.iter().map(|&id| self.vertex(id)).collect();
        let flags = self.decode(&path).expect("shortest path is well formed");
        SegmentSolution {
            datasets: self.segment.datasets.clone(),
            flags,
            scr: labels[end].expect("end is reachable").cost,
            path,
        }
    }

    /// Storage flags encoded by a start→end path.
    pub fn decode(&self, path: &[CtgVertex]) -> Result<Vec<u32>, TcsbError> {
        let bad = |msg: &str| Err(TcsbError::BadPath(msg.to_owned()));
        if path.first() != Some(&CtgVertex::Start) || path.last() != Some(&CtgVertex::End) {
            return bad("path must run from start to end");
        }
        let mut flags = vec![DELETED; self.n()];
        let mut next = 0;
        for &v in &path[1..path.len() - 1] {
            match v {
                CtgVertex::Pair { position, provider } if self.valid_pair(v) => {
                    if position < next {
                        return bad("positions must strictly increase");
                    }
                    flags[position] = provider;
                    next = position + 1;
                }
                _ => return bad("interior vertices must be in-range pairs"),
            }
        }
        Ok(flags)
    }

    /// The unique start→end path for a storage assignment of the segment.
    pub fn encode(&self, flags: &[u32]) -> Result<Vec<CtgVertex>, TcsbError> {
        if flags.len() != self.n() {
            return Err(TcsbError::BadPath(format!(
                "strategy covers {} datasets, segment has {}",
                flags.len(),
                self.n()
            )));
        }
        let mut path = vec![CtgVertex::Start];
        for (position, &provider) in flags.iter().enumerate() {
            if provider == DELETED {
                continue;
            }
            let v = CtgVertex::Pair { position, provider };
            if !self.valid_pair(v) {
                return Err(TcsbError::BadPath(format!(
                    "provider {provider} out of range"
                )));
            }
            path.push(v);
        }
        path.push(CtgVertex::End);
        Ok(path)
    }

    pub fn path_length(&self, path: &[CtgVertex]) -> Result<f64, TcsbError> {
        path.windows(2).map(|w| self.edge_weight(w[0], w[1])).sum()
    }
}

/// Vertex ids from start to `v` following predecessor links.
fn trace(labels: &[Option<Label>], v: usize) -> Vec<usize> {
    let mut ids = Vec::new();
    let mut cur = v;
    while cur != NONE {
        ids.push(cur);
        cur = labels[cur].map_or(NONE, |l| l.pred);
    }
    ids.reverse();
    ids
}
