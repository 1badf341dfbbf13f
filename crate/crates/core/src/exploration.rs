//! Exploration of a rooted weighted graph in increasing distance from the
//! root, starting from its R-ball, with active-set bookkeeping and the
//! branch/ε classification of active vertices.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};
use std::io::Write;
use std::time::{Duration, Instant};

use ordered_float::OrderedFloat;
use rand::RngCore;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fpp::{ColouredEdge, RootedGraph};
use crate::graph::{MultiGraph, Vertex};
use crate::limit_tree::LimitTree;
use crate::rng::{purpose, RngStream};

/// One incidence of a vertex: `(neighbour, weight, edge id)`.
pub type Incidence = (u32, f64, u64);

/// Anything the exploration can walk: a root plus neighbour expansion.
/// Expansion must be deterministic per realized graph.
pub trait ExpandableGraph {
    fn root(&self) -> u32;
    fn degree(&mut self, v: u32) -> Result<u32>;
    fn expand(&mut self, v: u32, out: &mut Vec<Incidence>) -> Result<()>;
}

/// A configuration graph viewed from a chosen root.
#[derive(Clone, Copy, Debug)]
pub struct RootedMultiGraph<'g> {
    pub graph: &'g MultiGraph,
    pub root: Vertex,
}

impl ExpandableGraph for RootedMultiGraph<'_> {
    fn root(&self) -> u32 {
        self.root
    }

    fn degree(&mut self, v: u32) -> Result<u32> {
        Ok(self.graph.degree(v))
    }

    fn expand(&mut self, v: u32, out: &mut Vec<Incidence>) -> Result<()> {
        out.clear();
        out.extend(
            self.graph
                .neighbours(v)
                .map(|(x, e)| (x, self.graph.edge(e).weight, e as u64)),
        );
        Ok(())
    }
}

impl ExpandableGraph for LimitTree {
    fn root(&self) -> u32 {
        LimitTree::root(self)
    }

    fn degree(&mut self, v: u32) -> Result<u32> {
        let node = self.node(v);
        Ok(node.child_count + u32::from(node.parent().is_some()))
    }

    /// The edge to a node is identified by the node itself.
    fn expand(&mut self, v: u32, out: &mut Vec<Incidence>) -> Result<()> {
        out.clear();
        let node = *self.node(v);
        if let Some(p) = node.parent() {
            out.push((p, node.weight, v as u64));
        }
        let kids = self.realize_children(v)?.to_vec();
        out.extend(kids.into_iter().map(|c| (c, self.node(c).weight, c as u64)));
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Status {
    #[default]
    Unseen,
    /// Inside the initial ball at hop distance `< R`; never active.
    Interior,
    Active,
    Explored,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SeenVertex {
    pub status: Status,
    /// Part of the initial ball `G^(0)`.
    pub in_ball: bool,
    pub distance: f64,
    /// Distance of the vertex it was reached through (`-inf` for the root).
    pub parent_distance: f64,
    /// Ancestor at hop distance `R` whose branch holds the vertex.
    pub anchor: u32,
    /// Recorded degree in the full graph.
    pub degree: u32,
    /// Local index in the explored subgraph (root is 0).
    pub local: u32,
}

#[derive(Clone, Debug)]
pub struct ExplorationState {
    pub radius: u32,
    pub root: u32,
    /// Exploration steps taken, `N`.
    pub steps: usize,
    /// Indexed by vertex id; ids of both graphs and trees are dense.
    seen: Vec<SeenVertex>,
    seen_count: u32,
    record: bool,
    edges: Vec<ColouredEdge>,
    heap: BinaryHeap<Reverse<(OrderedFloat<f64>, u64, u32)>>,
    active_count: usize,
    explored: Vec<u32>,
    /// Last explored vertex `v*(N)`; `None` before the first step or after
    /// the active set emptied (then `v*(N) = o` by convention).
    pub v_star: Option<u32>,
    tie_break: RngStream,
    scratch: Vec<Incidence>,
}

impl ExplorationState {
    pub fn vertex(&self, v: u32) -> Option<&SeenVertex> {
        self.seen
            .get(v as usize)
            .filter(|s| s.status != Status::Unseen)
    }

    fn status(&self, v: u32) -> Status {
        self.seen.get(v as usize).map_or(Status::Unseen, |s| s.status)
    }

    fn slot(&mut self, v: u32) -> &mut SeenVertex {
        let i = v as usize;
        if i >= self.seen.len() {
            self.seen.resize(i + 1, SeenVertex::default());
        }
        &mut self.seen[i]
    }

    pub fn active_count(&self) -> usize {
        self.active_count
    }

    fn iter_seen(&self) -> impl Iterator<Item = (u32, &SeenVertex)> {
        self.seen
            .iter()
            .enumerate()
            .filter(|(_, s)| s.status != Status::Unseen)
            .map(|(v, s)| (v as u32, s))
    }

    /// Active vertices, sorted by id.
    pub fn active(&self) -> Vec<u32> {
        self.iter_seen()
            .filter(|(_, s)| s.status == Status::Active)
            .map(|(v, _)| v)
            .collect()
    }

    /// Vertices explored so far, in exploration order.
    pub fn explored(&self) -> &[u32] {
        &self.explored
    }

    pub fn v_star_distance(&self) -> Option<f64> {
        self.v_star.map(|v| self.seen[v as usize].distance)
    }

    /// Branch anchor `v*_R(N)` of the last explored vertex.
    pub fn v_star_anchor(&self) -> Option<u32> {
        self.v_star.map(|v| self.seen[v as usize].anchor)
    }

    /// The explored subgraph `G^(N)`: the ball, every explored vertex with
    /// all its incident edges, and the active vertices they reach. Empty of
    /// edges when recording was switched off.
    pub fn explored_subgraph(&self) -> RootedGraph {
        RootedGraph {
            vertex_count: self.seen_count as usize,
            edges: self.edges.clone(),
        }
    }

    /// Fingerprint of the full state, for reproducibility checks.
    pub fn snapshot(&self) -> Vec<(u32, u8, u64, u32)> {
        self.iter_seen()
            .map(|(v, s)| (v, s.status as u8, s.distance.to_bits(), s.anchor))
            .collect()
    }

    fn add_edge(&mut self, a: u32, b: u32, weight: f64) {
        if self.record {
            self.edges.push(ColouredEdge {
                a: self.seen[a as usize].local,
                b: self.seen[b as usize].local,
                weight,
                red: false,
            });
        }
    }

    fn insert(&mut self, v: u32, mut info: SeenVertex) {
        info.local = self.seen_count;
        self.seen_count += 1;
        *self.slot(v) = info;
    }

    fn push_active(&mut self, v: u32, distance: f64) {
        let tag = self.tie_break.next_u64();
        self.heap.push(Reverse((OrderedFloat(distance), tag, v)));
    }
}

/// `G^(0)` is the R-ball of the root; the vertices at hop distance exactly
/// `R` form `A_0`, with their distances measured inside the ball.
pub fn init_exploration<G: ExpandableGraph>(
    g: &mut G,
    radius: u32,
    rng: &RngStream,
) -> Result<ExplorationState> {
    init_exploration_with(g, radius, rng, true)
}

/// As [`init_exploration`]; `record = false` skips building the explored
/// subgraph, which matters on trees with millions of active vertices.
pub fn init_exploration_with<G: ExpandableGraph>(
    g: &mut G,
    radius: u32,
    rng: &RngStream,
    record: bool,
) -> Result<ExplorationState> {
    let root = g.root();
    let mut state = ExplorationState {
        radius,
        root,
        steps: 0,
        seen: Vec::new(),
        seen_count: 0,
        record,
        edges: Vec::new(),
        heap: BinaryHeap::new(),
        active_count: 0,
        explored: Vec::new(),
        v_star: None,
        tie_break: rng.substream(purpose::TIE_BREAK),
        scratch: Vec::new(),
    };
    let root_degree = g.degree(root)?;
    state.insert(
        root,
        SeenVertex {
            status: Status::Interior,
            in_ball: true,
            distance: 0.0,
            parent_distance: f64::NEG_INFINITY,
            anchor: root,
            degree: root_degree,
            local: 0,
        },
    );

    // hop BFS; every ball edge is met once from each end (a loop twice
    // from its vertex), so keep it on the first meeting
    let mut hop: HashMap<u32, u32> = HashMap::from([(root, 0)]);
    let mut queue = VecDeque::from([root]);
    let mut ball_edges: Vec<(u32, u32, f64)> = Vec::new();
    let mut met = HashSet::new();
    let mut incidences = Vec::new();
    while let Some(v) = queue.pop_front() {
        let h = hop[&v];
        g.expand(v, &mut incidences)?;
        for &(x, w, e) in &incidences {
            if let std::collections::hash_map::Entry::Vacant(slot) = hop.entry(x) {
                if h == radius {
                    continue;
                }
                slot.insert(h + 1);
                let degree = g.degree(x)?;
                state.insert(
                    x,
                    SeenVertex {
                        status: Status::Interior,
                        in_ball: true,
                        distance: f64::INFINITY,
                        parent_distance: f64::NEG_INFINITY,
                        anchor: x,
                        degree,
                        local: 0,
                    },
                );
                queue.push_back(x);
            }
            if met.insert(e) {
                ball_edges.push((v, x, w));
            }
        }
    }
    for &(a, b, w) in &ball_edges {
        state.add_edge(a, b, w);
    }

    // distances within the ball
    let mut adjacency: HashMap<u32, Vec<(u32, f64)>> = HashMap::new();
    for &(a, b, w) in &ball_edges {
        adjacency.entry(a).or_default().push((b, w));
        adjacency.entry(b).or_default().push((a, w));
    }
    let mut heap = BinaryHeap::from([Reverse((OrderedFloat(0.0), root))]);
    let mut done = HashSet::new();
    while let Some(Reverse((OrderedFloat(d), v))) = heap.pop() {
        if !done.insert(v) {
            continue;
        }
        for &(x, w) in adjacency.get(&v).map(Vec::as_slice).unwrap_or(&[]) {
            let nd = d + w;
            let entry = state.slot(x);
            if nd < entry.distance {
                entry.distance = nd;
                entry.parent_distance = d;
                heap.push(Reverse((OrderedFloat(nd), x)));
            }
        }
    }

    let mut frontier: Vec<u32> = hop
        .iter()
        .filter(|(_, &h)| h == radius)
        .map(|(&v, _)| v)
        .collect();
    frontier.sort_unstable_by_key(|&v| state.seen[v as usize].local);
    for v in frontier {
        let entry = state.slot(v);
        entry.status = Status::Active;
        entry.anchor = v;
        let d = entry.distance;
        state.active_count += 1;
        state.push_active(v, d);
    }
    Ok(state)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Explored(u32),
    /// The active set was empty: `v*(N) = o` and nothing changes.
    Exhausted,
}

/// Explore the active minimizer of the distance to the root (ties broken
/// uniformly at random), adding its incident edges and unseen neighbours.
pub fn explore_step<G: ExpandableGraph>(
    g: &mut G,
    state: &mut ExplorationState,
) -> Result<StepOutcome> {
    state.steps += 1;
    let picked = loop {
        let Some(Reverse((OrderedFloat(d), _, v))) = state.heap.pop() else {
            break None;
        };
        let s = &state.seen[v as usize];
        if s.status == Status::Active && s.distance == d {
            break Some(v);
        }
    };
    let Some(v) = picked else {
        state.v_star = None;
        return Ok(StepOutcome::Exhausted);
    };
    if let Some(prev) = state.v_star_distance() {
        debug_assert!(state.seen[v as usize].distance >= prev, "exploration distances must not decrease");
    }
    let (dv, anchor, v_in_ball) = {
        let s = state.slot(v);
        s.status = Status::Explored;
        (s.distance, s.anchor, s.in_ball)
    };
    state.active_count -= 1;
    state.explored.push(v);
    state.v_star = Some(v);

    let mut incidences = std::mem::take(&mut state.scratch);
    g.expand(v, &mut incidences)?;
    let mut loops_met: Vec<u64> = Vec::new();
    for &(x, w, e) in &incidences {
        let nd = dv + w;
        match state.status(x) {
            Status::Unseen => {
                let degree = g.degree(x)?;
                state.insert(
                    x,
                    SeenVertex {
                        status: Status::Active,
                        in_ball: false,
                        distance: nd,
                        parent_distance: dv,
                        anchor,
                        degree,
                        local: 0,
                    },
                );
                state.active_count += 1;
                state.push_active(x, nd);
                state.add_edge(v, x, w);
            }
            Status::Active => {
                let s = state.slot(x);
                let x_in_ball = s.in_ball;
                if nd < s.distance {
                    s.distance = nd;
                    s.parent_distance = dv;
                    // frontier vertices of the ball always anchor themselves
                    if !x_in_ball {
                        s.anchor = anchor;
                    }
                    state.push_active(x, nd);
                }
                if !(v_in_ball && x_in_ball) {
                    state.add_edge(v, x, w);
                }
            }
            // the edge went in when x was explored, or with the ball
            Status::Explored if x != v => {}
            Status::Explored => {
                // a loop is listed twice from its vertex
                if !v_in_ball && !loops_met.contains(&e) {
                    state.add_edge(v, v, w);
                }
                loops_met.push(e);
            }
            Status::Interior => {}
        }
    }
    state.scratch = incidences;
    Ok(StepOutcome::Explored(v))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CapKind {
    Steps,
    WallClock,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Caps {
    pub max_steps: Option<usize>,
    pub wall_clock: Option<Duration>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunOutcome {
    pub steps: usize,
    pub exhausted: bool,
    /// Set when a cap stopped the run; the state is partial.
    pub capped: Option<CapKind>,
}

/// Run up to `steps` exploration steps, stopping early when the active set
/// empties or a cap is hit. `on_step` sees the state after every step.
pub fn explore<G: ExpandableGraph>(
    g: &mut G,
    state: &mut ExplorationState,
    steps: usize,
    caps: Caps,
    mut on_step: impl FnMut(&ExplorationState) -> Result<()>,
) -> Result<RunOutcome> {
    let start = Instant::now();
    let mut taken = 0;
    while taken < steps {
        if caps.max_steps.is_some_and(|m| state.steps >= m) {
            return Ok(RunOutcome {
                steps: taken,
                exhausted: false,
                capped: Some(CapKind::Steps),
            });
        }
        if caps.wall_clock.is_some_and(|limit| start.elapsed() > limit) {
            return Ok(RunOutcome {
                steps: taken,
                exhausted: false,
                capped: Some(CapKind::WallClock),
            });
        }
        let outcome = explore_step(g, state)?;
        taken += 1;
        on_step(state)?;
        if outcome == StepOutcome::Exhausted {
            return Ok(RunOutcome {
                steps: taken,
                exhausted: true,
                capped: None,
            });
        }
    }
    Ok(RunOutcome {
        steps: taken,
        exhausted: false,
        capped: None,
    })
}

/// Active vertices split by branch membership (same anchor as `v*(N)`) and
/// by whether `d(o,v) <= d(o,v*(N)) + ε`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ActiveClassification {
    pub radius: u32,
    pub eps: f64,
    /// Counts of types (i) in-branch near, (ii) in-branch far, (iii)
    /// off-branch near, (iv) off-branch far.
    pub counts: [usize; 4],
    /// `Σ (deg - 1)` per type.
    pub stubs: [u64; 4],
    /// `|A_{R,ε}(N)|`: type (i) vertices inside the birth window.
    pub window_count: usize,
    pub window_stubs: u64,
}

pub fn classify_active(state: &ExplorationState, eps: f64) -> Result<ActiveClassification> {
    let v = state.v_star.ok_or(Error::NoReferenceVertex)?;
    let star = state.seen[v as usize];
    let threshold = star.distance + eps;
    let mut c = ActiveClassification {
        radius: state.radius,
        eps,
        ..Default::default()
    };
    for (_, s) in state.iter_seen().filter(|(_, s)| s.status == Status::Active) {
        let in_branch = s.anchor == star.anchor;
        let near = s.distance <= threshold;
        let kind = match (in_branch, near) {
            (true, true) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (false, false) => 3,
        };
        let stubs = u64::from(s.degree.saturating_sub(1));
        c.counts[kind] += 1;
        c.stubs[kind] += stubs;
        if in_branch
            && s.parent_distance < star.distance
            && star.distance <= s.distance
            && s.distance < threshold
        {
            c.window_count += 1;
            c.window_stubs += stubs;
        }
    }
    Ok(c)
}

/// `(Σ_{A_{R,ε}(N)} (deg - 1), Σ_{A'_R(N)} (deg - 1))`, where `A'_R(N)` is
/// every active vertex outside the branch of `v*_R(N)`.
pub fn stub_counts(c: &ActiveClassification) -> (u64, u64) {
    (c.window_stubs, c.stubs[2] + c.stubs[3])
}

/// CSV trace of an exploration run.
pub struct TraceWriter<W: Write> {
    out: W,
    eps: f64,
}

impl<W: Write> TraceWriter<W> {
    pub const HEADER: &'static str =
        "N,v_star,d_v_star,active,type_i,type_ii,type_iii,type_iv,in_branch_window,off_branch";

    pub fn new(mut out: W, eps: f64) -> Result<Self> {
        writeln!(out, "{}", Self::HEADER)?;
        Ok(Self { out, eps })
    }

    pub fn record(&mut self, state: &ExplorationState) -> Result<()> {
        match state.v_star {
            None => writeln!(
                self.out,
                "{},{},0,{},0,0,0,0,0,0",
                state.steps, state.root, state.active_count
            )?,
            Some(v) => {
                let c = classify_active(state, self.eps)?;
                let (window, off) = stub_counts(&c);
                writeln!(
                    self.out,
                    "{},{},{:?},{},{},{},{},{},{},{}",
                    state.steps,
                    v,
                    state.seen[v as usize].distance,
                    state.active_count,
                    c.counts[0],
                    c.counts[1],
                    c.counts[2],
                    c.counts[3],
                    window,
                    off
                )?
            }
        }
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}
