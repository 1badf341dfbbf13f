//! The limiting coloured trees: a Galton-Watson tree whose root draws its
//! child count from `D` and every other node from `D* - 1`, with i.i.d.
//! edge weights, grown lazily.
//!
//! Children of a node are generated on demand in increasing weight order
//! (sequential uniform order statistics), so birth-order growth keeps only
//! one frontier entry per parent even when a node has 10^6 children.
//!
//! Two colourings are supported:
//! * Malthusian: the red ray is a spine walk choosing child `c` of `v` with
//!   probability proportional to `exp(-λ w(v, c)) M̂(c)`, where `M̂` is the
//!   martingale truncated at a fixed absolute generation.
//! * Explosive: the red ray is the ancestry of the last node born within the
//!   birth budget.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::fmt::Write as _;

use ordered_float::OrderedFloat;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fpp::{ColouredEdge, RootedGraph};
use crate::models::{DegreeModel, OffspringModel, WeightModel};
use crate::rng::{purpose, RngStream};

pub type NodeId = u32;

const NONE: u32 = u32::MAX;

pub const DEFAULT_HORIZON: u32 = 12;
pub const DEFAULT_BUDGET: usize = 10_000;
pub const DEFAULT_NODE_CAP: usize = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeNode {
    parent: NodeId,
    pub generation: u32,
    pub child_count: u32,
    expansion: u32,
    /// Weight of the edge to the parent (0 for the root).
    pub weight: f64,
    /// Distance from the root, `S_v`.
    pub birth: f64,
}

impl TreeNode {
    pub fn parent(&self) -> Option<NodeId> {
        (self.parent != NONE).then_some(self.parent)
    }
}

#[derive(Clone, Debug, Default)]
struct Expansion {
    /// Generated children, in increasing weight order.
    children: Vec<NodeId>,
    log_survival: f64,
    /// Children already born in birth-order growth.
    born: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Malthusian,
    Explosive,
}

/// A lazily realized limit tree. Confined to one worker; all randomness
/// comes from its own stream.
#[derive(Clone, Debug)]
pub struct LimitTree {
    offspring: Option<OffspringModel>,
    weights: WeightModel,
    rng: RngStream,
    nodes: Vec<TreeNode>,
    expansions: Vec<Expansion>,
    frontier: BinaryHeap<Reverse<(OrderedFloat<f64>, NodeId)>>,
    birth_order: Vec<NodeId>,
    node_cap: usize,
    memo: HashMap<(NodeId, u32), f64>,
    memo_lambda: f64,
}

/// Explicit tree description for hand-built instances.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExplicitNode {
    pub weight: f64,
    pub children: Vec<ExplicitNode>,
}

impl ExplicitNode {
    pub fn leaf(weight: f64) -> Self {
        Self {
            weight,
            children: Vec::new(),
        }
    }

    pub fn with(weight: f64, children: Vec<ExplicitNode>) -> Self {
        Self { weight, children }
    }
}

impl LimitTree {
    pub fn new(
        degree: &DegreeModel,
        offspring: &OffspringModel,
        weights: &WeightModel,
        rng: RngStream,
    ) -> Self {
        let mut tree = Self {
            offspring: Some(offspring.clone()),
            weights: *weights,
            rng,
            nodes: Vec::new(),
            expansions: Vec::new(),
            frontier: BinaryHeap::new(),
            birth_order: Vec::new(),
            node_cap: DEFAULT_NODE_CAP,
            memo: HashMap::new(),
            memo_lambda: f64::NAN,
        };
        let root_children = degree.sample(&mut tree.rng);
        tree.nodes.push(TreeNode {
            parent: NONE,
            generation: 0,
            child_count: root_children,
            expansion: NONE,
            weight: 0.0,
            birth: 0.0,
        });
        tree
    }

    /// A fully realized tree from an explicit description; the root's
    /// weight is ignored. Sibling order is irrelevant.
    pub fn from_explicit(root: &ExplicitNode) -> Self {
        let mut tree = Self {
            offspring: None,
            weights: WeightModel::Exponential { rate: 1.0 },
            rng: RngStream::new(0, 0),
            nodes: Vec::new(),
            expansions: Vec::new(),
            frontier: BinaryHeap::new(),
            birth_order: Vec::new(),
            node_cap: DEFAULT_NODE_CAP,
            memo: HashMap::new(),
            memo_lambda: f64::NAN,
        };
        tree.nodes.push(TreeNode {
            parent: NONE,
            generation: 0,
            child_count: root.children.len() as u32,
            expansion: NONE,
            weight: 0.0,
            birth: 0.0,
        });
        let mut queue = VecDeque::from([(0 as NodeId, root)]);
        while let Some((id, spec)) = queue.pop_front() {
            let mut kids: Vec<&ExplicitNode> = spec.children.iter().collect();
            kids.sort_by(|a, b| a.weight.total_cmp(&b.weight));
            let exp = tree.expansion_of(id);
            for kid in kids {
                let parent = tree.nodes[id as usize];
                let child = tree.nodes.len() as NodeId;
                tree.nodes.push(TreeNode {
                    parent: id,
                    generation: parent.generation + 1,
                    child_count: kid.children.len() as u32,
                    expansion: NONE,
                    weight: kid.weight,
                    birth: parent.birth + kid.weight,
                });
                tree.expansions[exp].children.push(child);
                queue.push_back((child, kid));
            }
        }
        tree
    }

    pub fn set_node_cap(&mut self, cap: usize) {
        self.node_cap = cap;
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn node(&self, v: NodeId) -> &TreeNode {
        &self.nodes[v as usize]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn weights(&self) -> &WeightModel {
        &self.weights
    }

    /// Nodes born so far, in birth order (root first).
    pub fn birth_order(&self) -> &[NodeId] {
        &self.birth_order
    }

    pub fn last_born(&self) -> Option<NodeId> {
        self.birth_order.last().copied()
    }

    /// Whether birth-order growth has run out of unborn nodes.
    pub fn frontier_is_empty(&self) -> bool {
        !self.birth_order.is_empty() && self.frontier.is_empty()
    }

    fn expansion_of(&mut self, v: NodeId) -> usize {
        let node = &mut self.nodes[v as usize];
        if node.expansion == NONE {
            node.expansion = self.expansions.len() as u32;
            self.expansions.push(Expansion::default());
        }
        node.expansion as usize
    }

    pub fn generated_children(&self, v: NodeId) -> &[NodeId] {
        match self.nodes[v as usize].expansion {
            NONE => &[],
            e => &self.expansions[e as usize].children,
        }
    }

    fn generate_next_child(&mut self, v: NodeId) -> Option<NodeId> {
        let exp = self.expansion_of(v);
        let parent = self.nodes[v as usize];
        let done = self.expansions[exp].children.len() as u32;
        if done >= parent.child_count {
            return None;
        }
        if self.nodes.len() >= self.node_cap {
            return None;
        }
        let remaining = (parent.child_count - done) as f64;
        let u: f64 = self.rng.random();
        // 1 - U_(i) = (1 - U_(i-1)) V^{1/(k-i+1)} for sorted uniforms
        let log_survival = self.expansions[exp].log_survival + (1.0 - u).ln() / remaining;
        self.expansions[exp].log_survival = log_survival;
        let weight = self.weights.quantile_from_log_survival(log_survival);
        let child_count = match &self.offspring {
            Some(off) => off.sample(&mut self.rng),
            None => 0,
        };
        let child = self.nodes.len() as NodeId;
        self.nodes.push(TreeNode {
            parent: v,
            generation: parent.generation + 1,
            child_count,
            expansion: NONE,
            weight,
            birth: parent.birth + weight,
        });
        self.expansions[exp].children.push(child);
        Some(child)
    }

    /// The `i`-th child of `v` in increasing weight order, generating it if
    /// needed.
    pub fn child(&mut self, v: NodeId, i: usize) -> Option<NodeId> {
        if i >= self.nodes[v as usize].child_count as usize {
            return None;
        }
        while self.generated_children(v).len() <= i {
            self.generate_next_child(v)?;
        }
        Some(self.generated_children(v)[i])
    }

    /// Generate every child of `v`.
    pub fn realize_children(&mut self, v: NodeId) -> Result<&[NodeId]> {
        let want = self.nodes[v as usize].child_count as usize;
        if want > self.generated_children(v).len()
            && self.nodes.len() + want - self.generated_children(v).len() > self.node_cap
        {
            return Err(Error::HorizonTooDeep {
                nodes: self.nodes.len() + want,
                cap: self.node_cap,
            });
        }
        while self.generated_children(v).len() < want {
            self.generate_next_child(v);
        }
        Ok(self.generated_children(v))
    }

    /// Realize every descendant of `v` down to `depth` generations below it.
    pub fn realize_depth(&mut self, v: NodeId, depth: u32) -> Result<()> {
        let mut level = vec![v];
        for _ in 0..depth {
            let mut next = Vec::new();
            for &x in &level {
                next.extend_from_slice(self.realize_children(x)?);
            }
            if next.is_empty() {
                break;
            }
            level = next;
        }
        Ok(())
    }

    fn push_next_unborn(&mut self, v: NodeId) {
        let exp = self.expansion_of(v);
        let i = self.expansions[exp].born as usize;
        if let Some(c) = self.child(v, i) {
            self.frontier
                .push(Reverse((OrderedFloat(self.nodes[c as usize].birth), c)));
        }
    }

    /// Advance birth-order growth by one birth. Returns the newborn, or
    /// `None` when the tree is finite and fully born.
    pub fn birth_next(&mut self) -> Option<NodeId> {
        if self.birth_order.is_empty() {
            self.birth_order.push(0);
            self.push_next_unborn(0);
            return Some(0);
        }
        let Reverse((_, c)) = self.frontier.pop()?;
        let parent = self.nodes[c as usize].parent;
        let exp = self.expansion_of(parent);
        self.expansions[exp].born += 1;
        self.birth_order.push(c);
        self.push_next_unborn(parent);
        self.push_next_unborn(c);
        Some(c)
    }

    /// Grow in increasing birth time until `budget` nodes are born (the root
    /// counts) or the frontier empties. Returns whether the budget was
    /// reached.
    pub fn grow_by_birth_order(&mut self, budget: usize) -> bool {
        while self.birth_order.len() < budget {
            if self.birth_next().is_none() {
                return false;
            }
        }
        true
    }

    /// Path of nodes from the root (exclusive) down to `v` (inclusive).
    pub fn ancestry(&self, v: NodeId) -> Vec<NodeId> {
        let mut path = Vec::new();
        let mut x = v;
        while let Some(p) = self.nodes[x as usize].parent() {
            path.push(x);
            x = p;
        }
        path.reverse();
        path
    }

    /// `M̂_n(v) = Σ exp(-λ d(v, v'))` over descendants `v'` exactly `n`
    /// generations below `v`, realizing the subtree as needed.
    pub fn truncated_martingale(&mut self, v: NodeId, lambda: f64, n: u32) -> Result<MartingaleEstimate> {
        self.realize_depth(v, n)?;
        Ok(MartingaleEstimate {
            node: v,
            horizon: n,
            value: self.martingale_realized(v, lambda, n),
        })
    }

    fn martingale_realized(&mut self, v: NodeId, lambda: f64, n: u32) -> f64 {
        if n == 0 {
            return 1.0;
        }
        if self.memo_lambda.to_bits() != lambda.to_bits() {
            self.memo.clear();
            self.memo_lambda = lambda;
        }
        if let Some(&m) = self.memo.get(&(v, n)) {
            return m;
        }
        let kids = self.generated_children(v).to_vec();
        debug_assert_eq!(kids.len(), self.nodes[v as usize].child_count as usize);
        let mut total = 0.0;
        for c in kids {
            let w = self.nodes[c as usize].weight;
            total += (-lambda * w).exp() * self.martingale_realized(c, lambda, n - 1);
        }
        self.memo.insert((v, n), total);
        total
    }

    /// Debug dump: one `parent child weight colour` line per generated edge.
    pub fn debug_dump(&self, red: &[NodeId]) -> String {
        let mut out = String::new();
        for (id, node) in self.nodes.iter().enumerate() {
            if let Some(p) = node.parent() {
                let colour = u8::from(red.contains(&(id as NodeId)));
                writeln!(out, "{p} {id} {:?} {colour}", node.weight).ok();
            }
        }
        out
    }

    /// The R-truncation with every node of generation `< R` fully expanded;
    /// edges into `red` nodes are red. Vertex 0 is the root.
    pub fn truncate(&mut self, radius: u32, red: &[NodeId], vertex_cap: usize) -> Result<RootedGraph> {
        let mut index = vec![0 as NodeId];
        let mut edges = Vec::new();
        let mut head = 0;
        while head < index.len() {
            let v = index[head];
            let local = head as u32;
            head += 1;
            if self.nodes[v as usize].generation >= radius {
                continue;
            }
            let count = self.nodes[v as usize].child_count as usize;
            if index.len() + count > vertex_cap {
                return Err(Error::VertexCapExceeded {
                    vertices: index.len() + count,
                    cap: vertex_cap,
                });
            }
            let kids = self.realize_children(v)?.to_vec();
            for c in kids {
                let b = index.len() as u32;
                index.push(c);
                edges.push(ColouredEdge {
                    a: local,
                    b,
                    weight: self.nodes[c as usize].weight,
                    red: red.contains(&c),
                });
            }
        }
        Ok(RootedGraph {
            vertex_count: index.len(),
            edges,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MartingaleEstimate {
    pub node: NodeId,
    pub horizon: u32,
    pub value: f64,
}

/// Spine walk for the Malthusian colouring.
///
/// Every martingale is truncated at the absolute generation `radius +
/// horizon`, so at depth `k` the child weights `exp(-λ w) M̂_{H-k-1}(c)` sum
/// exactly to `M̂_{H-k}(v)`. Returns `None` when `M̂_H(root) = 0`.
pub fn sample_spine_malthusian<R: Rng + ?Sized>(
    tree: &mut LimitTree,
    lambda: f64,
    radius: u32,
    horizon: u32,
    rng: &mut R,
) -> Result<Option<Vec<NodeId>>> {
    let total = radius + horizon;
    let root = tree.root();
    if tree.truncated_martingale(root, lambda, total)?.value <= 0.0 {
        return Ok(None);
    }
    let mut ray = Vec::with_capacity(radius as usize);
    let mut at = root;
    for depth in 0..radius {
        let probs = spine_step_probabilities(tree, at, lambda, total - depth - 1)?;
        assert!(
            !probs.is_empty(),
            "positive martingale with no surviving child breaks the consistency relation"
        );
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = probs[probs.len() - 1].0;
        for &(c, p) in &probs {
            acc += p;
            if u < acc {
                pick = c;
                break;
            }
        }
        ray.push(pick);
        at = pick;
    }
    Ok(Some(ray))
}

/// Child-selection law at `v`: `(child, exp(-λ w) M̂_n(child) / Σ ...)` for
/// children with positive weight, `n` generations of martingale below each
/// child.
pub fn spine_step_probabilities(
    tree: &mut LimitTree,
    v: NodeId,
    lambda: f64,
    n: u32,
) -> Result<Vec<(NodeId, f64)>> {
    tree.realize_depth(v, n + 1)?;
    let kids = tree.generated_children(v).to_vec();
    let mut scores = Vec::with_capacity(kids.len());
    for c in kids {
        let w = tree.node(c).weight;
        let m = tree.martingale_realized(c, lambda, n);
        if m > 0.0 {
            scores.push((c, (-lambda * w).exp() * m));
        }
    }
    let total: f64 = scores.iter().map(|s| s.1).sum();
    for s in &mut scores {
        s.1 /= total;
    }
    Ok(scores)
}

/// Explosive ray approximation: the first `radius` steps of the ancestry of
/// the last node born within `budget`; `None` if the tree finished first.
pub fn sample_ray_explosive(tree: &mut LimitTree, budget: usize, radius: u32) -> Option<Vec<NodeId>> {
    if !tree.grow_by_birth_order(budget) {
        return None;
    }
    let last = tree.last_born()?;
    let mut path = tree.ancestry(last);
    path.truncate(radius as usize);
    Some(path)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum RegimeParams {
    Malthusian { lambda: f64, horizon: u32 },
    Explosive { budget: usize },
}

impl RegimeParams {
    pub fn regime(&self) -> Regime {
        match self {
            RegimeParams::Malthusian { .. } => Regime::Malthusian,
            RegimeParams::Explosive { .. } => Regime::Explosive,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum Diagnostics {
    Malthusian {
        lambda: f64,
        /// Martingale proxy `M̂(root)` at the absolute horizon; the tree is
        /// declared infinite when positive (misses trees that die later).
        root_martingale: f64,
        horizon: u32,
    },
    Explosive {
        budget: usize,
        births: usize,
        /// Birth time of the last born node, a lower bound for the explosion
        /// time (declares finite-but-large trees infinite).
        last_birth: f64,
    },
}

#[derive(Clone, Debug)]
pub struct ColouredLimitTree {
    pub graph: RootedGraph,
    pub coin: bool,
    pub infinite: bool,
    pub ray_len: usize,
    pub diagnostics: Diagnostics,
}

/// Models plus regime parameters; samples coloured limit trees.
#[derive(Clone, Debug)]
pub struct LimitSampler {
    pub degree: DegreeModel,
    pub offspring: OffspringModel,
    pub weights: WeightModel,
    /// Survival probability `ζ` of the tree, the coin's success probability.
    pub zeta: f64,
    pub params: RegimeParams,
    pub node_cap: usize,
    pub vertex_cap: usize,
}

impl LimitSampler {
    pub fn sample(&self, radius: u32, rng: &RngStream) -> Result<ColouredLimitTree> {
        sample_coloured_limit_tree(self, radius, rng)
    }
}

pub fn sample_coloured_limit_tree(
    sampler: &LimitSampler,
    radius: u32,
    rng: &RngStream,
) -> Result<ColouredLimitTree> {
    let mut tree = LimitTree::new(
        &sampler.degree,
        &sampler.offspring,
        &sampler.weights,
        rng.substream(purpose::TREE),
    );
    tree.set_node_cap(sampler.node_cap);
    let coin = rng.substream(purpose::COIN).random::<f64>() < sampler.zeta;
    let (ray, infinite, diagnostics) = match sampler.params {
        RegimeParams::Malthusian { lambda, horizon } => {
            let ray = sample_spine_malthusian(
                &mut tree,
                lambda,
                radius,
                horizon,
                &mut rng.substream(purpose::SPINE),
            )?;
            let root_martingale = tree.martingale_realized(0, lambda, radius + horizon);
            let infinite = ray.is_some();
            (
                ray.unwrap_or_default(),
                infinite,
                Diagnostics::Malthusian {
                    lambda,
                    root_martingale,
                    horizon: radius + horizon,
                },
            )
        }
        RegimeParams::Explosive { budget } => {
            let ray = sample_ray_explosive(&mut tree, budget, radius);
            let infinite = ray.is_some();
            let last_birth = tree.last_born().map_or(0.0, |v| tree.node(v).birth);
            (
                ray.unwrap_or_default(),
                infinite,
                Diagnostics::Explosive {
                    budget,
                    births: tree.birth_order().len(),
                    last_birth,
                },
            )
        }
    };
    let red: &[NodeId] = if coin && infinite { &ray } else { &[] };
    let graph = tree.truncate(radius, red, sampler.vertex_cap)?;
    Ok(ColouredLimitTree {
        ray_len: graph.red_count(),
        graph,
        coin,
        infinite,
        diagnostics,
    })
}
