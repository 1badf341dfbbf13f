//! Shortest paths, geodesic colouring and hop truncation on weighted
//! multigraphs.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};

use ordered_float::OrderedFloat;
use rand::Rng;

use crate::graph::{EdgeId, MultiGraph, Vertex};

const NO_EDGE: EdgeId = EdgeId::MAX;

#[derive(Clone, Debug)]
pub struct ShortestPathResult {
    pub source: Vertex,
    pub dist: Vec<f64>,
    pub pred: Vec<Option<EdgeId>>,
}

impl ShortestPathResult {
    /// Edges of the predecessor path from the source to `target`, in path
    /// order; `None` when unreachable.
    pub fn path_to(&self, g: &MultiGraph, target: Vertex) -> Option<Vec<EdgeId>> {
        if !self.dist[target as usize].is_finite() {
            return None;
        }
        let mut path = Vec::new();
        let mut v = target;
        while let Some(e) = self.pred[v as usize] {
            path.push(e);
            v = g.edge(e).other(v);
        }
        path.reverse();
        Some(path)
    }
}

/// Reusable Dijkstra state; only the touched entries are reset between runs,
/// so early-stopped searches on big graphs stay cheap.
#[derive(Clone, Debug, Default)]
pub struct DijkstraWorkspace {
    dist: Vec<f64>,
    pred: Vec<EdgeId>,
    settled: Vec<bool>,
    touched: Vec<Vertex>,
    heap: BinaryHeap<Reverse<(OrderedFloat<f64>, Vertex, EdgeId)>>,
    settled_count: usize,
}

impl DijkstraWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    fn reset(&mut self, n: usize) {
        if self.dist.len() != n {
            self.dist = vec![f64::INFINITY; n];
            self.pred = vec![NO_EDGE; n];
            self.settled = vec![false; n];
        } else {
            for &v in &self.touched {
                self.dist[v as usize] = f64::INFINITY;
                self.pred[v as usize] = NO_EDGE;
                self.settled[v as usize] = false;
            }
        }
        self.touched.clear();
        self.heap.clear();
        self.settled_count = 0;
    }

    /// Runs from `source` until `target` is settled (or the component is
    /// exhausted). Heap order is `(distance, vertex, edge)`, and equal
    /// tentative distances keep the smaller edge id, so runs are
    /// bit-reproducible.
    pub fn run(&mut self, g: &MultiGraph, source: Vertex, target: Option<Vertex>) {
        self.reset(g.vertex_count());
        self.dist[source as usize] = 0.0;
        self.touched.push(source);
        self.heap.push(Reverse((OrderedFloat(0.0), source, NO_EDGE)));
        while let Some(Reverse((OrderedFloat(d), v, e))) = self.heap.pop() {
            let vi = v as usize;
            if self.settled[vi] || d > self.dist[vi] || e != self.pred[vi] {
                continue;
            }
            self.settled[vi] = true;
            self.settled_count += 1;
            if Some(v) == target {
                break;
            }
            for (x, edge) in g.neighbours(v) {
                let xi = x as usize;
                if self.settled[xi] {
                    continue;
                }
                let nd = d + g.edge(edge).weight;
                let better = nd < self.dist[xi] || (nd == self.dist[xi] && edge < self.pred[xi]);
                if better {
                    if self.dist[xi].is_infinite() {
                        self.touched.push(x);
                    }
                    self.dist[xi] = nd;
                    self.pred[xi] = edge;
                    self.heap.push(Reverse((OrderedFloat(nd), x, edge)));
                }
            }
        }
    }

    /// Settled distance, or infinity when the last run did not settle `v`.
    pub fn distance(&self, v: Vertex) -> f64 {
        if self.settled.get(v as usize).copied().unwrap_or(false) {
            self.dist[v as usize]
        } else {
            f64::INFINITY
        }
    }

    pub fn settled_count(&self) -> usize {
        self.settled_count
    }

    /// Predecessor path to a settled vertex, from the source outwards.
    pub fn path_to(&self, g: &MultiGraph, target: Vertex) -> Option<Vec<EdgeId>> {
        if !self.distance(target).is_finite() {
            return None;
        }
        let mut path = Vec::new();
        let mut v = target;
        loop {
            let e = self.pred[v as usize];
            if e == NO_EDGE {
                break;
            }
            path.push(e);
            v = g.edge(e).other(v);
        }
        path.reverse();
        Some(path)
    }
}

/// Exact single-source distances to every vertex.
pub fn shortest_path_tree(g: &MultiGraph, source: Vertex) -> ShortestPathResult {
    let mut ws = DijkstraWorkspace::new();
    ws.run(g, source, None);
    let n = g.vertex_count();
    ShortestPathResult {
        source,
        dist: (0..n as Vertex).map(|v| ws.distance(v)).collect(),
        pred: (0..n)
            .map(|v| {
                let e = ws.pred[v];
                (e != NO_EDGE && ws.settled[v]).then_some(e)
            })
            .collect(),
    }
}

/// A rooted graph with the geodesic from `root` to `target` coloured red.
#[derive(Clone, Debug)]
pub struct GeodesicNeighbourhood<'g> {
    pub graph: &'g MultiGraph,
    pub root: Vertex,
    pub target: Vertex,
    /// Red edges in path order from the root; empty means all-black.
    pub red_path: Vec<EdgeId>,
    pub distance: f64,
}

impl GeodesicNeighbourhood<'_> {
    pub fn is_red(&self, e: EdgeId) -> bool {
        self.red_path.contains(&e)
    }

    pub fn is_all_black(&self) -> bool {
        self.red_path.is_empty()
    }
}

pub fn colour_geodesic(g: &MultiGraph, o: Vertex, u: Vertex) -> GeodesicNeighbourhood<'_> {
    colour_geodesic_with(&mut DijkstraWorkspace::new(), g, o, u)
}

pub fn colour_geodesic_with<'g>(
    ws: &mut DijkstraWorkspace,
    g: &'g MultiGraph,
    o: Vertex,
    u: Vertex,
) -> GeodesicNeighbourhood<'g> {
    ws.run(g, o, Some(u));
    let red_path = ws.path_to(g, u).unwrap_or_default();
    GeodesicNeighbourhood {
        graph: g,
        root: o,
        target: u,
        red_path,
        distance: ws.distance(u),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ColouredEdge {
    pub a: u32,
    pub b: u32,
    pub weight: f64,
    pub red: bool,
}

/// A small rooted, coloured, weighted multigraph with vertices `0..n` and
/// the root at 0. Both truncated graph neighbourhoods and truncated limit
/// trees are expressed in this form.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RootedGraph {
    pub vertex_count: usize,
    pub edges: Vec<ColouredEdge>,
}

impl RootedGraph {
    pub fn single_vertex() -> Self {
        Self {
            vertex_count: 1,
            edges: Vec::new(),
        }
    }

    pub fn red_count(&self) -> usize {
        self.edges.iter().filter(|e| e.red).count()
    }

    pub fn is_all_black(&self) -> bool {
        self.edges.iter().all(|e| !e.red)
    }

    /// Hop distances from the root; unreachable vertices get `u32::MAX`.
    pub fn hop_distances(&self) -> Vec<u32> {
        let mut adj = vec![Vec::new(); self.vertex_count];
        for e in &self.edges {
            adj[e.a as usize].push(e.b);
            adj[e.b as usize].push(e.a);
        }
        let mut hop = vec![u32::MAX; self.vertex_count];
        let mut queue = VecDeque::from([0u32]);
        hop[0] = 0;
        while let Some(v) = queue.pop_front() {
            for &x in &adj[v as usize] {
                if hop[x as usize] == u32::MAX {
                    hop[x as usize] = hop[v as usize] + 1;
                    queue.push_back(x);
                }
            }
        }
        hop
    }

    /// Red edges form one simple path starting at the root (or there are
    /// none).
    pub fn red_edges_form_root_path(&self) -> bool {
        let red: Vec<&ColouredEdge> = self.edges.iter().filter(|e| e.red).collect();
        if red.is_empty() {
            return true;
        }
        let mut visited = HashSet::from([0u32]);
        let mut at = 0u32;
        let mut used = vec![false; red.len()];
        for _ in 0..red.len() {
            let next = red
                .iter()
                .enumerate()
                .find(|(i, e)| !used[*i] && (e.a == at || e.b == at) && e.a != e.b);
            let Some((i, e)) = next else { return false };
            used[i] = true;
            at = if e.a == at { e.b } else { e.a };
            if !visited.insert(at) {
                return false;
            }
        }
        true
    }
}

/// The R-ball of a geodesic neighbourhood: vertices within hop distance `R`
/// of the root, with every edge between them.
#[derive(Clone, Debug)]
pub struct TruncatedNeighbourhood {
    pub graph: RootedGraph,
    pub radius: u32,
    /// Original vertex id of each retained vertex; entry 0 is the root.
    pub original: Vec<Vertex>,
    /// Original id of the geodesic's far endpoint, which may lie outside.
    pub target: Vertex,
    /// Whether a geodesic between root and target exists at all.
    pub connected: bool,
    pub distance: f64,
}

pub fn truncate(nb: &GeodesicNeighbourhood<'_>, radius: u32) -> TruncatedNeighbourhood {
    let g = nb.graph;
    let mut index: HashMap<Vertex, u32> = HashMap::from([(nb.root, 0)]);
    let mut original = vec![nb.root];
    let mut hop = vec![0u32];
    let mut head = 0;
    while head < original.len() {
        let v = original[head];
        let h = hop[head];
        head += 1;
        if h == radius {
            continue;
        }
        for (x, _) in g.neighbours(v) {
            if let std::collections::hash_map::Entry::Vacant(slot) = index.entry(x) {
                slot.insert(original.len() as u32);
                original.push(x);
                hop.push(h + 1);
            }
        }
    }
    let mut edges = Vec::new();
    let mut seen = HashSet::new();
    for (i, &v) in original.iter().enumerate() {
        for (x, e) in g.neighbours(v) {
            let Some(&j) = index.get(&x) else { continue };
            if (j as usize) < i || !seen.insert(e) {
                continue;
            }
            edges.push(ColouredEdge {
                a: i as u32,
                b: j,
                weight: g.edge(e).weight,
                red: nb.is_red(e),
            });
        }
    }
    TruncatedNeighbourhood {
        graph: RootedGraph {
            vertex_count: original.len(),
            edges,
        },
        radius,
        original,
        target: nb.target,
        connected: nb.distance.is_finite() && nb.root != nb.target,
        distance: nb.distance,
    }
}

/// Draws independent uniform `o` and `u`, colours their geodesic and
/// truncates at `radius`. Reuse one sampler per worker.
#[derive(Clone, Debug, Default)]
pub struct NeighbourhoodSampler {
    ws: DijkstraWorkspace,
}

impl NeighbourhoodSampler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sample<R: Rng + ?Sized>(
        &mut self,
        g: &MultiGraph,
        radius: u32,
        rng: &mut R,
    ) -> TruncatedNeighbourhood {
        let n = g.vertex_count() as Vertex;
        let o = rng.random_range(0..n);
        let u = rng.random_range(0..n);
        self.sample_pair(g, radius, o, u)
    }

    pub fn sample_pair(
        &mut self,
        g: &MultiGraph,
        radius: u32,
        o: Vertex,
        u: Vertex,
    ) -> TruncatedNeighbourhood {
        let nb = colour_geodesic_with(&mut self.ws, g, o, u);
        truncate(&nb, radius)
    }

    pub fn workspace(&mut self) -> &mut DijkstraWorkspace {
        &mut self.ws
    }
}

pub fn sample_geodesic_neighbourhood<R: Rng + ?Sized>(
    g: &MultiGraph,
    radius: u32,
    rng: &mut R,
) -> TruncatedNeighbourhood {
    NeighbourhoodSampler::new().sample(g, radius, rng)
}
