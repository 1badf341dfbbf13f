//! Canonical codes for small rooted, coloured multigraphs.
//!
//! Pendant trees are peeled off first and folded into AHU-style subtree
//! codes that become vertex labels; what remains (the 2-core plus the path
//! to the root) is canonized by individualization-refinement, keeping the
//! lexicographically smallest certificate. Truncated neighbourhoods are
//! almost always trees, so the search rarely branches.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpp::RootedGraph;
use crate::models::WeightModel;

pub const DEFAULT_VERTEX_CAP: usize = 10_000;
pub const DEFAULT_SEARCH_CAP: usize = 100_000;

const CODE_VERSION: u8 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodeOptions {
    /// 0 drops weights from the code; `b > 0` keeps the index of the
    /// equiprobable bin of `weight_model` each weight falls into.
    pub weight_bins: u32,
    pub weight_model: Option<WeightModel>,
    pub include_colour: bool,
    pub vertex_cap: usize,
    pub search_cap: usize,
}

impl Default for CodeOptions {
    fn default() -> Self {
        Self {
            weight_bins: 0,
            weight_model: None,
            include_colour: true,
            vertex_cap: DEFAULT_VERTEX_CAP,
            search_cap: DEFAULT_SEARCH_CAP,
        }
    }
}

impl CodeOptions {
    pub fn uncoloured() -> Self {
        Self {
            include_colour: false,
            ..Self::default()
        }
    }

    pub fn with_bins(mut self, bins: u32, model: WeightModel) -> Self {
        self.weight_bins = bins;
        self.weight_model = Some(model);
        self
    }

    /// Upper bin edges (quantiles of the weight law) for the configured bins.
    pub fn bin_edges(&self) -> Vec<f64> {
        match self.weight_model {
            Some(m) if self.weight_bins > 0 => (1..self.weight_bins)
                .map(|i| m.quantile_from_survival(1.0 - f64::from(i) / f64::from(self.weight_bins)))
                .collect(),
            _ => Vec::new(),
        }
    }

    fn edge_label(&self, red: bool, weight: f64) -> u64 {
        let colour = u64::from(self.include_colour && red);
        let bin = match self.weight_model {
            Some(m) if self.weight_bins > 0 => {
                let b = (m.cdf(weight) * f64::from(self.weight_bins)) as u32;
                u64::from(b.min(self.weight_bins - 1))
            }
            _ => 0,
        };
        (colour << 32) | bin
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalCode(Vec<u8>);

impl CanonicalCode {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        hex::decode(s)
            .map(CanonicalCode)
            .map_err(|e| Error::Parse(format!("bad code {s:?}: {e}")))
    }
}

/// Length-prefixed byte writer; prefixes make the concatenations injective.
#[derive(Default)]
struct Enc(Vec<u8>);

impl Enc {
    fn u32(&mut self, x: u32) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }

    fn u64(&mut self, x: u64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }

    fn bytes(&mut self, b: &[u8]) {
        self.u32(b.len() as u32);
        self.0.extend_from_slice(b);
    }
}

fn encode_labels(labels: &[u64]) -> Vec<u8> {
    let mut e = Enc::default();
    e.u32(labels.len() as u32);
    for &l in labels {
        e.u64(l);
    }
    e.0
}

/// Vertex label plus a sorted, run-length-encoded multiset of child entries.
fn subtree_code(base: &[u8], children: &mut [Vec<u8>]) -> Vec<u8> {
    children.sort_unstable();
    let mut runs: Vec<(u32, &[u8])> = Vec::new();
    for c in children.iter() {
        match runs.last_mut() {
            Some((n, prev)) if *prev == c.as_slice() => *n += 1,
            _ => runs.push((1, c)),
        }
    }
    let mut e = Enc::default();
    e.bytes(base);
    e.u32(runs.len() as u32);
    for (n, c) in runs {
        e.u32(n);
        e.bytes(c);
    }
    e.0
}

pub fn canonical_code(g: &RootedGraph, opts: &CodeOptions) -> Result<CanonicalCode> {
    let n = g.vertex_count;
    if n > opts.vertex_cap {
        return Err(Error::VertexCapExceeded {
            vertices: n,
            cap: opts.vertex_cap,
        });
    }
    let mut loops: Vec<Vec<u64>> = vec![Vec::new(); n];
    let mut pairs: BTreeMap<(u32, u32), Vec<u64>> = BTreeMap::new();
    for e in &g.edges {
        let label = opts.edge_label(e.red, e.weight);
        if e.a == e.b {
            loops[e.a as usize].push(label);
        } else {
            pairs.entry((e.a.min(e.b), e.a.max(e.b))).or_default().push(label);
        }
    }
    let mut adjacency: Vec<BTreeMap<u32, Vec<u8>>> = vec![BTreeMap::new(); n];
    for ((a, b), mut labels) in pairs {
        labels.sort_unstable();
        let bytes = encode_labels(&labels);
        adjacency[a as usize].insert(b, bytes.clone());
        adjacency[b as usize].insert(a, bytes);
    }
    let base: Vec<Vec<u8>> = (0..n)
        .map(|v| {
            loops[v].sort_unstable();
            let mut e = Enc::default();
            e.u32(u32::from(v == 0));
            e.bytes(&encode_labels(&loops[v]));
            e.0
        })
        .collect();

    // Peel pendant trees in rounds of simultaneous leaves, which keeps the
    // result labelling-invariant. Two adjacent non-root leaves (the last
    // edge of a rootless tree) stay for the search to handle.
    let mut degree: Vec<usize> = adjacency.iter().map(BTreeMap::len).collect();
    let mut removed = vec![false; n];
    let mut children: Vec<Vec<Vec<u8>>> = vec![Vec::new(); n];
    let mut in_round = vec![false; n];
    let mut round: Vec<usize> = (1..n).filter(|&v| degree[v] == 1).collect();
    while !round.is_empty() {
        round.retain(|&v| degree[v] == 1 && !removed[v]);
        round.sort_unstable();
        round.dedup();
        for &v in &round {
            in_round[v] = true;
        }
        let mut next = Vec::new();
        for &v in &round {
            let (&u, label) = adjacency[v]
                .iter()
                .find(|(u, _)| !removed[**u as usize])
                .expect("degree-1 vertex has a live neighbour");
            let u = u as usize;
            if u != 0 && in_round[u] {
                continue;
            }
            let code = subtree_code(&base[v], &mut children[v]);
            let mut entry = Enc::default();
            entry.bytes(label);
            entry.bytes(&code);
            children[u].push(entry.0);
            removed[v] = true;
            degree[u] -= 1;
            if degree[u] == 1 && u != 0 {
                next.push(u);
            }
        }
        for &v in &round {
            in_round[v] = false;
        }
        round = next;
    }

    let core: Vec<usize> = (0..n).filter(|&v| !removed[v]).collect();
    let labels: Vec<Vec<u8>> = core
        .iter()
        .map(|&v| subtree_code(&base[v], &mut children[v]))
        .collect();

    let mut out = Enc::default();
    out.0.push(CODE_VERSION);
    out.0.push(u8::from(opts.include_colour));
    out.u32(opts.weight_bins);
    if core.len() == 1 {
        out.0.push(b'T');
        out.bytes(&labels[0]);
    } else {
        out.0.push(b'G');
        let cert = certify_core(&core, &labels, &adjacency, &removed, opts.search_cap)?;
        out.bytes(&cert);
    }
    Ok(CanonicalCode(out.0))
}

pub fn is_isomorphic(g1: &RootedGraph, g2: &RootedGraph, opts: &CodeOptions) -> Result<bool> {
    Ok(canonical_code(g1, opts)? == canonical_code(g2, opts)?)
}

struct Core<'a> {
    labels: &'a [Vec<u8>],
    /// `(neighbour, edge label id)` per core vertex.
    adj: Vec<Vec<(usize, u32)>>,
    edge_labels: Vec<&'a [u8]>,
    leaves: usize,
    cap: usize,
    /// Individualized vertices on the current search path.
    path: Vec<usize>,
    /// Path, vertex order and certificate of the first leaf.
    first: Option<(Vec<usize>, Vec<usize>, Vec<u8>)>,
    /// Automorphisms found by matching leaves against the first one.
    autos: Vec<Vec<usize>>,
}

fn certify_core(
    core: &[usize],
    labels: &[Vec<u8>],
    adjacency: &[BTreeMap<u32, Vec<u8>>],
    removed: &[bool],
    cap: usize,
) -> Result<Vec<u8>> {
    let mut local = vec![usize::MAX; adjacency.len()];
    for (i, &v) in core.iter().enumerate() {
        local[v] = i;
    }
    let mut distinct: Vec<&[u8]> = core
        .iter()
        .flat_map(|&v| {
            adjacency[v]
                .iter()
                .filter(|(u, _)| !removed[**u as usize])
                .map(|(_, l)| l.as_slice())
        })
        .collect();
    distinct.sort_unstable();
    distinct.dedup();
    let adj = core
        .iter()
        .map(|&v| {
            adjacency[v]
                .iter()
                .filter(|(u, _)| !removed[**u as usize])
                .map(|(&u, l)| {
                    let id = distinct.binary_search(&l.as_slice()).unwrap() as u32;
                    (local[u as usize], id)
                })
                .collect()
        })
        .collect();
    let mut state = Core {
        labels,
        adj,
        edge_labels: distinct,
        leaves: 0,
        cap,
        path: Vec::new(),
        first: None,
        autos: Vec::new(),
    };

    let mut sorted: Vec<&Vec<u8>> = labels.iter().collect();
    sorted.sort_unstable();
    sorted.dedup();
    let colours: Vec<u64> = labels
        .iter()
        .map(|l| sorted.binary_search(&l).unwrap() as u64)
        .collect();
    let mut best = None;
    search(&mut state, colours, &mut best)?;
    Ok(best.expect("search visits at least one leaf"))
}

/// Colour refinement: recolour by (colour, multiset of (edge label,
/// neighbour colour)) until the number of classes stops growing. New colours
/// are ranks of sorted signatures, so the result is labelling-invariant.
fn refine(core: &Core<'_>, mut colours: Vec<u64>) -> Vec<u64> {
    let mut classes = count_classes(&colours);
    loop {
        let sigs: Vec<(u64, Vec<(u32, u64)>)> = (0..colours.len())
            .map(|v| {
                let mut nb: Vec<(u32, u64)> =
                    core.adj[v].iter().map(|&(u, l)| (l, colours[u])).collect();
                nb.sort_unstable();
                (colours[v], nb)
            })
            .collect();
        let mut sorted: Vec<&(u64, Vec<(u32, u64)>)> = sigs.iter().collect();
        sorted.sort_unstable();
        sorted.dedup();
        colours = sigs
            .iter()
            .map(|s| sorted.binary_search(&s).unwrap() as u64)
            .collect();
        let next = sorted.len();
        if next == classes {
            return colours;
        }
        classes = next;
    }
}

fn count_classes(colours: &[u64]) -> usize {
    let mut c = colours.to_vec();
    c.sort_unstable();
    c.dedup();
    c.len()
}

/// Individualization-refinement search for the least leaf certificate.
/// Returns `Some(depth)` to abandon every node deeper than `depth`: a leaf
/// matching the first leaf under an automorphism that fixes the path down to
/// `depth` shows the remaining subtree repeats one already searched.
fn search(core: &mut Core<'_>, colours: Vec<u64>, best: &mut Option<Vec<u8>>) -> Result<Option<usize>> {
    let colours = refine(core, colours);
    let mut members: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (v, &c) in colours.iter().enumerate() {
        members.entry(c).or_default().push(v);
    }
    let Some((_, cell)) = members.iter().find(|(_, vs)| vs.len() > 1) else {
        return leaf(core, &colours, best);
    };
    let cell = cell.clone();
    let depth = core.path.len();
    let mut tried: Vec<usize> = Vec::new();
    for v in cell {
        if !tried.is_empty() && shares_orbit(core, v, &tried) {
            continue;
        }
        tried.push(v);
        // v moves just ahead of its cell-mates
        let mut next: Vec<u64> = colours.iter().map(|&c| 2 * c + 1).collect();
        next[v] -= 1;
        core.path.push(v);
        let jump = search(core, next, best);
        core.path.pop();
        match jump? {
            Some(d) if d < depth => return Ok(Some(d)),
            _ => {}
        }
    }
    Ok(None)
}

fn leaf(core: &mut Core<'_>, colours: &[u64], best: &mut Option<Vec<u8>>) -> Result<Option<usize>> {
    core.leaves += 1;
    if core.leaves > core.cap {
        return Err(Error::SearchCapExceeded(core.cap));
    }
    let (order, cert) = certificate(core, colours);
    if best.as_ref().is_none_or(|b| cert < *b) {
        *best = Some(cert.clone());
    }
    let Some((first_path, first_order, first_cert)) = &core.first else {
        core.first = Some((core.path.clone(), order, cert));
        return Ok(None);
    };
    if cert != *first_cert {
        return Ok(None);
    }
    // equal certificates: order[i] -> first_order[i] is an automorphism
    let mut gamma = vec![0; order.len()];
    for (&v, &w) in order.iter().zip(first_order) {
        gamma[v] = w;
    }
    let split = core.path.iter().zip(first_path).take_while(|(a, b)| a == b).count();
    let jump = (split < core.path.len()
        && core.path[..split].iter().all(|&v| gamma[v] == v)
        && gamma[core.path[split]] == first_path[split])
        .then_some(split);
    core.autos.push(gamma);
    Ok(jump)
}

/// Whether `v` lies in the orbit of an already searched sibling under the
/// automorphisms found so far that fix the current path pointwise.
fn shares_orbit(core: &Core<'_>, v: usize, tried: &[usize]) -> bool {
    let n = core.labels.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for gamma in &core.autos {
        if core.path.iter().any(|&p| gamma[p] != p) {
            continue;
        }
        for (x, &gx) in gamma.iter().enumerate() {
            let (a, b) = (find(&mut parent, x), find(&mut parent, gx));
            parent[a] = b;
        }
    }
    let root = find(&mut parent, v);
    tried.iter().any(|&u| find(&mut parent, u) == root)
}

fn certificate(core: &Core<'_>, colours: &[u64]) -> (Vec<usize>, Vec<u8>) {
    let m = colours.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_unstable_by_key(|&v| colours[v]);
    let mut rank = vec![0u32; m];
    for (r, &v) in order.iter().enumerate() {
        rank[v] = r as u32;
    }
    let mut e = Enc::default();
    e.u32(m as u32);
    for &v in &order {
        e.bytes(&core.labels[v]);
    }
    let mut edges: Vec<(u32, u32, &[u8])> = Vec::new();
    for v in 0..m {
        for &(u, l) in &core.adj[v] {
            if rank[v] < rank[u] {
                edges.push((rank[v], rank[u], core.edge_labels[l as usize]));
            }
        }
    }
    edges.sort_unstable();
    e.u32(edges.len() as u32);
    for (a, b, l) in edges {
        e.u32(a);
        e.u32(b);
        e.bytes(l);
    }
    (order, e.0)
}
