//! Configuration multigraphs: i.i.d. degree sequences, uniform half-edge
//! pairing and i.i.d. edge weights.
//!
//! Half-edges are stored contiguously per vertex (CSR layout), so walking the
//! adjacency of a vertex is a scan over one slice. Self-loops and parallel
//! edges are kept.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::Rng;

use crate::error::{Error, Result};
use crate::models::{DegreeModel, WeightModel};

pub type Vertex = u32;
pub type EdgeId = u32;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DegreeSequence {
    degrees: Vec<u32>,
    /// Vertex whose degree was bumped to make the half-edge total even.
    fixup: Option<Vertex>,
}

impl DegreeSequence {
    pub fn new(degrees: Vec<u32>) -> Result<Self> {
        if degrees.is_empty() {
            return Err(Error::InvalidModel("degree sequence needs n >= 1".into()));
        }
        Ok(Self {
            degrees,
            fixup: None,
        })
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn len(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degrees.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.degrees.iter().map(|&d| d as u64).sum()
    }

    pub fn fixup(&self) -> Option<Vertex> {
        self.fixup
    }
}

/// Draw `n` i.i.d. degrees; an odd total gets one extra half-edge at a
/// uniformly chosen vertex.
pub fn sample_degree_sequence<R: Rng + ?Sized>(
    n: usize,
    d: &DegreeModel,
    rng: &mut R,
) -> Result<DegreeSequence> {
    let mut seq = DegreeSequence::new((0..n).map(|_| d.sample(rng)).collect())?;
    if seq.total() % 2 == 1 {
        let v = rng.random_range(0..n);
        seq.degrees[v] += 1;
        seq.fixup = Some(v as Vertex);
    }
    Ok(seq)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub a: Vertex,
    pub b: Vertex,
    pub weight: f64,
}

impl Edge {
    pub fn is_loop(&self) -> bool {
        self.a == self.b
    }

    pub fn other(&self, v: Vertex) -> Vertex {
        if self.a == v {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiGraph {
    offsets: Vec<u32>,
    /// Partner half-edge of each half-edge.
    partner: Vec<u32>,
    /// Edge index of each half-edge.
    edge_of: Vec<EdgeId>,
    owner: Vec<Vertex>,
    edges: Vec<Edge>,
    weighted: bool,
    fixup: Option<Vertex>,
    seed: u64,
}

impl MultiGraph {
    fn with_degrees(degrees: &[u32]) -> (Vec<u32>, Vec<Vertex>) {
        let mut offsets = Vec::with_capacity(degrees.len() + 1);
        let mut owner = Vec::new();
        offsets.push(0u32);
        for (v, &deg) in degrees.iter().enumerate() {
            owner.extend(std::iter::repeat_n(v as Vertex, deg as usize));
            offsets.push(owner.len() as u32);
        }
        (offsets, owner)
    }

    /// Build from an explicit edge list; half-edges are numbered per vertex in
    /// edge order.
    pub fn from_edges(n: usize, edges: &[(Vertex, Vertex, f64)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidModel("graph needs n >= 1".into()));
        }
        let mut degrees = vec![0u32; n];
        for &(a, b, w) in edges {
            if a as usize >= n || b as usize >= n {
                return Err(Error::Parse(format!("edge {a}-{b} out of range for n={n}")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Parse(format!("edge {a}-{b} has non-positive weight {w}")));
            }
            degrees[a as usize] += 1;
            degrees[b as usize] += 1;
        }
        let (offsets, owner) = Self::with_degrees(&degrees);
        let mut cursor: Vec<u32> = offsets[..n].to_vec();
        let mut partner = vec![0u32; owner.len()];
        let mut edge_of = vec![0u32; owner.len()];
        let mut out = Vec::with_capacity(edges.len());
        for (e, &(a, b, weight)) in edges.iter().enumerate() {
            let ha = cursor[a as usize];
            cursor[a as usize] += 1;
            let hb = cursor[b as usize];
            cursor[b as usize] += 1;
            partner[ha as usize] = hb;
            partner[hb as usize] = ha;
            edge_of[ha as usize] = e as EdgeId;
            edge_of[hb as usize] = e as EdgeId;
            out.push(Edge { a, b, weight });
        }
        Ok(Self {
            offsets,
            partner,
            edge_of,
            owner,
            edges: out,
            weighted: true,
            fixup: None,
            seed: 0,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn half_edge_count(&self) -> usize {
        self.partner.len()
    }

    pub fn degree(&self, v: Vertex) -> u32 {
        self.offsets[v as usize + 1] - self.offsets[v as usize]
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e as usize]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn is_weighted(&self) -> bool {
        self.weighted
    }

    pub fn fixup(&self) -> Option<Vertex> {
        self.fixup
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }

    pub fn partner(&self, h: u32) -> u32 {
        self.partner[h as usize]
    }

    /// `(neighbour, edge)` for every half-edge of `v`; a self-loop shows up
    /// twice.
    pub fn neighbours(&self, v: Vertex) -> impl Iterator<Item = (Vertex, EdgeId)> + '_ {
        let range = self.offsets[v as usize] as usize..self.offsets[v as usize + 1] as usize;
        range.map(move |h| {
            let p = self.partner[h] as usize;
            (self.owner[p], self.edge_of[h])
        })
    }

    /// Component label per vertex, labels in order of first appearance.
    pub fn components(&self) -> Vec<u32> {
        let n = self.vertex_count();
        let mut label = vec![u32::MAX; n];
        let mut stack = Vec::new();
        let mut next = 0;
        for s in 0..n {
            if label[s] != u32::MAX {
                continue;
            }
            label[s] = next;
            stack.push(s as Vertex);
            while let Some(v) = stack.pop() {
                for (x, _) in self.neighbours(v) {
                    if label[x as usize] == u32::MAX {
                        label[x as usize] = next;
                        stack.push(x);
                    }
                }
            }
            next += 1;
        }
        label
    }

    /// Vertices of a largest connected component, ascending.
    pub fn largest_component(&self) -> Vec<Vertex> {
        let label = self.components();
        let count = label.iter().copied().max().map_or(0, |m| m as usize + 1);
        let mut sizes = vec![0usize; count];
        for &l in &label {
            sizes[l as usize] += 1;
        }
        let best = (0..count).max_by_key(|&c| (sizes[c], std::cmp::Reverse(c))).unwrap_or(0);
        (0..label.len() as Vertex)
            .filter(|&v| label[v as usize] == best as u32)
            .collect()
    }

    /// Edge-list dump: header `n m seed`, then `u v weight` per edge.
    /// Weights use the shortest representation that parses back to the same
    /// bits.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        let mut buf = String::new();
        writeln!(buf, "{} {} {}", self.vertex_count(), self.edge_count(), self.seed).ok();
        for e in &self.edges {
            writeln!(buf, "{} {} {:?}", e.a, e.b, e.weight).ok();
        }
        out.write_all(buf.as_bytes())?;
        Ok(())
    }

    pub fn read_edge_list<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("missing header".into()))??;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 3 {
            return Err(Error::Parse(format!("bad header {header:?}")));
        }
        let parse_u = |s: &str| {
            s.parse::<u64>()
                .map_err(|e| Error::Parse(format!("{s:?}: {e}")))
        };
        let n = parse_u(head[0])? as usize;
        let m = parse_u(head[1])? as usize;
        let seed = parse_u(head[2])?;
        let mut edges = Vec::with_capacity(m);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(Error::Parse(format!("bad edge line {line:?}")));
            }
            let w = f[2]
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("{:?}: {e}", f[2])))?;
            edges.push((parse_u(f[0])? as Vertex, parse_u(f[1])? as Vertex, w));
        }
        if edges.len() != m {
            return Err(Error::Parse(format!("header says {m} edges, found {}", edges.len())));
        }
        let mut g = Self::from_edges(n, &edges)?;
        g.seed = seed;
        Ok(g)
    }
}

/// Uniform perfect matching of the half-edges: repeatedly match the first
/// unmatched half-edge with a uniformly chosen other unmatched one.
pub fn pair_half_edges<R: Rng + ?Sized>(seq: &DegreeSequence, rng: &mut R) -> Result<MultiGraph> {
    let total = seq.total();
    if total % 2 == 1 {
        return Err(Error::OddHalfEdgeCount(total));
    }
    let (offsets, owner) = MultiGraph::with_degrees(seq.degrees());
    let l = owner.len();
    let mut pool: Vec<u32> = (0..l as u32).collect();
    let mut partner = vec![0u32; l];
    let mut edge_of = vec![0u32; l];
    let mut edges = Vec::with_capacity(l / 2);
    let mut i = 0;
    while i < l {
        let j = rng.random_range(i + 1..l);
        pool.swap(i + 1, j);
        let (ha, hb) = (pool[i], pool[i + 1]);
        partner[ha as usize] = hb;
        partner[hb as usize] = ha;
        let e = edges.len() as EdgeId;
        edge_of[ha as usize] = e;
        edge_of[hb as usize] = e;
        edges.push(Edge {
            a: owner[ha as usize],
            b: owner[hb as usize],
            weight: 1.0,
        });
        i += 2;
    }
    Ok(MultiGraph {
        offsets,
        partner,
        edge_of,
        owner,
        edges,
        weighted: false,
        fixup: seq.fixup(),
        seed: 0,
    })
}

/// One independent draw from `w` per edge, loops and parallel edges included.
pub fn assign_weights<R: Rng + ?Sized>(
    mut g: MultiGraph,
    w: &WeightModel,
    rng: &mut R,
) -> MultiGraph {
    for e in &mut g.edges {
        e.weight = w.sample(rng);
    }
    g.weighted = true;
    g
}

/// Degree sequence, pairing and weights in one go, each from its own
/// sub-stream of `rng`.
pub fn generate(
    n: usize,
    d: &DegreeModel,
    w: &WeightModel,
    rng: &crate::rng::RngStream,
) -> Result<MultiGraph> {
    use crate::rng::purpose;
    let mut graph_rng = rng.substream(purpose::GRAPH);
    let seq = sample_degree_sequence(n, d, &mut graph_rng)?;
    let g = pair_half_edges(&seq, &mut graph_rng)?;
    let mut g = assign_weights(g, w, &mut rng.substream(purpose::WEIGHTS));
    g.seed = rng.seed();
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn degree_sequence_examples() {
        let mut rng = RngStream::new(1, 0);
        let two = DegreeModel::deterministic(2).unwrap();
        let one = DegreeModel::deterministic(1).unwrap();
        let s = sample_degree_sequence(1, &two, &mut rng).unwrap();
        assert_eq!(s.degrees(), &[2]);
        let s = sample_degree_sequence(2, &one, &mut rng).unwrap();
        assert_eq!((s.degrees(), s.fixup()), (&[1, 1][..], None));
        let s = sample_degree_sequence(3, &one, &mut rng).unwrap();
        let v = s.fixup().expect("odd sum must be fixed");
        assert_eq!(s.total(), 4);
        for (i, &d) in s.degrees().iter().enumerate() {
            assert_eq!(d, if i == v as usize { 2 } else { 1 });
        }
    }

    #[test]
    fn odd_total_cannot_be_paired() {
        let seq = DegreeSequence::new(vec![1, 2]).unwrap();
        let err = pair_half_edges(&seq, &mut RngStream::new(0, 0)).unwrap_err();
        assert!(matches!(err, Error::OddHalfEdgeCount(3)));
    }

    #[test]
    fn pairing_small_cases() {
        let mut rng = RngStream::new(3, 0);
        let g = pair_half_edges(&DegreeSequence::new(vec![1, 1]).unwrap(), &mut rng).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert!(!g.edge(0).is_loop());

        // d = (3, 1): every matching gives one loop at 0 and the edge 0-1
        for _ in 0..50 {
            let g = pair_half_edges(&DegreeSequence::new(vec![3, 1]).unwrap(), &mut rng).unwrap();
            let loops = g.edges().iter().filter(|e| e.is_loop()).count();
            assert_eq!(loops, 1);
            assert!(g.edges().iter().any(|e| !e.is_loop() && e.other(1) == 0));
        }
    }

    #[test]
    fn weights_cover_every_edge() {
        let mut rng = RngStream::new(4, 0);
        let g = pair_half_edges(&DegreeSequence::new(vec![0, 0]).unwrap(), &mut rng).unwrap();
        let g = assign_weights(g, &WeightModel::Exponential { rate: 1.0 }, &mut rng);
        assert_eq!(g.edge_count(), 0);

        let d = DegreeModel::from_atoms(&[(1, 0.5), (3, 0.5)]).unwrap();
        let g = generate(500, &d, &WeightModel::Uniform { a: 0.0, b: 1.0 }, &rng).unwrap();
        assert!(g.is_weighted());
        assert!(g.edges().iter().all(|e| e.weight > 0.0));
        let sum: u64 = (0..g.vertex_count() as Vertex).map(|v| g.degree(v) as u64).sum();
        assert_eq!(sum, 2 * g.edge_count() as u64);
    }

    #[test]
    fn edge_list_round_trip_is_bit_exact() {
        let d = DegreeModel::from_atoms(&[(0, 0.1), (1, 0.3), (3, 0.6)]).unwrap();
        let g = generate(200, &d, &WeightModel::Weibull { shape: 0.5, scale: 3.0 }, &RngStream::new(77, 2))
            .unwrap();
        let mut first = Vec::new();
        g.write_edge_list(&mut first).unwrap();
        let back = MultiGraph::read_edge_list(first.as_slice()).unwrap();
        assert_eq!(back.vertex_count(), g.vertex_count());
        for (x, y) in back.edges().iter().zip(g.edges()) {
            assert_eq!((x.a, x.b, x.weight.to_bits()), (y.a, y.b, y.weight.to_bits()));
        }
        let mut second = Vec::new();
        back.write_edge_list(&mut second).unwrap();
        assert_eq!(first, second);
        assert_eq!(back.seed(), 77);
    }

    #[test]
    fn malformed_edge_lists_are_rejected() {
        assert!(MultiGraph::read_edge_list("".as_bytes()).is_err());
        assert!(MultiGraph::read_edge_list("2 1 0\n0 5 1.0\n".as_bytes()).is_err());
        assert!(MultiGraph::read_edge_list("2 2 0\n0 1 1.0\n".as_bytes()).is_err());
        assert!(MultiGraph::read_edge_list("2 1 0\n0 1 -1.0\n".as_bytes()).is_err());
    }

    #[test]
    fn largest_component_on_two_pieces() {
        let g = MultiGraph::from_edges(5, &[(0, 1, 1.0), (2, 3, 1.0), (3, 4, 1.0)]).unwrap();
        assert_eq!(g.largest_component(), vec![2, 3, 4]);
    }
}
