#![allow(dead_code)]

use fpp_local::fpp::{ColouredEdge, RootedGraph};
use fpp_local::graph::MultiGraph;
use rand::seq::SliceRandom;
use rand::Rng;

pub fn coloured(n: usize, edges: &[(u32, u32, bool)]) -> RootedGraph {
    RootedGraph {
        vertex_count: n,
        edges: edges
            .iter()
            .map(|&(a, b, red)| ColouredEdge { a, b, weight: 1.0, red })
            .collect(),
    }
}

/// Root-fixing backtracking isomorphism test on edge-colour multisets,
/// ignoring weights. Candidates are pruned by (coloured degree, loop) profile.
pub fn brute_force_isomorphic(g1: &RootedGraph, g2: &RootedGraph, use_colour: bool) -> bool {
    let n = g1.vertex_count;
    if n != g2.vertex_count || g1.edges.len() != g2.edges.len() {
        return false;
    }
    let colour = |e: &ColouredEdge| u8::from(use_colour && e.red);
    let matrix = |g: &RootedGraph| {
        let mut m = vec![vec![[0u32; 2]; n]; n];
        for e in &g.edges {
            let (a, b, c) = (e.a as usize, e.b as usize, colour(e) as usize);
            m[a][b][c] += 1;
            if a != b {
                m[b][a][c] += 1;
            }
        }
        m
    };
    let (m1, m2) = (matrix(g1), matrix(g2));
    let profile = |m: &[Vec<[u32; 2]>], v: usize| {
        let mut p = [0u32; 4];
        for (u, cell) in m[v].iter().enumerate() {
            if u == v {
                p[2] += cell[0];
                p[3] += cell[1];
            } else {
                p[0] += cell[0];
                p[1] += cell[1];
            }
        }
        p
    };
    let p1: Vec<_> = (0..n).map(|v| profile(&m1, v)).collect();
    let p2: Vec<_> = (0..n).map(|v| profile(&m2, v)).collect();

    fn extend(
        m1: &[Vec<[u32; 2]>],
        m2: &[Vec<[u32; 2]>],
        p1: &[[u32; 4]],
        p2: &[[u32; 4]],
        map: &mut Vec<usize>,
        used: &mut [bool],
    ) -> bool {
        let v = map.len();
        if v == m1.len() {
            return true;
        }
        for u in 0..m1.len() {
            if used[u] || (v == 0) != (u == 0) || p1[v] != p2[u] {
                continue;
            }
            if m1[v][v] != m2[u][u] || (0..v).any(|w| m1[v][w] != m2[u][map[w]]) {
                continue;
            }
            used[u] = true;
            map.push(u);
            if extend(m1, m2, p1, p2, map, used) {
                return true;
            }
            map.pop();
            used[u] = false;
        }
        false
    }
    extend(&m1, &m2, &p1, &p2, &mut Vec::new(), &mut vec![false; n])
}

/// Random rooted coloured multigraph on at most `max_n` vertices, with
/// loops and parallel edges; connected from the root half of the time.
pub fn random_coloured_graph<R: Rng>(rng: &mut R, max_n: usize) -> RootedGraph {
    let n = rng.random_range(1..=max_n);
    let mut edges = Vec::new();
    if rng.random_bool(0.5) {
        for v in 1..n as u32 {
            edges.push((rng.random_range(0..v), v, rng.random_bool(0.3)));
        }
    }
    let extra = rng.random_range(0..=n);
    for _ in 0..extra {
        edges.push((
            rng.random_range(0..n as u32),
            rng.random_range(0..n as u32),
            rng.random_bool(0.3),
        ));
    }
    coloured(n, &edges)
}

/// Isomorphic copy: root stays 0, other labels permuted, edge order and
/// orientation shuffled.
pub fn relabel<R: Rng>(g: &RootedGraph, rng: &mut R) -> RootedGraph {
    let mut perm: Vec<u32> = (1..g.vertex_count as u32).collect();
    perm.shuffle(rng);
    perm.insert(0, 0);
    let mut edges: Vec<ColouredEdge> = g
        .edges
        .iter()
        .map(|e| {
            let (a, b) = (perm[e.a as usize], perm[e.b as usize]);
            let (a, b) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
            ColouredEdge { a, b, ..*e }
        })
        .collect();
    edges.shuffle(rng);
    RootedGraph {
        vertex_count: g.vertex_count,
        edges,
    }
}

/// A relabelled copy with one small change: a flipped colour or a moved
/// endpoint. Sometimes still isomorphic.
pub fn perturb<R: Rng>(g: &RootedGraph, rng: &mut R) -> RootedGraph {
    let mut h = relabel(g, rng);
    if h.edges.is_empty() {
        return h;
    }
    let i = rng.random_range(0..h.edges.len());
    if rng.random_bool(0.5) {
        h.edges[i].red = !h.edges[i].red;
    } else {
        h.edges[i].b = rng.random_range(0..h.vertex_count as u32);
    }
    h
}

/// Single-source Bellman–Ford distances.
pub fn bellman_ford(g: &MultiGraph, source: u32) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; g.vertex_count()];
    dist[source as usize] = 0.0;
    for _ in 0..g.vertex_count() {
        let mut changed = false;
        for e in g.edges() {
            let (a, b) = (e.a as usize, e.b as usize);
            if dist[a] + e.weight < dist[b] {
                dist[b] = dist[a] + e.weight;
                changed = true;
            }
            if dist[b] + e.weight < dist[a] {
                dist[a] = dist[b] + e.weight;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    dist
}
