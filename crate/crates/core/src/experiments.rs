//! Seeded, replica-parallel experiment drivers shared by the command line
//! and the test suites. Every replica owns its RNG stream, so outputs do not
//! depend on the worker count.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exploration::{
    classify_active, explore, init_exploration_with, ActiveClassification, CapKind, Caps,
    ExpandableGraph, RootedMultiGraph, TraceWriter,
};
use crate::fpp::{ColouredEdge, NeighbourhoodSampler, RootedGraph};
use crate::graph::generate;
use crate::limit_tree::{LimitSampler, LimitTree};
use crate::local_limit::{canonical_code, CodeHistogram, CodeOptions, HistogramMeta};
use crate::models::{DegreeModel, OffspringModel, WeightModel};
use crate::parallel::{map_indexed, Deadline};
use crate::rng::{purpose, RngStream};

const EXPLORE_GRAPH_STREAMS: u64 = 1 << 61;
const EXPLORE_TREE_STREAMS: u64 = 1 << 60;
const LIMIT_RECORD_STREAMS: u64 = 1 << 62;

#[derive(Clone, Debug, Serialize)]
pub struct EdgeRecord {
    pub a: u32,
    pub b: u32,
    pub weight: f64,
    pub red: bool,
}

fn edge_records(g: &RootedGraph) -> Vec<EdgeRecord> {
    g.edges
        .iter()
        .map(|&ColouredEdge { a, b, weight, red }| EdgeRecord { a, b, weight, red })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct NeighbourhoodRecord {
    pub graph: usize,
    pub o: u32,
    pub u: u32,
    pub connected: bool,
    pub distance: Option<f64>,
    pub vertices: usize,
    pub red: usize,
    pub code: String,
    pub edges: Vec<EdgeRecord>,
}

/// Coloured neighbourhoods on `graphs` independent graphs of size `n`, with
/// the same stream layout as the convergence report's graph side.
#[allow(clippy::too_many_arguments)]
pub fn neighbourhood_records(
    n: usize,
    point: usize,
    degree: &DegreeModel,
    weights: &WeightModel,
    radius: u32,
    samples: usize,
    graphs: usize,
    seed: u64,
    workers: usize,
    code: &CodeOptions,
) -> Result<Vec<NeighbourhoodRecord>> {
    let graphs = graphs.clamp(1, samples.max(1));
    let parts = map_indexed(graphs, workers, |k| -> Result<Vec<NeighbourhoodRecord>> {
        let count = samples / graphs + usize::from(k < samples % graphs);
        let stream = RngStream::new(seed, ((point as u64) << 32) | k as u64);
        let g = generate(n, degree, weights, &stream)?;
        let mut roots = stream.substream(purpose::ROOTS);
        let mut sampler = NeighbourhoodSampler::new();
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let nb = sampler.sample(&g, radius, &mut roots);
            let (o, u) = (nb.original[0], nb.target);
            out.push(NeighbourhoodRecord {
                graph: k,
                o,
                u,
                connected: nb.connected,
                distance: nb.distance.is_finite().then_some(nb.distance),
                vertices: nb.graph.vertex_count,
                red: nb.graph.red_count(),
                code: canonical_code(&nb.graph, code)?.to_hex(),
                edges: edge_records(&nb.graph),
            });
        }
        Ok(out)
    });
    let mut all = Vec::with_capacity(samples);
    for p in parts {
        all.extend(p?);
    }
    Ok(all)
}

#[derive(Clone, Debug, Serialize)]
pub struct LimitRecord {
    pub replica: usize,
    pub coin: bool,
    pub infinite: bool,
    pub vertices: usize,
    pub red: usize,
    pub diagnostics: crate::limit_tree::Diagnostics,
    pub code: String,
    pub edges: Vec<EdgeRecord>,
}

pub fn limit_records(
    sampler: &LimitSampler,
    radius: u32,
    samples: usize,
    seed: u64,
    workers: usize,
    code: &CodeOptions,
) -> Result<Vec<LimitRecord>> {
    map_indexed(samples, workers, |j| -> Result<LimitRecord> {
        let stream = RngStream::new(seed, LIMIT_RECORD_STREAMS + j as u64);
        let t = sampler.sample(radius, &stream)?;
        Ok(LimitRecord {
            replica: j,
            coin: t.coin,
            infinite: t.infinite,
            vertices: t.graph.vertex_count,
            red: t.graph.red_count(),
            diagnostics: t.diagnostics,
            code: canonical_code(&t.graph, code)?.to_hex(),
            edges: edge_records(&t.graph),
        })
    })
    .into_iter()
    .collect()
}

#[derive(Clone, Debug)]
pub struct ExplorationSettings {
    pub degree: DegreeModel,
    pub offspring: OffspringModel,
    pub weights: WeightModel,
    /// Graph size for the configuration-model side.
    pub n: usize,
    pub radius: u32,
    pub steps: usize,
    pub eps: f64,
    pub samples: usize,
    pub graphs: usize,
    pub seed: u64,
    pub workers: usize,
    pub code: CodeOptions,
    pub node_cap: usize,
    pub deadline: Deadline,
    /// Keep a CSV trace of replica 0.
    pub trace: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExplorationSummary {
    pub side: &'static str,
    pub replica: usize,
    pub steps: usize,
    pub exhausted: bool,
    pub capped: Option<CapKind>,
    pub d_v_star: Option<f64>,
    pub active: usize,
    pub classification: Option<ActiveClassification>,
    pub code: String,
    #[serde(skip)]
    pub trace: Option<String>,
}

fn run_replica<G: ExpandableGraph>(
    g: &mut G,
    settings: &ExplorationSettings,
    side: &'static str,
    replica: usize,
    stream: &RngStream,
) -> Result<ExplorationSummary> {
    let mut state = init_exploration_with(g, settings.radius, stream, true)?;
    let caps = Caps {
        max_steps: None,
        wall_clock: settings.deadline.remaining(),
    };
    let mut trace = (settings.trace && replica == 0)
        .then(|| TraceWriter::new(Vec::new(), settings.eps))
        .transpose()?;
    let outcome = explore(g, &mut state, settings.steps, caps, |s| match trace.as_mut() {
        Some(t) => t.record(s),
        None => Ok(()),
    })?;
    if outcome.capped == Some(CapKind::WallClock) {
        return Err(Error::RuntimeCap(format!("wall-clock limit reached exploring {side} replica {replica}")));
    }
    let sub = state.explored_subgraph();
    Ok(ExplorationSummary {
        side,
        replica,
        steps: state.steps,
        exhausted: outcome.exhausted,
        capped: outcome.capped,
        d_v_star: state.v_star_distance(),
        active: state.active_count(),
        classification: classify_active(&state, settings.eps).ok(),
        code: canonical_code(&sub, &settings.code)?.to_hex(),
        trace: trace.map(|t| String::from_utf8_lossy(&t.into_inner()).into_owned()),
    })
}

/// Explorations from uniform roots of configuration graphs.
pub fn explore_graph_replicas(settings: &ExplorationSettings) -> Result<Vec<ExplorationSummary>> {
    let graphs = settings.graphs.clamp(1, settings.samples.max(1));
    let parts = map_indexed(graphs, settings.workers, |k| -> Result<Vec<ExplorationSummary>> {
        let count = settings.samples / graphs + usize::from(k < settings.samples % graphs);
        let first = (0..k)
            .map(|i| settings.samples / graphs + usize::from(i < settings.samples % graphs))
            .sum::<usize>();
        let stream = RngStream::new(settings.seed, EXPLORE_GRAPH_STREAMS + k as u64);
        let g = generate(settings.n, &settings.degree, &settings.weights, &stream)?;
        let mut roots = stream.substream(purpose::ROOTS);
        let mut out = Vec::with_capacity(count);
        for i in 0..count {
            settings.deadline.check("graph exploration")?;
            let root = roots.random_range(0..settings.n as u32);
            let mut view = RootedMultiGraph { graph: &g, root };
            let replica = first + i;
            let tie = RngStream::new(settings.seed, EXPLORE_GRAPH_STREAMS + (1 << 40) + replica as u64);
            out.push(run_replica(&mut view, settings, "graph", replica, &tie)?);
        }
        Ok(out)
    });
    let mut all = Vec::with_capacity(settings.samples);
    for p in parts {
        all.extend(p?);
    }
    Ok(all)
}

/// Explorations of independent limit trees.
pub fn explore_tree_replicas(settings: &ExplorationSettings) -> Result<Vec<ExplorationSummary>> {
    map_indexed(settings.samples, settings.workers, |j| -> Result<ExplorationSummary> {
        settings.deadline.check("tree exploration")?;
        let stream = RngStream::new(settings.seed, EXPLORE_TREE_STREAMS + j as u64);
        let mut tree = LimitTree::new(
            &settings.degree,
            &settings.offspring,
            &settings.weights,
            stream.substream(purpose::TREE),
        );
        tree.set_node_cap(settings.node_cap);
        run_replica(&mut tree, settings, "tree", j, &stream)
    })
    .into_iter()
    .collect()
}

pub fn summaries_histogram(summaries: &[ExplorationSummary], meta: HistogramMeta) -> Result<CodeHistogram> {
    let mut h = CodeHistogram::new(meta);
    for s in summaries {
        h.add(crate::local_limit::CanonicalCode::from_hex(&s.code)?);
    }
    Ok(h)
}
