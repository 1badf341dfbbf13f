use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use serde::Serialize;

use super::{
    canonical_code, ks_two_sample, mean_sd, tv_with_uncertainty, CodeHistogram, CodeOptions,
    HistogramMeta, TvEstimate,
};
use crate::error::Result;
use crate::fpp::{NeighbourhoodSampler, RootedGraph};
use crate::graph::{generate, MultiGraph};
use crate::limit_tree::{Diagnostics, LimitSampler};
use crate::models::{DegreeModel, WeightModel};
use crate::parallel::{map_indexed, Deadline};
use crate::rng::{purpose, RngStream};

/// Limit-tree replicas use stream indices from here on, far from the
/// `(point << 32) | graph` indices of the graph side.
const LIMIT_STREAM_BASE: u64 = 1 << 62;

/// Weight samples kept per neighbourhood for the KS comparison; larger
/// graphs are subsampled uniformly.
const WEIGHTS_PER_SAMPLE: usize = 256;

#[derive(Clone, Debug)]
pub struct ConvergenceSettings {
    pub degree: DegreeModel,
    pub weights: WeightModel,
    pub limit: LimitSampler,
    pub radius: u32,
    pub n_grid: Vec<usize>,
    pub samples: usize,
    /// Independent graphs per grid point; samples are split evenly.
    pub graphs_per_point: usize,
    pub code: CodeOptions,
    pub seed: u64,
    pub workers: usize,
    pub bootstrap: usize,
    /// All-black probability of the limit object, `1 - ζ·P(infinite)`.
    pub black_frac_expected: f64,
    pub regime: String,
    pub deadline: Deadline,
}

impl ConvergenceSettings {
    fn meta(&self, n: Option<usize>) -> HistogramMeta {
        HistogramMeta {
            radius: self.radius,
            n,
            regime: self.regime.clone(),
            seed: self.seed,
            weight_bins: self.code.weight_bins,
            bin_edges: self.code.bin_edges(),
            include_colour: self.code.include_colour,
        }
    }
}

/// Sample statistics shared by both sides.
#[derive(Clone, Debug, Default)]
struct Tally {
    hist: CodeHistogram,
    black: u64,
    red_lengths: BTreeMap<usize, u64>,
    red_weights: Vec<f64>,
    all_weights: Vec<f64>,
}

impl Tally {
    fn record(&mut self, g: &RootedGraph, opts: &CodeOptions, rng: &mut RngStream) -> Result<()> {
        self.hist.add(canonical_code(g, opts)?);
        let red = g.red_count();
        if red == 0 {
            self.black += 1;
        }
        *self.red_lengths.entry(red).or_insert(0) += 1;
        self.red_weights
            .extend(g.edges.iter().filter(|e| e.red).map(|e| e.weight));
        if g.edges.len() <= WEIGHTS_PER_SAMPLE {
            self.all_weights.extend(g.edges.iter().map(|e| e.weight));
        } else {
            for _ in 0..WEIGHTS_PER_SAMPLE {
                self.all_weights
                    .push(g.edges[rng.random_range(0..g.edges.len())].weight);
            }
        }
        Ok(())
    }

    fn merge(&mut self, other: Tally) {
        self.hist.merge(&other.hist);
        self.black += other.black;
        for (k, v) in other.red_lengths {
            *self.red_lengths.entry(k).or_insert(0) += v;
        }
        self.red_weights.extend(other.red_weights);
        self.all_weights.extend(other.all_weights);
    }
}

/// Coloured neighbourhoods of configuration graphs of one size.
#[derive(Clone, Debug)]
pub struct GraphSide {
    pub n: usize,
    pub hist: CodeHistogram,
    pub black: u64,
    /// Samples with `o ≠ u` joined by a path.
    pub connected: u64,
    pub red_lengths: BTreeMap<usize, u64>,
    pub red_weights: Vec<f64>,
    pub all_weights: Vec<f64>,
    /// Graphs whose degree sum needed the odd-sum fixup.
    pub fixups: usize,
}

impl GraphSide {
    pub fn samples(&self) -> u64 {
        self.hist.total()
    }

    pub fn black_fraction(&self) -> f64 {
        self.black as f64 / self.samples() as f64
    }

    pub fn sample(settings: &ConvergenceSettings, n: usize, point: usize) -> Result<Self> {
        let graphs = settings.graphs_per_point.clamp(1, settings.samples.max(1));
        let parts = map_indexed(graphs, settings.workers, |k| -> Result<(Tally, u64, bool)> {
            let count = settings.samples / graphs + usize::from(k < settings.samples % graphs);
            let stream = RngStream::new(settings.seed, ((point as u64) << 32) | k as u64);
            let g = generate(n, &settings.degree, &settings.weights, &stream)?;
            let mut roots = stream.substream(purpose::ROOTS);
            let mut sub = stream.substream(purpose::BOOTSTRAP);
            let mut sampler = NeighbourhoodSampler::new();
            let mut tally = Tally {
                hist: CodeHistogram::new(settings.meta(Some(n))),
                ..Tally::default()
            };
            let mut connected = 0;
            for _ in 0..count {
                settings.deadline.check("graph sampling")?;
                let nb = sampler.sample(&g, settings.radius, &mut roots);
                connected += u64::from(nb.connected);
                tally.record(&nb.graph, &settings.code, &mut sub)?;
            }
            Ok((tally, connected, g.fixup().is_some()))
        });
        let mut total = Tally {
            hist: CodeHistogram::new(settings.meta(Some(n))),
            ..Tally::default()
        };
        let mut connected = 0;
        let mut fixups = 0;
        for part in parts {
            let (t, c, f) = part?;
            total.merge(t);
            connected += c;
            fixups += usize::from(f);
        }
        Ok(GraphSide {
            n,
            hist: total.hist,
            black: total.black,
            connected,
            red_lengths: total.red_lengths,
            red_weights: total.red_weights,
            all_weights: total.all_weights,
            fixups,
        })
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct LimitSummary {
    pub samples: u64,
    pub black_frac: f64,
    /// Fraction of trees declared infinite by the regime's proxy.
    pub infinite_frac: f64,
    pub coin_frac: f64,
    pub red_lengths: BTreeMap<usize, u64>,
    /// Mean of the Malthusian proxy `M̂(root)` or of the last birth time.
    pub mean_diagnostic: f64,
}

/// Coloured limit trees.
#[derive(Clone, Debug)]
pub struct LimitSide {
    pub hist: CodeHistogram,
    pub summary: LimitSummary,
    pub red_weights: Vec<f64>,
    pub all_weights: Vec<f64>,
}

impl LimitSide {
    pub fn sample(settings: &ConvergenceSettings) -> Result<Self> {
        let parts = map_indexed(settings.samples, settings.workers, |j| -> Result<_> {
            settings.deadline.check("limit sampling")?;
            let stream = RngStream::new(settings.seed, LIMIT_STREAM_BASE + j as u64);
            let tree = settings.limit.sample(settings.radius, &stream)?;
            let mut tally = Tally {
                hist: CodeHistogram::new(settings.meta(None)),
                ..Tally::default()
            };
            tally.record(&tree.graph, &settings.code, &mut stream.substream(purpose::BOOTSTRAP))?;
            let diagnostic = match tree.diagnostics {
                Diagnostics::Malthusian { root_martingale, .. } => root_martingale,
                Diagnostics::Explosive { last_birth, .. } => last_birth,
            };
            Ok((tally, tree.infinite, tree.coin, diagnostic))
        });
        let mut total = Tally {
            hist: CodeHistogram::new(settings.meta(None)),
            ..Tally::default()
        };
        let (mut infinite, mut coins, mut diag) = (0u64, 0u64, 0.0);
        for part in parts {
            let (t, inf, coin, d) = part?;
            total.merge(t);
            infinite += u64::from(inf);
            coins += u64::from(coin);
            diag += d;
        }
        let samples = total.hist.total();
        let s = samples as f64;
        Ok(LimitSide {
            summary: LimitSummary {
                samples,
                black_frac: total.black as f64 / s,
                infinite_frac: infinite as f64 / s,
                coin_frac: coins as f64 / s,
                red_lengths: total.red_lengths,
                mean_diagnostic: diag / s,
            },
            hist: total.hist,
            red_weights: total.red_weights,
            all_weights: total.all_weights,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PointReport {
    pub n: usize,
    pub samples: u64,
    pub tv: f64,
    pub tv_se: f64,
    pub tv_null: f64,
    pub tv_null_se: f64,
    pub black_frac: f64,
    pub black_frac_se: f64,
    pub black_frac_expected: f64,
    pub connected_frac: f64,
    pub ks_red: f64,
    pub ks_all: f64,
    /// `max(ks_red, ks_all)`.
    pub ks_weights: f64,
    pub graph_support: usize,
    pub limit_support: usize,
    pub fixups: usize,
    pub red_lengths: BTreeMap<usize, u64>,
}

impl PointReport {
    pub fn compare(
        graph: &GraphSide,
        limit: &LimitSide,
        expected: f64,
        bootstrap: usize,
        rng: &RngStream,
    ) -> Result<Self> {
        let TvEstimate {
            tv,
            se,
            null_mean,
            null_se,
        } = tv_with_uncertainty(&graph.hist, &limit.hist, bootstrap, rng)?;
        let samples = graph.samples();
        let p = graph.black_fraction();
        let ks_red = ks_two_sample(&graph.red_weights, &limit.red_weights);
        let ks_all = ks_two_sample(&graph.all_weights, &limit.all_weights);
        Ok(PointReport {
            n: graph.n,
            samples,
            tv,
            tv_se: se,
            tv_null: null_mean,
            tv_null_se: null_se,
            black_frac: p,
            black_frac_se: (p * (1.0 - p) / samples as f64).sqrt(),
            black_frac_expected: expected,
            connected_frac: graph.connected as f64 / samples as f64,
            ks_red,
            ks_all,
            ks_weights: ks_red.max(ks_all),
            graph_support: graph.hist.support(),
            limit_support: limit.hist.support(),
            fixups: graph.fixups,
            red_lengths: graph.red_lengths.clone(),
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub radius: u32,
    pub regime: String,
    pub seed: u64,
    pub weight_bins: u32,
    pub include_colour: bool,
    pub limit: LimitSummary,
    pub points: Vec<PointReport>,
    #[serde(skip)]
    pub limit_hist: CodeHistogram,
    #[serde(skip)]
    pub graph_hists: Vec<CodeHistogram>,
}

impl ConvergenceReport {
    pub const CSV_HEADER: &'static str = "n,samples,tv,tv_se,black_frac,black_frac_expected,ks_weights";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
                p.n, p.samples, p.tv, p.tv_se, p.black_frac, p.black_frac_expected, p.ks_weights
            )
            .ok();
        }
        out
    }
}

/// TV between coloured graph neighbourhoods and coloured limit trees at each
/// grid size. One limit sample is shared by all grid points.
pub fn convergence_report(settings: &ConvergenceSettings) -> Result<ConvergenceReport> {
    let limit = LimitSide::sample(settings)?;
    let mut points = Vec::new();
    let mut graph_hists = Vec::new();
    for (i, &n) in settings.n_grid.iter().enumerate() {
        let graph = GraphSide::sample(settings, n, i)?;
        let rng = RngStream::new(settings.seed, LIMIT_STREAM_BASE - 1 - i as u64);
        points.push(PointReport::compare(
            &graph,
            &limit,
            settings.black_frac_expected,
            settings.bootstrap,
            &rng,
        )?);
        graph_hists.push(graph.hist);
    }
    Ok(ConvergenceReport {
        radius: settings.radius,
        regime: settings.regime.clone(),
        seed: settings.seed,
        weight_bins: settings.code.weight_bins,
        include_colour: settings.code.include_colour,
        limit: limit.summary,
        points,
        limit_hist: limit.hist,
        graph_hists,
    })
}

/// Mean weighted distance between two uniform vertices of the largest
/// component, over `graphs` independent graphs of size `n`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DistanceSample {
    pub n: usize,
    pub mean: f64,
    pub se: f64,
    pub pairs: usize,
    pub giant_fraction: f64,
}

pub fn giant_distance(
    n: usize,
    degree: &DegreeModel,
    weights: &WeightModel,
    graphs: usize,
    pairs_per_graph: usize,
    seed: u64,
    workers: usize,
) -> Result<DistanceSample> {
    let parts = map_indexed(graphs, workers, |k| -> Result<(Vec<f64>, f64)> {
        let stream = RngStream::new(seed, ((n as u64) << 20) | k as u64);
        let g: MultiGraph = generate(n, degree, weights, &stream)?;
        let giant = g.largest_component();
        let mut rng = stream.substream(purpose::ROOTS);
        let mut sampler = NeighbourhoodSampler::new();
        let mut out = Vec::with_capacity(pairs_per_graph);
        while out.len() < pairs_per_graph {
            let o = giant[rng.random_range(0..giant.len())];
            let u = giant[rng.random_range(0..giant.len())];
            if o == u {
                continue;
            }
            out.push(sampler.sample_pair(&g, 0, o, u).distance);
        }
        Ok((out, giant.len() as f64 / n as f64))
    });
    let mut all = Vec::new();
    let mut giant = 0.0;
    for p in parts {
        let (d, f) = p?;
        all.extend(d);
        giant += f;
    }
    let (mean, sd) = mean_sd(&all);
    Ok(DistanceSample {
        n,
        mean,
        se: sd / (all.len() as f64).sqrt(),
        pairs: all.len(),
        giant_fraction: giant / graphs as f64,
    })
}

/// Ordinary least-squares `(slope, intercept, slope s.e.)` of `y` on `x`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let se = if x.len() > 2 {
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, intercept, se)
}
