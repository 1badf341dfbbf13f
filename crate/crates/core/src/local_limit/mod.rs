//! Local-limit comparisons: canonical codes of truncated rooted coloured
//! graphs, code histograms and total-variation distances between them.

mod canonical;
mod report;

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

pub use canonical::{
    canonical_code, is_isomorphic, CanonicalCode, CodeOptions, DEFAULT_SEARCH_CAP,
    DEFAULT_VERTEX_CAP,
};
pub use report::{
    convergence_report, giant_distance, least_squares, ConvergenceReport, ConvergenceSettings,
    DistanceSample, GraphSide, LimitSide, LimitSummary, PointReport,
};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HistogramMeta {
    pub radius: u32,
    /// Graph size, or `None` for limit-tree samples.
    #[serde(with = "n_or_limit")]
    pub n: Option<usize>,
    pub regime: String,
    pub seed: u64,
    pub weight_bins: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bin_edges: Vec<f64>,
    pub include_colour: bool,
}

mod n_or_limit {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(n: &Option<usize>, s: S) -> Result<S::Ok, S::Error> {
        match n {
            Some(n) => s.serialize_u64(*n as u64),
            None => s.serialize_str("limit"),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<usize>, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(usize),
            Tag(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(n) => Ok(Some(n)),
            Raw::Tag(t) if t == "limit" => Ok(None),
            Raw::Tag(t) => Err(serde::de::Error::custom(format!("expected a size or \"limit\", got {t:?}"))),
        }
    }
}

/// Raw code counts; normalization happens only inside the distances.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CodeHistogram {
    pub meta: HistogramMeta,
    counts: BTreeMap<CanonicalCode, u64>,
    total: u64,
}

#[derive(Serialize, Deserialize)]
struct HistogramFile {
    meta: HistogramMeta,
    codes: BTreeMap<String, u64>,
}

impl CodeHistogram {
    pub fn new(meta: HistogramMeta) -> Self {
        Self {
            meta,
            ..Self::default()
        }
    }

    pub fn add(&mut self, code: CanonicalCode) {
        self.add_count(code, 1);
    }

    pub fn add_count(&mut self, code: CanonicalCode, count: u64) {
        if count > 0 {
            *self.counts.entry(code).or_insert(0) += count;
            self.total += count;
        }
    }

    /// Associative, order-insensitive merge of partial histograms.
    pub fn merge(&mut self, other: &CodeHistogram) {
        for (code, &c) in &other.counts {
            self.add_count(code.clone(), c);
        }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn support(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, code: &CanonicalCode) -> u64 {
        self.counts.get(code).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CanonicalCode, u64)> {
        self.counts.iter().map(|(c, &n)| (c, n))
    }

    pub fn to_json(&self) -> Result<String> {
        let file = HistogramFile {
            meta: self.meta.clone(),
            codes: self.counts.iter().map(|(c, &n)| (c.to_hex(), n)).collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: HistogramFile = serde_json::from_str(s)?;
        let mut h = CodeHistogram::new(file.meta);
        for (hex, n) in file.codes {
            h.add_count(CanonicalCode::from_hex(&hex)?, n);
        }
        Ok(h)
    }

    /// A multinomial resample of `size` draws from the empirical law.
    fn resample<R: Rng + ?Sized>(&self, size: u64, rng: &mut R) -> CodeHistogram {
        let codes: Vec<&CanonicalCode> = self.counts.keys().collect();
        let cumulative: Vec<u64> = self
            .counts
            .values()
            .scan(0, |acc, &c| {
                *acc += c;
                Some(*acc)
            })
            .collect();
        let mut drawn = vec![0u64; codes.len()];
        for _ in 0..size {
            let x = rng.random_range(0..self.total);
            drawn[cumulative.partition_point(|&c| c <= x)] += 1;
        }
        let mut out = CodeHistogram::new(self.meta.clone());
        for (code, n) in codes.into_iter().zip(drawn) {
            out.add_count(code.clone(), n);
        }
        out
    }
}

/// `½ Σ |p̂₁ − p̂₂|` over the union of codes.
pub fn tv_distance(h1: &CodeHistogram, h2: &CodeHistogram) -> Result<f64> {
    if h1.total == 0 || h2.total == 0 {
        return Err(Error::EmptyHistogram);
    }
    let (t1, t2) = (h1.total as f64, h2.total as f64);
    let mut sum = 0.0;
    for (code, &c) in &h1.counts {
        sum += (c as f64 / t1 - h2.count(code) as f64 / t2).abs();
    }
    for (code, &c) in &h2.counts {
        if !h1.counts.contains_key(code) {
            sum += c as f64 / t2;
        }
    }
    Ok((0.5 * sum).min(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TvEstimate {
    pub tv: f64,
    /// Bootstrap standard error of `tv`.
    pub se: f64,
    /// Mean TV between two samples of the same sizes drawn from the pooled
    /// law: the estimator's floor when both sides share one distribution.
    pub null_mean: f64,
    pub null_se: f64,
}

pub fn tv_with_uncertainty(
    h1: &CodeHistogram,
    h2: &CodeHistogram,
    replicates: usize,
    rng: &RngStream,
) -> Result<TvEstimate> {
    let tv = tv_distance(h1, h2)?;
    let mut rng = rng.substream(crate::rng::purpose::BOOTSTRAP);
    let mut boot = Vec::with_capacity(replicates);
    let mut null = Vec::with_capacity(replicates);
    let mut pooled = h1.clone();
    pooled.merge(h2);
    for _ in 0..replicates {
        let a = h1.resample(h1.total, &mut rng);
        let b = h2.resample(h2.total, &mut rng);
        boot.push(tv_distance(&a, &b)?);
        let a = pooled.resample(h1.total, &mut rng);
        let b = pooled.resample(h2.total, &mut rng);
        null.push(tv_distance(&a, &b)?);
    }
    let (_, se) = mean_sd(&boot);
    let (null_mean, null_sd) = mean_sd(&null);
    Ok(TvEstimate {
        tv,
        se,
        null_mean,
        null_se: null_sd,
    })
}

pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F₁ − F₂|`; 0 when either
/// sample is empty.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// One-sample KS statistic against a continuous CDF.
pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = xs.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// Asymptotic Kolmogorov p-value for statistic `d` at effective size `n`
/// (`n·m/(n+m)` for two samples).
pub fn ks_p_value(d: f64, n: f64) -> f64 {
    let sn = n.sqrt();
    let t = (sn + 0.12 + 0.11 / sn) * d;
    if t < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = f64::from(k);
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * t * t).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}
