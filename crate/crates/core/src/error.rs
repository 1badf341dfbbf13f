use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("zero-mean degree law")]
    ZeroMeanDegree,

    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("no Malthusian parameter (not supercritical or explosive regime)")]
    NotSupercritical,

    #[error("infinite-mean offspring: Malthusian regime inapplicable")]
    InfiniteMeanOffspring,

    #[error("odd half-edge total {0}: a perfect pairing needs an even count")]
    OddHalfEdgeCount(u64),

    #[error("martingale horizon too deep for this realization ({nodes} nodes, cap {cap})")]
    HorizonTooDeep { nodes: usize, cap: usize },

    #[error("no reference vertex: the exploration has not left the root")]
    NoReferenceVertex,

    #[error("graph has {vertices} vertices, more than the canonical-code cap {cap}")]
    VertexCapExceeded { vertices: usize, cap: usize },

    #[error("canonical search exceeded {0} leaves")]
    SearchCapExceeded(usize),

    #[error("empty histogram")]
    EmptyHistogram,

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("runtime cap exceeded: {0}")]
    RuntimeCap(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
