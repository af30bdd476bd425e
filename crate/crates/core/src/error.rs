use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("graph is not connected")]
    NotConnected,
    #[error("loop edge at vertex {0:?}")]
    LoopEdge(String),
    #[error("graph has no sink vertex")]
    NoSink,
    #[error("duplicate vertex label {0:?}")]
    DuplicateVertexLabel(String),
    #[error("edge multiplicity must be at least 1 (got 0 for {0:?}-{1:?})")]
    ZeroMultiplicity(String, String),
    #[error("unknown vertex {0:?}")]
    UnknownVertex(String),
    #[error("no edge between vertices {0} and {1}")]
    NoSuchEdge(usize, usize),
    #[error("edge {0}-{1} touches the sink")]
    SinkAdjacentEdge(usize, usize),
    #[error("vertex {0} is the sink")]
    SinkVertex(usize),
    #[error("configuration is not stable")]
    UnstableConfiguration,
    #[error("configuration has length {got}, graph has {expected} non-sink vertices")]
    LengthMismatch { expected: usize, got: usize },
    #[error("toppling at vertex {0} is not legal")]
    IllegalToppling(usize),
    #[error("stabilisation exceeded the cap of {0} topplings")]
    SafetyCapExceeded(u64),
    #[error("graph has {edges} edges, enumeration bound is {bound}")]
    TooManyEdges { edges: usize, bound: usize },
    #[error("state space of {size} configurations exceeds bound {bound}")]
    StateSpaceTooLarge { size: u128, bound: u128 },
    #[error("component has no reducible edge and is not a sink bundle")]
    IrreducibleComponent,
    #[error("configuration is not stochastically recurrent")]
    NotRecurrent,
    #[error("edge {0}-{1} is a bridge, touches the sink, or does not exist")]
    BadEdge(usize, usize),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("malformed graph JSON: {0}")]
    Json(String),
}

impl Error {
    /// Stable machine-readable name of the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotConnected => "NotConnected",
            Error::LoopEdge(_) => "LoopEdge",
            Error::NoSink => "NoSink",
            Error::DuplicateVertexLabel(_) => "DuplicateVertexLabel",
            Error::ZeroMultiplicity(..) => "ZeroMultiplicity",
            Error::UnknownVertex(_) => "UnknownVertex",
            Error::NoSuchEdge(..) => "NoSuchEdge",
            Error::SinkAdjacentEdge(..) => "SinkAdjacentEdge",
            Error::SinkVertex(_) => "SinkVertex",
            Error::UnstableConfiguration => "UnstableConfiguration",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::IllegalToppling(_) => "IllegalToppling",
            Error::SafetyCapExceeded(_) => "SafetyCapExceeded",
            Error::TooManyEdges { .. } => "TooManyEdges",
            Error::StateSpaceTooLarge { .. } => "StateSpaceTooLarge",
            Error::IrreducibleComponent => "IrreducibleComponent",
            Error::NotRecurrent => "NotRecurrent",
            Error::BadEdge(..) => "BadEdge",
            Error::InvalidParams(_) => "InvalidParams",
            Error::Json(_) => "Json",
        }
    }

    /// True for errors caused by enumeration or safety bounds rather than bad input.
    pub fn is_resource_limit(&self) -> bool {
        matches!(
            self,
            Error::TooManyEdges { .. }
                | Error::StateSpaceTooLarge { .. }
                | Error::SafetyCapExceeded(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
