use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("binary trace: {0}")]
    Binary(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Misuse of a cache array (caller broke a precondition).
#[derive(Debug, Error, PartialEq, Eq)]
pub enum CacheError {
    #[error("set {set} already holds tag {tag:#x}")]
    DuplicateTag { set: u64, tag: u64 },
    #[error("no valid line at set {set}, way {way}")]
    InvalidWay { set: u64, way: usize },
    #[error("set {set} out of range")]
    SetOutOfRange { set: u64 },
    #[error("cannot insert an invalid line")]
    InvalidLine,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("event {index}: core {core} out of range (cores = {cores})")]
    CoreOutOfRange {
        index: usize,
        core: u32,
        cores: usize,
    },
    #[error("event {index}: address {addr:#x} exceeds the configured {bits}-bit address space")]
    AddressOutOfRange { index: usize, addr: u64, bits: u32 },
    #[error("core {core}: block {block:#x} left L1 without an L2 copy")]
    Inclusion { core: usize, block: u64 },
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("cannot derive metrics from a run with zero elapsed cycles")]
    ZeroCycles,
    #[error("cannot compute a per-kilo-instruction ratio with zero instructions")]
    ZeroInstructions,
    #[error("weighted speedup needs {expected} alone-run IPCs, got {got}")]
    AloneIpcCount { expected: usize, got: usize },
}

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("bad mix pattern {pattern:?}: {msg}")]
    Pattern { pattern: String, msg: String },
    #[error("pool too small for pattern {pattern}: {shortfall}")]
    InsufficientPool { pattern: String, shortfall: String },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}
