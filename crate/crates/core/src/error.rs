use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("swarm must contain at least one robot")]
    EmptySwarm,
    #[error("genotype must have {expected} values, got {actual}")]
    GenotypeLength { expected: usize, actual: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("expected {expected} evaluated individuals, got {actual}")]
    PopulationSize { expected: usize, actual: usize },
    #[error("covariance matrix lost positive definiteness (max eigenvalue {0})")]
    Covariance(f64),
    #[error("empty series")]
    EmptySeries,
    #[error("each group needs at least 2 samples")]
    TooFewSamples,
    #[error("invalid config: {0}")]
    Config(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("tick {tick} outside recorded range 0..{len}")]
    TickOutOfRange { tick: usize, len: usize },
    #[error("optimizer failure in generation {generation}: {source}")]
    Generation {
        generation: usize,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
