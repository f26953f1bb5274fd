use thiserror::Error;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("malformed linear program: {0}")]
    Malformed(String),
    #[error("numerical breakdown: {0}")]
    Numerical(String),
    #[error("iteration limit {0} reached")]
    IterationLimit(usize),
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("unknown link {0} -> {1}")]
    UnknownLink(usize, usize),
    #[error("disconnected topology after {0} attempts")]
    DisconnectedTopology(usize),
    #[error("utility is not concave and non-decreasing: {0}")]
    NotConcave(String),
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("capacity region empty: the instance admits no feasible policy")]
    CapacityRegionEmpty,
    #[error("static program is unbounded")]
    Unbounded,
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("slot program failed on candidate set {links:?}: {source}")]
    Candidate { links: Vec<usize>, source: LpError },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{key}: {msg}")]
    Invalid { key: String, msg: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
}

impl ConfigError {
    pub fn invalid(key: &str, msg: impl Into<String>) -> Self {
        ConfigError::Invalid { key: key.to_string(), msg: msg.into() }
    }
}
