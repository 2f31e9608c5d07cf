use thiserror::Error;

/// Simulator error categories. The CLI maps these onto process exit codes
/// (config = 2, data = 3, io = 4).
#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("node placement exhausted retry cap ({attempts} attempts for {what})")]
    PlacementExhausted { what: &'static str, attempts: usize },
}

impl SimError {
    pub fn config(msg: impl Into<String>) -> Self {
        SimError::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        SimError::Data(msg.into())
    }

    /// Exit-code category used by the `simulate` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Config(_) => 2,
            SimError::Data(_) | SimError::PlacementExhausted { .. } => 3,
            SimError::Io(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_category() {
        assert_eq!(SimError::config("x").exit_code(), 2);
        assert_eq!(SimError::data("x").exit_code(), 3);
        assert_eq!(
            SimError::PlacementExhausted { what: "ue", attempts: 1 }.exit_code(),
            3
        );
        let io = SimError::Io(std::io::Error::new(std::io::ErrorKind::Other, "x"));
        assert_eq!(io.exit_code(), 4);
    }
}
