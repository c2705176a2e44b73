use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A numerical routine was called outside its domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// Every violated configuration invariant, in the order they were checked.
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    InvalidConfig(Vec<String>),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
