use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The cavity denominator `(T_c + eps_int + q)^2 + omega^2` vanished.
    #[error("singular response at q = {q}, omega = {omega}")]
    Singular { q: f64, omega: f64 },

    #[error("unstable configuration: |q| = {q} must stay below threshold {threshold}")]
    Unstable { q: f64, threshold: f64 },

    #[error("slowest decay rate {rate} is not resolved by a frequency bin of {bin_width}")]
    Unresolved { rate: f64, bin_width: f64 },

    #[error("a seed is required for reproducible stochastic runs")]
    MissingSeed,

    #[error("objective is not finite at x = {x}")]
    NonFinite { x: f64 },

    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("parameters not identifiable from the data: {0}")]
    Identifiability(String),
}
