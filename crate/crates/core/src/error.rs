use thiserror::Error;

/// Errors raised by the channel, process and solver layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NecError {
    #[error("invalid alphabet: q = {0} (need q >= 2)")]
    InvalidAlphabet(usize),

    #[error("invalid symbol {symbol} for alphabet of size {q}")]
    InvalidSymbol { symbol: usize, q: usize },

    #[error("channel table is {rows}x{cols}, expected {q}x{q}")]
    TableShape { q: usize, rows: usize, cols: usize },

    #[error("h(x, .) is not one-to-one at x = {x}: output {output} appears more than once")]
    NotInvertibleInNoise { x: usize, output: usize },

    #[error("inverse map is not one-to-one in x at y = {y}: noise value {noise} appears more than once")]
    NotInvertibleInInput { y: usize, noise: usize },

    #[error("invalid probability data: {0}")]
    InvalidProbability(String),

    #[error("degenerate chain: {0}")]
    DegenerateChain(String),

    #[error("operation requires a Markov noise model")]
    NotMarkov,

    #[error("resource cap exceeded: {what} needs {needed}, cap is {cap}")]
    ResourceCap {
        what: &'static str,
        needed: u128,
        cap: u128,
    },

    #[error("matrix is not quasi-symmetric: {failed} of {total} erasure patterns failed")]
    NotQuasiSymmetric { failed: usize, total: usize },

    #[error("Blahut-Arimoto did not converge after {iterations} iterations (gap {gap:e})")]
    NoConvergence { iterations: usize, gap: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, NecError>;
