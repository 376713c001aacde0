//! Capacity, feedback capacity and capacity-cost bounds for burst
//! noise-erasure channels with stationary (memoryless or Markov) noise.

pub mod blahut;
pub mod capacity;
pub mod config;
pub mod channel;
pub mod curve;
pub mod entropy;
pub mod error;
pub mod export;
pub mod feedback;
pub mod models;
pub mod nfold;
pub mod process;
pub mod simulate;

pub use channel::{Alphabet, ChannelFunction};
pub use error::{NecError, Result};
pub use nfold::{Limits, NFoldMatrix};
pub use process::{ErasurePattern, NoiseModel};
