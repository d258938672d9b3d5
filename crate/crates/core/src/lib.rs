//! Alpha-fair online coded caching over a fading Gaussian broadcast channel.
//!
//! A Lyapunov drift-plus-penalty controller admits files, combines them into
//! XOR codewords for user subsets and schedules those codewords over the
//! degraded broadcast channel by max-weighted-rate superposition. Two
//! baselines, a feasibility checker for static randomized policies and a
//! sweep runner are included.

pub mod baselines;
pub mod bc_capacity;
pub mod caching;
pub mod channel;
pub mod cli;
pub mod error;
pub mod feasibility;
pub mod lyapunov;
pub mod sim;
pub mod subset;

pub use caching::CacheParams;
pub use channel::{ChannelParams, ChannelState, FadingChannel};
pub use error::{Error, Result};
pub use lyapunov::{LyapunovController, PolicyParams, QueueState};
pub use sim::{run, PolicyKind, RunConfig, RunOutput, RunSummary};
pub use subset::SubsetIndex;
