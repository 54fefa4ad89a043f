//! Counter-addressed random streams.
//!
//! Every stream is a ChaCha8 generator keyed by the run seed and addressed by
//! `(replication, agent, kind)` through the 64-bit stream id. Agent `i` in
//! replication `r` draws the same numbers whatever the population size, so
//! sweeps over `N` share random numbers across population sizes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose of a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamKind {
    /// Increments of the agent's own Brownian motion.
    Idiosyncratic = 0,
    /// Increments of the common Brownian motion (agent index ignored).
    Common = 1,
    /// Draw of the agent's initial state.
    Initial = 2,
    /// Random controls of the convexity probe.
    Probe = 3,
    /// Random open-loop deviations.
    Deviation = 4,
}

pub const MAX_REPLICATIONS: u64 = 1 << 24;
pub const MAX_AGENTS: u64 = 1 << 32;

/// Stream id `replication << 40 | kind << 32 | agent`.
pub fn stream_id(replication: u64, agent: u64, kind: StreamKind) -> u64 {
    assert!(replication < MAX_REPLICATIONS, "replication index out of range");
    assert!(agent < MAX_AGENTS, "agent index out of range");
    let agent = if kind == StreamKind::Common { 0 } else { agent };
    (replication << 40) | ((kind as u64) << 32) | agent
}

/// The generator for `(seed, replication, agent, kind)`.
pub fn stream(seed: u64, replication: u64, agent: u64, kind: StreamKind) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(replication, agent, kind));
    rng
}
