//! Test support for the feedql workspace: seeded random generators for
//! feeds, queries, and capabilities; shared fixtures; in-process fetchers;
//! and a naive reference evaluator kept deliberately independent of the
//! engine it checks (its own value extraction, its own glob matcher, its own
//! distance formula, and brute-force double loops everywhere).

pub mod fetch;
pub mod fixtures;
pub mod gen;
pub mod oracle;

pub use rand_chacha::ChaCha8Rng;

use rand::SeedableRng;

/// A deterministic RNG for reproducible suites.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
