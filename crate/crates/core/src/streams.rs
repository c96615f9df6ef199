//! Named random streams derived from one master seed.
//!
//! Every consumer of randomness (deployment, truth, measurements, each
//! sensor's filter) draws from its own ChaCha stream, so changing the filter
//! variant never perturbs the truth trajectory or the measurements.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Deployment = 1,
    Truth = 2,
    Measurement = 3,
    Filter = 4,
}

const RUN_BITS: u32 = 36;
const INDEX_BITS: u32 = 20;

/// Independent stream for `(purpose, run, index)` under `master`.
pub fn stream(master: u64, purpose: Purpose, run: u64, index: u64) -> ChaCha8Rng {
    debug_assert!(run < (1 << RUN_BITS));
    debug_assert!(index < (1 << INDEX_BITS));
    let id = ((purpose as u64) << (RUN_BITS + INDEX_BITS)) | (run << INDEX_BITS) | index;
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(id);
    rng
}
