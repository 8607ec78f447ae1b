//! Kolmogorov-Arnold networks: each edge carries
//! `phi(x) = base_weight * silu(x) + spline_weight * sum_i c_i B_i(x)`
//! and each node sums its incoming edges.

mod adam;
mod network;
mod spline;

pub use adam::AdamState;
pub use network::{KanLayer, KanNetwork, Workspace};
pub use spline::{bspline_basis, SplineSpec, MAX_DEGREE};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random stream `stream` derived from one experiment seed.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
