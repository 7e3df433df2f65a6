//! Deterministic random streams.
//!
//! Every random draw in the crate comes from a `ChaCha8Rng` seeded from a user
//! seed and switched onto a fixed stream. ChaCha is counter based, so distinct
//! streams of the same seed are independent and can be consumed in any order
//! (or on different threads) without changing each other's output.
//!
//! Stream layout:
//!
//! | stream                      | consumer                                  |
//! |-----------------------------|-------------------------------------------|
//! | `4·mesh + 1`                | surface points of training mesh `mesh`    |
//! | `4·mesh + 2`                | near-surface points of training mesh      |
//! | `4·mesh + 3`                | uniform points of training mesh           |
//! | [`PYRAMID_INIT`]            | feature-grid initialization               |
//! | [`NET_INIT`]                | perceptron initialization                 |
//! | [`BATCH_ORDER`]             | mini-batch shuffling                      |
//! | [`SYNTH_ANOMALY`]           | synthetic anomaly placement               |
//! | [`SYNTH_CLOUD`]             | synthetic test-cloud sampling             |
//! | `NOISE_BASE + i`            | noise injection for sweep row `i`         |

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const PYRAMID_INIT: u64 = 1 << 32;
pub const NET_INIT: u64 = PYRAMID_INIT + 1;
pub const BATCH_ORDER: u64 = PYRAMID_INIT + 2;
pub const SYNTH_ANOMALY: u64 = PYRAMID_INIT + 3;
pub const SYNTH_CLOUD: u64 = PYRAMID_INIT + 4;
pub const GRADCHECK: u64 = PYRAMID_INIT + 5;
pub const NOISE_BASE: u64 = 1 << 40;

/// Point classes generated for a training mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointClassStream {
    Surface = 1,
    NearSurface = 2,
    Uniform = 3,
}

pub fn seeded(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn point_class_stream(mesh_index: usize, class: PointClassStream) -> u64 {
    4 * mesh_index as u64 + class as u64
}
