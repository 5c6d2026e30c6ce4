//! Seeded random streams.
//!
//! Every randomized subsystem derives its own ChaCha8 stream from
//! (config seed, stream id), so blocks can generate independently and in any
//! order without perturbing each other's draws.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Fixed stream ids, one per subsystem that consumes randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Catalog,
    DevicePool,
    LegitTraffic,
    BackgroundUpdates,
    Farm(u32),
    Bots,
    Crowd,
    DaySampling,
    Split,
    Train,
    Importance(u32),
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Catalog => 1,
            Stream::DevicePool => 2,
            Stream::LegitTraffic => 3,
            Stream::BackgroundUpdates => 4,
            Stream::Farm(i) => 1_000 + u64::from(i),
            Stream::Bots => 5,
            Stream::Crowd => 6,
            Stream::DaySampling => 7,
            Stream::Split => 8,
            Stream::Train => 9,
            Stream::Importance(i) => 2_000 + u64::from(i),
        }
    }
}

/// Derives the stream's generator. Identical (seed, stream) always yields the
/// identical draw sequence.
pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}
