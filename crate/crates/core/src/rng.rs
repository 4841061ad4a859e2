//! Seeded random streams.
//!
//! ChaCha is counter based, so independent streams can be carved out of one
//! seed by selecting a stream id. Every sampling routine in the crate takes
//! `&mut impl Rng` explicitly.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as IpRng;

/// Generator for `seed` on stream 0.
pub fn seeded(seed: u64) -> IpRng {
    IpRng::seed_from_u64(seed)
}

/// Generator for `seed` on an independent stream.
pub fn stream(seed: u64, stream: u64) -> IpRng {
    let mut rng = IpRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
