use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random streams derived from a single user seed.
#[derive(Clone, Copy, Debug)]
#[repr(u64)]
pub(crate) enum Stream {
    Noise = 0,
    Weights = 1,
    InitialState = 2,
    Jitter = 3,
    Replicas = 4,
}

pub(crate) fn rng_for(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
