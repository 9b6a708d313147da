//! Per-trial random substreams.
//!
//! Every random object of a trial comes from its own ChaCha stream keyed by
//! `(master seed, trial index, stream)`, so trials can run in any order and
//! grid points that share a trial index share their draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    LegitBsRis,
    MaliciousBsRis,
    LegitRisUser,
    MaliciousRisUser,
    TargetPhases,
    Attack,
    Randomization,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::LegitBsRis => 1,
            Stream::MaliciousBsRis => 2,
            Stream::LegitRisUser => 3,
            Stream::MaliciousRisUser => 4,
            Stream::TargetPhases => 5,
            Stream::Attack => 6,
            Stream::Randomization => 7,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `trial` under `master`.
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(master) ^ trial.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

pub fn substream(trial_seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    rng.set_stream(stream.tag());
    rng
}
