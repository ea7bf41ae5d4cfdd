use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Independent random streams. Each is seeded from the run seed and its own
/// stream id, so draws on one never shift another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    RequestLengths = 1,
    StartupDelays = 2,
    ShutdownDelays = 3,
    SpotRequestDelays = 4,
}

const STREAMS: usize = 4;

#[derive(Debug, Clone)]
pub struct SimRng {
    streams: [ChaCha8Rng; STREAMS],
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        let make = |id: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(id);
            r
        };
        SimRng {
            streams: [make(1), make(2), make(3), make(4)],
        }
    }

    pub fn stream(&mut self, s: Stream) -> &mut ChaCha8Rng {
        &mut self.streams[s as usize - 1]
    }
}

/// Gaussian delay or length; non-positive draws are redrawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub mean: f64,
    pub sd: f64,
}

impl Gaussian {
    pub const fn new(mean: f64, sd: f64) -> Self {
        Gaussian { mean, sd }
    }

    pub fn is_valid(&self) -> bool {
        self.mean > 0.0 && self.mean.is_finite() && self.sd >= 0.0 && self.sd.is_finite()
    }

    pub fn sampler(&self) -> PositiveNormal {
        PositiveNormal {
            normal: Normal::new(self.mean, self.sd).expect("validated gaussian"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PositiveNormal {
    normal: Normal<f64>,
}

impl PositiveNormal {
    #[inline]
    pub fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        loop {
            let x = self.normal.sample(rng);
            if x > 0.0 {
                return x;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_independent() {
        let mut a = SimRng::new(7);
        let mut b = SimRng::new(7);
        let g = Gaussian::new(100.0, 20.0).sampler();
        // burn draws on another stream in `b` only
        for _ in 0..50 {
            g.draw(b.stream(Stream::ShutdownDelays));
        }
        let xa: Vec<f64> = (0..10).map(|_| g.draw(a.stream(Stream::StartupDelays))).collect();
        let xb: Vec<f64> = (0..10).map(|_| g.draw(b.stream(Stream::StartupDelays))).collect();
        assert_eq!(xa, xb);
        let xc: Vec<f64> = (0..10).map(|_| g.draw(a.stream(Stream::ShutdownDelays))).collect();
        assert_ne!(xa, xc);
    }

    #[test]
    fn draws_are_positive() {
        let mut r = SimRng::new(1);
        let g = Gaussian::new(0.1, 1.0).sampler();
        assert!((0..10_000).all(|_| g.draw(r.stream(Stream::RequestLengths)) > 0.0));
    }

    #[test]
    fn zero_spread_is_exact() {
        let mut r = SimRng::new(1);
        let g = Gaussian::new(550.0, 0.0).sampler();
        assert_eq!(g.draw(r.stream(Stream::SpotRequestDelays)), 550.0);
    }
}
