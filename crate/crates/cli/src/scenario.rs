//! Seeded particle generators.

use hfmm::tree::Particle;
use hfmm::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    /// Cell centres of an `nx × ny` grid over the square.
    UniformSquare,
    /// Independent uniform positions in the square.
    RandomUniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub generator: Generator,
    pub center: [f64; 2],
    pub side: f64,
}

impl Scenario {
    /// `n` particles with real strengths uniform in [-1, 1]. Identical for
    /// identical `(n, seed)`.
    pub fn particles(&self, n: usize, seed: u64) -> Vec<Particle> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x0 = self.center[0] - 0.5 * self.side;
        let y0 = self.center[1] - 0.5 * self.side;
        let positions: Vec<(f64, f64)> = match self.generator {
            Generator::UniformSquare => {
                let nx = (n as f64).sqrt().ceil() as usize;
                let ny = n.div_ceil(nx);
                (0..ny)
                    .flat_map(|j| (0..nx).map(move |i| (i, j)))
                    .take(n)
                    .map(|(i, j)| {
                        (
                            x0 + (i as f64 + 0.5) * self.side / nx as f64,
                            y0 + (j as f64 + 0.5) * self.side / ny as f64,
                        )
                    })
                    .collect()
            }
            Generator::RandomUniform => (0..n)
                .map(|_| {
                    // Open interval keeps particles off the box edges.
                    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
                    let v: f64 = rng.gen_range(f64::EPSILON..1.0);
                    (x0 + u * self.side, y0 + v * self.side)
                })
                .collect(),
        };
        positions
            .into_iter()
            .map(|(x, y)| Particle::new(x, y, Complex64::new(rng.gen_range(-1.0..=1.0), 0.0)))
            .collect()
    }
}
