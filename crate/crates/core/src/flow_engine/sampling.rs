use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const PRIMES: [u8; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// First `n` points of the `dim`-dimensional Halton sequence (index 1 onward).
pub fn halton_points(n: usize, dim: usize) -> Vec<Vec<f64>> {
    assert!(dim <= PRIMES.len());
    (1..=n).map(|i| (0..dim).map(|d| halton::number(PRIMES[d], i)).collect()).collect()
}

/// Seeded counter-based generator used for every random choice in the crate.
#[derive(Debug, Clone)]
pub struct Sampler {
    rng: ChaCha8Rng,
    pub seed: u64,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), seed }
    }
    /// Independent stream for sub-task `k`, stable under reordering of tasks.
    pub fn stream(&self, k: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k + 1);
        Self { rng, seed: self.seed }
    }
    pub fn uniform(&mut self, a: f64, b: f64) -> f64 {
        self.rng.gen_range(a..b)
    }
    pub fn angle(&mut self) -> f64 {
        self.uniform(0.0, std::f64::consts::TAU)
    }
    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
    /// Uniform point on the unit three-sphere.
    pub fn unit_s3(&mut self) -> [f64; 4] {
        loop {
            let v = [self.normal(), self.normal(), self.normal(), self.normal()];
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-6 {
                return v.map(|x| x / n);
            }
        }
    }
    pub fn unit_s2(&mut self) -> [f64; 3] {
        loop {
            let v = [self.normal(), self.normal(), self.normal()];
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-6 {
                return v.map(|x| x / n);
            }
        }
    }
}

/// Order-preserving map, parallel when the `parallel` feature is on.
pub fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_streams_are_reproducible() {
        let a: Vec<f64> = (0..5).map({
            let mut s = Sampler::new(7).stream(3);
            move |_| s.uniform(0.0, 1.0)
        }).collect();
        let b: Vec<f64> = (0..5).map({
            let mut s = Sampler::new(7).stream(3);
            move |_| s.uniform(0.0, 1.0)
        }).collect();
        assert_eq!(a, b);
        let mut c = Sampler::new(7).stream(4);
        assert_ne!(a[0], c.uniform(0.0, 1.0));
    }

    #[test]
    fn halton_points_fill_the_cube() {
        let pts = halton_points(1000, 3);
        assert_eq!(pts.len(), 1000);
        let mean: f64 = pts.iter().map(|p| p[2]).sum::<f64>() / 1000.0;
        assert!((mean - 0.5).abs() < 0.01);
        assert!(pts.iter().all(|p| p.iter().all(|&x| x > 0.0 && x < 1.0)));
    }

    #[test]
    fn par_map_keeps_order() {
        let v: Vec<usize> = (0..100).collect();
        assert_eq!(par_map(&v, |x| x * 2), v.iter().map(|x| x * 2).collect::<Vec<_>>());
    }
}
