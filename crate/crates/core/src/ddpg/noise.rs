//! Ornstein-Uhlenbeck exploration noise.

use rand_distr::{Distribution, StandardNormal};

use crate::seeding::Rng;

#[derive(Clone, Debug)]
pub struct OuProcess {
    pub theta: f64,
    pub mu: f64,
    pub sigma: f64,
    state: Vec<f64>,
    rng: Rng,
}

impl OuProcess {
    pub fn new(dim: usize, theta: f64, mu: f64, sigma: f64, rng: Rng) -> Self {
        assert!(theta > 0.0 && sigma >= 0.0, "OU needs theta > 0 and sigma >= 0");
        Self {
            theta,
            mu,
            sigma,
            state: vec![mu; dim],
            rng,
        }
    }

    pub fn value(&self) -> &[f64] {
        &self.state
    }

    /// Restarts from the mean.
    pub fn reset(&mut self) {
        let mu = self.mu;
        self.state.iter_mut().for_each(|x| *x = mu);
    }

    pub fn set(&mut self, value: &[f64]) {
        self.state.copy_from_slice(value);
    }

    /// `x <- x + theta (mu - x) + sigma g`, `g` standard normal.
    pub fn step(&mut self) -> &[f64] {
        for x in &mut self.state {
            let g: f64 = StandardNormal.sample(&mut self.rng);
            *x += self.theta * (self.mu - *x) + self.sigma * g;
        }
        &self.state
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::stream;

    #[test]
    fn deterministic_reversion() {
        let mut ou = OuProcess::new(1, 0.15, 0.0, 0.0, stream(0, 0));
        ou.set(&[1.0]);
        assert_eq!(ou.step(), &[0.85]);
    }

    fn moments(mu: f64) -> (f64, f64) {
        let mut ou = OuProcess::new(1, 0.15, mu, 0.2, stream(11, 3));
        for _ in 0..1000 {
            ou.step();
        }
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| ou.step()[0]).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        (mean, var)
    }

    #[test]
    fn stationary_moments() {
        // discrete AR(1): sigma^2 / (1 - (1 - theta)^2), close to sigma^2 / (2 theta)
        let (_, var) = moments(0.0);
        let target = 0.2f64.powi(2) / (2.0 * 0.15);
        assert!((var - target).abs() / target < 0.1, "variance {var}");
        let (mean, _) = moments(0.5);
        assert!((mean - 0.5).abs() < 0.05, "mean {mean}");
    }
}
