//! Training-set construction: Latin hypercube collocation sampling, random
//! initial/boundary data, snapshot subsampling, and noise corruption.
//!
//! Every sampler is a pure function of its inputs and a 64-bit seed; the
//! generator is ChaCha8, whose identity is echoed in experiment reports.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::pde::LabeledPoint;

/// Name of the PRNG behind every sampler, for config echoes.
pub const GENERATOR: &str = "chacha8";

/// Rectangular space-time domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain2D {
    pub t_range: (f64, f64),
    pub x_range: (f64, f64),
}

impl Domain2D {
    /// The Burgers benchmark domain `t ∈ [0,1], x ∈ [−1,1]`.
    pub fn burgers() -> Self {
        Domain2D {
            t_range: (0.0, 1.0),
            x_range: (-1.0, 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_range.0 >= self.t_range.1 || self.x_range.0 >= self.x_range.1 {
            return Err(Error::structural("domain ranges must be increasing"));
        }
        Ok(())
    }
}

/// Additive Gaussian corruption scaled by the sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Fraction of the clean signal's standard deviation (0.01 = "1% noise").
    pub level: f64,
    pub seed: u64,
}

/// One Latin hypercube stratum per sample and dimension: per dimension,
/// stratum `σ(i)` gets a uniform offset, with `σ` a uniform random
/// permutation (the first dimension keeps identity order, which is itself
/// arbitrary).
pub fn latin_hypercube(n: usize, domain: Domain2D, seed: u64) -> Result<Vec<(f64, f64)>> {
    if n == 0 {
        return Err(Error::structural("sample count must be positive"));
    }
    domain.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample_dim = |range: (f64, f64), rng: &mut ChaCha8Rng| -> Vec<f64> {
        let width = (range.1 - range.0) / n as f64;
        let mut vals: Vec<f64> = (0..n)
            .map(|i| range.0 + width * (i as f64 + rng.gen::<f64>()))
            .collect();
        vals.shuffle(rng);
        vals
    };
    let t = sample_dim(domain.t_range, &mut rng);
    let x = sample_dim(domain.x_range, &mut rng);
    Ok(t.into_iter().zip(x).collect())
}

/// Initial and boundary data for the Burgers forward problem: each point is
/// drawn uniformly from one of the three pieces `{t = 0, u = u0(x)}`,
/// `{x = −1, u = 0}` and `{x = +1, u = 0}`.
pub fn sample_ib_data<F>(n_u: usize, u0: F, domain: Domain2D, seed: u64) -> Result<Vec<LabeledPoint>>
where
    F: Fn(f64) -> f64,
{
    if n_u == 0 {
        return Err(Error::structural("sample count must be positive"));
    }
    domain.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n_u);
    for _ in 0..n_u {
        match rng.gen_range(0..3u8) {
            0 => {
                let x = rng.gen_range(domain.x_range.0..domain.x_range.1);
                points.push(LabeledPoint { t: domain.t_range.0, x, u: u0(x) });
            }
            side => {
                let t = rng.gen_range(domain.t_range.0..domain.t_range.1);
                let x = if side == 1 { domain.x_range.0 } else { domain.x_range.1 };
                points.push(LabeledPoint { t, x, u: 0.0 });
            }
        }
    }
    Ok(points)
}

/// `n` distinct indices from `0..len`, uniformly without replacement
/// (partial Fisher–Yates).
pub fn subsample_indices(len: usize, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::structural("subsample size must be positive"));
    }
    if n > len {
        return Err(Error::structural(format!(
            "cannot draw {n} from {len} grid points"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..len).collect();
    for i in 0..n {
        let j = rng.gen_range(i..len);
        idx.swap(i, j);
    }
    idx.truncate(n);
    Ok(idx)
}

/// Subsample a gridded snapshot `(x_j, u_j)` at `n` distinct locations.
pub fn subsample_snapshot(
    x_grid: &[f64],
    u_grid: &[f64],
    n: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    if x_grid.len() != u_grid.len() {
        return Err(Error::structural("snapshot grids must have equal length"));
    }
    let idx = subsample_indices(x_grid.len(), n, seed)?;
    Ok(idx.into_iter().map(|i| (x_grid[i], u_grid[i])).collect())
}

/// `uᵢ ← uᵢ + level·std(values)·εᵢ` with i.i.d. standard normal `εᵢ`.
/// `level = 0` is the bit-exact identity.
pub fn add_noise(values: &[f64], spec: &NoiseSpec) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::structural("cannot add noise to an empty set"));
    }
    if !(0.0..=1.0).contains(&spec.level) {
        return Err(Error::structural(format!(
            "noise level {} outside [0, 1]",
            spec.level
        )));
    }
    if spec.level == 0.0 {
        return Ok(values.to_vec());
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
    let std = var.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok(values
        .iter()
        .map(|v| v + spec.level * std * rng.sample::<f64, _>(StandardNormal))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latin_hypercube_stratifies_each_dimension() {
        let domain = Domain2D::burgers();
        for n in [1usize, 4, 7, 100] {
            let pts = latin_hypercube(n, domain, 9).unwrap();
            for (lo, hi, get) in [
                (0.0, 1.0, Box::new(|p: &(f64, f64)| p.0) as Box<dyn Fn(&(f64, f64)) -> f64>),
                (-1.0, 1.0, Box::new(|p: &(f64, f64)| p.1)),
            ] {
                let mut counts = vec![0usize; n];
                for p in &pts {
                    let v = get(p);
                    let k = (((v - lo) / (hi - lo)) * n as f64).floor() as usize;
                    counts[k.min(n - 1)] += 1;
                }
                assert!(counts.iter().all(|&c| c == 1), "n={n}: {counts:?}");
            }
        }
    }

    #[test]
    fn latin_hypercube_marginals_fill_coarser_bins_exactly() {
        let n = 10_000;
        let pts = latin_hypercube(n, Domain2D::burgers(), 123).unwrap();
        let mut t_bins = [0usize; 100];
        let mut x_bins = [0usize; 100];
        for (t, x) in pts {
            t_bins[((t * 100.0).floor() as usize).min(99)] += 1;
            x_bins[(((x + 1.0) / 2.0 * 100.0).floor() as usize).min(99)] += 1;
        }
        // 100 strata of the 10000-point hypercube nest exactly in each bin
        assert!(t_bins.iter().all(|&c| c == 100), "{t_bins:?}");
        assert!(x_bins.iter().all(|&c| c == 100), "{x_bins:?}");
    }

    #[test]
    fn samplers_are_deterministic_per_seed() {
        let domain = Domain2D::burgers();
        assert_eq!(
            latin_hypercube(50, domain, 7).unwrap(),
            latin_hypercube(50, domain, 7).unwrap()
        );
        assert_ne!(
            latin_hypercube(50, domain, 7).unwrap(),
            latin_hypercube(50, domain, 8).unwrap()
        );
        let u0 = |x: f64| -(std::f64::consts::PI * x).sin();
        assert_eq!(
            sample_ib_data(100, u0, domain, 3).unwrap(),
            sample_ib_data(100, u0, domain, 3).unwrap()
        );
        let vals: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        let spec = NoiseSpec { level: 0.05, seed: 11 };
        assert_eq!(add_noise(&vals, &spec).unwrap(), add_noise(&vals, &spec).unwrap());
    }

    #[test]
    fn ib_data_satisfies_the_boundary_and_initial_conditions() {
        let u0 = |x: f64| -(std::f64::consts::PI * x).sin();
        let pts = sample_ib_data(200, u0, Domain2D::burgers(), 5).unwrap();
        let mut saw_initial = false;
        let mut saw_boundary = false;
        for p in pts {
            if p.t == 0.0 && p.x.abs() < 1.0 {
                assert_eq!(p.u, u0(p.x));
                saw_initial = true;
            } else {
                assert!(p.x == -1.0 || p.x == 1.0);
                assert_eq!(p.u, 0.0);
                saw_boundary = true;
            }
        }
        assert!(saw_initial && saw_boundary);
    }

    #[test]
    fn snapshot_subsampling_is_uniform_without_replacement() {
        let x_grid: Vec<f64> = (0..256).map(|j| -1.0 + j as f64 / 128.0).collect();
        let u_grid = vec![0.5; 256];
        // full draw returns the whole grid in some order
        let full = subsample_snapshot(&x_grid, &u_grid, 256, 1).unwrap();
        let mut xs: Vec<f64> = full.iter().map(|p| p.0).collect();
        xs.sort_by(f64::total_cmp);
        assert_eq!(xs, x_grid);
        // n = 0 and oversized draws are rejected
        assert!(subsample_snapshot(&x_grid, &u_grid, 0, 1).is_err());
        assert!(subsample_snapshot(&x_grid, &u_grid, 257, 1).is_err());
        // distinctness
        let some = subsample_indices(256, 199, 2).unwrap();
        let mut sorted = some.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 199);
    }

    #[test]
    fn subsampled_locations_are_uniform_over_the_grid() {
        // aggregate many draws; each of 10 bins should get ~ n/10
        let len = 100;
        let mut bin_counts = [0usize; 10];
        let draws = 1000;
        let per_draw = 10;
        for seed in 0..draws {
            for i in subsample_indices(len, per_draw, seed).unwrap() {
                bin_counts[i / 10] += 1;
            }
        }
        let total = draws as f64 * per_draw as f64;
        let expect = total / 10.0;
        // 3σ binomial band
        let sigma = (total * 0.1 * 0.9).sqrt();
        for (b, &c) in bin_counts.iter().enumerate() {
            assert!(
                (c as f64 - expect).abs() <= 3.0 * sigma,
                "bin {b}: {c} vs {expect}±{sigma}"
            );
        }
    }

    #[test]
    fn zero_noise_is_bit_exact_identity() {
        let vals = [1.0, -2.5, 3.25, 0.125];
        let spec = NoiseSpec { level: 0.0, seed: 4 };
        let noisy = add_noise(&vals, &spec).unwrap();
        for (a, b) in vals.iter().zip(&noisy) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn noise_moments_match_the_specification() {
        let n = 100_000;
        let vals: Vec<f64> = (0..n).map(|i| (i as f64 * 0.01).sin() * 2.0).collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let std =
            (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
        let spec = NoiseSpec { level: 0.01, seed: 21 };
        let noisy = add_noise(&vals, &spec).unwrap();
        let deltas: Vec<f64> = noisy.iter().zip(&vals).map(|(a, b)| a - b).collect();
        let dmean = deltas.iter().sum::<f64>() / n as f64;
        let dstd =
            (deltas.iter().map(|d| (d - dmean) * (d - dmean)).sum::<f64>() / n as f64).sqrt();
        let want = 0.01 * std;
        assert!((dstd - want).abs() <= 0.02 * want, "std {dstd} vs {want}");
        // mean preserved within 4·level·std/√n
        assert!(dmean.abs() <= 4.0 * want / (n as f64).sqrt(), "mean shift {dmean}");
    }

    #[test]
    fn noise_level_bounds_are_enforced() {
        let vals = [1.0];
        assert!(add_noise(&vals, &NoiseSpec { level: -0.1, seed: 0 }).is_err());
        assert!(add_noise(&vals, &NoiseSpec { level: 1.5, seed: 0 }).is_err());
        assert!(add_noise(&[], &NoiseSpec { level: 0.1, seed: 0 }).is_err());
    }
}
