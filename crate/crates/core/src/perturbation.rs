//! Sparse Gaussian perturbations restricted to an active set.
//!
//! A perturbation draws one independent standard normal per active
//! coordinate, in increasing index order, and leaves every other coordinate
//! at exactly zero. Its effective dimension is the number of nonzero
//! coordinates.

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::sparse::{ActiveSet, SparseVector};
use crate::stats::{McEstimate, RunningStats};

#[derive(Clone, Debug, PartialEq)]
pub struct Perturbation {
    pub vector: SparseVector,
    pub active: ActiveSet,
    pub effective_dim: usize,
}

/// Samples `u` with `u_i ~ N(0, 1)` for `i` in `active` and `u_i = 0` elsewhere.
pub fn sample_sparse_gaussian(active: &ActiveSet, rng: &mut RngStream) -> Perturbation {
    let values: Vec<f64> = active.indices().iter().map(|_| rng.next_normal()).collect();
    let vector = SparseVector::from_sorted(active.dim(), active.indices().to_vec(), values);
    let effective_dim = vector.l0_norm();
    Perturbation {
        vector,
        active: active.clone(),
        effective_dim,
    }
}

/// Monte Carlo estimate of `E ||u||^p` for `p` in {2, 4}.
pub fn moment_estimate(
    active: &ActiveSet,
    p: u32,
    num_samples: u64,
    rng: &mut RngStream,
) -> Result<McEstimate> {
    if p != 2 && p != 4 {
        return Err(Error::invalid("p", format!("only p = 2 or 4 supported, got {p}")));
    }
    let mut stats = RunningStats::new();
    let d = active.len();
    for _ in 0..num_samples {
        let sq: f64 = (0..d).map(|_| rng.next_normal().powi(2)).sum();
        stats.push(if p == 2 { sq } else { sq * sq });
    }
    Ok(stats.estimate())
}

/// Exact `E ||u||^p` for a `d`-dimensional standard normal, `p` in {2, 4}.
pub fn exact_moment(d: usize, p: u32) -> f64 {
    let d = d as f64;
    match p {
        2 => d,
        4 => d * d + 2.0 * d,
        _ => f64::NAN,
    }
}

/// Exact variance of `||u||^p` for `p` in {2, 4} (chi-square moments).
pub fn exact_moment_variance(d: usize, p: u32) -> f64 {
    let d = d as f64;
    match p {
        2 => 2.0 * d,
        4 => d * (d + 2.0) * (d + 4.0) * (d + 6.0) - (d * (d + 2.0)).powi(2),
        _ => f64::NAN,
    }
}

/// The moment bound `(p + d)^(p/2)`.
pub fn moment_bound(d: usize, p: u32) -> f64 {
    (p as f64 + d as f64).powf(p as f64 / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_active_set_gives_zero_vector() {
        let mut rng = RngStream::new(1, 2);
        let p = sample_sparse_gaussian(&ActiveSet::empty(10), &mut rng);
        assert!(p.vector.is_empty());
        assert_eq!(p.effective_dim, 0);
        assert_eq!(p.vector.dim(), 10);
    }

    #[test]
    fn support_is_restricted() {
        let mut rng = RngStream::new(1, 2);
        let active = ActiveSet::new(50, vec![3, 17, 40]).unwrap();
        for _ in 0..100 {
            let p = sample_sparse_gaussian(&active, &mut rng);
            assert!(p.vector.indices().iter().all(|i| active.contains(*i)));
            for i in (0..50).filter(|i| !active.contains(*i)) {
                assert_eq!(p.vector.get(i), 0.0);
            }
            assert_eq!(p.effective_dim, 3);
        }
    }

    #[test]
    fn deterministic_given_counter() {
        let active = ActiveSet::new(20, (0..20).step_by(2).collect()).unwrap();
        let base = RngStream::new(42, 2);
        let a = sample_sparse_gaussian(&active, &mut base.substream(17));
        let b = sample_sparse_gaussian(&active, &mut base.substream(17));
        assert_eq!(a, b);
        assert_eq!(
            a.vector.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.vector.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn mean_squared_norm_is_active_size() {
        let active = ActiveSet::new(100, vec![1, 5, 9, 20, 33, 64, 99]).unwrap();
        let mut rng = RngStream::new(5, 2);
        let mut stats = RunningStats::new();
        for _ in 0..100_000 {
            stats.push(sample_sparse_gaussian(&active, &mut rng).vector.l2_norm_sq());
        }
        let se = (exact_moment_variance(7, 2) / 1e5).sqrt();
        assert!((stats.mean() - 7.0).abs() < 3.0 * se, "mean {}", stats.mean());
    }

    #[test]
    fn moment_examples() {
        let active = ActiveSet::full(10);
        let mut rng = RngStream::new(9, 2);
        let m2 = moment_estimate(&active, 2, 100_000, &mut rng).unwrap();
        let m4 = moment_estimate(&active, 4, 100_000, &mut rng).unwrap();
        assert!((m2.mean - 10.0).abs() < 3.0 * (exact_moment_variance(10, 2) / 1e5).sqrt());
        assert!((m4.mean - 120.0).abs() < 3.0 * (exact_moment_variance(10, 4) / 1e5).sqrt());
        assert_eq!(moment_bound(10, 2), 12.0);
        assert_eq!(moment_bound(10, 4), 196.0);
        let zero = moment_estimate(&ActiveSet::empty(5), 4, 10_000, &mut rng).unwrap();
        assert_eq!(zero.mean, 0.0);
        assert!(moment_estimate(&active, 3, 10_000, &mut rng).is_err());
    }
}
