//! Volume and surface agreement metrics.

use crate::kdtree::KdTree;
use crate::{Error, Point3, Result};

/// Relative absolute volume deviation in percent.
pub fn ravd(reference_count: usize, test_count: usize) -> Result<f64> {
    if reference_count == 0 {
        return Err(Error::DivisionByZero("reference volume is empty".into()));
    }
    Ok(100.0 * (test_count as f64 - reference_count as f64).abs() / reference_count as f64)
}

/// Non-symmetric Hausdorff and mean distance from `source` to `target`.
pub fn surface_distances(source: &[Point3], target: &[Point3]) -> Result<(f64, f64)> {
    if source.is_empty() || target.is_empty() {
        return Err(Error::EmptyShape("surface distance needs two non-empty point sets".into()));
    }
    let tree = KdTree::new(target);
    let mut max = 0.0f64;
    let mut sum = 0.0;
    for p in source {
        let (_, d2) = tree.nearest(p).expect("non-empty");
        let d = d2.sqrt();
        max = max.max(d);
        sum += d;
    }
    Ok((max, sum / source.len() as f64))
}

/// Mean and population standard deviation.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ravd_values() {
        assert_eq!(ravd(1000, 1000).unwrap(), 0.0);
        assert!((ravd(100, 110).unwrap() - 10.0).abs() < 1e-12);
        assert!((ravd(100, 90).unwrap() - 10.0).abs() < 1e-12);
        assert!(matches!(ravd(0, 5), Err(Error::DivisionByZero(_))));
    }

    #[test]
    fn distances_basic() {
        let a: Vec<Point3> = (0..10).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        assert_eq!(surface_distances(&a, &a).unwrap(), (0.0, 0.0));
        let b: Vec<Point3> = a.iter().map(|p| p + Point3::y()).collect();
        let (hd, md) = surface_distances(&a, &b).unwrap();
        assert!((hd - 1.0).abs() < 1e-12 && (md - 1.0).abs() < 1e-12);
        assert!(surface_distances(&a, &[]).is_err());
    }

    #[test]
    fn distances_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut pt = || Point3::new(rng.random_range(0.0..50.0), rng.random_range(0.0..50.0), rng.random_range(0.0..50.0));
        let src: Vec<Point3> = (0..200).map(|_| pt()).collect();
        let dst: Vec<Point3> = (0..500).map(|_| pt()).collect();
        let nn: Vec<f64> = src
            .iter()
            .map(|p| dst.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min))
            .collect();
        let hd = nn.iter().copied().fold(0.0, f64::max);
        let md = nn.iter().sum::<f64>() / nn.len() as f64;
        let (h, m) = surface_distances(&src, &dst).unwrap();
        assert!((h - hd).abs() <= 1e-12 * hd);
        assert!((m - md).abs() <= 1e-12 * md);
    }
}
