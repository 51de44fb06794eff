use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::field::{Labels, PointCloud};

/// Centers of the three planar classes.
pub const BLOB_CENTERS: [[f64; 2]; 3] = [[0.0, 0.0], [3.0, 0.0], [1.5, 2.6]];

/// Three unit-variance planar Gaussians, `per_class` points each, after which
/// a `noise_fraction` share of the points has its labels shuffled among
/// themselves.
pub fn three_blobs(per_class: usize, noise_fraction: f64, seed: u64) -> Result<PointCloud> {
    if per_class == 0 {
        return Err(invalid("need at least one point per class"));
    }
    if !(0.0..=1.0).contains(&noise_fraction) {
        return Err(invalid(format!("noise fraction {noise_fraction} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = Vec::with_capacity(per_class * 6);
    let mut labels = Vec::with_capacity(per_class * 3);
    for (class, center) in BLOB_CENTERS.iter().enumerate() {
        for _ in 0..per_class {
            for c in center {
                let z: f64 = StandardNormal.sample(&mut rng);
                coords.push(c + z);
            }
            labels.push(class);
        }
    }
    let n = labels.len();
    let noisy = ((n as f64) * noise_fraction).round() as usize;
    let mut chosen: Vec<usize> = (0..n).collect();
    chosen.shuffle(&mut rng);
    chosen.truncate(noisy);
    let mut shuffled: Vec<usize> = chosen.iter().map(|&i| labels[i]).collect();
    shuffled.shuffle(&mut rng);
    for (&i, y) in chosen.iter().zip(shuffled) {
        labels[i] = y;
    }
    PointCloud::from_flat(2, coords)?.with_labels(Labels::Classes(labels))
}

/// Noise-free linear regression data `y = w·x + b` for smoke tests.
pub fn linear_regression(n: usize, dim: usize, seed: u64) -> Result<PointCloud> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..dim).map(|i| 0.5 + i as f64 * 0.25).collect();
    let mut coords = Vec::with_capacity(n * dim);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        y.push(x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + 1.0);
        coords.extend(x);
    }
    PointCloud::from_flat(dim, coords)?.with_labels(Labels::Regression(y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blobs_shape_and_noise() {
        let c = three_blobs(100, 0.2, 4).unwrap();
        assert_eq!(c.len(), 300);
        let Some(Labels::Classes(y)) = c.labels() else {
            panic!("missing labels")
        };
        // Shuffling permutes labels, so class counts are unchanged.
        for k in 0..3 {
            assert_eq!(y.iter().filter(|&&c| c == k).count(), 100);
        }
        let moved = (0..300).filter(|&i| y[i] != i / 100).count();
        assert!(moved > 0 && moved <= 60);
        assert_eq!(c, three_blobs(100, 0.2, 4).unwrap());
    }
}
