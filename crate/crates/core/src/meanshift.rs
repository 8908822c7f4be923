//! Flat-kernel mean shift clustering.
//!
//! Every point is shifted to the mean of its neighbours within `bandwidth`
//! until the shift magnitude drops below the tolerance (or the iteration cap
//! is hit, which is reported). Converged modes lying within `bandwidth / 2`
//! of each other are merged; ties merge toward the mode discovered first in
//! input order, which keeps labelling deterministic.
//!
//! When points live on the unit sphere (as cosine-geometry embeddings do),
//! enable `on_sphere` to re-normalize the shifted point after every mean
//! step; Euclidean distance between unit vectors is then a monotone function
//! of cosine distance.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Bandwidth selection: explicit, or the median pairwise distance over a
/// sample of at most 500 points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth<T> {
    Auto,
    Fixed(T),
}

/// Mean-shift configuration.
#[derive(Debug, Clone)]
pub struct MeanShift<T> {
    pub bandwidth: Bandwidth<T>,
    pub max_iterations: usize,
    pub shift_tolerance: T,
    pub on_sphere: bool,
}

impl<T: Real> Default for MeanShift<T> {
    fn default() -> Self {
        Self {
            bandwidth: Bandwidth::Auto,
            max_iterations: 300,
            shift_tolerance: T::of(1e-5),
            on_sphere: false,
        }
    }
}

/// Clustering outcome. `converged` is false when any point exhausted the
/// iteration cap before its shift fell under the tolerance.
#[derive(Debug, Clone)]
pub struct Clustering<T> {
    pub labels: Vec<usize>,
    pub modes: Vec<Vec<T>>,
    pub bandwidth: T,
    pub converged: bool,
}

impl<T> Clustering<T> {
    pub fn cluster_count(&self) -> usize {
        self.modes.len()
    }
}

fn distance<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
        .sqrt()
}

fn renormalize<T: Real>(v: &mut [T]) {
    let norm = v.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt();
    if norm > T::zero() {
        for x in v.iter_mut() {
            *x = *x / norm;
        }
    }
}

impl<T: Real> MeanShift<T> {
    /// Cluster `points` (all of equal dimension). `seed` drives only the
    /// subsample used by automatic bandwidth estimation; with 500 points or
    /// fewer the estimate uses every pair and the seed is ignored.
    pub fn cluster(&self, points: &[Vec<T>], seed: u64) -> Result<Clustering<T>> {
        if points.is_empty() {
            return Err(Error::InvalidConfig(
                "mean shift needs at least one point".into(),
            ));
        }
        let dim = points[0].len();
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidConfig(
                "mean shift points must share a dimension".into(),
            ));
        }
        let bandwidth = match self.bandwidth {
            Bandwidth::Fixed(b) => {
                if b <= T::zero() {
                    return Err(Error::InvalidConfig("bandwidth must be positive".into()));
                }
                b
            }
            Bandwidth::Auto => self.estimate_bandwidth(points, seed),
        };

        let mut converged = true;
        let mut modes_per_point: Vec<Vec<T>> = Vec::with_capacity(points.len());
        for start in points {
            let mut current = start.clone();
            let mut settled = false;
            for _ in 0..self.max_iterations {
                let mut mean = vec![T::zero(); dim];
                let mut count = 0usize;
                for p in points {
                    if distance(&current, p) <= bandwidth {
                        for (m, &x) in mean.iter_mut().zip(p) {
                            *m = *m + x;
                        }
                        count += 1;
                    }
                }
                // The point itself is always within its own neighbourhood.
                let n = T::from_usize(count).unwrap();
                for m in mean.iter_mut() {
                    *m = *m / n;
                }
                if self.on_sphere {
                    renormalize(&mut mean);
                }
                let shift = distance(&current, &mean);
                current = mean;
                if shift < self.shift_tolerance {
                    settled = true;
                    break;
                }
            }
            if !settled {
                converged = false;
            }
            modes_per_point.push(current);
        }

        // Merge modes within bandwidth / 2, first-discovered mode wins.
        let merge_radius = bandwidth / T::of(2.0);
        let mut modes: Vec<Vec<T>> = Vec::new();
        let mut labels = Vec::with_capacity(points.len());
        for mode in modes_per_point {
            let found = modes
                .iter()
                .position(|m| distance(m, &mode) <= merge_radius);
            match found {
                Some(label) => labels.push(label),
                None => {
                    labels.push(modes.len());
                    modes.push(mode);
                }
            }
        }

        Ok(Clustering {
            labels,
            modes,
            bandwidth,
            converged,
        })
    }

    /// Median pairwise Euclidean distance over at most 500 points; falls
    /// back to 1 when there are no pairs or every distance is zero.
    fn estimate_bandwidth(&self, points: &[Vec<T>], seed: u64) -> T {
        const SAMPLE: usize = 500;
        let sample: Vec<&Vec<T>> = if points.len() <= SAMPLE {
            points.iter().collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut indices: Vec<usize> = (0..points.len()).collect();
            indices.shuffle(&mut rng);
            indices.truncate(SAMPLE);
            indices.sort_unstable();
            indices.into_iter().map(|i| &points[i]).collect()
        };
        let mut dists = Vec::with_capacity(sample.len() * (sample.len() - 1) / 2);
        for i in 0..sample.len() {
            for j in (i + 1)..sample.len() {
                dists.push(distance(sample[i], sample[j]));
            }
        }
        if dists.is_empty() {
            return T::one();
        }
        dists.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
        let median = dists[dists.len() / 2];
        if median > T::zero() {
            median
        } else {
            T::one()
        }
    }
}
