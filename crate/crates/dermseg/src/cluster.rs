//! K-means over pixel colors and lesion-cluster selection.
//!
//! Lloyd's algorithm on raw RGB samples with seeded k-means++ init. Every
//! step is deterministic for a fixed seed: assignment ties go to the lowest
//! centroid index, update sums accumulate in pixel order, and empty
//! clusters are re-seeded to the currently worst-fit pixel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::colormodel::{fraction_in_range, ColorRange};
use crate::imgcore::RgbImage;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    /// Number of clusters.
    pub k: usize,
    pub max_iters: usize,
    /// Convergence threshold on the largest centroid shift, measured in
    /// units of the [0,1]-normalized color cube.
    pub tol: f64,
    /// Seed for the k-means++ initialization.
    pub seed: u64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self {
            k: 5,
            max_iters: 100,
            tol: 1e-4,
            seed: 0,
        }
    }
}

impl KMeansParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParam("kmeans k must be >= 1".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParam("kmeans max_iters must be >= 1".into()));
        }
        if self.tol < 0.0 {
            return Err(Error::InvalidParam("kmeans tol must be >= 0".into()));
        }
        Ok(())
    }
}

/// Output of [`kmeans`]: centroids in RGB space plus per-pixel labels and
/// convergence diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub centroids: Vec<[f64; 3]>,
    pub labels: Vec<usize>,
    /// Sum of squared distances of pixels to their assigned centroids.
    pub inertia: f64,
    /// Full assign-update rounds actually run.
    pub iterations: usize,
    /// Post-assignment inertia per round, plus the final consistency pass.
    pub inertia_trace: Vec<f64>,
}

#[inline]
fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dr = a[0] - b[0];
    let dg = a[1] - b[1];
    let db = a[2] - b[2];
    dr * dr + dg * dg + db * db
}

fn to_point(p: [u8; 3]) -> [f64; 3] {
    [p[0] as f64, p[1] as f64, p[2] as f64]
}

/// Seeded k-means++: first centroid uniform, then each next centroid drawn
/// with probability proportional to the squared distance to the nearest
/// already-chosen one.
fn init_plus_plus(points: &[[f64; 3]], k: usize, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..points.len())]);

    let mut d2: Vec<f64> = points.iter().map(|&p| dist2(p, centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            points[chosen]
        } else {
            // every remaining point coincides with a centroid
            points[rng.gen_range(0..points.len())]
        };
        centroids.push(next);
        for (slot, &p) in d2.iter_mut().zip(points) {
            *slot = slot.min(dist2(p, next));
        }
    }
    centroids
}

/// Argmin assignment; ties go to the lowest centroid index. Returns labels
/// and the squared distance of each pixel to its centroid.
fn assign(points: &[[f64; 3]], centroids: &[[f64; 3]]) -> (Vec<usize>, Vec<f64>) {
    points
        .par_iter()
        .map(|&p| {
            let mut best = 0usize;
            let mut best_d = dist2(p, centroids[0]);
            for (j, &c) in centroids.iter().enumerate().skip(1) {
                let d = dist2(p, c);
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            (best, best_d)
        })
        .unzip()
}

/// Lloyd's algorithm over the image's pixel colors.
pub fn kmeans(img: &RgbImage, params: &KMeansParams) -> Result<ClusterResult> {
    params.validate()?;
    let points: Vec<[f64; 3]> = img.data().iter().map(|&p| to_point(p)).collect();
    if params.k > points.len() {
        return Err(Error::InvalidParam(format!(
            "k = {} exceeds the pixel count {}",
            params.k,
            points.len()
        )));
    }

    let mut centroids = init_plus_plus(&points, params.k, params.seed);
    let mut trace = Vec::new();
    let mut iterations = 0;

    for it in 1..=params.max_iters {
        let (labels, dists) = assign(&points, &centroids);
        trace.push(dists.iter().sum());

        // means accumulated in pixel order
        let mut sums = vec![[0.0f64; 3]; params.k];
        let mut counts = vec![0usize; params.k];
        for (&label, &p) in labels.iter().zip(&points) {
            for c in 0..3 {
                sums[label][c] += p[c];
            }
            counts[label] += 1;
        }

        let mut next: Vec<[f64; 3]> = (0..params.k)
            .map(|j| {
                if counts[j] > 0 {
                    let n = counts[j] as f64;
                    [sums[j][0] / n, sums[j][1] / n, sums[j][2] / n]
                } else {
                    centroids[j]
                }
            })
            .collect();

        // re-seed each empty cluster to the worst-fit pixel, one pixel per
        // cluster, scanning in ascending cluster order
        let mut taken: Vec<usize> = Vec::new();
        for j in 0..params.k {
            if counts[j] > 0 {
                continue;
            }
            let mut far = None;
            let mut far_d = -1.0;
            for (i, &d) in dists.iter().enumerate() {
                if d > far_d && !taken.contains(&i) {
                    far_d = d;
                    far = Some(i);
                }
            }
            if let Some(i) = far {
                taken.push(i);
                next[j] = points[i];
            }
        }

        let shift = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| dist2(*a, *b).sqrt())
            .fold(0.0f64, f64::max);
        centroids = next;
        iterations = it;
        if shift / 255.0 <= params.tol {
            break;
        }
    }

    // final pass so labels are the argmin of the returned centroids
    let (labels, dists) = assign(&points, &centroids);
    let inertia = dists.iter().sum();
    trace.push(inertia);

    Ok(ClusterResult {
        centroids,
        labels,
        inertia,
        iterations,
        inertia_trace: trace,
    })
}

/// Pixel indices belonging to each cluster, in row-major pixel order.
pub fn cluster_members(result: &ClusterResult, k: usize) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); k];
    for (i, &label) in result.labels.iter().enumerate() {
        members[label].push(i);
    }
    members
}

/// Ids of clusters whose member-pixel fraction inside `range` reaches
/// `min_fraction`, ordered by descending fraction, then descending size,
/// then ascending id.
pub fn select_lesion_clusters(
    img: &RgbImage,
    result: &ClusterResult,
    range: &ColorRange,
    min_fraction: f64,
) -> Vec<usize> {
    let members = cluster_members(result, result.centroids.len());
    let mut scored: Vec<(usize, f64, usize)> = members
        .iter()
        .enumerate()
        .map(|(id, ids)| (id, fraction_in_range(img, ids, range), ids.len()))
        .filter(|&(_, fraction, _)| fraction >= min_fraction)
        .collect();
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap()
            .then(b.2.cmp(&a.2))
            .then(a.0.cmp(&b.0))
    });
    scored.into_iter().map(|(id, _, _)| id).collect()
}
