//! Lloyd's k-means with k-means++ seeding and restarts, used to turn resampled
//! particles into point estimates.

use rand::Rng;

use crate::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansParams {
    pub max_iterations: usize,
    pub restarts: usize,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self { max_iterations: 20, restarts: 5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub centers: Vec<Vector>,
    pub assignments: Vec<usize>,
    /// Within-cluster sum of squared distances.
    pub inertia: f64,
}

fn nearest(point: &Vector, centers: &[Vector]) -> (usize, f64) {
    centers
        .iter()
        .enumerate()
        .map(|(i, c)| (i, (point - c).norm_squared()))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

fn seed_centers<R: Rng + ?Sized>(points: &[Vector], k: usize, rng: &mut R) -> Vec<Vector> {
    let mut centers = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..points.len())].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| (p - &centers[0]).norm_squared()).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = points.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                acc += d;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[pick].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min((p - &c).norm_squared());
        }
        centers.push(c);
    }
    centers
}

fn lloyd(points: &[Vector], mut centers: Vec<Vector>, max_iterations: usize) -> Clustering {
    let k = centers.len();
    let dim = points[0].len();
    let mut assignments = vec![usize::MAX; points.len()];
    for _ in 0..max_iterations {
        let mut changed = false;
        for (a, p) in assignments.iter_mut().zip(points) {
            let (idx, _) = nearest(p, &centers);
            if *a != idx {
                *a = idx;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![Vector::zeros(dim); k];
        let mut counts = vec![0usize; k];
        for (&a, p) in assignments.iter().zip(points) {
            sums[a] += p;
            counts[a] += 1;
        }
        // empty clusters keep their previous center
        for ((c, s), n) in centers.iter_mut().zip(sums).zip(counts) {
            if n > 0 {
                *c = s / n as f64;
            }
        }
    }
    let mut inertia = 0.0;
    for (a, p) in assignments.iter_mut().zip(points) {
        let (idx, d) = nearest(p, &centers);
        *a = idx;
        inertia += d;
    }
    Clustering { centers, assignments, inertia }
}

/// Best-of-`restarts` clustering into `k` groups. `k` is clamped to the number of points.
pub fn kmeans<R: Rng + ?Sized>(
    points: &[Vector],
    k: usize,
    params: KMeansParams,
    rng: &mut R,
) -> Clustering {
    let k = k.min(points.len());
    if k == 0 {
        return Clustering { centers: Vec::new(), assignments: Vec::new(), inertia: 0.0 };
    }
    let mut best: Option<Clustering> = None;
    for _ in 0..params.restarts.max(1) {
        let seeds = seed_centers(points, k, rng);
        let c = lloyd(points, seeds, params.max_iterations.max(1));
        if best.as_ref().is_none_or(|b| c.inertia < b.inertia) {
            best = Some(c);
        }
    }
    best.expect("at least one restart")
}
