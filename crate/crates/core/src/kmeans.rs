//! Lloyd's k-means with k-means++ seeding and warm starts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::dist2;
use crate::scalar::Scalar;
use crate::vecio::VectorDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KMeansInit {
    PlusPlus,
    /// Start from centroids supplied by the caller.
    Provided,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iters: usize,
    /// Stop once an iteration improves the SSE by less than `tol` relative.
    pub tol: f64,
    pub seed: u64,
    pub init: KMeansInit,
}

impl KMeansConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            max_iters: 100,
            tol: 1e-4,
            seed: 0,
            init: KMeansInit::PlusPlus,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::arg("k must be at least 1"));
        }
        if self.max_iters == 0 {
            return Err(Error::arg("max_iters must be at least 1"));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::arg("tol must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult<T> {
    pub centroids: VectorDataset<T>,
    pub assignments: Vec<u32>,
    pub sse: f64,
    /// SSE after seeding and after every Lloyd iteration.
    pub sse_trace: Vec<f64>,
}

/// Nearest centroid of every point (ties go to the lowest index) and the
/// resulting sum of squared distances.
pub fn assign<T: Scalar>(
    data: &VectorDataset<T>,
    centroids: &VectorDataset<T>,
) -> Result<(Vec<u32>, f64)> {
    if centroids.is_empty() {
        return Err(Error::arg("no centroids"));
    }
    if !data.is_empty() && data.dim() != centroids.dim() {
        return Err(Error::arg(format!(
            "data dimension {} does not match centroid dimension {}",
            data.dim(),
            centroids.dim()
        )));
    }
    let (a, dists) = assign_with_dists(data, centroids);
    Ok((a, dists.iter().sum()))
}

pub(crate) fn nearest<T: Scalar, U: Scalar>(x: &[T], centroids: &VectorDataset<U>) -> (u32, f64) {
    let mut best = (0u32, f64::INFINITY);
    for (j, c) in centroids.rows().enumerate() {
        let d = dist2(x, c);
        if d < best.1 {
            best = (j as u32, d);
        }
    }
    best
}

fn assign_with_dists<T: Scalar>(
    data: &VectorDataset<T>,
    centroids: &VectorDataset<T>,
) -> (Vec<u32>, Vec<f64>) {
    (0..data.len())
        .into_par_iter()
        .map(|i| nearest(data.row(i), centroids))
        .unzip()
}

fn plus_plus<T: Scalar>(data: &VectorDataset<T>, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = data.len();
    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let first = rng.random_range(0..n);
    chosen.push(first);
    taken[first] = true;
    let mut d2: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| dist2(data.row(i), data.row(first)))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave `target` just past the final partial sum.
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            // Fewer distinct points than k: fall back to unused duplicates.
            taken.iter().position(|t| !t).unwrap()
        };
        taken[next] = true;
        chosen.push(next);
        let c = data.row(next);
        d2.par_iter_mut().enumerate().for_each(|(i, v)| {
            let nd = dist2(data.row(i), c);
            if nd < *v {
                *v = nd;
            }
        });
    }
    chosen
}

/// Recomputes centroids as cluster means. Empty clusters are moved onto the
/// points farthest from their current centroid.
fn update<T: Scalar>(
    data: &VectorDataset<T>,
    assignments: &[u32],
    dists: &[f64],
    k: usize,
) -> VectorDataset<T> {
    let d = data.dim();
    let mut sums = vec![0.0f64; k * d];
    let mut counts = vec![0usize; k];
    for (i, &a) in assignments.iter().enumerate() {
        let a = a as usize;
        counts[a] += 1;
        for (s, v) in sums[a * d..(a + 1) * d].iter_mut().zip(data.row(i)) {
            *s += v.to_acc();
        }
    }
    let mut centroids = vec![T::zero(); k * d];
    for c in 0..k {
        if counts[c] > 0 {
            let inv = 1.0 / counts[c] as f64;
            for (dst, s) in centroids[c * d..(c + 1) * d]
                .iter_mut()
                .zip(&sums[c * d..(c + 1) * d])
            {
                *dst = T::from_acc(s * inv);
            }
        }
    }
    let empty: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
    if !empty.is_empty() {
        let mut far: Vec<usize> = (0..data.len()).collect();
        far.sort_by(|&a, &b| dists[b].total_cmp(&dists[a]).then(a.cmp(&b)));
        for (c, &p) in empty.iter().zip(far.iter()) {
            centroids[c * d..(c + 1) * d].copy_from_slice(data.row(p));
        }
    }
    VectorDataset::new(d, centroids).expect("centroids are finite means of finite data")
}

/// Lloyd iterations until `max_iters` or the relative SSE improvement drops
/// below `tol`. The SSE never increases from one iteration to the next.
pub fn kmeans_fit<T: Scalar>(
    data: &VectorDataset<T>,
    config: &KMeansConfig,
    warm_start: Option<&VectorDataset<T>>,
) -> Result<KMeansResult<T>> {
    config.validate()?;
    data.ensure_nonempty("k-means")?;
    let k = config.k;
    if k > data.len() {
        return Err(Error::arg(format!(
            "k = {k} exceeds the number of points ({})",
            data.len()
        )));
    }
    if data.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("k-means input contains non-finite values"));
    }

    let mut centroids = match (warm_start, config.init) {
        (Some(w), _) => {
            if w.len() != k || w.dim() != data.dim() {
                return Err(Error::arg(format!(
                    "warm start is {}x{}, expected {k}x{}",
                    w.len(),
                    w.dim(),
                    data.dim()
                )));
            }
            w.clone()
        }
        (None, KMeansInit::Provided) => {
            return Err(Error::arg("init = provided requires warm-start centroids"));
        }
        (None, KMeansInit::PlusPlus) => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            data.select(&plus_plus(data, k, &mut rng))?
        }
    };

    let (mut assignments, mut dists) = assign_with_dists(data, &centroids);
    let mut sse: f64 = dists.iter().sum();
    let mut sse_trace = vec![sse];

    for _ in 0..config.max_iters {
        let next = update(data, &assignments, &dists, k);
        let (next_assign, next_dists) = assign_with_dists(data, &next);
        let next_sse: f64 = next_dists.iter().sum();
        if next_sse > sse {
            // Only reachable through rounding of the centroids to `T`.
            break;
        }
        let improvement = sse - next_sse;
        centroids = next;
        assignments = next_assign;
        dists = next_dists;
        sse_trace.push(next_sse);
        let converged = improvement <= config.tol * sse;
        sse = next_sse;
        if converged {
            break;
        }
    }

    Ok(KMeansResult {
        centroids,
        assignments,
        sse,
        sse_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vecio::gen_synthetic;

    fn ds1(v: &[f64]) -> VectorDataset<f64> {
        VectorDataset::new(1, v.to_vec()).unwrap()
    }

    #[test]
    fn distinct_points_are_a_fixed_point() {
        let data = VectorDataset::new(2, vec![0.0f32, 0.0, 5.0, 1.0, -3.0, 2.0]).unwrap();
        let cfg = KMeansConfig {
            init: KMeansInit::Provided,
            ..KMeansConfig::new(3)
        };
        let r = kmeans_fit(&data, &cfg, Some(&data)).unwrap();
        assert_eq!(r.sse, 0.0);
        assert_eq!(r.assignments, vec![0, 1, 2]);
        assert_eq!(r.centroids, data);
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let data = ds1(&[1.0, 2.0, 3.0, 6.0]);
        let r = kmeans_fit(&data, &KMeansConfig::new(1), None).unwrap();
        assert!((r.centroids.as_slice()[0] - 3.0).abs() < 1e-12);
        // Sum of squared deviations from 3: 4 + 1 + 0 + 9.
        assert!((r.sse - 14.0).abs() < 1e-12);
    }

    /// Minimum SSE over every 2-partition of a 1-d point set.
    fn best_two_partition(points: &[f64]) -> f64 {
        let n = points.len();
        let mut best = f64::INFINITY;
        for mask in 1..(1u32 << n) - 1 {
            let mut sse = 0.0;
            for side in [true, false] {
                let members: Vec<f64> = (0..n)
                    .filter(|&i| ((mask >> i) & 1 == 1) == side)
                    .map(|i| points[i])
                    .collect();
                let mean = members.iter().sum::<f64>() / members.len() as f64;
                sse += members.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
            }
            best = best.min(sse);
        }
        best
    }

    #[test]
    fn two_well_separated_groups() {
        let pts = [0.0, 0.0, 0.0, 10.0, 10.0, 10.0];
        assert_eq!(best_two_partition(&pts), 0.0);
        for seed in 0..8 {
            let r = kmeans_fit(&ds1(&pts), &KMeansConfig::new(2).with_seed(seed), None).unwrap();
            let mut c = r.centroids.as_slice().to_vec();
            c.sort_by(f64::total_cmp);
            assert_eq!(c, vec![0.0, 10.0]);
            assert_eq!(r.sse, best_two_partition(&pts));
        }
    }

    #[test]
    fn argument_errors() {
        let data = ds1(&[1.0, 2.0]);
        assert!(kmeans_fit(&data, &KMeansConfig::new(3), None).is_err());
        assert!(kmeans_fit(&data, &KMeansConfig::new(0), None).is_err());
        let provided = KMeansConfig {
            init: KMeansInit::Provided,
            ..KMeansConfig::new(1)
        };
        assert!(kmeans_fit(&data, &provided, None).is_err());
        let wrong = ds1(&[1.0, 2.0]);
        assert!(kmeans_fit(&data, &KMeansConfig::new(1), Some(&wrong)).is_err());
        assert!(kmeans_fit(&VectorDataset::<f64>::empty(), &KMeansConfig::new(1), None).is_err());
        assert!(assign(&data, &VectorDataset::new(2, vec![0.0, 0.0]).unwrap()).is_err());
    }

    #[test]
    fn assign_breaks_ties_by_lowest_index() {
        let data = ds1(&[0.0]);
        let cents = ds1(&[-1.0, 1.0]);
        assert_eq!(assign(&data, &cents).unwrap(), (vec![0], 1.0));
    }

    #[test]
    fn sse_trace_is_monotone_and_consistent() {
        let data = gen_synthetic::<f32>(2000, 8, 6, 3).unwrap();
        let r = kmeans_fit(&data, &KMeansConfig::new(16).with_seed(1), None).unwrap();
        for w in r.sse_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-7 * w[0]);
        }
        let (a, sse) = assign(&data, &r.centroids).unwrap();
        assert_eq!(a, r.assignments);
        assert!((sse - r.sse).abs() <= 1e-4 * r.sse);
    }

    #[test]
    fn warm_start_never_ends_worse() {
        let data = gen_synthetic::<f32>(1000, 4, 5, 9).unwrap();
        let warm = data.slice_rows(0, 12).unwrap();
        let (_, warm_sse) = assign(&data, &warm).unwrap();
        let r = kmeans_fit(&data, &KMeansConfig::new(12), Some(&warm)).unwrap();
        assert!(r.sse <= warm_sse * (1.0 + 1e-7));
    }

    #[test]
    fn empty_clusters_are_reseeded() {
        // Two of the warm-start centroids sit far from every point.
        let data = ds1(&[0.0, 0.1, 0.2, 5.0, 5.1, 9.0]);
        let warm = ds1(&[0.0, 100.0, 200.0]);
        let r = kmeans_fit(&data, &KMeansConfig::new(3), Some(&warm)).unwrap();
        assert_eq!(r.centroids.len(), 3);
        let mut used: Vec<u32> = r.assignments.clone();
        used.sort_unstable();
        used.dedup();
        assert_eq!(used.len(), 3);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let data = gen_synthetic::<f32>(500, 6, 4, 2).unwrap();
        let cfg = KMeansConfig::new(8).with_seed(42);
        assert_eq!(
            kmeans_fit(&data, &cfg, None).unwrap(),
            kmeans_fit(&data, &cfg, None).unwrap()
        );
    }

    #[test]
    fn duplicate_heavy_data_seeds_k_centroids() {
        let data = ds1(&[1.0, 1.0, 1.0, 1.0]);
        let r = kmeans_fit(&data, &KMeansConfig::new(3), None).unwrap();
        assert_eq!(r.centroids.len(), 3);
        assert_eq!(r.sse, 0.0);
    }
}
