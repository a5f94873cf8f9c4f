//! Lloyd's k-means with k-means++ seeding, used to initialize topic loadings.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::scalar::Scalar;

pub const MAX_LLOYD_ITERS: usize = 300;

#[derive(Debug, Clone)]
pub struct KMeans<T> {
    pub labels: Vec<usize>,
    pub centroids: Array2<T>,
    pub iterations: usize,
}

fn sq_dist<T: Scalar>(a: ArrayView1<T>, b: ArrayView1<T>) -> T {
    a.iter().zip(b.iter()).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

fn nearest<T: Scalar>(row: ArrayView1<T>, centroids: &Array2<T>) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (k, c) in centroids.axis_iter(Axis(0)).enumerate() {
        let d = sq_dist(row, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

/// Cluster the rows of `data` into `k` groups. Deterministic given `seed`.
pub fn kmeans<T: Scalar>(data: ArrayView2<T>, k: usize, seed: u64, max_iters: usize) -> Result<KMeans<T>> {
    let (n, dim) = data.dim();
    if k == 0 {
        return Err(Error::invalid("number of clusters must be at least 1"));
    }
    if k > n {
        return Err(Error::invalid(format!("cannot form {k} clusters from {n} rows")));
    }
    let mut rng = seeded(seed);

    // k-means++ seeding
    let mut centroids = Array2::<T>::zeros((k, dim));
    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&data.row(first));
    let mut d2: Array1<f64> = data
        .axis_iter(Axis(0))
        .map(|r| sq_dist(r, centroids.row(0)).as_f64())
        .collect();
    for c in 1..k {
        let total: f64 = d2.sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).assign(&data.row(pick));
        for (i, r) in data.axis_iter(Axis(0)).enumerate() {
            let d = sq_dist(r, centroids.row(c)).as_f64();
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }

    let mut labels = vec![usize::MAX; n];
    let mut iterations = 0;
    loop {
        let mut changed = false;
        for (i, r) in data.axis_iter(Axis(0)).enumerate() {
            let (best, _) = nearest(r, &centroids);
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        reseed_empty_clusters(data, &mut labels, &centroids, k);
        centroids = centroids_of(data, &labels, k);
        iterations += 1;
        if !changed || iterations >= max_iters {
            break;
        }
    }
    Ok(KMeans {
        labels,
        centroids,
        iterations,
    })
}

/// Move the point farthest from its centroid into each empty cluster.
fn reseed_empty_clusters<T: Scalar>(data: ArrayView2<T>, labels: &mut [usize], centroids: &Array2<T>, k: usize) {
    loop {
        let mut counts = vec![0usize; k];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let mut far = None;
        let mut far_d = T::neg_infinity();
        for (i, r) in data.axis_iter(Axis(0)).enumerate() {
            if counts[labels[i]] < 2 {
                continue;
            }
            let d = sq_dist(r, centroids.row(labels[i]));
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        match far {
            Some(i) => labels[i] = empty,
            None => return,
        }
    }
}

fn centroids_of<T: Scalar>(data: ArrayView2<T>, labels: &[usize], k: usize) -> Array2<T> {
    let mut sums = Array2::<T>::zeros((k, data.ncols()));
    let mut counts = vec![0usize; k];
    for (r, &l) in data.axis_iter(Axis(0)).zip(labels) {
        let mut row = sums.row_mut(l);
        row += &r;
        counts[l] += 1;
    }
    for (mut row, &c) in sums.axis_iter_mut(Axis(0)).zip(&counts) {
        if c > 0 {
            let c = T::from_usize_lossy(c);
            row.mapv_inplace(|x| x / c);
        }
    }
    sums
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn separates_obvious_clusters() {
        let data = array![[0.0, 0.0], [0.1, 0.0], [10.0, 10.0], [10.1, 10.0], [0.0, 0.1], [10.0, 10.1]];
        let km = kmeans(data.view(), 2, 3, MAX_LLOYD_ITERS).unwrap();
        assert_eq!(km.labels[0], km.labels[1]);
        assert_eq!(km.labels[0], km.labels[4]);
        assert_eq!(km.labels[2], km.labels[3]);
        assert_ne!(km.labels[0], km.labels[2]);
    }

    #[test]
    fn no_empty_clusters_with_duplicates() {
        let data = array![[1.0], [1.0], [1.0], [1.0], [2.0]];
        let km = kmeans(data.view(), 3, 0, MAX_LLOYD_ITERS).unwrap();
        for k in 0..3 {
            assert!(km.labels.contains(&k), "cluster {k} empty: {:?}", km.labels);
        }
    }

    #[test]
    fn too_many_clusters() {
        let data = array![[1.0], [2.0]];
        assert!(kmeans(data.view(), 3, 0, 10).is_err());
    }
}
