use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{DataError, LabeledDataset};

/// Lloyd iteration cap.
pub const KMEANS_MAX_ITER: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// Euclidean k-means with k-means++ seeding; empty clusters keep their
/// previous centroid.
pub fn kmeans<R: Rng>(points: &[&[f64]], k: usize, max_iter: usize, rng: &mut R) -> KMeansResult {
    assert!(k >= 1 && k <= points.len(), "need 1 <= k <= number of points");
    let dim = points[0].len();
    let mut centroids = vec![points[rng.random_range(0..points.len())].to_vec()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let pick = match WeightedIndex::new(&d2) {
            Ok(w) => w.sample(rng),
            // all remaining mass is zero: the points coincide with centroids
            Err(_) => rng.random_range(0..points.len()),
        };
        centroids.push(points[pick].to_vec());
        let last = centroids.last().expect("just pushed");
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, last));
        }
    }

    let mut assignment = vec![usize::MAX; points.len()];
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut changed = false;
        for (a, p) in assignment.iter_mut().zip(points) {
            let c = nearest(p, &centroids);
            if *a != c {
                *a = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (&a, p) in assignment.iter().zip(points) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p.iter()) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    KMeansResult { centroids, assignment, iterations }
}

/// The `m_r` samples of `class` most often nearest to a k-means centroid
/// (`k = m_r`) over `runs` independently seeded clusterings.
///
/// Frequency ties go to the lexicographically smaller sample id.
pub fn select_representatives(
    data: &LabeledDataset,
    class: &str,
    m_r: usize,
    runs: usize,
    seed: u64,
) -> Result<Vec<String>, DataError> {
    if m_r == 0 || runs == 0 {
        return Err(DataError::InvalidConfig("m_r and runs must be positive".into()));
    }
    let members = data.members(class);
    if members.is_empty() {
        return Err(DataError::EmptyClass(class.to_string()));
    }
    if members.len() < m_r {
        return Err(DataError::ClassTooSmall { class: class.to_string(), size: members.len(), needed: m_r });
    }
    let mut ranked: Vec<usize> = (0..members.len()).collect();
    if members.len() > m_r {
        let points: Vec<&[f64]> = members.iter().map(|&i| data.matrix[i].as_slice()).collect();
        let picks: Vec<Vec<usize>> = (0..runs)
            .into_par_iter()
            .map(|run| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(run as u64);
                let km = kmeans(&points, m_r, KMEANS_MAX_ITER, &mut rng);
                let mut chosen: Vec<usize> = km.centroids.iter().map(|c| nearest_point(&points, c)).collect();
                chosen.sort_unstable();
                chosen.dedup();
                chosen
            })
            .collect();
        let mut freq = vec![0usize; members.len()];
        for run in &picks {
            for &p in run {
                freq[p] += 1;
            }
        }
        let ids = |p: usize| &data.sample_ids[members[p]];
        ranked.sort_by(|&a, &b| freq[b].cmp(&freq[a]).then_with(|| ids(a).cmp(ids(b))));
    }
    let mut out: Vec<String> = ranked[..m_r].iter().map(|&p| data.sample_ids[members[p]].clone()).collect();
    out.sort();
    Ok(out)
}

fn nearest_point(points: &[&[f64]], centroid: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        let d = sq_dist(p, centroid);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}
