use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::pomdp::{default_state_labels, regularize_covariance, uniform_dist, PomdpModel, TransitionTensor, Trajectory};

pub const KMEANS_MAX_ITERATIONS: usize = 100;
pub const KMEANS_TOLERANCE: f64 = 1e-6;
/// Independent k-means++ starts; the lowest inertia wins.
pub const KMEANS_STARTS: usize = 10;

fn all_points(dataset: &[Trajectory]) -> Vec<DVector<f64>> {
    dataset
        .iter()
        .flat_map(|t| t.observations.iter().map(|o| DVector::from_column_slice(o)))
        .collect()
}

fn distinct_count(points: &[DVector<f64>]) -> usize {
    let mut seen: Vec<&DVector<f64>> = Vec::new();
    for p in points {
        if !seen.contains(&p) {
            seen.push(p);
        }
    }
    seen.len()
}

fn nearest(p: &DVector<f64>, centers: &[DVector<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let d = (p - c).norm_squared();
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeans {
    pub centroids: Vec<DVector<f64>>,
    pub assignments: Vec<usize>,
    /// Sum of squared distances to the assigned centroid.
    pub inertia: f64,
    pub iterations: usize,
}

/// Best of [`KMEANS_STARTS`] runs of k-means++ seeding followed by Lloyd
/// iterations. A single run can stall in a poor local optimum.
pub fn kmeans<R: Rng + ?Sized>(points: &[DVector<f64>], k: usize, rng: &mut R) -> Result<KMeans> {
    let distinct = distinct_count(points);
    if k == 0 || distinct < k {
        return Err(Error::DegenerateClustering { k, distinct });
    }
    let mut best = lloyd(points, k, rng);
    for _ in 1..KMEANS_STARTS {
        let run = lloyd(points, k, rng);
        if run.inertia < best.inertia {
            best = run;
        }
    }
    Ok(best)
}

fn lloyd<R: Rng + ?Sized>(points: &[DVector<f64>], k: usize, rng: &mut R) -> KMeans {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    while centroids.len() < k {
        let d2: Vec<f64> = points.iter().map(|p| nearest(p, &centroids).1).collect();
        let total: f64 = d2.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = d2.iter().rposition(|&d| d > 0.0).expect("distinct points remain");
        for (i, &d) in d2.iter().enumerate() {
            if d > 0.0 && u < d {
                pick = i;
                break;
            }
            u -= d;
        }
        centroids.push(points[pick].clone());
    }

    let mut assignments = vec![0; points.len()];
    let mut iterations = 0;
    while iterations < KMEANS_MAX_ITERATIONS {
        iterations += 1;
        for (a, p) in assignments.iter_mut().zip(points) {
            *a = nearest(p, &centroids).0;
        }
        let mut shift: f64 = 0.0;
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let members: Vec<&DVector<f64>> = points.iter().zip(&assignments).filter(|(_, &a)| a == c).map(|(p, _)| p).collect();
            if members.is_empty() {
                continue;
            }
            let mean = members.iter().fold(DVector::zeros(centroid.len()), |acc, p| acc + *p) / members.len() as f64;
            shift = shift.max((&mean - &*centroid).amax());
            *centroid = mean;
        }
        if shift < KMEANS_TOLERANCE {
            break;
        }
    }
    for (a, p) in assignments.iter_mut().zip(points) {
        *a = nearest(p, &centroids).0;
    }
    let inertia = points.iter().zip(&assignments).map(|(p, &a)| (p - &centroids[a]).norm_squared()).sum();
    KMeans {
        centroids,
        assignments,
        inertia,
        iterations,
    }
}

/// Centroids become the state means; covariances start at the identity,
/// transitions and the initial distribution at uniform.
pub fn kmeans_init<R: Rng + ?Sized>(dataset: &[Trajectory], k: usize, num_actions: usize, rng: &mut R) -> Result<PomdpModel> {
    let points = all_points(dataset);
    if points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = points[0].len();
    let km = kmeans(&points, k, rng)?;
    Ok(PomdpModel {
        transitions: TransitionTensor::uniform(k, num_actions),
        obs_means: km.centroids,
        obs_covs: vec![DMatrix::identity(d, d); k],
        initial_dist: uniform_dist(k),
        state_labels: default_state_labels(k),
    })
}

/// Random restart: means are distinct data points, every covariance is the
/// pooled data covariance, transition rows are drawn from a flat Dirichlet.
pub fn random_init<R: Rng + ?Sized>(
    dataset: &[Trajectory],
    num_states: usize,
    num_actions: usize,
    ridge: f64,
    rng: &mut R,
) -> Result<PomdpModel> {
    let points = all_points(dataset);
    if points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let distinct = distinct_count(&points);
    if distinct < num_states {
        return Err(Error::DegenerateClustering { k: num_states, distinct });
    }
    let d = points[0].len();
    let n = points.len() as f64;
    let mean = points.iter().fold(DVector::zeros(d), |acc, p| acc + p) / n;
    let scatter = points.iter().fold(DMatrix::zeros(d, d), |acc, p| {
        let c = p - &mean;
        acc + &c * c.transpose()
    });
    let cov = regularize_covariance(&(scatter / n), ridge.max(1e-6));

    let mut obs_means: Vec<DVector<f64>> = Vec::with_capacity(num_states);
    while obs_means.len() < num_states {
        let p = &points[rng.random_range(0..points.len())];
        if !obs_means.contains(p) {
            obs_means.push(p.clone());
        }
    }

    let mut transitions = TransitionTensor::zeros(num_states, num_actions);
    for s in 0..num_states {
        for a in 0..num_actions {
            let row = transitions.row_mut(s, a);
            for v in row.iter_mut() {
                *v = Exp1.sample(rng);
            }
            let sum: f64 = row.iter().sum();
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
    }

    Ok(PomdpModel {
        transitions,
        obs_means,
        obs_covs: vec![cov; num_states],
        initial_dist: uniform_dist(num_states),
        state_labels: default_state_labels(num_states),
    })
}
