//! Shared test oracles, independent of the library's computation paths.
#![allow(dead_code)] // each test target uses its own subset


use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use subskel::Trajectory;

/// Exhaustive minimum over all monotone couplings, walking forward from
/// (0, 0) and accumulating along each path. No memoization: intended for
/// trajectories of at most ~8 vertices.
pub fn brute_force_coupling(p: &Trajectory, q: &Trajectory, sum: bool) -> f64 {
    fn euclid(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }
    fn walk(p: &Trajectory, q: &Trajectory, i: usize, j: usize, acc: f64, sum: bool) -> f64 {
        let d = euclid(p.vertex(i), q.vertex(j));
        let acc = if sum { acc + d } else { acc.max(d) };
        let (m, n) = (p.len(), q.len());
        if i == m - 1 && j == n - 1 {
            return acc;
        }
        let mut best = f64::INFINITY;
        if i + 1 < m {
            best = best.min(walk(p, q, i + 1, j, acc, sum));
        }
        if j + 1 < n {
            best = best.min(walk(p, q, i, j + 1, acc, sum));
        }
        if i + 1 < m && j + 1 < n {
            best = best.min(walk(p, q, i + 1, j + 1, acc, sum));
        }
        best
    }
    walk(p, q, 0, 0, if sum { 0.0 } else { f64::NEG_INFINITY }, sum)
}

pub fn brute_df(p: &Trajectory, q: &Trajectory) -> f64 {
    brute_force_coupling(p, q, false)
}

pub fn brute_dtw(p: &Trajectory, q: &Trajectory) -> f64 {
    brute_force_coupling(p, q, true)
}

pub fn random_trajectory(rng: &mut ChaCha8Rng, len: usize, dim: usize, spread: f64) -> Trajectory {
    let coords = (0..len * dim)
        .map(|_| rng.gen_range(-spread..spread))
        .collect();
    Trajectory::from_flat(dim, coords).unwrap()
}

/// Random-walk trajectory: step increments keep the shape locally smooth.
pub fn random_walk(rng: &mut ChaCha8Rng, len: usize, dim: usize, step: f64) -> Trajectory {
    let mut point = vec![0.0f64; dim];
    for v in point.iter_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    let mut coords = Vec::with_capacity(len * dim);
    for _ in 0..len {
        coords.extend_from_slice(&point);
        for v in point.iter_mut() {
            *v += rng.gen_range(-step..step);
        }
    }
    Trajectory::from_flat(dim, coords).unwrap()
}

/// Applies a shared rigid motion (rotation about the z axis for 3D, plane
/// rotation for 2D, identity for 1D) plus a translation.
pub fn rigid_motion(t: &Trajectory, angle: f64, shift: f64) -> Trajectory {
    let dim = t.dim();
    let (s, c) = angle.sin_cos();
    let moved: Vec<Vec<f64>> = t
        .vertices()
        .map(|v| {
            let mut out = v.to_vec();
            if dim >= 2 {
                let (x, y) = (v[0], v[1]);
                out[0] = c * x - s * y;
                out[1] = s * x + c * y;
            }
            for coord in out.iter_mut() {
                *coord += shift;
            }
            out
        })
        .collect();
    Trajectory::from_vertices(&moved).unwrap()
}

/// Monotone resampling of `t`'s polygonal image: every original vertex is
/// kept and each segment gains `0..=extra` evenly spaced interior points.
pub fn resample_image(rng: &mut ChaCha8Rng, t: &Trajectory, extra: usize) -> Trajectory {
    let mut vertices: Vec<Vec<f64>> = Vec::new();
    for i in 0..t.len() - 1 {
        let a = t.vertex(i);
        let b = t.vertex(i + 1);
        let m = rng.gen_range(1..=extra + 1);
        for k in 0..m {
            let frac = k as f64 / m as f64;
            vertices.push(
                a.iter()
                    .zip(b)
                    .map(|(x, y)| x + frac * (y - x))
                    .collect(),
            );
        }
    }
    vertices.push(t.last().to_vec());
    Trajectory::from_vertices(&vertices).unwrap()
}

/// Independent chain enumerator: walks maximal runs of degree <= 2 joints
/// outward in both directions instead of flood-filling.
pub fn walk_chain_units(skeleton: &subskel::Skeleton) -> Vec<Vec<usize>> {
    let n = skeleton.len();
    let chainable: Vec<bool> = (0..n).map(|j| skeleton.degree(j) <= 2).collect();
    let mut assigned = vec![false; n];
    let mut units = Vec::new();
    for start in 0..n {
        if assigned[start] {
            continue;
        }
        if !chainable[start] {
            assigned[start] = true;
            units.push(vec![start]);
            continue;
        }
        // Walk both directions from `start` along chainable neighbors.
        let mut members = vec![start];
        assigned[start] = true;
        for first_hop in skeleton.neighbors(start) {
            let mut prev = start;
            let mut cur = first_hop;
            while chainable[cur] && !assigned[cur] {
                assigned[cur] = true;
                members.push(cur);
                let next = skeleton
                    .neighbors(cur)
                    .into_iter()
                    .find(|&w| w != prev && chainable[w] && !assigned[w]);
                match next {
                    Some(w) => {
                        prev = cur;
                        cur = w;
                    }
                    None => break,
                }
            }
        }
        members.sort_unstable();
        units.push(members);
    }
    units.sort();
    units
}
