//! Exact k-nearest-neighbor search for metric trajectory measures.
//!
//! A pivot table: a handful of entries are promoted to pivots (greedy
//! max-min farthest-point selection) and every entry's distance to every
//! pivot is precomputed. At query time the triangle inequality gives the
//! lower bound `max_p |d(q,p) - d(e,p)|` on `d(q,e)`; entries whose bound
//! exceeds the current k-th best are skipped without computing the real
//! distance. Answers are identical to a linear scan; only the number of
//! distance computations changes. CF values carry a relative tolerance, so
//! CF bounds are slackened accordingly to keep exactness.

use rayon::prelude::*;

use crate::distances::{DistanceMeasure, MeasureKind};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::trajectory::Trajectory;

/// Exact metric k-NN index over owned trajectories.
#[derive(Debug, Clone)]
pub struct MetricIndex<R: Real = f64> {
    entries: Vec<(u32, Trajectory<R>)>,
    pivots: Vec<usize>,
    /// Row-major |entries| x |pivots| distance table.
    table: Vec<R>,
    measure: DistanceMeasure,
}

/// Distance-computation accounting for one query.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueryStats {
    /// Full trajectory distance evaluations, including the query-to-pivot
    /// distances.
    pub distance_computations: usize,
}

impl<R: Real> MetricIndex<R> {
    /// Builds the index. `num_pivots` is clamped to the corpus size; the
    /// first pivot is chosen from the seed, the rest by farthest-point.
    pub fn build(
        entries: Vec<(u32, Trajectory<R>)>,
        measure: DistanceMeasure,
        num_pivots: usize,
        seed: u64,
    ) -> Result<Self> {
        if !measure.is_metric() {
            return Err(Error::InvalidConfig(
                "metric index requires CF or DF; DTW violates the triangle inequality".into(),
            ));
        }
        if entries.is_empty() {
            return Err(Error::InvalidData("cannot index an empty corpus".into()));
        }
        if num_pivots == 0 {
            return Err(Error::InvalidConfig("need at least one pivot".into()));
        }
        let n = entries.len();
        let p = if num_pivots > n {
            log::warn!("clamping {num_pivots} pivots to corpus size {n}");
            n
        } else {
            num_pivots
        };

        let mut pivots = Vec::with_capacity(p);
        pivots.push((seed % n as u64) as usize);
        // columns[k][i] = d(entries[i], pivot k)
        let mut columns: Vec<Vec<R>> = Vec::with_capacity(p);
        let mut min_dist: Vec<R> = vec![R::infinity(); n];
        loop {
            let pivot = *pivots.last().expect("at least one pivot");
            let col: Vec<R> = entries
                .par_iter()
                .map(|(_, t)| {
                    measure
                        .eval(&entries[pivot].1, t)
                        .expect("indexed trajectories share a dimension")
                })
                .collect();
            for i in 0..n {
                if col[i] < min_dist[i] {
                    min_dist[i] = col[i];
                }
            }
            columns.push(col);
            if pivots.len() == p {
                break;
            }
            // Farthest point from the chosen pivots; ties at lowest index.
            let mut best = 0usize;
            for i in 1..n {
                if min_dist[i] > min_dist[best] {
                    best = i;
                }
            }
            pivots.push(best);
        }

        let mut table = vec![R::zero(); n * p];
        for (k, col) in columns.iter().enumerate() {
            for i in 0..n {
                table[i * p + k] = col[i];
            }
        }
        Ok(Self {
            entries,
            pivots,
            table,
            measure,
        })
    }

    /// Default pivot count: ceil(sqrt(n)).
    pub fn default_pivots(n: usize) -> usize {
        (n as f64).sqrt().ceil() as usize
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    pub fn pivot_distance(&self, entry: usize, pivot: usize) -> R {
        self.table[entry * self.pivots.len() + pivot]
    }

    pub fn measure(&self) -> &DistanceMeasure {
        &self.measure
    }

    /// Exact k nearest entries, ascending by distance. Ties at equal distance
    /// resolve by entry order.
    #[allow(clippy::needless_range_loop)] // pivot-table rows are index-coupled
    pub fn knn(&self, query: &Trajectory<R>, k: usize) -> Result<(Vec<(u32, R)>, QueryStats)> {
        let n = self.entries.len();
        if k == 0 || k > n {
            return Err(Error::InvalidConfig(format!(
                "k = {k} outside 1..={n}"
            )));
        }
        let p = self.pivots.len();
        let mut stats = QueryStats::default();

        // True distances to the pivots seed the candidate pool for free.
        let mut query_pivot = Vec::with_capacity(p);
        for &piv in &self.pivots {
            let d = self.measure.eval(query, &self.entries[piv].1)?;
            stats.distance_computations += 1;
            query_pivot.push(d);
        }

        // CF values are only tolerance-accurate; slacken each bound so
        // pruning never drops a true neighbor.
        let tol = match self.measure.kind {
            MeasureKind::Cf => R::from_f64(self.measure.cf_tolerance),
            _ => R::zero(),
        };

        let mut known: Vec<Option<R>> = vec![None; n];
        for (j, &piv) in self.pivots.iter().enumerate() {
            known[piv] = Some(query_pivot[j]);
        }

        // Triangle-inequality lower bounds; visit in ascending bound order.
        // For CF, |a - b| understates the true gap by at most tol * (a + b).
        let mut order: Vec<(R, usize)> = (0..n)
            .map(|i| {
                let mut bound = R::zero();
                for j in 0..p {
                    let a = query_pivot[j];
                    let b = self.table[i * p + j];
                    let lb = (a - b).abs() - tol * (a + b);
                    if lb > bound {
                        bound = lb;
                    }
                }
                (bound, i)
            })
            .collect();
        order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

        // Sorted pool of the best k (distance, entry) so far.
        let mut heap: Vec<(R, usize)> = Vec::with_capacity(k + 1);
        let push = |heap: &mut Vec<(R, usize)>, d: R, i: usize| {
            heap.push((d, i));
            heap.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            heap.truncate(k);
        };
        for (bound, i) in order {
            if heap.len() == k {
                let kth = heap[k - 1].0;
                if bound > kth * (R::one() + tol) {
                    break; // bounds are sorted; nothing closer remains
                }
            }
            let d = match known[i] {
                Some(d) => d,
                None => {
                    let d = self.measure.eval(query, &self.entries[i].1)?;
                    stats.distance_computations += 1;
                    d
                }
            };
            push(&mut heap, d, i);
        }

        let results = heap
            .into_iter()
            .map(|(d, i)| (self.entries[i].0, d))
            .collect();
        Ok((results, stats))
    }

    /// Linear scan: the oracle the index must agree with.
    pub fn linear_scan(
        &self,
        query: &Trajectory<R>,
        k: usize,
    ) -> Result<(Vec<(u32, R)>, QueryStats)> {
        linear_scan_knn(&self.entries, &self.measure, query, k)
    }
}

/// k nearest by scanning the whole corpus; works for any measure.
pub fn linear_scan_knn<R: Real>(
    entries: &[(u32, Trajectory<R>)],
    measure: &DistanceMeasure,
    query: &Trajectory<R>,
    k: usize,
) -> Result<(Vec<(u32, R)>, QueryStats)> {
    let n = entries.len();
    if k == 0 || k > n {
        return Err(Error::InvalidConfig(format!("k = {k} outside 1..={n}")));
    }
    let mut all: Vec<(R, usize)> = Vec::with_capacity(n);
    for (i, (_, t)) in entries.iter().enumerate() {
        all.push((measure.eval(query, t)?, i));
    }
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    all.truncate(k);
    Ok((
        all.into_iter().map(|(d, i)| (entries[i].0, d)).collect(),
        QueryStats {
            distance_computations: n,
        },
    ))
}
