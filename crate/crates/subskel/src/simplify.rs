//! Error-bounded polygonal curve simplification.
//!
//! Greedy forward scan: from the current anchor vertex, keep extending the
//! shortcut while the skipped subchain stays within `epsilon` of the single
//! segment under the continuous Fréchet distance. The output is a vertex
//! subsequence containing both endpoints, and gluing the per-shortcut
//! matchings bounds the whole-curve error: `CF(P, simplify(P, ε)) ≤ ε`.
//!
//! The greedy variant is not minimum-size, but it is fast and keeps the CF
//! guarantee, which is all the pipeline needs.

use serde::{Deserialize, Serialize};

use crate::distances::cf_decision_slices;
use crate::real::Real;
use crate::trajectory::Trajectory;

/// Simplification tolerance in coordinate units. `0` disables shortcuts and
/// only removes exact consecutive duplicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplifySpec {
    pub epsilon: f64,
}

impl SimplifySpec {
    pub fn new(epsilon: f64) -> Self {
        assert!(epsilon >= 0.0, "epsilon must be non-negative");
        Self { epsilon }
    }

    pub fn off() -> Self {
        Self { epsilon: 0.0 }
    }

    pub fn is_off(&self) -> bool {
        self.epsilon == 0.0
    }
}

/// Simplifies `p` to a vertex subsequence within `spec.epsilon` under CF.
pub fn simplify<R: Real>(p: &Trajectory<R>, spec: &SimplifySpec) -> Trajectory<R> {
    let n = p.len();
    if n <= 2 {
        return p.clone();
    }
    let dim = p.dim();
    let coords = p.coords();

    if spec.epsilon == 0.0 {
        // Exact consecutive duplicates only.
        let mut kept: Vec<R> = coords[..dim].to_vec();
        for i in 1..n {
            let v = p.vertex(i);
            if v != &kept[kept.len() - dim..] {
                kept.extend_from_slice(v);
            }
        }
        return Trajectory::from_flat(dim, kept).expect("kept vertices are valid");
    }

    let eps = R::from_f64(spec.epsilon);
    let mut kept: Vec<R> = coords[..dim].to_vec();
    let mut anchor = 0usize;
    while anchor < n - 1 {
        // Farthest j such that the subchain anchor..=j stays within eps of
        // the straight segment anchor -> j; j = anchor+1 always qualifies.
        let mut j = anchor + 1;
        while j + 1 < n {
            let cand = j + 1;
            let sub = &coords[anchor * dim..(cand + 1) * dim];
            let mut seg = Vec::with_capacity(2 * dim);
            seg.extend_from_slice(p.vertex(anchor));
            seg.extend_from_slice(p.vertex(cand));
            if cf_decision_slices(dim, sub, &seg, eps) {
                j = cand;
            } else {
                break;
            }
        }
        kept.extend_from_slice(p.vertex(j));
        anchor = j;
    }
    Trajectory::from_flat(dim, kept).expect("kept vertices are valid")
}
