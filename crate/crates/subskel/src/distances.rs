//! Speed-invariant trajectory similarity measures.
//!
//! Three measures over polygonal curves: the continuous Fréchet distance
//! (CF), the discrete Fréchet distance (DF) and Dynamic Time Warping (DTW).
//! CF and DF are metrics; DTW is not (it violates the triangle inequality).
//! None of them look at frame timestamps, which is what makes them robust to
//! actors performing the same motion at different speeds.
//!
//! DF and DTW are O(mn) time, O(min(m,n)) memory dynamic programs. CF is
//! resolved to a relative tolerance by binary search over the free-space
//! reachability decision procedure, which is itself O(mn).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::trajectory::{euclidean, Trajectory};

/// Relative tolerance used for continuous Fréchet values when none is given.
pub const DEFAULT_CF_TOLERANCE: f64 = 1e-6;

/// Which similarity measure to use, with the CF value-search tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceMeasure {
    pub kind: MeasureKind,
    /// Relative tolerance of the CF binary search; ignored by DF and DTW.
    #[serde(default = "default_tol")]
    pub cf_tolerance: f64,
}

fn default_tol() -> f64 {
    DEFAULT_CF_TOLERANCE
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureKind {
    Cf,
    Df,
    Dtw,
}

impl MeasureKind {
    /// CF and DF satisfy the triangle inequality; DTW does not.
    pub fn is_metric(self) -> bool {
        !matches!(self, MeasureKind::Dtw)
    }
}

impl DistanceMeasure {
    pub fn new(kind: MeasureKind) -> Self {
        Self {
            kind,
            cf_tolerance: DEFAULT_CF_TOLERANCE,
        }
    }

    pub fn cf() -> Self {
        Self::new(MeasureKind::Cf)
    }

    pub fn df() -> Self {
        Self::new(MeasureKind::Df)
    }

    pub fn dtw() -> Self {
        Self::new(MeasureKind::Dtw)
    }

    pub fn is_metric(&self) -> bool {
        self.kind.is_metric()
    }

    /// Evaluates the measure on a pair of trajectories.
    pub fn eval<R: Real>(&self, p: &Trajectory<R>, q: &Trajectory<R>) -> Result<R> {
        match self.kind {
            MeasureKind::Cf => continuous_frechet_with_tolerance(p, q, self.cf_tolerance),
            MeasureKind::Df => discrete_frechet(p, q),
            MeasureKind::Dtw => dtw(p, q),
        }
    }
}

impl std::fmt::Display for MeasureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MeasureKind::Cf => write!(f, "cf"),
            MeasureKind::Df => write!(f, "df"),
            MeasureKind::Dtw => write!(f, "dtw"),
        }
    }
}

impl std::str::FromStr for MeasureKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cf" => Ok(MeasureKind::Cf),
            "df" => Ok(MeasureKind::Df),
            "dtw" => Ok(MeasureKind::Dtw),
            other => Err(Error::InvalidConfig(format!("unknown measure `{other}`"))),
        }
    }
}

fn check_dims<R: Real>(p: &Trajectory<R>, q: &Trajectory<R>) -> Result<()> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            left: p.dim(),
            right: q.dim(),
        });
    }
    Ok(())
}

/// Discrete Fréchet distance: minimum over monotone vertex couplings (stays
/// allowed) of the largest matched Euclidean distance.
pub fn discrete_frechet<R: Real>(p: &Trajectory<R>, q: &Trajectory<R>) -> Result<R> {
    check_dims(p, q)?;
    Ok(coupling_dp(p, q, |a, b| a.max(b)))
}

/// Dynamic Time Warping: same coupling family as DF, summing the matched
/// distances instead of taking their maximum.
pub fn dtw<R: Real>(p: &Trajectory<R>, q: &Trajectory<R>) -> Result<R> {
    check_dims(p, q)?;
    Ok(coupling_dp(p, q, |a, b| a + b))
}

/// One-row DP over the coupling lattice. `combine(acc, d)` is `max` for DF
/// and `+` for DTW. Rows run over the longer trajectory so the live row has
/// min(m, n) entries.
fn coupling_dp<R: Real>(p: &Trajectory<R>, q: &Trajectory<R>, combine: fn(R, R) -> R) -> R {
    let (outer, inner) = if p.len() >= q.len() { (p, q) } else { (q, p) };
    let n = inner.len();
    let mut row = vec![R::infinity(); n];

    for (i, pv) in outer.vertices().enumerate() {
        let mut diag_prev = R::infinity(); // row[j-1] from the previous row
        for j in 0..n {
            let d = euclidean(pv, inner.vertex(j));
            let up = row[j]; // (i-1, j)
            let left = if j > 0 { row[j - 1] } else { R::infinity() }; // (i, j-1)
            let best = if i == 0 && j == 0 {
                R::zero()
            } else {
                up.min(left).min(diag_prev) // diag = (i-1, j-1)
            };
            diag_prev = up;
            row[j] = combine(best, d);
        }
    }
    row[n - 1]
}

/// Closed sub-interval of [0, 1]; `None` when empty.
type Interval<R> = Option<(R, R)>;

/// Parameter range of segment `u -> v` lying within `eps` of point `a`.
fn free_interval<R: Real>(a: &[R], u: &[R], v: &[R], eps: R) -> Interval<R> {
    let dim = a.len();
    // Quadratic ||u + t(v-u) - a||^2 <= eps^2 in t.
    let mut qa = R::zero();
    let mut qb = R::zero();
    let mut qc = R::zero();
    for k in 0..dim {
        let w = v[k] - u[k];
        let e = u[k] - a[k];
        qa = qa + w * w;
        qb = qb + w * e;
        qc = qc + e * e;
    }
    qc = qc - eps * eps;
    if qa == R::zero() {
        // Zero-length segment: collapse to a point test.
        return if qc <= R::zero() {
            Some((R::zero(), R::one()))
        } else {
            None
        };
    }
    let disc = qb * qb - qa * qc;
    if disc < R::zero() {
        return None;
    }
    let sq = disc.sqrt();
    let lo = ((-qb - sq) / qa).max(R::zero());
    let hi = ((-qb + sq) / qa).min(R::one());
    if lo <= hi {
        Some((lo, hi))
    } else {
        None
    }
}

/// Clips `free` from below by the earliest reachable entry parameter.
fn clip_from<R: Real>(free: Interval<R>, entry: R) -> Interval<R> {
    match free {
        Some((lo, hi)) if lo.max(entry) <= hi => Some((lo.max(entry), hi)),
        _ => None,
    }
}

/// Decides whether the continuous Fréchet distance is at most `eps` via
/// monotone reachability through the free-space diagram.
pub fn cf_decision<R: Real>(p: &Trajectory<R>, q: &Trajectory<R>, eps: R) -> Result<bool> {
    check_dims(p, q)?;
    Ok(cf_decision_slices(p.dim(), p.coords(), q.coords(), eps))
}

/// Slice-level CF decision used by `simplify` to avoid copying subchains.
#[allow(clippy::needless_range_loop)] // index-coupled DP over two edge arrays
pub(crate) fn cf_decision_slices<R: Real>(dim: usize, p: &[R], q: &[R], eps: R) -> bool {
    let m = p.len() / dim;
    let n = q.len() / dim;
    let pv = |i: usize| &p[i * dim..(i + 1) * dim];
    let qv = |j: usize| &q[j * dim..(j + 1) * dim];

    if eps < R::zero() {
        return false;
    }
    // A single point against a curve: every point of the curve must be within
    // eps, and the maximum over a segment sits at a vertex.
    if m == 1 {
        return (0..n).all(|j| euclidean(pv(0), qv(j)) <= eps);
    }
    if n == 1 {
        return (0..m).all(|i| euclidean(pv(i), qv(0)) <= eps);
    }
    if euclidean(pv(0), qv(0)) > eps || euclidean(pv(m - 1), qv(n - 1)) > eps {
        return false;
    }

    // reach_v[j]: reachable part of the vertical edge {i} x [j, j+1].
    // Initialized for i = 0 by walking up the left boundary.
    let mut reach_v: Vec<Interval<R>> = vec![None; n - 1];
    let mut open = true;
    for j in 0..n - 1 {
        if !open {
            break;
        }
        match free_interval(pv(0), qv(j), qv(j + 1), eps) {
            Some((lo, hi)) if lo <= R::zero() => {
                reach_v[j] = Some((R::zero(), hi));
                open = hi >= R::one();
            }
            _ => open = false,
        }
    }

    // Reachable part of the horizontal edge [i, i+1] x {0} along the bottom
    // boundary; maintained across columns.
    let mut bottom: Interval<R> = match free_interval(qv(0), pv(0), pv(1), eps) {
        Some((lo, hi)) if lo <= R::zero() => Some((R::zero(), hi)),
        _ => None,
    };

    for i in 0..m - 1 {
        // Reachability only propagates rightward through the vertical edges
        // and the bottom boundary; once both are gone the answer is fixed.
        if bottom.is_none() && reach_v.iter().all(Option::is_none) {
            return false;
        }
        let mut horiz = bottom; // reachable bottom edge of cell (i, 0)
        for j in 0..n - 1 {
            let left = reach_v[j];
            let below = horiz;
            let right_free = free_interval(pv(i + 1), qv(j), qv(j + 1), eps);
            let top_free = free_interval(qv(j + 1), pv(i), pv(i + 1), eps);
            reach_v[j] = if below.is_some() {
                right_free
            } else if let Some((lo, _)) = left {
                clip_from(right_free, lo)
            } else {
                None
            };
            horiz = if left.is_some() {
                top_free
            } else if let Some((lo, _)) = below {
                clip_from(top_free, lo)
            } else {
                None
            };
        }
        if i + 1 < m - 1 {
            // Advance the bottom boundary to the next column.
            bottom = match (bottom, free_interval(qv(0), pv(i + 1), pv(i + 2), eps)) {
                (Some((_, hi)), Some((lo, fhi))) if hi >= R::one() && lo <= R::zero() => {
                    Some((R::zero(), fhi))
                }
                _ => None,
            };
        } else {
            // Last column: the corner is reached through the top of the last
            // vertical edge or the end of the last horizontal edge.
            let via_right = matches!(reach_v[n - 2], Some((_, hi)) if hi >= R::one());
            let via_top = matches!(horiz, Some((_, hi)) if hi >= R::one());
            return via_right || via_top;
        }
    }
    unreachable!("loop returns on the last column")
}

/// Continuous Fréchet distance resolved by binary search to the default
/// relative tolerance.
pub fn continuous_frechet<R: Real>(p: &Trajectory<R>, q: &Trajectory<R>) -> Result<R> {
    continuous_frechet_with_tolerance(p, q, DEFAULT_CF_TOLERANCE)
}

/// Continuous Fréchet distance resolved by binary search to a relative
/// tolerance.
///
/// The search bracket is [max endpoint distance, DF]: endpoints must match
/// endpoints, and DF dominates CF. The returned value always stays inside
/// that bracket.
pub fn continuous_frechet_with_tolerance<R: Real>(
    p: &Trajectory<R>,
    q: &Trajectory<R>,
    tolerance: f64,
) -> Result<R> {
    check_dims(p, q)?;
    if !tolerance.is_finite() || tolerance <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "CF tolerance must be positive, got {tolerance}"
        )));
    }
    let tol = R::from_f64(tolerance);
    let lower = euclidean(p.first(), q.first()).max(euclidean(p.last(), q.last()));
    let upper = discrete_frechet(p, q)?;
    if upper <= lower || cf_decision(p, q, lower)? {
        return Ok(lower);
    }

    let mut lo = lower; // decision false
    let mut hi = upper; // decision true (CF <= DF; fp slack handled below)
    if !cf_decision(p, q, hi)? {
        // Rounding can push the DF bound marginally below the decision
        // boundary; nudge outward rather than fail.
        let mut bumped = hi * (R::one() + tol);
        let mut tries = 0;
        while !cf_decision(p, q, bumped)? && tries < 4 {
            bumped = bumped * (R::one() + tol);
            tries += 1;
        }
        hi = bumped;
    }
    let two = R::from_f64(2.0);
    for _ in 0..64 {
        if hi - lo <= tol * hi {
            break;
        }
        let mid = (lo + hi) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        if cf_decision(p, q, mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi.min(upper).max(lower))
}
