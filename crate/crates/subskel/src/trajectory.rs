//! Polygonal curves in `R^d`.

use std::fmt;

use serde::de::{SeqAccess, Visitor};
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::real::Real;

/// A directed polygonal curve through `n ≥ 1` vertices in `R^dim`.
///
/// Vertices are stored flat (`coords.len() == n * dim`) so distance kernels
/// stay cache-friendly. Consecutive duplicate vertices are legal.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<R: Real = f64> {
    dim: usize,
    coords: Vec<R>,
}

impl<R: Real> Trajectory<R> {
    /// Builds a trajectory from flat coordinates.
    pub fn from_flat(dim: usize, coords: Vec<R>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidData("trajectory dimension must be positive".into()));
        }
        if coords.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::InvalidData(format!(
                "{} coordinates do not fill vertices of dimension {dim}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite {
                context: "trajectory vertex".into(),
            });
        }
        Ok(Self { dim, coords })
    }

    /// Builds a trajectory from per-vertex rows, all of equal length.
    pub fn from_vertices(vertices: &[Vec<R>]) -> Result<Self> {
        let dim = vertices.first().map(Vec::len).ok_or(Error::EmptyTrajectory)?;
        let mut coords = Vec::with_capacity(vertices.len() * dim);
        for v in vertices {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    left: dim,
                    right: v.len(),
                });
            }
            coords.extend_from_slice(v);
        }
        Self::from_flat(dim, coords)
    }

    /// Convenience constructor for 3D points.
    pub fn from_points3(points: &[[R; 3]]) -> Result<Self> {
        let mut coords = Vec::with_capacity(points.len() * 3);
        for p in points {
            coords.extend_from_slice(p);
        }
        Self::from_flat(3, coords)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of vertices.
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        false // n ≥ 1 by construction
    }

    pub fn vertex(&self, i: usize) -> &[R] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn first(&self) -> &[R] {
        self.vertex(0)
    }

    pub fn last(&self) -> &[R] {
        self.vertex(self.len() - 1)
    }

    pub fn coords(&self) -> &[R] {
        &self.coords
    }

    pub fn vertices(&self) -> impl Iterator<Item = &[R]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    /// Copies vertices `[start, end)` into a new trajectory.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        assert!(start < end && end <= self.len());
        Self {
            dim: self.dim,
            coords: self.coords[start * self.dim..end * self.dim].to_vec(),
        }
    }

    /// Largest pairwise vertex distance. O(n²); intended for tests and
    /// tolerance scaling, not hot paths.
    pub fn diameter(&self) -> R {
        let mut best = R::zero();
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                let d = euclidean(self.vertex(i), self.vertex(j));
                if d > best {
                    best = d;
                }
            }
        }
        best
    }
}

/// Euclidean distance between two equal-length coordinate slices.
pub fn euclidean<R: Real>(a: &[R], b: &[R]) -> R {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = R::zero();
    for (x, y) in a.iter().zip(b) {
        let d = *x - *y;
        acc = acc + d * d;
    }
    acc.sqrt()
}

// Serialized as a nested array of vertices, e.g. [[0.0,1.0],[2.0,3.0]],
// matching the CLI trajectory file format and the model file layout.
impl<R: Real + Serialize> Serialize for Trajectory<R> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.len()))?;
        for v in self.vertices() {
            seq.serialize_element(v)?;
        }
        seq.end()
    }
}

impl<'de, R: Real + Deserialize<'de>> Deserialize<'de> for Trajectory<R> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct V<R>(std::marker::PhantomData<R>);
        impl<'de, R: Real + Deserialize<'de>> Visitor<'de> for V<R> {
            type Value = Trajectory<R>;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a non-empty array of equal-length coordinate arrays")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<Self::Value, A::Error> {
                let mut vertices: Vec<Vec<R>> = Vec::new();
                while let Some(v) = seq.next_element::<Vec<R>>()? {
                    vertices.push(v);
                }
                Trajectory::from_vertices(&vertices).map_err(serde::de::Error::custom)
            }
        }
        deserializer.deserialize_seq(V(std::marker::PhantomData))
    }
}
