//! Euclidean 1-nearest-neighbour search over reduced training vectors.
//!
//! Two backends are registered: `exact` (linear scan) and `approx`
//! (randomized k-d forest with a best-bin-first search budget). Both
//! report the true Euclidean distance to the returned neighbour, and
//! equal distances resolve to the lowest training row.

mod brute;
mod forest;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use brute::BruteForce;
pub use forest::KdForest;

use crate::error::{Error, Result};
use crate::registry::Registry;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryResult {
    pub distance: f64,
    pub neighbor_id: usize,
}

/// Search settings shared by all backends; backends ignore what they do
/// not use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnParams {
    pub trees: usize,
    /// Maximum leaves visited per query.
    pub budget: usize,
    /// Maximum points per leaf.
    pub leaf_size: usize,
    pub seed: u64,
}

impl Default for AnnParams {
    fn default() -> Self {
        Self {
            trees: 4,
            budget: 64,
            leaf_size: forest::DEFAULT_LEAF_SIZE,
            seed: 0,
        }
    }
}

/// Dense `n x dim` point matrix, row-major, all values finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Points {
    dim: usize,
    data: Vec<f32>,
}

impl Points {
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("point dimension must be positive".into()));
        }
        if data.is_empty() {
            return Err(Error::Empty("cannot index an empty point set".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::WidthMismatch {
                expected: dim,
                got: data.len() % dim,
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: (pos / dim) as u64,
                col: pos % dim,
            });
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }
}

/// Squared Euclidean distance accumulated in f64.
#[inline]
pub fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum()
}

/// Running best candidate with lowest-id tie-breaking.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Best {
    pub sq: f64,
    pub id: usize,
}

impl Best {
    pub fn new() -> Self {
        Self {
            sq: f64::INFINITY,
            id: usize::MAX,
        }
    }

    #[inline]
    pub fn offer(&mut self, sq: f64, id: usize) {
        if sq < self.sq || (sq == self.sq && id < self.id) {
            self.sq = sq;
            self.id = id;
        }
    }

    pub fn result(self) -> QueryResult {
        QueryResult {
            distance: self.sq.sqrt(),
            neighbor_id: self.id,
        }
    }
}

/// An immutable nearest-neighbour index.
pub trait NearestNeighbor: Send + Sync {
    fn name(&self) -> &'static str;

    fn points(&self) -> &Points;

    /// Nearest training point of an already validated query.
    fn search(&self, query: &[f32]) -> QueryResult;

    fn dim(&self) -> usize {
        self.points().dim()
    }

    fn len(&self) -> usize {
        self.points().len()
    }

    fn is_empty(&self) -> bool {
        self.points().is_empty()
    }

    fn nn_distance(&self, query: &[f32]) -> Result<QueryResult> {
        validate_query(query, self.dim(), 0)?;
        Ok(self.search(query))
    }

    /// Results for a flat block of queries, in input order.
    fn batch_nn_distances(&self, queries: &[f32]) -> Result<Vec<QueryResult>> {
        let dim = self.dim();
        if !queries.len().is_multiple_of(dim) {
            return Err(Error::WidthMismatch {
                expected: dim,
                got: queries.len() % dim,
            });
        }
        queries
            .par_chunks_exact(dim)
            .enumerate()
            .map(|(i, q)| {
                validate_query(q, dim, i as u64)?;
                Ok(self.search(q))
            })
            .collect()
    }
}

fn validate_query(query: &[f32], dim: usize, row: u64) -> Result<()> {
    if query.len() != dim {
        return Err(Error::WidthMismatch {
            expected: dim,
            got: query.len(),
        });
    }
    if let Some(col) = query.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row, col });
    }
    Ok(())
}

/// Builds one kind of index.
pub trait IndexBuilder: Send + Sync {
    fn name(&self) -> &'static str;

    fn build(&self, points: Points, params: &AnnParams) -> Result<Box<dyn NearestNeighbor>>;
}

struct ExactBuilder;

impl IndexBuilder for ExactBuilder {
    fn name(&self) -> &'static str {
        "exact"
    }

    fn build(&self, points: Points, _params: &AnnParams) -> Result<Box<dyn NearestNeighbor>> {
        Ok(Box::new(BruteForce::new(points)))
    }
}

struct ApproxBuilder;

impl IndexBuilder for ApproxBuilder {
    fn name(&self) -> &'static str {
        "approx"
    }

    fn build(&self, points: Points, params: &AnnParams) -> Result<Box<dyn NearestNeighbor>> {
        Ok(Box::new(KdForest::build(points, params)?))
    }
}

pub fn registry() -> Registry<dyn IndexBuilder> {
    let mut reg: Registry<dyn IndexBuilder> = Registry::new("ann mode");
    reg.register("exact", Box::new(ExactBuilder))
        .register("approx", Box::new(ApproxBuilder));
    reg
}

/// Build an index by mode name.
pub fn build(mode: &str, points: Points, params: &AnnParams) -> Result<Box<dyn NearestNeighbor>> {
    registry().get(mode)?.build(points, params)
}
