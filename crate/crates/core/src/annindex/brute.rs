use super::{squared_distance, Best, NearestNeighbor, Points, QueryResult};

/// Linear scan over every training point.
pub struct BruteForce {
    points: Points,
}

impl BruteForce {
    pub fn new(points: Points) -> Self {
        Self { points }
    }
}

impl NearestNeighbor for BruteForce {
    fn name(&self) -> &'static str {
        "exact"
    }

    fn points(&self) -> &Points {
        &self.points
    }

    fn search(&self, query: &[f32]) -> QueryResult {
        let mut best = Best::new();
        for (id, p) in self.points.as_slice().chunks_exact(self.points.dim()).enumerate() {
            best.offer(squared_distance(query, p), id);
        }
        best.result()
    }
}
