//! Scene records, the bidirectional scene-graph likelihood, triplet
//! selection, and the synthetic toy world that stands in for an external
//! scene-graph predictor.

mod graph;
mod toyworld;

pub use graph::{
    score_scene_graph, select_triplets, Assignment, CandidateGraph, ObjectCandidate,
    PairCandidate, SelectedTriplet,
};
pub use toyworld::{
    generate_toy_world, make_semantic_tags, TagVocab, ToyWorld, ToyWorldConfig,
};

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::rolespace::Triplet;

/// Observed cap on triplets per image; also the default record limit.
pub const MAX_TRIPLETS: usize = 15;

/// One training or evaluation example.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneRecord {
    pub id: String,
    pub triplets: Vec<Triplet>,
    /// Semantic tag vector `s_e`.
    pub tags: Tensor,
    /// Global image feature `v`; only the image-driven decoder reads it.
    pub global_feature: Option<Tensor>,
    pub captions: Vec<Vec<String>>,
}

impl SceneRecord {
    pub fn triplet_dim(&self) -> Option<usize> {
        self.triplets.first().map(Triplet::dim)
    }

    /// Checks the record invariants against a triplet cap.
    pub fn validate(&self, max_triplets: usize) -> Result<()> {
        let n = self.triplets.len();
        if n == 0 || n > max_triplets {
            return Err(Error::Argument(alloc::format!(
                "scene {} has {n} triplets, expected 1..={max_triplets}",
                self.id
            )));
        }
        let d = self.triplets[0].dim();
        if self.triplets.iter().any(|t| t.dim() != d) {
            return Err(Error::Argument(alloc::format!(
                "scene {} mixes triplet dimensions",
                self.id
            )));
        }
        if self.captions.iter().any(|c| c.is_empty()) {
            return Err(Error::Argument(alloc::format!(
                "scene {} has an empty caption",
                self.id
            )));
        }
        if !self.tags.is_finite() || self.global_feature.as_ref().is_some_and(|v| !v.is_finite())
        {
            return Err(Error::Argument(alloc::format!(
                "scene {} has non-finite features",
                self.id
            )));
        }
        Ok(())
    }
}
