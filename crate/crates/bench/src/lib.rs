//! Shared fixtures for the retrieval benchmarks.

use bsc_core::pipeline::{self, Dataset, DeltaSource, Query};
use bsc_core::synth::{self, SynthParams};
use bsc_core::{BasisOptions, BbcTrainingSet, CorrelationMode, IbcTrainingSet, SubspaceEntry};

pub struct Fixture {
    pub dataset: Dataset,
    pub db: Vec<SubspaceEntry>,
    pub queries: Vec<Query>,
}

/// The default synthetic dataset (10 clusters x 20 videos, d = 32) with
/// rank-4 video subspaces.
pub fn fixture() -> Fixture {
    let params = SynthParams { seed: 7, ..SynthParams::default() };
    let dataset = Dataset::from_synth(synth::generate(&params).expect("valid parameters"));
    let opts = BasisOptions { max_rank: Some(params.subspace_dim), ..BasisOptions::default() };
    let db = pipeline::build_database(&dataset.videos, opts).expect("finite frames");
    let queries = pipeline::queries(&dataset);
    Fixture { dataset, db, queries }
}

impl Fixture {
    pub fn ibc_training(&self) -> IbcTrainingSet {
        pipeline::ibc_training(&self.dataset, &self.db, CorrelationMode::TopM(15)).expect("training set")
    }

    pub fn bbc_training(&self) -> BbcTrainingSet {
        pipeline::bbc_training(&self.dataset, &self.db, DeltaSource::Categories).expect("training set")
    }
}
