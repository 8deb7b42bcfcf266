//! Binary subspace coding for query-by-image video retrieval.
//!
//! Videos are represented by the subspaces spanned by their frame features and
//! images by single feature vectors. Exact retrieval ranks videos by the
//! distance from the query point to each subspace, which reduces to a maximum
//! inner product search between vectorized projectors and lifted queries
//! ([`subspace`]). Two learned asymmetric hashing schemes map both sides into a
//! common Hamming space: a full linear projection ([`ibc`]) and a bilinear,
//! rotation-based variant ([`bbc`]). Codes are searched exhaustively by
//! [`hamming`] and scored by [`eval`].

pub mod bbc;
pub mod error;
pub mod eval;
pub mod format;
pub mod hamming;
pub mod ibc;
pub mod linalg;
pub mod pca;
pub mod pipeline;
pub mod subspace;
pub mod synth;

pub use bbc::{BbcModel, BbcParams, BbcTrainingSet, BilinearCode};
pub use error::{Error, ErrorKind, Result};
pub use eval::{GroundTruth, MetricReport};
pub use hamming::{BinaryIndex, PackedCode};
pub use ibc::{CorrelationMode, IbcModel, IbcParams, IbcTrainingSet, SignCode};
pub use subspace::{
    distance_sq, exact_search, lift_query, projector, vec_score, BasisOptions, FrameMatrix, Hit,
    QueryLift, RankedResult, SubspaceEntry,
};

pub use nalgebra::{DMatrix, DVector};
