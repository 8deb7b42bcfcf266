//! Subspace representation of videos and exact point-to-subspace retrieval.
//!
//! A video is the linear span of its frame features. Its orthogonal projector
//! `P = B Bᵀ` (for an orthonormal basis `B`) gives the squared distance of a
//! query `q` to the subspace as `qᵀq − Tr(P qqᵀ)`, so ranking by ascending
//! distance is the same as ranking by descending `⟨vec(P), vec(qqᵀ)⟩`: an
//! inner-product search between vectorized projectors and lifted queries.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Default relative singular-value cutoff when building a basis.
pub const DEFAULT_REL_TOL: f64 = 1e-6;

/// Absolute slack below zero tolerated in `distance_sq` before clamping.
const DISTANCE_CLAMP_TOL: f64 = 1e-9;

/// Frames of one video, `d` rows (feature dimension) by `m` columns (frames).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatrix {
    pub video_id: String,
    pub data: DMatrix<f64>,
}

impl FrameMatrix {
    pub fn new(video_id: impl Into<String>, data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::EmptyInput("frame matrix"));
        }
        linalg::ensure_finite(&data, "frame matrix")?;
        Ok(Self {
            video_id: video_id.into(),
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }
}

/// Options controlling how a frame matrix is reduced to a basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisOptions {
    /// Keep singular directions with `σ > rel_tol · σ_max`.
    pub rel_tol: f64,
    /// Optional cap on the subspace dimension.
    pub max_rank: Option<usize>,
}

impl Default for BasisOptions {
    fn default() -> Self {
        Self {
            rel_tol: DEFAULT_REL_TOL,
            max_rank: None,
        }
    }
}

/// One database video: orthonormal basis and its projector.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceEntry {
    video_id: String,
    basis: DMatrix<f64>,
    projector: DMatrix<f64>,
}

impl SubspaceEntry {
    pub fn from_frames(frames: &FrameMatrix, opts: BasisOptions) -> Result<Self> {
        let basis = orthonormal_basis(frames, opts)?;
        Ok(Self::from_orthonormal_basis(frames.video_id.clone(), basis))
    }

    /// Wraps a basis that is already orthonormal. The projector is derived
    /// from it.
    pub fn from_orthonormal_basis(video_id: impl Into<String>, basis: DMatrix<f64>) -> Self {
        let projector = projector(&basis);
        Self {
            video_id: video_id.into(),
            basis,
            projector,
        }
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn projector(&self) -> &DMatrix<f64> {
        &self.projector
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Subspace dimension ρ.
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn vec_projector(&self) -> DVector<f64> {
        linalg::vec_of(&self.projector)
    }
}

/// An image query together with its lift `vec(qqᵀ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryLift {
    pub query_id: String,
    pub raw: DVector<f64>,
    pub lifted: DVector<f64>,
}

impl QueryLift {
    pub fn dim(&self) -> usize {
        self.raw.len()
    }
}

/// A ranked hit. Scores are "higher is better".
#[derive(Debug, Clone, PartialEq)]
pub struct Hit<S = f64> {
    pub video_id: String,
    pub score: S,
}

/// Result list ordered by descending score, ties by ascending video id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RankedResult {
    pub hits: Vec<Hit<f64>>,
}

impl RankedResult {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.hits.iter().map(|h| h.video_id.as_str())
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }
}

/// Orthonormal basis of the column span of `frames`, from its singular value
/// decomposition.
pub fn orthonormal_basis(frames: &FrameMatrix, opts: BasisOptions) -> Result<DMatrix<f64>> {
    if !(opts.rel_tol > 0.0 && opts.rel_tol < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "rel_tol must lie in (0, 1), got {}",
            opts.rel_tol
        )));
    }
    if opts.max_rank == Some(0) {
        return Err(Error::InvalidParameter("max_rank must be at least 1".into()));
    }
    let dec = linalg::svd(&frames.data)?;
    let sv = &dec.singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return Err(Error::DegenerateSubspace);
    }
    let mut rank = sv.iter().filter(|&&s| s > opts.rel_tol * smax).count();
    if let Some(cap) = opts.max_rank {
        rank = rank.min(cap);
    }
    let u = dec.u.expect("u requested");
    Ok(u.columns(0, rank).into_owned())
}

/// Orthogonal projector `B Bᵀ` onto the span of an orthonormal basis.
pub fn projector(basis: &DMatrix<f64>) -> DMatrix<f64> {
    let p = basis * basis.transpose();
    // Exact symmetry regardless of summation order.
    (&p + p.transpose()) * 0.5
}

/// Squared distance `qᵀq − Tr(P qqᵀ)` from `q` to the subspace with
/// projector `P`.
pub fn distance_sq(q: &DVector<f64>, projector: &DMatrix<f64>) -> Result<f64> {
    if projector.nrows() != q.len() || projector.ncols() != q.len() {
        return Err(Error::dims("distance_sq", projector.nrows(), q.len()));
    }
    if q.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("query"));
    }
    let qq = q.dot(q);
    let captured = q.dot(&(projector * q));
    let dist = qq - captured;
    if dist < 0.0 {
        if dist >= -DISTANCE_CLAMP_TOL * (1.0 + qq) {
            return Ok(0.0);
        }
        return Err(Error::Numerical(format!(
            "negative squared distance {dist}; projector is not a valid orthogonal projector"
        )));
    }
    Ok(dist)
}

/// Lifts an image feature to `vec(qqᵀ)`, column-major:
/// `lifted[i + d·j] = q_i · q_j`.
pub fn lift_query(query_id: impl Into<String>, q: DVector<f64>) -> Result<QueryLift> {
    if q.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("query"));
    }
    let d = q.len();
    let mut lifted = DVector::zeros(d * d);
    for j in 0..d {
        for i in 0..d {
            lifted[i + d * j] = q[i] * q[j];
        }
    }
    Ok(QueryLift {
        query_id: query_id.into(),
        raw: q,
        lifted,
    })
}

/// Inner product `⟨vec(P), vec(qqᵀ)⟩`.
pub fn vec_score(entry: &SubspaceEntry, lift: &QueryLift) -> Result<f64> {
    let d = entry.dim();
    if lift.dim() != d {
        return Err(Error::dims("vec_score", d, lift.dim()));
    }
    Ok(entry
        .projector
        .as_slice()
        .iter()
        .zip(lift.lifted.iter())
        .map(|(a, b)| a * b)
        .sum())
}

/// Exact top-`k` retrieval by `⟨vec(P), vec(qqᵀ)⟩`.
pub fn exact_search(lift: &QueryLift, database: &[SubspaceEntry], k: usize) -> Result<RankedResult> {
    if database.is_empty() {
        return Err(Error::EmptyInput("subspace database"));
    }
    if k > database.len() {
        return Err(Error::InvalidParameter(format!(
            "k = {k} exceeds database size {}",
            database.len()
        )));
    }
    let scored = database
        .iter()
        .map(|e| {
            Ok(Hit {
                video_id: e.video_id.clone(),
                score: vec_score(e, lift)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RankedResult {
        hits: top_k(scored, k, |a, b| b.total_cmp(a)),
    })
}

/// Keeps the best `k` hits. `by_score` orders scores best-first; ties are
/// broken by ascending video id.
pub(crate) fn top_k<S, F>(mut hits: Vec<Hit<S>>, k: usize, by_score: F) -> Vec<Hit<S>>
where
    F: Fn(&S, &S) -> Ordering,
{
    let cmp = |a: &Hit<S>, b: &Hit<S>| {
        by_score(&a.score, &b.score).then_with(|| a.video_id.cmp(&b.video_id))
    };
    if k == 0 {
        return Vec::new();
    }
    if k < hits.len() {
        hits.select_nth_unstable_by(k - 1, cmp);
        hits.truncate(k);
    }
    hits.sort_by(cmp);
    hits
}
