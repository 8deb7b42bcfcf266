//! Bilinear binary coding.
//!
//! A `d x d` datum `X` is hashed as `sgn(R1ᵀ X R2)` with orthonormal
//! `R1: d x c1` and `R2: d x c2`, giving a `c1 x c2` code. This equals the
//! full projection `sgn((R2 ⊗ R1)ᵀ vec(X))` while storing only two small
//! rotations. Videos use `(P1, P2)` on their projectors and images use
//! `(Q1, Q2)` on `xxᵀ`, both after centering and unit-norm scaling.
//!
//! Training maximizes
//!
//! ```text
//! Σᵢ Tr(Bᵢᵁ Q2ᵀ Uᵢᵀ Q1) + Σⱼ Tr(Bⱼⱽ P2ᵀ Vⱼᵀ P1) + (μ/√c) Σᵢⱼ δᵢⱼ Tr(Bⱼⱽ Bᵢᵁᵀ)
//! ```
//!
//! by block coordinate ascent. Every block update is an exact maximizer, so
//! the objective never decreases.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ibc::SignCode;
use crate::linalg::{self, sign};
use crate::subspace::SubspaceEntry;

/// Rotation-update change below which a block counts as unchanged.
const ROTATION_TOL: f64 = 1e-10;

/// `c1 x c2` matrix of ±1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BilinearCode {
    rows: usize,
    cols: usize,
    bits: Vec<i8>,
}

impl BilinearCode {
    fn from_signs(m: &DMatrix<f64>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            bits: m.iter().map(|&x| sign(x) as i8).collect(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.bits[i + self.rows * j]
    }

    /// Column-major flattening, matching `vec(·)`.
    pub fn flatten(&self) -> SignCode {
        SignCode {
            bits: self.bits.clone(),
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_iterator(self.rows, self.cols, self.bits.iter().map(|&b| f64::from(b)))
    }
}

/// `sgn(R1ᵀ X R2)` with `sgn(0) = +1`.
pub fn bilinear_encode(r1: &DMatrix<f64>, r2: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<BilinearCode> {
    check_rotation_shapes(r1, r2, x.nrows())?;
    if !x.is_square() {
        return Err(Error::dims("bilinear input columns", x.nrows(), x.ncols()));
    }
    Ok(BilinearCode::from_signs(&(r1.transpose() * x * r2)))
}

fn check_rotation_shapes(r1: &DMatrix<f64>, r2: &DMatrix<f64>, d: usize) -> Result<()> {
    if r1.nrows() != d {
        return Err(Error::dims("left rotation rows", d, r1.nrows()));
    }
    if r2.nrows() != d {
        return Err(Error::dims("right rotation rows", d, r2.nrows()));
    }
    Ok(())
}

/// Centering and scaling applied to one side's matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub mats: Vec<DMatrix<f64>>,
    pub mean: DMatrix<f64>,
    /// Frobenius norm of each centered matrix before scaling; zero marks an
    /// item left as the zero matrix.
    pub norms: Vec<f64>,
}

impl Preprocessed {
    pub fn zero_flags(&self) -> impl Iterator<Item = bool> + '_ {
        self.norms.iter().map(|&n| n == 0.0)
    }
}

/// Subtracts the mean matrix and scales each item to unit Frobenius norm.
pub fn preprocess(mats: &[DMatrix<f64>]) -> Result<Preprocessed> {
    let first = mats.first().ok_or(Error::EmptyInput("matrix list"))?;
    let shape = first.shape();
    let mut mean = DMatrix::zeros(shape.0, shape.1);
    for m in mats {
        if m.shape() != shape {
            return Err(Error::dims("matrix shape", shape.0, m.nrows()));
        }
        linalg::ensure_finite(m, "bilinear training matrix")?;
        mean += m;
    }
    mean /= mats.len() as f64;
    let mut out = Vec::with_capacity(mats.len());
    let mut norms = Vec::with_capacity(mats.len());
    for m in mats {
        let (centered, norm) = center_and_scale(m, &mean);
        out.push(centered);
        norms.push(norm);
    }
    Ok(Preprocessed { mats: out, mean, norms })
}

fn center_and_scale(m: &DMatrix<f64>, mean: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let mut c = m - mean;
    let norm = c.norm();
    if norm > 0.0 {
        c /= norm;
    }
    (c, norm)
}

/// `δᵢⱼ = 1` iff image `i` and video `j` share a category.
pub fn delta_from_categories<S: AsRef<str>>(image_categories: &[S], video_categories: &[S]) -> DMatrix<f64> {
    DMatrix::from_fn(image_categories.len(), video_categories.len(), |i, j| {
        f64::from(u8::from(image_categories[i].as_ref() == video_categories[j].as_ref()))
    })
}

/// `δᵢⱼ = 1` iff image `i` was sampled from video `j`.
pub fn delta_from_sources(image_sources: &[usize], videos: usize) -> DMatrix<f64> {
    DMatrix::from_fn(image_sources.len(), videos, |i, j| f64::from(u8::from(image_sources[i] == j)))
}

/// Preprocessed video projectors `Vⱼ`, image outer products `Uᵢ` and the
/// image/video similarity indicator `δ` (`n x k`).
#[derive(Debug, Clone, PartialEq)]
pub struct BbcTrainingSet {
    pub d: usize,
    pub videos: Preprocessed,
    pub images: Preprocessed,
    pub delta: DMatrix<f64>,
}

impl BbcTrainingSet {
    pub fn new(subspaces: &[SubspaceEntry], images: &[DVector<f64>], delta: DMatrix<f64>) -> Result<Self> {
        let first = subspaces.first().ok_or(Error::EmptyInput("training subspaces"))?;
        let d = first.dim();
        let v: Vec<_> = subspaces.iter().map(|s| s.projector().clone()).collect();
        let u = images
            .iter()
            .map(|x| {
                if x.len() != d {
                    return Err(Error::dims("image dimension", d, x.len()));
                }
                Ok(x * x.transpose())
            })
            .collect::<Result<Vec<_>>>()?;
        if u.is_empty() {
            return Err(Error::EmptyInput("training images"));
        }
        Self::from_preprocessed(d, preprocess(&v)?, preprocess(&u)?, delta)
    }

    pub fn from_preprocessed(d: usize, videos: Preprocessed, images: Preprocessed, delta: DMatrix<f64>) -> Result<Self> {
        if videos.mats.is_empty() || images.mats.is_empty() {
            return Err(Error::EmptyInput("bilinear training set"));
        }
        for m in videos.mats.iter().chain(&images.mats) {
            if m.shape() != (d, d) {
                return Err(Error::dims("bilinear datum size", d, m.nrows()));
            }
        }
        if delta.shape() != (images.mats.len(), videos.mats.len()) {
            return Err(Error::dims("delta rows", images.mats.len(), delta.nrows()));
        }
        if delta.iter().any(|&x| x != 0.0 && x != 1.0) {
            return Err(Error::InvalidParameter("delta entries must be 0 or 1".into()));
        }
        Ok(Self { d, videos, images, delta })
    }

    pub fn n_images(&self) -> usize {
        self.images.mats.len()
    }

    pub fn n_videos(&self) -> usize {
        self.videos.mats.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BbcParams {
    pub c1: usize,
    pub c2: usize,
    pub mu: f64,
    /// Maximum number of sweeps.
    pub iters: usize,
    pub seed: u64,
}

impl Default for BbcParams {
    fn default() -> Self {
        Self {
            c1: 8,
            c2: 8,
            mu: 1.0,
            iters: 10,
            seed: 0,
        }
    }
}

impl BbcParams {
    pub fn bits(&self) -> usize {
        self.c1 * self.c2
    }

    fn validate(&self, d: usize) -> Result<()> {
        if self.c1 == 0 || self.c2 == 0 || self.c1 > d || self.c2 > d {
            return Err(Error::InvalidParameter(format!(
                "code shape {}x{} must satisfy 1 <= c1, c2 <= d = {d}",
                self.c1, self.c2
            )));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidParameter(format!("mu must be non-negative, got {}", self.mu)));
        }
        if self.iters == 0 {
            return Err(Error::InvalidParameter("iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BbcModel {
    pub d: usize,
    pub p1: DMatrix<f64>,
    pub p2: DMatrix<f64>,
    pub q1: DMatrix<f64>,
    pub q2: DMatrix<f64>,
    pub center_v: DMatrix<f64>,
    pub center_u: DMatrix<f64>,
    pub params: BbcParams,
}

/// Maximizer of `Tr(D P)` over orthonormal `P` (`d x c`) for `D` of shape
/// `c x d`: `P = Y Zᵀ` from `D = Z Σ Yᵀ`.
pub fn maximize_trace_left(d1: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    linalg::polar_maximizer(&d1.transpose())
}

/// Maximizer of `Tr(Pᵀ D)` over orthonormal `P` (`d x c`) for `D` of shape
/// `d x c`: `P = Z Yᵀ` from `D = Z Σ Yᵀ`.
pub fn maximize_trace_right(d2: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    linalg::polar_maximizer(d2)
}

/// `Σ Bⱼ R2ᵀ Xⱼᵀ`, shape `c1 x d`.
fn left_factor(mats: &[DMatrix<f64>], r2: &DMatrix<f64>, codes: &[DMatrix<f64>]) -> DMatrix<f64> {
    let d = r2.nrows();
    let c1 = codes.first().map_or(0, |b| b.nrows());
    let mut acc = DMatrix::zeros(c1, d);
    for (x, b) in mats.iter().zip(codes) {
        acc += (b * r2.transpose()) * x.transpose();
    }
    acc
}

/// `Σ Xⱼᵀ R1 Bⱼ`, shape `d x c2`.
fn right_factor(mats: &[DMatrix<f64>], r1: &DMatrix<f64>, codes: &[DMatrix<f64>]) -> DMatrix<f64> {
    let d = r1.nrows();
    let c2 = codes.first().map_or(0, |b| b.ncols());
    let mut acc = DMatrix::zeros(d, c2);
    for (x, b) in mats.iter().zip(codes) {
        acc += x.transpose() * (r1 * b);
    }
    acc
}

/// Video left rotation step: maximizes `Tr(D1 P1)` with
/// `D1 = Σⱼ Bⱼⱽ P2ᵀ Vⱼᵀ`.
pub fn update_p1(train: &BbcTrainingSet, p2: &DMatrix<f64>, codes_v: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
    maximize_trace_left(&left_factor(&train.videos.mats, p2, codes_v))
}

/// Video right rotation step: maximizes `Tr(P2ᵀ D2)` with
/// `D2 = Σⱼ Vⱼᵀ P1 Bⱼⱽ`.
pub fn update_p2(train: &BbcTrainingSet, p1: &DMatrix<f64>, codes_v: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
    maximize_trace_right(&right_factor(&train.videos.mats, p1, codes_v))
}

pub fn update_q1(train: &BbcTrainingSet, q2: &DMatrix<f64>, codes_u: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
    maximize_trace_left(&left_factor(&train.images.mats, q2, codes_u))
}

pub fn update_q2(train: &BbcTrainingSet, q1: &DMatrix<f64>, codes_u: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
    maximize_trace_right(&right_factor(&train.images.mats, q1, codes_u))
}

/// Exact code step `B = sgn(R1ᵀ X R2 + w Σ neighbours)`, the maximizer of
/// `Tr(B D3)` for `D3 = R2ᵀ Xᵀ R1 + w Σ Nᵀ`.
fn code_step<'a>(
    r1: &DMatrix<f64>,
    r2: &DMatrix<f64>,
    x: &DMatrix<f64>,
    neighbours: impl Iterator<Item = &'a DMatrix<f64>>,
    weight: f64,
) -> DMatrix<f64> {
    let mut arg = r1.transpose() * x * r2;
    if weight != 0.0 {
        for nb in neighbours {
            arg += nb * weight;
        }
    }
    linalg::sign_matrix(&arg)
}

/// Code update for video `j` given the current image codes.
pub fn update_code_v(
    train: &BbcTrainingSet,
    p1: &DMatrix<f64>,
    p2: &DMatrix<f64>,
    j: usize,
    codes_u: &[DMatrix<f64>],
    mu: f64,
) -> BilinearCode {
    let weight = cross_weight(mu, p1.ncols() * p2.ncols());
    let neighbours = codes_u.iter().enumerate().filter(|(i, _)| train.delta[(*i, j)] == 1.0).map(|(_, b)| b);
    BilinearCode::from_signs(&code_step(p1, p2, &train.videos.mats[j], neighbours, weight))
}

/// Code update for image `i` given the current video codes.
pub fn update_code_u(
    train: &BbcTrainingSet,
    q1: &DMatrix<f64>,
    q2: &DMatrix<f64>,
    i: usize,
    codes_v: &[DMatrix<f64>],
    mu: f64,
) -> BilinearCode {
    let weight = cross_weight(mu, q1.ncols() * q2.ncols());
    let neighbours = codes_v.iter().enumerate().filter(|(j, _)| train.delta[(i, *j)] == 1.0).map(|(_, b)| b);
    BilinearCode::from_signs(&code_step(q1, q2, &train.images.mats[i], neighbours, weight))
}

fn cross_weight(mu: f64, c: usize) -> f64 {
    mu / (c as f64).sqrt()
}

/// The training objective for the given rotations and codes.
#[allow(clippy::too_many_arguments)]
pub fn objective(
    train: &BbcTrainingSet,
    p1: &DMatrix<f64>,
    p2: &DMatrix<f64>,
    q1: &DMatrix<f64>,
    q2: &DMatrix<f64>,
    codes_u: &[DMatrix<f64>],
    codes_v: &[DMatrix<f64>],
    mu: f64,
) -> Result<f64> {
    if codes_u.len() != train.n_images() {
        return Err(Error::dims("image codes", train.n_images(), codes_u.len()));
    }
    if codes_v.len() != train.n_videos() {
        return Err(Error::dims("video codes", train.n_videos(), codes_v.len()));
    }
    let c = p1.ncols() * p2.ncols();
    for b in codes_u.iter().chain(codes_v) {
        if b.shape() != (p1.ncols(), p2.ncols()) {
            return Err(Error::dims("code shape", c, b.len()));
        }
    }
    // Tr(B Mᵀ) is the Frobenius inner product ⟨B, M⟩.
    let image_term: f64 = train
        .images
        .mats
        .iter()
        .zip(codes_u)
        .map(|(u, b)| b.dot(&(q1.transpose() * u * q2)))
        .sum();
    let video_term: f64 = train
        .videos
        .mats
        .iter()
        .zip(codes_v)
        .map(|(v, b)| b.dot(&(p1.transpose() * v * p2)))
        .sum();
    let mut cross = 0.0;
    if mu != 0.0 {
        for (i, bu) in codes_u.iter().enumerate() {
            for (j, bv) in codes_v.iter().enumerate() {
                if train.delta[(i, j)] == 1.0 {
                    cross += bv.dot(bu);
                }
            }
        }
    }
    Ok(image_term + video_term + cross_weight(mu, c) * cross)
}

/// Which block a training step updated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    P1,
    P2,
    VideoCodes,
    Q1,
    Q2,
    ImageCodes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockStep {
    pub sweep: usize,
    pub block: Block,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub code_flips: usize,
    pub max_rotation_change: f64,
    /// Largest `‖RᵀR − I‖_F` over the four rotations after the sweep.
    pub orthonormality_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BbcReport {
    pub initial_objective: f64,
    pub steps: Vec<BlockStep>,
    pub sweeps: Vec<SweepSummary>,
    pub converged: bool,
    pub codes_u: Vec<BilinearCode>,
    pub codes_v: Vec<BilinearCode>,
}

impl BbcReport {
    pub fn final_objective(&self) -> f64 {
        self.steps.last().map_or(self.initial_objective, |s| s.objective)
    }

    /// Objective values in order, starting from the initialization.
    pub fn objective_trace(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(self.initial_objective).chain(self.steps.iter().map(|s| s.objective))
    }
}

fn count_flips(old: &[DMatrix<f64>], new: &[DMatrix<f64>]) -> usize {
    old.iter()
        .zip(new)
        .map(|(a, b)| a.iter().zip(b.iter()).filter(|(x, y)| x != y).count())
        .sum()
}

/// Runs the block coordinate ascent. Stops after `params.iters` sweeps or
/// once a sweep changes no code bit and moves no rotation by more than
/// `1e-10` (Frobenius).
pub fn train_bbc(train: &BbcTrainingSet, params: BbcParams) -> Result<(BbcModel, BbcReport)> {
    let d = train.d;
    params.validate(d)?;
    let BbcParams { c1, c2, mu, .. } = params;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut q1 = linalg::random_orthonormal(&mut rng, d, c1);
    let mut q2 = linalg::random_orthonormal(&mut rng, d, c2);
    let mut p2 = linalg::random_orthonormal(&mut rng, d, c2);
    let mut p1 = linalg::random_orthonormal(&mut rng, d, c1);

    let encode_all = |r1: &DMatrix<f64>, r2: &DMatrix<f64>, mats: &[DMatrix<f64>]| -> Vec<DMatrix<f64>> {
        mats.iter().map(|x| linalg::sign_matrix(&(r1.transpose() * x * r2))).collect()
    };
    let mut codes_v = encode_all(&p1, &p2, &train.videos.mats);
    let mut codes_u = encode_all(&q1, &q2, &train.images.mats);

    let eval = |p1: &DMatrix<f64>, p2: &DMatrix<f64>, q1: &DMatrix<f64>, q2: &DMatrix<f64>, cu: &[DMatrix<f64>], cv: &[DMatrix<f64>]| {
        objective(train, p1, p2, q1, q2, cu, cv, mu)
    };
    let initial_objective = eval(&p1, &p2, &q1, &q2, &codes_u, &codes_v)?;
    let mut steps = Vec::with_capacity(6 * params.iters);
    let mut sweeps = Vec::with_capacity(params.iters);
    let mut converged = false;

    for sweep in 1..=params.iters {
        let mut flips = 0;
        let mut moved: f64 = 0.0;

        let new_p1 = update_p1(train, &p2, &codes_v)?;
        moved = moved.max((&new_p1 - &p1).norm());
        p1 = new_p1;
        steps.push(BlockStep { sweep, block: Block::P1, objective: eval(&p1, &p2, &q1, &q2, &codes_u, &codes_v)? });

        let new_p2 = update_p2(train, &p1, &codes_v)?;
        moved = moved.max((&new_p2 - &p2).norm());
        p2 = new_p2;
        steps.push(BlockStep { sweep, block: Block::P2, objective: eval(&p1, &p2, &q1, &q2, &codes_u, &codes_v)? });

        let new_v: Vec<_> = (0..train.n_videos())
            .map(|j| update_code_v(train, &p1, &p2, j, &codes_u, mu).to_matrix())
            .collect();
        flips += count_flips(&codes_v, &new_v);
        codes_v = new_v;
        steps.push(BlockStep { sweep, block: Block::VideoCodes, objective: eval(&p1, &p2, &q1, &q2, &codes_u, &codes_v)? });

        let new_q1 = update_q1(train, &q2, &codes_u)?;
        moved = moved.max((&new_q1 - &q1).norm());
        q1 = new_q1;
        steps.push(BlockStep { sweep, block: Block::Q1, objective: eval(&p1, &p2, &q1, &q2, &codes_u, &codes_v)? });

        let new_q2 = update_q2(train, &q1, &codes_u)?;
        moved = moved.max((&new_q2 - &q2).norm());
        q2 = new_q2;
        steps.push(BlockStep { sweep, block: Block::Q2, objective: eval(&p1, &p2, &q1, &q2, &codes_u, &codes_v)? });

        let new_u: Vec<_> = (0..train.n_images())
            .map(|i| update_code_u(train, &q1, &q2, i, &codes_v, mu).to_matrix())
            .collect();
        flips += count_flips(&codes_u, &new_u);
        codes_u = new_u;
        steps.push(BlockStep { sweep, block: Block::ImageCodes, objective: eval(&p1, &p2, &q1, &q2, &codes_u, &codes_v)? });

        let residual = [&p1, &p2, &q1, &q2]
            .into_iter()
            .map(linalg::orthonormality_residual)
            .fold(0.0, f64::max);
        sweeps.push(SweepSummary { code_flips: flips, max_rotation_change: moved, orthonormality_residual: residual });
        if flips == 0 && moved <= ROTATION_TOL {
            converged = true;
            break;
        }
    }

    let to_codes = |cs: &[DMatrix<f64>]| cs.iter().map(BilinearCode::from_signs).collect();
    let report = BbcReport {
        initial_objective,
        steps,
        sweeps,
        converged,
        codes_u: to_codes(&codes_u),
        codes_v: to_codes(&codes_v),
    };
    let model = BbcModel {
        d,
        p1,
        p2,
        q1,
        q2,
        center_v: train.videos.mean.clone(),
        center_u: train.images.mean.clone(),
        params,
    };
    Ok((model, report))
}

impl BbcModel {
    pub fn bits(&self) -> usize {
        self.params.bits()
    }

    pub fn encode_video(&self, subspace: &SubspaceEntry) -> Result<BilinearCode> {
        if subspace.dim() != self.d {
            return Err(Error::dims("subspace dimension", self.d, subspace.dim()));
        }
        let (x, _) = center_and_scale(subspace.projector(), &self.center_v);
        bilinear_encode(&self.p1, &self.p2, &x)
    }

    pub fn encode_image(&self, q: &DVector<f64>) -> Result<BilinearCode> {
        if q.len() != self.d {
            return Err(Error::dims("image dimension", self.d, q.len()));
        }
        if q.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("query"));
        }
        let (x, _) = center_and_scale(&(q * q.transpose()), &self.center_u);
        bilinear_encode(&self.q1, &self.q2, &x)
    }
}
