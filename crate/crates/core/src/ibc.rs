//! Inner-product binary coding.
//!
//! Videos are hashed by `f(x) = sgn(Pᵀ x)` on `x = vec(S̃)` and images by
//! `g(z) = sgn(Qᵀ z)` on `z = vec(qqᵀ)`. Training maximizes
//! `Tr(g(U) A f(V)ᵀ)` by alternating between the two sides. Each side
//! introduces auxiliary codes `B ≈ sgn(WᵀX)` and alternates two exact
//! coordinate steps on
//!
//! ```text
//! Tr(B A' Cᵀ) − λ ‖B − WᵀX‖²_F
//! ```
//!
//! where `C` holds the fixed codes of the other side and `A'` is `A` or `Aᵀ`:
//! `B = sgn(C A'ᵀ + 2λ WᵀX)` and `W = argmin ‖B − WᵀX‖_F`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hamming::PackedCode;
use crate::linalg::{self, sign};
use crate::subspace::{lift_query, SubspaceEntry};

/// ±1 hash code.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SignCode {
    pub bits: Vec<i8>,
}

impl SignCode {
    pub fn from_signs(values: impl IntoIterator<Item = f64>) -> Self {
        Self {
            bits: values.into_iter().map(|x| sign(x) as i8).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn pack(&self) -> PackedCode {
        PackedCode::pack(&self.bits).expect("sign codes only hold ±1")
    }
}

/// How the image/video correlation matrix `A` is formed from `UᵀV`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationMode {
    /// `A = UᵀV`.
    Raw,
    /// Per column of `UᵀV`, the `m` largest entries become 1 and the rest 0.
    TopM(usize),
}

/// Training data: lifted images `U` (`d² x n`), vectorized projectors `V`
/// (`d² x k`) and correlation `A` (`n x k`).
#[derive(Debug, Clone, PartialEq)]
pub struct IbcTrainingSet {
    pub d: usize,
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub a: DMatrix<f64>,
}

impl IbcTrainingSet {
    pub fn new(d: usize, u: DMatrix<f64>, v: DMatrix<f64>, a: DMatrix<f64>) -> Result<Self> {
        let dd = d * d;
        if u.nrows() != dd {
            return Err(Error::dims("image data rows", dd, u.nrows()));
        }
        if v.nrows() != dd {
            return Err(Error::dims("video data rows", dd, v.nrows()));
        }
        if u.ncols() == 0 || v.ncols() == 0 {
            return Err(Error::EmptyInput("training images or videos"));
        }
        if a.shape() != (u.ncols(), v.ncols()) {
            return Err(Error::dims("correlation rows", u.ncols(), a.nrows()));
        }
        linalg::ensure_finite(&u, "image training data")?;
        linalg::ensure_finite(&v, "video training data")?;
        linalg::ensure_finite(&a, "correlation matrix")?;
        Ok(Self { d, u, v, a })
    }

    /// Builds `U`, `V` and `A` from subspaces and sampled images.
    pub fn from_data(
        subspaces: &[SubspaceEntry],
        images: &[DVector<f64>],
        mode: CorrelationMode,
    ) -> Result<Self> {
        let (u, v) = build_training(subspaces, images)?;
        let a = correlation(&u, &v, mode)?;
        Self::new(subspaces[0].dim(), u, v, a)
    }
}

/// Stacks `vec(xᵢxᵢᵀ)` into the columns of `U` and `vec(S̃ⱼ)` into `V`.
pub fn build_training(
    subspaces: &[SubspaceEntry],
    images: &[DVector<f64>],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if subspaces.is_empty() {
        return Err(Error::EmptyInput("training subspaces"));
    }
    if images.is_empty() {
        return Err(Error::EmptyInput("training images"));
    }
    let d = subspaces[0].dim();
    let mut v = DMatrix::zeros(d * d, subspaces.len());
    for (j, s) in subspaces.iter().enumerate() {
        if s.dim() != d {
            return Err(Error::dims("subspace dimension", d, s.dim()));
        }
        v.column_mut(j).copy_from(&s.vec_projector());
    }
    let mut u = DMatrix::zeros(d * d, images.len());
    for (i, x) in images.iter().enumerate() {
        if x.len() != d {
            return Err(Error::dims("image dimension", d, x.len()));
        }
        u.column_mut(i).copy_from(&lift_query("", x.clone())?.lifted);
    }
    Ok((u, v))
}

/// Correlation matrix between images (rows) and videos (columns).
pub fn correlation(u: &DMatrix<f64>, v: &DMatrix<f64>, mode: CorrelationMode) -> Result<DMatrix<f64>> {
    if u.nrows() != v.nrows() {
        return Err(Error::dims("correlation inputs", u.nrows(), v.nrows()));
    }
    let raw = u.transpose() * v;
    match mode {
        CorrelationMode::Raw => Ok(raw),
        CorrelationMode::TopM(m) => {
            let n = raw.nrows();
            if m == 0 || m > n {
                return Err(Error::InvalidParameter(format!(
                    "top-m requires 1 <= m <= {n}, got {m}"
                )));
            }
            let mut a = DMatrix::zeros(n, raw.ncols());
            let mut order: Vec<usize> = (0..n).collect();
            for j in 0..raw.ncols() {
                let col = raw.column(j);
                order.sort_by(|&x, &y| col[y].total_cmp(&col[x]).then(x.cmp(&y)));
                for &i in &order[..m] {
                    a[(i, j)] = 1.0;
                }
            }
            Ok(a)
        }
    }
}

/// Code update for one side: `sgn(C A'ᵀ + 2λ WᵀX)` with `sgn(0) = +1`.
///
/// `other_codes` is `r x m`, `a` is `n x m`, `proj` is `D x r`, `data` is
/// `D x n`. The result maximizes `Tr(B A' Cᵀ) − λ‖B − WᵀX‖²_F` over all
/// `r x n` sign matrices.
pub fn update_b(
    other_codes: &DMatrix<f64>,
    a: &DMatrix<f64>,
    proj: &DMatrix<f64>,
    data: &DMatrix<f64>,
    lambda: f64,
) -> Result<DMatrix<f64>> {
    if other_codes.ncols() != a.ncols() {
        return Err(Error::dims("codes vs correlation columns", a.ncols(), other_codes.ncols()));
    }
    if proj.nrows() != data.nrows() {
        return Err(Error::dims("projection rows", data.nrows(), proj.nrows()));
    }
    if proj.ncols() != other_codes.nrows() {
        return Err(Error::dims("code length", other_codes.nrows(), proj.ncols()));
    }
    if a.nrows() != data.ncols() {
        return Err(Error::dims("correlation rows", data.ncols(), a.nrows()));
    }
    let arg = other_codes * a.transpose() + proj.transpose() * data * (2.0 * lambda);
    Ok(linalg::sign_matrix(&arg))
}

/// Least-squares projection `W = argmin ‖B − WᵀX‖_F` (minimum-norm solution of
/// the normal equations `X Xᵀ W = X Bᵀ`).
pub fn update_p(data: &DMatrix<f64>, codes: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    LeastSquares::new(data)?.solve(codes)
}

/// Cached pseudo-inverse of `Xᵀ` for repeated [`update_p`] solves against the
/// same data matrix.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    rows: usize,
    cols: usize,
    // pinv(Xᵀ) = W Σ⁺ Zᵀ, stored as the D x n product.
    pinv_t: DMatrix<f64>,
}

impl LeastSquares {
    pub fn new(data: &DMatrix<f64>) -> Result<Self> {
        let n = data.ncols();
        let pinv_t = linalg::lstsq(&data.transpose(), &DMatrix::identity(n, n))?;
        Ok(Self {
            rows: data.nrows(),
            cols: n,
            pinv_t,
        })
    }

    pub fn solve(&self, codes: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if codes.ncols() != self.cols {
            return Err(Error::dims("code columns", self.cols, codes.ncols()));
        }
        debug_assert_eq!(self.pinv_t.nrows(), self.rows);
        Ok(&self.pinv_t * codes.transpose())
    }
}

/// `Tr(B A' Cᵀ) − λ‖B − WᵀX‖²_F`.
pub fn surrogate_objective(
    codes: &DMatrix<f64>,
    a: &DMatrix<f64>,
    other_codes: &DMatrix<f64>,
    proj: &DMatrix<f64>,
    data: &DMatrix<f64>,
    lambda: f64,
) -> f64 {
    let fit = (codes * a).dot(other_codes);
    let resid = (codes - proj.transpose() * data).norm_squared();
    fit - lambda * resid
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IbcParams {
    pub bits: usize,
    pub lambda: f64,
    pub outer_iters: usize,
    /// B/P passes per side per outer iteration.
    pub inner_iters: usize,
    pub seed: u64,
}

impl Default for IbcParams {
    fn default() -> Self {
        Self {
            bits: 64,
            lambda: 100.0,
            outer_iters: 10,
            inner_iters: 2,
            seed: 0,
        }
    }
}

impl IbcParams {
    fn validate(&self) -> Result<()> {
        if self.bits == 0 {
            return Err(Error::InvalidParameter("code length must be at least 1".into()));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if self.inner_iters == 0 {
            return Err(Error::InvalidParameter("inner iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IbcModel {
    pub d: usize,
    /// Video projection, `d² x r`.
    pub p: DMatrix<f64>,
    /// Image projection, `d² x r`.
    pub q: DMatrix<f64>,
    pub params: IbcParams,
}

/// Which side an inner step updated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Image,
    Video,
}

/// Surrogate values along one side's inner loop: the value before the first
/// step, then after every B step and every projection step.
#[derive(Debug, Clone, PartialEq)]
pub struct SideTrace {
    pub outer: usize,
    pub side: Side,
    pub surrogate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IbcReport {
    pub initial_objective: f64,
    /// `Tr(g(U) A f(V)ᵀ)` after each outer iteration.
    pub objective: Vec<f64>,
    /// Outer iteration whose projections were kept (0 = initialization).
    pub selected_iteration: usize,
    pub sides: Vec<SideTrace>,
}

impl IbcReport {
    pub fn final_objective(&self) -> f64 {
        if self.selected_iteration == 0 {
            self.initial_objective
        } else {
            self.objective[self.selected_iteration - 1]
        }
    }
}

/// `Tr(g(U) A f(V)ᵀ)` for the hash functions of `p` and `q`.
pub fn objective(train: &IbcTrainingSet, p: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    let f_v = linalg::sign_matrix(&(p.transpose() * &train.v));
    let g_u = linalg::sign_matrix(&(q.transpose() * &train.u));
    (g_u * &train.a).dot(&f_v)
}

/// Trains the image and video projections.
///
/// `Q` starts from seeded standard-normal entries and `P` from the same
/// matrix. Each outer iteration updates the image side and then the video
/// side. The projections with the highest `Tr(g(U) A f(V)ᵀ)` seen over the
/// run (including the initialization) are returned.
pub fn train_ibc(train: &IbcTrainingSet, params: IbcParams) -> Result<(IbcModel, IbcReport)> {
    params.validate()?;
    let dd = train.d * train.d;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut q = linalg::gaussian(&mut rng, dd, params.bits);
    let mut p = q.clone();

    let image_ls = LeastSquares::new(&train.u)?;
    let video_ls = LeastSquares::new(&train.v)?;
    let a_t = train.a.transpose();
    let lambda = params.lambda;

    let initial_objective = objective(train, &p, &q);
    let mut best = (initial_objective, 0, p.clone(), q.clone());
    let mut trace = Vec::with_capacity(params.outer_iters);
    let mut sides = Vec::with_capacity(2 * params.outer_iters);

    for outer in 1..=params.outer_iters {
        let f_v = linalg::sign_matrix(&(p.transpose() * &train.v));
        let mut surrogate = Vec::with_capacity(1 + 2 * params.inner_iters);
        let mut b = linalg::sign_matrix(&(q.transpose() * &train.u));
        surrogate.push(surrogate_objective(&b, &train.a, &f_v, &q, &train.u, lambda));
        for _ in 0..params.inner_iters {
            b = update_b(&f_v, &train.a, &q, &train.u, lambda)?;
            surrogate.push(surrogate_objective(&b, &train.a, &f_v, &q, &train.u, lambda));
            q = image_ls.solve(&b)?;
            surrogate.push(surrogate_objective(&b, &train.a, &f_v, &q, &train.u, lambda));
        }
        sides.push(SideTrace { outer, side: Side::Image, surrogate });

        let g_u = linalg::sign_matrix(&(q.transpose() * &train.u));
        let mut surrogate = Vec::with_capacity(1 + 2 * params.inner_iters);
        let mut c = linalg::sign_matrix(&(p.transpose() * &train.v));
        surrogate.push(surrogate_objective(&c, &a_t, &g_u, &p, &train.v, lambda));
        for _ in 0..params.inner_iters {
            c = update_b(&g_u, &a_t, &p, &train.v, lambda)?;
            surrogate.push(surrogate_objective(&c, &a_t, &g_u, &p, &train.v, lambda));
            p = video_ls.solve(&c)?;
            surrogate.push(surrogate_objective(&c, &a_t, &g_u, &p, &train.v, lambda));
        }
        sides.push(SideTrace { outer, side: Side::Video, surrogate });

        linalg::ensure_finite(&p, "video projection")?;
        linalg::ensure_finite(&q, "image projection")?;
        let obj = objective(train, &p, &q);
        trace.push(obj);
        if obj > best.0 {
            best = (obj, outer, p.clone(), q.clone());
        }
    }

    let (_, selected_iteration, p, q) = best;
    Ok((
        IbcModel { d: train.d, p, q, params },
        IbcReport {
            initial_objective,
            objective: trace,
            selected_iteration,
            sides,
        },
    ))
}

impl IbcModel {
    pub fn bits(&self) -> usize {
        self.params.bits
    }

    /// `sgn(Pᵀ vec(S̃))`.
    pub fn encode_video(&self, subspace: &SubspaceEntry) -> Result<SignCode> {
        if subspace.dim() != self.d {
            return Err(Error::dims("subspace dimension", self.d, subspace.dim()));
        }
        let x = subspace.vec_projector();
        Ok(SignCode::from_signs((self.p.transpose() * x).iter().copied()))
    }

    /// `sgn(Qᵀ vec(qqᵀ))`.
    pub fn encode_image(&self, q: &DVector<f64>) -> Result<SignCode> {
        if q.len() != self.d {
            return Err(Error::dims("image dimension", self.d, q.len()));
        }
        let z = lift_query("", q.clone())?.lifted;
        Ok(SignCode::from_signs((self.q.transpose() * z).iter().copied()))
    }
}
