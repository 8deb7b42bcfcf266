//! Clustered synthetic datasets.
//!
//! Each cluster owns a random `subspace_dim`-dimensional subspace of `ℝᵈ`.
//! A video's frames are Gaussian combinations of that cluster's basis plus
//! isotropic Gaussian noise, and every video contributes one extra frame
//! drawn the same way as a held-out image. The first `queries_per_cluster`
//! images of each cluster are marked as queries, the rest as training images.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub clusters: usize,
    pub videos_per_cluster: usize,
    pub frames_per_video: usize,
    pub d: usize,
    pub subspace_dim: usize,
    pub noise: f64,
    pub queries_per_cluster: usize,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            clusters: 10,
            videos_per_cluster: 20,
            frames_per_video: 12,
            d: 32,
            subspace_dim: 4,
            noise: 0.1,
            queries_per_cluster: 5,
            seed: 0,
        }
    }
}

impl SynthParams {
    fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParameter(msg));
        if self.clusters == 0 || self.videos_per_cluster == 0 || self.frames_per_video == 0 {
            return fail("clusters, videos per cluster and frames per video must be positive".into());
        }
        if self.subspace_dim == 0 || self.subspace_dim >= self.d {
            return fail(format!(
                "subspace dimension {} must satisfy 1 <= subspace_dim < d = {}",
                self.subspace_dim, self.d
            ));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return fail(format!("noise must be non-negative, got {}", self.noise));
        }
        if self.queries_per_cluster > self.videos_per_cluster {
            return fail(format!(
                "queries per cluster {} exceeds videos per cluster {}",
                self.queries_per_cluster, self.videos_per_cluster
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Query,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Query => "query",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "query" => Ok(Split::Query),
            other => Err(format!("unknown split {other:?}, expected train or query")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthVideo {
    pub id: String,
    pub category: String,
    pub frames: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthImage {
    pub id: String,
    pub category: String,
    pub source: String,
    pub split: Split,
    pub vector: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub videos: Vec<SynthVideo>,
    pub images: Vec<SynthImage>,
}

fn label(prefix: &str, i: usize, width: usize) -> String {
    format!("{prefix}{i:0width$}")
}

fn digits(n: usize) -> usize {
    n.max(1).to_string().len()
}

pub fn generate(params: &SynthParams) -> Result<SynthDataset> {
    params.validate()?;
    let SynthParams { d, subspace_dim: s, frames_per_video: f, noise, .. } = *params;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let bases: Vec<_> = (0..params.clusters)
        .map(|_| linalg::random_orthonormal(&mut rng, d, s))
        .collect();
    let total = params.clusters * params.videos_per_cluster;
    let (cw, vw) = (digits(params.clusters - 1), digits(total - 1));

    let mut videos = Vec::with_capacity(total);
    let mut images = Vec::with_capacity(total);
    for (c, basis) in bases.iter().enumerate() {
        let category = label("c", c, cw);
        for v in 0..params.videos_per_cluster {
            let index = c * params.videos_per_cluster + v;
            let coeffs = linalg::gaussian(&mut rng, s, f + 1);
            let jitter = linalg::gaussian(&mut rng, d, f + 1);
            let all = basis * coeffs + jitter * noise;
            let id = label("v", index, vw);
            images.push(SynthImage {
                id: label("i", index, vw),
                category: category.clone(),
                source: id.clone(),
                split: if v < params.queries_per_cluster { Split::Query } else { Split::Train },
                vector: all.column(f).into_owned(),
            });
            videos.push(SynthVideo {
                id,
                category: category.clone(),
                frames: all.columns(0, f).into_owned(),
            });
        }
    }
    Ok(SynthDataset { videos, images })
}
