//! Glue between datasets on disk and the retrieval algorithms.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bbc::{self, BbcParams, BbcTrainingSet};
use crate::error::{Error, Result};
use crate::eval::{evaluate, GroundTruth, MetricReport};
use crate::format::{self, ImageRecord, IndexFile, Manifest, ModelFile, Run, VideoRecord};
use crate::hamming::BinaryIndex;
use crate::ibc::{self, CorrelationMode, IbcParams, IbcTrainingSet};
use crate::subspace::{exact_search, lift_query, BasisOptions, FrameMatrix, Hit, SubspaceEntry};
use crate::synth::{self, Split, SynthDataset, SynthParams};

#[derive(Debug, Clone, PartialEq)]
pub struct Video {
    pub id: String,
    pub category: String,
    pub frames: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub id: String,
    pub category: String,
    pub source: Option<String>,
    pub split: Split,
    pub vector: DVector<f64>,
}

/// A manifest with every referenced file read.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub videos: Vec<Video>,
    pub images: Vec<Image>,
}

impl Dataset {
    pub fn load(manifest_path: &Path) -> Result<Self> {
        let m = Manifest::load(manifest_path)?;
        let videos = m
            .videos
            .iter()
            .map(|v| {
                let path = m.resolve(&v.path);
                let frames = format::read_matrix(&path)?;
                FrameMatrix::new(v.id.clone(), frames.clone()).map_err(|e| Error::format(&path, e.to_string()))?;
                Ok(Video { id: v.id.clone(), category: v.category.clone(), frames })
            })
            .collect::<Result<Vec<_>>>()?;
        let images = m
            .images
            .iter()
            .map(|i| {
                let path = m.resolve(&i.path);
                let vector = format::read_vector(&path)?;
                if vector.iter().any(|x| !x.is_finite()) {
                    return Err(Error::format(&path, "image vector has non-finite entries"));
                }
                Ok(Image {
                    id: i.id.clone(),
                    category: i.category.clone(),
                    source: i.source.clone(),
                    split: i.split,
                    vector,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let ds = Self { videos, images };
        ds.check_dims(manifest_path)?;
        Ok(ds)
    }

    fn check_dims(&self, path: &Path) -> Result<()> {
        let Some(d) = self.dim() else {
            return Err(Error::format(path, "manifest lists no videos"));
        };
        for v in &self.videos {
            if v.frames.nrows() != d {
                return Err(Error::format(path, format!("video {} has dimension {}, expected {d}", v.id, v.frames.nrows())));
            }
        }
        for i in &self.images {
            if i.vector.len() != d {
                return Err(Error::format(path, format!("image {} has dimension {}, expected {d}", i.id, i.vector.len())));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> Option<usize> {
        self.videos.first().map(|v| v.frames.nrows())
    }

    pub fn from_synth(ds: SynthDataset) -> Self {
        Self {
            videos: ds
                .videos
                .into_iter()
                .map(|v| Video { id: v.id, category: v.category, frames: v.frames })
                .collect(),
            images: ds
                .images
                .into_iter()
                .map(|i| Image { id: i.id, category: i.category, source: Some(i.source), split: i.split, vector: i.vector })
                .collect(),
        }
    }

    pub fn images_in(&self, split: Split) -> impl Iterator<Item = &Image> {
        self.images.iter().filter(move |i| i.split == split)
    }

    /// Categories of the query images and of all videos.
    pub fn ground_truth(&self) -> GroundTruth {
        GroundTruth {
            queries: self.images_in(Split::Query).map(|i| (i.id.clone(), i.category.clone())).collect(),
            videos: self.videos.iter().map(|v| (v.id.clone(), v.category.clone())).collect(),
        }
    }

    /// Writes frame and image matrices under `dir` plus `dir/manifest.tsv`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        for sub in ["videos", "images"] {
            let p = dir.join(sub);
            fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        }
        let mut manifest = Manifest { root: dir.to_path_buf(), ..Default::default() };
        for v in &self.videos {
            let rel = PathBuf::from("videos").join(format!("{}.bscm", v.id));
            format::write_matrix(&dir.join(&rel), &v.frames)?;
            manifest.videos.push(VideoRecord { id: v.id.clone(), path: rel, category: v.category.clone() });
        }
        for i in &self.images {
            let rel = PathBuf::from("images").join(format!("{}.bscm", i.id));
            let col = DMatrix::from_column_slice(i.vector.len(), 1, i.vector.as_slice());
            format::write_matrix(&dir.join(&rel), &col)?;
            manifest.images.push(ImageRecord {
                id: i.id.clone(),
                path: rel,
                category: i.category.clone(),
                source: i.source.clone(),
                split: i.split,
            });
        }
        let path = dir.join("manifest.tsv");
        manifest.save(&path)?;
        Ok(path)
    }
}

pub fn build_database(videos: &[Video], opts: BasisOptions) -> Result<Vec<SubspaceEntry>> {
    videos
        .iter()
        .map(|v| SubspaceEntry::from_frames(&FrameMatrix::new(v.id.clone(), v.frames.clone())?, opts))
        .collect()
}

/// `ceil(n / 10)`, at least 1.
pub fn default_top_m(n: usize) -> usize {
    n.div_ceil(10).max(1)
}

/// Splits a code length into `c1 x c2`: `c1` is the largest divisor of
/// `bits` not exceeding `d`.
pub fn bbc_shape(bits: usize, d: usize) -> Result<(usize, usize)> {
    (1..=d.min(bits))
        .rev()
        .find(|c1| bits % c1 == 0 && bits / c1 <= d)
        .map(|c1| (c1, bits / c1))
        .ok_or_else(|| Error::InvalidParameter(format!("{bits} bits cannot be split into c1 x c2 with both factors <= d = {d}")))
}

/// How image/video similarity is decided for BBC training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeltaSource {
    /// Same category label.
    #[default]
    Categories,
    /// Image was sampled from the video.
    Sources,
}

pub fn training_images(ds: &Dataset) -> Result<Vec<&Image>> {
    let imgs: Vec<_> = ds.images_in(Split::Train).collect();
    if imgs.is_empty() {
        return Err(Error::EmptyInput("training images"));
    }
    Ok(imgs)
}

pub fn ibc_training(ds: &Dataset, db: &[SubspaceEntry], mode: CorrelationMode) -> Result<IbcTrainingSet> {
    let images: Vec<_> = training_images(ds)?.into_iter().map(|i| i.vector.clone()).collect();
    IbcTrainingSet::from_data(db, &images, mode)
}

pub fn bbc_training(ds: &Dataset, db: &[SubspaceEntry], delta: DeltaSource) -> Result<BbcTrainingSet> {
    let train = training_images(ds)?;
    let delta = match delta {
        DeltaSource::Categories => {
            let by_id: HashMap<&str, &str> = ds.videos.iter().map(|v| (v.id.as_str(), v.category.as_str())).collect();
            let unknown: Vec<String> = db
                .iter()
                .filter(|s| !by_id.contains_key(s.video_id()))
                .map(|s| s.video_id().to_string())
                .collect();
            if !unknown.is_empty() {
                return Err(Error::UnknownIds(unknown));
            }
            let ic: Vec<_> = train.iter().map(|i| i.category.as_str()).collect();
            let vc: Vec<_> = db.iter().map(|s| by_id[s.video_id()]).collect();
            bbc::delta_from_categories(&ic, &vc)
        }
        DeltaSource::Sources => {
            let sources = train
                .iter()
                .map(|i| {
                    i.source
                        .as_ref()
                        .and_then(|s| db.iter().position(|v| v.video_id() == s))
                        .ok_or_else(|| Error::InvalidParameter(format!("image {} has no source video in the database", i.id)))
                })
                .collect::<Result<Vec<_>>>()?;
            bbc::delta_from_sources(&sources, db.len())
        }
    };
    let images: Vec<_> = train.into_iter().map(|i| i.vector.clone()).collect();
    BbcTrainingSet::new(db, &images, delta)
}

pub fn train_ibc_model(train: &IbcTrainingSet, params: IbcParams, mode: CorrelationMode) -> Result<ModelFile> {
    let (model, _) = ibc::train_ibc(train, params)?;
    Ok(ModelFile::Ibc { model, correlation: mode })
}

pub fn train_bbc_model(train: &BbcTrainingSet, params: BbcParams) -> Result<ModelFile> {
    let (model, _) = bbc::train_bbc(train, params)?;
    Ok(ModelFile::Bbc(model))
}

pub fn encode_index(model: &ModelFile, db: &[SubspaceEntry]) -> Result<IndexFile> {
    let mut index = BinaryIndex::new(model.bits());
    for s in db {
        index.push(s.video_id(), model.encode_video(s)?)?;
    }
    Ok(IndexFile { kind: model.kind(), index })
}

/// A query image: id and feature vector.
pub type Query = (String, DVector<f64>);

pub fn queries(ds: &Dataset) -> Vec<Query> {
    ds.images_in(Split::Query).map(|i| (i.id.clone(), i.vector.clone())).collect()
}

pub fn query_exact(db: &[SubspaceEntry], queries: &[Query], k: usize) -> Result<Run> {
    let mut run = Run::default();
    for (id, q) in queries {
        let lift = lift_query(id.clone(), q.clone())?;
        run.queries.push((id.clone(), exact_search(&lift, db, k)?.hits));
    }
    Ok(run)
}

pub fn query_hashed(model: &ModelFile, index: &IndexFile, queries: &[Query], k: usize) -> Result<Run> {
    if model.kind() != index.kind {
        return Err(Error::InvalidParameter(format!(
            "index was encoded by a {} model but the query model is {}",
            index.kind.name(),
            model.kind().name()
        )));
    }
    let mut run = Run::default();
    for (id, q) in queries {
        let code = model.encode_image(q)?;
        let hits = index
            .index
            .search(&code, k)?
            .into_iter()
            .map(|h| Hit { video_id: h.video_id, score: h.score as f64 })
            .collect();
        run.queries.push((id.clone(), hits));
    }
    Ok(run)
}

/// Every query gets an independent seeded shuffle of the database.
pub fn query_random(db: &[SubspaceEntry], queries: &[Query], seed: u64) -> Run {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut run = Run::default();
    for (id, _) in queries {
        let mut ids: Vec<_> = db.iter().map(|s| s.video_id().to_string()).collect();
        ids.shuffle(&mut rng);
        let hits = ids.into_iter().map(|video_id| Hit { video_id, score: 0.0 }).collect();
        run.queries.push((id.clone(), hits));
    }
    run
}

/// End-to-end retrieval experiment on a synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub synth: SynthParams,
    pub basis: BasisOptions,
    pub bits: usize,
    pub ibc: IbcParams,
    /// `None` uses [`default_top_m`] of the training image count.
    pub top_m: Option<usize>,
    pub bbc_mu: f64,
    pub bbc_iters: usize,
    pub delta: DeltaSource,
    pub precision_k: usize,
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        let synth = SynthParams { seed: 7, ..SynthParams::default() };
        Self {
            basis: BasisOptions { max_rank: Some(synth.subspace_dim), ..BasisOptions::default() },
            synth,
            bits: 64,
            ibc: IbcParams { bits: 64, lambda: 1.0, outer_iters: 10, inner_iters: 2, seed: 7 },
            top_m: Some(15),
            bbc_mu: 1.0,
            bbc_iters: 10,
            delta: DeltaSource::Categories,
            precision_k: 10,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub report: MetricReport,
    pub model: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub run: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkOutcome {
    pub exact: MethodOutcome,
    pub random: MethodOutcome,
    pub ibc: MethodOutcome,
    pub bbc: MethodOutcome,
}

/// Generates the dataset into `dir`, reloads it through the manifest, then
/// trains, encodes, queries and evaluates every method, writing each
/// artifact under `dir`.
pub fn run_benchmark(cfg: &BenchmarkConfig, dir: &Path) -> Result<BenchmarkOutcome> {
    let manifest = Dataset::from_synth(synth::generate(&cfg.synth)?).write(dir)?;
    let ds = Dataset::load(&manifest)?;
    let db = build_database(&ds.videos, cfg.basis)?;
    let qs = queries(&ds);
    let truth = ds.ground_truth();
    let all = db.len();
    let score = |run: Run, name: &str| -> Result<(MetricReport, PathBuf)> {
        let path = dir.join(format!("{name}.run.tsv"));
        run.save(&path)?;
        let loaded = Run::load(&path)?;
        Ok((evaluate(&loaded.rankings(), &truth, cfg.precision_k)?, path))
    };

    let (report, run) = score(query_exact(&db, &qs, all)?, "exact")?;
    let exact = MethodOutcome { report, model: None, index: None, run };
    let (report, run) = score(query_random(&db, &qs, cfg.seed), "random")?;
    let random = MethodOutcome { report, model: None, index: None, run };

    let hashed = |model: ModelFile, name: &str| -> Result<MethodOutcome> {
        let model_path = dir.join(format!("{name}.model"));
        model.save(&model_path)?;
        let model = ModelFile::load(&model_path)?;
        let index_path = dir.join(format!("{name}.index"));
        encode_index(&model, &db)?.save(&index_path)?;
        let index = IndexFile::load(&index_path)?;
        let (report, run) = score(query_hashed(&model, &index, &qs, all)?, name)?;
        Ok(MethodOutcome { report, model: Some(model_path), index: Some(index_path), run })
    };

    let ibc_train = {
        let n = training_images(&ds)?.len();
        let mode = CorrelationMode::TopM(cfg.top_m.unwrap_or_else(|| default_top_m(n)));
        (ibc_training(&ds, &db, mode)?, mode)
    };
    let ibc_params = IbcParams { bits: cfg.bits, ..cfg.ibc };
    let ibc = hashed(train_ibc_model(&ibc_train.0, ibc_params, ibc_train.1)?, "ibc")?;

    let d = ds.dim().expect("dataset has videos");
    let (c1, c2) = bbc_shape(cfg.bits, d)?;
    let bbc_params = BbcParams { c1, c2, mu: cfg.bbc_mu, iters: cfg.bbc_iters, seed: cfg.seed };
    let bbc = hashed(train_bbc_model(&bbc_training(&ds, &db, cfg.delta)?, bbc_params)?, "bbc")?;

    Ok(BenchmarkOutcome { exact, random, ibc, bbc })
}
