//! On-disk formats.
//!
//! All binary formats are little-endian. Every file starts with a four-byte
//! magic and a version byte.
//!
//! Matrix file (`BSCM`):
//!
//! ```text
//! "BSCM" | version u8 = 1 | dtype u8 = 1 (f64) | rows u64 | cols u64 | rows*cols f64, column-major
//! ```
//!
//! Model file (`BSCH`):
//!
//! ```text
//! "BSCH" | version u8 = 1 | kind u8 (1 = IBC, 2 = BBC) | d u64 | body
//! IBC body: bits u64 | lambda f64 | outer_iters u64 | inner_iters u64 | seed u64
//!           | correlation u8 (0 = raw, 1 = top-m) | m u64 | P matrix | Q matrix
//! BBC body: c1 u64 | c2 u64 | mu f64 | iters u64 | seed u64
//!           | P1 | P2 | Q1 | Q2 | video mean | image mean
//! ```
//!
//! Embedded matrices use the full matrix-file encoding.
//!
//! Index file (`BSCI`):
//!
//! ```text
//! "BSCI" | version u8 = 1 | kind u8 | bits u64 | count u64
//!        | count x (id_len u32 | id utf-8 | ceil(bits/64) x u64 words)
//! ```
//!
//! Subspace database file (`BSCD`):
//!
//! ```text
//! "BSCD" | version u8 = 1 | d u64 | count u64 | count x (id_len u32 | id utf-8 | basis matrix)
//! ```
//!
//! Text formats are tab-separated with `#` comment lines. A manifest lists
//! `video <id> <path> <category>` and
//! `image <id> <path> <category> <source-video|-> <train|query>` rows, with
//! paths relative to the manifest's directory. A run file has the header
//! `query_id rank video_id score` and one row per retrieved video.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use crate::bbc::{BbcModel, BbcParams};
use crate::error::{Error, Result};
use crate::hamming::{BinaryIndex, PackedCode};
use crate::ibc::{CorrelationMode, IbcModel, IbcParams};
use crate::subspace::{Hit, SubspaceEntry};
use crate::synth::Split;

const MATRIX_MAGIC: &[u8; 4] = b"BSCM";
const MODEL_MAGIC: &[u8; 4] = b"BSCH";
const INDEX_MAGIC: &[u8; 4] = b"BSCI";
const DATABASE_MAGIC: &[u8; 4] = b"BSCD";
const VERSION: u8 = 1;
const DTYPE_F64: u8 = 1;

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::format(path, "path has no file name"))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

struct Writer(Vec<u8>);

impl Writer {
    fn new(magic: &[u8; 4]) -> Self {
        let mut buf = magic.to_vec();
        buf.push(VERSION);
        Self(buf)
    }

    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }

    fn matrix(&mut self, m: &DMatrix<f64>) {
        self.0.extend_from_slice(MATRIX_MAGIC);
        self.u8(VERSION);
        self.u8(DTYPE_F64);
        self.usize(m.nrows());
        self.usize(m.ncols());
        for x in m.iter() {
            self.f64(*x);
        }
    }
}

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn open(path: &'a Path, bytes: &'a [u8], magic: &[u8; 4]) -> Result<Self> {
        let mut r = Self { path, bytes, pos: 0 };
        r.header(magic)?;
        Ok(r)
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::format(self.path, message))
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        let found = self.take(4)?;
        if found != magic {
            return self.fail(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(found),
                String::from_utf8_lossy(magic)
            ));
        }
        let version = self.u8()?;
        if version != VERSION {
            return self.fail(format!("unsupported version {version}"));
        }
        Ok(())
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        match self.pos.checked_add(n) {
            Some(end) if end <= self.bytes.len() => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            _ => self.fail(format!("truncated at byte {}", self.pos)),
        }
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        match usize::try_from(v) {
            Ok(v) => Ok(v),
            Err(_) => self.fail(format!("value {v} does not fit in memory")),
        }
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn str(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let raw = self.take(len)?;
        match std::str::from_utf8(raw) {
            Ok(s) => Ok(s.to_string()),
            Err(_) => self.fail("identifier is not valid utf-8"),
        }
    }

    fn matrix(&mut self) -> Result<DMatrix<f64>> {
        self.header(MATRIX_MAGIC)?;
        let dtype = self.u8()?;
        if dtype != DTYPE_F64 {
            return self.fail(format!("unsupported dtype code {dtype}"));
        }
        let rows = self.usize()?;
        let cols = self.usize()?;
        let count = match rows.checked_mul(cols).filter(|c| c.checked_mul(8).is_some()) {
            Some(c) => c,
            None => return self.fail(format!("matrix shape {rows}x{cols} overflows")),
        };
        if self.bytes.len() - self.pos < count * 8 {
            return self.fail(format!(
                "payload holds {} bytes, expected {} for {rows}x{cols}",
                self.bytes.len() - self.pos,
                count * 8
            ));
        }
        let payload = self.take(count * 8)?;
        let values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")));
        Ok(DMatrix::from_iterator(rows, cols, values))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return self.fail(format!("{} trailing bytes", self.bytes.len() - self.pos));
        }
        Ok(())
    }
}

pub fn encode_matrix(m: &DMatrix<f64>) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.matrix(m);
    w.0
}

/// Decodes a matrix file; `path` is only used in error messages.
pub fn decode_matrix(path: &Path, bytes: &[u8]) -> Result<DMatrix<f64>> {
    let mut r = Reader { path, bytes, pos: 0 };
    let m = r.matrix()?;
    r.finish()?;
    Ok(m)
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    write_atomic(path, &encode_matrix(m))
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    decode_matrix(path, &read_bytes(path)?)
}

/// Reads a vector stored as a `d x 1` (or `1 x d`) matrix file.
pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    let m = read_matrix(path)?;
    if m.ncols() == 1 {
        Ok(m.column(0).into_owned())
    } else if m.nrows() == 1 {
        Ok(m.row(0).transpose())
    } else {
        Err(Error::format(path, format!("expected a vector, found a {}x{} matrix", m.nrows(), m.ncols())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Ibc,
    Bbc,
}

impl ModelKind {
    fn tag(self) -> u8 {
        match self {
            ModelKind::Ibc => 1,
            ModelKind::Bbc => 2,
        }
    }

    fn from_tag(path: &Path, tag: u8) -> Result<Self> {
        match tag {
            1 => Ok(ModelKind::Ibc),
            2 => Ok(ModelKind::Bbc),
            other => Err(Error::format(path, format!("unknown model kind {other}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ibc => "ibc",
            ModelKind::Bbc => "bbc",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelFile {
    Ibc { model: IbcModel, correlation: CorrelationMode },
    Bbc(BbcModel),
}

impl ModelFile {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelFile::Ibc { .. } => ModelKind::Ibc,
            ModelFile::Bbc(_) => ModelKind::Bbc,
        }
    }

    pub fn d(&self) -> usize {
        match self {
            ModelFile::Ibc { model, .. } => model.d,
            ModelFile::Bbc(m) => m.d,
        }
    }

    pub fn bits(&self) -> usize {
        match self {
            ModelFile::Ibc { model, .. } => model.bits(),
            ModelFile::Bbc(m) => m.bits(),
        }
    }

    pub fn encode_video(&self, s: &SubspaceEntry) -> Result<PackedCode> {
        match self {
            ModelFile::Ibc { model, .. } => Ok(model.encode_video(s)?.pack()),
            ModelFile::Bbc(m) => Ok(m.encode_video(s)?.flatten().pack()),
        }
    }

    pub fn encode_image(&self, q: &DVector<f64>) -> Result<PackedCode> {
        match self {
            ModelFile::Ibc { model, .. } => Ok(model.encode_image(q)?.pack()),
            ModelFile::Bbc(m) => Ok(m.encode_image(q)?.flatten().pack()),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(MODEL_MAGIC);
        w.u8(self.kind().tag());
        w.usize(self.d());
        match self {
            ModelFile::Ibc { model, correlation } => {
                let p = &model.params;
                w.usize(p.bits);
                w.f64(p.lambda);
                w.usize(p.outer_iters);
                w.usize(p.inner_iters);
                w.u64(p.seed);
                match correlation {
                    CorrelationMode::Raw => {
                        w.u8(0);
                        w.u64(0);
                    }
                    CorrelationMode::TopM(m) => {
                        w.u8(1);
                        w.usize(*m);
                    }
                }
                w.matrix(&model.p);
                w.matrix(&model.q);
            }
            ModelFile::Bbc(m) => {
                let p = &m.params;
                w.usize(p.c1);
                w.usize(p.c2);
                w.f64(p.mu);
                w.usize(p.iters);
                w.u64(p.seed);
                for mat in [&m.p1, &m.p2, &m.q1, &m.q2, &m.center_v, &m.center_u] {
                    w.matrix(mat);
                }
            }
        }
        w.0
    }

    pub fn from_bytes(path: &Path, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::open(path, bytes, MODEL_MAGIC)?;
        let kind = ModelKind::from_tag(path, r.u8()?)?;
        let d = r.usize()?;
        let shape = |r: &Reader, m: &DMatrix<f64>, rows: usize, cols: usize, what: &str| {
            if m.shape() != (rows, cols) {
                r.fail(format!("{what} is {}x{}, expected {rows}x{cols}", m.nrows(), m.ncols()))
            } else {
                Ok(())
            }
        };
        let out = match kind {
            ModelKind::Ibc => {
                let params = IbcParams {
                    bits: r.usize()?,
                    lambda: r.f64()?,
                    outer_iters: r.usize()?,
                    inner_iters: r.usize()?,
                    seed: r.u64()?,
                };
                let correlation = match (r.u8()?, r.usize()?) {
                    (0, _) => CorrelationMode::Raw,
                    (1, m) => CorrelationMode::TopM(m),
                    (tag, _) => return r.fail(format!("unknown correlation mode {tag}")),
                };
                let p = r.matrix()?;
                let q = r.matrix()?;
                shape(&r, &p, d * d, params.bits, "P")?;
                shape(&r, &q, d * d, params.bits, "Q")?;
                ModelFile::Ibc { model: IbcModel { d, p, q, params }, correlation }
            }
            ModelKind::Bbc => {
                let params = BbcParams {
                    c1: r.usize()?,
                    c2: r.usize()?,
                    mu: r.f64()?,
                    iters: r.usize()?,
                    seed: r.u64()?,
                };
                let mut mats = Vec::with_capacity(6);
                for _ in 0..6 {
                    mats.push(r.matrix()?);
                }
                let expected = [
                    (params.c1, "P1"),
                    (params.c2, "P2"),
                    (params.c1, "Q1"),
                    (params.c2, "Q2"),
                    (d, "video mean"),
                    (d, "image mean"),
                ];
                for (m, (cols, what)) in mats.iter().zip(expected) {
                    shape(&r, m, d, cols, what)?;
                }
                let mut it = mats.into_iter();
                let mut next = || it.next().expect("six matrices");
                ModelFile::Bbc(BbcModel {
                    d,
                    p1: next(),
                    p2: next(),
                    q1: next(),
                    q2: next(),
                    center_v: next(),
                    center_u: next(),
                    params,
                })
            }
        };
        r.finish()?;
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(path, &read_bytes(path)?)
    }
}

/// A binary index tagged with the kind of model that produced its codes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexFile {
    pub kind: ModelKind,
    pub index: BinaryIndex,
}

impl IndexFile {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(INDEX_MAGIC);
        w.u8(self.kind.tag());
        w.usize(self.index.bits());
        w.usize(self.index.len());
        for (id, code) in self.index.iter() {
            w.str(id);
            for &word in code.words() {
                w.u64(word);
            }
        }
        w.0
    }

    pub fn from_bytes(path: &Path, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::open(path, bytes, INDEX_MAGIC)?;
        let kind = ModelKind::from_tag(path, r.u8()?)?;
        let bits = r.usize()?;
        let count = r.usize()?;
        let words = bits.div_ceil(64);
        let mut index = BinaryIndex::new(bits);
        let mut seen = HashSet::new();
        for _ in 0..count {
            let id = r.str()?;
            if !seen.insert(id.clone()) {
                return r.fail(format!("duplicate id {id}"));
            }
            let ws = (0..words).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
            let code = PackedCode::from_words(ws, bits).map_err(|e| Error::format(path, e.to_string()))?;
            index.push(id, code)?;
        }
        r.finish()?;
        Ok(Self { kind, index })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(path, &read_bytes(path)?)
    }
}

/// Subspace database written by `build`. Projectors are recomputed on load.
pub fn encode_database(entries: &[SubspaceEntry]) -> Vec<u8> {
    let mut w = Writer::new(DATABASE_MAGIC);
    w.usize(entries.first().map_or(0, SubspaceEntry::dim));
    w.usize(entries.len());
    for e in entries {
        w.str(e.video_id());
        w.matrix(e.basis());
    }
    w.0
}

pub fn decode_database(path: &Path, bytes: &[u8]) -> Result<Vec<SubspaceEntry>> {
    let mut r = Reader::open(path, bytes, DATABASE_MAGIC)?;
    let d = r.usize()?;
    let count = r.usize()?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for _ in 0..count {
        let id = r.str()?;
        if !seen.insert(id.clone()) {
            return r.fail(format!("duplicate id {id}"));
        }
        let basis = r.matrix()?;
        if basis.nrows() != d || basis.ncols() == 0 || basis.ncols() > d {
            return r.fail(format!("basis of {id} is {}x{}, expected {d} rows", basis.nrows(), basis.ncols()));
        }
        if basis.iter().any(|x| !x.is_finite()) {
            return r.fail(format!("basis of {id} has non-finite entries"));
        }
        if crate::linalg::orthonormality_residual(&basis) > 1e-8 {
            return r.fail(format!("basis of {id} is not orthonormal"));
        }
        out.push(SubspaceEntry::from_orthonormal_basis(id, basis));
    }
    r.finish()?;
    Ok(out)
}

pub fn write_database(path: &Path, entries: &[SubspaceEntry]) -> Result<()> {
    write_atomic(path, &encode_database(entries))
}

pub fn read_database(path: &Path) -> Result<Vec<SubspaceEntry>> {
    decode_database(path, &read_bytes(path)?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VideoRecord {
    pub id: String,
    pub path: PathBuf,
    pub category: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRecord {
    pub id: String,
    pub path: PathBuf,
    pub category: String,
    pub source: Option<String>,
    pub split: Split,
}

/// Dataset listing. Paths are stored as written and resolved against `root`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub root: PathBuf,
    pub videos: Vec<VideoRecord>,
    pub images: Vec<ImageRecord>,
}

impl Manifest {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# kind\tid\tpath\tcategory\tsource\tsplit\n");
        for v in &self.videos {
            out.push_str(&format!("video\t{}\t{}\t{}\n", v.id, v.path.display(), v.category));
        }
        for i in &self.images {
            out.push_str(&format!(
                "image\t{}\t{}\t{}\t{}\t{}\n",
                i.id,
                i.path.display(),
                i.category,
                i.source.as_deref().unwrap_or("-"),
                i.split.as_str()
            ));
        }
        out
    }

    /// Parses manifest text; `path` names the file in error messages and its
    /// directory becomes `root`.
    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut m = Manifest { root, ..Default::default() };
        let mut video_ids = HashSet::new();
        let mut image_ids = HashSet::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let at = |msg: String| Error::format(path, format!("line {}: {msg}", lineno + 1));
            let fields: Vec<&str> = line.split('\t').collect();
            match fields.as_slice() {
                ["video", id, p, category] => {
                    if !video_ids.insert(id.to_string()) {
                        return Err(at(format!("duplicate video id {id}")));
                    }
                    m.videos.push(VideoRecord { id: id.to_string(), path: PathBuf::from(p), category: category.to_string() });
                }
                ["image", id, p, category, source, split] => {
                    if !image_ids.insert(id.to_string()) {
                        return Err(at(format!("duplicate image id {id}")));
                    }
                    let split = split.parse().map_err(at)?;
                    let source = (*source != "-").then(|| source.to_string());
                    m.images.push(ImageRecord {
                        id: id.to_string(),
                        path: PathBuf::from(p),
                        category: category.to_string(),
                        source,
                        split,
                    });
                }
                _ => return Err(at(format!("expected a video row with 4 fields or an image row with 6, found {:?}", line))),
            }
        }
        for i in &m.images {
            if let Some(src) = &i.source {
                if !video_ids.contains(src) {
                    return Err(Error::format(path, format!("image {} names unknown source video {src}", i.id)));
                }
            }
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m = Self::parse(path, &text)?;
        for p in m.videos.iter().map(|v| &v.path).chain(m.images.iter().map(|i| &i.path)) {
            let full = m.resolve(p);
            if !full.is_file() {
                return Err(Error::format(path, format!("referenced file {} does not exist", full.display())));
            }
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }
}

/// Ranked results per query, in the order queries were issued.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Run {
    pub queries: Vec<(String, Vec<Hit<f64>>)>,
}

const RUN_HEADER: &str = "query_id\trank\tvideo_id\tscore";

impl Run {
    pub fn to_text(&self) -> String {
        let mut out = format!("{RUN_HEADER}\n");
        for (qid, hits) in &self.queries {
            for (rank, h) in hits.iter().enumerate() {
                out.push_str(&format!("{qid}\t{}\t{}\t{}\n", rank + 1, h.video_id, h.score));
            }
        }
        out
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some((_, h)) if h.trim_end_matches('\r') == RUN_HEADER => {}
            _ => return Err(Error::format(path, format!("missing header {RUN_HEADER:?}"))),
        }
        let mut run = Run::default();
        for (lineno, line) in lines {
            let at = |msg: String| Error::format(path, format!("line {}: {msg}", lineno + 1));
            let fields: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
            let [qid, rank, vid, score] = fields.as_slice() else {
                return Err(at(format!("expected 4 fields, found {}", fields.len())));
            };
            let rank: usize = rank.parse().map_err(|_| at(format!("bad rank {rank:?}")))?;
            let score: f64 = score.parse().map_err(|_| at(format!("bad score {score:?}")))?;
            let fresh = run.queries.last().is_none_or(|(q, _)| q != qid);
            if fresh {
                if run.queries.iter().any(|(q, _)| q == qid) {
                    return Err(at(format!("rows for query {qid} are not contiguous")));
                }
                run.queries.push((qid.to_string(), Vec::new()));
            }
            let hits = &mut run.queries.last_mut().expect("pushed").1;
            if rank != hits.len() + 1 {
                return Err(at(format!("rank {rank} out of sequence for query {qid}")));
            }
            hits.push(Hit { video_id: vid.to_string(), score });
        }
        Ok(run)
    }

    /// Query id to ranked video ids.
    pub fn rankings(&self) -> BTreeMap<String, Vec<String>> {
        self.queries
            .iter()
            .map(|(q, hits)| (q.clone(), hits.iter().map(|h| h.video_id.clone()).collect()))
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(path, &text)
    }
}
