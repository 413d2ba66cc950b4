//! Datasets: MNIST in the IDX format, minibatch plans and synthetic fixtures.

use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netcore::Target;
use crate::rng::{stream, stream_rng};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Transform applied to raw inputs when the dataset was built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    None,
    /// Pixels divided by 255.
    UnitInterval,
}

/// Labelled samples with equal-length inputs, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    dim: usize,
    n_classes: usize,
    inputs: Vec<f64>,
    labels: Vec<usize>,
    normalization: Normalization,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        n_classes: usize,
        inputs: Vec<f64>,
        labels: Vec<usize>,
        normalization: Normalization,
    ) -> Result<Self> {
        if dim == 0 || labels.is_empty() {
            return Err(Error::Consistency("dataset must be non-empty".into()));
        }
        if inputs.len() != dim * labels.len() {
            return Err(Error::Consistency(format!(
                "{} input values for {} samples of dimension {dim}",
                inputs.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::Consistency(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        Ok(Self {
            name: name.into(),
            dim,
            n_classes,
            inputs,
            labels,
            normalization,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sample(&self, i: usize) -> (&[f64], usize) {
        (self.input(i), self.labels[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], usize)> + '_ {
        self.inputs.chunks_exact(self.dim).zip(self.labels.iter().copied())
    }

    /// `(input, class target)` pairs, the shape expected by loss evaluators.
    pub fn targets(&self) -> impl Iterator<Item = (&[f64], Target<'static>)> + '_ {
        self.iter().map(|(x, y)| (x, Target::Class(y)))
    }

    /// The first `n` samples (or all of them when `n >= len`).
    pub fn head(&self, n: usize) -> Dataset {
        let n = n.min(self.len()).max(1);
        self.select(&(0..n).collect::<Vec<_>>())
    }

    /// A dataset made of the given sample indices, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut inputs = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            inputs.extend_from_slice(self.input(i));
        }
        Dataset {
            name: self.name.clone(),
            dim: self.dim,
            n_classes: self.n_classes,
            inputs,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            normalization: self.normalization,
        }
    }

    /// Encodes the inputs as an IDX image file with the given geometry.
    ///
    /// Values are mapped back to bytes by undoing the normalization and
    /// rounding, so a dataset loaded from IDX re-encodes bit-exactly.
    pub fn to_idx_images(&self, rows: usize, cols: usize) -> Result<Vec<u8>> {
        if rows * cols != self.dim {
            return Err(Error::Consistency(format!(
                "{rows}x{cols} images do not hold {} values",
                self.dim
            )));
        }
        let scale = match self.normalization {
            Normalization::UnitInterval => 255.0,
            Normalization::None => 1.0,
        };
        let mut out = Vec::with_capacity(16 + self.inputs.len());
        out.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
        out.extend_from_slice(&(self.len() as u32).to_be_bytes());
        out.extend_from_slice(&(rows as u32).to_be_bytes());
        out.extend_from_slice(&(cols as u32).to_be_bytes());
        out.extend(self.inputs.iter().map(|v| (v * scale).round().clamp(0.0, 255.0) as u8));
        Ok(out)
    }

    pub fn to_idx_labels(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.len());
        out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
        out.extend_from_slice(&(self.len() as u32).to_be_bytes());
        out.extend(self.labels.iter().map(|&l| l as u8));
        out
    }
}

/// Raw contents of an IDX image file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn truncated(what: &str) -> Error {
    Error::Io(io::Error::new(
        io::ErrorKind::UnexpectedEof,
        format!("truncated IDX {what}"),
    ))
}

fn be_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| truncated(what))
}

fn check_magic(bytes: &[u8], expected: u32, what: &str) -> Result<()> {
    let magic = be_u32(bytes, 0, what)?;
    if magic != expected {
        return Err(Error::Format(format!(
            "{what}: magic number {magic:#010x}, expected {expected:#010x}"
        )));
    }
    Ok(())
}

/// Parses an (uncompressed) IDX3 unsigned-byte image file.
pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    check_magic(bytes, IDX_IMAGES_MAGIC, "image file")?;
    let count = be_u32(bytes, 4, "image header")? as usize;
    let rows = be_u32(bytes, 8, "image header")? as usize;
    let cols = be_u32(bytes, 12, "image header")? as usize;
    let len = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::Format("image dimensions overflow".into()))?;
    let body = &bytes[16..];
    if body.len() < len {
        return Err(truncated("image data"));
    }
    if body.len() > len {
        return Err(Error::Consistency(format!(
            "{} trailing bytes after image data",
            body.len() - len
        )));
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: body.to_vec(),
    })
}

/// Parses an (uncompressed) IDX1 unsigned-byte label file.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(bytes, IDX_LABELS_MAGIC, "label file")?;
    let count = be_u32(bytes, 4, "label header")? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(truncated("label data"));
    }
    if body.len() > count {
        return Err(Error::Consistency(format!(
            "{} trailing bytes after label data",
            body.len() - count
        )));
    }
    Ok(body.to_vec())
}

/// Decompresses gzip input (detected by magic bytes); passes anything else through.
pub fn maybe_gunzip(bytes: Vec<u8>) -> Result<Vec<u8>> {
    if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        flate2::read::GzDecoder::new(bytes.as_slice()).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(bytes)
    }
}

/// Builds a dataset from raw IDX image and label bytes (gzip accepted).
pub fn decode_mnist(images: &[u8], labels: &[u8], name: &str) -> Result<Dataset> {
    let images = parse_idx_images(&maybe_gunzip(images.to_vec())?)?;
    let labels = parse_idx_labels(&maybe_gunzip(labels.to_vec())?)?;
    if images.count != labels.len() {
        return Err(Error::Consistency(format!(
            "{} images but {} labels",
            images.count,
            labels.len()
        )));
    }
    let n_classes = 10;
    let inputs = images.pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    Dataset::new(
        name,
        images.rows * images.cols,
        n_classes,
        inputs,
        labels.into_iter().map(usize::from).collect(),
        Normalization::UnitInterval,
    )
}

pub fn load_mnist_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let images_path = images_path.as_ref();
    let name = images_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "mnist".into());
    decode_mnist(&fs::read(images_path)?, &fs::read(labels_path.as_ref())?, &name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn stems(self) -> (&'static str, &'static str) {
        match self {
            Split::Train => ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
            Split::Test => ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
        }
    }

    /// Standard MNIST file names for this split.
    pub fn file_names(self) -> [&'static str; 2] {
        let (a, b) = self.stems();
        [a, b]
    }
}

fn find_file(dir: &Path, stem: &str) -> Result<PathBuf> {
    for candidate in [stem.to_string(), format!("{stem}.gz"), stem.replace("-idx", ".idx")] {
        let p = dir.join(&candidate);
        if p.is_file() {
            return Ok(p);
        }
    }
    Err(Error::Io(io::Error::new(
        io::ErrorKind::NotFound,
        format!("{stem}[.gz] not found in {}", dir.display()),
    )))
}

/// Loads one MNIST split from a directory holding the standard file names,
/// plain or gzip-compressed.
pub fn load_mnist_dir(dir: impl AsRef<Path>, split: Split) -> Result<Dataset> {
    let dir = dir.as_ref();
    let (img, lab) = split.stems();
    let mut ds = load_mnist_idx(find_file(dir, img)?, find_file(dir, lab)?)?;
    ds.name = format!("mnist-{}", if split == Split::Train { "train" } else { "test" });
    Ok(ds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchOrder {
    Sequential,
    ShuffledPerEpoch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchPlan {
    pub batch_size: usize,
    pub rng_seed: u64,
    pub order: BatchOrder,
}

impl BatchPlan {
    pub fn validate(&self, dataset_len: usize) -> Result<()> {
        if self.batch_size == 0 || self.batch_size > dataset_len {
            return Err(Error::InvalidArgument(format!(
                "batch size {} must be in 1..={dataset_len}",
                self.batch_size
            )));
        }
        Ok(())
    }
}

/// Permutation of `0..n` used during `epoch`.
pub fn epoch_permutation(n: usize, seed: u64, epoch: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut stream_rng(seed, stream::BATCH, epoch));
    perm
}

/// Sample indices of minibatch `step`.
///
/// Step `s` covers stream positions `s*B .. (s+1)*B`; position `p` falls in
/// epoch `p / n` and picks slot `p % n` of that epoch's order. A batch may
/// therefore straddle two epochs.
pub fn next_batch(n: usize, plan: &BatchPlan, step: u64) -> Result<Vec<usize>> {
    plan.validate(n)?;
    let mut batcher = Batcher::new(n, *plan);
    Ok(batcher.batch(step).to_vec())
}

/// Stateful batch generator that caches the current epoch permutation.
/// Output is identical to [`next_batch`] for every step.
#[derive(Debug, Clone)]
pub struct Batcher {
    n: usize,
    plan: BatchPlan,
    cached: Option<(u64, Vec<usize>)>,
    out: Vec<usize>,
}

impl Batcher {
    pub fn new(n: usize, plan: BatchPlan) -> Self {
        Self {
            n,
            plan,
            cached: None,
            out: Vec::with_capacity(plan.batch_size),
        }
    }

    pub fn batch(&mut self, step: u64) -> &[usize] {
        self.out.clear();
        let n = self.n as u64;
        let start = step * self.plan.batch_size as u64;
        for p in start..start + self.plan.batch_size as u64 {
            let (epoch, slot) = (p / n, (p % n) as usize);
            let idx = match self.plan.order {
                BatchOrder::Sequential => slot,
                BatchOrder::ShuffledPerEpoch => {
                    if self.cached.as_ref().map(|c| c.0) != Some(epoch) {
                        self.cached = Some((epoch, epoch_permutation(self.n, self.plan.rng_seed, epoch)));
                    }
                    self.cached.as_ref().expect("cached permutation").1[slot]
                }
            };
            self.out.push(idx);
        }
        &self.out
    }
}

/// Synthetic data whose coordinate 1 duplicates coordinate 0 exactly.
///
/// Coordinates are uniform in `[-1, 1]`; labels come from a random hyperplane
/// fixed by the seed.
pub fn synthetic_duplicate_dataset(dim: usize, n: usize, seed: u64) -> Result<Dataset> {
    if dim < 2 || n < dim {
        return Err(Error::InvalidArgument(format!(
            "need dim >= 2 and n >= dim (got dim {dim}, n {n})"
        )));
    }
    let mut rng = stream_rng(seed, stream::SYNTHETIC, 0);
    let normal: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    let offset = rng.random::<f64>() * 0.2 - 0.1;
    let mut inputs = Vec::with_capacity(dim * n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let start = inputs.len();
        for _ in 0..dim {
            inputs.push(rng.random::<f64>() * 2.0 - 1.0);
        }
        inputs[start + 1] = inputs[start];
        let s: f64 = inputs[start..].iter().zip(&normal).map(|(x, w)| x * w).sum();
        labels.push(usize::from(s + offset > 0.0));
    }
    Dataset::new(
        format!("synthetic-duplicate-{dim}-{n}-{seed}"),
        dim,
        2,
        inputs,
        labels,
        Normalization::None,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn idx_fixture() -> (Vec<u8>, Vec<u8>) {
        let mut img = vec![0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2];
        img.extend_from_slice(&[0, 255, 51, 102, 1, 2, 3, 254]);
        let lab = vec![0, 0, 8, 1, 0, 0, 0, 2, 7, 3];
        (img, lab)
    }

    #[test]
    fn hand_built_fixture_decodes_exactly() {
        let (img, lab) = idx_fixture();
        let ds = decode_mnist(&img, &lab, "fx").unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.dim(), 4);
        assert_eq!(ds.input(0), &[0.0, 1.0, 0.2, 0.4]);
        assert_eq!(ds.input(1), &[1.0 / 255.0, 2.0 / 255.0, 3.0 / 255.0, 254.0 / 255.0]);
        assert_eq!(ds.labels(), &[7, 3]);
    }

    #[test]
    fn swapped_files_are_a_format_error() {
        let (img, lab) = idx_fixture();
        assert!(matches!(parse_idx_labels(&img), Err(Error::Format(_))));
        assert!(matches!(decode_mnist(&lab, &img, "x"), Err(Error::Format(_))));
    }

    #[test]
    fn count_mismatch_is_a_consistency_error() {
        let (img, _) = idx_fixture();
        let lab = vec![0, 0, 8, 1, 0, 0, 0, 1, 7];
        assert!(matches!(decode_mnist(&img, &lab, "x"), Err(Error::Consistency(_))));
    }

    #[test]
    fn truncation_is_an_io_error() {
        let (img, lab) = idx_fixture();
        for cut in [2, 10, img.len() - 1] {
            match parse_idx_images(&img[..cut]) {
                Err(Error::Io(e)) => assert_eq!(e.kind(), io::ErrorKind::UnexpectedEof),
                other => panic!("cut {cut}: {other:?}"),
            }
        }
        assert!(matches!(parse_idx_labels(&lab[..9]), Err(Error::Io(_))));
    }

    #[test]
    fn gzip_input_is_accepted() {
        use flate2::write::GzEncoder;
        use std::io::Write;
        let (img, lab) = idx_fixture();
        let mut enc = GzEncoder::new(Vec::new(), flate2::Compression::default());
        enc.write_all(&img).unwrap();
        let gz = enc.finish().unwrap();
        assert_eq!(
            decode_mnist(&gz, &lab, "a").unwrap(),
            decode_mnist(&img, &lab, "a").unwrap()
        );
    }

    #[test]
    fn idx_re_encoding_is_bit_exact() {
        let (img, lab) = idx_fixture();
        let ds = decode_mnist(&img, &lab, "fx").unwrap();
        assert_eq!(ds.to_idx_images(2, 2).unwrap(), img);
        assert_eq!(ds.to_idx_labels(), lab);
    }

    #[test]
    fn sequential_batches() {
        let plan = BatchPlan {
            batch_size: 2,
            rng_seed: 0,
            order: BatchOrder::Sequential,
        };
        assert_eq!(next_batch(4, &plan, 1).unwrap(), vec![2, 3]);
        assert_eq!(next_batch(4, &plan, 2).unwrap(), vec![0, 1]);
        assert!(next_batch(1, &plan, 0).is_err());
    }

    #[test]
    fn shuffled_epoch_covers_each_sample_once() {
        let plan = BatchPlan {
            batch_size: 5,
            rng_seed: 42,
            order: BatchOrder::ShuffledPerEpoch,
        };
        let mut seen = [0usize; 20];
        for step in 0..4 {
            for i in next_batch(20, &plan, step).unwrap() {
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert_eq!(next_batch(20, &plan, 3).unwrap(), next_batch(20, &plan, 3).unwrap());
        // the next epoch uses a different order
        assert_ne!(next_batch(20, &plan, 0).unwrap(), next_batch(20, &plan, 4).unwrap());
    }

    #[test]
    fn batcher_matches_pure_function() {
        let plan = BatchPlan {
            batch_size: 7,
            rng_seed: 3,
            order: BatchOrder::ShuffledPerEpoch,
        };
        let mut b = Batcher::new(30, plan);
        for step in [0, 1, 5, 4, 9, 2] {
            assert_eq!(b.batch(step), next_batch(30, &plan, step).unwrap().as_slice());
        }
    }

    #[test]
    fn synthetic_duplicates_column_zero() {
        let ds = synthetic_duplicate_dataset(4, 50, 1).unwrap();
        for (x, _) in ds.iter() {
            assert_eq!(x[0].to_bits(), x[1].to_bits());
            assert!(x.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
        assert_eq!(ds, synthetic_duplicate_dataset(4, 50, 1).unwrap());
        assert_ne!(ds, synthetic_duplicate_dataset(4, 50, 2).unwrap());
        assert!(synthetic_duplicate_dataset(1, 50, 1).is_err());
        assert!(synthetic_duplicate_dataset(4, 3, 1).is_err());
    }
}
