//! Dataset container, `.fvecs` / `.bvecs` / `.ivecs` file I/O and synthetic
//! Gaussian-mixture data.
//!
//! All three file formats are a bare sequence of records: a little-endian
//! `i32` dimension followed by that many components (`f32`, `u8` or `i32`).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `n` row-major vectors of dimension `d`. Every component is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorDataset<T> {
    n: usize,
    d: usize,
    data: Vec<T>,
}

impl<T: Scalar> VectorDataset<T> {
    /// Wraps a row-major buffer. `data.len()` must be a multiple of `d`.
    pub fn new(d: usize, data: Vec<T>) -> Result<Self> {
        if d == 0 {
            if data.is_empty() {
                return Ok(Self::empty());
            }
            return Err(Error::arg("dimension must be at least 1"));
        }
        if !data.len().is_multiple_of(d) {
            return Err(Error::arg(format!(
                "buffer of {} values is not a whole number of {d}-dimensional rows",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::arg(format!(
                "non-finite component in row {} column {}",
                pos / d,
                pos % d
            )));
        }
        Ok(Self {
            n: data.len() / d,
            d,
            data,
        })
    }

    /// The empty dataset (`n = 0`, `d = 0`).
    pub fn empty() -> Self {
        Self {
            n: 0,
            d: 0,
            data: Vec::new(),
        }
    }

    pub fn zeros(n: usize, d: usize) -> Self {
        Self {
            n: if d == 0 { 0 } else { n },
            d,
            data: vec![T::zero(); n * d],
        }
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Ok(Self::empty());
        };
        let d = first.as_ref().len();
        let mut data = Vec::with_capacity(rows.len() * d);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != d {
                return Err(Error::arg(format!(
                    "row {i} has dimension {}, expected {d}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(d, data)
    }

    /// Builds a dataset from `f64` values, narrowing to `T`.
    pub fn from_f64(d: usize, data: &[f64]) -> Result<Self> {
        Self::new(d, data.iter().map(|&v| T::from_acc(v)).collect())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        let d = self.d.max(1);
        let take = self.n;
        self.data.chunks_exact(d).take(take)
    }

    /// Copies the listed rows, in order, into a new dataset.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            if i >= self.n {
                return Err(Error::arg(format!(
                    "row index {i} out of range for {} rows",
                    self.n
                )));
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(Self {
            n: if self.d == 0 { 0 } else { indices.len() },
            d: self.d,
            data,
        })
    }

    /// Rows `[start, end)`.
    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Self> {
        if start > end || end > self.n {
            return Err(Error::arg(format!(
                "row range {start}..{end} out of bounds for {} rows",
                self.n
            )));
        }
        Ok(Self {
            n: end - start,
            d: self.d,
            data: self.data[start * self.d..end * self.d].to_vec(),
        })
    }

    pub fn cast<U: Scalar>(&self) -> VectorDataset<U> {
        VectorDataset {
            n: self.n,
            d: self.d,
            data: self.data.iter().map(|v| U::from_acc(v.to_acc())).collect(),
        }
    }

    /// Per-column mean, accumulated in `f64`.
    pub fn column_mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.d];
        for r in self.rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v.to_acc();
            }
        }
        if self.n > 0 {
            let inv = 1.0 / self.n as f64;
            mean.iter_mut().for_each(|m| *m *= inv);
        }
        mean
    }

    pub(crate) fn ensure_nonempty(&self, what: &str) -> Result<()> {
        if self.is_empty() {
            Err(Error::arg(format!("{what}: dataset is empty")))
        } else {
            Ok(())
        }
    }
}

/// Exact nearest neighbors of each query, nearest first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    neighbors: Vec<Vec<u32>>,
}

impl GroundTruth {
    /// Each list must be non-empty and duplicate-free.
    pub fn new(neighbors: Vec<Vec<u32>>) -> Result<Self> {
        for (q, list) in neighbors.iter().enumerate() {
            if list.is_empty() {
                return Err(Error::arg(format!("query {q} has an empty neighbor list")));
            }
            if has_duplicates(list) {
                return Err(Error::arg(format!("query {q} lists a neighbor twice")));
            }
        }
        Ok(Self { neighbors })
    }

    pub fn num_queries(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, q: usize) -> &[u32] {
        &self.neighbors[q]
    }

    pub fn nearest(&self, q: usize) -> u32 {
        self.neighbors[q][0]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> {
        self.neighbors.iter().map(|v| v.as_slice())
    }

    /// Checks every index against a database of `n_database` vectors.
    pub fn validate(&self, n_database: usize) -> Result<()> {
        for (q, list) in self.neighbors.iter().enumerate() {
            if let Some(&bad) = list.iter().find(|&&i| i as usize >= n_database) {
                return Err(Error::arg(format!(
                    "query {q}: neighbor {bad} outside database of {n_database} vectors"
                )));
            }
        }
        Ok(())
    }
}

fn has_duplicates(list: &[u32]) -> bool {
    let mut sorted = list.to_vec();
    sorted.sort_unstable();
    sorted.windows(2).any(|w| w[0] == w[1])
}

struct RecordReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> RecordReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    /// Reads the next record header and returns `(record_start, dim)`.
    fn next_dim(&mut self) -> Result<Option<(usize, usize)>> {
        if self.pos == self.bytes.len() {
            return Ok(None);
        }
        let start = self.pos;
        let header = self.take(4, start, "record header")?;
        let d = i32::from_le_bytes(header.try_into().unwrap());
        if d <= 0 {
            return Err(Error::format(
                start as u64,
                format!("record dimension {d} is not positive"),
            ));
        }
        Ok(Some((start, d as usize)))
    }

    fn take(&mut self, len: usize, record_start: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(Error::format(
                self.pos as u64,
                format!(
                    "truncated {what} (record starting at byte {record_start} needs {len} more bytes, {} available)",
                    self.bytes.len() - self.pos
                ),
            )),
        }
    }
}

/// Decodes records of `width`-byte components, enforcing one dimension.
fn decode_records<V>(
    bytes: &[u8],
    width: usize,
    mut decode: impl FnMut(&[u8], usize) -> Result<V>,
) -> Result<(usize, Vec<V>)> {
    let mut reader = RecordReader::new(bytes);
    let mut dim = 0usize;
    let mut out = Vec::new();
    while let Some((start, d)) = reader.next_dim()? {
        if dim == 0 {
            dim = d;
        } else if d != dim {
            return Err(Error::format(
                start as u64,
                format!("record dimension {d} differs from first record's {dim}"),
            ));
        }
        let payload = reader.take(d * width, start, "record payload")?;
        out.push(decode(payload, start)?);
    }
    Ok((dim, out))
}

pub fn parse_fvecs<T: Scalar>(bytes: &[u8]) -> Result<VectorDataset<T>> {
    let mut data = Vec::new();
    let (d, _) = decode_records(bytes, 4, |p, start| {
        for (j, c) in p.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(c.try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::format(
                    (start + 4 + 4 * j) as u64,
                    "non-finite component",
                ));
            }
            data.push(T::from_stored(v));
        }
        Ok(())
    })?;
    VectorDataset::new(d, data)
}

pub fn parse_bvecs<T: Scalar>(bytes: &[u8]) -> Result<VectorDataset<T>> {
    let mut data = Vec::new();
    let (d, _) = decode_records(bytes, 1, |p, _| {
        data.extend(p.iter().map(|&b| T::from_stored(b as f32)));
        Ok(())
    })?;
    VectorDataset::new(d, data)
}

pub fn parse_ivecs(bytes: &[u8]) -> Result<GroundTruth> {
    let (_, rows) = decode_records(bytes, 4, |p, start| {
        let mut row = Vec::with_capacity(p.len() / 4);
        for (j, c) in p.chunks_exact(4).enumerate() {
            let v = i32::from_le_bytes(c.try_into().unwrap());
            if v < 0 {
                return Err(Error::format(
                    (start + 4 + 4 * j) as u64,
                    format!("negative index {v}"),
                ));
            }
            row.push(v as u32);
        }
        if has_duplicates(&row) {
            return Err(Error::format(start as u64, "duplicate index in record"));
        }
        Ok(row)
    })?;
    Ok(GroundTruth { neighbors: rows })
}

pub fn read_fvecs<T: Scalar>(path: impl AsRef<Path>) -> Result<VectorDataset<T>> {
    parse_fvecs(&std::fs::read(path)?)
}

pub fn read_bvecs<T: Scalar>(path: impl AsRef<Path>) -> Result<VectorDataset<T>> {
    parse_bvecs(&std::fs::read(path)?)
}

pub fn read_ivecs(path: impl AsRef<Path>) -> Result<GroundTruth> {
    parse_ivecs(&std::fs::read(path)?)
}

fn dim_header(d: usize) -> Result<[u8; 4]> {
    i32::try_from(d)
        .map(i32::to_le_bytes)
        .map_err(|_| Error::arg(format!("dimension {d} does not fit the record header")))
}

pub fn write_fvecs_to<T: Scalar, W: Write>(dataset: &VectorDataset<T>, out: &mut W) -> Result<()> {
    let header = dim_header(dataset.dim())?;
    for row in dataset.rows() {
        out.write_all(&header)?;
        for v in row {
            out.write_all(&v.to_f32_lossy().to_le_bytes())?;
        }
    }
    Ok(())
}

/// Writes `dataset` as `.fvecs`. Components are stored as `f32`.
pub fn write_fvecs<T: Scalar>(dataset: &VectorDataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_fvecs_to(dataset, &mut out)?;
    out.flush()?;
    Ok(())
}

/// Writes `dataset` as `.bvecs`; every component must be an integer in `0..=255`.
pub fn write_bvecs<T: Scalar>(dataset: &VectorDataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let header = dim_header(dataset.dim())?;
    let mut bytes = Vec::with_capacity(dataset.len() * (4 + dataset.dim()));
    for row in dataset.rows() {
        bytes.extend_from_slice(&header);
        for v in row {
            let f = v.to_acc();
            if !(0.0..=255.0).contains(&f) || f.fract() != 0.0 {
                return Err(Error::arg(format!(
                    "component {f} is not representable as a byte"
                )));
            }
            bytes.push(f as u8);
        }
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn write_ivecs(gt: &GroundTruth, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for row in &gt.neighbors {
        out.write_all(&dim_header(row.len())?)?;
        for &i in row {
            let v = i32::try_from(i).map_err(|_| Error::arg(format!("index {i} exceeds i32")))?;
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Gaussian mixture with diagonal covariances.
///
/// Dimension `j` has a base scale that decays with `j`, so the data has a
/// skewed spectrum similar to image descriptors.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    pub d: usize,
    pub weights: Vec<f64>,
    /// `components × d` means.
    pub means: Vec<f64>,
    /// `components × d` standard deviations.
    pub stds: Vec<f64>,
}

impl GaussianMixture {
    /// Draws mixture parameters from `seed`.
    pub fn random(d: usize, n_components: usize, seed: u64) -> Result<Self> {
        if d == 0 || n_components == 0 {
            return Err(Error::arg("d and n_components must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale: Vec<f64> = (0..d).map(|j| (-1.5 * j as f64 / d as f64).exp()).collect();
        let raw: Vec<f64> = (0..n_components)
            .map(|_| rng.random_range(0.5..1.5))
            .collect();
        let total: f64 = raw.iter().sum();
        let weights = raw.iter().map(|w| w / total).collect();
        let mut means = Vec::with_capacity(n_components * d);
        let mut stds = Vec::with_capacity(n_components * d);
        for _ in 0..n_components {
            for s in &scale {
                let z: f64 = StandardNormal.sample(&mut rng);
                means.push(2.0 * s * z);
            }
            for s in &scale {
                stds.push(s * rng.random_range(0.3..0.8));
            }
        }
        Ok(Self {
            d,
            weights,
            means,
            stds,
        })
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    /// Exact per-dimension mean and variance of the mixture.
    pub fn moments(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.d;
        let mut mean = vec![0.0; d];
        let mut second = vec![0.0; d];
        for (c, w) in self.weights.iter().enumerate() {
            for j in 0..d {
                let mu = self.means[c * d + j];
                let sd = self.stds[c * d + j];
                mean[j] += w * mu;
                second[j] += w * (mu * mu + sd * sd);
            }
        }
        let var = mean.iter().zip(&second).map(|(m, s)| s - m * m).collect();
        (mean, var)
    }

    pub fn sample<T: Scalar>(&self, n: usize, rng: &mut impl Rng) -> Result<VectorDataset<T>> {
        let d = self.d;
        let mut cumulative = Vec::with_capacity(self.weights.len());
        let mut acc = 0.0;
        for w in &self.weights {
            acc += w;
            cumulative.push(acc);
        }
        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n {
            let u: f64 = rng.random::<f64>() * acc;
            let c = cumulative
                .iter()
                .position(|&cw| u < cw)
                .unwrap_or(cumulative.len() - 1);
            for j in 0..d {
                let z: f64 = StandardNormal.sample(rng);
                data.push(T::from_acc(
                    self.means[c * d + j] + self.stds[c * d + j] * z,
                ));
            }
        }
        VectorDataset::new(d, data)
    }
}

/// Samples `n` vectors from a random `n_components` Gaussian mixture.
/// A pure function of its arguments.
pub fn gen_synthetic<T: Scalar>(
    n: usize,
    d: usize,
    n_components: usize,
    seed: u64,
) -> Result<VectorDataset<T>> {
    if n == 0 {
        return Err(Error::arg("n must be at least 1"));
    }
    let mixture = GaussianMixture::random(d, n_components, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    mixture.sample(n, &mut rng)
}

/// Disjoint random index split of `dataset`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub database: Vec<usize>,
    pub queries: Vec<usize>,
}

pub fn split_indices(n: usize, n_train: usize, n_query: usize, seed: u64) -> Result<Split> {
    let needed = n_train
        .checked_add(n_query)
        .ok_or_else(|| Error::arg("split sizes overflow"))?;
    if needed > n {
        return Err(Error::arg(format!(
            "cannot take {n_train} training and {n_query} query vectors from {n}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let train = perm[..n_train].to_vec();
    let queries = perm[n_train..needed].to_vec();
    let database = perm[needed..].to_vec();
    Ok(Split {
        train,
        database,
        queries,
    })
}

/// Randomly splits `dataset` into `(train, database, queries)`. The database is
/// everything not picked for training or querying.
pub fn split_train_query<T: Scalar>(
    dataset: &VectorDataset<T>,
    n_train: usize,
    n_query: usize,
    seed: u64,
) -> Result<(VectorDataset<T>, VectorDataset<T>, VectorDataset<T>)> {
    let split = split_indices(dataset.len(), n_train, n_query, seed)?;
    Ok((
        dataset.select(&split.train)?,
        dataset.select(&split.database)?,
        dataset.select(&split.queries)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(d: i32, payload: &[u8]) -> Vec<u8> {
        let mut v = d.to_le_bytes().to_vec();
        v.extend_from_slice(payload);
        v
    }

    #[test]
    fn empty_file_is_empty_dataset() {
        let ds = parse_fvecs::<f32>(&[]).unwrap();
        assert_eq!(ds.len(), 0);
        assert_eq!(ds.dim(), 0);
    }

    #[test]
    fn single_fvecs_record() {
        let mut payload = 1.0f32.to_le_bytes().to_vec();
        payload.extend_from_slice(&2.0f32.to_le_bytes());
        let ds = parse_fvecs::<f32>(&record(2, &payload)).unwrap();
        assert_eq!((ds.len(), ds.dim()), (1, 2));
        assert_eq!(ds.as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn truncated_record_reports_offset() {
        let mut bytes = record(2, &[0; 8]);
        bytes.extend_from_slice(&record(2, &[0; 5]));
        match parse_fvecs::<f32>(&bytes) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 16),
            other => panic!("expected format error, got {other:?}"),
        }
        match parse_fvecs::<f32>(&[1, 0]) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_and_nonpositive_dim() {
        let mut bytes = record(1, &[0; 4]);
        bytes.extend_from_slice(&record(2, &[0; 8]));
        assert!(matches!(
            parse_fvecs::<f32>(&bytes),
            Err(Error::Format { offset: 8, .. })
        ));
        assert!(matches!(
            parse_fvecs::<f32>(&record(0, &[])),
            Err(Error::Format { offset: 0, .. })
        ));
        assert!(matches!(
            parse_fvecs::<f32>(&record(-3, &[])),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn ivecs_and_bvecs_decode() {
        let mut payload = Vec::new();
        for v in [5i32, 2, 9] {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        let gt = parse_ivecs(&record(3, &payload)).unwrap();
        assert_eq!(gt.neighbors(0), &[5, 2, 9]);

        let ds = parse_bvecs::<f32>(&record(2, &[0, 255])).unwrap();
        assert_eq!(ds.as_slice(), &[0.0, 255.0]);
    }

    #[test]
    fn ivecs_rejects_negative_and_duplicate() {
        let mut payload = Vec::new();
        for v in [1i32, -1] {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        assert!(parse_ivecs(&record(2, &payload)).is_err());
        let mut payload = Vec::new();
        for v in [4i32, 4] {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        assert!(parse_ivecs(&record(2, &payload)).is_err());
    }

    #[test]
    fn dataset_rejects_non_finite() {
        assert!(VectorDataset::new(2, vec![1.0f32, f32::NAN]).is_err());
        assert!(VectorDataset::new(2, vec![1.0f32, 2.0, 3.0]).is_err());
    }

    #[test]
    fn synthetic_is_deterministic_and_validates() {
        let a = gen_synthetic::<f32>(100, 8, 4, 7).unwrap();
        let b = gen_synthetic::<f32>(100, 8, 4, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, gen_synthetic::<f32>(100, 8, 4, 8).unwrap());
        assert!(gen_synthetic::<f32>(0, 8, 4, 7).is_err());
        assert!(gen_synthetic::<f32>(10, 0, 4, 7).is_err());
        assert!(gen_synthetic::<f32>(10, 8, 0, 7).is_err());
    }

    #[test]
    fn split_is_disjoint_and_deterministic() {
        let s = split_indices(50, 20, 5, 3).unwrap();
        assert_eq!(s, split_indices(50, 20, 5, 3).unwrap());
        let mut all: Vec<usize> = s
            .train
            .iter()
            .chain(&s.database)
            .chain(&s.queries)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
        assert_eq!(s.queries.len(), 5);
        assert!(split_indices(10, 8, 3, 0).is_err());
        assert!(split_indices(10, usize::MAX, 3, 0).is_err());
    }
}
