//! Codebook model, code matrices, cross-term tables and encoding diagnostics.
//!
//! A [`Codebook`] holds `M` dictionaries of `K` elements in a common
//! `d`-dimensional space. A vector is approximated by the sum of one element
//! from each dictionary; the chosen indices form one row of a [`CodeMatrix`].

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{dist2, dot, norm2};
use crate::scalar::Scalar;
use crate::vecio::VectorDataset;

const CODEBOOK_MAGIC: &[u8; 4] = b"AVQ1";
const ENCODED_MAGIC: &[u8; 4] = b"AVQE";

/// Whether dictionaries are arranged by descending total squared norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DictionaryOrder {
    Unsorted,
    NormDescending,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook<T> {
    m: usize,
    k: usize,
    d: usize,
    /// `M × K × d`, dictionary-major.
    elements: Vec<T>,
    order: DictionaryOrder,
}

impl<T: Scalar> Codebook<T> {
    pub fn new(m: usize, k: usize, d: usize, elements: Vec<T>) -> Result<Self> {
        if m == 0 || k == 0 || d == 0 {
            return Err(Error::arg(format!(
                "codebook shape M={m} K={k} d={d} must be positive"
            )));
        }
        if elements.len() != m * k * d {
            return Err(Error::arg(format!(
                "expected {} elements values, got {}",
                m * k * d,
                elements.len()
            )));
        }
        if elements.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("codebook contains non-finite values"));
        }
        let mut cb = Self {
            m,
            k,
            d,
            elements,
            order: DictionaryOrder::Unsorted,
        };
        cb.refresh_order();
        Ok(cb)
    }

    pub fn zeros(m: usize, k: usize, d: usize) -> Result<Self> {
        Self::new(m, k, d, vec![T::zero(); m * k * d])
    }

    /// Stacks dictionaries given as `K × d` datasets.
    pub fn from_dictionaries(dicts: &[VectorDataset<T>]) -> Result<Self> {
        let first = dicts
            .first()
            .ok_or_else(|| Error::arg("at least one dictionary is required"))?;
        let (k, d) = (first.len(), first.dim());
        let mut elements = Vec::with_capacity(dicts.len() * k * d);
        for (i, dict) in dicts.iter().enumerate() {
            if dict.len() != k || dict.dim() != d {
                return Err(Error::arg(format!(
                    "dictionary {i} is {}x{}, expected {k}x{d}",
                    dict.len(),
                    dict.dim()
                )));
            }
            elements.extend_from_slice(dict.as_slice());
        }
        Self::new(dicts.len(), k, d, elements)
    }

    #[inline]
    pub fn num_dictionaries(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn dictionary_size(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn order(&self) -> DictionaryOrder {
        self.order
    }

    pub fn as_slice(&self) -> &[T] {
        &self.elements
    }

    #[inline]
    pub fn element(&self, m: usize, j: usize) -> &[T] {
        let start = (m * self.k + j) * self.d;
        &self.elements[start..start + self.d]
    }

    /// The `K × d` block of dictionary `m`.
    pub fn dictionary(&self, m: usize) -> &[T] {
        let size = self.k * self.d;
        &self.elements[m * size..(m + 1) * size]
    }

    pub fn dictionary_dataset(&self, m: usize) -> VectorDataset<T> {
        VectorDataset::new(self.d, self.dictionary(m).to_vec()).expect("codebook values are finite")
    }

    pub fn set_dictionary(&mut self, m: usize, dict: &VectorDataset<T>) -> Result<()> {
        if m >= self.m {
            return Err(Error::arg(format!("dictionary {m} out of range")));
        }
        if dict.len() != self.k || dict.dim() != self.d {
            return Err(Error::arg(format!(
                "replacement dictionary is {}x{}, expected {}x{}",
                dict.len(),
                dict.dim(),
                self.k,
                self.d
            )));
        }
        let size = self.k * self.d;
        self.elements[m * size..(m + 1) * size].copy_from_slice(dict.as_slice());
        self.refresh_order();
        Ok(())
    }

    /// Appends a dictionary after the existing ones.
    pub fn push_dictionary(&mut self, dict: &VectorDataset<T>) -> Result<()> {
        if dict.len() != self.k || dict.dim() != self.d {
            return Err(Error::arg(format!(
                "new dictionary is {}x{}, expected {}x{}",
                dict.len(),
                dict.dim(),
                self.k,
                self.d
            )));
        }
        self.elements.extend_from_slice(dict.as_slice());
        self.m += 1;
        self.refresh_order();
        Ok(())
    }

    /// `Σ_j ‖c_m(j)‖²` for every dictionary.
    pub fn dictionary_norms(&self) -> Vec<f64> {
        (0..self.m).map(|m| norm2(self.dictionary(m))).collect()
    }

    fn refresh_order(&mut self) {
        let norms = self.dictionary_norms();
        self.order = if norms.windows(2).all(|w| w[0] >= w[1]) {
            DictionaryOrder::NormDescending
        } else {
            DictionaryOrder::Unsorted
        };
    }

    /// Reorders dictionaries by descending total squared norm (stable) and
    /// returns the permutation: new position `i` holds old dictionary `perm[i]`.
    pub fn sort_by_norm(&mut self) -> Vec<usize> {
        let norms = self.dictionary_norms();
        let mut perm: Vec<usize> = (0..self.m).collect();
        perm.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
        let size = self.k * self.d;
        let mut elements = Vec::with_capacity(self.elements.len());
        for &p in &perm {
            elements.extend_from_slice(&self.elements[p * size..(p + 1) * size]);
        }
        self.elements = elements;
        self.order = DictionaryOrder::NormDescending;
        perm
    }

    pub fn cast<U: Scalar>(&self) -> Codebook<U> {
        Codebook {
            m: self.m,
            k: self.k,
            d: self.d,
            elements: self
                .elements
                .iter()
                .map(|v| U::from_acc(v.to_acc()))
                .collect(),
            order: self.order,
        }
    }

    /// Adds the selected elements into `out` in `f64`.
    pub(crate) fn reconstruct_into(&self, codes: &[u32], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (m, &c) in codes.iter().enumerate() {
            for (o, v) in out.iter_mut().zip(self.element(m, c as usize)) {
                *o += v.to_acc();
            }
        }
    }

    pub(crate) fn check_codes(&self, codes: &[u32]) -> Result<()> {
        if codes.len() != self.m {
            return Err(Error::arg(format!(
                "code length {} does not match M = {}",
                codes.len(),
                self.m
            )));
        }
        if let Some((m, c)) = codes
            .iter()
            .enumerate()
            .find(|(_, &c)| c as usize >= self.k)
        {
            return Err(Error::arg(format!(
                "code {c} for dictionary {m} is out of range (K = {})",
                self.k
            )));
        }
        Ok(())
    }

    /// Serializes as `AVQ1`, `u32` M, K, d, then `M·K·d` `f32` values.
    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        out.write_all(CODEBOOK_MAGIC)?;
        for v in [self.m, self.k, self.d] {
            out.write_all(&u32_field(v)?.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.elements.len() * 4);
        for v in &self.elements {
            buf.extend_from_slice(&v.to_f32_lossy().to_le_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(input: &mut R) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor::new(bytes);
        cur.expect_magic(CODEBOOK_MAGIC)?;
        let m = cur.u32()? as usize;
        let k = cur.u32()? as usize;
        let d = cur.u32()? as usize;
        if m == 0 || k == 0 || d == 0 {
            return Err(Error::format(4, format!("invalid shape M={m} K={k} d={d}")));
        }
        let count = m
            .checked_mul(k)
            .and_then(|v| v.checked_mul(d))
            .ok_or_else(|| Error::format(4, "shape overflows"))?;
        let mut elements = Vec::with_capacity(count);
        for _ in 0..count {
            let offset = cur.pos;
            let v = cur.f32()?;
            if !v.is_finite() {
                return Err(Error::format(offset as u64, "non-finite element value"));
            }
            elements.push(T::from_stored(v));
        }
        cur.expect_end()?;
        Self::new(m, k, d, elements)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// FNV-1a hash of the serialized codebook.
    pub fn fingerprint(&self) -> u64 {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("in-memory write");
        fnv1a(&buf)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

fn u32_field(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::arg(format!("{v} does not fit in a u32 header field")))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < len {
            return Err(Error::format(
                self.pos as u64,
                format!(
                    "truncated: need {len} bytes, {} left",
                    self.bytes.len() - self.pos
                ),
            ));
        }
        let out = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    fn expect_magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != magic {
            return Err(Error::format(
                0,
                format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(got),
                    String::from_utf8_lossy(magic)
                ),
            ));
        }
        Ok(())
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn expect_end(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::format(
                self.pos as u64,
                format!("{} trailing bytes", self.bytes.len() - self.pos),
            ));
        }
        Ok(())
    }
}

/// `n × M` element indices, each below `K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeMatrix {
    n: usize,
    m: usize,
    k: usize,
    codes: Vec<u32>,
}

impl CodeMatrix {
    pub fn new(n: usize, m: usize, k: usize, codes: Vec<u32>) -> Result<Self> {
        if m == 0 || k == 0 {
            return Err(Error::arg("code matrix needs M >= 1 and K >= 1"));
        }
        if codes.len() != n * m {
            return Err(Error::arg(format!(
                "expected {} codes, got {}",
                n * m,
                codes.len()
            )));
        }
        if let Some(bad) = codes.iter().find(|&&c| c as usize >= k) {
            return Err(Error::arg(format!("code {bad} out of range for K = {k}")));
        }
        Ok(Self { n, m, k, codes })
    }

    pub fn from_rows(m: usize, k: usize, rows: &[Vec<u32>]) -> Result<Self> {
        let mut codes = Vec::with_capacity(rows.len() * m);
        for r in rows {
            if r.len() != m {
                return Err(Error::arg(format!(
                    "code row of length {}, expected {m}",
                    r.len()
                )));
            }
            codes.extend_from_slice(r);
        }
        Self::new(rows.len(), m, k, codes)
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
    pub fn code_length(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn dictionary_size(&self) -> usize {
        self.k
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.codes
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u32] {
        &self.codes[i * self.m..(i + 1) * self.m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> {
        self.codes.chunks_exact(self.m)
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = u32> + '_ {
        self.rows().map(move |r| r[j])
    }

    /// Column `i` of the result is column `perm[i]` of `self`.
    pub fn permute_columns(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.m {
            return Err(Error::arg("permutation length does not match M"));
        }
        let codes = self
            .rows()
            .flat_map(|r| perm.iter().map(move |&p| r[p]))
            .collect();
        Ok(Self { codes, ..*self })
    }

    pub fn set_column(&mut self, j: usize, values: &[u32]) -> Result<()> {
        if values.len() != self.n || j >= self.m {
            return Err(Error::arg("column replacement has the wrong shape"));
        }
        if values.iter().any(|&v| v as usize >= self.k) {
            return Err(Error::arg("column replacement has out-of-range codes"));
        }
        for (r, &v) in self.codes.chunks_exact_mut(self.m).zip(values) {
            r[j] = v;
        }
        Ok(())
    }

    /// Appends one column of codes.
    pub fn push_column(&self, values: &[u32]) -> Result<Self> {
        if values.len() != self.n {
            return Err(Error::arg("new column has the wrong length"));
        }
        if values.iter().any(|&v| v as usize >= self.k) {
            return Err(Error::arg("new column has out-of-range codes"));
        }
        let m = self.m + 1;
        let mut codes = Vec::with_capacity(self.n * m);
        for (r, &v) in self.rows().zip(values) {
            codes.extend_from_slice(r);
            codes.push(v);
        }
        Ok(Self { m, codes, ..*self })
    }
}

/// Inner products `<c_a(i), c_b(j)>` between elements of different
/// dictionaries, plus the squared norm of every element.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossTermTable {
    m: usize,
    k: usize,
    norms: Vec<f64>,
    /// Blocks for `a < b`, each `K × K` indexed `[i][j]`.
    blocks: Vec<f64>,
}

impl CrossTermTable {
    #[inline]
    fn block_offset(&self, a: usize, b: usize) -> usize {
        debug_assert!(a < b);
        let pair = a * self.m - a * (a + 1) / 2 + (b - a - 1);
        pair * self.k * self.k
    }

    pub fn num_dictionaries(&self) -> usize {
        self.m
    }

    pub fn dictionary_size(&self) -> usize {
        self.k
    }

    /// `<c_a(i), c_b(j)>`; for `a == b` only `i == j` (the squared norm) is stored.
    #[inline]
    pub fn get(&self, a: usize, i: usize, b: usize, j: usize) -> f64 {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => self.blocks[self.block_offset(a, b) + i * self.k + j],
            std::cmp::Ordering::Greater => self.blocks[self.block_offset(b, a) + j * self.k + i],
            std::cmp::Ordering::Equal => {
                assert_eq!(i, j, "same-dictionary inner products are not tabulated");
                self.norms[a * self.k + i]
            }
        }
    }

    #[inline]
    pub fn norm2(&self, m: usize, i: usize) -> f64 {
        self.norms[m * self.k + i]
    }

    /// Row `i` of block `(a, b)` with `a < b`: `<c_a(i), c_b(·)>`.
    #[inline]
    pub(crate) fn block_row(&self, a: usize, i: usize, b: usize) -> &[f64] {
        let start = self.block_offset(a, b) + i * self.k;
        &self.blocks[start..start + self.k]
    }
}

pub fn build_cross_terms<T: Scalar>(codebook: &Codebook<T>) -> CrossTermTable {
    let (m, k) = (codebook.m, codebook.k);
    let norms = (0..m)
        .flat_map(|a| (0..k).map(move |i| (a, i)))
        .map(|(a, i)| norm2(codebook.element(a, i)))
        .collect();
    let pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|a| (a + 1..m).map(move |b| (a, b)))
        .collect();
    let mut blocks = vec![0.0; pairs.len() * k * k];
    if k > 0 && !pairs.is_empty() {
        blocks
            .par_chunks_mut(k * k)
            .zip(pairs.par_iter())
            .for_each(|(block, &(a, b))| {
                for i in 0..k {
                    let ci = codebook.element(a, i);
                    for j in 0..k {
                        block[i * k + j] = dot(ci, codebook.element(b, j));
                    }
                }
            });
    }
    CrossTermTable {
        m,
        k,
        norms,
        blocks,
    }
}

/// `Σ_{a≠b} <c_a(i_a), c_b(i_b)>`, the correction that turns per-dictionary
/// distances into the distance to the reconstruction.
pub fn cross_term_of(codes_row: &[u32], table: &CrossTermTable) -> f64 {
    let mut sum = 0.0;
    for a in 0..codes_row.len() {
        for b in a + 1..codes_row.len() {
            sum += table.get(a, codes_row[a] as usize, b, codes_row[b] as usize);
        }
    }
    2.0 * sum
}

/// Code matrix plus one stored cross term per vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDatabase {
    pub codes: CodeMatrix,
    pub cross_terms: Vec<f32>,
    /// [`Codebook::fingerprint`] of the codebook used; not persisted.
    pub codebook_id: Option<u64>,
}

impl EncodedDatabase {
    pub fn new(
        codes: CodeMatrix,
        table: &CrossTermTable,
        codebook_id: Option<u64>,
    ) -> Result<Self> {
        if codes.code_length() != table.m || codes.dictionary_size() != table.k {
            return Err(Error::arg("codes and cross-term table disagree on M or K"));
        }
        let cross_terms = (0..codes.len())
            .into_par_iter()
            .map(|i| cross_term_of(codes.row(i), table) as f32)
            .collect();
        Ok(Self {
            codes,
            cross_terms,
            codebook_id,
        })
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// Serializes as `AVQE`, `u32` n, M, K, `n·M` code bytes, `n` `f32` cross terms.
    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        let c = &self.codes;
        if c.k > 256 {
            return Err(Error::arg(format!(
                "K = {} does not fit one-byte codes",
                c.k
            )));
        }
        out.write_all(ENCODED_MAGIC)?;
        for v in [c.n, c.m, c.k] {
            out.write_all(&u32_field(v)?.to_le_bytes())?;
        }
        let bytes: Vec<u8> = c.codes.iter().map(|&v| v as u8).collect();
        out.write_all(&bytes)?;
        let mut buf = Vec::with_capacity(self.cross_terms.len() * 4);
        for v in &self.cross_terms {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor::new(bytes);
        cur.expect_magic(ENCODED_MAGIC)?;
        let n = cur.u32()? as usize;
        let m = cur.u32()? as usize;
        let k = cur.u32()? as usize;
        if m == 0 || k == 0 || k > 256 {
            return Err(Error::format(4, format!("invalid shape M={m} K={k}")));
        }
        let code_bytes = cur.take(
            n.checked_mul(m)
                .ok_or_else(|| Error::format(4, "overflow"))?,
        )?;
        if let Some(pos) = code_bytes.iter().position(|&b| b as usize >= k) {
            return Err(Error::format(
                (16 + pos) as u64,
                format!("code {} out of range for K = {k}", code_bytes[pos]),
            ));
        }
        let codes = code_bytes.iter().map(|&b| b as u32).collect();
        let mut cross_terms = Vec::with_capacity(n);
        for _ in 0..n {
            cross_terms.push(cur.f32()?);
        }
        cur.expect_end()?;
        Ok(Self {
            codes: CodeMatrix::new(n, m, k, codes)?,
            cross_terms,
            codebook_id: None,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// `Σ_m c_m(i_m)`.
pub fn reconstruct<T: Scalar>(codebook: &Codebook<T>, codes_row: &[u32]) -> Result<Vec<T>> {
    codebook.check_codes(codes_row)?;
    let mut acc = vec![0.0; codebook.d];
    codebook.reconstruct_into(codes_row, &mut acc);
    Ok(acc.into_iter().map(T::from_acc).collect())
}

fn check_shapes<T: Scalar>(
    dataset: &VectorDataset<T>,
    codebook: &Codebook<T>,
    codes: &CodeMatrix,
) -> Result<()> {
    if dataset.len() != codes.len() {
        return Err(Error::arg(format!(
            "{} vectors but {} code rows",
            dataset.len(),
            codes.len()
        )));
    }
    if !dataset.is_empty() && dataset.dim() != codebook.d {
        return Err(Error::arg(format!(
            "dataset dimension {} does not match codebook dimension {}",
            dataset.dim(),
            codebook.d
        )));
    }
    if codes.m != codebook.m || codes.k > codebook.k {
        return Err(Error::arg(format!(
            "codes are for M={} K={}, codebook has M={} K={}",
            codes.m, codes.k, codebook.m, codebook.k
        )));
    }
    Ok(())
}

/// Squared residual norm of every vector.
pub(crate) fn residual_norms<T: Scalar>(
    dataset: &VectorDataset<T>,
    codebook: &Codebook<T>,
    codes: &CodeMatrix,
) -> Vec<f64> {
    (0..dataset.len())
        .into_par_iter()
        .map_init(
            || vec![0.0; codebook.d],
            |buf, i| {
                codebook.reconstruct_into(codes.row(i), buf);
                dist2(dataset.row(i), buf.as_slice())
            },
        )
        .collect()
}

/// Mean over vectors of `‖x − Σ_m c_m(i_m(x))‖²`.
pub fn quantization_error<T: Scalar>(
    dataset: &VectorDataset<T>,
    codebook: &Codebook<T>,
    codes: &CodeMatrix,
) -> Result<f64> {
    check_shapes(dataset, codebook, codes)?;
    dataset.ensure_nonempty("quantization error")?;
    let norms = residual_norms(dataset, codebook, codes);
    Ok(norms.iter().sum::<f64>() / norms.len() as f64)
}

/// Row-wise residual vectors `e_x = x − reconstruct(codes(x))`.
pub fn residuals<T: Scalar>(
    dataset: &VectorDataset<T>,
    codebook: &Codebook<T>,
    codes: &CodeMatrix,
) -> Result<VectorDataset<T>> {
    check_shapes(dataset, codebook, codes)?;
    let d = dataset.dim();
    let mut out = vec![T::zero(); dataset.len() * d];
    if d > 0 {
        out.par_chunks_mut(d).enumerate().for_each_init(
            || vec![0.0; d],
            |buf, (i, o)| {
                codebook.reconstruct_into(codes.row(i), buf);
                for ((dst, x), r) in o.iter_mut().zip(dataset.row(i)).zip(buf.iter()) {
                    *dst = T::from_acc(x.to_acc() - r);
                }
            },
        );
    }
    VectorDataset::new(d, out)
}

fn histogram(codes: &CodeMatrix, m: usize) -> Vec<usize> {
    let mut counts = vec![0usize; codes.k];
    for c in codes.column(m) {
        counts[c as usize] += 1;
    }
    counts
}

fn plogp_sum(counts: impl Iterator<Item = usize>, n: usize) -> f64 {
    let n = n as f64;
    -counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            p * p.log2()
        })
        .sum::<f64>()
}

/// Shannon entropy in bits of the code distribution of dictionary `m`.
pub fn entropy(codes: &CodeMatrix, m: usize) -> Result<f64> {
    if codes.is_empty() {
        return Err(Error::arg("entropy of an empty code matrix"));
    }
    if m >= codes.m {
        return Err(Error::arg(format!("dictionary {m} out of range")));
    }
    Ok(plogp_sum(histogram(codes, m).into_iter(), codes.n).max(0.0))
}

/// Plug-in mutual information in bits between the codes of dictionaries `i`
/// and `j`.
pub fn mutual_information(codes: &CodeMatrix, i: usize, j: usize) -> Result<f64> {
    if i == j {
        return Err(Error::arg(
            "mutual information of a dictionary with itself; use entropy()",
        ));
    }
    if codes.is_empty() {
        return Err(Error::arg("mutual information of an empty code matrix"));
    }
    if i >= codes.m || j >= codes.m {
        return Err(Error::arg("dictionary index out of range"));
    }
    let k = codes.k;
    let mut joint = vec![0usize; k * k];
    for r in codes.rows() {
        joint[r[i] as usize * k + r[j] as usize] += 1;
    }
    let pi = histogram(codes, i);
    let pj = histogram(codes, j);
    let n = codes.n as f64;
    let mut mi = 0.0;
    for a in 0..k {
        for b in 0..k {
            let c = joint[a * k + b];
            if c == 0 {
                continue;
            }
            let pab = c as f64 / n;
            mi += pab * (pab * n * n / (pi[a] as f64 * pj[b] as f64)).log2();
        }
    }
    Ok(mi.max(0.0))
}

/// Sorts dictionaries by descending norm and permutes code columns to match.
pub fn sort_by_norm<T: Scalar>(
    codebook: &Codebook<T>,
    codes: &CodeMatrix,
) -> Result<(Codebook<T>, CodeMatrix)> {
    if codes.m != codebook.m {
        return Err(Error::arg("code length does not match M"));
    }
    let mut sorted = codebook.clone();
    let perm = sorted.sort_by_norm();
    let codes = codes.permute_columns(&perm)?;
    Ok((sorted, codes))
}
