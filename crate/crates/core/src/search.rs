//! Asymmetric distance computation (ADC) scans, exact scans and recall@R.
//!
//! For a query `q` and a database vector encoded as `(i_1 … i_M)` with stored
//! cross term `t`,
//!
//! ```text
//! ‖q − Σ c_m(i_m)‖² = Σ_m ‖q − c_m(i_m)‖² − (M − 1)‖q‖² + t
//! ```
//!
//! The first sum is `M` lookups into [`AdcTables`]; the middle term is the same
//! for every database vector and is skipped while ranking.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;

use rayon::prelude::*;

use crate::codebook::{Codebook, EncodedDatabase};
use crate::error::{Error, Result};
use crate::numerics::{dist2, norm2};
use crate::scalar::Scalar;
use crate::vecio::{GroundTruth, VectorDataset};

/// `‖q − c_m(k)‖²` for every element, plus `‖q‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdcTables {
    m: usize,
    k: usize,
    table: Vec<f64>,
    query_norm2: f64,
}

impl AdcTables {
    #[inline]
    pub fn get(&self, m: usize, k: usize) -> f64 {
        self.table[m * self.k + k]
    }

    pub fn query_norm2(&self) -> f64 {
        self.query_norm2
    }

    /// `Σ_m table[m][i_m] + cross_term`, i.e. the ADC score without the
    /// constant `−(M−1)‖q‖²`.
    #[inline]
    fn ranking_score(&self, codes_row: &[u32], cross_term: f64) -> f64 {
        let mut s = cross_term;
        for (m, &c) in codes_row.iter().enumerate() {
            s += self.table[m * self.k + c as usize];
        }
        s
    }

    #[inline]
    fn constant(&self) -> f64 {
        -((self.m as f64) - 1.0) * self.query_norm2
    }
}

pub fn build_adc_tables<T: Scalar>(q: &[T], codebook: &Codebook<T>) -> Result<AdcTables> {
    if q.len() != codebook.dim() {
        return Err(Error::arg(format!(
            "query dimension {} does not match codebook dimension {}",
            q.len(),
            codebook.dim()
        )));
    }
    let (m, k) = (codebook.num_dictionaries(), codebook.dictionary_size());
    let table = (0..m)
        .flat_map(|mi| (0..k).map(move |j| (mi, j)))
        .map(|(mi, j)| dist2(q, codebook.element(mi, j)))
        .collect();
    Ok(AdcTables {
        m,
        k,
        table,
        query_norm2: norm2(q),
    })
}

/// Approximate squared distance from the query to the reconstruction of
/// `codes_row`.
pub fn adc_score(tables: &AdcTables, codes_row: &[u32], cross_term: f64) -> f64 {
    tables.ranking_score(codes_row, cross_term) + tables.constant()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: u32,
    pub score: f64,
}

/// Heap entry ordered by `(score, index)`; the heap top is the worst kept.
#[derive(Clone, Copy)]
struct Entry(f64, u32);

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Keeps the `r` smallest `(score, index)` pairs seen.
struct TopR {
    r: usize,
    heap: BinaryHeap<Entry>,
}

impl TopR {
    fn new(r: usize) -> Self {
        Self {
            r,
            heap: BinaryHeap::with_capacity(r + 1),
        }
    }

    #[inline]
    fn push(&mut self, score: f64, index: u32) {
        if self.r == 0 {
            return;
        }
        let e = Entry(score, index);
        if self.heap.len() < self.r {
            self.heap.push(e);
        } else if let Some(mut top) = self.heap.peek_mut() {
            if e < *top {
                *top = e;
            }
        }
    }

    fn into_sorted(self, offset: f64) -> Vec<Neighbor> {
        self.heap
            .into_sorted_vec()
            .into_iter()
            .map(|Entry(score, index)| Neighbor {
                index,
                score: score + offset,
            })
            .collect()
    }
}

fn check_db<T: Scalar>(db: &EncodedDatabase, codebook: &Codebook<T>) -> Result<()> {
    if db.codes.code_length() != codebook.num_dictionaries()
        || db.codes.dictionary_size() > codebook.dictionary_size()
    {
        return Err(Error::arg("encoded database does not match the codebook"));
    }
    if let Some(id) = db.codebook_id {
        if id != codebook.fingerprint() {
            return Err(Error::arg(
                "encoded database was produced with a different codebook",
            ));
        }
    }
    Ok(())
}

fn scan_with_tables(tables: &AdcTables, db: &EncodedDatabase, r: usize) -> Vec<Neighbor> {
    let mut top = TopR::new(r.min(db.len()));
    for (i, (row, &t)) in db.codes.rows().zip(&db.cross_terms).enumerate() {
        top.push(tables.ranking_score(row, t as f64), i as u32);
    }
    top.into_sorted(tables.constant())
}

/// Top-`r` database vectors under ADC, nearest first; ties go to the lower index.
pub fn adc_scan<T: Scalar>(
    q: &[T],
    db: &EncodedDatabase,
    codebook: &Codebook<T>,
    r: usize,
) -> Result<Vec<Neighbor>> {
    check_db(db, codebook)?;
    let tables = build_adc_tables(q, codebook)?;
    Ok(scan_with_tables(&tables, db, r))
}

/// Top-`r` database vectors by exact squared Euclidean distance.
pub fn exact_scan<T: Scalar>(
    q: &[T],
    database: &VectorDataset<T>,
    r: usize,
) -> Result<Vec<Neighbor>> {
    if !database.is_empty() && q.len() != database.dim() {
        return Err(Error::arg(format!(
            "query dimension {} does not match database dimension {}",
            q.len(),
            database.dim()
        )));
    }
    let mut top = TopR::new(r.min(database.len()));
    for (i, x) in database.rows().enumerate() {
        top.push(dist2(q, x), i as u32);
    }
    Ok(top.into_sorted(0.0))
}

/// Per-query ranked neighbor lists.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub per_query: Vec<Vec<Neighbor>>,
}

impl SearchResult {
    pub fn num_queries(&self) -> usize {
        self.per_query.len()
    }

    /// Ground truth made of each query's ranked indices.
    pub fn to_ground_truth(&self) -> Result<GroundTruth> {
        GroundTruth::new(
            self.per_query
                .iter()
                .map(|l| l.iter().map(|n| n.index).collect())
                .collect(),
        )
    }

    /// CSV with header `query_id,rank,db_index,score`; rank starts at 1.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "query_id,rank,db_index,score")?;
        for (q, list) in self.per_query.iter().enumerate() {
            for (rank, n) in list.iter().enumerate() {
                writeln!(out, "{q},{},{},{}", rank + 1, n.index, n.score)?;
            }
        }
        Ok(())
    }
}

/// [`adc_scan`] for every query, in parallel.
pub fn adc_search<T: Scalar>(
    queries: &VectorDataset<T>,
    db: &EncodedDatabase,
    codebook: &Codebook<T>,
    r: usize,
) -> Result<SearchResult> {
    check_db(db, codebook)?;
    let per_query = (0..queries.len())
        .into_par_iter()
        .map(|i| {
            let tables = build_adc_tables(queries.row(i), codebook)?;
            Ok(scan_with_tables(&tables, db, r))
        })
        .collect::<Result<_>>()?;
    Ok(SearchResult { per_query })
}

/// [`exact_scan`] for every query, in parallel.
pub fn exact_search<T: Scalar>(
    queries: &VectorDataset<T>,
    database: &VectorDataset<T>,
    r: usize,
) -> Result<SearchResult> {
    let per_query = (0..queries.len())
        .into_par_iter()
        .map(|i| exact_scan(queries.row(i), database, r))
        .collect::<Result<_>>()?;
    Ok(SearchResult { per_query })
}

/// Fraction of queries whose true nearest neighbor is among the first `r`
/// results.
pub fn recall_at_r(results: &SearchResult, ground_truth: &GroundTruth, r: usize) -> Result<f64> {
    if results.num_queries() != ground_truth.num_queries() {
        return Err(Error::arg(format!(
            "{} result lists but {} ground-truth queries",
            results.num_queries(),
            ground_truth.num_queries()
        )));
    }
    if results.num_queries() == 0 {
        return Err(Error::arg("recall over zero queries"));
    }
    let hits = results
        .per_query
        .iter()
        .enumerate()
        .filter(|(q, list)| {
            let nn = ground_truth.nearest(*q);
            list.iter().take(r).any(|n| n.index == nn)
        })
        .count();
    Ok(hits as f64 / results.num_queries() as f64)
}
