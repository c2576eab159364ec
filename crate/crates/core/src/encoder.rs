//! Encoding vectors against a fixed codebook.
//!
//! [`BeamSearch`] is the main encoder. Dictionaries are visited in descending
//! norm order and the `L` best partial codes are carried from stage to stage.
//! Extending a partial reconstruction `a` by element `c` is scored with
//!
//! ```text
//! ‖x − a − c‖² = ‖x − a‖² + ‖x − c‖² − ‖x‖² + 2⟨c, a⟩
//! ```
//!
//! where `‖x − c‖²` is computed once per element and `⟨c, a⟩` is a sum of
//! lookups into the [`CrossTermTable`].

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::codebook::{
    build_cross_terms, CodeMatrix, Codebook, CrossTermTable, DictionaryOrder, EncodedDatabase,
};
use crate::error::{Error, Result};
use crate::numerics::{dist2, norm2};
use crate::scalar::Scalar;
use crate::vecio::VectorDataset;

/// Largest search space [`exhaustive_encode`] accepts.
pub const EXHAUSTIVE_LIMIT: usize = 1 << 20;

/// A partial code kept in the beam.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamCandidate {
    /// Codes for the dictionaries visited so far.
    pub prefix: Vec<u32>,
    /// `‖x − Σ_{j<len} c_j(prefix_j)‖²` tracked through the recurrence.
    pub approx_sq_err: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodeMethod {
    /// Stage-wise nearest element on the running residual.
    Greedy,
    Beam {
        width: usize,
    },
    /// Iterated conditional modes from the greedy codes.
    Icm {
        rounds: usize,
    },
    /// Brute force over all `K^M` codes; tiny codebooks only.
    Exhaustive,
    /// Independent nearest element per subspace; product codebooks only.
    Product,
}

impl EncodeMethod {
    fn validate<T: Scalar>(&self, codebook: &Codebook<T>) -> Result<()> {
        match *self {
            EncodeMethod::Beam { width } => {
                if width == 0 {
                    return Err(Error::arg("beam width must be at least 1"));
                }
                if codebook.order() != DictionaryOrder::NormDescending {
                    return Err(Error::Contract(
                        "beam search needs dictionaries sorted by descending norm".into(),
                    ));
                }
            }
            EncodeMethod::Icm { rounds: 0 } => {
                return Err(Error::arg("ICM needs at least one round"));
            }
            EncodeMethod::Exhaustive => {
                exhaustive_guard(codebook)?;
            }
            EncodeMethod::Product if !is_product_layout(codebook) => {
                return Err(Error::Contract(
                    "codebook is not a product codebook (dictionaries overlap)".into(),
                ));
            }
            _ => {}
        }
        Ok(())
    }
}

fn check_dim<T: Scalar>(x: &[T], codebook: &Codebook<T>) -> Result<()> {
    if x.len() != codebook.dim() {
        return Err(Error::arg(format!(
            "vector dimension {} does not match codebook dimension {}",
            x.len(),
            codebook.dim()
        )));
    }
    Ok(())
}

fn check_table<T: Scalar>(codebook: &Codebook<T>, table: &CrossTermTable) -> Result<()> {
    if table.num_dictionaries() != codebook.num_dictionaries()
        || table.dictionary_size() != codebook.dictionary_size()
    {
        return Err(Error::arg(
            "cross-term table does not belong to this codebook",
        ));
    }
    Ok(())
}

/// `‖x − c_m(k)‖²` for every element, `M × K`.
fn element_distances<T: Scalar>(x: &[T], codebook: &Codebook<T>) -> Vec<f64> {
    let (m, k) = (codebook.num_dictionaries(), codebook.dictionary_size());
    let mut out = Vec::with_capacity(m * k);
    for mi in 0..m {
        for ki in 0..k {
            out.push(dist2(x, codebook.element(mi, ki)));
        }
    }
    out
}

/// Beam search over a norm-sorted codebook.
#[derive(Debug, Clone, Copy)]
pub struct BeamSearch<'a, T> {
    codebook: &'a Codebook<T>,
    table: &'a CrossTermTable,
    width: usize,
}

#[derive(Clone, Copy)]
struct Expansion {
    score: f64,
    parent: u32,
    code: u32,
}

impl<'a, T: Scalar> BeamSearch<'a, T> {
    pub fn new(codebook: &'a Codebook<T>, table: &'a CrossTermTable, width: usize) -> Result<Self> {
        EncodeMethod::Beam { width }.validate(codebook)?;
        check_table(codebook, table)?;
        Ok(Self {
            codebook,
            table,
            width,
        })
    }

    pub fn encode(&self, x: &[T]) -> Result<Vec<u32>> {
        check_dim(x, self.codebook)?;
        Ok(self.run(x, None))
    }

    /// Encodes `x` and also returns the beam retained after every stage.
    pub fn encode_traced(&self, x: &[T]) -> Result<(Vec<u32>, Vec<Vec<BeamCandidate>>)> {
        check_dim(x, self.codebook)?;
        let mut trace = Vec::with_capacity(self.codebook.num_dictionaries());
        let codes = self.run(x, Some(&mut trace));
        Ok((codes, trace))
    }

    fn run(&self, x: &[T], mut trace: Option<&mut Vec<Vec<BeamCandidate>>>) -> Vec<u32> {
        let cb = self.codebook;
        let (m_total, k) = (cb.num_dictionaries(), cb.dictionary_size());
        let x_norm = norm2(x);
        let dx = element_distances(x, cb);

        // Beam entries: (score, prefix). Prefixes of stage m have length m.
        let mut scores = vec![x_norm];
        let mut prefixes: Vec<Vec<u32>> = vec![Vec::new()];
        let mut pool: Vec<Expansion> = Vec::with_capacity(self.width * k);
        let mut inner = vec![0.0f64; k];

        for m in 0..m_total {
            pool.clear();
            let dist_row = &dx[m * k..(m + 1) * k];
            for (l, prefix) in prefixes.iter().enumerate() {
                inner.iter_mut().for_each(|v| *v = 0.0);
                for (j, &code) in prefix.iter().enumerate() {
                    let row = self.table.block_row(j, code as usize, m);
                    inner.iter_mut().zip(row).for_each(|(v, r)| *v += r);
                }
                let base = scores[l] - x_norm;
                for (ki, (dist, ip)) in dist_row.iter().zip(&inner).enumerate() {
                    pool.push(Expansion {
                        score: base + dist + 2.0 * ip,
                        parent: l as u32,
                        code: ki as u32,
                    });
                }
            }

            let cmp = |a: &Expansion, b: &Expansion| -> Ordering {
                a.score.total_cmp(&b.score).then_with(|| {
                    prefixes[a.parent as usize]
                        .cmp(&prefixes[b.parent as usize])
                        .then(a.code.cmp(&b.code))
                })
            };
            let keep = self.width.min(pool.len());
            if keep < pool.len() {
                pool.select_nth_unstable_by(keep - 1, cmp);
                pool.truncate(keep);
            }
            pool.sort_unstable_by(cmp);

            let next_prefixes: Vec<Vec<u32>> = pool
                .iter()
                .map(|e| {
                    let mut p = Vec::with_capacity(m + 1);
                    p.extend_from_slice(&prefixes[e.parent as usize]);
                    p.push(e.code);
                    p
                })
                .collect();
            scores.clear();
            scores.extend(pool.iter().map(|e| e.score));
            prefixes = next_prefixes;

            if let Some(t) = trace.as_deref_mut() {
                t.push(
                    prefixes
                        .iter()
                        .zip(&scores)
                        .map(|(p, &s)| BeamCandidate {
                            prefix: p.clone(),
                            approx_sq_err: s,
                        })
                        .collect(),
                );
            }
        }
        prefixes.swap_remove(0)
    }
}

/// Beam-search encoding of one vector with beam width `width`.
pub fn beam_encode<T: Scalar>(
    x: &[T],
    codebook: &Codebook<T>,
    cross_terms: &CrossTermTable,
    width: usize,
) -> Result<Vec<u32>> {
    BeamSearch::new(codebook, cross_terms, width)?.encode(x)
}

/// Classic residual encoding: at each stage take the element nearest to the
/// current residual.
pub fn greedy_encode<T: Scalar>(x: &[T], codebook: &Codebook<T>) -> Result<Vec<u32>> {
    check_dim(x, codebook)?;
    Ok(greedy_unchecked(x, codebook))
}

fn greedy_unchecked<T: Scalar>(x: &[T], codebook: &Codebook<T>) -> Vec<u32> {
    let mut residual: Vec<f64> = x.iter().map(|v| v.to_acc()).collect();
    let mut codes = Vec::with_capacity(codebook.num_dictionaries());
    for m in 0..codebook.num_dictionaries() {
        let mut best = (0usize, f64::INFINITY);
        for j in 0..codebook.dictionary_size() {
            let d = dist2(residual.as_slice(), codebook.element(m, j));
            if d < best.1 {
                best = (j, d);
            }
        }
        for (r, c) in residual.iter_mut().zip(codebook.element(m, best.0)) {
            *r -= c.to_acc();
        }
        codes.push(best.0 as u32);
    }
    codes
}

/// Iterated conditional modes: starting from the greedy codes, repeatedly
/// re-picks each code with the others held fixed, until a full round makes no
/// change or `rounds` rounds have run.
pub fn icm_encode<T: Scalar>(
    x: &[T],
    codebook: &Codebook<T>,
    cross_terms: &CrossTermTable,
    rounds: usize,
) -> Result<Vec<u32>> {
    EncodeMethod::Icm { rounds }.validate(codebook)?;
    check_dim(x, codebook)?;
    check_table(codebook, cross_terms)?;
    Ok(icm_unchecked(x, codebook, cross_terms, rounds))
}

fn icm_unchecked<T: Scalar>(
    x: &[T],
    codebook: &Codebook<T>,
    table: &CrossTermTable,
    rounds: usize,
) -> Vec<u32> {
    let (m_total, k) = (codebook.num_dictionaries(), codebook.dictionary_size());
    let dx = element_distances(x, codebook);
    let mut codes = greedy_unchecked(x, codebook);
    // Objective of code `c` in dictionary `m`, others fixed, up to a constant.
    let local = |codes: &[u32], m: usize, c: usize| -> f64 {
        let cross: f64 = (0..m_total)
            .filter(|&j| j != m)
            .map(|j| table.get(j, codes[j] as usize, m, c))
            .sum();
        dx[m * k + c] + 2.0 * cross
    };
    for _ in 0..rounds {
        let mut changed = false;
        for m in 0..m_total {
            let current = local(&codes, m, codes[m] as usize);
            let mut best = (codes[m] as usize, current);
            for c in 0..k {
                let v = local(&codes, m, c);
                if v < best.1 {
                    best = (c, v);
                }
            }
            if best.1 < current {
                codes[m] = best.0 as u32;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    codes
}

fn exhaustive_guard<T: Scalar>(codebook: &Codebook<T>) -> Result<usize> {
    let m = u32::try_from(codebook.num_dictionaries()).unwrap_or(u32::MAX);
    match codebook.dictionary_size().checked_pow(m) {
        Some(space) if space <= EXHAUSTIVE_LIMIT => Ok(space),
        _ => Err(Error::arg(format!(
            "exhaustive search over K^M = {}^{} codes exceeds the limit of {EXHAUSTIVE_LIMIT}",
            codebook.dictionary_size(),
            codebook.num_dictionaries()
        ))),
    }
}

/// Global minimizer of `‖x − Σ c_m(i_m)‖²` by enumeration. Ties go to the
/// lexicographically smallest code. Refuses search spaces above `2^20`.
pub fn exhaustive_encode<T: Scalar>(x: &[T], codebook: &Codebook<T>) -> Result<Vec<u32>> {
    exhaustive_guard(codebook)?;
    check_dim(x, codebook)?;
    Ok(exhaustive_unchecked(x, codebook))
}

fn exhaustive_unchecked<T: Scalar>(x: &[T], codebook: &Codebook<T>) -> Vec<u32> {
    let (m_total, d) = (codebook.num_dictionaries(), codebook.dim());
    let mut partial = vec![0.0f64; (m_total + 1) * d];
    let mut codes = vec![0u32; m_total];
    let mut best = (f64::INFINITY, codes.clone());

    fn visit<T: Scalar>(
        depth: usize,
        x: &[T],
        cb: &Codebook<T>,
        partial: &mut [f64],
        codes: &mut [u32],
        best: &mut (f64, Vec<u32>),
    ) {
        let d = cb.dim();
        if depth == cb.num_dictionaries() {
            let err = dist2(x, &partial[depth * d..(depth + 1) * d]);
            if err < best.0 {
                best.0 = err;
                best.1.copy_from_slice(codes);
            }
            return;
        }
        for j in 0..cb.dictionary_size() {
            let (head, tail) = partial.split_at_mut((depth + 1) * d);
            let prev = &head[depth * d..];
            for ((dst, p), c) in tail[..d].iter_mut().zip(prev).zip(cb.element(depth, j)) {
                *dst = p + c.to_acc();
            }
            codes[depth] = j as u32;
            visit(depth + 1, x, cb, partial, codes, best);
        }
    }

    visit(0, x, codebook, &mut partial, &mut codes, &mut best);
    best.1
}

/// True when every dictionary is zero outside its own contiguous `d/M` slice.
pub fn is_product_layout<T: Scalar>(codebook: &Codebook<T>) -> bool {
    let (m_total, d) = (codebook.num_dictionaries(), codebook.dim());
    if d % m_total != 0 {
        return false;
    }
    let sub = d / m_total;
    (0..m_total).all(|m| {
        (0..codebook.dictionary_size()).all(|j| {
            codebook
                .element(m, j)
                .iter()
                .enumerate()
                .all(|(t, v)| (m * sub..(m + 1) * sub).contains(&t) || v.is_zero())
        })
    })
}

/// Per-subspace nearest centroid for a product codebook whose dictionary `m`
/// lives on coordinates `[m·d/M, (m+1)·d/M)`.
pub fn pq_encode<T: Scalar>(x: &[T], codebook: &Codebook<T>) -> Result<Vec<u32>> {
    check_dim(x, codebook)?;
    if !codebook.dim().is_multiple_of(codebook.num_dictionaries()) {
        return Err(Error::arg("d is not divisible by M"));
    }
    Ok(pq_unchecked(x, codebook))
}

fn pq_unchecked<T: Scalar>(x: &[T], codebook: &Codebook<T>) -> Vec<u32> {
    let sub = codebook.dim() / codebook.num_dictionaries();
    (0..codebook.num_dictionaries())
        .map(|m| {
            let range = m * sub..(m + 1) * sub;
            let xs = &x[range.clone()];
            let mut best = (0u32, f64::INFINITY);
            for j in 0..codebook.dictionary_size() {
                let dist = dist2(xs, &codebook.element(m, j)[range.clone()]);
                if dist < best.1 {
                    best = (j as u32, dist);
                }
            }
            best.0
        })
        .collect()
}

fn encode_one<T: Scalar>(
    x: &[T],
    codebook: &Codebook<T>,
    table: &CrossTermTable,
    method: EncodeMethod,
) -> Vec<u32> {
    match method {
        EncodeMethod::Greedy => greedy_unchecked(x, codebook),
        EncodeMethod::Beam { width } => BeamSearch {
            codebook,
            table,
            width,
        }
        .run(x, None),
        EncodeMethod::Icm { rounds } => icm_unchecked(x, codebook, table, rounds),
        EncodeMethod::Exhaustive => exhaustive_unchecked(x, codebook),
        EncodeMethod::Product => pq_unchecked(x, codebook),
    }
}

/// Encodes every row of `dataset`; rows are processed in parallel and the
/// output does not depend on the thread count.
pub(crate) fn encode_codes<T: Scalar>(
    dataset: &VectorDataset<T>,
    codebook: &Codebook<T>,
    table: &CrossTermTable,
    method: EncodeMethod,
) -> Result<CodeMatrix> {
    method.validate(codebook)?;
    check_table(codebook, table)?;
    if !dataset.is_empty() && dataset.dim() != codebook.dim() {
        return Err(Error::arg(format!(
            "dataset dimension {} does not match codebook dimension {}",
            dataset.dim(),
            codebook.dim()
        )));
    }
    let m = codebook.num_dictionaries();
    let mut codes = vec![0u32; dataset.len() * m];
    codes.par_chunks_mut(m).enumerate().for_each(|(i, out)| {
        out.copy_from_slice(&encode_one(dataset.row(i), codebook, table, method))
    });
    CodeMatrix::new(dataset.len(), m, codebook.dictionary_size(), codes)
}

/// Encodes a dataset and stores the per-vector cross term alongside the codes.
pub fn encode_dataset<T: Scalar>(
    dataset: &VectorDataset<T>,
    codebook: &Codebook<T>,
    method: EncodeMethod,
) -> Result<EncodedDatabase> {
    let table = build_cross_terms(codebook);
    let codes = encode_codes(dataset, codebook, &table, method)?;
    EncodedDatabase::new(codes, &table, Some(codebook.fingerprint()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::{reconstruct, Codebook};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn residual(x: &[f64], cb: &Codebook<f64>, codes: &[u32]) -> f64 {
        dist2(x, reconstruct(cb, codes).unwrap().as_slice())
    }

    fn random_sorted(m: usize, k: usize, d: usize, seed: u64) -> Codebook<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = Vec::new();
        for mi in 0..m {
            let scale = 0.6f64.powi(mi as i32);
            v.extend((0..k * d).map(|_| scale * rng.random_range(-1.0..1.0)));
        }
        let mut cb = Codebook::new(m, k, d, v).unwrap();
        cb.sort_by_norm();
        cb
    }

    #[test]
    fn single_dictionary_beam_is_argmin() {
        let cb = random_sorted(1, 6, 3, 1);
        let t = build_cross_terms(&cb);
        let x = [0.2, -0.1, 0.4];
        for width in [1, 3, 10] {
            let code = beam_encode(&x, &cb, &t, width).unwrap();
            let want = (0..6)
                .min_by(|&a, &b| {
                    dist2(&x, cb.element(0, a)).total_cmp(&dist2(&x, cb.element(0, b)))
                })
                .unwrap();
            assert_eq!(code, vec![want as u32]);
        }
    }

    #[test]
    fn beam_rejects_bad_input() {
        let mut v = vec![0.0f64; 2 * 2 * 2];
        v[6] = 5.0;
        let cb = Codebook::new(2, 2, 2, v).unwrap();
        let t = build_cross_terms(&cb);
        assert!(matches!(
            beam_encode(&[0.0, 0.0], &cb, &t, 2),
            Err(Error::Contract(_))
        ));
        let sorted = random_sorted(2, 2, 2, 3);
        let t = build_cross_terms(&sorted);
        assert!(matches!(
            beam_encode(&[0.0, 0.0], &sorted, &t, 0),
            Err(Error::Argument(_))
        ));
        assert!(beam_encode(&[0.0], &sorted, &t, 1).is_err());
    }

    #[test]
    fn recurrence_tracks_exact_partial_error() {
        let cb = random_sorted(3, 4, 5, 7);
        let t = build_cross_terms(&cb);
        let bs = BeamSearch::new(&cb, &t, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.5..1.5)).collect();
            let (_, trace) = bs.encode_traced(&x).unwrap();
            for (stage, beam) in trace.iter().enumerate() {
                assert!(beam
                    .windows(2)
                    .all(|w| w[0].approx_sq_err <= w[1].approx_sq_err));
                for cand in beam {
                    assert_eq!(cand.prefix.len(), stage + 1);
                    let partial: Vec<f64> = (0..5)
                        .map(|t| {
                            cand.prefix
                                .iter()
                                .enumerate()
                                .map(|(m, &c)| cb.element(m, c as usize)[t])
                                .sum()
                        })
                        .collect();
                    let direct = dist2(&x, partial.as_slice());
                    assert!((cand.approx_sq_err - direct).abs() <= 1e-4 * direct.max(1e-9));
                }
            }
        }
    }

    #[test]
    fn exhaustive_hand_instance() {
        // c_1 = {[0,0],[4,0]}, c_2 = {[0,0],[0,4]}.
        let cb = Codebook::new(2, 2, 2, vec![0.0f64, 0.0, 4.0, 0.0, 0.0, 0.0, 0.0, 4.0]).unwrap();
        assert_eq!(exhaustive_encode(&[4.0, 4.0], &cb).unwrap(), vec![1, 1]);
        assert_eq!(residual(&[4.0, 4.0], &cb, &[1, 1]), 0.0);
    }

    #[test]
    fn exhaustive_guard_refuses_large_spaces() {
        let cb = Codebook::<f32>::zeros(3, 256, 2).unwrap();
        assert!(exhaustive_encode(&[0.0, 0.0], &cb).is_err());
        let ok = Codebook::<f32>::zeros(2, 1024, 1).unwrap();
        assert!(exhaustive_encode(&[0.0], &ok).is_ok());
    }

    #[test]
    fn exhaustive_dominates_beam_and_full_beam_matches() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for seed in 0..100 {
            let cb = random_sorted(3, 4, 4, seed);
            let t = build_cross_terms(&cb);
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.5..1.5)).collect();
            let best = residual(&x, &cb, &exhaustive_encode(&x, &cb).unwrap());
            for width in [1, 2, 4, 8, 16] {
                let r = residual(&x, &cb, &beam_encode(&x, &cb, &t, width).unwrap());
                assert!(best <= r + 1e-12);
                if width == 16 {
                    assert!((r - best).abs() <= 1e-9 * best.max(1e-12));
                }
            }
        }
    }

    #[test]
    fn icm_improves_on_greedy_and_is_bounded_by_exhaustive() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for seed in 0..50 {
            let cb = random_sorted(2, 4, 3, 100 + seed);
            let t = build_cross_terms(&cb);
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.5..1.5)).collect();
            let greedy = residual(&x, &cb, &greedy_encode(&x, &cb).unwrap());
            let icm = residual(&x, &cb, &icm_encode(&x, &cb, &t, 10).unwrap());
            // Enumerate all 16 codes.
            let mut opt = f64::INFINITY;
            for a in 0..4 {
                for b in 0..4 {
                    opt = opt.min(residual(&x, &cb, &[a, b]));
                }
            }
            assert!(icm <= greedy + 1e-12);
            assert!(icm >= opt - 1e-12);
        }
    }

    #[test]
    fn icm_single_dictionary_is_exact() {
        let cb = random_sorted(1, 5, 2, 4);
        let t = build_cross_terms(&cb);
        let x = [0.3, -0.7];
        assert_eq!(
            icm_encode(&x, &cb, &t, 1).unwrap(),
            exhaustive_encode(&x, &cb).unwrap()
        );
        assert!(icm_encode(&x, &cb, &t, 0).is_err());
    }

    #[test]
    fn pq_encode_matches_exhaustive_on_product_codebooks() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (m, k, d) = (3, 4, 6);
        let mut v = vec![0.0f64; m * k * d];
        for mi in 0..m {
            for j in 0..k {
                for t in mi * 2..mi * 2 + 2 {
                    v[(mi * k + j) * d + t] = rng.random_range(-1.0..1.0);
                }
            }
        }
        let cb = Codebook::new(m, k, d, v).unwrap();
        assert!(is_product_layout(&cb));
        for _ in 0..30 {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let pq = pq_encode(&x, &cb).unwrap();
            let ex = exhaustive_encode(&x, &cb).unwrap();
            assert!((residual(&x, &cb, &pq) - residual(&x, &cb, &ex)).abs() < 1e-12);
        }
        let overlapping = random_sorted(2, 2, 4, 1);
        assert!(!is_product_layout(&overlapping));
    }

    #[test]
    fn encode_dataset_stores_cross_terms() {
        let cb = random_sorted(3, 4, 4, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ds = VectorDataset::new(4, data).unwrap();
        let db = encode_dataset(&ds, &cb, EncodeMethod::Beam { width: 4 }).unwrap();
        let t = build_cross_terms(&cb);
        for i in 0..ds.len() {
            let want = crate::codebook::cross_term_of(db.codes.row(i), &t) as f32;
            assert_eq!(db.cross_terms[i], want);
        }
        assert_eq!(db.codebook_id, Some(cb.fingerprint()));
        assert!(encode_dataset(&ds, &cb, EncodeMethod::Product).is_err());
    }
}
