//! Codebook training: product and residual quantization baselines, dictionary
//! annealing, annealing-interleaved residual training and online updates.
//!
//! One annealing iteration:
//!
//! 1. sort dictionaries by descending norm and beam-encode the data;
//! 2. pick one dictionary `m` and build the intermediate dataset
//!    `x' = e_x + c_m(i_m(x))`, i.e. `x` minus every other dictionary's part;
//! 3. refit dictionary `m` to the intermediate dataset: PCA, then k-means on
//!    the leading `d_1` principal coordinates (warm-started from the rotated
//!    dictionary), growing the subspace geometrically up to `d` and padding the
//!    previous centroids with zeros at each step;
//! 4. rotate the centroids back and replace the dictionary.
//!
//! `d_1 = d · 2^S / K` where `S` is the entropy of the dictionary's codes, so a
//! poorly balanced dictionary is restarted from a small subspace while a
//! balanced one keeps most of its structure.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::codebook::{
    build_cross_terms, entropy, quantization_error, residual_norms, residuals, CodeMatrix, Codebook,
};
use crate::encoder::{encode_codes, EncodeMethod};
use crate::error::{Error, Result};
use crate::kmeans::{assign, kmeans_fit, KMeansConfig, KMeansInit, KMeansResult};
use crate::numerics::{pca, project_with_offset};
use crate::scalar::Scalar;
use crate::vecio::VectorDataset;

/// How the dictionary to anneal is chosen at each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DictionaryPick {
    Random,
    /// Iteration `t` anneals dictionary `t mod M`.
    RoundRobin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DAConfig {
    /// Iteration cap.
    pub iters: usize,
    /// Beam width `L` of the encoder.
    pub beam_width: usize,
    /// Number of subspace growth steps from `d_1` to `d`.
    pub subspace_steps: usize,
    pub seed: u64,
    /// Stop when a full sweep of `M` iterations improves the error by less than
    /// this fraction.
    pub quit_tol: f64,
    pub pick: DictionaryPick,
    pub kmeans_max_iters: usize,
    pub kmeans_tol: f64,
}

impl DAConfig {
    /// Defaults for `m` dictionaries: `m` iterations, `L = 10`, 5 growth steps.
    pub fn new(m: usize) -> Self {
        Self {
            iters: m.max(1),
            beam_width: 10,
            subspace_steps: 5,
            seed: 0,
            quit_tol: 1e-4,
            pick: DictionaryPick::Random,
            kmeans_max_iters: 100,
            kmeans_tol: 1e-4,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_iters(mut self, iters: usize) -> Self {
        self.iters = iters;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.iters == 0 {
            return Err(Error::arg("iters must be at least 1"));
        }
        if self.beam_width == 0 {
            return Err(Error::arg("beam width must be at least 1"));
        }
        if self.subspace_steps == 0 {
            return Err(Error::arg("subspace_steps must be at least 1"));
        }
        if [self.quit_tol, self.kmeans_tol]
            .iter()
            .any(|t| t.is_nan() || *t < 0.0)
        {
            return Err(Error::arg("tolerances must be non-negative"));
        }
        if self.kmeans_max_iters == 0 {
            return Err(Error::arg("kmeans_max_iters must be at least 1"));
        }
        Ok(())
    }

    fn kmeans(&self, k: usize, stream: u64) -> KMeansConfig {
        KMeansConfig {
            k,
            max_iters: self.kmeans_max_iters,
            tol: self.kmeans_tol,
            seed: self
                .seed
                .wrapping_mul(0x9e37_79b9_7f4a_7c15)
                .wrapping_add(stream),
            init: KMeansInit::PlusPlus,
        }
    }

    fn warm_kmeans(&self, k: usize) -> KMeansConfig {
        KMeansConfig {
            init: KMeansInit::Provided,
            ..self.kmeans(k, 0)
        }
    }
}

/// One annealing iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Annealed dictionary, as a position in norm-sorted order.
    pub dictionary: usize,
    /// Mean squared residual right after encoding.
    pub error: f64,
    /// Mean squared residual after the picked dictionary was replaced.
    pub error_after_anneal: f64,
    /// Code entropy of every dictionary after encoding, in bits.
    pub entropies: Vec<f64>,
    pub encode_secs: f64,
    pub anneal_secs: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrainReport {
    pub records: Vec<IterationRecord>,
    /// Error of the first encoding, before any annealing.
    pub initial_error: f64,
    pub final_error: f64,
    pub final_entropies: Vec<f64>,
}

impl TrainReport {
    pub fn error_trace(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.error).collect()
    }
}

fn check_train<T: Scalar>(train: &VectorDataset<T>, m: usize, k: usize) -> Result<()> {
    train.ensure_nonempty("training")?;
    if m == 0 || k == 0 {
        return Err(Error::arg("M and K must be at least 1"));
    }
    if k > train.len() {
        return Err(Error::arg(format!(
            "K = {k} exceeds the {} training vectors",
            train.len()
        )));
    }
    Ok(())
}

/// Product quantization: k-means on `M` contiguous slices of `d/M`
/// coordinates. Each dictionary is embedded in the full space with zeros
/// outside its slice.
pub fn train_pq<T: Scalar>(
    train: &VectorDataset<T>,
    m: usize,
    k: usize,
    config: &DAConfig,
) -> Result<Codebook<T>> {
    check_train(train, m, k)?;
    let d = train.dim();
    if !d.is_multiple_of(m) {
        return Err(Error::arg(format!("d = {d} is not divisible by M = {m}")));
    }
    let sub = d / m;
    let mut elements = vec![T::zero(); m * k * d];
    for mi in 0..m {
        let slice: Vec<T> = train
            .rows()
            .flat_map(|r| r[mi * sub..(mi + 1) * sub].iter().copied())
            .collect();
        let slice = VectorDataset::new(sub, slice)?;
        let fit = kmeans_fit(&slice, &config.kmeans(k, mi as u64), None)?;
        for (j, c) in fit.centroids.rows().enumerate() {
            let start = (mi * k + j) * d + mi * sub;
            elements[start..start + sub].copy_from_slice(c);
        }
    }
    Codebook::new(m, k, d, elements)
}

fn subtract_rows<T: Scalar>(
    data: &mut VectorDataset<T>,
    centroids: &VectorDataset<T>,
    assignments: &[u32],
) {
    for (i, &a) in assignments.iter().enumerate() {
        let c = centroids.row(a as usize);
        for (x, cv) in data.row_mut(i).iter_mut().zip(c) {
            *x = T::from_acc(x.to_acc() - cv.to_acc());
        }
    }
}

/// Residual vector quantization: stage `m` is k-means on the residuals left by
/// stages `0..m`, each vector taking its nearest element per stage.
pub fn train_rvq<T: Scalar>(
    train: &VectorDataset<T>,
    m: usize,
    k: usize,
    config: &DAConfig,
) -> Result<(Codebook<T>, CodeMatrix)> {
    check_train(train, m, k)?;
    let n = train.len();
    let mut residual = train.clone();
    let mut dicts = Vec::with_capacity(m);
    let mut codes = vec![0u32; n * m];
    for stage in 0..m {
        let fit = kmeans_fit(&residual, &config.kmeans(k, stage as u64), None)?;
        for (i, &a) in fit.assignments.iter().enumerate() {
            codes[i * m + stage] = a;
        }
        subtract_rows(&mut residual, &fit.centroids, &fit.assignments);
        dicts.push(fit.centroids);
    }
    Ok((
        Codebook::from_dictionaries(&dicts)?,
        CodeMatrix::new(n, m, k, codes)?,
    ))
}

/// `x' = x − Σ_{j≠m} c_j(i_j(x))`, the residue plus dictionary `m`'s part.
pub fn build_intermediate<T: Scalar>(
    dataset: &VectorDataset<T>,
    codebook: &Codebook<T>,
    codes: &CodeMatrix,
    m: usize,
) -> Result<VectorDataset<T>> {
    if m >= codebook.num_dictionaries() {
        return Err(Error::arg(format!("dictionary {m} out of range")));
    }
    if codes.len() != dataset.len()
        || codes.code_length() != codebook.num_dictionaries()
        || (!dataset.is_empty() && dataset.dim() != codebook.dim())
    {
        return Err(Error::arg(
            "dataset, codebook and codes have inconsistent shapes",
        ));
    }
    let d = codebook.dim();
    let mut out = Vec::with_capacity(dataset.len() * d);
    let mut acc = vec![0.0f64; d];
    for (x, row) in dataset.rows().zip(codes.rows()) {
        acc.iter_mut().zip(x).for_each(|(a, v)| *a = v.to_acc());
        for (j, &c) in row.iter().enumerate() {
            if j != m {
                for (a, v) in acc.iter_mut().zip(codebook.element(j, c as usize)) {
                    *a -= v.to_acc();
                }
            }
        }
        out.extend(acc.iter().map(|&v| T::from_acc(v)));
    }
    VectorDataset::new(d, out)
}

/// Subspace dimensions for annealing a dictionary whose codes have
/// `entropy_bits` of entropy: `d_1 = clamp(round(d·2^S/K), 1, d)`, then
/// `round(d_1·(d/d_1)^{n/steps})` for `n = 1..=steps`, duplicates removed.
pub fn subspace_schedule(
    d: usize,
    k: usize,
    entropy_bits: f64,
    steps: usize,
) -> Result<Vec<usize>> {
    if d == 0 || k == 0 || steps == 0 {
        return Err(Error::arg("d, K and steps must be at least 1"));
    }
    let max_bits = (k as f64).log2();
    if !(entropy_bits >= -1e-9 && entropy_bits <= max_bits + 1e-9) {
        return Err(Error::arg(format!(
            "entropy {entropy_bits} outside [0, log2 K = {max_bits}]"
        )));
    }
    let s = entropy_bits.clamp(0.0, max_bits);
    let d1 = ((d as f64) * s.exp2() / k as f64)
        .round()
        .clamp(1.0, d as f64) as usize;
    let ratio = d as f64 / d1 as f64;
    let mut dims = vec![d1];
    for n in 1..=steps {
        let dn = if n == steps {
            d
        } else {
            ((d1 as f64) * ratio.powf(n as f64 / steps as f64)).round() as usize
        };
        let dn = dn.clamp(1, d);
        if dn > *dims.last().unwrap() {
            dims.push(dn);
        }
    }
    Ok(dims)
}

/// Result of refitting one dictionary.
#[derive(Debug, Clone, PartialEq)]
pub struct Annealed<T> {
    pub elements: VectorDataset<T>,
    /// Nearest new element for every intermediate vector.
    pub assignments: Vec<u32>,
    /// Sum of squared distances of the intermediate vectors to `elements`.
    pub sse: f64,
    /// The same quantity for the incoming dictionary.
    pub incoming_sse: f64,
    pub schedule: Vec<usize>,
}

fn leading_columns(data: &VectorDataset<f64>, n_cols: usize) -> VectorDataset<f64> {
    if n_cols == data.dim() {
        return data.clone();
    }
    let cols = data
        .rows()
        .flat_map(|r| r[..n_cols].iter().copied())
        .collect();
    VectorDataset::new(n_cols, cols).expect("finite")
}

fn pad_columns(data: &VectorDataset<f64>, n_cols: usize) -> VectorDataset<f64> {
    let d = data.dim();
    let mut out = Vec::with_capacity(data.len() * n_cols);
    for r in data.rows() {
        out.extend_from_slice(r);
        out.extend(std::iter::repeat_n(0.0, n_cols - d));
    }
    VectorDataset::new(n_cols, out).expect("finite")
}

/// Refits `elements` (`K × d`) to the intermediate dataset by k-means over a
/// growing sequence of PCA subspaces. The returned dictionary never fits the
/// intermediate data worse than `elements` does.
pub fn anneal_dictionary<T: Scalar>(
    intermediate: &VectorDataset<T>,
    elements: &VectorDataset<T>,
    entropy_bits: f64,
    config: &DAConfig,
) -> Result<Annealed<T>> {
    intermediate.ensure_nonempty("annealing")?;
    let (k, d) = (elements.len(), elements.dim());
    if d != intermediate.dim() {
        return Err(Error::arg(
            "dictionary and intermediate data differ in dimension",
        ));
    }
    let schedule = subspace_schedule(d, k, entropy_bits, config.subspace_steps)?;
    let (_, incoming_sse) = assign(intermediate, elements)?;

    let mean = intermediate.column_mean();
    let rotation = pca(intermediate)?;
    let coords = project_with_offset(&rotation, d, &intermediate.cast::<f64>(), Some(&mean))?;
    let rotated_dict = project_with_offset(&rotation, d, &elements.cast::<f64>(), Some(&mean))?;

    let cfg = config.warm_kmeans(k);
    let mut centroids: Option<VectorDataset<f64>> = None;
    for &dn in &schedule {
        let data = leading_columns(&coords, dn);
        let warm = match &centroids {
            None => leading_columns(&rotated_dict, dn),
            Some(prev) => pad_columns(prev, dn),
        };
        centroids = Some(kmeans_fit(&data, &cfg, Some(&warm))?.centroids);
    }
    let centroids = centroids.expect("schedule is non-empty");

    let mut back = Vec::with_capacity(k * d);
    let mut buf = vec![0.0f64; d];
    for z in centroids.rows() {
        rotation.back_project_into(z, &mut buf);
        back.extend(buf.iter().zip(&mean).map(|(v, mu)| T::from_acc(v + mu)));
    }
    let annealed = VectorDataset::new(d, back)?;
    let (assignments, sse) = assign(intermediate, &annealed)?;

    if sse <= incoming_sse {
        return Ok(Annealed {
            elements: annealed,
            assignments,
            sse,
            incoming_sse,
            schedule,
        });
    }
    // The subspace path lost ground; fall back to Lloyd warm-started from the
    // incoming dictionary, which cannot end above `incoming_sse`.
    let KMeansResult {
        centroids,
        assignments,
        sse,
        ..
    } = kmeans_fit(intermediate, &cfg, Some(elements))?;
    Ok(Annealed {
        elements: centroids,
        assignments,
        sse,
        incoming_sse,
        schedule,
    })
}

/// Beam-encodes `dataset`. Where `previous` codes (matching the codebook's
/// current order) reconstruct a vector better, they are kept instead.
fn encode_keep_better<T: Scalar>(
    dataset: &VectorDataset<T>,
    codebook: &Codebook<T>,
    previous: Option<&CodeMatrix>,
    beam_width: usize,
) -> Result<CodeMatrix> {
    let table = build_cross_terms(codebook);
    let beam = encode_codes(
        dataset,
        codebook,
        &table,
        EncodeMethod::Beam { width: beam_width },
    )?;
    let Some(prev) = previous else {
        return Ok(beam);
    };
    let new_err = residual_norms(dataset, codebook, &beam);
    let old_err = residual_norms(dataset, codebook, prev);
    let m = codebook.num_dictionaries();
    let mut codes = Vec::with_capacity(dataset.len() * m);
    for i in 0..dataset.len() {
        let src = if old_err[i] < new_err[i] { prev } else { &beam };
        codes.extend_from_slice(src.row(i));
    }
    CodeMatrix::new(dataset.len(), m, codebook.dictionary_size(), codes)
}

fn all_entropies(codes: &CodeMatrix) -> Result<Vec<f64>> {
    (0..codes.code_length())
        .map(|m| entropy(codes, m))
        .collect()
}

/// One annealing iteration: sort, encode, pick a dictionary, rebuild it.
///
/// `codes` are the codes of the previous iteration in `codebook`'s current
/// dictionary order, if any; a vector keeps them when beam search does worse.
pub fn da_iterate<T: Scalar>(
    dataset: &VectorDataset<T>,
    codebook: &Codebook<T>,
    codes: Option<&CodeMatrix>,
    config: &DAConfig,
    rng: &mut impl Rng,
    iteration: usize,
) -> Result<(Codebook<T>, CodeMatrix, IterationRecord)> {
    let start = Instant::now();
    let mut cb = codebook.clone();
    let perm = cb.sort_by_norm();
    let prev = codes.map(|c| c.permute_columns(&perm)).transpose()?;
    let mut codes = encode_keep_better(dataset, &cb, prev.as_ref(), config.beam_width)?;
    let error = quantization_error(dataset, &cb, &codes)?;
    let entropies = all_entropies(&codes)?;
    let encode_secs = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let m_total = cb.num_dictionaries();
    let m = match config.pick {
        DictionaryPick::Random => rng.random_range(0..m_total),
        DictionaryPick::RoundRobin => iteration % m_total,
    };
    let intermediate = build_intermediate(dataset, &cb, &codes, m)?;
    let annealed = anneal_dictionary(
        &intermediate,
        &cb.dictionary_dataset(m),
        entropies[m],
        config,
    )?;
    cb.set_dictionary(m, &annealed.elements)?;
    codes.set_column(m, &annealed.assignments)?;
    let error_after_anneal = quantization_error(dataset, &cb, &codes)?;

    Ok((
        cb,
        codes,
        IterationRecord {
            iteration,
            dictionary: m,
            error,
            error_after_anneal,
            entropies,
            encode_secs,
            anneal_secs: start.elapsed().as_secs_f64(),
        },
    ))
}

/// Dictionary annealing from `initial` for up to `config.iters` iterations.
///
/// `initial_codes`, when given, seed the first encoding (e.g. the greedy codes
/// that come with an RVQ codebook). The returned codebook is norm-sorted and
/// the codes are its final beam encoding; the final error never exceeds the
/// error of the first encoding.
pub fn train_da<T: Scalar>(
    dataset: &VectorDataset<T>,
    initial: &Codebook<T>,
    initial_codes: Option<&CodeMatrix>,
    config: &DAConfig,
) -> Result<(Codebook<T>, CodeMatrix, TrainReport)> {
    config.validate()?;
    dataset.ensure_nonempty("dictionary annealing")?;
    if dataset.dim() != initial.dim() {
        return Err(Error::arg(format!(
            "dataset dimension {} does not match codebook dimension {}",
            dataset.dim(),
            initial.dim()
        )));
    }
    if let Some(c) = initial_codes {
        if c.len() != dataset.len() || c.code_length() != initial.num_dictionaries() {
            return Err(Error::arg(
                "initial codes do not match dataset and codebook",
            ));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let m_total = initial.num_dictionaries();
    let mut cb = initial.clone();
    let mut codes = initial_codes.cloned();
    let mut report = TrainReport::default();
    let mut sweep_start_error = f64::NAN;

    for it in 0..config.iters {
        let (next_cb, next_codes, record) =
            da_iterate(dataset, &cb, codes.as_ref(), config, &mut rng, it)?;
        if it == 0 {
            report.initial_error = record.error;
            sweep_start_error = record.error;
        }
        let after = record.error_after_anneal;
        report.records.push(record);
        cb = next_cb;
        codes = Some(next_codes);
        if (it + 1) % m_total == 0 {
            if sweep_start_error - after < config.quit_tol * sweep_start_error {
                break;
            }
            sweep_start_error = after;
        }
    }

    let perm = cb.sort_by_norm();
    let prev = codes.map(|c| c.permute_columns(&perm)).transpose()?;
    let codes = encode_keep_better(dataset, &cb, prev.as_ref(), config.beam_width)?;
    report.final_error = quantization_error(dataset, &cb, &codes)?;
    report.final_entropies = all_entropies(&codes)?;
    Ok((cb, codes, report))
}

/// Residual training with annealing interleaved: before each new stage the
/// existing dictionaries are annealed for one sweep, the data is re-encoded,
/// and the new dictionary is k-means on the remaining residue.
pub fn train_darvq<T: Scalar>(
    train: &VectorDataset<T>,
    m: usize,
    k: usize,
    config: &DAConfig,
) -> Result<(Codebook<T>, CodeMatrix)> {
    config.validate()?;
    check_train(train, m, k)?;
    let first = kmeans_fit(train, &config.kmeans(k, 0), None)?;
    let mut cb = Codebook::from_dictionaries(std::slice::from_ref(&first.centroids))?;
    let mut codes = CodeMatrix::new(train.len(), 1, k, first.assignments)?;
    for stage in 1..m {
        let stage_cfg = DAConfig {
            iters: stage,
            seed: config.seed.wrapping_add(stage as u64),
            ..config.clone()
        };
        let (annealed, annealed_codes, _) = train_da(train, &cb, Some(&codes), &stage_cfg)?;
        let residue = residuals(train, &annealed, &annealed_codes)?;
        let fit = kmeans_fit(&residue, &config.kmeans(k, stage as u64), None)?;
        cb = annealed;
        cb.push_dictionary(&fit.centroids)?;
        codes = annealed_codes.push_column(&fit.assignments)?;
    }
    Ok((cb, codes))
}

/// Anneals an existing codebook on a new batch of data. Dictionaries are
/// refined, never re-initialized.
pub fn online_update<T: Scalar>(
    codebook: &Codebook<T>,
    batch: &VectorDataset<T>,
    config: &DAConfig,
) -> Result<(Codebook<T>, TrainReport)> {
    batch.ensure_nonempty("online update")?;
    let (cb, _, report) = train_da(batch, codebook, None, config)?;
    Ok((cb, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::reconstruct;
    use crate::vecio::gen_synthetic;

    #[test]
    fn schedule_examples() {
        assert_eq!(subspace_schedule(960, 256, 8.0, 5).unwrap(), vec![960]);
        assert_eq!(subspace_schedule(960, 256, 7.0, 5).unwrap()[0], 480);
        let s = subspace_schedule(128, 256, 4.0, 5).unwrap();
        assert_eq!(s[0], 8);
        assert_eq!(*s.last().unwrap(), 128);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert!(subspace_schedule(128, 256, 9.0, 5).is_err());
        assert!(subspace_schedule(128, 256, 1.0, 0).is_err());
        // Zero entropy clamps to a single leading dimension.
        assert_eq!(subspace_schedule(16, 256, 0.0, 2).unwrap(), vec![1, 4, 16]);
    }

    #[test]
    fn pq_shapes_and_errors() {
        let data = gen_synthetic::<f32>(300, 6, 3, 1).unwrap();
        let cfg = DAConfig::new(3);
        let cb = train_pq(&data, 3, 4, &cfg).unwrap();
        assert!(crate::encoder::is_product_layout(&cb));
        assert!(train_pq(&data, 4, 4, &cfg).is_err());
    }

    #[test]
    fn pq_single_dictionary_is_kmeans() {
        let data = gen_synthetic::<f64>(200, 3, 3, 4).unwrap();
        let cfg = DAConfig::new(1);
        let cb = train_pq(&data, 1, 5, &cfg).unwrap();
        let km = kmeans_fit(&data, &cfg.kmeans(5, 0), None).unwrap();
        assert_eq!(cb.dictionary_dataset(0), km.centroids);
    }

    #[test]
    fn rvq_single_stage_is_kmeans() {
        let data = gen_synthetic::<f64>(200, 3, 3, 4).unwrap();
        let cfg = DAConfig::new(1);
        let (cb, codes) = train_rvq(&data, 1, 5, &cfg).unwrap();
        let km = kmeans_fit(&data, &cfg.kmeans(5, 0), None).unwrap();
        assert_eq!(cb.dictionary_dataset(0), km.centroids);
        assert_eq!(codes.as_slice(), km.assignments.as_slice());
        assert!(train_rvq(&VectorDataset::<f64>::empty(), 1, 1, &cfg).is_err());
    }

    #[test]
    fn intermediate_single_dictionary_is_identity() {
        let data = gen_synthetic::<f64>(50, 4, 2, 2).unwrap();
        let (cb, codes) = train_rvq(&data, 1, 3, &DAConfig::new(1)).unwrap();
        assert_eq!(build_intermediate(&data, &cb, &codes, 0).unwrap(), data);
        assert!(build_intermediate(&data, &cb, &codes, 1).is_err());
    }

    #[test]
    fn intermediate_two_routes_agree() {
        let data = gen_synthetic::<f64>(120, 5, 3, 6).unwrap();
        let (cb, codes) = train_rvq(&data, 3, 4, &DAConfig::new(3)).unwrap();
        let res = residuals(&data, &cb, &codes).unwrap();
        for m in 0..3 {
            let inter = build_intermediate(&data, &cb, &codes, m).unwrap();
            for i in 0..data.len() {
                let c = cb.element(m, codes.row(i)[m] as usize);
                for ((v, r), ct) in inter.row(i).iter().zip(res.row(i)).zip(c) {
                    assert!((v - (r + ct)).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn intermediate_with_zero_residue_is_dictionary_part() {
        let cb = Codebook::new(2, 2, 2, vec![1.0f64, 0.0, 3.0, 0.0, 0.0, 1.0, 0.0, -2.0]).unwrap();
        let codes = CodeMatrix::from_rows(2, 2, &[vec![0, 1], vec![1, 0]]).unwrap();
        let rows: Vec<Vec<f64>> = (0..2)
            .map(|i| reconstruct(&cb, codes.row(i)).unwrap())
            .collect();
        let data = VectorDataset::from_rows(&rows).unwrap();
        let inter = build_intermediate(&data, &cb, &codes, 0).unwrap();
        assert_eq!(inter.as_slice(), &[1.0, 0.0, 3.0, 0.0]);
    }

    #[test]
    fn anneal_fixed_point() {
        // Intermediate data = the dictionary's own elements, each repeated.
        let elements = VectorDataset::new(
            3,
            vec![
                0.0f64, 0.0, 0.0, 4.0, 1.0, 0.0, -2.0, 3.0, 1.0, 1.0, -1.0, 5.0,
            ],
        )
        .unwrap();
        let idx: Vec<usize> = (0..40).map(|i| i % 4).collect();
        let inter = elements.select(&idx).unwrap();
        let out = anneal_dictionary(&inter, &elements, 2.0, &DAConfig::new(1)).unwrap();
        for (a, b) in out.elements.as_slice().iter().zip(elements.as_slice()) {
            assert!((a - b).abs() < 1e-5);
        }
        assert!(out.sse < 1e-9);
    }

    #[test]
    fn anneal_never_increases_sse() {
        let data = gen_synthetic::<f32>(2000, 16, 8, 3).unwrap();
        let (cb, codes) = train_rvq(&data, 2, 8, &DAConfig::new(2)).unwrap();
        for m in 0..2 {
            let inter = build_intermediate(&data, &cb, &codes, m).unwrap();
            let s = entropy(&codes, m).unwrap();
            let out =
                anneal_dictionary(&inter, &cb.dictionary_dataset(m), s, &DAConfig::new(2)).unwrap();
            assert!(out.sse <= out.incoming_sse * (1.0 + 1e-6));
        }
    }

    #[test]
    fn train_da_is_deterministic_and_does_not_regress() {
        let data = gen_synthetic::<f32>(1500, 8, 6, 5).unwrap();
        let cfg = DAConfig::new(3).with_seed(4);
        let (cb, codes) = train_rvq(&data, 3, 8, &cfg).unwrap();
        let rvq_err = quantization_error(&data, &cb, &codes).unwrap();
        let a = train_da(&data, &cb, Some(&codes), &cfg).unwrap();
        let b = train_da(&data, &cb, Some(&codes), &cfg).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert!(a.2.final_error <= rvq_err * (1.0 + 1e-6));
        assert!(a.2.final_error <= a.2.initial_error * (1.0 + 1e-6));
        assert_eq!(a.2.records.len(), 3);
    }

    #[test]
    fn round_robin_visits_every_dictionary() {
        let data = gen_synthetic::<f32>(600, 4, 4, 1).unwrap();
        let cfg = DAConfig {
            pick: DictionaryPick::RoundRobin,
            quit_tol: 0.0,
            ..DAConfig::new(3).with_iters(3)
        };
        let (cb, _) = train_rvq(&data, 3, 4, &cfg).unwrap();
        let (_, _, report) = train_da(&data, &cb, None, &cfg).unwrap();
        let picked: Vec<usize> = report.records.iter().map(|r| r.dictionary).collect();
        assert_eq!(picked, vec![0, 1, 2]);
    }

    #[test]
    fn darvq_single_dictionary_is_kmeans() {
        let data = gen_synthetic::<f64>(200, 3, 3, 4).unwrap();
        let cfg = DAConfig::new(1);
        let (cb, codes) = train_darvq(&data, 1, 5, &cfg).unwrap();
        let km = kmeans_fit(&data, &cfg.kmeans(5, 0), None).unwrap();
        assert_eq!(cb.dictionary_dataset(0), km.centroids);
        assert_eq!(codes.as_slice(), km.assignments.as_slice());
    }

    #[test]
    fn online_update_rejects_empty_batch() {
        let cb = Codebook::<f32>::zeros(2, 2, 2).unwrap();
        assert!(online_update(&cb, &VectorDataset::empty(), &DAConfig::new(2)).is_err());
    }

    #[test]
    fn config_validation() {
        let data = gen_synthetic::<f32>(100, 4, 2, 1).unwrap();
        let cb = Codebook::<f32>::zeros(2, 2, 4).unwrap();
        for bad in [
            DAConfig {
                iters: 0,
                ..DAConfig::new(2)
            },
            DAConfig {
                beam_width: 0,
                ..DAConfig::new(2)
            },
            DAConfig {
                subspace_steps: 0,
                ..DAConfig::new(2)
            },
        ] {
            assert!(train_da(&data, &cb, None, &bad).is_err());
        }
    }
}
