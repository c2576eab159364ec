use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use avq_core::encoder::is_product_layout;
use avq_core::vecio::{gen_synthetic, split_indices, write_fvecs};
use avq_core::{
    adc_search, encode_dataset, entropy, mutual_information, online_update, quantization_error,
    recall_at_r, sort_by_norm, train_da, train_darvq, train_pq, train_rvq, CodeMatrix, Codebook,
    DAConfig, EncodeMethod, EncodedDatabase, TrainReport, VectorDataset,
};
use clap::Args;
use serde_json::json;

use crate::files::{create, ground_truth, read_vectors, resolve, write_report};
use crate::{output_path, AnnealArgs, CliResult, Encoder, Failure, Method};

/// Recall is reported at R = 1, 2, 4, ..., 512.
const RECALL_GRID: [usize; 10] = [1, 2, 4, 8, 16, 32, 64, 128, 256, 512];

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Output directory; receives learn.fvecs, base.fvecs and query.fvecs.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    n_train: usize,
    #[arg(long, default_value_t = 50_000)]
    n_base: usize,
    #[arg(long, default_value_t = 1_000)]
    n_query: usize,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    /// Mixture components.
    #[arg(long, default_value_t = 16)]
    components: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Draw queries from the base set instead of holding them out.
    #[arg(long)]
    queries_from_base: bool,
}

pub fn gen(a: GenArgs) -> CliResult<()> {
    if a.n_train == 0 || a.n_base == 0 || a.n_query == 0 || a.dim == 0 || a.components == 0 {
        return Err(Failure::usage(
            "sizes, --dim and --components must be positive",
        ));
    }
    if a.queries_from_base && a.n_query > a.n_base {
        return Err(Failure::usage("--n-query exceeds --n-base"));
    }
    let held_out = if a.queries_from_base { 0 } else { a.n_query };
    let total = a.n_train + a.n_base + held_out;
    let all = gen_synthetic::<f32>(total, a.dim, a.components, a.seed)?;
    let split = split_indices(total, a.n_train, held_out, a.seed)?;
    let train = all.select(&split.train)?;
    let base = all.select(&split.database)?;
    let queries = if a.queries_from_base {
        let pick = split_indices(a.n_base, a.n_query, 0, a.seed ^ 1)?;
        base.select(&pick.train)?
    } else {
        all.select(&split.queries)?
    };
    fs::create_dir_all(&a.out)?;
    write_fvecs(&train, a.out.join("learn.fvecs"))?;
    write_fvecs(&base, a.out.join("base.fvecs"))?;
    write_fvecs(&queries, a.out.join("query.fvecs"))?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Training vectors (.fvecs or .bvecs).
    #[arg(long)]
    train: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Da)]
    method: Method,
    /// Number of dictionaries M.
    #[arg(long)]
    m: usize,
    /// Elements per dictionary K (at most 256).
    #[arg(long, default_value_t = 256)]
    k: usize,
    #[command(flatten)]
    anneal: AnnealArgs,
    /// Starting codebook for `--method da` (default: DARVQ).
    #[arg(long)]
    init: Option<PathBuf>,
    /// Codebook output.
    #[arg(long)]
    out: PathBuf,
    /// Training report, JSON lines (default: <out>.report.jsonl).
    #[arg(long)]
    report: Option<PathBuf>,
}

fn check_shape(m: usize, k: usize) -> CliResult<()> {
    if m == 0 {
        return Err(Failure::usage("--m must be at least 1"));
    }
    if k == 0 || k > 256 {
        return Err(Failure::usage(
            "--k must be in 1..=256 (codes are stored in one byte)",
        ));
    }
    Ok(())
}

fn da_config(m: usize, a: &AnnealArgs) -> CliResult<DAConfig> {
    let cfg = DAConfig {
        iters: a.iters.unwrap_or(m),
        beam_width: a.beam,
        subspace_steps: a.subspace_steps,
        seed: a.seed,
        ..DAConfig::new(m)
    };
    cfg.validate()?;
    Ok(cfg)
}

fn report_path(out: &Path, report: Option<&PathBuf>) -> PathBuf {
    report
        .cloned()
        .unwrap_or_else(|| out.with_extension("report.jsonl"))
}

/// Report for trainers without an annealing loop.
fn static_report(
    data: &VectorDataset<f32>,
    cb: &Codebook<f32>,
    codes: &CodeMatrix,
) -> CliResult<TrainReport> {
    let error = quantization_error(data, cb, codes)?;
    let final_entropies = (0..codes.code_length())
        .map(|m| entropy(codes, m))
        .collect::<avq_core::Result<_>>()?;
    Ok(TrainReport {
        records: Vec::new(),
        initial_error: error,
        final_error: error,
        final_entropies,
    })
}

pub fn train(a: TrainArgs) -> CliResult<()> {
    check_shape(a.m, a.k)?;
    if a.init.is_some() && a.method != Method::Da {
        return Err(Failure::usage("--init only applies to --method da"));
    }
    let cfg = da_config(a.m, &a.anneal)?;
    let out = output_path(&a.out)?;
    let report_out = output_path(&report_path(&a.out, a.report.as_ref()))?;
    let data = read_vectors(&a.train)?;
    let init = match &a.init {
        Some(p) => {
            let cb = Codebook::<f32>::load(resolve(p)?)?;
            if cb.dim() != data.dim() || cb.num_dictionaries() != a.m || cb.dictionary_size() != a.k
            {
                return Err(Failure::usage(format!(
                    "--init codebook is {}x{} in {} dimensions, expected {}x{} in {}",
                    cb.num_dictionaries(),
                    cb.dictionary_size(),
                    cb.dim(),
                    a.m,
                    a.k,
                    data.dim()
                )));
            }
            Some(cb)
        }
        None => None,
    };

    let (cb, report) = match a.method {
        Method::Pq => {
            let cb = train_pq(&data, a.m, a.k, &cfg)?;
            let db = encode_dataset(&data, &cb, EncodeMethod::Product)?;
            let report = static_report(&data, &cb, &db.codes)?;
            (cb, report)
        }
        Method::Rvq | Method::Darvq => {
            let (cb, codes) = if a.method == Method::Rvq {
                train_rvq(&data, a.m, a.k, &cfg)?
            } else {
                train_darvq(&data, a.m, a.k, &cfg)?
            };
            let (cb, codes) = sort_by_norm(&cb, &codes)?;
            let report = static_report(&data, &cb, &codes)?;
            (cb, report)
        }
        Method::Da => {
            let (start, codes) = match init {
                Some(cb) => (cb, None),
                None => {
                    let (cb, codes) = train_darvq(&data, a.m, a.k, &cfg)?;
                    (cb, Some(codes))
                }
            };
            let (cb, _, report) = train_da(&data, &start, codes.as_ref(), &cfg)?;
            (cb, report)
        }
    };
    cb.save(&out)?;
    let method = format!("{:?}", a.method).to_lowercase();
    write_report(&report_out, false, json!({ "method": method }), &report)?;
    println!(
        "{}",
        json!({ "method": method, "quantization_error": report.final_error })
    );
    Ok(())
}

#[derive(Args, Debug, Clone)]
pub struct EncoderArgs {
    #[arg(long, value_enum, default_value_t = Encoder::Auto)]
    encoder: Encoder,
    /// Beam width L.
    #[arg(long = "beam", default_value_t = 10)]
    beam: usize,
    /// ICM sweeps over all dictionaries.
    #[arg(long, default_value_t = 10)]
    icm_rounds: usize,
}

impl EncoderArgs {
    fn method(&self, cb: &Codebook<f32>) -> EncodeMethod {
        match self.encoder {
            Encoder::Auto if is_product_layout(cb) => EncodeMethod::Product,
            Encoder::Auto | Encoder::Beam => EncodeMethod::Beam { width: self.beam },
            Encoder::Greedy => EncodeMethod::Greedy,
            Encoder::Icm => EncodeMethod::Icm {
                rounds: self.icm_rounds,
            },
            Encoder::Exhaustive => EncodeMethod::Exhaustive,
            Encoder::Pq => EncodeMethod::Product,
        }
    }
}

#[derive(Args, Debug)]
pub struct EncodeArgs {
    #[arg(long)]
    codebook: PathBuf,
    /// Database vectors.
    #[arg(long)]
    base: PathBuf,
    #[command(flatten)]
    encoder: EncoderArgs,
    /// Encoded database output.
    #[arg(long)]
    out: PathBuf,
}

fn load_codebook(path: &Path) -> CliResult<Codebook<f32>> {
    let cb = Codebook::<f32>::load(resolve(path)?)?;
    if cb.dictionary_size() > 256 {
        return Err(Failure::usage("codebooks with K > 256 cannot be encoded"));
    }
    Ok(cb)
}

pub fn encode(a: EncodeArgs) -> CliResult<()> {
    let out = output_path(&a.out)?;
    let cb = load_codebook(&a.codebook)?;
    let base = read_vectors(&a.base)?;
    let db = encode_dataset(&base, &cb, a.encoder.method(&cb))?;
    let error = quantization_error(&base, &cb, &db.codes)?;
    db.save(&out)?;
    println!(
        "{}",
        json!({ "vectors": db.len(), "quantization_error": error })
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    codebook: PathBuf,
    /// Encoded database.
    #[arg(long)]
    db: PathBuf,
    #[arg(long)]
    query: PathBuf,
    /// Ground truth (.ivecs); computed from --base when absent.
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Raw database vectors, for ground truth and quantization error.
    #[arg(long)]
    base: Option<PathBuf>,
    /// Recall CSV output.
    #[arg(long)]
    out: PathBuf,
    /// Summary JSON output (default: <out>.json).
    #[arg(long)]
    summary: Option<PathBuf>,
}

pub fn eval(a: EvalArgs) -> CliResult<()> {
    let out = output_path(&a.out)?;
    let summary_out = output_path(
        &a.summary
            .clone()
            .unwrap_or_else(|| a.out.with_extension("json")),
    )?;
    let cb = load_codebook(&a.codebook)?;
    let db = EncodedDatabase::load(resolve(&a.db)?)?;
    let queries = read_vectors(&a.query)?;
    let base = a.base.as_deref().map(read_vectors).transpose()?;
    if let Some(b) = &base {
        if b.len() != db.len() {
            return Err(Failure::usage(format!(
                "--base holds {} vectors but the encoded database {}",
                b.len(),
                db.len()
            )));
        }
    }
    let gt = ground_truth(
        a.gt.as_deref(),
        &a.query,
        &queries,
        a.base.as_deref(),
        base.as_ref(),
    )?;
    if gt.num_queries() != queries.len() {
        return Err(Failure::usage(format!(
            "ground truth covers {} queries, query file holds {}",
            gt.num_queries(),
            queries.len()
        )));
    }
    gt.validate(db.len())?;

    let depth = RECALL_GRID[RECALL_GRID.len() - 1].min(db.len());
    let results = adc_search(&queries, &db, &cb, depth)?;
    let recalls = RECALL_GRID
        .iter()
        .map(|&r| Ok((r, recall_at_r(&results, &gt, r)?)))
        .collect::<CliResult<Vec<_>>>()?;
    let error = base
        .as_ref()
        .map(|b| quantization_error(b, &cb, &db.codes))
        .transpose()?;

    let mut csv = create(&out)?;
    writeln!(csv, "r,recall")?;
    for (r, v) in &recalls {
        writeln!(csv, "{r},{v}")?;
    }
    csv.flush()?;
    let summary = json!({
        "queries": queries.len(),
        "database": db.len(),
        "quantization_error": error,
        "recall": recalls.iter().map(|(r, v)| (r.to_string(), json!(v))).collect::<serde_json::Map<_, _>>(),
    });
    fs::write(&summary_out, serde_json::to_string_pretty(&summary)? + "\n")?;
    println!("{summary}");
    Ok(())
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    #[arg(long)]
    codebook: PathBuf,
    /// Encoded database to analyse.
    #[arg(long, conflicts_with = "data", required_unless_present = "data")]
    db: Option<PathBuf>,
    /// Raw vectors to encode and analyse.
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    encoder: EncoderArgs,
    /// Output directory; receives entropy.csv and mutual_information.csv.
    #[arg(long)]
    out: PathBuf,
}

pub fn stats(a: StatsArgs) -> CliResult<()> {
    let cb = load_codebook(&a.codebook)?;
    let codes = match (&a.db, &a.data) {
        (Some(p), _) => EncodedDatabase::load(resolve(p)?)?.codes,
        (None, Some(p)) => {
            let data = read_vectors(p)?;
            encode_dataset(&data, &cb, a.encoder.method(&cb))?.codes
        }
        (None, None) => return Err(Failure::usage("one of --db or --data is required")),
    };
    if codes.code_length() != cb.num_dictionaries()
        || codes.dictionary_size() != cb.dictionary_size()
    {
        return Err(Failure::usage("codes do not match the codebook"));
    }
    let m = codes.code_length();
    let h = (0..m)
        .map(|i| entropy(&codes, i))
        .collect::<avq_core::Result<Vec<_>>>()?;
    // Symmetric, with each dictionary's entropy on the diagonal.
    let mi = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| match i.cmp(&j) {
                    std::cmp::Ordering::Equal => Ok(h[i]),
                    _ => mutual_information(&codes, i.min(j), i.max(j)),
                })
                .collect::<avq_core::Result<Vec<f64>>>()
        })
        .collect::<avq_core::Result<Vec<_>>>()?;

    fs::create_dir_all(&a.out)?;
    let mut out = create(&a.out.join("entropy.csv"))?;
    writeln!(out, "dictionary,entropy_bits")?;
    for (i, v) in h.iter().enumerate() {
        writeln!(out, "{i},{v}")?;
    }
    out.flush()?;
    let mut out = create(&a.out.join("mutual_information.csv"))?;
    let header: Vec<String> = (0..m).map(|j| j.to_string()).collect();
    writeln!(out, "dictionary,{}", header.join(","))?;
    for (i, row) in mi.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{i},{}", cells.join(","))?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct UpdateArgs {
    #[arg(long)]
    codebook: PathBuf,
    /// New training vectors.
    #[arg(long)]
    train: PathBuf,
    /// Vectors per batch (default: all at once).
    #[arg(long)]
    batch_size: Option<usize>,
    #[command(flatten)]
    anneal: AnnealArgs,
    /// Updated codebook output.
    #[arg(long)]
    out: PathBuf,
    /// Report to append to (default: <out>.report.jsonl).
    #[arg(long)]
    report: Option<PathBuf>,
}

pub fn update(a: UpdateArgs) -> CliResult<()> {
    if a.batch_size == Some(0) {
        return Err(Failure::usage("--batch-size must be at least 1"));
    }
    let out = output_path(&a.out)?;
    let report_out = output_path(&report_path(&a.out, a.report.as_ref()))?;
    let mut cb = load_codebook(&a.codebook)?;
    let cfg = da_config(cb.num_dictionaries(), &a.anneal)?;
    let data = read_vectors(&a.train)?;
    if data.dim() != cb.dim() {
        return Err(Failure::usage(format!(
            "data has {} dimensions, codebook {}",
            data.dim(),
            cb.dim()
        )));
    }
    let batch = a.batch_size.unwrap_or(data.len());
    let mut reports = Vec::new();
    for (b, start) in (0..data.len()).step_by(batch).enumerate() {
        let chunk = data.slice_rows(start, (start + batch).min(data.len()))?;
        let batch_cfg = DAConfig {
            seed: cfg.seed.wrapping_add(b as u64),
            ..cfg.clone()
        };
        let (next, report) = online_update(&cb, &chunk, &batch_cfg)?;
        cb = next;
        reports.push(report);
    }
    cb.save(&out)?;
    for (b, report) in reports.iter().enumerate() {
        write_report(
            &report_out,
            true,
            json!({ "method": "update", "batch": b }),
            report,
        )?;
    }
    let last = reports.last().map(|r| r.final_error);
    println!(
        "{}",
        json!({ "batches": reports.len(), "final_batch_error": last })
    );
    Ok(())
}
