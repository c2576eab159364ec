use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use avq_core::vecio::{read_bvecs, read_fvecs, read_ivecs, write_ivecs};
use avq_core::{exact_search, GroundTruth, TrainReport, VectorDataset};
use serde_json::{json, Value};

use crate::{CliResult, Failure};

/// Number of neighbors stored in a computed ground-truth file.
const GT_DEPTH: usize = 100;

/// `path` as given if it exists, else relative to `$ANN_DATA_DIR`.
pub fn resolve(path: &Path) -> CliResult<PathBuf> {
    if path.exists() {
        return Ok(path.to_path_buf());
    }
    if path.is_relative() {
        if let Some(root) = std::env::var_os("ANN_DATA_DIR") {
            let alt = Path::new(&root).join(path);
            if alt.exists() {
                return Ok(alt);
            }
        }
    }
    Err(Failure::io(format!("{}: no such file", path.display())))
}

/// Reads `.fvecs` or `.bvecs` by extension.
pub fn read_vectors(path: &Path) -> CliResult<VectorDataset<f32>> {
    let path = resolve(path)?;
    let data = match path.extension().and_then(|e| e.to_str()) {
        Some("bvecs") => read_bvecs(&path)?,
        _ => read_fvecs(&path)?,
    };
    if data.is_empty() {
        return Err(Failure::usage(format!(
            "{} holds no vectors",
            path.display()
        )));
    }
    Ok(data)
}

fn gt_cache_path(query: &Path, base: &Path) -> PathBuf {
    let stem = |p: &Path| {
        p.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    };
    query.with_file_name(format!("{}.{}.gt.ivecs", stem(query), stem(base)))
}

/// Ground truth from `gt` if given, else computed by exact search and cached
/// beside the query file.
pub fn ground_truth(
    gt: Option<&Path>,
    query_path: &Path,
    queries: &VectorDataset<f32>,
    base_path: Option<&Path>,
    base: Option<&VectorDataset<f32>>,
) -> CliResult<GroundTruth> {
    if let Some(p) = gt {
        return Ok(read_ivecs(resolve(p)?)?);
    }
    let (Some(base_path), Some(base)) = (base_path, base) else {
        return Err(Failure::usage("either --gt or --base is required"));
    };
    let cache = gt_cache_path(&resolve(query_path)?, base_path);
    if cache.is_file() {
        if let Ok(cached) = read_ivecs(&cache) {
            if cached.num_queries() == queries.len() && cached.validate(base.len()).is_ok() {
                return Ok(cached);
            }
        }
    }
    let truth = exact_search(queries, base, GT_DEPTH.min(base.len()))?.to_ground_truth()?;
    write_ivecs(&truth, &cache)?;
    Ok(truth)
}

/// Appends JSON lines: one per annealing iteration, then a summary.
pub fn write_report(
    path: &Path,
    append: bool,
    context: Value,
    report: &TrainReport,
) -> CliResult<()> {
    let file = OpenOptions::new()
        .create(true)
        .write(true)
        .append(append)
        .truncate(!append)
        .open(path)?;
    let mut out = BufWriter::new(file);
    for record in &report.records {
        writeln!(out, "{}", tagged(&context, "iteration", record)?)?;
    }
    let summary = json!({
        "initial_error": report.initial_error,
        "final_error": report.final_error,
        "final_entropies": report.final_entropies,
    });
    writeln!(out, "{}", tagged(&context, "summary", &summary)?)?;
    out.flush()?;
    Ok(())
}

fn tagged<S: serde::Serialize>(context: &Value, kind: &str, body: &S) -> CliResult<Value> {
    let mut v = serde_json::to_value(body)?;
    if let (Value::Object(map), Value::Object(ctx)) = (&mut v, context) {
        for (k, val) in ctx {
            map.insert(k.clone(), val.clone());
        }
        map.insert("kind".into(), kind.into());
    }
    Ok(v)
}

pub fn create(path: &Path) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}
