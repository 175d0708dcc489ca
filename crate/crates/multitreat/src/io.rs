//! Dataset files: a CSV of covariates, treatment `w` (1-based) and outcome
//! `y`, with a schema sidecar (`<stem>.schema.csv`) and an optional truth
//! sidecar (`<stem>.truth.csv`, one column `p<w>` per treatment).

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use multitreat_core::linalg::Matrix;
use multitreat_core::{ColumnKind, Dataset};

/// Largest level count inferred as categorical when no schema is present.
const INFER_MAX_LEVELS: usize = 10;

pub fn sidecar(data: &Path, suffix: &str) -> PathBuf {
    let stem = data.file_stem().and_then(|s| s.to_str()).unwrap_or("data");
    data.with_file_name(format!("{stem}.{suffix}.csv"))
}

pub fn write_dataset(d: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    let mut header: Vec<String> = d.names().to_vec();
    header.push("w".into());
    header.push("y".into());
    w.write_record(&header)?;
    let x = d.covariates();
    for i in 0..d.n() {
        let mut rec: Vec<String> = x
            .row(i)
            .iter()
            .zip(d.kinds())
            .map(|(v, k)| match k {
                ColumnKind::Continuous => format!("{v}"),
                ColumnKind::Categorical { .. } => format!("{}", *v as usize),
            })
            .collect();
        rec.push((d.treatment()[i] + 1).to_string());
        rec.push(d.outcome()[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;

    let mut s = csv::Writer::from_path(sidecar(path, "schema"))?;
    s.write_record(["name", "kind", "levels"])?;
    for (name, kind) in d.names().iter().zip(d.kinds()) {
        match kind {
            ColumnKind::Continuous => s.write_record([name.as_str(), "continuous", ""])?,
            ColumnKind::Categorical { levels } => {
                s.write_record([name.as_str(), "categorical", &levels.to_string()])?
            }
        }
    }
    s.write_record(["w", "treatment", &d.z().to_string()])?;
    s.flush()?;

    if let Some(t) = d.truth() {
        let mut tw = csv::Writer::from_path(sidecar(path, "truth"))?;
        tw.write_record((1..=d.z()).map(|w| format!("p{w}")))?;
        for i in 0..t.rows() {
            tw.write_record(t.row(i).iter().map(|v| format!("{v}")))?;
        }
        tw.flush()?;
    }
    Ok(())
}

struct Schema {
    kinds: Vec<(String, ColumnKind)>,
    z: Option<usize>,
}

fn read_schema(path: &Path) -> Result<Schema> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut kinds = Vec::new();
    let mut z = None;
    for rec in r.records() {
        let rec = rec?;
        let name = rec.get(0).unwrap_or("").to_string();
        let levels = || -> Result<usize> {
            rec.get(2)
                .unwrap_or("")
                .parse()
                .map_err(|_| anyhow!("schema row '{name}' needs an integer level count"))
        };
        match rec.get(1).unwrap_or("") {
            "continuous" => kinds.push((name.clone(), ColumnKind::Continuous)),
            "categorical" => kinds.push((name.clone(), ColumnKind::Categorical { levels: levels()? })),
            "treatment" => z = Some(levels()?),
            other => bail!("unknown column kind '{other}' in {}", path.display()),
        }
    }
    Ok(Schema { kinds, z })
}

/// Reads a dataset and its sidecars. Without a schema file, a column whose
/// values are exactly `0..k` with `k <= 10` is taken as categorical.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let col = |name: &str| header.iter().position(|h| h == name);
    let wc = col("w").ok_or_else(|| anyhow!("{} has no treatment column 'w'", path.display()))?;
    let yc = col("y").ok_or_else(|| anyhow!("{} has no outcome column 'y'", path.display()))?;
    let cov_cols: Vec<usize> = (0..header.len()).filter(|&c| c != wc && c != yc).collect();

    let mut values: Vec<Vec<f64>> = vec![Vec::new(); cov_cols.len()];
    let mut w = Vec::new();
    let mut y = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |c: usize| -> Result<&str> {
            rec.get(c).ok_or_else(|| anyhow!("row {} is short", line + 1))
        };
        let wi: usize = field(wc)?.trim().parse().map_err(|_| anyhow!("row {}: bad treatment label", line + 1))?;
        if wi == 0 {
            bail!("row {}: treatment labels are 1-based", line + 1);
        }
        w.push(wi - 1);
        y.push(match field(yc)?.trim() {
            "0" => 0u8,
            "1" => 1u8,
            other => bail!("row {}: outcome must be 0 or 1, got '{other}'", line + 1),
        });
        for (slot, &c) in values.iter_mut().zip(&cov_cols) {
            let v: f64 = field(c)?.trim().parse().map_err(|_| anyhow!("row {}: '{}' is not a number", line + 1, header[c]))?;
            slot.push(v);
        }
    }

    let schema_path = sidecar(path, "schema");
    let (kinds, z) = if schema_path.exists() {
        let s = read_schema(&schema_path)?;
        let mut kinds = Vec::with_capacity(cov_cols.len());
        for &c in &cov_cols {
            let k = s
                .kinds
                .iter()
                .find(|(n, _)| *n == header[c])
                .ok_or_else(|| anyhow!("column '{}' missing from schema", header[c]))?;
            kinds.push(k.1);
        }
        (kinds, s.z)
    } else {
        log::info!("no schema next to {}; inferring column kinds", path.display());
        (values.iter().map(|v| infer_kind(v)).collect(), None)
    };
    let z = z.unwrap_or_else(|| w.iter().max().map_or(0, |m| m + 1));
    let n = w.len();
    let mut x = Matrix::zeros(n, cov_cols.len());
    for (j, v) in values.iter().enumerate() {
        for (i, &val) in v.iter().enumerate() {
            x[(i, j)] = val;
        }
    }
    let names = cov_cols.iter().map(|&c| header[c].clone()).collect();
    let truth_path = sidecar(path, "truth");
    let truth = if truth_path.exists() { Some(read_matrix(&truth_path)?) } else { None };
    Ok(Dataset::new(names, kinds, x, w, y, z, truth)?)
}

fn infer_kind(values: &[f64]) -> ColumnKind {
    let mut levels = BTreeSet::new();
    for &v in values {
        if v < 0.0 || v.fract() != 0.0 || v >= INFER_MAX_LEVELS as f64 {
            return ColumnKind::Continuous;
        }
        levels.insert(v as usize);
    }
    let k = levels.len();
    if k >= 2 && levels.iter().copied().eq(0..k) {
        ColumnKind::Categorical { levels: k }
    } else {
        ColumnKind::Continuous
    }
}

/// Numeric CSV with a header row into a matrix.
pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let cols = r.headers()?.len();
    let mut data = Vec::new();
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec?;
        for v in rec.iter() {
            data.push(v.trim().parse::<f64>().map_err(|_| anyhow!("{}: '{v}' is not a number", path.display()))?);
        }
        rows += 1;
    }
    if data.len() != rows * cols {
        bail!("{} is ragged", path.display());
    }
    Ok(Matrix::from_row_major(rows, cols, data))
}
