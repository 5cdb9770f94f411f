use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use super::despeckle::{despeckle, DespeckleConfig};
use super::quality::{ms_ssim, psnr};
use crate::error::{Error, Result};
use crate::gd::{focus_gd, GdConfig};
use crate::learned::{infer, RegressorParams};
use crate::metrics::mns;
use crate::slc::{correct, drc, RealImage, SlcImage};
use crate::synth::{DatasetManifest, ManifestRecord, Split};

pub const EVAL_CSV_HEADER: &str = "id,method,psnr_db,ms_ssim,mns_before,mns_after,runtime_s";

/// A correction strategy under evaluation.
#[derive(Clone, Debug)]
pub enum Method {
    /// No correction.
    Identity,
    /// Correction with the stored true polynomial.
    Oracle,
    Gd(GdConfig),
    Learned(Arc<RegressorParams>),
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::Identity => "identity".into(),
            Method::Oracle => "oracle".into(),
            Method::Gd(cfg) => format!("gd_{}", cfg.metric.name()),
            Method::Learned(_) => "learned".into(),
        }
    }

    /// Corrects `g_e`; the record supplies the true polynomial for the oracle.
    pub fn run(&self, g_e: &SlcImage, record: &ManifestRecord) -> Result<SlcImage> {
        match self {
            Method::Identity => Ok(g_e.clone()),
            Method::Oracle => correct(g_e, &record.coeffs),
            Method::Gd(cfg) => Ok(focus_gd(g_e, cfg)?.g_hat),
            Method::Learned(params) => Ok(infer(g_e, params)?.g_hat),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRecord {
    pub id: String,
    pub method: String,
    pub psnr_db: f64,
    pub ms_ssim: f64,
    pub mns_before: f64,
    pub mns_after: f64,
    /// Correction time only, excluding I/O and scoring.
    pub runtime_s: f64,
    /// Set when the method failed on this image; the numeric fields are NaN.
    pub error: Option<String>,
}

fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{v}")
    }
}

impl EvalRecord {
    fn failed(id: &str, method: String, err: &Error) -> Self {
        Self {
            id: id.into(),
            method,
            psnr_db: f64::NAN,
            ms_ssim: f64::NAN,
            mns_before: f64::NAN,
            mns_after: f64::NAN,
            runtime_s: f64::NAN,
            error: Some(err.to_string()),
        }
    }

    pub fn csv_row(&self, with_runtime: bool) -> String {
        let runtime = if with_runtime { fmt_value(self.runtime_s) } else { String::new() };
        format!(
            "{},{},{},{},{},{},{}",
            self.id,
            self.method,
            fmt_value(self.psnr_db),
            fmt_value(self.ms_ssim),
            fmt_value(self.mns_before),
            fmt_value(self.mns_after),
            runtime
        )
    }
}

/// Per-record CSV. With `with_runtime` false the runtime column is left
/// empty so runs can be compared byte for byte.
pub fn records_to_csv(records: &[EvalRecord], with_runtime: bool) -> String {
    let mut out = String::from(EVAL_CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(out, "{}", r.csv_row(with_runtime));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    fn of(values: impl Iterator<Item = f64>) -> Option<Self> {
        let v: Vec<f64> = values.filter(|x| !x.is_nan()).collect();
        if v.is_empty() {
            return None;
        }
        Some(Self {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MethodSummary {
    pub method: String,
    pub count: usize,
    pub failures: usize,
    pub psnr_db: Option<Stats>,
    pub ms_ssim: Option<Stats>,
    pub runtime_s: Option<Stats>,
}

impl fmt::Display for MethodSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = |x: Option<Stats>| {
            x.map_or("n/a".to_string(), |x| {
                format!("mean {:.4} min {:.4} max {:.4}", x.mean, x.min, x.max)
            })
        };
        write!(
            f,
            "{}: n={} failed={} psnr[{}] ms-ssim[{}] runtime[{}]",
            self.method,
            self.count,
            self.failures,
            s(self.psnr_db),
            s(self.ms_ssim),
            s(self.runtime_s)
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalSummary {
    /// Manifest order, then method order.
    pub records: Vec<EvalRecord>,
    pub methods: Vec<MethodSummary>,
}

pub fn summarize(records: &[EvalRecord], methods: &[String]) -> Vec<MethodSummary> {
    methods
        .iter()
        .map(|m| {
            let rs: Vec<&EvalRecord> = records.iter().filter(|r| &r.method == m).collect();
            MethodSummary {
                method: m.clone(),
                count: rs.len(),
                failures: rs.iter().filter(|r| r.error.is_some()).count(),
                psnr_db: Stats::of(rs.iter().map(|r| r.psnr_db)),
                ms_ssim: Stats::of(rs.iter().map(|r| r.ms_ssim)),
                runtime_s: Stats::of(rs.iter().map(|r| r.runtime_s)),
            }
        })
        .collect()
}

/// Scores one corrected image against ground truth: DRC, despeckle, then
/// PSNR and MS-SSIM. Returns `(psnr_db, ms_ssim)`.
pub fn score(ground_truth: &SlcImage, corrected: &SlcImage, cfg: &DespeckleConfig) -> Result<(f64, f64)> {
    let reference = despeckle(&drc(ground_truth)?, cfg)?;
    score_against(&reference, corrected, cfg)
}

fn score_against(reference: &RealImage, corrected: &SlcImage, cfg: &DespeckleConfig) -> Result<(f64, f64)> {
    let test = despeckle(&drc(corrected)?, cfg)?;
    Ok((psnr(reference, &test)?, ms_ssim(reference, &test)?))
}

fn evaluate_one(
    record: &ManifestRecord,
    g_e: &SlcImage,
    method: &Method,
    reference: &RealImage,
    cfg: &DespeckleConfig,
) -> Result<EvalRecord> {
    let start = Instant::now();
    let g_hat = method.run(g_e, record)?;
    // Timer resolution floor keeps the no-op baseline strictly positive.
    let runtime_s = start.elapsed().as_secs_f64().max(1e-9);
    let (psnr_db, ms) = score_against(reference, &g_hat, cfg)?;
    Ok(EvalRecord {
        id: record.id.clone(),
        method: method.name(),
        psnr_db,
        ms_ssim: ms,
        mns_before: mns(&g_e.magnitudes())?,
        mns_after: mns(&g_hat.magnitudes())?,
        runtime_s,
        error: None,
    })
}

/// Evaluates every method on every test record. Failures are recorded per
/// image and do not stop the run.
pub fn evaluate_images(
    items: &[(ManifestRecord, SlcImage, SlcImage)],
    methods: &[Method],
    cfg: &DespeckleConfig,
) -> Result<EvalSummary> {
    let per_image: Vec<Vec<EvalRecord>> = items
        .par_iter()
        .map(|(record, gt, g_e)| {
            let reference = drc(gt).and_then(|d| despeckle(&d, cfg));
            methods
                .iter()
                .map(|m| match &reference {
                    Ok(reference) => evaluate_one(record, g_e, m, reference, cfg)
                        .unwrap_or_else(|e| EvalRecord::failed(&record.id, m.name(), &e)),
                    Err(e) => EvalRecord::failed(&record.id, m.name(), e),
                })
                .collect()
        })
        .collect();
    let records: Vec<EvalRecord> = per_image.into_iter().flatten().collect();
    let names: Vec<String> = methods.iter().map(Method::name).collect();
    Ok(EvalSummary {
        methods: summarize(&records, &names),
        records,
    })
}

/// Loads the test split and evaluates; writes the per-record CSV to
/// `out_csv` when given.
pub fn evaluate(
    manifest: &DatasetManifest,
    methods: &[Method],
    out_csv: Option<&Path>,
    cfg: &DespeckleConfig,
) -> Result<EvalSummary> {
    let records: Vec<&ManifestRecord> = manifest.split(Split::Test).collect();
    if records.is_empty() {
        return Err(Error::Manifest("test split is empty".into()));
    }
    if methods.is_empty() {
        return Err(Error::InvalidParameter("no methods to evaluate".into()));
    }
    let items = records
        .into_par_iter()
        .map(|r| Ok((r.clone(), manifest.load_ground_truth(r)?, manifest.load_corrupted(r)?)))
        .collect::<Result<Vec<_>>>()?;
    let summary = evaluate_images(&items, methods, cfg)?;
    if let Some(path) = out_csv {
        std::fs::write(path, records_to_csv(&summary.records, true)).map_err(|e| Error::io(path, e))?;
    }
    Ok(summary)
}
