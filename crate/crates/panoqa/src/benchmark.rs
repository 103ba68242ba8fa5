//! Dataset benchmarking: run a quality model over a manifest of rated
//! panorama pairs and correlate its predictions with the subjective scores.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::eval::{fit_logistic, plcc, srcc, LogisticParams};
use crate::metrics::Polarity;
use crate::pipeline::{assess_pair, MetricChoice, PipelineConfig};
use crate::sphere::EquirectImage;

/// One rated pair of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRecord {
    pub ref_path: PathBuf,
    pub dist_path: PathBuf,
    pub mos: f64,
    pub distortion_type: Option<String>,
    pub scanpath_path: Option<PathBuf>,
}

/// Parse a `ref_path,dist_path,mos,distortion_type` CSV (the last column is
/// optional, as is a fifth `scanpath_path` column). Relative paths resolve
/// against the manifest's directory.
pub fn load_manifest(path: &Path) -> Result<Vec<ManifestRecord>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut lines = text.lines().enumerate();

    let header = match lines.next() {
        Some((_, h)) => h.trim_end_matches('\r'),
        None => return Err(Error::parse(path, 1, "empty file")),
    };
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.len() < 3 || columns[0] != "ref_path" || columns[1] != "dist_path" || columns[2] != "mos" {
        return Err(Error::parse(
            path,
            1,
            "expected header `ref_path,dist_path,mos[,distortion_type[,scanpath_path]]`",
        ));
    }

    let resolve = |field: &str| -> PathBuf {
        let p = Path::new(field);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    };

    let mut records = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 3 || fields.len() > columns.len().max(5) {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected 3 to 5 fields, found {}", fields.len()),
            ));
        }
        let mos: f64 = fields[2]
            .parse()
            .map_err(|_| Error::parse(path, line_no, format!("bad MOS `{}`", fields[2])))?;
        if !mos.is_finite() {
            return Err(Error::parse(path, line_no, "non-finite MOS"));
        }
        records.push(ManifestRecord {
            ref_path: resolve(fields[0]),
            dist_path: resolve(fields[1]),
            mos,
            distortion_type: fields.get(3).filter(|s| !s.is_empty()).map(|s| s.to_string()),
            scanpath_path: fields.get(4).filter(|s| !s.is_empty()).map(resolve),
        });
    }
    if records.is_empty() {
        return Err(Error::parse(path, 1, "no records after header"));
    }
    Ok(records)
}

/// Correlation results of one record group, or the reason they are
/// undefined.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupStats {
    Correlations { plcc: f64, srcc: f64 },
    Degenerate { reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupResult {
    pub label: String,
    pub n: usize,
    pub stats: GroupStats,
}

/// A record that could not be processed; the run continues without it.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordFailure {
    pub index: usize,
    pub dist_path: PathBuf,
    pub message: String,
}

/// One successfully scored record.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub index: usize,
    pub dist_path: PathBuf,
    pub mos: f64,
    /// Model output in its native scale and polarity.
    pub score: f64,
    pub distortion_type: Option<String>,
}

/// Full benchmark output: per-type and overall correlations, the fitted
/// logistic, its residuals, and the records that failed.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub metric: String,
    pub predictions: Vec<Prediction>,
    pub overall: GroupResult,
    pub per_type: Vec<GroupResult>,
    pub logistic: Option<LogisticParams>,
    /// mos − f(score) for each prediction, in prediction order (empty when
    /// the logistic stage was degenerate).
    pub residuals: Vec<f64>,
    pub failures: Vec<RecordFailure>,
}

fn group_stats(label: &str, oriented: &[f64], mos: &[f64]) -> GroupResult {
    let stats = if oriented.len() < 3 {
        GroupStats::Degenerate {
            reason: format!("only {} prediction(s); need 3", oriented.len()),
        }
    } else {
        match (plcc(oriented, mos), srcc(oriented, mos)) {
            (Ok(p), Ok(s)) => GroupStats::Correlations { plcc: p, srcc: s },
            (Err(e), _) | (_, Err(e)) => GroupStats::Degenerate {
                reason: e.to_string(),
            },
        }
    };
    GroupResult {
        label: label.to_string(),
        n: oriented.len(),
        stats,
    }
}

/// Run the model over every manifest record and correlate with MOS.
///
/// Record-level failures (unreadable images, mismatched pairs) are
/// collected and reported; the run fails only when no record survives.
/// Lower-is-better model outputs are negated before the correlation stage
/// so reported coefficients are positive for well-performing models.
pub fn run_benchmark(
    records: &[ManifestRecord],
    metric: &MetricChoice,
    cfg: &PipelineConfig,
) -> Result<EvaluationReport> {
    if records.is_empty() {
        return Err(Error::Empty("manifest"));
    }
    let descriptor = metric.descriptor();
    let mut predictions = Vec::new();
    let mut failures = Vec::new();

    for (index, record) in records.iter().enumerate() {
        match score_record(record, metric, cfg) {
            Ok(score) => predictions.push(Prediction {
                index,
                dist_path: record.dist_path.clone(),
                mos: record.mos,
                score,
                distortion_type: record.distortion_type.clone(),
            }),
            Err(e) => failures.push(RecordFailure {
                index,
                dist_path: record.dist_path.clone(),
                message: e.to_string(),
            }),
        }
    }
    if predictions.is_empty() {
        return Err(Error::invalid(format!(
            "all {} manifest records failed; first error: {}",
            records.len(),
            failures[0].message
        )));
    }

    let orient = |score: f64| match descriptor.polarity {
        Polarity::HigherBetter => score,
        Polarity::LowerBetter => -score,
    };
    let oriented: Vec<f64> = predictions.iter().map(|p| orient(p.score)).collect();
    let mos: Vec<f64> = predictions.iter().map(|p| p.mos).collect();

    let overall = group_stats("overall", &oriented, &mos);

    let mut per_type = Vec::new();
    let mut labels: Vec<String> = predictions
        .iter()
        .filter_map(|p| p.distortion_type.clone())
        .collect();
    labels.sort();
    labels.dedup();
    for label in labels {
        let subset: Vec<usize> = predictions
            .iter()
            .enumerate()
            .filter(|(_, p)| p.distortion_type.as_deref() == Some(label.as_str()))
            .map(|(i, _)| i)
            .collect();
        let o: Vec<f64> = subset.iter().map(|&i| oriented[i]).collect();
        let m: Vec<f64> = subset.iter().map(|&i| mos[i]).collect();
        per_type.push(group_stats(&label, &o, &m));
    }

    let (logistic, residuals) = match fit_logistic(&oriented, &mos) {
        Ok(params) => {
            let residuals = oriented
                .iter()
                .zip(&mos)
                .map(|(&q, &m)| m - params.evaluate(q))
                .collect();
            (Some(params), residuals)
        }
        Err(_) => (None, Vec::new()),
    };

    Ok(EvaluationReport {
        metric: descriptor.name,
        predictions,
        overall,
        per_type,
        logistic,
        residuals,
        failures,
    })
}

fn score_record(record: &ManifestRecord, metric: &MetricChoice, cfg: &PipelineConfig) -> Result<f64> {
    let reference = EquirectImage::from_png(&record.ref_path)?;
    let distorted = EquirectImage::from_png(&record.dist_path)?;
    let cfg = match &record.scanpath_path {
        Some(path) => {
            let recorded = crate::scanpath::load_scanpath(path)?;
            PipelineConfig {
                scanpath: crate::pipeline::ScanpathSource::Recorded(recorded),
                ..cfg.clone()
            }
        }
        None => cfg.clone(),
    };
    Ok(assess_pair(&reference, &distorted, metric, &cfg)?.score.value)
}

impl EvaluationReport {
    /// Machine-readable rows: `metric,type,plcc,srcc,n`. Degenerate groups
    /// carry empty correlation fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,type,plcc,srcc,n\n");
        let mut push = |group: &GroupResult| {
            match &group.stats {
                GroupStats::Correlations { plcc, srcc } => {
                    let _ = writeln!(
                        out,
                        "{},{},{:.6},{:.6},{}",
                        self.metric, group.label, plcc, srcc, group.n
                    );
                }
                GroupStats::Degenerate { .. } => {
                    let _ = writeln!(out, "{},{},,,{}", self.metric, group.label, group.n);
                }
            };
        };
        for group in &self.per_type {
            push(group);
        }
        push(&self.overall);
        out
    }

    /// Human-readable summary table plus failure listing.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "model: {} ({} records scored)", self.metric, self.predictions.len());
        let _ = writeln!(out, "{:<16} {:>6} {:>10} {:>10}", "type", "n", "plcc", "srcc");
        let mut row = |group: &GroupResult| {
            match &group.stats {
                GroupStats::Correlations { plcc, srcc } => {
                    let _ = writeln!(
                        out,
                        "{:<16} {:>6} {:>10.4} {:>10.4}",
                        group.label, group.n, plcc, srcc
                    );
                }
                GroupStats::Degenerate { reason } => {
                    let _ = writeln!(
                        out,
                        "{:<16} {:>6} {:>10} {:>10}  ({reason})",
                        group.label, group.n, "-", "-"
                    );
                }
            };
        };
        for group in &self.per_type {
            row(group);
        }
        row(&self.overall);
        if !self.failures.is_empty() {
            let _ = writeln!(out, "failures: {}", self.failures.len());
            for f in &self.failures {
                let _ = writeln!(out, "  record {}: {} ({})", f.index, f.message, f.dist_path.display());
            }
        }
        out
    }

    /// Residuals CSV (`residual` header) for model comparison.
    pub fn residuals_csv(&self) -> String {
        let mut out = String::from("residual\n");
        for r in &self.residuals {
            let _ = writeln!(out, "{r}");
        }
        out
    }
}

/// Read a single-column `residual` CSV written by [`EvaluationReport::residuals_csv`].
pub fn load_residuals(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end_matches('\r').trim() == "residual" => {}
        Some((_, h)) => {
            return Err(Error::parse(
                path,
                1,
                format!("expected header `residual`, found `{}`", h.trim()),
            ))
        }
        None => return Err(Error::parse(path, 1, "empty file")),
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        let line = line.trim_end_matches('\r').trim();
        if line.is_empty() {
            continue;
        }
        let value: f64 = line
            .parse()
            .map_err(|_| Error::parse(path, idx + 1, format!("`{line}` is not a number")))?;
        if !value.is_finite() {
            return Err(Error::parse(path, idx + 1, "non-finite residual"));
        }
        out.push(value);
    }
    if out.is_empty() {
        return Err(Error::parse(path, 1, "no residuals after header"));
    }
    Ok(out)
}
