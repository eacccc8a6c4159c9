//! Subcommand configurations and runners. Each runner is a pure function of
//! its configuration and input files and returns a [`ReportEnvelope`] or a
//! feature table.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use super::features::{feature_table, FeatureConfig, FeatureTable};
use super::ingest::{ingest_images, raw_vectors, IngestError};
use super::output::{to_value, ReportEnvelope};
use super::points::read_point_cloud;
use crate::capacity::{bound_report, gamma_dropout_vs_dropconnect, ArchitectureSpec, BoundReport, GammaComparison, SampleParams};
use crate::counting::{haralick_vs_vc_comparison, CountReport, CountingParams, FeatureVsVc, Statistic, DEFAULT_ENUMERATION_CAP};
use crate::error::{Error, Result};
use crate::geometry::{
    geometry_report, rc_diff_vs_aggarwal, rc_loglog_slope, relative_contrast, table3_report, GeometryReport,
    MonteCarloOptions, RcVariant, Table3Row,
};
use crate::idim::{generate_embedded_cube, generate_uniform_ball, mle_intrinsic_dimension, IdimConfig, IdimEstimate, PointCloud};

/// A report body that can also be laid out as CSV rows.
pub trait Tabular {
    fn csv_rows(&self) -> Result<Vec<Value>>;
}

fn dataset_label(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

// ---------------------------------------------------------------- features

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeaturesCommand {
    pub input: PathBuf,
    /// Dataset column value; defaults to the input's file name.
    pub dataset: Option<String>,
    pub kappa: u32,
    pub features: FeatureConfig,
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeaturesOutput {
    pub table: FeatureTable,
    pub errors: Vec<IngestError>,
}

pub fn features_command(cfg: &FeaturesCommand) -> Result<FeaturesOutput> {
    let ingested = ingest_images(&cfg.input, cfg.kappa, cfg.strict)?;
    let dataset = cfg.dataset.clone().unwrap_or_else(|| dataset_label(&cfg.input));
    let table = feature_table(&dataset, &ingested.images, &cfg.features)?;
    Ok(FeaturesOutput {
        table,
        errors: ingested.errors,
    })
}

// -------------------------------------------------------------------- idim

/// A seeded synthetic point cloud with known intrinsic dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Fixture {
    /// Uniform in the unit `p`-ball.
    Ball { p: usize, count: usize, seed: u64 },
    /// Uniform in `[0, 1]^p`, zero-padded to `ambient` coordinates and
    /// randomly rotated.
    Cube { p: usize, ambient: usize, count: usize, seed: u64 },
}

impl Fixture {
    /// Parses `ball:P` or `cube:P:D`.
    pub fn parse(spec: &str, count: usize, seed: u64) -> Result<Self> {
        let parts: Vec<&str> = spec.split(':').collect();
        let num = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::domain(format!("bad fixture dimension '{s}' in '{spec}'")))
        };
        match parts[..] {
            ["ball", p] => Ok(Fixture::Ball { p: num(p)?, count, seed }),
            ["cube", p, d] => Ok(Fixture::Cube {
                p: num(p)?,
                ambient: num(d)?,
                count,
                seed,
            }),
            _ => Err(Error::domain(format!("fixture '{spec}' is not ball:P or cube:P:D"))),
        }
    }

    pub fn intrinsic_dimension(&self) -> usize {
        match *self {
            Fixture::Ball { p, .. } | Fixture::Cube { p, .. } => p,
        }
    }

    pub fn generate(&self) -> Result<PointCloud> {
        match *self {
            Fixture::Ball { p, count, seed } => generate_uniform_ball(count, p, seed),
            Fixture::Cube { p, ambient, count, seed } => generate_embedded_cube(count, p, ambient, seed, true),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum IdimSource {
    /// A CSV point cloud, one row per point.
    Csv { path: PathBuf },
    /// An image dataset, estimated both on raw pixel vectors and on the
    /// texture feature vectors.
    Images {
        path: PathBuf,
        kappa: u32,
        features: FeatureConfig,
        strict: bool,
    },
    Fixture(Fixture),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdimCommand {
    pub source: IdimSource,
    pub estimator: IdimConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceEstimate {
    /// `points`, `raw` or `features`.
    pub label: String,
    pub points: usize,
    pub ambient_dimension: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimate: Option<IdimEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdimResults {
    pub estimates: Vec<SourceEstimate>,
    pub ingest_errors: Vec<IngestError>,
}

impl IdimResults {
    pub fn get(&self, label: &str) -> Option<&IdimEstimate> {
        self.estimates
            .iter()
            .find(|e| e.label == label)
            .and_then(|e| e.estimate.as_ref())
    }

    fn flags(&self) -> Vec<String> {
        let mut flags: Vec<String> = self
            .estimates
            .iter()
            .filter(|e| e.error.is_some())
            .map(|e| format!("estimate_failed:{}", e.label))
            .collect();
        if !self.ingest_errors.is_empty() {
            flags.push(format!("ingest_errors:{}", self.ingest_errors.len()));
        }
        flags
    }
}

impl Tabular for IdimResults {
    fn csv_rows(&self) -> Result<Vec<Value>> {
        self.estimates
            .iter()
            .map(|e| {
                let mut v = to_value(e)?;
                if let Some(est) = v.get_mut("estimate").and_then(Value::as_object_mut) {
                    est.remove("per_point");
                }
                Ok(v)
            })
            .collect()
    }
}

fn estimate_rows(label: &str, rows: Result<Vec<Vec<f64>>>, cfg: &IdimConfig) -> SourceEstimate {
    let (points, ambient_dimension) = match &rows {
        Ok(r) => (r.len(), r.first().map_or(0, Vec::len)),
        Err(_) => (0, 0),
    };
    let result = rows
        .and_then(|r| PointCloud::from_rows(&r))
        .and_then(|c| mle_intrinsic_dimension(&c, cfg));
    SourceEstimate {
        label: label.to_string(),
        points,
        ambient_dimension,
        error: result.as_ref().err().map(|e| e.to_string()),
        estimate: result.ok(),
    }
}

fn estimate_cloud(label: &str, cloud: &PointCloud, cfg: &IdimConfig) -> Result<SourceEstimate> {
    Ok(SourceEstimate {
        label: label.to_string(),
        points: cloud.count(),
        ambient_dimension: cloud.dim(),
        estimate: Some(mle_intrinsic_dimension(cloud, cfg)?),
        error: None,
    })
}

pub fn idim_results(cfg: &IdimCommand) -> Result<IdimResults> {
    match &cfg.source {
        IdimSource::Csv { path } => Ok(IdimResults {
            estimates: vec![estimate_cloud("points", &read_point_cloud(path)?, &cfg.estimator)?],
            ingest_errors: vec![],
        }),
        IdimSource::Fixture(f) => Ok(IdimResults {
            estimates: vec![estimate_cloud("points", &f.generate()?, &cfg.estimator)?],
            ingest_errors: vec![],
        }),
        IdimSource::Images {
            path,
            kappa,
            features,
            strict,
        } => {
            let ingested = ingest_images(path, *kappa, *strict)?;
            if ingested.images.is_empty() {
                return Err(Error::domain(format!("no images decoded from {}", path.display())));
            }
            let raw = estimate_rows("raw", raw_vectors(&ingested.images), &cfg.estimator);
            let feats = feature_table(&dataset_label(path), &ingested.images, features).map(|t| t.vectors());
            let feats = estimate_rows("features", feats, &cfg.estimator);
            Ok(IdimResults {
                estimates: vec![raw, feats],
                ingest_errors: ingested.errors,
            })
        }
    }
}

pub fn idim_command(cfg: &IdimCommand) -> Result<ReportEnvelope> {
    let results = idim_results(cfg)?;
    ReportEnvelope::new("idim", cfg, &results, results.flags())
}

// ---------------------------------------------------------------- geometry

/// Dataset rows of the nearest-distance table: training-set sizes with the
/// intrinsic dimensions estimated for each dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table3Config {
    /// How the inputs are read; echoed so the report states it.
    pub basis: String,
    pub mnist_n: u64,
    pub mnist_p: f64,
    pub cifar_n: u64,
    pub cifar_p: f64,
    /// Further `(name, p, n)` rows supplied by the user.
    pub extra: Vec<(String, f64, u64)>,
}

impl Default for Table3Config {
    fn default() -> Self {
        Self {
            basis: "p = estimated intrinsic dimension of the dataset, n = training-set size".to_string(),
            mnist_n: 60_000,
            mnist_p: 9.96,
            cifar_n: 50_000,
            cifar_p: 15.9,
            extra: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RcSweepConfig {
    pub n: u64,
    pub exponents: Vec<i32>,
    /// Constant and rank for the comparison curve `C/sqrt(p) sqrt(1/(2 xi + 1))`.
    pub c: f64,
    pub xi: f64,
}

impl Default for RcSweepConfig {
    fn default() -> Self {
        Self {
            n: 2,
            exponents: (1..=8).collect(),
            c: 1.0,
            xi: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometryCommand {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table3: Option<Table3Config>,
    /// `(n, p)` pairs to evaluate.
    pub points: Vec<(u64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<MonteCarloOptions>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rc_sweep: Option<RcSweepConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RcSweepRow {
    pub p: f64,
    pub rc_paper: f64,
    pub rc_corrected: f64,
    pub aggarwal_difference: f64,
    /// Log-log slope from the previous row, per variant.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope_paper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope_corrected: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometryResults {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table3: Option<Vec<Table3Row>>,
    pub points: Vec<GeometryReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rc_sweep: Option<Vec<RcSweepRow>>,
}

impl GeometryResults {
    fn flags(&self) -> Vec<String> {
        let mut flags = Vec::new();
        for r in &self.points {
            let Some(mc) = &r.monte_carlo else { continue };
            let at = format!("n={},p={}", r.n, r.p);
            if !mc.min_agrees {
                flags.push(format!("min_formula_disagrees_monte_carlo:{at}"));
            }
            if !mc.max_paper_agrees {
                flags.push(format!("max_formula_paper_disagrees_monte_carlo:{at}"));
            }
            if !mc.max_corrected_agrees {
                flags.push(format!("max_formula_corrected_disagrees_monte_carlo:{at}"));
            }
        }
        flags
    }
}

impl Tabular for GeometryResults {
    fn csv_rows(&self) -> Result<Vec<Value>> {
        let mut rows = Vec::new();
        let tagged = |section: &str, v: Value| {
            let mut v = v;
            if let Some(m) = v.as_object_mut() {
                m.insert("section".into(), Value::from(section));
            }
            v
        };
        for r in self.table3.iter().flatten() {
            rows.push(tagged("table3", to_value(r)?));
        }
        for r in &self.points {
            rows.push(tagged("point", to_value(r)?));
        }
        for r in self.rc_sweep.iter().flatten() {
            rows.push(tagged("rc_sweep", to_value(r)?));
        }
        Ok(rows)
    }
}

pub fn geometry_results(cfg: &GeometryCommand) -> Result<GeometryResults> {
    let table3 = match &cfg.table3 {
        Some(t) => {
            let mut rows = vec![
                ("MNIST".to_string(), t.mnist_p, t.mnist_n),
                ("CIFAR-10".to_string(), t.cifar_p, t.cifar_n),
            ];
            rows.extend(t.extra.iter().cloned());
            Some(table3_report(&rows)?)
        }
        None => None,
    };
    let points = cfg
        .points
        .iter()
        .map(|&(n, p)| geometry_report(n, p, cfg.monte_carlo))
        .collect::<Result<Vec<_>>>()?;
    let rc_sweep = match &cfg.rc_sweep {
        Some(s) => {
            let mut rows: Vec<RcSweepRow> = Vec::new();
            for &e in &s.exponents {
                let p = 10f64.powi(e);
                let prev = rows.last().map(|r| r.p);
                rows.push(RcSweepRow {
                    p,
                    rc_paper: relative_contrast(s.n, p, RcVariant::Paper)?,
                    rc_corrected: relative_contrast(s.n, p, RcVariant::Corrected)?,
                    aggarwal_difference: rc_diff_vs_aggarwal(s.n, p, s.c, s.xi)?,
                    slope_paper: prev.and_then(|q| rc_loglog_slope(s.n, q, p, RcVariant::Paper).ok()),
                    slope_corrected: prev.and_then(|q| rc_loglog_slope(s.n, q, p, RcVariant::Corrected).ok()),
                });
            }
            Some(rows)
        }
        None => None,
    };
    Ok(GeometryResults {
        table3,
        points,
        rc_sweep,
    })
}

pub fn geometry_command(cfg: &GeometryCommand) -> Result<ReportEnvelope> {
    let results = geometry_results(cfg)?;
    ReportEnvelope::new("geometry", cfg, &results, results.flags())
}

// ---------------------------------------------------------------------- vc

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum VcCommand {
    /// Excess-error comparison of Dropout and DropConnect over a `w x p` grid.
    Dropout {
        w: Vec<f64>,
        p: Vec<f64>,
        n: u64,
        eta: f64,
    },
    Architecture {
        architecture: ArchitectureSpec,
        #[serde(skip_serializing_if = "Option::is_none")]
        sample: Option<SampleParams>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaRow {
    pub w: f64,
    pub p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<GammaComparison>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum VcResults {
    Grid(Vec<GammaRow>),
    Bound(BoundReport),
}

impl VcResults {
    fn flags(&self) -> Vec<String> {
        let mut flags = Vec::new();
        match self {
            VcResults::Grid(rows) => {
                for r in rows {
                    let at = format!("w={},p={}", r.w, r.p);
                    match &r.comparison {
                        None => flags.push(format!("gamma_undefined:{at}")),
                        Some(c) => {
                            if !c.ordered {
                                flags.push(format!("gamma_dropout_exceeds_dropconnect:{at}"));
                            }
                            if !c.monotone_regime {
                                flags.push(format!("outside_monotone_regime:{at}"));
                            }
                        }
                    }
                }
            }
            VcResults::Bound(b) => {
                if b.gamma_error.is_some() {
                    flags.push("gamma_undefined".to_string());
                }
                if b.operation_count.is_some_and(|o| o.agrees == Some(false)) {
                    flags.push("operation_count_closed_form_disagrees".to_string());
                }
            }
        }
        flags
    }
}

impl Tabular for VcResults {
    fn csv_rows(&self) -> Result<Vec<Value>> {
        match self {
            VcResults::Grid(rows) => rows.iter().map(to_value).collect(),
            VcResults::Bound(b) => Ok(vec![to_value(b)?]),
        }
    }
}

pub fn vc_results(cfg: &VcCommand) -> Result<VcResults> {
    match cfg {
        VcCommand::Dropout { w, p, n, eta } => {
            let mut rows = Vec::new();
            for &wv in w {
                for &pv in p {
                    let (comparison, error) = match gamma_dropout_vs_dropconnect(wv, pv, *n, *eta) {
                        Ok(c) => (Some(c), None),
                        // Bad arguments abort; an undefined bound is a result.
                        Err(e) if e.to_string().contains("radicand") => (None, Some(e.to_string())),
                        Err(e) => return Err(e),
                    };
                    rows.push(GammaRow {
                        w: wv,
                        p: pv,
                        comparison,
                        error,
                    });
                }
            }
            Ok(VcResults::Grid(rows))
        }
        VcCommand::Architecture { architecture, sample } => Ok(VcResults::Bound(bound_report(architecture, *sample)?)),
    }
}

pub fn vc_command(cfg: &VcCommand) -> Result<ReportEnvelope> {
    let results = vc_results(cfg)?;
    ReportEnvelope::new("vc", cfg, &results, results.flags())
}

// ------------------------------------------------------------------ counts

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountsCommand {
    pub n: u32,
    pub kappa: u32,
    pub brute_force: bool,
    pub enumeration_cap: u64,
    /// Network weight count for the feature-space versus VC-scale comparison.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w: Option<u64>,
}

impl CountsCommand {
    pub fn new(n: u32, kappa: u32) -> Self {
        Self {
            n,
            kappa,
            brute_force: false,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            w: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountsResults {
    pub reports: Vec<CountReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature_vs_vc: Option<FeatureVsVc>,
}

impl CountsResults {
    pub fn report(&self, stat: Statistic) -> Option<&CountReport> {
        self.reports.iter().find(|r| r.statistic == stat)
    }

    fn flags(&self) -> Vec<String> {
        self.reports
            .iter()
            .flat_map(|r| r.flags.iter().map(move |f| format!("{}:{f}", r.statistic.name())))
            .collect()
    }
}

impl Tabular for CountsResults {
    fn csv_rows(&self) -> Result<Vec<Value>> {
        self.reports.iter().map(to_value).collect()
    }
}

pub fn counts_results(cfg: &CountsCommand) -> Result<CountsResults> {
    let params = CountingParams::new(cfg.n, cfg.kappa)?;
    let cap = cfg.brute_force.then_some(cfg.enumeration_cap);
    let reports = Statistic::ALL
        .iter()
        .map(|&s| CountReport::compute(params, s, cap))
        .collect::<Result<Vec<_>>>()?;
    let feature_vs_vc = match cfg.w {
        Some(w) => Some(haralick_vs_vc_comparison(params, w)?),
        None => None,
    };
    Ok(CountsResults { reports, feature_vs_vc })
}

pub fn counts_command(cfg: &CountsCommand) -> Result<ReportEnvelope> {
    let results = counts_results(cfg)?;
    ReportEnvelope::new("counts", cfg, &results, results.flags())
}

// ------------------------------------------------------------------ report

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportCommand {
    pub counts: CountsCommand,
    pub vc: VcCommand,
    pub geometry: GeometryCommand,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub idim: Option<IdimCommand>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BundledResults {
    pub counts: CountsResults,
    pub vc: VcResults,
    pub geometry: GeometryResults,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub idim: Option<IdimResults>,
}

pub fn report_command(cfg: &ReportCommand) -> Result<ReportEnvelope> {
    let counts = counts_results(&cfg.counts)?;
    let vc = vc_results(&cfg.vc)?;
    let geometry = geometry_results(&cfg.geometry)?;
    let idim = cfg.idim.as_ref().map(idim_results).transpose()?;
    let mut flags = Vec::new();
    let mut section = |name: &str, fs: Vec<String>| flags.extend(fs.into_iter().map(|f| format!("{name}/{f}")));
    section("counts", counts.flags());
    section("vc", vc.flags());
    section("geometry", geometry.flags());
    if let Some(i) = &idim {
        section("idim", i.flags());
    }
    let results = BundledResults {
        counts,
        vc,
        geometry,
        idim,
    };
    ReportEnvelope::new("report", cfg, &results, flags)
}
