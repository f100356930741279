//! Benchmark studies on analytic surfaces.

use std::fmt::Write as _;
use std::time::Instant;

use crate::differential::max_and_rms;
use crate::error::{Error, Result};
use crate::pipeline::report::{ExperimentReport, SlopeFit, SummaryRow};
use crate::pipeline::{estimate_cloud_with, CloudEstimate, EstimatorSpec, Method, Orientation};
use crate::solver::Objective;
use crate::spatial::KdTree;
use crate::surfaces::{surface_fill_distance, ImplicitSurface, PointCloud};
use crate::trialspace::{CenterConfig, CenterMode};
use crate::Vec3;

/// Stencil sizes whose maximum error a study row reports.
pub const DEFAULT_STENCIL_SIZES: [usize; 5] = [40, 50, 60, 70, 80];

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOptions {
    pub stencil_sizes: Vec<usize>,
    /// Evaluate at most this many (evenly strided) points per cloud.
    pub eval_subset: Option<usize>,
    /// Record wall-clock runtimes; off gives reproducible CSV.
    pub record_timing: bool,
    /// Random surface probe used for the fill distance.
    pub probe_size: usize,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self { stencil_sizes: DEFAULT_STENCIL_SIZES.to_vec(), eval_subset: None, record_timing: true, probe_size: 20_000 }
    }
}

impl StudyOptions {
    fn validate(&self) -> Result<()> {
        if self.stencil_sizes.is_empty() {
            return Err(Error::Domain("no stencil sizes given".into()));
        }
        if self.eval_subset == Some(0) {
            return Err(Error::Domain("evaluation subset must be positive".into()));
        }
        Ok(())
    }

    fn stencil_label(&self) -> String {
        let lo = self.stencil_sizes.iter().min().copied().unwrap_or(0);
        let hi = self.stencil_sizes.iter().max().copied().unwrap_or(0);
        if lo == hi {
            lo.to_string()
        } else {
            format!("{lo}-{hi}")
        }
    }

    fn subset(&self, n: usize) -> Option<Vec<usize>> {
        match self.eval_subset {
            Some(m) if m < n => Some((0..m).map(|i| i * n / m).collect()),
            _ => None,
        }
    }
}

/// A sampled surface with its spatial index and fill distance.
struct Sample {
    cloud: PointCloud,
    tree: KdTree,
    fill: f64,
}

impl Sample {
    fn new(shape: &ImplicitSurface, n: usize, opts: &StudyOptions) -> Result<Self> {
        let cloud = shape.halton_sample(n)?;
        let fill = surface_fill_distance(shape, &cloud, opts.probe_size)?;
        let tree = KdTree::new(&cloud.points);
        Ok(Self { cloud, tree, fill })
    }

    fn estimate(&self, spec: &EstimatorSpec, subset: Option<&[usize]>) -> Result<CloudEstimate> {
        estimate_cloud_with(&self.cloud, &self.tree, spec, Orientation::for_cloud(&self.cloud), subset)
    }
}

struct Sweep {
    max: f64,
    rms: f64,
    failures: usize,
    millis: f64,
}

/// Max over stencil sizes of the per-size max and RMS normal errors.
fn sweep(sample: &Sample, base: &EstimatorSpec, opts: &StudyOptions) -> Result<Sweep> {
    let subset = opts.subset(sample.cloud.len());
    let start = Instant::now();
    let mut out = Sweep { max: f64::NAN, rms: f64::NAN, failures: 0, millis: 0.0 };
    for &ns in &opts.stencil_sizes {
        let spec = EstimatorSpec { stencil_size: ns, ..*base };
        let est = sample.estimate(&spec, subset.as_deref())?;
        out.failures = out.failures.max(est.failures());
        if let Some((max, rms)) = est.error_summary() {
            out.max = if out.max.is_nan() { max } else { out.max.max(max) };
            out.rms = if out.rms.is_nan() { rms } else { out.rms.max(rms) };
        }
    }
    out.millis = start.elapsed().as_secs_f64() * 1e3;
    Ok(out)
}

fn row(
    shape: &ImplicitSurface,
    sample: &Sample,
    spec: &EstimatorSpec,
    sw: &Sweep,
    opts: &StudyOptions,
    config: String,
) -> SummaryRow {
    SummaryRow {
        shape: shape.label(),
        n: sample.cloud.len(),
        fill: sample.fill,
        tau: (spec.method != Method::Pca).then_some(spec.tau),
        stencil: opts.stencil_label(),
        method: spec.method.to_string(),
        norm: if spec.method == Method::Pca { String::new() } else { spec.norm.to_string() },
        config,
        max_err: sw.max,
        rms_err: sw.rms,
        runtime_ms: opts.record_timing.then_some(sw.millis),
        failures: sw.failures,
    }
}

fn require_nonempty<T>(items: &[T], what: &str) -> Result<()> {
    if items.is_empty() {
        return Err(Error::Domain(format!("{what} list is empty")));
    }
    Ok(())
}

/// KRBF native-norm errors for each trial-centre configuration.
pub fn run_config_study(
    shape: &ImplicitSurface,
    n_list: &[usize],
    tau_list: &[u32],
    configs: &[CenterMode],
    opts: &StudyOptions,
) -> Result<ExperimentReport> {
    require_nonempty(n_list, "N")?;
    require_nonempty(tau_list, "τ")?;
    require_nonempty(configs, "configuration")?;
    opts.validate()?;
    let mut report = ExperimentReport::default();
    for &n in n_list {
        let sample = Sample::new(shape, n, opts)?;
        for &tau in tau_list {
            for &mode in configs {
                let spec =
                    EstimatorSpec::new(Method::Krbf, tau, opts.stencil_sizes[0]).with_center_config(CenterConfig::new(mode));
                let sw = sweep(&sample, &spec, opts)?;
                report.rows.push(row(shape, &sample, &spec, &sw, opts, mode.number().to_string()));
            }
        }
    }
    Ok(report)
}

/// HRBF and KRBF under the native and ℓ² coefficient norms.
pub fn run_norm_study(
    shape: &ImplicitSurface,
    n_list: &[usize],
    tau_list: &[u32],
    opts: &StudyOptions,
) -> Result<ExperimentReport> {
    require_nonempty(n_list, "N")?;
    require_nonempty(tau_list, "τ")?;
    opts.validate()?;
    let mut report = ExperimentReport::default();
    for &n in n_list {
        let sample = Sample::new(shape, n, opts)?;
        for &tau in tau_list {
            for method in [Method::Hrbf, Method::Krbf] {
                for norm in [Objective::Native, Objective::L2] {
                    let spec = EstimatorSpec::new(method, tau, opts.stencil_sizes[0]).with_norm(norm);
                    let sw = sweep(&sample, &spec, opts)?;
                    let config = config_label(&spec);
                    report.rows.push(row(shape, &sample, &spec, &sw, opts, config));
                }
            }
        }
    }
    Ok(report)
}

fn config_label(spec: &EstimatorSpec) -> String {
    if spec.method == Method::Krbf {
        spec.center_config.mode.number().to_string()
    } else {
        String::new()
    }
}

/// Least-squares slope of `log e` against `log h` over pairs with positive error.
pub fn fit_slope(pairs: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        pairs.iter().filter(|(h, e)| *h > 0.0 && *e > 0.0 && e.is_finite()).map(|(h, e)| (h.ln(), e.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Error against fill distance for each method and τ, with fitted log-log slopes.
pub fn run_convergence(
    shape: &ImplicitSurface,
    tau_list: &[u32],
    n_list: &[usize],
    methods: &[Method],
    opts: &StudyOptions,
) -> Result<ExperimentReport> {
    require_nonempty(tau_list, "τ")?;
    require_nonempty(methods, "method")?;
    let mut distinct = n_list.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::Domain(format!("convergence needs at least 3 distinct N, got {}", distinct.len())));
    }
    opts.validate()?;
    let samples = distinct.iter().map(|&n| Sample::new(shape, n, opts)).collect::<Result<Vec<_>>>()?;
    let mut report = ExperimentReport::default();
    for &method in methods {
        for &tau in tau_list {
            let spec = EstimatorSpec::new(method, tau, opts.stencil_sizes[0]);
            let mut pairs = Vec::new();
            for sample in &samples {
                let sw = sweep(sample, &spec, opts)?;
                pairs.push((sample.fill, sw.max));
                report.rows.push(row(shape, sample, &spec, &sw, opts, config_label(&spec)));
            }
            report.slopes.push(SlopeFit {
                shape: shape.label(),
                method: method.to_string(),
                tau,
                slope: fit_slope(&pairs),
                reference: tau as f64 - 1.0,
                points: pairs.len(),
            });
        }
    }
    Ok(report)
}

/// Per-point errors on one sphube.
#[derive(Debug, Clone, PartialEq)]
pub struct SphubeField {
    pub s: f64,
    pub points: Vec<Vec3>,
    pub pca: Vec<f64>,
    /// Per-point minimum of the RBF and HRBF errors.
    pub best_rbf_hrbf: Vec<f64>,
    pub krbf: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphubeStudy {
    pub report: ExperimentReport,
    pub fields: Vec<SphubeField>,
}

impl SphubeStudy {
    /// Heat-map CSV: `s,index,x,y,z,pca_err,best_err,krbf_err`.
    pub fn fields_csv(&self) -> String {
        let mut out = String::from("s,index,x,y,z,pca_err,best_err,krbf_err\n");
        for f in &self.fields {
            for (i, p) in f.points.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{i},{},{},{},{},{},{}",
                    f.s, p.x, p.y, p.z, f.pca[i], f.best_rbf_hrbf[i], f.krbf[i]
                );
            }
        }
        out
    }
}

/// PCA, best-of RBF/HRBF and KRBF normal errors on sphubes of increasing squareness.
pub fn run_flattening_sphube(
    s_list: &[f64],
    n: usize,
    tau: u32,
    stencil_size: usize,
    opts: &StudyOptions,
) -> Result<SphubeStudy> {
    require_nonempty(s_list, "s")?;
    let opts = StudyOptions { stencil_sizes: vec![stencil_size], ..opts.clone() };
    opts.validate()?;
    let mut report = ExperimentReport::default();
    let mut fields = Vec::new();
    for &s in s_list {
        if !(0.0..1.0).contains(&s) {
            return Err(Error::Domain(format!("squareness {s} outside [0, 1)")));
        }
        let shape = ImplicitSurface::sphube(s, 1.0)?;
        let sample = Sample::new(&shape, n, &opts)?;
        let subset = opts.subset(n);
        let mut errs = Vec::new();
        for method in [Method::Pca, Method::Rbf, Method::Hrbf, Method::Krbf] {
            let spec = EstimatorSpec::new(method, tau, stencil_size);
            let start = Instant::now();
            let est = sample.estimate(&spec, subset.as_deref())?;
            let millis = start.elapsed().as_secs_f64() * 1e3;
            let e = est.errors.clone().unwrap_or_default();
            let sw = summarize(&e, est.failures(), millis);
            report.rows.push(row(&shape, &sample, &spec, &sw, &opts, config_label(&spec)));
            errs.push(e);
        }
        let best: Vec<f64> = errs[1].iter().zip(&errs[2]).map(|(a, b)| nan_min(*a, *b)).collect();
        let krbf_spec = EstimatorSpec::new(Method::Krbf, tau, stencil_size);
        let best_failures = best.iter().filter(|e| e.is_nan()).count();
        let sw = summarize(&best, best_failures, 0.0);
        let mut best_row = row(&shape, &sample, &krbf_spec, &sw, &opts, String::new());
        best_row.method = "best_rbf_hrbf".into();
        best_row.runtime_ms = None;
        report.rows.push(best_row);

        let idx: Vec<usize> = subset.unwrap_or_else(|| (0..n).collect());
        fields.push(SphubeField {
            s,
            points: idx.iter().map(|&i| sample.cloud.points[i]).collect(),
            pca: errs[0].clone(),
            best_rbf_hrbf: best,
            krbf: errs[3].clone(),
        });
    }
    Ok(SphubeStudy { report, fields })
}

fn nan_min(a: f64, b: f64) -> f64 {
    match (a.is_nan(), b.is_nan()) {
        (true, _) => b,
        (_, true) => a,
        _ => a.min(b),
    }
}

fn summarize(errors: &[f64], failures: usize, millis: f64) -> Sweep {
    let ok: Vec<f64> = errors.iter().copied().filter(|e| !e.is_nan()).collect();
    let (max, rms) = max_and_rms(&ok).unwrap_or((f64::NAN, f64::NAN));
    Sweep { max, rms, failures, millis }
}
