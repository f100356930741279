//! `minnorm`: normals and curvatures of point clouds by minimum-norm kernel interpolation.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use minnorm_core::pipeline::{
    estimate_cloud_with, fair_cloud, per_point_csv, run_config_study, run_convergence, run_flattening_sphube,
    run_norm_study, ExperimentReport, FairingOptions, Orientation, StudyOptions, DEFAULT_STENCIL_SIZES,
};
use minnorm_core::spatial::KdTree;
use minnorm_core::surfaces::cube_cloud;
use minnorm_core::xyz::{format_xyz, read_xyz};
use minnorm_core::{CenterConfig, CenterMode, EstimatorSpec, Error, ImplicitSurface, Method, Objective, PointCloud};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "minnorm", version, about = "Point cloud normals and curvatures by minimum-norm kernel interpolation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a synthetic surface to an XYZ file (points and exact normals).
    Gen(GenArgs),
    /// Estimate normals and curvatures of every point of an XYZ cloud.
    Estimate(EstimateArgs),
    /// KRBF error for each trial-centre configuration.
    ConfigStudy(ConfigStudyArgs),
    /// HRBF and KRBF under the native and l2 coefficient norms.
    NormStudy(NormStudyArgs),
    /// Error against fill distance with fitted log-log slopes.
    Convergence(ConvergenceArgs),
    /// PCA, RBF/HRBF and KRBF on sphubes of increasing squareness.
    SphubeSweep(SphubeArgs),
    /// Curvature-weighted fairing of a (noisy) cloud.
    Fair(FairArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ShapeKind {
    Ellipsoid,
    Torus,
    Sphube,
    Cube,
}

#[derive(Args, Debug)]
struct GenArgs {
    shape: ShapeKind,
    /// Shape parameters: ellipsoid a b c, torus R r, sphube s r, cube edge.
    #[arg(num_args = 0.., allow_negative_numbers = true)]
    params: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Seed for random samples (cube) and noise.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Standard deviation of Gaussian coordinate noise; noisy clouds carry no normals.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct SpecArgs {
    #[arg(long, default_value = "krbf", value_parser = parse_method)]
    method: Method,
    #[arg(long, default_value_t = 5)]
    tau: u32,
    #[arg(long = "stencil-size", default_value_t = 40)]
    stencil_size: usize,
    #[arg(long, default_value = "native", value_parser = parse_norm)]
    norm: Objective,
    /// Trial-centre configuration: 1-4 or original, regrid, stretch, stretch_regrid.
    #[arg(long, default_value = "4", value_parser = parse_config)]
    config: CenterMode,
    /// Tikhonov parameter; fits by regularized least squares instead of interpolation.
    #[arg(long)]
    mu: Option<f64>,
}

impl SpecArgs {
    fn spec(&self) -> EstimatorSpec {
        EstimatorSpec::new(self.method, self.tau, self.stencil_size)
            .with_norm(self.norm)
            .with_center_config(CenterConfig::new(self.config))
            .with_tikhonov(self.mu)
    }
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    spec: SpecArgs,
    /// XYZ file with reference normals, in the same point order, for errors and orientation.
    #[arg(long = "ground-truth")]
    ground_truth: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct StudyArgs {
    #[arg(long = "stencil-sizes", value_delimiter = ',', default_values_t = DEFAULT_STENCIL_SIZES)]
    stencil_sizes: Vec<usize>,
    /// Evaluate at most this many evenly strided points per cloud.
    #[arg(long)]
    subset: Option<usize>,
    /// Leave the runtime column empty so the output is reproducible.
    #[arg(long)]
    no_timing: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl StudyArgs {
    fn options(&self) -> StudyOptions {
        StudyOptions {
            stencil_sizes: self.stencil_sizes.clone(),
            eval_subset: self.subset,
            record_timing: !self.no_timing,
            ..StudyOptions::default()
        }
    }
}

#[derive(Args, Debug)]
struct ConfigStudyArgs {
    #[arg(long, default_value = "ellipsoid")]
    shape: ShapeKind,
    #[arg(long, value_delimiter = ',', default_values_t = [0.85, 0.35, 0.5])]
    params: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [100, 500, 5000])]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [3, 5])]
    tau: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_values = ["1", "2", "3", "4"], value_parser = parse_config)]
    config: Vec<CenterMode>,
    #[command(flatten)]
    study: StudyArgs,
}

#[derive(Args, Debug)]
struct NormStudyArgs {
    #[arg(long, default_value = "ellipsoid")]
    shape: ShapeKind,
    #[arg(long, value_delimiter = ',', default_values_t = [0.85, 0.35, 0.5])]
    params: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [500, 5000])]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [3, 5])]
    tau: Vec<u32>,
    #[command(flatten)]
    study: StudyArgs,
}

#[derive(Args, Debug)]
struct ConvergenceArgs {
    #[arg(long, default_value = "torus")]
    shape: ShapeKind,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 0.2])]
    params: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [500, 1000, 2000, 5000, 10000])]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [3, 4])]
    tau: Vec<u32>,
    #[arg(long, value_delimiter = ',', default_values = ["rbf", "hrbf", "krbf"], value_parser = parse_method)]
    methods: Vec<Method>,
    /// Where to write the fitted slopes; printed after the rows when omitted.
    #[arg(long = "slopes-out")]
    slopes_out: Option<PathBuf>,
    #[command(flatten)]
    study: StudyArgs,
}

#[derive(Args, Debug)]
struct SphubeArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.5, 0.9])]
    s: Vec<f64>,
    #[arg(long, default_value_t = 5000)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    tau: u32,
    #[arg(long = "stencil-size", default_value_t = 40)]
    stencil_size: usize,
    #[arg(long)]
    subset: Option<usize>,
    #[arg(long)]
    no_timing: bool,
    /// Per-point error field for heat maps.
    #[arg(long = "fields-out")]
    fields_out: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FairArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 1)]
    iterations: usize,
    /// Curvature scale; defaults to the median |κ| of each iteration, `inf` disables it.
    #[arg(long = "sigma-kappa")]
    sigma_kappa: Option<f64>,
    #[arg(long, default_value = "krbf", value_parser = parse_method)]
    method: Method,
    #[arg(long, default_value_t = 3)]
    tau: u32,
    #[arg(long = "stencil-size", default_value_t = 100)]
    stencil_size: usize,
    #[arg(long, default_value = "native", value_parser = parse_norm)]
    norm: Objective,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_norm(s: &str) -> Result<Objective, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_config(s: &str) -> Result<CenterMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// A failure together with the process exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }

    fn numerical(message: impl Into<String>) -> Self {
        Self { code: EXIT_NUMERICAL, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Conditioning(_)
            | Error::Infeasible { .. }
            | Error::SingularAssembly(_)
            | Error::Oracle(_)
            | Error::DegenerateLevelSet(_) => EXIT_NUMERICAL,
            _ => EXIT_DATA,
        };
        Self { code, message: e.to_string() }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Gen(a) => gen(a),
        Command::Estimate(a) => estimate(a),
        Command::ConfigStudy(a) => {
            let shape = surface(a.shape, &a.params)?;
            let report = run_config_study(&shape, &a.n, &a.tau, &a.config, &a.study.options())?;
            emit_report(&report, a.study.out.as_deref())
        }
        Command::NormStudy(a) => {
            let shape = surface(a.shape, &a.params)?;
            let report = run_norm_study(&shape, &a.n, &a.tau, &a.study.options())?;
            emit_report(&report, a.study.out.as_deref())
        }
        Command::Convergence(a) => {
            let shape = surface(a.shape, &a.params)?;
            let report = run_convergence(&shape, &a.tau, &a.n, &a.methods, &a.study.options())?;
            emit_report(&report, a.study.out.as_deref())?;
            match &a.slopes_out {
                Some(p) => write_text(p, &report.slopes_csv()),
                None => {
                    print!("{}", report.slopes_csv());
                    Ok(())
                }
            }
        }
        Command::SphubeSweep(a) => {
            let opts = StudyOptions { eval_subset: a.subset, record_timing: !a.no_timing, ..StudyOptions::default() };
            let study = run_flattening_sphube(&a.s, a.n, a.tau, a.stencil_size, &opts)?;
            emit_report(&study.report, a.out.as_deref())?;
            if let Some(p) = &a.fields_out {
                write_text(p, &study.fields_csv())?;
            }
            Ok(())
        }
        Command::Fair(a) => fair(a),
    }
}

fn surface(kind: ShapeKind, params: &[f64]) -> CliResult<ImplicitSurface> {
    let want = match kind {
        ShapeKind::Ellipsoid => 3,
        ShapeKind::Torus | ShapeKind::Sphube => 2,
        ShapeKind::Cube => return Err(Failure::usage("the cube has no implicit description; use `gen cube`")),
    };
    if params.len() != want {
        return Err(Failure::usage(format!("{kind:?} takes {want} parameters, got {}", params.len())));
    }
    let s = match kind {
        ShapeKind::Ellipsoid => ImplicitSurface::ellipsoid(params[0], params[1], params[2]),
        ShapeKind::Torus => ImplicitSurface::torus(params[0], params[1]),
        _ => ImplicitSurface::sphube(params[0], params[1]),
    };
    s.map_err(|e| Failure::usage(e.to_string()))
}

fn gen(a: GenArgs) -> CliResult {
    let cloud = if a.shape == ShapeKind::Cube {
        let edge = match a.params.as_slice() {
            [] => 1.0,
            [e] => *e,
            p => return Err(Failure::usage(format!("cube takes 1 parameter, got {}", p.len()))),
        };
        cube_cloud(a.n, edge, a.seed).map_err(|e| Failure::usage(e.to_string()))?
    } else {
        surface(a.shape, &a.params)?.halton_sample(a.n).map_err(|e| Failure::usage(e.to_string()))?
    };
    let cloud = cloud.add_noise(a.noise, a.seed).map_err(|e| Failure::usage(e.to_string()))?;
    emit(a.out.as_deref(), &format_xyz(&cloud))
}

fn estimate(a: EstimateArgs) -> CliResult {
    let spec = a.spec.spec();
    spec.validate().map_err(|e| Failure::usage(e.to_string()))?;
    let mut cloud = read_xyz(&a.input)?;
    if let Some(gt) = &a.ground_truth {
        let truth = read_xyz(gt)?;
        let normals = truth
            .normals
            .ok_or_else(|| Error::MissingGroundTruth(format!("{} has no normals", gt.display())))?;
        cloud = PointCloud::with_normals(cloud.points, normals)?;
    }
    let tree = KdTree::new(&cloud.points);
    let est = estimate_cloud_with(&cloud, &tree, &spec, Orientation::for_cloud(&cloud), None)?;
    emit(a.out.as_deref(), &per_point_csv(&est))?;
    let failed = est.failures();
    if let Some((max, rms)) = est.error_summary() {
        eprintln!("max error {max:.3e}, rms error {rms:.3e}, {failed} failed");
    }
    if failed == est.estimates.len() {
        return Err(Failure::numerical(format!("all {failed} points failed")));
    }
    Ok(())
}

fn fair(a: FairArgs) -> CliResult {
    let spec = EstimatorSpec::new(a.method, a.tau, a.stencil_size).with_norm(a.norm).with_tikhonov(a.mu);
    spec.validate().map_err(|e| Failure::usage(e.to_string()))?;
    if a.method == Method::Pca {
        return Err(Failure::usage("fairing needs curvatures; PCA provides none"));
    }
    let cloud = read_xyz(&a.input)?;
    let opts = FairingOptions { iterations: a.iterations, sigma_kappa: a.sigma_kappa };
    let result = fair_cloud(&cloud, &spec, &opts)?;
    for (it, (flagged, sk)) in result.flagged.iter().zip(&result.sigma_kappa).enumerate() {
        eprintln!("iteration {}: σ_κ = {sk:.4e}, {} points left in place", it + 1, flagged.len());
    }
    if result.flagged.iter().any(|f| f.len() == cloud.len()) {
        return Err(Failure::numerical("curvature estimation failed at every point"));
    }
    emit(a.out.as_deref(), &format_xyz(&result.cloud))
}

fn emit_report(report: &ExperimentReport, out: Option<&Path>) -> CliResult {
    emit(out, &report.to_csv())
}

fn emit(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_text(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| Failure { code: EXIT_DATA, message: format!("{}: {e}", path.display()) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_estimate_flags() {
        let cli = Cli::try_parse_from([
            "minnorm", "estimate", "--in", "a.xyz", "--method", "hrbf", "--tau", "4", "--norm", "l2", "--config",
            "stretch", "--mu", "1e-6",
        ])
        .unwrap();
        let Command::Estimate(a) = cli.command else { panic!("wrong subcommand") };
        let spec = a.spec.spec();
        assert_eq!(spec.method, Method::Hrbf);
        assert_eq!(spec.tau, 4);
        assert_eq!(spec.norm, Objective::L2);
        assert_eq!(spec.center_config.mode, CenterMode::Stretch);
        assert_eq!(spec.tikhonov_mu, Some(1e-6));
    }

    #[test]
    fn study_lists() {
        let cli = Cli::try_parse_from(["minnorm", "config-study", "--n", "100,500", "--config", "1,4"]).unwrap();
        let Command::ConfigStudy(a) = cli.command else { panic!("wrong subcommand") };
        assert_eq!(a.n, vec![100, 500]);
        assert_eq!(a.config, vec![CenterMode::Original, CenterMode::StretchRegrid]);
        assert_eq!(a.study.stencil_sizes, DEFAULT_STENCIL_SIZES.to_vec());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(Cli::try_parse_from(["minnorm", "estimate", "--in", "a", "--method", "spline"]).is_err());
        assert!(Cli::try_parse_from(["minnorm", "estimate"]).is_err());
        assert_eq!(surface(ShapeKind::Torus, &[1.0]).unwrap_err().code, EXIT_USAGE);
        assert_eq!(surface(ShapeKind::Torus, &[0.2, 1.0]).unwrap_err().code, EXIT_USAGE);
    }

    #[test]
    fn error_codes() {
        assert_eq!(Failure::from(Error::Parse { line: 1, reason: String::new() }).code, EXIT_DATA);
        assert_eq!(Failure::from(Error::Conditioning(String::new())).code, EXIT_NUMERICAL);
    }
}
