//! CSV reports.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::pipeline::CloudEstimate;

pub const SCHEMA_VERSION: &str = "1";

pub const SUMMARY_HEADER: &str = "shape,N,fill,tau,Ns,method,norm,config,max_err,rms_err,runtime_ms";

pub const PER_POINT_HEADER: &str = "index,x,y,z,nx,ny,nz,kappa1,kappa2,gaussian,mean,error,flag";

const SLOPE_HEADER: &str = "shape,method,tau,slope,reference_slope,points";

/// One aggregated row of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub shape: String,
    pub n: usize,
    pub fill: f64,
    pub tau: Option<u32>,
    /// Stencil size, or a range such as `40-80` when maximized over several.
    pub stencil: String,
    pub method: String,
    pub norm: String,
    pub config: String,
    pub max_err: f64,
    pub rms_err: f64,
    pub runtime_ms: Option<f64>,
    /// Points whose estimation failed and that are excluded from the errors.
    pub failures: usize,
}

/// Least-squares slope of `log(error)` against `log(fill distance)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    pub shape: String,
    pub method: String,
    pub tau: u32,
    /// `None` when fewer than two positive errors are available.
    pub slope: Option<f64>,
    pub reference: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentReport {
    pub rows: Vec<SummaryRow>,
    pub slopes: Vec<SlopeFit>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

impl ExperimentReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SUMMARY_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.shape,
                r.n,
                r.fill,
                r.tau.map_or_else(String::new, |t| t.to_string()),
                r.stencil,
                r.method,
                r.norm,
                r.config,
                r.max_err,
                r.rms_err,
                opt(r.runtime_ms)
            );
        }
        out
    }

    /// Slope fits as CSV; undefined slopes are written as `NaN`.
    pub fn slopes_csv(&self) -> String {
        let mut out = String::from(SLOPE_HEADER);
        out.push('\n');
        for s in &self.slopes {
            let slope = s.slope.map_or_else(|| "NaN".to_string(), |x| x.to_string());
            let _ = writeln!(out, "{},{},{},{},{},{}", s.shape, s.method, s.tau, slope, s.reference, s.points);
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Writes the slope table next to the summary (only when there are slopes).
    pub fn write_slopes(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.slopes_csv())?;
        Ok(())
    }
}

/// Per-point CSV; unavailable quantities are left empty and `flag` carries the failure
/// code, `flagged` for a suspicious curvature frame, or `ok`.
pub fn per_point_csv(est: &CloudEstimate) -> String {
    let mut out = String::from(PER_POINT_HEADER);
    out.push('\n');
    for (k, e) in est.estimates.iter().enumerate() {
        let p = e.point;
        let (nx, ny, nz) = match e.normal {
            Some(n) => (n.x.to_string(), n.y.to_string(), n.z.to_string()),
            None => Default::default(),
        };
        let curv = match &e.frame {
            Some(f) => [f.kappa1, f.kappa2, f.gaussian, f.mean].map(|v| v.to_string()),
            None => Default::default(),
        };
        let err = est.errors.as_ref().map(|v| v[k]).filter(|v| !v.is_nan());
        let flag = match (&e.failure, &e.frame) {
            (Some(f), _) => f.code(),
            (None, Some(f)) if f.flagged => "flagged",
            _ => "ok",
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{nx},{ny},{nz},{},{},{},{},{},{flag}",
            e.index,
            p.x,
            p.y,
            p.z,
            curv[0],
            curv[1],
            curv[2],
            curv[3],
            opt(err)
        );
    }
    out
}

pub fn write_per_point(est: &CloudEstimate, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, per_point_csv(est))?;
    Ok(())
}
