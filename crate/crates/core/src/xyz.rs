//! Plain-text XYZ point files: `x y z` or `x y z nx ny nz` per line, `#` comments.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::surfaces::PointCloud;
use crate::Vec3;

pub fn parse_xyz(text: &str) -> Result<PointCloud> {
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut with_normals: Option<bool> = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let line_no = lineno + 1;
        let fields = line
            .split_whitespace()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse { line: line_no, reason: format!("not a finite number: {f:?}") })
            })
            .collect::<Result<Vec<f64>>>()?;
        let has_normal = match fields.len() {
            3 => false,
            6 => true,
            n => {
                return Err(Error::Parse { line: line_no, reason: format!("expected 3 or 6 fields, found {n}") })
            }
        };
        if *with_normals.get_or_insert(has_normal) != has_normal {
            return Err(Error::Parse { line: line_no, reason: "mixed 3- and 6-field lines".into() });
        }
        points.push(Vec3::new(fields[0], fields[1], fields[2]));
        if has_normal {
            let n = Vec3::new(fields[3], fields[4], fields[5]);
            let len = n.norm();
            if !(len > 0.0) {
                return Err(Error::Parse { line: line_no, reason: "zero-length normal".into() });
            }
            normals.push(n / len);
        }
    }
    Ok(PointCloud {
        points,
        normals: with_normals.unwrap_or(false).then_some(normals),
        source: String::new(),
    })
}

pub fn read_xyz(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let mut cloud = parse_xyz(&fs::read_to_string(path)?)?;
    cloud.source = path.display().to_string();
    Ok(cloud)
}

/// Shortest round-trip decimal formatting; [`parse_xyz`] reads it back exactly.
pub fn format_xyz(cloud: &PointCloud) -> String {
    let mut out = String::new();
    if !cloud.source.is_empty() {
        let _ = writeln!(out, "# {}", cloud.source.replace('\n', " "));
    }
    for (i, p) in cloud.points.iter().enumerate() {
        let _ = write!(out, "{} {} {}", p.x, p.y, p.z);
        if let Some(ns) = &cloud.normals {
            let n = ns[i];
            let _ = write!(out, " {} {} {}", n.x, n.y, n.z);
        }
        out.push('\n');
    }
    out
}

pub fn write_xyz(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_xyz(cloud))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_plain_and_commented_lines() {
        let c = parse_xyz("# header\n1 2 3\n\n4 5 6\n").unwrap();
        assert_eq!(c.points, vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(4.0, 5.0, 6.0)]);
        assert!(c.normals.is_none());
    }

    #[test]
    fn reports_offending_line() {
        let err = parse_xyz("1 2 3\n1 2 3 4\n").unwrap_err();
        assert_eq!(err, Error::Parse { line: 2, reason: "expected 3 or 6 fields, found 4".into() });
        assert!(matches!(parse_xyz("1 2 x").unwrap_err(), Error::Parse { line: 1, .. }));
        assert!(matches!(parse_xyz("1 2 3\n1 2 3 0 0 1").unwrap_err(), Error::Parse { line: 2, .. }));
    }

    #[test]
    fn reads_normals() {
        let c = parse_xyz("0 0 1 0 0 2\n").unwrap();
        assert_eq!(c.normals.unwrap(), vec![Vec3::z()]);
    }
}
