//! ASCII PLY and XYZ point-cloud files.
//!
//! PLY output always uses `element vertex n` with `float` x, y, z properties.
//! The reader accepts extra vertex properties and other elements after the
//! vertices, but only the ASCII encoding.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::point::PointSet;

pub fn ply_to_string(set: &PointSet) -> String {
    let mut out = String::with_capacity(64 + set.len() * 32);
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {}", set.len());
    out.push_str("property float x\nproperty float y\nproperty float z\nend_header\n");
    for p in set.iter() {
        let _ = writeln!(out, "{} {} {}", p[0] as f32, p[1] as f32, p[2] as f32);
    }
    out
}

pub fn write_ply(path: &Path, set: &PointSet) -> Result<()> {
    fs::write(path, ply_to_string(set)).map_err(|e| Error::io(path, e))
}

pub fn read_ply(path: &Path) -> Result<PointSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ply(&text).map_err(|detail| Error::MalformedPly {
        path: path.display().to_string(),
        detail,
    })
}

struct Element {
    name: String,
    count: usize,
    properties: Vec<String>,
}

pub fn parse_ply(text: &str) -> std::result::Result<PointSet, String> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err("missing 'ply' magic".into());
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut format_ok = false;
    loop {
        let line = lines.next().ok_or("header not terminated")?.trim();
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                let fmt = tok.next().unwrap_or("");
                if fmt != "ascii" {
                    return Err(format!("unsupported format '{fmt}' (ASCII only)"));
                }
                format_ok = true;
            }
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let name = tok.next().ok_or("element without name")?.to_string();
                let count = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or("element without valid count")?;
                elements.push(Element {
                    name,
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements.last_mut().ok_or("property before element")?;
                let parts: Vec<&str> = tok.collect();
                let name = match parts.as_slice() {
                    ["list", _, _, name] => format!("list:{name}"),
                    [ty, name] => {
                        if el.name == "vertex" && ["x", "y", "z"].contains(name) {
                            match *ty {
                                "float" | "float32" | "double" | "float64" => {}
                                other => {
                                    return Err(format!("coordinate {name} has type {other}"))
                                }
                            }
                        }
                        name.to_string()
                    }
                    _ => return Err(format!("bad property line '{line}'")),
                };
                el.properties.push(name);
            }
            Some("end_header") => break,
            Some(other) => return Err(format!("unknown header keyword '{other}'")),
        }
    }
    if !format_ok {
        return Err("missing format line".into());
    }
    let mut points = Vec::new();
    for el in &elements {
        if el.name != "vertex" {
            for _ in 0..el.count {
                lines.next().ok_or("truncated body")?;
            }
            continue;
        }
        let pos = |axis: &str| {
            el.properties
                .iter()
                .position(|p| p == axis)
                .ok_or(format!("vertex element lacks property {axis}"))
        };
        let (ix, iy, iz) = (pos("x")?, pos("y")?, pos("z")?);
        if el.properties.iter().any(|p| p.starts_with("list:")) {
            return Err("list properties on vertices are not supported".into());
        }
        for row in 0..el.count {
            let line = lines.next().ok_or(format!("truncated at vertex {row}"))?;
            let vals: Vec<&str> = line.split_whitespace().collect();
            if vals.len() != el.properties.len() {
                return Err(format!(
                    "vertex {row} has {} values, expected {}",
                    vals.len(),
                    el.properties.len()
                ));
            }
            let num = |i: usize| {
                vals[i]
                    .parse::<f64>()
                    .map_err(|_| format!("vertex {row}: bad number '{}'", vals[i]))
            };
            points.push([num(ix)?, num(iy)?, num(iz)?]);
        }
    }
    PointSet::new(points).map_err(|e| e.to_string())
}

pub fn write_xyz(path: &Path, set: &PointSet) -> Result<()> {
    let mut out = String::new();
    for p in set.iter() {
        let _ = writeln!(out, "{} {} {}", p[0], p[1], p[2]);
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_xyz(path: &Path) -> Result<PointSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |detail: String| Error::MalformedXyz {
        path: path.display().to_string(),
        detail,
    };
    let mut points = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(format!("line {}: {e}", ln + 1)))?;
        if vals.len() < 3 {
            return Err(bad(format!("line {} has fewer than 3 values", ln + 1)));
        }
        points.push([vals[0], vals[1], vals[2]]);
    }
    PointSet::new(points).map_err(|e| bad(e.to_string()))
}

/// Reads a `.ply` or `.xyz` file by extension.
pub fn read_cloud(path: &Path) -> Result<PointSet> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("xyz") | Some("txt") => read_xyz(path),
        _ => read_ply(path),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ply_header_layout() {
        let s = PointSet::new(vec![[0.5, -1.0, 2.0]]).unwrap();
        let text = ply_to_string(&s);
        assert_eq!(
            text,
            "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n\
             property float z\nend_header\n0.5 -1 2\n"
        );
    }

    #[test]
    fn ply_roundtrip_is_f32_exact() {
        let s = PointSet::new(vec![[0.1, 0.2, 0.3], [-0.123456789, 1.0, 1e-7]]).unwrap();
        let back = parse_ply(&ply_to_string(&s)).unwrap();
        for (a, b) in s.iter().zip(back.iter()) {
            for k in 0..3 {
                assert_eq!(a[k] as f32, b[k] as f32);
            }
        }
    }

    #[test]
    fn ply_reader_skips_extra_properties_and_elements() {
        let text = "ply\nformat ascii 1.0\ncomment hi\nelement vertex 2\nproperty float x\n\
                    property uchar red\nproperty float y\nproperty float z\n\
                    element face 1\nproperty list uchar int vertex_indices\nend_header\n\
                    1 255 2 3\n4 0 5 6\n3 0 1 0\n";
        let s = parse_ply(text).unwrap();
        assert_eq!(s.points(), &[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]);
    }

    #[test]
    fn ply_reader_rejects_malformed() {
        assert!(parse_ply("plx\n").is_err());
        assert!(parse_ply("ply\nformat binary_little_endian 1.0\nend_header\n").is_err());
        let truncated = "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\n\
                         property float y\nproperty float z\nend_header\n1 2 3\n";
        assert!(parse_ply(truncated).is_err());
        let no_z = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\n\
                    property float y\nend_header\n1 2\n";
        assert!(parse_ply(no_z).is_err());
    }

    #[test]
    fn xyz_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.xyz");
        let s = PointSet::new(vec![[0.1, 0.2, 0.3], [1.0, -2.0, 3.5]]).unwrap();
        write_xyz(&path, &s).unwrap();
        assert_eq!(read_cloud(&path).unwrap(), s);
        fs::write(&path, "1 2\n").unwrap();
        assert!(matches!(read_xyz(&path), Err(Error::MalformedXyz { .. })));
    }
}
