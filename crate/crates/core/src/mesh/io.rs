//! OFF, ASCII PLY and OBJ readers; OFF writer.
//!
//! Polygons with more than three corners are fan-triangulated. Vertex order is
//! preserved exactly as it appears in the file.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{TriMesh, Vec3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    PlyAscii,
    Obj,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .unwrap_or_default();
        match ext.as_str() {
            "off" => Ok(MeshFormat::Off),
            "ply" => Ok(MeshFormat::PlyAscii),
            "obj" => Ok(MeshFormat::Obj),
            _ => Err(Error::UnsupportedFormat(path.display().to_string())),
        }
    }
}

/// Loads a mesh, inferring the format from the extension when `format` is `None`.
pub fn load_mesh(path: impl AsRef<Path>, format: Option<MeshFormat>) -> Result<TriMesh> {
    let path = path.as_ref();
    let format = match format {
        Some(f) => f,
        None => MeshFormat::from_path(path)?,
    };
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_mesh(&text, format)
}

pub fn read_mesh(text: &str, format: MeshFormat) -> Result<TriMesh> {
    let (vertices, faces) = match format {
        MeshFormat::Off => parse_off(text)?,
        MeshFormat::PlyAscii => parse_ply(text)?,
        MeshFormat::Obj => parse_obj(text)?,
    };
    TriMesh::new(vertices, faces.into_iter().map(|(f, _)| f).collect())
}

fn perr(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Content lines with 1-based line numbers, comments stripped.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.parse()
        .map_err(|_| perr(line, format!("cannot parse number {tok:?}")))
}

type Faces = Vec<([usize; 3], usize)>;

fn push_polygon(poly: &[usize], n: usize, line: usize, out: &mut Faces) -> Result<()> {
    if poly.len() < 3 {
        return Err(perr(line, format!("face with {} vertices", poly.len())));
    }
    for (i, &v) in poly.iter().enumerate() {
        if v >= n {
            return Err(perr(line, format!("vertex index {v} out of range ({n} vertices)")));
        }
        if poly[..i].contains(&v) {
            return Err(perr(line, format!("face repeats vertex {v}")));
        }
    }
    for i in 1..poly.len() - 1 {
        out.push(([poly[0], poly[i], poly[i + 1]], line));
    }
    Ok(())
}

fn parse_off(text: &str) -> Result<(Vec<Vec3>, Faces)> {
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or_else(|| perr(1, "empty file"))?;
    let mut rest: Vec<&str> = header.split_whitespace().collect();
    if rest.first().map(|t| t.eq_ignore_ascii_case("OFF")) != Some(true) {
        return Err(perr(hline, "missing OFF header"));
    }
    rest.remove(0);
    let (cline, counts) = if rest.is_empty() {
        let (l, c) = lines.next().ok_or_else(|| perr(hline, "missing counts"))?;
        (l, c.split_whitespace().collect::<Vec<_>>())
    } else {
        (hline, rest)
    };
    if counts.len() < 2 {
        return Err(perr(cline, "expected vertex and face counts"));
    }
    let nv: usize = parse_num(counts[0], cline)?;
    let nf: usize = parse_num(counts[1], cline)?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (l, s) = lines.next().ok_or_else(|| perr(cline, "unexpected end of vertex list"))?;
        let t: Vec<&str> = s.split_whitespace().collect();
        if t.len() < 3 {
            return Err(perr(l, "vertex needs 3 coordinates"));
        }
        vertices.push(Vec3::new(
            parse_num(t[0], l)?,
            parse_num(t[1], l)?,
            parse_num(t[2], l)?,
        ));
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (l, s) = lines.next().ok_or_else(|| perr(cline, "unexpected end of face list"))?;
        let t: Vec<&str> = s.split_whitespace().collect();
        let count: usize = parse_num(t[0], l)?;
        if t.len() < count + 1 {
            return Err(perr(l, format!("face declares {count} vertices, found {}", t.len() - 1)));
        }
        let poly = t[1..=count]
            .iter()
            .map(|x| parse_num(x, l))
            .collect::<Result<Vec<usize>>>()?;
        push_polygon(&poly, nv, l, &mut faces)?;
    }
    Ok((vertices, faces))
}

fn parse_ply(text: &str) -> Result<(Vec<Vec3>, Faces)> {
    struct Element {
        name: String,
        count: usize,
        props: Vec<String>,
        line: usize,
    }
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(perr(1, "missing ply magic")),
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut saw_format = false;
    loop {
        let (l, s) = lines.next().ok_or_else(|| perr(1, "unterminated header"))?;
        let t: Vec<&str> = s.split_whitespace().collect();
        match t.first().copied() {
            Some("format") => {
                if t.get(1) != Some(&"ascii") {
                    return Err(Error::UnsupportedFormat(format!(
                        "PLY format {:?} (only ascii is supported)",
                        t.get(1).unwrap_or(&"")
                    )));
                }
                saw_format = true;
            }
            Some("element") => {
                if t.len() < 3 {
                    return Err(perr(l, "malformed element line"));
                }
                elements.push(Element {
                    name: t[1].to_string(),
                    count: parse_num(t[2], l)?,
                    props: Vec::new(),
                    line: l,
                });
            }
            Some("property") => {
                let el = elements.last_mut().ok_or_else(|| perr(l, "property before element"))?;
                el.props.push(t.last().unwrap().to_string());
            }
            Some("end_header") => break,
            Some("comment") | Some("obj_info") | None => {}
            Some(other) => return Err(perr(l, format!("unknown header keyword {other:?}"))),
        }
    }
    if !saw_format {
        return Err(perr(1, "missing format line"));
    }

    let mut body = lines.filter(|(_, s)| !s.is_empty());
    let mut vertices = Vec::new();
    let mut raw_faces: Vec<(Vec<usize>, usize)> = Vec::new();
    for el in &elements {
        for _ in 0..el.count {
            let (l, s) = body
                .next()
                .ok_or_else(|| perr(el.line, format!("missing {} data", el.name)))?;
            let t: Vec<&str> = s.split_whitespace().collect();
            match el.name.as_str() {
                "vertex" => {
                    let mut xyz = [0.0; 3];
                    for (c, axis) in ["x", "y", "z"].iter().enumerate() {
                        let idx = el
                            .props
                            .iter()
                            .position(|p| p == axis)
                            .ok_or_else(|| perr(el.line, format!("vertex lacks {axis}")))?;
                        let tok = t.get(idx).ok_or_else(|| perr(l, "short vertex line"))?;
                        xyz[c] = parse_num(tok, l)?;
                    }
                    vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
                }
                "face" => {
                    let count: usize = parse_num(t.first().ok_or_else(|| perr(l, "empty face"))?, l)?;
                    if t.len() < count + 1 {
                        return Err(perr(l, "short face line"));
                    }
                    let poly = t[1..=count]
                        .iter()
                        .map(|x| parse_num(x, l))
                        .collect::<Result<Vec<usize>>>()?;
                    raw_faces.push((poly, l));
                }
                _ => {}
            }
        }
    }
    let mut faces = Vec::new();
    for (poly, l) in raw_faces {
        push_polygon(&poly, vertices.len(), l, &mut faces)?;
    }
    Ok((vertices, faces))
}

fn parse_obj(text: &str) -> Result<(Vec<Vec3>, Faces)> {
    let mut vertices = Vec::new();
    let mut raw_faces: Vec<(Vec<i64>, usize)> = Vec::new();
    for (l, s) in content_lines(text) {
        let mut t = s.split_whitespace();
        match t.next() {
            Some("v") => {
                let c: Vec<f64> = t.take(3).map(|x| parse_num(x, l)).collect::<Result<_>>()?;
                if c.len() < 3 {
                    return Err(perr(l, "vertex needs 3 coordinates"));
                }
                vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx = t
                    .map(|x| parse_num::<i64>(x.split('/').next().unwrap_or(""), l))
                    .collect::<Result<Vec<_>>>()?;
                raw_faces.push((idx, l));
            }
            _ => {}
        }
    }
    let n = vertices.len();
    let mut faces = Vec::new();
    for (idx, l) in raw_faces {
        let poly = idx
            .iter()
            .map(|&i| match i {
                i if i > 0 => Ok(i as usize - 1),
                i if i < 0 && (-i) as usize <= n => Ok(n - (-i) as usize),
                _ => Err(perr(l, format!("invalid vertex index {i}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        push_polygon(&poly, n, l, &mut faces)?;
    }
    Ok((vertices, faces))
}

/// OFF text with 17 significant digits per coordinate.
pub fn off_string(mesh: &TriMesh) -> String {
    let mut s = String::with_capacity(mesh.num_vertices() * 72);
    s.push_str("OFF\n");
    s.push_str(&format!("{} {} 0\n", mesh.num_vertices(), mesh.num_faces()));
    for v in mesh.vertices() {
        s.push_str(&format!("{:.16e} {:.16e} {:.16e}\n", v.x, v.y, v.z));
    }
    for f in mesh.faces() {
        s.push_str(&format!("3 {} {} {}\n", f[0], f[1], f[2]));
    }
    s
}

pub fn write_off(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(off_string(mesh).as_bytes())
        .map_err(|e| Error::io(path, e))
}
