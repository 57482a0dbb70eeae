//! Point cloud files: `.xyz` text and ASCII PLY.
//!
//! `.xyz` holds one point per line as three whitespace-separated reals; blank
//! lines and `#` comments are skipped. PLY files must be `format ascii 1.0`
//! with a `vertex` element carrying `x`, `y` and `z` properties; any other
//! vertex properties and any other elements are ignored.

use std::fs;
use std::io::Write;
use std::path::Path;

use pointsim::{Point3, PointCloud};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Xyz,
    Ply,
}

impl Format {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("xyz") => Ok(Format::Xyz),
            Some("ply") => Ok(Format::Ply),
            _ => Err(CliError::Config(format!("{}: unknown point cloud extension (expected .xyz or .ply)", path.display()))),
        }
    }
}

pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    let format = Format::from_path(path)?;
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let points = match format {
        Format::Xyz => parse_xyz(&text),
        Format::Ply => parse_ply(&text),
    }
    .map_err(|(line, msg)| CliError::Parse { path: path.to_path_buf(), line, msg })?;
    PointCloud::new(points).map_err(|e| match e {
        pointsim::Error::EmptyCloud => CliError::Parse { path: path.to_path_buf(), line: 0, msg: "no points".into() },
        other => other.into(),
    })
}

pub fn write_cloud(cloud: &PointCloud, path: &Path) -> Result<()> {
    let format = Format::from_path(path)?;
    let mut out = String::with_capacity(cloud.len() * 64);
    if format == Format::Ply {
        out.push_str(&format!(
            "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
            cloud.len()
        ));
    }
    for p in cloud.points() {
        // `{:?}` prints the shortest string that parses back to the same f64.
        out.push_str(&format!("{:?} {:?} {:?}\n", p.x, p.y, p.z));
    }
    let mut f = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| CliError::io(path, e))
}

type ParseResult<T> = std::result::Result<T, (usize, String)>;

fn parse_coord(tok: &str, line: usize) -> ParseResult<f64> {
    tok.parse::<f64>().map_err(|_| (line, format!("not a number: {tok:?}")))
}

pub fn parse_xyz(text: &str) -> ParseResult<Vec<Point3>> {
    let mut pts = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let toks: Vec<&str> = body.split_whitespace().collect();
        if toks.len() != 3 {
            return Err((line, format!("expected 3 coordinates, found {}", toks.len())));
        }
        pts.push(Point3::new(parse_coord(toks[0], line)?, parse_coord(toks[1], line)?, parse_coord(toks[2], line)?));
    }
    Ok(pts)
}

struct Element {
    name: String,
    count: usize,
    props: Vec<String>,
    has_list: bool,
}

pub fn parse_ply(text: &str) -> ParseResult<Vec<Point3>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        Some((n, _)) => return Err((n, "missing 'ply' magic".into())),
        None => return Err((1, "empty file".into())),
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut saw_format = false;
    let mut header_end = 0;
    for (n, l) in lines.by_ref() {
        let toks: Vec<&str> = l.split_whitespace().collect();
        match toks.as_slice() {
            ["format", "ascii", "1.0"] => saw_format = true,
            ["format", ..] => return Err((n, format!("unsupported format: {l}"))),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => {
                let count = count.parse().map_err(|_| (n, format!("bad element count: {count}")))?;
                elements.push(Element { name: name.to_string(), count, props: Vec::new(), has_list: false });
            }
            ["property", "list", ..] => {
                let e = elements.last_mut().ok_or((n, "property before element".to_string()))?;
                e.has_list = true;
                e.props.push(toks.last().unwrap().to_string());
            }
            ["property", _ty, name] => {
                let e = elements.last_mut().ok_or((n, "property before element".to_string()))?;
                e.props.push(name.to_string());
            }
            ["end_header"] => {
                header_end = n;
                break;
            }
            _ => return Err((n, format!("unrecognized header line: {l}"))),
        }
    }
    if header_end == 0 {
        return Err((text.lines().count().max(1), "missing end_header".into()));
    }
    if !saw_format {
        return Err((header_end, "missing 'format ascii 1.0' line".into()));
    }
    let mut points = Vec::new();
    for e in &elements {
        let axes = if e.name == "vertex" {
            let find = |a: &str| e.props.iter().position(|p| p == a);
            match (find("x"), find("y"), find("z")) {
                (Some(x), Some(y), Some(z)) if !e.has_list => Some([x, y, z]),
                _ => return Err((header_end, "vertex element needs scalar x, y and z properties".into())),
            }
        } else {
            None
        };
        for _ in 0..e.count {
            let (n, l) = lines.next().ok_or((text.lines().count(), format!("file ends inside element {}", e.name)))?;
            if let Some([x, y, z]) = axes {
                let toks: Vec<&str> = l.split_whitespace().collect();
                if toks.len() != e.props.len() {
                    return Err((n, format!("expected {} values, found {}", e.props.len(), toks.len())));
                }
                points.push(Point3::new(parse_coord(toks[x], n)?, parse_coord(toks[y], n)?, parse_coord(toks[z], n)?));
            }
        }
    }
    Ok(points)
}
