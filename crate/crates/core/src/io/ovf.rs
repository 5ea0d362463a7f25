//! OVF 2.0 text snapshots, plus a strict reader used to check them.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::mesh::Mesh;
use crate::vec3::Vec3;

fn num(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if (1e-5..1e6).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Serializes `m` as a single-segment OVF 2.0 text file. Cells are written
/// x fastest, then y, then z; vacuum cells are zero vectors.
pub fn ovf_string(m: &VectorField, title: &str) -> String {
    let mesh = &m.mesh;
    let [ex, ey, ez] = mesh.extent();
    let o = mesh.origin;
    let mut out = String::with_capacity(64 * (m.data.len() + 40));
    let header: [(&str, String); 22] = [
        ("Title", title.to_string()),
        ("meshtype", "rectangular".into()),
        ("meshunit", "m".into()),
        ("xmin", num(o[0])),
        ("ymin", num(o[1])),
        ("zmin", num(o[2])),
        ("xmax", num(o[0] + ex)),
        ("ymax", num(o[1] + ey)),
        ("zmax", num(o[2] + ez)),
        ("valuedim", "3".into()),
        ("valuelabels", "m_x m_y m_z".into()),
        ("valueunits", "1 1 1".into()),
        ("xbase", num(o[0] + 0.5 * mesh.dx)),
        ("ybase", num(o[1] + 0.5 * mesh.dy)),
        ("zbase", num(o[2] + 0.5 * mesh.dz)),
        ("xnodes", mesh.nx.to_string()),
        ("ynodes", mesh.ny.to_string()),
        ("znodes", mesh.nz.to_string()),
        ("xstepsize", num(mesh.dx)),
        ("ystepsize", num(mesh.dy)),
        ("zstepsize", num(mesh.dz)),
        ("Desc", "reduced magnetization".into()),
    ];
    out.push_str("# OOMMF OVF 2.0\n# Segment count: 1\n# Begin: Segment\n# Begin: Header\n");
    for (k, v) in header {
        let _ = writeln!(out, "# {k}: {v}");
    }
    out.push_str("# End: Header\n# Begin: Data Text\n");
    for v in &m.data {
        let _ = writeln!(out, "{} {} {}", num(v.x), num(v.y), num(v.z));
    }
    out.push_str("# End: Data Text\n# End: Segment\n");
    out
}

pub fn write_snapshot(m: &VectorField, path: &Path, title: &str) -> Result<()> {
    super::csv::write_text(path, &ovf_string(m, title))
}

/// Contents of a parsed OVF 2.0 text file.
#[derive(Debug, Clone, PartialEq)]
pub struct OvfData {
    pub header: HashMap<String, String>,
    pub mesh: Mesh,
    pub values: Vec<Vec3>,
}

fn bad(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("OVF line {line}: {msg}"))
}

/// Skips blank comment lines and the segment count, then requires `want`.
fn expect<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, want: &str) -> Result<()> {
    for (n, l) in lines.by_ref() {
        let body = l.trim_start_matches('#').trim();
        if body.is_empty() || l.starts_with("##") {
            continue;
        }
        if let Some(rest) = body.strip_prefix("Segment count:") {
            if rest.trim() != "1" {
                return Err(bad(n, "only single-segment files are supported"));
            }
            continue;
        }
        return if body.eq_ignore_ascii_case(want) {
            Ok(())
        } else {
            Err(bad(n, format!("expected `{want}`, found `{l}`")))
        };
    }
    Err(Error::Parse(format!("OVF: missing `{want}`")))
}

/// Reads a single-segment rectangular OVF 2.0 file with a text data block,
/// checking the structure the format requires.
pub fn read_ovf(text: &str) -> Result<OvfData> {
    const REQUIRED: [&str; 16] = [
        "meshtype", "meshunit", "xmin", "ymin", "zmin", "xmax", "ymax", "zmax", "valuedim", "xbase", "ybase",
        "zbase", "xnodes", "ynodes", "znodes", "xstepsize",
    ];
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end()));
    match lines.next() {
        Some((_, l)) if l.eq_ignore_ascii_case("# OOMMF OVF 2.0") => {}
        _ => return Err(bad(1, "missing `# OOMMF OVF 2.0` signature")),
    }
    expect(&mut lines, "Begin: Segment")?;
    expect(&mut lines, "Begin: Header")?;

    let mut header = HashMap::new();
    let mut data_line = None;
    for (n, l) in lines.by_ref() {
        if !l.starts_with('#') {
            return Err(bad(n, "content line inside header"));
        }
        let body = l.trim_start_matches('#').trim();
        if body.is_empty() || l.starts_with("##") {
            continue;
        }
        if body.eq_ignore_ascii_case("End: Header") {
            data_line = Some(n);
            break;
        }
        let (k, v) = body.split_once(':').ok_or_else(|| bad(n, "header line without `key: value`"))?;
        header.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
    }
    let header_end = data_line.ok_or_else(|| Error::Parse("OVF: header never ends".into()))?;
    for key in REQUIRED.iter().chain(["ystepsize", "zstepsize"].iter()) {
        if !header.contains_key(*key) {
            return Err(bad(header_end, format!("required header key `{key}` missing")));
        }
    }
    if header["meshtype"] != "rectangular" {
        return Err(bad(header_end, "only rectangular meshes are supported"));
    }
    if header["valuedim"] != "3" {
        return Err(bad(header_end, "valuedim must be 3"));
    }
    let count = |k: &str| -> Result<usize> {
        header[k]
            .parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| bad(header_end, format!("`{k}` must be a positive integer")))
    };
    let float = |k: &str| -> Result<f64> {
        header[k].parse::<f64>().map_err(|_| bad(header_end, format!("`{k}` is not a number")))
    };
    let n = [count("xnodes")?, count("ynodes")?, count("znodes")?];
    let d = [float("xstepsize")?, float("ystepsize")?, float("zstepsize")?];
    let mut mesh = Mesh::new(n, d)?;
    mesh.origin = [float("xmin")?, float("ymin")?, float("zmin")?];
    let ext = mesh.extent();
    for (axis, k) in ["xmax", "ymax", "zmax"].iter().enumerate() {
        let max = float(k)?;
        if ((mesh.origin[axis] + ext[axis]) - max).abs() > 1e-9 * max.abs().max(d[axis]) {
            return Err(bad(header_end, format!("`{k}` disagrees with nodes x stepsize")));
        }
    }

    let mut begin = None;
    for (ln, l) in lines.by_ref() {
        let body = l.trim_start_matches('#').trim();
        if body.is_empty() || l.starts_with("##") {
            continue;
        }
        begin = Some((ln, body.to_string()));
        break;
    }
    match begin {
        Some((_, b)) if b.eq_ignore_ascii_case("Begin: Data Text") => {}
        Some((ln, b)) => return Err(bad(ln, format!("expected `Begin: Data Text`, found `{b}`"))),
        None => return Err(Error::Parse("OVF: missing data block".into())),
    }

    let mut values = Vec::with_capacity(mesh.len());
    let mut closed = false;
    for (ln, l) in lines.by_ref() {
        if l.starts_with('#') {
            let body = l.trim_start_matches('#').trim();
            if body.eq_ignore_ascii_case("End: Data Text") {
                closed = true;
                break;
            }
            continue;
        }
        if l.trim().is_empty() {
            continue;
        }
        let nums: Vec<f64> = l
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| bad(ln, format!("`{t}` is not a number"))))
            .collect::<Result<_>>()?;
        if nums.len() != 3 {
            return Err(bad(ln, format!("expected 3 values, found {}", nums.len())));
        }
        values.push(Vec3::new(nums[0], nums[1], nums[2]));
    }
    if !closed {
        return Err(Error::Parse("OVF: data block not terminated".into()));
    }
    if values.len() != mesh.len() {
        return Err(Error::Parse(format!(
            "OVF: {} data lines for {} cells",
            values.len(),
            mesh.len()
        )));
    }
    expect(&mut lines, "End: Segment")?;
    Ok(OvfData { header, mesh, values })
}
