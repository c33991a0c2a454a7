//! Text formats: field snapshots, CSV tables and JSON reports, all
//! deterministic byte-for-byte and stamped with the run digest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fourier::{FourierField, SymmetryClass};

const FIELD_FORMAT: &str = "vortex-pair-field 1";
const LINE_FORMAT: &str = "vortex-pair-line 1";

/// Canonical float text: 17 significant digits in exponent form; `-0` prints as `0`.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        return format!("{:.16e}", 0.0);
    }
    format!("{x:.16e}")
}

pub fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Parse(format!("`{s}` is not a number")))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Header line carried by every text output.
pub fn digest_header(run_digest: &str) -> String {
    format!("# run sha256:{run_digest}\n")
}

/// Ordered `key value` metadata lines of a snapshot.
pub type Meta = BTreeMap<String, String>;

/// Two-dimensional snapshot: the half-lattice `j > 0`, plus `j = 0, k >= 0`.
pub fn write_field(field: &FourierField, meta: &Meta, run_digest: &str) -> String {
    let mut out = digest_header(run_digest);
    let _ = writeln!(out, "format {FIELD_FORMAT}");
    let _ = writeln!(out, "j_max {}", field.j_max());
    let _ = writeln!(out, "k_max {}", field.k_max());
    let tag = field.symmetry.map(|s| s.tag()).unwrap_or_else(|| SymmetryClass::None.tag());
    let _ = writeln!(out, "symmetry {tag}");
    for (k, v) in meta {
        let _ = writeln!(out, "meta {k} {v}");
    }
    out.push_str("records j k re_x im_x re_y im_y\n");
    let (jm, km) = (field.j_max() as i64, field.k_max() as i64);
    for j in 0..=jm {
        let k_lo = if j == 0 { 0 } else { -km };
        for k in k_lo..=km {
            let (x, y) = field.get(j, k);
            let _ = writeln!(out, "{j} {k} {} {} {} {}", fmt_f64(x.re), fmt_f64(x.im), fmt_f64(y.re), fmt_f64(y.im));
        }
    }
    out
}

/// Lines of a snapshot with the digest comment and blank lines removed.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn header_value<'a>(line: Option<(usize, &'a str)>, key: &str) -> Result<&'a str> {
    let (n, l) = line.ok_or_else(|| Error::Parse(format!("snapshot ends before `{key}`")))?;
    l.strip_prefix(key)
        .and_then(|r| r.strip_prefix(' '))
        .map(str::trim)
        .ok_or_else(|| Error::Parse(format!("line {n}: expected `{key} ...`, found `{l}`")))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.parse().map_err(|_| Error::Parse(format!("`{s}` is not a nonnegative integer")))
}

fn parse_meta<'a>(lines: &mut std::iter::Peekable<impl Iterator<Item = (usize, &'a str)>>) -> Result<Meta> {
    let mut meta = Meta::new();
    while let Some(&(n, l)) = lines.peek() {
        let Some(rest) = l.strip_prefix("meta ") else { break };
        let (k, v) = rest.split_once(' ').ok_or_else(|| Error::Parse(format!("line {n}: meta needs a key and a value")))?;
        meta.insert(k.to_string(), v.trim().to_string());
        lines.next();
    }
    Ok(meta)
}

fn numbers<const N: usize>(n: usize, l: &str) -> Result<[f64; N]> {
    let parts: Vec<&str> = l.split_whitespace().collect();
    if parts.len() != N {
        return Err(Error::Parse(format!("line {n}: expected {N} columns, found {}", parts.len())));
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = parse_f64(p)?;
    }
    Ok(out)
}

/// Parses [`write_field`] output; missing half-lattice entries are filled by reality.
pub fn read_field(text: &str) -> Result<(FourierField, Meta)> {
    let mut lines = content_lines(text).peekable();
    if header_value(lines.next(), "format")? != FIELD_FORMAT {
        return Err(Error::Parse(format!("not a `{FIELD_FORMAT}` snapshot")));
    }
    let jm = parse_usize(header_value(lines.next(), "j_max")?)?;
    let km = parse_usize(header_value(lines.next(), "k_max")?)?;
    let symmetry = SymmetryClass::parse(header_value(lines.next(), "symmetry")?)?;
    let meta = parse_meta(&mut lines)?;
    header_value(lines.next(), "records")?;
    let mut field = FourierField::zeros(jm, km);
    for (n, l) in lines {
        let [j, k, xr, xi, yr, yi] = numbers::<6>(n, l)?;
        let (j, k) = (j as i64, k as i64);
        if j < 0 || !field.in_box(j, k) {
            return Err(Error::Parse(format!("line {n}: site ({j},{k}) outside the stored half-lattice")));
        }
        let (x, y) = (Complex64::new(xr, xi), Complex64::new(yr, yi));
        field.set(j, k, x, y);
        field.set(-j, -k, x.conj(), y.conj());
    }
    field.symmetry = match symmetry {
        SymmetryClass::None => None,
        s => Some(s),
    };
    Ok((field, meta))
}

/// One-dimensional snapshot of named complex coefficient arrays `c[k + modes]`.
/// Each array is stored as the `x`, `y` components of a complex-valued line
/// function for `k >= 0`.
pub fn write_line(modes: usize, fields: &[(&str, &[Complex64])], meta: &Meta, run_digest: &str) -> String {
    let mut out = digest_header(run_digest);
    let _ = writeln!(out, "format {LINE_FORMAT}");
    let _ = writeln!(out, "modes {modes}");
    for (k, v) in meta {
        let _ = writeln!(out, "meta {k} {v}");
    }
    let m = modes as i64;
    for (name, c) in fields {
        let _ = writeln!(out, "field {name} k re_x im_x re_y im_y");
        for k in 0..=m {
            let (p, q) = (c[(k + m) as usize], c[(m - k) as usize].conj());
            let x = (p + q) * 0.5;
            let y = (p - q) * Complex64::new(0.0, -0.5);
            let _ = writeln!(out, "{k} {} {} {} {}", fmt_f64(x.re), fmt_f64(x.im), fmt_f64(y.re), fmt_f64(y.im));
        }
    }
    out
}

/// Named arrays of a one-dimensional snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct LineSnapshot {
    pub modes: usize,
    pub meta: Meta,
    pub fields: Vec<(String, Vec<Complex64>)>,
}

impl LineSnapshot {
    pub fn field(&self, name: &str) -> Option<&[Complex64]> {
        self.fields.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_slice())
    }

    pub fn meta_f64(&self, key: &str) -> Result<f64> {
        parse_f64(self.meta.get(key).ok_or_else(|| Error::Parse(format!("snapshot lacks meta `{key}`")))?)
    }
}

pub fn read_line(text: &str) -> Result<LineSnapshot> {
    let mut lines = content_lines(text).peekable();
    if header_value(lines.next(), "format")? != LINE_FORMAT {
        return Err(Error::Parse(format!("not a `{LINE_FORMAT}` snapshot")));
    }
    let modes = parse_usize(header_value(lines.next(), "modes")?)?;
    let meta = parse_meta(&mut lines)?;
    let m = modes as i64;
    let mut fields: Vec<(String, Vec<Complex64>)> = Vec::new();
    for (n, l) in lines {
        if let Some(rest) = l.strip_prefix("field ") {
            let name = rest.split_whitespace().next().unwrap_or_default().to_string();
            fields.push((name, vec![Complex64::new(0.0, 0.0); 2 * modes + 1]));
            continue;
        }
        let (_, c) = fields.last_mut().ok_or_else(|| Error::Parse(format!("line {n}: record before any `field` line")))?;
        let [k, xr, xi, yr, yi] = numbers::<5>(n, l)?;
        let k = k as i64;
        if !(0..=m).contains(&k) {
            return Err(Error::Parse(format!("line {n}: mode {k} outside 0..={m}")));
        }
        let (x, y) = (Complex64::new(xr, xi), Complex64::new(yr, yi));
        c[(m + k) as usize] = x + Complex64::i() * y;
        c[(m - k) as usize] = x.conj() + Complex64::i() * y.conj();
    }
    Ok(LineSnapshot { modes, meta, fields })
}

/// CSV text with the digest header; every cell is preformatted.
pub fn write_csv(header: &[&str], rows: &[Vec<String>], run_digest: &str) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    let body = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let mut out = digest_header(run_digest);
    out.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
    Ok(out)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Reads a CSV written by [`write_csv`], skipping comment lines.
pub fn read_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.map(|r| r.iter().map(String::from).collect())).collect::<std::result::Result<_, _>>().map_err(csv_err)?;
    Ok((header, rows))
}

/// Pretty JSON with `run_digest` inserted as the first key.
pub fn write_json<T: Serialize>(value: &T, run_digest: &str) -> Result<String> {
    let mut map = serde_json::Map::new();
    map.insert("run_digest".into(), serde_json::Value::String(run_digest.into()));
    match serde_json::to_value(value).map_err(|e| Error::Parse(e.to_string()))? {
        serde_json::Value::Object(o) => map.extend(o),
        other => {
            map.insert("value".into(), other);
        }
    }
    let mut s = serde_json::to_string_pretty(&serde_json::Value::Object(map)).map_err(|e| Error::Parse(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

#[derive(Clone, Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Record of one command invocation.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub args: Vec<String>,
    pub threads: usize,
    /// Resolved configuration after file and flag overrides.
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    /// Digest of tool, version, command, threads, config and input contents;
    /// stamped into every output file.
    pub run_digest: String,
    pub outputs: Vec<FileDigest>,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn new(command: &str, args: Vec<String>, threads: usize, config: serde_json::Value, inputs: Vec<FileDigest>) -> Self {
        let mut m = Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            args,
            threads,
            config,
            inputs,
            run_digest: String::new(),
            outputs: Vec::new(),
            wall_clock_seconds: 0.0,
        };
        // Raw argv and input paths are left out so that moving the output
        // directory or an input file does not change the digest.
        let inputs: Vec<&str> = m.inputs.iter().map(|i| i.sha256.as_str()).collect();
        let identity = serde_json::json!({
            "tool": m.tool, "version": m.version, "command": m.command,
            "threads": m.threads, "config": m.config, "inputs": inputs,
        });
        m.run_digest = sha256_hex(identity.to_string().as_bytes());
        m
    }
}

/// Writes `files` into `dir` (created if needed) and then `manifest.json`.
pub fn write_outputs(dir: &Path, files: &[(String, String)], manifest: &mut RunManifest) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(files.len() + 1);
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        manifest.outputs.push(FileDigest { path: name.clone(), sha256: sha256_hex(body.as_bytes()) });
        paths.push(path);
    }
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(manifest).map_err(|e| Error::Parse(e.to_string()))?;
    text.push('\n');
    std::fs::write(&path, text)?;
    paths.push(path);
    Ok(paths)
}
