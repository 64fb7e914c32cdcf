//! `GLAI/1` text format for networks, pattern sets and estimators.
//!
//! ```text
//! GLAI/1 network            GLAI/1 patterns          GLAI/1 estimator
//! spec 2 3 2                spec 2 3 2               spec 2 3 2
//! seed 7                    masks 2                  pw 20
//! weights 0 3 2             101                      <one value per line>
//! <3 lines of 2 values>     011
//! biases 0 3
//! <1 line of 3 values>
//! weights 1 2 3 ...
//! ```
//!
//! Reals are written with 17 significant digits (`{:.16e}`), which
//! round-trips every finite `f64` and makes the output canonical. A pattern
//! set stores one 0/1 line per sample per hidden layer.

use std::path::Path;
use std::sync::Arc;

use crate::data::write_atomic;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{Network, NetworkSpec};
use crate::paths::{enumerate_paths_with_cap, LinearEstimator};
use crate::selector::{ActivationPattern, PatternSet};

const MAGIC: &str = "GLAI/1";

/// Any object the format can hold.
#[derive(Debug, Clone, PartialEq)]
pub enum Artifact {
    Network(Network),
    Patterns(PatternSet),
    Estimator(LinearEstimator),
}

impl Artifact {
    pub fn kind(&self) -> &'static str {
        match self {
            Artifact::Network(_) => "network",
            Artifact::Patterns(_) => "patterns",
            Artifact::Estimator(_) => "estimator",
        }
    }
}

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn join_reals(values: &[f64]) -> String {
    values.iter().map(|&v| real(v)).collect::<Vec<_>>().join(" ")
}

fn spec_line(sizes: &[usize]) -> String {
    let s: Vec<String> = sizes.iter().map(usize::to_string).collect();
    format!("spec {}\n", s.join(" "))
}

pub fn network_to_string(net: &Network) -> String {
    let mut out = format!("{MAGIC} network\n");
    out.push_str(&spec_line(net.spec().layer_sizes()));
    out.push_str(&format!("seed {}\n", net.spec().seed()));
    for (l, (w, b)) in net.weights().iter().zip(net.biases()).enumerate() {
        out.push_str(&format!("weights {l} {} {}\n", w.rows(), w.cols()));
        for r in 0..w.rows() {
            out.push_str(&join_reals(w.row(r)));
            out.push('\n');
        }
        out.push_str(&format!("biases {l} {}\n", b.len()));
        out.push_str(&join_reals(b));
        out.push('\n');
    }
    out
}

pub fn patterns_to_string(ps: &PatternSet) -> String {
    let mut out = format!("{MAGIC} patterns\n");
    out.push_str(&spec_line(ps.layer_sizes()));
    out.push_str(&format!("masks {}\n", ps.len()));
    for p in ps.patterns() {
        for mask in p.masks() {
            out.extend(mask.iter().map(|&b| if b { '1' } else { '0' }));
            out.push('\n');
        }
    }
    out
}

pub fn estimator_to_string(est: &LinearEstimator) -> String {
    let mut out = format!("{MAGIC} estimator\n");
    out.push_str(&spec_line(est.table().layer_sizes()));
    out.push_str(&format!("pw {}\n", est.pw().len()));
    for &v in est.pw() {
        out.push_str(&real(v));
        out.push('\n');
    }
    out
}

pub fn to_string(artifact: &Artifact) -> String {
    match artifact {
        Artifact::Network(n) => network_to_string(n),
        Artifact::Patterns(p) => patterns_to_string(p),
        Artifact::Estimator(e) => estimator_to_string(e),
    }
}

/// Writes via a temporary file and rename.
pub fn save(artifact: &Artifact, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, to_string(artifact).as_bytes())
}

pub fn save_network(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, network_to_string(net).as_bytes())
}

pub fn save_patterns(ps: &PatternSet, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, patterns_to_string(ps).as_bytes())
}

pub fn save_estimator(est: &LinearEstimator, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, estimator_to_string(est).as_bytes())
}

pub fn load(path: impl AsRef<Path>) -> Result<Artifact> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_str(&text)
}

fn kind_error(path: &Path, want: &str, got: &Artifact) -> Error {
    Error::Input(format!("{} holds a {}, expected a {want}", path.display(), got.kind()))
}

pub fn load_network(path: impl AsRef<Path>) -> Result<Network> {
    match load(path.as_ref())? {
        Artifact::Network(n) => Ok(n),
        other => Err(kind_error(path.as_ref(), "network", &other)),
    }
}

pub fn load_patterns(path: impl AsRef<Path>) -> Result<PatternSet> {
    match load(path.as_ref())? {
        Artifact::Patterns(p) => Ok(p),
        other => Err(kind_error(path.as_ref(), "patterns", &other)),
    }
}

pub fn load_estimator(path: impl AsRef<Path>) -> Result<LinearEstimator> {
    match load(path.as_ref())? {
        Artifact::Estimator(e) => Ok(e),
        other => Err(kind_error(path.as_ref(), "estimator", &other)),
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
            last: 0,
        }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        match self.inner.next() {
            Some((i, l)) => {
                self.last = i + 1;
                Ok((i + 1, l))
            }
            None => Err(Error::at_line(self.last + 1, format!("unexpected end of file, expected {what}"))),
        }
    }

    /// Next line, which must start with `keyword`; returns its remaining fields.
    fn section(&mut self, keyword: &str) -> Result<(usize, Vec<&'a str>)> {
        let (n, line) = self.next(&format!("`{keyword}` line"))?;
        let mut fields = line.split_whitespace();
        if fields.next() != Some(keyword) {
            return Err(Error::at_line(n, format!("expected `{keyword}`, found `{line}`")));
        }
        Ok((n, fields.collect()))
    }

    fn finish(&mut self) -> Result<()> {
        for (i, l) in self.inner.by_ref() {
            if !l.trim().is_empty() {
                return Err(Error::at_line(i + 1, "trailing content after the last section"));
            }
        }
        Ok(())
    }
}

fn parse_usize(n: usize, s: &str) -> Result<usize> {
    s.parse().map_err(|_| Error::at_line(n, format!("`{s}` is not a count")))
}

fn parse_reals(n: usize, line: &str, expected: usize) -> Result<Vec<f64>> {
    let values: Vec<f64> = line
        .split_whitespace()
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::at_line(n, format!("`{s}` is not a finite real")))
        })
        .collect::<Result<_>>()?;
    if values.len() != expected {
        return Err(Error::at_line(
            n,
            format!("expected {expected} values, found {}", values.len()),
        ));
    }
    Ok(values)
}

fn expect_arity(n: usize, fields: &[&str], arity: usize, keyword: &str) -> Result<()> {
    if fields.len() != arity {
        return Err(Error::at_line(
            n,
            format!("`{keyword}` takes {arity} fields, found {}", fields.len()),
        ));
    }
    Ok(())
}

fn parse_spec(lines: &mut Lines<'_>) -> Result<Vec<usize>> {
    let (n, fields) = lines.section("spec")?;
    let sizes: Vec<usize> = fields.iter().map(|s| parse_usize(n, s)).collect::<Result<_>>()?;
    if sizes.len() < 3 || sizes.contains(&0) {
        return Err(Error::at_line(n, format!("invalid layer sizes {sizes:?}")));
    }
    Ok(sizes)
}

pub fn from_str(text: &str) -> Result<Artifact> {
    let mut lines = Lines::new(text);
    let (_, header) = lines.next("header")?;
    let mut fields = header.split_whitespace();
    let magic = fields.next().unwrap_or("");
    if magic != MAGIC {
        if magic.starts_with("GLAI/") {
            return Err(Error::Version(magic.to_string()));
        }
        return Err(Error::at_line(1, format!("bad magic `{header}`")));
    }
    let kind = fields.next().unwrap_or("");
    if fields.next().is_some() {
        return Err(Error::at_line(1, "header takes exactly a magic and a kind"));
    }
    let artifact = match kind {
        "network" => Artifact::Network(parse_network(&mut lines)?),
        "patterns" => Artifact::Patterns(parse_patterns(&mut lines)?),
        "estimator" => Artifact::Estimator(parse_estimator(&mut lines)?),
        other => return Err(Error::at_line(1, format!("unknown kind `{other}`"))),
    };
    lines.finish()?;
    Ok(artifact)
}

fn parse_network(lines: &mut Lines<'_>) -> Result<Network> {
    let sizes = parse_spec(lines)?;
    let (n, fields) = lines.section("seed")?;
    expect_arity(n, &fields, 1, "seed")?;
    let seed: u64 = fields[0]
        .parse()
        .map_err(|_| Error::at_line(n, format!("`{}` is not a u64 seed", fields[0])))?;
    let spec = NetworkSpec::new(sizes.clone(), seed)?;

    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in 0..spec.depth() {
        let (n, fields) = lines.section("weights")?;
        expect_arity(n, &fields, 3, "weights")?;
        let (layer, rows, cols) = (
            parse_usize(n, fields[0])?,
            parse_usize(n, fields[1])?,
            parse_usize(n, fields[2])?,
        );
        if (layer, rows, cols) != (l, sizes[l + 1], sizes[l]) {
            return Err(Error::at_line(
                n,
                format!(
                    "expected `weights {l} {} {}`, found `weights {layer} {rows} {cols}`",
                    sizes[l + 1],
                    sizes[l]
                ),
            ));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let (ln, line) = lines.next("weight row").map_err(|_| {
                Error::at_line(
                    n,
                    format!("weights block {l} truncated: expected {rows} rows, found {r}"),
                )
            })?;
            if line.starts_with("biases") || line.starts_with("weights") {
                return Err(Error::at_line(
                    ln,
                    format!("weights block {l} truncated: expected {rows} rows, found {r}"),
                ));
            }
            data.extend(parse_reals(ln, line, cols)?);
        }
        weights.push(Matrix::from_vec(rows, cols, data)?);

        let (n, fields) = lines.section("biases")?;
        expect_arity(n, &fields, 2, "biases")?;
        let (layer, len) = (parse_usize(n, fields[0])?, parse_usize(n, fields[1])?);
        if (layer, len) != (l, sizes[l + 1]) {
            return Err(Error::at_line(
                n,
                format!("expected `biases {l} {}`, found `biases {layer} {len}`", sizes[l + 1]),
            ));
        }
        let (ln, line) = lines.next("bias values")?;
        biases.push(parse_reals(ln, line, len)?);
    }
    Network::from_parts(spec, weights, biases)
}

fn parse_patterns(lines: &mut Lines<'_>) -> Result<PatternSet> {
    let sizes = parse_spec(lines)?;
    let hidden = sizes[1..sizes.len() - 1].to_vec();
    let (n, fields) = lines.section("masks")?;
    expect_arity(n, &fields, 1, "masks")?;
    let count = parse_usize(n, fields[0])?;
    let mut patterns = Vec::with_capacity(count);
    for s in 0..count {
        let mut masks = Vec::with_capacity(hidden.len());
        for (l, &h) in hidden.iter().enumerate() {
            let (ln, line) = lines.next("mask line").map_err(|_| {
                Error::at_line(
                    n,
                    format!("masks block truncated: expected {count} samples, found {s}"),
                )
            })?;
            let bits: Vec<bool> = line
                .chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    other => Err(Error::at_line(ln, format!("mask character `{other}` is not 0/1"))),
                })
                .collect::<Result<_>>()?;
            if bits.len() != h {
                return Err(Error::at_line(
                    ln,
                    format!("hidden layer {l} mask has {} bits, expected {h}", bits.len()),
                ));
            }
            masks.push(bits);
        }
        patterns.push(ActivationPattern::new(masks));
    }
    PatternSet::new(sizes, patterns)
}

fn parse_estimator(lines: &mut Lines<'_>) -> Result<LinearEstimator> {
    let sizes = parse_spec(lines)?;
    let (n, fields) = lines.section("pw")?;
    expect_arity(n, &fields, 1, "pw")?;
    let count = parse_usize(n, fields[0])?;
    let (full, bias) = crate::paths::path_counts(&sizes);
    if u128::from(count as u64) != full + bias {
        return Err(Error::at_line(
            n,
            format!("architecture {sizes:?} has {} paths, file declares {count}", full + bias),
        ));
    }
    let table = enumerate_paths_with_cap(&sizes, count.max(1))?;
    let mut pw = Vec::with_capacity(count);
    for k in 0..count {
        let (ln, line) = lines.next("path weight").map_err(|_| {
            Error::at_line(n, format!("pw block truncated: expected {count} values, found {k}"))
        })?;
        pw.extend(parse_reals(ln, line, 1)?);
    }
    LinearEstimator::new(Arc::new(table), pw)
}
