//! Plain-text model files.
//!
//! ```text
//! NOISENSE-MODEL 1
//! dimension <d>
//! shift <d reals>
//! scale <d reals>
//! classes <k> <label>...
//! pairs <k(k-1)/2>
//! pair <positive> <negative>
//! gamma <real>
//! penalty <real>
//! bias <real>
//! support_vectors <n>
//! <alpha_signed> <v1> ... <vd>      (n rows)
//! ...                               (one block per pair)
//! ```
//!
//! Reals are written with 17 significant digits so a reload is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use super::{BinarySvmModel, MulticlassSvmModel, ScalingParams, MODEL_VERSION};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &str = "NOISENSE-MODEL";

fn real(out: &mut String, x: f64) {
    let _ = write!(out, " {x:.16e}");
}

pub fn format_model(model: &MulticlassSvmModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MODEL_MAGIC} {MODEL_VERSION}");
    let _ = writeln!(out, "dimension {}", model.dim());
    out.push_str("shift");
    model.scaling.shift.iter().for_each(|&x| real(&mut out, x));
    out.push_str("\nscale");
    model.scaling.scale.iter().for_each(|&x| real(&mut out, x));
    let _ = write!(out, "\nclasses {}", model.classes.len());
    for c in &model.classes {
        let _ = write!(out, " {c}");
    }
    let _ = writeln!(out, "\npairs {}", model.binaries.len());
    for b in &model.binaries {
        let _ = writeln!(out, "pair {} {}", b.label_pair.0, b.label_pair.1);
        out.push_str("gamma");
        real(&mut out, b.kernel_gamma);
        out.push_str("\npenalty");
        real(&mut out, b.penalty);
        out.push_str("\nbias");
        real(&mut out, b.bias);
        let _ = writeln!(out, "\nsupport_vectors {}", b.support_vectors.len());
        for (sv, a) in b.support_vectors.iter().zip(&b.alphas_signed) {
            let _ = write!(out, "{a:.16e}");
            sv.iter().for_each(|&x| real(&mut out, x));
            out.push('\n');
        }
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    origin: &'a Path,
    line: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.origin, self.line, msg)
    }

    fn next_tokens(&mut self) -> Result<Vec<&'a str>> {
        loop {
            let Some((i, l)) = self.inner.next() else {
                self.line += 1;
                return Err(self.err("unexpected end of model file"));
            };
            self.line = i + 1;
            if !l.trim().is_empty() {
                return Ok(l.split_whitespace().collect());
            }
        }
    }

    fn keyed(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let toks = self.next_tokens()?;
        if toks.first() != Some(&key) {
            return Err(self.err(format!("expected `{key}`")));
        }
        Ok(toks[1..].to_vec())
    }

    fn reals(&self, toks: &[&str], expected: usize) -> Result<Vec<f64>> {
        if toks.len() != expected {
            return Err(self.err(format!("expected {expected} values, found {}", toks.len())));
        }
        toks.iter()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| self.err(format!("bad number `{t}`")))
            })
            .collect()
    }

    fn count(&self, toks: &[&str]) -> Result<usize> {
        toks.first()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| self.err("expected a count"))
    }

    fn scalar(&mut self, key: &str) -> Result<f64> {
        let toks = self.keyed(key)?;
        Ok(self.reals(&toks, 1)?[0])
    }
}

pub fn parse_model(text: &str, origin: &Path) -> Result<MulticlassSvmModel> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        origin,
        line: 0,
    };
    let header = lines.next_tokens()?;
    if header != [MODEL_MAGIC, "1"] {
        return Err(lines.err(format!("expected header `{MODEL_MAGIC} {MODEL_VERSION}`")));
    }
    let toks = lines.keyed("dimension")?;
    let dim = lines.count(&toks)?;
    if dim == 0 {
        return Err(lines.err("dimension must be positive"));
    }
    let toks = lines.keyed("shift")?;
    let shift = lines.reals(&toks, dim)?;
    let toks = lines.keyed("scale")?;
    let scale = lines.reals(&toks, dim)?;
    if scale.iter().any(|s| *s <= 0.0) {
        return Err(lines.err("scales must be positive"));
    }
    let toks = lines.keyed("classes")?;
    let k = lines.count(&toks)?;
    let classes: Vec<String> = toks[1..].iter().map(|s| s.to_string()).collect();
    if classes.len() != k || k < 2 {
        return Err(lines.err("class count does not match the class list"));
    }
    if classes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(lines.err("classes must be sorted and distinct"));
    }
    let toks = lines.keyed("pairs")?;
    let n_pairs = lines.count(&toks)?;
    if n_pairs != k * (k - 1) / 2 {
        return Err(lines.err(format!("expected {} pairs for {k} classes", k * (k - 1) / 2)));
    }

    let mut binaries = Vec::with_capacity(n_pairs);
    let expected_pairs = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j)));
    for (i, j) in expected_pairs {
        let toks = lines.keyed("pair")?;
        if toks.len() != 2 || toks[0] != classes[i] || toks[1] != classes[j] {
            return Err(lines.err(format!("expected pair {} {}", classes[i], classes[j])));
        }
        let kernel_gamma = lines.scalar("gamma")?;
        let penalty = lines.scalar("penalty")?;
        let bias = lines.scalar("bias")?;
        let toks = lines.keyed("support_vectors")?;
        let n_sv = lines.count(&toks)?;
        let mut support_vectors = Vec::with_capacity(n_sv);
        let mut alphas_signed = Vec::with_capacity(n_sv);
        for _ in 0..n_sv {
            let toks = lines.next_tokens()?;
            let row = lines.reals(&toks, dim + 1)?;
            alphas_signed.push(row[0]);
            support_vectors.push(row[1..].to_vec());
        }
        binaries.push(BinarySvmModel {
            support_vectors,
            alphas_signed,
            bias,
            kernel_gamma,
            penalty,
            label_pair: (classes[i].clone(), classes[j].clone()),
        });
    }
    Ok(MulticlassSvmModel {
        version: MODEL_VERSION,
        classes,
        binaries,
        scaling: ScalingParams { shift, scale },
    })
}

pub fn save_model(model: &MulticlassSvmModel, path: &Path) -> Result<()> {
    std::fs::write(path, format_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<MulticlassSvmModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_model(&text, path)
}
