//! Sampled matrix potentials on a uniform grid, together with the signature
//! matrix j and the block embedding V of the potential.

use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::linalg::{all_finite, cid, j_signature, op_norm, real, CMat, ZERO};

/// Block signature of the system: fixes j = diag(I_{m1}, -I_{m2}) and the
/// embedding v -> V = [[0, v], [v*, 0]].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Signature {
    pub m1: usize,
    pub m2: usize,
}

impl Signature {
    pub fn new(m1: usize, m2: usize) -> Result<Self> {
        if m1 == 0 || m2 == 0 {
            return Err(Error::Invalid("m1 and m2 must be positive".into()));
        }
        Ok(Signature { m1, m2 })
    }

    pub fn m(&self) -> usize {
        self.m1 + self.m2
    }

    pub fn j(&self) -> CMat {
        j_signature(self.m1, self.m2)
    }

    /// Assemble V from an m1 x m2 sample; jV = -Vj holds by construction.
    pub fn embed(&self, v: &CMat) -> CMat {
        let (m1, m2) = (self.m1, self.m2);
        debug_assert_eq!(v.nrows(), m1);
        debug_assert_eq!(v.ncols(), m2);
        let mut out = CMat::zeros(m1 + m2, m1 + m2);
        for i in 0..m1 {
            for j in 0..m2 {
                out[(i, m1 + j)] = v[(i, j)];
                out[(m1 + j, i)] = v[(i, j)].conj();
            }
        }
        out
    }
}

/// A spectral point z together with its distance to the admissible
/// half-plane boundary Im z = M.
#[derive(Clone, Copy, Debug)]
pub struct SpectralPoint {
    pub z: Complex64,
    pub margin: f64,
}

impl SpectralPoint {
    pub fn new(z: Complex64, norm_bound: f64) -> Self {
        SpectralPoint {
            z,
            margin: z.im - norm_bound,
        }
    }

    pub fn in_weyl_domain(&self) -> bool {
        self.margin > 0.0
    }

    /// Error unless Im z exceeds the norm bound by at least `required`.
    pub fn require_margin(&self, required: f64) -> Result<()> {
        if self.margin < required {
            return Err(Error::OutsideDomain {
                z: self.z,
                margin: self.margin,
            });
        }
        Ok(())
    }
}

/// An m1 x m2 matrix potential sampled at the n+1 nodes of a uniform grid
/// on [0, l], with an operator-norm bound M over the interval.
#[derive(Clone, Debug)]
pub struct PotentialGrid {
    sig: Signature,
    l: f64,
    n: usize,
    samples: Vec<CMat>,
    norm_bound: f64,
}

impl PotentialGrid {
    /// Validates shapes and finiteness. `bound` may raise (never lower) the
    /// observed max sample norm; the stored M always dominates the samples.
    pub fn new(
        m1: usize,
        m2: usize,
        l: f64,
        n: usize,
        samples: Vec<CMat>,
        bound: Option<f64>,
    ) -> Result<Self> {
        let sig = Signature::new(m1, m2)?;
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::Invalid(format!("interval length l = {l} must be positive")));
        }
        if n < 2 {
            return Err(Error::Invalid(format!("grid needs n >= 2 cells, got {n}")));
        }
        if samples.len() != n + 1 {
            return Err(Error::Invalid(format!(
                "expected {} samples, got {}",
                n + 1,
                samples.len()
            )));
        }
        let mut observed = 0.0_f64;
        for (k, s) in samples.iter().enumerate() {
            if s.nrows() != m1 || s.ncols() != m2 {
                return Err(Error::Invalid(format!(
                    "sample {k} has shape {}x{}, expected {m1}x{m2}",
                    s.nrows(),
                    s.ncols()
                )));
            }
            if !all_finite(s) {
                return Err(Error::Invalid(format!("sample {k} has non-finite entries")));
            }
            observed = observed.max(op_norm(s));
        }
        let norm_bound = match bound {
            Some(b) if b.is_finite() && b >= 0.0 => b.max(observed),
            Some(b) => {
                return Err(Error::Invalid(format!("norm bound {b} must be finite and >= 0")))
            }
            None => observed,
        };
        Ok(PotentialGrid {
            sig,
            l,
            n,
            samples,
            norm_bound,
        })
    }

    pub fn zero(m1: usize, m2: usize, l: f64, n: usize) -> Result<Self> {
        let samples = vec![CMat::zeros(m1, m2); n + 1];
        Self::new(m1, m2, l, n, samples, None)
    }

    pub fn constant(value: CMat, l: f64, n: usize) -> Result<Self> {
        let (m1, m2) = (value.nrows(), value.ncols());
        let samples = vec![value; n + 1];
        Self::new(m1, m2, l, n, samples, None)
    }

    pub fn constant_scalar(c: Complex64, l: f64, n: usize) -> Result<Self> {
        Self::constant(CMat::from_element(1, 1, c), l, n)
    }

    pub fn from_fn(
        m1: usize,
        m2: usize,
        l: f64,
        n: usize,
        f: impl Fn(f64) -> CMat,
    ) -> Result<Self> {
        let h = l / n as f64;
        let samples = (0..=n).map(|k| f(k as f64 * h)).collect();
        Self::new(m1, m2, l, n, samples, None)
    }

    pub fn signature(&self) -> Signature {
        self.sig
    }
    pub fn m1(&self) -> usize {
        self.sig.m1
    }
    pub fn m2(&self) -> usize {
        self.sig.m2
    }
    pub fn m(&self) -> usize {
        self.sig.m()
    }
    pub fn l(&self) -> f64 {
        self.l
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn h(&self) -> f64 {
        self.l / self.n as f64
    }
    pub fn node(&self, k: usize) -> f64 {
        k as f64 * self.h()
    }
    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }
    pub fn sample(&self, k: usize) -> &CMat {
        &self.samples[k]
    }
    pub fn samples(&self) -> &[CMat] {
        &self.samples
    }

    pub fn j(&self) -> CMat {
        self.sig.j()
    }

    /// Midpoint potential value of cell k, by averaging the two node samples.
    pub fn cell_mid_v(&self, k: usize) -> CMat {
        (&self.samples[k] + &self.samples[k + 1]) * real(0.5)
    }

    /// Coefficient matrix izj + jV at a given potential sample.
    pub fn coefficient(&self, v: &CMat, z: Complex64) -> CMat {
        let j = self.j();
        let big_v = self.sig.embed(v);
        &j * (Complex64::new(0.0, 1.0) * z) + &j * big_v
    }

    pub fn spectral_point(&self, z: Complex64) -> SpectralPoint {
        SpectralPoint::new(z, self.norm_bound)
    }
}

/// JSON descriptor for potential ingestion.
///
/// ```json
/// { "m1": 1, "m2": 1, "l": 1.0, "n": 400, "kind": "constant", "value": 0.5 }
/// ```
///
/// `kind` is one of `zero`, `constant`, `csv`. A constant value is either a
/// real scalar (valid for any shape: scalar times the all-ones pattern only
/// when m1 = m2 = 1; otherwise supply the full matrix) or a nested row-major
/// array of `[re, im]` pairs. A `csv` potential points at a file with one row
/// per node and columns `Re v_ij, Im v_ij` in row-major (i, j) order.
#[derive(Clone, Debug, Deserialize)]
pub struct PotentialSpec {
    pub m1: usize,
    pub m2: usize,
    pub l: f64,
    pub n: usize,
    pub kind: String,
    #[serde(default)]
    pub value: Option<serde_json::Value>,
    #[serde(default)]
    pub path: Option<String>,
    #[serde(default)]
    pub norm_bound: Option<f64>,
}

impl PotentialSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("potential descriptor: {e}")))
    }

    /// Instantiate the grid, reading CSV samples relative to `base_dir` when
    /// the path is not absolute.
    pub fn build(&self, base_dir: Option<&std::path::Path>) -> Result<PotentialGrid> {
        match self.kind.as_str() {
            "zero" => PotentialGrid::new(
                self.m1,
                self.m2,
                self.l,
                self.n,
                vec![CMat::zeros(self.m1, self.m2); self.n + 1],
                self.norm_bound,
            ),
            "constant" => {
                let value = self.value.as_ref().ok_or_else(|| {
                    Error::Invalid("constant potential needs a \"value\" field".into())
                })?;
                let v = parse_constant_value(value, self.m1, self.m2)?;
                PotentialGrid::new(
                    self.m1,
                    self.m2,
                    self.l,
                    self.n,
                    vec![v; self.n + 1],
                    self.norm_bound,
                )
            }
            "csv" => {
                let rel = self.path.as_ref().ok_or_else(|| {
                    Error::Invalid("csv potential needs a \"path\" field".into())
                })?;
                let mut path = std::path::PathBuf::from(rel);
                if path.is_relative() {
                    if let Some(base) = base_dir {
                        path = base.join(path);
                    }
                }
                let text = std::fs::read_to_string(&path)?;
                let samples = parse_samples_csv(&text, self.m1, self.m2, self.n)?;
                PotentialGrid::new(self.m1, self.m2, self.l, self.n, samples, self.norm_bound)
            }
            other => Err(Error::Invalid(format!("unknown potential kind \"{other}\""))),
        }
    }
}

fn parse_constant_value(value: &serde_json::Value, m1: usize, m2: usize) -> Result<CMat> {
    match value {
        serde_json::Value::Number(num) => {
            let c = num
                .as_f64()
                .ok_or_else(|| Error::Parse("constant value is not a float".into()))?;
            if m1 != 1 || m2 != 1 {
                return Err(Error::Invalid(
                    "scalar constant only valid for m1 = m2 = 1; supply a matrix".into(),
                ));
            }
            Ok(CMat::from_element(1, 1, real(c)))
        }
        serde_json::Value::Array(rows) => {
            if rows.len() != m1 {
                return Err(Error::Parse(format!(
                    "constant matrix has {} rows, expected {m1}",
                    rows.len()
                )));
            }
            let mut out = CMat::zeros(m1, m2);
            for (i, row) in rows.iter().enumerate() {
                let row = row
                    .as_array()
                    .ok_or_else(|| Error::Parse("constant matrix row is not an array".into()))?;
                if row.len() != m2 {
                    return Err(Error::Parse(format!(
                        "constant matrix row {i} has {} entries, expected {m2}",
                        row.len()
                    )));
                }
                for (j, entry) in row.iter().enumerate() {
                    let pair = entry
                        .as_array()
                        .ok_or_else(|| Error::Parse("matrix entry must be [re, im]".into()))?;
                    if pair.len() != 2 {
                        return Err(Error::Parse("matrix entry must be [re, im]".into()));
                    }
                    let re = pair[0].as_f64().ok_or_else(|| Error::Parse("re not a float".into()))?;
                    let im = pair[1].as_f64().ok_or_else(|| Error::Parse("im not a float".into()))?;
                    out[(i, j)] = Complex64::new(re, im);
                }
            }
            Ok(out)
        }
        _ => Err(Error::Parse(
            "constant value must be a number or a nested [re, im] array".into(),
        )),
    }
}

/// One row per node; 2*m1*m2 columns: Re v_ij, Im v_ij in row-major order.
pub fn parse_samples_csv(text: &str, m1: usize, m2: usize, n: usize) -> Result<Vec<CMat>> {
    let mut samples = Vec::with_capacity(n + 1);
    for (lineno, line) in text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .enumerate()
    {
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 2 * m1 * m2 {
            return Err(Error::Parse(format!(
                "csv line {}: {} columns, expected {}",
                lineno + 1,
                cols.len(),
                2 * m1 * m2
            )));
        }
        let mut v = CMat::zeros(m1, m2);
        for i in 0..m1 {
            for j in 0..m2 {
                let base = 2 * (i * m2 + j);
                let re: f64 = cols[base]
                    .parse()
                    .map_err(|_| Error::Parse(format!("csv line {}: bad float", lineno + 1)))?;
                let im: f64 = cols[base + 1]
                    .parse()
                    .map_err(|_| Error::Parse(format!("csv line {}: bad float", lineno + 1)))?;
                v[(i, j)] = Complex64::new(re, im);
            }
        }
        samples.push(v);
    }
    if samples.len() != n + 1 {
        return Err(Error::Parse(format!(
            "csv has {} sample rows, expected n + 1 = {}",
            samples.len(),
            n + 1
        )));
    }
    Ok(samples)
}

/// Inverse of `parse_samples_csv`, with 17-significant-digit formatting.
pub fn samples_to_csv(samples: &[CMat]) -> String {
    let mut out = String::new();
    for v in samples {
        let mut cols = Vec::with_capacity(2 * v.len());
        for i in 0..v.nrows() {
            for j in 0..v.ncols() {
                cols.push(fmt_f64(v[(i, j)].re));
                cols.push(fmt_f64(v[(i, j)].im));
            }
        }
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}

/// Fixed 17-significant-digit scientific formatting, locale-independent.
pub fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

/// Identity embedding helper used in a few tests and the CLI.
pub fn identity_pair(m1: usize) -> CMat {
    cid(m1)
}

#[allow(unused)]
fn unused_zero() -> Complex64 {
    ZERO
}
