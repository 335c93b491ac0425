//! Bilinear-quadratic saddle-point instances
//!
//! ```text
//! min_x max_y  ½⟨x, Hx⟩ − ⟨x, h⟩ − ⟨y, Ax − b⟩
//! ```
//!
//! and the monotone operator `V(x, y) = (Hx − h − Aᵀy, Ax − b)` they induce.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::operator::Operator;

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleProblem {
    /// `H`, n×n symmetric positive semidefinite.
    pub quad: Matrix,
    /// `A`, m×n.
    pub coupling: Matrix,
    /// `b`, length m.
    pub b: Vector,
    /// `h`, length n.
    pub h: Vector,
}

impl SaddleProblem {
    pub fn new(quad: Matrix, coupling: Matrix, b: Vector, h: Vector) -> Result<Self> {
        let n = quad.nrows();
        let m = coupling.nrows();
        if !quad.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "H must be square, got {}x{}",
                quad.nrows(),
                quad.ncols()
            )));
        }
        if coupling.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "A has {} columns but H is {n}x{n}",
                coupling.ncols()
            )));
        }
        if b.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "b has length {} but A has {m} rows",
                b.len()
            )));
        }
        if h.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "h has length {} but H is {n}x{n}",
                h.len()
            )));
        }
        Ok(Self {
            quad,
            coupling,
            b,
            h,
        })
    }

    /// x-dimension.
    pub fn n(&self) -> usize {
        self.quad.nrows()
    }

    /// y-dimension.
    pub fn m(&self) -> usize {
        self.coupling.nrows()
    }

    /// Dimension of the induced operator, `n + m`.
    pub fn dim(&self) -> usize {
        self.n() + self.m()
    }

    /// `(M, q)` with `M = [[H, −Aᵀ], [A, 0]]` and `q = (−h, −b)`.
    pub fn affine_parts(&self) -> (Matrix, Vector) {
        let (n, m) = (self.n(), self.m());
        let mut mat = Matrix::zeros(n + m, n + m);
        mat.view_mut((0, 0), (n, n)).copy_from(&self.quad);
        mat.view_mut((0, n), (n, m))
            .copy_from(&(-self.coupling.transpose()));
        mat.view_mut((n, 0), (m, n)).copy_from(&self.coupling);
        let mut q = Vector::zeros(n + m);
        q.rows_mut(0, n).copy_from(&(-&self.h));
        q.rows_mut(n, m).copy_from(&(-&self.b));
        (mat, q)
    }

    /// Serializes to the plain-text matrix format (17 significant digits,
    /// bit-exact on re-read).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# fastogda saddle problem");
        let _ = writeln!(s, "saddle {} {}", self.n(), self.m());
        write_matrix(&mut s, "H", &self.quad);
        write_matrix(&mut s, "A", &self.coupling);
        write_vector(&mut s, "b", &self.b);
        write_vector(&mut s, "h", &self.h);
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty problem file".into()))?;
        let dims = parse_header(header, "saddle", 2)?;
        let (n, m) = (dims[0], dims[1]);
        let quad = read_matrix(&mut lines, "H", n, n)?;
        let coupling = read_matrix(&mut lines, "A", m, n)?;
        let b = read_vector(&mut lines, "b", m)?;
        let h = read_vector(&mut lines, "h", n)?;
        Self::new(quad, coupling, b, h)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// The saddle operator of `p`. `lipschitz` overrides the default
/// power-iteration estimate of `‖M‖` (pass `Some(1.0)` for the textbook
/// bound on the structured instances).
pub fn saddle_operator(p: &SaddleProblem, lipschitz: Option<f64>) -> Result<Operator> {
    let (m, q) = p.affine_parts();
    let op = Operator::affine(m, q)?;
    match lipschitz {
        Some(l) => op.with_lipschitz(l),
        None => Ok(op),
    }
}

/// The structured lower-bound instance: `A` is ¼ times the anti-banded
/// matrix with rows `(…, −1, 1)` climbing to the left and a final row
/// `(1, 0, …)`, `H = 2AᵀA`, `b = ¼𝟙`, `h = ¼eₙ`.
pub fn build_ouyang_xu(n: usize) -> Result<SaddleProblem> {
    if n == 0 {
        return Err(Error::InvalidArgument("structured instance needs n >= 1".into()));
    }
    let mut a = Matrix::zeros(n, n);
    // 1-based row i < n: −¼ at column n−i, +¼ at column n−i+1.
    for i in 1..n {
        a[(i - 1, n - i - 1)] = -0.25;
        a[(i - 1, n - i)] = 0.25;
    }
    a[(n - 1, 0)] = 0.25;
    let quad = a.transpose() * &a * 2.0;
    let b = Vector::from_element(n, 0.25);
    let mut h = Vector::zeros(n);
    h[n - 1] = 0.25;
    SaddleProblem::new(quad, a, b, h)
}

/// Random sparse instance: each entry of `A` (m×n), `b` and `h` is nonzero
/// independently with probability `density`, nonzeros standard normal;
/// `H = 2AᵀA`. Deterministic in `seed`.
pub fn build_random_sparse(n: usize, m: usize, density: f64, seed: u64) -> Result<SaddleProblem> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "density must lie in (0, 1], got {density}"
        )));
    }
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!(
            "random instances need 1 <= m <= n, got n = {n}, m = {m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> f64 {
        if rng.random::<f64>() < density {
            rng.sample(StandardNormal)
        } else {
            0.0
        }
    };
    // Row-major fill order is part of the determinism contract.
    let mut a = Matrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            a[(i, j)] = draw(&mut rng);
        }
    }
    let b = Vector::from_fn(m, |_, _| draw(&mut rng));
    let h = Vector::from_fn(n, |_, _| draw(&mut rng));
    let quad = a.transpose() * &a * 2.0;
    SaddleProblem::new(quad, a, b, h)
}

fn write_matrix(s: &mut String, name: &str, mat: &Matrix) {
    let _ = writeln!(s, "{name} {} {}", mat.nrows(), mat.ncols());
    for i in 0..mat.nrows() {
        let row: Vec<String> = (0..mat.ncols()).map(|j| fmt17(mat[(i, j)])).collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
}

fn write_vector(s: &mut String, name: &str, v: &Vector) {
    let _ = writeln!(s, "{name} {}", v.len());
    let row: Vec<String> = v.iter().map(|&x| fmt17(x)).collect();
    let _ = writeln!(s, "{}", row.join(" "));
}

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_header(line: &str, name: &str, count: usize) -> Result<Vec<usize>> {
    let mut it = line.split_whitespace();
    if it.next() != Some(name) {
        return Err(Error::Parse(format!("expected '{name}' header, got '{line}'")));
    }
    let dims: Vec<usize> = it
        .map(|t| {
            t.parse::<usize>()
                .map_err(|e| Error::Parse(format!("bad dimension '{t}': {e}")))
        })
        .collect::<Result<_>>()?;
    if dims.len() != count {
        return Err(Error::Parse(format!(
            "'{name}' header needs {count} dimensions, got '{line}'"
        )));
    }
    Ok(dims)
}

fn parse_row(line: &str, len: usize) -> Result<Vec<f64>> {
    let vals: Vec<f64> = line
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad number '{t}': {e}")))
        })
        .collect::<Result<_>>()?;
    if vals.len() != len {
        return Err(Error::Parse(format!(
            "expected {len} entries, got {}",
            vals.len()
        )));
    }
    Ok(vals)
}

fn read_matrix<'a>(
    lines: &mut impl Iterator<Item = &'a str>,
    name: &str,
    rows: usize,
    cols: usize,
) -> Result<Matrix> {
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse(format!("missing block '{name}'")))?;
    let dims = parse_header(header, name, 2)?;
    if dims != [rows, cols] {
        return Err(Error::DimensionMismatch(format!(
            "{name} declared {}x{}, expected {rows}x{cols}",
            dims[0], dims[1]
        )));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("truncated block '{name}'")))?;
        data.extend(parse_row(line, cols)?);
    }
    Ok(Matrix::from_row_slice(rows, cols, &data))
}

fn read_vector<'a>(
    lines: &mut impl Iterator<Item = &'a str>,
    name: &str,
    len: usize,
) -> Result<Vector> {
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse(format!("missing block '{name}'")))?;
    let dims = parse_header(header, name, 1)?;
    if dims[0] != len {
        return Err(Error::DimensionMismatch(format!(
            "{name} declared length {}, expected {len}",
            dims[0]
        )));
    }
    if len == 0 {
        return Ok(Vector::zeros(0));
    }
    let line = lines
        .next()
        .ok_or_else(|| Error::Parse(format!("truncated block '{name}'")))?;
    Ok(Vector::from_vec(parse_row(line, len)?))
}
