//! Monotone operators `V: Rⁿ → Rⁿ`.
//!
//! Every solver in this crate is written against [`MonotoneOperator`]. The
//! concrete [`Operator`] covers both affine maps `V(z) = Mz + q` (the saddle
//! operators of bilinear-quadratic minimax problems) and arbitrary closures.

use std::cell::Cell;
use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{self, CsrMatrix, Matrix, Vector};

/// A single-valued monotone operator.
pub trait MonotoneOperator {
    fn dim(&self) -> usize;

    /// `out = V(z)`
    fn apply_into(&self, z: &Vector, out: &mut Vector);

    fn apply(&self, z: &Vector) -> Vector {
        let mut out = Vector::zeros(self.dim());
        self.apply_into(z, &mut out);
        out
    }

    /// A Lipschitz constant for `V`, if one is known.
    fn lipschitz(&self) -> Option<f64>;

    /// The affine structure `(M, q)` if `V(z) = Mz + q`.
    fn affine(&self) -> Option<&AffineMap>;
}

/// `z ↦ Mz + q`, stored densely (for factorizations) and in CSR form (for
/// the products the solvers hammer on).
#[derive(Debug, Clone)]
pub struct AffineMap {
    m: Matrix,
    m_csr: CsrMatrix,
    q: Vector,
}

impl AffineMap {
    pub fn new(m: Matrix, q: Vector) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "affine matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() != q.len() {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{} but offset has length {}",
                m.nrows(),
                m.ncols(),
                q.len()
            )));
        }
        let m_csr = CsrMatrix::from_dense(&m);
        Ok(Self { m, m_csr, q })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn offset(&self) -> &Vector {
        &self.q
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    /// Dense evaluation `Mz + q`, independent of the CSR path.
    pub fn eval_dense(&self, z: &Vector) -> Vector {
        &self.m * z + &self.q
    }

    fn eval_into(&self, z: &Vector, out: &mut Vector) {
        self.m_csr.mul_into(z.as_slice(), out.as_mut_slice());
        *out += &self.q;
    }

    /// Power-iteration estimate of `‖M‖`.
    pub fn norm_estimate(&self) -> f64 {
        linalg::spectral_norm_estimate(&self.m_csr, 1e-13, 50_000)
    }
}

type OperatorFn = dyn Fn(&Vector) -> Vector + Send + Sync;

#[derive(Clone)]
enum Kind {
    Affine(AffineMap),
    Function(Arc<OperatorFn>),
}

/// A monotone operator with optional Lipschitz bound and optional affine
/// structure. Immutable after construction; cheap to share across threads.
#[derive(Clone)]
pub struct Operator {
    dim: usize,
    kind: Kind,
    lipschitz: Option<f64>,
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            Kind::Affine(_) => "affine",
            Kind::Function(_) => "function",
        };
        f.debug_struct("Operator")
            .field("dim", &self.dim)
            .field("kind", &kind)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl Operator {
    /// Affine operator with the Lipschitz bound set to a power-iteration
    /// estimate of `‖M‖`.
    pub fn affine(m: Matrix, q: Vector) -> Result<Self> {
        let map = AffineMap::new(m, q)?;
        let l = map.norm_estimate();
        Ok(Self {
            dim: map.dim(),
            kind: Kind::Affine(map),
            lipschitz: Some(l),
        })
    }

    /// Operator given by a closure. No Lipschitz bound unless supplied with
    /// [`Operator::with_lipschitz`].
    pub fn from_fn<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&Vector) -> Vector + Send + Sync + 'static,
    {
        Self {
            dim,
            kind: Kind::Function(Arc::new(f)),
            lipschitz: None,
        }
    }

    pub fn with_lipschitz(mut self, l: f64) -> Result<Self> {
        if !(l >= 0.0 && l.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "Lipschitz bound must be finite and nonnegative, got {l}"
            )));
        }
        self.lipschitz = Some(l);
        Ok(self)
    }

    pub fn without_lipschitz(mut self) -> Self {
        self.lipschitz = None;
        self
    }

    /// `V ≡ 0` on `Rᵈⁱᵐ`.
    pub fn zero(dim: usize) -> Self {
        Self::affine(Matrix::zeros(dim, dim), Vector::zeros(dim)).expect("square by construction")
    }

    /// `V(z) = z`.
    pub fn identity(dim: usize) -> Self {
        Self::affine(Matrix::identity(dim, dim), Vector::zeros(dim))
            .expect("square by construction")
    }

    /// The bilinear rotation `V(x, y) = (y, −x)`.
    pub fn rotation() -> Self {
        Self::affine(
            Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
            Vector::zeros(2),
        )
        .expect("square by construction")
    }
}

impl MonotoneOperator for Operator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply_into(&self, z: &Vector, out: &mut Vector) {
        match &self.kind {
            Kind::Affine(map) => map.eval_into(z, out),
            Kind::Function(f) => out.copy_from(&f(z)),
        }
    }

    fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    fn affine(&self) -> Option<&AffineMap> {
        match &self.kind {
            Kind::Affine(map) => Some(map),
            Kind::Function(_) => None,
        }
    }
}

/// Wraps an operator and counts evaluations.
pub struct Counting<'a, O: MonotoneOperator + ?Sized> {
    inner: &'a O,
    count: Cell<usize>,
}

impl<'a, O: MonotoneOperator + ?Sized> Counting<'a, O> {
    pub fn new(inner: &'a O) -> Self {
        Self {
            inner,
            count: Cell::new(0),
        }
    }

    pub fn count(&self) -> usize {
        self.count.get()
    }
}

impl<O: MonotoneOperator + ?Sized> MonotoneOperator for Counting<'_, O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply_into(&self, z: &Vector, out: &mut Vector) {
        self.count.set(self.count.get() + 1);
        self.inner.apply_into(z, out);
    }

    fn lipschitz(&self) -> Option<f64> {
        self.inner.lipschitz()
    }

    fn affine(&self) -> Option<&AffineMap> {
        self.inner.affine()
    }
}

/// Worst sampled violation of monotonicity, normalized as
/// `−⟨V(x)−V(y), x−y⟩ / (1 + ‖x−y‖²)`. Non-positive for monotone operators.
///
/// Points are standard normal scaled by `radius`.
pub fn monotonicity_violation<O: MonotoneOperator + ?Sized>(
    op: &O,
    pairs: usize,
    radius: f64,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..pairs {
        let x = random_point(op.dim(), radius, &mut rng);
        let y = random_point(op.dim(), radius, &mut rng);
        let d = &x - &y;
        let inner = (op.apply(&x) - op.apply(&y)).dot(&d);
        worst = worst.max(-inner / (1.0 + d.norm_squared()));
    }
    worst
}

/// Largest sampled ratio `‖V(x)−V(y)‖ / ‖x−y‖`.
pub fn lipschitz_ratio<O: MonotoneOperator + ?Sized>(
    op: &O,
    pairs: usize,
    radius: f64,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..pairs {
        let x = random_point(op.dim(), radius, &mut rng);
        let y = random_point(op.dim(), radius, &mut rng);
        let d = (&x - &y).norm();
        if d > 0.0 {
            worst = worst.max((op.apply(&x) - op.apply(&y)).norm() / d);
        }
    }
    worst
}

pub(crate) fn random_point(dim: usize, radius: f64, rng: &mut ChaCha8Rng) -> Vector {
    Vector::from_fn(dim, |_, _| {
        let v: f64 = StandardNormal.sample(rng);
        radius * v
    })
}
