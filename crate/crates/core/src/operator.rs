//! Matrix-free linear operators and the skew-symmetry gate.
//!
//! Solvers and basis builders only ever see the [`LinearOperator`] trait, so
//! a system can be backed by a dense array, a triplet list, or an arbitrary
//! closure. Skew-tagged operators implement the transpose action as a
//! negation of the forward action; the identity `A^t = -A` then holds to the
//! bit, which the verification checks rely on.

use nalgebra::DVector;

use crate::rng::Rng;

/// Column vector of real scalars.
pub type Vector = DVector<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    General,
    Skew,
}

/// Action of a square matrix and of its transpose.
///
/// Implementations must be linear in the argument and reentrant; operators
/// are immutable once built and safe to share between threads.
pub trait LinearOperator: Send + Sync {
    fn dim(&self) -> usize;

    fn kind(&self) -> OpKind;

    /// v -> Av.
    fn apply(&self, v: &Vector) -> Vector;

    /// v -> A^t v. Skew implementations negate `apply` and never store a
    /// second matrix.
    fn apply_transpose(&self, v: &Vector) -> Vector;

    fn is_skew(&self) -> bool {
        self.kind() == OpKind::Skew
    }
}

/// v -> A(Av), the generator of the squared-operator Krylov subspaces.
///
/// Applies the inner operator twice instead of forming the product, which
/// keeps the cost at two applies and avoids an O(n^3) build.
pub struct SquaredOperator<'a> {
    inner: &'a dyn LinearOperator,
}

impl<'a> SquaredOperator<'a> {
    pub fn new(inner: &'a dyn LinearOperator) -> Self {
        SquaredOperator { inner }
    }
}

impl LinearOperator for SquaredOperator<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn kind(&self) -> OpKind {
        // A^2 is symmetric when A is skew, never skew itself.
        OpKind::General
    }

    fn apply(&self, v: &Vector) -> Vector {
        self.inner.apply(&self.inner.apply(v))
    }

    fn apply_transpose(&self, v: &Vector) -> Vector {
        self.inner.apply_transpose(&self.inner.apply_transpose(v))
    }
}

/// Closure-backed operator, mostly for tests and ad-hoc wrappers.
pub struct FnOperator<F, G>
where
    F: Fn(&Vector) -> Vector + Send + Sync,
    G: Fn(&Vector) -> Vector + Send + Sync,
{
    dim: usize,
    kind: OpKind,
    forward: F,
    transpose: G,
}

impl<F, G> FnOperator<F, G>
where
    F: Fn(&Vector) -> Vector + Send + Sync,
    G: Fn(&Vector) -> Vector + Send + Sync,
{
    pub fn new(dim: usize, kind: OpKind, forward: F, transpose: G) -> Self {
        FnOperator {
            dim,
            kind,
            forward,
            transpose,
        }
    }
}

impl<F, G> LinearOperator for FnOperator<F, G>
where
    F: Fn(&Vector) -> Vector + Send + Sync,
    G: Fn(&Vector) -> Vector + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn kind(&self) -> OpKind {
        self.kind
    }

    fn apply(&self, v: &Vector) -> Vector {
        (self.forward)(v)
    }

    fn apply_transpose(&self, v: &Vector) -> Vector {
        (self.transpose)(v)
    }
}

/// Power-iteration estimate of the spectral norm, 20 steps on A^t A.
///
/// Used to scale tolerances for matrix-free operators; concrete matrix types
/// prefer their own row-norm bound.
pub fn norm_estimate(op: &dyn LinearOperator, seed: u64) -> f64 {
    let n = op.dim();
    let mut rng = Rng::new(seed);
    let mut v = random_vector(&mut rng, n);
    let mut sigma2 = 0.0;
    for _ in 0..20 {
        let w = op.apply_transpose(&op.apply(&v));
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        sigma2 = v.dot(&w).abs();
        v = w / norm;
    }
    sigma2.sqrt()
}

/// Vector with entries uniform in [-1, 1).
pub fn random_vector(rng: &mut Rng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| rng.uniform(-1.0, 1.0))
}

/// Vector with standard-normal entries.
pub fn random_normal_vector(rng: &mut Rng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| rng.normal())
}

/// Outcome of [`verify_skew`]: the worst observed violations of the two skew
/// identities over the sampled vectors.
#[derive(Debug, Clone)]
pub struct SkewReport {
    /// max over samples of |z^t A z| / (|A| |z|^2).
    pub max_quadratic: f64,
    /// max over samples of |A^t z + A z| / |A z|.
    pub max_transpose: f64,
    pub tol: f64,
    pub pass: bool,
    /// Index of the first sample that violated either bound.
    pub failing_sample: Option<usize>,
}

/// Samples the identities `z^t A z = 0` and `A^t z = -A z` that characterize
/// skew symmetry, scaled by a norm estimate of the operator.
pub fn verify_skew(
    op: &dyn LinearOperator,
    sample_count: usize,
    seed: u64,
    tol: f64,
) -> SkewReport {
    let n = op.dim();
    let scale = norm_estimate(op, seed ^ 0x5eed).max(f64::MIN_POSITIVE);
    let mut rng = Rng::new(seed);
    let mut max_quadratic: f64 = 0.0;
    let mut max_transpose: f64 = 0.0;
    let mut failing_sample = None;
    for sample in 0..sample_count {
        let z = random_vector(&mut rng, n);
        let az = op.apply(&z);
        let atz = op.apply_transpose(&z);
        let quadratic = z.dot(&az).abs() / (scale * z.norm_squared());
        let az_norm = az.norm();
        let transpose = if az_norm > 0.0 {
            (&atz + &az).norm() / az_norm
        } else {
            (&atz + &az).norm() / (scale * z.norm())
        };
        if (quadratic > tol || transpose > tol) && failing_sample.is_none() {
            failing_sample = Some(sample);
        }
        max_quadratic = max_quadratic.max(quadratic);
        max_transpose = max_transpose.max(transpose);
    }
    SkewReport {
        max_quadratic,
        max_transpose,
        tol,
        pass: failing_sample.is_none(),
        failing_sample,
    }
}
