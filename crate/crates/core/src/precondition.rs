//! Two-sided preconditioning: `(ML^-1 A MR^-1)(MR x) = ML^-1 b`.
//!
//! The caller supplies the inverse actions of each side (and of their
//! transposes, which the general normal-equation solvers need). The wrapped
//! system is tagged general unless the caller asserts that the combination
//! preserves skew symmetry; [`crate::operator::verify_skew`] can certify the
//! assertion numerically.

use crate::error::{Error, Result};
use crate::operator::{LinearOperator, OpKind, Vector};

type VecFn = Box<dyn Fn(&Vector) -> Vector + Send + Sync>;

/// One side of a split preconditioner: the action of `M^-1` and of `M^-t`.
pub struct PrecondSide {
    solve: VecFn,
    solve_transpose: VecFn,
    dim: Option<usize>,
}

impl PrecondSide {
    pub fn identity() -> Self {
        PrecondSide {
            solve: Box::new(|v: &Vector| v.clone()),
            solve_transpose: Box::new(|v: &Vector| v.clone()),
            dim: None,
        }
    }

    /// Diagonal preconditioner; rejects zero entries.
    pub fn diagonal(d: &Vector) -> Result<Self> {
        if let Some(i) = d.iter().position(|&x| x == 0.0 || !x.is_finite()) {
            return Err(Error::ZeroDiagonal(i));
        }
        let inv: Vector = d.map(|x| 1.0 / x);
        let inv_t = inv.clone();
        Ok(PrecondSide {
            solve: Box::new(move |v: &Vector| v.component_mul(&inv)),
            solve_transpose: Box::new(move |v: &Vector| v.component_mul(&inv_t)),
            dim: Some(d.len()),
        })
    }

    /// Arbitrary inverse actions, e.g. triangular solves. Both closures must
    /// be linear and dimension-preserving.
    pub fn custom(
        solve: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
        solve_transpose: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        PrecondSide {
            solve: Box::new(solve),
            solve_transpose: Box::new(solve_transpose),
            dim: None,
        }
    }
}

/// The preconditioned operator together with the right-hand-side transform
/// and the unknown recovery map.
pub struct PreconditionedSystem<'a> {
    a: &'a dyn LinearOperator,
    left: PrecondSide,
    right: PrecondSide,
    kind: OpKind,
}

/// Wraps `A` as `ML^-1 A MR^-1`. The result is general-tagged; call
/// [`PreconditionedSystem::assert_skew`] when the preconditioner provably
/// preserves skew symmetry.
pub fn precondition<'a>(
    a: &'a dyn LinearOperator,
    left: PrecondSide,
    right: PrecondSide,
) -> Result<PreconditionedSystem<'a>> {
    for side in [&left, &right] {
        if let Some(dim) = side.dim {
            if dim != a.dim() {
                return Err(Error::DimensionMismatch {
                    expected: a.dim(),
                    got: dim,
                });
            }
        }
    }
    Ok(PreconditionedSystem {
        a,
        left,
        right,
        kind: OpKind::General,
    })
}

impl<'a> PreconditionedSystem<'a> {
    /// Marks the wrapped operator skew. The transpose action then becomes a
    /// negation of the forward action, so the caller is responsible for the
    /// assertion being true (verify with [`crate::operator::verify_skew`]).
    pub fn assert_skew(mut self) -> Self {
        self.kind = OpKind::Skew;
        self
    }

    /// `b -> ML^-1 b`, the right-hand side of the transformed system.
    pub fn transform_rhs(&self, b: &Vector) -> Vector {
        (self.left.solve)(b)
    }

    /// `x~ -> MR^-1 x~ = x`, mapping the transformed unknown back.
    pub fn recover(&self, x_tilde: &Vector) -> Vector {
        (self.right.solve)(x_tilde)
    }
}

impl LinearOperator for PreconditionedSystem<'_> {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn kind(&self) -> OpKind {
        self.kind
    }

    fn apply(&self, v: &Vector) -> Vector {
        (self.left.solve)(&self.a.apply(&(self.right.solve)(v)))
    }

    fn apply_transpose(&self, v: &Vector) -> Vector {
        match self.kind {
            OpKind::Skew => -self.apply(v),
            OpKind::General => (self.right.solve_transpose)(
                &self.a.apply_transpose(&(self.left.solve_transpose)(v)),
            ),
        }
    }
}
