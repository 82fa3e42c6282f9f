//! Conjugate-gradient normal-equation solvers.
//!
//! CGNE applies CG to `A A^t y = b` with `x = A^t y` and minimizes the error
//! norm over its subspace; CGNR applies CG to `A^t A x = A^t b` and
//! minimizes the residual norm. Both are implemented in the general form and
//! in the skew-specialized form where every `A^t` becomes `-A`. The four
//! recurrences share one skeleton; they differ only in how the search
//! direction is seeded from the residual and in which norms feed the scalar
//! updates.
//!
//! Iterations stop on a recomputed true residual, never on the recurrence
//! residual alone.

use crate::error::{Error, Result};
use crate::operator::{LinearOperator, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Recomputed `|b - Ax| / |b|` dropped to the configured tolerance.
    Converged,
    MaxIter,
    /// A scalar denominator collapsed; in exact arithmetic this coincides
    /// with convergence, so it is reported with partial history rather than
    /// raised as an error.
    Breakdown,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIter => "max_iter",
            Termination::Breakdown => "breakdown",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Relative residual stopping threshold, must be below 1.
    pub rtol: f64,
    /// Iteration cap. Defaults to the dimension, which exact arithmetic
    /// never needs to exceed; preconditioned systems solved through the
    /// general recurrences may need more in floating point, so an explicit
    /// larger cap is honored.
    pub max_iter: usize,
    /// Denominators below `breakdown_tol` times their initial value stop the
    /// recurrence.
    pub breakdown_tol: f64,
    /// Record per-iteration solution vectors (and `y` for general CGNE).
    pub record_history: bool,
}

impl SolverConfig {
    pub fn new(dim: usize) -> Self {
        SolverConfig {
            rtol: 1e-10,
            max_iter: dim,
            breakdown_tol: 1e-30,
            record_history: false,
        }
    }

    pub fn with_rtol(mut self, rtol: f64) -> Self {
        self.rtol = rtol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_history(mut self) -> Self {
        self.record_history = true;
        self
    }

    fn validate(&self) -> Result<usize> {
        if !(self.rtol >= 0.0 && self.rtol < 1.0) {
            return Err(Error::BadConfig("rtol must lie in [0, 1)"));
        }
        if self.max_iter == 0 {
            return Err(Error::BadConfig("max_iter must be positive"));
        }
        if !(0.0..).contains(&self.breakdown_tol) {
            return Err(Error::BadConfig("breakdown_tol must be nonnegative"));
        }
        Ok(self.max_iter)
    }
}

/// Scalar and (optionally) vector trace of a solve.
#[derive(Debug, Clone, Default)]
pub struct IterateHistory {
    /// `|b|`: both residual norms at iteration zero.
    pub initial_residual: f64,
    /// `|x_exact|` when error norms were attached.
    pub initial_error: Option<f64>,
    /// Recurrence residual norm `|r_q|`, indexed by `q - 1`.
    pub recurrence_residual_norms: Vec<f64>,
    /// Recomputed `|b - A x_q|`, indexed by `q - 1`.
    pub true_residual_norms: Vec<f64>,
    /// `|x_q - x_exact|` once an oracle solution is attached.
    pub error_norms: Option<Vec<f64>>,
    pub alphas: Vec<f64>,
    /// `beta_q` is only computed when the loop continues past iteration `q`,
    /// so this can be one shorter than `alphas`.
    pub betas: Vec<f64>,
    /// Per-iteration solutions when history recording is on.
    pub iterates: Option<Vec<Vector>>,
}

impl IterateHistory {
    /// Recorded `x_q` for `q >= 1`.
    pub fn iterate(&self, q: usize) -> Option<&Vector> {
        self.iterates
            .as_ref()
            .and_then(|xs| xs.get(q.checked_sub(1)?))
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub method: &'static str,
    pub x: Vector,
    pub iterations: usize,
    pub termination: Termination,
    pub history: IterateHistory,
    /// Intermediate `y` with `x = A^t y`, kept only by general CGNE when
    /// history recording is on.
    pub y_history: Option<Vec<Vector>>,
    /// Operator applications performed, including the per-iteration true
    /// residual recomputation demanded by the stopping rule.
    pub applies: usize,
}

impl SolveResult {
    /// Computes `|x_q - x_exact|` for every recorded iterate and stores the
    /// sequence in the history. Requires the solve to have recorded
    /// iterates.
    pub fn attach_error_norms(&mut self, x_exact: &Vector) -> Result<()> {
        let iterates = self.history.iterates.as_ref().ok_or(Error::BadConfig(
            "error norms need a solve with record_history",
        ))?;
        self.history.initial_error = Some(x_exact.norm());
        self.history.error_norms = Some(iterates.iter().map(|x| (x - x_exact).norm()).collect());
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Family {
    /// CGNE: scalars from residual norms; minimizes the error norm.
    ErrorMin,
    /// CGNR: scalars from mapped-residual norms; minimizes the residual.
    ResidualMin,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Panel {
    /// `A^t` replaced by `-A`; requires a skew-tagged operator.
    Skew,
    /// Literal `A^t`.
    General,
}

fn cg_normal(
    a: &dyn LinearOperator,
    b: &Vector,
    cfg: &SolverConfig,
    family: Family,
    panel: Panel,
    method: &'static str,
) -> Result<SolveResult> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    if b.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonfiniteEntry);
    }
    if panel == Panel::Skew && !a.is_skew() {
        return Err(Error::BadConfig(
            "skew recurrence requires a skew-tagged operator",
        ));
    }
    let max_iter = cfg.validate()?;
    let track_y = panel == Panel::General && family == Family::ErrorMin && cfg.record_history;

    let mut history = IterateHistory::default();
    let b_norm = b.norm();
    history.initial_residual = b_norm;
    if cfg.record_history {
        history.iterates = Some(Vec::new());
    }
    let mut applies = 0usize;

    if b_norm == 0.0 {
        return Ok(SolveResult {
            method,
            x: Vector::zeros(n),
            iterations: 0,
            termination: Termination::Converged,
            history,
            y_history: track_y.then(Vec::new),
            applies,
        });
    }

    // Search-direction seed: s = -A r (skew panel) or s = A^t r (general).
    let mapped = |a: &dyn LinearOperator, v: &Vector| -> Vector {
        match panel {
            Panel::Skew => -a.apply(v),
            Panel::General => a.apply_transpose(v),
        }
    };

    let mut x = Vector::zeros(n);
    let mut r = b.clone();
    let mut s = mapped(a, &r);
    applies += 1;
    let mut p = s.clone();
    let mut num = match family {
        Family::ErrorMin => r.norm_squared(),
        Family::ResidualMin => s.norm_squared(),
    };
    let num_floor = cfg.breakdown_tol * num;

    let mut y_state = track_y.then(|| (Vector::zeros(n), r.clone(), Vec::new()));

    let mut iterations = 0;
    let termination;
    let mut denom_floor = None;
    loop {
        let q = iterations + 1;
        let ap = a.apply(&p);
        applies += 1;
        let denom = match family {
            Family::ErrorMin => p.norm_squared(),
            Family::ResidualMin => ap.norm_squared(),
        };
        let floor = *denom_floor.get_or_insert(cfg.breakdown_tol * denom);
        if denom <= floor {
            termination = Termination::Breakdown;
            break;
        }
        let alpha = num / denom;
        if !alpha.is_finite() {
            return Err(Error::Divergence {
                what: "alpha",
                iteration: q,
            });
        }
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        if let Some((y, py, ys)) = y_state.as_mut() {
            y.axpy(alpha, py, 1.0);
            ys.push(y.clone());
        }
        let true_residual = (b - a.apply(&x)).norm();
        applies += 1;
        let recurrence_residual = r.norm();
        history.recurrence_residual_norms.push(recurrence_residual);
        history.true_residual_norms.push(true_residual);
        history.alphas.push(alpha);
        if let Some(xs) = history.iterates.as_mut() {
            xs.push(x.clone());
        }
        iterations = q;
        if true_residual <= cfg.rtol * b_norm {
            termination = Termination::Converged;
            break;
        }
        if q == max_iter {
            termination = Termination::MaxIter;
            break;
        }
        s = mapped(a, &r);
        applies += 1;
        let new_num = match family {
            Family::ErrorMin => r.norm_squared(),
            Family::ResidualMin => s.norm_squared(),
        };
        if num <= num_floor {
            termination = Termination::Breakdown;
            break;
        }
        let beta = new_num / num;
        if !beta.is_finite() {
            return Err(Error::Divergence {
                what: "beta",
                iteration: q,
            });
        }
        history.betas.push(beta);
        p = &s + beta * &p;
        if let Some((_, py, _)) = y_state.as_mut() {
            *py = &r + beta * &*py;
        }
        num = new_num;
    }

    Ok(SolveResult {
        method,
        x,
        iterations,
        termination,
        history,
        y_history: y_state.map(|(_, _, ys)| ys),
        applies,
    })
}

/// Skew-specialized CGNE (Craig's method): search directions seeded with
/// `-A r`, scalars from residual norms. Iterates live in `K_q(A^2, Ab)` and
/// minimize the error norm there.
pub fn cgne_skew(a: &dyn LinearOperator, b: &Vector, cfg: &SolverConfig) -> Result<SolveResult> {
    cg_normal(a, b, cfg, Family::ErrorMin, Panel::Skew, "cgne_skew")
}

/// Skew-specialized CGNR (CGLS): scalars from `|A r|` and `|A p|`, iterates
/// minimize the residual norm over `K_q(A^2, Ab)`.
pub fn cgnr_skew(a: &dyn LinearOperator, b: &Vector, cfg: &SolverConfig) -> Result<SolveResult> {
    cg_normal(a, b, cfg, Family::ResidualMin, Panel::Skew, "cgnr_skew")
}

/// General-form CGNE, usable when the operator is not skew (for example a
/// preconditioned system). On skew-tagged operators it reproduces
/// [`cgne_skew`] exactly, because the transpose action is the negation.
pub fn cgne_general(a: &dyn LinearOperator, b: &Vector, cfg: &SolverConfig) -> Result<SolveResult> {
    cg_normal(a, b, cfg, Family::ErrorMin, Panel::General, "cgne_general")
}

/// General-form CGNR; see [`cgne_general`].
pub fn cgnr_general(a: &dyn LinearOperator, b: &Vector, cfg: &SolverConfig) -> Result<SolveResult> {
    cg_normal(
        a,
        b,
        cfg,
        Family::ResidualMin,
        Panel::General,
        "cgnr_general",
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::DenseMatrix;
    use crate::operator::{random_vector, OpKind};
    use crate::rng::Rng;
    use crate::sparse::random_skew;

    fn rotation2() -> DenseMatrix {
        DenseMatrix::from_rows(&[&[0.0, 1.0], &[-1.0, 0.0]], OpKind::Skew).unwrap()
    }

    #[test]
    fn cgne_solves_rotation_in_one_step() {
        let a = rotation2();
        let b = Vector::from_vec(vec![1.0, 0.0]);
        let result = cgne_skew(&a, &b, &SolverConfig::new(2)).unwrap();
        assert_eq!(result.termination, Termination::Converged);
        assert_eq!(result.iterations, 1);
        assert_eq!(result.history.alphas[0], 1.0);
        assert!((result.x - Vector::from_vec(vec![0.0, 1.0])).norm() < 1e-15);
    }

    #[test]
    fn cgnr_solves_rotation_in_one_step() {
        let a = rotation2();
        let b = Vector::from_vec(vec![1.0, 0.0]);
        let result = cgnr_skew(&a, &b, &SolverConfig::new(2)).unwrap();
        assert_eq!(result.iterations, 1);
        assert_eq!(result.history.alphas[0], 1.0);
        assert!((result.x - Vector::from_vec(vec![0.0, 1.0])).norm() < 1e-15);
    }

    #[test]
    fn block_instance_terminates_at_minimal_polynomial_degree() {
        // Two distinct frequencies: the minimal polynomial of A^2 relative
        // to Ab has degree two, so both methods finish in exactly two steps.
        let a = DenseMatrix::block_rotations(&[1.0, 2.0]).unwrap();
        let b = Vector::from_vec(vec![1.0, 0.0, 1.0, 0.0]);
        let x_exact = a.solve(&b).unwrap();
        for solve in [cgne_skew, cgnr_skew] {
            let result = solve(&a, &b, &SolverConfig::new(4)).unwrap();
            assert_eq!(result.iterations, 2);
            assert_eq!(result.termination, Termination::Converged);
            assert!((&result.x - &x_exact).norm() <= 1e-10 * x_exact.norm());
        }
    }

    #[test]
    fn cgne_error_norms_are_monotone() {
        let a = random_skew(50, 0.3, 77).unwrap();
        let b = random_vector(&mut Rng::new(9), 50);
        let x_exact = a.to_dense().solve(&b).unwrap();
        let mut result = cgne_skew(&a, &b, &SolverConfig::new(50).with_history()).unwrap();
        result.attach_error_norms(&x_exact).unwrap();
        let errs = result.history.error_norms.as_ref().unwrap();
        let slack = 1e-14 * x_exact.norm();
        let mut prev = x_exact.norm();
        for (q, &err) in errs.iter().enumerate() {
            assert!(
                err <= prev + slack,
                "error rose at q={}: {prev} -> {err}",
                q + 1
            );
            prev = err;
        }
    }

    #[test]
    fn cgnr_true_residuals_are_monotone() {
        let a = random_skew(50, 0.3, 78).unwrap();
        let b = random_vector(&mut Rng::new(10), 50);
        let result = cgnr_skew(&a, &b, &SolverConfig::new(50)).unwrap();
        let slack = 1e-14 * b.norm();
        let mut prev = b.norm();
        for (q, &res) in result.history.true_residual_norms.iter().enumerate() {
            assert!(
                res <= prev + slack,
                "residual rose at q={}: {prev} -> {res}",
                q + 1
            );
            prev = res;
        }
    }

    #[test]
    fn general_panel_matches_skew_panel_on_skew_operator() {
        let a = random_skew(30, 0.5, 101).unwrap();
        let b = random_vector(&mut Rng::new(11), 30);
        let cfg = SolverConfig::new(30).with_history();
        for (skew, general) in [
            (
                cgne_skew as fn(_, _, _) -> _,
                cgne_general
                    as fn(&dyn LinearOperator, &Vector, &SolverConfig) -> Result<SolveResult>,
            ),
            (cgnr_skew, cgnr_general),
        ] {
            let rs = skew(&a, &b, &cfg).unwrap();
            let rg = general(&a, &b, &cfg).unwrap();
            assert_eq!(rs.iterations, rg.iterations);
            let xs = rs.history.iterates.as_ref().unwrap();
            let xg = rg.history.iterates.as_ref().unwrap();
            for (u, v) in xs.iter().zip(xg) {
                assert!((u - v).norm() <= 1e-12 * u.norm().max(1.0));
            }
        }
    }

    #[test]
    fn general_cgne_on_identity_converges_immediately() {
        let a = DenseMatrix::identity(5);
        let b = Vector::from_vec(vec![1.0, -2.0, 3.0, 0.5, 0.0]);
        let result = cgne_general(&a, &b, &SolverConfig::new(5)).unwrap();
        assert_eq!(result.iterations, 1);
        assert!((result.x - &b).norm() < 1e-14);
        let result = cgnr_general(&a, &b, &SolverConfig::new(5)).unwrap();
        assert_eq!(result.iterations, 1);
    }

    #[test]
    fn general_solvers_handle_nonsymmetric_systems() {
        let mut rng = Rng::new(12);
        let data = nalgebra::DMatrix::from_fn(30, 30, |_, _| rng.uniform(-1.0, 1.0));
        let a = DenseMatrix::new(data, OpKind::General).unwrap();
        assert!(a.condition_estimate() < 1e4, "bad draw for this seed");
        let b = random_vector(&mut rng, 30);
        let x_exact = a.solve(&b).unwrap();

        let mut res_e = cgne_general(&a, &b, &SolverConfig::new(30).with_history()).unwrap();
        res_e.attach_error_norms(&x_exact).unwrap();
        let errs = res_e.history.error_norms.as_ref().unwrap();
        let slack = 1e-14 * x_exact.norm();
        let mut prev = x_exact.norm();
        for &err in errs {
            assert!(err <= prev + slack);
            prev = err;
        }

        let res_r = cgnr_general(&a, &b, &SolverConfig::new(30)).unwrap();
        let slack = 1e-14 * b.norm();
        let mut prev = b.norm();
        for &res in &res_r.history.true_residual_norms {
            assert!(res <= prev + slack);
            prev = res;
        }
    }

    #[test]
    fn general_cgne_y_iterates_satisfy_transpose_relation() {
        let mut rng = Rng::new(13);
        let data = nalgebra::DMatrix::from_fn(20, 20, |_, _| rng.uniform(-1.0, 1.0));
        let a = DenseMatrix::new(data, OpKind::General).unwrap();
        let b = random_vector(&mut rng, 20);
        let result = cgne_general(&a, &b, &SolverConfig::new(20).with_history()).unwrap();
        let ys = result.y_history.as_ref().unwrap();
        let xs = result.history.iterates.as_ref().unwrap();
        assert_eq!(ys.len(), xs.len());
        for (x, y) in xs.iter().zip(ys) {
            let aty = a.apply_transpose(y);
            assert!((x - aty).norm() <= 1e-10 * x.norm().max(1.0));
        }
    }

    #[test]
    fn recurrence_and_true_residuals_agree_above_tolerance() {
        let a = random_skew(60, 0.2, 300).unwrap();
        let b = random_vector(&mut Rng::new(14), 60);
        let cfg = SolverConfig::new(60).with_rtol(1e-10);
        let result = cgnr_skew(&a, &b, &cfg).unwrap();
        for (rec, truth) in result
            .history
            .recurrence_residual_norms
            .iter()
            .zip(&result.history.true_residual_norms)
        {
            if *truth > cfg.rtol * b.norm() {
                // Relative agreement, with an absolute floor where both
                // norms sit near the rounding plateau.
                let allowed = 1e-8 * truth.max(1e-6 * b.norm());
                assert!((rec - truth).abs() <= allowed, "{rec} vs {truth}");
            }
        }
    }

    #[test]
    fn skew_panel_requires_skew_tag() {
        let a = DenseMatrix::identity(4);
        let b = Vector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            cgne_skew(&a, &b, &SolverConfig::new(4)),
            Err(Error::BadConfig(_))
        ));
    }

    #[test]
    fn zero_rhs_is_trivially_converged() {
        let a = rotation2();
        let b = Vector::zeros(2);
        let result = cgne_skew(&a, &b, &SolverConfig::new(2)).unwrap();
        assert_eq!(result.iterations, 0);
        assert_eq!(result.termination, Termination::Converged);
        assert_eq!(result.x, Vector::zeros(2));
    }

    #[test]
    fn unreachable_tolerance_hits_max_iter() {
        let a = DenseMatrix::block_rotations(&[1.0, 2.0, 3.0]).unwrap();
        let b = Vector::from_vec(vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let cfg = SolverConfig::new(6).with_rtol(0.0).with_max_iter(2);
        let result = cgne_skew(&a, &b, &cfg).unwrap();
        assert_eq!(result.termination, Termination::MaxIter);
        assert_eq!(result.iterations, 2);
    }
}
