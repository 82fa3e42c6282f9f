//! Explicit-basis reference solvers and brute-force subspace minimizers.
//!
//! These are oracles, not production paths: they build an orthonormal basis,
//! project the problem onto it, and solve the small projected problem by
//! dense factorization. The recurrence solvers in [`crate::solvers`] are
//! cross-checked against them, which gives two independent computation
//! routes for every equivalence claim.

use nalgebra::SVD;

use crate::error::{Error, Result};
use crate::krylov::{build_basis, KrylovBasis, DEFAULT_BREAKDOWN_TOL};
use crate::operator::{LinearOperator, SquaredOperator, Vector};

/// Relative smallest-singular-value threshold below which the projected
/// Galerkin matrix counts as singular and the iterate as nonexistent.
pub const GALERKIN_SINGULARITY_THRESHOLD: f64 = 1e-12;

/// A Galerkin iterate either exists or the projected matrix `Q^t A Q` is
/// singular. For skew operators the odd-dimensional projections are always
/// singular (an odd-dimensional skew-symmetric matrix has zero determinant),
/// so nonexistence is an expected value, not an error.
#[derive(Debug, Clone)]
pub enum GalerkinIterate {
    Exists(Vector),
    Nonexistent {
        /// Smallest singular value of the projected matrix.
        sigma_min: f64,
        /// Scale `sigma_min` was judged against: the larger of the projected
        /// matrix's top singular value and the largest basis-image norm (an
        /// operator-scale floor, needed because at m = 1 the projected
        /// matrix is entirely rounding residue).
        scale: f64,
    },
}

impl GalerkinIterate {
    pub fn exists(&self) -> bool {
        matches!(self, GalerkinIterate::Exists(_))
    }

    pub fn vector(&self) -> Option<&Vector> {
        match self {
            GalerkinIterate::Exists(x) => Some(x),
            GalerkinIterate::Nonexistent { .. } => None,
        }
    }
}

fn skew_basis(a: &dyn LinearOperator, b: &Vector, m: usize) -> Result<KrylovBasis> {
    if !a.is_skew() {
        return Err(Error::BadConfig(
            "reference solvers require a skew-tagged operator",
        ));
    }
    if m == 0 {
        return Err(Error::BadConfig("subspace dimension must be positive"));
    }
    let basis = build_basis(a, b, m, DEFAULT_BREAKDOWN_TOL)?;
    if basis.dim() < m {
        return Err(Error::BasisTruncated {
            requested: m,
            grade: basis.dim(),
        });
    }
    Ok(basis)
}

/// Solves the projected Galerkin system `H c = rhs` or reports `H` singular.
/// `scale_floor` guards the singularity test when every entry of `H` is
/// rounding residue of an exactly-singular projection.
fn galerkin_coeffs(
    projected: nalgebra::DMatrix<f64>,
    rhs: &Vector,
    scale_floor: f64,
) -> std::result::Result<Vector, (f64, f64)> {
    let svd = SVD::new(projected.clone(), false, false);
    let mut sigma_max: f64 = 0.0;
    let mut sigma_min = f64::INFINITY;
    for &s in svd.singular_values.iter() {
        sigma_max = sigma_max.max(s);
        sigma_min = sigma_min.min(s);
    }
    let scale = sigma_max.max(scale_floor);
    if sigma_min <= GALERKIN_SINGULARITY_THRESHOLD * scale {
        return Err((sigma_min, scale));
    }
    projected.lu().solve(rhs).ok_or((sigma_min, scale))
}

fn max_column_norm(images: &nalgebra::DMatrix<f64>) -> f64 {
    (0..images.ncols())
        .map(|j| images.column(j).norm())
        .fold(0.0, f64::max)
}

/// The unique vector in `K_m(A, b)` whose residual is orthogonal to the
/// whole subspace, computed as `Q (Q^t A Q)^{-1} Q^t b` — or a report that
/// the projected matrix is singular and the iterate does not exist.
pub fn galerkin_reference(a: &dyn LinearOperator, b: &Vector, m: usize) -> Result<GalerkinIterate> {
    let basis = skew_basis(a, b, m)?;
    let images = basis.map_columns(a);
    let projected = basis.columns().tr_mul(&images);
    let rhs = basis.project_coeffs(b);
    Ok(
        match galerkin_coeffs(projected, &rhs, max_column_norm(&images)) {
            Ok(coeffs) => GalerkinIterate::Exists(basis.combine(&coeffs)),
            Err((sigma_min, scale)) => GalerkinIterate::Nonexistent { sigma_min, scale },
        },
    )
}

/// Least-squares coefficients `argmin_c |b - W c|` for a full-column-rank
/// image matrix `W`.
fn least_squares(w: &nalgebra::DMatrix<f64>, b: &Vector) -> Result<Vector> {
    let svd = SVD::new(w.clone(), true, true);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = f64::EPSILON * sigma_max * w.nrows().max(w.ncols()) as f64;
    svd.solve(b, eps)
        .map(|m| m.column(0).into_owned())
        .map_err(|_| Error::SingularMatrix {
            cond_est: f64::INFINITY,
        })
}

/// `argmin_{z in K_m(A, b)} |b - Az|` by dense least squares over the image
/// vectors of an orthonormal basis.
pub fn minres_reference(a: &dyn LinearOperator, b: &Vector, m: usize) -> Result<Vector> {
    let basis = skew_basis(a, b, m)?;
    let images = basis.map_columns(a);
    let coeffs = least_squares(&images, b)?;
    Ok(basis.combine(&coeffs))
}

fn squared_odd_basis(a: &dyn LinearOperator, b: &Vector, q: usize) -> Result<KrylovBasis> {
    if !a.is_skew() {
        return Err(Error::BadConfig(
            "minimizer oracles require a skew-tagged operator",
        ));
    }
    if q == 0 {
        return Err(Error::BadConfig("subspace dimension must be positive"));
    }
    let squared = SquaredOperator::new(a);
    let seed = a.apply(b);
    let basis = build_basis(&squared, &seed, q, DEFAULT_BREAKDOWN_TOL)?;
    if basis.dim() < q {
        return Err(Error::BasisTruncated {
            requested: q,
            grade: basis.dim(),
        });
    }
    Ok(basis)
}

/// `argmin_{z in K_q(A^2, Ab)} |z - x|`: the orthogonal projection of the
/// oracle solution onto the subspace the error-minimizing recurrence
/// searches. Cross-checks CGNE iterates.
pub fn error_minimizer_oracle(
    a: &dyn LinearOperator,
    b: &Vector,
    q: usize,
    x_exact: &Vector,
) -> Result<Vector> {
    let basis = squared_odd_basis(a, b, q)?;
    Ok(basis.project(x_exact))
}

/// `argmin_{z in K_q(A^2, Ab)} |b - Az|` by dense least squares.
/// Cross-checks CGNR iterates.
pub fn residual_minimizer_oracle(a: &dyn LinearOperator, b: &Vector, q: usize) -> Result<Vector> {
    let basis = squared_odd_basis(a, b, q)?;
    let images = basis.map_columns(a);
    let coeffs = least_squares(&images, b)?;
    Ok(basis.combine(&coeffs))
}

/// Galerkin and minimum-residual iterates for every `m` up to `m_max`
/// (clamped at the grade), computed from one shared basis so a full
/// convergence table costs one basis build.
pub struct ReferenceIterate {
    pub m: usize,
    pub galerkin: GalerkinIterate,
    pub minres: Vector,
}

pub fn reference_sweep(
    a: &dyn LinearOperator,
    b: &Vector,
    m_max: usize,
) -> Result<Vec<ReferenceIterate>> {
    if !a.is_skew() {
        return Err(Error::BadConfig(
            "reference solvers require a skew-tagged operator",
        ));
    }
    let basis = build_basis(a, b, m_max, DEFAULT_BREAKDOWN_TOL)?;
    let cap = basis.dim();
    let images = basis.map_columns(a);
    let projected = basis.columns().tr_mul(&images);
    let rhs = basis.project_coeffs(b);
    let mut out = Vec::with_capacity(cap);
    for m in 1..=cap {
        let block = projected.view((0, 0), (m, m)).into_owned();
        let rhs_m = rhs.rows(0, m).into_owned();
        let prefix = basis.columns().columns(0, m);
        let scale_floor = max_column_norm(&images.columns(0, m).into_owned());
        let galerkin = match galerkin_coeffs(block, &rhs_m, scale_floor) {
            Ok(coeffs) => GalerkinIterate::Exists(prefix * coeffs),
            Err((sigma_min, scale)) => GalerkinIterate::Nonexistent { sigma_min, scale },
        };
        let w = images.columns(0, m).into_owned();
        let coeffs = least_squares(&w, b)?;
        let minres = prefix * coeffs;
        out.push(ReferenceIterate {
            m,
            galerkin,
            minres,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::DenseMatrix;
    use crate::operator::{random_vector, OpKind};
    use crate::rng::Rng;
    use crate::solvers::{cgne_skew, cgnr_skew, SolverConfig};
    use crate::sparse::random_skew;

    fn rotation2() -> DenseMatrix {
        DenseMatrix::from_rows(&[&[0.0, 1.0], &[-1.0, 0.0]], OpKind::Skew).unwrap()
    }

    #[test]
    fn galerkin_iterate_never_exists_at_dimension_one() {
        // q1^t A q1 = 0 for skew A, so the 1x1 projection is singular.
        let a = rotation2();
        let b = Vector::from_vec(vec![1.0, 0.0]);
        match galerkin_reference(&a, &b, 1).unwrap() {
            GalerkinIterate::Nonexistent { sigma_min, .. } => assert_eq!(sigma_min, 0.0),
            GalerkinIterate::Exists(_) => panic!("1-dimensional Galerkin iterate cannot exist"),
        }
    }

    #[test]
    fn galerkin_parity_on_random_instance() {
        let a = random_skew(30, 0.4, 60).unwrap();
        let b = random_vector(&mut Rng::new(15), 30);
        for m in 1..=8 {
            let iterate = galerkin_reference(&a, &b, m).unwrap();
            if m % 2 == 1 {
                assert!(!iterate.exists(), "odd m = {m} produced an iterate");
            } else {
                assert!(iterate.exists(), "even m = {m} missing");
            }
        }
    }

    #[test]
    fn galerkin_iterate_satisfies_its_orthogonality_condition() {
        let a = random_skew(50, 0.3, 61).unwrap();
        let b = random_vector(&mut Rng::new(16), 50);
        for m in [2, 4, 6] {
            let x = match galerkin_reference(&a, &b, m).unwrap() {
                GalerkinIterate::Exists(x) => x,
                GalerkinIterate::Nonexistent { .. } => panic!("even iterate missing"),
            };
            let residual = &b - a.apply(&x);
            let basis = build_basis(&a, &b, m, DEFAULT_BREAKDOWN_TOL).unwrap();
            for i in 0..m {
                let dev = basis.column(i).dot(&residual).abs() / b.norm();
                assert!(dev <= 1e-10, "m = {m}, column {i}: {dev}");
            }
        }
    }

    #[test]
    fn minres_at_dimension_one_is_zero_for_skew() {
        let a = rotation2();
        let b = Vector::from_vec(vec![1.0, 0.0]);
        let x = minres_reference(&a, &b, 1).unwrap();
        assert!(x.norm() <= 1e-12 * b.norm());
    }

    #[test]
    fn minres_odd_step_stalls() {
        let a = random_skew(40, 0.35, 62).unwrap();
        let b = random_vector(&mut Rng::new(17), 40);
        for q in 1..=3 {
            let even = minres_reference(&a, &b, 2 * q).unwrap();
            let odd = minres_reference(&a, &b, 2 * q + 1).unwrap();
            assert!(
                (&odd - &even).norm() <= 1e-10 * even.norm(),
                "q = {q}: odd iterate moved"
            );
        }
    }

    #[test]
    fn minres_beats_random_competitors() {
        let a = random_skew(30, 0.4, 63).unwrap();
        let b = random_vector(&mut Rng::new(18), 30);
        let m = 6;
        let x = minres_reference(&a, &b, m).unwrap();
        let best = (&b - a.apply(&x)).norm();
        let basis = build_basis(&a, &b, m, DEFAULT_BREAKDOWN_TOL).unwrap();
        let mut rng = Rng::new(19);
        for _ in 0..100 {
            let coeffs = Vector::from_fn(m, |_, _| rng.normal());
            let z = basis.combine(&coeffs);
            let res = (&b - a.apply(&z)).norm();
            assert!(best <= res * (1.0 + 1e-12), "{best} vs competitor {res}");
        }
    }

    #[test]
    fn minres_iterate_satisfies_image_orthogonality() {
        let a = random_skew(30, 0.4, 64).unwrap();
        let b = random_vector(&mut Rng::new(20), 30);
        let m = 5;
        let x = minres_reference(&a, &b, m).unwrap();
        let residual = &b - a.apply(&x);
        let basis = build_basis(&a, &b, m, DEFAULT_BREAKDOWN_TOL).unwrap();
        for i in 0..m {
            let image = a.apply(&basis.column(i));
            let dev = image.dot(&residual).abs() / (image.norm() * b.norm());
            assert!(dev <= 1e-10, "column {i}: {dev}");
        }
    }

    #[test]
    fn error_oracle_on_rotation() {
        // span{Ab} = span{(0, -1)} contains x = (0, 1).
        let a = rotation2();
        let b = Vector::from_vec(vec![1.0, 0.0]);
        let x = a.solve(&b).unwrap();
        let projected = error_minimizer_oracle(&a, &b, 1, &x).unwrap();
        assert!((projected - &x).norm() < 1e-15);
    }

    #[test]
    fn residual_oracle_on_rotation() {
        let a = rotation2();
        let b = Vector::from_vec(vec![1.0, 0.0]);
        let z = residual_minimizer_oracle(&a, &b, 1).unwrap();
        assert!((z - Vector::from_vec(vec![0.0, 1.0])).norm() < 1e-14);
    }

    #[test]
    fn oracle_at_grade_recovers_the_solution() {
        let a = DenseMatrix::block_rotations(&[1.0, 3.0]).unwrap();
        let b = Vector::from_vec(vec![1.0, 0.0, 1.0, 0.0]);
        let x = a.solve(&b).unwrap();
        // Grade of K(A^2, Ab) is 2 here.
        let projected = error_minimizer_oracle(&a, &b, 2, &x).unwrap();
        assert!((&projected - &x).norm() <= 1e-12 * x.norm());
        let z = residual_minimizer_oracle(&a, &b, 2).unwrap();
        let res = (&b - a.apply(&z)).norm();
        assert!(res <= 1e-12 * b.norm());
    }

    #[test]
    fn recurrence_iterates_beat_random_subspace_competitors() {
        // CGNE minimizes the error norm and CGNR the residual norm over
        // K_q(A^2, Ab); no random member of the subspace may do better.
        let a = random_skew(40, 0.3, 67).unwrap();
        let b = random_vector(&mut Rng::new(25), 40);
        let x_exact = a.to_dense().solve(&b).unwrap();
        let cfg = SolverConfig::new(40)
            .with_rtol(1e-14)
            .with_max_iter(4)
            .with_history();
        let cgne = cgne_skew(&a, &b, &cfg).unwrap();
        let cgnr = cgnr_skew(&a, &b, &cfg).unwrap();
        let squared = crate::operator::SquaredOperator::new(&a);
        let ab = a.apply(&b);
        let mut rng = Rng::new(26);
        for q in 1..=4usize {
            let basis = build_basis(&squared, &ab, q, DEFAULT_BREAKDOWN_TOL).unwrap();
            let err_e = (cgne.history.iterate(q).unwrap() - &x_exact).norm();
            let res_r = (&b - a.apply(cgnr.history.iterate(q).unwrap())).norm();
            for _ in 0..100 {
                let z = basis.combine(&Vector::from_fn(q, |_, _| rng.normal()));
                assert!(err_e <= (&z - &x_exact).norm() * (1.0 + 1e-10), "q = {q}");
                assert!(
                    res_r <= (&b - a.apply(&z)).norm() * (1.0 + 1e-10),
                    "q = {q}"
                );
            }
        }
    }

    #[test]
    fn recurrences_match_their_oracles() {
        let a = random_skew(50, 0.25, 65).unwrap();
        let b = random_vector(&mut Rng::new(21), 50);
        let x_exact = a.to_dense().solve(&b).unwrap();
        let cfg = SolverConfig::new(50)
            .with_rtol(1e-14)
            .with_max_iter(5)
            .with_history();
        let cgne = cgne_skew(&a, &b, &cfg).unwrap();
        let cgnr = cgnr_skew(&a, &b, &cfg).unwrap();
        for q in 1..=5 {
            if q <= cgne.iterations {
                let oracle = error_minimizer_oracle(&a, &b, q, &x_exact).unwrap();
                let iterate = cgne.history.iterate(q).unwrap();
                let dev = (iterate - &oracle).norm() / oracle.norm();
                assert!(dev <= 1e-8, "CGNE q = {q}: {dev}");
            }
            if q <= cgnr.iterations {
                let oracle = residual_minimizer_oracle(&a, &b, q).unwrap();
                let iterate = cgnr.history.iterate(q).unwrap();
                let dev = (iterate - &oracle).norm() / oracle.norm();
                assert!(dev <= 1e-8, "CGNR q = {q}: {dev}");
            }
        }
    }

    #[test]
    fn sweep_agrees_with_single_shot_references() {
        let a = random_skew(30, 0.4, 66).unwrap();
        let b = random_vector(&mut Rng::new(24), 30);
        let sweep = reference_sweep(&a, &b, 6).unwrap();
        assert_eq!(sweep.len(), 6);
        for item in &sweep {
            let single_m = minres_reference(&a, &b, item.m).unwrap();
            assert!((&item.minres - &single_m).norm() <= 1e-11 * single_m.norm().max(1.0));
            let single_g = galerkin_reference(&a, &b, item.m).unwrap();
            match (&item.galerkin, &single_g) {
                (GalerkinIterate::Exists(u), GalerkinIterate::Exists(v)) => {
                    assert!((u - v).norm() <= 1e-11 * v.norm())
                }
                (GalerkinIterate::Nonexistent { .. }, GalerkinIterate::Nonexistent { .. }) => {}
                _ => panic!("existence mismatch at m = {}", item.m),
            }
        }
    }

    #[test]
    fn truncation_past_grade_is_an_error() {
        let a = DenseMatrix::block_rotations(&[2.0]).unwrap();
        let b = Vector::from_vec(vec![1.0, 0.0]);
        // Grade of K(A, b) is 2.
        assert!(matches!(
            galerkin_reference(&a, &b, 3),
            Err(Error::BasisTruncated { grade: 2, .. })
        ));
        assert!(matches!(
            minres_reference(&a, &b, 4),
            Err(Error::BasisTruncated { .. })
        ));
        assert!(matches!(
            residual_minimizer_oracle(&a, &b, 2),
            Err(Error::BasisTruncated { grade: 1, .. })
        ));
    }

    #[test]
    fn reference_solvers_reject_general_operators() {
        let a = DenseMatrix::identity(4);
        let b = Vector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        assert!(galerkin_reference(&a, &b, 2).is_err());
        assert!(minres_reference(&a, &b, 2).is_err());
    }
}
