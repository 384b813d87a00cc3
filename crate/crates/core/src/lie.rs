//! Matrix Lie algebra closure and the rank certificates LARC, LARC0 and PLARC.
//!
//! The closure is computed breadth-first: the span of the (normalized)
//! generators is repeatedly extended by brackets of the newest basis elements
//! against the generators. Left-normed brackets of generators span the
//! generated Lie algebra, so this reaches the full algebra.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matcore::{self, commutator, gaussian_matrix, require_square, trace, Matrix, RANK_TOL};

/// Absolute singular-value threshold for the tangent-span rank at a sample
/// point. Basis elements have unit Frobenius norm, so the tangent vectors are
/// O(1) and this is a relative threshold in disguise.
pub const PLARC_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct LieBasis {
    pub dim: usize,
    /// Orthonormal under the Frobenius inner product.
    pub basis: Vec<Matrix>,
    pub all_traceless: bool,
    pub depth_reached: usize,
}

impl LieBasis {
    pub fn matrix_dim(&self) -> usize {
        self.basis.first().map_or(0, |m| m.nrows())
    }

    /// Build a basis directly from a spanning family (no bracketing).
    pub fn from_span(family: &[Matrix], tol: f64) -> Result<Self> {
        let mut basis = Vec::new();
        for m in family {
            let n = m.norm();
            if n > 0.0 {
                push_if_new(&mut basis, m / n, tol);
            }
        }
        Ok(Self::finish(basis, 0))
    }

    fn finish(basis: Vec<Matrix>, depth_reached: usize) -> Self {
        let all_traceless = basis.iter().all(|m| trace(m).abs() <= traceless_tol(m));
        LieBasis {
            dim: basis.len(),
            basis,
            all_traceless,
            depth_reached,
        }
    }
}

fn traceless_tol(m: &Matrix) -> f64 {
    1e-9 * (1.0 + m.norm())
}

/// Gram-Schmidt (two passes) of `candidate` against an orthonormal `basis`;
/// appends and returns true when the residual exceeds `tol`.
fn push_if_new(basis: &mut Vec<Matrix>, candidate: Matrix, tol: f64) -> bool {
    let mut r = candidate;
    for _ in 0..2 {
        for q in basis.iter() {
            let c = q.dot(&r);
            r -= q * c;
        }
    }
    let n = r.norm();
    if n > tol {
        basis.push(r / n);
        true
    } else {
        false
    }
}

pub fn bracket(m: &Matrix, n: &Matrix) -> Result<Matrix> {
    require_square(m, "bracket argument")?;
    if m.shape() != n.shape() {
        return Err(Error::Shape(format!(
            "bracket of {:?} and {:?}",
            m.shape(),
            n.shape()
        )));
    }
    Ok(commutator(m, n))
}

pub fn lie_closure(generators: &[Matrix], tol: f64, max_depth: usize) -> Result<LieBasis> {
    let first = generators
        .first()
        .ok_or_else(|| Error::InvalidInput("empty generator list".into()))?;
    let d = require_square(first, "generator")?;
    if generators.iter().any(|g| g.shape() != (d, d)) {
        return Err(Error::Shape(
            "generators must share one square shape".into(),
        ));
    }
    let full = d * d;
    let gens: Vec<Matrix> = generators
        .iter()
        .filter_map(|g| {
            let n = g.norm();
            (n > 0.0).then(|| g / n)
        })
        .collect();

    let mut basis: Vec<Matrix> = Vec::new();
    let mut frontier: Vec<Matrix> = Vec::new();
    for g in &gens {
        if push_if_new(&mut basis, g.clone(), tol) {
            frontier.push(basis.last().unwrap().clone());
        }
    }
    let mut depth = 0;
    while !frontier.is_empty() && basis.len() < full {
        if depth == max_depth {
            return Err(Error::ClosureNotStabilized {
                max_depth,
                dim: basis.len(),
                partial: Box::new(LieBasis::finish(basis, depth)),
            });
        }
        depth += 1;
        let mut next = Vec::new();
        for z in &frontier {
            for g in &gens {
                if basis.len() == full {
                    break;
                }
                if push_if_new(&mut basis, commutator(g, z), tol) {
                    next.push(basis.last().unwrap().clone());
                }
            }
        }
        frontier = next;
    }
    Ok(LieBasis::finish(basis, depth))
}

/// Closure with the default tolerance and depth cap `d^2`.
pub fn closure_of(generators: &[Matrix]) -> Result<LieBasis> {
    let d = generators.first().map_or(0, |g| g.nrows());
    lie_closure(generators, RANK_TOL, d * d)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CertificateKind {
    #[serde(rename = "LARC")]
    Larc,
    #[serde(rename = "LARC0")]
    Larc0,
    #[serde(rename = "PLARC")]
    Plarc,
}

#[derive(Clone, Debug, Serialize)]
pub struct RankCertificate {
    pub kind: CertificateKind,
    pub verdict: bool,
    pub dim: usize,
    pub failing_samples: Vec<Vec<f64>>,
    pub tol: f64,
    /// Number of projective points examined (PLARC only). Not part of the
    /// wire format.
    #[serde(skip)]
    pub samples: Option<usize>,
}

fn feedback_generators(a: &Matrix, b: &Matrix, k: &Matrix) -> Result<(usize, Matrix)> {
    let d = require_square(a, "A")?;
    if b.nrows() != d || k.ncols() != d || k.nrows() != b.ncols() {
        return Err(Error::Shape(format!(
            "A {:?}, B {:?}, K {:?} are inconsistent",
            a.shape(),
            b.shape(),
            k.shape()
        )));
    }
    Ok((d, b * k))
}

pub fn check_larc(a: &Matrix, b: &Matrix, k: &Matrix) -> Result<RankCertificate> {
    let (d, bk) = feedback_generators(a, b, k)?;
    let l = closure_of(&[a.clone(), bk])?;
    Ok(RankCertificate {
        kind: CertificateKind::Larc,
        verdict: l.dim == d * d,
        dim: l.dim,
        failing_samples: Vec::new(),
        tol: RANK_TOL,
        samples: None,
    })
}

/// `M - (Tr M / d) Id`.
pub fn traceless_part(m: &Matrix) -> Matrix {
    let d = m.nrows();
    m - Matrix::identity(d, d) * (trace(m) / d as f64)
}

pub fn check_larc0(a: &Matrix, b: &Matrix, k: &Matrix) -> Result<RankCertificate> {
    let (d, bk) = feedback_generators(a, b, k)?;
    let l = closure_of(&[traceless_part(a), traceless_part(&bk)])?;
    Ok(RankCertificate {
        kind: CertificateKind::Larc0,
        verdict: l.dim == d * d - 1 && l.all_traceless,
        dim: l.dim,
        failing_samples: Vec::new(),
        tol: RANK_TOL,
        samples: None,
    })
}

/// Quasi-uniform representatives of the projective space: evenly spaced
/// angles on a half circle for d = 2, a Fibonacci lattice on the upper
/// hemisphere for d = 3, seeded Gaussian directions beyond that.
pub fn projective_samples(d: usize, samples: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match d {
        2 => {
            let offset: f64 = rand::Rng::random(&mut rng);
            (0..samples)
                .map(|i| {
                    let th = (i as f64 + offset) * std::f64::consts::PI / samples as f64;
                    DVector::from_vec(vec![th.cos(), th.sin()])
                })
                .collect()
        }
        3 => {
            // Fibonacci lattice on the whole sphere, keep one point per antipodal pair.
            let n = 2 * samples;
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..n)
                .filter_map(|i| {
                    let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
                    if z <= 0.0 {
                        return None;
                    }
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * i as f64;
                    Some(DVector::from_vec(vec![r * phi.cos(), r * phi.sin(), z]))
                })
                .collect()
        }
        _ => (0..samples)
            .map(|_| {
                let g = gaussian_matrix(&mut rng, d, 1);
                DVector::from_column_slice(g.as_slice()) / g.norm()
            })
            .collect(),
    }
}

/// Rank of `{Mx - (x'Mx)x : M in basis}` at the unit vector `x`.
pub fn tangent_rank(basis: &[Matrix], x: &DVector<f64>) -> Result<usize> {
    let d = x.len();
    if basis.is_empty() {
        return Ok(0);
    }
    let cols: Vec<DVector<f64>> = basis
        .iter()
        .map(|m| {
            let mx = m * x;
            let radial = x.dot(&mx);
            mx - x * radial
        })
        .collect();
    let stacked = Matrix::from_columns(&cols);
    let s = matcore::singular_values(&stacked)?;
    Ok(s.iter().filter(|&&v| v > PLARC_TOL).count().min(d))
}

pub fn check_plarc(
    a: &Matrix,
    b: &Matrix,
    k: &Matrix,
    samples: usize,
    seed: u64,
) -> Result<RankCertificate> {
    let (d, bk) = feedback_generators(a, b, k)?;
    if samples < 2 * d {
        return Err(Error::Precondition(format!(
            "PLARC needs at least {} samples, got {samples}",
            2 * d
        )));
    }
    let l = closure_of(&[a.clone(), bk.clone()])?;
    let mut points = projective_samples(d, samples, seed);
    points.extend(matcore::eigen_directions(a)?);
    points.extend(matcore::eigen_directions(&(a + &bk))?);
    // Ranges of the generators sit inside every invariant subspace they span.
    for g in [a, &bk] {
        for c in g.column_iter() {
            let n = c.norm();
            if n > RANK_TOL {
                points.push(c / n);
            }
        }
    }
    let mut failing = Vec::new();
    for x in &points {
        if tangent_rank(&l.basis, x)? < d - 1 {
            failing.push(x.iter().copied().collect());
        }
    }
    Ok(RankCertificate {
        kind: CertificateKind::Plarc,
        verdict: failing.is_empty(),
        dim: l.dim,
        failing_samples: failing,
        tol: PLARC_TOL,
        samples: Some(points.len()),
    })
}

/// Smallest subspace containing `start` and invariant under every basis
/// element, returned as its dimension.
pub fn invariant_hull_dim(basis: &[Matrix], start: &DVector<f64>) -> usize {
    let d = start.len();
    let mut span: Vec<DVector<f64>> = Vec::new();
    let push = |span: &mut Vec<DVector<f64>>, v: DVector<f64>| -> Option<DVector<f64>> {
        let mut r = v;
        for _ in 0..2 {
            for q in span.iter() {
                let c = q.dot(&r);
                r -= q * c;
            }
        }
        let n = r.norm();
        (n > RANK_TOL).then(|| {
            let q = r / n;
            span.push(q.clone());
            q
        })
    };
    let mut frontier: Vec<DVector<f64>> = push(&mut span, start.clone()).into_iter().collect();
    while !frontier.is_empty() && span.len() < d {
        let mut next = Vec::new();
        for v in &frontier {
            for m in basis {
                if let Some(q) = push(&mut span, m * v) {
                    next.push(q);
                }
            }
        }
        frontier = next;
    }
    span.len()
}

/// Irreducibility test. Any invariant subspace of the algebra is invariant
/// under a generic element, so it contains one of that element's real
/// eigendirections; the Krylov hulls of those directions (and of a few random
/// vectors) are therefore enough to expose it.
pub fn check_irreducible(l: &LieBasis, trials: usize, seed: u64) -> Result<bool> {
    let d = l.matrix_dim();
    if d == 0 {
        return Ok(false);
    }
    if trials < d {
        return Err(Error::Precondition(format!(
            "need at least {d} trials, got {trials}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let coeffs = gaussian_matrix(&mut rng, l.dim, 1);
        let generic = l
            .basis
            .iter()
            .zip(coeffs.iter())
            .fold(Matrix::zeros(d, d), |acc, (m, c)| acc + m * *c);
        let mut starts = matcore::eigen_directions(&generic)?;
        let g = gaussian_matrix(&mut rng, d, 1);
        starts.push(DVector::from_column_slice(g.as_slice()) / g.norm());
        if starts.iter().any(|v| invariant_hull_dim(&l.basis, v) < d) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainReport {
    pub lambda: f64,
    pub larc_shifted: RankCertificate,
    pub larc0: RankCertificate,
    pub plarc: RankCertificate,
    pub violations: Vec<String>,
}

/// Default number of projective sample points used by audits.
pub const DEFAULT_PLARC_SAMPLES: usize = 256;

/// Evaluate `LARC(A + λId, B) ⇒ LARC0(A, B) ⇒ PLARC(A, B)` at certificate level.
pub fn inclusion_chain_audit(
    a: &Matrix,
    b: &Matrix,
    k: &Matrix,
    lambda: f64,
) -> Result<ChainReport> {
    let d = require_square(a, "A")?;
    let shifted = a + Matrix::identity(d, d) * lambda;
    let larc_shifted = check_larc(&shifted, b, k)?;
    let larc0 = check_larc0(a, b, k)?;
    let plarc = check_plarc(a, b, k, DEFAULT_PLARC_SAMPLES, 0)?;
    let mut violations = Vec::new();
    if larc_shifted.verdict && !larc0.verdict {
        violations.push(format!("LARC(A{lambda:+}Id,B) holds but LARC0(A,B) fails"));
    }
    if larc0.verdict && !plarc.verdict {
        violations.push("LARC0(A,B) holds but PLARC(A,B) fails".into());
    }
    Ok(ChainReport {
        lambda,
        larc_shifted,
        larc0,
        plarc,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{basis_column, rotation_generator, shift};

    fn e21() -> Matrix {
        Matrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0])
    }

    /// Independent oracle: enumerate all left-normed brackets up to a length,
    /// then take the span rank of the whole family.
    fn brute_force_dim(gens: &[Matrix], length: usize) -> usize {
        let mut words: Vec<Matrix> = gens.to_vec();
        let mut all = words.clone();
        for _ in 1..length {
            let mut next = Vec::new();
            for w in &words {
                for g in gens {
                    next.push(g * w - w * g);
                }
            }
            all.extend(next.iter().cloned());
            words = next;
        }
        matcore::span_rank(&all, 1e-9).unwrap()
    }

    #[test]
    fn bracket_examples() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(bracket(&m, &m).unwrap(), Matrix::zeros(2, 2));
        let b = bracket(&shift(2), &e21()).unwrap();
        assert_eq!(b, Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]));
        assert!(bracket(&m, &Matrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn closure_examples() {
        let l = closure_of(&[Matrix::identity(2, 2)]).unwrap();
        assert_eq!(l.dim, 1);
        assert!(!l.all_traceless);

        let gens = [shift(2), e21()];
        let l = closure_of(&gens).unwrap();
        assert_eq!(brute_force_dim(&gens, 4), 3);
        assert_eq!(l.dim, 3);
        assert!(l.all_traceless);

        let k = Matrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]);
        let gens = [shift(3), basis_column(3, 3) * k];
        assert_eq!(brute_force_dim(&gens, 9), 9);
        assert_eq!(closure_of(&gens).unwrap().dim, 9);
    }

    #[test]
    fn closure_basis_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let gens = [
            gaussian_matrix(&mut rng, 3, 3),
            gaussian_matrix(&mut rng, 3, 3),
        ];
        let l = closure_of(&gens).unwrap();
        for (i, p) in l.basis.iter().enumerate() {
            for (j, q) in l.basis.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((p.dot(q) - expected).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn closure_depth_cap_reports_partial_basis() {
        let gens = [
            shift(3),
            basis_column(3, 3) * Matrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]),
        ];
        match lie_closure(&gens, RANK_TOL, 1) {
            Err(Error::ClosureNotStabilized { dim, partial, .. }) => {
                assert_eq!(dim, partial.dim);
                assert!(dim < 9);
            }
            other => panic!("expected depth error, got {other:?}"),
        }
        assert!(lie_closure(&[], RANK_TOL, 3).is_err());
    }

    #[test]
    fn larc_examples() {
        let b = basis_column(2, 2);
        let k = Matrix::from_row_slice(1, 2, &[1.0, 1.0]);
        assert!(check_larc(&shift(2), &b, &k).unwrap().verdict);

        let zero = Matrix::zeros(3, 3);
        let c = check_larc(
            &zero,
            &Matrix::zeros(3, 1),
            &Matrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0]),
        )
        .unwrap();
        assert!(!c.verdict && c.dim <= 1);

        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let k = Matrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let gens = [a.clone(), &b * &k];
        assert!(brute_force_dim(&gens, 4) < 4);
        assert!(!check_larc(&a, &b, &k).unwrap().verdict);
    }

    #[test]
    fn larc0_examples() {
        let b = basis_column(2, 2);
        let k = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        assert_eq!(
            brute_force_dim(&[shift(2), traceless_part(&(&b * &k))], 4),
            3
        );
        let c = check_larc0(&shift(2), &b, &k).unwrap();
        assert!(c.verdict);
        assert_eq!(c.dim, 3);

        let c = check_larc0(&Matrix::identity(2, 2), &Matrix::zeros(2, 1), &k).unwrap();
        assert!(!c.verdict);
    }

    #[test]
    fn larc0_generic_controllable_d3() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut hits = 0;
        for _ in 0..100 {
            let a = gaussian_matrix(&mut rng, 3, 3);
            let b = gaussian_matrix(&mut rng, 3, 1);
            let k = gaussian_matrix(&mut rng, 1, 3);
            if check_larc0(&a, &b, &k).unwrap().verdict {
                hits += 1;
            }
        }
        assert_eq!(hits, 100);
    }

    #[test]
    fn plarc_examples() {
        let any_k = Matrix::from_row_slice(1, 2, &[0.3, -0.7]);
        let c = check_plarc(&rotation_generator(), &Matrix::zeros(2, 1), &any_k, 64, 1).unwrap();
        assert!(c.verdict);
        assert!(
            !check_larc(&rotation_generator(), &Matrix::zeros(2, 1), &any_k)
                .unwrap()
                .verdict
        );

        let diag = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let c = check_plarc(&diag, &Matrix::zeros(2, 1), &any_k, 64, 1).unwrap();
        assert!(!c.verdict);
        assert!(!c.failing_samples.is_empty());

        let b = basis_column(2, 2);
        let k = Matrix::from_row_slice(1, 2, &[1.0, 1.0]);
        assert!(check_plarc(&shift(2), &b, &k, 64, 1).unwrap().verdict);

        assert!(check_plarc(&shift(2), &b, &k, 3, 1).is_err());
    }

    #[test]
    fn irreducibility_examples() {
        let sl2 = closure_of(&[shift(2), e21()]).unwrap();
        assert!(check_irreducible(&sl2, 4, 3).unwrap());

        let diag = LieBasis::from_span(
            &[Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])],
            RANK_TOL,
        )
        .unwrap();
        assert!(!check_irreducible(&diag, 4, 3).unwrap());

        let gens = [
            shift(3),
            basis_column(3, 3) * Matrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]),
        ];
        assert!(check_irreducible(&closure_of(&gens).unwrap(), 3, 3).unwrap());

        let upper = closure_of(&[
            Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 2.0]),
            Matrix::from_row_slice(2, 2, &[0.0, 3.0, 0.0, -1.0]),
        ])
        .unwrap();
        assert!(!check_irreducible(&upper, 2, 9).unwrap());
    }

    #[test]
    fn chain_audit_examples() {
        let b = basis_column(2, 2);
        let r = inclusion_chain_audit(
            &shift(2),
            &b,
            &Matrix::from_row_slice(1, 2, &[1.0, 1.0]),
            0.0,
        )
        .unwrap();
        assert!(r.larc_shifted.verdict && r.larc0.verdict && r.plarc.verdict);
        assert!(r.violations.is_empty());

        for lambda in [-1.0, 0.0, 2.5] {
            let r = inclusion_chain_audit(
                &Matrix::identity(2, 2),
                &b,
                &Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
                lambda,
            )
            .unwrap();
            assert!(r.violations.is_empty(), "{:?}", r.violations);
        }
    }

    #[test]
    fn certificate_json_shape() {
        let c = check_larc(
            &shift(2),
            &basis_column(2, 2),
            &Matrix::from_row_slice(1, 2, &[1.0, 1.0]),
        )
        .unwrap();
        let v = serde_json::to_value(&c).unwrap();
        assert_eq!(v["kind"], "LARC");
        assert_eq!(v["verdict"], true);
        assert_eq!(v["dim"], 4);
        assert!(v["failing_samples"].as_array().unwrap().is_empty());
        assert!(v["tol"].is_number());
    }
}
