//! Controllability machinery: Kalman rank, controllability decomposition, the
//! single-input controllability form and the single-input LARC certificates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie;
use crate::matcore::{
    self, basis_column, checked_svd, opnorm, poly_from_roots, rank_of, require_square, shift,
    trace, Complex64, Matrix, RANK_TOL,
};

/// A pair `(A, B)` with `A` d×d, `B` d×m, `d >= 2`, `m >= 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixPair {
    pub a: Matrix,
    pub b: Matrix,
}

impl MatrixPair {
    pub fn new(a: Matrix, b: Matrix) -> Result<Self> {
        let d = require_square(&a, "A")?;
        if d < 2 {
            return Err(Error::InvalidInput(format!(
                "state dimension must be >= 2, got {d}"
            )));
        }
        if b.nrows() != d || b.ncols() == 0 {
            return Err(Error::Shape(format!(
                "B must be {d}xm with m >= 1, got {:?}",
                b.shape()
            )));
        }
        Ok(MatrixPair { a, b })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    /// `[B, AB, ..., A^{d-1}B]`.
    pub fn controllability_matrix(&self) -> Matrix {
        let d = self.dim();
        let m = self.inputs();
        let mut out = Matrix::zeros(d, d * m);
        let mut block = self.b.clone();
        for j in 0..d {
            out.view_mut((0, j * m), (d, m)).copy_from(&block);
            block = &self.a * block;
        }
        out
    }
}

pub fn kalman_rank(pair: &MatrixPair) -> Result<usize> {
    rank_of(&pair.controllability_matrix(), RANK_TOL)
}

pub fn is_controllable(pair: &MatrixPair) -> Result<bool> {
    Ok(kalman_rank(pair)? == pair.dim())
}

/// Orthogonal controllability decomposition: `P A P^{-1} = [[A1, A2], [0, A3]]`,
/// `P B = [B1; 0]`, with `(A1, B1)` controllable of size `r`.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub p: Matrix,
    pub a1: Matrix,
    pub a2: Matrix,
    pub a3: Matrix,
    pub b1: Matrix,
    pub r: usize,
}

pub fn controllability_decomposition(pair: &MatrixPair) -> Result<Decomposition> {
    let d = pair.dim();
    let c = pair.controllability_matrix();
    let r = rank_of(&c, RANK_TOL)?;
    let svd = checked_svd(&c)?;
    // Left singular vectors of the r largest singular values span the
    // reachable subspace; the rest complete an orthonormal basis.
    let u = svd.u;
    let p = u.transpose();
    let a_new = &p * &pair.a * &u;
    let b_new = &p * &pair.b;
    Ok(Decomposition {
        a1: a_new.view((0, 0), (r, r)).into_owned(),
        a2: a_new.view((0, r), (r, d - r)).into_owned(),
        a3: a_new.view((r, r), (d - r, d - r)).into_owned(),
        b1: b_new.view((0, 0), (r, pair.inputs())).into_owned(),
        p,
        r,
    })
}

/// Which multiple of the identity is removed from `A` before taking the
/// controllability form: `Tr(A)` (the default) or `Tr(A)/d`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceShift {
    #[default]
    Full,
    Mean,
}

impl TraceShift {
    pub fn amount(self, a: &Matrix) -> f64 {
        match self {
            TraceShift::Full => trace(a),
            TraceShift::Mean => trace(a) / a.nrows() as f64,
        }
    }

    pub fn apply(self, a: &Matrix) -> Matrix {
        let d = a.nrows();
        a - Matrix::identity(d, d) * self.amount(a)
    }
}

/// `(J_d + e_d v, e_d)` together with the change of coordinates `P`:
/// `P^{-1}(J_d + e_d v)P = A - s Id`, `P^{-1} e_d = b`.
///
/// `v e_d` equals the trace of `A - s Id`, so it vanishes for
/// [`TraceShift::Mean`] and for traceless `A`.
#[derive(Clone, Debug)]
pub struct ControllabilityForm {
    pub v: Matrix,
    pub p: Matrix,
    /// Controllability index; equals `d` for a controllable single-input pair.
    pub r: usize,
    pub shift: TraceShift,
}

impl ControllabilityForm {
    pub fn companion(&self) -> Matrix {
        let d = self.v.ncols();
        let mut c = shift(d);
        c.row_mut(d - 1).copy_from(&self.v.row(0));
        c
    }
}

fn require_single_input(a: &Matrix, b: &Matrix) -> Result<usize> {
    let d = require_square(a, "A")?;
    if b.shape() != (d, 1) {
        return Err(Error::Shape(format!(
            "b must be {d}x1, got {:?}",
            b.shape()
        )));
    }
    Ok(d)
}

pub fn controllable_form_si(
    a: &Matrix,
    b: &Matrix,
    shift_kind: TraceShift,
) -> Result<ControllabilityForm> {
    let d = require_single_input(a, b)?;
    let shifted = shift_kind.apply(a);
    let pair = MatrixPair::new(shifted.clone(), b.clone())?;
    let rank = kalman_rank(&pair)?;
    if rank < d {
        return Err(Error::NotControllable { rank, dim: d });
    }
    let c = pair.controllability_matrix();
    // First row of P: the row vector p with p A^j b = δ_{j,d-1}.
    let first = c
        .transpose()
        .lu()
        .solve(&basis_column(d, d))
        .ok_or_else(|| Error::Numerical("controllability matrix is singular".into()))?
        .transpose();
    let mut p = Matrix::zeros(d, d);
    let mut row = first;
    for i in 0..d {
        p.row_mut(i).copy_from(&row.row(0));
        row = &row * &shifted;
    }
    let p_inv = p
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("change of coordinates is singular".into()))?;
    let companion = &p * &shifted * &p_inv;
    let v = companion.row(d - 1).into_owned();
    Ok(ControllabilityForm {
        v: Matrix::from_row_slice(1, d, v.as_slice()),
        p,
        r: rank,
        shift: shift_kind,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct AccCertificate {
    pub verdict: bool,
    pub r: Vec<f64>,
    #[serde(with = "rows_serde")]
    pub kseq: Vec<Matrix>,
    pub span_rank: usize,
    pub trace_shift: TraceShift,
}

mod rows_serde {
    use super::Matrix;
    use serde::{ser::SerializeSeq, Serializer};

    pub fn serialize<S: Serializer>(rows: &[Matrix], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(rows.len()))?;
        for r in rows {
            seq.serialize_element(&r.iter().copied().collect::<Vec<f64>>())?;
        }
        seq.end()
    }
}

/// Sufficient condition for `K P(A,b)` to lie in `LARC(A - s Id, b)`:
/// the numbers `r_j = K C^j e_d` are nonzero and the rows `K_j = K C^j` are
/// independent, where `C = J_d + e_d v(A, b)`.
pub fn acc_certificate(
    a: &Matrix,
    b: &Matrix,
    k: &Matrix,
    shift_kind: TraceShift,
) -> Result<AccCertificate> {
    let d = require_single_input(a, b)?;
    if k.shape() != (1, d) {
        return Err(Error::Shape(format!(
            "K must be 1x{d}, got {:?}",
            k.shape()
        )));
    }
    let form = controllable_form_si(a, b, shift_kind)?;
    let companion = form.companion();
    let c_norm = opnorm(&companion);
    let k_norm = opnorm(k);
    let e_d = basis_column(d, d);
    let mut kseq = Vec::with_capacity(d);
    let mut r = Vec::with_capacity(d);
    let mut nonzero = true;
    let mut kj = k.clone();
    for j in 0..d {
        let rj = (&kj * &e_d)[(0, 0)];
        let tol = 1e-9 * (1.0 + k_norm * c_norm.powi(j as i32));
        nonzero &= rj.abs() > tol;
        r.push(rj);
        kseq.push(kj.clone());
        kj = &kj * &companion;
    }
    let span_rank = matcore::span_rank(&kseq, RANK_TOL)?;
    Ok(AccCertificate {
        verdict: nonzero && span_rank == d,
        r,
        kseq,
        span_rank,
        trace_shift: shift_kind,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CoefficientReport {
    pub verdict: bool,
    pub c0: f64,
    /// `slacks[m] = |k_{d-m}| - c0 |k_{d-m+1}| (d-m)/(m+1)` for `m = 0..d-1`.
    pub slacks: Vec<f64>,
}

/// Slack tolerance for the coefficient inequalities.
pub const COEFFICIENT_TOL: f64 = 1e-9;

/// Coefficient inequalities for `J_d + e_d K` with a one-sign spectrum.
pub fn coefficient_inequalities(k: &Matrix) -> Result<CoefficientReport> {
    if k.nrows() != 1 || k.ncols() < 1 {
        return Err(Error::Shape(format!(
            "K must be a row, got {:?}",
            k.shape()
        )));
    }
    let d = k.ncols();
    let mut m = shift(d);
    m.row_mut(d - 1).copy_from(&k.row(0));
    let spec = matcore::spectrum(&m)?;
    let zero_tol = 1e-12 * (1.0 + opnorm(&m));
    if spec
        .eigenvalues
        .iter()
        .any(|e| e.value.re.abs() <= zero_tol)
    {
        return Err(Error::Precondition(
            "an eigenvalue has zero real part".into(),
        ));
    }
    if spec.min_real < 0.0 && spec.max_real > 0.0 {
        return Err(Error::Precondition(
            "eigenvalue real parts have mixed signs".into(),
        ));
    }
    let c0 = spec
        .eigenvalues
        .iter()
        .map(|e| e.value.re.abs())
        .fold(f64::INFINITY, f64::min);
    // 1-based coefficient k_i, with k_{d+1} = 1.
    let coeff = |i: usize| if i == d + 1 { 1.0 } else { k[(0, i - 1)] };
    let slacks: Vec<f64> = (0..d)
        .map(|mm| {
            coeff(d - mm).abs() - c0 * coeff(d - mm + 1).abs() * (d - mm) as f64 / (mm + 1) as f64
        })
        .collect();
    Ok(CoefficientReport {
        verdict: slacks.iter().all(|&s| s >= -COEFFICIENT_TOL),
        c0,
        slacks,
    })
}

/// True iff every eigenvalue of `A + bK` has real part below `-c`, or every
/// one above `c`.
pub fn thrc_gate(a: &Matrix, b: &Matrix, k: &Matrix, c: f64) -> Result<bool> {
    if !(c > 0.0) {
        return Err(Error::Precondition(format!("c must be positive, got {c}")));
    }
    require_single_input(a, b)?;
    let spec = matcore::spectrum(&(a + b * k))?;
    Ok(spec.max_real < -c || spec.min_real > c)
}

/// Row `K` with `J_d + e_d K` having the given roots as spectrum.
pub fn companion_row_for_roots(roots: &[Complex64]) -> Matrix {
    let coeffs = poly_from_roots(roots);
    let d = roots.len();
    Matrix::from_fn(1, d, |_, j| -coeffs[j].re)
}

/// Ackermann's formula: `K` with `σ(A + bK)` equal to `poles`.
pub fn place_poles(a: &Matrix, b: &Matrix, poles: &[Complex64]) -> Result<Matrix> {
    let d = require_single_input(a, b)?;
    if poles.len() != d {
        return Err(Error::InvalidInput(format!(
            "need {d} poles, got {}",
            poles.len()
        )));
    }
    let pair = MatrixPair::new(a.clone(), b.clone())?;
    let rank = kalman_rank(&pair)?;
    if rank < d {
        return Err(Error::NotControllable { rank, dim: d });
    }
    let coeffs = poly_from_roots(poles);
    let mut p_of_a = Matrix::zeros(d, d);
    for c in coeffs.iter().rev() {
        p_of_a = &p_of_a * a + Matrix::identity(d, d) * c.re;
    }
    let c = pair.controllability_matrix();
    let row = c
        .transpose()
        .lu()
        .solve(&basis_column(d, d))
        .ok_or_else(|| Error::Numerical("controllability matrix is singular".into()))?
        .transpose();
    Ok(-(row * p_of_a))
}

/// Random roots with real parts in `[lo, hi]` (closed under conjugation).
pub fn random_roots<R: Rng + ?Sized>(rng: &mut R, d: usize, lo: f64, hi: f64) -> Vec<Complex64> {
    let mut roots = Vec::with_capacity(d);
    while roots.len() < d {
        let re = rng.random_range(lo..=hi);
        if d - roots.len() >= 2 && rng.random_bool(0.5) {
            let im = rng.random_range(0.1..=1.0) * (1.0 + re.abs());
            roots.push(Complex64::new(re, im));
            roots.push(Complex64::new(re, -im));
        } else {
            roots.push(Complex64::new(re, 0.0));
        }
    }
    roots
}

#[derive(Clone, Debug, Serialize)]
pub struct ThresholdReport {
    /// Smallest `c` on the grid from which every larger grid value passed.
    pub c_star: Option<f64>,
    pub grid: Vec<f64>,
    pub passed: Vec<usize>,
    pub trials: usize,
}

/// Empirical form of the single-input density argument: for each `c` on the
/// grid, place `trials` random pole sets with real parts below `-c` and check
/// the LARC certificate in controllability-form coordinates.
pub fn thrc_threshold(
    a: &Matrix,
    b: &Matrix,
    grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<ThresholdReport> {
    let d = require_single_input(a, b)?;
    let form = controllable_form_si(a, b, TraceShift::Full)?;
    let p_inv = form
        .p
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("change of coordinates is singular".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut passed = Vec::with_capacity(grid.len());
    for &c in grid {
        let mut ok = 0;
        for _ in 0..trials {
            let roots = random_roots(&mut rng, d, -c - 1.0 - c, -c - 0.1);
            let k = place_poles(a, b, &roots)?;
            if acc_certificate(a, b, &(&k * &p_inv), TraceShift::Full)?.verdict {
                ok += 1;
            }
        }
        passed.push(ok);
    }
    let mut c_star = None;
    for (i, &c) in grid.iter().enumerate().rev() {
        if passed[i] == trials {
            c_star = Some(c);
        } else {
            break;
        }
    }
    Ok(ThresholdReport {
        c_star,
        grid: grid.to_vec(),
        passed,
        trials,
    })
}

/// Convenience: is `K` in `LARC(A - s Id, b)` by direct closure?
pub fn larc_of_shifted(a: &Matrix, b: &Matrix, k: &Matrix, shift_kind: TraceShift) -> Result<bool> {
    Ok(lie::check_larc(&shift_kind.apply(a), b, k)?.verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{gaussian_matrix, rotation_generator};

    fn row(v: &[f64]) -> Matrix {
        Matrix::from_row_slice(1, v.len(), v)
    }

    #[test]
    fn pair_validation() {
        assert!(MatrixPair::new(Matrix::zeros(1, 1), Matrix::zeros(1, 1)).is_err());
        assert!(MatrixPair::new(Matrix::zeros(2, 2), Matrix::zeros(3, 1)).is_err());
        assert!(MatrixPair::new(Matrix::zeros(2, 3), Matrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn kalman_rank_examples() {
        for d in 2..=5 {
            let p = MatrixPair::new(shift(d), basis_column(d, d)).unwrap();
            assert_eq!(kalman_rank(&p).unwrap(), d);
        }
        let p = MatrixPair::new(Matrix::identity(2, 2), basis_column(2, 1)).unwrap();
        assert_eq!(kalman_rank(&p).unwrap(), 1);
        let p = MatrixPair::new(rotation_generator(), basis_column(2, 1)).unwrap();
        assert_eq!(kalman_rank(&p).unwrap(), 2);
    }

    #[test]
    fn kalman_rank_similarity_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let a = gaussian_matrix(&mut rng, 3, 3);
            let b = gaussian_matrix(&mut rng, 3, 1);
            let p = gaussian_matrix(&mut rng, 3, 3) + Matrix::identity(3, 3) * 3.0;
            let pi = p.clone().try_inverse().unwrap();
            let r1 = kalman_rank(&MatrixPair::new(a.clone(), b.clone()).unwrap()).unwrap();
            let r2 = kalman_rank(&MatrixPair::new(&p * &a * &pi, &p * &b).unwrap()).unwrap();
            assert_eq!(r1, r2);
        }
    }

    #[test]
    fn decomposition_examples() {
        let p = MatrixPair::new(shift(3), basis_column(3, 3)).unwrap();
        let dec = controllability_decomposition(&p).unwrap();
        assert_eq!(dec.r, 3);
        assert_eq!(dec.a3.shape(), (0, 0));

        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let dec = controllability_decomposition(&MatrixPair::new(a, basis_column(2, 1)).unwrap())
            .unwrap();
        assert_eq!(dec.r, 1);
        assert!((dec.a3[(0, 0)] - 2.0).abs() < 1e-14);

        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let dec = controllability_decomposition(
            &MatrixPair::new(a.clone(), Matrix::zeros(2, 1)).unwrap(),
        )
        .unwrap();
        assert_eq!(dec.r, 0);
        let back = dec.p.transpose() * &dec.a3 * &dec.p;
        assert!((back - a).amax() < 1e-13);
    }

    #[test]
    fn decomposition_structure_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for r in 1..3 {
            // Build a non-controllable pair in block form, then hide it.
            let mut a = gaussian_matrix(&mut rng, 3, 3);
            for i in r..3 {
                for j in 0..r {
                    a[(i, j)] = 0.0;
                }
            }
            let mut b = gaussian_matrix(&mut rng, 3, 1);
            for i in r..3 {
                b[(i, 0)] = 0.0;
            }
            let q = gaussian_matrix(&mut rng, 3, 3) + Matrix::identity(3, 3) * 3.0;
            let qi = q.clone().try_inverse().unwrap();
            let pair = MatrixPair::new(&qi * &a * &q, &qi * &b).unwrap();
            let dec = controllability_decomposition(&pair).unwrap();
            assert_eq!(dec.r, r);
            let full = &dec.p * &pair.a * dec.p.transpose();
            let lower = full.view((r, 0), (3 - r, r)).amax();
            assert!(lower < 1e-10, "r={r} lower block {lower:e}, a1 {}", dec.a1);
            let pb = &dec.p * &pair.b;
            assert!(pb.view((r, 0), (3 - r, 1)).amax() < 1e-10);
            let block = MatrixPair {
                a: dec.a1.clone(),
                b: dec.b1.clone(),
            };
            assert_eq!(kalman_rank(&block).unwrap(), r);
        }
    }

    #[test]
    fn form_of_companion_is_identity_change() {
        let w = row(&[0.7, -1.3, 0.0]);
        let mut a = shift(3);
        a.row_mut(2).copy_from(&w.row(0));
        let f = controllable_form_si(&a, &basis_column(3, 3), TraceShift::Full).unwrap();
        assert!((&f.v - &w).amax() < 1e-13);
        assert!((&f.p - Matrix::identity(3, 3)).amax() < 1e-13);
    }

    fn check_round_trip(a: &Matrix, b: &Matrix, s: TraceShift) {
        let d = a.nrows();
        let f = controllable_form_si(a, b, s).unwrap();
        let pi = f.p.clone().try_inverse().unwrap();
        let rebuilt = &pi * f.companion() * &f.p;
        let target = s.apply(a);
        assert!((&rebuilt - &target).amax() < 1e-8 * (1.0 + target.amax()));
        assert!((&pi * basis_column(d, d) - b).amax() < 1e-8 * (1.0 + b.amax()));
        let ve = f.v[(0, d - 1)];
        assert!((ve - trace(&target)).abs() < 1e-8 * (1.0 + a.amax()));
    }

    #[test]
    fn form_round_trip() {
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -3.0]);
        check_round_trip(&a, &basis_column(2, 2), TraceShift::Full);
        // A + 3 Id = [[3,1],[-2,0]]: char poly X^2 - 3X + 2, so v = (-2, 3).
        let f = controllable_form_si(&a, &basis_column(2, 2), TraceShift::Full).unwrap();
        assert!((&f.v - row(&[-2.0, 3.0])).amax() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let a = gaussian_matrix(&mut rng, 4, 4);
            let b = gaussian_matrix(&mut rng, 4, 1);
            check_round_trip(&a, &b, TraceShift::Full);
            check_round_trip(&a, &b, TraceShift::Mean);
            let f = controllable_form_si(&a, &b, TraceShift::Mean).unwrap();
            assert!(f.v[(0, 3)].abs() < 1e-8 * (1.0 + a.amax()));
        }
    }

    #[test]
    fn form_rejects_uncontrollable() {
        let err = controllable_form_si(
            &Matrix::identity(2, 2),
            &basis_column(2, 1),
            TraceShift::Full,
        );
        assert!(matches!(
            err,
            Err(Error::NotControllable { rank: 1, dim: 2 })
        ));
    }

    #[test]
    fn acc_examples() {
        let c = acc_certificate(
            &shift(2),
            &basis_column(2, 2),
            &row(&[1.0, 1.0]),
            TraceShift::Full,
        )
        .unwrap();
        assert!(c.verdict);
        assert_eq!(c.r, vec![1.0, 1.0]);
        assert_eq!(c.kseq[1], row(&[0.0, 1.0]));
        assert!(larc_of_shifted(
            &shift(2),
            &basis_column(2, 2),
            &row(&[1.0, 1.0]),
            TraceShift::Full
        )
        .unwrap());

        let c = acc_certificate(
            &shift(2),
            &basis_column(2, 2),
            &row(&[1.0, 0.0]),
            TraceShift::Full,
        )
        .unwrap();
        assert!(!c.verdict);
        assert_eq!(c.r[0], 0.0);

        let c = acc_certificate(
            &shift(3),
            &basis_column(3, 3),
            &row(&[1.0, 1.0, 1.0]),
            TraceShift::Full,
        )
        .unwrap();
        assert!(c.verdict);
        assert_eq!(c.r, vec![1.0, 1.0, 1.0]);
        assert_eq!(c.span_rank, 3);

        assert!(acc_certificate(
            &Matrix::identity(2, 2),
            &basis_column(2, 1),
            &row(&[1.0, 1.0]),
            TraceShift::Full
        )
        .is_err());
    }

    #[test]
    fn acc_implies_larc_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut checked = 0;
        for seed in 0..50 {
            let d = 2 + seed % 3;
            let a = gaussian_matrix(&mut rng, d, d);
            let b = gaussian_matrix(&mut rng, d, 1);
            let k = gaussian_matrix(&mut rng, 1, d);
            for s in [TraceShift::Full, TraceShift::Mean] {
                let c = acc_certificate(&a, &b, &k, s).unwrap();
                if c.verdict {
                    let f = controllable_form_si(&a, &b, s).unwrap();
                    assert!(larc_of_shifted(&a, &b, &(&k * &f.p), s).unwrap());
                    checked += 1;
                }
            }
        }
        assert!(checked > 80, "only {checked} certificates held");
    }

    #[test]
    fn coefficients_examples() {
        let r = coefficient_inequalities(&row(&[-2.0, -3.0])).unwrap();
        assert!(r.verdict);
        assert!((r.c0 - 1.0).abs() < 1e-12);
        assert!((r.slacks[0] - 1.0).abs() < 1e-12);
        assert!((r.slacks[1] - 0.5).abs() < 1e-12);

        let r = coefficient_inequalities(&row(&[-1.0, -2.0])).unwrap();
        assert!(r.verdict);
        assert!(r.slacks.iter().all(|s| s.abs() < 1e-9), "{:?}", r.slacks);

        assert!(matches!(
            coefficient_inequalities(&row(&[-1.0, 0.0])),
            Err(Error::Precondition(_))
        ));
        // eigenvalues 1 and -2: mixed signs
        assert!(matches!(
            coefficient_inequalities(&row(&[2.0, -1.0])),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn thrc_gate_examples() {
        let b = basis_column(2, 1);
        let k = Matrix::zeros(1, 2);
        assert!(thrc_gate(&(Matrix::identity(2, 2) * -2.0), &b, &k, 1.0).unwrap());
        let mixed = Matrix::from_row_slice(2, 2, &[-3.0, 0.0, 0.0, 0.5]);
        assert!(!thrc_gate(&mixed, &b, &k, 1.0).unwrap());
        assert!(thrc_gate(&mixed, &b, &k, 0.0).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for d in 2..=4 {
            let a = gaussian_matrix(&mut rng, d, d);
            let b = gaussian_matrix(&mut rng, d, 1);
            let c = 1.5;
            let poles: Vec<Complex64> = (1..=d)
                .map(|i| Complex64::new(-c - i as f64, 0.0))
                .collect();
            let k = place_poles(&a, &b, &poles).unwrap();
            let got = matcore::eigenvalues(&(&a + &b * &k)).unwrap();
            assert!(matcore::multiset_residual(&got, &poles) < 1e-6);
            assert!(thrc_gate(&a, &b, &k, c).unwrap());
        }
    }

    #[test]
    fn companion_row_matches_roots() {
        let k = companion_row_for_roots(&[Complex64::new(-1.0, 0.0), Complex64::new(-2.0, 0.0)]);
        assert_eq!(k, row(&[-2.0, -3.0]));
    }

    #[test]
    fn threshold_exists_for_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in 2..=4 {
            let a = gaussian_matrix(&mut rng, d, d);
            let b = gaussian_matrix(&mut rng, d, 1);
            let bound = 10.0 * (1.0 + opnorm(&a));
            let grid: Vec<f64> = (0..=20)
                .map(|i| bound * i as f64 / 20.0)
                .filter(|&c| c > 0.0)
                .collect();
            let rep = thrc_threshold(&a, &b, &grid, 10, 3).unwrap();
            let c_star = rep.c_star.expect("no passing threshold");
            assert!(c_star <= bound);
        }
    }
}
