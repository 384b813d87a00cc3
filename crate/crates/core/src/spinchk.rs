//! Membership and spectral-symmetry tests for the Lorentz algebra `spin(9,1)`
//! and the imaginary-spectrum condition satisfied by matrices similar to
//! `so(d)` elements.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matcore::{
    eigenvalues, gaussian_matrix, multiset_residual, poly_from_roots, require_square, Matrix,
};

pub const SPIN_DIM: usize = 10;

/// Membership slack relative to `1 + ‖M‖`.
pub const MEMBERSHIP_TOL: f64 = 1e-10;

/// The form `diag(1, …, 1, −1)` on `ℝ¹⁰`.
#[derive(Clone, Debug, PartialEq)]
pub struct LorentzForm {
    signature: Matrix,
}

impl Default for LorentzForm {
    fn default() -> Self {
        let mut signature = Matrix::identity(SPIN_DIM, SPIN_DIM);
        signature[(SPIN_DIM - 1, SPIN_DIM - 1)] = -1.0;
        Self { signature }
    }
}

impl LorentzForm {
    pub fn matrix(&self) -> &Matrix {
        &self.signature
    }

    /// Frobenius norm of `MᵀJ + JM`.
    pub fn residual(&self, m: &Matrix) -> Result<f64> {
        let d = require_square(m, "spin(9,1) candidate")?;
        if d != SPIN_DIM {
            return Err(Error::Shape(format!(
                "spin(9,1) needs a 10x10 matrix, got {d}x{d}"
            )));
        }
        Ok((m.transpose() * &self.signature + &self.signature * m).norm())
    }
}

pub fn spin91_residual(m: &Matrix) -> Result<f64> {
    LorentzForm::default().residual(m)
}

pub fn is_spin91(m: &Matrix) -> Result<bool> {
    Ok(spin91_residual(m)? <= MEMBERSHIP_TOL * (1.0 + m.norm()))
}

/// `[[A₁, v₁], [v₁ᵀ, 0]]` with a seeded skew-symmetric `A₁` and vector `v₁`.
pub fn random_spin91(seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = SPIN_DIM - 1;
    let g = gaussian_matrix(&mut rng, n, n);
    let a1 = (&g - g.transpose()) * std::f64::consts::FRAC_1_SQRT_2;
    let v1 = gaussian_matrix(&mut rng, n, 1);
    bordered(&a1, &v1)
}

/// `[[A₁, v₁], [v₁ᵀ, 0]]`.
pub fn bordered(a1: &Matrix, v1: &Matrix) -> Matrix {
    let n = a1.nrows();
    let mut m = Matrix::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(a1);
    m.view_mut((0, n), (n, 1)).copy_from(v1);
    m.view_mut((n, 0), (1, n)).copy_from(&v1.transpose());
    m
}

/// Whether the eigenvalue multiset equals its negation within `tol`.
pub fn spectrum_symmetric(m: &Matrix, tol: f64) -> Result<bool> {
    Ok(symmetry_residual(m)? <= tol)
}

/// Distance between the eigenvalue multiset and its negation.
pub fn symmetry_residual(m: &Matrix) -> Result<f64> {
    let eig = eigenvalues(m)?;
    let neg: Vec<_> = eig.iter().map(|z| -z).collect();
    Ok(multiset_residual(&eig, &neg))
}

/// Characteristic polynomial split into even and odd parts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CharpolyDecomp {
    /// Coefficients of `P`, ascending in `X`.
    pub coefficients: Vec<f64>,
    /// Coefficients of `Q` with `P(X) = Q(X²)`, ascending in `Y`.
    pub q: Vec<f64>,
    /// Largest absolute odd coefficient of `P`.
    pub odd_residual: f64,
}

/// Expands the monic characteristic polynomial from the eigenvalues of a
/// `spin(9,1)` member.
pub fn charpoly_even_decomp(m: &Matrix) -> Result<CharpolyDecomp> {
    if !is_spin91(m)? {
        return Err(Error::Precondition("matrix is not in spin(9,1)".into()));
    }
    let coefficients: Vec<f64> = poly_from_roots(&eigenvalues(m)?)
        .iter()
        .map(|z| z.re)
        .collect();
    let q = coefficients.iter().step_by(2).copied().collect();
    let odd_residual = coefficients
        .iter()
        .skip(1)
        .step_by(2)
        .map(|c| c.abs())
        .fold(0.0, f64::max);
    Ok(CharpolyDecomp {
        coefficients,
        q,
        odd_residual,
    })
}

/// Whether every eigenvalue lies within `tol` of the imaginary axis.
pub fn so_spectrum_check(m: &Matrix, tol: f64) -> Result<bool> {
    Ok(eigenvalues(m)?.iter().all(|z| z.re.abs() <= tol))
}

/// The pieces of a `spin(9,1)` member read off as a bordered matrix.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BorderedForm {
    /// `Mᵀe₁₀` restricted to the first nine coordinates.
    pub v: Vec<f64>,
    /// `M₁₀,₁₀`, which must vanish.
    pub corner: f64,
    /// `‖A₁ + A₁ᵀ‖` for the leading 9×9 block.
    pub skew_defect: f64,
    /// `‖M e₁₀ − (v, 0)‖`: the last column must mirror the last row.
    pub border_defect: f64,
}

impl BorderedForm {
    pub fn max_defect(&self) -> f64 {
        self.corner
            .abs()
            .max(self.skew_defect)
            .max(self.border_defect)
    }
}

/// Splits a member of `spin(9,1)` into its skew block and border.
pub fn bordered_decomposition(m: &Matrix) -> Result<BorderedForm> {
    if !is_spin91(m)? {
        return Err(Error::Precondition("matrix is not in spin(9,1)".into()));
    }
    let n = SPIN_DIM - 1;
    let row = m.row(n);
    let col = m.column(n);
    let a1 = m.view((0, 0), (n, n));
    let v: Vec<f64> = row.iter().take(n).copied().collect();
    let border_defect = (0..n).map(|i| (col[i] - v[i]).powi(2)).sum::<f64>().sqrt();
    Ok(BorderedForm {
        corner: m[(n, n)],
        skew_defect: (a1 + a1.transpose()).norm(),
        border_defect,
        v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn membership_examples() {
        assert!(is_spin91(&Matrix::zeros(10, 10)).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = gaussian_matrix(&mut rng, 9, 9);
        let skew = bordered(&(&g - g.transpose()), &Matrix::zeros(9, 1));
        assert!(is_spin91(&skew).unwrap());
        let h = gaussian_matrix(&mut rng, 10, 10);
        assert!(!is_spin91(&(&h + h.transpose())).unwrap());
        assert!(is_spin91(&Matrix::zeros(9, 9)).is_err());
    }

    #[test]
    fn random_draws_are_members() {
        for seed in 0..20 {
            let m = random_spin91(seed);
            assert!(spin91_residual(&m).unwrap() <= MEMBERSHIP_TOL);
            assert_eq!(m.trace(), 0.0);
            assert!(spectrum_symmetric(&m, 1e-6).unwrap());
            let form = bordered_decomposition(&m).unwrap();
            assert!(form.max_defect() < 1e-9);
        }
    }

    #[test]
    fn rank_two_border() {
        let a = 1.7;
        let mut v = Matrix::zeros(9, 1);
        v[0] = a;
        let m = bordered(&Matrix::zeros(9, 9), &v);
        let mut eig: Vec<f64> = eigenvalues(&m).unwrap().iter().map(|z| z.re).collect();
        eig.sort_by(f64::total_cmp);
        assert!((eig[0] + a).abs() < 1e-12 && (eig[9] - a).abs() < 1e-12);
        assert!(eig[1..9].iter().all(|x| x.abs() < 1e-12));
        let p = charpoly_even_decomp(&m).unwrap();
        assert_eq!(p.odd_residual, 0.0);
        let mut expect = vec![0.0; 11];
        expect[8] = -a * a;
        expect[10] = 1.0;
        for (c, e) in p.coefficients.iter().zip(&expect) {
            assert!((c - e).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_matrix_polynomial() {
        let p = charpoly_even_decomp(&Matrix::zeros(10, 10)).unwrap();
        assert_eq!(p.q, vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(p.odd_residual, 0.0);
    }

    #[test]
    fn seeded_odd_coefficients_small() {
        for seed in 0..20 {
            let m = random_spin91(seed);
            let p = charpoly_even_decomp(&m).unwrap();
            assert!(p.odd_residual <= 1e-6 * (1.0 + m.norm().powi(10)));
        }
    }

    #[test]
    fn charpoly_rejects_non_members() {
        assert!(charpoly_even_decomp(&Matrix::identity(10, 10)).is_err());
    }

    #[test]
    fn symmetry_examples() {
        let d = |a: f64, b: f64| Matrix::from_diagonal(&DVector::from_vec(vec![a, b]));
        assert!(spectrum_symmetric(&d(1.0, -1.0), 1e-12).unwrap());
        assert!(!spectrum_symmetric(&d(1.0, 2.0), 1e-6).unwrap());
    }

    #[test]
    fn so_spectrum_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for d in 2..=6 {
            let g = gaussian_matrix(&mut rng, d, d);
            let skew = &g - g.transpose();
            assert!(so_spectrum_check(&skew, 1e-10).unwrap());
            let p = gaussian_matrix(&mut rng, d, d) + Matrix::identity(d, d) * 3.0;
            let conj = &p * &skew * p.clone().try_inverse().unwrap();
            assert!(so_spectrum_check(&conj, 1e-8).unwrap());
        }
        let saddle = Matrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        assert!(!so_spectrum_check(&saddle, 1e-6).unwrap());
    }
}
