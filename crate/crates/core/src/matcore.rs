//! Dense real-matrix primitives: norms, conorm, spectra, matrix exponential and
//! rank of matrix families.
//!
//! All norms are Euclidean on vectors and spectral (largest singular value) on
//! matrices. Matrices are plain `nalgebra::DMatrix<f64>`; the JSON wire form is
//! [`MatrixJson`].

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Complex64 = Complex<f64>;

/// Default relative tolerance for numerical rank decisions.
pub const RANK_TOL: f64 = 1e-9;

/// Full singular value decomposition `m = U diag(s) Vᵀ`, singular values in
/// descending order.
pub(crate) struct Svd {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub v: Matrix,
}

fn to_faer(m: &Matrix) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub(crate) fn checked_svd(m: &Matrix) -> Result<Svd> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::SvdFailure);
    }
    let svd = to_faer(m).svd().map_err(|_| Error::SvdFailure)?;
    let (u, s, v) = (svd.U(), svd.S(), svd.V());
    let k = m.nrows().min(m.ncols());
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]).then(i.cmp(&j)));
    let perm = |cols: usize, i: usize| if i < k { order[i] } else { i.min(cols - 1) };
    Ok(Svd {
        u: Matrix::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, perm(u.ncols(), j))]),
        singular_values: order.iter().map(|&i| s[i]).collect(),
        v: Matrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, perm(v.ncols(), j))]),
    })
}

/// `{"rows":d,"cols":m,"data":[row-major reals]}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl TryFrom<MatrixJson> for Matrix {
    type Error = Error;

    fn try_from(m: MatrixJson) -> Result<Matrix> {
        if m.rows == 0 || m.cols == 0 {
            return Err(Error::InvalidInput(
                "matrix dimensions must be positive".into(),
            ));
        }
        if m.rows * m.cols != m.data.len() {
            return Err(Error::Shape(format!(
                "{}x{} matrix needs {} entries, got {}",
                m.rows,
                m.cols,
                m.rows * m.cols,
                m.data.len()
            )));
        }
        if m.data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("matrix entries must be finite".into()));
        }
        Ok(Matrix::from_row_slice(m.rows, m.cols, &m.data))
    }
}

impl From<&Matrix> for MatrixJson {
    fn from(m: &Matrix) -> Self {
        let data = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)])
            .collect();
        MatrixJson {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }
}

/// Serde adapter so structs can hold a [`Matrix`] field in [`MatrixJson`] form.
pub mod matrix_serde {
    use super::{Matrix, MatrixJson};
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
        MatrixJson::from(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
        let wire = MatrixJson::deserialize(d)?;
        Matrix::try_from(wire).map_err(D::Error::custom)
    }
}

/// Nilpotent upper shift `J_d` (ones on the superdiagonal).
pub fn shift(d: usize) -> Matrix {
    Matrix::from_fn(d, d, |i, j| if j == i + 1 { 1.0 } else { 0.0 })
}

/// Canonical basis column `e_i`, 1-based as in the usual notation.
pub fn basis_column(d: usize, i: usize) -> Matrix {
    assert!(i >= 1 && i <= d, "basis index out of range");
    Matrix::from_fn(d, 1, |r, _| if r + 1 == i { 1.0 } else { 0.0 })
}

/// `diag(1, -1, 1, ...)`.
pub fn parity(d: usize) -> Matrix {
    Matrix::from_fn(d, d, |i, j| {
        if i != j {
            0.0
        } else if i % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    })
}

/// Rotation generator `[[0,-1],[1,0]]`.
pub fn rotation_generator() -> Matrix {
    Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub(crate) fn require_square(m: &Matrix, what: &str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.nrows())
}

/// Singular values in descending order.
pub fn singular_values(m: &Matrix) -> Result<DVector<f64>> {
    checked_svd(m).map(|svd| DVector::from_vec(svd.singular_values))
}

/// Spectral norm.
pub fn opnorm(m: &Matrix) -> f64 {
    singular_values(m)
        .map(|s| s.iter().copied().fold(0.0, f64::max))
        .unwrap_or(f64::NAN)
}

/// `min |Mx|` over unit `x`, i.e. the smallest singular value.
pub fn conorm(m: &Matrix) -> Result<f64> {
    require_square(m, "conorm argument")?;
    let s = singular_values(m)?;
    Ok(s.iter().copied().fold(f64::INFINITY, f64::min))
}

/// `e^{tM}` by scaling and squaring with Padé approximants.
pub fn expm(m: &Matrix, t: f64) -> Result<Matrix> {
    require_square(m, "expm argument")?;
    if !t.is_finite() {
        return Err(Error::InvalidInput(format!("expm time {t} is not finite")));
    }
    Ok((m * t).exp())
}

/// Number of singular values of the stacked vectorized family exceeding
/// `tol` times the largest one.
pub fn span_rank(family: &[Matrix], tol: f64) -> Result<usize> {
    let Some(first) = family.first() else {
        return Ok(0);
    };
    let shape = first.shape();
    if let Some(bad) = family.iter().find(|m| m.shape() != shape) {
        return Err(Error::Shape(format!(
            "family mixes {:?} and {:?}",
            shape,
            bad.shape()
        )));
    }
    let len = shape.0 * shape.1;
    let stacked = Matrix::from_fn(len, family.len(), |r, c| family[c].as_slice()[r]);
    rank_of(&stacked, tol)
}

/// Numerical rank with relative tolerance.
pub fn rank_of(m: &Matrix, tol: f64) -> Result<usize> {
    let s = singular_values(m)?;
    let top = s.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return Ok(0);
    }
    Ok(s.iter().filter(|&&x| x > tol * top).count())
}

/// Raw eigenvalues (with repetition).
pub fn eigenvalues(m: &Matrix) -> Result<Vec<Complex64>> {
    let d = require_square(m, "eigenvalue argument")?;
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::EigenFailure(d));
    }
    to_faer(m)
        .eigenvalues()
        .map(|v| v.into_iter().map(|z| Complex64::new(z.re, z.im)).collect())
        .map_err(|_| Error::EigenFailure(d))
}

pub fn spectral_radius(m: &Matrix) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Absolute tolerance used when matching eigenvalue multisets of `m`.
pub fn matching_tolerance(m: &Matrix) -> f64 {
    1e-6 * (1.0 + opnorm(m))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Eigenvalue {
    pub value: Complex64,
    pub multiplicity: usize,
}

#[derive(Clone, Debug)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<Eigenvalue>,
    pub min_real: f64,
    pub max_real: f64,
}

impl SpectrumReport {
    /// Cluster centroids repeated by multiplicity.
    pub fn flattened(&self) -> Vec<Complex64> {
        self.eigenvalues
            .iter()
            .flat_map(|e| std::iter::repeat_n(e.value, e.multiplicity))
            .collect()
    }
}

/// Eigenvalues clustered by single linkage at the matching tolerance; each
/// cluster is reported by its centroid, which is far better conditioned than
/// the individual members of a defective cluster.
pub fn spectrum(m: &Matrix) -> Result<SpectrumReport> {
    let raw = eigenvalues(m)?;
    let tol = matching_tolerance(m);
    let n = raw.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(label: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while label[r] != r {
            r = label[r];
        }
        label[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if (raw[i] - raw[j]).norm() <= tol {
                let (a, b) = (find(&mut label, i), find(&mut label, j));
                if a != b {
                    label[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut clusters: Vec<(usize, Complex64, usize)> = Vec::new();
    for i in 0..n {
        let root = find(&mut label, i);
        match clusters.iter_mut().find(|c| c.0 == root) {
            Some(c) => {
                c.1 += raw[i];
                c.2 += 1;
            }
            None => clusters.push((root, raw[i], 1)),
        }
    }
    let mut eigs: Vec<Eigenvalue> = clusters
        .into_iter()
        .map(|(_, sum, k)| Eigenvalue {
            value: sum / k as f64,
            multiplicity: k,
        })
        .collect();
    eigs.sort_by(|a, b| {
        a.value
            .re
            .total_cmp(&b.value.re)
            .then(a.value.im.total_cmp(&b.value.im))
    });
    let min_real = eigs
        .iter()
        .map(|e| e.value.re)
        .fold(f64::INFINITY, f64::min);
    let max_real = eigs
        .iter()
        .map(|e| e.value.re)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(SpectrumReport {
        eigenvalues: eigs,
        min_real,
        max_real,
    })
}

/// Largest pair distance in a greedy nearest-pair matching of two multisets
/// (repeatedly pair the globally closest remaining elements). Infinite when the
/// sizes differ.
pub fn multiset_residual(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut left: Vec<Complex64> = a.to_vec();
    let mut right: Vec<Complex64> = b.to_vec();
    let mut worst: f64 = 0.0;
    while !left.is_empty() {
        let mut best = (0, 0, f64::INFINITY);
        for (i, x) in left.iter().enumerate() {
            for (j, y) in right.iter().enumerate() {
                let dist = (x - y).norm();
                if dist < best.2 {
                    best = (i, j, dist);
                }
            }
        }
        worst = worst.max(best.2);
        left.swap_remove(best.0);
        right.swap_remove(best.1);
    }
    worst
}

/// Real unit directions attached to the eigenvalues of `m`: the eigenvector for
/// a real eigenvalue, the normalized real and imaginary parts for a complex one.
/// Each of these lies in a real invariant subspace of `m`.
pub fn eigen_directions(m: &Matrix) -> Result<Vec<DVector<f64>>> {
    let d = require_square(m, "eigenvector argument")?;
    let mut out = Vec::new();
    for lambda in eigenvalues(m)? {
        if lambda.im < 0.0 {
            continue;
        }
        // Null vector of the real form of `m − λ` acting on `x + iy` as `(x, y)`.
        let (re, im) = if lambda.im == 0.0 {
            let shifted = m - Matrix::identity(d, d) * lambda.re;
            let v = checked_svd(&shifted)?.v;
            (v.column(d - 1).into_owned(), DVector::zeros(d))
        } else {
            let mut real = Matrix::zeros(2 * d, 2 * d);
            for i in 0..d {
                for j in 0..d {
                    let diag = if i == j { 1.0 } else { 0.0 };
                    let a = m[(i, j)] - lambda.re * diag;
                    real[(i, j)] = a;
                    real[(i + d, j + d)] = a;
                    real[(i, j + d)] = lambda.im * diag;
                    real[(i + d, j)] = -lambda.im * diag;
                }
            }
            let v = checked_svd(&real)?.v;
            let w = v.column(2 * d - 1);
            (w.rows(0, d).into_owned(), w.rows(d, d).into_owned())
        };
        for part in [re, im] {
            let n = part.norm();
            if n > 1e-8 {
                out.push(part / n);
            }
        }
    }
    Ok(out)
}

/// Monic polynomial with the given roots, coefficients in ascending degree.
pub fn poly_from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
        for (i, c) in coeffs.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= c * r;
        }
        coeffs = next;
    }
    coeffs
}

pub fn trace(m: &Matrix) -> f64 {
    m.diagonal().sum()
}

/// `[M, N] = MN - NM`.
pub fn commutator(m: &Matrix, n: &Matrix) -> Matrix {
    m * n - n * m
}
