//! Spectral decompositions and matrix functions of normal operators.
//!
//! Hermitian matrices go through LAPACK's complex Hermitian eigensolvers. Normal
//! non-Hermitian matrices are diagonalized through the commuting Hermitian
//! pair `H = (M + M†)/2`, `K = (M - M†)/2i`, which keeps the eigenvector
//! matrix unitary even inside degenerate eigenspaces.

use ndarray::Array2;

use super::{LabeledOperator, Matrix, C64, ZERO};
use crate::error::{Error, Result};

/// Normality residual (relative to the squared scale) above which matrix
/// functions refuse an input.
pub const NORMALITY_TOL: f64 = 1e-8;

/// Eigenvalue magnitudes below this fraction of the largest are floored by
/// logarithms and fractional powers.
pub const EIGENVALUE_FLOOR: f64 = 1e-14;

/// Negative eigenvalues of a Hermitian input tolerated (relative) before
/// flooring; anything more negative is a positivity violation.
pub const POSITIVITY_TOL: f64 = 1e-10;

/// Mixing coefficient for `H + cK`; irrational so that distinct eigenvalues
/// of a normal matrix stay distinct in the Hermitian combination.
const MIXING: [f64; 3] = [0.754_877_666_246_692_7, 1.324_717_957_244_746, 0.414_213_562_373_095_1];

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<C64>,
    /// Unitary matrix whose columns are the eigenvectors.
    pub eigenvectors: Matrix,
    /// `max |MM† - M†M|`.
    pub normality_residual: f64,
    pub hermitian: bool,
}

fn lapack_check(routine: &'static str, info: i32) -> Result<()> {
    if info == 0 {
        Ok(())
    } else {
        Err(Error::Lapack { routine, info })
    }
}

/// Eigen-decomposition of a Hermitian matrix. Only the lower triangle is
/// read. Eigenvalues are ascending; eigenvectors are columns.
///
/// The divide-and-conquer driver is tried first. Its output is checked with
/// random probes and the QR driver is used instead when the check fails,
/// which guards against miscompiled vendor kernels.
pub fn eigh(m: &Matrix, vectors: bool) -> Result<(Vec<f64>, Option<Matrix>)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((vec![], vectors.then(|| Matrix::zeros((0, 0)))));
    }
    let first = lapack_eigh(m, vectors, Driver::DivideConquer)?;
    if eigh_is_consistent(m, &first) {
        return Ok(first);
    }
    let second = lapack_eigh(m, vectors, Driver::Qr)?;
    if eigh_is_consistent(m, &second) {
        return Ok(second);
    }
    Err(Error::Lapack { routine: "zheev", info: -1000 })
}

#[derive(Clone, Copy)]
enum Driver {
    DivideConquer,
    Qr,
}

fn lapack_eigh(m: &Matrix, vectors: bool, driver: Driver) -> Result<(Vec<f64>, Option<Matrix>)> {
    let n = m.nrows();
    let jobz = if vectors { b'V' } else { b'N' };
    let ni = n as i32;
    let mut w = vec![0.0f64; n];
    let mut info = 0i32;
    // A row-major Hermitian buffer read column-major is conj(A): same
    // eigenvalues, conjugated eigenvectors.
    let mut a: Vec<C64> = m.iter().copied().collect();
    match driver {
        Driver::DivideConquer => {
            let mut work = vec![ZERO; 1];
            let mut rwork = vec![0.0f64; 1];
            let mut iwork = vec![0i32; 1];
            unsafe {
                lapack::zheevd(jobz, b'U', ni, &mut a, ni, &mut w, &mut work, -1, &mut rwork, -1, &mut iwork, -1, &mut info)
            };
            lapack_check("zheevd", info)?;
            let lwork = (work[0].re as usize).max(1);
            let lrwork = (rwork[0] as usize).max(1);
            let liwork = (iwork[0] as usize).max(1);
            let mut work = vec![ZERO; lwork];
            let mut rwork = vec![0.0f64; lrwork];
            let mut iwork = vec![0i32; liwork];
            unsafe {
                lapack::zheevd(
                    jobz, b'U', ni, &mut a, ni, &mut w, &mut work, lwork as i32, &mut rwork, lrwork as i32,
                    &mut iwork, liwork as i32, &mut info,
                )
            };
            lapack_check("zheevd", info)?;
        }
        Driver::Qr => {
            let mut work = vec![ZERO; 1];
            let mut rwork = vec![0.0f64; (3 * n).saturating_sub(2).max(1)];
            unsafe { lapack::zheev(jobz, b'U', ni, &mut a, ni, &mut w, &mut work, -1, &mut rwork, &mut info) };
            lapack_check("zheev", info)?;
            let lwork = (work[0].re as usize).max(2 * n);
            let mut work = vec![ZERO; lwork];
            unsafe { lapack::zheev(jobz, b'U', ni, &mut a, ni, &mut w, &mut work, lwork as i32, &mut rwork, &mut info) };
            lapack_check("zheev", info)?;
        }
    }
    let vecs = vectors.then(|| Matrix::from_shape_fn((n, n), |(r, c)| a[c * n + r].conj()));
    Ok((w, vecs))
}

/// Relative residual accepted by the probe check.
const EIGH_CHECK_TOL: f64 = 1e-9;

/// `O(n²)` consistency check. With vectors: `‖A U x − U(w∘x)‖` and
/// `‖U†U x − x‖` on two fixed pseudo-random probes. Without: the first two
/// spectral moments against `Tr A` and `‖A‖_F²`.
fn eigh_is_consistent(m: &Matrix, (w, u): &(Vec<f64>, Option<Matrix>)) -> bool {
    let n = m.nrows();
    if w.iter().any(|x| !x.is_finite()) || w.windows(2).any(|p| p[1] < p[0]) {
        return false;
    }
    let scale = w.iter().fold(0.0f64, |a, x| a.max(x.abs())).max(f64::MIN_POSITIVE);
    let tol = EIGH_CHECK_TOL * (n as f64).sqrt().max(1.0);
    match u {
        None => {
            let trace: f64 = m.diag().iter().map(|x| x.re).sum();
            let frob: f64 = m.iter().map(|x| x.norm_sqr()).sum();
            let s1: f64 = w.iter().sum();
            let s2: f64 = w.iter().map(|x| x * x).sum();
            (s1 - trace).abs() <= tol * scale * n as f64 && (s2 - frob).abs() <= tol * scale * scale * n as f64
        }
        Some(u) => (1..=2).all(|seed| {
            let x = ndarray::Array1::from_shape_fn(n, |k| {
                let t = (k as f64 + 1.0) * (0.618_033_988_749_895 * seed as f64 + 0.1);
                C64::new((t * 12.9898).sin(), (t * 78.233).cos())
            });
            let norm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            let ux = u.dot(&x);
            let lhs = m.dot(&ux);
            let wx = ndarray::Array1::from_shape_fn(n, |k| x[k] * w[k]);
            let rhs = u.dot(&wx);
            let eig_res = (&lhs - &rhs).iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            let back = u.t().mapv(|v| v.conj()).dot(&ux);
            let orth_res = (&back - &x).iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            eig_res <= tol * scale * norm && orth_res <= tol * norm
        }),
    }
}

fn adjoint(m: &Matrix) -> Matrix {
    m.t().mapv(|x| x.conj())
}

fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0f64, |a, x| a.max(x.norm()))
}

/// `U diag(values) U†`.
pub(crate) fn reconstruct(u: &Matrix, values: &[C64]) -> Matrix {
    let mut scaled = u.clone();
    for (mut col, &v) in scaled.columns_mut().into_iter().zip(values) {
        col.mapv_inplace(|x| x * v);
    }
    scaled.dot(&adjoint(u))
}

impl SpectralDecomposition {
    pub fn of(op: &LabeledOperator) -> Result<Self> {
        Self::of_matrix(op.matrix(), op.is_hermitian())
    }

    pub fn of_matrix(m: &Matrix, hermitian: bool) -> Result<Self> {
        if hermitian {
            let (w, u) = eigh(m, true)?;
            return Ok(SpectralDecomposition {
                eigenvalues: w.into_iter().map(|x| C64::new(x, 0.0)).collect(),
                eigenvectors: u.expect("vectors requested"),
                normality_residual: 0.0,
                hermitian: true,
            });
        }
        let scale = max_abs(m).max(1e-300);
        let madj = adjoint(m);
        let residual = max_abs(&(m.dot(&madj) - madj.dot(m)));
        if residual > NORMALITY_TOL * scale.max(1.0).powi(2) {
            return Err(Error::NonNormal { residual });
        }
        let h = (m + &madj).mapv(|x| x * 0.5);
        let k = (m - &madj).mapv(|x| x * C64::new(0.0, -0.5));
        let mut last = f64::INFINITY;
        for c in MIXING {
            let a: Matrix = &h + &k.mapv(|x| x * c);
            let (_, u) = eigh(&a, true)?;
            let u = u.expect("vectors requested");
            let mu = m.dot(&u);
            let values: Vec<C64> = (0..u.ncols())
                .map(|i| u.column(i).iter().zip(mu.column(i).iter()).map(|(a, b)| a.conj() * b).sum())
                .collect();
            let err = max_abs(&(reconstruct(&u, &values) - m));
            if err <= 1e-10 * scale.max(1.0) {
                return Ok(SpectralDecomposition { eigenvalues: values, eigenvectors: u, normality_residual: residual, hermitian: false });
            }
            last = err;
        }
        Err(Error::NonNormal { residual: residual.max(last) })
    }

    pub fn largest_magnitude(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0f64, |a, x| a.max(x.norm()))
    }

    /// Applies `f` to the eigenvalues: `U f(Λ) U†`.
    pub fn apply(&self, f: impl Fn(C64) -> C64) -> Matrix {
        let values: Vec<C64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        reconstruct(&self.eigenvectors, &values)
    }

    /// Eigenvalues prepared for a logarithm or fractional power: magnitudes
    /// below the floor are raised to it and values sitting on the negative
    /// real axis are placed on the upper side of the branch cut.
    ///
    /// Returns the conditioned values and whether any was floored.
    pub fn conditioned_eigenvalues(&self) -> Result<(Vec<C64>, bool)> {
        let largest = self.largest_magnitude();
        if !(largest > 0.0) || !largest.is_finite() {
            return Err(Error::Singular { largest });
        }
        let floor = EIGENVALUE_FLOOR * largest;
        let mut regularized = false;
        let mut out = Vec::with_capacity(self.eigenvalues.len());
        for &l in &self.eigenvalues {
            if self.hermitian {
                if l.re < -POSITIVITY_TOL * largest.max(1.0) {
                    return Err(Error::NotPositive { min_eigenvalue: l.re });
                }
                if l.re < floor {
                    regularized = true;
                    out.push(C64::new(floor, 0.0));
                } else {
                    out.push(C64::new(l.re, 0.0));
                }
                continue;
            }
            let mut v = l;
            if v.norm() < floor {
                regularized = true;
                v = if v.norm() > 0.0 { v * (floor / v.norm()) } else { C64::new(floor, 0.0) };
            }
            if v.re < 0.0 && v.im.abs() <= 1e-12 * v.norm() {
                v.im = 0.0;
            }
            out.push(v);
        }
        Ok((out, regularized))
    }
}

/// Applies a scalar function through the spectral decomposition.
///
/// No flooring is applied; use the dedicated methods on [`LabeledOperator`]
/// for logarithms and powers.
pub fn matrix_function(op: &LabeledOperator, f: impl Fn(C64) -> C64) -> Result<LabeledOperator> {
    let sd = SpectralDecomposition::of(op)?;
    let m = sd.apply(f);
    Ok(LabeledOperator::derived(op.support().to_vec(), m, op.regularized()))
}

fn conditioned_function(op: &LabeledOperator, f: impl Fn(C64) -> C64) -> Result<LabeledOperator> {
    let sd = SpectralDecomposition::of(op)?;
    let (values, reg) = sd.conditioned_eigenvalues()?;
    let mapped: Vec<C64> = values.into_iter().map(f).collect();
    let m = reconstruct(&sd.eigenvectors, &mapped);
    Ok(LabeledOperator::derived(op.support().to_vec(), m, op.regularized() || reg))
}

impl LabeledOperator {
    pub fn exp(&self) -> Result<Self> {
        matrix_function(self, |z| z.exp())
    }

    /// Principal logarithm with eigenvalue flooring.
    pub fn log(&self) -> Result<Self> {
        conditioned_function(self, |z| z.ln())
    }

    /// Principal power with eigenvalue flooring.
    pub fn powf(&self, p: f64) -> Result<Self> {
        if p == 1.0 {
            return Ok(self.clone());
        }
        conditioned_function(self, |z| if z.im == 0.0 && z.re > 0.0 { C64::new(z.re.powf(p), 0.0) } else { z.powf(p) })
    }

    pub fn sqrt(&self) -> Result<Self> {
        self.powf(0.5)
    }

    /// Inverse with eigenvalue flooring.
    pub fn inverse(&self) -> Result<Self> {
        conditioned_function(self, |z| z.inv())
    }

    /// Eigenvalues (ascending real parts for Hermitian operators).
    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        if self.is_hermitian() {
            let (w, _) = eigh(self.matrix(), false)?;
            return Ok(w.into_iter().map(|x| C64::new(x, 0.0)).collect());
        }
        Ok(SpectralDecomposition::of(self)?.eigenvalues)
    }

    /// Smallest eigenvalue of a Hermitian operator.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        if !self.is_hermitian() {
            return Err(Error::InvalidArgument("minimum eigenvalue requires a Hermitian operator".into()));
        }
        let (w, _) = eigh(self.matrix(), false)?;
        Ok(w.first().copied().unwrap_or(0.0))
    }
}

/// Hermitian part `(M + M†)/2` of a square matrix.
pub fn hermitian_part(m: &Matrix) -> Array2<C64> {
    (m + &adjoint(m)).mapv(|x| x * 0.5)
}
