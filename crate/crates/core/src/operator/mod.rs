//! Dense operators on labeled tensor-product spaces.
//!
//! A [`LabeledOperator`] is a square complex matrix together with the ordered
//! list of subsystems it acts on. Binary operations co-embed their operands on
//! the canonical (ascending-label) union of the supports, so callers never have
//! to line up tensor factors by hand.

mod layout;
pub mod products;
pub mod spectral;

use std::fmt;
use std::sync::{Arc, OnceLock};

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cap;
use crate::error::{Error, Result};

pub use products::{commutator_norm, commute, odot, star_n, trace_distance};
pub use spectral::{matrix_function, SpectralDecomposition};

pub type C64 = Complex64;
pub type Matrix = Array2<C64>;

pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Relative tolerance under which an operator counts as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// A quantum system with a label and a local Hilbert-space dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Subsystem {
    pub label: usize,
    pub dim: usize,
}

impl Subsystem {
    pub fn new(label: usize, dim: usize) -> Self {
        Subsystem { label, dim }
    }

    pub fn qubit(label: usize) -> Self {
        Subsystem { label, dim: 2 }
    }
}

struct Data {
    matrix: Matrix,
    diagonal: OnceLock<bool>,
}

/// Square complex matrix acting on an ordered list of subsystems.
///
/// The matrix is shared behind an `Arc`, so clones and relabelings are cheap.
#[derive(Clone)]
pub struct LabeledOperator {
    support: Vec<Subsystem>,
    data: Arc<Data>,
    hermitian: bool,
    regularized: bool,
}

impl fmt::Debug for LabeledOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LabeledOperator")
            .field("support", &self.support)
            .field("hermitian", &self.hermitian)
            .field("regularized", &self.regularized)
            .field("matrix", &self.data.matrix)
            .finish()
    }
}

fn hermitian_residual(m: &Matrix) -> (f64, f64) {
    let n = m.nrows();
    let mut res = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let a = m[[i, j]];
            let b = m[[j, i]].conj();
            res = res.max((a - b).norm());
            scale = scale.max(a.norm());
        }
    }
    (res, scale)
}

fn symmetrize(m: &mut Matrix) {
    let n = m.nrows();
    for i in 0..n {
        m[[i, i]].im = 0.0;
        for j in (i + 1)..n {
            let avg = (m[[i, j]] + m[[j, i]].conj()) * 0.5;
            m[[i, j]] = avg;
            m[[j, i]] = avg.conj();
        }
    }
}

impl LabeledOperator {
    /// Builds an operator, validating the support against the matrix shape.
    ///
    /// Matrices that are Hermitian up to rounding are symmetrized exactly and
    /// flagged as Hermitian.
    pub fn new(support: Vec<Subsystem>, mut matrix: Matrix) -> Result<Self> {
        layout::check_distinct(&support)?;
        if support.iter().any(|s| s.dim == 0) {
            return Err(Error::InvalidArgument("subsystem dimension must be positive".into()));
        }
        let expected = cap::total_dim(support.iter().map(|s| s.dim));
        if matrix.nrows() != expected || matrix.ncols() != expected {
            return Err(Error::ShapeMismatch { rows: matrix.nrows(), cols: matrix.ncols(), expected });
        }
        let (res, scale) = hermitian_residual(&matrix);
        let hermitian = res <= HERMITIAN_TOL * scale.max(1.0);
        if hermitian {
            symmetrize(&mut matrix);
        }
        Ok(Self::from_parts(support, matrix, hermitian, false))
    }

    pub(crate) fn from_parts(support: Vec<Subsystem>, matrix: Matrix, hermitian: bool, regularized: bool) -> Self {
        LabeledOperator {
            support,
            data: Arc::new(Data { matrix, diagonal: OnceLock::new() }),
            hermitian,
            regularized,
        }
    }

    /// Like [`LabeledOperator::new`] but re-derives the Hermitian flag without
    /// shape checks. Internal results already have consistent shapes.
    pub(crate) fn derived(support: Vec<Subsystem>, matrix: Matrix, regularized: bool) -> Self {
        let mut op = Self::new(support, matrix).expect("internal operator shape");
        op.regularized = regularized;
        op
    }

    pub fn from_real(support: Vec<Subsystem>, rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let m = Matrix::from_shape_fn((n, n), |(i, j)| C64::new(rows[i].get(j).copied().unwrap_or(f64::NAN), 0.0));
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::ShapeMismatch { rows: n, cols: rows.iter().map(|r| r.len()).max().unwrap_or(0), expected: n });
        }
        Self::new(support, m)
    }

    pub fn identity(support: Vec<Subsystem>) -> Result<Self> {
        let d = cap::total_dim(support.iter().map(|s| s.dim));
        cap::check_dense(d)?;
        Self::new(support, Matrix::eye(d))
    }

    /// Identity scaled to unit trace.
    pub fn maximally_mixed(support: Vec<Subsystem>) -> Result<Self> {
        let id = Self::identity(support)?;
        let d = id.dim() as f64;
        Ok(id.scale(C64::new(1.0 / d, 0.0)))
    }

    pub fn diagonal(support: Vec<Subsystem>, entries: &[C64]) -> Result<Self> {
        Self::new(support, Matrix::from_diag(&ndarray::Array1::from(entries.to_vec())))
    }

    pub fn support(&self) -> &[Subsystem] {
        &self.support
    }

    pub fn labels(&self) -> Vec<usize> {
        self.support.iter().map(|s| s.label).collect()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.data.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        Arc::try_unwrap(self.data).map(|d| d.matrix).unwrap_or_else(|d| d.matrix.clone())
    }

    pub fn dim(&self) -> usize {
        self.data.matrix.nrows()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Set when a matrix function had to floor near-zero eigenvalues
    /// somewhere along the computation that produced this operator.
    pub fn regularized(&self) -> bool {
        self.regularized
    }

    pub(crate) fn mark_regularized(mut self, flag: bool) -> Self {
        self.regularized |= flag;
        self
    }

    /// Exactly diagonal in the computational basis (cached).
    pub fn is_diagonal(&self) -> bool {
        *self.data.diagonal.get_or_init(|| {
            let m = &self.data.matrix;
            m.indexed_iter().all(|((i, j), x)| i == j || (x.re == 0.0 && x.im == 0.0))
        })
    }

    pub fn trace(&self) -> C64 {
        self.data.matrix.diag().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.matrix.iter().fold(0.0f64, |a, x| a.max(x.norm()))
    }

    /// Same matrix on a new support of equal total dimension.
    pub fn relabel(&self, support: Vec<Subsystem>) -> Result<Self> {
        layout::check_distinct(&support)?;
        let expected = cap::total_dim(support.iter().map(|s| s.dim));
        if expected != self.dim() {
            return Err(Error::ShapeMismatch { rows: self.dim(), cols: self.dim(), expected });
        }
        Ok(LabeledOperator { support, data: self.data.clone(), hermitian: self.hermitian, regularized: self.regularized })
    }

    pub fn scale(&self, c: C64) -> Self {
        let m = self.data.matrix.mapv(|x| x * c);
        let herm = self.hermitian && c.im == 0.0;
        Self::from_parts(self.support.clone(), m, herm, self.regularized)
    }

    /// Divides by the trace. Fails on a vanishing trace.
    pub fn normalized(&self) -> Result<Self> {
        let t = self.trace();
        if !(t.norm() > 0.0) || !t.re.is_finite() || !t.im.is_finite() {
            return Err(Error::InvalidArgument(format!("cannot normalize operator with trace {t}")));
        }
        let mut out = self.scale(t.inv());
        if self.hermitian {
            out.hermitian = true;
        }
        Ok(out)
    }

    pub fn adjoint(&self) -> Self {
        let m = self.data.matrix.t().mapv(|x| x.conj());
        Self::from_parts(self.support.clone(), m, self.hermitian, self.regularized)
    }

    /// Reorders the tensor factors to `order`, which must list the same
    /// subsystems.
    pub fn reorder(&self, order: &[Subsystem]) -> Result<Self> {
        if order == self.support.as_slice() {
            return Ok(self.clone());
        }
        if !layout::same_set(order, &self.support) {
            return Err(Error::SupportMismatch);
        }
        let p = layout::permutation(&self.support, order)?;
        let src = &self.data.matrix;
        let m = Matrix::from_shape_fn((p.len(), p.len()), |(i, j)| src[[p[i], p[j]]]);
        Ok(Self::from_parts(order.to_vec(), m, self.hermitian, self.regularized))
    }

    /// Acts as `self` on its support and as the identity on the rest of
    /// `full_support`, with subsystems ordered as in `full_support`.
    pub fn tensor_embed(&self, full_support: &[Subsystem]) -> Result<Self> {
        layout::check_distinct(full_support)?;
        let labels = self.labels();
        let pos = layout::positions_of(full_support, &labels)?;
        for (s, &p) in self.support.iter().zip(&pos) {
            if full_support[p].dim != s.dim {
                return Err(Error::DimensionConflict { label: s.label, expected: full_support[p].dim, found: s.dim });
            }
        }
        if full_support == self.support.as_slice() {
            return Ok(self.clone());
        }
        let d = cap::total_dim(full_support.iter().map(|s| s.dim));
        cap::check_dense(d)?;
        let sp = layout::split(full_support, &pos);
        let src = &self.data.matrix;
        let mut m = Matrix::zeros((d, d));
        for &r in &sp.rest {
            for (i, &si) in sp.sub.iter().enumerate() {
                for (j, &sj) in sp.sub.iter().enumerate() {
                    m[[si + r, sj + r]] = src[[i, j]];
                }
            }
        }
        Ok(Self::from_parts(full_support.to_vec(), m, self.hermitian, self.regularized))
    }

    /// Traces out the subsystems with the given labels.
    pub fn partial_trace(&self, traced: &[usize]) -> Result<Self> {
        let pos = layout::positions_of(&self.support, traced)?;
        let sp = layout::split(&self.support, &pos);
        let support: Vec<Subsystem> = sp.rest_positions.iter().map(|&p| self.support[p]).collect();
        let src = &self.data.matrix;
        let dr = sp.rest.len();
        let mut m = Matrix::zeros((dr, dr));
        for (a, &ra) in sp.rest.iter().enumerate() {
            for (b, &rb) in sp.rest.iter().enumerate() {
                let mut acc = ZERO;
                for &s in &sp.sub {
                    acc += src[[s + ra, s + rb]];
                }
                m[[a, b]] = acc;
            }
        }
        Ok(Self::from_parts(support, m, self.hermitian, self.regularized))
    }

    /// Keeps only the listed subsystems (traces out everything else).
    pub fn reduce_to(&self, kept: &[usize]) -> Result<Self> {
        layout::positions_of(&self.support, kept)?;
        let traced: Vec<usize> = self.support.iter().map(|s| s.label).filter(|l| !kept.contains(l)).collect();
        let out = self.partial_trace(&traced)?;
        let order: Vec<Subsystem> = kept.iter().map(|l| *out.support.iter().find(|s| s.label == *l).unwrap()).collect();
        out.reorder(&order)
    }

    /// `Tr_S{(factor ⊗ I) self}` where `S` is the support of `factor`.
    ///
    /// Costs O(dim²) instead of the O(dim³) of an explicit product.
    pub fn contract_local(&self, factor: &LabeledOperator) -> Result<Self> {
        let pos = layout::positions_of(&self.support, &factor.labels())?;
        for (s, &p) in factor.support.iter().zip(&pos) {
            if self.support[p].dim != s.dim {
                return Err(Error::DimensionConflict { label: s.label, expected: self.support[p].dim, found: s.dim });
            }
        }
        let sp = layout::split(&self.support, &pos);
        let support: Vec<Subsystem> = sp.rest_positions.iter().map(|&p| self.support[p]).collect();
        let src = &self.data.matrix;
        let f = factor.matrix();
        let dr = sp.rest.len();
        let mut m = Matrix::zeros((dr, dr));
        if self.is_diagonal() {
            for (a, &ra) in sp.rest.iter().enumerate() {
                let mut acc = ZERO;
                for (i, &si) in sp.sub.iter().enumerate() {
                    acc += f[[i, i]] * src[[si + ra, si + ra]];
                }
                m[[a, a]] = acc;
            }
        } else {
            for (a, &ra) in sp.rest.iter().enumerate() {
                for (j, &sj) in sp.sub.iter().enumerate() {
                    let row = src.row(sj + ra);
                    for (i, &si) in sp.sub.iter().enumerate() {
                        let fij = f[[i, j]];
                        if fij == ZERO {
                            continue;
                        }
                        for (b, &rb) in sp.rest.iter().enumerate() {
                            m[[a, b]] += fij * row[si + rb];
                        }
                    }
                }
            }
        }
        Ok(Self::derived(support, m, self.regularized || factor.regularized))
    }

    /// `Tr{(factor ⊗ I) self}`.
    pub fn trace_with_local(&self, factor: &LabeledOperator) -> Result<C64> {
        Ok(self.contract_local(factor)?.trace())
    }

    /// Matrix product, co-embedding on the union of the supports.
    pub fn mul(&self, rhs: &LabeledOperator) -> Result<Self> {
        let reg = self.regularized || rhs.regularized;
        if self.support == rhs.support {
            let m = self.matrix().dot(rhs.matrix());
            return Ok(Self::derived(self.support.clone(), m, reg));
        }
        if layout::is_subset(&rhs.support, &self.support) {
            return Ok(apply_right(self, rhs)?.mark_regularized(reg));
        }
        if layout::is_subset(&self.support, &rhs.support) {
            return Ok(apply_left(self, rhs)?.mark_regularized(reg));
        }
        let union = layout::union(&self.support, &rhs.support)?;
        let lhs = self.tensor_embed(&union)?;
        Ok(apply_right(&lhs, rhs)?.mark_regularized(reg))
    }

    fn combine(&self, rhs: &LabeledOperator, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        let (a, b) = if layout::same_set(&self.support, &rhs.support) {
            (self.clone(), rhs.reorder(&self.support)?)
        } else {
            let union = layout::union(&self.support, &rhs.support)?;
            (self.tensor_embed(&union)?, rhs.tensor_embed(&union)?)
        };
        let mut m = a.matrix().clone();
        m.zip_mut_with(b.matrix(), |x, y| *x = f(*x, *y));
        Ok(Self::derived(a.support.clone(), m, self.regularized || rhs.regularized))
    }

    pub fn add(&self, rhs: &LabeledOperator) -> Result<Self> {
        self.combine(rhs, |x, y| x + y)
    }

    pub fn sub(&self, rhs: &LabeledOperator) -> Result<Self> {
        self.combine(rhs, |x, y| x - y)
    }

    /// Largest entry-wise deviation after co-embedding.
    pub fn max_abs_diff(&self, rhs: &LabeledOperator) -> Result<f64> {
        Ok(self.sub(rhs)?.max_abs())
    }

    /// Kronecker product of operators on disjoint supports.
    pub fn kron(&self, rhs: &LabeledOperator) -> Result<Self> {
        let mut support = self.support.clone();
        support.extend_from_slice(&rhs.support);
        layout::check_distinct(&support)?;
        cap::check_dense(cap::total_dim(support.iter().map(|s| s.dim)))?;
        let m = ndarray::linalg::kron(self.matrix(), rhs.matrix());
        Ok(Self::from_parts(support, m, self.hermitian && rhs.hermitian, self.regularized || rhs.regularized))
    }

    /// Integer matrix power by repeated squaring.
    pub fn powi(&self, n: u32) -> Result<Self> {
        let mut result = LabeledOperator::identity(self.support.clone())?;
        let mut base = self.clone();
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                result = result.mul(&base)?;
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base)?;
            }
        }
        Ok(result.mark_regularized(self.regularized))
    }

    /// `Tr{self · rhs}` without forming the product.
    pub fn trace_product(&self, rhs: &LabeledOperator) -> Result<C64> {
        let b = if self.support == rhs.support {
            rhs.clone()
        } else if layout::same_set(&self.support, &rhs.support) {
            rhs.reorder(&self.support)?
        } else if layout::is_subset(&rhs.support, &self.support) {
            return self.trace_with_local(rhs);
        } else if layout::is_subset(&self.support, &rhs.support) {
            return rhs.trace_with_local(self);
        } else {
            let union = layout::union(&self.support, &rhs.support)?;
            return self.tensor_embed(&union)?.trace_product(rhs);
        };
        let a = self.matrix();
        let bm = b.matrix();
        let mut acc = ZERO;
        for ((i, j), x) in a.indexed_iter() {
            acc += x * bm[[j, i]];
        }
        Ok(acc)
    }
}

/// `(local ⊗ I) · full` with `local` supported inside `full`.
fn apply_left(local: &LabeledOperator, full: &LabeledOperator) -> Result<LabeledOperator> {
    let pos = layout::positions_of(full.support(), &local.labels())?;
    let sp = layout::split(full.support(), &pos);
    let d = full.dim();
    let ds = sp.sub.len();
    let dr = sp.rest.len();
    let src = full.matrix();
    // gather rows into (ds, dr * d)
    let mut y = Matrix::zeros((ds, dr * d));
    for (s, &so) in sp.sub.iter().enumerate() {
        for (r, &ro) in sp.rest.iter().enumerate() {
            y.slice_mut(ndarray::s![s, r * d..(r + 1) * d]).assign(&src.row(so + ro));
        }
    }
    let z = local.matrix().dot(&y);
    let mut out = Matrix::zeros((d, d));
    for (s, &so) in sp.sub.iter().enumerate() {
        for (r, &ro) in sp.rest.iter().enumerate() {
            out.row_mut(so + ro).assign(&z.slice(ndarray::s![s, r * d..(r + 1) * d]));
        }
    }
    Ok(LabeledOperator::derived(full.support().to_vec(), out, false))
}

/// `full · (local ⊗ I)` with `local` supported inside `full`.
fn apply_right(full: &LabeledOperator, local: &LabeledOperator) -> Result<LabeledOperator> {
    let pos = layout::positions_of(full.support(), &local.labels())?;
    let sp = layout::split(full.support(), &pos);
    let d = full.dim();
    let ds = sp.sub.len();
    let dr = sp.rest.len();
    let src = full.matrix();
    // gather columns into (d * dr, ds)
    let mut y = Matrix::zeros((d * dr, ds));
    for c in 0..d {
        let row = src.row(c);
        for (r, &ro) in sp.rest.iter().enumerate() {
            for (s, &so) in sp.sub.iter().enumerate() {
                y[[c * dr + r, s]] = row[so + ro];
            }
        }
    }
    let z = y.dot(local.matrix());
    let mut out = Matrix::zeros((d, d));
    for (c, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        for (r, &ro) in sp.rest.iter().enumerate() {
            for (s, &so) in sp.sub.iter().enumerate() {
                row[so + ro] = z[[c * dr + r, s]];
            }
        }
    }
    Ok(LabeledOperator::derived(full.support().to_vec(), out, false))
}

/// Pauli matrices scaled by one half, so that `σ² = I/4`.
pub mod spin {
    use super::{Matrix, C64};

    pub fn sx() -> Matrix {
        ndarray::array![[C64::new(0.0, 0.0), C64::new(0.5, 0.0)], [C64::new(0.5, 0.0), C64::new(0.0, 0.0)]]
    }

    pub fn sy() -> Matrix {
        ndarray::array![[C64::new(0.0, 0.0), C64::new(0.0, -0.5)], [C64::new(0.0, 0.5), C64::new(0.0, 0.0)]]
    }

    pub fn sz() -> Matrix {
        ndarray::array![[C64::new(0.5, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(-0.5, 0.0)]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(l: usize) -> Subsystem {
        Subsystem::qubit(l)
    }

    fn op(support: Vec<Subsystem>, f: impl Fn(usize, usize) -> C64) -> LabeledOperator {
        let d: usize = support.iter().map(|s| s.dim).product();
        LabeledOperator::new(support, Matrix::from_shape_fn((d, d), |(i, j)| f(i, j))).unwrap()
    }

    fn generic(support: Vec<Subsystem>, seed: u64) -> LabeledOperator {
        op(support, |i, j| {
            let x = ((i * 31 + j * 17 + seed as usize * 7) % 13) as f64 - 6.0;
            let y = ((i * 11 + j * 5 + seed as usize) % 7) as f64 - 3.0;
            C64::new(x, y)
        })
    }

    /// Element-by-element embedding: `<k|E|l> = <k_S|A|l_S> δ(k_rest, l_rest)`.
    fn naive_embed(a: &LabeledOperator, full: &[Subsystem]) -> Matrix {
        let dims: Vec<usize> = full.iter().map(|s| s.dim).collect();
        let d: usize = dims.iter().product();
        let digits = |mut k: usize| {
            let mut out = vec![0; dims.len()];
            for p in (0..dims.len()).rev() {
                out[p] = k % dims[p];
                k /= dims[p];
            }
            out
        };
        let pos: Vec<usize> = a.support().iter().map(|s| full.iter().position(|t| t.label == s.label).unwrap()).collect();
        let local = |dg: &[usize]| pos.iter().zip(a.support()).fold(0, |acc, (&p, s)| acc * s.dim + dg[p]);
        Matrix::from_shape_fn((d, d), |(k, l)| {
            let (dk, dl) = (digits(k), digits(l));
            let rest_equal = (0..dims.len()).filter(|p| !pos.contains(p)).all(|p| dk[p] == dl[p]);
            if rest_equal {
                a.matrix()[[local(&dk), local(&dl)]]
            } else {
                ZERO
            }
        })
    }

    #[test]
    fn embed_on_own_support_is_unchanged() {
        let z = LabeledOperator::new(vec![q(1)], spin::sz()).unwrap();
        let e = z.tensor_embed(&[q(1)]).unwrap();
        assert_eq!(e.matrix(), z.matrix());
    }

    #[test]
    fn embed_pads_with_identity_in_front() {
        let a = generic(vec![q(2)], 3);
        let e = a.tensor_embed(&[q(1), q(2)]).unwrap();
        let expected = ndarray::linalg::kron(&Matrix::eye(2), a.matrix());
        assert_eq!(e.matrix(), &expected);
    }

    #[test]
    fn embed_matches_elementwise_oracle() {
        let b = generic(vec![q(3), Subsystem::new(1, 3)], 5);
        let full = [Subsystem::new(1, 3), q(2), q(3)];
        let e = b.tensor_embed(&full).unwrap();
        assert_eq!(e.matrix(), &naive_embed(&b, &full));
    }

    #[test]
    fn embed_rejects_unknown_and_duplicate_labels() {
        let a = generic(vec![q(4)], 1);
        assert_eq!(a.tensor_embed(&[q(1), q(2)]).unwrap_err(), Error::UnknownLabel(4));
        assert_eq!(a.tensor_embed(&[q(4), q(4)]).unwrap_err(), Error::DuplicateLabel(4));
    }

    #[test]
    fn partial_trace_of_product_state() {
        let a = generic(vec![q(0)], 1);
        let b = generic(vec![Subsystem::new(1, 3)], 2);
        let ab = a.kron(&b).unwrap();
        let r = ab.partial_trace(&[1]).unwrap();
        let expected = a.scale(b.trace());
        assert!(r.max_abs_diff(&expected).unwrap() < 1e-12);
        assert_eq!(r.support(), &[q(0)]);
    }

    #[test]
    fn partial_trace_of_bell_state_is_maximally_mixed() {
        let h = 0.5;
        let phi = LabeledOperator::from_real(
            vec![q(0), q(1)],
            &[&[h, 0.0, 0.0, h], &[0.0; 4], &[0.0; 4], &[h, 0.0, 0.0, h]],
        )
        .unwrap();
        let r = phi.partial_trace(&[0]).unwrap();
        let mm = LabeledOperator::maximally_mixed(vec![q(1)]).unwrap();
        assert!(r.max_abs_diff(&mm).unwrap() < 1e-15);
    }

    #[test]
    fn partial_trace_unknown_label() {
        let a = generic(vec![q(0)], 1);
        assert_eq!(a.partial_trace(&[7]).unwrap_err(), Error::UnknownLabel(7));
    }

    #[test]
    fn mul_with_local_factor_matches_embedding() {
        let full = generic(vec![q(0), Subsystem::new(1, 3), q(2)], 9);
        let local = generic(vec![q(2), q(0)], 4);
        let emb = local.tensor_embed(full.support()).unwrap();
        let left = local.mul(&full).unwrap();
        let right = full.mul(&local).unwrap();
        assert!((left.matrix() - &emb.matrix().dot(full.matrix())).iter().all(|x| x.norm() < 1e-12));
        assert!((right.matrix() - &full.matrix().dot(emb.matrix())).iter().all(|x| x.norm() < 1e-12));
    }

    #[test]
    fn contract_local_matches_explicit_product() {
        let full = generic(vec![q(0), Subsystem::new(1, 3), q(2)], 2);
        let factor = generic(vec![q(2), Subsystem::new(1, 3)], 8);
        let fast = full.contract_local(&factor).unwrap();
        let slow = factor.mul(&full).unwrap().partial_trace(&[2, 1]).unwrap();
        assert!(fast.max_abs_diff(&slow).unwrap() < 1e-10);
        let t = full.trace_product(&factor).unwrap();
        assert!((t - fast.trace()).norm() < 1e-10);
    }

    #[test]
    fn reorder_roundtrip() {
        let a = generic(vec![q(0), Subsystem::new(1, 3)], 6);
        let b = a.reorder(&[Subsystem::new(1, 3), q(0)]).unwrap();
        let c = b.reorder(a.support()).unwrap();
        assert_eq!(a.matrix(), c.matrix());
        assert!(a.max_abs_diff(&b).unwrap() < 1e-15);
    }

    #[test]
    fn powi_matches_repeated_product() {
        let a = generic(vec![q(0)], 2).scale(C64::new(0.1, 0.0));
        let p = a.powi(5).unwrap();
        let mut r = a.clone();
        for _ in 0..4 {
            r = r.mul(&a).unwrap();
        }
        assert!(p.max_abs_diff(&r).unwrap() < 1e-12);
    }

    #[test]
    fn shape_is_validated() {
        let err = LabeledOperator::new(vec![q(0)], Matrix::eye(3)).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { .. }));
    }
}
