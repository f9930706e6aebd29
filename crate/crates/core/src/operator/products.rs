//! The `⋆ⁿ` and `⊙` products, commutators and the trace distance.

use ndarray_linalg::SVD;

use super::spectral::eigh;
use super::{layout, LabeledOperator, C64};
use crate::error::{Error, Result};

/// Relative commutator size under which two operators are treated as
/// commuting.
pub const COMMUTE_TOL: f64 = 1e-10;

/// `max |[a, b]|` after co-embedding.
pub fn commutator_norm(a: &LabeledOperator, b: &LabeledOperator) -> Result<f64> {
    if a.is_diagonal() && b.is_diagonal() {
        return Ok(0.0);
    }
    if a.support().iter().all(|s| !b.support().contains(s)) {
        layout::union(a.support(), b.support())?;
        return Ok(0.0);
    }
    let ab = a.mul(b)?;
    let ba = b.mul(a)?;
    ab.max_abs_diff(&ba)
}

/// Whether `[a, b]` vanishes relative to the size of `ab`.
pub fn commute(a: &LabeledOperator, b: &LabeledOperator) -> Result<bool> {
    if a.is_diagonal() && b.is_diagonal() {
        return Ok(true);
    }
    if a.support().iter().all(|s| !b.support().contains(s)) {
        return Ok(true);
    }
    let ab = a.mul(b)?;
    let ba = b.mul(a)?;
    let scale = ab.max_abs().max(ba.max_abs());
    Ok(ab.max_abs_diff(&ba)? <= COMMUTE_TOL * scale.max(f64::MIN_POSITIVE))
}

fn co_embed(ops: &[&LabeledOperator]) -> Result<Vec<LabeledOperator>> {
    let mut union = ops[0].support().to_vec();
    let all_same = ops.iter().all(|o| layout::same_set(o.support(), &union));
    if all_same {
        return ops.iter().map(|o| o.reorder(&union)).collect();
    }
    for o in &ops[1..] {
        union = layout::union(&union, o.support())?;
    }
    ops.iter().map(|o| o.tensor_embed(&union)).collect()
}

/// `X ⋆ⁿ Y = [X^{1/2n} Y^{1/n} X^{1/2n}]^n`.
///
/// Hermitian inputs must be positive semidefinite. Normal non-Hermitian
/// inputs are accepted with principal-branch powers.
pub fn star_n(x: &LabeledOperator, y: &LabeledOperator, n: u32) -> Result<LabeledOperator> {
    if n == 0 {
        return Err(Error::InvalidArgument("star product order must be positive".into()));
    }
    let ops = co_embed(&[x, y])?;
    let (x, y) = (&ops[0], &ops[1]);
    let xp = x.powf(1.0 / (2.0 * n as f64))?;
    let yp = y.powf(1.0 / n as f64)?;
    let inner = xp.mul(&yp)?.mul(&xp)?;
    if n == 1 {
        Ok(inner)
    } else {
        inner.powi(n)
    }
}

/// `X₁ ⊙ X₂ ⊙ … = exp(Σ log Xᵢ)`, or the plain product when every pair
/// commutes.
pub fn odot(ops: &[&LabeledOperator]) -> Result<LabeledOperator> {
    let Some(first) = ops.first() else {
        return Err(Error::InvalidArgument("⊙ needs at least one operand".into()));
    };
    if ops.len() == 1 {
        return Ok((*first).clone());
    }
    let mut all_commute = true;
    'outer: for i in 0..ops.len() {
        for j in (i + 1)..ops.len() {
            if !commute(ops[i], ops[j])? {
                all_commute = false;
                break 'outer;
            }
        }
    }
    if all_commute {
        // largest support first so local factors are applied in place
        let mut order: Vec<&LabeledOperator> = ops.to_vec();
        order.sort_by_key(|o| std::cmp::Reverse(o.support().len()));
        let mut acc = order[0].clone();
        for o in &order[1..] {
            acc = acc.mul(o)?;
        }
        let union = co_embed(ops)?.swap_remove(0).support().to_vec();
        let acc = acc.tensor_embed_or_reorder(&union)?;
        return Ok(acc);
    }
    let embedded = co_embed(ops)?;
    let mut sum = embedded[0].log()?;
    for o in &embedded[1..] {
        sum = sum.add(&o.log()?)?;
    }
    let reg = sum.regularized();
    Ok(sum.exp()?.mark_regularized(reg))
}

impl LabeledOperator {
    /// Reorders onto `support` when it holds the same subsystems, otherwise
    /// pads with identities.
    pub(crate) fn tensor_embed_or_reorder(&self, support: &[super::Subsystem]) -> Result<Self> {
        if layout::same_set(self.support(), support) {
            self.reorder(support)
        } else {
            self.tensor_embed(support)
        }
    }
}

/// `½ Σ σᵢ(X − Y)`.
pub fn trace_distance(x: &LabeledOperator, y: &LabeledOperator) -> Result<f64> {
    if !layout::same_set(x.support(), y.support()) {
        return Err(Error::SupportMismatch);
    }
    let d = x.sub(y)?;
    if d.is_hermitian() {
        let (w, _) = eigh(d.matrix(), false)?;
        return Ok(0.5 * w.iter().map(|v| v.abs()).sum::<f64>());
    }
    let (_, s, _) = d
        .matrix()
        .svd(false, false)
        .map_err(|_| Error::Lapack { routine: "zgesvd", info: -1 })?;
    Ok(0.5 * s.iter().sum::<f64>())
}

/// Trace norm helper used by tests and diagnostics.
pub fn trace_norm(x: &LabeledOperator) -> Result<f64> {
    let zero = x.scale(C64::new(0.0, 0.0));
    Ok(2.0 * trace_distance(x, &zero)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{Matrix, Subsystem};

    fn q(l: usize) -> Subsystem {
        Subsystem::qubit(l)
    }

    fn d(vals: &[f64]) -> LabeledOperator {
        LabeledOperator::diagonal(vec![q(0)], &vals.iter().map(|&v| C64::new(v, 0.0)).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn star_with_identity_returns_second_operand() {
        let y = LabeledOperator::from_real(vec![q(0)], &[&[2.0, 0.5], &[0.5, 1.0]]).unwrap();
        let id = LabeledOperator::identity(vec![q(0)]).unwrap();
        for n in [1, 2, 5] {
            assert!(star_n(&id, &y, n).unwrap().max_abs_diff(&y).unwrap() < 1e-12);
        }
    }

    #[test]
    fn star_of_commuting_diagonals_is_product() {
        for n in [1, 2, 7] {
            let r = star_n(&d(&[1.0, 2.0]), &d(&[3.0, 4.0]), n).unwrap();
            assert!(r.max_abs_diff(&d(&[3.0, 8.0])).unwrap() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn star_by_hand() {
        let x = d(&[1.0, 4.0]);
        let y = LabeledOperator::from_real(vec![q(0)], &[&[1.0, 1.0], &[1.0, 1.0]]).unwrap();
        let r = star_n(&x, &y, 1).unwrap();
        let expected = LabeledOperator::from_real(vec![q(0)], &[&[1.0, 2.0], &[2.0, 4.0]]).unwrap();
        assert!(r.max_abs_diff(&expected).unwrap() < 1e-12);
    }

    #[test]
    fn star_rejects_negative_input() {
        let err = star_n(&d(&[1.0, -1.0]), &d(&[1.0, 1.0]), 2).unwrap_err();
        assert!(matches!(err, Error::NotPositive { .. }));
    }

    #[test]
    fn odot_of_inverse_pair_is_identity() {
        let x = LabeledOperator::from_real(vec![q(0)], &[&[2.0, 0.5], &[0.5, 1.0]]).unwrap();
        let r = odot(&[&x, &x.inverse().unwrap()]).unwrap();
        assert!(r.max_abs_diff(&LabeledOperator::identity(vec![q(0)]).unwrap()).unwrap() < 1e-12);
    }

    #[test]
    fn odot_of_commuting_is_product_and_coembeds() {
        let a = d(&[2.0, 3.0]);
        let b = LabeledOperator::diagonal(vec![q(1)], &[C64::new(5.0, 0.0), C64::new(7.0, 0.0)]).unwrap();
        let r = odot(&[&a, &b]).unwrap();
        assert_eq!(r.labels(), vec![0, 1]);
        let expected = a.kron(&b).unwrap();
        assert!(r.max_abs_diff(&expected).unwrap() < 1e-12);
    }

    #[test]
    fn odot_is_symmetric_for_noncommuting() {
        let x = LabeledOperator::from_real(vec![q(0)], &[&[2.0, 0.5], &[0.5, 1.0]]).unwrap();
        let y = LabeledOperator::from_real(vec![q(0)], &[&[1.0, -0.3], &[-0.3, 3.0]]).unwrap();
        let xy = odot(&[&x, &y]).unwrap();
        let yx = odot(&[&y, &x]).unwrap();
        assert!(xy.max_abs_diff(&yx).unwrap() < 1e-12);
        let direct = x.log().unwrap().add(&y.log().unwrap()).unwrap().exp().unwrap();
        assert!(xy.max_abs_diff(&direct).unwrap() < 1e-12);
    }

    #[test]
    fn trace_distance_examples() {
        let mm = LabeledOperator::maximally_mixed(vec![q(0)]).unwrap();
        assert!(trace_distance(&mm, &mm).unwrap().abs() < 1e-15);
        assert!((trace_distance(&mm, &d(&[1.0, 0.0])).unwrap() - 0.5).abs() < 1e-14);
        let other = LabeledOperator::identity(vec![q(1)]).unwrap();
        assert_eq!(trace_distance(&mm, &other).unwrap_err(), Error::SupportMismatch);
    }

    #[test]
    fn trace_distance_of_non_hermitian_difference() {
        let x = LabeledOperator::new(vec![q(0)], Matrix::from_shape_fn((2, 2), |(i, j)| C64::new((i + 2 * j) as f64, i as f64))).unwrap();
        let zero = x.scale(C64::new(0.0, 0.0));
        // singular values of [[0, 2], [1+i, 3+i]] via eigenvalues of A†A
        let a = x.matrix();
        let ata = a.t().mapv(|z| z.conj()).dot(a);
        let tr = (ata[[0, 0]] + ata[[1, 1]]).re;
        let det = (ata[[0, 0]] * ata[[1, 1]] - ata[[0, 1]] * ata[[1, 0]]).re;
        let disc = (tr * tr / 4.0 - det).sqrt();
        let expected = 0.5 * ((tr / 2.0 + disc).sqrt() + (tr / 2.0 - disc).max(0.0).sqrt());
        assert!((trace_distance(&x, &zero).unwrap() - expected).abs() < 1e-12);
    }
}
