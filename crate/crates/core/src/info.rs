//! Entropic diagnostics in bits: entropy, (conditional) mutual information,
//! relative entropy and the Markov reconstruction.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::spectral::{eigh, EIGENVALUE_FLOOR, POSITIVITY_TOL};
use crate::operator::{LabeledOperator, Subsystem};

/// Disjoint label sets `A`, `B`, `C`; `B` may be empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tripartition {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub c: Vec<usize>,
}

impl Tripartition {
    pub fn new(a: Vec<usize>, b: Vec<usize>, c: Vec<usize>) -> Self {
        Tripartition { a, b, c }
    }

    fn validate(&self, rho: &LabeledOperator) -> Result<()> {
        if self.a.is_empty() || self.c.is_empty() {
            return Err(Error::InvalidTripartition("A and C must be non-empty".into()));
        }
        let all: Vec<usize> = self.a.iter().chain(&self.b).chain(&self.c).copied().collect();
        for (k, l) in all.iter().enumerate() {
            if all[..k].contains(l) {
                return Err(Error::InvalidTripartition(format!("label {l} appears in more than one part")));
            }
            if !rho.support().iter().any(|s| s.label == *l) {
                return Err(Error::InvalidTripartition(format!("label {l} is not in the state support")));
            }
        }
        Ok(())
    }
}

fn check_state(rho: &LabeledOperator) -> Result<()> {
    if !rho.is_hermitian() {
        return Err(Error::InvalidArgument("state must be Hermitian".into()));
    }
    let t = rho.trace();
    if (t.re - 1.0).abs() > 1e-8 || t.im.abs() > 1e-8 {
        return Err(Error::InvalidArgument(format!("state must have unit trace, got {t}")));
    }
    Ok(())
}

fn spectrum(rho: &LabeledOperator) -> Result<Vec<f64>> {
    let (w, _) = eigh(rho.matrix(), false)?;
    if let Some(&min) = w.first() {
        if min < -POSITIVITY_TOL.max(1e-9) {
            return Err(Error::NotPositive { min_eigenvalue: min });
        }
    }
    Ok(w)
}

fn shannon(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.log2()).sum::<f64>()
}

/// Von Neumann entropy `−Tr ρ log₂ ρ`.
pub fn entropy(rho: &LabeledOperator) -> Result<f64> {
    check_state(rho)?;
    Ok(shannon(&spectrum(rho)?))
}

fn marginal_entropy(rho: &LabeledOperator, keep: &[usize]) -> Result<f64> {
    if keep.is_empty() {
        return Ok(0.0);
    }
    entropy(&rho.reduce_to(keep)?)
}

/// Negative values this small are reported as zero.
pub const SSA_CLIP: f64 = 1e-9;

fn clip(x: f64) -> f64 {
    if x < 0.0 && x > -SSA_CLIP {
        0.0
    } else {
        x
    }
}

/// `I(A:C|B) = S(AB) + S(BC) − S(B) − S(ABC)`; with `B` empty this is the
/// mutual information `S(A) + S(C) − S(AC)`.
pub fn conditional_mutual_information(rho: &LabeledOperator, parts: &Tripartition) -> Result<f64> {
    check_state(rho)?;
    parts.validate(rho)?;
    let cat = |xs: &[&[usize]]| xs.concat();
    let (a, b, c) = (&parts.a[..], &parts.b[..], &parts.c[..]);
    let value = marginal_entropy(rho, &cat(&[a, b]))? + marginal_entropy(rho, &cat(&[b, c]))?
        - marginal_entropy(rho, b)?
        - marginal_entropy(rho, &cat(&[a, b, c]))?;
    Ok(clip(value))
}

pub fn mutual_information(rho: &LabeledOperator, a: &[usize], c: &[usize]) -> Result<f64> {
    conditional_mutual_information(rho, &Tripartition::new(a.to_vec(), vec![], c.to_vec()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelativeEntropy {
    /// In bits; `f64::INFINITY` when `infinite` is set.
    pub value: f64,
    /// The support of `ρ` is not contained in that of `σ`.
    pub infinite: bool,
}

/// `D(ρ‖σ) = Tr ρ (log₂ ρ − log₂ σ)`. `ρ` must be a state; `σ` may be any
/// positive operator, so that `D(ρ‖σ) = D(ρ‖σ/Tr σ) − log₂ Tr σ`.
pub fn relative_entropy(rho: &LabeledOperator, sigma: &LabeledOperator) -> Result<RelativeEntropy> {
    check_state(rho)?;
    if !sigma.is_hermitian() {
        return Err(Error::InvalidArgument("σ must be Hermitian".into()));
    }
    let sigma = if rho.support() == sigma.support() { sigma.clone() } else { sigma.reorder(rho.support())? };
    let (p, u) = eigh(rho.matrix(), true)?;
    let u = u.expect("vectors requested");
    if let Some(&min) = p.first() {
        if min < -POSITIVITY_TOL.max(1e-9) {
            return Err(Error::NotPositive { min_eigenvalue: min });
        }
    }
    let (q, v) = eigh(sigma.matrix(), true)?;
    let v = v.expect("vectors requested");
    let qmax = q.iter().fold(0.0f64, |a, &x| a.max(x));
    let floor = EIGENVALUE_FLOOR * qmax;
    // overlaps |<u_i|v_j>|²
    let overlap = u.t().mapv(|x| x.conj()).dot(&v).mapv(|x| x.norm_sqr());
    let mut cross = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        if pi <= EIGENVALUE_FLOOR {
            continue;
        }
        for (j, &qj) in q.iter().enumerate() {
            let w = overlap[[i, j]];
            if w <= 1e-14 {
                continue;
            }
            if qj <= floor {
                return Ok(RelativeEntropy { value: f64::INFINITY, infinite: true });
            }
            cross += pi * w * qj.log2();
        }
    }
    let value = -shannon(&p) - cross;
    Ok(RelativeEntropy { value: clip(value), infinite: false })
}

/// `exp(−log ρ_B + log ρ_AB + log ρ_BC)` on `ABC`, normalized; with `B`
/// empty this is `ρ_A ⊗ ρ_C`.
pub fn markov_reconstruction(rho: &LabeledOperator, parts: &Tripartition) -> Result<LabeledOperator> {
    markov_operator(rho, parts)?.normalized()
}

/// `ρ_B⁻¹ ⊙ ρ_AB ⊙ ρ_BC` without normalization. Its trace is at most one and
/// `D(ρ‖ρ_B⁻¹ ⊙ ρ_AB ⊙ ρ_BC) = I(A:C|B)`.
pub fn markov_operator(rho: &LabeledOperator, parts: &Tripartition) -> Result<LabeledOperator> {
    check_state(rho)?;
    parts.validate(rho)?;
    let abc: Vec<Subsystem> = rho
        .support()
        .iter()
        .filter(|s| parts.a.contains(&s.label) || parts.b.contains(&s.label) || parts.c.contains(&s.label))
        .copied()
        .collect();
    let labels = |xs: &[&[usize]]| -> Vec<usize> {
        abc.iter().map(|s| s.label).filter(|l| xs.iter().any(|x| x.contains(l))).collect()
    };
    let (a, b, c) = (&parts.a[..], &parts.b[..], &parts.c[..]);
    let rho_ab = rho.reduce_to(&labels(&[a, b]))?;
    let rho_bc = rho.reduce_to(&labels(&[b, c]))?;
    let mut sum = rho_ab.log()?.tensor_embed(&abc)?.add(&rho_bc.log()?.tensor_embed(&abc)?)?;
    if !b.is_empty() {
        let rho_b = rho.reduce_to(&labels(&[b]))?;
        sum = sum.sub(&rho_b.log()?.tensor_embed(&abc)?)?;
    }
    let reg = sum.regularized();
    Ok(sum.exp()?.mark_regularized(reg))
}
