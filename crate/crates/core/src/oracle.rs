//! Reference results: dense Gibbs states, the free-fermion energy density of
//! the transverse-field chain, and the relative error metric.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::HamiltonianDecomposition;
use crate::operator::spectral::eigh;
use crate::operator::{LabeledOperator, Matrix, Subsystem, C64};

/// `C(anchor, j) = Tr{σ^z_anchor σ^z_j ρ}` for a set of targets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationProfile {
    pub anchor: usize,
    pub beta: f64,
    pub values: BTreeMap<usize, f64>,
    pub descriptor: String,
}

impl CorrelationProfile {
    pub fn get(&self, j: usize) -> Option<f64> {
        self.values.get(&j).copied()
    }
}

/// Largest system handled by the dense oracle.
pub const MAX_ORACLE_SPINS: usize = 14;

/// Eigen-decomposition of a dense Hamiltonian, reused across temperatures.
#[derive(Debug, Clone)]
pub struct GibbsOracle {
    support: Vec<Subsystem>,
    energies: Vec<f64>,
    vectors: Matrix,
    /// `|U_{ki}|²`: weight of eigenvector `i` on basis state `k`.
    weights: Vec<f64>,
}

impl GibbsOracle {
    pub fn new(h: &HamiltonianDecomposition) -> Result<Self> {
        if h.num_sites() > MAX_ORACLE_SPINS {
            return Err(Error::DenseCapExceeded { dim: 1 << h.num_sites(), cap: 1 << MAX_ORACLE_SPINS });
        }
        Self::from_operator(&h.dense()?)
    }

    pub fn from_operator(h: &LabeledOperator) -> Result<Self> {
        if !h.is_hermitian() {
            return Err(Error::InvalidArgument("Hamiltonian must be Hermitian".into()));
        }
        let (energies, vectors) = eigh(h.matrix(), true)?;
        let vectors = vectors.expect("vectors requested");
        let weights = vectors.iter().map(|x| x.norm_sqr()).collect();
        Ok(GibbsOracle { support: h.support().to_vec(), energies, vectors, weights })
    }

    pub fn support(&self) -> &[Subsystem] {
        &self.support
    }

    fn boltzmann(&self, beta: f64) -> Vec<f64> {
        let e0 = self.energies.first().copied().unwrap_or(0.0);
        let w: Vec<f64> = self.energies.iter().map(|&e| (-beta * (e - e0)).exp()).collect();
        let z: f64 = w.iter().sum();
        w.into_iter().map(|x| x / z).collect()
    }

    /// Diagonal of `e^{−βH}/Z` in the computational basis.
    pub fn diagonal(&self, beta: f64) -> Vec<f64> {
        let p = self.boltzmann(beta);
        let d = p.len();
        (0..d).map(|k| (0..d).map(|i| self.weights[k * d + i] * p[i]).sum()).collect()
    }

    /// Dense `e^{−βH}/Z`.
    pub fn state(&self, beta: f64) -> Result<LabeledOperator> {
        let p = self.boltzmann(beta);
        let m = crate::operator::spectral::reconstruct(&self.vectors, &p.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>());
        LabeledOperator::new(self.support.clone(), m)
    }

    /// Thermal energy `Tr{Hρ}`.
    pub fn energy(&self, beta: f64) -> f64 {
        self.boltzmann(beta).iter().zip(&self.energies).map(|(p, e)| p * e).sum()
    }

    pub fn correlations(&self, beta: f64, anchor: usize, targets: &[usize]) -> Result<CorrelationProfile> {
        zz_profile_from_diagonal(&self.support, &self.diagonal(beta), anchor, targets, beta, "exact")
    }
}

/// Dense Gibbs correlations `Tr{σ^z_a σ^z_j e^{−βH}}/Z`.
pub fn exact_correlations(
    h: &HamiltonianDecomposition,
    beta: f64,
    anchor: usize,
    targets: &[usize],
) -> Result<CorrelationProfile> {
    GibbsOracle::new(h)?.correlations(beta, anchor, targets)
}

/// `σ^z` correlations from the computational-basis diagonal of a state on
/// qubits. `σ^z = Z/2`, so each product contributes `±¼`.
pub fn zz_profile_from_diagonal(
    support: &[Subsystem],
    diagonal: &[f64],
    anchor: usize,
    targets: &[usize],
    beta: f64,
    descriptor: &str,
) -> Result<CorrelationProfile> {
    if support.iter().any(|s| s.dim != 2) {
        return Err(Error::InvalidArgument("σ^z profiles need qubit sites".into()));
    }
    let n = support.len();
    let bit = |label: usize| -> Result<usize> {
        support
            .iter()
            .position(|s| s.label == label)
            .map(|p| n - 1 - p)
            .ok_or(Error::UnknownLabel(label))
    };
    let a = bit(anchor)?;
    let mut values = BTreeMap::new();
    for &j in targets {
        let b = bit(j)?;
        let mut acc = 0.0;
        for (k, &p) in diagonal.iter().enumerate() {
            let sa = if (k >> a) & 1 == 0 { 0.5 } else { -0.5 };
            let sb = if (k >> b) & 1 == 0 { 0.5 } else { -0.5 };
            acc += p * sa * sb;
        }
        values.insert(j, acc);
    }
    Ok(CorrelationProfile { anchor, beta, values, descriptor: descriptor.to_string() })
}

/// `σ^z` profile of a dense state on qubits.
pub fn zz_profile_from_state(
    rho: &LabeledOperator,
    anchor: usize,
    targets: &[usize],
    beta: f64,
    descriptor: &str,
) -> Result<CorrelationProfile> {
    let t = rho.trace().re;
    let diag: Vec<f64> = rho.matrix().diag().iter().map(|x| x.re / t).collect();
    zz_profile_from_diagonal(rho.support(), &diag, anchor, targets, beta, descriptor)
}

/// `Σ_j |C_j − C̃_j| / Σ_j |C_j|`. Returns NaN when the exact profile is
/// identically zero.
pub fn error_metric(exact: &CorrelationProfile, approx: &CorrelationProfile) -> Result<f64> {
    if exact.values.len() != approx.values.len() || exact.values.keys().any(|k| !approx.values.contains_key(k)) {
        return Err(Error::SupportMismatch);
    }
    let den: f64 = exact.values.values().map(|c| c.abs()).sum();
    if den == 0.0 {
        return Ok(f64::NAN);
    }
    let num: f64 = exact.values.iter().map(|(k, c)| (c - approx.values[k]).abs()).sum();
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorAttribution {
    /// Gibbs vs message passing.
    pub total: f64,
    /// Gibbs vs the Trotter state.
    pub ts_only: f64,
    /// Trotter state vs message passing.
    pub loop_only: f64,
}

pub fn error_attribution(
    gibbs: &CorrelationProfile,
    trotter: &CorrelationProfile,
    qbp: &CorrelationProfile,
) -> Result<ErrorAttribution> {
    Ok(ErrorAttribution {
        total: error_metric(gibbs, qbp)?,
        ts_only: error_metric(gibbs, trotter)?,
        loop_only: error_metric(trotter, qbp)?,
    })
}

/// Energy per site of the infinite chain `Σ g σ^x_v + Σ J σ^z_v σ^z_{v+1}`
/// with `σ = Pauli/2`, from the free-fermion dispersion
/// `ε_k = 2 √(J'² + h² − 2 J' h cos k)`, `J' = J/4`, `h = g/2`:
/// `e = −(1/π) ∫₀^π (ε_k/2) tanh(β ε_k/2) dk`.
pub fn free_fermion_energy(g: f64, j: f64, beta: f64) -> Result<f64> {
    if !(beta >= 0.0) || !g.is_finite() || !j.is_finite() {
        return Err(Error::InvalidArgument(format!("invalid parameters g = {g}, J = {j}, beta = {beta}")));
    }
    let jp = j.abs() / 4.0;
    let h = g.abs() / 2.0;
    let integrand = |k: f64| {
        let eps = 2.0 * (jp * jp + h * h - 2.0 * jp * h * k.cos()).max(0.0).sqrt();
        let t = if beta.is_infinite() { 1.0 } else { (0.5 * beta * eps).tanh() };
        0.5 * eps * t
    };
    let integral = simpson(integrand, 0.0, std::f64::consts::PI, 1e-14)?;
    Ok(-integral / std::f64::consts::PI)
}

/// Composite Simpson rule, doubling the panel count until successive
/// estimates agree.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    let mut n = 64usize;
    let mut last = f64::NAN;
    let mut last_change = f64::INFINITY;
    while n <= 1 << 22 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        let est = s * h / 3.0;
        if last.is_finite() {
            last_change = (est - last).abs();
            if last_change <= tol * est.abs().max(1.0) {
                return Ok(est);
            }
        }
        last = est;
        n *= 2;
    }
    Err(Error::Quadrature { last_change })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_hamiltonian, chain, Couplings, ModelSpec};

    fn profile(vals: &[f64]) -> CorrelationProfile {
        CorrelationProfile {
            anchor: 0,
            beta: 1.0,
            values: vals.iter().copied().enumerate().collect(),
            descriptor: String::new(),
        }
    }

    #[test]
    fn error_metric_examples() {
        let exact = profile(&[0.25, 0.1, -0.05]);
        let approx = profile(&[0.25, 0.08, -0.06]);
        assert!((error_metric(&exact, &approx).unwrap() - 0.075).abs() < 1e-15);
        assert_eq!(error_metric(&exact, &exact).unwrap(), 0.0);
        assert!((error_metric(&exact, &profile(&[0.0, 0.0, 0.0])).unwrap() - 1.0).abs() < 1e-15);
        assert!(error_metric(&profile(&[0.0, 0.0]), &profile(&[0.1, 0.0])).unwrap().is_nan());
        assert!(error_metric(&exact, &profile(&[0.0])).is_err());
    }

    #[test]
    fn two_spin_zero_field_correlation() {
        let h = build_hamiltonian(&chain(2).unwrap(), &ModelSpec::Ising { g: [0.0; 3], j: Couplings::Uniform(1.0) }).unwrap();
        for beta in [0.0, 0.5, 2.0, 30.0] {
            let p = exact_correlations(&h, beta, 0, &[0, 1]).unwrap();
            assert!((p.get(0).unwrap() - 0.25).abs() < 1e-14);
            let expected = -0.25 * (beta / 4.0).tanh();
            assert!((p.get(1).unwrap() - expected).abs() < 1e-14, "beta = {beta}");
        }
    }

    #[test]
    fn free_fermion_limits() {
        assert_eq!(free_fermion_energy(0.5, 1.0, 0.0).unwrap(), 0.0);
        let ground = free_fermion_energy(0.5, 1.0, f64::INFINITY).unwrap();
        assert!((ground + 1.0 / std::f64::consts::PI).abs() < 1e-12);
        // zero field: classical chain, e = −(1/4) tanh(β/4)
        let e = free_fermion_energy(0.0, 1.0, 2.0).unwrap();
        assert!((e + 0.25 * (0.5f64).tanh()).abs() < 1e-12);
    }
}
