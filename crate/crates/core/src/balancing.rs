//! Balancing transformation, Hankel singular values and truncation.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::bounds::ErrorBound;
use crate::error::{Error, Result};
use crate::gramians::{gramians, GramianPair};
use crate::linalg;
use crate::model::{HyperBox, LtiSystem};

/// Relative eigenvalue floor below which a gramian is treated as singular.
pub const RANK_TOL: f64 = 1e-12;

/// Condition number of `H` above which a warning is attached.
pub const COND_MAX: f64 = 1e8;

/// A system in balanced coordinates together with the change of basis.
#[derive(Debug, Clone)]
pub struct BalancedRealization {
    original: LtiSystem,
    h: DMatrix<f64>,
    h_inv: DMatrix<f64>,
    sigma: DVector<f64>,
    balanced: LtiSystem,
    condition: f64,
    warnings: Vec<String>,
}

impl BalancedRealization {
    /// The system the realization was computed from.
    pub fn original(&self) -> &LtiSystem {
        &self.original
    }

    /// Balancing transformation `H`, so that `x̃ = Hx`.
    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn h_inv(&self) -> &DMatrix<f64> {
        &self.h_inv
    }

    /// Hankel singular values, nonincreasing.
    pub fn sigma(&self) -> &DVector<f64> {
        &self.sigma
    }

    /// `(Ã, B̃, C̃) = (HAH⁻¹, HB, CH⁻¹)`.
    pub fn balanced(&self) -> &LtiSystem {
        &self.balanced
    }

    /// Spectral condition number of `H`.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn order(&self) -> usize {
        self.h.nrows()
    }
}

fn require_square_root_factor(w: &DMatrix<f64>, gramian: &'static str) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (vals, vecs) = linalg::sym_eig_desc(w)?;
    let max = vals[0];
    let min = vals[vals.len() - 1];
    if !(max > 0.0) || !(min > RANK_TOL * max) {
        let ratio = if max > 0.0 { min / max } else { 0.0 };
        return Err(Error::NotMinimal { gramian, ratio });
    }
    Ok((vals, vecs))
}

/// Computes the balancing transformation of a stable, minimal system.
///
/// `Wc = GGᵀ` is factored through its eigendecomposition, `GᵀWoG = KΣ²Kᵀ`,
/// and `H = Σ^{1/2}KᵀG⁻¹`.
pub fn balance(sys: &LtiSystem) -> Result<BalancedRealization> {
    let g = gramians(sys)?;
    balance_with(sys, &g)
}

/// As [`balance`], reusing already computed gramians.
pub fn balance_with(sys: &LtiSystem, g: &GramianPair) -> Result<BalancedRealization> {
    let n = sys.order();
    let (lam, v) = require_square_root_factor(&g.wc, "controllability")?;
    let sqrt_lam = lam.map(f64::sqrt);
    let gm = &v * DMatrix::from_diagonal(&sqrt_lam);
    let gm_inv = DMatrix::from_diagonal(&sqrt_lam.map(|s| 1.0 / s)) * v.transpose();

    let m = gm.transpose() * &g.wo * &gm;
    let (mu, k) = linalg::sym_eig_desc(&m)?;
    let sigma = mu.map(|x| x.max(0.0).sqrt());
    let (smax, smin) = (sigma[0], sigma[n - 1]);
    if !(smax > 0.0) || !(smin > RANK_TOL * smax) {
        return Err(Error::NotMinimal {
            gramian: "observability",
            ratio: if smax > 0.0 { (smin / smax).powi(2) } else { 0.0 },
        });
    }
    let s_half = sigma.map(f64::sqrt);
    let h = DMatrix::from_diagonal(&s_half) * k.transpose() * &gm_inv;
    let h_inv = &gm * &k * DMatrix::from_diagonal(&s_half.map(|s| 1.0 / s));

    let balanced = LtiSystem::new(&h * sys.a() * &h_inv, &h * sys.b(), sys.c() * &h_inv)?;
    let condition = linalg::spectral_norm(&h) * linalg::spectral_norm(&h_inv);
    let mut warnings = Vec::new();
    if !(condition <= COND_MAX) {
        let msg = format!("balancing transformation is ill-conditioned (cond(H) = {condition:.3e})");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok(BalancedRealization { original: sys.clone(), h, h_inv, sigma, balanced, condition, warnings })
}

/// `σ_i = sqrt(λ_i(Wc·Wo))`, nonincreasing, tiny negative values clamped to 0.
pub fn hankel_singular_values(sys: &LtiSystem) -> Result<DVector<f64>> {
    let g = gramians(sys)?;
    hsv_from_gramians(&g)
}

pub(crate) fn hsv_from_gramians(g: &GramianPair) -> Result<DVector<f64>> {
    // eigenvalues of Wc·Wo equal those of the symmetric Wc^{1/2} Wo Wc^{1/2}
    let (lam, v) = linalg::sym_eig_desc(&g.wc)?;
    let root = &v * DMatrix::from_diagonal(&lam.map(|x| x.max(0.0).sqrt())) * v.transpose();
    let (mu, _) = linalg::sym_eig_desc(&(&root * &g.wo * &root))?;
    Ok(mu.map(|x| x.max(0.0).sqrt()))
}

/// A reduced-order model in the leading balanced coordinates.
#[derive(Debug, Clone)]
pub struct Abstraction {
    balanced: Arc<BalancedRealization>,
    reduced: LtiSystem,
    k: usize,
    x0: HyperBox,
    x0_reduced: HyperBox,
    error_bound: Option<ErrorBound>,
}

impl Abstraction {
    pub fn reduced(&self) -> &LtiSystem {
        &self.reduced
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn balanced(&self) -> &BalancedRealization {
        &self.balanced
    }

    pub fn balanced_arc(&self) -> &Arc<BalancedRealization> {
        &self.balanced
    }

    /// Full-order initial box the abstraction was built for.
    pub fn x0(&self) -> &HyperBox {
        &self.x0
    }

    /// Box hull of `{SHx0 : x0 ∈ X₀}`.
    pub fn x0_reduced(&self) -> &HyperBox {
        &self.x0_reduced
    }

    /// The `k×n` selection matrix `S = [I 0]`.
    pub fn selection(&self) -> DMatrix<f64> {
        DMatrix::identity(self.k, self.balanced.order())
    }

    /// The `k×n` map `SH` from full-order to reduced initial states.
    pub fn initial_map(&self) -> DMatrix<f64> {
        self.balanced.h().rows(0, self.k).clone_owned()
    }

    pub fn error_bound(&self) -> Option<&ErrorBound> {
        self.error_bound.as_ref()
    }

    pub fn set_error_bound(&mut self, bound: ErrorBound) {
        self.error_bound = Some(bound);
    }
}

/// Checks `p < k ≤ n`; `k = n` is always accepted since it reduces nothing.
pub fn check_order(k: usize, p: usize, n: usize) -> Result<()> {
    if k == 0 || k > n || (k <= p && k != n) {
        return Err(Error::InvalidOrder { k, p, n });
    }
    Ok(())
}

/// Keeps the `k` leading balanced states.
pub fn truncate(bal: &Arc<BalancedRealization>, k: usize, x0: &HyperBox) -> Result<Abstraction> {
    let n = bal.order();
    let sys = bal.balanced();
    check_order(k, sys.outputs(), n)?;
    if x0.dim() != n {
        return Err(Error::DimensionMismatch {
            matrix: "x0".into(),
            expected: format!("{n} coordinates"),
            found: format!("{}", x0.dim()),
        });
    }
    let reduced = LtiSystem::new(
        sys.a().view((0, 0), (k, k)).clone_owned(),
        sys.b().rows(0, k).clone_owned(),
        sys.c().columns(0, k).clone_owned(),
    )?;
    let x0_reduced = x0.linear_image_hull(&bal.h().rows(0, k).clone_owned())?;
    Ok(Abstraction { balanced: Arc::clone(bal), reduced, k, x0: x0.clone(), x0_reduced, error_bound: None })
}

/// Upper bound on `sup ‖(Hx0, SHx0)‖` over the box.
///
/// Each coordinate of `Hx0` ranges over an exact interval `[l_i, u_i]`; the
/// bound is `sqrt(Σ max(|l_i|,|u_i|)²)` with the first `k` terms counted twice.
pub fn sup_augmented_initial_norm(bal: &BalancedRealization, k: usize, x0: &HyperBox) -> Result<f64> {
    let n = bal.order();
    if k == 0 || k > n {
        return Err(Error::InvalidOrder { k, p: bal.balanced().outputs(), n });
    }
    let hull = x0.linear_image_hull(bal.h())?;
    let mag: Vec<f64> = (0..n).map(|i| hull.lb()[i].abs().max(hull.ub()[i].abs())).collect();
    let full: f64 = mag.iter().map(|m| m * m).sum();
    let head: f64 = mag[..k].iter().map(|m| m * m).sum();
    Ok((full + head).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn scalar() -> LtiSystem {
        LtiSystem::new(dmatrix![-1.0], dmatrix![2.0], dmatrix![3.0]).unwrap()
    }

    #[test]
    fn scalar_balancing() {
        let bal = balance(&scalar()).unwrap();
        assert!((bal.sigma()[0] - 3.0).abs() < 1e-14);
        assert!((bal.h()[(0, 0)] - 1.5f64.sqrt()).abs() < 1e-14);
        let g = gramians(bal.balanced()).unwrap();
        assert!((g.wc[(0, 0)] - 3.0).abs() < 1e-13 && (g.wo[(0, 0)] - 3.0).abs() < 1e-13);
    }

    #[test]
    fn already_balanced_is_a_fixed_point() {
        // A = -diag(1,2) with b_i = c_i = sqrt(2 a_i σ_i) has Wc = Wo = diag(σ)
        let sig = [3.0f64, 0.5];
        let a = [1.0, 2.0];
        let bc: Vec<f64> = (0..2).map(|i| (2.0 * a[i] * sig[i]).sqrt()).collect();
        let sys = LtiSystem::new(
            dmatrix![-1.0, 0.0; 0.0, -2.0],
            dmatrix![bc[0], 0.0; 0.0, bc[1]],
            dmatrix![bc[0], 0.0; 0.0, bc[1]],
        )
        .unwrap();
        let hsv = hankel_singular_values(&sys).unwrap();
        assert!((hsv[0] - 3.0).abs() < 1e-12 && (hsv[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_output_has_zero_hsvs() {
        let sys = LtiSystem::new(dmatrix![-1.0, 0.2; 0.0, -3.0], dmatrix![1.0; 1.0], dmatrix![0.0, 0.0]).unwrap();
        assert!(hankel_singular_values(&sys).unwrap().iter().all(|&s| s == 0.0));
        assert!(matches!(balance(&sys), Err(Error::NotMinimal { .. })));
    }

    #[test]
    fn uncontrollable_rejected() {
        let sys = LtiSystem::new(dmatrix![-1.0, 0.0; 0.0, -2.0], dmatrix![1.0; 0.0], dmatrix![1.0, 1.0]).unwrap();
        assert!(matches!(balance(&sys), Err(Error::NotMinimal { gramian: "controllability", .. })));
    }

    #[test]
    fn order_rules() {
        assert!(check_order(2, 1, 3).is_ok());
        assert!(check_order(1, 1, 3).is_err());
        assert!(check_order(1, 1, 1).is_ok());
        assert!(check_order(4, 1, 3).is_err());
        assert!(check_order(0, 0, 3).is_err());
    }

    #[test]
    fn augmented_norm_one_dim() {
        let bal = balance(&scalar()).unwrap();
        let x0 = HyperBox::from_slices(&[-1.0], &[1.0]).unwrap();
        let s = sup_augmented_initial_norm(&bal, 1, &x0).unwrap();
        assert!((s - 3.0f64.sqrt()).abs() < 1e-14);
        let zero = HyperBox::from_slices(&[0.0], &[0.0]).unwrap();
        assert_eq!(sup_augmented_initial_norm(&bal, 1, &zero).unwrap(), 0.0);
    }
}
