//! Output-error bounds between a system and its balanced truncation.
//!
//! All routes work on the augmented system
//! `Ā = blkdiag(Ã, A_r)`, `B̄ = [B̃; B_r]`, `C̄ = [C̃, −C_r]`, whose output is
//! exactly `y − y_r` when started from `x̄₀ = (Hx₀, SHx₀)`. The error splits
//! into a zero-input part `e₁` (initial state only) and a zero-state part
//! `e₂` (input only).

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balancing::Abstraction;
use crate::error::{Error, Result};
use crate::gramians::LyapunovSolver;
use crate::linalg;
use crate::model::HyperBox;

/// Default bloat factor for simulation-derived bounds.
pub const DEFAULT_GAMMA: f64 = 0.01;
/// Default cap on the number of initial-set vertices that are simulated.
pub const DEFAULT_VERTEX_CAP: usize = 4096;
/// Default relative state norm at which an impulse response counts as decayed.
pub const DEFAULT_DECAY_TOL: f64 = 1e-9;

/// `‖Ā‖h` for the zero-input simulation grid.
const E1_STEP_SCALE: f64 = 0.05;
/// `‖Ā‖h` for the impulse-response quadrature grid.
const E2_STEP_SCALE: f64 = 0.02;
const E2_MAX_STEPS: usize = 20_000_000;

/// The error dynamics `x̄' = Āx̄ + B̄u`, `ȳ = C̄x̄ = y − y_r`.
#[derive(Debug, Clone)]
pub struct AugmentedSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    n: usize,
    k: usize,
}

impl AugmentedSystem {
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// Order `n` of the full system.
    pub fn full_order(&self) -> usize {
        self.n
    }

    /// Order `k` of the reduced system.
    pub fn reduced_order(&self) -> usize {
        self.k
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    /// Largest eigenvalue of `Ā + Āᵀ`.
    pub fn monotonicity(&self) -> Result<f64> {
        linalg::max_sym_eigenvalue(&(&self.a + self.a.transpose()))
    }

    fn monotone_tol(&self) -> f64 {
        1e-9 * self.a.norm()
    }
}

pub fn build_augmented(abs: &Abstraction) -> AugmentedSystem {
    let bal = abs.balanced().balanced();
    let red = abs.reduced();
    let (n, k) = (bal.order(), abs.k());
    let m = bal.inputs();
    let p = bal.outputs();
    let mut a = DMatrix::zeros(n + k, n + k);
    a.view_mut((0, 0), (n, n)).copy_from(bal.a());
    a.view_mut((n, n), (k, k)).copy_from(red.a());
    let mut b = DMatrix::zeros(n + k, m);
    b.rows_mut(0, n).copy_from(bal.b());
    b.rows_mut(n, k).copy_from(red.b());
    let mut c = DMatrix::zeros(p, n + k);
    c.columns_mut(0, n).copy_from(bal.c());
    c.columns_mut(n, k).copy_from(&(-red.c()));
    AugmentedSystem { a, b, c, n, k }
}

/// The set `{(Hx₀, SHx₀) : x₀ ∈ X₀}` as a linear image of the original box.
#[derive(Debug, Clone)]
pub struct AugmentedInitialSet {
    map: DMatrix<f64>,
    x0: HyperBox,
}

impl AugmentedInitialSet {
    pub fn new(abs: &Abstraction) -> Self {
        let h = abs.balanced().h();
        let (n, k) = (h.nrows(), abs.k());
        let mut map = DMatrix::zeros(n + k, n);
        map.rows_mut(0, n).copy_from(h);
        map.rows_mut(n, k).copy_from(&h.rows(0, k));
        AugmentedInitialSet { map, x0: abs.x0().clone() }
    }

    /// The `(n+k)×n` matrix `[H; SH]`.
    pub fn map(&self) -> &DMatrix<f64> {
        &self.map
    }

    pub fn x0(&self) -> &HyperBox {
        &self.x0
    }

    /// Coordinatewise-exact box hull of the set.
    pub fn hull(&self) -> HyperBox {
        self.x0
            .linear_image_hull(&self.map)
            .unwrap_or_else(|_| unreachable!("map has as many columns as x0 has coordinates"))
    }

    /// `sqrt(Σ max(|l_i|, |u_i|)²)` over the hull, an upper bound on `sup ‖x̄₀‖`.
    pub fn sup_norm(&self) -> f64 {
        let hull = self.hull();
        hull.lb()
            .iter()
            .zip(hull.ub().iter())
            .map(|(l, u)| {
                let m = l.abs().max(u.abs());
                m * m
            })
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum E1Method {
    NormBound,
    Lyapunov,
    Simulation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum E2Method {
    Hankel,
    Simulation,
}

impl E1Method {
    pub fn is_simulation(self) -> bool {
        self == E1Method::Simulation
    }

    pub fn label(self) -> &'static str {
        match self {
            E1Method::NormBound => "norm_bound",
            E1Method::Lyapunov => "lyapunov",
            E1Method::Simulation => "simulation",
        }
    }
}

impl E2Method {
    pub fn is_simulation(self) -> bool {
        self == E2Method::Simulation
    }

    pub fn label(self) -> &'static str {
        match self {
            E2Method::Hankel => "hankel",
            E2Method::Simulation => "simulation",
        }
    }
}

impl fmt::Display for E1Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl fmt::Display for E2Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Zero-input error bound `|ȳ_i(t)| ≤ ‖C̄_i‖₂ · sup‖x̄₀‖`.
///
/// Requires `Ā + Āᵀ ⪯ 0`, so that `‖x̄(t)‖` never grows.
pub fn e1_theoretical(aug: &AugmentedSystem, sup_norm: f64) -> Result<DVector<f64>> {
    let mono = aug.monotonicity()?;
    if mono > aug.monotone_tol() {
        return Err(Error::NotMonotone { max_eigenvalue: mono });
    }
    if !(sup_norm >= 0.0) || !sup_norm.is_finite() {
        return Err(Error::InvalidArgument(format!("initial norm bound must be finite and >= 0, got {sup_norm}")));
    }
    Ok(DVector::from_iterator(aug.outputs(), (0..aug.outputs()).map(|i| aug.c.row(i).norm() * sup_norm)))
}

/// Result of the Lyapunov-inequality route, with any fallbacks that were taken.
#[derive(Debug, Clone)]
pub struct E1OptimizationResult {
    pub values: DVector<f64>,
    pub warnings: Vec<String>,
}

/// Zero-input error bound from a feasible `P ≻ 0` with `ĀᵀP + PĀ ⪯ 0` and
/// `C̄_iᵀC̄_i ⪯ P`, giving `|ȳ_i(t)| ≤ sup sqrt(x̄₀ᵀPx̄₀)`.
///
/// Candidates are `‖C̄_i‖²I` (when `Ā + Āᵀ ⪯ 0`), rescaled solutions of
/// `ĀᵀP + PĀ = −(C̄_iᵀC̄_i + ε‖C̄_i‖²I)` over a grid of `ε`, and convex
/// combinations of the two. Every candidate is checked numerically before use.
pub fn e1_optimization(
    aug: &AugmentedSystem,
    init: &AugmentedInitialSet,
    vertex_cap: usize,
) -> Result<E1OptimizationResult> {
    let nn = aug.a.nrows();
    let p = aug.outputs();
    let solver = LyapunovSolver::new(&aug.a)?.transposed();
    let mono = aug.monotonicity()?;
    let identity_ok = mono <= aug.monotone_tol();
    let evaluator = QuadraticSup::new(init, vertex_cap);
    let mut values = DVector::zeros(p);
    let mut warnings = Vec::new();

    for i in 0..p {
        let c = aug.c.row(i).transpose();
        let cn2 = c.norm_squared();
        if cn2 == 0.0 {
            continue;
        }
        let cct = &c * c.transpose();
        let mut best = f64::INFINITY;
        let p0 = identity_ok.then(|| DMatrix::<f64>::identity(nn, nn) * cn2);
        if let Some(p0) = &p0 {
            best = best.min(evaluator.sup(p0));
        }
        let mut best_lyap: Option<(f64, DMatrix<f64>)> = None;
        for eps in [1e-8, 1e-6, 1e-4, 1e-2, 1.0, 1e2, 1e4] {
            let q = &cct + DMatrix::<f64>::identity(nn, nn) * (eps * cn2);
            let Ok(sol) = solver.solve(&q) else { continue };
            let Some(cand) = scale_to_dominate(&sol.p, &c) else { continue };
            if !is_feasible(aug, &cand, &cct) {
                continue;
            }
            let v = evaluator.sup(&cand);
            if best_lyap.as_ref().is_none_or(|(bv, _)| v < *bv) {
                best_lyap = Some((v, cand));
            }
        }
        if let Some((v, pl)) = &best_lyap {
            best = best.min(*v);
            if let Some(p0) = &p0 {
                for theta in [0.25, 0.5, 0.75] {
                    let mix = p0 * theta + pl * (1.0 - theta);
                    best = best.min(evaluator.sup(&mix));
                }
            }
        }
        if best.is_finite() {
            values[i] = best.max(0.0).sqrt();
        } else {
            let msg = format!("no feasible P found for output {}; falling back to the norm bound", i + 1);
            log::warn!("{msg}");
            warnings.push(msg);
            values[i] = e1_theoretical(aug, init.sup_norm())?[i];
        }
    }
    Ok(E1OptimizationResult { values, warnings })
}

/// Scales `P` by `max(1, cᵀP⁻¹c)` so that `ccᵀ ⪯ P`; `None` unless `P ≻ 0`.
fn scale_to_dominate(p: &DMatrix<f64>, c: &DVector<f64>) -> Option<DMatrix<f64>> {
    let chol = p.clone().cholesky()?;
    let alpha = c.dot(&chol.solve(c)).max(1.0) * (1.0 + 1e-9);
    Some(p * alpha)
}

fn is_feasible(aug: &AugmentedSystem, p: &DMatrix<f64>, cct: &DMatrix<f64>) -> bool {
    let lyap = aug.a.transpose() * p + p * &aug.a;
    let scale = p.norm() * aug.a.norm();
    let Ok(lmax) = linalg::max_sym_eigenvalue(&lyap) else { return false };
    if lmax > 1e-9 * scale {
        return false;
    }
    let Ok((vals, _)) = linalg::sym_eig_desc(&(p - cct)) else { return false };
    vals[vals.len() - 1] >= -1e-12 * p.norm()
}

/// Upper bound on `sup x̄₀ᵀPx̄₀` over the augmented initial set.
struct QuadraticSup<'a> {
    init: &'a AugmentedInitialSet,
    free: Vec<usize>,
    enumerate: bool,
    sup_norm2: f64,
}

impl<'a> QuadraticSup<'a> {
    fn new(init: &'a AugmentedInitialSet, vertex_cap: usize) -> Self {
        let free = init.x0().free_coordinates();
        let enumerate = free.len() < 63 && (1u64 << free.len()) <= vertex_cap as u64;
        let s = init.sup_norm();
        QuadraticSup { init, free, enumerate, sup_norm2: s * s }
    }

    fn sup(&self, p: &DMatrix<f64>) -> f64 {
        let map = self.init.map();
        let w = map.transpose() * p * map;
        let spectral = linalg::max_sym_eigenvalue(p).unwrap_or(f64::INFINITY).max(0.0) * self.sup_norm2;
        let x0 = self.init.x0();
        let exact_or_relaxed = if self.enumerate {
            // convex quadratic: the maximum is attained at a vertex
            (0..1u64 << self.free.len())
                .into_par_iter()
                .map(|idx| {
                    let v = x0.vertex(&self.free, idx);
                    v.dot(&(&w * &v))
                })
                .reduce(|| f64::NEG_INFINITY, f64::max)
        } else {
            // x₀ = c + Dξ with ξ ∈ [−1, 1]^f
            let c = x0.center();
            let r = x0.half_widths();
            let wc = &w * &c;
            let f = self.free.len();
            let g: f64 = self.free.iter().map(|&j| (r[j] * wc[j]).abs()).sum();
            let wf = DMatrix::from_fn(f, f, |a, b| r[self.free[a]] * w[(self.free[a], self.free[b])] * r[self.free[b]]);
            let abs_sum: f64 = wf.iter().map(|v| v.abs()).sum();
            let eig = linalg::max_sym_eigenvalue(&wf).unwrap_or(f64::INFINITY).max(0.0) * f as f64;
            c.dot(&wc) + 2.0 * g + abs_sum.min(eig)
        };
        exact_or_relaxed.min(spectral)
    }
}

/// Step size with `‖Ā‖h ≤ scale`, dividing `horizon` evenly when given.
fn step_for(norm: f64, scale: f64, horizon: Option<f64>) -> f64 {
    let h = if norm > 0.0 { scale / norm } else { f64::INFINITY };
    match horizon {
        Some(t) => {
            let steps = (t / h).ceil().max(1.0);
            t / steps
        }
        None => h,
    }
}

/// `h²/8 · ‖C̄_iĀ²‖ · e^{‖Ā‖h}` per output.
fn curvature_weights(aug: &AugmentedSystem, norm_a: f64, h: f64) -> Vec<f64> {
    if !h.is_finite() {
        return vec![0.0; aug.outputs()];
    }
    let ca2 = &aug.c * &aug.a * &aug.a;
    let growth = (norm_a * h).exp();
    (0..aug.outputs()).map(|i| h * h / 8.0 * ca2.row(i).norm() * growth).collect()
}

/// Zero-input error bound by simulating from every vertex of `X₀`.
///
/// Between grid points `ȳ_i` differs from the chord through its two sampled
/// values by at most `h²/8 · max|ȳ_i''|`, and
/// `|ȳ_i''| ≤ ‖C̄_iĀ²‖ e^{‖Ā‖h} ‖x̄(t_j)‖` on the step, so the larger endpoint
/// magnitude plus that envelope bounds the whole step.
pub fn e1_simulation(
    aug: &AugmentedSystem,
    init: &AugmentedInitialSet,
    t_f: f64,
    vertex_cap: usize,
) -> Result<DVector<f64>> {
    let free = init.x0().free_coordinates();
    if free.len() >= 63 || (1u64 << free.len()) > vertex_cap as u64 {
        return Err(Error::VertexCap { vertices: format!("2^{}", free.len()), cap: vertex_cap });
    }
    if !(t_f >= 0.0) || !t_f.is_finite() {
        return Err(Error::InvalidArgument(format!("t_f must be finite and >= 0, got {t_f}")));
    }
    let p = aug.outputs();
    if aug.k == aug.n {
        // the abstraction is the balanced system itself, so ȳ ≡ 0
        return Ok(DVector::zeros(p));
    }
    let norm_a = linalg::spectral_norm(&aug.a);
    let h = step_for(norm_a, E1_STEP_SCALE, Some(t_f.max(f64::MIN_POSITIVE)));
    let steps = if t_f == 0.0 { 0 } else { (t_f / h).round() as usize };
    let phi = linalg::expm(&aug.a, h)?;
    let curv = curvature_weights(aug, norm_a, h);
    let x0 = init.x0();

    let per_vertex = (0..1u64 << free.len())
        .into_par_iter()
        .map(|idx| {
            let mut x = init.map() * x0.vertex(&free, idx);
            let mut next = DVector::zeros(x.len());
            let mut y = &aug.c * &x;
            let mut best: Vec<f64> = y.iter().map(|v| v.abs()).collect();
            for _ in 0..steps {
                next.gemv(1.0, &phi, &x, 0.0);
                let y_next = &aug.c * &next;
                let xn = x.norm();
                for i in 0..p {
                    let v = y[i].abs().max(y_next[i].abs()) + curv[i] * xn;
                    best[i] = best[i].max(v);
                }
                std::mem::swap(&mut x, &mut next);
                y = y_next;
            }
            best
        })
        .reduce(|| vec![0.0; p], |a, b| a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect());
    if per_vertex.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("zero-input simulation".into()));
    }
    Ok(DVector::from_vec(per_vertex))
}

/// `2 Σ_{j>k} (2j−1) σ_j · ‖u‖_∞`, the same for every output.
pub fn e2_theoretical(sigma: &DVector<f64>, k: usize, p: usize, u_box: &HyperBox) -> DVector<f64> {
    let tail: f64 = sigma.iter().enumerate().skip(k).map(|(j, s)| (2 * (j + 1) - 1) as f64 * s).sum();
    DVector::from_element(p, 2.0 * tail * u_box.inf_norm())
}

/// Zero-state bound from simulated impulse responses.
#[derive(Debug, Clone)]
pub struct E2SimulationResult {
    pub values: DVector<f64>,
    /// Set when some impulse response had not decayed within the step cap;
    /// the bound then relies on the analytic tail estimate alone.
    pub truncated: bool,
    pub simulations: usize,
}

/// `∫₀ʰ max(a + b s, 0) ds`.
fn positive_part_integral(a: f64, b: f64, h: f64) -> f64 {
    let v1 = a + b * h;
    if a >= 0.0 && v1 >= 0.0 {
        0.5 * h * (a + v1)
    } else if a <= 0.0 && v1 <= 0.0 {
        0.0
    } else {
        let top = a.max(v1);
        top * top / (2.0 * b.abs())
    }
}

/// Decay bound `‖e^{Ās}x‖ ≤ κ e^{−s/τ}‖x‖`, returned as `(κ, τ)`.
fn decay_envelope(aug: &AugmentedSystem) -> Result<(f64, f64)> {
    let mu = 0.5 * aug.monotonicity()?;
    if mu < -1e-12 * aug.a.norm() {
        return Ok((1.0, -1.0 / mu));
    }
    // V = xᵀPx with ĀᵀP + PĀ = −I decays like e^{−s/λmax(P)}
    let nn = aug.a.nrows();
    let p = LyapunovSolver::new(&aug.a)?.transposed().solve(&DMatrix::identity(nn, nn))?.p;
    let (vals, _) = linalg::sym_eig_desc(&p)?;
    let (lmax, lmin) = (vals[0], vals[nn - 1]);
    if !(lmin > 0.0) {
        return Err(Error::NotPositiveDefinite { matrix: "Lyapunov certificate".into(), min_eigenvalue: lmin });
    }
    Ok(((lmax / lmin).sqrt(), 2.0 * lmax))
}

/// Zero-state error bound from the impulse responses of the augmented system.
///
/// For inputs in the box, `ȳ_i(t) = Σ_j ∫₀ᵗ h_ij(s) u_j(t−s) ds` is maximised
/// by choosing `u_j` pointwise, giving `Σ_j ∫₀ᵗ max(h_ij·ub_j, h_ij·lb_j) ds`.
/// The impulse responses of all channels are simulated together, the
/// integrand is integrated exactly on the chord between grid samples plus an
/// interpolation envelope, and the running maximum over `t` is kept for both
/// signs. For a box symmetric about zero this is `Σ_j ∫|h_ij| · ‖u_j‖_∞`.
pub fn e2_simulation(aug: &AugmentedSystem, u_box: &HyperBox, decay_tol: f64) -> Result<E2SimulationResult> {
    let (p, m) = (aug.outputs(), aug.b.ncols());
    if u_box.dim() != m {
        return Err(Error::DimensionMismatch {
            matrix: "input box".into(),
            expected: format!("{m} coordinates"),
            found: format!("{}", u_box.dim()),
        });
    }
    if !(decay_tol > 0.0 && decay_tol < 1.0) {
        return Err(Error::InvalidArgument(format!("decay_tol must lie in (0, 1), got {decay_tol}")));
    }
    if aug.k == aug.n {
        return Ok(E2SimulationResult { values: DVector::zeros(p), truncated: false, simulations: 0 });
    }
    let norm_a = linalg::spectral_norm(&aug.a);
    let h = step_for(norm_a, E2_STEP_SCALE, None);
    let curv = curvature_weights(aug, norm_a, h);
    let cnorm: Vec<f64> = (0..p).map(|i| aug.c.row(i).norm()).collect();
    let (kappa, tau) = decay_envelope(aug)?;
    let lo: Vec<f64> = u_box.lb().iter().copied().collect();
    let hi: Vec<f64> = u_box.ub().iter().copied().collect();
    let mag: Vec<f64> = (0..m).map(|j| lo[j].abs().max(hi[j].abs())).collect();

    let mut x = aug.b.clone();
    let start: Vec<f64> = (0..m).map(|j| x.column(j).norm()).collect();
    // running integrals of the worst-case output in both directions
    let mut cum_up = vec![0.0f64; p];
    let mut cum_down = vec![0.0f64; p];
    let mut best_up = vec![0.0f64; p];
    let mut best_down = vec![0.0f64; p];
    let mut truncated = false;
    let decayed = |x: &DMatrix<f64>| (0..m).all(|j| x.column(j).norm() <= decay_tol * start[j]);

    if h.is_finite() && !decayed(&x) {
        let phi = linalg::expm(&aug.a, h)?;
        let mut y = &aug.c * &x;
        let mut steps = 0;
        loop {
            if decayed(&x) {
                break;
            }
            if steps == E2_MAX_STEPS {
                truncated = true;
                break;
            }
            let next = &phi * &x;
            let y_next = &aug.c * &next;
            for i in 0..p {
                let (mut d_up, mut d_down, mut peak_up, mut peak_down) = (0.0, 0.0, 0.0, 0.0);
                for j in 0..m {
                    let (y0, y1) = (y[(i, j)], y_next[(i, j)]);
                    let slope = (y1 - y0) / h;
                    let ip = positive_part_integral(y0, slope, h);
                    let ineg = positive_part_integral(-y0, -slope, h);
                    let env = mag[j] * curv[i] * x.column(j).norm() * h;
                    d_up += hi[j] * ip - lo[j] * ineg + env;
                    d_down += hi[j] * ineg - lo[j] * ip + env;
                    peak_up += hi[j].max(0.0) * ip + (-lo[j]).max(0.0) * ineg + env;
                    peak_down += hi[j].max(0.0) * ineg + (-lo[j]).max(0.0) * ip + env;
                }
                best_up[i] = best_up[i].max(cum_up[i] + peak_up);
                best_down[i] = best_down[i].max(cum_down[i] + peak_down);
                cum_up[i] += d_up;
                cum_down[i] += d_down;
            }
            x = next;
            y = y_next;
            steps += 1;
        }
    }
    let mut values = DVector::zeros(p);
    for i in 0..p {
        // ∫_T^∞ |h_ij| ≤ ‖C̄_i‖ κ τ ‖x̄_j(T)‖
        let tail: f64 = (0..m).map(|j| mag[j] * cnorm[i] * kappa * tau * x.column(j).norm()).sum();
        let up = best_up[i].max(cum_up[i]);
        let down = best_down[i].max(cum_down[i]);
        values[i] = up.max(down).max(0.0) + tail;
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("impulse-response quadrature".into()));
    }
    if truncated {
        log::warn!("impulse response did not decay within {E2_MAX_STEPS} steps; tail estimate used");
    }
    Ok(E2SimulationResult { values, truncated, simulations: m })
}

/// Total per-output error bound `δ_i = (1 + γ_i)(e1_i + e2_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBound {
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
    pub delta: Vec<f64>,
    /// `‖δ‖₂`, the precision of the induced approximate bisimulation.
    pub rho: f64,
    pub e1_method: Vec<E1Method>,
    pub e2_method: Vec<E2Method>,
    /// Bloat factor requested for simulation-derived components.
    pub gamma: f64,
    /// Bloat actually applied to each component, `0` for purely analytic ones.
    pub gamma_applied: Vec<f64>,
}

impl ErrorBound {
    pub fn delta_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.delta)
    }

    pub fn outputs(&self) -> usize {
        self.delta.len()
    }

    /// Componentwise minimum over several sound bounds.
    pub fn componentwise_min(bounds: &[ErrorBound]) -> Result<ErrorBound> {
        let first = bounds.first().ok_or_else(|| Error::InvalidArgument("no error bounds to combine".into()))?;
        let p = first.outputs();
        if bounds.iter().any(|b| b.outputs() != p) {
            return Err(Error::InvalidArgument("error bounds disagree on the number of outputs".into()));
        }
        let mut out = first.clone();
        for b in &bounds[1..] {
            for i in 0..p {
                if b.delta[i] < out.delta[i] {
                    out.e1[i] = b.e1[i];
                    out.e2[i] = b.e2[i];
                    out.delta[i] = b.delta[i];
                    out.e1_method[i] = b.e1_method[i];
                    out.e2_method[i] = b.e2_method[i];
                    out.gamma_applied[i] = b.gamma_applied[i];
                }
            }
        }
        out.rho = DVector::from_column_slice(&out.delta).norm();
        Ok(out)
    }
}

/// Combines one `e₁` and one `e₂` route into a total bound.
pub fn combine(
    e1: &DVector<f64>,
    e1_method: E1Method,
    e2: &DVector<f64>,
    e2_method: E2Method,
    gamma: f64,
) -> Result<ErrorBound> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidArgument(format!("gamma must be finite and >= 0, got {gamma}")));
    }
    if e1.len() != e2.len() {
        return Err(Error::DimensionMismatch {
            matrix: "e2".into(),
            expected: format!("{} outputs", e1.len()),
            found: format!("{}", e2.len()),
        });
    }
    if e1.iter().chain(e2.iter()).any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidArgument("error bound components must be finite and >= 0".into()));
    }
    let applied = if e1_method.is_simulation() || e2_method.is_simulation() { gamma } else { 0.0 };
    let p = e1.len();
    let delta: Vec<f64> = (0..p).map(|i| (1.0 + applied) * (e1[i] + e2[i])).collect();
    Ok(ErrorBound {
        e1: e1.iter().copied().collect(),
        e2: e2.iter().copied().collect(),
        rho: DVector::from_column_slice(&delta).norm(),
        delta,
        e1_method: vec![e1_method; p],
        e2_method: vec![e2_method; p],
        gamma,
        gamma_applied: vec![applied; p],
    })
}

/// Which routes to evaluate and their parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundMethods {
    pub e1: Vec<E1Method>,
    pub e2: Vec<E2Method>,
    pub gamma: f64,
    pub vertex_cap: usize,
    pub decay_tol: f64,
}

impl Default for BoundMethods {
    fn default() -> Self {
        BoundMethods {
            e1: vec![E1Method::NormBound, E1Method::Lyapunov, E1Method::Simulation],
            e2: vec![E2Method::Hankel, E2Method::Simulation],
            gamma: DEFAULT_GAMMA,
            vertex_cap: DEFAULT_VERTEX_CAP,
            decay_tol: DEFAULT_DECAY_TOL,
        }
    }
}

impl BoundMethods {
    /// Analytic routes only.
    pub fn theoretical() -> Self {
        BoundMethods { e1: vec![E1Method::NormBound], e2: vec![E2Method::Hankel], ..Default::default() }
    }

    pub fn only(e1: E1Method, e2: E2Method) -> Self {
        BoundMethods { e1: vec![e1], e2: vec![e2], ..Default::default() }
    }
}

/// Every route evaluated for one abstraction, and the tightest combination.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub e1: Vec<(E1Method, Vec<f64>)>,
    pub e2: Vec<(E2Method, Vec<f64>)>,
    /// Tightest componentwise combination of all evaluated pairs.
    pub bound: ErrorBound,
    pub warnings: Vec<String>,
}

impl BoundReport {
    pub fn e1_for(&self, m: E1Method) -> Option<&[f64]> {
        self.e1.iter().find(|(k, _)| *k == m).map(|(_, v)| v.as_slice())
    }

    pub fn e2_for(&self, m: E2Method) -> Option<&[f64]> {
        self.e2.iter().find(|(k, _)| *k == m).map(|(_, v)| v.as_slice())
    }

    /// The combined bound of one specific pair, if both routes succeeded.
    pub fn pair(&self, e1: E1Method, e2: E2Method) -> Option<ErrorBound> {
        let a = DVector::from_column_slice(self.e1_for(e1)?);
        let b = DVector::from_column_slice(self.e2_for(e2)?);
        combine(&a, e1, &b, e2, self.bound.gamma).ok()
    }
}

/// Evaluates the requested routes; a route that fails is skipped with a
/// warning as long as at least one route per component succeeds.
pub fn compute_bounds(abs: &Abstraction, u_box: &HyperBox, t_f: f64, methods: &BoundMethods) -> Result<BoundReport> {
    if methods.e1.is_empty() || methods.e2.is_empty() {
        return Err(Error::InvalidArgument("at least one e1 and one e2 method must be enabled".into()));
    }
    let aug = build_augmented(abs);
    let init = AugmentedInitialSet::new(abs);
    let mut warnings = Vec::new();
    let mut first_err = None;

    let e1_results: Vec<(E1Method, Result<DVector<f64>>)> = methods
        .e1
        .par_iter()
        .map(|&m| {
            let r = match m {
                E1Method::NormBound => e1_theoretical(&aug, init.sup_norm()),
                E1Method::Lyapunov => e1_optimization(&aug, &init, methods.vertex_cap).map(|r| {
                    for w in &r.warnings {
                        log::warn!("{w}");
                    }
                    r.values
                }),
                E1Method::Simulation => e1_simulation(&aug, &init, t_f, methods.vertex_cap),
            };
            (m, r)
        })
        .collect();
    let e2_results: Vec<(E2Method, Result<DVector<f64>>)> = methods
        .e2
        .par_iter()
        .map(|&m| {
            let r = match m {
                E2Method::Hankel => Ok(e2_theoretical(abs.balanced().sigma(), abs.k(), aug.outputs(), u_box)),
                E2Method::Simulation => e2_simulation(&aug, u_box, methods.decay_tol).map(|r| r.values),
            };
            (m, r)
        })
        .collect();

    let mut e1 = Vec::new();
    for (m, r) in e1_results {
        match r {
            Ok(v) => e1.push((m, v)),
            Err(e) => {
                warnings.push(format!("e1 {m} skipped: {e}"));
                first_err.get_or_insert(e);
            }
        }
    }
    let mut e2 = Vec::new();
    for (m, r) in e2_results {
        match r {
            Ok(v) => e2.push((m, v)),
            Err(e) => {
                warnings.push(format!("e2 {m} skipped: {e}"));
                first_err.get_or_insert(e);
            }
        }
    }
    if e1.is_empty() || e2.is_empty() {
        return Err(first_err.unwrap_or_else(|| Error::InvalidArgument("no bound method succeeded".into())));
    }
    let mut pairs = Vec::new();
    for (m1, v1) in &e1 {
        for (m2, v2) in &e2 {
            pairs.push(combine(v1, *m1, v2, *m2, methods.gamma)?);
        }
    }
    let bound = ErrorBound::componentwise_min(&pairs)?;
    Ok(BoundReport {
        e1: e1.into_iter().map(|(m, v)| (m, v.iter().copied().collect())).collect(),
        e2: e2.into_iter().map(|(m, v)| (m, v.iter().copied().collect())).collect(),
        bound,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balancing::{balance, truncate};
    use crate::model::LtiSystem;
    use nalgebra::{dmatrix, dvector};
    use std::sync::Arc;

    fn scalar_abs(lb: f64, ub: f64) -> Abstraction {
        let sys = LtiSystem::new(dmatrix![-1.0], dmatrix![2.0], dmatrix![3.0]).unwrap();
        let bal = Arc::new(balance(&sys).unwrap());
        truncate(&bal, 1, &HyperBox::from_slices(&[lb], &[ub]).unwrap()).unwrap()
    }

    #[test]
    fn scalar_norm_bound_chain() {
        let abs = scalar_abs(-1.0, 1.0);
        let aug = build_augmented(&abs);
        assert!((aug.c()[(0, 0)] - 6.0f64.sqrt()).abs() < 1e-14);
        assert!((aug.c()[(0, 1)] + 6.0f64.sqrt()).abs() < 1e-14);
        let init = AugmentedInitialSet::new(&abs);
        assert!((init.sup_norm() - 3.0f64.sqrt()).abs() < 1e-14);
        let e1 = e1_theoretical(&aug, init.sup_norm()).unwrap();
        assert!((e1[0] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn zero_initial_set_gives_zero_e1() {
        let abs = scalar_abs(0.0, 0.0);
        let aug = build_augmented(&abs);
        let init = AugmentedInitialSet::new(&abs);
        assert_eq!(e1_theoretical(&aug, init.sup_norm()).unwrap()[0], 0.0);
        assert_eq!(e1_optimization(&aug, &init, 4096).unwrap().values[0], 0.0);
        assert_eq!(e1_simulation(&aug, &init, 1.0, 4096).unwrap()[0], 0.0);
    }

    #[test]
    fn exact_reduction_has_zero_simulated_error() {
        let abs = scalar_abs(-1.0, 1.0);
        let aug = build_augmented(&abs);
        let init = AugmentedInitialSet::new(&abs);
        assert_eq!(e1_simulation(&aug, &init, 2.0, 4096).unwrap()[0], 0.0);
        let u = HyperBox::from_slices(&[-1.0], &[1.0]).unwrap();
        assert_eq!(e2_simulation(&aug, &u, 1e-9).unwrap().values[0], 0.0);
    }

    #[test]
    fn hankel_direct_substitution() {
        let u = HyperBox::from_slices(&[-1.0], &[0.5]).unwrap();
        let e2 = e2_theoretical(&dvector![2.0, 0.5], 1, 2, &u);
        assert_eq!(e2, dvector![3.0, 3.0]);
        assert_eq!(e2_theoretical(&dvector![2.0, 0.5], 2, 1, &u)[0], 0.0);
    }

    #[test]
    fn combine_examples() {
        let a = combine(&dvector![0.2], E1Method::NormBound, &dvector![0.3], E2Method::Hankel, 0.01).unwrap();
        assert_eq!(a.delta, vec![0.5]);
        assert_eq!(a.gamma_applied, vec![0.0]);
        let b = combine(&dvector![0.2], E1Method::Simulation, &dvector![0.3], E2Method::Hankel, 0.01).unwrap();
        assert!((b.delta[0] - 0.505).abs() < 1e-15);
        assert!(combine(&dvector![0.2], E1Method::NormBound, &dvector![0.3], E2Method::Hankel, -1.0).is_err());
    }

    #[test]
    fn positive_part_integral_cases() {
        assert_eq!(positive_part_integral(1.0, 0.0, 2.0), 2.0);
        assert_eq!(positive_part_integral(-1.0, 0.0, 2.0), 0.0);
        // line from -1 to 1 over [0, 2]: positive triangle of area 0.5
        assert!((positive_part_integral(-1.0, 1.0, 2.0) - 0.5).abs() < 1e-15);
        assert!((positive_part_integral(1.0, -1.0, 2.0) - 0.5).abs() < 1e-15);
    }
}
