//! Output reachability of low-order systems, simulation, spec checks and
//! witness search.

mod check;
mod simulate;
mod witness;
mod zonotope;

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

pub use check::{check_spec, check_specs, CheckOutcome};
pub use simulate::{simulate, InputSignal, Trajectory};
pub use witness::{find_unsafe_witness, guard_band, Witness, WitnessOptions, DEFAULT_WITNESS_BUDGET};
pub use zonotope::{Zonotope, ZonotopeDoc};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{HyperBox, LtiSystem};

pub const DEFAULT_ORDER_CAP: usize = 20;

/// `min(t_f/200, 0.1/‖A‖₂)`, falling back to `t_f/200` for `A = 0`.
pub fn default_step(a: &DMatrix<f64>, t_f: f64) -> f64 {
    let by_horizon = if t_f > 0.0 { t_f / 200.0 } else { 1.0 };
    let na = linalg::spectral_norm(a);
    if na > 0.0 {
        by_horizon.min(0.1 / na)
    } else {
        by_horizon
    }
}

/// Output set valid over `[t0, t1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachStep {
    pub t0: f64,
    pub t1: f64,
    pub set: Zonotope,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReachStats {
    pub steps: usize,
    pub step_h: f64,
    pub max_generators: usize,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReachResult {
    pub steps: Vec<ReachStep>,
    pub stats: ReachStats,
}

impl ReachResult {
    pub fn sets(&self) -> impl Iterator<Item = &Zonotope> {
        self.steps.iter().map(|s| &s.set)
    }

    /// The step covering time `t`.
    pub fn step_at(&self, t: f64) -> Option<&ReachStep> {
        let i = self.steps.partition_point(|s| s.t1 < t);
        self.steps.get(i).filter(|s| s.t0 <= t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReachOptions {
    /// Step length; [`default_step`] when `None`.
    pub step_h: Option<f64>,
    /// Generators allowed per dimension before reduction.
    pub order_cap: usize,
}

impl Default for ReachOptions {
    fn default() -> Self {
        ReachOptions { step_h: None, order_cap: DEFAULT_ORDER_CAP }
    }
}

/// Output reach sets over `[0, t_f]` with step `step_h`.
pub fn reach_lti(sys: &LtiSystem, x0: &HyperBox, u_box: &HyperBox, t_f: f64, step_h: f64) -> Result<ReachResult> {
    reach_lti_with(sys, x0, u_box, t_f, &ReachOptions { step_h: Some(step_h), ..Default::default() })
}

pub fn reach_lti_with(
    sys: &LtiSystem,
    x0: &HyperBox,
    u_box: &HyperBox,
    t_f: f64,
    opts: &ReachOptions,
) -> Result<ReachResult> {
    let start = Instant::now();
    let (n, m) = (sys.order(), sys.inputs());
    if x0.dim() != n || u_box.dim() != m {
        return Err(Error::DimensionMismatch {
            matrix: "reach sets".into(),
            expected: format!("x0 of {n}, u of {m}"),
            found: format!("x0 of {}, u of {}", x0.dim(), u_box.dim()),
        });
    }
    if !(t_f >= 0.0) || !t_f.is_finite() {
        return Err(Error::InvalidArgument(format!("horizon must be finite and >= 0, got {t_f}")));
    }
    let h_req = opts.step_h.unwrap_or_else(|| default_step(sys.a(), t_f));
    if !(h_req > 0.0) || !h_req.is_finite() {
        return Err(Error::InvalidArgument(format!("step h must be positive, got {h_req}")));
    }
    let (a, b, c) = (sys.a(), sys.b(), sys.c());
    let cap_x = opts.order_cap.max(1) * n.max(1);
    let cap_y = opts.order_cap.max(1) * sys.outputs().max(1);
    let c_norms = DVector::from_iterator(c.nrows(), c.row_iter().map(|r| r.norm()));
    let mut x = Zonotope::from_box(x0.center(), &x0.half_widths());

    if t_f == 0.0 {
        let set = x.linear_map(c);
        return Ok(ReachResult {
            stats: ReachStats {
                steps: 1,
                step_h: 0.0,
                max_generators: set.num_generators(),
                wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
            },
            steps: vec![ReachStep { t0: 0.0, t1: 0.0, set }],
        });
    }

    let n_steps = (t_f / h_req).ceil().max(1.0) as usize;
    let h = t_f / n_steps as f64;
    let (phi, gamma) = linalg::propagators(a, h)?;
    let na = linalg::norm2_upper(a);
    let rem = linalg::exp_rem2(na * h);
    // ∫₀ʰ (e^{‖A‖τ} − 1) dτ, the deviation of e^{Aτ} from I integrated over a step
    let input_coef = if na > 0.0 { rem / na } else { 0.0 };

    let uc = u_box.center();
    let ur = u_box.half_widths();
    let buc = b * &uc;
    let b_r: f64 = (0..m).map(|j| ur[j] * b.column(j).norm()).sum();
    let mut bu_tilde = b.clone();
    for j in 0..m {
        bu_tilde.column_mut(j).scale_mut(ur[j] * h);
    }
    let h_bu = Zonotope::new(DVector::zeros(n), bu_tilde)?;
    let forced = &gamma * &buc;
    let tp_bloat = Zonotope::from_box(DVector::zeros(n), &DVector::from_element(n, input_coef * b_r));
    let drift = &buc * h;
    let input_err = input_coef * (buc.norm() + b_r);

    let mut steps = Vec::with_capacity(n_steps);
    let mut max_gens = 0;
    for j in 0..n_steps {
        let t0 = j as f64 * h;
        let t1 = if j + 1 == n_steps { t_f } else { (j + 1) as f64 * h };
        let xc = x.center();
        let g = x.generators();
        let phi_g = &phi * g;
        let c2 = &phi * xc + &drift;
        // x(t0+s) ∈ {x + (s/h)((Φ − I)x + hBu_c)} ⊕ sBŨ ⊕ ball(err)
        let k = g.ncols();
        let mut gens = DMatrix::zeros(n, 2 * k + 1);
        gens.view_mut((0, 0), (n, k)).copy_from(&((g + &phi_g) * 0.5));
        gens.view_mut((0, k), (n, k)).copy_from(&((&phi_g - g) * 0.5));
        gens.column_mut(2 * k).copy_from(&((&c2 - xc) * 0.5));
        let hull = Zonotope::new((xc + &c2) * 0.5, gens)?.minkowski_sum(&h_bu);
        let err = rem * x.norm_upper() + input_err;
        let y = hull
            .linear_map(c)
            .minkowski_sum(&Zonotope::from_box(DVector::zeros(c.nrows()), &(&c_norms * err)))
            .reduce(cap_y);
        if y.center().iter().chain(y.generators().iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("reach set at t = {t0}")));
        }
        max_gens = max_gens.max(y.num_generators());
        steps.push(ReachStep { t0, t1, set: y });

        x = x.linear_map(&phi).translate(&forced).minkowski_sum(&h_bu).minkowski_sum(&tp_bloat).reduce(cap_x);
    }
    Ok(ReachResult {
        steps,
        stats: ReachStats {
            steps: n_steps,
            step_h: h,
            max_generators: max_gens,
            wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        },
    })
}
