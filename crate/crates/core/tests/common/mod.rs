//! Test oracles that share no numerics with the library: a fixed-step RK4
//! integrator and brute-force input constructions.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use outabs::model::HyperBox;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Piecewise-constant input given by switch times (first is 0) and values.
#[derive(Debug, Clone)]
pub struct Pwc {
    pub breaks: Vec<f64>,
    pub values: Vec<DVector<f64>>,
}

impl Pwc {
    pub fn constant(u: DVector<f64>) -> Self {
        Pwc { breaks: vec![0.0], values: vec![u] }
    }
}

/// RK4 samples `(t, y)` of `ẋ = Ax + Bu, y = Cx` with at most `h` per step,
/// restarting at every input switch.
pub fn rk4(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    x0: &DVector<f64>,
    u: &Pwc,
    t_f: f64,
    h: f64,
) -> Vec<(f64, DVector<f64>)> {
    let mut out = vec![(0.0, c * x0)];
    let mut x = x0.clone();
    let mut ends: Vec<f64> = u.breaks.iter().skip(1).copied().filter(|t| *t < t_f).collect();
    ends.push(t_f);
    let mut t0 = 0.0;
    for (seg, t1) in ends.into_iter().enumerate() {
        let bu = b * &u.values[seg.min(u.values.len() - 1)];
        let span = t1 - t0;
        if span <= 0.0 {
            continue;
        }
        let steps = (span / h).ceil().max(1.0) as usize;
        let dt = span / steps as f64;
        let f = |x: &DVector<f64>| a * x + &bu;
        for s in 0..steps {
            let k1 = f(&x);
            let k2 = f(&(&x + &k1 * (dt / 2.0)));
            let k3 = f(&(&x + &k2 * (dt / 2.0)));
            let k4 = f(&(&x + &k3 * dt));
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
            let t = if s + 1 == steps { t1 } else { t0 + (s + 1) as f64 * dt };
            out.push((t, c * &x));
        }
        t0 = t1;
    }
    out
}

/// A step small enough that RK4's local error is negligible next to the bounds.
pub fn fine_step(a: &DMatrix<f64>, t_f: f64) -> f64 {
    let na = a.norm();
    (0.02 / na.max(1e-12)).min(t_f / 500.0).max(1e-6)
}

pub fn random_vertex(b: &HyperBox, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_iterator(b.dim(), (0..b.dim()).map(|i| if rng.random::<bool>() { b.ub()[i] } else { b.lb()[i] }))
}

pub fn random_point(b: &HyperBox, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_iterator(b.dim(), (0..b.dim()).map(|i| b.lb()[i] + rng.random::<f64>() * (b.ub()[i] - b.lb()[i])))
}

/// Random bang-bang input with up to `max_segments` pieces.
pub fn random_bang_bang(u: &HyperBox, t_f: f64, max_segments: usize, rng: &mut ChaCha8Rng) -> Pwc {
    let k = rng.random_range(1..=max_segments);
    let mut breaks: Vec<f64> = (1..k).map(|_| rng.random::<f64>() * t_f).collect();
    breaks.push(0.0);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let values = breaks.iter().map(|_| random_vertex(u, rng)).collect();
    Pwc { breaks, values }
}

/// Input that maximizes (or, with `sign = -1`, minimizes) output `i` of the
/// error system at time `t_star`, up to a piecewise-constant approximation on
/// `segments` pieces: each channel sits at the bound matching the sign of its
/// impulse response `c_i e^{A(t*−s)} b_j`.
pub fn adversarial_input(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c_row: &DVector<f64>,
    u: &HyperBox,
    t_star: f64,
    segments: usize,
    sign: f64,
) -> Pwc {
    let dt = t_star / segments as f64;
    let step = (a * dt).exp();
    // w(τ) = c_i e^{Aτ}, evaluated at midpoints τ = t* − s
    let mut w = c_row.transpose() * (a * (dt / 2.0)).exp();
    let mut values_rev = Vec::with_capacity(segments);
    for _ in 0..segments {
        let g = &w * b;
        let v = DVector::from_iterator(
            u.dim(),
            (0..u.dim()).map(|j| if sign * g[j] >= 0.0 { u.ub()[j] } else { u.lb()[j] }),
        );
        values_rev.push(v);
        w = &w * &step;
    }
    values_rev.reverse();
    Pwc { breaks: (0..segments).map(|s| s as f64 * dt).collect(), values: values_rev }
}

/// Initial state maximizing `sign · c_i e^{A t} M x0` over vertices of the box.
pub fn adversarial_vertex(
    a: &DMatrix<f64>,
    c_row: &DVector<f64>,
    map: &DMatrix<f64>,
    x0: &HyperBox,
    t: f64,
    sign: f64,
) -> DVector<f64> {
    let g = c_row.transpose() * (a * t).exp() * map;
    DVector::from_iterator(x0.dim(), (0..x0.dim()).map(|j| if sign * g[j] >= 0.0 { x0.ub()[j] } else { x0.lb()[j] }))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Block-diagonal error system with output `y − y_r`.
pub fn error_system(
    full: &outabs::model::LtiSystem,
    reduced: &outabs::model::LtiSystem,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let (n, k) = (full.order(), reduced.order());
    let m = full.inputs();
    let p = full.outputs();
    let mut a = DMatrix::zeros(n + k, n + k);
    a.view_mut((0, 0), (n, n)).copy_from(full.a());
    a.view_mut((n, n), (k, k)).copy_from(reduced.a());
    let mut b = DMatrix::zeros(n + k, m);
    b.view_mut((0, 0), (n, m)).copy_from(full.b());
    b.view_mut((n, 0), (k, m)).copy_from(reduced.b());
    let mut c = DMatrix::zeros(p, n + k);
    c.view_mut((0, 0), (p, n)).copy_from(full.c());
    c.view_mut((0, n), (p, k)).copy_from(&-reduced.c());
    (a, b, c)
}

/// `[I; SH]`, mapping a full-order initial state to the error system's.
pub fn stacked_map(n: usize, sh: &DMatrix<f64>) -> DMatrix<f64> {
    let k = sh.nrows();
    let mut m = DMatrix::zeros(n + k, n);
    m.view_mut((0, 0), (n, n)).copy_from(&DMatrix::identity(n, n));
    m.view_mut((n, 0), (k, n)).copy_from(sh);
    m
}

/// Largest `|y_i|` over the samples, per output.
pub fn peak_abs(samples: &[(f64, DVector<f64>)]) -> DVector<f64> {
    let p = samples[0].1.len();
    let mut peak = DVector::zeros(p);
    for (_, y) in samples {
        for i in 0..p {
            peak[i] = f64::max(peak[i], y[i].abs());
        }
    }
    peak
}

pub mod soundness {
    use super::*;
    use outabs::balancing::{self, Abstraction};
    use outabs::bounds::{self, BoundMethods, BoundReport, E1Method, E2Method};
    use outabs::generate::{self, GenOptions};
    use outabs::model::ProblemSystem;
    use std::sync::Arc;

    pub struct Instance {
        pub abs: Abstraction,
        pub report: BoundReport,
        pub u_box: HyperBox,
        pub t_f: f64,
        pub a: DMatrix<f64>,
        pub b: DMatrix<f64>,
        pub c: DMatrix<f64>,
        pub map: DMatrix<f64>,
    }

    pub fn instance(seed: u64, n: usize, m: usize, p: usize, k: usize, t_f: f64) -> Instance {
        let opts = GenOptions { t_f, ..GenOptions::new(n, m, p, seed) };
        let problem = generate::random_problem(&opts).unwrap();
        let ProblemSystem::Lti { system, x0 } = problem.system() else { unreachable!() };
        let bal = Arc::new(balancing::balance(system).unwrap());
        let abs = balancing::truncate(&bal, k, x0).unwrap();
        let report = bounds::compute_bounds(&abs, problem.inputs(), t_f, &BoundMethods::default()).unwrap();
        let (a, b, c) = error_system(system, abs.reduced());
        let map = stacked_map(n, &abs.initial_map());
        Instance { abs, report, u_box: problem.inputs().clone(), t_f, a, b, c, map }
    }

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum Route {
        NormBound,
        Lyapunov,
        Hankel,
        SimulationE1,
        SimulationE2,
        Combined,
    }

    pub const ROUTES: [Route; 6] =
        [Route::NormBound, Route::Lyapunov, Route::Hankel, Route::SimulationE1, Route::SimulationE2, Route::Combined];

    impl Instance {
        pub fn bound(&self, route: Route) -> DVector<f64> {
            let g = 1.0 + self.report.bound.gamma;
            let v = |s: Option<&[f64]>| DVector::from_column_slice(s.expect("route evaluated"));
            match route {
                Route::NormBound => v(self.report.e1_for(E1Method::NormBound)),
                Route::Lyapunov => v(self.report.e1_for(E1Method::Lyapunov)),
                Route::Hankel => v(self.report.e2_for(E2Method::Hankel)),
                Route::SimulationE1 => v(self.report.e1_for(E1Method::Simulation)) * g,
                Route::SimulationE2 => v(self.report.e2_for(E2Method::Simulation)) * g,
                Route::Combined => self.report.bound.delta_vector(),
            }
        }

        /// Peak `|y − y_r|` of one trial exercising the part of the error the
        /// route bounds: zero input for e1 routes, zero initial state for e2
        /// routes, both for the combined bound.
        pub fn trial(&self, route: Route, adversarial: bool, rng: &mut ChaCha8Rng) -> DVector<f64> {
            let n_full = self.abs.balanced().order();
            let x0_box = self.abs.x0();
            let p = self.c.nrows();
            let i = rng.random_range(0..p);
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let c_row = self.c.row(i).transpose();
            let t_star = self.t_f * (0.05 + 0.95 * rng.random::<f64>());
            let uses_x0 = !matches!(route, Route::Hankel | Route::SimulationE2);
            let uses_u = matches!(route, Route::Hankel | Route::SimulationE2 | Route::Combined);
            let x0 = if !uses_x0 {
                DVector::zeros(n_full)
            } else if adversarial {
                adversarial_vertex(&self.a, &c_row, &self.map, x0_box, t_star, sign)
            } else if rng.random::<bool>() {
                random_vertex(x0_box, rng)
            } else {
                random_point(x0_box, rng)
            };
            let u = if !uses_u {
                Pwc::constant(DVector::zeros(self.b.ncols()))
            } else if adversarial {
                adversarial_input(&self.a, &self.b, &c_row, &self.u_box, t_star, 200, sign)
            } else {
                random_bang_bang(&self.u_box, self.t_f, 8, rng)
            };
            let xbar = &self.map * x0;
            let samples = rk4(&self.a, &self.b, &self.c, &xbar, &u, self.t_f, fine_step(&self.a, self.t_f));
            peak_abs(&samples)
        }
    }

    /// Whether `realized ≤ bound` up to integrator error.
    pub fn within(realized: &DVector<f64>, bound: &DVector<f64>) -> bool {
        realized.iter().zip(bound.iter()).all(|(r, b)| *r <= b * (1.0 + 1e-6) + 1e-9)
    }
}

/// Oracle form of a library input signal on `[0, t_f]`.
pub fn to_pwc(u: &outabs::reach::InputSignal, t_f: f64) -> Pwc {
    let breaks: Vec<f64> = u.breaks().iter().copied().filter(|t| *t == 0.0 || *t < t_f).collect();
    let values = breaks.iter().map(|t| u.value_at(*t)).collect();
    Pwc { breaks, values }
}
