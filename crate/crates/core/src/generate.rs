//! Random stable test instances.
//!
//! `A = S − D` with `S` skew-symmetric and `D` positive diagonal, so the
//! symmetric part of `A` is negative definite and `A` is Hurwitz. A strong
//! skew part keeps the gramians well conditioned.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HyperBox, LtiSystem, Polarity, PolytopeSpec, ProblemSystem, SafetySpec, VerificationProblem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenOptions {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub seed: u64,
    /// Scale of the skew-symmetric part relative to `1/√n`. Grows with `n`
    /// so that eigenvalues stay separated and the gramians keep full rank.
    pub skew: f64,
    /// Range of the diagonal damping entries.
    pub damping: (f64, f64),
    /// Number of initial-state coordinates with non-zero width.
    pub free_coords: usize,
    /// Half-width of the safe output box relative to a proven reach bound.
    /// Values below 1 may produce unsafe instances.
    pub spec_scale: f64,
    pub t_f: f64,
}

impl GenOptions {
    pub fn new(n: usize, m: usize, p: usize, seed: u64) -> Self {
        GenOptions {
            n,
            m,
            p,
            seed,
            skew: (n as f64 / 4.0).max(3.0),
            damping: (0.3, 1.0),
            free_coords: n.min(8),
            spec_scale: 1.0,
            t_f: 5.0,
        }
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Random Hurwitz system; also returns the smallest damping entry.
pub fn random_system(
    n: usize,
    m: usize,
    p: usize,
    skew: f64,
    damping: (f64, f64),
    rng: &mut ChaCha8Rng,
) -> Result<(LtiSystem, f64)> {
    if n == 0 || m == 0 || p == 0 {
        return Err(Error::InvalidArgument("n, m and p must be positive".into()));
    }
    if !(damping.0 > 0.0 && damping.0 <= damping.1) {
        return Err(Error::InvalidArgument(format!("damping range must satisfy 0 < lo <= hi, got {damping:?}")));
    }
    let scale = skew / (n as f64).sqrt();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = normal(rng) * scale;
            a[(i, j)] = v;
            a[(j, i)] = -v;
        }
    }
    let mut dmin = f64::INFINITY;
    for i in 0..n {
        let d = if damping.0 == damping.1 { damping.0 } else { rng.random_range(damping.0..damping.1) };
        dmin = dmin.min(d);
        a[(i, i)] = -d;
    }
    let b = DMatrix::from_fn(n, m, |_, _| normal(rng));
    let c = DMatrix::from_fn(p, n, |_, _| normal(rng));
    Ok((LtiSystem::new(a, b, c)?, dmin))
}

/// Random verification problem with a safe output box.
pub fn random_problem(opts: &GenOptions) -> Result<VerificationProblem> {
    let GenOptions { n, m, p, .. } = *opts;
    if p >= n {
        return Err(Error::InvalidArgument(format!(
            "need p < n so that an abstraction order p < k <= n exists, got p={p}, n={n}"
        )));
    }
    if opts.free_coords > n {
        return Err(Error::InvalidArgument(format!("free_coords {} exceeds n={n}", opts.free_coords)));
    }
    if !(opts.t_f > 0.0) || !(opts.spec_scale > 0.0) {
        return Err(Error::InvalidArgument("t_f and spec_scale must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (sys, dmin) = random_system(n, m, p, opts.skew, opts.damping, &mut rng)?;

    let mut lb = DVector::zeros(n);
    let mut ub = DVector::zeros(n);
    for i in 0..n {
        let c = 0.2 * normal(&mut rng);
        let r = if i < opts.free_coords { rng.random_range(0.05..0.5) } else { 0.0 };
        lb[i] = c - r;
        ub[i] = c + r;
    }
    let x0 = HyperBox::new(lb, ub)?;
    let ulb: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..0.0)).collect();
    let uub: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
    let u = HyperBox::from_slices(&ulb, &uub)?;

    // ‖x(t)‖ ≤ ‖x₀‖ + ‖B‖‖u‖/d_min since the symmetric part of A is ⪯ −d_min I
    let x0_norm = (0..n).map(|i| x0.lb()[i].abs().max(x0.ub()[i].abs()).powi(2)).sum::<f64>().sqrt();
    let u_norm = (0..m).map(|j| u.lb()[j].abs().max(u.ub()[j].abs()).powi(2)).sum::<f64>().sqrt();
    let b_norm = sys.b().norm();
    let reach = x0_norm + b_norm * u_norm / dmin;
    let w: Vec<f64> = (0..p).map(|i| opts.spec_scale * sys.c().row(i).norm() * reach).collect();
    let neg: Vec<f64> = w.iter().map(|v| -v).collect();
    let spec = SafetySpec::Polytope(PolytopeSpec::output_box(&neg, &w, Polarity::Safe)?);

    VerificationProblem::new(
        format!("random-n{n}-m{m}-p{p}-seed{}", opts.seed),
        ProblemSystem::Lti { system: sys, x0 },
        u,
        vec![spec],
        opts.t_f,
    )
}
