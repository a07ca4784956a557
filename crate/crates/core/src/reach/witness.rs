use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::simulate::{simulate, InputSignal};
use crate::error::{Error, Result};
use crate::model::{HyperBox, LtiSystem};
use crate::spectransform::UnsafeRegion;

pub const DEFAULT_WITNESS_BUDGET: usize = 256;

/// Largest free-coordinate count for which initial vertices are enumerated.
const MAX_ENUMERATED_FREE: usize = 16;
const MAX_SEGMENTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessOptions {
    pub budget: usize,
    pub seed: u64,
    /// Simulation step; [`super::default_step`] when `None`.
    pub step_h: Option<f64>,
}

impl Default for WitnessOptions {
    fn default() -> Self {
        WitnessOptions { budget: DEFAULT_WITNESS_BUDGET, seed: 0, step_h: None }
    }
}

/// A simulated run whose output enters the unsafe region.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    /// Sampled point of the initial box.
    pub x0: DVector<f64>,
    /// Initial state of the simulated system, `map · x0`.
    pub state0: DVector<f64>,
    pub input: InputSignal,
    pub time: f64,
    pub output: DVector<f64>,
    /// Signed depth inside the unsafe region, larger than the guard band.
    pub depth: f64,
    pub candidate: usize,
}

/// Guard band `η = 1e-9 · scale` for the region.
pub fn guard_band(region: &UnsafeRegion) -> f64 {
    1e-9 * region.scale()
}

fn random_vertex(b: &HyperBox, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_iterator(b.dim(), (0..b.dim()).map(|i| if rng.random::<bool>() { b.ub()[i] } else { b.lb()[i] }))
}

fn random_point(b: &HyperBox, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_iterator(b.dim(), (0..b.dim()).map(|i| b.lb()[i] + rng.random::<f64>() * (b.ub()[i] - b.lb()[i])))
}

/// Searches for a run of `sys` from `map · x0` (`x0` in the box) whose output
/// lies strictly inside `region`. Initial-state vertices paired with constant
/// input vertices come first, then random points with random bang-bang
/// inputs. Candidates run in parallel; the lowest-index hit is returned, so
/// the result depends only on the seed.
#[allow(clippy::too_many_arguments)]
pub fn find_unsafe_witness(
    sys: &LtiSystem,
    x0: &HyperBox,
    map: Option<&DMatrix<f64>>,
    u_box: &HyperBox,
    region: &UnsafeRegion,
    t_f: f64,
    opts: &WitnessOptions,
) -> Result<Option<Witness>> {
    if opts.budget == 0 {
        return Err(Error::InvalidArgument("witness budget must be positive".into()));
    }
    let state_dim = map.map_or(x0.dim(), |m| m.nrows());
    if state_dim != sys.order() || map.is_some_and(|m| m.ncols() != x0.dim()) || u_box.dim() != sys.inputs() {
        return Err(Error::DimensionMismatch {
            matrix: "witness search".into(),
            expected: format!("state {}, inputs {}", sys.order(), sys.inputs()),
            found: format!("state {state_dim}, inputs {}", u_box.dim()),
        });
    }
    let h = opts.step_h.unwrap_or_else(|| super::default_step(sys.a(), t_f));
    let eta = guard_band(region);
    let x_free = x0.free_coordinates();
    let u_free = u_box.free_coordinates();
    let nx = if x_free.len() <= MAX_ENUMERATED_FREE { 1u64 << x_free.len() } else { 0 };
    let nu = 1u64 << u_free.len().min(6);
    let enumerated = (nx * nu).min(opts.budget as u64 / 2 + 1);

    let candidate = |i: usize| -> Result<Option<Witness>> {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(i as u64);
        let (x, input) = if (i as u64) < enumerated {
            let xi = i as u64 % nx.max(1);
            let ui = i as u64 / nx.max(1);
            let x = if nx > 0 { x0.vertex(&x_free, xi) } else { random_vertex(x0, &mut rng) };
            (x, InputSignal::constant(&u_box.vertex(&u_free, ui)))
        } else {
            let x = if rng.random::<bool>() { random_vertex(x0, &mut rng) } else { random_point(x0, &mut rng) };
            let segments = rng.random_range(1..=MAX_SEGMENTS);
            let mut breaks: Vec<f64> = (1..segments).map(|_| rng.random::<f64>() * t_f).collect();
            breaks.push(0.0);
            breaks.sort_by(f64::total_cmp);
            breaks.dedup();
            let values = breaks
                .iter()
                .map(|_| {
                    if rng.random::<f64>() < 0.2 {
                        random_point(u_box, &mut rng)
                    } else {
                        random_vertex(u_box, &mut rng)
                    }
                })
                .collect();
            (x, InputSignal::piecewise(breaks, values)?)
        };
        let state0 = map.map_or_else(|| x.clone(), |m| m * &x);
        let tr = simulate(sys, &state0, &input, t_f, h)?;
        for (t, y) in tr.times.iter().zip(tr.outputs.iter()) {
            let depth = region.depth(y);
            if depth > eta {
                return Ok(Some(Witness { x0: x, state0, input, time: *t, output: y.clone(), depth, candidate: i }));
            }
        }
        Ok(None)
    };

    (0..opts.budget)
        .into_par_iter()
        .map(candidate)
        .find_map_first(|r| match r {
            Ok(None) => None,
            other => Some(other),
        })
        .unwrap_or(Ok(None))
}
