use std::collections::hash_map::Entry;
use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::LtiSystem;

/// Piecewise-constant input: `values[i]` holds on `[breaks[i], breaks[i+1])`,
/// the last value forever after.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSignal {
    breaks: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl InputSignal {
    pub fn constant(u: &DVector<f64>) -> Self {
        InputSignal { breaks: vec![0.0], values: vec![u.iter().copied().collect()] }
    }

    pub fn zero(m: usize) -> Self {
        Self::constant(&DVector::zeros(m))
    }

    pub fn piecewise(breaks: Vec<f64>, values: Vec<DVector<f64>>) -> Result<Self> {
        if breaks.is_empty() || breaks.len() != values.len() {
            return Err(Error::InvalidArgument("input signal needs one value per break".into()));
        }
        if breaks[0] != 0.0 || breaks.windows(2).any(|w| w[1] <= w[0]) || breaks.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidArgument("input breaks must start at 0 and increase strictly".into()));
        }
        let m = values[0].len();
        if values.iter().any(|v| v.len() != m) {
            return Err(Error::InvalidArgument("input values differ in length".into()));
        }
        Ok(InputSignal { breaks, values: values.iter().map(|v| v.iter().copied().collect()).collect() })
    }

    pub fn inputs(&self) -> usize {
        self.values[0].len()
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    fn segment(&self, t: f64) -> usize {
        self.breaks.partition_point(|b| *b <= t).saturating_sub(1)
    }

    pub fn value_at(&self, t: f64) -> DVector<f64> {
        DVector::from_column_slice(&self.values[self.segment(t)])
    }
}

/// Samples of a simulated run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub outputs: Vec<DVector<f64>>,
}

/// Exact propagation for piecewise-constant input, sampled at every multiple
/// of `h` below `t_f`, at `t_f`, and at every input break in between.
pub fn simulate(sys: &LtiSystem, x0: &DVector<f64>, u: &InputSignal, t_f: f64, h: f64) -> Result<Trajectory> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("step h must be positive, got {h}")));
    }
    if !(t_f >= 0.0) || !t_f.is_finite() {
        return Err(Error::InvalidArgument(format!("horizon must be finite and >= 0, got {t_f}")));
    }
    if x0.len() != sys.order() {
        return Err(Error::DimensionMismatch {
            matrix: "x0".into(),
            expected: format!("{}", sys.order()),
            found: format!("{}", x0.len()),
        });
    }
    if u.inputs() != sys.inputs() {
        return Err(Error::DimensionMismatch {
            matrix: "input signal".into(),
            expected: format!("{}", sys.inputs()),
            found: format!("{}", u.inputs()),
        });
    }
    let n_steps = (t_f / h).ceil() as usize;
    let mut grid: Vec<f64> = (0..n_steps).map(|j| j as f64 * h).collect();
    grid.push(t_f);
    grid.extend(u.breaks().iter().copied().filter(|b| *b > 0.0 && *b < t_f));
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * t_f.max(1.0));

    let mut cache: HashMap<u64, (DMatrix<f64>, DMatrix<f64>)> = HashMap::new();
    let mut x = x0.clone();
    let mut times = Vec::with_capacity(grid.len());
    let mut states = Vec::with_capacity(grid.len());
    let mut outputs = Vec::with_capacity(grid.len());
    times.push(0.0);
    outputs.push(sys.c() * &x);
    states.push(x.clone());
    for w in grid.windows(2) {
        let dt = w[1] - w[0];
        let (phi, gamma) = match cache.entry(dt.to_bits()) {
            Entry::Occupied(e) => &*e.into_mut(),
            Entry::Vacant(e) => &*e.insert(linalg::propagators(sys.a(), dt)?),
        };
        let bu = sys.b() * u.value_at(w[0]);
        x = phi * &x + gamma * bu;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("state at t = {}", w[1])));
        }
        times.push(w[1]);
        outputs.push(sys.c() * &x);
        states.push(x.clone());
    }
    Ok(Trajectory { times, states, outputs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn scalar_decay() {
        let sys = LtiSystem::new(dmatrix![-1.0], dmatrix![0.0], dmatrix![2.0]).unwrap();
        let tr = simulate(&sys, &dvector![1.0], &InputSignal::zero(1), 1.0, 0.01).unwrap();
        let y = tr.outputs.last().unwrap()[0];
        assert!((y - 2.0 * (-1.0f64).exp()).abs() < 1e-12);
        assert_eq!(*tr.times.last().unwrap(), 1.0);
    }

    #[test]
    fn zero_horizon_single_sample() {
        let sys = LtiSystem::new(dmatrix![-1.0], dmatrix![1.0], dmatrix![3.0]).unwrap();
        let tr = simulate(&sys, &dvector![2.0], &InputSignal::zero(1), 0.0, 0.1).unwrap();
        assert_eq!(tr.outputs, vec![dvector![6.0]]);
    }

    #[test]
    fn breaks_are_sampled() {
        let u = InputSignal::piecewise(vec![0.0, 0.123], vec![dvector![1.0], dvector![-1.0]]).unwrap();
        let sys = LtiSystem::new(dmatrix![-1.0], dmatrix![1.0], dmatrix![1.0]).unwrap();
        let tr = simulate(&sys, &dvector![0.0], &u, 0.3, 0.1).unwrap();
        assert!(tr.times.contains(&0.123));
        // closed form through the switch
        let x1 = 1.0 - (-0.123f64).exp();
        let expect = x1 * (-(0.3f64 - 0.123)).exp() - (1.0 - (-(0.3f64 - 0.123)).exp());
        assert!((tr.outputs.last().unwrap()[0] - expect).abs() < 1e-13);
    }

    #[test]
    fn bad_signals_rejected() {
        assert!(InputSignal::piecewise(vec![0.1], vec![dvector![1.0]]).is_err());
        assert!(InputSignal::piecewise(vec![0.0, 0.0], vec![dvector![1.0], dvector![1.0]]).is_err());
    }
}
