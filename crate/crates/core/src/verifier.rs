//! The order-increasing verification loop for LTI and periodically switched
//! systems.

use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::balancing::{self, BalancedRealization};
use crate::bounds::{self, BoundMethods, E1Method, E2Method, ErrorBound};
use crate::error::{Error, Result};
use crate::model::{HyperBox, ProblemSystem, SafetySpec, VerificationProblem};
use crate::reach::{self, CheckOutcome, InputSignal, ReachOptions, Witness, WitnessOptions};
use crate::spectransform::{self, TransformedSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Safe,
    Unsafe,
    Indeterminate,
}

impl Outcome {
    /// Process exit code: 0 safe, 1 unsafe, 2 indeterminate.
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Safe => 0,
            Outcome::Unsafe => 1,
            Outcome::Indeterminate => 2,
        }
    }
}

/// How `k` grows between iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KSchedule {
    #[default]
    Linear,
    /// `k ← max(k + 1, ⌈1.5k⌉)`.
    Geometric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    /// First order tried; `p + 1` (capped at `n`) when `None`.
    pub k0: Option<usize>,
    /// Last order tried; `n` when `None`.
    pub k_max: Option<usize>,
    pub methods: BoundMethods,
    pub reach: ReachOptions,
    pub witness: WitnessOptions,
    pub schedule: KSchedule,
    /// Wall-clock budget; running over it ends with Indeterminate.
    pub time_budget: Option<Duration>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            k0: None,
            k_max: None,
            methods: BoundMethods::default(),
            reach: ReachOptions::default(),
            witness: WitnessOptions::default(),
            schedule: KSchedule::Linear,
            time_budget: None,
        }
    }
}

/// Per-mode summary of one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeLog {
    pub delta: Vec<f64>,
    pub rho: f64,
    pub e1_method: Vec<E1Method>,
    pub e2_method: Vec<E2Method>,
    /// The analytic `e2` for this `k`, logged whatever routes are enabled.
    pub e2_theoretical: Vec<f64>,
    pub safe_region_empty: bool,
    pub check: String,
    pub reach_steps: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KLogEntry {
    pub k: usize,
    pub modes: Vec<ModeLog>,
    pub outcome: Outcome,
    pub elapsed_ms: f64,
}

/// A confirmed violating run of the full-order system.
#[derive(Debug, Clone, PartialEq)]
pub struct VerdictWitness {
    /// Mode index for switched systems.
    pub mode: Option<usize>,
    /// Index into the problem's specification list.
    pub spec: usize,
    /// Full-order initial state.
    pub x0: DVector<f64>,
    pub input: InputSignal,
    pub time: f64,
    /// Output of the abstraction at `time`, inside the transformed unsafe region.
    pub reduced_output: DVector<f64>,
    /// Output of the full-order system at `time`, violating the original spec.
    pub full_output: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub outcome: Outcome,
    pub k_used: Option<usize>,
    /// One bound per mode (a single entry for LTI problems).
    pub delta: Option<Vec<ErrorBound>>,
    pub witness: Option<VerdictWitness>,
    pub per_k_log: Vec<KLogEntry>,
}

struct ModeRun {
    log: ModeLog,
    bound: ErrorBound,
    outcome: CheckOutcome,
    witness: Option<VerdictWitness>,
}

fn k_range(opts: &VerifyOptions, p: usize, n: usize) -> Result<(usize, usize)> {
    let k0 = opts.k0.unwrap_or((p + 1).min(n));
    let k_max = opts.k_max.unwrap_or(n);
    balancing::check_order(k0, p, n)?;
    balancing::check_order(k_max, p, n)?;
    if k0 > k_max {
        return Err(Error::InvalidArgument(format!("k0 = {k0} exceeds k_max = {k_max}")));
    }
    Ok((k0, k_max))
}

fn next_k(k: usize, schedule: KSchedule) -> usize {
    match schedule {
        KSchedule::Linear => k + 1,
        KSchedule::Geometric => (k + 1).max((3 * k).div_ceil(2)),
    }
}

fn outcome_label(o: CheckOutcome) -> String {
    match o {
        CheckOutcome::Safe => "safe".into(),
        CheckOutcome::MaybeUnsafe { step } => format!("maybe_unsafe@{step}"),
        CheckOutcome::Indeterminate { step } => format!("indeterminate@{step}"),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_mode(
    bal: &Arc<BalancedRealization>,
    x0: &HyperBox,
    u_box: &HyperBox,
    duration: f64,
    specs: &[SafetySpec],
    k: usize,
    mode: Option<usize>,
    opts: &VerifyOptions,
) -> Result<ModeRun> {
    let abs = balancing::truncate(bal, k, x0)?;
    let report = bounds::compute_bounds(&abs, u_box, duration, &opts.methods)?;
    let bound = report.bound.clone();
    let delta = bound.delta_vector();
    let transformed: Vec<TransformedSpec> =
        specs.iter().map(|s| spectransform::transform(s, &delta)).collect::<Result<_>>()?;
    let safe_region_empty = transformed.iter().any(|t| t.safe.as_ref().is_some_and(|s| s.is_empty_marker()));

    let reach = reach::reach_lti_with(abs.reduced(), abs.x0_reduced(), u_box, duration, &opts.reach)?;
    let outcomes = reach::check_specs(&reach.steps, &transformed)?;
    let outcome = outcomes.iter().fold(CheckOutcome::Safe, |acc, o| acc.and(*o));

    let mut warnings = report.warnings.clone();
    let mut witness = None;
    if !outcome.is_safe() {
        let map = abs.initial_map();
        let wopts = WitnessOptions {
            step_h: opts.witness.step_h.or(Some(reach::default_step(abs.reduced().a(), duration))),
            ..opts.witness
        };
        for (i, (t, spec)) in transformed.iter().zip(specs).enumerate() {
            if outcomes[i].is_safe() {
                continue;
            }
            let found = reach::find_unsafe_witness(
                abs.reduced(),
                abs.x0(),
                Some(&map),
                u_box,
                &t.unsafe_region,
                duration,
                &wopts,
            )?;
            if let Some(w) = found {
                match confirm(bal, &w, spec, wopts.step_h.unwrap_or(duration))? {
                    Some(y) => {
                        witness = Some(VerdictWitness {
                            mode,
                            spec: i,
                            x0: w.x0,
                            input: w.input,
                            time: w.time,
                            reduced_output: w.output,
                            full_output: y,
                        });
                        break;
                    }
                    None => warnings.push(format!(
                        "abstraction witness for spec {i} at t = {} not confirmed on the full-order system",
                        w.time
                    )),
                }
            }
        }
    }
    let log = ModeLog {
        delta: bound.delta.clone(),
        rho: bound.rho,
        e1_method: bound.e1_method.clone(),
        e2_method: bound.e2_method.clone(),
        e2_theoretical: bounds::e2_theoretical(bal.sigma(), k, abs.reduced().outputs(), u_box)
            .iter()
            .copied()
            .collect(),
        safe_region_empty,
        check: outcome_label(outcome),
        reach_steps: reach.stats.steps,
        warnings,
    };
    Ok(ModeRun { log, bound, outcome, witness })
}

/// Re-simulates the full-order system along the witness and returns its
/// output when that output violates `spec`.
fn confirm(bal: &BalancedRealization, w: &Witness, spec: &SafetySpec, h: f64) -> Result<Option<DVector<f64>>> {
    let tr = reach::simulate(bal.original(), &w.x0, &w.input, w.time, h)?;
    let y = tr.outputs.last().expect("simulation yields at least one sample").clone();
    Ok((!spec.is_satisfied_by(&y)).then_some(y))
}

struct ModeInput<'a> {
    bal: Arc<BalancedRealization>,
    x0: &'a HyperBox,
    duration: f64,
}

fn run_loop(
    modes: &[ModeInput<'_>],
    problem: &VerificationProblem,
    switched: bool,
    opts: &VerifyOptions,
) -> Result<Verdict> {
    let start = Instant::now();
    let n = modes[0].bal.order();
    let p = modes[0].bal.original().outputs();
    let (k0, k_max) = k_range(opts, p, n)?;
    let mut log = Vec::new();
    let mut k = k0;
    while k <= k_max {
        if opts.time_budget.is_some_and(|b| start.elapsed() > b) {
            log::warn!("time budget exhausted before k = {k}");
            break;
        }
        let iter_start = Instant::now();
        let mut runs = Vec::with_capacity(modes.len());
        for (i, m) in modes.iter().enumerate() {
            let mode = switched.then_some(i);
            runs.push(run_mode(&m.bal, m.x0, problem.inputs(), m.duration, problem.specs(), k, mode, opts)?);
        }
        let all_safe = runs.iter().all(|r| r.outcome.is_safe());
        let witness = runs.iter().find_map(|r| r.witness.clone());
        let outcome = if all_safe {
            Outcome::Safe
        } else if witness.is_some() {
            Outcome::Unsafe
        } else {
            Outcome::Indeterminate
        };
        log.push(KLogEntry {
            k,
            modes: runs.iter().map(|r| r.log.clone()).collect(),
            outcome,
            elapsed_ms: iter_start.elapsed().as_secs_f64() * 1e3,
        });
        if outcome != Outcome::Indeterminate {
            return Ok(Verdict {
                outcome,
                k_used: Some(k),
                delta: Some(runs.into_iter().map(|r| r.bound).collect()),
                witness,
                per_k_log: log,
            });
        }
        if k == k_max {
            break;
        }
        k = next_k(k, opts.schedule).min(k_max);
    }
    Ok(Verdict { outcome: Outcome::Indeterminate, k_used: None, delta: None, witness: None, per_k_log: log })
}

/// Verifies an LTI problem by abstractions of increasing order.
pub fn verify(problem: &VerificationProblem, opts: &VerifyOptions) -> Result<Verdict> {
    let ProblemSystem::Lti { system, x0 } = problem.system() else {
        return Err(Error::InvalidArgument("verify expects an LTI problem; use verify_pss".into()));
    };
    let bal = Arc::new(balancing::balance(system)?);
    let modes = [ModeInput { bal, x0, duration: problem.t_f() }];
    run_loop(&modes, problem, false, opts)
}

/// Verifies a periodically switched problem; each mode is balanced, bounded
/// and checked on its own over its duration.
pub fn verify_pss(problem: &VerificationProblem, opts: &VerifyOptions) -> Result<Verdict> {
    let ProblemSystem::Pss(pss) = problem.system() else {
        return Err(Error::InvalidArgument("verify_pss expects a switched problem; use verify".into()));
    };
    let modes = pss
        .modes()
        .iter()
        .map(|m| {
            Ok(ModeInput { bal: Arc::new(balancing::balance(&m.system)?), x0: &m.initial_set, duration: m.duration })
        })
        .collect::<Result<Vec<_>>>()?;
    run_loop(&modes, problem, true, opts)
}
