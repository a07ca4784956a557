use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use nalgebra::DVector;
use serde_json::{json, Value};

use outabs::balancing::{self, Abstraction};
use outabs::bounds::{self, BoundReport};
use outabs::generate::{self, GenOptions};
use outabs::model::{self, mtx, HyperBox, LtiSystem, ProblemSystem, PssMode, PssSystem, SpecDoc, VerificationProblem};
use outabs::reach::{self, CheckOutcome, ReachOptions, ReachResult, WitnessOptions, ZonotopeDoc};
use outabs::spectransform::{self, TransformedSpecDoc};
use outabs::verifier::{self, KSchedule, Outcome, Verdict, VerifyOptions};

use crate::output::{self, emit, Report};
use crate::{bench, Global, ReachArgs, VerifyArgs};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(outabs::Error),
}

impl From<outabs::Error> for CliError {
    fn from(e: outabs::Error) -> Self {
        CliError::Run(e)
    }
}

type CliResult = Result<u8, CliError>;

/// One LTI piece of a problem: the system itself or one switched mode.
struct Piece<'a> {
    mode: Option<usize>,
    system: &'a LtiSystem,
    x0: &'a HyperBox,
    duration: f64,
}

fn pieces(p: &VerificationProblem) -> Vec<Piece<'_>> {
    match p.system() {
        ProblemSystem::Lti { system, x0 } => vec![Piece { mode: None, system, x0, duration: p.t_f() }],
        ProblemSystem::Pss(pss) => pss
            .modes()
            .iter()
            .enumerate()
            .map(|(i, m)| Piece { mode: Some(i), system: &m.system, x0: &m.initial_set, duration: m.duration })
            .collect(),
    }
}

fn default_k(p: &VerificationProblem, k: Option<usize>) -> usize {
    let (n, p) = match p.system() {
        ProblemSystem::Lti { system, .. } => (system.order(), system.outputs()),
        ProblemSystem::Pss(s) => (s.order(), s.outputs()),
    };
    k.unwrap_or((p + 1).min(n))
}

fn mode_label(m: Option<usize>) -> String {
    m.map_or_else(|| "-".into(), |i| (i + 1).to_string())
}

fn vec_json(v: &DVector<f64>) -> Value {
    json!(v.iter().copied().collect::<Vec<_>>())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Run(outabs::Error::Io { path: path.to_path_buf(), source }))
}

fn stdout_only(g: &Global) -> Global {
    Global { output: None, ..g.clone() }
}

pub fn reduce(g: &Global, input: &Path, k: Option<usize>) -> CliResult {
    let problem = model::parse_problem(input)?;
    let k = default_k(&problem, k);
    let mut abstractions: Vec<(Option<usize>, Abstraction, f64)> = Vec::new();
    for piece in pieces(&problem) {
        let bal = Arc::new(balancing::balance(piece.system)?);
        abstractions.push((piece.mode, balancing::truncate(&bal, k, piece.x0)?, piece.duration));
    }
    let system = match problem.system() {
        ProblemSystem::Lti { .. } => {
            let a = &abstractions[0].1;
            ProblemSystem::Lti { system: a.reduced().clone(), x0: a.x0_reduced().clone() }
        }
        ProblemSystem::Pss(_) => ProblemSystem::Pss(PssSystem::new(
            abstractions
                .iter()
                .map(|(_, a, d)| PssMode {
                    system: a.reduced().clone(),
                    duration: *d,
                    initial_set: a.x0_reduced().clone(),
                })
                .collect(),
        )?),
    };
    let reduced = VerificationProblem::new(
        format!("{}-k{k}", problem.name()),
        system,
        problem.inputs().clone(),
        problem.specs().to_vec(),
        problem.t_f(),
    )?;

    let sigmas: Vec<Vec<f64>> =
        abstractions.iter().map(|(_, a, _)| a.balanced().sigma().iter().copied().collect()).collect();
    let mut modes = Vec::new();
    let mut rows = Vec::new();
    for ((mode, a, _), s) in abstractions.iter().zip(&sigmas) {
        modes.push(json!({
            "mode": mode,
            "sigma": s,
            "condition": a.balanced().condition(),
            "warnings": a.balanced().warnings(),
        }));
        for (j, v) in s.iter().enumerate() {
            rows.push(vec![
                mode_label(*mode),
                (j + 1).to_string(),
                format!("{v:.6e}"),
                if j < k { "kept" } else { "truncated" }.to_string(),
            ]);
        }
    }
    let mut report = json!({ "k": k, "modes": modes });
    if let Some(path) = &g.output {
        let mut files = model::serialize_problem(&reduced, path)?;
        let sigma_path = sibling(path, "sigma.json");
        let sigma_json = if sigmas.len() == 1 { json!(sigmas[0]) } else { json!(sigmas) };
        write_text(&sigma_path, &(serde_json::to_string_pretty(&sigma_json).map_err(outabs::Error::from)? + "\n"))?;
        files.push(sigma_path);
        for (mode, a, _) in &abstractions {
            let map_path = match mode {
                None => sibling(path, "map.mtx"),
                Some(i) => sibling(path, &format!("mode{}.map.mtx", i + 1)),
            };
            mtx::write_matrix_market(&a.initial_map(), &map_path)?;
            files.push(map_path);
        }
        report["files"] = json!(files);
    } else {
        let text = model::problem_to_string(&reduced)?;
        report["manifest"] = serde_json::from_str(&text).map_err(outabs::Error::from)?;
    }
    let header = ["mode", "j", "sigma", "status"];
    emit(
        &stdout_only(g),
        "reduce",
        Report {
            json: report,
            text: format!("order {k}\n{}", output::table(&header, &rows)),
            csv: Some(output::csv(&header, &rows)),
        },
    )?;
    Ok(0)
}

fn bound_rows(mode: Option<usize>, r: &BoundReport) -> Vec<Vec<String>> {
    (0..r.bound.delta.len())
        .map(|i| {
            vec![
                mode_label(mode),
                i.to_string(),
                format!("{:.6e}", r.bound.e1[i]),
                r.bound.e1_method[i].label().to_string(),
                format!("{:.6e}", r.bound.e2[i]),
                r.bound.e2_method[i].label().to_string(),
                format!("{:.6e}", r.bound.delta[i]),
            ]
        })
        .collect()
}

pub fn bounds(g: &Global, input: &Path, k: Option<usize>, methods: &crate::MethodArgs) -> CliResult {
    let problem = model::parse_problem(input)?;
    let k = default_k(&problem, k);
    let methods = methods.to_methods();
    let mut modes = Vec::new();
    let mut rows = Vec::new();
    for piece in pieces(&problem) {
        let bal = Arc::new(balancing::balance(piece.system)?);
        let abs = balancing::truncate(&bal, k, piece.x0)?;
        let r = bounds::compute_bounds(&abs, problem.inputs(), piece.duration, &methods)?;
        rows.extend(bound_rows(piece.mode, &r));
        modes.push(json!({ "mode": piece.mode, "report": r }));
    }
    let header = ["mode", "output", "e1", "e1_method", "e2", "e2_method", "delta"];
    emit(
        g,
        "bounds",
        Report {
            json: json!({ "k": k, "modes": modes }),
            text: format!("order {k}\n{}", output::table(&header, &rows)),
            csv: Some(output::csv(&header, &rows)),
        },
    )?;
    Ok(0)
}

pub fn transform_spec(g: &Global, spec_path: &Path, delta: &[f64]) -> CliResult {
    let text =
        fs::read_to_string(spec_path).map_err(|source| outabs::Error::Io { path: spec_path.to_path_buf(), source })?;
    let value: Value = serde_json::from_str(&text).map_err(outabs::Error::from)?;
    let docs: Vec<SpecDoc> =
        if value.is_array() { serde_json::from_value(value) } else { serde_json::from_value(value).map(|d| vec![d]) }
            .map_err(outabs::Error::from)?;
    let delta = DVector::from_column_slice(delta);
    let mut out = Vec::new();
    let mut text = String::new();
    for d in &docs {
        let t = spectransform::transform(&d.to_spec()?, &delta)?;
        let doc = TransformedSpecDoc::from(&t);
        text += &format!("{}\n", serde_json::to_string(&doc).map_err(outabs::Error::from)?);
        out.push(doc);
    }
    emit(
        g,
        "transform-spec",
        Report {
            json: json!({ "delta": delta.iter().copied().collect::<Vec<_>>(), "transformed": out }),
            text,
            csv: None,
        },
    )?;
    Ok(0)
}

fn reach_options(r: &ReachArgs) -> ReachOptions {
    ReachOptions { step_h: r.step_h, order_cap: r.order_cap }
}

fn check_label(o: CheckOutcome) -> String {
    match o {
        CheckOutcome::Safe => "safe".into(),
        CheckOutcome::MaybeUnsafe { step } => format!("maybe_unsafe@{step}"),
        CheckOutcome::Indeterminate { step } => format!("indeterminate@{step}"),
    }
}

fn reach_csv_rows(mode: Option<usize>, r: &ReachResult) -> Vec<Vec<String>> {
    r.steps
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let (lo, hi) = s.set.interval_hull();
            let mut row = vec![mode_label(mode), i.to_string(), format!("{:e}", s.t0), format!("{:e}", s.t1)];
            row.extend(lo.iter().map(|v| format!("{v:e}")));
            row.extend(hi.iter().map(|v| format!("{v:e}")));
            row
        })
        .collect()
}

pub fn reach(g: &Global, input: &Path, csv_path: Option<&Path>, args: &ReachArgs) -> CliResult {
    let problem = model::parse_problem(input)?;
    let opts = reach_options(args);
    let p = problem.specs()[0].output_dim();
    let zero = DVector::zeros(p);
    let specs: Vec<_> =
        problem.specs().iter().map(|s| spectransform::transform(s, &zero)).collect::<outabs::Result<_>>()?;
    let mut modes = Vec::new();
    let mut rows = Vec::new();
    let mut all_safe = true;
    let mut any_witness = false;
    for piece in pieces(&problem) {
        let r = reach::reach_lti_with(piece.system, piece.x0, problem.inputs(), piece.duration, &opts)?;
        let checks = reach::check_specs(&r.steps, &specs)?;
        let mut witness = Value::Null;
        if checks.iter().any(|c| !c.is_safe()) {
            all_safe = false;
            let wopts = WitnessOptions {
                budget: args.witness_budget,
                seed: g.seed,
                step_h: Some(r.stats.step_h.max(f64::MIN_POSITIVE)),
            };
            for (i, (t, c)) in specs.iter().zip(&checks).enumerate() {
                if c.is_safe() {
                    continue;
                }
                if let Some(w) = reach::find_unsafe_witness(
                    piece.system,
                    piece.x0,
                    None,
                    problem.inputs(),
                    &t.unsafe_region,
                    piece.duration,
                    &wopts,
                )? {
                    any_witness = true;
                    witness = json!({
                        "spec": i,
                        "x0": vec_json(&w.x0),
                        "input": w.input,
                        "time": w.time,
                        "output": vec_json(&w.output),
                    });
                    break;
                }
            }
        }
        rows.extend(reach_csv_rows(piece.mode, &r));
        let steps: Vec<Value> =
            r.steps.iter().map(|s| json!({ "t0": s.t0, "t1": s.t1, "set": ZonotopeDoc::from(&s.set) })).collect();
        modes.push(json!({
            "mode": piece.mode,
            "stats": {
                "steps": r.stats.steps,
                "step_h": r.stats.step_h,
                "max_generators": r.stats.max_generators,
                "wall_time_ms": r.stats.wall_time_ms,
            },
            "checks": checks.iter().map(|c| check_label(*c)).collect::<Vec<_>>(),
            "witness": witness,
            "steps": steps,
        }));
    }
    let outcome = if all_safe {
        Outcome::Safe
    } else if any_witness {
        Outcome::Unsafe
    } else {
        Outcome::Indeterminate
    };
    let mut header: Vec<String> = ["mode", "step", "t0", "t1"].iter().map(|s| s.to_string()).collect();
    header.extend((0..p).map(|i| format!("lo_{i}")));
    header.extend((0..p).map(|i| format!("hi_{i}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let csv_text = output::csv(&header, &rows);
    if let Some(path) = csv_path {
        write_text(path, &csv_text)?;
    }
    let text = format!(
        "verdict {}\n{}",
        outcome_name(outcome),
        modes
            .iter()
            .map(|m| format!("mode {} steps {} checks {}\n", m["mode"], m["stats"]["steps"], m["checks"]))
            .collect::<String>()
    );
    emit(g, "reach", Report { json: json!({ "verdict": outcome, "modes": modes }), text, csv: Some(csv_text) })?;
    Ok(outcome.exit_code() as u8)
}

fn outcome_name(o: Outcome) -> &'static str {
    match o {
        Outcome::Safe => "safe",
        Outcome::Unsafe => "unsafe",
        Outcome::Indeterminate => "indeterminate",
    }
}

fn verdict_json(v: &Verdict) -> Value {
    let witness = v.witness.as_ref().map(|w| {
        json!({
            "mode": w.mode,
            "spec": w.spec,
            "x0": vec_json(&w.x0),
            "input": w.input,
            "time": w.time,
            "reduced_output": vec_json(&w.reduced_output),
            "full_output": vec_json(&w.full_output),
        })
    });
    json!({
        "outcome": v.outcome,
        "k_used": v.k_used,
        "delta": v.delta,
        "witness": witness,
        "per_k_log": v.per_k_log,
    })
}

pub fn verify(g: &Global, args: &VerifyArgs, switched: bool) -> CliResult {
    let problem = model::parse_problem(&args.input)?;
    let time_budget = match args.time_budget {
        Some(s) if s < 0.0 || !s.is_finite() => {
            return Err(CliError::Usage(format!("time budget must be a non-negative number of seconds, got {s}")))
        }
        Some(s) => Some(Duration::from_secs_f64(s)),
        None => None,
    };
    let opts = VerifyOptions {
        k0: args.k0,
        k_max: args.k_max,
        methods: args.methods.to_methods(),
        reach: reach_options(&args.reach),
        witness: WitnessOptions { budget: args.reach.witness_budget, seed: g.seed, step_h: None },
        schedule: if args.geometric { KSchedule::Geometric } else { KSchedule::Linear },
        time_budget,
    };
    let v = if switched { verifier::verify_pss(&problem, &opts)? } else { verifier::verify(&problem, &opts)? };
    let mut rows = Vec::new();
    for e in &v.per_k_log {
        for (i, m) in e.modes.iter().enumerate() {
            for (j, d) in m.delta.iter().enumerate() {
                rows.push(vec![
                    e.k.to_string(),
                    if switched { i.to_string() } else { "-".into() },
                    j.to_string(),
                    format!("{d:.6e}"),
                    format!("{:.6e}", m.e2_theoretical[j]),
                    m.check.clone(),
                    outcome_name(e.outcome).to_string(),
                ]);
            }
        }
    }
    let header = ["k", "mode", "output", "delta", "e2_hankel", "check", "outcome"];
    let mut text = format!(
        "verdict {}{}\n",
        outcome_name(v.outcome),
        v.k_used.map(|k| format!(" at k = {k}")).unwrap_or_default()
    );
    if let Some(w) = &v.witness {
        text += &format!(
            "witness: spec {} violated at t = {} with y = {}\n",
            w.spec,
            w.time,
            output::vec_text(w.full_output.as_slice())
        );
    }
    text += &output::table(&header, &rows);
    emit(
        g,
        if switched { "verify-pss" } else { "verify" },
        Report { json: verdict_json(&v), text, csv: Some(output::csv(&header, &rows)) },
    )?;
    Ok(v.outcome.exit_code() as u8)
}

pub fn bench(g: &Global, ks: &[usize], extra: &[PathBuf], no_timing: bool) -> CliResult {
    let report = bench::run(ks, extra, !no_timing)?;
    emit(g, "bench", bench::render(&report))?;
    Ok(0)
}

pub fn gen(g: &Global, n: usize, m: usize, p: usize, spec_scale: f64, t_f: f64) -> CliResult {
    let opts = GenOptions { spec_scale, t_f, ..GenOptions::new(n, m, p, g.seed) };
    let problem = generate::random_problem(&opts)?;
    match &g.output {
        Some(path) => {
            let files = model::serialize_problem(&problem, path)?;
            let summary = json!({ "name": problem.name(), "files": files, "format_version": model::FORMAT_VERSION });
            println!("{}", serde_json::to_string_pretty(&summary).map_err(outabs::Error::from)?);
        }
        None => println!("{}", model::problem_to_string(&problem)?),
    }
    Ok(0)
}
