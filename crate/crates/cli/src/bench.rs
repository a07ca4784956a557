use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use outabs::balancing::{self, BalancedRealization};
use outabs::benchmarks;
use outabs::bounds::{self, BoundMethods, E1Method, E2Method};
use outabs::model::{self, HyperBox, ProblemSystem, VerificationProblem};

use crate::commands::CliError;
use crate::output::{self, Report};

const PAIRS: [(E1Method, E2Method); 5] = [
    (E1Method::NormBound, E2Method::Hankel),
    (E1Method::Lyapunov, E2Method::Hankel),
    (E1Method::NormBound, E2Method::Simulation),
    (E1Method::Lyapunov, E2Method::Simulation),
    (E1Method::Simulation, E2Method::Simulation),
];

#[derive(Debug, Serialize)]
pub struct BenchRow {
    pub benchmark: String,
    pub n: usize,
    pub mode: Option<usize>,
    pub k: usize,
    pub method: String,
    pub e1: Vec<f64>,
    pub e2: Vec<f64>,
    pub delta: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_ms: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub notices: Vec<String>,
}

fn label(e1: E1Method, e2: E2Method) -> String {
    format!("{}+{}", e1.label(), e2.label())
}

struct Target {
    name: String,
    modes: Vec<(Option<usize>, Arc<BalancedRealization>, HyperBox, f64)>,
    inputs: HyperBox,
    n: usize,
    p: usize,
}

fn target(problem: &VerificationProblem) -> Result<Target, CliError> {
    let (modes, n, p) = match problem.system() {
        ProblemSystem::Lti { system, x0 } => (
            vec![(None, Arc::new(balancing::balance(system)?), x0.clone(), problem.t_f())],
            system.order(),
            system.outputs(),
        ),
        ProblemSystem::Pss(pss) => (
            pss.modes()
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    Ok((Some(i), Arc::new(balancing::balance(&m.system)?), m.initial_set.clone(), m.duration))
                })
                .collect::<outabs::Result<Vec<_>>>()?,
            pss.order(),
            pss.outputs(),
        ),
    };
    Ok(Target { name: problem.name().to_string(), modes, inputs: problem.inputs().clone(), n, p })
}

fn rows_for(t: &Target, ks: &[usize], timing: bool, notices: &mut Vec<String>) -> Vec<BenchRow> {
    let mut rows = Vec::new();
    for &k in ks {
        if let Err(e) = balancing::check_order(k, t.p, t.n) {
            notices.push(format!("{}: skipping k = {k}: {e}", t.name));
            continue;
        }
        for (mode, bal, x0, duration) in &t.modes {
            let abs = match balancing::truncate(bal, k, x0) {
                Ok(a) => a,
                Err(e) => {
                    notices.push(format!("{}: k = {k}: {e}", t.name));
                    continue;
                }
            };
            let mut run = |method: String, methods: BoundMethods| {
                let start = Instant::now();
                let r = bounds::compute_bounds(&abs, &t.inputs, *duration, &methods);
                let time_ms = timing.then(|| start.elapsed().as_secs_f64() * 1e3);
                let row = match r {
                    Ok(r) => BenchRow {
                        benchmark: t.name.clone(),
                        n: t.n,
                        mode: *mode,
                        k,
                        method,
                        e1: r.bound.e1,
                        e2: r.bound.e2,
                        delta: r.bound.delta,
                        time_ms,
                        error: None,
                    },
                    Err(e) => BenchRow {
                        benchmark: t.name.clone(),
                        n: t.n,
                        mode: *mode,
                        k,
                        method,
                        e1: vec![],
                        e2: vec![],
                        delta: vec![],
                        time_ms,
                        error: Some(e.to_string()),
                    },
                };
                rows.push(row);
            };
            for (e1, e2) in PAIRS {
                run(label(e1, e2), BoundMethods::only(e1, e2));
            }
            run("best".into(), BoundMethods::default());
        }
    }
    rows
}

/// Bound table for the motor system and any readable extra manifests.
pub fn run(ks: &[usize], extra: &[PathBuf], timing: bool) -> Result<BenchReport, CliError> {
    let mut notices = Vec::new();
    let mut targets = vec![target(&benchmarks::motor()?)?];
    for path in extra {
        if !path.exists() {
            notices.push(format!("skipping {}: file not found", path.display()));
            continue;
        }
        match model::parse_problem(path).map_err(CliError::from).and_then(|p| target(&p)) {
            Ok(t) => targets.push(t),
            Err(CliError::Run(e)) => notices.push(format!("skipping {}: {e}", path.display())),
            Err(e) => return Err(e),
        }
    }
    let mut rows = Vec::new();
    for t in &targets {
        rows.extend(rows_for(t, ks, timing, &mut notices));
    }
    for n in &notices {
        eprintln!("notice: {n}");
    }
    Ok(BenchReport { rows, notices })
}

pub fn render(r: &BenchReport) -> Report {
    let timed = r.rows.iter().any(|row| row.time_ms.is_some());
    let mut header = vec!["benchmark", "n", "mode", "k", "method", "e1", "e2", "delta"];
    if timed {
        header.push("time_ms");
    }
    let cell = |row: &BenchRow, v: &[f64]| {
        if row.error.is_some() {
            "-".to_string()
        } else {
            output::vec_text(v)
        }
    };
    let text_rows: Vec<Vec<String>> = r
        .rows
        .iter()
        .map(|row| {
            let mut cells = vec![
                row.benchmark.clone(),
                row.n.to_string(),
                row.mode.map_or("-".into(), |m| (m + 1).to_string()),
                row.k.to_string(),
                row.method.clone(),
                cell(row, &row.e1),
                cell(row, &row.e2),
                row.error.clone().unwrap_or_else(|| output::vec_text(&row.delta)),
            ];
            if let Some(t) = row.time_ms {
                cells.push(format!("{t:.2}"));
            } else if timed {
                cells.push("-".into());
            }
            cells
        })
        .collect();

    let mut csv_header = vec!["benchmark", "n", "mode", "k", "method", "output", "e1", "e2", "delta"];
    if timed {
        csv_header.push("time_ms");
    }
    let mut csv_rows = Vec::new();
    for row in &r.rows {
        for i in 0..row.delta.len() {
            let mut cells = vec![
                row.benchmark.clone(),
                row.n.to_string(),
                row.mode.map_or("-".into(), |m| (m + 1).to_string()),
                row.k.to_string(),
                row.method.clone(),
                i.to_string(),
                format!("{:e}", row.e1[i]),
                format!("{:e}", row.e2[i]),
                format!("{:e}", row.delta[i]),
            ];
            if timed {
                cells.push(row.time_ms.map_or("-".into(), |t| format!("{t:.3}")));
            }
            csv_rows.push(cells);
        }
    }
    let mut text = output::table(&header, &text_rows);
    for n in &r.notices {
        text += &format!("notice: {n}\n");
    }
    Report {
        json: json!({ "rows": r.rows, "notices": r.notices }),
        text,
        csv: Some(output::csv(&csv_header, &csv_rows)),
    }
}
