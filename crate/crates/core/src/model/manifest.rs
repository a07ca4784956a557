//! JSON problem manifests.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "name": "decay",
//!   "type": "lti",
//!   "matrices": { "A": "A.mtx", "B": [[1.0]], "C": [[1.0]] },
//!   "x0": { "lb": [-1.0], "ub": [1.0] },
//!   "input": { "lb": [0.0], "ub": [1.0] },
//!   "spec": { "kind": "polytope", "polarity": "safe", "gamma": [[1.0]], "psi": [-2.0] },
//!   "t_f": 5.0
//! }
//! ```
//!
//! A matrix is either a path to a MatrixMarket file, relative to the
//! manifest, or an inline list of rows. `spec` may also be a list, in which
//! case every entry must hold. Switched systems use `"type": "pss"` and a
//! `modes` list of `{matrices, duration, x0}` instead of `matrices` and `x0`.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::mtx;
use super::{
    EllipsoidSpec, HyperBox, LtiSystem, Polarity, PolytopeSpec, ProblemSystem, PssMode, PssSystem, SafetySpec,
    VerificationProblem,
};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

fn format_version() -> u32 {
    FORMAT_VERSION
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestDoc {
    #[serde(default = "format_version")]
    format_version: u32,
    name: String,
    #[serde(rename = "type")]
    kind: SystemKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    matrices: Option<MatricesDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x0: Option<BoxDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    modes: Option<Vec<ModeDoc>>,
    input: BoxDoc,
    spec: OneOrMany,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t_f: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
enum SystemKind {
    Lti,
    Pss,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatricesDoc {
    #[serde(rename = "A")]
    a: MatrixRef,
    #[serde(rename = "B")]
    b: MatrixRef,
    #[serde(rename = "C")]
    c: MatrixRef,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum MatrixRef {
    Path(String),
    Inline(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModeDoc {
    matrices: MatricesDoc,
    duration: f64,
    x0: BoxDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxDoc {
    lb: Vec<f64>,
    ub: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(SpecDoc),
    Many(Vec<SpecDoc>),
}

/// Serialized form of a [`SafetySpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SpecDoc {
    Polytope { polarity: Polarity, gamma: Vec<Vec<f64>>, psi: Vec<f64> },
    Ellipsoid { polarity: Polarity, q: Vec<Vec<f64>>, center: Vec<f64>, radius: f64 },
}

impl SpecDoc {
    pub fn to_spec(&self) -> Result<SafetySpec> {
        match self {
            SpecDoc::Polytope { polarity, gamma, psi } => Ok(SafetySpec::Polytope(PolytopeSpec::new(
                rows_to_matrix("gamma", gamma)?,
                DVector::from_column_slice(psi),
                *polarity,
            )?)),
            SpecDoc::Ellipsoid { polarity, q, center, radius } => Ok(SafetySpec::Ellipsoid(EllipsoidSpec::new(
                rows_to_matrix("Q", q)?,
                DVector::from_column_slice(center),
                *radius,
                *polarity,
            )?)),
        }
    }

    pub fn from_spec(spec: &SafetySpec) -> SpecDoc {
        match spec {
            SafetySpec::Polytope(s) => SpecDoc::Polytope {
                polarity: s.polarity(),
                gamma: matrix_to_rows(s.gamma()),
                psi: s.psi().iter().copied().collect(),
            },
            SafetySpec::Ellipsoid(s) => SpecDoc::Ellipsoid {
                polarity: s.polarity(),
                q: matrix_to_rows(s.q()),
                center: s.center().iter().copied().collect(),
                radius: s.radius(),
            },
        }
    }
}

pub(crate) fn rows_to_matrix(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(Error::DimensionMismatch {
            matrix: name.to_string(),
            expected: "a non-empty list of rows".into(),
            found: format!("{nrows}x{ncols}"),
        });
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(Error::DimensionMismatch {
            matrix: name.to_string(),
            expected: format!("{ncols} entries in every row"),
            found: format!("{} entries in row {}", r.len(), i + 1),
        });
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub(crate) fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn manifest_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Manifest { path: path.to_path_buf(), message: message.into() }
}

fn load_matrix(r: &MatrixRef, name: &str, base: &Path) -> Result<DMatrix<f64>> {
    match r {
        MatrixRef::Path(p) => mtx::read_matrix_market(&base.join(p)),
        MatrixRef::Inline(rows) => rows_to_matrix(name, rows),
    }
}

fn load_system(m: &MatricesDoc, base: &Path) -> Result<LtiSystem> {
    LtiSystem::new(load_matrix(&m.a, "A", base)?, load_matrix(&m.b, "B", base)?, load_matrix(&m.c, "C", base)?)
}

fn load_box(b: &BoxDoc) -> Result<HyperBox> {
    HyperBox::from_slices(&b.lb, &b.ub)
}

/// Reads and validates a manifest and every matrix it references.
pub fn parse_problem(path: &Path) -> Result<VerificationProblem> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    problem_from_str_at(&text, base, path)
}

/// Parses manifest text; relative matrix paths resolve against `base`.
pub fn problem_from_str(text: &str, base: &Path) -> Result<VerificationProblem> {
    problem_from_str_at(text, base, Path::new("<manifest>"))
}

fn problem_from_str_at(text: &str, base: &Path, origin: &Path) -> Result<VerificationProblem> {
    let doc: ManifestDoc = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    if doc.format_version != FORMAT_VERSION {
        return Err(manifest_err(origin, format!("unsupported format_version {}", doc.format_version)));
    }
    let system = match doc.kind {
        SystemKind::Lti => {
            if doc.modes.is_some() {
                return Err(manifest_err(origin, "'modes' is only allowed for type \"pss\""));
            }
            let m = doc.matrices.as_ref().ok_or_else(|| manifest_err(origin, "missing 'matrices'"))?;
            let x0 = doc.x0.as_ref().ok_or_else(|| manifest_err(origin, "missing 'x0'"))?;
            ProblemSystem::Lti { system: load_system(m, base)?, x0: load_box(x0)? }
        }
        SystemKind::Pss => {
            if doc.matrices.is_some() || doc.x0.is_some() {
                return Err(manifest_err(origin, "type \"pss\" takes per-mode 'matrices' and 'x0' inside 'modes'"));
            }
            let modes = doc.modes.as_ref().ok_or_else(|| manifest_err(origin, "missing 'modes'"))?;
            let modes = modes
                .iter()
                .map(|m| {
                    Ok(PssMode {
                        system: load_system(&m.matrices, base)?,
                        duration: m.duration,
                        initial_set: load_box(&m.x0)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            ProblemSystem::Pss(PssSystem::new(modes)?)
        }
    };
    let specs = match &doc.spec {
        OneOrMany::One(s) => vec![s.to_spec()?],
        OneOrMany::Many(v) => v.iter().map(SpecDoc::to_spec).collect::<Result<_>>()?,
    };
    let t_f = match (doc.t_f, &system) {
        (Some(t), _) => t,
        (None, ProblemSystem::Pss(p)) => p.period(),
        (None, ProblemSystem::Lti { .. }) => return Err(manifest_err(origin, "missing 't_f'")),
    };
    VerificationProblem::new(doc.name, system, load_box(&doc.input)?, specs, t_f)
}

fn box_doc(b: &HyperBox) -> BoxDoc {
    BoxDoc { lb: b.lb().iter().copied().collect(), ub: b.ub().iter().copied().collect() }
}

fn build_doc(
    p: &VerificationProblem,
    mut matrices: impl FnMut(&LtiSystem, Option<usize>) -> Result<MatricesDoc>,
) -> Result<ManifestDoc> {
    let specs: Vec<SpecDoc> = p.specs().iter().map(SpecDoc::from_spec).collect();
    let spec = if specs.len() == 1 {
        OneOrMany::One(specs.into_iter().next().unwrap_or_else(|| unreachable!()))
    } else {
        OneOrMany::Many(specs)
    };
    let mut doc = ManifestDoc {
        format_version: FORMAT_VERSION,
        name: p.name().to_string(),
        kind: SystemKind::Lti,
        matrices: None,
        x0: None,
        modes: None,
        input: box_doc(p.inputs()),
        spec,
        t_f: Some(p.t_f()),
    };
    match p.system() {
        ProblemSystem::Lti { system, x0 } => {
            doc.matrices = Some(matrices(system, None)?);
            doc.x0 = Some(box_doc(x0));
        }
        ProblemSystem::Pss(pss) => {
            doc.kind = SystemKind::Pss;
            doc.modes = Some(
                pss.modes()
                    .iter()
                    .enumerate()
                    .map(|(i, m)| {
                        Ok(ModeDoc {
                            matrices: matrices(&m.system, Some(i + 1))?,
                            duration: m.duration,
                            x0: box_doc(&m.initial_set),
                        })
                    })
                    .collect::<Result<_>>()?,
            );
        }
    }
    Ok(doc)
}

/// Manifest text with every matrix inlined.
pub fn problem_to_string(p: &VerificationProblem) -> Result<String> {
    let doc = build_doc(p, |s, _| {
        Ok(MatricesDoc {
            a: MatrixRef::Inline(matrix_to_rows(s.a())),
            b: MatrixRef::Inline(matrix_to_rows(s.b())),
            c: MatrixRef::Inline(matrix_to_rows(s.c())),
        })
    })?;
    Ok(serde_json::to_string_pretty(&doc)?)
}

/// Writes `path` plus one MatrixMarket file per matrix next to it.
///
/// Returns the paths of all files written, manifest first.
pub fn serialize_problem(p: &VerificationProblem, path: &Path) -> Result<Vec<PathBuf>> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| manifest_err(path, "manifest path needs a UTF-8 file name"))?
        .to_string();
    let mut written = vec![path.to_path_buf()];
    let mut extra = Vec::new();
    let doc = build_doc(p, |s, mode| {
        let prefix = match mode {
            None => stem.clone(),
            Some(i) => format!("{stem}.mode{i}"),
        };
        let mut put = |name: &str, m: &DMatrix<f64>| -> Result<MatrixRef> {
            let file = format!("{prefix}.{name}.mtx");
            let full = dir.join(&file);
            mtx::write_matrix_market(m, &full)?;
            extra.push(full);
            Ok(MatrixRef::Path(file))
        };
        Ok(MatricesDoc { a: put("A", s.a())?, b: put("B", s.b())?, c: put("C", s.c())? })
    })?;
    let text = serde_json::to_string_pretty(&doc)?;
    fs::write(path, text + "\n").map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    written.extend(extra);
    Ok(written)
}
