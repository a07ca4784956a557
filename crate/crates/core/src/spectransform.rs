//! Transforming output specifications of a system into specifications of
//! its abstraction.
//!
//! Given per-output bounds `|y_i − y_{r,i}| ≤ δ_i`, the safe region is shrunk
//! and the unsafe region enlarged so that
//! `y_r ∈ safe' ⇒ y ∈ safe` and `y_r ∈ unsafe' ⇒ y ∉ safe`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::manifest::matrix_to_rows;
use crate::model::{EllipsoidSpec, Polarity, PolytopeSpec, SafetySpec};

/// Transformed safe region of the abstraction.
#[derive(Debug, Clone, PartialEq)]
pub enum SafeRegion {
    /// `{y : Γy + Ψ' ≤ 0}`.
    Polytope { gamma: DMatrix<f64>, psi: DVector<f64> },
    /// `{y : (y − a)ᵀQ(y − a) ≤ r²}`.
    Ellipsoid { q: DMatrix<f64>, center: DVector<f64>, radius: f64 },
    /// The margin swallowed the whole region; nothing can be proved safe.
    Empty,
}

/// Transformed unsafe region of the abstraction.
#[derive(Debug, Clone, PartialEq)]
pub enum UnsafeRegion {
    /// `{y : (Γy + Ψ')_i > 0 for some i}`, the outside of a polytope.
    HalfspaceUnion { gamma: DMatrix<f64>, psi: DVector<f64> },
    /// `{y : Γy + Ψ' ≤ 0}`.
    Polytope { gamma: DMatrix<f64>, psi: DVector<f64> },
    /// `{y : (y − a)ᵀQ(y − a) > r²}`.
    EllipsoidExterior { q: DMatrix<f64>, center: DVector<f64>, radius: f64 },
    /// `{y : (y − a)ᵀQ(y − a) ≤ r²}`.
    EllipsoidInterior { q: DMatrix<f64>, center: DVector<f64>, radius: f64 },
}

fn q_norm(q: &DMatrix<f64>, center: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let d = y - center;
    d.dot(&(q * &d)).max(0.0).sqrt()
}

impl UnsafeRegion {
    /// Signed depth of `y`: positive exactly when `y` lies strictly inside.
    pub fn depth(&self, y: &DVector<f64>) -> f64 {
        match self {
            UnsafeRegion::HalfspaceUnion { gamma, psi } => (gamma * y + psi).max(),
            UnsafeRegion::Polytope { gamma, psi } => -(gamma * y + psi).max(),
            UnsafeRegion::EllipsoidExterior { q, center, radius } => q_norm(q, center, y) - radius,
            UnsafeRegion::EllipsoidInterior { q, center, radius } => radius - q_norm(q, center, y),
        }
    }

    /// Membership with the literal inequalities of the region.
    pub fn contains(&self, y: &DVector<f64>) -> bool {
        match self {
            UnsafeRegion::HalfspaceUnion { .. } | UnsafeRegion::EllipsoidExterior { .. } => self.depth(y) > 0.0,
            UnsafeRegion::Polytope { .. } | UnsafeRegion::EllipsoidInterior { .. } => self.depth(y) >= 0.0,
        }
    }

    /// Magnitude used to scale numerical guard bands.
    pub fn scale(&self) -> f64 {
        match self {
            UnsafeRegion::HalfspaceUnion { psi, .. } | UnsafeRegion::Polytope { psi, .. } => psi.amax().max(1.0),
            UnsafeRegion::EllipsoidExterior { radius, .. } | UnsafeRegion::EllipsoidInterior { radius, .. } => {
                radius.max(1.0)
            }
        }
    }
}

impl SafeRegion {
    pub fn contains(&self, y: &DVector<f64>) -> bool {
        match self {
            SafeRegion::Polytope { gamma, psi } => (gamma * y + psi).max() <= 0.0,
            SafeRegion::Ellipsoid { q, center, radius } => q_norm(q, center, y) <= *radius,
            SafeRegion::Empty => false,
        }
    }

    pub fn is_empty_marker(&self) -> bool {
        matches!(self, SafeRegion::Empty)
    }
}

/// The margins that were subtracted or added.
#[derive(Debug, Clone, PartialEq)]
pub enum Margin {
    /// `Δ_i = Σ_j |Γ_ij| δ_j` per polytope row.
    Polytope(DVector<f64>),
    /// `Δ_R = sqrt(Σ_i λ_i (Σ_j |E_ji| δ_j)²)` with the eigenbasis that was used.
    Ellipsoid { delta_r: f64, eigenvalues: DVector<f64>, eigenvectors: DMatrix<f64> },
}

/// A specification restated for the abstraction.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedSpec {
    /// Present for safe-region specifications only.
    pub safe: Option<SafeRegion>,
    pub unsafe_region: UnsafeRegion,
    pub delta: DVector<f64>,
    pub margin: Margin,
    pub polarity: Polarity,
}

impl TransformedSpec {
    /// Whether `y_r` is in the transformed safe region; always `false` for
    /// unsafe-region specifications.
    pub fn safe_contains(&self, y: &DVector<f64>) -> bool {
        self.safe.as_ref().is_some_and(|s| s.contains(y))
    }

    pub fn unsafe_contains(&self, y: &DVector<f64>) -> bool {
        self.unsafe_region.contains(y)
    }
}

fn check_delta(delta: &DVector<f64>, p: usize) -> Result<()> {
    if delta.len() != p {
        return Err(Error::DimensionMismatch {
            matrix: "delta".into(),
            expected: format!("{p} outputs"),
            found: format!("{}", delta.len()),
        });
    }
    if delta.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(Error::InvalidArgument("delta entries must be finite and >= 0".into()));
    }
    Ok(())
}

fn polytope_margin(spec: &PolytopeSpec, delta: &DVector<f64>) -> DVector<f64> {
    spec.gamma().abs() * delta
}

fn ellipsoid_margin(spec: &EllipsoidSpec, delta: &DVector<f64>) -> Result<Margin> {
    let (lam, e) = linalg::sym_eig_desc(spec.q())?;
    // component i of y − y_r along eigenvector i is at most Σ_j |E_ji| δ_j
    let along = e.transpose().abs() * delta;
    let sum: f64 = (0..lam.len()).map(|i| lam[i] * along[i] * along[i]).sum();
    Ok(Margin::Ellipsoid { delta_r: sum.max(0.0).sqrt(), eigenvalues: lam, eigenvectors: e })
}

fn margin_r(m: &Margin) -> f64 {
    match m {
        Margin::Ellipsoid { delta_r, .. } => *delta_r,
        Margin::Polytope(_) => unreachable!("ellipsoid margin expected"),
    }
}

fn require_polarity(actual: Polarity, expected: Polarity) -> Result<()> {
    if actual != expected {
        return Err(Error::InvalidArgument(format!("expected a {expected:?} specification, got {actual:?}")));
    }
    Ok(())
}

/// Safe polytope: `Γy_r + Ψ + Δ ≤ 0` is safe, any row of `Γy_r + Ψ − Δ > 0` unsafe.
pub fn transform_polytope(spec: &PolytopeSpec, delta: &DVector<f64>) -> Result<TransformedSpec> {
    require_polarity(spec.polarity(), Polarity::Safe)?;
    check_delta(delta, spec.output_dim())?;
    let m = polytope_margin(spec, delta);
    Ok(TransformedSpec {
        safe: Some(SafeRegion::Polytope { gamma: spec.gamma().clone(), psi: spec.psi() + &m }),
        unsafe_region: UnsafeRegion::HalfspaceUnion { gamma: spec.gamma().clone(), psi: spec.psi() - &m },
        delta: delta.clone(),
        margin: Margin::Polytope(m),
        polarity: Polarity::Safe,
    })
}

/// Unsafe polytope: enlarged to `Γy_r + Ψ − Δ ≤ 0`.
pub fn transform_unsafe_polytope(spec: &PolytopeSpec, delta: &DVector<f64>) -> Result<TransformedSpec> {
    require_polarity(spec.polarity(), Polarity::Unsafe)?;
    check_delta(delta, spec.output_dim())?;
    let m = polytope_margin(spec, delta);
    Ok(TransformedSpec {
        safe: None,
        unsafe_region: UnsafeRegion::Polytope { gamma: spec.gamma().clone(), psi: spec.psi() - &m },
        delta: delta.clone(),
        margin: Margin::Polytope(m),
        polarity: Polarity::Unsafe,
    })
}

/// Safe ellipsoid: radius `R − Δ_R` is safe, outside radius `R + Δ_R` unsafe.
pub fn transform_ellipsoid(spec: &EllipsoidSpec, delta: &DVector<f64>) -> Result<TransformedSpec> {
    require_polarity(spec.polarity(), Polarity::Safe)?;
    check_delta(delta, spec.output_dim())?;
    let margin = ellipsoid_margin(spec, delta)?;
    let dr = margin_r(&margin);
    let inner = spec.radius() - dr;
    let safe = if inner > 0.0 {
        SafeRegion::Ellipsoid { q: spec.q().clone(), center: spec.center().clone(), radius: inner }
    } else {
        SafeRegion::Empty
    };
    Ok(TransformedSpec {
        safe: Some(safe),
        unsafe_region: UnsafeRegion::EllipsoidExterior {
            q: spec.q().clone(),
            center: spec.center().clone(),
            radius: spec.radius() + dr,
        },
        delta: delta.clone(),
        margin,
        polarity: Polarity::Safe,
    })
}

/// Unsafe ellipsoid: radius enlarged to `R + Δ_R`.
pub fn transform_unsafe_ellipsoid(spec: &EllipsoidSpec, delta: &DVector<f64>) -> Result<TransformedSpec> {
    require_polarity(spec.polarity(), Polarity::Unsafe)?;
    check_delta(delta, spec.output_dim())?;
    let margin = ellipsoid_margin(spec, delta)?;
    let dr = margin_r(&margin);
    Ok(TransformedSpec {
        safe: None,
        unsafe_region: UnsafeRegion::EllipsoidInterior {
            q: spec.q().clone(),
            center: spec.center().clone(),
            radius: spec.radius() + dr,
        },
        delta: delta.clone(),
        margin,
        polarity: Polarity::Unsafe,
    })
}

/// Dispatches on shape and polarity.
pub fn transform(spec: &SafetySpec, delta: &DVector<f64>) -> Result<TransformedSpec> {
    match (spec, spec.polarity()) {
        (SafetySpec::Polytope(s), Polarity::Safe) => transform_polytope(s, delta),
        (SafetySpec::Polytope(s), Polarity::Unsafe) => transform_unsafe_polytope(s, delta),
        (SafetySpec::Ellipsoid(s), Polarity::Safe) => transform_ellipsoid(s, delta),
        (SafetySpec::Ellipsoid(s), Polarity::Unsafe) => transform_unsafe_ellipsoid(s, delta),
    }
}

/// One transformed copy of every specification per mode, using that mode's `δ`.
pub fn transform_pss(specs: &[SafetySpec], deltas: &[DVector<f64>]) -> Result<Vec<Vec<TransformedSpec>>> {
    if deltas.is_empty() {
        return Err(Error::InvalidArgument("one delta vector per mode is required".into()));
    }
    deltas.iter().map(|d| specs.iter().map(|s| transform(s, d)).collect()).collect()
}

/// Serialized form of a [`TransformedSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformedSpecDoc {
    pub polarity: Polarity,
    pub delta: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub safe: Option<RegionDoc>,
    #[serde(rename = "unsafe")]
    pub unsafe_region: RegionDoc,
    pub margin: MarginDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionDoc {
    /// `Γy + Ψ ≤ 0`.
    Polytope {
        gamma: Vec<Vec<f64>>,
        psi: Vec<f64>,
    },
    /// Some row of `Γy + Ψ` is `> 0`.
    HalfspaceUnion {
        gamma: Vec<Vec<f64>>,
        psi: Vec<f64>,
    },
    EllipsoidInterior {
        q: Vec<Vec<f64>>,
        center: Vec<f64>,
        radius: f64,
    },
    EllipsoidExterior {
        q: Vec<Vec<f64>>,
        center: Vec<f64>,
        radius: f64,
    },
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarginDoc {
    Polytope { rows: Vec<f64> },
    Ellipsoid { delta_r: f64, eigenvalues: Vec<f64>, eigenvectors: Vec<Vec<f64>> },
}

fn v(x: &DVector<f64>) -> Vec<f64> {
    x.iter().copied().collect()
}

impl From<&TransformedSpec> for TransformedSpecDoc {
    fn from(t: &TransformedSpec) -> Self {
        let safe = t.safe.as_ref().map(|s| match s {
            SafeRegion::Polytope { gamma, psi } => RegionDoc::Polytope { gamma: matrix_to_rows(gamma), psi: v(psi) },
            SafeRegion::Ellipsoid { q, center, radius } => {
                RegionDoc::EllipsoidInterior { q: matrix_to_rows(q), center: v(center), radius: *radius }
            }
            SafeRegion::Empty => RegionDoc::Empty,
        });
        let unsafe_region = match &t.unsafe_region {
            UnsafeRegion::HalfspaceUnion { gamma, psi } => {
                RegionDoc::HalfspaceUnion { gamma: matrix_to_rows(gamma), psi: v(psi) }
            }
            UnsafeRegion::Polytope { gamma, psi } => RegionDoc::Polytope { gamma: matrix_to_rows(gamma), psi: v(psi) },
            UnsafeRegion::EllipsoidExterior { q, center, radius } => {
                RegionDoc::EllipsoidExterior { q: matrix_to_rows(q), center: v(center), radius: *radius }
            }
            UnsafeRegion::EllipsoidInterior { q, center, radius } => {
                RegionDoc::EllipsoidInterior { q: matrix_to_rows(q), center: v(center), radius: *radius }
            }
        };
        let margin = match &t.margin {
            Margin::Polytope(m) => MarginDoc::Polytope { rows: v(m) },
            Margin::Ellipsoid { delta_r, eigenvalues, eigenvectors } => MarginDoc::Ellipsoid {
                delta_r: *delta_r,
                eigenvalues: v(eigenvalues),
                eigenvectors: matrix_to_rows(eigenvectors),
            },
        };
        TransformedSpecDoc { polarity: t.polarity, delta: v(&t.delta), safe, unsafe_region, margin }
    }
}
