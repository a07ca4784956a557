//! Systems, sets and safety specifications, plus on-disk model descriptions.

pub(crate) mod manifest;
pub mod mtx;

pub use manifest::{parse_problem, problem_from_str, problem_to_string, serialize_problem, SpecDoc, FORMAT_VERSION};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Relative tolerance used to accept a matrix as symmetric.
pub const SYM_TOL: f64 = 1e-10;

fn dim_err(matrix: &str, expected: String, found: String) -> Error {
    Error::DimensionMismatch { matrix: matrix.to_string(), expected, found }
}

fn check_finite(name: &str, m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(name.to_string()))
    }
}

/// Continuous-time LTI system `ẋ = Ax + Bu`, `y = Cx`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
}

impl LtiSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Err(dim_err("A", "at least 1x1".into(), "0x0".into()));
        }
        if a.ncols() != n {
            return Err(dim_err("A", format!("{n}x{n}"), format!("{}x{}", a.nrows(), a.ncols())));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(dim_err("B", format!("{n}xm with m >= 1"), format!("{}x{}", b.nrows(), b.ncols())));
        }
        if c.ncols() != n || c.nrows() == 0 {
            return Err(dim_err("C", format!("pxn with n = {n}, p >= 1"), format!("{}x{}", c.nrows(), c.ncols())));
        }
        check_finite("A", &a)?;
        check_finite("B", &b)?;
        check_finite("C", &c)?;
        Ok(LtiSystem { a, b, c })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// State dimension `n`.
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// Input dimension `m`.
    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    /// Output dimension `p`.
    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    /// Similarity transform `(TAT⁻¹, TB, CT⁻¹)`.
    pub fn transformed(&self, t: &DMatrix<f64>) -> Result<LtiSystem> {
        let t_inv =
            t.clone().try_inverse().ok_or_else(|| Error::InvalidArgument("similarity transform is singular".into()))?;
        LtiSystem::new(t * &self.a * &t_inv, t * &self.b, &self.c * &t_inv)
    }
}

/// Outcome of a stability check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub stable: bool,
    /// Largest real part over the spectrum of `A`.
    pub abscissa: f64,
}

/// Default stability margin, `1e-9` relative to `‖A‖_F`.
pub fn default_stability_margin(sys: &LtiSystem) -> f64 {
    1e-9 * sys.a().norm()
}

/// Decides whether every eigenvalue of `A` has real part below `-margin`.
pub fn check_stability(sys: &LtiSystem, margin: f64) -> Result<StabilityReport> {
    if !(margin >= 0.0) {
        return Err(Error::InvalidArgument(format!("stability margin must be >= 0, got {margin}")));
    }
    let abscissa = spectral_abscissa(sys.a())?;
    Ok(StabilityReport { stable: abscissa < -margin, abscissa })
}

pub(crate) fn spectral_abscissa(a: &DMatrix<f64>) -> Result<f64> {
    let (_, t) = linalg::real_schur(a)?;
    let eig = linalg::quasi_triangular_eigenvalues(&t)?;
    Ok(eig.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max))
}

pub(crate) fn require_stable(sys: &LtiSystem) -> Result<()> {
    let margin = default_stability_margin(sys);
    let report = check_stability(sys, margin)?;
    if report.stable {
        Ok(())
    } else {
        Err(Error::Unstable { abscissa: report.abscissa, margin })
    }
}

/// Axis-aligned box `{x : lb ≤ x ≤ ub}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperBox {
    lb: DVector<f64>,
    ub: DVector<f64>,
}

impl HyperBox {
    pub fn new(lb: DVector<f64>, ub: DVector<f64>) -> Result<Self> {
        if lb.len() != ub.len() {
            return Err(Error::InvalidBox(format!(
                "lower bound has {} entries, upper bound has {}",
                lb.len(),
                ub.len()
            )));
        }
        for i in 0..lb.len() {
            if !lb[i].is_finite() || !ub[i].is_finite() {
                return Err(Error::InvalidBox(format!("non-finite bound in coordinate {i}")));
            }
            if lb[i] > ub[i] {
                return Err(Error::InvalidBox(format!("lb > ub in coordinate {i}: {} > {}", lb[i], ub[i])));
            }
        }
        Ok(HyperBox { lb, ub })
    }

    pub fn from_slices(lb: &[f64], ub: &[f64]) -> Result<Self> {
        HyperBox::new(DVector::from_column_slice(lb), DVector::from_column_slice(ub))
    }

    /// Degenerate box holding a single point.
    pub fn point(x: DVector<f64>) -> Result<Self> {
        HyperBox::new(x.clone(), x)
    }

    pub fn lb(&self) -> &DVector<f64> {
        &self.lb
    }

    pub fn ub(&self) -> &DVector<f64> {
        &self.ub
    }

    pub fn dim(&self) -> usize {
        self.lb.len()
    }

    pub fn center(&self) -> DVector<f64> {
        (&self.lb + &self.ub) * 0.5
    }

    pub fn half_widths(&self) -> DVector<f64> {
        (&self.ub - &self.lb) * 0.5
    }

    /// `max_i max(|lb_i|, |ub_i|)`.
    pub fn inf_norm(&self) -> f64 {
        self.lb.iter().zip(self.ub.iter()).map(|(l, u)| l.abs().max(u.abs())).fold(0.0, f64::max)
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.len() == self.dim() && (0..self.dim()).all(|i| x[i] >= self.lb[i] - tol && x[i] <= self.ub[i] + tol)
    }

    /// Coordinates with non-zero width; only these generate distinct vertices.
    pub fn free_coordinates(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.ub[i] > self.lb[i]).collect()
    }

    /// Vertex selected by the bits of `index` over the free coordinates.
    pub fn vertex(&self, free: &[usize], index: u64) -> DVector<f64> {
        let mut v = self.lb.clone();
        for (bit, &i) in free.iter().enumerate() {
            if (index >> bit) & 1 == 1 {
                v[i] = self.ub[i];
            }
        }
        v
    }

    /// Componentwise-exact box hull of the linear image `{Mx : x ∈ self}`.
    pub fn linear_image_hull(&self, m: &DMatrix<f64>) -> Result<HyperBox> {
        if m.ncols() != self.dim() {
            return Err(dim_err("map", format!("?x{}", self.dim()), format!("{}x{}", m.nrows(), m.ncols())));
        }
        let c = m * self.center();
        let r = m.abs() * self.half_widths();
        HyperBox::new(&c - &r, &c + &r)
    }
}

/// Whether a specification describes the safe region or the unsafe region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Safe,
    Unsafe,
}

/// `{y : Γy + Ψ ≤ 0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolytopeSpec {
    gamma: DMatrix<f64>,
    psi: DVector<f64>,
    polarity: Polarity,
}

impl PolytopeSpec {
    pub fn new(gamma: DMatrix<f64>, psi: DVector<f64>, polarity: Polarity) -> Result<Self> {
        if gamma.nrows() != psi.len() || gamma.nrows() == 0 || gamma.ncols() == 0 {
            return Err(dim_err(
                "Gamma",
                format!("{}xp with p >= 1", psi.len()),
                format!("{}x{}", gamma.nrows(), gamma.ncols()),
            ));
        }
        check_finite("Gamma", &gamma)?;
        if psi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Psi".into()));
        }
        Ok(PolytopeSpec { gamma, psi, polarity })
    }

    /// The box `lb ≤ y ≤ ub` written as a polytope with `2p` rows.
    pub fn output_box(lb: &[f64], ub: &[f64], polarity: Polarity) -> Result<Self> {
        let bx = HyperBox::from_slices(lb, ub)?;
        let p = bx.dim();
        let mut gamma = DMatrix::zeros(2 * p, p);
        let mut psi = DVector::zeros(2 * p);
        for i in 0..p {
            gamma[(2 * i, i)] = 1.0;
            psi[2 * i] = -bx.ub()[i];
            gamma[(2 * i + 1, i)] = -1.0;
            psi[2 * i + 1] = bx.lb()[i];
        }
        PolytopeSpec::new(gamma, psi, polarity)
    }

    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    pub fn psi(&self) -> &DVector<f64> {
        &self.psi
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn output_dim(&self) -> usize {
        self.gamma.ncols()
    }

    /// `max_i (Γy + Ψ)_i`; the point is inside iff this is `≤ 0`.
    pub fn max_violation(&self, y: &DVector<f64>) -> f64 {
        (&self.gamma * y + &self.psi).max()
    }
}

/// `{y : (y − a)ᵀ Q (y − a) ≤ R²}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidSpec {
    q: DMatrix<f64>,
    center: DVector<f64>,
    radius: f64,
    polarity: Polarity,
}

impl EllipsoidSpec {
    pub fn new(q: DMatrix<f64>, center: DVector<f64>, radius: f64, polarity: Polarity) -> Result<Self> {
        let p = center.len();
        if p == 0 || q.nrows() != p || q.ncols() != p {
            return Err(dim_err("Q", format!("{p}x{p}"), format!("{}x{}", q.nrows(), q.ncols())));
        }
        check_finite("Q", &q)?;
        let asym = (&q - q.transpose()).norm();
        if asym > SYM_TOL * q.norm().max(f64::MIN_POSITIVE) {
            return Err(Error::NotSymmetric { matrix: "Q".into(), asymmetry: asym });
        }
        let (vals, _) = linalg::sym_eig_desc(&q)?;
        let min = vals[p - 1];
        if !(min > 0.0) {
            return Err(Error::NotPositiveDefinite { matrix: "Q".into(), min_eigenvalue: min });
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidArgument(format!("ellipsoid radius must be positive, got {radius}")));
        }
        if center.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ellipsoid center".into()));
        }
        Ok(EllipsoidSpec { q: linalg::symmetrize(&q), center, radius, polarity })
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn output_dim(&self) -> usize {
        self.center.len()
    }

    /// `sqrt((y − a)ᵀ Q (y − a))`.
    pub fn q_norm(&self, y: &DVector<f64>) -> f64 {
        let d = y - &self.center;
        d.dot(&(&self.q * &d)).max(0.0).sqrt()
    }
}

/// A safety requirement on the outputs.
#[derive(Debug, Clone, PartialEq)]
pub enum SafetySpec {
    Polytope(PolytopeSpec),
    Ellipsoid(EllipsoidSpec),
}

impl SafetySpec {
    pub fn output_dim(&self) -> usize {
        match self {
            SafetySpec::Polytope(s) => s.output_dim(),
            SafetySpec::Ellipsoid(s) => s.output_dim(),
        }
    }

    pub fn polarity(&self) -> Polarity {
        match self {
            SafetySpec::Polytope(s) => s.polarity(),
            SafetySpec::Ellipsoid(s) => s.polarity(),
        }
    }

    /// Whether the output `y` of the full-order system meets this requirement.
    pub fn is_satisfied_by(&self, y: &DVector<f64>) -> bool {
        let inside = match self {
            SafetySpec::Polytope(s) => s.max_violation(y) <= 0.0,
            SafetySpec::Ellipsoid(s) => s.q_norm(y) <= s.radius(),
        };
        match self.polarity() {
            Polarity::Safe => inside,
            Polarity::Unsafe => !inside,
        }
    }
}

/// One mode of a periodically switched system.
#[derive(Debug, Clone, PartialEq)]
pub struct PssMode {
    pub system: LtiSystem,
    /// Dwell time of the mode in seconds.
    pub duration: f64,
    /// Image of the reset map applied on entry to the mode.
    pub initial_set: HyperBox,
}

/// Periodically switched system with state resets at every switch.
#[derive(Debug, Clone, PartialEq)]
pub struct PssSystem {
    modes: Vec<PssMode>,
}

impl PssSystem {
    pub fn new(modes: Vec<PssMode>) -> Result<Self> {
        let first =
            modes.first().ok_or_else(|| Error::InvalidArgument("a switched system needs at least one mode".into()))?;
        let (n, m, p) = (first.system.order(), first.system.inputs(), first.system.outputs());
        for (i, mode) in modes.iter().enumerate() {
            let s = &mode.system;
            if (s.order(), s.inputs(), s.outputs()) != (n, m, p) {
                return Err(dim_err(
                    &format!("mode {} system", i + 1),
                    format!("n={n}, m={m}, p={p}"),
                    format!("n={}, m={}, p={}", s.order(), s.inputs(), s.outputs()),
                ));
            }
            if !(mode.duration > 0.0) || !mode.duration.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "mode {} duration must be positive, got {}",
                    i + 1,
                    mode.duration
                )));
            }
            if mode.initial_set.dim() != n {
                return Err(dim_err(
                    &format!("mode {} x0", i + 1),
                    format!("{n} coordinates"),
                    format!("{}", mode.initial_set.dim()),
                ));
            }
            require_stable(s)?;
        }
        Ok(PssSystem { modes })
    }

    pub fn modes(&self) -> &[PssMode] {
        &self.modes
    }

    pub fn order(&self) -> usize {
        self.modes[0].system.order()
    }

    pub fn inputs(&self) -> usize {
        self.modes[0].system.inputs()
    }

    pub fn outputs(&self) -> usize {
        self.modes[0].system.outputs()
    }

    /// Length of one switching period.
    pub fn period(&self) -> f64 {
        self.modes.iter().map(|m| m.duration).sum()
    }
}

/// The system part of a verification problem.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSystem {
    Lti { system: LtiSystem, x0: HyperBox },
    Pss(PssSystem),
}

impl ProblemSystem {
    pub fn order(&self) -> usize {
        match self {
            ProblemSystem::Lti { system, .. } => system.order(),
            ProblemSystem::Pss(p) => p.order(),
        }
    }

    pub fn inputs(&self) -> usize {
        match self {
            ProblemSystem::Lti { system, .. } => system.inputs(),
            ProblemSystem::Pss(p) => p.inputs(),
        }
    }

    pub fn outputs(&self) -> usize {
        match self {
            ProblemSystem::Lti { system, .. } => system.outputs(),
            ProblemSystem::Pss(p) => p.outputs(),
        }
    }
}

/// A time-bounded safety verification problem.
///
/// Several specifications may be given; the system is safe when it meets
/// all of them.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationProblem {
    name: String,
    system: ProblemSystem,
    inputs: HyperBox,
    specs: Vec<SafetySpec>,
    t_f: f64,
}

impl VerificationProblem {
    pub fn new(
        name: impl Into<String>,
        system: ProblemSystem,
        inputs: HyperBox,
        specs: Vec<SafetySpec>,
        t_f: f64,
    ) -> Result<Self> {
        if let ProblemSystem::Lti { system: s, x0 } = &system {
            if x0.dim() != s.order() {
                return Err(dim_err("x0", format!("{} coordinates", s.order()), format!("{}", x0.dim())));
            }
        }
        if inputs.dim() != system.inputs() {
            return Err(dim_err("input", format!("{} coordinates", system.inputs()), format!("{}", inputs.dim())));
        }
        if specs.is_empty() {
            return Err(Error::InvalidArgument("at least one safety specification is required".into()));
        }
        for (i, spec) in specs.iter().enumerate() {
            if spec.output_dim() != system.outputs() {
                return Err(dim_err(
                    &format!("spec {}", i + 1),
                    format!("{} outputs", system.outputs()),
                    format!("{}", spec.output_dim()),
                ));
            }
        }
        if !(t_f > 0.0) || !t_f.is_finite() {
            return Err(Error::InvalidArgument(format!("t_f must be positive and finite, got {t_f}")));
        }
        Ok(VerificationProblem { name: name.into(), system, inputs, specs, t_f })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn system(&self) -> &ProblemSystem {
        &self.system
    }

    pub fn inputs(&self) -> &HyperBox {
        &self.inputs
    }

    pub fn specs(&self) -> &[SafetySpec] {
        &self.specs
    }

    pub fn t_f(&self) -> f64 {
        self.t_f
    }
}
