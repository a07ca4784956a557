use nalgebra::{DMatrix, DVector};

use super::{ReachStep, Zonotope};
use crate::error::{Error, Result};
use crate::linalg;
use crate::spectransform::{SafeRegion, TransformedSpec, UnsafeRegion};

/// Three-way result of checking reach sets against a transformed spec.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckOutcome {
    Safe,
    /// Step `step` meets the transformed unsafe region.
    MaybeUnsafe {
        step: usize,
    },
    /// Step `step` is neither proved safe nor shown to meet the unsafe region.
    Indeterminate {
        step: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum StepStatus {
    Proven,
    Intersects,
    Unknown,
}

const GILBERT_ITERS: usize = 2000;

/// Maps `y ↦ Λ^{1/2}Eᵀ(y − a)` so the `Q`-norm becomes the Euclidean norm.
fn whitened(z: &Zonotope, q: &DMatrix<f64>, center: &DVector<f64>) -> Result<Zonotope> {
    let (lam, e) = linalg::sym_eig_desc(q)?;
    let mut l = e.transpose();
    for i in 0..lam.len() {
        l.row_mut(i).scale_mut(lam[i].max(0.0).sqrt());
    }
    Ok(z.translate(&-center).linear_map(&l))
}

/// Gilbert's minimum-norm iteration on a zonotope. Returns a lower bound on
/// `min ‖z‖`, and the norm of a point of the set (an upper bound). Stops as
/// soon as the interval excludes `radius` on either side.
fn min_norm_bounds(z: &Zonotope, radius: f64) -> (f64, f64) {
    let mut x = z.center().clone();
    let mut lower = 0.0f64;
    for _ in 0..GILBERT_ITERS {
        let nx = x.norm();
        if nx == 0.0 {
            return (0.0, 0.0);
        }
        let s = z.support_point(&-&x);
        lower = lower.max(x.dot(&s) / nx);
        if lower > radius || nx <= radius || nx - lower <= 1e-12 * nx {
            return (lower, nx);
        }
        let d = &x - &s;
        let dd = d.norm_squared();
        if dd == 0.0 {
            return (lower, nx);
        }
        let t = (x.dot(&d) / dd).clamp(0.0, 1.0);
        x -= d * t;
    }
    (lower, x.norm())
}

/// A lower bound on `max ‖z‖` from a few support points.
fn max_norm_lower(z: &Zonotope) -> f64 {
    let n = z.dim();
    let mut best = z.center().norm();
    let mut dirs = vec![z.center().clone()];
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        dirs.push(-&e);
        dirs.push(e);
    }
    for g in z.generators().column_iter() {
        dirs.push(g.clone_owned());
    }
    for d in dirs {
        if d.norm() > 0.0 {
            best = best.max(z.support_point(&d).norm());
        }
    }
    best
}

fn in_polytope(gamma: &DMatrix<f64>, psi: &DVector<f64>, y: &DVector<f64>) -> bool {
    (gamma * y + psi).max() <= 0.0
}

fn step_status(z: &Zonotope, spec: &TransformedSpec) -> Result<StepStatus> {
    // safe-region specs are proved by containment, unsafe-region specs by
    // disjointness
    let proven = match &spec.safe {
        Some(SafeRegion::Polytope { gamma, psi }) => {
            gamma.row_iter().zip(psi.iter()).all(|(row, p)| z.support(&row.transpose()) + p <= 0.0)
        }
        Some(SafeRegion::Ellipsoid { q, center, radius }) => whitened(z, q, center)?.norm_upper() <= *radius,
        Some(SafeRegion::Empty) => false,
        None => match &spec.unsafe_region {
            UnsafeRegion::Polytope { gamma, psi } => {
                gamma.row_iter().zip(psi.iter()).any(|(row, p)| -z.support(&-row.transpose()) + p > 0.0)
            }
            UnsafeRegion::EllipsoidInterior { q, center, radius } => {
                min_norm_bounds(&whitened(z, q, center)?, *radius).0 > *radius
            }
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unsafe-region specification with complement-type region {other:?}"
                )))
            }
        },
    };
    if proven {
        return Ok(StepStatus::Proven);
    }
    let meets = match &spec.unsafe_region {
        UnsafeRegion::HalfspaceUnion { gamma, psi } => {
            gamma.row_iter().zip(psi.iter()).any(|(row, p)| z.support(&row.transpose()) + p > 0.0)
        }
        UnsafeRegion::EllipsoidExterior { q, center, radius } => max_norm_lower(&whitened(z, q, center)?) > *radius,
        UnsafeRegion::EllipsoidInterior { q, center, radius } => {
            min_norm_bounds(&whitened(z, q, center)?, *radius).1 <= *radius
        }
        UnsafeRegion::Polytope { gamma, psi } => {
            let mut candidates = vec![z.center().clone()];
            for row in gamma.row_iter() {
                candidates.push(z.support_point(&-row.transpose()));
            }
            candidates.iter().any(|y| in_polytope(gamma, psi, y))
        }
    };
    Ok(if meets { StepStatus::Intersects } else { StepStatus::Unknown })
}

/// Safe iff every step set is proved safe, MaybeUnsafe if some step set meets
/// the transformed unsafe region, else Indeterminate.
pub fn check_spec(steps: &[ReachStep], spec: &TransformedSpec) -> Result<CheckOutcome> {
    let mut first_unknown = None;
    for (i, s) in steps.iter().enumerate() {
        if s.set.dim() != spec.delta.len() {
            return Err(Error::DimensionMismatch {
                matrix: "reach set".into(),
                expected: format!("{} outputs", spec.delta.len()),
                found: format!("{}", s.set.dim()),
            });
        }
        match step_status(&s.set, spec)? {
            StepStatus::Proven => {}
            StepStatus::Intersects => return Ok(CheckOutcome::MaybeUnsafe { step: i }),
            StepStatus::Unknown => {
                first_unknown.get_or_insert(i);
            }
        }
    }
    Ok(match first_unknown {
        None => CheckOutcome::Safe,
        Some(step) => CheckOutcome::Indeterminate { step },
    })
}

/// One outcome per specification.
pub fn check_specs(steps: &[ReachStep], specs: &[TransformedSpec]) -> Result<Vec<CheckOutcome>> {
    specs.iter().map(|s| check_spec(steps, s)).collect()
}

impl CheckOutcome {
    /// Conjunction: MaybeUnsafe dominates Indeterminate, which dominates Safe.
    pub fn and(self, other: CheckOutcome) -> CheckOutcome {
        use CheckOutcome::*;
        match (self, other) {
            (MaybeUnsafe { .. }, _) => self,
            (_, MaybeUnsafe { .. }) => other,
            (Indeterminate { .. }, _) => self,
            _ => other,
        }
    }

    pub fn is_safe(self) -> bool {
        self == CheckOutcome::Safe
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EllipsoidSpec, Polarity, PolytopeSpec};
    use crate::spectransform::{transform_ellipsoid, transform_polytope, transform_unsafe_ellipsoid};
    use nalgebra::dvector;

    fn step(z: Zonotope) -> Vec<ReachStep> {
        vec![ReachStep { t0: 0.0, t1: 1.0, set: z }]
    }

    #[test]
    fn three_way_split_on_polytope() {
        let spec = PolytopeSpec::output_box(&[-1.0, -1.0], &[1.0, 1.0], Polarity::Safe).unwrap();
        let t = transform_polytope(&spec, &dvector![0.1, 0.1]).unwrap();
        let inside = Zonotope::from_box(dvector![0.0, 0.0], &dvector![0.5, 0.5]);
        assert_eq!(check_spec(&step(inside), &t).unwrap(), CheckOutcome::Safe);
        let straddle = Zonotope::from_box(dvector![0.85, 0.0], &dvector![0.1, 0.1]);
        assert_eq!(check_spec(&step(straddle), &t).unwrap(), CheckOutcome::Indeterminate { step: 0 });
        let outside = Zonotope::from_box(dvector![1.5, 0.0], &dvector![0.1, 0.1]);
        assert_eq!(check_spec(&step(outside), &t).unwrap(), CheckOutcome::MaybeUnsafe { step: 0 });
    }

    #[test]
    fn unsafe_ellipse_centered_set() {
        let e = EllipsoidSpec::new(DMatrix::identity(2, 2), dvector![1.0, 1.0], 0.5, Polarity::Unsafe).unwrap();
        let t = transform_unsafe_ellipsoid(&e, &dvector![0.0, 0.0]).unwrap();
        let z = Zonotope::from_box(dvector![1.0, 1.0], &dvector![0.1, 0.1]);
        assert_eq!(check_spec(&step(z), &t).unwrap(), CheckOutcome::MaybeUnsafe { step: 0 });
        let far = Zonotope::new(dvector![0.0, 0.0], DMatrix::from_column_slice(2, 2, &[0.3, -0.1, 0.1, 0.2])).unwrap();
        assert_eq!(check_spec(&step(far), &t).unwrap(), CheckOutcome::Safe);
    }

    #[test]
    fn safe_ellipse_containment() {
        let e = EllipsoidSpec::new(DMatrix::identity(2, 2), dvector![0.0, 0.0], 1.0, Polarity::Safe).unwrap();
        let t = transform_ellipsoid(&e, &dvector![0.0, 0.0]).unwrap();
        let z = Zonotope::from_box(dvector![0.0, 0.0], &dvector![0.5, 0.5]);
        assert_eq!(check_spec(&step(z), &t).unwrap(), CheckOutcome::Safe);
        let big = Zonotope::from_box(dvector![0.0, 0.0], &dvector![1.0, 1.0]);
        assert_eq!(check_spec(&step(big), &t).unwrap(), CheckOutcome::MaybeUnsafe { step: 0 });
    }

    #[test]
    fn gilbert_bounds_bracket_distance() {
        let z = Zonotope::from_box(dvector![3.0, 4.0], &dvector![1.0, 1.0]);
        let exact = (2.0f64 * 2.0 + 3.0 * 3.0).sqrt();
        let (lo, hi) = min_norm_bounds(&z, exact);
        assert!(lo <= exact + 1e-12 && hi >= exact - 1e-12);
        assert!(hi - lo < 1e-6);
    }
}
