use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `{c + Gξ : ‖ξ‖_∞ ≤ 1}`; generators are the columns of `G`.
#[derive(Debug, Clone, PartialEq)]
pub struct Zonotope {
    center: DVector<f64>,
    generators: DMatrix<f64>,
}

impl Zonotope {
    pub fn new(center: DVector<f64>, generators: DMatrix<f64>) -> Result<Self> {
        if generators.nrows() != center.len() {
            return Err(Error::DimensionMismatch {
                matrix: "zonotope generators".into(),
                expected: format!("{} rows", center.len()),
                found: format!("{} rows", generators.nrows()),
            });
        }
        Ok(Zonotope { center, generators }.pruned())
    }

    pub fn point(center: DVector<f64>) -> Self {
        let n = center.len();
        Zonotope { center, generators: DMatrix::zeros(n, 0) }
    }

    /// Axis-aligned box with the given center and non-negative radii.
    pub fn from_box(center: DVector<f64>, radii: &DVector<f64>) -> Self {
        let n = center.len();
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            g[(i, i)] = radii[i].abs();
        }
        Zonotope { center, generators: g }.pruned()
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn generators(&self) -> &DMatrix<f64> {
        &self.generators
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.ncols()
    }

    fn pruned(self) -> Self {
        let keep: Vec<usize> =
            (0..self.generators.ncols()).filter(|&j| self.generators.column(j).iter().any(|v| *v != 0.0)).collect();
        if keep.len() == self.generators.ncols() {
            return self;
        }
        let g = self.generators.select_columns(keep.iter());
        Zonotope { center: self.center, generators: g }
    }

    pub fn linear_map(&self, m: &DMatrix<f64>) -> Zonotope {
        Zonotope { center: m * &self.center, generators: m * &self.generators }.pruned()
    }

    pub fn translate(&self, v: &DVector<f64>) -> Zonotope {
        Zonotope { center: &self.center + v, generators: self.generators.clone() }
    }

    pub fn minkowski_sum(&self, other: &Zonotope) -> Zonotope {
        let n = self.dim();
        let (a, b) = (self.num_generators(), other.num_generators());
        let mut g = DMatrix::zeros(n, a + b);
        g.view_mut((0, 0), (n, a)).copy_from(&self.generators);
        g.view_mut((0, a), (n, b)).copy_from(&other.generators);
        Zonotope { center: &self.center + &other.center, generators: g }
    }

    /// Per-coordinate radius of the interval hull.
    pub fn radii(&self) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.generators.row_iter().map(|r| r.iter().map(|v| v.abs()).sum()))
    }

    /// Interval hull as `(lower, upper)`.
    pub fn interval_hull(&self) -> (DVector<f64>, DVector<f64>) {
        let r = self.radii();
        (&self.center - &r, &self.center + &r)
    }

    /// `max_{z ∈ Z} dᵀz`.
    pub fn support(&self, d: &DVector<f64>) -> f64 {
        d.dot(&self.center) + (self.generators.transpose() * d).abs().sum()
    }

    /// The point of `Z` attaining [`Zonotope::support`] in direction `d`.
    pub fn support_point(&self, d: &DVector<f64>) -> DVector<f64> {
        let s = (self.generators.transpose() * d).map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        &self.center + &self.generators * s
    }

    /// An upper bound on `max_{z ∈ Z} ‖z‖₂`.
    pub fn norm_upper(&self) -> f64 {
        let by_gens = self.center.norm() + self.generators.column_iter().map(|c| c.norm()).sum::<f64>();
        let r = self.radii();
        let by_box = self.center.iter().zip(r.iter()).map(|(c, r)| (c.abs() + r).powi(2)).sum::<f64>().sqrt();
        by_gens.min(by_box)
    }

    /// Outer approximation with at most `max_gens` generators (at least `dim`):
    /// the generators with least `‖g‖₁ − ‖g‖_∞` are replaced by their box hull.
    pub fn reduce(&self, max_gens: usize) -> Zonotope {
        let n = self.dim();
        let count = self.num_generators();
        let max_gens = max_gens.max(n);
        if count <= max_gens {
            return self.clone();
        }
        let n_boxed = count - (max_gens - n);
        let mut order: Vec<(f64, usize)> =
            self.generators.column_iter().enumerate().map(|(j, g)| (g.lp_norm(1) - g.amax(), j)).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut boxed = DVector::zeros(n);
        for &(_, j) in &order[..n_boxed] {
            boxed += self.generators.column(j).abs();
        }
        let mut kept: Vec<usize> = order[n_boxed..].iter().map(|x| x.1).collect();
        kept.sort_unstable();
        let kept = self.generators.select_columns(kept.iter());
        Zonotope { center: self.center.clone(), generators: kept }
            .minkowski_sum(&Zonotope::from_box(DVector::zeros(n), &boxed))
    }

    /// Necessary condition for `y ∈ Z`: no axis or generator direction
    /// separates `y` from `Z` by more than `tol`.
    pub fn may_contain(&self, y: &DVector<f64>, tol: f64) -> bool {
        let (lo, hi) = self.interval_hull();
        if y.iter().zip(lo.iter().zip(hi.iter())).any(|(v, (l, h))| *v < l - tol || *v > h + tol) {
            return false;
        }
        for g in self.generators.column_iter() {
            let d = g.clone_owned();
            if d.norm() == 0.0 {
                continue;
            }
            let up = self.support(&d);
            let down = -self.support(&-&d);
            let v = d.dot(y);
            let t = tol * d.norm();
            if v > up + t || v < down - t {
                return false;
            }
        }
        true
    }
}

/// Serialized form: center plus generator columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZonotopeDoc {
    pub center: Vec<f64>,
    pub generators: Vec<Vec<f64>>,
}

impl From<&Zonotope> for ZonotopeDoc {
    fn from(z: &Zonotope) -> Self {
        ZonotopeDoc {
            center: z.center.iter().copied().collect(),
            generators: z.generators.column_iter().map(|c| c.iter().copied().collect()).collect(),
        }
    }
}
