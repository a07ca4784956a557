//! Continuous-time Lyapunov equations and the two system gramians.
//!
//! Equations `AP + PAᵀ + Q = 0` are solved by the Bartels–Stewart method:
//! with the real Schur form `A = UTUᵀ` the problem becomes
//! `TY + YTᵀ = −UᵀQU`, which is solved block column by block column from
//! the bottom-right corner using 1×1 and 2×2 diagonal blocks of `T`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{self, LtiSystem};

/// Largest accepted relative residual `‖AP+PAᵀ+Q‖_F / (2‖A‖_F‖P‖_F + ‖Q‖_F)`.
pub const LYAP_TOL: f64 = 1e-8;

/// Schur factorisation of `A`, reusable for any number of right-hand sides.
#[derive(Debug, Clone)]
pub struct LyapunovSolver {
    a: DMatrix<f64>,
    u: DMatrix<f64>,
    t: DMatrix<f64>,
    blocks: Vec<(usize, usize)>,
}

/// Solution of one Lyapunov equation together with its relative residual.
#[derive(Debug, Clone)]
pub struct LyapunovSolution {
    pub p: DMatrix<f64>,
    pub residual: f64,
}

impl LyapunovSolver {
    /// Factorises `A`, rejecting matrices that are not Hurwitz.
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::DimensionMismatch {
                matrix: "A".into(),
                expected: "square, non-empty".into(),
                found: format!("{}x{}", a.nrows(), a.ncols()),
            });
        }
        let (u, t) = linalg::real_schur(a)?;
        let blocks = linalg::quasi_triangular_blocks(&t)?;
        let abscissa = linalg::quasi_triangular_eigenvalues(&t)?.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
        let margin = 1e-9 * a.norm();
        if !(abscissa < -margin) {
            return Err(Error::Unstable { abscissa, margin });
        }
        Ok(LyapunovSolver { a: a.clone(), u, t, blocks })
    }

    /// Solver for `Aᵀ`, derived from the same Schur form.
    ///
    /// `Aᵀ = U Tᵀ Uᵀ = (UJ)(J Tᵀ J)(UJ)ᵀ` with `J` the reversal permutation,
    /// and `J Tᵀ J` is again upper quasi-triangular.
    pub fn transposed(&self) -> LyapunovSolver {
        let n = self.t.nrows();
        let t = DMatrix::from_fn(n, n, |i, j| self.t[(n - 1 - j, n - 1 - i)]);
        let u = DMatrix::from_fn(n, n, |i, j| self.u[(i, n - 1 - j)]);
        let blocks = self.blocks.iter().rev().map(|&(s, size)| (n - s - size, size)).collect();
        LyapunovSolver { a: self.a.transpose(), u, t, blocks }
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// Solves `AP + PAᵀ + Q = 0`, with one refinement step if needed.
    pub fn solve(&self, q: &DMatrix<f64>) -> Result<LyapunovSolution> {
        let n = self.order();
        if q.nrows() != n || q.ncols() != n {
            return Err(Error::DimensionMismatch {
                matrix: "Q".into(),
                expected: format!("{n}x{n}"),
                found: format!("{}x{}", q.nrows(), q.ncols()),
            });
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Lyapunov right-hand side".into()));
        }
        let asym = (q - q.transpose()).norm();
        if asym > model::SYM_TOL * q.norm() {
            return Err(Error::NotSymmetric { matrix: "Q".into(), asymmetry: asym });
        }
        let mut p = self.solve_once(q)?;
        let mut residual = relative_residual(&self.a, &p, q);
        if residual > LYAP_TOL {
            let r = &self.a * &p + &p * self.a.transpose() + q;
            let dp = self.solve_once(&linalg::symmetrize(&r))?;
            let refined = &p + dp;
            let refined_res = relative_residual(&self.a, &refined, q);
            if refined_res < residual {
                p = refined;
                residual = refined_res;
            }
        }
        if !(residual <= LYAP_TOL) {
            return Err(Error::LyapunovResidual { residual, tolerance: LYAP_TOL });
        }
        Ok(LyapunovSolution { p, residual })
    }

    fn solve_once(&self, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let c = -(self.u.transpose() * q * &self.u);
        let y = solve_quasi_triangular(&self.t, &self.blocks, c)?;
        let p = &self.u * y * self.u.transpose();
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Lyapunov solution".into()));
        }
        Ok(linalg::symmetrize(&p))
    }
}

/// Solves `TY + YTᵀ = C` for upper quasi-triangular `T`.
fn solve_quasi_triangular(t: &DMatrix<f64>, blocks: &[(usize, usize)], mut r: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = t.nrows();
    let mut y = DMatrix::<f64>::zeros(n, n);
    for &(j0, sj) in blocks.iter().rev() {
        let tjj = t.view((j0, j0), (sj, sj)).clone_owned();
        for &(i0, si) in blocks.iter().rev() {
            let mut rhs = r.view((i0, j0), (si, sj)).clone_owned();
            let tail = n - i0 - si;
            if tail > 0 {
                rhs -= t.view((i0, i0 + si), (si, tail)) * y.view((i0 + si, j0), (tail, sj));
            }
            let tii = t.view((i0, i0), (si, si)).clone_owned();
            let sol = small_sylvester(&tii, &tjj, &rhs)?;
            y.view_mut((i0, j0), (si, sj)).copy_from(&sol);
        }
        if j0 > 0 {
            let update = y.columns(j0, sj) * t.view((0, j0), (j0, sj)).transpose();
            let mut left = r.columns_mut(0, j0);
            left -= update;
        }
    }
    Ok(y)
}

/// Solves `T_ii X + X T_jjᵀ = R` for blocks of size at most 2.
fn small_sylvester(tii: &DMatrix<f64>, tjj: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (si, sj) = (tii.nrows(), tjj.nrows());
    if si == 1 && sj == 1 {
        let d = tii[(0, 0)] + tjj[(0, 0)];
        if d == 0.0 {
            return Err(Error::Unstable { abscissa: 0.0, margin: 0.0 });
        }
        return Ok(DMatrix::from_element(1, 1, rhs[(0, 0)] / d));
    }
    // column-major vec: (I ⊗ T_ii + T_jj ⊗ I) vec(X) = vec(R)
    let dim = si * sj;
    let mut k = DMatrix::<f64>::zeros(dim, dim);
    for b in 0..sj {
        for a in 0..si {
            let row = b * si + a;
            for c in 0..si {
                k[(row, b * si + c)] += tii[(a, c)];
            }
            for d in 0..sj {
                k[(row, d * si + a)] += tjj[(b, d)];
            }
        }
    }
    let v = nalgebra::DVector::from_column_slice(rhs.as_slice());
    let x = k.lu().solve(&v).ok_or(Error::Unstable { abscissa: 0.0, margin: 0.0 })?;
    Ok(DMatrix::from_column_slice(si, sj, x.as_slice()))
}

/// `‖AP + PAᵀ + Q‖_F / (2‖A‖_F‖P‖_F + ‖Q‖_F)`, zero when the denominator is.
pub fn relative_residual(a: &DMatrix<f64>, p: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    let num = (a * p + p * a.transpose() + q).norm();
    let den = 2.0 * a.norm() * p.norm() + q.norm();
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Solves `AP + PAᵀ + Q = 0` for Hurwitz `A` and symmetric `Q`.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(LyapunovSolver::new(a)?.solve(q)?.p)
}

/// Controllability and observability gramians.
#[derive(Debug, Clone)]
pub struct GramianPair {
    /// Solves `AW + WAᵀ + BBᵀ = 0`.
    pub wc: DMatrix<f64>,
    /// Solves `AᵀW + WA + CᵀC = 0`.
    pub wo: DMatrix<f64>,
    pub residual_c: f64,
    pub residual_o: f64,
}

pub fn gramians(sys: &LtiSystem) -> Result<GramianPair> {
    let solver = LyapunovSolver::new(sys.a())?;
    let c = solver.solve(&(sys.b() * sys.b().transpose()))?;
    let o = solver.transposed().solve(&(sys.c().transpose() * sys.c()))?;
    Ok(GramianPair { wc: c.p, wo: o.p, residual_c: c.residual, residual_o: o.residual })
}
