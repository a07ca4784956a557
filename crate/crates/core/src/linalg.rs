//! Small dense linear-algebra helpers shared by the numerical modules.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};

use crate::error::{Error, Result};

/// Real Schur form `A = U T Uᵀ` with `T` upper quasi-triangular.
pub(crate) fn real_schur(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Schur input".into()));
    }
    let max_iter = (100 * n).max(1000);
    let schur = Schur::try_new(a.clone(), f64::EPSILON, max_iter).ok_or(Error::SchurFailed(n))?;
    let (u, t) = schur.unpack();
    if t.iter().any(|v| !v.is_finite()) {
        return Err(Error::SchurFailed(n));
    }
    Ok((u, t))
}

/// Diagonal blocks (start, size) of a quasi-triangular matrix.
pub(crate) fn quasi_triangular_blocks(t: &DMatrix<f64>) -> Result<Vec<(usize, usize)>> {
    let n = t.nrows();
    let mut blocks = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            if i + 2 < n && t[(i + 2, i + 1)] != 0.0 {
                // two coupled subdiagonal entries: the iteration did not converge
                return Err(Error::SchurFailed(n));
            }
            blocks.push((i, 2));
            i += 2;
        } else {
            blocks.push((i, 1));
            i += 1;
        }
    }
    Ok(blocks)
}

/// Eigenvalues (real, imaginary) of the diagonal blocks of a quasi-triangular matrix.
pub(crate) fn quasi_triangular_eigenvalues(t: &DMatrix<f64>) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(t.nrows());
    for (s, size) in quasi_triangular_blocks(t)? {
        if size == 1 {
            out.push((t[(s, s)], 0.0));
        } else {
            let (a, b, c, d) = (t[(s, s)], t[(s, s + 1)], t[(s + 1, s)], t[(s + 1, s + 1)]);
            let tr = 0.5 * (a + d);
            let disc = 0.25 * (a - d) * (a - d) + b * c;
            if disc >= 0.0 {
                let r = disc.sqrt();
                out.push((tr + r, 0.0));
                out.push((tr - r, 0.0));
            } else {
                let r = (-disc).sqrt();
                out.push((tr, r));
                out.push((tr, -r));
            }
        }
    }
    Ok(out)
}

/// Symmetric eigendecomposition with eigenvalues sorted in descending order.
///
/// Each eigenvector is normalised so its largest-magnitude entry is positive,
/// which makes serialized output reproducible.
pub(crate) fn sym_eig_desc(m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("symmetric eigendecomposition input".into()));
    }
    let sym = symmetrize(m);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, (100 * n).max(1000)).ok_or(Error::EigenFailed(n))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).clone_owned();
        let pivot = col.iter().copied().fold(0.0_f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        if pivot < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    Ok((values, vectors))
}

pub(crate) fn max_sym_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let (vals, _) = sym_eig_desc(m)?;
    Ok(vals[0])
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest singular value.
pub(crate) fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.nrows().min(m.ncols()) > 200 {
        return norm2_upper(m);
    }
    m.clone()
        .try_svd(false, false, f64::EPSILON, 0)
        .map(|svd| svd.singular_values.max())
        .unwrap_or_else(|| norm2_upper(m))
}

/// Cheap upper bound on the spectral norm.
pub(crate) fn norm2_upper(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let fro = m.norm();
    let one = (0..m.ncols()).map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let inf = (0..m.nrows()).map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    fro.min((one * inf).sqrt())
}

/// `e^x - 1 - x` for `x >= 0`, rounded upwards by a few ulps.
pub(crate) fn exp_rem2(x: f64) -> f64 {
    if x < 0.5 {
        // positive series x²/2! + x³/3! + ..., no cancellation
        let mut term = 0.5 * x * x;
        let mut sum = 0.0;
        let mut j = 2.0;
        while term > sum * f64::EPSILON * 0.25 {
            sum += term;
            j += 1.0;
            term *= x / j;
        }
        sum * (1.0 + 8.0 * f64::EPSILON)
    } else {
        (x.exp_m1() - x) * (1.0 + 8.0 * f64::EPSILON)
    }
}

/// Exact one-step propagators for piecewise-constant input:
/// `x(t+h) = phi x(t) + gamma B u` with `gamma = ∫₀ʰ e^{As} ds`.
pub(crate) fn propagators(a: &DMatrix<f64>, h: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let mut big = DMatrix::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(&(a * h));
    big.view_mut((0, n), (n, n)).copy_from(&(DMatrix::<f64>::identity(n, n) * h));
    let e = big.exp();
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix exponential".into()));
    }
    let phi = e.view((0, 0), (n, n)).clone_owned();
    let gamma = e.view((0, n), (n, n)).clone_owned();
    Ok((phi, gamma))
}

/// Homogeneous propagator `e^{Ah}` only.
pub(crate) fn expm(a: &DMatrix<f64>, h: f64) -> Result<DMatrix<f64>> {
    let e = (a * h).exp();
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix exponential".into()));
    }
    Ok(e)
}
