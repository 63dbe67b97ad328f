//! Dense and Krylov helpers on top of faer.

use faer::{c64, Mat, MatRef, Side};

use crate::error::{Error, Result};

pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };
pub const I: c64 = c64 { re: 0.0, im: 1.0 };

pub fn cr(x: f64) -> c64 {
    c64::new(x, 0.0)
}

/// Eigenvalues (ascending) and eigenvectors (columns) of a hermitian matrix.
pub fn eigh(a: MatRef<'_, c64>) -> Result<(Vec<f64>, Mat<c64>)> {
    if a.nrows() == 0 {
        return Ok((Vec::new(), Mat::zeros(0, 0)));
    }
    let e = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("hermitian eigensolver failed: {e:?}")))?;
    let s = e.S();
    let vals = (0..a.nrows()).map(|i| s.column_vector()[i].re).collect();
    Ok((vals, e.U().to_owned()))
}

pub fn eigvalsh(a: MatRef<'_, c64>) -> Result<Vec<f64>> {
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("hermitian eigensolver failed: {e:?}")))
}

/// Largest singular value.
pub fn spectral_norm(a: MatRef<'_, c64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    if a.nrows() == a.ncols() && hermiticity_defect(a) == 0.0 {
        if let Ok(v) = eigvalsh(a) {
            return v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        }
    }
    match a.singular_values() {
        Ok(s) => s.first().copied().unwrap_or(0.0),
        Err(_) => f64::NAN,
    }
}

/// `max |a_ij - conj(a_ji)|`.
pub fn hermiticity_defect(a: MatRef<'_, c64>) -> f64 {
    let n = a.nrows();
    let mut d = 0.0f64;
    for j in 0..n {
        for i in j..n {
            d = d.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    d
}

pub fn max_abs(a: MatRef<'_, c64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

pub fn adjoint(a: MatRef<'_, c64>) -> Mat<c64> {
    a.adjoint().to_owned()
}

pub fn matmul(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Mat<c64> {
    a * b
}

/// `V diag(f(lambda)) V^dagger`.
pub fn spectral_apply(vals: &[f64], vecs: MatRef<'_, c64>, f: impl Fn(f64) -> c64) -> Mat<c64> {
    let n = vals.len();
    let scaled = Mat::from_fn(n, n, |i, j| vecs[(i, j)] * f(vals[j]));
    scaled.as_ref() * vecs.adjoint()
}

/// `exp(-i t H)` for hermitian `H` via its eigendecomposition.
pub fn expm_herm(h: MatRef<'_, c64>, t: f64) -> Result<Mat<c64>> {
    let (vals, vecs) = eigh(h)?;
    Ok(spectral_apply(&vals, vecs.as_ref(), |e| c64::cis(-t * e)))
}

pub fn vdot(a: &[c64], b: &[c64]) -> c64 {
    a.iter().zip(b).fold(ZERO, |s, (x, y)| s + x.conj() * y)
}

pub fn vnorm(a: &[c64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub struct LanczosResult {
    /// Lowest eigenvalues found, ascending.
    pub values: Vec<f64>,
    /// Matching normalized eigenvectors.
    pub vectors: Vec<Vec<c64>>,
    pub residuals: Vec<f64>,
}

/// Lowest `nev` eigenpairs of a hermitian operator given by its action,
/// using Lanczos with full reorthogonalization and restarts.
pub fn lanczos_lowest(
    dim: usize,
    nev: usize,
    matvec: &dyn Fn(&[c64], &mut [c64]),
    tol: f64,
    seed: u64,
) -> Result<LanczosResult> {
    use rand::{Rng, SeedableRng};
    let nev = nev.min(dim);
    let krylov = dim.min(nev.max(1) * 40 + 60);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut start: Vec<c64> =
        (0..dim).map(|_| c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
    let mut last = None;
    for _restart in 0..50 {
        let nrm = vnorm(&start);
        start.iter_mut().for_each(|x| *x /= nrm);
        let mut basis: Vec<Vec<c64>> = vec![start.clone()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut w = vec![ZERO; dim];
        for j in 0..krylov {
            matvec(&basis[j], &mut w);
            let a = vdot(&basis[j], &w).re;
            alpha.push(a);
            for _pass in 0..2 {
                for q in &basis {
                    let c = vdot(q, &w);
                    w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
                }
            }
            let b = vnorm(&w);
            if j + 1 == krylov || b < 1e-13 {
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        }
        let m = alpha.len();
        let t = Mat::from_fn(m, m, |i, j| {
            if i == j {
                cr(alpha[i])
            } else if i == j + 1 {
                cr(beta[j])
            } else if j == i + 1 {
                cr(beta[i])
            } else {
                ZERO
            }
        });
        let (vals, vecs) = eigh(t.as_ref())?;
        let mut values = Vec::new();
        let mut vectors = Vec::new();
        let mut residuals = Vec::new();
        for k in 0..nev.min(m) {
            let mut v = vec![ZERO; dim];
            for (i, q) in basis.iter().take(m).enumerate() {
                let c = vecs[(i, k)];
                v.iter_mut().zip(q).for_each(|(x, y)| *x += c * y);
            }
            let n = vnorm(&v);
            v.iter_mut().for_each(|x| *x /= n);
            matvec(&v, &mut w);
            let r = w.iter().zip(&v).map(|(a, b)| (a - b * vals[k]).norm_sqr()).sum::<f64>().sqrt();
            values.push(vals[k]);
            vectors.push(v);
            residuals.push(r);
        }
        let done = residuals.iter().all(|&r| r <= tol) || m == dim;
        // restart from a combination of the wanted Ritz vectors
        start = vec![ZERO; dim];
        for v in &vectors {
            start.iter_mut().zip(v).for_each(|(x, y)| *x += y);
        }
        let res = LanczosResult { values, vectors, residuals };
        if done {
            return Ok(res);
        }
        last = Some(res);
    }
    let r = last.expect("at least one restart");
    Err(Error::Numerical(format!("Lanczos did not converge: residuals {:?}", r.residuals)))
}

/// `exp(-i t H) v` for hermitian `H` given by its action, from a Lanczos
/// basis grown until the a-posteriori estimate falls below `tol` (relative
/// to `|v|`).
pub fn expm_krylov(dim: usize, matvec: &dyn Fn(&[c64], &mut [c64]), v: &[c64], t: f64, tol: f64) -> Result<Vec<c64>> {
    let nrm = vnorm(v);
    if nrm == 0.0 || t == 0.0 {
        return Ok(v.to_vec());
    }
    let max_m = dim.min(80);
    let mut basis: Vec<Vec<c64>> = vec![v.iter().map(|x| x / nrm).collect()];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![ZERO; dim];
    loop {
        let j = alpha.len();
        matvec(&basis[j], &mut w);
        alpha.push(vdot(&basis[j], &w).re);
        for _pass in 0..2 {
            for q in &basis {
                let c = vdot(q, &w);
                w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let b = vnorm(&w);
        let m = alpha.len();
        let tri = Mat::from_fn(m, m, |i, k| {
            if i == k {
                cr(alpha[i])
            } else if i == k + 1 {
                cr(beta[k])
            } else if k == i + 1 {
                cr(beta[i])
            } else {
                ZERO
            }
        });
        let e = expm_herm(tri.as_ref(), t)?;
        let invariant = b < 1e-14 || m == dim;
        if invariant || b * e[(m - 1, 0)].norm() < tol {
            let mut out = vec![ZERO; dim];
            for (k, q) in basis.iter().enumerate().take(m) {
                let c = e[(k, 0)] * nrm;
                out.iter_mut().zip(q).for_each(|(x, y)| *x += c * y);
            }
            return Ok(out);
        }
        if m == max_m {
            return Err(Error::Integration(format!(
                "Krylov exponential did not reach {tol:.1e} in {m} steps; reduce the time step"
            )));
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lanczos_matches_dense() {
        let n = 120;
        let h = Mat::from_fn(n, n, |i, j| {
            if i == j {
                cr((i as f64 * 0.37).sin() * 3.0)
            } else if i.abs_diff(j) <= 2 {
                c64::new(0.3 / (1.0 + (i + j) as f64 * 0.01), if i < j { 0.1 } else { -0.1 })
            } else {
                ZERO
            }
        });
        let (vals, _) = eigh(h.as_ref()).unwrap();
        let mv = |x: &[c64], y: &mut [c64]| {
            for i in 0..n {
                y[i] = (0..n).fold(ZERO, |s, j| s + h[(i, j)] * x[j]);
            }
        };
        let r = lanczos_lowest(n, 2, &mv, 1e-10, 3).unwrap();
        assert!((r.values[0] - vals[0]).abs() < 1e-10);
        assert!((r.values[1] - vals[1]).abs() < 1e-10);
    }

    #[test]
    fn krylov_exponential_matches_dense() {
        let n = 50;
        let h = Mat::from_fn(n, n, |i, j| {
            if i == j {
                cr(i as f64 * 0.1)
            } else if i.abs_diff(j) == 1 {
                c64::new(0.5, if i < j { 0.2 } else { -0.2 })
            } else {
                ZERO
            }
        });
        let v: Vec<c64> = (0..n).map(|i| c64::new((i as f64).cos(), 0.1 * i as f64)).collect();
        let u = expm_herm(h.as_ref(), 0.8).unwrap();
        let mv = |x: &[c64], y: &mut [c64]| {
            for i in 0..n {
                y[i] = (0..n).fold(ZERO, |s, j| s + h[(i, j)] * x[j]);
            }
        };
        let got = expm_krylov(n, &mv, &v, 0.8, 1e-13).unwrap();
        for i in 0..n {
            let want = (0..n).fold(ZERO, |s, j| s + u[(i, j)] * v[j]);
            assert!((got[i] - want).norm() < 1e-11);
        }
    }

    #[test]
    fn expm_is_unitary() {
        let h = Mat::from_fn(4, 4, |i, j| c64::new((i + j) as f64, i as f64 - j as f64));
        let u = expm_herm(h.as_ref(), 0.7).unwrap();
        let uu = u.adjoint() * &u;
        for i in 0..4 {
            for j in 0..4 {
                let e = if i == j { ONE } else { ZERO };
                assert!((uu[(i, j)] - e).norm() < 1e-12);
            }
        }
    }
}
