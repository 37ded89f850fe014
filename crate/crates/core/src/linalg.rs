//! Small complex linear-algebra helpers shared by the channel, precoder and
//! phase-design modules.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut y = x - two_pi * ((x + PI) / two_pi).floor();
    // floor rounding can land exactly on +π
    if y >= PI {
        y -= two_pi;
    }
    if y < -PI {
        y += two_pi;
    }
    y
}

/// Angular distance modulo 2π, in `[0, π]`.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

/// Hermitian square root through an eigendecomposition. Eigenvalues below
/// round-off (`n·ε·λ_max`), including negative ones, are clipped to zero so a
/// rank-deficient input keeps its rank.
pub fn hermitian_sqrt(m: &CMat) -> CMat {
    let eig = m.clone().symmetric_eigen();
    let n = m.nrows();
    let top = eig.eigenvalues.iter().copied().fold(0.0_f64, f64::max);
    let floor = n as f64 * f64::EPSILON * top;
    let mut out = CMat::zeros(n, n);
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        let s = if lambda > floor { lambda.sqrt() } else { 0.0 };
        if s == 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(j);
        out += (v * v.adjoint()) * Complex64::new(s, 0.0);
    }
    out
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// 2-norm condition number of a Hermitian positive semidefinite matrix.
/// Returns `inf` when the smallest eigenvalue is not positive.
pub fn hermitian_condition(m: &CMat) -> f64 {
    let ev = hermitian_eigenvalues(m);
    match (ev.first(), ev.last()) {
        (Some(&lo), Some(&hi)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

/// Numerical rank: singular values above `rel_tol * σ_max`.
pub fn numerical_rank(m: &CMat, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().copied().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Rotates `v` so its first nonzero entry is real and positive.
pub fn fix_global_phase(v: &mut CVec) {
    if let Some(first) = v.iter().find(|z| z.norm() > 0.0).copied() {
        let rot = first.conj() / first.norm();
        for z in v.iter_mut() {
            *z *= rot;
        }
    }
}

/// Principal eigenvector of a Hermitian PSD matrix by power iteration.
///
/// Starts from the all-ones vector; the returned vector has unit norm and its
/// first nonzero entry real positive. Returns the vector and the number of
/// iterations used.
pub fn principal_eigenvector(m: &CMat, tol: f64, max_iter: usize) -> (CVec, usize) {
    let n = m.nrows();
    let mut x = CVec::from_element(n, Complex64::new(1.0, 0.0));
    x /= Complex64::new(x.norm(), 0.0);
    if (m * &x).norm() == 0.0 {
        // start vector in the null space: restart on the heaviest column
        let j = (0..n)
            .max_by(|&a, &b| m[(a, a)].re.partial_cmp(&m[(b, b)].re).unwrap())
            .unwrap_or(0);
        x = CVec::zeros(n);
        x[j] = Complex64::new(1.0, 0.0);
    }
    for it in 1..=max_iter {
        let mut y = m * &x;
        let norm = y.norm();
        if norm == 0.0 {
            return (x, it);
        }
        y /= Complex64::new(norm, 0.0);
        fix_global_phase(&mut y);
        let delta = (&y - &x).norm();
        x = y;
        if delta < tol {
            return (x, it);
        }
    }
    (x, max_iter)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_stays_in_half_open_interval() {
        assert_eq!(wrap_angle(PI), -PI);
        assert_eq!(wrap_angle(-PI), -PI);
        assert!((wrap_angle(3.0 * PI + 0.1) - (-PI + 0.1)).abs() < 1e-12);
        assert!((wrap_angle(0.3) - 0.3).abs() < 1e-15);
        for k in -50..50 {
            let y = wrap_angle(k as f64 * 0.377);
            assert!((-PI..PI).contains(&y));
        }
    }

    #[test]
    fn sqrt_squares_back() {
        let a = CMat::from_fn(4, 3, |i, j| {
            Complex64::new((i + 2 * j) as f64, i as f64 - j as f64)
        });
        let r = &a * a.adjoint();
        let s = hermitian_sqrt(&r);
        assert!((&s * &s - &r).norm() < 1e-9 * r.norm());
        assert!((&s - s.adjoint()).norm() < 1e-10 * r.norm());
    }

    #[test]
    fn power_iteration_matches_eigen() {
        let a = CMat::from_fn(5, 5, |i, j| {
            Complex64::new((i * j) as f64 * 0.1 + 1.0, (i as f64 - j as f64) * 0.3)
        });
        let m = &a * a.adjoint();
        let (v, _) = principal_eigenvector(&m, 1e-12, 10_000);
        let lambda = (v.adjoint() * &m * &v)[(0, 0)].re;
        let ev = hermitian_eigenvalues(&m);
        assert!((lambda - ev[4]).abs() < 1e-8 * ev[4]);
        assert!(v[0].im.abs() < 1e-14 && v[0].re > 0.0);
    }

    #[test]
    fn rank_of_outer_product() {
        let u = CVec::from_fn(6, |i, _| Complex64::new(i as f64 + 1.0, 0.5));
        let m = &u * u.adjoint();
        assert_eq!(numerical_rank(&m, 1e-10), 1);
        assert_eq!(numerical_rank(&CMat::zeros(3, 3), 1e-10), 0);
    }
}
