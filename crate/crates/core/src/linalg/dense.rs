//! Dense helpers: Padé matrix exponential, Hermitian eigendecomposition,
//! and the Taylor-with-scaling action of a sparse exponential on a vector.

use super::csr::Csr;
use super::{axpy, norm, scale, zeros};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// Scaling-and-squaring Padé(13) exponential.
///
/// Standard Higham coefficients; adequate here because every matrix we
/// exponentiate is bounded at truncation and of modest dimension.
pub fn expm(a: &DMatrix<C64>) -> DMatrix<C64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let norm1 = one_norm(a);
    let theta13 = 5.371920351148152;
    let s = if norm1 > theta13 {
        (norm1 / theta13).log2().ceil() as i32
    } else {
        0
    };
    let a = a.map(|v| v / C64::new(2f64.powi(s), 0.0));

    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let id = DMatrix::<C64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let u_inner = &a6 * (&a6 * cb(B[13]) + &a4 * cb(B[11]) + &a2 * cb(B[9]))
        + &a6 * cb(B[7])
        + &a4 * cb(B[5])
        + &a2 * cb(B[3])
        + &id * cb(B[1]);
    let u = &a * u_inner;
    let v = &a6 * (&a6 * cb(B[12]) + &a4 * cb(B[10]) + &a2 * cb(B[8]))
        + &a6 * cb(B[6])
        + &a4 * cb(B[4])
        + &a2 * cb(B[2])
        + &id * cb(B[0]);
    let num = &v + &u;
    let den = &v - &u;
    let mut r = den
        .lu()
        .solve(&num)
        .expect("Pade denominator should be invertible");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

fn cb(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn one_norm(a: &DMatrix<C64>) -> f64 {
    (0..a.ncols())
        .map(|c| a.column(c).iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Eigendecomposition of a Hermitian matrix. Returns (eigenvalues, U) with
/// `a = U diag(e) U^*`. Hermiticity is the caller's responsibility.
pub fn hermitian_eigen(a: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let sym = nalgebra::SymmetricEigen::new(a.clone());
    let e = sym.eigenvalues.iter().copied().collect();
    (e, sym.eigenvectors)
}

/// y = e^{z A} x by scaled Taylor summation; exact to `tol` in the final norm.
///
/// This is the certified action of the dense exponential: each substep sums
/// the series until the running term bound drops below the per-step budget,
/// so the only error is floating-point roundoff plus the stated tolerance.
pub fn expm_multiply(a: &Csr, z: C64, x: &[C64], tol: f64) -> Vec<C64> {
    let anorm = a.norm_inf() * z.norm();
    let steps = (anorm / 2.0).ceil().max(1.0) as usize;
    let zs = z / C64::new(steps as f64, 0.0);
    let mut y: Vec<C64> = x.to_vec();
    let step_tol = tol / steps as f64;
    let mut term = zeros(x.len());
    for _ in 0..steps {
        let mut acc = y.clone();
        term.copy_from_slice(&y);
        let budget = step_tol * norm(&y).max(1e-300);
        for k in 1..400 {
            let t2 = a.apply(&term);
            term = t2;
            scale(zs / C64::new(k as f64, 0.0), &mut term);
            axpy(C64::new(1.0, 0.0), &term, &mut acc);
            if norm(&term) < budget {
                break;
            }
        }
        y = acc;
    }
    y
}
