//! Adaptive Dormand-Prince 5(4) integrator for complex state vectors.

use super::{axpy, dist, norm, zeros};
use num_complex::Complex64 as C64;

const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate y' = f(t, y) from t0 to t1 with per-step relative error `tol`.
/// Works for t1 < t0 as well.
pub fn dp45<F>(mut f: F, t0: f64, t1: f64, y0: &[C64], tol: f64) -> (Vec<C64>, usize)
where
    F: FnMut(f64, &[C64]) -> Vec<C64>,
{
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    if span == 0.0 {
        return (y0.to_vec(), 0);
    }
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut h = (span / 16.0).min(0.1).max(1e-8) * dir;
    let mut k: Vec<Vec<C64>> = vec![zeros(y0.len()); 7];
    let mut steps = 0usize;
    let mut k0_fresh = false;
    loop {
        if (t - t1).abs() < 1e-15 * span.max(1.0) {
            break;
        }
        if dir * (t + h - t1) > 0.0 {
            h = t1 - t;
        }
        if !k0_fresh {
            k[0] = f(t, &y);
        }
        for s in 0..6 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate().take(s + 1) {
                if A[s][j] != 0.0 {
                    axpy(C64::new(h * A[s][j], 0.0), kj, &mut ys);
                }
            }
            k[s + 1] = f(t + C[s] * h, &ys);
        }
        let mut y5 = y.clone();
        let mut y4 = y.clone();
        for (j, kj) in k.iter().enumerate() {
            if B5[j] != 0.0 {
                axpy(C64::new(h * B5[j], 0.0), kj, &mut y5);
            }
            if B4[j] != 0.0 {
                axpy(C64::new(h * B4[j], 0.0), kj, &mut y4);
            }
        }
        let err = dist(&y5, &y4) / norm(&y5).max(1e-300);
        if err <= tol {
            t += h;
            y = y5;
            // FSAL: k7 of the accepted step is k1 of the next
            k[0] = k[6].clone();
            k0_fresh = true;
            steps += 1;
        } else {
            k0_fresh = k0_fresh && true; // rejected step keeps the cached k0
        }
        let fac = if err > 0.0 {
            0.9 * (tol / err).powf(0.2)
        } else {
            4.0
        };
        h *= fac.clamp(0.2, 4.0);
        if h.abs() < 1e-14 * span {
            // refuse to stall
            h = 1e-14 * span * dir;
        }
        if steps > 2_000_000 {
            panic!("dp45: step limit exceeded");
        }
    }
    (y, steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_rotation() {
        // y' = i w y
        let w = 3.0;
        let (y, _) = dp45(
            |_, y| y.iter().map(|v| C64::new(0.0, w) * v).collect(),
            0.0,
            2.0,
            &[C64::new(1.0, 0.0)],
            1e-12,
        );
        let want = C64::new(0.0, w * 2.0).exp();
        assert!((y[0] - want).norm() < 1e-9);
    }

    #[test]
    fn backward_integration() {
        let (y, _) = dp45(
            |_, y| y.to_vec(),
            0.0,
            -1.0,
            &[C64::new(2.0, 0.0)],
            1e-12,
        );
        assert!((y[0].re - 2.0 * (-1.0f64).exp()).abs() < 1e-9);
    }
}
