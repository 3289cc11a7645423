//! Gauss-Legendre rules and Chebyshev interpolation of vector-valued maps.

use num_complex::Complex64 as C64;

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1],
/// found by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        loop {
            let (p, dp) = legendre_and_deriv(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_deriv(n, z);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn legendre_and_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Nodes/weights rescaled to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        x.iter().map(|&t| mid + half * t).collect(),
        w.iter().map(|&v| v * half).collect(),
    )
}

/// Chebyshev points of the second kind on [a, b] (Clenshaw-Curtis nodes).
pub fn chebyshev_points(m: usize, a: f64, b: f64) -> Vec<f64> {
    assert!(m >= 2);
    (0..m)
        .map(|j| {
            let t = (std::f64::consts::PI * j as f64 / (m - 1) as f64).cos();
            0.5 * (a + b) + 0.5 * (b - a) * t
        })
        .collect()
}

/// Barycentric interpolation of a vector-valued function sampled at
/// Chebyshev second-kind points. Weights are (-1)^j with halved endpoints.
pub struct ChebInterp {
    nodes: Vec<f64>,
    values: Vec<Vec<C64>>,
}

impl ChebInterp {
    pub fn new(nodes: Vec<f64>, values: Vec<Vec<C64>>) -> Self {
        assert_eq!(nodes.len(), values.len());
        ChebInterp { nodes, values }
    }

    pub fn eval(&self, t: f64) -> Vec<C64> {
        let m = self.nodes.len();
        // exact node hit
        for (j, &x) in self.nodes.iter().enumerate() {
            if (t - x).abs() < 1e-14 * (1.0 + x.abs()) {
                return self.values[j].clone();
            }
        }
        let mut num = vec![C64::new(0.0, 0.0); self.values[0].len()];
        let mut den = 0.0;
        for j in 0..m {
            let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == m - 1 {
                w *= 0.5;
            }
            let c = w / (t - self.nodes[j]);
            den += c;
            for (ni, vi) in num.iter_mut().zip(&self.values[j]) {
                *ni += C64::new(c, 0.0) * vi;
            }
        }
        for ni in num.iter_mut() {
            *ni /= C64::new(den, 0.0);
        }
        num
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_integrates_polynomials_exactly() {
        // 5-point rule is exact through degree 9
        let (x, w) = gauss_legendre(5);
        let val: f64 = x.iter().zip(&w).map(|(&t, &v)| v * t.powi(8)).sum();
        assert!((val - 2.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn gl_on_interval() {
        let (x, w) = gauss_legendre_on(16, 0.0, 2.0);
        let val: f64 = x.iter().zip(&w).map(|(&t, &v)| v * t.exp()).sum();
        assert!((val - (2f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn cheb_interp_reproduces_entire_function() {
        let nodes = chebyshev_points(20, 0.0, 1.0);
        let vals: Vec<Vec<C64>> = nodes
            .iter()
            .map(|&t| vec![C64::new(0.0, 2.0 * t).exp()])
            .collect();
        let interp = ChebInterp::new(nodes, vals);
        for &t in &[0.1234, 0.5, 0.987] {
            let got = interp.eval(t)[0];
            let want = C64::new(0.0, 2.0 * t).exp();
            assert!((got - want).norm() < 1e-13);
        }
    }
}
