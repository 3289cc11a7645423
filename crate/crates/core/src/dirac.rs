//! First-quantized lattice Dirac sector.
//!
//! Periodic position lattice with P sites per axis, 4-component spinors,
//! and spectral (Fourier-multiplier) momentum so that commutators with
//! band-limited multiplication operators close exactly. On even lattices
//! the Nyquist row of the momentum multiplier is set to zero; that keeps
//! the multiplier odd under k -> -k, which the CP machinery needs exactly.

use crate::error::{Error, Result};
use crate::linalg::dense::hermitian_eigen;
use crate::linalg::Csr;
use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64 as C64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

#[derive(Clone, Debug)]
pub struct SpinorLattice {
    /// Sites per axis.
    pub extent: usize,
    /// Lattice spacing.
    pub spacing: f64,
    /// Centered coordinate per axis index.
    coords: Vec<f64>,
    /// Momentum multiplier per frequency index (Nyquist zeroed on even P).
    momenta: Vec<f64>,
}

impl SpinorLattice {
    pub fn new(extent: usize, spacing: f64) -> Self {
        assert!(extent >= 2);
        let p = extent as i64;
        // centered representative: even P gives {-P/2 .. P/2-1}, odd
        // {-(P-1)/2 .. (P-1)/2}
        let offset = if p % 2 == 0 { p / 2 } else { (p - 1) / 2 };
        let coords = (0..extent)
            .map(|i| spacing * (i as i64 - offset) as f64)
            .collect();
        let kappa = 2.0 * std::f64::consts::PI / (extent as f64 * spacing);
        let momenta = (0..extent)
            .map(|j| {
                let m = if (j as i64) <= (p - 1) / 2 {
                    j as i64
                } else {
                    j as i64 - p
                };
                if p % 2 == 0 && j as i64 == p / 2 {
                    0.0
                } else {
                    kappa * m as f64
                }
            })
            .collect();
        SpinorLattice {
            extent,
            spacing,
            coords,
            momenta,
        }
    }

    pub fn site_count(&self) -> usize {
        self.extent.pow(3)
    }

    /// Dirac-sector dimension 4 P^3.
    pub fn dim(&self) -> usize {
        4 * self.site_count()
    }

    pub fn site_index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + self.extent * (iy + self.extent * iz)
    }

    pub fn site_coords(&self, s: usize) -> [f64; 3] {
        let p = self.extent;
        [
            self.coords[s % p],
            self.coords[(s / p) % p],
            self.coords[s / (p * p)],
        ]
    }

    /// Site of the reflected point -x (periodic).
    pub fn parity_site(&self, s: usize) -> usize {
        let p = self.extent;
        let neg = |i: usize| (p - i) % p;
        let (ix, iy, iz) = (s % p, (s / p) % p, s / (p * p));
        self.site_index(neg(ix), neg(iy), neg(iz))
    }

    /// Minimal-image norm of the difference of two sites.
    pub fn min_image_distance(&self, a: usize, b: usize) -> f64 {
        let ca = self.site_coords(a);
        let cb = self.site_coords(b);
        let span = self.extent as f64 * self.spacing;
        let mut d2 = 0.0;
        for j in 0..3 {
            let mut d = ca[j] - cb[j];
            d -= span * (d / span).round();
            d2 += d * d;
        }
        d2.sqrt()
    }

    pub fn momentum_values(&self) -> &[f64] {
        &self.momenta
    }

    /// Dual momentum vector of a frequency multi-index.
    pub fn momentum(&self, m: [usize; 3]) -> [f64; 3] {
        [self.momenta[m[0]], self.momenta[m[1]], self.momenta[m[2]]]
    }

    /// 1-D spectral momentum kernel K(d) = (1/P) sum_m k_m e^{i 2 pi m d / P}.
    fn momentum_kernel(&self) -> Vec<C64> {
        let p = self.extent;
        (0..p)
            .map(|d| {
                let mut acc = ZERO;
                for j in 0..p {
                    let phase = 2.0 * std::f64::consts::PI * (j as f64) * (d as f64) / p as f64;
                    acc += C64::new(self.momenta[j], 0.0) * C64::from_polar(1.0, phase);
                }
                acc / C64::new(p as f64, 0.0)
            })
            .collect()
    }

    /// Plane wave e^{i k_m . x} as a site vector (unnormalized).
    pub fn plane_wave(&self, m: [usize; 3]) -> Vec<C64> {
        let k = self.momentum(m);
        (0..self.site_count())
            .map(|s| {
                let x = self.site_coords(s);
                C64::from_polar(1.0, k[0] * x[0] + k[1] * x[1] + k[2] * x[2])
            })
            .collect()
    }

    /// True dual momentum per frequency index, Nyquist included. Only the
    /// odd momentum-operator multiplier zeroes the Nyquist row; even
    /// multipliers (Laplacian, radial convolutions) use these values.
    pub fn true_momentum_values(&self) -> Vec<f64> {
        let p = self.extent as i64;
        let kappa = 2.0 * std::f64::consts::PI / (self.extent as f64 * self.spacing);
        (0..self.extent)
            .map(|j| {
                let m = if (j as i64) <= (p - 1) / 2 {
                    j as i64
                } else {
                    j as i64 - p
                };
                kappa * m as f64
            })
            .collect()
    }

    /// Fourier coefficients F_m with f(x) = sum_m F_m e^{i k_m . x},
    /// indexed like sites (frequency index per axis).
    pub fn fourier_coefficients(&self, f: &[C64]) -> Vec<C64> {
        let n = self.site_count();
        assert_eq!(f.len(), n);
        let p = self.extent;
        let kt = self.true_momentum_values();
        let mut out = vec![ZERO; n];
        for (mi, o) in out.iter_mut().enumerate() {
            let k = [kt[mi % p], kt[(mi / p) % p], kt[mi / (p * p)]];
            let mut acc = ZERO;
            for (s, fs) in f.iter().enumerate() {
                let x = self.site_coords(s);
                acc += fs * C64::from_polar(1.0, -(k[0] * x[0] + k[1] * x[1] + k[2] * x[2]));
            }
            *o = acc / C64::new(n as f64, 0.0);
        }
        out
    }

    pub fn inverse_fourier(&self, coeffs: &[C64]) -> Vec<C64> {
        let n = self.site_count();
        assert_eq!(coeffs.len(), n);
        let p = self.extent;
        let kt = self.true_momentum_values();
        let mut out = vec![ZERO; n];
        for (s, o) in out.iter_mut().enumerate() {
            let x = self.site_coords(s);
            let mut acc = ZERO;
            for (mi, cm) in coeffs.iter().enumerate() {
                let k = [kt[mi % p], kt[(mi / p) % p], kt[mi / (p * p)]];
                acc += cm * C64::from_polar(1.0, k[0] * x[0] + k[1] * x[1] + k[2] * x[2]);
            }
            *o = acc;
        }
        out
    }

    /// Apply a radial Fourier multiplier g(|k|) to a site function.
    pub fn radial_multiplier(&self, f: &[C64], g: impl Fn(f64) -> f64) -> Vec<C64> {
        let p = self.extent;
        let kt = self.true_momentum_values();
        let mut coeffs = self.fourier_coefficients(f);
        for (mi, cm) in coeffs.iter_mut().enumerate() {
            let k = [kt[mi % p], kt[(mi / p) % p], kt[mi / (p * p)]];
            let kn = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
            *cm *= C64::new(g(kn), 0.0);
        }
        self.inverse_fourier(&coeffs)
    }

    /// Spectral Laplacian (exact per dual mode, Nyquist included).
    pub fn laplacian(&self, f: &[C64]) -> Vec<C64> {
        self.radial_multiplier(f, |kn| -kn * kn)
    }
}

/// Dirac representation: beta diagonal, alpha^j off-diagonal sigma blocks.
#[derive(Clone, Debug)]
pub struct DiracMatrices {
    pub alpha: [Matrix4<C64>; 3],
    pub beta: Matrix4<C64>,
}

impl Default for DiracMatrices {
    fn default() -> Self {
        Self::dirac_representation()
    }
}

impl DiracMatrices {
    pub fn dirac_representation() -> Self {
        let s1 = [[ZERO, ONE], [ONE, ZERO]];
        let s2 = [[ZERO, -I], [I, ZERO]];
        let s3 = [[ONE, ZERO], [ZERO, -ONE]];
        let alpha = [block_off(s1), block_off(s2), block_off(s3)];
        let mut beta = Matrix4::zeros();
        beta[(0, 0)] = ONE;
        beta[(1, 1)] = ONE;
        beta[(2, 2)] = -ONE;
        beta[(3, 3)] = -ONE;
        DiracMatrices { alpha, beta }
    }

    /// alpha^{mu} with alpha^0 = identity.
    pub fn alpha_upper(&self, mu: usize) -> Matrix4<C64> {
        if mu == 0 {
            Matrix4::identity()
        } else {
            self.alpha[mu - 1]
        }
    }

    /// Largest defect among the Clifford relations.
    pub fn clifford_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        let id = Matrix4::<C64>::identity();
        for i in 0..3 {
            for j in 0..3 {
                let anti = self.alpha[i] * self.alpha[j] + self.alpha[j] * self.alpha[i];
                let want = if i == j { id * C64::new(2.0, 0.0) } else { Matrix4::zeros() };
                worst = worst.max((anti - want).norm());
            }
            let ab = self.alpha[i] * self.beta + self.beta * self.alpha[i];
            worst = worst.max(ab.norm());
        }
        worst = worst.max((self.beta * self.beta - id).norm());
        worst
    }
}

fn block_off(s: [[C64; 2]; 2]) -> Matrix4<C64> {
    let mut m = Matrix4::zeros();
    for r in 0..2 {
        for c in 0..2 {
            m[(r, c + 2)] = s[r][c];
            m[(r + 2, c)] = s[r][c];
        }
    }
    m
}

/// Per-site 4x4 Hermitian potential.
#[derive(Clone, Debug)]
pub struct PotentialField {
    pub blocks: Vec<Matrix4<C64>>,
}

impl PotentialField {
    pub fn zero(lattice: &SpinorLattice) -> Self {
        PotentialField {
            blocks: vec![Matrix4::zeros(); lattice.site_count()],
        }
    }

    pub fn hermitian_defect(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| (b - b.adjoint()).norm())
            .fold(0.0, f64::max)
    }

    pub fn check_hermitian(&self) -> Result<()> {
        let d = self.hermitian_defect();
        if d > 1e-13 {
            return Err(Error::NonHermitian {
                what: "potential field".into(),
                defect: d,
            });
        }
        Ok(())
    }
}

/// Scalar Coulomb field -Z q^2 / |x| on the periodic lattice, with the
/// minimal-image distance and the singular site replaced by the cell
/// average of 1/r over the central cell.
pub fn coulomb_potential_field(z: f64, q: f64, lattice: &SpinorLattice) -> PotentialField {
    let reg = cell_average_inverse_radius(lattice.spacing);
    let blocks = (0..lattice.site_count())
        .map(|s| {
            let x = lattice.site_coords(s);
            let span = lattice.extent as f64 * lattice.spacing;
            let mut r2 = 0.0;
            for c in x {
                let d = c - span * (c / span).round();
                r2 += d * d;
            }
            let r = r2.sqrt();
            let inv = if r == 0.0 { reg } else { 1.0 / r };
            Matrix4::identity() * C64::new(-z * q * q * inv, 0.0)
        })
        .collect();
    PotentialField { blocks }
}

/// Average of 1/|r| over a cube of side a centered at the origin,
/// via the Duffy substitution that removes the singularity.
pub fn cell_average_inverse_radius(a: f64) -> f64 {
    // integral over the unit cube = 3/2 * int_0^1 int_0^1 du dv / sqrt(1+u^2+v^2),
    // doubled for the centered cube of side 1: see the pyramid decomposition
    let (x, w) = crate::linalg::quad::gauss_legendre_on(32, 0.0, 1.0);
    let mut s = 0.0;
    for (u, wu) in x.iter().zip(&w) {
        for (v, wv) in x.iter().zip(&w) {
            s += wu * wv / (1.0 + u * u + v * v).sqrt();
        }
    }
    let unit_corner = 1.5 * s; // cube [0,1]^3 with corner singularity
    let centered_unit = 2.0 * unit_corner; // eight half-size corner cubes
    centered_unit / a
}

/// Dense lattice Dirac Hamiltonian H_D = alpha . p + M beta + V with the
/// layout index = 4 * site + spinor.
pub fn build_dirac_hamiltonian(
    v: &PotentialField,
    mass: f64,
    lattice: &SpinorLattice,
    matrices: &DiracMatrices,
) -> Result<Csr> {
    v.check_hermitian()?;
    if v.blocks.len() != lattice.site_count() {
        return Err(Error::Dimension(format!(
            "potential has {} sites, lattice {}",
            v.blocks.len(),
            lattice.site_count()
        )));
    }
    let p = lattice.extent;
    let kernel = lattice.momentum_kernel();
    let mut t: Vec<(usize, u32, C64)> = Vec::new();
    // momentum terms: 1-D convolution along each axis
    for s in 0..lattice.site_count() {
        let (ix, iy, iz) = (s % p, (s / p) % p, s / (p * p));
        for axis in 0..3 {
            let al = &matrices.alpha[axis];
            for d in 0..p {
                let kd = kernel[d];
                if kd.norm() < 1e-300 {
                    continue;
                }
                // target site shifted by +d along the axis: kernel K(x-y)
                // couples x to y = x - d
                let tgt = match axis {
                    0 => lattice.site_index((ix + p - d) % p, iy, iz),
                    1 => lattice.site_index(ix, (iy + p - d) % p, iz),
                    _ => lattice.site_index(ix, iy, (iz + p - d) % p),
                };
                for r in 0..4 {
                    for c in 0..4 {
                        if al[(r, c)] != ZERO {
                            t.push((4 * s + r, (4 * tgt + c) as u32, al[(r, c)] * kd));
                        }
                    }
                }
            }
        }
        // mass and potential blocks
        let blk = matrices.beta * C64::new(mass, 0.0) + v.blocks[s];
        for r in 0..4 {
            for c in 0..4 {
                if blk[(r, c)] != ZERO {
                    t.push((4 * s + r, (4 * s + c) as u32, blk[(r, c)]));
                }
            }
        }
    }
    let mut m = Csr::from_triplets(lattice.dim(), lattice.dim(), t);
    m.prune(1e-15);
    Ok(m)
}

/// Multiplication operator by a per-site scalar, lifted to spinors.
pub fn site_multiplication(lattice: &SpinorLattice, f: &[C64]) -> Csr {
    assert_eq!(f.len(), lattice.site_count());
    let d: Vec<C64> = (0..lattice.dim()).map(|i| f[i / 4]).collect();
    Csr::from_diag(&d)
}

/// Spectral partial derivative of a per-site function (exact for
/// band-limited data).
pub fn spectral_partial(lattice: &SpinorLattice, f: &[C64], axis: usize) -> Vec<C64> {
    let p = lattice.extent;
    let n = lattice.site_count();
    assert_eq!(f.len(), n);
    // forward transform along all axes is overkill; convolve along one axis
    let kernel = lattice.momentum_kernel(); // multiplier k  (for -i d/dx use i*k*... )
    let mut out = vec![ZERO; n];
    for s in 0..n {
        let (ix, iy, iz) = (s % p, (s / p) % p, s / (p * p));
        let mut acc = ZERO;
        for d in 0..p {
            let src = match axis {
                0 => lattice.site_index((ix + p - d) % p, iy, iz),
                1 => lattice.site_index(ix, (iy + p - d) % p, iz),
                _ => lattice.site_index(ix, iy, (iz + p - d) % p),
            };
            acc += kernel[d] * f[src];
        }
        // kernel realizes p = -i d/dx, so d/dx = i p
        out[s] = I * acc;
    }
    out
}

/// Charge-parity conjugation data from Pauli's lemma: a real symmetric
/// unitary U with U alpha^j U^{-1} = conj(alpha^j) and U beta U^{-1} = -beta.
#[derive(Clone, Debug)]
pub struct CPConjugation {
    pub u: Matrix4<C64>,
}

/// U = i beta alpha^2 in the Dirac representation; verified at construction.
pub fn pauli_conjugation(matrices: &DiracMatrices) -> Result<CPConjugation> {
    let u = matrices.beta * matrices.alpha[1] * I;
    let tol = 1e-14;
    let id = Matrix4::<C64>::identity();
    if (u * u - id).norm() > tol {
        return Err(Error::PauliVerification("U^2 != 1".into()));
    }
    if u.iter().any(|z| z.im.abs() > tol) {
        return Err(Error::PauliVerification("U not real (UC != CU)".into()));
    }
    for (j, a) in matrices.alpha.iter().enumerate() {
        let want = a.map(|z| z.conj());
        if (u * a * u - want).norm() > tol {
            return Err(Error::PauliVerification(format!(
                "U alpha^{} U^-1 != conj(alpha^{})",
                j + 1,
                j + 1
            )));
        }
    }
    if (u * matrices.beta * u + matrices.beta).norm() > tol {
        return Err(Error::PauliVerification("U beta U^-1 != -beta".into()));
    }
    Ok(CPConjugation { u })
}

impl CPConjugation {
    /// Antilinear one-particle action (J psi)(x, l) = U_{lm} psi(-x, m)^*.
    pub fn apply_lattice(&self, lattice: &SpinorLattice, psi: &[C64]) -> Vec<C64> {
        assert_eq!(psi.len(), lattice.dim());
        let mut out = vec![ZERO; psi.len()];
        for s in 0..lattice.site_count() {
            let sp = lattice.parity_site(s);
            for l in 0..4 {
                let mut acc = ZERO;
                for m in 0..4 {
                    acc += self.u[(l, m)] * psi[4 * sp + m].conj();
                }
                out[4 * s + l] = acc;
            }
        }
        out
    }
}

/// Whether the potential satisfies the CP condition U^-1 V(x) U = V(-x)^*.
pub fn cp_invariance_defect(
    v: &PotentialField,
    lattice: &SpinorLattice,
    cp: &CPConjugation,
) -> f64 {
    let mut worst = 0.0f64;
    for s in 0..lattice.site_count() {
        let sp = lattice.parity_site(s);
        let lhs = cp.u * v.blocks[s] * cp.u; // U^{-1} = U
        let rhs = v.blocks[sp].map(|z| z.conj());
        worst = worst.max((lhs - rhs).norm());
    }
    worst
}

/// Two-particle antisymmetrizer A = (1 - SWAP)/2 on the doubled sector.
pub fn antisymmetrize_two(lattice: &SpinorLattice, psi: &[C64]) -> Vec<C64> {
    let d = lattice.dim();
    assert_eq!(psi.len(), d * d);
    let mut out = vec![ZERO; d * d];
    for a in 0..d {
        for b in 0..d {
            out[a * d + b] = (psi[a * d + b] - psi[b * d + a]) * C64::new(0.5, 0.0);
        }
    }
    out
}

/// H_D(V, 2) psi = (H (x) 1 + 1 (x) H) psi on the doubled sector.
pub fn two_particle_apply(h: &Csr, psi: &[C64]) -> Vec<C64> {
    let d = h.nrows();
    assert_eq!(psi.len(), d * d);
    let mut out = vec![ZERO; d * d];
    // first factor
    for a in 0..d {
        for (ap, v) in h.row(a) {
            for b in 0..d {
                out[a * d + b] += v * psi[ap * d + b];
            }
        }
    }
    // second factor
    for b in 0..d {
        for (bp, v) in h.row(b) {
            for a in 0..d {
                out[a * d + b] += v * psi[a * d + bp];
            }
        }
    }
    out
}

/// Eigenvalues of the free 4x4 Dirac symbol alpha.k + M beta.
pub fn symbol_eigenvalues(matrices: &DiracMatrices, k: [f64; 3], mass: f64) -> Vec<f64> {
    let mut m = Matrix4::<C64>::zeros();
    for (j, kj) in k.iter().enumerate() {
        m += matrices.alpha[j] * C64::new(*kj, 0.0);
    }
    m += matrices.beta * C64::new(mass, 0.0);
    let dm = DMatrix::from_iterator(4, 4, m.iter().cloned());
    let (mut e, _) = hermitian_eigen(&dm);
    e.sort_by(|a, b| a.partial_cmp(b).unwrap());
    e
}
