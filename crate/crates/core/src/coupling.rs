//! The coupled space: Dirac sector tensored with the photon Fock space,
//! fibered over particle positions.
//!
//! Two particle sectors are supported. `Quantum` puts one Dirac particle on
//! the lattice; operators live on dim = 4 P^3 * dim(Fock) with the coupled
//! index d * fock_dim + f. `Fixed` treats particle positions as external
//! parameters and replaces alpha^{a mu} by a constant unit 4-vector weight,
//! so everything happens on the bare Fock space; this is a harness mode for
//! Gupta-Bleuler and dressing runs where e^{iG} is an exact displacement.
//!
//! Grids used here should be inversion symmetric: the c-number pieces of
//! the commutator identities cancel through the k -> -k pairing, exactly as
//! the continuum integrals do by oddness.

use crate::dirac::{
    build_dirac_hamiltonian, DiracMatrices, PotentialField, SpinorLattice,
};
use crate::error::{Error, Result};
use crate::fock::{
    annihilation_a, creation_a, dgamma_omega, eta_signs, FockOperator, OccupationBasis,
};
use crate::kinematics::{CutoffProfile, Frames, ModeGrid};
use crate::linalg::Csr;
use num_complex::Complex64 as C64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);
const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Photon-side context: grid, polarization frames and occupation basis.
#[derive(Clone, Debug)]
pub struct FockCtx {
    pub grid: ModeGrid,
    pub frames: Frames,
    pub basis: OccupationBasis,
}

impl FockCtx {
    pub fn new(grid: ModeGrid, n0: u32) -> Result<Self> {
        let frames = Frames::build(&grid)?;
        let basis = OccupationBasis::new(4 * grid.len(), n0);
        Ok(FockCtx { grid, frames, basis })
    }
}

#[derive(Clone, Debug)]
pub enum Sector {
    /// Classical source positions; alpha^{a mu} replaced by `current`.
    Fixed {
        positions: Vec<[f64; 3]>,
        current: [f64; 4],
    },
    /// One lattice Dirac particle.
    Quantum {
        lattice: SpinorLattice,
        matrices: DiracMatrices,
        potential: PotentialField,
        mass: f64,
    },
}

#[derive(Clone, Debug)]
pub struct CoupledSpace {
    pub sector: Sector,
    pub fock: FockCtx,
}

impl CoupledSpace {
    pub fn fixed(positions: Vec<[f64; 3]>, fock: FockCtx) -> Self {
        CoupledSpace {
            sector: Sector::Fixed {
                positions,
                current: [1.0, 0.0, 0.0, 0.0],
            },
            fock,
        }
    }

    pub fn quantum(
        lattice: SpinorLattice,
        potential: PotentialField,
        mass: f64,
        fock: FockCtx,
    ) -> Self {
        CoupledSpace {
            sector: Sector::Quantum {
                lattice,
                matrices: DiracMatrices::dirac_representation(),
                potential,
                mass,
            },
            fock,
        }
    }

    pub fn dirac_dim(&self) -> usize {
        match &self.sector {
            Sector::Fixed { .. } => 1,
            Sector::Quantum { lattice, .. } => lattice.dim(),
        }
    }

    pub fn fock_dim(&self) -> usize {
        self.fock.basis.dim()
    }

    pub fn dim(&self) -> usize {
        self.dirac_dim() * self.fock_dim()
    }

    /// Photon level of a coupled basis index.
    pub fn level(&self, i: usize) -> u32 {
        self.fock.basis.level(i % self.fock_dim())
    }

    pub fn level_mask(&self, l: u32) -> Vec<bool> {
        let fd = self.fock_dim();
        (0..self.dim())
            .map(|i| self.fock.basis.level(i % fd) <= l)
            .collect()
    }

    /// eta sign per coupled index (the Dirac factor is untouched).
    pub fn eta_signs(&self) -> Vec<f64> {
        let fs = eta_signs(&self.fock.basis);
        let fd = self.fock_dim();
        (0..self.dim()).map(|i| fs[i % fd]).collect()
    }

    /// Physical pairing <psi | phi> = <psi, eta phi>.
    pub fn physical_pairing(&self, psi: &[C64], phi: &[C64]) -> C64 {
        let signs = self.eta_signs();
        psi.iter()
            .zip(phi.iter().zip(&signs))
            .map(|(a, (b, &s))| a.conj() * b * C64::new(s, 0.0))
            .sum()
    }

    /// Id_dirac (x) op.
    pub fn lift_fock(&self, op: &Csr) -> Csr {
        let fd = self.fock_dim();
        let dd = self.dirac_dim();
        if dd == 1 {
            return op.clone();
        }
        let mut t = Vec::with_capacity(op.nnz() * dd);
        for d in 0..dd {
            let base = d * fd;
            for r in 0..fd {
                for (c, v) in op.row(r) {
                    t.push((base + r, (base + c) as u32, v));
                }
            }
        }
        Csr::from_triplets(self.dim(), self.dim(), t)
    }

    /// op (x) Id_fock.
    pub fn lift_dirac(&self, op: &Csr) -> Csr {
        let fd = self.fock_dim();
        let dd = self.dirac_dim();
        assert_eq!(op.nrows(), dd);
        let mut t = Vec::with_capacity(op.nnz() * fd);
        for r in 0..dd {
            for (c, v) in op.row(r) {
                for f in 0..fd {
                    t.push((r * fd + f, (c * fd + f) as u32, v));
                }
            }
        }
        Csr::from_triplets(self.dim(), self.dim(), t)
    }
}

/// Lattice-matched photon grid: all nonzero dual momenta of the lattice
/// whose true magnitude satisfies `keep`, weighted by the dual-cell volume
/// kappa^3. Keep the support below the Nyquist magnitude so the grid stays
/// inversion symmetric.
pub fn lattice_matched_grid(
    lattice: &SpinorLattice,
    keep: impl Fn(f64) -> bool,
) -> Result<ModeGrid> {
    let p = lattice.extent;
    let kt = lattice.true_momentum_values();
    let kappa = 2.0 * std::f64::consts::PI / (p as f64 * lattice.spacing);
    let mut modes = Vec::new();
    for mz in 0..p {
        for my in 0..p {
            for mx in 0..p {
                let k = [kt[mx], kt[my], kt[mz]];
                let kn = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
                if kn > 0.0 && keep(kn) {
                    modes.push(k);
                }
            }
        }
    }
    ModeGrid::with_uniform_weight(modes, kappa.powi(3))
}

/// Position-space smearing seen through the photon grid: the direct
/// Fourier data f-hat(k_i) and the transform of the complex conjugate.
#[derive(Clone, Debug)]
pub struct Smearing {
    pub fhat: Vec<C64>,
    pub fhat_star: Vec<C64>,
}

impl Smearing {
    /// Direct transform of a lattice site function:
    /// f-hat(k) = (2 pi)^{-3/2} a^3 sum_x f(x) e^{-i k.x}.
    pub fn from_lattice(lattice: &SpinorLattice, grid: &ModeGrid, f: &[C64]) -> Self {
        assert_eq!(f.len(), lattice.site_count());
        let c = (2.0 * std::f64::consts::PI).powf(-1.5) * lattice.spacing.powi(3);
        let mut fhat = Vec::with_capacity(grid.len());
        let mut fhat_star = Vec::with_capacity(grid.len());
        for k in &grid.modes {
            let mut a = ZERO;
            let mut b = ZERO;
            for (s, fs) in f.iter().enumerate() {
                let x = lattice.site_coords(s);
                let ph = C64::from_polar(1.0, -(k[0] * x[0] + k[1] * x[1] + k[2] * x[2]));
                a += fs * ph;
                b += fs.conj() * ph;
            }
            fhat.push(a * C64::new(c, 0.0));
            fhat_star.push(b * C64::new(c, 0.0));
        }
        Smearing { fhat, fhat_star }
    }

    /// From momentum-space data on an inversion-symmetric grid, where
    /// hat(f^*)(k) = conj(f-hat(-k)).
    pub fn from_grid_data(grid: &ModeGrid, fhat: Vec<C64>) -> Result<Self> {
        if fhat.len() != grid.len() {
            return Err(Error::GridMismatch {
                expected: grid.len(),
                got: fhat.len(),
            });
        }
        let neg = grid.neg_index().ok_or_else(|| {
            Error::Config("grid is not inversion symmetric; cannot form hat(f*)".into())
        })?;
        let fhat_star = (0..fhat.len()).map(|i| fhat[neg[i]].conj()).collect();
        Ok(Smearing { fhat, fhat_star })
    }

    /// A cutoff profile at source point x, as a smearing.
    pub fn from_profile(grid: &ModeGrid, profile: &CutoffProfile, x: &[f64; 3]) -> Self {
        let shifted = profile.shifted(grid, x);
        // chi real and even: hat(chi^x *) = hat(chi^x)
        Smearing {
            fhat: shifted.clone(),
            fhat_star: shifted,
        }
    }

    /// Apply a (complex) function of omega as an operator on the smearing:
    /// hat(S f)(k) = s(omega) f-hat(k); hat((S f)^*)(k) = conj(s(omega)) hat(f^*)(k).
    pub fn apply_symbol(&self, grid: &ModeGrid, s: impl Fn(f64) -> C64) -> Smearing {
        let fhat = self
            .fhat
            .iter()
            .zip(&grid.omega)
            .map(|(v, &w)| v * s(w))
            .collect();
        let fhat_star = self
            .fhat_star
            .iter()
            .zip(&grid.omega)
            .map(|(v, &w)| v * s(w).conj())
            .collect();
        Smearing { fhat, fhat_star }
    }

    /// Multiply both Fourier arguments by s(omega) literally. This is the
    /// commutator insertion [i dGamma(omega), -]: annihilation and creation
    /// arguments pick up the same factor as written functions of k, unlike
    /// `apply_symbol`, which conjugates on the star side.
    pub fn scale_both(&self, grid: &ModeGrid, s: impl Fn(f64) -> C64) -> Smearing {
        let fhat = self
            .fhat
            .iter()
            .zip(&grid.omega)
            .map(|(v, &w)| v * s(w))
            .collect();
        let fhat_star = self
            .fhat_star
            .iter()
            .zip(&grid.omega)
            .map(|(v, &w)| v * s(w))
            .collect();
        Smearing { fhat, fhat_star }
    }
}

/// The four components A_mu as Fock operators, with the smearing retained.
#[derive(Clone, Debug)]
pub struct GaugeFieldOp {
    pub comps: [FockOperator; 4],
}

/// A_mu(f) = (a_mu(hat(f^*)/sqrt w) + a^+_mu(f-hat/sqrt w)) / sqrt 2.
pub fn gauge_field_smeared(fock: &FockCtx, f: &Smearing) -> Result<GaugeFieldOp> {
    let ann: Vec<C64> = f
        .fhat_star
        .iter()
        .zip(&fock.grid.omega)
        .map(|(v, &w)| v / C64::new(w.sqrt(), 0.0))
        .collect();
    let cre: Vec<C64> = f
        .fhat
        .iter()
        .zip(&fock.grid.omega)
        .map(|(v, &w)| v / C64::new(w.sqrt(), 0.0))
        .collect();
    let comps = build_four(fock, &ann, &cre)?;
    Ok(GaugeFieldOp { comps })
}

/// Point field A_mu(x) = A_mu(chi^x) with the phase-shifted profile.
pub fn gauge_field_point(
    fock: &FockCtx,
    profile: &CutoffProfile,
    x: &[f64; 3],
) -> Result<GaugeFieldOp> {
    let s = Smearing::from_profile(&fock.grid, profile, x);
    gauge_field_smeared(fock, &s)
}

fn build_four(fock: &FockCtx, ann: &[C64], cre: &[C64]) -> Result<[FockOperator; 4]> {
    let mut out = Vec::with_capacity(4);
    for mu in 0..4 {
        let a = annihilation_a(&fock.basis, &fock.grid, &fock.frames, mu, ann)?;
        let c = creation_a(&fock.basis, &fock.grid, &fock.frames, mu, cre)?;
        out.push(a.add(&c).scaled(C64::new(INV_SQRT2, 0.0)));
    }
    Ok(out.try_into().map_err(|_| Error::Dimension("four components".into())).unwrap())
}

/// H0, H1 and H = H0 + H1 on the coupled space, plus the pieces needed for
/// interaction-picture phases.
#[derive(Clone, Debug)]
pub struct Hamiltonians {
    pub h0: Csr,
    pub h1: Csr,
    pub h: Csr,
    /// dGamma(omega) diagonal per Fock index.
    pub dgamma: Vec<f64>,
    /// Dirac-sector Hamiltonian (None in fixed mode).
    pub h_dirac: Option<Csr>,
}

pub fn build_hamiltonians(
    space: &CoupledSpace,
    q: f64,
    profile: &CutoffProfile,
) -> Result<Hamiltonians> {
    if profile.values.len() != space.fock.grid.len() {
        return Err(Error::GridMismatch {
            expected: space.fock.grid.len(),
            got: profile.values.len(),
        });
    }
    let dgamma = dgamma_omega(&space.fock.basis, &space.fock.grid);
    let fd = space.fock_dim();
    match &space.sector {
        Sector::Fixed { positions, current } => {
            let h0 = Csr::from_diag(&dgamma.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>());
            let mut h1 = Csr::zero(fd, fd);
            for x in positions {
                let a = gauge_field_point(&space.fock, profile, x)?;
                for mu in 0..4 {
                    if q * current[mu] != 0.0 {
                        h1 = h1.add_scaled(ONE, &a.comps[mu].mat, C64::new(q * current[mu], 0.0));
                    }
                }
            }
            let h = h0.add_scaled(ONE, &h1, ONE);
            Ok(Hamiltonians {
                h0,
                h1,
                h,
                dgamma,
                h_dirac: None,
            })
        }
        Sector::Quantum {
            lattice,
            matrices,
            potential,
            mass,
        } => {
            let hd = build_dirac_hamiltonian(potential, *mass, lattice, matrices)?;
            let h0 = {
                let kin = space.lift_dirac(&hd);
                let dg: Vec<C64> = (0..space.dim())
                    .map(|i| C64::new(dgamma[i % fd], 0.0))
                    .collect();
                kin.add_scaled(ONE, &Csr::from_diag(&dg), ONE)
            };
            // H1 = q sum_mu alpha^mu (x) A_mu(x_s), block-diagonal over sites
            let mut trip: Vec<(usize, u32, C64)> = Vec::new();
            for s in 0..lattice.site_count() {
                let x = lattice.site_coords(s);
                let a = gauge_field_point(&space.fock, profile, &x)?;
                for mu in 0..4 {
                    let al = matrices.alpha_upper(mu);
                    let aop = &a.comps[mu].mat;
                    for r in 0..4 {
                        for c in 0..4 {
                            let w = al[(r, c)] * C64::new(q, 0.0);
                            if w == ZERO {
                                continue;
                            }
                            let row_base = (4 * s + r) * fd;
                            let col_base = (4 * s + c) * fd;
                            for fr in 0..fd {
                                for (fc, v) in aop.row(fr) {
                                    trip.push((row_base + fr, (col_base + fc) as u32, w * v));
                                }
                            }
                        }
                    }
                }
            }
            let h1 = Csr::from_triplets(space.dim(), space.dim(), trip);
            let h = h0.add_scaled(ONE, &h1, ONE);
            Ok(Hamiltonians {
                h0,
                h1,
                h,
                dgamma,
                h_dirac: Some(hd),
            })
        }
    }
}

/// j^mu(f): multiplication by f(x^a) times alpha^{a mu} on the Dirac
/// factor; in fixed mode the scalar q sum_a n^mu f(x^a) times the identity.
pub fn current_op(space: &CoupledSpace, q: f64, mu: usize, f_sites: &[C64]) -> Csr {
    let fd = space.fock_dim();
    match &space.sector {
        Sector::Fixed { positions, current } => {
            // f sampled at the fixed positions: caller passes one value per source
            assert_eq!(f_sites.len(), positions.len());
            let total: C64 = f_sites
                .iter()
                .map(|&v| v * C64::new(q * current[mu], 0.0))
                .sum();
            Csr::identity(fd).scaled(total)
        }
        Sector::Quantum {
            lattice, matrices, ..
        } => {
            assert_eq!(f_sites.len(), lattice.site_count());
            let al = matrices.alpha_upper(mu);
            let mut trip = Vec::new();
            for s in 0..lattice.site_count() {
                let w = f_sites[s] * C64::new(q, 0.0);
                if w == ZERO {
                    continue;
                }
                for r in 0..4 {
                    for c in 0..4 {
                        if al[(r, c)] != ZERO {
                            for fr in 0..fd {
                                trip.push((
                                    (4 * s + r) * fd + fr,
                                    ((4 * s + c) * fd + fr) as u32,
                                    w * al[(r, c)],
                                ));
                            }
                        }
                    }
                }
            }
            Csr::from_triplets(space.dim(), space.dim(), trip)
        }
    }
}

/// Defect of eta-symmetry: max |(eta H) - (eta H)^*T| entry. The truncation
/// shadow of eta-self-adjointness of the Hamiltonian.
pub fn eta_symmetry_defect(space: &CoupledSpace, h: &Csr) -> f64 {
    let signs = space.eta_signs();
    let d: Vec<C64> = signs.iter().map(|&s| C64::new(s, 0.0)).collect();
    let eta = Csr::from_diag(&d);
    let eh = eta.matmul(h);
    eh.add_scaled(ONE, &eh.conj_transpose(), -ONE).max_abs()
}

/// Charge-parity conjugation on the coupled space: spinor rotation with
/// Pauli's U, point reflection of the lattice, and complex conjugation of
/// all amplitudes (the occupation basis is built from real mode functions,
/// so Gamma(C) is entrywise conjugation there).
pub fn cp_apply(space: &CoupledSpace, u: &nalgebra::Matrix4<C64>, psi: &[C64]) -> Vec<C64> {
    let fd = space.fock_dim();
    match &space.sector {
        Sector::Fixed { .. } => psi.iter().map(|z| z.conj()).collect(),
        Sector::Quantum { lattice, .. } => {
            let mut out = vec![ZERO; psi.len()];
            for s in 0..lattice.site_count() {
                let sp = lattice.parity_site(s);
                for l in 0..4 {
                    for fi in 0..fd {
                        let mut acc = ZERO;
                        for m in 0..4 {
                            acc += u[(l, m)] * psi[(4 * sp + m) * fd + fi].conj();
                        }
                        out[(4 * s + l) * fd + fi] = acc;
                    }
                }
            }
            out
        }
    }
}

/// sup over samples of |J (H - M beta) psi - (H - M beta) J psi| / |psi|.
pub fn cp_commutation_residual(
    space: &CoupledSpace,
    h: &Csr,
    samples: &[Vec<C64>],
) -> Result<f64> {
    let Sector::Quantum {
        lattice,
        matrices,
        mass,
        ..
    } = &space.sector
    else {
        return Err(Error::Config("CP check needs the quantum sector".into()));
    };
    let cp = crate::dirac::pauli_conjugation(matrices)?;
    let fd = space.fock_dim();
    // H - sum_a beta^a M^a: subtract the mass block
    let beta_m = {
        let mut trip = Vec::new();
        for s in 0..lattice.site_count() {
            for r in 0..4 {
                for c in 0..4 {
                    let v = matrices.beta[(r, c)] * C64::new(*mass, 0.0);
                    if v != ZERO {
                        for fi in 0..fd {
                            trip.push(((4 * s + r) * fd + fi, ((4 * s + c) * fd + fi) as u32, v));
                        }
                    }
                }
            }
        }
        Csr::from_triplets(space.dim(), space.dim(), trip)
    };
    let hm = h.add_scaled(ONE, &beta_m, -ONE);
    let mut worst = 0.0f64;
    for psi in samples {
        let lhs = cp_apply(space, &cp.u, &hm.apply(psi));
        let rhs = hm.apply(&cp_apply(space, &cp.u, psi));
        let r = crate::linalg::dist(&lhs, &rhs) / crate::linalg::norm(psi).max(1e-300);
        worst = worst.max(r);
    }
    Ok(worst)
}

/// ad(B) psi = [iH, B] psi via applications.
pub fn ad_apply(h: &Csr, b: &Csr, psi: &[C64]) -> Vec<C64> {
    let hb = h.apply(&b.apply(psi));
    let bh = b.apply(&h.apply(psi));
    hb.iter().zip(&bh).map(|(x, y)| I * (x - y)).collect()
}

/// ad^2(B) psi = [iH,[iH,B]] psi via applications.
pub fn ad2_apply(h: &Csr, b: &Csr, psi: &[C64]) -> Vec<C64> {
    let m1 = ad_apply_vecfn(h, b, psi);
    // second commutator: [iH, .] of the first result needs operator form;
    // expand instead: ad^2(B) = (iH)^2 B - 2 (iH) B (iH) + B (iH)^2
    let _ = m1;
    let ih = |x: &[C64]| -> Vec<C64> { h.apply(x).iter().map(|z| I * z).collect() };
    let bpsi = b.apply(psi);
    let t1 = ih(&ih(&bpsi));
    let ihpsi = ih(psi);
    let t2 = ih(&b.apply(&ihpsi));
    let t3 = b.apply(&ih(&ihpsi));
    (0..psi.len())
        .map(|i| t1[i] - C64::new(2.0, 0.0) * t2[i] + t3[i])
        .collect()
}

fn ad_apply_vecfn(h: &Csr, b: &Csr, psi: &[C64]) -> Vec<C64> {
    ad_apply(h, b, psi)
}

/// Residual of the conservation identity [iH, j^0(f)] = j^k(d_k f) on the
/// given states, with the derivatives taken spectrally on the lattice.
pub fn conservation_residual(
    space: &CoupledSpace,
    h: &Csr,
    q: f64,
    f_sites: &[C64],
    band: usize,
    states: &[Vec<C64>],
) -> Result<f64> {
    let Sector::Quantum { lattice, .. } = &space.sector else {
        return Err(Error::Config("conservation check needs the quantum sector".into()));
    };
    check_band_limit(lattice, f_sites, band)?;
    let j0 = current_op(space, q, 0, f_sites);
    let mut jk = Csr::zero(space.dim(), space.dim());
    for axis in 0..3 {
        let df = crate::dirac::spectral_partial(lattice, f_sites, axis);
        jk = jk.add_scaled(ONE, &current_op(space, q, axis + 1, &df), ONE);
    }
    let mut worst = 0.0f64;
    for psi in states {
        let lhs = ad_apply(h, &j0, psi);
        let rhs = jk.apply(psi);
        worst = worst
            .max(crate::linalg::dist(&lhs, &rhs) / crate::linalg::norm(psi).max(1e-300));
    }
    Ok(worst)
}

/// Band-limit admission: f may carry harmonics |m| <= band per axis.
fn check_band_limit(lattice: &SpinorLattice, f: &[C64], band: usize) -> Result<()> {
    let coeffs = lattice.fourier_coefficients(f);
    let p = lattice.extent;
    let wrap = |j: usize| -> i64 {
        let pj = p as i64;
        if (j as i64) <= (pj - 1) / 2 {
            j as i64
        } else {
            j as i64 - pj
        }
    };
    let scale = f.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    for (mi, cm) in coeffs.iter().enumerate() {
        let m = [wrap(mi % p), wrap((mi / p) % p), wrap(mi / (p * p))];
        if m.iter().any(|&x| x.unsigned_abs() as usize > band) && cm.norm() > 1e-12 * scale {
            return Err(Error::Aliasing(format!(
                "harmonic {m:?} present with weight {:.2e}, band limit {band}",
                cm.norm()
            )));
        }
    }
    Ok(())
}

/// The two equation-of-motion residuals:
///   r1 = max |(ad(A_mu(f)) - Pi_mu(f)) psi| / |psi|
///   r2 = max |(ad^2(A_mu(f)) - A_mu(lap f) + j_mu(chi * f)) psi| / |psi|
/// with lap f and chi * f computed spectrally on the lattice.
pub fn eom_residuals(
    space: &CoupledSpace,
    hams: &Hamiltonians,
    q: f64,
    profile: &CutoffProfile,
    f_sites: &[C64],
    states: &[Vec<C64>],
) -> Result<(f64, f64)> {
    let Sector::Quantum { lattice, .. } = &space.sector else {
        return Err(Error::Config("equation of motion check needs the quantum sector".into()));
    };
    let grid = &space.fock.grid;
    let smear = Smearing::from_lattice(lattice, grid, f_sites);
    let mut r1 = 0.0f64;
    let mut r2 = 0.0f64;

    // Pi_mu(f): the same ladder combination with (i omega) inserted into
    // both arguments (commutator insertion, not operator transport)
    let pi_smear = smear.scale_both(grid, |w| C64::new(0.0, w));
    // A_mu(lap f) from the lattice Laplacian
    let lap = lattice.laplacian(f_sites);
    let lap_smear = Smearing::from_lattice(lattice, grid, &lap);
    // chi * f on the lattice: multiplier (2 pi)^{3/2} chi-hat(|k|)
    let c32 = (2.0 * std::f64::consts::PI).powf(1.5);
    let kind = profile.kind.clone();
    let nrm = profile.normalization;
    let conv = lattice.radial_multiplier(f_sites, |kn| {
        if kn == 0.0 {
            c32 * nrm * kind.eval(0.0)
        } else {
            c32 * nrm * kind.eval(kn)
        }
    });

    for mu in 0..4 {
        let a_f = space.lift_fock(
            &gauge_field_smeared(&space.fock, &smear)?.comps[mu].mat,
        );
        let pi_f = space.lift_fock(
            &gauge_field_smeared(&space.fock, &pi_smear)?.comps[mu].mat,
        );
        let a_lap = space.lift_fock(
            &gauge_field_smeared(&space.fock, &lap_smear)?.comps[mu].mat,
        );
        // j_mu = eta_{mu mu} j^mu
        let j_mu =
            current_op(space, q, mu, &conv).scaled(C64::new(crate::kinematics::METRIC_SIGN[mu], 0.0));
        for psi in states {
            let nrm_psi = crate::linalg::norm(psi).max(1e-300);
            let lhs1 = ad_apply(&hams.h, &a_f, psi);
            let rhs1 = pi_f.apply(psi);
            r1 = r1.max(crate::linalg::dist(&lhs1, &rhs1) / nrm_psi);

            let lhs2 = ad2_apply(&hams.h, &a_f, psi);
            let mut rhs2 = a_lap.apply(psi);
            let jpsi = j_mu.apply(psi);
            for (a, b) in rhs2.iter_mut().zip(&jpsi) {
                *a -= b;
            }
            r2 = r2.max(crate::linalg::dist(&lhs2, &rhs2) / nrm_psi);
        }
    }
    Ok((r1, r2))
}

/// The t = 0 divergence field built from commutators,
/// -ad(A_0(f)) - sum_k A_k(d_k f), as a coupled operator.
pub fn divergence_from_commutators(
    space: &CoupledSpace,
    hams: &Hamiltonians,
    f_smear: &Smearing,
    df_smears: &[Smearing; 3],
) -> Result<Csr> {
    let a0 = space.lift_fock(&gauge_field_smeared(&space.fock, f_smear)?.comps[0].mat);
    // ad(A_0) as an operator: i(H A - A H)
    let ha = hams.h.matmul(&a0);
    let ah = a0.matmul(&hams.h);
    let pi0 = ha.add_scaled(I, &ah, -I);
    let mut total = pi0.scaled(-ONE);
    for k in 0..3 {
        let ak = space.lift_fock(&gauge_field_smeared(&space.fock, &df_smears[k])?.comps[k + 1].mat);
        total = total.add_scaled(ONE, &ak, -ONE);
    }
    Ok(total)
}

/// Random photon-guarded, band-limited sample states.
pub fn sample_states(
    space: &CoupledSpace,
    level: u32,
    band: usize,
    count: usize,
    rng: &mut impl rand::Rng,
) -> Vec<Vec<C64>> {
    let fd = space.fock_dim();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut psi = vec![ZERO; space.dim()];
        match &space.sector {
            Sector::Fixed { .. } => {
                for (fi, v) in psi.iter_mut().enumerate() {
                    if space.fock.basis.level(fi) <= level {
                        *v = C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
                    }
                }
            }
            Sector::Quantum { lattice, .. } => {
                // a few random band-limited plane waves x random spinor,
                // tensored with random low-level Fock amplitudes
                let p = lattice.extent;
                for _ in 0..3 {
                    let mut mi = [0usize; 3];
                    for m in mi.iter_mut() {
                        let b = rng.gen_range(0..=(2 * band)) as i64 - band as i64;
                        *m = ((b + p as i64) % p as i64) as usize;
                    }
                    let wave = lattice.plane_wave(mi);
                    let chi: [C64; 4] = std::array::from_fn(|_| {
                        C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
                    });
                    let mut fock_amp = vec![ZERO; fd];
                    for (fi, v) in fock_amp.iter_mut().enumerate() {
                        if space.fock.basis.level(fi) <= level {
                            *v = C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
                        }
                    }
                    for s in 0..lattice.site_count() {
                        for c in 0..4 {
                            for (fi, fa) in fock_amp.iter().enumerate() {
                                psi[(4 * s + c) * fd + fi] += wave[s] * chi[c] * fa;
                            }
                        }
                    }
                }
            }
        }
        let n = crate::linalg::norm(&psi);
        if n > 0.0 {
            crate::linalg::scale(C64::new(1.0 / n, 0.0), &mut psi);
        }
        out.push(psi);
    }
    out
}
