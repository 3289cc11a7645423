//! Truncated bosonic Fock space over the 4-component photon mode space.
//!
//! One ladder slot per (mode, Lorentz index) pair, slots ordered by
//! (mode index, Lorentz index). Storage uses the auxiliary positive inner
//! product throughout; the indefinite pairing goes through the explicit
//! metric operator eta = Gamma(diag(-1,1,1,1)), which on an occupation
//! state is (-1)^{number of mu = 0 photons}.
//!
//! Truncation bookkeeping: a `TruncationBudget` pins the base level L and a
//! guard g. Any expression whose factors raise the total photon number by
//! at most g units in aggregate is evaluated exactly on V_L as long as the
//! basis keeps n0 >= L + g; `guarded_commutator` enforces this.

use crate::error::{Error, Result};
use crate::kinematics::{Frames, ModeGrid, METRIC_SIGN};
use crate::linalg::Csr;
use num_complex::Complex64 as C64;
use std::collections::HashMap;

/// Enumerated occupation basis with total photon number <= max_total.
///
/// Enumeration is plain lexicographic on the multi-index, so it is total,
/// duplicate-free and stable across runs.
#[derive(Clone, Debug)]
pub struct OccupationBasis {
    pub slot_count: usize,
    pub max_total: u32,
    states: Vec<Vec<u16>>,
    index: HashMap<Vec<u16>, usize>,
    levels: Vec<u32>,
}

impl OccupationBasis {
    pub fn new(slot_count: usize, max_total: u32) -> Self {
        let mut states = Vec::new();
        let mut cur = vec![0u16; slot_count];
        enumerate(&mut states, &mut cur, 0, max_total);
        states.sort_unstable();
        let mut index = HashMap::with_capacity(states.len());
        let mut levels = Vec::with_capacity(states.len());
        for (i, s) in states.iter().enumerate() {
            index.insert(s.clone(), i);
            levels.push(s.iter().map(|&n| n as u32).sum());
        }
        OccupationBasis {
            slot_count,
            max_total,
            states,
            index,
            levels,
        }
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, i: usize) -> &[u16] {
        &self.states[i]
    }

    pub fn level(&self, i: usize) -> u32 {
        self.levels[i]
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn find(&self, state: &[u16]) -> Option<usize> {
        self.index.get(state).copied()
    }

    /// Index of the vacuum (all slots empty).
    pub fn vacuum(&self) -> usize {
        self.find(&vec![0u16; self.slot_count]).expect("vacuum present")
    }

    pub fn vacuum_vector(&self) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); self.dim()];
        v[self.vacuum()] = C64::new(1.0, 0.0);
        v
    }

    /// Mask of states with level <= l.
    pub fn level_mask(&self, l: u32) -> Vec<bool> {
        self.levels.iter().map(|&n| n <= l).collect()
    }

    /// Expected dimension: sum_m C(slots + m - 1, m).
    pub fn expected_dim(slot_count: usize, max_total: u32) -> u128 {
        (0..=max_total as u128)
            .map(|m| binomial(slot_count as u128 + m - 1, m))
            .sum()
    }
}

fn enumerate(out: &mut Vec<Vec<u16>>, cur: &mut Vec<u16>, slot: usize, left: u32) {
    if slot == cur.len() {
        out.push(cur.clone());
        return;
    }
    for n in 0..=left {
        cur[slot] = n as u16;
        enumerate(out, cur, slot + 1, left - n);
    }
    cur[slot] = 0;
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1u128;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Sparse operator on the occupation basis together with the interval
/// [lo, hi] by which it can change the total photon number.
#[derive(Clone, Debug)]
pub struct FockOperator {
    pub mat: Csr,
    pub shift: (i32, i32),
}

impl FockOperator {
    pub fn zero(basis: &OccupationBasis) -> Self {
        FockOperator {
            mat: Csr::zero(basis.dim(), basis.dim()),
            shift: (0, 0),
        }
    }

    pub fn identity(basis: &OccupationBasis) -> Self {
        FockOperator {
            mat: Csr::identity(basis.dim()),
            shift: (0, 0),
        }
    }

    pub fn scaled(&self, a: C64) -> Self {
        FockOperator {
            mat: self.mat.scaled(a),
            shift: self.shift,
        }
    }

    pub fn add(&self, other: &FockOperator) -> Self {
        FockOperator {
            mat: self
                .mat
                .add_scaled(C64::new(1.0, 0.0), &other.mat, C64::new(1.0, 0.0)),
            shift: (self.shift.0.min(other.shift.0), self.shift.1.max(other.shift.1)),
        }
    }

    pub fn sub(&self, other: &FockOperator) -> Self {
        FockOperator {
            mat: self
                .mat
                .add_scaled(C64::new(1.0, 0.0), &other.mat, C64::new(-1.0, 0.0)),
            shift: (self.shift.0.min(other.shift.0), self.shift.1.max(other.shift.1)),
        }
    }

    pub fn matmul(&self, other: &FockOperator) -> Self {
        FockOperator {
            mat: self.mat.matmul(&other.mat),
            shift: (self.shift.0 + other.shift.0, self.shift.1 + other.shift.1),
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.mat.apply(x)
    }

    /// Largest |entry| violating the declared shift interval, by scanning
    /// the sparsity pattern against the basis grading.
    pub fn shift_violation(&self, basis: &OccupationBasis) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.mat.nrows() {
            let lr = basis.level(r) as i32;
            for (c, v) in self.mat.row(r) {
                let d = lr - basis.level(c) as i32;
                if d < self.shift.0 || d > self.shift.1 {
                    worst = worst.max(v.norm());
                }
            }
        }
        worst
    }
}

/// One-photon slot-coefficient vector. Entry (i, mu) carries
/// F^mu(k_i) sqrt(w_i), so the Euclidean pairing of two slot vectors equals
/// the grid quadrature of the positive L^2 product.
pub fn slot_vector(grid: &ModeGrid, f: impl Fn(usize, usize) -> C64) -> Vec<C64> {
    let mut v = Vec::with_capacity(4 * grid.len());
    for i in 0..grid.len() {
        let sw = grid.weights[i].sqrt();
        for mu in 0..4 {
            v.push(f(i, mu) * C64::new(sw, 0.0));
        }
    }
    v
}

pub fn slot_index(mode: usize, mu: usize) -> usize {
    4 * mode + mu
}

/// Creation operator c^dagger(F) for a slot-coefficient vector F, with the
/// bosonic sqrt(n+1) factors. States raised past max_total are dropped;
/// guarded evaluation keeps that from ever being visible on V_L.
pub fn creation_vec(basis: &OccupationBasis, f: &[C64]) -> FockOperator {
    assert_eq!(f.len(), basis.slot_count);
    let mut t: Vec<(usize, u32, C64)> = Vec::new();
    for col in 0..basis.dim() {
        if basis.level(col) >= basis.max_total {
            continue;
        }
        let state = basis.state(col);
        let mut raised = state.to_vec();
        for (s, &fs) in f.iter().enumerate() {
            if fs == C64::new(0.0, 0.0) {
                continue;
            }
            raised[s] += 1;
            if let Some(row) = basis.find(&raised) {
                let amp = fs * C64::new(((state[s] + 1) as f64).sqrt(), 0.0);
                t.push((row, col as u32, amp));
            }
            raised[s] -= 1;
        }
    }
    FockOperator {
        mat: Csr::from_triplets(basis.dim(), basis.dim(), t),
        shift: (1, 1),
    }
}

/// Annihilation c(F) = (c^dagger(F))^*, antilinear in F.
pub fn annihilation_vec(basis: &OccupationBasis, f: &[C64]) -> FockOperator {
    let c = creation_vec(basis, f);
    FockOperator {
        mat: c.mat.conj_transpose(),
        shift: (-1, -1),
    }
}

/// c^dagger_mu(f): creation with the scalar mode function f in Lorentz slot mu.
pub fn creation_c(basis: &OccupationBasis, grid: &ModeGrid, mu: usize, f: &[C64]) -> Result<FockOperator> {
    check_len(grid, f)?;
    let v = slot_vector(grid, |i, m| if m == mu { f[i] } else { C64::new(0.0, 0.0) });
    Ok(creation_vec(basis, &v))
}

/// c^mu(f): annihilation with f in slot mu.
pub fn annihilation_c(basis: &OccupationBasis, grid: &ModeGrid, mu: usize, f: &[C64]) -> Result<FockOperator> {
    check_len(grid, f)?;
    let v = slot_vector(grid, |i, m| if m == mu { f[i] } else { C64::new(0.0, 0.0) });
    Ok(annihilation_vec(basis, &v))
}

fn check_len(grid: &ModeGrid, f: &[C64]) -> Result<()> {
    if f.len() != grid.len() {
        return Err(Error::GridMismatch {
            expected: grid.len(),
            got: f.len(),
        });
    }
    Ok(())
}

/// a_mu(f) = eta_{mu nu} c^lambda(e^nu_lambda f): annihilation side of the
/// covariant photon operators. Antilinear in f.
pub fn annihilation_a(
    basis: &OccupationBasis,
    grid: &ModeGrid,
    frames: &Frames,
    mu: usize,
    f: &[C64],
) -> Result<FockOperator> {
    check_len(grid, f)?;
    // slot (i, lambda) coefficient: e_{mu lambda}(k_i) f_i
    let v = slot_vector(grid, |i, lambda| {
        C64::new(frames.e_lower(i, lambda, mu), 0.0) * f[i]
    });
    Ok(annihilation_vec(basis, &v))
}

/// a^dagger_mu(f) = eta^{sigma lambda} c^dagger_sigma(e_{mu lambda} f);
/// the eta-adjoint of a^mu(f). Linear in f.
pub fn creation_a(
    basis: &OccupationBasis,
    grid: &ModeGrid,
    frames: &Frames,
    mu: usize,
    f: &[C64],
) -> Result<FockOperator> {
    check_len(grid, f)?;
    let v = slot_vector(grid, |i, sigma| {
        C64::new(METRIC_SIGN[sigma] * frames.e_lower(i, sigma, mu), 0.0) * f[i]
    });
    Ok(creation_vec(basis, &v))
}

/// The metric eta = Gamma(diag(-1,1,1,1)): diagonal with entry
/// (-1)^{number of photons in mu = 0 slots}. An exact involution.
pub fn metric_eta(basis: &OccupationBasis) -> FockOperator {
    let d: Vec<C64> = (0..basis.dim())
        .map(|i| {
            let scalars: u32 = basis
                .state(i)
                .iter()
                .enumerate()
                .filter(|(s, _)| s % 4 == 0)
                .map(|(_, &n)| n as u32)
                .sum();
            C64::new(if scalars % 2 == 0 { 1.0 } else { -1.0 }, 0.0)
        })
        .collect();
    FockOperator {
        mat: Csr::from_diag(&d),
        shift: (0, 0),
    }
}

/// Same sign vector as `metric_eta`, for diagonal application.
pub fn eta_signs(basis: &OccupationBasis) -> Vec<f64> {
    (0..basis.dim())
        .map(|i| {
            let scalars: u32 = basis
                .state(i)
                .iter()
                .enumerate()
                .filter(|(s, _)| s % 4 == 0)
                .map(|(_, &n)| n as u32)
                .sum();
            if scalars % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect()
}

/// eta-adjoint eta T^* eta: the physically meaningful adjoint.
pub fn eta_adjoint(basis: &OccupationBasis, t: &FockOperator) -> FockOperator {
    let eta = metric_eta(basis);
    let m = eta.mat.matmul(&t.mat.conj_transpose()).matmul(&eta.mat);
    FockOperator {
        mat: m,
        shift: (-t.shift.1, -t.shift.0),
    }
}

/// Physical pairing <psi | phi> = <psi, eta phi>.
pub fn physical_pairing(basis: &OccupationBasis, psi: &[C64], phi: &[C64]) -> C64 {
    let signs = eta_signs(basis);
    psi.iter()
        .zip(phi.iter().zip(&signs))
        .map(|(a, (b, &s))| a.conj() * b * C64::new(s, 0.0))
        .sum()
}

/// Number operator dGamma(1).
pub fn number_operator(basis: &OccupationBasis) -> FockOperator {
    let d: Vec<C64> = (0..basis.dim())
        .map(|i| C64::new(basis.level(i) as f64, 0.0))
        .collect();
    FockOperator {
        mat: Csr::from_diag(&d),
        shift: (0, 0),
    }
}

/// Free photon Hamiltonian dGamma(omega) as a diagonal.
pub fn dgamma_omega(basis: &OccupationBasis, grid: &ModeGrid) -> Vec<f64> {
    (0..basis.dim())
        .map(|i| {
            basis
                .state(i)
                .iter()
                .enumerate()
                .map(|(s, &n)| grid.omega[s / 4] * n as f64)
                .sum()
        })
        .collect()
}

pub fn dgamma_omega_op(basis: &OccupationBasis, grid: &ModeGrid) -> FockOperator {
    let d: Vec<C64> = dgamma_omega(basis, grid)
        .into_iter()
        .map(|x| C64::new(x, 0.0))
        .collect();
    FockOperator {
        mat: Csr::from_diag(&d),
        shift: (0, 0),
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TruncationBudget {
    pub base_level: u32,
    pub guard: u32,
}

/// Weak commutator (AB - BA) restricted to V_L, computed inside a
/// truncation deep enough that the restriction carries no truncation error.
///
/// The aggregate photon raise of the two factors must fit inside the guard,
/// and the basis must hold base_level + guard levels.
pub fn guarded_commutator(
    basis: &OccupationBasis,
    a: &FockOperator,
    b: &FockOperator,
    budget: TruncationBudget,
) -> Result<FockOperator> {
    let raise = raise_requirement(a, b);
    if raise > budget.guard {
        return Err(Error::GuardTooSmall {
            guard: budget.guard,
            required: raise,
        });
    }
    let need = budget.base_level + budget.guard;
    if basis.max_total < need {
        return Err(Error::TruncationTooSmall {
            n0: basis.max_total,
            required: need,
        });
    }
    let ab = a.mat.matmul(&b.mat);
    let ba = b.mat.matmul(&a.mat);
    let comm = ab.add_scaled(C64::new(1.0, 0.0), &ba, C64::new(-1.0, 0.0));
    let keep = basis.level_mask(budget.base_level);
    let restricted = comm.restrict(&keep, &keep);
    Ok(FockOperator {
        mat: restricted,
        shift: (
            a.shift.0.min(0) + b.shift.0.min(0),
            a.shift.1.max(0) + b.shift.1.max(0),
        ),
    })
}

/// Photon-number headroom the product pair can consume above V_L.
fn raise_requirement(a: &FockOperator, b: &FockOperator) -> u32 {
    let single = |op: &FockOperator| op.shift.1.max(0).unsigned_abs();
    // both orders AB and BA must stay inside the truncation
    (single(a) + single(b)).max(single(b) + single(a))
}
