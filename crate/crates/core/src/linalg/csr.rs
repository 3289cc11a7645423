//! Compressed sparse row matrices over `Complex64`.
//!
//! Row-major iteration is the only structural guarantee callers rely on.
//! Column indices are `u32`; every space in this crate stays far below that.

use num_complex::Complex64 as C64;

#[derive(Clone, Debug)]
pub struct Csr {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    data: Vec<C64>,
}

impl Csr {
    pub fn zero(nrows: usize, ncols: usize) -> Self {
        Csr {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        let one = C64::new(1.0, 0.0);
        Csr {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n as u32).collect(),
            data: vec![one; n],
        }
    }

    pub fn from_diag(d: &[C64]) -> Self {
        let n = d.len();
        let mut m = Csr::identity(n);
        m.data.copy_from_slice(d);
        m.prune(0.0);
        m
    }

    /// Build from unsorted triplets; duplicate entries are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, mut t: Vec<(usize, u32, C64)>) -> Self {
        t.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut data: Vec<C64> = Vec::with_capacity(t.len());
        for (r, c, v) in t {
            debug_assert!(r < nrows && (c as usize) < ncols);
            indices.push(c);
            data.push(v);
            indptr[r + 1] += 1;
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        let mut m = Csr { nrows, ncols, indptr, indices, data };
        m.merge_duplicates();
        m
    }

    fn merge_duplicates(&mut self) {
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut data = Vec::with_capacity(self.data.len());
        for r in 0..self.nrows {
            let (s, e) = (self.indptr[r], self.indptr[r + 1]);
            let mut last: Option<u32> = None;
            for j in s..e {
                let c = self.indices[j];
                let v = self.data[j];
                if last == Some(c) {
                    *data.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    data.push(v);
                    last = Some(c);
                }
            }
            indptr[r + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.data = data;
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let (s, e) = (self.indptr[r], self.indptr[r + 1]);
        self.indices[s..e]
            .iter()
            .zip(&self.data[s..e])
            .map(|(&c, &v)| (c as usize, v))
    }

    /// Drop entries with |v| <= tol.
    pub fn prune(&mut self, tol: f64) {
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut data = Vec::with_capacity(self.data.len());
        for r in 0..self.nrows {
            for j in self.indptr[r]..self.indptr[r + 1] {
                if self.data[j].norm() > tol {
                    indices.push(self.indices[j]);
                    data.push(self.data[j]);
                }
            }
            indptr[r + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.data = data;
    }

    pub fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for r in 0..self.nrows {
            let mut acc = C64::new(0.0, 0.0);
            for j in self.indptr[r]..self.indptr[r + 1] {
                acc += self.data[j] * x[self.indices[j] as usize];
            }
            y[r] = acc;
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.nrows];
        self.apply_into(x, &mut y);
        y
    }

    pub fn scaled(&self, a: C64) -> Csr {
        let mut m = self.clone();
        for v in m.data.iter_mut() {
            *v *= a;
        }
        m
    }

    /// a*self + b*other
    pub fn add_scaled(&self, a: C64, other: &Csr, b: C64) -> Csr {
        assert_eq!(self.nrows, other.nrows);
        assert_eq!(self.ncols, other.ncols);
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.nnz() + other.nnz());
        let mut data = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.nrows {
            let (mut i, ie) = (self.indptr[r], self.indptr[r + 1]);
            let (mut j, je) = (other.indptr[r], other.indptr[r + 1]);
            while i < ie || j < je {
                let ci = if i < ie { self.indices[i] } else { u32::MAX };
                let cj = if j < je { other.indices[j] } else { u32::MAX };
                if ci < cj {
                    indices.push(ci);
                    data.push(a * self.data[i]);
                    i += 1;
                } else if cj < ci {
                    indices.push(cj);
                    data.push(b * other.data[j]);
                    j += 1;
                } else {
                    indices.push(ci);
                    data.push(a * self.data[i] + b * other.data[j]);
                    i += 1;
                    j += 1;
                }
            }
            indptr[r + 1] = indices.len();
        }
        Csr { nrows: self.nrows, ncols: self.ncols, indptr, indices, data }
    }

    /// Sparse product self * other.
    pub fn matmul(&self, other: &Csr) -> Csr {
        assert_eq!(self.ncols, other.nrows);
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices: Vec<u32> = Vec::new();
        let mut data: Vec<C64> = Vec::new();
        // dense accumulator per row
        let mut acc = vec![C64::new(0.0, 0.0); other.ncols];
        let mut touched: Vec<u32> = Vec::new();
        for r in 0..self.nrows {
            for j in self.indptr[r]..self.indptr[r + 1] {
                let v = self.data[j];
                let k = self.indices[j] as usize;
                for l in other.indptr[k]..other.indptr[k + 1] {
                    let c = other.indices[l];
                    if acc[c as usize] == C64::new(0.0, 0.0) {
                        touched.push(c);
                    }
                    acc[c as usize] += v * other.data[l];
                }
            }
            touched.sort_unstable();
            for &c in touched.iter() {
                let v = acc[c as usize];
                if v != C64::new(0.0, 0.0) {
                    indices.push(c);
                    data.push(v);
                }
                acc[c as usize] = C64::new(0.0, 0.0);
            }
            touched.clear();
            indptr[r + 1] = indices.len();
        }
        Csr { nrows: self.nrows, ncols: other.ncols, indptr, indices, data }
    }

    pub fn conj_transpose(&self) -> Csr {
        let mut t: Vec<(usize, u32, C64)> = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            for j in self.indptr[r]..self.indptr[r + 1] {
                t.push((self.indices[j] as usize, r as u32, self.data[j].conj()));
            }
        }
        Csr::from_triplets(self.ncols, self.nrows, t)
    }

    /// Restrict to the rows/cols where `keep` is true, reindexing densely.
    pub fn restrict(&self, keep_row: &[bool], keep_col: &[bool]) -> Csr {
        let rmap: Vec<Option<u32>> = renumber(keep_row);
        let cmap: Vec<Option<u32>> = renumber(keep_col);
        let nrows = keep_row.iter().filter(|&&k| k).count();
        let ncols = keep_col.iter().filter(|&&k| k).count();
        let mut t = Vec::new();
        for r in 0..self.nrows {
            let Some(rr) = rmap[r] else { continue };
            for j in self.indptr[r]..self.indptr[r + 1] {
                if let Some(cc) = cmap[self.indices[j] as usize] {
                    t.push((rr as usize, cc, self.data[j]));
                }
            }
        }
        Csr::from_triplets(nrows, ncols, t)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Max row sum of |entries| (subordinate infinity norm).
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|r| {
                self.indptr[r]..self.indptr[r + 1]
            })
            .map(|rng| rng.map(|j| self.data[j].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<C64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    pub fn from_dense(m: &nalgebra::DMatrix<C64>, tol: f64) -> Csr {
        let mut t = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if m[(r, c)].norm() > tol {
                    t.push((r, c as u32, m[(r, c)]));
                }
            }
        }
        Csr::from_triplets(m.nrows(), m.ncols(), t)
    }
}

fn renumber(keep: &[bool]) -> Vec<Option<u32>> {
    let mut n = 0u32;
    keep.iter()
        .map(|&k| {
            if k {
                n += 1;
                Some(n - 1)
            } else {
                None
            }
        })
        .collect()
}
