//! Sparse-banded direct solver for the global Newton systems.
//!
//! The tangent matrices here are small (desk-scale meshes) but their
//! bandwidth depends on node numbering, and phantom-node insertion appends
//! degrees of freedom at the end. A reverse Cuthill-McKee permutation is
//! therefore computed from the coupling graph before factorizing with a
//! banded LU (partial pivoting, LAPACK `gbtrf`-style storage). Everything is
//! deterministic: fixed assembly order, tie-broken orderings.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinalgError {
    SingularPivot(usize),
}

impl core::fmt::Display for LinalgError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Self::SingularPivot(k) => write!(f, "singular pivot at eliminated column {k}"),
        }
    }
}

/// Reverse Cuthill-McKee ordering of an undirected graph given as an
/// adjacency list. Returns `perm` with `perm[old] = new`.
pub fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut order: Vec<usize> = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    let degree = |v: usize| adj[v].len();
    loop {
        // lowest-degree unvisited vertex, ties by index
        let mut start = usize::MAX;
        let mut best = usize::MAX;
        for v in 0..n {
            if !visited[v] && degree(v) < best {
                best = degree(v);
                start = v;
            }
        }
        if start == usize::MAX {
            break;
        }
        visited[start] = true;
        order.push(start);
        let mut head = order.len() - 1;
        while head < order.len() {
            let v = order[head];
            head += 1;
            let mut nbrs: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            nbrs.sort_unstable_by_key(|&w| (degree(w), w));
            for w in nbrs {
                if !visited[w] {
                    visited[w] = true;
                    order.push(w);
                }
            }
        }
    }
    let mut perm = vec![0usize; n];
    for (new, &old) in order.iter().rev().enumerate() {
        perm[old] = new;
    }
    perm
}

/// Banded matrix in `gbtrf` layout: `kl` sub- and `ku` super-diagonals plus
/// `kl` extra rows of fill-in for pivoting. Entry `(i, j)` lives at
/// `band[(kl + ku + i - j) + j * ldab]`.
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    band: Vec<f64>,
}

impl BandedMatrix {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            ldab,
            band: vec![0.0; ldab * n],
        }
    }

    pub fn reset(&mut self) {
        self.band.iter_mut().for_each(|x| *x = 0.0);
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n && j < self.n);
        debug_assert!(j + self.kl >= i && i + self.ku >= j, "entry outside band");
        let row = self.kl + self.ku + i - j;
        self.band[row + j * self.ldab] += v;
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let row = self.kl + self.ku + i - j;
        self.band[row + j * self.ldab] = v;
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || i + self.ku > j + self.ku + self.ku {
            // outside stored band; callers only read inside
        }
        let row = self.kl + self.ku + i - j;
        self.band[row + j * self.ldab]
    }

    /// Zero a row and column (Dirichlet elimination) and put a unit pivot.
    pub fn enforce_unit_row_col(&mut self, k: usize) {
        let (kl, ku, ldab) = (self.kl, self.ku, self.ldab);
        // row k: entries (k, j) for j in [k-ku... wait, j in [k.saturating_sub(kl), min(n-1,k+ku)]
        let jlo = k.saturating_sub(self.kl);
        let jhi = core::cmp::min(self.n - 1, k + ku);
        for j in jlo..=jhi {
            if j + kl >= k && k + ku >= j {
                let row = kl + ku + k - j;
                self.band[row + j * ldab] = 0.0;
            }
        }
        // column k: entries (i, k)
        let ilo = k.saturating_sub(ku);
        let ihi = core::cmp::min(self.n - 1, k + kl);
        for i in ilo..=ihi {
            let row = kl + ku + i - k;
            self.band[row + k * ldab] = 0.0;
        }
        self.set(k, k, 1.0);
    }

    /// In-place banded LU with partial pivoting; returns the pivot vector.
    pub fn factorize(&mut self) -> Result<Vec<usize>, LinalgError> {
        let n = self.n;
        let (kl, ku, ldab) = (self.kl, self.ku, self.ldab);
        let kv = kl + ku; // extra super-diagonals for fill-in
        let mut piv = vec![0usize; n];
        let idx = |r: usize, c: usize| r + c * ldab;
        for j in 0..n {
            // pivot search in column j, rows j..=min(j+kl, n-1)
            let imax = core::cmp::min(j + kl, n - 1);
            let mut p = j;
            let mut pmax = libm::fabs(self.band[idx(kv + j - j, j)]);
            for i in (j + 1)..=imax {
                let v = libm::fabs(self.band[idx(kv + i - j, j)]);
                if v > pmax {
                    pmax = v;
                    p = i;
                }
            }
            piv[j] = p;
            if pmax == 0.0 || !pmax.is_finite() {
                return Err(LinalgError::SingularPivot(j));
            }
            // row j carries entries up to column j + kv (fill-in included)
            let jhi = core::cmp::min(j + kv, n - 1);
            if p != j {
                for c in j..=jhi {
                    self.band.swap(idx(kv + p - c, c), idx(kv + j - c, c));
                }
            }
            let pivval = self.band[idx(kv, j)];
            for i in (j + 1)..=imax {
                let m = self.band[idx(kv + i - j, j)] / pivval;
                self.band[idx(kv + i - j, j)] = m;
                if m != 0.0 {
                    for c in (j + 1)..=jhi {
                        let u = self.band[idx(kv + j - c, c)];
                        if u != 0.0 {
                            self.band[idx(kv + i - c, c)] -= m * u;
                        }
                    }
                }
            }
        }
        Ok(piv)
    }

    /// Solve with a factorization from [`Self::factorize`].
    pub fn solve_factored(&self, piv: &[usize], b: &mut [f64]) {
        let n = self.n;
        let (kl, ku, ldab) = (self.kl, self.ku, self.ldab);
        let kv = kl + ku;
        let idx = |r: usize, c: usize| r + c * ldab;
        // forward substitution with row swaps
        for j in 0..n {
            let p = piv[j];
            if p != j {
                b.swap(p, j);
            }
            let bj = b[j];
            if bj != 0.0 {
                let imax = core::cmp::min(j + kl, n - 1);
                for i in (j + 1)..=imax {
                    b[i] -= self.band[idx(kv + i - j, j)] * bj;
                }
            }
        }
        // back substitution
        for j in (0..n).rev() {
            let mut s = b[j];
            let chi = core::cmp::min(j + kv, n - 1);
            for c in (j + 1)..=chi {
                s -= self.band[idx(kv + j - c, c)] * b[c];
            }
            b[j] = s / self.band[idx(kv, j)];
        }
    }
}

/// Euclidean norm.
pub fn norm2(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}
