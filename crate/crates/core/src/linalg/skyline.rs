//! Envelope (skyline) LDLᵀ factorization with reverse Cuthill–McKee
//! ordering.
//!
//! The factorization is generic over the scalar so the same code serves the
//! SPD real systems of the elliptic/eigen solvers and the complex-symmetric
//! Crank–Nicolson step matrices M + iαS (whose real part is SPD, so an
//! unpivoted LDLᵀ exists).

use num_complex::Complex64;

use super::sparse::SparseSym;
use crate::error::{Error, Result};

pub trait Scalar:
    Copy
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + PartialEq
{
    const ZERO: Self;
    const ONE: Self;
    fn from_real(r: f64) -> Self;
    fn mul_real(self, r: f64) -> Self;
    fn modulus(self) -> f64;
    fn is_finite_scalar(self) -> bool;
    /// Pivot acceptability for the unpivoted factorization.
    fn pivot_ok(self, scale: f64) -> bool;
    fn conj_scalar(self) -> Self;
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    fn from_real(r: f64) -> Self {
        r
    }
    fn mul_real(self, r: f64) -> Self {
        self * r
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn is_finite_scalar(self) -> bool {
        self.is_finite()
    }
    fn pivot_ok(self, scale: f64) -> bool {
        // SPD path: positive pivots only.
        self > scale * 1e-300
    }
    fn conj_scalar(self) -> Self {
        self
    }
}

impl Scalar for Complex64 {
    const ZERO: Self = Complex64::new(0.0, 0.0);
    const ONE: Self = Complex64::new(1.0, 0.0);
    fn from_real(r: f64) -> Self {
        Complex64::new(r, 0.0)
    }
    fn mul_real(self, r: f64) -> Self {
        self * r
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn is_finite_scalar(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
    fn pivot_ok(self, scale: f64) -> bool {
        self.norm() > scale * 1e-300
    }
    fn conj_scalar(self) -> Self {
        self.conj()
    }
}

/// y = (Σ cₖ Aₖ) x for real matrices with scalar (possibly complex) weights.
pub fn combo_matvec<T: Scalar>(terms: &[(&SparseSym, T)], x: &[T], y: &mut [T]) {
    for yi in y.iter_mut() {
        *yi = T::ZERO;
    }
    for &(a, c) in terms {
        for i in 0..a.n {
            let mut s = T::ZERO;
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                s = s + x[a.col_idx[k]].mul_real(a.values[k]);
            }
            y[i] = y[i] + s * c;
        }
    }
}

/// Reverse Cuthill–McKee ordering of the union pattern of `terms`.
/// Returns `perm` with `perm[new] = old`.
fn rcm_order(n: usize, adj: &[Vec<usize>]) -> Vec<usize> {
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let degree = |i: usize| adj[i].len();
    // Process each connected component from a minimum-degree start node.
    loop {
        let start = match (0..n).filter(|&i| !visited[i]).min_by_key(|&i| (degree(i), i)) {
            Some(s) => s,
            None => break,
        };
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(start);
        visited[start] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut nbrs: Vec<usize> = adj[u].iter().copied().filter(|&v| !visited[v]).collect();
            nbrs.sort_by_key(|&v| (degree(v), v));
            for v in nbrs {
                visited[v] = true;
                queue.push_back(v);
            }
        }
    }
    order.reverse();
    order
}

/// LDLᵀ factorization in envelope storage of Σ cₖ Aₖ.
pub struct SkylineFactor<T: Scalar> {
    pub n: usize,
    /// perm[new] = old
    perm: Vec<usize>,
    first: Vec<usize>,
    row_start: Vec<usize>,
    /// strictly-lower rows of L, concatenated; row i holds columns first[i]..i
    low: Vec<T>,
    diag: Vec<T>,
}

impl<T: Scalar> SkylineFactor<T> {
    pub fn factor_combo(terms: &[(&SparseSym, T)]) -> Result<Self> {
        let n = terms
            .first()
            .ok_or_else(|| Error::Factorization("empty term list".into()))?
            .0
            .n;
        for (a, _) in terms {
            if a.n != n {
                return Err(Error::Factorization("dimension mismatch".into()));
            }
        }
        // Union adjacency.
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (a, _) in terms {
            for i in 0..n {
                for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                    let j = a.col_idx[k];
                    if j != i {
                        adj[i].push(j);
                    }
                }
            }
        }
        for l in adj.iter_mut() {
            l.sort_unstable();
            l.dedup();
        }
        let perm = rcm_order(n, &adj);
        let mut iperm = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }

        // Envelope profile in the permuted numbering.
        let mut first = vec![0usize; n];
        for new in 0..n {
            let old = perm[new];
            let mut f = new;
            for &j_old in &adj[old] {
                f = f.min(iperm[j_old]);
            }
            first[new] = f.min(new);
        }
        let mut row_start = vec![0usize; n + 1];
        for i in 0..n {
            row_start[i + 1] = row_start[i] + (i - first[i]);
        }
        let mut low = vec![T::ZERO; row_start[n]];
        let mut diag = vec![T::ZERO; n];

        // Scatter matrix entries (lower triangle in permuted order).
        for (a, c) in terms {
            for i_old in 0..n {
                for k in a.row_ptr[i_old]..a.row_ptr[i_old + 1] {
                    let j_old = a.col_idx[k];
                    let v = (*c).mul_real(a.values[k]);
                    let (i, j) = (iperm[i_old], iperm[j_old]);
                    if i == j {
                        diag[i] = diag[i] + v;
                    } else if j < i {
                        let idx = row_start[i] + (j - first[i]);
                        low[idx] = low[idx] + v;
                    }
                }
            }
        }

        // In-place envelope LDLᵀ.
        let scale: f64 = diag.iter().map(|d| d.modulus()).fold(0.0, f64::max);
        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                // l_ij = (a_ij − Σ_k l_ik d_k l_jk) / d_j, k ranging over the
                // overlap of rows i and j.
                let fj = first[j];
                let lo = fi.max(fj);
                let mut s = low[row_start[i] + (j - fi)];
                for k in lo..j {
                    let lik = low[row_start[i] + (k - fi)];
                    let ljk = low[row_start[j] + (k - fj)];
                    s = s - lik * diag[k] * ljk;
                }
                low[row_start[i] + (j - fi)] = s / diag[j];
            }
            let mut d = diag[i];
            for k in fi..i {
                let lik = low[row_start[i] + (k - fi)];
                d = d - lik * lik * diag[k];
            }
            if !d.is_finite_scalar() || !d.pivot_ok(scale.max(1e-300)) {
                return Err(Error::Factorization(format!(
                    "non-positive or vanishing pivot at permuted row {i} (of {n})"
                )));
            }
            diag[i] = d;
        }

        Ok(SkylineFactor { n, perm, first, row_start, low, diag })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut y: Vec<T> = (0..n).map(|i| b[self.perm[i]]).collect();
        // Forward: L y = b
        for i in 0..n {
            let fi = self.first[i];
            let mut s = y[i];
            for k in fi..i {
                s = s - self.low[self.row_start[i] + (k - fi)] * y[k];
            }
            y[i] = s;
        }
        // Diagonal
        for i in 0..n {
            y[i] = y[i] / self.diag[i];
        }
        // Backward: Lᵀ x = y
        for i in (0..n).rev() {
            let fi = self.first[i];
            let yi = y[i];
            for k in fi..i {
                y[k] = y[k] - self.low[self.row_start[i] + (k - fi)] * yi;
            }
        }
        let mut x = vec![T::ZERO; n];
        for i in 0..n {
            x[self.perm[i]] = y[i];
        }
        x
    }

    /// Solve followed by one iterative-refinement pass against the exact
    /// operator Σ cₖ Aₖ. Keeps per-step conservation drift at rounding level
    /// in the time steppers.
    pub fn solve_refined(&self, terms: &[(&SparseSym, T)], b: &[T]) -> Vec<T> {
        let mut x = self.solve(b);
        let mut r = vec![T::ZERO; self.n];
        combo_matvec(terms, &x, &mut r);
        for i in 0..self.n {
            r[i] = b[i] - r[i];
        }
        let dx = self.solve(&r);
        for i in 0..self.n {
            x[i] = x[i] + dx[i];
        }
        x
    }
}

impl SkylineFactor<f64> {
    /// SPD factorization of a single matrix.
    pub fn factor_spd(a: &SparseSym) -> Result<Self> {
        Self::factor_combo(&[(a, 1.0)])
    }
}

impl SkylineFactor<Complex64> {
    /// Solve conj(A) x = b by conjugation: x = conj(A⁻¹ conj(b)).
    pub fn solve_conj(&self, b: &[Complex64]) -> Vec<Complex64> {
        let bc: Vec<Complex64> = b.iter().map(|z| z.conj()).collect();
        self.solve(&bc).into_iter().map(|z| z.conj()).collect()
    }
}
