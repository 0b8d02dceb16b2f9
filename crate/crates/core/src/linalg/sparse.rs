//! Sparse symmetric matrices in CSR form, assembled from triplets.
//!
//! Both triangles are stored so that mat-vec products need no branching.
//! Triplets are merged in a stable (row, col) sort, which keeps the
//! accumulation order — and hence the result bytes — independent of any
//! thread scheduling upstream.

use num_complex::Complex64;

#[derive(Clone, Debug)]
pub struct SparseSym {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseSym {
    /// Build from (row, col, value) triplets; duplicates are summed in
    /// insertion order.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut it = triplets.into_iter().peekable();
        while let Some((i, j, v)) = it.next() {
            let mut acc = v;
            while let Some(&(i2, j2, v2)) = it.peek() {
                if i2 == i && j2 == j {
                    acc += v2;
                    it.next();
                } else {
                    break;
                }
            }
            row_ptr[i + 1] += 1;
            col_idx.push(j);
            values.push(acc);
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseSym { n, row_ptr, col_idx, values }
    }

    pub fn zeros(n: usize) -> Self {
        SparseSym { n, row_ptr: vec![0; n + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            y[i] = s;
        }
    }

    pub fn matvec_alloc(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    pub fn matvec_complex(&self, x: &[Complex64], y: &mut [Complex64]) {
        for i in 0..self.n {
            let mut s = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += x[self.col_idx[k]] * self.values[k];
            }
            y[i] = s;
        }
    }

    /// uᵀ A u
    pub fn quadratic_form(&self, u: &[f64]) -> f64 {
        self.bilinear(u, u)
    }

    /// uᵀ A v
    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            let mut row = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                row += self.values[k] * v[self.col_idx[k]];
            }
            s += u[i] * row;
        }
        s
    }

    /// u* A v for a real matrix with complex vectors.
    pub fn sesquilinear(&self, u: &[Complex64], v: &[Complex64]) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..self.n {
            let mut row = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                row += v[self.col_idx[k]] * self.values[k];
            }
            s += u[i].conj() * row;
        }
        s
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        for k in self.row_ptr[i]..self.row_ptr[i + 1] {
            if self.col_idx[k] == j {
                return self.values[k];
            }
        }
        0.0
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// max |A_ij − A_ji| over stored entries.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                worst = worst.max((self.values[k] - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// self + beta * other (patterns may differ).
    pub fn scaled_add(&self, beta: f64, other: &SparseSym) -> SparseSym {
        assert_eq!(self.n, other.n);
        let mut trip = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                trip.push((i, self.col_idx[k], self.values[k]));
            }
            for k in other.row_ptr[i]..other.row_ptr[i + 1] {
                trip.push((i, other.col_idx[k], beta * other.values[k]));
            }
        }
        SparseSym::from_triplets(self.n, trip)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Coordinate-format text export: one `row col value` line per entry.
    pub fn write_coo<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "% symmetric {} {} {}", self.n, self.n, self.nnz())?;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                writeln!(w, "{} {} {:e}", i, self.col_idx[k], self.values[k])?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplet_merge_and_matvec() {
        let a = SparseSym::from_triplets(
            2,
            vec![(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 3.0), (0, 0, 1.0)],
        );
        assert_eq!(a.nnz(), 4);
        assert_eq!(a.get(0, 0), 2.0);
        let y = a.matvec_alloc(&[1.0, 1.0]);
        assert_eq!(y, vec![4.0, 5.0]);
        assert_eq!(a.max_asymmetry(), 0.0);
        assert!((a.quadratic_form(&[1.0, -1.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn scaled_add_merges_patterns() {
        let a = SparseSym::from_triplets(2, vec![(0, 0, 1.0)]);
        let b = SparseSym::from_triplets(2, vec![(1, 1, 2.0), (0, 0, 1.0)]);
        let c = a.scaled_add(0.5, &b);
        assert_eq!(c.get(0, 0), 1.5);
        assert_eq!(c.get(1, 1), 1.0);
    }
}
