//! Dense symmetric kernels: cyclic Jacobi eigendecomposition, Cholesky, and
//! the dense path for generalized eigenproblems (used for the modal filter,
//! where a contiguous block of low modes is needed).

use super::sparse::SparseSym;
use crate::error::{Error, Result};

/// Row-major dense symmetric matrix.
#[derive(Clone)]
pub struct DenseMat {
    pub n: usize,
    pub a: Vec<f64>,
}

impl DenseMat {
    pub fn zeros(n: usize) -> Self {
        DenseMat { n, a: vec![0.0; n * n] }
    }

    pub fn from_sparse(s: &SparseSym) -> Self {
        let mut d = DenseMat::zeros(s.n);
        for i in 0..s.n {
            for k in s.row_ptr[i]..s.row_ptr[i + 1] {
                d.a[i * s.n + s.col_idx[k]] = s.values[k];
            }
        }
        d
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns (eigenvalues ascending, eigenvectors as rows of V matched to the
/// eigenvalue order).
pub fn jacobi_eigh(mat: &DenseMat) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = mat.n;
    let mut a = mat.a.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += a[i * n + j] * a[i * n + j];
            }
        }
        s
    };
    let norm0 = off(&a).sqrt() + 1e-300;
    for _sweep in 0..60 {
        if off(&a).sqrt() <= 1e-15 * norm0.max(1.0) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Rotate rows/columns p and q.
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[p * n + k];
                    let vkq = v[q * n + k];
                    v[p * n + k] = c * vkp - s * vkq;
                    v[q * n + k] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[i * n + i].partial_cmp(&a[j * n + j]).unwrap());
    let vals: Vec<f64> = idx.iter().map(|&i| a[i * n + i]).collect();
    let vecs: Vec<Vec<f64>> = idx.iter().map(|&i| v[i * n..(i + 1) * n].to_vec()).collect();
    (vals, vecs)
}

/// In-place lower Cholesky A = L Lᵀ.
pub fn cholesky_lower(mat: &mut DenseMat) -> Result<()> {
    let n = mat.n;
    for j in 0..n {
        let mut d = mat.at(j, j);
        for k in 0..j {
            d -= mat.at(j, k) * mat.at(j, k);
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::Factorization(format!("dense Cholesky pivot {d} at row {j}")));
        }
        let d = d.sqrt();
        mat.set(j, j, d);
        for i in (j + 1)..n {
            let mut s = mat.at(i, j);
            for k in 0..j {
                s -= mat.at(i, k) * mat.at(j, k);
            }
            mat.set(i, j, s / d);
        }
    }
    // zero the upper triangle
    for i in 0..n {
        for j in (i + 1)..n {
            mat.set(i, j, 0.0);
        }
    }
    Ok(())
}

/// Lowest `m` eigenpairs of the pencil A x = θ B x with B SPD, via the dense
/// transformation C = L⁻¹ A L⁻ᵀ. Eigenvectors come back B-orthonormal.
pub fn generalized_lowest(a: &SparseSym, b: &SparseSym, m: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.n;
    if n == 0 || m == 0 || m > n {
        return Err(Error::InvalidArgument(format!("generalized_lowest: n={n}, m={m}")));
    }
    if n > 3000 {
        return Err(Error::Eigen(format!(
            "dense modal factorization limited to 3000 dofs, got {n}; coarsen the mesh"
        )));
    }
    let mut l = DenseMat::from_sparse(b);
    cholesky_lower(&mut l)?;
    let ad = DenseMat::from_sparse(a);
    // X = L⁻¹ A  (solve L X = A column-wise over rows)
    let mut x = ad.a.clone();
    for col in 0..n {
        for i in 0..n {
            let mut s = x[i * n + col];
            for k in 0..i {
                s -= l.at(i, k) * x[k * n + col];
            }
            x[i * n + col] = s / l.at(i, i);
        }
    }
    // C = X L⁻ᵀ: solve L Cᵀ = Xᵀ row-wise, i.e. for each row r of X solve
    // L y = xᵣ and store y as row r of C.
    let mut c = DenseMat::zeros(n);
    for row in 0..n {
        let mut y: Vec<f64> = (0..n).map(|j| x[row * n + j]).collect();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l.at(i, k) * y[k];
            }
            y[i] = s / l.at(i, i);
        }
        for j in 0..n {
            c.set(row, j, y[j]);
        }
    }
    // Symmetrize rounding noise.
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (c.at(i, j) + c.at(j, i));
            c.set(i, j, s);
            c.set(j, i, s);
        }
    }
    let (vals, zvecs) = jacobi_eigh(&c);
    // Back-transform: φ = L⁻ᵀ z
    let mut vecs = Vec::with_capacity(m);
    for z in zvecs.iter().take(m) {
        let mut y = z.clone();
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l.at(k, i) * y[k];
            }
            y[i] = s / l.at(i, i);
        }
        vecs.push(y);
    }
    Ok((vals[..m].to_vec(), vecs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // diag(1,2,3) rotated by a permutation-free similarity is overkill;
        // use a 3x3 with known eigenvalues.
        let mut m = DenseMat::zeros(2);
        m.set(0, 0, 2.0);
        m.set(1, 1, 2.0);
        m.set(0, 1, 1.0);
        m.set(1, 0, 1.0);
        let (vals, vecs) = jacobi_eigh(&m);
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
        // eigenvector of eigenvalue 1 is (1,-1)/sqrt(2)
        let v = &vecs[0];
        assert!((v[0] + v[1]).abs() < 1e-10);
    }

    #[test]
    fn generalized_lowest_on_mass_scaled_problem() {
        // A = diag(1, 4, 9), B = diag(1, 2, 3) -> eigenvalues 1, 2, 3.
        let a = SparseSym::from_triplets(3, vec![(0, 0, 1.0), (1, 1, 4.0), (2, 2, 9.0)]);
        let b = SparseSym::from_triplets(3, vec![(0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0)]);
        let (vals, vecs) = generalized_lowest(&a, &b, 3).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 2.0).abs() < 1e-12);
        assert!((vals[2] - 3.0).abs() < 1e-12);
        // B-orthonormality
        let bm = |u: &[f64], v: &[f64]| b.bilinear(u, v);
        assert!((bm(&vecs[0], &vecs[0]) - 1.0).abs() < 1e-12);
        assert!(bm(&vecs[0], &vecs[1]).abs() < 1e-12);
    }
}
