//! Conjugate-gradient solvers (real SPD and complex Hermitian PD).

use num_complex::Complex64;

#[derive(Clone, Debug)]
pub struct CgOutcome<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    pub rel_residual: f64,
    /// relative residual after each iteration
    pub history: Vec<f64>,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned CG on an SPD operator given as a closure.
/// `precond_diag`, when present, is the diagonal of A (Jacobi).
pub fn cg_solve<F>(
    mut apply: F,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    precond_diag: Option<&[f64]>,
) -> CgOutcome<f64>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return CgOutcome { x, iterations: 0, rel_residual: 0.0, history: vec![], converged: true };
    }
    let mut r = b.to_vec();
    let prec = |r: &[f64]| -> Vec<f64> {
        match precond_diag {
            Some(d) => r.iter().zip(d).map(|(ri, di)| ri / di).collect(),
            None => r.to_vec(),
        }
    };
    let mut z = prec(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut history = Vec::new();
    for it in 0..max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            // Operator not positive on this direction; report what we have.
            let rel = dot(&r, &r).sqrt() / bnorm;
            return CgOutcome { x, iterations: it, rel_residual: rel, history, converged: false };
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = dot(&r, &r).sqrt() / bnorm;
        history.push(rel);
        if rel <= tol {
            return CgOutcome { x, iterations: it + 1, rel_residual: rel, history, converged: true };
        }
        z = prec(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rel = dot(&r, &r).sqrt() / bnorm;
    CgOutcome { x, iterations: max_iter, rel_residual: rel, history, converged: false }
}

fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// CG for Hermitian positive-definite complex operators.
pub fn cg_solve_complex<F>(
    mut apply: F,
    b: &[Complex64],
    tol: f64,
    max_iter: usize,
) -> CgOutcome<Complex64>
where
    F: FnMut(&[Complex64], &mut [Complex64]),
{
    let n = b.len();
    let bnorm = cdot(b, b).re.sqrt();
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    if bnorm == 0.0 {
        return CgOutcome { x, iterations: 0, rel_residual: 0.0, history: vec![], converged: true };
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = cdot(&r, &r).re;
    let mut ap = vec![Complex64::new(0.0, 0.0); n];
    let mut history = Vec::new();
    for it in 0..max_iter {
        apply(&p, &mut ap);
        let pap = cdot(&p, &ap).re;
        if pap <= 0.0 {
            let rel = rr.sqrt() / bnorm;
            return CgOutcome { x, iterations: it, rel_residual: rel, history, converged: false };
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += p[i] * alpha;
            r[i] -= ap[i] * alpha;
        }
        let rr_new = cdot(&r, &r).re;
        let rel = rr_new.sqrt() / bnorm;
        history.push(rel);
        if rel <= tol {
            return CgOutcome { x, iterations: it + 1, rel_residual: rel, history, converged: true };
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + p[i] * beta;
        }
    }
    let rel = rr.sqrt() / bnorm;
    CgOutcome { x, iterations: max_iter, rel_residual: rel, history, converged: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sparse::SparseSym;

    #[test]
    fn cg_matches_direct_on_spd() {
        let n = 40;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.5));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = SparseSym::from_triplets(n, t);
        let b: Vec<f64> = (0..n).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let out = cg_solve(|x, y| a.matvec(x, y), &b, 1e-12, 1000, Some(&a.diagonal()));
        assert!(out.converged);
        let r = a.matvec_alloc(&out.x);
        let err: f64 = r.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9);
    }

    #[test]
    fn zero_rhs_short_circuits() {
        let out = cg_solve(|_, y| y.fill(0.0), &[0.0; 5], 1e-10, 10, None);
        assert!(out.converged);
        assert_eq!(out.iterations, 0);
    }
}
