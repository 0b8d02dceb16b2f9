//! Generalized eigenvalue problems realizing the optimal constants: the
//! Hardy quotient μ(Ω), the log-remainder constant of the improved Hardy
//! inequality, and the minimal constants of the weighted-gradient bounds
//! ∫|x|^ε|∇v|² ≤ R_Ω^ε B_{λ(N)}[v] + C_ε ∫v².

use crate::error::{Error, Result};
use crate::linalg::{lanczos_extremes, smallest_eig_shift_invert, SkylineFactor, SparseSym};
use crate::operator::OperatorSet;

/// Result of a Hardy-quotient eigensolve, possibly across refinements.
#[derive(Clone, Debug)]
pub struct HardyReport {
    /// smallest eigenvalue of K u = μ W u on the finest mesh
    pub mu_h: f64,
    pub eigvec: Vec<f64>,
    pub h: f64,
    /// (h, mu_h) per refinement level, coarse to fine
    pub refinement_series: Vec<(f64, f64)>,
    /// λ(N) = N²/4
    pub target: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Minimal-constant report for the improved Hardy remainder and the
/// weighted-gradient inequalities.
#[derive(Clone, Debug)]
pub struct ConstantReport {
    /// "oeq3" | "tu8" | "tuu8(eps)"
    pub id: String,
    pub value: f64,
    pub h: f64,
    pub refinement_series: Vec<(f64, f64)>,
    pub iterations: usize,
    pub residual: f64,
    /// quadrature points clamped by the log-weight cutoff
    pub clamped_points: usize,
}

pub const EIG_TOL: f64 = 1e-8;
const EIG_MAX_ITER: usize = 4000;

/// Smallest eigenvalue of the pencil (K, W): the discrete Hardy constant.
/// Fails the run if the non-attainment guard mu_h > λ(N) is violated.
pub fn hardy_constant(ops: &OperatorSet) -> Result<HardyReport> {
    let pair = smallest_eig_shift_invert(&ops.k, &ops.w, 0.0, EIG_TOL, EIG_MAX_ITER)?;
    let target = ops.lambda_n;
    if pair.value <= target {
        return Err(Error::Eigen(format!(
            "non-attainment violated: mu_h = {} <= lambda(N) = {target}; assembly is inconsistent",
            pair.value
        )));
    }
    Ok(HardyReport {
        mu_h: pair.value,
        eigvec: pair.vector,
        h: ops.h(),
        refinement_series: vec![(ops.h(), pair.value)],
        target,
        iterations: pair.iterations,
        residual: pair.residual,
    })
}

/// Hardy constant across precomputed refinement levels (coarse to fine).
pub fn hardy_constant_series(levels: &[OperatorSet]) -> Result<HardyReport> {
    let mut series = Vec::with_capacity(levels.len());
    let mut last: Option<HardyReport> = None;
    for ops in levels {
        let r = hardy_constant(ops)?;
        series.push((ops.h(), r.mu_h));
        last = Some(r);
    }
    let mut report = last.ok_or_else(|| Error::InvalidArgument("no levels".into()))?;
    report.refinement_series = series;
    Ok(report)
}

/// Smallest eigenvalue ν_h of (K − λ(N)W, W_log): the discrete constant in
/// front of the logarithmic remainder. The discrete space is a subspace of
/// H¹₀, so ν_h ≥ 1/4 up to rounding slack.
pub fn improved_hardy_check(ops: &OperatorSet) -> Result<ConstantReport> {
    let left = ops.hardy_matrix(ops.lambda_n)?;
    let pair =
        smallest_eig_shift_invert(&left, &ops.w_log, 0.0, EIG_TOL, EIG_MAX_ITER).map_err(|e| {
            match e {
                Error::Factorization(msg) => {
                    Error::Eigen(format!("indefinite left matrix (assembly bug): {msg}"))
                }
                other => other,
            }
        })?;
    Ok(ConstantReport {
        id: "oeq3".into(),
        value: pair.value,
        h: ops.h(),
        refinement_series: vec![(ops.h(), pair.value)],
        iterations: pair.iterations,
        residual: pair.residual,
        clamped_points: ops.wlog_clamped,
    })
}

pub fn improved_hardy_series(levels: &[OperatorSet]) -> Result<ConstantReport> {
    let mut series = Vec::new();
    let mut last: Option<ConstantReport> = None;
    for ops in levels {
        let r = improved_hardy_check(ops)?;
        series.push((ops.h(), r.value));
        last = Some(r);
    }
    let mut report = last.ok_or_else(|| Error::InvalidArgument("no levels".into()))?;
    report.refinement_series = series;
    Ok(report)
}

/// Minimal constant C_h of ∫|x|^ε|∇v|² ≤ R_Ω^ε B_{λ(N)}[v] + C_h ∫v² on the
/// discrete space: the largest eigenvalue of (K_ε − R_Ω^ε (K − λ(N)W), M).
/// `eps = None` is the ε = 2 case. The left matrix is indefinite, so the
/// largest eigenvalue comes from M-orthogonal Lanczos rather than the
/// shift-invert route used for the smallest ones.
pub fn tu8_constant(ops: &OperatorSet, eps: Option<f64>) -> Result<ConstantReport> {
    let e = eps.unwrap_or(2.0);
    if !(e > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {e}")));
    }
    let k_eps = if e == 2.0 { ops.k_x2.clone() } else { ops.k_eps(e)? };
    let hardy = ops.hardy_matrix(ops.lambda_n)?;
    let r_pow = ops.mesh.domain.r_omega.powf(e);
    let left = k_eps.scaled_add(-r_pow, &hardy);
    let m_factor = SkylineFactor::factor_spd(&ops.m)?;
    let ext = lanczos_extremes(&left, &ops.m, &m_factor, 220.min(ops.n_dofs()), EIG_TOL, 0x5EED)?;
    if !ext.max.is_finite() {
        return Err(Error::Eigen("tu8 constant did not converge".into()));
    }
    let id = if eps.is_none() { "tu8".to_string() } else { format!("tuu8({e})") };
    Ok(ConstantReport {
        id,
        value: ext.max,
        h: ops.h(),
        refinement_series: vec![(ops.h(), ext.max)],
        iterations: ext.iterations,
        residual: ext.residual_max,
        clamped_points: 0,
    })
}

pub fn tu8_series(levels: &[OperatorSet], eps: Option<f64>) -> Result<ConstantReport> {
    let mut series = Vec::new();
    let mut last: Option<ConstantReport> = None;
    for ops in levels {
        let r = tu8_constant(ops, eps)?;
        series.push((ops.h(), r.value));
        last = Some(r);
    }
    let mut report = last.ok_or_else(|| Error::InvalidArgument("no levels".into()))?;
    report.refinement_series = series;
    Ok(report)
}

/// The lowest `m` modes of (K − λW, M), M-orthonormal. This is the spectral
/// filter basis for the control problems.
#[derive(Clone, Debug)]
pub struct ModalBasis {
    pub lambda: f64,
    pub eigenvalues: Vec<f64>,
    /// rows are M-orthonormal eigenvectors, lowest first
    pub vectors: Vec<Vec<f64>>,
}

pub fn modal_basis(ops: &OperatorSet, lambda: f64, m: usize) -> Result<ModalBasis> {
    let s = ops.hardy_matrix(lambda)?;
    let (eigenvalues, vectors) = crate::linalg::dense::generalized_lowest(&s, &ops.m, m)?;
    Ok(ModalBasis { lambda, eigenvalues, vectors })
}

impl ModalBasis {
    pub fn m(&self) -> usize {
        self.vectors.len()
    }

    /// nodal vector from modal coefficients
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let n = self.vectors[0].len();
        let mut out = vec![0.0; n];
        for (c, v) in coeffs.iter().zip(&self.vectors) {
            for i in 0..n {
                out[i] += c * v[i];
            }
        }
        out
    }

    /// modal coefficients Φᵀ r of a load/dual vector r
    pub fn analyze_dual(&self, r: &[f64]) -> Vec<f64> {
        self.vectors.iter().map(|v| v.iter().zip(r).map(|(a, b)| a * b).sum()).collect()
    }

    /// M-orthogonal projection of a load vector onto the modal span:
    /// r ↦ (M Φ) Φᵀ r, so that filtered dynamics stay in the span.
    pub fn project_load(&self, m: &SparseSym, r: &[f64]) -> Vec<f64> {
        let coeffs = self.analyze_dual(r);
        m.matvec_alloc(&self.synthesize(&coeffs))
    }
}
