//! Identity-check reports shared by the elliptic, evolution and semilinear
//! modules.

/// Two sides of a tested identity with absolute and relative residuals.
#[derive(Clone, Copy, Debug)]
pub struct IdentityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub abs_residual: f64,
    pub rel_residual: f64,
    /// mesh size of the run that produced the report
    pub h: f64,
}

const FLOOR: f64 = 1e-30;

impl IdentityReport {
    pub fn new(lhs: f64, rhs: f64, h: f64) -> Self {
        let abs_residual = (lhs - rhs).abs();
        let rel_residual = abs_residual / lhs.abs().max(rhs.abs()).max(FLOOR);
        IdentityReport { lhs, rhs, abs_residual, rel_residual, h }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sides_have_zero_residual() {
        let r = IdentityReport::new(0.0, 0.0, 0.1);
        assert_eq!(r.abs_residual, 0.0);
        assert_eq!(r.rel_residual, 0.0);
    }

    #[test]
    fn relative_residual_uses_larger_side() {
        let r = IdentityReport::new(1.0, 0.9, 0.1);
        assert!((r.rel_residual - 0.1).abs() < 1e-12);
    }
}
