//! Quadrature rules: Gauss–Legendre on segments and symmetric interior
//! rules on triangles.
//!
//! All points are strictly interior to the reference cell. The singular
//! weights 1/|x|² and 1/x_N are evaluated only at such points, so rules with
//! vertex or edge nodes are deliberately not offered.

/// Gauss–Legendre nodes and weights on [-1, 1], computed by Newton iteration
/// on the Legendre polynomial.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1 && n <= 32, "gauss_legendre supports 1..=32 points");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Chebyshev initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and P'_n(x).
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            pp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / pp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Gauss rule mapped to a segment [a, b] in the plane; weights include the
/// segment length factor.
pub fn segment_rule(a: [f64; 2], b: [f64; 2], n: usize) -> (Vec<[f64; 2]>, Vec<f64>) {
    let (xs, ws) = gauss_legendre(n);
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    let pts = xs
        .iter()
        .map(|&t| {
            let s = 0.5 * (t + 1.0);
            [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
        })
        .collect();
    let wts = ws.iter().map(|&w| 0.5 * w * len).collect();
    (pts, wts)
}

/// Symmetric triangle rule in barycentric coordinates. `degree` is the
/// polynomial exactness; available degrees 2, 4, 5 (requests in between are
/// rounded up, requests above 5 clamp to 5). Weights sum to 1 and multiply
/// the triangle area.
pub fn triangle_rule(degree: usize) -> (Vec<[f64; 3]>, Vec<f64>) {
    let deg = if degree <= 2 {
        2
    } else if degree <= 4 {
        4
    } else {
        5
    };
    match deg {
        2 => {
            // 3-point interior rule (2/3, 1/6, 1/6).
            let p = vec![
                [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
                [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
                [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
            ];
            let w = vec![1.0 / 3.0; 3];
            (p, w)
        }
        4 => {
            // 6-point rule, two symmetric orbits, all interior.
            let a1 = 0.108_103_018_168_070;
            let b1 = 0.445_948_490_915_965;
            let w1 = 0.223_381_589_678_011;
            let a2 = 0.816_847_572_980_459;
            let b2 = 0.091_576_213_509_771;
            let w2 = 0.109_951_743_655_322;
            let mut p = Vec::new();
            let mut w = Vec::new();
            for (a, b, wt) in [(a1, b1, w1), (a2, b2, w2)] {
                p.push([a, b, b]);
                p.push([b, a, b]);
                p.push([b, b, a]);
                w.extend_from_slice(&[wt, wt, wt]);
            }
            (p, w)
        }
        _ => {
            // 7-point rule: centroid plus two orbits.
            let mut p = vec![[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]];
            let mut w = vec![0.225];
            let a1 = 0.059_715_871_789_770;
            let b1 = 0.470_142_064_105_115;
            let w1 = 0.132_394_152_788_506;
            let a2 = 0.797_426_985_353_087;
            let b2 = 0.101_286_507_323_456;
            let w2 = 0.125_939_180_544_827;
            for (a, b, wt) in [(a1, b1, w1), (a2, b2, w2)] {
                p.push([a, b, b]);
                p.push([b, a, b]);
                p.push([b, b, a]);
                w.extend_from_slice(&[wt, wt, wt]);
            }
            (p, w)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(6);
        // degree 11 monomial over [-1,1]
        let exact = 2.0 / 11.0; // ∫ x^10
        let approx: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(10)).sum();
        assert!((approx - exact).abs() < 1e-14);
        let sum: f64 = w.iter().sum();
        assert!((sum - 2.0).abs() < 1e-14);
    }

    #[test]
    fn triangle_rules_integrate_low_degrees() {
        // Check ∫ λ₀^d over the reference triangle (area 1/2):
        // ∫ λ0^d = d! * 2! / (d+2)! * area * 2 ... use known values instead:
        // mean of λ0 = 1/3, mean of λ0² = 1/6, λ0⁴ mean = 1/15, λ0^5 mean = 1/21.
        for (deg, dmax) in [(2usize, 2u32), (4, 4), (5, 5)] {
            let (p, w) = triangle_rule(deg);
            let wsum: f64 = w.iter().sum();
            assert!((wsum - 1.0).abs() < 1e-12);
            let mean = |d: u32| -> f64 { p.iter().zip(&w).map(|(b, wi)| wi * b[0].powi(d as i32)).sum() };
            let exact = |d: u32| -> f64 {
                // ∫_T λ0^d dA / |T| = 2 / ((d+1)(d+2))
                2.0 / (((d + 1) * (d + 2)) as f64)
            };
            for d in 0..=dmax {
                assert!(
                    (mean(d) - exact(d)).abs() < 1e-12,
                    "degree-{deg} rule wrong at monomial {d}"
                );
            }
        }
    }

    #[test]
    fn all_triangle_points_strictly_interior() {
        for deg in [2, 4, 5] {
            let (p, _) = triangle_rule(deg);
            for b in p {
                assert!(b.iter().all(|&c| c > 1e-6 && c < 1.0));
                assert!((b[0] + b[1] + b[2] - 1.0).abs() < 1e-14);
            }
        }
    }
}
