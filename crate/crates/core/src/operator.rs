//! P1 assembly of the bilinear forms over the Dirichlet subspace.
//!
//! K   = ∫ ∇φᵢ·∇φⱼ
//! M   = ∫ φᵢφⱼ
//! W   = ∫ φᵢφⱼ / (|x|² + δ)            (δ = 0 by default)
//! Wlog = ∫ φᵢφⱼ / (|x|² log²(R_Ω/|x|))
//! K|x|ᵉ = ∫ |x|ᵉ ∇φᵢ·∇φⱼ               (e = 2 pre-assembled)
//! G   = ∫ (∇φᵢ + c φᵢ)·(∇φⱼ + c φⱼ),  c(x) = (N/2) x/|x|² − e_N/x_N
//!
//! All singular weights are sampled at quadrature points strictly interior
//! to each cell; the Dirichlet subspace keeps every integral finite. W is
//! not regularized by default — the discrete space already excludes the
//! singular limit, and smoothing would bias the Hardy-constant studies.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::SparseSym;
use crate::mesh::{FacetClassification, Mesh, Point};
use crate::quadrature::{gauss_legendre, triangle_rule};

#[derive(Clone, Copy, Debug)]
pub struct AssemblyOptions {
    /// quadrature exactness request; 0 picks the dimension default (6 in
    /// 1D, 4 in 2D — two orders above what the P1 stiffness needs)
    pub quad_order: usize,
    /// optional weight regularization 1/(|x|²+δ) for sensitivity runs
    pub delta: f64,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions { quad_order: 0, delta: 0.0 }
    }
}

/// Per-facet boundary quadrature plus the flux recovery row.
#[derive(Clone, Debug)]
pub struct FluxFacet {
    pub classification: FacetClassification,
    /// coefficients over interior dofs giving the (cell-wise constant)
    /// normal derivative of the adjacent cell
    pub flux_row: Vec<(usize, f64)>,
}

pub struct OperatorSet {
    pub mesh: Arc<Mesh>,
    pub k: SparseSym,
    pub m: SparseSym,
    pub w: SparseSym,
    pub w_log: SparseSym,
    pub k_x2: SparseSym,
    pub g: SparseSym,
    pub facets: Vec<FluxFacet>,
    pub lambda_n: f64,
    pub lambda_star: f64,
    /// quadrature points clamped by the log-weight cutoff |x| ≤ R_Ω(1−1e−8)
    pub wlog_clamped: usize,
    pub options: AssemblyOptions,
    quad_pts: Vec<QuadPoint>,
}

/// An in-cell quadrature point with the P1 values and gradients.
#[derive(Clone, Debug)]
struct QuadPoint {
    cell: usize,
    x: Point,
    w: f64,
    /// basis values per cell vertex
    phi: [f64; 3],
}

struct CellGeom {
    grads: [[f64; 2]; 3],
    measure: f64,
}

fn cell_geometry(mesh: &Mesh, c: usize) -> CellGeom {
    let v = mesh.cell(c);
    if mesh.dim == 1 {
        let (a, b) = (mesh.vertices[v[0]][0], mesh.vertices[v[1]][0]);
        let len = b - a;
        CellGeom {
            grads: [[-1.0 / len, 0.0], [1.0 / len, 0.0], [0.0, 0.0]],
            measure: len.abs(),
        }
    } else {
        let (p0, p1, p2) = (mesh.vertices[v[0]], mesh.vertices[v[1]], mesh.vertices[v[2]]);
        let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let area = 0.5 * det.abs();
        // ∇λᵢ for barycentric coordinates
        let g0 = [(p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det];
        let g1 = [(p2[1] - p0[1]) / det, (p0[0] - p2[0]) / det];
        let g2 = [(p0[1] - p1[1]) / det, (p1[0] - p0[0]) / det];
        CellGeom { grads: [g0, g1, g2], measure: area }
    }
}

fn quad_points_for_cell(mesh: &Mesh, c: usize, order: usize) -> Vec<QuadPoint> {
    let v = mesh.cell(c);
    if mesh.dim == 1 {
        let (a, b) = (mesh.vertices[v[0]][0], mesh.vertices[v[1]][0]);
        let (xs, ws) = gauss_legendre(order);
        xs.iter()
            .zip(&ws)
            .map(|(&t, &wt)| {
                let s = 0.5 * (t + 1.0);
                let x = a + s * (b - a);
                QuadPoint {
                    cell: c,
                    x: [x, 0.0],
                    w: 0.5 * wt * (b - a).abs(),
                    phi: [1.0 - s, s, 0.0],
                }
            })
            .collect()
    } else {
        let (bary, ws) = triangle_rule(order);
        let (p0, p1, p2) = (mesh.vertices[v[0]], mesh.vertices[v[1]], mesh.vertices[v[2]]);
        let area = cell_geometry(mesh, c).measure;
        bary.iter()
            .zip(&ws)
            .map(|(b, &wt)| QuadPoint {
                cell: c,
                x: [
                    b[0] * p0[0] + b[1] * p1[0] + b[2] * p2[0],
                    b[0] * p0[1] + b[1] * p1[1] + b[2] * p2[1],
                ],
                w: wt * area,
                phi: [b[0], b[1], b[2]],
            })
            .collect()
    }
}

struct LocalMats {
    cell: usize,
    k: [[f64; 3]; 3],
    m: [[f64; 3]; 3],
    w: [[f64; 3]; 3],
    wlog: [[f64; 3]; 3],
    g: [[f64; 3]; 3],
    clamped: usize,
}

/// ∫ |x|^ε ∇φᵢ·∇φⱼ from pre-sampled quadrature points. Shared by the eager
/// ε = 2 assembly and the lazy `k_eps` so both produce identical bits.
fn assemble_weighted_stiffness(mesh: &Mesh, quad_pts: &[QuadPoint], ndof: usize, eps: f64) -> SparseSym {
    let mut trip = Vec::new();
    for q in quad_pts {
        let geom = cell_geometry(mesh, q.cell);
        let v = mesh.cell(q.cell);
        let xsq = q.x[0] * q.x[0] + q.x[1] * q.x[1];
        let weight = xsq.powf(eps / 2.0) * q.w;
        for (i, &vi) in v.iter().enumerate() {
            let Some(di) = mesh.dof_of_vertex[vi] else { continue };
            for (j, &vj) in v.iter().enumerate() {
                let Some(dj) = mesh.dof_of_vertex[vj] else { continue };
                trip.push((
                    di,
                    dj,
                    weight
                        * (geom.grads[i][0] * geom.grads[j][0]
                            + geom.grads[i][1] * geom.grads[j][1]),
                ));
            }
        }
    }
    SparseSym::from_triplets(ndof, trip)
}

impl OperatorSet {
    pub fn assemble(mesh: Arc<Mesh>, options: AssemblyOptions) -> Result<Self> {
        if options.quad_order != 0 && options.quad_order < 2 {
            return Err(Error::InvalidArgument("quad_order must be >= 2".into()));
        }
        let order = if options.quad_order == 0 {
            if mesh.dim == 1 {
                6
            } else {
                4
            }
        } else {
            options.quad_order
        };
        let n_local = mesh.dim + 1;
        let dim_n = mesh.domain.dimension as f64;
        let r_omega = mesh.domain.r_omega;
        let clamp_radius = r_omega * (1.0 - 1e-8);
        let delta = options.delta;

        // Pre-sample quadrature points; every singular weight is evaluated
        // here, so the singular set must be avoided.
        let mut quad_pts: Vec<QuadPoint> = Vec::new();
        for c in 0..mesh.n_cells() {
            quad_pts.extend(quad_points_for_cell(&mesh, c, order));
        }
        for q in &quad_pts {
            let xsq = q.x[0] * q.x[0] + q.x[1] * q.x[1];
            let xn = if mesh.dim == 1 { q.x[0] } else { q.x[1] };
            if xsq <= 0.0 || xn <= 0.0 {
                return Err(Error::Assembly(format!(
                    "quadrature point ({}, {}) in cell {} touches the singular set",
                    q.x[0], q.x[1], q.cell
                )));
            }
        }

        // Per-cell local matrices, in parallel with an ordered reduction.
        let cells: Vec<usize> = (0..mesh.n_cells()).collect();
        let locals: Vec<LocalMats> = cells
            .par_iter()
            .map(|&c| {
                let geom = cell_geometry(&mesh, c);
                let pts = quad_points_for_cell(&mesh, c, order);
                let mut lm = LocalMats {
                    cell: c,
                    k: [[0.0; 3]; 3],
                    m: [[0.0; 3]; 3],
                    w: [[0.0; 3]; 3],
                    wlog: [[0.0; 3]; 3],
                    g: [[0.0; 3]; 3],
                    clamped: 0,
                };
                for i in 0..n_local {
                    for j in 0..n_local {
                        lm.k[i][j] = (geom.grads[i][0] * geom.grads[j][0]
                            + geom.grads[i][1] * geom.grads[j][1])
                            * geom.measure;
                    }
                }
                for q in &pts {
                    let xsq = q.x[0] * q.x[0] + q.x[1] * q.x[1];
                    let xn = if mesh.dim == 1 { q.x[0] } else { q.x[1] };
                    let r = xsq.sqrt();
                    let r_clamped = r.min(clamp_radius);
                    let logw = (r_omega / r_clamped).ln();
                    if r > clamp_radius {
                        lm.clamped += 1;
                    }
                    let wlog_weight = 1.0 / (r_clamped * r_clamped * logw * logw);
                    // c(x) = (N/2) x/|x|² − e_N/x_N
                    let cvec = if mesh.dim == 1 {
                        [(dim_n / 2.0) * q.x[0] / xsq - 1.0 / xn, 0.0]
                    } else {
                        [
                            (dim_n / 2.0) * q.x[0] / xsq,
                            (dim_n / 2.0) * q.x[1] / xsq - 1.0 / xn,
                        ]
                    };
                    for i in 0..n_local {
                        let di = [
                            geom.grads[i][0] + cvec[0] * q.phi[i],
                            geom.grads[i][1] + cvec[1] * q.phi[i],
                        ];
                        for j in 0..n_local {
                            let pp = q.phi[i] * q.phi[j] * q.w;
                            lm.m[i][j] += pp;
                            lm.w[i][j] += pp / (xsq + delta);
                            lm.wlog[i][j] += pp * wlog_weight;
                            let dj = [
                                geom.grads[j][0] + cvec[0] * q.phi[j],
                                geom.grads[j][1] + cvec[1] * q.phi[j],
                            ];
                            lm.g[i][j] += (di[0] * dj[0] + di[1] * dj[1]) * q.w;
                        }
                    }
                }
                lm
            })
            .collect();

        let ndof = mesh.n_dofs();
        let mut tk = Vec::new();
        let mut tm = Vec::new();
        let mut tw = Vec::new();
        let mut twl = Vec::new();
        let mut tg = Vec::new();
        let mut clamped = 0usize;
        for lm in &locals {
            clamped += lm.clamped;
            let v = mesh.cell(lm.cell);
            for i in 0..n_local {
                let Some(di) = mesh.dof_of_vertex[v[i]] else { continue };
                for j in 0..n_local {
                    let Some(dj) = mesh.dof_of_vertex[v[j]] else { continue };
                    tk.push((di, dj, lm.k[i][j]));
                    tm.push((di, dj, lm.m[i][j]));
                    tw.push((di, dj, lm.w[i][j]));
                    twl.push((di, dj, lm.wlog[i][j]));
                    tg.push((di, dj, lm.g[i][j]));
                }
            }
        }
        let k = SparseSym::from_triplets(ndof, tk);
        let m = SparseSym::from_triplets(ndof, tm);
        let w = SparseSym::from_triplets(ndof, tw);
        let w_log = SparseSym::from_triplets(ndof, twl);
        let k_x2 = assemble_weighted_stiffness(&mesh, &quad_pts, ndof, 2.0);
        let g = SparseSym::from_triplets(ndof, tg);
        for (name, mat) in [("K", &k), ("M", &m), ("W", &w), ("Wlog", &w_log), ("Kx2", &k_x2), ("G", &g)] {
            if !mat.all_finite() {
                return Err(Error::Assembly(format!("non-finite entry in {name}")));
            }
        }

        // Boundary quadrature + flux recovery from the adjacent-cell
        // gradient (P1: one constant per facet).
        let facet_quad = if mesh.dim == 1 { 1 } else { 3 };
        let classifications = mesh.classify_boundary(facet_quad);
        let mut facets = Vec::with_capacity(classifications.len());
        for (f, classification) in mesh.boundary.iter().zip(classifications) {
            let geom = cell_geometry(&mesh, f.cell);
            let v = mesh.cell(f.cell);
            let mut flux_row = Vec::new();
            for (i, &vi) in v.iter().enumerate() {
                if let Some(d) = mesh.dof_of_vertex[vi] {
                    let coeff =
                        geom.grads[i][0] * f.normal[0] + geom.grads[i][1] * f.normal[1];
                    if coeff != 0.0 {
                        flux_row.push((d, coeff));
                    }
                }
            }
            facets.push(FluxFacet { classification, flux_row });
        }

        Ok(OperatorSet {
            lambda_n: mesh.domain.lambda_n(),
            lambda_star: mesh.domain.lambda_star(),
            mesh,
            k,
            m,
            w,
            w_log,
            k_x2,
            g,
            facets,
            wlog_clamped: clamped,
            options,
            quad_pts,
        })
    }

    pub fn n_dofs(&self) -> usize {
        self.m.n
    }

    pub fn h(&self) -> f64 {
        self.mesh.h_max
    }

    fn check_lambda(&self, lambda: f64) -> Result<()> {
        if lambda > self.lambda_n + 1e-12 {
            Err(Error::LambdaOutOfRange { lambda, max: self.lambda_n })
        } else {
            Ok(())
        }
    }

    /// K − λW as an explicit sparse matrix.
    pub fn hardy_matrix(&self, lambda: f64) -> Result<SparseSym> {
        self.check_lambda(lambda)?;
        Ok(self.k.scaled_add(-lambda, &self.w))
    }

    /// B_λ[u] = uᵀ(K − λW)u.
    pub fn hardy_form(&self, lambda: f64, u: &[f64]) -> Result<f64> {
        self.check_lambda(lambda)?;
        Ok(self.k.quadratic_form(u) - lambda * self.w.quadratic_form(u))
    }

    /// Factored form uᵀGu + (λ(N)−λ)uᵀWu. Agrees with `hardy_form` up to a
    /// quadrature-consistency residual that vanishes under refinement.
    pub fn factored_form(&self, lambda: f64, u: &[f64]) -> Result<f64> {
        self.check_lambda(lambda)?;
        Ok(self.g.quadratic_form(u) + (self.lambda_n - lambda) * self.w.quadratic_form(u))
    }

    /// Diagnostic partial sums of the truncated factored form restricted to
    /// quadrature points with |x| ≥ ε, one row per ε.
    pub fn factored_form_partial_sums(&self, lambda: f64, u: &[f64], eps_list: &[f64]) -> Result<Vec<(f64, f64)>> {
        self.check_lambda(lambda)?;
        let mesh = &self.mesh;
        let dim_n = mesh.domain.dimension as f64;
        let mut rows = Vec::with_capacity(eps_list.len());
        for &eps in eps_list {
            let mut total = 0.0;
            for q in &self.quad_pts {
                let xsq = q.x[0] * q.x[0] + q.x[1] * q.x[1];
                if xsq.sqrt() < eps {
                    continue;
                }
                let geom = cell_geometry(mesh, q.cell);
                let v = mesh.cell(q.cell);
                let xn = if mesh.dim == 1 { q.x[0] } else { q.x[1] };
                let cvec = if mesh.dim == 1 {
                    [(dim_n / 2.0) * q.x[0] / xsq - 1.0 / xn, 0.0]
                } else {
                    [(dim_n / 2.0) * q.x[0] / xsq, (dim_n / 2.0) * q.x[1] / xsq - 1.0 / xn]
                };
                let mut val = 0.0;
                let mut grad = [0.0, 0.0];
                for (i, &vi) in v.iter().enumerate() {
                    let ui = mesh.dof_of_vertex[vi].map(|d| u[d]).unwrap_or(0.0);
                    val += ui * q.phi[i];
                    grad[0] += ui * geom.grads[i][0];
                    grad[1] += ui * geom.grads[i][1];
                }
                let dx = grad[0] + cvec[0] * val;
                let dy = grad[1] + cvec[1] * val;
                total += q.w * (dx * dx + dy * dy + (self.lambda_n - lambda) * val * val / xsq);
            }
            rows.push((eps, total));
        }
        Ok(rows)
    }

    /// ∫ |x|^ε ∇φᵢ·∇φⱼ, assembled on demand. ε = 2 reproduces `k_x2`
    /// bit-for-bit (same code path).
    pub fn k_eps(&self, eps: f64) -> Result<SparseSym> {
        if !(eps > 0.0) {
            return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
        }
        Ok(assemble_weighted_stiffness(&self.mesh, &self.quad_pts, self.n_dofs(), eps))
    }

    /// ∂u/∂ν per boundary facet (one value per facet; P1 gradients are
    /// cell-wise constant).
    pub fn boundary_flux(&self, u: &[f64]) -> Vec<f64> {
        self.facets
            .iter()
            .map(|f| f.flux_row.iter().map(|&(d, c)| c * u[d]).sum())
            .collect()
    }

    /// Σ_facets ∫ weight · (∂u/∂ν)² dσ with weight ∈ {1, x·ν, |x|²},
    /// optionally restricted to Γ₀.
    pub fn boundary_flux_square_integral(&self, u: &[f64], weight: FluxWeight, gamma0_only: bool) -> f64 {
        let flux = self.boundary_flux(u);
        self.flux_square_integral(&flux, weight, gamma0_only)
    }

    /// Same integral for an already-computed per-facet flux vector.
    pub fn flux_square_integral(&self, flux: &[f64], weight: FluxWeight, gamma0_only: bool) -> f64 {
        let mut total = 0.0;
        for (f, &fx) in self.facets.iter().zip(flux) {
            if gamma0_only && !f.classification.gamma0 {
                continue;
            }
            let c = &f.classification;
            for k in 0..c.points.len() {
                let wgt = match weight {
                    FluxWeight::One => 1.0,
                    FluxWeight::XdotNu => c.xdotnu[k],
                    FluxWeight::XSq => c.xsq[k],
                };
                total += c.weights[k] * wgt * fx * fx;
            }
        }
        total
    }

    /// ∫_facet (x·ν) dσ per facet, zeroed outside Γ₀. These are the control
    /// weights of the boundary lift.
    pub fn gamma0_xdotnu_weights(&self) -> Vec<f64> {
        self.facets
            .iter()
            .map(|f| {
                if !f.classification.gamma0 {
                    return 0.0;
                }
                f.classification
                    .weights
                    .iter()
                    .zip(&f.classification.xdotnu)
                    .map(|(w, x)| w * x)
                    .sum()
            })
            .collect()
    }

    /// ∫ f φᵢ for nodal data f (P1 interpolation at the quadrature points);
    /// reduces to M f on the interior dofs plus boundary-coupled terms that
    /// vanish for homogeneous Dirichlet data.
    pub fn load_vector(&self, f_nodal_dofs: &[f64]) -> Vec<f64> {
        self.m.matvec_alloc(f_nodal_dofs)
    }

    /// ∫ (x·∇u) f dx with both factors sampled at the in-cell quadrature
    /// points (matched accuracy for the identity checks).
    pub fn x_grad_u_times_f(&self, u: &[f64], f_nodal: &[f64]) -> f64 {
        let mesh = &self.mesh;
        let mut total = 0.0;
        for q in &self.quad_pts {
            let geom = cell_geometry(mesh, q.cell);
            let v = mesh.cell(q.cell);
            let mut grad = [0.0, 0.0];
            let mut fval = 0.0;
            for (i, &vi) in v.iter().enumerate() {
                let ui = mesh.dof_of_vertex[vi].map(|d| u[d]).unwrap_or(0.0);
                let fi = mesh.dof_of_vertex[vi].map(|d| f_nodal[d]).unwrap_or(0.0);
                grad[0] += ui * geom.grads[i][0];
                grad[1] += ui * geom.grads[i][1];
                fval += fi * q.phi[i];
            }
            total += q.w * (q.x[0] * grad[0] + q.x[1] * grad[1]) * fval;
        }
        total
    }

    /// ∫ v_t (x·∇v) dx for two dof vectors (wave multiplier cross term).
    pub fn cross_term_x_grad(&self, vt: &[f64], v: &[f64]) -> f64 {
        let mesh = &self.mesh;
        let mut total = 0.0;
        for q in &self.quad_pts {
            let geom = cell_geometry(mesh, q.cell);
            let verts = mesh.cell(q.cell);
            let mut grad = [0.0, 0.0];
            let mut vt_val = 0.0;
            for (i, &vi) in verts.iter().enumerate() {
                let uv = mesh.dof_of_vertex[vi].map(|d| v[d]).unwrap_or(0.0);
                let ut = mesh.dof_of_vertex[vi].map(|d| vt[d]).unwrap_or(0.0);
                grad[0] += uv * geom.grads[i][0];
                grad[1] += uv * geom.grads[i][1];
                vt_val += ut * q.phi[i];
            }
            total += q.w * vt_val * (q.x[0] * grad[0] + q.x[1] * grad[1]);
        }
        total
    }

    /// Im ∫ v (x·∇v̄) dx for a complex dof vector (Schrödinger cross term).
    pub fn imag_cross_term(&self, v: &[num_complex::Complex64]) -> f64 {
        let mesh = &self.mesh;
        let mut total = 0.0;
        for q in &self.quad_pts {
            let geom = cell_geometry(mesh, q.cell);
            let verts = mesh.cell(q.cell);
            let mut grad = [num_complex::Complex64::new(0.0, 0.0); 2];
            let mut val = num_complex::Complex64::new(0.0, 0.0);
            for (i, &vi) in verts.iter().enumerate() {
                let uv = mesh.dof_of_vertex[vi]
                    .map(|d| v[d])
                    .unwrap_or(num_complex::Complex64::new(0.0, 0.0));
                grad[0] += uv * geom.grads[i][0];
                grad[1] += uv * geom.grads[i][1];
                val += uv * q.phi[i];
            }
            let xg = grad[0].conj() * q.x[0] + grad[1].conj() * q.x[1];
            total += q.w * (val * xg).im;
        }
        total
    }

    /// ∫ |u_h|^{p} dx via nodal-product quadrature uᵀM(|u|^{p−2}u); exact for
    /// the discrete energy identity of the semilinear module.
    pub fn lp_power_integral(&self, u: &[f64], p: f64) -> f64 {
        let w: Vec<f64> = u.iter().map(|&x| x.abs().powf(p - 2.0) * x).collect();
        self.m.bilinear(u, &w)
    }

    /// Interpolate an analytic function at the interior dofs.
    pub fn interpolate(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        self.mesh.vertex_of_dof.iter().map(|&v| f(self.mesh.vertices[v])).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FluxWeight {
    One,
    XdotNu,
    XSq,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_domain, generate_mesh, DomainKind, MeshOptions};

    fn interval_ops(h: f64) -> OperatorSet {
        let d = build_domain(DomainKind::Interval { length: 1.0 }).unwrap();
        let m = generate_mesh(&d, h, &MeshOptions::default()).unwrap();
        OperatorSet::assemble(Arc::new(m), AssemblyOptions::default()).unwrap()
    }

    #[test]
    fn hat_function_closed_forms() {
        // h = 1/4, hat at x = 1/2: uᵀKu = 8, uᵀMu = 1/6
        let ops = interval_ops(0.25);
        assert_eq!(ops.n_dofs(), 3);
        let mut u = vec![0.0; 3];
        u[1] = 1.0; // dof 1 is the vertex at 0.5
        assert!((ops.k.quadratic_form(&u) - 8.0).abs() < 1e-12);
        assert!((ops.m.quadratic_form(&u) - 1.0 / 6.0).abs() < 1e-12);
        // λ = 0 reduces the Hardy form to the Dirichlet energy
        assert_eq!(ops.hardy_form(0.0, &u).unwrap(), ops.k.quadratic_form(&u));
        // u = 0 gives 0
        assert_eq!(ops.hardy_form(0.25, &[0.0, 0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn all_matrices_symmetric_and_definite() {
        let ops = interval_ops(0.05);
        for mat in [&ops.k, &ops.m, &ops.w, &ops.w_log, &ops.k_x2, &ops.g] {
            assert_eq!(mat.max_asymmetry(), 0.0);
        }
        // positive definiteness on a few deterministic vectors
        let n = ops.n_dofs();
        for s in 0..4u64 {
            let u: Vec<f64> = (0..n).map(|i| ((i as f64 + 1.3) * (s as f64 + 0.7)).sin()).collect();
            for mat in [&ops.k, &ops.m, &ops.w, &ops.w_log, &ops.k_x2] {
                assert!(mat.quadratic_form(&u) > 0.0);
            }
        }
    }

    #[test]
    fn lambda_above_critical_rejected() {
        let ops = interval_ops(0.1);
        let u = vec![1.0; ops.n_dofs()];
        assert!(ops.hardy_form(0.26, &u).is_err());
        assert!(ops.hardy_form(0.25, &u).is_ok());
    }

    #[test]
    fn k_eps_2_reproduces_k_x2_exactly() {
        let ops = interval_ops(0.05);
        let ke = ops.k_eps(2.0).unwrap();
        assert_eq!(ke.values, ops.k_x2.values);
        assert_eq!(ke.col_idx, ops.k_x2.col_idx);
    }

    #[test]
    fn flux_of_parabola_on_interval() {
        // u = x(1−x)/2 interpolated: ∂u/∂ν at x = 1 is −1/2 + O(h)
        let ops = interval_ops(0.01);
        let u = ops.interpolate(|p| p[0] * (1.0 - p[0]) / 2.0);
        let flux = ops.boundary_flux(&u);
        // facet order: find the one at x = 1 (x·ν = 1)
        for (f, fx) in ops.facets.iter().zip(&flux) {
            if f.classification.xdotnu[0] > 0.5 {
                assert!((fx + 0.5).abs() < 0.01, "flux {fx}");
            }
        }
        // zero vector -> zero flux
        let z = vec![0.0; ops.n_dofs()];
        assert!(ops.boundary_flux(&z).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn flux_exact_on_affine_data() {
        // P1 recovers the gradient of affine functions exactly; interpolate
        // u(x) = x on the cell next to x = 1 (boundary value subtracted so
        // the dof vector is admissible): flux row applied to nodal x-values
        // must give exactly 1·ν.
        let ops = interval_ops(0.25);
        let facet_at_one = ops
            .facets
            .iter()
            .find(|f| f.classification.xdotnu[0] > 0.5)
            .unwrap();
        // nodal values of u(x) = x at interior dofs
        let u = ops.interpolate(|p| p[0]);
        let val: f64 = facet_at_one.flux_row.iter().map(|&(d, c)| c * u[d]).sum();
        // the boundary vertex contribution (u(1)=1) is excluded by the
        // Dirichlet convention; add it back for the exactness check
        let geom_corr = {
            // gradient coefficient of the boundary vertex is 1/h with h=0.25
            1.0 * (1.0 / 0.25)
        };
        assert!((val + geom_corr - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_mass_matches_adaptive_quadrature() {
        // hat at x = 1/2 with h = 1/4: ∫ φ²/x² dx against adaptive Simpson
        let ops = interval_ops(0.25);
        let mut u = vec![0.0; 3];
        u[1] = 1.0;
        let phi = |x: f64| -> f64 {
            if x < 0.25 || x > 0.75 {
                0.0
            } else if x <= 0.5 {
                (x - 0.25) / 0.25
            } else {
                (0.75 - x) / 0.25
            }
        };
        let f = |x: f64| phi(x).powi(2) / (x * x);
        let exact = adaptive_simpson(&f, 0.25, 0.75, 1e-12, 40);
        let got = ops.w.quadratic_form(&u);
        assert!((got - exact).abs() < 1e-6, "got {got}, exact {exact}");
    }

    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
            (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
        }
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: usize) -> f64 {
            let m = 0.5 * (a + b);
            let left = simpson(f, a, m);
            let right = simpson(f, m, b);
            if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                rec(f, a, m, left, tol / 2.0, depth - 1)
                    + rec(f, m, b, right, tol / 2.0, depth - 1)
            }
        }
        rec(f, a, b, simpson(f, a, b), tol, depth)
    }

    #[test]
    fn factored_form_consistency_on_interval() {
        // N=1: hardy and factored forms agree on smooth interpolants and the
        // residual shrinks under refinement.
        let mut last = f64::MAX;
        for h in [1e-2, 5e-3, 2.5e-3] {
            let ops = interval_ops(h);
            let u = ops.interpolate(|p| p[0] * (1.0 - p[0]) * (std::f64::consts::PI * p[0]).sin());
            let hf = ops.hardy_form(0.25, &u).unwrap();
            let ff = ops.factored_form(0.25, &u).unwrap();
            let rel = (hf - ff).abs() / hf;
            // in 1D the two quadratures agree to near rounding, so allow a
            // noise floor under the monotone-decrease check
            assert!(rel < (last * 1.05).max(1e-10), "rel {rel} at h {h}");
            last = rel;
        }
        let ops = interval_ops(1e-3);
        let u = ops.interpolate(|p| p[0] * (1.0 - p[0]) * (std::f64::consts::PI * p[0]).sin());
        let hf = ops.hardy_form(0.25, &u).unwrap();
        let ff = ops.factored_form(0.25, &u).unwrap();
        assert!((hf - ff).abs() / hf < 0.01, "1% agreement at h=1e-3");
        // zero input
        assert_eq!(ops.factored_form(0.25, &vec![0.0; ops.n_dofs()]).unwrap(), 0.0);
    }

    #[test]
    fn partial_sums_increase_toward_full_form() {
        let ops = interval_ops(0.01);
        let u = ops.interpolate(|p| p[0] * (1.0 - p[0]));
        let rows = ops
            .factored_form_partial_sums(0.25, &u, &[0.2, 0.1, 0.01, 0.0])
            .unwrap();
        let full = ops.factored_form(0.25, &u).unwrap();
        for win in rows.windows(2) {
            assert!(win[0].1 <= win[1].1 + 1e-14);
        }
        assert!((rows.last().unwrap().1 - full).abs() < 1e-12 * full.max(1.0));
    }

    #[test]
    fn flux_divergence_consistency() {
        // Σ ∫∂u/∂ν dσ ≈ ∫Δu dx for interpolated smooth u (u = x(1−x): Δu = −2)
        let ops = interval_ops(0.01);
        let u = ops.interpolate(|p| p[0] * (1.0 - p[0]));
        let flux = ops.boundary_flux(&u);
        let mut total = 0.0;
        for (f, fx) in ops.facets.iter().zip(&flux) {
            total += f.classification.weights.iter().sum::<f64>() * fx;
        }
        assert!((total - (-2.0)).abs() < 0.05, "flux sum {total}");
    }

    #[test]
    fn tangent_disk_assembly_definite() {
        let d = build_domain(DomainKind::TangentDisk { radius: 1.0 }).unwrap();
        let m = generate_mesh(&d, 0.2, &MeshOptions::default()).unwrap();
        let ops = OperatorSet::assemble(Arc::new(m), AssemblyOptions::default()).unwrap();
        assert_eq!(ops.lambda_n, 1.0);
        let n = ops.n_dofs();
        let u: Vec<f64> = (0..n).map(|i| ((i * 7 % 13) as f64 - 6.0) / 6.0).collect();
        // discrete Hardy positivity at the critical coupling
        let b = ops.hardy_form(ops.lambda_n, &u).unwrap();
        assert!(b > 0.0, "critical Hardy form {b}");
        for mat in [&ops.k, &ops.m, &ops.w, &ops.w_log, &ops.k_x2, &ops.g] {
            assert_eq!(mat.max_asymmetry(), 0.0);
            assert!(mat.all_finite());
        }
        // no clamped points on the tangent disk (only the far pole attains R_Ω)
        assert_eq!(ops.wlog_clamped, 0);
    }
}
