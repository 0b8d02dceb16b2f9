//! Domains with the singularity at a boundary point, simplicial meshes and
//! the Γ₀ = {x·ν ≥ 0} boundary classification.
//!
//! Supported shapes keep the origin on the boundary and the domain inside
//! the upper half-space: the interval (0, L), the disk of radius r tangent
//! to the origin (center (0, r)) and the upper half-disk of radius r.

mod delaunay;

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::quadrature::segment_rule;

/// Sign tolerance for the x·ν classification; the analytic shapes produce
/// exact zeros only at machine scale.
pub const TOL_GEOM: f64 = 1e-12;

pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DomainKind {
    /// (0, L) with the singularity at x = 0.
    Interval { length: f64 },
    /// Disk of radius r centered at (0, r); the origin lies on the circle.
    TangentDisk { radius: f64 },
    /// {|x| < r, x₂ > 0}; the origin is the midpoint of the flat side.
    HalfDisk { radius: f64 },
}

impl DomainKind {
    pub fn name(&self) -> &'static str {
        match self {
            DomainKind::Interval { .. } => "interval",
            DomainKind::TangentDisk { .. } => "tangent_disk",
            DomainKind::HalfDisk { .. } => "half_disk",
        }
    }

    pub fn parameter(&self) -> f64 {
        match *self {
            DomainKind::Interval { length } => length,
            DomainKind::TangentDisk { radius } => radius,
            DomainKind::HalfDisk { radius } => radius,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DomainSpec {
    pub kind: DomainKind,
    /// space dimension N (1 or 2)
    pub dimension: usize,
    /// sup of |x| over the closed domain
    pub r_omega: f64,
    pub star_shaped: bool,
    pub origin_on_boundary: bool,
}

impl DomainSpec {
    /// λ(N) = N²/4
    pub fn lambda_n(&self) -> f64 {
        (self.dimension as f64).powi(2) / 4.0
    }

    /// λ* = (N−2)²/4
    pub fn lambda_star(&self) -> f64 {
        ((self.dimension as f64) - 2.0).powi(2) / 4.0
    }

    pub fn measure(&self) -> f64 {
        match self.kind {
            DomainKind::Interval { length } => length,
            DomainKind::TangentDisk { radius } => std::f64::consts::PI * radius * radius,
            DomainKind::HalfDisk { radius } => 0.5 * std::f64::consts::PI * radius * radius,
        }
    }
}

/// Validate a shape and derive its exact metadata.
pub fn build_domain(kind: DomainKind) -> Result<DomainSpec> {
    let p = kind.parameter();
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::InvalidDomain(format!("{} parameter must be positive, got {p}", kind.name())));
    }
    let (dimension, r_omega) = match kind {
        DomainKind::Interval { length } => (1, length),
        DomainKind::TangentDisk { radius } => (2, 2.0 * radius),
        DomainKind::HalfDisk { radius } => (2, radius),
    };
    // All three shapes are star-shaped about the geometric criterion
    // x·ν ≥ 0 on the whole boundary, and all contain the origin on the
    // boundary with the interior in {x_N > 0}.
    Ok(DomainSpec { kind, dimension, r_omega, star_shaped: true, origin_on_boundary: true })
}

#[derive(Clone, Debug)]
pub struct BoundaryFacet {
    /// facet vertices; in 1D both entries hold the single endpoint
    pub nodes: [usize; 2],
    /// adjacent cell index
    pub cell: usize,
    /// unit outward normal, derived from the facet geometry
    pub normal: [f64; 2],
    /// length in 2D, 1 in 1D (point measure)
    pub measure: f64,
    /// x·ν at the facet centroid
    pub xdotnu: f64,
    /// centroid x·ν ≥ −TOL_GEOM
    pub gamma0: bool,
}

#[derive(Clone, Debug, Default)]
pub struct MeshOptions {
    /// Power-law clustering of resolution toward the origin; 1.0 = uniform.
    pub grading: f64,
}

impl MeshOptions {
    pub fn grading(&self) -> f64 {
        if self.grading <= 0.0 {
            1.0
        } else {
            self.grading
        }
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub domain: DomainSpec,
    pub dim: usize,
    pub vertices: Vec<Point>,
    /// cell vertex indices, chunks of dim+1
    pub cell_nodes: Vec<usize>,
    pub boundary: Vec<BoundaryFacet>,
    pub is_boundary_vertex: Vec<bool>,
    /// vertex -> interior dof index
    pub dof_of_vertex: Vec<Option<usize>>,
    /// dof -> vertex
    pub vertex_of_dof: Vec<usize>,
    pub origin_vertex: usize,
    pub h_max: f64,
    pub h_min: f64,
}

#[derive(Clone, Debug)]
pub struct MeshQuality {
    pub worst_aspect: f64,
    pub worst_cell: usize,
    pub min_measure: f64,
}

/// Per-facet boundary data at facet quadrature points.
#[derive(Clone, Debug)]
pub struct FacetClassification {
    pub facet: usize,
    pub gamma0: bool,
    pub points: Vec<Point>,
    /// quadrature weights including the facet measure
    pub weights: Vec<f64>,
    pub xdotnu: Vec<f64>,
    pub xsq: Vec<f64>,
}

const ASPECT_LIMIT: f64 = 12.0;

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cell_nodes.len() / (self.dim + 1)
    }

    pub fn n_dofs(&self) -> usize {
        self.vertex_of_dof.len()
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let k = self.dim + 1;
        &self.cell_nodes[c * k..(c + 1) * k]
    }

    pub fn cell_measure(&self, c: usize) -> f64 {
        let v = self.cell(c);
        if self.dim == 1 {
            (self.vertices[v[1]][0] - self.vertices[v[0]][0]).abs()
        } else {
            let (a, b, c) = (self.vertices[v[0]], self.vertices[v[1]], self.vertices[v[2]]);
            0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs()
        }
    }

    pub fn cell_diameter(&self, c: usize) -> f64 {
        let v = self.cell(c);
        if self.dim == 1 {
            self.cell_measure(c)
        } else {
            let mut d = 0.0f64;
            for i in 0..3 {
                for j in (i + 1)..3 {
                    let (p, q) = (self.vertices[v[i]], self.vertices[v[j]]);
                    d = d.max(((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt());
                }
            }
            d
        }
    }

    pub fn total_measure(&self) -> f64 {
        (0..self.n_cells()).map(|c| self.cell_measure(c)).sum()
    }

    /// Assemble a mesh from raw cells: derives the boundary, normals, Γ₀
    /// mask, interior dof numbering and runs validation.
    pub fn from_cells(domain: DomainSpec, dim: usize, vertices: Vec<Point>, cell_nodes: Vec<usize>) -> Result<Mesh> {
        let k = dim + 1;
        if cell_nodes.len() % k != 0 || cell_nodes.is_empty() {
            return Err(Error::InvalidMesh("cell list size mismatch".into()));
        }
        let n_cells = cell_nodes.len() / k;
        let nv = vertices.len();

        // Boundary facets = facets incident to exactly one cell.
        let mut facet_map: Vec<((usize, usize), usize, usize)> = Vec::new(); // key, cell, opposite-vertex
        for c in 0..n_cells {
            let v = &cell_nodes[c * k..(c + 1) * k];
            if dim == 1 {
                facet_map.push(((v[0], v[0]), c, v[1]));
                facet_map.push(((v[1], v[1]), c, v[0]));
            } else {
                for i in 0..3 {
                    let (a, b) = (v[(i + 1) % 3], v[(i + 2) % 3]);
                    let key = if a < b { (a, b) } else { (b, a) };
                    facet_map.push((key, c, v[i]));
                }
            }
        }
        facet_map.sort_unstable_by_key(|e| e.0);
        let mut boundary = Vec::new();
        let mut i = 0;
        while i < facet_map.len() {
            let j = facet_map[i..].iter().take_while(|e| e.0 == facet_map[i].0).count();
            if j == 1 {
                let ((a, b), cell, opp) = facet_map[i];
                let facet = Self::make_facet(dim, &vertices, a, b, cell, opp);
                boundary.push(facet);
            } else if j > 2 {
                return Err(Error::InvalidMesh(format!(
                    "facet {:?} shared by {j} cells",
                    facet_map[i].0
                )));
            }
            i += j;
        }

        let mut is_boundary_vertex = vec![false; nv];
        for f in &boundary {
            is_boundary_vertex[f.nodes[0]] = true;
            is_boundary_vertex[f.nodes[1]] = true;
        }

        // The origin must be a boundary vertex.
        let origin_vertex = vertices
            .iter()
            .position(|p| p[0].abs() < 1e-12 && p[1].abs() < 1e-12)
            .ok_or_else(|| Error::InvalidMesh("origin is not a mesh vertex".into()))?;
        if !is_boundary_vertex[origin_vertex] {
            return Err(Error::InvalidMesh("origin vertex is not on the boundary".into()));
        }

        let mut dof_of_vertex = vec![None; nv];
        let mut vertex_of_dof = Vec::new();
        for v in 0..nv {
            if !is_boundary_vertex[v] {
                dof_of_vertex[v] = Some(vertex_of_dof.len());
                vertex_of_dof.push(v);
            }
        }

        // Interior dofs strictly avoid the origin (and the plane x_N = 0).
        for &v in &vertex_of_dof {
            let p = vertices[v];
            let xn = if dim == 1 { p[0] } else { p[1] };
            if (p[0] * p[0] + p[1] * p[1]).sqrt() <= 1e-12 || xn <= 0.0 {
                return Err(Error::InvalidMesh(format!(
                    "interior vertex {v} at ({}, {}) touches the singular set",
                    p[0], p[1]
                )));
            }
        }

        let mut h_max = 0.0f64;
        let mut h_min = f64::MAX;
        let mut mesh = Mesh {
            domain,
            dim,
            vertices,
            cell_nodes,
            boundary,
            is_boundary_vertex,
            dof_of_vertex,
            vertex_of_dof,
            origin_vertex,
            h_max: 0.0,
            h_min: 0.0,
        };
        for c in 0..mesh.n_cells() {
            let d = mesh.cell_diameter(c);
            h_max = h_max.max(d);
            h_min = h_min.min(d);
            if mesh.cell_measure(c) <= 1e-14 * d * d.max(1.0) {
                return Err(Error::InvalidMesh(format!("degenerate cell {c}")));
            }
        }
        mesh.h_max = h_max;
        mesh.h_min = h_min;
        mesh.validate()?;
        let q = mesh.quality();
        if q.worst_aspect > ASPECT_LIMIT {
            return Err(Error::MeshQuality(format!(
                "cell {} has aspect ratio {:.2} (limit {ASPECT_LIMIT}); h_max={:.3e}, h_min={:.3e}, cells={}",
                q.worst_cell, q.worst_aspect, mesh.h_max, mesh.h_min, mesh.n_cells()
            )));
        }
        Ok(mesh)
    }

    fn make_facet(dim: usize, vertices: &[Point], a: usize, b: usize, cell: usize, opp: usize) -> BoundaryFacet {
        if dim == 1 {
            let x = vertices[a][0];
            let xo = vertices[opp][0];
            let n = if x < xo { -1.0 } else { 1.0 };
            let xdotnu = x * n;
            BoundaryFacet {
                nodes: [a, a],
                cell,
                normal: [n, 0.0],
                measure: 1.0,
                xdotnu,
                gamma0: xdotnu >= -TOL_GEOM,
            }
        } else {
            let (pa, pb, po) = (vertices[a], vertices[b], vertices[opp]);
            let t = [pb[0] - pa[0], pb[1] - pa[1]];
            let len = (t[0] * t[0] + t[1] * t[1]).sqrt();
            let mut n = [t[1] / len, -t[0] / len];
            // orient away from the opposite vertex
            let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
            if (po[0] - mid[0]) * n[0] + (po[1] - mid[1]) * n[1] > 0.0 {
                n = [-n[0], -n[1]];
            }
            let xdotnu = mid[0] * n[0] + mid[1] * n[1];
            BoundaryFacet {
                nodes: [a, b],
                cell,
                normal: n,
                measure: len,
                xdotnu,
                gamma0: xdotnu >= -TOL_GEOM,
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 2 {
            // Cell areas must tile the polygon spanned by the boundary loop.
            let cells: f64 = self.total_measure();
            let mut loop_area = 0.0;
            for f in &self.boundary {
                let (a, b) = (self.vertices[f.nodes[0]], self.vertices[f.nodes[1]]);
                // orient the edge CCW: normal is outward, so (a,b) with
                // outward normal means rotate the tangent; use the cross
                // product with the outward normal to fix the sign.
                let t = [b[0] - a[0], b[1] - a[1]];
                let cross = t[0] * f.normal[1] - t[1] * f.normal[0];
                let sgn = if cross > 0.0 { -1.0 } else { 1.0 };
                loop_area += sgn * 0.5 * (a[0] * b[1] - b[0] * a[1]);
            }
            let rel = (cells - loop_area.abs()).abs() / cells.max(1e-300);
            if rel > 1e-9 {
                return Err(Error::InvalidMesh(format!(
                    "cells cover {cells:.12e} but the boundary loop encloses {:.12e}",
                    loop_area.abs()
                )));
            }
        }
        if self.n_dofs() == 0 {
            return Err(Error::InvalidMesh("no interior degrees of freedom".into()));
        }
        Ok(())
    }

    pub fn quality(&self) -> MeshQuality {
        let mut worst_aspect = 1.0f64;
        let mut worst_cell = 0;
        let mut min_measure = f64::MAX;
        for c in 0..self.n_cells() {
            min_measure = min_measure.min(self.cell_measure(c));
            if self.dim == 2 {
                let v = self.cell(c);
                let (pa, pb, pc) = (self.vertices[v[0]], self.vertices[v[1]], self.vertices[v[2]]);
                let e = |p: Point, q: Point| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
                let (a, b, cc) = (e(pb, pc), e(pa, pc), e(pa, pb));
                let area = self.cell_measure(c);
                let s = 0.5 * (a + b + cc);
                // circumradius / (2 inradius); equilateral = 1
                let aspect = (a * b * cc * s) / (8.0 * area * area);
                if aspect > worst_aspect {
                    worst_aspect = aspect;
                    worst_cell = c;
                }
            }
        }
        MeshQuality { worst_aspect, worst_cell, min_measure }
    }

    /// Nested refinement: 1D midpoint bisection, 2D uniform 4-split. The
    /// coarse P1 space is a subspace of the refined one.
    pub fn refine(&self) -> Result<Mesh> {
        let mut vertices = self.vertices.clone();
        let mut midpoint = std::collections::BTreeMap::<(usize, usize), usize>::new();
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
            let key = if a < b { (a, b) } else { (b, a) };
            *midpoint.entry(key).or_insert_with(|| {
                let (pa, pb) = (vertices[a], vertices[b]);
                vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                vertices.len() - 1
            })
        };
        let mut cell_nodes = Vec::with_capacity(self.cell_nodes.len() * 4);
        for c in 0..self.n_cells() {
            let v = self.cell(c).to_vec();
            if self.dim == 1 {
                let m = mid(v[0], v[1], &mut vertices);
                cell_nodes.extend_from_slice(&[v[0], m]);
                cell_nodes.extend_from_slice(&[m, v[1]]);
            } else {
                let m01 = mid(v[0], v[1], &mut vertices);
                let m12 = mid(v[1], v[2], &mut vertices);
                let m02 = mid(v[0], v[2], &mut vertices);
                cell_nodes.extend_from_slice(&[v[0], m01, m02]);
                cell_nodes.extend_from_slice(&[m01, v[1], m12]);
                cell_nodes.extend_from_slice(&[m02, m12, v[2]]);
                cell_nodes.extend_from_slice(&[m01, m12, m02]);
            }
        }
        Mesh::from_cells(self.domain, self.dim, vertices, cell_nodes)
    }

    /// Per-facet weights (x·ν, |x|²) at facet quadrature points and the Γ₀
    /// mask.
    pub fn classify_boundary(&self, n_quad: usize) -> Vec<FacetClassification> {
        self.boundary
            .iter()
            .enumerate()
            .map(|(fi, f)| {
                let (points, weights) = if self.dim == 1 {
                    (vec![self.vertices[f.nodes[0]]], vec![1.0])
                } else {
                    segment_rule(self.vertices[f.nodes[0]], self.vertices[f.nodes[1]], n_quad.max(2))
                };
                let xdotnu: Vec<f64> =
                    points.iter().map(|p| p[0] * f.normal[0] + p[1] * f.normal[1]).collect();
                let xsq: Vec<f64> = points.iter().map(|p| p[0] * p[0] + p[1] * p[1]).collect();
                FacetClassification { facet: fi, gamma0: f.gamma0, points, weights, xdotnu, xsq }
            })
            .collect()
    }

    /// Discrete divergence-theorem check: returns (∫_Γ x·ν dσ, N·|Ω_h|).
    /// Both sides agree to rounding on every valid mesh because the normals
    /// come from the facet geometry.
    pub fn divergence_check(&self) -> (f64, f64) {
        let lhs: f64 = self
            .classify_boundary(3)
            .iter()
            .map(|f| f.weights.iter().zip(&f.xdotnu).map(|(w, x)| w * x).sum::<f64>())
            .sum();
        (lhs, self.dim as f64 * self.total_measure())
    }

    /// Empirical (x·ν)/|x|² per boundary facet (centroid values), sorted by
    /// distance from the origin. Diagnostic for the flatness condition near
    /// the singular point; nothing is asserted about the constant.
    pub fn origin_flatness_ratios(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = self
            .boundary
            .iter()
            .filter_map(|f| {
                let (a, b) = (self.vertices[f.nodes[0]], self.vertices[f.nodes[1]]);
                let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                let xsq = mid[0] * mid[0] + mid[1] * mid[1];
                if xsq < 1e-300 {
                    None
                } else {
                    Some((xsq.sqrt(), f.xdotnu / xsq))
                }
            })
            .collect();
        out.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
        out
    }

    /// Plain-text serialization; see README for the format.
    pub fn write_text<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "SINGLAB MESH 1")?;
        writeln!(w, "DIM {}", self.dim)?;
        writeln!(w, "DOMAIN {} {:e}", self.domain.kind.name(), self.domain.kind.parameter())?;
        writeln!(w, "VERTICES {}", self.n_vertices())?;
        for p in &self.vertices {
            writeln!(w, "{:e} {:e}", p[0], p[1])?;
        }
        writeln!(w, "CELLS {}", self.n_cells())?;
        for c in 0..self.n_cells() {
            let v = self.cell(c);
            if self.dim == 1 {
                writeln!(w, "{} {}", v[0], v[1])?;
            } else {
                writeln!(w, "{} {} {}", v[0], v[1], v[2])?;
            }
        }
        writeln!(w, "BOUNDARY {}", self.boundary.len())?;
        for f in &self.boundary {
            writeln!(
                w,
                "{} {} {} {:e} {:e} {:e} {}",
                f.nodes[0], f.nodes[1], f.cell, f.normal[0], f.normal[1], f.xdotnu,
                if f.gamma0 { 1 } else { 0 }
            )?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: &mut R) -> Result<Mesh> {
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::InvalidMesh("truncated mesh file".into()))?
                .map_err(Error::Io)
        };
        let header = next()?;
        if header.trim() != "SINGLAB MESH 1" {
            return Err(Error::InvalidMesh(format!("bad header: {header}")));
        }
        let dim_line = next()?;
        let dim: usize = dim_line
            .strip_prefix("DIM ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::InvalidMesh("bad DIM line".into()))?;
        let dom_line = next()?;
        let parts: Vec<&str> = dom_line.split_whitespace().collect();
        if parts.len() != 3 || parts[0] != "DOMAIN" {
            return Err(Error::InvalidMesh("bad DOMAIN line".into()));
        }
        let param: f64 =
            parts[2].parse().map_err(|_| Error::InvalidMesh("bad domain parameter".into()))?;
        let kind = match parts[1] {
            "interval" => DomainKind::Interval { length: param },
            "tangent_disk" => DomainKind::TangentDisk { radius: param },
            "half_disk" => DomainKind::HalfDisk { radius: param },
            other => return Err(Error::InvalidMesh(format!("unknown domain kind {other}"))),
        };
        let domain = build_domain(kind)?;
        let nv_line = next()?;
        let nv: usize = nv_line
            .strip_prefix("VERTICES ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::InvalidMesh("bad VERTICES line".into()))?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let l = next()?;
            let mut it = l.split_whitespace().map(|t| t.parse::<f64>());
            let x = it
                .next()
                .and_then(|v| v.ok())
                .ok_or_else(|| Error::InvalidMesh("bad vertex line".into()))?;
            let y = it.next().and_then(|v| v.ok()).unwrap_or(0.0);
            vertices.push([x, y]);
        }
        let nc_line = next()?;
        let nc: usize = nc_line
            .strip_prefix("CELLS ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::InvalidMesh("bad CELLS line".into()))?;
        let mut cell_nodes = Vec::with_capacity(nc * (dim + 1));
        for _ in 0..nc {
            let l = next()?;
            for tok in l.split_whitespace().take(dim + 1) {
                cell_nodes
                    .push(tok.parse().map_err(|_| Error::InvalidMesh("bad cell line".into()))?);
            }
        }
        // The BOUNDARY section is informational; facets are rebuilt and the
        // count is cross-checked.
        let nb_line = next()?;
        let nb: usize = nb_line
            .strip_prefix("BOUNDARY ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::InvalidMesh("bad BOUNDARY line".into()))?;
        let mesh = Mesh::from_cells(domain, dim, vertices, cell_nodes)?;
        if mesh.boundary.len() != nb {
            return Err(Error::InvalidMesh(format!(
                "boundary count mismatch: file says {nb}, mesh has {}",
                mesh.boundary.len()
            )));
        }
        Ok(mesh)
    }
}

/// Generate a conforming mesh with the origin pinned as a boundary vertex.
pub fn generate_mesh(domain: &DomainSpec, h: f64, opts: &MeshOptions) -> Result<Mesh> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("h must be positive, got {h}")));
    }
    if h > domain.r_omega / 4.0 {
        return Err(Error::InvalidArgument(format!(
            "h = {h} too coarse; require h <= R_Omega/4 = {}",
            domain.r_omega / 4.0
        )));
    }
    match domain.kind {
        DomainKind::Interval { length } => interval_mesh(*domain, length, h, opts),
        DomainKind::TangentDisk { radius } => tangent_disk_mesh(*domain, radius, h, opts),
        DomainKind::HalfDisk { radius } => half_disk_mesh(*domain, radius, h, opts),
    }
}

fn interval_mesh(domain: DomainSpec, length: f64, h: f64, opts: &MeshOptions) -> Result<Mesh> {
    let n = (length / h).ceil() as usize;
    let gamma = opts.grading();
    let vertices: Vec<Point> = (0..=n)
        .map(|j| {
            let t = j as f64 / n as f64;
            [length * t.powf(gamma), 0.0]
        })
        .collect();
    let mut cell_nodes = Vec::with_capacity(2 * n);
    for j in 0..n {
        cell_nodes.extend_from_slice(&[j, j + 1]);
    }
    Mesh::from_cells(domain, 1, vertices, cell_nodes)
}

/// Map t ∈ [0,1] to itself clustering toward both ends for γ > 1 (used to
/// refine the boundary near the origin on the tangent disk).
fn cluster_both_ends(t: f64, gamma: f64) -> f64 {
    if t <= 0.5 {
        0.5 * (2.0 * t).powf(gamma)
    } else {
        1.0 - 0.5 * (2.0 * (1.0 - t)).powf(gamma)
    }
}

fn hex_lattice(h: f64, x_range: (f64, f64), y_range: (f64, f64)) -> Vec<Point> {
    let dy = h * 3f64.sqrt() / 2.0;
    let mut pts = Vec::new();
    let mut j = 0usize;
    loop {
        let y = y_range.0 + (j as f64 + 1.0) * dy;
        if y >= y_range.1 {
            break;
        }
        let off = if j % 2 == 0 { 0.0 } else { 0.5 * h };
        let mut i = 0i64;
        loop {
            let x = x_range.0 + off + i as f64 * h;
            if x >= x_range.1 {
                break;
            }
            pts.push([x, y]);
            i += 1;
        }
        j += 1;
    }
    pts
}

fn tangent_disk_mesh(domain: DomainSpec, radius: f64, h: f64, opts: &MeshOptions) -> Result<Mesh> {
    let gamma = opts.grading();
    let nb = ((2.0 * std::f64::consts::PI * radius / h).ceil() as usize).max(12);
    let mut points: Vec<Point> = Vec::new();
    // Interior first (better tie behavior for the co-circular hull points).
    let margin = 0.68 * h;
    for p in hex_lattice(h, (-radius, radius), (0.0, 2.0 * radius)) {
        let q = if gamma != 1.0 {
            let rho = (p[0] * p[0] + p[1] * p[1]).sqrt();
            if rho < 1e-14 {
                p
            } else {
                let scale = domain.r_omega * (rho / domain.r_omega).powf(gamma) / rho;
                [p[0] * scale, p[1] * scale]
            }
        } else {
            p
        };
        let d_center = (q[0] * q[0] + (q[1] - radius) * (q[1] - radius)).sqrt();
        let local = if gamma == 1.0 {
            margin
        } else {
            let rho = (p[0] * p[0] + p[1] * p[1]).sqrt().max(1e-14);
            margin * gamma * (rho / domain.r_omega).powf(gamma - 1.0)
        };
        if d_center < radius - local.max(0.35 * h) {
            points.push(q);
        }
    }
    let n_interior = points.len();
    // Boundary ring; θ = 0 lands exactly on the origin.
    for k in 0..nb {
        let t = cluster_both_ends(k as f64 / nb as f64, gamma);
        let theta = 2.0 * std::f64::consts::PI * t;
        let p = [radius * theta.sin(), radius - radius * theta.cos()];
        points.push(if k == 0 { [0.0, 0.0] } else { p });
    }
    let tris = delaunay::triangulate(&points);
    let mut cell_nodes = Vec::with_capacity(tris.len() * 3);
    for t in &tris {
        cell_nodes.extend_from_slice(t);
    }
    let _ = n_interior;
    Mesh::from_cells(domain, 2, points, cell_nodes)
}

fn half_disk_mesh(domain: DomainSpec, radius: f64, h: f64, opts: &MeshOptions) -> Result<Mesh> {
    let _ = opts;
    let mut points: Vec<Point> = Vec::new();
    let margin = 0.68 * h;
    for p in hex_lattice(h, (-radius, radius), (0.0, radius)) {
        let d_center = (p[0] * p[0] + p[1] * p[1]).sqrt();
        if d_center < radius - margin && p[1] > margin {
            points.push(p);
        }
    }
    // Flat side including the origin exactly; even segment count.
    let mut nf = ((2.0 * radius / h).ceil() as usize).max(4);
    if nf % 2 == 1 {
        nf += 1;
    }
    for i in 0..=nf {
        let x = -radius + 2.0 * radius * i as f64 / nf as f64;
        points.push(if i == nf / 2 { [0.0, 0.0] } else { [x, 0.0] });
    }
    // Arc from (r, 0) to (−r, 0), endpoints excluded (already present).
    let na = ((std::f64::consts::PI * radius / h).ceil() as usize).max(4);
    for k in 1..na {
        let phi = std::f64::consts::PI * k as f64 / na as f64;
        points.push([radius * phi.cos(), radius * phi.sin()]);
    }
    let tris = delaunay::triangulate(&points);
    let mut cell_nodes = Vec::with_capacity(tris.len() * 3);
    for t in &tris {
        cell_nodes.extend_from_slice(t);
    }
    Mesh::from_cells(domain, 2, points, cell_nodes)
}
