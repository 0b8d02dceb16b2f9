//! Bowyer–Watson Delaunay triangulation.
//!
//! Insertion order and a relative in-circle guard keep the construction
//! deterministic; ties on co-circular point sets (boundary nodes of a disk
//! are all co-circular) are resolved as "outside", which yields a valid
//! conforming triangulation that the mesh layer then validates.

#[derive(Clone, Copy)]
struct Tri {
    v: [usize; 3],
    cc: [f64; 2],
    rsq: f64,
    alive: bool,
}

fn circumcircle(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> ([f64; 2], f64) {
    let d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
    if d.abs() < 1e-300 {
        return ([0.0, 0.0], f64::MAX);
    }
    let a2 = a[0] * a[0] + a[1] * a[1];
    let b2 = b[0] * b[0] + b[1] * b[1];
    let c2 = c[0] * c[0] + c[1] * c[1];
    let ux = (a2 * (b[1] - c[1]) + b2 * (c[1] - a[1]) + c2 * (a[1] - b[1])) / d;
    let uy = (a2 * (c[0] - b[0]) + b2 * (a[0] - c[0]) + c2 * (b[0] - a[0])) / d;
    let rsq = (ux - a[0]).powi(2) + (uy - a[1]).powi(2);
    ([ux, uy], rsq)
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Triangulate `points` (inserted in the given order after an enclosing
/// super-triangle). Returns CCW triangles indexing into `points`.
pub fn triangulate(points: &[[f64; 2]]) -> Vec<[usize; 3]> {
    let n = points.len();
    assert!(n >= 3);
    let (mut lo, mut hi) = ([f64::MAX; 2], [f64::MIN; 2]);
    for p in points {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let cx = 0.5 * (lo[0] + hi[0]);
    let cy = 0.5 * (lo[1] + hi[1]);
    let d = ((hi[0] - lo[0]).max(hi[1] - lo[1])).max(1e-12);
    let mut pts: Vec<[f64; 2]> = points.to_vec();
    pts.push([cx - 40.0 * d, cy - 20.0 * d]);
    pts.push([cx + 40.0 * d, cy - 20.0 * d]);
    pts.push([cx, cy + 40.0 * d]);
    let (s0, s1, s2) = (n, n + 1, n + 2);

    let mut tris: Vec<Tri> = Vec::new();
    let (cc, rsq) = circumcircle(pts[s0], pts[s1], pts[s2]);
    tris.push(Tri { v: [s0, s1, s2], cc, rsq, alive: true });

    for p_idx in 0..n {
        let p = pts[p_idx];
        // Cavity: triangles whose circumcircle strictly contains p.
        let mut bad: Vec<usize> = Vec::new();
        for (ti, t) in tris.iter().enumerate() {
            if !t.alive {
                continue;
            }
            let d2 = (p[0] - t.cc[0]).powi(2) + (p[1] - t.cc[1]).powi(2);
            if d2 < t.rsq * (1.0 - 1e-12) {
                bad.push(ti);
            }
        }
        // Cavity boundary: directed edges of bad triangles whose reverse
        // does not occur among bad triangles.
        let mut edges: Vec<(usize, usize)> = Vec::with_capacity(bad.len() * 3);
        for &ti in &bad {
            let v = tris[ti].v;
            edges.push((v[0], v[1]));
            edges.push((v[1], v[2]));
            edges.push((v[2], v[0]));
            tris[ti].alive = false;
        }
        let mut keyed: Vec<(usize, usize, usize)> = edges
            .iter()
            .map(|&(a, b)| if a < b { (a, b, 0) } else { (b, a, 1) })
            .collect();
        keyed.sort_unstable();
        let mut boundary: Vec<(usize, usize)> = Vec::new();
        let mut i = 0;
        while i < keyed.len() {
            let j = keyed[i..].iter().take_while(|k| (k.0, k.1) == (keyed[i].0, keyed[i].1)).count();
            if j == 1 {
                let (a, b, flip) = keyed[i];
                boundary.push(if flip == 0 { (a, b) } else { (b, a) });
            }
            i += j;
        }
        for (a, b) in boundary {
            let (cc, rsq) = circumcircle(p, pts[a], pts[b]);
            tris.push(Tri { v: [p_idx, a, b], cc, rsq, alive: true });
        }
    }

    let mut out = Vec::new();
    for t in &tris {
        if !t.alive {
            continue;
        }
        if t.v.iter().any(|&v| v >= n) {
            continue;
        }
        let mut v = t.v;
        if signed_area(pts[v[0]], pts[v[1]], pts[v[2]]) < 0.0 {
            v.swap(1, 2);
        }
        out.push(v);
    }
    // Canonical rotation (smallest index first) and deterministic order.
    for v in out.iter_mut() {
        let k = (0..3).min_by_key(|&i| v[i]).unwrap();
        v.rotate_left(k);
    }
    out.sort_unstable();
    out
}
