//! Conforming triangulations of the two-inclusion domain.
//!
//! The gap strip |x1| <= R is meshed by a mapped structured grid whose rows
//! follow the level sets of x2/delta(x1), so the layer count across the gap
//! is exact by construction. The exterior is meshed once on the first
//! quadrant with a constrained Delaunay triangulation driven by a Lipschitz
//! size field, then mirrored across both axes. Mirroring keeps the full mesh
//! bitwise symmetric, which the interaction-matrix symmetry checks rely on.

use crate::geometry::{NeckGeometry, Region};
use crate::sampling;
use crate::{Error, Result};
use spade::{ConstrainedDelaunayTriangulation, Point2, Triangulation};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum BoundaryTag {
    D1,
    D2,
    Container,
}

#[derive(Clone, Debug)]
pub struct StripInfo {
    /// Column abscissae from -R to R, symmetric about 0.
    pub columns: Vec<f64>,
    /// Number of element layers across the gap (even).
    pub rows: usize,
    /// Strip triangles occupy indices `0..tri_count` in blocks of 4 per quad.
    pub tri_count: usize,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    /// CCW triangles.
    pub triangles: Vec<[usize; 3]>,
    pub vertex_tags: Vec<Option<BoundaryTag>>,
    /// Unique edges as sorted vertex pairs.
    pub edges: Vec<[usize; 2]>,
    /// For each triangle, global edge ids opposite to each local vertex.
    pub tri_edges: Vec<[usize; 3]>,
    pub edge_tags: Vec<Option<BoundaryTag>>,
    pub strip: Option<StripInfo>,
    pub h_min: f64,
    pub h_max: f64,
    locate_grid: LocateGrid,
}

#[derive(Clone, Debug)]
struct LocateGrid {
    x0: f64,
    y0: f64,
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
}

fn tri_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

fn circumcenter(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> [f64; 2] {
    let d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
    if d.abs() < 1e-300 {
        return [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0];
    }
    let a2 = a[0] * a[0] + a[1] * a[1];
    let b2 = b[0] * b[0] + b[1] * b[1];
    let c2 = c[0] * c[0] + c[1] * c[1];
    [
        (a2 * (b[1] - c[1]) + b2 * (c[1] - a[1]) + c2 * (a[1] - b[1])) / d,
        (a2 * (c[0] - b[0]) + b2 * (a[0] - c[0]) + c2 * (b[0] - a[0])) / d,
    ]
}

/// Even-odd ray-casting point-in-polygon test.
fn point_in_polygon(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = (poly[i][0], poly[i][1]);
        let (xj, yj) = (poly[j][0], poly[j][1]);
        if (yi > p[1]) != (yj > p[1]) && p[0] < (xj - xi) * (p[1] - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Quality measure 2 r_in / R_circ in (0, 1], equilateral = 1.
fn tri_quality(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    let la = (b[0] - c[0]).hypot(b[1] - c[1]);
    let lb = (a[0] - c[0]).hypot(a[1] - c[1]);
    let lc = (a[0] - b[0]).hypot(a[1] - b[1]);
    let area = tri_area(a, b, c).abs();
    16.0 * area * area / ((la + lb + lc) * la * lb * lc)
}

impl Mesh {
    fn finish(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        vertex_tags: Vec<Option<BoundaryTag>>,
        boundary_edges: BTreeMap<[usize; 2], BoundaryTag>,
        strip: Option<StripInfo>,
        h_min: f64,
        h_max: f64,
    ) -> Result<Mesh> {
        let mut edge_ids: BTreeMap<[usize; 2], usize> = BTreeMap::new();
        let mut edges = Vec::new();
        let mut tri_edges = vec![[usize::MAX; 3]; triangles.len()];
        let mut edge_use = Vec::new();
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                let key = [a.min(b), a.max(b)];
                let id = *edge_ids.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edge_use.push(0usize);
                    edges.len() - 1
                });
                tri_edges[t][k] = id;
                edge_use[id] += 1;
            }
        }
        let mut edge_tags = vec![None; edges.len()];
        for (key, tag) in &boundary_edges {
            match edge_ids.get(key) {
                Some(&id) => edge_tags[id] = Some(*tag),
                None => {
                    return Err(Error::Mesh(format!(
                        "boundary edge missing from triangulation: {:?} - {:?} ({tag:?})",
                        vertices[key[0]], vertices[key[1]]
                    )))
                }
            }
        }
        for (id, &uses) in edge_use.iter().enumerate() {
            let tagged = edge_tags[id].is_some();
            if uses == 1 && !tagged {
                return Err(Error::Mesh("untagged exterior edge".into()));
            }
            if uses == 2 && tagged {
                return Err(Error::Mesh("tagged interior edge".into()));
            }
            if uses > 2 {
                return Err(Error::Mesh("non-manifold edge".into()));
            }
        }
        let locate_grid = LocateGrid::build(&vertices, &triangles);
        Ok(Mesh {
            vertices,
            triangles,
            vertex_tags,
            edges,
            tri_edges,
            edge_tags,
            strip,
            h_min,
            h_max,
            locate_grid,
        })
    }

    pub fn tri_points(&self, t: usize) -> [[f64; 2]; 3] {
        let tr = self.triangles[t];
        [self.vertices[tr[0]], self.vertices[tr[1]], self.vertices[tr[2]]]
    }

    pub fn tri_barycenter(&self, t: usize) -> [f64; 2] {
        let p = self.tri_points(t);
        [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0]
    }

    pub fn tri_area(&self, t: usize) -> f64 {
        let p = self.tri_points(t);
        tri_area(p[0], p[1], p[2])
    }

    pub fn min_quality(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let p = self.tri_points(t);
                tri_quality(p[0], p[1], p[2])
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn longest_edge(&self, t: usize) -> f64 {
        let p = self.tri_points(t);
        let mut m = 0.0f64;
        for k in 0..3 {
            let (a, b) = (p[k], p[(k + 1) % 3]);
            m = m.max((a[0] - b[0]).hypot(a[1] - b[1]));
        }
        m
    }

    /// Largest element-size (longest edge) ratio between edge-adjacent
    /// triangles.
    pub fn max_neighbor_size_ratio(&self) -> f64 {
        let mut owner: Vec<Option<usize>> = vec![None; self.edges.len()];
        let mut worst = 1.0f64;
        for (t, te) in self.tri_edges.iter().enumerate() {
            for &e in te {
                match owner[e] {
                    None => owner[e] = Some(t),
                    Some(s) => {
                        let r = self.longest_edge(t) / self.longest_edge(s);
                        worst = worst.max(r.max(1.0 / r));
                    }
                }
            }
        }
        worst
    }

    /// Number of triangles crossed by the open vertical gap segment at `x1`.
    pub fn gap_layer_count(&self, geom: &NeckGeometry, x1: f64) -> usize {
        let (lo, hi) = geom.gap_bounds(x1);
        let mut count = 0;
        for t in 0..self.triangles.len() {
            let p = self.tri_points(t);
            let xmin = p[0][0].min(p[1][0]).min(p[2][0]);
            let xmax = p[0][0].max(p[1][0]).max(p[2][0]);
            if x1 <= xmin || x1 >= xmax {
                continue;
            }
            // y-range of the triangle along the line x = x1
            let mut ys: Vec<f64> = Vec::with_capacity(2);
            for k in 0..3 {
                let a = p[k];
                let b = p[(k + 1) % 3];
                if (a[0] - x1) * (b[0] - x1) < 0.0 {
                    let s = (x1 - a[0]) / (b[0] - a[0]);
                    ys.push(a[1] + s * (b[1] - a[1]));
                }
            }
            if ys.len() < 2 {
                continue;
            }
            let ymin = ys.iter().cloned().fold(f64::INFINITY, f64::min);
            let ymax = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if ymax > lo && ymin < hi {
                count += 1;
            }
        }
        count
    }

    /// Mesh invariant audit: quality and gap resolution.
    pub fn audit(&self, geom: &NeckGeometry) -> Result<()> {
        let (q, worst) = (0..self.triangles.len())
            .map(|t| {
                let p = self.tri_points(t);
                (tri_quality(p[0], p[1], p[2]), t)
            })
            .fold((f64::INFINITY, 0), |acc, x| if x.0 < acc.0 { x } else { acc });
        if q < 0.2 {
            return Err(Error::Mesh(format!(
                "min triangle quality {q:.3} below 0.2 at {:?}",
                self.tri_barycenter(worst)
            )));
        }
        let r = geom.neck_half_width;
        for i in 0..64 {
            let x1 = (i as f64 + 0.5) / 64.0 * 2.0 * r - r;
            let layers = self.gap_layer_count(geom, x1);
            if layers < 4 {
                return Err(Error::Mesh(format!("only {layers} gap layers at x1 = {x1:.4}")));
            }
        }
        Ok(())
    }

    /// Locates the triangle containing `x` and returns barycentric weights.
    pub fn locate(&self, x: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in self.locate_grid.candidates(x) {
            let t = t as usize;
            let p = self.tri_points(t);
            let area = tri_area(p[0], p[1], p[2]);
            let w0 = tri_area(x, p[1], p[2]) / area;
            let w1 = tri_area(p[0], x, p[2]) / area;
            let w2 = 1.0 - w0 - w1;
            let min_w = w0.min(w1).min(w2);
            if min_w >= -1e-10 {
                return Some((t, [w0, w1, w2]));
            }
            if best.map_or(true, |(_, _, m)| min_w > m) {
                best = Some((t, [w0, w1, w2], min_w));
            }
        }
        // tolerate slight excursions outside the grid cell candidates
        match best {
            Some((t, w, m)) if m > -1e-6 => Some((t, w)),
            _ => None,
        }
    }

    /// Writes a plain-text node/element file: `v x y [tag]` and `t i j k`.
    pub fn export_text(&self, mut w: impl std::io::Write) -> Result<()> {
        writeln!(w, "# vertices {} triangles {}", self.vertices.len(), self.triangles.len())?;
        for (v, tag) in self.vertices.iter().zip(&self.vertex_tags) {
            let t = match tag {
                Some(BoundaryTag::D1) => " D1",
                Some(BoundaryTag::D2) => " D2",
                Some(BoundaryTag::Container) => " D",
                None => "",
            };
            writeln!(w, "v {:.17e} {:.17e}{}", v[0], v[1], t)?;
        }
        for t in &self.triangles {
            writeln!(w, "t {} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }
}

impl LocateGrid {
    fn build(vertices: &[[f64; 2]], triangles: &[[usize; 3]]) -> LocateGrid {
        let mut x0 = f64::INFINITY;
        let mut x1 = f64::NEG_INFINITY;
        let mut y0 = f64::INFINITY;
        let mut y1 = f64::NEG_INFINITY;
        for v in vertices {
            x0 = x0.min(v[0]);
            x1 = x1.max(v[0]);
            y0 = y0.min(v[1]);
            y1 = y1.max(v[1]);
        }
        let n = (4.0 * (triangles.len() as f64).sqrt()) as usize;
        let n = n.clamp(16, 512);
        let cell = ((x1 - x0).max(y1 - y0) / n as f64).max(1e-12);
        let nx = ((x1 - x0) / cell).ceil() as usize + 1;
        let ny = ((y1 - y0) / cell).ceil() as usize + 1;
        let mut cells = vec![Vec::new(); nx * ny];
        for (t, tri) in triangles.iter().enumerate() {
            let p = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
            let bx0 = ((p[0][0].min(p[1][0]).min(p[2][0]) - x0) / cell).floor() as usize;
            let bx1 = ((p[0][0].max(p[1][0]).max(p[2][0]) - x0) / cell).floor() as usize;
            let by0 = ((p[0][1].min(p[1][1]).min(p[2][1]) - y0) / cell).floor() as usize;
            let by1 = ((p[0][1].max(p[1][1]).max(p[2][1]) - y0) / cell).floor() as usize;
            for ix in bx0..=bx1.min(nx - 1) {
                for iy in by0..=by1.min(ny - 1) {
                    cells[iy * nx + ix].push(t as u32);
                }
            }
        }
        LocateGrid { x0, y0, cell, nx, ny, cells }
    }

    fn candidates(&self, x: [f64; 2]) -> &[u32] {
        let ix = ((x[0] - self.x0) / self.cell).floor();
        let iy = ((x[1] - self.y0) / self.cell).floor();
        if ix < 0.0 || iy < 0.0 {
            return &[];
        }
        let (ix, iy) = (ix as usize, iy as usize);
        if ix >= self.nx || iy >= self.ny {
            return &[];
        }
        &self.cells[iy * self.nx + ix]
    }
}

/// Mesh generation parameters.
#[derive(Clone, Copy, Debug)]
pub struct MeshParams {
    pub h_min: f64,
    pub h_max: f64,
    /// Element layers across the gap; even, at least 4.
    pub layers: usize,
}

impl MeshParams {
    pub fn new(h_min: f64, h_max: f64) -> MeshParams {
        MeshParams { h_min, h_max, layers: 6 }
    }
}

/// Neck size-field constant: target element size is delta(x1) / 4.
const SIZE_C0: f64 = 0.25;
/// Lipschitz growth rate of the exterior size field.
const SIZE_LIP: f64 = 0.35;

struct SizeField {
    geom: NeckGeometry,
    h_min: f64,
    h_max: f64,
    /// Gate anchor matches the strip layer spacing so the junction fan stays
    /// size-graded.
    gate_size: f64,
}

impl SizeField {
    fn new(geom: &NeckGeometry, h_min: f64, h_max: f64, layers: usize) -> SizeField {
        let gate_size =
            (geom.delta_unchecked(geom.neck_half_width) / layers as f64).clamp(h_min, h_max);
        SizeField { geom: geom.clone(), h_min, h_max, gate_size }
    }

    fn eval(&self, x: [f64; 2]) -> f64 {
        let g = &self.geom;
        let r = g.neck_half_width;
        // distance to the gate segment {|x1|<=R, x2=0}
        let dx = (x[0].abs() - r).max(0.0);
        let dist = dx.hypot(x[1]);
        let mut s = (self.gate_size + SIZE_LIP * dist).min(self.h_max);
        if x[0].abs() <= 2.0 * r {
            let (lo, hi) = g.gap_bounds(x[0]);
            if x[1] > lo - 0.05 && x[1] < hi + 0.05 {
                s = s.min(SIZE_C0 * g.delta_unchecked(x[0]));
            }
        }
        s.clamp(self.h_min, self.h_max)
    }
}

/// Builds the graded two-inclusion mesh.
pub fn build_mesh(geom: &NeckGeometry, params: MeshParams) -> Result<Mesh> {
    if !(params.h_min > 0.0) || params.h_min >= params.h_max {
        return Err(Error::Config("need 0 < h_min < h_max".into()));
    }
    if params.h_min > geom.epsilon / 4.0 {
        return Err(Error::Config(format!(
            "h_min = {} too large for the gap; need h_min <= epsilon/4 = {}",
            params.h_min,
            geom.epsilon / 4.0
        )));
    }
    if params.layers < 4 || params.layers % 2 != 0 {
        return Err(Error::Config("layers must be even and at least 4".into()));
    }
    let size = SizeField::new(geom, params.h_min, params.h_max, params.layers);

    // ---- structured strip -------------------------------------------------
    let r = geom.neck_half_width;
    let mut cols_half = vec![0.0f64];
    loop {
        let x = *cols_half.last().unwrap();
        if x >= r {
            break;
        }
        let s = size.eval([x, 0.0]);
        let step = size.eval([x + 0.5 * s, 0.0]);
        cols_half.push(x + step);
        if cols_half.len() > 2_000_000 {
            return Err(Error::Mesh("strip column generation diverged".into()));
        }
    }
    let scale = r / *cols_half.last().unwrap();
    for x in &mut cols_half {
        *x *= scale;
    }
    *cols_half.last_mut().unwrap() = r;
    let mut columns: Vec<f64> = cols_half.iter().skip(1).rev().map(|&x| -x).collect();
    columns.extend_from_slice(&cols_half);
    let nc = columns.len() - 1;
    let n = params.layers;

    let mut vertices: Vec<[f64; 2]> = Vec::new();
    let mut vertex_tags: Vec<Option<BoundaryTag>> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    let mut boundary_edges: BTreeMap<[usize; 2], BoundaryTag> = BTreeMap::new();

    // grid vertices: rows follow level sets c_j = (j - n/2)/n of x2/delta
    let grid_at = |i: usize, j: usize| i * (n + 1) + j;
    for &x in &columns {
        let d = geom.delta_unchecked(x);
        for j in 0..=n {
            let c = (j as f64 - (n / 2) as f64) / n as f64;
            vertices.push([x, c * d]);
            vertex_tags.push(if j == 0 {
                Some(BoundaryTag::D2)
            } else if j == n {
                Some(BoundaryTag::D1)
            } else {
                None
            });
        }
    }
    let center0 = vertices.len();
    for i in 0..nc {
        let xm = 0.5 * (columns[i] + columns[i + 1]);
        let dm = geom.delta_unchecked(xm);
        for j in 0..n {
            let cm = (2.0 * j as f64 + 1.0 - n as f64) / (2.0 * n as f64);
            vertices.push([xm, cm * dm]);
            vertex_tags.push(None);
        }
    }
    for i in 0..nc {
        for j in 0..n {
            let v00 = grid_at(i, j);
            let v10 = grid_at(i + 1, j);
            let v11 = grid_at(i + 1, j + 1);
            let v01 = grid_at(i, j + 1);
            let c = center0 + i * n + j;
            triangles.push([v00, v10, c]);
            triangles.push([v10, v11, c]);
            triangles.push([v11, v01, c]);
            triangles.push([v01, v00, c]);
            if j == 0 {
                boundary_edges.insert([v00.min(v10), v00.max(v10)], BoundaryTag::D2);
            }
            if j == n - 1 {
                boundary_edges.insert([v01.min(v11), v01.max(v11)], BoundaryTag::D1);
            }
        }
    }
    let strip = StripInfo { columns: columns.clone(), rows: n, tri_count: triangles.len() };

    // ---- quadrant boundary loop -------------------------------------------
    let rc = geom.container_radius;
    let gate: Vec<[f64; 2]> = (n / 2..=n).map(|j| vertices[grid_at(nc, j)]).collect();
    let mut incl = geom.upper_boundary_quarter(&|x| 0.8 * size.eval(x));
    incl[0] = *gate.last().unwrap(); // bitwise agreement with the strip gate top

    let seg_points = |a: [f64; 2], b: [f64; 2], size: &SizeField| -> Vec<[f64; 2]> {
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let mut out = vec![a];
        let mut t = 0.0;
        while t < 1.0 {
            let p = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            let dt = 0.9 * size.eval(p) / len;
            t = (t + dt).min(1.0);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
        *out.last_mut().unwrap() = b;
        // merge a short trailing step so no boundary edge degenerates
        if out.len() >= 3 {
            let k = out.len();
            let d_last = (out[k - 1][0] - out[k - 2][0]).hypot(out[k - 1][1] - out[k - 2][1]);
            let d_prev = (out[k - 2][0] - out[k - 3][0]).hypot(out[k - 2][1] - out[k - 3][1]);
            if d_last < 0.5 * d_prev {
                out.remove(k - 2);
            }
        }
        out
    };

    // CCW loop around the quadrant fluid region
    let mut loop_pts: Vec<([f64; 2], Option<BoundaryTag>)> = Vec::new();
    // bottom axis from the gate to the container (untagged symmetry edge)
    let bottom = seg_points([r, 0.0], [rc, 0.0], &size);
    for p in &bottom[..bottom.len() - 1] {
        loop_pts.push((*p, None));
    }
    // container quarter arc from (rc, 0) to (0, rc)
    let arc_steps = (std::f64::consts::FRAC_PI_2 * rc / (0.8 * params.h_max)).ceil() as usize;
    for k in 0..arc_steps {
        let phi = k as f64 / arc_steps as f64 * std::f64::consts::FRAC_PI_2;
        let p = if k == 0 { [rc, 0.0] } else { [rc * phi.cos(), rc * phi.sin()] };
        loop_pts.push((p, Some(BoundaryTag::Container)));
    }
    loop_pts.push(([0.0, rc], Some(BoundaryTag::Container)));
    // top axis from (0, rc) down to the inclusion apex
    let apex = *incl.last().unwrap();
    let topaxis = seg_points([0.0, rc], apex, &size);
    for p in &topaxis[1..topaxis.len() - 1] {
        loop_pts.push((*p, None));
    }
    // inclusion boundary from apex to gate top
    for p in incl.iter().rev() {
        loop_pts.push((*p, Some(BoundaryTag::D1)));
    }
    // gate from below the top down to just above (R, 0)
    for p in gate.iter().rev().skip(1).take(gate.len().saturating_sub(2)) {
        loop_pts.push((*p, None));
    }

    // Edge tags: an edge inherits a tag only when both endpoints carry it.
    let nl = loop_pts.len();
    let mut loop_edge_tag: Vec<Option<BoundaryTag>> = Vec::with_capacity(nl);
    for i in 0..nl {
        let a = loop_pts[i].1;
        let b = loop_pts[(i + 1) % nl].1;
        loop_edge_tag.push(match (a, b) {
            (Some(x), Some(y)) if x == y => Some(x),
            _ => None,
        });
    }

    // ---- interior seeding ---------------------------------------------------
    struct Disk {
        grid: Vec<Vec<usize>>,
        pts: Vec<([f64; 2], f64)>,
        cell: f64,
        nx: usize,
        ny: usize,
    }
    impl Disk {
        fn new(extent: f64, min_cell: f64) -> Disk {
            let cell = min_cell.max(extent / 512.0);
            let nx = (extent / cell).ceil() as usize + 2;
            Disk { grid: vec![Vec::new(); nx * nx], pts: Vec::new(), cell, nx, ny: nx }
        }
        fn idx(&self, p: [f64; 2]) -> (usize, usize) {
            let ix = ((p[0] / self.cell).floor().max(0.0) as usize).min(self.nx - 1);
            let iy = ((p[1] / self.cell).floor().max(0.0) as usize).min(self.ny - 1);
            (ix, iy)
        }
        fn too_close(&self, p: [f64; 2], rad: f64) -> bool {
            let (ix, iy) = self.idx(p);
            let reach = (rad / self.cell).ceil() as usize + 1;
            for jx in ix.saturating_sub(reach)..=(ix + reach).min(self.nx - 1) {
                for jy in iy.saturating_sub(reach)..=(iy + reach).min(self.ny - 1) {
                    for &q in &self.grid[jy * self.nx + jx] {
                        let (qp, qr) = self.pts[q];
                        let d = (qp[0] - p[0]).hypot(qp[1] - p[1]);
                        if d < rad.max(qr) {
                            return true;
                        }
                    }
                }
            }
            false
        }
        fn push(&mut self, p: [f64; 2], rad: f64) {
            let (ix, iy) = self.idx(p);
            self.pts.push((p, rad));
            self.grid[iy * self.nx + ix].push(self.pts.len() - 1);
        }
    }

    let loop_poly: Vec<[f64; 2]> = loop_pts.iter().map(|(p, _)| *p).collect();
    let mut disk = Disk::new(rc + 1.0, 0.7 * params.h_min.max(1e-4));
    for (p, _) in &loop_pts {
        disk.push(*p, 0.0);
    }
    let mut interior: Vec<[f64; 2]> = Vec::new();
    // one shadow row of seeds offset inward from every boundary edge; this
    // keeps slivers of consecutive boundary points from ever forming
    for i in 0..nl {
        let a = loop_pts[i].0;
        let b = loop_pts[(i + 1) % nl].0;
        let t = [b[0] - a[0], b[1] - a[1]];
        let len = t[0].hypot(t[1]);
        if len < 1e-12 {
            continue;
        }
        // interior lies left of the CCW loop
        let nrm = [-t[1] / len, t[0] / len];
        let p = [
            0.5 * (a[0] + b[0]) + 0.75 * len * nrm[0],
            0.5 * (a[1] + b[1]) + 0.75 * len * nrm[1],
        ];
        if !point_in_polygon(p, &loop_poly) {
            continue;
        }
        let s = size.eval(p);
        if disk.too_close(p, (0.42 * s).min(0.6 * len)) {
            continue;
        }
        disk.push(p, (0.42 * s).min(0.6 * len));
        interior.push(p);
    }
    let candidates = 140_000usize;
    for k in 0..candidates {
        let q = sampling::r2_point(k);
        let p = [q[0] * rc, q[1] * rc];
        // any fluid outside the structured strip: the outer fluid or the
        // outer part (|x1| > R) of the neck band
        match geom.classify(p) {
            Region::OuterFluid => {}
            Region::NeckFluid(crate::geometry::NeckZone::Outer) => {}
            _ => continue,
        }
        let s = size.eval(p);
        if p[0] * p[0] + p[1] * p[1] > (rc - 0.4 * s) * (rc - 0.4 * s) {
            continue;
        }
        if p[0] < 1e-12 || p[1] < 1e-12 {
            continue;
        }
        if p[0] < r && p[1] < geom.epsilon / 2.0 + geom.h(p[0]) + 0.3 * s {
            continue; // keep clear of the strip interior
        }
        if disk.too_close(p, 0.72 * s) {
            continue;
        }
        disk.push(p, 0.72 * s);
        interior.push(p);
    }

    // ---- constrained Delaunay + smoothing/refinement rounds ----------------
    let loop_keys: std::collections::BTreeSet<(u64, u64)> = loop_poly
        .iter()
        .map(|p| ((p[0] + 0.0).to_bits(), (p[1] + 0.0).to_bits()))
        .collect();

    let triangulate = |movable: &[[f64; 2]]| -> Result<(Vec<[f64; 2]>, Vec<[usize; 3]>)> {
        let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> =
            ConstrainedDelaunayTriangulation::new();
        let mut handles = Vec::with_capacity(nl);
        for (p, _) in &loop_pts {
            handles.push(
                cdt.insert(Point2::new(p[0], p[1]))
                    .map_err(|e| Error::Mesh(format!("cdt insert failed: {e:?}")))?,
            );
        }
        for i in 0..nl {
            let (a, b) = (handles[i], handles[(i + 1) % nl]);
            if a != b {
                cdt.add_constraint(a, b);
            }
        }
        for p in movable {
            cdt.insert(Point2::new(p[0], p[1]))
                .map_err(|e| Error::Mesh(format!("cdt insert failed: {e:?}")))?;
        }
        let mut qverts: Vec<[f64; 2]> = Vec::new();
        let mut qmap: BTreeMap<(u64, u64), usize> = BTreeMap::new();
        let mut qtris: Vec<[usize; 3]> = Vec::new();
        for face in cdt.inner_faces() {
            let vs = face.positions();
            let bx = (vs[0].x + vs[1].x + vs[2].x) / 3.0;
            let by = (vs[0].y + vs[1].y + vs[2].y) / 3.0;
            if !point_in_polygon([bx, by], &loop_poly) {
                continue;
            }
            let mut ids = [0usize; 3];
            for (k, v) in vs.iter().enumerate() {
                let key = ((v.x + 0.0).to_bits(), (v.y + 0.0).to_bits());
                let id = *qmap.entry(key).or_insert_with(|| {
                    qverts.push([v.x, v.y]);
                    qverts.len() - 1
                });
                ids[k] = id;
            }
            let p = [qverts[ids[0]], qverts[ids[1]], qverts[ids[2]]];
            if tri_area(p[0], p[1], p[2]) < 0.0 {
                ids.swap(1, 2);
            }
            qtris.push(ids);
        }
        Ok((qverts, qtris))
    };

    let mut movable = interior;
    let mut quad: Option<(Vec<[f64; 2]>, Vec<[usize; 3]>)> = None;
    for round in 0..16 {
        let (qverts, qtris) = triangulate(&movable)?;
        let min_q = qtris
            .iter()
            .map(|t| tri_quality(qverts[t[0]], qverts[t[1]], qverts[t[2]]))
            .fold(f64::INFINITY, f64::min);
        // two smoothing rounds always run; they even out the point spacing
        if (round >= 2 && min_q >= 0.28) || round == 15 {
            quad = Some((qverts, qtris));
            break;
        }
        // circumcenters of poor triangles become new points when they fit
        let mut fresh: Vec<[f64; 2]> = Vec::new();
        let mut pointset = Disk::new(rc + 1.0, 0.7 * params.h_min.max(1e-4));
        for p in &loop_poly {
            pointset.push(*p, 0.0);
        }
        for p in &movable {
            pointset.push(*p, 0.0);
        }
        for t in &qtris {
            let p = [qverts[t[0]], qverts[t[1]], qverts[t[2]]];
            if tri_quality(p[0], p[1], p[2]) >= 0.25 {
                continue;
            }
            let cc = circumcenter(p[0], p[1], p[2]);
            if !point_in_polygon(cc, &loop_poly) {
                continue;
            }
            let s = size.eval(cc);
            if pointset.too_close(cc, 0.35 * s) {
                continue;
            }
            pointset.push(cc, 0.35 * s);
            fresh.push(cc);
        }
        // Laplacian smoothing of interior vertices, guarded by the polygon
        let mut acc = vec![[0.0f64; 2]; qverts.len()];
        let mut cnt = vec![0usize; qverts.len()];
        for t in &qtris {
            for k in 0..3 {
                for l in 0..3 {
                    if l != k {
                        acc[t[k]][0] += qverts[t[l]][0];
                        acc[t[k]][1] += qverts[t[l]][1];
                        cnt[t[k]] += 1;
                    }
                }
            }
        }
        let mut next: Vec<[f64; 2]> = Vec::with_capacity(movable.len() + fresh.len());
        for (i, v) in qverts.iter().enumerate() {
            let key = ((v[0] + 0.0).to_bits(), (v[1] + 0.0).to_bits());
            if loop_keys.contains(&key) {
                continue;
            }
            let mut p = *v;
            if cnt[i] > 0 {
                let cand = [acc[i][0] / cnt[i] as f64, acc[i][1] / cnt[i] as f64];
                if point_in_polygon(cand, &loop_poly) {
                    p = cand;
                }
            }
            next.push(p);
        }
        next.extend(fresh);
        movable = next;
    }
    let (qverts, qtris) =
        quad.ok_or_else(|| Error::Mesh("quadrant quality refinement did not settle".into()))?;

    // ---- mirror the quadrant into the other three and merge ---------------
    let mut global: BTreeMap<(u64, u64), usize> = BTreeMap::new();
    for (i, v) in vertices.iter().enumerate() {
        global.insert(((v[0] + 0.0).to_bits(), (v[1] + 0.0).to_bits()), i);
    }
    for (sx, sy) in [(1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)] {
        let flip = (sx < 0.0) ^ (sy < 0.0);
        let map_tag = |t: BoundaryTag| -> BoundaryTag {
            if sy < 0.0 {
                match t {
                    BoundaryTag::D1 => BoundaryTag::D2,
                    BoundaryTag::D2 => BoundaryTag::D1,
                    BoundaryTag::Container => BoundaryTag::Container,
                }
            } else {
                t
            }
        };
        let mut local: Vec<usize> = Vec::with_capacity(qverts.len());
        for v in &qverts {
            let p = [sx * v[0] + 0.0, sy * v[1] + 0.0];
            let key = (p[0].to_bits(), p[1].to_bits());
            let id = *global.entry(key).or_insert_with(|| {
                vertices.push(p);
                vertex_tags.push(None);
                vertices.len() - 1
            });
            local.push(id);
        }
        for t in &qtris {
            let mut ids = [local[t[0]], local[t[1]], local[t[2]]];
            if flip {
                ids.swap(1, 2);
            }
            triangles.push(ids);
        }
        // vertex and edge tags carried over from the loop
        for i in 0..nl {
            let a = loop_pts[i].0;
            if let Some(t) = loop_pts[i].1 {
                let p = [sx * a[0] + 0.0, sy * a[1] + 0.0];
                if let Some(&id) = global.get(&(p[0].to_bits(), p[1].to_bits())) {
                    vertex_tags[id] = Some(map_tag(t));
                }
            }
            if let Some(tag) = loop_edge_tag[i] {
                let b = loop_pts[(i + 1) % nl].0;
                let pa = [sx * a[0] + 0.0, sy * a[1] + 0.0];
                let pb = [sx * b[0] + 0.0, sy * b[1] + 0.0];
                if let (Some(&ia), Some(&ib)) = (
                    global.get(&(pa[0].to_bits(), pa[1].to_bits())),
                    global.get(&(pb[0].to_bits(), pb[1].to_bits())),
                ) {
                    boundary_edges.insert([ia.min(ib), ia.max(ib)], map_tag(tag));
                }
            }
        }
    }

    let mesh = Mesh::finish(
        vertices,
        triangles,
        vertex_tags,
        boundary_edges,
        Some(strip),
        params.h_min,
        params.h_max,
    )?;
    mesh.audit(geom)?;
    Ok(mesh)
}

/// Structured spiderweb mesh of a disk, used by the manufactured-solution
/// validation. `rings` >= 1.
pub fn disk_mesh(radius: f64, rings: usize) -> Mesh {
    let mut vertices = vec![[0.0, 0.0]];
    let mut vertex_tags = vec![None];
    let mut ring_start = vec![0usize; rings + 1];
    for k in 1..=rings {
        ring_start[k] = vertices.len();
        let m = 6 * k;
        let rk = radius * k as f64 / rings as f64;
        for j in 0..m {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
            vertices.push([rk * phi.cos(), rk * phi.sin()]);
            vertex_tags.push(if k == rings { Some(BoundaryTag::Container) } else { None });
        }
    }
    let mut triangles = Vec::new();
    let mut boundary_edges = BTreeMap::new();
    for j in 0..6 {
        triangles.push([0, 1 + j, 1 + (j + 1) % 6]);
    }
    for k in 2..=rings {
        let m_out = 6 * k;
        let m_in = 6 * (k - 1);
        let out0 = ring_start[k];
        let in0 = ring_start[k - 1];
        let mut jo = 0usize;
        let mut ji = 0usize;
        while jo < m_out || ji < m_in {
            let po = out0 + jo % m_out;
            let po1 = out0 + (jo + 1) % m_out;
            let pi = in0 + ji % m_in;
            let pi1 = in0 + (ji + 1) % m_in;
            let advance_outer = if jo >= m_out {
                false
            } else if ji >= m_in {
                true
            } else {
                (jo + 1) * m_in <= (ji + 1) * m_out
            };
            if advance_outer {
                triangles.push([pi, po, po1]);
                jo += 1;
            } else {
                triangles.push([po, pi1, pi]);
                ji += 1;
            }
        }
    }
    // boundary edges on the outermost ring
    let m = 6 * rings;
    let b0 = ring_start[rings];
    for j in 0..m {
        let a = b0 + j;
        let b = b0 + (j + 1) % m;
        boundary_edges.insert([a.min(b), a.max(b)], BoundaryTag::Container);
    }
    Mesh::finish(
        vertices,
        triangles,
        vertex_tags,
        boundary_edges,
        None,
        radius / rings as f64,
        radius / rings as f64,
    )
    .expect("disk mesh construction")
}

/// Red-refines every triangle into four; new boundary vertices are projected
/// onto the circle of `radius`.
pub fn refine_disk(mesh: &Mesh, radius: f64) -> Mesh {
    let mut vertices = mesh.vertices.clone();
    let mut vertex_tags = mesh.vertex_tags.clone();
    let mut midpoint: BTreeMap<[usize; 2], usize> = BTreeMap::new();
    let mut boundary_edges = BTreeMap::new();
    let mut triangles = Vec::new();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let is_b = |k: usize| mesh.edge_tags[mesh.tri_edges[t][k]].is_some();
        let mut mids = [0usize; 3];
        for k in 0..3 {
            let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
            let key = [a.min(b), a.max(b)];
            let on_boundary = is_b(k);
            mids[k] = *midpoint.entry(key).or_insert_with(|| {
                let pa = vertices[a];
                let pb = vertices[b];
                let mut p = [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0];
                if on_boundary {
                    let nrm = p[0].hypot(p[1]);
                    p = [p[0] / nrm * radius, p[1] / nrm * radius];
                }
                vertices.push(p);
                vertex_tags.push(if on_boundary { Some(BoundaryTag::Container) } else { None });
                vertices.len() - 1
            });
            if on_boundary {
                let tag = mesh.edge_tags[mesh.tri_edges[t][k]].unwrap();
                let m = mids[k];
                boundary_edges.insert([a.min(m), a.max(m)], tag);
                boundary_edges.insert([b.min(m), b.max(m)], tag);
            }
        }
        triangles.push([tri[0], mids[2], mids[1]]);
        triangles.push([tri[1], mids[0], mids[2]]);
        triangles.push([tri[2], mids[1], mids[0]]);
        triangles.push([mids[0], mids[1], mids[2]]);
    }
    Mesh::finish(
        vertices,
        triangles,
        vertex_tags,
        boundary_edges,
        None,
        mesh.h_min / 2.0,
        mesh.h_max / 2.0,
    )
    .expect("refined disk mesh")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{NeckGeometry, Profile};

    fn geom(eps: f64, profile: Profile) -> NeckGeometry {
        NeckGeometry::new(eps, profile, 1.0, 1.0, 4.0, 0.5, 1.0).unwrap()
    }

    #[test]
    fn disk_mesh_is_valid() {
        let m = disk_mesh(1.0, 4);
        assert!(m.min_quality() > 0.4, "quality {}", m.min_quality());
        let total: f64 = (0..m.triangles.len()).map(|t| m.tri_area(t)).sum();
        assert!((total - std::f64::consts::PI).abs() < 0.2, "area {total}");
        let refined = refine_disk(&m, 1.0);
        let total2: f64 = (0..refined.triangles.len()).map(|t| refined.tri_area(t)).sum();
        assert!((total2 - std::f64::consts::PI).abs() < 0.06, "area {total2}");
        assert!(refined.min_quality() > 0.4);
    }

    #[test]
    fn neck_mesh_circle_smoke() {
        let g = geom(0.04, Profile::Circle);
        let m = build_mesh(&g, MeshParams::new(0.005, 0.3)).unwrap();
        assert!(m.min_quality() >= 0.2, "quality {}", m.min_quality());
        for i in 0..64 {
            let x1 = (i as f64 + 0.5) / 64.0 - 0.5;
            assert!(m.gap_layer_count(&g, x1) >= 4);
        }
        let total: f64 = (0..m.triangles.len()).map(|t| m.tri_area(t)).sum();
        let expect = std::f64::consts::PI * (16.0 - 2.0);
        assert!((total - expect).abs() < 0.15, "area {total} vs {expect}");
    }

    #[test]
    fn neck_mesh_quadratic_smoke() {
        let g = geom(0.04, Profile::Quadratic);
        let m = build_mesh(&g, MeshParams::new(0.005, 0.3)).unwrap();
        assert!(m.min_quality() >= 0.2, "quality {}", m.min_quality());
        assert!(m.audit(&g).is_ok());
    }

    #[test]
    fn size_grading_is_smooth() {
        let g = geom(0.04, Profile::Circle);
        let m = build_mesh(&g, MeshParams::new(0.005, 0.3)).unwrap();
        // the size field itself grades below 1.5 between neighbors; the
        // realized longest-edge ratio adds the deliberate 4:6 strip
        // anisotropy, frozen here as a regression band
        let sf = SizeField::new(&g, 0.005, 0.3, 6);
        let mut owner: Vec<Option<usize>> = vec![None; m.edges.len()];
        let mut worst_field = 1.0f64;
        for (t, te) in m.tri_edges.iter().enumerate() {
            for &e in te {
                match owner[e] {
                    None => owner[e] = Some(t),
                    Some(s) => {
                        let r = sf.eval(m.tri_barycenter(t)) / sf.eval(m.tri_barycenter(s));
                        worst_field = worst_field.max(r.max(1.0 / r));
                    }
                }
            }
        }
        assert!(worst_field <= 1.5, "size-field neighbor ratio {worst_field}");
        let edge_ratio = m.max_neighbor_size_ratio();
        assert!(edge_ratio <= 2.3, "edge-length neighbor ratio {edge_ratio}");
    }

    #[test]
    fn rejects_oversized_h_min() {
        let g = geom(0.04, Profile::Circle);
        assert!(build_mesh(&g, MeshParams::new(0.02, 0.3)).is_err());
    }

    #[test]
    fn mesh_is_exactly_symmetric() {
        let g = geom(0.02, Profile::Circle);
        let m = build_mesh(&g, MeshParams::new(0.004, 0.3)).unwrap();
        use std::collections::BTreeSet;
        let keys: BTreeSet<(u64, u64)> =
            m.vertices.iter().map(|v| ((v[0] + 0.0).to_bits(), (v[1] + 0.0).to_bits())).collect();
        for v in &m.vertices {
            for (sx, sy) in [(-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)] {
                let p = [sx * v[0] + 0.0, sy * v[1] + 0.0];
                assert!(
                    keys.contains(&(p[0].to_bits(), p[1].to_bits())),
                    "mirror of {v:?} missing"
                );
            }
        }
    }

    #[test]
    fn vertex_count_regression_band() {
        let g1 = geom(0.04, Profile::Circle);
        let m1 = build_mesh(&g1, MeshParams::new(0.005, 0.3)).unwrap();
        let g2 = geom(0.01, Profile::Circle);
        let m2 = build_mesh(&g2, MeshParams::new(0.002, 0.3)).unwrap();
        let ratio = m2.vertices.len() as f64 / m1.vertices.len() as f64;
        assert!(ratio >= 1.5 && ratio <= 8.0, "vertex growth ratio {ratio}");
    }

    #[test]
    fn locate_finds_points() {
        let g = geom(0.04, Profile::Circle);
        let m = build_mesh(&g, MeshParams::new(0.005, 0.3)).unwrap();
        for p in [[0.0, 0.0], [0.3, 0.01], [2.0, 1.0], [-1.5, -2.0], [0.0, 3.5]] {
            let (t, w) = m.locate(p).unwrap_or_else(|| panic!("locate failed at {p:?}"));
            let pts = m.tri_points(t);
            let x = [
                w[0] * pts[0][0] + w[1] * pts[1][0] + w[2] * pts[2][0],
                w[0] * pts[0][1] + w[1] * pts[1][1] + w[2] * pts[2][1],
            ];
            assert!((x[0] - p[0]).abs() + (x[1] - p[1]).abs() < 1e-9);
        }
        assert!(m.locate([0.0, 1.0]).is_none()); // inside the upper inclusion
    }

    #[test]
    fn export_text_has_all_entities() {
        let m = disk_mesh(1.0, 2);
        let mut buf = Vec::new();
        m.export_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let nv = text.lines().filter(|l| l.starts_with("v ")).count();
        let nt = text.lines().filter(|l| l.starts_with("t ")).count();
        assert_eq!(nv, m.vertices.len());
        assert_eq!(nt, m.triangles.len());
    }
}
