//! Mixed finite-element Stokes solver.
//!
//! Velocity lives in the continuous second-order space (vertex plus edge
//! nodes), pressure in the continuous first-order space; the pair is inf-sup
//! stable. The pressure nullspace is pinned by a single scalar multiplier
//! enforcing zero mean, and the resulting symmetric indefinite sparse system
//! is solved by a direct LU factorization with one step of iterative
//! refinement. A factorized system can be reused across right-hand sides,
//! which is how the seven decomposition subproblems share one matrix.

use crate::mesh::{BoundaryTag, Mesh};
use crate::{Error, Result};
use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use std::sync::Arc;

/// Degree-5 quadrature on the reference triangle: (l0, l1, l2, weight),
/// weights summing to one.
const QUAD7: [[f64; 4]; 7] = [
    [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.225],
    [0.059715871789770, 0.470142064105115, 0.470142064105115, 0.132394152788506],
    [0.470142064105115, 0.059715871789770, 0.470142064105115, 0.132394152788506],
    [0.470142064105115, 0.470142064105115, 0.059715871789770, 0.132394152788506],
    [0.797426985353087, 0.101286507323456, 0.101286507323456, 0.125939180544827],
    [0.101286507323456, 0.797426985353087, 0.101286507323456, 0.125939180544827],
    [0.101286507323456, 0.101286507323456, 0.797426985353087, 0.125939180544827],
];

/// P2 shape values at barycentric coordinates; nodes 0-2 vertices, 3-5 the
/// edge nodes opposite each vertex.
fn p2_values(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[1] * l[2],
        4.0 * l[0] * l[2],
        4.0 * l[0] * l[1],
    ]
}

/// P2 shape gradients given the constant barycentric gradients of a triangle.
fn p2_gradients(l: [f64; 3], gl: [[f64; 2]; 3]) -> [[f64; 2]; 6] {
    let mut g = [[0.0; 2]; 6];
    for i in 0..3 {
        for d in 0..2 {
            g[i][d] = (4.0 * l[i] - 1.0) * gl[i][d];
        }
    }
    for k in 0..3 {
        let (a, b) = ((k + 1) % 3, (k + 2) % 3);
        for d in 0..2 {
            g[3 + k][d] = 4.0 * (l[a] * gl[b][d] + l[b] * gl[a][d]);
        }
    }
    g
}

/// Constant gradients of the barycentric coordinates of triangle `p`.
fn bary_gradients(p: [[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let two_a = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]);
    let gl = [
        [(p[1][1] - p[2][1]) / two_a, (p[2][0] - p[1][0]) / two_a],
        [(p[2][1] - p[0][1]) / two_a, (p[0][0] - p[2][0]) / two_a],
        [(p[0][1] - p[1][1]) / two_a, (p[1][0] - p[0][0]) / two_a],
    ];
    (gl, 0.5 * two_a)
}

type VelFn = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Sync + Send>;

/// Dirichlet data on the three boundary parts plus an optional body force
/// (the body force exists for manufactured-solution validation only).
#[derive(Clone)]
pub struct BoundaryData {
    pub on_d1: VelFn,
    pub on_d2: VelFn,
    pub on_container: VelFn,
    pub body_force: Option<VelFn>,
    pub compatibility: CompatPolicy,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CompatPolicy {
    /// Reject data whose boundary flux defect exceeds the tolerance
    /// (relative to the boundary velocity scale).
    Strict(f64),
    /// Accept; the zero-mean multiplier absorbs the defect.
    Accept,
}

pub fn zero_velocity() -> VelFn {
    Arc::new(|_| [0.0, 0.0])
}

impl BoundaryData {
    pub fn zero() -> BoundaryData {
        BoundaryData {
            on_d1: zero_velocity(),
            on_d2: zero_velocity(),
            on_container: zero_velocity(),
            body_force: None,
            compatibility: CompatPolicy::Strict(1e-10),
        }
    }

    pub fn with_d1(mut self, f: VelFn) -> Self {
        self.on_d1 = f;
        self
    }

    pub fn with_d2(mut self, f: VelFn) -> Self {
        self.on_d2 = f;
        self
    }

    pub fn with_container(mut self, f: VelFn) -> Self {
        self.on_container = f;
        self
    }

    fn eval(&self, tag: BoundaryTag, x: [f64; 2]) -> [f64; 2] {
        match tag {
            BoundaryTag::D1 => (self.on_d1)(x),
            BoundaryTag::D2 => (self.on_d2)(x),
            BoundaryTag::Container => (self.on_container)(x),
        }
    }
}

/// Discrete velocity/pressure field on a mesh.
#[derive(Clone)]
pub struct MixedField {
    pub mesh: Arc<Mesh>,
    pub mu: f64,
    /// Interleaved (ux, uy) per velocity node: vertices then edges.
    pub velocity: Vec<f64>,
    /// Vertex pressures, zero mean.
    pub pressure: Vec<f64>,
    /// Mean-constraint multiplier; absorbs any boundary flux defect.
    pub lambda: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct PointValues {
    pub velocity: [f64; 2],
    pub velocity_gradient: [[f64; 2]; 2],
    pub pressure: f64,
}

impl MixedField {
    fn vel_node_count(mesh: &Mesh) -> usize {
        mesh.vertices.len() + mesh.edges.len()
    }

    /// Coordinates of velocity node `n`.
    pub fn node_position(mesh: &Mesh, n: usize) -> [f64; 2] {
        let nv = mesh.vertices.len();
        if n < nv {
            mesh.vertices[n]
        } else {
            let e = mesh.edges[n - nv];
            let (a, b) = (mesh.vertices[e[0]], mesh.vertices[e[1]]);
            [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]
        }
    }

    /// Boundary tag of a velocity node, if constrained.
    pub fn node_tag(mesh: &Mesh, n: usize) -> Option<BoundaryTag> {
        let nv = mesh.vertices.len();
        if n < nv {
            mesh.vertex_tags[n]
        } else {
            mesh.edge_tags[n - nv]
        }
    }

    fn local_nodes(mesh: &Mesh, t: usize) -> [usize; 6] {
        let nv = mesh.vertices.len();
        let tri = mesh.triangles[t];
        let te = mesh.tri_edges[t];
        [tri[0], tri[1], tri[2], nv + te[0], nv + te[1], nv + te[2]]
    }

    /// Evaluates velocity, raw gradient and pressure inside the located
    /// element.
    pub fn evaluate(&self, x: [f64; 2]) -> Result<PointValues> {
        let (t, l) = self
            .mesh
            .locate(x)
            .ok_or_else(|| Error::Domain(format!("point {x:?} outside the mesh")))?;
        Ok(self.evaluate_in(t, l))
    }

    pub fn evaluate_in(&self, t: usize, l: [f64; 3]) -> PointValues {
        let mesh = &self.mesh;
        let p = mesh.tri_points(t);
        let (gl, _) = bary_gradients(p);
        let vals = p2_values(l);
        let grads = p2_gradients(l, gl);
        let nodes = Self::local_nodes(mesh, t);
        let mut velocity = [0.0; 2];
        let mut grad = [[0.0; 2]; 2];
        for (a, &n) in nodes.iter().enumerate() {
            for c in 0..2 {
                let u = self.velocity[2 * n + c];
                velocity[c] += u * vals[a];
                grad[c][0] += u * grads[a][0];
                grad[c][1] += u * grads[a][1];
            }
        }
        let tri = mesh.triangles[t];
        let pressure = (0..3).map(|i| self.pressure[tri[i]] * l[i]).sum();
        PointValues { velocity, velocity_gradient: grad, pressure }
    }

    /// Cauchy stress sigma = 2 mu e(u) - (p - offset) I.
    pub fn stress(&self, x: [f64; 2], pressure_offset: f64) -> Result<[[f64; 2]; 2]> {
        let v = self.evaluate(x)?;
        Ok(stress_from_point(&v, self.mu, pressure_offset))
    }

    /// Max |velocity| over all nodes.
    pub fn max_velocity(&self) -> f64 {
        self.velocity
            .chunks(2)
            .map(|u| u[0].hypot(u[1]))
            .fold(0.0, f64::max)
    }

    /// Max over pressure test functions of |integral q div(u)| / |u|_h1.
    pub fn weak_divergence_residual(&self) -> f64 {
        let mesh = &self.mesh;
        let mut b = vec![0.0f64; mesh.vertices.len()];
        let mut unorm = 0.0f64;
        for t in 0..mesh.triangles.len() {
            let p = mesh.tri_points(t);
            let (gl, area) = bary_gradients(p);
            let nodes = Self::local_nodes(mesh, t);
            let tri = mesh.triangles[t];
            for q in QUAD7 {
                let l = [q[0], q[1], q[2]];
                let w = q[3] * area;
                let grads = p2_gradients(l, gl);
                let mut divu = 0.0;
                let mut g2 = 0.0;
                for (a, &n) in nodes.iter().enumerate() {
                    divu += self.velocity[2 * n] * grads[a][0] + self.velocity[2 * n + 1] * grads[a][1];
                    for c in 0..2 {
                        let u = self.velocity[2 * n + c];
                        g2 += (u * grads[a][0]).powi(2) + (u * grads[a][1]).powi(2);
                    }
                }
                for i in 0..3 {
                    b[tri[i]] += w * l[i] * divu;
                }
                unorm += w * g2;
            }
        }
        let bmax = b.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        bmax / unorm.sqrt().max(1e-300)
    }

    /// Mean of the pressure over the whole domain (should be ~0).
    pub fn pressure_mean(&self) -> f64 {
        let mesh = &self.mesh;
        let mut num = 0.0;
        let mut den = 0.0;
        for t in 0..mesh.triangles.len() {
            let area = mesh.tri_area(t);
            let tri = mesh.triangles[t];
            num += area * (self.pressure[tri[0]] + self.pressure[tri[1]] + self.pressure[tri[2]]) / 3.0;
            den += area;
        }
        num / den
    }
}

pub fn stress_from_point(v: &PointValues, mu: f64, pressure_offset: f64) -> [[f64; 2]; 2] {
    let g = v.velocity_gradient;
    let e = [[g[0][0], 0.5 * (g[0][1] + g[1][0])], [0.5 * (g[0][1] + g[1][0]), g[1][1]]];
    let p = v.pressure - pressure_offset;
    [[2.0 * mu * e[0][0] - p, 2.0 * mu * e[0][1]], [2.0 * mu * e[1][0], 2.0 * mu * e[1][1] - p]]
}

pub fn frobenius(m: [[f64; 2]; 2]) -> f64 {
    (m[0][0] * m[0][0] + m[0][1] * m[0][1] + m[1][0] * m[1][0] + m[1][1] * m[1][1]).sqrt()
}

/// Assembled and factorized Stokes operator for one mesh; reusable across
/// right-hand sides.
pub struct StokesSystem {
    mesh: Arc<Mesh>,
    mu: f64,
    ndof: usize,
    free: Vec<usize>,
    dof_to_free: Vec<Option<usize>>,
    constrained_nodes: Vec<usize>,
    kff: SparseColMat<usize, f64>,
    kfc: Vec<(usize, usize, f64)>,
    /// Symmetric equilibration of the free block (unit row/col maxima);
    /// keeps the pivot growth of the wildly graded neck elements in check.
    scale: Vec<f64>,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl StokesSystem {
    pub fn new(mesh: Arc<Mesh>, mu: f64) -> Result<StokesSystem> {
        let nv = mesh.vertices.len();
        let nnodes = MixedField::vel_node_count(&mesh);
        let ndof_v = 2 * nnodes;
        let ndof = ndof_v + nv + 1;

        let mut constrained = vec![false; ndof];
        let mut constrained_nodes = Vec::new();
        for n in 0..nnodes {
            if MixedField::node_tag(&mesh, n).is_some() {
                constrained[2 * n] = true;
                constrained[2 * n + 1] = true;
                constrained_nodes.push(n);
            }
        }

        let mut trips: Vec<(usize, usize, f64)> = Vec::new();
        for t in 0..mesh.triangles.len() {
            let p = mesh.tri_points(t);
            let (gl, area) = bary_gradients(p);
            if area <= 0.0 {
                return Err(Error::Mesh(format!("non-positive triangle {t}")));
            }
            let nodes = MixedField::local_nodes(&mesh, t);
            let tri = mesh.triangles[t];
            let mut a_loc = [[0.0f64; 12]; 12];
            let mut b_loc = [[0.0f64; 12]; 3];
            let mut m_loc = [0.0f64; 3];
            for q in QUAD7 {
                let l = [q[0], q[1], q[2]];
                let w = q[3] * area;
                let g = p2_gradients(l, gl);
                for a in 0..6 {
                    for b in 0..6 {
                        let (gax, gay) = (g[a][0], g[a][1]);
                        let (gbx, gby) = (g[b][0], g[b][1]);
                        // 2 mu e(phi_a e_i) : e(phi_b e_j)
                        a_loc[2 * a][2 * b] += w * mu * (2.0 * gax * gbx + gay * gby);
                        a_loc[2 * a][2 * b + 1] += w * mu * gay * gbx;
                        a_loc[2 * a + 1][2 * b] += w * mu * gax * gby;
                        a_loc[2 * a + 1][2 * b + 1] += w * mu * (2.0 * gay * gby + gax * gbx);
                    }
                }
                for qi in 0..3 {
                    for b in 0..6 {
                        b_loc[qi][2 * b] -= w * l[qi] * g[b][0];
                        b_loc[qi][2 * b + 1] -= w * l[qi] * g[b][1];
                    }
                    m_loc[qi] += w * l[qi];
                }
            }
            let dof = |a: usize| 2 * nodes[a / 2] + a % 2;
            for a in 0..12 {
                for b in 0..12 {
                    trips.push((dof(a), dof(b), a_loc[a][b]));
                }
            }
            for qi in 0..3 {
                let pq = ndof_v + tri[qi];
                for b in 0..12 {
                    trips.push((pq, dof(b), b_loc[qi][b]));
                    trips.push((dof(b), pq, b_loc[qi][b]));
                }
                trips.push((pq, ndof - 1, m_loc[qi]));
                trips.push((ndof - 1, pq, m_loc[qi]));
            }
        }

        // aggregate duplicates deterministically
        trips.sort_unstable_by_key(|&(r, c, _)| (c, r));
        let mut agg: Vec<(usize, usize, f64)> = Vec::with_capacity(trips.len() / 6);
        for (r, c, v) in trips {
            match agg.last_mut() {
                Some((lr, lc, lv)) if *lr == r && *lc == c => *lv += v,
                _ => agg.push((r, c, v)),
            }
        }

        let mut free = Vec::with_capacity(ndof);
        let mut dof_to_free = vec![None; ndof];
        for d in 0..ndof {
            if !constrained[d] {
                dof_to_free[d] = Some(free.len());
                free.push(d);
            }
        }
        let nfree = free.len();
        let mut ff: Vec<Triplet<usize, usize, f64>> = Vec::with_capacity(agg.len());
        let mut fc: Vec<(usize, usize, f64)> = Vec::new();
        for (r, c, v) in agg {
            match (dof_to_free[r], dof_to_free[c]) {
                (Some(rf), Some(cf)) => ff.push(Triplet::new(rf, cf, v)),
                (Some(rf), None) => fc.push((rf, c, v)),
                _ => {}
            }
        }
        let kff = SparseColMat::try_new_from_triplets(nfree, nfree, &ff)
            .map_err(|e| Error::Solver(format!("sparse assembly failed: {e:?}")))?;
        let mut rowmax = vec![0.0f64; nfree];
        for t in &ff {
            rowmax[t.row] = rowmax[t.row].max(t.val.abs());
        }
        let scale: Vec<f64> = rowmax
            .iter()
            .map(|&m| if m > 0.0 { 1.0 / m.sqrt() } else { 1.0 })
            .collect();
        let scaled: Vec<Triplet<usize, usize, f64>> = ff
            .iter()
            .map(|t| Triplet::new(t.row, t.col, t.val * scale[t.row] * scale[t.col]))
            .collect();
        let kss = SparseColMat::try_new_from_triplets(nfree, nfree, &scaled)
            .map_err(|e| Error::Solver(format!("sparse assembly failed: {e:?}")))?;
        let lu = kss
            .sp_lu()
            .map_err(|e| Error::Solver(format!("sparse LU factorization failed: {e:?}")))?;
        Ok(StokesSystem {
            mesh,
            mu,
            ndof,
            free,
            dof_to_free,
            constrained_nodes,
            kff,
            kfc: fc,
            scale,
            lu,
        })
    }

    /// Solves K x = b through the equilibrated factorization with
    /// residual-driven iterative refinement.
    fn solve_free(&self, rhs: &Mat<f64>) -> Mat<f64> {
        let nfree = self.free.len();
        let apply = |b: &Mat<f64>| -> Mat<f64> {
            let mut s = b.clone();
            for r in 0..nfree {
                s[(r, 0)] *= self.scale[r];
            }
            let mut y = self.lu.solve(&s);
            for r in 0..nfree {
                y[(r, 0)] *= self.scale[r];
            }
            y
        };
        let rhs_norm = rhs.norm_l2().max(1e-300);
        let mut x = apply(rhs);
        for _ in 0..4 {
            let resid = rhs - &self.kff * &x;
            if resid.norm_l2() <= 1e-13 * rhs_norm {
                break;
            }
            let dx = apply(&resid);
            x += dx;
        }
        x
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    /// Boundary flux of the interpolated Dirichlet data, and its scale.
    fn boundary_flux(&self, data: &BoundaryData) -> (f64, f64) {
        let mesh = &self.mesh;
        let nv = mesh.vertices.len();
        let mut owner = vec![usize::MAX; mesh.edges.len()];
        for (t, te) in mesh.tri_edges.iter().enumerate() {
            for (k, &e) in te.iter().enumerate() {
                if mesh.edge_tags[e].is_some() {
                    owner[e] = t * 3 + k;
                }
            }
        }
        let mut flux = 0.0;
        let mut scale = 0.0;
        for (e, tag) in mesh.edge_tags.iter().enumerate() {
            let Some(tag) = tag else { continue };
            let tk = owner[e];
            let (t, k) = (tk / 3, tk % 3);
            let tri = mesh.triangles[t];
            let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
            let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
            let opp = mesh.vertices[tri[k]];
            let tangent = [pb[0] - pa[0], pb[1] - pa[1]];
            let len = tangent[0].hypot(tangent[1]);
            let mut nrm = [tangent[1] / len, -tangent[0] / len];
            let mid = [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0];
            if (opp[0] - mid[0]) * nrm[0] + (opp[1] - mid[1]) * nrm[1] > 0.0 {
                nrm = [-nrm[0], -nrm[1]];
            }
            let ga = data.eval(*tag, pa);
            let gm = data.eval(*tag, MixedField::node_position(mesh, nv + e));
            let gb = data.eval(*tag, pb);
            // Simpson is exact for the quadratic trace
            let f = |g: [f64; 2]| g[0] * nrm[0] + g[1] * nrm[1];
            flux += len / 6.0 * (f(ga) + 4.0 * f(gm) + f(gb));
            scale += len / 6.0
                * (ga[0].hypot(ga[1]) + 4.0 * gm[0].hypot(gm[1]) + gb[0].hypot(gb[1]));
        }
        (flux, scale)
    }

    /// Solves one Dirichlet problem. The factorization is reused.
    pub fn solve(&self, data: &BoundaryData) -> Result<MixedField> {
        let (flux, scale) = self.boundary_flux(data);
        if let CompatPolicy::Strict(tol) = data.compatibility {
            if flux.abs() > tol * scale.max(1.0) {
                return Err(Error::Solver(format!(
                    "incompatible boundary data: flux defect {flux:.3e} (scale {scale:.3e})"
                )));
            }
        }
        let mesh = &self.mesh;
        let nnodes = MixedField::vel_node_count(mesh);
        let ndof_v = 2 * nnodes;

        // full Dirichlet vector
        let mut g = vec![0.0f64; self.ndof];
        for &n in &self.constrained_nodes {
            let tag = MixedField::node_tag(mesh, n).unwrap();
            let x = MixedField::node_position(mesh, n);
            let v = data.eval(tag, x);
            g[2 * n] = v[0];
            g[2 * n + 1] = v[1];
        }

        let nfree = self.free.len();
        let mut rhs = Mat::<f64>::zeros(nfree, 1);
        // body force
        if let Some(f) = &data.body_force {
            for t in 0..mesh.triangles.len() {
                let p = mesh.tri_points(t);
                let (_, area) = bary_gradients(p);
                let nodes = MixedField::local_nodes(mesh, t);
                for q in QUAD7 {
                    let l = [q[0], q[1], q[2]];
                    let w = q[3] * area;
                    let vals = p2_values(l);
                    let x = [
                        l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
                        l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
                    ];
                    let fv = f(x);
                    for (a, &n) in nodes.iter().enumerate() {
                        for c in 0..2 {
                            if let Some(rf) = self.dof_to_free[2 * n + c] {
                                rhs[(rf, 0)] += w * vals[a] * fv[c];
                            }
                        }
                    }
                }
            }
        }
        // eliminate constrained columns
        for &(rf, c, v) in &self.kfc {
            rhs[(rf, 0)] -= v * g[c];
        }

        let x = self.solve_free(&rhs);

        let mut full = g;
        for (rf, &d) in self.free.iter().enumerate() {
            full[d] = x[(rf, 0)];
        }
        let velocity = full[..ndof_v].to_vec();
        let pressure = full[ndof_v..ndof_v + mesh.vertices.len()].to_vec();
        let lambda = full[self.ndof - 1];
        Ok(MixedField { mesh: self.mesh.clone(), mu: self.mu, velocity, pressure, lambda })
    }
}

/// Convenience wrapper: assemble, factorize and solve a single problem.
pub fn solve_dirichlet(mesh: Arc<Mesh>, mu: f64, data: &BoundaryData) -> Result<MixedField> {
    StokesSystem::new(mesh, mu)?.solve(data)
}

/// Energy form integral 2 mu e(u1) : e(u2) over the whole mesh.
pub fn energy_inner_product(f1: &MixedField, f2: &MixedField) -> Result<f64> {
    if !Arc::ptr_eq(&f1.mesh, &f2.mesh) {
        return Err(Error::Solver("energy product requires fields on one mesh".into()));
    }
    let mesh = &f1.mesh;
    let mu = f1.mu;
    let mut total = 0.0;
    for t in 0..mesh.triangles.len() {
        let p = mesh.tri_points(t);
        let (gl, area) = bary_gradients(p);
        let nodes = MixedField::local_nodes(mesh, t);
        for q in QUAD7 {
            let l = [q[0], q[1], q[2]];
            let w = q[3] * area;
            let g = p2_gradients(l, gl);
            let mut g1 = [[0.0f64; 2]; 2];
            let mut g2 = [[0.0f64; 2]; 2];
            for (a, &n) in nodes.iter().enumerate() {
                for c in 0..2 {
                    g1[c][0] += f1.velocity[2 * n + c] * g[a][0];
                    g1[c][1] += f1.velocity[2 * n + c] * g[a][1];
                    g2[c][0] += f2.velocity[2 * n + c] * g[a][0];
                    g2[c][1] += f2.velocity[2 * n + c] * g[a][1];
                }
            }
            let e1 = [g1[0][0], 0.5 * (g1[0][1] + g1[1][0]), g1[1][1]];
            let e2 = [g2[0][0], 0.5 * (g2[0][1] + g2[1][0]), g2[1][1]];
            total += w * 2.0 * mu * (e1[0] * e2[0] + 2.0 * e1[1] * e2[1] + e1[2] * e2[2]);
        }
    }
    Ok(total)
}

/// Manufactured solution on the unit disk used for solver validation:
/// u = curl(sin(pi x) sin(pi y)), p = cos(pi x) cos(pi y).
pub mod mms {
    use super::*;
    use crate::mesh::{disk_mesh, refine_disk};
    use std::f64::consts::PI;

    pub fn velocity(x: [f64; 2]) -> [f64; 2] {
        [
            PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
            -PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
        ]
    }

    pub fn velocity_gradient(x: [f64; 2]) -> [[f64; 2]; 2] {
        let (sx, cx) = ((PI * x[0]).sin(), (PI * x[0]).cos());
        let (sy, cy) = ((PI * x[1]).sin(), (PI * x[1]).cos());
        [
            [PI * PI * cx * cy, -PI * PI * sx * sy],
            [PI * PI * sx * sy, -PI * PI * cx * cy],
        ]
    }

    pub fn pressure(x: [f64; 2]) -> f64 {
        (PI * x[0]).cos() * (PI * x[1]).cos()
    }

    /// f = -mu lap(u) + grad(p)
    pub fn body_force(mu: f64) -> impl Fn([f64; 2]) -> [f64; 2] + Sync + Send {
        move |x| {
            let u = velocity(x);
            let gp = [
                -PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
                -PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
            ];
            [2.0 * mu * PI * PI * u[0] + gp[0], 2.0 * mu * PI * PI * u[1] + gp[1]]
        }
    }

    pub struct MmsLevel {
        pub h: f64,
        pub velocity_l2: f64,
        pub velocity_h1: f64,
        pub pressure_l2: f64,
    }

    /// Solves the manufactured problem on `levels` nested disk meshes.
    pub fn convergence(mu: f64, base_rings: usize, levels: usize) -> Result<Vec<MmsLevel>> {
        let mut mesh = disk_mesh(1.0, base_rings);
        let mut out = Vec::new();
        for level in 0..levels {
            if level > 0 {
                mesh = refine_disk(&mesh, 1.0);
            }
            let m = Arc::new(mesh.clone());
            let data = BoundaryData {
                on_d1: zero_velocity(),
                on_d2: zero_velocity(),
                on_container: Arc::new(velocity),
                body_force: Some(Arc::new(body_force(mu))),
                compatibility: CompatPolicy::Accept,
            };
            let field = solve_dirichlet(m.clone(), mu, &data)?;
            // exact pressure mean over the current polygonal domain
            let mut pmean = 0.0;
            let mut atot = 0.0;
            for t in 0..m.triangles.len() {
                let p = m.tri_points(t);
                let (_, area) = bary_gradients(p);
                for q in QUAD7 {
                    let x = [
                        q[0] * p[0][0] + q[1] * p[1][0] + q[2] * p[2][0],
                        q[0] * p[0][1] + q[1] * p[1][1] + q[2] * p[2][1],
                    ];
                    pmean += q[3] * area * pressure(x);
                    atot += q[3] * area;
                }
            }
            pmean /= atot;
            let mut e_l2 = 0.0;
            let mut e_h1 = 0.0;
            let mut e_p = 0.0;
            for t in 0..m.triangles.len() {
                let p = m.tri_points(t);
                let (gl, area) = bary_gradients(p);
                let nodes = MixedField::local_nodes(&m, t);
                let tri = m.triangles[t];
                for q in QUAD7 {
                    let l = [q[0], q[1], q[2]];
                    let w = q[3] * area;
                    let x = [
                        l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
                        l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
                    ];
                    let vals = p2_values(l);
                    let grads = p2_gradients(l, gl);
                    let mut uh = [0.0; 2];
                    let mut gh = [[0.0; 2]; 2];
                    for (a, &n) in nodes.iter().enumerate() {
                        for c in 0..2 {
                            let u = field.velocity[2 * n + c];
                            uh[c] += u * vals[a];
                            gh[c][0] += u * grads[a][0];
                            gh[c][1] += u * grads[a][1];
                        }
                    }
                    let ph: f64 = (0..3).map(|i| field.pressure[tri[i]] * l[i]).sum();
                    let ue = velocity(x);
                    let ge = velocity_gradient(x);
                    let pe = pressure(x) - pmean;
                    e_l2 += w * ((uh[0] - ue[0]).powi(2) + (uh[1] - ue[1]).powi(2));
                    for c in 0..2 {
                        for d in 0..2 {
                            e_h1 += w * (gh[c][d] - ge[c][d]).powi(2);
                        }
                    }
                    e_p += w * (ph - pe).powi(2);
                }
            }
            out.push(MmsLevel {
                h: mesh.h_max,
                velocity_l2: e_l2.sqrt(),
                velocity_h1: e_h1.sqrt(),
                pressure_l2: e_p.sqrt(),
            });
        }
        Ok(out)
    }

    /// Least-squares convergence order of a error sequence under halving.
    pub fn order(errors: &[f64]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for w in errors.windows(2) {
            num += (w[0] / w[1]).ln();
            den += 2.0f64.ln();
        }
        num / den
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::RigidMode;
    use crate::geometry::{NeckGeometry, Profile};
    use crate::mesh::{build_mesh, MeshParams};

    fn neck_system(eps: f64) -> StokesSystem {
        let g = NeckGeometry::new(eps, Profile::Circle, 1.0, 1.0, 4.0, 0.5, 1.0).unwrap();
        let mesh = Arc::new(build_mesh(&g, MeshParams::new(eps / 5.0, 0.3)).unwrap());
        StokesSystem::new(mesh, g.mu).unwrap()
    }

    fn rigid_fn(mode: RigidMode) -> VelFn {
        Arc::new(move |x| mode.velocity(x))
    }

    #[test]
    fn rigid_translation_is_exact() {
        let sys = neck_system(0.04);
        let data = BoundaryData::zero()
            .with_d1(rigid_fn(RigidMode::TranslateX))
            .with_d2(rigid_fn(RigidMode::TranslateX))
            .with_container(rigid_fn(RigidMode::TranslateX));
        let f = sys.solve(&data).unwrap();
        for u in f.velocity.chunks(2) {
            assert!((u[0] - 1.0).abs() < 1e-9 && u[1].abs() < 1e-9);
        }
        let pmax = f.pressure.iter().fold(0.0f64, |m, &p| m.max(p.abs()));
        assert!(pmax < 1e-8, "pressure {pmax}");
    }

    #[test]
    fn rigid_rotation_gives_zero_stress() {
        let sys = neck_system(0.04);
        let data = BoundaryData::zero()
            .with_d1(rigid_fn(RigidMode::Rotate))
            .with_d2(rigid_fn(RigidMode::Rotate))
            .with_container(rigid_fn(RigidMode::Rotate));
        let f = sys.solve(&data).unwrap();
        for x in [[0.0, 0.0], [1.5, 1.5], [0.3, 0.02]] {
            let s = f.stress(x, 0.0).unwrap();
            assert!(frobenius(s) < 1e-7, "stress {:?} at {x:?}", s);
        }
        let e = energy_inner_product(&f, &f).unwrap();
        assert!(e.abs() < 1e-9 * 16.0, "energy {e}");
    }

    #[test]
    fn weak_divergence_and_mean_vanish() {
        let sys = neck_system(0.04);
        let data = BoundaryData::zero().with_d1(rigid_fn(RigidMode::TranslateX));
        let f = sys.solve(&data).unwrap();
        assert!(f.weak_divergence_residual() < 1e-10, "div {}", f.weak_divergence_residual());
        assert!(f.pressure_mean().abs() < 1e-9 * f.pressure.iter().fold(0.0f64, |m, &p| m.max(p.abs())));
        assert!(f.lambda.abs() < 1e-9);
    }

    #[test]
    fn incompatible_data_rejected_with_defect() {
        let sys = neck_system(0.04);
        let mut data = BoundaryData::zero().with_container(Arc::new(|x: [f64; 2]| [x[0], x[1]]));
        data.compatibility = CompatPolicy::Strict(1e-10);
        let msg = match sys.solve(&data) {
            Err(e) => format!("{e}"),
            Ok(_) => panic!("incompatible data accepted"),
        };
        assert!(msg.contains("flux defect"), "{msg}");
    }

    #[test]
    fn dirichlet_nodes_hit_exactly() {
        let sys = neck_system(0.04);
        let data = BoundaryData::zero().with_d1(rigid_fn(RigidMode::TranslateY));
        let f = sys.solve(&data).unwrap();
        let mesh = sys.mesh();
        for n in 0..MixedField::vel_node_count(mesh) {
            if let Some(tag) = MixedField::node_tag(mesh, n) {
                let expect = if tag == crate::mesh::BoundaryTag::D1 { [0.0, 1.0] } else { [0.0, 0.0] };
                assert_eq!([f.velocity[2 * n], f.velocity[2 * n + 1]], expect);
            }
        }
    }

    #[test]
    fn galerkin_orthogonality() {
        // residual of the momentum equation against a discrete test field
        // that vanishes on the boundary
        let sys = neck_system(0.04);
        let data = BoundaryData::zero().with_d1(rigid_fn(RigidMode::TranslateX));
        let f = sys.solve(&data).unwrap();
        let mesh = sys.mesh().clone();
        let mut w = MixedField {
            mesh: mesh.clone(),
            mu: f.mu,
            velocity: vec![0.0; f.velocity.len()],
            pressure: vec![0.0; f.pressure.len()],
            lambda: 0.0,
        };
        // deterministic pseudo-random interior test field
        for n in 0..MixedField::vel_node_count(&mesh) {
            if MixedField::node_tag(&mesh, n).is_none() {
                let x = MixedField::node_position(&mesh, n);
                w.velocity[2 * n] = (13.0 * x[0] + 7.0 * x[1]).sin();
                w.velocity[2 * n + 1] = (5.0 * x[0] - 11.0 * x[1]).cos();
            }
        }
        let a_uw = energy_inner_product(&f, &w).unwrap();
        // pressure term: integral p div w
        let mut p_div = 0.0;
        for t in 0..mesh.triangles.len() {
            let p = mesh.tri_points(t);
            let (gl, area) = bary_gradients(p);
            let nodes = MixedField::local_nodes(&mesh, t);
            let tri = mesh.triangles[t];
            for q in QUAD7 {
                let l = [q[0], q[1], q[2]];
                let wq = q[3] * area;
                let g = p2_gradients(l, gl);
                let mut divw = 0.0;
                for (a, &n) in nodes.iter().enumerate() {
                    divw += w.velocity[2 * n] * g[a][0] + w.velocity[2 * n + 1] * g[a][1];
                }
                let ph: f64 = (0..3).map(|i| f.pressure[tri[i]] * l[i]).sum();
                p_div += wq * ph * divw;
            }
        }
        let resid = a_uw - p_div;
        let scale = energy_inner_product(&f, &f).unwrap().sqrt()
            * energy_inner_product(&w, &w).unwrap().sqrt();
        assert!(resid.abs() <= 1e-9 * scale.max(1.0), "galerkin residual {resid:.3e} scale {scale:.3e}");
    }

    #[test]
    fn mms_convergence_orders() {
        let levels = mms::convergence(1.0, 4, 3).unwrap();
        let v: Vec<f64> = levels.iter().map(|l| l.velocity_l2).collect();
        let h1: Vec<f64> = levels.iter().map(|l| l.velocity_h1).collect();
        let p: Vec<f64> = levels.iter().map(|l| l.pressure_l2).collect();
        let (ov, oh, op) = (mms::order(&v), mms::order(&h1), mms::order(&p));
        assert!(ov >= 1.9, "velocity L2 order {ov:.3} ({v:?})");
        assert!(oh >= 0.9, "velocity H1 order {oh:.3} ({h1:?})");
        assert!(op >= 0.9, "pressure L2 order {op:.3} ({p:?})");
    }
}
