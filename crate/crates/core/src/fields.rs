//! Closed-form singular velocity/pressure pairs for the quadratic neck.
//!
//! For each inclusion i and rigid mode alpha there is an auxiliary pair
//! (v, pbar) that reproduces the Dirichlet trace of the mode on the
//! inclusion, vanishes on the opposite inclusion, is divergence free in the
//! neck, and captures the near-contact singularity of the corresponding
//! Stokes subproblem. Everything is evaluated through second-order jets, so
//! gradients, Hessians and Stokes residuals are analytic.
//!
//! The exact formulas hold for the quadratic profile with kappa2 = 1; other
//! kappa2 values are handled by the stretched-coordinate wrapper
//! `x1 -> sqrt(kappa2) x1` (traces of the translational modes stay exact,
//! divergence-freeness degrades with |kappa2 - 1|).

use crate::geometry::{Inclusion, NeckGeometry, Profile};
use crate::jet::{smoothstep7, Jet};
use crate::sampling;
use crate::{Error, Result};
use serde::Serialize;

/// Rigid displacement modes psi_1 = (1,0), psi_2 = (0,1), psi_3 = (x2,-x1).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RigidMode {
    TranslateX,
    TranslateY,
    Rotate,
}

impl RigidMode {
    pub const ALL: [RigidMode; 3] = [RigidMode::TranslateX, RigidMode::TranslateY, RigidMode::Rotate];

    pub fn index(self) -> usize {
        match self {
            RigidMode::TranslateX => 0,
            RigidMode::TranslateY => 1,
            RigidMode::Rotate => 2,
        }
    }

    /// Velocity of the rigid mode at a point.
    pub fn velocity(self, x: [f64; 2]) -> [f64; 2] {
        match self {
            RigidMode::TranslateX => [1.0, 0.0],
            RigidMode::TranslateY => [0.0, 1.0],
            RigidMode::Rotate => [x[1], -x[0]],
        }
    }
}

/// One of the six auxiliary fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FieldId {
    pub inclusion: Inclusion,
    pub mode: RigidMode,
}

impl FieldId {
    pub const ALL: [FieldId; 6] = [
        FieldId { inclusion: Inclusion::Upper, mode: RigidMode::TranslateX },
        FieldId { inclusion: Inclusion::Upper, mode: RigidMode::TranslateY },
        FieldId { inclusion: Inclusion::Upper, mode: RigidMode::Rotate },
        FieldId { inclusion: Inclusion::Lower, mode: RigidMode::TranslateX },
        FieldId { inclusion: Inclusion::Lower, mode: RigidMode::TranslateY },
        FieldId { inclusion: Inclusion::Lower, mode: RigidMode::Rotate },
    ];

    pub fn label(self) -> String {
        let i = self.inclusion.index() + 1;
        let a = self.mode.index() + 1;
        format!("v{i}^{a}")
    }
}

/// Full pointwise evaluation of one auxiliary pair.
#[derive(Clone, Copy, Debug)]
pub struct FieldEval {
    pub velocity: [f64; 2],
    pub pressure: f64,
    /// grad[c][d] = d(v_c)/d(x_d)
    pub velocity_gradient: [[f64; 2]; 2],
    /// hess[c] = [[dxx, dxy], [dxy, dyy]] of component c
    pub velocity_hessian: [[[f64; 2]; 2]; 2],
    pub pressure_gradient: [f64; 2],
    /// f = mu lap(v) - grad(pbar)
    pub residual: [f64; 2],
    pub divergence: f64,
}

impl FieldEval {
    fn from_jets(v: [Jet; 2], p: Jet, mu: f64) -> Self {
        FieldEval {
            velocity: [v[0].v, v[1].v],
            pressure: p.v,
            velocity_gradient: [[v[0].dx, v[0].dy], [v[1].dx, v[1].dy]],
            velocity_hessian: [
                [[v[0].dxx, v[0].dxy], [v[0].dxy, v[0].dyy]],
                [[v[1].dxx, v[1].dxy], [v[1].dxy, v[1].dyy]],
            ],
            pressure_gradient: [p.dx, p.dy],
            residual: [mu * v[0].laplacian() - p.dx, mu * v[1].laplacian() - p.dy],
            divergence: v[0].dx + v[1].dy,
        }
    }

    pub fn grad_norm(&self) -> f64 {
        let g = &self.velocity_gradient;
        (g[0][0] * g[0][0] + g[0][1] * g[0][1] + g[1][0] * g[1][0] + g[1][1] * g[1][1]).sqrt()
    }

    pub fn hessian_norm(&self) -> f64 {
        let mut s = 0.0;
        for c in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    s += self.velocity_hessian[c][a][b].powi(2);
                }
            }
        }
        s.sqrt()
    }

    pub fn residual_norm(&self) -> f64 {
        self.residual[0].hypot(self.residual[1])
    }
}

/// Evaluator for the six auxiliary pairs on a given geometry.
pub struct AuxFields {
    geom: NeckGeometry,
    /// kappa2 used inside the closed forms (normally the geometry's).
    field_kappa2: f64,
    /// vertical taper band, above the strip and below the inclusion cap
    w_lo: f64,
    w_hi: f64,
}

/// Width of the boundary-normal correction layer.
const CORR_WIDTH: f64 = 0.1;

impl AuxFields {
    pub fn new(geom: &NeckGeometry) -> Result<Self> {
        Self::with_kappa2(geom, geom.kappa2)
    }

    /// Builds the evaluator with an explicit kappa2 for the closed forms.
    /// A mismatch against the geometry breaks divergence-freeness and the
    /// boundary traces, which the check suite is designed to detect.
    pub fn with_kappa2(geom: &NeckGeometry, field_kappa2: f64) -> Result<Self> {
        if geom.profile != Profile::Quadratic {
            return Err(Error::Config(
                "auxiliary fields are defined for the quadratic profile only".into(),
            ));
        }
        if !(field_kappa2 > 0.0) {
            return Err(Error::Config("kappa2 must be positive".into()));
        }
        let two_r = 2.0 * geom.neck_half_width;
        let strip_top = geom.epsilon / 2.0 + geom.h(two_r);
        Ok(AuxFields {
            geom: geom.clone(),
            field_kappa2,
            w_lo: strip_top + 0.2,
            w_hi: strip_top + 0.7,
        })
    }

    pub fn geometry(&self) -> &NeckGeometry {
        &self.geom
    }

    /// Keller-type profile function `k = x2/delta` (negated for the lower
    /// inclusion). Requires x in the closed neck region Omega_{2R}.
    pub fn keller(&self, x: [f64; 2], inclusion: Inclusion) -> Result<f64> {
        let two_r = 2.0 * self.geom.neck_half_width;
        let (lo, hi) = self.geom.gap_bounds(x[0]);
        if x[0].abs() > two_r || x[1] < lo || x[1] > hi {
            return Err(Error::Domain(format!("point {x:?} outside the closed neck region")));
        }
        let k = x[1] / self.geom.delta_unchecked(x[0]);
        Ok(match inclusion {
            Inclusion::Upper => k,
            Inclusion::Lower => -k,
        })
    }

    /// Base closed forms in the kappa2 = 1 frame, valid in the neck strip.
    /// `y1`, `y2` are jets of the (possibly stretched) coordinates.
    fn base(mode: RigidMode, y1: Jet, y2: Jet, eps: f64, mu: f64) -> ([Jet; 2], Jet) {
        let delta = y1 * y1 + eps;
        let k = y2 / delta;
        let kk = k * k - 0.25;
        match mode {
            RigidMode::TranslateX => {
                let v = [k + 0.5, y1 * kk];
                let p = k * y1 * delta.recip() * (2.0 * mu);
                (v, p)
            }
            RigidMode::TranslateY => {
                let q = delta.recip() * 6.0;
                let w = y1 * y1 * delta.recip() * 2.0 - (1.0 / 3.0);
                let v = [q * y1 * kk, (k + 0.5) + q * y2 * w * kk];
                let p = delta.recip() * delta.recip() * (-3.0 * mu)
                    + delta.recip() * w * k * k * (18.0 * mu);
                (v, p)
            }
            RigidMode::Rotate => {
                let four_sq = y1 * y1 * delta.recip() * 4.0;
                let extra1 = -four_sq - y2 * k * 5.0 + 1.0;
                let extra2 = y1 * k * (-four_sq - y2 * k * 3.0 + 2.0) * 2.0;
                let v = [y2 * (k + 0.5) + extra1 * kk, -(y1 * (k + 0.5)) + extra2 * kk];
                let p = y1 * delta.recip() * delta.recip() * (2.0 * mu)
                    + y1 * delta.recip() * (-(y1 * y1 * delta.recip() * 2.0) + 1.0) * k * k * (12.0 * mu);
                (v, p)
            }
        }
    }

    /// Cutoff in x1: 1 on [0, R], 0 beyond 2R.
    fn chi(&self, x1: f64) -> Jet {
        let r = self.geom.neck_half_width;
        let a = x1.abs();
        if a <= r {
            return Jet::constant(1.0);
        }
        let ax = Jet { v: a, dx: x1.signum(), dy: 0.0, dxx: 0.0, dxy: 0.0, dyy: 0.0 };
        Jet::constant(1.0) - smoothstep7((ax - r) * (1.0 / r))
    }

    /// Vertical taper: 1 on the strip band, 0 well below the inclusion caps.
    fn vertical_taper(&self, x2: f64) -> Jet {
        let a = x2.abs();
        if a <= self.w_lo {
            return Jet::constant(1.0);
        }
        let ay = Jet { v: a, dx: 0.0, dy: x2.signum(), dxx: 0.0, dxy: 0.0, dyy: 0.0 };
        Jet::constant(1.0) - smoothstep7((ay - self.w_lo) * (1.0 / (self.w_hi - self.w_lo)))
    }

    /// Lateral taper of the boundary correction: 1 on [0, 2R], 0 beyond 2.4R.
    fn lateral_taper(&self, x1: f64) -> Jet {
        let two_r = 2.0 * self.geom.neck_half_width;
        let a = x1.abs();
        if a <= two_r {
            return Jet::constant(1.0);
        }
        let ax = Jet { v: a, dx: x1.signum(), dy: 0.0, dxx: 0.0, dxy: 0.0, dyy: 0.0 };
        Jet::constant(1.0) - smoothstep7((ax - two_r) * (1.0 / (0.2 * two_r)))
    }

    /// Bump of the vertical defect to the inclusion graph: 1 on the graph,
    /// 0 at distance CORR_WIDTH.
    fn boundary_bump(&self, inclusion: Inclusion, x1j: Jet, x2j: Jet) -> Jet {
        let k2 = self.field_kappa2;
        let graph = x1j * x1j * (0.5 * k2) + self.geom.epsilon / 2.0;
        let defect = match inclusion {
            Inclusion::Upper => graph - x2j,
            Inclusion::Lower => graph + x2j,
        };
        // |defect| through a plateau-safe composition: smoothstep7 has three
        // vanishing derivatives at 0, so the kink of |.| never surfaces
        let s = if defect.v >= 0.0 { 1.0 } else { -1.0 };
        let adefect = Jet {
            v: defect.v.abs(),
            dx: s * defect.dx,
            dy: s * defect.dy,
            dxx: s * defect.dxx,
            dxy: s * defect.dxy,
            dyy: s * defect.dyy,
        };
        Jet::constant(1.0) - smoothstep7(adefect * (1.0 / CORR_WIDTH))
    }

    fn rigid_mode_jets(mode: RigidMode, x1j: Jet, x2j: Jet) -> [Jet; 2] {
        match mode {
            RigidMode::TranslateX => [Jet::constant(1.0), Jet::constant(0.0)],
            RigidMode::TranslateY => [Jet::constant(0.0), Jet::constant(1.0)],
            RigidMode::Rotate => [x2j, -x1j],
        }
    }

    /// Evaluates the cutoff-extended auxiliary pair at a fluid point.
    pub fn eval(&self, id: FieldId, x: [f64; 2]) -> Result<FieldEval> {
        use crate::geometry::Region;
        match self.geom.classify(x) {
            Region::InsideD1 | Region::InsideD2 => {
                return Err(Error::Domain(format!("point {x:?} lies inside an inclusion")))
            }
            Region::OutsideContainer => {
                return Err(Error::Domain(format!("point {x:?} lies outside the container")))
            }
            _ => {}
        }
        Ok(self.eval_unchecked(id, x))
    }

    pub fn eval_unchecked(&self, id: FieldId, x: [f64; 2]) -> FieldEval {
        let mu = self.geom.mu;
        let s = self.field_kappa2.sqrt();
        let x1j = Jet::x(x[0]);
        let x2j = Jet::y(x[1]);
        // stretched frame seeds; for the lower inclusion evaluate the upper
        // formulas at the mirrored point and flip component signs
        let y1 = Jet { v: s * x[0], dx: s, dy: 0.0, dxx: 0.0, dxy: 0.0, dyy: 0.0 };
        let y2 = match id.inclusion {
            Inclusion::Upper => x2j,
            Inclusion::Lower => -x2j,
        };
        let (vb_raw, pb_raw) = Self::base(id.mode, y1, y2, self.geom.epsilon, mu);
        let (vb, pb) = match id.inclusion {
            Inclusion::Upper => (vb_raw, pb_raw),
            Inclusion::Lower => match id.mode {
                RigidMode::TranslateX => ([vb_raw[0], -vb_raw[1]], pb_raw),
                RigidMode::TranslateY | RigidMode::Rotate => ([-vb_raw[0], vb_raw[1]], -pb_raw),
            },
        };

        let m = self.chi(x[0]) * self.vertical_taper(x[1]);
        if m.v == 1.0 && m.dx == 0.0 && m.dy == 0.0 {
            // inside the plateau the extension machinery is inert
            return FieldEval::from_jets(vb, pb, mu);
        }
        let corr_amp = self.lateral_taper(x[0]) * self.boundary_bump(id.inclusion, x1j, x2j);
        let psi = Self::rigid_mode_jets(id.mode, x1j, x2j);
        let one_minus_m = -m + 1.0;
        let v = [
            m * vb[0] + one_minus_m * corr_amp * psi[0],
            m * vb[1] + one_minus_m * corr_amp * psi[1],
        ];
        let p = m * pb;
        FieldEval::from_jets(v, p, mu)
    }

    /// Sup over low-discrepancy samples in Omega_R of the residual weighted
    /// by its predicted envelope: delta * |f| for the translational-x and
    /// rotational modes, delta^2 |f| / (|x1| + sqrt(delta)) for the squeeze
    /// mode.
    pub fn bound_ratio(&self, id: FieldId, sample_count: usize) -> Result<f64> {
        if sample_count < 1000 {
            return Err(Error::Config("bound_ratio needs at least 1000 samples".into()));
        }
        let r = self.geom.neck_half_width;
        let mut sup = 0.0f64;
        for p in sampling::r2_rect(sample_count, -r, r, 0.0, 1.0) {
            let x1 = p[0];
            let d = self.geom.delta_unchecked(x1);
            let (lo, _) = self.geom.gap_bounds(x1);
            let x2 = lo + p[1] * d;
            let ev = self.eval_unchecked(id, [x1, x2]);
            let f = ev.residual_norm();
            let weighted = match id.mode {
                RigidMode::TranslateX | RigidMode::Rotate => f * d,
                RigidMode::TranslateY => f * d * d / (x1.abs() + d.sqrt()),
            };
            sup = sup.max(weighted);
        }
        Ok(sup)
    }

    /// Points of the inclusion graph boundary with |x1| < 2R.
    fn graph_boundary_points(&self, inclusion: Inclusion, n: usize) -> Vec<[f64; 2]> {
        let two_r = 2.0 * self.geom.neck_half_width;
        (0..n)
            .map(|i| {
                let u = sampling::r2_point(i)[0];
                let x1 = (2.0 * u - 1.0) * two_r * 0.999;
                let (lo, hi) = self.geom.gap_bounds(x1);
                match inclusion {
                    Inclusion::Upper => [x1, hi],
                    Inclusion::Lower => [x1, lo],
                }
            })
            .collect()
    }
}

/// Outcome of the field identity suite for one id.
#[derive(Clone, Debug, Serialize)]
pub struct FieldCheck {
    pub id: String,
    pub max_divergence: f64,
    pub max_boundary_defect: f64,
    pub bound_ratio: f64,
    pub identity_residuals: [f64; 2],
}

#[derive(Clone, Debug, Serialize)]
pub struct FieldsReport {
    pub checks: Vec<FieldCheck>,
    pub max_derivative_mismatch: f64,
    pub gradient_envelope_ok: bool,
    pub pass: bool,
    pub failures: Vec<String>,
}

/// Tolerances of the identity suite.
pub struct SuiteTolerances {
    pub divergence: f64,
    pub boundary: f64,
    pub identity: f64,
    pub derivative: f64,
}

impl Default for SuiteTolerances {
    fn default() -> Self {
        SuiteTolerances { divergence: 1e-8, boundary: 1e-10, identity: 1e-12, derivative: 1e-4 }
    }
}

/// Runs the full identity suite: divergence, boundary traces, the two exact
/// pressure identities, residual envelopes and the finite-difference
/// derivative cross-check.
pub fn run_field_suite(fields: &AuxFields, samples: usize) -> FieldsReport {
    let tol = SuiteTolerances::default();
    let geom = fields.geometry();
    let r = geom.neck_half_width;
    let mu = geom.mu;
    let mut checks = Vec::new();
    let mut failures = Vec::new();

    let neck_samples: Vec<[f64; 2]> = sampling::r2_rect(samples, -r, r, 0.0, 1.0)
        .map(|p| {
            let d = geom.delta_unchecked(p[0]);
            let (lo, _) = geom.gap_bounds(p[0]);
            [p[0], lo + p[1] * d]
        })
        .collect();

    for id in FieldId::ALL {
        let mut max_div = 0.0f64;
        for &x in &neck_samples {
            let ev = fields.eval_unchecked(id, x);
            let scale =
                ev.velocity_gradient[0][0].abs() + ev.velocity_gradient[1][1].abs() + 1.0;
            max_div = max_div.max(ev.divergence.abs() / scale);
        }
        if max_div > tol.divergence {
            failures.push(format!("divergence-free violated for {}: {max_div:.3e}", id.label()));
        }

        // boundary traces on both graphs
        let mut max_bdry = 0.0f64;
        for which in [Inclusion::Upper, Inclusion::Lower] {
            for x in fields.graph_boundary_points(which, samples / 10) {
                let ev = fields.eval_unchecked(id, x);
                let target = if which == id.inclusion {
                    id.mode.velocity(x)
                } else {
                    [0.0, 0.0]
                };
                let d0 = ev.velocity[0] - target[0];
                let d1 = ev.velocity[1] - target[1];
                max_bdry = max_bdry.max(d0.hypot(d1));
            }
        }
        if max_bdry > tol.boundary {
            failures.push(format!("boundary trace defect for {}: {max_bdry:.3e}", id.label()));
        }

        let bound_ratio = fields.bound_ratio(id, samples.max(1000)).unwrap();

        // the two exact identities, sampled where the raw formulas are active
        let mut ident = [0.0f64; 2];
        if id.inclusion == Inclusion::Upper {
            for &x in &neck_samples {
                let ev = fields.eval_unchecked(id, x);
                match id.mode {
                    RigidMode::TranslateX => {
                        let lhs = mu * ev.velocity_gradient[1][1] - ev.pressure;
                        let scale = (mu * ev.velocity_gradient[1][1]).abs().max(ev.pressure.abs()).max(1e-30);
                        ident[0] = ident[0].max(lhs.abs() / scale);
                    }
                    RigidMode::TranslateY => {
                        let lhs = mu * ev.velocity_hessian[1][1][1] - ev.pressure_gradient[1];
                        let scale = (mu * ev.velocity_hessian[1][1][1])
                            .abs()
                            .max(ev.pressure_gradient[1].abs())
                            .max(1e-30);
                        ident[1] = ident[1].max(lhs.abs() / scale);
                    }
                    RigidMode::Rotate => {}
                }
            }
        }
        if ident[0] > tol.identity || ident[1] > tol.identity {
            failures.push(format!(
                "pressure identity violated for {}: {:.3e}/{:.3e}",
                id.label(),
                ident[0],
                ident[1]
            ));
        }

        checks.push(FieldCheck {
            id: id.label(),
            max_divergence: max_div,
            max_boundary_defect: max_bdry,
            bound_ratio,
            identity_residuals: ident,
        });
    }

    // derivative consistency against central finite differences
    let nfd = (samples / 10).max(100);
    let mut max_mismatch = 0.0f64;
    for (n, id) in (0..nfd).zip(FieldId::ALL.iter().cycle()) {
        let p = sampling::r2_point(n);
        let x1 = (2.0 * p[0] - 1.0) * r;
        let d = geom.delta_unchecked(x1);
        let (lo, _) = geom.gap_bounds(x1);
        let x2 = lo + (0.1 + 0.8 * p[1]) * d;
        max_mismatch = max_mismatch.max(fd_mismatch(fields, *id, [x1, x2]));
    }
    if max_mismatch > tol.derivative {
        failures.push(format!("derivative consistency failure: {max_mismatch:.3e}"));
    }

    // gradient envelope of v_1^1 and the segment lower bound of v_1^2
    let mut envelope_ok = true;
    let c_env = 4.0;
    for &x in neck_samples.iter().take(2000) {
        let d = geom.delta_unchecked(x[0]);
        let g = fields
            .eval_unchecked(FieldId { inclusion: Inclusion::Upper, mode: RigidMode::TranslateX }, x)
            .grad_norm();
        if g * d > c_env || g * d < 1.0 / c_env {
            envelope_ok = false;
            failures.push(format!("gradient envelope violated at {x:?}: |grad| delta = {:.3}", g * d));
            break;
        }
    }
    for i in 0..64 {
        let x2 = (i as f64 / 63.0 - 0.5) * 0.9 * geom.epsilon;
        let g = fields
            .eval_unchecked(FieldId { inclusion: Inclusion::Upper, mode: RigidMode::TranslateY }, [0.0, x2])
            .grad_norm();
        if g * geom.epsilon < 1.0 / c_env {
            envelope_ok = false;
            failures.push(format!("squeeze-mode segment lower bound violated at x2 = {x2:.3e}"));
            break;
        }
    }

    let pass = failures.is_empty();
    FieldsReport { checks, max_derivative_mismatch: max_mismatch, gradient_envelope_ok: envelope_ok, pass, failures }
}

/// Largest relative mismatch between analytic derivatives and central finite
/// differences of the velocity, pressure and gradient at one point.
pub fn fd_mismatch(fields: &AuxFields, id: FieldId, x: [f64; 2]) -> f64 {
    let d = fields.geometry().delta_unchecked(x[0]);
    let h = 1e-6 * d.max(x[0].abs()).max(x[1].abs()).max(1e-3);
    let ev = fields.eval_unchecked(id, x);
    let east = fields.eval_unchecked(id, [x[0] + h, x[1]]);
    let west = fields.eval_unchecked(id, [x[0] - h, x[1]]);
    let north = fields.eval_unchecked(id, [x[0], x[1] + h]);
    let south = fields.eval_unchecked(id, [x[0], x[1] - h]);
    let mut worst = 0.0f64;
    let mut cmp = |analytic: f64, fd: f64, scale: f64| {
        let rel = (analytic - fd).abs() / scale.max(1e-9);
        worst = worst.max(rel);
    };
    for c in 0..2 {
        let scale = ev.grad_norm().max(1.0);
        cmp(
            ev.velocity_gradient[c][0],
            (east.velocity[c] - west.velocity[c]) / (2.0 * h),
            scale,
        );
        cmp(
            ev.velocity_gradient[c][1],
            (north.velocity[c] - south.velocity[c]) / (2.0 * h),
            scale,
        );
        let hscale = ev.hessian_norm().max(1.0 / d);
        cmp(
            ev.velocity_hessian[c][0][0],
            (east.velocity_gradient[c][0] - west.velocity_gradient[c][0]) / (2.0 * h),
            hscale,
        );
        cmp(
            ev.velocity_hessian[c][1][1],
            (north.velocity_gradient[c][1] - south.velocity_gradient[c][1]) / (2.0 * h),
            hscale,
        );
        cmp(
            ev.velocity_hessian[c][0][1],
            (north.velocity_gradient[c][0] - south.velocity_gradient[c][0]) / (2.0 * h),
            hscale,
        );
    }
    let pscale = ev.pressure_gradient[0].abs().max(ev.pressure_gradient[1].abs()).max(1.0);
    cmp(ev.pressure_gradient[0], (east.pressure - west.pressure) / (2.0 * h), pscale);
    cmp(ev.pressure_gradient[1], (north.pressure - south.pressure) / (2.0 * h), pscale);
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{NeckGeometry, Profile};

    fn quad(eps: f64) -> NeckGeometry {
        NeckGeometry::new(eps, Profile::Quadratic, 1.0, 1.0, 4.0, 0.5, 1.0).unwrap()
    }

    fn upper(mode: RigidMode) -> FieldId {
        FieldId { inclusion: Inclusion::Upper, mode }
    }

    fn lower(mode: RigidMode) -> FieldId {
        FieldId { inclusion: Inclusion::Lower, mode }
    }

    #[test]
    fn keller_examples() {
        let f = AuxFields::new(&quad(0.01)).unwrap();
        assert!((f.keller([0.1, 0.01], Inclusion::Upper).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(f.keller([0.0, 0.0], Inclusion::Upper).unwrap(), 0.0);
        assert!((f.keller([0.1, 0.01], Inclusion::Lower).unwrap() + 0.5).abs() < 1e-12);
        assert!(f.keller([1.5, 0.0], Inclusion::Upper).is_err());
    }

    #[test]
    fn translate_x_trace_and_shear_rate() {
        let f = AuxFields::new(&quad(0.01)).unwrap();
        let on_d1 = f.eval(upper(RigidMode::TranslateX), [0.1, 0.01]).unwrap();
        assert!((on_d1.velocity[0] - 1.0).abs() < 1e-14);
        assert!(on_d1.velocity[1].abs() < 1e-14);
        let mid = f.eval(upper(RigidMode::TranslateX), [0.0, 0.0]).unwrap();
        assert!((mid.velocity[0] - 0.5).abs() < 1e-14);
        assert!(mid.velocity[1].abs() < 1e-14);
        // d(v1)/dx2 = 1/delta = 100
        assert!((mid.velocity_gradient[0][1] - 100.0).abs() < 1e-9);
    }

    #[test]
    fn translate_y_trace() {
        let f = AuxFields::new(&quad(0.01)).unwrap();
        let ev = f.eval(upper(RigidMode::TranslateY), [0.0, 0.005]).unwrap();
        assert!(ev.velocity[0].abs() < 1e-14);
        assert!((ev.velocity[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn divergence_free_in_neck() {
        let f = AuxFields::new(&quad(0.01)).unwrap();
        for (id, x) in [
            (upper(RigidMode::TranslateX), [0.07, 0.002]),
            (upper(RigidMode::TranslateY), [0.1, -0.004]),
            (lower(RigidMode::Rotate), [0.0, 0.0]),
            (lower(RigidMode::TranslateX), [-0.3, 0.01]),
            (upper(RigidMode::Rotate), [0.2, -0.01]),
            (lower(RigidMode::TranslateY), [0.45, 0.0]),
        ] {
            let ev = f.eval_unchecked(id, x);
            let scale = ev.velocity_gradient[0][0].abs() + ev.velocity_gradient[1][1].abs() + 1.0;
            assert!(
                ev.divergence.abs() / scale < 1e-12,
                "{} at {x:?}: div = {}",
                id.label(),
                ev.divergence
            );
        }
    }

    #[test]
    fn residual_examples() {
        let f = AuxFields::new(&quad(0.01)).unwrap();
        // all residual terms carry a factor x2 or x1, so the origin is clean
        let at0 = f.eval_unchecked(upper(RigidMode::TranslateX), [0.0, 0.0]);
        assert!(at0.residual[0].abs() < 1e-12);
        assert!(at0.residual[1].abs() < 1e-12);
        // frozen envelope from the finite-difference oracle run
        let ev = f.eval_unchecked(upper(RigidMode::TranslateX), [0.05, 0.002]);
        let d = f.geometry().delta_unchecked(0.05);
        assert!(ev.residual_norm() * d <= 20.0 * f.geometry().mu);
        // exact value of the first residual component: -4 mu x2 (eps - 3 x1^2)/delta^3
        let expect = -4.0 * 0.002 * (0.01 - 3.0 * 0.0025) / d.powi(3);
        assert!((ev.residual[0] - expect).abs() < 1e-6 * expect.abs());
        // squeeze-mode residual vanishes in its first component on x1 = 0
        let sq = f.eval_unchecked(upper(RigidMode::TranslateY), [0.0, 0.003]);
        assert!(sq.residual[0].abs() < 1e-10);
    }

    #[test]
    fn pressure_identities_exact() {
        let f = AuxFields::new(&quad(0.02)).unwrap();
        let mu = 1.0;
        for n in 0..200 {
            let p = crate::sampling::r2_point(n);
            let x1 = (2.0 * p[0] - 1.0) * 0.95; // spans the full 2R band
            let d = f.geometry().delta_unchecked(x1);
            let x2 = (p[1] - 0.5) * d * 0.98;
            let ev1 = f.eval_unchecked(upper(RigidMode::TranslateX), [x1, x2]);
            let lhs1 = mu * ev1.velocity_gradient[1][1] - ev1.pressure;
            let s1 = ev1.pressure.abs().max(1e-30);
            assert!(lhs1.abs() / s1 < 1e-12 || lhs1.abs() < 1e-13, "alpha=1 identity at ({x1},{x2})");
            if x1.abs() < 0.5 {
                let ev2 = f.eval_unchecked(upper(RigidMode::TranslateY), [x1, x2]);
                let lhs2 = mu * ev2.velocity_hessian[1][1][1] - ev2.pressure_gradient[1];
                let s2 = ev2.pressure_gradient[1].abs().max(1e-30);
                assert!(lhs2.abs() / s2 < 1e-12, "alpha=2 identity at ({x1},{x2})");
            }
        }
    }

    #[test]
    fn mirror_fields_sum_to_mode_on_boundaries() {
        let f = AuxFields::new(&quad(0.01)).unwrap();
        for mode in RigidMode::ALL {
            for n in 0..100 {
                let x1 = (2.0 * crate::sampling::r2_point(n)[0] - 1.0) * 0.99;
                let (lo, hi) = f.geometry().gap_bounds(x1);
                for x in [[x1, hi], [x1, lo]] {
                    let a = f.eval_unchecked(upper(mode), x);
                    let b = f.eval_unchecked(lower(mode), x);
                    let psi = mode.velocity(x);
                    assert!(
                        (a.velocity[0] + b.velocity[0] - psi[0]).abs() < 1e-12
                            && (a.velocity[1] + b.velocity[1] - psi[1]).abs() < 1e-12,
                        "mode {mode:?} at {x:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn derivative_consistency_spot_checks() {
        let f = AuxFields::new(&quad(0.01)).unwrap();
        for id in FieldId::ALL {
            for x in [[0.05, 0.002], [-0.2, -0.01], [0.4, 0.03], [0.7, 0.1], [1.05, 0.3]] {
                if !f.geometry().in_fluid(x) {
                    continue;
                }
                let m = fd_mismatch(&f, id, x);
                assert!(m < 1e-4, "{} at {x:?}: mismatch {m:.3e}", id.label());
            }
        }
    }

    #[test]
    fn bound_ratios_stable_across_eps() {
        let r1 = AuxFields::new(&quad(0.01))
            .unwrap()
            .bound_ratio(upper(RigidMode::TranslateX), 10_000)
            .unwrap();
        let r2 = AuxFields::new(&quad(0.0025))
            .unwrap()
            .bound_ratio(upper(RigidMode::TranslateX), 10_000)
            .unwrap();
        assert!(r1.is_finite() && r1 > 0.0);
        let ratio = r1 / r2;
        assert!(ratio > 0.25 && ratio < 4.0, "ratio {ratio}");
        // determinism contract
        let again = AuxFields::new(&quad(0.01))
            .unwrap()
            .bound_ratio(upper(RigidMode::TranslateX), 10_000)
            .unwrap();
        assert_eq!(r1, again);
    }

    #[test]
    fn suite_passes_on_defaults_and_catches_tampering() {
        let geom = quad(0.01);
        let good = run_field_suite(&AuxFields::new(&geom).unwrap(), 2000);
        assert!(good.pass, "failures: {:?}", good.failures);
        let bad = run_field_suite(&AuxFields::with_kappa2(&geom, 1.7).unwrap(), 2000);
        assert!(!bad.pass);
        assert!(bad.failures.iter().any(|f| f.contains("divergence")));
    }

    #[test]
    fn rejects_circle_profile_and_inclusion_interior() {
        let circ = NeckGeometry::new(0.01, Profile::Circle, 1.0, 1.0, 4.0, 0.5, 1.0).unwrap();
        assert!(AuxFields::new(&circ).is_err());
        let f = AuxFields::new(&quad(0.01)).unwrap();
        assert!(f.eval(upper(RigidMode::TranslateX), [0.0, 0.5]).is_err());
    }
}
