//! Two-inclusion domain geometry.
//!
//! The fluid fills a disk-shaped container minus two rigid inclusions that
//! face each other across a narrow gap of width `epsilon` at the origin. Near
//! the gap both inclusion boundaries are graphs `x2 = +-(eps/2 + h(x1))`; the
//! quadratic profile closes each graph into a full boundary curve with a
//! quintic Hermite blend into a circular cap, the circle profile is a disk.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Quadratic,
    Circle,
}

/// Which of the two inclusions. `Upper` sits at `x2 > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Inclusion {
    Upper,
    Lower,
}

impl Inclusion {
    pub fn index(self) -> usize {
        match self {
            Inclusion::Upper => 0,
            Inclusion::Lower => 1,
        }
    }

    pub fn other(self) -> Inclusion {
        match self {
            Inclusion::Upper => Inclusion::Lower,
            Inclusion::Lower => Inclusion::Upper,
        }
    }
}

/// Region membership of a point, forming a partition of the plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    InsideD1,
    InsideD2,
    /// In the gap strip between the two graphs.
    NeckFluid(NeckZone),
    OuterFluid,
    OutsideContainer,
}

/// Inner: |x1| < R, Outer: R <= |x1| < 2R.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NeckZone {
    Inner,
    Outer,
}

#[derive(Clone, Debug)]
pub struct NeckGeometry {
    pub epsilon: f64,
    pub profile: Profile,
    pub kappa2: f64,
    pub inclusion_radius: f64,
    pub container_radius: f64,
    /// Half-width R of the inner neck region; the graph description is used
    /// on |x1| <= 2R.
    pub neck_half_width: f64,
    pub mu: f64,
    /// Closing cap of the quadratic profile (unused for circles).
    quad_cap: Option<QuadCap>,
}

/// Circular cap that closes the quadratic graph, with the Hermite blend
/// connecting graph end A to cap point B. All in the epsilon = 0 frame of the
/// upper inclusion (shift by +eps/2 to get the real boundary).
#[derive(Clone, Debug)]
struct QuadCap {
    center_y: f64,
    radius: f64,
    /// Quintic blend coefficients, x(tau) and y(tau) for tau in [0,1].
    blend_x: [f64; 6],
    blend_y: [f64; 6],
}

/// Quintic with prescribed value / first / second parameter derivatives at
/// tau = 0 and tau = 1.
fn quintic_hermite(p0: f64, d0: f64, s0: f64, p1: f64, d1: f64, s1: f64) -> [f64; 6] {
    let c0 = p0;
    let c1 = d0;
    let c2 = 0.5 * s0;
    // remaining three coefficients from the tau=1 conditions
    let r0 = p1 - (c0 + c1 + c2);
    let r1 = d1 - (c1 + 2.0 * c2);
    let r2 = s1 - 2.0 * c2;
    let c3 = 10.0 * r0 - 4.0 * r1 + 0.5 * r2;
    let c4 = -15.0 * r0 + 7.0 * r1 - r2;
    let c5 = 6.0 * r0 - 3.0 * r1 + 0.5 * r2;
    [c0, c1, c2, c3, c4, c5]
}

fn poly_eval(c: &[f64; 6], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * t + ci)
}

fn poly_deriv(c: &[f64; 6], t: f64) -> f64 {
    let mut acc = 0.0;
    for i in (1..6).rev() {
        acc = acc * t + c[i] * i as f64;
    }
    acc
}

impl Default for NeckGeometry {
    fn default() -> Self {
        NeckGeometry::new(0.01, Profile::Circle, 1.0, 1.0, 4.0, 0.5, 1.0).unwrap()
    }
}

impl NeckGeometry {
    pub fn new(
        epsilon: f64,
        profile: Profile,
        kappa2: f64,
        inclusion_radius: f64,
        container_radius: f64,
        neck_half_width: f64,
        mu: f64,
    ) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(mu > 0.0) || !(kappa2 > 0.0) || !(inclusion_radius > 0.0) {
            return Err(Error::Config("mu, kappa2, inclusion_radius must be positive".into()));
        }
        if !(neck_half_width > 0.0) {
            return Err(Error::Config("neck half-width R must be positive".into()));
        }
        let quad_cap = match profile {
            Profile::Circle => {
                if 2.0 * neck_half_width > inclusion_radius {
                    return Err(Error::Config(format!(
                        "2R = {} exceeds the circle graph range r = {}",
                        2.0 * neck_half_width,
                        inclusion_radius
                    )));
                }
                None
            }
            Profile::Quadratic => Some(Self::build_quad_cap(kappa2, neck_half_width)),
        };
        let geom = NeckGeometry {
            epsilon,
            profile,
            kappa2,
            inclusion_radius,
            container_radius,
            neck_half_width,
            mu,
            quad_cap,
        };
        let top = geom.inclusion_top();
        let clearance = container_radius - (epsilon / 2.0 + top);
        if clearance < 1.0 {
            return Err(Error::Config(format!(
                "container clearance {clearance:.3} below the required 1.0"
            )));
        }
        if 2.0 * neck_half_width >= geom.inclusion_width() {
            return Err(Error::Config(
                "2R must be strictly less than the inclusion horizontal extent".into(),
            ));
        }
        Ok(geom)
    }

    fn build_quad_cap(kappa2: f64, r: f64) -> QuadCap {
        let two_r = 2.0 * r;
        // graph end A = (2R, kappa2 (2R)^2 / 2), cap circle with its rightmost
        // point B = (radius, center_y) so the horizontal extent is the cap radius
        let radius = 1.15 * two_r;
        let ax = two_r;
        let ay = 0.5 * kappa2 * two_r * two_r;
        let center_y = ay + 0.75 * two_r;
        let bx = radius;
        let by = center_y;
        let chord = ((bx - ax).powi(2) + (by - ay).powi(2)).sqrt();
        // parabola parameterised by x: r' = (1, kappa2 x), r'' = (0, kappa2)
        let ta = (1.0, kappa2 * two_r);
        let tlen = (1.0 + ta.1 * ta.1).sqrt();
        let c = chord / tlen;
        // cap parameterised by angle from the bottom: at B the tangent is
        // (0, 1) and the second derivative points to the center, (-radius, 0)
        let d = chord / radius;
        let blend_x = quintic_hermite(ax, c * ta.0, 0.0, bx, 0.0, -d * d * radius);
        let blend_y = quintic_hermite(ay, c * ta.1, c * c * kappa2, by, d * radius, 0.0);
        QuadCap { center_y, radius, blend_x, blend_y }
    }

    /// Gap profile of one inclusion; both inclusions share it.
    pub fn h(&self, x1: f64) -> f64 {
        match self.profile {
            Profile::Quadratic => 0.5 * self.kappa2 * x1 * x1,
            Profile::Circle => {
                let r = self.inclusion_radius;
                r - (r * r - x1 * x1).max(0.0).sqrt()
            }
        }
    }

    pub fn h_prime(&self, x1: f64) -> f64 {
        match self.profile {
            Profile::Quadratic => self.kappa2 * x1,
            Profile::Circle => {
                let r = self.inclusion_radius;
                x1 / (r * r - x1 * x1).max(1e-300).sqrt()
            }
        }
    }

    /// Gap width delta(x1) = eps + h1 + h2. Errors outside the graph region.
    pub fn delta(&self, x1: f64) -> Result<f64> {
        if x1.abs() > 2.0 * self.neck_half_width {
            return Err(Error::Domain(format!(
                "x1 = {x1} outside the neck region |x1| <= {}",
                2.0 * self.neck_half_width
            )));
        }
        Ok(self.delta_unchecked(x1))
    }

    pub fn delta_unchecked(&self, x1: f64) -> f64 {
        self.epsilon + 2.0 * self.h(x1)
    }

    /// Lower/upper gap bounds at abscissa x1: the fluid strip is
    /// `lower < x2 < upper`.
    pub fn gap_bounds(&self, x1: f64) -> (f64, f64) {
        let h = self.h(x1);
        (-self.epsilon / 2.0 - h, self.epsilon / 2.0 + h)
    }

    /// Top of the upper inclusion in the eps = 0 frame.
    fn inclusion_top(&self) -> f64 {
        match self.profile {
            Profile::Circle => 2.0 * self.inclusion_radius,
            Profile::Quadratic => {
                let cap = self.quad_cap.as_ref().unwrap();
                cap.center_y + cap.radius
            }
        }
    }

    /// Horizontal extent (full width) of one inclusion.
    pub fn inclusion_width(&self) -> f64 {
        match self.profile {
            Profile::Circle => 2.0 * self.inclusion_radius,
            Profile::Quadratic => {
                let cap = self.quad_cap.as_ref().unwrap();
                let mut w: f64 = cap.radius;
                for i in 0..=32 {
                    w = w.max(poly_eval(&cap.blend_x, i as f64 / 32.0));
                }
                2.0 * w
            }
        }
    }

    /// True if `x` lies inside the (closed) upper inclusion; the lower one is
    /// its mirror image under x2 -> -x2.
    fn inside_upper(&self, x: [f64; 2]) -> bool {
        let y0 = x[1] - self.epsilon / 2.0; // eps = 0 frame
        if y0 <= 0.0 {
            return false;
        }
        match self.profile {
            Profile::Circle => {
                let r = self.inclusion_radius;
                let dx = x[0];
                let dy = y0 - r;
                dx * dx + dy * dy < r * r
            }
            Profile::Quadratic => {
                let cap = self.quad_cap.as_ref().unwrap();
                let ax = x[0].abs();
                let two_r = 2.0 * self.neck_half_width;
                if ax <= two_r {
                    let below_cap = {
                        let dy2 = cap.radius * cap.radius - ax * ax;
                        y0 < cap.center_y + dy2.max(0.0).sqrt()
                    };
                    y0 > 0.5 * self.kappa2 * ax * ax && below_cap
                } else if ax >= cap.radius && y0 > cap.center_y {
                    false
                } else {
                    // between blend curve (below) and cap arc (above)
                    if y0 >= cap.center_y {
                        return ax * ax + (y0 - cap.center_y).powi(2) < cap.radius * cap.radius;
                    }
                    // invert x(tau) by bisection; x(tau) is monotone here
                    if ax >= poly_eval(&cap.blend_x, 1.0) {
                        return false;
                    }
                    let (mut lo, mut hi) = (0.0f64, 1.0f64);
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        if poly_eval(&cap.blend_x, mid) < ax {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    let ycurve = poly_eval(&cap.blend_y, 0.5 * (lo + hi));
                    y0 > ycurve
                }
            }
        }
    }

    /// Classifies a point into the disjoint region partition.
    pub fn classify(&self, x: [f64; 2]) -> Region {
        let rr = x[0] * x[0] + x[1] * x[1];
        if rr >= self.container_radius * self.container_radius {
            return Region::OutsideContainer;
        }
        if self.inside_upper(x) {
            return Region::InsideD1;
        }
        if self.inside_upper([x[0], -x[1]]) {
            return Region::InsideD2;
        }
        let ax = x[0].abs();
        if ax < 2.0 * self.neck_half_width {
            let (lo, hi) = self.gap_bounds(x[0]);
            if x[1] > lo && x[1] < hi {
                return if ax < self.neck_half_width {
                    Region::NeckFluid(NeckZone::Inner)
                } else {
                    Region::NeckFluid(NeckZone::Outer)
                };
            }
        }
        Region::OuterFluid
    }

    pub fn in_fluid(&self, x: [f64; 2]) -> bool {
        matches!(self.classify(x), Region::NeckFluid(_) | Region::OuterFluid)
    }

    /// Boundary polyline of the upper inclusion from the gate point
    /// `(R, eps/2 + h(R))` to the apex `(0, eps/2 + top)`, i.e. the quarter
    /// that lives in the first quadrant. `spacing` bounds the chord length
    /// locally via a callback evaluated at segment midpoints.
    pub fn upper_boundary_quarter(&self, spacing: &dyn Fn([f64; 2]) -> f64) -> Vec<[f64; 2]> {
        let eps2 = self.epsilon / 2.0;
        let mut pieces: Vec<Box<dyn Fn(f64) -> [f64; 2]>> = Vec::new();
        match self.profile {
            Profile::Circle => {
                let r = self.inclusion_radius;
                let cy = eps2 + r;
                let phi_gate = (self.neck_half_width / r).asin();
                pieces.push(Box::new(move |t| {
                    let phi = phi_gate + t * (std::f64::consts::PI - phi_gate);
                    [r * phi.sin(), cy - r * phi.cos()]
                }));
            }
            Profile::Quadratic => {
                let cap = self.quad_cap.as_ref().unwrap().clone();
                let r = self.neck_half_width;
                let k2 = self.kappa2;
                // graph piece from R to 2R
                pieces.push(Box::new(move |t| {
                    let x1 = r + t * r;
                    [x1, eps2 + 0.5 * k2 * x1 * x1]
                }));
                let bx = cap.blend_x;
                let by = cap.blend_y;
                pieces.push(Box::new(move |t| [poly_eval(&bx, t), eps2 + poly_eval(&by, t)]));
                let (cy, rc) = (cap.center_y, cap.radius);
                pieces.push(Box::new(move |t| {
                    // quarter arc from the rightmost cap point to the apex
                    let phi = t * std::f64::consts::FRAC_PI_2;
                    [rc * phi.cos(), eps2 + cy + rc * phi.sin()]
                }));
            }
        }
        let mut out = Vec::new();
        for (pi, piece) in pieces.iter().enumerate() {
            let mut params = vec![0.0, 1.0];
            // adaptive split until chords obey the spacing field
            let mut i = 0;
            while i + 1 < params.len() {
                let (a, b) = (params[i], params[i + 1]);
                let pa = piece(a);
                let pb = piece(b);
                let chord = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
                let mid = piece(0.5 * (a + b));
                if chord > spacing(mid).max(1e-6) && params.len() < 100_000 {
                    params.insert(i + 1, 0.5 * (a + b));
                } else {
                    i += 1;
                }
            }
            let skip = if pi == 0 { 0 } else { 1 };
            for &t in params.iter().skip(skip) {
                out.push(piece(t));
            }
        }
        // land exactly on the symmetry axis
        if let Some(last) = out.last_mut() {
            last[0] = 0.0;
        }
        out
    }

    /// Blend curve sampler used by tests to verify C^2 continuity.
    pub fn quad_blend_point(&self, t: f64) -> Option<([f64; 2], [f64; 2])> {
        self.quad_cap.as_ref().map(|cap| {
            let p = [poly_eval(&cap.blend_x, t), self.epsilon / 2.0 + poly_eval(&cap.blend_y, t)];
            let d = [poly_deriv(&cap.blend_x, t), poly_deriv(&cap.blend_y, t)];
            (p, d)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_geom(eps: f64) -> NeckGeometry {
        NeckGeometry::new(eps, Profile::Quadratic, 1.0, 1.0, 4.0, 0.5, 1.0).unwrap()
    }

    fn circ_geom(eps: f64) -> NeckGeometry {
        NeckGeometry::new(eps, Profile::Circle, 1.0, 1.0, 4.0, 0.5, 1.0).unwrap()
    }

    #[test]
    fn delta_quadratic_examples() {
        let g = quad_geom(0.01);
        assert_eq!(g.delta(0.0).unwrap(), 0.01);
        assert!((g.delta(0.1).unwrap() - 0.02).abs() < 1e-15);
    }

    #[test]
    fn delta_circle_example() {
        let g = circ_geom(0.01);
        // 0.01 + 2(1 - sqrt(0.99)), frozen from 30-digit arithmetic
        let expect = 0.020025125786760090;
        assert!((g.delta(0.1).unwrap() - expect).abs() < 1e-16);
    }

    #[test]
    fn delta_rejects_outside_neck() {
        let g = quad_geom(0.01);
        assert!(g.delta(1.2).is_err());
    }

    #[test]
    fn delta_even_and_minimal_at_origin() {
        for g in [quad_geom(0.02), circ_geom(0.02)] {
            for &x in &[0.05, 0.2, 0.43, 0.9] {
                let d = g.delta(x).unwrap();
                assert_eq!(d, g.delta(-x).unwrap());
                assert!(d > g.epsilon);
            }
            assert_eq!(g.delta(0.0).unwrap(), g.epsilon);
        }
    }

    #[test]
    fn circle_and_quadratic_profiles_agree_near_origin() {
        let gq = quad_geom(0.01);
        let gc = circ_geom(0.01);
        for i in 0..=40 {
            let x = -0.2 + 0.01 * i as f64;
            let dq = gq.delta(x).unwrap();
            let dc = gc.delta(x).unwrap();
            assert!((dq - dc).abs() <= 1e-2 * dc, "x={x} dq={dq} dc={dc}");
        }
    }

    #[test]
    fn classify_examples() {
        let g = circ_geom(0.01);
        assert_eq!(g.classify([0.0, 0.0]), Region::NeckFluid(NeckZone::Inner));
        assert_eq!(g.classify([0.0, 0.006]), Region::InsideD1);
        assert_eq!(g.classify([5.0, 0.0]), Region::OutsideContainer);
        assert_eq!(g.classify([0.0, -0.006]), Region::InsideD2);
        assert_eq!(g.classify([2.5, 2.5]), Region::OuterFluid);
        assert_eq!(g.classify([0.7, 0.0]), Region::NeckFluid(NeckZone::Outer));
    }

    #[test]
    fn classify_point_symmetry() {
        for g in [quad_geom(0.01), circ_geom(0.01)] {
            for n in 0..2000 {
                let p = crate::sampling::r2_point(n);
                let x = [8.0 * p[0] - 4.0, 8.0 * p[1] - 4.0];
                let a = g.classify(x);
                let b = g.classify([-x[0], -x[1]]);
                let swapped = match b {
                    Region::InsideD1 => Region::InsideD2,
                    Region::InsideD2 => Region::InsideD1,
                    other => other,
                };
                assert_eq!(a, swapped, "at {x:?}");
            }
        }
    }

    #[test]
    fn quadratic_blend_is_c2_at_junctions() {
        let g = quad_geom(0.01);
        // position and tangent direction continuous at the graph end
        let (p0, d0) = g.quad_blend_point(0.0).unwrap();
        assert!((p0[0] - 1.0).abs() < 1e-12);
        assert!((p0[1] - (0.5 + 0.005)).abs() < 1e-12);
        let t_graph = (1.0f64, 1.0f64);
        let cross = d0[0] * t_graph.1 - d0[1] * t_graph.0;
        assert!(cross.abs() < 1e-10, "tangent mismatch {cross}");
        // at the cap end the tangent is vertical
        let (p1, d1) = g.quad_blend_point(1.0).unwrap();
        assert!((p1[0] - 1.15).abs() < 1e-12);
        assert!(d1[0].abs() < 1e-10);
        assert!(d1[1] > 0.0);
    }

    #[test]
    fn quarter_boundary_is_monotone_into_axis() {
        for g in [quad_geom(0.04), circ_geom(0.04)] {
            let pts = g.upper_boundary_quarter(&|_| 0.1);
            assert!(pts.len() > 10);
            assert!((pts[0][0] - 0.5).abs() < 1e-12);
            assert_eq!(pts.last().unwrap()[0], 0.0);
            for w in pts.windows(2) {
                let d = ((w[0][0] - w[1][0]).powi(2) + (w[0][1] - w[1][1]).powi(2)).sqrt();
                assert!(d < 0.16, "chord too long: {d}");
            }
        }
    }

    #[test]
    fn width_exceeds_neck() {
        for g in [quad_geom(0.01), circ_geom(0.01)] {
            assert!(2.0 * g.neck_half_width < g.inclusion_width());
        }
    }
}
