//! Second-order jets in two variables.
//!
//! A [`Jet`] carries a value together with its exact first and second
//! partial derivatives with respect to (x, y). Composite expressions built
//! from jets propagate derivatives by the product/quotient rules, so the
//! closed-form velocity and pressure fields expose analytic gradients and
//! Hessians without any numerical differentiation.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub dx: f64,
    pub dy: f64,
    pub dxx: f64,
    pub dxy: f64,
    pub dyy: f64,
}

impl Jet {
    pub const fn constant(v: f64) -> Self {
        Jet { v, dx: 0.0, dy: 0.0, dxx: 0.0, dxy: 0.0, dyy: 0.0 }
    }

    /// Seed for the first coordinate.
    pub const fn x(v: f64) -> Self {
        Jet { v, dx: 1.0, dy: 0.0, dxx: 0.0, dxy: 0.0, dyy: 0.0 }
    }

    /// Seed for the second coordinate.
    pub const fn y(v: f64) -> Self {
        Jet { v, dx: 0.0, dy: 1.0, dxx: 0.0, dxy: 0.0, dyy: 0.0 }
    }

    pub fn recip(self) -> Self {
        let u = self;
        let iv = 1.0 / u.v;
        let iv2 = iv * iv;
        let iv3 = iv2 * iv;
        Jet {
            v: iv,
            dx: -u.dx * iv2,
            dy: -u.dy * iv2,
            dxx: (2.0 * u.dx * u.dx - u.v * u.dxx) * iv3,
            dxy: (2.0 * u.dx * u.dy - u.v * u.dxy) * iv3,
            dyy: (2.0 * u.dy * u.dy - u.v * u.dyy) * iv3,
        }
    }

    pub fn squared(self) -> Self {
        self * self
    }

    pub fn laplacian(self) -> f64 {
        self.dxx + self.dyy
    }

    /// Evaluates a polynomial with coefficients `c[0] + c[1] t + ...` at `t = self`.
    pub fn poly(self, coeffs: &[f64]) -> Self {
        let mut acc = Jet::constant(0.0);
        for &c in coeffs.iter().rev() {
            acc = acc * self + Jet::constant(c);
        }
        acc
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet {
            v: self.v + o.v,
            dx: self.dx + o.dx,
            dy: self.dy + o.dy,
            dxx: self.dxx + o.dxx,
            dxy: self.dxy + o.dxy,
            dyy: self.dyy + o.dyy,
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet {
            v: self.v - o.v,
            dx: self.dx - o.dx,
            dy: self.dy - o.dy,
            dxx: self.dxx - o.dxx,
            dxy: self.dxy - o.dxy,
            dyy: self.dyy - o.dyy,
        }
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet {
            v: -self.v,
            dx: -self.dx,
            dy: -self.dy,
            dxx: -self.dxx,
            dxy: -self.dxy,
            dyy: -self.dyy,
        }
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            dx: self.dx * o.v + self.v * o.dx,
            dy: self.dy * o.v + self.v * o.dy,
            dxx: self.dxx * o.v + 2.0 * self.dx * o.dx + self.v * o.dxx,
            dxy: self.dxy * o.v + self.dx * o.dy + self.dy * o.dx + self.v * o.dxy,
            dyy: self.dyy * o.v + 2.0 * self.dy * o.dy + self.v * o.dyy,
        }
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, s: f64) -> Jet {
        Jet {
            v: self.v * s,
            dx: self.dx * s,
            dy: self.dy * s,
            dxx: self.dxx * s,
            dxy: self.dxy * s,
            dyy: self.dyy * s,
        }
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, s: f64) -> Jet {
        Jet { v: self.v + s, ..self }
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, s: f64) -> Jet {
        Jet { v: self.v - s, ..self }
    }
}

/// Degree-7 smoothstep: 0 at t<=0, 1 at t>=1, with three vanishing
/// derivatives at both ends, so cutoffs built from it are C^3.
pub fn smoothstep7(t: Jet) -> Jet {
    if t.v <= 0.0 {
        Jet::constant(0.0)
    } else if t.v >= 1.0 {
        Jet::constant(1.0)
    } else {
        // 35 t^4 - 84 t^5 + 70 t^6 - 20 t^7
        t.poly(&[0.0, 0.0, 0.0, 0.0, 35.0, -84.0, 70.0, -20.0])
    }
}
