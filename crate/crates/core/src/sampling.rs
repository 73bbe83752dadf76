//! Deterministic low-discrepancy sampling.
//!
//! All statistical checks in the crate draw their sample points from the R2
//! lattice (the 2D Kronecker sequence built on the plastic number). The
//! sequence is fixed by construction, which keeps every sup/inf estimate and
//! every CSV byte reproducible between runs.

/// Plastic number, the real root of x^3 = x + 1.
const PLASTIC: f64 = 1.324_717_957_244_746;

/// n-th point of the R2 sequence in the unit square.
pub fn r2_point(n: usize) -> [f64; 2] {
    let a1 = 1.0 / PLASTIC;
    let a2 = 1.0 / (PLASTIC * PLASTIC);
    let k = (n + 1) as f64;
    [(k * a1).fract(), (k * a2).fract()]
}

/// Iterator over the first `count` points of the R2 sequence, mapped to the
/// rectangle `[x0, x1] x [y0, y1]`.
pub fn r2_rect(count: usize, x0: f64, x1: f64, y0: f64, y1: f64) -> impl Iterator<Item = [f64; 2]> {
    (0..count).map(move |n| {
        let p = r2_point(n);
        [x0 + p[0] * (x1 - x0), y0 + p[1] * (y1 - y0)]
    })
}
