//! Scalar second-order jets along a single input direction.
//!
//! `Jet2` carries a value with its first and second derivative along one
//! direction. The tanh rules here are the single source of truth for the
//! whole crate: the batched layer kernels call the same inline helpers, so
//! the scalar and batched paths cannot drift apart.

/// Value plus first and second directional derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

/// tanh of the value and the factor `s = 1 - tanh(v)^2` shared by all
/// derivative lanes.
#[inline(always)]
pub fn tanh_value(v: f64) -> (f64, f64) {
    let t = v.tanh();
    (t, 1.0 - t * t)
}

/// First and second derivative lanes through tanh:
/// `d1' = s*d1`, `d2' = s*d2 - 2*t*s*d1^2` with `t = tanh(v)`, `s = 1 - t^2`.
#[inline(always)]
pub fn tanh_derivs(t: f64, s: f64, d1: f64, d2: f64) -> (f64, f64) {
    (s * d1, s * d2 - 2.0 * t * s * d1 * d1)
}

/// Cotangent of the tanh rules: given adjoints of the outputs, produce the
/// adjoints of the pre-activation jet. `a1`/`a2` are the pre-activation
/// derivative lanes recorded on the forward pass.
///
/// Returns `(dv, dd1, dd2)` contributions for one direction; the `dv` parts
/// from all directions add up, plus `ov * s` once for the value lane.
#[inline(always)]
pub fn tanh_backward_dir(
    t: f64,
    s: f64,
    a1: f64,
    a2: f64,
    o1: f64,
    o2: f64,
) -> (f64, f64, f64) {
    let dd2 = s * o2;
    let dd1 = s * o1 - 4.0 * t * s * a1 * o2;
    let dv = -2.0 * t * s * a1 * o1 + (-2.0 * t * s * a2 - 2.0 * s * (s - 2.0 * t * t) * a1 * a1) * o2;
    (dv, dd1, dd2)
}

impl Jet2 {
    pub fn constant(value: f64) -> Self {
        Self { value, d1: 0.0, d2: 0.0 }
    }

    /// Seed for the tracked direction: unit first derivative.
    pub fn seed(value: f64) -> Self {
        Self { value, d1: 1.0, d2: 0.0 }
    }

    /// Affine map `w*x + b`: value affine, derivatives linear.
    pub fn affine(self, w: f64, b: f64) -> Self {
        Self { value: w * self.value + b, d1: w * self.d1, d2: w * self.d2 }
    }

    pub fn tanh(self) -> Self {
        let (t, s) = tanh_value(self.value);
        let (d1, d2) = tanh_derivs(t, s, self.d1, self.d2);
        Self { value: t, d1, d2 }
    }
}

impl std::ops::Add for Jet2 {
    type Output = Jet2;
    fn add(self, rhs: Jet2) -> Jet2 {
        Jet2 { value: self.value + rhs.value, d1: self.d1 + rhs.d1, d2: self.d2 + rhs.d2 }
    }
}

impl std::ops::Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: Jet2) -> Jet2 {
        // product rule; (fg)'' = f''g + 2f'g' + fg''
        Jet2 {
            value: self.value * rhs.value,
            d1: self.d1 * rhs.value + self.value * rhs.d1,
            d2: self.d2 * rhs.value + 2.0 * self.d1 * rhs.d1 + self.value * rhs.d2,
        }
    }
}
