//! Forward-mode dual numbers carrying one partial derivative per pose
//! tangent direction.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use crate::scalar::Scalar;

/// Dimension of the pose tangent space: 3 translation, 3 rotation, 20 articulation.
pub const TANGENT_DIM: usize = 26;

/// A value together with its gradient with respect to the pose tangent.
///
/// The value slot performs exactly the operations plain `f64` arithmetic
/// would, so it is bit-identical to the undifferentiated result.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual {
    pub value: f64,
    pub partials: [f64; TANGENT_DIM],
}

impl Dual {
    pub const fn constant(value: f64) -> Self {
        Dual {
            value,
            partials: [0.0; TANGENT_DIM],
        }
    }

    /// A free variable: unit derivative in tangent direction `slot`.
    pub fn variable(value: f64, slot: usize) -> Self {
        let mut d = Dual::constant(value);
        d.partials[slot] = 1.0;
        d
    }

    #[inline]
    fn map_partials(self, k: f64) -> [f64; TANGENT_DIM] {
        let mut out = self.partials;
        for p in &mut out {
            *p *= k;
        }
        out
    }
}

impl Add for Dual {
    type Output = Dual;

    #[inline]
    fn add(mut self, rhs: Dual) -> Dual {
        self.value += rhs.value;
        for (a, b) in self.partials.iter_mut().zip(rhs.partials.iter()) {
            *a += b;
        }
        self
    }
}

impl AddAssign for Dual {
    #[inline]
    fn add_assign(&mut self, rhs: Dual) {
        *self = *self + rhs;
    }
}

impl Sub for Dual {
    type Output = Dual;

    #[inline]
    fn sub(mut self, rhs: Dual) -> Dual {
        self.value -= rhs.value;
        for (a, b) in self.partials.iter_mut().zip(rhs.partials.iter()) {
            *a -= b;
        }
        self
    }
}

impl Mul for Dual {
    type Output = Dual;

    #[inline]
    fn mul(self, rhs: Dual) -> Dual {
        let mut partials = [0.0; TANGENT_DIM];
        for (i, p) in partials.iter_mut().enumerate() {
            *p = self.partials[i] * rhs.value + self.value * rhs.partials[i];
        }
        Dual {
            value: self.value * rhs.value,
            partials,
        }
    }
}

impl Div for Dual {
    type Output = Dual;

    #[inline]
    fn div(self, rhs: Dual) -> Dual {
        let value = self.value / rhs.value;
        let inv = 1.0 / rhs.value;
        let mut partials = [0.0; TANGENT_DIM];
        for (i, p) in partials.iter_mut().enumerate() {
            *p = (self.partials[i] - value * rhs.partials[i]) * inv;
        }
        Dual { value, partials }
    }
}

impl Neg for Dual {
    type Output = Dual;

    #[inline]
    fn neg(self) -> Dual {
        Dual {
            value: -self.value,
            partials: self.map_partials(-1.0),
        }
    }
}

impl Scalar for Dual {
    #[inline]
    fn constant(value: f64) -> Self {
        Dual::constant(value)
    }

    #[inline]
    fn value(&self) -> f64 {
        self.value
    }

    #[inline]
    fn sin(self) -> Self {
        Dual {
            value: self.value.sin(),
            partials: self.map_partials(self.value.cos()),
        }
    }

    #[inline]
    fn cos(self) -> Self {
        Dual {
            value: self.value.cos(),
            partials: self.map_partials(-self.value.sin()),
        }
    }

    #[inline]
    fn scale(self, k: f64) -> Self {
        Dual {
            value: self.value * k,
            partials: self.map_partials(k),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rational<S: Scalar>(x: S, y: S) -> S {
        let t = x * y - -x / (y * y + S::one());
        t * t - y.scale(0.5) + x
    }

    fn eval<S: Scalar>(x: S, y: S) -> S {
        let t = x * y + x.sin() - y.cos() / (x * x + S::one());
        t * t - y.scale(0.5)
    }

    #[test]
    fn product_rule() {
        let x = Dual::variable(3.0, 0);
        let y = Dual::variable(-2.0, 1);
        let z = x * y;
        assert_eq!(z.value, -6.0);
        assert_eq!(z.partials[0], -2.0);
        assert_eq!(z.partials[1], 3.0);
    }

    #[test]
    fn quotient_rule() {
        let x = Dual::variable(1.0, 0);
        let z = Dual::constant(1.0) / (x * x + Dual::constant(1.0));
        assert!((z.partials[0] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn trig_derivatives() {
        let x = Dual::variable(0.7, 4);
        assert_eq!(x.sin().partials[4], 0.7f64.cos());
        assert_eq!(x.cos().partials[4], -(0.7f64.sin()));
    }

    proptest! {
        #[test]
        fn value_slot_matches_plain_arithmetic(x in -3.0f64..3.0, y in -3.0f64..3.0) {
            let plain = rational(x, y);
            let dual = rational(Dual::variable(x, 0), Dual::variable(y, 1));
            prop_assert_eq!(plain.to_bits(), dual.value.to_bits());
        }

        #[test]
        fn value_slot_tracks_libm(x in -3.0f64..3.0, y in -3.0f64..3.0) {
            // Separate call sites may bind different sin implementations.
            let plain = eval(x, y);
            let dual = eval(Dual::variable(x, 0), Dual::variable(y, 1));
            prop_assert!((plain - dual.value).abs() <= 1e-14 * plain.abs().max(1.0));
        }

        #[test]
        fn partials_match_central_differences(x in -3.0f64..3.0, y in -3.0f64..3.0) {
            let h = 1e-6;
            let dual = eval(Dual::variable(x, 0), Dual::variable(y, 1));
            let dx = (eval(x + h, y) - eval(x - h, y)) / (2.0 * h);
            let dy = (eval(x, y + h) - eval(x, y - h)) / (2.0 * h);
            prop_assert!((dual.partials[0] - dx).abs() <= 1e-6 * dx.abs().max(1.0));
            prop_assert!((dual.partials[1] - dy).abs() <= 1e-6 * dy.abs().max(1.0));
        }
    }
}
