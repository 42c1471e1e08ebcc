//! Scalar loss kernels and their convexified composites.
//!
//! Every kernel returns the value together with a derivative (a fixed
//! subgradient selection at kinks), because the cost assembly always needs
//! both.
//!
//! | kernel       | value                              | derivative              |
//! |--------------|------------------------------------|-------------------------|
//! | quadratic    | `t²`                               | `2t`                    |
//! | absolute     | `|t|`                              | `sign(t)`, 0 at 0       |
//! | huber (R)    | `t²` if `|t| ≤ R`, else `2R|t|−R²` | `2t` or `2R·sign(t)`    |
//! | hinge        | `max{0, t}`                        | 1 if `t > 0`, else 0    |
//!
//! The convexified kernel of a family is `h(max{0, t})`: it agrees with `h`
//! for `t ≥ 0` and is flat at zero for `t ≤ 0`, which makes it the convex
//! envelope of `t ↦ h(t)` restricted to distances (`t = ‖·‖ − d` with `d ≥ 0`).

use crate::error::{Error, Result};
use crate::model::LossFamily;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub derivative: f64,
}

impl LossValue {
    const ZERO: LossValue = LossValue {
        value: 0.0,
        derivative: 0.0,
    };
}

/// A validated Huber radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Huber {
    radius: f64,
}

impl Huber {
    pub fn new(radius: f64) -> Result<Self> {
        if radius.is_finite() && radius > 0.0 {
            Ok(Self { radius })
        } else {
            Err(Error::InvalidRadius(radius))
        }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    #[inline]
    pub fn eval(&self, t: f64) -> LossValue {
        let r = self.radius;
        if t.abs() <= r {
            LossValue {
                value: t * t,
                derivative: 2.0 * t,
            }
        } else {
            LossValue {
                value: 2.0 * r * t.abs() - r * r,
                derivative: 2.0 * r * t.signum(),
            }
        }
    }
}

#[inline]
pub fn quadratic(t: f64) -> LossValue {
    LossValue {
        value: t * t,
        derivative: 2.0 * t,
    }
}

#[inline]
pub fn absolute(t: f64) -> LossValue {
    let derivative = if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    };
    LossValue {
        value: t.abs(),
        derivative,
    }
}

pub fn huber(t: f64, radius: f64) -> Result<LossValue> {
    Ok(Huber::new(radius)?.eval(t))
}

/// `s(t) = max{0, t}` with derivative selection 0 at the kink.
#[inline]
pub fn hinge(t: f64) -> (f64, f64) {
    if t > 0.0 {
        (t, 1.0)
    } else {
        (0.0, 0.0)
    }
}

/// A loss family bound to its radius, ready for repeated evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    Quadratic,
    Absolute,
    Huber(Huber),
}

impl Kernel {
    /// The radius is only checked for [`LossFamily::Huber`].
    pub fn new(family: LossFamily, radius: f64) -> Result<Self> {
        Ok(match family {
            LossFamily::Quadratic => Kernel::Quadratic,
            LossFamily::Absolute => Kernel::Absolute,
            LossFamily::Huber => Kernel::Huber(Huber::new(radius)?),
        })
    }

    #[inline]
    pub fn eval(&self, t: f64) -> LossValue {
        match self {
            Kernel::Quadratic => quadratic(t),
            Kernel::Absolute => absolute(t),
            Kernel::Huber(h) => h.eval(t),
        }
    }

    /// `h(s(t))` with derivative `h'(s(t))·s'(t)`.
    #[inline]
    pub fn eval_convexified(&self, t: f64) -> LossValue {
        let (s, ds) = hinge(t);
        if ds == 0.0 {
            return LossValue::ZERO;
        }
        let inner = self.eval(s);
        LossValue {
            value: inner.value,
            derivative: inner.derivative * ds,
        }
    }
}

/// Loss of `family` at `t`; `radius` is only read for Huber.
pub fn loss(family: LossFamily, t: f64, radius: f64) -> Result<LossValue> {
    Ok(Kernel::new(family, radius)?.eval(t))
}

/// Convexified loss `h(max{0, t})` of `family` at `t`.
pub fn convexified(family: LossFamily, t: f64, radius: f64) -> Result<LossValue> {
    Ok(Kernel::new(family, radius)?.eval_convexified(t))
}
