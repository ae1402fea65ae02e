//! Phases on the circle.

use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Reduce `x` to `[0, 2π)`.
#[inline]
pub fn wrap(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Signed circular difference `a − b` reduced to `(−π, π]`.
#[inline]
pub fn circular_diff(a: f64, b: f64) -> f64 {
    let d = wrap(a - b);
    if d > std::f64::consts::PI {
        d - TAU
    } else {
        d
    }
}

/// An angle in radians, canonically reduced to `[0, 2π)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
pub struct PhaseAngle(f64);

impl PhaseAngle {
    pub const ZERO: PhaseAngle = PhaseAngle(0.0);

    pub fn new(radians: f64) -> Self {
        PhaseAngle(wrap(radians))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// Unit phasor `e^{iθ}`.
    pub fn phasor(self) -> num_complex::Complex64 {
        num_complex::Complex64::from_polar(1.0, self.0)
    }
}

impl From<f64> for PhaseAngle {
    fn from(x: f64) -> Self {
        PhaseAngle::new(x)
    }
}

impl From<PhaseAngle> for f64 {
    fn from(p: PhaseAngle) -> Self {
        p.0
    }
}

impl std::ops::Add<f64> for PhaseAngle {
    type Output = PhaseAngle;
    fn add(self, rhs: f64) -> PhaseAngle {
        PhaseAngle::new(self.0 + rhs)
    }
}

impl std::ops::Sub<f64> for PhaseAngle {
    type Output = PhaseAngle;
    fn sub(self, rhs: f64) -> PhaseAngle {
        PhaseAngle::new(self.0 - rhs)
    }
}

impl std::ops::Sub for PhaseAngle {
    type Output = PhaseAngle;
    fn sub(self, rhs: PhaseAngle) -> PhaseAngle {
        PhaseAngle::new(self.0 - rhs.0)
    }
}

impl fmt::Display for PhaseAngle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wrap_edges() {
        assert_eq!(wrap(0.0), 0.0);
        assert_eq!(wrap(TAU), 0.0);
        assert_eq!(wrap(-1e-300), 0.0);
        assert!((wrap(-0.5) - (TAU - 0.5)).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn always_in_range(x in -1e6f64..1e6) {
            let p = PhaseAngle::new(x).value();
            prop_assert!((0.0..TAU).contains(&p));
        }

        #[test]
        fn diff_in_half_open_interval(a in -10.0f64..10.0, b in -10.0f64..10.0) {
            let d = circular_diff(a, b);
            prop_assert!(d > -std::f64::consts::PI - 1e-12 && d <= std::f64::consts::PI + 1e-12);
            prop_assert!((wrap(b + d) - wrap(a)).abs() < 1e-9 || (wrap(b + d) - wrap(a)).abs() > TAU - 1e-9);
        }
    }
}
