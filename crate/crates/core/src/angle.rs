//! Angular-frequency helpers on the circle `(-pi, pi]`.

use std::f64::consts::{PI, TAU};

/// Maps any real angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(TAU);
    if t > PI {
        t -= TAU;
    }
    // rem_euclid may return TAU for tiny negative inputs
    if t <= -PI {
        t += TAU;
    }
    t
}

/// `min(|a - b|, 2 pi - |a - b|)` after wrapping both angles.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (wrap_angle(a) - wrap_angle(b)).abs();
    d.min(TAU - d)
}
