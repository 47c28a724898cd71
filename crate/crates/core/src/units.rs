//! Physical constants and unit helpers.

use std::f64::consts::PI;

pub const HBAR: f64 = 1.054_571_817e-34;
pub const KB: f64 = 1.380_649e-23;
pub const TWO_PI: f64 = 2.0 * PI;

#[inline]
pub fn hz_to_rad(f: f64) -> f64 {
    TWO_PI * f
}

#[inline]
pub fn rad_to_hz(w: f64) -> f64 {
    w / TWO_PI
}

#[inline]
pub fn db_to_power(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[inline]
pub fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

#[inline]
pub fn power_to_db(p: f64) -> f64 {
    10.0 * p.log10()
}
