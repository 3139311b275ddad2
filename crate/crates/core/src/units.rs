//! Physical constants and the wavelength/frequency boundary.

use std::f64::consts::PI;

/// Speed of light in vacuum (m/s).
pub const C: f64 = 299_792_458.0;

/// Reduced Planck constant (J·s).
pub const HBAR: f64 = 1.054_571_817e-34;

/// Angular frequency (rad/s) of a vacuum wavelength in nm.
pub fn omega_from_nm(lambda_nm: f64) -> f64 {
    2.0 * PI * C / (lambda_nm * 1e-9)
}

/// Vacuum wavelength in nm of an angular frequency (rad/s).
pub fn nm_from_omega(omega: f64) -> f64 {
    2.0 * PI * C / omega * 1e9
}

/// Vacuum wavelength in µm of an angular frequency (rad/s).
pub fn um_from_omega(omega: f64) -> f64 {
    2.0 * PI * C / omega * 1e6
}

/// Converts a wavelength bandwidth (nm) around `center_nm` to angular frequency (rad/s).
pub fn bandwidth_nm_to_omega(center_nm: f64, width_nm: f64) -> f64 {
    2.0 * PI * C * width_nm * 1e-9 / (center_nm * 1e-9).powi(2)
}
