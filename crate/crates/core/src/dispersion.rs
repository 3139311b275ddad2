//! Refractive indices, phase-matching angles and group-velocity dispersion of uniaxial BBO.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{omega_from_nm, um_from_omega, C};

/// Sellmeier coefficients for `n² = A + B/(λ² − C) − Dλ²` with λ in µm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SellmeierCoefficients {
    pub a: f64,
    /// µm²
    pub b: f64,
    /// µm²
    pub c: f64,
    /// µm⁻²
    pub d: f64,
}

impl SellmeierCoefficients {
    /// BBO ordinary axis.
    pub const BBO_ORDINARY: Self = Self { a: 2.7359, b: 0.018782, c: 0.01822, d: 0.01354 };
    /// BBO extraordinary axis.
    pub const BBO_EXTRAORDINARY: Self = Self { a: 2.3753, b: 0.01224, c: 0.01667, d: 0.01516 };

    pub fn validate(&self) -> Result<()> {
        if !(self.b >= 0.0 && self.c >= 0.0 && self.d >= 0.0) {
            return Err(Error::InvalidParameter(format!("Sellmeier coefficients must be non-negative: {self:?}")));
        }
        Ok(())
    }

    /// Refractive index at a vacuum wavelength in µm.
    pub fn index(&self, lambda_um: f64) -> Result<f64> {
        let l2 = lambda_um * lambda_um;
        let radicand = if self.b == 0.0 {
            self.a - self.d * l2
        } else {
            if l2 <= self.c {
                return Err(Error::IndexDomain { lambda_um, radicand: f64::NAN });
            }
            self.a + self.b / (l2 - self.c) - self.d * l2
        };
        if !(radicand > 0.0) {
            return Err(Error::IndexDomain { lambda_um, radicand });
        }
        Ok(radicand.sqrt())
    }
}

/// Ordinary refractive index `√(A + B/(λ²−C) − Dλ²)`.
pub fn ordinary_index(lambda_um: f64, coeffs: &SellmeierCoefficients) -> Result<f64> {
    coeffs.index(lambda_um)
}

/// Crystal geometry and the three carrier wavelengths of the process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrystalConfig {
    /// Crystal length (m).
    pub length_m: f64,
    /// Cut angle (deg).
    pub theta_deg: f64,
    pub lambda_p_nm: f64,
    pub lambda_s_nm: f64,
    pub lambda_i_nm: f64,
    pub ordinary: SellmeierCoefficients,
    pub extraordinary: SellmeierCoefficients,
    /// Second-order susceptibility (m/V).
    pub chi2: f64,
}

impl CrystalConfig {
    /// BBO crystal for a signal/idler pair; the pump wavelength follows from energy conservation.
    pub fn bbo(lambda_s_nm: f64, lambda_i_nm: f64, length_m: f64, theta_deg: f64) -> Self {
        Self {
            length_m,
            theta_deg,
            lambda_p_nm: 1.0 / (1.0 / lambda_s_nm + 1.0 / lambda_i_nm),
            lambda_s_nm,
            lambda_i_nm,
            ordinary: SellmeierCoefficients::BBO_ORDINARY,
            extraordinary: SellmeierCoefficients::BBO_EXTRAORDINARY,
            chi2: 3.91e-12,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_m > 0.0) {
            return Err(Error::InvalidParameter(format!("crystal length must be positive, got {}", self.length_m)));
        }
        if !(self.theta_deg > 0.0 && self.theta_deg < 90.0) {
            return Err(Error::InvalidParameter(format!("cut angle must lie in (0, 90) deg, got {}", self.theta_deg)));
        }
        if !(self.lambda_p_nm > 0.0 && self.lambda_s_nm > 0.0 && self.lambda_i_nm > 0.0) {
            return Err(Error::InvalidParameter("wavelengths must be positive".into()));
        }
        let inv_p = 1.0 / self.lambda_p_nm;
        let inv_si = 1.0 / self.lambda_s_nm + 1.0 / self.lambda_i_nm;
        if ((inv_p - inv_si) / inv_p).abs() > 1e-6 {
            return Err(Error::InvalidParameter(format!(
                "energy conservation violated: 1/{} != 1/{} + 1/{}",
                self.lambda_p_nm, self.lambda_s_nm, self.lambda_i_nm
            )));
        }
        self.ordinary.validate()?;
        self.extraordinary.validate()
    }

    pub fn omega_p(&self) -> f64 {
        omega_from_nm(self.lambda_p_nm)
    }
    pub fn omega_s(&self) -> f64 {
        omega_from_nm(self.lambda_s_nm)
    }
    pub fn omega_i(&self) -> f64 {
        omega_from_nm(self.lambda_i_nm)
    }

    /// Ordinary index seen by signal and idler.
    pub fn n_ordinary(&self, lambda_um: f64) -> Result<f64> {
        self.ordinary.index(lambda_um)
    }
}

/// Index seen by an extraordinary wave propagating at `theta_deg` from the optic axis.
pub fn extraordinary_index_at_angle(lambda_um: f64, theta_deg: f64, config: &CrystalConfig) -> Result<f64> {
    if !(0.0..=90.0).contains(&theta_deg) {
        return Err(Error::InvalidParameter(format!("angle must lie in [0, 90] deg, got {theta_deg}")));
    }
    let no = config.ordinary.index(lambda_um)?;
    let ne = config.extraordinary.index(lambda_um)?;
    let (s, c) = theta_deg.to_radians().sin_cos();
    Ok((s * s / (ne * ne) + c * c / (no * no)).powf(-0.5))
}

fn k_pump(omega: f64, theta_deg: f64, config: &CrystalConfig) -> Result<f64> {
    Ok(extraordinary_index_at_angle(um_from_omega(omega), theta_deg, config)? * omega / C)
}

fn k_ordinary(omega: f64, config: &CrystalConfig) -> Result<f64> {
    Ok(config.ordinary.index(um_from_omega(omega))? * omega / C)
}

/// Carrier wavevector mismatch `k_p(θ) − k_s − k_i` (m⁻¹).
pub fn wavevector_mismatch(config: &CrystalConfig, theta_deg: f64) -> Result<f64> {
    Ok(k_pump(config.omega_p(), theta_deg, config)?
        - k_ordinary(config.omega_s(), config)?
        - k_ordinary(config.omega_i(), config)?)
}

/// Phase-matching angle (deg) by bisection over (0°, 90°).
pub fn solve_phase_matching_angle(config: &CrystalConfig) -> Result<f64> {
    let f = |t: f64| wavevector_mismatch(config, t);
    let (mut lo, mut hi) = (1e-9, 90.0 - 1e-9);
    let (mut flo, fhi) = (f(lo)?, f(hi)?);
    if flo.signum() == fhi.signum() {
        return Err(Error::NoPhaseMatchingRoot);
    }
    while hi - lo > 1e-11 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    if f(theta)?.abs() * config.length_m >= 1e-3 {
        return Err(Error::NoPhaseMatchingRoot);
    }
    Ok(theta)
}

/// Wavevectors and their first two frequency derivatives at the three carriers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionParams {
    /// m⁻¹
    pub k_p: f64,
    pub k_s: f64,
    pub k_i: f64,
    /// s·m⁻¹
    pub k1_p: f64,
    pub k1_s: f64,
    pub k1_i: f64,
    /// s²·m⁻¹
    pub k2_p: f64,
    pub k2_s: f64,
    pub k2_i: f64,
}

impl DispersionParams {
    /// Same parameters with the second-order terms removed.
    pub fn without_gvd(self) -> Self {
        Self { k2_p: 0.0, k2_s: 0.0, k2_i: 0.0, ..self }
    }

    /// Signal and idler exchanged.
    pub fn swapped(self) -> Self {
        Self {
            k_s: self.k_i,
            k_i: self.k_s,
            k1_s: self.k1_i,
            k1_i: self.k1_s,
            k2_s: self.k2_i,
            k2_i: self.k2_s,
            ..self
        }
    }
}

/// `(k, k', k'')` at `omega` by central differences, refined until halving the step
/// changes both derivatives by less than 1e-6 relative.
fn derivatives<F>(k: F, omega: f64) -> Result<(f64, f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let k0 = k(omega)?;
    let stencil = |h: f64| -> Result<(f64, f64)> {
        let kp = k(omega + h)?;
        let km = k(omega - h)?;
        Ok(((kp - km) / (2.0 * h), (kp - 2.0 * k0 + km) / (h * h)))
    };
    let mut h = 0.02 * omega;
    let mut prev = stencil(h)?;
    let mut last_change = f64::INFINITY;
    for _ in 0..20 {
        h *= 0.5;
        let cur = stencil(h)?;
        let r1 = ((cur.0 - prev.0) / cur.0).abs();
        let r2 = ((cur.1 - prev.1) / cur.1).abs();
        last_change = r1.max(r2);
        if last_change < 1e-6 {
            // Richardson extrapolation removes the leading h² error.
            let d1 = (4.0 * cur.0 - prev.0) / 3.0;
            let d2 = (4.0 * cur.1 - prev.1) / 3.0;
            return Ok((k0, d1, d2));
        }
        prev = cur;
    }
    Err(Error::DerivativeNotConverged(last_change))
}

/// Dispersion parameters at cut angle `theta_deg`: pump on the extraordinary axis,
/// signal and idler on the ordinary axis.
pub fn dispersion_params(config: &CrystalConfig, theta_deg: f64) -> Result<DispersionParams> {
    let (k_p, k1_p, k2_p) = derivatives(|w| k_pump(w, theta_deg, config), config.omega_p())?;
    let (k_s, k1_s, k2_s) = derivatives(|w| k_ordinary(w, config), config.omega_s())?;
    let (k_i, k1_i, k2_i) = derivatives(|w| k_ordinary(w, config), config.omega_i())?;
    Ok(DispersionParams { k_p, k_s, k_i, k1_p, k1_s, k1_i, k2_p, k2_s, k2_i })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg_853() -> CrystalConfig {
        CrystalConfig::bbo(853.0, 753.0, 3e-3, 29.01)
    }

    #[test]
    fn ordinary_index_values() {
        let o = SellmeierCoefficients::BBO_ORDINARY;
        assert_relative_eq!(ordinary_index(0.400, &o).unwrap(), 1.692988, epsilon = 2e-6);
        assert_relative_eq!(ordinary_index(0.853, &o).unwrap(), 1.659073, epsilon = 2e-6);
    }

    #[test]
    fn sellmeier_collapses_to_sqrt_a() {
        let c = SellmeierCoefficients { a: 2.5, b: 0.0, c: 0.01, d: 0.0 };
        assert_eq!(ordinary_index(10.0, &c).unwrap(), 2.5f64.sqrt());
    }

    #[test]
    fn radicand_domain_error() {
        let c = SellmeierCoefficients { a: 0.5, b: 0.0, c: 0.01, d: 1.0 };
        assert!(matches!(ordinary_index(1.0, &c), Err(Error::IndexDomain { .. })));
        let c = SellmeierCoefficients::BBO_ORDINARY;
        assert!(matches!(ordinary_index(0.1, &c), Err(Error::IndexDomain { .. })));
    }

    #[test]
    fn angle_limits_give_principal_indices() {
        let cfg = cfg_853();
        let no = cfg.ordinary.index(0.4).unwrap();
        let ne = cfg.extraordinary.index(0.4).unwrap();
        assert_eq!(extraordinary_index_at_angle(0.4, 0.0, &cfg).unwrap(), no);
        assert_relative_eq!(extraordinary_index_at_angle(0.4, 90.0, &cfg).unwrap(), ne, max_relative = 1e-15);
    }

    #[test]
    fn energy_conservation_enforced() {
        let mut cfg = cfg_853();
        cfg.validate().unwrap();
        cfg.lambda_p_nm = 400.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn solver_meets_mismatch_tolerance() {
        for (s, i) in [(853.0, 753.0), (840.0, 763.6), (800.0, 800.0)] {
            let cfg = CrystalConfig::bbo(s, i, 3e-3, 29.0);
            let t = solve_phase_matching_angle(&cfg).unwrap();
            assert!(wavevector_mismatch(&cfg, t).unwrap().abs() * cfg.length_m < 1e-3);
        }
    }

    #[test]
    fn no_root_when_sign_constant() {
        let mut cfg = cfg_853();
        cfg.extraordinary = cfg.ordinary;
        assert_eq!(solve_phase_matching_angle(&cfg), Err(Error::NoPhaseMatchingRoot));
    }

    #[test]
    fn group_velocities_are_physical() {
        let cfg = cfg_853();
        let d = dispersion_params(&cfg, 29.13).unwrap();
        for v in [d.k_p, d.k_s, d.k_i, d.k1_p, d.k1_s, d.k1_i, d.k2_p, d.k2_s, d.k2_i] {
            assert!(v > 0.0);
        }
        assert!(d.k1_p > d.k1_i && d.k1_i > d.k1_s);
    }
}
