//! Closed-form terms of the vertical heat equation
//! `∂T/∂t = κ(z) ∂²T/∂z² + Q_solar(z, t) / ρc_p`.

use serde::{Deserialize, Serialize};

use crate::time::local_hour;

/// Volumetric heat capacity of seawater, J/(m³·K).
pub const RHO_CP: f64 = 4.1e6;
/// Peak surface irradiance, W/m².
pub const Q_MAX: f64 = 350.0;
/// Great Barrier Reef local time, hours ahead of UTC.
pub const GBR_TZ_OFFSET: f64 = 10.0;

pub const KAPPA_MIN: f64 = 1e-6;
pub const KAPPA_MAX: f64 = 1e-2;
pub const KD_MIN: f64 = 1e-3;
pub const KD_MAX: f64 = 1.0;
pub const ALPHA_BOUND: f64 = 0.25;

/// Reference diffusivity used to non-dimensionalise the residual, m²/s.
pub const KAPPA_REF: f64 = 2.5e-4;
/// E-folding depth of the residual weight, m.
pub const WEIGHT_EFOLD: f64 = 20.0;

/// Literature defaults, also the learnable-parameter initialisation.
pub const KAPPA_LITERATURE: f64 = 2.5e-4;
pub const KD_LITERATURE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Base diffusivity κ₀, m²/s.
    pub kappa0: f64,
    /// Depth coefficient α of κ(z) = κ₀·exp(αz), 1/m.
    pub alpha: f64,
    /// Light attenuation K_d, 1/m.
    pub kd: f64,
    pub rho_cp: f64,
    pub q_max: f64,
    pub tz_offset_hours: f64,
}

impl PhysicalParams {
    pub fn new(kappa0: f64, alpha: f64, kd: f64) -> Self {
        Self { kappa0, alpha, kd, rho_cp: RHO_CP, q_max: Q_MAX, tz_offset_hours: GBR_TZ_OFFSET }
    }

    pub fn literature() -> Self {
        Self::new(KAPPA_LITERATURE, 0.0, KD_LITERATURE)
    }

    /// Checks the parameter bounds, including κ(z) over `[0, z_max]`.
    pub fn is_valid(&self, z_max: f64) -> bool {
        let k_end = self.kappa0 * (self.alpha * z_max).exp();
        (KAPPA_MIN..=KAPPA_MAX).contains(&self.kappa0)
            && (KD_MIN..=KD_MAX).contains(&self.kd)
            && (KAPPA_MIN..=KAPPA_MAX).contains(&k_end)
    }
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self::literature()
    }
}

/// Daytime heating window: `max(0, sin(π(h − 6)/12))` on local hour `h`.
pub fn diurnal_factor(t: f64, tz_offset_hours: f64) -> f64 {
    let h = local_hour(t, tz_offset_hours);
    (std::f64::consts::PI * (h - 6.0) / 12.0).sin().max(0.0)
}

/// Beer's-law volumetric heating, W/m³.
pub fn solar_heating(z: f64, t: f64, p: &PhysicalParams) -> f64 {
    p.q_max * p.kd * (-p.kd * z).exp() * diurnal_factor(t, p.tz_offset_hours)
}

/// κ(z) and whether it had to be clamped into `[KAPPA_MIN, KAPPA_MAX]`.
pub fn kappa_checked(z: f64, p: &PhysicalParams) -> (f64, bool) {
    let k = p.kappa0 * (p.alpha * z).exp();
    let c = k.clamp(KAPPA_MIN, KAPPA_MAX);
    (c, c != k)
}

pub fn kappa_at(z: f64, p: &PhysicalParams) -> f64 {
    kappa_checked(z, p).0
}

/// `∂T/∂t − κ(z)∂²T/∂z² − Q_solar/ρc_p`, °C/s.
pub fn pde_residual(dt_dt: f64, d2t_dz2: f64, z: f64, t: f64, p: &PhysicalParams) -> f64 {
    dt_dt - kappa_at(z, p) * d2t_dz2 - solar_heating(z, t, p) / p.rho_cp
}

/// Time scale and depth weighting applied to raw residuals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualScale {
    /// z_max² / κ_ref, s.
    pub t_ref: f64,
    pub kappa_ref: f64,
    pub weight_efold: f64,
}

impl ResidualScale {
    pub fn for_domain(z_max: f64) -> Self {
        Self { t_ref: z_max * z_max / KAPPA_REF, kappa_ref: KAPPA_REF, weight_efold: WEIGHT_EFOLD }
    }

    pub fn weight(&self, z: f64) -> f64 {
        (-z / self.weight_efold).exp()
    }
}

/// `r · t_ref · exp(−z/20)`; its square is the per-point PDE loss.
pub fn scaled_weighted_residual(r: f64, z: f64, s: &ResidualScale) -> f64 {
    r * s.t_ref * s.weight(z)
}
