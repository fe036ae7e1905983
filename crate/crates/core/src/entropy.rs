//! The scalar functionals of the model: pressure and viscosity potentials,
//! their relative (Bregman) versions, curvature potentials, drift fields, and
//! the modulated energy with its dissipation channels.

use crate::constitutive::{ConstitutiveLaw, PressureLaw};
use crate::error::{Error, Result};
use crate::fields::PeriodicField;
use serde::{Deserialize, Serialize};

/// Scalar convex potential with a first derivative; the shape `relative`
/// (the Bregman divergence) is defined for.
pub trait ScalarPotential {
    /// Domain: `rho >= 0` for exponents > 1, `rho > 0` otherwise.
    fn eval(&self, rho: f64) -> f64;
    fn deriv(&self, rho: f64) -> f64;
}

/// Pressure potential `H(rho) = rho int_0^rho p(t)/t^2 dt`:
/// `a rho^gamma / (gamma - 1)` for `gamma > 1`, `a rho ln rho` for `gamma = 1`.
pub struct PressurePotential<'a> {
    law: &'a PressureLaw,
}

impl<'a> PressurePotential<'a> {
    pub fn new(law: &'a PressureLaw) -> Self {
        Self { law }
    }

    /// `H''(rho) = a gamma rho^(gamma-2) = p'(rho)/rho`.
    pub fn second(&self, rho: f64) -> f64 {
        self.law.p_prime(rho) / rho
    }
}

impl ScalarPotential for PressurePotential<'_> {
    fn eval(&self, rho: f64) -> f64 {
        let (a, g) = (self.law.a(), self.law.gamma());
        if rho == 0.0 {
            return 0.0; // limit value for every gamma >= 1
        }
        if g == 1.0 {
            a * rho * rho.ln()
        } else if g == 2.0 {
            a * rho * rho
        } else {
            a * rho.powf(g) / (g - 1.0)
        }
    }

    fn deriv(&self, rho: f64) -> f64 {
        let (a, g) = (self.law.a(), self.law.gamma());
        if g == 1.0 {
            a * (rho.ln() + 1.0)
        } else {
            a * g * rho.powf(g - 1.0) / (g - 1.0)
        }
    }
}

/// Viscosity potential `h` with `h'' = mu'(rho)/rho`, base point 1.
pub struct ViscosityPotential<'a> {
    law: &'a ConstitutiveLaw,
}

impl<'a> ViscosityPotential<'a> {
    pub fn new(law: &'a ConstitutiveLaw) -> Self {
        Self { law }
    }

    pub fn second(&self, rho: f64) -> f64 {
        self.law.h_second(rho).expect("rho > 0")
    }
}

impl ScalarPotential for ViscosityPotential<'_> {
    fn eval(&self, rho: f64) -> f64 {
        self.law.h_of(rho).expect("rho > 0")
    }

    fn deriv(&self, rho: f64) -> f64 {
        self.law.h_prime(rho).expect("rho > 0")
    }
}

/// Bregman divergence `G(rho | r) = G(rho) - G(r) - G'(r)(rho - r)`.
///
/// Nonnegative for convex `G`, zero iff `rho = r`, and invariant under adding
/// any affine function to `G` (which is what makes the base-point choices of
/// the potentials observable-safe).
pub fn relative<G: ScalarPotential>(g: &G, rho: f64, r: f64) -> f64 {
    g.eval(rho) - g.eval(r) - g.deriv(r) * (rho - r)
}

/// Coefficients of the modulated energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyParams {
    /// Drift mixing parameter, in (0, 1).
    pub kappa: f64,
    /// Capillarity strength, >= 0.
    pub epsilon: f64,
    /// Drag coefficient, >= 0.
    pub r3: f64,
    /// Target mean density the relative entropies are anchored to.
    pub r_mean: f64,
    /// Diagnostic weight on the curvature dissipation channel.
    pub c_diss: f64,
}

impl EntropyParams {
    pub fn new(kappa: f64, epsilon: f64, r3: f64, r_mean: f64, c_diss: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(Error::Domain(format!("kappa must lie in (0, 1), got {kappa}")));
        }
        if !(epsilon >= 0.0) {
            return Err(Error::Domain(format!("epsilon must be >= 0, got {epsilon}")));
        }
        if !(r3 >= 0.0) {
            return Err(Error::Domain(format!("drag coefficient must be >= 0, got {r3}")));
        }
        if !(r_mean > 0.0) {
            return Err(Error::Domain(format!("target mean density must be positive, got {r_mean}")));
        }
        if !(c_diss > 0.0) {
            return Err(Error::Domain(format!("c_diss must be positive, got {c_diss}")));
        }
        debug_assert!(kappa * (1.0 - kappa) + epsilon > 0.0);
        Ok(Self {
            kappa,
            epsilon,
            r3,
            r_mean,
            c_diss,
        })
    }

    /// Weight `kappa (1 - kappa) + epsilon` on the drift-velocity energy.
    pub fn drift_weight(&self) -> f64 {
        self.kappa * (1.0 - self.kappa) + self.epsilon
    }
}

/// Every scalar functional of one state at one time. Serializes to a fixed
/// CSV row (see [`EntropyReport::CSV_HEADER`]) and to JSON.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub t: f64,
    pub mass: f64,
    pub e_total: f64,
    pub e_kinetic_w: f64,
    pub e_drift_v: f64,
    pub e_pressure_h: f64,
    pub e_drag_h: f64,
    pub d_capillary: f64,
    pub d_pressure: f64,
    pub d_drag: f64,
    /// Quartic drift-curvature channel; reported but not part of the residual.
    pub d_z1_quartic: f64,
    /// `(E_k - E_{k-1}) / dt + d_capillary + d_pressure + d_drag`, filled by
    /// the solver per output interval (0 for standalone evaluations).
    pub dissipation_residual: f64,
}

impl EntropyReport {
    pub const CSV_HEADER: &'static str = "t,mass,e_total,e_kinetic_w,e_drift_v,e_pressure_h,\
        e_drag_h,d_capillary,d_pressure,d_drag,d_z1_quartic,dissipation_residual";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.t,
            self.mass,
            self.e_total,
            self.e_kinetic_w,
            self.e_drift_v,
            self.e_pressure_h,
            self.e_drag_h,
            self.d_capillary,
            self.d_pressure,
            self.d_drag,
            self.d_z1_quartic,
            self.dissipation_residual
        )
    }

    /// Sum of the three dissipation channels entering the residual.
    pub fn dissipation_sum(&self) -> f64 {
        self.d_capillary + self.d_pressure + self.d_drag
    }
}

fn check_above_floor(rho: &PeriodicField, floor: f64) -> Result<()> {
    for (i, &v) in rho.values().iter().enumerate() {
        if v <= floor {
            return Err(Error::VacuumReached {
                cell: i,
                t: f64::NAN,
                rho: v,
                floor,
            });
        }
    }
    Ok(())
}

/// Drift velocity `v = 2 grad s(rho)` and shifted velocity `w = u + kappa v`.
/// The identity `w - u = kappa v` holds exactly by construction.
pub fn drift_fields(
    law: &ConstitutiveLaw,
    rho: &PeriodicField,
    u: &PeriodicField,
    kappa: f64,
    floor: f64,
) -> Result<(PeriodicField, PeriodicField)> {
    check_above_floor(rho, floor)?;
    let mut s_vals = Vec::with_capacity(rho.len());
    for &r in rho.values() {
        s_vals.push(law.s_of(r)?);
    }
    let s_field = PeriodicField::new(rho.grid(), s_vals)?;
    let v = s_field.gradient().map(|g| 2.0 * g)?;
    let w = u.zip_with(&v, |ui, vi| ui + kappa * vi)?;
    Ok((v, w))
}

/// Evaluate the modulated energy and every dissipation channel for one state.
pub fn kappa_entropy(
    law: &ConstitutiveLaw,
    pressure: &PressureLaw,
    params: &EntropyParams,
    t: f64,
    rho: &PeriodicField,
    momentum: &PeriodicField,
    floor: f64,
) -> Result<EntropyReport> {
    check_above_floor(rho, floor)?;
    let u = momentum.zip_with(rho, |m, r| m / r)?;
    let (v, w) = drift_fields(law, rho, &u, params.kappa, floor)?;
    let r = params.r_mean;

    let hp = PressurePotential::new(pressure);
    let hv = ViscosityPotential::new(law);

    let mass = rho.integrate();
    let e_kinetic_w = rho.zip_with(&w, |ri, wi| ri * wi * wi)?.integrate();
    let e_drift_v = params.drift_weight() * rho.zip_with(&v, |ri, vi| ri * vi * vi)?.integrate();
    let e_pressure_h = rho.map(|ri| relative(&hp, ri, r))?.integrate();
    let e_drag_h = 2.0 * params.kappa * params.r3 * rho.map(|ri| relative(&hv, ri, r))?.integrate();

    let mut z_vals = Vec::with_capacity(rho.len());
    let mut z1_vals = Vec::with_capacity(rho.len());
    for &ri in rho.values() {
        z_vals.push(law.z_of(ri)?);
        z1_vals.push(law.z1_of(ri)?);
    }
    let z = PeriodicField::new(rho.grid(), z_vals)?;
    let z1 = PeriodicField::new(rho.grid(), z1_vals)?;
    let d_capillary = params.c_diss
        * params.epsilon
        * z.laplacian().map(|l| l * l)?.integrate();
    let d_z1_quartic = params.c_diss
        * params.epsilon
        * z1.gradient().map(|g| g * g * g * g)?.integrate();

    let grad_rho = rho.gradient();
    let d_pressure = params.kappa
        * rho
            .zip_with(&grad_rho, |ri, gi| law.mu_prime(ri) * hp.second(ri) * gi * gi)?
            .integrate();
    let d_drag = params.r3 * rho.zip_with(&u, |ri, ui| ri * ui * ui)?.integrate();

    Ok(EntropyReport {
        t,
        mass,
        e_total: e_kinetic_w + e_drift_v + e_pressure_h + e_drag_h,
        e_kinetic_w,
        e_drift_v,
        e_pressure_h,
        e_drag_h,
        d_capillary,
        d_pressure,
        d_drag,
        d_z1_quartic,
        dissipation_residual: 0.0,
    })
}

/// Coercivity scalar `Phi(rho) = mu(rho)/rho + rho H''(rho)/mu'(rho)`.
///
/// For a power law with exponent `alpha` and pressure `(a, gamma)` this is
/// `rho^(alpha-1) + (a gamma / alpha) rho^(gamma-alpha)`; its infimum over a
/// density range is the sampled witness of the drift-velocity lower bound.
pub fn coercivity_phi(law: &ConstitutiveLaw, pressure: &PressureLaw, rho: f64) -> f64 {
    debug_assert!(rho > 0.0);
    let hp = PressurePotential::new(pressure);
    law.mu(rho) / rho + rho * hp.second(rho) / law.mu_prime(rho)
}
