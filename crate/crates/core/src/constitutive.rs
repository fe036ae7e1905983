//! Viscosity and pressure law families with their derived coefficients, plus a
//! sampled admissibility report for the hypotheses under which the decay
//! experiment is meaningful.
//!
//! Laws are closed-form on purpose: every derived quantity (bulk viscosity,
//! capillarity, drift potential, entropy weights) then has an analytic oracle
//! the tests can freeze.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Exponent window for the vacuum growth envelope: `rho mu'(rho) / mu(rho)`
/// must stay inside `(ALPHA_MIN, ALPHA_MAX)`.
pub const ALPHA_MIN: f64 = 2.0 / 3.0;
pub const ALPHA_MAX: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ViscosityFamily {
    /// `mu(rho) = rho^alpha` with `2/3 < alpha < 4`.
    PowerLaw { alpha: f64 },
    /// `mu(rho) = rho`: zero bulk viscosity, capillarity `1/rho`.
    Quantum,
    /// `mu(rho) = rho^alpha` below `m`, continued by the linear tail
    /// `c rho` with `c = m^(alpha-1)` above. Continuous at `m` with a kink;
    /// evaluation at exactly `rho = m` uses the power branch.
    LinearTail { alpha: f64, m: f64 },
}

/// A shear viscosity `mu(rho)` together with everything the BD structure
/// derives from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstitutiveLaw {
    family: ViscosityFamily,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() {
        return Err(Error::Domain(format!("viscosity exponent must be finite, got {alpha}")));
    }
    if alpha == ALPHA_MAX {
        // The limit condition tolerates alpha = 4, but the growth envelope
        // needs a strict bound; refusing the boundary keeps every derived
        // estimate valid. Flagged here rather than silently accepted.
        return Err(Error::Domain(
            "alpha = 4 sits on the boundary of the admissible exponent window; \
             the growth envelope requires alpha < 4 strictly"
                .into(),
        ));
    }
    if alpha <= ALPHA_MIN || alpha >= ALPHA_MAX {
        return Err(Error::Domain(format!(
            "viscosity exponent alpha = {alpha} outside the admissible window (2/3, 4)"
        )));
    }
    Ok(())
}

impl ConstitutiveLaw {
    pub fn power_law(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            family: ViscosityFamily::PowerLaw { alpha },
        })
    }

    pub fn quantum() -> Self {
        Self {
            family: ViscosityFamily::Quantum,
        }
    }

    pub fn linear_tail(alpha: f64, m: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::Domain(format!("tail threshold must be positive, got {m}")));
        }
        Ok(Self {
            family: ViscosityFamily::LinearTail { alpha, m },
        })
    }

    pub fn family(&self) -> ViscosityFamily {
        self.family
    }

    /// Vacuum-side exponent of the law.
    pub fn alpha(&self) -> f64 {
        match self.family {
            ViscosityFamily::PowerLaw { alpha } => alpha,
            ViscosityFamily::Quantum => 1.0,
            ViscosityFamily::LinearTail { alpha, .. } => alpha,
        }
    }

    /// Threshold above which the linear tail applies (infinite for pure power laws).
    fn tail_threshold(&self) -> f64 {
        match self.family {
            ViscosityFamily::LinearTail { m, .. } => m,
            _ => f64::INFINITY,
        }
    }

    /// Slope of the linear tail, `m^(alpha-1)`.
    fn tail_slope(&self) -> f64 {
        match self.family {
            ViscosityFamily::LinearTail { alpha, m } => m.powf(alpha - 1.0),
            _ => 1.0,
        }
    }

    pub fn mu(&self, rho: f64) -> f64 {
        match self.family {
            ViscosityFamily::Quantum => rho,
            ViscosityFamily::PowerLaw { alpha } => rho.powf(alpha),
            ViscosityFamily::LinearTail { alpha, m } => {
                if rho <= m {
                    rho.powf(alpha)
                } else {
                    self.tail_slope() * rho
                }
            }
        }
    }

    pub fn mu_prime(&self, rho: f64) -> f64 {
        match self.family {
            ViscosityFamily::Quantum => 1.0,
            ViscosityFamily::PowerLaw { alpha } => alpha * rho.powf(alpha - 1.0),
            ViscosityFamily::LinearTail { alpha, m } => {
                if rho <= m {
                    alpha * rho.powf(alpha - 1.0)
                } else {
                    self.tail_slope()
                }
            }
        }
    }

    pub fn mu_second(&self, rho: f64) -> f64 {
        match self.family {
            ViscosityFamily::Quantum => 0.0,
            ViscosityFamily::PowerLaw { alpha } => alpha * (alpha - 1.0) * rho.powf(alpha - 2.0),
            ViscosityFamily::LinearTail { alpha, m } => {
                if rho <= m {
                    alpha * (alpha - 1.0) * rho.powf(alpha - 2.0)
                } else {
                    0.0
                }
            }
        }
    }

    /// Bulk viscosity from the BD relation `lambda = 2 (mu'(rho) rho - mu(rho))`.
    pub fn lambda(&self, rho: f64) -> Result<f64> {
        if rho < 0.0 {
            return Err(Error::Domain(format!("lambda evaluated at negative density {rho}")));
        }
        if rho == 0.0 {
            return Ok(0.0);
        }
        Ok(2.0 * (self.mu_prime(rho) * rho - self.mu(rho)))
    }

    /// Capillarity coefficient `K(rho) = mu'(rho)^2 / rho`. Singular at vacuum.
    pub fn capillarity(&self, rho: f64) -> Result<f64> {
        if rho <= 0.0 {
            return Err(Error::Domain(format!(
                "capillarity evaluated at rho = {rho}; K may be singular at vacuum"
            )));
        }
        let mp = self.mu_prime(rho);
        Ok(mp * mp / rho)
    }

    /// `sqrt(K(rho)) = mu'(rho) / sqrt(rho)` for `rho > 0`.
    pub fn sqrt_capillarity(&self, rho: f64) -> f64 {
        debug_assert!(rho > 0.0);
        self.mu_prime(rho) / rho.sqrt()
    }

    /// Integral of a function from 1 to `rho`, where the integrand's
    /// antiderivative is `ap` on the power branch and `at` on the tail branch.
    fn integral_from_one(&self, rho: f64, ap: impl Fn(f64) -> f64, at: impl Fn(f64) -> f64) -> f64 {
        let m = self.tail_threshold();
        let seg = |a: f64, b: f64| {
            if b <= m {
                ap(b) - ap(a)
            } else if a >= m {
                at(b) - at(a)
            } else {
                (ap(m) - ap(a)) + (at(b) - at(m))
            }
        };
        if rho >= 1.0 {
            seg(1.0, rho)
        } else {
            -seg(rho, 1.0)
        }
    }

    /// Integral of a function from 0 to `rho`, with antiderivatives as above
    /// and `ap(0) = 0` (integrable vacuum end).
    fn integral_from_zero(&self, rho: f64, ap: impl Fn(f64) -> f64, at: impl Fn(f64) -> f64) -> f64 {
        let m = self.tail_threshold();
        if rho <= m {
            ap(rho)
        } else {
            ap(m) + at(rho) - at(m)
        }
    }

    /// Drift potential slope `s'(rho) = mu'(rho) / rho`.
    pub fn s_prime(&self, rho: f64) -> Result<f64> {
        if rho <= 0.0 {
            return Err(Error::Domain(format!("s' evaluated at rho = {rho}")));
        }
        Ok(self.mu_prime(rho) / rho)
    }

    /// Drift potential `s(rho)` with base point `s(1) = 0`.
    pub fn s_of(&self, rho: f64) -> Result<f64> {
        if rho <= 0.0 {
            return Err(Error::Domain(format!("s evaluated at rho = {rho}")));
        }
        let alpha = self.alpha();
        let c = self.tail_slope();
        let ap = |x: f64| {
            if (alpha - 1.0).abs() < 1e-14 {
                x.ln()
            } else {
                alpha * x.powf(alpha - 1.0) / (alpha - 1.0)
            }
        };
        let at = |x: f64| c * x.ln();
        Ok(self.integral_from_one(rho, ap, at))
    }

    /// BD entropy weight `h(rho) = rho * int_1^rho mu(t)/t^2 dt`, base point 1.
    ///
    /// Differs from the vacuum-based primitive by an affine function of rho,
    /// which drops out of every relative (Bregman) quantity.
    pub fn h_of(&self, rho: f64) -> Result<f64> {
        if rho <= 0.0 {
            return Err(Error::Domain(format!("h evaluated at rho = {rho}")));
        }
        Ok(rho * self.h_inner(rho))
    }

    /// `int_1^rho mu(t)/t^2 dt`.
    fn h_inner(&self, rho: f64) -> f64 {
        let alpha = self.alpha();
        let c = self.tail_slope();
        let ap = |x: f64| {
            if (alpha - 1.0).abs() < 1e-14 {
                x.ln()
            } else {
                x.powf(alpha - 1.0) / (alpha - 1.0)
            }
        };
        let at = |x: f64| c * x.ln();
        self.integral_from_one(rho, ap, at)
    }

    /// `h'(rho) = int_1^rho mu/t^2 dt + mu(rho)/rho`.
    pub fn h_prime(&self, rho: f64) -> Result<f64> {
        if rho <= 0.0 {
            return Err(Error::Domain(format!("h' evaluated at rho = {rho}")));
        }
        Ok(self.h_inner(rho) + self.mu(rho) / rho)
    }

    /// `h''(rho) = mu'(rho) / rho`, the identity every discrete check leans on.
    pub fn h_second(&self, rho: f64) -> Result<f64> {
        if rho <= 0.0 {
            return Err(Error::Domain(format!("h'' evaluated at rho = {rho}")));
        }
        Ok(self.mu_prime(rho) / rho)
    }

    /// Curvature potential `Z(rho) = int_0^rho sqrt(mu) mu' / t dt`.
    pub fn z_of(&self, rho: f64) -> Result<f64> {
        if rho < 0.0 {
            return Err(Error::Domain(format!("Z evaluated at negative density {rho}")));
        }
        let alpha = self.alpha();
        let c = self.tail_slope();
        // integrand on the power branch: alpha t^(3 alpha/2 - 2)
        let e = 1.5 * alpha - 1.0;
        let ap = move |x: f64| alpha / e * x.powf(e);
        let at = move |x: f64| 2.0 * c.powf(1.5) * x.sqrt();
        Ok(self.integral_from_zero(rho, ap, at))
    }

    /// Companion potential `Z1(rho) = int_0^rho mu' / (mu^(1/4) t^(1/2)) dt`.
    pub fn z1_of(&self, rho: f64) -> Result<f64> {
        if rho < 0.0 {
            return Err(Error::Domain(format!("Z1 evaluated at negative density {rho}")));
        }
        let alpha = self.alpha();
        let c = self.tail_slope();
        let e = 0.75 * alpha - 0.5;
        let ap = move |x: f64| alpha / e * x.powf(e);
        let at = move |x: f64| 4.0 * c.powf(0.75) * x.powf(0.25);
        Ok(self.integral_from_zero(rho, ap, at))
    }

    /// Capillary primitive `Pi(rho) = int_0^rho sqrt(K(t)) dt`; the capillary
    /// force is `2 eps rho grad(sqrt(K) lap(Pi))`.
    pub fn capillary_primitive(&self, rho: f64) -> f64 {
        debug_assert!(rho >= 0.0);
        let alpha = self.alpha();
        let c = self.tail_slope();
        let e = alpha - 0.5;
        let ap = move |x: f64| alpha / e * x.powf(e);
        let at = move |x: f64| 2.0 * c * x.sqrt();
        self.integral_from_zero(rho, ap, at)
    }
}

/// Barotropic pressure `p(rho) = a rho^gamma`, `a > 0`, `gamma >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressureLaw {
    a: f64,
    gamma: f64,
}

impl PressureLaw {
    pub fn new(a: f64, gamma: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::Domain(format!("pressure coefficient a must be positive, got {a}")));
        }
        if !(gamma >= 1.0) || !gamma.is_finite() {
            return Err(Error::Domain(format!("pressure exponent gamma must be >= 1, got {gamma}")));
        }
        Ok(Self { a, gamma })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn p(&self, rho: f64) -> f64 {
        if self.gamma == 2.0 {
            self.a * rho * rho
        } else if self.gamma == 1.0 {
            self.a * rho
        } else {
            self.a * rho.powf(self.gamma)
        }
    }

    pub fn p_prime(&self, rho: f64) -> f64 {
        if self.gamma == 2.0 {
            2.0 * self.a * rho
        } else if self.gamma == 1.0 {
            self.a
        } else {
            self.a * self.gamma * rho.powf(self.gamma - 1.0)
        }
    }
}

/// Verdict of the vacuum-exponent / pressure-exponent compatibility check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GammaCondition {
    /// `alpha <= 1` (so `mu(rho) >= C rho` near vacuum) and `gamma >= 1`.
    SmallAlphaOk,
    /// `alpha > 1` and `gamma < alpha`.
    AlphaGe1GammaLtAlphaOk,
    Violated,
}

/// Sampled evidence for the hypotheses on `mu` and `gamma`. A report, not a
/// proof: the limits are Aitken-extrapolated from the edges of the sample
/// range and every witness is reproducible from the stored grid.
#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityReport {
    /// Growth envelope holds: `alpha1 <= rho mu'/mu <= alpha2` inside `(2/3, 4)`.
    pub hyp1_holds: bool,
    /// Observed infimum of `rho mu'(rho)/mu(rho)`.
    pub alpha1_witness: f64,
    /// Observed supremum of `rho mu'(rho)/mu(rho)`.
    pub alpha2_witness: f64,
    /// Observed supremum of `|rho mu''(rho)/mu'(rho)|`.
    pub hyp2_bound: f64,
    /// Largest `nu` with `lambda + 2 mu / 3 >= nu mu` on the samples.
    pub prop1_nu: f64,
    /// Extrapolated limit of `rho mu'/mu` at the vacuum end.
    pub alpha_limit: f64,
    /// Extrapolated limit of `rho mu'/mu` at the large-density end.
    pub beta_limit: f64,
    pub gamma_condition: GammaCondition,
    /// `beta_limit` sits at the lower edge of the large-density window (linear
    /// tail); covered by the exact-tail condition rather than the open window.
    pub beta_boundary: bool,
    pub rho_range: (f64, f64),
    pub samples: usize,
}

impl AdmissibilityReport {
    pub fn admissible(&self) -> bool {
        self.hyp1_holds
            && self.hyp2_bound.is_finite()
            && self.prop1_nu > 0.0
            && self.gamma_condition != GammaCondition::Violated
    }

    pub fn summary(&self) -> String {
        format!(
            "hyp1={} (alpha1={:.6}, alpha2={:.6}), hyp2_bound={:.6}, prop1_nu={:.6}, \
             alpha_limit={:.6}, beta_limit={:.6}{}, gamma_condition={:?}",
            self.hyp1_holds,
            self.alpha1_witness,
            self.alpha2_witness,
            self.hyp2_bound,
            self.prop1_nu,
            self.alpha_limit,
            self.beta_limit,
            if self.beta_boundary { " (boundary)" } else { "" },
            self.gamma_condition
        )
    }
}

/// Aitken extrapolation of a sequence approaching its limit; falls back to the
/// last term when the sequence is already (numerically) constant.
fn aitken(s0: f64, s1: f64, s2: f64) -> f64 {
    let denom = s2 - 2.0 * s1 + s0;
    let scale = s0.abs().max(s1.abs()).max(s2.abs()).max(1.0);
    if denom.abs() < 1e-12 * scale {
        s2
    } else {
        let d = s2 - s1;
        s2 - d * d / denom
    }
}

/// Evaluate every hypothesis on a log-spaced sample grid over `rho_range` and
/// estimate the vacuum/large-density exponent limits at the range edges.
pub fn check_admissibility(
    law: &ConstitutiveLaw,
    pressure: &PressureLaw,
    rho_range: (f64, f64),
    samples: usize,
) -> Result<AdmissibilityReport> {
    let (lo, hi) = rho_range;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Domain(format!(
            "admissibility range must satisfy 0 < lo < hi, got ({lo}, {hi})"
        )));
    }
    if samples < 16 {
        return Err(Error::Domain(format!("need at least 16 samples, got {samples}")));
    }

    let ratio = |rho: f64| rho * law.mu_prime(rho) / law.mu(rho);

    let mut alpha1 = f64::INFINITY;
    let mut alpha2 = f64::NEG_INFINITY;
    let mut hyp2 = 0.0f64;
    let mut nu = f64::INFINITY;
    let mut positive = true;
    let log_lo = lo.ln();
    let log_step = (hi.ln() - log_lo) / (samples - 1) as f64;
    for k in 0..samples {
        let rho = (log_lo + k as f64 * log_step).exp();
        let mu = law.mu(rho);
        let mp = law.mu_prime(rho);
        positive &= mu > 0.0 && mp > 0.0;
        let g = rho * mp / mu;
        alpha1 = alpha1.min(g);
        alpha2 = alpha2.max(g);
        hyp2 = hyp2.max((rho * law.mu_second(rho) / mp).abs());
        let lam = law.lambda(rho)?;
        nu = nu.min((lam + 2.0 * mu / 3.0) / mu);
    }

    // Richardson-style limit estimates just inside the range edges.
    let r0 = lo;
    let r1 = lo * (1.0 + log_step).max(1.0000001); // next two log steps toward the interior
    let edge = |a: f64, b: f64, c: f64| aitken(ratio(a), ratio(b), ratio(c));
    let alpha_limit = edge(
        (log_lo + 2.0 * log_step).exp(),
        (log_lo + log_step).exp(),
        r0,
    );
    let _ = r1;
    let beta_limit = edge(
        (log_lo + (samples - 3) as f64 * log_step).exp(),
        (log_lo + (samples - 2) as f64 * log_step).exp(),
        hi,
    );

    let small_ok = alpha_limit <= 1.0 + 1e-9;
    let gamma = pressure.gamma();
    let gamma_condition = if small_ok && gamma >= 1.0 {
        GammaCondition::SmallAlphaOk
    } else if alpha_limit > 1.0 && gamma < alpha_limit - 1e-12 {
        GammaCondition::AlphaGe1GammaLtAlphaOk
    } else {
        GammaCondition::Violated
    };

    Ok(AdmissibilityReport {
        hyp1_holds: positive && alpha1 > ALPHA_MIN && alpha2 < ALPHA_MAX,
        alpha1_witness: alpha1,
        alpha2_witness: alpha2,
        hyp2_bound: hyp2,
        prop1_nu: nu,
        alpha_limit,
        beta_limit,
        gamma_condition,
        beta_boundary: (beta_limit - 1.0).abs() < 1e-6,
        rho_range,
        samples,
    })
}
