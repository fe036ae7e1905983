//! Time integration of the 1D periodic system with drag, with per-step entropy
//! accounting and a rejection guard that keeps accepted steps inside the
//! entropy budget.
//!
//! Two schemes: a strong-stability-preserving RK3 with every term explicit,
//! and a Strang-split variant that integrates the (stiff) viscous flux with a
//! Crank-Nicolson solve over a periodic tridiagonal system while RK3 handles
//! the rest. Both advance the conservative variables `(rho, m)`; velocity is
//! derived as `m / rho`, which the density floor keeps safe.

use crate::constitutive::{check_admissibility, ConstitutiveLaw, PressureLaw};
use crate::entropy::{
    kappa_entropy, EntropyParams, EntropyReport, PressurePotential, ScalarPotential,
    ViscosityPotential,
};
use crate::error::{Error, Result};
use crate::fields::{Grid, PeriodicField};
use serde::{Deserialize, Serialize};

/// Conservative state at one instant.
#[derive(Debug, Clone)]
pub struct State {
    pub t: f64,
    pub rho: PeriodicField,
    pub momentum: PeriodicField,
}

impl State {
    pub fn new(t: f64, rho: PeriodicField, momentum: PeriodicField) -> Result<Self> {
        if rho.grid() != momentum.grid() {
            return Err(Error::Domain("state fields live on different grids".into()));
        }
        Ok(Self { t, rho, momentum })
    }

    pub fn velocity(&self) -> Result<PeriodicField> {
        self.momentum.zip_with(&self.rho, |m, r| m / r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    /// Shu-Osher SSP-RK3 with every term explicit.
    #[serde(rename = "rk3")]
    ExplicitRk3,
    /// Strang split: Crank-Nicolson viscous solve around an RK3 sweep of the
    /// remaining terms.
    #[serde(rename = "imex")]
    ImexViscous,
}

/// Per-term switches for numerical experiments (all on for physical runs).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TermToggles {
    pub convection: bool,
    pub pressure: bool,
    pub viscous: bool,
    pub capillary: bool,
    pub drag: bool,
}

impl Default for TermToggles {
    fn default() -> Self {
        Self {
            convection: true,
            pressure: true,
            viscous: true,
            capillary: true,
            drag: true,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub grid: Grid,
    pub law: ConstitutiveLaw,
    pub pressure: PressureLaw,
    pub params: EntropyParams,
    /// Upper bound on dt; the stability budget may shrink it further.
    pub dt_init: f64,
    pub t_end: f64,
    pub cfl_safety: f64,
    /// Densities at or below this are a run-ending error, never clamped.
    pub rho_floor: f64,
    /// Relative entropy budget: an accepted step may raise the modulated
    /// energy by at most `residual_tol * max(E(0), 1)`.
    pub residual_tol: f64,
    pub output_interval: f64,
    pub scheme: Scheme,
    pub max_step_retries: u32,
    pub terms: TermToggles,
    pub override_admissibility: bool,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(msg.into()))
            }
        };
        check(self.dt_init > 0.0, "dt_init must be positive")?;
        check(self.t_end > 0.0, "t_end must be positive")?;
        check(
            self.cfl_safety > 0.0 && self.cfl_safety <= 1.0,
            "cfl_safety must lie in (0, 1]",
        )?;
        check(self.rho_floor > 0.0, "rho_floor must be positive")?;
        check(self.residual_tol > 0.0, "residual_tol must be positive")?;
        check(self.output_interval > 0.0, "output_interval must be positive")?;
        Ok(())
    }
}

/// Why a run ended early. Stored in the returned series so partial output
/// survives the failure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RunError {
    Vacuum { cell: usize, t: f64 },
    RetryCapExhausted { t: f64 },
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Vacuum { cell, t } => write!(f, "vacuum reached at cell {cell}, t = {t:.6}"),
            RunError::RetryCapExhausted { t } => {
                write!(f, "step retry cap exhausted at t = {t:.6}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Telemetry {
    pub steps: u64,
    pub rejected_steps: u64,
    /// dt in force at each emitted record.
    pub dt_history: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct TimeSeries {
    pub records: Vec<EntropyReport>,
    pub telemetry: Telemetry,
}

impl TimeSeries {
    /// Largest record-to-record entropy increase (0 for a monotone series).
    pub fn max_entropy_increase(&self) -> f64 {
        self.records
            .windows(2)
            .map(|w| w[1].e_total - w[0].e_total)
            .fold(0.0f64, f64::max)
    }

    /// Monotone nonincreasing up to `rel_tol * max(E(0), 1)`.
    pub fn is_monotone(&self, rel_tol: f64) -> bool {
        match self.records.first() {
            None => true,
            Some(first) => {
                self.max_entropy_increase() <= rel_tol * first.e_total.abs().max(1.0)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub series: TimeSeries,
    pub error: Option<RunError>,
}

// ---------------------------------------------------------------------------
// periodic tridiagonal solve
// ---------------------------------------------------------------------------

/// Solves `a_i x_{i-1} + b_i x_i + c_i x_{i+1} = d_i` with periodic wraparound
/// (Thomas recursion plus a Sherman-Morrison rank-one correction for the
/// corner entries).
mod tridiag {
    pub struct CyclicWorkspace {
        bb: Vec<f64>,
        cp: Vec<f64>,
        y: Vec<f64>,
        z: Vec<f64>,
        u: Vec<f64>,
    }

    impl CyclicWorkspace {
        pub fn new(n: usize) -> Self {
            Self {
                bb: vec![0.0; n],
                cp: vec![0.0; n],
                y: vec![0.0; n],
                z: vec![0.0; n],
                u: vec![0.0; n],
            }
        }

        fn thomas(bb: &[f64], a: &[f64], c: &[f64], d: &[f64], cp: &mut [f64], x: &mut [f64]) {
            let n = bb.len();
            cp[0] = c[0] / bb[0];
            x[0] = d[0] / bb[0];
            for i in 1..n {
                let m = bb[i] - a[i] * cp[i - 1];
                cp[i] = c[i] / m;
                x[i] = (d[i] - a[i] * x[i - 1]) / m;
            }
            for i in (0..n - 1).rev() {
                x[i] -= cp[i] * x[i + 1];
            }
        }

        /// `a[0]` couples `x[n-1]`, `c[n-1]` couples `x[0]`.
        pub fn solve(&mut self, a: &[f64], b: &[f64], c: &[f64], d: &[f64], x: &mut [f64]) {
            let n = b.len();
            let gamma = -b[0];
            self.bb.copy_from_slice(b);
            self.bb[0] = b[0] - gamma;
            self.bb[n - 1] = b[n - 1] - a[0] * c[n - 1] / gamma;
            self.u.iter_mut().for_each(|v| *v = 0.0);
            self.u[0] = gamma;
            self.u[n - 1] = c[n - 1];

            Self::thomas(&self.bb, a, c, d, &mut self.cp, &mut self.y);
            Self::thomas(&self.bb, a, c, &self.u, &mut self.cp, &mut self.z);

            let vy = self.y[0] + a[0] * self.y[n - 1] / gamma;
            let vz = 1.0 + self.z[0] + a[0] * self.z[n - 1] / gamma;
            let factor = vy / vz;
            for i in 0..n {
                x[i] = self.y[i] - factor * self.z[i];
            }
        }
    }

}

// ---------------------------------------------------------------------------
// semidiscrete right-hand side
// ---------------------------------------------------------------------------

#[inline]
fn wrap_next(i: usize, n: usize) -> usize {
    if i + 1 == n {
        0
    } else {
        i + 1
    }
}

#[inline]
fn wrap_prev(i: usize, n: usize) -> usize {
    if i == 0 {
        n - 1
    } else {
        i - 1
    }
}

struct Workspace {
    u: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    k_rho: Vec<f64>,
    k_m: Vec<f64>,
    s1_rho: Vec<f64>,
    s1_m: Vec<f64>,
    s2_rho: Vec<f64>,
    s2_m: Vec<f64>,
    imex_m: Vec<f64>,
    s_pot: Vec<f64>,
    tri_lo: Vec<f64>,
    tri_di: Vec<f64>,
    tri_up: Vec<f64>,
    tri_rhs: Vec<f64>,
    tri: tridiag::CyclicWorkspace,
}

impl Workspace {
    fn new(n: usize) -> Self {
        let z = || vec![0.0; n];
        Self {
            u: z(),
            a: z(),
            b: z(),
            k_rho: z(),
            k_m: z(),
            s1_rho: z(),
            s1_m: z(),
            s2_rho: z(),
            s2_m: z(),
            imex_m: z(),
            s_pot: z(),
            tri_lo: z(),
            tri_di: z(),
            tri_up: z(),
            tri_rhs: z(),
            tri: tridiag::CyclicWorkspace::new(n),
        }
    }
}

struct Kernel<'a> {
    law: &'a ConstitutiveLaw,
    pressure: &'a PressureLaw,
    params: &'a EntropyParams,
    terms: TermToggles,
    /// Whether the viscous flux belongs in the explicit rhs (false in the
    /// split scheme, where Crank-Nicolson owns it).
    explicit_viscous: bool,
    n: usize,
    dx: f64,
}

impl Kernel<'_> {
    /// Semidiscrete rhs; `Err(cell)` flags a nonpositive density.
    fn rhs_into(
        &self,
        rho: &[f64],
        m: &[f64],
        drho: &mut [f64],
        dm: &mut [f64],
        u: &mut [f64],
        a: &mut [f64],
        b: &mut [f64],
    ) -> std::result::Result<(), usize> {
        let n = self.n;
        let inv2dx = 1.0 / (2.0 * self.dx);
        let invdx = 1.0 / self.dx;
        let invdx2 = invdx * invdx;

        for (i, &r) in rho.iter().enumerate() {
            if !(r > 0.0) {
                return Err(i);
            }
            u[i] = m[i] / r;
        }

        // mass: drho = -div m (flux form; the telescoping sum conserves mass)
        for i in 0..n {
            drho[i] = -(m[wrap_next(i, n)] - m[wrap_prev(i, n)]) * inv2dx;
        }

        // momentum: start from drag, accumulate the rest
        if self.terms.drag {
            let r3 = self.params.r3;
            for i in 0..n {
                dm[i] = -r3 * m[i];
            }
        } else {
            dm.iter_mut().for_each(|v| *v = 0.0);
        }

        if self.terms.convection {
            for i in 0..n {
                a[i] = m[i] * u[i];
            }
            for i in 0..n {
                dm[i] -= (a[wrap_next(i, n)] - a[wrap_prev(i, n)]) * inv2dx;
            }
        }

        if self.terms.pressure {
            for i in 0..n {
                a[i] = self.pressure.p(rho[i]);
            }
            for i in 0..n {
                dm[i] -= (a[wrap_next(i, n)] - a[wrap_prev(i, n)]) * inv2dx;
            }
        }

        // viscous stress (2 mu + lambda) u_x = 2 rho mu'(rho) u_x in compact
        // flux form: damps grid-scale oscillation the composed central
        // stencil would leave untouched.
        if self.terms.viscous && self.explicit_viscous {
            for i in 0..n {
                a[i] = 2.0 * rho[i] * self.law.mu_prime(rho[i]);
            }
            for i in 0..n {
                let ip = wrap_next(i, n);
                b[i] = 0.5 * (a[i] + a[ip]) * (u[ip] - u[i]) * invdx;
            }
            for i in 0..n {
                dm[i] += (b[i] - b[wrap_prev(i, n)]) * invdx;
            }
        }

        // capillary force 2 eps rho grad( sqrt(K) lap(Pi) )
        let eps = self.params.epsilon;
        if self.terms.capillary && eps > 0.0 {
            for i in 0..n {
                a[i] = self.law.capillary_primitive(rho[i]);
            }
            for i in 0..n {
                b[i] = (a[wrap_next(i, n)] - 2.0 * a[i] + a[wrap_prev(i, n)]) * invdx2;
            }
            for i in 0..n {
                a[i] = self.law.sqrt_capillarity(rho[i]) * b[i];
            }
            let two_eps = 2.0 * eps;
            for i in 0..n {
                dm[i] += two_eps * rho[i] * (a[wrap_next(i, n)] - a[wrap_prev(i, n)]) * inv2dx;
            }
        }

        Ok(())
    }

    /// Modulated energy of a raw state; matches `entropy::kappa_entropy`'s
    /// total up to summation order.
    fn total_entropy(&self, rho: &[f64], m: &[f64], s_pot: &mut [f64]) -> f64 {
        let n = self.n;
        let inv2dx = 1.0 / (2.0 * self.dx);
        let kappa = self.params.kappa;
        let cw = self.params.drift_weight();
        let r = self.params.r_mean;
        let two_kr3 = 2.0 * kappa * self.params.r3;

        let hp = PressurePotential::new(self.pressure);
        let hv = ViscosityPotential::new(self.law);
        let hp_r = hp.eval(r);
        let dhp_r = hp.deriv(r);
        let hv_r = hv.eval(r);
        let dhv_r = hv.deriv(r);

        for i in 0..n {
            s_pot[i] = self.law.s_of(rho[i]).expect("density above floor");
        }
        let mut acc = 0.0;
        for i in 0..n {
            let v = 2.0 * (s_pot[wrap_next(i, n)] - s_pot[wrap_prev(i, n)]) * inv2dx;
            let u = m[i] / rho[i];
            let w = u + kappa * v;
            let rel_p = hp.eval(rho[i]) - hp_r - dhp_r * (rho[i] - r);
            let rel_h = hv.eval(rho[i]) - hv_r - dhv_r * (rho[i] - r);
            acc += rho[i] * (w * w + cw * v * v) + rel_p + two_kr3 * rel_h;
        }
        acc * self.dx
    }

    fn dt_budget(&self, rho: &[f64], u: &[f64], explicit_viscous: bool) -> f64 {
        let mut max_u = 0.0f64;
        let mut max_cs2 = 0.0f64;
        let mut max_mu_p = 0.0f64;
        for i in 0..self.n {
            max_u = max_u.max(u[i].abs());
            max_cs2 = max_cs2.max(self.pressure.p_prime(rho[i]));
            max_mu_p = max_mu_p.max(self.law.mu_prime(rho[i]));
        }
        let dx = self.dx;
        let mut dt = dx / (max_u + max_cs2.max(0.0).sqrt() + 1e-300);
        if self.terms.viscous && explicit_viscous {
            // (2 mu + lambda)/rho = 2 mu'
            dt = dt.min(dx * dx / (2.0 * max_mu_p + 1e-300));
        }
        let eps = self.params.epsilon;
        if self.terms.capillary && eps > 0.0 {
            // dispersive wave speed ~ sqrt(2 eps rho K) k = sqrt(2 eps) mu' k
            dt = dt.min(dx * dx / ((2.0 * eps).sqrt() * max_mu_p + 1e-300));
        }
        if self.terms.drag && self.params.r3 > 0.0 {
            dt = dt.min(1.0 / self.params.r3);
        }
        dt
    }
}

/// Semidiscrete right-hand side `(d rho/dt, d m/dt)` of the full system.
pub fn rhs(state: &State, config: &SolverConfig) -> Result<(PeriodicField, PeriodicField)> {
    let n = config.grid.n();
    let kernel = Kernel {
        law: &config.law,
        pressure: &config.pressure,
        params: &config.params,
        terms: config.terms,
        explicit_viscous: true,
        n,
        dx: config.grid.dx(),
    };
    let mut drho = vec![0.0; n];
    let mut dm = vec![0.0; n];
    let (mut u, mut a, mut b) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for (i, &r) in state.rho.values().iter().enumerate() {
        if r < config.rho_floor {
            return Err(Error::VacuumReached {
                cell: i,
                t: state.t,
                rho: r,
                floor: config.rho_floor,
            });
        }
    }
    kernel
        .rhs_into(
            state.rho.values(),
            state.momentum.values(),
            &mut drho,
            &mut dm,
            &mut u,
            &mut a,
            &mut b,
        )
        .map_err(|cell| Error::VacuumReached {
            cell,
            t: state.t,
            rho: state.rho.values()[cell],
            floor: 0.0,
        })?;
    Ok((
        PeriodicField::new(config.grid, drho)?,
        PeriodicField::new(config.grid, dm)?,
    ))
}

/// Capillary force in the primitive form `2 eps rho grad(sqrt(K) lap(Pi))`.
pub fn capillary_force(
    law: &ConstitutiveLaw,
    rho: &PeriodicField,
    epsilon: f64,
) -> Result<PeriodicField> {
    let pi = rho.map(|r| law.capillary_primitive(r))?;
    let inner = pi
        .laplacian()
        .zip_with(rho, |l, r| law.sqrt_capillarity(r) * l)?;
    inner
        .gradient()
        .zip_with(rho, |g, r| 2.0 * epsilon * r * g)
}

/// Quantum-case cross-check: the same force written as the conservative flux
/// `4 eps grad( sqrt(rho) lap(sqrt(rho)) - (grad sqrt(rho))^2 )`, valid for
/// `mu(rho) = rho`. Agrees with [`capillary_force`] to O(dx^2).
pub fn capillary_force_bohm(rho: &PeriodicField, epsilon: f64) -> Result<PeriodicField> {
    let f = rho.map(f64::sqrt)?;
    let flux = f
        .zip_with(&f.laplacian(), |fi, li| fi * li)?
        .zip_with(&f.gradient(), |t, gi| t - gi * gi)?;
    flux.gradient().map(|g| 4.0 * epsilon * g)
}

// ---------------------------------------------------------------------------
// stepping
// ---------------------------------------------------------------------------

struct Stepper<'a> {
    kernel: Kernel<'a>,
    scheme: Scheme,
    ws: Workspace,
}

impl<'a> Stepper<'a> {
    fn new(config: &'a SolverConfig) -> Self {
        let n = config.grid.n();
        let explicit_viscous = config.scheme == Scheme::ExplicitRk3;
        Self {
            kernel: Kernel {
                law: &config.law,
                pressure: &config.pressure,
                params: &config.params,
                terms: config.terms,
                explicit_viscous,
                n,
                dx: config.grid.dx(),
            },
            scheme: config.scheme,
            ws: Workspace::new(n),
        }
    }

    /// One candidate step from `(rho, m)` into `(out_rho, out_m)`.
    fn step_into(
        &mut self,
        rho: &[f64],
        m: &[f64],
        dt: f64,
        out_rho: &mut [f64],
        out_m: &mut [f64],
    ) -> std::result::Result<(), usize> {
        match self.scheme {
            Scheme::ExplicitRk3 => self.rk3(rho, m, dt, out_rho, out_m),
            Scheme::ImexViscous => {
                let viscous = self.kernel.terms.viscous;
                if viscous {
                    // first half viscous step reads the current density
                    self.viscous_cn(rho, m, 0.5 * dt, out_m)?;
                    self.ws.imex_m.copy_from_slice(out_m);
                } else {
                    self.ws.imex_m.copy_from_slice(m);
                }
                let m_mid = std::mem::take(&mut self.ws.imex_m);
                let res = self.rk3(rho, &m_mid, dt, out_rho, out_m);
                self.ws.imex_m = m_mid;
                res?;
                if viscous {
                    self.ws.imex_m.copy_from_slice(out_m);
                    let m_end = std::mem::take(&mut self.ws.imex_m);
                    let res = self.viscous_cn(out_rho, &m_end, 0.5 * dt, out_m);
                    self.ws.imex_m = m_end;
                    res?;
                }
                Ok(())
            }
        }
    }

    fn rk3(
        &mut self,
        rho: &[f64],
        m: &[f64],
        dt: f64,
        out_rho: &mut [f64],
        out_m: &mut [f64],
    ) -> std::result::Result<(), usize> {
        let n = self.kernel.n;
        let ws = &mut self.ws;

        self.kernel
            .rhs_into(rho, m, &mut ws.k_rho, &mut ws.k_m, &mut ws.u, &mut ws.a, &mut ws.b)?;
        for i in 0..n {
            ws.s1_rho[i] = rho[i] + dt * ws.k_rho[i];
            ws.s1_m[i] = m[i] + dt * ws.k_m[i];
        }

        let (s1_rho, s1_m) = (std::mem::take(&mut ws.s1_rho), std::mem::take(&mut ws.s1_m));
        let r = self
            .kernel
            .rhs_into(&s1_rho, &s1_m, &mut ws.k_rho, &mut ws.k_m, &mut ws.u, &mut ws.a, &mut ws.b);
        for i in 0..n {
            ws.s2_rho[i] = 0.75 * rho[i] + 0.25 * (s1_rho[i] + dt * ws.k_rho[i]);
            ws.s2_m[i] = 0.75 * m[i] + 0.25 * (s1_m[i] + dt * ws.k_m[i]);
        }
        ws.s1_rho = s1_rho;
        ws.s1_m = s1_m;
        r?;

        let (s2_rho, s2_m) = (std::mem::take(&mut ws.s2_rho), std::mem::take(&mut ws.s2_m));
        let r = self
            .kernel
            .rhs_into(&s2_rho, &s2_m, &mut ws.k_rho, &mut ws.k_m, &mut ws.u, &mut ws.a, &mut ws.b);
        const THIRD: f64 = 1.0 / 3.0;
        const TWO_THIRDS: f64 = 2.0 / 3.0;
        for i in 0..n {
            out_rho[i] = THIRD * rho[i] + TWO_THIRDS * (s2_rho[i] + dt * ws.k_rho[i]);
            out_m[i] = THIRD * m[i] + TWO_THIRDS * (s2_m[i] + dt * ws.k_m[i]);
        }
        ws.s2_rho = s2_rho;
        ws.s2_m = s2_m;
        r?;
        Ok(())
    }

    /// Crank-Nicolson solve of `m_t = D(nu D(m/rho))` over `tau` with the
    /// density (and hence the coefficient field) frozen.
    fn viscous_cn(
        &mut self,
        rho: &[f64],
        m: &[f64],
        tau: f64,
        out_m: &mut [f64],
    ) -> std::result::Result<(), usize> {
        let n = self.kernel.n;
        let ws = &mut self.ws;
        let invdx2 = 1.0 / (self.kernel.dx * self.kernel.dx);

        // nu at cells, then half-edge averages
        for (i, &r) in rho.iter().enumerate() {
            if !(r > 0.0) {
                return Err(i);
            }
            ws.a[i] = 2.0 * r * self.kernel.law.mu_prime(r);
        }
        for i in 0..n {
            ws.b[i] = 0.5 * (ws.a[i] + ws.a[wrap_next(i, n)]); // nu_{i+1/2}
        }

        // A m in row form: up/lo/mid act on m via u = m/rho
        let half = 0.5 * tau;
        for i in 0..n {
            let ip = wrap_next(i, n);
            let im = wrap_prev(i, n);
            let up = ws.b[i] * invdx2 / rho[ip];
            let lo = ws.b[im] * invdx2 / rho[im];
            let mid = -(ws.b[i] + ws.b[im]) * invdx2 / rho[i];
            ws.tri_up[i] = -half * up;
            ws.tri_lo[i] = -half * lo;
            ws.tri_di[i] = 1.0 - half * mid;
            ws.tri_rhs[i] = m[i] + half * (up * m[ip] + mid * m[i] + lo * m[im]);
        }
        ws.tri
            .solve(&ws.tri_lo, &ws.tri_di, &ws.tri_up, &ws.tri_rhs, out_m);
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// run loop
// ---------------------------------------------------------------------------

/// Integrate from `initial` to `t_end`, emitting an entropy record every
/// output interval. Steps that would raise the modulated energy beyond the
/// budget are rejected and retried with half the dt; a partial series with an
/// error marker is returned if the solver cannot continue.
pub fn run(config: &SolverConfig, initial: &State) -> Result<RunOutcome> {
    config.validate()?;
    if !config.override_admissibility {
        let rep = check_admissibility(&config.law, &config.pressure, (1e-5, 1e5), 200)?;
        if !rep.admissible() {
            return Err(Error::Admissibility(rep.summary()));
        }
    }
    for (i, &r) in initial.rho.values().iter().enumerate() {
        if r < config.rho_floor {
            return Err(Error::VacuumReached {
                cell: i,
                t: initial.t,
                rho: r,
                floor: config.rho_floor,
            });
        }
    }

    let n = config.grid.n();
    let mut stepper = Stepper::new(config);
    let mut rho = initial.rho.values().to_vec();
    let mut m = initial.momentum.values().to_vec();
    let mut cand_rho = vec![0.0; n];
    let mut cand_m = vec![0.0; n];
    let mut t = initial.t;
    let t_end = initial.t + config.t_end;

    let mut series = TimeSeries::default();
    let record = |series: &mut TimeSeries,
                      t: f64,
                      rho: &[f64],
                      m: &[f64],
                      dt_now: f64|
     -> Result<()> {
        let rho_f = PeriodicField::new(config.grid, rho.to_vec())?;
        let m_f = PeriodicField::new(config.grid, m.to_vec())?;
        let mut rep = kappa_entropy(
            &config.law,
            &config.pressure,
            &config.params,
            t,
            &rho_f,
            &m_f,
            config.rho_floor,
        )?;
        if let Some(prev) = series.records.last() {
            let dt_rec = rep.t - prev.t;
            if dt_rec > 0.0 {
                rep.dissipation_residual =
                    (rep.e_total - prev.e_total) / dt_rec + rep.dissipation_sum();
            }
        }
        series.records.push(rep);
        series.telemetry.dt_history.push(dt_now);
        Ok(())
    };

    let mut e_prev = stepper.kernel.total_entropy(&rho, &m, &mut stepper.ws.s_pot);
    let e_budget = config.residual_tol * e_prev.abs().max(1.0);
    record(&mut series, t, &rho, &m, config.dt_init)?;

    let eps_t = 1e-12 * t_end.abs().max(1.0);
    let mut next_output = initial.t + config.output_interval;
    let mut dt_cap = config.dt_init;

    while t < t_end - eps_t {
        // refresh velocity buffer for the budget
        for i in 0..n {
            stepper.ws.u[i] = m[i] / rho[i];
        }
        let budget = config.cfl_safety
            * stepper
                .kernel
                .dt_budget(&rho, &stepper.ws.u, config.scheme == Scheme::ExplicitRk3);
        let mut dt = dt_cap.min(budget).min(next_output.min(t_end) - t).max(1e-300);

        let mut accepted = false;
        let mut last_failure: Option<RunError> = None;
        for _retry in 0..=config.max_step_retries {
            match stepper.step_into(&rho, &m, dt, &mut cand_rho, &mut cand_m) {
                Err(cell) => {
                    last_failure = Some(RunError::Vacuum { cell, t });
                }
                Ok(()) => {
                    // floor check on the candidate
                    if let Some(cell) = cand_rho.iter().position(|&r| r <= config.rho_floor) {
                        last_failure = Some(RunError::Vacuum { cell, t });
                    } else {
                        let e_new =
                            stepper.kernel.total_entropy(&cand_rho, &cand_m, &mut stepper.ws.s_pot);
                        if e_new - e_prev <= e_budget {
                            e_prev = e_new;
                            accepted = true;
                        } else {
                            last_failure = Some(RunError::RetryCapExhausted { t });
                        }
                    }
                }
            }
            if accepted {
                break;
            }
            series.telemetry.rejected_steps += 1;
            dt *= 0.5;
        }

        if !accepted {
            let err = last_failure.unwrap_or(RunError::RetryCapExhausted { t });
            return Ok(RunOutcome {
                series,
                error: Some(err),
            });
        }

        std::mem::swap(&mut rho, &mut cand_rho);
        std::mem::swap(&mut m, &mut cand_m);
        t += dt;
        series.telemetry.steps += 1;
        // recover toward the configured cap after rejections
        dt_cap = (dt * 1.25).min(config.dt_init);

        if t >= next_output - eps_t {
            record(&mut series, t, &rho, &m, dt)?;
            while next_output <= t + eps_t {
                next_output += config.output_interval;
            }
        }
    }

    // ensure the final time is recorded even if it is not on the output grid
    if series
        .records
        .last()
        .map(|r| (r.t - t).abs() > eps_t)
        .unwrap_or(true)
    {
        record(&mut series, t, &rho, &m, dt_cap)?;
    }

    Ok(RunOutcome {
        series,
        error: None,
    })
}

/// Advance a single step of size `dt` (the building block `run` drives).
/// Exposed for conservation and fixed-point tests.
pub fn step(state: &State, config: &SolverConfig, dt: f64) -> Result<State> {
    let n = config.grid.n();
    let mut stepper = Stepper::new(config);
    let mut out_rho = vec![0.0; n];
    let mut out_m = vec![0.0; n];
    stepper
        .step_into(
            state.rho.values(),
            state.momentum.values(),
            dt,
            &mut out_rho,
            &mut out_m,
        )
        .map_err(|cell| Error::VacuumReached {
            cell,
            t: state.t,
            rho: f64::NAN,
            floor: config.rho_floor,
        })?;
    if let Some(cell) = out_rho.iter().position(|&r| r <= config.rho_floor) {
        return Err(Error::VacuumReached {
            cell,
            t: state.t + dt,
            rho: out_rho[cell],
            floor: config.rho_floor,
        });
    }
    Ok(State {
        t: state.t + dt,
        rho: PeriodicField::new(config.grid, out_rho)?,
        momentum: PeriodicField::new(config.grid, out_m)?,
    })
}

/// Repeated fixed-dt stepping without the adaptive loop (test helper).
pub fn step_n(state: &State, config: &SolverConfig, dt: f64, count: usize) -> Result<State> {
    let n = config.grid.n();
    let mut stepper = Stepper::new(config);
    let mut rho = state.rho.values().to_vec();
    let mut m = state.momentum.values().to_vec();
    let mut cand_rho = vec![0.0; n];
    let mut cand_m = vec![0.0; n];
    let mut t = state.t;
    for _ in 0..count {
        stepper
            .step_into(&rho, &m, dt, &mut cand_rho, &mut cand_m)
            .map_err(|cell| Error::VacuumReached {
                cell,
                t,
                rho: f64::NAN,
                floor: config.rho_floor,
            })?;
        if let Some(cell) = cand_rho.iter().position(|&r| r <= config.rho_floor) {
            return Err(Error::VacuumReached {
                cell,
                t,
                rho: cand_rho[cell],
                floor: config.rho_floor,
            });
        }
        std::mem::swap(&mut rho, &mut cand_rho);
        std::mem::swap(&mut m, &mut cand_m);
        t += dt;
    }
    Ok(State {
        t,
        rho: PeriodicField::new(config.grid, rho)?,
        momentum: PeriodicField::new(config.grid, m)?,
    })
}

/// Least-squares slope of `ln E(t)` over `[t0, t1]`; returns the decay rate
/// `C = -slope` and the regression `r^2`.
pub fn fit_decay_rate(series: &TimeSeries, window: (f64, f64)) -> Result<(f64, f64)> {
    const MIN_RECORDS: usize = 10;
    let pts: Vec<(f64, f64)> = series
        .records
        .iter()
        .filter(|r| r.t >= window.0 && r.t <= window.1)
        .map(|r| (r.t, r.e_total))
        .collect();
    if pts.len() < MIN_RECORDS {
        return Err(Error::WindowTooShort {
            count: pts.len(),
            min: MIN_RECORDS,
        });
    }
    for &(t, e) in &pts {
        if e <= 0.0 {
            return Err(Error::NonpositiveEntropy { t, value: e });
        }
    }
    let n = pts.len() as f64;
    let (mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0);
    for &(t, e) in &pts {
        let y = e.ln();
        st += t;
        sy += y;
        stt += t * t;
        sty += t * y;
    }
    let denom = n * stt - st * st;
    let slope = (n * sty - st * sy) / denom;
    let intercept = (sy - slope * st) / n;
    let mean_y = sy / n;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for &(t, e) in &pts {
        let y = e.ln();
        let pred = intercept + slope * t;
        ss_res += (y - pred) * (y - pred);
        ss_tot += (y - mean_y) * (y - mean_y);
    }
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok((-slope, r2))
}
