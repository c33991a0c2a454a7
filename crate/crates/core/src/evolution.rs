//! Time integration of the first-order system
//! `∂t w1 = i ∂s^2 w2`, `∂t w2 = i(∂s^2 w1 - |w1|^-2 w1)`, spectral in `s`.
//!
//! In the variables `p = w1 + w2`, `m = w1 - w2` the linear part is the
//! diagonal rotation `p' = -i k^2 p`, `m' = i k^2 m`. Both schemes treat it
//! exactly (Lawson RK4) or by its Cayley transform (implicit midpoint); only
//! `N = |w1|^-2 w1 = 1 / conj(w1)` is evaluated on the grid.

use std::str::FromStr;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::standing::AssembledSolution;
use crate::transform::Grid1;
use crate::travel::TravelProfile;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Integrating-factor RK4; fourth order, not symmetric.
    Lawson,
    /// Implicit midpoint; second order, symmetric.
    ImplicitMidpoint,
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lawson" | "exponential" => Ok(Scheme::Lawson),
            "midpoint" | "implicit-midpoint" => Ok(Scheme::ImplicitMidpoint),
            _ => Err(Error::Parse(format!("unknown scheme {s:?} (expected lawson or midpoint)"))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Lawson => "lawson",
            Scheme::ImplicitMidpoint => "implicit-midpoint",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvolveConfig {
    /// Upper bound on the step; each call uses the largest `T/n` below it.
    pub dt: f64,
    pub scheme: Scheme,
    /// Abort when `min|w1| < collision_guard * |mean w1|`.
    pub collision_guard: f64,
    pub oversample: usize,
    /// Record a diagnostics sample every this many steps.
    pub sample_every: usize,
    pub implicit_tol: f64,
    pub implicit_max_iter: usize,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            dt: 4.0 * std::f64::consts::PI / 4096.0,
            scheme: Scheme::Lawson,
            collision_guard: 0.1,
            oversample: 2,
            sample_every: 64,
            implicit_tol: 1e-15,
            implicit_max_iter: 100,
        }
    }
}

impl EvolveConfig {
    /// Default settings with `dt = period / 4096`.
    pub fn for_period(period: f64) -> Self {
        Self { dt: period / 4096.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.collision_guard > 0.0 && self.collision_guard < 1.0) {
            return Err(Error::InvalidConfig("collision guard must lie in (0, 1)".into()));
        }
        if self.oversample < 1 || self.sample_every == 0 {
            return Err(Error::InvalidConfig("oversample and sample cadence must be at least 1".into()));
        }
        Ok(())
    }
}

/// Spatial coefficients of `w1` and `w2`, `w[k + modes]`, at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionState {
    pub t: f64,
    pub modes: usize,
    pub w1: Vec<Complex64>,
    pub w2: Vec<Complex64>,
}

impl EvolutionState {
    pub fn new(modes: usize, w1: Vec<Complex64>, w2: Vec<Complex64>) -> Result<Self> {
        let n = 2 * modes + 1;
        if w1.len() != n || w2.len() != n {
            return Err(Error::InvalidConfig(format!("state arrays must have {n} coefficients")));
        }
        Ok(Self { t: 0.0, modes, w1, w2 })
    }

    /// Straight pair `w1 = a`, `w2 = 0`.
    pub fn straight(a: f64, modes: usize) -> Self {
        let mut w1 = vec![ZERO; 2 * modes + 1];
        w1[modes] = Complex64::new(a, 0.0);
        Self { t: 0.0, modes, w1, w2: vec![ZERO; 2 * modes + 1] }
    }

    /// `w1 = a (1 + eps cos(k s))`, `w2 = 0`.
    pub fn cosine_perturbation(a: f64, eps: f64, k: usize, modes: usize) -> Self {
        let mut s = Self::straight(a, modes);
        s.w1[modes + k] += a * eps / 2.0;
        s.w1[modes - k] += a * eps / 2.0;
        s
    }

    pub fn w1_coeff(&self, k: i64) -> Complex64 {
        coeff(&self.w1, self.modes, k)
    }

    pub fn w2_coeff(&self, k: i64) -> Complex64 {
        coeff(&self.w2, self.modes, k)
    }

    /// Coefficient of `cos(k s)`-type content in the x component of `w1`.
    pub fn x_coeff(&self, k: i64) -> Complex64 {
        (self.w1_coeff(k) + self.w1_coeff(-k).conj()) * 0.5
    }

    pub fn mean_w1(&self) -> Complex64 {
        self.w1[self.modes]
    }

    pub fn mean_w2(&self) -> Complex64 {
        self.w2[self.modes]
    }

    /// `sup_k |k^2 w2_k|`, the size of `∂t w1`.
    pub fn w1_velocity(&self) -> f64 {
        let m = self.modes as i64;
        (-m..=m).map(|k| (k * k) as f64 * self.w2_coeff(k).norm()).fold(0.0, f64::max)
    }

    /// Relative distance `‖self - other‖ / ‖other‖` over both fields.
    pub fn relative_distance(&self, other: &Self) -> f64 {
        let diff: f64 = self.w1.iter().zip(&other.w1).chain(self.w2.iter().zip(&other.w2)).map(|(a, b)| (a - b).norm_sqr()).sum();
        let size: f64 = other.w1.iter().chain(&other.w2).map(|c| c.norm_sqr()).sum();
        (diff / size).sqrt()
    }
}

fn coeff(v: &[Complex64], modes: usize, k: i64) -> Complex64 {
    let m = modes as i64;
    if k.abs() > m {
        ZERO
    } else {
        v[(k + m) as usize]
    }
}

/// Initial data `t = 0` of an assembled standing wave.
pub fn init_from_assembled(sol: &AssembledSolution, cfg: &EvolveConfig) -> Result<EvolutionState> {
    let modes = sol.w1.k_max();
    let state = EvolutionState { t: 0.0, modes, w1: sol.w1_at(0.0), w2: sol.w2_at(0.0) };
    check_collision(&state, cfg)?;
    Ok(state)
}

/// Initial data of the traveling wave `w1 = a + U(s)`; `∂t w1 = ν U'`
/// fixes `w2_k = -ν U_k / k` up to its mean, which is set to zero.
pub fn init_from_profile(profile: &TravelProfile, modes: usize, cfg: &EvolveConfig) -> Result<EvolutionState> {
    let m = modes as i64;
    let w1 = (-m..=m).map(|k| if k == 0 { Complex64::new(profile.a, 0.0) } else { profile.coeff(k) }).collect();
    let w2 = (-m..=m).map(|k| if k == 0 { ZERO } else { profile.coeff(k) * (-profile.nu / k as f64) }).collect();
    let state = EvolutionState { t: 0.0, modes, w1, w2 };
    check_collision(&state, cfg)?;
    Ok(state)
}

fn check_collision(state: &EvolutionState, cfg: &EvolveConfig) -> Result<()> {
    let grid = Grid1::for_modes(state.modes, cfg.oversample);
    let min = grid.synthesize(&state.w1).iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    let guard = cfg.collision_guard * state.mean_w1().norm();
    if !(min >= guard) {
        return Err(Error::CollisionDetected { t: state.t, min_abs: min, guard });
    }
    Ok(())
}

/// One row of the diagnostics time series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub mean_w1_re: f64,
    pub mean_w1_im: f64,
    pub mean_w2_re: f64,
    pub mean_w2_im: f64,
    /// Instantaneous `d/dt mean(w2) = -i mean(|w1|^-2 w1)`.
    pub drift_rate_re: f64,
    pub drift_rate_im: f64,
    pub min_abs_w1: f64,
    /// `Σ_{|k| > modes/2} |w1_k|^2`.
    pub tail_energy: f64,
    /// `Σ k^2 (|w1_k|^2 + |w2_k|^2) + mean_s log|w1|^2`, conserved by the flow.
    pub hamiltonian: f64,
}

struct Stepper<'a> {
    cfg: &'a EvolveConfig,
    modes: usize,
    grid: Grid1,
    k2: Vec<f64>,
}

/// Grid evaluation of `w1`: `(N_k for |k| <= modes, min|w1|, mean log|w1|^2)`.
struct Nonlinear {
    n: Vec<Complex64>,
    min_abs: f64,
    mean_log: f64,
}

impl<'a> Stepper<'a> {
    fn new(modes: usize, cfg: &'a EvolveConfig) -> Self {
        let m = modes as i64;
        Self { cfg, modes, grid: Grid1::for_modes(modes, cfg.oversample), k2: (-m..=m).map(|k| (k * k) as f64).collect() }
    }

    fn nonlinear(&self, w1: &[Complex64]) -> Nonlinear {
        let values = self.grid.synthesize(w1);
        let min_abs = values.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        let mean_log = values.iter().map(|z| z.norm_sqr().ln()).sum::<f64>() / values.len() as f64;
        let inv: Vec<Complex64> = values.iter().map(|z| z.conj().inv()).collect();
        let n = self.grid.analyze(inv, self.modes);
        Nonlinear { n, min_abs, mean_log }
    }

    fn guard(&self, state: &EvolutionState, min_abs: f64) -> Result<()> {
        let guard = self.cfg.collision_guard * state.mean_w1().norm();
        if !(min_abs >= guard) {
            return Err(Error::CollisionDetected { t: state.t, min_abs, guard });
        }
        Ok(())
    }

    fn sample(&self, state: &EvolutionState) -> Sample {
        let nl = self.nonlinear(&state.w1);
        let m = self.modes as i64;
        let tail = (-m..=m).filter(|k| 2 * k.abs() > m).map(|k| state.w1_coeff(k).norm_sqr()).sum();
        let quad: f64 = self.k2.iter().zip(state.w1.iter().zip(&state.w2)).map(|(k2, (a, b))| k2 * (a.norm_sqr() + b.norm_sqr())).sum();
        let rate = -I * nl.n[self.modes];
        Sample {
            t: state.t,
            mean_w1_re: state.mean_w1().re,
            mean_w1_im: state.mean_w1().im,
            mean_w2_re: state.mean_w2().re,
            mean_w2_im: state.mean_w2().im,
            drift_rate_re: rate.re,
            drift_rate_im: rate.im,
            min_abs_w1: nl.min_abs,
            tail_energy: tail,
            hamiltonian: quad + nl.mean_log,
        }
    }

    /// `(p, m)` from `(w1, w2)`.
    fn split(state: &EvolutionState) -> (Vec<Complex64>, Vec<Complex64>) {
        let p = state.w1.iter().zip(&state.w2).map(|(a, b)| a + b).collect();
        let m = state.w1.iter().zip(&state.w2).map(|(a, b)| a - b).collect();
        (p, m)
    }

    fn join(p: &[Complex64], m: &[Complex64], state: &mut EvolutionState) {
        for i in 0..p.len() {
            state.w1[i] = (p[i] + m[i]) * 0.5;
            state.w2[i] = (p[i] - m[i]) * 0.5;
        }
    }

    fn w1_of(p: &[Complex64], m: &[Complex64]) -> Vec<Complex64> {
        p.iter().zip(m).map(|(a, b)| (a + b) * 0.5).collect()
    }

    fn step(&self, state: &mut EvolutionState, h: f64) -> Result<()> {
        match self.cfg.scheme {
            Scheme::Lawson => self.lawson(state, h),
            Scheme::ImplicitMidpoint => self.midpoint(state, h),
        }
    }

    /// Nonlinear part of `(p', m')` is `(-i N, i N)`; only `N` is returned.
    fn lawson(&self, state: &mut EvolutionState, h: f64) -> Result<()> {
        let (p0, m0) = Self::split(state);
        // Rotations over h/2 and h: p by e^{-i k^2 τ}, m by its conjugate.
        let rot = |tau: f64| -> Vec<Complex64> { self.k2.iter().map(|k2| Complex64::from_polar(1.0, -k2 * tau)).collect() };
        let (e_half, e_full) = (rot(0.5 * h), rot(h));
        let eval = |p: &[Complex64], m: &[Complex64]| -> Result<Vec<Complex64>> {
            let nl = self.nonlinear(&Self::w1_of(p, m));
            self.guard(state, nl.min_abs)?;
            Ok(nl.n)
        };
        let n = p0.len();
        let stage = |e: &[Complex64], base_p: &[Complex64], base_m: &[Complex64], f: &[Complex64], c: f64| {
            let p: Vec<Complex64> = (0..n).map(|i| e[i] * (base_p[i] - I * f[i] * c)).collect();
            let m: Vec<Complex64> = (0..n).map(|i| e[i].conj() * (base_m[i] + I * f[i] * c)).collect();
            (p, m)
        };
        let k1 = eval(&p0, &m0)?;
        let (p, m) = stage(&e_half, &p0, &m0, &k1, 0.5 * h);
        let k2 = eval(&p, &m)?;
        let (p, m) = (
            (0..n).map(|i| e_half[i] * p0[i] - I * k2[i] * (0.5 * h)).collect::<Vec<_>>(),
            (0..n).map(|i| e_half[i].conj() * m0[i] + I * k2[i] * (0.5 * h)).collect::<Vec<_>>(),
        );
        let k3 = eval(&p, &m)?;
        let (p, m) = (
            (0..n).map(|i| e_full[i] * p0[i] - I * e_half[i] * k3[i] * h).collect::<Vec<_>>(),
            (0..n).map(|i| e_full[i].conj() * m0[i] + I * e_half[i].conj() * k3[i] * h).collect::<Vec<_>>(),
        );
        let k4 = eval(&p, &m)?;
        let mut p1 = vec![ZERO; n];
        let mut m1 = vec![ZERO; n];
        for i in 0..n {
            let fp = e_full[i] * k1[i] + e_half[i] * (k2[i] + k3[i]) * 2.0 + k4[i];
            let fm = e_full[i].conj() * k1[i] + e_half[i].conj() * (k2[i] + k3[i]) * 2.0 + k4[i];
            p1[i] = e_full[i] * p0[i] - I * fp * (h / 6.0);
            m1[i] = e_full[i].conj() * m0[i] + I * fm * (h / 6.0);
        }
        Self::join(&p1, &m1, state);
        Ok(())
    }

    fn midpoint(&self, state: &mut EvolutionState, h: f64) -> Result<()> {
        let (p0, m0) = Self::split(state);
        let n = p0.len();
        let w0 = state.w1.clone();
        let theta: Vec<Complex64> = self.k2.iter().map(|k2| I * (0.5 * h * k2)).collect();
        let mut w1_new = w0.clone();
        let mut p1 = p0.clone();
        let mut m1 = m0.clone();
        for _ in 0..self.cfg.implicit_max_iter {
            let mid: Vec<Complex64> = w0.iter().zip(&w1_new).map(|(a, b)| (a + b) * 0.5).collect();
            let nl = self.nonlinear(&mid);
            self.guard(state, nl.min_abs)?;
            for i in 0..n {
                let (one, th) = (Complex64::new(1.0, 0.0), theta[i]);
                p1[i] = ((one - th) * p0[i] - I * nl.n[i] * h) / (one + th);
                m1[i] = ((one + th) * m0[i] + I * nl.n[i] * h) / (one - th);
            }
            let next = Self::w1_of(&p1, &m1);
            let change = next.iter().zip(&w1_new).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            let scale = next.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0);
            w1_new = next;
            if change <= self.cfg.implicit_tol * scale {
                Self::join(&p1, &m1, state);
                return Ok(());
            }
        }
        Err(Error::StepRejected { t: state.t, reason: format!("midpoint fixed point did not converge in {} iterations", self.cfg.implicit_max_iter) })
    }
}

/// Advances `state` by `t_span` (negative integrates backwards) and returns the
/// diagnostics time series, first and last samples included.
pub fn integrate(state: &EvolutionState, t_span: f64, cfg: &EvolveConfig) -> Result<(EvolutionState, Vec<Sample>)> {
    let mut samples = Vec::new();
    let stepper = Stepper::new(state.modes, cfg);
    samples.push(stepper.sample(state));
    let mut count = 0usize;
    let end = integrate_observed(state, t_span, cfg, |s| {
        count += 1;
        if count % cfg.sample_every == 0 {
            samples.push(stepper.sample(s));
        }
    })?;
    if count % cfg.sample_every != 0 {
        samples.push(stepper.sample(&end));
    }
    Ok((end, samples))
}

/// Like [`integrate`] but calls `observe` after every step instead of sampling.
pub fn integrate_observed(state: &EvolutionState, t_span: f64, cfg: &EvolveConfig, mut observe: impl FnMut(&EvolutionState)) -> Result<EvolutionState> {
    cfg.validate()?;
    if !(t_span.is_finite() && t_span != 0.0) {
        return Err(Error::InvalidConfig(format!("integration span must be finite and nonzero, got {t_span}")));
    }
    let steps = (t_span.abs() / cfg.dt).ceil().max(1.0) as usize;
    let h = t_span / steps as f64;
    let stepper = Stepper::new(state.modes, cfg);
    let mut s = state.clone();
    let t0 = s.t;
    for n in 1..=steps {
        stepper.step(&mut s, h)?;
        s.t = t0 + n as f64 * h;
        observe(&s);
    }
    Ok(s)
}

/// Relative error after integrating forward by `t_span` and back again.
pub fn reversibility_check(state: &EvolutionState, t_span: f64, cfg: &EvolveConfig) -> Result<f64> {
    let forward = integrate_observed(state, t_span, cfg, |_| {})?;
    let back = integrate_observed(&forward, -t_span, cfg, |_| {})?;
    Ok(back.relative_distance(state))
}

/// Largest `L2` distance, over `checks` equally spaced times in `[0, t_span]`,
/// between the evolved `w1` and the translated profile `a + U(s + νt)`.
pub fn translation_error(profile: &TravelProfile, modes: usize, t_span: f64, checks: usize, cfg: &EvolveConfig) -> Result<f64> {
    let mut state = init_from_profile(profile, modes, cfg)?;
    let m = modes as i64;
    let mut worst: f64 = 0.0;
    for _ in 0..checks.max(1) {
        state = integrate_observed(&state, t_span / checks.max(1) as f64, cfg, |_| {})?;
        let err: f64 = (-m..=m)
            .map(|k| {
                let expect = if k == 0 {
                    Complex64::new(profile.a, 0.0)
                } else {
                    profile.coeff(k) * Complex64::from_polar(1.0, k as f64 * profile.nu * state.t)
                };
                (state.w1_coeff(k) - expect).norm_sqr()
            })
            .sum();
        worst = worst.max(err.sqrt());
    }
    Ok(worst)
}
