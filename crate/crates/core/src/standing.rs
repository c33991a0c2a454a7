//! Lyapunov–Schmidt solver for standing waves.
//!
//! The perturbation `u` of `w1 = a + u(νt, s)` solves `L u + ∂s^2 g(u) = 0`
//! where `L` is diagonal with the lattice eigenvalues. The range part is the
//! fixed point of `K(w) = -(PLP)^-1 ∂s^2 g(v + w)` (plain Picard iteration),
//! and the scalar bifurcation equation on the one-dimensional kernel of
//! `Fix(S)` is solved for `a` by secant iteration.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fourier::{ComplexField, FourierField, SymmetryClass};
use crate::lattice::{BifurcationSite, LatticeSite, RationalFrequency};
use crate::par;
use crate::transform::{Grid2, Spectrum2};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Iterations without halving the best step before a stall is declared.
const STALL_WINDOW: usize = 8;
/// How far above `tol` a stalled iteration may sit and still count as converged.
const ROUNDOFF_SLACK: f64 = 10.0;

/// Numerical controls for the range contraction and the root finder in `a`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Sobolev index of the norm used for steps and residuals.
    pub s: f64,
    /// Picard stopping tolerance on `‖w_{n+1} - w_n‖_{H^s}`.
    pub tol: f64,
    pub max_iter: usize,
    pub oversample: usize,
    /// Analyticity guard: `sup|u| <= guard * a`.
    pub guard: f64,
    pub j_max: usize,
    pub k_max: usize,
    /// Stopping tolerance on `|B(b, a)|`.
    pub secant_tol: f64,
    pub secant_max_iter: usize,
    /// Relative offset of the second secant iterate.
    pub secant_offset: f64,
    /// Step halvings allowed per grid interval during continuation.
    pub max_halvings: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            s: 6.0,
            tol: 1e-12,
            max_iter: 200,
            oversample: 2,
            guard: 0.9,
            j_max: 64,
            k_max: 64,
            secant_tol: 1e-12,
            secant_max_iter: 40,
            secant_offset: 1e-4,
            max_halvings: 6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.s >= 6.0) {
            return bad("Sobolev index s must be at least 6");
        }
        if !(self.tol > 0.0) || !(self.secant_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.oversample < 2 {
            return bad("oversample must be at least 2");
        }
        if !(self.guard > 0.0 && self.guard < 1.0) {
            return bad("guard must lie in (0, 1)");
        }
        if self.j_max == 0 || self.k_max == 0 || self.max_iter == 0 {
            return bad("truncation and max_iter must be positive");
        }
        Ok(())
    }
}

fn sign(l: u8) -> f64 {
    if l == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Exact eigenvalues over a box, as `f64`, with the exact zero pattern.
struct Spectrum {
    j_max: usize,
    k_max: usize,
    lambda0: Vec<[f64; 2]>,
    zero: Vec<[bool; 2]>,
}

impl Spectrum {
    fn new(freq: RationalFrequency, a2inv: &BigRational, j_max: usize, k_max: usize) -> Self {
        // λ = N / D with N an integer; D = lcm(q^2, den(a2inv)).
        let q2 = BigInt::from(freq.q()).pow(2);
        let d = q2.lcm(a2inv.denom());
        let aa = BigInt::from(freq.p()).pow(2) * (&d / &q2);
        let bb = a2inv.numer() * (&d / a2inv.denom());
        let df = BigRational::from_integer(d.clone());
        let km = k_max as i64;
        let rows = par::map_range(2 * j_max + 1, |ij| {
            let j = ij as i64 - j_max as i64;
            (-km..=km)
                .map(|k| {
                    let k2 = BigInt::from(k * k);
                    let base = &aa * BigInt::from(j * j) - &d * &k2 * &k2;
                    let mixed = &bb * &k2;
                    let n = [&base + &mixed, &base - &mixed];
                    let f = |n: &BigInt| (BigRational::from_integer(n.clone()) / &df).to_f64().unwrap_or(f64::NAN);
                    ([f(&n[0]), f(&n[1])], [n[0].is_zero(), n[1].is_zero()])
                })
                .collect::<Vec<_>>()
        });
        let (lambda0, zero) = rows.into_iter().flatten().unzip();
        Self { j_max, k_max, lambda0, zero }
    }

    #[inline]
    fn idx(&self, j: i64, k: i64) -> usize {
        (j + self.j_max as i64) as usize * (2 * self.k_max + 1) + (k + self.k_max as i64) as usize
    }
}

/// Applies `L` site by site: `λ_{j,k,l}` times the coefficient.
pub fn apply_l(u: &FourierField, freq: RationalFrequency, a2inv: &BigRational) -> FourierField {
    let sp = Spectrum::new(freq, a2inv, u.j_max(), u.k_max());
    u.map_sites(|j, k, l, c| c * sp.lambda0[sp.idx(j, k)][l as usize])
}

/// `(PLP)^-1 ∂s^2`: multiplies non-kernel coefficients by `-k^2 / λ` and
/// zeroes kernel sites and the mean.
pub fn apply_inverse_plp_ds2(
    u: &FourierField,
    freq: RationalFrequency,
    a2inv: &BigRational,
    kernel: &[LatticeSite],
) -> Result<FourierField> {
    let sp = Spectrum::new(freq, a2inv, u.j_max(), u.k_max());
    check_kernel(&sp, kernel)?;
    Ok(u.map_sites(|j, k, l, c| {
        let i = sp.idx(j, k);
        if (j == 0 && k == 0) || sp.zero[i][l as usize] {
            return ZERO;
        }
        c * (-((k * k) as f64) / sp.lambda0[i][l as usize])
    }))
}

fn check_kernel(sp: &Spectrum, kernel: &[LatticeSite]) -> Result<()> {
    let (jm, km) = (sp.j_max as i64, sp.k_max as i64);
    for j in -jm..=jm {
        for k in -km..=km {
            if j == 0 && k == 0 {
                continue;
            }
            for l in 0..2u8 {
                let site = LatticeSite::new(j, k, l);
                if sp.zero[sp.idx(j, k)][l as usize] && !kernel.contains(&site) {
                    return Err(Error::SingularSite(site));
                }
            }
        }
    }
    Ok(())
}

/// Converged range equation at `(b, a)`.
#[derive(Clone, Debug)]
pub struct RangeSolution {
    pub w: FourierField,
    pub iterations: usize,
    pub last_step: f64,
    /// Stopped on a roundoff limit cycle within `10 tol` instead of below `tol`.
    pub roundoff_limited: bool,
    /// `‖P(L w + ∂s^2 g(v + w))‖_{H^(s-4)}`: `L` maps `H^s` to `H^(s-4)`.
    pub range_residual: f64,
    /// Realified `g(v + w)`, kept for the bifurcation equation.
    pub g: FourierField,
}

/// One standing-wave solution on the branch.
#[derive(Clone, Debug)]
pub struct BranchPoint {
    pub b: f64,
    pub a: f64,
    pub site: BifurcationSite,
    pub v: FourierField,
    pub w: FourierField,
    pub range_residual: f64,
    /// `‖L u + ∂s^2 g(u)‖_{H^(s-4)}` over the truncation box, kernel modes included.
    pub full_residual: f64,
    /// Picard iterations of the final range solve.
    pub iterations: usize,
    pub roundoff_limited: bool,
    /// Evaluations of `B` spent by the root finder in `a`.
    pub root_evaluations: usize,
    pub bifurcation_value: f64,
}

impl BranchPoint {
    /// The full perturbation `u = v + w`.
    pub fn u(&self) -> FourierField {
        self.v.add(&self.w).expect("v and w share a truncation")
    }
}

/// Fitted power laws along a branch.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FitDiagnostics {
    /// Slope of `log ‖w‖_{H^s}` against `log b`.
    pub w_exponent: Option<f64>,
    /// Slope of `log |a - a0|` against `log b`.
    pub a_exponent: Option<f64>,
    pub points_used: usize,
}

#[derive(Clone, Debug)]
pub struct Branch {
    pub site: BifurcationSite,
    pub points: Vec<BranchPoint>,
    pub fit: FitDiagnostics,
}

/// Least-squares slope of `log y` on `log x` over positive pairs.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Reusable solver state for one bifurcation site and configuration.
pub struct StandingSolver {
    site: BifurcationSite,
    cfg: SolverConfig,
    grid: Grid2,
    spectrum: Spectrum,
    a0_inv2: f64,
    sym: SymmetryClass,
}

impl StandingSolver {
    pub fn new(site: &BifurcationSite, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        if !site.nonresonant {
            return Err(Error::InvalidConfig(format!(
                "site ({},{},{}) at a^-2 = {} is resonant (witness {:?}); the kernel is not one-dimensional",
                site.j0,
                site.k0,
                site.l0,
                crate::lattice::fmt_rational(&site.a2inv),
                site.witness
            )));
        }
        if (cfg.j_max as u64) < site.j0 || (cfg.k_max as u64) < site.k0 {
            return Err(Error::InvalidConfig("truncation does not contain the kernel mode".into()));
        }
        let spectrum = Spectrum::new(site.freq, &site.a2inv, cfg.j_max, cfg.k_max);
        check_kernel(&spectrum, &site.kernel)?;
        Ok(Self {
            grid: Grid2::for_modes(cfg.j_max, cfg.k_max, cfg.oversample),
            a0_inv2: site.a2inv_f64(),
            sym: site.standing_symmetry(),
            site: site.clone(),
            cfg: cfg.clone(),
            spectrum,
        })
    }

    pub fn site(&self) -> &BifurcationSite {
        &self.site
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn a0(&self) -> f64 {
        self.site.a0()
    }

    /// `λ_{j,k,l}(a)` from the exact value at `a0`.
    #[inline]
    pub fn lambda(&self, j: i64, k: i64, l: u8, a: f64) -> f64 {
        let i = self.spectrum.idx(j, k);
        self.spectrum.lambda0[i][l as usize] + sign(l) * (a.powi(-2) - self.a0_inv2) * (k * k) as f64
    }

    fn is_kernel(&self, j: i64, k: i64, l: u8) -> bool {
        self.spectrum.zero[self.spectrum.idx(j, k)][l as usize]
    }

    /// `v = b e_l0 cos(j0 t) cos(k0 s)`.
    pub fn kernel_mode(&self, b: f64) -> FourierField {
        let mut v = FourierField::cosine_mode(
            self.cfg.j_max,
            self.cfg.k_max,
            self.site.j0 as i64,
            self.site.k0 as i64,
            self.site.l0,
            b,
        );
        v.symmetry = Some(self.sym);
        v
    }

    fn zero_field(&self) -> FourierField {
        let mut w = FourierField::zeros(self.cfg.j_max, self.cfg.k_max);
        w.symmetry = Some(self.sym);
        w
    }

    fn g_of(&self, u: &FourierField, a: f64) -> Result<FourierField> {
        u.eval_nonlinearity_on(&self.grid, a.powi(-2), self.cfg.guard)
    }

    /// `K(w)` given `g(v + w)`, projected onto `Fix(S)`.
    fn contraction_image(&self, g: &FourierField, a: f64) -> FourierField {
        g.map_sites(|j, k, l, c| {
            if (j == 0 && k == 0) || self.is_kernel(j, k, l) {
                return ZERO;
            }
            c * ((k * k) as f64 / self.lambda(j, k, l, a))
        })
        .project_symmetry(self.sym)
    }

    /// `Lu + ∂s^2 g` with `g = g(u)`, restricted to `P` when `range_only`.
    fn equation(&self, u: &FourierField, g: &FourierField, a: f64, range_only: bool) -> FourierField {
        let mut r = u.map_sites(|j, k, l, c| {
            if range_only && ((j == 0 && k == 0) || self.is_kernel(j, k, l)) {
                return ZERO;
            }
            c * self.lambda(j, k, l, a) - g.component(j, k, l) * (k * k) as f64
        });
        r.symmetry = None;
        r
    }

    /// Picard iteration for the range equation, from `warm` or from zero.
    pub fn solve_range(&self, b: f64, a: f64, warm: Option<&FourierField>) -> Result<RangeSolution> {
        if !(a > 0.0) {
            return Err(Error::InvalidConfig(format!("distance a = {a} must be positive")));
        }
        let v = self.kernel_mode(b);
        let mut w = match warm {
            Some(w) => {
                w.same_shape(&v)?;
                w.project_symmetry(self.sym)
            }
            None => self.zero_field(),
        };
        let s = self.cfg.s;
        let mut best = f64::INFINITY;
        let mut best_at = 0;
        let mut last_step = f64::INFINITY;
        for it in 1..=self.cfg.max_iter {
            let g = self.g_of(&v.add(&w)?, a)?;
            let next = self.contraction_image(&g, a);
            let step = next.sub(&w)?.sobolev_norm(s);
            w = next;
            last_step = step;
            if step < 0.5 * best {
                best_at = it;
            }
            best = best.min(step);
            // Below ~1e-12 in H^6 the iterates can settle into a roundoff
            // limit cycle; accept that when it is within a decade of `tol`.
            let stalled = it >= best_at + STALL_WINDOW && best < ROUNDOFF_SLACK * self.cfg.tol;
            if step < self.cfg.tol || stalled {
                let u = v.add(&w)?;
                let g = self.g_of(&u, a)?;
                let range_residual = self.equation(&u, &g, a, true).sobolev_norm(s - 4.0);
                return Ok(RangeSolution {
                    w,
                    iterations: it,
                    last_step: step,
                    roundoff_limited: step >= self.cfg.tol,
                    range_residual,
                    g,
                });
            }
            if !step.is_finite() || (it > 5 && step > 1e3 * best) {
                break;
            }
        }
        Err(Error::ContractionFailed { iterations: self.cfg.max_iter, last_step })
    }

    /// `B(b, a) = λ_{j0,k0,l0}(a) b + <∂s^2 g(v + w), φ> / <φ, φ>`.
    pub fn bifurcation_value(&self, b: f64, a: f64) -> Result<f64> {
        let sol = self.solve_range(b, a, None)?;
        Ok(self.bvalue_from(b, a, &sol.g))
    }

    fn bvalue_from(&self, b: f64, a: f64, g: &FourierField) -> f64 {
        let (j0, k0, l0) = (self.site.j0 as i64, self.site.k0 as i64, self.site.l0);
        let mut proj = 0.0;
        for sj in [-1, 1] {
            for sk in [-1, 1] {
                proj += g.component(sj * j0, sk * k0, l0).re;
            }
        }
        self.lambda(j0, k0, l0, a) * b - (k0 * k0) as f64 * proj
    }

    fn slope_in_a(&self, b: f64, a: f64) -> f64 {
        let k0 = self.site.k0 as f64;
        sign(self.site.l0) * (-2.0 * a.powi(-3)) * k0 * k0 * b
    }

    /// Trivial point `b = 0`, `a = a0`.
    pub fn trivial_point(&self) -> BranchPoint {
        BranchPoint {
            b: 0.0,
            a: self.a0(),
            site: self.site.clone(),
            v: self.kernel_mode(0.0),
            w: self.zero_field(),
            range_residual: 0.0,
            full_residual: 0.0,
            iterations: 1,
            roundoff_limited: false,
            root_evaluations: 0,
            bifurcation_value: 0.0,
        }
    }

    /// Solves `B(b, a) = 0` for `a` by secant iteration from `a_init`.
    pub fn solve_branch_point(&self, b: f64, a_init: f64, warm: Option<&FourierField>) -> Result<BranchPoint> {
        if b == 0.0 {
            return Ok(self.trivial_point());
        }
        if b < 0.0 {
            // Shifting time by π/j0 maps the branch at b onto the branch at -b.
            let mut pt = self.solve_branch_point(-b, a_init, warm.map(|w| self.half_shift(w)).as_ref())?;
            pt.b = b;
            pt.v = self.kernel_mode(b);
            pt.w = self.half_shift(&pt.w);
            pt.bifurcation_value = -pt.bifurcation_value;
            return Ok(pt);
        }
        let tol = self.cfg.secant_tol;
        let mut evals = 1;
        let mut a_prev = a_init;
        let mut sol_prev = self.solve_range(b, a_prev, warm)?;
        let mut b_prev = self.bvalue_from(b, a_prev, &sol_prev.g);
        if b_prev.abs() < tol {
            return self.finish(b, a_prev, sol_prev, b_prev, evals);
        }
        let mut a_cur = a_init * (1.0 + self.cfg.secant_offset);
        let mut sol_cur = self.solve_range(b, a_cur, Some(&sol_prev.w))?;
        let mut b_cur = self.bvalue_from(b, a_cur, &sol_cur.g);
        evals += 1;
        while evals < self.cfg.secant_max_iter {
            if b_cur.abs() < tol {
                return self.finish(b, a_cur, sol_cur, b_cur, evals);
            }
            let da = a_cur - a_prev;
            let db = b_cur - b_prev;
            let slope = if da != 0.0 && db != 0.0 && (db / da).is_finite() {
                db / da
            } else {
                self.slope_in_a(b, a_cur)
            };
            let a_next = a_cur - b_cur / slope;
            if !a_next.is_finite() || a_next <= 0.0 {
                return Err(Error::RootNotFound { b, reason: format!("secant left the admissible range (a = {a_next})") });
            }
            if a_next == a_cur {
                // No representable progress; accept only if B is at its noise floor.
                if b_cur.abs() < 1e3 * tol {
                    return self.finish(b, a_cur, sol_cur, b_cur, evals);
                }
                return Err(Error::RootNotFound { b, reason: format!("secant stalled with |B| = {:.3e}", b_cur.abs()) });
            }
            let sol_next = self.solve_range(b, a_next, Some(&sol_cur.w))?;
            let b_next = self.bvalue_from(b, a_next, &sol_next.g);
            evals += 1;
            a_prev = a_cur;
            b_prev = b_cur;
            sol_prev = sol_cur;
            a_cur = a_next;
            b_cur = b_next;
            sol_cur = sol_next;
        }
        let _ = sol_prev;
        Err(Error::RootNotFound { b, reason: format!("no convergence in {evals} evaluations, |B| = {:.3e}", b_cur.abs()) })
    }

    fn finish(&self, b: f64, a: f64, sol: RangeSolution, bval: f64, evals: usize) -> Result<BranchPoint> {
        let v = self.kernel_mode(b);
        let u = v.add(&sol.w)?;
        let full_residual = self.equation(&u, &sol.g, a, false).sobolev_norm(self.cfg.s - 4.0);
        Ok(BranchPoint {
            b,
            a,
            site: self.site.clone(),
            v,
            w: sol.w,
            range_residual: sol.range_residual,
            full_residual,
            iterations: sol.iterations,
            roundoff_limited: sol.roundoff_limited,
            root_evaluations: evals,
            bifurcation_value: bval,
        })
    }

    /// Coefficients multiplied by `(-1)^(j/j0)`: the time shift by `π/j0`.
    fn half_shift(&self, w: &FourierField) -> FourierField {
        let j0 = self.site.j0 as i64;
        w.map_sites(|j, _, _, c| if (j / j0).rem_euclid(2) == 1 && j % j0 == 0 { -c } else { c })
    }

    /// Warm-started continuation over `b_grid` (which must start at 0).
    pub fn continue_branch(&self, b_grid: &[f64]) -> Result<Branch> {
        if b_grid.first() != Some(&0.0) {
            return Err(Error::InvalidConfig("b grid must start at 0".into()));
        }
        if b_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidConfig("b grid must be strictly increasing".into()));
        }
        let mut points = vec![self.trivial_point()];
        for &target in &b_grid[1..] {
            let mut halvings = 0;
            let mut try_b = target;
            while points.last().map(|p| p.b).unwrap_or(0.0) < target {
                let prev = points.last().expect("branch starts with the trivial point");
                let (a_pred, w_pred) = self.predict(prev, try_b);
                match self.solve_branch_point(try_b, a_pred, w_pred.as_ref()) {
                    Ok(pt) => {
                        points.push(pt);
                        try_b = target;
                    }
                    Err(e) if halvings < self.cfg.max_halvings && !matches!(e, Error::InvalidConfig(_)) => {
                        halvings += 1;
                        try_b = prev.b + 0.5 * (try_b - prev.b);
                    }
                    Err(e) => {
                        let b_reached = prev.b;
                        let branch = self.branch_from(points);
                        return Err(Error::BranchTruncated { b_reached, branch: Box::new(branch), cause: Box::new(e) });
                    }
                }
            }
        }
        Ok(self.branch_from(points))
    }

    // Quadratic predictor: a - a0 and w both scale like b^2.
    fn predict(&self, prev: &BranchPoint, b: f64) -> (f64, Option<FourierField>) {
        if prev.b == 0.0 {
            return (self.a0(), None);
        }
        let r = (b / prev.b).powi(2);
        (self.a0() + (prev.a - self.a0()) * r, Some(prev.w.scale(r)))
    }

    fn branch_from(&self, points: Vec<BranchPoint>) -> Branch {
        let s = self.cfg.s;
        let bs: Vec<f64> = points.iter().map(|p| p.b).collect();
        let ws: Vec<f64> = points.iter().map(|p| p.w.sobolev_norm(s)).collect();
        let das: Vec<f64> = points.iter().map(|p| (p.a - self.a0()).abs()).collect();
        let fit = FitDiagnostics {
            w_exponent: loglog_slope(&bs, &ws),
            a_exponent: loglog_slope(&bs, &das),
            points_used: bs.iter().filter(|b| **b > 0.0).count(),
        };
        Branch { site: self.site.clone(), points, fit }
    }

    /// Physical fields reconstructed from a converged point.
    pub fn assemble(&self, pt: &BranchPoint) -> Result<AssembledSolution> {
        assemble_with(pt, self.cfg.oversample, 1.0 - self.cfg.guard)
    }
}

/// Range equation at `(b, a)` (see [`StandingSolver::solve_range`]).
pub fn solve_range(b: f64, a: f64, site: &BifurcationSite, cfg: &SolverConfig) -> Result<RangeSolution> {
    StandingSolver::new(site, cfg)?.solve_range(b, a, None)
}

pub fn bifurcation_value(b: f64, a: f64, site: &BifurcationSite, cfg: &SolverConfig) -> Result<f64> {
    StandingSolver::new(site, cfg)?.bifurcation_value(b, a)
}

pub fn solve_branch_point(b: f64, a_init: f64, site: &BifurcationSite, cfg: &SolverConfig) -> Result<BranchPoint> {
    StandingSolver::new(site, cfg)?.solve_branch_point(b, a_init, None)
}

pub fn continue_branch(site: &BifurcationSite, b_grid: &[f64], cfg: &SolverConfig) -> Result<Branch> {
    StandingSolver::new(site, cfg)?.continue_branch(b_grid)
}

/// Pointwise defects of the symmetry identities of `w1`, as sup norms on a grid.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub grid: usize,
    /// `w1(t,s) - w1(-t,s)`.
    pub time_reversal: f64,
    /// `w1(t,s) - w1(t,-s)`.
    pub space_reversal: f64,
    /// `w1(t,s) - w1(t, s + 2π/k0)`.
    pub space_period: f64,
    /// `w1(t,s) - conj w1(t + l0 q π / p, s)`.
    pub conjugation_shift: f64,
    /// `x(t + qπ/p, s) - x(t,s)`; only meaningful for `l0 = 1`.
    pub half_period_x: f64,
    /// `y(t + qπ/p, s) + y(t,s)`; only meaningful for `l0 = 1`.
    pub half_period_y: f64,
}

impl SymmetryReport {
    pub fn max_defect(&self) -> f64 {
        [
            self.time_reversal,
            self.space_reversal,
            self.space_period,
            self.conjugation_shift,
            self.half_period_x,
            self.half_period_y,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Evaluates the symmetry identities of the time-rescaled field `w1` on an
/// `n x n` grid. Time shifts by `qπ/p` are shifts by `π` in the rescaled time.
pub fn symmetry_report(w1: &ComplexField, k0: usize, l0: u8, n: usize) -> SymmetryReport {
    let grid = Grid2::new(n, n);
    let sup = |f: &dyn Fn(i64, i64) -> Complex64| {
        let field = ComplexField::from_fn(w1.j_max(), w1.k_max(), f);
        field.sup_on(&grid)
    };
    let parity = |j: i64| if j.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let period = 2.0 * std::f64::consts::PI / k0 as f64;
    let x = |j: i64, k: i64| (w1.get(j, k) + w1.get(-j, -k).conj()) * 0.5;
    let y = |j: i64, k: i64| (w1.get(j, k) - w1.get(-j, -k).conj()) * Complex64::new(0.0, -0.5);
    let mut r = SymmetryReport {
        grid: n,
        time_reversal: sup(&|j, k| w1.get(j, k) - w1.get(-j, k)),
        space_reversal: sup(&|j, k| w1.get(j, k) - w1.get(j, -k)),
        space_period: sup(&|j, k| w1.get(j, k) * (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, k as f64 * period))),
        conjugation_shift: sup(&|j, k| {
            let shift = if l0 == 1 { parity(j) } else { 1.0 };
            w1.get(j, k) - w1.get(-j, -k).conj() * shift
        }),
        ..Default::default()
    };
    if l0 == 1 {
        r.half_period_x = sup(&|j, k| x(j, k) * (parity(j) - 1.0));
        r.half_period_y = sup(&|j, k| y(j, k) * (parity(j) + 1.0));
    }
    r
}

/// `w1(t,s) = a + u(νt, s)` and `w2(t,s) = c t + periodic`, both stored as
/// coefficients in the rescaled time `τ = νt`.
#[derive(Clone, Debug)]
pub struct AssembledSolution {
    pub a: f64,
    pub b: f64,
    pub freq: RationalFrequency,
    pub j0: usize,
    pub k0: usize,
    pub l0: u8,
    pub w1: ComplexField,
    /// Linear-in-time part of `w2`.
    pub drift: Complex64,
    pub w2_periodic: ComplexField,
    /// `max_{k != 0} |t-mean of ∂t w2 at mode k|`; zero for an exact solution.
    pub drift_nonuniformity: f64,
    pub min_abs_w1: f64,
    pub symmetry: SymmetryReport,
}

impl AssembledSolution {
    pub fn nu(&self) -> f64 {
        self.freq.to_f64()
    }

    /// Period `2π q / p` in physical time.
    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.nu()
    }

    /// Spatial coefficients of `w1(t, ·)` for `|k| <= k_max`.
    pub fn w1_at(&self, t: f64) -> Vec<Complex64> {
        time_slice(&self.w1, self.nu() * t)
    }

    /// Spatial coefficients of `w2(t, ·)`.
    pub fn w2_at(&self, t: f64) -> Vec<Complex64> {
        let mut c = time_slice(&self.w2_periodic, self.nu() * t);
        let km = self.w2_periodic.k_max();
        c[km] += self.drift * t;
        c
    }
}

fn time_slice(f: &ComplexField, tau: f64) -> Vec<Complex64> {
    let (jm, km) = (f.j_max() as i64, f.k_max() as i64);
    (-km..=km)
        .map(|k| (-jm..=jm).map(|j| f.get(j, k) * Complex64::from_polar(1.0, j as f64 * tau)).sum())
        .collect()
}

pub fn assemble_solution(pt: &BranchPoint, cfg: &SolverConfig) -> Result<AssembledSolution> {
    assemble_with(pt, cfg.oversample, 1.0 - cfg.guard)
}

/// Assembles a stored perturbation `u` (for instance a snapshot) at distance `a`.
pub fn assemble_perturbation(site: &BifurcationSite, a: f64, b: f64, u: &FourierField, cfg: &SolverConfig) -> Result<AssembledSolution> {
    assemble_field(site, a, b, u, cfg.oversample, 1.0 - cfg.guard)
}

fn assemble_with(pt: &BranchPoint, oversample: usize, collision_frac: f64) -> Result<AssembledSolution> {
    assemble_field(&pt.site, pt.a, pt.b, &pt.u(), oversample, collision_frac)
}

fn assemble_field(site: &BifurcationSite, a: f64, b: f64, u: &FourierField, oversample: usize, collision_frac: f64) -> Result<AssembledSolution> {
    let (jm, km) = (u.j_max(), u.k_max());
    let nu = site.freq.to_f64();
    let w1 = ComplexField::from_fn(jm, km, |j, k| {
        let c = u.packed(j, k);
        if j == 0 && k == 0 {
            c + a
        } else {
            c
        }
    });
    let grid = Grid2::for_modes(jm, km, oversample);
    let values = w1.to_grid(&grid);
    let min_abs_w1 = values.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    let guard = collision_frac * a;
    if !(min_abs_w1 >= guard) {
        return Err(Error::CollisionDetected { t: 0.0, min_abs: min_abs_w1, guard });
    }
    // F = i(∂s^2 w1 - 1/conj(w1)) = ∂t w2.
    let d2 = w1.map(|_, k, c| c * -((k * k) as f64)).to_grid(&grid);
    let f: Vec<Complex64> = values
        .iter()
        .zip(&d2)
        .map(|(w, d)| Complex64::i() * (d - w.conj().inv()))
        .collect();
    let spec = grid.analyze(f);
    let drift = spec.coeff(0, 0);
    let drift_nonuniformity = (1..=km as i64)
        .flat_map(|k| [k, -k])
        .map(|k| spec.coeff(0, k).norm())
        .fold(0.0, f64::max);
    let w2_periodic = ComplexField::from_fn(jm, km, |j, k| {
        if j == 0 {
            ZERO
        } else {
            spec.coeff(j, k) / Complex64::new(0.0, nu * j as f64)
        }
    });
    let symmetry = symmetry_report(&w1, site.k0 as usize, site.l0, 128);
    Ok(AssembledSolution {
        a,
        b,
        freq: site.freq,
        j0: site.j0 as usize,
        k0: site.k0 as usize,
        l0: site.l0,
        w1,
        drift,
        w2_periodic,
        drift_nonuniformity,
        min_abs_w1,
        symmetry,
    })
}

/// Residual of `∂t^2 w1 + ∂s^4 w1 - ∂s^2(|w1|^-2 w1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResidualNorms {
    pub sup: f64,
    pub l2: f64,
}

/// Residual of the distance equation for an assembled solution, evaluated
/// pseudo-spectrally on an `nt x ns` grid. All resolved modes of the
/// nonlinear term count, so the truncation tail is part of the residual.
pub fn full_residual(sol: &AssembledSolution, nt: usize, ns: usize) -> ResidualNorms {
    let grid = Grid2::new(nt, ns);
    let nu2 = sol.nu().powi(2);
    let q: Vec<Complex64> = sol.w1.to_grid(&grid).iter().map(|w| w.conj().inv()).collect();
    let qs = grid.analyze(q);
    let mut data = vec![ZERO; grid.len()];
    for it in 0..nt {
        let j = Spectrum2::signed(it, nt);
        for is in 0..ns {
            let k = Spectrum2::signed(is, ns);
            let k2 = (k * k) as f64;
            let lin = (k2 * k2 - nu2 * (j * j) as f64) * sol.w1.get(j, k);
            data[it * ns + is] = lin + k2 * qs.data[it * ns + is];
        }
    }
    let l2 = data.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let values = grid.values(Spectrum2 { nt, ns, data });
    let sup = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    ResidualNorms { sup, l2 }
}
