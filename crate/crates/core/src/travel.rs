//! Traveling waves `w1(t,s) = a + U(νt + s)`.
//!
//! Along `ξ = νt + s` the distance equation integrates twice to
//! `-U'' - ν^2 U - a^-2 Ū + g(U) = C`. Periodicity kills the linear
//! integration constant and the zero-mean normalisation of `U` fixes `C`
//! to the mean of `g(U)`, so only the nonzero modes are solved for.
//!
//! In real coordinates `Ū = R U` with `R = diag(1, -1)`, and the cosine mode
//! of component `c` has the linear entry `j^2 - ν^2 - (-1)^c a^-2`. The
//! branch labelled `l` bifurcates in component `c = 1 - l` at
//! `ν0 = sqrt(1 + (-1)^l a^-2)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fourier::nonlinearity_grid;
use crate::par;
use crate::transform::{wrap, Grid1};

/// Bifurcation frequency of the traveling branch `l`.
pub fn nu0(a: f64, l: u8) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) || l > 1 {
        return Err(Error::InvalidConfig(format!("traveling wave needs a > 0 and l in {{0,1}}, got a = {a}, l = {l}")));
    }
    let radicand = 1.0 + sign(l) / (a * a);
    if radicand <= 0.0 {
        return Err(Error::DegenerateFrequency { a, l });
    }
    Ok(radicand.sqrt())
}

fn sign(l: u8) -> f64 {
    if l == 0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TravelConfig {
    /// Retained modes `1..=modes` of the profile.
    pub modes: usize,
    pub oversample: usize,
    /// Sup norm of the Galerkin residual coefficients at acceptance.
    pub tol: f64,
    pub max_iter: usize,
    pub guard: f64,
    pub max_halvings: usize,
}

impl Default for TravelConfig {
    fn default() -> Self {
        Self { modes: 32, oversample: 2, tol: 1e-12, max_iter: 40, guard: 0.9, max_halvings: 6 }
    }
}

impl TravelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.modes < 2 {
            return bad("travel modes must be at least 2");
        }
        if self.oversample < 1 {
            return bad("oversample must be at least 1");
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return bad("tol must be positive and max_iter nonzero");
        }
        if !(self.guard > 0.0 && self.guard < 1.0) {
            return bad("guard must lie in (0, 1)");
        }
        Ok(())
    }
}

/// One point of a traveling branch.
#[derive(Clone, Debug, PartialEq)]
pub struct TravelProfile {
    pub a: f64,
    pub l: u8,
    pub nu: f64,
    pub b: f64,
    pub modes: usize,
    /// Packed coefficients `U_k = x_k + i y_k`, `coeffs[k + modes]`, zero mean.
    pub coeffs: Vec<Complex64>,
    /// Sup norm of the Galerkin residual coefficients.
    pub residual: f64,
    pub newton_iterations: usize,
}

impl TravelProfile {
    /// Polarisation of the bifurcating cosine mode.
    pub fn component(&self) -> u8 {
        1 - self.l
    }

    pub fn coeff(&self, k: i64) -> Complex64 {
        let m = self.modes as i64;
        if k.abs() > m {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(k + m) as usize]
        }
    }

    /// Coefficients of `U(· + shift)`.
    pub fn shifted(&self, shift: f64) -> Vec<Complex64> {
        let m = self.modes as i64;
        (-m..=m).map(|k| self.coeff(k) * Complex64::from_polar(1.0, k as f64 * shift)).collect()
    }

    /// Profile values on an `n`-point grid.
    pub fn values(&self, n: usize) -> Vec<Complex64> {
        Grid1::new(n).synthesize(&self.coeffs)
    }

    fn trivial(a: f64, l: u8, nu: f64, modes: usize) -> Self {
        Self { a, l, nu, b: 0.0, modes, coeffs: vec![Complex64::new(0.0, 0.0); 2 * modes + 1], residual: 0.0, newton_iterations: 0 }
    }
}

/// Cosine amplitudes `x[j] + i y[j]` of an even profile, `j = 0..=modes`.
#[derive(Clone, Debug)]
struct Amplitudes {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Amplitudes {
    fn zeros(modes: usize) -> Self {
        Self { x: vec![0.0; modes + 1], y: vec![0.0; modes + 1] }
    }

    fn from_coeffs(c: &[Complex64]) -> Self {
        let m = c.len() / 2;
        let mut out = Self::zeros(m);
        for j in 1..=m {
            let amp = c[m + j] + c[m - j];
            out.x[j] = amp.re;
            out.y[j] = amp.im;
        }
        out
    }

    fn to_coeffs(&self) -> Vec<Complex64> {
        let m = self.x.len() - 1;
        let mut c = vec![Complex64::new(0.0, 0.0); 2 * m + 1];
        for j in 1..=m {
            let half = Complex64::new(self.x[j], self.y[j]) * 0.5;
            c[m + j] = half;
            c[m - j] = half;
        }
        c
    }

    fn get(&self, j: usize, comp: u8) -> f64 {
        if comp == 0 {
            self.x[j]
        } else {
            self.y[j]
        }
    }

    fn set(&mut self, j: usize, comp: u8, v: f64) {
        if comp == 0 {
            self.x[j] = v
        } else {
            self.y[j] = v
        }
    }
}

/// Full cosine basis index: `2 (j - 1) + comp`.
fn full_index(j: usize, comp: u8) -> usize {
    2 * (j - 1) + comp as usize
}

/// Cosine modes compatible with the traveling isotropy for active component `c`.
fn fix_t_basis(modes: usize, c: u8) -> Vec<(usize, u8)> {
    (1..=modes)
        .flat_map(|j| [(j, 0u8), (j, 1u8)])
        .filter(|&(j, comp)| (c as usize * j + comp as usize) % 2 == 0)
        .collect()
}

fn linear_entry(j: usize, comp: u8, nu: f64, a2inv: f64) -> f64 {
    (j * j) as f64 - nu * nu - sign(comp) * a2inv
}

/// Even-part cosine coefficients `(X_j, Y_j)` of a grid function's spectrum.
fn cos_part(spec: &[Complex64], j: usize) -> (f64, f64) {
    let n = spec.len();
    let (p, m) = (spec[wrap(j as i64, n)], spec[wrap(-(j as i64), n)]);
    (p.re + m.re, p.im + m.im)
}

struct Problem {
    a: f64,
    a2inv: f64,
    modes: usize,
    grid: Grid1,
    guard: f64,
}

impl Problem {
    fn new(a: f64, modes: usize, oversample: usize, guard: f64) -> Self {
        Self { a, a2inv: 1.0 / (a * a), modes, grid: Grid1::for_modes(modes, oversample), guard }
    }

    /// Galerkin residual coefficients over the full cosine basis.
    fn residual(&self, amp: &Amplitudes, nu: f64) -> Result<Vec<f64>> {
        let z = self.grid.synthesize(&amp.to_coeffs());
        let g = self.grid.analyze_full(nonlinearity_grid(&z, self.a2inv, self.guard)?);
        let mut r = vec![0.0; 2 * self.modes];
        for j in 1..=self.modes {
            let (gx, gy) = cos_part(&g, j);
            r[full_index(j, 0)] = linear_entry(j, 0, nu, self.a2inv) * amp.x[j] + gx;
            r[full_index(j, 1)] = linear_entry(j, 1, nu, self.a2inv) * amp.y[j] + gy;
        }
        Ok(r)
    }

    /// Jacobian of [`Problem::residual`] in the amplitudes, over the full basis.
    fn jacobian(&self, amp: &Amplitudes, nu: f64) -> Result<DMatrix<f64>> {
        let z = self.grid.synthesize(&amp.to_coeffs());
        let limit = self.guard * self.a;
        let sup = z.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if !(sup <= limit) {
            return Err(Error::AmplitudeTooLarge { sup, limit });
        }
        // dg = h'(ū) conj(dU) with h(ū) = a^-2 ū^2 / (a + ū).
        let a = self.a;
        let hp: Vec<Complex64> = z
            .iter()
            .map(|v| {
                let ub = v.conj();
                ub * (ub + 2.0 * a) * self.a2inv / ((ub + a) * (ub + a))
            })
            .collect();
        let h = self.grid.analyze_full(hp);
        let n = h.len();
        let dim = 2 * self.modes;
        let cols = par::map_range(dim, |col| {
            let (m, comp) = (col / 2 + 1, (col % 2) as u8);
            // conj of the basis direction: 1 for x, -i for y.
            let sigma = if comp == 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, -1.0) };
            let dg = |q: i64| {
                let mm = m as i64;
                sigma * (h[wrap(q - mm, n)] + h[wrap(q + mm, n)]) * 0.5
            };
            let mut column = vec![0.0; dim];
            for j in 1..=self.modes {
                let (p, q) = (dg(j as i64), dg(-(j as i64)));
                column[full_index(j, 0)] = p.re + q.re;
                column[full_index(j, 1)] = p.im + q.im;
            }
            column[col] += linear_entry(m, comp, nu, self.a2inv);
            column
        });
        Ok(DMatrix::from_fn(dim, dim, |r, c| cols[c][r]))
    }
}

/// Galerkin Jacobian of the profile equation at `(U, ν)` over the full
/// cosine basis, ordered `(j=1,x), (j=1,y), (j=2,x), ...`. `coeffs` holds
/// packed coefficients `U_k`, `k = -modes..=modes`, of an even profile.
pub fn galerkin_jacobian(coeffs: &[Complex64], nu: f64, a: f64, oversample: usize) -> Result<DMatrix<f64>> {
    let modes = coeffs.len() / 2;
    let problem = Problem::new(a, modes, oversample, 1.0);
    problem.jacobian(&Amplitudes::from_coeffs(coeffs), nu)
}

/// Newton solve for `(U, ν)` at amplitude `b`, starting from `(guess, nu)`.
fn newton(problem: &Problem, l: u8, b: f64, mut amp: Amplitudes, mut nu: f64, cfg: &TravelConfig) -> Result<(Amplitudes, f64, f64, usize)> {
    let c = 1 - l;
    let basis = fix_t_basis(problem.modes, c);
    let active = basis.iter().position(|&e| e == (1, c)).expect("active mode is in the basis");
    amp.set(1, c, b);
    let fail = |reason: String| Error::NewtonFailed { b, reason };
    let mut last = f64::INFINITY;
    for it in 0..=cfg.max_iter {
        let full = problem.residual(&amp, nu)?;
        let r = DVector::from_iterator(basis.len(), basis.iter().map(|&(j, comp)| full[full_index(j, comp)]));
        let size = r.amax();
        if !size.is_finite() {
            return Err(fail("residual is not finite".into()));
        }
        if size < cfg.tol {
            return Ok((amp, nu, size, it));
        }
        if it == cfg.max_iter {
            return Err(fail(format!("residual {size:.3e} after {it} iterations")));
        }
        let jf = problem.jacobian(&amp, nu)?;
        let jac = DMatrix::from_fn(basis.len(), basis.len(), |row, col| {
            let ri = full_index(basis[row].0, basis[row].1);
            if col == active {
                // dF/dν = -2ν U.
                -2.0 * nu * amp.get(basis[row].0, basis[row].1)
            } else {
                jf[(ri, full_index(basis[col].0, basis[col].1))]
            }
        });
        let step = jac.lu().solve(&(-r)).ok_or_else(|| fail("singular Jacobian".into()))?;
        for (p, &(j, comp)) in basis.iter().enumerate() {
            if p == active {
                nu += step[p];
            } else {
                amp.set(j, comp, amp.get(j, comp) + step[p]);
            }
        }
        // Stop on a roundoff plateau rather than spin to max_iter.
        let dz = step.amax();
        if dz < 1e-15 && size < 1e2 * cfg.tol && size >= 0.5 * last {
            let full = problem.residual(&amp, nu)?;
            let size = basis.iter().map(|&(j, comp)| full[full_index(j, comp)].abs()).fold(0.0, f64::max);
            return Ok((amp, nu, size, it + 1));
        }
        last = size;
    }
    unreachable!()
}

/// Traveling branch `l` at distance `a`, continued in the amplitude `b`
/// of the bifurcating cosine mode (`b_grid` ascending from 0).
pub fn solve_travel_branch(a: f64, l: u8, b_grid: &[f64], cfg: &TravelConfig) -> Result<Vec<TravelProfile>> {
    cfg.validate()?;
    let nu_0 = nu0(a, l)?;
    if b_grid.iter().any(|b| !(b.is_finite() && *b >= 0.0)) || b_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("b grid must be ascending and nonnegative".into()));
    }
    let problem = Problem::new(a, cfg.modes, cfg.oversample, cfg.guard);
    let mut out = Vec::with_capacity(b_grid.len());
    let (mut prev_b, mut prev_amp, mut prev_nu) = (0.0, Amplitudes::zeros(cfg.modes), nu_0);
    for &b in b_grid {
        if b == 0.0 {
            out.push(TravelProfile::trivial(a, l, nu_0, cfg.modes));
            continue;
        }
        let mut target = b;
        let mut halvings = 0;
        loop {
            // Scale the previous profile; the leading mode is linear in b.
            let ratio = if prev_b > 0.0 { target / prev_b } else { 0.0 };
            let mut guess = prev_amp.clone();
            guess.x.iter_mut().chain(guess.y.iter_mut()).for_each(|v| *v *= ratio);
            match newton(&problem, l, target, guess, prev_nu, cfg) {
                Ok((amp, nu, residual, iterations)) => {
                    prev_b = target;
                    prev_amp = amp;
                    prev_nu = nu;
                    if target == b {
                        out.push(TravelProfile {
                            a,
                            l,
                            nu,
                            b,
                            modes: cfg.modes,
                            coeffs: prev_amp.to_coeffs(),
                            residual,
                            newton_iterations: iterations,
                        });
                        break;
                    }
                    target = b;
                }
                Err(e) if halvings < cfg.max_halvings && !matches!(e, Error::InvalidConfig(_)) => {
                    halvings += 1;
                    target = 0.5 * (prev_b + target);
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

/// Sup norm, on an `n`-point grid, of `-U'' - ν^2 U - a^-2 Ū + g(U) - mean g(U)`.
pub fn travel_residual(profile: &TravelProfile, n: usize) -> f64 {
    let grid = Grid1::new(n);
    let m = profile.modes as i64;
    let a2inv = 1.0 / (profile.a * profile.a);
    let z = grid.synthesize(&profile.coeffs);
    let d2: Vec<Complex64> = (-m..=m).map(|k| profile.coeff(k) * -((k * k) as f64)).collect();
    let d2 = grid.synthesize(&d2);
    let g = match nonlinearity_grid(&z, a2inv, 1.0) {
        Ok(g) => g,
        Err(_) => return f64::INFINITY,
    };
    let mean = g.iter().sum::<Complex64>() / n as f64;
    let nu2 = profile.nu * profile.nu;
    z.iter()
        .zip(&d2)
        .zip(&g)
        .map(|((u, upp), gv)| (-upp - u * nu2 - u.conj() * a2inv + gv - mean).norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nu0_examples() {
        assert!((nu0(2.0, 0).unwrap() - 5f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((nu0(2.0, 1).unwrap() - 3f64.sqrt() / 2.0).abs() < 1e-15);
        assert!(matches!(nu0(1.0, 1), Err(Error::DegenerateFrequency { .. })));
    }

    #[test]
    fn basis_parity() {
        assert_eq!(fix_t_basis(3, 1), vec![(1, 1), (2, 0), (3, 1)]);
        assert_eq!(fix_t_basis(3, 0), vec![(1, 0), (2, 0), (3, 0)]);
    }

    #[test]
    fn trivial_profile_has_zero_residual() {
        let nu = nu0(2.0, 0).unwrap();
        let p = TravelProfile::trivial(2.0, 0, nu, 8);
        assert_eq!(travel_residual(&p, 64), 0.0);
    }

    #[test]
    fn amplitudes_round_trip() {
        let mut amp = Amplitudes::zeros(4);
        amp.x[2] = 0.5;
        amp.y[3] = -0.25;
        let back = Amplitudes::from_coeffs(&amp.to_coeffs());
        assert_eq!(back.x, amp.x);
        assert_eq!(back.y, amp.y);
    }
}
