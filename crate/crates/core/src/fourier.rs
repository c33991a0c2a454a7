//! Truncated space-time Fourier fields `u = (x, y): T^2 -> R^2`.
//!
//! Coefficients are stored densely over the box `|j| <= j_max, |k| <= k_max`
//! for both components. Products and the nonlinearity are evaluated by
//! collocation on an oversampled grid, using the packed complex field
//! `z = x + i y` so that one complex FFT serves both components.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::transform::Grid2;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Isotropy class a field is constrained to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SymmetryClass {
    None,
    /// Even in `t` and `s`, supported on `j0 Z x k0 Z`, invariant under the
    /// half-period shift `(π, π/k0)` and under `(l0 π, conjugation)`.
    Standing { j0: usize, k0: usize, l0: u8 },
    /// Profiles `U(t + k0 s)`, even, with leading polarization `e_l0`.
    Traveling { k0: usize, l0: u8 },
}

impl SymmetryClass {
    pub fn standing(j0: usize, k0: usize, l0: u8) -> Self {
        SymmetryClass::Standing { j0, k0, l0 }
    }

    pub fn tag(&self) -> String {
        match *self {
            SymmetryClass::None => "none".into(),
            SymmetryClass::Standing { j0, k0, l0 } => format!("standing:{j0}:{k0}:{l0}"),
            SymmetryClass::Traveling { k0, l0 } => format!("traveling:{k0}:{l0}"),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |i: usize| -> Result<usize> {
            parts
                .get(i)
                .and_then(|p| p.parse().ok())
                .ok_or_else(|| Error::Parse(format!("bad symmetry tag `{s}`")))
        };
        match parts[0] {
            "none" => Ok(SymmetryClass::None),
            "standing" => Ok(SymmetryClass::Standing { j0: num(1)?, k0: num(2)?, l0: num(3)? as u8 }),
            "traveling" => Ok(SymmetryClass::Traveling { k0: num(1)?, l0: num(2)? as u8 }),
            _ => Err(Error::Parse(format!("bad symmetry tag `{s}`"))),
        }
    }

    /// Whether site `(j, k, l)` can carry a coefficient in the fixed-point space.
    pub fn admits(&self, j: i64, k: i64, l: u8) -> bool {
        match *self {
            SymmetryClass::None => true,
            SymmetryClass::Standing { j0, k0, l0 } => {
                let (j0, k0) = (j0 as i64, k0 as i64);
                if j % j0 != 0 || k % k0 != 0 {
                    return false;
                }
                let (m, n) = (j / j0, k / k0);
                (m + n).rem_euclid(2) == 0 && (l0 as i64 * m + l as i64).rem_euclid(2) == 0
            }
            SymmetryClass::Traveling { k0, l0 } => {
                k == k0 as i64 * j && (l0 as i64 * j + l as i64).rem_euclid(2) == 0
            }
        }
    }
}

/// Which diagonal differential operator to apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiffOp {
    /// `∂s^2`, multiplier `-k^2`.
    Ds2,
    /// `∂s^4`, multiplier `k^4`.
    Ds4,
    /// `∂t^2`, multiplier `-j^2`.
    Dt2,
}

#[derive(Clone, PartialEq)]
pub struct FourierField {
    j_max: usize,
    k_max: usize,
    x: Vec<Complex64>,
    y: Vec<Complex64>,
    pub symmetry: Option<SymmetryClass>,
}

impl std::fmt::Debug for FourierField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FourierField")
            .field("j_max", &self.j_max)
            .field("k_max", &self.k_max)
            .field("l2", &self.sobolev_norm(0.0))
            .field("symmetry", &self.symmetry)
            .finish()
    }
}

impl FourierField {
    pub fn zeros(j_max: usize, k_max: usize) -> Self {
        let n = (2 * j_max + 1) * (2 * k_max + 1);
        Self { j_max, k_max, x: vec![ZERO; n], y: vec![ZERO; n], symmetry: None }
    }

    /// Field with coefficients `f(j, k) = (x̂, ŷ)`; reality is the caller's job.
    pub fn from_fn(j_max: usize, k_max: usize, f: impl Fn(i64, i64) -> (Complex64, Complex64)) -> Self {
        let mut u = Self::zeros(j_max, k_max);
        for (j, k) in u.sites() {
            let (a, b) = f(j, k);
            let i = u.idx(j, k);
            u.x[i] = a;
            u.y[i] = b;
        }
        u
    }

    /// `amp * e_l cos(j t) cos(k s)` with `j, k >= 0`.
    pub fn cosine_mode(j_max: usize, k_max: usize, j: i64, k: i64, l: u8, amp: f64) -> Self {
        let mut u = Self::zeros(j_max, k_max);
        for sj in [-1, 1] {
            for sk in [-1, 1] {
                let i = u.idx(sj * j, sk * k);
                let c = Complex64::new(amp / 4.0, 0.0);
                if l == 0 {
                    u.x[i] += c;
                } else {
                    u.y[i] += c;
                }
            }
        }
        u
    }

    pub fn j_max(&self) -> usize {
        self.j_max
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn same_shape(&self, other: &Self) -> Result<()> {
        if self.j_max != other.j_max || self.k_max != other.k_max {
            return Err(Error::TruncationMismatch(self.j_max, self.k_max, other.j_max, other.k_max));
        }
        Ok(())
    }

    #[inline]
    fn idx(&self, j: i64, k: i64) -> usize {
        (j + self.j_max as i64) as usize * (2 * self.k_max + 1) + (k + self.k_max as i64) as usize
    }

    #[inline]
    pub fn in_box(&self, j: i64, k: i64) -> bool {
        j.unsigned_abs() as usize <= self.j_max && k.unsigned_abs() as usize <= self.k_max
    }

    /// All `(j, k)` in the box, `j` slow.
    pub fn sites(&self) -> impl Iterator<Item = (i64, i64)> {
        let (jm, km) = (self.j_max as i64, self.k_max as i64);
        (-jm..=jm).flat_map(move |j| (-km..=km).map(move |k| (j, k)))
    }

    #[inline]
    pub fn get(&self, j: i64, k: i64) -> (Complex64, Complex64) {
        if !self.in_box(j, k) {
            return (ZERO, ZERO);
        }
        let i = self.idx(j, k);
        (self.x[i], self.y[i])
    }

    #[inline]
    pub fn component(&self, j: i64, k: i64, l: u8) -> Complex64 {
        let (x, y) = self.get(j, k);
        if l == 0 {
            x
        } else {
            y
        }
    }

    pub fn set(&mut self, j: i64, k: i64, x: Complex64, y: Complex64) {
        let i = self.idx(j, k);
        self.x[i] = x;
        self.y[i] = y;
    }

    /// Packed coefficient of `z = x + i y`.
    #[inline]
    pub fn packed(&self, j: i64, k: i64) -> Complex64 {
        let (x, y) = self.get(j, k);
        x + Complex64::i() * y
    }

    /// Inverse of [`packed`](Self::packed) for the coefficients `p` of a
    /// complex grid function `z = x + i y` with real `x`, `y`.
    pub fn from_packed(j_max: usize, k_max: usize, p: impl Fn(i64, i64) -> Complex64) -> Self {
        Self::from_fn(j_max, k_max, |j, k| {
            let a = p(j, k);
            let b = p(-j, -k).conj();
            ((a + b) * 0.5, (a - b) * Complex64::new(0.0, -0.5))
        })
    }

    /// Coefficient-wise map `f(j, k, l, c)`.
    pub fn map_sites(&self, f: impl Fn(i64, i64, u8, Complex64) -> Complex64) -> Self {
        let mut out = self.clone();
        for (j, k) in self.sites() {
            let i = self.idx(j, k);
            out.x[i] = f(j, k, 0, self.x[i]);
            out.y[i] = f(j, k, 1, self.y[i]);
        }
        out
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.x.iter_mut().chain(out.y.iter_mut()).for_each(|v| *v *= c);
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let mut out = self.clone();
        for (a, b) in out.x.iter_mut().zip(&other.x).chain(out.y.iter_mut().zip(&other.y)) {
            *a += b;
        }
        if out.symmetry != other.symmetry {
            out.symmetry = None;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    /// Mean value `(x̂(0,0), ŷ(0,0))`.
    pub fn mean(&self) -> (Complex64, Complex64) {
        self.get(0, 0)
    }

    pub fn without_mean(&self) -> Self {
        let mut out = self.clone();
        out.set(0, 0, ZERO, ZERO);
        out
    }

    /// Same coefficients in a different box (zero-padded or truncated).
    pub fn resized(&self, j_max: usize, k_max: usize) -> Self {
        let mut out = Self::from_fn(j_max, k_max, |j, k| self.get(j, k));
        out.symmetry = self.symmetry;
        out
    }

    pub fn is_zero(&self) -> bool {
        self.x.iter().chain(&self.y).all(|c| c.re == 0.0 && c.im == 0.0)
    }

    /// Largest violation of `c(-j,-k) = conj c(j,k)`.
    pub fn reality_defect(&self) -> f64 {
        self.sites()
            .map(|(j, k)| {
                let (x, y) = self.get(j, k);
                let (xr, yr) = self.get(-j, -k);
                (x - xr.conj()).norm().max((y - yr.conj()).norm())
            })
            .fold(0.0, f64::max)
    }

    /// `Σ (|x̂|^2 + |ŷ|^2)(j^2 + k^2 + 1)^s`.
    pub fn sobolev_norm_sq(&self, s: f64) -> f64 {
        self.sites()
            .map(|(j, k)| {
                let i = self.idx(j, k);
                let w = ((j * j + k * k + 1) as f64).powf(s);
                (self.x[i].norm_sqr() + self.y[i].norm_sqr()) * w
            })
            .sum()
    }

    pub fn sobolev_norm(&self, s: f64) -> f64 {
        self.sobolev_norm_sq(s).sqrt()
    }

    pub fn diff(&self, op: DiffOp) -> Self {
        self.map_sites(|j, k, _, c| {
            let m = match op {
                DiffOp::Ds2 => -(k * k) as f64,
                DiffOp::Ds4 => (k * k * k * k) as f64,
                DiffOp::Dt2 => -(j * j) as f64,
            };
            c * m
        })
    }

    /// Grid values of the packed field `x + i y`.
    pub fn to_grid(&self, grid: &Grid2) -> Vec<Complex64> {
        grid.synthesize(self.j_max, self.k_max, |j, k| self.packed(j, k))
    }

    /// Truncated field whose packed grid values are `z`.
    pub fn from_grid(grid: &Grid2, z: Vec<Complex64>, j_max: usize, k_max: usize) -> Self {
        let spec = grid.analyze(z);
        Self::from_packed(j_max, k_max, |j, k| spec.coeff(j, k))
    }

    /// `sup |u|` over the grid points.
    pub fn sup_on(&self, grid: &Grid2) -> f64 {
        self.to_grid(grid).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Componentwise product `(x1 x2, y1 y2)` by collocation. The mean is kept.
    pub fn multiply(&self, other: &Self, oversample: usize) -> Result<Self> {
        self.same_shape(other)?;
        let grid = Grid2::for_modes(self.j_max, self.k_max, oversample);
        Ok(self.multiply_on(other, &grid))
    }

    pub fn multiply_on(&self, other: &Self, grid: &Grid2) -> Self {
        let a = self.to_grid(grid);
        let b = other.to_grid(grid);
        let prod = a.iter().zip(&b).map(|(p, q)| Complex64::new(p.re * q.re, p.im * q.im)).collect();
        Self::from_grid(grid, prod, self.j_max, self.k_max)
    }

    /// Realified `g(u) = a^-2 ū^2 / (a + ū)` with `a = a2inv^(-1/2)`, where
    /// `ū = x - i y`. Fails when `sup |u| > guard * a` on the grid.
    pub fn eval_nonlinearity(&self, a2inv: f64, guard: f64, oversample: usize) -> Result<Self> {
        let grid = Grid2::for_modes(self.j_max, self.k_max, oversample);
        self.eval_nonlinearity_on(&grid, a2inv, guard)
    }

    pub fn eval_nonlinearity_on(&self, grid: &Grid2, a2inv: f64, guard: f64) -> Result<Self> {
        let z = self.to_grid(grid);
        let g = nonlinearity_grid(&z, a2inv, guard)?;
        Ok(Self::from_grid(grid, g, self.j_max, self.k_max))
    }

    /// Orthogonal projection onto the fixed-point space of `cls`.
    pub fn project_symmetry(&self, cls: SymmetryClass) -> Self {
        let mut out = match cls {
            SymmetryClass::None => self.clone(),
            SymmetryClass::Standing { .. } => self.map_sites(|j, k, l, _| {
                if !cls.admits(j, k, l) {
                    return ZERO;
                }
                // Average over t -> -t, s -> -s; reality makes the result real.
                let c = self.component(j, k, l).re
                    + self.component(-j, k, l).re
                    + self.component(j, -k, l).re
                    + self.component(-j, -k, l).re;
                Complex64::new(c / 4.0, 0.0)
            }),
            SymmetryClass::Traveling { .. } => self.map_sites(|j, k, l, _| {
                if !cls.admits(j, k, l) {
                    return ZERO;
                }
                let c = self.component(j, k, l).re + self.component(-j, -k, l).re;
                Complex64::new(c / 2.0, 0.0)
            }),
        };
        out.symmetry = match cls {
            SymmetryClass::None => self.symmetry,
            other => Some(other),
        };
        out
    }
}

/// Complex-valued space-time field stored densely over a mode box.
#[derive(Clone, PartialEq)]
pub struct ComplexField {
    j_max: usize,
    k_max: usize,
    c: Vec<Complex64>,
}

impl std::fmt::Debug for ComplexField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ComplexField({}x{}, l2 = {:e})", self.j_max, self.k_max, self.l2_norm())
    }
}

impl ComplexField {
    pub fn zeros(j_max: usize, k_max: usize) -> Self {
        Self { j_max, k_max, c: vec![ZERO; (2 * j_max + 1) * (2 * k_max + 1)] }
    }

    pub fn from_fn(j_max: usize, k_max: usize, f: impl Fn(i64, i64) -> Complex64) -> Self {
        let mut out = Self::zeros(j_max, k_max);
        let (jm, km) = (j_max as i64, k_max as i64);
        for j in -jm..=jm {
            for k in -km..=km {
                let i = out.idx(j, k);
                out.c[i] = f(j, k);
            }
        }
        out
    }

    pub fn j_max(&self) -> usize {
        self.j_max
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    #[inline]
    fn idx(&self, j: i64, k: i64) -> usize {
        (j + self.j_max as i64) as usize * (2 * self.k_max + 1) + (k + self.k_max as i64) as usize
    }

    #[inline]
    pub fn get(&self, j: i64, k: i64) -> Complex64 {
        if j.unsigned_abs() as usize > self.j_max || k.unsigned_abs() as usize > self.k_max {
            return ZERO;
        }
        self.c[self.idx(j, k)]
    }

    pub fn map(&self, f: impl Fn(i64, i64, Complex64) -> Complex64) -> Self {
        Self::from_fn(self.j_max, self.k_max, |j, k| f(j, k, self.get(j, k)))
    }

    pub fn to_grid(&self, grid: &Grid2) -> Vec<Complex64> {
        grid.synthesize(self.j_max, self.k_max, |j, k| self.get(j, k))
    }

    pub fn sup_on(&self, grid: &Grid2) -> f64 {
        self.to_grid(grid).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn l2_norm(&self) -> f64 {
        self.c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Pointwise packed `g` on grid values `z = x + i y` of `u`.
pub(crate) fn nonlinearity_grid(z: &[Complex64], a2inv: f64, guard: f64) -> Result<Vec<Complex64>> {
    let a = a2inv.powf(-0.5);
    let limit = guard * a;
    let sup = z.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if !(sup <= limit) {
        return Err(Error::AmplitudeTooLarge { sup, limit });
    }
    Ok(z
        .iter()
        .map(|v| {
            // Realified (Re g, Im g) packs back to the complex value g itself.
            let ub = v.conj();
            ub * ub * a2inv / (ub + a)
        })
        .collect())
}
