//! FFT plumbing for one- and two-dimensional periodic grids.
//!
//! Conventions: a coefficient `c(j,k)` contributes `c e^{i(j t + k s)}` at
//! grid point `(t_m, s_n) = (2π m / nt, 2π n / ns)`. Synthesis folds every
//! mode into the grid (so evaluation on a coarse grid is still exact point
//! evaluation) and analysis divides by the number of points.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::par;

type Plan = Arc<dyn Fft<f64>>;

fn plan(n: usize, inverse: bool) -> Plan {
    static CACHE: OnceLock<Mutex<(FftPlanner<f64>, HashMap<(usize, bool), Plan>)>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    let (planner, plans) = &mut *guard;
    plans
        .entry((n, inverse))
        .or_insert_with(|| if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) })
        .clone()
}

/// Smallest `n >= m` whose only prime factors are 2, 3 and 5.
pub fn smooth_size(m: usize) -> usize {
    let mut n = m.max(1);
    loop {
        let mut r = n;
        for f in [2, 3, 5] {
            while r % f == 0 {
                r /= f;
            }
        }
        if r == 1 {
            return n;
        }
        n += 1;
    }
}

/// Grid length for `max_mode` retained modes with the given oversampling.
pub fn grid_len(max_mode: usize, oversample: usize) -> usize {
    smooth_size(oversample.max(1) * (2 * max_mode + 2))
}

#[inline]
pub(crate) fn wrap(m: i64, n: usize) -> usize {
    m.rem_euclid(n as i64) as usize
}

/// Two-dimensional grid, row-major with `t` as the slow index.
#[derive(Clone)]
pub struct Grid2 {
    pub nt: usize,
    pub ns: usize,
    t_fwd: Plan,
    t_inv: Plan,
    s_fwd: Plan,
    s_inv: Plan,
}

impl std::fmt::Debug for Grid2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Grid2({}x{})", self.nt, self.ns)
    }
}

impl Grid2 {
    pub fn new(nt: usize, ns: usize) -> Self {
        Self { nt, ns, t_fwd: plan(nt, false), t_inv: plan(nt, true), s_fwd: plan(ns, false), s_inv: plan(ns, true) }
    }

    pub fn for_modes(j_max: usize, k_max: usize, oversample: usize) -> Self {
        Self::new(grid_len(j_max, oversample), grid_len(k_max, oversample))
    }

    pub fn len(&self) -> usize {
        self.nt * self.ns
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Values on the grid from a mode accessor over `|j| <= j_max, |k| <= k_max`.
    pub fn synthesize(&self, j_max: usize, k_max: usize, coeff: impl Fn(i64, i64) -> Complex64) -> Vec<Complex64> {
        let mut grid = vec![Complex64::new(0.0, 0.0); self.len()];
        let (jm, km) = (j_max as i64, k_max as i64);
        for j in -jm..=jm {
            let row = wrap(j, self.nt) * self.ns;
            for k in -km..=km {
                let c = coeff(j, k);
                if c.re != 0.0 || c.im != 0.0 {
                    grid[row + wrap(k, self.ns)] += c;
                }
            }
        }
        self.transform(&mut grid, true);
        grid
    }

    /// Normalised coefficients of grid values; `coeff(j,k)` reads them back
    /// for any `|j| < nt/2`, `|k| < ns/2`.
    pub fn analyze(&self, mut grid: Vec<Complex64>) -> Spectrum2 {
        self.transform(&mut grid, false);
        let scale = 1.0 / self.len() as f64;
        grid.iter_mut().for_each(|c| *c *= scale);
        Spectrum2 { nt: self.nt, ns: self.ns, data: grid }
    }

    /// Grid values of a full spectrum given in storage order (inverse of `analyze`).
    pub fn values(&self, spec: Spectrum2) -> Vec<Complex64> {
        let mut data = spec.data;
        self.transform(&mut data, true);
        data
    }

    fn transform(&self, grid: &mut [Complex64], inverse: bool) {
        let (s_plan, t_plan) = if inverse { (&self.s_inv, &self.t_inv) } else { (&self.s_fwd, &self.t_fwd) };
        let ns = self.ns;
        let rows = rows_per_chunk(self.nt);
        par::for_each_chunk_mut(grid, rows * ns, |chunk| s_plan.process(chunk));
        let mut cols = transpose(grid, self.nt, ns);
        let crows = rows_per_chunk(ns);
        par::for_each_chunk_mut(&mut cols, crows * self.nt, |chunk| t_plan.process(chunk));
        let back = transpose(&cols, ns, self.nt);
        grid.copy_from_slice(&back);
    }
}

fn rows_per_chunk(rows: usize) -> usize {
    (rows / (4 * par::threads()).max(1)).max(1)
}

fn transpose(data: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    const B: usize = 32;
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    out[c * rows + r] = data[r * cols + c];
                }
            }
        }
    }
    out
}

/// Coefficients of a grid function, indexed by signed modes.
#[derive(Clone, Debug)]
pub struct Spectrum2 {
    pub nt: usize,
    pub ns: usize,
    pub data: Vec<Complex64>,
}

impl Spectrum2 {
    #[inline]
    pub fn coeff(&self, j: i64, k: i64) -> Complex64 {
        self.data[wrap(j, self.nt) * self.ns + wrap(k, self.ns)]
    }

    /// Signed mode of a storage index along an axis of length `n`.
    #[inline]
    pub fn signed(i: usize, n: usize) -> i64 {
        if i <= n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }
}

/// One-dimensional periodic grid.
#[derive(Clone)]
pub struct Grid1 {
    pub n: usize,
    fwd: Plan,
    inv: Plan,
}

impl std::fmt::Debug for Grid1 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Grid1({})", self.n)
    }
}

impl Grid1 {
    pub fn new(n: usize) -> Self {
        Self { n, fwd: plan(n, false), inv: plan(n, true) }
    }

    pub fn for_modes(max_mode: usize, oversample: usize) -> Self {
        Self::new(grid_len(max_mode, oversample))
    }

    /// Grid values of `Σ_{|k| <= k_max} c_k e^{iks}`; `coeffs[k + k_max]` is `c_k`.
    pub fn synthesize(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let km = (coeffs.len() / 2) as i64;
        let mut grid = vec![Complex64::new(0.0, 0.0); self.n];
        for (i, c) in coeffs.iter().enumerate() {
            grid[wrap(i as i64 - km, self.n)] += *c;
        }
        self.inv.process(&mut grid);
        grid
    }

    /// Coefficients `c_k`, `|k| <= k_max`, of grid values (aliases are not folded back).
    pub fn analyze(&self, mut grid: Vec<Complex64>, k_max: usize) -> Vec<Complex64> {
        self.fwd.process(&mut grid);
        let scale = 1.0 / self.n as f64;
        let km = k_max as i64;
        (-km..=km).map(|k| grid[wrap(k, self.n)] * scale).collect()
    }

    /// Full normalised spectrum in FFT storage order.
    pub fn analyze_full(&self, mut grid: Vec<Complex64>) -> Vec<Complex64> {
        self.fwd.process(&mut grid);
        let scale = 1.0 / self.n as f64;
        grid.iter_mut().for_each(|c| *c *= scale);
        grid
    }
}
