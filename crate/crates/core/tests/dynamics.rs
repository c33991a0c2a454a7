//! Traveling profiles and the time-domain validator.

use std::f64::consts::PI;

use num_complex::Complex64;

use vortex_pair::evolution::{self, init_from_assembled, integrate, EvolveConfig, Scheme};
use vortex_pair::lattice::{BifurcationSite, Cutoff, RationalFrequency};
use vortex_pair::standing::{loglog_slope, AssembledSolution, SolverConfig, StandingSolver};
use vortex_pair::travel::{solve_travel_branch, travel_residual, TravelConfig};

fn standing(p: u64, q: u64, l0: u8, b: f64, n: usize) -> AssembledSolution {
    let site = BifurcationSite::new(RationalFrequency::new(p, q).unwrap(), 1, 1, l0, Cutoff::default()).unwrap();
    let solver = StandingSolver::new(&site, &SolverConfig { j_max: n, k_max: n, ..SolverConfig::default() }).unwrap();
    let pt = solver.solve_branch_point(b, site.a0(), None).unwrap();
    solver.assemble(&pt).unwrap()
}

/// `‖w1(T) - w1(0)‖ / ‖w1(0)‖`; `w2` drifts linearly and is left out.
fn w1_return_error(end: &[Complex64], start: &[Complex64]) -> f64 {
    let diff: f64 = end.iter().zip(start).map(|(a, b)| (a - b).norm_sqr()).sum();
    let size: f64 = start.iter().map(|c| c.norm_sqr()).sum();
    (diff / size).sqrt()
}

#[test]
fn travel_profile_matches_leading_order() {
    // The bifurcating polarization for label l is e_(1-l); see the README.
    let bs = [0.025, 0.05];
    let profiles = solve_travel_branch(2.0, 0, &[0.0, 0.025, 0.05], &TravelConfig::default()).unwrap();
    let n = 256;
    let errs: Vec<f64> = profiles[1..]
        .iter()
        .map(|p| {
            p.values(n)
                .iter()
                .enumerate()
                .map(|(i, u)| (u - Complex64::new(0.0, p.b * (2.0 * PI * i as f64 / n as f64).cos())).norm())
                .fold(0.0, f64::max)
        })
        .collect();
    let slope = loglog_slope(&bs, &errs).unwrap();
    assert!((1.8..=2.2).contains(&slope), "remainder exponent {slope} ({errs:?})");
}

#[test]
fn accepted_profiles_solve_the_ode() {
    for l in [0, 1] {
        let profiles = solve_travel_branch(2.0, l, &[0.0, 0.05, 0.1], &TravelConfig::default()).unwrap();
        for p in &profiles {
            assert!(travel_residual(p, 1024) < 1e-10, "l = {l}, b = {}", p.b);
        }
    }
}

#[test]
fn travel_residual_decays_spectrally() {
    // Small b is resolved by a handful of modes; b = 0.8 needs about 32.
    let grid: Vec<f64> = (0..=8).map(|i| 0.1 * i as f64).collect();
    let res: Vec<f64> = [8, 16, 32]
        .iter()
        .map(|&modes| {
            let cfg = TravelConfig { modes, tol: 1e-14, ..TravelConfig::default() };
            let branch = solve_travel_branch(2.0, 0, &grid, &cfg).unwrap();
            travel_residual(branch.last().unwrap(), 1024)
        })
        .collect();
    assert!(res[1] < 1e-3 * res[0] && res[2] < 1e-3 * res[1], "residuals {res:?}");
}

#[test]
fn standing_wave_is_even_in_time() {
    let sol = standing(1, 2, 0, 0.05, 32);
    let cfg = EvolveConfig::for_period(sol.period());
    let s0 = init_from_assembled(&sol, &cfg).unwrap();
    let (fwd, _) = integrate(&s0, 1.3, &cfg).unwrap();
    let (back, _) = integrate(&s0, -1.3, &cfg).unwrap();
    let gap = fwd.w1.iter().zip(&back.w1).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(gap < 1e-10, "w1(t) - w1(-t) = {gap:e}");
    // And it follows the assembled space-time solution.
    let exact = sol.w1_at(1.3);
    let km = (exact.len() / 2) as i64;
    let dev = (-km..=km).map(|k| (fwd.w1_coeff(k) - exact[(k + km) as usize]).norm()).fold(0.0, f64::max);
    assert!(dev < 1e-9, "evolved vs assembled w1 differ by {dev:e}");
}

#[test]
fn drift_law_matches_finite_differences() {
    let sol = standing(1, 2, 0, 0.05, 32);
    let cfg = EvolveConfig { sample_every: 1, ..EvolveConfig::for_period(sol.period()) };
    let s0 = init_from_assembled(&sol, &cfg).unwrap();
    let (_, samples) = integrate(&s0, 0.5, &cfg).unwrap();
    let mut worst: f64 = 0.0;
    for w in samples.windows(3) {
        let h = w[2].t - w[0].t;
        let fd_re = (w[2].mean_w2_re - w[0].mean_w2_re) / h;
        let fd_im = (w[2].mean_w2_im - w[0].mean_w2_im) / h;
        worst = worst.max((fd_re - w[1].drift_rate_re).abs()).max((fd_im - w[1].drift_rate_im).abs());
    }
    assert!(worst < 1e-6, "drift law violated by {worst:e}");
}

#[test]
fn midpoint_return_error_is_second_order() {
    let sol = standing(1, 2, 0, 0.05, 64);
    let t = sol.period();
    let errs: Vec<f64> = [256.0, 512.0]
        .iter()
        .map(|&div| {
            let cfg = EvolveConfig { dt: t / div, scheme: Scheme::ImplicitMidpoint, ..EvolveConfig::for_period(t) };
            let s0 = init_from_assembled(&sol, &cfg).unwrap();
            let (end, _) = integrate(&s0, t, &cfg).unwrap();
            w1_return_error(&end.w1, &s0.w1)
        })
        .collect();
    let ratio = errs[0] / errs[1];
    assert!((3.0..=5.0).contains(&ratio), "halving dt changed the error by {ratio} ({errs:?})");
}

#[test]
fn figure_eight_instance_starts_with_y_component() {
    let sol = standing(3, 2, 1, 0.05, 32);
    let cfg = EvolveConfig::for_period(sol.period());
    let s0 = init_from_assembled(&sol, &cfg).unwrap();
    // y(0, s) = Im w1; its cos s coefficient carries the amplitude b/2.
    let y1 = (s0.w1_coeff(1) - s0.w1_coeff(-1).conj()) / Complex64::new(0.0, 2.0);
    assert!((y1.re - 0.025).abs() < 1e-3, "y-coefficient {y1}");
    assert!(s0.w1_velocity() < 1e-10);
}

#[test]
fn traveling_profile_translates() {
    let profiles = solve_travel_branch(2.0, 1, &[0.0, 0.05], &TravelConfig::default()).unwrap();
    let p = &profiles[1];
    let period = 2.0 * PI / p.nu;
    let err = evolution::translation_error(p, 64, period, 8, &EvolveConfig::for_period(period)).unwrap();
    assert!(err < 1e-10, "translation error {err:e}");
}
