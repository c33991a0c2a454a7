//! Hot kernels on one thread against the whole pool.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;

use vortex_pair::fourier::FourierField;
use vortex_pair::lattice::{eigenvalue_table, BifurcationSite, Cutoff, RationalFrequency};
use vortex_pair::par;
use vortex_pair::standing::{SolverConfig, StandingSolver};

fn thread_counts() -> Vec<usize> {
    let all = std::thread::available_parallelism().map_or(1, |n| n.get());
    if all > 1 { vec![1, all] } else { vec![1] }
}

fn instance_a(cutoff: Cutoff) -> BifurcationSite {
    BifurcationSite::new(RationalFrequency::new(1, 2).unwrap(), 1, 1, 0, cutoff).unwrap()
}

fn smooth_field(n: usize) -> FourierField {
    FourierField::from_fn(n, n, |j, k| {
        let d = (-0.3 * (j.abs() + k.abs()) as f64).exp();
        (Complex64::new(d, 0.0), Complex64::new(0.5 * d, 0.0))
    })
}

fn bench(c: &mut Criterion) {
    let site = instance_a(Cutoff::new(64, 32).unwrap());
    let u = smooth_field(64);
    let solver = StandingSolver::new(&instance_a(Cutoff::default()), &SolverConfig { j_max: 64, k_max: 64, ..SolverConfig::default() }).unwrap();
    let a = solver.a0() * 1.001;

    let mut g = c.benchmark_group("kernels");
    g.sample_size(10);
    for n in thread_counts() {
        g.bench_with_input(BenchmarkId::new("eigenvalue_table_64x32", n), &n, |bch, &n| {
            bch.iter(|| par::with_threads(n, || eigenvalue_table(site.freq, &site.a2inv, site.cutoff)))
        });
        g.bench_with_input(BenchmarkId::new("multiply_64x64", n), &n, |bch, &n| {
            bch.iter(|| par::with_threads(n, || u.multiply(&u, 2).unwrap()))
        });
        g.bench_with_input(BenchmarkId::new("solve_range_64x64", n), &n, |bch, &n| {
            bch.iter(|| par::with_threads(n, || solver.solve_range(0.05, a, None).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
