use coopmotion::closed_forms::reg_inc_beta;
use coopmotion::fd_scheme::{scheme_step, SchemeSpec};
use coopmotion::{evolve, step_cdf, ModelParams, Pmf};
use coopmotion_bench::{ramp_mesh, spread_pmf};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn bench_evolve(c: &mut Criterion) {
    let mut g = c.benchmark_group("evolve");
    for n in [256u64, 4096] {
        for m in [1.0, 1.5] {
            let params = ModelParams::symmetric(m).unwrap();
            g.bench_with_input(BenchmarkId::new(format!("m={m}"), n), &n, |b, &n| {
                b.iter(|| evolve(black_box(&Pmf::delta(0)), &params, n).unwrap())
            });
        }
    }
    g.finish();
}

fn bench_step_cdf(c: &mut Criterion) {
    let mut g = c.benchmark_group("step_cdf");
    for step in [1u32, 3] {
        let params = ModelParams::new(1.0, 1.0, 0.5, step).unwrap();
        let f = spread_pmf(1.0, 4096).cdf();
        g.bench_function(BenchmarkId::from_parameter(step), |b| {
            b.iter(|| step_cdf(black_box(&f), &params))
        });
    }
    g.finish();
}

fn bench_scheme_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("scheme_step");
    for n in [1e3, 1e6, 1e9] {
        let spec = SchemeSpec::p_laplace(1.0, n).unwrap();
        let mesh = ramp_mesh(&spec);
        g.bench_with_input(
            BenchmarkId::new("p_laplace", mesh.len()),
            &mesh,
            |b, mesh| b.iter(|| scheme_step(black_box(mesh), &spec)),
        );
    }
    g.finish();
}

fn bench_reg_inc_beta(c: &mut Criterion) {
    let mut g = c.benchmark_group("reg_inc_beta");
    for a in [2.0, 21.0] {
        g.bench_with_input(BenchmarkId::from_parameter(a), &a, |b, &a| {
            b.iter(|| {
                (1..100)
                    .map(|i| reg_inc_beta(black_box(i as f64 / 100.0), a, a).unwrap())
                    .sum::<f64>()
            })
        });
    }
    g.finish();
}

criterion_group!(
    benches,
    bench_evolve,
    bench_step_cdf,
    bench_scheme_step,
    bench_reg_inc_beta
);
criterion_main!(benches);
