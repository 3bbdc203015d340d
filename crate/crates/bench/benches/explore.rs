use criterion::{criterion_group, criterion_main, Criterion};
use spac_bench::{basic, preset_trace};
use spac_core::dse::{brute_force_enumerate, depth_grid, run_dse, template_space, Constraints, DEFAULT_SPACE_CAP};

fn incast(c: &mut Criterion) {
    let spec = basic();
    let trace = preset_trace("incast");
    let templates: Vec<_> = template_space(&spec, 8)
        .unwrap()
        .into_iter()
        .filter(|t| t.data_width_bits <= 512)
        .collect();
    let space = depth_grid(&templates, &[1, 2, 3, 4]);
    let cons = Constraints {
        sla_latency_p99_ns: 200.0,
        ..Constraints::default()
    };
    let mut g = c.benchmark_group("incast_96");
    g.sample_size(10);
    g.bench_function("dse", |b| b.iter(|| run_dse(&spec, &trace, &templates, &cons).unwrap()));
    g.bench_function("brute_force", |b| {
        b.iter(|| brute_force_enumerate(&space, &spec, &trace, &cons, DEFAULT_SPACE_CAP).unwrap())
    });
    g.finish();
}

criterion_group!(benches, incast);
criterion_main!(benches);
