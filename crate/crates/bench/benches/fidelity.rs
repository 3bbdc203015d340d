use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use spac_bench::{mtu_trace, preset_trace, switch};
use spac_core::perf::run_surrogate;
use spac_core::sim::{run_cycle_sim, SchedulerKind, SimOptions, VoqKind};

fn mtu(c: &mut Criterion) {
    let trace = mtu_trace(10_000);
    let m = switch(VoqKind::Nxn, SchedulerKind::Islip);
    let opts = SimOptions::profiling();
    let mut g = c.benchmark_group("mtu_packets");
    g.sample_size(10);
    g.throughput(Throughput::Elements(trace.len() as u64));
    g.bench_function("cycle", |b| b.iter(|| run_cycle_sim(&m, &trace, &opts).unwrap()));
    g.bench_function("surrogate", |b| b.iter(|| run_surrogate(&m, &trace, &opts).unwrap()));
    g.finish();
}

fn cells(c: &mut Criterion) {
    let opts = SimOptions::profiling();
    let mut g = c.benchmark_group("cells");
    g.sample_size(10);
    for name in ["uniform", "bursty"] {
        let trace = preset_trace(name);
        g.throughput(Throughput::Elements(trace.len() as u64));
        for sched in SchedulerKind::ALL {
            let m = switch(VoqKind::Nxn, *sched);
            let id = format!("{name}/{sched}");
            g.bench_with_input(BenchmarkId::new("cycle", &id), &m, |b, m| {
                b.iter(|| run_cycle_sim(m, &trace, &opts).unwrap())
            });
            g.bench_with_input(BenchmarkId::new("surrogate", &id), &m, |b, m| {
                b.iter(|| run_surrogate(m, &trace, &opts).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, mtu, cells);
criterion_main!(benches);
