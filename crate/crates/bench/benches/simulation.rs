use criterion::{black_box, criterion_group, criterion_main, Criterion};

use mrbot_bench::{curved_waypoints, nominal_config};
use mrbot::path::{build_pchip, CenterlinePath};
use mrbot::{run_scenario, FlowRegime, FlowWaveform};

fn interpolation(c: &mut Criterion) {
    let wps = curved_waypoints();
    let xs: Vec<(f64, f64)> = wps.iter().map(|w| (w.t, w.x)).collect();
    c.bench_function("pchip_build_and_eval", |b| {
        b.iter(|| {
            let p = build_pchip(black_box(&xs)).unwrap();
            p.eval(black_box(0.4321)).unwrap()
        })
    });
    c.bench_function("discretize_curved_path", |b| {
        b.iter(|| CenterlinePath::new(black_box(&wps), 1e-4).unwrap().total_length())
    });
}

fn scenarios(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_scenario");
    group.sample_size(20);
    for regime in [FlowRegime::Steady, FlowRegime::Normal, FlowRegime::Fast] {
        let mut cfg = nominal_config();
        if regime != FlowRegime::Steady {
            cfg.waveform = FlowWaveform::pulsatile(regime, cfg.waveform.mean_flow);
        }
        group.bench_function(regime.name(), |b| b.iter(|| run_scenario(black_box(&cfg)).unwrap().records.len()));
    }
    group.finish();
}

criterion_group!(benches, interpolation, scenarios);
criterion_main!(benches);
