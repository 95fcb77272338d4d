//! Sequential vs rayon comparison for the two data-parallel hot paths:
//! batch signal mapping and multi-scenario feature execution.

use std::collections::BTreeMap;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use sdvtest_core::broker::Broker;
use sdvtest_core::cpds::Cpds;
use sdvtest_core::gherkin::parse_feature;
use sdvtest_core::mapper::{map_signals_par, map_signals_seq};
use sdvtest_core::runner::{run_feature, RunnerConfig};
use sdvtest_core::vss_catalog::{load_catalog, Catalog, CatalogSource};

/// A synthetic catalog large enough to make per-name scoring visible.
fn synthetic_catalog(leaves: usize) -> Catalog {
    let areas = ["Body", "Cabin", "Powertrain", "Chassis", "Connectivity"];
    let nouns = ["Pressure", "Temperature", "Level", "Speed", "Angle", "State", "Count", "Voltage"];
    let mut text = String::new();
    for i in 0..leaves {
        let area = areas[i % areas.len()];
        let noun = nouns[(i / areas.len()) % nouns.len()];
        text.push_str(&format!("Vehicle.{area}.Module{}.Sensor{i}{noun} sensor float\n", i % 97));
    }
    load_catalog(&[CatalogSource::new("synthetic", text)]).unwrap()
}

fn synthetic_names(count: usize) -> Vec<String> {
    (0..count)
        .map(|i| format!("Sensor{}{}", i * 7 % 1500, ["Pressure", "Temp", "Level", "Rate"][i % 4]))
        .collect()
}

fn bench_mapping(c: &mut Criterion) {
    let catalog = synthetic_catalog(1500);
    let names = synthetic_names(400);
    let overrides = BTreeMap::new();

    let mut group = c.benchmark_group("map_signals");
    group.sample_size(10);
    group.bench_with_input(BenchmarkId::new("sequential", names.len()), &names, |b, names| {
        b.iter(|| map_signals_seq(names, &catalog, 0.5, &overrides).unwrap())
    });
    group.bench_with_input(BenchmarkId::new("rayon", names.len()), &names, |b, names| {
        b.iter(|| map_signals_par(names, &catalog, 0.5, &overrides).unwrap())
    });
    group.finish();
}

fn scenario_batch(count: usize) -> String {
    (0..count)
        .map(|i| {
            format!(
                "Scenario: sweep {i}\n\
                 Given Vehicle.Cabin.ChildPresenceDetection.IsChildDetected is true\n\
                 And no acknowledgment within 5 minutes of escalation\n\
                 When Vehicle.Cabin.Infotainment.HVAC.AutoOverrideActive is set to true\n\
                 And acknowledges within 5 minutes of HvacIntervention\n\
                 Then Vehicle.Cabin.ChildPresenceDetection.IsChildDetected is reset to false\n"
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn bench_feature_execution(c: &mut Criterion) {
    let catalog = Arc::new(
        load_catalog(&[
            CatalogSource::new("core", sdvtest_core::assets::VSS_CORE_CATALOG),
            CatalogSource::new("overlay", sdvtest_core::assets::CPDS_OVERLAY_CATALOG),
        ])
        .unwrap(),
    );
    let feature = parse_feature(&scenario_batch(64)).unwrap();
    let factory = |broker: &mut Broker| Cpds::reference().attach(broker);

    let mut group = c.benchmark_group("run_feature");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        let config = RunnerConfig { jobs: 1, ..RunnerConfig::default() };
        b.iter(|| run_feature(&feature, &catalog, &config, &factory))
    });
    group.bench_function("rayon", |b| {
        let config = RunnerConfig { jobs: 0, ..RunnerConfig::default() };
        b.iter(|| run_feature(&feature, &catalog, &config, &factory))
    });
    group.finish();
}

criterion_group!(benches, bench_mapping, bench_feature_execution);
criterion_main!(benches);
