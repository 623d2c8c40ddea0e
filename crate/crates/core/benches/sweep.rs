//! Parallel vs sequential execution of a small sensitivity sweep. The two
//! paths produce identical output (tested in the library); here we measure
//! the wall-clock difference on the same row workload.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng;

use climarket_core::bayes::InferenceSettings;
use climarket_core::par;
use climarket_core::rng::{self, stream};
use climarket_core::sensitivity::{lhs_sample, sweep_row, SweepRow};
use climarket_core::series::AnnualSeries;
use climarket_core::sim::{DataBundle, SimConfig};

/// Synthetic but realistically shaped inputs: a CO2 ramp, a flat solar cycle,
/// and temperatures that actually follow the CO2 story with AR(1) noise.
fn synthetic_data() -> DataBundle {
    let mut rng = rng::substream(0xBEEF, &[stream::TRUTH]);
    let co2: Vec<f64> = (0..221)
        .map(|i| 290.0 + 0.5 * i as f64 + 0.002 * (i as f64).powi(2))
        .collect();
    let tsi: Vec<f64> = (0..221)
        .map(|i| 1361.0 + 0.5 * (i as f64 * std::f64::consts::TAU / 11.0).sin())
        .collect();
    let mut e = 0.0;
    let temps: Vec<f64> = co2[..135]
        .iter()
        .map(|&c| {
            e = 0.4 * e + 0.1 * rng.random::<f64>() - 0.05;
            -0.2 + 0.9 * ((c / 300.0) as f64).ln() + e
        })
        .collect();
    DataBundle {
        temps: AnnualSeries::new(1880, temps).unwrap(),
        co2_ppm: AnnualSeries::new(1880, co2).unwrap(),
        tsi_wm2: AnnualSeries::new(1880, tsi).unwrap(),
    }
}

fn bench_config() -> SimConfig {
    let mut config = SimConfig::future(Default::default(), 7);
    config.n_sequences = 2;
    config.inference = InferenceSettings {
        n_draws: 500,
        burn_in: 100,
    };
    config
}

fn sweep_paths(c: &mut Criterion) {
    let data = synthetic_data();
    let base = bench_config();
    let mut design_rng = rng::substream(7, &[stream::DESIGN]);
    let mut design = lhs_sample(8, &mut design_rng).unwrap();
    for row in &mut design.rows {
        // shrink the market so a bench iteration stays in the seconds range
        row.n_traders = 20 + row.n_traders / 10;
        row.n_edge = row.n_edge.max(row.n_traders);
    }

    let row = |i: usize| -> SweepRow { sweep_row(i, &design.rows[i], 1, &base, &data, 7) };

    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("map", "parallel_feature"), |b| {
        b.iter(|| par::map_indexed(design.rows.len(), row))
    });
    group.bench_function(BenchmarkId::new("map", "serial"), |b| {
        b.iter(|| par::map_indexed_serial(design.rows.len(), row))
    });
    group.finish();
}

criterion_group!(benches, sweep_paths);
criterion_main!(benches);
