//! One-factor exploration of the sensitivity directions: hold everything at
//! the defaults and sweep a single parameter over a grid of values, many
//! seeds per value, reporting the mean convergence score. Used to verify the
//! directional effects the reduced-scale PRCC experiment should detect.
//!
//! Usage: cargo run --release --example probe -- <risk|edge|detail> [--seeds N]

use climarket_core::bayes::{self, InferenceSettings};
use climarket_core::climate::{smooth_tsi_11yr, to_log_co2, ForcingKind};
use climarket_core::market::make_binning;
use climarket_core::par;
use climarket_core::rng::{self, stream};
use climarket_core::sim::{run_simulation, DataBundle, ParamSet, SimConfig};
use climarket_core::series::load_series_csv;

fn load() -> DataBundle {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    DataBundle {
        temps: load_series_csv(&dir.join("temperature_synthetic.csv"), "year", "anomaly_c")
            .unwrap(),
        co2_ppm: load_series_csv(&dir.join("co2_synthetic.csv"), "year", "ppm").unwrap(),
        tsi_wm2: load_series_csv(&dir.join("tsi_synthetic.csv"), "year", "wm2").unwrap(),
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

fn sweep_one(
    data: &DataBundle,
    seeds: u64,
    label: &str,
    values: &[f64],
    make: impl Fn(f64) -> ParamSet + Sync,
) {
    println!("{label:>10} | mean score (sd)   | mean trades/run  [n={seeds} seeds, both models pooled]");
    for &v in values {
        let scores: Vec<(f64, f64)> = par::map_indexed(2 * seeds as usize, |i| {
            let true_model = if i % 2 == 0 {
                ForcingKind::LogCo2
            } else {
                ForcingKind::Tsi
            };
            let params = ParamSet {
                true_model,
                ..make(v)
            };
            let r = run_simulation(&SimConfig::future(params, (i / 2) as u64), data).unwrap();
            let trades: usize = r.records.iter().map(|rec| rec.trades).sum();
            (r.convergence_score(), trades as f64)
        });
        let (m, sd) = mean_sd(&scores.iter().map(|s| s.0).collect::<Vec<_>>());
        let (t, _) = mean_sd(&scores.iter().map(|s| s.1).collect::<Vec<_>>());
        println!("{v:>10.2} | {m:.4} ({sd:.4})   | {t:>8.0}");
    }
}

fn detail(data: &DataBundle, seeds: u64, risk_tak: f64) {
    println!("== per-sequence detail at risk_tak {risk_tak}, co2 true, {seeds} seeds ==");
    let runs: Vec<_> = par::map_indexed(seeds as usize, |s| {
        let params = ParamSet {
            risk_tak,
            ..ParamSet::default()
        };
        run_simulation(&SimConfig::future(params, s as u64), data).unwrap()
    });
    for i in 0..runs[0].records.len() {
        let frac = mean_sd(&runs.iter().map(|r| r.records[i].frac_true).collect::<Vec<_>>());
        let gap = mean_sd(
            &runs
                .iter()
                .map(|r| r.records[i].wealth_gap_true)
                .collect::<Vec<_>>(),
        );
        let trades = mean_sd(&runs.iter().map(|r| r.records[i].trades as f64).collect::<Vec<_>>());
        println!(
            "  seq {:2} end {}  frac {:.3} ({:.3})  wealth gap {:+.4} ({:.4})  trades {:>6.0}",
            i + 1,
            runs[0].records[i].end_year,
            frac.0,
            frac.1,
            gap.0,
            gap.1,
            trades.0
        );
    }
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mode = args.first().map(String::as_str).unwrap_or("risk");
    let mut seeds = 40u64;
    let mut i = 1;
    while i < args.len() {
        match args[i].as_str() {
            "--seeds" => {
                i += 1;
                seeds = args[i].parse().expect("numeric --seeds");
            }
            other => panic!("unknown argument {other}"),
        }
        i += 1;
    }
    let data = load();
    match mode {
        "risk" => sweep_one(
            &data,
            seeds,
            "risk_tak",
            &[0.0, 0.25, 0.5, 0.75, 1.0],
            |v| ParamSet {
                risk_tak: v,
                ..ParamSet::default()
            },
        ),
        "edge" => sweep_one(
            &data,
            seeds,
            "n_edge",
            &[100.0, 125.0, 150.0, 175.0, 200.0],
            |v| ParamSet {
                n_edge: v as usize,
                n_traders: 100,
                ..ParamSet::default()
            },
        ),
        "detail" => {
            detail(&data, seeds, 0.1);
            detail(&data, seeds, 0.9);
        }
        other => panic!("unknown mode {other} (expected risk, edge, or detail)"),
    }
}
