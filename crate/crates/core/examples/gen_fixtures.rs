//! Regenerates the bundled synthetic datasets in `data/`.
//!
//! The series are built from the simulator's own truth equation with known
//! coefficients: an exponential CO2 ramp (close to the observed record and a
//! high-emissions continuation), a solar series that rises to mid-century and
//! then sags, and temperatures driven by a superposition of both forcings
//! plus AR(1) noise. The superposition matters: it produces the qualitative
//! historical shape (early-century warming, mid-century plateau, late rise)
//! that makes the solar model genuinely ahead of the CO2 model until the
//! plateau ends.
//!
//! Usage: cargo run --release --example gen_fixtures [-- --out-dir data --check]

use std::path::PathBuf;

use rand_distr::{Distribution, Normal};

use climarket_core::climate::{smooth_tsi_11yr, ForcingKind};
use climarket_core::rng::{self, stream};
use climarket_core::series::{load_series_csv, AnnualSeries};
use climarket_core::sim::{run_simulation, DataBundle, ParamSet, SimConfig};

const FIRST_YEAR: i32 = 1880;
const LAST_TEMP_YEAR: i32 = 2014;
const LAST_FORCING_YEAR: i32 = 2100;

const GEN_SEED: u64 = 0x0032;
const ALPHA: f64 = -0.55;
const BETA_CO2: f64 = 4.3; // deg C per ln(ppm), ~3 deg C per doubling
const BETA_TSI: f64 = 0.40; // deg C per W/m^2 (on the smoothed series)
const RHO: f64 = 0.25;
const SIGMA: f64 = 0.05;

/// Historical segment: convex exponential, nearly flat before 1940 so the
/// early-century warming cannot be a CO2 story. Future segment: C^1 quadratic
/// continuation reaching ~900 ppm by 2100.
fn ppm(year: i32) -> f64 {
    if year <= 2014 {
        278.0 + 122.0 * (f64::from(year - 2014) / 29.0).exp()
    } else {
        let dy = f64::from(year - 2014);
        400.0 + (122.0 / 29.0) * dy + 0.012 * dy * dy
    }
}

fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// Secular solar trend: a rise ending in the late 1920s, a mild sag from the
/// mid-1940s to the late 1960s (the mid-century plateau), flat after. The
/// rise completes BEFORE trading starts in 1931: the first trading windows
/// then open onto an ambiguous plateau where neither model has a fresh trend
/// to explain, rather than handing the solar model an immediate rout. On top,
/// multi-decadal oscillations long enough to survive the 11-year smoothing —
/// they decorrelate the two forcings, which is what lets a regression tell
/// them apart on finite windows. The amplitudes are kept modest so the
/// late-century record stays cleanly CO2-shaped: the expanding calibration
/// window never forgets the early solar rise, and an oversized rise leaves so
/// much structured residual in the CO2 fit that both models degenerate into
/// persistence forecasts.
fn tsi_base(year: i32) -> f64 {
    let y = f64::from(year);
    1360.30 + 0.64 * smoothstep((y - 1895.0) / 33.0) - 0.25 * smoothstep((y - 1944.0) / 24.0)
        + 0.21 * (f64::from(year - 1885) * std::f64::consts::TAU / 23.0).sin()
        + 0.145 * (f64::from(year - 1902) * std::f64::consts::TAU / 37.0).sin()
}

fn tsi_raw(year: i32) -> f64 {
    let phase = f64::from(year - 1883) * std::f64::consts::TAU / 11.0;
    tsi_base(year) + 0.40 * phase.sin()
}

fn round(x: f64, places: u32) -> f64 {
    let scale = 10f64.powi(places as i32);
    (x * scale).round() / scale
}

fn write_csv(path: &PathBuf, header: &str, series: &AnnualSeries, places: u32) {
    let mut out = String::from(header);
    out.push('\n');
    for (year, value) in series.iter_years() {
        out.push_str(&format!("{year},{}\n", round(value, places)));
    }
    std::fs::write(path, out).unwrap_or_else(|e| panic!("write {}: {e}", path.display()));
    println!("wrote {} ({} years)", path.display(), series.len());
}

/// Builds the three series exactly as the simulator will see them: values are
/// rounded to the CSV precision BEFORE the temperatures are generated, so the
/// written files and the in-memory series used by `--scan` are identical.
fn build_series(gen_seed: u64) -> (AnnualSeries, AnnualSeries, AnnualSeries) {
    let years: Vec<i32> = (FIRST_YEAR..=LAST_FORCING_YEAR).collect();
    let co2 =
        AnnualSeries::new(FIRST_YEAR, years.iter().map(|&y| round(ppm(y), 2)).collect()).unwrap();
    let tsi = AnnualSeries::new(
        FIRST_YEAR,
        years.iter().map(|&y| round(tsi_raw(y), 3)).collect(),
    )
    .unwrap();
    let tsi_smooth = smooth_tsi_11yr(&tsi);

    let mut rng = rng::substream(gen_seed, &[stream::TRUTH]);
    let innov = Normal::new(0.0, SIGMA).unwrap();
    let stationary = Normal::new(0.0, SIGMA / (1.0 - RHO * RHO).sqrt()).unwrap();
    let mut e = stationary.sample(&mut rng);
    let l0 = co2.value_for_year(FIRST_YEAR).unwrap().ln();
    let s0 = tsi_smooth.value_for_year(FIRST_YEAR).unwrap();
    let temps: Vec<f64> = (FIRST_YEAR..=LAST_TEMP_YEAR)
        .map(|y| {
            let mean = ALPHA
                + BETA_CO2 * (co2.value_for_year(y).unwrap().ln() - l0)
                + BETA_TSI * (tsi_smooth.value_for_year(y).unwrap() - s0);
            let t = mean + e;
            e = RHO * e + innov.sample(&mut rng);
            round(t, 3)
        })
        .collect();
    let temps = AnnualSeries::new(FIRST_YEAR, temps).unwrap();
    (co2, tsi, temps)
}

fn generate(out_dir: &PathBuf) {
    let (co2, tsi, temps) = build_series(GEN_SEED);
    std::fs::create_dir_all(out_dir).expect("create output directory");
    write_csv(&out_dir.join("co2_synthetic.csv"), "year,ppm", &co2, 2);
    write_csv(&out_dir.join("tsi_synthetic.csv"), "year,wm2", &tsi, 3);
    write_csv(
        &out_dir.join("temperature_synthetic.csv"),
        "year,anomaly_c",
        &temps,
        3,
    );
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn check(out_dir: &PathBuf, seeds: u64) {
    let data = DataBundle {
        temps: load_series_csv(&out_dir.join("temperature_synthetic.csv"), "year", "anomaly_c")
            .unwrap(),
        co2_ppm: load_series_csv(&out_dir.join("co2_synthetic.csv"), "year", "ppm").unwrap(),
        tsi_wm2: load_series_csv(&out_dir.join("tsi_synthetic.csv"), "year", "wm2").unwrap(),
    };

    println!("\n== historical mode, {seeds} seeds, default params ==");
    let runs: Vec<_> = (0..seeds)
        .map(|s| run_simulation(&SimConfig::historical(ParamSet::default(), s), &data).unwrap())
        .collect();
    let n_seq = runs[0].records.len();
    for i in 0..n_seq {
        let fracs: Vec<f64> = runs.iter().map(|r| r.records[i].frac_true).collect();
        let trades: f64 =
            runs.iter().map(|r| r.records[i].trades as f64).sum::<f64>() / seeds as f64;
        println!(
            "  seq {:2} end {}  median frac_co2 {:.3}  mean trades {:.0}",
            i + 1,
            runs[0].records[i].end_year,
            median(fracs),
            trades
        );
    }

    for true_model in [ForcingKind::LogCo2, ForcingKind::Tsi] {
        println!("\n== future mode, true model {true_model}, {seeds} seeds ==");
        let params = ParamSet {
            true_model,
            ..ParamSet::default()
        };
        let runs: Vec<_> = (0..seeds)
            .map(|s| run_simulation(&SimConfig::future(params, s), &data).unwrap())
            .collect();
        for i in 0..runs[0].records.len() {
            let fracs: Vec<f64> = runs.iter().map(|r| r.records[i].frac_true).collect();
            let trades: f64 =
                runs.iter().map(|r| r.records[i].trades as f64).sum::<f64>() / seeds as f64;
            println!(
                "  seq {:2} end {}  median frac_true {:.3}  mean trades {:.0}",
                i + 1,
                runs[0].records[i].end_year,
                median(fracs),
                trades
            );
        }
        let flags: usize = runs.iter().map(|r| r.rhat_flags).sum();
        println!("  rhat flags across runs: {flags}");
    }

    for true_model in [ForcingKind::LogCo2, ForcingKind::Tsi] {
        println!("\n== segmentation effect at sequence 3, true model {true_model}, {seeds} paired seeds ==");
        let with_seg = |seg: f64, s: u64| {
            let params = ParamSet {
                true_model,
                seg,
                ..ParamSet::default()
            };
            run_simulation(&SimConfig::future(params, s), &data).unwrap().records[2].frac_true
        };
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        let mut wins = 0usize;
        let mut ties = 0usize;
        for s in 0..seeds {
            let a = with_seg(0.05, s);
            let b = with_seg(0.95, s);
            if a > b {
                wins += 1;
            } else if a == b {
                ties += 1;
            }
            lo.push(a);
            hi.push(b);
        }
        println!(
            "  median seg=0.05: {:.3}  median seg=0.95: {:.3}  low-seg wins {wins}/{} ties {ties}",
            median(lo),
            median(hi),
            seeds
        );
    }
}

/// One-line summary of the three acceptance-relevant statistics for a
/// candidate generator seed: historical medians at the 1972 and 2014
/// sequence ends (20 market seeds) and the best median fraction-correct
/// through sequence 4 in each future mode (10 market seeds).
fn scan(gen_seeds: &[u64]) {
    println!("gen_seed | h1972  h2014 | fut_co2 fut_tsi (max median through seq 4)");
    for &gs in gen_seeds {
        let (co2, tsi, temps) = build_series(gs);
        let data = DataBundle {
            temps,
            co2_ppm: co2,
            tsi_wm2: tsi,
        };
        let hist: Vec<_> = (0..20)
            .map(|s| run_simulation(&SimConfig::historical(ParamSet::default(), s), &data).unwrap())
            .collect();
        let med_at = |idx: usize| median(hist.iter().map(|r| r.records[idx].frac_true).collect());
        let fut = |true_model: ForcingKind| -> f64 {
            let params = ParamSet {
                true_model,
                ..ParamSet::default()
            };
            let runs: Vec<_> = (0..10)
                .map(|s| run_simulation(&SimConfig::future(params, s), &data).unwrap())
                .collect();
            (0..4)
                .map(|i| median(runs.iter().map(|r| r.records[i].frac_true).collect()))
                .fold(f64::NEG_INFINITY, f64::max)
        };
        println!(
            "  0x{gs:04X} | {:.3}  {:.3} |  {:.3}   {:.3}",
            med_at(6),
            med_at(13),
            fut(ForcingKind::LogCo2),
            fut(ForcingKind::Tsi)
        );
    }
}

/// Full historical arc for one candidate generator seed: per-sequence median
/// fraction believing CO2 and median believer-wealth gap across market seeds.
fn arc(gen_seed: u64) {
    let (co2, tsi, temps) = build_series(gen_seed);
    let data = DataBundle {
        temps,
        co2_ppm: co2,
        tsi_wm2: tsi,
    };
    let runs: Vec<_> = (0..20)
        .map(|s| run_simulation(&SimConfig::historical(ParamSet::default(), s), &data).unwrap())
        .collect();
    println!("gen_seed 0x{gen_seed:04X} historical arc (20 market seeds)");
    for i in 0..runs[0].records.len() {
        let frac = median(runs.iter().map(|r| r.records[i].frac_true).collect());
        let gap = median(runs.iter().map(|r| r.records[i].wealth_gap_true).collect());
        println!(
            "  seq {:2} end {}  median frac_co2 {:.3}  median wealth gap {:+.3}",
            i + 1,
            runs[0].records[i].end_year,
            frac,
            gap
        );
    }
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut out_dir = PathBuf::from("data");
    let mut do_check = false;
    let mut scan_seeds: Option<Vec<u64>> = None;
    let mut arc_seed: Option<u64> = None;
    let mut seeds = 20u64;
    let mut i = 0;
    while i < args.len() {
        match args[i].as_str() {
            "--out-dir" => {
                i += 1;
                out_dir = PathBuf::from(&args[i]);
            }
            "--check" => do_check = true,
            "--seeds" => {
                i += 1;
                seeds = args[i].parse().expect("numeric --seeds");
            }
            "--scan" => {
                i += 1;
                let (lo, hi) = args[i]
                    .split_once("..")
                    .expect("--scan takes an inclusive range like 0..24");
                let lo: u64 = lo.parse().expect("numeric range");
                let hi: u64 = hi.parse().expect("numeric range");
                scan_seeds = Some((lo..=hi).collect());
            }
            "--arc" => {
                i += 1;
                arc_seed = Some(args[i].parse().expect("numeric --arc seed"));
            }
            other => panic!("unknown argument {other}"),
        }
        i += 1;
    }
    if let Some(gen_seeds) = scan_seeds {
        scan(&gen_seeds);
        return;
    }
    if let Some(gs) = arc_seed {
        arc(gs);
        return;
    }
    generate(&out_dir);
    if do_check {
        check(&out_dir, seeds);
    }
}
