//! Full simulation orchestration: sequences of six trading years, yearly
//! recalibration → quoting → CDA session, settlement, belief revision, and
//! metric collection, in historical and future modes.
//!
//! Mode differences. FUTURE mode calibrates the chosen true model on the
//! historical record, simulates one stochastic temperature continuation for
//! the whole run, and starts trading the year after the record ends.
//! HISTORICAL mode replays the actual record — sequences are laid out to end
//! exactly at the record's final year, and settlement uses observed
//! temperatures (no truth process).


use crate::bayes::{self, InferenceSettings, PosteriorDraws};
use crate::climate::{calibrate_truth, smooth_tsi_11yr, to_log_co2, ForcingKind};
use crate::market::{make_binning, settle_sequence, Ledger, Market, OrderSpec};
use crate::network::{clamp_n_edges, generate_network, richest_neighbor};
use crate::rng::{self, stream};
use crate::series::AnnualSeries;
use crate::traders::{
    self, choose_targets, quote_prices, reservation_prices, IdeologyConvention, Trader,
};
use crate::truth::{generate_future, TruthScenario};
use crate::{Error, Result};

use rand::seq::SliceRandom;

/// The six swept behavioural/structural parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSet {
    pub ideo: f64,
    pub n_edge: usize,
    pub n_traders: usize,
    pub risk_tak: f64,
    pub seg: f64,
    pub true_model: ForcingKind,
}

impl ParamSet {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("ideo", self.ideo),
            ("risk_tak", self.risk_tak),
            ("seg", self.seg),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0,1], got {v}")));
            }
        }
        if self.n_traders < 4 {
            return Err(Error::Config(format!(
                "n_traders must be at least 4, got {}",
                self.n_traders
            )));
        }
        Ok(())
    }
}

impl Default for ParamSet {
    /// Mid-range defaults used by the headline scenario runs.
    fn default() -> Self {
        Self {
            ideo: 0.5,
            n_edge: 150,
            n_traders: 150,
            risk_tak: 0.5,
            seg: 0.05,
            true_model: ForcingKind::LogCo2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Historical,
    Future,
}

/// Which per-run summary feeds the sensitivity analysis. The summary itself
/// is under-specified upstream; time-averaging over sequence ends is the
/// default, the terminal value is kept as a comparison flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreKind {
    #[default]
    TimeAverage,
    Terminal,
}

impl ScoreKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "time_average" | "time-average" | "mean" => Ok(Self::TimeAverage),
            "terminal" | "final" => Ok(Self::Terminal),
            other => Err(Error::InvalidArgument(format!(
                "unknown score kind '{other}' (expected time_average or terminal)"
            ))),
        }
    }

    /// Canonical name accepted back by [`ScoreKind::parse`].
    pub fn label(self) -> &'static str {
        match self {
            Self::TimeAverage => "time_average",
            Self::Terminal => "terminal",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub params: ParamSet,
    pub seq_length_years: usize,
    pub n_sequences: usize,
    pub bins_k: usize,
    pub bins_lo: f64,
    pub bins_hi: f64,
    pub inference: InferenceSettings,
    pub mode: Mode,
    pub master_seed: u64,
    /// CDA sessions per simulated year (1 per the market dynamics; higher
    /// values are an experimentation knob).
    pub passes_per_year: usize,
    pub ideology_convention: IdeologyConvention,
    /// Which model counts as "true" for historical-mode scoring.
    pub historical_true_model: ForcingKind,
    pub score_kind: ScoreKind,
}

impl SimConfig {
    pub fn future(params: ParamSet, master_seed: u64) -> Self {
        Self {
            params,
            seq_length_years: 6,
            n_sequences: 8,
            bins_k: 10,
            bins_lo: -1.0,
            bins_hi: 3.0,
            inference: InferenceSettings::default(),
            mode: Mode::Future,
            master_seed,
            passes_per_year: 1,
            ideology_convention: IdeologyConvention::Prose,
            historical_true_model: ForcingKind::LogCo2,
            score_kind: ScoreKind::TimeAverage,
        }
    }

    pub fn historical(params: ParamSet, master_seed: u64) -> Self {
        Self {
            n_sequences: 14,
            mode: Mode::Historical,
            ..Self::future(params, master_seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.seq_length_years == 0 {
            return Err(Error::Config("seq_length_years must be positive".into()));
        }
        if self.n_sequences == 0 {
            return Err(Error::Config("n_sequences must be positive".into()));
        }
        if self.passes_per_year == 0 {
            return Err(Error::Config("passes_per_year must be positive".into()));
        }
        self.inference.validate()?;
        Ok(())
    }

    /// The model scored as "true" in convergence metrics.
    pub fn scored_model(&self) -> ForcingKind {
        match self.mode {
            Mode::Future => self.params.true_model,
            Mode::Historical => self.historical_true_model,
        }
    }
}

/// Raw input series: temperature anomalies plus the two candidate forcings.
/// Forcings must cover the historical record and, in FUTURE mode, every
/// simulated year (traders have common knowledge of future forcings).
#[derive(Debug, Clone)]
pub struct DataBundle {
    pub temps: AnnualSeries,
    pub co2_ppm: AnnualSeries,
    pub tsi_wm2: AnnualSeries,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceRecord {
    /// 1-based sequence index.
    pub sequence: usize,
    pub end_year: i32,
    /// Fraction believing the scored model after settlement and revision.
    pub frac_true: f64,
    /// Trades executed across the sequence's trading years.
    pub trades: usize,
    /// Mean trade price per bin over the sequence (None where no bin trades).
    pub mean_prices: Vec<Option<f64>>,
    /// Mean post-settlement cash of scored-model believers minus the mean for
    /// the rest, measured before revision; NaN when either side is empty.
    pub wealth_gap_true: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub records: Vec<SequenceRecord>,
    /// Fraction believing the scored model at initialization.
    pub initial_frac_true: f64,
    /// Edge budget actually used when the sampled one was lifted to n.
    pub clamped_n_edges: Option<usize>,
    /// Number of posterior fits whose split-chain diagnostic was flagged.
    pub rhat_flags: usize,
}

impl SimResult {
    /// Time-averaged convergence score: mean fraction-correct over sequence
    /// ends.
    pub fn convergence_score(&self) -> f64 {
        let n = self.records.len() as f64;
        self.records.iter().map(|r| r.frac_true).sum::<f64>() / n
    }

    /// Terminal-value variant: the final sequence's fraction-correct.
    pub fn terminal_score(&self) -> f64 {
        self.records.last().expect("at least one sequence").frac_true
    }

    pub fn score(&self, kind: ScoreKind) -> f64 {
        match kind {
            ScoreKind::TimeAverage => self.convergence_score(),
            ScoreKind::Terminal => self.terminal_score(),
        }
    }
}

/// Run one simulation. Fully determined by `config.master_seed`.
/// Validate data coverage for a configuration without running anything:
/// enough calibration history before the first trading year, and forcings
/// spanning the record plus (FUTURE mode) every settlement year. The same
/// check guards [`run_simulation`]; sweep drivers call it up front so a
/// global coverage problem surfaces as one configuration error instead of a
/// per-row failure.
pub fn check_coverage(config: &SimConfig, data: &DataBundle) -> Result<()> {
    let seq_len = config.seq_length_years as i32;
    let horizon = config.n_sequences as i32 * seq_len;
    let first_seq_start = match config.mode {
        Mode::Future => data.temps.end_year() + 1,
        Mode::Historical => data.temps.end_year() - horizon + 1,
    };
    if first_seq_start - data.temps.start_year() < 30 {
        return Err(Error::Config(format!(
            "need at least 30 calibration years before trading starts in {first_seq_start}; \
             temperature record starts {}",
            data.temps.start_year()
        )));
    }
    let forcing_end_needed = match config.mode {
        Mode::Future => first_seq_start + horizon - 1,
        Mode::Historical => data.temps.end_year(),
    };
    for (name, s) in [("co2", &data.co2_ppm), ("tsi", &data.tsi_wm2)] {
        if !s.covers_range(data.temps.start_year(), forcing_end_needed) {
            return Err(Error::Config(format!(
                "{name} series ({}..={}) must cover {}..={forcing_end_needed}",
                s.start_year(),
                s.end_year(),
                data.temps.start_year()
            )));
        }
    }
    Ok(())
}

pub fn run_simulation(config: &SimConfig, data: &DataBundle) -> Result<SimResult> {
    config.validate()?;
    check_coverage(config, data)?;
    let seq_len = config.seq_length_years as i32;
    let horizon = config.n_sequences as i32 * seq_len;

    // Sequence layout: FUTURE trades the years after the record; HISTORICAL
    // counts back from the record's end so the final sequence settles on the
    // final observed year.
    let first_seq_start = match config.mode {
        Mode::Future => data.temps.end_year() + 1,
        Mode::Historical => data.temps.end_year() - horizon + 1,
    };
    let log_co2 = to_log_co2(&data.co2_ppm)?;
    let tsi = smooth_tsi_11yr(&data.tsi_wm2);
    let forcing_of = |kind: ForcingKind| -> &AnnualSeries {
        match kind {
            ForcingKind::LogCo2 => &log_co2,
            ForcingKind::Tsi => &tsi,
        }
    };

    // Realized temperatures over the trading years.
    let realized = match config.mode {
        Mode::Historical => data
            .temps
            .window(first_seq_start, data.temps.end_year())?,
        Mode::Future => {
            let true_forcing = forcing_of(config.params.true_model);
            let fit = calibrate_truth(
                &data.temps,
                &true_forcing.window(data.temps.start_year(), data.temps.end_year())?,
                config.params.true_model,
            )?;
            let scenario =
                TruthScenario::new(fit, true_forcing.clone(), horizon as usize)?;
            let mut truth_rng = rng::substream(config.master_seed, &[stream::TRUTH]);
            generate_future(&scenario, &mut truth_rng)
        }
    };

    let mut traders = traders::init_traders(
        config.params.n_traders,
        config.params.risk_tak,
        config.params.ideo,
        &mut rng::substream(config.master_seed, &[stream::TRADERS]),
    )?;
    let beliefs: Vec<ForcingKind> = traders.iter().map(|t| t.belief).collect();
    let (n_edges, clamped) = clamp_n_edges(config.params.n_traders, config.params.n_edge);
    let net = generate_network(
        config.params.n_traders,
        n_edges,
        config.params.seg,
        &beliefs,
        &mut rng::substream(config.master_seed, &[stream::NETWORK]),
    )?;

    run_prepared(
        config,
        data,
        &log_co2,
        &tsi,
        &realized,
        first_seq_start,
        &mut traders,
        &net,
        clamped.then_some(n_edges),
    )
}

/// The inner loop, with traders and network already constructed (split out so
/// tests can run with hand-built populations).
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_prepared(
    config: &SimConfig,
    data: &DataBundle,
    log_co2: &AnnualSeries,
    tsi: &AnnualSeries,
    realized: &AnnualSeries,
    first_seq_start: i32,
    traders: &mut [Trader],
    net: &crate::network::Network,
    clamped_n_edges: Option<usize>,
) -> Result<SimResult> {
    let n = traders.len();
    let k = config.bins_k;
    let bins = make_binning(k, config.bins_lo, config.bins_hi)?;
    let mut market = Market::new(bins);
    let mut ledger = Ledger::new(n, k, 1.0);
    let scored = config.scored_model();
    let forcing_of = |kind: ForcingKind| -> &AnnualSeries {
        match kind {
            ForcingKind::LogCo2 => log_co2,
            ForcingKind::Tsi => tsi,
        }
    };

    let frac_believing = |traders: &[Trader]| {
        traders.iter().filter(|t| t.belief == scored).count() as f64 / n as f64
    };
    let initial_frac_true = frac_believing(traders);

    let mut known = data
        .temps
        .window(data.temps.start_year(), first_seq_start - 1)?;
    let mut records = Vec::with_capacity(config.n_sequences);
    let mut rhat_flags = 0usize;
    let seq_len = config.seq_length_years as i32;

    for seq in 0..config.n_sequences {
        let seq_start = first_seq_start + seq as i32 * seq_len;
        let t_star = seq_start + seq_len - 1;
        ledger.endow_complete_sets();
        let cash_at_start = ledger.total_cash();

        let mut seq_trades = 0usize;
        let mut price_sums = vec![0.0f64; k];
        let mut price_counts = vec![0usize; k];

        for year in seq_start..=t_star {
            let year_idx = (year - first_seq_start) as u64;
            // One posterior + predictive per model per year, shared by every
            // trader holding that model (beliefs depend only on model + data).
            let mut model_reservations: [Option<Vec<f64>>; 2] = [None, None];
            for (class, kind) in [(0u64, ForcingKind::LogCo2), (1u64, ForcingKind::Tsi)] {
                if !traders.iter().any(|t| t.belief == kind) {
                    continue;
                }
                let forcing = forcing_of(kind);
                let fit_window =
                    forcing.window(known.start_year(), known.end_year())?;
                let mut post_rng = rng::substream(
                    config.master_seed,
                    &[stream::POSTERIOR, year_idx, class],
                );
                let posterior: PosteriorDraws = bayes::sample_posterior(
                    &known,
                    &fit_window,
                    kind,
                    config.inference,
                    &mut post_rng,
                )?;
                if posterior.diagnostics.flagged {
                    rhat_flags += 1;
                }
                let mut pred_rng = rng::substream(
                    config.master_seed,
                    &[stream::PREDICTIVE, year_idx, class],
                );
                let pred =
                    bayes::predictive_at(&posterior, &known, forcing, t_star, &mut pred_rng)?;
                let probs = bayes::bin_probabilities(&pred, market.bins());
                model_reservations[class as usize] = Some(reservation_prices(&probs));
            }
            let reservations_for = |t: &Trader| -> &[f64] {
                let class = match t.belief {
                    ForcingKind::LogCo2 => 0,
                    ForcingKind::Tsi => 1,
                };
                model_reservations[class]
                    .as_deref()
                    .expect("posterior computed for every held belief")
            };

            for pass in 0..config.passes_per_year as u64 {
                let mut session_rng = rng::substream(
                    config.master_seed,
                    &[stream::MARKET, year_idx, pass],
                );
                let mut arrival: Vec<usize> = (0..n).collect();
                arrival.shuffle(&mut session_rng);
                for &tid in &arrival {
                    let trader = &traders[tid];
                    let reservations = reservations_for(trader);
                    let (buy_bin, sell_bin) =
                        choose_targets(ledger.holdings(tid), &mut session_rng);
                    let (buy_price, _) =
                        quote_prices(reservations[buy_bin], trader.risk_tak, &mut session_rng);
                    let buy = Some(OrderSpec {
                        trader: tid,
                        security: buy_bin,
                        limit_price: buy_price,
                    });
                    let sell = sell_bin.map(|sec| {
                        let (_, sell_price) =
                            quote_prices(reservations[sec], trader.risk_tak, &mut session_rng);
                        OrderSpec {
                            trader: tid,
                            security: sec,
                            limit_price: sell_price,
                        }
                    });
                    let outcome = market.submit_arrival(&mut ledger, year, buy, sell);
                    for trade in &outcome.trades {
                        seq_trades += 1;
                        price_sums[trade.security] += trade.price;
                        price_counts[trade.security] += 1;
                    }
                }
                market.end_period();
            }

            debug_assert!(
                (ledger.total_cash() - cash_at_start).abs() < 1e-6,
                "cash not conserved within sequence {seq}"
            );
            debug_assert!((0..k).all(|s| ledger.total_units(s) == n as u64));

            known.push(
                realized
                    .value_for_year(year)
                    .expect("realized path covers all trading years"),
            )?;
        }

        // Settlement on the realized settlement-year temperature, then
        // simultaneous belief revision on post-settlement wealth.
        let realized_temp = realized
            .value_for_year(t_star)
            .expect("realized path covers t_star");
        settle_sequence(&market, &mut ledger, realized_temp);
        let wealth: Vec<f64> = (0..n).map(|t| ledger.cash(t)).collect();
        let wealth_gap_true = {
            let (mut sum_t, mut n_t, mut sum_o, mut n_o) = (0.0, 0usize, 0.0, 0usize);
            for (t, &w) in traders.iter().zip(&wealth) {
                if t.belief == scored {
                    sum_t += w;
                    n_t += 1;
                } else {
                    sum_o += w;
                    n_o += 1;
                }
            }
            if n_t > 0 && n_o > 0 {
                sum_t / n_t as f64 - sum_o / n_o as f64
            } else {
                f64::NAN
            }
        };
        let mut revision_rng =
            rng::substream(config.master_seed, &[stream::REVISION, seq as u64]);
        let new_beliefs: Vec<ForcingKind> = (0..n)
            .map(|tid| {
                let rich = richest_neighbor(net, tid, &wealth);
                traders::revise_belief(
                    &traders[tid],
                    wealth[tid],
                    wealth[rich],
                    traders[rich].belief,
                    config.ideology_convention,
                    &mut revision_rng,
                )
            })
            .collect();
        for (t, b) in traders.iter_mut().zip(new_beliefs) {
            t.belief = b;
        }

        records.push(SequenceRecord {
            sequence: seq + 1,
            end_year: t_star,
            frac_true: frac_believing(traders),
            trades: seq_trades,
            mean_prices: price_sums
                .iter()
                .zip(&price_counts)
                .map(|(&s, &c)| (c > 0).then(|| s / c as f64))
                .collect(),
            wealth_gap_true,
        });
    }

    Ok(SimResult {
        records,
        initial_frac_true,
        clamped_n_edges,
        rhat_flags,
    })
}

/// Historical-mode entry point over the three observed series.
pub fn run_historical(
    config: &SimConfig,
    gistemp: AnnualSeries,
    co2_ppm: AnnualSeries,
    tsi_wm2: AnnualSeries,
) -> Result<SimResult> {
    let mut config = config.clone();
    config.mode = Mode::Historical;
    let data = DataBundle {
        temps: gistemp,
        co2_ppm,
        tsi_wm2,
    };
    run_simulation(&config, &data)
}

/// Write the per-run CSV: `sequence,end_year,frac_true,trades,score`, where
/// `score` is the running mean of `frac_true` (its final row equals
/// [`SimResult::convergence_score`]).
pub fn write_run_csv(result: &SimResult, path: &std::path::Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    })?;
    let io_err = |e: csv::Error| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    };
    w.write_record(["sequence", "end_year", "frac_true", "trades", "score"])
        .map_err(io_err)?;
    let mut running = 0.0;
    for (i, r) in result.records.iter().enumerate() {
        running += r.frac_true;
        let score = running / (i + 1) as f64;
        w.write_record(&[
            r.sequence.to_string(),
            r.end_year.to_string(),
            r.frac_true.to_string(),
            r.trades.to_string(),
            score.to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

/// Parse a run CSV back into `(sequence, end_year, frac_true, trades, score)`
/// rows (round-trip counterpart of [`write_run_csv`]).
pub fn read_run_csv(path: &std::path::Path) -> Result<Vec<(usize, i32, f64, usize, f64)>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    })?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| -> Result<&str> {
            rec.get(i).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("missing field {i}"),
            })
        };
        let parse_err = |what: &str| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("invalid {what}"),
        };
        rows.push((
            field(0)?.parse().map_err(|_| parse_err("sequence"))?,
            field(1)?.parse().map_err(|_| parse_err("end_year"))?,
            field(2)?.parse().map_err(|_| parse_err("frac_true"))?,
            field(3)?.parse().map_err(|_| parse_err("trades"))?,
            field(4)?.parse().map_err(|_| parse_err("score"))?,
        ));
    }
    Ok(rows)
}
