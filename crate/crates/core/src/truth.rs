//! Stochastic future temperature realizations under a chosen true model.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::climate::ClimateFit;
use crate::series::AnnualSeries;
use crate::{Error, Result};

/// A recipe for simulating future temperatures: calibrated coefficients plus
/// the (already-transformed) future forcing path to apply them to.
#[derive(Debug, Clone)]
pub struct TruthScenario {
    pub fit: ClimateFit,
    pub future_forcing: AnnualSeries,
    pub horizon_years: usize,
}

impl TruthScenario {
    pub fn new(fit: ClimateFit, future_forcing: AnnualSeries, horizon_years: usize) -> Result<Self> {
        if horizon_years == 0 {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        let first = fit.end_year + 1;
        let last = fit.end_year + horizon_years as i32;
        if !future_forcing.covers_range(first, last) {
            return Err(Error::InvalidArgument(format!(
                "future forcing ({}..={}) must cover {first}..={last}",
                future_forcing.start_year(),
                future_forcing.end_year()
            )));
        }
        Ok(Self {
            fit,
            future_forcing,
            horizon_years,
        })
    }
}

/// Simulate one future temperature path.
///
/// For each year `t` past calibration: `T(t) = alpha + beta * F(t) + e(t)`
/// with `e(t) = rho * e(t-1) + N(0, sigma^2)`, the chain seeded from the
/// historical `last_residual` so the simulated path splices continuously onto
/// the record. Deterministic for a fixed random stream.
pub fn generate_future(scenario: &TruthScenario, rng: &mut ChaCha8Rng) -> AnnualSeries {
    let fit = &scenario.fit;
    let start = fit.end_year + 1;
    let innovations = Normal::new(0.0, fit.sigma).expect("sigma >= 0 by ClimateFit contract");
    let mut e = fit.last_residual;
    let values: Vec<f64> = (0..scenario.horizon_years)
        .map(|i| {
            let year = start + i as i32;
            let f = scenario
                .future_forcing
                .value_for_year(year)
                .expect("coverage checked at construction");
            e = fit.rho * e + innovations.sample(rng);
            fit.alpha + fit.beta * f + e
        })
        .collect();
    AnnualSeries::new(start, values).expect("simulated path is finite and non-empty")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::climate::ForcingKind;
    use crate::rng::{self, stream};

    fn fit(alpha: f64, beta: f64, rho: f64, sigma: f64) -> ClimateFit {
        ClimateFit {
            kind: ForcingKind::LogCo2,
            alpha,
            beta,
            rho,
            sigma,
            last_residual: 0.0,
            end_year: 2014,
        }
    }

    fn forcing_from(start: i32, n: usize) -> AnnualSeries {
        AnnualSeries::new(start, (0..n).map(|t| 5.9 + 0.005 * t as f64).collect()).unwrap()
    }

    #[test]
    fn degenerate_noise_is_deterministic_line() {
        let scenario =
            TruthScenario::new(fit(0.2, 2.0, 0.0, 0.0), forcing_from(2015, 30), 30).unwrap();
        let mut rng = rng::substream(1, &[stream::TRUTH]);
        let out = generate_future(&scenario, &mut rng);
        assert_eq!(out.start_year(), 2015);
        assert_eq!(out.len(), 30);
        for (year, v) in out.iter_years() {
            let f = scenario.future_forcing.value_for_year(year).unwrap();
            assert!((v - (0.2 + 2.0 * f)).abs() < 1e-12);
        }
    }

    #[test]
    fn fixed_seed_reproduces_path() {
        let scenario =
            TruthScenario::new(fit(0.0, 1.0, 0.6, 0.1), forcing_from(2015, 50), 50).unwrap();
        let a = generate_future(&scenario, &mut rng::substream(9, &[stream::TRUTH]));
        let b = generate_future(&scenario, &mut rng::substream(9, &[stream::TRUTH]));
        assert_eq!(a, b);
        let c = generate_future(&scenario, &mut rng::substream(10, &[stream::TRUTH]));
        assert_ne!(a, c);
    }

    /// oracle: stationary AR(1) variance sigma^2/(1-rho^2) = 0.01/0.75
    /// = 0.013333... checked against the long-run sample variance.
    #[test]
    fn stationary_noise_variance() {
        let n = 10_000;
        let mut f = fit(0.0, 0.0, 0.5, 0.1);
        f.last_residual = 0.0;
        let flat = AnnualSeries::new(2015, vec![0.0; n]).unwrap();
        let scenario = TruthScenario::new(f, flat, n).unwrap();
        let mut rng = rng::substream(42, &[stream::TRUTH]);
        // alpha=beta=0 over zero forcing, so the output IS the noise chain
        let noise = generate_future(&scenario, &mut rng);
        let skip = 100; // discard transient from e(0)=0
        let tail = &noise.values()[skip..];
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        let var = tail.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / tail.len() as f64;
        let target = 0.01 / 0.75;
        assert!(
            (var - target).abs() < 0.05 * target,
            "var {var} vs stationary {target}"
        );
    }

    #[test]
    fn first_year_continues_from_last_residual() {
        let mut f = fit(0.1, 0.0, 0.8, 0.0); // sigma 0: innovation-free
        f.last_residual = 0.5;
        let flat = AnnualSeries::new(2015, vec![0.0; 3]).unwrap();
        let scenario = TruthScenario::new(f, flat, 3).unwrap();
        let out = generate_future(&scenario, &mut rng::substream(1, &[stream::TRUTH]));
        // e(2015) = 0.8 * 0.5 = 0.4, then decays by 0.8 each year
        assert!((out.values()[0] - (0.1 + 0.4)).abs() < 1e-12);
        assert!((out.values()[1] - (0.1 + 0.32)).abs() < 1e-12);
    }

    #[test]
    fn rejects_insufficient_forcing_coverage() {
        let err = TruthScenario::new(fit(0.0, 1.0, 0.0, 0.1), forcing_from(2015, 10), 20)
            .unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
        // forcing starting too late is also a gap
        let err2 =
            TruthScenario::new(fit(0.0, 1.0, 0.0, 0.1), forcing_from(2016, 40), 10).unwrap_err();
        assert!(matches!(err2, Error::InvalidArgument(_)));
    }
}
