//! Forcing transforms and calibration of the truth-generating temperature model.
//!
//! The temperature record is modelled as `T(t) = alpha + beta * F(t) + e(t)`
//! with AR(1) errors `e(t) = rho * e(t-1) + N(0, sigma^2)`, where `F` is
//! either the natural log of the CO2 concentration or the 11-year-smoothed
//! total solar irradiance.

use crate::series::AnnualSeries;
use crate::{Error, Result};

/// Which forcing drives a climate model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ForcingKind {
    LogCo2,
    Tsi,
}

impl ForcingKind {
    pub fn label(self) -> &'static str {
        match self {
            ForcingKind::LogCo2 => "co2",
            ForcingKind::Tsi => "tsi",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "co2" | "log_co2" | "logco2" => Ok(ForcingKind::LogCo2),
            "tsi" => Ok(ForcingKind::Tsi),
            other => Err(Error::InvalidArgument(format!(
                "unknown forcing kind '{other}' (expected co2 or tsi)"
            ))),
        }
    }
}

impl std::fmt::Display for ForcingKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Fitted coefficients of the truth-generating model.
///
/// `sigma` is the innovation standard deviation of the AR(1) error process
/// (not the stationary sd). `last_residual` is the regression residual at
/// `end_year`, the final calibration year, used to splice simulated futures
/// continuously onto the historical record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClimateFit {
    pub kind: ForcingKind,
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub sigma: f64,
    pub last_residual: f64,
    pub end_year: i32,
}

/// Element-wise natural log of a CO2 concentration series (ppm).
pub fn to_log_co2(raw: &AnnualSeries) -> Result<AnnualSeries> {
    if let Some((year, v)) = raw.iter_years().find(|&(_, v)| v <= 0.0) {
        return Err(Error::Domain(format!(
            "non-positive CO2 concentration {v} ppm at year {year}"
        )));
    }
    raw.map(f64::ln)
}

/// Centered 11-year moving average of a TSI series (W/m²).
///
/// Near the series edges the window shrinks symmetrically: at distance `d < 5`
/// from an edge the average spans `[i-d, i+d]`, so the first and last years
/// are preserved rather than discarded.
pub fn smooth_tsi_11yr(raw: &AnnualSeries) -> AnnualSeries {
    let v = raw.values();
    let n = v.len();
    let smoothed: Vec<f64> = (0..n)
        .map(|i| {
            let h = 5.min(i).min(n - 1 - i);
            let window = &v[i - h..=i + h];
            window.iter().sum::<f64>() / window.len() as f64
        })
        .collect();
    AnnualSeries::new(raw.start_year(), smoothed).expect("smoothing preserves finiteness")
}

/// Fit `T = alpha + beta * F` by ordinary least squares, then estimate AR(1)
/// coefficients on the residuals by conditional least squares.
///
/// When the residuals carry no signal (noise-free data), `rho` is reported as
/// zero rather than left indeterminate.
pub fn calibrate_truth(
    temps: &AnnualSeries,
    forcing: &AnnualSeries,
    kind: ForcingKind,
) -> Result<ClimateFit> {
    if temps.start_year() != forcing.start_year() || temps.len() != forcing.len() {
        return Err(Error::InvalidArgument(format!(
            "temperature ({}..={}) and forcing ({}..={}) must cover the same years",
            temps.start_year(),
            temps.end_year(),
            forcing.start_year(),
            forcing.end_year()
        )));
    }
    let n = temps.len();
    if n < 10 {
        return Err(Error::InvalidArgument(format!(
            "calibration needs at least 10 years, got {n}"
        )));
    }

    let t = temps.values();
    let f = forcing.values();
    let f_mean = f.iter().sum::<f64>() / n as f64;
    let t_mean = t.iter().sum::<f64>() / n as f64;

    let sxx: f64 = f.iter().map(|&x| (x - f_mean).powi(2)).sum();
    if sxx <= f64::EPSILON * n as f64 * f_mean.powi(2).max(1.0) {
        return Err(Error::SingularDesign(
            "forcing series is constant (zero variance)".into(),
        ));
    }
    let sxy: f64 = f
        .iter()
        .zip(t)
        .map(|(&x, &y)| (x - f_mean) * (y - t_mean))
        .sum();

    let beta = sxy / sxx;
    let alpha = t_mean - beta * f_mean;

    let resid: Vec<f64> = t
        .iter()
        .zip(f)
        .map(|(&y, &x)| y - alpha - beta * x)
        .collect();

    // Conditional least squares on e(t) = rho * e(t-1) + innovation. When the
    // fit is essentially exact the residuals are float dust; autoregressing
    // dust produces an arbitrary coefficient, so report no persistence.
    let num: f64 = resid.windows(2).map(|w| w[1] * w[0]).sum();
    let den: f64 = resid[..n - 1].iter().map(|e| e * e).sum();
    let syy: f64 = t.iter().map(|&y| (y - t_mean).powi(2)).sum();
    let rss: f64 = resid.iter().map(|e| e * e).sum();
    let mut rho = if den <= 0.0 || rss <= 1e-20 * syy {
        0.0
    } else {
        num / den
    };
    rho = rho.clamp(-0.999, 0.999);

    let sigma2: f64 = resid
        .windows(2)
        .map(|w| (w[1] - rho * w[0]).powi(2))
        .sum::<f64>()
        / (n - 1) as f64;
    let sigma = sigma2.sqrt();

    Ok(ClimateFit {
        kind,
        alpha,
        beta,
        rho,
        sigma,
        last_residual: resid[n - 1],
        end_year: temps.end_year(),
    })
}

/// Plug-in standard error of the OLS slope under the fitted AR(1) error
/// covariance: `Var(beta) = w' Gamma w` with `w` the OLS slope weights and
/// `Gamma[s][t] = sigma^2 rho^|s-t| / (1 - rho^2)`.
pub fn beta_standard_error(forcing: &AnnualSeries, fit: &ClimateFit) -> f64 {
    let f = forcing.values();
    let n = f.len();
    let f_mean = f.iter().sum::<f64>() / n as f64;
    let sxx: f64 = f.iter().map(|&x| (x - f_mean).powi(2)).sum();
    let w: Vec<f64> = f.iter().map(|&x| (x - f_mean) / sxx).collect();
    let gamma0 = fit.sigma.powi(2) / (1.0 - fit.rho.powi(2));
    let mut var = 0.0;
    for s in 0..n {
        for t in 0..n {
            var += w[s] * w[t] * gamma0 * fit.rho.powi((s as i32 - t as i32).abs());
        }
    }
    var.max(0.0).sqrt()
}
