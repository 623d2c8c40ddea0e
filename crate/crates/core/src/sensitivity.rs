//! Latin hypercube experiment design over the six swept parameters, replicate
//! sweep execution, partial rank correlation coefficients, and bootstrap
//! confidence intervals.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::climate::ForcingKind;
use crate::par;
use crate::rng::{self, stream};
use crate::sim::{run_simulation, DataBundle, ParamSet, SimConfig};
use crate::{Error, Result};

/// Column order used everywhere sweep data is tabulated.
pub const PARAM_NAMES: [&str; 6] = [
    "ideo",
    "n_edge",
    "n_traders",
    "risk_tak",
    "seg",
    "true_model",
];

/// Sampled marginals: `ideo, risk_tak, seg ~ U(0,1)`;
/// `n_edge ~ U(100,200)` and `n_traders ~ U(50,250)` rounded half-up;
/// `true_model ~ Bernoulli(0.5)` with CO2 encoded as 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub rows: Vec<ParamSet>,
    /// The underlying stratified unit-cube sample for the five continuous
    /// dimensions, in [`PARAM_NAMES`] order (minus `true_model`). Kept so the
    /// stratification property stays checkable after integer rounding.
    pub unit: Vec<[f64; 5]>,
}

impl DesignMatrix {
    pub fn n_points(&self) -> usize {
        self.rows.len()
    }
}

/// One stratified column: exactly one draw in each of the `n` equal-width
/// strata of [0,1), in shuffled stratum order.
fn stratified_column(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut strata: Vec<usize> = (0..n).collect();
    strata.shuffle(rng);
    strata
        .into_iter()
        .map(|s| (s as f64 + rng.random::<f64>()) / n as f64)
        .collect()
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

pub fn lhs_sample(n: usize, rng: &mut ChaCha8Rng) -> Result<DesignMatrix> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "design needs at least 2 points, got {n}"
        )));
    }
    let cols: Vec<Vec<f64>> = (0..5).map(|_| stratified_column(n, rng)).collect();
    let mut rows = Vec::with_capacity(n);
    let mut unit = Vec::with_capacity(n);
    for i in 0..n {
        let u = [cols[0][i], cols[1][i], cols[2][i], cols[3][i], cols[4][i]];
        unit.push(u);
        rows.push(ParamSet {
            ideo: u[0],
            n_edge: round_half_up(100.0 + 100.0 * u[1]),
            n_traders: round_half_up(50.0 + 200.0 * u[2]),
            risk_tak: u[3],
            seg: u[4],
            true_model: if rng.random_bool(0.5) {
                ForcingKind::LogCo2
            } else {
                ForcingKind::Tsi
            },
        });
    }
    Ok(DesignMatrix { rows, unit })
}

/// Outcome of one design row: the replicate-mean score, or an exclusion when
/// too many replicates failed.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub params: ParamSet,
    /// Mean score over successful replicates; `None` when the row is
    /// excluded (fewer than 80% of replicates succeeded).
    pub mean_score: Option<f64>,
    pub n_ok: usize,
    pub n_replicates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Design matrix and response for PRCC, with excluded rows dropped and
    /// `true_model` encoded 1 for CO2, 0 for TSI.
    pub fn xy(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for row in &self.rows {
            if let Some(score) = row.mean_score {
                x.push(param_vector(&row.params).to_vec());
                y.push(score);
            }
        }
        (x, y)
    }
}

pub fn param_vector(p: &ParamSet) -> [f64; 6] {
    [
        p.ideo,
        p.n_edge as f64,
        p.n_traders as f64,
        p.risk_tak,
        p.seg,
        match p.true_model {
            ForcingKind::LogCo2 => 1.0,
            ForcingKind::Tsi => 0.0,
        },
    ]
}

/// Execute one design row: `replicates` independent simulations, each on its
/// own random stream derived from `(master_seed, row index, replicate)`.
pub fn sweep_row(
    row_idx: usize,
    params: &ParamSet,
    replicates: usize,
    base: &SimConfig,
    data: &DataBundle,
    master_seed: u64,
) -> SweepRow {
    let mut scores = Vec::with_capacity(replicates);
    for rep in 0..replicates {
        let mut config = base.clone();
        config.params = *params;
        config.master_seed = rng::derive_seed(
            master_seed,
            &[stream::SWEEP, row_idx as u64, rep as u64],
        );
        if let Ok(result) = run_simulation(&config, data) {
            scores.push(result.score(config.score_kind));
        }
    }
    let n_ok = scores.len();
    // include only rows where at least 80% of replicates succeeded
    let mean_score = (n_ok > 0 && n_ok * 10 >= replicates * 8)
        .then(|| scores.iter().sum::<f64>() / n_ok as f64);
    SweepRow {
        params: *params,
        mean_score,
        n_ok,
        n_replicates: replicates,
    }
}

/// Run every design row (in parallel when the `parallel` feature is on);
/// deterministic per master seed regardless of scheduling.
pub fn run_sweep(
    design: &DesignMatrix,
    replicates: usize,
    base: &SimConfig,
    data: &DataBundle,
    master_seed: u64,
) -> Result<SweepResult> {
    if replicates == 0 {
        return Err(Error::InvalidArgument("replicates must be >= 1".into()));
    }
    let rows = par::map_indexed(design.rows.len(), |i| {
        sweep_row(i, &design.rows[i], replicates, base, data, master_seed)
    });
    Ok(SweepResult { rows })
}

/// Partial rank correlation coefficient of every column of `x` against `y`:
/// rank-transform all columns and the response (average ranks on ties),
/// residualize each ranked column and the ranked response on the remaining
/// ranked columns (least squares with intercept), and correlate the two
/// residual vectors.
pub fn prcc(x: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 10 {
        return Err(Error::InvalidArgument(format!(
            "PRCC needs at least 10 rows, got {n}"
        )));
    }
    if y.len() != n {
        return Err(Error::InvalidArgument(format!(
            "response length {} != design rows {n}",
            y.len()
        )));
    }
    let p = x[0].len();
    if x.iter().any(|r| r.len() != p) {
        return Err(Error::InvalidArgument("ragged design matrix".into()));
    }

    let mut ranked_cols = Vec::with_capacity(p);
    for j in 0..p {
        let col: Vec<f64> = x.iter().map(|r| r[j]).collect();
        if is_constant(&col) {
            return Err(Error::ConstantColumn(format!("input column {j}")));
        }
        ranked_cols.push(average_ranks(&col));
    }
    if is_constant(y) {
        return Err(Error::ConstantColumn("output column".into()));
    }
    let ranked_y = average_ranks(y);

    let mut out = Vec::with_capacity(p);
    for j in 0..p {
        let others: Vec<&[f64]> = (0..p)
            .filter(|&m| m != j)
            .map(|m| ranked_cols[m].as_slice())
            .collect();
        let res_x = residualize(&ranked_cols[j], &others)?;
        let res_y = residualize(&ranked_y, &others)?;
        out.push(pearson(&res_x, &res_y)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrccEntry {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrccReport {
    pub entries: Vec<PrccEntry>,
}

/// Percentile-bootstrap 95% confidence intervals around the full-sample PRCC
/// point estimates: `n_boot` row resamples with replacement, each re-ranked
/// and re-estimated. A degenerate resample (constant column) is redrawn, with
/// bounded retries.
pub fn bootstrap_ci(
    x: &[Vec<f64>],
    y: &[f64],
    n_boot: usize,
    rng: &mut ChaCha8Rng,
) -> Result<PrccReport> {
    if n_boot < 100 {
        return Err(Error::InvalidArgument(format!(
            "need at least 100 bootstrap replicates, got {n_boot}"
        )));
    }
    let estimates = prcc(x, y)?;
    let p = estimates.len();
    let n = x.len();
    let base_seed: u64 = rng.random();

    let boots: Vec<Result<Vec<f64>>> = par::map_indexed(n_boot, |b| {
        let mut brng = rng::substream(base_seed, &[stream::BOOTSTRAP, b as u64]);
        for _attempt in 0..100 {
            let mut bx = Vec::with_capacity(n);
            let mut by = Vec::with_capacity(n);
            for _ in 0..n {
                let i = brng.random_range(0..n);
                bx.push(x[i].clone());
                by.push(y[i]);
            }
            match prcc(&bx, &by) {
                Ok(v) => return Ok(v),
                Err(Error::ConstantColumn(_)) => continue, // degenerate: redraw
                Err(e) => return Err(e),
            }
        }
        Err(Error::RunFailed(format!(
            "bootstrap replicate {b}: 100 consecutive degenerate resamples"
        )))
    });

    let mut per_param: Vec<Vec<f64>> = vec![Vec::with_capacity(n_boot); p];
    for b in boots {
        let v = b?;
        for (j, e) in v.into_iter().enumerate() {
            per_param[j].push(e);
        }
    }

    let entries = estimates
        .iter()
        .enumerate()
        .map(|(j, &estimate)| {
            per_param[j].sort_by(f64::total_cmp);
            let lo = percentile(&per_param[j], 0.025);
            let hi = percentile(&per_param[j], 0.975);
            // percentile intervals can exclude the full-sample point estimate
            // in principle; widen so ci_low <= estimate <= ci_high holds
            PrccEntry {
                estimate,
                ci_low: lo.min(estimate),
                ci_high: hi.max(estimate),
            }
        })
        .collect();
    Ok(PrccReport { entries })
}

fn is_constant(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] == w[1])
}

/// 1-based ranks with average ranks for ties.
fn average_ranks(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Residuals of `target` regressed on `others` plus an intercept, via the
/// normal equations solved by Cholesky.
fn residualize(target: &[f64], others: &[&[f64]]) -> Result<Vec<f64>> {
    let n = target.len();
    let m = others.len() + 1; // intercept first
    let design = |row: usize, col: usize| -> f64 {
        if col == 0 {
            1.0
        } else {
            others[col - 1][row]
        }
    };
    let mut ata = vec![vec![0.0; m]; m];
    let mut atb = vec![0.0; m];
    for r in 0..n {
        for c1 in 0..m {
            let d1 = design(r, c1);
            atb[c1] += d1 * target[r];
            for c2 in c1..m {
                ata[c1][c2] += d1 * design(r, c2);
            }
        }
    }
    for c1 in 0..m {
        for c2 in 0..c1 {
            ata[c1][c2] = ata[c2][c1];
        }
        // tiny ridge keeps rank data well-posed without moving estimates
        ata[c1][c1] += 1e-10;
    }
    let coef = cholesky_solve(&mut ata, &mut atb)?;
    Ok((0..n)
        .map(|r| target[r] - (0..m).map(|c| coef[c] * design(r, c)).sum::<f64>())
        .collect())
}

/// In-place Cholesky solve of `A x = b` for symmetric positive-definite `A`.
fn cholesky_solve(a: &mut [Vec<f64>], b: &mut [f64]) -> Result<Vec<f64>> {
    let m = b.len();
    for i in 0..m {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= a[i][k] * a[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::SingularDesign(
                        "collinear columns in rank regression".into(),
                    ));
                }
                a[i][j] = s.sqrt();
            } else {
                a[i][j] = s / a[j][j];
            }
        }
    }
    // forward substitution L y = b
    for i in 0..m {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i][k] * b[k];
        }
        b[i] = s / a[i][i];
    }
    // back substitution L' x = y
    for i in (0..m).rev() {
        let mut s = b[i];
        for k in i + 1..m {
            s -= a[k][i] * b[k];
        }
        b[i] = s / a[i][i];
    }
    Ok(b.to_vec())
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va <= 0.0 || vb <= 0.0 {
        return Err(Error::ConstantColumn(
            "zero-variance residuals in PRCC".into(),
        ));
    }
    // rounding can push a perfect correlation a few ulps past +/-1
    Ok((cov / (va * vb).sqrt()).clamp(-1.0, 1.0))
}

/// Linear-interpolation percentile of an ascending-sorted slice.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

// --- CSV emission/ingestion -------------------------------------------------

fn io_err(path: &std::path::Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    }
}

pub fn write_design_csv(design: &DesignMatrix, path: &std::path::Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(io_err(path))?;
    w.write_record(PARAM_NAMES).map_err(io_err(path))?;
    for p in &design.rows {
        w.write_record(&param_record(p)).map_err(io_err(path))?;
    }
    w.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn param_record(p: &ParamSet) -> [String; 6] {
    [
        p.ideo.to_string(),
        p.n_edge.to_string(),
        p.n_traders.to_string(),
        p.risk_tak.to_string(),
        p.seg.to_string(),
        p.true_model.label().to_string(),
    ]
}

/// Parse a design CSV back into its parameter rows (round-trip counterpart
/// of [`write_design_csv`]; the unit-cube sample is not persisted).
pub fn read_design_csv(path: &std::path::Path) -> Result<Vec<ParamSet>> {
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
        let parse_err = |what: &str, raw: &str| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("invalid {what} '{raw}'"),
        };
        let get = |i: usize| rec.get(i).unwrap_or("");
        let f = |i: usize, what: &str| -> Result<f64> {
            get(i).parse().map_err(|_| parse_err(what, get(i)))
        };
        let u = |i: usize, what: &str| -> Result<usize> {
            get(i).parse().map_err(|_| parse_err(what, get(i)))
        };
        rows.push(ParamSet {
            ideo: f(0, "ideo")?,
            n_edge: u(1, "n_edge")?,
            n_traders: u(2, "n_traders")?,
            risk_tak: f(3, "risk_tak")?,
            seg: f(4, "seg")?,
            true_model: ForcingKind::parse(get(5))
                .map_err(|_| parse_err("true_model", get(5)))?,
        });
    }
    Ok(rows)
}

pub fn write_sweep_csv(sweep: &SweepResult, path: &std::path::Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(io_err(path))?;
    let mut header: Vec<&str> = PARAM_NAMES.to_vec();
    header.extend(["mean_score", "n_ok", "n_replicates"]);
    w.write_record(&header).map_err(io_err(path))?;
    for row in &sweep.rows {
        let mut rec: Vec<String> = param_record(&row.params).to_vec();
        rec.push(row.mean_score.map(|s| s.to_string()).unwrap_or_default());
        rec.push(row.n_ok.to_string());
        rec.push(row.n_replicates.to_string());
        w.write_record(&rec).map_err(io_err(path))?;
    }
    w.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn read_sweep_csv(path: &std::path::Path) -> Result<SweepResult> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    })?;
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: format!("missing column '{name}'"),
            })
    };
    let mut cols = Vec::new();
    for name in PARAM_NAMES
        .iter()
        .chain(["mean_score", "n_ok", "n_replicates"].iter())
    {
        cols.push(col(name)?);
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let parse_err = |what: &str, raw: &str| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("invalid {what} '{raw}'"),
        };
        let get = |i: usize| rec.get(cols[i]).unwrap_or("");
        let f = |i: usize, what: &str| -> Result<f64> {
            get(i).parse().map_err(|_| parse_err(what, get(i)))
        };
        let u = |i: usize, what: &str| -> Result<usize> {
            get(i).parse().map_err(|_| parse_err(what, get(i)))
        };
        let params = ParamSet {
            ideo: f(0, "ideo")?,
            n_edge: u(1, "n_edge")?,
            n_traders: u(2, "n_traders")?,
            risk_tak: f(3, "risk_tak")?,
            seg: f(4, "seg")?,
            true_model: ForcingKind::parse(get(5)).map_err(|_| {
                parse_err("true_model", get(5))
            })?,
        };
        let mean_score = if get(6).is_empty() {
            None
        } else {
            Some(f(6, "mean_score")?)
        };
        rows.push(SweepRow {
            params,
            mean_score,
            n_ok: u(7, "n_ok")?,
            n_replicates: u(8, "n_replicates")?,
        });
    }
    Ok(SweepResult { rows })
}

pub fn write_prcc_csv(report: &PrccReport, path: &std::path::Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(io_err(path))?;
    w.write_record(["param", "estimate", "ci_low", "ci_high"])
        .map_err(io_err(path))?;
    for (name, e) in PARAM_NAMES.iter().zip(&report.entries) {
        w.write_record(&[
            name.to_string(),
            e.estimate.to_string(),
            e.ci_low.to_string(),
            e.ci_high.to_string(),
        ])
        .map_err(io_err(path))?;
    }
    w.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Parse a PRCC CSV back into `(param, entry)` rows (round-trip counterpart
/// of [`write_prcc_csv`]).
pub fn read_prcc_csv(path: &std::path::Path) -> Result<Vec<(String, PrccEntry)>> {
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
        let get = |i: usize| rec.get(i).unwrap_or("");
        let f = |i: usize, what: &str| -> Result<f64> {
            get(i).parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("invalid {what} '{}'", get(i)),
            })
        };
        rows.push((
            get(0).to_string(),
            PrccEntry {
                estimate: f(1, "estimate")?,
                ci_low: f(2, "ci_low")?,
                ci_high: f(3, "ci_high")?,
            },
        ));
    }
    Ok(rows)
}
