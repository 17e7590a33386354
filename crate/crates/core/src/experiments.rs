//! Rate sweeps over `n` with log-log fits, and the OLS regression experiment.

use serde::{Deserialize, Serialize};

use crate::distance::{
    expected_kappa, kolmogorov_vs_normal, normal_cdf, CfGrid, KappaEstimate, KappaMethod,
};
use crate::error::{Error, Result};
use crate::processes::{InnovationLaw, MartingaleModel, ModelSpec};
use crate::rng::{blocked, StreamKey, StreamRole};
use crate::sphere::{centered_weights_raw, dot, l2};
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMethod {
    Empirical,
    Cf,
    /// Injects `mean(n) = coefficient / n` with zero standard error.
    Synthetic { coefficient: f64 },
}

impl SweepMethod {
    pub fn label(&self) -> String {
        match self {
            Self::Empirical => "empirical".into(),
            Self::Cf => "cf".into(),
            Self::Synthetic { coefficient } => format!("synthetic({coefficient}/n)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub model: ModelSpec,
    pub n_grid: Vec<usize>,
    pub r_theta: usize,
    pub r_x: usize,
    pub method: SweepMethod,
    pub centered: bool,
    pub master_seed: u64,
    pub cf_grid: CfGrid,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            model: ModelSpec::default(),
            n_grid: vec![32, 64, 128, 256, 512],
            r_theta: 100,
            r_x: 20_000,
            method: SweepMethod::Cf,
            centered: false,
            master_seed: 1,
            cf_grid: CfGrid::default(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(Error::Config("key `n`: the grid is empty".into()));
        }
        if self.n_grid[0] < 2 {
            return Err(Error::Config(format!(
                "key `n`: every n must satisfy n >= 2, got {}",
                self.n_grid[0]
            )));
        }
        if self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("key `n`: the grid must be strictly increasing".into()));
        }
        if self.r_theta < 10 {
            return Err(Error::Config(format!("key `rtheta`: must be at least 10, got {}", self.r_theta)));
        }
        if self.method == SweepMethod::Empirical && self.r_x < 100 {
            return Err(Error::Config(format!("key `rx`: must be at least 100, got {}", self.r_x)));
        }
        Ok(())
    }

    pub fn pairs(&self) -> Vec<(String, String)> {
        let mut out = self.model.pairs();
        out.push((
            "n".into(),
            self.n_grid.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(","),
        ));
        out.push(("rtheta".into(), self.r_theta.to_string()));
        if self.method == SweepMethod::Empirical {
            out.push(("rx".into(), self.r_x.to_string()));
        }
        out.push(("method".into(), self.method.label()));
        out.push(("centered".into(), self.centered.to_string()));
        out.push(("seed".into(), self.master_seed.to_string()));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowFlag {
    Ok,
    /// Mean below the Monte Carlo resolution `1/√R_X`.
    Floor,
    /// Mean numerically zero (at most `ZERO_LEVEL`).
    Zero,
}

impl RowFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::Floor => "floor",
            Self::Zero => "zero",
        }
    }
}

/// Means at or below this level are treated as exact zeros.
pub const ZERO_LEVEL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    pub mean: f64,
    pub se: f64,
    pub flag: RowFlag,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub fit: Option<LogLogFit>,
    /// Indices of input points left out (nonpositive values).
    pub excluded: Vec<usize>,
    pub degenerate: bool,
}

/// Least squares of `log value` on `log n` over the positive points.
pub fn loglog_fit(points: &[(f64, f64)]) -> FitResult {
    let mut excluded = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, &(n, v)) in points.iter().enumerate() {
        if v > 0.0 && v.is_finite() && n > 0.0 {
            xs.push(n.ln());
            ys.push(v.ln());
        } else {
            excluded.push(i);
        }
    }
    let m = xs.len() as f64;
    let degenerate = FitResult {
        fit: None,
        excluded: excluded.clone(),
        degenerate: true,
    };
    if xs.len() < 2 {
        return degenerate;
    }
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return degenerate;
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    FitResult {
        fit: Some(LogLogFit { slope, intercept, r2 }),
        excluded,
        degenerate: false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCurve {
    pub name: String,
    /// Mean of `log mean(n) - log g(n)` over the fitted rows.
    pub log_offset: f64,
    /// Root-mean-square residual of `log mean(n)` against `log g(n) + offset`.
    pub rms_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
    pub fit: FitResult,
    pub reference: Vec<ReferenceCurve>,
}

impl RateTable {
    /// Builds the table, fitting only rows flagged `Ok`.
    pub fn from_rows(rows: Vec<RateRow>) -> Self {
        let usable: Vec<&RateRow> = rows.iter().filter(|r| r.flag == RowFlag::Ok).collect();
        let points: Vec<(f64, f64)> = usable.iter().map(|r| (r.n as f64, r.mean)).collect();
        let mut fit = loglog_fit(&points);
        // report exclusions against the full row list
        let used: Vec<usize> = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.flag == RowFlag::Ok)
            .map(|(i, _)| i)
            .collect();
        let mut excluded: Vec<usize> = (0..rows.len()).filter(|i| !used.contains(i)).collect();
        excluded.extend(fit.excluded.iter().map(|&j| used[j]));
        excluded.sort_unstable();
        fit.excluded = excluded;
        let fitted: Vec<&RateRow> = usable.into_iter().filter(|r| r.mean > 0.0).collect();
        let reference = if fit.degenerate {
            Vec::new()
        } else {
            let curves: [(&str, fn(f64) -> f64); 2] =
                [("1/n", |n| 1.0 / n), ("(log n)^2/n", |n| n.ln().powi(2) / n)];
            curves
                .iter()
                .map(|(name, g)| {
                    let resid: Vec<f64> = fitted
                        .iter()
                        .map(|r| r.mean.ln() - g(r.n as f64).ln())
                        .collect();
                    let m = resid.len() as f64;
                    let offset = resid.iter().sum::<f64>() / m;
                    let rms = (resid.iter().map(|v| (v - offset).powi(2)).sum::<f64>() / m).sqrt();
                    ReferenceCurve {
                        name: name.to_string(),
                        log_offset: offset,
                        rms_residual: rms,
                    }
                })
                .collect()
        };
        Self { rows, fit, reference }
    }
}

/// One `E κ̂` evaluation per grid point, then a log-log fit.
pub fn rate_sweep(config: &SweepConfig) -> Result<RateTable> {
    config.validate()?;
    let model = match config.method {
        SweepMethod::Synthetic { .. } => None,
        _ => Some(config.model.build()?),
    };
    let mut rows = Vec::with_capacity(config.n_grid.len());
    for &n in &config.n_grid {
        let row = match (&config.method, &model) {
            (SweepMethod::Synthetic { coefficient }, _) => RateRow {
                n,
                mean: coefficient / n as f64,
                se: 0.0,
                flag: RowFlag::Ok,
            },
            (SweepMethod::Empirical, Some(model)) => {
                let s = expected_kappa(
                    model,
                    n,
                    config.r_theta,
                    &KappaMethod::Empirical { r_x: config.r_x },
                    config.master_seed,
                    config.centered,
                )?;
                let floor = 1.0 / (config.r_x as f64).sqrt();
                RateRow {
                    n,
                    mean: s.mean,
                    se: s.se,
                    flag: if s.mean < floor { RowFlag::Floor } else { RowFlag::Ok },
                }
            }
            (SweepMethod::Cf, Some(model)) => {
                let s = expected_kappa(
                    model,
                    n,
                    config.r_theta,
                    &KappaMethod::Cf(config.cf_grid),
                    config.master_seed,
                    config.centered,
                )?;
                RateRow {
                    n,
                    mean: s.mean,
                    se: s.se,
                    flag: if s.mean <= ZERO_LEVEL { RowFlag::Zero } else { RowFlag::Ok },
                }
            }
            _ => unreachable!("model is built for every non-synthetic method"),
        };
        rows.push(row);
    }
    Ok(RateTable::from_rows(rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionConfig {
    pub mu: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub replicates: usize,
    pub master_seed: u64,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        Self {
            mu: 1.0,
            sigma: 2.0,
            alpha: 0.5,
            beta: -1.5,
            replicates: 10_000,
            master_seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionRun {
    pub n: usize,
    pub noise: String,
    pub config: RegressionConfig,
    pub kappa: KappaEstimate,
    /// Largest `|T_n(β̂) - T_n(weights)|` over replicates.
    pub max_route_gap: f64,
}

/// `T_n` through the OLS estimate: `‖Z - Z̄‖ (β̂ - β)` with `β̂` computed from `(Y, Z)`.
pub fn t_stat_ols(y: &[f64], z: &[f64], beta: f64) -> f64 {
    let n = y.len() as f64;
    let ybar = y.iter().sum::<f64>() / n;
    let zbar = z.iter().sum::<f64>() / n;
    let szz: f64 = z.iter().map(|v| (v - zbar).powi(2)).sum();
    let szy: f64 = z.iter().zip(y).map(|(zi, yi)| (zi - zbar) * (yi - ybar)).sum();
    let beta_hat = szy / szz;
    szz.sqrt() * (beta_hat - beta)
}

/// `T_n` as the centered projection of `X` on `ξ/‖ξ‖`, `ξ = (Z - μ)/σ`.
pub fn t_stat_weights(x: &[f64], z: &[f64], mu: f64, sigma: f64) -> Result<f64> {
    let xi: Vec<f64> = z.iter().map(|v| (v - mu) / sigma).collect();
    let norm = l2(&xi);
    let unit: Vec<f64> = xi.iter().map(|v| v / norm).collect();
    let w = centered_weights_raw(&unit)?;
    Ok(dot(&w.theta_star, x))
}

const REGRESSION_BLOCK: usize = 1024;

/// `R` independent draws of `(Z, X)`, the two computations of `T_n`, and the
/// Kolmogorov distance of the `T_n` sample to `N(0,1)`.
pub fn regression_experiment(noise: &MartingaleModel, n: usize, cfg: &RegressionConfig) -> Result<RegressionRun> {
    if n < 2 {
        return Err(Error::InvalidDimension(format!("regression needs n >= 2, got {n}")));
    }
    if !(cfg.sigma > 0.0 && cfg.sigma.is_finite()) {
        return Err(Error::InvalidInput(format!("sigma must be positive, got {}", cfg.sigma)));
    }
    if cfg.replicates == 0 {
        return Err(Error::InvalidInput("at least one replicate is required".into()));
    }
    let blocks = blocked(cfg.replicates, REGRESSION_BLOCK, |range| -> Result<(Vec<f64>, f64)> {
        let b = range.start / REGRESSION_BLOCK;
        let mut design_rng = StreamKey::new(cfg.master_seed, n, b, StreamRole::Design).rng();
        let mut noise_rng = StreamKey::new(cfg.master_seed, n, b, StreamRole::Paths).rng();
        let mut x = vec![0.0; n];
        let mut z = vec![0.0; n];
        let mut out = Vec::with_capacity(range.len());
        let mut gap = 0.0f64;
        for _ in range {
            loop {
                for zi in z.iter_mut() {
                    let g: f64 = design_rng.sample(StandardNormal);
                    *zi = cfg.mu + cfg.sigma * g;
                }
                if z.iter().any(|v| *v != z[0]) {
                    break;
                }
            }
            noise.fill_path(&mut x, &mut noise_rng);
            let y: Vec<f64> = z.iter().zip(&x).map(|(zi, xi)| cfg.alpha + cfg.beta * zi + xi).collect();
            let t_ols = t_stat_ols(&y, &z, cfg.beta);
            let t_w = t_stat_weights(&x, &z, cfg.mu, cfg.sigma)?;
            gap = gap.max((t_ols - t_w).abs());
            out.push(t_w);
        }
        Ok((out, gap))
    });
    let mut samples = Vec::with_capacity(cfg.replicates);
    let mut max_gap = 0.0f64;
    for block in blocks {
        let (s, g) = block?;
        samples.extend(s);
        max_gap = max_gap.max(g);
    }
    Ok(RegressionRun {
        n,
        noise: noise.label(),
        config: cfg.clone(),
        kappa: kolmogorov_vs_normal(&samples)?,
        max_route_gap: max_gap,
    })
}

/// Exact distance of `T_2 = (X_1 - X_2)/√2` for iid two-point noise.
pub fn regression_t2_exact(law: &InnovationLaw) -> Option<f64> {
    let atoms = law.atoms()?;
    let w = std::f64::consts::FRAC_1_SQRT_2;
    // T_2 = ±(X_1 - X_2)/√2 with a symmetric sign; enumerate both signs
    let neg = [(-atoms[0].0, atoms[0].1), (-atoms[1].0, atoms[1].1)];
    let mut support = Vec::new();
    for &(a, p) in &atoms {
        for &(b, q) in &neg {
            support.push((w * (a + b), 0.5 * p * q));
            support.push((-w * (a + b), 0.5 * p * q));
        }
    }
    support.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cum = 0.0;
    let mut sup = 0.0f64;
    for (v, p) in support {
        let phi = normal_cdf(v);
        sup = sup.max((cum - phi).abs());
        cum += p;
        sup = sup.max((cum - phi).abs());
    }
    Some(sup)
}
