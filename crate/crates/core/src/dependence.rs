//! Weak-dependence coefficients `γ_{0,2}, γ_{1,2}, γ_{2,2}, γ_{1,3}`: exact
//! values for Markov functionals through kernel powers, coupling majorants for
//! ARCH(∞), and summability reports for `Σ k γ(k)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::processes::{ArchModel, MarkovFunctional};
use crate::rng::{blocked, StreamKey, StreamRole};

/// Upper limit on `(vmax + ell_max) × states` for exact computations.
pub const EXACT_BUDGET: usize = 200_000_000;

/// Upper limit on `states²` for the dense mixing computation.
pub const MIXING_BUDGET: usize = 50_000_000;

const REPLICATE_BLOCK: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaErrors {
    pub g02: Vec<f64>,
    pub g12: Vec<f64>,
    pub g22: Vec<f64>,
    pub g13: Vec<f64>,
    pub gamma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaProfile {
    pub lags: Vec<usize>,
    pub g02: Vec<f64>,
    pub g12: Vec<f64>,
    pub g22: Vec<f64>,
    pub g13: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Truncation of the inner supremum over `ℓ`.
    pub ell_max: usize,
    /// `ℓ` attaining the maximum in `γ_{2,2}` and `γ_{1,3}` at each lag.
    pub argmax_ell22: Vec<usize>,
    pub argmax_ell13: Vec<usize>,
    /// Monte Carlo standard errors, when the profile is an estimate.
    pub se: Option<GammaErrors>,
    pub notes: Vec<String>,
}

impl GammaProfile {
    fn from_components(
        g02: Vec<f64>,
        g12: Vec<f64>,
        g22: Vec<f64>,
        g13: Vec<f64>,
        ell_max: usize,
        argmax_ell22: Vec<usize>,
        argmax_ell13: Vec<usize>,
    ) -> Self {
        let gamma = (0..g02.len())
            .map(|i| g02[i].max(g12[i]).max(g22[i]).max(g13[i]))
            .collect();
        Self {
            lags: (1..=g02.len()).collect(),
            g02,
            g12,
            g22,
            g13,
            gamma,
            ell_max,
            argmax_ell22,
            argmax_ell13,
            se: None,
            notes: Vec::new(),
        }
    }

    pub fn vmax(&self) -> usize {
        self.lags.len()
    }
}

/// Exact coefficients for `X_i = x(Y_i)` with `Y` stationary, `x` the
/// normalized values of the functional.
///
/// With `μ = π(x²)` and `D_v = |K^v x² - μ|`:
/// `γ_{0,2}(v) = π(D_v)`, `γ_{1,2}(v) = π(|x| D_v)`,
/// `γ_{2,2}(v) = max_{ℓ≤L} Σ_{y,z} π(y) K^ℓ(y,z) |x(y)| |x(z)| D_v(z)` and
/// `γ_{1,3}(v) = max_{ℓ≤L} π(|x| |K^v h_ℓ - π(h_ℓ)|)` with `h_ℓ = x · K^ℓ x²`.
pub fn gamma_exact_markov(
    functional: &MarkovFunctional,
    vmax: usize,
    ell_max: usize,
) -> Result<GammaProfile> {
    if vmax == 0 {
        return Err(Error::InvalidInput("vmax must be at least 1".into()));
    }
    let chain = functional.chain();
    let s = chain.len();
    if (vmax + ell_max + 2).saturating_mul(s) > EXACT_BUDGET {
        return Err(Error::Resource(format!(
            "exact gamma with vmax = {vmax}, ell_max = {ell_max} on {s} states exceeds the budget"
        )));
    }
    let pi = chain.stationary();
    let x = functional.values();
    let ax: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    let x2: Vec<f64> = x.iter().map(|v| v * v).collect();
    let mu = chain.expect(&x2);

    // ν_ℓ = (π|x|) K^ℓ
    let mut nu = Vec::with_capacity(ell_max + 1);
    nu.push(pi.iter().zip(&ax).map(|(p, a)| p * a).collect::<Vec<f64>>());
    for l in 0..ell_max {
        let next = chain.push_forward(&nu[l]);
        nu.push(next);
    }
    // weighted by π|x| for the γ_{1,2}, γ_{1,3} outer expectation
    let pi_ax = &nu[0];

    let mut g02 = Vec::with_capacity(vmax);
    let mut g12 = Vec::with_capacity(vmax);
    let mut g22 = Vec::with_capacity(vmax);
    let mut arg22 = Vec::with_capacity(vmax);
    let mut g = x2.clone();
    let mut k_pow_x2 = vec![x2.clone()];
    for v in 1..=vmax {
        g = chain.apply(&g);
        if v <= ell_max {
            k_pow_x2.push(g.clone());
        }
        let d: Vec<f64> = g.iter().map(|val| (val - mu).abs()).collect();
        g02.push(pi.iter().zip(&d).map(|(p, dv)| p * dv).sum());
        g12.push(pi_ax.iter().zip(&d).map(|(p, dv)| p * dv).sum());
        let w: Vec<f64> = ax.iter().zip(&d).map(|(a, dv)| a * dv).collect();
        let (best, arg) = nu
            .iter()
            .map(|n| n.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>())
            .enumerate()
            .fold((f64::NEG_INFINITY, 0), |acc, (l, val)| {
                if val > acc.0 {
                    (val, l)
                } else {
                    acc
                }
            });
        g22.push(best);
        arg22.push(arg);
    }
    while k_pow_x2.len() <= ell_max {
        let next = chain.apply(k_pow_x2.last().unwrap());
        k_pow_x2.push(next);
    }

    let mut g13 = vec![f64::NEG_INFINITY; vmax];
    let mut arg13 = vec![0; vmax];
    for (l, kx2) in k_pow_x2.iter().enumerate() {
        let h: Vec<f64> = x.iter().zip(kx2).map(|(a, b)| a * b).collect();
        let mean_h = chain.expect(&h);
        let mut w = h;
        for v in 1..=vmax {
            w = chain.apply(&w);
            let val: f64 = pi_ax
                .iter()
                .zip(&w)
                .map(|(p, wv)| p * (wv - mean_h).abs())
                .sum();
            if val > g13[v - 1] {
                g13[v - 1] = val;
                arg13[v - 1] = l;
            }
        }
    }

    let mut profile = GammaProfile::from_components(g02, g12, g22, g13, ell_max, arg22, arg13);
    profile.notes.push(format!(
        "exact kernel-power values; suprema over ell truncated at {ell_max} (lower bounds of the full suprema)"
    ));
    Ok(profile)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaEstimate {
    pub k: usize,
    pub delta: f64,
    pub se: f64,
}

/// One coupled pair: the original process and a copy whose innovations at
/// times `≤ 0` are replaced by independent ones, both driven by the same
/// `η_1, η_2, …` afterwards.
struct CoupledPair {
    /// Squared raw values at times `0, -1, -2, …` of the original.
    past_sq: Vec<f64>,
    /// `σ²_t`, `σ*²_t`, `η_t` for `t = 1..=horizon` (index `t - 1`).
    sigma2: Vec<f64>,
    sigma2_star: Vec<f64>,
    eta: Vec<f64>,
}

fn coupled_pair(model: &ArchModel, horizon: usize, keep_past: usize, key: StreamKey) -> CoupledPair {
    let mut rng = key.rng();
    let mut sq = model.warm_history_keep(keep_past, &mut rng);
    let mut sq_star = model.warm_history(&mut rng);
    let past_sq: Vec<f64> = sq.iter().rev().copied().collect();
    let mut sigma2 = Vec::with_capacity(horizon);
    let mut sigma2_star = Vec::with_capacity(horizon);
    let mut eta = Vec::with_capacity(horizon);
    sq.reserve(horizon);
    sq_star.reserve(horizon);
    for _ in 0..horizon {
        let s2 = model.next_sigma2(&sq);
        let s2s = model.next_sigma2(&sq_star);
        let e = model.innovation().sample_standardized(&mut rng);
        sq.push(s2 * e * e);
        sq_star.push(s2s * e * e);
        sigma2.push(s2);
        sigma2_star.push(s2s);
        eta.push(e);
    }
    CoupledPair {
        past_sq,
        sigma2,
        sigma2_star,
        eta,
    }
}

fn check_replicates(replicates: usize) -> Result<()> {
    if replicates < 100 {
        return Err(Error::InvalidInput(format!(
            "at least 100 replicates are required, got {replicates}"
        )));
    }
    Ok(())
}

/// `δ_k = E|σ²_k - σ*²_k|` in raw units for each `k` in `ks`, all from the
/// same `replicates` coupled pairs.
pub fn coupling_deltas_arch(
    model: &ArchModel,
    ks: &[usize],
    replicates: usize,
    master_seed: u64,
) -> Result<Vec<DeltaEstimate>> {
    model.validate()?;
    check_replicates(replicates)?;
    if ks.is_empty() || ks.iter().any(|&k| k < 2) {
        return Err(Error::InvalidInput("coupling lags must be at least 2".into()));
    }
    let horizon = *ks.iter().max().unwrap();
    let blocks = blocked(replicates, REPLICATE_BLOCK, |range| {
        let mut sums = vec![(0.0f64, 0.0f64); ks.len()];
        for r in range {
            let key = StreamKey::new(master_seed, 0, r, StreamRole::Coupling);
            let pair = coupled_pair(model, horizon, 0, key);
            for (slot, &k) in sums.iter_mut().zip(ks) {
                let d = (pair.sigma2[k - 1] - pair.sigma2_star[k - 1]).abs();
                slot.0 += d;
                slot.1 += d * d;
            }
        }
        sums
    });
    let rn = replicates as f64;
    Ok(ks
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let (s, s2) = blocks
                .iter()
                .fold((0.0, 0.0), |acc, b| (acc.0 + b[i].0, acc.1 + b[i].1));
            let mean = s / rn;
            let var = ((s2 - rn * mean * mean) / (rn - 1.0)).max(0.0);
            DeltaEstimate {
                k,
                delta: mean,
                se: (var / rn).sqrt(),
            }
        })
        .collect())
}

pub fn coupling_delta_arch(
    model: &ArchModel,
    k: usize,
    replicates: usize,
    master_seed: u64,
) -> Result<DeltaEstimate> {
    Ok(coupling_deltas_arch(model, &[k], replicates, master_seed)?[0])
}

/// Coupling majorants of the four coefficients for a unit-variance ARCH
/// process, with `X*` the copy built from independent innovations at times
/// `≤ 0`:
///
/// * `γ_{0,2}(k) ≤ E|X_k² - X*_k²|`
/// * `γ_{1,2}(k) ≤ E|X_0| |X_k² - X*_k²|`
/// * `γ_{2,2}(k) ≤ max_{ℓ≤L} E|X_{-ℓ} X_0| |X_k² - X*_k²|`
/// * `γ_{1,3}(k) ≤ max_{ℓ≤L} E|X_0| |X_k X_{k+ℓ}² - X*_k X*_{k+ℓ}²|`
pub fn gamma_mc_arch(
    model: &ArchModel,
    vmax: usize,
    ell_max: usize,
    replicates: usize,
    master_seed: u64,
) -> Result<GammaProfile> {
    model.validate()?;
    check_replicates(replicates)?;
    if vmax == 0 {
        return Err(Error::InvalidInput("vmax must be at least 1".into()));
    }
    let scale2 = 1.0 / model.stationary_variance();
    let horizon = vmax + ell_max;
    let width = ell_max + 1;
    // cell layout per lag: [g02, g12, g22 × width, g13 × width]
    let cells = 2 + 2 * width;
    let blocks = blocked(replicates, REPLICATE_BLOCK, |range| {
        let mut sum = vec![0.0f64; vmax * cells];
        let mut sum_sq = vec![0.0f64; vmax * cells];
        for r in range {
            let key = StreamKey::new(master_seed, 0, r, StreamRole::Coupling);
            let pair = coupled_pair(model, horizon, ell_max + 1, key);
            let abs_past: Vec<f64> = pair.past_sq.iter().map(|v| (v * scale2).sqrt()).collect();
            let x: Vec<f64> = (0..horizon)
                .map(|t| (pair.sigma2[t] * scale2).sqrt() * pair.eta[t])
                .collect();
            let xs: Vec<f64> = (0..horizon)
                .map(|t| (pair.sigma2_star[t] * scale2).sqrt() * pair.eta[t])
                .collect();
            let x0 = abs_past[0];
            for k in 1..=vmax {
                let base = (k - 1) * cells;
                let dsq = (x[k - 1] * x[k - 1] - xs[k - 1] * xs[k - 1]).abs();
                let mut put = |c: usize, v: f64| {
                    sum[base + c] += v;
                    sum_sq[base + c] += v * v;
                };
                put(0, dsq);
                put(1, x0 * dsq);
                for l in 0..width {
                    put(2 + l, abs_past[l] * x0 * dsq);
                    let t = k - 1 + l;
                    let d13 = (x[k - 1] * x[t] * x[t] - xs[k - 1] * xs[t] * xs[t]).abs();
                    put(2 + width + l, x0 * d13);
                }
            }
        }
        (sum, sum_sq)
    });
    let mut sum = vec![0.0; vmax * cells];
    let mut sum_sq = vec![0.0; vmax * cells];
    for (s, s2) in &blocks {
        for i in 0..sum.len() {
            sum[i] += s[i];
            sum_sq[i] += s2[i];
        }
    }
    let rn = replicates as f64;
    let mean = |i: usize| sum[i] / rn;
    let se = |i: usize| {
        let m = sum[i] / rn;
        (((sum_sq[i] - rn * m * m) / (rn - 1.0)).max(0.0) / rn).sqrt()
    };
    let mut g02 = Vec::new();
    let mut g12 = Vec::new();
    let mut g22 = Vec::new();
    let mut g13 = Vec::new();
    let mut arg22 = Vec::new();
    let mut arg13 = Vec::new();
    let mut errs = GammaErrors {
        g02: Vec::new(),
        g12: Vec::new(),
        g22: Vec::new(),
        g13: Vec::new(),
        gamma: Vec::new(),
    };
    let argmax = |offset: usize| {
        (0..width)
            .map(|l| (l, mean(offset + l)))
            .fold((0, f64::NEG_INFINITY), |acc, (l, v)| if v > acc.1 { (l, v) } else { acc })
    };
    for k in 1..=vmax {
        let base = (k - 1) * cells;
        g02.push(mean(base));
        g12.push(mean(base + 1));
        errs.g02.push(se(base));
        errs.g12.push(se(base + 1));
        let (l22, v22) = argmax(base + 2);
        g22.push(v22);
        arg22.push(l22);
        errs.g22.push(se(base + 2 + l22));
        let (l13, v13) = argmax(base + 2 + width);
        g13.push(v13);
        arg13.push(l13);
        errs.g13.push(se(base + 2 + width + l13));
    }
    let mut profile = GammaProfile::from_components(g02, g12, g22, g13, ell_max, arg22, arg13);
    for i in 0..vmax {
        let comps = [profile.g02[i], profile.g12[i], profile.g22[i], profile.g13[i]];
        let ses = [errs.g02[i], errs.g12[i], errs.g22[i], errs.g13[i]];
        let which = (0..4).find(|&j| comps[j] == profile.gamma[i]).unwrap_or(0);
        errs.gamma.push(ses[which]);
    }
    profile.notes.push(format!(
        "Monte Carlo coupling majorants from {replicates} replicates (seed {master_seed}); upper bounds of the coefficients, not the coefficients"
    ));
    profile.notes.push(format!(
        "suprema over ell truncated at {ell_max}; max standard error {:.3e}",
        errs.gamma.iter().fold(0.0f64, |m, v| m.max(*v))
    ));
    profile.se = Some(errs);
    Ok(profile)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub ks: Vec<usize>,
    /// The coefficient sequence the report is about (`γ(k)` or `β(k)`).
    pub coefficients: Vec<f64>,
    /// Summand at each `k`.
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    pub satisfied_estimate: bool,
    /// Log-log slope of the summands over the second half of the window.
    pub tail_slope: Option<f64>,
    pub notes: Vec<String>,
}

/// Slope below which the summands are treated as summable.
pub const SUMMABLE_SLOPE: f64 = -1.1;

fn build_report(ks: Vec<usize>, coefficients: Vec<f64>, terms: Vec<f64>, mut notes: Vec<String>) -> ConditionReport {
    let mut acc = 0.0;
    let partial_sums: Vec<f64> = terms
        .iter()
        .map(|t| {
            acc += t.max(0.0);
            acc
        })
        .collect();
    let start = ks.len() / 2;
    let tail: Vec<(f64, f64)> = ks[start..]
        .iter()
        .zip(&terms[start..])
        .filter(|(_, t)| **t > 0.0)
        .map(|(k, t)| ((*k as f64).ln(), t.ln()))
        .collect();
    let (satisfied, slope) = if tail.is_empty() {
        (true, None)
    } else if tail.len() < 2 {
        (false, None)
    } else {
        let m = tail.len() as f64;
        let mx = tail.iter().map(|p| p.0).sum::<f64>() / m;
        let my = tail.iter().map(|p| p.1).sum::<f64>() / m;
        let sxx: f64 = tail.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = tail.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let slope = sxy / sxx;
        (slope < SUMMABLE_SLOPE, Some(slope))
    };
    notes.push(format!(
        "heuristic: summands on the second half of the window {} (threshold slope {SUMMABLE_SLOPE}); finitely many lags cannot prove summability",
        match slope {
            Some(s) => format!("decay with log-log slope {s:.3}"),
            None if satisfied => "vanish".to_string(),
            None => "are too few to fit".to_string(),
        }
    ));
    ConditionReport {
        ks,
        coefficients,
        terms,
        partial_sums,
        satisfied_estimate: satisfied,
        tail_slope: slope,
        notes,
    }
}

/// Partial sums of `k γ(k)` with a tail-decay heuristic.
pub fn condition_report(profile: &GammaProfile) -> ConditionReport {
    condition_report_with_exponent(profile, 1.0)
}

/// Partial sums of `k γ(k)^q`.
pub fn condition_report_with_exponent(profile: &GammaProfile, q: f64) -> ConditionReport {
    let terms = profile
        .lags
        .iter()
        .zip(&profile.gamma)
        .map(|(k, g)| *k as f64 * g.max(0.0).powf(q))
        .collect();
    let mut notes = profile.notes.clone();
    if q != 1.0 {
        notes.push(format!("summands are k * gamma(k)^{q}"));
    }
    build_report(profile.lags.clone(), profile.gamma.clone(), terms, notes)
}

/// `Σ k β(k) ‖x‖_∞⁴` with `β(n) = Σ_y π(y) TV(Kⁿ(y,·), π)`.
pub fn mixing_condition_report(functional: &MarkovFunctional, nmax: usize) -> Result<ConditionReport> {
    if nmax == 0 {
        return Err(Error::InvalidInput("nmax must be at least 1".into()));
    }
    let chain = functional.chain();
    let s = chain.len();
    if s.saturating_mul(s) > MIXING_BUDGET {
        return Err(Error::Resource(format!("dense mixing computation on {s} states exceeds the budget")));
    }
    let pi = chain.stationary();
    let sup4 = functional.sup_norm().powi(4);
    let mut rows: Vec<Vec<f64>> = (0..s)
        .map(|y| {
            let mut e = vec![0.0; s];
            e[y] = 1.0;
            e
        })
        .collect();
    let mut betas = Vec::with_capacity(nmax);
    for _ in 0..nmax {
        rows = rows.iter().map(|r| chain.push_forward(r)).collect();
        let beta: f64 = rows
            .iter()
            .zip(pi)
            .map(|(r, p)| p * 0.5 * r.iter().zip(pi).map(|(a, b)| (a - b).abs()).sum::<f64>())
            .sum();
        betas.push(beta);
    }
    let ks: Vec<usize> = (1..=nmax).collect();
    let terms = ks.iter().zip(&betas).map(|(k, b)| *k as f64 * b * sup4).collect();
    let notes = vec![
        "beta-mixing surrogate: beta(n) = sum_y pi(y) TV(K^n(y,.), pi) upper-bounds the strong mixing rate; summands use int_0^beta Q^4 <= beta * sup|x|^4".to_string(),
    ];
    Ok(build_report(ks, betas, terms, notes))
}
