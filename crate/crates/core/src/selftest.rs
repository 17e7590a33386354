//! Brute-force oracle suites, shared by the `selftest` command and the
//! acceptance tests.

use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dependence::gamma_exact_markov;
use crate::moment_match::two_point_from_moments;
use crate::processes::{moment_table, MarkovChain, MarkovFunctional, MartingaleModel, MomentMethod};
use crate::rng::{seeded, StreamKey, StreamRole};
use crate::sphere::{centered_weights_raw, dot, helmert_basis, helmert_coordinates, sample_uniform_sphere, x_star};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub checks: usize,
    pub failures: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub elapsed_secs: f64,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.checks > 0
    }

    pub fn summary(&self) -> String {
        format!(
            "{} {}: {} checks, {} failures, max error {:.3e} (tolerance {:.0e}), {:.2} s",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.checks,
            self.failures,
            self.max_error,
            self.tolerance,
            self.elapsed_secs
        )
    }
}

struct Tally {
    name: &'static str,
    tolerance: f64,
    checks: usize,
    failures: usize,
    max_error: f64,
    start: Instant,
}

impl Tally {
    fn new(name: &'static str, tolerance: f64) -> Self {
        Self {
            name,
            tolerance,
            checks: 0,
            failures: 0,
            max_error: 0.0,
            start: Instant::now(),
        }
    }

    fn error(&mut self, err: f64) {
        self.checks += 1;
        if err.is_nan() || err > self.tolerance {
            self.failures += 1;
        }
        if err.is_nan() {
            self.max_error = f64::NAN;
        } else if !self.max_error.is_nan() {
            self.max_error = self.max_error.max(err);
        }
    }

    fn condition(&mut self, ok: bool) {
        self.checks += 1;
        if !ok {
            self.failures += 1;
        }
    }

    fn finish(self) -> SuiteResult {
        SuiteResult {
            name: self.name.to_string(),
            checks: self.checks,
            failures: self.failures,
            max_error: self.max_error,
            tolerance: self.tolerance,
            elapsed_secs: self.start.elapsed().as_secs_f64(),
        }
    }
}

/// The `20 × 10` grid: `σ²` log-spaced on `[0.1, 10]`, `β₃` evenly spaced on `[-5, 5]`.
pub fn moment_grid() -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(200);
    for i in 0..20 {
        let sigma2 = 0.1 * 100f64.powf(i as f64 / 19.0);
        for j in 0..10 {
            out.push((sigma2, -5.0 + 10.0 * j as f64 / 9.0));
        }
    }
    out
}

/// Mean, variance, third and fourth moments of each two-point law, computed
/// from the two atoms, against `(0, σ², β₃, σ⁴ + β₃²/σ²)`.
pub fn moment_grid_suite() -> SuiteResult {
    let mut tally = Tally::new("moment-match grid", 1e-10);
    for (sigma2, beta3) in moment_grid() {
        let law = match two_point_from_moments(sigma2, beta3) {
            Ok(l) => l,
            Err(_) => {
                tally.condition(false);
                continue;
            }
        };
        tally.condition(law.t > 0.0 && law.t < 1.0 && law.m > 0.0 && law.m_prime < 0.0);
        let sd = sigma2.sqrt();
        let expect = |p: i32| law.t * law.m.powi(p) + (1.0 - law.t) * law.m_prime.powi(p);
        let targets = [
            (expect(1), 0.0, sd),
            (expect(2), sigma2, sigma2),
            (expect(3), beta3, sd.powi(3)),
            (expect(4), sigma2 * sigma2 + beta3 * beta3 / sigma2, sigma2 * sigma2),
        ];
        for (got, target, floor) in targets {
            let scale = target.abs().max(floor);
            tally.error((got - target).abs() / scale);
        }
    }
    tally.finish()
}

/// Orthonormality of `B` up to `n = 1024`, plus the projection and duality
/// identities on `instances` random `(θ, X)` pairs.
pub fn helmert_suite(instances: usize, seed: u64) -> SuiteResult {
    let mut tally = Tally::new("Helmert identities", 1e-10);
    let mut dims: Vec<usize> = (2..=32).collect();
    dims.extend([64, 128, 256, 512, 1024]);
    for &n in &dims {
        let b = match helmert_basis(n) {
            Ok(b) => b,
            Err(_) => {
                tally.condition(false);
                continue;
            }
        };
        // the orthonormality tolerance is tighter than the suite's
        tally.condition(b.orthonormality_defect() <= 1e-12);
        let ones = b.apply(&vec![1.0; n]).expect("length matches");
        let err = ones[..n - 1].iter().fold(0.0f64, |m, v| m.max(v.abs())).max((ones[n - 1] - (n as f64).sqrt()).abs());
        tally.error(err);
    }
    for r in 0..instances {
        let mut rng = StreamKey::new(seed, 0, r, StreamRole::Misc).rng();
        let n = rng.gen_range(2..=64usize);
        let theta = match sample_uniform_sphere(n, &mut rng) {
            Ok(t) => t.into_inner(),
            Err(_) => {
                tally.condition(false);
                continue;
            }
        };
        let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let b = helmert_basis(n).expect("n >= 2");
        let bt = b.apply(&theta).expect("length matches");
        let bx = b.apply(&x).expect("length matches");

        let center = |v: &[f64]| {
            let mean = v.iter().sum::<f64>() / n as f64;
            v.iter().map(|a| a - mean).collect::<Vec<f64>>()
        };
        let at = center(&theta);
        let ax = center(&x);
        let direct = dot(&at, &ax);
        let via_basis: f64 = bt[..n - 1].iter().zip(&bx[..n - 1]).map(|(a, c)| a * c).sum();
        tally.error((direct - via_basis).abs());

        let w = match centered_weights_raw(&theta) {
            Ok(w) => w,
            Err(_) => {
                tally.condition(false);
                continue;
            }
        };
        let star = dot(&w.theta_star, &x);
        let xs = x_star(&x).expect("n >= 2");
        tally.error((dot(&w.theta_hat, &xs) - star).abs());
        tally.error((star - direct / dot(&at, &at).sqrt()).abs());
        let fast = helmert_coordinates(&x);
        tally.error(fast.iter().zip(&bx).fold(0.0f64, |m, (a, c)| m.max((a - c).abs())));
    }
    tally.finish()
}

/// Stationary law by damped power iteration on `(I + K)/2`, independent of
/// the linear solve used by [`MarkovChain`].
fn power_stationary(k: &[Vec<f64>]) -> Vec<f64> {
    let s = k.len();
    let mut pi = vec![1.0 / s as f64; s];
    for _ in 0..200_000 {
        let mut next = vec![0.0; s];
        for i in 0..s {
            for j in 0..s {
                next[j] += 0.5 * pi[i] * k[i][j];
            }
            next[i] += 0.5 * pi[i];
        }
        let change = next.iter().zip(&pi).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        pi = next;
        if change < 1e-17 {
            break;
        }
    }
    pi
}

/// Calls `visit(path, prob)` for every length-`len` continuation of `start`.
fn continuations(k: &[Vec<f64>], start: usize, len: usize, mut visit: impl FnMut(&[usize], f64)) {
    let s = k.len();
    let total = s.pow(len as u32);
    let mut path = vec![start; len + 1];
    for code in 0..total {
        let mut c = code;
        let mut prob = 1.0;
        for step in 1..=len {
            path[step] = c % s;
            c /= s;
            prob *= k[path[step - 1]][path[step]];
        }
        if prob > 0.0 {
            visit(&path, prob);
        }
    }
}

/// Dense kernels and functionals of the toy chains (one to four states).
pub fn toy_chains() -> Vec<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut out = vec![
        (vec![vec![1.0]], vec![1.0]),
        (vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![1.0, -1.0]),
        (vec![vec![0.5, 0.5], vec![0.5, 0.5]], vec![1.0, -1.0]),
        (
            vec![vec![0.2, 0.5, 0.3], vec![0.6, 0.1, 0.3], vec![0.25, 0.25, 0.5]],
            vec![1.3, -0.4, 2.0],
        ),
        // return-to-0 chain on {-1, 0, 1} with f(y) = y
        (
            vec![vec![0.5, 0.5, 0.0], vec![0.5, 0.0, 0.5], vec![0.0, 0.5, 0.5]],
            vec![-1.0, 0.0, 1.0],
        ),
        (
            vec![
                vec![0.0, 1.0, 0.0, 0.0],
                vec![0.0, 0.3, 0.7, 0.0],
                vec![0.0, 0.0, 0.0, 1.0],
                vec![0.6, 0.0, 0.0, 0.4],
            ],
            vec![0.5, -1.0, 2.0, -0.25],
        ),
    ];
    let mut rng = seeded(0x7e57);
    for s in 2..=4usize {
        for _ in 0..3 {
            let k: Vec<Vec<f64>> = (0..s)
                .map(|_| {
                    let row: Vec<f64> = (0..s).map(|_| rng.gen_range(0.05..1.0)).collect();
                    let total: f64 = row.iter().sum();
                    row.into_iter().map(|v| v / total).collect()
                })
                .collect();
            let f: Vec<f64> = (0..s).map(|_| rng.gen_range(-2.0..2.0)).collect();
            out.push((k, f));
        }
    }
    out
}

/// `γ` components by enumeration of all paths, for one lag `v` and one `ℓ`.
/// Returns `(γ02, γ12, γ22 at ℓ, γ13 at ℓ)`.
fn gamma_brute(k: &[Vec<f64>], pi: &[f64], x: &[f64], v: usize, l: usize) -> [f64; 4] {
    let s = k.len();
    let mu: f64 = (0..s).map(|y| pi[y] * x[y] * x[y]).sum();
    // E(X_0 X_l²) from stationary starts
    let mut m_l = 0.0;
    for y0 in 0..s {
        continuations(k, y0, l, |p, prob| m_l += pi[y0] * prob * x[p[0]] * x[p[l]].powi(2));
    }
    let mut d = vec![0.0; s];
    let mut e13 = vec![0.0; s];
    for y0 in 0..s {
        let mut c2 = 0.0;
        continuations(k, y0, v, |p, prob| c2 += prob * x[p[v]].powi(2));
        d[y0] = (c2 - mu).abs();
        let mut c3 = 0.0;
        continuations(k, y0, v + l, |p, prob| c3 += prob * x[p[v]] * x[p[v + l]].powi(2));
        e13[y0] = (c3 - m_l).abs();
    }
    let g02: f64 = (0..s).map(|y| pi[y] * d[y]).sum();
    let g12: f64 = (0..s).map(|y| pi[y] * x[y].abs() * d[y]).sum();
    let g13: f64 = (0..s).map(|y| pi[y] * x[y].abs() * e13[y]).sum();
    // E|X_{-l} X_0| D_v(Y_0): paths Y_{-l}..Y_0 from the stationary law
    let mut g22 = 0.0;
    for ym in 0..s {
        continuations(k, ym, l, |p, prob| g22 += pi[ym] * prob * (x[p[0]] * x[p[l]]).abs() * d[p[l]]);
    }
    [g02, g12, g22, g13]
}

/// `gamma_exact_markov` against path enumeration on every toy chain, for all
/// `vmax ≤ 4` and `ell_max ≤ 3`.
pub fn gamma_oracle_suite() -> SuiteResult {
    let mut tally = Tally::new("gamma path enumeration", 1e-10);
    for (k, f) in toy_chains() {
        let functional = match MarkovChain::from_dense(&k).and_then(|c| MarkovFunctional::new(c, f)) {
            Ok(m) => m,
            Err(_) => {
                tally.condition(false);
                continue;
            }
        };
        let x = functional.values();
        let pi = power_stationary(&k);
        for vmax in 1..=4 {
            for ell_max in 0..=3 {
                let profile = match gamma_exact_markov(&functional, vmax, ell_max) {
                    Ok(p) => p,
                    Err(_) => {
                        tally.condition(false);
                        continue;
                    }
                };
                for v in 1..=vmax {
                    let per_l: Vec<[f64; 4]> = (0..=ell_max).map(|l| gamma_brute(&k, &pi, &x, v, l)).collect();
                    let g22 = per_l.iter().map(|g| g[2]).fold(f64::NEG_INFINITY, f64::max);
                    let g13 = per_l.iter().map(|g| g[3]).fold(f64::NEG_INFINITY, f64::max);
                    let i = v - 1;
                    tally.error((profile.g02[i] - per_l[0][0]).abs());
                    tally.error((profile.g12[i] - per_l[0][1]).abs());
                    tally.error((profile.g22[i] - g22).abs());
                    tally.error((profile.g13[i] - g13).abs());
                    let gamma = per_l[0][0].max(per_l[0][1]).max(g22).max(g13);
                    tally.error((profile.gamma[i] - gamma).abs());
                }
            }
        }
    }
    tally.finish()
}

/// Exact moment tables of the toy chains against path enumeration.
pub fn moment_table_suite() -> SuiteResult {
    let mut tally = Tally::new("moment table enumeration", 1e-10);
    let umax = 5;
    for (k, f) in toy_chains() {
        let functional = match MarkovChain::from_dense(&k).and_then(|c| MarkovFunctional::new(c, f)) {
            Ok(m) => m,
            Err(_) => {
                tally.condition(false);
                continue;
            }
        };
        let x = functional.values();
        let pi = power_stationary(&k);
        let table = match moment_table(&MartingaleModel::markov(functional), umax, MomentMethod::Exact, &mut seeded(0)) {
            Ok(t) => t,
            Err(_) => {
                tally.condition(false);
                continue;
            }
        };
        let mut a = vec![0.0; umax + 1];
        let mut x2x2 = vec![0.0; umax + 1];
        let mut x2 = 0.0;
        let mut x3 = 0.0;
        for y0 in 0..k.len() {
            x2 += pi[y0] * x[y0].powi(2);
            x3 += pi[y0] * x[y0].powi(3);
            continuations(&k, y0, umax, |p, prob| {
                for u in 0..=umax {
                    a[u] += pi[y0] * prob * x[p[0]] * x[p[u]].powi(2);
                    x2x2[u] += pi[y0] * prob * x[p[0]].powi(2) * x[p[u]].powi(2);
                }
            });
        }
        tally.error((table.third_moment - x3).abs());
        for u in 0..=umax {
            tally.error((table.a[u] - a[u]).abs());
            tally.error((table.cov_sq[u] - (x2x2[u] - x2 * x2)).abs());
        }
    }
    tally.finish()
}

/// Every suite, in a fixed order.
pub fn run_all(seed: u64) -> Vec<SuiteResult> {
    vec![
        moment_grid_suite(),
        helmert_suite(100, seed),
        gamma_oracle_suite(),
        moment_table_suite(),
    ]
}
