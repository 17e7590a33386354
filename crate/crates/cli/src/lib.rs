//! Command-line front end for `projclt`.
//!
//! Settings come from an optional `key=value` file (`--config`) and are then
//! overridden by flags. Exit codes: 0 on success, 2 on configuration errors,
//! 1 on runtime errors.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use projclt::dependence::{condition_report_with_exponent, gamma_exact_markov, gamma_mc_arch, mixing_condition_report};
use projclt::distance::{
    cf_product_kolmogorov, conditional_kappa_mc, draw_theta, projection_weights, CfGrid, KappaEstimate,
};
use projclt::experiments::{rate_sweep, regression_experiment, RegressionConfig, SweepConfig, SweepMethod};
use projclt::moment_match::two_point_from_moments;
use projclt::processes::{ModelKind, ModelSpec};
use projclt::report::{
    condition_report_extra, fmt_float, gamma_profile_report, kappa_records_report, rate_table_report,
    regression_report, Cell, Format, Report,
};
use projclt::rng::{blocked, StreamKey, StreamRole};
use projclt::selftest;
use projclt::Error;

/// Environment variable supplying the default for `--threads`.
pub const THREADS_ENV: &str = "MPL_THREADS";

#[derive(Debug, Parser)]
#[command(name = "projclt", version, about = "Normal approximation of random projections of martingale-difference vectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mean Kolmogorov distance over a grid of n, with a log-log fit.
    Sweep(Opts),
    /// Dependence coefficients of a Markov or ARCH model.
    Gamma(Opts),
    /// OLS regression experiment.
    Regress(Opts),
    /// Kolmogorov distance for each θ draw.
    Dist(Opts),
    /// Two-point law matching a variance and a third moment.
    TwoPoint(Opts),
    /// Brute-force oracle suites.
    Selftest(Opts),
}

#[derive(Debug, Args, Default)]
struct Opts {
    /// Model (`iid`, `arch`, `markov`), optionally with the innovation: `iid-rademacher`.
    #[arg(long)]
    model: Option<String>,
    /// `rademacher`, `gaussian` or `twopoint:<sigma2>,<beta3>`.
    #[arg(long)]
    innovation: Option<String>,
    /// Further model keys, e.g. `--set kappa=0.4 --set N=100`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Comma-separated sample sizes.
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    rtheta: Option<String>,
    /// Monte Carlo replicates (paths per θ, coupling replicates, or regression replicates).
    #[arg(long)]
    rx: Option<String>,
    /// `cf`, `empirical`, or `synthetic:<coef>` for sweeps.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    centered: bool,
    #[arg(long)]
    seed: Option<String>,
    /// Worker threads, or `auto`.
    #[arg(long)]
    threads: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// `csv` or `json`.
    #[arg(long)]
    format: Option<String>,
    /// Plain-text `key=value` file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    sigma2: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    beta3: Option<String>,
    #[arg(long)]
    vmax: Option<String>,
    #[arg(long = "ell-max")]
    ell_max: Option<String>,
    /// Exponent `q` in the summability report `Σ k γ(k)^q`.
    #[arg(long, allow_hyphen_values = true)]
    q: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    sigma: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<String>,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Runtime(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Config(m) | Self::Runtime(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Self::Config(m),
            Error::NonStationary(_) => Self::Config(format!("model parameters: {e}")),
            other => Self::Runtime(other.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

const RUN_KEYS: [&str; 19] = [
    "n", "rtheta", "rx", "method", "centered", "seed", "threads", "out", "format", "sigma2", "beta3", "vmax",
    "ell_max", "q", "mu", "sigma", "alpha", "beta", "command",
];

fn known_key(key: &str) -> bool {
    ModelSpec::is_model_key(key) || RUN_KEYS.contains(&key)
}

/// Parses a `key=value` file. Blank lines and `#` comments are ignored.
fn parse_config_file(text: &str) -> CliResult<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("config line {}: expected key=value, got `{line}`", i + 1)))?;
        out.push((k.trim().replace('-', "_"), v.trim().to_string()));
    }
    Ok(out)
}

struct Settings {
    command: &'static str,
    values: BTreeMap<String, String>,
}

impl Settings {
    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, default: T) -> CliResult<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("key `{key}`: cannot parse `{v}`"))),
        }
    }

    fn required<T: std::str::FromStr>(&self, key: &str) -> CliResult<T> {
        let v = self
            .get(key)
            .ok_or_else(|| CliError::Config(format!("key `{key}` is required for `{}`", self.command)))?;
        v.trim()
            .parse()
            .map_err(|_| CliError::Config(format!("key `{key}`: cannot parse `{v}`")))
    }

    fn n_list(&self, default: &[usize]) -> CliResult<Vec<usize>> {
        let list = match self.get("n") {
            None => default.to_vec(),
            Some(v) => v
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse::<usize>()
                        .map_err(|_| CliError::Config(format!("key `n`: cannot parse `{p}` as a sample size")))
                })
                .collect::<CliResult<Vec<usize>>>()?,
        };
        if let Some(bad) = list.iter().find(|&&n| n < 2) {
            return Err(CliError::Config(format!("key `n`: every n must satisfy n >= 2, got {bad}")));
        }
        Ok(list)
    }

    fn seed(&self) -> CliResult<u64> {
        self.parse("seed", 1u64)
    }

    fn format(&self) -> CliResult<Format> {
        match self.get("format") {
            None => Ok(Format::Csv),
            Some(v) => v.parse().map_err(CliError::from),
        }
    }

    fn model(&self) -> CliResult<ModelSpec> {
        let mut spec = ModelSpec::default();
        // `model` first so a shorthand innovation can be overridden explicitly
        if let Some(v) = self.get("model") {
            spec.set("model", v)?;
        }
        for (k, v) in &self.values {
            if k != "model" && ModelSpec::is_model_key(k) {
                spec.set(k, v)?;
            }
        }
        Ok(spec)
    }
}

fn allowed_keys(command: &str) -> Vec<&'static str> {
    let io = ["seed", "threads", "out", "format"];
    let mut keys: Vec<&'static str> = match command {
        "sweep" | "dist" => vec!["n", "rtheta", "rx", "method", "centered"],
        "gamma" => vec!["vmax", "ell_max", "rx", "q"],
        "regress" => vec!["n", "rx", "mu", "sigma", "alpha", "beta"],
        "two-point" => vec!["sigma2", "beta3", "out", "format"],
        "selftest" => vec!["seed", "threads"],
        _ => vec![],
    };
    if !matches!(command, "two-point" | "selftest") {
        keys.extend(io);
        keys.extend(projclt::processes::MODEL_KEYS);
    }
    keys
}

fn collect_settings(command: &'static str, opts: &Opts, env_threads: Option<String>) -> CliResult<Settings> {
    let mut values = BTreeMap::new();
    if let Some(path) = &opts.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("key `config`: cannot read {}: {e}", path.display())))?;
        for (k, v) in parse_config_file(&text)? {
            if !known_key(&k) {
                return Err(CliError::Config(format!("unknown key `{k}` in {}", path.display())));
            }
            values.insert(k, v);
        }
    }
    let flags: [(&str, &Option<String>); 17] = [
        ("model", &opts.model),
        ("innovation", &opts.innovation),
        ("n", &opts.n),
        ("rtheta", &opts.rtheta),
        ("rx", &opts.rx),
        ("method", &opts.method),
        ("seed", &opts.seed),
        ("threads", &opts.threads),
        ("format", &opts.format),
        ("sigma2", &opts.sigma2),
        ("beta3", &opts.beta3),
        ("vmax", &opts.vmax),
        ("ell_max", &opts.ell_max),
        ("q", &opts.q),
        ("mu", &opts.mu),
        ("sigma", &opts.sigma),
        ("alpha", &opts.alpha),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            values.insert(k.to_string(), v.clone());
        }
    }
    if let Some(v) = &opts.beta {
        values.insert("beta".into(), v.clone());
    }
    if let Some(p) = &opts.out {
        values.insert("out".into(), p.display().to_string());
    }
    if opts.centered {
        values.insert("centered".into(), "true".into());
    }
    for item in &opts.set {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("key `set`: expected KEY=VALUE, got `{item}`")))?;
        let k = k.trim();
        if !ModelSpec::is_model_key(k) {
            return Err(CliError::Config(format!("unknown model key `{k}`")));
        }
        values.insert(k.to_string(), v.trim().to_string());
    }
    if !values.contains_key("threads") {
        if let Some(t) = env_threads {
            values.insert("threads".into(), t);
        }
    }
    values.remove("command");
    let allowed = allowed_keys(command);
    for k in values.keys() {
        // MPL_THREADS is harmless for commands without parallel work
        if !allowed.contains(&k.as_str()) && k != "threads" {
            return Err(CliError::Config(format!("key `{k}` does not apply to `{command}`")));
        }
    }
    Ok(Settings { command, values })
}

fn thread_count(settings: &Settings) -> CliResult<usize> {
    match settings.get("threads").map(str::trim) {
        None | Some("auto") | Some("") => Ok(0),
        Some(v) => v
            .parse::<usize>()
            .ok()
            .filter(|&t| t > 0)
            .ok_or_else(|| CliError::Config(format!("key `threads`: expected a positive integer or `auto`, got `{v}`"))),
    }
}

fn emit(settings: &Settings, report: &Report, stdout: &mut dyn Write) -> CliResult<()> {
    let format = settings.format()?;
    match settings.get("out") {
        Some(path) => report.write(std::path::Path::new(path), format).map_err(CliError::from),
        None => stdout
            .write_all(report.render(format).as_bytes())
            .map_err(|e| CliError::Runtime(format!("cannot write to stdout: {e}"))),
    }
}

fn echo(settings: &Settings, mut pairs: Vec<(String, String)>) -> Vec<(String, String)> {
    pairs.insert(0, ("command".into(), settings.command.into()));
    pairs
}

fn sweep_method(settings: &Settings) -> CliResult<SweepMethod> {
    let raw = settings.get("method").unwrap_or("cf").trim().to_ascii_lowercase();
    match raw.as_str() {
        "cf" => Ok(SweepMethod::Cf),
        "empirical" => Ok(SweepMethod::Empirical),
        other => match other.strip_prefix("synthetic:") {
            Some(c) => c
                .parse()
                .map(|coefficient| SweepMethod::Synthetic { coefficient })
                .map_err(|_| CliError::Config(format!("key `method`: cannot parse coefficient `{c}`"))),
            None => Err(CliError::Config(format!(
                "key `method`: expected cf, empirical or synthetic:<coef>, got `{other}`"
            ))),
        },
    }
}

fn cmd_sweep(settings: &Settings, stdout: &mut dyn Write) -> CliResult<()> {
    let defaults = SweepConfig::default();
    let config = SweepConfig {
        model: settings.model()?,
        n_grid: settings.n_list(&defaults.n_grid)?,
        r_theta: settings.parse("rtheta", defaults.r_theta)?,
        r_x: settings.parse("rx", defaults.r_x)?,
        method: sweep_method(settings)?,
        centered: settings.parse("centered", false)?,
        master_seed: settings.seed()?,
        cf_grid: CfGrid::default(),
    };
    config.validate()?;
    let table = rate_sweep(&config)?;
    emit(settings, &rate_table_report(echo(settings, config.pairs()), &table), stdout)
}

fn cmd_dist(settings: &Settings, stdout: &mut dyn Write) -> CliResult<()> {
    let spec = settings.model()?;
    let model = spec.build()?;
    let n_grid = settings.n_list(&[64])?;
    let r_theta: usize = settings.parse("rtheta", 10)?;
    let r_x: usize = settings.parse("rx", 20_000)?;
    let centered: bool = settings.parse("centered", false)?;
    let seed = settings.seed()?;
    let method = settings.get("method").unwrap_or("cf").trim().to_ascii_lowercase();
    if r_theta == 0 {
        return Err(CliError::Config("key `rtheta`: must be positive".into()));
    }
    let law = match (method.as_str(), model.kind()) {
        ("cf", ModelKind::Iid(law)) => Some(*law),
        ("cf", _) => {
            return Err(CliError::Config(format!(
                "key `method`: cf needs an iid model, got {}",
                model.label()
            )))
        }
        ("empirical", _) => {
            if r_x < 100 {
                return Err(CliError::Config(format!("key `rx`: must be at least 100, got {r_x}")));
            }
            None
        }
        (other, _) => return Err(CliError::Config(format!("key `method`: expected cf or empirical, got `{other}`"))),
    };
    let grid = CfGrid::default();
    let mut records = Vec::new();
    for &n in &n_grid {
        let per_theta = blocked(r_theta, 1, |range| -> projclt::Result<KappaEstimate> {
            let r = range.start;
            let theta = draw_theta(seed, n, r, centered)?;
            match &law {
                Some(law) => cf_product_kolmogorov(&projection_weights(&theta, centered)?, law, &grid),
                None => conditional_kappa_mc(&model, &theta, r_x, StreamKey::new(seed, n, r, StreamRole::Paths), centered),
            }
        });
        for (r, est) in per_theta.into_iter().enumerate() {
            records.push((n, r, est?));
        }
    }
    let mut pairs = spec.pairs();
    pairs.push(("n".into(), n_grid.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",")));
    pairs.push(("rtheta".into(), r_theta.to_string()));
    if law.is_none() {
        pairs.push(("rx".into(), r_x.to_string()));
    }
    pairs.push(("method".into(), method.clone()));
    pairs.push(("centered".into(), centered.to_string()));
    pairs.push(("seed".into(), seed.to_string()));
    let report = kappa_records_report(echo(settings, pairs), &model.label(), seed, &records);
    emit(settings, &report, stdout)
}

fn cmd_gamma(settings: &Settings, stdout: &mut dyn Write) -> CliResult<()> {
    let spec = settings.model()?;
    let vmax: usize = settings.parse("vmax", 64)?;
    let ell_max: usize = settings.parse("ell_max", 20)?;
    let q: f64 = settings.parse("q", 1.0)?;
    if vmax == 0 {
        return Err(CliError::Config("key `vmax`: must be at least 1".into()));
    }
    if !(q > 0.0) {
        return Err(CliError::Config(format!("key `q`: must be positive, got {q}")));
    }
    let mut pairs = spec.pairs();
    pairs.push(("vmax".into(), vmax.to_string()));
    pairs.push(("ell_max".into(), ell_max.to_string()));
    pairs.push(("q".into(), q.to_string()));
    let (profile, mixing) = match spec.model.as_str() {
        "markov" => {
            let functional = spec.chain()?.functional()?;
            let profile = gamma_exact_markov(&functional, vmax, ell_max)?;
            let mixing = mixing_condition_report(&functional, vmax)?;
            (profile, Some(mixing))
        }
        "arch" => {
            let arch = spec.arch()?;
            let r: usize = settings.parse("rx", 2000)?;
            let seed = settings.seed()?;
            pairs.push(("rx".into(), r.to_string()));
            pairs.push(("seed".into(), seed.to_string()));
            (gamma_mc_arch(&arch, vmax, ell_max, r, seed)?, None)
        }
        other => {
            return Err(CliError::Config(format!(
                "key `model`: gamma coefficients are computed for markov or arch models, got `{other}`"
            )))
        }
    };
    let condition = condition_report_with_exponent(&profile, q);
    let mut report = gamma_profile_report(echo(settings, pairs), &profile)
        .with_extra("condition", condition_report_extra(&condition));
    if let Some(m) = mixing {
        report = report.with_extra("beta_mixing_upper_bound_surrogate", condition_report_extra(&m));
    }
    emit(settings, &report, stdout)
}

fn cmd_regress(settings: &Settings, stdout: &mut dyn Write) -> CliResult<()> {
    let spec = settings.model()?;
    let noise = spec.build()?;
    let n_grid = settings.n_list(&[2, 8, 32, 128])?;
    let d = RegressionConfig::default();
    let cfg = RegressionConfig {
        mu: settings.parse("mu", d.mu)?,
        sigma: settings.parse("sigma", d.sigma)?,
        alpha: settings.parse("alpha", d.alpha)?,
        beta: settings.parse("beta", d.beta)?,
        replicates: settings.parse("rx", d.replicates)?,
        master_seed: settings.seed()?,
    };
    if !(cfg.sigma > 0.0 && cfg.sigma.is_finite()) {
        return Err(CliError::Config(format!("key `sigma`: must be positive, got {}", cfg.sigma)));
    }
    if cfg.replicates == 0 {
        return Err(CliError::Config("key `rx`: must be positive".into()));
    }
    let runs = n_grid
        .iter()
        .map(|&n| regression_experiment(&noise, n, &cfg))
        .collect::<projclt::Result<Vec<_>>>()?;
    let mut pairs = spec.pairs();
    pairs.push(("n".into(), n_grid.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",")));
    for (k, v) in [("rx", cfg.replicates as f64), ("mu", cfg.mu), ("sigma", cfg.sigma), ("alpha", cfg.alpha), ("beta", cfg.beta)] {
        pairs.push((k.into(), v.to_string()));
    }
    pairs.push(("seed".into(), cfg.master_seed.to_string()));
    emit(settings, &regression_report(echo(settings, pairs), &runs), stdout)
}

fn cmd_two_point(settings: &Settings, stdout: &mut dyn Write) -> CliResult<()> {
    let sigma2: f64 = settings.required("sigma2")?;
    let beta3: f64 = settings.required("beta3")?;
    let law = two_point_from_moments(sigma2, beta3).map_err(|e| match e {
        Error::InvalidVariance(_) => CliError::Config(format!("key `sigma2`: {e}")),
        other => CliError::Config(format!("keys `sigma2`, `beta3`: {other}")),
    })?;
    if settings.get("out").is_none() && settings.get("format").is_none() {
        let text = format!(
            "m = {:.7}\nm' = {:.7}\nt = {:.7}\nfourth_moment = {:.7}\n",
            law.m,
            law.m_prime,
            law.t,
            law.target_fourth_moment()
        );
        return stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Runtime(format!("cannot write to stdout: {e}")));
    }
    let pairs = vec![("sigma2".to_string(), fmt_float(sigma2)), ("beta3".to_string(), fmt_float(beta3))];
    let mut report = Report::new(echo(settings, pairs), &["m", "m_prime", "t", "fourth_moment"]);
    report.push_row(vec![
        Cell::Float(law.m),
        Cell::Float(law.m_prime),
        Cell::Float(law.t),
        Cell::Float(law.target_fourth_moment()),
    ]);
    emit(settings, &report, stdout)
}

fn cmd_selftest(settings: &Settings, stdout: &mut dyn Write) -> CliResult<()> {
    let results = selftest::run_all(settings.seed()?);
    let mut text = String::new();
    for r in &results {
        text.push_str(&r.summary());
        text.push('\n');
    }
    stdout
        .write_all(text.as_bytes())
        .map_err(|e| CliError::Runtime(format!("cannot write to stdout: {e}")))?;
    if results.iter().all(|r| r.passed()) {
        Ok(())
    } else {
        Err(CliError::Runtime("oracle suite failure".into()))
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run_with(args: &[String], env_threads: Option<String>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = stdout.write_all(rendered.as_bytes());
            } else {
                let _ = stderr.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    let (name, opts): (&'static str, &Opts) = match &cli.command {
        Command::Sweep(o) => ("sweep", o),
        Command::Gamma(o) => ("gamma", o),
        Command::Regress(o) => ("regress", o),
        Command::Dist(o) => ("dist", o),
        Command::TwoPoint(o) => ("two-point", o),
        Command::Selftest(o) => ("selftest", o),
    };
    let result = collect_settings(name, opts, env_threads).and_then(|settings| {
        let threads = thread_count(&settings)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Runtime(format!("cannot start worker threads: {e}")))?;
        let (result, buf) = pool.install(|| {
            let mut buf: Vec<u8> = Vec::new();
            let result = match name {
                "sweep" => cmd_sweep(&settings, &mut buf),
                "gamma" => cmd_gamma(&settings, &mut buf),
                "regress" => cmd_regress(&settings, &mut buf),
                "dist" => cmd_dist(&settings, &mut buf),
                "two-point" => cmd_two_point(&settings, &mut buf),
                _ => cmd_selftest(&settings, &mut buf),
            };
            (result, buf)
        });
        stdout
            .write_all(&buf)
            .map_err(|e| CliError::Runtime(format!("cannot write to stdout: {e}")))?;
        result
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message());
            e.code()
        }
    }
}

/// Runs with the process's stdout, stderr and `MPL_THREADS`.
pub fn run(args: &[String]) -> i32 {
    let env_threads = std::env::var(THREADS_ENV).ok();
    let mut out = std::io::stdout().lock();
    let mut err = std::io::stderr().lock();
    run_with(args, env_threads, &mut out, &mut err)
}
