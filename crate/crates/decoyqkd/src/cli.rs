//! Experiment runner behind the command-line binary: comparison tables,
//! figure datasets, coverage suites, parameter optimization, and certified
//! estimates for user-supplied tallies. Outputs are deterministic for a
//! fixed config and seed.

use crate::bounds::{self, BoundMethod, DeviationPair, FailureProbability, StatError};
use crate::channel::{expected_tallies, ChannelParams};
use crate::config::{Mode, OutputFormat, RunConfig};
use crate::estimator::{self, EstimateError, ObservedTallies, PulseEnsemble, StateKind};
use crate::keyrate::finite_key_rate;
use crate::optimizer::{self, OptimizedProtocol, ProtocolSettings};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("validation failure: {0}")]
    Validation(String),
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Usage(_) => 1,
            RunError::Numeric(_) => 2,
            RunError::Validation(_) | RunError::Io(_) => 3,
        }
    }

    /// Machine-readable error record for stderr.
    pub fn to_json(&self) -> String {
        let kind = match self {
            RunError::Usage(_) => "usage",
            RunError::Numeric(_) => "numeric",
            RunError::Validation(_) => "validation",
            RunError::Io(_) => "io",
        };
        serde_json::json!({ "error": kind, "message": self.to_string() }).to_string()
    }
}

impl From<StatError> for RunError {
    fn from(e: StatError) -> Self {
        RunError::Numeric(e.to_string())
    }
}

impl From<EstimateError> for RunError {
    fn from(e: EstimateError) -> Self {
        match e {
            EstimateError::Stat(s) => RunError::Numeric(s.to_string()),
            other => RunError::Validation(other.to_string()),
        }
    }
}

/// Files written by a run; empty when the output went to stdout.
#[derive(Debug, Default)]
pub struct RunArtifacts {
    pub files: Vec<PathBuf>,
}

// ---------------------------------------------------------------------------
// Tabular output
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct Table {
    name: &'static str,
    metadata: Vec<(String, String)>,
    columns: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &'static str, cfg: &RunConfig, columns: Vec<&'static str>) -> Table {
        let metadata = vec![
            ("tool".into(), "decoyqkd".into()),
            ("table".into(), name.into()),
            ("mode".into(), cfg.mode.label().into()),
            ("method".into(), cfg.method.label().into()),
            ("config_hash".into(), format!("{:016x}", cfg.hash())),
            ("seed".into(), format!("{}", cfg.seed)),
            ("epsilon_step".into(), format!("{}", cfg.epsilon)),
            (
                "budget".into(),
                "4 steps per key direction (counts, errors, signal restriction, sampling), \
                 8 steps total; count step split over 3 one-sided bounds, error step over 2"
                    .into(),
            ),
        ];
        Table {
            name,
            metadata,
            columns,
            rows: Vec::new(),
        }
    }

    fn meta(&mut self, key: &str, value: String) {
        self.metadata.push((key.into(), value));
    }

    fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    fn to_csv(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.metadata {
            s.push_str(&format!("# {k}: {v}\n"));
        }
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    fn to_json(&self) -> String {
        let metadata: serde_json::Map<String, serde_json::Value> = self
            .metadata
            .iter()
            .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
            .collect();
        let value = serde_json::json!({
            "metadata": metadata,
            "columns": self.columns,
            "rows": self.rows,
        });
        let mut s = serde_json::to_string_pretty(&value).expect("table serializes");
        s.push('\n');
        s
    }

    fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        }
    }
}

/// Writes through a temp file so failed runs leave no partial output.
fn write_atomic(path: &Path, content: &str) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(content.as_bytes())?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result
}

fn emit(tables: Vec<Table>, cfg: &RunConfig) -> Result<RunArtifacts, RunError> {
    let ext = cfg.format.label();
    match &cfg.out {
        None => {
            let mut stdout = std::io::stdout().lock();
            for t in &tables {
                stdout.write_all(t.render(cfg.format).as_bytes())?;
            }
            Ok(RunArtifacts::default())
        }
        Some(out) => {
            let mut files = Vec::new();
            if tables.len() == 1 {
                write_atomic(out, &tables[0].render(cfg.format))?;
                files.push(out.clone());
            } else {
                std::fs::create_dir_all(out)?;
                for t in &tables {
                    let path = out.join(format!("{}.{ext}", t.name));
                    write_atomic(&path, &t.render(cfg.format))?;
                    files.push(path);
                }
            }
            Ok(RunArtifacts { files })
        }
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

// ---------------------------------------------------------------------------
// Config plumbing
// ---------------------------------------------------------------------------

fn channel_of(cfg: &RunConfig) -> ChannelParams {
    ChannelParams {
        detector_efficiency: cfg.eta_d,
        background_yield: cfg.y0,
        misalignment: cfg.e_d,
        loss_db_per_km: cfg.loss,
        distance_km: cfg.distance,
    }
}

fn ensemble_of(cfg: &RunConfig) -> Result<PulseEnsemble, RunError> {
    PulseEnsemble::new(cfg.mu, cfg.nu, cfg.q_signal, cfg.q_weak, cfg.n_pulses).map_err(Into::into)
}

fn settings_of(cfg: &RunConfig, method: BoundMethod) -> ProtocolSettings {
    ProtocolSettings {
        n_pulses: cfg.n_pulses,
        eps_step: cfg.epsilon,
        q_z: cfg.q_z,
        ec_inefficiency: cfg.f_ec,
        method,
    }
}

/// Entry point for every mode. Validates, dispatches, and writes outputs.
pub fn run(cfg: &RunConfig) -> Result<RunArtifacts, RunError> {
    cfg.validate()
        .map_err(|e| RunError::Validation(e.to_string()))?;
    let work = || -> Result<Vec<Table>, RunError> {
        match cfg.mode {
            Mode::Bounds => mode_bounds(cfg),
            Mode::Estimate => mode_estimate(cfg),
            Mode::Keyrate => mode_keyrate(cfg),
            Mode::Optimize => mode_optimize(cfg),
            Mode::Sweep => mode_sweep(cfg),
            Mode::Maxdist => mode_maxdist(cfg),
            Mode::Table2 => mode_table2(cfg),
            Mode::Figures => mode_figures(cfg),
            Mode::Coverage => mode_coverage(cfg),
        }
    };
    let tables = if cfg.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| RunError::Validation(format!("cannot build worker pool: {e}")))?;
        pool.install(work)?
    } else {
        work()?
    };
    emit(tables, cfg)
}

// ---------------------------------------------------------------------------
// bounds
// ---------------------------------------------------------------------------

fn mode_bounds(cfg: &RunConfig) -> Result<Vec<Table>, RunError> {
    let eps = FailureProbability::new(cfg.epsilon)?;
    let chi = cfg.chi;
    let trials = if cfg.ch_trials > 0 {
        cfg.ch_trials
    } else {
        (10.0 * chi.max(1.0)).ceil() as u64
    };
    let b = match cfg.method {
        BoundMethod::ExactChernoff => bounds::invert_mean_bounds_exact(chi, eps)?,
        BoundMethod::SimplifiedChernoff => bounds::invert_mean_bounds_simplified(chi, eps, true)?,
        BoundMethod::AsymptoticChernoff => bounds::invert_mean_bounds_asymptotic(chi, eps)?,
        BoundMethod::Gaussian => bounds::gaussian_mean_bounds(chi, eps),
        BoundMethod::ChernoffHoeffding => {
            let budget = bounds::CHBudget::new(cfg.epsilon, cfg.epsilon, cfg.epsilon, trials)?;
            bounds::ch_mean_bounds(chi, &budget).bounds
        }
    };
    let mut t = Table::new(
        "bounds",
        cfg,
        vec!["method", "chi", "epsilon", "lower", "upper"],
    );
    if cfg.method == BoundMethod::ChernoffHoeffding {
        t.meta("ch_trials", format!("{trials}"));
    }
    t.row(vec![
        cfg.method.label().into(),
        num(chi),
        num(b.epsilon),
        num(b.lower),
        num(b.upper),
    ]);
    Ok(vec![t])
}

// ---------------------------------------------------------------------------
// estimate / keyrate
// ---------------------------------------------------------------------------

fn parse_tallies_csv(text: &str) -> Result<ObservedTallies, RunError> {
    let mut tallies = ObservedTallies::default();
    let mut seen = [[false; 3]; 2];
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if idx == 0 && line.eq_ignore_ascii_case("basis,state,detections,errors") {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(RunError::Validation(format!(
                "tallies line {}: expected 'basis,state,detections,errors', got '{line}'",
                idx + 1
            )));
        }
        let basis = match parts[0].to_ascii_lowercase().as_str() {
            "z" => 0usize,
            "x" => 1,
            other => {
                return Err(RunError::Validation(format!(
                    "tallies line {}: unknown basis '{other}'",
                    idx + 1
                )))
            }
        };
        let state: StateKind = parts[1]
            .parse()
            .map_err(|e| RunError::Validation(format!("tallies line {}: {e}", idx + 1)))?;
        let detections: u64 = parts[2]
            .parse()
            .map_err(|e| RunError::Validation(format!("tallies line {}: bad detections: {e}", idx + 1)))?;
        let errors: u64 = parts[3]
            .parse()
            .map_err(|e| RunError::Validation(format!("tallies line {}: bad errors: {e}", idx + 1)))?;
        if seen[basis][state.index()] {
            return Err(RunError::Validation(format!(
                "tallies line {}: duplicate entry for {} {}",
                idx + 1,
                parts[0],
                state.label()
            )));
        }
        seen[basis][state.index()] = true;
        let target = if basis == 0 {
            &mut tallies.z
        } else {
            &mut tallies.x
        };
        target.detections[state.index()] = detections as f64;
        target.errors[state.index()] = errors as f64;
    }
    tallies.validate().map_err(RunError::from)?;
    Ok(tallies)
}

/// User tallies when a CSV is configured, expected tallies otherwise.
fn tallies_of(cfg: &RunConfig, ensemble: &PulseEnsemble) -> Result<(ObservedTallies, &'static str), RunError> {
    match &cfg.tallies {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            Ok((parse_tallies_csv(&text)?, "file"))
        }
        None => Ok((
            expected_tallies(ensemble, &channel_of(cfg), cfg.q_z),
            "simulated",
        )),
    }
}

fn estimate_columns() -> Vec<&'static str> {
    vec![
        "basis",
        "m1_lower",
        "m1_signal_lower",
        "e1_bit_upper",
        "theta",
        "phase_error_upper",
        "budget_spent",
        "flags",
    ]
}

fn estimate_rows(t: &mut Table, pair: &estimator::EstimatePair) {
    for (basis, e) in [("z", &pair.z), ("x", &pair.x)] {
        t.row(vec![
            basis.into(),
            num(e.m1_lower),
            num(e.m1_signal_lower),
            num(e.e1_bit_upper),
            num(e.theta),
            num(e.phase_error_upper),
            num(e.budget_spent),
            e.flags.to_string(),
        ]);
    }
}

fn mode_estimate(cfg: &RunConfig) -> Result<Vec<Table>, RunError> {
    let ensemble = ensemble_of(cfg)?;
    let (tallies, source) = tallies_of(cfg, &ensemble)?;
    let pair = estimator::estimate(&tallies, &ensemble, cfg.q_z, cfg.epsilon, cfg.method)?;
    let mut t = Table::new("estimate", cfg, estimate_columns());
    t.meta("tallies_source", source.into());
    estimate_rows(&mut t, &pair);
    Ok(vec![t])
}

fn mode_keyrate(cfg: &RunConfig) -> Result<Vec<Table>, RunError> {
    let ensemble = ensemble_of(cfg)?;
    let (tallies, source) = tallies_of(cfg, &ensemble)?;
    let pair = estimator::estimate(&tallies, &ensemble, cfg.q_z, cfg.epsilon, cfg.method)?;
    let result = finite_key_rate(&pair, &tallies, &ensemble, cfg.f_ec);
    let mut t = Table::new(
        "keyrate",
        cfg,
        vec![
            "rate",
            "key_bits_z",
            "key_bits_x",
            "ec_cost_z",
            "ec_cost_x",
            "pre_clamp_deficit",
            "budget_total",
            "flags",
        ],
    );
    t.meta("tallies_source", source.into());
    t.row(vec![
        num(result.rate),
        num(result.key_bits_z),
        num(result.key_bits_x),
        num(result.ec_cost_z),
        num(result.ec_cost_x),
        num(result.pre_clamp_deficit),
        num(pair.z.budget_spent + pair.x.budget_spent),
        result.flags.to_string(),
    ]);
    let mut detail = Table::new("estimate", cfg, estimate_columns());
    detail.meta("tallies_source", source.into());
    estimate_rows(&mut detail, &pair);
    Ok(vec![t, detail])
}

// ---------------------------------------------------------------------------
// optimize / sweep / maxdist
// ---------------------------------------------------------------------------

fn optimize_row(t: &mut Table, km: f64, opt: &OptimizedProtocol) {
    t.row(vec![
        num(km),
        num(opt.result.rate),
        num(opt.ensemble.signal_intensity),
        num(opt.ensemble.weak_intensity),
        num(opt.ensemble.signal_share),
        num(opt.ensemble.weak_share),
        num(opt.ensemble.vacuum_share),
        num(opt.result.key_bits_z + opt.result.key_bits_x),
        format!("{}", opt.evaluations),
        opt.result.flags.to_string(),
    ]);
}

fn mode_optimize(cfg: &RunConfig) -> Result<Vec<Table>, RunError> {
    let params = channel_of(cfg);
    let opt = optimizer::optimize_protocol(&params, &settings_of(cfg, cfg.method));
    let mut t = Table::new(
        "optimize",
        cfg,
        vec![
            "distance_km",
            "rate",
            "mu",
            "nu",
            "q_signal",
            "q_weak",
            "q_vacuum",
            "key_bits",
            "evaluations",
            "flags",
        ],
    );
    optimize_row(&mut t, cfg.distance, &opt);
    Ok(vec![t])
}

fn sweep_grid(cfg: &RunConfig) -> Vec<f64> {
    let mut grid = Vec::new();
    let mut km = cfg.sweep_from;
    while km <= cfg.sweep_to + 1e-9 {
        grid.push(km);
        km += cfg.sweep_step;
    }
    grid
}

const SWEEP_METHODS: [BoundMethod; 3] = [
    BoundMethod::ExactChernoff,
    BoundMethod::Gaussian,
    BoundMethod::ChernoffHoeffding,
];

fn mode_sweep(cfg: &RunConfig) -> Result<Vec<Table>, RunError> {
    let params = channel_of(cfg);
    let grid = sweep_grid(cfg);

    let per_method: Vec<Vec<OptimizedProtocol>> = SWEEP_METHODS
        .par_iter()
        .map(|m| optimizer::scan_distances(&params, &settings_of(cfg, *m), &grid))
        .collect();
    let asymptotic: Vec<f64> = grid
        .par_iter()
        .map(|km| optimizer::optimize_asymptotic_intensity(&params.at_distance(*km), cfg.q_z, cfg.f_ec).1)
        .collect();

    let mut t = Table::new(
        "sweep",
        cfg,
        vec![
            "distance_km",
            "rate_asymptotic",
            "rate_exact",
            "rate_gaussian",
            "rate_ch",
            "mu_exact",
            "nu_exact",
            "q_signal_exact",
            "q_weak_exact",
        ],
    );
    for (i, km) in grid.iter().enumerate() {
        let exact = &per_method[0][i];
        t.row(vec![
            num(*km),
            num(asymptotic[i]),
            num(exact.result.rate),
            num(per_method[1][i].result.rate),
            num(per_method[2][i].result.rate),
            num(exact.ensemble.signal_intensity),
            num(exact.ensemble.weak_intensity),
            num(exact.ensemble.signal_share),
            num(exact.ensemble.weak_share),
        ]);
    }
    Ok(vec![t])
}

fn mode_maxdist(cfg: &RunConfig) -> Result<Vec<Table>, RunError> {
    let params = channel_of(cfg);
    let exponents: Vec<u32> = (cfg.maxdist_n_min_exp..=cfg.maxdist_n_max_exp).collect();
    let combos: Vec<(u32, BoundMethod)> = exponents
        .iter()
        .flat_map(|e| SWEEP_METHODS.iter().map(move |m| (*e, *m)))
        .collect();
    let distances: Vec<((u32, BoundMethod), f64)> = combos
        .par_iter()
        .map(|(e, m)| {
            let mut settings = settings_of(cfg, *m);
            settings.n_pulses = 10f64.powi(*e as i32);
            ((*e, *m), optimizer::max_secure_distance(&params, &settings))
        })
        .collect();
    let lookup = |e: u32, m: BoundMethod| -> f64 {
        distances
            .iter()
            .find(|((ee, mm), _)| *ee == e && *mm == m)
            .map(|(_, d)| *d)
            .unwrap_or(0.0)
    };
    let mut t = Table::new(
        "maxdist",
        cfg,
        vec!["n_pulses", "km_exact", "km_gaussian", "km_ch"],
    );
    let asym = optimizer::max_secure_distance_asymptotic(&params, cfg.q_z, cfg.f_ec);
    t.meta("km_asymptotic", num(asym));
    for e in exponents {
        t.row(vec![
            num(10f64.powi(e as i32)),
            num(lookup(e, BoundMethod::ExactChernoff)),
            num(lookup(e, BoundMethod::Gaussian)),
            num(lookup(e, BoundMethod::ChernoffHoeffding)),
        ]);
    }
    Ok(vec![t])
}

// ---------------------------------------------------------------------------
// table2
// ---------------------------------------------------------------------------

/// Closed-form failure probabilities at a fixed deviation of n standard
/// deviations, in the large-observation limit.
pub fn fixed_deviation_failures(n_sigma: f64) -> (f64, f64, f64) {
    let gaussian = bounds::erfc(n_sigma / std::f64::consts::SQRT_2);
    // Chernoff+Hoeffding with every test passing: invert each deviation
    // branch at deviation n sqrt(chi); the pre-estimate cost vanishes in the
    // large-chi limit. Upper: 2 ln(16/eps2^4) = n^2; lower: 3 ln(1/eps3) = n^2.
    let eps2 = 2.0 * (-n_sigma * n_sigma / 8.0).exp();
    let eps3 = (-n_sigma * n_sigma / 3.0).exp();
    let ch = eps2 + eps3;
    let new_method = 2.0 * (-n_sigma * n_sigma / 2.0).exp();
    (gaussian, ch, new_method)
}

fn mode_table2(cfg: &RunConfig) -> Result<Vec<Table>, RunError> {
    let mut t = Table::new(
        "table2",
        cfg,
        vec![
            "n_sigma",
            "log10_eps_gaussian",
            "log10_eps_ch",
            "log10_eps_new",
            "log10_eps_new_finite",
        ],
    );
    t.meta(
        "ch_interpretation",
        "equal budget split eps1 = eps2 = eps3; each deviation branch inverted at the \
         fixed deviation n*sqrt(chi) as chi -> inf (upper from the quartic-budget branch, \
         lower from the 3/2-power branch); reported value is eps2 + eps3"
            .into(),
    );
    let chi: f64 = 1e10;
    for n in [3.0, 5.0, 7.0, 9.0] {
        let (gauss, ch, new_method) = fixed_deviation_failures(n);
        let delta = n / chi.sqrt();
        let finite =
            bounds::interval_failure_probability(chi, &DeviationPair::new(delta, delta)?)
                .min(1.0);
        t.row(vec![
            num(n),
            num(gauss.log10()),
            num(ch.log10()),
            num(new_method.log10()),
            num(finite.log10()),
        ]);
    }
    Ok(vec![t])
}

// ---------------------------------------------------------------------------
// figures
// ---------------------------------------------------------------------------

/// Interval half-widths over sigma = sqrt(chi) in the large-chi limit, per
/// method, at interval failure budget eps.
pub fn interval_halfwidths_over_sigma(eps: FailureProbability) -> Result<(f64, f64, f64), RunError> {
    let chi = 1e12;
    let exact = bounds::invert_mean_bounds_exact(chi, eps)?;
    let new_method = (exact.upper - exact.lower) / (2.0 * chi.sqrt());
    let gaussian = bounds::gaussian_sigma_multiplier(eps);
    let half = eps.value() / 2.0;
    let upper_dev = (2.0 * (16f64.ln() + 4.0 * (1.0 / half).ln())).sqrt();
    let lower_dev = (3.0 * (1.0 / half).ln()).sqrt();
    let ch = 0.5 * (upper_dev + lower_dev);
    Ok((gaussian, ch, new_method))
}

fn fig1(cfg: &RunConfig) -> Result<Table, RunError> {
    let mut t = Table::new(
        "fig1",
        cfg,
        vec![
            "epsilon",
            "halfwidth_over_sigma_gaussian",
            "halfwidth_over_sigma_ch",
            "halfwidth_over_sigma_new",
        ],
    );
    for i in 0..=38 {
        let eps = 10f64.powf(-1.0 - i as f64 * 0.5);
        let eps = FailureProbability::new(eps)?;
        let (g, c, n) = interval_halfwidths_over_sigma(eps)?;
        t.row(vec![num(eps.value()), num(g), num(c), num(n)]);
    }
    Ok(t)
}

fn fig2(cfg: &RunConfig) -> Result<Table, RunError> {
    let eps = FailureProbability::new(cfg.epsilon)?;
    let mut t = Table::new(
        "fig2",
        cfg,
        vec![
            "chi",
            "new_lower",
            "new_upper",
            "gaussian_lower",
            "gaussian_upper",
        ],
    );
    t.meta(
        "lower_bound_crossover_chi",
        num(bounds::gaussian_chernoff_lower_crossover(eps)?),
    );
    let rows: Result<Vec<Vec<String>>, StatError> = (0..=300)
        .into_par_iter()
        .map(|i| {
            let chi = i as f64 * 10.0;
            let exact = bounds::invert_mean_bounds_exact(chi, eps)?;
            let gauss = bounds::gaussian_mean_bounds(chi, eps);
            Ok(vec![
                num(chi),
                num(exact.lower),
                num(exact.upper),
                num(gauss.lower),
                num(gauss.upper),
            ])
        })
        .collect();
    for row in rows? {
        t.row(row);
    }
    Ok(t)
}

fn fig3(cfg: &RunConfig) -> Result<Table, RunError> {
    let mut t = Table::new(
        "fig3",
        cfg,
        vec!["chi", "eps_3sigma", "eps_5sigma", "eps_7sigma", "eps_9sigma"],
    );
    for i in 0..=90 {
        let chi = 10f64.powf(1.0 + i as f64 * 0.1);
        let mut cells = vec![num(chi)];
        for n in [3.0, 5.0, 7.0, 9.0] {
            let root = chi.sqrt();
            // interval [chi - n sqrt(chi), chi + n sqrt(chi)] needs a
            // positive lower endpoint; otherwise there is no confidence
            let eps = if root > n * 1.0000001 {
                let pair = DeviationPair::new(n / (root - n), n / (root + n))?;
                bounds::interval_failure_probability(chi, &pair).min(1.0)
            } else {
                1.0
            };
            cells.push(num(eps));
        }
        t.row(cells);
    }
    Ok(t)
}

fn mode_figures(cfg: &RunConfig) -> Result<Vec<Table>, RunError> {
    Ok(vec![fig1(cfg)?, fig2(cfg)?, fig3(cfg)?])
}

// ---------------------------------------------------------------------------
// coverage
// ---------------------------------------------------------------------------

/// Monte-Carlo coverage of the exact inversion: samples binomial tallies at
/// a known mean and counts how often the certified interval misses it.
pub fn coverage_misses(
    mean: f64,
    trials: u64,
    eps: FailureProbability,
    seed: u64,
) -> Result<u64, RunError> {
    let p = 0.1;
    let n = (mean / p).round() as u64;
    let binomial = Binomial::new(n, p)
        .map_err(|e| RunError::Numeric(format!("binomial({n}, {p}): {e}")))?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let samples: Vec<u64> = (0..trials).map(|_| binomial.sample(&mut rng)).collect();
    let misses = samples
        .par_iter()
        .map(|&x| {
            let b = bounds::invert_mean_bounds_exact(x as f64, eps).expect("valid inversion");
            u64::from(mean < b.lower || mean > b.upper)
        })
        .sum();
    Ok(misses)
}

fn mode_coverage(cfg: &RunConfig) -> Result<Vec<Table>, RunError> {
    let eps = FailureProbability::new(cfg.coverage_epsilon)
        .map_err(|e| RunError::Validation(e.to_string()))?;
    let trials = cfg.coverage_trials;
    let mut t = Table::new(
        "coverage",
        cfg,
        vec!["mean", "trials", "misses", "miss_rate", "threshold", "pass"],
    );
    t.meta("coverage_epsilon", num(cfg.coverage_epsilon));
    // one-sided slack on top of the nominal failure probability
    let threshold = cfg.coverage_epsilon + 3.0 * (cfg.coverage_epsilon / trials as f64).sqrt();
    for (idx, mean) in [10.0, 100.0, 10_000.0].into_iter().enumerate() {
        let misses = coverage_misses(mean, trials, eps, cfg.seed.wrapping_add(idx as u64))?;
        let miss_rate = misses as f64 / trials as f64;
        t.row(vec![
            num(mean),
            format!("{trials}"),
            format!("{misses}"),
            num(miss_rate),
            num(threshold),
            format!("{}", miss_rate <= threshold),
        ]);
    }
    Ok(vec![t])
}

#[cfg(test)]
#[allow(clippy::field_reassign_with_default)]
mod tests {
    use super::*;
    use crate::config::parse_config_str;

    fn tmpdir(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("decoyqkd-test-{name}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn bounds_mode_prints_zero_observation_interval() {
        let dir = tmpdir("bounds");
        let out = dir.join("bounds.csv");
        let mut cfg = RunConfig::default();
        cfg.mode = Mode::Bounds;
        cfg.chi = 0.0;
        cfg.out = Some(out.clone());
        run(&cfg).unwrap();
        let text = std::fs::read_to_string(&out).unwrap();
        let data_line = text.lines().last().unwrap();
        let cells: Vec<&str> = data_line.split(',').collect();
        assert_eq!(cells[0], "exact");
        assert_eq!(cells[3].parse::<f64>().unwrap(), 0.0);
        assert!((cells[4].parse::<f64>().unwrap() - 23.7190).abs() < 5e-5);
    }

    #[test]
    fn table2_mode_documents_budget_interpretation() {
        let dir = tmpdir("table2");
        let out = dir.join("table2.csv");
        let mut cfg = RunConfig::default();
        cfg.mode = Mode::Table2;
        cfg.out = Some(out.clone());
        run(&cfg).unwrap();
        let text = std::fs::read_to_string(&out).unwrap();
        assert!(text.contains("# ch_interpretation:"));
        assert!(text.lines().filter(|l| !l.starts_with('#')).count() == 5);
    }

    #[test]
    fn outputs_are_byte_identical_across_runs() {
        let dir = tmpdir("determinism");
        let mut cfg = RunConfig::default();
        cfg.mode = Mode::Coverage;
        cfg.coverage_trials = 2_000;
        cfg.seed = 11;
        cfg.out = Some(dir.join("a.csv"));
        run(&cfg).unwrap();
        let a = std::fs::read(dir.join("a.csv")).unwrap();
        cfg.out = Some(dir.join("b.csv"));
        run(&cfg).unwrap();
        let b = std::fs::read(dir.join("b.csv")).unwrap();
        assert_eq!(a, b);
        // worker count routes scheduling, never results
        cfg.out = Some(dir.join("c.csv"));
        cfg.workers = 3;
        run(&cfg).unwrap();
        let c = std::fs::read(dir.join("c.csv")).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn tallies_round_trip_through_estimate_mode() {
        let dir = tmpdir("tallies");
        let tallies_path = dir.join("tallies.csv");
        std::fs::write(
            &tallies_path,
            "basis,state,detections,errors\n\
             z,signal,217663,8473\nz,weak,29211,1460\nz,vacuum,425,212\n\
             x,signal,217663,8473\nx,weak,29211,1460\nx,vacuum,425,212\n",
        )
        .unwrap();
        let out = dir.join("estimate.csv");
        let mut cfg = RunConfig::default();
        cfg.mode = Mode::Estimate;
        cfg.tallies = Some(tallies_path);
        cfg.out = Some(out.clone());
        run(&cfg).unwrap();
        let text = std::fs::read_to_string(&out).unwrap();
        assert!(text.contains("# tallies_source: file"));
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows.len(), 3); // header + z + x
        let z: Vec<&str> = rows[1].split(',').collect();
        let m1_signal: f64 = z[2].parse().unwrap();
        assert!(m1_signal > 1e5 && m1_signal < 2e5);
    }

    #[test]
    fn tallies_parser_rejects_garbage() {
        assert!(parse_tallies_csv("z,signal,10").is_err());
        assert!(parse_tallies_csv("y,signal,10,1").is_err());
        assert!(parse_tallies_csv("z,signal,10,11").is_err()); // errors > detections
        assert!(parse_tallies_csv("z,signal,10,1\nz,signal,10,1").is_err());
    }

    #[test]
    fn keyrate_mode_simulates_without_tallies() {
        let dir = tmpdir("keyrate");
        let out = dir.join("keyrate");
        let mut cfg = RunConfig::default();
        cfg.mode = Mode::Keyrate;
        cfg.out = Some(out.clone());
        run(&cfg).unwrap();
        // keyrate emits two tables into a directory
        let text = std::fs::read_to_string(out.join("keyrate.csv")).unwrap();
        assert!(text.contains("# tallies_source: simulated"));
        let data = text.lines().last().unwrap();
        let rate: f64 = data.split(',').next().unwrap().parse().unwrap();
        assert!(rate > 2.6e-6 && rate < 3.5e-6, "rate = {rate}");
    }

    #[test]
    fn json_format_mirrors_table() {
        let dir = tmpdir("json");
        let out = dir.join("bounds.json");
        let mut cfg = RunConfig::default();
        cfg.mode = Mode::Bounds;
        cfg.chi = 100.0;
        cfg.format = OutputFormat::Json;
        cfg.out = Some(out.clone());
        run(&cfg).unwrap();
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(v["columns"][0], "method");
        assert_eq!(v["rows"].as_array().unwrap().len(), 1);
    }

    #[test]
    fn invalid_config_maps_to_validation_error() {
        let cfg = parse_config_str("eta_d = 1.5").unwrap();
        let err = run(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn numeric_precondition_maps_to_exit_2() {
        let mut cfg = RunConfig::default();
        cfg.mode = Mode::Bounds;
        cfg.method = BoundMethod::SimplifiedChernoff;
        cfg.chi = 1.0; // far below the 6-beta validity threshold
        let err = run(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn sweep_mode_single_point() {
        let dir = tmpdir("sweep");
        let out = dir.join("sweep.csv");
        let mut cfg = RunConfig::default();
        cfg.mode = Mode::Sweep;
        cfg.sweep_from = 50.0;
        cfg.sweep_to = 50.0;
        cfg.out = Some(out.clone());
        run(&cfg).unwrap();
        let text = std::fs::read_to_string(&out).unwrap();
        let data: Vec<&str> = text.lines().last().unwrap().split(',').collect();
        let asym: f64 = data[1].parse().unwrap();
        let exact: f64 = data[2].parse().unwrap();
        let gauss: f64 = data[3].parse().unwrap();
        let ch: f64 = data[4].parse().unwrap();
        assert!(asym >= exact && exact >= ch && exact > 0.0);
        assert!(gauss > 0.0);
    }

    #[test]
    fn maxdist_mode_narrowed_grid() {
        let dir = tmpdir("maxdist");
        let out = dir.join("maxdist.csv");
        let mut cfg = RunConfig::default();
        cfg.mode = Mode::Maxdist;
        cfg.maxdist_n_min_exp = 7;
        cfg.maxdist_n_max_exp = 7;
        cfg.out = Some(out.clone());
        run(&cfg).unwrap();
        let text = std::fs::read_to_string(&out).unwrap();
        assert!(text.contains("# km_asymptotic:"));
        let data: Vec<&str> = text.lines().last().unwrap().split(',').collect();
        assert_eq!(data[0], "10000000");
        let ch_km: f64 = data[3].parse().unwrap();
        assert_eq!(ch_km, 0.0);
    }

    #[test]
    fn figure_tables_have_expected_shapes() {
        let cfg = RunConfig::default();
        let f1 = fig1(&cfg).unwrap();
        assert_eq!(f1.rows.len(), 39);
        let f3 = fig3(&cfg).unwrap();
        // chi = 10 cannot carry a five-sigma interval: no confidence
        assert_eq!(f3.rows[0][2], "1");
    }
}
