//! The `depol` command line: argument parsing and the command runners.
//!
//! Each command writes its CSV outputs and `<command>.json` into the output
//! directory, plus `<command>_timing.json` with the wall time. Everything
//! except the timing file is a pure function of (config, seed, inputs).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::bath::{
    adaptive_outer_cutoff, analytic_t, ensemble_polarization, resonance_curve, spinlock_lifetime, EnsembleOptions, EtaModel, EtaSamples,
    SpinLockMode,
};
use crate::charge::{center_recovery, evolve, fit_hop_time, init_profile, DiffusionParams};
use crate::dipolar::{coeffs_ghq, field_aligned_partner};
use crate::error::{Error, Result};
use crate::fit::{
    fit_lorentzian, fit_rate_pair, fit_resonance, fit_stretched, lorentzian, Amplitude, CurveSeries, FitResult, ResonanceFitOptions,
};
use crate::io::Normalization;
use crate::io::OraclePairing;
use crate::io::{
    config_hash, ingest_differential, parse_curve, parse_readout, render_curve, render_table, write_text, FitModel, Report, RunConfig,
    Table,
};
use crate::kinetics::{evolve_populations, population_diffs_analytic, population_diffs_stretched, Populations3};
use crate::numerics::{linear_regression, linspace, logspace};
use crate::oracle::{golden_rule_rate, oracle_decay_rate, OracleSetup};
use crate::units::{make_frame, AngularFrequency, Length, Rate, Time, J0};

#[derive(Debug, Parser)]
#[command(name = "depol", version, about = "Depolarization of dense NV ensembles with fluctuator spins")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Random seed; required by randomized commands unless the config sets one.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (default: config `output.dir`, else `out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Spin-lock model.
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Ideal,
    Full,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ensemble polarization P(t) against the analytic stretched exponential.
    Decay,
    /// 1/T₁ against group splitting.
    Resonance,
    /// Spin-lock lifetime against Rabi frequency.
    Spinlock,
    /// Three-level population differences.
    Kinetics,
    /// Golden-rule rates against brute-force open-system propagation.
    Oracle,
    /// Charge-differential diffusion and centre recovery.
    Charge,
    /// Fit a model to a curve or a raw differential readout.
    Fit(FitArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Curve (`x,y[,sigma]`) or raw readout (`t,f_no_pi,f_pi[,reps]`).
    #[arg(long)]
    pub input: PathBuf,
    /// Second curve for the rate-pair model.
    #[arg(long)]
    pub input2: Option<PathBuf>,
    /// stretched | lorentzian | rate-pair | resonance | hop-time
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long, value_enum)]
    pub normalization: Option<NormArg>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    Earliest,
    Late,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Decay => "decay",
            Command::Resonance => "resonance",
            Command::Spinlock => "spinlock",
            Command::Kinetics => "kinetics",
            Command::Oracle => "oracle",
            Command::Charge => "charge",
            Command::Fit(_) => "fit",
        }
    }
}

/// Files written by a run.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub report: Report,
}

struct Output {
    results: Value,
    files: Vec<(String, String)>,
    warnings: Vec<String>,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    hash: String,
    verbose: bool,
}

impl Ctx<'_> {
    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("[depol] {}", msg.as_ref());
        }
    }

    fn seed(&self, command: &str) -> Result<u64> {
        self.cfg.seed.ok_or_else(|| {
            Error::config(format!(
                "'{command}' is randomized and needs an explicit --seed (or `seed` in the config)"
            ))
        })
    }

    fn meta(&self, command: &str) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("command".into(), command.into());
        m.insert("config_sha256".into(), self.hash.clone());
        m.insert("library_version".into(), env!("CARGO_PKG_VERSION").into());
        m.insert("seed".into(), self.cfg.seed.map_or("none".into(), |s| s.to_string()));
        m
    }

    fn curve(&self, command: &str, c: &CurveSeries) -> String {
        render_curve(c, &self.meta(command))
    }
}

/// Loads the config, applies flag overrides and runs the command.
pub fn run(cli: &Cli) -> Result<RunSummary> {
    let start = Instant::now();
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if let Some(m) = cli.mode {
        cfg.spinlock.mode = match m {
            ModeArg::Ideal => SpinLockMode::Ideal,
            ModeArg::Full => SpinLockMode::Full,
        };
    }
    if let Command::Fit(a) = &cli.command {
        if let Some(m) = &a.model {
            cfg.fit.model = m.parse()?;
        }
        if let Some(n) = a.normalization {
            cfg.fit.normalization = match n {
                NormArg::Earliest => Normalization::Earliest,
                NormArg::Late => Normalization::Late,
            };
        }
    }
    let out_dir = cli
        .out
        .clone()
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let ctx = Ctx {
        cfg: &cfg,
        hash: config_hash(&cfg),
        verbose: cli.verbose,
    };
    let name = cli.command.name();
    ctx.log(format!("{name}: config {}", ctx.hash));

    let exec = || -> Result<Output> {
        match &cli.command {
            Command::Decay => decay(&ctx),
            Command::Resonance => resonance(&ctx),
            Command::Spinlock => spinlock(&ctx),
            Command::Kinetics => kinetics(&ctx),
            Command::Oracle => oracle(&ctx),
            Command::Charge => charge(&ctx),
            Command::Fit(a) => fit(&ctx, a),
        }
    };
    let out = match cli.threads {
        Some(0) => return Err(Error::config("--threads must be >= 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config(format!("cannot start {n} worker threads: {e}")))?
            .install(exec)?,
        None => exec()?,
    };

    let mut report = Report::new(name, &cfg, out.results);
    report.warnings = out.warnings;
    let mut files = Vec::new();
    for (fname, text) in &out.files {
        let p = out_dir.join(fname);
        write_text(&p, text)?;
        report.outputs.push(fname.clone());
        files.push(p);
    }
    let rp = out_dir.join(format!("{name}.json"));
    write_text(&rp, &report.to_json()?)?;
    files.push(rp);
    let timing = json!({ "command": name, "wall_time_s": start.elapsed().as_secs_f64(), "threads": rayon::current_num_threads() });
    let tp = out_dir.join(format!("{name}_timing.json"));
    write_text(&tp, &format!("{timing:#}\n"))?;
    files.push(tp);
    for w in &report.warnings {
        ctx.log(format!("warning: {w}"));
    }
    ctx.log(format!("wrote {} files to {}", files.len(), out_dir.display()));
    Ok(RunSummary { out_dir, files, report })
}

fn fit_json(f: &FitResult) -> Value {
    let params: serde_json::Map<String, Value> = f
        .names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), json!({ "value": f.values[i], "std_error": f.std_errors[i] })))
        .collect();
    json!({
        "parameters": params,
        "chi2": f.chi2,
        "reduced_chi2": f.reduced_chi2,
        "dof": f.dof,
        "converged": f.converged,
        "iterations": f.iterations,
        "singular": f.singular,
        "condition_number": f.condition_number,
        "poor_fit": f.poor_fit,
    })
}

fn require_converged(f: &FitResult, what: &str) -> Result<()> {
    if f.converged {
        Ok(())
    } else {
        Err(Error::NonConvergence(format!(
            "{what} stopped after {} iterations (chi2 = {})",
            f.iterations, f.chi2
        )))
    }
}

/// Slope of ln(−ln P) against ln t over points with 0.02 < P < 0.98.
fn stretch_exponent(c: &CurveSeries) -> Option<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) =
        c.x.iter()
            .zip(&c.y)
            .filter(|(t, p)| **t > 0.0 && **p > 0.02 && **p < 0.98)
            .map(|(t, p)| (t.ln(), (-p.ln()).ln()))
            .unzip();
    linear_regression(&x, &y).ok().map(|f| f.slope)
}

fn decay(ctx: &Ctx) -> Result<Output> {
    let seed = ctx.seed("decay")?;
    let s = &ctx.cfg.decay;
    let b = &ctx.cfg.bath;
    if !(s.t_min_us > 0.0 && s.t_max_us > s.t_min_us) || s.points < 2 {
        return Err(Error::config("[decay] needs 0 < t_min_us < t_max_us and points >= 2"));
    }
    let mut params = b.params()?;
    let delta = AngularFrequency::from_mhz(s.delta_mhz);
    let est = EtaSamples::draw(&params, s.eta_samples, seed)?.evaluate(EtaModel::Bare, delta, &params);
    let t_an = analytic_t(&params, est.eta)?;
    if b.r_outer_nm.is_none() {
        params.r_outer = adaptive_outer_cutoff(&params, &est, b.tail_fraction)?;
    }
    params.validate()?;
    ctx.log(format!("analytic T = {:.4} us, R = {:.2} nm", t_an.0, params.r_outer.0));
    let times = logspace(s.t_min_us, s.t_max_us, s.points);
    let opts = EnsembleOptions {
        n_configs: s.n_configs,
        bootstrap_resamples: s.bootstrap,
    };
    let curve = ensemble_polarization(&params, delta, &times, opts, seed)?;
    let amp = s.amplitude_fixed.map_or(Amplitude::Free, Amplitude::Fixed);
    let f = fit_stretched(&curve, amp)?;
    require_converged(&f, "stretched-exponential fit")?;
    let t_fit = f.value("T1").expect("T1 parameter");
    let beta = stretch_exponent(&curve);
    let mut warnings = Vec::new();
    if beta.is_none() {
        warnings.push("too few points inside 0.02 < P < 0.98 for the stretch exponent".into());
    }
    let results = json!({
        "analytic_t_us": t_an.0,
        "eta": est.eta,
        "eta_std_error": est.std_error,
        "r_outer_nm": params.r_outer.0,
        "expected_fluctuators": params.expected_count(),
        "n_configs": s.n_configs,
        "fit": fit_json(&f),
        "fitted_over_analytic": t_fit / t_an.0,
        "stretch_exponent": beta,
    });
    Ok(Output {
        results,
        files: vec![("decay.csv".into(), ctx.curve("decay", &curve))],
        warnings,
    })
}

fn resonance(ctx: &Ctx) -> Result<Output> {
    let seed = ctx.seed("resonance")?;
    let s = &ctx.cfg.resonance;
    if s.points < 2 || !(s.delta_max_mhz > s.delta_min_mhz) {
        return Err(Error::config("[resonance] needs delta_min_mhz < delta_max_mhz and points >= 2"));
    }
    let params = ctx.cfg.bath.params()?;
    let grid: Vec<AngularFrequency> = linspace(s.delta_min_mhz, s.delta_max_mhz, s.points)
        .into_iter()
        .map(AngularFrequency::from_mhz)
        .collect();
    let curve = resonance_curve(&grid, &params, s.samples, seed)?;
    let ends = resonance_curve(
        &[AngularFrequency(0.0), AngularFrequency::from_mhz(s.far_delta_mhz)],
        &params,
        s.samples,
        seed,
    )?;
    let ratio = ends.y[0] / ends.y[1];
    let mut warnings = Vec::new();
    let lor = match fit_lorentzian(&curve) {
        Ok(f) => Some(fit_json(&f)),
        Err(e) => {
            warnings.push(format!("Lorentzian fit failed: {e}"));
            None
        }
    };
    let results = json!({
        "inverse_t1_center_per_ms": ends.y[0],
        "inverse_t1_far_per_ms": ends.y[1],
        "far_delta_mhz": s.far_delta_mhz,
        "enhancement_ratio": ratio,
        "lorentzian": lor,
        "samples": s.samples,
    });
    Ok(Output {
        results,
        files: vec![("resonance.csv".into(), ctx.curve("resonance", &curve))],
        warnings,
    })
}

fn spinlock(ctx: &Ctx) -> Result<Output> {
    let seed = ctx.seed("spinlock")?;
    let s = &ctx.cfg.spinlock;
    let params = ctx.cfg.bath.params()?;
    let delta = AngularFrequency::from_mhz(s.delta_mhz);
    let mut omegas = s.omega_mhz.clone();
    omegas.sort_by(f64::total_cmp);
    omegas.dedup();
    if omegas.is_empty() {
        return Err(Error::config("[spinlock] omega_mhz is empty"));
    }
    let t1 = analytic_t(
        &params,
        EtaSamples::draw(&params, s.samples, seed)?
            .evaluate(EtaModel::Bare, delta, &params)
            .eta,
    )?;
    let life: Vec<f64> = omegas
        .iter()
        .map(|o| spinlock_lifetime(AngularFrequency::from_mhz(*o), delta, &params, s.mode, s.samples, seed).map(|t| t.0))
        .collect::<Result<_>>()?;
    let ratios: Vec<f64> = life.iter().map(|t| t / t1.0).collect();
    let curve = CurveSeries::new(omegas.clone(), life.clone(), None, "MHz", "us")?
        .with_meta("quantity", "spin-lock lifetime vs Rabi frequency")
        .with_meta("mode", format!("{:?}", s.mode).to_lowercase());
    let results = json!({
        "mode": s.mode,
        "t1_us": t1.0,
        "ratio_to_t1": ratios,
        "nondecreasing": life.windows(2).all(|w| w[1] >= w[0]),
    });
    Ok(Output {
        results,
        files: vec![("spinlock.csv".into(), ctx.curve("spinlock", &curve))],
        warnings: vec![],
    })
}

fn kinetics(ctx: &Ctx) -> Result<Output> {
    let s = &ctx.cfg.kinetics;
    if !(s.t_max_us > 0.0) || s.points < 2 {
        return Err(Error::config("[kinetics] needs t_max_us > 0 and points >= 2"));
    }
    let (g1, g2) = (Rate::from_khz(s.gamma1_khz), Rate::from_khz(s.gamma2_khz));
    let times = linspace(0.0, s.t_max_us, s.points);
    let mut d1 = Vec::with_capacity(times.len());
    let mut d2 = Vec::with_capacity(times.len());
    let mut max_dev: f64 = 0.0;
    for &t in &times {
        let (a, b) = if s.stretched {
            population_diffs_stretched(g1, g2, Time(t))?
        } else {
            population_diffs_analytic(g1, g2, Time(t))?
        };
        if !s.stretched {
            let (e1, e2) = evolve_populations(&Populations3::minus_one(), g1, g2, Time(t))?.differences();
            max_dev = max_dev.max((e1 - a).abs()).max((e2 - b).abs());
        }
        d1.push(a);
        d2.push(b);
    }
    let c1 = CurveSeries::new(times.clone(), d1, None, "us", "1")?.with_meta("quantity", "P(-1) - P(0)");
    let c2 = CurveSeries::new(times, d2.clone(), None, "us", "1")?.with_meta("quantity", "P(0) - P(+1)");
    let peak = d2
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, v)| if *v > b.1 { (i, *v) } else { b });
    let results = json!({
        "model": if s.stretched { "stretched" } else { "exponential" },
        "d2_peak": peak.1,
        "d2_peak_time_us": c2.x[peak.0],
        "matrix_exponential_max_deviation": if s.stretched { Value::Null } else { json!(max_dev) },
    });
    Ok(Output {
        results,
        files: vec![
            ("kinetics_d1.csv".into(), ctx.curve("kinetics", &c1)),
            ("kinetics_d2.csv".into(), ctx.curve("kinetics", &c2)),
        ],
        warnings: vec![],
    })
}

fn oracle(ctx: &Ctx) -> Result<Output> {
    let s = &ctx.cfg.oracle;
    let params = ctx.cfg.bath.params()?;
    let gf = params.gamma_f;
    if s.r_nm.is_empty() || s.detuning_mhz.is_empty() {
        return Err(Error::config("[oracle] needs non-empty r_nm and detuning_mhz"));
    }
    let zs = params.probe_group.direction();
    let zf = match s.pairing {
        OraclePairing::Same => zs,
        OraclePairing::Partner => field_aligned_partner(params.probe_group.partner()),
    };
    let fs = make_frame(zs, 0.0)?;
    let ff = make_frame(zf, 0.0)?;
    let r_hat = zs;
    let c = coeffs_ghq(&fs, &ff, &r_hat)?;
    let cases: Vec<(f64, f64)> = s.r_nm.iter().flat_map(|r| s.detuning_mhz.iter().map(move |d| (*r, *d))).collect();
    let rows: Vec<(f64, f64, f64, f64, bool, bool)> = cases
        .par_iter()
        .map(|&(r, d)| {
            let dw = AngularFrequency::from_mhz(d);
            let formula = golden_rule_rate(Length(r), c.g, c.h, dw, gf)?.0;
            if !(formula > 0.0) {
                return Err(Error::config(format!("geometry gives zero coupling at r = {r} nm")));
            }
            let t_max = s.t_max_us.unwrap_or(1.2 / formula + 4.0 / gf.0);
            let setup = OracleSetup::new(r_hat * r, fs, ff, dw, gf, Time(t_max));
            let got = oracle_decay_rate(&setup)?;
            let in_regime = J0 / r.powi(3) <= gf.0 / 10.0;
            Ok((r, d, formula, got.transition_rate.0, in_regime, got.non_exponential))
        })
        .collect::<Result<_>>()?;
    let table = Table {
        columns: ["r", "detuning", "formula_rate", "propagated_rate", "ratio", "in_regime"]
            .map(String::from)
            .to_vec(),
        units: ["nm", "MHz", "1/us", "1/us", "1", "1"].map(String::from).to_vec(),
        rows: rows
            .iter()
            .map(|(r, d, f, p, reg, _)| {
                vec![
                    Some(*r),
                    Some(*d),
                    Some(*f),
                    Some(*p),
                    Some(p / f),
                    Some(if *reg { 1.0 } else { 0.0 }),
                ]
            })
            .collect(),
        metadata: ctx.meta("oracle"),
    };
    let in_regime: Vec<f64> = rows.iter().filter(|r| r.4).map(|r| r.3 / r.2).collect();
    let mut warnings = Vec::new();
    for r in rows.iter().filter(|r| r.5) {
        warnings.push(format!("non-exponential decay at r = {} nm, detuning = {} MHz", r.0, r.1));
    }
    let results = json!({
        "flip_flop_weight": c.flip_flop_weight(),
        "ratios": rows.iter().map(|r| json!({"r_nm": r.0, "detuning_mhz": r.1, "formula": r.2, "propagated": r.3, "ratio": r.3 / r.2, "in_regime": r.4})).collect::<Vec<_>>(),
        "in_regime_all_within_15_percent": !in_regime.is_empty() && in_regime.iter().all(|q| (q - 1.0).abs() <= 0.15),
    });
    Ok(Output {
        results,
        files: vec![("oracle.csv".into(), render_table(&table))],
        warnings,
    })
}

fn charge(ctx: &Ctx) -> Result<Output> {
    let s = &ctx.cfg.charge;
    if !(s.t_max_us > 0.0) || s.points < 2 {
        return Err(Error::config("[charge] needs t_max_us > 0 and points >= 2"));
    }
    let dp = DiffusionParams::new(Length(s.a_nm), Time::from_ns(s.t_hop_ns))?;
    let grid = init_profile(&s.profile())?;
    let times = linspace(0.0, s.t_max_us, s.points);
    let curve = center_recovery(&grid, dp.d(), &times)?;
    let warnings = evolve(&grid, dp.d(), Time(s.t_max_us))?.warnings;
    let half = curve
        .y
        .windows(2)
        .zip(curve.x.windows(2))
        .find(|(y, _)| y[0] > 0.5 && y[1] <= 0.5)
        .map(|(y, x)| x[0] + (x[1] - x[0]) * (y[0] - 0.5) / (y[0] - y[1]));
    let mut files = vec![("charge.csv".to_string(), ctx.curve("charge", &curve))];
    let mut snaps = s.snapshots_us.clone();
    snaps.sort_by(f64::total_cmp);
    let mut g = grid.clone();
    let mut now = 0.0;
    for t in snaps {
        if t < 0.0 {
            return Err(Error::config("snapshot times must be >= 0"));
        }
        g = evolve(&g, dp.d(), Time(t - now))?.grid;
        now = t;
        let text = format!("# config_sha256: {}\n# time_us: {t}\n{}", ctx.hash, g.to_csv_matrix());
        files.push((format!("charge_snapshot_{t}us.csv"), text));
    }
    let results = json!({
        "diffusivity_nm2_per_us": dp.d(),
        "initial_center": grid.center(),
        "initial_integral": grid.integral(),
        "half_recovery_us": half,
    });
    Ok(Output { results, files, warnings })
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn is_readout(text: &str) -> bool {
    text.lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .is_some_and(|h| h.split(',').any(|c| c.trim() == "f_no_pi"))
}

fn load_input(path: &Path, ctx: &Ctx) -> Result<(CurveSeries, String, bool)> {
    let text = std::fs::read_to_string(path)?;
    let hash = sha256_hex(text.as_bytes());
    let wrap = |e: Error| match e {
        Error::Io(_) => e,
        other => Error::config(format!("{}: {other}", path.display())),
    };
    if is_readout(&text) {
        let recs = parse_readout(&text).map_err(wrap)?;
        let c = ingest_differential(&recs, ctx.cfg.fit.normalization, ctx.cfg.fit.late_points)?;
        Ok((c, hash, true))
    } else {
        Ok((parse_curve(&text).map_err(wrap)?, hash, false))
    }
}

fn expect_units(c: &CurveSeries, x: &str, y: &str, model: &str) -> Result<()> {
    if c.x_unit != x || c.y_unit != y {
        return Err(Error::config(format!(
            "model '{model}' expects x in '{x}' and y in '{y}', input has '{}' and '{}'",
            c.x_unit, c.y_unit
        )));
    }
    Ok(())
}

fn fit(ctx: &Ctx, a: &FitArgs) -> Result<Output> {
    let (data, input_hash, raw) = load_input(&a.input, ctx)?;
    let model = ctx.cfg.fit.model;
    ctx.log(format!("fit: {} points, model {model:?}", data.len()));
    let mut files = Vec::new();
    if raw {
        files.push(("fit_input.csv".to_string(), ctx.curve("fit", &data)));
    }
    let mut extra = json!({});
    let model_curve = |y: Vec<f64>| -> Result<CurveSeries> {
        Ok(CurveSeries::new(data.x.clone(), y, None, &data.x_unit, &data.y_unit)?.with_meta("quantity", "fitted model"))
    };
    let fitted = match model {
        FitModel::Stretched => {
            expect_units(&data, "us", "1", "stretched")?;
            let amp = ctx.cfg.fit.amplitude_fixed.map_or(Amplitude::Free, Amplitude::Fixed);
            let f = fit_stretched(&data, amp)?;
            require_converged(&f, "stretched-exponential fit")?;
            let (aa, t1) = (
                f.value("A").or(ctx.cfg.fit.amplitude_fixed).unwrap_or(1.0),
                f.value("T1").expect("T1"),
            );
            files.push((
                "fit.csv".into(),
                ctx.curve("fit", &model_curve(data.x.iter().map(|t| aa * (-(t / t1).sqrt()).exp()).collect())?),
            ));
            f
        }
        FitModel::Lorentzian => {
            expect_units(&data, "MHz", "1/ms", "lorentzian")?;
            let f = fit_lorentzian(&data)?;
            require_converged(&f, "Lorentzian fit")?;
            let v = &f.values;
            files.push((
                "fit.csv".into(),
                ctx.curve(
                    "fit",
                    &model_curve(data.x.iter().map(|x| lorentzian(*x, v[0], v[1], v[2], v[3])).collect())?,
                ),
            ));
            f
        }
        FitModel::RatePair => {
            let p2 = a.input2.as_ref().ok_or_else(|| Error::config("rate-pair model needs --input2"))?;
            let (d2, h2, _) = load_input(p2, ctx)?;
            if data.x_unit != d2.x_unit || data.y_unit != "1" || d2.y_unit != "1" {
                return Err(Error::config(format!(
                    "rate-pair inputs need matching time units and dimensionless y, got ({}, {}) and ({}, {})",
                    data.x_unit, data.y_unit, d2.x_unit, d2.y_unit
                )));
            }
            extra = json!({ "input2_sha256": h2 });
            let f = fit_rate_pair(&data, &d2)?;
            require_converged(&f, "rate-pair fit")?;
            f
        }
        FitModel::Resonance => {
            expect_units(&data, "MHz", "1/ms", "resonance")?;
            let seed = ctx.seed("fit --model resonance")?;
            let r = fit_resonance(
                &data,
                &ctx.cfg.bath.params()?,
                ResonanceFitOptions {
                    samples: ctx.cfg.fit.resonance_samples,
                    seed,
                },
            )?;
            require_converged(&r.fit, "resonance fit")?;
            extra = json!({ "model_noise_floor": r.model_noise_floor });
            r.fit
        }
        FitModel::HopTime => {
            expect_units(&data, "us", "1", "hop-time")?;
            let s = &ctx.cfg.charge;
            let h = fit_hop_time(&data, Length(s.a_nm), &s.profile())?;
            let results = json!({
                "model": model,
                "input_sha256": input_hash,
                "raw_readout": raw,
                "points": data.len(),
                "t_hop_ns": h.t_hop.0 * 1e3,
                "t_hop_std_error_ns": h.std_error.0 * 1e3,
                "residual": h.residual,
                "identifiable": h.identifiable,
                "residual_trace": h.residual_trace,
            });
            let d = s.a_nm * s.a_nm / h.t_hop.0;
            let grid = init_profile(&s.profile())?;
            let mc = center_recovery(&grid, d, &data.x)?;
            files.push(("fit.csv".into(), ctx.curve("fit", &model_curve(mc.y)?)));
            let warnings = if h.identifiable {
                vec![]
            } else {
                vec!["hop time is not identifiable from these data".to_string()]
            };
            return Ok(Output { results, files, warnings });
        }
    };
    let mut results = json!({
        "model": model,
        "input_sha256": input_hash,
        "raw_readout": raw,
        "points": data.len(),
        "fit": fit_json(&fitted),
    });
    if let (Value::Object(m), Value::Object(e)) = (&mut results, extra) {
        m.extend(e);
    }
    let mut warnings = Vec::new();
    if fitted.poor_fit {
        warnings.push("residuals exceed the stated noise; model may be inadequate".into());
    }
    if fitted.singular {
        warnings.push(format!(
            "design is singular (condition number {:e}); some parameters are unidentifiable",
            fitted.condition_number
        ));
    }
    Ok(Output { results, files, warnings })
}
