//! `selfsim`: experiments on self-similar substitution tilings.
//!
//! Every subcommand takes `--builtin NAME` or `--config PATH`. Results are
//! printed as JSON on stdout and, with `--out DIR`, written as files. Errors
//! are printed as `{"error": kind, "message": ...}` with a nonzero exit code.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use selfsim_core::config::{emit_config, parse_config};
use selfsim_core::ergodic::{fit_exponent, CylindricalFunction, DeviationModel};
use selfsim_core::experiment::{
    default_function, deviation_series, measure_csv, period_scan, phi_series, selftest, spectral_csv, svg_region,
    window_for, window_stats, FitSummary, DEFAULT_SEED,
};
use selfsim_core::measures::PhiVector;
use selfsim_core::spectral::{eta_profile, scaling_profile, KernelSpec};
use selfsim_core::spectrum::{spectral_data, tile_frequencies, SpectralData};
use selfsim_core::subst::Substitution;
use selfsim_core::tiling::{make_window, patch_svg, AnchorMode};
use selfsim_core::{builtins, Error, Result};

/// Exit code for a run that was stopped by a violated hypothesis.
const EXIT_HYPOTHESIS: u8 = 3;

#[derive(Parser)]
#[command(name = "selfsim", version, about = "Deviation and spectral scaling experiments on self-similar tilings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Shipped example: table, ab42 or sym95.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    builtin: Option<String>,
    /// JSON substitution file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for anchor sampling.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Directory for output files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated constant profile per prototile, e.g. `1,-1`.
    #[arg(long, allow_hyphen_values = true)]
    psi: Option<String>,
}

#[derive(Args, Clone)]
struct Radii {
    /// Smallest radius exponent N (R = λᴺ).
    #[arg(long)]
    radii_min: Option<u32>,
    /// Largest radius exponent N.
    #[arg(long)]
    radii_max: Option<u32>,
    #[arg(long, default_value_t = 64)]
    anchors: usize,
    /// Smallest rows discarded before fitting.
    #[arg(long)]
    drop_head: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Incidence matrix, eigenvalues, α, hypothesis verdict and frequencies.
    Info(Common),
    /// Builds a window and reports its statistics, optionally as SVG.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 4)]
        n_levels: u32,
        /// Root prototile label or id (default: the first).
        #[arg(long)]
        root: Option<String>,
        /// Write patch.svg (needs --out).
        #[arg(long)]
        svg: bool,
        /// Pixels per lattice cell in the SVG.
        #[arg(long, default_value_t = 8.0)]
        cell_px: f64,
    },
    /// Growth of Φ⁺ on balls, with a log-log fit.
    Phi {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        radii: Radii,
        /// Eigendirection index, 1 = Perron.
        #[arg(long, default_value_t = 2)]
        mode: usize,
    },
    /// Ergodic integrals over balls and the deviation residual.
    Deviate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        radii: Radii,
    },
    /// Smoothed spectral mass near zero and the η-profile.
    Spectral {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        radii: Radii,
        /// Truncation radius in units of the kernel scale.
        #[arg(long, default_value_t = 6.0)]
        tau: f64,
        /// Level at which the η-profile is evaluated (default: radii-max − 1).
        #[arg(long)]
        eta_n: Option<u32>,
        /// Comma-separated a-grid for the η-profile.
        #[arg(long, default_value = "0.25,0.5,1,2,4")]
        eta_grid: String,
        /// Run even when the hypothesis fails.
        #[arg(long)]
        explore: bool,
    },
    /// Every exact invariant.
    Selftest(Common),
    /// Prints the canonical JSON configuration of a substitution.
    EmitConfig(Common),
    /// Searches for a translation period up to a bound.
    PeriodScan {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 16)]
        bound: i64,
    },
}

struct Failure {
    error: Error,
    code: u8,
    partial: Option<Value>,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        let code = if matches!(error, Error::HypothesisViolated(_)) { EXIT_HYPOTHESIS } else { 2 };
        Failure { error, code, partial: None }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(error: serde_json::Error) -> Self {
        Error::from(error).into()
    }
}

type CmdResult = std::result::Result<(Value, bool), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok((value, ok)) => {
            if !value.is_null() {
                emit(&value);
            }
            if ok { ExitCode::SUCCESS } else { ExitCode::from(1) }
        }
        Err(f) => {
            let mut body = json!({ "error": f.error.kind(), "message": f.error.to_string() });
            if let Some(p) = f.partial {
                body["partial"] = p;
            }
            emit(&body);
            ExitCode::from(f.code)
        }
    }
}

/// Writes to stdout; a closed pipe is not an error worth a panic.
fn emit(value: &Value) {
    let text = serde_json::to_string_pretty(value).expect("json values serialise");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn dispatch(cmd: Command) -> CmdResult {
    match cmd {
        Command::Info(c) => run(&c, |ctx| info(ctx).map(|v| (v, true)).map_err(Failure::from)),
        Command::Generate { common, n_levels, root, svg, cell_px } => {
            run(&common, |ctx| generate(ctx, n_levels, root.as_deref(), svg, cell_px).map_err(Failure::from))
        }
        Command::Phi { common, radii, mode } => run(&common, |ctx| phi(ctx, &radii, mode).map_err(Failure::from)),
        Command::Deviate { common, radii } => run(&common, |ctx| deviate(ctx, &radii).map_err(Failure::from)),
        Command::Spectral { common, radii, tau, eta_n, eta_grid, explore } => {
            run(&common, |ctx| spectral(ctx, &radii, tau, eta_n, &eta_grid, explore))
        }
        Command::Selftest(c) => run(&c, |ctx| {
            let checks = selftest(&ctx.sub, ctx.seed)?;
            let ok = checks.iter().all(|c| c.pass);
            Ok((json!({ "example": ctx.sub.name(), "pass": ok, "checks": checks }), ok))
        }),
        Command::EmitConfig(c) => run(&c, |ctx| {
            let text = emit_config(&ctx.sub)?;
            if ctx.write(&format!("{}.json", ctx.sub.name()), &text)?.is_none() {
                print!("{text}");
            }
            Ok((Value::Null, true))
        }),
        Command::PeriodScan { common, bound } => run(&common, |ctx| {
            let scan = period_scan(&ctx.sub, bound)?;
            let verdict = match scan.period {
                Some(p) => format!("period {:?}", &p[..ctx.sub.dim()]),
                None => format!("none <= {bound}"),
            };
            Ok((json!({ "example": ctx.sub.name(), "scan": scan, "result": verdict }), true))
        }),
    }
}

struct Ctx {
    sub: Arc<Substitution>,
    seed: u64,
    out: Option<PathBuf>,
    psi: Option<String>,
}

impl Ctx {
    fn write(&self, name: &str, contents: &str) -> Result<Option<String>> {
        let Some(dir) = &self.out else { return Ok(None) };
        std::fs::create_dir_all(dir)?;
        let path = dir.join(name);
        std::fs::write(&path, contents)?;
        Ok(Some(path.display().to_string()))
    }

    fn function(&self, sd: &SpectralData) -> Result<CylindricalFunction> {
        match &self.psi {
            None => Ok(default_function(&self.sub, sd)),
            Some(text) => {
                let values = text
                    .split(',')
                    .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Parse(format!("--psi: {e}"))))
                    .collect::<Result<Vec<_>>>()?;
                CylindricalFunction::constants(&self.sub, "psi", &values)
            }
        }
    }
}

fn run(common: &Common, body: impl FnOnce(&Ctx) -> CmdResult) -> CmdResult {
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::from(Error::Precondition(e.to_string())))?;
    }
    let sub = load(common.builtin.as_deref(), common.config.as_deref())?;
    body(&Ctx { sub: Arc::new(sub), seed: common.seed, out: common.out.clone(), psi: common.psi.clone() })
}

fn load(builtin: Option<&str>, config: Option<&Path>) -> Result<Substitution> {
    match (builtin, config) {
        (Some(name), None) => builtins::by_name(name)
            .ok_or_else(|| Error::Parse(format!("unknown builtin '{name}', expected one of {:?}", builtins::NAMES))),
        (None, Some(path)) => parse_config(path),
        _ => Err(Error::Parse("give exactly one of --builtin and --config".into())),
    }
}

fn info_value(sub: &Substitution, sd: &SpectralData) -> Value {
    json!({
        "example": sub.name(),
        "dimension": sub.dim(),
        "expansion": sub.expansion(),
        "incidence": sd.incidence.rows(),
        "theta": sd.eigenvalues.iter().map(|e| e.0).collect::<Vec<_>>(),
        "eigenvalues": sd.eigenvalues,
        "alpha": sd.alpha,
        "hypothesis_ok": sd.hypothesis_ok,
        "threshold": sd.threshold,
        "expanding_dims": sd.expanding_dims,
        "jordan_size": sd.jordan_size,
        "frequencies": tile_frequencies(sd, sub),
        "modes": sd.modes,
        "biorthogonality_error": sd.biorthogonality_error,
        "asserted_nonperiodic": sub.asserted_nonperiodic(),
        "provenance": sub.provenance(),
    })
}

fn info(ctx: &Ctx) -> Result<Value> {
    let sd = spectral_data(&ctx.sub)?;
    let v = info_value(&ctx.sub, &sd);
    ctx.write("info.json", &(serde_json::to_string_pretty(&v)? + "\n"))?;
    Ok(v)
}

fn generate(ctx: &Ctx, levels: u32, root: Option<&str>, svg: bool, cell_px: f64) -> std::result::Result<(Value, bool), Error> {
    let sub = &ctx.sub;
    let root = match root {
        None => 0,
        Some(r) => sub
            .prototiles()
            .iter()
            .position(|p| p.label == r || p.id.to_string() == r)
            .ok_or_else(|| Error::Parse(format!("unknown prototile '{r}'")))?,
    };
    let window = make_window(Arc::clone(sub), root, levels, AnchorMode::Center)?;
    let stats = window_stats(&window);
    let mut v = json!({ "window": stats });
    if svg {
        if ctx.out.is_none() {
            return Err(Error::Precondition("--svg needs --out".into()));
        }
        let (lo, hi) = svg_region(&window, 256);
        let path = ctx.write("patch.svg", &patch_svg(window.hierarchy(), lo, hi, cell_px))?;
        v["svg"] = json!({ "path": path, "lo": lo, "hi": hi });
    }
    Ok((v, true))
}

fn level_range(sub: &Substitution, radii: &Radii, default: (u32, u32)) -> Result<Vec<u32>> {
    let lo = radii.radii_min.unwrap_or(default.0);
    let hi = radii.radii_max.unwrap_or(default.1);
    if hi < lo {
        return Err(Error::Precondition(format!("radii-max {hi} below radii-min {lo}")));
    }
    if sub.expansion().powi(hi as i32) > 1e7 {
        return Err(Error::Precondition(format!("λ^{hi} is beyond the supported window sizes")));
    }
    Ok((lo..=hi).collect())
}

fn default_levels(sub: &Substitution) -> (u32, u32) {
    // Radii up to about 500 cells in d = 2 and 4⁸ in d = 1.
    let cap: f64 = if sub.dim() == 1 { 70_000.0 } else { 800.0 };
    let top = cap.ln() / sub.expansion().ln();
    (0, top.floor().max(4.0) as u32)
}

fn write_fits(ctx: &Ctx, fits: &[FitSummary]) -> Result<()> {
    ctx.write("fit.json", &(serde_json::to_string_pretty(fits)? + "\n"))?;
    Ok(())
}

fn phi(ctx: &Ctx, radii: &Radii, mode: usize) -> std::result::Result<(Value, bool), Error> {
    let sub = &ctx.sub;
    let sd = spectral_data(sub)?;
    let levels = level_range(sub, radii, default_levels(sub))?;
    let m = sd
        .mode(mode.saturating_sub(1))
        .ok_or_else(|| Error::Precondition(format!("no real simple eigendirection {mode}")))?;
    let v = PhiVector::from_mode(m);
    let r_max = sub.expansion().powi(*levels.last().unwrap() as i32);
    let window = window_for(sub, r_max)?;
    let anchors = window.sample_anchors(radii.anchors, r_max + 1.0, ctx.seed)?;
    let series = phi_series(sub, &v, &window, &levels, &anchors, ctx.seed)?;
    // Growth exponent d·ln|θ|/ln θ₁ of the chosen direction.
    let expected = (m.theta.abs() > 0.0).then(|| sub.dim() as f64 * m.theta.abs().ln() / sd.theta1.ln());
    let fit = FitSummary::new(sub.name(), &format!("phi_{}", v.label), fit_exponent(&series, radii.drop_head.unwrap_or(2)), expected, 0.12);
    ctx.write("series.csv", &measure_csv(&[&series]))?;
    write_fits(ctx, std::slice::from_ref(&fit))?;
    let ok = fit.pass;
    Ok((json!({ "series": series, "fit": fit }), ok))
}

fn deviate(ctx: &Ctx, radii: &Radii) -> std::result::Result<(Value, bool), Error> {
    let sub = &ctx.sub;
    let sd = spectral_data(sub)?;
    let f = ctx.function(&sd)?;
    let levels = level_range(sub, radii, default_levels(sub))?;
    let r_max = sub.expansion().powi(*levels.last().unwrap() as i32);
    let window = window_for(sub, r_max)?;
    let anchors = window.sample_anchors(radii.anchors, r_max + 1.0, ctx.seed)?;
    let model = DeviationModel::new(&f, sub, &sd, window.hierarchy().levels())?;
    let (s, res) = deviation_series(sub, &model, &window, &levels, &anchors, ctx.seed)?;
    let drop = radii.drop_head.unwrap_or(2);
    let d = sub.dim() as f64;
    let s_fit = if sd.hypothesis_ok && model.mean().abs() < 1e-12 {
        FitSummary::new(sub.name(), "S", fit_exponent(&s, drop), sd.alpha, 0.12)
    } else {
        // Without a rapidly expanding second direction only the boundary bound applies.
        let mut fs = FitSummary::new(sub.name(), "S", fit_exponent(&s, drop), Some(d - 1.0), f64::INFINITY);
        fs.pass = fs.slope.is_some_and(|x| x <= d - 1.0 + 0.15);
        fs.note = Some(format!("hypothesis not satisfied; pass means slope <= {}", d - 1.0 + 0.15));
        fs
    };
    let res_fit = match fit_exponent(&res, drop) {
        Err(Error::InsufficientData(_)) if res.rows.iter().all(|r| r.rms < 1e-12) => FitSummary {
            example: sub.name().into(),
            quantity: "residual".into(),
            slope: None,
            stderr: None,
            expected: Some(d - 1.0),
            pass: true,
            note: Some("residual vanishes identically at every radius: the expansion is exact".into()),
        },
        fit => {
            let mut fs = FitSummary::new(sub.name(), "residual", fit, Some(d - 1.0), f64::INFINITY);
            fs.pass = fs.slope.is_some_and(|x| x <= d - 1.0 + 0.15);
            fs
        }
    };
    ctx.write("series.csv", &measure_csv(&[&s, &res]))?;
    let fits = vec![s_fit, res_fit];
    write_fits(ctx, &fits)?;
    let ok = fits.iter().all(|f| f.pass);
    Ok((json!({ "series": [s, res], "fits": fits }), ok))
}

fn spectral(ctx: &Ctx, radii: &Radii, tau: f64, eta_n: Option<u32>, eta_grid: &str, explore: bool) -> CmdResult {
    let sub = &ctx.sub;
    let sd = spectral_data(sub)?;
    let f = ctx.function(&sd)?;
    let default = if sub.dim() == 1 { (1, 6) } else { (1, 4) };
    let levels = level_range(sub, radii, default)?;
    let kernel = KernelSpec::with_tau(tau);
    let a_grid = eta_grid
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Parse(format!("--eta-grid: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let top = *levels.last().unwrap();
    let eta_level = eta_n.unwrap_or(top.saturating_sub(1).max(levels[0]));
    let a_min = a_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let lambda = sub.expansion();
    let reach = kernel.reach(lambda.powi(top as i32).max(lambda.powi(eta_level as i32) / a_min), sub);
    let window = window_for(sub, reach)?;
    let anchors = window.sample_anchors(radii.anchors, reach, ctx.seed)?;
    let prof = match scaling_profile(&f, sub, &sd, &window, &kernel, &levels, &anchors, explore) {
        Ok(p) => p,
        Err(e @ Error::HypothesisViolated(_)) => {
            let partial = info_value(sub, &sd);
            ctx.write("info.json", &(serde_json::to_string_pretty(&partial)? + "\n"))?;
            return Err(Failure { error: e, code: EXIT_HYPOTHESIS, partial: Some(partial) });
        }
        Err(e) => return Err(e.into()),
    };
    let mut prof = prof;
    prof.series.meta.seed = ctx.seed;
    let fit = FitSummary::new(
        sub.name(),
        "G",
        prof.fit.ok_or_else(|| Error::InsufficientData("fewer than 4 usable rows".into())),
        prof.expected,
        if sub.dim() == 1 { 0.15 } else { 0.25 },
    );
    ctx.write("series.csv", &spectral_csv(&prof))?;
    write_fits(ctx, std::slice::from_ref(&fit))?;
    let eta = if prof.hypothesis_violated {
        Value::Null
    } else {
        let rows = eta_profile(&f, sub, &sd, &window, &kernel, &a_grid, eta_level, &anchors)?;
        let mut csv = String::from("example,function,a,N,value,stderr,anchors\n");
        for r in &rows {
            csv.push_str(&format!("{},{},{},{},{},{},{}\n", sub.name(), f.label, r.a, r.n, r.value, r.stderr, anchors.len()));
        }
        ctx.write("eta.csv", &csv)?;
        serde_json::to_value(&rows)?
    };
    let note = "eta values are finite-N stabilisation witnesses; the limit measure itself is not computed";
    let mut v = json!({ "profile": prof, "fit": fit, "eta": eta, "note": note });
    if prof.hypothesis_violated {
        v["warning"] = json!("HypothesisViolated: exploratory run, the scaling law does not apply");
    }
    let ok = fit.pass || prof.hypothesis_violated;
    Ok((v, ok))
}
