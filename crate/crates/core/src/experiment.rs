//! Experiment drivers shared by the command line and the test suites:
//! window sizing, anchor sampling, series over `R = λᴺ`, CSV/JSON output,
//! the invariant self-test and the period scan.

use std::fmt::Write;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{emit_config, parse_config_str};
use crate::ergodic::{CylindricalFunction, DeviationModel, ExperimentSeries, SeriesMeta, SeriesRow};
use crate::error::{Error, Result};
use crate::measures::{random_supertile_union, self_similarity_union, PhiTable, PhiVector};
use crate::spectral::{scaling_profile, KernelSpec, ScalingProfile};
use crate::spectrum::{spectral_data, SpectralData};
use crate::stats::{mean, rms, stderr, Fit};
use crate::subst::{build_incidence, validate_geometry, Substitution};
use crate::tiling::{
    ball_decomposition, clipped_cell_volume, expand, make_window, AnchorMode, BoxDomain, Decomposition,
    Hierarchy, Patch, Window,
};

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 20_231_117;

/// `Ψ = (+1, −1)` for two prototiles (constant per unit volume); otherwise
/// `∫Ψ_i ∝ l₂[i]`, which has zero mean and `m_{Φ⁻}(f, r₂) = 1`.
pub fn default_function(sub: &Substitution, sd: &SpectralData) -> CylindricalFunction {
    if sub.num_types() == 2 {
        return CylindricalFunction::constants(sub, "psi", &[1.0, -1.0]).expect("two prototiles");
    }
    let values: Vec<f64> = match sd.mode(1) {
        Some(m) => {
            let raw: Vec<f64> = m.left.iter().zip(sub.prototiles()).map(|(l, p)| l / p.volume).collect();
            let top = raw.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            raw.iter().map(|x| x / top).collect()
        }
        None => vec![0.0; sub.num_types()],
    };
    CylindricalFunction::constants(sub, "psi", &values).expect("sizes match")
}

/// Smallest window around root type 1 whose shortest side is at least `4·reach`.
pub fn window_for(sub: &Arc<Substitution>, reach: f64) -> Result<Window> {
    let e = sub.prototiles()[0].extent;
    for n in 0..=40u32 {
        let s = sub.level_scale(n)?;
        let side = if sub.dim() == 1 { s[0] * e[0] as i64 } else { (s[0] * e[0] as i64).min(s[1] * e[1] as i64) };
        if side as f64 >= 4.0 * reach {
            return make_window(Arc::clone(sub), 0, n.max(1), AnchorMode::Center);
        }
    }
    Err(Error::Overflow(format!("no window reaches {reach}")))
}

fn meta(sub: &Substitution, function: &str, quantity: &str, seed: u64) -> SeriesMeta {
    SeriesMeta { example: sub.name().into(), function: function.into(), quantity: quantity.into(), seed }
}

fn row(n: u32, r: f64, values: &[f64]) -> SeriesRow {
    SeriesRow { n, r, value: mean(values), rms: rms(values), stderr: stderr(values), anchors: values.len() }
}

/// `Φ⁺_v(B(anchor, λᴺ))` over anchors, one row per `N`.
pub fn phi_series(
    sub: &Substitution,
    v: &PhiVector,
    window: &Window,
    levels: &[u32],
    anchors: &[[f64; 2]],
    seed: u64,
) -> Result<ExperimentSeries> {
    let s = build_incidence(sub);
    let table = PhiTable::new(&s, &v.values, window.hierarchy().levels());
    let lambda = sub.expansion();
    let mut rows = Vec::new();
    for &n in levels {
        let r = lambda.powi(n as i32);
        let values: Vec<f64> = anchors
            .par_iter()
            .map(|a| {
                let d = ball_decomposition(&window.with_origin(*a), r)?;
                Ok(table.on_decomposition(&Decomposition { pieces: d.pieces, boundary: d.boundary_cells }))
            })
            .collect::<Result<_>>()?;
        rows.push(row(n, r, &values));
    }
    Ok(ExperimentSeries { meta: meta(sub, &v.label, "phi", seed), rows })
}

/// Ergodic integrals `S(f, ·, λᴺ)` and deviation residuals over anchors.
pub fn deviation_series(
    sub: &Substitution,
    model: &DeviationModel,
    window: &Window,
    levels: &[u32],
    anchors: &[[f64; 2]],
    seed: u64,
) -> Result<(ExperimentSeries, ExperimentSeries)> {
    let lambda = sub.expansion();
    let label = model.function().label.clone();
    let mut s_rows = Vec::new();
    let mut res_rows = Vec::new();
    for &n in levels {
        let r = lambda.powi(n as i32);
        let pairs: Vec<(f64, f64)> = anchors
            .par_iter()
            .map(|a| model.ball(&window.with_origin(*a), r).map(|e| (e.integral, e.residual)))
            .collect::<Result<_>>()?;
        let (sv, rv): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        s_rows.push(row(n, r, &sv));
        res_rows.push(row(n, r, &rv));
    }
    Ok((
        ExperimentSeries { meta: meta(sub, &label, "S", seed), rows: s_rows },
        ExperimentSeries { meta: meta(sub, &label, "residual", seed), rows: res_rows },
    ))
}

/// Spectral series on a window sized for the largest level.
#[allow(clippy::too_many_arguments)]
pub fn spectral_series(
    sub: &Arc<Substitution>,
    sd: &SpectralData,
    f: &CylindricalFunction,
    kernel: &KernelSpec,
    levels: &[u32],
    anchors: usize,
    seed: u64,
    explore: bool,
) -> Result<ScalingProfile> {
    let top = levels.iter().copied().max().unwrap_or(0);
    let reach = kernel.reach(sub.expansion().powi(top as i32), sub);
    let window = window_for(sub, reach)?;
    let pts = window.sample_anchors(anchors, reach, seed)?;
    let mut prof = scaling_profile(f, sub, sd, &window, kernel, levels, &pts, explore)?;
    prof.series.meta.seed = seed;
    Ok(prof)
}

pub const MEASURE_CSV_HEADER: &str = "example,v_label,N,R,value,rms,anchors";
pub const SPECTRAL_CSV_HEADER: &str = "example,function,N,R,G,stderr,anchors,kernel,tau,seed";

/// Rows of one or more `Φ⁺` / ergodic series.
pub fn measure_csv(series: &[&ExperimentSeries]) -> String {
    let mut out = String::from(MEASURE_CSV_HEADER);
    out.push('\n');
    for s in series {
        let label = if s.meta.quantity == "phi" { s.meta.function.clone() } else { format!("{}:{}", s.meta.quantity, s.meta.function) };
        for r in &s.rows {
            let _ = writeln!(out, "{},{},{},{},{},{},{}", s.meta.example, label, r.n, r.r, r.value, r.rms, r.anchors);
        }
    }
    out
}

pub fn spectral_csv(profile: &ScalingProfile) -> String {
    let mut out = String::from(SPECTRAL_CSV_HEADER);
    out.push('\n');
    let m = &profile.series.meta;
    for r in &profile.series.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            m.example,
            m.function,
            r.n,
            r.r,
            r.value,
            r.stderr,
            r.anchors,
            profile.kernel.name(),
            profile.kernel.tau,
            m.seed
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub example: String,
    pub quantity: String,
    pub slope: Option<f64>,
    pub stderr: Option<f64>,
    pub expected: Option<f64>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl FitSummary {
    /// `pass` is `|slope − expected| ≤ tolerance`.
    pub fn new(example: &str, quantity: &str, fit: Result<Fit>, expected: Option<f64>, tolerance: f64) -> Self {
        match fit {
            Ok(f) => FitSummary {
                example: example.into(),
                quantity: quantity.into(),
                slope: Some(f.slope),
                stderr: Some(f.stderr),
                expected,
                pass: expected.is_none_or(|e| (f.slope - e).abs() <= tolerance),
                note: None,
            },
            Err(e) => FitSummary {
                example: example.into(),
                quantity: quantity.into(),
                slope: None,
                stderr: None,
                expected,
                pass: false,
                note: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &str, pass: bool, detail: impl Into<String>) -> Check {
    Check { name: name.into(), pass, detail: detail.into() }
}

/// Naive `∫_{B(o,ρ)} f∘h_x dx` by visiting every tile near the ball.
pub fn naive_ergodic_integral(f: &CylindricalFunction, window: &Window, rho: f64) -> Result<f64> {
    window.check_margin(rho)?;
    let o = window.origin();
    let h = window.hierarchy();
    let dim = window.dim();
    let lo = [(o[0] - rho).floor() as i64 - 2, if dim == 1 { 0 } else { (o[1] - rho).floor() as i64 - 2 }];
    let hi = [(o[0] + rho).ceil() as i64 + 2, if dim == 1 { 1 } else { (o[1] + rho).ceil() as i64 + 2 }];
    let mut total = 0.0;
    h.for_each_tile_in(lo, hi, |t| {
        for (b, v) in f.pieces(t.tile, t.anchor) {
            total += v * clipped_cell_volume(&b, o, rho, dim);
        }
    });
    Ok(total)
}

/// Every exact invariant on one substitution. Randomised parts use `seed`.
pub fn selftest(sub: &Arc<Substitution>, seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let geo = validate_geometry(sub);
    out.push(check("geometry", geo.is_ok(), geo.map(|r| r.to_string()).unwrap_or_else(|e| e.to_string())));
    let s = build_incidence(sub);
    let vols = sub.volumes();
    let ld = sub.expansion().powi(sub.dim() as i32);
    let conserved = (0..s.size()).all(|j| {
        let lhs: f64 = (0..s.size()).map(|i| s.get(i, j) as f64 * vols[i]).sum();
        (lhs - ld * vols[j]).abs() <= 1e-9 * ld * vols[j]
    });
    out.push(check("column-volume conservation", conserved, format!("L^d = {ld}")));
    let sd = spectral_data(sub)?;
    out.push(check(
        "perron root",
        (sd.theta1 - ld).abs() <= 1e-9 * ld,
        format!("theta1 = {}, L^d = {ld}", sd.theta1),
    ));
    out.push(check(
        "biorthogonality",
        sd.biorthogonality_error <= 1e-12,
        format!("max error {:e}", sd.biorthogonality_error),
    ));
    if sub.lattice_expansion().is_some() {
        let text = emit_config(sub)?;
        let same = parse_config_str(&text).and_then(|b| emit_config(&b)).map(|t| t == text).unwrap_or(false);
        out.push(check("config round trip", same, ""));
    }

    // Hierarchy against brute-force expansion.
    let mut mismatches = 0usize;
    for root in 0..sub.num_types() {
        let n = if sub.num_types() > 4 { 2 } else { 3 };
        let h = Hierarchy::new(Arc::clone(sub), root, n)?;
        let patch = expand(sub, &Patch::single(root), n)?;
        for t in &patch.tiles {
            let info = h.type_at(t.anchor)?;
            if info.tile != t.tile || info.tile_anchor != t.anchor {
                mismatches += 1;
            }
        }
    }
    out.push(check("hierarchy vs expansion", mismatches == 0, format!("{mismatches} mismatches")));

    // Exact self-similarity on random supertile unions.
    let h = Hierarchy::new(Arc::clone(sub), 0, 3)?;
    let next = Hierarchy::new(Arc::clone(sub), 0, 4)?;
    let mut worst: i128 = 0;
    let mut inexact = 0usize;
    let mut tested = 0usize;
    for m in &sd.modes {
        let v = match (&m.left_integral, m.theta_exact) {
            (Some(l), Some(t)) => PhiVector::integral(format!("l{}", m.index + 1), l).with_theta(t as f64),
            _ => PhiVector::from_mode(m),
        };
        for _ in 0..100 {
            let pieces = random_supertile_union(&h, &mut rng, 30);
            let rep = self_similarity_union(&s, &v, &h, &next, &pieces)?;
            tested += 1;
            match rep.exact_residual {
                Some(r) => worst = worst.max(r.abs()),
                None if rep.relative() > 1e-9 => inexact += 1,
                None => {}
            }
        }
    }
    out.push(check(
        "self-similarity on supertile unions",
        worst == 0 && inexact == 0,
        format!("{tested} unions, max exact residual {worst}, {inexact} float failures"),
    ));

    let f = default_function(sub, &sd);
    let levels = if sub.dim() == 1 { 8 } else { 6 };
    let window = window_for(sub, 70.0)?;
    let pts = window.sample_anchors(20, 66.0, seed)?;
    let model = DeviationModel::new(&f, sub, &sd, window.hierarchy().levels().max(levels))?;
    let mut worst_oracle = 0.0f64;
    let mut worst_volume = 0.0f64;
    for (i, a) in pts.iter().enumerate() {
        let w = window.with_origin(*a);
        let rho = 0.5 + 63.5 * (i as f64 + 0.5) / pts.len() as f64;
        let fast = model.ball(&w, rho)?.integral;
        let slow = naive_ergodic_integral(&f, &w, rho)?;
        worst_oracle = worst_oracle.max((fast - slow).abs());
        let d = ball_decomposition(&w, rho)?;
        let vol = d.volume(w.hierarchy());
        let leb = crate::tiling::ball_volume(rho, sub.dim());
        worst_volume = worst_volume.max((vol - leb).abs() / rho.powi(sub.dim() as i32 - 1));
    }
    out.push(check("ergodic integral vs cell enumeration", worst_oracle <= 1e-8, format!("max |Δ| = {worst_oracle:e}")));
    out.push(check("ball volume conservation", worst_volume <= 1e-9, format!("max |Δ|/R^(d-1) = {worst_volume:e}")));

    let h = Hierarchy::new(Arc::clone(sub), 0, levels)?;
    let mut worst_res = 0.0f64;
    for k in 0..=levels.min(6) {
        let (st, _) = h.supertile_at([0, 0], k)?;
        let e = model.domain(&h, &BoxDomain { bounds: h.cell_box(&st), dim: sub.dim() });
        worst_res = worst_res.max(e.residual.abs());
    }
    // The expansion is exact only when all of E⁺⁺'s complement is absent.
    let complete = sd.expanding_dims == sub.num_types();
    out.push(check(
        "deviation residual on supertiles",
        !complete || worst_res <= 1e-9,
        if complete { format!("max |residual| = {worst_res:e}") } else { format!("not all directions expanding; max |residual| = {worst_res:e} (informational)") },
    ));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodScan {
    pub bound: i64,
    pub region: [usize; 2],
    /// Smallest translation (by sup-norm) under which the scanned region is invariant.
    pub period: Option<[i64; 2]>,
}

/// Heuristic search for a translation period up to `bound` cells: compares
/// the cell map of a central region with its translates. A hit is evidence
/// of periodicity, a miss is evidence only.
pub fn period_scan(sub: &Arc<Substitution>, bound: i64) -> Result<PeriodScan> {
    if bound < 1 {
        return Err(Error::Precondition("period bound must be positive".into()));
    }
    let side = (4 * bound).max(64);
    let window = window_for(sub, (side + bound) as f64)?;
    let h = window.hierarchy();
    let c = window.origin_cell();
    let dim = sub.dim();
    let lo = [c[0] - side / 2 - bound, if dim == 1 { 0 } else { c[1] - side / 2 - bound }];
    let hi = [c[0] + side / 2 + bound, if dim == 1 { 1 } else { c[1] + side / 2 + bound }];
    let region = h.materialize(lo, hi)?;
    let (w, ht) = (region.width as i64, region.height as i64);
    let inner = |x: i64, y: i64| region.at(x as usize, y as usize);
    let mut shifts: Vec<[i64; 2]> = Vec::new();
    let yb = if dim == 1 { 0 } else { bound };
    for py in -yb..=yb {
        for px in -bound..=bound {
            // p and −p are equivalent; keep the upper half-plane.
            if py > 0 || (py == 0 && px > 0) {
                shifts.push([px, py]);
            }
        }
    }
    shifts.sort_by_key(|p| (p[0].abs().max(p[1].abs()), p[1], p[0]));
    let (y0, y1) = if dim == 1 { (0, 1) } else { (bound, ht - bound) };
    let found = shifts.into_par_iter().find_first(|p| {
        (y0..y1).all(|y| (bound..w - bound).all(|x| inner(x, y) == inner(x + p[0], y + p[1])))
    });
    Ok(PeriodScan { bound, region: [region.width, region.height], period: found })
}

/// Window statistics for `generate`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowStats {
    pub example: String,
    pub root: String,
    pub levels: u32,
    pub size: Vec<i64>,
    pub origin: Vec<f64>,
    pub margin: f64,
    pub tile_counts: Vec<u64>,
    pub expected_counts: Vec<u64>,
}

pub fn window_stats(window: &Window) -> WindowStats {
    let h = window.hierarchy();
    let sub = window.substitution();
    let m = sub.num_types();
    let s = build_incidence(sub);
    // Column `root` of Sⁿ, the exact tile count.
    let mut expected: Vec<i128> = (0..m).map(|i| (i == h.root_type()) as i128).collect();
    for _ in 0..h.levels() {
        expected = s.mul_vec_i128(&expected).unwrap_or_default();
    }
    let counts: Vec<u64> = if h.size().iter().product::<i64>() <= 1 << 24 {
        let mut c = vec![0u64; m];
        h.for_each_tile_in([0, 0], h.size(), |t| c[t.tile] += 1);
        c
    } else {
        expected.iter().map(|&x| x as u64).collect()
    };
    let dim = sub.dim();
    WindowStats {
        example: sub.name().into(),
        root: sub.prototiles()[h.root_type()].label.clone(),
        levels: h.levels(),
        size: h.size()[..dim].to_vec(),
        origin: window.origin()[..dim].to_vec(),
        margin: window.margin(),
        tile_counts: counts,
        expected_counts: expected.iter().map(|&x| x as u64).collect(),
    }
}

/// Region shown by `generate --svg`: at most `max_side` cells around the origin.
pub fn svg_region(window: &Window, max_side: i64) -> ([i64; 2], [i64; 2]) {
    let size = window.hierarchy().size();
    let c = window.origin_cell();
    let mut lo = [0; 2];
    let mut hi = [0; 2];
    for a in 0..2 {
        let side = size[a].min(max_side);
        lo[a] = (c[a] - side / 2).clamp(0, size[a] - side);
        hi[a] = lo[a] + side;
    }
    (lo, hi)
}
