//! Gaussian-smoothed spectral masses near zero, η-profiles and
//! autocorrelations, all estimated by averaging over anchors in one window.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::ergodic::{integral_mu, CylindricalFunction, ExperimentSeries, SeriesMeta, SeriesRow};
use crate::error::{Error, Result};
use crate::measures::m_phi_minus;
use crate::spectrum::{tile_frequencies, SpectralData};
use crate::stats::{fit_log_log, mean, pairwise_sum, stderr, Fit};
use crate::subst::Substitution;
use crate::tiling::{CellBox, Window};

/// Radial kernel `e^{−π|x|²}`, dilated by `dilation` and truncated at `tau`
/// times the effective scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelSpec {
    pub tau: f64,
    pub dilation: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec { tau: 6.0, dilation: 1.0 }
    }
}

impl KernelSpec {
    pub fn with_tau(tau: f64) -> Self {
        KernelSpec { tau, ..Default::default() }
    }

    pub fn dilated(self, c: f64) -> Self {
        KernelSpec { dilation: self.dilation * c, ..self }
    }

    pub fn name(&self) -> &'static str {
        "gaussian"
    }

    /// Distance from the anchor that a query at scale `r` needs inside the window.
    pub fn reach(&self, r: f64, sub: &Substitution) -> f64 {
        let diam = sub
            .prototiles()
            .iter()
            .map(|p| ((p.extent[0] * p.extent[0] + p.extent[1] * p.extent[1]) as f64).sqrt())
            .fold(0.0, f64::max);
        self.tau * self.dilation * r + diam
    }
}

/// `∫_a^b e^{−π(t−c)²/s²} dt`, accurate in both tails.
pub fn gaussian_interval(a: f64, b: f64, c: f64, s: f64) -> f64 {
    let k = PI.sqrt() / s;
    let (u, v) = (k * (a - c), k * (b - c));
    let half = 0.5 * s;
    if u >= 0.0 {
        half * (libm::erfc(u) - libm::erfc(v))
    } else if v <= 0.0 {
        half * (libm::erfc(-v) - libm::erfc(-u))
    } else {
        half * (libm::erf(v) - libm::erf(u))
    }
}

/// `V = Σ_cells Ψ · ∫_cell e^{−π|x−anchor|²/s²} dx` with `s = dilation·R`.
pub fn smoothed_ball_amplitude(f: &CylindricalFunction, window: &Window, r: f64, kernel: &KernelSpec) -> Result<f64> {
    let sub = window.substitution();
    window.check_margin(kernel.reach(r, sub))?;
    let s = kernel.dilation * r;
    let o = window.origin();
    let reach = kernel.tau * s;
    let dim = window.dim();
    let lo = [(o[0] - reach).floor() as i64, if dim == 1 { 0 } else { (o[1] - reach).floor() as i64 }];
    let hi = [(o[0] + reach).ceil() as i64, if dim == 1 { 1 } else { (o[1] + reach).ceil() as i64 }];
    let hier = window.hierarchy();
    let size = hier.size();
    // Tiles meeting the truncation box may stick out of it by less than a
    // prototile; the axis tables cover that too.
    let pad = sub.prototiles().iter().map(|p| p.extent[0].max(p.extent[1]) as i64).max().unwrap_or(1);
    let xlo = (lo[0] - pad).max(0);
    let xhi = (hi[0] + pad).min(size[0]);
    let ylo = (lo[1] - pad).max(0);
    let yhi = (hi[1] + pad).min(size[1]);
    let gx: Vec<f64> = (xlo..xhi).map(|x| gaussian_interval(x as f64, x as f64 + 1.0, o[0], s)).collect();
    let gy: Vec<f64> = if dim == 1 {
        vec![1.0]
    } else {
        (ylo..yhi).map(|y| gaussian_interval(y as f64, y as f64 + 1.0, o[1], s)).collect()
    };
    let axis = |table: &[f64], base: i64, from: i64, len: u64| -> f64 {
        table[(from - base) as usize..(from - base) as usize + len as usize].iter().sum()
    };
    let constant = f.is_piecewise_constant_per_tile();
    let mut terms = Vec::new();
    hier.for_each_tile_in(lo, hi, |t| {
        let e = sub.prototiles()[t.tile].extent;
        if constant {
            let c = f.integrals()[t.tile] / sub.prototiles()[t.tile].volume;
            if c != 0.0 {
                let wy = if dim == 1 { 1.0 } else { axis(&gy, ylo, t.anchor[1], e[1]) };
                terms.push(c * axis(&gx, xlo, t.anchor[0], e[0]) * wy);
            }
        } else {
            for (b, v) in f.pieces(t.tile, t.anchor) {
                if v != 0.0 {
                    terms.push(v * box_weight(&b, o, s, dim));
                }
            }
        }
    });
    Ok(pairwise_sum(&terms))
}

fn box_weight(b: &CellBox, o: [f64; 2], s: f64, dim: usize) -> f64 {
    let wx = gaussian_interval(b.lo[0], b.hi[0], o[0], s);
    if dim == 1 { wx } else { wx * gaussian_interval(b.lo[1], b.hi[1], o[1], s) }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralEstimate {
    /// `G(R) = s^{−2d} mean |V|²`.
    pub g: f64,
    pub stderr: f64,
    pub anchors: usize,
    #[serde(skip)]
    pub samples: Vec<f64>,
}

/// Per-anchor values `s^{−2d}|V|²`, in anchor order.
pub fn spectral_samples(
    f: &CylindricalFunction,
    window: &Window,
    r: f64,
    kernel: &KernelSpec,
    anchors: &[[f64; 2]],
) -> Result<Vec<f64>> {
    let s = kernel.dilation * r;
    let norm = s.powi(2 * window.dim() as i32);
    anchors
        .par_iter()
        .map(|a| smoothed_ball_amplitude(f, &window.with_origin(*a), r, kernel).map(|v| v * v / norm))
        .collect()
}

pub fn spectral_form(
    f: &CylindricalFunction,
    window: &Window,
    r: f64,
    kernel: &KernelSpec,
    anchors: &[[f64; 2]],
) -> Result<SpectralEstimate> {
    if anchors.len() < 16 {
        return Err(Error::InsufficientData(format!("{} anchors, need at least 16", anchors.len())));
    }
    let samples = spectral_samples(f, window, r, kernel, anchors)?;
    Ok(SpectralEstimate { g: mean(&samples), stderr: stderr(&samples), anchors: anchors.len(), samples })
}

/// Checks the Theorem-1.1 preconditions for `f`.
pub fn check_scaling_preconditions(f: &CylindricalFunction, sub: &Substitution, sd: &SpectralData) -> Result<()> {
    if !sd.hypothesis_ok {
        return Err(Error::HypothesisViolated(format!(
            "θ₂ = {:?} does not exceed θ₁^((d−1)/d) = {}",
            sd.theta2, sd.threshold
        )));
    }
    let mu = integral_mu(f, &tile_frequencies(sd, sub));
    if mu.abs() > 1e-12 {
        return Err(Error::Precondition(format!("f has nonzero mean {mu}")));
    }
    let r2 = &sd.mode(1).expect("hypothesis implies a second mode").right;
    if m_phi_minus(f, r2).abs() < 1e-12 {
        return Err(Error::Precondition("m_Φ⁻(f, r₂) vanishes".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingProfile {
    pub series: ExperimentSeries,
    pub fit: Option<Fit>,
    /// `2α − 2d`, when α is defined.
    pub expected: Option<f64>,
    /// `G(λᴺ) / λ^{N(2α−2d)}` per row.
    pub ratios: Vec<f64>,
    pub kernel: KernelSpec,
    /// Set when the run ignored a violated hypothesis.
    pub hypothesis_violated: bool,
}

/// `G(λᴺ)` for each `N`. The fit uses all rows.
#[allow(clippy::too_many_arguments)]
pub fn scaling_profile(
    f: &CylindricalFunction,
    sub: &Substitution,
    sd: &SpectralData,
    window: &Window,
    kernel: &KernelSpec,
    levels: &[u32],
    anchors: &[[f64; 2]],
    explore: bool,
) -> Result<ScalingProfile> {
    let violated = match check_scaling_preconditions(f, sub, sd) {
        Ok(()) => false,
        Err(e @ Error::HypothesisViolated(_)) if !explore => return Err(e),
        Err(Error::HypothesisViolated(_)) => true,
        Err(e) => return Err(e),
    };
    let lambda = sub.expansion();
    let d = sub.dim() as f64;
    let expected = sd.alpha.map(|a| 2.0 * a - 2.0 * d);
    let mut rows = Vec::new();
    let mut ratios = Vec::new();
    for &n in levels {
        let r = lambda.powi(n as i32);
        let est = spectral_form(f, window, r, kernel, anchors)?;
        if let Some(e) = expected {
            ratios.push(est.g / r.powf(e));
        }
        rows.push(SeriesRow { n, r, value: est.g, rms: est.g, stderr: est.stderr, anchors: est.anchors });
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.r, r.value)).collect();
    let series = ExperimentSeries {
        meta: SeriesMeta { example: sub.name().into(), function: f.label.clone(), quantity: "G".into(), seed: 0 },
        rows,
    };
    Ok(ScalingProfile { series, fit: fit_log_log(&pts, 0).ok(), expected, ratios, kernel: *kernel, hypothesis_violated: violated })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EtaRow {
    pub a: f64,
    #[serde(rename = "N")]
    pub n: u32,
    pub value: f64,
    pub stderr: f64,
    #[serde(skip)]
    pub samples: Vec<f64>,
}

/// `G(λᴺ/a) / λ^{N(2α−2d)}` on an `a` grid: the smoothed mass of
/// `B(0, aλ^{−N})` in frequency, normalised by its predicted decay.
#[allow(clippy::too_many_arguments)]
pub fn eta_profile(
    f: &CylindricalFunction,
    sub: &Substitution,
    sd: &SpectralData,
    window: &Window,
    kernel: &KernelSpec,
    a_grid: &[f64],
    n: u32,
    anchors: &[[f64; 2]],
) -> Result<Vec<EtaRow>> {
    check_scaling_preconditions(f, sub, sd)?;
    let alpha = sd.alpha.expect("hypothesis implies α");
    let lambda = sub.expansion();
    let r = lambda.powi(n as i32);
    let norm = r.powf(2.0 * alpha - 2.0 * sub.dim() as f64);
    a_grid
        .iter()
        .map(|&a| {
            if a <= 0.0 {
                return Err(Error::Precondition(format!("a = {a} must be positive")));
            }
            let est = spectral_form(f, window, r, &kernel.dilated(1.0 / a), anchors)?;
            let samples: Vec<f64> = est.samples.iter().map(|x| x / norm).collect();
            Ok(EtaRow { a, n, value: est.g / norm, stderr: est.stderr / norm, samples })
        })
        .collect()
}

/// Values of `f` on the lattice refined `q` times, over `[lo, hi)`.
fn fine_values(f: &CylindricalFunction, window: &Window, lo: [i64; 2], hi: [i64; 2], q: usize) -> Result<(Vec<f64>, usize)> {
    let sub = window.substitution();
    let region = window.hierarchy().materialize(lo, hi)?;
    let slots = crate::tiling::SlotTable::new(sub);
    let rows_per_cell = if window.dim() == 1 { 1 } else { q };
    let w = region.width * q;
    let mut out = vec![0.0; w * region.height * rows_per_cell];
    for y in 0..region.height {
        for x in 0..region.width {
            let (tile, off) = slots.decode(region.at(x, y) as usize);
            for sy in 0..rows_per_cell {
                for sx in 0..q {
                    let local = [
                        off[0] as f64 + (sx as f64 + 0.5) / q as f64,
                        off[1] as f64 + (sy as f64 + 0.5) / rows_per_cell as f64,
                    ];
                    out[(y * rows_per_cell + sy) * w + x * q + sx] = f.eval(tile, local);
                }
            }
        }
    }
    Ok((out, w))
}

fn refinement(f: &CylindricalFunction) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 { a } else { gcd(b, a % b) }
    }
    f.profiles().iter().fold(1, |q, p| match p {
        crate::ergodic::Profile::Grid { g, .. } => q / gcd(q, *g) * g,
        _ => q,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationEstimate {
    pub value: f64,
    pub stderr: f64,
    pub anchors: usize,
}

/// `⟨f∘h_x, f⟩` estimated per anchor as the average of `F(y) F(y + x)` over
/// the box of half side `half` around the anchor, with exact overlap weights
/// for non-grid shifts.
pub fn correlation(
    f: &CylindricalFunction,
    window: &Window,
    x: [f64; 2],
    anchors: &[[f64; 2]],
    half: u32,
) -> Result<CorrelationEstimate> {
    if anchors.is_empty() {
        return Err(Error::InsufficientData("no anchors".into()));
    }
    let vals: Vec<f64> = anchors
        .par_iter()
        .map(|a| correlation_at(f, &window.with_origin(*a), x, half))
        .collect::<Result<_>>()?;
    Ok(CorrelationEstimate { value: mean(&vals), stderr: stderr(&vals), anchors: vals.len() })
}

fn correlation_at(f: &CylindricalFunction, window: &Window, x: [f64; 2], half: u32) -> Result<f64> {
    let dim = window.dim();
    let q = refinement(f);
    let qf = q as f64;
    let lag = [x[0], if dim == 1 { 0.0 } else { x[1] }];
    let reach = half as f64 + lag[0].abs().max(lag[1].abs()) + 2.0;
    window.check_margin(reach + 2.0)?;
    let c = window.origin_cell();
    let h = half as i64;
    let ext = lag[0].abs().max(lag[1].abs()).ceil() as i64 + 2;
    let lo = [c[0] - h - ext, if dim == 1 { 0 } else { c[1] - h - ext }];
    let hi = [c[0] + h + ext, if dim == 1 { 1 } else { c[1] + h + ext }];
    let (vals, w) = fine_values(f, window, lo, hi, q)?;
    let at = |fx: i64, fy: i64| vals[fy as usize * w + fx as usize];
    // Shift in fine units split into integer and fractional parts.
    let split = |t: f64| {
        let s = t * qf;
        let i = s.floor();
        (i as i64, s - i)
    };
    let (ix, fx) = split(lag[0]);
    let (iy, fy) = if dim == 1 { (0, 0.0) } else { split(lag[1]) };
    let wx = [1.0 - fx, fx];
    let wy = [1.0 - fy, fy];
    let q = q as i64;
    let (x0, x1) = ((c[0] - h - lo[0]) * q, (c[0] + h - lo[0]) * q);
    let (y0, y1) = if dim == 1 { (0, 1) } else { ((c[1] - h - lo[1]) * q, (c[1] + h - lo[1]) * q) };
    let mut rows = Vec::with_capacity((y1 - y0) as usize);
    for yy in y0..y1 {
        let mut acc = 0.0;
        for xx in x0..x1 {
            let v = at(xx, yy);
            if v == 0.0 {
                continue;
            }
            let mut shifted = 0.0;
            for (dy, wyv) in wy.iter().enumerate() {
                if *wyv == 0.0 {
                    continue;
                }
                for (dx, wxv) in wx.iter().enumerate() {
                    if *wxv != 0.0 {
                        shifted += wxv * wyv * at(xx + ix + dx as i64, yy + iy + dy as i64);
                    }
                }
            }
            acc += v * shifted;
        }
        rows.push(acc);
    }
    let cells = ((x1 - x0) * (y1 - y0)) as f64;
    Ok(pairwise_sum(&rows) / cells)
}

/// Gram matrix `(1/|B|)∫_B F(y+x_i) F(y+x_j) dy` for lattice lags, averaged
/// over anchors. Positive semidefinite by construction.
pub fn correlation_matrix(
    f: &CylindricalFunction,
    window: &Window,
    lags: &[[i64; 2]],
    anchors: &[[f64; 2]],
    half: u32,
) -> Result<Vec<Vec<f64>>> {
    let k = lags.len();
    let per_anchor: Vec<Vec<f64>> = anchors
        .par_iter()
        .map(|a| {
            let w = window.with_origin(*a);
            let reach = half as i64 + lags.iter().map(|l| l[0].abs().max(l[1].abs())).max().unwrap_or(0) + 1;
            w.check_margin(reach as f64 + 1.0)?;
            let c = w.origin_cell();
            let dim = w.dim();
            let lo = [c[0] - reach, if dim == 1 { 0 } else { c[1] - reach }];
            let hi = [c[0] + reach, if dim == 1 { 1 } else { c[1] + reach }];
            let q = refinement(f) as i64;
            let (vals, width) = fine_values(f, &w, lo, hi, q as usize)?;
            let h = half as i64;
            let (x0, x1) = ((c[0] - h - lo[0]) * q, (c[0] + h - lo[0]) * q);
            let (y0, y1) = if dim == 1 { (0, 1) } else { ((c[1] - h - lo[1]) * q, (c[1] + h - lo[1]) * q) };
            let mut out = vec![0.0; k * k];
            for i in 0..k {
                for j in i..k {
                    let mut rows = Vec::new();
                    for yy in y0..y1 {
                        let mut acc = 0.0;
                        for xx in x0..x1 {
                            let a = vals[((yy + lags[i][1] * q) as usize) * width + (xx + lags[i][0] * q) as usize];
                            let b = vals[((yy + lags[j][1] * q) as usize) * width + (xx + lags[j][0] * q) as usize];
                            acc += a * b;
                        }
                        rows.push(acc);
                    }
                    let v = pairwise_sum(&rows) / ((x1 - x0) * (y1 - y0)) as f64;
                    out[i * k + j] = v;
                    out[j * k + i] = v;
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok((0..k)
        .map(|i| {
            (0..k)
                .map(|j| mean(&per_anchor.iter().map(|m| m[i * k + j]).collect::<Vec<_>>()))
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins;
    use crate::spectrum::spectral_data;
    use crate::tiling::{make_window, AnchorMode};
    use std::sync::Arc;

    fn sym_window(levels: u32) -> Window {
        make_window(Arc::new(builtins::sym95()), 0, levels, AnchorMode::Center).unwrap()
    }

    #[test]
    fn gaussian_interval_total_mass() {
        assert!((gaussian_interval(-100.0, 100.0, 0.3, 7.0) - 7.0).abs() < 1e-12);
        let left = gaussian_interval(-50.0, 0.3, 0.3, 7.0);
        assert!((left - 3.5).abs() < 1e-12);
        // Far tail stays positive and tiny instead of cancelling to zero.
        let tail = gaussian_interval(40.0, 41.0, 0.0, 4.0);
        assert!(tail > 0.0 && tail < 1e-80);
    }

    #[test]
    fn constant_amplitude_is_mass() {
        let w = sym_window(5).with_origin([121.3, 120.2]);
        let sub = builtins::sym95();
        for r in [1.0, 3.7, 9.0] {
            let v = smoothed_ball_amplitude(&CylindricalFunction::constant(&sub, 2.0), &w, r, &KernelSpec::default()).unwrap();
            assert!((v - 2.0 * r * r).abs() < 1e-9 * r * r, "{v}");
        }
        let z = CylindricalFunction::constant(&sub, 0.0);
        assert_eq!(smoothed_ball_amplitude(&z, &w, 5.0, &KernelSpec::default()).unwrap(), 0.0);
    }

    #[test]
    fn amplitude_matches_refined_quadrature() {
        let sub = builtins::sym95();
        let f = CylindricalFunction::constants(&sub, "psi", &[1.0, -1.0]).unwrap();
        let w = make_window(Arc::new(sub), 0, 6, AnchorMode::Center).unwrap().with_origin([364.2, 351.7]);
        let r = 27.0;
        let v = smoothed_ball_amplitude(&f, &w, r, &KernelSpec::default()).unwrap();
        // Midpoint rule on a 4× refined grid of each cell, with Simpson-like
        // accuracy from Richardson extrapolation against 2×.
        let quad = |q: usize| {
            let o = w.origin();
            let reach = (6.0 * r) as i64 + 2;
            let c = w.origin_cell();
            let mut total = 0.0;
            for y in c[1] - reach..c[1] + reach {
                for x in c[0] - reach..c[0] + reach {
                    let psi = if w.type_at([x, y]).unwrap().tile == 0 { 1.0 } else { -1.0 };
                    let mut cell = 0.0;
                    for sy in 0..q {
                        for sx in 0..q {
                            let px = x as f64 + (sx as f64 + 0.5) / q as f64 - o[0];
                            let py = y as f64 + (sy as f64 + 0.5) / q as f64 - o[1];
                            cell += (-PI * (px * px + py * py) / (r * r)).exp();
                        }
                    }
                    total += psi * cell / (q * q) as f64;
                }
            }
            total
        };
        let (q4, q2) = (quad(4), quad(2));
        let extrapolated = (4.0 * q4 - q2) / 3.0;
        assert!((v - extrapolated).abs() <= 1e-6 * v.abs().max(1.0), "{v} vs {extrapolated}");
    }

    #[test]
    fn constant_function_form() {
        let sub = builtins::sym95();
        let w = sym_window(6);
        let anchors = w.sample_anchors(16, 200.0, 1).unwrap();
        for r in [3.0, 9.0, 27.0] {
            let g = spectral_form(&CylindricalFunction::constant(&sub, 1.5), &w, r, &KernelSpec::default(), &anchors).unwrap();
            assert!((g.g - 2.25).abs() < 1e-9);
        }
        let z = spectral_form(&CylindricalFunction::constant(&sub, 0.0), &w, 9.0, &KernelSpec::default(), &anchors).unwrap();
        assert_eq!(z.g, 0.0);
        assert!(matches!(
            spectral_form(&CylindricalFunction::constant(&sub, 1.0), &w, 9.0, &KernelSpec::default(), &anchors[..8]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn dilation_covariance_and_tail() {
        let sub = builtins::sym95();
        let f = CylindricalFunction::constants(&sub, "psi", &[1.0, -1.0]).unwrap();
        let w = sym_window(6);
        let anchors = w.sample_anchors(16, 250.0, 5).unwrap();
        let k = KernelSpec::default();
        let a = spectral_form(&f, &w, 9.0, &k.dilated(3.0), &anchors).unwrap();
        let b = spectral_form(&f, &w, 27.0, &k, &anchors).unwrap();
        assert!((a.g - b.g).abs() <= 1e-9 * b.g);
        let c = spectral_form(&f, &w, 27.0, &KernelSpec::with_tau(8.0), &anchors).unwrap();
        assert!((c.g - b.g).abs() <= 1e-9 * b.g);
    }

    #[test]
    fn table_violates_hypothesis() {
        let sub = builtins::table();
        let sd = spectral_data(&sub).unwrap();
        let f = CylindricalFunction::constants(&sub, "psi", &[1.0, -1.0]).unwrap();
        let w = make_window(Arc::new(sub.clone()), 0, 8, AnchorMode::Center).unwrap();
        let anchors = w.sample_anchors(16, 60.0, 1).unwrap();
        let res = scaling_profile(&f, &sub, &sd, &w, &KernelSpec::default(), &[1, 2, 3], &anchors, false);
        assert!(matches!(res, Err(Error::HypothesisViolated(_))));
        let explored = scaling_profile(&f, &sub, &sd, &w, &KernelSpec::default(), &[1, 2, 3], &anchors, true).unwrap();
        assert!(explored.hypothesis_violated);
    }

    #[test]
    fn preconditions() {
        let sub = builtins::sym95();
        let sd = spectral_data(&sub).unwrap();
        assert!(check_scaling_preconditions(&CylindricalFunction::constants(&sub, "f", &[1.0, -1.0]).unwrap(), &sub, &sd).is_ok());
        assert!(check_scaling_preconditions(&CylindricalFunction::constant(&sub, 1.0), &sub, &sd).is_err());
    }

    #[test]
    fn correlation_basics() {
        let sub = builtins::sym95();
        let w = sym_window(6);
        let anchors = w.sample_anchors(32, 100.0, 2).unwrap();
        let c = correlation(&CylindricalFunction::constant(&sub, 2.0), &w, [3.25, -1.5], &anchors, 20).unwrap();
        assert!((c.value - 4.0).abs() < 1e-12);
        let f = CylindricalFunction::constants(&sub, "psi", &[1.0, -1.0]).unwrap();
        let c0 = correlation(&f, &w, [0.0, 0.0], &anchors, 20).unwrap();
        assert!((c0.value - 1.0).abs() < 1e-12);
        // Half-cell shift averages the two neighbouring lags.
        let a = correlation(&f, &w, [1.0, 0.0], &anchors, 20).unwrap().value;
        let h = correlation(&f, &w, [0.5, 0.0], &anchors, 20).unwrap().value;
        assert!((h - 0.5 * (1.0 + a)).abs() < 1e-12);
    }

    #[test]
    fn gram_matrix_is_psd() {
        let sub = builtins::sym95();
        let w = sym_window(6);
        let anchors = w.sample_anchors(16, 100.0, 4).unwrap();
        let f = CylindricalFunction::constants(&sub, "psi", &[1.0, -1.0]).unwrap();
        let m = correlation_matrix(&f, &w, &[[0, 0], [1, 0], [0, 1]], &anchors, 24).unwrap();
        let mat = nalgebra::DMatrix::from_fn(3, 3, |i, j| m[i][j]);
        assert!(mat.symmetric_eigenvalues().iter().all(|&e| e >= -1e-6));
    }
}
