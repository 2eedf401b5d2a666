//! Cylindrical functions, ergodic integrals over balls and the deviation
//! expansion.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{m_phi_minus, PhiTable};
use crate::spectrum::{tile_frequencies, SpectralData};
use crate::stats::{fit_log_log, Fit};
use crate::subst::{IncidenceMatrix, Substitution};
use crate::tiling::{ball_decomposition, ball_volume, decompose, CellBox, Decomposition, Domain, Hierarchy, Window};

/// Profile of a cylindrical function on one prototile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Profile {
    Constant(f64),
    /// Piecewise constant on a `g × g` grid over the prototile support (`g`
    /// intervals in d = 1), row-major from the lower-left corner.
    Grid { g: usize, values: Vec<f64> },
}

/// `f(T) = Ψ_i(x)` when the origin sits at position `x` inside a tile of type `i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CylindricalFunction {
    pub label: String,
    dim: usize,
    extents: Vec<[u64; 2]>,
    profiles: Vec<Profile>,
    integrals: Vec<f64>,
    square_integrals: Vec<f64>,
}

impl CylindricalFunction {
    pub fn new(sub: &Substitution, label: impl Into<String>, profiles: Vec<Profile>) -> Result<Self> {
        if profiles.len() != sub.num_types() {
            return Err(Error::Precondition(format!(
                "{} profiles for {} prototiles",
                profiles.len(),
                sub.num_types()
            )));
        }
        let dim = sub.dim();
        let mut integrals = Vec::new();
        let mut square_integrals = Vec::new();
        for (p, proto) in profiles.iter().zip(sub.prototiles()) {
            match p {
                Profile::Constant(c) => {
                    integrals.push(c * proto.volume);
                    square_integrals.push(c * c * proto.volume);
                }
                Profile::Grid { g, values } => {
                    let want = if dim == 1 { *g } else { g * g };
                    if *g == 0 || values.len() != want {
                        return Err(Error::Precondition(format!(
                            "profile of {} needs {want} values, got {}",
                            proto.label,
                            values.len()
                        )));
                    }
                    let sub_vol = proto.volume / want as f64;
                    integrals.push(values.iter().sum::<f64>() * sub_vol);
                    square_integrals.push(values.iter().map(|x| x * x).sum::<f64>() * sub_vol);
                }
            }
        }
        Ok(CylindricalFunction {
            label: label.into(),
            dim,
            extents: sub.prototiles().iter().map(|p| p.extent).collect(),
            profiles,
            integrals,
            square_integrals,
        })
    }

    /// One constant per prototile.
    pub fn constants(sub: &Substitution, label: impl Into<String>, values: &[f64]) -> Result<Self> {
        CylindricalFunction::new(sub, label, values.iter().map(|&c| Profile::Constant(c)).collect())
    }

    pub fn constant(sub: &Substitution, c: f64) -> Self {
        CylindricalFunction::constants(sub, format!("const{c}"), &vec![c; sub.num_types()]).expect("sizes match")
    }

    pub fn profiles(&self) -> &[Profile] {
        &self.profiles
    }

    /// `∫_{T_i} Ψ_i`.
    pub fn integrals(&self) -> &[f64] {
        &self.integrals
    }

    pub fn square_integrals(&self) -> &[f64] {
        &self.square_integrals
    }

    pub fn is_piecewise_constant_per_tile(&self) -> bool {
        self.profiles.iter().all(|p| matches!(p, Profile::Constant(_)))
    }

    /// Sub-boxes of constant value of a tile placed at `anchor`.
    pub fn pieces(&self, tile: usize, anchor: [i64; 2]) -> Vec<(CellBox, f64)> {
        let e = self.extents[tile];
        let lo = [anchor[0] as f64, anchor[1] as f64];
        match &self.profiles[tile] {
            Profile::Constant(c) => vec![(CellBox::new(lo, [lo[0] + e[0] as f64, lo[1] + e[1] as f64]), *c)],
            Profile::Grid { g, values } => {
                let (w, h) = (e[0] as f64 / *g as f64, e[1] as f64 / *g as f64);
                let rows = if self.dim == 1 { 1 } else { *g };
                let mut out = Vec::with_capacity(values.len());
                for r in 0..rows {
                    for c in 0..*g {
                        let (x0, y0) = (lo[0] + c as f64 * w, if self.dim == 1 { lo[1] } else { lo[1] + r as f64 * h });
                        let y1 = if self.dim == 1 { lo[1] + 1.0 } else { y0 + h };
                        out.push((CellBox::new([x0, y0], [x0 + w, y1]), values[r * g + c]));
                    }
                }
                out
            }
        }
    }

    /// Value at a point `local` relative to the tile anchor.
    pub fn eval(&self, tile: usize, local: [f64; 2]) -> f64 {
        match &self.profiles[tile] {
            Profile::Constant(c) => *c,
            Profile::Grid { g, values } => {
                let e = self.extents[tile];
                let cx = ((local[0] / e[0] as f64 * *g as f64) as usize).min(g - 1);
                let cy = if self.dim == 1 { 0 } else { ((local[1] / e[1] as f64 * *g as f64) as usize).min(g - 1) };
                values[cy * g + cx]
            }
        }
    }

    /// `∫_{tile ∩ domain} Ψ`.
    pub fn clipped_integral(&self, tile: usize, anchor: [i64; 2], domain: &impl Domain) -> f64 {
        self.pieces(tile, anchor).iter().map(|(b, v)| v * domain.clipped(b)).sum()
    }
}

/// `∫ f dμ = Σ_i freq_i ∫Ψ_i`.
pub fn integral_mu(f: &CylindricalFunction, freqs: &[f64]) -> f64 {
    f.integrals().iter().zip(freqs).map(|(a, b)| a * b).sum()
}

/// `Σ_i (Sᵏ)_{ij} ∫Ψ_i`.
pub fn supertile_integral(f: &CylindricalFunction, s: &IncidenceMatrix, k: u32, j: usize) -> f64 {
    PhiTable::new(s, f.integrals(), k).value(k, j)
}

fn integral_on(f: &CylindricalFunction, table: &PhiTable, d: &Decomposition, domain: &impl Domain) -> f64 {
    let inner: f64 = d.pieces.iter().map(|p| table.value(p.level, p.tile)).sum();
    let edge: f64 = d.boundary.iter().map(|b| f.clipped_integral(b.tile, b.anchor, domain)).sum();
    inner + edge
}

/// `S(f, T, ρ) = ∫_{B(0,ρ)} f∘h_x(T) dx`.
pub fn ergodic_integral(f: &CylindricalFunction, s: &IncidenceMatrix, window: &Window, rho: f64) -> Result<f64> {
    DeviationModel::plain(f, s, window.hierarchy().levels()).ball(window, rho).map(|e| e.integral)
}

/// Precomputed tables for the deviation expansion of one function.
#[derive(Debug, Clone)]
pub struct DeviationModel {
    f: CylindricalFunction,
    integrals: PhiTable,
    mean: f64,
    /// `(Φ⁺ table of l_n, m_{Φ⁻}(f, r_n))` for the non-Perron expanding modes.
    terms: Vec<(PhiTable, f64)>,
}

/// Pieces of the deviation expansion on one domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Expansion {
    pub integral: f64,
    pub volume: f64,
    pub mean_term: f64,
    pub phi_terms: f64,
    pub residual: f64,
}

impl DeviationModel {
    pub fn new(f: &CylindricalFunction, sub: &Substitution, sd: &SpectralData, max_level: u32) -> Result<Self> {
        if sd.expanding_dims == 0 {
            return Err(Error::Precondition("no expanding directions".into()));
        }
        let freqs = tile_frequencies(sd, sub);
        let s = &sd.incidence;
        let terms = sd
            .expanding_modes()
            .filter(|m| m.index > 0)
            .map(|m| (PhiTable::new(s, &m.left, max_level), m_phi_minus(f, &m.right)))
            .collect();
        Ok(DeviationModel {
            f: f.clone(),
            integrals: PhiTable::new(s, f.integrals(), max_level),
            mean: integral_mu(f, &freqs),
            terms,
        })
    }

    fn plain(f: &CylindricalFunction, s: &IncidenceMatrix, max_level: u32) -> Self {
        DeviationModel { f: f.clone(), integrals: PhiTable::new(s, f.integrals(), max_level), mean: 0.0, terms: Vec::new() }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn function(&self) -> &CylindricalFunction {
        &self.f
    }

    /// Evaluates every term on an already computed decomposition of `domain`.
    pub fn evaluate(&self, d: &Decomposition, domain: &impl Domain) -> Expansion {
        let integral = integral_on(&self.f, &self.integrals, d, domain);
        let volume = domain.volume();
        let mean_term = volume * self.mean;
        let phi_terms: f64 = self.terms.iter().map(|(t, m)| t.on_decomposition(d) * m).sum();
        Expansion { integral, volume, mean_term, phi_terms, residual: integral - mean_term - phi_terms }
    }

    pub fn domain(&self, hier: &Hierarchy, domain: &impl Domain) -> Expansion {
        self.evaluate(&decompose(hier, domain), domain)
    }

    pub fn ball(&self, window: &Window, rho: f64) -> Result<Expansion> {
        if rho <= 0.0 {
            return Ok(Expansion { integral: 0.0, volume: 0.0, mean_term: 0.0, phi_terms: 0.0, residual: 0.0 });
        }
        let d = ball_decomposition(window, rho)?;
        let ball = crate::tiling::Ball { center: d.center, radius: rho, dim: window.dim() };
        debug_assert!((ball.volume() - ball_volume(rho, window.dim())).abs() == 0.0);
        Ok(self.evaluate(&Decomposition { pieces: d.pieces, boundary: d.boundary_cells }, &ball))
    }
}

/// `S(f,·,ρ) − Leb(B_ρ)∫f dμ − Σ_{n≥2} Φ⁺_{l_n}(B_ρ) m_{Φ⁻}(f, r_n)`.
pub fn deviation_residual(
    f: &CylindricalFunction,
    sub: &Substitution,
    window: &Window,
    rho: f64,
    sd: &SpectralData,
) -> Result<f64> {
    DeviationModel::new(f, sub, sd, window.hierarchy().levels())?.ball(window, rho).map(|e| e.residual)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesRow {
    #[serde(rename = "N")]
    pub n: u32,
    #[serde(rename = "R")]
    pub r: f64,
    /// Mean over anchors.
    pub value: f64,
    pub rms: f64,
    /// Standard error of the mean of the per-anchor quantity.
    pub stderr: f64,
    pub anchors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesMeta {
    pub example: String,
    pub function: String,
    pub quantity: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSeries {
    pub meta: SeriesMeta,
    pub rows: Vec<SeriesRow>,
}

impl ExperimentSeries {
    /// OLS of log rms against log R.
    pub fn fit(&self, drop_head: usize) -> Result<Fit> {
        fit_exponent(self, drop_head)
    }
}

pub fn fit_exponent(series: &ExperimentSeries, drop_head: usize) -> Result<Fit> {
    let pts: Vec<(f64, f64)> = series.rows.iter().map(|r| (r.r, r.rms)).collect();
    fit_log_log(&pts, drop_head)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins;
    use crate::spectrum::spectral_data;
    use crate::subst::build_incidence;
    use crate::tiling::{make_window, AnchorMode, BoxDomain};
    use std::sync::Arc;

    #[test]
    fn means() {
        let sym = builtins::sym95();
        let sd = spectral_data(&sym).unwrap();
        let fr = tile_frequencies(&sd, &sym);
        let f = CylindricalFunction::constants(&sym, "psi", &[1.0, -1.0]).unwrap();
        assert_eq!(integral_mu(&f, &fr), 0.0);
        assert!((integral_mu(&CylindricalFunction::constant(&sym, 2.5), &fr) - 2.5).abs() < 1e-15);
        let table = builtins::table();
        let sd = spectral_data(&table).unwrap();
        let fr = tile_frequencies(&sd, &table);
        assert!((integral_mu(&CylindricalFunction::constant(&table, -1.5), &fr) + 1.5).abs() < 1e-15);
        let ab = builtins::ab42();
        let sd = spectral_data(&ab).unwrap();
        let fr = tile_frequencies(&sd, &ab);
        let f = CylindricalFunction::constants(&ab, "a", &[1.0, 0.0]).unwrap();
        assert!((integral_mu(&f, &fr) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn supertile_integrals() {
        let sym = builtins::sym95();
        let s = build_incidence(&sym);
        let f = CylindricalFunction::constants(&sym, "psi", &[1.0, -1.0]).unwrap();
        assert_eq!(supertile_integral(&f, &s, 0, 1), -1.0);
        assert_eq!(supertile_integral(&f, &s, 1, 0), 5.0);
        let table = builtins::table();
        let s = build_incidence(&table);
        let one = CylindricalFunction::constant(&table, 1.0);
        for k in 0..6 {
            assert_eq!(supertile_integral(&one, &s, k, 0), 4f64.powi(k as i32) * 2.0);
        }
    }

    #[test]
    fn grid_profiles() {
        let table = builtins::table();
        let f = CylindricalFunction::new(
            &table,
            "grid",
            vec![Profile::Grid { g: 2, values: vec![1.0, 2.0, 3.0, 4.0] }, Profile::Constant(0.5)],
        )
        .unwrap();
        // V is 1×2, so each sub-box is 0.5 × 1.
        assert_eq!(f.integrals()[0], 5.0);
        assert_eq!(f.square_integrals()[0], 15.0);
        assert_eq!(f.integrals()[1], 1.0);
        assert_eq!(f.eval(0, [0.7, 1.5]), 4.0);
        let pieces = f.pieces(0, [3, 4]);
        assert_eq!(pieces[1].0, CellBox::new([3.5, 4.0], [4.0, 5.0]));
        assert!(CylindricalFunction::new(&table, "bad", vec![Profile::Grid { g: 2, values: vec![1.0] }, Profile::Constant(0.0)]).is_err());
    }

    #[test]
    fn constant_function_integrates_to_volume() {
        let sub = Arc::new(builtins::sym95());
        let s = build_incidence(&sub);
        let w = make_window(Arc::clone(&sub), 0, 6, AnchorMode::Center).unwrap();
        let w = w.with_origin([301.3, 377.8]);
        let one = CylindricalFunction::constant(&sub, 1.0);
        for rho in [0.4, 12.0, 99.9] {
            let v = ergodic_integral(&one, &s, &w, rho).unwrap();
            assert!((v - std::f64::consts::PI * rho * rho).abs() < 1e-9 * rho.max(1.0));
        }
        assert_eq!(ergodic_integral(&one, &s, &w, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn residual_vanishes_on_supertiles() {
        for sub in [builtins::sym95(), builtins::ab42()] {
            let sub = Arc::new(sub);
            let sd = spectral_data(&sub).unwrap();
            let f = CylindricalFunction::constants(&sub, "psi", &[1.0, -1.0]).unwrap();
            let h = Hierarchy::new(Arc::clone(&sub), 1, 7).unwrap();
            let model = DeviationModel::new(&f, &sub, &sd, 7).unwrap();
            for k in 0..=6 {
                let (st, _) = h.supertile_at([5, 0], k).unwrap();
                let e = model.domain(&h, &BoxDomain { bounds: h.cell_box(&st), dim: sub.dim() });
                assert!(e.residual.abs() <= 1e-9, "{} k={k}: {e:?}", sub.name());
                let theta2 = sd.theta2.unwrap();
                assert!((e.integral.abs() - theta2.powi(k as i32)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn constant_function_residual_on_unions() {
        let sub = Arc::new(builtins::sym95());
        let sd = spectral_data(&sub).unwrap();
        let f = CylindricalFunction::constant(&sub, 3.0);
        let h = Hierarchy::new(Arc::clone(&sub), 0, 5).unwrap();
        let model = DeviationModel::new(&f, &sub, &sd, 5).unwrap();
        let e = model.domain(&h, &BoxDomain { bounds: CellBox::new([27.0, 0.0], [81.0, 54.0]), dim: 2 });
        assert!(e.residual.abs() < 1e-9);
    }
}
