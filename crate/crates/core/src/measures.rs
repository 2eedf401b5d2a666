//! Finitely additive measures `Φ⁺_v` and the functionals `m_{Φ_v⁻}`.

use rand::Rng;
use serde::Serialize;

use crate::ergodic::CylindricalFunction;
use crate::error::{Error, Result};
use crate::spectrum::Mode;
use crate::subst::IncidenceMatrix;
use crate::tiling::{ball_decomposition, decompose, BoxDomain, CellBox, Decomposition, Hierarchy, Supertile, Window};

/// A weight vector over prototiles, usually an eigenvector of `Sᵗ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiVector {
    pub label: String,
    /// Eigenvalue when `v` is an eigenvector of `Sᵗ`.
    pub theta: Option<f64>,
    pub values: Vec<f64>,
    /// Integer copy of `values` when every entry is integral.
    pub exact: Option<Vec<i64>>,
}

impl PhiVector {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Self {
        let exact = values
            .iter()
            .all(|x| x.fract() == 0.0 && x.abs() < 1e15)
            .then(|| values.iter().map(|&x| x as i64).collect());
        PhiVector { label: label.into(), theta: None, values, exact }
    }

    pub fn integral(label: impl Into<String>, values: &[i64]) -> Self {
        PhiVector::new(label, values.iter().map(|&x| x as f64).collect())
    }

    /// The biorthonormal left eigenvector of a mode.
    pub fn from_mode(mode: &Mode) -> Self {
        PhiVector::new(format!("l{}", mode.index + 1), mode.left.clone()).with_theta(mode.theta)
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = Some(theta);
        self
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut v = PhiVector::new(format!("{}*{a}", self.label), self.values.iter().map(|x| a * x).collect());
        v.theta = self.theta;
        v
    }

    /// `‖Sᵗv − θv‖ / ‖v‖`; infinite when no eigenvalue is attached.
    pub fn eigen_residual(&self, s: &IncidenceMatrix) -> f64 {
        let Some(theta) = self.theta else { return f64::INFINITY };
        let sv = s.transpose_mul_vec(&self.values);
        let num: f64 = sv.iter().zip(&self.values).map(|(a, b)| (a - theta * b).powi(2)).sum();
        let den: f64 = self.values.iter().map(|x| x * x).sum();
        if den == 0.0 { 0.0 } else { (num / den).sqrt() }
    }
}

/// `(Sᵗ)ᵏ v` for `k = 0..=max_level`.
#[derive(Debug, Clone)]
pub struct PhiTable {
    levels: Vec<Vec<f64>>,
    exact: Option<Vec<Vec<i128>>>,
}

impl PhiTable {
    pub fn new(s: &IncidenceMatrix, v: &[f64], max_level: u32) -> Self {
        let mut levels = vec![v.to_vec()];
        for _ in 0..max_level {
            let next = s.transpose_mul_vec(levels.last().unwrap());
            levels.push(next);
        }
        PhiTable { levels, exact: None }
    }

    pub fn for_vector(s: &IncidenceMatrix, v: &PhiVector, max_level: u32) -> Self {
        let mut t = PhiTable::new(s, &v.values, max_level);
        if let Some(e) = &v.exact {
            let mut ex = vec![e.iter().map(|&x| x as i128).collect::<Vec<_>>()];
            for _ in 0..max_level {
                match s.transpose_mul_vec_i128(ex.last().unwrap()) {
                    Some(n) => ex.push(n),
                    None => return t,
                }
            }
            t.exact = Some(ex);
        }
        t
    }

    pub fn max_level(&self) -> u32 {
        self.levels.len() as u32 - 1
    }

    pub fn value(&self, k: u32, j: usize) -> f64 {
        self.levels[k as usize][j]
    }

    pub fn exact(&self, k: u32, j: usize) -> Option<i128> {
        self.exact.as_ref().map(|e| e[k as usize][j])
    }

    /// Σ pieces + Σ boundary `v_j · fraction`.
    pub fn on_decomposition(&self, d: &Decomposition) -> f64 {
        let inner: f64 = d.pieces.iter().map(|p| self.value(p.level, p.tile)).sum();
        let edge: f64 = d.boundary.iter().map(|b| self.levels[0][b.tile] * b.fraction).sum();
        inner + edge
    }
}

/// `((Sᵗ)ᵏ v)_j`.
pub fn phi_plus_supertile(s: &IncidenceMatrix, v: &PhiVector, k: u32, j: usize) -> f64 {
    PhiTable::new(s, &v.values, k).value(k, j)
}

/// Exact integer version of [`phi_plus_supertile`]; `None` on overflow.
pub fn phi_plus_supertile_exact(s: &IncidenceMatrix, v: &[i64], k: u32, j: usize) -> Option<i128> {
    let mut cur: Vec<i128> = v.iter().map(|&x| x as i128).collect();
    for _ in 0..k {
        cur = s.transpose_mul_vec_i128(&cur)?;
    }
    Some(cur[j])
}

/// Leb-proportional approximant of `Φ⁺_v(B(origin, R))`.
pub fn phi_plus_ball(s: &IncidenceMatrix, v: &PhiVector, window: &Window, r: f64) -> Result<f64> {
    let d = ball_decomposition(window, r)?;
    let table = PhiTable::new(s, &v.values, window.hierarchy().levels());
    Ok(table.on_decomposition(&Decomposition { pieces: d.pieces, boundary: d.boundary_cells }))
}

pub fn phi_plus_box(s: &IncidenceMatrix, v: &PhiVector, hier: &Hierarchy, bounds: CellBox) -> f64 {
    let d = decompose(hier, &BoxDomain { bounds, dim: hier.dim() });
    PhiTable::new(s, &v.values, hier.levels()).on_decomposition(&d)
}

/// `Σ_i v_i ∫ Ψ_i`.
pub fn m_phi_minus(f: &CylindricalFunction, v: &[f64]) -> f64 {
    f.integrals().iter().zip(v).map(|(a, b)| a * b).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfSimilarity {
    /// `Φ⁺_{v, ζ(T)}(φ(Ω))`.
    pub lhs: f64,
    /// `θ Φ⁺_{v, T}(Ω)`, or `Φ⁺_{Sᵗv, T}(Ω)` when no eigenvalue is attached.
    pub rhs: f64,
    pub residual: f64,
    /// Total variation `Σ |piece values|` of the left side, used to normalise
    /// the ball discrepancy.
    pub scale: f64,
    /// Set when both sides were evaluated in integer arithmetic.
    pub exact: bool,
    pub exact_residual: Option<i128>,
}

impl SelfSimilarity {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 { self.residual.abs() } else { self.residual.abs() / self.scale }
    }
}

fn image_pieces(hier: &Hierarchy, next: &Hierarchy, pieces: &[Supertile]) -> Result<Vec<Supertile>> {
    let s = next.scale(1);
    pieces
        .iter()
        .map(|p| {
            let anchor = [p.anchor[0] * s[0], p.anchor[1] * s[1]];
            let (img, _) = next.supertile_at(anchor, p.level + 1)?;
            if img.anchor != anchor || img.tile != p.tile {
                return Err(Error::Precondition(format!(
                    "image of supertile {p:?} in the substituted window is {img:?}"
                )));
            }
            debug_assert!(p.level < hier.levels() + 1);
            Ok(img)
        })
        .collect()
}

/// Exact check of `Φ⁺_{v,ζ(T)}(φ(Ω)) = θ Φ⁺_{v,T}(Ω)` on a union of supertiles.
/// `next` must be the once-substituted hierarchy of `hier`.
pub fn self_similarity_union(
    s: &IncidenceMatrix,
    v: &PhiVector,
    hier: &Hierarchy,
    next: &Hierarchy,
    pieces: &[Supertile],
) -> Result<SelfSimilarity> {
    if next.levels() != hier.levels() + 1 || next.root_type() != hier.root_type() {
        return Err(Error::Precondition("second hierarchy is not the substituted window".into()));
    }
    let images = image_pieces(hier, next, pieces)?;
    let table = PhiTable::for_vector(s, v, next.levels());
    let theta_int = v.theta.filter(|t| t.fract() == 0.0).map(|t| t as i128);
    if let (Some(_), true) = (&table.exact, v.theta.is_none() || theta_int.is_some()) {
        let lhs: i128 = images.iter().map(|p| table.exact(p.level, p.tile).unwrap()).sum();
        let rhs: i128 = match theta_int {
            Some(t) => t * pieces.iter().map(|p| table.exact(p.level, p.tile).unwrap()).sum::<i128>(),
            None => pieces.iter().map(|p| table.exact(p.level + 1, p.tile).unwrap()).sum(),
        };
        let scale: i128 = images.iter().map(|p| table.exact(p.level, p.tile).unwrap().abs()).sum();
        return Ok(SelfSimilarity {
            lhs: lhs as f64,
            rhs: rhs as f64,
            residual: (lhs - rhs) as f64,
            scale: scale as f64,
            exact: true,
            exact_residual: Some(lhs - rhs),
        });
    }
    let lhs: f64 = images.iter().map(|p| table.value(p.level, p.tile)).sum();
    let rhs: f64 = match v.theta {
        Some(t) => t * pieces.iter().map(|p| table.value(p.level, p.tile)).sum::<f64>(),
        None => pieces.iter().map(|p| table.value(p.level + 1, p.tile)).sum(),
    };
    let scale: f64 = images.iter().map(|p| table.value(p.level, p.tile).abs()).sum();
    Ok(SelfSimilarity { lhs, rhs, residual: lhs - rhs, scale, exact: false, exact_residual: None })
}

/// Ball version: compares `Φ⁺` of `B(λ·origin, λR)` in the substituted
/// window with `θ Φ⁺(B(origin, R))`. Not exact, the boundary cells differ.
pub fn self_similarity_ball(s: &IncidenceMatrix, v: &PhiVector, window: &Window, r: f64) -> Result<SelfSimilarity> {
    let theta = v
        .theta
        .ok_or_else(|| Error::Precondition("ball self-similarity needs an eigenvector".into()))?;
    let next = window.substituted()?;
    let lambda = next.hierarchy().scale(1)[0] as f64;
    let big = ball_decomposition(&next, lambda * r)?;
    let small = ball_decomposition(window, r)?;
    let table = PhiTable::new(s, &v.values, next.hierarchy().levels());
    let big = Decomposition { pieces: big.pieces, boundary: big.boundary_cells };
    let small = Decomposition { pieces: small.pieces, boundary: small.boundary_cells };
    let lhs = table.on_decomposition(&big);
    let rhs = theta * table.on_decomposition(&small);
    let scale = big.pieces.iter().map(|p| table.value(p.level, p.tile).abs()).sum::<f64>()
        + big.boundary.iter().map(|b| table.value(0, b.tile).abs() * b.fraction).sum::<f64>();
    Ok(SelfSimilarity { lhs, rhs, residual: lhs - rhs, scale, exact: false, exact_residual: None })
}

/// A random set of pairwise disjoint supertiles: each visited supertile is
/// taken, skipped or split, starting from the root. At most `max_pieces`.
pub fn random_supertile_union(hier: &Hierarchy, rng: &mut impl Rng, max_pieces: usize) -> Vec<Supertile> {
    let mut out = Vec::new();
    let mut stack = vec![hier.root_supertile()];
    while let Some(st) = stack.pop() {
        if out.len() >= max_pieces {
            break;
        }
        let roll: f64 = rng.gen();
        if st.level == 0 || (roll < 0.3 && st.level < hier.levels()) {
            if rng.gen_bool(0.6) {
                out.push(st);
            }
        } else if roll < 0.4 && st.level < hier.levels() {
            continue;
        } else {
            stack.extend(hier.children(&st));
        }
    }
    if out.is_empty() {
        out.push(hier.root_supertile());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins;
    use crate::spectrum::spectral_data;
    use crate::subst::build_incidence;
    use crate::tiling::{make_window, AnchorMode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    #[test]
    fn supertile_values() {
        let sym = build_incidence(&builtins::sym95());
        let v = PhiVector::integral("u2", &[1, -1]);
        assert_eq!(phi_plus_supertile(&sym, &v, 0, 1), -1.0);
        assert_eq!(phi_plus_supertile(&sym, &v, 3, 0), 125.0);
        assert_eq!(phi_plus_supertile_exact(&sym, &[1, -1], 3, 0), Some(125));
        let table = build_incidence(&builtins::table());
        assert_eq!(phi_plus_supertile(&table, &PhiVector::integral("u1", &[1, 1]), 1, 0), 4.0);
    }

    #[test]
    fn zero_vector_gives_zero() {
        let sub = Arc::new(builtins::sym95());
        let s = build_incidence(&sub);
        let w = make_window(sub, 0, 5, AnchorMode::Center).unwrap();
        for r in [0.5, 7.3, 60.0] {
            assert_eq!(phi_plus_ball(&s, &PhiVector::integral("0", &[0, 0]), &w, r).unwrap(), 0.0);
        }
    }

    #[test]
    fn box_on_supertile_is_exact() {
        let sub = Arc::new(builtins::sym95());
        let s = build_incidence(&sub);
        let w = make_window(sub, 1, 5, AnchorMode::Center).unwrap();
        let h = w.hierarchy();
        let (st, _) = h.supertile_at([100, 31], 3).unwrap();
        let v = PhiVector::integral("u2", &[1, -1]);
        let want = phi_plus_supertile(&s, &v, 3, st.tile);
        assert_eq!(phi_plus_box(&s, &v, h, h.cell_box(&st)), want);
    }

    #[test]
    fn m_phi_minus_values() {
        let sub = builtins::sym95();
        let f = CylindricalFunction::constants(&sub, "psi", &[1.0, -1.0]).unwrap();
        assert_eq!(m_phi_minus(&f, &[1.0, -1.0]), 2.0);
        assert_eq!(m_phi_minus(&f, &[0.0, 0.0]), 0.0);
        let z = CylindricalFunction::constants(&sub, "zero", &[0.0, 0.0]).unwrap();
        assert_eq!(m_phi_minus(&z, &[1.0, -1.0]), 0.0);
    }

    #[test]
    fn eigen_residual_of_modes() {
        let sub = builtins::ab42();
        let sd = spectral_data(&sub).unwrap();
        for m in &sd.modes {
            assert!(PhiVector::from_mode(m).eigen_residual(&sd.incidence) < 1e-12);
        }
    }

    #[test]
    fn exact_union_self_similarity_sym95() {
        let sub = Arc::new(builtins::sym95());
        let s = build_incidence(&sub);
        let h = Hierarchy::new(Arc::clone(&sub), 0, 4).unwrap();
        let next = Hierarchy::new(sub, 0, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = PhiVector::integral("u2", &[1, -1]).with_theta(5.0);
        for _ in 0..20 {
            let pieces = random_supertile_union(&h, &mut rng, 40);
            let rep = self_similarity_union(&s, &v, &h, &next, &pieces).unwrap();
            assert!(rep.exact);
            assert_eq!(rep.exact_residual, Some(0));
            let rep3 = self_similarity_union(&s, &v.scaled(3.0), &h, &next, &pieces).unwrap();
            assert_eq!(rep3.lhs, 3.0 * rep.lhs);
            assert_eq!(rep3.rhs, 3.0 * rep.rhs);
        }
    }

    #[test]
    fn ball_self_similarity_sym95() {
        let sub = Arc::new(builtins::sym95());
        let s = build_incidence(&sub);
        let w = make_window(sub, 0, 6, AnchorMode::Center).unwrap();
        let v = PhiVector::integral("u2", &[1, -1]).with_theta(5.0);
        let rep = self_similarity_ball(&s, &v, &w, 81.0).unwrap();
        assert!(rep.relative() <= 0.05, "{rep:?}");
    }

    #[test]
    fn random_unions_are_disjoint() {
        let sub = Arc::new(builtins::table());
        let h = Hierarchy::new(sub, 1, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pieces = random_supertile_union(&h, &mut rng, 100);
        for (i, a) in pieces.iter().enumerate() {
            for b in &pieces[i + 1..] {
                let (ba, bb) = (h.cell_box(a), h.cell_box(b));
                let apart = ba.hi[0] <= bb.lo[0] || bb.hi[0] <= ba.lo[0] || ba.hi[1] <= bb.lo[1] || bb.hi[1] <= ba.lo[1];
                assert!(apart);
            }
        }
    }
}
