//! Eigen-structure of the incidence matrix.
//!
//! Eigenvalues come from a real Schur decomposition and are then polished
//! against the exact integer characteristic polynomial: integer roots are
//! snapped and their eigenvectors are computed as exact rational kernels, so
//! all shipped examples get exact eigen-data. Non-integer eigenvalues fall
//! back to an SVD null vector.

use nalgebra::{Complex, DMatrix};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::subst::{build_incidence, is_primitive, IncidenceMatrix, Substitution};

/// One real simple eigen-direction, with `left · right = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mode {
    /// Zero-based position in the modulus-sorted eigenvalue list.
    pub index: usize,
    pub theta: f64,
    /// Set when the eigenvalue is an exact integer root of the characteristic polynomial.
    pub theta_exact: Option<i64>,
    /// Eigenvector of `S`.
    pub right: Vec<f64>,
    /// Eigenvector of `Sᵗ`.
    pub left: Vec<f64>,
    /// Primitive integer multiple of `left`, when one exists.
    pub left_integral: Option<Vec<i64>>,
    pub right_integral: Option<Vec<i64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralData {
    pub dim: usize,
    #[serde(serialize_with = "ser_matrix")]
    pub incidence: IncidenceMatrix,
    /// `(re, im)` pairs sorted by decreasing modulus.
    pub eigenvalues: Vec<(f64, f64)>,
    pub modes: Vec<Mode>,
    pub theta1: f64,
    pub theta2: Option<f64>,
    pub alpha: Option<f64>,
    /// Size of Jordan blocks in the expanding part; always 1 here.
    pub jordan_size: u32,
    pub hypothesis_ok: bool,
    /// `θ₁^{(d−1)/d}`.
    pub threshold: f64,
    pub expanding_dims: usize,
    pub biorthogonality_error: f64,
}

fn ser_matrix<S: serde::Serializer>(m: &IncidenceMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    m.rows().serialize(s)
}

impl SpectralData {
    pub fn mode(&self, index: usize) -> Option<&Mode> {
        self.modes.iter().find(|m| m.index == index)
    }

    pub fn perron(&self) -> &Mode {
        self.mode(0).expect("Perron mode always present")
    }

    /// The rapidly expanding directions, Perron first.
    pub fn expanding_modes(&self) -> impl Iterator<Item = &Mode> {
        self.modes.iter().filter(move |m| m.index < self.expanding_dims)
    }

    /// Maximum of `|l_n · r_k − δ_{nk}|` over the stored modes.
    pub fn biorthogonality(&self) -> f64 {
        biorthogonality(&self.modes)
    }
}

fn biorthogonality(modes: &[Mode]) -> f64 {
    let mut worst = 0.0f64;
    for a in modes {
        for b in modes {
            let dot: f64 = a.left.iter().zip(&b.right).map(|(x, y)| x * y).sum();
            let target = if a.index == b.index { 1.0 } else { 0.0 };
            worst = worst.max((dot - target).abs());
        }
    }
    worst
}

/// Characteristic polynomial `det(xI − S)` by Faddeev–LeVerrier, coefficients
/// lowest degree first. `None` on overflow.
pub fn characteristic_polynomial(s: &IncidenceMatrix) -> Option<Vec<i128>> {
    let n = s.size();
    let a = s.to_i128();
    let mut coeffs = vec![0i128; n + 1];
    coeffs[n] = 1;
    let mut m = vec![vec![0i128; n]; n];
    for k in 1..=n {
        // M_k = A M_{k−1} + c_{n−k+1} I
        let mut next = vec![vec![0i128; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0i128;
                for l in 0..n {
                    acc = acc.checked_add(a[i][l].checked_mul(m[l][j])?)?;
                }
                if i == j {
                    acc = acc.checked_add(coeffs[n - k + 1])?;
                }
                next[i][j] = acc;
            }
        }
        let mut trace = 0i128;
        for i in 0..n {
            for l in 0..n {
                trace = trace.checked_add(a[i][l].checked_mul(next[l][i])?)?;
            }
        }
        coeffs[n - k] = -trace / k as i128;
        m = next;
    }
    Some(coeffs)
}

fn poly_eval_i128(p: &[i128], x: i128) -> Option<i128> {
    p.iter().rev().try_fold(0i128, |acc, &c| acc.checked_mul(x)?.checked_add(c))
}

fn poly_eval_f64(p: &[i128], x: f64) -> (f64, f64) {
    let value = p.iter().rev().fold(0.0, |acc, &c| acc * x + c as f64);
    let scale = p.iter().enumerate().map(|(k, &c)| (c as f64).abs() * x.abs().powi(k as i32)).sum::<f64>();
    (value, scale)
}

/// Multiplicity of the integer root `r` of `p`, by repeated synthetic division.
fn integer_root_multiplicity(p: &[i128], r: i128) -> usize {
    let mut p = p.to_vec();
    let mut mult = 0;
    while p.len() > 1 && poly_eval_i128(&p, r) == Some(0) {
        let n = p.len() - 1;
        let mut q = vec![0i128; n];
        let mut carry = 0i128;
        for k in (0..n).rev() {
            carry = match carry.checked_mul(r).and_then(|c| c.checked_add(p[k + 1])) {
                Some(c) => c,
                None => return mult,
            };
            q[k] = carry;
        }
        p = q;
        mult += 1;
    }
    mult
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Integer basis vector of the one-dimensional kernel of an integer matrix,
/// by fraction-free elimination. `None` if the kernel is not one-dimensional
/// or arithmetic overflows.
fn integer_kernel(mut a: Vec<Vec<i128>>) -> Option<Vec<i128>> {
    let n = a.len();
    let mut pivots: Vec<usize> = Vec::new();
    let mut row = 0;
    for col in 0..n {
        let Some(p) = (row..n).find(|&r| a[r][col] != 0) else { continue };
        a.swap(row, p);
        for r in 0..n {
            if r != row && a[r][col] != 0 {
                let (f, g) = (a[row][col], a[r][col]);
                let pivot = a[row].clone();
                for (x, &p) in a[r].iter_mut().zip(&pivot) {
                    *x = x.checked_mul(f)?.checked_sub(p.checked_mul(g)?)?;
                }
                let d = a[r].iter().fold(0, |acc, &x| gcd(acc, x));
                if d > 1 {
                    a[r].iter_mut().for_each(|x| *x /= d);
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    if pivots.len() + 1 != n {
        return None;
    }
    let free = (0..n).find(|c| !pivots.contains(c))?;
    // Each pivot row r reads a[r][p] x_p + a[r][free] x_free = 0.
    let denom = pivots
        .iter()
        .enumerate()
        .try_fold(1i128, |acc, (r, _)| {
            let d = a[r][pivots[r]].abs();
            acc.checked_mul(d / gcd(acc, d))
        })?;
    let mut x = vec![0i128; n];
    x[free] = denom;
    for (r, &p) in pivots.iter().enumerate() {
        x[p] = (-a[r][free]).checked_mul(denom / a[r][p])?;
    }
    let g = x.iter().fold(0, |acc, &v| gcd(acc, v));
    if g > 1 {
        x.iter_mut().for_each(|v| *v /= g);
    }
    Some(x)
}

fn svd_null_vector(a: DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let k = (0..n)
        .min_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]))
        .unwrap_or(0);
    v_t.row(k).iter().copied().collect()
}

fn normalize_right(v: &mut [f64]) {
    let max = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let lead = v.iter().position(|x| x.abs() >= max * (1.0 - 1e-9)).unwrap_or(0);
    let scale = v[lead];
    v.iter_mut().for_each(|x| *x /= scale);
}

fn residual(matrix_times: impl Fn(&[f64]) -> Vec<f64>, v: &[f64], theta: f64) -> f64 {
    let sv = matrix_times(v);
    let num = sv.iter().zip(v).map(|(a, b)| (a - theta * b).powi(2)).sum::<f64>().sqrt();
    let den = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    num / den
}

struct Eigen {
    value: Complex<f64>,
    exact: Option<i64>,
    simple: bool,
}

fn sorted_eigenvalues(s: &IncidenceMatrix, theta1_exact: Option<i64>) -> Result<Vec<Eigen>> {
    let n = s.size();
    let raw = s.to_f64().complex_eigenvalues();
    let poly = characteristic_polynomial(s);
    let scale = raw.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let mut out: Vec<Eigen> = Vec::with_capacity(n);
    for z in raw.iter() {
        let mut value = *z;
        let mut exact = None;
        if let Some(p) = &poly {
            let r = z.re.round();
            if z.im.abs() < 1e-6 * scale && (z.re - r).abs() < 1e-6 * scale && poly_eval_i128(p, r as i128) == Some(0) {
                value = Complex::new(r, 0.0);
                exact = Some(r as i64);
            } else if n <= 4 && z.im.abs() < 1e-9 * scale {
                let (v, sc) = poly_eval_f64(p, z.re);
                if v.abs() > 1e-6 * sc.max(1.0) {
                    return Err(Error::DegenerateSpectrum(format!(
                        "eigenvalue {} fails the characteristic polynomial cross-check",
                        z.re
                    )));
                }
            }
        }
        if value.im.abs() < 1e-12 * scale {
            value.im = 0.0;
        }
        out.push(Eigen { value, exact, simple: true });
    }
    if let (Some(t1), Some(first)) = (theta1_exact, out.iter_mut().max_by(|a, b| a.value.re.total_cmp(&b.value.re))) {
        if (first.value.re - t1 as f64).abs() > 1e-9 * t1 as f64 {
            return Err(Error::DegenerateSpectrum(format!(
                "numerical Perron root {} disagrees with L^d = {t1}",
                first.value.re
            )));
        }
        first.value = Complex::new(t1 as f64, 0.0);
        first.exact = Some(t1);
    }
    out.sort_by(|a, b| {
        b.value
            .norm()
            .total_cmp(&a.value.norm())
            .then(b.value.re.total_cmp(&a.value.re))
            .then(b.value.im.total_cmp(&a.value.im))
    });
    for i in 0..out.len() {
        let repeated = match (out[i].exact, &poly) {
            (Some(r), Some(p)) => integer_root_multiplicity(p, r as i128) > 1,
            _ => (0..out.len()).any(|j| j != i && (out[j].value - out[i].value).norm() < 1e-7 * scale),
        };
        out[i].simple = !repeated;
    }
    Ok(out)
}

/// `θ₁ = L^d` proved exactly by column-volume conservation, when the
/// substitution is on the integer lattice.
fn exact_perron_root(sub: &Substitution, s: &IncidenceMatrix) -> Option<i64> {
    let l = sub.lattice_expansion()?;
    let ld = l.checked_pow(sub.dim() as u32)? as u128;
    let vols: Vec<u128> = sub.prototiles().iter().map(|p| p.cells() as u128).collect();
    let conserved = (0..s.size()).all(|j| {
        (0..s.size()).map(|i| s.get(i, j) as u128 * vols[i]).sum::<u128>() == ld * vols[j]
    });
    conserved.then_some(ld as i64)
}

fn build_mode(s: &IncidenceMatrix, index: usize, theta: f64, exact: Option<i64>) -> Result<Mode> {
    let n = s.size();
    let shifted = |transpose: bool, t: i64| -> Vec<Vec<i128>> {
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let e = if transpose { s.get(j, i) } else { s.get(i, j) } as i128;
                        if i == j { e - t as i128 } else { e }
                    })
                    .collect()
            })
            .collect()
    };
    let to_i64 = |v: Vec<i128>| -> Option<Vec<i64>> { v.into_iter().map(|x| i64::try_from(x).ok()).collect() };
    let (mut right_int, mut left_int) = (None, None);
    if let Some(t) = exact {
        right_int = integer_kernel(shifted(false, t)).and_then(to_i64);
        left_int = integer_kernel(shifted(true, t)).and_then(to_i64);
    }
    let dense = s.to_f64();
    let eye = DMatrix::<f64>::identity(n, n);
    let mut right: Vec<f64> = match &right_int {
        Some(v) => v.iter().map(|&x| x as f64).collect(),
        None => svd_null_vector(&dense - &eye * theta),
    };
    let mut left: Vec<f64> = match &left_int {
        Some(v) => v.iter().map(|&x| x as f64).collect(),
        None => svd_null_vector(dense.transpose() - &eye * theta),
    };
    normalize_right(&mut right);
    if let Some(ri) = &mut right_int {
        let lead = right.iter().position(|x| (x - 1.0).abs() < 1e-12).unwrap_or(0);
        if ri[lead] < 0 {
            ri.iter_mut().for_each(|x| *x = -*x);
        }
    }
    let pairing: f64 = left.iter().zip(&right).map(|(a, b)| a * b).sum();
    let norms = left.iter().map(|x| x * x).sum::<f64>().sqrt() * right.iter().map(|x| x * x).sum::<f64>().sqrt();
    if pairing.abs() < 1e-10 * norms {
        return Err(Error::DegenerateSpectrum(format!(
            "eigenvalue {theta}: left and right eigenvectors are orthogonal (not diagonalizable)"
        )));
    }
    left.iter_mut().for_each(|x| *x /= pairing);
    if let Some(li) = &mut left_int {
        if pairing < 0.0 {
            li.iter_mut().for_each(|x| *x = -*x);
        }
    }
    let rr = residual(|v| s.mul_vec(v), &right, theta);
    let rl = residual(|v| s.transpose_mul_vec(v), &left, theta);
    if rr > 1e-9 || rl > 1e-9 {
        return Err(Error::DegenerateSpectrum(format!(
            "eigenvalue {theta}: residuals {rr:e} / {rl:e} exceed 1e-9"
        )));
    }
    Ok(Mode { index, theta, theta_exact: exact, right, left, left_integral: left_int, right_integral: right_int })
}

pub fn spectral_data(sub: &Substitution) -> Result<SpectralData> {
    let s = build_incidence(sub);
    if !is_primitive(&s) {
        return Err(Error::NotPrimitive);
    }
    let d = sub.dim();
    let theta1_exact = exact_perron_root(sub, &s);
    let eig = sorted_eigenvalues(&s, theta1_exact)?;
    let theta1 = eig[0].value.re;
    if eig[0].value.im != 0.0 || !eig[0].simple {
        return Err(Error::DegenerateSpectrum("Perron root is not real and simple".into()));
    }
    if let Some(l) = sub.lattice_expansion() {
        let ld = (l as f64).powi(d as i32);
        if (theta1 - ld).abs() > 1e-9 * ld {
            return Err(Error::DegenerateSpectrum(format!("θ₁ = {theta1} but L^d = {ld}")));
        }
    }
    let threshold = theta1.powf((d as f64 - 1.0) / d as f64);
    let expanding_dims = eig.iter().filter(|e| e.value.norm() > threshold * (1.0 + 1e-12)).count();
    if let Some(bad) = eig[..expanding_dims].iter().find(|e| e.value.im != 0.0 || !e.simple) {
        return Err(Error::DegenerateSpectrum(format!(
            "expanding eigenvalue {} is complex or repeated",
            bad.value
        )));
    }
    if let Some(e2) = eig.get(1) {
        if e2.value.im != 0.0 || !e2.simple {
            return Err(Error::DegenerateSpectrum(format!("θ₂ = {} is complex or repeated", e2.value)));
        }
    }

    let mut modes = Vec::new();
    for (index, e) in eig.iter().enumerate() {
        if e.value.im == 0.0 && e.simple {
            modes.push(build_mode(&s, index, e.value.re, e.exact)?);
        }
    }
    // The Perron right vector must be positive.
    if modes[0].right.iter().any(|&x| x <= 0.0) {
        return Err(Error::DegenerateSpectrum("Perron vector is not positive".into()));
    }

    let theta2 = eig.get(1).map(|e| e.value.re);
    let alpha = theta2.filter(|&t| t > 0.0).map(|t| d as f64 * t.ln() / theta1.ln());
    let hypothesis_ok = match theta2 {
        Some(t2) => {
            let gap_below = eig.get(2).is_none_or(|e3| t2 > e3.value.norm() * (1.0 + 1e-12));
            t2 > threshold * (1.0 + 1e-12) && gap_below
        }
        None => false,
    };
    let biorthogonality_error = biorthogonality(&modes);
    Ok(SpectralData {
        dim: d,
        incidence: s,
        eigenvalues: eig.iter().map(|e| (e.value.re, e.value.im)).collect(),
        modes,
        theta1,
        theta2,
        alpha,
        jordan_size: 1,
        hypothesis_ok,
        threshold,
        expanding_dims,
        biorthogonality_error,
    })
}

/// Frequencies per unit volume: `freq_i = r₁[i] / Σ_j r₁[j] vol_j`, so that
/// `Σ_i freq_i vol_i = 1`.
pub fn tile_frequencies(sd: &SpectralData, sub: &Substitution) -> Vec<f64> {
    let r1 = &sd.perron().right;
    let total: f64 = r1.iter().zip(sub.prototiles()).map(|(r, p)| r * p.volume).sum();
    r1.iter().map(|r| r / total).collect()
}
