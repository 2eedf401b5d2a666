//! Substitution rules on rectangular prototiles and their combinatorics.
//!
//! Geometry lives on the integer lattice. A one-dimensional substitution is
//! embedded in the plane as a row of height-one cells: only the first axis is
//! expanded, and the second coordinate of every offset is zero.

use std::fmt;

use crate::error::{Error, Result};

/// Largest lattice coordinate any construction is allowed to produce.
pub const COORD_BOUND: i64 = 1 << 46;

#[derive(Debug, Clone, PartialEq)]
pub struct Prototile {
    /// One-based type id, as written in configuration files.
    pub id: usize,
    pub label: String,
    /// Side lengths in lattice units; the second entry is 1 when `d = 1`.
    pub extent: [u64; 2],
    pub volume: f64,
    pub color: String,
}

impl Prototile {
    pub fn new(id: usize, label: impl Into<String>, extent: [u64; 2], color: impl Into<String>) -> Self {
        Prototile {
            id,
            label: label.into(),
            extent,
            volume: (extent[0] * extent[1]) as f64,
            color: color.into(),
        }
    }

    pub fn cells(&self) -> u64 {
        self.extent[0] * self.extent[1]
    }
}

/// One child of a rule: a prototile index (zero-based) placed at an integer
/// offset inside the expanded parent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Placement {
    pub tile: usize,
    pub offset: [i64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Substitution {
    name: String,
    dim: usize,
    expansion: f64,
    prototiles: Vec<Prototile>,
    rules: Vec<Vec<Placement>>,
    asserted_nonperiodic: bool,
    provenance: String,
}

impl Substitution {
    /// Builds a substitution after structural checks (types, dimensions,
    /// extents). Geometry is checked separately by [`validate_geometry`].
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        expansion: f64,
        prototiles: Vec<Prototile>,
        rules: Vec<Vec<Placement>>,
    ) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Structure(format!("dimension must be 1 or 2, got {dim}")));
        }
        if expansion.is_nan() || expansion <= 1.0 || expansion.is_infinite() {
            return Err(Error::Structure(format!("expansion must exceed 1, got {expansion}")));
        }
        let m = prototiles.len();
        if m == 0 || m > 16 {
            return Err(Error::Structure(format!("need 1..=16 prototiles, got {m}")));
        }
        if rules.len() != m {
            return Err(Error::Structure(format!("{m} prototiles but {} rules", rules.len())));
        }
        for (i, p) in prototiles.iter().enumerate() {
            if p.id != i + 1 {
                return Err(Error::Structure(format!(
                    "prototile ids must be 1..={m} in order; position {} has id {}",
                    i + 1,
                    p.id
                )));
            }
            if p.extent[0] == 0 || p.extent[1] == 0 {
                return Err(Error::Structure(format!("prototile {} has a zero extent", p.id)));
            }
            if dim == 1 && p.extent[1] != 1 {
                return Err(Error::Structure(format!("prototile {} must have unit height in d=1", p.id)));
            }
            if p.volume.is_nan() || p.volume <= 0.0 {
                return Err(Error::Structure(format!("prototile {} has non-positive volume", p.id)));
            }
        }
        for (j, rule) in rules.iter().enumerate() {
            if rule.is_empty() {
                return Err(Error::Structure(format!("rule {} is empty", j + 1)));
            }
            for c in rule {
                if c.tile >= m {
                    return Err(Error::Structure(format!(
                        "rule {} references unknown type {}",
                        j + 1,
                        c.tile + 1
                    )));
                }
                if dim == 1 && c.offset[1] != 0 {
                    return Err(Error::Structure(format!("rule {} has a 2-d offset in d=1", j + 1)));
                }
                if c.offset.iter().any(|o| o.abs() > COORD_BOUND) {
                    return Err(Error::Overflow(format!("offset in rule {}", j + 1)));
                }
            }
        }
        Ok(Substitution {
            name: name.into(),
            dim,
            expansion,
            prototiles,
            rules,
            asserted_nonperiodic: false,
            provenance: String::new(),
        })
    }

    /// A one-dimensional substitution given by words over `0..m`, with unit
    /// provisional lengths laid out left to right. The expansion is set to the
    /// Perron root; use [`derive_lengths_1d`] and [`realize_lengths_1d`] to
    /// obtain a self-similar geometry.
    pub fn from_words(name: impl Into<String>, labels: &[&str], words: &[Vec<usize>]) -> Result<Self> {
        let m = words.len();
        if labels.len() != m {
            return Err(Error::Structure("one label per word required".into()));
        }
        let prototiles = labels
            .iter()
            .enumerate()
            .map(|(i, l)| Prototile::new(i + 1, *l, [1, 1], default_color(i)))
            .collect();
        let rules: Vec<Vec<Placement>> = words
            .iter()
            .map(|w| {
                w.iter()
                    .enumerate()
                    .map(|(k, &t)| Placement { tile: t, offset: [k as i64, 0] })
                    .collect()
            })
            .collect();
        let incidence = IncidenceMatrix::from_rules(m, &rules);
        let (lambda, _) = perron_left(&incidence)?;
        Substitution::new(name, 1, lambda, prototiles, rules)
    }

    pub fn with_provenance(mut self, asserted_nonperiodic: bool, provenance: impl Into<String>) -> Self {
        self.asserted_nonperiodic = asserted_nonperiodic;
        self.provenance = provenance.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn expansion(&self) -> f64 {
        self.expansion
    }

    /// The expansion as an integer, when the substitution lives on the lattice.
    pub fn lattice_expansion(&self) -> Option<i64> {
        let r = self.expansion.round();
        ((self.expansion - r).abs() < 1e-12 && r >= 2.0).then_some(r as i64)
    }

    pub fn prototiles(&self) -> &[Prototile] {
        &self.prototiles
    }

    pub fn num_types(&self) -> usize {
        self.prototiles.len()
    }

    pub fn rule(&self, j: usize) -> &[Placement] {
        &self.rules[j]
    }

    pub fn rules(&self) -> &[Vec<Placement>] {
        &self.rules
    }

    pub fn volumes(&self) -> Vec<f64> {
        self.prototiles.iter().map(|p| p.volume).collect()
    }

    pub fn asserted_nonperiodic(&self) -> bool {
        self.asserted_nonperiodic
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// Scale factors of an order-`k` supertile along each axis.
    pub fn level_scale(&self, k: u32) -> Result<[i64; 2]> {
        let l = self
            .lattice_expansion()
            .ok_or_else(|| Error::Structure("expansion is not an integer".into()))?;
        let s = l
            .checked_pow(k)
            .filter(|s| *s <= COORD_BOUND)
            .ok_or_else(|| Error::Overflow(format!("{l}^{k} exceeds coordinate bound")))?;
        Ok(if self.dim == 2 { [s, s] } else { [s, 1] })
    }
}

pub(crate) fn default_color(i: usize) -> String {
    const PALETTE: [&str; 8] = [
        "#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860", "#da8bc3", "#8c8c8c",
    ];
    PALETTE[i % PALETTE.len()].to_string()
}

/// Square nonnegative integer matrix, row-major. Entry `(i, j)` counts the
/// children of type `i` in the rule of type `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    n: usize,
    data: Vec<u64>,
}

impl IncidenceMatrix {
    pub fn from_rows(rows: &[Vec<u64>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        IncidenceMatrix { n, data: rows.concat() }
    }

    fn from_rules(m: usize, rules: &[Vec<Placement>]) -> Self {
        let mut data = vec![0u64; m * m];
        for (j, rule) in rules.iter().enumerate() {
            for c in rule {
                data[c.tile * m + j] += 1;
            }
        }
        IncidenceMatrix { n: m, data }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.data[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.data.chunks(self.n).map(<[u64]>::to_vec).collect()
    }

    pub fn to_f64(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j) as f64)
    }

    pub fn to_i128(&self) -> Vec<Vec<i128>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) as i128).collect())
            .collect()
    }

    /// `S v` in exact arithmetic.
    pub fn mul_vec_i128(&self, v: &[i128]) -> Option<Vec<i128>> {
        (0..self.n)
            .map(|i| {
                (0..self.n).try_fold(0i128, |acc, j| acc.checked_add((self.get(i, j) as i128).checked_mul(v[j])?))
            })
            .collect()
    }

    /// `Sᵗ v` in exact arithmetic.
    pub fn transpose_mul_vec_i128(&self, v: &[i128]) -> Option<Vec<i128>> {
        (0..self.n)
            .map(|j| {
                (0..self.n).try_fold(0i128, |acc, i| acc.checked_add((self.get(i, j) as i128).checked_mul(v[i])?))
            })
            .collect()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) as f64 * v[j]).sum())
            .collect()
    }

    pub fn transpose_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self.get(i, j) as f64 * v[i]).sum())
            .collect()
    }
}

pub fn build_incidence(sub: &Substitution) -> IncidenceMatrix {
    IncidenceMatrix::from_rules(sub.num_types(), &sub.rules)
}

/// Primitivity via boolean powers up to the Wielandt bound `m² − 2m + 2`.
pub fn is_primitive(s: &IncidenceMatrix) -> bool {
    let n = s.size();
    let base: Vec<bool> = s.data.iter().map(|&x| x > 0).collect();
    let bound = n * n + 2 - 2 * n;
    let mut power = base.clone();
    for _ in 0..bound {
        if power.iter().all(|&b| b) {
            return true;
        }
        let mut next = vec![false; n * n];
        for i in 0..n {
            for k in 0..n {
                if power[i * n + k] {
                    for j in 0..n {
                        next[i * n + j] |= base[k * n + j];
                    }
                }
            }
        }
        power = next;
    }
    power.iter().all(|&b| b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IssueKind {
    Overlap,
    Gap,
    OutOfBounds,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeometryIssue {
    /// One-based rule (parent type) id.
    pub rule: usize,
    pub cell: [i64; 2],
    pub kind: IssueKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GeometryReport {
    pub rules_checked: usize,
    pub issues: Vec<GeometryIssue>,
}

impl GeometryReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for GeometryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.issues.first() {
            None => write!(f, "{} rules tile their expanded supports exactly", self.rules_checked),
            Some(i) => {
                write!(f, "{:?} in rule {} at cell ({}, {})", i.kind, i.rule, i.cell[0], i.cell[1])?;
                if self.issues.len() > 1 {
                    write!(f, " (+{} more)", self.issues.len() - 1)?;
                }
                Ok(())
            }
        }
    }
}

/// Checks that every rule covers the expanded parent support exactly once.
pub fn validate_geometry(sub: &Substitution) -> Result<GeometryReport> {
    let mut report = GeometryReport::default();
    match (sub.dim, sub.lattice_expansion()) {
        (1, Some(l)) => {
            for j in 0..sub.num_types() {
                check_intervals(sub, j, l, &mut report);
            }
        }
        (1, None) => {
            for j in 0..sub.num_types() {
                check_lengths(sub, j, &mut report);
            }
        }
        (_, Some(l)) => {
            for j in 0..sub.num_types() {
                check_cells(sub, j, l, &mut report);
            }
        }
        (_, None) => return Err(Error::Structure("d=2 substitutions need an integer expansion".into())),
    }
    report.rules_checked = sub.num_types();
    if report.is_ok() {
        Ok(report)
    } else {
        Err(Error::Geometry(report))
    }
}

fn check_intervals(sub: &Substitution, j: usize, l: i64, report: &mut GeometryReport) {
    let end = l * sub.prototiles[j].extent[0] as i64;
    let mut pieces: Vec<(i64, i64)> = sub.rules[j]
        .iter()
        .map(|c| (c.offset[0], c.offset[0] + sub.prototiles[c.tile].extent[0] as i64))
        .collect();
    pieces.sort_unstable();
    let mut cursor = 0i64;
    for (a, b) in pieces {
        let issue = |x: i64, kind| GeometryIssue { rule: j + 1, cell: [x, 0], kind };
        if a < 0 || b > end {
            report.issues.push(issue(a.max(0).min(end), IssueKind::OutOfBounds));
        }
        if a > cursor {
            report.issues.push(issue(cursor, IssueKind::Gap));
        } else if a < cursor {
            report.issues.push(issue(a, IssueKind::Overlap));
        }
        cursor = cursor.max(b);
    }
    if cursor < end {
        report.issues.push(GeometryIssue { rule: j + 1, cell: [cursor, 0], kind: IssueKind::Gap });
    }
}

fn check_lengths(sub: &Substitution, j: usize, report: &mut GeometryReport) {
    let total: f64 = sub.rules[j].iter().map(|c| sub.prototiles[c.tile].volume).sum();
    let target = sub.expansion * sub.prototiles[j].volume;
    if (total - target).abs() > 1e-9 * target {
        let kind = if total < target { IssueKind::Gap } else { IssueKind::Overlap };
        report.issues.push(GeometryIssue { rule: j + 1, cell: [total.floor() as i64, 0], kind });
    }
}

fn check_cells(sub: &Substitution, j: usize, l: i64, report: &mut GeometryReport) {
    let w = l * sub.prototiles[j].extent[0] as i64;
    let h = l * sub.prototiles[j].extent[1] as i64;
    let mut occupancy = vec![0u32; (w * h) as usize];
    for c in &sub.rules[j] {
        let e = sub.prototiles[c.tile].extent;
        for dy in 0..e[1] as i64 {
            for dx in 0..e[0] as i64 {
                let (x, y) = (c.offset[0] + dx, c.offset[1] + dy);
                if x < 0 || y < 0 || x >= w || y >= h {
                    report.issues.push(GeometryIssue { rule: j + 1, cell: [x, y], kind: IssueKind::OutOfBounds });
                } else {
                    occupancy[(y * w + x) as usize] += 1;
                }
            }
        }
    }
    for y in 0..h {
        for x in 0..w {
            let kind = match occupancy[(y * w + x) as usize] {
                0 => IssueKind::Gap,
                1 => continue,
                _ => IssueKind::Overlap,
            };
            report.issues.push(GeometryIssue { rule: j + 1, cell: [x, y], kind });
        }
    }
}

/// Self-similar lengths for a one-dimensional substitution.
#[derive(Debug, Clone, PartialEq)]
pub struct Lengths1d {
    /// Left Perron eigenvector of `S`, scaled so that the shortest length is 1.
    pub lengths: Vec<f64>,
    pub lambda: f64,
}

fn perron_left(s: &IncidenceMatrix) -> Result<(f64, Vec<f64>)> {
    if !is_primitive(s) {
        return Err(Error::NotPrimitive);
    }
    let n = s.size();
    let mut x = vec![1.0; n];
    let mut lambda = 0.0;
    for _ in 0..200_000 {
        // (I + S)ᵗ shares the Perron vector and damps oscillating modes.
        let y: Vec<f64> = s.transpose_mul_vec(&x).iter().zip(&x).map(|(a, b)| a + b).collect();
        let norm: f64 = y.iter().sum();
        let next: Vec<f64> = y.iter().map(|v| v / norm).collect();
        let delta = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = next;
        lambda = norm / x.iter().sum::<f64>() - 1.0;
        if delta < 1e-16 {
            break;
        }
    }
    let sx = s.transpose_mul_vec(&x);
    let j = (0..n).max_by(|&a, &b| x[a].total_cmp(&x[b])).unwrap_or(0);
    lambda = lambda.max(0.0).max(sx[j] / x[j]);
    Ok((lambda, x))
}

/// Computes the lengths `ℓ` with `ℓ S = λ ℓ` that realize a d=1 substitution as
/// a self-similar tiling of the line.
pub fn derive_lengths_1d(sub: &Substitution) -> Result<Lengths1d> {
    if sub.dim != 1 {
        return Err(Error::Precondition("derive_lengths_1d needs d = 1".into()));
    }
    let s = build_incidence(sub);
    let (lambda, mut lengths) = perron_left(&s)?;
    let min = lengths.iter().copied().fold(f64::INFINITY, f64::min);
    lengths.iter_mut().for_each(|v| *v /= min);
    for j in 0..sub.num_types() {
        let total: f64 = sub.rules[j].iter().map(|c| lengths[c.tile]).sum();
        if (total - lambda * lengths[j]).abs() > 1e-9 * lambda * lengths[j] {
            return Err(Error::LengthMismatch(format!(
                "rule {} concatenates to {total}, expected {}",
                j + 1,
                lambda * lengths[j]
            )));
        }
    }
    if (lambda - sub.expansion).abs() > 1e-9 * lambda {
        return Err(Error::LengthMismatch(format!(
            "declared expansion {} differs from Perron root {lambda}",
            sub.expansion
        )));
    }
    Ok(Lengths1d { lengths, lambda })
}

/// Re-lays a d=1 substitution on the integer lattice with the given lengths,
/// children concatenated in rule order. Requires integral lengths and λ.
pub fn realize_lengths_1d(sub: &Substitution, lengths: &Lengths1d) -> Result<Substitution> {
    let near_int = |x: f64| (x - x.round()).abs() < 1e-9;
    if !lengths.lengths.iter().all(|&x| near_int(x)) || !near_int(lengths.lambda) {
        return Err(Error::LengthMismatch(format!(
            "lengths {:?} with λ = {} are not integral; no lattice realization",
            lengths.lengths, lengths.lambda
        )));
    }
    let prototiles: Vec<Prototile> = sub
        .prototiles
        .iter()
        .zip(&lengths.lengths)
        .map(|(p, &len)| Prototile::new(p.id, p.label.clone(), [len.round() as u64, 1], p.color.clone()))
        .collect();
    let rules = sub
        .rules
        .iter()
        .map(|rule| {
            let mut x = 0i64;
            rule.iter()
                .map(|c| {
                    let p = Placement { tile: c.tile, offset: [x, 0] };
                    x += prototiles[c.tile].extent[0] as i64;
                    p
                })
                .collect()
        })
        .collect();
    Ok(Substitution::new(sub.name.clone(), 1, lengths.lambda.round(), prototiles, rules)?
        .with_provenance(sub.asserted_nonperiodic, sub.provenance.clone()))
}
