//! The shipped example substitutions.

use crate::subst::{Placement, Prototile, Substitution};

pub const NAMES: [&str; 3] = ["table", "ab42", "sym95"];

fn place(tile: usize, x: i64, y: i64) -> Placement {
    Placement { tile, offset: [x, y] }
}

/// Table tiling: vertical and horizontal dominoes, expansion 2.
pub fn table() -> Substitution {
    let prototiles = vec![
        Prototile::new(1, "V", [1, 2], "#9a9a9a"),
        Prototile::new(2, "H", [2, 1], "#f4f4f4"),
    ];
    let (v, h) = (0, 1);
    let rules = vec![
        vec![place(h, 0, 0), place(h, 0, 1), place(v, 0, 2), place(v, 1, 2)],
        vec![place(v, 0, 0), place(v, 1, 0), place(h, 2, 0), place(h, 2, 1)],
    ];
    Substitution::new("table", 2, 2.0, prototiles, rules)
        .expect("table rule is well formed")
        .with_provenance(
            true,
            "standard table (domino) substitution from the literature; the child layout is the \
             conventional one and is aperiodic",
        )
}

/// a → aaab, b → abbb on unit intervals; S = [[3,1],[1,3]], λ = 4.
pub fn ab42() -> Substitution {
    let words = [vec![0, 0, 0, 1], vec![0, 1, 1, 1]];
    let prototiles = vec![Prototile::new(1, "a", [1, 1], "#4c72b0"), Prototile::new(2, "b", [1, 1], "#dd8452")];
    let rules = words
        .iter()
        .map(|w| w.iter().enumerate().map(|(k, &t)| place(t, k as i64, 0)).collect())
        .collect();
    Substitution::new("ab42", 1, 4.0, prototiles, rules)
        .expect("ab42 rule is well formed")
        .with_provenance(true, "constant-length substitution a->aaab, b->abbb; non-periodicity asserted")
}

/// Two-colour 3×3 substitution on unit squares; S = [[7,2],[2,7]], θ = (9, 5).
pub fn sym95() -> Substitution {
    let prototiles = vec![Prototile::new(1, "A", [1, 1], "#2f4b7c"), Prototile::new(2, "B", [1, 1], "#ffa600")];
    // (col, row) with origin at the lower-left corner; true = A.
    let layout_a = [
        (0, 0, true),
        (1, 0, true),
        (2, 0, false),
        (0, 1, true),
        (1, 1, false),
        (2, 1, true),
        (0, 2, true),
        (1, 2, true),
        (2, 2, true),
    ];
    let rule = |swap: bool| -> Vec<Placement> {
        layout_a
            .iter()
            .map(|&(x, y, is_a)| place(if is_a ^ swap { 0 } else { 1 }, x, y))
            .collect()
    };
    Substitution::new("sym95", 2, 3.0, prototiles, vec![rule(false), rule(true)])
        .expect("sym95 rule is well formed")
        .with_provenance(true, "3x3 two-colour rule, B is the colour swap of A; aperiodicity asserted, not proven")
}

pub fn by_name(name: &str) -> Option<Substitution> {
    match name {
        "table" => Some(table()),
        "ab42" => Some(ab42()),
        "sym95" => Some(sym95()),
        _ => None,
    }
}

pub fn all() -> Vec<Substitution> {
    vec![table(), ab42(), sym95()]
}
