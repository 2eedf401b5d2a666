//! JSON configuration of substitutions.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subst::{build_incidence, is_primitive, validate_geometry, Placement, Prototile, Substitution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrototileConfig {
    pub id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// `[w]` in d = 1, `[w, h]` in d = 2.
    pub extent: Vec<u64>,
    pub color: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChildConfig {
    #[serde(rename = "type")]
    pub tile: usize,
    pub offset: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleConfig {
    pub parent: usize,
    pub children: Vec<ChildConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubstitutionConfig {
    pub name: String,
    pub dimension: usize,
    pub expansion: i64,
    pub prototiles: Vec<PrototileConfig>,
    pub rules: Vec<RuleConfig>,
    #[serde(default)]
    pub asserted_nonperiodic: bool,
    #[serde(default)]
    pub provenance: String,
}

fn vector(v: &[i64], dim: usize, what: &str) -> Result<[i64; 2]> {
    match (dim, v) {
        (1, [x]) => Ok([*x, 0]),
        (2, [x, y]) => Ok([*x, *y]),
        _ => Err(Error::Parse(format!("{what} has {} components in dimension {dim}", v.len()))),
    }
}

impl SubstitutionConfig {
    /// Builds the substitution and runs geometry and primitivity checks.
    pub fn build(&self) -> Result<Substitution> {
        let dim = self.dimension;
        if dim != 1 && dim != 2 {
            return Err(Error::Parse(format!("dimension must be 1 or 2, got {dim}")));
        }
        if self.expansion < 2 {
            return Err(Error::Parse(format!("expansion must be an integer ≥ 2, got {}", self.expansion)));
        }
        let m = self.prototiles.len();
        let mut prototiles: Vec<Option<Prototile>> = vec![None; m];
        for p in &self.prototiles {
            if p.id == 0 || p.id > m || prototiles[p.id - 1].is_some() {
                return Err(Error::Parse(format!("prototile ids must be 1..{m} without repeats, got {}", p.id)));
            }
            let e = p.extent.iter().map(|&x| x as i64).collect::<Vec<_>>();
            let e = vector(&e, dim, &format!("extent of prototile {}", p.id))?;
            let label = p.label.clone().unwrap_or_else(|| p.id.to_string());
            prototiles[p.id - 1] = Some(Prototile::new(p.id, label, [e[0] as u64, e[1].max(1) as u64], p.color.clone()));
        }
        let prototiles: Vec<Prototile> = prototiles.into_iter().map(|p| p.expect("ids checked")).collect();
        let mut rules: Vec<Option<Vec<Placement>>> = vec![None; m];
        for r in &self.rules {
            if r.parent == 0 || r.parent > m || rules[r.parent - 1].is_some() {
                return Err(Error::Parse(format!("rule parent {} is out of range or repeated", r.parent)));
            }
            let children = r
                .children
                .iter()
                .map(|c| {
                    if c.tile == 0 || c.tile > m {
                        return Err(Error::Parse(format!("child type {} in rule {} out of range", c.tile, r.parent)));
                    }
                    Ok(Placement { tile: c.tile - 1, offset: vector(&c.offset, dim, "child offset")? })
                })
                .collect::<Result<Vec<_>>>()?;
            rules[r.parent - 1] = Some(children);
        }
        let rules = rules
            .into_iter()
            .enumerate()
            .map(|(j, r)| r.ok_or_else(|| Error::Parse(format!("no rule for prototile {}", j + 1))))
            .collect::<Result<Vec<_>>>()?;
        let sub = Substitution::new(self.name.clone(), dim, self.expansion as f64, prototiles, rules)?
            .with_provenance(self.asserted_nonperiodic, self.provenance.clone());
        validate_geometry(&sub)?;
        if !is_primitive(&build_incidence(&sub)) {
            return Err(Error::NotPrimitive);
        }
        Ok(sub)
    }

    pub fn from_substitution(sub: &Substitution) -> Result<Self> {
        let dim = sub.dim();
        let expansion = sub
            .lattice_expansion()
            .ok_or_else(|| Error::Precondition("only integer expansions can be written as configs".into()))?;
        let cut = |v: [i64; 2]| v[..dim].to_vec();
        Ok(SubstitutionConfig {
            name: sub.name().to_string(),
            dimension: dim,
            expansion,
            prototiles: sub
                .prototiles()
                .iter()
                .map(|p| PrototileConfig {
                    id: p.id,
                    label: (p.label != p.id.to_string()).then(|| p.label.clone()),
                    extent: p.extent[..dim].to_vec(),
                    color: p.color.clone(),
                })
                .collect(),
            rules: sub
                .rules()
                .iter()
                .enumerate()
                .map(|(j, r)| RuleConfig {
                    parent: j + 1,
                    children: r.iter().map(|c| ChildConfig { tile: c.tile + 1, offset: cut(c.offset) }).collect(),
                })
                .collect(),
            asserted_nonperiodic: sub.asserted_nonperiodic(),
            provenance: sub.provenance().to_string(),
        })
    }
}

pub fn parse_config_str(text: &str) -> Result<Substitution> {
    let cfg: SubstitutionConfig = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    cfg.build()
}

pub fn parse_config(path: &Path) -> Result<Substitution> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

/// Canonical text: pretty JSON with a trailing newline.
pub fn emit_config(sub: &Substitution) -> Result<String> {
    let cfg = SubstitutionConfig::from_substitution(sub)?;
    Ok(serde_json::to_string_pretty(&cfg)? + "\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins;

    #[test]
    fn builtins_round_trip() {
        for sub in builtins::all() {
            let text = emit_config(&sub).unwrap();
            let back = parse_config_str(&text).unwrap();
            assert_eq!(emit_config(&back).unwrap(), text);
            assert_eq!(build_incidence(&back), build_incidence(&sub));
        }
        let t = parse_config_str(&emit_config(&builtins::table()).unwrap()).unwrap();
        assert_eq!(build_incidence(&t).rows(), vec![vec![2, 2], vec![2, 2]]);
    }

    fn doubling_2d(children: &str) -> String {
        format!(
            r#"{{"name":"x","dimension":2,"expansion":2,
               "prototiles":[{{"id":1,"extent":[1,1],"color":"black"}},{{"id":2,"extent":[1,1],"color":"white"}}],
               "rules":[{{"parent":1,"children":{children}}},
                        {{"parent":2,"children":[{{"type":1,"offset":[0,0]}},{{"type":2,"offset":[1,0]}},{{"type":1,"offset":[0,1]}},{{"type":2,"offset":[1,1]}}]}}]}}"#
        )
    }

    #[test]
    fn gap_is_reported_at_cell() {
        let text = doubling_2d(r#"[{"type":1,"offset":[0,0]},{"type":2,"offset":[0,1]},{"type":2,"offset":[1,1]}]"#);
        match parse_config_str(&text) {
            Err(Error::Geometry(rep)) => {
                assert!(rep.issues.iter().any(|i| i.rule == 1 && i.cell == [1, 0]));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reducible_is_rejected() {
        let text = r#"{"name":"r","dimension":1,"expansion":2,
            "prototiles":[{"id":1,"extent":[1],"color":"black"},{"id":2,"extent":[1],"color":"white"}],
            "rules":[{"parent":1,"children":[{"type":1,"offset":[0]},{"type":1,"offset":[1]}]},
                     {"parent":2,"children":[{"type":2,"offset":[0]},{"type":2,"offset":[1]}]}]}"#;
        assert!(matches!(parse_config_str(text), Err(Error::NotPrimitive)));
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(parse_config_str("{"), Err(Error::Parse(_))));
        assert!(matches!(parse_config_str(r#"{"name":"x"}"#), Err(Error::Parse(_))));
        let text = doubling_2d(r#"[{"type":3,"offset":[0,0]}]"#);
        assert!(matches!(parse_config_str(&text), Err(Error::Parse(_))));
        let text = doubling_2d(r#"[{"type":1,"offset":[0]}]"#);
        assert!(matches!(parse_config_str(&text), Err(Error::Parse(_))));
    }
}
