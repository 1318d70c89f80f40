//! File formats: counts as CSV (one row per observed cell) and model
//! specifications as JSON with variables referenced by name.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use mloglin_core::{
    Coding, FactorSpace, LinearConstraint, MediationRoles, MllSpec, MllTerm, ModelSpec, Table,
    TermIndex, ThetaVector,
};

use crate::error::CliError;

/// Reads a counts CSV whose header names every variable of `space` (in any
/// order) plus a final `count` column. Cells absent from the file are zero.
pub fn read_counts_csv(path: &Path, space: &FactorSpace) -> Result<Table, CliError> {
    let file = fs::File::open(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let name = path.display();

    let headers = rdr
        .headers()
        .map_err(|e| CliError::input(format!("{name}: {e}")))?
        .clone();
    let mut var_cols = vec![usize::MAX; space.num_vars()];
    let mut count_col = None;
    let mut unknown = Vec::new();
    for (col, h) in headers.iter().enumerate() {
        if h == "count" {
            if count_col.is_some() {
                return Err(CliError::input(format!("{name} line 1: duplicate `count` column")));
            }
            count_col = Some(col);
        } else if let Ok(v) = space.var_index(h) {
            if var_cols[v] != usize::MAX {
                return Err(CliError::input(format!("{name} line 1: duplicate column `{h}`")));
            }
            var_cols[v] = col;
        } else {
            unknown.push(h.to_string());
        }
    }
    let count_col = count_col.ok_or_else(|| {
        let hint = if unknown.is_empty() {
            String::new()
        } else {
            format!(" (unexpected column `{}`)", unknown.join("`, `"))
        };
        CliError::input(format!("{name} line 1: missing `count` column{hint}"))
    })?;
    if let Some(h) = unknown.first() {
        return Err(CliError::input(format!("{name} line 1: unknown column `{h}`")));
    }
    for (v, &col) in var_cols.iter().enumerate() {
        if col == usize::MAX {
            return Err(CliError::input(format!(
                "{name} line 1: missing column for variable `{}`",
                space.name(v)
            )));
        }
    }

    let mut values = vec![0.0f64; space.total_cells()];
    let mut seen = vec![false; space.total_cells()];
    for record in rdr.records() {
        let record = record.map_err(|e| CliError::input(format!("{name}: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != headers.len() {
            return Err(CliError::input(format!(
                "{name} line {line}: expected {} fields, found {}",
                headers.len(),
                record.len()
            )));
        }
        let mut levels = vec![0usize; space.num_vars()];
        for (v, &col) in var_cols.iter().enumerate() {
            let field = &record[col];
            let level: usize = field.parse().map_err(|_| {
                CliError::input(format!(
                    "{name} line {line}: level `{field}` for `{}` is not a nonnegative integer",
                    space.name(v)
                ))
            })?;
            if level >= space.levels(v) {
                return Err(CliError::input(format!(
                    "{name} line {line}: level {level} out of range for `{}` (levels {})",
                    space.name(v),
                    space.levels(v)
                )));
            }
            levels[v] = level;
        }
        let field = &record[count_col];
        let count: f64 = field.parse().map_err(|_| {
            CliError::input(format!("{name} line {line}: count `{field}` is not a number"))
        })?;
        if !count.is_finite() || count < 0.0 {
            return Err(CliError::input(format!(
                "{name} line {line}: count {count} must be finite and nonnegative"
            )));
        }
        let idx = space.cell_index(&levels);
        if seen[idx] {
            return Err(CliError::input(format!(
                "{name} line {line}: duplicate row for cell {levels:?}"
            )));
        }
        seen[idx] = true;
        values[idx] = count;
    }

    Table::counts(space.clone(), values).map_err(CliError::from)
}

/// Writes every cell of `table` in row-major order with a trailing `count`
/// column; integral counts print without a decimal point.
pub fn write_counts_csv<W: Write>(mut w: W, table: &Table) -> Result<(), CliError> {
    let space = table.space();
    let mut header: Vec<&str> = (0..space.num_vars()).map(|v| space.name(v)).collect();
    header.push("count");
    writeln!(w, "{}", header.join(","))?;
    for (idx, &v) in table.values().iter().enumerate() {
        let levels = space.cell_levels(idx);
        for l in &levels {
            write!(w, "{l},")?;
        }
        if v.fract() == 0.0 && v.abs() < 1e15 {
            writeln!(w, "{}", v as i64)?;
        } else {
            writeln!(w, "{v:.12e}")?;
        }
    }
    Ok(())
}

fn default_coding() -> String {
    "Rc".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariableDef {
    pub name: String,
    pub levels: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TermDef {
    pub effect: Vec<String>,
    pub margin: Vec<String>,
    #[serde(default = "default_coding")]
    pub coding: String,
}

/// Names a single λ coordinate, or a whole term block when `levels` is
/// omitted (allowed for zero constraints only).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoordRef {
    pub effect: Vec<String>,
    pub margin: Vec<String>,
    #[serde(default)]
    pub levels: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearDef {
    pub coords: Vec<CoordRef>,
    pub weights: Vec<f64>,
}

/// A deleted coordinate always lives on a full-margin term, so the effect
/// set plus a level combination identifies it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeletedDef {
    pub effect: Vec<String>,
    pub levels: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RolesDef {
    pub exposure: String,
    pub mediators: Vec<String>,
    pub response: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecFile {
    pub variables: Vec<VariableDef>,
    /// Empty means the saturated joint specification: every interaction in
    /// the full margin.
    #[serde(default)]
    pub terms: Vec<TermDef>,
    #[serde(default)]
    pub deleted: Vec<DeletedDef>,
    #[serde(default)]
    pub zero_constraints: Vec<CoordRef>,
    #[serde(default)]
    pub linear_constraints: Vec<LinearDef>,
    #[serde(default)]
    pub roles: Option<RolesDef>,
    /// Joint log-linear parameters for `simulate`, length cells − 1.
    #[serde(default)]
    pub theta: Option<Vec<f64>>,
    /// Coding of `theta` and of default saturated terms.
    #[serde(default)]
    pub coding: Option<String>,
}

pub fn parse_coding(s: &str) -> Result<Coding, CliError> {
    match s {
        "Rc" | "rc" | "RC" => Ok(Coding::Rc),
        "Ac" | "ac" | "AC" => Ok(Coding::Ac),
        _ => Err(CliError::input(format!("unknown coding `{s}` (use Rc or Ac)"))),
    }
}

impl SpecFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn space(&self) -> Result<FactorSpace, CliError> {
        let vars: Vec<(&str, usize)> = self
            .variables
            .iter()
            .map(|v| (v.name.as_str(), v.levels))
            .collect();
        FactorSpace::new(&vars).map_err(CliError::from)
    }

    fn resolve_vars(&self, space: &FactorSpace, names: &[String]) -> Result<Vec<usize>, CliError> {
        let mut idx = Vec::with_capacity(names.len());
        for n in names {
            idx.push(space.var_index(n)?);
        }
        idx.sort_unstable();
        if idx.windows(2).any(|w| w[0] == w[1]) {
            return Err(CliError::input(format!("repeated variable in {names:?}")));
        }
        Ok(idx)
    }

    fn base_coding(&self) -> Result<Coding, CliError> {
        self.coding.as_deref().map_or(Ok(Coding::Rc), parse_coding)
    }

    /// Mixed-radix local coordinate of a non-baseline level combination,
    /// last effect variable fastest.
    fn local_coord(
        space: &FactorSpace,
        effect: &[usize],
        levels: &[usize],
    ) -> Result<usize, CliError> {
        if levels.len() != effect.len() {
            return Err(CliError::input(format!(
                "levels {levels:?} do not match effect arity {}",
                effect.len()
            )));
        }
        let mut local = 0usize;
        for (&v, &l) in effect.iter().zip(levels) {
            if l == 0 || l >= space.levels(v) {
                return Err(CliError::input(format!(
                    "level {l} for `{}` must lie in 1..{}",
                    space.name(v),
                    space.levels(v)
                )));
            }
            local = local * (space.levels(v) - 1) + (l - 1);
        }
        Ok(local)
    }

    pub fn mll_spec(&self, space: &FactorSpace) -> Result<MllSpec, CliError> {
        let coding = self.base_coding()?;
        let mut terms = Vec::new();
        if self.terms.is_empty() {
            let all: Vec<usize> = (0..space.num_vars()).collect();
            let index = TermIndex::new(space);
            for (_, term) in index.terms() {
                terms.push(MllTerm::new(term.vars(), &all, coding)?);
            }
        } else {
            for t in &self.terms {
                let effect = self.resolve_vars(space, &t.effect)?;
                let margin = self.resolve_vars(space, &t.margin)?;
                terms.push(MllTerm::new(&effect, &margin, parse_coding(&t.coding)?)?);
            }
        }

        let all: Vec<usize> = (0..space.num_vars()).collect();
        let mut deleted = Vec::new();
        for d in &self.deleted {
            let effect = self.resolve_vars(space, &d.effect)?;
            let ti = terms
                .iter()
                .position(|t| t.effect() == effect.as_slice() && t.margin() == all.as_slice())
                .ok_or_else(|| {
                    CliError::input(format!(
                        "deleted coordinate {:?} has no full-margin term",
                        d.effect
                    ))
                })?;
            deleted.push((ti, Self::local_coord(space, &effect, &d.levels)?));
        }

        MllSpec::new(space.clone(), terms, deleted).map_err(CliError::from)
    }

    /// Retained coordinate indices named by a `CoordRef`; a missing `levels`
    /// selects the whole term block.
    fn coord_indices(
        &self,
        space: &FactorSpace,
        mll: &MllSpec,
        r: &CoordRef,
    ) -> Result<Vec<usize>, CliError> {
        let effect = self.resolve_vars(space, &r.effect)?;
        let margin = self.resolve_vars(space, &r.margin)?;
        let ti = mll
            .terms()
            .iter()
            .position(|t| t.effect() == effect.as_slice() && t.margin() == margin.as_slice())
            .ok_or_else(|| {
                CliError::input(format!(
                    "no term with effect {:?} in margin {:?}",
                    r.effect, r.margin
                ))
            })?;
        let pick = |local: usize| -> Result<usize, CliError> {
            mll.retained()
                .iter()
                .position(|&(t, l)| t == ti && l == local)
                .ok_or_else(|| {
                    CliError::input(format!(
                        "coordinate {:?}{:?} is deleted from the parameter vector",
                        r.effect, r.levels
                    ))
                })
        };
        match &r.levels {
            Some(levels) => Ok(vec![pick(Self::local_coord(space, &effect, levels)?)?]),
            None => {
                let coords: Vec<usize> = mll
                    .retained()
                    .iter()
                    .enumerate()
                    .filter(|(_, &(t, _))| t == ti)
                    .map(|(i, _)| i)
                    .collect();
                if coords.is_empty() {
                    return Err(CliError::input(format!(
                        "term {:?} has no retained coordinates",
                        r.effect
                    )));
                }
                Ok(coords)
            }
        }
    }

    pub fn model_spec(&self, space: &FactorSpace) -> Result<ModelSpec, CliError> {
        let mll = self.mll_spec(space)?;
        let mut zero = Vec::new();
        for z in &self.zero_constraints {
            zero.extend(self.coord_indices(space, &mll, z)?);
        }
        let mut linear = Vec::new();
        for l in &self.linear_constraints {
            let mut coords = Vec::new();
            for c in &l.coords {
                let found = self.coord_indices(space, &mll, c)?;
                if found.len() != 1 {
                    return Err(CliError::input(
                        "linear constraint coordinates need explicit levels".to_string(),
                    ));
                }
                coords.push(found[0]);
            }
            linear.push(LinearConstraint::new(coords, l.weights.clone())?);
        }
        ModelSpec::new(mll, zero, linear).map_err(CliError::from)
    }

    pub fn mediation_roles(&self, space: &FactorSpace) -> Result<MediationRoles, CliError> {
        let roles = self
            .roles
            .as_ref()
            .ok_or_else(|| CliError::input("spec json has no `roles` section".to_string()))?;
        let exposure = space.var_index(&roles.exposure)?;
        let response = space.var_index(&roles.response)?;
        let mut mediators = Vec::new();
        for m in &roles.mediators {
            mediators.push(space.var_index(m)?);
        }
        Ok(MediationRoles::new(exposure, &mediators, response))
    }

    /// The generating table for `simulate`: `theta` interpreted under the
    /// file's coding.
    pub fn theta_table(&self, space: &FactorSpace) -> Result<Table, CliError> {
        let theta = self
            .theta
            .as_ref()
            .ok_or_else(|| CliError::input("spec json has no `theta` array".to_string()))?;
        let tv = ThetaVector::new(theta.clone(), self.base_coding()?)?;
        mloglin_core::p_from_theta(&tv, space).map_err(CliError::from)
    }
}
