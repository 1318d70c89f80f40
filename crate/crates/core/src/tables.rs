//! Factor spaces and multiway tables.
//!
//! Cells are stored flat in row-major order with the **last declared variable
//! varying fastest**; every matrix construction in the crate relies on this
//! one layout. Level 0 is always the baseline/reference category.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::fmath;

/// Ordered list of named categorical variables with their level counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactorSpace {
    vars: Vec<(String, usize)>,
    total_cells: usize,
}

impl FactorSpace {
    /// Builds a space from `(name, levels)` pairs. Names must be unique and
    /// nonempty, levels at least 2.
    pub fn new<S: AsRef<str>>(vars: &[(S, usize)]) -> Result<Self> {
        if vars.is_empty() {
            return Err(Error::InvalidSpace("no variables".to_string()));
        }
        let mut seen: Vec<&str> = Vec::new();
        let mut total = 1usize;
        for (name, levels) in vars {
            let name = name.as_ref();
            if name.is_empty() {
                return Err(Error::InvalidSpace("empty variable name".to_string()));
            }
            if seen.contains(&name) {
                return Err(Error::InvalidSpace(alloc::format!(
                    "duplicate variable `{name}`"
                )));
            }
            if *levels < 2 {
                return Err(Error::InvalidSpace(alloc::format!(
                    "variable `{name}` needs at least 2 levels"
                )));
            }
            seen.push(name);
            total *= *levels;
        }
        Ok(FactorSpace {
            vars: vars
                .iter()
                .map(|(n, l)| (n.as_ref().to_string(), *l))
                .collect(),
            total_cells: total,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn total_cells(&self) -> usize {
        self.total_cells
    }

    pub fn name(&self, var: usize) -> &str {
        &self.vars[var].0
    }

    pub fn levels(&self, var: usize) -> usize {
        self.vars[var].1
    }

    pub fn var_index(&self, name: &str) -> Result<usize> {
        self.vars
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    /// Maps variable names to indices, rejecting unknown names.
    pub fn resolve<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<usize>> {
        names.iter().map(|n| self.var_index(n.as_ref())).collect()
    }

    /// Flat index of a full level assignment (last variable fastest).
    pub fn cell_index(&self, levels: &[usize]) -> usize {
        debug_assert_eq!(levels.len(), self.vars.len());
        let mut idx = 0;
        for (v, &(_, l)) in self.vars.iter().enumerate() {
            debug_assert!(levels[v] < l);
            idx = idx * l + levels[v];
        }
        idx
    }

    /// Level assignment of a flat cell index.
    pub fn cell_levels(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0usize; self.vars.len()];
        for v in (0..self.vars.len()).rev() {
            let l = self.vars[v].1;
            out[v] = index % l;
            index /= l;
        }
        out
    }

    /// Validates a variable subset: indices in range, strictly increasing.
    pub(crate) fn check_subset(&self, vars: &[usize]) -> Result<()> {
        for (i, &v) in vars.iter().enumerate() {
            if v >= self.vars.len() {
                return Err(Error::Spec(alloc::format!("variable index {v} out of range")));
            }
            if i > 0 && vars[i - 1] >= v {
                return Err(Error::Spec(
                    "variable subset must be strictly increasing".to_string(),
                ));
            }
        }
        Ok(())
    }

    /// Space over a subset of variables, keeping declaration order.
    pub fn subspace(&self, keep: &[usize]) -> Result<FactorSpace> {
        self.check_subset(keep)?;
        if keep.is_empty() {
            return Err(Error::Spec("subset must be nonempty".to_string()));
        }
        let vars: Vec<(String, usize)> = keep.iter().map(|&v| self.vars[v].clone()).collect();
        FactorSpace::new(&vars)
    }
}

/// Whether the values of a [`Table`] are raw counts or probabilities.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableKind {
    Counts,
    Probabilities,
}

/// Nonnegative value per cell over a [`FactorSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    space: FactorSpace,
    values: Vec<f64>,
    kind: TableKind,
}

impl Table {
    pub fn new(space: FactorSpace, values: Vec<f64>, kind: TableKind) -> Result<Self> {
        if values.len() != space.total_cells() {
            return Err(Error::Spec(alloc::format!(
                "expected {} cells, got {}",
                space.total_cells(),
                values.len()
            )));
        }
        for (i, &v) in values.iter().enumerate() {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::Spec(alloc::format!(
                    "cell {i} must be a finite nonnegative number (got {v})"
                )));
            }
        }
        if kind == TableKind::Probabilities {
            let total: f64 = values.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::Spec(alloc::format!(
                    "probabilities must sum to 1 (sum {total})"
                )));
            }
        }
        Ok(Table {
            space,
            values,
            kind,
        })
    }

    pub fn probabilities(space: FactorSpace, values: Vec<f64>) -> Result<Self> {
        Table::new(space, values, TableKind::Probabilities)
    }

    pub fn counts(space: FactorSpace, values: Vec<f64>) -> Result<Self> {
        Table::new(space, values, TableKind::Counts)
    }

    pub fn uniform(space: FactorSpace) -> Self {
        let k = space.total_cells();
        Table {
            space,
            values: vec![1.0 / k as f64; k],
            kind: TableKind::Probabilities,
        }
    }

    /// Strictly positive random probability table; cells are bounded away
    /// from zero by construction. Used by verification suites and tests.
    pub fn random_positive<R: Rng + ?Sized>(space: FactorSpace, rng: &mut R) -> Self {
        let k = space.total_cells();
        let mut values: Vec<f64> = (0..k)
            .map(|_| fmath::exp(rng.gen_range(-1.5..1.5)))
            .collect();
        let total: f64 = values.iter().sum();
        for v in &mut values {
            *v /= total;
        }
        Table {
            space,
            values,
            kind: TableKind::Probabilities,
        }
    }

    pub fn space(&self) -> &FactorSpace {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> TableKind {
        self.kind
    }

    pub fn value(&self, levels: &[usize]) -> f64 {
        self.values[self.space.cell_index(levels)]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.values.iter().all(|&v| v > 0.0)
    }

    /// Sums out every variable not in `keep`; kind is preserved.
    pub fn marginalize(&self, keep: &[usize]) -> Result<Table> {
        let sub = self.space.subspace(keep)?;
        let mut values = vec![0.0; sub.total_cells()];
        let mut kept = vec![0usize; keep.len()];
        for (cell, &v) in self.values.iter().enumerate() {
            let levels = self.space.cell_levels(cell);
            for (j, &kv) in keep.iter().enumerate() {
                kept[j] = levels[kv];
            }
            values[sub.cell_index(&kept)] += v;
        }
        Ok(Table {
            space: sub,
            values,
            kind: self.kind,
        })
    }

    /// Conditional distribution of the remaining variables given a partial
    /// assignment. Accepts counts or probabilities; returns probabilities.
    pub fn condition(&self, given: &[(usize, usize)]) -> Result<Table> {
        for &(v, level) in given {
            if v >= self.space.num_vars() {
                return Err(Error::Spec(alloc::format!("variable index {v} out of range")));
            }
            if level >= self.space.levels(v) {
                return Err(Error::LevelOutOfRange {
                    variable: self.space.name(v).to_string(),
                    level,
                });
            }
        }
        let mut fixed = vec![None; self.space.num_vars()];
        for &(v, level) in given {
            if fixed[v].is_some() {
                return Err(Error::Spec(alloc::format!(
                    "variable `{}` conditioned twice",
                    self.space.name(v)
                )));
            }
            fixed[v] = Some(level);
        }
        let remaining: Vec<usize> = (0..self.space.num_vars())
            .filter(|v| fixed[*v].is_none())
            .collect();
        if remaining.is_empty() {
            return Err(Error::Spec(
                "conditioning must leave at least one free variable".to_string(),
            ));
        }
        let sub = self.space.subspace(&remaining)?;
        let mut values = vec![0.0; sub.total_cells()];
        let mut kept = vec![0usize; remaining.len()];
        for (cell, &v) in self.values.iter().enumerate() {
            let levels = self.space.cell_levels(cell);
            if given.iter().any(|&(gv, gl)| levels[gv] != gl) {
                continue;
            }
            for (j, &rv) in remaining.iter().enumerate() {
                kept[j] = levels[rv];
            }
            values[sub.cell_index(&kept)] += v;
        }
        let mass: f64 = values.iter().sum();
        if mass <= 0.0 {
            return Err(Error::DegenerateConditioning);
        }
        for v in &mut values {
            *v /= mass;
        }
        Ok(Table {
            space: sub,
            values,
            kind: TableKind::Probabilities,
        })
    }

    /// Divides counts by their total, switching the kind to probabilities.
    pub fn normalize(&self) -> Result<Table> {
        if self.kind != TableKind::Counts {
            return Err(Error::KindMismatch { expected: "counts" });
        }
        let total = self.total();
        if total <= 0.0 {
            return Err(Error::DegenerateTable);
        }
        let values = self.values.iter().map(|&v| v / total).collect();
        Ok(Table {
            space: self.space.clone(),
            values,
            kind: TableKind::Probabilities,
        })
    }
}
