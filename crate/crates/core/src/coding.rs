//! Contrast matrices H and indicator designs G for the Rc and Ac codings.
//!
//! Parameters are indexed by [`TermIndex`]: interaction sets ordered by size
//! then lexicographically, and within a set, non-baseline level combinations
//! with the last variable fastest. The pair (H, G) satisfies H·G = I and
//! H·1 = 0 exactly in integer arithmetic, so θ = H log p and log p = Gθ + c
//! are mutual inverses on normalized tables.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::tables::FactorSpace;

/// Coding of a categorical variable's contrasts.
///
/// `Rc` contrasts every level against the reference category 0; `Ac`
/// contrasts adjacent categories. They coincide for binary variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coding {
    Rc,
    Ac,
}

/// `(levels−1) × levels` contrast matrix; rows sum to 0.
pub fn contrast_matrix(levels: usize, coding: Coding) -> Result<Matrix> {
    if levels < 2 {
        return Err(Error::Spec("contrast needs at least 2 levels".to_string()));
    }
    let mut c = Matrix::zeros(levels - 1, levels);
    for j in 1..levels {
        match coding {
            Coding::Rc => {
                c[(j - 1, 0)] = -1.0;
                c[(j - 1, j)] = 1.0;
            }
            Coding::Ac => {
                c[(j - 1, j - 1)] = -1.0;
                c[(j - 1, j)] = 1.0;
            }
        }
    }
    Ok(c)
}

/// One interaction set with its slice of the parameter vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Term {
    vars: Vec<usize>,
    offset: usize,
    len: usize,
}

impl Term {
    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Enumeration of all nonempty interaction sets of a [`FactorSpace`],
/// ordered by size then lexicographically on variable positions. Total
/// parameter count is `total_cells − 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TermIndex {
    terms: Vec<Term>,
    total: usize,
    level_counts: Vec<usize>,
}

fn push_combinations(d: usize, size: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == size {
        out.push(cur.clone());
        return;
    }
    for v in start..d {
        cur.push(v);
        push_combinations(d, size, v + 1, cur, out);
        cur.pop();
    }
}

impl TermIndex {
    pub fn new(space: &FactorSpace) -> TermIndex {
        let d = space.num_vars();
        let mut subsets: Vec<Vec<usize>> = Vec::new();
        for size in 1..=d {
            push_combinations(d, size, 0, &mut Vec::new(), &mut subsets);
        }
        let mut terms = Vec::with_capacity(subsets.len());
        let mut offset = 0;
        for vars in subsets {
            let len: usize = vars.iter().map(|&v| space.levels(v) - 1).product();
            terms.push(Term {
                vars,
                offset,
                len,
            });
            offset += len;
        }
        TermIndex {
            terms,
            total: offset,
            level_counts: (0..d).map(|v| space.levels(v)).collect(),
        }
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn term(&self, t: usize) -> &Term {
        &self.terms[t]
    }

    pub fn terms(&self) -> impl Iterator<Item = (usize, &Term)> {
        self.terms.iter().enumerate()
    }

    /// Total number of parameters, `total_cells − 1`.
    pub fn total_params(&self) -> usize {
        self.total
    }

    /// Index of the term with exactly these variables (sorted ascending).
    pub fn find_term(&self, vars: &[usize]) -> Option<usize> {
        self.terms.iter().position(|t| t.vars == vars)
    }

    /// Global coordinate of `(term, x_I)`; levels must be non-baseline
    /// (≥ 1) and listed in the term's variable order.
    pub fn coord(&self, term: usize, levels: &[usize]) -> Result<usize> {
        let t = &self.terms[term];
        if levels.len() != t.vars.len() {
            return Err(Error::Spec(alloc::format!(
                "term has {} variables, got {} levels",
                t.vars.len(),
                levels.len()
            )));
        }
        let mut local = 0;
        for (j, &v) in t.vars.iter().enumerate() {
            let l = self.level_counts[v];
            if levels[j] == 0 || levels[j] >= l {
                return Err(Error::Spec(alloc::format!(
                    "level {} out of non-baseline range 1..{} for variable {}",
                    levels[j],
                    l,
                    v
                )));
            }
            local = local * (l - 1) + (levels[j] - 1);
        }
        Ok(t.offset + local)
    }

    /// Inverse of [`coord`](Self::coord): term index and levels.
    pub fn decode(&self, coord: usize) -> (usize, Vec<usize>) {
        let term = self
            .terms
            .iter()
            .position(|t| coord < t.offset + t.len)
            .expect("coordinate out of range");
        let t = &self.terms[term];
        let mut local = coord - t.offset;
        let mut levels = vec![0usize; t.vars.len()];
        for (j, &v) in t.vars.iter().enumerate().rev() {
            let l = self.level_counts[v] - 1;
            levels[j] = local % l + 1;
            local /= l;
        }
        (term, levels)
    }

    /// Human-readable coordinate label, e.g. `X*Y(1,2)`.
    pub fn coord_label(&self, space: &FactorSpace, coord: usize) -> String {
        let (term, levels) = self.decode(coord);
        let vars = self.terms[term].vars();
        let mut s = String::new();
        for (j, &v) in vars.iter().enumerate() {
            if j > 0 {
                s.push('*');
            }
            s.push_str(space.name(v));
        }
        s.push('(');
        for (j, &l) in levels.iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            s.push_str(&alloc::format!("{l}"));
        }
        s.push(')');
        s
    }
}

/// Per-variable factor rows used to assemble H and G columns by products
/// over variables in declaration order.
fn h_factor(space: &FactorSpace, coding: Coding, var: usize, in_term: Option<usize>) -> Vec<f64> {
    let l = space.levels(var);
    let mut row = vec![0.0; l];
    match in_term {
        Some(x) => match coding {
            Coding::Rc => {
                row[0] = -1.0;
                row[x] = 1.0;
            }
            Coding::Ac => {
                row[x - 1] = -1.0;
                row[x] = 1.0;
            }
        },
        None => row[0] = 1.0,
    }
    row
}

fn g_factor(space: &FactorSpace, coding: Coding, var: usize, in_term: Option<usize>) -> Vec<f64> {
    let l = space.levels(var);
    match in_term {
        Some(x) => (0..l)
            .map(|y| match coding {
                Coding::Rc => (y == x) as usize as f64,
                Coding::Ac => (y >= x) as usize as f64,
            })
            .collect(),
        None => vec![1.0; l],
    }
}

fn assemble(
    space: &FactorSpace,
    index: &TermIndex,
    factor: fn(&FactorSpace, Coding, usize, Option<usize>) -> Vec<f64>,
    coding: Coding,
) -> Matrix {
    let k = space.total_cells();
    let mut m = Matrix::zeros(index.total_params(), k);
    for coord in 0..index.total_params() {
        let (term, levels) = index.decode(coord);
        let vars = index.term(term).vars();
        for cell in 0..k {
            let cell_levels = space.cell_levels(cell);
            let mut value = 1.0;
            for (v, &cell_level) in cell_levels.iter().enumerate() {
                let in_term = vars.iter().position(|&tv| tv == v).map(|j| levels[j]);
                value *= factor(space, coding, v, in_term)[cell_level];
                if value == 0.0 {
                    break;
                }
            }
            m[(coord, cell)] = value;
        }
    }
    m
}

/// `(k−1) × k` matrix with θ = H·log p. Row for `(I, x_I)` is the Kronecker
/// product over variables of the contrast row (v ∈ I) or the baseline
/// selector e₀ᵀ (v ∉ I); satisfies H·1 = 0.
pub fn build_h(space: &FactorSpace, coding: Coding) -> Matrix {
    let index = TermIndex::new(space);
    assemble(space, &index, h_factor, coding)
}

/// `k × (k−1)` indicator design with log p = Gθ + c. Column for `(I, x_I)`
/// indicates `{y_v = x_v ∀v ∈ I}` (Rc) or `{y_v ≥ x_v ∀v ∈ I}` (Ac);
/// satisfies H·G = I.
pub fn build_g(space: &FactorSpace, coding: Coding) -> Matrix {
    let index = TermIndex::new(space);
    assemble(space, &index, g_factor, coding).transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tables::Table;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn contrast_matrix_definitions() {
        let c = contrast_matrix(2, Coding::Rc).unwrap();
        assert_eq!(c.row(0), &[-1.0, 1.0]);

        let c = contrast_matrix(3, Coding::Ac).unwrap();
        assert_eq!(c.row(0), &[-1.0, 1.0, 0.0]);
        assert_eq!(c.row(1), &[0.0, -1.0, 1.0]);

        let c = contrast_matrix(3, Coding::Rc).unwrap();
        assert_eq!(c.row(0), &[-1.0, 1.0, 0.0]);
        assert_eq!(c.row(1), &[-1.0, 0.0, 1.0]);

        assert!(contrast_matrix(1, Coding::Rc).is_err());
    }

    #[test]
    fn term_order_is_size_then_lexicographic() {
        let space = FactorSpace::new(&[("X", 2), ("W", 3), ("Y", 2)]).unwrap();
        let idx = TermIndex::new(&space);
        let order: alloc::vec::Vec<&[usize]> = idx.terms().map(|(_, t)| t.vars()).collect();
        let expected: alloc::vec::Vec<&[usize]> = alloc::vec![
            &[0][..],
            &[1][..],
            &[2][..],
            &[0, 1][..],
            &[0, 2][..],
            &[1, 2][..],
            &[0, 1, 2][..],
        ];
        assert_eq!(order, expected);
        assert_eq!(idx.total_params(), space.total_cells() - 1);
        // Lengths: 1, 2, 1, 2, 1, 2, 2.
        assert_eq!(idx.term(3).len(), 2);
        assert_eq!(idx.term(6).len(), 2);
    }

    #[test]
    fn coord_decode_round_trip() {
        let space = FactorSpace::new(&[("A", 3), ("B", 2), ("C", 4)]).unwrap();
        let idx = TermIndex::new(&space);
        for coord in 0..idx.total_params() {
            let (term, levels) = idx.decode(coord);
            assert_eq!(idx.coord(term, &levels).unwrap(), coord);
        }
        // Within a term the LAST variable moves fastest.
        let ac = idx.find_term(&[0, 2]).unwrap();
        let base = idx.coord(ac, &[1, 1]).unwrap();
        assert_eq!(idx.coord(ac, &[1, 2]).unwrap(), base + 1);
        assert_eq!(idx.coord(ac, &[2, 1]).unwrap(), base + 3);
        assert!(idx.coord(ac, &[0, 1]).is_err());
        assert!(idx.coord(ac, &[1, 4]).is_err());
    }

    #[test]
    fn coord_labels() {
        let space = FactorSpace::new(&[("X", 2), ("W", 3), ("Y", 2)]).unwrap();
        let idx = TermIndex::new(&space);
        assert_eq!(idx.coord_label(&space, 0), "X(1)");
        let xw = idx.find_term(&[0, 1]).unwrap();
        let c = idx.coord(xw, &[1, 2]).unwrap();
        assert_eq!(idx.coord_label(&space, c), "X*W(1,2)");
    }

    #[test]
    fn h_two_by_two_rc_rows() {
        let space = FactorSpace::new(&[("X", 2), ("Y", 2)]).unwrap();
        let h = build_h(&space, Coding::Rc);
        // Rows for X, Y, XY over cells (00, 01, 10, 11).
        assert_eq!(h.row(0), &[-1.0, 0.0, 1.0, 0.0]);
        assert_eq!(h.row(1), &[-1.0, 1.0, 0.0, 0.0]);
        assert_eq!(h.row(2), &[1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn h_single_binary_variable() {
        let space = FactorSpace::new(&[("X", 2)]).unwrap();
        let h = build_h(&space, Coding::Rc);
        assert_eq!(h.row(0), &[-1.0, 1.0]);
        let g = build_g(&space, Coding::Rc);
        assert_eq!(g.row(0), &[0.0]);
        assert_eq!(g.row(1), &[1.0]);
    }

    #[test]
    fn g_two_by_two_rc_columns() {
        let space = FactorSpace::new(&[("X", 2), ("Y", 2)]).unwrap();
        let g = build_g(&space, Coding::Rc);
        let gt = g.transpose();
        assert_eq!(gt.row(0), &[0.0, 0.0, 1.0, 1.0]); // {X=1}
        assert_eq!(gt.row(1), &[0.0, 1.0, 0.0, 1.0]); // {Y=1}
        assert_eq!(gt.row(2), &[0.0, 0.0, 0.0, 1.0]); // {X=1 ∧ Y=1}
    }

    fn check_hg_identity(space: &FactorSpace, coding: Coding) {
        let h = build_h(space, coding);
        let g = build_g(space, coding);
        let hg = h.matmul(&g);
        let k = space.total_cells();
        for i in 0..k - 1 {
            for j in 0..k - 1 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_eq!(hg[(i, j)], want, "entry ({i},{j}) under {coding:?}");
            }
        }
        // H·1 = 0 exactly.
        let ones = alloc::vec![1.0; k];
        for v in h.matvec(&ones) {
            assert_eq!(v, 0.0);
        }
        // [G | 1] has full column rank k.
        let mut aug = Matrix::zeros(k, k);
        for r in 0..k {
            for c in 0..k - 1 {
                aug[(r, c)] = g[(r, c)];
            }
            aug[(r, k - 1)] = 1.0;
        }
        assert_eq!(aug.rank(1e-9), k);
    }

    #[test]
    fn hg_identity_and_rank_across_spaces() {
        for vars in [
            alloc::vec![("X", 2)],
            alloc::vec![("X", 3)],
            alloc::vec![("X", 2), ("Y", 3)],
            alloc::vec![("X", 2), ("W", 3), ("Y", 2)],
            alloc::vec![("A", 4), ("B", 2)],
        ] {
            let space = FactorSpace::new(&vars).unwrap();
            check_hg_identity(&space, Coding::Rc);
            check_hg_identity(&space, Coding::Ac);
        }
    }

    #[test]
    fn binary_spaces_make_codings_coincide() {
        let space = FactorSpace::new(&[("X", 2), ("W", 2), ("Y", 2)]).unwrap();
        assert_eq!(
            build_h(&space, Coding::Rc),
            build_h(&space, Coding::Ac)
        );
        assert_eq!(
            build_g(&space, Coding::Rc),
            build_g(&space, Coding::Ac)
        );
    }

    #[test]
    fn rc_mean_parameters_are_marginal_probabilities() {
        let space = FactorSpace::new(&[("X", 3), ("Y", 2), ("Z", 2)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let t = Table::random_positive(space.clone(), &mut rng);
        let g = build_g(&space, Coding::Rc);
        let mu = g.tr_matvec(t.values());
        let idx = TermIndex::new(&space);
        // Main effect of X at level 2 = P(X = 2).
        let x2 = idx.coord(idx.find_term(&[0]).unwrap(), &[2]).unwrap();
        let px = t.marginalize(&[0]).unwrap();
        assert_abs_diff_eq!(mu[x2], px.values()[2], epsilon = 1e-14);
        // Pair (X,Z) at (1,1) = P(X = 1, Z = 1).
        let xz = idx
            .coord(idx.find_term(&[0, 2]).unwrap(), &[1, 1])
            .unwrap();
        let pxz = t.marginalize(&[0, 2]).unwrap();
        assert_abs_diff_eq!(mu[xz], pxz.value(&[1, 1]), epsilon = 1e-14);
        // Under Ac the same coordinate is P(X ≥ 1, Z ≥ 1).
        let ga = build_g(&space, Coding::Ac);
        let mua = ga.tr_matvec(t.values());
        let cum = pxz.value(&[1, 1]) + pxz.value(&[2, 1]);
        assert_abs_diff_eq!(mua[xz], cum, epsilon = 1e-14);
    }
}
