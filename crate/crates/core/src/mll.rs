//! Marginal log-linear parameters λ_{I,M} and the identities that connect
//! margins.
//!
//! A parameter is an interaction set I evaluated inside a margin M ⊇ I.
//! `MllSpec` assembles complete smooth parametrizations (one margin per
//! interaction set, with the Prop.-3 duplicate/delete pattern allowed);
//! `mll_jacobian` provides the chain-rule derivative used by the fitting
//! engine. The remaining operations are the closed-form relations between
//! an interaction in a margin and the same interaction in the joint:
//! the alternating-sum rewrite (`evans_difference`), its odds-ratio form
//! for I = XY (`c1_from_loglinear`), the conditional-probability route
//! (`sd_delta`, `sd_w_logit_expansion`), and the log-linear → logistic
//! mapping (`logits_from_loglinear`). All of these assume Rc coding, as do
//! their source formulas.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::coding::{build_g, build_h, Coding, TermIndex};
use crate::error::{Error, Result};
use crate::fmath;
use crate::linalg::Matrix;
use crate::loglinear::{p_from_theta, theta_from_p, ThetaVector};
use crate::tables::{FactorSpace, Table};

/// One marginal log-linear parameter block: interaction `effect` defined
/// within margin `margin` (both strictly increasing variable indices).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MllTerm {
    effect: Vec<usize>,
    margin: Vec<usize>,
    coding: Coding,
}

impl MllTerm {
    pub fn new(effect: &[usize], margin: &[usize], coding: Coding) -> Result<Self> {
        if effect.is_empty() {
            return Err(Error::Spec("effect set must be nonempty".to_string()));
        }
        for w in effect.windows(2).chain(margin.windows(2)) {
            if w[0] >= w[1] {
                return Err(Error::Spec(
                    "variable sets must be strictly increasing".to_string(),
                ));
            }
        }
        if !effect.iter().all(|v| margin.contains(v)) {
            return Err(Error::Spec(alloc::format!(
                "effect {effect:?} not contained in margin {margin:?}"
            )));
        }
        Ok(MllTerm {
            effect: effect.to_vec(),
            margin: margin.to_vec(),
            coding,
        })
    }

    pub fn effect(&self) -> &[usize] {
        &self.effect
    }

    pub fn margin(&self) -> &[usize] {
        &self.margin
    }

    pub fn coding(&self) -> Coding {
        self.coding
    }

    /// Positions of the effect variables within the margin list.
    fn local_effect(&self) -> Vec<usize> {
        self.effect
            .iter()
            .map(|v| self.margin.iter().position(|m| m == v).unwrap())
            .collect()
    }

    /// Number of parameters of this block.
    pub fn len(&self, space: &FactorSpace) -> usize {
        self.effect.iter().map(|&v| space.levels(v) - 1).product()
    }
}

/// λ_{I,M}: contrast rows of the effect applied to the log of the
/// M-marginal; equals `theta_from_p(marginalize(p, M))` restricted to I.
pub fn lambda_term(p: &Table, term: &MllTerm) -> Result<Vec<f64>> {
    let marg = p.marginalize(term.margin())?;
    let theta = theta_from_p(&marg, term.coding)?;
    let index = TermIndex::new(marg.space());
    let t = index
        .find_term(&term.local_effect())
        .expect("effect exists in margin index");
    let tr = index.term(t);
    Ok(theta.values()[tr.offset()..tr.offset() + tr.len()].to_vec())
}

/// A complete marginal log-linear parametrization: ordered terms covering
/// every interaction set exactly once, except for the Prop.-3 pattern where
/// a set appears both in a proper margin and in the joint, balanced by
/// `deleted` coordinates `(term index, local coordinate)` removed from
/// full-margin terms. Retained length is `total_cells − 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct MllSpec {
    space: FactorSpace,
    terms: Vec<MllTerm>,
    deleted: Vec<(usize, usize)>,
    retained: Vec<(usize, usize)>,
}

impl MllSpec {
    pub fn new(
        space: FactorSpace,
        terms: Vec<MllTerm>,
        deleted: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let all: Vec<usize> = (0..space.num_vars()).collect();
        let index = TermIndex::new(&space);
        let mut margins: Vec<Vec<Vec<usize>>> = vec![Vec::new(); index.num_terms()];
        for term in &terms {
            space.check_subset(&term.margin)?;
            let t = index.find_term(&term.effect).ok_or_else(|| {
                Error::Spec(alloc::format!("unknown effect {:?}", term.effect))
            })?;
            margins[t].push(term.margin.clone());
        }
        for (t, ms) in margins.iter().enumerate() {
            let vars = index.term(t).vars();
            match ms.len() {
                0 => {
                    return Err(Error::Spec(alloc::format!(
                        "interaction set {vars:?} not assigned to any margin"
                    )))
                }
                1 => {}
                2 => {
                    let joint = ms.iter().filter(|m| **m == all).count();
                    if ms[0] == ms[1] || joint == 0 {
                        return Err(Error::Spec(alloc::format!(
                            "interaction set {vars:?} duplicated outside the margin+joint pattern"
                        )));
                    }
                }
                n => {
                    return Err(Error::Spec(alloc::format!(
                        "interaction set {vars:?} assigned {n} times"
                    )))
                }
            }
        }
        let mut is_deleted = vec![Vec::new(); terms.len()];
        for &(ti, local) in &deleted {
            if ti >= terms.len() || local >= terms[ti].len(&space) {
                return Err(Error::Spec(alloc::format!(
                    "deleted coordinate ({ti}, {local}) out of range"
                )));
            }
            if terms[ti].margin != all {
                return Err(Error::Spec(
                    "deleted coordinates must belong to full-margin terms".to_string(),
                ));
            }
            if is_deleted[ti].contains(&local) {
                return Err(Error::Spec(alloc::format!(
                    "deleted coordinate ({ti}, {local}) repeated"
                )));
            }
            is_deleted[ti].push(local);
        }
        let mut retained = Vec::new();
        for (ti, term) in terms.iter().enumerate() {
            for local in 0..term.len(&space) {
                if !is_deleted[ti].contains(&local) {
                    retained.push((ti, local));
                }
            }
        }
        if retained.len() != space.total_cells() - 1 {
            return Err(Error::Spec(alloc::format!(
                "parametrization has {} retained coordinates, needs {}",
                retained.len(),
                space.total_cells() - 1
            )));
        }
        Ok(MllSpec {
            space,
            terms,
            deleted,
            retained,
        })
    }

    pub fn space(&self) -> &FactorSpace {
        &self.space
    }

    pub fn terms(&self) -> &[MllTerm] {
        &self.terms
    }

    pub fn deleted(&self) -> &[(usize, usize)] {
        &self.deleted
    }

    /// Retained coordinates in output order as `(term index, local coord)`.
    pub fn retained(&self) -> &[(usize, usize)] {
        &self.retained
    }

    pub fn len(&self) -> usize {
        self.retained.len()
    }

    pub fn is_empty(&self) -> bool {
        self.retained.is_empty()
    }

    /// Label like `X*Y[X*W*Y](1,2)`: effect, defining margin, levels.
    pub fn coord_label(&self, coord: usize) -> String {
        let (ti, local) = self.retained[coord];
        let term = &self.terms[ti];
        let levels = local_levels(&self.space, &term.effect, local);
        let mut s = String::new();
        for (j, &v) in term.effect.iter().enumerate() {
            if j > 0 {
                s.push('*');
            }
            s.push_str(self.space.name(v));
        }
        s.push('[');
        for (j, &v) in term.margin.iter().enumerate() {
            if j > 0 {
                s.push('*');
            }
            s.push_str(self.space.name(v));
        }
        s.push(']');
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

/// Non-baseline level combination of `vars` at flat position `local`
/// (last variable fastest).
fn local_levels(space: &FactorSpace, vars: &[usize], mut local: usize) -> Vec<usize> {
    let mut levels = vec![0usize; vars.len()];
    for (j, &v) in vars.iter().enumerate().rev() {
        let l = space.levels(v) - 1;
        levels[j] = local % l + 1;
        local /= l;
    }
    levels
}

/// All non-baseline level combinations of `vars`, last variable fastest.
fn level_combos(space: &FactorSpace, vars: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = vars.iter().map(|&v| space.levels(v) - 1).product();
    (0..total).map(|i| local_levels(space, vars, i)).collect()
}

/// Concatenation of the spec's λ blocks with deleted coordinates omitted.
pub fn mll_vector(p: &Table, spec: &MllSpec) -> Result<Vec<f64>> {
    if p.space() != &spec.space {
        return Err(Error::Spec("table space does not match spec".to_string()));
    }
    let mut blocks: Vec<Option<Vec<f64>>> = vec![None; spec.terms.len()];
    let mut out = Vec::with_capacity(spec.len());
    for &(ti, local) in &spec.retained {
        if blocks[ti].is_none() {
            blocks[ti] = Some(lambda_term(p, &spec.terms[ti])?);
        }
        out.push(blocks[ti].as_ref().unwrap()[local]);
    }
    Ok(out)
}

/// Derivative of `mll_vector` with respect to the joint canonical
/// coordinates θ under `base` coding. Each term block is
/// `H^M_I · D · G` with `D[m,c] = [c↦m]·p_c/p_M(m) − p_c` (chain rule
/// through `log p_M`); the matrix is square and nonsingular exactly when
/// the spec is a smooth parametrization at `p`.
pub fn mll_jacobian(p: &Table, spec: &MllSpec, base: Coding) -> Result<Matrix> {
    if p.space() != &spec.space {
        return Err(Error::Spec("table space does not match spec".to_string()));
    }
    crate::loglinear::checked_log(p)?;
    let space = &spec.space;
    let k = space.total_cells();
    let g = build_g(space, base);
    let mut out = Matrix::zeros(spec.len(), k - 1);
    let mut row_of: Vec<Option<Matrix>> = vec![None; spec.terms.len()];
    for (out_row, &(ti, local)) in spec.retained.iter().enumerate() {
        if row_of[ti].is_none() {
            let term = &spec.terms[ti];
            let marg = p.marginalize(&term.margin)?;
            let msp = marg.space();
            let mk = msp.total_cells();
            // Map each joint cell to its margin cell.
            let map: Vec<usize> = (0..k)
                .map(|c| {
                    let levels = space.cell_levels(c);
                    let kept: Vec<usize> = term.margin.iter().map(|&v| levels[v]).collect();
                    msp.cell_index(&kept)
                })
                .collect();
            let mut d = Matrix::zeros(mk, k);
            for c in 0..k {
                let pc = p.values()[c];
                for m in 0..mk {
                    d[(m, c)] = if map[c] == m {
                        pc / marg.values()[m] - pc
                    } else {
                        -pc
                    };
                }
            }
            let h = build_h(msp, term.coding);
            let midx = TermIndex::new(msp);
            let t = midx.find_term(&term.local_effect()).unwrap();
            let tr = midx.term(t);
            let rows: Vec<usize> = (tr.offset()..tr.offset() + tr.len()).collect();
            let cols: Vec<usize> = (0..mk).collect();
            let h_i = h.select(&rows, &cols);
            row_of[ti] = Some(h_i.matmul(&d).matmul(&g));
        }
        let block = row_of[ti].as_ref().unwrap();
        out.row_mut(out_row).copy_from_slice(block.row(local));
    }
    Ok(out)
}

/// Finite-difference Jacobian of λ_{I,M} with respect to the joint θ_I
/// coordinates (all other canonical coordinates held fixed); central
/// differences with h = 1e−5. Equals the identity when the parametrization
/// is insensitive to where I is defined.
pub fn prop2_jacobian_check(
    p: &Table,
    effect: &[usize],
    margin: &[usize],
    coding: Coding,
) -> Result<Matrix> {
    let space = p.space().clone();
    space.check_subset(margin)?;
    let term = MllTerm::new(effect, margin, coding)?;
    let theta = theta_from_p(p, coding)?;
    let index = TermIndex::new(&space);
    let t = index
        .find_term(effect)
        .ok_or_else(|| Error::Spec(alloc::format!("unknown effect {effect:?}")))?;
    let tr = index.term(t);
    let (offset, d) = (tr.offset(), tr.len());
    let h = 1e-5;
    let mut jac = Matrix::zeros(d, d);
    for j in 0..d {
        let mut up = theta.values().to_vec();
        up[offset + j] += h;
        let mut dn = theta.values().to_vec();
        dn[offset + j] -= h;
        let lu = lambda_term(
            &p_from_theta(&ThetaVector::new(up, coding)?, &space)?,
            &term,
        )?;
        let ld = lambda_term(
            &p_from_theta(&ThetaVector::new(dn, coding)?, &space)?,
            &term,
        )?;
        for i in 0..d {
            jac[(i, j)] = (lu[i] - ld[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// For two θ vectors that differ only in the coordinates of `effect`,
/// returns `(λ¹_{I,I} − λ²_{I,I}, θ¹_I − θ²_I)`; the two are equal — a
/// within-margin shift of θ_I moves λ_{I,I} by exactly the same amount.
pub fn example1_shift(
    space: &FactorSpace,
    theta1: &ThetaVector,
    theta2: &ThetaVector,
    effect: &[usize],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if theta1.coding() != theta2.coding() {
        return Err(Error::Spec("codings differ".to_string()));
    }
    let k = space.total_cells();
    if theta1.values().len() != k - 1 || theta2.values().len() != k - 1 {
        return Err(Error::Spec("theta length does not match space".to_string()));
    }
    let index = TermIndex::new(space);
    let t = index
        .find_term(effect)
        .ok_or_else(|| Error::Spec(alloc::format!("unknown effect {effect:?}")))?;
    let tr = index.term(t);
    let range = tr.offset()..tr.offset() + tr.len();
    for i in 0..k - 1 {
        if !range.contains(&i) && theta1.values()[i] != theta2.values()[i] {
            return Err(Error::Spec(alloc::format!(
                "theta vectors differ outside the {effect:?} coordinates (at {i})"
            )));
        }
    }
    let term = MllTerm::new(effect, effect, theta1.coding())?;
    let l1 = lambda_term(&p_from_theta(theta1, space)?, &term)?;
    let l2 = lambda_term(&p_from_theta(theta2, space)?, &term)?;
    let dl = l1.iter().zip(&l2).map(|(a, b)| a - b).collect();
    let dt = range
        .map(|i| theta1.values()[i] - theta2.values()[i])
        .collect();
    Ok((dl, dt))
}

/// λ_{I,M} − λ_{I,N} for I ⊆ N ⊂ M via the alternating sum
/// `Σ_{J⊆I} (−1)^{|I\J|} log p_{R|N}(0_R | x_J, 0_{N\J})`, R = M\N.
/// Rc coding; one value per non-baseline combination x_I (TermIndex order).
pub fn evans_difference(
    p: &Table,
    effect: &[usize],
    inner: &[usize],
    outer: &[usize],
) -> Result<Vec<f64>> {
    let space = p.space();
    space.check_subset(outer)?;
    space.check_subset(inner)?;
    space.check_subset(effect)?;
    if effect.is_empty() || !effect.iter().all(|v| inner.contains(v)) {
        return Err(Error::Spec("effect must be a nonempty subset of the inner margin".to_string()));
    }
    if !inner.iter().all(|v| outer.contains(v)) || inner.len() == outer.len() {
        return Err(Error::Spec("inner margin must be a strict subset of the outer margin".to_string()));
    }
    let marg = p.marginalize(outer)?;
    // Positions of the inner variables within the outer margin.
    let inner_pos: Vec<usize> = inner
        .iter()
        .map(|v| outer.iter().position(|o| o == v).unwrap())
        .collect();
    let effect_in_inner: Vec<usize> = effect
        .iter()
        .map(|v| inner.iter().position(|i| i == v).unwrap())
        .collect();
    let mut out = Vec::new();
    for x in level_combos(space, effect) {
        let mut acc = 0.0;
        for mask in 0..(1usize << effect.len()) {
            let sign = if (effect.len() - mask.count_ones() as usize).is_multiple_of(2) {
                1.0
            } else {
                -1.0
            };
            let given: Vec<(usize, usize)> = inner_pos
                .iter()
                .enumerate()
                .map(|(i, &pos)| {
                    let lvl = match effect_in_inner.iter().position(|&e| e == i) {
                        Some(j) if mask & (1 << j) != 0 => x[j],
                        _ => 0,
                    };
                    (pos, lvl)
                })
                .collect();
            let cond = marg.condition(&given)?;
            let p0 = cond.values()[0]; // all R variables at level 0
            if p0 < 1e-300 {
                return Err(Error::NonPositiveCell { index: 0, value: p0 });
            }
            acc += sign * fmath::ln(p0);
        }
        out.push(acc);
    }
    Ok(out)
}

/// Variable roles for the three-variable identity formulas: exposure `x`,
/// intermediate `w`, binary response `y` (indices into the factor space).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct XwyVars {
    pub x: usize,
    pub w: usize,
    pub y: usize,
}

impl XwyVars {
    fn validate(&self, space: &FactorSpace) -> Result<()> {
        if space.num_vars() != 3 {
            return Err(Error::Spec("identity formulas need a three-variable space".to_string()));
        }
        let mut seen = [false; 3];
        for &v in [self.x, self.w, self.y].iter() {
            if v >= 3 || seen[v] {
                return Err(Error::Spec("roles must be a permutation of the three variables".to_string()));
            }
            seen[v] = true;
        }
        if space.levels(self.y) != 2 {
            return Err(Error::Spec(alloc::format!(
                "response `{}` must be binary",
                space.name(self.y)
            )));
        }
        Ok(())
    }
}

/// θ coordinate value at the given (variable, level) arguments, with the
/// corner-point convention: 0 whenever any argument is at level 0.
fn theta_value(values: &[f64], index: &TermIndex, args: &[(usize, usize)]) -> f64 {
    if args.iter().any(|&(_, l)| l == 0) {
        return 0.0;
    }
    let mut sorted: Vec<(usize, usize)> = args.to_vec();
    sorted.sort_unstable_by_key(|&(v, _)| v);
    let vars: Vec<usize> = sorted.iter().map(|&(v, _)| v).collect();
    let levels: Vec<usize> = sorted.iter().map(|&(_, l)| l).collect();
    let t = index.find_term(&vars).expect("term exists");
    values[index.coord(t, &levels).expect("levels in range")]
}

fn require_rc(theta: &ThetaVector) -> Result<()> {
    if theta.coding() != Coding::Rc {
        return Err(Error::Spec(
            "identity formulas are stated for Rc coding; convert theta first".to_string(),
        ));
    }
    Ok(())
}

fn check_xy_levels(space: &FactorSpace, vars: XwyVars, x: usize, y: usize) -> Result<()> {
    if x == 0 || x >= space.levels(vars.x) {
        return Err(Error::LevelOutOfRange {
            variable: space.name(vars.x).to_string(),
            level: x,
        });
    }
    if y == 0 || y >= space.levels(vars.y) {
        return Err(Error::LevelOutOfRange {
            variable: space.name(vars.y).to_string(),
            level: y,
        });
    }
    Ok(())
}

/// θ_XY(x,y) − λ_{XY;XY}(x,y) as the two-ratio formula
/// `log B − log A + log C − log D` with sums over the non-baseline levels
/// of W (each exponent stacking θ_W, θ_XW, θ_WY, θ_XWY as appropriate).
pub fn c1_from_loglinear(
    theta: &ThetaVector,
    space: &FactorSpace,
    vars: XwyVars,
    x: usize,
    y: usize,
) -> Result<f64> {
    require_rc(theta)?;
    vars.validate(space)?;
    check_xy_levels(space, vars, x, y)?;
    if theta.values().len() != space.total_cells() - 1 {
        return Err(Error::Spec("theta length does not match space".to_string()));
    }
    let index = TermIndex::new(space);
    let tv = |args: &[(usize, usize)]| theta_value(theta.values(), &index, args);
    let (mut a, mut b, mut c, mut d) = (1.0f64, 1.0, 1.0, 1.0);
    for w in 1..space.levels(vars.w) {
        let t_w = tv(&[(vars.w, w)]);
        let t_xw = tv(&[(vars.x, x), (vars.w, w)]);
        let t_wy = tv(&[(vars.w, w), (vars.y, y)]);
        let t_xwy = tv(&[(vars.x, x), (vars.w, w), (vars.y, y)]);
        a += fmath::exp(t_w);
        b += fmath::exp(t_w + t_xw);
        c += fmath::exp(t_w + t_wy);
        d += fmath::exp(t_w + t_xw + t_wy + t_xwy);
    }
    Ok(fmath::ln(b) - fmath::ln(a) + fmath::ln(c) - fmath::ln(d))
}

/// The same quantity as [`c1_from_loglinear`] computed by the
/// swapped-conditioning route: a double log-ratio of P(W=0 | X, Y) over
/// the four corners (0,0), (x,0), (0,y), (x,y).
pub fn sd_delta(p: &Table, vars: XwyVars, x: usize, y: usize) -> Result<f64> {
    vars.validate(p.space())?;
    check_xy_levels(p.space(), vars, x, y)?;
    let w0 = |xl: usize, yl: usize| -> Result<f64> {
        let cond = p.condition(&[(vars.x, xl), (vars.y, yl)])?;
        let p0 = cond.values()[0];
        if p0 < 1e-300 {
            return Err(Error::NonPositiveCell { index: 0, value: p0 });
        }
        Ok(fmath::ln(p0))
    };
    Ok((w0(x, y)? - w0(x, 0)?) - (w0(0, y)? - w0(0, 0)?))
}

/// Extension of the Stanghellini–Doretti (A3) expansion to non-binary W:
/// decomposes the baseline-category logit `log P(W=w|x,y)/P(W=0|x,y)` as
/// `y·[θ_WY(w) + θ_XWY(x,w)] + log[(1+e^{θ_Y+θ_XY(x)}) /
/// (1+e^{θ_Y+θ_XY(x)+θ_WY(w)+θ_XWY(x,w)})] + λ_{W;XW}(w) + λ_{XW;XW}(x,w)`
/// — joint θ values plus interactions from the XW margin.
pub fn sd_w_logit_expansion(
    p: &Table,
    vars: XwyVars,
    w: usize,
    x: usize,
    y: usize,
) -> Result<f64> {
    vars.validate(p.space())?;
    let space = p.space();
    if w == 0 || w >= space.levels(vars.w) {
        return Err(Error::LevelOutOfRange {
            variable: space.name(vars.w).to_string(),
            level: w,
        });
    }
    if x >= space.levels(vars.x) || y >= space.levels(vars.y) {
        return Err(Error::Spec("level out of range".to_string()));
    }
    let theta = theta_from_p(p, Coding::Rc)?;
    let index = TermIndex::new(space);
    let tv = |args: &[(usize, usize)]| theta_value(theta.values(), &index, args);
    let t_y = tv(&[(vars.y, 1)]);
    let t_xy = tv(&[(vars.x, x), (vars.y, 1)]);
    let t_wy = tv(&[(vars.w, w), (vars.y, 1)]);
    let t_xwy = tv(&[(vars.x, x), (vars.w, w), (vars.y, 1)]);
    let y_part = if y == 1 { t_wy + t_xwy } else { 0.0 };
    let ratio = fmath::ln(1.0 + fmath::exp(t_y + t_xy))
        - fmath::ln(1.0 + fmath::exp(t_y + t_xy + t_wy + t_xwy));
    // Interactions of the XW margin.
    let mut xw = [vars.x, vars.w];
    xw.sort_unstable();
    let lam_w = lambda_term(p, &MllTerm::new(&[vars.w], &xw, Coding::Rc)?)?;
    let lam_xw = lambda_term(p, &MllTerm::new(&xw, &xw, Coding::Rc)?)?;
    let w_coord = w - 1;
    let pair_levels = if vars.x < vars.w { [x, w] } else { [w, x] };
    let pair_coord = if x == 0 {
        None
    } else {
        let lens = [space.levels(xw[0]) - 1, space.levels(xw[1]) - 1];
        Some((pair_levels[0] - 1) * lens[1] + (pair_levels[1] - 1))
    };
    let lam_xw_val = pair_coord.map_or(0.0, |c| lam_xw[c]);
    Ok(y_part + ratio + lam_w[w_coord] + lam_xw_val)
}

/// Logistic coefficients read off the joint θ (Rc) of a three-variable
/// table with binary response.
#[derive(Clone, Debug)]
pub struct LogitMap {
    space: FactorSpace,
    vars: XwyVars,
    index: TermIndex,
    theta: Vec<f64>,
}

impl LogitMap {
    /// `logit P(Y=1 | X=x, W=w) = θ_Y + θ_XY(x) + θ_WY(w) + θ_XWY(x,w)`.
    pub fn y_logit(&self, x: usize, w: usize) -> f64 {
        let tv = |args: &[(usize, usize)]| theta_value(&self.theta, &self.index, args);
        tv(&[(self.vars.y, 1)])
            + tv(&[(self.vars.x, x), (self.vars.y, 1)])
            + tv(&[(self.vars.w, w), (self.vars.y, 1)])
            + tv(&[(self.vars.x, x), (self.vars.w, w), (self.vars.y, 1)])
    }

    /// Baseline-category logit
    /// `log P(W=w|x,y)/P(W=0|x,y) = θ_W(w) + θ_XW(x,w) + θ_WY(w,y) + θ_XWY(x,w,y)`.
    pub fn w_logit(&self, w: usize, x: usize, y: usize) -> f64 {
        let tv = |args: &[(usize, usize)]| theta_value(&self.theta, &self.index, args);
        tv(&[(self.vars.w, w)])
            + tv(&[(self.vars.x, x), (self.vars.w, w)])
            + tv(&[(self.vars.w, w), (self.vars.y, y)])
            + tv(&[(self.vars.x, x), (self.vars.w, w), (self.vars.y, y)])
    }

    pub fn space(&self) -> &FactorSpace {
        &self.space
    }
}

/// Maps joint log-linear parameters (Rc) to the logistic parameters of
/// Y given (X, W) and of W given (X, Y); level-0 arguments contribute 0.
pub fn logits_from_loglinear(
    theta: &ThetaVector,
    space: &FactorSpace,
    vars: XwyVars,
) -> Result<LogitMap> {
    require_rc(theta)?;
    vars.validate(space)?;
    if theta.values().len() != space.total_cells() - 1 {
        return Err(Error::Spec("theta length does not match space".to_string()));
    }
    Ok(LogitMap {
        space: space.clone(),
        vars,
        index: TermIndex::new(space),
        theta: theta.values().to_vec(),
    })
}

/// Builds the smooth parametrization that carries the exposure–response
/// interaction both marginally and jointly: λ's of the {exposure, response}
/// margin, λ's of the {exposure} ∪ mediators margin, and joint θ's for
/// every set containing the response and a mediator — with the top-order
/// θ̄ missing its coordinates at the designated mediator combination
/// (defaults to the highest level of each mediator) so that the retained
/// count is exactly `total_cells − 1`.
pub fn build_prop3_spec(
    space: &FactorSpace,
    exposure: usize,
    mediators: &[usize],
    response: usize,
    deleted_levels: Option<&[usize]>,
) -> Result<MllSpec> {
    let d = space.num_vars();
    let mut seen = vec![false; d];
    for &v in mediators.iter().chain([exposure, response].iter()) {
        if v >= d || seen[v] {
            return Err(Error::Spec(
                "exposure, mediators and response must be distinct variables".to_string(),
            ));
        }
        seen[v] = true;
    }
    if mediators.is_empty() || !seen.iter().all(|&s| s) {
        return Err(Error::Spec(
            "roles must cover every variable with at least one mediator".to_string(),
        ));
    }
    if space.levels(response) != 2 {
        return Err(Error::Spec(alloc::format!(
            "response `{}` must be binary",
            space.name(response)
        )));
    }
    let wbar: Vec<usize> = match deleted_levels {
        Some(ls) => {
            if ls.len() != mediators.len() {
                return Err(Error::Spec(
                    "one deleted level per mediator required".to_string(),
                ));
            }
            for (&l, &m) in ls.iter().zip(mediators) {
                if l == 0 || l >= space.levels(m) {
                    return Err(Error::LevelOutOfRange {
                        variable: space.name(m).to_string(),
                        level: l,
                    });
                }
            }
            ls.to_vec()
        }
        None => mediators.iter().map(|&m| space.levels(m) - 1).collect(),
    };

    let mut xy = vec![exposure, response];
    xy.sort_unstable();
    let mut xw = vec![exposure];
    xw.extend_from_slice(mediators);
    xw.sort_unstable();
    let all: Vec<usize> = (0..d).collect();

    let index = TermIndex::new(space);
    let mut terms = Vec::new();
    // Interactions within the exposure–response margin.
    for (_, t) in index.terms() {
        if t.vars().iter().all(|v| xy.contains(v)) {
            terms.push(MllTerm::new(t.vars(), &xy, Coding::Rc)?);
        }
    }
    // Interactions within the exposure–mediator margin (at least one mediator).
    for (_, t) in index.terms() {
        let vars = t.vars();
        if vars.iter().all(|v| xw.contains(v)) && vars.iter().any(|v| mediators.contains(v)) {
            terms.push(MllTerm::new(vars, &xw, Coding::Rc)?);
        }
    }
    // Joint θ for the duplicated exposure–response set and for every set
    // containing the response and at least one mediator.
    terms.push(MllTerm::new(&xy, &all, Coding::Rc)?);
    for (_, t) in index.terms() {
        let vars = t.vars();
        if vars.contains(&response) && vars.iter().any(|v| mediators.contains(v)) {
            terms.push(MllTerm::new(vars, &all, Coding::Rc)?);
        }
    }

    // Delete the top-order coordinates at the designated mediator combination.
    let top_ti = terms.len() - 1;
    debug_assert_eq!(terms[top_ti].effect(), all.as_slice());
    let top_vars = terms[top_ti].effect().to_vec();
    let mut deleted = Vec::new();
    for (local, levels) in level_combos(space, &top_vars).iter().enumerate() {
        let at_wbar = mediators.iter().enumerate().all(|(mi, &m)| {
            let pos = top_vars.iter().position(|&v| v == m).unwrap();
            levels[pos] == wbar[mi]
        });
        if at_wbar {
            deleted.push((top_ti, local));
        }
    }
    MllSpec::new(space.clone(), terms, deleted)
}
