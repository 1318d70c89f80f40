//! Mixed parametrizations (μ_V, θ_U).
//!
//! A partition of the interaction sets into (V, U) defines a smooth
//! one-to-one reparametrization of the saturated model: mean parameters on V,
//! canonical parameters on U. The two halves are variation independent and
//! the expected information is block diagonal; `information_blocks` exhibits
//! that numerically, and `invert_mixed` recovers the joint table by Newton
//! iteration with the exact Jacobian C_V from `cov_block`.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::coding::{build_g, Coding, TermIndex};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::loglinear::{information_for_columns, mean_params, p_from_theta, theta_from_p, ThetaVector};
use crate::tables::{FactorSpace, Table, TableKind};

/// Disjoint, exhaustive split of all interaction sets into V (mean side)
/// and U (canonical side). Either side may be empty.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedPartition {
    space: FactorSpace,
    v_terms: Vec<usize>,
    u_terms: Vec<usize>,
    v_coords: Vec<usize>,
    u_coords: Vec<usize>,
}

impl MixedPartition {
    /// Puts the given interaction sets (strictly increasing variable
    /// indices) in V; every other set goes to U.
    pub fn new(space: FactorSpace, v_sets: &[&[usize]]) -> Result<Self> {
        let index = TermIndex::new(&space);
        let mut in_v = vec![false; index.num_terms()];
        for vars in v_sets {
            space.check_subset(vars)?;
            let t = index
                .find_term(vars)
                .ok_or_else(|| Error::Spec("interaction set not found".to_string()))?;
            if in_v[t] {
                return Err(Error::Spec(alloc::format!(
                    "interaction set {vars:?} listed twice"
                )));
            }
            in_v[t] = true;
        }
        let mut v_terms = Vec::new();
        let mut u_terms = Vec::new();
        let mut v_coords = Vec::new();
        let mut u_coords = Vec::new();
        for (t, term) in index.terms() {
            let coords = term.offset()..term.offset() + term.len();
            if in_v[t] {
                v_terms.push(t);
                v_coords.extend(coords);
            } else {
                u_terms.push(t);
                u_coords.extend(coords);
            }
        }
        Ok(MixedPartition {
            space,
            v_terms,
            u_terms,
            v_coords,
            u_coords,
        })
    }

    /// V = every interaction set of size ≤ `max_order`.
    pub fn up_to_order(space: FactorSpace, max_order: usize) -> Result<Self> {
        let index = TermIndex::new(&space);
        let sets: Vec<Vec<usize>> = index
            .terms()
            .filter(|(_, t)| t.vars().len() <= max_order)
            .map(|(_, t)| t.vars().to_vec())
            .collect();
        let refs: Vec<&[usize]> = sets.iter().map(|s| s.as_slice()).collect();
        MixedPartition::new(space, &refs)
    }

    pub fn space(&self) -> &FactorSpace {
        &self.space
    }

    pub fn v_terms(&self) -> &[usize] {
        &self.v_terms
    }

    pub fn u_terms(&self) -> &[usize] {
        &self.u_terms
    }

    /// Parameter coordinates (TermIndex order) belonging to V.
    pub fn v_coords(&self) -> &[usize] {
        &self.v_coords
    }

    /// Parameter coordinates (TermIndex order) belonging to U.
    pub fn u_coords(&self) -> &[usize] {
        &self.u_coords
    }
}

/// A point (μ_V, θ_U) of the mixed parametrization.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedParam {
    partition: MixedPartition,
    coding: Coding,
    mu_v: Vec<f64>,
    theta_u: Vec<f64>,
}

impl MixedParam {
    pub fn new(
        partition: MixedPartition,
        coding: Coding,
        mu_v: Vec<f64>,
        theta_u: Vec<f64>,
    ) -> Result<Self> {
        if mu_v.len() != partition.v_coords.len() || theta_u.len() != partition.u_coords.len() {
            return Err(Error::Spec(alloc::format!(
                "mixed parameter sizes ({}, {}) do not match partition ({}, {})",
                mu_v.len(),
                theta_u.len(),
                partition.v_coords.len(),
                partition.u_coords.len()
            )));
        }
        if mu_v.iter().chain(&theta_u).any(|v| !v.is_finite()) {
            return Err(Error::Spec("non-finite mixed parameter".to_string()));
        }
        Ok(MixedParam {
            partition,
            coding,
            mu_v,
            theta_u,
        })
    }

    pub fn partition(&self) -> &MixedPartition {
        &self.partition
    }

    pub fn coding(&self) -> Coding {
        self.coding
    }

    pub fn mu_v(&self) -> &[f64] {
        &self.mu_v
    }

    pub fn theta_u(&self) -> &[f64] {
        &self.theta_u
    }
}

/// Reads (μ_V, θ_U) off a strictly positive table.
pub fn split_mixed(p: &Table, partition: &MixedPartition, coding: Coding) -> Result<MixedParam> {
    if p.space() != &partition.space {
        return Err(Error::Spec("table space does not match partition".to_string()));
    }
    let mu = mean_params(p, coding)?;
    let theta = theta_from_p(p, coding)?;
    let mu_v = partition.v_coords.iter().map(|&c| mu[c]).collect();
    let theta_u = partition.u_coords.iter().map(|&c| theta[c]).collect();
    MixedParam::new(partition.clone(), coding, mu_v, theta_u)
}

/// Largest per-coordinate θ_V change accepted in one Newton iteration.
const MAX_STEP: f64 = 4.0;

/// Newton inversion of the mixed map: finds the unique strictly positive
/// table with the requested (μ_V, θ_U). θ_U holds exactly by construction;
/// the μ_V residual is guaranteed below 1e−10 (max abs) and polished toward
/// 1e−13 while steps keep improving, using the exact Jacobian C_V with a
/// step cap and step-halving, at most 200 iterations.
pub fn invert_mixed(m: &MixedParam) -> Result<Table> {
    let space = &m.partition.space;
    let k = space.total_cells();
    let g = build_g(space, m.coding);
    let v = &m.partition.v_coords;
    let u = &m.partition.u_coords;

    let mut theta = vec![0.0; k - 1];
    for (j, &c) in u.iter().enumerate() {
        theta[c] = m.theta_u[j];
    }

    // (table, residual, max-abs for the tolerance, sum of squares for the
    // line search — the Newton direction is a descent direction for ½‖r‖²).
    let eval = |theta: &[f64]| -> Result<(Table, Vec<f64>, f64, f64)> {
        let p = p_from_theta(&ThetaVector::new(theta.to_vec(), m.coding)?, space)?;
        let mu = g.tr_matvec(p.values());
        let r: Vec<f64> = v.iter().enumerate().map(|(j, &c)| m.mu_v[j] - mu[c]).collect();
        let res = r.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let ssq = r.iter().map(|&b| b * b).sum();
        Ok((p, r, res, ssq))
    };

    // Guaranteed tolerance, and the point past which polishing stops.
    const TOL: f64 = 1e-10;
    const POLISH: f64 = 1e-13;

    let (mut p, mut r, mut res, mut ssq) = eval(&theta)?;
    if v.is_empty() || res <= POLISH {
        return Ok(p);
    }
    let mut trace = vec![res];
    for _ in 0..200 {
        let c_v = information_for_columns(p.values(), &g, Some(v));
        let mut delta = c_v.cholesky()?.solve(&r);
        // Trust-region cap: an uncapped first step can jump to a degenerate
        // table where C_V is numerically singular.
        let dmax = delta.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        if dmax > MAX_STEP {
            for d in &mut delta {
                *d *= MAX_STEP / dmax;
            }
        }
        let mut accepted = false;
        let mut t = 1.0;
        for _ in 0..=20 {
            let mut cand = theta.clone();
            for (j, &c) in v.iter().enumerate() {
                cand[c] += t * delta[j];
            }
            let (cp, cr, cres, cssq) = eval(&cand)?;
            if cssq < ssq {
                theta = cand;
                p = cp;
                r = cr;
                res = cres;
                ssq = cssq;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        trace.push(res);
        if res <= POLISH {
            return Ok(p);
        }
        if !accepted {
            // Quadratic convergence normally lands far below TOL; a stalled
            // line search within tolerance is still a success.
            if res <= TOL {
                return Ok(p);
            }
            return Err(Error::NoConvergence {
                iterations: trace.len() - 1,
                residual: res,
                trace,
            });
        }
    }
    if res <= TOL {
        return Ok(p);
    }
    Err(Error::NoConvergence {
        iterations: 200,
        residual: res,
        trace,
    })
}

fn two_way_probabilities(t: &Table, label: &str) -> Result<()> {
    if t.space().num_vars() != 2 {
        return Err(Error::Spec(alloc::format!(
            "{label} must be a two-variable table"
        )));
    }
    if t.kind() != TableKind::Probabilities {
        return Err(Error::KindMismatch {
            expected: "probabilities",
        });
    }
    Ok(())
}

fn max_marginal_gap(a: &Table, av: usize, b: &Table, bv: usize) -> Result<f64> {
    let ma = a.marginalize(&[av])?;
    let mb = b.marginalize(&[bv])?;
    Ok(ma
        .values()
        .iter()
        .zip(mb.values())
        .fold(0.0f64, |m, (&x, &y)| m.max((x - y).abs())))
}

/// Reconstructs the joint XWY table from its three pairwise marginals and a
/// given three-way interaction θ_XWY (Rc coding). The tables must share
/// variable names pairwise — (X,W), (X,Y), (W,Y) in declaration order — and
/// agree on the one-way marginals within 1e−10.
pub fn reconstruct_from_pairwise(
    m_xw: &Table,
    m_xy: &Table,
    m_wy: &Table,
    theta_xwy: &[f64],
) -> Result<Table> {
    two_way_probabilities(m_xw, "XW marginal")?;
    two_way_probabilities(m_xy, "XY marginal")?;
    two_way_probabilities(m_wy, "WY marginal")?;
    let (sxw, sxy, swy) = (m_xw.space(), m_xy.space(), m_wy.space());
    let agree = |a: &FactorSpace, ai: usize, b: &FactorSpace, bi: usize| {
        a.name(ai) == b.name(bi) && a.levels(ai) == b.levels(bi)
    };
    if !agree(sxw, 0, sxy, 0) || !agree(sxw, 1, swy, 0) || !agree(sxy, 1, swy, 1) {
        return Err(Error::Spec(
            "pairwise tables must be over (X,W), (X,Y), (W,Y) with matching names and levels"
                .to_string(),
        ));
    }

    let mut max_gap = max_marginal_gap(m_xw, 0, m_xy, 0)?;
    max_gap = max_gap.max(max_marginal_gap(m_xw, 1, m_wy, 0)?);
    max_gap = max_gap.max(max_marginal_gap(m_xy, 1, m_wy, 1)?);
    if max_gap > 1e-10 {
        return Err(Error::InconsistentMarginals { max_gap });
    }

    let space = FactorSpace::new(&[
        (sxw.name(0), sxw.levels(0)),
        (sxw.name(1), sxw.levels(1)),
        (sxy.name(1), sxy.levels(1)),
    ])?;
    let partition = MixedPartition::up_to_order(space.clone(), 2)?;
    let expect = (sxw.levels(0) - 1) * (sxw.levels(1) - 1) * (sxy.levels(1) - 1);
    if theta_xwy.len() != expect {
        return Err(Error::Spec(alloc::format!(
            "theta_XWY needs {expect} entries, got {}",
            theta_xwy.len()
        )));
    }

    // Under Rc, μ_V entries are marginal probabilities read off the inputs.
    let index = TermIndex::new(&space);
    let p_x = m_xw.marginalize(&[0])?;
    let p_w = m_xw.marginalize(&[1])?;
    let p_y = m_xy.marginalize(&[1])?;
    let mut mu_v = Vec::with_capacity(partition.v_coords.len());
    for &t in &partition.v_terms {
        let term = index.term(t);
        for local in 0..term.len() {
            let (_, levels) = index.decode(term.offset() + local);
            let value = match term.vars() {
                [0] => p_x.values()[levels[0]],
                [1] => p_w.values()[levels[0]],
                [2] => p_y.values()[levels[0]],
                [0, 1] => m_xw.value(&levels),
                [0, 2] => m_xy.value(&levels),
                [1, 2] => m_wy.value(&levels),
                other => {
                    return Err(Error::Spec(alloc::format!(
                        "unexpected term {other:?} in pairwise partition"
                    )))
                }
            };
            mu_v.push(value);
        }
    }
    let m = MixedParam::new(partition, Coding::Rc, mu_v, theta_xwy.to_vec())?;
    invert_mixed(&m)
}

/// Expected information of the mixed parametrization, split into blocks.
#[derive(Clone, Debug)]
pub struct InformationBlocks {
    pub vv: Matrix,
    pub uu: Matrix,
    pub cross: Matrix,
}

/// Transforms the canonical information F = G'ΩG with the Jacobian of
/// ξ = (μ_V, θ_U) w.r.t. θ: F_ξ = J⁻ᵀ F J⁻¹ with J = [F rows on V; E_U].
/// The cross block is reported so callers can check it vanishes.
pub fn information_blocks(
    p: &Table,
    partition: &MixedPartition,
    coding: Coding,
) -> Result<InformationBlocks> {
    if p.space() != &partition.space {
        return Err(Error::Spec("table space does not match partition".to_string()));
    }
    let f = crate::loglinear::full_information(p, coding)?;
    let n = f.rows();
    let nv = partition.v_coords.len();
    let mut j = Matrix::zeros(n, n);
    for (row, &c) in partition.v_coords.iter().enumerate() {
        j.row_mut(row).copy_from_slice(f.row(c));
    }
    for (i, &c) in partition.u_coords.iter().enumerate() {
        j[(nv + i, c)] = 1.0;
    }
    let j_inv = j.lu()?.inverse();
    let f_xi = j_inv.transpose().matmul(&f).matmul(&j_inv);
    Ok(InformationBlocks {
        vv: f_xi.block(0, nv, 0, nv),
        uu: f_xi.block(nv, n, nv, n),
        cross: f_xi.block(0, nv, nv, n),
    })
}
