//! Legendre coefficients `u_nu` by an adaptive stochastic Galerkin method.
//!
//! The solution is expanded in the tensorized orthonormal Legendre basis
//! `L_nu(y) = prod_j L_{nu_j}(y_j)`. Multiplication by `y_j` couples degree
//! `k` to `k +- 1` through `c(k) = k / sqrt(4k^2 - 1)`, so the Galerkin
//! operator on a downward-closed set `Lambda` acts blockwise as
//!
//! ```text
//! (A U)_nu = A_abar U_nu
//!          + sum_j A_psi_j ( c(nu_j + 1) U_{nu+e_j} + c(nu_j) U_{nu-e_j} )
//! ```
//!
//! with out-of-set blocks dropped. The system is solved matrix-free by
//! conjugate gradients preconditioned with the block-diagonal `A_abar^{-1}`,
//! and the set is grown by bulk marking on residual-based margin indicators.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use crate::error::Error;
use crate::fem1d::{gauss_legendre, FemSpace, WeightFn};
use crate::fields::CoefficientField;
use crate::multiindex::{DownwardClosedSet, MultiIndex};
use crate::operators::OperatorSet;
use crate::taylor::{CoefficientEntry, CoefficientMap, ExpansionKind};

/// Default cap on the per-variable Legendre degree.
pub const DEGREE_CAP: u32 = 30;

/// Indicator threshold below which the margin is treated as converged.
const STAGNATION_TOL: f64 = 1e-14;

/// Three-term coupling coefficient of the orthonormal Legendre family:
/// `t L_k = c(k+1) L_{k+1} + c(k) L_{k-1}` with `c(k) = k / sqrt(4k^2 - 1)`
/// and `c(0) = 0`.
pub fn coupling(k: u32) -> f64 {
    if k == 0 {
        0.0
    } else {
        let kf = f64::from(k);
        kf / (4.0 * kf * kf - 1.0).sqrt()
    }
}

/// Orthonormal Legendre polynomial `L_k(t)` on `[-1,1]` with weight `dt/2`.
pub fn legendre_orthonormal(k: u32, t: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut current = 3f64.sqrt() * t;
    for m in 1..k {
        let next = (t * current - coupling(m) * prev) / coupling(m + 1);
        prev = current;
        current = next;
    }
    current
}

/// The block operator on a fixed downward-closed set.
pub struct GalerkinSystem<'a> {
    ops: &'a OperatorSet,
    lambda: Vec<MultiIndex>,
    position: HashMap<MultiIndex, usize>,
    /// Per block: `(psi index, other block, coupling factor)`.
    edges: Vec<Vec<(usize, usize, f64)>>,
    dofs: usize,
}

impl<'a> GalerkinSystem<'a> {
    /// Builds the operator for the members of `set`, in canonical order.
    pub fn new(ops: &'a OperatorSet, set: &DownwardClosedSet) -> Self {
        let lambda: Vec<MultiIndex> = set.iter().cloned().collect();
        let position: HashMap<MultiIndex, usize> = lambda
            .iter()
            .enumerate()
            .map(|(i, nu)| (nu.clone(), i))
            .collect();
        let mut edges: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); lambda.len()];
        for (i, nu) in lambda.iter().enumerate() {
            for (j, exponent) in nu.pairs() {
                let neighbor = nu.minus(j).expect("support coordinate");
                let p = position[&neighbor];
                let c = coupling(exponent);
                edges[i].push(((j - 1) as usize, p, c));
                edges[p].push(((j - 1) as usize, i, c));
            }
        }
        GalerkinSystem {
            ops,
            lambda,
            position,
            edges,
            dofs: ops.dofs(),
        }
    }

    pub fn lambda(&self) -> &[MultiIndex] {
        &self.lambda
    }

    pub fn block_count(&self) -> usize {
        self.lambda.len()
    }

    pub fn dofs(&self) -> usize {
        self.dofs
    }

    /// Matrix-free application `out = A u`. Blocks are processed in parallel;
    /// each block accumulates its edge sums in a fixed order, so the result
    /// is bit-reproducible regardless of thread count.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        debug_assert_eq!(u.len(), self.block_count() * self.dofs);
        debug_assert_eq!(out.len(), u.len());
        let dofs = self.dofs;
        out.par_chunks_mut(dofs).enumerate().for_each(|(i, chunk)| {
            chunk.fill(0.0);
            self.ops
                .a_bar
                .matvec_add(&u[i * dofs..(i + 1) * dofs], 1.0, chunk);
            for &(psi, p, c) in &self.edges[i] {
                self.ops.psi_mats[psi].matvec_add(&u[p * dofs..(p + 1) * dofs], c, chunk);
            }
        });
    }

    /// Block-diagonal preconditioner `z = diag(A_abar)^{-1} r`.
    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        let dofs = self.dofs;
        z.copy_from_slice(r);
        z.par_chunks_mut(dofs)
            .for_each(|chunk| self.ops.a_bar_chol.solve_in_place(chunk));
    }

    /// Preconditioned conjugate gradients. Stops when the preconditioned
    /// residual norm drops below `tol` times the preconditioned norm of the
    /// right-hand side (the zero-guess initial residual); iterations are
    /// capped at `10 |Lambda| + 1000`.
    pub fn solve_cg(
        &self,
        rhs: &[f64],
        tol: f64,
        warm_start: Option<&[f64]>,
    ) -> Result<Vec<f64>, Error> {
        let n = self.block_count() * self.dofs;
        let mut x = match warm_start {
            Some(x0) => x0.to_vec(),
            None => vec![0.0; n],
        };
        let mut ws = CgWorkspace::default();
        self.solve_cg_in_place(rhs, tol, &mut x, &mut ws)?;
        Ok(x)
    }

    /// CG with caller-owned iterate and scratch buffers, so repeated solves
    /// on growing sets reuse their allocations. `x` holds the initial guess
    /// on entry and the solution on exit.
    pub fn solve_cg_in_place(
        &self,
        rhs: &[f64],
        tol: f64,
        x: &mut [f64],
        ws: &mut CgWorkspace,
    ) -> Result<(), Error> {
        debug_assert_eq!(rhs.len(), self.block_count() * self.dofs);
        self.solve_cg_impl(&|r| r.copy_from_slice(rhs), tol, x, ws)
    }

    /// CG for a right-hand side supported on the first block only (a
    /// deterministic load); avoids materializing the padded vector.
    pub fn solve_cg_block0(
        &self,
        load: &[f64],
        tol: f64,
        x: &mut [f64],
        ws: &mut CgWorkspace,
    ) -> Result<(), Error> {
        debug_assert_eq!(load.len(), self.dofs);
        self.solve_cg_impl(
            &|r| {
                r.fill(0.0);
                r[..load.len()].copy_from_slice(load);
            },
            tol,
            x,
            ws,
        )
    }

    fn solve_cg_impl(
        &self,
        write_rhs: &dyn Fn(&mut [f64]),
        tol: f64,
        x: &mut [f64],
        ws: &mut CgWorkspace,
    ) -> Result<(), Error> {
        let n = self.block_count() * self.dofs;
        debug_assert_eq!(x.len(), n);
        ws.resize(n);
        let CgWorkspace { r, z, p, ap } = ws;

        write_rhs(r);
        self.precondition(r, z);
        let rhs_prec_sq = dot(r, z);
        if rhs_prec_sq == 0.0 {
            x.iter_mut().for_each(|v| *v = 0.0);
            return Ok(());
        }
        let threshold_sq = tol * tol * rhs_prec_sq;

        self.apply(x, ap);
        for (ri, ai) in r.iter_mut().zip(ap.iter()) {
            *ri -= ai;
        }
        self.precondition(r, z);
        let mut rz = dot(r, z);
        if rz <= threshold_sq {
            return Ok(());
        }
        p.copy_from_slice(z);

        let cap = 10 * self.block_count() + 1000;
        for _ in 0..cap {
            self.apply(p, ap);
            let pap = dot(p, ap);
            if !(pap > 0.0) {
                return Err(Error::Solver(format!(
                    "conjugate gradient curvature {pap} is not positive"
                )));
            }
            let alpha = rz / pap;
            for ((xi, pi), (ri, api)) in x.iter_mut().zip(p.iter()).zip(r.iter_mut().zip(ap.iter()))
            {
                *xi += alpha * pi;
                *ri -= alpha * api;
            }
            self.precondition(r, z);
            let rz_next = dot(r, z);
            if rz_next <= threshold_sq {
                return Ok(());
            }
            let beta = rz_next / rz;
            rz = rz_next;
            for (pi, zi) in p.iter_mut().zip(z.iter()) {
                *pi = zi + beta * *pi;
            }
        }
        Err(Error::CgStalled(cap))
    }

    /// Residual-based error indicators for the reduced margin: for `mu`
    /// outside the set with all backward neighbors inside,
    /// `eta_mu = || sum_j c(mu_j) A_psi_j U_{mu - e_j} ||` in the
    /// `A_abar^{-1}` energy.
    pub fn margin_indicators(&self, u: &[f64], margin: &[MultiIndex]) -> Result<Vec<f64>, Error> {
        let refs: Vec<&MultiIndex> = margin.iter().collect();
        self.margin_indicators_ref(u, &refs)
    }

    fn margin_indicators_ref(&self, u: &[f64], margin: &[&MultiIndex]) -> Result<Vec<f64>, Error> {
        let dofs = self.dofs;
        margin
            .par_iter()
            .map(|mu| {
                let mut residual = vec![0.0; dofs];
                for (j, exponent) in mu.pairs() {
                    let neighbor = mu.minus(j).expect("support coordinate");
                    let p = *self
                        .position
                        .get(&neighbor)
                        .ok_or_else(|| Error::MissingNeighbor(neighbor.to_string()))?;
                    self.ops.psi_mats[(j - 1) as usize].matvec_add(
                        &u[p * dofs..(p + 1) * dofs],
                        coupling(exponent),
                        &mut residual,
                    );
                }
                let mut z = residual.clone();
                self.ops.a_bar_chol.solve_in_place(&mut z);
                Ok(dot(&residual, &z).max(0.0).sqrt())
            })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    // sequential reduction in index order: deterministic across thread counts
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Scratch buffers for [`GalerkinSystem::solve_cg_in_place`].
#[derive(Default)]
pub struct CgWorkspace {
    r: Vec<f64>,
    z: Vec<f64>,
    p: Vec<f64>,
    ap: Vec<f64>,
}

impl CgWorkspace {
    fn resize(&mut self, n: usize) {
        self.r.resize(n, 0.0);
        self.z.resize(n, 0.0);
        self.p.resize(n, 0.0);
        self.ap.resize(n, 0.0);
    }
}

/// Result of an adaptive run.
pub struct AdaptiveRun {
    pub map: CoefficientMap,
    /// True when the run stopped because all margin indicators fell below
    /// the stagnation threshold (or the degree cap exhausted the margin)
    /// rather than by reaching the target size.
    pub stagnated: bool,
    pub refinement_steps: usize,
}

/// Adaptive stochastic Galerkin driver: solve on the current set, evaluate
/// margin indicators, then add the smallest prefix of margin indices (by
/// decreasing indicator) whose squared mass reaches `dorfler` times the
/// total, until the set holds `n_target` indices. Per-variable degrees are
/// capped at `degree_cap`.
pub fn adaptive_solve(
    field: &CoefficientField,
    space: &FemSpace,
    load: &[f64],
    n_target: usize,
    dorfler: f64,
    cg_tol: f64,
    degree_cap: u32,
) -> Result<AdaptiveRun, Error> {
    if !(dorfler > 0.0 && dorfler <= 1.0) {
        return Err(Error::Validation("dorfler must lie in (0, 1]".into()));
    }
    if n_target < 1 {
        return Err(Error::Validation("n_target must be at least 1".into()));
    }
    if field.theta() >= 1.0 {
        return Err(Error::UeaViolation {
            theta: field.theta(),
        });
    }
    let ops = OperatorSet::build(field, space)?;
    let dofs = ops.dofs();
    let mut set = DownwardClosedSet::new(field.j_count() as u32);
    let mut lambda: Vec<MultiIndex> = set.iter().cloned().collect();

    let mut ws = CgWorkspace::default();
    let mut u = vec![0.0; dofs];
    {
        // block 0 is always the null index, and the load sits there
        let system = GalerkinSystem::new(&ops, &set);
        system.solve_cg_block0(load, cg_tol, &mut u, &mut ws)?;
    }

    let amin = field.abar_min();
    let amax_sqrt = field.abar_max().sqrt();
    let psi_gamma: Vec<f64> = field
        .psis()
        .iter()
        .map(|psi| psi.sup_norm() / amin)
        .collect();
    const FULL_MARGIN_CAP: usize = 256;

    let mut stagnated = false;
    let mut steps = 0usize;
    while set.len() < n_target {
        let system = GalerkinSystem::new(&ops, &set);

        let marked = {
            // rigorous indicator bound per margin candidate:
            // eta_mu <= sqrt(abar_max) sum_j c(mu_j) gamma_j ||U_{mu-e_j}||_V
            let block_norms: Vec<f64> = (0..lambda.len())
                .map(|i| ops.v_norm(&u[i * dofs..(i + 1) * dofs]))
                .collect();
            let block_of: HashMap<&MultiIndex, usize> =
                lambda.iter().enumerate().map(|(i, nu)| (nu, i)).collect();
            let mut candidates: Vec<(&MultiIndex, f64)> = set
                .reduced_margin()
                .filter(|mu| mu.pairs().all(|(_, e)| e <= degree_cap))
                .map(|mu| {
                    let bound: f64 = mu
                        .pairs()
                        .map(|(j, e)| {
                            let neighbor = mu.minus(j).expect("support coordinate");
                            coupling(e)
                                * psi_gamma[(j - 1) as usize]
                                * block_norms[block_of[&neighbor]]
                        })
                        .sum();
                    (mu, amax_sqrt * bound)
                })
                .collect();
            if candidates.is_empty() {
                stagnated = true;
                break;
            }
            candidates.sort_unstable_by(|a, b| {
                b.1.partial_cmp(&a.1)
                    .expect("bounds are finite")
                    .then_with(|| a.0.cmp(b.0))
            });

            // evaluate indicators lazily in bound order until the computed
            // mass dominates the conservative total (computed + bounds)
            let full = candidates.len() <= FULL_MARGIN_CAP;
            let mut remaining_bound_mass: f64 = if full {
                0.0
            } else {
                candidates.iter().map(|(_, b)| b * b).sum()
            };
            let mut computed: Vec<(&MultiIndex, f64)> = Vec::new();
            let mut computed_mass = 0.0;
            let mut cursor = 0;
            while cursor < candidates.len() {
                if !full
                    && cursor > 0
                    && computed_mass >= dorfler * (computed_mass + remaining_bound_mass)
                    && computed.len() >= (n_target - set.len()).min(candidates.len())
                {
                    break;
                }
                let chunk_end = (cursor + 1024).min(candidates.len());
                let chunk: Vec<&MultiIndex> = candidates[cursor..chunk_end]
                    .iter()
                    .map(|(mu, _)| *mu)
                    .collect();
                let etas = system.margin_indicators_ref(&u, &chunk)?;
                for ((mu, bound), eta) in candidates[cursor..chunk_end].iter().zip(etas) {
                    computed_mass += eta * eta;
                    if !full {
                        remaining_bound_mass -= bound * bound;
                    }
                    computed.push((mu, eta));
                }
                cursor = chunk_end;
            }
            let total = computed_mass + remaining_bound_mass.max(0.0);

            let peak = computed
                .iter()
                .map(|(_, eta)| *eta)
                .fold(0.0_f64, f64::max)
                .max(if cursor < candidates.len() {
                    candidates[cursor].1
                } else {
                    0.0
                });
            if peak < STAGNATION_TOL {
                stagnated = true;
                break;
            }

            computed.sort_unstable_by(|a, b| {
                b.1.partial_cmp(&a.1)
                    .expect("indicators are finite")
                    .then_with(|| a.0.cmp(b.0))
            });
            let mut mass = 0.0;
            let mut marked: Vec<MultiIndex> = Vec::new();
            for (mu, eta) in computed {
                if mass >= dorfler * total || set.len() + marked.len() >= n_target {
                    break;
                }
                mass += eta * eta;
                marked.push(mu.clone());
            }
            marked
        };
        if marked.is_empty() {
            stagnated = true;
            break;
        }
        for mu in &marked {
            set.expand(mu)?;
        }
        steps += 1;

        // warm start: move the old blocks to their new positions in place.
        // Insertions only shift positions upward, so walking the new layout
        // from the back never overwrites a block before it is moved.
        let old_position: HashMap<MultiIndex, usize> = lambda
            .iter()
            .enumerate()
            .map(|(i, nu)| (nu.clone(), i))
            .collect();
        lambda = set.iter().cloned().collect();
        u.resize(lambda.len() * dofs, 0.0);
        for (i, nu) in lambda.iter().enumerate().rev() {
            match old_position.get(nu) {
                Some(&p) => {
                    debug_assert!(p <= i);
                    if p != i {
                        u.copy_within(p * dofs..(p + 1) * dofs, i * dofs);
                    }
                }
                None => u[i * dofs..(i + 1) * dofs].fill(0.0),
            }
        }
        let system = GalerkinSystem::new(&ops, &set);
        system.solve_cg_block0(load, cg_tol, &mut u, &mut ws)?;
    }

    // release the solver scratch before duplicating the blocks
    drop(ws);
    let mut entries = BTreeMap::new();
    for (i, nu) in lambda.iter().enumerate() {
        let block = &u[i * dofs..(i + 1) * dofs];
        entries.insert(
            nu.clone(),
            CoefficientEntry {
                v_norm: ops.v_norm(block),
                a_norm: ops.a_norm(block),
                vector: Some(block.to_vec()),
                member: true,
            },
        );
    }
    let f_dual_norm = ops.f_dual_norm(load);
    Ok(AdaptiveRun {
        map: CoefficientMap {
            entries,
            field: field.clone(),
            space: space.clone(),
            f_dual_norm,
            kind: ExpansionKind::Legendre,
        },
        stagnated,
        refinement_steps: steps,
    })
}

/// Direct evaluation of `u_nu = int u(y) L_nu(y) dmu(y)` by tensorized
/// Gauss-Legendre quadrature, solving the spatial problem at every node.
/// Returns `||u_nu||_V`. Feasible for at most 3 parametric variables.
pub fn quadrature_oracle(
    field: &CoefficientField,
    space: &FemSpace,
    load: &[f64],
    nu: &MultiIndex,
    nodes_per_dim: usize,
) -> Result<f64, Error> {
    let rule = quadrature_rule(field, Some(nu), nodes_per_dim)?;
    let ops = OperatorSet::build(field, space)?;
    let mut acc = vec![0.0; space.dof_count()];
    for_each_node(field, space, load, &rule, |y, weight, u_y| {
        let basis: f64 = nu
            .pairs()
            .map(|(j, e)| legendre_orthonormal(e, y[(j - 1) as usize]))
            .product();
        let factor = weight * basis;
        for (a, u) in acc.iter_mut().zip(u_y) {
            *a += factor * u;
        }
    })?;
    Ok(ops.v_norm(&acc))
}

/// `int ||u(y)||_V^2 dmu(y)` by the same tensor quadrature; the Parseval
/// counterpart of summing squared coefficient norms over all indices.
pub fn quadrature_mean_square_norm(
    field: &CoefficientField,
    space: &FemSpace,
    load: &[f64],
    nodes_per_dim: usize,
) -> Result<f64, Error> {
    let rule = quadrature_rule(field, None, nodes_per_dim)?;
    let ops = OperatorSet::build(field, space)?;
    let mut total = 0.0;
    for_each_node(field, space, load, &rule, |_, weight, u_y| {
        let norm = ops.v_norm(u_y);
        total += weight * norm * norm;
    })?;
    Ok(total)
}

fn quadrature_rule(
    field: &CoefficientField,
    nu: Option<&MultiIndex>,
    nodes_per_dim: usize,
) -> Result<Vec<(f64, f64)>, Error> {
    let dims = field.j_count();
    if dims > 3 {
        return Err(Error::DimensionGuard(dims));
    }
    let max_degree = nu.map_or(0, |nu| nu.pairs().map(|(_, e)| e).max().unwrap_or(0));
    if nodes_per_dim < (max_degree as usize) + 2 {
        return Err(Error::Validation(format!(
            "need at least {} quadrature nodes per dimension",
            max_degree + 2
        )));
    }
    Ok(gauss_legendre(nodes_per_dim))
}

/// Visits every tensor quadrature node, solving the spatial problem there.
fn for_each_node<F>(
    field: &CoefficientField,
    space: &FemSpace,
    load: &[f64],
    rule: &[(f64, f64)],
    mut visit: F,
) -> Result<(), Error>
where
    F: FnMut(&[f64], f64, &[f64]),
{
    let dims = field.j_count();
    let mut odometer = vec![0usize; dims];
    loop {
        let y: Vec<f64> = odometer.iter().map(|&i| rule[i].0).collect();
        // uniform product measure: each factor carries weight w/2
        let weight: f64 = odometer.iter().map(|&i| rule[i].1 / 2.0).product();
        let mut parts = Vec::with_capacity(dims + 1);
        parts.push(field.abar().clone());
        for (j, psi) in field.psis().iter().enumerate() {
            parts.push(psi.scale(y[j]));
        }
        let a_y = crate::fem1d::assemble_weighted_stiffness(space, &WeightFn::Sum(parts))?;
        let u_y = a_y.cholesky()?.solve(load);
        visit(&y, weight, &u_y);
        if !advance(&mut odometer, rule.len()) {
            return Ok(());
        }
    }
}

fn advance(odometer: &mut [usize], base: usize) -> bool {
    for slot in odometer.iter_mut() {
        *slot += 1;
        if *slot < base {
            return true;
        }
        *slot = 0;
    }
    false
}
