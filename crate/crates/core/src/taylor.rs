//! Taylor coefficients `t_nu` of the solution map, computed by the recursion
//!
//! ```text
//! int abar t_0' v'  = <f, v>
//! int abar t_nu' v' = - sum_{j in supp nu} int psi_j t_{nu-e_j}' v'
//! ```
//!
//! driven over downward-closed sets by bulk-chasing on the reduced margin.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use rayon::prelude::*;

use crate::error::Error;
use crate::fem1d::FemSpace;
use crate::fields::CoefficientField;
use crate::multiindex::{layer_cardinality, DownwardClosedSet, MultiIndex};
use crate::operators::OperatorSet;

/// Which expansion a coefficient map holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpansionKind {
    Taylor,
    Legendre,
}

impl ExpansionKind {
    pub fn tag(&self) -> &'static str {
        match self {
            ExpansionKind::Taylor => "taylor",
            ExpansionKind::Legendre => "legendre",
        }
    }
}

/// Heap entry ordering margin indices by a value (norm or norm bound),
/// with canonical index order breaking ties: the canonically earlier index
/// ranks higher, so heap pops are deterministic.
struct Ranked {
    value: f64,
    index: MultiIndex,
}

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked {}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value
            .partial_cmp(&other.value)
            .expect("ranking values are finite")
            .then_with(|| other.index.cmp(&self.index))
    }
}

/// One computed coefficient. Margin coefficients at experiment scale keep
/// only their norms; the dof vector is retained for set members and
/// re-materialized on promotion.
#[derive(Clone, Debug)]
pub struct CoefficientEntry {
    pub vector: Option<Vec<f64>>,
    pub v_norm: f64,
    pub a_norm: f64,
    /// Whether the index belongs to the retained set (as opposed to the
    /// computed reduced margin).
    pub member: bool,
}

/// Map `nu -> t_nu` (or `u_nu`) with the context needed by the analysis
/// stage. The key set is downward closed at all times: members form a
/// downward-closed set and every other entry lies in its reduced margin.
pub struct CoefficientMap {
    pub entries: BTreeMap<MultiIndex, CoefficientEntry>,
    pub field: CoefficientField,
    pub space: FemSpace,
    /// Discrete dual norm of the right-hand side.
    pub f_dual_norm: f64,
    pub kind: ExpansionKind,
}

impl CoefficientMap {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn member_count(&self) -> usize {
        self.entries.values().filter(|e| e.member).count()
    }

    pub fn get(&self, nu: &MultiIndex) -> Option<&CoefficientEntry> {
        self.entries.get(nu)
    }

    /// `(nu, entry)` pairs in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, &CoefficientEntry)> {
        self.entries.iter()
    }

    /// Writes the `(index_json, v_norm)` dump in canonical order.
    pub fn dump_csv<W: std::io::Write>(&self, out: W) -> Result<(), Error> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["index_json", "v_norm"])?;
        for (nu, entry) in &self.entries {
            writer.write_record([serde_json::to_string(nu)?, entry.v_norm.to_string()])?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Energy of one complete Taylor layer: `sum_{|nu| = k} ||t_nu||_abar^2`.
/// The layer must be fully present in the map (layerwise runs guarantee
/// this); partial layers are reported as an error.
pub fn layer_energy(map: &CoefficientMap, k: u32) -> Result<f64, Error> {
    let dims = map.field.j_count() as u32;
    let expected = layer_cardinality(dims, k);
    let mut count = 0u64;
    let mut sum = 0.0;
    for (nu, entry) in &map.entries {
        if nu.total_order() == k {
            count += 1;
            sum += entry.a_norm * entry.a_norm;
        }
    }
    if (count as f64) != expected {
        return Err(Error::IncompleteLayer {
            order: k,
            present: count,
            expected: expected as u64,
        });
    }
    Ok(sum)
}

/// Solves the background problem for `t_0`.
pub fn compute_t0(
    field: &CoefficientField,
    space: &FemSpace,
    load: &[f64],
) -> Result<Vec<f64>, Error> {
    let ops = OperatorSet::build(field, space)?;
    Ok(ops.a_bar_chol.solve(load))
}

/// Driver for the Taylor recursion over a growing downward-closed set.
pub struct TaylorExpansion {
    ops: OperatorSet,
    set: DownwardClosedSet,
    map: CoefficientMap,
}

impl TaylorExpansion {
    /// Assembles the operators and computes `t_0`.
    pub fn new(
        field: CoefficientField,
        space: FemSpace,
        load: Vec<f64>,
    ) -> Result<Self, Error> {
        if load.len() != space.dof_count() {
            return Err(Error::Validation(
                "load vector length must match the dof count".into(),
            ));
        }
        let ops = OperatorSet::build(&field, &space)?;
        let t0 = ops.a_bar_chol.solve(&load);
        let entry = CoefficientEntry {
            v_norm: ops.v_norm(&t0),
            a_norm: ops.a_norm(&t0),
            vector: Some(t0),
            member: true,
        };
        let f_dual_norm = ops.f_dual_norm(&load);
        let mut entries = BTreeMap::new();
        entries.insert(MultiIndex::zero(), entry);
        let set = DownwardClosedSet::new(field.j_count() as u32);
        Ok(TaylorExpansion {
            ops,
            set,
            map: CoefficientMap {
                entries,
                field,
                space,
                f_dual_norm,
                kind: ExpansionKind::Taylor,
            },
        })
    }

    pub fn map(&self) -> &CoefficientMap {
        &self.map
    }

    pub fn into_map(self) -> CoefficientMap {
        self.map
    }

    pub fn set(&self) -> &DownwardClosedSet {
        &self.set
    }

    pub fn operators(&self) -> &OperatorSet {
        &self.ops
    }

    pub fn t0(&self) -> &[f64] {
        self.map
            .entries
            .get(&MultiIndex::zero())
            .and_then(|e| e.vector.as_deref())
            .expect("t_0 is computed at construction")
    }

    fn solve_coefficient(&self, nu: &MultiIndex) -> Result<Vec<f64>, Error> {
        debug_assert!(!nu.is_zero());
        let mut rhs = vec![0.0; self.ops.dofs()];
        for (j, _) in nu.pairs() {
            let neighbor = nu.minus(j).expect("support coordinate");
            let t_prev = self
                .map
                .entries
                .get(&neighbor)
                .and_then(|e| e.vector.as_deref())
                .ok_or_else(|| Error::MissingNeighbor(neighbor.to_string()))?;
            self.ops.psi_mats[(j - 1) as usize].matvec_add(t_prev, -1.0, &mut rhs);
        }
        let mut x = rhs;
        self.ops.a_bar_chol.solve_in_place(&mut x);
        Ok(x)
    }

    /// One recursion step: computes `t_nu` from its backward neighbors and
    /// inserts it (with vector and norms) into the map.
    pub fn step(&mut self, nu: &MultiIndex) -> Result<(), Error> {
        if nu.is_zero() {
            return Err(Error::Validation(
                "t_0 is computed at construction, not by the recursion".into(),
            ));
        }
        let x = self.solve_coefficient(nu)?;
        let entry = CoefficientEntry {
            v_norm: self.ops.v_norm(&x),
            a_norm: self.ops.a_norm(&x),
            vector: Some(x),
            member: self.set.contains(nu),
        };
        self.map.entries.insert(nu.clone(), entry);
        Ok(())
    }

    /// Rigorous upper bound on a margin coefficient norm from its backward
    /// neighbors: `||t_mu||_V <= sum_j (||psi_j||_inf / abar_min)
    /// ||t_{mu-e_j}||_V` (continuity of the recursion solve).
    fn margin_bound(&self, psi_gamma: &[f64], mu: &MultiIndex) -> f64 {
        mu.pairs()
            .map(|(j, _)| {
                let neighbor = mu.minus(j).expect("support coordinate");
                psi_gamma[(j - 1) as usize] * self.map.entries[&neighbor].v_norm
            })
            .sum()
    }

    /// Solves the next chunk of unsolved candidates in decreasing bound
    /// order and moves them into the solved pool.
    fn solve_pending_chunk(
        &mut self,
        pending: &mut BinaryHeap<Ranked>,
        pool: &mut BinaryHeap<Ranked>,
        chunk: usize,
    ) -> Result<(), Error> {
        let batch: Vec<MultiIndex> = (0..chunk)
            .filter_map(|_| pending.pop().map(|r| r.index))
            .collect();
        let solved: Vec<(MultiIndex, f64, f64)> = batch
            .par_iter()
            .map(|nu| {
                let x = self.solve_coefficient(nu)?;
                Ok((nu.clone(), self.ops.v_norm(&x), self.ops.a_norm(&x)))
            })
            .collect::<Result<_, Error>>()?;
        for (nu, v_norm, a_norm) in solved {
            pool.push(Ranked {
                value: v_norm,
                index: nu.clone(),
            });
            self.map.entries.insert(
                nu,
                CoefficientEntry {
                    vector: None,
                    v_norm,
                    a_norm,
                    member: false,
                },
            );
        }
        Ok(())
    }

    /// Promotes one index into the set: materializes its vector, flags it,
    /// expands the set, and queues the newly admissible candidates.
    fn promote(
        &mut self,
        nu: MultiIndex,
        psi_gamma: &[f64],
        pending: &mut BinaryHeap<Ranked>,
    ) -> Result<(), Error> {
        let x = self.solve_coefficient(&nu)?;
        let entry = self.map.entries.get_mut(&nu).expect("solved before promotion");
        entry.vector = Some(x);
        entry.member = true;
        for fresh in self.set.expand(&nu)? {
            let bound = self.margin_bound(psi_gamma, &fresh);
            pending.push(Ranked {
                value: bound,
                index: fresh,
            });
        }
        Ok(())
    }

    /// Bulk-chasing greedy expansion: every sweep promotes
    /// `ceil(bulk * |margin|)` indices by decreasing coefficient V-norm
    /// (ties broken by canonical order, never overshooting `n_target`) into
    /// the set, until the set holds at least `n_target` indices.
    ///
    /// With `bulk = 1` a sweep promotes exactly the sweep-start margin, so
    /// expansion is layer by layer. For `bulk < 1` the selection re-ranks
    /// after every promotion, so chains like `k e_1` can deepen within one
    /// sweep instead of one level per sweep.
    ///
    /// Margin coefficients are solved lazily in decreasing order of a
    /// rigorous norm bound; solving stops once the next promotion is
    /// provably the margin maximum, so deep-margin indices whose bound
    /// already rules them out are never solved.
    pub fn greedy(&mut self, n_target: usize, bulk: f64) -> Result<(), Error> {
        if !(bulk > 0.0 && bulk <= 1.0) {
            return Err(Error::Validation("bulk must lie in (0, 1]".into()));
        }
        if n_target < 1 {
            return Err(Error::Validation("n_target must be at least 1".into()));
        }
        let amin = self.map.field.abar_min();
        let psi_gamma: Vec<f64> = self
            .map
            .field
            .psis()
            .iter()
            .map(|psi| psi.sup_norm() / amin)
            .collect();
        const FINAL_SWEEP_SOLVES: usize = 256;

        // unsolved margin candidates keyed by their norm bound
        let mut pending: BinaryHeap<Ranked> = self
            .set
            .reduced_margin()
            .filter(|nu| !self.map.entries.contains_key(*nu))
            .map(|nu| Ranked {
                value: self.margin_bound(&psi_gamma, nu),
                index: nu.clone(),
            })
            .collect();
        // solved, unpromoted margin indices keyed by their norm
        let mut pool: BinaryHeap<Ranked> = self
            .set
            .reduced_margin()
            .filter_map(|nu| {
                self.map.entries.get(nu).map(|e| Ranked {
                    value: e.v_norm,
                    index: nu.clone(),
                })
            })
            .collect();

        loop {
            let margin_size = self.set.margin_len();
            let take = ((bulk * margin_size as f64).ceil() as usize)
                .max(1)
                .min(n_target.saturating_sub(self.set.len()));

            if self.set.len() >= n_target {
                // target reached: solve the leading margin candidates so the
                // returned map carries the top margin norms, then stop
                let budget = FINAL_SWEEP_SOLVES.min(margin_size);
                while pool.len() < budget && !pending.is_empty() {
                    self.solve_pending_chunk(&mut pending, &mut pool, 64)?;
                }
                return Ok(());
            }

            if bulk >= 1.0 {
                // promote exactly the sweep-start margin (layerwise)
                while !pending.is_empty() {
                    self.solve_pending_chunk(&mut pending, &mut pool, 1024)?;
                }
                let batch: Vec<MultiIndex> = std::mem::take(&mut pool)
                    .into_sorted_vec()
                    .into_iter()
                    .rev()
                    .take(take)
                    .map(|r| r.index)
                    .collect();
                let mut rest: BinaryHeap<Ranked> = BinaryHeap::new();
                // anything beyond `take` stays in the pool
                // (sorted_vec is ascending, so the kept prefix is the tail)
                if batch.len() < margin_size {
                    rest = self
                        .set
                        .reduced_margin()
                        .filter(|nu| !batch.contains(nu))
                        .filter_map(|nu| {
                            self.map.entries.get(nu).map(|e| Ranked {
                                value: e.v_norm,
                                index: nu.clone(),
                            })
                        })
                        .collect();
                }
                for nu in batch {
                    self.promote(nu, &psi_gamma, &mut pending)?;
                }
                pool = rest;
            } else {
                // one promotion at a time with live re-ranking
                for _ in 0..take {
                    loop {
                        let next_bound = pending.peek().map(|r| r.value);
                        let best_norm = pool.peek().map(|r| r.value);
                        match (best_norm, next_bound) {
                            (Some(norm), Some(bound)) if norm >= bound => break,
                            (_, None) => break,
                            _ => self.solve_pending_chunk(&mut pending, &mut pool, 64)?,
                        }
                    }
                    let Some(best) = pool.pop() else { break };
                    self.promote(best.index, &psi_gamma, &mut pending)?;
                }
            }
        }
    }

    /// Energy of a complete layer; see [`layer_energy`].
    pub fn layer_energy(&self, k: u32) -> Result<f64, Error> {
        layer_energy(&self.map, k)
    }
}

/// Runs the full greedy Taylor expansion and returns the coefficient map
/// (set members plus the computed reduced margin, flagged).
pub fn greedy_expand(
    field: &CoefficientField,
    space: &FemSpace,
    load: &[f64],
    n_target: usize,
    bulk: f64,
) -> Result<CoefficientMap, Error> {
    let mut expansion = TaylorExpansion::new(field.clone(), space.clone(), load.to_vec())?;
    expansion.greedy(n_target, bulk)?;
    Ok(expansion.into_map())
}

/// Number of indices in the full simplex `{ |nu| <= order }` over `dims`
/// coordinates; the `n_target` for complete layerwise runs.
pub fn simplex_size(dims: u32, order: u32) -> usize {
    (0..=order).map(|k| layer_cardinality(dims, k)).sum::<f64>() as usize
}
