//! Decreasing rearrangements of coefficient norms, algebraic decay-rate
//! estimators, weighted summability diagnostics, and n-term tail errors.

use crate::error::Error;
use crate::fields::{compute_delta, WeightSequence};
use crate::multiindex::{legendre_weight, monomial_weight, MultiIndex};
use crate::taylor::{CoefficientMap, ExpansionKind};

/// Coefficient norms sorted in nonincreasing order, ties broken by the
/// canonical index order so rearrangements are deterministic.
#[derive(Clone, Debug)]
pub struct RearrangedSequence {
    pub values: Vec<f64>,
    pub origin: Vec<MultiIndex>,
}

impl RearrangedSequence {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Rearranges explicit `(index, norm)` pairs.
pub fn rearrange_pairs(pairs: Vec<(MultiIndex, f64)>) -> RearrangedSequence {
    let mut pairs = pairs;
    pairs.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("norms are finite")
            .then_with(|| a.0.cmp(&b.0))
    });
    let (origin, values) = pairs.into_iter().unzip();
    RearrangedSequence { values, origin }
}

/// Decreasing rearrangement of the V-norms of all computed coefficients.
pub fn rearrange(map: &CoefficientMap) -> RearrangedSequence {
    rearrange_pairs(
        map.iter()
            .map(|(nu, entry)| (nu.clone(), entry.v_norm))
            .collect(),
    )
}

/// Rearrangement restricted to the retained set members (margin
/// coefficients are computed for steering but are not part of the
/// selected n-term approximation).
pub fn rearrange_retained(map: &CoefficientMap) -> RearrangedSequence {
    rearrange_pairs(
        map.iter()
            .filter(|(_, entry)| entry.member)
            .map(|(nu, entry)| (nu.clone(), entry.v_norm))
            .collect(),
    )
}

/// Dyadic decay-rate estimates `s_i = log2(t*_{2^{i-1}}) - log2(t*_{2^i})`
/// for `i = 1..=i_max`; the sequence must hold at least `2^{i_max}` entries.
pub fn rate_estimates(seq: &RearrangedSequence, i_max: u32) -> Result<Vec<f64>, Error> {
    let needed = 1usize << i_max;
    if seq.values.len() < needed {
        return Err(Error::Validation(format!(
            "rate estimate s_{i_max} needs {needed} rearranged values, have {}",
            seq.values.len()
        )));
    }
    (1..=i_max)
        .map(|i| {
            let hi = seq.values[(1usize << (i - 1)) - 1];
            let lo = seq.values[(1usize << i) - 1];
            if !(lo > 0.0) {
                return Err(Error::Validation(format!(
                    "rearranged value at rank 2^{i} vanishes; rate undefined"
                )));
            }
            Ok(hi.log2() - lo.log2())
        })
        .collect()
}

/// The summability bound constant: for Taylor coefficients
/// `C = (2-delta) ||abar||_inf ||f||_{V'}^2 / ((2-2 delta) abar_min^3)`,
/// for Legendre coefficients
/// `C = (2-delta)(1+delta) ||abar||_inf^2 ||f||_{V'}^2 / (2 (1-delta)^4 abar_min^4)`.
pub fn bound_constant(map: &CoefficientMap, delta: f64, use_a_nu: bool) -> f64 {
    let amin = map.field.abar_min();
    let amax = map.field.abar_max();
    let f_sq = map.f_dual_norm * map.f_dual_norm;
    if use_a_nu {
        (2.0 - delta) * (1.0 + delta) * amax * amax * f_sq
            / (2.0 * (1.0 - delta).powi(4) * amin.powi(4))
    } else {
        (2.0 - delta) * amax * f_sq / ((2.0 - 2.0 * delta) * amin.powi(3))
    }
}

/// Weighted l2 partial sum against its theoretical bound:
/// `sum (w_nu ||t_nu||_V)^2` with `w_nu = rho^nu` for Taylor data and
/// `w_nu = a_nu^{-1} rho^nu` for Legendre data, summed in canonical order
/// over the computed coefficients. The weighted ellipticity value is
/// recomputed for the map's field and must stay below 1.
pub fn weighted_l2_diagnostic(
    map: &CoefficientMap,
    weights: &WeightSequence,
    use_a_nu: bool,
) -> Result<(f64, f64), Error> {
    let delta = compute_delta(&map.field, &weights.rho);
    if delta >= 1.0 {
        return Err(Error::DeltaViolation { delta });
    }
    let mut partial = 0.0;
    for (nu, entry) in map.iter() {
        if entry.v_norm == 0.0 {
            continue;
        }
        let mut w = monomial_weight(&weights.rho, nu) * entry.v_norm;
        if use_a_nu {
            w /= legendre_weight(nu);
        }
        partial += w * w;
    }
    Ok((partial, bound_constant(map, delta, use_a_nu)))
}

/// Default weight flavor for a map: Legendre data carries the `a_nu` factor.
pub fn use_a_nu_for(map: &CoefficientMap) -> bool {
    map.kind == ExpansionKind::Legendre
}

/// The l2 tail beyond the `n` largest computed coefficients:
/// `sqrt(sum_{rank > n} (t*_rank)^2)`. A lower proxy for the true tail,
/// since coefficients outside the computed set are excluded.
pub fn n_term_tail(map: &CoefficientMap, n: usize) -> f64 {
    let seq = rearrange(map);
    tail_of(&seq, n)
}

pub fn tail_of(seq: &RearrangedSequence, n: usize) -> f64 {
    seq.values
        .iter()
        .skip(n)
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}
