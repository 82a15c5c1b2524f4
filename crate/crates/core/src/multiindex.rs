//! Finitely supported multi-indices and downward-closed index sets.
//!
//! A multi-index `nu` is a sequence of nonnegative integers with finite
//! support; it indexes one Taylor or Legendre coefficient. Index sets used by
//! the expansion drivers are downward closed: together with `nu` they contain
//! every backward neighbor `nu - e_j`.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// A finitely supported multi-index, stored sparsely as
/// `(coordinate, exponent)` pairs with strictly increasing coordinates and no
/// zero exponents. Coordinates are 1-based.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct MultiIndex {
    entries: Vec<(u32, u32)>,
}

impl MultiIndex {
    /// The null index `0`.
    pub fn zero() -> Self {
        MultiIndex::default()
    }

    /// The Kronecker index `e_j` (1-based coordinate).
    pub fn unit(j: u32) -> Self {
        assert!(j >= 1, "coordinates are 1-based");
        MultiIndex {
            entries: vec![(j, 1)],
        }
    }

    /// Builds an index from arbitrary `(coordinate, exponent)` pairs,
    /// merging duplicates and dropping zero exponents.
    pub fn from_pairs<I: IntoIterator<Item = (u32, u32)>>(pairs: I) -> Self {
        let mut entries: Vec<(u32, u32)> = Vec::new();
        for (j, e) in pairs {
            assert!(j >= 1, "coordinates are 1-based");
            if e == 0 {
                continue;
            }
            match entries.iter_mut().find(|(jj, _)| *jj == j) {
                Some((_, ee)) => *ee += e,
                None => entries.push((j, e)),
            }
        }
        entries.sort_unstable_by_key(|&(j, _)| j);
        MultiIndex { entries }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// The exponent `nu_j` (0 if `j` is outside the support).
    pub fn get(&self, j: u32) -> u32 {
        self.entries
            .binary_search_by_key(&j, |&(jj, _)| jj)
            .map(|pos| self.entries[pos].1)
            .unwrap_or(0)
    }

    /// Iterates over `(coordinate, exponent)` pairs in coordinate order.
    pub fn pairs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.entries.iter().copied()
    }

    /// The support `{ j : nu_j > 0 }` in increasing order.
    pub fn support(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.iter().map(|&(j, _)| j)
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    /// Largest coordinate in the support, 0 for the null index.
    pub fn max_coordinate(&self) -> u32 {
        self.entries.last().map(|&(j, _)| j).unwrap_or(0)
    }

    /// Total order `|nu| = sum_j nu_j`.
    pub fn total_order(&self) -> u32 {
        self.entries.iter().map(|&(_, e)| e).sum()
    }

    /// The multinomial ratio `|nu|! / nu!`.
    ///
    /// Evaluated as a product of binomial coefficients over the partial sums
    /// of the exponents, which keeps every intermediate value integral.
    /// Guarded at `|nu| <= 170` so the result stays representable in an f64.
    pub fn factorial_ratio(&self) -> Result<f64, Error> {
        let total = self.total_order();
        if total > 170 {
            return Err(Error::FactorialOverflow(total));
        }
        let mut acc = 1.0_f64;
        let mut partial = 0u32;
        for &(_, e) in &self.entries {
            partial += e;
            acc *= binomial(u64::from(partial), u64::from(e));
        }
        Ok(acc)
    }

    /// `nu + e_j`.
    pub fn plus(&self, j: u32) -> Self {
        assert!(j >= 1, "coordinates are 1-based");
        let mut entries = self.entries.clone();
        match entries.binary_search_by_key(&j, |&(jj, _)| jj) {
            Ok(pos) => entries[pos].1 += 1,
            Err(pos) => entries.insert(pos, (j, 1)),
        }
        MultiIndex { entries }
    }

    /// `nu - e_j`, or `None` if `nu_j = 0`.
    pub fn minus(&self, j: u32) -> Option<Self> {
        let pos = self.entries.binary_search_by_key(&j, |&(jj, _)| jj).ok()?;
        let mut entries = self.entries.clone();
        if entries[pos].1 == 1 {
            entries.remove(pos);
        } else {
            entries[pos].1 -= 1;
        }
        Some(MultiIndex { entries })
    }

    /// All backward neighbors `nu - e_j` for `j` in the support.
    pub fn backward_neighbors(&self) -> impl Iterator<Item = MultiIndex> + '_ {
        self.entries
            .iter()
            .map(move |&(j, _)| self.minus(j).expect("support coordinate"))
    }

    /// Canonical total order: first by `|nu|`, then lexicographically on the
    /// dense prefix with the larger leading exponent first. This makes `e_1`
    /// precede `e_2`, and `2 e_1` precede `e_1 + e_2` within a layer.
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.total_order()
            .cmp(&other.total_order())
            .then_with(|| {
                let mut a = self.entries.iter().peekable();
                let mut b = other.entries.iter().peekable();
                loop {
                    match (a.peek(), b.peek()) {
                        (None, None) => return Ordering::Equal,
                        // remaining mass sits at later coordinates: the one
                        // with an entry at the earlier coordinate is larger
                        // there, hence comes first
                        (Some(_), None) => return Ordering::Less,
                        (None, Some(_)) => return Ordering::Greater,
                        (Some(&&(ja, ea)), Some(&&(jb, eb))) => match ja.cmp(&jb) {
                            Ordering::Less => return Ordering::Less,
                            Ordering::Greater => return Ordering::Greater,
                            Ordering::Equal => {
                                if ea != eb {
                                    return eb.cmp(&ea);
                                }
                                a.next();
                                b.next();
                            }
                        },
                    }
                }
            })
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.canonical_cmp(other)
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.entries.is_empty() {
            return write!(f, "{{}}");
        }
        write!(f, "{{")?;
        for (i, (j, e)) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}:{}", j, e)?;
        }
        write!(f, "}}")
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

// Wire format: a JSON object with string coordinate keys, e.g. {"1":2,"4":1}.
impl Serialize for MultiIndex {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.entries.len()))?;
        for &(j, e) in &self.entries {
            map.serialize_entry(&j.to_string(), &e)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for MultiIndex {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct MapVisitor;

        impl<'de> Visitor<'de> for MapVisitor {
            type Value = MultiIndex;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map from coordinate strings to exponents")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
                let mut pairs = Vec::new();
                while let Some((key, value)) = access.next_entry::<String, u32>()? {
                    let j: u32 = key.parse().map_err(|_| {
                        serde::de::Error::custom(format!("invalid coordinate key {key:?}"))
                    })?;
                    if j == 0 {
                        return Err(serde::de::Error::custom("coordinates are 1-based"));
                    }
                    pairs.push((j, value));
                }
                Ok(MultiIndex::from_pairs(pairs))
            }
        }

        deserializer.deserialize_map(MapVisitor)
    }
}

/// Total order `|nu|`.
pub fn total_order(nu: &MultiIndex) -> u32 {
    nu.total_order()
}

/// Binomial coefficient as f64 (exact for the small arguments used here).
pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0_f64;
    for i in 0..k {
        acc = acc * ((n - i) as f64) / ((i + 1) as f64);
    }
    acc.round()
}

/// Number of multi-indices of total order `k` on `dims` coordinates.
pub fn layer_cardinality(dims: u32, k: u32) -> f64 {
    if k == 0 {
        return 1.0;
    }
    binomial(u64::from(dims) + u64::from(k) - 1, u64::from(k))
}

/// `prod_{j in supp nu} rho_j^{nu_j}`, accumulated in the logarithm domain.
/// `rho[j-1]` holds the weight for coordinate `j`; all weights must be
/// strictly positive and the support must stay within the sequence.
pub fn monomial_weight(rho: &[f64], nu: &MultiIndex) -> f64 {
    let mut log_acc = 0.0_f64;
    for (j, e) in nu.pairs() {
        let r = rho[(j - 1) as usize];
        debug_assert!(r > 0.0);
        log_acc += f64::from(e) * r.ln();
    }
    log_acc.exp()
}

/// Legendre weight `a_nu = prod_j sqrt(2 nu_j + 1)`.
pub fn legendre_weight(nu: &MultiIndex) -> f64 {
    nu.pairs()
        .map(|(_, e)| (2.0 * f64::from(e) + 1.0).sqrt())
        .product()
}

/// Checks whether a finite set is downward closed: it contains the null index
/// and every backward neighbor of each of its elements.
pub fn is_downward_closed<'a, I>(set: I) -> bool
where
    I: IntoIterator<Item = &'a MultiIndex>,
{
    let all: BTreeSet<&MultiIndex> = set.into_iter().collect();
    if !all.iter().any(|nu| nu.is_zero()) {
        return false;
    }
    all.iter().all(|nu| {
        nu.backward_neighbors()
            .all(|neighbor| all.contains(&neighbor))
    })
}

/// A downward-closed multi-index set with a cached reduced margin.
///
/// The set operates over a finite coordinate budget `1..=max_coordinate`; the
/// margin never proposes coordinates beyond the budget. Mutation is
/// single-writer; shared reads are safe once construction is done.
/// Serializes as the array of its members.
#[derive(Clone, Debug)]
pub struct DownwardClosedSet {
    members: BTreeSet<MultiIndex>,
    reduced_margin: BTreeSet<MultiIndex>,
    max_coordinate: u32,
}

impl Serialize for DownwardClosedSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.members.iter())
    }
}

impl DownwardClosedSet {
    /// The singleton `{0}` with margin `{e_1, ..., e_J}`.
    pub fn new(max_coordinate: u32) -> Self {
        assert!(max_coordinate >= 1);
        let mut members = BTreeSet::new();
        members.insert(MultiIndex::zero());
        let reduced_margin = (1..=max_coordinate).map(MultiIndex::unit).collect();
        DownwardClosedSet {
            members,
            reduced_margin,
            max_coordinate,
        }
    }

    /// Rebuilds a set from explicit members, validating downward closure and
    /// recomputing the reduced margin from its definition.
    pub fn from_members<I>(members: I, max_coordinate: u32) -> Result<Self, Error>
    where
        I: IntoIterator<Item = MultiIndex>,
    {
        let members: BTreeSet<MultiIndex> = members.into_iter().collect();
        if !is_downward_closed(members.iter()) {
            return Err(Error::NotDownwardClosed);
        }
        let mut set = DownwardClosedSet {
            members,
            reduced_margin: BTreeSet::new(),
            max_coordinate,
        };
        set.reduced_margin = set.recompute_margin();
        Ok(set)
    }

    fn recompute_margin(&self) -> BTreeSet<MultiIndex> {
        let mut margin = BTreeSet::new();
        for nu in &self.members {
            for j in 1..=self.max_coordinate {
                let candidate = nu.plus(j);
                if self.members.contains(&candidate) || margin.contains(&candidate) {
                    continue;
                }
                if candidate
                    .backward_neighbors()
                    .all(|b| self.members.contains(&b))
                {
                    margin.insert(candidate);
                }
            }
        }
        margin
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn max_coordinate(&self) -> u32 {
        self.max_coordinate
    }

    pub fn contains(&self, nu: &MultiIndex) -> bool {
        self.members.contains(nu)
    }

    /// Members in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = &MultiIndex> {
        self.members.iter()
    }

    /// The cached reduced margin, in canonical order:
    /// `{ mu not in the set : mu - e_j in the set for all j in supp mu }`.
    pub fn reduced_margin(&self) -> impl Iterator<Item = &MultiIndex> {
        self.reduced_margin.iter()
    }

    pub fn margin_len(&self) -> usize {
        self.reduced_margin.len()
    }

    pub fn in_reduced_margin(&self, nu: &MultiIndex) -> bool {
        self.reduced_margin.contains(nu)
    }

    /// Moves `nu` from the reduced margin into the set and updates the margin
    /// incrementally, returning the indices that just became admissible.
    /// Only forward neighbors of `nu` can become admissible, and only `nu`
    /// itself stops being admissible, so the update is local.
    pub fn expand(&mut self, nu: &MultiIndex) -> Result<Vec<MultiIndex>, Error> {
        if !self.reduced_margin.remove(nu) {
            return Err(Error::NotInMargin(nu.to_string()));
        }
        self.members.insert(nu.clone());
        let mut admitted = Vec::new();
        for j in 1..=self.max_coordinate {
            let candidate = nu.plus(j);
            if self.members.contains(&candidate) {
                continue;
            }
            if candidate
                .backward_neighbors()
                .all(|b| self.members.contains(&b))
            {
                self.reduced_margin.insert(candidate.clone());
                admitted.push(candidate);
            }
        }
        Ok(admitted)
    }
}
