//! Observed values and the ranking-with-ties helpers shared by sampling,
//! prediction and metrics.
//!
//! Category indices are zero-based. Ranks are dense and one-based: rank 1 is
//! the most preferred group, tied categories share a rank, and the set of
//! used ranks is always `1..=P` for some `P <= M`.

use serde::{Deserialize, Serialize};

use crate::schema::VariableKind;

/// One observation of a single variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Missing,
    Binary(bool),
    Categorical(usize),
    /// Activation indicator per category; at least one is set.
    Multicat(Vec<bool>),
    /// Standardized units when stored in a [`crate::Dataset`].
    Continuous(f64),
    Ordinal(usize),
    /// Dense rank per category.
    Ranked(Vec<u32>),
}

impl Value {
    pub fn is_missing(&self) -> bool {
        matches!(self, Value::Missing)
    }

    pub fn kind(&self) -> Option<VariableKind> {
        Some(match self {
            Value::Missing => return None,
            Value::Binary(_) => VariableKind::Binary,
            Value::Categorical(_) => VariableKind::Categorical,
            Value::Multicat(_) => VariableKind::Multicategorical,
            Value::Continuous(_) => VariableKind::Continuous,
            Value::Ordinal(_) => VariableKind::Ordinal,
            Value::Ranked(_) => VariableKind::CategoryRanked,
        })
    }
}

/// Outcome of comparing categories `l < m` of a ranked variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PairOutcome {
    /// `c_l` preferred over `c_m`.
    First,
    Tie,
    /// `c_m` preferred over `c_l`.
    Second,
}

impl PairOutcome {
    pub const ALL: [PairOutcome; 3] = [PairOutcome::First, PairOutcome::Tie, PairOutcome::Second];
}

/// Number of unordered category pairs.
pub fn pair_count(m: usize) -> usize {
    m * m.saturating_sub(1) / 2
}

/// Pairs `(l, m)` with `l < m`, in the canonical order used for every
/// pairwise table in the crate.
pub fn pairs(m: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..m).flat_map(move |l| (l + 1..m).map(move |r| (l, r)))
}

/// Position of pair `(l, m)` (`l < m`) in [`pairs`] order.
pub fn pair_index(l: usize, m: usize, size: usize) -> usize {
    debug_assert!(l < m && m < size);
    l * size - l * (l + 1) / 2 + (m - l - 1)
}

/// True when `ranks` is a valid dense ranking.
pub fn is_dense_ranking(ranks: &[u32]) -> bool {
    if ranks.is_empty() {
        return false;
    }
    let mut used = vec![false; ranks.len()];
    for &r in ranks {
        if r == 0 || r as usize > ranks.len() {
            return false;
        }
        used[r as usize - 1] = true;
    }
    let parts = used.iter().take_while(|&&u| u).count();
    used[parts..].iter().all(|&u| !u)
}

pub fn ranks_to_pairs(ranks: &[u32]) -> Vec<PairOutcome> {
    pairs(ranks.len())
        .map(|(l, m)| match ranks[l].cmp(&ranks[m]) {
            std::cmp::Ordering::Less => PairOutcome::First,
            std::cmp::Ordering::Equal => PairOutcome::Tie,
            std::cmp::Ordering::Greater => PairOutcome::Second,
        })
        .collect()
}

/// Aggregates pairwise outcomes into a dense ranking by the score
/// `s(c_m) = #wins + 0.5 * #ties`; equal scores become ties. Intransitive
/// configurations are resolved the same way.
pub fn pairs_to_ranks(outcomes: &[PairOutcome], size: usize) -> Vec<u32> {
    debug_assert_eq!(outcomes.len(), pair_count(size));
    let mut score = vec![0.0f64; size];
    for ((l, m), o) in pairs(size).zip(outcomes) {
        match o {
            PairOutcome::First => score[l] += 1.0,
            PairOutcome::Second => score[m] += 1.0,
            PairOutcome::Tie => {
                score[l] += 0.5;
                score[m] += 0.5;
            }
        }
    }
    ranks_from_scores(&score, 0.0)
}

/// Dense ranks by descending score; scores within `tol` of their sorted
/// predecessor share its rank.
pub fn ranks_from_scores(scores: &[f64], tol: f64) -> Vec<u32> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut ranks = vec![0u32; scores.len()];
    let mut rank = 0u32;
    let mut prev = f64::INFINITY;
    for &idx in &order {
        if rank == 0 || prev - scores[idx] > tol {
            rank += 1;
        }
        prev = scores[idx];
        ranks[idx] = rank;
    }
    ranks
}

/// Number of rankings with ties over `m` categories (ordered set
/// partitions, the Fubini numbers).
pub fn count_rank_assignments(m: usize) -> u128 {
    let mut binom = vec![1u128];
    let mut fubini = vec![1u128];
    for n in 1..=m {
        let mut next = vec![1u128; n + 1];
        for k in 1..n {
            next[k] = binom[k - 1] + binom[k];
        }
        binom = next;
        let total = (1..=n).map(|k| binom[k] * fubini[n - k]).sum();
        fubini.push(total);
    }
    fubini[m]
}

/// All dense rankings over `m` categories, in lexicographic order of the
/// rank vector.
pub fn enumerate_rankings(m: usize) -> Vec<Vec<u32>> {
    fn extend(prefix: &mut Vec<u32>, m: usize, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == m {
            if is_dense_ranking(prefix) {
                out.push(prefix.clone());
            }
            return;
        }
        for r in 1..=m as u32 {
            prefix.push(r);
            extend(prefix, m, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if m > 0 {
        extend(&mut Vec::with_capacity(m), m, &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fubini_values() {
        assert_eq!(count_rank_assignments(1), 1);
        assert_eq!(count_rank_assignments(2), 3);
        assert_eq!(count_rank_assignments(3), 13);
        assert_eq!(count_rank_assignments(5), 541);
        assert_eq!(count_rank_assignments(10), 102_247_563);
    }

    #[test]
    fn enumeration_matches_count() {
        for m in 1..=5 {
            assert_eq!(enumerate_rankings(m).len() as u128, count_rank_assignments(m));
        }
    }

    #[test]
    fn dense_rank_validation() {
        assert!(is_dense_ranking(&[1, 2, 2]));
        assert!(is_dense_ranking(&[1, 1, 1]));
        assert!(!is_dense_ranking(&[1, 3, 3]));
        assert!(!is_dense_ranking(&[0, 1]));
        assert!(!is_dense_ranking(&[]));
    }

    #[test]
    fn pair_index_follows_iteration_order() {
        for size in 2..7 {
            for (idx, (l, m)) in pairs(size).enumerate() {
                assert_eq!(pair_index(l, m, size), idx);
            }
        }
    }

    #[test]
    fn transitive_configurations_round_trip() {
        for m in 1..=4 {
            for ranks in enumerate_rankings(m) {
                assert_eq!(pairs_to_ranks(&ranks_to_pairs(&ranks), m), ranks);
            }
        }
    }

    #[test]
    fn scores_with_tolerance() {
        assert_eq!(ranks_from_scores(&[0.6, 1.8, 0.6 + 1e-12], 1e-9), vec![2, 1, 2]);
        assert_eq!(ranks_from_scores(&[0.1, 0.2, 0.3], 1e-9), vec![3, 2, 1]);
    }

    #[test]
    fn intransitive_cycle_is_a_full_tie() {
        // 0 > 1, 1 > 2, 2 > 0
        let cycle = [PairOutcome::First, PairOutcome::Second, PairOutcome::First];
        assert_eq!(pairs_to_ranks(&cycle, 3), vec![1, 1, 1]);
    }
}
