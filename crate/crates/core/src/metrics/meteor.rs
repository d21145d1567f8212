//! METEOR with exact matching only.
//!
//! The alignment maximizes matches, then minimizes chunks. Finding the
//! fewest chunks is a search over which occurrence of a repeated token pairs
//! with which. The greedy longest-tile alignment gives a first answer; a
//! memoized branch and bound then looks for fewer chunks, and if it expands
//! more than [`SEARCH_BUDGET`] states the greedy answer stands.

use std::collections::HashMap;

use super::rouge::overlap;
use super::MetricError;

pub const SEARCH_BUDGET: usize = 50_000;

/// Match count and chunk count of the best alignment.
pub fn alignment_stats<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> (usize, usize) {
    let c: Vec<&str> = candidate.iter().map(AsRef::as_ref).collect();
    let r: Vec<&str> = reference.iter().map(AsRef::as_ref).collect();
    let m = overlap(&c, &r);
    if m == 0 {
        return (0, 0);
    }
    let greedy = chunks_of(&tile_alignment(&c, &r));
    // Every chunk boundary saved is a matched bigram, so this bounds from below.
    let lower = m.saturating_sub(bigram_overlap(&c, &r)).max(1);
    if greedy == lower {
        return (m, greedy);
    }
    match Search::new(&c, &r).run(greedy) {
        Some(best) => (m, best),
        None => (m, greedy),
    }
}

pub fn meteor<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> Result<f64, MetricError> {
    if candidate.is_empty() {
        return Err(MetricError::Empty("candidate"));
    }
    if reference.is_empty() {
        return Err(MetricError::Empty("reference"));
    }
    let (m, chunks) = alignment_stats(candidate, reference);
    Ok(score_from_stats(
        m,
        chunks,
        candidate.len(),
        reference.len(),
    ))
}

pub fn score_from_stats(m: usize, chunks: usize, cand_len: usize, ref_len: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let p = m as f64 / cand_len as f64;
    let r = m as f64 / ref_len as f64;
    let f = 10.0 * p * r / (r + 9.0 * p);
    let penalty = 0.5 * (chunks as f64 / m as f64).powi(3);
    f * (1.0 - penalty)
}

fn bigram_overlap(c: &[&str], r: &[&str]) -> usize {
    let mut counts: HashMap<(&str, &str), usize> = HashMap::new();
    for w in r.windows(2) {
        *counts.entry((w[0], w[1])).or_default() += 1;
    }
    let mut n = 0;
    for w in c.windows(2) {
        if let Some(k) = counts.get_mut(&(w[0], w[1])) {
            if *k > 0 {
                *k -= 1;
                n += 1;
            }
        }
    }
    n
}

/// Chunks of an alignment given as candidate position → reference position.
fn chunks_of(align: &[Option<usize>]) -> usize {
    let mut chunks = 0;
    let mut prev: Option<usize> = None;
    for a in align {
        match (prev, a) {
            (Some(p), Some(j)) if *j == p + 1 => {}
            (_, Some(_)) => chunks += 1,
            _ => {}
        }
        prev = *a;
    }
    chunks
}

/// Repeatedly aligns the longest common run of unaligned tokens, earliest
/// candidate position first, then earliest reference position.
fn tile_alignment(c: &[&str], r: &[&str]) -> Vec<Option<usize>> {
    let mut align = vec![None; c.len()];
    let mut used = vec![false; r.len()];
    loop {
        let mut best = (0usize, 0usize, 0usize);
        let mut row = vec![0usize; r.len() + 1];
        for i in 0..c.len() {
            let mut next = vec![0usize; r.len() + 1];
            for j in 0..r.len() {
                if align[i].is_none() && !used[j] && c[i] == r[j] {
                    next[j + 1] = row[j] + 1;
                    let len = next[j + 1];
                    // Prefer earlier starts among equal lengths.
                    let (si, sj) = (i + 1 - len, j + 1 - len);
                    if len > best.0 || (len == best.0 && (si, sj) < (best.1, best.2)) {
                        best = (len, si, sj);
                    }
                }
            }
            row = next;
        }
        let (len, si, sj) = best;
        if len == 0 {
            return align;
        }
        for k in 0..len {
            align[si + k] = Some(sj + k);
            used[sj + k] = true;
        }
    }
}

const NONE: usize = usize::MAX;

/// Branch and bound over alignments. `dfs` returns the exact optimum of a
/// subproblem when it is below the limit it was given, otherwise some lower
/// bound that is at least that limit. The memo keeps which of the two it has.
struct Search {
    /// Reference positions sharing each candidate token's surface.
    options: Vec<Vec<usize>>,
    /// Type index per candidate position.
    kind: Vec<usize>,
    /// Occurrences of each type that must go unaligned.
    skips: Vec<usize>,
    /// Reference positions whose type still occurs at candidate index >= i.
    relevant: Vec<Vec<u64>>,
    /// Most links possible among candidate positions `i..`.
    links_after: Vec<usize>,
    memo: HashMap<(usize, usize, Vec<u64>), (usize, bool)>,
    expanded: usize,
}

impl Search {
    fn new(c: &[&str], r: &[&str]) -> Self {
        let mut types: HashMap<&str, usize> = HashMap::new();
        for t in c {
            let n = types.len();
            types.entry(t).or_insert(n);
        }
        let kind: Vec<usize> = c.iter().map(|t| types[t]).collect();
        let mut cc = vec![0usize; types.len()];
        let mut cr = vec![0usize; types.len()];
        for &k in &kind {
            cc[k] += 1;
        }
        for t in r {
            if let Some(&k) = types.get(t) {
                cr[k] += 1;
            }
        }
        let skips = cc
            .iter()
            .zip(&cr)
            .map(|(a, b)| a.saturating_sub(*b))
            .collect();
        let options: Vec<Vec<usize>> = c
            .iter()
            .map(|t| (0..r.len()).filter(|&j| r[j] == *t).collect())
            .collect();
        let words = r.len().div_ceil(64).max(1);
        let mut relevant = vec![vec![0u64; words]; c.len() + 1];
        let mut live = vec![false; types.len()];
        for i in (0..c.len()).rev() {
            live[kind[i]] = true;
            for (j, t) in r.iter().enumerate() {
                if types.get(t).is_some_and(|&k| live[k]) {
                    relevant[i][j / 64] |= 1 << (j % 64);
                }
            }
        }
        // Clipped bigram overlap of each candidate suffix: every link uses
        // up one reference bigram.
        let mut ref_bigrams: HashMap<(&str, &str), usize> = HashMap::new();
        for w in r.windows(2) {
            *ref_bigrams.entry((w[0], w[1])).or_default() += 1;
        }
        let mut seen: HashMap<(&str, &str), usize> = HashMap::new();
        let mut links_after = vec![0usize; c.len() + 1];
        for i in (0..c.len().saturating_sub(1)).rev() {
            let bg = (c[i], c[i + 1]);
            let n = seen.entry(bg).or_default();
            *n += 1;
            let linked = *n <= ref_bigrams.get(&bg).copied().unwrap_or(0);
            links_after[i] = links_after[i + 1] + usize::from(linked);
        }
        Search {
            options,
            kind,
            skips,
            relevant,
            links_after,
            memo: HashMap::new(),
            expanded: 0,
        }
    }

    /// Fewest chunks if fewer than `limit` are possible. `None` when the
    /// budget runs out.
    fn run(mut self, limit: usize) -> Option<usize> {
        let words = self.relevant[0].len();
        let mut used = vec![0u64; words];
        let mut skips = self.skips.clone();
        let to_skip = skips.iter().sum();
        let v = self.dfs(0, NONE, &mut used, &mut skips, to_skip, limit)?;
        Some(v.min(limit))
    }

    /// Chunks that positions `i..` must still open, given `to_skip` of them
    /// go unaligned.
    fn bound(&self, i: usize, prev: usize, to_skip: usize) -> usize {
        let n = self.kind.len();
        let aligned = (n - i).saturating_sub(to_skip);
        if aligned == 0 {
            return 0;
        }
        let cont = usize::from(prev != NONE && self.options[i].contains(&(prev + 1)));
        aligned
            .saturating_sub(self.links_after[i] + cont)
            .max(1 - cont)
    }

    fn dfs(
        &mut self,
        i: usize,
        prev: usize,
        used: &mut Vec<u64>,
        skips: &mut Vec<usize>,
        to_skip: usize,
        limit: usize,
    ) -> Option<usize> {
        if i == self.kind.len() {
            return Some(0);
        }
        let h = self.bound(i, prev, to_skip);
        if h >= limit {
            return Some(h);
        }
        let continues = |j: usize| prev != NONE && j == prev + 1;
        let prev_key = if self.options[i].iter().any(|&j| continues(j)) {
            prev
        } else {
            NONE
        };
        let key_used: Vec<u64> = used
            .iter()
            .zip(&self.relevant[i])
            .map(|(u, m)| u & m)
            .collect();
        let key = (i, prev_key, key_used);
        if let Some(&(v, exact)) = self.memo.get(&key) {
            if exact || v >= limit {
                return Some(v);
            }
        }
        self.expanded += 1;
        if self.expanded > SEARCH_BUDGET {
            return None;
        }
        let mut best = usize::MAX;
        let mut cap = limit;
        let k = self.kind[i];
        // Continuing the current chunk first tightens the cap soonest.
        let mut order: Vec<usize> = self.options[i].clone();
        order.sort_by_key(|&j| !continues(j));
        for j in order {
            let bit = 1u64 << (j % 64);
            if used[j / 64] & bit != 0 {
                continue;
            }
            let cost = usize::from(!continues(j));
            if cost >= cap {
                best = best.min(cost);
                continue;
            }
            used[j / 64] |= bit;
            let v = self.dfs(i + 1, j, used, skips, to_skip, cap - cost);
            used[j / 64] &= !bit;
            let v = v?.saturating_add(cost);
            best = best.min(v);
            cap = cap.min(v);
        }
        if skips[k] > 0 {
            skips[k] -= 1;
            let v = self.dfs(i + 1, NONE, used, skips, to_skip - 1, cap);
            skips[k] += 1;
            best = best.min(v?);
        }
        // An infeasible branch (a token with nowhere to go) stays at MAX.
        let exact = best < limit;
        self.memo.insert(key, (best, exact));
        Some(best)
    }
}
