//! Corpus BLEU with pooled n-gram counts.

use std::collections::HashMap;

use super::MetricError;

pub const MAX_N: usize = 4;

/// Clipped matches and candidate n-gram total for one order.
fn clipped<S: AsRef<str>>(cand: &[S], refr: &[S], n: usize) -> (usize, usize) {
    if cand.len() < n {
        return (0, 0);
    }
    let mut ref_counts: HashMap<Vec<&str>, usize> = HashMap::new();
    for w in refr.windows(n) {
        *ref_counts
            .entry(w.iter().map(AsRef::as_ref).collect())
            .or_default() += 1;
    }
    let mut cand_counts: HashMap<Vec<&str>, usize> = HashMap::new();
    for w in cand.windows(n) {
        *cand_counts
            .entry(w.iter().map(AsRef::as_ref).collect())
            .or_default() += 1;
    }
    let matches = cand_counts
        .iter()
        .map(|(g, &c)| c.min(ref_counts.get(g).copied().unwrap_or(0)))
        .sum();
    (matches, cand.len() + 1 - n)
}

/// BLEU over parallel lists of token lists.
///
/// Smoothing: an order `n >= 2` with no clipped match contributes
/// `1 / (2 * max(total, 1))` in place of zero, where `total` is the
/// candidate n-gram count of that order. No unigram match at all (or an
/// empty candidate side) scores 0.
pub fn corpus_bleu<C, S>(candidates: &[C], references: &[C]) -> Result<f64, MetricError>
where
    C: AsRef<[S]>,
    S: AsRef<str>,
{
    if candidates.len() != references.len() {
        return Err(MetricError::LengthMismatch {
            candidates: candidates.len(),
            references: references.len(),
        });
    }
    if candidates.is_empty() {
        return Err(MetricError::Empty("corpus"));
    }
    let mut matches = [0usize; MAX_N];
    let mut totals = [0usize; MAX_N];
    let (mut c_len, mut r_len) = (0usize, 0usize);
    for (c, r) in candidates.iter().zip(references) {
        let (c, r) = (c.as_ref(), r.as_ref());
        c_len += c.len();
        r_len += r.len();
        for n in 1..=MAX_N {
            let (m, t) = clipped(c, r, n);
            matches[n - 1] += m;
            totals[n - 1] += t;
        }
    }
    if c_len == 0 || matches[0] == 0 {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for n in 0..MAX_N {
        let p = if matches[n] > 0 {
            matches[n] as f64 / totals[n] as f64
        } else {
            1.0 / (2.0 * totals[n].max(1) as f64)
        };
        log_sum += p.ln();
    }
    let bp = (1.0 - r_len as f64 / c_len as f64).min(0.0).exp();
    Ok((bp * (log_sum / MAX_N as f64).exp()).clamp(0.0, 1.0))
}

/// BLEU of a single pair, same smoothing.
pub fn sentence_bleu<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> f64 {
    corpus_bleu(&[candidate], &[reference]).expect("one pair")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn identical_is_one() {
        let a = toks("the cat sat on the mat");
        assert!((sentence_bleu(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_is_tiny() {
        assert!(sentence_bleu(&toks("a b c d"), &toks("e f g h")) < 0.01);
    }

    #[test]
    fn length_mismatch() {
        let a = vec![toks("a")];
        let b: Vec<Vec<&str>> = vec![];
        assert!(corpus_bleu(&a, &b).is_err());
    }
}
