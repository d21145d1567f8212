//! Character 3-gram stylometry for author verification.

use std::collections::BTreeMap;

use super::DownstreamError;

pub const MIN_CHARS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct AuthorPair {
    pub text_a: String,
    pub text_b: String,
    pub predicted_same: bool,
    pub score: f64,
}

/// Lowercased character 3-gram counts.
pub fn char_profile(text: &str) -> BTreeMap<[char; 3], f64> {
    let chars: Vec<char> = text.to_lowercase().chars().collect();
    let mut p = BTreeMap::new();
    for w in chars.windows(3) {
        *p.entry([w[0], w[1], w[2]]).or_insert(0.0) += 1.0;
    }
    p
}

fn cosine(a: &BTreeMap<[char; 3], f64>, b: &BTreeMap<[char; 3], f64>) -> f64 {
    let dot: f64 = a.iter().filter_map(|(k, x)| b.get(k).map(|y| x * y)).sum();
    let na = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(0.0, 1.0)
    }
}

fn check_len(text: &str) -> Result<(), DownstreamError> {
    if text.chars().count() < MIN_CHARS {
        let head: String = text.chars().take(30).collect();
        return Err(DownstreamError::TooShort(head));
    }
    Ok(())
}

/// Profile cosine of two texts.
pub fn pair_score(a: &str, b: &str) -> Result<f64, DownstreamError> {
    check_len(a)?;
    check_len(b)?;
    if a == b {
        return Ok(1.0);
    }
    Ok(cosine(&char_profile(a), &char_profile(b)))
}

/// Same author when the score reaches the threshold.
pub fn verify_pair(a: &str, b: &str, threshold: f64) -> Result<AuthorPair, DownstreamError> {
    let score = pair_score(a, b)?;
    Ok(AuthorPair {
        text_a: a.to_string(),
        text_b: b.to_string(),
        predicted_same: score >= threshold,
        score,
    })
}

/// Threshold maximizing accuracy of `score >= t` on labeled scores.
/// Candidates are every observed score plus one just above 1 (never
/// same); ties go to the lower threshold.
pub fn calibrate_threshold(scored: &[(f64, bool)]) -> Result<f64, DownstreamError> {
    if scored.is_empty() {
        return Err(DownstreamError::Empty("calibration set"));
    }
    let mut candidates: Vec<f64> = scored.iter().map(|s| s.0).collect();
    candidates.push(1.0 + 1e-12);
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let mut best = (0usize, candidates[0]);
    for &t in &candidates {
        let correct = scored.iter().filter(|&&(s, same)| (s >= t) == same).count();
        if correct > best.0 {
            best = (correct, t);
        }
    }
    Ok(best.1)
}

/// Fraction of same-author pairs still judged same after `text_b` is
/// replaced by its regenerated version. A regenerated text too short to
/// profile counts as a changed verdict.
pub fn consistency_rate(
    pairs: &[AuthorPair],
    regenerated: &[String],
    threshold: f64,
) -> Result<f64, DownstreamError> {
    if pairs.is_empty() {
        return Err(DownstreamError::Empty("pair list"));
    }
    if pairs.len() != regenerated.len() {
        return Err(DownstreamError::Validation(format!(
            "{} pairs but {} regenerated texts",
            pairs.len(),
            regenerated.len()
        )));
    }
    let mut kept = 0usize;
    for (p, b) in pairs.iter().zip(regenerated) {
        if !p.predicted_same {
            return Err(DownstreamError::Validation(
                "consistency is only defined on pairs originally judged same".into(),
            ));
        }
        if let Ok(v) = verify_pair(&p.text_a, b, threshold) {
            kept += usize::from(v.predicted_same);
        }
    }
    Ok(kept as f64 / pairs.len() as f64)
}
