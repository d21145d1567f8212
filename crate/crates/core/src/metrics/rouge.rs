use std::collections::HashMap;

use super::MetricError;

/// Clipped multiset intersection size.
pub(crate) fn overlap<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> usize {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in reference {
        *counts.entry(t.as_ref()).or_default() += 1;
    }
    let mut m = 0;
    for t in candidate {
        if let Some(c) = counts.get_mut(t.as_ref()) {
            if *c > 0 {
                *c -= 1;
                m += 1;
            }
        }
    }
    m
}

/// ROUGE-1 recall: clipped unigram matches over reference length.
pub fn rouge1<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> Result<f64, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::Empty("reference"));
    }
    Ok(overlap(candidate, reference) as f64 / reference.len() as f64)
}
