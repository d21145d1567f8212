//! Shared fixtures and brute-force reference implementations.
//!
//! The oracles here are deliberately naive: linear scans instead of hash
//! maps, and exhaustive enumeration instead of search.

#![allow(dead_code)]

use infill_core::metrics::EmbeddingTable;
use infill_core::predictor::{CausalPredictor, Distribution, MaskedPredictor, PredictError};
use infill_core::tokenizer::TokenId;

pub fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn ngrams(seq: &[String], n: usize) -> Vec<&[String]> {
    if seq.len() < n {
        return Vec::new();
    }
    (0..=seq.len() - n).map(|i| &seq[i..i + n]).collect()
}

fn occurrences(list: &[&[String]], g: &[String]) -> usize {
    list.iter().filter(|x| **x == g).count()
}

/// Clipped n-gram matches and candidate n-gram count, by linear scans.
fn clipped_oracle(c: &[String], r: &[String], n: usize) -> (usize, usize) {
    let cg = ngrams(c, n);
    let rg = ngrams(r, n);
    let mut seen: Vec<&[String]> = Vec::new();
    let mut matched = 0;
    for g in &cg {
        if seen.contains(g) {
            continue;
        }
        seen.push(g);
        matched += occurrences(&cg, g).min(occurrences(&rg, g));
    }
    (matched, cg.len())
}

/// Pooled BLEU-4 with the half-count smoothing for empty higher orders.
pub fn bleu_oracle(cands: &[Vec<String>], refs: &[Vec<String>]) -> f64 {
    let mut m = [0usize; 4];
    let mut t = [0usize; 4];
    let mut cl = 0;
    let mut rl = 0;
    for (c, r) in cands.iter().zip(refs) {
        cl += c.len();
        rl += r.len();
        for n in 1..=4 {
            let (a, b) = clipped_oracle(c, r, n);
            m[n - 1] += a;
            t[n - 1] += b;
        }
    }
    if cl == 0 || m[0] == 0 {
        return 0.0;
    }
    let mut prod = 1.0;
    for n in 0..4 {
        prod *= if m[n] == 0 {
            0.5 / t[n].max(1) as f64
        } else {
            m[n] as f64 / t[n] as f64
        };
    }
    let bp = if cl >= rl {
        1.0
    } else {
        (1.0 - rl as f64 / cl as f64).exp()
    };
    bp * prod.powf(0.25)
}

pub fn rouge1_oracle(c: &[String], r: &[String]) -> f64 {
    let mut done: Vec<&String> = Vec::new();
    let mut hits = 0;
    for w in r {
        if done.contains(&w) {
            continue;
        }
        done.push(w);
        let in_r = r.iter().filter(|x| *x == w).count();
        let in_c = c.iter().filter(|x| *x == w).count();
        hits += in_r.min(in_c);
    }
    hits as f64 / r.len() as f64
}

/// Every injective partial map from candidate to reference positions over
/// equal tokens; returns (max matches, fewest chunks among those).
pub fn meteor_alignment_oracle(c: &[String], r: &[String]) -> (usize, usize) {
    fn walk(
        c: &[String],
        r: &[String],
        i: usize,
        used: &mut Vec<bool>,
        pairs: &mut Vec<(usize, usize)>,
        best: &mut (usize, usize),
    ) {
        if i == c.len() {
            let m = pairs.len();
            let mut chunks = 0;
            for k in 0..m {
                let joined =
                    k > 0 && pairs[k].0 == pairs[k - 1].0 + 1 && pairs[k].1 == pairs[k - 1].1 + 1;
                if !joined {
                    chunks += 1;
                }
            }
            if m > best.0 || (m == best.0 && chunks < best.1) {
                *best = (m, chunks);
            }
            return;
        }
        // Even aligning everything left cannot reach the best match count.
        if pairs.len() + (c.len() - i) < best.0 {
            return;
        }
        for j in 0..r.len() {
            if !used[j] && r[j] == c[i] {
                used[j] = true;
                pairs.push((i, j));
                walk(c, r, i + 1, used, pairs, best);
                pairs.pop();
                used[j] = false;
            }
        }
        walk(c, r, i + 1, used, pairs, best);
    }
    let mut best = (0, usize::MAX);
    walk(
        c,
        r,
        0,
        &mut vec![false; r.len()],
        &mut Vec::new(),
        &mut best,
    );
    if best.0 == 0 {
        (0, 0)
    } else {
        best
    }
}

pub fn meteor_oracle(c: &[String], r: &[String]) -> f64 {
    let (m, chunks) = meteor_alignment_oracle(c, r);
    if m == 0 {
        return 0.0;
    }
    let p = m as f64 / c.len() as f64;
    let rec = m as f64 / r.len() as f64;
    let fmean = p * rec / (0.9 * p + 0.1 * rec);
    let frag = chunks as f64 / m as f64;
    fmean * (1.0 - 0.5 * frag * frag * frag)
}

fn cosine(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        0.0
    } else {
        dot / (nu * nv)
    }
}

/// Full similarity matrix, then idf-weighted recall of each row maximum.
pub fn semscore_oracle(c: &[String], r: &[String], emb: &EmbeddingTable) -> f64 {
    let matrix: Vec<Vec<f64>> = r
        .iter()
        .map(|a| {
            c.iter()
                .map(|b| {
                    if a == b {
                        1.0
                    } else {
                        cosine(emb.vector(a), emb.vector(b))
                    }
                })
                .collect()
        })
        .collect();
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, row) in matrix.iter().enumerate() {
        let mut best = row[0];
        for &x in row {
            if x > best {
                best = x;
            }
        }
        let w = emb.idf(&r[k]);
        num += w * best;
        den += w;
    }
    let s = if den > 0.0 {
        num / den
    } else {
        matrix
            .iter()
            .map(|row| row.iter().cloned().fold(f64::MIN, f64::max))
            .sum::<f64>()
            / r.len() as f64
    };
    s.clamp(-1.0, 1.0)
}

/// Tiny deterministic generator for fixture data (xorshift64*).
pub struct Lcg(u64);

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Lcg(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1)
    }

    pub fn next(&mut self) -> u64 {
        self.0 ^= self.0 >> 12;
        self.0 ^= self.0 << 25;
        self.0 ^= self.0 >> 27;
        self.0.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next() % n as u64) as usize
    }
}

/// Random sentence over `vocab` symbols with length in `1..=max_len`.
pub fn random_sentence(rng: &mut Lcg, vocab: usize, max_len: usize) -> Vec<String> {
    let len = 1 + rng.below(max_len);
    (0..len).map(|_| format!("w{}", rng.below(vocab))).collect()
}

/// Masked predictor that knows the answer: position `p` gets `target[p]`
/// with a fixed confidence, the rest of the mass on a filler token.
pub struct ScriptedMasked {
    pub surfaces: Vec<String>,
    pub target: Vec<String>,
    pub confidence: Vec<f64>,
}

impl ScriptedMasked {
    pub fn new(target: &[&str], confidence: &[f64]) -> Self {
        let mut surfaces: Vec<String> = vec![
            "[MASK]".into(),
            "[UNK]".into(),
            "[BOS]".into(),
            "[EOS]".into(),
            "~".into(),
        ];
        for t in target {
            if !surfaces.iter().any(|s| s == t) {
                surfaces.push(t.to_string());
            }
        }
        ScriptedMasked {
            surfaces,
            target: target.iter().map(|s| s.to_string()).collect(),
            confidence: confidence.to_vec(),
        }
    }

    fn id(&self, s: &str) -> TokenId {
        self.surfaces.iter().position(|x| x == s).unwrap() as TokenId
    }
}

impl MaskedPredictor for ScriptedMasked {
    fn predictor_id(&self) -> String {
        "scripted".into()
    }

    fn surface(&self, id: TokenId) -> Option<String> {
        self.surfaces.get(id as usize).cloned()
    }

    fn predict_masked(
        &self,
        slots: &[Option<&str>],
        position: usize,
        _top_k: usize,
    ) -> Result<Distribution, PredictError> {
        assert!(slots[position].is_none(), "queried a visible slot");
        let conf = self.confidence[position];
        let entries = vec![
            (self.id(&self.target[position]), conf),
            (4, (1.0 - conf) / 2.0),
        ];
        Ok(Distribution::new(entries, position)?)
    }
}

/// Causal predictor that continues a fixed script after any prefix.
pub struct ScriptedCausal {
    pub surfaces: Vec<String>,
    pub script: Vec<String>,
}

impl ScriptedCausal {
    pub fn new(script: &[&str]) -> Self {
        let mut surfaces: Vec<String> = vec![
            "[MASK]".into(),
            "[UNK]".into(),
            "[BOS]".into(),
            "[EOS]".into(),
            "~".into(),
        ];
        for t in script {
            if !surfaces.iter().any(|s| s == t) {
                surfaces.push(t.to_string());
            }
        }
        ScriptedCausal {
            surfaces,
            script: script.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl CausalPredictor for ScriptedCausal {
    fn predictor_id(&self) -> String {
        "scripted".into()
    }

    fn surface(&self, id: TokenId) -> Option<String> {
        self.surfaces.get(id as usize).cloned()
    }

    fn predict_next(
        &self,
        prefix: &[&str],
        _context: &[&str],
        _top_k: usize,
    ) -> Result<Distribution, PredictError> {
        let next = self
            .script
            .get(prefix.len())
            .map_or("[EOS]", String::as_str);
        let id = self.surfaces.iter().position(|x| x == next).unwrap() as TokenId;
        Ok(Distribution::new(vec![(id, 0.8), (4, 0.1)], prefix.len())?)
    }
}

/// Five-token sentences whose middle token is the XOR of the tokens on
/// either side of it: seeing both neighbours pins it, seeing one does not.
pub fn xor_sentences() -> Vec<(Vec<String>, String)> {
    let mut out = Vec::new();
    for opener in ["the", "a"] {
        for (li, left) in ["red", "blue"].iter().enumerate() {
            for (ri, right) in ["cat", "dog"].iter().enumerate() {
                for closer in ["sat", "ran"] {
                    let center = if (li == 0) ^ (ri == 0) { "yes" } else { "no" };
                    let s = toks(&format!("{opener} {left} {center} {right} {closer}"));
                    out.push((s, center.to_string()));
                }
            }
        }
    }
    out
}
