//! Brute-force reference implementations. Deliberately naive: lists and
//! linear scans, no hashing, no shared code with the library.

#![allow(dead_code)]

pub fn grams(tokens: &[u8], n: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    if n == 0 || tokens.len() < n {
        return out;
    }
    for i in 0..=tokens.len() - n {
        out.push(tokens[i..i + n].to_vec());
    }
    out
}

pub fn count(list: &[Vec<u8>], g: &[u8]) -> usize {
    list.iter().filter(|x| x.as_slice() == g).count()
}

pub fn unique(list: &[Vec<u8>]) -> Vec<Vec<u8>> {
    let mut u: Vec<Vec<u8>> = Vec::new();
    for g in list {
        if !u.contains(g) {
            u.push(g.clone());
        }
    }
    u
}

/// `(gram, count)` for every distinct n-gram, in first-occurrence order.
pub fn ngram_table(tokens: &[u8], n: usize) -> Vec<(Vec<u8>, usize)> {
    let all = grams(tokens, n);
    unique(&all)
        .into_iter()
        .map(|g| {
            let c = count(&all, &g);
            (g, c)
        })
        .collect()
}

/// Clipped matches of the candidate's n-grams against the per-gram maximum
/// over references, and the candidate n-gram total.
pub fn clipped(candidate: &[u8], refs: &[Vec<u8>], n: usize) -> (usize, usize) {
    let cand = grams(candidate, n);
    let ref_grams: Vec<Vec<Vec<u8>>> = refs.iter().map(|r| grams(r, n)).collect();
    let mut matched = 0;
    for g in unique(&cand) {
        let mut max_ref = 0;
        for rg in &ref_grams {
            max_ref = max_ref.max(count(rg, &g));
        }
        matched += count(&cand, &g).min(max_ref);
    }
    (matched, cand.len())
}

/// Uniform-weight BLEU-N; `epsilon` replaces zero match counts when given.
pub fn bleu(candidate: &[u8], refs: &[Vec<u8>], max_n: usize, epsilon: Option<f64>) -> f64 {
    let w = 1.0 / max_n as f64;
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let (m, t) = clipped(candidate, refs, n);
        let p = match epsilon {
            None => {
                if m == 0 {
                    return 0.0;
                }
                m as f64 / t as f64
            }
            Some(e) => {
                let num = if m == 0 { e } else { m as f64 };
                num / (if t == 0 { 1.0 } else { t as f64 })
            }
        };
        log_sum += w * p.ln();
    }
    let c = candidate.len();
    let mut r = refs[0].len();
    for x in refs {
        let (d_new, d_old) = (x.len().abs_diff(c), r.abs_diff(c));
        if d_new < d_old || (d_new == d_old && x.len() < r) {
            r = x.len();
        }
    }
    let bp = if c > r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    };
    bp * log_sum.exp()
}

/// Reference n-grams matched (clipped by candidate counts), summed over all
/// references, over the total reference n-gram count.
pub fn rouge_n(candidate: &[u8], refs: &[Vec<u8>], n: usize) -> Option<f64> {
    let cand = grams(candidate, n);
    let mut matched = 0;
    let mut total = 0;
    for r in refs {
        let rg = grams(r, n);
        total += rg.len();
        for g in unique(&rg) {
            matched += count(&rg, &g).min(count(&cand, &g));
        }
    }
    (total > 0).then(|| matched as f64 / total as f64)
}

pub fn distinct_pooled(responses: &[Vec<u8>], n: usize) -> Option<f64> {
    let mut all = Vec::new();
    for r in responses {
        all.extend(grams(r, n));
    }
    (!all.is_empty()).then(|| unique(&all).len() as f64 / all.len() as f64)
}

pub fn distinct_mean(responses: &[Vec<u8>], n: usize) -> Option<f64> {
    let ratios: Vec<f64> = responses
        .iter()
        .map(|r| grams(r, n))
        .filter(|g| !g.is_empty())
        .map(|g| unique(&g).len() as f64 / g.len() as f64)
        .collect();
    (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64)
}

/// Mean consecutive cosine of raw term-count vectors over whitespace words.
pub fn coherence(sentences: &[Vec<&str>]) -> Option<f64> {
    if sentences.len() < 2 {
        return None;
    }
    let mut words: Vec<&str> = Vec::new();
    for s in sentences {
        for w in s {
            if !words.contains(w) {
                words.push(w);
            }
        }
    }
    let vec_of = |s: &Vec<&str>| -> Vec<f64> {
        words
            .iter()
            .map(|w| s.iter().filter(|x| *x == w).count() as f64)
            .collect()
    };
    let mut sum = 0.0;
    for pair in sentences.windows(2) {
        let (a, b) = (vec_of(&pair[0]), vec_of(&pair[1]));
        let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        sum += if na == 0.0 || nb == 0.0 { 0.0 } else { dot / (na * nb) };
    }
    Some(sum / (sentences.len() - 1) as f64)
}

/// Random small instance: tokens from `0..vocab`, lengths in `1..=max_len`.
pub fn random_tokens<R: rand::Rng>(rng: &mut R, vocab: u8, max_len: usize) -> Vec<u8> {
    let len = rng.gen_range(1..=max_len);
    (0..len).map(|_| rng.gen_range(0..vocab)).collect()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
