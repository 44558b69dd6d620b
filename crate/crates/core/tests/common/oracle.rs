//! Brute-force reference implementations used to check the library.

use topicrag::corpus::{extract_grounding_text, Corpus};
use topicrag::text::{content_words, is_stopword};

pub const K1: f64 = 1.2;
pub const B: f64 = 0.75;

fn tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn search_tokens(text: &str) -> Vec<String> {
    tokens(text).into_iter().filter(|t| !is_stopword(t)).collect()
}

/// Scores in corpus order for every topic.
pub fn bm25(corpus: &Corpus, query: &str) -> Vec<(String, f64)> {
    let docs: Vec<(String, Vec<String>)> = corpus
        .topics()
        .iter()
        .map(|t| {
            let title = search_tokens(&t.title);
            let mut d = title.clone();
            d.extend(title);
            d.extend(search_tokens(&extract_grounding_text(t).text));
            (t.id.clone(), d)
        })
        .collect();
    let n = docs.len() as f64;
    let avgdl = docs.iter().map(|(_, d)| d.len()).sum::<usize>() as f64 / n;
    let mut q: Vec<String> = search_tokens(query);
    q.sort();
    q.dedup();
    docs.iter()
        .map(|(id, d)| {
            let mut score = 0.0;
            for term in &q {
                let tf = d.iter().filter(|t| *t == term).count() as f64;
                if tf == 0.0 {
                    continue;
                }
                let df = docs.iter().filter(|(_, o)| o.contains(term)).count() as f64;
                let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
                score += idf * tf * (K1 + 1.0) / (tf + K1 * (1.0 - B + B * d.len() as f64 / avgdl));
            }
            (id.clone(), score)
        })
        .collect()
}

fn clipped_matches(c: &[String], r: &[String], n: usize) -> (usize, usize) {
    let cg: Vec<&[String]> = c.windows(n).collect();
    let rg: Vec<&[String]> = r.windows(n).collect();
    let mut used = vec![false; rg.len()];
    let mut matched = 0;
    for g in &cg {
        if let Some(j) = (0..rg.len()).find(|&j| !used[j] && rg[j] == *g) {
            used[j] = true;
            matched += 1;
        }
    }
    (matched, cg.len())
}

pub fn bleu(candidate: &str, reference: &str) -> f64 {
    let c = tokens(candidate);
    let r = tokens(reference);
    if c.is_empty() && r.is_empty() {
        return 1.0;
    }
    if c.is_empty() || r.is_empty() {
        return 0.0;
    }
    let orders = 4.min(c.len());
    let mut product = 1.0;
    for n in 1..=orders {
        let (m, total) = clipped_matches(&c, &r, n);
        let p = if m == 0 { 1.0 / (total as f64 + 1.0) } else { m as f64 / total as f64 };
        product *= p;
    }
    let geo = product.powf(1.0 / orders as f64);
    let bp = if c.len() > r.len() { 1.0 } else { (1.0 - r.len() as f64 / c.len() as f64).exp() };
    bp * geo
}

fn lcs(a: &[String], b: &[String]) -> usize {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in (0..a.len()).rev() {
        for j in (0..b.len()).rev() {
            t[i][j] = if a[i] == b[j] { 1 + t[i + 1][j + 1] } else { t[i + 1][j].max(t[i][j + 1]) };
        }
    }
    t[0][0]
}

fn f1(common: f64, c_len: usize, r_len: usize) -> f64 {
    if common == 0.0 {
        return 0.0;
    }
    let p = common / c_len as f64;
    let r = common / r_len as f64;
    2.0 * p * r / (p + r)
}

pub fn rouge_l(candidate: &str, reference: &str) -> f64 {
    let c = tokens(candidate);
    let r = tokens(reference);
    if c.is_empty() && r.is_empty() {
        return 1.0;
    }
    f1(lcs(&c, &r) as f64, c.len(), r.len())
}

pub fn token_f1(candidate: &str, reference: &str) -> f64 {
    let c = content_words(candidate);
    let r = content_words(reference);
    if c.is_empty() && r.is_empty() {
        return 1.0;
    }
    if c.is_empty() || r.is_empty() {
        return 0.0;
    }
    let mut pool = r.clone();
    let mut common = 0;
    for w in &c {
        if let Some(i) = pool.iter().position(|x| x == w) {
            pool.swap_remove(i);
            common += 1;
        }
    }
    f1(common as f64, c.len(), r.len())
}

pub fn exact_match(candidate: &str, reference: &str) -> f64 {
    if tokens(candidate) == tokens(reference) { 1.0 } else { 0.0 }
}
