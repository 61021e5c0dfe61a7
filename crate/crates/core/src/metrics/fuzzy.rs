//! Fuzzy string similarity for non-categorical slot values.

/// Lowercases, trims and collapses internal whitespace runs to one space.
pub fn normalize(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Edit distance over Unicode scalar values with unit costs.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let substitute = prev[j] + usize::from(ca != cb);
            cur[j + 1] = substitute.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - L / max(len)` on normalized strings; 1 when both are empty, 0 when
/// exactly one is.
pub fn fuzzy_score(hyp: &str, reference: &str) -> f64 {
    let h = normalize(hyp);
    let r = normalize(reference);
    let (lh, lr) = (h.chars().count(), r.chars().count());
    match (lh, lr) {
        (0, 0) => 1.0,
        (0, _) | (_, 0) => 0.0,
        _ => 1.0 - levenshtein(&h, &r) as f64 / lh.max(lr) as f64,
    }
}
