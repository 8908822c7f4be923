//! Output scoring: longest common subsequence (and substring), normalized
//! LCS, and the violation score against the full demonstration store.

use crate::embed::Embedder;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::store::DemoStore;

/// Token-level longest common subsequence length, two-row dynamic program.
pub fn lcs<Tok: PartialEq>(a: &[Tok], b: &[Tok]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// One longest common subsequence, recovered from the full table. Slower and
/// heavier than [`lcs`]; intended for debugging and report samples.
pub fn lcs_traceback<Tok: PartialEq + Clone>(a: &[Tok], b: &[Tok]) -> Vec<Tok> {
    let n = a.len();
    let m = b.len();
    let mut table = vec![0usize; (n + 1) * (m + 1)];
    let idx = |i: usize, j: usize| i * (m + 1) + j;
    for i in 1..=n {
        for j in 1..=m {
            table[idx(i, j)] = if a[i - 1] == b[j - 1] {
                table[idx(i - 1, j - 1)] + 1
            } else {
                table[idx(i - 1, j)].max(table[idx(i, j - 1)])
            };
        }
    }
    let mut out = Vec::with_capacity(table[idx(n, m)]);
    let (mut i, mut j) = (n, m);
    while i > 0 && j > 0 {
        if a[i - 1] == b[j - 1] {
            out.push(a[i - 1].clone());
            i -= 1;
            j -= 1;
        } else if table[idx(i - 1, j)] >= table[idx(i, j - 1)] {
            i -= 1;
        } else {
            j -= 1;
        }
    }
    out.reverse();
    out
}

/// Longest common contiguous run, reported alongside the subsequence since
/// verbatim repetition shows up as contiguous text.
pub fn lcs_substring<Tok: PartialEq>(a: &[Tok], b: &[Tok]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    let mut best = 0;
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { 0 };
            best = best.max(cur[j + 1]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best
}

/// LCS normalized by the completion length.
pub fn lcs_norm<T: Real>(lcs_value: usize, completion_length: usize) -> Result<T> {
    if completion_length == 0 {
        return Err(Error::InvalidConfig(
            "lcs_norm is undefined for a zero-length completion".into(),
        ));
    }
    Ok(T::from_usize(lcs_value).unwrap() / T::from_usize(completion_length).unwrap())
}

/// Max cosine similarity between an output and any example of the full
/// store (never the sampled subset, so the score is independent of the
/// sampling ratio). Empty stores score 0.
pub fn violation_score<T: Real, S: AsRef<str>>(
    output_tokens: &[S],
    embedder: &Embedder<T>,
    store: &DemoStore<T>,
) -> Result<T> {
    let vector = embedder.embed(output_tokens);
    let (score, _) = store.max_similarity(&store.subset_full(), &vector)?;
    Ok(score)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::cosine;
    use crate::store::RawExample;
    use crate::token::tokenize;

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    #[test]
    fn lcs_of_identical_sequences_is_their_length() {
        let x = chars("abcdef");
        assert_eq!(lcs(&x, &x), x.len());
    }

    #[test]
    fn lcs_matches_the_classical_example() {
        assert_eq!(lcs(&chars("ABCBDAB"), &chars("BDCABA")), 4);
    }

    #[test]
    fn lcs_with_empty_is_zero() {
        assert_eq!(lcs(&chars("anything"), &chars("")), 0);
        assert_eq!(lcs::<char>(&[], &[]), 0);
    }

    #[test]
    fn traceback_produces_a_real_common_subsequence() {
        let a = chars("ABCBDAB");
        let b = chars("BDCABA");
        let sub = lcs_traceback(&a, &b);
        assert_eq!(sub.len(), 4);
        // Verify it embeds in both sequences in order.
        for (seq, name) in [(&a, "a"), (&b, "b")] {
            let mut it = seq.iter();
            for c in &sub {
                assert!(it.any(|x| x == c), "{c} missing from {name}");
            }
        }
    }

    #[test]
    fn substring_requires_contiguity() {
        let a = chars("xxabcdyy");
        let b = chars("zzabcdww");
        assert_eq!(lcs_substring(&a, &b), 4);
        // Subsequence picks up scattered matches the substring ignores.
        let c = chars("a_b_c_d");
        let d = chars("abcd");
        assert_eq!(lcs(&c, &d), 4);
        assert_eq!(lcs_substring(&c, &d), 1);
    }

    #[test]
    fn lcs_norm_matches_the_worked_example() {
        let norm: f64 = lcs_norm(20, 50).unwrap();
        assert_eq!(norm, 0.4);
        assert_eq!(lcs_norm::<f64>(0, 9).unwrap(), 0.0);
        assert_eq!(lcs_norm::<f64>(7, 7).unwrap(), 1.0);
        assert!(lcs_norm::<f64>(1, 0).is_err());
    }

    /// Exponential brute force: try every subset of `a` as a subsequence of
    /// `b` via bitmasks.
    fn lcs_brute(a: &[u8], b: &[u8]) -> usize {
        let mut best = 0;
        for mask in 0u32..(1 << a.len()) {
            let picked: Vec<u8> = (0..a.len())
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| a[i])
                .collect();
            let mut it = b.iter();
            if picked.iter().all(|c| it.any(|x| x == c)) {
                best = best.max(picked.len());
            }
        }
        best
    }

    #[test]
    fn dp_matches_exponential_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let la = rng.gen_range(0..=10);
            let lb = rng.gen_range(0..=10);
            let a: Vec<u8> = (0..la).map(|_| rng.gen_range(0..4)).collect();
            let b: Vec<u8> = (0..lb).map(|_| rng.gen_range(0..4)).collect();
            assert_eq!(lcs(&a, &b), lcs_brute(&a, &b), "a={a:?} b={b:?}");
            assert_eq!(lcs(&a, &b), lcs(&b, &a));
        }
    }

    #[test]
    fn appending_tokens_never_decreases_lcs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let a: Vec<u8> = (0..rng.gen_range(1..8))
                .map(|_| rng.gen_range(0..3))
                .collect();
            let b: Vec<u8> = (0..rng.gen_range(1..8))
                .map(|_| rng.gen_range(0..3))
                .collect();
            let base = lcs(&a, &b);
            let mut a2 = a.clone();
            a2.push(rng.gen_range(0..3));
            let mut b2 = b.clone();
            b2.push(rng.gen_range(0..3));
            assert!(lcs(&a2, &b) >= base);
            assert!(lcs(&a, &b2) >= base);
        }
    }

    #[test]
    fn violation_score_scans_the_full_store() {
        let texts = [
            ("d0", "crimson banners over the keep"),
            ("d1", "silver mist on the moor"),
        ];
        let docs: Vec<Vec<String>> = texts.iter().map(|(_, t)| tokenize(t)).collect();
        let embedder = Embedder::<f64>::fit(256, 13, &docs).unwrap();
        let records: Vec<RawExample> = texts
            .iter()
            .map(|(id, text)| RawExample {
                id: (*id).to_owned(),
                text: (*text).to_owned(),
                embedding: None,
            })
            .collect();
        let store = DemoStore::build(&records, &embedder).unwrap();

        // Output identical to a stored example scores 1.
        let full = tokenize("crimson banners over the keep");
        assert!((violation_score(&full, &embedder, &store).unwrap() - 1.0).abs() < 1e-9);

        // Empty store scores 0.
        let empty = DemoStore::<f64>::empty();
        assert_eq!(violation_score(&full, &embedder, &empty).unwrap(), 0.0);

        // Otherwise the score is the max of the per-example cosines.
        let probe = tokenize("mist over the keep");
        let v = embedder.embed(&probe);
        let expected = store
            .examples()
            .iter()
            .map(|e| cosine(&v, &e.vector).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        let got = violation_score(&probe, &embedder, &store).unwrap();
        assert_eq!(got, expected);
    }
}
