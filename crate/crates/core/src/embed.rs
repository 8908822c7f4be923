//! Deterministic text embedding and cosine similarity.
//!
//! Texts are embedded by signed feature hashing of TF-IDF weighted token
//! unigrams and bigrams. The sign bit makes collision bias zero-mean, so
//! unrelated texts stay near-orthogonal. IDF weights are fitted once, from
//! the demonstration-example corpus, and frozen for the whole run; tokens
//! never seen at fit time take the weight of an unseen feature.
//!
//! Hashing formula (kept simple on purpose so tests can reimplement it
//! independently): FNV-1a over the little-endian seed bytes followed by the
//! UTF-8 feature bytes; the lowest hash bit selects the sign and the
//! remaining bits select the bucket. A bigram feature is the two tokens
//! joined by a single space (tokens cannot contain whitespace).

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Fixed-dimension embedding. Vectors produced by [`Embedder::embed`] are
/// unit-normalized unless the text was empty, which embeds to the zero
/// vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector<T> {
    values: Vec<T>,
    norm: T,
}

impl<T: Real> EmbeddingVector<T> {
    pub fn new(values: Vec<T>) -> Self {
        let norm = values.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt();
        Self { values, norm }
    }

    pub fn zero(dimension: usize) -> Self {
        Self {
            values: vec![T::zero(); dimension],
            norm: T::zero(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> T {
        self.norm
    }

    pub fn is_zero(&self) -> bool {
        self.norm == T::zero()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Scale to unit length; the zero vector stays zero.
    pub fn normalized(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        Self::new(self.values.iter().map(|&x| x / self.norm).collect())
    }
}

/// Cosine similarity in `[-1, 1]`; 0 if either vector is zero.
pub fn cosine<T: Real>(a: &EmbeddingVector<T>, b: &EmbeddingVector<T>) -> Result<T> {
    if a.dimension() != b.dimension() {
        return Err(Error::DimensionMismatch {
            expected: a.dimension(),
            got: b.dimension(),
        });
    }
    if a.is_zero() || b.is_zero() {
        return Ok(T::zero());
    }
    let dot = a
        .values
        .iter()
        .zip(&b.values)
        .fold(T::zero(), |acc, (&x, &y)| acc + x * y);
    Ok(dot / (a.norm * b.norm))
}

/// FNV-1a over the seed (little-endian) followed by the feature bytes.
pub fn feature_hash(seed: u64, feature: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for byte in seed.to_le_bytes().iter().chain(feature.as_bytes()) {
        h ^= u64::from(*byte);
        h = h.wrapping_mul(PRIME);
    }
    h
}

/// Immutable embedder: dimension, hash seed, and a frozen IDF table.
#[derive(Debug, Clone)]
pub struct Embedder<T: Real> {
    dimension: usize,
    hash_seed: u64,
    idf: HashMap<String, T>,
    default_idf: T,
}

impl<T: Real> Embedder<T> {
    /// Fit IDF weights on a document collection (one token list per
    /// document). `idf(f) = ln((1 + n) / (1 + df(f))) + 1`; unseen features
    /// get `ln(1 + n) + 1`. Fitting on an empty collection weights every
    /// feature 1, leaving plain signed-hashed term frequencies.
    pub fn fit<S: AsRef<str>>(dimension: usize, hash_seed: u64, docs: &[Vec<S>]) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::InvalidConfig(
                "embedding dimension must be >= 2".into(),
            ));
        }
        let n = docs.len();
        let mut df: HashMap<String, usize> = HashMap::new();
        for doc in docs {
            let mut seen: Vec<String> = Vec::new();
            for_each_feature(doc, |f| {
                if !seen.iter().any(|s| s == &f) {
                    seen.push(f);
                }
            });
            for f in seen {
                *df.entry(f).or_insert(0) += 1;
            }
        }
        let n_plus_1 = T::from_usize(n + 1).unwrap();
        let idf = df
            .into_iter()
            .map(|(f, d)| {
                let w = (n_plus_1 / T::from_usize(d + 1).unwrap()).ln() + T::one();
                (f, w)
            })
            .collect();
        Ok(Self {
            dimension,
            hash_seed,
            idf,
            default_idf: n_plus_1.ln() + T::one(),
        })
    }

    /// An embedder with no IDF table (all features weighted 1).
    pub fn unweighted(dimension: usize, hash_seed: u64) -> Result<Self> {
        Self::fit::<&str>(dimension, hash_seed, &[])
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn hash_seed(&self) -> u64 {
        self.hash_seed
    }

    fn idf(&self, feature: &str) -> T {
        self.idf.get(feature).copied().unwrap_or(self.default_idf)
    }

    /// Embed a token sequence. Deterministic for a fixed text, dimension,
    /// and hash seed; the empty sequence embeds to the zero vector.
    pub fn embed<S: AsRef<str>>(&self, tokens: &[S]) -> EmbeddingVector<T> {
        if tokens.is_empty() {
            return EmbeddingVector::zero(self.dimension);
        }
        // Term frequencies in first-occurrence order, so that the float
        // accumulation below is reproducible.
        let mut order: Vec<(String, usize)> = Vec::new();
        let mut position: HashMap<String, usize> = HashMap::new();
        for_each_feature(tokens, |f| match position.get(&f) {
            Some(&i) => order[i].1 += 1,
            None => {
                position.insert(f.clone(), order.len());
                order.push((f, 1));
            }
        });

        let mut values = vec![T::zero(); self.dimension];
        for (feature, tf) in &order {
            let h = feature_hash(self.hash_seed, feature);
            let bucket = ((h >> 1) % self.dimension as u64) as usize;
            let weight = T::from_usize(*tf).unwrap() * self.idf(feature);
            if h & 1 == 0 {
                values[bucket] = values[bucket] + weight;
            } else {
                values[bucket] = values[bucket] - weight;
            }
        }
        EmbeddingVector::new(values).normalized()
    }
}

/// Unigram and adjacent-bigram features of a token sequence.
fn for_each_feature<S: AsRef<str>>(tokens: &[S], mut f: impl FnMut(String)) {
    for t in tokens {
        f(t.as_ref().to_owned());
    }
    for pair in tokens.windows(2) {
        f(format!("{} {}", pair[0].as_ref(), pair[1].as_ref()));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(text: &str) -> Vec<String> {
        crate::token::tokenize(text)
    }

    #[test]
    fn embedding_is_deterministic() {
        let e = Embedder::<f64>::unweighted(64, 9).unwrap();
        assert_eq!(e.embed(&toks("a b c a")), e.embed(&toks("a b c a")));
    }

    #[test]
    fn empty_text_embeds_to_zero_with_zero_similarity() {
        let e = Embedder::<f64>::unweighted(32, 1).unwrap();
        let z = e.embed::<String>(&[]);
        assert!(z.is_zero());
        let v = e.embed(&toks("hello world"));
        assert_eq!(cosine(&z, &v).unwrap(), 0.0);
        assert_eq!(cosine(&z, &z).unwrap(), 0.0);
    }

    #[test]
    fn embedded_vectors_are_unit_length() {
        let e = Embedder::<f64>::unweighted(128, 5).unwrap();
        let v = e.embed(&toks("one two three two one"));
        assert!((v.norm() - 1.0).abs() < 1e-9);
    }

    /// Independent scalar reimplementation of the hashing formula, kept
    /// deliberately separate from the production accumulation path.
    fn oracle_embed(dim: usize, seed: u64, tokens: &[String], idf_default: f64) -> Vec<f64> {
        let mut features: Vec<String> = tokens.to_vec();
        for i in 0..tokens.len().saturating_sub(1) {
            features.push(format!("{} {}", tokens[i], tokens[i + 1]));
        }
        let mut v = vec![0.0f64; dim];
        // One pass per distinct feature, counting occurrences by scan.
        let mut done: Vec<&String> = Vec::new();
        for f in &features {
            if done.contains(&f) {
                continue;
            }
            done.push(f);
            let tf = features.iter().filter(|g| *g == f).count() as f64;
            const OFFSET: u64 = 0xcbf29ce484222325;
            const PRIME: u64 = 0x100000001b3;
            let mut h = OFFSET;
            for b in seed.to_le_bytes().iter().chain(f.as_bytes()) {
                h ^= u64::from(*b);
                h = h.wrapping_mul(PRIME);
            }
            let bucket = ((h >> 1) % dim as u64) as usize;
            let sign = if h & 1 == 0 { 1.0 } else { -1.0 };
            v[bucket] += sign * tf * idf_default;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut v {
                *x /= norm;
            }
        }
        v
    }

    #[test]
    fn matches_independent_reimplementation() {
        let dim = 4096;
        let seed = 0x5eed;
        let e = Embedder::<f64>::unweighted(dim, seed).unwrap();
        let a = toks("alpha beta");
        let b = toks("gamma delta");
        let got = cosine(&e.embed(&a), &e.embed(&b)).unwrap();
        let oa = EmbeddingVector::new(oracle_embed(dim, seed, &a, 1.0));
        let ob = EmbeddingVector::new(oracle_embed(dim, seed, &b, 1.0));
        let expect = cosine(&oa, &ob).unwrap();
        assert!((got - expect).abs() < 1e-12, "got {got}, oracle {expect}");
    }

    #[test]
    fn cosine_of_vector_with_itself_is_one() {
        let e = Embedder::<f64>::unweighted(64, 2).unwrap();
        let v = e.embed(&toks("north south east west"));
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn standard_basis_vectors_are_orthogonal() {
        let e1 = EmbeddingVector::new(vec![1.0, 0.0, 0.0]);
        let e2 = EmbeddingVector::new(vec![0.0, 1.0, 0.0]);
        assert_eq!(cosine(&e1, &e2).unwrap(), 0.0);
    }

    #[test]
    fn hand_computed_cosine() {
        let s = 1.0 / 2.0f64.sqrt();
        let a = EmbeddingVector::new(vec![s, s, 0.0]);
        let b = EmbeddingVector::new(vec![1.0, 0.0, 0.0]);
        let got: f64 = cosine(&a, &b).unwrap();
        // Hand arithmetic: 1/sqrt(2) = 0.7071...
        assert!((got - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-4);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = EmbeddingVector::new(vec![1.0, 0.0]);
        let b = EmbeddingVector::new(vec![1.0, 0.0, 0.0]);
        assert!(matches!(
            cosine(&a, &b),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 3
            })
        ));
    }

    #[test]
    fn idf_downweights_ubiquitous_tokens() {
        let docs: Vec<Vec<String>> = (0..20)
            .map(|i| toks(&format!("common filler topic{i}")))
            .collect();
        let e = Embedder::<f64>::fit(512, 3, &docs).unwrap();
        // "common" appears in every doc, "topic3" in one.
        assert!(e.idf("common") < e.idf("topic3"));
        assert_eq!(e.idf("never-seen"), e.default_idf);
    }

    #[test]
    fn disjoint_texts_stay_below_collision_bound() {
        // Texts sharing no unigrams or bigrams: |cosine| < 0.2 at dim 4096.
        let e = Embedder::<f64>::unweighted(4096, 17).unwrap();
        let texts = [
            "red orange yellow green blue indigo violet",
            "hammer chisel plane saw lathe file rasp",
            "sonata cantata fugue prelude nocturne etude",
            "birch maple alder willow aspen rowan cedar",
            "cumulus stratus cirrus nimbus contrail haze",
            "ledger invoice receipt voucher audit balance",
        ];
        let vs: Vec<_> = texts.iter().map(|t| e.embed(&toks(t))).collect();
        for i in 0..vs.len() {
            for j in (i + 1)..vs.len() {
                let c: f64 = cosine(&vs[i], &vs[j]).unwrap();
                assert!(c.abs() < 0.2, "|cos({i},{j})| = {} too high", c.abs());
            }
        }
    }

    #[test]
    fn cosine_stays_in_range_over_ten_thousand_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10_000 {
            let a: Vec<f64> = (0..8).map(|_| rng.gen_range(-100.0..100.0)).collect();
            let b: Vec<f64> = (0..8).map(|_| rng.gen_range(-100.0..100.0)).collect();
            let c: f64 = cosine(&EmbeddingVector::new(a), &EmbeddingVector::new(b)).unwrap();
            assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(&c), "out of range: {c}");
        }
    }

    proptest! {
        #[test]
        fn cosine_is_symmetric_and_bounded(
            a in proptest::collection::vec(-100.0f64..100.0, 8),
            b in proptest::collection::vec(-100.0f64..100.0, 8),
        ) {
            let va = EmbeddingVector::new(a);
            let vb = EmbeddingVector::new(b);
            let ab: f64 = cosine(&va, &vb).unwrap();
            let ba: f64 = cosine(&vb, &va).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(&ab));
        }

        #[test]
        fn cosine_is_scale_invariant(
            a in proptest::collection::vec(-10.0f64..10.0, 6),
            b in proptest::collection::vec(-10.0f64..10.0, 6),
            alpha in 0.001f64..1000.0,
        ) {
            let va = EmbeddingVector::new(a.clone());
            let vb = EmbeddingVector::new(b);
            let scaled = EmbeddingVector::new(a.iter().map(|x| x * alpha).collect());
            let c1: f64 = cosine(&va, &vb).unwrap();
            let c2: f64 = cosine(&scaled, &vb).unwrap();
            prop_assert!((c1 - c2).abs() < 1e-9);
        }
    }
}
