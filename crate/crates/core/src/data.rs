//! Vocabulary, samples and datasets for the co-occurrence task.
//!
//! Token ids are 1-based: id 1 and 2 are the target signals, id 3 is the
//! common token present in every sample, and ids `4..=d` form the random pool.
//! Embeddings are only materialized when the vocabulary is a random frame;
//! with the canonical basis every projection is a column lookup.

use std::fmt;
use std::io::{BufRead, Write};

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{dot, Mat};
use crate::rng::Rng;

pub type TokenId = usize;

pub const SIGNAL_1: TokenId = 1;
pub const SIGNAL_2: TokenId = 2;
pub const COMMON: TokenId = 3;
pub const FIRST_POOL: TokenId = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingMode {
    Canonical,
    RandomOrthonormal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    d: usize,
    /// `d × d` with column `i - 1` holding μ_i; `None` for the standard basis.
    frame: Option<Mat>,
}

impl Vocabulary {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn mode(&self) -> EmbeddingMode {
        if self.frame.is_some() {
            EmbeddingMode::RandomOrthonormal
        } else {
            EmbeddingMode::Canonical
        }
    }

    pub fn is_canonical(&self) -> bool {
        self.frame.is_none()
    }

    pub fn pool(&self) -> std::ops::RangeInclusive<TokenId> {
        FIRST_POOL..=self.d
    }

    fn check_id(&self, id: TokenId) {
        assert!(id >= 1 && id <= self.d, "token id {id} outside 1..={}", self.d);
    }

    /// The embedding vector μ_id.
    pub fn embedding(&self, id: TokenId) -> Vec<f64> {
        self.check_id(id);
        match &self.frame {
            None => {
                let mut e = vec![0.0; self.d];
                e[id - 1] = 1.0;
                e
            }
            Some(f) => f.col(id - 1),
        }
    }

    /// μ_aᵀ μ_b.
    pub fn inner(&self, a: TokenId, b: TokenId) -> f64 {
        match &self.frame {
            None => {
                if a == b {
                    1.0
                } else {
                    0.0
                }
            }
            Some(_) => dot(&self.embedding(a), &self.embedding(b)),
        }
    }

    /// `mat · μ_id` for a matrix with `d` columns.
    pub fn project(&self, mat: &Mat, id: TokenId) -> Vec<f64> {
        self.check_id(id);
        debug_assert_eq!(mat.cols(), self.d);
        match &self.frame {
            None => mat.col(id - 1),
            Some(_) => mat.matvec(&self.embedding(id)),
        }
    }

    /// `mat += alpha · left · μ_idᵀ`.
    pub fn add_outer(&self, mat: &mut Mat, alpha: f64, left: &[f64], id: TokenId) {
        self.check_id(id);
        match &self.frame {
            None => mat.add_to_col(id - 1, alpha, left),
            Some(_) => mat.add_outer(alpha, left, &self.embedding(id)),
        }
    }

    /// `μ_aᵀ · M · μ_b` for a `d × d` matrix.
    pub fn bilinear(&self, m: &Mat, a: TokenId, b: TokenId) -> f64 {
        match &self.frame {
            None => m[(a - 1, b - 1)],
            Some(_) => dot(&self.embedding(a), &m.matvec(&self.embedding(b))),
        }
    }

    /// Gram matrix of the embedding set.
    pub fn gram(&self) -> Mat {
        match &self.frame {
            None => Mat::identity(self.d),
            Some(f) => f.transpose().matmul(f),
        }
    }

    /// Dense `d × L` input matrix for a token sequence.
    pub fn materialize(&self, tokens: &[TokenId]) -> Mat {
        let mut x = Mat::zeros(self.d, tokens.len());
        for (l, &id) in tokens.iter().enumerate() {
            let e = self.embedding(id);
            for (r, v) in e.into_iter().enumerate() {
                x[(r, l)] = v;
            }
        }
        x
    }
}

pub fn build_vocabulary(d: usize, mode: EmbeddingMode, rng: &mut Rng) -> Result<Vocabulary> {
    if d < 4 {
        return Err(Error::config(format!("vocabulary needs d >= 4, got {d}")));
    }
    let frame = match mode {
        EmbeddingMode::Canonical => None,
        EmbeddingMode::RandomOrthonormal => Some(random_frame(d, rng)),
    };
    Ok(Vocabulary { d, frame })
}

/// Gaussian matrix orthonormalized column by column with modified
/// Gram-Schmidt, applied twice for full working precision.
fn random_frame(d: usize, rng: &mut Rng) -> Mat {
    let mut cols: Vec<Vec<f64>> = (0..d)
        .map(|_| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    for k in 0..d {
        for _ in 0..2 {
            for j in 0..k {
                let (done, rest) = cols.split_at_mut(k);
                let proj = dot(&done[j], &rest[0]);
                for (v, q) in rest[0].iter_mut().zip(&done[j]) {
                    *v -= proj * q;
                }
            }
        }
        let norm = dot(&cols[k], &cols[k]).sqrt();
        cols[k].iter_mut().for_each(|v| *v /= norm);
    }
    Mat::from_fn(d, d, |r, c| cols[c][r])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Group {
    I1,
    I2,
    I3,
    I4,
}

impl Group {
    pub const ALL: [Group; 4] = [Group::I1, Group::I2, Group::I3, Group::I4];

    pub fn index(self) -> usize {
        self as usize
    }

    /// 1-based number used in files.
    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_number(k: u8) -> Option<Group> {
        Group::ALL.get((k as usize).wrapping_sub(1)).copied()
    }

    pub fn label(self) -> i8 {
        match self {
            Group::I1 => 1,
            _ => -1,
        }
    }

    pub fn has_signal_1(self) -> bool {
        matches!(self, Group::I1 | Group::I2)
    }

    pub fn has_signal_2(self) -> bool {
        matches!(self, Group::I1 | Group::I3)
    }

    /// Positions that must hold special tokens (common plus signals).
    pub fn special_count(self) -> usize {
        1 + self.has_signal_1() as usize + self.has_signal_2() as usize
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "I{}", self.number())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub tokens: Vec<TokenId>,
    pub label: i8,
    pub group: Group,
}

impl Sample {
    pub fn y(&self) -> f64 {
        self.label as f64
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Position of the first occurrence of a token.
    pub fn position_of(&self, id: TokenId) -> Option<usize> {
        self.tokens.iter().position(|&t| t == id)
    }

    pub fn contains(&self, id: TokenId) -> bool {
        self.tokens.contains(&id)
    }

    pub fn check_invariants(&self) -> Result<()> {
        let count = |id| self.tokens.iter().filter(|&&t| t == id).count();
        let (c1, c2, c3) = (count(SIGNAL_1), count(SIGNAL_2), count(COMMON));
        let want = (
            self.group.has_signal_1() as usize,
            self.group.has_signal_2() as usize,
            1,
        );
        if (c1, c2, c3) != want {
            return Err(Error::input(format!(
                "{} sample has special-token counts {:?}, expected {:?}",
                self.group,
                (c1, c2, c3),
                want
            )));
        }
        if self.label != self.group.label() {
            return Err(Error::input(format!(
                "{} sample carries label {}",
                self.group, self.label
            )));
        }
        if self.tokens.iter().any(|&t| t == 0) {
            return Err(Error::input("token id 0 is not a vocabulary index"));
        }
        Ok(())
    }
}

/// Source of random-pool tokens for the non-special slots.
#[derive(Debug, Clone)]
pub enum TokenPool {
    /// Uniform with replacement over `first..=last`.
    Sampled { first: TokenId, last: TokenId },
    /// Each draw returns the next unused id, ascending, up to `last`.
    Fresh { next: TokenId, last: TokenId },
}

impl TokenPool {
    pub fn sampled(vocab: &Vocabulary) -> Self {
        TokenPool::Sampled {
            first: FIRST_POOL,
            last: vocab.d(),
        }
    }

    pub fn fresh(vocab: &Vocabulary) -> Self {
        TokenPool::Fresh {
            next: FIRST_POOL,
            last: vocab.d(),
        }
    }

    fn remaining(&self) -> usize {
        match *self {
            TokenPool::Sampled { first, last } => {
                if last >= first {
                    usize::MAX
                } else {
                    0
                }
            }
            TokenPool::Fresh { next, last } => (last + 1).saturating_sub(next),
        }
    }

    fn draw(&mut self, rng: &mut Rng) -> TokenId {
        match self {
            TokenPool::Sampled { first, last } => rng.random_range(*first..=*last),
            TokenPool::Fresh { next, .. } => {
                let id = *next;
                *next += 1;
                id
            }
        }
    }
}

pub fn generate_sample(
    rng: &mut Rng,
    vocab: &Vocabulary,
    seq_len: usize,
    group: Group,
    pool: &mut TokenPool,
) -> Result<Sample> {
    let specials = group.special_count();
    if seq_len < specials {
        return Err(Error::config(format!(
            "{group} needs L >= {specials}, got {seq_len}"
        )));
    }
    let free = seq_len - specials;
    if free > 0 && pool.remaining() < free {
        return Err(Error::config(format!(
            "token pool cannot fill {free} slots (d = {})",
            vocab.d()
        )));
    }

    // Partial Fisher-Yates: the first `specials` entries become the
    // positions of the common token, then signal 1, then signal 2.
    let mut positions: Vec<usize> = (0..seq_len).collect();
    for k in 0..specials {
        let j = rng.random_range(k..seq_len);
        positions.swap(k, j);
    }
    let mut tokens = vec![0; seq_len];
    let mut next = 0;
    tokens[positions[next]] = COMMON;
    next += 1;
    if group.has_signal_1() {
        tokens[positions[next]] = SIGNAL_1;
        next += 1;
    }
    if group.has_signal_2() {
        tokens[positions[next]] = SIGNAL_2;
    }
    for slot in tokens.iter_mut().filter(|t| **t == 0) {
        *slot = pool.draw(rng);
    }
    Ok(Sample {
        tokens,
        label: group.label(),
        group,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub seq_len: usize,
    pub strict: bool,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample indices of each group, ascending.
    pub fn partition(&self) -> [Vec<usize>; 4] {
        let mut cells: [Vec<usize>; 4] = Default::default();
        for (i, s) in self.samples.iter().enumerate() {
            cells[s.group.index()].push(i);
        }
        cells
    }

    pub fn group_counts(&self) -> [usize; 4] {
        let mut c = [0; 4];
        for s in &self.samples {
            c[s.group.index()] += 1;
        }
        c
    }

    pub fn check_invariants(&self) -> Result<()> {
        for (i, s) in self.samples.iter().enumerate() {
            if s.len() != self.seq_len {
                return Err(Error::input(format!("sample {i} has length {}", s.len())));
            }
            s.check_invariants()
                .map_err(|e| Error::input(format!("sample {i}: {e}")))?;
        }
        if self.strict {
            let n = self.n();
            if n % 6 != 0 {
                return Err(Error::input(format!("strict dataset with n = {n}")));
            }
            let want = [n / 2, n / 6, n / 6, n / 6];
            if self.group_counts() != want {
                return Err(Error::input(format!(
                    "strict proportions violated: {:?}",
                    self.group_counts()
                )));
            }
            let mut seen = std::collections::HashSet::new();
            for s in &self.samples {
                for &t in s.tokens.iter().filter(|&&t| t >= FIRST_POOL) {
                    if !seen.insert(t) {
                        return Err(Error::input(format!("pool token {t} repeats")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Token ids appearing anywhere in the dataset, ascending.
    pub fn used_tokens(&self) -> Vec<TokenId> {
        let mut ids: Vec<TokenId> = self
            .samples
            .iter()
            .flat_map(|s| s.tokens.iter().copied())
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn write_to(&self, out: &mut impl Write, d: usize, seed: u64) -> Result<()> {
        writeln!(
            out,
            "{},{},{},{},{}",
            self.n(),
            self.seq_len,
            d,
            self.strict as u8,
            seed
        )?;
        for s in &self.samples {
            write!(out, "{},{}", s.group.number(), s.label)?;
            for t in &s.tokens {
                write!(out, ",{t}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Reads the format produced by [`Dataset::write_to`]; returns the
    /// dataset together with the recorded `d` and seed.
    pub fn read_from(input: impl BufRead) -> Result<(Dataset, usize, u64)> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty dataset file".into()))??;
        let fields: Vec<&str> = header.trim().split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Parse(format!("bad header line `{header}`")));
        }
        let num = |s: &str| -> Result<u64> {
            s.parse::<u64>()
                .map_err(|_| Error::Parse(format!("bad header field `{s}`")))
        };
        let n = num(fields[0])? as usize;
        let seq_len = num(fields[1])? as usize;
        let d = num(fields[2])? as usize;
        let strict = num(fields[3])? != 0;
        let seed = num(fields[4])?;

        let mut samples = Vec::with_capacity(n);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<i64> = line
                .trim()
                .split(',')
                .map(|v| v.parse::<i64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Parse(format!("bad record `{line}`")))?;
            if vals.len() != seq_len + 2 {
                return Err(Error::Parse(format!("record has {} fields", vals.len())));
            }
            let group = Group::from_number(vals[0] as u8)
                .ok_or_else(|| Error::Parse(format!("bad group {}", vals[0])))?;
            let tokens = vals[2..]
                .iter()
                .map(|&t| {
                    if t >= 1 && (t as usize) <= d {
                        Ok(t as usize)
                    } else {
                        Err(Error::Parse(format!("token {t} outside 1..={d}")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            samples.push(Sample {
                tokens,
                label: vals[1] as i8,
                group,
            });
        }
        if samples.len() != n {
            return Err(Error::Parse(format!(
                "header announces {n} samples, found {}",
                samples.len()
            )));
        }
        let ds = Dataset {
            samples,
            seq_len,
            strict,
        };
        ds.check_invariants()?;
        Ok((ds, d, seed))
    }
}

/// Vocabulary size that lets every pool slot of a strict set be distinct.
pub fn strict_vocab_size(seq_len: usize, n: usize) -> usize {
    3 + (n / 2) * (seq_len - 3) + (n / 3) * (seq_len - 2) + (n / 6) * (seq_len - 1)
}

fn group_schedule(n: usize) -> Vec<Group> {
    let mut groups = vec![Group::I1; n / 2];
    for g in [Group::I2, Group::I3, Group::I4] {
        groups.extend(std::iter::repeat_n(g, n / 6));
    }
    groups
}

/// Training set with exact proportions and globally unique pool tokens.
/// Samples are ordered I1, I2, I3, I4.
pub fn generate_training_set(
    rng: &mut Rng,
    seq_len: usize,
    n: usize,
    mode: EmbeddingMode,
) -> Result<(Vocabulary, Dataset)> {
    if n == 0 || n % 6 != 0 {
        return Err(Error::config(format!("n must be a positive multiple of 6, got {n}")));
    }
    if seq_len < 3 {
        return Err(Error::config(format!("L must be at least 3, got {seq_len}")));
    }
    let d = strict_vocab_size(seq_len, n).max(4);
    let vocab = build_vocabulary(d, mode, rng)?;
    let mut pool = TokenPool::fresh(&vocab);
    let samples = group_schedule(n)
        .into_iter()
        .map(|g| generate_sample(rng, &vocab, seq_len, g, &mut pool))
        .collect::<Result<Vec<_>>>()?;
    Ok((
        vocab,
        Dataset {
            samples,
            seq_len,
            strict: true,
        },
    ))
}

/// Exact proportions with pool tokens drawn with replacement from a given
/// vocabulary (the fixed-`d` experimental layout).
pub fn generate_proportional_set(
    rng: &mut Rng,
    vocab: &Vocabulary,
    seq_len: usize,
    n: usize,
) -> Result<Dataset> {
    if n == 0 || n % 6 != 0 {
        return Err(Error::config(format!("n must be a positive multiple of 6, got {n}")));
    }
    if seq_len < 3 {
        return Err(Error::config(format!("L must be at least 3, got {seq_len}")));
    }
    let mut pool = TokenPool::sampled(vocab);
    let samples = group_schedule(n)
        .into_iter()
        .map(|g| generate_sample(rng, vocab, seq_len, g, &mut pool))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        samples,
        seq_len,
        strict: false,
    })
}

/// I.i.d. draws from the data distribution: I1 with probability 1/2, each
/// other group with probability 1/6.
pub fn generate_eval_set(
    rng: &mut Rng,
    vocab: &Vocabulary,
    seq_len: usize,
    n_eval: usize,
) -> Result<Dataset> {
    if n_eval == 0 {
        return Err(Error::config("evaluation set needs at least one sample"));
    }
    if seq_len < 3 {
        return Err(Error::config(format!("L must be at least 3, got {seq_len}")));
    }
    let mut pool = TokenPool::sampled(vocab);
    let samples = (0..n_eval)
        .map(|_| {
            let group = if rng.random_bool(0.5) {
                Group::I1
            } else {
                Group::ALL[1 + rng.random_range(0..3)]
            };
            generate_sample(rng, vocab, seq_len, group, &mut pool)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        samples,
        seq_len,
        strict: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    fn rng(seed: u64) -> Rng {
        stream(seed, Stream::Data)
    }

    #[test]
    fn canonical_vocabulary_is_standard_basis() {
        let v = build_vocabulary(4, EmbeddingMode::Canonical, &mut rng(0)).unwrap();
        assert_eq!(v.embedding(2), vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(v.inner(1, 2), 0.0);
        let v64 = build_vocabulary(64, EmbeddingMode::Canonical, &mut rng(0)).unwrap();
        assert_eq!(v64.gram(), Mat::identity(64));
    }

    #[test]
    fn random_frame_is_orthonormal() {
        let v = build_vocabulary(16, EmbeddingMode::RandomOrthonormal, &mut rng(7)).unwrap();
        let g = v.gram();
        for r in 0..16 {
            for c in 0..16 {
                let want = if r == c { 1.0 } else { 0.0 };
                assert!((g[(r, c)] - want).abs() <= 1e-10, "gram[{r},{c}] = {}", g[(r, c)]);
            }
        }
    }

    #[test]
    fn small_vocabulary_rejected() {
        assert!(matches!(
            build_vocabulary(3, EmbeddingMode::Canonical, &mut rng(0)),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn group_sample_contents() {
        let v = build_vocabulary(40, EmbeddingMode::Canonical, &mut rng(0)).unwrap();
        let mut pool = TokenPool::sampled(&v);
        let mut r = rng(3);
        let s = generate_sample(&mut r, &v, 5, Group::I1, &mut pool).unwrap();
        let count = |id| s.tokens.iter().filter(|&&t| t == id).count();
        assert_eq!((count(1), count(2), count(3)), (1, 1, 1));
        assert_eq!(s.tokens.iter().filter(|&&t| t >= 4).count(), 2);
        assert_eq!(s.label, 1);

        let s = generate_sample(&mut r, &v, 5, Group::I2, &mut pool).unwrap();
        assert_eq!((s.tokens.iter().filter(|&&t| t == 1).count(), s.contains(2)), (1, false));
        assert!(s.contains(3));
        assert_eq!(s.label, -1);

        let s = generate_sample(&mut r, &v, 1, Group::I4, &mut pool).unwrap();
        assert_eq!(s.tokens, vec![3]);
        assert_eq!(s.label, -1);
    }

    #[test]
    fn sample_errors() {
        let v = build_vocabulary(4, EmbeddingMode::Canonical, &mut rng(0)).unwrap();
        let mut pool = TokenPool::sampled(&v);
        assert!(generate_sample(&mut rng(1), &v, 2, Group::I1, &mut pool).is_err());
        let mut fresh = TokenPool::fresh(&v);
        // one free id (4) but two free slots
        assert!(generate_sample(&mut rng(1), &v, 4, Group::I2, &mut fresh).is_err());
    }

    #[test]
    fn strict_training_set_sizes() {
        let (v, ds) = generate_training_set(&mut rng(1), 5, 60, EmbeddingMode::Canonical).unwrap();
        assert_eq!(v.d(), 163);
        assert_eq!(ds.group_counts(), [30, 10, 10, 10]);
        ds.check_invariants().unwrap();

        let (v, ds) = generate_training_set(&mut rng(2), 3, 6, EmbeddingMode::Canonical).unwrap();
        assert_eq!(ds.group_counts(), [3, 1, 1, 1]);
        for s in ds.samples.iter().filter(|s| s.group == Group::I1) {
            let mut t = s.tokens.clone();
            t.sort();
            assert_eq!(t, vec![1, 2, 3]);
        }
        assert!(v.d() >= 4);
    }

    #[test]
    fn training_set_config_errors() {
        assert!(generate_training_set(&mut rng(1), 5, 10, EmbeddingMode::Canonical).is_err());
        assert!(generate_training_set(&mut rng(1), 2, 12, EmbeddingMode::Canonical).is_err());
    }

    #[test]
    fn eval_set_single_and_deterministic() {
        let v = build_vocabulary(30, EmbeddingMode::Canonical, &mut rng(0)).unwrap();
        let one = generate_eval_set(&mut rng(5), &v, 5, 1).unwrap();
        assert_eq!(one.n(), 1);
        one.check_invariants().unwrap();
        let a = generate_eval_set(&mut rng(5), &v, 5, 50).unwrap();
        let b = generate_eval_set(&mut rng(5), &v, 5, 50).unwrap();
        let (mut ba, mut bb) = (Vec::new(), Vec::new());
        a.write_to(&mut ba, 30, 5).unwrap();
        b.write_to(&mut bb, 30, 5).unwrap();
        assert_eq!(ba, bb);
    }

    #[test]
    fn eval_set_group_counts_within_five_sigma() {
        let v = build_vocabulary(64, EmbeddingMode::Canonical, &mut rng(0)).unwrap();
        let ds = generate_eval_set(&mut rng(11), &v, 5, 600).unwrap();
        let c = ds.group_counts();
        let expect = [(300.0, 0.5), (100.0, 1.0 / 6.0), (100.0, 1.0 / 6.0), (100.0, 1.0 / 6.0)];
        for (k, (mean, p)) in expect.iter().enumerate() {
            let sd = (600.0 * p * (1.0 - p) as f64).sqrt();
            assert!((c[k] as f64 - mean).abs() <= 5.0 * sd, "group {k}: {}", c[k]);
        }
    }

    #[test]
    fn serialization_round_trip() {
        let (v, ds) = generate_training_set(&mut rng(4), 4, 12, EmbeddingMode::Canonical).unwrap();
        let mut buf = Vec::new();
        ds.write_to(&mut buf, v.d(), 4).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&format!("12,4,{},1,4\n", v.d())));
        let (back, d, seed) = Dataset::read_from(&buf[..]).unwrap();
        assert_eq!((back, d, seed), (ds, v.d(), 4));
    }
}
