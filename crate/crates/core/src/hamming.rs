//! Bit-packed ±1 codes and exhaustive inner-product search over them.
//!
//! Bit `i` of a packed code is code position `i`, least significant bit first
//! within each 64-bit word; a set bit means `+1`. For two codes of length `r`
//! the ±1 inner product is `r − 2·hamming(a, b)`.

use crate::error::{Error, Result};
use crate::subspace::Hit;

const WORD_BITS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PackedCode {
    words: Vec<u64>,
    bits: usize,
}

impl PackedCode {
    /// Packs a ±1 code.
    pub fn pack(code: &[i8]) -> Result<Self> {
        let mut words = vec![0u64; words_for(code.len())];
        for (i, &b) in code.iter().enumerate() {
            match b {
                1 => words[i / WORD_BITS] |= 1 << (i % WORD_BITS),
                -1 => {}
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "code entry {i} is {other}, expected -1 or +1"
                    )))
                }
            }
        }
        Ok(Self {
            words,
            bits: code.len(),
        })
    }

    /// Rebuilds a code from raw words, rejecting set bits past `bits`.
    pub fn from_words(words: Vec<u64>, bits: usize) -> Result<Self> {
        if words.len() != words_for(bits) {
            return Err(Error::dims("packed code words", words_for(bits), words.len()));
        }
        if let Some(&last) = words.last() {
            let used = bits - (words.len() - 1) * WORD_BITS;
            if used < WORD_BITS && last >> used != 0 {
                return Err(Error::InvalidParameter(
                    "packed code has set bits beyond its length".into(),
                ));
            }
        }
        Ok(Self { words, bits })
    }

    pub fn unpack(&self) -> Vec<i8> {
        (0..self.bits)
            .map(|i| {
                if self.words[i / WORD_BITS] >> (i % WORD_BITS) & 1 == 1 {
                    1
                } else {
                    -1
                }
            })
            .collect()
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn hamming(&self, other: &Self) -> Result<u32> {
        if self.bits != other.bits {
            return Err(Error::dims("code length", self.bits, other.bits));
        }
        Ok(self.hamming_unchecked(other))
    }

    #[inline]
    fn hamming_unchecked(&self, other: &Self) -> u32 {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    /// ±1 inner product `r − 2·hamming`.
    pub fn inner_product(&self, other: &Self) -> Result<i64> {
        let h = self.hamming(other)?;
        Ok(self.bits as i64 - 2 * i64::from(h))
    }
}

fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD_BITS)
}

/// Packed codes of all database videos, searched by exhaustive scan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryIndex {
    bits: usize,
    ids: Vec<String>,
    codes: Vec<PackedCode>,
}

impl BinaryIndex {
    pub fn new(bits: usize) -> Self {
        Self {
            bits,
            ids: Vec::new(),
            codes: Vec::new(),
        }
    }

    pub fn push(&mut self, id: impl Into<String>, code: PackedCode) -> Result<()> {
        if code.bits != self.bits {
            return Err(Error::dims("index code length", self.bits, code.bits));
        }
        self.ids.push(id.into());
        self.codes.push(code);
        Ok(())
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn codes(&self) -> &[PackedCode] {
        &self.codes
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &PackedCode)> {
        self.ids.iter().map(String::as_str).zip(&self.codes)
    }

    /// Top-`k` videos by inner product with `query`, ties by ascending id.
    pub fn search(&self, query: &PackedCode, k: usize) -> Result<Vec<Hit<i64>>> {
        if self.is_empty() {
            return Err(Error::EmptyInput("binary index"));
        }
        if query.bits != self.bits {
            return Err(Error::dims("query code length", self.bits, query.bits));
        }
        if k > self.len() {
            return Err(Error::InvalidParameter(format!(
                "k = {k} exceeds index size {}",
                self.len()
            )));
        }
        let r = self.bits as i64;
        let mut scored: Vec<(i64, usize)> = self
            .codes
            .iter()
            .enumerate()
            .map(|(i, code)| (r - 2 * i64::from(code.hamming_unchecked(query)), i))
            .collect();
        let cmp = |a: &(i64, usize), b: &(i64, usize)| b.0.cmp(&a.0).then_with(|| self.ids[a.1].cmp(&self.ids[b.1]));
        if k == 0 {
            return Ok(Vec::new());
        }
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, cmp);
            scored.truncate(k);
        }
        scored.sort_unstable_by(cmp);
        Ok(scored
            .into_iter()
            .map(|(score, i)| Hit { video_id: self.ids[i].clone(), score })
            .collect())
    }
}
