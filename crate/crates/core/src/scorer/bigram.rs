//! Byte-level bigram language model with add-one smoothing.
//!
//! The model is small enough that every probability can be checked by hand,
//! which is what makes exact end-to-end scoring oracles possible. Scoring
//! conventions:
//!
//! * tokens are single bytes;
//! * `p(next | prev) = (count(prev, next) + 1) / (count(prev, *) + |alphabet|)`;
//! * the first continuation byte is conditioned on the last context byte,
//!   or scored uniformly over the alphabet when the context is empty.
//!
//! The model is immutable after training and freely shareable across
//! threads.

use crate::error::{Error, Result};
use crate::fingerprint::sha256_hex;

use super::{ConditionalScoreRequest, ConditionalScoreResult, ScorerBackend};

#[derive(Debug, Clone)]
pub struct BigramLm {
    /// Sorted distinct symbols.
    alphabet: Vec<u8>,
    /// byte -> alphabet index, or -1 when the byte is outside the alphabet.
    index: [i16; 256],
    /// Row-major |alphabet| x |alphabet| bigram counts.
    counts: Vec<u64>,
    /// Per-row totals (count of the row symbol in bigram-first position).
    row_totals: Vec<u64>,
    fingerprint: String,
}

impl BigramLm {
    /// Train over the full 256-byte alphabet. Any request text is scorable.
    pub fn train(corpus: &[u8]) -> Self {
        let alphabet: Vec<u8> = (0..=255).collect();
        Self::build(corpus, alphabet).expect("full alphabet covers any corpus")
    }

    /// Train with an explicit alphabet. Requests containing symbols outside
    /// the alphabet are rejected, and the corpus must stay inside it too.
    /// With an empty corpus this yields the uniform model over the alphabet.
    pub fn train_with_alphabet(corpus: &[u8], alphabet: &[u8]) -> Result<Self> {
        if alphabet.is_empty() {
            return Err(Error::Config("bigram alphabet must be non-empty".into()));
        }
        let mut symbols = alphabet.to_vec();
        symbols.sort_unstable();
        symbols.dedup();
        Self::build(corpus, symbols)
    }

    fn build(corpus: &[u8], alphabet: Vec<u8>) -> Result<Self> {
        let n = alphabet.len();
        let mut index = [-1i16; 256];
        for (i, &sym) in alphabet.iter().enumerate() {
            index[sym as usize] = i as i16;
        }
        let mut counts = vec![0u64; n * n];
        let mut row_totals = vec![0u64; n];
        for pair in corpus.windows(2) {
            let prev = index[pair[0] as usize];
            let next = index[pair[1] as usize];
            if prev < 0 || next < 0 {
                return Err(Error::Config(format!(
                    "corpus byte 0x{:02x} is outside the model alphabet",
                    if prev < 0 { pair[0] } else { pair[1] }
                )));
            }
            counts[prev as usize * n + next as usize] += 1;
            row_totals[prev as usize] += 1;
        }
        let fingerprint = format!(
            "bigram:{}:{}",
            &sha256_hex(&[&alphabet])[..16],
            &sha256_hex(&[corpus])[..16]
        );
        Ok(BigramLm {
            alphabet,
            index,
            counts,
            row_totals,
            fingerprint,
        })
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet.len()
    }

    fn symbol_index(&self, byte: u8) -> Result<usize> {
        let idx = self.index[byte as usize];
        if idx < 0 {
            return Err(Error::InvalidInput(format!(
                "byte 0x{byte:02x} is outside the model alphabet"
            )));
        }
        Ok(idx as usize)
    }

    /// Natural-log probability of `next` given `prev`. `None` means no
    /// preceding byte exists (empty context): uniform over the alphabet.
    pub fn logprob(&self, prev: Option<u8>, next: u8) -> Result<f64> {
        let n = self.alphabet.len();
        let next_idx = self.symbol_index(next)?;
        match prev {
            None => Ok(-(n as f64).ln()),
            Some(prev) => {
                let prev_idx = self.symbol_index(prev)?;
                let count = self.counts[prev_idx * n + next_idx];
                let total = self.row_totals[prev_idx];
                Ok(((count + 1) as f64 / (total + n as u64) as f64).ln())
            }
        }
    }
}

impl ScorerBackend for BigramLm {
    fn score(&self, request: &ConditionalScoreRequest) -> Result<ConditionalScoreResult> {
        let continuation = request.continuation.as_bytes();
        if continuation.is_empty() {
            return Err(Error::EmptyContinuation);
        }
        let context = request.context.as_bytes();
        let mut token_logprobs = Vec::with_capacity(continuation.len());
        for (i, &byte) in continuation.iter().enumerate() {
            let prev = if i == 0 {
                context.last().copied()
            } else {
                Some(continuation[i - 1])
            };
            token_logprobs.push(self.logprob(prev, byte)?);
        }
        Ok(ConditionalScoreResult {
            token_count: token_logprobs.len() as u32,
            token_logprobs,
        })
    }

    fn fingerprint(&self) -> String {
        self.fingerprint.clone()
    }
}
