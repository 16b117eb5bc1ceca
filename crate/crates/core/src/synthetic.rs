//! Generator for corpora with known topic structure.
//!
//! Each theme owns a disjoint block of words; every document draws most of
//! its tokens from its own theme and the rest from a shared pool of filler
//! words that carry no topical signal. Used by tests, benchmarks and the
//! CLI `generate` command.

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Document;

#[derive(Clone, Debug)]
pub struct ThemedCorpus {
    pub themes: Vec<Vec<String>>,
    pub filler: Vec<String>,
    /// Share of tokens drawn from the document's own theme.
    pub theme_fraction: f64,
}

impl ThemedCorpus {
    pub fn new(themes: usize, words_per_theme: usize, filler_words: usize) -> Self {
        ThemedCorpus {
            themes: (0..themes)
                .map(|t| (0..words_per_theme).map(|w| theme_word(t, w)).collect())
                .collect(),
            filler: (0..filler_words).map(|w| format!("filler{w}")).collect(),
            theme_fraction: 0.7,
        }
    }

    /// Theme of the `i`-th generated document (round robin).
    pub fn theme_of(&self, doc: usize) -> usize {
        doc % self.themes.len()
    }

    /// Theme owning `word`, `None` for filler or unknown words.
    pub fn theme_of_word(&self, word: &str) -> Option<usize> {
        self.themes.iter().position(|ws| ws.iter().any(|w| w == word))
    }

    pub fn is_filler(&self, word: &str) -> bool {
        self.filler.iter().any(|w| w == word)
    }

    /// `n_docs` documents of `mean_len / 2 ..= 3 * mean_len / 2` tokens.
    /// Words within a theme (and within the filler pool) follow a Zipf
    /// distribution.
    pub fn documents(&self, n_docs: usize, mean_len: usize, seed: u64) -> Vec<Document> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let zipf = |n: usize| WeightedIndex::new((1..=n).map(|r| 1.0 / r as f64)).expect("non-empty word list");
        let theme_dists: Vec<_> = self.themes.iter().map(|t| zipf(t.len())).collect();
        let filler_dist = (!self.filler.is_empty()).then(|| zipf(self.filler.len()));
        let lo = (mean_len / 2).max(1);
        let hi = (mean_len * 3 / 2).max(lo);
        (0..n_docs)
            .map(|i| {
                let theme = self.theme_of(i);
                let len = rng.random_range(lo..=hi);
                let words: Vec<&str> = (0..len)
                    .map(|_| match &filler_dist {
                        Some(f) if rng.random::<f64>() >= self.theme_fraction => &self.filler[f.sample(&mut rng)],
                        _ => &self.themes[theme][theme_dists[theme].sample(&mut rng)],
                    })
                    .map(String::as_str)
                    .collect();
                Document::new(format!("doc{i}"), words.join(" "))
            })
            .collect()
    }
}

fn theme_word(theme: usize, w: usize) -> String {
    // Letters only, so the tokenizer keeps each word whole.
    let letters = |mut n: usize| {
        let mut s = String::new();
        loop {
            s.push((b'a' + (n % 26) as u8) as char);
            n /= 26;
            if n == 0 {
                break s;
            }
        }
    };
    format!("theme{}{}", letters(theme), letters(w))
}
