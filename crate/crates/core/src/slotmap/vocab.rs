use std::collections::HashMap;

use super::phrases::tokenize;

pub const UNK: &str = "<unk>";

/// Token index; index 0 is reserved for out-of-vocabulary tokens.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn build<'a, I: IntoIterator<Item = &'a str>>(sentences: I) -> Vocab {
        let mut tokens = vec![UNK.to_string()];
        let mut index = HashMap::from([(UNK.to_string(), 0)]);
        for s in sentences {
            for t in tokenize(s) {
                if !index.contains_key(&t) {
                    index.insert(t.clone(), tokens.len());
                    tokens.push(t);
                }
            }
        }
        Vocab { tokens, index }
    }

    /// Rebuilds a vocabulary from its token list (index order, UNK first).
    pub fn from_tokens(tokens: Vec<String>) -> Option<Vocab> {
        if tokens.first().map(String::as_str) != Some(UNK) {
            return None;
        }
        let index: HashMap<String, usize> = tokens.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        if index.len() != tokens.len() {
            return None;
        }
        Some(Vocab { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn lookup(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    /// Token indices of a sentence. The one-hot vector of a token is the
    /// unit vector at its index; the network consumes the indices directly.
    pub fn encode(&self, sentence: &str) -> Vec<usize> {
        tokenize(sentence).iter().map(|t| self.lookup(t)).collect()
    }
}

/// Explicit one-hot rows, one per token.
pub fn encode_sentence(vocab: &Vocab, sentence: &str) -> Vec<Vec<f64>> {
    vocab
        .encode(sentence)
        .into_iter()
        .map(|i| {
            let mut v = vec![0.0; vocab.len()];
            v[i] = 1.0;
            v
        })
        .collect()
}
