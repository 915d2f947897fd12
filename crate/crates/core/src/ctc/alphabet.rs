use crate::{Error, Result};

pub const BLANK: usize = 0;

/// Character inventory of the recogniser: blank, space, apostrophe, `a`-`z`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<char>,
}

impl Default for Alphabet {
    fn default() -> Self {
        let mut symbols = vec!['_', ' ', '\''];
        symbols.extend('a'..='z');
        Self { symbols }
    }
}

impl Alphabet {
    /// Number of classes including the blank.
    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    /// The printable symbols (index 1 onward).
    pub fn characters(&self) -> &[char] {
        &self.symbols[1..]
    }

    pub fn symbol(&self, index: usize) -> Option<char> {
        (index != BLANK).then(|| self.symbols.get(index).copied()).flatten()
    }

    pub fn index_of(&self, c: char) -> Option<usize> {
        self.symbols.iter().skip(1).position(|&s| s == c).map(|i| i + 1)
    }

    /// Lower-cases and maps every character; unknown characters are a data error.
    pub fn encode(&self, text: &str) -> Result<Vec<usize>> {
        text.chars()
            .flat_map(char::to_lowercase)
            .map(|c| {
                self.index_of(c)
                    .ok_or_else(|| Error::Data(format!("character {c:?} is not in the alphabet")))
            })
            .collect()
    }

    /// Maps labels back to text, skipping blanks and out-of-range indices.
    pub fn decode(&self, labels: &[usize]) -> String {
        labels.iter().filter_map(|&i| self.symbol(i)).collect()
    }
}
