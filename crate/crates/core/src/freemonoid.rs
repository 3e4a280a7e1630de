//! Words in the free monoid on `d` letters.
//!
//! Letters are 1-based. Words of a fixed length `ℓ` are in bijection with
//! `[0, d^ℓ)` through the base-`d` expansion, most significant letter first;
//! the Fock basis and every file format rely on that ordering.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Word {
    letters: Vec<u16>,
    d: usize,
}

impl Word {
    pub fn new(letters: Vec<usize>, d: usize) -> Result<Self> {
        if d == 0 || d > u16::MAX as usize {
            return Err(Error::InvalidArgument(format!("alphabet size {d}")));
        }
        let mut out = Vec::with_capacity(letters.len());
        for l in letters {
            if l == 0 || l > d {
                return Err(Error::LetterOutOfRange { letter: l, d });
            }
            out.push(l as u16);
        }
        Ok(Word { letters: out, d })
    }

    /// The empty word ∅.
    pub fn empty(d: usize) -> Self {
        assert!(d >= 1, "alphabet size must be positive");
        Word { letters: Vec::new(), d }
    }

    /// The one-letter word `j`.
    pub fn letter(j: usize, d: usize) -> Result<Self> {
        Word::new(vec![j], d)
    }

    pub fn alphabet(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn letters(&self) -> impl ExactSizeIterator<Item = usize> + '_ {
        self.letters.iter().map(|&l| l as usize)
    }

    pub fn first(&self) -> Option<usize> {
        self.letters.first().map(|&l| l as usize)
    }

    pub fn last(&self) -> Option<usize> {
        self.letters.last().map(|&l| l as usize)
    }

    pub fn concat(&self, other: &Word) -> Result<Word> {
        if self.d != other.d {
            return Err(Error::AlphabetMismatch { left: self.d, right: other.d });
        }
        let mut letters = Vec::with_capacity(self.len() + other.len());
        letters.extend_from_slice(&self.letters);
        letters.extend_from_slice(&other.letters);
        Ok(Word { letters, d: self.d })
    }

    /// `ω^t`: the letters in reverse order.
    pub fn transpose(&self) -> Word {
        let mut letters = self.letters.clone();
        letters.reverse();
        Word { letters, d: self.d }
    }

    /// Append a letter on the right.
    pub fn push(&self, j: usize) -> Result<Word> {
        if j == 0 || j > self.d {
            return Err(Error::LetterOutOfRange { letter: j, d: self.d });
        }
        let mut letters = self.letters.clone();
        letters.push(j as u16);
        Ok(Word { letters, d: self.d })
    }

    /// The word without its last letter.
    pub fn prefix(&self) -> Option<Word> {
        if self.is_empty() {
            return None;
        }
        Some(Word { letters: self.letters[..self.len() - 1].to_vec(), d: self.d })
    }

    /// Position of this word among the `d^ℓ` words of its length.
    pub fn rank(&self) -> usize {
        self.letters.iter().fold(0usize, |acc, &l| acc * self.d + (l as usize - 1))
    }

    /// Inverse of [`Word::rank`].
    pub fn from_rank(mut rank: usize, len: usize, d: usize) -> Word {
        let mut letters = vec![0u16; len];
        for slot in letters.iter_mut().rev() {
            *slot = (rank % d) as u16 + 1;
            rank /= d;
        }
        Word { letters, d }
    }

    /// Canonical text form: `e` for ∅, otherwise the decimal letters
    /// concatenated (`121`). Alphabets with ten or more letters separate the
    /// letters with dots (`3.11.2`) to stay unambiguous.
    pub fn encode(&self) -> String {
        if self.is_empty() {
            return "e".to_string();
        }
        let sep = if self.d >= 10 { "." } else { "" };
        self.letters.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(sep)
    }

    pub fn parse(s: &str, d: usize) -> Result<Word> {
        let s = s.trim();
        if s == "e" || s == "∅" {
            return Ok(Word::empty(d));
        }
        let letters: Option<Vec<usize>> = if d >= 10 {
            s.split('.').map(|t| t.parse::<usize>().ok()).collect()
        } else {
            s.chars().map(|c| c.to_digit(10).map(|v| v as usize)).collect()
        };
        let letters = letters.ok_or_else(|| Error::Parse { line: 0, msg: format!("bad word '{s}'") })?;
        Word::new(letters, d)
    }
}

/// All `d^ℓ` words of length `ℓ` in lexicographic order.
pub fn enumerate_words(d: usize, len: usize) -> Vec<Word> {
    assert!(d >= 1, "alphabet size must be positive");
    let count = d.checked_pow(len as u32).expect("word count overflows usize");
    (0..count).map(|r| Word::from_rank(r, len, d)).collect()
}

/// All words of length `≤ max_len`, degree-major then lexicographic.
pub fn enumerate_words_upto(d: usize, max_len: usize) -> Vec<Word> {
    (0..=max_len).flat_map(|l| enumerate_words(d, l)).collect()
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d
            .cmp(&other.d)
            .then(self.letters.len().cmp(&other.letters.len()))
            .then_with(|| self.letters.cmp(&other.letters))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encode())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({})", self.encode())
    }
}
