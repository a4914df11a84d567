//! Token alphabet shared by the language engine and the subject RNNs.
//!
//! Index layout: BOS is 0, the `k` letters occupy `1..=k`, EOS is
//! `k + 1`. The dataset form has `k = 4` (letters `a b c d`), giving the
//! six-token alphabet `[BOS, a, b, c, d, EOS]`.

/// Token id within an [`Alphabet`].
pub type Token = u8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Alphabet {
    letters: usize,
}

impl Alphabet {
    pub const BOS: Token = 0;

    /// Alphabet with `letters` non-special tokens (`k >= 2`).
    pub fn new(letters: usize) -> Self {
        assert!(letters >= 2, "need at least two letters");
        assert!(letters <= (u8::MAX as usize) - 2, "alphabet too large");
        Self { letters }
    }

    /// The four-letter dataset alphabet `[BOS, a, b, c, d, EOS]`.
    pub fn dataset() -> Self {
        Self::new(4)
    }

    pub fn letters(&self) -> usize {
        self.letters
    }

    /// Total token count including BOS and EOS.
    pub fn size(&self) -> usize {
        self.letters + 2
    }

    pub fn eos(&self) -> Token {
        (self.letters + 1) as Token
    }

    /// Id of the `i`-th letter, 1-based (`letter(1)` is `a`).
    pub fn letter(&self, i: usize) -> Token {
        assert!(i >= 1 && i <= self.letters, "letter index {i} out of range");
        i as Token
    }

    pub fn is_letter(&self, t: Token) -> bool {
        t >= 1 && (t as usize) <= self.letters
    }

    /// Human-readable rendering for transcripts and logs.
    pub fn render(&self, tokens: &[Token]) -> String {
        tokens
            .iter()
            .map(|&t| {
                if t == Self::BOS {
                    "^".to_string()
                } else if t == self.eos() {
                    "$".to_string()
                } else if self.letters <= 4 {
                    char::from(b'a' + t - 1).to_string()
                } else {
                    format!("a{t}")
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_alphabet_layout() {
        let a = Alphabet::dataset();
        assert_eq!(a.size(), 6);
        assert_eq!(Alphabet::BOS, 0);
        assert_eq!(a.eos(), 5);
        assert_eq!(a.letter(1), 1);
        assert_eq!(a.letter(4), 4);
        assert!(a.is_letter(1) && a.is_letter(4));
        assert!(!a.is_letter(0) && !a.is_letter(5));
    }

    #[test]
    fn render_uses_letters() {
        let a = Alphabet::dataset();
        assert_eq!(a.render(&[0, 1, 2, 2, 4, 5]), "^abbd$");
    }
}
