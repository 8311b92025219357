//! Classic Porter suffix-stripping stemmer.
//!
//! Implements the original five-step algorithm over ASCII words. Digits are
//! treated as consonants so tokens like `1990s` reduce to `1990`, matching
//! common analyzer behaviour. Words of one or two letters, and words with
//! non-ASCII characters, are returned unchanged.

/// Stem a single lowercase token.
pub fn stem(word: &str) -> String {
    if word.len() <= 2 || !word.is_ascii() {
        return word.to_string();
    }
    let mut s = Buffer {
        b: word.as_bytes().to_vec(),
    };
    s.step_1a();
    s.step_1b();
    s.step_1c();
    s.step_2();
    s.step_3();
    s.step_4();
    s.step_5a();
    s.step_5b();
    String::from_utf8(s.b).expect("stemmer operates on ascii bytes")
}

struct Buffer {
    b: Vec<u8>,
}

const STEP2: &[(&[u8], &[u8])] = &[
    (b"ational", b"ate"),
    (b"tional", b"tion"),
    (b"enci", b"ence"),
    (b"anci", b"ance"),
    (b"izer", b"ize"),
    (b"abli", b"able"),
    (b"alli", b"al"),
    (b"entli", b"ent"),
    (b"eli", b"e"),
    (b"ousli", b"ous"),
    (b"ization", b"ize"),
    (b"ation", b"ate"),
    (b"ator", b"ate"),
    (b"alism", b"al"),
    (b"iveness", b"ive"),
    (b"fulness", b"ful"),
    (b"ousness", b"ous"),
    (b"aliti", b"al"),
    (b"iviti", b"ive"),
    (b"biliti", b"ble"),
];

const STEP3: &[(&[u8], &[u8])] = &[
    (b"icate", b"ic"),
    (b"ative", b""),
    (b"alize", b"al"),
    (b"iciti", b"ic"),
    (b"ical", b"ic"),
    (b"ful", b""),
    (b"ness", b""),
];

const STEP4: &[(&[u8], &[u8])] = &[
    (b"al", b""),
    (b"ance", b""),
    (b"ence", b""),
    (b"er", b""),
    (b"ic", b""),
    (b"able", b""),
    (b"ible", b""),
    (b"ant", b""),
    (b"ement", b""),
    (b"ment", b""),
    (b"ent", b""),
    (b"ion", b""),
    (b"ou", b""),
    (b"ism", b""),
    (b"ate", b""),
    (b"iti", b""),
    (b"ous", b""),
    (b"ive", b""),
    (b"ize", b""),
];

impl Buffer {
    /// A letter is a consonant unless it is a/e/i/o/u, or a `y` preceded by
    /// a consonant.
    fn is_consonant(&self, i: usize) -> bool {
        match self.b[i] {
            b'a' | b'e' | b'i' | b'o' | b'u' => false,
            b'y' => i == 0 || !self.is_consonant(i - 1),
            _ => true,
        }
    }

    /// The measure m of `b[..len]`: the number of vowel-consonant sequences
    /// in the form [C](VC)^m[V].
    fn measure(&self, len: usize) -> usize {
        let mut i = 0;
        while i < len && self.is_consonant(i) {
            i += 1;
        }
        let mut m = 0;
        loop {
            while i < len && !self.is_consonant(i) {
                i += 1;
            }
            if i == len {
                return m;
            }
            m += 1;
            while i < len && self.is_consonant(i) {
                i += 1;
            }
            if i == len {
                return m;
            }
        }
    }

    fn has_vowel(&self, len: usize) -> bool {
        (0..len).any(|i| !self.is_consonant(i))
    }

    fn ends_double_consonant(&self) -> bool {
        let n = self.b.len();
        n >= 2 && self.b[n - 1] == self.b[n - 2] && self.is_consonant(n - 1)
    }

    /// `b[..len]` ends consonant-vowel-consonant where the final consonant
    /// is not w, x or y.
    fn cvc(&self, len: usize) -> bool {
        len >= 3
            && self.is_consonant(len - 3)
            && !self.is_consonant(len - 2)
            && self.is_consonant(len - 1)
            && !matches!(self.b[len - 1], b'w' | b'x' | b'y')
    }

    fn ends(&self, suffix: &[u8]) -> bool {
        self.b.len() > suffix.len() && self.b.ends_with(suffix)
    }

    /// Apply the rule with the longest matching suffix, subject to `cond`
    /// evaluated on the stem left after removing the suffix.
    fn apply_rules(
        &mut self,
        rules: &[(&[u8], &[u8])],
        cond: impl Fn(&Self, usize, &[u8]) -> bool,
    ) {
        let mut best: Option<(&[u8], &[u8])> = None;
        for &(suffix, replacement) in rules {
            if self.ends(suffix) && best.is_none_or(|(s, _)| suffix.len() > s.len()) {
                best = Some((suffix, replacement));
            }
        }
        if let Some((suffix, replacement)) = best {
            let stem = self.b.len() - suffix.len();
            if cond(self, stem, suffix) {
                self.b.truncate(stem);
                self.b.extend_from_slice(replacement);
            }
        }
    }

    // sses -> ss, ies -> i, ss -> ss, s -> ""
    fn step_1a(&mut self) {
        if self.ends(b"sses") || self.ends(b"ies") {
            self.b.truncate(self.b.len() - 2);
        } else if !self.ends(b"ss") && self.ends(b"s") {
            self.b.pop();
        }
    }

    fn step_1b(&mut self) {
        if self.ends(b"eed") {
            if self.measure(self.b.len() - 3) > 0 {
                self.b.pop();
            }
            return;
        }
        let fired = if self.ends(b"ed") && self.has_vowel(self.b.len() - 2) {
            self.b.truncate(self.b.len() - 2);
            true
        } else if self.ends(b"ing") && self.has_vowel(self.b.len() - 3) {
            self.b.truncate(self.b.len() - 3);
            true
        } else {
            false
        };
        if fired {
            if self.ends(b"at") || self.ends(b"bl") || self.ends(b"iz") {
                self.b.push(b'e');
            } else if self.ends_double_consonant()
                && !matches!(self.b.last(), Some(b'l') | Some(b's') | Some(b'z'))
            {
                self.b.pop();
            } else if self.measure(self.b.len()) == 1 && self.cvc(self.b.len()) {
                self.b.push(b'e');
            }
        }
    }

    fn step_1c(&mut self) {
        if self.ends(b"y") && self.has_vowel(self.b.len() - 1) {
            *self.b.last_mut().unwrap() = b'i';
        }
    }

    fn step_2(&mut self) {
        self.apply_rules(STEP2, |s, stem, _| s.measure(stem) > 0);
    }

    fn step_3(&mut self) {
        self.apply_rules(STEP3, |s, stem, _| s.measure(stem) > 0);
    }

    fn step_4(&mut self) {
        self.apply_rules(STEP4, |s, stem, suffix| {
            s.measure(stem) > 1 && (suffix != b"ion" || matches!(s.b[stem - 1], b's' | b't'))
        });
    }

    // (m>1) E -> "", (m=1 and not *o) E -> ""
    fn step_5a(&mut self) {
        if self.ends(b"e") {
            let stem = self.b.len() - 1;
            let m = self.measure(stem);
            if m > 1 || (m == 1 && !self.cvc(stem)) {
                self.b.pop();
            }
        }
    }

    // (m>1 and *d and *L) -> single letter
    fn step_5b(&mut self) {
        let n = self.b.len();
        if n >= 2 && self.b[n - 1] == b'l' && self.ends_double_consonant() && self.measure(n) > 1 {
            self.b.pop();
        }
    }
}
