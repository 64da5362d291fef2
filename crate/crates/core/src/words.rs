//! Free words over a finite alphabet, presentations, small-cancellation
//! checking, and Dehn's algorithm.
//!
//! Letters are signed generator codes; the shortlex order is fixed by the
//! declaration order of the alphabet. Words are kept freely reduced at all
//! times, so `Word` equality is free-group equality.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum WordError {
    #[error("unknown generator symbol {symbol:?} at byte {pos}")]
    UnknownSymbol { symbol: String, pos: usize },
    #[error("invalid generator name {name:?}: names are a lowercase ASCII letter plus optional digits")]
    BadGeneratorName { name: String },
    #[error("duplicate generator name {name:?}")]
    DuplicateGenerator { name: String },
    #[error("word uses a letter outside this alphabet")]
    AlphabetMismatch,
    #[error("empty word where a nonempty word is required")]
    DegenerateInput,
    #[error("relator {index} must be nonempty and cyclically reduced")]
    BadRelator { index: usize },
    #[error("presentation does not satisfy C'(1/6); Dehn reduction is unsupported")]
    UnsupportedPresentation,
    #[error("presentation parse error at line {line}: {msg}")]
    PresentationParse { line: usize, msg: String },
}

/// A signed generator. Positive values encode the generator itself,
/// negative values its inverse; zero is unused.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Letter(i16);

impl Letter {
    pub fn positive(gen: usize) -> Letter {
        Letter(gen as i16 + 1)
    }

    pub fn negative(gen: usize) -> Letter {
        Letter(-(gen as i16 + 1))
    }

    pub fn with_sign(gen: usize, positive: bool) -> Letter {
        if positive {
            Letter::positive(gen)
        } else {
            Letter::negative(gen)
        }
    }

    pub fn generator(self) -> usize {
        (self.0.unsigned_abs() as usize) - 1
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    pub fn inverse(self) -> Letter {
        Letter(-self.0)
    }

    /// Rank in the shortlex letter order: generators in declaration order,
    /// positive before negative.
    pub fn shortlex_rank(self) -> usize {
        2 * self.generator() + usize::from(!self.is_positive())
    }
}

impl PartialOrd for Letter {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Letter {
    fn cmp(&self, other: &Self) -> Ordering {
        self.shortlex_rank().cmp(&other.shortlex_rank())
    }
}

impl fmt::Debug for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}{}", if self.is_positive() { '+' } else { '-' }, self.generator())
    }
}

/// A freely reduced word. The empty word is the identity.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Word {
    letters: Vec<Letter>,
}

impl Word {
    pub fn empty() -> Word {
        Word { letters: Vec::new() }
    }

    pub fn single(letter: Letter) -> Word {
        Word { letters: vec![letter] }
    }

    /// Freely reduces an arbitrary letter sequence. Idempotent.
    pub fn from_letters<I: IntoIterator<Item = Letter>>(letters: I) -> Word {
        let iter = letters.into_iter();
        let mut out: Vec<Letter> = Vec::with_capacity(iter.size_hint().0);
        for l in iter {
            if out.last() == Some(&l.inverse()) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Word { letters: out }
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Reduced product. `|u.mul(v)| <= |u| + |v|`.
    pub fn mul(&self, rhs: &Word) -> Word {
        let mut out = self.letters.clone();
        for &l in &rhs.letters {
            if out.last() == Some(&l.inverse()) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Word { letters: out }
    }

    /// Appends one letter with cancellation.
    pub fn push(&mut self, letter: Letter) {
        if self.letters.last() == Some(&letter.inverse()) {
            self.letters.pop();
        } else {
            self.letters.push(letter);
        }
    }

    pub fn inverse(&self) -> Word {
        Word {
            letters: self.letters.iter().rev().map(|l| l.inverse()).collect(),
        }
    }

    pub fn pow(&self, n: i64) -> Word {
        let base = if n >= 0 { self.clone() } else { self.inverse() };
        let mut out = Word::empty();
        for _ in 0..n.unsigned_abs() {
            out = out.mul(&base);
        }
        out
    }

    /// Shortlex: length first, then letterwise by declaration order.
    pub fn shortlex_cmp(&self, other: &Word) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| {
                for (a, b) in self.letters.iter().zip(&other.letters) {
                    match a.cmp(b) {
                        Ordering::Equal => continue,
                        ord => return ord,
                    }
                }
                Ordering::Equal
            })
    }

    pub fn is_cyclically_reduced(&self) -> bool {
        match (self.letters.first(), self.letters.last()) {
            (Some(a), Some(b)) => *a != b.inverse(),
            _ => true,
        }
    }

    /// Strips matching conjugating letters: returns `core` with
    /// `self = c · core · c⁻¹` for some word `c`.
    pub fn cyclic_core(&self) -> Word {
        let mut lo = 0;
        let mut hi = self.letters.len();
        while hi - lo >= 2 && self.letters[lo] == self.letters[hi - 1].inverse() {
            lo += 1;
            hi -= 1;
        }
        Word {
            letters: self.letters[lo..hi].to_vec(),
        }
    }

    /// Least-length root of the cyclic core: returns `(r, k)` with the core
    /// equal to `r^k` as a plain word. `k > 1` exactly when the word is a
    /// proper power up to conjugacy.
    pub fn primitive_root(&self) -> Result<(Word, usize), WordError> {
        if self.is_empty() {
            return Err(WordError::DegenerateInput);
        }
        let core = self.cyclic_core();
        let n = core.len();
        for d in 1..=n {
            if n % d != 0 {
                continue;
            }
            if (d..n).all(|i| core.letters[i] == core.letters[i % d]) {
                let root = Word {
                    letters: core.letters[..d].to_vec(),
                };
                return Ok((root, n / d));
            }
        }
        unreachable!("d = n always divides")
    }

    pub fn rotated(&self, offset: usize) -> Word {
        let n = self.letters.len();
        if n == 0 {
            return Word::empty();
        }
        let off = offset % n;
        let mut letters = Vec::with_capacity(n);
        letters.extend_from_slice(&self.letters[off..]);
        letters.extend_from_slice(&self.letters[..off]);
        Word { letters }
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word[")?;
        for l in &self.letters {
            write!(f, "{:?} ", l)?;
        }
        write!(f, "]")
    }
}

/// Generator symbol table. Names must be a lowercase ASCII letter followed
/// by optional digits; inverses print with the leading letter uppercased.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alphabet {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => chars.all(|c| c.is_ascii_digit()),
        _ => false,
    }
}

impl Alphabet {
    pub fn new<S: Into<String>, I: IntoIterator<Item = S>>(names: I) -> Result<Alphabet, WordError> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let mut index = HashMap::new();
        for (i, name) in names.iter().enumerate() {
            if !valid_name(name) {
                return Err(WordError::BadGeneratorName { name: name.clone() });
            }
            if index.insert(name.clone(), i).is_some() {
                return Err(WordError::DuplicateGenerator { name: name.clone() });
            }
        }
        Ok(Alphabet { names, index })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, gen: usize) -> &str {
        &self.names[gen]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn gen_id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn contains_word(&self, w: &Word) -> bool {
        w.letters().iter().all(|l| l.generator() < self.names.len())
    }

    pub fn check_word(&self, w: &Word) -> Result<(), WordError> {
        if self.contains_word(w) {
            Ok(())
        } else {
            Err(WordError::AlphabetMismatch)
        }
    }

    /// Tokenizes compact or whitespace-separated text into letters.
    /// A token is one ASCII letter plus any following digits; an uppercase
    /// leading letter denotes the inverse generator.
    pub fn parse_letters(&self, text: &str) -> Result<Vec<Letter>, WordError> {
        let bytes = text.as_bytes();
        let mut letters = Vec::new();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i] as char;
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if !c.is_ascii_alphabetic() {
                return Err(WordError::UnknownSymbol {
                    symbol: c.to_string(),
                    pos: i,
                });
            }
            let start = i;
            i += 1;
            while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                i += 1;
            }
            let token = &text[start..i];
            let positive = c.is_ascii_lowercase();
            let lookup = if positive {
                token.to_string()
            } else {
                let mut s = c.to_ascii_lowercase().to_string();
                s.push_str(&token[1..]);
                s
            };
            match self.index.get(&lookup) {
                Some(&gen) => letters.push(Letter::with_sign(gen, positive)),
                None => {
                    return Err(WordError::UnknownSymbol {
                        symbol: token.to_string(),
                        pos: start,
                    })
                }
            }
        }
        Ok(letters)
    }

    /// Parses and freely reduces.
    pub fn parse_word(&self, text: &str) -> Result<Word, WordError> {
        Ok(Word::from_letters(self.parse_letters(text)?))
    }

    pub fn letter_token(&self, l: Letter) -> String {
        let name = &self.names[l.generator()];
        if l.is_positive() {
            name.clone()
        } else {
            let mut s = String::with_capacity(name.len());
            let mut chars = name.chars();
            s.push(chars.next().unwrap().to_ascii_uppercase());
            s.extend(chars);
            s
        }
    }

    /// Compact printing, no separators.
    pub fn print_word(&self, w: &Word) -> String {
        let mut s = String::new();
        for &l in w.letters() {
            s.push_str(&self.letter_token(l));
        }
        s
    }

    /// Space-separated printing, used by the presentation text format.
    pub fn print_word_spaced(&self, w: &Word) -> String {
        w.letters()
            .iter()
            .map(|&l| self.letter_token(l))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Exact nonnegative rational, just enough for piece-metric thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Ratio {
        assert!(den != 0, "zero denominator");
        Ratio { num, den }
    }

    pub fn lt(self, other: Ratio) -> bool {
        (self.num as u128) * (other.den as u128) < (other.num as u128) * (self.den as u128)
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// Outcome of the piece-metric scan over a presentation.
#[derive(Clone, Debug)]
pub struct PieceReport {
    pub max_piece_length: usize,
    pub min_relator_length: usize,
    /// `max_piece_length / min_relator_length` as an exact ratio.
    pub metric_ratio: Ratio,
    pub satisfies: bool,
    /// True when there were no relators to scan.
    pub vacuous: bool,
}

/// Finite presentation with cyclically reduced relators.
#[derive(Debug)]
pub struct Presentation {
    alphabet: Alphabet,
    relators: Vec<Word>,
    units: Vec<Word>,
    sixth_report: OnceLock<PieceReport>,
}

impl PartialEq for Presentation {
    fn eq(&self, other: &Self) -> bool {
        self.alphabet == other.alphabet && self.relators == other.relators
    }
}

impl Presentation {
    pub fn new(alphabet: Alphabet, relators: Vec<Word>) -> Result<Presentation, WordError> {
        for (index, r) in relators.iter().enumerate() {
            if r.is_empty() || !r.is_cyclically_reduced() {
                return Err(WordError::BadRelator { index });
            }
            alphabet.check_word(r)?;
        }
        let units = all_units(&relators);
        Ok(Presentation {
            alphabet,
            relators,
            units,
            sixth_report: OnceLock::new(),
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn relators(&self) -> &[Word] {
        &self.relators
    }

    /// Parses the presentation text format:
    /// one `gens: a b c d` line followed by `rel: ...` lines.
    pub fn parse(text: &str) -> Result<Presentation, WordError> {
        let mut alphabet: Option<Alphabet> = None;
        let mut relators = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let err = |msg: &str| WordError::PresentationParse {
                line: lineno + 1,
                msg: msg.to_string(),
            };
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("gens:") {
                if alphabet.is_some() {
                    return Err(err("duplicate gens: line"));
                }
                alphabet = Some(Alphabet::new(rest.split_whitespace())?);
            } else if let Some(rest) = line.strip_prefix("rel:") {
                let alpha = alphabet.as_ref().ok_or_else(|| err("rel: before gens:"))?;
                relators.push(alpha.parse_word(rest)?);
            } else {
                return Err(err("expected gens: or rel:"));
            }
        }
        let alphabet = alphabet.ok_or(WordError::PresentationParse {
            line: 0,
            msg: "missing gens: line".to_string(),
        })?;
        Presentation::new(alphabet, relators)
    }

    /// Exact inverse of `parse`.
    pub fn print(&self) -> String {
        let mut out = String::new();
        out.push_str("gens: ");
        out.push_str(&self.alphabet.names().join(" "));
        out.push('\n');
        for r in &self.relators {
            out.push_str("rel: ");
            out.push_str(&self.alphabet.print_word_spaced(r));
            out.push('\n');
        }
        out
    }

    /// Scans all rotations of all relators and their inverses for common
    /// prefixes between distinct positions; same-unit overlaps are excluded.
    pub fn piece_report(&self, threshold: Ratio) -> PieceReport {
        if self.relators.is_empty() {
            return PieceReport {
                max_piece_length: 0,
                min_relator_length: 0,
                metric_ratio: Ratio::new(0, 1),
                satisfies: true,
                vacuous: true,
            };
        }
        let mut max_piece = 0usize;
        for i in 0..self.units.len() {
            for j in (i + 1)..self.units.len() {
                let lcp = common_prefix(&self.units[i], &self.units[j]);
                max_piece = max_piece.max(lcp);
            }
        }
        let min_rel = self.relators.iter().map(Word::len).min().unwrap();
        let ratio = Ratio::new(max_piece as u64, min_rel as u64);
        PieceReport {
            max_piece_length: max_piece,
            min_relator_length: min_rel,
            metric_ratio: ratio,
            satisfies: ratio.lt(threshold),
            vacuous: false,
        }
    }

    fn sixth(&self) -> &PieceReport {
        self.sixth_report
            .get_or_init(|| self.piece_report(Ratio::new(1, 6)))
    }

    pub fn satisfies_sixth(&self) -> bool {
        self.sixth().satisfies
    }

    /// Dehn's algorithm: repeatedly replaces the leftmost (then longest)
    /// subword that covers more than half of some relator conjugate by the
    /// inverse of the complement, then freely reduces. For a C'(1/6)
    /// presentation the result is empty exactly for identity words.
    pub fn dehn_reduce(&self, w: &Word) -> Result<Word, WordError> {
        if !self.satisfies_sixth() {
            return Err(WordError::UnsupportedPresentation);
        }
        self.alphabet.check_word(w)?;
        let mut cur = w.clone();
        'outer: loop {
            let letters = cur.letters();
            for start in 0..letters.len() {
                let mut best: Option<(usize, &Word)> = None;
                for unit in &self.units {
                    let lcp = common_prefix_slice(&letters[start..], unit.letters());
                    if 2 * lcp > unit.len() {
                        match best {
                            Some((len, _)) if len >= lcp => {}
                            _ => best = Some((lcp, unit)),
                        }
                    }
                }
                if let Some((len, unit)) = best {
                    // letters[start..start+len] equals the inverse of the
                    // remaining part of `unit`, which is strictly shorter.
                    let complement =
                        Word::from_letters(unit.letters()[len..].iter().rev().map(|l| l.inverse()));
                    let mut next = Word::from_letters(letters[..start].iter().copied());
                    for &l in complement.letters() {
                        next.push(l);
                    }
                    for &l in &letters[start + len..] {
                        next.push(l);
                    }
                    cur = next;
                    continue 'outer;
                }
            }
            return Ok(cur);
        }
    }

    pub fn is_identity(&self, w: &Word) -> Result<bool, WordError> {
        Ok(self.dehn_reduce(&w.cyclic_core())?.is_empty())
    }

    pub fn equal(&self, a: &Word, b: &Word) -> Result<bool, WordError> {
        self.is_identity(&a.mul(&b.inverse()))
    }
}

/// All rotations of every relator and its inverse, as positioned units.
fn all_units(relators: &[Word]) -> Vec<Word> {
    let mut units = Vec::new();
    for r in relators {
        for w in [r.clone(), r.inverse()] {
            for off in 0..w.len() {
                units.push(w.rotated(off));
            }
        }
    }
    units
}

fn common_prefix(a: &Word, b: &Word) -> usize {
    common_prefix_slice(a.letters(), b.letters())
}

fn common_prefix_slice(a: &[Letter], b: &[Letter]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}
