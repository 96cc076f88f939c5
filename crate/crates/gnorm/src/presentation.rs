//! Group presentations and free-group words.
//!
//! Words are stored freely reduced over a signed-index alphabet. A
//! [`Presentation`] carries the alphabet, the relator list and a declared
//! [`StructureClass`] which selects the normal-form strategy. Free-group
//! balls are enumerated in shortlex order with each inverse letter ranked
//! directly after its generator; all SDP indexing in this crate inherits
//! that order.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on enumerated ball sizes.
pub const DEFAULT_BALL_CAP: usize = 2_000_000;

/// A named generator of a presentation. `index` is its position in the
/// alphabet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generator {
    pub index: usize,
    pub name: String,
}

/// A freely reduced word. Letters are signed 1-based generator indices:
/// `+(i+1)` is generator `i`, `-(i+1)` its inverse. The empty word is the
/// identity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct Word(Vec<i32>);

impl Word {
    pub fn identity() -> Self {
        Word(Vec::new())
    }

    /// Free reduction of a raw letter sequence. Letters must reference the
    /// alphabet: `0 < |l| <= alphabet_len`.
    pub fn reduce(raw: &[i32], alphabet_len: usize) -> Result<Self> {
        let mut stack: Vec<i32> = Vec::with_capacity(raw.len());
        for &l in raw {
            if l == 0 || l.unsigned_abs() as usize > alphabet_len {
                return Err(Error::LetterOutOfRange(l, alphabet_len));
            }
            if stack.last().is_some_and(|&t| t == -l) {
                stack.pop();
            } else {
                stack.push(l);
            }
        }
        Ok(Word(stack))
    }

    /// Wraps a sequence that is already known to be reduced (debug-checked).
    pub(crate) fn from_reduced(letters: Vec<i32>) -> Self {
        debug_assert!(letters.windows(2).all(|w| w[0] != -w[1]));
        debug_assert!(letters.iter().all(|&l| l != 0));
        Word(letters)
    }

    pub fn letters(&self) -> &[i32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_empty()
    }

    /// Free product: reduce the concatenation.
    pub fn mul(&self, other: &Word) -> Word {
        let mut stack = self.0.clone();
        for &l in &other.0 {
            if stack.last().is_some_and(|&t| t == -l) {
                stack.pop();
            } else {
                stack.push(l);
            }
        }
        Word(stack)
    }

    /// Reversed sequence with flipped signs.
    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|&l| -l).collect())
    }

    /// Conjugate `g * self * g^-1`.
    pub fn conjugate_by(&self, g: &Word) -> Word {
        g.mul(self).mul(&g.inverse())
    }

    /// Shortlex rank of a letter: generator `i` before its inverse, blocks
    /// ordered by generator index.
    fn letter_rank(l: i32) -> u32 {
        (l.unsigned_abs() - 1) * 2 + u32::from(l < 0)
    }

    /// Total shortlex order: by length, then letter ranks.
    pub fn shortlex_cmp(&self, other: &Word) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| {
            for (&a, &b) in self.0.iter().zip(&other.0) {
                match Word::letter_rank(a).cmp(&Word::letter_rank(b)) {
                    Ordering::Equal => {}
                    ord => return ord,
                }
            }
            Ordering::Equal
        })
    }

    /// Maximum absolute letter value, i.e. the smallest alphabet that can
    /// carry this word.
    pub fn max_index(&self) -> usize {
        self.0.iter().map(|l| l.unsigned_abs() as usize).max().unwrap_or(0)
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.shortlex_cmp(other)
    }
}

/// Declared structure of a presented group; never inferred from relators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum StructureClass {
    Free,
    FreeAbelian,
    /// Direct product of free groups; each block lists generator indices.
    ProductOfFrees(Vec<Vec<usize>>),
    GenericPresented,
}

impl fmt::Display for StructureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StructureClass::Free => write!(f, "free"),
            StructureClass::FreeAbelian => write!(f, "free-abelian"),
            StructureClass::ProductOfFrees(_) => write!(f, "product-of-frees"),
            StructureClass::GenericPresented => write!(f, "generic"),
        }
    }
}

/// Class-tagged canonical representative of a group element. Two elements
/// are equal in the group iff their normal forms are identical.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormalForm {
    /// Reduced word (free groups: the word itself).
    Free(Word),
    /// Integer exponent vector, one entry per generator.
    Abelian(Vec<i64>),
    /// One reduced word per block, each over that block's generators.
    Blocks(Vec<Word>),
}

impl NormalForm {
    pub fn is_identity(&self) -> bool {
        match self {
            NormalForm::Free(w) => w.is_identity(),
            NormalForm::Abelian(e) => e.iter().all(|&x| x == 0),
            NormalForm::Blocks(ws) => ws.iter().all(Word::is_identity),
        }
    }

    /// Canonical reduced word representing this normal form.
    pub fn canonical_word(&self) -> Word {
        match self {
            NormalForm::Free(w) => w.clone(),
            NormalForm::Abelian(exps) => {
                let mut letters = Vec::new();
                for (i, &e) in exps.iter().enumerate() {
                    let l = if e >= 0 { (i + 1) as i32 } else { -((i + 1) as i32) };
                    for _ in 0..e.unsigned_abs() {
                        letters.push(l);
                    }
                }
                Word::from_reduced(letters)
            }
            NormalForm::Blocks(ws) => {
                // block alphabets are disjoint, so plain concatenation stays
                // reduced
                let mut letters = Vec::new();
                for w in ws {
                    letters.extend_from_slice(w.letters());
                }
                Word::from_reduced(letters)
            }
        }
    }

    pub fn mul(&self, other: &NormalForm) -> Result<NormalForm> {
        match (self, other) {
            (NormalForm::Free(a), NormalForm::Free(b)) => Ok(NormalForm::Free(a.mul(b))),
            (NormalForm::Abelian(a), NormalForm::Abelian(b)) if a.len() == b.len() => Ok(
                NormalForm::Abelian(a.iter().zip(b).map(|(x, y)| x + y).collect()),
            ),
            (NormalForm::Blocks(a), NormalForm::Blocks(b)) if a.len() == b.len() => Ok(
                NormalForm::Blocks(a.iter().zip(b).map(|(x, y)| x.mul(y)).collect()),
            ),
            _ => Err(Error::AlphabetMismatch),
        }
    }

    pub fn inverse(&self) -> NormalForm {
        match self {
            NormalForm::Free(w) => NormalForm::Free(w.inverse()),
            NormalForm::Abelian(e) => NormalForm::Abelian(e.iter().map(|x| -x).collect()),
            NormalForm::Blocks(ws) => NormalForm::Blocks(ws.iter().map(Word::inverse).collect()),
        }
    }

    /// Word length of the canonical representative.
    pub fn length(&self) -> usize {
        match self {
            NormalForm::Free(w) => w.len(),
            NormalForm::Abelian(e) => e.iter().map(|x| x.unsigned_abs() as usize).sum(),
            NormalForm::Blocks(ws) => ws.iter().map(Word::len).sum(),
        }
    }
}

impl PartialOrd for NormalForm {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for NormalForm {
    /// Shortlex on canonical representatives; total on forms of one class.
    fn cmp(&self, other: &Self) -> Ordering {
        self.canonical_word().shortlex_cmp(&other.canonical_word())
    }
}

/// Alphabet + relators + declared structure class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Presentation {
    alphabet: Vec<Generator>,
    relators: Vec<Word>,
    class: StructureClass,
}

impl Presentation {
    pub fn new(names: &[&str], relators: Vec<Word>, class: StructureClass) -> Result<Self> {
        let alphabet = names
            .iter()
            .enumerate()
            .map(|(index, name)| Generator { index, name: name.to_string() })
            .collect();
        let p = Presentation { alphabet, relators, class };
        p.validate()?;
        Ok(p)
    }

    /// Free group on `names`.
    pub fn free(names: &[&str]) -> Self {
        Presentation::new(names, Vec::new(), StructureClass::Free).expect("free presentation")
    }

    /// Free abelian group on `names`, with all commutator relators.
    pub fn free_abelian(names: &[&str]) -> Self {
        let m = names.len();
        let mut relators = Vec::new();
        for i in 0..m {
            for j in (i + 1)..m {
                relators.push(commutator(i, j));
            }
        }
        Presentation::new(names, relators, StructureClass::FreeAbelian)
            .expect("free abelian presentation")
    }

    /// Direct product of free groups with the given generator-name blocks.
    pub fn product_of_frees(blocks: &[&[&str]]) -> Self {
        let names: Vec<&str> = blocks.iter().flat_map(|b| b.iter().copied()).collect();
        let mut idx_blocks = Vec::new();
        let mut next = 0usize;
        for b in blocks {
            idx_blocks.push((next..next + b.len()).collect::<Vec<_>>());
            next += b.len();
        }
        let mut relators = Vec::new();
        for bi in 0..idx_blocks.len() {
            for bj in (bi + 1)..idx_blocks.len() {
                for &i in &idx_blocks[bi] {
                    for &j in &idx_blocks[bj] {
                        relators.push(commutator(i, j));
                    }
                }
            }
        }
        Presentation::new(&names, relators, StructureClass::ProductOfFrees(idx_blocks))
            .expect("product presentation")
    }

    pub fn alphabet(&self) -> &[Generator] {
        &self.alphabet
    }

    pub fn alphabet_len(&self) -> usize {
        self.alphabet.len()
    }

    pub fn relators(&self) -> &[Word] {
        &self.relators
    }

    pub fn class(&self) -> &StructureClass {
        &self.class
    }

    /// The free presentation on the same alphabet. SOS certificates are
    /// identities in the free group ring and live over this cover.
    pub fn free_cover(&self) -> Presentation {
        Presentation {
            alphabet: self.alphabet.clone(),
            relators: Vec::new(),
            class: StructureClass::Free,
        }
    }

    /// Same data with the class forced to `GenericPresented`; used to push
    /// structured presentations through the generic word-problem path.
    pub fn as_generic(&self) -> Presentation {
        Presentation {
            alphabet: self.alphabet.clone(),
            relators: self.relators.clone(),
            class: StructureClass::GenericPresented,
        }
    }

    fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for g in &self.alphabet {
            if !seen.insert(g.name.as_str()) {
                return Err(Error::Invalid(format!("duplicate generator `{}`", g.name)));
            }
        }
        for r in &self.relators {
            if r.is_empty() {
                return Err(Error::Invalid("empty relator".into()));
            }
            if r.max_index() > self.alphabet.len() {
                return Err(Error::LetterOutOfRange(0, self.alphabet.len()));
            }
        }
        match &self.class {
            StructureClass::Free => {
                if !self.relators.is_empty() {
                    return Err(Error::ClassMismatch(
                        "class `free` admits no relators".into(),
                    ));
                }
            }
            StructureClass::FreeAbelian => {
                let m = self.alphabet.len();
                let mut pairs = std::collections::HashSet::new();
                for r in &self.relators {
                    let (i, j) = as_commutator(r).ok_or_else(|| {
                        Error::ClassMismatch(
                            "free-abelian relators must be commutators of two generators".into(),
                        )
                    })?;
                    pairs.insert((i.min(j), i.max(j)));
                }
                for i in 0..m {
                    for j in (i + 1)..m {
                        if !pairs.contains(&(i, j)) {
                            return Err(Error::ClassMismatch(format!(
                                "missing commutator of `{}` and `{}`",
                                self.alphabet[i].name, self.alphabet[j].name
                            )));
                        }
                    }
                }
            }
            StructureClass::ProductOfFrees(blocks) => {
                let m = self.alphabet.len();
                let mut owner = vec![usize::MAX; m];
                for (b, block) in blocks.iter().enumerate() {
                    for &i in block {
                        if i >= m || owner[i] != usize::MAX {
                            return Err(Error::ClassMismatch(
                                "blocks must be disjoint subsets of the alphabet".into(),
                            ));
                        }
                        owner[i] = b;
                    }
                }
                if owner.contains(&usize::MAX) {
                    return Err(Error::ClassMismatch("blocks must cover the alphabet".into()));
                }
                let mut pairs = std::collections::HashSet::new();
                for r in &self.relators {
                    let (i, j) = as_commutator(r).ok_or_else(|| {
                        Error::ClassMismatch(
                            "product-of-frees relators must be commutators of two generators"
                                .into(),
                        )
                    })?;
                    if owner[i] == owner[j] {
                        return Err(Error::ClassMismatch(
                            "commutator relator inside one block".into(),
                        ));
                    }
                    pairs.insert((i.min(j), i.max(j)));
                }
                for i in 0..m {
                    for j in (i + 1)..m {
                        if owner[i] != owner[j] && !pairs.contains(&(i.min(j), i.max(j))) {
                            return Err(Error::ClassMismatch(format!(
                                "missing cross-block commutator of `{}` and `{}`",
                                self.alphabet[i].name, self.alphabet[j].name
                            )));
                        }
                    }
                }
            }
            StructureClass::GenericPresented => {}
        }
        Ok(())
    }

    /// Class-specific canonical form. `GenericPresented` has none; callers
    /// must use the word-problem machinery instead.
    pub fn normal_form(&self, w: &Word) -> Result<NormalForm> {
        match &self.class {
            StructureClass::Free => Ok(NormalForm::Free(w.clone())),
            StructureClass::FreeAbelian => {
                let mut exps = vec![0i64; self.alphabet.len()];
                for &l in w.letters() {
                    let i = l.unsigned_abs() as usize - 1;
                    exps[i] += if l > 0 { 1 } else { -1 };
                }
                Ok(NormalForm::Abelian(exps))
            }
            StructureClass::ProductOfFrees(blocks) => {
                let mut owner = vec![0usize; self.alphabet.len()];
                for (b, block) in blocks.iter().enumerate() {
                    for &i in block {
                        owner[i] = b;
                    }
                }
                let mut parts: Vec<Vec<i32>> = vec![Vec::new(); blocks.len()];
                for &l in w.letters() {
                    parts[owner[l.unsigned_abs() as usize - 1]].push(l);
                }
                let ws = parts
                    .into_iter()
                    .map(|raw| Word::reduce(&raw, self.alphabet.len()))
                    .collect::<Result<Vec<_>>>()?;
                Ok(NormalForm::Blocks(ws))
            }
            // No canonical form exists; the freely reduced word serves as a
            // representative. Ring multiplication stays forbidden for this
            // class, so distinct representatives of one element never meet.
            StructureClass::GenericPresented => Ok(NormalForm::Free(w.clone())),
        }
    }

    pub fn identity_normal_form(&self) -> Result<NormalForm> {
        self.normal_form(&Word::identity())
    }

    /// All reduced words of length `<= n` over the FREE group on this
    /// alphabet, in shortlex order. Relators are never applied here.
    pub fn ball(&self, n: usize, cap: usize) -> Result<Vec<Word>> {
        free_ball(self.alphabet.len(), n, cap)
    }

    /// Parses a single word: `term ('*' term)*`, `term = name ('^' int)?`,
    /// `1` denotes the identity.
    pub fn parse_word(&self, text: &str) -> Result<Word> {
        let mut letters = Vec::new();
        let mut pos = 0usize;
        for (k, part) in text.split('*').enumerate() {
            if k > 0 {
                pos += 1; // the '*'
            }
            let piece = part.trim();
            if piece.is_empty() {
                return Err(Error::Syntax { pos, msg: "empty term".into() });
            }
            if piece == "1" {
                pos += part.len();
                continue;
            }
            let (name, exp) = match piece.split_once('^') {
                Some((n, e)) => {
                    let exp: i64 = e.trim().parse().map_err(|_| Error::Syntax {
                        pos,
                        msg: format!("invalid exponent `{e}`"),
                    })?;
                    (n.trim(), exp)
                }
                None => (piece, 1),
            };
            let idx = self
                .alphabet
                .iter()
                .position(|g| g.name == name)
                .ok_or_else(|| Error::UnknownGenerator(name.to_string()))?;
            let l = if exp >= 0 { (idx + 1) as i32 } else { -((idx + 1) as i32) };
            for _ in 0..exp.unsigned_abs() {
                letters.push(l);
            }
            pos += part.len();
        }
        Word::reduce(&letters, self.alphabet.len())
    }

    /// Renders a word with `*` separators and collapsed exponents.
    pub fn word_to_string(&self, w: &Word) -> String {
        if w.is_empty() {
            return "1".to_string();
        }
        let mut parts: Vec<String> = Vec::new();
        let mut i = 0;
        let letters = w.letters();
        while i < letters.len() {
            let l = letters[i];
            let mut run = 1;
            while i + run < letters.len() && letters[i + run] == l {
                run += 1;
            }
            let name = &self.alphabet[l.unsigned_abs() as usize - 1].name;
            let exp = if l > 0 { run as i64 } else { -(run as i64) };
            if exp == 1 {
                parts.push(name.clone());
            } else {
                parts.push(format!("{name}^{exp}"));
            }
            i += run;
        }
        parts.join("*")
    }

    /// Parses the line-oriented presentation format:
    /// ```text
    /// generators: x y
    /// relators: x*y*x^-1*y^-1
    /// class: free-abelian
    /// ```
    pub fn parse(text: &str) -> Result<Presentation> {
        let mut names: Option<Vec<String>> = None;
        let mut relator_texts: Vec<String> = Vec::new();
        let mut class_text: Option<String> = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, rest) = line.split_once(':').ok_or_else(|| Error::Syntax {
                pos: lineno,
                msg: format!("expected `key: value`, got `{line}`"),
            })?;
            match key.trim() {
                "generators" => {
                    names = Some(rest.split_whitespace().map(str::to_string).collect());
                }
                "relators" => {
                    relator_texts = rest.split_whitespace().map(str::to_string).collect();
                }
                "class" => class_text = Some(rest.trim().to_string()),
                other => {
                    return Err(Error::Syntax {
                        pos: lineno,
                        msg: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        let names = names.ok_or_else(|| Error::Syntax {
            pos: 0,
            msg: "missing `generators:` line".into(),
        })?;
        let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
        // parse relators over a free scaffold first, then re-validate under
        // the declared class
        let scaffold = Presentation {
            alphabet: name_refs
                .iter()
                .enumerate()
                .map(|(index, name)| Generator { index, name: name.to_string() })
                .collect(),
            relators: Vec::new(),
            class: StructureClass::Free,
        };
        let relators = relator_texts
            .iter()
            .map(|t| scaffold.parse_word(t))
            .collect::<Result<Vec<_>>>()?;
        let class = match class_text.as_deref() {
            None => {
                if relators.is_empty() {
                    StructureClass::Free
                } else {
                    StructureClass::GenericPresented
                }
            }
            Some("free") => StructureClass::Free,
            Some("free-abelian") => StructureClass::FreeAbelian,
            Some("generic") => StructureClass::GenericPresented,
            Some(s) if s.starts_with("product-of-frees(") && s.ends_with(')') => {
                let inner = &s["product-of-frees(".len()..s.len() - 1];
                let mut blocks = Vec::new();
                for blk in inner.split(';') {
                    let mut idxs = Vec::new();
                    for nm in blk.split(|c: char| c == ',' || c.is_whitespace()) {
                        let nm = nm.trim();
                        if nm.is_empty() {
                            continue;
                        }
                        let idx = names
                            .iter()
                            .position(|n| n == nm)
                            .ok_or_else(|| Error::UnknownGenerator(nm.to_string()))?;
                        idxs.push(idx);
                    }
                    blocks.push(idxs);
                }
                StructureClass::ProductOfFrees(blocks)
            }
            Some(other) => {
                return Err(Error::Syntax {
                    pos: 0,
                    msg: format!("unknown class `{other}`"),
                })
            }
        };
        let p = Presentation { alphabet: scaffold.alphabet, relators, class };
        p.validate()?;
        Ok(p)
    }

    /// Canonical one-line echo of the presentation for reports.
    pub fn display(&self) -> String {
        let gens: Vec<&str> = self.alphabet.iter().map(|g| g.name.as_str()).collect();
        let rels: Vec<String> = self.relators.iter().map(|r| self.word_to_string(r)).collect();
        format!(
            "<{} | {}> [{}]",
            gens.join(" "),
            rels.join(" "),
            self.class
        )
    }
}

fn commutator(i: usize, j: usize) -> Word {
    let a = (i + 1) as i32;
    let b = (j + 1) as i32;
    Word::from_reduced(vec![a, b, -a, -b])
}

/// Recognizes `[g_i, g_j]` up to inversion; returns the generator indices.
fn as_commutator(r: &Word) -> Option<(usize, usize)> {
    let l = r.letters();
    if l.len() != 4 {
        return None;
    }
    if l[0] == -l[2] && l[1] == -l[3] && l[0].abs() != l[1].abs() {
        Some((l[0].unsigned_abs() as usize - 1, l[1].unsigned_abs() as usize - 1))
    } else {
        None
    }
}

/// Reduced words of length `<= n` over the free group on `m` generators,
/// shortlex-ordered. Errors once the ball would exceed `cap`.
pub fn free_ball(m: usize, n: usize, cap: usize) -> Result<Vec<Word>> {
    let mut out = vec![Word::identity()];
    let mut layer: Vec<Word> = vec![Word::identity()];
    let letters_in_rank_order: Vec<i32> = (1..=m as i32).flat_map(|i| [i, -i]).collect();
    for _ in 0..n {
        let mut next = Vec::new();
        for w in &layer {
            let last = w.letters().last().copied();
            for &l in &letters_in_rank_order {
                if last == Some(-l) {
                    continue;
                }
                if out.len() + next.len() >= cap {
                    return Err(Error::ResourceLimit {
                        what: format!("free ball of radius {n} on {m} generators"),
                        limit: cap,
                    });
                }
                let mut letters = w.letters().to_vec();
                letters.push(l);
                next.push(Word::from_reduced(letters));
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn f2() -> Presentation {
        Presentation::free(&["x", "y"])
    }

    #[test]
    fn reduce_examples() {
        let p = f2();
        assert_eq!(Word::reduce(&[1, -1, 2], 2).unwrap().letters(), &[2]);
        assert_eq!(Word::reduce(&[], 2).unwrap(), Word::identity());
        assert_eq!(Word::reduce(&[1, 2, -2, -1], 2).unwrap(), Word::identity());
        assert!(matches!(
            Word::reduce(&[3], 2),
            Err(Error::LetterOutOfRange(3, 2))
        ));
        let _ = p;
    }

    #[test]
    fn multiply_invert_examples() {
        let u = Word::reduce(&[1, 2], 2).unwrap();
        let v = Word::reduce(&[-2], 2).unwrap();
        assert_eq!(u.mul(&v).letters(), &[1]);
        assert_eq!(u.inverse().letters(), &[-2, -1]);
        assert_eq!(u.mul(&u.inverse()), Word::identity());
        assert_eq!(u.inverse().inverse(), u);
    }

    #[test]
    fn parse_presentation_examples() {
        let p = Presentation::parse(
            "generators: x y\nrelators: x*y*x^-1*y^-1\nclass: free-abelian",
        )
        .unwrap();
        assert_eq!(p.alphabet_len(), 2);
        assert_eq!(p.relators().len(), 1);
        assert_eq!(*p.class(), StructureClass::FreeAbelian);

        let free = Presentation::parse("generators: x y\nrelators:\nclass: free").unwrap();
        assert_eq!(*free.class(), StructureClass::Free);
        assert!(free.relators().is_empty());

        let err = Presentation::parse("generators: x\nrelators: x*q");
        assert!(matches!(err, Err(Error::UnknownGenerator(ref n)) if n == "q"));

        let mismatch = Presentation::parse("generators: x y\nrelators: x*y\nclass: free-abelian");
        assert!(matches!(mismatch, Err(Error::ClassMismatch(_))));
    }

    #[test]
    fn parse_product_of_frees() {
        let p = Presentation::parse(
            "generators: x y z w\n\
             relators: x*z*x^-1*z^-1 x*w*x^-1*w^-1 y*z*y^-1*z^-1 y*w*y^-1*w^-1\n\
             class: product-of-frees(x,y;z,w)",
        )
        .unwrap();
        assert_eq!(
            *p.class(),
            StructureClass::ProductOfFrees(vec![vec![0, 1], vec![2, 3]])
        );
        assert_eq!(p, Presentation::product_of_frees(&[&["x", "y"], &["z", "w"]]));
    }

    #[test]
    fn normal_form_examples() {
        let z2 = Presentation::free_abelian(&["x", "y"]);
        let w = z2.parse_word("x*y*x^-1").unwrap();
        assert_eq!(z2.normal_form(&w).unwrap(), NormalForm::Abelian(vec![0, 1]));

        let prod = Presentation::product_of_frees(&[&["x", "y"], &["z", "w"]]);
        let w = prod.parse_word("x*z*y").unwrap();
        let nf = prod.normal_form(&w).unwrap();
        assert_eq!(
            nf,
            NormalForm::Blocks(vec![
                Word::reduce(&[1, 2], 4).unwrap(),
                Word::reduce(&[3], 4).unwrap()
            ])
        );

        let free = f2();
        let xx = free.parse_word("x*x").unwrap();
        assert_eq!(free.normal_form(&xx).unwrap(), NormalForm::Free(xx.clone()));

        // generic classes fall back to the representative word itself
        let gen = Presentation::free_abelian(&["x", "y"]).as_generic();
        let w = gen.parse_word("x*y").unwrap();
        assert_eq!(gen.normal_form(&w).unwrap(), NormalForm::Free(w));
    }

    #[test]
    fn ball_examples_and_formula() {
        let p = f2();
        let b1 = p.ball(1, DEFAULT_BALL_CAP).unwrap();
        let names: Vec<String> = b1.iter().map(|w| p.word_to_string(w)).collect();
        assert_eq!(names, vec!["1", "x", "x^-1", "y", "y^-1"]);
        assert_eq!(p.ball(2, DEFAULT_BALL_CAP).unwrap().len(), 17);
        assert_eq!(free_ball(1, 3, DEFAULT_BALL_CAP).unwrap().len(), 7);

        // |B(m,n)| = 1 + sum_{k=1..n} 2m (2m-1)^(k-1), against enumeration
        for m in 1..=3usize {
            for n in 0..=5usize {
                let expect: usize = 1 + (1..=n)
                    .map(|k| 2 * m * (2 * m - 1).pow(k as u32 - 1))
                    .sum::<usize>();
                assert_eq!(free_ball(m, n, DEFAULT_BALL_CAP).unwrap().len(), expect);
            }
        }
    }

    #[test]
    fn ball_cap_errors() {
        let err = free_ball(2, 10, 100);
        assert!(matches!(err, Err(Error::ResourceLimit { limit: 100, .. })));
    }

    #[test]
    fn shortlex_is_total_and_deterministic() {
        let p = f2();
        let b = p.ball(3, DEFAULT_BALL_CAP).unwrap();
        let mut sorted = b.clone();
        sorted.sort();
        assert_eq!(b, sorted);
        let mut again = sorted.clone();
        again.sort();
        assert_eq!(sorted, again);
        for pair in b.windows(2) {
            assert_eq!(pair[0].shortlex_cmp(&pair[1]), Ordering::Less);
        }
    }

    fn random_raw(rng: &mut impl Rng, m: usize, max_len: usize) -> Vec<i32> {
        let len = rng.gen_range(0..=max_len);
        (0..len)
            .map(|_| {
                let i = rng.gen_range(1..=m as i32);
                if rng.gen_bool(0.5) {
                    i
                } else {
                    -i
                }
            })
            .collect()
    }

    #[test]
    fn normal_form_is_homomorphism() {
        let classes: Vec<Presentation> = vec![
            f2(),
            Presentation::free_abelian(&["x", "y"]),
            Presentation::product_of_frees(&[&["x", "y"], &["z", "w"]]),
        ];
        for p in &classes {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
            for _ in 0..1000 {
                let u = Word::reduce(&random_raw(&mut rng, p.alphabet_len(), 6), p.alphabet_len())
                    .unwrap();
                let v = Word::reduce(&random_raw(&mut rng, p.alphabet_len(), 6), p.alphabet_len())
                    .unwrap();
                let lhs = p.normal_form(&u.mul(&v)).unwrap();
                let rhs = p
                    .normal_form(&u)
                    .unwrap()
                    .mul(&p.normal_form(&v).unwrap())
                    .unwrap();
                assert_eq!(lhs, rhs);
            }
        }
    }

    proptest! {
        #[test]
        fn reduce_idempotent_and_compatible(raw1 in proptest::collection::vec(-3i32..=3, 0..20),
                                            raw2 in proptest::collection::vec(-3i32..=3, 0..20)) {
            let raw1: Vec<i32> = raw1.into_iter().filter(|&l| l != 0).collect();
            let raw2: Vec<i32> = raw2.into_iter().filter(|&l| l != 0).collect();
            let u = Word::reduce(&raw1, 3).unwrap();
            let v = Word::reduce(&raw2, 3).unwrap();
            // idempotent and length-nonincreasing
            prop_assert_eq!(Word::reduce(u.letters(), 3).unwrap(), u.clone());
            prop_assert!(u.len() <= raw1.len());
            // reduce(u . v) = mul(reduce u, reduce v)
            let mut cat = raw1.clone();
            cat.extend_from_slice(&raw2);
            prop_assert_eq!(Word::reduce(&cat, 3).unwrap(), u.mul(&v));
        }
    }
}
