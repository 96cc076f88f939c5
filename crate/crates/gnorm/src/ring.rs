//! Exact sparse arithmetic in the rational group ring of a presented group.
//!
//! Coefficients are arbitrary-precision rationals throughout; floating point
//! only appears in [`RingElement::evaluate`]. Elements are keyed by
//! [`NormalForm`] in a `BTreeMap`, so iteration order is shortlex and all
//! output is deterministic.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::presentation::{NormalForm, Presentation, StructureClass, Word};

/// Sparse element of QΓ under the presentation's normal-form class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingElement {
    pres: Arc<Presentation>,
    coeffs: BTreeMap<NormalForm, BigRational>,
}

/// One square complex matrix per generator; the target of [`RingElement::evaluate`].
#[derive(Debug, Clone)]
pub struct MatrixAssignment {
    pub dim: usize,
    pub mats: Vec<DMatrix<Complex64>>,
}

impl MatrixAssignment {
    pub fn new(mats: Vec<DMatrix<Complex64>>) -> Result<Self> {
        let dim = mats.first().map(|m| m.nrows()).unwrap_or(0);
        for m in &mats {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: m.nrows() });
            }
        }
        Ok(MatrixAssignment { dim, mats })
    }
}

impl RingElement {
    pub fn zero(pres: Arc<Presentation>) -> Self {
        RingElement { pres, coeffs: BTreeMap::new() }
    }

    pub fn one(pres: Arc<Presentation>) -> Result<Self> {
        Self::from_scalar(pres, BigRational::one())
    }

    pub fn from_scalar(pres: Arc<Presentation>, c: BigRational) -> Result<Self> {
        let mut coeffs = BTreeMap::new();
        if !c.is_zero() {
            coeffs.insert(pres.identity_normal_form()?, c);
        }
        Ok(RingElement { pres, coeffs })
    }

    /// Single term `c * w`.
    pub fn term(pres: Arc<Presentation>, w: &Word, c: BigRational) -> Result<Self> {
        let mut coeffs = BTreeMap::new();
        if !c.is_zero() {
            coeffs.insert(pres.normal_form(w)?, c);
        }
        Ok(RingElement { pres, coeffs })
    }

    pub fn presentation(&self) -> &Arc<Presentation> {
        &self.pres
    }

    pub fn coeffs(&self) -> &BTreeMap<NormalForm, BigRational> {
        &self.coeffs
    }

    pub fn coeff(&self, key: &NormalForm) -> BigRational {
        self.coeffs.get(key).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn support_size(&self) -> usize {
        self.coeffs.len()
    }

    /// Longest canonical word in the support.
    pub fn radius(&self) -> usize {
        self.coeffs.keys().map(NormalForm::length).max().unwrap_or(0)
    }

    fn insert(&mut self, key: NormalForm, c: BigRational) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.coeffs.entry(key) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    /// In-place `self += c·key`; the building block for accumulation loops
    /// that would otherwise clone the whole element per term.
    pub fn accumulate(&mut self, key: NormalForm, c: BigRational) {
        self.insert(key, c);
    }

    fn check_same(&self, other: &RingElement) -> Result<()> {
        if self.pres != other.pres {
            return Err(Error::AlphabetMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &RingElement) -> Result<RingElement> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (k, c) in &other.coeffs {
            out.insert(k.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &RingElement) -> Result<RingElement> {
        self.check_same(other)?;
        let mut out = self.clone();
        for (k, c) in &other.coeffs {
            out.insert(k.clone(), -c.clone());
        }
        Ok(out)
    }

    pub fn scale(&self, c: &BigRational) -> RingElement {
        if c.is_zero() {
            return RingElement::zero(self.pres.clone());
        }
        RingElement {
            pres: self.pres.clone(),
            coeffs: self.coeffs.iter().map(|(k, v)| (k.clone(), v * c)).collect(),
        }
    }

    /// Exact convolution; requires a class with normal forms.
    pub fn mul(&self, other: &RingElement) -> Result<RingElement> {
        self.check_same(other)?;
        if *self.pres.class() == StructureClass::GenericPresented {
            return Err(Error::UnsupportedClass("multiply", "generic".into()));
        }
        let mut out = RingElement::zero(self.pres.clone());
        for (ka, ca) in &self.coeffs {
            for (kb, cb) in &other.coeffs {
                out.insert(ka.mul(kb)?, ca * cb);
            }
        }
        Ok(out)
    }

    /// Like [`RingElement::mul`], but aborts with `None` as soon as the
    /// product's support exceeds `cap`, bounding peak memory.
    pub fn mul_capped(&self, other: &RingElement, cap: usize) -> Result<Option<RingElement>> {
        self.check_same(other)?;
        if *self.pres.class() == StructureClass::GenericPresented {
            return Err(Error::UnsupportedClass("multiply", "generic".into()));
        }
        let mut out = RingElement::zero(self.pres.clone());
        for (ka, ca) in &self.coeffs {
            for (kb, cb) in &other.coeffs {
                out.insert(ka.mul(kb)?, ca * cb);
                if out.coeffs.len() > cap {
                    return Ok(None);
                }
            }
        }
        Ok(Some(out))
    }

    /// Involution: coefficient of g in a* is the coefficient of g^-1 in a
    /// (coefficients are rational, so no conjugation).
    pub fn star(&self) -> RingElement {
        RingElement {
            pres: self.pres.clone(),
            coeffs: self
                .coeffs
                .iter()
                .map(|(k, c)| (k.inverse(), c.clone()))
                .collect(),
        }
    }

    pub fn is_self_adjoint(&self) -> bool {
        self.star() == *self
    }

    /// τ(a): the coefficient of the identity.
    pub fn trace(&self) -> BigRational {
        self.coeffs
            .iter()
            .find(|(k, _)| k.is_identity())
            .map(|(_, c)| c.clone())
            .unwrap_or_else(BigRational::zero)
    }

    /// ℓ¹-norm: sum of absolute coefficient values.
    pub fn l1_norm(&self) -> BigRational {
        self.coeffs.values().map(Signed::abs).sum()
    }

    /// a* a.
    pub fn gram_square(&self) -> Result<RingElement> {
        self.star().mul(self)
    }

    /// Lift into the free group ring on the same alphabet via canonical
    /// words. SOS certificates are identities in ℂF_A and use this lift.
    pub fn lift_free(&self) -> RingElement {
        let free = Arc::new(self.pres.free_cover());
        let coeffs = self
            .coeffs
            .iter()
            .map(|(k, c)| (NormalForm::Free(k.canonical_word()), c.clone()))
            .collect();
        RingElement { pres: free, coeffs }
    }

    /// Ring homomorphism image under a matrix assignment. Inverse letters
    /// use matrix inverses; the assignment must be invertible where needed.
    pub fn evaluate(&self, m: &MatrixAssignment) -> Result<DMatrix<Complex64>> {
        if m.mats.len() != self.pres.alphabet_len() {
            return Err(Error::DimensionMismatch {
                expected: self.pres.alphabet_len(),
                got: m.mats.len(),
            });
        }
        let k = m.dim;
        let mut inverses: Vec<Option<DMatrix<Complex64>>> = vec![None; m.mats.len()];
        let mut out = DMatrix::<Complex64>::zeros(k, k);
        for (key, c) in &self.coeffs {
            let w = key.canonical_word();
            let mut acc = DMatrix::<Complex64>::identity(k, k);
            for &l in w.letters() {
                let i = l.unsigned_abs() as usize - 1;
                let factor = if l > 0 {
                    m.mats[i].clone()
                } else {
                    if inverses[i].is_none() {
                        let inv = m.mats[i].clone().try_inverse().ok_or_else(|| {
                            Error::SingularMatrix(self.pres.alphabet()[i].name.clone())
                        })?;
                        inverses[i] = Some(inv);
                    }
                    inverses[i].clone().unwrap()
                };
                acc *= factor;
            }
            let cf = Complex64::new(c.to_f64().unwrap_or(f64::NAN), 0.0);
            out += acc * cf;
        }
        Ok(out)
    }

    /// Parses the element grammar: signed terms of `coeff ['*'] word`.
    ///
    /// Examples: `2 + x*y^-1 - 3*y^2`, `x + x^-1 + y + y^-1`, `1/2*x - 1`.
    pub fn parse(text: &str, pres: Arc<Presentation>) -> Result<RingElement> {
        let mut out = RingElement::zero(pres.clone());
        for (sign, term, pos) in split_terms(text)? {
            let term = term.trim();
            if term.is_empty() {
                return Err(Error::Syntax { pos, msg: "empty term".into() });
            }
            // peel a leading rational coefficient, if present
            let mut factors: Vec<&str> = term.split('*').map(str::trim).collect();
            let mut coeff = BigRational::one();
            let mut consumed = 0;
            while consumed < factors.len() {
                let f = factors[consumed];
                if let Some(c) = parse_rational(f) {
                    coeff *= c;
                    consumed += 1;
                } else {
                    break;
                }
            }
            factors.drain(..consumed);
            let word = if factors.is_empty() {
                Word::identity()
            } else {
                pres.parse_word(&factors.join("*"))?
            };
            if sign < 0 {
                coeff = -coeff;
            }
            let t = RingElement::term(pres.clone(), &word, coeff)?;
            out = out.add(&t)?;
        }
        Ok(out)
    }

    /// Canonical printing: terms in shortlex order with explicit signs.
    pub fn display(&self) -> String {
        if self.coeffs.is_empty() {
            return "0".into();
        }
        let mut s = String::new();
        for (i, (k, c)) in self.coeffs.iter().enumerate() {
            let neg = c.is_negative();
            let mag = c.abs();
            if i == 0 {
                if neg {
                    s.push_str("- ");
                }
            } else {
                s.push_str(if neg { " - " } else { " + " });
            }
            let w = k.canonical_word();
            if w.is_identity() {
                s.push_str(&format!("{mag}"));
            } else if mag.is_one() {
                s.push_str(&self.pres.word_to_string(&w));
            } else {
                s.push_str(&format!("{mag}*{}", self.pres.word_to_string(&w)));
            }
        }
        s
    }
}

impl fmt::Display for RingElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display())
    }
}

/// Splits on top-level `+`/`-`, keeping signs; `^-1` minus signs are part of
/// exponents and must not split.
fn split_terms(text: &str) -> Result<Vec<(i32, String, usize)>> {
    let mut terms = Vec::new();
    let mut current = String::new();
    let mut sign = 1i32;
    let mut start = 0usize;
    let mut prev_non_ws: Option<char> = None;
    for (pos, ch) in text.char_indices() {
        match ch {
            '+' | '-' if prev_non_ws != Some('^') => {
                if current.trim().is_empty() && ch == '-' && prev_non_ws.is_none() {
                    sign = -sign; // leading minus
                } else if current.trim().is_empty() && prev_non_ws.is_none() {
                    // leading plus, ignore
                } else {
                    terms.push((sign, std::mem::take(&mut current), start));
                    sign = if ch == '-' { -1 } else { 1 };
                    start = pos + 1;
                }
                prev_non_ws = Some(ch);
            }
            _ => {
                current.push(ch);
                if !ch.is_whitespace() {
                    prev_non_ws = Some(ch);
                }
            }
        }
    }
    if current.trim().is_empty() {
        return Err(Error::Syntax { pos: start, msg: "trailing operator or empty expression".into() });
    }
    terms.push((sign, current, start));
    Ok(terms)
}

/// `12`, `-3`, `3/4` — but not a generator name, and not `1` followed by `*`
/// handled upstream. Returns `None` if the token is not a pure number.
fn parse_rational(tok: &str) -> Option<BigRational> {
    if tok.is_empty() || !tok.chars().next().unwrap().is_ascii_digit() {
        return None;
    }
    if let Some((n, d)) = tok.split_once('/') {
        let num: num_bigint::BigInt = n.trim().parse().ok()?;
        let den: num_bigint::BigInt = d.trim().parse().ok()?;
        if den.is_zero() {
            return None;
        }
        Some(BigRational::new(num, den))
    } else {
        let num: num_bigint::BigInt = tok.parse().ok()?;
        Some(BigRational::from_integer(num))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presentation::Presentation;
    use rand::{Rng, SeedableRng};

    fn rat(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    fn f2() -> Arc<Presentation> {
        Arc::new(Presentation::free(&["x", "y"]))
    }

    fn z1() -> Arc<Presentation> {
        Arc::new(Presentation::free(&["x"]))
    }

    #[test]
    fn parse_element_examples() {
        let p = f2();
        let a = RingElement::parse("2 + x*y^-1 - 3*y^2", p.clone()).unwrap();
        assert_eq!(a.support_size(), 3);
        assert_eq!(a.trace(), rat(2));

        let s = RingElement::parse("x + x^-1 + y + y^-1", p.clone()).unwrap();
        assert_eq!(s.support_size(), 4);
        assert_eq!(s.star(), s);

        let one = RingElement::parse("x*x^-1", p.clone()).unwrap();
        assert_eq!(one, RingElement::one(p.clone()).unwrap());

        let frac = RingElement::parse("1/2*x - 1", p.clone()).unwrap();
        assert_eq!(frac.l1_norm(), BigRational::new(3.into(), 2.into()));

        assert!(RingElement::parse("x*q", p.clone()).is_err());
        assert!(RingElement::parse("x + ", p).is_err());
    }

    #[test]
    fn multiply_examples() {
        let z = z1();
        let a = RingElement::parse("1 + x", z.clone()).unwrap();
        let b = RingElement::parse("1 + x^-1", z.clone()).unwrap();
        let prod = a.mul(&b).unwrap();
        assert_eq!(prod, RingElement::parse("2 + x + x^-1", z.clone()).unwrap());

        let p = f2();
        let c = RingElement::parse("x + y", p.clone()).unwrap();
        let d = RingElement::parse("x^-1", p.clone()).unwrap();
        assert_eq!(
            c.mul(&d).unwrap(),
            RingElement::parse("1 + y*x^-1", p.clone()).unwrap()
        );

        let one = RingElement::one(p.clone()).unwrap();
        assert_eq!(c.mul(&one).unwrap(), c);
    }

    #[test]
    fn multiply_generic_unsupported() {
        let g = Arc::new(
            Presentation::parse("generators: x y\nrelators: x*y*x^-1*y^-1\nclass: generic")
                .unwrap(),
        );
        let a = RingElement::from_scalar(g.clone(), rat(1));
        assert!(a.is_err() || a.unwrap().mul(&RingElement::zero(g)).is_err());
    }

    #[test]
    fn star_examples() {
        let p = f2();
        let a = RingElement::parse("2*x + 3*y", p.clone()).unwrap();
        assert_eq!(
            a.star(),
            RingElement::parse("2*x^-1 + 3*y^-1", p.clone()).unwrap()
        );
        assert_eq!(a.star().star(), a);
    }

    #[test]
    fn trace_examples() {
        let p = f2();
        assert_eq!(RingElement::parse("2 + 3*x", p.clone()).unwrap().trace(), rat(2));
        assert_eq!(RingElement::parse("x", p.clone()).unwrap().trace(), rat(0));
        let z = z1();
        let a = RingElement::parse("1 + x", z).unwrap();
        assert_eq!(a.gram_square().unwrap().trace(), rat(2));
    }

    #[test]
    fn l1_examples() {
        let p = f2();
        assert_eq!(RingElement::parse("1 - x", p.clone()).unwrap().l1_norm(), rat(2));
        assert_eq!(
            RingElement::parse("x + x^-1 + y + y^-1", p.clone()).unwrap().l1_norm(),
            rat(4)
        );
        assert_eq!(RingElement::zero(p).l1_norm(), rat(0));
    }

    #[test]
    fn evaluate_examples() {
        let z = z1();
        let a = RingElement::parse("x + x^-1", z.clone()).unwrap();
        let flip = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]).map(|v| Complex64::new(v, 0.0));
        let m = MatrixAssignment::new(vec![flip]).unwrap();
        let img = a.evaluate(&m).unwrap();
        assert!((img[(0, 1)].re - 2.0).abs() < 1e-12);
        assert!((img[(0, 0)].norm()) < 1e-12);

        let one = RingElement::one(z.clone()).unwrap();
        let id = one.evaluate(&m).unwrap();
        assert!((id[(0, 0)].re - 1.0).abs() < 1e-12 && id[(0, 1)].norm() < 1e-12);

        let sing = MatrixAssignment::new(vec![DMatrix::zeros(2, 2)]).unwrap();
        assert!(a.evaluate(&sing).is_err());
    }

    fn random_elem(rng: &mut impl Rng, p: &Arc<Presentation>, support: usize) -> RingElement {
        let mut out = RingElement::zero(p.clone());
        for _ in 0..support {
            let len = rng.gen_range(0..=3usize);
            let raw: Vec<i32> = (0..len)
                .map(|_| {
                    let i = rng.gen_range(1..=p.alphabet_len() as i32);
                    if rng.gen_bool(0.5) {
                        i
                    } else {
                        -i
                    }
                })
                .collect();
            let w = Word::reduce(&raw, p.alphabet_len()).unwrap();
            let c = rat(rng.gen_range(-3i64..=3));
            out = out.add(&RingElement::term(p.clone(), &w, c).unwrap()).unwrap();
        }
        out
    }

    #[test]
    fn traciality_and_faithfulness() {
        let pres: Vec<Arc<Presentation>> = vec![
            f2(),
            Arc::new(Presentation::product_of_frees(&[&["x", "y"], &["z", "w"]])),
        ];
        for p in &pres {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
            for _ in 0..500 {
                let a = random_elem(&mut rng, p, 4);
                let b = random_elem(&mut rng, p, 4);
                assert_eq!(a.mul(&b).unwrap().trace(), b.mul(&a).unwrap().trace());
                let aa = a.gram_square().unwrap();
                assert!(!aa.trace().is_negative());
                assert_eq!(aa.trace().is_zero(), a.is_zero());
            }
        }
    }

    #[test]
    fn l1_submultiplicative_and_star_isometric() {
        let p = f2();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let a = random_elem(&mut rng, &p, 4);
            let b = random_elem(&mut rng, &p, 4);
            assert!(a.mul(&b).unwrap().l1_norm() <= a.l1_norm() * b.l1_norm());
            assert_eq!(a.star().l1_norm(), a.l1_norm());
            // (ab)* = b* a*
            assert_eq!(a.mul(&b).unwrap().star(), b.star().mul(&a.star()).unwrap());
        }
    }

    #[test]
    fn evaluate_is_homomorphism_and_respects_star() {
        let p = f2();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        // a fixed pair of 2x2 unitaries (permutation + phase)
        let u1 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]).map(|v| Complex64::new(v, 0.0));
        let u2 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::from_polar(1.0, 0.7),
            Complex64::from_polar(1.0, -1.3),
        ]));
        let m = MatrixAssignment::new(vec![u1, u2]).unwrap();
        for _ in 0..50 {
            let a = random_elem(&mut rng, &p, 3);
            let b = random_elem(&mut rng, &p, 3);
            let lhs = a.mul(&b).unwrap().evaluate(&m).unwrap();
            let rhs = a.evaluate(&m).unwrap() * b.evaluate(&m).unwrap();
            assert!((lhs - rhs).norm() < 1e-10);
            let st = a.star().evaluate(&m).unwrap();
            let adj = a.evaluate(&m).unwrap().adjoint();
            assert!((st - adj).norm() < 1e-10);
        }
    }

    #[test]
    fn display_round_trips() {
        let p = f2();
        let a = RingElement::parse("2 + x*y^-1 - 3*y^2", p.clone()).unwrap();
        let shown = a.display();
        let re = RingElement::parse(&shown, p).unwrap();
        assert_eq!(a, re);
    }
}
