//! Assembly of the level-n quadratic-module programs.
//!
//! The primal asks for Λ and PSD Gram blocks with
//! `Λ·e − a*a = Σ_b Σ_{g,h} C_b[g,h] (g⁻¹h − g⁻¹ r_b h)` as an identity of
//! the free group ring — never reduced by the relations. The dual is the
//! moment form: maximize φ(a*a) over unital functionals that are
//! nonnegative on every block form. Everything here is exact; floats only
//! appear when a candidate functional is screened numerically.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::presentation::{free_ball, Word, DEFAULT_BALL_CAP};
use crate::ring::RingElement;

/// What a Gram block multiplies: `1` for the plain sum-of-squares block,
/// `1 − r` for a relator block.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BlockLabel {
    Sos,
    Relator(Word),
}

/// One integer entry of a constraint row: coefficient `coeff` on the
/// `(g, h)` position of block `block`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Entry {
    pub block: usize,
    pub g: usize,
    pub h: usize,
    pub coeff: i64,
}

/// The linear constraint attached to one reduced word `w`:
/// `Λ·[w = e] − target = Σ entries · C`.
#[derive(Debug, Clone)]
pub struct Row {
    pub word: Word,
    pub target: BigRational,
    pub entries: Vec<Entry>,
}

/// The assembled level-n program. `rows` are in shortlex order, so the
/// identity row (the one carrying Λ) is always row 0. `gram_target` is
/// `a*a` computed in the free cover.
#[derive(Debug, Clone)]
pub struct SosProgram {
    pub level: usize,
    pub basis: Vec<Word>,
    pub blocks: Vec<BlockLabel>,
    pub rows: Vec<Row>,
    pub gram_target: RingElement,
}

impl SosProgram {
    pub fn block_dim(&self) -> usize {
        self.basis.len()
    }

    /// Coefficient of the reduced word `w` in `a*a` (free-ring arithmetic).
    pub fn target_coeff(&self, w: &Word) -> BigRational {
        self.gram_target
            .coeffs()
            .iter()
            .find(|(nf, _)| nf.canonical_word() == *w)
            .map(|(_, c)| c.clone())
            .unwrap_or_else(BigRational::zero)
    }
}

pub fn assemble_sos_program(a: &RingElement, level: usize) -> Result<SosProgram> {
    let radius = a.radius();
    if level < radius {
        return Err(Error::LevelTooSmall { level, radius });
    }
    let p = a.presentation();
    let af = a.lift_free();
    let gram_target = af.gram_square()?;

    let basis = free_ball(p.alphabet_len(), level, DEFAULT_BALL_CAP)?;
    let mut blocks = vec![BlockLabel::Sos];
    for r in p.relators() {
        for cand in [r.clone(), r.inverse()] {
            if cand.is_identity() {
                continue;
            }
            if !blocks.contains(&BlockLabel::Relator(cand.clone())) {
                blocks.push(BlockLabel::Relator(cand));
            }
        }
    }

    let mut rows: BTreeMap<Word, Vec<Entry>> = BTreeMap::new();
    for (nf, _) in gram_target.coeffs() {
        rows.entry(nf.canonical_word()).or_default();
    }
    for (b, label) in blocks.iter().enumerate() {
        for (gi, g) in basis.iter().enumerate() {
            let ginv = g.inverse();
            for (hi, h) in basis.iter().enumerate() {
                rows.entry(ginv.mul(h)).or_default().push(Entry {
                    block: b,
                    g: gi,
                    h: hi,
                    coeff: 1,
                });
                if let BlockLabel::Relator(r) = label {
                    rows.entry(ginv.mul(r).mul(h)).or_default().push(Entry {
                        block: b,
                        g: gi,
                        h: hi,
                        coeff: -1,
                    });
                }
            }
        }
    }

    let target_of = |w: &Word| -> BigRational {
        gram_target
            .coeffs()
            .iter()
            .find(|(nf, _)| nf.canonical_word() == *w)
            .map(|(_, c)| c.clone())
            .unwrap_or_else(BigRational::zero)
    };
    let rows = rows
        .into_iter()
        .map(|(word, entries)| {
            let target = target_of(&word);
            Row { word, target, entries }
        })
        .collect();

    Ok(SosProgram { level, basis, blocks, rows, gram_target })
}

/// The moment form of the same level: a functional on words, constrained
/// to be unital and nonnegative on each block form, with objective
/// `φ(a*a)`.
#[derive(Debug, Clone)]
pub struct MomentProgram {
    pub program: SosProgram,
}

pub fn assemble_dual_program(a: &RingElement, level: usize) -> Result<MomentProgram> {
    Ok(MomentProgram { program: assemble_sos_program(a, level)? })
}

impl MomentProgram {
    /// The localized moment matrix of block `b` under `phi`:
    /// `M[g,h] = φ(red(g⁻¹h)) − φ(red(g⁻¹ r h))`, symmetrized.
    pub fn moment_matrix(&self, b: usize, phi: &impl Fn(&Word) -> f64) -> DMatrix<f64> {
        let prog = &self.program;
        let dim = prog.block_dim();
        let mut m = DMatrix::zeros(dim, dim);
        for (gi, g) in prog.basis.iter().enumerate() {
            let ginv = g.inverse();
            for (hi, h) in prog.basis.iter().enumerate() {
                let mut v = phi(&ginv.mul(h));
                if let BlockLabel::Relator(r) = &prog.blocks[b] {
                    v -= phi(&ginv.mul(r).mul(h));
                }
                m[(gi, hi)] = v;
            }
        }
        let mt = m.transpose();
        (m + mt) * 0.5
    }

    /// Screens `phi` for feasibility (unitality, block positivity within
    /// `tol`) and returns its objective value `φ(a*a)`.
    pub fn evaluate_functional(&self, phi: impl Fn(&Word) -> f64, tol: f64) -> Result<f64> {
        if (phi(&Word::identity()) - 1.0).abs() > tol {
            return Err(Error::Invalid("functional is not unital".into()));
        }
        for b in 0..self.program.blocks.len() {
            let m = self.moment_matrix(b, &phi);
            let eigs = m.symmetric_eigenvalues();
            let min = eigs.iter().fold(f64::INFINITY, |a, &x| a.min(x));
            if min < -tol {
                return Err(Error::Invalid(format!(
                    "functional violates block {b} positivity: min eigenvalue {min:.3e}"
                )));
            }
        }
        let mut obj = 0.0;
        for (nf, c) in self.program.gram_target.coeffs() {
            obj += c.to_f64().unwrap_or(f64::NAN) * phi(&nf.canonical_word());
        }
        Ok(obj)
    }
}

/// The trace functional `φ(w) = [w = e]`, feasible at every level.
pub fn trace_functional() -> impl Fn(&Word) -> f64 {
    |w: &Word| if w.is_identity() { 1.0 } else { 0.0 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;
    use crate::presentation::Presentation;
    use std::sync::Arc;

    fn elem(p: &Arc<Presentation>, text: &str) -> RingElement {
        RingElement::parse(text, p.clone()).unwrap()
    }

    #[test]
    fn integer_group_one_plus_x_level_one() {
        let p = Arc::new(Presentation::free(&["x"]));
        let prog = assemble_sos_program(&elem(&p, "1 + x"), 1).unwrap();
        assert_eq!(prog.blocks, vec![BlockLabel::Sos]);
        assert_eq!(prog.block_dim(), 3);
        assert_eq!(prog.rows.len(), 5);
        let words: Vec<String> = prog.rows.iter().map(|r| p.word_to_string(&r.word)).collect();
        assert_eq!(words, vec!["1", "x", "x^-1", "x^2", "x^-2"]);
        assert_eq!(prog.rows[0].target, BigRational::from_integer(2.into()));
        assert_eq!(prog.rows[1].target, BigRational::one());
    }

    #[test]
    fn free_group_level_one_single_block() {
        let p = Arc::new(Presentation::free(&["x", "y"]));
        let prog = assemble_sos_program(&elem(&p, "x + y"), 1).unwrap();
        assert_eq!(prog.blocks.len(), 1);
        assert_eq!(prog.block_dim(), 5);
    }

    #[test]
    fn commutator_relator_gives_three_blocks() {
        let p = Arc::new(
            Presentation::parse("generators: x y\nrelators: x*y*x^-1*y^-1\nclass: generic")
                .unwrap(),
        );
        let prog = assemble_sos_program(&elem(&p, "x + y"), 1).unwrap();
        assert_eq!(prog.blocks.len(), 3);
        assert!(prog.blocks.iter().all(|b| match b {
            BlockLabel::Sos => true,
            BlockLabel::Relator(r) => r.len() == 4,
        }));
        assert_eq!(prog.block_dim(), 5);
    }

    #[test]
    fn level_below_radius_is_rejected() {
        let p = Arc::new(Presentation::free(&["x"]));
        let err = assemble_sos_program(&elem(&p, "x^2"), 1).unwrap_err();
        assert!(matches!(err, Error::LevelTooSmall { level: 1, radius: 2 }));
    }

    #[test]
    fn identity_row_is_first_and_carries_full_support() {
        let p = Arc::new(Presentation::free(&["x", "y"]));
        let prog = assemble_sos_program(&elem(&p, "x + x^-1 + y + y^-1"), 2).unwrap();
        assert!(prog.rows[0].word.is_identity());
        for (nf, _) in prog.gram_target.coeffs() {
            let w = nf.canonical_word();
            assert!(prog.rows.iter().any(|r| r.word == w));
        }
    }

    #[test]
    fn trace_functional_is_feasible_with_trace_objective() {
        let p = Arc::new(Presentation::free_abelian(&["x", "y"]));
        let a = elem(&p, "x + x^-1 + y + y^-1");
        let dual = assemble_dual_program(&a, 2).unwrap();
        let obj = dual.evaluate_functional(trace_functional(), 1e-9).unwrap();
        let tau = a.gram_square().unwrap().trace();
        assert!((obj - tau.to_f64().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn non_unital_functional_is_rejected() {
        let p = Arc::new(Presentation::free(&["x"]));
        let dual = assemble_dual_program(&elem(&p, "1 + x"), 1).unwrap();
        let err = dual.evaluate_functional(|_| 0.5, 1e-9).unwrap_err();
        assert!(matches!(err, Error::Invalid(_)));
    }
}
