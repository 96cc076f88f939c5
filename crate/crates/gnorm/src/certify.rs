//! Exact-rational certification of numeric SDP solutions.
//!
//! A numeric Gram decomposition is only evidence; the certificate is the
//! exact identity `Λ·e − a*a = Σ blocks + r` in the free group ring,
//! with rational PSD blocks and the residual absorbed into the bound:
//! `‖a‖_u² ≤ Λ + ‖r‖₁`. Certification always succeeds on a near-feasible
//! solve — solver error only degrades the bound, never its validity.

use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{is_psd, ratio_json, rationalize_dyadic, sqrt_upper, to_f64_up};
use crate::presentation::Word;
use crate::ring::RingElement;
use crate::sdp::{solve_sdp, SdpSolution, SdpStatus};
use crate::sos::{assemble_sos_program, BlockLabel, SosProgram};

const CLIP_DELTA: f64 = 1e-9;
const RATIONALIZE_BITS: u32 = 32;

/// One certified Gram block: exactly PSD rational matrix over the basis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertBlock {
    pub label: BlockLabel,
    #[serde(with = "ratio_json::mat")]
    pub gram: Vec<Vec<BigRational>>,
}

/// A self-contained upper-bound certificate for ‖a‖_u.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UpperCertificate {
    pub level: usize,
    pub basis: Vec<Word>,
    pub blocks: Vec<CertBlock>,
    #[serde(with = "ratio_json")]
    pub lambda: BigRational,
    #[serde(with = "ratio_json")]
    pub residual_l1: BigRational,
    /// `lambda + residual_l1`; the exact square of the certified bound.
    #[serde(with = "ratio_json")]
    pub bound_square: BigRational,
    /// Upper-rounded float image of `sqrt(bound_square)`.
    pub bound: f64,
}

/// Expands `Σ_b Σ_{g,h} G_b[g,h] · g⁻¹(1 − r_b)h` exactly in the free
/// cover's group ring.
fn expand_blocks(
    prog: &SosProgram,
    blocks: &[CertBlock],
) -> Result<RingElement> {
    let free = prog.gram_target.presentation().clone();
    let mut sum = RingElement::zero(free.clone());
    for block in blocks {
        for (gi, g) in prog.basis.iter().enumerate() {
            let ginv = g.inverse();
            for (hi, h) in prog.basis.iter().enumerate() {
                let c = &block.gram[gi][hi];
                if c.is_zero() {
                    continue;
                }
                sum.accumulate(free.normal_form(&ginv.mul(h))?, c.clone());
                if let BlockLabel::Relator(r) = &block.label {
                    sum.accumulate(free.normal_form(&ginv.mul(r).mul(h))?, -c.clone());
                }
            }
        }
    }
    Ok(sum)
}

/// Clips the eigenvalues of a numeric Gram block up to `delta` and
/// rationalizes the result into an exactly symmetric matrix.
fn rationalize_block(mat: &DMatrix<f64>, delta: f64) -> Result<Vec<Vec<BigRational>>> {
    let n = mat.nrows();
    let symm = (mat + mat.transpose()) * 0.5;
    let eig = symm.symmetric_eigen();
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        if *v < delta {
            *v = delta;
        }
    }
    let clipped = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    let mut out = vec![vec![BigRational::zero(); n]; n];
    for i in 0..n {
        for j in i..n {
            let v = rationalize_dyadic(0.5 * (clipped[(i, j)] + clipped[(j, i)]), RATIONALIZE_BITS)?;
            out[i][j] = v.clone();
            out[j][i] = v;
        }
    }
    Ok(out)
}

/// Turns a numeric solution of `prog` into an exact certificate. Λ is
/// recomputed so the residual has no identity component, keeping exactly
/// recoverable certificates tight (zero residual means the float bound is
/// the rounded exact root of Λ).
pub fn certify_upper_bound(
    a: &RingElement,
    prog: &SosProgram,
    sol: &SdpSolution,
) -> Result<UpperCertificate> {
    if sol.block_mats.len() != prog.blocks.len() {
        return Err(Error::Certification("block count mismatch".into()));
    }
    let mut delta = CLIP_DELTA;
    let mut blocks = None;
    for _ in 0..3 {
        let cand: Vec<CertBlock> = prog
            .blocks
            .iter()
            .zip(&sol.block_mats)
            .map(|(label, m)| {
                Ok(CertBlock { label: label.clone(), gram: rationalize_block(m, delta)? })
            })
            .collect::<Result<_>>()?;
        if cand.iter().all(|b| is_psd(&b.gram)) {
            blocks = Some(cand);
            break;
        }
        delta *= 10.0;
    }
    let blocks = blocks.ok_or_else(|| {
        Error::Certification("rational PSD verification failed after clipping retries".into())
    })?;

    let free = prog.gram_target.presentation().clone();
    let sum = expand_blocks(prog, &blocks)?;
    let identity_nf = free.identity_normal_form()?;
    let lambda = prog.gram_target.coeff(&identity_nf) + sum.coeff(&identity_nf);
    let residual = RingElement::from_scalar(free.clone(), lambda.clone())?
        .sub(&prog.gram_target)?
        .sub(&sum)?;
    debug_assert!(residual.coeff(&identity_nf).is_zero());
    let residual_l1 = residual.l1_norm();
    let bound_square = &lambda + &residual_l1;
    if bound_square < BigRational::zero() {
        return Err(Error::Certification("negative certified square".into()));
    }
    let bound = to_f64_up(&sqrt_upper(&bound_square));

    let cert = UpperCertificate {
        level: prog.level,
        basis: prog.basis.clone(),
        blocks,
        lambda,
        residual_l1,
        bound_square,
        bound,
    };
    verify_certificate(&cert, a)?;
    Ok(cert)
}

/// Standalone checker: re-verifies PSD-ness and the ring identity from the
/// certificate alone. Sound against a corrupted or adversarial serialized
/// certificate.
pub fn verify_certificate(cert: &UpperCertificate, a: &RingElement) -> Result<()> {
    let dim = cert.basis.len();
    for b in &cert.blocks {
        if b.gram.len() != dim || b.gram.iter().any(|row| row.len() != dim) {
            return Err(Error::Certification("gram dimension mismatch".into()));
        }
        for i in 0..dim {
            for j in 0..dim {
                if b.gram[i][j] != b.gram[j][i] {
                    return Err(Error::Certification("gram not symmetric".into()));
                }
            }
        }
        if !is_psd(&b.gram) {
            return Err(Error::Certification("gram not positive semidefinite".into()));
        }
    }

    // re-derive the residual from scratch and check the arithmetic
    let af = a.lift_free();
    let gram_target = af.gram_square()?;
    let free = gram_target.presentation().clone();
    let mut sum = RingElement::zero(free.clone());
    for block in &cert.blocks {
        for (gi, g) in cert.basis.iter().enumerate() {
            let ginv = g.inverse();
            for (hi, h) in cert.basis.iter().enumerate() {
                let c = &block.gram[gi][hi];
                if c.is_zero() {
                    continue;
                }
                sum.accumulate(free.normal_form(&ginv.mul(h))?, c.clone());
                if let BlockLabel::Relator(r) = &block.label {
                    sum.accumulate(free.normal_form(&ginv.mul(r).mul(h))?, -c.clone());
                }
            }
        }
    }
    let residual = RingElement::from_scalar(free.clone(), cert.lambda.clone())?
        .sub(&gram_target)?
        .sub(&sum)?;
    if residual.l1_norm() != cert.residual_l1 {
        return Err(Error::Certification("residual norm mismatch".into()));
    }
    if cert.bound_square != &cert.lambda + &cert.residual_l1 {
        return Err(Error::Certification("bound square mismatch".into()));
    }
    let bound_rat = BigRational::from_float(cert.bound)
        .ok_or_else(|| Error::Certification("non-finite float bound".into()))?;
    if &bound_rat * &bound_rat < cert.bound_square {
        return Err(Error::Certification("float bound below certified square root".into()));
    }
    // relator labels must be relators (or inverses) of a's presentation
    for b in &cert.blocks {
        if let BlockLabel::Relator(r) = &b.label {
            let ok = a
                .presentation()
                .relators()
                .iter()
                .any(|s| *r == *s || *r == s.inverse());
            if !ok {
                return Err(Error::Certification("unknown relator block".into()));
            }
        }
    }
    Ok(())
}

/// Certified upper bounds at each level, carrying the running minimum:
/// entry i is the best certificate among levels[..=i]. Levels that fail to
/// assemble or solve are skipped; an error is returned only when no level
/// produced a certificate.
pub fn upper_bound_sequence(
    a: &RingElement,
    levels: &[usize],
    tol: f64,
    max_iters: usize,
) -> Result<Vec<UpperCertificate>> {
    let mut out: Vec<UpperCertificate> = Vec::new();
    let mut last_err: Option<Error> = None;
    for &level in levels {
        let attempt = (|| -> Result<UpperCertificate> {
            let prog = assemble_sos_program(a, level)?;
            let sol = solve_sdp(&prog, tol, max_iters)?;
            if sol.status == SdpStatus::NoBoundAtLevel || sol.status == SdpStatus::Infeasible {
                return Err(Error::Sdp(format!("no bound at level {level}")));
            }
            certify_upper_bound(a, &prog, &sol)
        })();
        match attempt {
            Ok(cert) => match out.last() {
                Some(prev) if prev.bound_square <= cert.bound_square => {
                    let mut carry = prev.clone();
                    carry.level = level;
                    out.push(carry);
                }
                _ => out.push(cert),
            },
            Err(e) => last_err = Some(e),
        }
    }
    if out.is_empty() {
        Err(last_err.unwrap_or_else(|| Error::Invalid("no levels requested".into())))
    } else {
        Ok(out)
    }
}
