//! Certified lower bounds on the reduced norm from trace moments and
//! finite-rank compressions.
//!
//! Moments τ((a*a)^n) are computed by exact convolution, never truncated;
//! the 2n-th roots are rounded downward so every reported value is a true
//! lower bound. The compression route assembles the exact matrix of a*a on
//! a ball and certifies a Rayleigh quotient in rational arithmetic.

use nalgebra::{DMatrix, DVector};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::error::Result;
use crate::exact::{
    is_psd, rationalize_dyadic, root_lower, sqrt_lower, to_f64_down, ROOT_PRECISION_BITS,
};
use crate::presentation::NormalForm;
use crate::ring::RingElement;

/// Default cap on the support size of exact powers.
pub const DEFAULT_SUPPORT_CAP: usize = 2_000_000;

/// One exact moment with its certified root.
#[derive(Debug, Clone)]
pub struct MomentEntry {
    pub n: u32,
    /// τ((a*a)^n), exact.
    pub moment: BigRational,
    /// Downward-rounded τ((a*a)^n)^(1/2n); a true lower bound on the norm.
    pub bound_exact: BigRational,
    pub bound: f64,
}

/// The moment ladder for one element.
#[derive(Debug, Clone)]
pub struct MomentSequence {
    pub entries: Vec<MomentEntry>,
    /// Set when the support cap stopped the ladder before `n_max`.
    pub capped: bool,
}

/// Exact moments τ((a*a)^n) for n = 1..=n_max, each with a certified lower
/// bound on the reduced norm. Powers are built incrementally, reusing the
/// previous one; if the support cap is hit, the sequence up to the largest
/// completed n is returned with `capped` set.
pub fn moment_lower_sequence(
    a: &RingElement,
    n_max: u32,
    support_cap: usize,
) -> Result<MomentSequence> {
    let b = a.gram_square()?;
    let mut entries = Vec::new();
    let mut capped = false;
    let mut power = RingElement::one(a.presentation().clone())?;
    for n in 1..=n_max {
        match power.mul_capped(&b, support_cap)? {
            Some(next) => power = next,
            None => {
                capped = true;
                break;
            }
        }
        let moment = power.trace();
        debug_assert!(moment >= BigRational::zero());
        let bound_exact = root_lower(&moment, 2 * n, ROOT_PRECISION_BITS);
        let bound = to_f64_down(&bound_exact);
        entries.push(MomentEntry { n, moment, bound_exact, bound });
    }
    Ok(MomentSequence { entries, capped })
}

/// A certified compression bound: the exact square is a rational Rayleigh
/// quotient of the compression of a*a, so `value <= ||a||_lambda`.
#[derive(Debug, Clone)]
pub struct CompressionBound {
    pub radius: usize,
    pub basis_size: usize,
    pub value: f64,
    /// Exact rational Rayleigh quotient; the bound's source of truth.
    pub exact_square: BigRational,
    /// Floating top eigenvalue estimate (diagnostic only).
    pub float_eigenvalue: f64,
}

/// Compresses a*a to the span of the normal-form ball of the given radius
/// and certifies the square root of a Rayleigh quotient lower estimate of
/// its top eigenvalue.
pub fn compression_lower_bound(
    a: &RingElement,
    radius: usize,
    ball_cap: usize,
) -> Result<CompressionBound> {
    let pres = a.presentation();
    if a.is_zero() {
        return Ok(CompressionBound {
            radius,
            basis_size: 0,
            value: 0.0,
            exact_square: BigRational::zero(),
            float_eigenvalue: 0.0,
        });
    }
    // group ball of this radius = normal forms of the free ball
    let mut basis_set = std::collections::BTreeSet::new();
    for w in pres.ball(radius, ball_cap)? {
        basis_set.insert(pres.normal_form(&w)?);
    }
    let basis: Vec<NormalForm> = basis_set.into_iter().collect();
    let k = basis.len();
    let index: std::collections::BTreeMap<NormalForm, usize> = basis
        .iter()
        .enumerate()
        .map(|(i, b)| (b.clone(), i))
        .collect();
    let c = a.gram_square()?;

    // quadratic form tau(b* (a*a) b) = sum_{g,h} b_g b_h c_{g h^-1}, kept
    // sparse: the matrix entry (i, j) is c_w exactly when b_j = w^-1 b_i,
    // so each basis element contributes at most |supp(a*a)| pairs. Dense
    // storage is hopeless on free groups, where the ball is exponential.
    let mut triples: Vec<(usize, usize, BigRational)> = Vec::new();
    for (i, bi) in basis.iter().enumerate() {
        for (w, v) in c.coeffs() {
            if v.is_zero() {
                continue;
            }
            let bj = w.inverse().mul(bi)?;
            if let Some(&j) = index.get(&bj) {
                triples.push((i, j, v.clone()));
            }
        }
    }
    let float_triples: Vec<(usize, usize, f64)> = triples
        .iter()
        .map(|(i, j, v)| (*i, *j, v.to_f64().unwrap_or(0.0)))
        .collect();
    let matvec = |v: &DVector<f64>| {
        let mut w = DVector::<f64>::zeros(k);
        for &(i, j, f) in &float_triples {
            w[i] += f * v[j];
        }
        w
    };

    let mut vec = DVector::from_element(k, 1.0 / (k as f64).sqrt());
    let mut lambda_float = 0.0f64;
    for _ in 0..200 {
        let w = matvec(&vec);
        let norm = w.norm();
        if norm == 0.0 {
            break;
        }
        let next = w / norm;
        let new_lambda = matvec(&next).dot(&next);
        let done = (new_lambda - lambda_float).abs() <= 1e-12 * new_lambda.abs().max(1.0);
        vec = next;
        lambda_float = new_lambda;
        if done {
            break;
        }
    }

    // snap the iterate to a common dyadic grid and certify its Rayleigh
    // quotient exactly; shared denominators keep the rational sums small
    let mut v_rat: Vec<BigRational> = Vec::with_capacity(k);
    let mut all_zero = true;
    for i in 0..k {
        let r = rationalize_dyadic(vec[i], 32)?;
        if !r.is_zero() {
            all_zero = false;
        }
        v_rat.push(r);
    }
    if all_zero {
        v_rat[0] = BigRational::from_integer(1.into());
    }
    let mut num = BigRational::zero();
    let mut den = BigRational::zero();
    for r in &v_rat {
        if !r.is_zero() {
            den += r * r;
        }
    }
    for (i, j, v) in &triples {
        if v_rat[*i].is_zero() || v_rat[*j].is_zero() {
            continue;
        }
        num += &v_rat[*i] * v * &v_rat[*j];
    }
    let rayleigh = if den.is_zero() { BigRational::zero() } else { num / den };
    // a*a is positive, so the compressed form is PSD and the quotient is
    // nonnegative; clamp against rounding pathologies anyway
    let rayleigh = if rayleigh < BigRational::zero() { BigRational::zero() } else { rayleigh };
    let value = to_f64_down(&sqrt_lower(&rayleigh));
    Ok(CompressionBound {
        radius,
        basis_size: k,
        value,
        exact_square: rayleigh,
        float_eigenvalue: lambda_float,
    })
}

/// Plain power iteration for a symmetric PSD matrix; returns the Rayleigh
/// estimate and the final unit iterate. Deterministic start vector.
pub fn symmetric_power_iteration(
    m: &DMatrix<f64>,
    max_iters: usize,
    rel_tol: f64,
) -> (f64, DVector<f64>) {
    let k = m.nrows();
    if k == 0 {
        return (0.0, DVector::zeros(0));
    }
    let mut v = DVector::from_element(k, 1.0 / (k as f64).sqrt());
    let mut lambda = 0.0f64;
    for _ in 0..max_iters {
        let w = m * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return (0.0, v);
        }
        let next = w / norm;
        let new_lambda = (m * &next).dot(&next);
        let done = (new_lambda - lambda).abs() <= rel_tol * new_lambda.abs().max(1.0);
        v = next;
        lambda = new_lambda;
        if done {
            break;
        }
    }
    (lambda, v)
}

/// Exact PSD check of the compressed matrix; exposed for tests of the
/// faithfulness route.
pub fn compression_matrix_is_psd(a: &RingElement, radius: usize, cap: usize) -> Result<bool> {
    let pres = a.presentation();
    let mut basis_set = std::collections::BTreeSet::new();
    for w in pres.ball(radius, cap)? {
        basis_set.insert(pres.normal_form(&w)?);
    }
    let basis: Vec<NormalForm> = basis_set.into_iter().collect();
    let c = a.gram_square()?;
    let k = basis.len();
    let mut exact = vec![vec![BigRational::zero(); k]; k];
    for i in 0..k {
        for j in 0..k {
            exact[i][j] = c.coeff(&basis[i].mul(&basis[j].inverse())?);
        }
    }
    Ok(is_psd(&exact))
}
