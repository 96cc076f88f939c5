//! Exact rational helpers: directed-rounding roots, float rationalization,
//! and rational positive-semidefiniteness checks.
//!
//! Everything certified in this crate bottoms out here: lower bounds round
//! down, upper bounds round up, and PSD verification runs in exact arithmetic.

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Bits of fixed-point precision used when extracting roots.
pub const ROOT_PRECISION_BITS: u64 = 64;

/// Floor of the `k`-th root of a nonnegative rational, at `prec` bits.
///
/// The result is exactly representable and satisfies `result^k <= x`.
pub fn root_lower(x: &BigRational, k: u32, prec: u64) -> BigRational {
    assert!(k >= 1);
    assert!(!x.is_negative(), "root of a negative rational");
    if x.is_zero() {
        return BigRational::zero();
    }
    let p = x.numer();
    let q = x.denom();
    // (p/q)^(1/k) = (p * q^(k-1))^(1/k) / q; scale by 2^(prec*k) first.
    let scaled = p * q.pow(k - 1) << (prec * k as u64);
    let t = scaled.nth_root(k);
    BigRational::new(t, q * (BigInt::one() << prec))
}

/// Ceiling counterpart of [`root_lower`]: `result^k >= x`.
pub fn root_upper(x: &BigRational, k: u32, prec: u64) -> BigRational {
    assert!(k >= 1);
    assert!(!x.is_negative(), "root of a negative rational");
    if x.is_zero() {
        return BigRational::zero();
    }
    let p = x.numer();
    let q = x.denom();
    let scaled = p * q.pow(k - 1) << (prec * k as u64);
    let t = scaled.nth_root(k);
    let exact = t.pow(k) == scaled;
    let t = if exact { t } else { t + BigInt::one() };
    BigRational::new(t, q * (BigInt::one() << prec))
}

pub fn sqrt_lower(x: &BigRational) -> BigRational {
    root_lower(x, 2, ROOT_PRECISION_BITS)
}

pub fn sqrt_upper(x: &BigRational) -> BigRational {
    root_upper(x, 2, ROOT_PRECISION_BITS)
}

/// Largest f64 that is `<=` the given rational.
pub fn to_f64_down(x: &BigRational) -> f64 {
    let mut f = x.to_f64().unwrap_or(f64::MAX);
    if !f.is_finite() {
        return f64::MAX;
    }
    // to_f64 rounds to nearest; nudge until the float is a true lower value.
    while BigRational::from_float(f).map(|r| r > *x).unwrap_or(false) {
        f = f.next_down();
    }
    f
}

/// Smallest f64 that is `>=` the given rational.
pub fn to_f64_up(x: &BigRational) -> f64 {
    let mut f = x.to_f64().unwrap_or(f64::MAX);
    if !f.is_finite() {
        return f64::MAX;
    }
    while BigRational::from_float(f).map(|r| r < *x).unwrap_or(false) {
        f = f.next_up();
    }
    f
}

/// Best rational approximation to `x` with denominator at most `max_den`,
/// by continued-fraction convergents.
pub fn rationalize(x: f64, max_den: u64) -> Result<BigRational> {
    if !x.is_finite() {
        return Err(Error::Invalid(format!("cannot rationalize {x}")));
    }
    let exact = BigRational::from_float(x).unwrap_or_else(BigRational::zero);
    let cap = BigInt::from(max_den);
    if *exact.denom() <= cap {
        return Ok(exact);
    }
    let neg = exact.is_negative();
    let mut r = exact.abs();
    // convergents h/k of the continued fraction of |x|
    let (mut h0, mut k0) = (BigInt::zero(), BigInt::one());
    let (mut h1, mut k1) = (BigInt::one(), BigInt::zero());
    loop {
        let a = r.to_integer();
        let h2 = &a * &h1 + &h0;
        let k2 = &a * &k1 + &k0;
        if k2 > cap {
            break;
        }
        h0 = h1;
        k0 = k1;
        h1 = h2;
        k1 = k2;
        let frac = &r - BigRational::from_integer(a);
        if frac.is_zero() {
            break;
        }
        r = frac.recip();
    }
    let approx = BigRational::new(h1, k1);
    Ok(if neg { -approx } else { approx })
}

/// Exact PSD test for a rational symmetric matrix, by LDL^T elimination with
/// diagonal pivoting. A symmetric matrix is PSD iff every pivot is
/// nonnegative and a zero diagonal forces a zero row in the remaining block.
/// Nearest rational with denominator 2^bits. Unlike continued-fraction
/// rounding this puts every entry of a matrix on a common grid, so sums
/// of thousands of entries keep small denominators.
pub fn rationalize_dyadic(x: f64, bits: u32) -> Result<BigRational> {
    if !x.is_finite() {
        return Err(Error::Invalid(format!("cannot rationalize {x}")));
    }
    let scale = BigInt::from(1u8) << bits;
    let scaled = BigRational::from_float(x)
        .ok_or_else(|| Error::Invalid(format!("cannot rationalize {x}")))?
        * BigRational::from_integer(scale.clone());
    Ok(BigRational::new(scaled.round().to_integer(), scale))
}

pub fn is_psd(mat: &[Vec<BigRational>]) -> bool {
    let n = mat.len();
    let mut m: Vec<Vec<BigRational>> = mat.to_vec();
    let mut active: Vec<usize> = (0..n).collect();
    while !active.is_empty() {
        // pick the largest remaining diagonal as pivot
        let (pos, piv_idx) = match active
            .iter()
            .enumerate()
            .max_by(|a, b| m[*a.1][*a.1].cmp(&m[*b.1][*b.1]))
        {
            Some((pos, &i)) => (pos, i),
            None => break,
        };
        let d = m[piv_idx][piv_idx].clone();
        if d.is_negative() {
            return false;
        }
        if d.is_zero() {
            // all remaining diagonals are <= 0; PSD requires the whole
            // remaining block to vanish
            return active
                .iter()
                .all(|&i| active.iter().all(|&j| m[i][j].is_zero()));
        }
        active.swap_remove(pos);
        for a in 0..active.len() {
            let i = active[a];
            let li = &m[i][piv_idx] / &d;
            if li.is_zero() {
                continue;
            }
            for b in 0..active.len() {
                let j = active[b];
                let upd = &li * &m[piv_idx][j];
                m[i][j] -= upd;
            }
        }
        for &i in &active {
            m[i][piv_idx] = BigRational::zero();
            m[piv_idx][i] = BigRational::zero();
        }
    }
    true
}

/// Serde adapter: `BigRational` as decimal numerator/denominator strings.
pub mod ratio_json {
    use super::*;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Repr {
        num: String,
        den: String,
    }

    pub fn serialize<S: Serializer>(x: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
        Repr {
            num: x.numer().to_string(),
            den: x.denom().to_string(),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<BigRational, D::Error> {
        let r = Repr::deserialize(d)?;
        let num: BigInt = r.num.parse().map_err(serde::de::Error::custom)?;
        let den: BigInt = r.den.parse().map_err(serde::de::Error::custom)?;
        if den.is_zero() {
            return Err(serde::de::Error::custom("zero denominator"));
        }
        Ok(BigRational::new(num, den))
    }

    pub mod mat {
        use super::*;

        pub fn serialize<S: Serializer>(
            x: &Vec<Vec<BigRational>>,
            s: S,
        ) -> std::result::Result<S::Ok, S::Error> {
            let rows: Vec<Vec<Repr>> = x
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|v| Repr { num: v.numer().to_string(), den: v.denom().to_string() })
                        .collect()
                })
                .collect();
            rows.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(
            d: D,
        ) -> std::result::Result<Vec<Vec<BigRational>>, D::Error> {
            let rows: Vec<Vec<Repr>> = Vec::deserialize(d)?;
            rows.into_iter()
                .map(|row| {
                    row.into_iter()
                        .map(|r| {
                            let num: BigInt =
                                r.num.parse().map_err(serde::de::Error::custom)?;
                            let den: BigInt =
                                r.den.parse().map_err(serde::de::Error::custom)?;
                            if den.is_zero() {
                                return Err(serde::de::Error::custom("zero denominator"));
                            }
                            Ok(BigRational::new(num, den))
                        })
                        .collect()
                })
                .collect()
        }
    }

    pub mod opt {
        use super::*;

        pub fn serialize<S: Serializer>(
            x: &Option<BigRational>,
            s: S,
        ) -> std::result::Result<S::Ok, S::Error> {
            match x {
                Some(v) => super::serialize(v, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(
            d: D,
        ) -> std::result::Result<Option<BigRational>, D::Error> {
            let r: Option<Repr> = Option::deserialize(d)?;
            match r {
                None => Ok(None),
                Some(r) => {
                    let num: BigInt = r.num.parse().map_err(serde::de::Error::custom)?;
                    let den: BigInt = r.den.parse().map_err(serde::de::Error::custom)?;
                    if den.is_zero() {
                        return Err(serde::de::Error::custom("zero denominator"));
                    }
                    Ok(Some(BigRational::new(num, den)))
                }
            }
        }
    }
}

/// Exact binomial coefficient, used by test oracles.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

pub fn bigint_is_nonneg(x: &BigInt) -> bool {
    x.sign() != Sign::Minus
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::FromPrimitive;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn root_bounds_bracket() {
        for (v, k) in [(2i64, 2u32), (20, 6), (7, 3), (1, 2), (10_000, 4)] {
            let x = BigRational::from_integer(BigInt::from(v));
            let lo = root_lower(&x, k, 48);
            let hi = root_upper(&x, k, 48);
            assert!(lo.clone().pow(k as i32) <= x);
            assert!(hi.clone().pow(k as i32) >= x);
            assert!(&hi - &lo < rat(1, 1 << 40));
        }
    }

    #[test]
    fn f64_directed_rounding() {
        let x = rat(1, 3);
        let lo = to_f64_down(&x);
        let hi = to_f64_up(&x);
        assert!(BigRational::from_float(lo).unwrap() <= x);
        assert!(BigRational::from_float(hi).unwrap() >= x);
        assert!(hi - lo < 1e-15);
    }

    #[test]
    fn rationalize_recovers_small_fractions() {
        let x = rationalize(0.25, 1 << 32).unwrap();
        assert_eq!(x, rat(1, 4));
        let y = rationalize(std::f64::consts::PI, 113).unwrap();
        assert_eq!(y, rat(355, 113));
        let z = rationalize(-1.5, 10).unwrap();
        assert_eq!(z, rat(-3, 2));
    }

    #[test]
    fn psd_check_small_matrices() {
        let id = vec![vec![rat(1, 1), rat(0, 1)], vec![rat(0, 1), rat(1, 1)]];
        assert!(is_psd(&id));
        // [[2,1],[1,2]] is PD
        let pd = vec![vec![rat(2, 1), rat(1, 1)], vec![rat(1, 1), rat(2, 1)]];
        assert!(is_psd(&pd));
        // [[1,2],[2,1]] has a negative eigenvalue
        let ind = vec![vec![rat(1, 1), rat(2, 1)], vec![rat(2, 1), rat(1, 1)]];
        assert!(!is_psd(&ind));
        // rank-one PSD with a zero pivot on the way
        let r1 = vec![
            vec![rat(0, 1), rat(0, 1), rat(0, 1)],
            vec![rat(0, 1), rat(1, 1), rat(-1, 1)],
            vec![rat(0, 1), rat(-1, 1), rat(1, 1)],
        ];
        assert!(is_psd(&r1));
        // zero diagonal with nonzero off-diagonal is not PSD
        let bad = vec![vec![rat(0, 1), rat(1, 1)], vec![rat(1, 1), rat(0, 1)]];
        assert!(!is_psd(&bad));
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(4, 2), BigUint::from_u64(6).unwrap());
        assert_eq!(binomial(24, 12), BigUint::from_u64(2_704_156).unwrap());
    }
}
