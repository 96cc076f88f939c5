//! Lower bounds on ‖a‖_u from finite-dimensional unitary tuples.
//!
//! Soundness discipline: a bound is emitted only from tuples that satisfy
//! the relators exactly by construction — free tuples, commuting diagonal
//! phase tuples, per-block tensor tuples, or permutation matrices from a
//! verified finite quotient. Near-solutions of a relator penalty carry no
//! bound and are never used. The search is stochastic but seeded, so the
//! best tuple is reproducible; it is a search, not an exhaustive sweep.

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::presentation::StructureClass;
use crate::ring::{MatrixAssignment, RingElement};
use crate::wordprob::PermutationQuotient;

type C64 = Complex<f64>;

/// Slack subtracted from every power-iteration value so float error can
/// never push a reported bound above the true norm.
pub const SIGMA_SLACK: f64 = 1e-8;
const POWER_ITERS: usize = 500;

/// Dimension at which Choi dilations recover the level-n free-group
/// optimum exactly for words of length ≤ d: 4·n^d.
pub fn choi_dimension_hint(n: usize, d: usize) -> usize {
    4usize.saturating_mul(n.saturating_pow(d as u32))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Feasibility {
    /// The construction class guarantees the relators exactly.
    ExactByConstruction(String),
    /// Relators evaluated numerically; residual recorded. Carries no bound.
    Verified { relator_residual: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnitaryTuple {
    pub dim: usize,
    #[serde(with = "complex_mats")]
    pub mats: Vec<DMatrix<C64>>,
    pub feasibility: Feasibility,
}

/// Serde adapter: matrices as row-major `[re, im]` pairs.
mod complex_mats {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Repr {
        rows: usize,
        cols: usize,
        data: Vec<[f64; 2]>,
    }

    pub fn serialize<S: Serializer>(
        mats: &Vec<DMatrix<C64>>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        let reprs: Vec<Repr> = mats
            .iter()
            .map(|m| Repr {
                rows: m.nrows(),
                cols: m.ncols(),
                data: m
                    .row_iter()
                    .flat_map(|r| r.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>())
                    .collect(),
            })
            .collect();
        reprs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Vec<DMatrix<C64>>, D::Error> {
        let reprs: Vec<Repr> = Vec::deserialize(d)?;
        reprs
            .into_iter()
            .map(|r| {
                if r.data.len() != r.rows * r.cols {
                    return Err(serde::de::Error::custom("matrix data length mismatch"));
                }
                Ok(DMatrix::from_fn(r.rows, r.cols, |i, j| {
                    let [re, im] = r.data[i * r.cols + j];
                    C64::new(re, im)
                }))
            })
            .collect()
    }
}

impl UnitaryTuple {
    pub fn assignment(&self) -> Result<MatrixAssignment> {
        MatrixAssignment::new(self.mats.clone())
    }

    pub fn unitarity_defect(&self) -> f64 {
        self.mats
            .iter()
            .map(|u| {
                let k = u.nrows();
                (u.adjoint() * u - DMatrix::<C64>::identity(k, k)).norm()
            })
            .fold(0.0, f64::max)
    }

    /// The all-ones one-dimensional representation: exact for every class
    /// because every relator maps to 1.
    pub fn trivial(alphabet_len: usize) -> UnitaryTuple {
        UnitaryTuple {
            dim: 1,
            mats: vec![DMatrix::identity(1, 1); alphabet_len],
            feasibility: Feasibility::ExactByConstruction("trivial".into()),
        }
    }
}

/// Hermitian square root of a PSD matrix; tiny negative eigenvalues from
/// rounding are clamped to zero.
fn psd_sqrt(m: &DMatrix<C64>) -> DMatrix<C64> {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let vals = eig.eigenvalues.map(|v| C64::new(v.max(0.0).sqrt(), 0.0));
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.adjoint()
}

/// Unitary dilation `u = [[T, √(I−TT*)], [√(I−T*T), −T*]]` of a
/// contraction. Singular values are clipped to 1 − 10⁻¹² first, so any
/// matrix is accepted; the top-left corner still reproduces T to 10⁻¹².
pub fn choi_dilate(t: &DMatrix<C64>) -> DMatrix<C64> {
    let k = t.nrows();
    // leave true contractions untouched so the corner reproduces exactly;
    // psd_sqrt clamps the resulting hair-thin negative eigenvalues
    let svd = t.clone().svd(true, true);
    let t = if svd.singular_values.max() <= 1.0 + 1e-13 {
        t.clone()
    } else {
        let clipped = svd.singular_values.map(|s| s.min(1.0 - 1e-12));
        let u = svd.u.as_ref().expect("svd requested u");
        let vt = svd.v_t.as_ref().expect("svd requested v_t");
        u * DMatrix::from_diagonal(&clipped.map(|s| C64::new(s, 0.0))) * vt
    };

    let id = DMatrix::<C64>::identity(k, k);
    let top_right = psd_sqrt(&(&id - &t * t.adjoint()));
    let bottom_left = psd_sqrt(&(&id - t.adjoint() * &t));
    let mut out = DMatrix::<C64>::zeros(2 * k, 2 * k);
    out.view_mut((0, 0), (k, k)).copy_from(&t);
    out.view_mut((0, k), (k, k)).copy_from(&top_right);
    out.view_mut((k, 0), (k, k)).copy_from(&bottom_left);
    out.view_mut((k, k), (k, k)).copy_from(&(-t.adjoint()));
    out
}

/// Largest singular value of `m`, certified from below: power iteration on
/// m*m and the Rayleigh value of the final vector, minus [`SIGMA_SLACK`].
pub fn sigma_max_lower(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    let gram = m.adjoint() * m;
    let mut v = DVector::<C64>::from_element(n, C64::new(1.0, 0.0));
    // a deterministic perturbation avoids starting orthogonal to the
    // leading eigenvector
    for i in 0..n {
        v[i] += C64::new(0.0, (i as f64 + 1.0) * 1e-3);
    }
    v /= C64::new(v.norm(), 0.0);
    for _ in 0..POWER_ITERS {
        let w = &gram * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / C64::new(norm, 0.0);
    }
    let image_norm = (m * &v).norm() / v.norm();
    (image_norm - SIGMA_SLACK).max(0.0)
}

fn evaluate_bound(a: &RingElement, tuple: &UnitaryTuple) -> Result<f64> {
    let img = a.evaluate(&tuple.assignment()?)?;
    Ok(sigma_max_lower(&img))
}

fn haar_unitary(k: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
    let g = DMatrix::from_fn(k, k, |_, _| {
        C64::new(gaussian(rng), gaussian(rng))
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    // fix the phase ambiguity so the distribution is Haar
    for j in 0..k {
        let d = r[(j, j)];
        let phase = if d.norm() == 0.0 { C64::new(1.0, 0.0) } else { d / d.norm() };
        for i in 0..k {
            q[(i, j)] *= phase;
        }
    }
    q
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller from two uniform draws
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn polar_unitary(m: &DMatrix<C64>) -> DMatrix<C64> {
    let svd = m.clone().svd(true, true);
    svd.u.as_ref().unwrap() * svd.v_t.as_ref().unwrap()
}

/// Strict contraction with σ_max uniform in [0.3, 0.97]: staying off the
/// unit sphere keeps the dilation's square-root blocks well conditioned.
fn random_contraction(k: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
    let g = DMatrix::from_fn(k, k, |_, _| C64::new(gaussian(rng), gaussian(rng)));
    let top = g.clone().svd(false, false).singular_values.max();
    let target: f64 = rng.gen_range(0.3..0.97);
    if top == 0.0 {
        g
    } else {
        g * C64::new(target / top, 0.0)
    }
}

fn phase_tuple(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<DMatrix<C64>> {
    (0..n)
        .map(|_| {
            DMatrix::from_diagonal(&DVector::from_fn(k, |_, _| {
                let theta: f64 = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
                C64::new(theta.cos(), theta.sin())
            }))
        })
        .collect()
}

fn free_tuple(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<DMatrix<C64>> {
    (0..n).map(|_| haar_unitary(k, rng)).collect()
}

fn kronecker(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}

/// A per-block tensor tuple for a product of free groups: generators of
/// block j act as `I ⊗ … ⊗ U ⊗ … ⊗ I`, so cross-block commutators vanish
/// exactly.
fn product_tuple(
    blocks: &[Vec<usize>],
    alphabet_len: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<DMatrix<C64>> {
    let total: usize = k.pow(blocks.len() as u32);
    let mut mats = vec![DMatrix::<C64>::identity(total, total); alphabet_len];
    for (j, block) in blocks.iter().enumerate() {
        for &g in block {
            let u = haar_unitary(k, rng);
            let mut m = DMatrix::<C64>::identity(1, 1);
            for pos in 0..blocks.len() {
                let factor = if pos == j { u.clone() } else { DMatrix::identity(k, k) };
                m = kronecker(&m, &factor);
            }
            mats[g] = m;
        }
    }
    mats
}

/// Stochastic search over exactly-feasible tuples. Every candidate tuple
/// satisfies the relators by construction, so the running best is always a
/// true lower bound on ‖a‖_u. Deterministic under a fixed seed.
pub fn structured_rep_lower_bound(
    a: &RingElement,
    dim: usize,
    trials: usize,
    seed: u64,
) -> Result<(f64, UnitaryTuple)> {
    let p = a.presentation();
    let n = p.alphabet_len();
    let class_name = p.class().to_string();

    let mut best_tuple = UnitaryTuple::trivial(n);
    let mut best = evaluate_bound(a, &best_tuple)?;

    let candidates = |trial: usize| -> Result<Vec<Vec<DMatrix<C64>>>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial as u64).wrapping_mul(0x9e3779b97f4a7c15));
        match p.class() {
            StructureClass::Free => {
                let mut out = vec![free_tuple(n, dim, &mut rng)];
                // Choi dilations of random contractions reach corners of
                // the unitary polytope that Haar sampling rarely hits
                let ts: Vec<DMatrix<C64>> =
                    (0..n).map(|_| random_contraction(dim, &mut rng)).collect();
                out.push(ts.iter().map(choi_dilate).collect());
                Ok(out)
            }
            StructureClass::FreeAbelian => Ok(vec![phase_tuple(n, dim, &mut rng)]),
            StructureClass::ProductOfFrees(blocks) => {
                Ok(vec![product_tuple(blocks, n, dim, &mut rng)])
            }
            StructureClass::GenericPresented => Err(Error::UnsupportedClass(
                "structured_rep_lower_bound",
                "generic (supply a permutation quotient)".into(),
            )),
        }
    };

    for trial in 0..trials {
        for mats in candidates(trial)? {
            let tuple = UnitaryTuple {
                dim: mats.first().map(|m| m.nrows()).unwrap_or(1),
                mats,
                feasibility: Feasibility::ExactByConstruction(class_name.clone()),
            };
            let value = evaluate_bound(a, &tuple)?;
            if value > best {
                best = value;
                best_tuple = tuple;
            }
        }
    }

    // local ascent from the best free tuple: perturb, retract to the
    // unitary group by polar decomposition, keep improvements
    if *p.class() == StructureClass::Free && best_tuple.dim > 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5851f42d4c957f2d);
        let mut step = 0.2;
        for _ in 0..60 {
            let mats: Vec<DMatrix<C64>> = best_tuple
                .mats
                .iter()
                .map(|u| {
                    let k = u.nrows();
                    let noise = DMatrix::from_fn(k, k, |_, _| {
                        C64::new(gaussian(&mut rng), gaussian(&mut rng)) * step
                    });
                    polar_unitary(&(u + noise))
                })
                .collect();
            let tuple = UnitaryTuple {
                dim: best_tuple.dim,
                mats,
                feasibility: Feasibility::ExactByConstruction(class_name.clone()),
            };
            let value = evaluate_bound(a, &tuple)?;
            if value > best {
                best = value;
                best_tuple = tuple;
            } else {
                step *= 0.8;
            }
        }
    }

    Ok((best, best_tuple))
}

/// Lower bound from a finite permutation quotient: the relators are
/// re-verified exactly on the permutations before any evaluation.
pub fn quotient_rep_lower_bound(
    a: &RingElement,
    q: &PermutationQuotient,
) -> Result<(f64, UnitaryTuple)> {
    let p = a.presentation();
    if !q.satisfies_relators(p) {
        return Err(Error::QuotientInvalid);
    }
    let mats: Vec<DMatrix<C64>> = q
        .perms
        .iter()
        .map(|perm| {
            DMatrix::from_fn(q.degree, q.degree, |i, j| {
                if perm[j] == i { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }
            })
        })
        .collect();
    let tuple = UnitaryTuple {
        dim: q.degree,
        mats,
        feasibility: Feasibility::ExactByConstruction("permutation quotient".into()),
    };
    let value = evaluate_bound(a, &tuple)?;
    Ok((value, tuple))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lower::compression_lower_bound;
    use crate::presentation::{free_ball, Presentation, DEFAULT_BALL_CAP};
    use std::sync::Arc;

    fn elem(p: &Arc<Presentation>, text: &str) -> RingElement {
        RingElement::parse(text, p.clone()).unwrap()
    }

    #[test]
    fn choi_dilation_closed_forms() {
        let t = DMatrix::from_row_slice(1, 1, &[C64::new(0.0, 0.0)]);
        let u = choi_dilate(&t);
        assert!((u[(0, 1)].re - 1.0).abs() < 1e-9 && (u[(1, 0)].re - 1.0).abs() < 1e-9);

        let t = DMatrix::from_row_slice(1, 1, &[C64::new(1.0, 0.0)]);
        let u = choi_dilate(&t);
        assert!((u[(0, 0)].re - 1.0).abs() < 1e-6);
        assert!((u[(1, 1)].re + 1.0).abs() < 1e-6);

        let t = DMatrix::from_row_slice(1, 1, &[C64::new(0.5, 0.0)]);
        let u = choi_dilate(&t);
        let s = (3.0f64).sqrt() / 2.0;
        assert!((u[(0, 0)].re - 0.5).abs() < 1e-12);
        assert!((u[(0, 1)].re - s).abs() < 1e-9);
        assert!((u[(1, 0)].re - s).abs() < 1e-9);
        assert!((u[(1, 1)].re + 0.5).abs() < 1e-12);
    }

    #[test]
    fn choi_dilation_unitary_with_exact_corner() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &k in &[1usize, 2, 4, 8] {
            for _ in 0..100 {
                let t = random_contraction(k, &mut rng);
                let u = choi_dilate(&t);
                let id = DMatrix::<C64>::identity(2 * k, 2 * k);
                assert!((u.adjoint() * &u - &id).norm() <= 1e-9);
                let corner = u.view((0, 0), (k, k)).clone_owned();
                assert!((corner - &t).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn trivial_representation_values() {
        let f2 = Arc::new(Presentation::free(&["x", "y"]));
        let (v, _) = structured_rep_lower_bound(&elem(&f2, "x + x^-1 + y + y^-1"), 1, 0, 1).unwrap();
        assert!((v - 4.0).abs() < 1e-7);

        let f1 = Arc::new(Presentation::free(&["x"]));
        let (v, _) = structured_rep_lower_bound(&elem(&f1, "x"), 4, 3, 1).unwrap();
        assert!((v - 1.0).abs() < 1e-7);

        let (v, _) = structured_rep_lower_bound(&elem(&f2, "1 + x + y"), 2, 3, 1).unwrap();
        assert!((v - 3.0).abs() < 1e-7);
    }

    #[test]
    fn quotient_bound_on_commutator_presentation() {
        let p = Arc::new(
            Presentation::parse("generators: x y\nrelators: x*y*x^-1*y^-1\nclass: generic")
                .unwrap(),
        );
        let a = elem(&p, "x + x^-1 + y + y^-1");
        // (ℤ/2)² as degree-4 permutations
        let q = PermutationQuotient {
            degree: 4,
            perms: vec![vec![1, 0, 3, 2], vec![2, 3, 0, 1]],
        };
        let (v, tuple) = quotient_rep_lower_bound(&a, &q).unwrap();
        assert!((v - 4.0).abs() < 1e-6, "v = {v}");
        assert!(tuple.unitarity_defect() < 1e-12);

        let one = elem(&p, "1");
        let (v, _) = quotient_rep_lower_bound(&one, &q).unwrap();
        assert!((v - 1.0).abs() < 1e-7);

        let bad = PermutationQuotient { degree: 2, perms: vec![vec![1, 0], vec![1, 0]] };
        // this one is fine (both map to the same transposition, commuting)
        assert!(quotient_rep_lower_bound(&a, &bad).is_ok());
        let free_only = PermutationQuotient { degree: 3, perms: vec![vec![1, 2, 0], vec![1, 0, 2]] };
        assert!(matches!(
            quotient_rep_lower_bound(&a, &free_only),
            Err(Error::QuotientInvalid)
        ));
    }

    #[test]
    fn trivial_quotient_gives_coefficient_sum() {
        let p = Arc::new(
            Presentation::parse("generators: x\nrelators: x^2\nclass: generic").unwrap(),
        );
        let q = PermutationQuotient::identity(1, 1);
        let (v, _) = quotient_rep_lower_bound(&elem(&p, "1 - x"), &q).unwrap();
        assert!(v < 1e-7, "v = {v}");
    }

    #[test]
    fn deterministic_under_seed_and_monotone_in_trials() {
        let p = Arc::new(Presentation::free(&["x", "y"]));
        let a = elem(&p, "x + 2*y + y^-1");
        let (v1, _) = structured_rep_lower_bound(&a, 3, 5, 99).unwrap();
        let (v2, _) = structured_rep_lower_bound(&a, 3, 5, 99).unwrap();
        assert_eq!(v1, v2);
        let (v3, _) = structured_rep_lower_bound(&a, 3, 10, 99).unwrap();
        assert!(v3 >= v1 - 1e-15);
    }

    #[test]
    fn abelian_phases_reach_the_symbol_maximum() {
        // on ℤ², ‖x+x⁻¹+y+y⁻¹‖ = 4 is attained at phases (1,1)
        let p = Arc::new(Presentation::free_abelian(&["x", "y"]));
        let a = elem(&p, "x + x^-1 + y + y^-1");
        let (v, tuple) = structured_rep_lower_bound(&a, 8, 20, 5).unwrap();
        assert!(v <= 4.0);
        assert!(v >= 3.9, "phase search reached only {v}");
        assert!(tuple.unitarity_defect() < 1e-9);
    }

    #[test]
    fn dilated_compression_tuple_dominates_compression_bound() {
        let p = Arc::new(Presentation::free(&["x", "y"]));
        let a = elem(&p, "x + y");
        let radius = 2usize;
        let comp = compression_lower_bound(&a, radius, DEFAULT_BALL_CAP).unwrap();

        // compression of left multiplication to the ball of radius+d
        let basis = free_ball(2, radius + 1, DEFAULT_BALL_CAP).unwrap();
        let index: std::collections::HashMap<_, _> =
            basis.iter().cloned().enumerate().map(|(i, w)| (w, i)).collect();
        let mats: Vec<DMatrix<C64>> = (1..=2i32)
            .map(|gen| {
                let g = crate::presentation::Word::reduce(&[gen], 2).unwrap();
                DMatrix::from_fn(basis.len(), basis.len(), |i, j| {
                    match index.get(&g.mul(&basis[j])) {
                        Some(&row) if row == i => C64::new(1.0, 0.0),
                        _ => C64::new(0.0, 0.0),
                    }
                })
            })
            .collect();
        let tuple = UnitaryTuple {
            dim: basis.len() * 2,
            mats: mats.iter().map(choi_dilate).collect(),
            feasibility: Feasibility::ExactByConstruction("free".into()),
        };
        let v = evaluate_bound(&a, &tuple).unwrap();
        assert!(
            v >= comp.value - 1e-6,
            "dilated value {v} below compression bound {}",
            comp.value
        );
    }

    #[test]
    fn tuples_serialize_to_json() {
        let p = Arc::new(Presentation::free(&["x"]));
        let (_, tuple) = structured_rep_lower_bound(&elem(&p, "1 + x"), 2, 2, 3).unwrap();
        let json = serde_json::to_string(&tuple).unwrap();
        let back: UnitaryTuple = serde_json::from_str(&json).unwrap();
        assert_eq!(back.dim, tuple.dim);
        assert!((back.mats[0].clone() - &tuple.mats[0]).norm() < 1e-15);
    }
}
