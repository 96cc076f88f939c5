//! Dense block-diagonal SDP solver for the assembled level-n programs.
//!
//! Primal: minimize Λ = (a*a)_e + Σ_b ⟨A_{b,e}, X_b⟩ subject to
//! Σ_b ⟨A_{b,w}, X_b⟩ = −(a*a)_w for every non-identity constraint word w
//! and X_b ⪰ 0. The solver is an infeasible-start primal-dual interior
//! point method with the HKM direction and a Mehrotra
//! predictor-corrector; the Schur complement is small (hundreds of rows at
//! desk scale) and solved by LU. Everything is deterministic: no
//! randomness, fixed iteration order.
//!
//! The dual vector `y` carries the moment functional: φ(w) = −y_w spread
//! over the words merged into constraint w, φ(e) = 1, and the dual
//! objective (a*a)_e + bᵀy equals φ(a*a) — reported in Λ units so strong
//! duality can be checked directly against the primal.

use nalgebra::DMatrix;
use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::presentation::Word;
use crate::sos::SosProgram;

/// One linear constraint: a symmetric matrix per block, stored sparsely as
/// `(block, p, q, value)` with both mirror positions listed.
#[derive(Debug, Clone, Default)]
struct Constraint {
    entries: Vec<(usize, usize, usize, f64)>,
}

impl Constraint {
    fn dot(&self, xs: &[DMatrix<f64>]) -> f64 {
        self.entries.iter().map(|&(b, p, q, v)| v * xs[b][(p, q)]).sum()
    }

    fn add_scaled(&self, coef: f64, out: &mut [DMatrix<f64>]) {
        for &(b, p, q, v) in &self.entries {
            out[b][(p, q)] += coef * v;
        }
    }
}

#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub block_dims: Vec<usize>,
    objective: Vec<DMatrix<f64>>,
    constraints: Vec<Constraint>,
    pub b: Vec<f64>,
    /// Words merged into each constraint (duplicates share one row).
    pub merged_words: Vec<Vec<Word>>,
    /// Constant Λ offset: the identity coefficient of a*a.
    pub obj_offset: f64,
}

/// Merges the program's rows into independent solver constraints. Rows
/// with identical constraint matrices (the w and w⁻¹ rows of a pure SOS
/// block, for instance) collapse into one; a collapse with conflicting
/// targets means the program is infeasible as stated.
pub fn build_problem(prog: &SosProgram) -> Result<SdpProblem> {
    use std::collections::BTreeMap;
    let dim = prog.block_dim();
    let block_dims = vec![dim; prog.blocks.len()];

    // canonical integral key: (block, min, max) -> 2 * symmetrized value
    let canonical = |row: &crate::sos::Row| -> Vec<(usize, usize, usize, i64)> {
        let mut map: BTreeMap<(usize, usize, usize), i64> = BTreeMap::new();
        for e in &row.entries {
            let (p, q) = (e.g.min(e.h), e.g.max(e.h));
            *map.entry((e.block, p, q)).or_insert(0) += e.coeff;
        }
        map.into_iter()
            .filter(|&(_, v)| v != 0)
            .map(|((b, p, q), v)| (b, p, q, v))
            .collect()
    };
    let to_constraint = |key: &[(usize, usize, usize, i64)]| -> Constraint {
        let mut entries = Vec::new();
        for &(b, p, q, v2) in key {
            if p == q {
                entries.push((b, p, q, v2 as f64));
            } else {
                // symmetrized value is v2/2 at both mirror positions
                entries.push((b, p, q, v2 as f64 / 2.0));
                entries.push((b, q, p, v2 as f64 / 2.0));
            }
        }
        Constraint { entries }
    };

    let mut objective: Vec<DMatrix<f64>> =
        block_dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
    let mut constraints = Vec::new();
    let mut b = Vec::new();
    let mut merged_words: Vec<Vec<Word>> = Vec::new();
    let mut seen: BTreeMap<Vec<(usize, usize, usize, i64)>, (usize, num_rational::BigRational)> =
        BTreeMap::new();
    let mut obj_offset = 0.0;

    for row in &prog.rows {
        let key = canonical(row);
        if row.word.is_identity() {
            to_constraint(&key).add_scaled(1.0, &mut objective);
            obj_offset = row.target.to_f64().ok_or_else(|| {
                Error::Sdp("identity target does not fit in f64".into())
            })?;
            continue;
        }
        match seen.get(&key) {
            Some((idx, target)) => {
                if *target != row.target {
                    return Err(Error::Sdp(format!(
                        "conflicting targets on duplicate constraint rows ({} vs {})",
                        target, row.target
                    )));
                }
                merged_words[*idx].push(row.word.clone());
            }
            None => {
                let idx = constraints.len();
                constraints.push(to_constraint(&key));
                b.push(
                    -row.target
                        .to_f64()
                        .ok_or_else(|| Error::Sdp("target does not fit in f64".into()))?,
                );
                merged_words.push(vec![row.word.clone()]);
                seen.insert(key, (idx, row.target.clone()));
            }
        }
    }

    Ok(SdpProblem { block_dims, objective, constraints, b, merged_words, obj_offset })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    MaxIterations,
    /// Dual objective diverged: no Λ is representable at this level.
    NoBoundAtLevel,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    /// Primal objective in Λ units.
    pub lambda: f64,
    /// Dual objective in Λ units; equals φ(a*a) for the moment functional.
    pub dual_objective: f64,
    pub block_mats: Vec<DMatrix<f64>>,
    pub y: Vec<f64>,
    pub merged_words: Vec<Vec<Word>>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
}

impl SdpSolution {
    /// The moment functional on constraint words, e ↦ 1.
    pub fn phi(&self, w: &Word) -> Option<f64> {
        if w.is_identity() {
            return Some(1.0);
        }
        self.merged_words.iter().position(|g| g.contains(w)).map(|i| {
            -self.y[i] / self.merged_words[i].len() as f64
        })
    }
}

pub fn solve_sdp(prog: &SosProgram, tol: f64, max_iters: usize) -> Result<SdpSolution> {
    let problem = build_problem(prog)?;
    solve_problem(&problem, tol, max_iters)
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn frob(blocks: &[DMatrix<f64>]) -> f64 {
    blocks.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
}

/// Largest step `α ≤ 1` keeping `S + αD` positive semidefinite, shrunk by
/// the usual 0.98 fraction-to-boundary factor.
fn max_step(s: &[DMatrix<f64>], d: &[DMatrix<f64>]) -> Result<f64> {
    let mut alpha: f64 = 1.0;
    for (sb, db) in s.iter().zip(d) {
        if sb.nrows() == 0 {
            continue;
        }
        let chol = nalgebra::Cholesky::new(sb.clone())
            .ok_or_else(|| Error::Sdp("iterate left the PSD cone".into()))?;
        let l = chol.l();
        let li = l
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Sdp("singular Cholesky factor".into()))?;
        let t = sym(&(&li * db * li.transpose()));
        let eigs = t.symmetric_eigenvalues();
        let min = eigs.iter().fold(f64::INFINITY, |a, &x| a.min(x));
        if min < 0.0 {
            alpha = alpha.min(-0.98 / min);
        }
    }
    Ok(alpha.min(1.0))
}

fn solve_problem(problem: &SdpProblem, tol: f64, max_iters: usize) -> Result<SdpSolution> {
    let m = problem.constraints.len();
    let dims = &problem.block_dims;
    let n_total: usize = dims.iter().sum();

    // unconstrained: the objective blocks are PSD by construction (each is
    // sym(I - permutation-like part)), so X = 0 is optimal
    if m == 0 {
        return Ok(SdpSolution {
            status: SdpStatus::Optimal,
            lambda: problem.obj_offset,
            dual_objective: problem.obj_offset,
            block_mats: dims.iter().map(|&d| DMatrix::zeros(d, d)).collect(),
            y: Vec::new(),
            merged_words: Vec::new(),
            iterations: 0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            gap: 0.0,
        });
    }

    let b_scale = 1.0 + problem.b.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let c_scale = 1.0 + frob(&problem.objective);

    let eta = b_scale.max(c_scale);
    let mut xs: Vec<DMatrix<f64>> = dims.iter().map(|&d| DMatrix::identity(d, d) * eta).collect();
    let mut zs: Vec<DMatrix<f64>> = dims.iter().map(|&d| DMatrix::identity(d, d) * eta).collect();
    let mut y = vec![0.0f64; m];

    // per-block entry lists for the Schur complement assembly
    let per_block: Vec<Vec<Vec<(usize, usize, f64)>>> = (0..dims.len())
        .map(|bl| {
            problem
                .constraints
                .iter()
                .map(|c| {
                    c.entries
                        .iter()
                        .filter(|&&(bb, _, _, _)| bb == bl)
                        .map(|&(_, p, q, v)| (p, q, v))
                        .collect()
                })
                .collect()
        })
        .collect();

    let mut status = SdpStatus::MaxIterations;
    let mut iterations = 0;
    let mut primal_residual = f64::INFINITY;
    let mut dual_residual = f64::INFINITY;
    let mut gap = f64::INFINITY;

    for iter in 0..max_iters {
        iterations = iter + 1;

        // residuals
        let rp: Vec<f64> = (0..m)
            .map(|i| problem.b[i] - problem.constraints[i].dot(&xs))
            .collect();
        let mut rd: Vec<DMatrix<f64>> = problem
            .objective
            .iter()
            .zip(&zs)
            .map(|(c, z)| c - z)
            .collect();
        for (i, c) in problem.constraints.iter().enumerate() {
            c.add_scaled(-y[i], &mut rd);
        }

        let primal_obj: f64 = problem
            .objective
            .iter()
            .zip(&xs)
            .map(|(c, x)| c.dot(x))
            .sum();
        let dual_obj: f64 = problem.b.iter().zip(&y).map(|(bi, yi)| bi * yi).sum();

        primal_residual = rp.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        dual_residual = frob(&rd);
        gap = (primal_obj - dual_obj).abs() / (1.0 + primal_obj.abs().max(dual_obj.abs()));

        if primal_residual <= tol * b_scale && dual_residual <= tol * c_scale && gap <= tol {
            status = SdpStatus::Optimal;
            break;
        }
        if problem.obj_offset + dual_obj > 1e9 * b_scale {
            status = SdpStatus::NoBoundAtLevel;
            break;
        }

        let mu: f64 =
            xs.iter().zip(&zs).map(|(x, z)| x.dot(z)).sum::<f64>() / n_total.max(1) as f64;

        let zinvs: Vec<DMatrix<f64>> = zs
            .iter()
            .map(|z| {
                nalgebra::Cholesky::new(z.clone())
                    .map(|c| c.inverse())
                    .ok_or_else(|| Error::Sdp("dual iterate lost positive definiteness".into()))
            })
            .collect::<Result<_>>()?;

        // Schur complement M_ij = Σ_b tr(A_i X A_j Z⁻¹), assembled from the
        // sparse entry lists
        let mut schur = DMatrix::zeros(m, m);
        for bl in 0..dims.len() {
            let x = &xs[bl];
            let zi = &zinvs[bl];
            for i in 0..m {
                let ei = &per_block[bl][i];
                if ei.is_empty() {
                    continue;
                }
                for j in 0..m {
                    let ej = &per_block[bl][j];
                    if ej.is_empty() {
                        continue;
                    }
                    let mut acc = 0.0;
                    for &(p, q, v) in ei {
                        for &(r, s, w) in ej {
                            acc += v * w * x[(q, r)] * zi[(s, p)];
                        }
                    }
                    schur[(i, j)] += acc;
                }
            }
        }
        let lu = {
            let mut ridge = 0.0f64;
            loop {
                let mut mreg = schur.clone();
                for i in 0..m {
                    mreg[(i, i)] += ridge;
                }
                let lu = mreg.lu();
                if lu.is_invertible() {
                    break lu;
                }
                ridge = if ridge == 0.0 { 1e-12 * (1.0 + schur.norm()) } else { ridge * 10.0 };
                if ridge > 1e-2 * (1.0 + schur.norm()) {
                    return Err(Error::Sdp("Schur complement numerically singular".into()));
                }
            }
        };

        let tr_a = |c: &Constraint, mats: &[DMatrix<f64>]| -> f64 {
            c.entries.iter().map(|&(b, p, q, v)| v * mats[b][(q, p)]).sum()
        };

        // rhs pieces common to predictor and corrector:
        // M Δy = rp − σμ·tr(A Z⁻¹) + tr(A X) + tr(A X Rd Z⁻¹) + tr(A Xa Za Z⁻¹)
        let g_xrdzi: Vec<DMatrix<f64>> = (0..dims.len())
            .map(|bl| &xs[bl] * &rd[bl] * &zinvs[bl])
            .collect();
        let base_rhs: Vec<f64> = (0..m)
            .map(|i| {
                let c = &problem.constraints[i];
                rp[i] + tr_a(c, &xs) + tr_a(c, &g_xrdzi)
            })
            .collect();

        let solve_dir = |rhs_extra: &dyn Fn(usize, &Constraint) -> f64,
                         sigma_mu: f64,
                         corr: Option<&[DMatrix<f64>]>|
         -> Result<(Vec<f64>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>)> {
            let rhs = nalgebra::DVector::from_iterator(
                m,
                (0..m).map(|i| {
                    let c = &problem.constraints[i];
                    base_rhs[i] - sigma_mu * tr_a(c, &zinvs) + rhs_extra(i, c)
                }),
            );
            let dy = lu
                .solve(&rhs)
                .ok_or_else(|| Error::Sdp("Schur solve failed".into()))?;
            // ΔZ = Rd − Σ Δy_i A_i
            let mut dz: Vec<DMatrix<f64>> = rd.clone();
            for (i, c) in problem.constraints.iter().enumerate() {
                c.add_scaled(-dy[i], &mut dz);
            }
            // ΔX = σμ Z⁻¹ − X − X ΔZ Z⁻¹ (− Xa Za Z⁻¹), symmetrized
            let dx: Vec<DMatrix<f64>> = (0..dims.len())
                .map(|bl| {
                    let mut d = &zinvs[bl] * sigma_mu - &xs[bl] - &xs[bl] * &dz[bl] * &zinvs[bl];
                    if let Some(corr) = corr {
                        d -= &corr[bl] * &zinvs[bl];
                    }
                    sym(&d)
                })
                .collect();
            Ok((dy.iter().copied().collect(), dx, dz))
        };

        // predictor (affine scaling)
        let (_dy_a, dx_a, dz_a) = solve_dir(&|_, _| 0.0, 0.0, None)?;
        let ap = max_step(&xs, &dx_a)?;
        let ad = max_step(&zs, &dz_a)?;
        let mu_aff: f64 = (0..dims.len())
            .map(|bl| (&xs[bl] + &dx_a[bl] * ap).dot(&(&zs[bl] + &dz_a[bl] * ad)))
            .sum::<f64>()
            / n_total.max(1) as f64;
        let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);

        // corrector with the Mehrotra second-order term
        let corr_prod: Vec<DMatrix<f64>> =
            (0..dims.len()).map(|bl| &dx_a[bl] * &dz_a[bl]).collect();
        let g_corr: Vec<DMatrix<f64>> =
            (0..dims.len()).map(|bl| &corr_prod[bl] * &zinvs[bl]).collect();
        let (dy, dx, dz) = solve_dir(
            &|_, c| tr_a(c, &g_corr),
            sigma * mu,
            Some(&corr_prod),
        )?;

        let ap = max_step(&xs, &dx)?;
        let ad = max_step(&zs, &dz)?;
        for bl in 0..dims.len() {
            xs[bl] += &dx[bl] * ap;
            zs[bl] += &dz[bl] * ad;
        }
        for i in 0..m {
            y[i] += ad * dy[i];
        }
    }

    let primal_obj: f64 = problem.objective.iter().zip(&xs).map(|(c, x)| c.dot(x)).sum();
    let dual_obj: f64 = problem.b.iter().zip(&y).map(|(bi, yi)| bi * yi).sum();

    Ok(SdpSolution {
        status,
        lambda: problem.obj_offset + primal_obj,
        dual_objective: problem.obj_offset + dual_obj,
        block_mats: xs,
        y,
        merged_words: problem.merged_words.clone(),
        iterations,
        primal_residual,
        dual_residual,
        gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presentation::Presentation;
    use crate::ring::RingElement;
    use crate::sos::assemble_sos_program;
    use std::sync::Arc;

    fn solve(p: &Arc<Presentation>, text: &str, level: usize) -> SdpSolution {
        let a = RingElement::parse(text, p.clone()).unwrap();
        let prog = assemble_sos_program(&a, level).unwrap();
        solve_sdp(&prog, 1e-9, 200).unwrap()
    }

    #[test]
    fn constant_element_needs_no_constraints() {
        let p = Arc::new(Presentation::free(&["x"]));
        let sol = solve(&p, "1", 0);
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.lambda - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_plus_x_level_one_reaches_four() {
        let p = Arc::new(Presentation::free(&["x"]));
        let sol = solve(&p, "1 + x", 1);
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.lambda - 4.0).abs() < 1e-6, "lambda = {}", sol.lambda);
        assert!((sol.dual_objective - 4.0).abs() < 1e-6);
    }

    #[test]
    fn shifted_laplacian_on_integers() {
        // ‖2 + x + x⁻¹‖ = 4, and 16 − a² admits an exact level-1 Gram
        let p = Arc::new(Presentation::free(&["x"]));
        let sol = solve(&p, "2 + x + x^-1", 1);
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.lambda - 16.0).abs() < 1e-5, "lambda = {}", sol.lambda);
    }

    #[test]
    fn strong_duality_across_programs() {
        let pz = Arc::new(Presentation::free(&["x"]));
        let pf = Arc::new(Presentation::free(&["x", "y"]));
        let cases = vec![
            (pz.clone(), "1 + x", 1usize),
            (pz.clone(), "1 + x", 2),
            (pz.clone(), "2 + x + x^-1", 2),
            (pf.clone(), "x + x^-1 + y + y^-1", 1),
            (pf.clone(), "1 + x + y", 2),
        ];
        for (p, text, level) in cases {
            let sol = solve(&p, text, level);
            assert_eq!(sol.status, SdpStatus::Optimal, "{text} level {level}");
            assert!(
                (sol.lambda - sol.dual_objective).abs()
                    / (1.0 + sol.lambda.abs()) <= 1e-6,
                "{text} level {level}: primal {} vs dual {}",
                sol.lambda,
                sol.dual_objective
            );
        }
    }

    #[test]
    fn free_group_laplacian_bounded_below_by_sixteen() {
        // ‖x+x⁻¹+y+y⁻¹‖_u = 4 via the trivial representation, so every
        // level's optimum is ≥ 16
        let p = Arc::new(Presentation::free(&["x", "y"]));
        let sol = solve(&p, "x + x^-1 + y + y^-1", 2);
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!(sol.lambda >= 16.0 - 1e-6, "lambda = {}", sol.lambda);
    }

    #[test]
    fn commutator_presentation_solves_with_relator_blocks() {
        let p = Arc::new(
            Presentation::parse("generators: x y\nrelators: x*y*x^-1*y^-1\nclass: generic")
                .unwrap(),
        );
        let a = RingElement::parse("x + x^-1 + y + y^-1", p.clone()).unwrap();
        let prog = assemble_sos_program(&a, 2).unwrap();
        let sol = solve_sdp(&prog, 1e-8, 200).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        // ‖a‖_u = 4 on ℤ², so 16 is a valid floor here too
        assert!(sol.lambda >= 16.0 - 1e-5, "lambda = {}", sol.lambda);
        assert!(sol.gap <= 1e-6);
    }

    #[test]
    fn moment_functional_matches_dual_objective() {
        let p = Arc::new(Presentation::free(&["x"]));
        let a = RingElement::parse("1 + x", p.clone()).unwrap();
        let prog = assemble_sos_program(&a, 1).unwrap();
        let sol = solve_sdp(&prog, 1e-9, 200).unwrap();
        let mut obj = 0.0;
        for (nf, c) in prog.gram_target.coeffs() {
            let w = nf.canonical_word();
            let phi = sol.phi(&w).unwrap_or(0.0);
            obj += c.to_f64().unwrap() * phi;
        }
        assert!((obj - sol.dual_objective).abs() < 1e-9);
    }
}
