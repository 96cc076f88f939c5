//! Orchestration of the bound engines, invertibility and spectrum
//! decisions, and the machine-readable report formats.
//!
//! Engines run in a fixed order with step-counted budgets and feed a
//! monotone merge: lower entries carry the running maximum, upper entries
//! the running minimum. Nothing here depends on wall-clock time, so a
//! report is a pure function of (element, config, seed); timestamps are
//! values of the step counter.

use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::certify::{upper_bound_sequence, UpperCertificate};
use crate::error::{Error, Result};
use crate::exact::{ratio_json, to_f64_down, to_f64_up};
use crate::lower::{compression_lower_bound, moment_lower_sequence};
use crate::presentation::{StructureClass, DEFAULT_BALL_CAP};
use crate::rep::{quotient_rep_lower_bound, structured_rep_lower_bound};
use crate::ring::RingElement;
use crate::wordprob::enumerate_finite_quotients;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BoundsConfig {
    pub target_gap: f64,
    pub budget_steps: u64,
    /// SDP hierarchy levels; empty means radius and radius+1.
    pub levels: Vec<usize>,
    pub moment_n_max: usize,
    /// Support cap for the incremental powers; free-group supports grow
    /// exponentially, so this is deliberately far below the global cap.
    pub moment_support_cap: usize,
    pub compression_radius: usize,
    pub rep_dim: usize,
    pub trials: usize,
    pub seed: u64,
    /// User-asserted amenability: switches the reported norm kind to the
    /// reduced norm (Kesten equality). Never inferred.
    pub amenable: bool,
    pub sdp_tol: f64,
    pub sdp_max_iters: usize,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig {
            target_gap: 1e-6,
            budget_steps: 1_000_000_000,
            levels: Vec::new(),
            moment_n_max: 12,
            moment_support_cap: 200_000,
            compression_radius: 8,
            rep_dim: 4,
            trials: 16,
            seed: 0,
            amenable: false,
            sdp_tol: 1e-9,
            sdp_max_iters: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    Universal,
    /// ‖·‖_λ = ‖·‖_u under the user's amenability assertion.
    ReducedViaAmenable,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LowerEntry {
    /// Running maximum up to this entry.
    pub value: f64,
    /// This engine's own value.
    pub raw: f64,
    pub source: String,
    pub certified: bool,
    /// Exact square of the raw bound where the engine is exact.
    #[serde(with = "ratio_json::opt", default)]
    pub exact_square: Option<BigRational>,
    /// Step-counter value at emission.
    pub timestamp: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UpperEntry {
    /// Running minimum up to this entry.
    pub value: f64,
    pub raw: f64,
    pub source: String,
    pub level: usize,
    pub certified: bool,
    #[serde(with = "ratio_json::opt", default)]
    pub exact_square: Option<BigRational>,
    pub timestamp: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundsReport {
    pub presentation: String,
    pub element: String,
    pub norm_kind: NormKind,
    pub lower: Vec<LowerEntry>,
    pub upper: Vec<UpperEntry>,
    pub gap: f64,
    pub certificates: Vec<UpperCertificate>,
    pub annotations: Vec<String>,
    pub config: BoundsConfig,
    pub seed: u64,
    pub steps_used: u64,
}

impl BoundsReport {
    pub fn best_lower(&self) -> f64 {
        self.lower.last().map(|e| e.value).unwrap_or(0.0)
    }

    pub fn best_upper(&self) -> f64 {
        self.upper.last().map(|e| e.value).unwrap_or(f64::INFINITY)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(Error::from)
    }

    pub fn from_json(text: &str) -> Result<BoundsReport> {
        serde_json::from_str(text).map_err(Error::from)
    }

    /// CSV of `(index, p_n, q_n)`; rows past one sequence's end repeat its
    /// final running value.
    pub fn to_csv(&self) -> String {
        let rows = self.lower.len().max(self.upper.len());
        let mut out = String::from("index,p_n,q_n\n");
        for i in 0..rows {
            let p = self
                .lower
                .get(i)
                .or(self.lower.last())
                .map(|e| e.value.to_string())
                .unwrap_or_default();
            let q = self
                .upper
                .get(i)
                .or(self.upper.last())
                .map(|e| e.value.to_string())
                .unwrap_or_default();
            out.push_str(&format!("{i},{p},{q}\n"));
        }
        out
    }

    /// Re-derives the running extremes from the raw values; used to check
    /// a deserialized report has not been tampered with.
    pub fn monotone_consistent(&self) -> bool {
        let mut run = f64::NEG_INFINITY;
        for e in &self.lower {
            run = run.max(e.raw);
            if (e.value - run).abs() > 0.0 {
                return false;
            }
        }
        let mut run = f64::INFINITY;
        for e in &self.upper {
            run = run.min(e.raw);
            if (e.value - run).abs() > 0.0 {
                return false;
            }
        }
        true
    }
}

struct Merge {
    lower: Vec<LowerEntry>,
    upper: Vec<UpperEntry>,
    steps: u64,
    budget: u64,
    annotations: Vec<String>,
}

impl Merge {
    fn push_lower(&mut self, raw: f64, source: &str, certified: bool, sq: Option<BigRational>) {
        let value = self.lower.last().map(|e| e.value.max(raw)).unwrap_or(raw);
        self.lower.push(LowerEntry {
            value,
            raw,
            source: source.into(),
            certified,
            exact_square: sq,
            timestamp: self.steps,
        });
    }

    fn push_upper(
        &mut self,
        raw: f64,
        source: &str,
        level: usize,
        certified: bool,
        sq: Option<BigRational>,
    ) {
        let value = self.upper.last().map(|e| e.value.min(raw)).unwrap_or(raw);
        self.upper.push(UpperEntry {
            value,
            raw,
            source: source.into(),
            level,
            certified,
            exact_square: sq,
            timestamp: self.steps,
        });
    }

    fn gap(&self) -> f64 {
        match (self.lower.last(), self.upper.last()) {
            (Some(l), Some(u)) => u.value - l.value,
            _ => f64::INFINITY,
        }
    }

    fn charge(&mut self, cost: u64) -> bool {
        self.steps = self.steps.saturating_add(cost);
        self.steps < self.budget
    }
}

/// Runs every applicable engine and merges the bounds. Engine failures
/// become annotations, never hard errors: a report is always produced for
/// valid input.
pub fn run_norm_bounds(a: &RingElement, config: &BoundsConfig) -> Result<BoundsReport> {
    let p = a.presentation().clone();
    let mut m = Merge {
        lower: Vec::new(),
        upper: Vec::new(),
        steps: 0,
        budget: config.budget_steps,
        annotations: Vec::new(),
    };
    let generic = *p.class() == StructureClass::GenericPresented;

    // the ℓ¹ bound: always present so no report is one-sided
    let l1 = a.l1_norm();
    m.charge(a.support_size() as u64);
    m.push_upper(
        to_f64_up(&l1),
        "l1",
        0,
        true,
        Some(&l1 * &l1),
    );

    // representation lower bounds
    if m.gap() > config.target_gap && m.steps < m.budget {
        if generic {
            m.charge(1000);
            match enumerate_finite_quotients(&p, 3, 2000) {
                Ok(quotients) => {
                    let mut best: Option<(f64, usize)> = None;
                    for (i, q) in quotients.iter().enumerate() {
                        if let Ok((v, _)) = quotient_rep_lower_bound(a, q) {
                            if best.map(|(bv, _)| v > bv).unwrap_or(true) {
                                best = Some((v, i));
                            }
                        }
                    }
                    if let Some((v, _)) = best {
                        m.charge(quotients.len() as u64);
                        m.push_lower(v, "quotient", true, None);
                    }
                }
                Err(e) => m.annotations.push(format!("quotient engine: {e}")),
            }
        } else {
            m.charge(config.trials as u64 + 1);
            match structured_rep_lower_bound(a, config.rep_dim, config.trials, config.seed) {
                Ok((v, _)) => m.push_lower(v, "representation", true, None),
                Err(e) => m.annotations.push(format!("representation engine: {e}")),
            }
        }
    }

    // moment lower bounds (exact arithmetic, certified)
    if !generic && m.gap() > config.target_gap && m.steps < m.budget {
        match moment_lower_sequence(a, config.moment_n_max as u32, config.moment_support_cap) {
            Ok(seq) => {
                for entry in &seq.entries {
                    if !m.charge(entry.n as u64) {
                        m.annotations.push("budget exhausted during moments".into());
                        break;
                    }
                    m.push_lower(
                        entry.bound,
                        "moment",
                        true,
                        Some(&entry.bound_exact * &entry.bound_exact),
                    );
                }
                if seq.capped {
                    m.annotations.push("moment support cap reached".into());
                }
            }
            Err(e) => m.annotations.push(format!("moment engine: {e}")),
        }
    }

    // compression lower bound
    if !generic && m.gap() > config.target_gap && m.steps < m.budget {
        match compression_lower_bound(a, config.compression_radius, DEFAULT_BALL_CAP) {
            Ok(c) => {
                m.charge((c.basis_size * c.basis_size) as u64);
                m.push_lower(c.value, "compression", true, Some(c.exact_square.clone()));
            }
            Err(e) => m.annotations.push(format!("compression engine: {e}")),
        }
    }

    // SDP upper bounds, level by level with the running minimum
    if m.gap() > config.target_gap && m.steps < m.budget {
        let levels = if config.levels.is_empty() {
            let r = a.radius().max(1);
            vec![r, r + 1]
        } else {
            config.levels.clone()
        };
        let mut certificates = Vec::new();
        match upper_bound_sequence(a, &levels, config.sdp_tol, config.sdp_max_iters) {
            Ok(certs) => {
                for cert in certs {
                    let dim = cert.basis.len() as u64;
                    if !m.charge(dim * dim) {
                        m.annotations.push("budget exhausted during SDP levels".into());
                        break;
                    }
                    m.push_upper(
                        cert.bound,
                        "sos",
                        cert.level,
                        true,
                        Some(cert.bound_square.clone()),
                    );
                    certificates.push(cert);
                    if m.gap() <= config.target_gap {
                        break;
                    }
                }
            }
            Err(e) => m.annotations.push(format!("sos engine: {e}")),
        }
        return Ok(finish(a, &p, config, m, certificates));
    }

    Ok(finish(a, &p, config, m, Vec::new()))
}

fn finish(
    a: &RingElement,
    p: &crate::presentation::Presentation,
    config: &BoundsConfig,
    m: Merge,
    certificates: Vec<UpperCertificate>,
) -> BoundsReport {
    let gap = m.gap();
    BoundsReport {
        presentation: p.display(),
        element: a.to_string(),
        norm_kind: if config.amenable {
            NormKind::ReducedViaAmenable
        } else {
            NormKind::Universal
        },
        lower: m.lower,
        upper: m.upper,
        gap,
        certificates,
        annotations: m.annotations,
        config: config.clone(),
        seed: config.seed,
        steps_used: m.steps,
    }
}

pub const DEFAULT_INVERTIBILITY_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum InvertibilityVerdict {
    /// ‖Λ − a*a‖_u < Λ, witnessed by an exact certificate.
    Invertible {
        #[serde(with = "ratio_json")]
        lambda: BigRational,
        bound: f64,
        certificate: UpperCertificate,
    },
    /// A lower bound on ‖Λ − a*a‖_u reached Λ − tol. Uncertified as a
    /// non-invertibility proof: exact equality cannot be decided
    /// numerically.
    NotInvertibleWithinTolerance {
        #[serde(with = "ratio_json")]
        lambda: BigRational,
        lower: f64,
        tol: f64,
    },
    Unknown {
        #[serde(with = "ratio_json")]
        lambda: BigRational,
        lower: f64,
        upper: f64,
    },
}

/// Decides invertibility of `a` in the universal group C*-algebra by
/// bounding `‖Λ − a*a‖_u` with `Λ = ‖a‖₁²`: strictly below Λ means a*a is
/// bounded away from zero, hence a is invertible.
pub fn decide_invertibility(
    a: &RingElement,
    config: &BoundsConfig,
    tol: f64,
) -> Result<InvertibilityVerdict> {
    if a.support_size() == 0 {
        return Err(Error::Invalid("the zero element is not invertible".into()));
    }
    let l1 = a.l1_norm();
    let lambda = &l1 * &l1;
    let b = RingElement::from_scalar(a.presentation().clone(), lambda.clone())?
        .sub(&a.gram_square()?)?;

    let report = run_norm_bounds(&b, config)?;
    let lambda_f = to_f64_down(&lambda);

    // strict exact-rational comparison on the certified square
    let mut certs: Vec<UpperCertificate> = report.certificates.clone();
    if certs.is_empty() {
        // the bounds run may have stopped before the SDP engine (e.g. the
        // ℓ¹ bound already pinched the gap); fetch a certificate directly
        let levels = if config.levels.is_empty() {
            vec![b.radius().max(1)]
        } else {
            config.levels.clone()
        };
        if let Ok(seq) = upper_bound_sequence(&b, &levels, config.sdp_tol, config.sdp_max_iters) {
            certs.extend(seq);
        }
    }
    for cert in &certs {
        if cert.bound_square < &lambda * &lambda {
            return Ok(InvertibilityVerdict::Invertible {
                lambda,
                bound: cert.bound,
                certificate: cert.clone(),
            });
        }
    }
    let lower = report.best_lower();
    if lower >= lambda_f - tol {
        return Ok(InvertibilityVerdict::NotInvertibleWithinTolerance { lambda, lower, tol });
    }
    Ok(InvertibilityVerdict::Unknown { lambda, lower, upper: report.best_upper() })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumEnclosure {
    /// Interval containing the least spectral point μ₁.
    pub mu1: (f64, f64),
    /// Interval containing the greatest spectral point μ₂.
    pub mu2: (f64, f64),
}

/// Encloses the spectrum endpoints of a self-adjoint element: with
/// c = ‖a‖₁, both c + a and c − a are positive, so their norms are
/// c + μ₂ and c − μ₁ and the bound engines enclose each endpoint.
pub fn spectrum_interval(a: &RingElement, config: &BoundsConfig) -> Result<SpectrumEnclosure> {
    if !a.is_self_adjoint() {
        return Err(Error::NotSelfAdjoint);
    }
    let p = a.presentation().clone();
    let c = a.l1_norm();
    let c_f = c.to_f64().ok_or_else(|| Error::Invalid("l1 norm overflows f64".into()))?;
    let c_elem = RingElement::from_scalar(p, c.clone())?;

    let plus = c_elem.add(a)?; // ‖c + a‖ = c + μ₂
    let minus = c_elem.sub(a)?; // ‖c − a‖ = c − μ₁
    let rp = run_norm_bounds(&plus, config)?;
    let rm = run_norm_bounds(&minus, config)?;

    Ok(SpectrumEnclosure {
        mu1: (c_f - rm.best_upper(), c_f - rm.best_lower()),
        mu2: (rp.best_lower() - c_f, rp.best_upper() - c_f),
    })
}
