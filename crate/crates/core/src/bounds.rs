//! Conversion bounds and no-go regions in `(p, δ)` space.
//!
//! A Gaussian protocol turning `ρ^{⊗k}` into an approximation of `σ^{⊗m}`
//! with success probability `p` and trace-distance error `δ` must satisfy
//! `f_n*(ρ^{⊗k}) ≤ f_{⌊n/p⌋}*(σ^{⊗m}) + δ` for every `n`. The excluded set is
//! a union of half-open rectangles `(p_gt, 1] × [0, δ_lt)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::StellarProfile;

/// Slack added before flooring `n/p`, so representation error never rules a
/// conversion out.
pub const FLOOR_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    /// Profiles of the full multi-copy input and output.
    Multicopy,
    /// Single-copy input profile combined by sub-additivity.
    Subadditive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purity {
    /// Pure target: offset `δ`.
    Pure,
    /// Mixed target: offset `√(2δ)`.
    Mixed,
}

/// `k` copies of an input, `m` copies of a target, and how to bound them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversionScenario {
    pub input: String,
    pub input_copies: usize,
    pub target: String,
    pub target_copies: usize,
    pub flavor: Flavor,
    pub purity: Purity,
}

impl ConversionScenario {
    pub fn validate(&self) -> Result<()> {
        if self.input_copies == 0 || self.target_copies == 0 {
            return Err(Error::ParameterRange("copy counts must be at least 1".into()));
        }
        if self.flavor == Flavor::Subadditive {
            if self.target_copies != 1 {
                return Err(Error::InvalidSpec("the sub-additive bound needs a single target copy".into()));
            }
            if self.purity == Purity::Mixed {
                return Err(Error::InvalidSpec("the sub-additive bound is for pure states".into()));
            }
        }
        Ok(())
    }
}

/// `(p_gt, 1] × [0, delta_lt)`, generated by profile indices `(n, q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rectangle {
    pub p_gt: f64,
    pub delta_lt: f64,
    pub n: usize,
    pub q: usize,
    /// The extent stays positive after subtracting the optimizer spreads.
    pub certified: bool,
}

impl Rectangle {
    pub fn contains(&self, p: f64, delta: f64) -> bool {
        p > self.p_gt && p <= 1.0 && delta >= 0.0 && delta < self.delta_lt
    }
}

/// `δ*(p) = delta` for `p` just above `p`, up to the next point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub p: f64,
    pub delta: f64,
}

/// Which profiles a region came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRefs {
    pub input: String,
    pub input_n_max: usize,
    pub input_seed: u64,
    pub target: String,
    pub target_n_max: usize,
    pub target_seed: u64,
}

impl ProfileRefs {
    fn of(input: &StellarProfile, target: &StellarProfile) -> Self {
        Self {
            input: input.state.clone(),
            input_n_max: input.n_max,
            input_seed: input.seed,
            target: target.state.clone(),
            target_n_max: target.n_max,
            target_seed: target.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoGoRegion {
    pub scenario: ConversionScenario,
    pub rectangles: Vec<Rectangle>,
    pub boundary: Vec<BoundaryPoint>,
    pub profile_refs: ProfileRefs,
}

impl NoGoRegion {
    fn new(scenario: ConversionScenario, rectangles: Vec<Rectangle>, refs: ProfileRefs) -> Self {
        let boundary = envelope(&rectangles);
        Self {
            scenario,
            rectangles,
            boundary,
            profile_refs: refs,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rectangles.is_empty()
    }

    /// `δ*(p)`: the largest excluded error at success probability `p`.
    pub fn boundary_at(&self, p: f64) -> f64 {
        if !(p > 0.0 && p <= 1.0) {
            return 0.0;
        }
        self.rectangles
            .iter()
            .filter(|r| r.p_gt < p)
            .map(|r| r.delta_lt)
            .fold(0.0, f64::max)
    }

    pub fn excludes(&self, p: f64, delta: f64) -> bool {
        self.rectangles.iter().any(|r| r.contains(p, delta))
    }

    /// `δ*` for `p → 0⁺`, i.e. the error no protocol can go below.
    pub fn floor(&self) -> f64 {
        self.rectangles
            .iter()
            .filter(|r| r.p_gt <= 0.0)
            .map(|r| r.delta_lt)
            .fold(0.0, f64::max)
    }

    /// Smallest `p_gt` among rectangles excluding error `delta`.
    pub fn p_threshold(&self, delta: f64) -> Option<f64> {
        self.rectangles
            .iter()
            .filter(|r| r.delta_lt > delta)
            .map(|r| r.p_gt)
            .reduce(f64::min)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("region serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Non-decreasing step envelope of a set of rectangles.
fn envelope(rects: &[Rectangle]) -> Vec<BoundaryPoint> {
    let mut ps: Vec<f64> = rects.iter().map(|r| r.p_gt).collect();
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    let mut out: Vec<BoundaryPoint> = Vec::new();
    for p in ps {
        let delta = rects
            .iter()
            .filter(|r| r.p_gt <= p)
            .map(|r| r.delta_lt)
            .fold(0.0, f64::max);
        if out.last().is_none_or(|b| delta > b.delta) {
            out.push(BoundaryPoint { p, delta });
        }
    }
    out
}

/// `⌊n/p⌋` with [`FLOOR_SLACK`].
pub fn floor_ratio(n: usize, p: f64) -> usize {
    let v = (n as f64 / p + FLOOR_SLACK).floor();
    if v >= usize::MAX as f64 {
        usize::MAX
    } else {
        v as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Satisfied,
    Violated,
    /// The required output value lies beyond the profile cap.
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactCheck {
    pub n: usize,
    pub q: usize,
    pub f_in: f64,
    pub f_out: Option<f64>,
    pub status: CheckStatus,
}

/// Evaluates `f_n*(in) ≤ f_{⌊n/p⌋}*(out)` for every `n` of the input profile.
/// Any violation rules out exact conversion with probability `p`.
pub fn exact_bound_check(prof_in: &StellarProfile, prof_out: &StellarProfile, p: f64) -> Result<Vec<ExactCheck>> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::ParameterRange(format!("probability must lie in (0, 1], got {p}")));
    }
    Ok(prof_in
        .values
        .iter()
        .enumerate()
        .map(|(n, &f_in)| {
            let q = floor_ratio(n, p);
            let f_out = prof_out.value(q);
            let status = match f_out {
                None => CheckStatus::Inconclusive,
                Some(f) if f_in > f => CheckStatus::Violated,
                Some(_) => CheckStatus::Satisfied,
            };
            ExactCheck { n, q, f_in, f_out, status }
        })
        .collect())
}

pub fn exact_conversion_ruled_out(checks: &[ExactCheck]) -> bool {
    checks.iter().any(|c| c.status == CheckStatus::Violated)
}

fn extent(f_in: f64, f_out: f64, purity: Purity) -> f64 {
    let gap = f_in - f_out;
    match purity {
        Purity::Pure => gap,
        Purity::Mixed if gap > 0.0 => gap * gap / 2.0,
        Purity::Mixed => gap,
    }
}

/// Region from the profiles of `ρ^{⊗k}` and `σ^{⊗m}`:
/// `(n/q, 1] × [0, f_n*(in) − f_q*(out))`, the `n = 0` rectangle spanning all
/// of `(0, 1]`. Under the mixed flavor the extent is `(f_n − f_q)²/2`.
pub fn nogo_region_multicopy(
    scenario: ConversionScenario,
    prof_in: &StellarProfile,
    prof_out: &StellarProfile,
) -> Result<NoGoRegion> {
    scenario.validate()?;
    let purity = scenario.purity;
    let mut rects = Vec::new();
    for (n, &f_n) in prof_in.values.iter().enumerate() {
        let qs: Box<dyn Iterator<Item = usize>> = if n == 0 {
            Box::new(std::iter::once(0))
        } else {
            Box::new(n + 1..=prof_out.n_max)
        };
        for q in qs {
            let f_q = prof_out.values[q];
            let e = extent(f_n, f_q, purity);
            if e <= 0.0 {
                continue;
            }
            let worst = extent(f_n - prof_in.spread(n), f_q + prof_out.spread(q), purity);
            rects.push(Rectangle {
                p_gt: if n == 0 { 0.0 } else { n as f64 / q as f64 },
                delta_lt: e,
                n,
                q,
                certified: worst > 0.0,
            });
        }
    }
    Ok(NoGoRegion::new(scenario, rects, ProfileRefs::of(prof_in, prof_out)))
}

/// Region for `ψ^{⊗k} → φ` from single-copy profiles:
/// `(kn/q, 1] × [0, 1 − f_q*(φ) − k(1 − f_n*(ψ)))`.
pub fn nogo_region_subadditive(
    scenario: ConversionScenario,
    prof_single_in: &StellarProfile,
    prof_out: &StellarProfile,
) -> Result<NoGoRegion> {
    scenario.validate()?;
    let k = scenario.input_copies;
    let kf = k as f64;
    let mut rects = Vec::new();
    for (n, &f_n) in prof_single_in.values.iter().enumerate() {
        let qs: Box<dyn Iterator<Item = usize>> = if n == 0 {
            Box::new(std::iter::once(0))
        } else {
            Box::new(k * n + 1..=prof_out.n_max)
        };
        for q in qs {
            let f_q = prof_out.values[q];
            let e = 1.0 - f_q - kf * (1.0 - f_n);
            if e <= 0.0 {
                continue;
            }
            let worst = e - kf * prof_single_in.spread(n) - prof_out.spread(q);
            rects.push(Rectangle {
                p_gt: if n == 0 { 0.0 } else { (k * n) as f64 / q as f64 },
                delta_lt: e,
                n,
                q,
                certified: worst > 0.0,
            });
        }
    }
    Ok(NoGoRegion::new(scenario, rects, ProfileRefs::of(prof_single_in, prof_out)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// The claimed `(p, δ)` lies in the no-go region.
    Inside,
    Outside,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assessment {
    pub p: f64,
    pub fidelity: f64,
    pub delta: f64,
    pub verdict: Verdict,
    /// `δ − δ*(p)`: positive outside the region.
    pub delta_margin: f64,
    /// `p_threshold(δ) − p`: positive outside; absent when no rectangle
    /// excludes this error at any probability.
    pub p_margin: Option<f64>,
}

/// Places a protocol achieving fidelity `F` with probability `p` relative to
/// the region, using `δ = √(1 − F)`.
pub fn assess_protocol(region: &NoGoRegion, p: f64, fidelity: f64) -> Result<Assessment> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::ParameterRange(format!("probability must lie in (0, 1], got {p}")));
    }
    if !(0.0..=1.0).contains(&fidelity) {
        return Err(Error::ParameterRange(format!("fidelity must lie in [0, 1], got {fidelity}")));
    }
    let delta = (1.0 - fidelity).max(0.0).sqrt();
    let inside = region.excludes(p, delta);
    Ok(Assessment {
        p,
        fidelity,
        delta,
        verdict: if inside { Verdict::Inside } else { Verdict::Outside },
        delta_margin: delta - region.boundary_at(p),
        p_margin: region.p_threshold(delta).map(|t| t - p),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WlnCheck {
    pub ruled_out: bool,
    /// Probabilities above `w_in / w_out` are ruled out.
    pub p_threshold: f64,
}

/// Monotonicity of the Wigner logarithmic negativity: conversion with
/// probability `p` needs `w_in ≥ p · w_out`.
pub fn wln_bound_check(w_in: f64, w_out: f64, p: f64) -> Result<WlnCheck> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::ParameterRange(format!("probability must lie in (0, 1], got {p}")));
    }
    let p_threshold = if w_out > 0.0 { w_in / w_out } else { f64::INFINITY };
    Ok(WlnCheck {
        ruled_out: w_in < p * w_out,
        p_threshold,
    })
}
