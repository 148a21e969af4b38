//! Constructors for the state families used throughout the crate, each with
//! its known stellar rank.
//!
//! Quadrature convention: `x = (a + a†)/√2`, so `<n|x> = φ_n(x)` with `φ_n`
//! the normalized Hermite functions.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    tensor, FockState, DEFAULT_CUTOFF_SINGLE, DEFAULT_CUTOFF_TWO, DEFAULT_TAIL_TOL,
};
use crate::ops::{squeezing_matrix, CMatrix, DEFAULT_LEAK_TOL};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Extra Fock levels used when exponentiating a truncated generator; the
/// result is cropped back afterwards.
pub const EXPM_PADDING: usize = 20;

/// Working cutoff of the trisqueezed family when none is given.
pub const DEFAULT_CUTOFF_TRISQUEEZED: usize = 60;

/// The truncated trisqueezing exponential never converges in the tail (its
/// mass past the cutoff decays only algebraically), so the family gets its
/// own leak tolerance.
pub const TRISQUEEZED_LEAK_TOL: f64 = 1e-3;

/// Largest cutoff the automatic sizing will try for generator-exponential
/// families.
const MAX_AUTO_CUTOFF_EXPM: usize = 300;

/// Stellar rank of a pure state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rank {
    Finite(usize),
    Infinite,
}

impl Rank {
    pub fn finite(self) -> Option<usize> {
        match self {
            Rank::Finite(n) => Some(n),
            Rank::Infinite => None,
        }
    }

    fn add(self, other: Rank) -> Rank {
        match (self, other) {
            (Rank::Finite(a), Rank::Finite(b)) => Rank::Finite(a + b),
            _ => Rank::Infinite,
        }
    }
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rank::Finite(n) => write!(f, "{n}"),
            Rank::Infinite => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
}

impl std::str::FromStr for Parity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "even" | "+" => Ok(Parity::Even),
            "odd" | "-" => Ok(Parity::Odd),
            other => Err(Error::InvalidSpec(format!("parity must be `even` or `odd`, got `{other}`"))),
        }
    }
}

fn field<T: std::str::FromStr>(spec: &str, parts: &[&str], i: usize, name: &str) -> Result<T> {
    let raw = parts
        .get(i)
        .ok_or_else(|| Error::InvalidSpec(format!("`{spec}`: missing field {i} ({name})")))?;
    raw.trim()
        .parse()
        .map_err(|_| Error::InvalidSpec(format!("`{spec}`: field {i} ({name}) cannot be parsed from `{raw}`")))
}

fn list<T: std::str::FromStr>(spec: &str, raw: &str, i: usize, name: &str) -> Result<Vec<T>> {
    raw.split(',')
        .map(|x| {
            x.trim().parse().map_err(|_| {
                Error::InvalidSpec(format!("`{spec}`: field {i} ({name}) has a bad entry `{x}`"))
            })
        })
        .collect()
}

/// Compact form `family:arg:arg`, with `*` between product factors:
/// `fock:2`, `fock:1,1`, `coherent:1.2:0.5`, `cat:3:odd`, `gkp:0.1`,
/// `trisqueezed:0.15`, `cubic:0.15:0.5`, `binomial:1,1:4`, `fock:1*cat:2:odd`.
impl std::str::FromStr for StateSpec {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if spec.contains('*') {
            let factors = spec.split('*').map(str::parse).collect::<Result<Vec<StateSpec>>>()?;
            return Ok(StateSpec::product(factors));
        }
        let parts: Vec<&str> = spec.split(':').collect();
        let expect = |max: usize| {
            if parts.len() > max {
                Err(Error::InvalidSpec(format!("`{spec}`: expected at most {} field(s) after the family", max - 1)))
            } else {
                Ok(())
            }
        };
        match parts[0].trim().to_ascii_lowercase().as_str() {
            "fock" => {
                expect(2)?;
                let ns: Vec<usize> = list(spec, parts.get(1).copied().unwrap_or(""), 1, "photon numbers")?;
                Ok(if ns.len() == 1 {
                    StateSpec::fock(ns[0])
                } else {
                    StateSpec::product(ns.into_iter().map(StateSpec::fock).collect())
                })
            }
            "coherent" => {
                expect(3)?;
                let re: f64 = field(spec, &parts, 1, "Re α")?;
                let im: f64 = if parts.len() > 2 { field(spec, &parts, 2, "Im α")? } else { 0.0 };
                Ok(StateSpec::coherent(Complex64::new(re, im)))
            }
            "cat" => {
                expect(3)?;
                let alpha = field(spec, &parts, 1, "alpha")?;
                let parity = if parts.len() > 2 { field(spec, &parts, 2, "parity")? } else { Parity::Even };
                Ok(StateSpec::cat(alpha, parity))
            }
            "gkp" => {
                expect(3)?;
                let delta = field(spec, &parts, 1, "delta")?;
                let logical: u8 = if parts.len() > 2 { field(spec, &parts, 2, "logical")? } else { 0 };
                Ok(Family::Gkp { delta, logical }.into())
            }
            "trisqueezed" => {
                expect(2)?;
                Ok(StateSpec::trisqueezed(field(spec, &parts, 1, "t")?))
            }
            "cubic" | "cubic_phase" => {
                expect(3)?;
                let c = field(spec, &parts, 1, "c")?;
                let r = if parts.len() > 2 { field(spec, &parts, 2, "r")? } else { 0.0 };
                Ok(StateSpec::cubic_phase(c, r))
            }
            "binomial" => {
                expect(3)?;
                let coeffs = list(spec, parts.get(1).copied().unwrap_or(""), 1, "coefficients")?;
                let spacing = field(spec, &parts, 2, "spacing")?;
                Ok(Family::Binomial { coeffs, spacing }.into())
            }
            other => Err(Error::InvalidSpec(format!(
                "`{spec}`: unknown family `{other}` (fock, coherent, cat, gkp, trisqueezed, cubic, binomial)"
            ))),
        }
    }
}

/// A state family with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Fock { n: usize },
    Coherent { alpha: [f64; 2] },
    Cat { alpha: f64, parity: Parity },
    Gkp { delta: f64, logical: u8 },
    Trisqueezed { t: f64 },
    CubicPhase { c: f64, r: f64 },
    /// `Σ_k coeffs[k] |k·spacing>`, normalized.
    Binomial { coeffs: Vec<f64>, spacing: usize },
    /// `Σ (amp, n)` terms, normalized.
    Superposition { terms: Vec<(f64, usize)> },
    /// Tensor product of the factors, in mode order.
    Product { factors: Vec<StateSpec> },
}

/// A family plus an optional cutoff override.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpec {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,
}

impl From<Family> for StateSpec {
    fn from(family: Family) -> Self {
        Self { family, cutoff: None }
    }
}

impl StateSpec {
    pub fn fock(n: usize) -> Self {
        Family::Fock { n }.into()
    }

    pub fn coherent(alpha: Complex64) -> Self {
        Family::Coherent { alpha: [alpha.re, alpha.im] }.into()
    }

    pub fn cat(alpha: f64, parity: Parity) -> Self {
        Family::Cat { alpha, parity }.into()
    }

    pub fn gkp(delta: f64) -> Self {
        Family::Gkp { delta, logical: 0 }.into()
    }

    pub fn trisqueezed(t: f64) -> Self {
        Family::Trisqueezed { t }.into()
    }

    pub fn cubic_phase(c: f64, r: f64) -> Self {
        Family::CubicPhase { c, r }.into()
    }

    pub fn product(factors: Vec<StateSpec>) -> Self {
        Family::Product { factors }.into()
    }

    /// `k` copies of `self`.
    pub fn copies(self, k: usize) -> Self {
        if k == 1 {
            self
        } else {
            Self::product(vec![self; k])
        }
    }

    pub fn with_cutoff(mut self, cutoff: usize) -> Self {
        self.cutoff = Some(cutoff);
        self
    }

    pub fn modes(&self) -> usize {
        match &self.family {
            Family::Product { factors } => factors.iter().map(StateSpec::modes).sum(),
            _ => 1,
        }
    }

    pub fn declared_rank(&self) -> Rank {
        match &self.family {
            Family::Fock { n } => Rank::Finite(*n),
            Family::Coherent { .. } => Rank::Finite(0),
            Family::Cat { .. } | Family::Gkp { .. } => Rank::Infinite,
            Family::Trisqueezed { t } => {
                if *t == 0.0 {
                    Rank::Finite(0)
                } else {
                    Rank::Infinite
                }
            }
            Family::CubicPhase { c, .. } => {
                if *c == 0.0 {
                    Rank::Finite(0)
                } else {
                    Rank::Infinite
                }
            }
            Family::Binomial { coeffs, spacing } => Rank::Finite(
                coeffs.iter().rposition(|&c| c != 0.0).map_or(0, |k| k * spacing),
            ),
            Family::Superposition { terms } => Rank::Finite(
                terms.iter().filter(|(a, _)| *a != 0.0).map(|&(_, n)| n).max().unwrap_or(0),
            ),
            Family::Product { factors } => factors
                .iter()
                .fold(Rank::Finite(0), |acc, f| acc.add(f.declared_rank())),
        }
    }

    /// Short human-readable identifier, e.g. `cat(3,odd)`.
    pub fn id(&self) -> String {
        match &self.family {
            Family::Fock { n } => format!("fock({n})"),
            Family::Coherent { alpha } => format!("coherent({}{:+}i)", alpha[0], alpha[1]),
            Family::Cat { alpha, parity } => format!(
                "cat({alpha},{})",
                match parity {
                    Parity::Even => "even",
                    Parity::Odd => "odd",
                }
            ),
            Family::Gkp { delta, logical } => format!("gkp({delta},{logical})"),
            Family::Trisqueezed { t } => format!("trisqueezed({t})"),
            Family::CubicPhase { c, r } => format!("cubic_phase({c},{r})"),
            Family::Binomial { coeffs, spacing } => format!("binomial({coeffs:?},{spacing})"),
            Family::Superposition { terms } => {
                let parts: Vec<String> = terms.iter().map(|(a, n)| format!("{a}|{n}>")).collect();
                format!("superposition({})", parts.join("+"))
            }
            Family::Product { factors } => {
                let parts: Vec<String> = factors.iter().map(StateSpec::id).collect();
                parts.join("⊗")
            }
        }
    }

    /// Builds the normalized state.
    pub fn build(&self) -> Result<FockState> {
        match &self.family {
            Family::Product { factors } => {
                if factors.is_empty() {
                    return Err(Error::InvalidSpec("product needs at least one factor".into()));
                }
                let mut out: Option<FockState> = None;
                for f in factors {
                    let f = match self.cutoff {
                        Some(c) => f.clone().with_cutoff(c),
                        None => f.clone(),
                    };
                    let mut s = f.build()?;
                    if self.cutoff.is_none() {
                        s = trim_trailing_zeros(s);
                    }
                    out = Some(match out {
                        None => s,
                        Some(acc) => tensor(&acc, &s)?,
                    });
                }
                let state = out.expect("non-empty product");
                let floor = default_cutoff(state.modes());
                if self.cutoff.is_none() && state.cutoff() < floor {
                    state.padded(floor)
                } else {
                    Ok(state)
                }
            }
            family => build_single(family, self.cutoff),
        }
    }
}

/// Crops a single-mode state to its last nonzero amplitude.
fn trim_trailing_zeros(state: FockState) -> FockState {
    if state.modes() != 1 {
        return state;
    }
    let last = state.amps().iter().rposition(|a| *a != ZERO).unwrap_or(0);
    if last == state.cutoff() {
        state
    } else {
        state.cropped(last).0
    }
}

fn default_cutoff(modes: usize) -> usize {
    match modes {
        1 => DEFAULT_CUTOFF_SINGLE,
        2 => DEFAULT_CUTOFF_TWO,
        _ => 0,
    }
}

fn build_single(family: &Family, cutoff: Option<usize>) -> Result<FockState> {
    match family {
        Family::Fock { n } => make_fock(*n, cutoff.unwrap_or(DEFAULT_CUTOFF_SINGLE.max(*n))),
        Family::Coherent { alpha } => make_coherent(Complex64::new(alpha[0], alpha[1]), cutoff),
        Family::Cat { alpha, parity } => make_cat(*alpha, *parity, cutoff),
        Family::Gkp { delta, logical } => make_gkp(*delta, *logical, cutoff),
        Family::Trisqueezed { t } => make_trisqueezed(*t, cutoff.unwrap_or(DEFAULT_CUTOFF_TRISQUEEZED)),
        Family::CubicPhase { c, r } => make_cubic_phase(*c, *r, cutoff),
        Family::Binomial { coeffs, spacing } => {
            let terms: Vec<(f64, usize)> =
                coeffs.iter().enumerate().map(|(k, &c)| (c, k * spacing)).collect();
            make_superposition(&terms, cutoff)
        }
        Family::Superposition { terms } => make_superposition(terms, cutoff),
        Family::Product { .. } => unreachable!("handled by StateSpec::build"),
    }
}

/// `|n>` at the given cutoff.
pub fn make_fock(n: usize, cutoff: usize) -> Result<FockState> {
    FockState::basis(cutoff, &[n])
}

/// Normalized `Σ amp |n>`; the cutoff defaults to the larger of the highest
/// index and the single-mode default.
pub fn make_superposition(terms: &[(f64, usize)], cutoff: Option<usize>) -> Result<FockState> {
    if terms.is_empty() {
        return Err(Error::InvalidSpec("superposition needs at least one term".into()));
    }
    let top = terms.iter().map(|&(_, n)| n).max().unwrap_or(0);
    let cutoff = cutoff.unwrap_or(DEFAULT_CUTOFF_SINGLE.max(top));
    if top > cutoff {
        return Err(Error::ParameterRange(format!(
            "photon number {top} exceeds cutoff {cutoff}"
        )));
    }
    let mut amps = vec![ZERO; cutoff + 1];
    for &(a, n) in terms {
        amps[n] += a;
    }
    FockState::normalized(1, cutoff, amps, 0.0)
}

/// `log|<n|α>|` for `n = 0..=cutoff`.
fn coherent_log_magnitudes(modulus: f64, cutoff: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(cutoff + 1);
    let mut l = -modulus * modulus / 2.0;
    out.push(l);
    let lm = modulus.ln();
    for n in 1..=cutoff {
        l += lm - 0.5 * (n as f64).ln();
        out.push(l);
    }
    out
}

/// Smallest cutoff whose Poisson tail for mean `mean` is below `tol`.
fn poisson_cutoff(mean: f64, tol: f64) -> usize {
    if mean == 0.0 {
        return 0;
    }
    let mut log_p = -mean;
    let mut cum = log_p.exp();
    let mut n = 0usize;
    while n as f64 <= mean || 1.0 - cum > tol {
        n += 1;
        log_p += mean.ln() - (n as f64).ln();
        cum += log_p.exp();
        if n > 100_000 {
            break;
        }
    }
    n
}

fn resolve_cutoff(needed: usize, cutoff: Option<usize>, tail: impl Fn(usize) -> f64) -> Result<usize> {
    match cutoff {
        None => Ok(needed),
        Some(c) => {
            let leak = tail(c);
            if leak > DEFAULT_TAIL_TOL {
                Err(Error::Truncation {
                    leak,
                    tol: DEFAULT_TAIL_TOL,
                })
            } else {
                Ok(c)
            }
        }
    }
}

fn poisson_tail(mean: f64, cutoff: usize) -> f64 {
    let logs = coherent_log_magnitudes(mean.sqrt(), cutoff);
    (1.0 - logs.iter().map(|l| (2.0 * l).exp()).sum::<f64>()).max(0.0)
}

/// Coherent state `|α>`; the cutoff is sized so the tail stays below the
/// default tail tolerance.
pub fn make_coherent(alpha: Complex64, cutoff: Option<usize>) -> Result<FockState> {
    if !alpha.re.is_finite() || !alpha.im.is_finite() {
        return Err(Error::ParameterRange("non-finite coherent amplitude".into()));
    }
    let mean = alpha.norm_sqr();
    let needed = poisson_cutoff(mean, DEFAULT_TAIL_TOL).max(DEFAULT_CUTOFF_SINGLE);
    let cutoff = resolve_cutoff(needed, cutoff, |c| poisson_tail(mean, c))?;
    let logs = coherent_log_magnitudes(alpha.norm(), cutoff);
    let phase = alpha.arg();
    let amps: Vec<Complex64> = logs
        .iter()
        .enumerate()
        .map(|(n, l)| if alpha.norm() == 0.0 && n > 0 { ZERO } else { Complex64::from_polar(l.exp(), n as f64 * phase) })
        .collect();
    let leak = poisson_tail(mean, cutoff);
    FockState::normalized(1, cutoff, amps, leak)
}

/// Cat state `∝ |α> ± |−α>` for real `α > 0`.
pub fn make_cat(alpha: f64, parity: Parity, cutoff: Option<usize>) -> Result<FockState> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::ParameterRange(format!("cat amplitude must be real and > 0, got {alpha}")));
    }
    let mean = alpha * alpha;
    let needed = poisson_cutoff(mean, DEFAULT_TAIL_TOL).max(DEFAULT_CUTOFF_SINGLE);
    let cutoff = resolve_cutoff(needed, cutoff, |c| poisson_tail(mean, c))?;
    let logs = coherent_log_magnitudes(alpha, cutoff);
    let keep = match parity {
        Parity::Even => 0,
        Parity::Odd => 1,
    };
    // Drop the common e^{-α²/2} so small odd cats stay representable.
    let shift = mean / 2.0;
    let amps: Vec<Complex64> = logs
        .iter()
        .enumerate()
        .map(|(n, l)| {
            if n % 2 == keep {
                Complex64::new((l + shift).exp(), 0.0)
            } else {
                ZERO
            }
        })
        .collect();
    let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    if !(norm.is_finite() && norm > 1e-300) {
        return Err(Error::InvalidSpec(format!("cat state with α = {alpha} does not normalize")));
    }
    FockState::normalized(1, cutoff, amps, poisson_tail(mean, cutoff))
}

/// `φ_n(x)` for `n = 0..=cutoff`, with a running log scale so large `|x|`
/// neither underflows nor overflows.
pub fn hermite_functions(x: f64, cutoff: usize) -> Vec<f64> {
    let mut out = vec![0.0; cutoff + 1];
    let mut log_scale = -x * x / 2.0 - 0.25 * PI.ln();
    let mut prev = 0.0;
    let mut cur = 1.0;
    out[0] = log_scale.exp();
    for n in 1..=cutoff {
        let nf = n as f64;
        let next = (2.0 / nf).sqrt() * x * cur - ((nf - 1.0) / nf).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > 1e150 {
            prev *= 1e-150;
            cur *= 1e-150;
            log_scale += 150.0 * std::f64::consts::LN_10;
        }
        out[n] = if log_scale < -745.0 { 0.0 } else { cur * log_scale.exp() };
    }
    out
}

/// Unnormalized finite-energy GKP amplitudes `e^{−Δ² n} Σ_k φ_n(x_k)` on the
/// grid `x_k = (2k + logical)√π`. Odd photon numbers vanish by symmetry and
/// are set to exactly zero.
fn gkp_amplitudes(delta: f64, logical: u8, cutoff: usize) -> Vec<f64> {
    let spacing = 2.0 * PI.sqrt();
    let offset = f64::from(logical) * PI.sqrt();
    // Hermite functions up to `cutoff` are negligible a few units past the
    // turning point √(2N+1).
    let reach = (2.0 * cutoff as f64 + 1.0).sqrt() + 12.0;
    let kmax = (reach / spacing).ceil() as i64 + 1;
    let mut amps = vec![0.0; cutoff + 1];
    for k in -kmax..=kmax {
        let x = k as f64 * spacing + offset;
        if x.abs() > reach {
            continue;
        }
        let h = hermite_functions(x, cutoff);
        for (a, v) in amps.iter_mut().zip(h) {
            *a += v;
        }
    }
    for (n, a) in amps.iter_mut().enumerate() {
        if n % 2 == 1 {
            *a = 0.0;
        } else {
            *a *= (-delta * delta * n as f64).exp();
        }
    }
    amps
}

/// Cutoff at which the GKP envelope's tail certainly lies far below `tol`.
fn gkp_reference_cutoff(delta: f64, tol: f64) -> usize {
    (((1.0 / tol).ln() + 25.0) / (2.0 * delta * delta)).ceil() as usize + 50
}

/// `Σ_{n > N} |c_n|²` of the normalized GKP state, from a reference build.
pub fn gkp_tail_mass(delta: f64, logical: u8, cutoff: usize) -> Result<f64> {
    check_gkp_params(delta, logical)?;
    let reference = gkp_reference_cutoff(delta, DEFAULT_TAIL_TOL).max(cutoff + 1);
    let amps = gkp_amplitudes(delta, logical, reference);
    let total: f64 = amps.iter().map(|a| a * a).sum();
    let tail: f64 = amps[cutoff + 1..].iter().map(|a| a * a).sum();
    Ok(tail / total)
}

fn check_gkp_params(delta: f64, logical: u8) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::ParameterRange(format!("GKP Δ must lie in (0, 1), got {delta}")));
    }
    if logical > 1 {
        return Err(Error::ParameterRange(format!("GKP logical value must be 0 or 1, got {logical}")));
    }
    Ok(())
}

/// Finite-energy GKP state `e^{−Δ² n̂}` applied to the ideal comb of the
/// given logical value. The cutoff is sized so the tail mass is below the
/// default tail tolerance; an explicit cutoff that cannot hold it fails.
pub fn make_gkp(delta: f64, logical: u8, cutoff: Option<usize>) -> Result<FockState> {
    check_gkp_params(delta, logical)?;
    let reference = gkp_reference_cutoff(delta, DEFAULT_TAIL_TOL);
    let full = gkp_amplitudes(delta, logical, reference.max(cutoff.unwrap_or(0) + 1));
    let total: f64 = full.iter().map(|a| a * a).sum();
    let tail_after = |c: usize| -> f64 { full[c + 1..].iter().map(|a| a * a).sum::<f64>() / total };
    let cutoff = match cutoff {
        Some(c) => {
            let leak = tail_after(c);
            if leak > DEFAULT_TAIL_TOL {
                return Err(Error::Truncation {
                    leak,
                    tol: DEFAULT_TAIL_TOL,
                });
            }
            c
        }
        None => {
            let mut c = reference;
            let mut tail = tail_after(c);
            while c > 0 {
                let extra = full[c] * full[c] / total;
                if tail + extra > DEFAULT_TAIL_TOL {
                    break;
                }
                tail += extra;
                c -= 1;
            }
            c.max(DEFAULT_CUTOFF_SINGLE)
        }
    };
    let leak = tail_after(cutoff);
    let amps = full[..=cutoff].iter().map(|&a| Complex64::new(a, 0.0)).collect();
    FockState::normalized(1, cutoff, amps, leak)
}

fn ladder(dim: usize) -> CMatrix {
    let mut a = CMatrix::from_element(dim, dim, ZERO);
    for n in 1..dim {
        a[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    a
}

/// `exp(generator)·v` at `cutoff + EXPM_PADDING`, cropped to `cutoff`.
/// Returns the cropped amplitudes and the mass left in the padding.
fn expm_apply_cropped(generator: &CMatrix, v: &[Complex64], cutoff: usize) -> (Vec<Complex64>, f64) {
    let u = generator.exp();
    let full = &u * nalgebra::DVector::from_column_slice(v);
    let kept: Vec<Complex64> = full.iter().take(cutoff + 1).copied().collect();
    let total: f64 = full.iter().map(|x| x.norm_sqr()).sum();
    let head: f64 = kept.iter().map(|x| x.norm_sqr()).sum();
    (kept, (total - head).max(0.0))
}

/// `exp(t a†³ − t a³)|0>` built at `cutoff + EXPM_PADDING` and cropped.
///
/// The cropped mass is recorded as `norm_leak`; it may not exceed
/// [`TRISQUEEZED_LEAK_TOL`].
pub fn make_trisqueezed(t: f64, cutoff: usize) -> Result<FockState> {
    make_trisqueezed_with_tol(t, cutoff, TRISQUEEZED_LEAK_TOL)
}

pub fn make_trisqueezed_with_tol(t: f64, cutoff: usize, leak_tol: f64) -> Result<FockState> {
    if !t.is_finite() {
        return Err(Error::ParameterRange("non-finite triplicity".into()));
    }
    let (amps, leak) = trisqueezed_raw(t, cutoff);
    if leak > leak_tol {
        return Err(Error::Truncation { leak, tol: leak_tol });
    }
    FockState::normalized(1, cutoff, amps, leak)
}

/// Cropped amplitudes of the padded trisqueezing exponential and the mass
/// that fell into the padding.
pub fn trisqueezed_raw(t: f64, cutoff: usize) -> (Vec<Complex64>, f64) {
    let dim = cutoff + EXPM_PADDING + 1;
    let a = ladder(dim);
    let ad = a.adjoint();
    let a3 = &a * &a * &a;
    let ad3 = &ad * &ad * &ad;
    let generator = ad3 * Complex64::new(t, 0.0) - a3 * Complex64::new(t, 0.0);
    let mut vac = vec![ZERO; dim];
    vac[0] = Complex64::new(1.0, 0.0);
    expm_apply_cropped(&generator, &vac, cutoff)
}

/// Cubic phase state `exp(i c x³) S(r)|0>`; the cutoff grows in steps of 20
/// until the cropped mass is below the default leak tolerance.
pub fn make_cubic_phase(c: f64, r: f64, cutoff: Option<usize>) -> Result<FockState> {
    if !(c.is_finite() && r.is_finite()) {
        return Err(Error::ParameterRange("non-finite cubic phase parameters".into()));
    }
    let tol = DEFAULT_LEAK_TOL;
    let mut n = cutoff.unwrap_or(DEFAULT_CUTOFF_SINGLE);
    loop {
        let (amps, leak) = cubic_phase_raw(c, r, n)?;
        if leak <= tol {
            return FockState::normalized(1, n, amps, leak);
        }
        if cutoff.is_some() || n + 20 > MAX_AUTO_CUTOFF_EXPM {
            return Err(Error::Truncation { leak, tol });
        }
        n += 20;
    }
}

fn cubic_phase_raw(c: f64, r: f64, cutoff: usize) -> Result<(Vec<Complex64>, f64)> {
    let dim = cutoff + EXPM_PADDING + 1;
    let s = squeezing_matrix(r, 0.0, dim - 1)?;
    let vac: Vec<Complex64> = s.column(0).iter().copied().collect();
    let a = ladder(dim);
    let x = (&a + a.adjoint()) * Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let x3 = &x * &x * &x;
    let generator: DMatrix<Complex64> = x3 * Complex64::new(0.0, c);
    Ok(expm_apply_cropped(&generator, &vac, cutoff))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::fidelity;

    #[test]
    fn fock_ranks() {
        assert_eq!(StateSpec::fock(0).declared_rank(), Rank::Finite(0));
        assert_eq!(StateSpec::fock(2).declared_rank(), Rank::Finite(2));
        assert_eq!(StateSpec::fock(1).copies(2).declared_rank(), Rank::Finite(2));
        assert_eq!(StateSpec::cat(3.0, Parity::Odd).declared_rank(), Rank::Infinite);
        let v = StateSpec::fock(0).build().unwrap();
        assert_eq!(v.amp(&[0]), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn fock_beyond_cutoff_fails() {
        assert!(StateSpec::fock(5).with_cutoff(3).build().is_err());
    }

    #[test]
    fn odd_cat_parity_and_small_amplitude_limit() {
        let cat = StateSpec::cat(1.0, Parity::Odd).build().unwrap();
        for n in (0..=cat.cutoff()).step_by(2) {
            assert_eq!(cat.amp(&[n]), ZERO);
        }
        let one = StateSpec::fock(1).build().unwrap();
        // |<1|cat>|² = α²/sinh(α²) for the odd cat.
        let want = 1.0 / 1.0f64.sinh();
        assert!((fidelity(&cat, &one).unwrap() - want).abs() < 1e-12);
        let tiny = StateSpec::cat(1e-8, Parity::Odd).build().unwrap();
        assert!((fidelity(&tiny, &one).unwrap() - 1.0).abs() < 1e-12);
        assert!(StateSpec::cat(0.0, Parity::Odd).build().is_err());
    }

    #[test]
    fn cat_matches_coherent_sum() {
        let a = 1.7;
        let plus = make_coherent(Complex64::new(a, 0.0), Some(60)).unwrap();
        let minus = make_coherent(Complex64::new(-a, 0.0), Some(60)).unwrap();
        let amps: Vec<Complex64> = plus.amps().iter().zip(minus.amps()).map(|(x, y)| x - y).collect();
        let direct = FockState::normalized(1, 60, amps, 0.0).unwrap();
        let cat = make_cat(a, Parity::Odd, Some(60)).unwrap();
        assert!((fidelity(&cat, &direct).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coherent_vacuum_overlap() {
        let s = StateSpec::coherent(Complex64::new(1.0, 0.0)).build().unwrap();
        let v = FockState::vacuum(1, 40);
        assert!((fidelity(&s, &v).unwrap() - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn hermite_functions_are_orthonormal() {
        // Gauss–Hermite style check by plain quadrature.
        let n = 12;
        let h = 0.01;
        let mut gram = vec![vec![0.0; n + 1]; n + 1];
        let mut x = -12.0;
        while x <= 12.0 {
            let v = hermite_functions(x, n);
            for i in 0..=n {
                for j in 0..=n {
                    gram[i][j] += v[i] * v[j] * h;
                }
            }
            x += h;
        }
        for (i, row) in gram.iter().enumerate() {
            for (j, g) in row.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-8, "{i},{j}: {g}");
            }
        }
    }

    #[test]
    fn gkp_even_support_and_tail() {
        let g = StateSpec::gkp(0.3).build().unwrap();
        for n in (1..=g.cutoff()).step_by(2) {
            assert_eq!(g.amp(&[n]), ZERO);
        }
        assert!(g.norm_leak() <= DEFAULT_TAIL_TOL);
        assert!(make_gkp(0.3, 0, Some(10)).is_err());
    }

    #[test]
    fn gkp_vacuum_overlap_grows_with_delta() {
        let v = FockState::vacuum(1, 40);
        let mut last = 0.0;
        for d in [0.2, 0.3, 0.4, 0.6, 0.8] {
            let f = fidelity(&StateSpec::gkp(d).build().unwrap(), &v).unwrap();
            assert!(f > last, "Δ = {d}: {f} <= {last}");
            last = f;
        }
    }

    #[test]
    fn gkp_cutoff_150_is_not_enough_for_small_delta() {
        // Mean photon number of the Δ = 0.1 state is about 1/(2Δ²) ≈ 50 and
        // the envelope decays only like e^{−2Δ² n}.
        let tail = gkp_tail_mass(0.1, 0, 150).unwrap();
        assert!(tail > 1e-2 && tail < 1e-1, "{tail}");
        let g = StateSpec::gkp(0.1).build().unwrap();
        assert!(g.cutoff() > 800 && g.cutoff() < 1400, "{}", g.cutoff());
        assert!((g.mean_photon_number() - 49.5).abs() < 1.0);
    }

    #[test]
    fn trisqueezed_grading_and_padded_unitarity() {
        let s = make_trisqueezed(0.15, 60).unwrap();
        for n in 0..=60 {
            if n % 3 != 0 {
                assert!(s.amp(&[n]).norm() < 1e-14);
            }
        }
        let (kept, leak) = trisqueezed_raw(0.15, 60);
        let head: f64 = kept.iter().map(|a| a.norm_sqr()).sum();
        assert!((head + leak - 1.0).abs() < 1e-8);
        let vac = make_trisqueezed(0.0, 40).unwrap();
        assert!((vac.amp(&[0]).re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cubic_phase_zero_is_squeezed_vacuum() {
        let s = make_cubic_phase(0.0, 0.5, None).unwrap();
        assert!((s.amp(&[0]).re - (1.0f64 / 0.5f64.cosh()).sqrt()).abs() < 1e-10);
        let mut mean_x = ZERO;
        for n in 0..s.cutoff() {
            mean_x += s.amp(&[n]).conj() * s.amp(&[n + 1]) * ((n + 1) as f64).sqrt();
        }
        assert!((2.0 * mean_x.re).abs() < 1e-12);
        assert_eq!(StateSpec::cubic_phase(0.1, 0.5).declared_rank(), Rank::Infinite);
    }

    #[test]
    fn superpositions() {
        let eps: f64 = 0.2;
        let s = make_superposition(&[((1.0 - eps).sqrt(), 0), (eps.sqrt(), 3)], None).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-14);
        let b = StateSpec::from(Family::Binomial { coeffs: vec![1.0, 1.0], spacing: 4 }).build().unwrap();
        assert!((b.amp(&[0]).re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((b.amp(&[4]).re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        let v = make_superposition(&[(1.0, 0), (0.0, 5)], None).unwrap();
        assert_eq!(v.amp(&[0]), Complex64::new(1.0, 0.0));
        assert!(make_superposition(&[], None).is_err());
    }

    #[test]
    fn product_spec() {
        let s = StateSpec::fock(1).copies(2).build().unwrap();
        assert_eq!(s.modes(), 2);
        assert_eq!(s.cutoff(), DEFAULT_CUTOFF_TWO);
        assert_eq!(s.amp(&[1, 1]), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn spec_json_round_trip() {
        let specs = vec![
            StateSpec::fock(2),
            StateSpec::cat(3.0, Parity::Odd).with_cutoff(90),
            StateSpec::gkp(0.1),
            StateSpec::fock(1).copies(2),
            StateSpec::from(Family::Superposition { terms: vec![(0.6, 0), (0.8, 2)] }),
        ];
        for s in specs {
            let text = serde_json::to_string(&s).unwrap();
            let back: StateSpec = serde_json::from_str(&text).unwrap();
            assert_eq!(back, s, "{text}");
        }
        let parsed: StateSpec = serde_json::from_str(r#"{"family":"cat","alpha":3,"parity":"odd"}"#).unwrap();
        assert_eq!(parsed, StateSpec::cat(3.0, Parity::Odd));
    }

    #[test]
    fn compact_specs_parse() {
        let cases: [(&str, StateSpec); 6] = [
            ("fock:2", StateSpec::fock(2)),
            ("fock:1,1", StateSpec::fock(1).copies(2)),
            ("cat:3:odd", StateSpec::cat(3.0, Parity::Odd)),
            ("gkp:0.1", StateSpec::gkp(0.1)),
            ("cubic:0.15:0.5", StateSpec::cubic_phase(0.15, 0.5)),
            ("fock:1*fock:1", StateSpec::fock(1).copies(2)),
        ];
        for (text, want) in cases {
            assert_eq!(text.parse::<StateSpec>().unwrap(), want, "{text}");
        }
        let err = "cat:x:odd".parse::<StateSpec>().unwrap_err().to_string();
        assert!(err.contains("field 1 (alpha)"), "{err}");
        assert!("squid:1".parse::<StateSpec>().is_err());
        assert!("fock:1:2".parse::<StateSpec>().is_err());
    }
}
