//! Pure m-mode states in a truncated Fock basis.
//!
//! Amplitudes are stored densely in row-major multi-index order: for
//! `modes = m` and per-mode cutoff `N` the flat index of `(n_1, ..., n_m)` is
//! `sum_i n_i * (N+1)^(m-1-i)`. [`MultiIndexOrder`] holds the cached tables
//! that group flat indices by total photon number.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance on missing norm after construction.
pub const DEFAULT_TAIL_TOL: f64 = 1e-10;
/// Largest dense tensor (in complex entries) that [`tensor`] will build.
pub const DEFAULT_TENSOR_BUDGET: usize = 20_000_000;
/// Default single-mode cutoff.
pub const DEFAULT_CUTOFF_SINGLE: usize = 40;
/// Default per-mode cutoff for two-mode states.
pub const DEFAULT_CUTOFF_TWO: usize = 25;
/// Projection weights below this are reported as degenerate.
pub const DEGENERATE_WEIGHT: f64 = 1e-15;

// Amplitudes below this fraction of the largest one are ignored when fixing
// the global phase.
const PHASE_REL_THRESHOLD: f64 = 1e-14;

/// Number of amplitudes for `modes` modes at per-mode `cutoff`, or `None` on
/// overflow.
pub fn dimension(modes: usize, cutoff: usize) -> Option<usize> {
    (cutoff + 1).checked_pow(u32::try_from(modes).ok()?)
}

/// Deterministic enumeration of multi-indices together with the
/// total-photon-number strata used by the rank projector.
#[derive(Debug)]
pub struct MultiIndexOrder {
    modes: usize,
    cutoff: usize,
    totals: Vec<u32>,
    strata: Vec<Vec<usize>>,
}

impl MultiIndexOrder {
    fn build(modes: usize, cutoff: usize) -> Self {
        let dim = dimension(modes, cutoff).expect("dimension overflow");
        let base = cutoff + 1;
        let mut totals = vec![0u32; dim];
        let mut strata = vec![Vec::new(); modes * cutoff + 1];
        for (flat, total) in totals.iter_mut().enumerate() {
            let mut rest = flat;
            let mut s = 0usize;
            for _ in 0..modes {
                s += rest % base;
                rest /= base;
            }
            *total = s as u32;
            strata[s].push(flat);
        }
        Self {
            modes,
            cutoff,
            totals,
            strata,
        }
    }

    /// Shared, lazily built table for `(modes, cutoff)`.
    pub fn get(modes: usize, cutoff: usize) -> Arc<MultiIndexOrder> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<MultiIndexOrder>>>> =
            OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard
            .entry((modes, cutoff))
            .or_insert_with(|| Arc::new(MultiIndexOrder::build(modes, cutoff)))
            .clone()
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn len(&self) -> usize {
        self.totals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.totals.is_empty()
    }

    /// Total photon number |n| of a flat index.
    pub fn total(&self, flat: usize) -> usize {
        self.totals[flat] as usize
    }

    /// Flat indices with exactly `s` photons, ascending.
    pub fn stratum(&self, s: usize) -> &[usize] {
        self.strata.get(s).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn max_total(&self) -> usize {
        self.modes * self.cutoff
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let base = self.cutoff + 1;
        let mut idx = vec![0; self.modes];
        let mut rest = flat;
        for slot in idx.iter_mut().rev() {
            *slot = rest % base;
            rest /= base;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> Option<usize> {
        if idx.len() != self.modes || idx.iter().any(|&n| n > self.cutoff) {
            return None;
        }
        Some(idx.iter().fold(0, |acc, &n| acc * (self.cutoff + 1) + n))
    }
}

/// Pure state with complex amplitudes on a truncated Fock basis.
///
/// Immutable once built; every operation returns a new value.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    modes: usize,
    cutoff: usize,
    amps: Vec<Complex64>,
    norm_leak: f64,
}

impl FockState {
    /// Wraps raw amplitudes without normalizing.
    pub fn from_amps(modes: usize, cutoff: usize, amps: Vec<Complex64>) -> Result<Self> {
        if modes == 0 {
            return Err(Error::Dimension("a state needs at least one mode".into()));
        }
        let dim = dimension(modes, cutoff)
            .ok_or_else(|| Error::Dimension("dimension overflows usize".into()))?;
        if amps.len() != dim {
            return Err(Error::Dimension(format!(
                "expected {dim} amplitudes for {modes} modes at cutoff {cutoff}, got {}",
                amps.len()
            )));
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::InvalidSpec("non-finite amplitude".into()));
        }
        Ok(Self {
            modes,
            cutoff,
            amps,
            norm_leak: 0.0,
        })
    }

    /// Normalizes `amps`, fixes the global phase and records `norm_leak`, the
    /// mass the truncation is known to have dropped.
    pub fn normalized(
        modes: usize,
        cutoff: usize,
        amps: Vec<Complex64>,
        norm_leak: f64,
    ) -> Result<Self> {
        let mut state = Self::from_amps(modes, cutoff, amps)?;
        let norm = state.norm_sqr().sqrt();
        if norm < 1e-150 {
            return Err(Error::InvalidSpec("cannot normalize a zero vector".into()));
        }
        let inv = 1.0 / norm;
        state.amps.iter_mut().for_each(|a| *a *= inv);
        state.canonicalize_phase();
        state.norm_leak = norm_leak.clamp(0.0, 1.0);
        Ok(state)
    }

    pub fn vacuum(modes: usize, cutoff: usize) -> Self {
        Self::basis(cutoff, &vec![0; modes]).expect("vacuum is always valid")
    }

    /// The Fock basis state `|n_1, ..., n_m>`.
    pub fn basis(cutoff: usize, photons: &[usize]) -> Result<Self> {
        let modes = photons.len();
        if photons.iter().any(|&n| n > cutoff) {
            return Err(Error::ParameterRange(format!(
                "photon numbers {photons:?} exceed cutoff {cutoff}"
            )));
        }
        let dim = dimension(modes, cutoff)
            .ok_or_else(|| Error::Dimension("dimension overflows usize".into()))?;
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        let flat = photons.iter().fold(0, |acc, &n| acc * (cutoff + 1) + n);
        amps[flat] = Complex64::new(1.0, 0.0);
        Self::from_amps(modes, cutoff, amps)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn amps(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amps(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_leak(&self) -> f64 {
        self.norm_leak
    }

    pub fn with_norm_leak(mut self, leak: f64) -> Self {
        self.norm_leak = leak.clamp(0.0, 1.0);
        self
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn order(&self) -> Arc<MultiIndexOrder> {
        MultiIndexOrder::get(self.modes, self.cutoff)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Amplitude at a multi-index; zero outside the truncation.
    pub fn amp(&self, photons: &[usize]) -> Complex64 {
        if photons.len() != self.modes || photons.iter().any(|&n| n > self.cutoff) {
            return Complex64::new(0.0, 0.0);
        }
        let flat = photons.iter().fold(0, |acc, &n| acc * (self.cutoff + 1) + n);
        self.amps[flat]
    }

    /// Mean total photon number (unnormalized expectation).
    pub fn mean_photon_number(&self) -> f64 {
        let order = self.order();
        self.amps
            .iter()
            .enumerate()
            .map(|(i, a)| a.norm_sqr() * order.total(i) as f64)
            .sum()
    }

    /// Makes the first significant amplitude real and positive.
    pub fn canonicalize_phase(&mut self) {
        let max = self.amps.iter().map(|a| a.norm()).fold(0.0, f64::max);
        if max == 0.0 {
            return;
        }
        if let Some(first) = self
            .amps
            .iter()
            .find(|a| a.norm() > PHASE_REL_THRESHOLD * max)
        {
            let phase = first.conj() / first.norm();
            self.amps.iter_mut().for_each(|a| *a *= phase);
        }
    }

    /// Zero-pads to a larger per-mode cutoff.
    pub fn padded(&self, cutoff: usize) -> Result<Self> {
        if cutoff < self.cutoff {
            return Err(Error::ParameterRange(format!(
                "cannot pad cutoff {} down to {cutoff}",
                self.cutoff
            )));
        }
        if cutoff == self.cutoff {
            return Ok(self.clone());
        }
        let dim = dimension(self.modes, cutoff)
            .ok_or_else(|| Error::Dimension("dimension overflows usize".into()))?;
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        let order = self.order();
        for (flat, a) in self.amps.iter().enumerate() {
            let idx = order.multi_index(flat);
            let target = idx.iter().fold(0, |acc, &n| acc * (cutoff + 1) + n);
            amps[target] = *a;
        }
        Ok(Self {
            modes: self.modes,
            cutoff,
            amps,
            norm_leak: self.norm_leak,
        })
    }

    /// Restricts to a smaller per-mode cutoff, returning the dropped mass.
    pub fn cropped(&self, cutoff: usize) -> (Self, f64) {
        if cutoff >= self.cutoff {
            return (self.clone(), 0.0);
        }
        let dim = dimension(self.modes, cutoff).expect("smaller dimension fits");
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        let order = self.order();
        let mut dropped = 0.0;
        for (flat, a) in self.amps.iter().enumerate() {
            let idx = order.multi_index(flat);
            if idx.iter().all(|&n| n <= cutoff) {
                let target = idx.iter().fold(0, |acc, &n| acc * (cutoff + 1) + n);
                amps[target] = *a;
            } else {
                dropped += a.norm_sqr();
            }
        }
        (
            Self {
                modes: self.modes,
                cutoff,
                amps,
                norm_leak: self.norm_leak,
            },
            dropped,
        )
    }

    pub fn to_file(&self) -> StateFile {
        StateFile {
            modes: self.modes,
            cutoff: self.cutoff,
            amps: self.amps.iter().map(|a| [a.re, a.im]).collect(),
        }
    }

    pub fn from_file(file: &StateFile) -> Result<Self> {
        let amps = file
            .amps
            .iter()
            .map(|&[re, im]| Complex64::new(re, im))
            .collect();
        Self::from_amps(file.modes, file.cutoff, amps).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("state serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: StateFile =
            serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        Self::from_file(&file)
    }
}

/// On-disk layout of a state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    pub modes: usize,
    pub cutoff: usize,
    pub amps: Vec<[f64; 2]>,
}

fn common_cutoff<'a>(
    a: &'a FockState,
    b: &'a FockState,
) -> Result<(std::borrow::Cow<'a, FockState>, std::borrow::Cow<'a, FockState>)> {
    use std::borrow::Cow;
    if a.modes != b.modes {
        return Err(Error::Dimension(format!(
            "mode count mismatch: {} vs {}",
            a.modes, b.modes
        )));
    }
    let cutoff = a.cutoff.max(b.cutoff);
    let pa = if a.cutoff == cutoff {
        Cow::Borrowed(a)
    } else {
        Cow::Owned(a.padded(cutoff)?)
    };
    let pb = if b.cutoff == cutoff {
        Cow::Borrowed(b)
    } else {
        Cow::Owned(b.padded(cutoff)?)
    };
    Ok((pa, pb))
}

/// `<a|b>` over the common (zero-padded) truncation.
pub fn inner(a: &FockState, b: &FockState) -> Result<Complex64> {
    let (a, b) = common_cutoff(a, b)?;
    Ok(a.amps
        .iter()
        .zip(b.amps.iter())
        .map(|(x, y)| x.conj() * y)
        .sum())
}

/// Pure-state fidelity `|<a|b>|^2`.
pub fn fidelity(a: &FockState, b: &FockState) -> Result<f64> {
    Ok(inner(a, b)?.norm_sqr().min(1.0))
}

/// Trace distance between pure states, `sqrt(1 - F)`.
pub fn trace_distance_pure(a: &FockState, b: &FockState) -> Result<f64> {
    let f = fidelity(a, b)?;
    Ok((1.0 - f).max(0.0).sqrt().clamp(0.0, 1.0))
}

/// Tensor product with the default memory budget.
pub fn tensor(a: &FockState, b: &FockState) -> Result<FockState> {
    tensor_with_budget(a, b, DEFAULT_TENSOR_BUDGET)
}

/// Tensor product `a ⊗ b`; mode count adds and the smaller cutoff is padded.
pub fn tensor_with_budget(a: &FockState, b: &FockState, budget: usize) -> Result<FockState> {
    let cutoff = a.cutoff.max(b.cutoff);
    let modes = a.modes + b.modes;
    let entries = dimension(modes, cutoff).unwrap_or(usize::MAX);
    if entries > budget {
        return Err(Error::Capacity { entries, budget });
    }
    let a = a.padded(cutoff)?;
    let b = b.padded(cutoff)?;
    let mut amps = Vec::with_capacity(entries);
    for x in &a.amps {
        amps.extend(b.amps.iter().map(|y| x * y));
    }
    let leak = 1.0 - (1.0 - a.norm_leak) * (1.0 - b.norm_leak);
    Ok(FockState {
        modes,
        cutoff,
        amps,
        norm_leak: leak,
    })
}

/// `k`-fold tensor power.
pub fn tensor_power(psi: &FockState, k: usize) -> Result<FockState> {
    if k == 0 {
        return Err(Error::ParameterRange("tensor power needs k >= 1".into()));
    }
    let mut out = psi.clone();
    for _ in 1..k {
        out = tensor(&out, psi)?;
    }
    Ok(out)
}

/// Weight of `psi` on states with at most `n` photons in total.
pub fn rank_weight(psi: &FockState, n: usize) -> f64 {
    let order = psi.order();
    (0..=n.min(order.max_total()))
        .flat_map(|s| order.stratum(s).iter())
        .map(|&i| psi.amps[i].norm_sqr())
        .sum()
}

/// Result of projecting onto `|p| <= n`.
#[derive(Debug, Clone)]
pub struct Projection {
    pub weight: f64,
    /// Normalized projected state; `None` when the weight is degenerate.
    pub projected: Option<FockState>,
}

impl Projection {
    pub fn is_degenerate(&self) -> bool {
        self.projected.is_none()
    }
}

/// Projects onto total photon number at most `n`.
pub fn project_rank(psi: &FockState, n: usize) -> Result<Projection> {
    let order = psi.order();
    if n > order.max_total() {
        return Err(Error::ParameterRange(format!(
            "rank {n} exceeds modes*cutoff = {}",
            order.max_total()
        )));
    }
    let mut amps = vec![Complex64::new(0.0, 0.0); psi.dim()];
    let mut weight = 0.0;
    for s in 0..=n {
        for &i in order.stratum(s) {
            amps[i] = psi.amps[i];
            weight += psi.amps[i].norm_sqr();
        }
    }
    if weight < DEGENERATE_WEIGHT {
        return Ok(Projection {
            weight,
            projected: None,
        });
    }
    let projected = FockState::normalized(psi.modes, psi.cutoff, amps, 0.0)?;
    Ok(Projection {
        weight,
        projected: Some(projected),
    })
}
