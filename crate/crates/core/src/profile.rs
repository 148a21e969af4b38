//! Stellar fidelities `f_n*(ψ) = max_G Σ_{|p|≤n} |<p|Gψ>|²`, their profiles,
//! and the approximate stellar rank they determine.
//!
//! The maximization runs over Euler-form circuits `G = S D U` with a seeded
//! multistart Nelder–Mead search. Every reported value is attained by the
//! circuit stored next to it, so it is a lower bound on the true maximum.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::FockState;
use crate::ops::{
    apply_phase, beamsplitter_apply_with_leak, mesh_pairs, pulled_back_mode_vectors, GaussianCircuit,
    DEFAULT_LEAK_TOL, DEFAULT_R_MAX,
};
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::zoo::{Rank, StateSpec};

/// Values this close to 1 count as 1 when reading off ranks.
pub const UNITY_TOL: f64 = 1e-6;
/// Gap between the best and fifth-best start above which an entry is flagged.
pub const SPREAD_FLAG: f64 = 1e-4;
/// Extra Fock levels used to re-score an optimum.
pub const RESCORE_PAD: usize = 15;
/// Largest accepted change of a value on re-scoring.
pub const RESCORE_TOL: f64 = 1e-6;
pub const MAX_ESCALATIONS: usize = 2;
/// Entries at least this close to 1 are carried forward without optimizing.
const SATURATED: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Optimizer settings. `starts = 0` picks the default for the mode count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileOptions {
    pub seed: u64,
    pub starts: usize,
    pub ftol: f64,
    pub max_evals: usize,
    pub r_max: f64,
    /// Squeezing starts are drawn from `[-start_r, start_r]`.
    pub start_r: f64,
    pub leak_tol: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            starts: 0,
            ftol: 1e-8,
            max_evals: 2000,
            r_max: DEFAULT_R_MAX,
            start_r: 1.5,
            leak_tol: DEFAULT_LEAK_TOL,
        }
    }
}

impl ProfileOptions {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn starts_for(&self, modes: usize) -> usize {
        match (self.starts, modes) {
            (0, 1) => 32,
            (0, _) => 128,
            (s, _) => s,
        }
    }
}

/// The objective `Σ_{|p|≤n} |<p|Gψ>|²` for a fixed state and `n`.
///
/// The passive layer is applied to ψ directly (it preserves total photon
/// number); displacements and squeezers are pulled back onto the basis
/// vectors, so no mass is lost past the cutoff for single-mode states or for
/// multimode states whose photon number stays below the cutoff.
pub struct Objective {
    state: FockState,
    n: usize,
    r_max: f64,
    leak_tol: f64,
}

impl Objective {
    pub fn new(psi: &FockState, n: usize, r_max: f64, leak_tol: f64) -> Self {
        Self {
            state: crop_to_support(psi),
            n,
            r_max,
            leak_tol,
        }
    }

    pub fn modes(&self) -> usize {
        self.state.modes()
    }

    /// `None` marks an infeasible circuit (out of range or leaking).
    pub fn value(&self, g: &GaussianCircuit) -> Option<f64> {
        if g.validate(self.r_max).is_err() || g.modes != self.state.modes() {
            return None;
        }
        let m = g.modes;
        if m == 1 {
            let vecs = pulled_back_mode_vectors(g.alphas[0], g.rs[0], g.passive[0], self.n, self.state.cutoff());
            let total: f64 = vecs
                .iter()
                .map(|v| dot_conj(v, self.state.amps()).norm_sqr())
                .sum();
            return Some(total.min(1.0));
        }
        let mut state = self.state.clone();
        let mut leak = 0.0;
        for (mode, &phi) in g.passive[..m].iter().enumerate() {
            if phi != 0.0 {
                state = apply_phase(phi, &state, mode).ok()?;
            }
        }
        for (k, &(i, j)) in mesh_pairs(m).iter().enumerate() {
            let theta = g.passive[m + 2 * k];
            let phi = g.passive[m + 2 * k + 1];
            if theta != 0.0 {
                let (s, l) = beamsplitter_apply_with_leak(theta, &state, (i, j)).ok()?;
                state = s;
                leak += l;
            }
            if phi != 0.0 {
                state = apply_phase(phi, &state, i).ok()?;
            }
        }
        if leak > self.leak_tol {
            return None;
        }
        let cutoff = state.cutoff();
        let vecs: Vec<Vec<Vec<Complex64>>> = (0..m)
            .map(|k| pulled_back_mode_vectors(g.alphas[k], g.rs[k], 0.0, self.n, cutoff))
            .collect();
        Some(contract_low_photon_weight(state.amps(), m, cutoff, &vecs, self.n).min(1.0))
    }

    pub fn value_params(&self, x: &[f64]) -> Option<f64> {
        let g = GaussianCircuit::from_params(self.state.modes(), x).ok()?;
        self.value(&g)
    }
}

fn dot_conj(v: &[Complex64], amps: &[Complex64]) -> Complex64 {
    v.iter().zip(amps).map(|(x, y)| x.conj() * y).sum()
}

/// `Σ_{|p|≤n} |Σ_m Π_k conj(X_k[p_k][m_k]) T[m]|²`, contracting one mode at a
/// time from the last.
fn contract_low_photon_weight(
    amps: &[Complex64],
    modes: usize,
    cutoff: usize,
    vecs: &[Vec<Vec<Complex64>>],
    n: usize,
) -> f64 {
    let d = cutoff + 1;
    let p = n + 1;
    let mut dims = vec![d; modes];
    let mut cur: Vec<Complex64> = amps.to_vec();
    for axis in (0..modes).rev() {
        let inner: usize = dims[axis + 1..].iter().product();
        let outer: usize = dims[..axis].iter().product();
        let mut next = vec![ZERO; outer * p * inner];
        for o in 0..outer {
            for (q, xq) in vecs[axis].iter().enumerate().take(p) {
                let dst = &mut next[(o * p + q) * inner..(o * p + q + 1) * inner];
                for (j, x) in xq.iter().enumerate().take(d) {
                    let c = x.conj();
                    if c == ZERO {
                        continue;
                    }
                    let src = &cur[(o * d + j) * inner..(o * d + j + 1) * inner];
                    for (t, s) in dst.iter_mut().zip(src) {
                        *t += c * s;
                    }
                }
            }
        }
        dims[axis] = p;
        cur = next;
    }
    // `cur` is now indexed by p in row-major order over (n+1)^modes.
    let mut total = 0.0;
    let mut idx = vec![0usize; modes];
    for v in &cur {
        if idx.iter().sum::<usize>() <= n {
            total += v.norm_sqr();
        }
        for k in (0..modes).rev() {
            idx[k] += 1;
            if idx[k] < p {
                break;
            }
            idx[k] = 0;
        }
    }
    total
}

/// Drops empty Fock levels: single-mode states are cropped to their last
/// nonzero amplitude, multimode states to their largest occupied stratum
/// when that fits below the cutoff.
fn crop_to_support(psi: &FockState) -> FockState {
    let order = psi.order();
    let top = psi
        .amps()
        .iter()
        .enumerate()
        .filter(|(_, a)| **a != ZERO)
        .map(|(i, _)| order.total(i))
        .max()
        .unwrap_or(0);
    if top < psi.cutoff() {
        psi.cropped(top).0
    } else {
        psi.clone()
    }
}

/// Best value found for one `n`, with diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityEstimate {
    pub n: usize,
    pub value: f64,
    pub circuit: GaussianCircuit,
    pub starts: usize,
    pub evals: usize,
    /// Best minus fifth-best start value.
    pub spread: f64,
}

impl FidelityEstimate {
    pub fn flagged(&self) -> bool {
        self.spread > SPREAD_FLAG
    }
}

fn start_point(modes: usize, n: usize, start: usize, alpha_radius: f64, opts: &ProfileOptions) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(((n as u64) << 32) | start as u64);
    let tau = std::f64::consts::TAU;
    let mut x: Vec<f64> = (0..GaussianCircuit::passive_len(modes))
        .map(|_| rng.gen_range(0.0..tau))
        .collect();
    for _ in 0..modes {
        let rad = alpha_radius * rng.gen::<f64>().sqrt();
        let ang = rng.gen_range(0.0..tau);
        x.push(rad * ang.cos());
        x.push(rad * ang.sin());
    }
    for _ in 0..modes {
        x.push(rng.gen_range(-opts.start_r..=opts.start_r));
    }
    x
}

fn step_sizes(modes: usize) -> Vec<f64> {
    let mut s = vec![0.3; GaussianCircuit::passive_len(modes)];
    s.extend(std::iter::repeat_n(0.3, 2 * modes));
    s.extend(std::iter::repeat_n(0.2, modes));
    s
}

/// Multistart maximization of the objective for one `n`.
///
/// Start 0 is `warm` when given, start 1 the identity circuit, the rest are
/// random draws from a stream that depends only on `(seed, n, start)`. The
/// winner is the largest value, ties going to the lowest start index, so the
/// result does not depend on how starts are scheduled across threads.
pub fn optimize_level(
    psi: &FockState,
    n: usize,
    warm: Option<&[f64]>,
    opts: &ProfileOptions,
) -> Result<FidelityEstimate> {
    let objective = Objective::new(psi, n, opts.r_max, opts.leak_tol);
    let modes = psi.modes();
    let starts = opts.starts_for(modes).max(1);
    let alpha_radius = 2.0f64.max(psi.mean_photon_number().sqrt());
    let step = step_sizes(modes);
    let nm = NelderMeadOptions {
        ftol: opts.ftol,
        max_evals: opts.max_evals,
        ..NelderMeadOptions::default()
    };
    let runs: Vec<(f64, Vec<f64>, usize)> = (0..starts)
        .into_par_iter()
        .map(|s| {
            let x0 = match (s, warm) {
                (0, Some(w)) => w.to_vec(),
                (0, None) | (1, _) => GaussianCircuit::identity(modes).to_params(),
                _ => start_point(modes, n, s, alpha_radius, opts),
            };
            let m = nelder_mead(
                |x| objective.value_params(x).map_or(f64::INFINITY, |v| -v),
                &x0,
                &step,
                nm,
            );
            (-m.f, m.x, m.evals)
        })
        .collect();

    let evals = runs.iter().map(|r| r.2).sum();
    let mut best: Option<usize> = None;
    for (i, r) in runs.iter().enumerate() {
        if r.0.is_finite() && best.is_none_or(|b| r.0 > runs[b].0) {
            best = Some(i);
        }
    }
    let best = best.ok_or(Error::Infeasible { n })?;
    let mut values: Vec<f64> = runs.iter().map(|r| r.0).filter(|v| v.is_finite()).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    let spread = values[0] - values[values.len().min(5) - 1];
    let circuit = GaussianCircuit::from_params(modes, &runs[best].1)?;
    Ok(FidelityEstimate {
        n,
        value: runs[best].0.clamp(0.0, 1.0),
        circuit,
        starts,
        evals,
        spread,
    })
}

/// Lower bound on `f_n*(ψ)` together with the circuit attaining it.
pub fn stellar_fidelity(psi: &FockState, n: usize, opts: &ProfileOptions) -> Result<FidelityEstimate> {
    optimize_level(psi, n, None, opts)
}

/// Objective value of a given circuit, e.g. to re-score an optimum.
pub fn evaluate_circuit(psi: &FockState, n: usize, g: &GaussianCircuit, opts: &ProfileOptions) -> Option<f64> {
    Objective::new(psi, n, opts.r_max, opts.leak_tol).value(g)
}

/// Where the states of a profile come from. A spec can be rebuilt at larger
/// cutoffs for re-scoring; a bare state is zero-padded.
#[derive(Debug, Clone)]
pub enum ProfileInput {
    State(FockState),
    Spec(StateSpec),
}

impl ProfileInput {
    fn id(&self) -> String {
        match self {
            ProfileInput::State(s) => format!("state(modes={},cutoff={})", s.modes(), s.cutoff()),
            ProfileInput::Spec(s) => s.id(),
        }
    }
}

struct Ladder {
    input: ProfileInput,
    base: FockState,
    levels: Vec<Option<FockState>>,
}

impl Ladder {
    fn new(input: ProfileInput) -> Result<Self> {
        let base = match &input {
            ProfileInput::State(s) => s.clone(),
            ProfileInput::Spec(s) => s.build()?,
        };
        Ok(Self {
            input,
            base,
            levels: vec![None; MAX_ESCALATIONS + 2],
        })
    }

    /// The state at cutoff `base + level·RESCORE_PAD`.
    fn at(&mut self, level: usize) -> Result<&FockState> {
        if level == 0 {
            return Ok(&self.base);
        }
        if self.levels[level].is_none() {
            let cutoff = self.base.cutoff() + level * RESCORE_PAD;
            let s = match &self.input {
                ProfileInput::State(s) => s.padded(cutoff)?,
                ProfileInput::Spec(spec) => spec.clone().with_cutoff(cutoff).build()?,
            };
            self.levels[level] = Some(s);
        }
        Ok(self.levels[level].as_ref().expect("filled above"))
    }
}

/// One profile entry with its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub n: usize,
    /// Monotone envelope value reported in `values`.
    pub value: f64,
    /// Value returned by the optimizer for this `n` alone.
    pub raw: f64,
    pub circuit: GaussianCircuit,
    pub starts: usize,
    pub evals: usize,
    pub spread: f64,
    pub cutoff: usize,
    /// Change of the value when re-scored `RESCORE_PAD` levels higher.
    pub rescore_shift: f64,
    pub escalations: usize,
    /// Carried over from `n − 1`, whose value was already 1.
    pub inherited: bool,
}

impl ProfileEntry {
    pub fn flags(&self) -> Vec<String> {
        let mut f = Vec::new();
        if self.spread > SPREAD_FLAG {
            f.push("spread".to_string());
        }
        if self.rescore_shift > RESCORE_TOL {
            f.push("cutoff".to_string());
        }
        if self.inherited {
            f.push("inherited".to_string());
        }
        f
    }
}

/// `f_0*, …, f_{n_max}*` of a state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StellarProfile {
    pub state: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<StateSpec>,
    pub modes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_rank: Option<Rank>,
    pub n_max: usize,
    pub values: Vec<f64>,
    pub flags: Vec<Vec<String>>,
    pub entries: Vec<ProfileEntry>,
    pub seed: u64,
    pub opts: ProfileOptions,
}

impl StellarProfile {
    /// Value at `n`, if known: entries past a value of 1 are 1.
    pub fn value(&self, n: usize) -> Option<f64> {
        if n <= self.n_max {
            return Some(self.values[n]);
        }
        let last = *self.values.last()?;
        (last >= 1.0 - UNITY_TOL).then_some(1.0)
    }

    /// Optimizer spread at `n`; zero past a value of 1.
    pub fn spread(&self, n: usize) -> f64 {
        self.entries.get(n).map_or(0.0, |e| e.spread)
    }

    /// Smallest `n` whose value counts as 1.
    pub fn terminal_index(&self) -> Option<usize> {
        self.values.iter().position(|&v| v >= 1.0 - UNITY_TOL)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Profile of a bare state.
pub fn profile(psi: &FockState, n_max: usize, opts: &ProfileOptions) -> Result<StellarProfile> {
    profile_input(ProfileInput::State(psi.clone()), n_max, opts)
}

/// Profile of a state built from a spec; optima are re-scored on rebuilt,
/// larger-cutoff states.
pub fn profile_spec(spec: &StateSpec, n_max: usize, opts: &ProfileOptions) -> Result<StellarProfile> {
    profile_input(ProfileInput::Spec(spec.clone()), n_max, opts)
}

pub fn profile_input(input: ProfileInput, n_max: usize, opts: &ProfileOptions) -> Result<StellarProfile> {
    let id = input.id();
    let spec = match &input {
        ProfileInput::Spec(s) => Some(s.clone()),
        ProfileInput::State(_) => None,
    };
    let mut ladder = Ladder::new(input)?;
    let modes = ladder.base.modes();
    let max_n = modes * ladder.base.cutoff();
    if n_max > max_n {
        return Err(Error::ParameterRange(format!(
            "n_max = {n_max} exceeds modes*cutoff = {max_n}"
        )));
    }

    let mut entries: Vec<ProfileEntry> = Vec::with_capacity(n_max + 1);
    let mut level = 0usize;
    for n in 0..=n_max {
        if let Some(prev) = entries.last() {
            if prev.value >= 1.0 - SATURATED {
                let mut e = prev.clone();
                e.n = n;
                e.inherited = true;
                e.starts = 0;
                e.evals = 0;
                entries.push(e);
                continue;
            }
        }
        let warm: Option<Vec<f64>> = entries.last().map(|e| e.circuit.to_params());
        let mut escalations = 0;
        let (est, shift) = loop {
            let est = optimize_level(ladder.at(level)?, n, warm.as_deref(), opts)?;
            let check = ladder.at(level + 1)?;
            let rescored = evaluate_circuit(check, n, &est.circuit, opts).unwrap_or(f64::NAN);
            let shift = (rescored - est.value).abs();
            if shift <= RESCORE_TOL || level == MAX_ESCALATIONS || !shift.is_finite() {
                break (est, if shift.is_finite() { shift } else { f64::INFINITY });
            }
            escalations += 1;
            level += 1;
        };
        let prev = entries.last().map_or(0.0, |e| e.value);
        entries.push(ProfileEntry {
            n,
            value: est.value.max(prev),
            raw: est.value,
            cutoff: ladder.at(level)?.cutoff(),
            circuit: if est.value >= prev {
                est.circuit
            } else {
                entries.last().expect("prev exists").circuit.clone()
            },
            starts: est.starts,
            evals: est.evals,
            spread: est.spread,
            rescore_shift: shift,
            escalations,
            inherited: false,
        });
    }

    Ok(StellarProfile {
        state: id,
        declared_rank: spec.as_ref().map(StateSpec::declared_rank),
        spec,
        modes,
        n_max,
        values: entries.iter().map(|e| e.value).collect(),
        flags: entries.iter().map(ProfileEntry::flags).collect(),
        entries,
        seed: opts.seed,
        opts: opts.clone(),
    })
}

/// Value of an approximate stellar rank: exact, or censored at the profile
/// cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankValue {
    Exact(usize),
    AtLeast(usize),
}

/// `r*_ε = rank` for `ε ∈ [eps, eps of the previous breakpoint)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Breakpoint {
    pub eps: f64,
    pub rank: usize,
}

/// Right-continuous, non-increasing step function `ε ↦ r*_ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxRankFunction {
    /// Sorted by decreasing `eps`; the first has rank 0.
    pub breakpoints: Vec<Breakpoint>,
    /// Below the last breakpoint the rank exceeds the profile cap.
    pub censored: bool,
    pub n_max: usize,
}

impl ApproxRankFunction {
    pub fn rank_at(&self, eps: f64) -> RankValue {
        for b in &self.breakpoints {
            if eps >= b.eps {
                return RankValue::Exact(b.rank);
            }
        }
        if self.censored {
            RankValue::AtLeast(self.n_max + 1)
        } else {
            RankValue::Exact(self.breakpoints.last().map_or(0, |b| b.rank))
        }
    }

    /// `r*_0`: the stellar rank itself, or the censored cap.
    pub fn rank_at_zero(&self) -> RankValue {
        self.rank_at(0.0)
    }
}

/// `r*_ε = n` for `ε ∈ [1 − f_n, 1 − f_{n−1})`; thresholds within
/// [`UNITY_TOL`] of 0 are snapped to 0.
pub fn approx_rank_from_profile(p: &StellarProfile) -> ApproxRankFunction {
    let mut breakpoints: Vec<Breakpoint> = Vec::new();
    for (n, &f) in p.values.iter().enumerate() {
        let t = if f >= 1.0 - UNITY_TOL { 0.0 } else { 1.0 - f };
        match breakpoints.last() {
            Some(b) if t >= b.eps => {}
            _ => breakpoints.push(Breakpoint { eps: t, rank: n }),
        }
    }
    let censored = breakpoints.last().is_none_or(|b| b.eps > 0.0);
    ApproxRankFunction {
        breakpoints,
        censored,
        n_max: p.n_max,
    }
}

/// Lower bound on `f_{kn}*(ψ^{⊗k})` from the single-copy profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopyBound {
    pub n: usize,
    pub bound: f64,
}

/// Pairs `(k n, max(0, 1 − k(1 − f_n*)))`.
pub fn subadditive_profile_bound(single: &StellarProfile, k: usize) -> Vec<CopyBound> {
    let k = k.max(1);
    single
        .values
        .iter()
        .enumerate()
        .map(|(n, &f)| CopyBound {
            n: k * n,
            bound: (1.0 - k as f64 * (1.0 - f)).clamp(0.0, 1.0),
        })
        .collect()
}
