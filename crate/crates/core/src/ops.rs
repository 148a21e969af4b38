//! Fock-basis actions of Gaussian unitaries.
//!
//! Conventions, fixed once for the whole crate:
//!
//! * `D(α) = exp(α a† − α* a)`
//! * `S(ξ) = exp(½(ξ a†² − ξ* a²))`, `ξ = r e^{iφ}`
//! * `R(φ) = exp(iφ a†a)`
//! * `BS(θ) = exp(θ(a_i† a_j − a_i a_j†))`, transmissivity `cos²θ`
//!
//! Circuits are always applied in Euler order `G = S D U`: the passive layer
//! first, then per-mode displacements, then per-mode real squeezers. Nothing
//! here builds a dense `(N+1)^m` operator.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{dimension, FockState};

pub type CMatrix = DMatrix<Complex64>;

/// Largest squeezing magnitude accepted by default.
pub const DEFAULT_R_MAX: f64 = 3.0;
/// Largest mass a circuit may push past the cutoff before the result is
/// rejected.
pub const DEFAULT_LEAK_TOL: f64 = 1e-6;
/// Identifier of the passive mesh layout written into circuit files.
pub const MESH_ID: &str = "rect-givens-v1";

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `<n|D(α)|k>` for `0 <= n, k <= cutoff`.
///
/// Uses `D[m,0] = α/√m D[m-1,0]` and
/// `D[m,n] = (√m D[m-1,n-1] − α* D[m,n-1]) / √n`, which follows from
/// `D a† = (a† − α*) D`.
pub fn displacement_matrix(alpha: Complex64, cutoff: usize) -> CMatrix {
    let dim = cutoff + 1;
    let sqrt: Vec<f64> = (0..=dim).map(|k| (k as f64).sqrt()).collect();
    let mut d = CMatrix::from_element(dim, dim, ZERO);
    d[(0, 0)] = Complex64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for m in 1..dim {
        d[(m, 0)] = alpha / sqrt[m] * d[(m - 1, 0)];
    }
    let ac = alpha.conj();
    for n in 1..dim {
        d[(0, n)] = -ac * d[(0, n - 1)] / sqrt[n];
        for m in 1..dim {
            d[(m, n)] = (sqrt[m] * d[(m - 1, n - 1)] - ac * d[(m, n - 1)]) / sqrt[n];
        }
    }
    d
}

/// `<n|S(r e^{iφ})|k>` with the default squeezing limit.
pub fn squeezing_matrix(r: f64, phase: f64, cutoff: usize) -> Result<CMatrix> {
    squeezing_matrix_with_limit(r, phase, cutoff, DEFAULT_R_MAX)
}

/// `<n|S(r e^{iφ})|k>`; only entries with `n ≡ k (mod 2)` are nonzero.
///
/// From `S a† = sech r · a† S − e^{−iφ} tanh r · S a`:
/// `S[m,n] = (sech r √m S[m-1,n-1] − e^{−iφ} tanh r √(n-1) S[m,n-2]) / √n`.
pub fn squeezing_matrix_with_limit(
    r: f64,
    phase: f64,
    cutoff: usize,
    r_max: f64,
) -> Result<CMatrix> {
    if !r.is_finite() || r.abs() > r_max {
        return Err(Error::ParameterRange(format!(
            "squeezing |r| = {} exceeds r_max = {r_max}",
            r.abs()
        )));
    }
    let dim = cutoff + 1;
    let sqrt: Vec<f64> = (0..=dim).map(|k| (k as f64).sqrt()).collect();
    let sech = 1.0 / r.cosh();
    let tanh = r.tanh();
    let e_plus = Complex64::from_polar(tanh, phase);
    let e_minus = Complex64::from_polar(tanh, -phase);
    let mut s = CMatrix::from_element(dim, dim, ZERO);
    s[(0, 0)] = Complex64::new(sech.sqrt(), 0.0);
    for m in (2..dim).step_by(2) {
        s[(m, 0)] = e_plus * (sqrt[m - 1] / sqrt[m]) * s[(m - 2, 0)];
    }
    for n in 1..dim {
        for m in 0..dim {
            if (m + n) % 2 == 1 {
                continue;
            }
            let mut v = ZERO;
            if m >= 1 {
                v += sech * sqrt[m] * s[(m - 1, n - 1)];
            }
            if n >= 2 {
                v -= e_minus * sqrt[n - 1] * s[(m, n - 2)];
            }
            s[(m, n)] = v / sqrt[n];
        }
    }
    Ok(s)
}

/// `diag(e^{inφ})`.
pub fn rotation_matrix(phi: f64, cutoff: usize) -> CMatrix {
    let diag: Vec<Complex64> = (0..=cutoff)
        .map(|n| Complex64::from_polar(1.0, n as f64 * phi))
        .collect();
    CMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag))
}

/// Applies a single-mode matrix to one mode of `psi`.
///
/// Returns the raw image (not renormalized) and the mass it lost relative to
/// `psi`.
pub fn apply_single_mode(matrix: &CMatrix, psi: &FockState, mode: usize) -> Result<(FockState, f64)> {
    let m = psi.modes();
    let n = psi.cutoff();
    if mode >= m {
        return Err(Error::Dimension(format!("mode {mode} out of range for {m} modes")));
    }
    if matrix.nrows() != n + 1 || matrix.ncols() != n + 1 {
        return Err(Error::Dimension(format!(
            "matrix is {}x{}, state cutoff is {n}",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    let amps = psi.amps();
    let mut out = vec![ZERO; amps.len()];
    let stride = dimension(m - 1 - mode, n).expect("fits");
    let block = stride * (n + 1);
    let mut col = vec![ZERO; n + 1];
    for outer in (0..amps.len()).step_by(block) {
        for inner in 0..stride {
            let base = outer + inner;
            for (k, c) in col.iter_mut().enumerate() {
                *c = amps[base + k * stride];
            }
            if col.iter().all(|c| *c == ZERO) {
                continue;
            }
            for row in 0..=n {
                let mut acc = ZERO;
                for (k, c) in col.iter().enumerate() {
                    acc += matrix[(row, k)] * c;
                }
                out[base + row * stride] = acc;
            }
        }
    }
    finish(psi, out)
}

fn finish(psi: &FockState, out: Vec<Complex64>) -> Result<(FockState, f64)> {
    let before = psi.norm_sqr();
    let after: f64 = out.iter().map(|a| a.norm_sqr()).sum();
    let leak = (before - after).max(0.0);
    let state = FockState::from_amps(psi.modes(), psi.cutoff(), out)?;
    let carried = psi.norm_leak() + leak;
    Ok((state.with_norm_leak(carried), leak))
}

/// Multiplies mode `mode` by `e^{iφ n}` in place of a matrix product.
pub fn apply_phase(phi: f64, psi: &FockState, mode: usize) -> Result<FockState> {
    let m = psi.modes();
    let n = psi.cutoff();
    if mode >= m {
        return Err(Error::Dimension(format!("mode {mode} out of range for {m} modes")));
    }
    let stride = dimension(m - 1 - mode, n).expect("fits");
    let phases: Vec<Complex64> = (0..=n)
        .map(|k| Complex64::from_polar(1.0, k as f64 * phi))
        .collect();
    let out = psi
        .amps()
        .iter()
        .enumerate()
        .map(|(flat, a)| a * phases[(flat / stride) % (n + 1)])
        .collect();
    Ok(FockState::from_amps(m, n, out)?.with_norm_leak(psi.norm_leak()))
}

/// Spectral data of the beamsplitter generator on the `s`-photon stratum.
///
/// On the basis `|k, s-k>` the generator is real antisymmetric tridiagonal;
/// conjugating by `diag(i^k)` turns it into `−i T` with `T` real symmetric,
/// so `BS(θ) = diag(i^k) Q e^{−iθΛ} Qᵀ diag(i^{−k})`.
struct StratumBlock {
    size: usize,
    /// Row-major eigenvectors.
    q: Vec<f64>,
    eigen: Vec<f64>,
}

fn stratum_block(s: usize) -> Arc<StratumBlock> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<StratumBlock>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(b) = cache.lock().unwrap_or_else(|e| e.into_inner()).get(&s) {
        return b.clone();
    }
    let built = Arc::new(build_stratum_block(s));
    cache
        .lock()
        .unwrap_or_else(|e| e.into_inner())
        .entry(s)
        .or_insert(built)
        .clone()
}

fn build_stratum_block(s: usize) -> StratumBlock {
    let size = s + 1;
    let mut t = DMatrix::<f64>::zeros(size, size);
    for k in 0..s {
        let b = (((k + 1) * (s - k)) as f64).sqrt();
        t[(k + 1, k)] = b;
        t[(k, k + 1)] = b;
    }
    let eig = SymmetricEigen::new(t);
    let mut pairs: Vec<(f64, usize)> = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .map(|(i, v)| (v, i))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut q = vec![0.0; size * size];
    let mut eigen = Vec::with_capacity(size);
    for (l, &(_, src)) in pairs.iter().enumerate() {
        // Spectrum of 2·J_x for spin s/2 is exactly {−s, −s+2, ..., s}.
        eigen.push(2.0 * l as f64 - s as f64);
        for k in 0..size {
            q[k * size + l] = eig.eigenvectors[(k, src)];
        }
    }
    StratumBlock { size, q, eigen }
}

fn i_pow(k: usize) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Beamsplitter `exp(θ(a_i† a_j − a_i a_j†))` on modes `(i, j)`.
///
/// Total photon number `n_i + n_j` is conserved; components pushed outside
/// the per-mode cutoff are dropped and recorded as leak.
pub fn beamsplitter_apply(theta: f64, psi: &FockState, modes: (usize, usize)) -> Result<FockState> {
    Ok(beamsplitter_apply_with_leak(theta, psi, modes)?.0)
}

pub fn beamsplitter_apply_with_leak(
    theta: f64,
    psi: &FockState,
    (i, j): (usize, usize),
) -> Result<(FockState, f64)> {
    let m = psi.modes();
    if i == j || i >= m || j >= m {
        return Err(Error::Dimension(format!(
            "invalid beamsplitter modes ({i}, {j}) for {m} modes"
        )));
    }
    let n = psi.cutoff();
    let stride_i = dimension(m - 1 - i, n).expect("fits");
    let stride_j = dimension(m - 1 - j, n).expect("fits");
    let amps = psi.amps();
    let mut out = vec![ZERO; amps.len()];
    let mut y = Vec::new();
    let mut phases = Vec::new();
    for base in 0..amps.len() {
        if !(base / stride_i).is_multiple_of(n + 1) || !(base / stride_j).is_multiple_of(n + 1) {
            continue;
        }
        for s in 0..=2 * n {
            let lo = s.saturating_sub(n);
            let hi = s.min(n);
            let at = |k: usize| base + k * stride_i + (s - k) * stride_j;
            if (lo..=hi).all(|k| amps[at(k)] == ZERO) {
                continue;
            }
            let block = stratum_block(s);
            let size = block.size;
            y.clear();
            y.resize(size, ZERO);
            for k in lo..=hi {
                let v = amps[at(k)] * i_pow(4 - k % 4);
                if v == ZERO {
                    continue;
                }
                let row = &block.q[k * size..(k + 1) * size];
                for (yl, q) in y.iter_mut().zip(row) {
                    *yl += v * q;
                }
            }
            phases.clear();
            phases.extend(block.eigen.iter().map(|&e| Complex64::from_polar(1.0, -theta * e)));
            for (yl, p) in y.iter_mut().zip(&phases) {
                *yl *= p;
            }
            for k in lo..=hi {
                let row = &block.q[k * size..(k + 1) * size];
                let acc: Complex64 = row.iter().zip(&y).map(|(q, yl)| yl * q).sum();
                out[at(k)] = acc * i_pow(k);
            }
        }
    }
    finish(psi, out)
}

/// Euler-form Gaussian unitary `G = S(r) D(α) U`.
///
/// The passive layer `U` is a layer of input phases on every mode followed by
/// a rectangular mesh of nearest-neighbour beamsplitters, each followed by a
/// phase on its upper mode: `m + 2·m(m−1)/2` angles in total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianCircuit {
    pub modes: usize,
    pub passive: Vec<f64>,
    #[serde(with = "complex_pairs")]
    pub alphas: Vec<Complex64>,
    pub rs: Vec<f64>,
    pub mesh: String,
}

mod complex_pairs {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = v.iter().map(|c| [c.re, c.im]).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(pairs.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
    }
}

/// Beamsplitter positions of the rectangular mesh, in application order.
pub fn mesh_pairs(modes: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(modes * modes.saturating_sub(1) / 2);
    for layer in 0..modes {
        let mut i = layer % 2;
        while i + 1 < modes {
            pairs.push((i, i + 1));
            i += 2;
        }
    }
    pairs
}

impl GaussianCircuit {
    pub fn identity(modes: usize) -> Self {
        Self {
            modes,
            passive: vec![0.0; Self::passive_len(modes)],
            alphas: vec![ZERO; modes],
            rs: vec![0.0; modes],
            mesh: MESH_ID.to_string(),
        }
    }

    pub fn passive_len(modes: usize) -> usize {
        modes + modes * modes.saturating_sub(1)
    }

    /// Length of the flat real parameter vector: passive angles, then
    /// `(Re α, Im α)` per mode, then `r` per mode.
    pub fn param_len(modes: usize) -> usize {
        Self::passive_len(modes) + 3 * modes
    }

    pub fn from_params(modes: usize, params: &[f64]) -> Result<Self> {
        if params.len() != Self::param_len(modes) {
            return Err(Error::Dimension(format!(
                "expected {} parameters for {modes} modes, got {}",
                Self::param_len(modes),
                params.len()
            )));
        }
        let np = Self::passive_len(modes);
        let passive = params[..np].to_vec();
        let alphas = (0..modes)
            .map(|k| Complex64::new(params[np + 2 * k], params[np + 2 * k + 1]))
            .collect();
        let rs = params[np + 2 * modes..].to_vec();
        Ok(Self {
            modes,
            passive,
            alphas,
            rs,
            mesh: MESH_ID.to_string(),
        })
    }

    pub fn to_params(&self) -> Vec<f64> {
        let mut p = self.passive.clone();
        for a in &self.alphas {
            p.push(a.re);
            p.push(a.im);
        }
        p.extend_from_slice(&self.rs);
        p
    }

    pub fn validate(&self, r_max: f64) -> Result<()> {
        if self.modes == 0 {
            return Err(Error::Dimension("circuit needs at least one mode".into()));
        }
        if self.passive.len() != Self::passive_len(self.modes)
            || self.alphas.len() != self.modes
            || self.rs.len() != self.modes
        {
            return Err(Error::Dimension("circuit parameter lengths do not match its mode count".into()));
        }
        if self.mesh != MESH_ID {
            return Err(Error::InvalidSpec(format!("unknown mesh '{}'", self.mesh)));
        }
        let finite = self.passive.iter().chain(self.rs.iter()).all(|x| x.is_finite())
            && self.alphas.iter().all(|a| a.re.is_finite() && a.im.is_finite());
        if !finite {
            return Err(Error::ParameterRange("non-finite circuit parameter".into()));
        }
        if let Some(r) = self.rs.iter().find(|r| r.abs() > r_max) {
            return Err(Error::ParameterRange(format!(
                "squeezing |r| = {} exceeds r_max = {r_max}",
                r.abs()
            )));
        }
        Ok(())
    }
}

/// Options for [`apply_circuit_with`].
#[derive(Debug, Clone, Copy)]
pub struct ApplyOptions {
    pub r_max: f64,
    pub leak_tol: f64,
}

impl Default for ApplyOptions {
    fn default() -> Self {
        Self {
            r_max: DEFAULT_R_MAX,
            leak_tol: DEFAULT_LEAK_TOL,
        }
    }
}

/// Image of a state under a circuit together with the truncation leak.
#[derive(Debug, Clone)]
pub struct CircuitImage {
    pub state: FockState,
    pub leak: f64,
}

/// Applies `G = S D U` with default options, rejecting leaky results.
pub fn apply_circuit(g: &GaussianCircuit, psi: &FockState) -> Result<FockState> {
    Ok(apply_circuit_with(g, psi, ApplyOptions::default())?.state)
}

pub fn apply_circuit_with(
    g: &GaussianCircuit,
    psi: &FockState,
    opts: ApplyOptions,
) -> Result<CircuitImage> {
    let image = apply_circuit_unchecked(g, psi, opts.r_max)?;
    if image.leak > opts.leak_tol {
        return Err(Error::Truncation {
            leak: image.leak,
            tol: opts.leak_tol,
        });
    }
    Ok(image)
}

/// Applies the circuit and reports the leak without judging it.
pub fn apply_circuit_unchecked(g: &GaussianCircuit, psi: &FockState, r_max: f64) -> Result<CircuitImage> {
    g.validate(r_max)?;
    if g.modes != psi.modes() {
        return Err(Error::Dimension(format!(
            "circuit acts on {} modes, state has {}",
            g.modes,
            psi.modes()
        )));
    }
    let m = g.modes;
    let n = psi.cutoff();
    let start = psi.norm_sqr();
    let mut state = psi.clone();
    for (mode, &phi) in g.passive[..m].iter().enumerate() {
        if phi != 0.0 {
            state = apply_phase(phi, &state, mode)?;
        }
    }
    for (k, &(i, j)) in mesh_pairs(m).iter().enumerate() {
        let theta = g.passive[m + 2 * k];
        let phi = g.passive[m + 2 * k + 1];
        if theta != 0.0 {
            state = beamsplitter_apply_with_leak(theta, &state, (i, j))?.0;
        }
        if phi != 0.0 {
            state = apply_phase(phi, &state, i)?;
        }
    }
    for (mode, &alpha) in g.alphas.iter().enumerate() {
        if alpha != ZERO {
            state = apply_single_mode(&displacement_matrix(alpha, n), &state, mode)?.0;
        }
    }
    for (mode, &r) in g.rs.iter().enumerate() {
        if r != 0.0 {
            let s = squeezing_matrix_with_limit(r, 0.0, n, r_max)?;
            state = apply_single_mode(&s, &state, mode)?.0;
        }
    }
    let leak = (start - state.norm_sqr()).max(0.0);
    let state = state.with_norm_leak(psi.norm_leak() + leak);
    Ok(CircuitImage { state, leak })
}

/// Fock-basis vectors `G†|p>` for `p = 0..=n` of a single-mode circuit,
/// truncated at `cutoff`.
///
/// `<p|G|ψ> = <G†p|ψ>`, so these vectors give every low-photon amplitude of
/// `Gψ` at `O(cutoff · n)` cost without forming any operator matrix. Entry
/// `m` of each vector only depends on entries `<= m`, so truncation does not
/// perturb the entries that are kept.
pub fn pulled_back_fock_vectors(
    g: &GaussianCircuit,
    n: usize,
    cutoff: usize,
) -> Result<Vec<Vec<Complex64>>> {
    if g.modes != 1 {
        return Err(Error::Dimension("pulled-back vectors need a single-mode circuit".into()));
    }
    Ok(pulled_back_mode_vectors(g.alphas[0], g.rs[0], g.passive[0], n, cutoff))
}

/// `(S(r) D(α) R(φ))† |p>` for `p = 0..=n`, truncated at `cutoff`.
pub fn pulled_back_mode_vectors(
    alpha: Complex64,
    r: f64,
    phi: f64,
    n: usize,
    cutoff: usize,
) -> Vec<Vec<Complex64>> {
    let dim = cutoff + 1;
    let sqrt: Vec<f64> = (0..=dim).map(|k| (k as f64).sqrt()).collect();

    // G†|0> = R(−φ) D(−α) S(−r) |0>.
    let beta = -alpha;
    let (c0, s0) = ((-r).cosh(), (-r).sinh());
    let gamma = c0 * beta - s0 * beta.conj();
    let mut chi = vec![ZERO; dim];
    let lead = (-beta.norm_sqr() / 2.0 + 0.5 * (-r).tanh() * beta.conj() * beta.conj()).exp();
    chi[0] = lead / c0.sqrt();
    for m in 0..cutoff {
        let mut next = gamma * chi[m];
        if m > 0 {
            next += s0 * sqrt[m] * chi[m - 1];
        }
        chi[m + 1] = next / (c0 * sqrt[m + 1]);
    }
    if phi != 0.0 {
        let step = Complex64::from_polar(1.0, -phi);
        let mut ph = Complex64::new(1.0, 0.0);
        for x in chi.iter_mut() {
            *x *= ph;
            ph *= step;
        }
    }

    // Raising p uses only lowering in m: with K = G†a†G,
    // (cosh r·K − sinh r·K†) = e^{−iφ}a† + α*, so
    // cosh r·√p χ_p = (e^{−iφ}a† + α*) χ_{p−1} + sinh r·√(p−1) χ_{p−2}.
    // The three-term form in a and a† cancels catastrophically for large |α|.
    let (c, s) = (r.cosh(), r.sinh());
    let up = Complex64::from_polar(1.0, -phi);
    let shift = alpha.conj();
    let mut out: Vec<Vec<Complex64>> = Vec::with_capacity(n + 1);
    out.push(chi);
    for p in 1..=n {
        let prev = &out[p - 1];
        let inv = 1.0 / (c * sqrt[p]);
        let mut next = vec![ZERO; dim];
        for m in 0..dim {
            let mut v = shift * prev[m];
            if m >= 1 {
                v += up * sqrt[m] * prev[m - 1];
            }
            next[m] = v;
        }
        if p >= 2 {
            let back = &out[p - 2];
            let w = s * sqrt[p - 1];
            for (x, b) in next.iter_mut().zip(back) {
                *x += w * b;
            }
        }
        for x in next.iter_mut() {
            *x *= inv;
        }
        out.push(next);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::fidelity;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ladder(cutoff: usize) -> CMatrix {
        let mut a = CMatrix::from_element(cutoff + 1, cutoff + 1, ZERO);
        for n in 1..=cutoff {
            a[(n - 1, n)] = c((n as f64).sqrt(), 0.0);
        }
        a
    }

    fn max_abs_diff(a: &CMatrix, b: &CMatrix, upto: usize) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..upto {
            for j in 0..upto {
                m = m.max((a[(i, j)] - b[(i, j)]).norm());
            }
        }
        m
    }

    #[test]
    fn displacement_vacuum_element() {
        let d = displacement_matrix(c(1.0, 0.0), 20);
        assert!((d[(0, 0)].re - (-0.5f64).exp()).abs() < 1e-15);
        assert!((d[(0, 0)].re - 0.6065306597126334).abs() < 1e-12);
        let alpha = c(0.7, -0.4);
        let d = displacement_matrix(alpha, 20);
        let expected = alpha * (-alpha.norm_sqr() / 2.0).exp();
        assert!((d[(1, 0)] - expected).norm() < 1e-15);
    }

    #[test]
    fn zero_parameters_give_identity() {
        let id = CMatrix::identity(11, 11);
        assert_eq!(displacement_matrix(ZERO, 10), id);
        assert_eq!(squeezing_matrix(0.0, 0.3, 10).unwrap(), id);
        assert_eq!(rotation_matrix(0.0, 10), id);
    }

    #[test]
    fn displacement_matches_generator_exponential() {
        let n = 60;
        let alpha = c(0.8, 0.5);
        let a = ladder(n);
        let generator = a.adjoint() * alpha - &a * alpha.conj();
        let brute = generator.exp();
        let d = displacement_matrix(alpha, n);
        assert!(max_abs_diff(&d, &brute, n / 2) < 1e-8);
    }

    #[test]
    fn squeezing_matches_generator_exponential() {
        // The truncated generator only converges on the low block once the
        // cutoff is well above it.
        let n = 160;
        for &(r, phase) in &[(1.0, 0.0), (-0.6, 0.9), (0.4, -2.0)] {
            let xi = Complex64::from_polar(r, phase);
            let a = ladder(n);
            let a2 = &a * &a;
            let generator = (a2.adjoint() * xi - &a2 * xi.conj()) * c(0.5, 0.0);
            let brute = generator.exp();
            let s = squeezing_matrix(r, phase, n).unwrap();
            assert!(max_abs_diff(&s, &brute, 40) < 1e-8, "r={r} phase={phase}");
        }
    }

    #[test]
    fn squeezing_vacuum_element_and_parity() {
        let s = squeezing_matrix(1.0, 0.0, 30).unwrap();
        assert!((s[(0, 0)].re - 1.0f64.cosh().powf(-0.5)).abs() < 1e-14);
        assert!((s[(0, 0)].re - 0.8050).abs() < 1e-4);
        for r in [0.1, 0.5, 1.5] {
            let s = squeezing_matrix(r, 0.3, 30).unwrap();
            assert_eq!(s[(1, 0)], ZERO);
        }
    }

    #[test]
    fn squeezing_range_is_enforced() {
        assert!(matches!(squeezing_matrix(3.5, 0.0, 10), Err(Error::ParameterRange(_))));
        assert!(squeezing_matrix_with_limit(3.5, 0.0, 10, 4.0).is_ok());
    }

    #[test]
    fn operator_matrices_are_unitary_on_low_block() {
        // (cutoff, block, matrix): the block is the range whose image still
        // fits below the cutoff.
        let cases = [
            (60, 30, displacement_matrix(c(1.5, -0.5), 60)),
            (60, 30, rotation_matrix(1.3, 60)),
            (120, 20, squeezing_matrix(0.5, 0.4, 120).unwrap()),
            (80, 30, squeezing_matrix(-0.3, 1.1, 80).unwrap()),
        ];
        for (n, block, m) in &cases {
            let prod = m.adjoint() * m;
            let id = CMatrix::identity(n + 1, n + 1);
            assert!(max_abs_diff(&prod, &id, *block) < 1e-8, "cutoff {n}");
        }
    }

    #[test]
    fn rotation_examples() {
        let one = FockState::basis(4, &[1]).unwrap();
        let (out, _) = apply_single_mode(&rotation_matrix(PI, 4), &one, 0).unwrap();
        assert!((out.amp(&[1]) - c(-1.0, 0.0)).norm() < 1e-15);
        let two = FockState::basis(4, &[2]).unwrap();
        let (out, _) = apply_single_mode(&rotation_matrix(PI / 2.0, 4), &two, 0).unwrap();
        assert!((out.amp(&[2]) - c(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn balanced_beamsplitter_on_single_photon() {
        let psi = FockState::basis(3, &[1, 0]).unwrap();
        let out = beamsplitter_apply(PI / 4.0, &psi, (0, 1)).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert!((out.amp(&[1, 0]) - c(h, 0.0)).norm() < 1e-14);
        // Sign fixed by the generator a_0† a_1 − a_0 a_1†.
        assert!((out.amp(&[0, 1]) - c(-h, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn beamsplitter_zero_angle_is_identity() {
        let psi = FockState::normalized(
            2,
            3,
            (0..16).map(|k| c((k as f64).cos(), (k as f64 * 0.3).sin())).collect(),
            0.0,
        )
        .unwrap();
        let out = beamsplitter_apply(0.0, &psi, (0, 1)).unwrap();
        for (a, b) in out.amps().iter().zip(psi.amps()) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn beamsplitter_matches_dense_exponential() {
        let n = 6;
        let a = ladder(n);
        let id = CMatrix::identity(n + 1, n + 1);
        let a0 = a.kronecker(&id);
        let a1 = id.kronecker(&a);
        let theta = 0.37;
        let generator = (a0.adjoint() * &a1 - &a0 * a1.adjoint()) * c(theta, 0.0);
        let u = generator.exp();
        let psi = FockState::normalized(
            2,
            n,
            (0..(n + 1) * (n + 1))
                .map(|k| {
                    let (i, j) = (k / (n + 1), k % (n + 1));
                    if i + j <= n {
                        c(((k * 7) % 5) as f64 - 2.0, ((k * 3) % 4) as f64 - 1.5)
                    } else {
                        ZERO
                    }
                })
                .collect(),
            0.0,
        )
        .unwrap();
        let v = nalgebra::DVector::from_column_slice(psi.amps());
        let dense = u * v;
        let out = beamsplitter_apply(theta, &psi, (0, 1)).unwrap();
        for (x, y) in out.amps().iter().zip(dense.iter()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn beamsplitter_rejects_bad_modes() {
        let psi = FockState::vacuum(2, 2);
        assert!(beamsplitter_apply(0.1, &psi, (0, 0)).is_err());
        assert!(beamsplitter_apply(0.1, &psi, (0, 2)).is_err());
    }

    #[test]
    fn displacing_vacuum_gives_coherent_state() {
        let cutoff = 40;
        let alpha = c(1.0, 0.0);
        let mut g = GaussianCircuit::identity(1);
        g.alphas[0] = alpha;
        let out = apply_circuit(&g, &FockState::vacuum(1, cutoff)).unwrap();
        // Coherent amplitudes e^{-|α|²/2} α^n / √n!.
        let mut amps = vec![ZERO; cutoff + 1];
        let mut term = (-alpha.norm_sqr() / 2.0).exp();
        for (n, a) in amps.iter_mut().enumerate() {
            if n > 0 {
                term *= alpha.re / (n as f64).sqrt();
            }
            *a = c(term, 0.0);
        }
        let coherent = FockState::from_amps(1, cutoff, amps).unwrap();
        assert!(fidelity(&out, &coherent).unwrap() >= 1.0 - 1e-10);
    }

    #[test]
    fn identity_circuit_leaves_state_unchanged() {
        let psi = FockState::basis(5, &[1, 2]).unwrap();
        let out = apply_circuit(&GaussianCircuit::identity(2), &psi).unwrap();
        assert_eq!(out.amps(), psi.amps());
    }

    #[test]
    fn circuit_reports_truncation_leak() {
        let mut g = GaussianCircuit::identity(1);
        g.alphas[0] = c(3.0, 0.0);
        let err = apply_circuit(&g, &FockState::vacuum(1, 5)).unwrap_err();
        assert!(matches!(err, Error::Truncation { .. }));
    }

    #[test]
    fn circuit_params_round_trip() {
        let p: Vec<f64> = (0..GaussianCircuit::param_len(3)).map(|k| k as f64 * 0.1).collect();
        let g = GaussianCircuit::from_params(3, &p).unwrap();
        assert_eq!(g.to_params(), p);
        assert_eq!(GaussianCircuit::passive_len(3), 9);
        assert_eq!(mesh_pairs(3).len(), 3);
        let json = serde_json::to_string(&g).unwrap();
        let back: GaussianCircuit = serde_json::from_str(&json).unwrap();
        assert_eq!(back, g);
        assert!(json.contains("\"mesh\":\"rect-givens-v1\""));
    }

    #[test]
    fn pulled_back_vectors_reproduce_forward_amplitudes() {
        let cutoff = 120;
        let g = GaussianCircuit::from_params(1, &[0.7, 0.4, -0.9, 0.6]).unwrap();
        let psi = FockState::normalized(
            1,
            cutoff,
            (0..=cutoff).map(|k| if k < 6 { c(1.0 / (k + 1) as f64, 0.2 * k as f64) } else { ZERO }).collect(),
            0.0,
        )
        .unwrap();
        let forward = apply_circuit(&g, &psi).unwrap();
        let pulled = pulled_back_fock_vectors(&g, 5, cutoff).unwrap();
        for (p, v) in pulled.iter().enumerate() {
            let amp: Complex64 = v.iter().zip(psi.amps()).map(|(x, y)| x.conj() * y).sum();
            assert!((amp - forward.amp(&[p])).norm() < 1e-10, "p = {p}");
            let norm: f64 = v.iter().map(|x| x.norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn pulled_back_vectors_stay_normalized_for_strong_parameters() {
        for params in [[3.21, 3.6, -2.85, 1.35], [4.71, -1.76, -0.12, 1.44], [1.0, 3.76, 0.13, -1.15]] {
            let g = GaussianCircuit::from_params(1, &params).unwrap();
            let pulled = pulled_back_fock_vectors(&g, 12, 1200).unwrap();
            for v in &pulled {
                let norm: f64 = v.iter().map(|x| x.norm_sqr()).sum();
                assert!((norm - 1.0).abs() < 1e-10, "{params:?}: {norm}");
            }
        }
    }
}
