//! Single-mode Wigner functions and the Wigner logarithmic negativity
//! `WLN(ψ) = ln ∫|W_ψ(x, p)| dx dp`.
//!
//! Normalization: `W(x, p) = (1/π) <ψ| D(β) Π D(β)† |ψ>` with
//! `β = (x + ip)/√2` and `Π` the parity operator, so `∫W dx dp = 1` and
//! `W_{|1>}(0, 0) = −1/π`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::FockState;

/// Largest accepted change of the WLN between the full and the halved grid.
pub const PRECISION_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridOptions {
    /// Points per axis; must be odd (Simpson rule).
    pub resolution: usize,
    /// Half-width of the square grid; sized from `<n>` when absent.
    pub extent: Option<f64>,
    /// Largest `|W|` tolerated on the grid boundary.
    pub boundary_tol: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            resolution: 801,
            extent: None,
            boundary_tol: 1e-10,
        }
    }
}

/// `W` sampled on `[-L, L]²`; `values[i * resolution + j] = W(x_j, p_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub extent: f64,
    pub resolution: usize,
    pub values: Vec<f64>,
}

impl WignerGrid {
    pub fn axis(&self) -> Vec<f64> {
        linspace(self.extent, self.resolution)
    }

    fn step(&self) -> f64 {
        2.0 * self.extent / (self.resolution - 1) as f64
    }

    /// Simpson integral of `f(W)` over the grid, using every `stride`-th
    /// point per axis.
    fn integrate(&self, stride: usize, f: impl Fn(f64) -> f64) -> f64 {
        let n = (self.resolution - 1) / stride + 1;
        let h = self.step() * stride as f64;
        let w = simpson_weights(n);
        let mut total = 0.0;
        for (a, wa) in w.iter().enumerate() {
            let row = a * stride * self.resolution;
            let mut acc = 0.0;
            for (b, wb) in w.iter().enumerate() {
                acc += wb * f(self.values[row + b * stride]);
            }
            total += wa * acc;
        }
        total * h * h / 9.0
    }

    pub fn integral(&self) -> f64 {
        self.integrate(1, |v| v)
    }

    pub fn integral_abs(&self) -> f64 {
        self.integrate(1, f64::abs)
    }
}

fn linspace(extent: f64, n: usize) -> Vec<f64> {
    let h = 2.0 * extent / (n - 1) as f64;
    (0..n).map(|i| -extent + i as f64 * h).collect()
}

/// Composite Simpson weights `1, 4, 2, 4, …, 4, 1` (without `h/3`).
fn simpson_weights(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            }
        })
        .collect()
}

/// Amplitudes up to the last nonzero one.
fn support(psi: &FockState) -> Vec<Complex64> {
    let amps = psi.amps();
    let last = amps.iter().rposition(|a| a.norm_sqr() > 0.0).unwrap_or(0);
    amps[..=last].to_vec()
}

/// `W(x, p)` of the pure state with amplitudes `c`, by the Laguerre
/// recurrence over the matrix elements `W_{|m><n|}`; `scratch` must hold
/// `c.len()` entries.
fn wigner_point(c: &[Complex64], sqrt: &[f64], x: f64, p: f64, scratch: &mut [Complex64]) -> f64 {
    let m_dim = c.len();
    let a = Complex64::new(x, p) * std::f64::consts::FRAC_1_SQRT_2;
    let two_a = 2.0 * a;
    let two_ac = two_a.conj();
    let w = scratch;
    w[0] = Complex64::new((-2.0 * a.norm_sqr()).exp() / std::f64::consts::PI, 0.0);
    let rho = |m: usize, n: usize| c[m] * c[n].conj();
    let mut total = rho(0, 0).re * w[0].re;
    for n in 1..m_dim {
        w[n] = two_a * w[n - 1] / sqrt[n];
        total += 2.0 * (rho(0, n) * w[n]).re;
    }
    for m in 1..m_dim {
        let mut temp = w[m];
        w[m] = (two_ac * temp - sqrt[m] * w[m - 1]) / sqrt[m];
        total += (rho(m, m) * w[m]).re;
        for n in m + 1..m_dim {
            let next = (two_a * w[n - 1] - sqrt[m] * temp) / sqrt[n];
            temp = w[n];
            w[n] = next;
            total += 2.0 * (rho(m, n) * w[n]).re;
        }
    }
    total
}

fn check_single_mode(psi: &FockState) -> Result<()> {
    if psi.modes() != 1 {
        return Err(Error::Dimension(format!(
            "Wigner functions are single-mode; got {} modes (use the product helper)",
            psi.modes()
        )));
    }
    Ok(())
}

/// `W` at one phase-space point.
pub fn wigner_at(psi: &FockState, x: f64, p: f64) -> Result<f64> {
    check_single_mode(psi)?;
    let c = support(psi);
    let sqrt: Vec<f64> = (0..c.len()).map(|k| (k as f64).sqrt()).collect();
    let mut scratch = vec![Complex64::new(0.0, 0.0); c.len()];
    Ok(wigner_point(&c, &sqrt, x, p, &mut scratch))
}

fn default_extent(psi: &FockState) -> f64 {
    6.0f64.max(4.0 * (psi.mean_photon_number() + 1.0).sqrt())
}

fn boundary_max(c: &[Complex64], sqrt: &[f64], extent: f64, n: usize) -> f64 {
    let axis = linspace(extent, n);
    let mut scratch = vec![Complex64::new(0.0, 0.0); c.len()];
    let mut m: f64 = 0.0;
    for &t in &axis {
        for (x, p) in [(t, -extent), (t, extent), (-extent, t), (extent, t)] {
            m = m.max(wigner_point(c, sqrt, x, p, &mut scratch).abs());
        }
    }
    m
}

/// Samples `W` on a square grid. Without an explicit extent the grid grows
/// from `max(6, 4√(<n>+1))` until the boundary values drop below the
/// tolerance.
pub fn wigner(psi: &FockState, opts: &GridOptions) -> Result<WignerGrid> {
    check_single_mode(psi)?;
    if opts.resolution < 3 || opts.resolution.is_multiple_of(2) {
        return Err(Error::ParameterRange(format!(
            "grid resolution must be odd and at least 3, got {}",
            opts.resolution
        )));
    }
    let c = support(psi);
    let sqrt: Vec<f64> = (0..c.len()).map(|k| (k as f64).sqrt()).collect();
    let extent = match opts.extent {
        Some(l) => l,
        None => {
            let mut l = default_extent(psi);
            let mut tries = 0;
            while boundary_max(&c, &sqrt, l, opts.resolution) > opts.boundary_tol && tries < 20 {
                l *= 1.25;
                tries += 1;
            }
            l
        }
    };
    let axis = linspace(extent, opts.resolution);
    let values: Vec<f64> = axis
        .par_iter()
        .flat_map_iter(|&p| {
            let mut scratch = vec![Complex64::new(0.0, 0.0); c.len()];
            axis.iter()
                .map(|&x| wigner_point(&c, &sqrt, x, p, &mut scratch))
                .collect::<Vec<f64>>()
        })
        .collect();
    Ok(WignerGrid {
        extent,
        resolution: opts.resolution,
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wln {
    pub wln: f64,
    pub integral_abs: f64,
    pub integral: f64,
    pub extent: f64,
    pub resolution: usize,
    /// Change of the WLN on the grid with half the resolution.
    pub coarse_shift: f64,
}

/// Natural-log WLN of a single-mode state.
pub fn wln(psi: &FockState) -> Result<Wln> {
    wln_with(psi, &GridOptions::default())
}

pub fn wln_with(psi: &FockState, opts: &GridOptions) -> Result<Wln> {
    let grid = wigner(psi, opts)?;
    if (grid.resolution - 1) % 4 != 0 {
        return Err(Error::ParameterRange(
            "grid resolution must be 4k+1 so the halved grid is also a Simpson grid".into(),
        ));
    }
    let abs_fine = grid.integral_abs();
    let abs_coarse = grid.integrate(2, f64::abs);
    let value = abs_fine.ln().max(0.0);
    let coarse_shift = (abs_fine.ln() - abs_coarse.ln()).abs();
    if coarse_shift > PRECISION_TOL || !value.is_finite() {
        return Err(Error::Precision { shift: coarse_shift });
    }
    Ok(Wln {
        wln: value,
        integral_abs: abs_fine,
        integral: grid.integral(),
        extent: grid.extent,
        resolution: grid.resolution,
        coarse_shift,
    })
}

/// WLN of a product of single-mode states: the single-mode values add.
pub fn wln_product(factors: &[FockState]) -> Result<f64> {
    if factors.is_empty() {
        return Err(Error::InvalidSpec("product needs at least one factor".into()));
    }
    factors.iter().map(|f| wln(f).map(|w| w.wln)).sum()
}
