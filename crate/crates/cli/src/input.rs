//! Turning flags, compact spec strings and files into states and profiles.

use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Serialize;
use serde_json::Value;
use stellar_core::fock::{FockState, StateFile};
use stellar_core::profile::StellarProfile;
use stellar_core::zoo::{Family, Parity, StateSpec};
use stellar_core::Error;

/// Exactly one state source.
#[derive(Debug, Clone, Args, Serialize)]
pub struct StateArgs {
    /// Compact spec (`fock:2`, `fock:1,1`, `cat:3:odd`, `gkp:0.1`, …) or a
    /// JSON file (state, spec or `state` command output).
    #[arg(long, value_name = "SPEC|FILE")]
    pub spec: Option<String>,
    /// Fock state; a comma list gives a product, e.g. `1,1`.
    #[arg(long, value_name = "N[,N...]")]
    pub fock: Option<String>,
    /// Cat state amplitude (see `--parity`).
    #[arg(long, value_name = "ALPHA")]
    pub cat: Option<f64>,
    #[arg(long, value_name = "even|odd", default_value = "even")]
    pub parity: String,
    /// Finite-energy GKP state with envelope width DELTA.
    #[arg(long, value_name = "DELTA")]
    pub gkp: Option<f64>,
    /// Coherent state `RE[,IM]`.
    #[arg(long, value_name = "RE[,IM]", allow_hyphen_values = true)]
    pub coherent: Option<String>,
    #[arg(long, value_name = "T")]
    pub trisqueezed: Option<f64>,
    /// Cubic phase state with gate strength C (squeezing from `--squeeze`).
    #[arg(long, value_name = "C", allow_hyphen_values = true)]
    pub cubic: Option<f64>,
    #[arg(long, value_name = "R", default_value_t = 0.0, allow_hyphen_values = true)]
    pub squeeze: f64,
    /// Tensor power of the state.
    #[arg(long, value_name = "K", default_value_t = 1)]
    pub copies: usize,
    /// Fock cutoff override.
    #[arg(long, value_name = "N")]
    pub cutoff: Option<usize>,
}

/// A state as the commands see it: rebuildable from a spec, or raw.
#[derive(Debug, Clone)]
pub enum Source {
    Spec(StateSpec),
    State { id: String, state: FockState },
}

impl Source {
    pub fn id(&self) -> String {
        match self {
            Source::Spec(s) => s.id(),
            Source::State { id, .. } => id.clone(),
        }
    }

    pub fn spec(&self) -> Option<&StateSpec> {
        match self {
            Source::Spec(s) => Some(s),
            Source::State { .. } => None,
        }
    }

    pub fn build(&self) -> Result<FockState> {
        match self {
            Source::Spec(s) => Ok(s.build()?),
            Source::State { state, .. } => Ok(state.clone()),
        }
    }

    pub fn modes(&self) -> usize {
        match self {
            Source::Spec(s) => s.modes(),
            Source::State { state, .. } => state.modes(),
        }
    }

    /// Default profile length: the declared rank when finite and at most
    /// `fallback`, else `fallback`.
    pub fn default_n_max(&self, fallback: usize) -> usize {
        match self.spec().and_then(|s| s.declared_rank().finite()) {
            Some(r) if r <= fallback => r,
            _ => fallback,
        }
    }

    fn copies(self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::ParameterRange("--copies must be at least 1".into()).into());
        }
        Ok(match self {
            Source::Spec(s) => Source::Spec(s.copies(k)),
            Source::State { id, state } => {
                let power = stellar_core::fock::tensor_power(&state, k)?;
                Source::State {
                    id: if k == 1 { id } else { format!("({id})^{k}") },
                    state: power,
                }
            }
        })
    }

    fn with_cutoff(self, cutoff: Option<usize>) -> Result<Self> {
        let Some(c) = cutoff else { return Ok(self) };
        Ok(match self {
            Source::Spec(s) => Source::Spec(s.with_cutoff(c)),
            Source::State { id, state } => {
                if c < state.cutoff() {
                    let (cropped, lost) = state.cropped(c);
                    if lost > 1e-10 {
                        return Err(Error::Truncation { leak: lost, tol: 1e-10 }.into());
                    }
                    Source::State { id, state: cropped }
                } else {
                    Source::State { id, state: state.padded(c)? }
                }
            }
        })
    }
}

impl StateArgs {
    pub fn resolve(&self) -> Result<Source> {
        let parity: Parity = self.parity.parse()?;
        let mut picked: Vec<Source> = Vec::new();
        if let Some(s) = &self.spec {
            picked.push(resolve_text(s)?);
        }
        if let Some(f) = &self.fock {
            picked.push(Source::Spec(format!("fock:{f}").parse()?));
        }
        if let Some(a) = self.cat {
            picked.push(Source::Spec(StateSpec::cat(a, parity)));
        }
        if let Some(d) = self.gkp {
            picked.push(Source::Spec(StateSpec::gkp(d)));
        }
        if let Some(c) = &self.coherent {
            picked.push(Source::Spec(format!("coherent:{}", c.replace(',', ":")).parse()?));
        }
        if let Some(t) = self.trisqueezed {
            picked.push(Source::Spec(StateSpec::trisqueezed(t)));
        }
        if let Some(c) = self.cubic {
            picked.push(Source::Spec(StateSpec::cubic_phase(c, self.squeeze)));
        }
        if picked.len() != 1 {
            bail!(Error::InvalidSpec(format!(
                "give exactly one state source (--spec, --fock, --cat, --gkp, --coherent, --trisqueezed, --cubic); got {}",
                picked.len()
            )));
        }
        picked.pop().expect("one source").copies(self.copies)?.with_cutoff(self.cutoff)
    }
}

/// Compact spec, or a path to a JSON file.
pub fn resolve_text(text: &str) -> Result<Source> {
    let path = Path::new(text);
    if path.is_file() {
        return load_state_file(path);
    }
    Ok(Source::Spec(text.parse()?))
}

/// Parses JSON, unwrapping the `result` of a command output document.
fn read_document(path: &Path, text: &str) -> Result<Value> {
    let mut value: Value =
        serde_json::from_str(text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if value.get("tool").is_some() {
        if let Some(result) = value.get_mut("result") {
            value = result.take();
        }
    }
    Ok(value)
}

fn load_state_file(path: &Path) -> Result<Source> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value = read_document(path, &text)?;
    // Output of the `state` command: prefer the spec so larger cutoffs can be
    // rebuilt.
    if let Some(spec) = value.get("spec").filter(|v| !v.is_null()) {
        let spec: StateSpec = serde_json::from_value(spec.clone())
            .map_err(|e| Error::Format(format!("{}: spec: {e}", path.display())))?;
        return Ok(Source::Spec(spec));
    }
    if let Some(state) = value.get("state").filter(|v| v.is_object()) {
        return state_from_value(path, state.clone());
    }
    if value.get("family").is_some() {
        let spec: StateSpec = serde_json::from_value(value)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if let Family::Product { factors } = &spec.family {
            if factors.is_empty() {
                bail!(Error::InvalidSpec("product needs at least one factor".into()));
            }
        }
        return Ok(Source::Spec(spec));
    }
    state_from_value(path, value)
}

fn state_from_value(path: &Path, value: Value) -> Result<Source> {
    let file: StateFile = serde_json::from_value(value)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let state = FockState::from_file(&file)?;
    let norm = state.norm_sqr();
    if (norm - 1.0).abs() > 1e-8 {
        bail!(Error::InvalidSpec(format!("{}: state norm² is {norm}, expected 1", path.display())));
    }
    Ok(Source::State {
        id: path
            .file_stem()
            .map_or_else(|| "state".to_string(), |s| s.to_string_lossy().into_owned()),
        state,
    })
}

/// A profile document written by `profile`, or a bare profile.
pub fn load_profile(path: &Path) -> Result<StellarProfile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value = read_document(path, &text)?;
    let inner = value.get("profile").cloned().unwrap_or(value);
    Ok(serde_json::from_value(inner).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?)
}

/// A region document written by `nogo`, or a bare region.
pub fn load_region(path: &Path) -> Result<stellar_core::NoGoRegion> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value = read_document(path, &text)?;
    let inner = value.get("region").cloned().unwrap_or(value);
    Ok(serde_json::from_value(inner).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?)
}
