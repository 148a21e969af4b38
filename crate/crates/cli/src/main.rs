//! `stellar`: states, stellar-fidelity profiles, no-go regions, protocol
//! assessment and Wigner negativity from the command line.

mod input;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use stellar_core::bounds::{
    assess_protocol, nogo_region_multicopy, nogo_region_subadditive, ConversionScenario, Flavor, Purity,
};
use stellar_core::profile::{approx_rank_from_profile, profile_input, ProfileInput, ProfileOptions, StellarProfile};
use stellar_core::wigner::{wigner, wln_product, wln_with, GridOptions};
use stellar_core::zoo::Family;
use stellar_core::{Error, ErrorKind};

use input::{load_profile, load_region, resolve_text, Source, StateArgs};
use output::{Document, Sink};

/// Profile length for infinite-rank inputs.
const DEFAULT_N_MAX: usize = 8;
/// Targets get longer profiles: every extra level adds `(n/q, 1]` thresholds.
const DEFAULT_TARGET_N_MAX: usize = 12;

#[derive(Parser)]
#[command(name = "stellar", version, about = "Stellar-rank robustness of bosonic states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a state and write it as JSON.
    State {
        #[command(flatten)]
        state: StateArgs,
        #[command(flatten)]
        sink: Sink,
    },
    /// Stellar-fidelity profile f_0*, …, f_{n_max}*.
    Profile {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        n_max: Option<usize>,
        #[command(flatten)]
        optimizer: OptimizerArgs,
        #[command(flatten)]
        sink: Sink,
    },
    /// No-go region in (p, δ) for converting an input into a target.
    Nogo {
        /// Input state: compact spec or JSON file.
        #[arg(long)]
        input: String,
        /// Target state: compact spec or JSON file.
        #[arg(long)]
        target: String,
        /// Number of input copies.
        #[arg(long, default_value_t = 1)]
        copies: usize,
        /// Number of target copies (multi-copy flavor only, at most 2).
        #[arg(long, default_value_t = 1)]
        target_copies: usize,
        #[arg(long, value_enum, default_value_t = FlavorArg::Multicopy)]
        flavor: FlavorArg,
        #[arg(long, value_enum, default_value_t = PurityArg::Pure)]
        purity: PurityArg,
        /// Seed for profiles computed inline.
        #[arg(long)]
        seed: Option<u64>,
        /// Profile length for the input (and the target unless overridden).
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long)]
        target_n_max: Option<usize>,
        /// Precomputed input profile (for the sub-additive flavor: one copy).
        #[arg(long)]
        input_profile: Option<PathBuf>,
        #[arg(long)]
        target_profile: Option<PathBuf>,
        #[command(flatten)]
        optimizer: OptimizerArgs,
        #[command(flatten)]
        sink: Sink,
    },
    /// Place a protocol (success probability, fidelity) against a region.
    Assess {
        #[arg(long)]
        region: PathBuf,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        fidelity: f64,
        #[command(flatten)]
        sink: Sink,
    },
    /// Wigner logarithmic negativity (natural log).
    Wln {
        #[command(flatten)]
        state: StateArgs,
        /// Grid points per axis (4k+1).
        #[arg(long, default_value_t = 801)]
        resolution: usize,
        /// Dump the Wigner grid as CSV (x, p, w); single-mode states only.
        #[arg(long)]
        grid_csv: Option<PathBuf>,
        #[command(flatten)]
        sink: Sink,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum FlavorArg {
    Multicopy,
    Subadditive,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum PurityArg {
    Pure,
    Mixed,
}

#[derive(Debug, Clone, clap::Args)]
struct OptimizerArgs {
    /// Multistart count (default 32 single-mode, 128 multimode).
    #[arg(long)]
    starts: Option<usize>,
    #[arg(long)]
    ftol: Option<f64>,
    #[arg(long)]
    max_evals: Option<usize>,
    /// Largest squeezing |r| explored.
    #[arg(long)]
    r_max: Option<f64>,
}

impl OptimizerArgs {
    fn options(&self, seed: u64, modes: usize) -> ProfileOptions {
        let mut o = ProfileOptions::with_seed(seed);
        if let Some(s) = self.starts {
            o.starts = s;
        }
        // Resolve the mode-dependent default so the echoed config is explicit.
        o.starts = o.starts_for(modes);
        if let Some(f) = self.ftol {
            o.ftol = f;
        }
        if let Some(m) = self.max_evals {
            o.max_evals = m;
        }
        if let Some(r) = self.r_max {
            o.r_max = r;
        }
        o
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("STELLAR_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| Error::ParameterRange(format!("STELLAR_THREADS must be a positive integer, got `{raw}`")))?;
    if threads == 0 {
        bail!(Error::ParameterRange("STELLAR_THREADS must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}

fn compute_profile(source: &Source, n_max: usize, opts: &ProfileOptions) -> Result<StellarProfile> {
    let input = match source {
        Source::Spec(s) => ProfileInput::Spec(s.clone()),
        Source::State { state, .. } => ProfileInput::State(state.clone()),
    };
    let mut p = profile_input(input, n_max, opts)?;
    if let Source::State { id, .. } = source {
        p.state = id.clone();
    }
    Ok(p)
}

fn profile_rows(p: &StellarProfile) -> Vec<[String; 2]> {
    p.values
        .iter()
        .enumerate()
        .map(|(n, v)| [n.to_string(), format!("{v}")])
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let started = Instant::now();
    match cli.command {
        Command::State { state, sink } => {
            let source = state.resolve()?;
            let built = source.build()?;
            let doc = Document::new(
                "state",
                serde_json::to_value(&state)?,
                serde_json::json!({
                    "id": source.id(),
                    "spec": source.spec(),
                    "declared_rank": source.spec().map(|s| s.declared_rank()),
                    "modes": built.modes(),
                    "cutoff": built.cutoff(),
                    "mean_photon_number": built.mean_photon_number(),
                    "state": built.to_file(),
                }),
            );
            sink.write(&doc, None)?;
        }
        Command::Profile {
            state,
            seed,
            n_max,
            optimizer,
            sink,
        } => {
            let source = state.resolve()?;
            let opts = optimizer.options(seed, source.modes());
            let n_max = n_max.unwrap_or_else(|| source.default_n_max(DEFAULT_N_MAX));
            let prof = compute_profile(&source, n_max, &opts)?;
            let rank = approx_rank_from_profile(&prof);
            let config = serde_json::json!({
                "state": source.id(),
                "spec": source.spec(),
                "n_max": n_max,
                "cutoff": state.cutoff,
                "optimizer": opts,
            });
            let doc = Document::new(
                "profile",
                config,
                serde_json::json!({ "profile": prof, "approx_rank": rank }),
            );
            sink.write(&doc, Some((["n", "f_star"], profile_rows(&prof))))?;
        }
        Command::Nogo {
            input,
            target,
            copies,
            target_copies,
            flavor,
            purity,
            seed,
            n_max,
            target_n_max,
            input_profile,
            target_profile,
            optimizer,
            sink,
        } => {
            let flavor_core = match flavor {
                FlavorArg::Multicopy => Flavor::Multicopy,
                FlavorArg::Subadditive => Flavor::Subadditive,
            };
            let purity_core = match purity {
                PurityArg::Pure => Purity::Pure,
                PurityArg::Mixed => Purity::Mixed,
            };
            if flavor_core == Flavor::Multicopy && (copies > 2 || target_copies > 2) {
                bail!(Error::ParameterRange(
                    "the multi-copy flavor is limited to at most 2 copies of input and target; use --flavor subadditive"
                        .into()
                ));
            }
            let in_source = resolve_text(&input)?;
            let out_source = resolve_text(&target)?;
            let scenario = ConversionScenario {
                input: in_source.id(),
                input_copies: copies,
                target: out_source.id(),
                target_copies,
                flavor: flavor_core,
                purity: purity_core,
            };
            scenario.validate()?;
            // The profiled input is `k` copies for the multi-copy flavor and a
            // single copy for the sub-additive one.
            let in_profiled = match flavor_core {
                Flavor::Multicopy => power(in_source, copies)?,
                Flavor::Subadditive => in_source,
            };
            let out_profiled = power(out_source, target_copies)?;
            let need_seed = input_profile.is_none() || target_profile.is_none();
            let seed = match (seed, need_seed) {
                (Some(s), _) => s,
                (None, false) => 0,
                (None, true) => bail!(Error::InvalidSpec("--seed is required when profiles are computed".into())),
            };
            let in_n = n_max.unwrap_or_else(|| in_profiled.default_n_max(DEFAULT_N_MAX));
            let out_n = target_n_max
                .or(n_max)
                .unwrap_or_else(|| out_profiled.default_n_max(DEFAULT_TARGET_N_MAX));
            let prof_in = match &input_profile {
                Some(p) => load_profile(p)?,
                None => compute_profile(&in_profiled, in_n, &optimizer.options(seed, in_profiled.modes()))?,
            };
            let prof_out = match &target_profile {
                Some(p) => load_profile(p)?,
                None => compute_profile(&out_profiled, out_n, &optimizer.options(seed, out_profiled.modes()))?,
            };
            let region = match flavor_core {
                Flavor::Multicopy => nogo_region_multicopy(scenario, &prof_in, &prof_out)?,
                Flavor::Subadditive => nogo_region_subadditive(scenario, &prof_in, &prof_out)?,
            };
            let mut warnings = Vec::new();
            for (label, p) in [("input", &prof_in), ("target", &prof_out)] {
                if p.terminal_index().is_none() {
                    warnings.push(format!(
                        "{label} profile capped at n_max = {}; rectangles needing larger n are omitted (region is censored, still sound)",
                        p.n_max
                    ));
                }
                let flagged: Vec<usize> = p
                    .flags
                    .iter()
                    .enumerate()
                    .filter(|(_, f)| f.iter().any(|x| x != "inherited"))
                    .map(|(n, _)| n)
                    .collect();
                if !flagged.is_empty() {
                    warnings.push(format!("{label} profile entries {flagged:?} carry optimizer/cutoff flags"));
                }
            }
            let uncertified = region.rectangles.iter().filter(|r| !r.certified).count();
            if uncertified > 0 {
                warnings.push(format!("{uncertified} rectangle(s) are heuristic (not certified against optimizer spread)"));
            }
            let config = serde_json::json!({
                "input": input,
                "target": target,
                "copies": copies,
                "target_copies": target_copies,
                "flavor": flavor,
                "purity": purity,
                "seed": seed,
                "n_max": in_n,
                "target_n_max": out_n,
                "input_profile": input_profile,
                "target_profile": target_profile,
            });
            let rows: Vec<[String; 2]> = region
                .boundary
                .iter()
                .map(|b| [format!("{}", b.p), format!("{}", b.delta)])
                .collect();
            let doc = Document::new(
                "nogo",
                config,
                serde_json::json!({
                    "region": region,
                    "warnings": warnings,
                    "profiles": { "input": prof_in, "target": prof_out },
                }),
            );
            sink.write(&doc, Some((["p", "delta"], rows)))?;
        }
        Command::Assess {
            region,
            p,
            fidelity,
            sink,
        } => {
            let r = load_region(&region)?;
            let a = assess_protocol(&r, p, fidelity)?;
            let doc = Document::new(
                "assess",
                serde_json::json!({ "region": region, "p": p, "fidelity": fidelity }),
                serde_json::json!({ "scenario": r.scenario, "assessment": a }),
            );
            sink.write(&doc, None)?;
        }
        Command::Wln {
            state,
            resolution,
            grid_csv,
            sink,
        } => {
            let source = state.resolve()?;
            let grid = GridOptions {
                resolution,
                ..GridOptions::default()
            };
            let config = serde_json::json!({
                "state": source.id(),
                "spec": source.spec(),
                "resolution": resolution,
                "log_base": "e",
            });
            let body = match source.spec().map(|s| &s.family) {
                Some(Family::Product { factors }) if source.modes() > 1 => {
                    let built = factors
                        .iter()
                        .map(|f| match source.spec().and_then(|s| s.cutoff) {
                            Some(c) => f.clone().with_cutoff(c).build(),
                            None => f.build(),
                        })
                        .collect::<stellar_core::Result<Vec<_>>>()?;
                    if built.iter().any(|b| b.modes() != 1) {
                        bail!(Error::Dimension("product factors must be single-mode".into()));
                    }
                    let singles = built
                        .iter()
                        .map(|b| wln_with(b, &grid))
                        .collect::<stellar_core::Result<Vec<_>>>()?;
                    let total = wln_product(&built)?;
                    if grid_csv.is_some() {
                        bail!(Error::Dimension("--grid-csv needs a single-mode state".into()));
                    }
                    serde_json::json!({ "wln": total, "additive_over_factors": true, "factors": singles })
                }
                _ => {
                    let psi = source.build()?;
                    let w = wln_with(&psi, &grid)?;
                    if let Some(path) = &grid_csv {
                        let g = wigner(&psi, &GridOptions { extent: Some(w.extent), ..grid })?;
                        output::write_grid_csv(path, &g)?;
                    }
                    serde_json::json!({ "wln": w.wln, "grid": w })
                }
            };
            let doc = Document::new("wln", config, body);
            sink.write(&doc, None)?;
        }
    }
    eprintln!("elapsed {:.2}s", started.elapsed().as_secs_f64());
    Ok(())
}

fn power(source: Source, k: usize) -> Result<Source> {
    Ok(match (source, k) {
        (s, 1) => s,
        (Source::Spec(s), k) => Source::Spec(s.copies(k)),
        (Source::State { id, state }, k) => Source::State {
            id: format!("({id})^{k}"),
            state: stellar_core::fock::tensor_power(&state, k)?,
        },
    })
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>().map(Error::kind) {
        Some(ErrorKind::Numerical) => 3,
        Some(ErrorKind::Infeasible) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_kinds_map_to_exit_codes() {
        let code = |e: Error| exit_code(&anyhow::Error::new(e));
        assert_eq!(code(Error::InvalidSpec("x".into())), 2);
        assert_eq!(code(Error::Truncation { leak: 1.0, tol: 0.0 }), 3);
        assert_eq!(code(Error::Precision { shift: 1.0 }), 3);
        assert_eq!(code(Error::Infeasible { n: 0 }), 4);
        assert_eq!(exit_code(&anyhow::anyhow!("io")), 2);
    }
}
