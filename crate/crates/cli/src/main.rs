//! Command-line runner.
//!
//! ```text
//! lrchain ed       --config run.toml
//! lrchain spinwave --config run.toml
//! lrchain dmrg     --config run.toml [--checkpoint state.mps]
//! lrchain sweep    --config run.toml --workers 4
//! lrchain fit-c    --input series.csv
//! lrchain classify --input point.json
//! lrchain cavity   map|simulate|compare --config run.toml
//! ```
//!
//! Exit status: 0 on success, 1 for configuration or input errors, 2 for
//! runtime failures.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use lrchain::analysis::{classify_phase, fit_central_charge, order_parameters_ed, order_parameters_mps, CentralChargeFit, EntropyScalingSeries};
use lrchain::cavity::{compare_trajectories, effective_params, simulate_effective, simulate_full, Trajectory};
use lrchain::config::{OutputFormat, RunConfig};
use lrchain::exactdiag::{cut_entanglement_entropy, global_ground_state, Method};
use lrchain::model::ModelParams;
use lrchain::spinwave::{classify_spinwave, excitation_density, fm_phase_boundary, fm_spectrum, xy_spectrum};
use lrchain::sweep::run_sweep;
use lrchain::tensornet::{energy_variance, build_mpo, ground_state, write_checkpoint};

#[derive(Parser, Debug)]
#[command(version, about = "Ground-state phases of an XXZ chain with infinite-range XX coupling")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the configuration)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    format: Option<OutputFormat>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact diagonalization of the [model] chain
    Ed,
    /// Spin-wave spectrum and phase of the [model] point on a ring
    Spinwave,
    /// DMRG ground state of the [model] chain
    Dmrg {
        /// Write the final MPS here
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Phase-diagram sweep over the [sweep] grid
    Sweep,
    /// Fit the effective central charge to an entropy series (CSV with columns L,S)
    FitC {
        #[arg(long)]
        input: PathBuf,
    },
    /// Label a point from its central-charge fit and order parameters (JSON)
    Classify {
        #[arg(long)]
        input: PathBuf,
    },
    /// Cavity-QED mapping and dynamics
    Cavity {
        #[arg(value_enum)]
        action: CavityAction,
        /// Model integrated by `simulate`
        #[arg(long, value_enum, default_value_t = CavityModel::Effective)]
        model: CavityModel,
    },
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum CavityAction {
    Map,
    Simulate,
    Compare,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum CavityModel {
    Full,
    Effective,
}

enum Failure {
    Config(String),
    Runtime(String),
}

type CmdResult = Result<(), Failure>;

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

fn config_err<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Config(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(config_err)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(Failure::Config("--workers must be at least 1".into()));
        }
        cfg.workers = w;
    }
    if let Some(f) = cli.format {
        cfg.format = f;
    }
    Ok(cfg)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir).map_err(runtime)?;
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value).map_err(runtime)?;
    fs::write(&path, text + "\n").map_err(runtime)?;
    Ok(path)
}

fn run(cli: Cli) -> CmdResult {
    let cfg = load_config(&cli)?;
    let out = cfg.output_dir.clone();
    match &cli.command {
        Command::Ed => cmd_ed(&cfg, &out),
        Command::Spinwave => cmd_spinwave(&cfg, &out),
        Command::Dmrg { checkpoint } => cmd_dmrg(&cfg, &out, checkpoint.as_deref()),
        Command::Sweep => cmd_sweep(&cfg),
        Command::FitC { input } => cmd_fit_c(input, &out),
        Command::Classify { input } => cmd_classify(input, &out),
        Command::Cavity { action, model } => cmd_cavity(&cfg, &out, *action, *model),
    }
}

fn cmd_ed(cfg: &RunConfig, out: &Path) -> CmdResult {
    let p = cfg.model.params().map_err(config_err)?;
    let gs = global_ground_state(&p, Method::Auto).map_err(runtime)?;
    let entropy: Vec<f64> =
        (1..p.n_sites).map(|c| cut_entanglement_entropy(&gs.state, c)).collect::<Result<_, _>>().map_err(runtime)?;
    let order = order_parameters_ed(&gs.observables);
    let record = json!({
        "params": p,
        "energy": gs.energy,
        "sector_n_up": gs.sector,
        "degenerate_sectors": gs.degenerate_sectors,
        "sector_energies": gs.sector_energies,
        "entropy_profile": entropy,
        "order": order,
        "observables": gs.observables,
    });
    let path = write_json(out, "ed.json", &record)?;
    println!("E0 = {:.12} (n_up = {}) -> {}", gs.energy, gs.sector, path.display());
    Ok(())
}

fn cmd_spinwave(cfg: &RunConfig, out: &Path) -> CmdResult {
    let m = &cfg.model;
    let p = ModelParams::periodic(m.alpha, m.j, m.n_sites).map_err(config_err)?;
    let spectrum = if m.alpha <= fm_phase_boundary(m.j) { fm_spectrum(&p) } else { xy_spectrum(&p) }.map_err(config_err)?;
    let phase = classify_spinwave(m.alpha, m.j);
    let density = if m.alpha > fm_phase_boundary(m.j) {
        Some(excitation_density(m.alpha, m.j, &cfg.spinwave.density_sizes).map_err(|e| e.to_string()))
    } else {
        None
    };
    fs::create_dir_all(out).map_err(runtime)?;
    if cfg.format.csv() {
        let mut w = csv::Writer::from_path(out.join("spinwave_modes.csv")).map_err(runtime)?;
        w.write_record(["k", "omega", "mu", "energy"]).map_err(runtime)?;
        for mode in &spectrum.modes {
            let e = mode.energy.map_or("unstable".to_string(), |e| e.to_string());
            w.write_record([mode.k.to_string(), mode.omega.to_string(), mode.mu.to_string(), e]).map_err(runtime)?;
        }
        w.flush().map_err(runtime)?;
    }
    let record = json!({
        "params": p,
        "vacuum": spectrum.vacuum,
        "min_energy": spectrum.min_energy,
        "unstable_modes": spectrum.unstable_modes,
        "stable": spectrum.stable,
        "phase": phase.as_ref().ok(),
        "phase_error": phase.as_ref().err().map(|e| e.to_string()),
        "excitation_density": density.as_ref().and_then(|d| d.as_ref().ok()),
        "excitation_density_error": density.as_ref().and_then(|d| d.as_ref().err()),
    });
    let path = write_json(out, "spinwave.json", &record)?;
    match phase {
        Ok(ph) => println!("spin-wave phase {ph:?} -> {}", path.display()),
        Err(e) => println!("spin-wave phase undetermined ({e}) -> {}", path.display()),
    }
    Ok(())
}

fn cmd_dmrg(cfg: &RunConfig, out: &Path, checkpoint: Option<&Path>) -> CmdResult {
    let p = cfg.model.params().map_err(config_err)?;
    let dmrg = cfg.dmrg_config();
    dmrg.validate().map_err(config_err)?;
    let run = ground_state(&p, &dmrg).map_err(runtime)?;
    let variance = energy_variance(&run.mps, &build_mpo(&p).map_err(runtime)?).map_err(runtime)?;
    let record = json!({
        "params": p,
        "config": dmrg,
        "energy": run.energy,
        "energy_variance": variance,
        "pinned": run.pinned,
        "half_chain_entropy": run.report.half_chain_entropy(),
        "order": order_parameters_mps(&run.mps),
        "report": run.report,
    });
    let path = write_json(out, "dmrg.json", &record)?;
    if let Some(ck) = checkpoint {
        let file = fs::File::create(ck).map_err(runtime)?;
        write_checkpoint(std::io::BufWriter::new(file), &run.mps, dmrg.seed).map_err(runtime)?;
    }
    println!(
        "E0 = {:.12}, S_half = {:.6}, converged = {} -> {}",
        run.energy,
        run.report.half_chain_entropy(),
        run.report.converged,
        path.display()
    );
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig) -> CmdResult {
    cfg.sweep.validate().map_err(config_err)?;
    println!("sweep: {} grid points x {} sizes", cfg.sweep.cardinality(), cfg.sweep.sizes.len());
    let summary = run_sweep(cfg).map_err(|e| match e {
        lrchain::sweep::SweepError::Config(c) => config_err(c),
        other => runtime(other),
    })?;
    println!(
        "computed {}, skipped {} -> {}",
        summary.computed,
        summary.skipped,
        cfg.output_dir.display()
    );
    Ok(())
}

#[derive(Deserialize)]
struct SeriesRow {
    #[serde(rename = "L")]
    l: usize,
    #[serde(rename = "S")]
    s: f64,
}

fn cmd_fit_c(input: &Path, out: &Path) -> CmdResult {
    let mut rdr = csv::Reader::from_path(input).map_err(config_err)?;
    let points = rdr
        .deserialize::<SeriesRow>()
        .map(|r| r.map(|row| (row.l, row.s)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(config_err)?;
    let series = EntropyScalingSeries { alpha: f64::NAN, j_lr: f64::NAN, points };
    let fit = fit_central_charge(&series).map_err(config_err)?;
    let path = write_json(out, "fit.json", &fit)?;
    println!("c = {:.6} (residual {:.3e}, ±{:.3e}) -> {}", fit.c, fit.residual, fit.ci_halfwidth, path.display());
    Ok(())
}

#[derive(Deserialize)]
struct ClassifyInput {
    alpha: f64,
    j_lr: f64,
    c_fit: CentralChargeFit,
    sigma_z_mean: f64,
    xy_plateau: f64,
}

fn cmd_classify(input: &Path, out: &Path) -> CmdResult {
    let text = fs::read_to_string(input).map_err(config_err)?;
    let pt: ClassifyInput = serde_json::from_str(&text).map_err(config_err)?;
    let label = classify_phase(pt.c_fit.c, pt.sigma_z_mean);
    let record = json!({
        "alpha": pt.alpha,
        "j_lr": pt.j_lr,
        "c_fit": pt.c_fit,
        "sigma_z_mean": pt.sigma_z_mean,
        "xy_plateau": pt.xy_plateau,
        "label": label,
    });
    let path = write_json(out, "classification.json", &record)?;
    println!("{label} -> {}", path.display());
    Ok(())
}

fn write_trajectory(path: &Path, t: &Trajectory) -> CmdResult {
    let mut w = csv::Writer::from_path(path).map_err(runtime)?;
    let n = t.sigma_z.first().map_or(0, Vec::len);
    let mut header = vec!["t".to_string()];
    header.extend((0..n).map(|i| format!("sigma_z_{i}")));
    if t.photon_number.is_some() {
        header.push("photons".into());
    }
    header.push("trace_error".into());
    w.write_record(&header).map_err(runtime)?;
    for (k, time) in t.times.iter().enumerate() {
        let mut row = vec![time.to_string()];
        row.extend(t.sigma_z[k].iter().map(|z| z.to_string()));
        if let Some(ph) = &t.photon_number {
            row.push(ph[k].to_string());
        }
        row.push(t.trace_error[k].to_string());
        w.write_record(&row).map_err(runtime)?;
    }
    w.flush().map_err(runtime)
}

fn cmd_cavity(cfg: &RunConfig, out: &Path, action: CavityAction, model: CavityModel) -> CmdResult {
    let c = &cfg.cavity;
    let cp = c.params();
    let eff = effective_params(&cp).map_err(config_err)?;
    match action {
        CavityAction::Map => {
            let path = write_json(out, "cavity_map.json", &json!({ "params": cp, "effective": eff }))?;
            println!("alpha = {}, J/N = {} -> {}", eff.alpha, eff.j_over_n, path.display());
        }
        CavityAction::Simulate => {
            let init = c.initial_spins().map_err(config_err)?;
            let traj = match model {
                CavityModel::Full => simulate_full(&cp, c.n_max, &c.grid(), init),
                CavityModel::Effective => simulate_effective(&cp, &c.grid(), c.include_dissipator, init),
            }
            .map_err(runtime)?;
            fs::create_dir_all(out).map_err(runtime)?;
            let name = match model {
                CavityModel::Full => "trajectory_full.csv",
                CavityModel::Effective => "trajectory_effective.csv",
            };
            write_trajectory(&out.join(name), &traj)?;
            println!("{} records -> {}", traj.times.len(), out.join(name).display());
        }
        CavityAction::Compare => {
            let init = c.initial_spins().map_err(config_err)?;
            let full = simulate_full(&cp, c.n_max, &c.grid(), init).map_err(runtime)?;
            let reduced = simulate_effective(&cp, &c.grid(), c.include_dissipator, init).map_err(runtime)?;
            let dev = compare_trajectories(&full, &reduced).map_err(runtime)?;
            let path = write_json(
                out,
                "cavity_compare.json",
                &json!({
                    "params": cp,
                    "effective": eff,
                    "deviation": dev,
                }),
            )?;
            println!("max |d<sigma_z>| = {:.3e} -> {}", dev.max_abs_deviation, path.display());
        }
    }
    Ok(())
}
