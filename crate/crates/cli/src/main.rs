//! `crossmag`: pulse runs, sweeps, phase diagrams and threshold tables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use crossmag::dynamics::{Simulation, Trajectory};
use crossmag::experiments::{seed_state, switching_time, Experiment, PhaseRecord, StateId, Watched};
use crossmag::io::csv::{fmt12, records_csv, thresholds_csv, write_text};
use crossmag::io::{load_config, write_records, write_snapshot, write_thresholds, write_timeseries, RunConfig};
use crossmag::macrospin::{critical_current_density, MacrospinParams};
use crossmag::materials::MaterialRegistry;
use crossmag::mesh::NM;
use crossmag::{Result, VectorField};

#[derive(Debug, Parser)]
#[command(name = "crossmag", version, about = "Spin-transfer-torque switching of a cross-shaped free layer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Prepare the start state and apply the configured pulse train.
    Run(Common),
    /// Relax the configured start state and write it out.
    Relax(Common),
    /// Switching outcome and time versus current density.
    Sweep(Common),
    /// Final state versus material and current density, with thresholds.
    Phase(Common),
    /// Two opposite pulses from the start state.
    Twopulse(Common),
    /// Macrospin critical current density per material.
    Jc(Common),
    /// List the built-in materials.
    Materials,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u32).range(1..))]
    workers: Option<u32>,
    /// Snapshot stride in nanoseconds.
    #[arg(long, value_name = "X")]
    snapshot_every_ns: Option<f64>,
    /// Accepted for compatibility; runs are deterministic.
    #[arg(long)]
    seedless: bool,
}

const DEFAULT_OUT: &str = "crossmag-out";

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None => RunConfig::default(),
        };
        if let Some(n) = self.workers {
            cfg.experiment.workers = n as usize;
        }
        if let Some(s) = self.snapshot_every_ns {
            cfg.output.snapshot_every_ns = Some(s);
        }
        if self.seedless {
            info!("--seedless: no stochastic terms to disable");
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &RunConfig) -> PathBuf {
        self.out
            .clone()
            .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }
}

/// Writes the resolved configuration, minus the output directory, so that
/// running from the echo reproduces the tables wherever it is written.
fn echo_config(cfg: &RunConfig, out: &Path) -> Result<()> {
    let mut echo = cfg.clone();
    echo.output.dir = None;
    write_text(&out.join("config.toml"), &echo.to_toml()?)
}

/// The configured start state after relaxation. With `strict_start` a
/// different relaxed state is an error; otherwise it is used as found.
fn start_state(cfg: &RunConfig, ex: &Experiment) -> Result<VectorField> {
    let mat = cfg.resolved_material()?;
    let target = cfg.start_state();
    if cfg.experiment.strict_start {
        return ex.prepare_state(target, &mat);
    }
    let mut sim = ex.session(&mat, seed_state(&ex.geometry, target)?)?;
    sim.relax()?;
    let got = ex.classify(sim.state());
    if got != target {
        warn!("start state relaxed to {got} instead of {target}");
    }
    Ok(sim.state().clone())
}

fn write_snapshots(traj: &Trajectory, dir: &Path) -> Result<()> {
    for (i, (t, m)) in traj.snapshots.iter().enumerate() {
        write_snapshot(m, &dir.join(format!("m{i:05}.ovf")), &format!("m at t = {:.6} ns", t * 1e9))?;
    }
    Ok(())
}

fn cmd_run(c: &Common) -> Result<()> {
    let cfg = c.load()?;
    let out = c.out_dir(&cfg);
    echo_config(&cfg, &out)?;
    let ex = cfg.experiment()?;
    let mat = cfg.resolved_material()?;
    let m0 = start_state(&cfg, &ex)?;
    write_snapshot(&m0, &out.join("start.ovf"), "relaxed start state")?;
    let schedule = cfg.schedule();
    let mut sim: Simulation = ex.session(&mat, m0)?;
    let res = sim.run_pulse(&schedule)?;
    write_timeseries(&res.trajectory, &out.join("timeseries.csv"))?;
    write_snapshots(&res.trajectory, &out.join("snapshots"))?;
    write_snapshot(&res.relaxed, &out.join("final.ovf"), "relaxed final state")?;

    let mut rec = PhaseRecord {
        material: mat.name.clone(),
        j: schedule.segments.first().map_or(0.0, |s| s.j),
        pulse: schedule.total_pulse(),
        final_state: ex.classify(&res.relaxed),
        t_switch: None,
        t_switch_long: None,
        note: None,
    };
    let mut notes = Vec::new();
    for (watch, slot) in [(Watched::ShortX, &mut rec.t_switch), (Watched::LongY, &mut rec.t_switch_long)] {
        match switching_time(&res.trajectory, watch, res.pulse_start) {
            Ok(t) => *slot = t.map(|t| t - res.pulse_start),
            Err(e) => notes.push(e.to_string()),
        }
    }
    if !notes.is_empty() {
        rec.note = Some(notes.join("; "));
    }
    let summary = records_csv(std::slice::from_ref(&rec));
    write_text(&out.join("summary.csv"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn cmd_relax(c: &Common) -> Result<()> {
    let cfg = c.load()?;
    let out = c.out_dir(&cfg);
    echo_config(&cfg, &out)?;
    let ex = cfg.experiment()?;
    let mat = cfg.resolved_material()?;
    let mut sim = ex.session(&mat, seed_state(&ex.geometry, cfg.start_state())?)?;
    let traj = sim.relax()?;
    write_timeseries(&traj, &out.join("relax.csv"))?;
    write_snapshot(sim.state(), &out.join("relaxed.ovf"), "relaxed state")?;
    println!("{} {} -> {}", mat.name, cfg.start_state(), ex.classify(sim.state()));
    Ok(())
}

fn cmd_sweep(c: &Common) -> Result<()> {
    let cfg = c.load()?;
    let out = c.out_dir(&cfg);
    echo_config(&cfg, &out)?;
    let ex = cfg.experiment()?;
    let mat = cfg.resolved_material()?;
    let js = &cfg.experiment.sweep_j_apm2;
    let records = match start_state(&cfg, &ex) {
        Ok(m0) => ex.sweep_current(&mat, js, &m0)?,
        Err(e) => {
            warn!("{}: {e}", mat.name);
            js.iter()
                .map(|&j| PhaseRecord {
                    material: mat.name.clone(),
                    j,
                    pulse: ex.pulse,
                    final_state: StateId::Unknown,
                    t_switch: None,
                    t_switch_long: None,
                    note: Some(format!("start state: {e}")),
                })
                .collect()
        }
    };
    write_records(&records, &out.join("sweep.csv"))?;
    print!("{}", records_csv(&records));
    Ok(())
}

fn cmd_phase(c: &Common) -> Result<()> {
    let cfg = c.load()?;
    let out = c.out_dir(&cfg);
    echo_config(&cfg, &out)?;
    let ex = cfg.experiment()?;
    let diagram = ex.phase_diagram(&cfg.phase_materials()?, &cfg.phase_grid())?;
    write_records(&diagram.records, &out.join("phase.csv"))?;
    write_thresholds(&diagram.thresholds, &out.join("thresholds.csv"))?;
    print!("{}", thresholds_csv(&diagram.thresholds));
    Ok(())
}

fn cmd_twopulse(c: &Common) -> Result<()> {
    let cfg = c.load()?;
    let out = c.out_dir(&cfg);
    echo_config(&cfg, &out)?;
    let ex = cfg.experiment()?;
    let mat = cfg.resolved_material()?;
    let (j1, j2) = (cfg.experiment.j1_apm2, cfg.experiment.j2_apm2);
    let m0 = start_state(&cfg, &ex)?;
    let start = ex.classify(&m0);
    let (mid, end) = ex.two_pulse_protocol(&mat, &m0, j1, j2)?;
    let mut text = String::from("material,J1_Apm2,J2_Apm2,pulse_ns,start_state,after_first,after_second\n");
    let _ = writeln!(
        text,
        "{},{},{},{},{start},{mid},{end}",
        mat.name,
        fmt12(j1),
        fmt12(j2),
        fmt12(ex.pulse * 1e9)
    );
    write_text(&out.join("twopulse.csv"), &text)?;
    print!("{text}");
    Ok(())
}

fn cmd_jc(c: &Common) -> Result<()> {
    let cfg = c.load()?;
    let t_free = cfg.box_nm[2] * NM;
    let h = cfg.h_applied_apm[0];
    let mut csv = String::from("material,Ms_Apm,alpha,P,t_nm,H_Apm,Jco_Apm2\n");
    println!("{:<6} {:>12} {:>7} {:>6} {:>14}", "name", "Ms (A/m)", "alpha", "P", "J_co (A/m^2)");
    let reg = MaterialRegistry::default();
    for name in reg.names() {
        let mat = reg.get(&name)?;
        let mut p = MacrospinParams::new(mat.clone(), t_free);
        p.h = h;
        let jc = critical_current_density(&p)?;
        println!("{:<6} {:>12.4e} {:>7.4} {:>6.3} {:>14.4e}", mat.name, mat.ms, mat.alpha, mat.p, jc);
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            mat.name,
            fmt12(mat.ms),
            fmt12(mat.alpha),
            fmt12(mat.p),
            fmt12(cfg.box_nm[2]),
            fmt12(h),
            fmt12(jc)
        );
    }
    if let Some(out) = &c.out {
        write_text(&out.join("jc.csv"), &csv)?;
    }
    Ok(())
}

fn cmd_materials() -> Result<()> {
    println!("{:<6} {:>12} {:>12} {:>6} {:>7}", "name", "Ms (A/m)", "A (J/m)", "P", "alpha");
    let reg = MaterialRegistry::default();
    for name in reg.names() {
        let m = reg.get(&name)?;
        println!("{:<6} {:>12.4e} {:>12.4e} {:>6.3} {:>7.4}", m.name, m.ms, m.a, m.p, m.alpha);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CROSSMAG_LOG", "warn")).init();
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Run(c) => cmd_run(c),
        Command::Relax(c) => cmd_relax(c),
        Command::Sweep(c) => cmd_sweep(c),
        Command::Phase(c) => cmd_phase(c),
        Command::Twopulse(c) => cmd_twopulse(c),
        Command::Jc(c) => cmd_jc(c),
        Command::Materials => cmd_materials(),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
