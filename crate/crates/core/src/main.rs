//! Command-line driver for the reconstruction pipeline.
//!
//! Every subcommand exits 0 on success; failures print a machine-readable
//! JSON object (`{"error": ..., "message": ...}`) to stderr and exit 1.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use nlpt::abstract_newton::{
    frozen_newton_run, hankel_root_separation, hankel_sigma_min,
    remainder_closeness_constant, AbstractState, FrozenNewtonConfig, SpectralSystem, Variant,
};
use nlpt::harness::{
    conditioning_report, emit_artifacts, execute_scenario, run_scenario, Scenario, StopAfter,
};
use nlpt::Result;

#[derive(Parser)]
#[command(
    name = "nlpt",
    about = "Frequency-domain nonlinearity parameter tomography pipeline",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic multiharmonic boundary data for a scenario
    Simulate {
        #[arg(short, long)]
        scenario: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// override the scenario's RNG seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the pipeline through sparse point-source recovery only
    Pdap {
        #[arg(short, long)]
        scenario: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Full reconstruction: data, PDAP, equivalent discs, shape Newton
    Reconstruct {
        #[arg(short, long)]
        scenario: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Desk-scale studies of the abstract frozen Newton theory
    Abstract {
        #[arg(short, long)]
        out: PathBuf,
        /// truncation variant: a or b
        #[arg(long, default_value = "b")]
        variant: String,
        /// number of harmonics M
        #[arg(long, default_value_t = 3)]
        harmonics: usize,
        /// number of eigenmodes J
        #[arg(long, default_value_t = 8)]
        modes: usize,
    },
    /// Conditioning diagnostics for a single-inclusion
    /// scenario
    Diagnose {
        #[arg(short, long)]
        scenario: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// arc fractions to sweep
        #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 0.75, 0.5, 0.4, 0.3])]
        fractions: Vec<f64>,
        /// number of radial basis functions (odd)
        #[arg(long, default_value_t = 9)]
        basis: usize,
    },
    /// Run every scenario file in a directory, each into its own output
    /// subdirectory
    Sweep {
        /// directory containing scenario TOML/JSON files
        #[arg(short, long)]
        scenarios: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
}

fn load(path: &PathBuf, seed: Option<u64>) -> Result<Scenario> {
    let mut s = Scenario::load(path)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    Ok(s)
}

fn cmd_stage(path: &PathBuf, out: &PathBuf, seed: Option<u64>, stop: StopAfter) -> Result<bool> {
    let s = load(path, seed)?;
    let res = execute_scenario(&s, stop);
    emit_artifacts(&s, &res, out)?;
    for st in &res.stages {
        if st.ok {
            println!("stage {:<10} ok", st.stage);
        } else {
            println!(
                "stage {:<10} FAILED: {}",
                st.stage,
                st.message.as_deref().unwrap_or("unknown")
            );
        }
    }
    Ok(res.ok())
}

fn cmd_abstract(out: &PathBuf, variant: Variant, m_h: usize, j: usize) -> Result<()> {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::io::Write as _;
    std::fs::create_dir_all(out)?;
    let sys = SpectralSystem::standard(j, 2.0, 1.0, 0.1)?;

    // base point with invertible B_m
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut x0 = AbstractState::zero(m_h, j);
    for m in 0..m_h {
        for jj in 0..j {
            x0.eta[m][jj] = num_complex::Complex64::new(
                0.05 * (rng.gen::<f64>() - 0.5),
                0.05 * (rng.gen::<f64>() - 0.5),
            );
            x0.phat[m][jj] = num_complex::Complex64::new(
                0.05 * (rng.gen::<f64>() - 0.5),
                0.05 * (rng.gen::<f64>() - 0.5),
            );
        }
        x0.phat[m][0] += num_complex::Complex64::new(1.0, 0.1);
    }

    // remainder closeness constants over the perturbation radius
    let mut f = std::fs::File::create(out.join("closeness.csv"))?;
    writeln!(f, "delta,closeness_constant")?;
    for &d in &[0.1, 0.05, 0.02, 0.01, 0.005, 0.001] {
        let c = remainder_closeness_constant(&sys, variant, &x0, d, 40, 5)?;
        writeln!(f, "{d},{c}")?;
    }

    // Hankel sigma_min table
    let sys20 = SpectralSystem::standard(20, 2.0, 1.0, 0.1)?;
    let mut f = std::fs::File::create(out.join("hankel.csv"))?;
    writeln!(f, "size,sigma_min")?;
    for n in [4, 8, 12, 16, 20] {
        writeln!(f, "{n},{:e}", hankel_sigma_min(&sys20, n, n)?)?;
    }
    println!("hankel root separation: {:.6e}", hankel_root_separation(&sys20));

    // frozen Newton histories over noise levels
    let truth = {
        let mut t = x0.clone();
        // shared eta so the penalty vanishes at the truth
        let eta = t.eta[0].clone();
        for e in &mut t.eta {
            e.clone_from(&eta);
        }
        t
    };
    let data = {
        let (gm, obs) = nlpt::abstract_newton::forward_op(&sys, variant, &truth);
        nlpt::abstract_newton::f_to_vec(&gm, &obs)
    };
    let mut start = truth.clone();
    for m in 0..m_h {
        for jj in 0..j {
            start.phat[m][jj] += num_complex::Complex64::new(
                0.01 * (rng.gen::<f64>() - 0.5),
                0.01 * (rng.gen::<f64>() - 0.5),
            );
        }
    }
    let mut f = std::fs::File::create(out.join("frozen_newton.csv"))?;
    writeln!(f, "delta,iteration,error,misfit,alpha")?;
    for &delta in &[0.0, 1e-2, 1e-3, 1e-4] {
        let noisy = if delta > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let dir = nalgebra::DVector::from_fn(data.len(), |_, _| rng.gen::<f64>() - 0.5);
            let dir = &dir / dir.norm();
            &data + dir * (delta * data.norm())
        } else {
            data.clone()
        };
        let cfg = FrozenNewtonConfig {
            alpha0: 1.0,
            delta,
            max_iterations: if delta > 0.0 { 60 } else { 16 },
            ..Default::default()
        };
        let rep = frozen_newton_run(&sys, variant, &start, &noisy, &cfg, Some(&truth))?;
        for (i, e) in rep.errors.iter().enumerate() {
            let alpha = rep.alphas.get(i).copied().unwrap_or(f64::NAN);
            let mis = rep.misfits.get(i).copied().unwrap_or(f64::NAN);
            writeln!(f, "{delta},{i},{e:e},{mis:e},{alpha:e}")?;
        }
        println!(
            "frozen newton delta={delta}: stopped at {} final error {:.3e}",
            rep.stopped_at,
            rep.errors.last().unwrap()
        );
    }
    Ok(())
}

fn cmd_diagnose(path: &PathBuf, out: &PathBuf, fractions: &[f64], basis: usize) -> Result<()> {
    use std::io::Write as _;
    let s = Scenario::load(path)?;
    std::fs::create_dir_all(out)?;
    let rows = conditioning_report(&s, fractions, basis)?;
    let mut f = std::fs::File::create(out.join("conditioning.csv"))?;
    writeln!(f, "arc_fraction,cond_j,c_n_observed,c_n_missing")?;
    println!(
        "{:>12} {:>14} {:>14} {:>14}",
        "arc/2pi", "cond(J)", "c_N (observed)", "c_N (missing)"
    );
    for r in &rows {
        writeln!(
            f,
            "{},{:e},{:e},{:e}",
            r.arc_fraction, r.cond_j, r.c_n_observed, r.c_n_missing
        )?;
        println!(
            "{:>12} {:>14.4e} {:>14.4e} {:>14.4e}",
            r.arc_fraction, r.cond_j, r.c_n_observed, r.c_n_missing
        );
    }
    Ok(())
}

fn cmd_sweep(dir: &PathBuf, out: &PathBuf) -> Result<bool> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("toml") | Some("json")
            )
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(nlpt::Error::Domain(format!("no scenario files in {}", dir.display())));
    }
    use rayon::prelude::*;
    let results: Vec<(String, Result<bool>)> = files
        .par_iter()
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().to_string();
            let r = Scenario::load(p).and_then(|s| {
                run_scenario(&s, &out.join(&name)).map(|res| res.ok())
            });
            (name, r)
        })
        .collect();
    let mut all_ok = true;
    for (name, r) in results {
        match r {
            Ok(true) => println!("{name}: ok"),
            Ok(false) => {
                println!("{name}: completed with stage failures (see report.json)");
                all_ok = false;
            }
            Err(e) => {
                println!("{name}: error: {e}");
                all_ok = false;
            }
        }
    }
    Ok(all_ok)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate { scenario, out, seed } => {
            cmd_stage(&scenario, &out, seed, StopAfter::Data)
        }
        Command::Pdap { scenario, out, seed } => {
            cmd_stage(&scenario, &out, seed, StopAfter::Pdap)
        }
        Command::Reconstruct { scenario, out, seed } => {
            cmd_stage(&scenario, &out, seed, StopAfter::Full)
        }
        Command::Abstract { out, variant, harmonics, modes } => {
            let v = match variant.as_str() {
                "a" => Variant::A,
                "b" => Variant::B,
                other => {
                    return Err(nlpt::Error::Domain(format!(
                        "variant must be 'a' or 'b', got {other}"
                    )))
                }
            };
            cmd_abstract(&out, v, harmonics, modes)?;
            Ok(true)
        }
        Command::Diagnose { scenario, out, fractions, basis } => {
            cmd_diagnose(&scenario, &out, &fractions, basis)?;
            Ok(true)
        }
        Command::Sweep { scenarios, out } => cmd_sweep(&scenarios, &out),
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => {}
        Ok(false) => {
            eprintln!(
                "{}",
                serde_json::json!({
                    "error": "stage_failure",
                    "message": "one or more pipeline stages failed; see report.json"
                })
            );
            std::process::exit(2);
        }
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::json!({ "error": error_kind(&e), "message": e.to_string() })
            );
            std::process::exit(1);
        }
    }
}

fn error_kind(e: &nlpt::Error) -> &'static str {
    use nlpt::Error::*;
    match e {
        Domain(_) => "domain",
        InvalidCurve(_) => "invalid_curve",
        Singularity => "singularity",
        IllConditioned(_) => "ill_conditioned",
        OutOfBranch { .. } => "out_of_branch",
        LinearSolve(_) => "linear_solve",
        IsomorphismViolation(_) => "isomorphism_violation",
        HypothesisViolation(_) => "hypothesis_violation",
        Divergence(_) => "divergence",
        Io(_) => "io",
        Serde(_) => "serde",
    }
}
