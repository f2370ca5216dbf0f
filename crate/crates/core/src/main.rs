use clap::{Parser, Subcommand};
use fscn::error::FscnError;
use fscn::harness::{self, RunConfig, Snapshot, SweepPlan};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fscn", version, about = "Free-surface compressible Navier-Stokes runs, sweeps and verification")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Directory for output artifacts.
    #[arg(long, global = true, default_value = "fscn-out")]
    output_dir: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Only log errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Single run from a TOML configuration.
    Run { config: PathBuf },
    /// Parameter sweep from a TOML plan.
    Sweep { plan: PathBuf },
    /// Manufactured-solution refinement study.
    Mms {
        config: PathBuf,
        #[arg(long)]
        solution: String,
        /// Number of vertical resolutions.
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Print the header and field ranges of a snapshot.
    Inspect { snapshot: PathBuf },
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<RunConfig, FscnError> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<(), FscnError> {
    let out = &cli.output_dir;
    match &cli.cmd {
        Cmd::Run { config } => {
            let cfg = load_config(config, cli.seed)?;
            let o = harness::run(&cfg, Some(out))?;
            if let Some(e) = o.abort {
                return Err(e.into());
            }
            println!("{} steps to t = {}; outputs in {}", o.steps, o.last.t, out.display());
        }
        Cmd::Sweep { plan } => {
            let mut p = SweepPlan::load(plan)?;
            if let Some(s) = cli.seed {
                p.base.seed = s;
            }
            let o = harness::sweep(&p, Some(out))?;
            let r = &o.report;
            for c in &r.cauchy {
                println!("cauchy {:.3e} -> {:.3e}: v {:.6e}  rho {:.6e}  h {:.6e}", c.a, c.b, c.v_sup, c.rho_sup, c.h_w1inf);
            }
            for c in &r.limit {
                println!("limit  {:.3e}: v {:.6e}  rho {:.6e}  h {:.6e}", c.a, c.v_sup, c.rho_sup, c.h_w1inf);
            }
            if let Some(t) = &r.theta {
                println!("theta max/min {:.4}", t.ratio);
            }
            if let Some(l) = &r.layer {
                println!(
                    "layer slopes: eps dzz {:.3}  dzz {:.3}  width {:.3}",
                    l.eps_dzz_slope, l.dzz_slope, l.width_slope
                );
            }
            let aborted = r.members.iter().filter(|m| m.aborted).count();
            println!("{} members, {aborted} aborted; report in {}", r.members.len(), out.join("sweep.json").display());
        }
        Cmd::Mms {
            config,
            solution,
            levels,
        } => {
            let cfg = load_config(config, cli.seed)?;
            let t = harness::mms_verify(&cfg, solution, *levels)?;
            harness::write_table(out, &t)?;
            print!("{}", t.to_csv());
            let show = |o: Option<f64>| o.map_or("exact".to_string(), |x| format!("{x:.3}"));
            println!(
                "orders: rho {}  v {}  h {}",
                show(t.order_rho),
                show(t.order_v),
                show(t.order_h)
            );
            if !t.passed() {
                return Err(FscnError::Verification(format!(
                    "observed order {:.3} below {}",
                    t.min_order().unwrap_or(0.0),
                    harness::MIN_ORDER
                )));
            }
        }
        Cmd::Inspect { snapshot } => {
            print!("{}", Snapshot::load(snapshot)?.describe());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
