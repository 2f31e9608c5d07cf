use clap::Parser;
use coexsim::config::{load_config, Scheme, SimConfig};
use coexsim::run::{check_output_writable, emit_results, run_experiment};
use coexsim::SimError;
use std::path::PathBuf;

/// System-level coexistence simulator: massive-MIMO cellular downlink and
/// Wi-Fi sharing the unlicensed 5 GHz band.
#[derive(Parser, Debug)]
#[command(name = "simulate", version, about)]
struct Args {
    /// TOML configuration file (all keys optional; defaults reproduce the
    /// reference scenario).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Scheme selection: mmimo-u, conventional-lbt, or both.
    #[arg(long)]
    scheme: Option<String>,

    /// Comma-separated antenna counts, e.g. 32,64,128.
    #[arg(long)]
    antennas: Option<String>,

    /// Monte-Carlo drops per (scheme, antenna count).
    #[arg(long)]
    drops: Option<usize>,

    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads (0 = one per core).
    #[arg(long)]
    workers: Option<usize>,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Also write the first drop's node layout as JSON per antenna count.
    #[arg(long, default_value_t = false)]
    dump_layout: bool,
}

fn build_config(args: &Args) -> Result<SimConfig, SimError> {
    let mut cfg = match &args.config {
        Some(path) => load_config(path)?,
        None => SimConfig::default(),
    };
    if let Some(s) = &args.scheme {
        cfg.scheme = match s.as_str() {
            "mmimo-u" => Scheme::MmimoU,
            "conventional-lbt" => Scheme::ConventionalLbt,
            "both" => Scheme::Both,
            other => {
                return Err(SimError::config(format!(
                    "unknown scheme '{other}' (expected mmimo-u, conventional-lbt or both)"
                )))
            }
        };
    }
    if let Some(list) = &args.antennas {
        let parsed: Result<Vec<usize>, _> =
            list.split(',').map(|x| x.trim().parse::<usize>()).collect();
        cfg.antennas =
            parsed.map_err(|e| SimError::config(format!("bad --antennas list: {e}")))?;
    }
    if let Some(d) = args.drops {
        cfg.drops = d;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(o) = &args.out {
        cfg.output_dir = o.to_string_lossy().into_owned();
    }
    // environment override applies to the output directory only
    if let Ok(dir) = std::env::var("COEXSIM_OUT_DIR") {
        if !dir.is_empty() {
            cfg.output_dir = dir;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: &Args) -> Result<(), SimError> {
    let cfg = build_config(args)?;
    check_output_writable(&cfg)?;
    let (result, manifest) = run_experiment(&cfg)?;
    emit_results(&result, &cfg, &manifest, args.dump_layout)?;
    for run in &result.runs {
        let cell = run.mean_cell_rate_bps() / 1e6;
        let wifi = run.mean_wifi_rate_bps() / 1e6;
        println!(
            "{:<16} N={:<4} drops={:<5} defer={:>5.1}%  grant={:>5.1}%  cell={:>7.1} Mbps  wifi={:>6.1} Mbps  aggregate={:>7.1} Mbps",
            run.scheme.label(),
            run.antennas,
            run.drops.len(),
            100.0 * run.defer_fraction(),
            100.0 * run.grant_fraction(),
            cell,
            wifi,
            cell + wifi,
        );
    }
    println!(
        "results written to {} (fig2/fig3/fig4 CSVs, summary.json, manifest.json) in {:.1} s",
        cfg.output_dir, manifest.wall_clock_s
    );
    Ok(())
}

fn main() {
    let args = Args::parse();
    if let Err(e) = run(&args) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
