use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ris_zf::channel::{write_channel_dump, ChannelSampler};
use ris_zf::harness::{emit_outputs, run_sweep};
use ris_zf::metrics::{complexity_counts_with, DTermReading};
use ris_zf::schedule::{probe_powers, schedule, Assignment, CandidateChannels, ScheduleParams};
use ris_zf::sysconfig::{validate_config, RawConfig};
use ris_zf::Error;

#[derive(Parser)]
#[command(
    name = "ris-zf",
    version,
    about = "Multi-RIS zero-forcing downlink simulator"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the Monte Carlo sweep and write CSV outputs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override a config key, e.g. `--set trials=50`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Check a config against the feasibility conditions of each scheme.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Print multiplication counts as CSV.
    Complexity {
        /// Antenna range `a..b` (inclusive) or a comma list.
        #[arg(long = "M")]
        m: String,
        /// RIS element counts, comma separated.
        #[arg(long = "N", default_value = "4")]
        n: String,
        #[arg(long = "K", default_value_t = 4)]
        k: u64,
        /// Blocked UEs in total.
        #[arg(long = "Ub", default_value_t = 4)]
        ub: u64,
        #[arg(long = "Ud", default_value_t = 2)]
        ud: u64,
        /// Read the `d` term as this literal instead of U_d.
        #[arg(long)]
        literal_d: Option<u64>,
    },
    /// Write one sampled channel set to a text file.
    Dump {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Probe a random candidate pool and print the schedule.
    Probe {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Candidate UEs without a direct path.
        #[arg(long, default_value_t = 6)]
        blocked: usize,
        /// Candidate UEs with a direct path.
        #[arg(long, default_value_t = 4)]
        direct: usize,
        #[arg(long, default_value_t = 6)]
        u_max: usize,
        #[arg(long, default_value_t = 0.0)]
        p_min: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load(path: &Path, set: &[String]) -> Result<RawConfig, Error> {
    let mut raw = RawConfig::from_path(path)?;
    for s in set {
        raw.set(s)?;
    }
    Ok(raw)
}

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Parse { .. } | Error::UnknownKey { .. } | Error::Range { .. } | Error::Io { .. }
    )
}

fn parse_list(s: &str) -> Result<Vec<u64>, String> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|e| format!("{s}: {e}"))?;
        let b: u64 = b.trim().parse().map_err(|e| format!("{s}: {e}"))?;
        if a > b {
            return Err(format!("empty range {s}"));
        }
        return Ok((a..=b).collect());
    }
    s.split(',')
        .map(|x| x.trim().parse().map_err(|e| format!("{x}: {e}")))
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if is_config_error(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn real_main(cli: Cli) -> Result<ExitCode, Error> {
    match cli.cmd {
        Cmd::Run {
            config,
            set,
            out,
            seed,
            trials,
            threads,
        } => {
            let (sys, ch, mut run) = load(&config, &set)?.build()?;
            if let Some(o) = out {
                run.output_dir = o;
            }
            if let Some(s) = seed {
                run.master_seed = s;
            }
            if let Some(t) = trials {
                if t == 0 {
                    return Err(Error::Range {
                        key: "trials".into(),
                        msg: "must be a positive integer".into(),
                    });
                }
                run.trials = t;
            }
            if let Some(t) = threads {
                run.threads = t;
            }
            let summary = run_sweep(&run, &sys, &ch)?;
            for path in emit_outputs(&summary, &run.output_dir)? {
                println!("wrote {}", path.display());
            }
            for k in &summary.skipped {
                eprintln!(
                    "skipped {} M={} N={}: {}",
                    k.scheme, k.antennas, k.elements, k.reason
                );
            }
            if summary.flagged() {
                for r in summary.rows.iter().filter(|r| r.flagged) {
                    eprintln!(
                        "flagged {} {} M={} N={} tau={}: {} of {} trials failed",
                        r.scheme,
                        r.curve.as_str(),
                        r.antennas,
                        r.elements,
                        r.csi_tau,
                        r.failures,
                        r.failures + r.trials
                    );
                }
                return Ok(ExitCode::from(3));
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Validate { config, set } => {
            let (sys, ch, run) = load(&config, &set)?.build()?;
            let mut ok = true;
            for &scheme in &run.schemes {
                let report = validate_config(&sys, &ch, scheme);
                print!("{report}");
                ok &= report.passed();
            }
            Ok(if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
        Cmd::Complexity {
            m,
            n,
            k,
            ub,
            ud,
            literal_d,
        } => {
            let (ms, ns) = match (parse_list(&m), parse_list(&n)) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(e), _) | (_, Err(e)) => {
                    return Err(Error::Range {
                        key: "complexity".into(),
                        msg: e,
                    })
                }
            };
            let d = literal_d.map_or(DTermReading::DirectUsers, DTermReading::Literal);
            println!("M,N,K,U_b,U_d,bs_ue_zf,bs_ris_zf");
            for &n in &ns {
                for &m in &ms {
                    let c = complexity_counts_with(m, n, k, ub, ud, d);
                    println!("{m},{n},{k},{ub},{ud},{},{}", c.bs_ue_zf, c.bs_ris_zf);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Dump {
            config,
            set,
            seed,
            out,
        } => {
            let (sys, ch, _) = load(&config, &set)?.build()?;
            let chs = ChannelSampler::from_config(&sys, &ch)?.sample(seed);
            write_channel_dump(&chs, &out)?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Probe {
            config,
            set,
            blocked,
            direct,
            u_max,
            p_min,
            seed,
        } => {
            let (sys, ch, _) = load(&config, &set)?.build()?;
            let pool = CandidateChannels::sample(
                sys.antennas,
                sys.elements,
                sys.num_ris,
                blocked,
                direct,
                ch.element_gain(),
                ch.ris_ue_link_variance,
                ch.direct_link_variance,
                seed,
            );
            let table = probe_powers(&pool)?;
            print!("{}", table.to_csv());
            let out = schedule(&table, &ScheduleParams { u_max, p_min });
            println!("ue_id,assignment");
            for u in &out.scheduled {
                match out.assignment[u] {
                    Assignment::Direct => println!("{u},direct"),
                    Assignment::Ris(k) => println!("{u},ris_{k}"),
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
