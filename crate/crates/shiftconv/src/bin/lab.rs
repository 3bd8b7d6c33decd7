use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_rational::Ratio;

use shiftconv::detmat::{correspondence_check, split_check, DetInstance};
use shiftconv::experiments::{
    exponent_calculator, format_exponent_table, run_experiment, to_ratio, verify_all, CheckResult, ExperimentConfig,
};
use shiftconv::mainterm::{main_term, Truncation};
use shiftconv::sl2::{coset_list, ksum_b, ksum_c, AutoWeight};
use shiftconv::sums::{certain_sum, direct_sum, verify_partition_grid, CertainQuery, ConvolutionQuery};
use shiftconv::weights::SmoothWeight;
use shiftconv::{Error, Result};

#[derive(Parser)]
#[command(name = "lab", about = "Shifted divisor convolution experiments and checks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an S - M grid experiment and print CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the exponent table.
    Exponents {
        #[arg(long, default_value = "0.0625")]
        delta: f64,
        #[arg(long, default_value = "0.109375")]
        theta: f64,
        #[arg(long, default_value = "0")]
        h_exp: f64,
    },
    /// Run every bundled check.
    VerifyAll {
        #[arg(long, default_value = "0")]
        seed: u64,
    },
    /// Coset counts against psi(q1) psi(q2).
    VerifyCosets {
        #[arg(long, default_value = "10")]
        qmax: u64,
    },
    /// K-sum envelope ratios.
    VerifyKsum {
        #[arg(long, default_value = "15")]
        rmax: u64,
        #[arg(long, default_value = "64")]
        bmax: u64,
    },
    /// Determinant correspondence for one instance.
    VerifyDetmat {
        #[arg(long)]
        r1: u64,
        #[arg(long)]
        r2: u64,
        #[arg(long, allow_hyphen_values = true)]
        h: i64,
        #[arg(long, default_value = "10000")]
        x: f64,
    },
    /// Main term M(x).
    Mainterm {
        #[arg(long)]
        k: u32,
        #[arg(long, allow_hyphen_values = true)]
        h: i64,
        #[arg(long)]
        x: f64,
        #[arg(long, default_value = "mollifier")]
        weight: String,
        #[arg(long, default_value = "hyperbola")]
        truncation: String,
    },
    /// Direct smoothed sum S(x).
    Sum {
        #[arg(long)]
        k: u32,
        #[arg(long, allow_hyphen_values = true)]
        h: i64,
        #[arg(long)]
        x: f64,
        #[arg(long, default_value = "mollifier")]
        weight: String,
    },
    /// Smoothed sum over r1 n1 - r2 n2 = h.
    CertainSum {
        #[arg(long)]
        r1: u64,
        #[arg(long)]
        r2: u64,
        #[arg(long, allow_hyphen_values = true)]
        h: i64,
        #[arg(long)]
        x: f64,
        #[arg(long, default_value = "mollifier")]
        weight: String,
    },
    /// Partition lemma over a simplex grid.
    VerifyPartition {
        #[arg(long, default_value = "48")]
        grid_resolution: i64,
        #[arg(long, default_value = "5")]
        kmax: usize,
        #[arg(long, default_value = "0.0625")]
        delta: f64,
    },
}

fn report(checks: &[CheckResult]) -> i32 {
    for c in checks {
        println!("{}", c.line());
    }
    i32::from(!checks.iter().all(|c| c.passed))
}

fn run(cli: Cli) -> Result<i32> {
    match cli.cmd {
        Cmd::Run { config, out } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let rep = run_experiment(&cfg)?;
            let csv = rep.to_csv();
            match out {
                Some(p) => std::fs::write(&p, csv).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
                None => print!("{csv}"),
            }
            let slope = rep.fitted_slope.map_or("undefined".to_string(), |s| format!("{s:.4}"));
            eprintln!("fitted slope {slope}, predicted exponent {:.5}", rep.predicted_exponent);
            eprintln!("slope of S {:.4}, slope of M {:.4}", rep.slope_s, rep.slope_m);
            if !rep.dropped.is_empty() {
                eprintln!("dropped below noise floor: {:?}", rep.dropped);
            }
            Ok(0)
        }
        Cmd::Exponents { delta, theta, h_exp } => {
            let t = exponent_calculator(to_ratio(delta), to_ratio(theta), to_ratio(h_exp))?;
            print!("{}", format_exponent_table(&t));
            Ok(0)
        }
        Cmd::VerifyAll { seed } => Ok(report(&verify_all(seed)?)),
        Cmd::VerifyCosets { qmax } => {
            println!("q1,q2,count,psi_product,ratio");
            let mut ok = true;
            for q1 in 1..=qmax {
                for q2 in 1..=qmax {
                    let n = coset_list(q1, q2)?.len() as u64;
                    let p = shiftconv::arith::psi(q1) * shiftconv::arith::psi(q2);
                    if num_integer::Integer::gcd(&q1, &q2) == 1 {
                        ok &= n == p;
                    }
                    println!("{q1},{q2},{n},{p},{}", n as f64 / p as f64);
                }
            }
            Ok(i32::from(!ok))
        }
        Cmd::VerifyKsum { rmax, bmax } => {
            println!("r1,r2,b,ksum_b,envelope_b,ratio_b,ksum_c,envelope_c,ratio_c");
            let mut ok = true;
            let sf: Vec<u64> = (1..=rmax).filter(|&r| shiftconv::arith::is_squarefree(r)).collect();
            for &r1 in &sf {
                for &r2 in &sf {
                    let w = AutoWeight::alpha0(r1, r2)?;
                    let (r0, t) = ((w.r0 * w.r0) as f64, (w.rt1 * w.rt2) as f64);
                    let mut b = 1;
                    while b <= bmax {
                        let bf = b as f64;
                        let (kb, kc) = (ksum_b(&w, bf)?, ksum_c(&w, bf)?);
                        let (eb, ec) = (8.0 * r0 * (bf + 1.0), 8.0 * (r0 * bf / t + r0));
                        ok &= kb <= eb && kc <= ec;
                        println!("{r1},{r2},{b},{kb},{eb},{},{kc},{ec},{}", kb / eb, kc / ec);
                        b *= 2;
                    }
                }
            }
            Ok(i32::from(!ok))
        }
        Cmd::VerifyDetmat { r1, r2, h, x } => {
            let inst = DetInstance::new(r1, r2, h)?;
            let c = correspondence_check(&inst, x)?;
            let s = split_check(&inst, x)?;
            println!("count_direct,count_matrix,equal,split_members,split_bijective");
            println!("{},{},{},{},{}", c.count_direct, c.count_matrix, c.equal, s.members, s.bijective);
            Ok(i32::from(!(c.equal && s.bijective && s.coprime)))
        }
        Cmd::Mainterm { k, h, x, weight, truncation } => {
            let w = SmoothWeight::by_name(&weight)?;
            let m = main_term(k, h, x, &w, Truncation::by_name(&truncation)?)?;
            println!("M = {}", m.value);
            println!("terms = {}, largest m = {}, top-half contribution = {}", m.terms, m.m_max, m.top_half);
            Ok(0)
        }
        Cmd::Sum { k, h, x, weight } => {
            let w = SmoothWeight::by_name(&weight)?;
            println!("k,h,x,S");
            println!("{k},{h},{x},{}", direct_sum(&ConvolutionQuery { k, h, x, w })?);
            Ok(0)
        }
        Cmd::CertainSum { r1, r2, h, x, weight } => {
            let w = SmoothWeight::by_name(&weight)?;
            let s = certain_sum(&CertainQuery { r1, r2, h, x, w1: w.clone(), w2: w })?;
            println!("r1,r2,h,x,sum");
            println!("{r1},{r2},{h},{x},{s}");
            Ok(0)
        }
        Cmd::VerifyPartition { grid_resolution, kmax, delta } => {
            let d: Ratio<i64> = to_ratio(delta);
            let r = verify_partition_grid(grid_resolution, kmax, d)?;
            println!("resolution,kmax,delta,points,case_a,case_b,case_c,violations");
            println!("{grid_resolution},{kmax},{d},{},{},{},{},{}", r.points, r.count_a, r.count_b, r.count_c, r.violations);
            if let Some(v) = r.first_violation {
                eprintln!("first violation at {v:?}");
            }
            Ok(i32::from(r.violations > 0))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
