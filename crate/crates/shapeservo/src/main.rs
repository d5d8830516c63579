use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use shapeservo::geometry::{resample_closed, Contour};
use shapeservo::harness::{
    compute_metrics, run_scenario, sweep, ControlMethod, Metrics, RunRecord, ScenarioConfig,
};
use shapeservo::moments::{extract_features_detailed, CameraSpec};

#[derive(Parser)]
#[command(name = "shapeservo", about = "Contour-moment shape servoing workbench", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario and write its tick log.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; the log is written as <method>.<format> inside it.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the configured controller/estimator pairing.
        #[arg(long)]
        method: Option<String>,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutFormat,
    },
    /// Run all four methods on the same scenario and print a comparison.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Method selection; only `all` is supported.
        #[arg(long, default_value = "all")]
        methods: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutFormat,
    },
    /// Print the feature breakdown of a contour file as JSON.
    Features {
        #[arg(long)]
        contour: PathBuf,
        #[arg(long, default_value_t = 640.0)]
        width: f64,
        #[arg(long, default_value_t = 480.0)]
        height: f64,
        /// Resample the contour before extraction.
        #[arg(long)]
        resample: Option<usize>,
    },
}

fn write_record(rec: &RunRecord, dir: &Path, format: OutFormat) -> shapeservo::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let (ext, path) = match format {
        OutFormat::Csv => ("csv", dir.join(format!("{}.csv", rec.method))),
        OutFormat::Json => ("json", dir.join(format!("{}.json", rec.method))),
    };
    let mut w = BufWriter::new(File::create(&path)?);
    match ext {
        "csv" => rec.write_csv(&mut w)?,
        _ => rec.write_json(&mut w)?,
    }
    Ok(path)
}

fn opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.4}"),
        None => "not-reached".into(),
    }
}

fn print_summary(rec: &RunRecord, m: &Metrics) {
    println!(
        "{:<14} converged={:<5} steps={:<5} e1={:.5} t_d={} t_s={} iae={:.4} T1_final={:.5} T1_max={:.5}{}",
        rec.method,
        rec.converged,
        rec.steps,
        m.e1_final,
        opt(m.t_d),
        opt(m.t_s),
        m.iae,
        m.t1_final,
        m.t1_max,
        rec.error
            .as_deref()
            .map(|e| format!("  ERROR: {e}"))
            .unwrap_or_default()
    );
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> shapeservo::Result<()> {
    match cli.cmd {
        Cmd::Run {
            config,
            out,
            method,
            seed,
            format,
        } => {
            let mut cfg = ScenarioConfig::from_path(&config)?;
            if let Some(m) = method {
                cfg.method = ControlMethod::parse(&m)?;
                cfg.estimator_override = None;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let rec = run_scenario(&cfg);
            print_summary(&rec, &compute_metrics(&rec, cfg.threshold));
            if let Some(dir) = out {
                let path = write_record(&rec, &dir, format)?;
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Cmd::Sweep {
            config,
            methods,
            out,
            seed,
            format,
        } => {
            if methods != "all" {
                return Err(shapeservo::Error::Config(format!(
                    "--methods {methods}: only `all` is supported"
                )));
            }
            let mut cfg = ScenarioConfig::from_path(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let recs = sweep(&cfg);
            for rec in &recs {
                print_summary(rec, &compute_metrics(rec, cfg.threshold));
                if let Some(dir) = &out {
                    let path = write_record(rec, dir, format)?;
                    println!("wrote {}", path.display());
                }
            }
            Ok(())
        }
        Cmd::Features {
            contour,
            width,
            height,
            resample,
        } => {
            let cam = CameraSpec::new(width, height)?;
            let mut c = Contour::from_path(&contour)?;
            if let Some(n) = resample {
                c = resample_closed(&c, n)?;
            }
            let breakdown = extract_features_detailed(&c, &cam)?;
            let json = serde_json::to_string_pretty(&breakdown)
                .map_err(|e| shapeservo::Error::Config(format!("JSON serialization: {e}")))?;
            println!("{json}");
            Ok(())
        }
    }
}
