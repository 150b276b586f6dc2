use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;
use serde::Serialize;

use blocker_core::bench::{
    enroll_cohort, enrollment_recording, read_rows, record, run_conditions, run_protocol,
    run_snr_sweep, run_stress_sweep, subjects, write_plot_data, write_report, Arm, Condition,
    ExperimentConfig, NoiseModel, ReportRow,
};
use blocker_core::pufsim::{
    collect_crps, read_crps_csv, train_model, write_crps_csv, ArbiterPuf, Challenge, DeviceId,
};
use blocker_core::rng::{derive_seed, rng};
use blocker_core::sigproc::save_signal;
use blocker_core::synthecg::NoiseKind;
use blocker_core::Error;

#[derive(Parser)]
#[command(name = "blocker", version, about = "Biometric device locking experiments")]
struct Cli {
    /// TOML experiment configuration; omitted fields take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured root seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Run the noise-aware arm without the bandpass filter.
    #[arg(long, global = true)]
    skip_denoise: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic population and its recordings.
    SynthGen {
        /// Noise added to the verification recordings.
        #[arg(long)]
        noise: Option<NoiseKind>,
        #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
        snr: f64,
    },
    /// Enroll every subject under each arm and write helper data.
    Enroll,
    /// Regenerate keys under one noise condition.
    Regen {
        #[arg(long, default_value = "MIXED")]
        noise: NoiseKind,
        #[arg(long, default_value_t = -5.0, allow_negative_numbers = true)]
        snr: f64,
    },
    /// Reliability against SNR for every configured noise kind.
    SweepSnr,
    /// Reliability against stress scale.
    SweepStress,
    /// Simulate a PUF, collect CRPs and train the designer model.
    PufTrain {
        /// Number of CRPs to collect.
        #[arg(long)]
        crps: Option<usize>,
        /// Train from an existing CRP file instead of a simulated device.
        #[arg(long)]
        crps_in: Option<PathBuf>,
        #[arg(long, default_value = "dev-00")]
        device: String,
    },
    /// Enroll, claim, customize and authenticate simulated devices.
    BlockerDemo,
    /// Rebuild summary and plot data from a detail table.
    Report {
        /// Detail CSV; defaults to the one in the output directory.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.skip_denoise {
        cfg.na_model.skip_denoise = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn write_rows(rows: &[ReportRow], out: &Path) -> Result<(), Error> {
    let files = write_report(rows, out)?;
    let plot = write_plot_data(rows, out)?;
    info!(
        "wrote {}, {} and {}",
        files.detail.display(),
        files.summary.display(),
        plot.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct EnrollmentRecord {
    arm: &'static str,
    subject: String,
    enrolled: bool,
    key_len: usize,
    failure: String,
}

#[derive(Serialize)]
struct EntropyRecord {
    arm: &'static str,
    mean: Option<f64>,
    positions: Option<usize>,
    skipped: Option<usize>,
}

#[derive(Serialize)]
struct PufReport {
    device_id: String,
    n_stages: usize,
    crps: usize,
    train_accuracy: f64,
    holdout_accuracy: Option<f64>,
    fresh_accuracy: Option<f64>,
    epochs: usize,
    converged: bool,
}

const FRESH_CHALLENGES: usize = 1000;

fn synth_gen(cfg: &ExperimentConfig, out: &Path, noise: Option<NoiseKind>, snr: f64) -> Result<(), Error> {
    let subjects = subjects(cfg)?;
    let dir = out.join("signals");
    create_dir(&dir)?;
    write_json(&out.join("subjects.json"), &subjects)?;
    for s in &subjects {
        save_signal(&enrollment_recording(cfg, s)?, &dir.join(format!("{}_enroll.csv", s.id)))?;
        let verify = record(
            &s.params,
            cfg.regeneration.duration_s,
            noise.map(|k| (k, snr)),
            derive_seed(cfg.seed, &[u64::from(u32::MAX), s.index as u64]),
        )?;
        save_signal(&verify, &dir.join(format!("{}_verify.csv", s.id)))?;
    }
    Ok(())
}

fn enroll(cfg: &ExperimentConfig, out: &Path) -> Result<(), Error> {
    let subjects = subjects(cfg)?;
    let model = NoiseModel::from_config(cfg);
    let mut records = Vec::new();
    let mut entropy = Vec::new();
    for arm in [Arm::IombaRaw, Arm::Iomba, Arm::NaIomba] {
        let cohort = enroll_cohort(cfg, &subjects, arm, &model)?;
        let dir = out.join("helpers").join(arm.label());
        create_dir(&dir)?;
        for m in &cohort.members {
            if let Some(e) = &m.enrolled {
                write_text(&dir.join(format!("{}.json", m.subject.id)), &e.helper.to_json()?)?;
            }
            records.push(EnrollmentRecord {
                arm: arm.label(),
                subject: m.subject.id.clone(),
                enrolled: m.enrolled.is_some(),
                key_len: m.enrolled.as_ref().map_or(0, |e| e.key.len()),
                failure: m.failure.clone().unwrap_or_default(),
            });
        }
        entropy.push(EntropyRecord {
            arm: arm.label(),
            mean: cohort.entropy.as_ref().map(|e| e.mean),
            positions: cohort.entropy.as_ref().map(|e| e.per_position.len()),
            skipped: cohort.entropy.as_ref().map(|e| e.skipped),
        });
    }
    let path = out.join("enrollment.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for r in &records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    write_json(&out.join("entropy.json"), &entropy)
}

fn regen(cfg: &ExperimentConfig, out: &Path, noise: NoiseKind, snr: f64) -> Result<(), Error> {
    let subjects = subjects(cfg)?;
    let model = NoiseModel::from_config(cfg);
    let cohorts = [Arm::IombaRaw, Arm::Iomba, Arm::NaIomba]
        .into_iter()
        .map(|arm| enroll_cohort(cfg, &subjects, arm, &model))
        .collect::<Result<Vec<_>, _>>()?;
    let condition = Condition::Noise { kind: noise, snr_db: snr };
    let rows = run_conditions("regen", cfg, &subjects, &cohorts, &[condition])?;
    write_rows(&rows, out)
}

fn puf_train(
    cfg: &ExperimentConfig,
    out: &Path,
    crps: Option<usize>,
    crps_in: Option<&Path>,
    device: &str,
) -> Result<(), Error> {
    let dev = &cfg.protocol.device;
    let puf = ArbiterPuf::new(
        DeviceId::from(device),
        dev.n_stages,
        dev.puf_noise_sigma,
        derive_seed(cfg.seed, &[u64::from(u32::MAX) + 1]),
    )?;
    let set = match crps_in {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
            read_crps_csv(file, dev.n_stages)?
        }
        None => {
            let set = collect_crps(&puf, crps.unwrap_or(dev.initial_crps), derive_seed(cfg.seed, &[1]))?;
            let path = out.join("crps.csv");
            let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            write_crps_csv(&set, std::io::BufWriter::new(file))?;
            set
        }
    };
    let model = train_model(&set)?;
    write_text(&out.join("model.json"), &model.to_json()?)?;
    // Fresh-challenge accuracy only makes sense against the simulated device.
    let fresh_accuracy = if crps_in.is_none() {
        let mut r = rng(derive_seed(cfg.seed, &[2]));
        let challenges: Vec<Challenge> = (0..FRESH_CHALLENGES)
            .map(|_| Challenge::random(dev.n_stages, &mut r))
            .collect();
        let mut agree = 0usize;
        for c in &challenges {
            agree += usize::from(model.predict(c)? == puf.eval_noiseless(c)?);
        }
        Some(agree as f64 / FRESH_CHALLENGES as f64)
    } else {
        None
    };
    write_json(
        &out.join("puf_report.json"),
        &PufReport {
            device_id: device.to_string(),
            n_stages: dev.n_stages,
            crps: set.len(),
            train_accuracy: model.train_accuracy,
            holdout_accuracy: model.holdout_accuracy,
            fresh_accuracy,
            epochs: model.epochs,
            converged: model.converged,
        },
    )
}

fn blocker_demo(cfg: &ExperimentConfig, out: &Path) -> Result<(), Error> {
    let (report, transcript) = run_protocol(cfg)?;
    write_json(&out.join("protocol_report.json"), &report)?;
    write_text(&out.join("transcript.json"), &(transcript.to_json()? + "\n"))
}

fn run(cli: &Cli) -> Result<(), Error> {
    let cfg = load_config(cli)?;
    let out = cli.out.as_path();
    create_dir(out)?;
    write_text(&out.join("config.toml"), &cfg.to_toml()?)?;
    match &cli.command {
        Command::SynthGen { noise, snr } => synth_gen(&cfg, out, *noise, *snr),
        Command::Enroll => enroll(&cfg, out),
        Command::Regen { noise, snr } => regen(&cfg, out, *noise, *snr),
        Command::SweepSnr => write_rows(&run_snr_sweep(&cfg)?, out),
        Command::SweepStress => write_rows(&run_stress_sweep(&cfg)?, out),
        Command::PufTrain { crps, crps_in, device } => puf_train(&cfg, out, *crps, crps_in.as_deref(), device),
        Command::BlockerDemo => blocker_demo(&cfg, out),
        Command::Report { input } => {
            let input = input.clone().unwrap_or_else(|| out.join(blocker_core::bench::DETAIL_FILE));
            let rows = read_rows(&input)?;
            write_rows(&rows, out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
