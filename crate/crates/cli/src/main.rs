//! Command-line entry point tying the pipeline together: dataset generation,
//! training, evaluation, spectral reports, and the end-to-end comparison.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use oobclass::baseband::{generate_tone, modulate, ModulationScheme, PulseKind, PulseShapeConfig};
use oobclass::channel::{CaptureMode, ChannelConfig};
use oobclass::dataset::{
    self, generate_dataset, read_dataset, split_dataset, write_dataset, Split,
};
use oobclass::impairments::{
    apply_dc_offset, apply_pa_saleh, parse_profiles, DeviceProfile, PaConfig,
};
use oobclass::nn::{
    confusion_to_csv, evaluate, load_checkpoint, metrics_to_csv, save_checkpoint, train, Model,
    ModelConfig, TrainConfig,
};
use oobclass::spectral::{acpr, band_power, dc_spur_db, welch_psd, write_psd, WindowKind};
use oobclass::Waveform;
use std::path::{Path, PathBuf};

/// Simulate hardware-impaired transmitters and classify them from IQ frames.
#[derive(Parser)]
#[command(name = "oobclass", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled IQ-frame dataset for a set of device profiles.
    Generate(GenerateArgs),
    /// Train the CNN classifier on a generated dataset.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset split.
    Evaluate(EvaluateArgs),
    /// Emit PSD reports: PA regrowth, phase-noise skirts, DC spurs.
    Psd(PsdArgs),
    /// Chain generate/train/evaluate for both capture modes and compare.
    Reproduce(ReproduceArgs),
}

fn default_out_dir() -> PathBuf {
    std::env::var_os("OOBCLASS_OUT_DIR").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

#[derive(Args)]
struct GenerateArgs {
    /// Device profile configuration file.
    #[arg(long)]
    profiles: PathBuf,
    /// Capture mode: in-band | with-oob.
    #[arg(long, default_value = "with-oob")]
    mode: String,
    /// Frames per device.
    #[arg(long, default_value_t = 4000)]
    frames: usize,
    /// Per-sample complex SNR at the internal rate, in dB (>= 300 disables noise).
    #[arg(long, default_value_t = 20.0)]
    snr_db: f64,
    /// Master seed for payload bits and noise streams.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Disable per-frame RMS normalization.
    #[arg(long, default_value_t = false)]
    raw: bool,
    /// Output dataset path (default <out-dir>/dataset-<mode>.rfiq).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Output directory (overridden by OOBCLASS_OUT_DIR).
    #[arg(long, default_value_os_t = default_out_dir())]
    out_dir: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset file produced by `generate`.
    #[arg(long)]
    dataset: PathBuf,
    /// Training epochs.
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    /// Minibatch size.
    #[arg(long, default_value_t = 128)]
    batch_size: usize,
    /// Initial learning rate.
    #[arg(long, default_value_t = 0.02)]
    lr: f32,
    /// Learning-rate drop factor.
    #[arg(long, default_value_t = 0.1)]
    lr_drop_factor: f32,
    /// Epochs between learning-rate drops.
    #[arg(long, default_value_t = 9)]
    lr_drop_period: usize,
    /// Momentum coefficient.
    #[arg(long, default_value_t = 0.9)]
    momentum: f32,
    /// Seed for weight init, shuffling and dropout.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Split minibatches across threads (bit-identical to single-threaded).
    #[arg(long, default_value_t = false)]
    parallel: bool,
    /// Checkpoint output path (default <out-dir>/model.ckpt).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Metrics log output path (default <out-dir>/metrics.csv).
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Output directory (overridden by OOBCLASS_OUT_DIR).
    #[arg(long, default_value_os_t = default_out_dir())]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Dataset file.
    #[arg(long)]
    dataset: PathBuf,
    /// Model checkpoint.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Which split to evaluate: train | val | test.
    #[arg(long, default_value = "test")]
    split: String,
    /// Split shuffle seed (must match the one used for training).
    #[arg(long, default_value_t = 1)]
    split_seed: u64,
    /// Confusion matrix output path (default <out-dir>/confusion.csv).
    #[arg(long)]
    confusion: Option<PathBuf>,
    /// Output directory (overridden by OOBCLASS_OUT_DIR).
    #[arg(long, default_value_os_t = default_out_dir())]
    out_dir: PathBuf,
}

#[derive(Args)]
struct PsdArgs {
    /// Optional profile file; defaults to the built-in five-device set.
    #[arg(long)]
    profiles: Option<PathBuf>,
    /// Output directory (overridden by OOBCLASS_OUT_DIR).
    #[arg(long, default_value_os_t = default_out_dir())]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Device profile configuration file.
    #[arg(long)]
    profiles: PathBuf,
    /// Frames per device.
    #[arg(long, default_value_t = 4000)]
    frames: usize,
    /// Per-sample complex SNR at the internal rate, in dB.
    #[arg(long, default_value_t = 20.0)]
    snr_db: f64,
    /// Training epochs.
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    /// Master seed.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Split minibatches across threads (bit-identical to single-threaded).
    #[arg(long, default_value_t = false)]
    parallel: bool,
    /// Output directory (overridden by OOBCLASS_OUT_DIR).
    #[arg(long, default_value_os_t = default_out_dir())]
    out_dir: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => cmd_generate(&args).map(|_| ()),
        Command::Train(args) => cmd_train(&args).map(|_| ()),
        Command::Evaluate(args) => cmd_evaluate(&args).map(|_| ()),
        Command::Psd(args) => cmd_psd(&args),
        Command::Reproduce(args) => cmd_reproduce(&args),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn load_profiles(path: &Path) -> Result<Vec<DeviceProfile>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading profiles {}", path.display()))?;
    Ok(parse_profiles(&text)?)
}

fn cmd_generate(args: &GenerateArgs) -> Result<PathBuf> {
    let profiles = load_profiles(&args.profiles)?;
    let mode = CaptureMode::parse(&args.mode)?;
    let channel = ChannelConfig { snr_db: args.snr_db, seed: args.seed ^ 0xc4a77e };
    let ds = generate_dataset(&profiles, args.frames, mode, &channel, args.seed, !args.raw)?;
    let path = args
        .output
        .clone()
        .unwrap_or_else(|| args.out_dir.join(format!("dataset-{}.rfiq", mode.as_str())));
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    write_dataset(&ds, &path)?;
    println!("dataset: {}", path.display());
    for (d, p) in profiles.iter().enumerate() {
        println!("  device {d} ({}): {} frames", p.name, args.frames);
    }
    Ok(path)
}

fn split_of<'a>(split: &'a Split, which: &str) -> Result<&'a [u32]> {
    match which {
        "train" => Ok(&split.train),
        "val" => Ok(&split.val),
        "test" => Ok(&split.test),
        other => bail!("unknown split '{other}' (expected train|val|test)"),
    }
}

fn cmd_train(args: &TrainArgs) -> Result<(PathBuf, PathBuf)> {
    let ds = read_dataset(&args.dataset)?;
    let split = split_dataset(&ds, ds.manifest.split_fractions, args.seed)?;
    let mut model = Model::new(ModelConfig::new(ds.device_count()), args.seed);
    let cfg = TrainConfig {
        initial_lr: args.lr,
        lr_drop_factor: args.lr_drop_factor,
        lr_drop_period: args.lr_drop_period,
        momentum: args.momentum,
        batch_size: args.batch_size,
        epochs: args.epochs,
        seed: args.seed,
        parallel: args.parallel,
    };
    let metrics = train(&mut model, &ds, &split.train, &split.val, &cfg)?;
    for m in &metrics {
        println!(
            "epoch {}: lr {} train_loss {:.4} train_acc {:.4} val_acc {:.4}",
            m.epoch, m.lr, m.train_loss, m.train_acc, m.val_acc
        );
    }
    std::fs::create_dir_all(&args.out_dir)?;
    let ckpt = args.checkpoint.clone().unwrap_or_else(|| args.out_dir.join("model.ckpt"));
    let metrics_path = args.metrics.clone().unwrap_or_else(|| args.out_dir.join("metrics.csv"));
    save_checkpoint(&mut model, &ckpt)?;
    std::fs::write(&metrics_path, metrics_to_csv(&metrics))?;
    println!("checkpoint: {}", ckpt.display());
    println!("metrics: {}", metrics_path.display());
    Ok((ckpt, metrics_path))
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<f64> {
    let ds = read_dataset(&args.dataset)?;
    let mut model = load_checkpoint(&args.checkpoint)?;
    if model.config.classes != ds.device_count() {
        bail!(
            "checkpoint expects {} devices but dataset has {}",
            model.config.classes,
            ds.device_count()
        );
    }
    if model.config.input_width != ds.manifest.frame_len as usize {
        bail!(
            "checkpoint expects frames of width {} but dataset has {}",
            model.config.input_width,
            ds.manifest.frame_len
        );
    }
    let split = split_dataset(&ds, ds.manifest.split_fractions, args.split_seed)?;
    let indices = split_of(&split, &args.split)?;
    let (accuracy, confusion) = evaluate(&mut model, &ds, indices, false)?;
    println!("accuracy: {accuracy:.4}");
    std::fs::create_dir_all(&args.out_dir)?;
    let path = args.confusion.clone().unwrap_or_else(|| args.out_dir.join("confusion.csv"));
    std::fs::write(&path, confusion_to_csv(&confusion))?;
    println!("confusion: {}", path.display());
    Ok(accuracy)
}

/// Build a long modulated waveform for the spectral reports.
fn report_waveform(scheme: ModulationScheme, seed: u64) -> Result<Waveform> {
    let shape = match scheme {
        ModulationScheme::Bfsk { .. } => PulseShapeConfig {
            kind: PulseKind::RectangularHold,
            samples_per_symbol: dataset::SAMPLES_PER_SYMBOL,
            ..Default::default()
        },
        _ => dataset::default_pulse_shape(),
    };
    let n_symbols = 6000;
    let bits =
        oobclass::seeds::random_bits(&[seed, 0x9d], n_symbols * scheme.bits_per_symbol());
    let mut w = modulate(&bits, scheme, &shape, dataset::INTERNAL_RATE_HZ)?;
    w.normalize_power(1.0);
    Ok(w)
}

fn psd_of(w: &Waveform) -> Result<oobclass::spectral::PsdEstimate> {
    Ok(welch_psd(w, 4096, 0.5, WindowKind::Hann)?)
}

fn cmd_psd(args: &PsdArgs) -> Result<()> {
    let profiles = match &args.profiles {
        Some(p) => load_profiles(p)?,
        None => oobclass::impairments::table1_profiles(),
    };
    let dir = &args.out_dir;
    std::fs::create_dir_all(dir)?;
    let b = dataset::B_MSG_HZ;
    let main_band = (-0.5 * b, 0.5 * b);
    let adj_band = (0.5 * b, 1.5 * b);
    let mut summary = String::new();

    let saleh = |p: &DeviceProfile| match p.pa {
        PaConfig::Saleh { aa, ba, ap, bp } => (aa, ba, ap, bp),
        PaConfig::Linear => (1.0, 1e-9, 0.0, 1e-9),
    };

    // PA nonlinearity: constant-envelope BFSK barely changes, 16QAM regrows
    let bfsk = report_waveform(
        ModulationScheme::Bfsk { tone_separation_hz: dataset::INTERNAL_RATE_HZ / 22.0 },
        1,
    )?;
    let (aa, ba, ap, bp) = saleh(&profiles[0]);
    let bfsk_lin = psd_of(&bfsk)?;
    let bfsk_pa = psd_of(&apply_pa_saleh(&bfsk, aa, ba, ap, bp)?)?;
    write_psd(&bfsk_lin, &dir.join("bfsk_linear.psd"))?;
    write_psd(&bfsk_pa, &dir.join("bfsk_saleh.psd"))?;
    let bfsk_acpr_delta = acpr(&bfsk_pa, main_band, adj_band)? - acpr(&bfsk_lin, main_band, adj_band)?;
    summary.push_str(&format!("bfsk_acpr_delta_db = {bfsk_acpr_delta:.3}\n"));

    let qam = report_waveform(ModulationScheme::Qam16, 2)?;
    let qam_lin_psd = psd_of(&qam)?;
    write_psd(&qam_lin_psd, &dir.join("qam16_linear.psd"))?;
    let acpr_lin = acpr(&qam_lin_psd, main_band, adj_band)?;
    summary.push_str(&format!("qam16_linear_acpr_db = {acpr_lin:.3}\n"));
    for (i, p) in profiles.iter().take(2).enumerate() {
        let (aa, ba, ap, bp) = saleh(p);
        let psd = psd_of(&apply_pa_saleh(&qam, aa, ba, ap, bp)?)?;
        write_psd(&psd, &dir.join(format!("qam16_saleh_dev{}.psd", i + 1)))?;
        let a = acpr(&psd, main_band, adj_band)?;
        summary.push_str(&format!("qam16_saleh_dev{}_acpr_db = {a:.3}\n", i + 1));
    }

    // phase-noise skirts on a carrier: ideal LO vs -80 and -72 dBc/Hz at a
    // 2 kHz offset (1 MHz scaled into the normalized frequency plan)
    let offset = 0.02 * b;
    let n = 1 << 18;
    let tone = generate_tone(0.0, dataset::INTERNAL_RATE_HZ, n)?;
    write_psd(&psd_of(&tone)?, &dir.join("pn_ideal.psd"))?;
    let mut skirts = vec![("pn_ideal", psd_of(&tone)?)];
    for (name, level) in [("pn_80dbchz", -80.0), ("pn_72dbchz", -72.0)] {
        let theta = oobclass::impairments::synthesize_phase_noise(
            n,
            dataset::INTERNAL_RATE_HZ,
            &[level],
            &[offset],
            55,
        )?;
        let noisy = oobclass::impairments::apply_phase_noise(&tone, &theta)?;
        let psd = psd_of(&noisy)?;
        write_psd(&psd, &dir.join(format!("{name}.psd")))?;
        skirts.push((name, psd));
    }
    for (name, psd) in &skirts {
        let skirt = band_power(psd, offset - 2.0 * psd.resolution_hz, offset + 2.0 * psd.resolution_hz)?;
        summary.push_str(&format!("{name}_skirt_db = {skirt:.3}\n"));
    }

    // DC offsets on identical unit-power signals
    for (name, dc) in [("dc_none", 0.0), ("dc_05", 0.5), ("dc_09", 0.9)] {
        let shifted = apply_dc_offset(&qam, dc, dc);
        let psd = psd_of(&shifted)?;
        write_psd(&psd, &dir.join(format!("{name}.psd")))?;
        summary.push_str(&format!("{name}_spur_db = {:.3}\n", dc_spur_db(&psd)));
    }

    std::fs::write(dir.join("spectral_summary.txt"), &summary)?;
    print!("{summary}");
    println!("reports written to {}", dir.display());
    Ok(())
}

fn cmd_reproduce(args: &ReproduceArgs) -> Result<()> {
    std::fs::create_dir_all(&args.out_dir)?;
    let mut accuracies = Vec::new();
    for mode in ["in-band", "with-oob"] {
        let gen = GenerateArgs {
            profiles: args.profiles.clone(),
            mode: mode.into(),
            frames: args.frames,
            snr_db: args.snr_db,
            seed: args.seed,
            raw: false,
            output: None,
            out_dir: args.out_dir.clone(),
        };
        let dataset_path = cmd_generate(&gen)?;
        let train_args = TrainArgs {
            dataset: dataset_path.clone(),
            epochs: args.epochs,
            batch_size: 128,
            lr: 0.02,
            lr_drop_factor: 0.1,
            lr_drop_period: 9,
            momentum: 0.9,
            seed: args.seed,
            parallel: args.parallel,
            checkpoint: Some(args.out_dir.join(format!("model-{mode}.ckpt"))),
            metrics: Some(args.out_dir.join(format!("metrics-{mode}.csv"))),
            out_dir: args.out_dir.clone(),
        };
        let (ckpt, _) = cmd_train(&train_args)?;
        let eval_args = EvaluateArgs {
            dataset: dataset_path,
            checkpoint: ckpt,
            split: "test".into(),
            split_seed: args.seed,
            confusion: Some(args.out_dir.join(format!("confusion-{mode}.csv"))),
            out_dir: args.out_dir.clone(),
        };
        let acc = cmd_evaluate(&eval_args)?;
        accuracies.push((mode, acc));
    }
    println!("\ncapture-mode comparison (test accuracy):");
    for (mode, acc) in &accuracies {
        println!("  {mode:>8}: {:.1}%", 100.0 * acc);
    }
    let gap = accuracies[1].1 - accuracies[0].1;
    println!("  with-oob minus in-band: {:+.1} points", 100.0 * gap);
    Ok(())
}
