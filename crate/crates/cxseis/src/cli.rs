//! Command implementations behind the `cxseis` binary.
//!
//! Exit codes: 0 success, 2 config error, 3 data error, 4 numeric
//! failure. All randomness flows from seeds in the config; the
//! `CXSEIS_WORKERS` environment variable caps worker parallelism.

use clap::{Parser, Subcommand};
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::data::{
    extract_patches, extract_patches_complex, load_npy, normalize, save_npy, split_patches,
    SeismicVolume,
};
use crate::error::{Error, Result};
use crate::evaluate::{evaluate_model, fk_report, write_pgm, Reconstructor, Region};
use crate::grid::Array2D;
use crate::model::{
    build, load_weights, published_count, save_weights, ArchitectureSpec, Domain, Preset,
};
use crate::signal::{dc_aliasing_profile, hilbert_volume, Trace};
use crate::train::multi_seed;

#[derive(Parser)]
#[command(
    name = "cxseis",
    about = "Complex-valued convolutional auto-encoders for seismic sections",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic seismic volume.
    Synth {
        /// Experiment config (JSON) with a data.synth block.
        #[arg(long)]
        config: PathBuf,
        /// Output NPY volume.
        #[arg(long)]
        out: PathBuf,
    },
    /// Analytic signal of every trace of a volume.
    Hilbert {
        /// Input NPY volume (inline, crossline, time).
        #[arg(long = "in")]
        input: PathBuf,
        /// Output NPY for the demeaned real component.
        #[arg(long)]
        out_re: PathBuf,
        /// Output NPY for the quadrature.
        #[arg(long)]
        out_im: PathBuf,
        /// Seconds per time sample.
        #[arg(long, default_value_t = 0.004)]
        dt: f64,
    },
    /// Train the configured auto-encoder, one run per seed.
    Train {
        /// Experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Directory for per-seed run outputs.
        #[arg(long)]
        out_dir: PathBuf,
        /// Override the config's model preset.
        #[arg(long)]
        model: Option<String>,
    },
    /// Evaluate saved weights on a 2D section.
    Eval {
        /// Weight container.
        #[arg(long)]
        weights: PathBuf,
        /// Input NPY section (traces, time).
        #[arg(long = "in")]
        input: PathBuf,
        /// JSON list of evaluation regions.
        #[arg(long)]
        regions: Option<PathBuf>,
        /// Report output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.004)]
        dt: f64,
        #[arg(long, default_value_t = 25.0)]
        dx: f64,
        /// Band split for the FK energy summary.
        #[arg(long, default_value_t = 50.0)]
        fk_split_hz: f64,
    },
    /// Parameter counts of a preset under both conventions.
    Params {
        /// C_small, R_small, C_large or R_large.
        #[arg(long)]
        model: String,
    },
    /// Windowed DC-aliasing profile of a trace.
    Aliasing {
        /// Input NPY trace (1D).
        #[arg(long = "in")]
        input: PathBuf,
        /// Comma-separated window sizes, e.g. 101,256.
        #[arg(long)]
        windows: String,
        /// Output CSV profile (spectra written next to it).
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.004)]
        dt: f64,
    },
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 2,
        Error::Shape(_) | Error::Format(_) | Error::Io(_) => 3,
        Error::NonFinite(_) | Error::Numeric(_) | Error::Conditioning(_) => 4,
    }
}

/// Parses arguments, runs the command inside the worker pool, and
/// returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match crate::workers::install(|| dispatch(cli.command)) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Synth { config, out } => cmd_synth(&config, &out),
        Command::Hilbert { input, out_re, out_im, dt } => {
            cmd_hilbert(&input, &out_re, &out_im, dt)
        }
        Command::Train { config, out_dir, model } => cmd_train(&config, &out_dir, model),
        Command::Eval { weights, input, regions, out, dt, dx, fk_split_hz } => {
            cmd_eval(&weights, &input, regions.as_deref(), &out, dt, dx, fk_split_hz)
        }
        Command::Params { model } => cmd_params(&model),
        Command::Aliasing { input, windows, out, dt } => cmd_aliasing(&input, &windows, &out, dt),
    }
}

fn cmd_synth(config: &Path, out: &Path) -> Result<()> {
    let cfg = ExperimentConfig::from_file(config)?;
    let synth = cfg.data.synth.as_ref().ok_or_else(|| {
        Error::Config("synth command needs a data.synth block in the config".into())
    })?;
    let volume = crate::data::synth_volume(synth)?;
    volume.save_npy(out)?;
    let (il, xl, t) = volume.dims();
    println!("volume {il}x{xl}x{t}");
    println!("spectral_peak_hz {:.2}", crate::data::dominant_frequency(&volume));
    Ok(())
}

fn cmd_hilbert(input: &Path, out_re: &Path, out_im: &Path, dt: f64) -> Result<()> {
    let volume = SeismicVolume::from_npy(input, dt, 25.0)?;
    let av = hilbert_volume(&volume)?;
    av.re.save_npy(out_re)?;
    av.im.save_npy(out_im)?;
    let (il, xl, t) = volume.dims();
    println!("analytic volume {il}x{xl}x{t}");
    Ok(())
}

/// Builds the patch splits the configured model family needs:
/// normalize first, then take the analytic signal for complex models.
fn prepare_splits(
    cfg: &ExperimentConfig,
    domain: Domain,
) -> Result<crate::data::SplitPatches> {
    let volume = cfg.load_volume()?;
    let (normed, _scale) = normalize(&volume)?;
    let set = match domain {
        Domain::Real => extract_patches(&normed, cfg.patch.size, cfg.patch.stride)?,
        Domain::Complex => {
            let av = hilbert_volume(&normed)?;
            extract_patches_complex(&av.re, &av.im, cfg.patch.size, cfg.patch.stride)?
        }
    };
    split_patches(&set, &cfg.split)
}

fn cmd_train(config: &Path, out_dir: &Path, model_override: Option<String>) -> Result<()> {
    let mut cfg = ExperimentConfig::from_file(config)?;
    if let Some(preset) = model_override {
        cfg.model.preset = preset;
    }
    let preset = Preset::parse(&cfg.model.preset)?;
    let spec = ArchitectureSpec::preset(preset);

    let probe = build(&spec, cfg.model.seed)?;
    let counts = probe.count_params();
    println!("preset={}", preset.name());
    println!("params_trainable={}", counts.trainable);
    println!("params_on_graph_2per_bn={}", counts.on_graph_2per_bn);
    println!("params_on_graph_4per_bn={}", counts.on_graph_4per_bn);

    let splits = prepare_splits(&cfg, spec.domain())?;
    println!(
        "patches train={} val={} test={}",
        splits.train.len(),
        splits.val.len(),
        splits.test.len()
    );

    let (summary, models) = multi_seed(&spec, &splits.train, &splits.val, &cfg.train)?;
    for (seed, reason) in &summary.aborted {
        eprintln!("warning: seed {seed} aborted: {reason}");
    }
    fs::create_dir_all(out_dir)?;
    for ((seed, model), log) in models.iter().zip(&summary.runs) {
        let dir = out_dir.join(format!("seed_{seed}"));
        fs::create_dir_all(&dir)?;
        save_weights(model, &dir.join("weights.cxae"))?;
        fs::write(dir.join("loss.csv"), log.to_csv())?;
    }
    println!(
        "final_val mean={:.6} std={:.6} runs={}",
        summary.mean_final_val,
        summary.std_final_val,
        summary.runs.len()
    );
    Ok(())
}

fn load_section(path: &Path) -> Result<Array2D> {
    let arr = load_npy(path)?;
    if arr.shape.len() != 2 {
        return Err(Error::Format(format!(
            "{}: expected a 2D section, got shape {:?}",
            path.display(),
            arr.shape
        )));
    }
    Array2D::from_vec(arr.shape[0], arr.shape[1], arr.data)
}

fn load_regions(path: Option<&Path>) -> Result<Vec<Region>> {
    match path {
        None => Ok(Vec::new()),
        Some(p) => {
            let text = fs::read_to_string(p)?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: bad regions JSON: {e}", p.display())))
        }
    }
}

fn cmd_eval(
    weights: &Path,
    input: &Path,
    regions: Option<&Path>,
    out: &Path,
    dt: f64,
    dx: f64,
    fk_split_hz: f64,
) -> Result<()> {
    let model = load_weights(weights)?;
    let section = load_section(input)?;
    let regions = load_regions(regions)?;

    // models are trained on [-1, 1] data
    let max = section.max_abs();
    if max == 0.0 {
        return Err(Error::Numeric("cannot evaluate an all-zero section".into()));
    }
    let normed = Array2D::from_vec(
        section.rows(),
        section.cols(),
        section.data().iter().map(|v| v / max).collect(),
    )?;

    let report = evaluate_model(&model, &normed, &regions)?;
    let reconstruction = model.reconstruct(&normed)?;
    let fkr = fk_report(&normed, &reconstruction, dt, dx, fk_split_hz)?;

    fs::create_dir_all(out)?;
    fs::write(out.join("metrics.csv"), report.to_csv())?;
    fs::write(out.join("metrics.json"), report.to_json())?;
    save_npy(
        out.join("reconstruction.npy").as_path(),
        &[reconstruction.rows(), reconstruction.cols()],
        reconstruction.data(),
    )?;
    for (name, spectrum) in [
        ("fk_original", &fkr.original.amplitude),
        ("fk_reconstruction", &fkr.reconstruction.amplitude),
        ("fk_difference", &fkr.difference),
    ] {
        save_npy(
            out.join(format!("{name}.npy")).as_path(),
            &[spectrum.rows(), spectrum.cols()],
            spectrum.data(),
        )?;
        write_pgm(out.join(format!("{name}.pgm")).as_path(), spectrum)?;
    }
    let summary = serde_json::json!({
        "split_hz": fkr.split_hz,
        "df_hz": fkr.original.df,
        "dk_per_km": fkr.original.dk,
        "original": {"below": fkr.original_band.below, "above": fkr.original_band.above},
        "reconstruction": {
            "below": fkr.reconstruction_band.below,
            "above": fkr.reconstruction_band.above
        },
        "normalization_scale": max,
    });
    fs::write(out.join("fk_summary.json"), serde_json::to_string_pretty(&summary).unwrap())?;
    println!("global rms={:.6} mae={:.6}", report.global.rms, report.global.mae);
    for r in &report.regions {
        println!("region {} rms={:.6} mae={:.6}", r.name, r.rms, r.mae);
    }
    Ok(())
}

fn cmd_params(model: &str) -> Result<()> {
    let preset = Preset::parse(model)?;
    let built = build(&ArchitectureSpec::preset(preset), 0)?;
    let counts = built.count_params();
    let (published, convention) = published_count(preset);
    println!("preset={}", preset.name());
    println!("params_trainable={}", counts.trainable);
    println!("params_on_graph_2per_bn={}", counts.on_graph_2per_bn);
    println!("params_on_graph_4per_bn={}", counts.on_graph_4per_bn);
    println!("published_count={published}");
    println!("published_convention={convention}");
    if matches!(preset, Preset::CSmall | Preset::CLarge) {
        println!("filter_reading=feature_maps_total");
    }
    let matched = match convention {
        "on_graph_2per_bn" => counts.on_graph_2per_bn,
        _ => counts.on_graph_4per_bn,
    };
    println!(
        "published_match={}",
        if matched == published { "yes" } else { "NO" }
    );
    Ok(())
}

fn cmd_aliasing(input: &Path, windows: &str, out: &Path, dt: f64) -> Result<()> {
    let arr = load_npy(input)?;
    if arr.shape.len() != 1 {
        return Err(Error::Format(format!(
            "{}: expected a 1D trace, got shape {:?}",
            input.display(),
            arr.shape
        )));
    }
    let sizes: Vec<usize> = windows
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad window size {s:?}")))
        })
        .collect::<Result<_>>()?;
    if sizes.is_empty() {
        return Err(Error::Config("no window sizes given".into()));
    }
    let trace = Trace::new(arr.data, dt)?;
    let records = dc_aliasing_profile(&trace, &sizes)?;

    let mut csv = String::from("window_size,mean_abs_dc,spectrum_near_zero\n");
    for r in &records {
        csv.push_str(&format!("{},{},{}\n", r.window_size, r.mean_abs_dc, r.spectrum_near_zero));
    }
    fs::write(out, csv)?;

    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("profile");
    let dir = out.parent().unwrap_or(Path::new("."));
    for r in &records {
        let mut spec_csv = String::from("freq_hz,amplitude,phase\n");
        let n = r.window_size;
        for (k, (a, p)) in r.amplitude_spectrum.iter().zip(&r.phase_spectrum).enumerate() {
            let f = k as f64 / (n as f64 * dt);
            spec_csv.push_str(&format!("{f},{a},{p}\n"));
        }
        fs::write(dir.join(format!("{stem}_spectrum_{n}.csv")), spec_csv)?;
    }
    for r in &records {
        println!("window {} mean_abs_dc={:.6e}", r.window_size, r.mean_abs_dc);
    }
    Ok(())
}
