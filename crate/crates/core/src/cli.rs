//! The `ema` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};
use serde::Serialize;

use crate::analysis::{evaluate_encoding, EncodingReport, Tolerances};
use crate::encoder::{encode, AmbisonicSignalSet, ArrayGeometry, DelayHandling};
use crate::error::{Error, Result};
use crate::harmonics::equator_table;
use crate::io::{
    read_filter_bank, read_geometry, read_hrtf_grid, read_sidecar, read_wav, write_filter_bank, write_geometry,
    write_json, write_truth, write_wav, ContentKind, MultichannelBuffer, SidecarMetadata, TruthFile,
};
use crate::radial::{design_equalizers, RadialConfig};
use crate::renderer::{analytic_test_hrtf, hrtf_sh_transform, omnidirectional_hrtf, render_binaural, HrtfShSet};
use crate::simulator::{simulate_capture, PlaneWaveSource, SourceSignal};

/// Environment variable capping the worker threads (0 = one per core).
pub const THREADS_ENV: &str = "EMA_NUM_THREADS";

#[derive(Parser, Debug)]
#[command(name = "ema", version, about = "Equatorial microphone array to ambisonics encoder")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a plane wave captured by a ring on a rigid sphere.
    Simulate(SimulateArgs),
    /// Design the per-mode radial equalization filters.
    DesignFilters(DesignArgs),
    /// Encode microphone signals to ACN/N3D ambisonics.
    Encode(EncodeArgs),
    /// Render ambisonic signals binaurally.
    Render(RenderArgs),
    /// Simulate, design, encode and render, then report encoding errors.
    Pipeline(PipelineArgs),
}

#[derive(Args, Debug, Clone)]
struct SourceArgs {
    /// Incidence azimuth in degrees.
    #[arg(long, allow_hyphen_values = true)]
    azimuth_deg: f64,
    /// Linear source amplitude.
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    amplitude: f64,
    /// impulse, noise, noise:SEED or sine:F.
    #[arg(long, default_value = "impulse")]
    signal: String,
    /// Samples (power of two).
    #[arg(long, default_value_t = 16384)]
    length: usize,
    /// Degrees summed by the simulation; defaults to ceil(kR at Nyquist) + 30.
    #[arg(long)]
    truncation: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct ArrayArgs {
    /// Sphere radius in metres.
    #[arg(long, default_value_t = 0.0875)]
    radius: f64,
    /// Number of microphones on the ring.
    #[arg(long, default_value_t = 16)]
    mics: usize,
    #[arg(long, default_value_t = RadialConfig::DEFAULT_SPEED_OF_SOUND)]
    speed_of_sound: f64,
    #[arg(long, default_value_t = 48_000.0)]
    sample_rate: f64,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    array: ArrayArgs,
    /// Order of the truth coefficients; defaults to the ring's maximum.
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Also write the array geometry JSON here.
    #[arg(long)]
    geometry_out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct FilterArgs {
    #[arg(long, default_value_t = RadialConfig::DEFAULT_FIR_LENGTH)]
    fir_length: usize,
    /// Maximum equalizer gain relative to the smallest raw inverse, dB.
    #[arg(long, default_value_t = RadialConfig::DEFAULT_MAX_GAIN_DB)]
    max_gain_db: f64,
    /// Degrees summed in the mode strength; defaults to order + 40.
    #[arg(long)]
    filter_truncation: Option<usize>,
}

#[derive(Args, Debug)]
struct DesignArgs {
    #[arg(long, default_value_t = 0.0875)]
    radius: f64,
    #[arg(long, default_value_t = 48_000.0)]
    sample_rate: f64,
    #[arg(long)]
    order: usize,
    #[arg(long, default_value_t = RadialConfig::DEFAULT_SPEED_OF_SOUND)]
    speed_of_sound: f64,
    #[command(flatten)]
    filters: FilterArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EncodeArgs {
    /// Microphone WAV, channel q = mic q.
    #[arg(long = "in")]
    input: PathBuf,
    /// Geometry JSON; defaults to the geometry in the WAV's sidecar.
    #[arg(long)]
    geometry: Option<PathBuf>,
    #[arg(long)]
    bank: PathBuf,
    #[arg(long)]
    order: usize,
    /// Remove the filters' modeling delay (default); `=false` keeps it.
    #[arg(long, default_value_t = true, num_args = 0..=1, default_missing_value = "true", action = clap::ArgAction::Set)]
    compensate_delay: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("hrtf_source").required(true).args(["hrtf", "test_hrtf", "omni_hrtf"])))]
struct RenderArgs {
    #[arg(long)]
    ambi: PathBuf,
    /// HRTF grid container.
    #[arg(long)]
    hrtf: Option<PathBuf>,
    /// Use the analytic rigid-sphere test HRTF.
    #[arg(long)]
    test_hrtf: bool,
    /// Use an omnidirectional HRTF (both ears hear the W channel).
    #[arg(long)]
    omni_hrtf: bool,
    /// Order of the HRTF SH transform; defaults to the ambisonic order.
    #[arg(long)]
    order: Option<usize>,
    /// FFT length of the test HRTFs.
    #[arg(long, default_value_t = 512)]
    hrtf_fft_length: usize,
    /// Remove the HRTF filters' modeling delay (default); `=false` keeps it.
    #[arg(long, default_value_t = true, num_args = 0..=1, default_missing_value = "true", action = clap::ArgAction::Set)]
    compensate_delay: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PipelineArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    array: ArrayArgs,
    #[arg(long, default_value_t = 4)]
    order: usize,
    #[command(flatten)]
    filters: FilterArgs,
    /// Lower edge of the evaluation band, Hz.
    #[arg(long, default_value_t = 200.0)]
    band_lo: f64,
    /// Upper edge of the evaluation band, Hz.
    #[arg(long, default_value_t = 4000.0)]
    band_hi: f64,
    #[arg(long, default_value_t = 512)]
    hrtf_fft_length: usize,
    #[arg(long, default_value = "ema-pipeline")]
    out_dir: PathBuf,
}

fn delay_mode(compensate: bool) -> DelayHandling {
    if compensate {
        DelayHandling::Compensate
    } else {
        DelayHandling::Keep
    }
}

impl ArrayArgs {
    fn geometry(&self) -> Result<ArrayGeometry> {
        let g = ArrayGeometry {
            radius: self.radius,
            mic_count: self.mics,
            speed_of_sound: self.speed_of_sound,
        };
        g.validate()?;
        Ok(g)
    }
}

impl SourceArgs {
    fn source(&self) -> Result<PlaneWaveSource> {
        let signal: SourceSignal = self.signal.parse()?;
        Ok(PlaneWaveSource {
            azimuth: self.azimuth_deg.to_radians(),
            amplitude: self.amplitude,
            signal,
        })
    }
}

fn radial_config(radius: f64, c: f64, fs: f64, order: usize, f: &FilterArgs) -> RadialConfig {
    let mut cfg = RadialConfig::new(radius, fs, order);
    cfg.speed_of_sound = c;
    cfg.fir_length = f.fir_length;
    cfg.max_gain_db = f.max_gain_db;
    if let Some(t) = f.filter_truncation {
        cfg.truncation_order = t;
    }
    cfg
}

fn run_simulate(a: &SimulateArgs) -> Result<()> {
    let geom = a.array.geometry()?;
    let src = a.source.source()?;
    let order = a.order.unwrap_or(geom.max_mode());
    let sim = simulate_capture(
        &src,
        &geom,
        a.array.sample_rate,
        a.source.length,
        a.source.truncation,
        order,
    )?;
    let buf = MultichannelBuffer::new(sim.mic_signals, a.array.sample_rate)?;
    write_wav(&a.out, &buf, &SidecarMetadata::mics(geom.clone()))?;
    write_truth(
        &a.truth,
        &TruthFile::new(&src, order, sim.truncation, &sim.truth_coeffs),
    )?;
    if let Some(p) = &a.geometry_out {
        write_geometry(p, &geom)?;
    }
    println!(
        "simulated {} mics x {} samples (truncation {}) -> {}",
        geom.mic_count,
        a.source.length,
        sim.truncation,
        a.out.display()
    );
    Ok(())
}

fn run_design(a: &DesignArgs) -> Result<()> {
    let cfg = radial_config(a.radius, a.speed_of_sound, a.sample_rate, a.order, &a.filters);
    cfg.validate()?;
    let bank = design_equalizers(&cfg, &equator_table(cfg.truncation_order)?)?;
    write_filter_bank(&a.out, &bank)?;
    let (lo, hi) = bank.valid_band_hz(a.order);
    println!(
        "designed {} mode filters ({} taps, delay {}); unregularised band {lo:.1}-{hi:.1} Hz -> {}",
        bank.modes.len(),
        cfg.fir_length,
        bank.modeling_delay,
        a.out.display()
    );
    Ok(())
}

fn encode_file(
    input: &Path,
    geometry: Option<&Path>,
    bank_path: &Path,
    order: usize,
    delay: DelayHandling,
    out: &Path,
) -> Result<AmbisonicSignalSet> {
    let geom = match geometry {
        Some(p) => read_geometry(p)?,
        None => read_sidecar(input).ok().and_then(|m| m.geometry).ok_or_else(|| {
            Error::Config(format!(
                "no --geometry given and {} has no geometry sidecar",
                input.display()
            ))
        })?,
    };
    geom.validate()?;
    geom.check_order(order)?;
    let mics = read_wav(input)?;
    if mics.channel_count() != geom.mic_count {
        return Err(Error::Mismatch(format!(
            "{} has {} channels, geometry lists {} mics",
            input.display(),
            mics.channel_count(),
            geom.mic_count
        )));
    }
    let bank = read_filter_bank(bank_path)?;
    let table = equator_table(order)?;
    let ambi = encode(&mics.channels, mics.sample_rate, &geom, &bank, &table, order, delay)?;
    let buf = MultichannelBuffer::new(ambi.channels.clone(), ambi.sample_rate)?;
    write_wav(out, &buf, &SidecarMetadata::ambisonics(order, Some(geom)))?;
    Ok(ambi)
}

fn run_encode(a: &EncodeArgs) -> Result<()> {
    let ambi = encode_file(
        &a.input,
        a.geometry.as_deref(),
        &a.bank,
        a.order,
        delay_mode(a.compensate_delay),
        &a.out,
    )?;
    println!(
        "encoded order {} ({} channels, ACN/N3D) -> {}",
        ambi.order,
        ambi.channels.len(),
        a.out.display()
    );
    Ok(())
}

fn read_ambisonics(path: &Path) -> Result<AmbisonicSignalSet> {
    let meta = read_sidecar(path)?;
    if meta.kind != ContentKind::Ambisonics {
        return Err(Error::Validation(format!("{} is not ambisonic audio", path.display())));
    }
    let buf = read_wav(path)?;
    meta.validate(buf.channel_count())?;
    AmbisonicSignalSet::new(meta.order.expect("validated"), buf.sample_rate, buf.channels)
}

fn run_render(a: &RenderArgs) -> Result<()> {
    let ambi = read_ambisonics(&a.ambi)?;
    let order = a.order.unwrap_or(ambi.order);
    let hrtf: HrtfShSet = if let Some(p) = &a.hrtf {
        let fit = hrtf_sh_transform(&read_hrtf_grid(p)?, order)?;
        let worst = fit
            .residual_left
            .iter()
            .chain(&fit.residual_right)
            .fold(0.0f64, |m, &r| m.max(r));
        log::info!(
            "HRTF SH fit: condition number {:.3e}, worst relative residual {worst:.3e}",
            fit.condition_number
        );
        fit.set
    } else if a.test_hrtf {
        analytic_test_hrtf(order, ambi.sample_rate, a.hrtf_fft_length)?
    } else {
        omnidirectional_hrtf(order, ambi.sample_rate, a.hrtf_fft_length)?
    };
    let out = render_binaural(&ambi, &hrtf, delay_mode(a.compensate_delay))?;
    let buf = MultichannelBuffer::new(vec![out.left, out.right], out.sample_rate)?;
    write_wav(&a.out, &buf, &SidecarMetadata::binaural(out.order))?;
    println!("rendered order {} binaural -> {}", out.order, a.out.display());
    Ok(())
}

#[derive(Serialize)]
struct BinauralSummary {
    order: usize,
    peak_left: f64,
    peak_right: f64,
    max_interaural_difference: f64,
}

#[derive(Serialize)]
struct PipelineReport {
    tool_version: &'static str,
    azimuth_deg: f64,
    amplitude: f64,
    signal: String,
    mics: usize,
    radius_m: f64,
    sample_rate: f64,
    simulation_truncation: usize,
    encoding: EncodingReport,
    tolerances: ToleranceEcho,
    failures: Vec<String>,
    passed: bool,
    binaural: BinauralSummary,
}

#[derive(Serialize)]
struct ToleranceEcho {
    magnitude_db: f64,
    phase_deg: f64,
    null_floor_db: f64,
}

fn run_pipeline(a: &PipelineArgs) -> Result<()> {
    let geom = a.array.geometry()?;
    geom.check_order(a.order)?;
    let src = a.source.source()?;
    let fs = a.array.sample_rate;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    let path = |name: &str| a.out_dir.join(name);

    let geom_path = path("geometry.json");
    write_geometry(&geom_path, &geom)?;
    let sim = simulate_capture(&src, &geom, fs, a.source.length, a.source.truncation, a.order)?;
    let mics_path = path("mics.wav");
    write_wav(
        &mics_path,
        &MultichannelBuffer::new(sim.mic_signals.clone(), fs)?,
        &SidecarMetadata::mics(geom.clone()),
    )?;
    let truth = TruthFile::new(&src, a.order, sim.truncation, &sim.truth_coeffs);
    write_truth(&path("truth.json"), &truth)?;

    let cfg = radial_config(geom.radius, geom.speed_of_sound, fs, a.order, &a.filters);
    let bank = design_equalizers(&cfg, &equator_table(cfg.truncation_order)?)?;
    let bank_path = path("bank.emafb");
    write_filter_bank(&bank_path, &bank)?;

    let ambi_path = path("ambi.wav");
    encode_file(
        &mics_path,
        Some(&geom_path),
        &bank_path,
        a.order,
        DelayHandling::Compensate,
        &ambi_path,
    )?;
    let ambi = read_ambisonics(&ambi_path)?;

    let hrtf = analytic_test_hrtf(a.order, fs, a.hrtf_fft_length)?;
    let bin = render_binaural(&ambi, &hrtf, DelayHandling::Compensate)?;
    write_wav(
        &path("binaural.wav"),
        &MultichannelBuffer::new(vec![bin.left.clone(), bin.right.clone()], fs)?,
        &SidecarMetadata::binaural(bin.order),
    )?;

    let encoding = evaluate_encoding(
        &ambi,
        &sim.source_signal,
        &sim.truth_coeffs,
        &bank,
        (a.band_lo, a.band_hi),
    )?;
    let tol = Tolerances::default();
    let failures = encoding.check(&tol);
    let peak = |x: &[f64]| x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let report = PipelineReport {
        tool_version: crate::io::TOOL_VERSION,
        azimuth_deg: a.source.azimuth_deg,
        amplitude: src.amplitude,
        signal: src.signal.to_string(),
        mics: geom.mic_count,
        radius_m: geom.radius,
        sample_rate: fs,
        simulation_truncation: sim.truncation,
        tolerances: ToleranceEcho {
            magnitude_db: tol.magnitude_db,
            phase_deg: tol.phase_deg,
            null_floor_db: tol.null_floor_db,
        },
        passed: failures.is_empty(),
        failures,
        binaural: BinauralSummary {
            order: bin.order,
            peak_left: peak(&bin.left),
            peak_right: peak(&bin.right),
            max_interaural_difference: bin
                .left
                .iter()
                .zip(&bin.right)
                .fold(0.0f64, |m, (l, r)| m.max((l - r).abs())),
        },
        encoding,
    };
    let report_path = path("report.json");
    write_json(&report_path, &report)?;

    let (lo, hi) = report.encoding.unregularized_band_hz;
    println!(
        "unregularised band for order {}: {lo:.1}-{hi:.1} Hz; evaluated {:.1}-{:.1} Hz (per channel from its mode's limit)",
        a.order, a.band_lo, a.band_hi
    );
    println!(
        "encoding {} -> {}",
        if report.passed {
            "within tolerance"
        } else {
            "OUT OF TOLERANCE"
        },
        report_path.display()
    );
    for f in &report.failures {
        println!("  {f}");
    }
    Ok(())
}

fn init_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a non-negative integer, got {value:?}")))?;
    // a second call in the same process finds the pool already built
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs the CLI on `argv` (including the program name) and returns the
/// process exit code: 0 on success, 1 on a processing error, 2 on a usage
/// error.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = init_threads().and_then(|()| match &cli.command {
        Command::Simulate(a) => run_simulate(a),
        Command::DesignFilters(a) => run_design(a),
        Command::Encode(a) => run_encode(a),
        Command::Render(a) => run_render(a),
        Command::Pipeline(a) => run_pipeline(a),
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
