//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs as a plain binary (`harness = false`).

mod common;

use std::f64::consts::{FRAC_PI_2, PI};
use std::time::Instant;

use num_complex::Complex64;

use ema_core::analysis::{evaluate_encoding, transfer_function, Tolerances};
use ema_core::encoder::{ch_analyze, ch_synthesize, encode, AmbisonicSignalSet, ArrayGeometry, DelayHandling};
use ema_core::harmonics::{acn, acn_inverse, channel_count, equator_table, n_factor, sh_indices, sph_harmonic, y00};
use ema_core::radial::{design_equalizers, radial_term, EqualizationFilterBank, RadialConfig};
use ema_core::renderer::{analytic_test_hrtf, omnidirectional_hrtf, render_binaural};
use ema_core::simulator::{simulate_capture, PlaneWaveSource, SimulationResult, SourceSignal};
use ema_core::sphmath::{sph_bessel_j, sph_bessel_j_deriv, sph_hankel2, sph_hankel2_deriv};

use common::{db, sphere_quadrature};

const RADIUS: f64 = 0.0875;
const MICS: usize = 16;
const FS: f64 = 48_000.0;
const ORDER: usize = 4;
const SIM_LENGTH: usize = 16_384;
const BAND: (f64, f64) = (200.0, 4_000.0);

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

struct Rig {
    geom: ArrayGeometry,
    bank: EqualizationFilterBank,
}

impl Rig {
    fn new() -> Self {
        let cfg = RadialConfig::new(RADIUS, FS, ORDER);
        let table = equator_table(cfg.truncation_order).unwrap();
        Self {
            geom: ArrayGeometry::new(RADIUS, MICS).unwrap(),
            bank: design_equalizers(&cfg, &table).unwrap(),
        }
    }

    fn capture(&self, theta_deg: f64, amplitude: f64) -> (SimulationResult, AmbisonicSignalSet) {
        let mut src = PlaneWaveSource::new(theta_deg.to_radians(), SourceSignal::Impulse);
        src.amplitude = amplitude;
        // truncation left at its default, ceil(kR_max) + 30
        let sim = simulate_capture(&src, &self.geom, FS, SIM_LENGTH, None, ORDER).unwrap();
        let ambi = encode(
            &sim.mic_signals,
            FS,
            &self.geom,
            &self.bank,
            &equator_table(ORDER).unwrap(),
            ORDER,
            DelayHandling::Compensate,
        )
        .unwrap();
        (sim, ambi)
    }
}

fn bins_in(lo: f64, hi: f64, bins: usize) -> impl Iterator<Item = usize> {
    let df = FS / (2 * (bins - 1)) as f64;
    (1..bins).filter(move |&k| {
        let f = k as f64 * df;
        f >= lo && f <= hi
    })
}

fn criterion_1() -> Outcome {
    let order = 6;
    let quad = sphere_quadrature(2 * order + 2, 4 * order + 4);
    let idx: Vec<_> = sh_indices(order).collect();
    let values: Vec<Vec<f64>> = quad
        .iter()
        .map(|&(b, a, _)| idx.iter().map(|ix| sph_harmonic(ix.n, ix.m, b, a).unwrap()).collect())
        .collect();
    let mut worst = 0.0f64;
    for i in 0..idx.len() {
        for j in 0..idx.len() {
            let g: f64 = quad.iter().zip(&values).map(|(q, v)| q.2 * v[i] * v[j]).sum();
            let expected = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g - expected).abs());
        }
    }
    if worst >= 1e-10 {
        return Err(format!("orthonormality deviation {worst:.3e} >= 1e-10"));
    }
    let mut nonzero = 0;
    for n in 0..=64usize {
        for m in -(n as i32)..=n as i32 {
            let odd = (n + m.unsigned_abs() as usize) % 2 == 1;
            if odd && (n_factor(n, m, FRAC_PI_2).unwrap() != 0.0 || sph_harmonic(n, m, FRAC_PI_2, 0.3).unwrap() != 0.0)
            {
                nonzero += 1;
            }
        }
    }
    let table = equator_table(64).unwrap();
    nonzero += sh_indices(64)
        .filter(|ix| ix.is_equator_null() && table.get(ix.n, ix.m) != 0.0)
        .count();
    if nonzero > 0 {
        return Err(format!("{nonzero} parity-odd equator values are not exactly zero"));
    }
    let y = y00();
    if (y - 0.28209479).abs() >= 1e-8 {
        return Err(format!("Y_00 = {y}"));
    }
    Ok(format!(
        "max orthonormality deviation {worst:.2e} (order 6); parity zeros exact to order 64; Y_00 = {y:.10}"
    ))
}

fn criterion_2() -> Outcome {
    let mut worst = 0.0f64;
    let mut worst_wronskian = 0.0f64;
    for i in 0..200 {
        let x = 0.1 + (20.0 - 0.1) * i as f64 / 199.0;
        for n in 0..=12usize {
            let j = sph_bessel_j(n, x).unwrap();
            let jd = sph_bessel_j_deriv(n, x).unwrap();
            let h = sph_hankel2(n, x).unwrap();
            let hd = sph_hankel2_deriv(n, x).unwrap();
            let i_n = Complex64::i().powu(n as u32);
            let scattering = 4.0 * PI * i_n * (j - (jd / hd) * h);
            let b = radial_term(n, x).unwrap();
            worst = worst.max((b - scattering).norm() / scattering.norm());
            let w = (j * hd - jd * h) * (x * x);
            worst_wronskian = worst_wronskian.max((w + Complex64::i()).norm());
        }
    }
    if worst >= 1e-10 {
        return Err(format!("radial term differs from the scattering form by {worst:.3e}"));
    }
    if worst_wronskian >= 1e-10 {
        return Err(format!("x^2 (j h2' - j' h2) deviates from -i by {worst_wronskian:.3e}"));
    }
    Ok(format!(
        "max relative error {worst:.2e} over n <= 12, 200 kR in [0.1, 20]; Wronskian deviation {worst_wronskian:.2e}"
    ))
}

fn criterion_3(rig: &Rig) -> Outcome {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    let (lo, hi) = rig.bank.valid_band_hz(ORDER);
    lines.push(format!(
        "unregularised band {lo:.1}-{hi:.1} Hz; per-|m| lower limits {:?} Hz",
        (0..=ORDER)
            .map(|m| (rig.bank.mode_valid_from_hz(m as i32) * 10.0).round() / 10.0)
            .collect::<Vec<_>>()
    ));
    for theta in [0.0, 30.0, 97.5] {
        let (sim, ambi) = rig.capture(theta, 1.0);
        let report = evaluate_encoding(&ambi, &sim.source_signal, &sim.truth_coeffs, &rig.bank, BAND).unwrap();
        let f = report.check(&Tolerances::default());
        let live = report.channels.iter().filter(|c| !c.parity_null && c.truth != 0.0);
        let mag = live
            .clone()
            .map(|c| c.max_ratio_error_db.max(c.max_magnitude_error_db))
            .fold(0.0, f64::max);
        let phase = live.map(|c| c.max_phase_error_deg).fold(0.0, f64::max);
        let null = report
            .channels
            .iter()
            .filter(|c| !c.parity_null)
            .filter_map(|c| c.max_relative_level_db)
            .fold(f64::NEG_INFINITY, f64::max);
        lines.push(format!(
            "theta {theta:5.1} deg: max magnitude error {mag:.3} dB, max phase error {phase:.3} deg, \
             zero-truth channels {}",
            if null.is_finite() {
                format!("<= {null:.1} dB")
            } else {
                "exactly zero or absent".into()
            }
        ));
        failures.extend(f.into_iter().map(|s| format!("theta {theta}: {s}")));
    }
    lines.push(format!("runtime {:.1} s", start.elapsed().as_secs_f64()));
    if start.elapsed().as_secs() >= 60 {
        failures.push("runtime exceeds one minute".into());
    }
    if failures.is_empty() {
        Ok(lines.join("\n    "))
    } else {
        Err(format!("{}\n    {}", failures.join("\n    "), lines.join("\n    ")))
    }
}

fn criterion_4(rig: &Rig) -> Outcome {
    for (n, m, expected) in [(0usize, 0i32, 0usize), (1, -1, 1), (3, 2, 14)] {
        let got = acn(n, m).unwrap();
        if got != expected || acn_inverse(expected).n != n || acn_inverse(expected).m != m {
            return Err(format!("ACN({n}, {m}) = {got}, expected {expected}"));
        }
    }
    let (sim, ambi) = rig.capture(0.0, 1.0);
    let tfs: Vec<Vec<Complex64>> = ambi
        .channels
        .iter()
        .map(|c| transfer_function(c, &sim.source_signal).unwrap())
        .collect();
    let bins = tfs[0].len();
    let mut worst = f64::NEG_INFINITY;
    for ix in sh_indices(ORDER).filter(|ix| ix.m < 0 && !ix.is_equator_null()) {
        let partner = acn(ix.n, -ix.m).unwrap();
        let lo = BAND.0.max(rig.bank.mode_valid_from_hz(ix.m));
        for k in bins_in(lo, BAND.1, bins) {
            let rel = db(tfs[ix.acn()][k].norm() / tfs[partner][k].norm());
            worst = worst.max(rel);
        }
    }
    let parity_zero = sh_indices(ORDER)
        .filter(|ix| ix.is_equator_null())
        .all(|ix| ambi.channels[ix.acn()].iter().all(|&v| v == 0.0));
    if worst > -60.0 {
        return Err(format!("an m < 0 channel is only {:.1} dB below its partner", -worst));
    }
    if !parity_zero {
        return Err("a parity-null channel is not identically zero".into());
    }
    Ok(format!(
        "ACN (0,0)->0 (1,-1)->1 (3,2)->14; m < 0 channels at theta = 0 at least {:.0} dB below their partners",
        -worst
    ))
}

fn criterion_5() -> Outcome {
    let geom = ArrayGeometry::new(RADIUS, MICS).unwrap();
    let max_mode = geom.max_mode();
    let alphas = geom.azimuths();
    let mut worst = 0.0f64;
    // second-order decimal coefficients with distinct values per mode
    let coeffs: Vec<(i32, f64)> = (-(max_mode as i32)..=max_mode as i32)
        .map(|m| (m, ((m * 37 + 11) % 19) as f64 / 7.0 - 1.3))
        .collect();
    let synth = ch_synthesize(&coeffs, &geom);
    let mics: Vec<Vec<f64>> = synth.iter().map(|&v| vec![v]).collect();
    let ring = ch_analyze(&mics, FS, &geom, max_mode).unwrap();
    for &(m, c) in &coeffs {
        worst = worst.max((ring.mode(m)[0] - c).abs());
    }
    if worst >= 1e-12 {
        return Err(format!("round trip error {worst:.3e} >= 1e-12"));
    }

    // aliased single modes against a direct evaluation of the discrete sum,
    // basis 1, sqrt(2) cos(m a), sqrt(2) sin(|m| a) with mean-square norm 1
    let ch = |m: i32, a: f64| -> f64 {
        match m.cmp(&0) {
            std::cmp::Ordering::Equal => 1.0,
            std::cmp::Ordering::Greater => 2f64.sqrt() * (m as f64 * a).cos(),
            std::cmp::Ordering::Less => 2f64.sqrt() * (m.unsigned_abs() as f64 * a).sin(),
        }
    };
    let mut worst_alias = 0.0f64;
    for source_mode in [8i32, 9, -9, 12, -13, 16, 23, -24, 31] {
        let mics: Vec<Vec<f64>> = alphas.iter().map(|&a| vec![ch(source_mode, a)]).collect();
        let ring = ch_analyze(&mics, FS, &geom, max_mode).unwrap();
        for m in -(max_mode as i32)..=max_mode as i32 {
            let brute: f64 = alphas.iter().map(|&a| ch(source_mode, a) * ch(m, a)).sum::<f64>() / MICS as f64;
            worst_alias = worst_alias.max((ring.mode(m)[0] - brute).abs());
        }
    }
    if worst_alias >= 1e-12 {
        return Err(format!(
            "aliased modes differ from the brute-force sum by {worst_alias:.3e}"
        ));
    }
    Ok(format!(
        "round trip error {worst:.2e} for |m| <= {max_mode} on Q = {MICS}; aliased modes match brute force to {worst_alias:.2e}"
    ))
}

fn criterion_6(rig: &Rig) -> Outcome {
    let (sim, ambi) = rig.capture(30.0, 1.0);
    let omni = omnidirectional_hrtf(ORDER, FS, 512).unwrap();
    let out = render_binaural(&ambi, &omni, DelayHandling::Compensate).unwrap();
    let lo = BAND.0.max(rig.bank.mode_valid_from_hz(0));
    let mut worst = 0.0f64;
    for ear in [&out.left, &out.right] {
        let tf = transfer_function(ear, &sim.source_signal).unwrap();
        for k in bins_in(lo, BAND.1, tf.len()) {
            worst = worst.max(db(tf[k].norm()).abs());
        }
    }
    if worst >= 1.5 {
        return Err(format!("omni render deviates {worst:.3} dB from unit magnitude"));
    }

    let (_, front) = rig.capture(0.0, 1.0);
    let hrtf = analytic_test_hrtf(ORDER, FS, 512).unwrap();
    let bin = render_binaural(&front, &hrtf, DelayHandling::Compensate).unwrap();
    let diff = bin
        .left
        .iter()
        .zip(&bin.right)
        .map(|(l, r)| (l - r).abs())
        .fold(0.0, f64::max);
    let peak = bin.left.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if diff.is_nan() || diff >= 1e-10 || peak == 0.0 {
        return Err(format!(
            "median-plane interaural difference {diff:.3e} (peak {peak:.3})"
        ));
    }
    Ok(format!(
        "omni render within {worst:.3} dB of unity on {lo:.0}-{:.0} Hz; median-plane interaural difference {diff:.2e} (peak {peak:.3})",
        BAND.1
    ))
}

fn run_pipeline(dir: &std::path::Path, amplitude: &str) -> Result<(), String> {
    let code = ema_core::cli::cli_main([
        "ema",
        "pipeline",
        "--azimuth-deg",
        "30",
        "--radius",
        "0.0875",
        "--mics",
        "16",
        "--order",
        "4",
        "--length",
        "4096",
        "--amplitude",
        amplitude,
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    if code == 0 {
        Ok(())
    } else {
        Err(format!("pipeline exited with {code}"))
    }
}

fn criterion_7(rig: &Rig) -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_pipeline(a.path(), "1")?;
    run_pipeline(b.path(), "1")?;
    let mut names: Vec<_> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    for name in &names {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).map_err(|e| format!("{name:?}: {e}"))?;
        if x != y {
            return Err(format!("{name:?} differs between runs"));
        }
    }

    let (sim1, ambi1) = rig.capture(30.0, 1.0);
    let (sim2, ambi2) = rig.capture(30.0, 2.0);
    let hrtf = analytic_test_hrtf(ORDER, FS, 512).unwrap();
    let bin1 = render_binaural(&ambi1, &hrtf, DelayHandling::Compensate).unwrap();
    let bin2 = render_binaural(&ambi2, &hrtf, DelayHandling::Compensate).unwrap();
    let doubled = |x: &[f64], y: &[f64]| x.iter().zip(y).all(|(p, q)| (2.0 * p).to_bits() == q.to_bits());
    let mut mismatched = Vec::new();
    if !sim1
        .mic_signals
        .iter()
        .zip(&sim2.mic_signals)
        .all(|(x, y)| doubled(x, y))
    {
        mismatched.push("mic signals");
    }
    if !ambi1.channels.iter().zip(&ambi2.channels).all(|(x, y)| doubled(x, y)) {
        mismatched.push("ambisonic channels");
    }
    if !doubled(&bin1.left, &bin2.left) || !doubled(&bin1.right, &bin2.right) {
        mismatched.push("binaural signals");
    }
    let truth_doubled = doubled(&sim1.truth_coeffs, &sim2.truth_coeffs);
    if !truth_doubled {
        mismatched.push("truth coefficients");
    }
    if !mismatched.is_empty() {
        return Err(format!("amplitude 2 does not double: {}", mismatched.join(", ")));
    }
    Ok(format!(
        "{} pipeline outputs byte-identical across runs; amplitude 2 doubles mics, {} ambisonic channels and both ears bit-exactly",
        names.len(),
        channel_count(ORDER)
    ))
}

fn main() {
    let rig = Rig::new();
    let criteria: [Criterion; 7] = [
        ("1 SH basis conformance", Box::new(criterion_1)),
        ("2 radial-term identity", Box::new(criterion_2)),
        ("3 end-to-end encoding accuracy", Box::new(|| criterion_3(&rig))),
        ("4 ACN/N3D conformance", Box::new(|| criterion_4(&rig))),
        ("5 discrete CH transform", Box::new(criterion_5)),
        ("6 binaural sanity", Box::new(|| criterion_6(&rig))),
        ("7 determinism and linearity", Box::new(|| criterion_7(&rig))),
    ];
    let mut failed = 0;
    for (name, run) in criteria.iter() {
        let start = Instant::now();
        let outcome =
            std::panic::catch_unwind(std::panic::AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let t = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {name} ({t:.1} s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name} ({t:.1} s): {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
