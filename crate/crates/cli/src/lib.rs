//! Command-line front-end: file and stream conversion, feature dumps,
//! latency tables and real-time benchmarks.
//!
//! Exit codes: 0 success, 2 bad arguments, 3 I/O, 4 model or validation
//! errors. Diagnostics go to stderr; payload goes to stdout or files.

pub mod report;
pub mod wav;

use std::fmt;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc::sync_channel;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ppgvc_core::dsp::{f32_to_i16, AudioBuffer, FrameGeometry, N_BARK_BANDS, N_MFCC};
use ppgvc_core::nn::{BundleDims, ModelBundle};
use ppgvc_core::pipeline::{analyze, latency_of, ConversionSession, LatencyBudget, Mode};
use ppgvc_core::pitch::{SpeakerProfile, SpeakerRegistry};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use report::RunReport;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_MODEL: i32 = 4;

/// Input samples per stream hand-off; the channel holds at most
/// [`STREAM_QUEUE`] of them.
const STREAM_CHUNK: usize = 160;
const STREAM_QUEUE: usize = 4;

#[derive(Debug, Parser)]
#[command(name = "ppgvc", version, about = "Low-latency voice conversion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a WAV file.
    Convert {
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Convert raw 16-bit little-endian PCM from stdin to stdout.
    Stream {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Print the latency budget.
    Latency {
        #[arg(long, default_value = "lookahead")]
        mode: Mode,
    },
    /// Time a conversion of synthetic audio.
    Bench {
        /// Bundle to time; a random toy-size bundle when omitted.
        #[arg(long)]
        bundle: Option<PathBuf>,
        #[arg(long, default_value_t = 10.0)]
        seconds: f64,
        #[arg(long, default_value = "lookahead")]
        mode: Mode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Dump per-frame analysis features as CSV.
    Features {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a randomly initialized bundle (and optionally a registry).
    InitBundle {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "toy")]
        dims: Dims,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write a speaker registry matching the bundle.
        #[arg(long)]
        speakers: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Dims {
    Toy,
    Full,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub speakers: PathBuf,
    #[arg(long)]
    pub source: String,
    #[arg(long)]
    pub target: String,
    #[arg(long, default_value = "lookahead")]
    pub mode: Mode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// A failed command: exit code plus a one-line diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(m: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: m.into() }
    }

    pub fn io(m: impl Into<String>) -> Self {
        Self { code: EXIT_IO, message: m.into() }
    }

    pub fn model(m: impl Into<String>) -> Self {
        Self { code: EXIT_MODEL, message: m.into() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

type CmdResult<T = ()> = Result<T, Failure>;

pub fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Convert { input, output, model } => {
            let report = convert(&input, &output, &model)?;
            eprintln!("{}", report.to_json());
            Ok(())
        }
        Command::Stream { model } => {
            let setup = Setup::load(&model)?;
            stream(&setup, model.mode, model.seed, io::stdin(), io::stdout().lock())
        }
        Command::Latency { mode } => {
            print!("{}", latency_table(mode));
            Ok(())
        }
        Command::Bench { bundle, seconds, mode, seed } => {
            let bundle = match bundle {
                Some(p) => load_bundle(&p)?,
                None => toy_bundle(seed)?,
            };
            let report = bench(&bundle, seconds, mode, seed)?;
            println!("{}", report.to_json());
            Ok(())
        }
        Command::Features { input, out } => {
            let audio = wav::read_wav(&input).map_err(|e| Failure::io(format!("{}: {e}", input.display())))?;
            let csv = features_csv(&audio)?;
            std::fs::write(&out, csv).map_err(|e| Failure::io(format!("{}: {e}", out.display())))
        }
        Command::InitBundle { out, dims, seed, speakers } => init_bundle(&out, dims, seed, speakers.as_deref()),
    }
}

/// Bundle plus the two speaker profiles of a conversion.
pub struct Setup {
    pub bundle: ModelBundle,
    pub source: SpeakerProfile,
    pub target: SpeakerProfile,
}

impl Setup {
    pub fn load(args: &ModelArgs) -> CmdResult<Self> {
        let registry = load_registry(&args.speakers)?;
        let source = lookup(&registry, &args.source, "--source")?;
        let target = lookup(&registry, &args.target, "--target")?;
        let bundle = load_bundle(&args.bundle)?;
        Ok(Self { bundle, source, target })
    }

    pub fn session(&self, mode: Mode, seed: u64) -> CmdResult<ConversionSession<'_>> {
        ConversionSession::new(&self.bundle, mode, &self.source, &self.target, seed).map_err(model_err)
    }
}

fn model_err(e: ppgvc_core::Error) -> Failure {
    Failure::model(e.to_string())
}

pub fn load_bundle(path: &Path) -> CmdResult<ModelBundle> {
    ModelBundle::read_file(path)
        .map_err(|e| Failure::io(format!("{}: {e}", path.display())))?
        .map_err(|e| Failure::model(format!("{}: {e}", path.display())))
}

pub fn load_registry(path: &Path) -> CmdResult<SpeakerRegistry> {
    SpeakerRegistry::read_file(path)
        .map_err(|e| Failure::io(format!("{}: {e}", path.display())))?
        .map_err(|e| Failure::model(format!("{}: {e}", path.display())))
}

fn lookup(registry: &SpeakerRegistry, id: &str, flag: &str) -> CmdResult<SpeakerProfile> {
    registry.get(id).cloned().ok_or_else(|| {
        Failure::usage(format!(
            "{flag}: unknown speaker {id:?}; known speakers: {}",
            registry.ids().join(", ")
        ))
    })
}

pub fn toy_bundle(seed: u64) -> CmdResult<ModelBundle> {
    ModelBundle::random(&BundleDims::toy(), seed).map_err(model_err)
}

pub fn convert(input: &Path, output: &Path, args: &ModelArgs) -> CmdResult<RunReport> {
    let audio = wav::read_wav(input).map_err(|e| Failure::io(format!("{}: {e}", input.display())))?;
    let setup = Setup::load(args)?;
    let (out, report) = convert_audio(&setup, &audio, args.mode, args.seed)?;
    wav::write_wav(output, &out).map_err(|e| Failure::io(format!("{}: {e}", output.display())))?;
    Ok(report)
}

/// Runs one session over `audio` and times it.
pub fn convert_audio(setup: &Setup, audio: &AudioBuffer, mode: Mode, seed: u64) -> CmdResult<(AudioBuffer, RunReport)> {
    if audio.is_empty() {
        return Err(Failure::model("input audio is empty"));
    }
    let start = Instant::now();
    let mut session = setup.session(mode, seed)?;
    let mut out = session.push(audio.samples()).map_err(model_err)?;
    out.extend(session.finish().map_err(model_err)?);
    let wall = start.elapsed();
    let report = RunReport::new(
        "convert",
        mode,
        audio.duration_secs(),
        wall,
        session.frames_processed(),
        &session.timings(),
    );
    Ok((AudioBuffer::new(out).map_err(model_err)?, report))
}

fn is_broken_pipe(e: &io::Error) -> bool {
    e.kind() == io::ErrorKind::BrokenPipe
}

fn write_pcm<W: Write>(out: &mut W, samples: &[f32]) -> io::Result<()> {
    if samples.is_empty() {
        return Ok(());
    }
    let bytes: Vec<u8> = samples.iter().flat_map(|&s| f32_to_i16(s).to_le_bytes()).collect();
    out.write_all(&bytes)?;
    out.flush()
}

/// Reads PCM chunks on a separate thread and hands them over through a
/// bounded channel, so memory stays constant however long the stream runs.
/// A closed output ends the run quietly.
pub fn stream<R, W>(setup: &Setup, mode: Mode, seed: u64, input: R, mut output: W) -> CmdResult
where
    R: Read + Send + 'static,
    W: Write,
{
    let mut session = setup.session(mode, seed)?;
    let (tx, rx) = sync_channel::<io::Result<Vec<i16>>>(STREAM_QUEUE);
    std::thread::spawn(move || {
        let mut input = input;
        let mut buf = [0u8; 2 * STREAM_CHUNK];
        let mut carry: Option<u8> = None;
        loop {
            let n = match input.read(&mut buf) {
                Ok(0) => break,
                Ok(n) => n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => {
                    let _ = tx.send(Err(e));
                    return;
                }
            };
            let mut bytes = Vec::with_capacity(n + 1);
            bytes.extend(carry.take());
            bytes.extend_from_slice(&buf[..n]);
            if bytes.len() % 2 == 1 {
                carry = bytes.pop();
            }
            let pcm = bytes.chunks_exact(2).map(|b| i16::from_le_bytes([b[0], b[1]])).collect();
            if tx.send(Ok(pcm)).is_err() {
                return;
            }
        }
        if carry.is_some() {
            eprintln!("warning: dropping trailing odd byte of input");
        }
    });

    let mut received = false;
    for chunk in rx {
        let pcm = chunk.map_err(|e| Failure::io(format!("stdin: {e}")))?;
        received |= !pcm.is_empty();
        let samples: Vec<f32> = AudioBuffer::from_i16(&pcm).into_samples();
        let out = session.push(&samples).map_err(model_err)?;
        match write_pcm(&mut output, &out) {
            Err(e) if is_broken_pipe(&e) => return Ok(()),
            r => r.map_err(|e| Failure::io(format!("stdout: {e}")))?,
        }
    }
    if !received {
        return Ok(());
    }
    let out = session.finish().map_err(model_err)?;
    match write_pcm(&mut output, &out) {
        Err(e) if is_broken_pipe(&e) => Ok(()),
        r => r.map_err(|e| Failure::io(format!("stdout: {e}"))),
    }
}

pub fn latency_table(mode: Mode) -> String {
    let budget = LatencyBudget::for_mode(mode);
    let mut s = format!("# {mode} mode\n{:<12}{:>8}{:>10}\n", "stage", "frames", "ms");
    for (name, frames, ms) in budget.rows() {
        let frames = if name == "framing" { "-".to_string() } else { frames.to_string() };
        s += &format!("{name:<12}{frames:>8}{ms:>10.1}\n");
    }
    s += &format!("{:<12}{:>8}{:>10.1}\n", "total", "", latency_of(&budget));
    s
}

/// Speech-like test input: a gliding harmonic tone with syllable-rate
/// amplitude changes, unvoiced noise bursts and a little background noise.
pub fn bench_signal(seconds: f64, seed: u64) -> AudioBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (seconds * 16000.0).round() as usize;
    let mut phase = 0.0f64;
    let x = (0..n)
        .map(|i| {
            let t = i as f64 / 16000.0;
            let syllable = (t * 4.0).fract();
            let f0 = 140.0 + 40.0 * (2.0 * std::f64::consts::PI * 0.7 * t).sin();
            phase += 2.0 * std::f64::consts::PI * f0 / 16000.0;
            let noise: f64 = rng.gen_range(-1.0..1.0);
            let s = if syllable < 0.7 {
                let env = (std::f64::consts::PI * syllable / 0.7).sin();
                env * (1..=6).map(|k| (k as f64 * phase).sin() / k as f64).sum::<f64>() * 0.3
            } else {
                0.1 * noise
            };
            (s + 0.005 * noise) as f32
        })
        .collect();
    AudioBuffer::new(x).expect("finite samples")
}

/// Converts `seconds` of [`bench_signal`] on the calling thread.
pub fn bench(bundle: &ModelBundle, seconds: f64, mode: Mode, seed: u64) -> CmdResult<RunReport> {
    if !(seconds > 0.0 && seconds.is_finite()) {
        return Err(Failure::usage("--seconds must be positive"));
    }
    let n = bundle.metadata().n_speakers;
    let source = SpeakerProfile::new("bench-src", 0, 120f64.ln(), 0.2).map_err(model_err)?;
    let target = SpeakerProfile::new("bench-tgt", n.saturating_sub(1), 220f64.ln(), 0.25).map_err(model_err)?;
    let setup = Setup {
        bundle: bundle.clone(),
        source,
        target,
    };
    let audio = bench_signal(seconds, seed);
    let (_, mut report) = convert_audio(&setup, &audio, mode, seed)?;
    report.command = "bench";
    Ok(report)
}

pub fn features_header() -> Vec<String> {
    let mut h = Vec::new();
    for prefix in ["mfcc", "delta", "delta2"] {
        h.extend((0..N_MFCC).map(|i| format!("{prefix}_{i}")));
    }
    h.extend((0..N_BARK_BANDS).map(|i| format!("bark_{i}")));
    h.push("pitch_param".into());
    h.push("pitch_corr".into());
    h
}

/// One row per analysis frame: 39 MFCC+Δ+ΔΔ columns then the 20 vocoder
/// features, 9 significant digits each.
pub fn features_csv(audio: &AudioBuffer) -> CmdResult<String> {
    let frames = analyze(audio).map_err(model_err)?;
    debug_assert_eq!(frames.len(), FrameGeometry::standard().frame_count(audio.len()));
    let mut s = features_header().join(",");
    s.push('\n');
    for f in &frames {
        let row: Vec<String> = f
            .mfcc
            .to_vec()
            .into_iter()
            .chain(f.features.to_vec().into_iter().map(|v| v as f64))
            .map(|v| format!("{v:.8e}"))
            .collect();
        s += &row.join(",");
        s.push('\n');
    }
    Ok(s)
}

pub fn init_bundle(out: &Path, dims: Dims, seed: u64, speakers: Option<&Path>) -> CmdResult {
    let d = match dims {
        Dims::Toy => BundleDims::toy(),
        Dims::Full => BundleDims::default(),
    };
    let bundle = ModelBundle::random(&d, seed).map_err(model_err)?;
    bundle
        .write_file(out)
        .map_err(|e| Failure::io(format!("{}: {e}", out.display())))?;
    if let Some(path) = speakers {
        let means = [110.0f64, 140.0, 200.0, 240.0];
        let profiles = (0..d.n_speakers)
            .map(|i| SpeakerProfile::new(&format!("spk{i}"), i, means[i % means.len()].ln(), 0.2))
            .collect::<Result<Vec<_>, _>>()
            .map_err(model_err)?;
        let reg = SpeakerRegistry::new(profiles).map_err(model_err)?;
        std::fs::write(path, reg.to_string()).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}
