use std::io::{Cursor, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use ppgvc_cli::{stream, wav, ModelArgs, RunReport, Setup};
use ppgvc_core::dsp::AudioBuffer;
use ppgvc_core::pipeline::Mode;
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ppgvc"))
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let f = Self { dir };
        let out = bin()
            .args(["init-bundle", "--seed", "7", "--out"])
            .arg(f.path("toy.acvc"))
            .arg("--speakers")
            .arg(f.path("spk.tsv"))
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn model_flags(&self, target: &str) -> Vec<String> {
        vec![
            "--bundle".into(),
            self.path("toy.acvc").display().to_string(),
            "--speakers".into(),
            self.path("spk.tsv").display().to_string(),
            "--source".into(),
            "spk0".into(),
            "--target".into(),
            target.into(),
        ]
    }

    fn model_args(&self) -> ModelArgs {
        ModelArgs {
            bundle: self.path("toy.acvc"),
            speakers: self.path("spk.tsv"),
            source: "spk0".into(),
            target: "spk2".into(),
            mode: Mode::Lookahead,
            seed: 0,
        }
    }

    fn write_input(&self, name: &str, seconds: f64) -> PathBuf {
        let p = self.path(name);
        wav::write_wav(&p, &ppgvc_cli::bench_signal(seconds, 1)).unwrap();
        p
    }

    fn convert(&self, input: &Path, output: &Path, extra: &[&str]) -> Output {
        bin()
            .arg("convert")
            .arg(input)
            .arg(output)
            .args(self.model_flags("spk2"))
            .args(extra)
            .output()
            .unwrap()
    }
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn convert_one_second() {
    let f = Fixture::new();
    let input = f.write_input("in.wav", 1.0);
    let out = f.convert(&input, &f.path("out.wav"), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let audio = wav::read_wav(&f.path("out.wav")).unwrap();
    assert!((audio.duration_secs() - 1.0).abs() <= 0.010);
    let report: Value = serde_json::from_str(stderr(&out).trim()).unwrap();
    assert!(report["rtf"].as_f64().unwrap() > 0.0);
    assert_eq!(report["latency_ms"].as_f64(), Some(57.5));
    assert_eq!(report["frames"].as_u64(), Some(100));
    assert!(out.stdout.is_empty());
}

#[test]
fn convert_is_deterministic_per_seed() {
    let f = Fixture::new();
    let input = f.write_input("in.wav", 0.3);
    for (name, seed) in [("a.wav", "5"), ("b.wav", "5"), ("c.wav", "6")] {
        assert!(f.convert(&input, &f.path(name), &["--seed", seed]).status.success());
    }
    let read = |n| std::fs::read(f.path(n)).unwrap();
    assert_eq!(read("a.wav"), read("b.wav"));
    assert_ne!(read("a.wav"), read("c.wav"));
}

#[test]
fn streaming_mode_has_lower_latency_in_report() {
    let f = Fixture::new();
    let input = f.write_input("in.wav", 0.2);
    let out = f.convert(&input, &f.path("o.wav"), &["--mode", "streaming"]);
    let report: Value = serde_json::from_str(stderr(&out).trim()).unwrap();
    assert_eq!(report["latency_ms"].as_f64(), Some(37.5));
    assert_eq!(report["mode"], "streaming");
}

#[test]
fn unknown_target_lists_known_speakers() {
    let f = Fixture::new();
    let input = f.write_input("in.wav", 0.1);
    let out = bin()
        .arg("convert")
        .arg(&input)
        .arg(f.path("o.wav"))
        .args(f.model_flags("nobody"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    assert!(msg.contains("nobody") && msg.contains("spk0, spk1, spk2, spk3"), "{msg}");
    assert_eq!(msg.trim().lines().count(), 1);
}

#[test]
fn bad_arguments_exit_2() {
    assert_eq!(bin().args(["convert", "--bogus"]).output().unwrap().status.code(), Some(2));
    assert_eq!(bin().args(["latency", "--mode", "fast"]).output().unwrap().status.code(), Some(2));
}

#[test]
fn missing_input_is_io_error() {
    let f = Fixture::new();
    let out = f.convert(&f.path("absent.wav"), &f.path("o.wav"), &[]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unsupported_wav_names_the_field() {
    let f = Fixture::new();
    let p = f.path("stereo.wav");
    let spec = hound::WavSpec { channels: 2, ..wav::SPEC };
    let mut w = hound::WavWriter::create(&p, spec).unwrap();
    for _ in 0..3200 {
        w.write_sample(0i16).unwrap();
    }
    w.finalize().unwrap();
    let out = f.convert(&p, &f.path("o.wav"), &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("channel count"), "{}", stderr(&out));
}

#[test]
fn corrupt_bundle_is_model_error() {
    let f = Fixture::new();
    let input = f.write_input("in.wav", 0.1);
    let bytes = std::fs::read(f.path("toy.acvc")).unwrap();
    std::fs::write(f.path("toy.acvc"), &bytes[..bytes.len() / 2]).unwrap();
    let out = f.convert(&input, &f.path("o.wav"), &[]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("truncated"), "{}", stderr(&out));
}

fn pcm_of(path: &Path) -> Vec<u8> {
    wav::read_wav(path)
        .unwrap()
        .to_i16()
        .iter()
        .flat_map(|s| s.to_le_bytes())
        .collect()
}

fn run_stream(f: &Fixture, input: &[u8]) -> Output {
    let mut child = bin()
        .arg("stream")
        .args(f.model_flags("spk2"))
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stdin = child.stdin.take().unwrap();
    let data = input.to_vec();
    let writer = std::thread::spawn(move || stdin.write_all(&data));
    let out = child.wait_with_output().unwrap();
    writer.join().unwrap().unwrap();
    out
}

#[test]
fn stream_matches_convert() {
    let f = Fixture::new();
    let input = f.write_input("in.wav", 0.5);
    assert!(f.convert(&input, &f.path("out.wav"), &[]).status.success());
    let out = run_stream(&f, &pcm_of(&input));
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(out.stdout, pcm_of(&f.path("out.wav")));
}

#[test]
fn empty_stdin_gives_empty_stdout() {
    let f = Fixture::new();
    let out = run_stream(&f, &[]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
}

#[test]
fn closed_stdout_is_a_clean_exit() {
    let f = Fixture::new();
    let mut child = bin()
        .arg("stream")
        .args(f.model_flags("spk2"))
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stdout = child.stdout.take().unwrap();
    let mut stdin = child.stdin.take().unwrap();
    let writer = std::thread::spawn(move || {
        let chunk = vec![0x11u8; 3200];
        for _ in 0..200 {
            if stdin.write_all(&chunk).is_err() {
                break;
            }
        }
    });
    let mut first = [0u8; 64];
    stdout.read_exact(&mut first).unwrap();
    drop(stdout);
    let status = child.wait().unwrap();
    writer.join().unwrap();
    assert_eq!(status.code(), Some(0));
}

/// Hands out its bytes `step` at a time.
struct Trickle {
    data: Cursor<Vec<u8>>,
    step: usize,
}

impl Read for Trickle {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let n = buf.len().min(self.step);
        self.data.read(&mut buf[..n])
    }
}

#[test]
fn stream_output_does_not_depend_on_read_size() {
    let f = Fixture::new();
    let setup = Setup::load(&f.model_args()).unwrap();
    let pcm: Vec<u8> = ppgvc_cli::bench_signal(0.3, 2)
        .to_i16()
        .iter()
        .flat_map(|s| s.to_le_bytes())
        .collect();
    let run = |step| {
        let mut out = Vec::new();
        let input = Trickle {
            data: Cursor::new(pcm.clone()),
            step,
        };
        stream(&setup, Mode::Lookahead, 3, input, &mut out).unwrap();
        out
    };
    let big = run(65536);
    assert_eq!(big.len(), pcm.len());
    assert_eq!(run(1), big);
    assert_eq!(run(333), big);
    let audio = AudioBuffer::from_i16(
        &pcm.chunks(2).map(|b| i16::from_le_bytes([b[0], b[1]])).collect::<Vec<_>>(),
    );
    let (whole, _) = ppgvc_cli::convert_audio(&setup, &audio, Mode::Lookahead, 3).unwrap();
    let whole: Vec<u8> = whole.to_i16().iter().flat_map(|s| s.to_le_bytes()).collect();
    assert_eq!(big, whole);
}

#[test]
fn latency_command_prints_budget() {
    for (mode, total) in [("lookahead", "57.5"), ("streaming", "37.5")] {
        let out = bin().args(["latency", "--mode", mode]).output().unwrap();
        assert!(out.status.success());
        let text = String::from_utf8(out.stdout).unwrap();
        let rows: Vec<&str> = text
            .lines()
            .filter(|l| ["framing", "acoustic", "conversion", "vocoder"].iter().any(|s| l.starts_with(s)))
            .collect();
        assert_eq!(rows.len(), 4);
        let last = text.lines().last().unwrap();
        assert!(last.starts_with("total") && last.ends_with(total), "{text}");
    }
}

#[test]
fn bench_reports_consistent_timings() {
    let out = bin().args(["bench", "--seconds", "1"]).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let rtf = v["rtf"].as_f64().unwrap();
    assert!(rtf > 0.0 && rtf.is_finite());
    let total = v["processing_seconds"].as_f64().unwrap();
    let sum: f64 = v["stages"].as_object().unwrap().values().map(|s| s.as_f64().unwrap()).sum();
    assert!((sum - total).abs() <= 0.1 * total, "{sum} vs {total}");
    assert_eq!(v["frames"].as_u64(), Some(100));
}

#[test]
fn bench_rejects_broken_bundle() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("bad.acvc");
    std::fs::write(&p, b"ACVC\x09\x00\x00\x00").unwrap();
    let out = bin().arg("bench").arg("--bundle").arg(&p).output().unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn features_csv_shape_and_determinism() {
    let f = Fixture::new();
    let input = f.write_input("in.wav", 1.0);
    for name in ["a.csv", "b.csv"] {
        let out = bin().arg("features").arg(&input).arg("--out").arg(f.path(name)).output().unwrap();
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let a = std::fs::read_to_string(f.path("a.csv")).unwrap();
    assert_eq!(a, std::fs::read_to_string(f.path("b.csv")).unwrap());
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines.len(), 101);
    assert_eq!(lines[0].split(',').count(), 59);
    for row in &lines[1..] {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells.len(), 59);
        for c in cells {
            let mantissa = c.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(|ch| ch.is_ascii_digit()).count(), 9, "{c}");
            c.parse::<f64>().unwrap();
        }
    }
}

#[test]
fn features_to_unwritable_path_is_io_error() {
    let f = Fixture::new();
    let input = f.write_input("in.wav", 0.1);
    let out = bin()
        .arg("features")
        .arg(&input)
        .arg("--out")
        .arg(f.path("missing-dir/x.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn report_round_trips_through_json() {
    let f = Fixture::new();
    let setup = Setup::load(&f.model_args()).unwrap();
    let (_, r): (_, RunReport) =
        ppgvc_cli::convert_audio(&setup, &ppgvc_cli::bench_signal(0.1, 1), Mode::Streaming, 0).unwrap();
    let v: Value = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(v["stages"].as_object().unwrap().len(), 6);
    assert!((v["rtf"].as_f64().unwrap() - r.processing_seconds / r.audio_seconds).abs() < 1e-12);
}
