//! 16-bit mono 16 kHz RIFF/WAVE files.

use std::fmt;
use std::io::{Read, Seek, Write};
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use ppgvc_core::dsp::{f32_to_i16, AudioBuffer, SAMPLE_RATE};

pub const SPEC: WavSpec = WavSpec {
    channels: 1,
    sample_rate: SAMPLE_RATE,
    bits_per_sample: 16,
    sample_format: SampleFormat::Int,
};

#[derive(Debug)]
pub enum WavError {
    Io(std::io::Error),
    /// Not a RIFF/WAVE file, or a malformed one.
    Malformed(String),
    /// Valid WAV in a format the engine does not take; names the field.
    Unsupported {
        field: &'static str,
        expected: String,
        found: String,
    },
}

impl fmt::Display for WavError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WavError::Io(e) => write!(f, "{e}"),
            WavError::Malformed(m) => write!(f, "malformed WAV: {m}"),
            WavError::Unsupported { field, expected, found } => {
                write!(f, "unsupported WAV {field}: expected {expected}, found {found}")
            }
        }
    }
}

impl std::error::Error for WavError {}

impl From<hound::Error> for WavError {
    fn from(e: hound::Error) -> Self {
        match e {
            hound::Error::IoError(e) => WavError::Io(e),
            other => WavError::Malformed(other.to_string()),
        }
    }
}

fn check_spec(spec: &WavSpec) -> Result<(), WavError> {
    let bad = |field, expected: &dyn ToString, found: &dyn ToString| {
        Err(WavError::Unsupported {
            field,
            expected: expected.to_string(),
            found: found.to_string(),
        })
    };
    if spec.sample_format != SampleFormat::Int {
        return bad("sample format", &"integer PCM", &"IEEE float");
    }
    if spec.bits_per_sample != 16 {
        return bad("bits per sample", &16, &spec.bits_per_sample);
    }
    if spec.channels != 1 {
        return bad("channel count", &1, &spec.channels);
    }
    if spec.sample_rate != SAMPLE_RATE {
        return bad("sample rate", &SAMPLE_RATE, &spec.sample_rate);
    }
    Ok(())
}

pub fn read_from<R: Read>(reader: R) -> Result<AudioBuffer, WavError> {
    let mut r = WavReader::new(reader)?;
    check_spec(&r.spec())?;
    let pcm = r.samples::<i16>().collect::<Result<Vec<_>, _>>()?;
    Ok(AudioBuffer::from_i16(&pcm))
}

pub fn read_wav(path: &Path) -> Result<AudioBuffer, WavError> {
    let file = std::fs::File::open(path).map_err(WavError::Io)?;
    read_from(std::io::BufReader::new(file))
}

pub fn write_to<W: Write + Seek>(writer: W, audio: &AudioBuffer) -> Result<(), WavError> {
    let mut w = WavWriter::new(writer, SPEC)?;
    {
        let mut w16 = w.get_i16_writer(audio.len() as u32);
        for &s in audio.samples() {
            w16.write_sample(f32_to_i16(s));
        }
        w16.flush()?;
    }
    w.finalize()?;
    Ok(())
}

pub fn write_wav(path: &Path, audio: &AudioBuffer) -> Result<(), WavError> {
    let file = std::fs::File::create(path).map_err(WavError::Io)?;
    write_to(std::io::BufWriter::new(file), audio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn encode(spec: WavSpec, n: usize) -> Vec<u8> {
        let mut buf = Cursor::new(Vec::new());
        let mut w = WavWriter::new(&mut buf, spec).unwrap();
        for i in 0..n {
            match (spec.sample_format, spec.bits_per_sample) {
                (SampleFormat::Float, _) => w.write_sample(i as f32 / n as f32).unwrap(),
                (_, 8) => w.write_sample(i as i8).unwrap(),
                _ => w.write_sample(i as i16).unwrap(),
            }
        }
        w.finalize().unwrap();
        buf.into_inner()
    }

    #[test]
    fn roundtrip_is_exact() {
        let pcm: Vec<i16> = (-500..500).map(|i| (i * 61) as i16).chain([i16::MIN, i16::MAX]).collect();
        let audio = AudioBuffer::from_i16(&pcm);
        let mut buf = Cursor::new(Vec::new());
        write_to(&mut buf, &audio).unwrap();
        let back = read_from(Cursor::new(buf.into_inner())).unwrap();
        assert_eq!(back.to_i16(), pcm);
    }

    #[test]
    fn wrong_formats_name_the_field() {
        let cases = [
            (WavSpec { channels: 2, ..SPEC }, "channel count"),
            (WavSpec { sample_rate: 44_100, ..SPEC }, "sample rate"),
            (WavSpec { bits_per_sample: 8, ..SPEC }, "bits per sample"),
            (
                WavSpec {
                    bits_per_sample: 32,
                    sample_format: SampleFormat::Float,
                    ..SPEC
                },
                "sample format",
            ),
        ];
        for (spec, field) in cases {
            let err = read_from(Cursor::new(encode(spec, 32))).unwrap_err();
            assert!(err.to_string().contains(field), "{err}");
        }
    }

    #[test]
    fn garbage_is_malformed() {
        let err = read_from(Cursor::new(b"definitely not a wav file".to_vec())).unwrap_err();
        assert!(matches!(err, WavError::Malformed(_)), "{err}");
    }
}
