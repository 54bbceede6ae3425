//! File formats: pivotal-sample files and token-stream JSON Lines.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::simulation::TokenStream;

pub const PIVOTAL_HEADER: &str = "y";

/// Reads a header line `y` followed by one value in `[0, 1]` per line.
/// Blank lines are skipped; line numbers in errors are 1-based.
pub fn read_pivotal<R: Read>(reader: R) -> Result<Vec<f64>> {
    let mut lines = BufReader::new(reader).lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != PIVOTAL_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header `{PIVOTAL_HEADER}`, found `{}`",
                header.trim()
            ),
        });
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let lineno = i + 2;
        let y: f64 = text.parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("`{text}` is not a number"),
        })?;
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::Parse {
                line: lineno,
                message: format!("{y} outside [0, 1]"),
            });
        }
        out.push(y);
    }
    Ok(out)
}

pub fn read_pivotal_file(path: &Path) -> Result<Vec<f64>> {
    read_pivotal(File::open(path)?)
}

/// Writes with the shortest decimal representation that round-trips.
pub fn write_pivotal<W: Write>(mut writer: W, samples: &[f64]) -> Result<()> {
    writeln!(writer, "{PIVOTAL_HEADER}")?;
    for y in samples {
        writeln!(writer, "{y}")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_pivotal_file(path: &Path, samples: &[f64]) -> Result<()> {
    write_pivotal(BufWriter::new(File::create(path)?), samples)
}

/// One stream per non-blank line: `{"tokens": [...], "wm_flags": [...]}`.
pub fn read_streams<R: Read>(reader: R) -> Result<Vec<TokenStream>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let stream: TokenStream = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if !stream.wm_flags.is_empty() && stream.wm_flags.len() != stream.tokens.len() {
            return Err(Error::Parse {
                line: i + 1,
                message: format!(
                    "{} tokens but {} watermark flags",
                    stream.tokens.len(),
                    stream.wm_flags.len()
                ),
            });
        }
        out.push(stream);
    }
    Ok(out)
}

pub fn read_streams_file(path: &Path) -> Result<Vec<TokenStream>> {
    read_streams(File::open(path)?)
}

pub fn write_streams<W: Write>(mut writer: W, streams: &[TokenStream]) -> Result<()> {
    for s in streams {
        serde_json::to_writer(&mut writer, s).map_err(std::io::Error::from)?;
        writeln!(writer)?;
    }
    writer.flush()?;
    Ok(())
}
