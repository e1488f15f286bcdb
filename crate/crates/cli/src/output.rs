use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Opens `path`, or stdout when absent.
pub fn open(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Buffers CSV text and appends the provenance trailer on [`Csv::finish`].
pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = header.join(",");
        buf.push('\n');
        Self { buf }
    }

    pub fn row<I, S>(&mut self, cells: I)
    where
        I: IntoIterator<Item = S>,
        S: ToString,
    {
        let cells: Vec<String> = cells.into_iter().map(|c| c.to_string()).collect();
        self.buf.push_str(&cells.join(","));
        self.buf.push('\n');
    }

    /// Existing CSV text (header included) produced elsewhere.
    pub fn raw(text: String) -> Self {
        Self { buf: text }
    }

    pub fn finish(mut self, seed: u64, w: &mut dyn Write) -> Result<()> {
        self.buf.push_str(&format!("# version={VERSION} seed={seed}\n"));
        w.write_all(self.buf.as_bytes())?;
        w.flush()?;
        Ok(())
    }

    pub fn write_to(self, seed: u64, path: Option<&Path>) -> Result<()> {
        let mut w = open(path)?;
        self.finish(seed, &mut *w)
    }
}

/// Formats a float with enough digits to round-trip.
pub fn num(v: f64) -> String {
    format!("{v}")
}
