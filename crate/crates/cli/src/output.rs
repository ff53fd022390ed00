use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

/// Destination of a command's output: a file or stdout.
pub struct Sink {
    inner: Box<dyn Write>,
}

impl Sink {
    pub fn open(path: Option<&Path>) -> io::Result<Self> {
        let inner: Box<dyn Write> = match path {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        };
        Ok(Sink { inner })
    }

    pub fn csv(&mut self) -> csv::Writer<&mut dyn Write> {
        csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(&mut *self.inner)
    }

    pub fn json(&mut self, doc: &serde_json::Value) -> io::Result<()> {
        serde_json::to_writer_pretty(&mut *self.inner, doc)?;
        self.inner.write_all(b"\n")?;
        self.inner.flush()
    }

    pub fn text(&mut self, s: &str) -> io::Result<()> {
        self.inner.write_all(s.as_bytes())?;
        self.inner.flush()
    }
}

/// A CSV cell for an optional number; missing values are empty.
pub fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
