use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde_json::Value;
use tempfile::NamedTempFile;

/// Missing-value marker in CSV output.
pub const NA: &str = "NA";

/// Formats a float with 17 significant digits.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| NA.to_string(), fmt)
}

/// Minimal CSV writer: header first, comma-separated, no quoting needed.
pub struct CsvWriter<W: Write> {
    out: W,
    columns: usize,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(mut out: W, header: &[String]) -> io::Result<Self> {
        writeln!(out, "{}", header.join(","))?;
        Ok(Self { out, columns: header.len() })
    }

    pub fn row(&mut self, fields: &[String]) -> io::Result<()> {
        debug_assert_eq!(fields.len(), self.columns);
        writeln!(self.out, "{}", fields.join(","))
    }

    pub fn numbers(&mut self, values: &[f64]) -> io::Result<()> {
        let mut line = String::with_capacity(values.len() * 24);
        for (i, v) in values.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&fmt(*v));
        }
        debug_assert_eq!(values.len(), self.columns);
        writeln!(self.out, "{line}")
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Writes `path` atomically (temporary file in the same directory, then
/// rename), or to standard output when `path` is `None`.
pub fn write_output<F>(path: Option<&Path>, body: F) -> io::Result<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    match path {
        Some(path) => {
            let dir = match path.parent() {
                Some(d) if !d.as_os_str().is_empty() => d,
                _ => Path::new("."),
            };
            let tmp = NamedTempFile::new_in(dir)?;
            let mut w = BufWriter::new(tmp);
            body(&mut w)?;
            let tmp = w.into_inner().map_err(|e| e.into_error())?;
            tmp.persist(path).map_err(|e| e.error)?;
            Ok(())
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            body(&mut w)?;
            w.flush()
        }
    }
}

pub fn write_json(path: Option<&Path>, value: &Value) -> io::Result<()> {
    write_output(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        let s = fmt(1.0 / 3.0);
        assert_eq!(s, "3.3333333333333331e-1");
        assert_eq!(s.parse::<f64>().unwrap(), 1.0 / 3.0);
        assert_eq!(fmt(-0.1).parse::<f64>().unwrap(), -0.1);
        assert_eq!(fmt_opt(None), "NA");
    }

    #[test]
    fn atomic_file_write() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_output(Some(&path), |w| {
            let mut csv = CsvWriter::new(w, &["a".into(), "b".into()])?;
            csv.numbers(&[1.0, 2.5])
        })
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "a,b\n1.0000000000000000e0,2.5000000000000000e0\n");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
