//! Minimal CSV output helpers shared by reports.

use std::io::{self, Write};

/// Shortest representation that round-trips to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

/// Writes one comma-separated record. Fields are emitted verbatim and must
/// not contain commas, quotes or newlines.
pub fn write_record<W: Write, S: AsRef<str>>(mut out: W, fields: &[S]) -> io::Result<()> {
    let mut first = true;
    for f in fields {
        if !first {
            out.write_all(b",")?;
        }
        first = false;
        out.write_all(f.as_ref().as_bytes())?;
    }
    out.write_all(b"\n")
}
