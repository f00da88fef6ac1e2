//! Trajectory log writer.
//!
//! One CSV row per logged control cycle. The first line carries the schema
//! tag, the second the column header. Floats print as `%.9e`, so a run is
//! byte-identical for a given scenario and seed on one platform.

use std::fmt::Write as _;

pub const LOG_SCHEMA: &str = "liftwing-log v1";

pub const COLUMNS: &[&str] = &[
    "t", "px", "py", "pz", "vx", "vy", "vz", "roll", "pitch", "yaw", "wx", "wy", "wz",
    "alpha", "beta", "va", "t1", "t2", "t3", "t4", "dar", "dal", "sig1", "sig2", "sig3",
    "sig4", "pm1", "pm2", "pm3", "pm4", "udx", "udy", "udz", "fd", "roll_d", "pitch_d",
    "yaw_d", "wdx", "wdy", "wdz", "mdx", "mdy", "mdz", "ct_w", "alloc_res", "alloc_iters",
    "alloc_active",
];

#[derive(Debug, Clone)]
pub struct LogWriter {
    buf: String,
}

impl LogWriter {
    pub fn new() -> Self {
        let mut buf = String::with_capacity(1 << 20);
        let _ = writeln!(buf, "# {LOG_SCHEMA}");
        let _ = writeln!(buf, "{}", COLUMNS.join(","));
        Self { buf }
    }

    /// Append one row; `values` must match [`COLUMNS`] minus the two trailing
    /// integer columns.
    pub fn row(&mut self, values: &[f64], alloc_iters: usize, alloc_active: u8) {
        debug_assert_eq!(values.len(), COLUMNS.len() - 2);
        for (i, v) in values.iter().enumerate() {
            if i > 0 {
                self.buf.push(',');
            }
            let _ = write!(self.buf, "{v:.9e}");
        }
        let _ = writeln!(self.buf, ",{alloc_iters},{alloc_active}");
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

impl Default for LogWriter {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_row_layout() {
        let mut w = LogWriter::new();
        let vals = vec![0.5; COLUMNS.len() - 2];
        w.row(&vals, 3, 0b10);
        let text = w.finish();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "# liftwing-log v1");
        assert_eq!(lines.next().unwrap().split(',').count(), COLUMNS.len());
        let row = lines.next().unwrap();
        assert_eq!(row.split(',').count(), COLUMNS.len());
        assert!(row.ends_with(",3,2"));
    }
}
