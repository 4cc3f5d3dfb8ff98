//! Key-value and CSV output. Reals are printed with Rust's shortest
//! round-trip formatting; infinities appear as `inf` and `-inf`.

use std::io::Write;

pub fn real(x: f64) -> String {
    format!("{x}")
}

/// An ordered table; rendered as aligned text or as CSV with a header row.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> anyhow::Result<()> {
        let mut width = vec![0; self.header.len()];
        for r in std::iter::once(&self.header).chain(&self.rows) {
            for (w, c) in width.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
        for r in std::iter::once(&self.header).chain(&self.rows) {
            let cells: Vec<String> = r.iter().zip(&width).map(|(c, w)| format!("{c:<w$}")).collect();
            writeln!(out, "{}", cells.join("  ").trim_end())?;
        }
        Ok(())
    }

    pub fn write<W: Write>(&self, out: W, csv: bool) -> anyhow::Result<()> {
        if csv {
            self.write_csv(out)
        } else {
            self.write_text(out)
        }
    }
}

/// `quantity,value` pairs.
pub struct KeyValues(Table);

impl KeyValues {
    pub fn new() -> Self {
        KeyValues(Table::new(&["quantity", "value"]))
    }

    pub fn real(&mut self, key: &str, v: f64) {
        self.0.push(vec![key.to_string(), real(v)]);
    }

    pub fn write<W: Write>(&self, mut out: W, csv: bool) -> anyhow::Result<()> {
        if csv {
            return self.0.write_csv(out);
        }
        let width = self.0.rows.iter().map(|r| r[0].len()).max().unwrap_or(0);
        for r in &self.0.rows {
            writeln!(out, "{:<width$}  {}", r[0], r[1])?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2.014322733458316, 1e-300, f64::INFINITY, -f64::INFINITY] {
            let s = real(x);
            let back = levydam::config::parse_real(&s).unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn csv_layout() {
        let mut kv = KeyValues::new();
        kv.real("a", 0.5);
        kv.real("b", f64::INFINITY);
        let mut buf = Vec::new();
        kv.write(&mut buf, true).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "quantity,value\na,0.5\nb,inf\n");
    }
}
