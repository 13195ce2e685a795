//! Output formatting: unit-carrying numbers and table/CSV/JSON rendering.

use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Table,
    Csv,
    Json,
}

impl OutputFormat {
    pub fn parse(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "table" => Some(OutputFormat::Table),
            "csv" => Some(OutputFormat::Csv),
            "json" => Some(OutputFormat::Json),
            _ => None,
        }
    }
}

/// "343.04K" (counts reported in thousands).
pub fn fmt_kilo(count: u64) -> String {
    format!("{:.2}K", count as f64 / 1e3)
}

/// "1053.35M" (MACs reported in millions).
pub fn fmt_mega(count: u64) -> String {
    format!("{:.2}M", count as f64 / 1e6)
}

/// Seconds with one decimal below 100, none above.
pub fn fmt_seconds(s: f64) -> String {
    if s >= 100.0 {
        format!("{:.0} s", s)
    } else {
        format!("{:.1} s", s)
    }
}

/// "9.56 GiB".
pub fn fmt_gib(bytes: u64) -> String {
    format!("{:.2} GiB", bytes as f64 / (1u64 << 30) as f64)
}

/// "58.82%" style percentage with two decimals.
pub fn fmt_percent(fraction: f64) -> String {
    format!("{:.2}%", 100.0 * fraction)
}

/// A rectangular report, rendered as aligned text, CSV, or JSON.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Report {
    pub fn new<S: Into<String>>(headers: Vec<S>) -> Self {
        Self { headers: headers.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push_row<S: Into<String>>(&mut self, row: Vec<S>) {
        let row: Vec<String> = row.into_iter().map(Into::into).collect();
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Table => self.render_table(),
            OutputFormat::Csv => self.render_csv(),
            OutputFormat::Json => self.render_json(),
        }
    }

    fn render_table(&self) -> String {
        let cols = self.headers.len();
        let mut widths: Vec<usize> = self.headers.iter().map(|h| h.chars().count()).collect();
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate().take(cols) {
                widths[i] = widths[i].max(cell.chars().count());
            }
        }
        let mut out = String::new();
        let write_row = |cells: &[String], out: &mut String| {
            for (i, cell) in cells.iter().enumerate() {
                if i > 0 {
                    out.push_str("  ");
                }
                let _ = write!(out, "{:<width$}", cell, width = widths[i]);
            }
            while out.ends_with(' ') {
                out.pop();
            }
            out.push('\n');
        };
        write_row(&self.headers, &mut out);
        let rule: usize = widths.iter().sum::<usize>() + 2 * (cols.saturating_sub(1));
        out.push_str(&"-".repeat(rule));
        out.push('\n');
        for row in &self.rows {
            write_row(row, &mut out);
        }
        out
    }

    fn render_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(&self.headers).expect("in-memory csv");
        for row in &self.rows {
            writer.write_record(row).expect("in-memory csv");
        }
        String::from_utf8(writer.into_inner().expect("in-memory csv")).expect("csv is utf-8")
    }

    fn render_json(&self) -> String {
        let doc = serde_json::json!({
            "headers": self.headers,
            "rows": self.rows,
        });
        let mut text = serde_json::to_string_pretty(&doc).expect("report serialization");
        text.push('\n');
        text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn units_render() {
        assert_eq!(fmt_kilo(343_040), "343.04K");
        assert_eq!(fmt_mega(1_053_350_000), "1053.35M");
        assert_eq!(fmt_seconds(33.7), "33.7 s");
        assert_eq!(fmt_seconds(1004.0), "1004 s");
        assert_eq!(fmt_gib(10_267_729_920), "9.56 GiB");
    }

    #[test]
    fn table_alignment_and_csv() {
        let mut r = Report::new(vec!["stage", "relus"]);
        r.push_row(vec!["1", "327.68K"]);
        r.push_row(vec!["total", "557.06K"]);
        let text = r.render(OutputFormat::Table);
        assert!(text.contains("stage  relus"));
        let csv = r.render(OutputFormat::Csv);
        assert!(csv.starts_with("stage,relus\n"));
        let json = r.render(OutputFormat::Json);
        assert!(json.contains("\"headers\""));
    }
}
