//! CSV rendering with a self-describing header.

use std::fmt::Write as _;

/// `v` with 12 significant digits, trailing zeros trimmed.
pub fn fmt_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let s = format!("{:.*}", (11 - exp).max(0) as usize, v);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{v:.11e}")
    }
}

pub struct Csv {
    text: String,
    width: usize,
}

impl Csv {
    pub fn new(config_json: &str, columns: &[&str]) -> Self {
        let mut text = String::new();
        writeln!(text, "# config: {config_json}").unwrap();
        writeln!(text, "{}", columns.join(",")).unwrap();
        Self {
            text,
            width: columns.len(),
        }
    }

    /// Leading label cell followed by numbers.
    pub fn labeled_row(&mut self, label: &str, values: &[f64]) {
        assert_eq!(values.len() + 1, self.width, "row width");
        let cells: Vec<String> = std::iter::once(label.to_string())
            .chain(values.iter().map(|&v| fmt_sig(v)))
            .collect();
        writeln!(self.text, "{}", cells.join(",")).unwrap();
    }

    pub fn row(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.width, "row width");
        let cells: Vec<String> = values.iter().map(|&v| fmt_sig(v)).collect();
        writeln!(self.text, "{}", cells.join(",")).unwrap();
    }

    pub fn finish(self) -> String {
        self.text
    }
}
