//! Minimal CSV row builder. Fields never contain commas, so no quoting.

use std::fmt::{self, Display};

/// `x` with 12 significant digits, trailing zeros dropped, in the shorter of
/// fixed and scientific notation (like C's `%.12g`).
pub fn fmt_g12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Debug, Default, Clone)]
pub struct CsvRow {
    fields: Vec<String>,
}

impl CsvRow {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, field: impl Display) -> &mut Self {
        self.fields.push(field.to_string());
        self
    }

    pub fn num(&mut self, x: f64) -> &mut Self {
        self.fields.push(fmt_g12(x));
        self
    }

    pub fn opt(&mut self, x: Option<u64>) -> &mut Self {
        self.fields.push(x.map(|v| v.to_string()).unwrap_or_default());
        self
    }

    pub fn blank(&mut self) -> &mut Self {
        self.fields.push(String::new());
        self
    }
}

impl Display for CsvRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.fields.join(","))
    }
}
