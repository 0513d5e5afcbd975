use std::fmt::Write as _;

use serde::Serialize;

/// Deviation from a reference value at or above this fraction is flagged.
pub const FLAG_THRESHOLD: f64 = 0.15;

#[derive(Debug, Serialize)]
pub struct Value {
    pub name: String,
    pub value: f64,
    pub unit: String,
    pub reference: Option<f64>,
    pub deviation_pct: Option<f64>,
    pub flagged: bool,
}

#[derive(Debug, Serialize)]
pub struct Item {
    pub label: String,
    pub values: Vec<Value>,
    pub status: Option<String>,
}

impl Item {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            values: Vec::new(),
            status: None,
        }
    }

    pub fn value(mut self, name: &str, value: f64, unit: &str) -> Self {
        self.values.push(Value {
            name: name.to_owned(),
            value,
            unit: unit.to_owned(),
            reference: None,
            deviation_pct: None,
            flagged: false,
        });
        self
    }

    /// Adds a value with a reference; the deviation is `(reference - value) / value`.
    pub fn compared(mut self, name: &str, value: f64, unit: &str, reference: f64) -> Self {
        let deviation = if value != 0.0 {
            (reference - value) / value
        } else {
            0.0
        };
        self.values.push(Value {
            name: name.to_owned(),
            value,
            unit: unit.to_owned(),
            reference: Some(reference),
            deviation_pct: Some(deviation * 100.0),
            flagged: deviation.abs() >= FLAG_THRESHOLD,
        });
        self
    }

    pub fn status(mut self, status: impl Into<String>) -> Self {
        self.status = Some(status.into());
        self
    }
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub machine: String,
    pub items: Vec<Item>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(command: String, machine: &str) -> Self {
        Self {
            command,
            machine: machine.to_owned(),
            items: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, item: Item) {
        self.items.push(item);
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "$ {}", self.command);
        let _ = writeln!(out, "machine: {}", self.machine);
        for item in &self.items {
            let _ = write!(out, "\n{}", item.label);
            if let Some(status) = &item.status {
                let _ = write!(out, "  [{status}]");
            }
            out.push('\n');
            let width = item.values.iter().map(|v| v.name.len()).max().unwrap_or(0);
            for v in &item.values {
                let _ = write!(out, "  {:<width$}  {}", v.name, num(v.value));
                if !v.unit.is_empty() {
                    let _ = write!(out, " {}", v.unit);
                }
                if let (Some(r), Some(d)) = (v.reference, v.deviation_pct) {
                    let _ = write!(out, "  (ref {}, {:+.1}%)", num(r), d);
                    if v.flagged {
                        out.push_str(" !");
                    }
                }
                out.push('\n');
            }
        }
        if !self.notes.is_empty() {
            out.push('\n');
            for n in &self.notes {
                let _ = writeln!(out, "note: {n}");
            }
        }
        out
    }
}

/// Up to four decimals, trailing zeros trimmed; small magnitudes in scientific notation.
pub fn num(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v != 0.0 && v.abs() < 1e-3 {
        return format!("{v:.3e}");
    }
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_owned()
    } else {
        s.to_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formatting() {
        assert_eq!(num(7.0), "7");
        assert_eq!(num(7.641025641), "7.641");
        assert_eq!(num(0.5), "0.5");
        assert_eq!(num(-0.0), "0");
        assert_eq!(num(2.5e-12), "2.500e-12");
    }

    #[test]
    fn deviation_flagging() {
        let item = Item::new("x").compared("t", 2.0, "cy", 2.4).compared("u", 2.0, "cy", 2.1);
        assert!(item.values[0].flagged);
        assert!((item.values[0].deviation_pct.unwrap() - 20.0).abs() < 1e-9);
        assert!(!item.values[1].flagged);
    }

    #[test]
    fn text_contains_json_numbers() {
        let mut r = Report::new("ecm predict triad".into(), "m");
        r.push(Item::new("triad").value("t_mem", 7.641, "cy/VL").status("PASS"));
        let text = r.to_text();
        assert!(text.contains("7.641"));
        assert!(text.contains("[PASS]"));
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(json["items"][0]["values"][0]["value"], 7.641);
    }
}
