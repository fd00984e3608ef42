//! Ordered output records with fixed float formatting, written as JSON lines
//! or CSV.

use std::fmt::Write as _;

/// 17 significant digits, enough to round-trip any f64.
pub fn format_float(x: f64) -> String {
    if !x.is_finite() {
        return "null".to_string();
    }
    if x == 0.0 {
        return "0.0".to_string();
    }
    format!("{x:.16e}")
}

#[derive(Clone, Debug, PartialEq)]
pub enum Field {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
    Null,
}

impl From<i64> for Field {
    fn from(v: i64) -> Self {
        Field::Int(v)
    }
}

impl From<usize> for Field {
    fn from(v: usize) -> Self {
        Field::Int(v as i64)
    }
}

impl From<u64> for Field {
    fn from(v: u64) -> Self {
        Field::Int(v as i64)
    }
}

impl From<f64> for Field {
    fn from(v: f64) -> Self {
        Field::Float(v)
    }
}

impl From<bool> for Field {
    fn from(v: bool) -> Self {
        Field::Bool(v)
    }
}

impl From<String> for Field {
    fn from(v: String) -> Self {
        Field::Text(v)
    }
}

impl From<&str> for Field {
    fn from(v: &str) -> Self {
        Field::Text(v.to_string())
    }
}

impl<T: Into<Field>> From<Option<T>> for Field {
    fn from(v: Option<T>) -> Self {
        v.map_or(Field::Null, Into::into)
    }
}

impl Field {
    fn json(&self) -> String {
        match self {
            Field::Int(v) => v.to_string(),
            Field::Float(v) => format_float(*v),
            Field::Text(s) => serde_json::to_string(s).expect("string serialization"),
            Field::Bool(b) => b.to_string(),
            Field::Null => "null".to_string(),
        }
    }

    fn csv(&self) -> String {
        match self {
            Field::Int(v) => v.to_string(),
            Field::Float(v) if v.is_finite() => format_float(*v),
            Field::Float(_) | Field::Null => String::new(),
            Field::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Field::Text(s) => s.clone(),
            Field::Bool(b) => b.to_string(),
        }
    }
}

/// A row of named fields in a fixed order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Record {
    fields: Vec<(String, Field)>,
}

impl Record {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: impl Into<Field>) -> Self {
        self.fields.push((key.to_string(), value.into()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&Field> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.fields.iter().map(|(k, _)| k.as_str())
    }

    pub fn to_json_line(&self) -> String {
        let mut s = String::from("{");
        for (i, (k, v)) in self.fields.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            let _ = write!(s, "{}:{}", serde_json::to_string(k).expect("key serialization"), v.json());
        }
        s.push('}');
        s
    }

    pub fn csv_header(&self) -> String {
        self.keys().collect::<Vec<_>>().join(",")
    }

    pub fn to_csv_row(&self) -> String {
        self.fields.iter().map(|(_, v)| v.csv()).collect::<Vec<_>>().join(",")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

/// JSON lines, or CSV with the header taken from the first record.
pub fn render(records: &[Record], format: Format) -> String {
    let mut out = String::new();
    match format {
        Format::Json => {
            for r in records {
                out.push_str(&r.to_json_line());
                out.push('\n');
            }
        }
        Format::Csv => {
            if let Some(first) = records.first() {
                out.push_str(&first.csv_header());
                out.push('\n');
            }
            for r in records {
                out.push_str(&r.to_csv_row());
                out.push('\n');
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, -1.0 / 3.0, 6.02214076e23, 5e-324, 1.0] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(format_float(f64::NAN), "null");
    }

    #[test]
    fn json_line_is_valid_and_ordered() {
        let r = Record::new().with("j", 1usize).with("exact", Some("12".to_string())).with("x", 0.25).with("y", None::<f64>);
        let line = r.to_json_line();
        assert_eq!(line, r#"{"j":1,"exact":"12","x":2.5000000000000000e-1,"y":null}"#);
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["x"], 0.25);
    }

    #[test]
    fn csv_quotes_commas() {
        let r = Record::new().with("a", "x,y").with("b", None::<f64>);
        assert_eq!(render(&[r], Format::Csv), "a,b\n\"x,y\",\n");
    }
}
