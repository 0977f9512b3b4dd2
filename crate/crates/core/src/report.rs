//! Locale-independent number formatting and small serialization helpers
//! shared by every emitted artifact.

use std::io::Write;

use serde_json::{Number, Value};

use crate::error::Result;

/// Version tag written into every CSV and JSON payload.
pub const SCHEMA_VERSION: u32 = 1;

/// Scientific notation with 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// JSON number carrying exactly the digits of [`fmt_num`]; `null` when not
/// finite.
pub fn json_num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    match fmt_num(x).parse::<Number>() {
        Ok(n) => Value::Number(n),
        Err(_) => Value::Null,
    }
}

/// Writes `# key=value` header lines ahead of a CSV body.
pub fn write_comment_header<W: Write>(out: &mut W, meta: &[(&str, String)]) -> Result<()> {
    writeln!(out, "# schema_version={SCHEMA_VERSION}")?;
    for (k, v) in meta {
        writeln!(out, "# {k}={v}")?;
    }
    Ok(())
}

/// Writes `(header, rows)` as CSV after the comment header.
pub fn write_csv<W: Write>(
    mut out: W,
    meta: &[(&str, String)],
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    write_comment_header(&mut out, meta)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for &x in &[1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0, 1.0] {
            let s = fmt_num(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(mantissa.len(), 17);
        }
        assert_eq!(fmt_num(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn json_keeps_digits() {
        let v = json_num(0.1);
        assert_eq!(serde_json::to_string(&v).unwrap(), "1.0000000000000001e-1");
        assert_eq!(json_num(f64::NAN), Value::Null);
    }

    #[test]
    fn csv_has_header_block() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[("N", "3".into())], &["x", "y"], vec![vec!["1".into(), "2".into()]]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "# schema_version=1\n# N=3\nx,y\n1,2\n");
    }
}
