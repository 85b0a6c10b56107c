//! Result files.
//!
//! A run writes into its own directory:
//!
//! * `summary.json`: provenance, warnings and every measurement's scalars;
//! * `<kind>.csv`: one file per measurement that produced a table, with
//!   the table's column names as header;
//! * `scalars.csv`: `measurement,name,value` rows;
//! * `timing.json`: wall-clock time, kept out of the other files so they
//!   are byte-identical across repeated runs.
//!
//! A sweep writes `member_NNN/` directories plus `sweep.csv` with one row
//! per member. Floats use Rust's shortest round-trip formatting;
//! non-finite values are written as `inf`, `-inf` or `nan` (strings in JSON).

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::Path;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::runner::{RunRecord, SweepMember};

fn json_number(v: f64) -> serde_json::Value {
    serde_json::Number::from_f64(v).map_or_else(|| serde_json::Value::String(format_float(v)), serde_json::Value::Number)
}

pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

/// Serializes a scalar map with non-finite values as strings.
pub fn serialize_scalars<S: Serializer>(map: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
    let mut m = s.serialize_map(Some(map.len()))?;
    for (k, v) in map {
        m.serialize_entry(k, &json_number(*v))?;
    }
    m.end()
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("records serialize");
    text.push('\n');
    text
}

/// JSON of the deterministic part of a record.
pub fn summary_json(record: &RunRecord) -> String {
    to_json(record)
}

pub fn write_record(record: &RunRecord, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("summary.json"), summary_json(record))?;
    let mut scalars = csv::Writer::from_path(dir.join("scalars.csv"))?;
    scalars.write_record(["measurement", "name", "value"])?;
    let mut seen = BTreeMap::<&str, usize>::new();
    for m in &record.measurements {
        for (k, v) in &m.scalars {
            scalars.write_record([m.kind.as_str(), k.as_str(), &format_float(*v)])?;
        }
        if let Some(table) = &m.table {
            let n = seen.entry(m.kind.as_str()).or_insert(0);
            let file = if *n == 0 { format!("{}.csv", m.kind) } else { format!("{}_{n}.csv", m.kind) };
            *n += 1;
            let mut w = csv::Writer::from_path(dir.join(file))?;
            w.write_record(&table.columns)?;
            for row in &table.rows {
                w.write_record(row.iter().map(|v| format_float(*v)))?;
            }
            w.flush()?;
        }
    }
    scalars.flush()?;
    fs::write(dir.join("timing.json"), to_json(&serde_json::json!({ "wall_time_s": record.wall_time_s })))?;
    Ok(())
}

fn value_text(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Writes each member's files and the merged `sweep.csv`.
pub fn write_sweep(parameter: &str, members: &[SweepMember], dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut columns = BTreeSet::new();
    for (_, r) in members {
        if let Ok(rec) = r {
            columns.extend(rec.flat_scalars().into_keys());
        }
    }
    let mut w = csv::Writer::from_path(dir.join("sweep.csv"))?;
    let mut header = vec!["member".to_string(), parameter.to_string(), "error".to_string()];
    header.extend(columns.iter().cloned());
    w.write_record(&header)?;
    let mut timing = Vec::new();
    for (i, (value, result)) in members.iter().enumerate() {
        let mut row = vec![i.to_string(), value_text(value)];
        match result {
            Ok(rec) => {
                write_record(rec, &dir.join(format!("member_{i:03}")))?;
                timing.push(rec.wall_time_s);
                let flat = rec.flat_scalars();
                row.push(String::new());
                row.extend(columns.iter().map(|c| flat.get(c).map_or(String::new(), |v| format_float(*v))));
            }
            Err(e) => {
                timing.push(f64::NAN);
                row.push(e.to_string());
                row.extend(columns.iter().map(|_| String::new()));
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    let timing: Vec<_> = timing.into_iter().map(json_number).collect();
    fs::write(dir.join("timing.json"), to_json(&serde_json::json!({ "member_wall_time_s": timing })))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_values_are_strings() {
        let mut m = BTreeMap::new();
        m.insert("a".to_string(), f64::INFINITY);
        m.insert("b".to_string(), 0.5);
        let mut ser = serde_json::Serializer::new(Vec::new());
        serialize_scalars(&m, &mut ser).unwrap();
        assert_eq!(String::from_utf8(ser.into_inner()).unwrap(), r#"{"a":"inf","b":0.5}"#);
        assert_eq!(format_float(f64::NEG_INFINITY), "-inf");
        assert_eq!(format_float(0.1), "0.1");
    }
}
