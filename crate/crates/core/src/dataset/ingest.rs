use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use super::{sort_records, InteractionRecord};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 5] = ["domain", "user", "item", "ts", "label"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogFormat {
    Csv,
    Jsonl,
}

impl FromStr for LogFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(LogFormat::Csv),
            "jsonl" => Ok(LogFormat::Jsonl),
            other => Err(Error::Config(format!("unknown log format `{other}`"))),
        }
    }
}

impl LogFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => LogFormat::Jsonl,
            _ => LogFormat::Csv,
        }
    }
}

/// Reads an interaction log and returns it sorted by `(user, ts)`, keeping
/// input order among ties.
pub fn ingest(path: &Path, format: LogFormat) -> Result<Vec<InteractionRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(BufReader::new(file), format)
}

pub fn ingest_reader<R: Read>(reader: R, format: LogFormat) -> Result<Vec<InteractionRecord>> {
    let mut records = match format {
        LogFormat::Csv => read_csv(reader)?,
        LogFormat::Jsonl => read_jsonl(BufReader::new(reader))?,
    };
    sort_records(&mut records);
    Ok(records)
}

fn read_csv<R: Read>(reader: R) -> Result<Vec<InteractionRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Format {
        row: 0,
        message: e.to_string(),
    })?;
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::Format {
            row: 0,
            message: format!(
                "header must be exactly `{}`, got `{}`",
                CSV_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Format {
            row,
            message: e.to_string(),
        })?;
        if rec.len() != CSV_HEADER.len() {
            return Err(Error::Format {
                row,
                message: format!("expected 5 columns, found {}", rec.len()),
            });
        }
        let field = |k: usize| rec.get(k).unwrap_or("").trim();
        out.push(InteractionRecord {
            domain: parse_int(field(0), row, "domain")?,
            user: parse_int(field(1), row, "user")?,
            item: parse_int(field(2), row, "item")?,
            ts: parse_int(field(3), row, "ts")?,
            label: parse_label(field(4), row)?,
        });
    }
    Ok(out)
}

fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<InteractionRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let row = i + 1;
        let line = line.map_err(|e| Error::Format {
            row,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| Error::Format {
            row,
            message: e.to_string(),
        })?;
        let get = |key: &str| -> Result<String> {
            match value.get(key) {
                Some(serde_json::Value::Number(n)) => Ok(n.to_string()),
                Some(serde_json::Value::String(s)) => Ok(s.clone()),
                Some(other) => Ok(other.to_string()),
                None => Err(Error::Format {
                    row,
                    message: format!("missing key `{key}`"),
                }),
            }
        };
        out.push(InteractionRecord {
            domain: parse_int(&get("domain")?, row, "domain")?,
            user: parse_int(&get("user")?, row, "user")?,
            item: parse_int(&get("item")?, row, "item")?,
            ts: parse_int(&get("ts")?, row, "ts")?,
            label: parse_label(&get("label")?, row)?,
        });
    }
    Ok(out)
}

fn parse_int<T: FromStr>(s: &str, row: usize, field: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e: T::Err| Error::Parse {
        row,
        field: field.to_string(),
        message: format!("`{s}`: {e}"),
    })
}

fn parse_label(s: &str, row: usize) -> Result<u8> {
    match parse_int::<u8>(s, row, "label")? {
        l @ (0 | 1) => Ok(l),
        other => Err(Error::Parse {
            row,
            field: "label".into(),
            message: format!("label must be 0 or 1, got {other}"),
        }),
    }
}

/// Writes records in the ingest CSV format.
pub fn write_records_csv<W: Write>(writer: W, records: &[InteractionRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let io = |e: csv::Error| Error::Data(e.to_string());
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in records {
        w.write_record([
            r.domain.to_string(),
            r.user.to_string(),
            r.item.to_string(),
            r.ts.to_string(),
            r.label.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Data(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv(s: &str) -> Result<Vec<InteractionRecord>> {
        ingest_reader(s.as_bytes(), LogFormat::Csv)
    }

    #[test]
    fn parses_a_row() {
        let r = csv("domain,user,item,ts,label\n0,1,42,1000,1\n").unwrap();
        assert_eq!(r, vec![InteractionRecord::positive(0, 1, 42, 1000)]);
    }

    #[test]
    fn empty_body_is_empty() {
        assert!(csv("domain,user,item,ts,label\n").unwrap().is_empty());
    }

    #[test]
    fn equal_user_and_timestamp_keep_input_order() {
        let r = csv("domain,user,item,ts,label\n0,2,1,5,1\n0,1,9,7,1\n0,1,8,7,0\n0,1,3,2,1\n").unwrap();
        let items: Vec<u64> = r.iter().map(|x| x.item).collect();
        assert_eq!(items, vec![3, 9, 8, 1]);
    }

    #[test]
    fn wrong_header_and_missing_column_are_format_errors() {
        assert!(matches!(
            csv("domain,user,item,label\n0,1,2,1\n"),
            Err(Error::Format { row: 0, .. })
        ));
        assert!(matches!(
            csv("domain,user,item,ts,label\n0,1,2,3,1\n0,1,2,3\n"),
            Err(Error::Format { row: 2, .. })
        ));
    }

    #[test]
    fn non_integer_is_a_parse_error() {
        match csv("domain,user,item,ts,label\n0,1,x,3,1\n") {
            Err(Error::Parse { row, field, .. }) => {
                assert_eq!(row, 1);
                assert_eq!(field, "item");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            csv("domain,user,item,ts,label\n0,1,2,3,2\n"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn jsonl_matches_csv() {
        let j = "{\"domain\":1,\"user\":4,\"item\":7,\"ts\":10,\"label\":1}\n\n{\"domain\":0,\"user\":4,\"item\":3,\"ts\":5,\"label\":0}\n";
        let r = ingest_reader(j.as_bytes(), LogFormat::Jsonl).unwrap();
        assert_eq!(r[0].item, 3);
        assert_eq!(r[1], InteractionRecord::positive(1, 4, 7, 10));
        let missing = "{\"domain\":1,\"user\":4,\"item\":7,\"label\":1}\n";
        assert!(matches!(
            ingest_reader(missing.as_bytes(), LogFormat::Jsonl),
            Err(Error::Format { row: 1, .. })
        ));
    }

    #[test]
    fn csv_writer_round_trips() {
        let recs = vec![
            InteractionRecord::positive(0, 1, 2, 3),
            InteractionRecord {
                label: 0,
                ..InteractionRecord::positive(1, 1, 5, 9)
            },
        ];
        let mut buf = Vec::new();
        write_records_csv(&mut buf, &recs).unwrap();
        assert_eq!(csv(std::str::from_utf8(&buf).unwrap()).unwrap(), recs);
    }
}
