use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use super::{CtrTable, UserId, WindowedSample};
use crate::error::{Error, Result};

/// Train/validation/test samples plus the CTR table used to build them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetSplit {
    pub train: Vec<WindowedSample>,
    pub validation: Vec<WindowedSample>,
    pub test: Vec<WindowedSample>,
    pub ctr: CtrTable,
}

impl DatasetSplit {
    pub fn all(&self) -> impl Iterator<Item = &WindowedSample> {
        self.train.iter().chain(&self.validation).chain(&self.test)
    }
}

/// Per user, in candidate-time order: first `⌊0.6n⌋` samples to train, next
/// `⌊0.2n⌋` to validation, the rest to test.
pub fn temporal_split(samples: Vec<WindowedSample>, ctr: CtrTable) -> DatasetSplit {
    let mut by_user: BTreeMap<UserId, Vec<WindowedSample>> = BTreeMap::new();
    for s in samples {
        by_user.entry(s.user).or_default().push(s);
    }
    let mut split = DatasetSplit {
        ctr,
        ..DatasetSplit::default()
    };
    for (_, mut v) in by_user {
        v.sort_by_key(|s| s.timestamp);
        let n = v.len();
        let n_train = n * 6 / 10;
        let n_val = n * 2 / 10;
        let mut it = v.into_iter();
        split.train.extend(it.by_ref().take(n_train));
        split.validation.extend(it.by_ref().take(n_val));
        split.test.extend(it);
    }
    split
}

const SPLIT_HEADER: [&str; 5] = ["user", "candidate_item", "candidate_domain", "label", "history"];

/// Writes samples as `user,candidate_item,candidate_domain,label,history`,
/// history being `item:domain` pairs joined by `|`, oldest first.
pub fn write_split_csv<W: Write>(writer: W, samples: &[WindowedSample]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let err = |e: csv::Error| Error::Data(e.to_string());
    w.write_record(SPLIT_HEADER).map_err(err)?;
    for s in samples {
        let history = s
            .history
            .iter()
            .map(|(i, d)| format!("{i}:{d}"))
            .collect::<Vec<_>>()
            .join("|");
        w.write_record([
            s.user.to_string(),
            s.candidate_item.to_string(),
            s.candidate_domain.to_string(),
            s.label.to_string(),
            history,
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::Data(e.to_string()))
}

pub fn write_split(dir: &Path, split: &DatasetSplit) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, part) in [
        ("train.csv", &split.train),
        ("val.csv", &split.validation),
        ("test.csv", &split.test),
    ] {
        let path = dir.join(name);
        let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_split_csv(std::io::BufWriter::new(f), part)?;
    }
    let path = dir.join("ctr.csv");
    let mut body = String::from("domain,ctr\n");
    for (d, c) in &split.ctr {
        body.push_str(&format!("{d},{c}\n"));
    }
    fs::write(&path, body).map_err(|e| Error::io(&path, e))
}

/// Reads a split written by [`write_split`]. Candidate timestamps are not
/// serialized; each sample gets its row number within its file instead.
pub fn read_split(dir: &Path) -> Result<DatasetSplit> {
    let mut split = DatasetSplit::default();
    for (name, part) in [
        ("train.csv", &mut split.train),
        ("val.csv", &mut split.validation),
        ("test.csv", &mut split.test),
    ] {
        let path = dir.join(name);
        let f = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
        *part = read_samples(f)?;
    }
    let ctr_path = dir.join("ctr.csv");
    if let Ok(body) = fs::read_to_string(&ctr_path) {
        for (row, line) in body.lines().enumerate().skip(1) {
            let (d, c) = line.split_once(',').ok_or_else(|| Error::Format {
                row,
                message: "expected `domain,ctr`".into(),
            })?;
            let parse_err = |field: &str, m: String| Error::Parse {
                row,
                field: field.into(),
                message: m,
            };
            split.ctr.insert(
                d.parse().map_err(|e| parse_err("domain", format!("{e}")))?,
                c.parse().map_err(|e| parse_err("ctr", format!("{e}")))?,
            );
        }
    }
    Ok(split)
}

fn read_samples<R: std::io::Read>(reader: R) -> Result<Vec<WindowedSample>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Format {
        row: 0,
        message: e.to_string(),
    })?;
    if header.iter().collect::<Vec<_>>() != SPLIT_HEADER {
        return Err(Error::Format {
            row: 0,
            message: format!("split header must be `{}`", SPLIT_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Format {
            row,
            message: e.to_string(),
        })?;
        if rec.len() != 5 {
            return Err(Error::Format {
                row,
                message: format!("expected 5 columns, found {}", rec.len()),
            });
        }
        let p = |k: usize, name: &str| -> Result<u64> {
            rec[k].parse().map_err(|e| Error::Parse {
                row,
                field: name.into(),
                message: format!("{e}"),
            })
        };
        let history = if rec[4].is_empty() {
            Vec::new()
        } else {
            rec[4]
                .split('|')
                .map(|pair| {
                    let (item, dom) = pair.split_once(':').ok_or_else(|| Error::Format {
                        row,
                        message: format!("bad history entry `{pair}`"),
                    })?;
                    let bad = |m: String| Error::Parse {
                        row,
                        field: "history".into(),
                        message: m,
                    };
                    Ok((
                        item.parse().map_err(|e| bad(format!("{e}")))?,
                        dom.parse().map_err(|e| bad(format!("{e}")))?,
                    ))
                })
                .collect::<Result<Vec<_>>>()?
        };
        let label = p(3, "label")?;
        if label > 1 {
            return Err(Error::Parse {
                row,
                field: "label".into(),
                message: format!("label must be 0 or 1, got {label}"),
            });
        }
        out.push(WindowedSample {
            user: p(0, "user")?,
            history,
            candidate_item: p(1, "candidate_item")?,
            candidate_domain: p(2, "candidate_domain")? as u32,
            label: label as u8,
            timestamp: row as i64,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(user: u64, n: usize) -> Vec<WindowedSample> {
        (0..n)
            .map(|t| WindowedSample {
                user,
                history: vec![(1, 0), (2, 1)],
                candidate_item: 10 + t as u64,
                candidate_domain: 0,
                label: (t % 2) as u8,
                timestamp: (n - t) as i64,
            })
            .collect()
    }

    #[test]
    fn ten_samples_split_six_two_two() {
        let s = temporal_split(samples(1, 10), CtrTable::new());
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (6, 2, 2));
    }

    #[test]
    fn five_samples_split_three_one_one() {
        let s = temporal_split(samples(1, 5), CtrTable::new());
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (3, 1, 1));
    }

    #[test]
    fn splits_are_time_ordered_per_user() {
        let mut all = samples(1, 13);
        all.extend(samples(2, 7));
        let s = temporal_split(all, CtrTable::new());
        for u in [1, 2] {
            let ts = |v: &[WindowedSample]| v.iter().filter(|x| x.user == u).map(|x| x.timestamp).collect::<Vec<_>>();
            let (tr, va, te) = (ts(&s.train), ts(&s.validation), ts(&s.test));
            assert!(tr.iter().all(|a| va.iter().chain(&te).all(|b| a <= b)));
            assert!(va.iter().all(|a| te.iter().all(|b| a <= b)));
        }
    }

    #[test]
    fn csv_format_is_exact() {
        let mut buf = Vec::new();
        write_split_csv(&mut buf, &samples(3, 1)).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "user,candidate_item,candidate_domain,label,history\n3,10,0,0,1:0|2:1\n"
        );
    }

    #[test]
    fn written_split_reads_back() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = temporal_split(samples(4, 10), [(0, 0.25)].into());
        write_split(dir.path(), &s).unwrap();
        let back = read_split(dir.path()).unwrap();
        for part in [&mut s.train, &mut s.validation, &mut s.test] {
            for (row, x) in part.iter_mut().enumerate() {
                x.timestamp = row as i64 + 1;
            }
        }
        assert_eq!(back, s);
    }
}
