use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use super::{DataError, Interaction, InteractionDataset, Result};

/// On-disk interaction log layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    /// `user::item::rating::timestamp`, no header.
    MovielensDat,
    /// Header `user,item,value,timestamp`.
    Csv,
    /// Same as [`Format::Csv`] with tab separators.
    Tsv,
}

impl Format {
    fn separator(self) -> &'static str {
        match self {
            Format::MovielensDat => "::",
            Format::Csv => ",",
            Format::Tsv => "\t",
        }
    }

    fn has_header(self) -> bool {
        !matches!(self, Format::MovielensDat)
    }
}

impl FromStr for Format {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "movielens-dat" | "dat" => Ok(Format::MovielensDat),
            "csv" => Ok(Format::Csv),
            "tsv" => Ok(Format::Tsv),
            other => Err(DataError::InvalidParameter(format!(
                "unknown format `{other}` (expected movielens-dat, csv or tsv)"
            ))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::MovielensDat => "movielens-dat",
            Format::Csv => "csv",
            Format::Tsv => "tsv",
        })
    }
}

const HEADER: [&str; 4] = ["user", "item", "value", "timestamp"];

/// Parses interaction lines from an in-memory string.
pub fn parse_interactions(text: &str, format: Format) -> Result<Vec<Interaction>> {
    let sep = format.separator();
    let mut out = Vec::new();
    let mut header_seen = !format.has_header();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let raw = raw.trim_end_matches('\r');
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(sep).map(str::trim).collect();
        if !header_seen {
            if fields != HEADER {
                return Err(DataError::Parse {
                    line,
                    msg: format!("expected header `{}`", HEADER.join(sep)),
                });
            }
            header_seen = true;
            continue;
        }
        if fields.len() != 4 {
            return Err(DataError::Parse {
                line,
                msg: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let value: f64 = fields[2].parse().map_err(|_| DataError::Parse {
            line,
            msg: format!("bad value `{}`", fields[2]),
        })?;
        if !(value > 0.0) || !value.is_finite() {
            return Err(DataError::Parse {
                line,
                msg: format!("feedback value must be positive, got {value}"),
            });
        }
        let timestamp: i64 = fields[3].parse().map_err(|_| DataError::Parse {
            line,
            msg: format!("bad timestamp `{}`", fields[3]),
        })?;
        if fields[0].is_empty() || fields[1].is_empty() {
            return Err(DataError::Parse {
                line,
                msg: "empty user or item id".into(),
            });
        }
        out.push(Interaction {
            user: fields[0].to_string(),
            item: fields[1].to_string(),
            value,
            timestamp,
        });
    }
    Ok(out)
}

/// Reads an interaction log and builds the deduplicated dataset.
pub fn load_interactions(path: impl AsRef<Path>, format: Format) -> Result<InteractionDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let raw = parse_interactions(&text, format)?;
    InteractionDataset::from_interactions(raw)
}

/// Writes the dataset as CSV/TSV with header, or as movielens-dat lines.
pub fn write_interactions(
    ds: &InteractionDataset,
    path: impl AsRef<Path>,
    format: Format,
) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| DataError::Io {
        path: path.display().to_string(),
        source,
    };
    let sep = format.separator();
    let mut buf = Vec::new();
    if format.has_header() {
        writeln!(buf, "{}", HEADER.join(sep)).map_err(io_err)?;
    }
    for it in ds.interactions() {
        writeln!(
            buf,
            "{}{sep}{}{sep}{}{sep}{}",
            it.user, it.item, it.value, it.timestamp
        )
        .map_err(io_err)?;
    }
    fs::write(path, buf).map_err(io_err)
}

impl InteractionDataset {
    pub fn write(&self, path: impl AsRef<Path>, format: Format) -> Result<()> {
        write_interactions(self, path, format)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn movielens_singleton() {
        let raw = parse_interactions("1::10::5::964982703\n", Format::MovielensDat).unwrap();
        let ds = InteractionDataset::from_interactions(raw).unwrap();
        assert_eq!((ds.n_users(), ds.n_items(), ds.len()), (1, 1, 1));
        assert_eq!(ds.records()[0].timestamp, 964982703);
    }

    #[test]
    fn duplicate_pair_keeps_latest() {
        let raw =
            parse_interactions("1::10::3::100\n1::10::4::200\n", Format::MovielensDat).unwrap();
        let ds = InteractionDataset::from_interactions(raw).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.records()[0].timestamp, 200);
        assert_eq!(ds.records()[0].value, 4.0);
    }

    #[test]
    fn csv_and_tsv_with_header() {
        let csv = "user,item,value,timestamp\na,x,1,5\nb,x,2.5,6\n";
        assert_eq!(parse_interactions(csv, Format::Csv).unwrap().len(), 2);
        let tsv = "user\titem\tvalue\ttimestamp\na\tx\t1\t5\n";
        let parsed = parse_interactions(tsv, Format::Tsv).unwrap();
        assert_eq!(parsed[0].item, "x");
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse_interactions("1::2::3::4\n1::2::x::4\n", Format::MovielensDat).unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 2, .. }), "{err}");
        let err = parse_interactions("1::2::3\n", Format::MovielensDat).unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 1, .. }));
        let err = parse_interactions("u,i,v,t\n", Format::Csv).unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 1, .. }));
    }

    #[test]
    fn empty_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.dat");
        fs::write(&p, "").unwrap();
        assert!(matches!(
            load_interactions(&p, Format::MovielensDat),
            Err(DataError::Empty)
        ));
        let p = dir.path().join("header-only.csv");
        fs::write(&p, "user,item,value,timestamp\n").unwrap();
        assert!(matches!(
            load_interactions(&p, Format::Csv),
            Err(DataError::Empty)
        ));
    }

    #[test]
    fn write_then_load() {
        let raw = parse_interactions("1::10::5::9\n2::11::1::8\n", Format::MovielensDat).unwrap();
        let ds = InteractionDataset::from_interactions(raw).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for fmt in [Format::Csv, Format::Tsv, Format::MovielensDat] {
            let p = dir.path().join(format!("out.{fmt}"));
            ds.write(&p, fmt).unwrap();
            let back = load_interactions(&p, fmt).unwrap();
            assert_eq!(back.records(), ds.records());
        }
    }

    #[test]
    fn format_names() {
        for f in [Format::MovielensDat, Format::Csv, Format::Tsv] {
            assert_eq!(f.to_string().parse::<Format>().unwrap(), f);
        }
        assert!("parquet".parse::<Format>().is_err());
    }
}
