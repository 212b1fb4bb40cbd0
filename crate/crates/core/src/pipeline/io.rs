//! CSV persistence of sweep series and the `key=value` metadata sidecar.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fss::{col, SeriesTag, SweepSeries};
use crate::hilbert::{Field, Model};

/// Column order of every sweep CSV.
pub const HEADER: [&str; 15] = [
    "model",
    "L",
    "coupling_name",
    "coupling_value",
    "field_name",
    "field",
    col::E0,
    col::E1,
    col::GAP,
    col::MAGNETIZATION,
    col::ENTANGLEMENT,
    col::RDM_11,
    col::RDM_12_RE,
    col::RDM_12_IM,
    "flags",
];

const OBSERVABLES: std::ops::Range<usize> = 6..14;

/// 17 significant digits; round-trips every finite `f64`.
pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

/// Sidecar path of `csv`: same stem, `.meta` extension.
pub fn meta_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta")
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => parse_err(line, format!("{other:?}")),
    }
}

/// Serializes `series` (rows in series order, then grid order).
pub fn write_csv<W: std::io::Write>(out: W, series: &[SweepSeries<f64>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(HEADER).map_err(csv_err)?;
    for s in series {
        let tag = &s.tag;
        let columns: Vec<Option<&[f64]>> = HEADER[OBSERVABLES].iter().map(|c| s.column(c).ok()).collect();
        for (i, &f) in s.field().iter().enumerate() {
            let mut rec = vec![
                tag.model.as_str().to_owned(),
                tag.length.to_string(),
                tag.coupling_name.as_str().to_owned(),
                format_number(tag.coupling_value),
                tag.field_name.as_str().to_owned(),
                format_number(f),
            ];
            rec.extend(columns.iter().map(|c| c.map_or_else(String::new, |v| format_number(v[i]))));
            rec.push(s.flags()[i].clone());
            w.write_record(&rec).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Renders `meta` as sorted `key=value` lines.
pub fn format_meta(meta: &BTreeMap<String, String>) -> Result<String> {
    let mut out = String::new();
    for (k, v) in meta {
        if k.contains(['=', '\n']) || v.contains('\n') {
            return Err(Error::Config(format!("metadata entry `{k}` cannot be written as a key=value line")));
        }
        out.push_str(k);
        out.push('=');
        out.push_str(v);
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_meta(text: &str) -> Result<BTreeMap<String, String>> {
    let mut meta = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| parse_err(i + 1, "metadata line without `=`"))?;
        meta.insert(k.to_owned(), v.to_owned());
    }
    Ok(meta)
}

/// Writes the CSV and its sidecar. The sidecar carries the metadata of the
/// first series (a run shares one metadata set).
pub fn write_series(path: &Path, series: &[SweepSeries<f64>]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut buf = Vec::new();
    write_csv(&mut buf, series)?;
    fs::write(path, buf)?;
    let meta = series.first().map(|s| s.meta.clone()).unwrap_or_default();
    fs::write(meta_path(path), format_meta(&meta)?)?;
    Ok(())
}

fn group_key(tag: &SeriesTag<f64>) -> (Model, usize, Field, u64, Field) {
    (tag.model, tag.length, tag.coupling_name, tag.coupling_value.to_bits(), tag.field_name)
}

struct Pending {
    tag: SeriesTag<f64>,
    field: Vec<f64>,
    columns: Vec<Vec<Option<f64>>>,
    flags: Vec<String>,
    first_line: usize,
}

/// Parses a sweep CSV; rows sharing `(model, L, coupling)` form one series,
/// in order of first appearance. A column is present in a series only if
/// every row of that series has a value for it.
pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<SweepSeries<f64>>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    for name in HEADER {
        if !header.iter().any(|h| h == name) {
            return Err(Error::MissingColumn(name.to_owned()));
        }
    }
    if header.len() != HEADER.len() || header.iter().zip(HEADER).any(|(a, b)| a != b) {
        return Err(parse_err(1, format!("header must be `{}`", HEADER.join(","))));
    }
    let mut groups: Vec<Pending> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .trim()
                .parse::<f64>()
                .map_err(|_| parse_err(line, format!("column `{}`: bad number `{}`", HEADER[i], &rec[i])))
        };
        let named = |i: usize| -> Result<Field> {
            rec[i].parse().map_err(|_| parse_err(line, format!("column `{}`: unknown field `{}`", HEADER[i], &rec[i])))
        };
        let tag = SeriesTag {
            model: rec[0]
                .parse()
                .map_err(|_| parse_err(line, format!("unknown model `{}`", &rec[0])))?,
            length: rec[1]
                .trim()
                .parse()
                .map_err(|_| parse_err(line, format!("column `L`: bad length `{}`", &rec[1])))?,
            coupling_name: named(2)?,
            coupling_value: num(3)?,
            field_name: named(4)?,
        };
        let field = num(5)?;
        let mut obs = Vec::with_capacity(OBSERVABLES.len());
        for i in OBSERVABLES {
            obs.push(if rec[i].trim().is_empty() { None } else { Some(num(i)?) });
        }
        let key = group_key(&tag);
        let g = match groups.iter_mut().position(|g| group_key(&g.tag) == key) {
            Some(k) => &mut groups[k],
            None => {
                groups.push(Pending {
                    tag,
                    field: Vec::new(),
                    columns: vec![Vec::new(); OBSERVABLES.len()],
                    flags: Vec::new(),
                    first_line: line,
                });
                groups.last_mut().expect("just pushed")
            }
        };
        g.field.push(field);
        for (c, v) in g.columns.iter_mut().zip(obs) {
            c.push(v);
        }
        g.flags.push(rec[14].to_owned());
    }
    let mut out = Vec::with_capacity(groups.len());
    for g in groups {
        let mut s = SweepSeries::new(g.tag, g.field).map_err(|e| parse_err(g.first_line, e.to_string()))?;
        for (name, values) in HEADER[OBSERVABLES].iter().zip(g.columns) {
            if values.iter().all(Option::is_some) {
                s.set_column(name, values.into_iter().flatten().collect())?;
            } else if values.iter().any(Option::is_some) {
                return Err(parse_err(g.first_line, format!("column `{name}` is filled only on some rows of a series")));
            }
        }
        s.set_flags(g.flags)?;
        out.push(s);
    }
    Ok(out)
}

/// Reads a sweep CSV and attaches the sidecar metadata, when present, to
/// every series.
pub fn read_series(path: &Path) -> Result<Vec<SweepSeries<f64>>> {
    let mut series = read_csv(fs::File::open(path)?)?;
    let mp = meta_path(path);
    if mp.exists() {
        let meta = parse_meta(&fs::read_to_string(mp)?)?;
        for s in &mut series {
            s.meta = meta.clone();
        }
    }
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tag(l: usize) -> SeriesTag<f64> {
        SeriesTag {
            model: Model::IsingHalf,
            length: l,
            coupling_name: Field::Bz,
            coupling_value: 0.5,
            field_name: Field::Bx,
        }
    }

    const FIXTURE: &str = "\
model,L,coupling_name,coupling_value,field_name,field,E0,E1,gap,magnetization,entanglement,rdm_11,rdm_12_re,rdm_12_im,flags
xxz_spin1,8,Jz,3.8,D,3.0,-20.5,-20.25,0.25,0.75,0.125,,,,
xxz_spin1,8,Jz,3.8,D,3.5,-18,-17,1,0.5,0.25,,,,degenerate
xxz_spin1,8,Jz,3.8,D,4.0,-16,-14.5,1.5,NaN,NaN,,,,failed_no_convergence
";

    #[test]
    fn header_matches_contract() {
        assert_eq!(
            HEADER.join(","),
            "model,L,coupling_name,coupling_value,field_name,field,E0,E1,gap,magnetization,entanglement,rdm_11,rdm_12_re,rdm_12_im,flags"
        );
    }

    #[test]
    fn fixture_parses() {
        let s = read_csv(FIXTURE.as_bytes()).unwrap();
        assert_eq!(s.len(), 1);
        let s = &s[0];
        assert_eq!(s.tag.model, Model::XxzSpin1);
        assert_eq!(s.tag.length, 8);
        assert_eq!(s.tag.coupling_name, Field::Jz);
        assert_eq!(s.tag.coupling_value, 3.8);
        assert_eq!(s.tag.field_name, Field::D);
        assert_eq!(s.field(), &[3.0, 3.5, 4.0]);
        assert_eq!(s.column(col::E0).unwrap(), &[-20.5, -18.0, -16.0]);
        assert_eq!(s.column(col::GAP).unwrap(), &[0.25, 1.0, 1.5]);
        assert!(s.column(col::MAGNETIZATION).unwrap()[2].is_nan());
        assert!(!s.has_column(col::RDM_11));
        assert_eq!(s.flags(), &["", "degenerate", "failed_no_convergence"]);
    }

    #[test]
    fn missing_column_is_named() {
        let text = FIXTURE.replacen(",entanglement", "", 1);
        match read_csv(text.as_bytes()) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "entanglement"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_number_reports_line() {
        let text = FIXTURE.replace("-18,", "-1x8,");
        match read_csv(text.as_bytes()) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("E0"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ragged_row_is_a_parse_error() {
        let text = FIXTURE.replace(",,,,degenerate", ",,degenerate");
        assert!(matches!(read_csv(text.as_bytes()), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn meta_round_trip() {
        let meta: BTreeMap<String, String> = [("solver", "dmrg"), ("dmrg.chi_max", "64"), ("spec.J", "1.0")]
            .into_iter()
            .map(|(a, b)| (a.to_owned(), b.to_owned()))
            .collect();
        assert_eq!(parse_meta(&format_meta(&meta).unwrap()).unwrap(), meta);
        assert!(parse_meta("no equals sign").is_err());
    }

    #[test]
    fn files_round_trip_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("run.csv");
        let mut s = SweepSeries::new(tag(6), vec![-0.1, 0.0, 0.1])
            .unwrap()
            .with_column(col::E0, vec![-1.0 / 3.0, -2.0, f64::NAN])
            .unwrap();
        s.add_flag(2, "failed");
        s.meta.insert("solver".into(), "ed_dense".into());
        write_series(&path, std::slice::from_ref(&s)).unwrap();
        let back = read_series(&path).unwrap();
        assert_eq!(back[0].meta, s.meta);
        assert_eq!(back[0].column(col::E0).unwrap()[0].to_bits(), (-1.0f64 / 3.0).to_bits());
        assert!(back[0].column(col::E0).unwrap()[2].is_nan());
        assert_eq!(back[0].flags(), s.flags());
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![any::<f64>().prop_filter("finite", |v| v.is_finite()), -1e3..1e3f64]
    }

    proptest! {
        #[test]
        fn numeric_columns_round_trip_bit_exactly(
            rows in prop::collection::vec((finite(), finite(), finite(), finite()), 2..8),
            lengths in prop::collection::btree_set(2usize..40, 1..3),
        ) {
            let mut set = Vec::new();
            for &l in &lengths {
                let field: Vec<f64> = (0..rows.len()).map(|i| i as f64 * 0.1 - 0.3).collect();
                let s = SweepSeries::new(tag(l), field).unwrap()
                    .with_column(col::E0, rows.iter().map(|r| r.0).collect()).unwrap()
                    .with_column(col::GAP, rows.iter().map(|r| r.1).collect()).unwrap()
                    .with_column(col::RDM_12_RE, rows.iter().map(|r| r.2).collect()).unwrap()
                    .with_column(col::RDM_12_IM, rows.iter().map(|r| r.3).collect()).unwrap();
                set.push(s);
            }
            let mut buf = Vec::new();
            write_csv(&mut buf, &set).unwrap();
            let back = read_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back.len(), set.len());
            for (a, b) in set.iter().zip(&back) {
                prop_assert_eq!(&a.tag, &b.tag);
                prop_assert_eq!(a.column_names().collect::<Vec<_>>(), b.column_names().collect::<Vec<_>>());
                for name in a.column_names() {
                    let x: Vec<u64> = a.column(name).unwrap().iter().map(|v| v.to_bits()).collect();
                    let y: Vec<u64> = b.column(name).unwrap().iter().map(|v| v.to_bits()).collect();
                    prop_assert_eq!(x, y);
                }
                let fx: Vec<u64> = a.field().iter().map(|v| v.to_bits()).collect();
                let fy: Vec<u64> = b.field().iter().map(|v| v.to_bits()).collect();
                prop_assert_eq!(fx, fy);
            }
        }
    }
}
