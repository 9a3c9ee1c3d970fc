//! CSV point sets, marginal-spec files, and text artifacts.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimators::{MarginalSpec, MarginalVar};
use crate::points::PointSet;

/// Reads a numeric CSV with a header row of column names.
pub fn read_points<R: Read>(reader: R) -> Result<PointSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let names: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if names.is_empty() || names.iter().all(String::is_empty) {
        return Err(Error::Parse("line 1: missing header row".into()));
    }
    let d = names.len();
    let mut out = PointSet::new(d);
    let mut row = vec![0.0f64; d];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Parse(format!("line {line}: {e}"))
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != d {
            return Err(Error::Parse(format!(
                "line {line}: expected {d} fields, found {}",
                rec.len()
            )));
        }
        for (j, field) in rec.iter().enumerate() {
            row[j] = field.trim().parse().map_err(|_| {
                Error::Parse(format!(
                    "line {line}: column `{}`: not a number: `{field}`",
                    names[j]
                ))
            })?;
            if !row[j].is_finite() {
                return Err(Error::Parse(format!(
                    "line {line}: column `{}`: non-finite value",
                    names[j]
                )));
            }
        }
        out.push(&row)?;
    }
    out.with_names(names)
}

pub fn read_points_file(path: &Path) -> Result<PointSet> {
    read_points(File::open(path)?)
}

/// Writes a header row (the set's column names) followed by one record per
/// point. Values use the shortest representation that round-trips.
pub fn write_points<W: Write>(writer: W, points: &PointSet) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(points.column_names())?;
    let mut buf: Vec<String> = Vec::with_capacity(points.dim());
    for r in points.rows() {
        buf.clear();
        buf.extend(r.iter().map(|v| v.to_string()));
        w.write_record(&buf)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_points_file(path: &Path, points: &PointSet) -> Result<()> {
    write_points(BufWriter::new(File::create(path)?), points)
}

/// Parses a marginal-spec file with header `variable,lo,hi,freq`.
///
/// Rows of one variable must be consecutive and tile its range: each bin
/// starts where the previous one ended. Variables are matched to the columns
/// of the sample by name.
pub fn read_marginals<R: Read>(reader: R, columns: &[String], total: u64) -> Result<MarginalSpec> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header != ["variable", "lo", "hi", "freq"] {
        return Err(Error::Parse(format!(
            "line 1: expected header `variable,lo,hi,freq`, found `{}`",
            header.join(",")
        )));
    }
    let mut vars: Vec<MarginalVar> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Parse(format!("line {line}: {e}"))
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 4 {
            return Err(Error::Parse(format!(
                "line {line}: expected 4 fields, found {}",
                rec.len()
            )));
        }
        let name = rec[0].trim();
        let num = |i: usize, what: &str| -> Result<f64> {
            rec[i]
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse(format!("line {line}: bad {what} `{}`", &rec[i])))
        };
        let lo = num(1, "lower edge")?;
        let hi = num(2, "upper edge")?;
        let freq: u64 = rec[3]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("line {line}: bad frequency `{}`", &rec[3])))?;
        if !(lo < hi) {
            return Err(Error::BadSpec(format!(
                "line {line}: empty bin [{lo}, {hi}]"
            )));
        }

        match vars.last_mut() {
            Some(v) if v.name == name => {
                let end = *v.edges.last().expect("edges are never empty");
                if lo != end {
                    return Err(Error::BadSpec(format!(
                        "line {line}: bins of `{name}` do not tile: gap or overlap at {end} vs {lo}"
                    )));
                }
                v.edges.push(hi);
                v.freqs.push(freq);
            }
            _ => {
                if vars.iter().any(|v| v.name == name) {
                    return Err(Error::BadSpec(format!(
                        "line {line}: rows of `{name}` are not consecutive"
                    )));
                }
                let column = columns.iter().position(|c| c == name).ok_or_else(|| {
                    Error::BadSpec(format!("line {line}: unknown variable `{name}`"))
                })?;
                vars.push(MarginalVar {
                    name: name.to_string(),
                    column,
                    edges: vec![lo, hi],
                    freqs: vec![freq],
                });
            }
        }
    }
    if vars.is_empty() {
        return Err(Error::BadSpec("marginal spec has no bins".into()));
    }
    MarginalSpec::new(vars, total)
}

pub fn read_marginals_file(path: &Path, columns: &[String], total: u64) -> Result<MarginalSpec> {
    read_marginals(File::open(path)?, columns, total)
}

/// Renders a spec back into the file format.
pub fn write_marginals<W: Write>(mut w: W, spec: &MarginalSpec) -> Result<()> {
    writeln!(w, "variable,lo,hi,freq")?;
    for v in &spec.vars {
        for b in 0..v.bins() {
            writeln!(
                w,
                "{},{},{},{}",
                v.name,
                v.edges[b],
                v.edges[b + 1],
                v.freqs[b]
            )?;
        }
    }
    Ok(())
}

pub fn write_text_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cols(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn points_round_trip() {
        let p = PointSet::from_rows(&[[0.1, -2.0], [1e-300, 3.5e12]])
            .unwrap()
            .with_names(cols(&["a", "b"]))
            .unwrap();
        let mut buf = Vec::new();
        write_points(&mut buf, &p).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("a,b\n0.1,-2\n"));
        let q = read_points(&buf[..]).unwrap();
        assert_eq!(q, p);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let e = read_points("x,y\n1,2\n3,oops\n".as_bytes()).unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        let e = read_points("x,y\n1,2\n3\n".as_bytes()).unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        let e = read_points("x,y\n1,2\nNaN,1\n".as_bytes()).unwrap_err();
        assert!(matches!(e, Error::Parse(_)));
    }

    #[test]
    fn header_only_is_empty() {
        let p = read_points("x,y,z\n".as_bytes()).unwrap();
        assert!(p.is_empty());
        assert_eq!(p.dim(), 3);
    }

    const SPEC: &str = "variable,lo,hi,freq\nage,0,10,3\nage,10,20,7\nincome,0,1,4\nincome,1,5,6\n";

    #[test]
    fn marginals_parse_and_render() {
        let s = read_marginals(SPEC.as_bytes(), &cols(&["income", "age"]), 10).unwrap();
        assert_eq!(s.vars.len(), 2);
        assert_eq!(s.vars[0].column, 1);
        assert_eq!(s.vars[0].edges, vec![0.0, 10.0, 20.0]);
        assert_eq!(s.vars[1].freqs, vec![4, 6]);
        let mut out = Vec::new();
        write_marginals(&mut out, &s).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), SPEC);
    }

    #[test]
    fn marginals_reject_bad_files() {
        let c = cols(&["age", "income"]);
        assert!(matches!(
            read_marginals(SPEC.as_bytes(), &c, 11),
            Err(Error::InconsistentMarginals { .. })
        ));
        let gap = "variable,lo,hi,freq\nage,0,10,3\nage,11,20,7\n";
        assert!(matches!(
            read_marginals(gap.as_bytes(), &c, 10),
            Err(Error::BadSpec(_))
        ));
        let split = "variable,lo,hi,freq\nage,0,10,3\nincome,0,1,10\nage,10,20,7\n";
        assert!(matches!(
            read_marginals(split.as_bytes(), &c, 10),
            Err(Error::BadSpec(_))
        ));
        let unknown = "variable,lo,hi,freq\nheight,0,10,10\n";
        assert!(matches!(
            read_marginals(unknown.as_bytes(), &c, 10),
            Err(Error::BadSpec(_))
        ));
        let header = "var,lo,hi,freq\nage,0,10,10\n";
        assert!(matches!(
            read_marginals(header.as_bytes(), &c, 10),
            Err(Error::Parse(_))
        ));
        let neg = "variable,lo,hi,freq\nage,0,10,-1\n";
        let e = read_marginals(neg.as_bytes(), &c, 10).unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
    }
}
