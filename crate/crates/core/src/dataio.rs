//! Reading and writing similarity matrices, bids, subject areas and paper
//! scores.
//!
//! Similarity CSV: a header `reviewer_id,<paper ids...>` then one row per
//! reviewer, `<reviewer id>,<n values in [0, 1]>`. Values are written in
//! shortest round-trip form so save-then-load reproduces every bit.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SimilarityMatrix;

/// Header cell that opens a similarity or bids file.
pub const ID_HEADER: &str = "reviewer_id";

struct Table {
    header: Vec<String>,
    /// `(line, row id, cells)`.
    rows: Vec<(usize, String, Vec<String>)>,
}

fn read_table(reader: impl Read) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(csv_error)?,
        None => return Err(Error::parse(1, 1, "empty file: missing header row")),
    };
    if header.get(0) != Some(ID_HEADER) {
        return Err(Error::parse(
            1,
            1,
            format!("first header cell must be {ID_HEADER:?}, found {:?}", header.get(0).unwrap_or("")),
        ));
    }
    let header: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        let id = rec.get(0).unwrap_or("").to_owned();
        let cells: Vec<String> = rec.iter().skip(1).map(str::to_owned).collect();
        if cells.len() != header.len() {
            return Err(Error::parse(
                line,
                cells.len().min(header.len()) + 2,
                format!(
                    "row {id:?} has {} values but the header lists {} papers",
                    cells.len(),
                    header.len()
                ),
            ));
        }
        rows.push((line, id, cells));
    }
    Ok(Table { header, rows })
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::parse(line, 0, e.to_string())
}

fn parse_cells<T>(table: &Table, mut f: impl FnMut(&str) -> std::result::Result<T, String>) -> Result<Vec<Vec<T>>> {
    table
        .rows
        .iter()
        .map(|(line, _, cells)| {
            cells
                .iter()
                .enumerate()
                .map(|(j, c)| f(c).map_err(|m| Error::parse(*line, j + 2, m)))
                .collect()
        })
        .collect()
}

fn build(table: Table, rows: Vec<Vec<f64>>) -> Result<SimilarityMatrix> {
    let reviewer_ids = table.rows.into_iter().map(|(_, id, _)| id).collect();
    SimilarityMatrix::new(reviewer_ids, table.header, rows)
}

/// Parses a similarity CSV from any reader and validates the result.
pub fn read_similarity_csv(reader: impl Read) -> Result<SimilarityMatrix> {
    let table = read_table(reader)?;
    let rows = parse_cells(&table, |c| {
        if c.is_empty() {
            return Err("missing value".to_owned());
        }
        f64::from_str(c).map_err(|e| format!("invalid number {c:?}: {e}"))
    })?;
    build(table, rows)
}

pub fn load_similarity_csv(path: impl AsRef<Path>) -> Result<SimilarityMatrix> {
    read_similarity_csv(File::open(path)?)
}

pub fn write_similarity_csv(s: &SimilarityMatrix, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.into());
    w.write_record(std::iter::once(ID_HEADER).chain(s.paper_ids().iter().map(String::as_str)))
        .map_err(io)?;
    for (id, row) in s.reviewer_ids().iter().zip(s.rows()) {
        let mut rec = Vec::with_capacity(row.len() + 1);
        rec.push(id.clone());
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_similarity_csv(s: &SimilarityMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_similarity_csv(s, File::create(path)?)
}

/// A reviewer's bid on a paper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bid {
    Yes,
    Maybe,
    NoResponse,
}

impl Bid {
    pub fn similarity(self) -> f64 {
        match self {
            Bid::Yes => 1.0,
            Bid::Maybe => 0.5,
            Bid::NoResponse => 0.25,
        }
    }
}

impl FromStr for Bid {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "yes" => Ok(Bid::Yes),
            "maybe" => Ok(Bid::Maybe),
            "no_response" => Ok(Bid::NoResponse),
            other => Err(format!("unknown bid {other:?} (expected yes, maybe or no_response)")),
        }
    }
}

/// Maps bids elementwise to similarities: yes 1, maybe 0.5, no response 0.25.
pub fn bids_to_similarity(
    reviewer_ids: Vec<String>,
    paper_ids: Vec<String>,
    bids: &[Vec<Bid>],
) -> Result<SimilarityMatrix> {
    let rows = bids
        .iter()
        .map(|row| row.iter().map(|b| b.similarity()).collect())
        .collect();
    SimilarityMatrix::new(reviewer_ids, paper_ids, rows)
}

/// Parses a bids CSV (same layout as the similarity CSV, cells
/// `yes|maybe|no_response`) straight into similarities.
pub fn read_bids_csv(reader: impl Read) -> Result<SimilarityMatrix> {
    let table = read_table(reader)?;
    let bids = parse_cells(&table, Bid::from_str)?;
    let reviewer_ids = table.rows.iter().map(|(_, id, _)| id.clone()).collect();
    bids_to_similarity(reviewer_ids, table.header, &bids)
}

pub fn load_bids_csv(path: impl AsRef<Path>) -> Result<SimilarityMatrix> {
    read_bids_csv(File::open(path)?)
}

/// `S[r][p] = |areas_r ∩ areas_p| / total_areas`.
pub fn subject_overlap_similarity(
    reviewer_areas: &[Vec<usize>],
    paper_areas: &[Vec<usize>],
    total_areas: usize,
) -> Result<SimilarityMatrix> {
    if total_areas == 0 {
        return Err(Error::config("total number of subject areas must be positive"));
    }
    let to_set = |areas: &Vec<usize>| -> Result<HashSet<usize>> {
        match areas.iter().find(|&&a| a >= total_areas) {
            Some(a) => Err(Error::config(format!(
                "subject area {a} out of range for {total_areas} areas"
            ))),
            None => Ok(areas.iter().copied().collect()),
        }
    };
    let rs = reviewer_areas.iter().map(to_set).collect::<Result<Vec<_>>>()?;
    let ps = paper_areas.iter().map(to_set).collect::<Result<Vec<_>>>()?;
    SimilarityMatrix::from_fn(rs.len(), ps.len(), |r, p| {
        rs[r].intersection(&ps[p]).count() as f64 / total_areas as f64
    })
}

/// Reads lines `id,area1;area2;...` (integer areas; an empty list is allowed).
pub fn read_subject_areas(reader: impl Read) -> Result<Vec<(String, Vec<usize>)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() > 2 {
            return Err(Error::parse(line, 3, "expected `id,area;area;...`"));
        }
        let id = rec.get(0).unwrap_or("").to_owned();
        let areas = rec
            .get(1)
            .unwrap_or("")
            .split(';')
            .map(str::trim)
            .filter(|a| !a.is_empty())
            .map(|a| {
                a.parse::<usize>()
                    .map_err(|e| Error::parse(line, 2, format!("invalid area {a:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        out.push((id, areas));
    }
    Ok(out)
}

pub fn load_subject_areas(path: impl AsRef<Path>) -> Result<Vec<(String, Vec<usize>)>> {
    read_subject_areas(File::open(path)?)
}

/// Replaces each reviewer by `copies` reviewers. For paper `p`, copy
/// `p % copies` keeps the original similarity and the other copies get 0.
/// Copy `c` of reviewer `r` becomes row `r * copies + c`, labelled `id#c`.
pub fn split_reviewer_copies(s: &SimilarityMatrix, copies: usize) -> Result<SimilarityMatrix> {
    if copies == 0 {
        return Err(Error::config("copies must be at least 1"));
    }
    if copies == 1 {
        return Ok(s.clone());
    }
    let mut ids = Vec::with_capacity(s.n_reviewers() * copies);
    let mut rows = Vec::with_capacity(s.n_reviewers() * copies);
    for (id, row) in s.reviewer_ids().iter().zip(s.rows()) {
        for c in 0..copies {
            ids.push(format!("{id}#{c}"));
            rows.push(
                row.iter()
                    .enumerate()
                    .map(|(p, &v)| if p % copies == c { v } else { 0.0 })
                    .collect(),
            );
        }
    }
    SimilarityMatrix::new(ids, s.paper_ids().to_vec(), rows)
}

/// Reads `paper_id,score` rows (an optional `paper_id,score` header is
/// skipped) and aligns them to `s`'s paper order.
pub fn read_scores(reader: impl Read, s: &SimilarityMatrix) -> Result<Vec<f64>> {
    let index: HashMap<&str, usize> = s
        .paper_ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut scores: Vec<Option<f64>> = vec![None; s.n_papers()];
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != 2 {
            return Err(Error::parse(line, rec.len().min(2) + 1, "expected `paper_id,score`"));
        }
        let (id, value) = (&rec[0], &rec[1]);
        if k == 0 && id == "paper_id" {
            continue;
        }
        let v: f64 = value
            .parse()
            .map_err(|e| Error::parse(line, 2, format!("invalid score {value:?}: {e}")))?;
        let &i = index
            .get(id)
            .ok_or_else(|| Error::Join(format!("unknown paper id {id:?} on line {line}")))?;
        if scores[i].replace(v).is_some() {
            return Err(Error::Join(format!("duplicate paper id {id:?} on line {line}")));
        }
    }
    let missing: Vec<&str> = scores
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_none())
        .map(|(i, _)| s.paper_ids()[i].as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Join(format!("no score for papers: {}", missing.join(", "))));
    }
    Ok(scores.into_iter().map(Option::unwrap).collect())
}

pub fn load_scores(path: impl AsRef<Path>, s: &SimilarityMatrix) -> Result<Vec<f64>> {
    read_scores(File::open(path)?, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Violation;

    #[test]
    fn reads_small_matrix() {
        let text = "reviewer_id,pa,pb\nr1,0.1,0.2\nr2,1,0\n";
        let s = read_similarity_csv(text.as_bytes()).unwrap();
        assert_eq!(s.reviewer_ids(), &["r1", "r2"]);
        assert_eq!(s.paper_ids(), &["pa", "pb"]);
        assert_eq!(s.to_rows(), vec![vec![0.1, 0.2], vec![1.0, 0.0]]);
    }

    #[test]
    fn out_of_range_entry_is_a_violation() {
        let text = "reviewer_id,pa,pb\nr1,0.1,1.5\n";
        match read_similarity_csv(text.as_bytes()) {
            Err(Error::Validation(v)) => {
                assert_eq!(v, vec![Violation::OutOfRange { reviewer: 0, paper: 1, value: 1.5 }])
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_cell_names_the_row() {
        let text = "reviewer_id,pa,pb\nr1,0.1,0.2\nr2,0.3\n";
        match read_similarity_csv(text.as_bytes()) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("r2"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
        let text = "reviewer_id,pa,pb\nr1,,0.2\n";
        assert!(matches!(
            read_similarity_csv(text.as_bytes()),
            Err(Error::Parse { line: 2, column: 2, .. })
        ));
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let s = SimilarityMatrix::from_fn(3, 4, |r, p| ((r * 7 + p * 3) as f64 / 11.0).sin().abs())
            .unwrap();
        let mut buf = Vec::new();
        write_similarity_csv(&s, &mut buf).unwrap();
        let t = read_similarity_csv(buf.as_slice()).unwrap();
        assert_eq!(s, t);
    }

    #[test]
    fn bid_mapping() {
        let s = bids_to_similarity(vec!["r".into()], vec!["p".into()], &[vec![Bid::Yes]]).unwrap();
        assert_eq!(s.to_rows(), vec![vec![1.0]]);
        let s = read_bids_csv("reviewer_id,a,b\nr,maybe,no_response\n".as_bytes()).unwrap();
        assert_eq!(s.to_rows(), vec![vec![0.5, 0.25]]);
        let e = bids_to_similarity(vec![], vec![], &[]).unwrap();
        assert_eq!((e.n_reviewers(), e.n_papers()), (0, 0));
        assert!(matches!(
            read_bids_csv("reviewer_id,a\nr,perhaps\n".as_bytes()),
            Err(Error::Parse { line: 2, column: 2, .. })
        ));
    }

    #[test]
    fn subject_overlap() {
        let s = subject_overlap_similarity(&[vec![3]], &[vec![3]], 25).unwrap();
        assert_eq!(s.get(0, 0), 0.04);
        let s = subject_overlap_similarity(&[vec![1, 2]], &[vec![3]], 25).unwrap();
        assert_eq!(s.get(0, 0), 0.0);
        let all: Vec<usize> = (0..25).collect();
        let s = subject_overlap_similarity(std::slice::from_ref(&all), std::slice::from_ref(&all), 25).unwrap();
        assert_eq!(s.get(0, 0), 1.0);
        assert!(subject_overlap_similarity(&[vec![25]], &[vec![0]], 25).is_err());
    }

    #[test]
    fn subject_area_file() {
        let v = read_subject_areas("r1,1;4;7\nr2,\n".as_bytes()).unwrap();
        assert_eq!(v, vec![("r1".into(), vec![1, 4, 7]), ("r2".into(), vec![])]);
    }

    #[test]
    fn reviewer_copies() {
        let s = SimilarityMatrix::from_rows(vec![vec![0.4, 0.6]]).unwrap();
        assert_eq!(split_reviewer_copies(&s, 1).unwrap(), s);
        let t = split_reviewer_copies(&s, 2).unwrap();
        assert_eq!(t.to_rows(), vec![vec![0.4, 0.0], vec![0.0, 0.6]]);
        assert_eq!(t.reviewer_ids(), &["r0#0", "r0#1"]);
    }

    #[test]
    fn scores_join() {
        let s = SimilarityMatrix::from_rows(vec![vec![0.1, 0.2]]).unwrap();
        let v = read_scores("paper_id,score\np1,3.5\np0,2\n".as_bytes(), &s).unwrap();
        assert_eq!(v, vec![2.0, 3.5]);
        assert!(matches!(
            read_scores("p0,1\np0,2\np1,3\n".as_bytes(), &s),
            Err(Error::Join(_))
        ));
        match read_scores("p0,1\n".as_bytes(), &s) {
            Err(Error::Join(m)) => assert!(m.contains("p1"), "{m}"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(read_scores("p9,1\n".as_bytes(), &s), Err(Error::Join(_))));
    }
}
