//! CSV and JSON formats.
//!
//! * Distributions: header row of element ids, one distribution per row. An
//!   optional named column holds ensemble weights.
//! * Square matrices: header row `id,e1,...,en`; each row starts with its
//!   element id, which must match the header in order.
//! * Abundances: header `plot,s1,...,sn`; one row of nonnegative counts per plot.
//! * Hierarchies: CSV `element,code1,...,codeL` plus a JSON object mapping
//!   each level `"0".."L"` to its similarity.
//!
//! Floats are written with 17 significant digits, so values round-trip exactly.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::similarity::{DistanceMatrix, Hierarchy, SimilarityMatrix};
use crate::simplex::{floor_to_interior, validate_distribution, Distribution, DEFAULT_SIMPLEX_TOLERANCE};

pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str, row: usize, col: usize) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("row {row}, column {col}: cannot parse {s:?} as a number")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("row {row}, column {col}: non-finite value {s:?}")));
    }
    Ok(v)
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(r)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Distributions read from CSV, with their element ids.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionTable {
    pub elements: Vec<String>,
    pub distributions: Vec<Distribution>,
    pub weights: Option<Vec<f64>>,
}

pub fn read_distributions_csv<R: Read>(r: R, weights_column: Option<&str>) -> Result<DistributionTable> {
    let mut rdr = reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let wcol = match weights_column {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Parse(format!("weights column {name:?} not in header")))?,
        ),
        None => None,
    };
    let elements: Vec<String> =
        header.iter().enumerate().filter(|(j, _)| Some(*j) != wcol).map(|(_, h)| h.clone()).collect();
    if elements.is_empty() {
        return Err(Error::EmptyDimension);
    }
    let mut distributions = Vec::new();
    let mut weights = wcol.map(|_| Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        if rec.len() != header.len() {
            return Err(Error::Parse(format!("row {row}: expected {} fields, found {}", header.len(), rec.len())));
        }
        let mut p = Vec::with_capacity(elements.len());
        for (j, field) in rec.iter().enumerate() {
            let v = parse_f64(field, row, j)?;
            if Some(j) == wcol {
                weights.as_mut().unwrap().push(v);
            } else {
                p.push(v);
            }
        }
        let d = validate_distribution(&p, DEFAULT_SIMPLEX_TOLERANCE)
            .map_err(|e| Error::Parse(format!("row {row}: {e}")))?;
        distributions.push(d);
    }
    if distributions.is_empty() {
        return Err(Error::Empty("distribution file has no rows"));
    }
    Ok(DistributionTable { elements, distributions, weights })
}

pub fn read_distributions_file(path: &Path, weights_column: Option<&str>) -> Result<DistributionTable> {
    read_distributions_csv(open(path)?, weights_column)
}

pub fn write_distributions_csv<W: Write>(w: W, elements: &[String], rows: &[Distribution]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(elements)?;
    for p in rows {
        if p.dim() != elements.len() {
            return Err(Error::DimensionMismatch { expected: elements.len(), got: p.dim() });
        }
        wtr.write_record(p.iter().map(|&v| format_f64(v)))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn distributions_to_json(rows: &[Distribution]) -> Result<String> {
    Ok(serde_json::to_string(rows)?)
}

pub fn distributions_from_json(s: &str) -> Result<Vec<Distribution>> {
    Ok(serde_json::from_str(s)?)
}

/// A square matrix with element ids on both axes.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix {
    pub labels: Vec<String>,
    pub values: DMatrix<f64>,
}

pub fn read_square_csv<R: Read>(r: R) -> Result<LabeledMatrix> {
    let mut rdr = reader(r);
    let labels: Vec<String> = rdr.headers()?.iter().skip(1).map(str::to_owned).collect();
    let n = labels.len();
    if n == 0 {
        return Err(Error::EmptyDimension);
    }
    let mut values = DMatrix::zeros(n, n);
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if i >= n {
            return Err(Error::Parse(format!("more than {n} rows for a {n}-column matrix")));
        }
        if rec.len() != n + 1 {
            return Err(Error::Parse(format!("row {}: expected {} fields, found {}", i + 1, n + 1, rec.len())));
        }
        if rec[0] != labels[i] {
            return Err(Error::Parse(format!(
                "row {}: id {:?} does not match header id {:?}",
                i + 1,
                &rec[0],
                labels[i]
            )));
        }
        for j in 0..n {
            values[(i, j)] = parse_f64(&rec[j + 1], i + 1, j + 1)?;
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::NotSquare { rows, cols: n });
    }
    Ok(LabeledMatrix { labels, values })
}

pub fn write_square_csv<W: Write>(w: W, labels: &[String], m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    if labels.len() != m.nrows() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), got: labels.len() });
    }
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(std::iter::once("id").chain(labels.iter().map(String::as_str)))?;
    for (i, label) in labels.iter().enumerate() {
        let mut rec = vec![label.clone()];
        rec.extend((0..m.ncols()).map(|j| format_f64(m[(i, j)])));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Default ids `e0, e1, ...`.
pub fn default_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("e{i}")).collect()
}

/// Plot-by-species counts.
#[derive(Debug, Clone, PartialEq)]
pub struct AbundanceTable {
    pub plots: Vec<String>,
    pub species: Vec<String>,
    pub counts: DMatrix<f64>,
}

impl AbundanceTable {
    /// Normalizes each plot and floors it to the interior.
    pub fn to_distributions(&self, floor: f64) -> Result<Vec<Distribution>> {
        (0..self.counts.nrows())
            .map(|i| {
                let row: Vec<f64> = self.counts.row(i).iter().copied().collect();
                let p = Distribution::from_counts(&row)
                    .map_err(|e| Error::Parse(format!("plot {:?}: {e}", self.plots[i])))?;
                floor_to_interior(&p, floor)
            })
            .collect()
    }
}

pub fn read_abundance_csv<R: Read>(r: R) -> Result<AbundanceTable> {
    let mut rdr = reader(r);
    let species: Vec<String> = rdr.headers()?.iter().skip(1).map(str::to_owned).collect();
    if species.is_empty() {
        return Err(Error::EmptyDimension);
    }
    let mut plots = Vec::new();
    let mut data = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        if rec.len() != species.len() + 1 {
            return Err(Error::Parse(format!("row {row}: expected {} fields, found {}", species.len() + 1, rec.len())));
        }
        plots.push(rec[0].to_owned());
        for j in 1..rec.len() {
            let v = parse_f64(&rec[j], row, j)?;
            if v < 0.0 {
                return Err(Error::Parse(format!("row {row}, column {j}: negative abundance {v}")));
            }
            data.push(v);
        }
    }
    if plots.is_empty() {
        return Err(Error::Empty("abundance file has no rows"));
    }
    let counts = DMatrix::from_row_slice(plots.len(), species.len(), &data);
    Ok(AbundanceTable { plots, species, counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixKind {
    Distance,
    Similarity,
    Abundance,
}

#[derive(Debug, Clone)]
pub enum TypedMatrix {
    Distance { labels: Vec<String>, matrix: DistanceMatrix },
    Similarity { labels: Vec<String>, matrix: SimilarityMatrix },
    Abundance(AbundanceTable),
}

pub fn read_matrix<R: Read>(r: R, kind: MatrixKind) -> Result<TypedMatrix> {
    Ok(match kind {
        MatrixKind::Abundance => TypedMatrix::Abundance(read_abundance_csv(r)?),
        MatrixKind::Distance => {
            let m = read_square_csv(r)?;
            TypedMatrix::Distance { matrix: DistanceMatrix::new(m.values)?, labels: m.labels }
        }
        MatrixKind::Similarity => {
            let m = read_square_csv(r)?;
            TypedMatrix::Similarity { matrix: SimilarityMatrix::new(m.values)?, labels: m.labels }
        }
    })
}

pub fn read_matrix_csv(path: &Path, kind: MatrixKind) -> Result<TypedMatrix> {
    read_matrix(open(path)?, kind)
}

pub fn read_similarity_file(path: &Path) -> Result<(Vec<String>, SimilarityMatrix)> {
    match read_matrix_csv(path, MatrixKind::Similarity)? {
        TypedMatrix::Similarity { labels, matrix } => Ok((labels, matrix)),
        _ => unreachable!(),
    }
}

pub fn read_distance_file(path: &Path) -> Result<(Vec<String>, DistanceMatrix)> {
    match read_matrix_csv(path, MatrixKind::Distance)? {
        TypedMatrix::Distance { labels, matrix } => Ok((labels, matrix)),
        _ => unreachable!(),
    }
}

/// Reads per-element code paths and a level-to-similarity JSON map.
pub fn read_hierarchy<R: Read>(paths_csv: R, levels_json: &str) -> Result<(Vec<String>, Hierarchy)> {
    let mut rdr =
        csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(paths_csv);
    let width = rdr.headers()?.len();
    if width < 2 {
        return Err(Error::Parse("hierarchy CSV needs an element column and at least one code column".into()));
    }
    let mut elements = Vec::new();
    let mut paths = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != width {
            return Err(Error::Parse(format!("row {}: expected {width} fields, found {}", i + 1, rec.len())));
        }
        elements.push(rec[0].to_owned());
        paths.push(rec.iter().skip(1).map(str::to_owned).collect());
    }
    let map: BTreeMap<String, f64> = serde_json::from_str(levels_json)?;
    let mut levels = vec![f64::NAN; map.len()];
    for (k, v) in &map {
        let idx: usize = k.parse().map_err(|_| Error::Parse(format!("level key {k:?} is not an integer")))?;
        if idx >= levels.len() {
            return Err(Error::Parse(format!("levels must be numbered 0..{}; found {idx}", levels.len() - 1)));
        }
        levels[idx] = *v;
    }
    Ok((elements, Hierarchy::new(paths, levels)?))
}

pub fn read_hierarchy_files(paths_csv: &Path, levels_json: &Path) -> Result<(Vec<String>, Hierarchy)> {
    let json =
        std::fs::read_to_string(levels_json).map_err(|e| Error::Io(format!("{}: {e}", levels_json.display())))?;
    read_hierarchy(open(paths_csv)?, &json)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distributions_round_trip_bit_exact() {
        let rows = vec![
            Distribution::new(vec![0.1, 0.2, 0.7]).unwrap(),
            Distribution::new(vec![1.0 / 3.0, 1.0 / 3.0, 1.0 - 2.0 / 3.0]).unwrap(),
        ];
        let ids = default_labels(3);
        let mut buf = Vec::new();
        write_distributions_csv(&mut buf, &ids, &rows).unwrap();
        let t = read_distributions_csv(buf.as_slice(), None).unwrap();
        assert_eq!(t.elements, ids);
        for (a, b) in t.distributions.iter().zip(&rows) {
            assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        let json = distributions_to_json(&rows).unwrap();
        assert_eq!(distributions_from_json(&json).unwrap(), rows);
    }

    #[test]
    fn weights_column() {
        let csv = "a,b,w\n0.5,0.5,2\n1,0,1\n";
        let t = read_distributions_csv(csv.as_bytes(), Some("w")).unwrap();
        assert_eq!(t.elements, vec!["a", "b"]);
        assert_eq!(t.weights, Some(vec![2.0, 1.0]));
        assert!(read_distributions_csv(csv.as_bytes(), Some("x")).is_err());
    }

    #[test]
    fn off_simplex_row_named() {
        let err = read_distributions_csv("a,b\n0.5,0.5\n0.5,0.6\n".as_bytes(), None).unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
    }

    #[test]
    fn identity_similarity_valid() {
        let csv = "id,a,b\na,1,0\nb,0,1\n";
        let TypedMatrix::Similarity { labels, matrix } = read_matrix(csv.as_bytes(), MatrixKind::Similarity).unwrap()
        else {
            panic!()
        };
        assert_eq!(labels, vec!["a", "b"]);
        assert_eq!(matrix.get(0, 1), 0.0);
    }

    #[test]
    fn asymmetric_similarity_names_pair() {
        let csv = "id,a,b,c\na,1,0.2,0\nb,0.3,1,0\nc,0,0,1\n";
        let err = read_matrix(csv.as_bytes(), MatrixKind::Similarity).unwrap_err();
        assert!(
            matches!(err, Error::NotSymmetric { i: 0, j: 1, .. } | Error::NotSymmetric { i: 1, j: 0, .. }),
            "{err:?}"
        );
    }

    #[test]
    fn malformed_square_files() {
        assert!(read_square_csv("id,a,b\na,1,0\n".as_bytes()).is_err());
        assert!(read_square_csv("id,a,b\na,1,0\nc,0,1\n".as_bytes()).is_err());
        assert!(read_square_csv("id,a,b\na,1\nb,0,1\n".as_bytes()).is_err());
        let err = read_square_csv("id,a,b\na,1,x\nb,0,1\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("row 1, column 2"), "{err}");
    }

    #[test]
    fn matrix_round_trip_bit_exact() {
        let m = DMatrix::from_fn(4, 4, |i, j| if i == j { 0.0 } else { ((i + j) as f64).sqrt() / 7.0 });
        let ids = default_labels(4);
        let mut buf = Vec::new();
        write_square_csv(&mut buf, &ids, &m).unwrap();
        let back = read_square_csv(buf.as_slice()).unwrap();
        assert_eq!(back.values, m);
        assert_eq!(back.labels, ids);
    }

    #[test]
    fn abundance_table() {
        let csv = "plot,s1,s2,s3\np1,3,0,1\np2,0,0,5\n";
        let t = read_abundance_csv(csv.as_bytes()).unwrap();
        assert_eq!(t.counts.shape(), (2, 3));
        let ps = t.to_distributions(1e-10).unwrap();
        assert!(ps.iter().all(|p| p.is_interior()));
        assert!((ps[0][0] - 0.75).abs() < 1e-9);
        assert!(read_abundance_csv("plot,s1\np1,-1\n".as_bytes()).is_err());
    }

    #[test]
    fn hierarchy_files() {
        let csv = "element,genus,species\nx,g1,a\ny,g1,b\nz,g2,c\n";
        let (ids, h) = read_hierarchy(csv.as_bytes(), r#"{"0": 0.0, "1": 0.5, "2": 1.0}"#).unwrap();
        assert_eq!(ids.len(), 3);
        assert_eq!(h.level_similarity(), &[0.0, 0.5, 1.0]);
        assert!(read_hierarchy(csv.as_bytes(), r#"{"0": 0.0, "2": 1.0}"#).is_err());
    }
}
