//! Location x time-bucket grids, correlation against external series, and
//! ranked term frequencies.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Display;
use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Label, LocationCode, Record};
use crate::textprep::TokenSeq;

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("correlation needs at least 3 points, got {0}")]
    TooShort(usize),
    #[error("correlation is undefined for a constant series")]
    UndefinedCorrelation,
    #[error("external series line {line}: {reason}")]
    BadSeries { line: usize, reason: String },
    #[error("external series: {0}")]
    Io(#[from] io::Error),
    #[error("external series: {0}")]
    Csv(#[from] csv::Error),
}

/// Rows are the 18 location codes in [`LocationCode::ALL`] order, columns
/// are bucket indices `0..cols`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    cols: usize,
    cells: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(cols: usize, value: T) -> Self {
        Self {
            cols,
            cells: vec![value; LocationCode::ALL.len() * cols],
        }
    }
}

impl<T> Grid<T> {
    pub fn rows(&self) -> usize {
        LocationCode::ALL.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, loc: LocationCode, col: usize) -> &T {
        &self.cells[loc.index() * self.cols + col]
    }

    pub fn get_mut(&mut self, loc: LocationCode, col: usize) -> &mut T {
        &mut self.cells[loc.index() * self.cols + col]
    }

    pub fn row(&self, loc: LocationCode) -> &[T] {
        let start = loc.index() * self.cols;
        &self.cells[start..start + self.cols]
    }

    pub fn cells(&self) -> &[T] {
        &self.cells
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> Grid<U> {
        Grid {
            cols: self.cols,
            cells: self.cells.iter().map(f).collect(),
        }
    }

    fn write_rows<W: Write>(
        &self,
        out: &mut W,
        cell: impl Fn(&T) -> String,
        row_tail: impl Fn(LocationCode) -> Option<String>,
    ) -> io::Result<()> {
        for loc in LocationCode::ALL {
            write!(out, "{loc}")?;
            for v in self.row(loc) {
                write!(out, ",{}", cell(v))?;
            }
            if let Some(tail) = row_tail(loc) {
                write!(out, ",{tail}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn header<W: Write>(out: &mut W, cols: usize, total: bool) -> io::Result<()> {
    write!(out, "location")?;
    for c in 0..cols {
        write!(out, ",w{c}")?;
    }
    if total {
        write!(out, ",total")?;
    }
    writeln!(out)
}

impl Grid<u64> {
    pub fn total(&self) -> u64 {
        self.cells.iter().sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        LocationCode::ALL
            .iter()
            .map(|&l| self.row(l).iter().sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.cols)
            .map(|c| LocationCode::ALL.iter().map(|&l| *self.get(l, c)).sum())
            .collect()
    }

    /// Location rows, week columns, plus a `total` column and a `total` row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        header(&mut out, self.cols, true)?;
        let sums = self.row_sums();
        self.write_rows(&mut out, u64::to_string, |l| Some(sums[l.index()].to_string()))?;
        write!(out, "total")?;
        for s in self.col_sums() {
            write!(out, ",{s}")?;
        }
        writeln!(out, ",{}", self.total())
    }
}

impl<T: Display> Grid<Option<T>> {
    /// Nulls are written as empty fields.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        header(&mut out, self.cols, false)?;
        self.write_rows(
            &mut out,
            |v| v.as_ref().map(ToString::to_string).unwrap_or_default(),
            |_| None,
        )
    }
}

/// Record count per (location, bucket).
pub fn volume_grid(corpus: &Corpus) -> Grid<u64> {
    let mut grid = Grid::filled(corpus.bucket_count(), 0u64);
    for r in corpus.records() {
        *grid.get_mut(r.location, r.bucket.index as usize) += 1;
    }
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentGrids {
    pub positive: Grid<u64>,
    pub total: Grid<u64>,
    /// positive / total, `None` where a cell is empty.
    pub ratio: Grid<Option<f64>>,
}

impl SentimentGrids {
    /// Positive-vs-total ratio per bucket, all locations pooled.
    pub fn ratio_by_bucket(&self) -> Vec<Option<f64>> {
        ratios(&self.positive.col_sums(), &self.total.col_sums())
    }

    pub fn ratio_by_location(&self) -> Vec<Option<f64>> {
        ratios(&self.positive.row_sums(), &self.total.row_sums())
    }
}

fn ratios(pos: &[u64], tot: &[u64]) -> Vec<Option<f64>> {
    pos.iter()
        .zip(tot)
        .map(|(&p, &t)| (t > 0).then(|| p as f64 / t as f64))
        .collect()
}

/// Aggregates per-record sentiment decisions into count and ratio grids.
pub fn sentiment_grid(corpus: &Corpus, mut classify: impl FnMut(&Record) -> Label) -> SentimentGrids {
    let cols = corpus.bucket_count();
    let mut positive = Grid::filled(cols, 0u64);
    let mut total = Grid::filled(cols, 0u64);
    for r in corpus.records() {
        let col = r.bucket.index as usize;
        *total.get_mut(r.location, col) += 1;
        if classify(r).is_positive() {
            *positive.get_mut(r.location, col) += 1;
        }
    }
    let ratio = Grid {
        cols,
        cells: ratios(&positive.cells, &total.cells),
    };
    SentimentGrids {
        positive,
        total,
        ratio,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationMethod {
    Pearson,
    Spearman,
}

pub fn correlate(a: &[f64], b: &[f64], method: CorrelationMethod) -> Result<f64, AnalyticsError> {
    if a.len() != b.len() {
        return Err(AnalyticsError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 3 {
        return Err(AnalyticsError::TooShort(a.len()));
    }
    match method {
        CorrelationMethod::Pearson => pearson(a, b),
        CorrelationMethod::Spearman => pearson(&average_ranks(a), &average_ranks(b)),
    }
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64, AnalyticsError> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(AnalyticsError::UndefinedCorrelation);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks, ties sharing the mean of the positions they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Values keyed by bucket index, loaded from a `week,value` CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalSeries {
    pub label: String,
    pub values: Vec<Option<f64>>,
}

impl ExternalSeries {
    pub fn load(path: &Path, label: &str) -> Result<Self, AnalyticsError> {
        Self::parse(File::open(path)?, label)
    }

    pub fn parse<R: Read>(reader: R, label: &str) -> Result<Self, AnalyticsError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let mut values: Vec<Option<f64>> = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let row = row?;
            let line = i + 2;
            let bad = |reason: String| AnalyticsError::BadSeries { line, reason };
            let week: usize = row
                .get(0)
                .ok_or_else(|| bad("missing week".into()))?
                .trim()
                .parse()
                .map_err(|e| bad(format!("week: {e}")))?;
            let value: f64 = row
                .get(1)
                .ok_or_else(|| bad("missing value".into()))?
                .trim()
                .parse()
                .map_err(|e| bad(format!("value: {e}")))?;
            if values.len() <= week {
                values.resize(week + 1, None);
            }
            values[week] = Some(value);
        }
        Ok(Self {
            label: label.to_string(),
            values,
        })
    }

    /// Pairs this series with `counts` on identical bucket indices,
    /// skipping buckets the series does not cover.
    pub fn aligned_with(&self, counts: &[f64]) -> (Vec<f64>, Vec<f64>) {
        counts
            .iter()
            .enumerate()
            .filter_map(|(i, &c)| self.values.get(i).copied().flatten().map(|v| (c, v)))
            .unzip()
    }
}

/// Most frequent terms, excluding `exclude`, ties broken lexicographically.
pub fn term_cloud(docs: &[TokenSeq], exclude: &BTreeSet<String>, k: usize) -> Vec<(String, u64)> {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for d in docs {
        for t in d.iter() {
            if !exclude.contains(t) {
                *counts.entry(t).or_default() += 1;
            }
        }
    }
    let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked
        .into_iter()
        .take(k)
        .map(|(t, c)| (t.to_string(), c))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{default_epoch, BucketId, Granularity};
    use chrono::{TimeZone, Utc};

    fn record(id: usize, loc: LocationCode, week: u32, label: Label) -> Record {
        Record {
            id: id.to_string(),
            text: "x".into(),
            raw_location: None,
            lang: None,
            timestamp: Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap(),
            label: Some(label),
            location: loc,
            bucket: BucketId { index: week, granularity: Granularity::Week },
        }
    }

    fn corpus(records: Vec<Record>) -> Corpus {
        Corpus::new(default_epoch(), Granularity::Week, records)
    }

    #[test]
    fn volume_single_cell() {
        let c = corpus((0..3).map(|i| record(i, LocationCode::Syd, 0, Label::Positive)).collect());
        let g = volume_grid(&c);
        assert_eq!(g.cols(), 1);
        assert_eq!(*g.get(LocationCode::Syd, 0), 3);
        assert_eq!(g.total(), 3);
        assert_eq!(g.cells().iter().filter(|&&v| v > 0).count(), 1);
    }

    #[test]
    fn volume_empty_corpus() {
        let g = volume_grid(&corpus(vec![]));
        assert_eq!(g.total(), 0);
        assert!(g.cells().iter().all(|&v| v == 0));
    }

    #[test]
    fn count_csv_has_marginals() {
        let c = corpus(vec![
            record(0, LocationCode::Au, 0, Label::Positive),
            record(1, LocationCode::Au, 1, Label::Positive),
            record(2, LocationCode::Oth, 1, Label::Positive),
        ]);
        let mut out = Vec::new();
        volume_grid(&c).write_csv(&mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "location,w0,w1,total");
        assert_eq!(lines[1], "au,1,1,2");
        assert_eq!(lines[18], "oth,0,1,1");
        assert_eq!(lines[19], "total,1,2,3");
    }

    #[test]
    fn sentiment_ratios() {
        let c = corpus(vec![
            record(0, LocationCode::Mel, 0, Label::Positive),
            record(1, LocationCode::Mel, 0, Label::Positive),
            record(2, LocationCode::Mel, 1, Label::Positive),
            record(3, LocationCode::Mel, 1, Label::Negative),
            record(4, LocationCode::Mel, 1, Label::Negative),
            record(5, LocationCode::Mel, 1, Label::Positive),
        ]);
        // stub classifier: trust the gold label
        let g = sentiment_grid(&c, |r| r.label.unwrap());
        assert_eq!(*g.ratio.get(LocationCode::Mel, 0), Some(1.0));
        assert_eq!(*g.ratio.get(LocationCode::Mel, 1), Some(0.5));
        assert_eq!(*g.ratio.get(LocationCode::Syd, 0), None);
        assert_eq!(g.ratio_by_bucket(), vec![Some(1.0), Some(0.5)]);
        for (p, t) in g.positive.cells().iter().zip(g.total.cells()) {
            assert!(p <= t);
        }
        let mut out = Vec::new();
        g.ratio.write_csv(&mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().contains("\nmel,1,0.5\n"));
    }

    #[test]
    fn correlation_cases() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        assert!((correlate(&a, &a, CorrelationMethod::Pearson).unwrap() - 1.0).abs() < 1e-12);
        assert!((correlate(&a, &neg, CorrelationMethod::Pearson).unwrap() + 1.0).abs() < 1e-12);
        let s = correlate(&a, &[1.0, 3.0, 2.0, 4.0], CorrelationMethod::Spearman).unwrap();
        assert!((s - 0.8).abs() < 1e-12);
        assert!(matches!(
            correlate(&a, &[2.0; 4], CorrelationMethod::Pearson),
            Err(AnalyticsError::UndefinedCorrelation)
        ));
        assert!(matches!(
            correlate(&a[..2], &a[..2], CorrelationMethod::Pearson),
            Err(AnalyticsError::TooShort(2))
        ));
        assert!(matches!(
            correlate(&a, &a[..3], CorrelationMethod::Pearson),
            Err(AnalyticsError::LengthMismatch(4, 3))
        ));
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
    }

    #[test]
    fn external_series_alignment() {
        let s = ExternalSeries::parse("week,value\n0,5\n2,7\n".as_bytes(), "cases").unwrap();
        assert_eq!(s.values, vec![Some(5.0), None, Some(7.0)]);
        let (a, b) = s.aligned_with(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(a, vec![1.0, 3.0]);
        assert_eq!(b, vec![5.0, 7.0]);
        assert!(ExternalSeries::parse("week,value\nx,1\n".as_bytes(), "c").is_err());
    }

    #[test]
    fn term_cloud_ranking() {
        let docs: Vec<TokenSeq> = vec![
            ["b", "a", "covid", "a"].iter().copied().collect(),
            ["c", "b", "covid"].iter().copied().collect(),
        ];
        let ex: BTreeSet<String> = ["covid".to_string()].into();
        assert!(term_cloud(&docs, &ex, 0).is_empty());
        assert_eq!(
            term_cloud(&docs, &ex, 10),
            vec![("a".to_string(), 2), ("b".to_string(), 2), ("c".to_string(), 1)]
        );
        let one: Vec<TokenSeq> = vec![["z", "z", "z"].iter().copied().collect()];
        assert_eq!(term_cloud(&one, &BTreeSet::new(), 3), vec![("z".to_string(), 3)]);
    }
}
