//! Per-update metric records and their CSV form
//! (`step,loss,silhouette,isoscore`, missing metric = empty field).

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 4] = ["step", "loss", "silhouette", "isoscore"];

/// One metric-cadence boundary. `None` marks a metric that could not be
/// computed at that step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub step: u64,
    pub loss: f64,
    pub silhouette: Option<f64>,
    pub isoscore: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    records: Vec<TrajectoryRecord>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: Vec<TrajectoryRecord>) -> Result<Self> {
        let mut t = Self::new();
        for r in records {
            t.push(r)?;
        }
        Ok(t)
    }

    /// Appends a record; steps must be strictly increasing.
    pub fn push(&mut self, record: TrajectoryRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.step <= last.step {
                return Err(Error::InvalidTrajectory(format!(
                    "step {} does not follow step {}",
                    record.step, last.step
                )));
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[TrajectoryRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn first(&self) -> Option<&TrajectoryRecord> {
        self.records.first()
    }

    pub fn last(&self) -> Option<&TrajectoryRecord> {
        self.records.last()
    }

    pub fn silhouettes(&self) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.silhouette).collect()
    }

    pub fn isoscores(&self) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.isoscore).collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        let io = |e: csv::Error| Error::InvalidTrajectory(e.to_string());
        w.write_record(CSV_HEADER).map_err(io)?;
        for r in &self.records {
            w.serialize(r).map_err(io)?;
        }
        w.flush()
            .map_err(|e| Error::InvalidTrajectory(e.to_string()))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = r
            .headers()
            .map_err(|e| Error::InvalidTrajectory(e.to_string()))?
            .clone();
        if header.iter().ne(CSV_HEADER) {
            return Err(Error::InvalidTrajectory(format!(
                "expected header `{}`, found `{}`",
                CSV_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut t = Self::new();
        for (i, row) in r.deserialize::<TrajectoryRecord>().enumerate() {
            let row = row.map_err(|e| Error::Parse {
                line: i + 2,
                message: e.to_string(),
            })?;
            t.push(row)?;
        }
        Ok(t)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(step: u64, s: Option<f64>, i: Option<f64>) -> TrajectoryRecord {
        TrajectoryRecord {
            step,
            loss: 0.5 / step as f64,
            silhouette: s,
            isoscore: i,
        }
    }

    #[test]
    fn steps_must_increase() {
        let mut t = Trajectory::new();
        t.push(rec(1, None, None)).unwrap();
        assert!(t.push(rec(1, None, None)).is_err());
        assert!(t.push(rec(0, None, None)).is_err());
        t.push(rec(3, None, None)).unwrap();
    }

    #[test]
    fn csv_round_trip_with_missing_fields() {
        let t = Trajectory::from_records(vec![
            rec(1, Some(0.1), Some(0.9)),
            rec(2, None, Some(0.1 + 0.2)),
            rec(3, Some(-1e-17), None),
        ])
        .unwrap();
        let text = t.to_csv_string();
        assert!(text.starts_with("step,loss,silhouette,isoscore\n"));
        assert!(text.lines().nth(2).unwrap().contains(",,"));
        let back = Trajectory::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(Trajectory::read_csv("a,b\n1,2\n".as_bytes()).is_err());
        assert!(Trajectory::read_csv("step,loss,silhouette,isoscore\nx,1,,\n".as_bytes()).is_err());
        assert!(
            Trajectory::read_csv("step,loss,silhouette,isoscore\n2,1,,\n1,1,,\n".as_bytes()).is_err()
        );
    }
}
