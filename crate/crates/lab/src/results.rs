//! Results CSV rows and the method-by-bucket gap table built from them.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use vrptight_nn::train::BucketGap;

use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub bucket: String,
    pub method: String,
    pub mean_cost: f64,
    pub mean_gap_pct: f64,
    pub instances: usize,
    pub wall_ms: u64,
}

impl ResultRow {
    pub fn from_gap(dataset: &str, method: &str, g: &BucketGap, wall_ms: u64) -> Self {
        ResultRow {
            dataset: dataset.to_string(),
            bucket: g.label.clone(),
            method: method.to_string(),
            mean_cost: g.mean_cost,
            mean_gap_pct: g.mean_gap_pct,
            instances: g.instances,
            wall_ms,
        }
    }
}

pub fn write_rows(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(LabError::from)).collect()
}

/// Rows are methods, columns are buckets in order of first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct GapTable {
    pub buckets: Vec<String>,
    pub rows: Vec<GapTableRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapTableRow {
    pub method: String,
    /// Gap per bucket; `None` where the method has no result.
    pub gaps: Vec<Option<f64>>,
    /// Mean over the buckets the method covers.
    pub average: f64,
    /// Mean out-of-domain gap divided by the in-domain gap.
    pub expansion: Option<f64>,
}

/// Aggregates result rows; repeated (method, bucket) pairs, e.g. from
/// several datasets or seeds, are averaged.
pub fn gap_table(rows: &[ResultRow], in_domain: Option<&str>) -> Result<GapTable> {
    if rows.is_empty() {
        return Err(LabError::Format("no result rows".into()));
    }
    let mut buckets: Vec<String> = Vec::new();
    let mut methods: Vec<String> = Vec::new();
    let mut cells: BTreeMap<(String, String), (f64, usize)> = BTreeMap::new();
    for r in rows {
        if !buckets.contains(&r.bucket) {
            buckets.push(r.bucket.clone());
        }
        if !methods.contains(&r.method) {
            methods.push(r.method.clone());
        }
        let c = cells.entry((r.method.clone(), r.bucket.clone())).or_insert((0.0, 0));
        c.0 += r.mean_gap_pct;
        c.1 += 1;
    }
    if let Some(b) = in_domain {
        if !buckets.iter().any(|x| x == b) {
            return Err(LabError::Usage(format!("in-domain bucket `{b}` not present")));
        }
    }
    let rows = methods
        .into_iter()
        .map(|m| {
            let gaps: Vec<Option<f64>> =
                buckets.iter().map(|b| cells.get(&(m.clone(), b.clone())).map(|(s, k)| s / *k as f64)).collect();
            let present: Vec<f64> = gaps.iter().flatten().copied().collect();
            let average = present.iter().sum::<f64>() / present.len() as f64;
            let expansion = in_domain.and_then(|d| {
                let i = buckets.iter().position(|b| b == d)?;
                let own = gaps[i]?;
                let ood: Vec<f64> = gaps.iter().enumerate().filter(|&(j, _)| j != i).filter_map(|(_, g)| *g).collect();
                (!ood.is_empty()).then(|| ood.iter().sum::<f64>() / ood.len() as f64 / own)
            });
            GapTableRow { method: m, gaps, average, expansion }
        })
        .collect();
    Ok(GapTable { buckets, rows })
}

impl GapTable {
    pub fn to_csv(&self) -> String {
        let with_exp = self.rows.iter().any(|r| r.expansion.is_some());
        let mut out = format!("method,{},avg", self.buckets.join(","));
        if with_exp {
            out.push_str(",expansion");
        }
        out.push('\n');
        let fmt = |v: Option<f64>| v.map_or(String::new(), |g| format!("{g:.4}"));
        for r in &self.rows {
            let cells: Vec<String> = r.gaps.iter().map(|g| fmt(*g)).collect();
            out.push_str(&format!("{},{},{:.4}", r.method, cells.join(","), r.average));
            if with_exp {
                out.push_str(&format!(",{}", fmt(r.expansion)));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: &str, bucket: &str, gap: f64) -> ResultRow {
        ResultRow {
            dataset: "d".into(),
            bucket: bucket.into(),
            method: method.into(),
            mean_cost: 1.0,
            mean_gap_pct: gap,
            instances: 4,
            wall_ms: 0,
        }
    }

    #[test]
    fn average_is_the_bucket_mean() {
        let rows = vec![row("a", "C10", 3.0), row("a", "C50", 1.0), row("a", "C500", 5.0), row("b", "C50", 2.0)];
        let t = gap_table(&rows, Some("C50")).unwrap();
        assert_eq!(t.buckets, ["C10", "C50", "C500"]);
        assert_eq!(t.rows[0].average, 3.0);
        assert_eq!(t.rows[0].expansion, Some(4.0));
        assert_eq!(t.rows[1].gaps, vec![None, Some(2.0), None]);
        assert_eq!(t.rows[1].expansion, None);
        assert!(t.to_csv().starts_with("method,C10,C50,C500,avg,expansion\na,3.0000,1.0000,5.0000,3.0000,4.0000\n"));
    }

    #[test]
    fn repeated_cells_are_averaged() {
        let t = gap_table(&[row("a", "C10", 1.0), row("a", "C10", 2.0)], None).unwrap();
        assert_eq!(t.rows[0].gaps, vec![Some(1.5)]);
        assert!(gap_table(&[row("a", "C10", 1.0)], Some("C50")).is_err());
    }
}
