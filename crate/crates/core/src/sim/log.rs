//! Trajectory log CSV: `t,p_dem,x_1..x_m,soc,spa,batt_kw,c_b,c_f,c_h,c_e,reward,overridden_mask`.
//!
//! `overridden_mask` holds one `0`/`1` character per cluster, cluster 1 first.

use std::path::Path;

use super::{SimError, StepRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t_s: f64,
    pub p_dem_kw: f64,
    pub x: Vec<f64>,
    pub soc: f64,
    pub spa: bool,
    pub batt_kw: f64,
    pub c_b: f64,
    pub c_f: f64,
    pub c_h: f64,
    pub c_e: f64,
    pub reward: f64,
    pub overridden: Vec<bool>,
}

impl From<&StepRecord> for LogRow {
    fn from(r: &StepRecord) -> Self {
        Self {
            t_s: r.t_s,
            p_dem_kw: r.p_dem_kw,
            x: r.x.clone(),
            soc: r.soc,
            spa: r.spa,
            batt_kw: r.flow.batt_kw(),
            c_b: r.cost.c_b,
            c_f: r.cost.c_f,
            c_h: r.cost.c_h,
            c_e: r.cost.c_e,
            reward: r.reward,
            overridden: r.overridden.clone(),
        }
    }
}

fn header(m: usize) -> Vec<String> {
    let mut h = vec!["t".to_string(), "p_dem".to_string()];
    h.extend((1..=m).map(|k| format!("x_{k}")));
    h.extend(
        ["soc", "spa", "batt_kw", "c_b", "c_f", "c_h", "c_e", "reward", "overridden_mask"]
            .iter()
            .map(|s| s.to_string()),
    );
    h
}

fn log_err(path: &Path, e: impl std::fmt::Display) -> SimError {
    SimError::Log {
        path: path.to_path_buf(),
        msg: e.to_string(),
    }
}

pub fn write_log(path: &Path, rows: &[LogRow], n_clusters: usize) -> Result<(), SimError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| log_err(path, e))?;
    w.write_record(header(n_clusters)).map_err(|e| log_err(path, e))?;
    for r in rows {
        if r.x.len() != n_clusters || r.overridden.len() != n_clusters {
            return Err(SimError::Dimension {
                what: "log row",
                expected: n_clusters,
                got: r.x.len(),
            });
        }
        let mut rec = vec![r.t_s.to_string(), r.p_dem_kw.to_string()];
        rec.extend(r.x.iter().map(f64::to_string));
        rec.push(r.soc.to_string());
        rec.push(u8::from(r.spa).to_string());
        for v in [r.batt_kw, r.c_b, r.c_f, r.c_h, r.c_e, r.reward] {
            rec.push(v.to_string());
        }
        rec.push(r.overridden.iter().map(|&o| if o { '1' } else { '0' }).collect());
        w.write_record(&rec).map_err(|e| log_err(path, e))?;
    }
    w.flush().map_err(|e| log_err(path, e))
}

pub fn read_log(path: &Path) -> Result<Vec<LogRow>, SimError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| log_err(path, e))?;
    let h = rdr.headers().map_err(|e| log_err(path, e))?.clone();
    let m = h.len().checked_sub(11).ok_or_else(|| log_err(path, "too few columns"))?;
    if h.iter().collect::<Vec<_>>() != header(m) {
        return Err(log_err(path, format!("unexpected header '{}'", h.iter().collect::<Vec<_>>().join(","))));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| log_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |i: usize| -> Result<f64, SimError> {
            rec[i]
                .parse()
                .map_err(|_| log_err(path, format!("line {line}: column {} is not a number", h[i].to_string())))
        };
        let mask = &rec[m + 10];
        if mask.len() != m || mask.chars().any(|c| c != '0' && c != '1') {
            return Err(log_err(path, format!("line {line}: bad overridden_mask '{mask}'")));
        }
        let spa = match &rec[m + 3] {
            "0" => false,
            "1" => true,
            other => return Err(log_err(path, format!("line {line}: bad spa '{other}'"))),
        };
        rows.push(LogRow {
            t_s: num(0)?,
            p_dem_kw: num(1)?,
            x: (0..m).map(|k| num(2 + k)).collect::<Result<_, _>>()?,
            soc: num(m + 2)?,
            spa,
            batt_kw: num(m + 4)?,
            c_b: num(m + 5)?,
            c_f: num(m + 6)?,
            c_h: num(m + 7)?,
            c_e: num(m + 8)?,
            reward: num(m + 9)?,
            overridden: mask.chars().map(|c| c == '1').collect(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_roundtrips_exactly() {
        let rows = vec![
            LogRow {
                t_s: 0.0,
                p_dem_kw: 1234.567_890_123,
                x: vec![0.04, 0.1 + 0.2],
                soc: 0.9,
                spa: false,
                batt_kw: -12.5,
                c_b: 0.1,
                c_f: 1.0 / 3.0,
                c_h: 7.25,
                c_e: 0.0,
                reward: -1.0,
                overridden: vec![false, true],
            },
            LogRow {
                t_s: 60.0,
                p_dem_kw: 10.0,
                x: vec![0.0, 0.0],
                soc: 0.95,
                spa: true,
                batt_kw: -300.0,
                c_b: 0.4,
                c_f: 0.0,
                c_h: 0.0,
                c_e: 0.8,
                reward: 0.7,
                overridden: vec![false, false],
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        write_log(&path, &rows, 2).unwrap();
        assert_eq!(read_log(&path).unwrap(), rows);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,p_dem,x_1,x_2,soc,spa,batt_kw,c_b,c_f,c_h,c_e,reward,overridden_mask\n"));
    }
}
