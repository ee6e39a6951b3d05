use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::experiments::{BenchRow, MethodSummary, SweepPoint};
use crate::Result;

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// `method,n_objects,seeds,obj_1..obj_n,avg,std,failed`
pub fn table1_csv(rows: &[MethodSummary]) -> String {
    let n = rows.iter().map(|r| r.per_object_error.len()).max().unwrap_or(0);
    let mut out = String::from("method,n_objects,seeds");
    for j in 1..=n {
        let _ = write!(out, ",obj_{j}");
    }
    out.push_str(",avg,std,failed\n");
    for r in rows {
        let _ = write!(out, "{},{},{}", r.method, r.n_objects, r.seeds);
        for j in 0..n {
            match r.per_object_error.get(j) {
                Some(e) => {
                    let _ = write!(out, ",{e:.4}");
                }
                None => out.push(','),
            }
        }
        let _ = writeln!(out, ",{:.4},{:.4},{:.3}", r.mean_error, r.std_error, r.mean_failed);
    }
    out
}

pub fn write_table1_csv(rows: &[MethodSummary], path: &Path) -> Result<()> {
    fs::write(path, table1_csv(rows))?;
    Ok(())
}

/// `noise,method,mean_error,std_error,mean_failed`
pub fn write_fig4_csv(points: &[SweepPoint], path: &Path) -> Result<()> {
    let mut out = String::from("noise,method,mean_error,std_error,mean_failed\n");
    for p in points {
        let _ = writeln!(out, "{:.4},{},{:.4},{:.4},{:.3}", p.noise, p.method, p.mean_error, p.std_error, p.mean_failed);
    }
    fs::write(path, out)?;
    Ok(())
}

/// `n_objects,method,ms_per_frame`
pub fn write_table2_csv(rows: &[BenchRow], path: &Path) -> Result<()> {
    let mut out = String::from("n_objects,method,ms_per_frame\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{:.5}", r.n_objects, r.method, r.ms_per_frame);
    }
    fs::write(path, out)?;
    Ok(())
}
