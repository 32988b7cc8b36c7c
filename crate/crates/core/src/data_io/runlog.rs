//! Run logs as CSV. Floats use the shortest representation that parses back
//! to the same value, so a write/read round trip is lossless.

use std::path::Path;

use super::{parse_error, read_text, write_text};
use crate::error::Result;
use crate::optimizer::{LogRow, RunLog};

pub const RUNLOG_HEADER: &str = "iter,loss,avg_cum_loss,nbar,dev_metric";

pub fn runlog_to_csv(log: &RunLog) -> String {
    let mut out = String::with_capacity(64 * (log.rows.len() + 1));
    out.push_str(RUNLOG_HEADER);
    out.push('\n');
    for r in &log.rows {
        out.push_str(&format!("{},{:?},{:?},{},", r.iter, r.loss, r.avg_cum_loss, r.nbar));
        if let Some(m) = r.dev_metric {
            out.push_str(&format!("{m:?}"));
        }
        out.push('\n');
    }
    out
}

pub fn write_runlog(log: &RunLog, path: &Path) -> Result<()> {
    write_text(path, &runlog_to_csv(log))
}

pub fn read_runlog(path: &Path) -> Result<RunLog> {
    let text = read_text(path)?;
    read_runlog_str(&text, &path.display().to_string())
}

pub fn read_runlog_str(text: &str, origin: &str) -> Result<RunLog> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == RUNLOG_HEADER => {}
        _ => return Err(parse_error(origin, 1, format!("expected header `{RUNLOG_HEADER}`"))),
    }
    let mut rows = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |what: &str| parse_error(origin, n + 1, format!("bad {what} in `{line}`"));
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(bad("column count"));
        }
        rows.push(LogRow {
            iter: cols[0].parse().map_err(|_| bad("iter"))?,
            loss: cols[1].parse().map_err(|_| bad("loss"))?,
            avg_cum_loss: cols[2].parse().map_err(|_| bad("avg_cum_loss"))?,
            nbar: cols[3].parse().map_err(|_| bad("nbar"))?,
            dev_metric: match cols[4].trim() {
                "" => None,
                v => Some(v.parse().map_err(|_| bad("dev_metric"))?),
            },
        });
    }
    Ok(RunLog { rows })
}
