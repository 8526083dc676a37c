//! CSV export of transition logs, one row per half-cycle.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::geometry::{FootArray, FootId, RobotState, SwingPair, Vec2};
use crate::numfmt::sig9;

use super::{ControllerTransition, TransitionLog, TransitionRecord};

pub const LOG_COLUMNS: [&str; 28] = [
    "episode",
    "step",
    "swing_pair",
    "p_com_x",
    "p_com_y",
    "vx_com",
    "vy_com",
    "vx_com_prev",
    "vy_com_prev",
    "vx_ref",
    "vy_ref",
    "vx_ref_prev",
    "vy_ref_prev",
    "pfoot_lf_x",
    "pfoot_lf_y",
    "pfoot_rf_x",
    "pfoot_rf_y",
    "pfoot_lh_x",
    "pfoot_lh_y",
    "pfoot_rh_x",
    "pfoot_rh_y",
    "dfoot_x",
    "dfoot_y",
    "dcom_x",
    "dcom_y",
    "vnext_x",
    "vnext_y",
    "valid_flag",
];

pub fn write_log_csv<W: Write>(log: &TransitionLog, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LOG_COLUMNS).map_err(csv_err)?;
    for r in &log.records {
        let s = &r.state;
        let t = &r.transition;
        let mut row: Vec<String> = Vec::with_capacity(LOG_COLUMNS.len());
        row.push(r.episode.to_string());
        row.push(r.step.to_string());
        row.push(t.swing_pair.name().to_string());
        let mut push = |v: Vec2| {
            row.push(sig9(v.x));
            row.push(sig9(v.y));
        };
        push(s.p_com_w);
        push(s.v_com);
        push(s.v_com_prev);
        push(s.v_ref);
        push(s.v_ref_prev);
        for f in FootId::ALL {
            push(s.p_foot_rel[f]);
        }
        push(t.delta_foot_b);
        push(t.delta_com_b);
        push(t.v_com_next);
        row.push(if r.valid { "1" } else { "0" }.to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a log written by [`write_log_csv`].
///
/// Contact forces are not part of the export and come back as zeros.
pub fn read_log_csv<R: Read>(input: R) -> Result<TransitionLog> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let header = rdr.headers().map_err(csv_err)?.clone();
    for (i, expected) in LOG_COLUMNS.iter().enumerate() {
        match header.get(i) {
            Some(h) if h.trim() == *expected => {}
            Some(h) => {
                return Err(Error::parse_column(
                    *expected,
                    format!("header position {i} is `{h}`"),
                ))
            }
            None => return Err(Error::parse_column(*expected, "missing from header")),
        }
    }
    if header.len() != LOG_COLUMNS.len() {
        return Err(Error::parse(format!(
            "expected {} columns, header has {}",
            LOG_COLUMNS.len(),
            header.len()
        )));
    }

    let mut log = TransitionLog::default();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let num = |i: usize| -> Result<f64> {
            let v: f64 = field(i).parse().map_err(|_| {
                Error::parse_column(
                    LOG_COLUMNS[i],
                    format!("row {}: `{}` is not a number", line + 1, field(i)),
                )
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::parse_column(
                    LOG_COLUMNS[i],
                    format!("row {}: non-finite value", line + 1),
                ))
            }
        };
        let vec = |i: usize| -> Result<Vec2> { Ok(Vec2::new(num(i)?, num(i + 1)?)) };
        let int = |i: usize| -> Result<u32> {
            field(i).parse().map_err(|_| {
                Error::parse_column(
                    LOG_COLUMNS[i],
                    format!("row {}: `{}` is not an integer", line + 1, field(i)),
                )
            })
        };

        let swing_pair = SwingPair::from_name(field(2)).ok_or_else(|| {
            Error::parse_column("swing_pair", format!("row {}: `{}`", line + 1, field(2)))
        })?;
        let mut feet = FootArray::default();
        for (k, f) in FootId::ALL.iter().enumerate() {
            feet[*f] = vec(13 + 2 * k)?;
        }
        let state = RobotState {
            p_com_w: vec(3)?,
            v_com: vec(5)?,
            v_com_prev: vec(7)?,
            v_ref: vec(9)?,
            v_ref_prev: vec(11)?,
            p_foot_rel: feet,
            swing_pair_next: swing_pair,
        };
        let transition = ControllerTransition {
            delta_foot_b: vec(21)?,
            delta_com_b: vec(23)?,
            v_com_next: vec(25)?,
            swing_pair,
            contact_forces: [0.0; 4],
        };
        let valid = match field(27) {
            "1" => true,
            "0" => false,
            other => {
                return Err(Error::parse_column(
                    "valid_flag",
                    format!("row {}: `{other}`", line + 1),
                ))
            }
        };
        log.records.push(TransitionRecord {
            episode: int(0)?,
            step: int(1)?,
            p_com_after: state.p_com_w + transition.delta_com_b,
            state,
            transition,
            valid,
        });
    }
    Ok(log)
}

fn csv_err(e: csv::Error) -> Error {
    Error::parse(e.to_string())
}
