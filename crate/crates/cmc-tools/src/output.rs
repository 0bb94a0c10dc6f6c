//! CSV and JSON encodings of the core result types.

use cmc_core::loop_core::{MapOutcome, StaticMap, Trace};
use cmc_core::sweep::{DesignCurve, DesignGrid};
use serde::Serialize;

fn csv_bytes<I, R>(header: &[&str], rows: I) -> Vec<u8>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    // Writing into a Vec cannot fail.
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(r).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

fn num(v: f64) -> String {
    format!("{v}")
}

pub const TRACE_HEADER: [&str; 4] = ["cycle", "i_extremum", "t_event", "wall_time"];
pub const STATIC_MAP_HEADER: [&str; 3] = ["i_c", "outcome", "i_p_or_period"];
pub const GRID_HEADER: [&str; 4] = ["a_hat", "omega_hat", "stable_fraction", "theorem_flag"];
pub const CURVE_HEADER: [&str; 5] = ["param", "n_w_theory", "n_w_sim", "o_w_theory", "o_w_sim"];

pub fn trace_csv(trace: &Trace) -> Vec<u8> {
    csv_bytes(
        &TRACE_HEADER,
        trace
            .states
            .iter()
            .map(|s| [s.cycle.to_string(), num(s.i_extremum), num(s.t_event), num(s.wall_time)]),
    )
}

pub fn static_map_csv(map: &StaticMap) -> Vec<u8> {
    csv_bytes(
        &STATIC_MAP_HEADER,
        map.samples.iter().map(|(c, o)| {
            let (name, v) = match o {
                MapOutcome::Reached(p) => ("reached", num(*p)),
                MapOutcome::LimitCycle { period, .. } => ("limit-cycle", period.to_string()),
                MapOutcome::Divergent => ("divergent", String::new()),
                MapOutcome::NoCrossing => ("no-crossing", String::new()),
            };
            [num(*c), name.to_string(), v]
        }),
    )
}

pub fn grid_csv(grid: &DesignGrid) -> Vec<u8> {
    let rows = grid.cells.iter().enumerate().flat_map(|(i, row)| {
        row.iter().enumerate().map(move |(j, c)| {
            [
                num(grid.a_hat_axis[i]),
                num(grid.omega_hat_axis[j]),
                num(c.stable_mc),
                u8::from(c.stable_theorem).to_string(),
            ]
        })
    });
    csv_bytes(&GRID_HEADER, rows)
}

pub fn curve_csv(curve: &DesignCurve) -> Vec<u8> {
    let rows = (0..curve.parameter_axis.len()).map(|k| {
        [
            num(curve.parameter_axis[k]),
            num(curve.n_w_theory[k]),
            num(curve.n_w_sim[k]),
            num(curve.o_w_theory[k]),
            num(curve.o_w_sim[k]),
        ]
    });
    csv_bytes(&CURVE_HEADER, rows)
}

/// Pretty JSON with a trailing newline. Non-finite numbers become `null`.
pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable report");
    out.push(b'\n');
    out
}

/// Reads `(delta_v, delay)` pairs from a CSV with a header row.
pub fn read_fit_points<R: std::io::Read>(reader: R) -> Result<Vec<(f64, f64)>, String> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let field = |k: usize| -> Result<f64, String> {
            rec.get(k)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| format!("row {}: expected two numbers", i + 2))
        };
        out.push((field(0)?, field(1)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use cmc_core::loop_core::{LoopState, Verdict};
    use cmc_core::sweep::GridCell;

    #[test]
    fn trace_header_and_lf() {
        let t = Trace {
            states: vec![LoopState { cycle: 1, ..LoopState::initial(2.0) }],
            verdict: Verdict::Converged(1),
            time_offset: 0.0,
        };
        let s = String::from_utf8(trace_csv(&t)).unwrap();
        assert_eq!(s, "cycle,i_extremum,t_event,wall_time\n1,2,0,0\n");
    }

    #[test]
    fn grid_rows_are_row_major() {
        let g = DesignGrid {
            a_hat_axis: vec![0.1, 0.2],
            omega_hat_axis: vec![1.0],
            cells: vec![
                vec![GridCell { stable_mc: 1.0, stable_theorem: true }],
                vec![GridCell { stable_mc: 0.5, stable_theorem: false }],
            ],
        };
        let s = String::from_utf8(grid_csv(&g)).unwrap();
        assert_eq!(s, "a_hat,omega_hat,stable_fraction,theorem_flag\n0.1,1,1,1\n0.2,1,0.5,0\n");
    }

    #[test]
    fn static_map_outcomes() {
        let m = StaticMap {
            samples: vec![
                (1.0, MapOutcome::Reached(1.5)),
                (2.0, MapOutcome::LimitCycle { period: 2, values: vec![1.0, 2.0] }),
                (3.0, MapOutcome::NoCrossing),
            ],
        };
        let s = String::from_utf8(static_map_csv(&m)).unwrap();
        assert_eq!(s, "i_c,outcome,i_p_or_period\n1,reached,1.5\n2,limit-cycle,2\n3,no-crossing,\n");
    }

    #[test]
    fn fit_points() {
        let pts = read_fit_points("delta_v,delay\n0.01, 2e-9\n0.1,1e-9\n".as_bytes()).unwrap();
        assert_eq!(pts, vec![(0.01, 2e-9), (0.1, 1e-9)]);
        assert!(read_fit_points("delta_v,delay\n0.01,x\n".as_bytes()).is_err());
    }
}
