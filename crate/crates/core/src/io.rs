//! CSV dumps of trees, values, trajectories and grid results.
//!
//! Reals are written with 17 significant digits so they read back bit-exact;
//! infinities are written as `inf` and `-inf`.

use std::path::Path;

use csv::Writer;

use crate::error::Result;
use crate::feedback::Trajectory;
use crate::grid_sl::{GridValue, UniformGrid};
use crate::tree::Tree;
use crate::tree_dp::ValueTable;

/// Round-trip formatting of a real.
pub fn fmt_real(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

/// Inverse of [`fmt_real`].
pub fn parse_real(s: &str) -> Option<f64> {
    match s {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        "nan" => Some(f64::NAN),
        _ => s.parse().ok(),
    }
}

fn axis_header(prefix: &str, d: usize) -> impl Iterator<Item = String> + '_ {
    (0..d).map(move |k| format!("{prefix}{k}"))
}

fn writer(path: &Path) -> Result<Writer<std::fs::File>> {
    Ok(Writer::from_path(path)?)
}

/// `level,node_index,x_0,..`
pub fn write_tree_nodes(path: &Path, tr: &Tree) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["level".to_string(), "node_index".to_string()];
    header.extend(axis_header("x_", tr.dim()));
    w.write_record(&header)?;
    for n in 0..tr.n_levels() {
        for i in 0..tr.level_len(n) {
            let mut rec = vec![n.to_string(), i.to_string()];
            rec.extend(tr.state(n, i).iter().map(|&v| fmt_real(v)));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `level,node_index,control_index,succ_index` for every edge; pruned edges
/// have successor `-1`.
pub fn write_tree_edges(path: &Path, tr: &Tree) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["level", "node_index", "control_index", "succ_index"])?;
    for n in 0..tr.n_levels().saturating_sub(1) {
        for i in 0..tr.level_len(n) {
            for j in 0..tr.n_controls() {
                let k = tr.successor_unchecked(n, i, j).map_or_else(|| "-1".to_string(), |k| k.to_string());
                w.write_record([n.to_string(), i.to_string(), j.to_string(), k])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// `level,node_index,value,argmin_control` (argmin `-1` on the last level and
/// at dead ends).
pub fn write_tree_values(path: &Path, tr: &Tree, vt: &ValueTable) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["level", "node_index", "value", "argmin_control"])?;
    let last = tr.n_levels() - 1;
    for n in 0..tr.n_levels() {
        for i in 0..tr.level_len(n) {
            let arg = if n < last { vt.argmin(n, i) } else { None };
            let arg = arg.map_or_else(|| "-1".to_string(), |a| a.to_string());
            w.write_record([n.to_string(), i.to_string(), fmt_real(vt.value(n, i)), arg])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `step,t,x_..,u_..,stage_cost,cumulative_cost,admissible`. The final row
/// has no control and carries the discounted terminal cost as its stage cost.
pub fn write_trajectory(path: &Path, tr: &Trajectory) -> Result<()> {
    let mut w = writer(path)?;
    let d = tr.states[0].len();
    let m = tr.controls.first().map_or(0, Vec::len);
    let mut header = vec!["step".to_string(), "t".to_string()];
    header.extend(axis_header("x_", d));
    header.extend(axis_header("u_", m));
    header.extend(["stage_cost", "cumulative_cost", "admissible"].map(String::from));
    w.write_record(&header)?;
    let mut cumulative = 0.0;
    for (n, x) in tr.states.iter().enumerate() {
        let mut rec = vec![n.to_string(), fmt_real(tr.times[n])];
        rec.extend(x.iter().map(|&v| fmt_real(v)));
        let stage = match tr.controls.get(n) {
            Some(u) => {
                rec.extend(u.iter().map(|&v| fmt_real(v)));
                tr.running_cost_terms[n]
            }
            None => {
                rec.extend(std::iter::repeat_n(String::new(), m));
                tr.terminal_term
            }
        };
        cumulative += stage;
        rec.push(fmt_real(stage));
        rec.push(fmt_real(cumulative));
        rec.push(u8::from(tr.admissible[n]).to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `level,i_..,x_..,value` for the requested levels.
pub fn write_grid_values(path: &Path, ug: &UniformGrid, gv: &GridValue, levels: &[usize]) -> Result<()> {
    let mut w = writer(path)?;
    let d = ug.dim();
    let mut header = vec!["level".to_string()];
    header.extend(axis_header("i_", d));
    header.extend(axis_header("x_", d));
    header.push("value".into());
    w.write_record(&header)?;
    for &n in levels {
        for (i, &v) in gv.level(n).iter().enumerate() {
            let mut rec = vec![n.to_string()];
            rec.extend(ug.multi_index(i).iter().map(|k| k.to_string()));
            rec.extend(ug.node(i).iter().map(|&x| fmt_real(x)));
            rec.push(fmt_real(v));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `i_..,x_..,value`
pub fn write_vi_values(path: &Path, ug: &UniformGrid, values: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    let d = ug.dim();
    let mut header: Vec<String> = axis_header("i_", d).collect();
    header.extend(axis_header("x_", d));
    header.push("value".into());
    w.write_record(&header)?;
    for (i, &v) in values.iter().enumerate() {
        let mut rec: Vec<String> = ug.multi_index(i).iter().map(|k| k.to_string()).collect();
        rec.extend(ug.node(i).iter().map(|&x| fmt_real(x)));
        rec.push(fmt_real(v));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `iteration,residual`
pub fn write_vi_residuals(path: &Path, residuals: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["iteration", "residual"])?;
    for (k, &r) in residuals.iter().enumerate() {
        w.write_record([(k + 1).to_string(), fmt_real(r)])?;
    }
    w.flush()?;
    Ok(())
}
