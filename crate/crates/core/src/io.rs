//! Plain-text snapshot and history files.
//!
//! A snapshot starts with `# otm-snapshot v1 t=<time>` followed by one
//! `kind,id,x,y,z,mass,volume,density` record per node (`kind = node`, zero
//! mass, volume and density) and then per material point (`kind = mp`).
//! Floats are printed in scientific notation with 17 significant digits, so
//! reading a snapshot back reproduces the state bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::discretization::{MaterialPointSet, NodeSet};
use crate::solver::RunHistory;
use crate::{OtmError, Point, Result};

const MAGIC: &str = "# otm-snapshot";
const VERSION: &str = "v1";

pub const HISTORY_HEADER: &str = "step,time,dt,mass,mean_density,volume,max_radius,entropy,rebuilds";

fn g17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn format_snapshot(nodes: &NodeSet, mps: &MaterialPointSet, time: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC} {VERSION} t={}", g17(time));
    for (a, x) in nodes.positions.iter().enumerate() {
        let _ = writeln!(s, "node,{a},{},{},{},0,0,0", g17(x.x), g17(x.y), g17(x.z));
    }
    for p in 0..mps.len() {
        let x = mps.positions()[p];
        let _ = writeln!(
            s,
            "mp,{p},{},{},{},{},{},{}",
            g17(x.x),
            g17(x.y),
            g17(x.z),
            g17(mps.masses()[p]),
            g17(mps.volumes()[p]),
            g17(mps.densities()[p])
        );
    }
    s
}

pub fn write_snapshot(path: &Path, nodes: &NodeSet, mps: &MaterialPointSet, time: f64) -> Result<()> {
    fs::write(path, format_snapshot(nodes, mps, time))?;
    Ok(())
}

/// Parses a snapshot without validating the physical invariants, so that
/// corrupted states can still be audited.
pub fn parse_snapshot(text: &str) -> Result<(NodeSet, MaterialPointSet, f64)> {
    let malformed = |line: usize, message: String| OtmError::SnapshotFormat { line, message };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| malformed(1, "empty file".into()))?;
    let rest = header
        .strip_prefix(MAGIC)
        .ok_or_else(|| malformed(1, format!("missing `{MAGIC}` header")))?
        .trim();
    let (version, time) = rest.split_once(' ').unwrap_or((rest, ""));
    if version != VERSION {
        return Err(OtmError::SnapshotVersion(version.to_string()));
    }
    let time: f64 = time
        .trim()
        .strip_prefix("t=")
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| malformed(1, "header lacks `t=<time>`".into()))?;

    let mut nodes = Vec::new();
    let (mut xs, mut ms, mut vs, mut rs) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, line) in lines {
        let n = i + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(malformed(n, format!("expected 8 fields, found {}", fields.len())));
        }
        let id: usize = fields[1].parse().map_err(|_| malformed(n, format!("bad id `{}`", fields[1])))?;
        let mut v = [0.0; 6];
        for (k, f) in fields[2..].iter().enumerate() {
            v[k] = f.parse().map_err(|_| malformed(n, format!("bad number `{f}`")))?;
        }
        let x = Point::new(v[0], v[1], v[2]);
        match fields[0] {
            "node" => {
                if !xs.is_empty() {
                    return Err(malformed(n, "node record after material points".into()));
                }
                if id != nodes.len() {
                    return Err(malformed(n, format!("expected node id {}, found {id}", nodes.len())));
                }
                nodes.push(x);
            }
            "mp" => {
                if id != xs.len() {
                    return Err(malformed(n, format!("expected mp id {}, found {id}", xs.len())));
                }
                xs.push(x);
                ms.push(v[3]);
                vs.push(v[4]);
                rs.push(v[5]);
            }
            other => return Err(malformed(n, format!("unknown record kind `{other}`"))),
        }
    }
    Ok((NodeSet::new(nodes), MaterialPointSet::from_raw(xs, ms, vs, rs), time))
}

pub fn read_snapshot(path: &Path) -> Result<(NodeSet, MaterialPointSet, f64)> {
    parse_snapshot(&fs::read_to_string(path)?)
}

pub fn format_history(history: &RunHistory) -> String {
    let mut s = String::from(HISTORY_HEADER);
    s.push('\n');
    for r in &history.rows {
        let _ = writeln!(
            s,
            "{},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{}",
            r.step, r.time, r.dt, r.mass, r.mean_density, r.volume, r.max_radius, r.entropy, r.rebuilds
        );
    }
    s
}

pub fn write_history(path: &Path, history: &RunHistory) -> Result<()> {
    fs::write(path, format_history(history))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::StepDiagnostics;

    fn state() -> (NodeSet, MaterialPointSet) {
        let nodes = NodeSet::new(vec![Point::new(0.1, -2.0, 1.0 / 3.0)]);
        let mps = MaterialPointSet::new(vec![Point::new(1e-17, 0.7, -0.2)], vec![0.1 + 0.2], vec![2.0 / 3.0]).unwrap();
        (nodes, mps)
    }

    #[test]
    fn one_node_one_particle_is_three_lines() {
        let (nodes, mps) = state();
        let text = format_snapshot(&nodes, &mps, 0.25);
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("# otm-snapshot v1 t=2.5000000000000000e-1\nnode,0,"));
        assert!(text.lines().nth(1).unwrap().ends_with(",0,0,0"));
    }

    #[test]
    fn round_trip_is_bitwise() {
        let (nodes, mps) = state();
        let (n2, m2, t) = parse_snapshot(&format_snapshot(&nodes, &mps, 1.0 / 7.0)).unwrap();
        assert_eq!(t, 1.0 / 7.0);
        assert_eq!(n2, nodes);
        assert_eq!(m2, mps);
    }

    #[test]
    fn truncated_row_reports_its_line() {
        let (nodes, mps) = state();
        let text = format_snapshot(&nodes, &mps, 0.0);
        let cut = &text[..text.rfind("mp,").unwrap() + 20];
        assert!(matches!(parse_snapshot(cut), Err(OtmError::SnapshotFormat { line: 3, .. })));
    }

    #[test]
    fn wrong_version_is_rejected() {
        let (nodes, mps) = state();
        let text = format_snapshot(&nodes, &mps, 0.0).replace("v1", "v2");
        assert!(matches!(parse_snapshot(&text), Err(OtmError::SnapshotVersion(v)) if v == "v2"));
    }

    #[test]
    fn history_header() {
        let text = format_history(&RunHistory::default());
        assert_eq!(text, format!("{HISTORY_HEADER}\n"));
    }

    fn golden_state() -> (NodeSet, MaterialPointSet) {
        let nodes = NodeSet::new(vec![Point::zeros(), Point::x(), Point::y(), Point::z()]);
        let mps = MaterialPointSet::new(
            vec![Point::repeat(0.25), Point::new(0.1, 0.2, 0.3)],
            vec![1.0 / 6.0, 0.1],
            vec![1.0 / 6.0, 0.3],
        )
        .unwrap();
        (nodes, mps)
    }

    #[test]
    fn snapshot_matches_golden_file() {
        let golden = include_str!("../tests/golden/snapshot_v1.csv");
        let (nodes, mps) = golden_state();
        assert_eq!(format_snapshot(&nodes, &mps, 0.125), golden);
        let (n2, m2, t) = parse_snapshot(golden).unwrap();
        assert_eq!((n2, m2, t), (nodes, mps, 0.125));
    }

    #[test]
    fn history_matches_golden_file() {
        let row = |step: usize, time: f64, dt: f64| StepDiagnostics {
            step,
            time,
            dt,
            mass: 0.1 + 0.2,
            mean_density: 2.0 / 3.0,
            volume: 0.45,
            max_radius: 1.0,
            entropy: -0.0625,
            second_moment: 0.0,
            rebuilds: step / 2,
            rebuilt: false,
            newton_iterations: 0,
            newton_max: 0,
            frozen_nodes: 0,
            projected_nodes: 0,
            wall_clock: 0.0,
        };
        let history = RunHistory {
            rows: vec![row(0, 0.0, 0.0), row(1, 0.1, 0.1), row(2, 0.2, 0.1)],
        };
        assert_eq!(format_history(&history), include_str!("../tests/golden/history_v1.csv"));
    }

    #[test]
    fn mass_column_sums_to_seeded_mass() {
        let domain = crate::Domain::sphere(Point::zeros(), 2.0).unwrap();
        let (nodes, mps) = crate::discretization::seed(&domain, &domain, 0.8, 1.5).unwrap();
        let text = format_snapshot(&nodes, &mps, 0.0);
        let sum: f64 = text
            .lines()
            .filter(|l| l.starts_with("mp,"))
            .map(|l| l.split(',').nth(5).unwrap().parse::<f64>().unwrap())
            .sum();
        assert_eq!(sum, mps.masses().iter().sum::<f64>());
    }
}

