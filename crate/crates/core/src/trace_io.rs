//! CSV trace format and the companion gnuplot script.
//!
//! Columns: `t`, `x<agent>_<component>` (agent-major, 1-based), `w<i>_<k>`
//! (adaptive edges in canonical order, 1-based), `eta_norm`, `J_realized`,
//! `J_bound_partial`. The last column is the running bound
//! `x(0)ᵀ(L⊗C)x(0) + γ∫₀ᵗ …`, so its final value is the guaranteed cost.
//! Numbers are written in shortest round-trip form.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::graph::Topology;
use crate::sim::{reference_at, Dynamics, Sample, SimState, Trace};
use crate::synthesis::{GainSet, Plant};

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::TraceIo(e.to_string())
}

pub fn header(agents: usize, state_dim: usize, edges: &[crate::graph::Edge]) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for i in 0..agents {
        for j in 0..state_dim {
            h.push(format!("x{}_{}", i + 1, j + 1));
        }
    }
    for e in edges {
        h.push(format!("w{}_{}", e.lo() + 1, e.hi() + 1));
    }
    h.extend(["eta_norm", "J_realized", "J_bound_partial"].map(String::from));
    h
}

pub fn write_csv<W: Write>(trace: &Trace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(trace.agents, trace.state_dim, &trace.adaptive_edges))
        .map_err(io_err)?;
    let mut row: Vec<String> = Vec::new();
    for s in &trace.samples {
        row.clear();
        row.push(format!("{:e}", s.state.t));
        row.extend(s.state.x.iter().map(|v| format!("{v:e}")));
        row.extend(s.state.w.iter().map(|v| format!("{v:e}")));
        row.push(format!("{:e}", s.eta_norm));
        row.push(format!("{:e}", s.state.j_realized));
        row.push(format!("{:e}", trace.bound_initial + s.state.j_bound_integral));
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn to_csv_string(trace: &Trace) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(trace, &mut buf)?;
    String::from_utf8(buf).map_err(io_err)
}

/// Reads a trace written by [`write_csv`] for the given system. The header
/// must match the layout implied by the topology and gains.
pub fn read_csv<R: Read>(input: R, plant: &Plant, gains: &GainSet, topology: &Topology) -> Result<Trace> {
    let dynamics = Dynamics::new(plant, gains, topology)?;
    let (n, d) = (dynamics.agents(), dynamics.state_dim());
    let edges = dynamics.adaptive_edges().to_vec();
    let expected = header(n, d, &edges);

    let mut rdr = csv::Reader::from_reader(input);
    let found: Vec<String> = rdr.headers().map_err(io_err)?.iter().map(String::from).collect();
    if found != expected {
        return Err(Error::TraceIo(format!(
            "header does not match the configuration: expected {} columns starting {:?}, found {} columns starting {:?}",
            expected.len(),
            &expected[..expected.len().min(4)],
            found.len(),
            &found[..found.len().min(4)]
        )));
    }

    let nx = n * d;
    let ne = edges.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(io_err)?;
        let vals = rec
            .iter()
            .enumerate()
            .map(|(c, s)| {
                s.trim().parse::<f64>().map_err(|e| {
                    Error::TraceIo(format!("row {}, column {}: '{s}': {e}", line + 2, expected[c]))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(vals);
    }
    let first = rows.first().ok_or(Error::Empty("trace file has no data rows"))?;
    if first[0] != 0.0 {
        return Err(Error::TraceIo(format!("first sample is at t = {}, expected 0", first[0])));
    }
    if let Some(k) = rows.windows(2).position(|w| w[1][0] <= w[0][0]) {
        return Err(Error::TraceIo(format!("sample times not increasing at row {}", k + 3)));
    }
    let x0 = first[1..1 + nx].to_vec();
    let bound_initial = dynamics.bound_initial_term(&x0);
    let leader = dynamics.leader();
    let samples = rows
        .iter()
        .map(|r| {
            let x = r[1..1 + nx].to_vec();
            let t = r[0];
            Sample {
                reference: reference_at(gains.mode, plant.a(), &x0, &x, n, leader, t),
                eta_norm: r[1 + nx + ne],
                state: SimState {
                    t,
                    w: r[1 + nx..1 + nx + ne].to_vec(),
                    j_realized: r[2 + nx + ne],
                    j_bound_integral: r[3 + nx + ne] - bound_initial,
                    x,
                },
            }
        })
        .collect();
    Ok(Trace {
        mode: gains.mode,
        agents: n,
        state_dim: d,
        adaptive_edges: edges,
        initial_states: x0,
        bound_initial,
        samples,
        warnings: Vec::new(),
    })
}

/// Gnuplot script plotting states, weights, disagreement and costs from
/// `csv_path`.
pub fn plot_script(csv_path: &str, trace: &Trace) -> String {
    let nx = trace.agents * trace.state_dim;
    let ne = trace.adaptive_edges.len();
    let range = |from: usize, count: usize| -> String {
        (from..from + count)
            .map(|c| format!("'{csv_path}' using 1:{c} with lines"))
            .collect::<Vec<_>>()
            .join(", \\\n     ")
    };
    let eta = 2 + nx + ne;
    format!(
        "set datafile separator ','\n\
         set key autotitle columnhead outside right\n\
         set xlabel 't [s]'\n\
         set terminal pngcairo size 1400,1000\n\
         set output '{csv_path}.png'\n\
         set multiplot layout 2,2\n\
         set title 'agent states'\n\
         plot {states}\n\
         set title 'adaptive weights'\n\
         plot {weights}\n\
         set title 'disagreement norm'\n\
         plot '{csv_path}' using 1:{eta} with lines\n\
         set title 'realised cost and bound'\n\
         plot '{csv_path}' using 1:{jr} with lines, '{csv_path}' using 1:{jb} with lines\n\
         unset multiplot\n",
        states = range(2, nx),
        weights = if ne == 0 { "0 notitle".to_string() } else { range(2 + nx, ne) },
        jr = eta + 1,
        jb = eta + 2,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matops::Matrix;
    use crate::sim::{run, InitialStates, SimConfig};
    use crate::synthesis::design_leaderless;

    #[test]
    fn round_trip() {
        let plant = Plant::new(
            Matrix::from_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]),
            Matrix::column(&[0.0, 1.0]),
            Matrix::identity(2),
        )
        .unwrap();
        let gains = design_leaderless(&plant, 2.0).unwrap();
        let topo = Topology::path(3).unwrap();
        let cfg = SimConfig {
            t_final: 0.5,
            sample_stride: 7,
            ..SimConfig::new(InitialStates::Seeded { seed: 4, low: -1.0, high: 1.0 })
        };
        let trace = run(&cfg, &plant, &gains, &topo).unwrap();
        let text = to_csv_string(&trace).unwrap();
        assert!(text.starts_with("t,x1_1,x1_2,x2_1,x2_2,x3_1,x3_2,w1_2,w2_3,eta_norm,J_realized,J_bound_partial\n"));
        let back = read_csv(text.as_bytes(), &plant, &gains, &topo).unwrap();
        assert_eq!(back.samples.len(), trace.samples.len());
        for (a, b) in back.samples.iter().zip(&trace.samples) {
            assert_eq!(a.state.x, b.state.x);
            assert_eq!(a.state.w, b.state.w);
            assert!((a.state.j_bound_integral - b.state.j_bound_integral).abs() < 1e-12);
        }
        assert_eq!(to_csv_string(&back).unwrap(), text);
    }

    #[test]
    fn header_mismatch_rejected() {
        let plant = Plant::new(Matrix::identity(1), Matrix::identity(1), Matrix::identity(1)).unwrap();
        let gains = design_leaderless(&plant, 2.0).unwrap();
        let topo = Topology::path(2).unwrap();
        let err = read_csv("t,x1_1\n0,1\n".as_bytes(), &plant, &gains, &topo).unwrap_err();
        assert!(matches!(err, Error::TraceIo(_)));
    }

    #[test]
    fn plot_script_references_columns() {
        let trace = Trace {
            mode: crate::synthesis::Mode::Leaderless,
            agents: 2,
            state_dim: 1,
            adaptive_edges: Topology::path(2).unwrap().edges().to_vec(),
            initial_states: vec![0.0, 1.0],
            bound_initial: 0.0,
            samples: vec![],
            warnings: vec![],
        };
        let s = plot_script("run.csv", &trace);
        assert!(s.contains("using 1:2 with lines"));
        assert!(s.contains("using 1:4 with lines"));
        assert!(s.contains("using 1:6 with lines, 'run.csv' using 1:7"));
    }
}
