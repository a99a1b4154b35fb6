//! Post-run certification: cost-bound domination, consensus, weight
//! monotonicity and reference tracking.

use std::fmt::Write as _;

use crate::demos::{self, Example};
use crate::error::{Error, Result};
use crate::graph::Topology;
use crate::matops::Matrix;
use crate::sim::{guaranteed_cost_bound, Dynamics, OdeSystem, Trace};
use crate::synthesis::{verify_riccati_certificate, GainSet, Mode, Plant};
use crate::tolerances::Tolerances;

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub mode: Mode,
    pub t_final: f64,
    pub realized_cost: f64,
    pub bound: f64,
    pub bound_holds: bool,
    pub initial_disagreement: f64,
    pub final_disagreement: f64,
    pub consensus_achieved: bool,
    pub weights_monotone: bool,
    /// Smallest change between consecutive samples over all adaptive weights.
    pub min_weight_delta: f64,
    /// Largest `|ẇ|` at the final state.
    pub final_weight_rate: f64,
    pub weights_converged: bool,
    pub tracking_error: f64,
    pub tracking_achieved: bool,
    pub certificate_margin: f64,
    pub tail_integrand: f64,
    pub warnings: Vec<String>,
}

impl CostReport {
    /// Relative slack `(bound − realized) / max(bound, 1)`.
    pub fn bound_slack(&self) -> f64 {
        (self.bound - self.realized_cost) / self.bound.max(1.0)
    }

    /// Flat `key = value` block, one field per line.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("mode", self.mode.to_string());
        kv("t_final", self.t_final.to_string());
        kv("realized_cost", format!("{:.10e}", self.realized_cost));
        kv("bound", format!("{:.10e}", self.bound));
        kv("bound_holds", self.bound_holds.to_string());
        kv("initial_disagreement", format!("{:.10e}", self.initial_disagreement));
        kv("final_disagreement", format!("{:.10e}", self.final_disagreement));
        kv("consensus_achieved", self.consensus_achieved.to_string());
        kv("weights_monotone", self.weights_monotone.to_string());
        kv("min_weight_delta", format!("{:.10e}", self.min_weight_delta));
        kv("final_weight_rate", format!("{:.10e}", self.final_weight_rate));
        kv("weights_converged", self.weights_converged.to_string());
        kv("tracking_error", format!("{:.10e}", self.tracking_error));
        kv("tracking_achieved", self.tracking_achieved.to_string());
        kv("certificate_margin", format!("{:.10e}", self.certificate_margin));
        kv("tail_integrand", format!("{:.10e}", self.tail_integrand));
        for (i, w) in self.warnings.iter().enumerate() {
            kv(&format!("warning.{}", i + 1), w.clone());
        }
        s
    }
}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

pub fn analyze(trace: &Trace, plant: &Plant, gains: &GainSet, topology: &Topology, tol: &Tolerances) -> Result<CostReport> {
    let (first, last) = match (trace.first(), trace.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::Empty("trace has no samples")),
    };
    let dynamics = Dynamics::new(plant, gains, topology)?;
    if dynamics.adaptive_edges() != trace.adaptive_edges.as_slice() || trace.mode != gains.mode {
        return Err(Error::Shape("trace does not match the topology/gains it is analysed with".into()));
    }
    let (n, d) = (trace.agents, trace.state_dim);
    let mut warnings = trace.warnings.clone();

    let bound_eval = guaranteed_cost_bound(trace, &dynamics, tol)?;
    warnings.extend(bound_eval.warning.clone());
    let realized = last.state.j_realized;
    let bound = bound_eval.bound;
    let bound_holds = realized <= bound * (1.0 + tol.bound_rel) + tol.bound_rel;

    let initial_disagreement = first.eta_norm;
    let final_disagreement = last.eta_norm;
    let consensus_achieved = final_disagreement < tol.consensus_rel * (initial_disagreement + 1.0);
    if final_disagreement > initial_disagreement && final_disagreement > 0.0 {
        warnings.push(format!(
            "disagreement grew from {initial_disagreement:.3e} to {final_disagreement:.3e}; closed loop appears unstable"
        ));
    }

    let mut min_weight_delta = f64::INFINITY;
    for pair in trace.samples.windows(2) {
        for (a, b) in pair[0].state.w.iter().zip(&pair[1].state.w) {
            min_weight_delta = min_weight_delta.min(b - a);
        }
    }
    if !min_weight_delta.is_finite() {
        min_weight_delta = 0.0;
    }
    let weights_monotone = min_weight_delta >= -tol.weight_monotone;

    let y = last.state.pack();
    let mut dy = vec![0.0; y.len()];
    dynamics.rhs(last.state.t, &y, &mut dy);
    let nx = n * d;
    let final_weight_rate = dy[nx..nx + trace.adaptive_edges.len()]
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    let weights_converged = final_weight_rate < tol.weight_rate;

    let reference = &last.reference;
    let tracking_error = (0..n)
        .filter(|&i| Some(i) != dynamics.leader())
        .map(|i| norm((0..d).map(|j| last.state.x[i * d + j] - reference[j])))
        .fold(0.0_f64, f64::max);
    let tracking_achieved = tracking_error < tol.tracking;

    let cert = verify_riccati_certificate(&gains.certificate, plant, gains.gamma, gains.mode, tol)?;
    if !cert.holds {
        warnings.push(format!(
            "certificate violates the Riccati inequality (margin {:.3e})",
            cert.margin
        ));
    }

    Ok(CostReport {
        mode: trace.mode,
        t_final: last.state.t,
        realized_cost: realized,
        bound,
        bound_holds,
        initial_disagreement,
        final_disagreement,
        consensus_achieved,
        weights_monotone,
        min_weight_delta,
        final_weight_rate,
        weights_converged,
        tracking_error,
        tracking_achieved,
        certificate_margin: cert.margin,
        tail_integrand: bound_eval.tail_integrand,
        warnings,
    })
}

/// One compared entry of a printed gain matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GainEntryCheck {
    pub label: String,
    pub computed: f64,
    pub printed: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrintedCertificateReport {
    pub example: Example,
    pub entries: Vec<GainEntryCheck>,
    pub pass: bool,
}

impl PrintedCertificateReport {
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "printed_check.example = {}", self.example.as_str());
        for e in &self.entries {
            let _ = writeln!(
                s,
                "printed_check.{} = computed {:.6} printed {:.4} {}",
                e.label,
                e.computed,
                e.printed,
                if e.ok { "ok" } else { "MISMATCH" }
            );
        }
        let _ = writeln!(s, "printed_check.pass = {}", self.pass);
        s
    }
}

/// Absolute tolerance on the printed four-decimal gains.
pub const PRINTED_GAIN_TOL: f64 = 1e-3;

/// Recomputes `K_u = BᵀC` and `K_w = CBBᵀC` from the printed certificate
/// and compares them with the printed gains.
pub fn verify_printed_certificate(example: Example) -> PrintedCertificateReport {
    verify_certificate_against_printed(example, &demos::printed_certificate(example))
}

/// As [`verify_printed_certificate`] with a caller-supplied certificate.
pub fn verify_certificate_against_printed(example: Example, certificate: &Matrix) -> PrintedCertificateReport {
    let b = demos::plant(example).b().clone();
    let k_u = &b.transpose() * certificate;
    let k_w = &k_u.transpose() * &k_u;
    let mut entries = Vec::new();
    let mut push = |label: String, computed: f64, printed: f64| {
        entries.push(GainEntryCheck {
            ok: (computed - printed).abs() <= PRINTED_GAIN_TOL,
            label,
            computed,
            printed,
        })
    };
    let printed_ku = demos::printed_k_u(example);
    for (j, &v) in printed_ku.iter().enumerate() {
        push(format!("k_u[{}]", j + 1), k_u[(0, j)], v);
    }
    for &(r, c, v) in demos::printed_k_w_checked_entries(example) {
        push(format!("k_w[{},{}]", r + 1, c + 1), k_w[(r, c)], v);
    }
    let pass = entries.iter().all(|e| e.ok);
    PrintedCertificateReport { example, entries, pass }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{run, InitialStates, SimConfig};

    #[test]
    fn printed_examples_pass() {
        let r1 = verify_printed_certificate(Example::One);
        assert!(r1.pass, "{}", r1.to_key_value());
        assert_eq!(r1.entries.len(), 6);
        let r2 = verify_printed_certificate(Example::Two);
        assert!(r2.pass, "{}", r2.to_key_value());
        assert_eq!(r2.entries.len(), 5);
    }

    #[test]
    fn perturbed_certificate_fails() {
        // zero-based (1,1): the entry that feeds K_u when B = [0, 1]ᵀ
        let mut p = demos::printed_certificate(Example::One);
        p[(1, 1)] += 1.0;
        assert!(!verify_certificate_against_printed(Example::One, &p).pass);
        // the top-left entry never reaches the gains for this input matrix
        let mut p = demos::printed_certificate(Example::One);
        p[(0, 0)] += 1.0;
        assert!(verify_certificate_against_printed(Example::One, &p).pass);
    }

    #[test]
    fn zero_disagreement_report() {
        let plant = demos::plant(Example::One);
        let gains = crate::synthesis::design_leaderless(&plant, 3.0).unwrap();
        // four agents so the mean of identical states is exact
        let topo = Topology::cycle(4).unwrap();
        let cfg = SimConfig {
            t_final: 0.2,
            ..SimConfig::new(InitialStates::Explicit(vec![vec![0.3, -0.2]; 4]))
        };
        let trace = run(&cfg, &plant, &gains, &topo).unwrap();
        let rep = analyze(&trace, &plant, &gains, &topo, &Tolerances::default()).unwrap();
        assert_eq!(rep.realized_cost, 0.0);
        assert_eq!(rep.bound, 0.0);
        assert!(rep.bound_holds && rep.consensus_achieved && rep.weights_monotone);
        assert!(rep.weights_converged && rep.tracking_achieved);
        assert!(rep.warnings.is_empty(), "{:?}", rep.warnings);
    }

    #[test]
    fn wrong_sign_gain_refuted() {
        let plant = demos::plant(Example::One);
        let mut gains = crate::synthesis::design_leaderless(&plant, 3.0).unwrap();
        gains.k_u = gains.k_u.scale(-1.0);
        let topo = Topology::cycle(4).unwrap();
        let cfg = SimConfig {
            t_final: 0.05,
            ..SimConfig::new(InitialStates::Seeded { seed: 3, low: -1.0, high: 1.0 })
        };
        let trace = run(&cfg, &plant, &gains, &topo).unwrap();
        let rep = analyze(&trace, &plant, &gains, &topo, &Tolerances::default()).unwrap();
        assert!(!rep.consensus_achieved);
        assert!(rep.warnings.iter().any(|w| w.contains("unstable")));
    }

    #[test]
    fn analyze_is_deterministic() {
        let plant = demos::plant(Example::One);
        let gains = crate::synthesis::design_leaderless(&plant, 3.0).unwrap();
        let topo = Topology::complete(4).unwrap();
        let cfg = SimConfig {
            t_final: 1.0,
            ..SimConfig::new(InitialStates::Seeded { seed: 11, low: -1.0, high: 1.0 })
        };
        let trace = run(&cfg, &plant, &gains, &topo).unwrap();
        let tol = Tolerances::default();
        let a = analyze(&trace, &plant, &gains, &topo, &tol).unwrap();
        let b = analyze(&trace, &plant, &gains, &topo, &tol).unwrap();
        assert_eq!(a.to_key_value(), b.to_key_value());
    }

    #[test]
    fn empty_trace_rejected() {
        let plant = demos::plant(Example::One);
        let gains = crate::synthesis::design_leaderless(&plant, 3.0).unwrap();
        let topo = Topology::path(2).unwrap();
        let trace = Trace {
            mode: Mode::Leaderless,
            agents: 2,
            state_dim: 2,
            adaptive_edges: topo.edges().to_vec(),
            initial_states: vec![0.0; 4],
            bound_initial: 0.0,
            samples: vec![],
            warnings: vec![],
        };
        assert!(matches!(
            analyze(&trace, &plant, &gains, &topo, &Tolerances::default()),
            Err(Error::Empty(_))
        ));
    }
}
