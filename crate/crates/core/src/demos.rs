//! The two embedded example systems and their printed gain matrices.
//!
//! The interaction graphs of the original examples are only drawn, never
//! listed, so the demos use stand-in topologies. Initial states are not
//! published either; the demos draw them from a fixed seed.

use crate::error::{Error, Result};
use crate::graph::Topology;
use crate::matops::Matrix;
use crate::sim::{run, InitialStates, SimConfig, Trace};
use crate::synthesis::{design, regulate_gain, GainSet, Mode, Plant, RegulationRequest};
use crate::tolerances::Tolerances;
use crate::verify::{analyze, verify_printed_certificate, CostReport, PrintedCertificateReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Example {
    /// Leaderless, 2nd-order oscillator agents.
    One,
    /// Leader-follower, 4th-order agents.
    Two,
}

impl Example {
    pub fn as_str(self) -> &'static str {
        match self {
            Example::One => "example-1",
            Example::Two => "example-2",
        }
    }

    pub fn mode(self) -> Mode {
        match self {
            Example::One => Mode::Leaderless,
            Example::Two => Mode::LeaderFollower,
        }
    }
}

impl std::str::FromStr for Example {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "example-1" => Ok(Example::One),
            "example-2" => Ok(Example::Two),
            other => Err(Error::Config(format!("unknown demo '{other}' (expected example-1 or example-2)"))),
        }
    }
}

/// Printed totals of the original examples. Informational only: they depend
/// on unpublished initial states and are never asserted.
pub const PRINTED_J_R_STAR: f64 = 1694.6;
pub const PRINTED_J_L_STAR: f64 = 872.5;

/// Smallest γ for which the printed Example-1 certificate satisfies the
/// leaderless Riccati inequality (bisection, see tests).
pub const EXAMPLE1_CERT_GAMMA: f64 = 2.6498292316843797;
/// Smallest γ_l for which the printed Example-2 certificate satisfies the
/// leader-follower Riccati inequality.
pub const EXAMPLE2_CERT_GAMMA: f64 = 2.3880562143835276;

/// Translation factor used by the example-1 demo.
pub const EXAMPLE1_DEMO_GAMMA: f64 = EXAMPLE1_CERT_GAMMA;
/// Translation factor used by the example-2 demo. Follower-follower weights
/// do not adapt, so γ_l/2 has to stay below the smallest eigenvalue of the
/// pinned follower coupling (0.139 on the stand-in graph) for the unstable
/// leader mode to be tracked.
pub const EXAMPLE2_DEMO_GAMMA: f64 = 0.2;

pub const DEMO_SEED: u64 = 1;
pub const DEMO_BOX: (f64, f64) = (-1.0, 1.0);

const EX1_A: [f64; 4] = [0.0, 1.0, -100.0, 0.0];
const EX1_B: [f64; 2] = [0.0, 1.0];
const EX1_Q: [f64; 4] = [1.0, 0.0, 0.0, 2.0];
const EX1_P: [f64; 4] = [223.5978, 3.9324, 3.9324, 2.1307];
const EX1_K_U: [f64; 2] = [3.9324, 2.1307];
const EX1_K_W: [f64; 4] = [15.4638, 8.3788, 8.3788, 4.5399];
const EX1_K_W_CHECKED: [(usize, usize, f64); 4] = [(0, 0, 15.4638), (0, 1, 8.3788), (1, 0, 8.3788), (1, 1, 4.5399)];

#[rustfmt::skip]
const EX2_A: [f64; 16] = [
    1.0, 1.0, 0.0, 0.0,
    -30.0, -12.5, 30.0, 0.0,
    0.0, 0.5, 0.0, 1.0,
    16.0, 0.0, -16.0, 0.0,
];
const EX2_B: [f64; 4] = [1.0, 19.0, 0.0, 0.0];
#[rustfmt::skip]
const EX2_Q: [f64; 16] = [
    0.3, 0.3, 0.2, 0.1,
    0.3, 0.5, 0.1, 0.1,
    0.2, 0.1, 0.5, 0.15,
    0.1, 0.1, 0.15, 0.1,
];
#[rustfmt::skip]
const EX2_R: [f64; 16] = [
    7.7420, -0.1280, -6.0953, 0.6304,
    -0.1280, 0.0404, 0.1680, 0.0148,
    -6.0953, 0.1680, 7.0299, 0.1259,
    0.6304, 0.0148, 0.1259, 0.7516,
];
const EX2_K_U: [f64; 4] = [5.3100, 0.6396, -2.9033, 0.9116];
#[rustfmt::skip]
const EX2_K_W: [f64; 16] = [
    28.1961, 3.3963, -15.4165, 4.8406,
    3.3963, 0.4091, -1.8570, 0.5831,
    -15.4165, -1.8570, 8.4292, -2.6466,
    4.8406, 0.5831, -2.6466, 0.8310,
];
const EX2_K_W_CHECKED: [(usize, usize, f64); 1] = [(0, 0, 28.1961)];

fn mat(rows: usize, cols: usize, data: &[f64]) -> Matrix {
    Matrix::new(rows, cols, data.to_vec()).expect("embedded constants are finite")
}

pub fn plant(example: Example) -> Plant {
    let p = match example {
        Example::One => Plant::new(mat(2, 2, &EX1_A), mat(2, 1, &EX1_B), mat(2, 2, &EX1_Q)),
        Example::Two => Plant::new(mat(4, 4, &EX2_A), mat(4, 1, &EX2_B), mat(4, 4, &EX2_Q)),
    };
    p.expect("embedded plants are valid")
}

/// Printed `P` (example 1) or `R` (example 2).
pub fn printed_certificate(example: Example) -> Matrix {
    match example {
        Example::One => mat(2, 2, &EX1_P),
        Example::Two => mat(4, 4, &EX2_R),
    }
}

pub fn printed_k_u(example: Example) -> &'static [f64] {
    match example {
        Example::One => &EX1_K_U,
        Example::Two => &EX2_K_U,
    }
}

/// Full printed `K_w`.
pub fn printed_k_w(example: Example) -> Matrix {
    match example {
        Example::One => mat(2, 2, &EX1_K_W),
        Example::Two => mat(4, 4, &EX2_K_W),
    }
}

/// `K_w` entries that the certificate check compares (zero-based).
pub fn printed_k_w_checked_entries(example: Example) -> &'static [(usize, usize, f64)] {
    match example {
        Example::One => &EX1_K_W_CHECKED,
        Example::Two => &EX2_K_W_CHECKED,
    }
}

/// Fully specified demo run.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoSetup {
    pub example: Example,
    pub plant: Plant,
    pub gamma: f64,
    pub topology: Topology,
    pub sim: SimConfig,
    pub notes: Vec<String>,
}

pub fn setup(example: Example) -> DemoSetup {
    let initial = InitialStates::Seeded {
        seed: DEMO_SEED,
        low: DEMO_BOX.0,
        high: DEMO_BOX.1,
    };
    match example {
        Example::One => DemoSetup {
            example,
            plant: plant(example),
            gamma: EXAMPLE1_DEMO_GAMMA,
            topology: Topology::cycle(6).expect("valid"),
            sim: SimConfig::new(initial),
            notes: vec![
                "stand-in topology: 6-agent cycle 1-2-3-4-5-6-1, all initial weights 1".into(),
                format!("gamma = {EXAMPLE1_DEMO_GAMMA}: smallest value for which the printed P is a valid certificate"),
            ],
        },
        Example::Two => DemoSetup {
            example,
            plant: plant(example),
            gamma: EXAMPLE2_DEMO_GAMMA,
            topology: Topology::unweighted(6, &[(0, 1), (0, 2), (1, 2), (2, 3), (3, 4), (4, 5)], Some(0))
                .expect("valid"),
            sim: SimConfig {
                t_final: 10.0,
                ..SimConfig::new(initial)
            },
            notes: vec![
                "stand-in topology: leader 1 linked to followers 2 and 3, follower chain 2-3-4-5-6, all weights 1".into(),
                format!(
                    "gamma_l = {EXAMPLE2_DEMO_GAMMA}: below twice the smallest pinned coupling eigenvalue; \
                     the printed R needs gamma_l >= {EXAMPLE2_CERT_GAMMA}"
                ),
                "horizon 10 s: the tracking error decays at roughly 1 per second".into(),
            ],
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoOutcome {
    pub setup: DemoSetup,
    pub printed_check: PrintedCertificateReport,
    pub gains: GainSet,
    pub trace: Trace,
    pub report: CostReport,
}

/// Printed-gain cross-check, synthesis, simulation and analysis.
pub fn run_demo(example: Example, tol: &Tolerances) -> Result<DemoOutcome> {
    let setup = setup(example);
    let printed_check = verify_printed_certificate(example);
    let gains = design(&setup.plant, setup.gamma, example.mode(), tol)?;
    let trace = run(&setup.sim, &setup.plant, &gains, &setup.topology)?;
    let report = analyze(&trace, &setup.plant, &gains, &setup.topology, tol)?;
    Ok(DemoOutcome {
        setup,
        printed_check,
        gains,
        trace,
        report,
    })
}

/// Strict gain-factor regulation, which requires `λ_max(BBᵀ) ≤ 1`.
pub fn strict_regulation(example: Example, delta: f64, tol: &Tolerances) -> Result<f64> {
    let req = RegulationRequest {
        strict: true,
        ..RegulationRequest::new(delta)
    };
    regulate_gain(&plant(example), &req, example.mode(), tol).map(|r| r.gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::{certificate_gamma_threshold, verify_riccati_certificate};

    #[test]
    fn example1_gamma_threshold() {
        let p = printed_certificate(Example::One);
        let pl = plant(Example::One);
        let g = certificate_gamma_threshold(&p, &pl, Mode::Leaderless, 0.1, 100.0).unwrap();
        assert!((g - EXAMPLE1_CERT_GAMMA).abs() < 1e-9, "threshold {g}");
        let tol = Tolerances::default();
        assert!(!verify_riccati_certificate(&p, &pl, 2.6134, Mode::Leaderless, &tol).unwrap().holds);
        assert!(verify_riccati_certificate(&p, &pl, EXAMPLE1_CERT_GAMMA, Mode::Leaderless, &tol).unwrap().holds);
    }

    #[test]
    fn example2_gamma_threshold() {
        let r = printed_certificate(Example::Two);
        let pl = plant(Example::Two);
        let g = certificate_gamma_threshold(&r, &pl, Mode::LeaderFollower, 0.1, 1000.0).unwrap();
        assert!((g - EXAMPLE2_CERT_GAMMA).abs() < 1e-9, "threshold {g}");
    }

    #[test]
    fn example2_demo_gamma_respects_pinned_coupling() {
        let s = setup(Example::Two);
        let gains = design(&s.plant, s.gamma, Mode::LeaderFollower, &Tolerances::default()).unwrap();
        let dy = crate::sim::Dynamics::new(&s.plant, &gains, &s.topology).unwrap();
        let lmin = dy.follower_coupling_min_eigenvalue().unwrap().unwrap();
        assert!((lmin - 0.139).abs() < 1e-3, "{lmin}");
        assert!(EXAMPLE2_DEMO_GAMMA / 2.0 < lmin);
    }

    #[test]
    fn printed_k_w_is_outer_product_of_k_u() {
        for ex in [Example::One, Example::Two] {
            let ku = Matrix::new(1, printed_k_u(ex).len(), printed_k_u(ex).to_vec()).unwrap();
            let outer = &ku.transpose() * &ku;
            assert!(outer.max_abs_diff(&printed_k_w(ex)) < 2e-3, "{}", ex.as_str());
        }
    }

    #[test]
    fn stand_in_topologies() {
        let s1 = setup(Example::One);
        assert_eq!(s1.topology.edges().len(), 6);
        assert!(s1.topology.is_connected());
        let s2 = setup(Example::Two);
        assert_eq!(s2.topology.leader(), Some(0));
        assert!(s2.topology.leader_reachable());
    }

    #[test]
    fn strict_mode_rejects_example2() {
        match strict_regulation(Example::Two, 10.0, &Tolerances::default()) {
            Err(Error::Precondition { lambda_max }) => assert!((lambda_max - 362.0).abs() < 1e-9),
            other => panic!("unexpected {other:?}"),
        }
    }
}
