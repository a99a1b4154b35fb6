//! Browser bindings. Each export takes plain numbers and strings and returns
//! a JSON document; the `*_json` functions hold the logic so they can be
//! tested natively.

use agc_core::demos::{self, Example};
use agc_core::graph::Topology;
use agc_core::matops::{lambda_max, Matrix};
use agc_core::sim::{self, InitialStates, SimConfig};
use agc_core::synthesis::{design, verify_riccati_certificate};
use agc_core::tolerances::Tolerances;
use agc_core::verify::{analyze, verify_printed_certificate};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MAX_POINTS: usize = 400;
const MAX_AGENTS: usize = 12;
const MAX_HORIZON: f64 = 20.0;

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn parse_example(name: &str) -> Result<Example, String> {
    name.parse::<Example>().map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct PrintedEntry {
    label: String,
    computed: f64,
    printed: f64,
    ok: bool,
}

#[derive(Serialize)]
struct GainsView {
    example: &'static str,
    mode: String,
    gamma: f64,
    certificate: Vec<Vec<f64>>,
    k_u: Vec<Vec<f64>>,
    k_w: Vec<Vec<f64>>,
    certificate_margin: f64,
    certificate_lambda_max: f64,
    printed_check: Vec<PrintedEntry>,
    printed_check_pass: bool,
    cert_gamma: f64,
}

pub fn design_gains_json(example: &str, gamma: f64) -> Result<String, String> {
    let ex = parse_example(example)?;
    let tol = Tolerances::default();
    let plant = demos::plant(ex);
    let gains = design(&plant, gamma, ex.mode(), &tol).map_err(|e| e.to_string())?;
    let check = verify_riccati_certificate(&gains.certificate, &plant, gamma, ex.mode(), &tol).map_err(|e| e.to_string())?;
    let printed = verify_printed_certificate(ex);
    let view = GainsView {
        example: ex.as_str(),
        mode: ex.mode().to_string(),
        gamma,
        certificate: rows(&gains.certificate),
        k_u: rows(&gains.k_u),
        k_w: rows(&gains.k_w),
        certificate_margin: check.margin,
        certificate_lambda_max: lambda_max(&gains.certificate).map_err(|e| e.to_string())?,
        printed_check: printed
            .entries
            .iter()
            .map(|e| PrintedEntry {
                label: e.label.clone(),
                computed: e.computed,
                printed: e.printed,
                ok: e.ok,
            })
            .collect(),
        printed_check_pass: printed.pass,
        cert_gamma: match ex {
            Example::One => demos::EXAMPLE1_CERT_GAMMA,
            Example::Two => demos::EXAMPLE2_CERT_GAMMA,
        },
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct SimView {
    t: Vec<f64>,
    eta_norm: Vec<f64>,
    j_realized: Vec<f64>,
    j_bound: Vec<f64>,
    /// One series per adaptive edge.
    weights: Vec<Vec<f64>>,
    edge_labels: Vec<String>,
    realized_cost: f64,
    bound: f64,
    bound_holds: bool,
    consensus_achieved: bool,
    tracking_error: f64,
    final_weight_rate: f64,
    warnings: Vec<String>,
}

fn topology_for(example: Example, family: &str, agents: usize) -> Result<Topology, String> {
    if !(2..=MAX_AGENTS).contains(&agents) {
        return Err(format!("agents must be between 2 and {MAX_AGENTS}"));
    }
    let base = match family {
        "cycle" if agents >= 3 => Topology::cycle(agents),
        "cycle" => Topology::path(agents),
        "complete" => Topology::complete(agents),
        "path" => Topology::path(agents),
        "star" => Topology::star(agents),
        other => return Err(format!("unknown topology family '{other}'")),
    }
    .map_err(|e| e.to_string())?;
    match example {
        Example::One => Ok(base),
        Example::Two => base.with_leader(0).map_err(|e| e.to_string()),
    }
}

pub fn simulate_json(example: &str, gamma: f64, family: &str, agents: usize, seed: u32, t_final: f64) -> Result<String, String> {
    let ex = parse_example(example)?;
    if !(t_final > 0.0 && t_final <= MAX_HORIZON) {
        return Err(format!("horizon must be in (0, {MAX_HORIZON}] s"));
    }
    let tol = Tolerances::default();
    let plant = demos::plant(ex);
    let gains = design(&plant, gamma, ex.mode(), &tol).map_err(|e| e.to_string())?;
    let topo = topology_for(ex, family, agents)?;
    let mut cfg = SimConfig::new(InitialStates::Seeded {
        seed: u64::from(seed),
        low: demos::DEMO_BOX.0,
        high: demos::DEMO_BOX.1,
    });
    cfg.t_final = t_final;
    cfg.sample_stride = cfg.steps().div_ceil(MAX_POINTS).max(1);
    let trace = sim::run(&cfg, &plant, &gains, &topo).map_err(|e| e.to_string())?;
    let report = analyze(&trace, &plant, &gains, &topo, &tol).map_err(|e| e.to_string())?;

    let edges = &trace.adaptive_edges;
    let index: Vec<usize> = edges
        .iter()
        .map(|e| topo.edge_index(e.lo(), e.hi()).expect("adaptive edge in topology"))
        .collect();
    let view = SimView {
        t: trace.samples.iter().map(|s| s.state.t).collect(),
        eta_norm: trace.samples.iter().map(|s| s.eta_norm).collect(),
        j_realized: trace.samples.iter().map(|s| s.state.j_realized).collect(),
        j_bound: trace
            .samples
            .iter()
            .map(|s| trace.bound_initial + s.state.j_bound_integral)
            .collect(),
        weights: index
            .iter()
            .map(|&k| trace.samples.iter().map(|s| s.state.w[k]).collect())
            .collect(),
        edge_labels: edges.iter().map(|e| format!("w{}_{}", e.lo() + 1, e.hi() + 1)).collect(),
        realized_cost: report.realized_cost,
        bound: report.bound,
        bound_holds: report.bound_holds,
        consensus_achieved: report.consensus_achieved,
        tracking_error: report.tracking_error,
        final_weight_rate: report.final_weight_rate,
        warnings: report.warnings,
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct SweepPoint {
    gamma: f64,
    lambda_max: Option<f64>,
    k_u_norm: Option<f64>,
}

/// `λ_max(P(γ))` and `‖K_u‖` on a log-spaced grid; failed designs are `null`.
pub fn gamma_sweep_json(example: &str, lo: f64, hi: f64, points: usize) -> Result<String, String> {
    let ex = parse_example(example)?;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || !(2..=200).contains(&points) {
        return Err("need 0 < lo < hi and 2 to 200 points".into());
    }
    let tol = Tolerances::default();
    let plant = demos::plant(ex);
    let step = (hi / lo).ln() / (points - 1) as f64;
    let sweep: Vec<SweepPoint> = (0..points)
        .map(|i| {
            let gamma = lo * (step * i as f64).exp();
            let gains = design(&plant, gamma, ex.mode(), &tol).ok();
            SweepPoint {
                gamma,
                lambda_max: gains.as_ref().and_then(|g| lambda_max(&g.certificate).ok()),
                k_u_norm: gains.as_ref().map(|g| g.k_u.frobenius()),
            }
        })
        .collect();
    serde_json::to_string(&sweep).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn design_gains(example: &str, gamma: f64) -> Result<String, JsValue> {
    design_gains_json(example, gamma).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn simulate(example: &str, gamma: f64, family: &str, agents: usize, seed: u32, t_final: f64) -> Result<String, JsValue> {
    simulate_json(example, gamma, family, agents, seed, t_final).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn gamma_sweep(example: &str, lo: f64, hi: f64, points: usize) -> Result<String, JsValue> {
    gamma_sweep_json(example, lo, hi, points).map_err(|e| JsValue::from_str(&e))
}
