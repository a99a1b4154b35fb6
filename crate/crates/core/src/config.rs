//! TOML run configuration.
//!
//! ```toml
//! mode = "leaderless"            # or "leader-follower"
//!
//! [plant]
//! d = 2
//! p = 1
//! a = [0.0, 1.0, -100.0, 0.0]    # row-major, d x d
//! b = [0.0, 1.0]                 # row-major, d x p
//! q = [1.0, 0.0, 0.0, 2.0]       # row-major, d x d
//!
//! [synthesis]
//! gamma = 2.65                   # or: delta = 50.0 (gain-factor regulation)
//!
//! [topology]
//! agents = 3
//! edges = [[1, 2], [2, 3]]       # 1-based agent labels
//! weights = [1.0, 1.0]           # optional, default 1
//! leader = 1                     # leader-follower only
//!
//! [initial]
//! seed = 1                       # or: states = [[...], [...], [...]]
//! low = -1.0
//! high = 1.0
//!
//! [sim]
//! dt = 0.001
//! t_final = 3.0
//! sample_stride = 10
//!
//! [tolerances]                   # optional overrides
//! consensus_rel = 0.01
//! ```
//!
//! Agents are labelled from 1 in the file and from 0 everywhere else.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Topology;
use crate::matops::Matrix;
use crate::sim::{InitialStates, SimConfig};
use crate::synthesis::{design, regulate_gain, GainSet, Mode, Plant, Regulation, RegulationRequest};
use crate::tolerances::Tolerances;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub plant: PlantSection,
    pub synthesis: SynthesisSection,
    pub topology: TopologySection,
    pub initial: InitialSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default, skip_serializing_if = "ToleranceOverrides::is_empty")]
    pub tolerances: ToleranceOverrides,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub d: usize,
    pub p: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_max: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    pub agents: usize,
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leader: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub low: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub high: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    pub t_final: f64,
    pub sample_stride: usize,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_final: 3.0,
            sample_stride: 10,
        }
    }
}

/// Per-field overrides applied on top of the active tolerance profile.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sign_rel: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sign_max_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub care_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub definiteness: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consensus_rel: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_rel: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight_monotone: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_integrand: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tracking: Option<f64>,
}

impl ToleranceOverrides {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }

    pub fn apply(&self, base: Tolerances) -> Tolerances {
        Tolerances {
            sign_rel: self.sign_rel.unwrap_or(base.sign_rel),
            sign_max_iterations: self.sign_max_iterations.unwrap_or(base.sign_max_iterations),
            care_residual: self.care_residual.unwrap_or(base.care_residual),
            definiteness: self.definiteness.unwrap_or(base.definiteness),
            consensus_rel: self.consensus_rel.unwrap_or(base.consensus_rel),
            bound_rel: self.bound_rel.unwrap_or(base.bound_rel),
            weight_monotone: self.weight_monotone.unwrap_or(base.weight_monotone),
            weight_rate: self.weight_rate.unwrap_or(base.weight_rate),
            tail_integrand: self.tail_integrand.unwrap_or(base.tail_integrand),
            tracking: self.tracking.unwrap_or(base.tracking),
        }
    }
}

/// How the translation factor is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GainChoice {
    Gamma(f64),
    Regulate(RegulationRequest),
}

/// Synthesised gains, with the regulation details when a gain factor was given.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthesized {
    pub gains: GainSet,
    pub regulation: Option<Regulation>,
}

fn matrix_field(name: &str, rows: usize, cols: usize, data: &[f64]) -> Result<Matrix> {
    if data.len() != rows * cols {
        return Err(Error::Config(format!(
            "{name}: expected {} entries ({rows}x{cols}, row-major), got {}",
            rows * cols,
            data.len()
        )));
    }
    Matrix::new(rows, cols, data.to_vec()).map_err(|e| Error::Config(format!("{name}: {e}")))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Checks everything that does not need numerics.
    pub fn validate(&self) -> Result<()> {
        let pl = &self.plant;
        if pl.d == 0 || pl.p == 0 {
            return Err(Error::Config("plant.d and plant.p must be positive".into()));
        }
        matrix_field("plant.a", pl.d, pl.d, &pl.a)?;
        matrix_field("plant.b", pl.d, pl.p, &pl.b)?;
        matrix_field("plant.q", pl.d, pl.d, &pl.q)?;
        self.gain_choice()?;
        let topo = &self.topology;
        if let Some(w) = &topo.weights {
            if w.len() != topo.edges.len() {
                return Err(Error::Config(format!(
                    "topology.weights: {} weights for {} edges",
                    w.len(),
                    topo.edges.len()
                )));
            }
        }
        for e in &topo.edges {
            if e[0] == 0 || e[1] == 0 || e[0] > topo.agents || e[1] > topo.agents {
                return Err(Error::Config(format!(
                    "topology.edges: [{}, {}] outside 1..={}",
                    e[0], e[1], topo.agents
                )));
            }
        }
        match (self.mode, topo.leader) {
            (Mode::LeaderFollower, None) => {
                return Err(Error::Config("topology.leader is required in leader-follower mode".into()))
            }
            (Mode::Leaderless, Some(_)) => {
                return Err(Error::Config("topology.leader is only valid in leader-follower mode".into()))
            }
            (_, Some(l)) if l == 0 || l > topo.agents => {
                return Err(Error::Config(format!("topology.leader: {l} outside 1..={}", topo.agents)))
            }
            _ => {}
        }
        self.initial_states()?;
        self.sim_config()?.validate()
    }

    pub fn plant(&self) -> Result<Plant> {
        let pl = &self.plant;
        Plant::new(
            matrix_field("plant.a", pl.d, pl.d, &pl.a)?,
            matrix_field("plant.b", pl.d, pl.p, &pl.b)?,
            matrix_field("plant.q", pl.d, pl.d, &pl.q)?,
        )
    }

    pub fn topology(&self) -> Result<Topology> {
        let t = &self.topology;
        let edges: Vec<(usize, usize, f64)> = t
            .edges
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let w = t.weights.as_ref().map_or(1.0, |w| w[i]);
                (e[0].wrapping_sub(1), e[1].wrapping_sub(1), w)
            })
            .collect();
        Topology::new(t.agents, &edges, t.leader.map(|l| l - 1))
    }

    pub fn initial_states(&self) -> Result<InitialStates> {
        let i = &self.initial;
        match (&i.states, i.seed) {
            (Some(states), None) if i.low.is_none() && i.high.is_none() => Ok(InitialStates::Explicit(states.clone())),
            (None, Some(seed)) => Ok(InitialStates::Seeded {
                seed,
                low: i.low.unwrap_or(-1.0),
                high: i.high.unwrap_or(1.0),
            }),
            _ => Err(Error::Config(
                "initial: give either `states` or `seed` (with optional `low`/`high`), not both".into(),
            )),
        }
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        Ok(SimConfig {
            dt: self.sim.dt,
            t_final: self.sim.t_final,
            sample_stride: self.sim.sample_stride,
            initial: self.initial_states()?,
        })
    }

    pub fn gain_choice(&self) -> Result<GainChoice> {
        let s = &self.synthesis;
        match (s.gamma, s.delta) {
            (Some(g), None) => {
                if !(g > 0.0 && g.is_finite()) {
                    return Err(Error::Config(format!("synthesis.gamma must be positive, got {g}")));
                }
                if s.strict || s.gamma_min.is_some() || s.gamma_max.is_some() {
                    return Err(Error::Config(
                        "synthesis: strict/gamma_min/gamma_max only apply with delta".into(),
                    ));
                }
                Ok(GainChoice::Gamma(g))
            }
            (None, Some(delta)) => {
                let base = RegulationRequest::new(delta);
                Ok(GainChoice::Regulate(RegulationRequest {
                    delta,
                    gamma_min: s.gamma_min.unwrap_or(base.gamma_min),
                    gamma_max: s.gamma_max.unwrap_or(base.gamma_max),
                    strict: s.strict,
                }))
            }
            _ => Err(Error::Config("synthesis: give exactly one of `gamma` or `delta`".into())),
        }
    }

    /// Active profile plus the `[tolerances]` overrides.
    pub fn tolerances(&self) -> Result<Tolerances> {
        Ok(self.tolerances.apply(Tolerances::from_env()?))
    }

    pub fn synthesize(&self, tol: &Tolerances) -> Result<Synthesized> {
        let plant = self.plant()?;
        match self.gain_choice()? {
            GainChoice::Gamma(g) => Ok(Synthesized {
                gains: design(&plant, g, self.mode, tol)?,
                regulation: None,
            }),
            GainChoice::Regulate(req) => {
                let r = regulate_gain(&plant, &req, self.mode, tol)?;
                Ok(Synthesized {
                    gains: r.gains.clone(),
                    regulation: Some(r),
                })
            }
        }
    }

    /// Copy with the seed shifted by `offset` (ensemble runs).
    pub fn with_seed_offset(&self, offset: u64) -> Result<Self> {
        let mut c = self.clone();
        match c.initial.seed.as_mut() {
            Some(s) => *s = s.wrapping_add(offset),
            None if offset == 0 => {}
            None => return Err(Error::Config("ensemble runs need a seeded [initial] section".into())),
        }
        Ok(c)
    }
}
