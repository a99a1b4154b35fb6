//! Fixed-step simulation of the adaptive protocols.
//!
//! The integrated vector is `[x (N·d, agent-major), w (adaptive edges),
//! j_realized, j_bound_integral]`, so the cost integrals are advanced by the
//! same RK4 scheme as the states.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{laplacian, Edge, Topology};
use crate::matops::{matrix_exp, sym_eig, Matrix};
use crate::synthesis::{GainSet, Mode, Plant};
use crate::tolerances::Tolerances;

/// Any state magnitude above this aborts the run.
pub const DIVERGENCE_LIMIT: f64 = 1e9;

/// Right-hand side of an autonomous-in-structure ODE `ẏ = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

impl<F: Fn(f64, &[f64], &mut [f64])> OdeSystem for (usize, F) {
    fn dim(&self) -> usize {
        self.0
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        (self.1)(t, y, dy)
    }
}

/// Classical fourth-order Runge-Kutta with reusable stage buffers.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    /// Advances `y` in place from `t` to `t + dt`.
    pub fn step<S: OdeSystem + ?Sized>(&mut self, sys: &S, t: f64, y: &mut [f64], dt: f64) {
        let n = y.len();
        sys.rhs(t, y, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * dt * self.k1[i];
        }
        sys.rhs(t + 0.5 * dt, &self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * dt * self.k2[i];
        }
        sys.rhs(t + 0.5 * dt, &self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = y[i] + dt * self.k3[i];
        }
        sys.rhs(t + dt, &self.tmp, &mut self.k4);
        for i in 0..n {
            y[i] += dt / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// One RK4 step, returning the new vector.
pub fn rk4_step<S: OdeSystem + ?Sized>(sys: &S, t: f64, y: &[f64], dt: f64) -> Vec<f64> {
    let mut out = y.to_vec();
    Rk4::new(y.len()).step(sys, t, &mut out, dt);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    /// Agent-major stacked states, `N·d`.
    pub x: Vec<f64>,
    /// One entry per adaptive edge, see [`Dynamics::adaptive_edges`].
    pub w: Vec<f64>,
    pub j_realized: f64,
    pub j_bound_integral: f64,
}

impl SimState {
    pub fn pack(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.x.len() + self.w.len() + 2);
        y.extend_from_slice(&self.x);
        y.extend_from_slice(&self.w);
        y.push(self.j_realized);
        y.push(self.j_bound_integral);
        y
    }

    pub fn unpack(t: f64, y: &[f64], n_x: usize) -> Self {
        let n_w = y.len() - n_x - 2;
        Self {
            t,
            x: y[..n_x].to_vec(),
            w: y[n_x..n_x + n_w].to_vec(),
            j_realized: y[n_x + n_w],
            j_bound_integral: y[n_x + n_w + 1],
        }
    }

    pub fn agent(&self, i: usize, d: usize) -> &[f64] {
        &self.x[i * d..(i + 1) * d]
    }
}

/// Coupled agent/weight/cost dynamics for one protocol.
#[derive(Debug, Clone)]
pub struct Dynamics {
    mode: Mode,
    n: usize,
    d: usize,
    a: Matrix,
    /// `B K_u`.
    bk: Matrix,
    k_w: Matrix,
    q: Matrix,
    certificate: Matrix,
    gamma: f64,
    leader: Option<usize>,
    /// Edges whose weight evolves.
    adaptive: Vec<Edge>,
    /// Follower-follower couplings with frozen weights (leader-follower only).
    frozen: Vec<(Edge, f64)>,
    initial_weights: Vec<f64>,
}

impl Dynamics {
    pub fn new(plant: &Plant, gains: &GainSet, topology: &Topology) -> Result<Self> {
        let d = plant.state_dim();
        if gains.state_dim() != d || gains.k_u.shape() != (plant.input_dim(), d) {
            return Err(Error::Shape(format!(
                "gains are for dimension {} but the plant has d={d}, p={}",
                gains.state_dim(),
                plant.input_dim()
            )));
        }
        let n = topology.agents();
        let mut adaptive = Vec::new();
        let mut initial_weights = Vec::new();
        let mut frozen = Vec::new();
        let leader = match gains.mode {
            Mode::Leaderless => {
                if !topology.is_connected() {
                    return Err(Error::Topology("leaderless mode requires a connected graph".into()));
                }
                adaptive.extend_from_slice(topology.edges());
                initial_weights.extend_from_slice(topology.initial_weights());
                None
            }
            Mode::LeaderFollower => {
                let l = topology
                    .leader()
                    .ok_or_else(|| Error::Config("leader-follower mode requires a leader".into()))?;
                if !topology.leader_reachable() {
                    return Err(Error::Topology("some follower has no path to the leader".into()));
                }
                for (e, &w) in topology.edges().iter().zip(topology.initial_weights()) {
                    if e.touches(l) {
                        adaptive.push(*e);
                        initial_weights.push(w);
                    } else {
                        frozen.push((*e, w));
                    }
                }
                Some(l)
            }
        };
        Ok(Self {
            mode: gains.mode,
            n,
            d,
            a: plant.a().clone(),
            bk: plant.b() * &gains.k_u,
            k_w: gains.k_w.clone(),
            q: plant.q().clone(),
            certificate: gains.certificate.clone(),
            gamma: gains.gamma,
            leader,
            adaptive,
            frozen,
            initial_weights,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn agents(&self) -> usize {
        self.n
    }

    pub fn state_dim(&self) -> usize {
        self.d
    }

    pub fn leader(&self) -> Option<usize> {
        self.leader
    }

    /// Leaderless: every edge. Leader-follower: the edges touching the leader.
    pub fn adaptive_edges(&self) -> &[Edge] {
        &self.adaptive
    }

    pub fn initial_weights(&self) -> &[f64] {
        &self.initial_weights
    }

    pub fn packed_dim(&self) -> usize {
        self.n * self.d + self.adaptive.len() + 2
    }

    fn agent<'y>(&self, y: &'y [f64], i: usize) -> &'y [f64] {
        &y[i * self.d..(i + 1) * self.d]
    }

    fn sub(&self, y: &[f64], k: usize, i: usize, out: &mut [f64]) {
        let (xk, xi) = (self.agent(y, k), self.agent(y, i));
        for j in 0..self.d {
            out[j] = xk[j] - xi[j];
        }
    }

    fn mean(&self, y: &[f64], skip: Option<usize>) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        let mut count = 0usize;
        for i in (0..self.n).filter(|&i| Some(i) != skip) {
            for (mj, xj) in m.iter_mut().zip(self.agent(y, i)) {
                *mj += xj;
            }
            count += 1;
        }
        m.iter_mut().for_each(|v| *v /= count as f64);
        m
    }

    /// `Σ_i (x_i − m)ᵀ M (x_i − m)` over the selected agents.
    fn centred_form(&self, y: &[f64], m: &Matrix, centre: &[f64], skip: Option<usize>) -> f64 {
        let mut v = vec![0.0; self.d];
        (0..self.n)
            .filter(|&i| Some(i) != skip)
            .map(|i| {
                for (j, vj) in v.iter_mut().enumerate() {
                    *vj = self.agent(y, i)[j] - centre[j];
                }
                m.quadratic_form(&v)
            })
            .sum()
    }

    fn mat_vec_into(m: &Matrix, v: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = m.row(r).iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }

    /// Initial quadratic term of the guaranteed-cost bound.
    pub fn bound_initial_term(&self, x0: &[f64]) -> f64 {
        match self.leader {
            None => {
                let m = self.mean(x0, None);
                self.centred_form(x0, &self.certificate, &m, None)
            }
            Some(l) => {
                let leader = self.agent(x0, l).to_vec();
                self.centred_form(x0, &self.certificate, &leader, Some(l))
            }
        }
    }

    /// `‖η‖` (leaderless) or the stacked follower-to-leader error norm.
    pub fn eta_norm(&self, x: &[f64]) -> f64 {
        let i = Matrix::identity(self.d);
        match self.leader {
            None => self.centred_form(x, &i, &self.mean(x, None), None).sqrt(),
            Some(l) => self.centred_form(x, &i, self.agent(x, l), Some(l)).sqrt(),
        }
    }

    /// Smallest eigenvalue of `L_ff + Λ_{w(0)}` (leader-follower only).
    pub fn follower_coupling_min_eigenvalue(&self) -> Result<Option<f64>> {
        let Some(l) = self.leader else { return Ok(None) };
        let followers: Vec<usize> = (0..self.n).filter(|&i| i != l).collect();
        let idx = |a: usize| followers.iter().position(|&f| f == a).unwrap();
        let mut m = Matrix::zeros(self.n - 1, self.n - 1);
        if !self.frozen.is_empty() {
            let (edges, weights): (Vec<_>, Vec<_>) = self
                .frozen
                .iter()
                .map(|(e, w)| (idx(e.lo()), idx(e.hi()), *w))
                .map(|(i, k, w)| ((i, k, w), w))
                .unzip();
            let sub = Topology::new(self.n - 1, &edges, None)?;
            m = laplacian(&sub, &weights)?;
        }
        for (e, &w) in self.adaptive.iter().zip(&self.initial_weights) {
            let f = idx(e.other(l).expect("adaptive edge touches leader"));
            m[(f, f)] += w;
        }
        Ok(Some(sym_eig(&m)?.min()))
    }

    /// Frozen follower-follower weights that differ from 1.
    pub fn non_unit_frozen_weights(&self) -> Vec<(Edge, f64)> {
        self.frozen.iter().copied().filter(|(_, w)| *w != 1.0).collect()
    }

    fn leaderless_rhs(&self, y: &[f64], dy: &mut [f64]) {
        let (n, d) = (self.n, self.d);
        let nx = n * d;
        let mut acc = vec![0.0; nx];
        let mut diff = vec![0.0; d];
        for (e_idx, e) in self.adaptive.iter().enumerate() {
            let (i, k) = (e.lo(), e.hi());
            let w = y[nx + e_idx];
            self.sub(y, k, i, &mut diff);
            for j in 0..d {
                acc[i * d + j] += w * diff[j];
                acc[k * d + j] -= w * diff[j];
            }
            dy[nx + e_idx] = self.k_w.quadratic_form(&diff);
        }
        let mut ax = vec![0.0; d];
        let mut bu = vec![0.0; d];
        for i in 0..n {
            Self::mat_vec_into(&self.a, self.agent(y, i), &mut ax);
            Self::mat_vec_into(&self.bk, &acc[i * d..(i + 1) * d], &mut bu);
            for j in 0..d {
                dy[i * d + j] = ax[j] + bu[j];
            }
        }
        let m = self.mean(y, None);
        let ne = self.adaptive.len();
        // (1/N) Σ_i Σ_k over ordered pairs = 2 Σ_i (x_i − x̄)ᵀ Q (x_i − x̄)
        dy[nx + ne] = 2.0 * self.centred_form(y, &self.q, &m, None);
        dy[nx + ne + 1] = self.gamma * self.centred_form(y, &self.k_w, &m, None);
    }

    fn leader_follower_rhs(&self, y: &[f64], dy: &mut [f64], l: usize) {
        let (n, d) = (self.n, self.d);
        let nx = n * d;
        let mut acc = vec![0.0; nx];
        let mut diff = vec![0.0; d];
        let mut j_fl = 0.0;
        for (e_idx, e) in self.adaptive.iter().enumerate() {
            let f = e.other(l).expect("adaptive edge touches leader");
            let w = y[nx + e_idx];
            self.sub(y, l, f, &mut diff);
            for j in 0..d {
                acc[f * d + j] += w * diff[j];
            }
            dy[nx + e_idx] = self.k_w.quadratic_form(&diff);
            j_fl += self.q.quadratic_form(&diff);
        }
        for (e, w) in &self.frozen {
            let (i, k) = (e.lo(), e.hi());
            self.sub(y, k, i, &mut diff);
            for j in 0..d {
                acc[i * d + j] += w * diff[j];
                acc[k * d + j] -= w * diff[j];
            }
        }
        let mut ax = vec![0.0; d];
        let mut bu = vec![0.0; d];
        for i in 0..n {
            Self::mat_vec_into(&self.a, self.agent(y, i), &mut ax);
            if i == l {
                dy[i * d..(i + 1) * d].copy_from_slice(&ax);
                continue;
            }
            Self::mat_vec_into(&self.bk, &acc[i * d..(i + 1) * d], &mut bu);
            for j in 0..d {
                dy[i * d + j] = ax[j] + bu[j];
            }
        }
        let ne = self.adaptive.len();
        let mf = self.mean(y, Some(l));
        // (1/(N−1)) Σ_i Σ_k over follower pairs = 2 Σ_f (x_f − x̄_f)ᵀ Q (x_f − x̄_f)
        let j_ff = 2.0 * self.centred_form(y, &self.q, &mf, Some(l));
        dy[nx + ne] = j_fl + j_ff;
        let leader = self.agent(y, l).to_vec();
        dy[nx + ne + 1] = self.gamma * self.centred_form(y, &self.k_w, &leader, Some(l));
    }
}

impl OdeSystem for Dynamics {
    fn dim(&self) -> usize {
        self.packed_dim()
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        match self.leader {
            None => self.leaderless_rhs(y, dy),
            Some(l) => self.leader_follower_rhs(y, dy, l),
        }
    }
}

/// Time derivative of a [`SimState`] under the leaderless protocol.
pub fn leaderless_rhs(state: &SimState, plant: &Plant, gains: &GainSet, topology: &Topology) -> Result<SimState> {
    if gains.mode != Mode::Leaderless {
        return Err(Error::Config("leaderless_rhs needs leaderless gains".into()));
    }
    state_rhs(state, &Dynamics::new(plant, gains, topology)?)
}

/// Time derivative of a [`SimState`] under the leader-follower protocol.
pub fn leader_follower_rhs(state: &SimState, plant: &Plant, gains: &GainSet, topology: &Topology) -> Result<SimState> {
    if gains.mode != Mode::LeaderFollower {
        return Err(Error::Config("leader_follower_rhs needs leader-follower gains".into()));
    }
    state_rhs(state, &Dynamics::new(plant, gains, topology)?)
}

pub fn state_rhs(state: &SimState, dynamics: &Dynamics) -> Result<SimState> {
    let y = state.pack();
    if y.len() != dynamics.packed_dim() {
        return Err(Error::Shape(format!(
            "state has {} coordinates, dynamics expect {}",
            y.len(),
            dynamics.packed_dim()
        )));
    }
    let mut dy = vec![0.0; y.len()];
    dynamics.rhs(state.t, &y, &mut dy);
    Ok(SimState::unpack(state.t, &dy, dynamics.n * dynamics.d))
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialStates {
    /// One vector of length `d` per agent.
    Explicit(Vec<Vec<f64>>),
    /// Uniform draws in `[low, high)` from a ChaCha8 stream.
    Seeded { seed: u64, low: f64, high: f64 },
}

impl InitialStates {
    /// Agent-major stacked initial state.
    pub fn resolve(&self, n: usize, d: usize) -> Result<Vec<f64>> {
        match self {
            InitialStates::Explicit(rows) => {
                if rows.len() != n {
                    return Err(Error::Config(format!("{} initial states for {n} agents", rows.len())));
                }
                let mut x = Vec::with_capacity(n * d);
                for (i, r) in rows.iter().enumerate() {
                    if r.len() != d {
                        return Err(Error::Config(format!(
                            "initial state of agent {} has length {}, expected {d}",
                            i + 1,
                            r.len()
                        )));
                    }
                    if let Some(v) = r.iter().find(|v| !v.is_finite()) {
                        return Err(Error::Config(format!("initial state of agent {} contains {v}", i + 1)));
                    }
                    x.extend_from_slice(r);
                }
                Ok(x)
            }
            &InitialStates::Seeded { seed, low, high } => {
                if !(low < high && low.is_finite() && high.is_finite()) {
                    return Err(Error::Config(format!("initial box [{low}, {high}) is empty")));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok((0..n * d).map(|_| rng.gen_range(low..high)).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_final: f64,
    /// Keep every `sample_stride`-th step; the final step is always kept.
    pub sample_stride: usize,
    pub initial: InitialStates,
}

impl SimConfig {
    pub fn new(initial: InitialStates) -> Self {
        Self {
            dt: 1e-3,
            t_final: 3.0,
            sample_stride: 10,
            initial,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= self.dt && self.t_final.is_finite()) {
            return Err(Error::Config(format!(
                "t_final = {} must be at least dt = {}",
                self.t_final, self.dt
            )));
        }
        if self.sample_stride == 0 {
            return Err(Error::Config("sample_stride must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of steps; the last one is shortened to land on `t_final`.
    pub fn steps(&self) -> usize {
        ((self.t_final / self.dt) - 1e-9).ceil().max(1.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub state: SimState,
    pub eta_norm: f64,
    /// Consensus function `x_c(t)` (leaderless) or the leader state.
    pub reference: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub mode: Mode,
    pub agents: usize,
    pub state_dim: usize,
    pub adaptive_edges: Vec<Edge>,
    pub initial_states: Vec<f64>,
    /// `x(0)ᵀ(L⊗C)x(0)` part of the guaranteed-cost bound.
    pub bound_initial: f64,
    pub samples: Vec<Sample>,
    pub warnings: Vec<String>,
}

impl Trace {
    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    pub fn first(&self) -> Option<&Sample> {
        self.samples.first()
    }
}

/// `e^{At}` applied to the average initial state.
pub fn consensus_function(a: &Matrix, initial_states: &[f64], n: usize, t: f64) -> Vec<f64> {
    let d = a.rows();
    let mut avg = vec![0.0; d];
    for i in 0..n {
        for j in 0..d {
            avg[j] += initial_states[i * d + j] / n as f64;
        }
    }
    matrix_exp(&a.scale(t)).mul_vec(&avg)
}

/// `√(xᵀ((I − 11ᵀ/N) ⊗ I) x)`.
pub fn disagreement_norm(x: &[f64], n: usize, d: usize) -> f64 {
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for j in 0..d {
            mean[j] += x[i * d + j] / n as f64;
        }
    }
    (0..n)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .map(|(i, j)| (x[i * d + j] - mean[j]).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Reference trajectory value at a sample.
pub fn reference_at(mode: Mode, a: &Matrix, x0: &[f64], x: &[f64], n: usize, leader: Option<usize>, t: f64) -> Vec<f64> {
    let d = a.rows();
    match (mode, leader) {
        (Mode::LeaderFollower, Some(l)) => x[l * d..(l + 1) * d].to_vec(),
        _ => consensus_function(a, x0, n, t),
    }
}

pub fn run(config: &SimConfig, plant: &Plant, gains: &GainSet, topology: &Topology) -> Result<Trace> {
    config.validate()?;
    let dynamics = Dynamics::new(plant, gains, topology)?;
    let (n, d) = (dynamics.agents(), dynamics.state_dim());
    let x0 = config.initial.resolve(n, d)?;
    let mut warnings = Vec::new();

    if let Some(min_eig) = dynamics.follower_coupling_min_eigenvalue()? {
        if min_eig <= 1e-9 {
            warnings.push(format!(
                "L_ff + Lambda_w(0) is not positive definite (min eigenvalue {min_eig:.3e}); \
                 the leader-follower bound argument does not apply"
            ));
        }
    }
    for (e, w) in dynamics.non_unit_frozen_weights() {
        warnings.push(format!(
            "follower-follower edge ({}, {}) has weight {w}; the leader-follower bound assumes 1",
            e.lo() + 1,
            e.hi() + 1
        ));
    }

    let init = SimState {
        t: 0.0,
        x: x0.clone(),
        w: dynamics.initial_weights().to_vec(),
        j_realized: 0.0,
        j_bound_integral: 0.0,
    };
    let sample = |state: SimState| -> Sample {
        let reference = reference_at(dynamics.mode(), plant.a(), &x0, &state.x, n, dynamics.leader(), state.t);
        Sample {
            eta_norm: dynamics.eta_norm(&state.x),
            reference,
            state,
        }
    };

    let steps = config.steps();
    let mut y = init.pack();
    let mut samples = vec![sample(init)];
    let mut rk = Rk4::new(y.len());
    let mut t = 0.0;
    for step in 1..=steps {
        let h = if step == steps { config.t_final - t } else { config.dt };
        rk.step(&dynamics, t, &mut y, h);
        t = if step == steps { config.t_final } else { step as f64 * config.dt };
        if let Some(bad) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                t,
                reason: format!("non-finite value in coordinate {bad}"),
            });
        }
        let peak = y[..n * d].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if peak > DIVERGENCE_LIMIT {
            return Err(Error::Divergence {
                t,
                reason: format!("state magnitude {peak:.3e} exceeds {DIVERGENCE_LIMIT:.0e}"),
            });
        }
        if step % config.sample_stride == 0 || step == steps {
            samples.push(sample(SimState::unpack(t, &y, n * d)));
        }
    }

    Ok(Trace {
        mode: dynamics.mode(),
        agents: n,
        state_dim: d,
        adaptive_edges: dynamics.adaptive_edges().to_vec(),
        bound_initial: dynamics.bound_initial_term(&x0),
        initial_states: x0,
        samples,
        warnings,
    })
}

/// Bound value together with the horizon-length warning, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundEvaluation {
    pub bound: f64,
    /// Bound integrand at the final sample.
    pub tail_integrand: f64,
    pub warning: Option<String>,
}

/// `x(0)ᵀ(L⊗C)x(0) + γ ∫ xᵀ(L⊗K_w)x dt` over the trace horizon.
pub fn guaranteed_cost_bound(trace: &Trace, dynamics: &Dynamics, tol: &Tolerances) -> Result<BoundEvaluation> {
    let last = trace.last().ok_or(Error::Empty("trace has no samples"))?;
    let y = last.state.pack();
    let mut dy = vec![0.0; y.len()];
    dynamics.rhs(last.state.t, &y, &mut dy);
    let tail = dy[dy.len() - 1];
    let warning = (tail >= tol.tail_integrand).then(|| {
        format!(
            "horizon too short: bound integrand is still {tail:.3e} per unit time at t = {}",
            last.state.t
        )
    });
    Ok(BoundEvaluation {
        bound: trace.bound_initial + last.state.j_bound_integral,
        tail_integrand: tail,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_plant() -> Plant {
        Plant::new(
            Matrix::from_rows(&[&[0.0]]),
            Matrix::from_rows(&[&[1.0]]),
            Matrix::from_rows(&[&[1.0]]),
        )
        .unwrap()
    }

    fn gains(mode: Mode, p: f64, gamma: f64) -> GainSet {
        GainSet::from_certificate(mode, gamma, Matrix::from_rows(&[&[p]]), &Matrix::from_rows(&[&[1.0]])).unwrap()
    }

    #[test]
    fn rk4_single_step_decay() {
        let sys = (1usize, |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = -y[0]);
        let y = rk4_step(&sys, 0.0, &[1.0], 0.1);
        // 1 − h + h²/2 − h³/6 + h⁴/24
        assert!((y[0] - 0.9048375).abs() < 1e-12);
        assert!((y[0] - (-0.1_f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn two_agent_leaderless_rhs() {
        let topo = Topology::new(2, &[(0, 1, 1.5)], None).unwrap();
        let g = gains(Mode::Leaderless, 2.0, 1.0);
        let s = SimState {
            t: 0.0,
            x: vec![1.0, 4.0],
            w: vec![1.5],
            j_realized: 0.0,
            j_bound_integral: 0.0,
        };
        let ds = leaderless_rhs(&s, &scalar_plant(), &g, &topo).unwrap();
        // e = 3: ė = −2 w p e = −18, ẇ = p² e² = 36
        assert!((ds.x[1] - ds.x[0] + 18.0).abs() < 1e-12);
        assert!((ds.x[0] + ds.x[1]).abs() < 1e-12);
        assert!((ds.w[0] - 36.0).abs() < 1e-12);
        // (1/2)(9 + 9) = 9; bound: γ Σ (x_i − x̄)ᵀ K_w (x_i − x̄) = 4 · 4.5
        assert!((ds.j_realized - 9.0).abs() < 1e-12);
        assert!((ds.j_bound_integral - 18.0).abs() < 1e-12);
    }

    #[test]
    fn two_agent_leader_follower_rhs() {
        let topo = Topology::new(2, &[(0, 1, 2.0)], Some(0)).unwrap();
        let g = gains(Mode::LeaderFollower, 3.0, 1.0);
        let s = SimState {
            t: 0.0,
            x: vec![1.0, -1.0],
            w: vec![2.0],
            j_realized: 0.0,
            j_bound_integral: 0.0,
        };
        let ds = leader_follower_rhs(&s, &scalar_plant(), &g, &topo).unwrap();
        // ξ = −2: ξ̇ = −w K_u ξ = 12, ẇ = K_w ξ² = 36
        assert_eq!(ds.x[0], 0.0);
        assert!((ds.x[1] - 12.0).abs() < 1e-12);
        assert!((ds.w[0] - 36.0).abs() < 1e-12);
        assert!((ds.j_realized - 4.0).abs() < 1e-12);
        assert!((ds.j_bound_integral - 36.0).abs() < 1e-12);
    }

    #[test]
    fn identical_states_stay_put() {
        let topo = Topology::cycle(4).unwrap();
        let g = gains(Mode::Leaderless, 1.0, 1.0);
        let cfg = SimConfig {
            t_final: 0.5,
            ..SimConfig::new(InitialStates::Explicit(vec![vec![0.7]; 4]))
        };
        let tr = run(&cfg, &scalar_plant(), &g, &topo).unwrap();
        let last = tr.last().unwrap();
        assert_eq!(last.state.j_realized, 0.0);
        assert_eq!(last.state.j_bound_integral, 0.0);
        assert_eq!(last.state.w, vec![1.0; 4]);
        assert_eq!(tr.bound_initial, 0.0);
        assert!(last.state.x.iter().all(|&v| v == 0.7));
    }

    #[test]
    fn disagreement_norm_examples() {
        assert!((disagreement_norm(&[0.0, 2.0], 2, 1) - 2.0_f64.sqrt()).abs() < 1e-15);
        assert_eq!(disagreement_norm(&[3.0, -1.0, 3.0, -1.0], 2, 2), 0.0);
        let shifted = disagreement_norm(&[5.0, 1.0, 7.0, 4.0], 2, 2);
        let base = disagreement_norm(&[0.0, 0.0, 2.0, 3.0], 2, 2);
        assert!((shifted - base).abs() < 1e-12);
    }

    #[test]
    fn consensus_function_examples() {
        let a = Matrix::from_rows(&[&[0.0, 1.0], &[-100.0, 0.0]]);
        let x0 = [1.0, 2.0, 3.0, -4.0];
        assert_eq!(consensus_function(&a, &x0, 2, 0.0), vec![2.0, -1.0]);
        let xc = consensus_function(&a, &x0, 2, std::f64::consts::PI / 10.0);
        assert!((xc[0] + 2.0).abs() < 1e-9 && (xc[1] - 1.0).abs() < 1e-9);
        let zero = Matrix::zeros(2, 2);
        assert_eq!(consensus_function(&zero, &x0, 2, 5.0), vec![2.0, -1.0]);
    }

    #[test]
    fn seeded_initial_states_are_reproducible() {
        let s = InitialStates::Seeded { seed: 7, low: -1.0, high: 1.0 };
        let a = s.resolve(3, 2).unwrap();
        assert_eq!(a, s.resolve(3, 2).unwrap());
        assert!(a.iter().all(|v| (-1.0..1.0).contains(v)));
        assert_ne!(a, InitialStates::Seeded { seed: 8, low: -1.0, high: 1.0 }.resolve(3, 2).unwrap());
    }

    #[test]
    fn last_step_lands_on_horizon() {
        let cfg = SimConfig {
            dt: 0.3,
            t_final: 1.0,
            sample_stride: 2,
            ..SimConfig::new(InitialStates::Explicit(vec![vec![0.0], vec![1.0]]))
        };
        let tr = run(&cfg, &scalar_plant(), &gains(Mode::Leaderless, 1.0, 1.0), &Topology::path(2).unwrap()).unwrap();
        let times: Vec<f64> = tr.samples.iter().map(|s| s.state.t).collect();
        assert_eq!(times.len(), 3);
        assert_eq!(*times.last().unwrap(), 1.0);
        assert!(times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn wrong_sign_gain_diverges() {
        let plant = Plant::new(
            Matrix::from_rows(&[&[1.0]]),
            Matrix::from_rows(&[&[1.0]]),
            Matrix::from_rows(&[&[1.0]]),
        )
        .unwrap();
        let mut g = gains(Mode::Leaderless, 2.0, 1.0);
        g.k_u = g.k_u.scale(-1.0);
        let cfg = SimConfig {
            t_final: 20.0,
            ..SimConfig::new(InitialStates::Explicit(vec![vec![0.0], vec![1.0]]))
        };
        let err = run(&cfg, &plant, &g, &Topology::path(2).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
    }

    #[test]
    fn leader_follower_requires_leader() {
        let g = gains(Mode::LeaderFollower, 1.0, 1.0);
        let err = Dynamics::new(&scalar_plant(), &g, &Topology::path(3).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn disconnected_follower_graph_warns() {
        let topo = Topology::star(3).unwrap().with_leader(0).unwrap();
        let dy = Dynamics::new(&scalar_plant(), &gains(Mode::LeaderFollower, 1.0, 1.0), &topo).unwrap();
        // followers isolated from each other but all pinned: Λ = I
        assert!((dy.follower_coupling_min_eigenvalue().unwrap().unwrap() - 1.0).abs() < 1e-12);
        let chain = Topology::unweighted(4, &[(0, 1), (1, 2), (2, 3)], Some(0)).unwrap();
        let dy = Dynamics::new(&scalar_plant(), &gains(Mode::LeaderFollower, 1.0, 1.0), &chain).unwrap();
        assert!(dy.follower_coupling_min_eigenvalue().unwrap().unwrap() > 0.0);
    }
}
