//! Protocol gain synthesis.
//!
//! For a translation factor `γ > 0` the certificate `P` solves
//!
//! ```text
//! P A + Aᵀ P − γ P B Bᵀ P + m Q = 0,   m = 2 (leaderless) or 3 (leader-follower)
//! ```
//!
//! and the protocol gains are `K_u = BᵀP`, `K_w = P B Bᵀ P`. The equality is
//! the boundary case of the sufficient Riccati inequality, so the returned
//! certificate satisfies the inequality with zero margin up to round-off.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matops::{care_solve_with, inverse, lambda_max, riccati_residual, sym_eig, Matrix};
use crate::tolerances::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Leaderless,
    LeaderFollower,
}

impl Mode {
    /// Weight on `Q` in the synthesis inequality.
    pub fn q_multiplier(self) -> f64 {
        match self {
            Mode::Leaderless => 2.0,
            Mode::LeaderFollower => 3.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Leaderless => "leaderless",
            Mode::LeaderFollower => "leader-follower",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "leaderless" => Ok(Mode::Leaderless),
            "leader-follower" => Ok(Mode::LeaderFollower),
            other => Err(Error::Config(format!("unknown mode '{other}'"))),
        }
    }
}

/// Agent dynamics `ẋ = A x + B u` with cost weight `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    a: Matrix,
    b: Matrix,
    q: Matrix,
}

impl Plant {
    pub fn new(a: Matrix, b: Matrix, q: Matrix) -> Result<Self> {
        let d = a.rows();
        if !a.is_square() {
            return Err(Error::Shape(format!("A must be square, got {:?}", a.shape())));
        }
        if b.rows() != d {
            return Err(Error::Shape(format!("B must have {d} rows, got {}", b.rows())));
        }
        if q.shape() != (d, d) {
            return Err(Error::Shape(format!("Q must be {d}x{d}, got {:?}", q.shape())));
        }
        q.ensure_symmetric(1e-10)?;
        let min_eig = sym_eig(&q)?.min();
        if min_eig <= 0.0 {
            return Err(Error::WeightNotPositiveDefinite { min_eigenvalue: min_eig });
        }
        Ok(Self { a, b, q: q.symmetrized() })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.cols()
    }

    pub fn bbt(&self) -> Matrix {
        &self.b * &self.b.transpose()
    }
}

/// Protocol gains with the certificate they were derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSet {
    pub mode: Mode,
    /// Translation factor `γ` (leaderless) or `γ_l` (leader-follower).
    pub gamma: f64,
    /// `P` (leaderless) or `R` (leader-follower).
    pub certificate: Matrix,
    /// `p × d`.
    pub k_u: Matrix,
    /// `d × d`, symmetric PSD.
    pub k_w: Matrix,
}

impl GainSet {
    /// Derives `K_u = BᵀC` and `K_w = C B Bᵀ C` from a symmetric certificate.
    pub fn from_certificate(mode: Mode, gamma: f64, certificate: Matrix, b: &Matrix) -> Result<Self> {
        certificate.ensure_symmetric(1e-10)?;
        if certificate.rows() != b.rows() {
            return Err(Error::Shape(format!(
                "certificate is {:?} but B has {} rows",
                certificate.shape(),
                b.rows()
            )));
        }
        let k_u = &b.transpose() * &certificate;
        let k_w = (&k_u.transpose() * &k_u).symmetrized();
        Ok(Self {
            mode,
            gamma,
            certificate,
            k_u,
            k_w,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.certificate.rows()
    }
}

/// NSD verdict and `λ_max` of `C A + Aᵀ C − γ C B Bᵀ C + m Q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateCheck {
    pub holds: bool,
    pub margin: f64,
}

pub fn design(plant: &Plant, gamma: f64, mode: Mode, tol: &Tolerances) -> Result<GainSet> {
    let q_hat = plant.q.scale(mode.q_multiplier());
    let p = care_solve_with(&plant.a, &plant.b, &q_hat, gamma, tol.care_options())?;
    let min_eig = sym_eig(&p)?.min();
    if min_eig <= 0.0 {
        return Err(Error::NotStabilizable(format!(
            "certificate is not positive definite (min eigenvalue {min_eig:.3e})"
        )));
    }
    let gains = GainSet::from_certificate(mode, gamma, p, &plant.b)?;
    let check = verify_riccati_certificate(&gains.certificate, plant, gamma, mode, tol)?;
    if !check.holds {
        return Err(Error::NotStabilizable(format!(
            "synthesised certificate violates the Riccati inequality (margin {:.3e})",
            check.margin
        )));
    }
    Ok(gains)
}

pub fn design_leaderless(plant: &Plant, gamma: f64) -> Result<GainSet> {
    design(plant, gamma, Mode::Leaderless, &Tolerances::default())
}

pub fn design_leader_follower(plant: &Plant, gamma_l: f64) -> Result<GainSet> {
    design(plant, gamma_l, Mode::LeaderFollower, &Tolerances::default())
}

/// Checks the Riccati inequality for a given certificate. The margin is
/// accepted up to `care_residual * (1 + ||C||²)`, the same scale as the CARE
/// residual bound.
pub fn verify_riccati_certificate(
    certificate: &Matrix,
    plant: &Plant,
    gamma: f64,
    mode: Mode,
    tol: &Tolerances,
) -> Result<CertificateCheck> {
    certificate.ensure_symmetric(1e-10)?;
    let form = riccati_residual(
        certificate,
        &plant.a,
        &plant.b,
        &plant.q.scale(mode.q_multiplier()),
        gamma,
    )
    .symmetrized();
    let margin = lambda_max(&form)?;
    let c = certificate.max_abs();
    Ok(CertificateCheck {
        holds: margin <= tol.care_residual * (1.0 + c * c),
        margin,
    })
}

/// Smallest γ in `[lo, hi]` for which `C` satisfies the Riccati inequality
/// exactly (`λ_max ≤ 0`, no tolerance). The form decreases in γ by a PSD term,
/// so bisection on the sign of the margin is valid.
pub fn certificate_gamma_threshold(certificate: &Matrix, plant: &Plant, mode: Mode, lo: f64, hi: f64) -> Result<f64> {
    let exact = Tolerances {
        care_residual: 0.0,
        ..Tolerances::default()
    };
    let holds = |g: f64| -> Result<bool> {
        Ok(verify_riccati_certificate(certificate, plant, g, mode, &exact)?.margin <= 0.0)
    };
    if !holds(hi)? {
        return Err(Error::InfeasibleRegulation(format!(
            "certificate is not valid for any gamma up to {hi}"
        )));
    }
    if holds(lo)? {
        return Ok(lo);
    }
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if holds(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Outcome of the gain-factor LMI test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmiCheck {
    pub xi_max_eigenvalue: f64,
    pub p_tilde_min_eigenvalue: f64,
    pub bbt_max_eigenvalue: f64,
    pub holds: bool,
}

/// Assembles `Ξ = [[A P̃ + P̃ Aᵀ − γ B Bᵀ, m P̃ Q], [m Q P̃, −m Q]]` and checks
/// `Ξ < 0`, `P̃ ⪰ δ⁻¹ I` and `λ_max(BBᵀ) ≤ 1`.
pub fn verify_lmi_corollary(
    p_tilde: &Matrix,
    plant: &Plant,
    gamma: f64,
    mode: Mode,
    delta: f64,
    tol: &Tolerances,
) -> Result<LmiCheck> {
    p_tilde.ensure_symmetric(1e-10)?;
    let m = mode.q_multiplier();
    let a = &plant.a;
    let ap = a * p_tilde;
    let top_left = &(&ap + &ap.transpose()) - &plant.bbt().scale(gamma);
    let top_right = (p_tilde * &plant.q).scale(m);
    let xi = Matrix::block2x2(
        &top_left,
        &top_right,
        &top_right.transpose(),
        &plant.q.scale(-m),
    )
    .symmetrized();
    let xi_max = lambda_max(&xi)?;
    let p_min = sym_eig(p_tilde)?.min();
    let bbt_max = lambda_max(&plant.bbt())?;
    let holds = xi_max < -tol.definiteness
        && p_min >= 1.0 / delta - tol.definiteness
        && bbt_max <= 1.0 + tol.definiteness;
    Ok(LmiCheck {
        xi_max_eigenvalue: xi_max,
        p_tilde_min_eigenvalue: p_min,
        bbt_max_eigenvalue: bbt_max,
        holds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegulationRequest {
    /// Gain factor: upper bound on `λ_max` of the certificate.
    pub delta: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    /// Enforce `λ_max(BBᵀ) ≤ 1` and return an LMI-verified certificate.
    pub strict: bool,
}

impl RegulationRequest {
    pub fn new(delta: f64) -> Self {
        Self {
            delta,
            gamma_min: 1e-3,
            gamma_max: 1e6,
            strict: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Regulation {
    pub gamma: f64,
    pub gains: GainSet,
    /// `λ_max(P(γ))` at the returned γ.
    pub certificate_lambda_max: f64,
    /// Set in relaxed mode when `λ_max(BBᵀ) > 1`: the same certificate solves
    /// the problem for `B / sqrt(s)` at translation factor `γ s`.
    pub input_rescale: Option<f64>,
    /// Present in strict mode.
    pub lmi: Option<LmiCheck>,
    /// Every `(γ, λ_max(P(γ)))` pair evaluated during the search.
    pub evaluations: Vec<(f64, f64)>,
}

const BISECTION_STEPS: usize = 60;
/// Inflation of `Q` used to obtain a strictly feasible LMI certificate.
const STRICT_Q_INFLATION: f64 = 1e-4;

/// Finds the smallest γ in the request bounds whose certificate satisfies
/// `λ_max(P(γ)) ≤ δ`, by doubling from `gamma_min` and then bisecting.
/// Monotone non-increase of `λ_max(P(γ))` is checked at every evaluation.
pub fn regulate_gain(
    plant: &Plant,
    request: &RegulationRequest,
    mode: Mode,
    tol: &Tolerances,
) -> Result<Regulation> {
    if !(request.delta > 0.0) {
        return Err(Error::Config(format!("gain factor must be positive, got {}", request.delta)));
    }
    if !(request.gamma_min > 0.0 && request.gamma_max >= request.gamma_min) {
        return Err(Error::Config(format!(
            "invalid translation-factor bounds [{}, {}]",
            request.gamma_min, request.gamma_max
        )));
    }
    let bbt_max = lambda_max(&plant.bbt())?;
    if request.strict && bbt_max > 1.0 + tol.definiteness {
        return Err(Error::Precondition { lambda_max: bbt_max });
    }

    // Strict mode searches on a slightly inflated Q so that the returned
    // certificate satisfies the LMI with a strict inequality.
    let search_plant = if request.strict {
        Plant {
            q: plant.q.scale(1.0 + STRICT_Q_INFLATION),
            ..plant.clone()
        }
    } else {
        plant.clone()
    };
    let mut evaluations: Vec<(f64, f64)> = Vec::new();
    let mut eval = |gamma: f64| -> Result<(f64, GainSet)> {
        let gains = design(&search_plant, gamma, mode, tol)?;
        let lam = lambda_max(&gains.certificate)?;
        evaluations.push((gamma, lam));
        Ok((lam, gains))
    };
    let monotone = |lo: (f64, f64), hi: (f64, f64)| -> Result<()> {
        // lo.0 < hi.0 must give lo.1 >= hi.1
        if hi.1 > lo.1 * (1.0 + 1e-9) + 1e-12 {
            return Err(Error::InfeasibleRegulation(format!(
                "lambda_max(P) increased from {:.6e} at gamma={:.6e} to {:.6e} at gamma={:.6e}; \
                 monotone bracketing is not valid for this plant",
                lo.1, lo.0, hi.1, hi.0
            )));
        }
        Ok(())
    };

    let mut gamma = request.gamma_min;
    let (mut lam, mut gains) = eval(gamma)?;
    if lam > request.delta {
        let mut lo = (gamma, lam);
        loop {
            if gamma >= request.gamma_max {
                return Err(Error::InfeasibleRegulation(format!(
                    "lambda_max(P) = {lam:.6e} > delta = {} even at gamma_max = {}",
                    request.delta, request.gamma_max
                )));
            }
            gamma = (2.0 * gamma).min(request.gamma_max);
            let (l, g) = eval(gamma)?;
            monotone(lo, (gamma, l))?;
            lam = l;
            gains = g;
            if lam <= request.delta {
                break;
            }
            lo = (gamma, lam);
        }
        let mut hi = (gamma, lam);
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo.0 + hi.0);
            if mid <= lo.0 || mid >= hi.0 {
                break;
            }
            let (l, g) = eval(mid)?;
            monotone(lo, (mid, l))?;
            monotone((mid, l), hi)?;
            if l <= request.delta {
                hi = (mid, l);
                gains = g;
            } else {
                lo = (mid, l);
            }
        }
        gamma = hi.0;
        lam = hi.1;
    }

    let input_rescale = (!request.strict && bbt_max > 1.0).then_some(bbt_max);
    let lmi = if request.strict {
        let p_tilde = inverse(&gains.certificate)?.symmetrized();
        let check = verify_lmi_corollary(&p_tilde, plant, gamma, mode, request.delta, tol)?;
        if !check.holds {
            return Err(Error::InfeasibleRegulation(format!(
                "LMI not strictly feasible at gamma = {gamma:.6e} (max eig of Xi {:.3e}, min eig of P~ {:.3e})",
                check.xi_max_eigenvalue, check.p_tilde_min_eigenvalue
            )));
        }
        Some(check)
    } else {
        None
    };

    Ok(Regulation {
        gamma,
        gains,
        certificate_lambda_max: lam,
        input_rescale,
        lmi,
        evaluations,
    })
}
