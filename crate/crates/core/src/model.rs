//! Single-site Jaynes-Cummings parameters, closed-form ladder and the dressed
//! operator algebra.
//!
//! Units are natural (ħ = 1). With Δ = ω_a − ω_c the Hamiltonian
//! `ω_c a†a + ω_a σz/2 + g(a†σ⁻ + aσ⁺)` splits into 2×2 blocks labelled by the
//! excitation number n, spanned by `|n,g⟩` and `|n−1,e⟩`.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_4;
use std::fmt;

use crate::error::{Error, Result};

/// Which side Δ = 0 is approached from. Decides the branch holding the ground state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetuningApproach {
    #[default]
    #[serde(alias = "above")]
    FromAbove,
    #[serde(alias = "below")]
    FromBelow,
}

impl DetuningApproach {
    pub fn sign(self) -> f64 {
        match self {
            DetuningApproach::FromAbove => 1.0,
            DetuningApproach::FromBelow => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    pub omega_c: f64,
    pub delta: f64,
    pub g: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_scale: Option<f64>,
    #[serde(default)]
    pub zero_detuning_sign: DetuningApproach,
}

impl SystemParams {
    pub fn new(omega_c: f64, delta: f64, g: f64) -> Result<Self> {
        let p = SystemParams {
            omega_c,
            delta,
            g,
            gamma_scale: None,
            zero_detuning_sign: DetuningApproach::FromAbove,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameterize by λ = g/Δ instead of Δ.
    pub fn from_lambda(omega_c: f64, lambda: f64, g: f64) -> Result<Self> {
        if lambda == 0.0 || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be finite and non-zero, got {lambda}"
            )));
        }
        Self::new(omega_c, g / lambda, g)
    }

    pub fn with_approach(mut self, approach: DetuningApproach) -> Self {
        self.zero_detuning_sign = approach;
        self
    }

    pub fn with_gamma_scale(mut self, gamma: f64) -> Result<Self> {
        self.gamma_scale = Some(gamma);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("omega_c", self.omega_c), ("delta", self.delta), ("g", self.g)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")));
            }
        }
        if self.g < 0.0 {
            return Err(Error::InvalidParameter(format!("g must be >= 0, got {}", self.g)));
        }
        if let Some(gamma) = self.gamma_scale {
            if !(gamma > 0.0 && gamma.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "gamma_scale must be positive, got {gamma}"
                )));
            }
        }
        Ok(())
    }

    /// σ = sign(Δ), falling back to the approach sign at Δ = 0.
    pub fn detuning_sign(&self) -> f64 {
        if self.delta > 0.0 {
            1.0
        } else if self.delta < 0.0 {
            -1.0
        } else {
            self.zero_detuning_sign.sign()
        }
    }

    pub fn omega_a(&self) -> f64 {
        self.omega_c + self.delta
    }

    pub fn lambda(&self) -> Result<f64> {
        if self.delta == 0.0 {
            return Err(Error::Domain("lambda = g/delta is undefined at delta = 0".into()));
        }
        Ok(self.g / self.delta)
    }

    /// √(Δ² + 4g²n), the splitting of manifold n.
    pub fn splitting(&self, n: u64) -> f64 {
        self.delta.hypot(2.0 * self.g * (n as f64).sqrt())
    }

    /// Display scale Γ (1 when unset).
    pub fn gamma(&self) -> f64 {
        self.gamma_scale.unwrap_or(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Minus,
    Plus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Minus => -1.0,
            Branch::Plus => 1.0,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Branch::Minus => '-',
            Branch::Plus => '+',
        }
    }
}

/// `|n,±⟩`. Equivalently the dressed Fock label `|n,g⟩_S` (Minus) or `|n−1,e⟩_S` (Plus).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DressedLabel {
    n: u64,
    branch: Branch,
}

impl DressedLabel {
    pub fn new(n: u64, branch: Branch) -> Result<Self> {
        if branch == Branch::Plus && n == 0 {
            return Err(Error::InvalidParameter("|0,+> is not a physical state".into()));
        }
        Ok(DressedLabel { n, branch })
    }

    pub fn minus(n: u64) -> Self {
        DressedLabel { n, branch: Branch::Minus }
    }

    pub fn plus(n: u64) -> Result<Self> {
        Self::new(n, Branch::Plus)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    /// Quanta in the dressed bosonic mode alone.
    pub fn bosons(&self) -> u64 {
        match self.branch {
            Branch::Minus => self.n,
            Branch::Plus => self.n - 1,
        }
    }
}

impl fmt::Display for DressedLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{},{}>", self.n, self.branch.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OperatorLabel {
    A,
    ADag,
    ADagA,
    SigmaMinus,
    SigmaPlus,
    SigmaZ,
    SigmaPlusMinus,
    SigmaMinusPlus,
    NTotal,
}

impl OperatorLabel {
    pub const ALL: [OperatorLabel; 9] = [
        OperatorLabel::A,
        OperatorLabel::ADag,
        OperatorLabel::ADagA,
        OperatorLabel::SigmaMinus,
        OperatorLabel::SigmaPlus,
        OperatorLabel::SigmaZ,
        OperatorLabel::SigmaPlusMinus,
        OperatorLabel::SigmaMinusPlus,
        OperatorLabel::NTotal,
    ];
}

/// Mixing angle θ(n) = ½·arctan(2λ√n), in [−π/4, π/4] with the sign of Δ.
pub fn mixing_angle(params: &SystemParams, n: u64) -> f64 {
    if n == 0 || params.g == 0.0 {
        return 0.0;
    }
    if params.delta == 0.0 {
        return params.zero_detuning_sign.sign() * FRAC_PI_4;
    }
    let sigma = params.detuning_sign();
    0.5 * (sigma * 2.0 * params.g * (n as f64).sqrt()).atan2(params.delta.abs())
}

/// `E_{n,±} = (n − ½)ω_c ± (σ/2)√(Δ² + 4g²n)`.
///
/// For Δ < 0 the Minus branch is the upper one, so the ladder stays continuous in λ.
pub fn eigenvalue(params: &SystemParams, label: &DressedLabel) -> f64 {
    let n = label.n;
    (n as f64 - 0.5) * params.omega_c
        + label.branch.sign() * 0.5 * params.detuning_sign() * params.splitting(n)
}

/// `(c, s)` with `|n,−⟩ = c|n,g⟩ − s|n−1,e⟩` and `|n,+⟩ = s|n,g⟩ + c|n−1,e⟩`.
pub fn eigenvector_coeffs(params: &SystemParams, n: u64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "eigenvector coefficients need n >= 1 (the n = 0 manifold has no + partner)".into(),
        ));
    }
    let theta = mixing_angle(params, n);
    Ok((theta.cos(), theta.sin()))
}

/// Action of a dressed operator on a dressed ladder state.
///
/// Returns `(0.0, None)` when the operator annihilates the state.
pub fn dressed_apply(op: OperatorLabel, label: &DressedLabel) -> (f64, Option<DressedLabel>) {
    use Branch::*;
    use OperatorLabel::*;
    let n = label.n;
    let nf = n as f64;
    let keep = |c: f64| if c == 0.0 { (0.0, None) } else { (c, Some(*label)) };
    match (op, label.branch) {
        (A, Minus) if n == 0 => (0.0, None),
        (A, Minus) => (nf.sqrt(), Some(DressedLabel::minus(n - 1))),
        (A, Plus) if n == 1 => (0.0, None),
        (A, Plus) => ((nf - 1.0).sqrt(), Some(DressedLabel { n: n - 1, branch: Plus })),
        (ADag, Minus) => ((nf + 1.0).sqrt(), Some(DressedLabel::minus(n + 1))),
        (ADag, Plus) => (nf.sqrt(), Some(DressedLabel { n: n + 1, branch: Plus })),
        (ADagA, Minus) => keep(nf),
        (ADagA, Plus) => keep(nf - 1.0),
        (SigmaMinus, Minus) => (0.0, None),
        (SigmaMinus, Plus) => (1.0, Some(DressedLabel::minus(n - 1))),
        (SigmaPlus, Minus) => (1.0, Some(DressedLabel { n: n + 1, branch: Plus })),
        (SigmaPlus, Plus) => (0.0, None),
        (SigmaZ, Minus) => (-1.0, Some(*label)),
        (SigmaZ, Plus) => (1.0, Some(*label)),
        (SigmaPlusMinus, Minus) => (0.0, None),
        (SigmaPlusMinus, Plus) => (1.0, Some(*label)),
        (SigmaMinusPlus, Minus) => (1.0, Some(*label)),
        (SigmaMinusPlus, Plus) => (0.0, None),
        (NTotal, _) => keep(nf),
    }
}
