//! k-body interaction coefficients of the dressed ladder.
//!
//! In the dressed basis the ladder energy of `|n,±⟩` is a sum of normally ordered
//! interactions `C_k^± (ã†)^k ã^k / k!`. The coefficients are finite differences of
//! the splitting `p ↦ √(Δ² + 4g²p)`:
//!
//! ```text
//! C_k^- = −(σ/2) Σ_p binom(k,p)(−1)^{k+p} √(Δ² + 4g²p)
//! C_k^+ = +(σ/2) Σ_p binom(k,p)(−1)^{k+p} √(Δ² + 4g²(p+1))
//! ```
//!
//! with σ the detuning sign. Large k cancels about k bits, which is handled by the
//! fixed-point kernel in [`crate::precision`].

use num_bigint::BigUint;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Branch, DetuningApproach, SystemParams};
use crate::precision::{
    alternating_sum, alternating_sums, binomial_row, forward_differences, refine, weighted_total,
    FixedSum, LinearRadicand, PrecisionPolicy,
};

/// Largest k tried in plain double precision before switching to the fixed-point kernel.
pub const F64_MAX_K: u64 = 24;

// the f64 path is kept only if its error bound is below this fraction of the sum
const F64_REL_TARGET: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coefficient {
    pub k: u64,
    pub branch: Branch,
    pub value: f64,
    /// −1, 0 or +1; exact even when `value` underflows.
    pub sign: i8,
    /// log2 |C_k|, finite whenever the coefficient is non-zero.
    pub log2_abs: f64,
    /// 53 for the double-precision path, otherwise the fractional bits used.
    pub precision_bits: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientTable {
    pub branch: Branch,
    pub k_max: u64,
    pub values: Vec<f64>,
    pub signs: Vec<i8>,
    pub log2_abs: Vec<f64>,
    pub precision_bits: u32,
}

impl CoefficientTable {
    pub fn get(&self, k: u64) -> Option<f64> {
        self.values.get(k as usize).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectiveOnSite {
    pub branch: Branch,
    pub omega_eff: f64,
    pub u_eff: f64,
    pub e0: f64,
}

fn shift(branch: Branch) -> u64 {
    match branch {
        Branch::Minus => 0,
        Branch::Plus => 1,
    }
}

/// Overall factor multiplying the alternating sum.
fn prefactor(params: &SystemParams, branch: Branch) -> f64 {
    0.5 * branch.sign() * params.detuning_sign()
}

fn sign_of(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn zero_coefficient(k: u64, branch: Branch, bits: u32) -> Coefficient {
    Coefficient { k, branch, value: 0.0, sign: 0, log2_abs: f64::NEG_INFINITY, precision_bits: bits }
}

fn from_fixed(k: u64, branch: Branch, pre: f64, sum: &FixedSum) -> Coefficient {
    let value = pre * sum.to_f64();
    let sign = sum.certain_sign() * sign_of(pre);
    Coefficient { k, branch, value, sign, log2_abs: sum.log2_abs() - 1.0, precision_bits: sum.bits }
}

/// Double-precision alternating sum with a running error bound.
fn f64_sum(rad: &LinearRadicand, k: u64, shift: u64) -> (f64, f64) {
    let mut b = 1.0f64;
    let mut sum = 0.0;
    let mut mass = 0.0;
    for p in 0..=k {
        let term = b * rad.root_f64(p + shift);
        if (k + p) % 2 == 1 {
            sum -= term;
        } else {
            sum += term;
        }
        mass += term;
        b = b * (k - p) as f64 / (p + 1) as f64;
    }
    (sum, (k as f64 + 4.0) * f64::EPSILON * mass)
}

/// `C_k^±` with the default precision policy.
pub fn coeff_exact(params: &SystemParams, k: u64, branch: Branch) -> Result<f64> {
    coefficient(params, k, branch, &PrecisionPolicy::default()).map(|c| c.value)
}

/// `C_k^±` with precision metadata.
pub fn coefficient(
    params: &SystemParams,
    k: u64,
    branch: Branch,
    policy: &PrecisionPolicy,
) -> Result<Coefficient> {
    params.validate()?;
    let pre = prefactor(params, branch);
    let rad = LinearRadicand::splitting(params.delta, params.g);
    if params.g == 0.0 && k >= 1 {
        return Ok(zero_coefficient(k, branch, 53));
    }
    if k <= F64_MAX_K && policy.floor_bits == 0 {
        let (s, bound) = f64_sum(&rad, k, shift(branch));
        if bound <= F64_REL_TARGET * s.abs() || (s == 0.0 && bound == 0.0) {
            let value = pre * s;
            return Ok(Coefficient {
                k,
                branch,
                value,
                sign: sign_of(value),
                log2_abs: value.abs().log2(),
                precision_bits: 53,
            });
        }
    }
    let (sum, _) = refine(
        policy,
        k,
        |bits| alternating_sum(&rad, k, shift(branch), bits),
        |s| s.deficit(policy.rel_bits),
    )?;
    Ok(from_fixed(k, branch, pre, &sum))
}

/// Same coefficient through a forward-difference table instead of binomial sums.
pub fn coeff_forward_difference(
    params: &SystemParams,
    k: u64,
    branch: Branch,
    policy: &PrecisionPolicy,
) -> Result<Coefficient> {
    params.validate()?;
    if params.g == 0.0 && k >= 1 {
        return Ok(zero_coefficient(k, branch, 53));
    }
    let rad = LinearRadicand::splitting(params.delta, params.g);
    let (table, _) = refine(
        policy,
        k,
        |bits| forward_differences(&rad, k, shift(branch), bits),
        |t| t.last().and_then(|s| s.deficit(policy.rel_bits)),
    )?;
    Ok(from_fixed(k, branch, prefactor(params, branch), table.last().expect("k + 1 entries")))
}

/// True when `√(Δ² + 4g²q)` is exactly zero.
fn exactly_zero_root(params: &SystemParams, q: u64) -> bool {
    params.delta == 0.0 && (params.g == 0.0 || q == 0)
}

/// `C_0 … C_{k_max}` sharing one set of roots; always uses the fixed-point kernel.
pub fn coefficient_table(params: &SystemParams, branch: Branch, k_max: u64) -> Result<CoefficientTable> {
    coefficient_table_with(params, branch, k_max, &PrecisionPolicy::default())
}

pub fn coefficient_table_with(
    params: &SystemParams,
    branch: Branch,
    k_max: u64,
    policy: &PrecisionPolicy,
) -> Result<CoefficientTable> {
    params.validate()?;
    let pre = prefactor(params, branch);
    let rad = LinearRadicand::splitting(params.delta, params.g);
    let sh = shift(branch);
    // entries known to vanish exactly cannot be resolved to a relative tolerance
    let known_zero = |k: u64| {
        if k == 0 {
            exactly_zero_root(params, sh)
        } else {
            params.g == 0.0
        }
    };
    let (sums, bits) = refine(
        policy,
        k_max,
        |bits| alternating_sums(&rad, k_max, sh, bits),
        |sums| {
            let mut need: Option<u32> = None;
            for (k, s) in sums.iter().enumerate() {
                if known_zero(k as u64) {
                    continue;
                }
                match s.deficit(policy.rel_bits) {
                    None => {}
                    Some(0) => return Some(0),
                    Some(d) => need = Some(need.map_or(d, |n| n.max(d))),
                }
            }
            need
        },
    )?;
    let coeffs: Vec<Coefficient> = sums
        .iter()
        .enumerate()
        .map(|(k, s)| {
            if known_zero(k as u64) {
                zero_coefficient(k as u64, branch, bits)
            } else {
                from_fixed(k as u64, branch, pre, s)
            }
        })
        .collect();
    Ok(CoefficientTable {
        branch,
        k_max,
        values: coeffs.iter().map(|c| c.value).collect(),
        signs: coeffs.iter().map(|c| c.sign).collect(),
        log2_abs: coeffs.iter().map(|c| c.log2_abs).collect(),
        precision_bits: bits,
    })
}

/// Resonant `C_k^- = ±(−1)^k [Σ_{p=1}^k binom(k,p)(−1)^{p+1}√p] g`.
pub fn coeff_resonant(g: f64, k: u64, approach: DetuningApproach) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter("resonant form needs k >= 1".into()));
    }
    if !(g >= 0.0 && g.is_finite()) {
        return Err(Error::InvalidParameter(format!("g must be >= 0, got {g}")));
    }
    let bracket = resonant_bracket(k, &PrecisionPolicy::default())?;
    let parity = if k % 2 == 1 { -1.0 } else { 1.0 };
    Ok(approach.sign() * parity * bracket * g)
}

/// `Σ_{p=1}^k binom(k,p)(−1)^{p+1}√p`, positive for every k.
pub fn resonant_bracket(k: u64, policy: &PrecisionPolicy) -> Result<f64> {
    let rad = LinearRadicand::new(0.0, 1.0);
    if k <= F64_MAX_K {
        let mut b = 1.0f64;
        let (mut sum, mut mass) = (0.0, 0.0);
        for p in 1..=k {
            b = b * (k - p + 1) as f64 / p as f64;
            let term = b * (p as f64).sqrt();
            sum += if p % 2 == 1 { term } else { -term };
            mass += term;
        }
        if (k as f64 + 4.0) * f64::EPSILON * mass <= F64_REL_TARGET * sum.abs() {
            return Ok(sum);
        }
    }
    // the bracket is −(−1)^k times the k-th difference of √p at 0
    let (s, _) = refine(policy, k, |bits| alternating_sum(&rad, k, 0, bits), |s| s.deficit(policy.rel_bits))?;
    let v = s.to_f64();
    Ok(if k % 2 == 1 { v } else { -v })
}

/// binom(½, k) by the recurrence binom(½,k) = binom(½,k−1)(½ − k + 1)/k.
pub fn binom_half(k: u64) -> f64 {
    let mut b = 1.0;
    for j in 1..=k {
        b *= (0.5 - j as f64 + 1.0) / j as f64;
    }
    b
}

/// Leading dispersive term `−k!·binom(½,k)·(2λ)^{2k−1}·g`, valid for 0 < λ < √(1/4k).
pub fn coeff_dispersive(g: f64, lambda: f64, k: u64) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter("dispersive form needs k >= 1".into()));
    }
    let bound = (1.0 / (4.0 * k as f64)).sqrt();
    if !(lambda > 0.0 && lambda < bound) {
        return Err(Error::Domain(format!(
            "dispersive form needs 0 < lambda < sqrt(1/(4k)) = {bound} for k = {k}, got lambda = {lambda}"
        )));
    }
    // k!·binom(½,k)·(2λ)^{2k} accumulated factor by factor so nothing overflows
    let x = 4.0 * lambda * lambda;
    let mut prod = 1.0;
    for j in 1..=k {
        prod *= (0.5 - j as f64 + 1.0) * x;
    }
    Ok(-prod / (2.0 * lambda) * g)
}

/// `g/√(π ln k)`, the large-k magnitude of the resonant coefficients.
pub fn asymptotic_resonant_magnitude(g: f64, k: f64) -> Result<f64> {
    if k.is_nan() || k < 2.0 {
        return Err(Error::InvalidParameter(format!("asymptotic form needs k >= 2, got {k}")));
    }
    Ok(g / (std::f64::consts::PI * k.ln()).sqrt())
}

pub fn effective_onsite_n2(params: &SystemParams, branch: Branch) -> Result<EffectiveOnSite> {
    let c0 = coeff_exact(params, 0, branch)?;
    let c1 = coeff_exact(params, 1, branch)?;
    let c2 = coeff_exact(params, 2, branch)?;
    Ok(EffectiveOnSite {
        branch,
        omega_eff: params.omega_c + c1,
        u_eff: c2,
        e0: c0 + branch.sign() * params.omega_c / 2.0,
    })
}

/// `Σ_{k ≤ k_max} binom(n_b, k) C_k^±` on `|n,±⟩`, where n_b counts dressed bosons.
///
/// The combination is formed exactly before rounding, so the result is accurate to the
/// policy's relative target independent of the cancellation inside each C_k.
pub fn ladder_energy_from_kbody(params: &SystemParams, n: u64, branch: Branch, k_max: u64) -> Result<f64> {
    ladder_energy_with(params, n, branch, k_max, &PrecisionPolicy::default())
}

pub fn ladder_energy_with(
    params: &SystemParams,
    n: u64,
    branch: Branch,
    k_max: u64,
    policy: &PrecisionPolicy,
) -> Result<f64> {
    params.validate()?;
    if k_max < n {
        return Err(Error::InvalidParameter(format!("k_max = {k_max} must be >= n = {n}")));
    }
    let n_b = match branch {
        Branch::Minus => n,
        Branch::Plus if n == 0 => {
            return Err(Error::InvalidParameter("|0,+> is not a physical state".into()))
        }
        Branch::Plus => n - 1,
    };
    if exactly_zero_root(params, n) {
        return Ok(0.0);
    }
    let rad = LinearRadicand::splitting(params.delta, params.g);
    let sh = shift(branch);
    let weights = binomial_row(n_b);
    let (total, _) = refine(
        policy,
        n_b,
        |bits| {
            let sums = alternating_sums(&rad, n_b, sh, bits);
            // binom(n_b, k) = 0 for n_b < k <= k_max
            let parts: Vec<(BigUint, FixedSum)> = weights.iter().cloned().zip(sums).collect();
            weighted_total(&parts)
        },
        |t| t.deficit(policy.rel_bits),
    )?;
    Ok(prefactor(params, branch) * total.to_f64())
}

/// Explicit closed forms of `C_3^-` and `C_2^+`, the extra terms needed for n ≤ 3.
pub fn effective_hamiltonian_n3_terms(params: &SystemParams) -> (f64, f64) {
    let s = params.detuning_sign();
    let r = |q: u64| params.splitting(q);
    let c3_minus = -0.5 * s * (-r(0) + 3.0 * r(1) - 3.0 * r(2) + r(3));
    let c2_plus = 0.5 * s * (r(1) - 2.0 * r(2) + r(3));
    (c3_minus, c2_plus)
}
