//! Fixed-point evaluation of alternating binomial sums of square roots.
//!
//! The k-th finite difference of `p ↦ √(x² + y²p)` cancels roughly k bits, so the
//! roots are computed as exact integers `⌊√(x² + y²p)·2^F⌋` and combined without
//! rounding. Every result carries a rigorous error bound in units of `2^−F`, and
//! [`refine`] raises F until the bound is small relative to the value.

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{Float, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Environment variable flooring the starting fractional precision.
pub const PRECISION_ENV: &str = "JCDRESS_PRECISION_BITS";

/// `q ↦ x² + y²·q`, held exactly as `(base + slope·q)·2^exp`.
#[derive(Debug, Clone)]
pub struct LinearRadicand {
    x: f64,
    y: f64,
    base: BigUint,
    slope: BigUint,
    exp: i64,
}

fn decompose(v: f64) -> (BigUint, i64) {
    let (mantissa, exponent, _) = v.abs().integer_decode();
    (BigUint::from(mantissa), exponent as i64)
}

impl LinearRadicand {
    pub fn new(x: f64, y: f64) -> Self {
        let (mx, ex) = decompose(x);
        let (my, ey) = decompose(y);
        let exp = match (mx.is_zero(), my.is_zero()) {
            (true, true) => 0,
            (true, false) => 2 * ey,
            (false, true) => 2 * ex,
            (false, false) => (2 * ex).min(2 * ey),
        };
        let base = if mx.is_zero() { mx.clone() } else { (&mx * &mx) << (2 * ex - exp) as u64 };
        let slope = if my.is_zero() { my.clone() } else { (&my * &my) << (2 * ey - exp) as u64 };
        LinearRadicand { x, y, base, slope, exp }
    }

    /// Radicand for the Jaynes-Cummings splitting √(Δ² + 4g²q).
    pub fn splitting(delta: f64, g: f64) -> Self {
        Self::new(delta, 2.0 * g)
    }

    pub fn is_constant(&self) -> bool {
        self.slope.is_zero()
    }

    pub fn root_f64(&self, q: u64) -> f64 {
        self.x.hypot(self.y * (q as f64).sqrt())
    }

    /// `⌊√(x² + y²q)·2^bits⌋`; lies within 2 units below the true value.
    pub fn root_fixed(&self, q: u64, bits: u32) -> BigUint {
        let value = &self.base + &self.slope * q;
        let shift = self.exp + 2 * bits as i64;
        let scaled = if shift >= 0 { value << shift as u64 } else { value >> (-shift) as u64 };
        scaled.sqrt()
    }
}

/// `mantissa·2^−bits` with absolute error at most `err·2^−bits`.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedSum {
    pub mantissa: BigInt,
    pub err: BigUint,
    pub bits: u32,
}

impl FixedSum {
    pub fn to_f64(&self) -> f64 {
        fixed_to_f64(&self.mantissa, self.bits)
    }

    /// Sign of the value, or 0 if the bound does not exclude zero.
    pub fn certain_sign(&self) -> i8 {
        if self.mantissa.magnitude() > &self.err {
            match self.mantissa.sign() {
                Sign::Minus => -1,
                _ => 1,
            }
        } else {
            0
        }
    }

    /// log2 of |value|, usable where the f64 value under- or overflows.
    pub fn log2_abs(&self) -> f64 {
        let mag = self.mantissa.magnitude();
        let len = mag.bits();
        if len == 0 {
            return f64::NEG_INFINITY;
        }
        let drop = len.saturating_sub(64);
        let top = (mag >> drop).to_u64().unwrap_or(u64::MAX) as f64;
        top.log2() + drop as f64 - self.bits as f64
    }

    /// Bits still missing for a relative error below `2^(1 − rel_bits)`.
    ///
    /// `None` when resolved, `Some(0)` when the magnitude is not yet visible at all.
    pub fn deficit(&self, rel_bits: u32) -> Option<u32> {
        if self.err.is_zero() {
            return None;
        }
        let m = self.mantissa.magnitude().bits();
        let needed = self.err.bits() + rel_bits as u64;
        if m >= needed {
            None
        } else if self.mantissa.magnitude() <= &self.err {
            Some(0)
        } else {
            Some((needed - m) as u32)
        }
    }

    fn zero(bits: u32) -> Self {
        FixedSum { mantissa: BigInt::zero(), err: BigUint::zero(), bits }
    }
}

/// `x·2^e` without intermediate overflow or premature underflow.
pub fn ldexp(mut x: f64, mut e: i64) -> f64 {
    const STEP: i64 = 960;
    while e > STEP && x.is_finite() && x != 0.0 {
        x *= 2f64.powi(STEP as i32);
        e -= STEP;
    }
    while e < -STEP && x != 0.0 {
        x *= 2f64.powi(-STEP as i32);
        e += STEP;
    }
    x * 2f64.powi(e as i32)
}

pub fn fixed_to_f64(m: &BigInt, bits: u32) -> f64 {
    let mag = m.magnitude();
    let len = mag.bits();
    if len == 0 {
        return 0.0;
    }
    let drop = len.saturating_sub(64);
    let top = (mag >> drop).to_u64().expect("64 leading bits fit in u64") as f64;
    // keep the leading bits at a normal exponent before the final scaling
    let v = ldexp(top, drop as i64 - bits as i64);
    if m.sign() == Sign::Minus { -v } else { v }
}

/// Row k of Pascal's triangle.
pub fn binomial_row(k: u64) -> Vec<BigUint> {
    let mut row = Vec::with_capacity(k as usize + 1);
    let mut b = BigUint::from(1u32);
    row.push(b.clone());
    for p in 0..k {
        b = b * (k - p) / (p + 1);
        row.push(b.clone());
    }
    row
}

fn bit_length(v: u64) -> u32 {
    64 - v.leading_zeros()
}

fn signed(mag: BigUint, negative: bool) -> BigInt {
    BigInt::from_biguint(if negative { Sign::Minus } else { Sign::Plus }, mag)
}

/// `Σ_p binom(k,p)(−1)^{k+p} √(rad(p + shift))` at `bits` fractional bits.
///
/// Terms with small binomial weight are evaluated at proportionally fewer bits;
/// the per-term truncation is folded into the returned bound.
pub fn alternating_sum(rad: &LinearRadicand, k: u64, shift: u64, bits: u32) -> FixedSum {
    let binoms = binomial_row(k);
    let slack = bit_length(k + 1) as i64 + 1;
    let (mantissa, err) = (0..=k)
        .into_par_iter()
        .map(|p| {
            let b = &binoms[p as usize];
            let trimmed = (bits as i64 - k as i64 + b.bits() as i64 + slack).clamp(0, bits as i64);
            let drop = bits as u64 - trimmed as u64;
            let root = rad.root_fixed(p + shift, trimmed as u32) << drop;
            let term = signed(b * root, (k + p) % 2 == 1);
            let err: BigUint = (b << drop) * 2u32;
            (term, err)
        })
        .reduce(
            || (BigInt::zero(), BigUint::zero()),
            |a, b| (a.0 + b.0, a.1 + b.1),
        );
    FixedSum { mantissa, err, bits }
}

fn roots(rad: &LinearRadicand, count: u64, shift: u64, bits: u32) -> Vec<BigInt> {
    (0..count)
        .into_par_iter()
        .map(|p| BigInt::from(rad.root_fixed(p + shift, bits)))
        .collect()
}

/// The sums of [`alternating_sum`] for every k in `0..=k_max`, sharing one set of roots.
pub fn alternating_sums(rad: &LinearRadicand, k_max: u64, shift: u64, bits: u32) -> Vec<FixedSum> {
    let r = roots(rad, k_max + 1, shift, bits);
    (0..=k_max)
        .into_par_iter()
        .map(|k| {
            let row = binomial_row(k);
            let mut acc = BigInt::zero();
            for (p, b) in row.iter().enumerate() {
                let term = &r[p] * BigInt::from(b.clone());
                if (k + p as u64) % 2 == 1 {
                    acc -= term;
                } else {
                    acc += term;
                }
            }
            FixedSum { mantissa: acc, err: BigUint::from(2u32) << k, bits }
        })
        .collect()
}

/// k-th forward differences at p = 0 for `k = 0..=k_max`, from a difference table.
pub fn forward_differences(rad: &LinearRadicand, k_max: u64, shift: u64, bits: u32) -> Vec<FixedSum> {
    let mut level = roots(rad, k_max + 1, shift, bits);
    let mut out = Vec::with_capacity(k_max as usize + 1);
    for k in 0..=k_max {
        out.push(FixedSum {
            mantissa: level[0].clone(),
            err: BigUint::from(2u32) << k,
            bits,
        });
        for i in 0..level.len() - 1 {
            level[i] = &level[i + 1] - &level[i];
        }
        level.pop();
    }
    out
}

/// Starting precision and convergence target for [`refine`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrecisionPolicy {
    /// Lower bound on the starting fractional bits.
    pub floor_bits: u32,
    /// Refinement gives up beyond this many fractional bits.
    pub max_bits: u32,
    /// Required ratio |value| / error bound, as a power of two.
    pub rel_bits: u32,
}

impl Default for PrecisionPolicy {
    fn default() -> Self {
        PrecisionPolicy { floor_bits: 0, max_bits: 1 << 18, rel_bits: 57 }
    }
}

impl PrecisionPolicy {
    /// Default policy with `floor_bits` taken from `JCDRESS_PRECISION_BITS` when set.
    pub fn from_env() -> Result<Self> {
        let mut policy = Self::default();
        if let Ok(raw) = std::env::var(PRECISION_ENV) {
            policy.floor_bits = raw.trim().parse().map_err(|_| {
                Error::Config(format!("{PRECISION_ENV} must be a non-negative integer, got {raw:?}"))
            })?;
        }
        Ok(policy)
    }

    pub fn start_bits(&self, k: u64) -> u32 {
        let base = 64u64.saturating_add(2 * k).min(u32::MAX as u64) as u32;
        base.max(self.floor_bits)
    }
}

/// Re-evaluates `eval` at increasing precision until `deficit` reports convergence.
pub fn refine<T>(
    policy: &PrecisionPolicy,
    k: u64,
    mut eval: impl FnMut(u32) -> T,
    deficit: impl Fn(&T) -> Option<u32>,
) -> Result<(T, u32)> {
    let mut bits = policy.start_bits(k);
    loop {
        if bits > policy.max_bits {
            return Err(Error::PrecisionExhausted { k, max_bits: policy.max_bits });
        }
        let value = eval(bits);
        match deficit(&value) {
            None => return Ok((value, bits)),
            Some(0) => bits = bits.saturating_mul(2),
            Some(d) => bits = bits.saturating_add(d + 32),
        }
    }
}

/// Combines several fixed sums at a common precision into `Σ weight_i·sum_i`.
pub fn weighted_total(parts: &[(BigUint, FixedSum)]) -> FixedSum {
    let Some(bits) = parts.first().map(|p| p.1.bits) else {
        return FixedSum::zero(0);
    };
    let mut total = FixedSum::zero(bits);
    for (w, s) in parts {
        debug_assert_eq!(s.bits, bits);
        total.mantissa += BigInt::from(w.clone()) * &s.mantissa;
        total.err += w * &s.err;
    }
    total
}
