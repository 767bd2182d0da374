//! Parameter-grid sweeps and coefficient scans.
//!
//! Grid points are evaluated in parallel into a buffer indexed by position, so the
//! serialized output does not depend on scheduling or the number of workers.
//!
//! CSV columns are the two axis names, then one or more columns per requested
//! observable, then `error`:
//!
//! | observable     | columns                                            |
//! |----------------|----------------------------------------------------|
//! | `coefficients` | `c_minus_0` … `c_minus_{k_max}`                    |
//! | `j_eff`        | `j_eff1`, `j_eff2`                                 |
//! | `u_eff`        | `u_eff`                                            |
//! | `ratio`        | `effective_ratio` (J_eff^(2)/U_eff)                |
//! | `outcoupling`  | `m1`, `m2`, `m3`, `k1`, `k2`                       |
//! | `variance`     | `variance`                                         |
//! | `overlaps`     | `dressed_mi`, `photonic_mi`, `dressed_sf`, `photonic_sf` |
//! | `energy`       | `energy`                                           |
//!
//! Floats are written with 17 significant digits; failed points leave their value
//! columns empty and carry the message in `error`. The JSON form is an array of
//! objects with the same keys.

use rayon::prelude::*;
use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Deserialize, Serialize, Serializer};
use std::path::Path;

use crate::error::{Error, Result};
use crate::jch2::{ground_state, j_eff, outcoupling, Outcoupling, Overlaps, TwoSiteParams};
use crate::kbody::{coeff_dispersive, coeff_resonant, coefficient, coefficient_table};
use crate::model::{Branch, DetuningApproach, SystemParams};
use crate::precision::PrecisionPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisName {
    Lambda,
    Delta,
    G,
    HopJ,
    JOverG,
    OmegaC,
}

impl AxisName {
    pub fn as_str(self) -> &'static str {
        match self {
            AxisName::Lambda => "lambda",
            AxisName::Delta => "delta",
            AxisName::G => "g",
            AxisName::HopJ => "hop_j",
            AxisName::JOverG => "j_over_g",
            AxisName::OmegaC => "omega_c",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: AxisName,
    #[serde(default)]
    pub scale: Scale,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(name: AxisName, scale: Scale, min: f64, max: f64, count: usize) -> Self {
        Axis { name, scale, min, max, count }
    }

    pub fn validate(&self) -> Result<()> {
        let name = self.name.as_str();
        if self.count < 2 {
            return Err(Error::InvalidParameter(format!("axis {name}: count must be >= 2")));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(Error::InvalidParameter(format!("axis {name}: need finite min < max")));
        }
        if self.scale == Scale::Log && self.min <= 0.0 {
            return Err(Error::InvalidParameter(format!("axis {name}: log scale needs min > 0")));
        }
        Ok(())
    }

    /// Grid values; both endpoints are reproduced exactly.
    pub fn values(&self) -> Vec<f64> {
        let last = self.count - 1;
        (0..self.count)
            .map(|i| {
                if i == 0 {
                    return self.min;
                }
                if i == last {
                    return self.max;
                }
                let t = i as f64 / last as f64;
                match self.scale {
                    Scale::Linear => self.min + t * (self.max - self.min),
                    Scale::Log => (self.min.ln() + t * (self.max.ln() - self.min.ln())).exp(),
                }
            })
            .collect()
    }
}

/// Parameters held fixed across the grid; axes override them point by point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FixedParams {
    pub omega_c: f64,
    pub g: f64,
    pub delta: Option<f64>,
    pub lambda: Option<f64>,
    pub hop_j: Option<f64>,
    pub j_over_g: Option<f64>,
    pub zero_detuning_sign: DetuningApproach,
}

impl Default for FixedParams {
    fn default() -> Self {
        FixedParams {
            omega_c: 1000.0,
            g: 1.0,
            delta: None,
            lambda: None,
            hop_j: None,
            j_over_g: None,
            zero_detuning_sign: DetuningApproach::FromAbove,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    Coefficients,
    JEff,
    UEff,
    Ratio,
    Outcoupling,
    Variance,
    Overlaps,
    Energy,
}

impl Observable {
    fn columns(self, k_max: u64) -> Vec<String> {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect();
        match self {
            Observable::Coefficients => (0..=k_max).map(|k| format!("c_minus_{k}")).collect(),
            Observable::JEff => s(&["j_eff1", "j_eff2"]),
            Observable::UEff => s(&["u_eff"]),
            Observable::Ratio => s(&["effective_ratio"]),
            Observable::Outcoupling => s(&["m1", "m2", "m3", "k1", "k2"]),
            Observable::Variance => s(&["variance"]),
            Observable::Overlaps => s(&["dressed_mi", "photonic_mi", "dressed_sf", "photonic_sf"]),
            Observable::Energy => s(&["energy"]),
        }
    }

    fn needs_ground_state(self) -> bool {
        matches!(self, Observable::Variance | Observable::Overlaps | Observable::Energy)
    }
}

fn default_k_max() -> u64 {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub axis1: Axis,
    pub axis2: Axis,
    #[serde(default)]
    pub fixed: FixedParams,
    pub outputs: Vec<Observable>,
    /// Highest k reported by the `coefficients` observable.
    #[serde(default = "default_k_max")]
    pub k_max: u64,
}

impl GridSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: GridSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.axis1.validate()?;
        self.axis2.validate()?;
        if self.axis1.name == self.axis2.name {
            return Err(Error::InvalidParameter("the two axes must differ".into()));
        }
        if self.outputs.is_empty() {
            return Err(Error::InvalidParameter("no outputs requested".into()));
        }
        let names = [self.axis1.name, self.axis2.name];
        let has = |n: AxisName| names.contains(&n);
        let detuning = [has(AxisName::Delta), has(AxisName::Lambda)];
        if detuning == [true, true] {
            return Err(Error::InvalidParameter("delta and lambda cannot both be axes".into()));
        }
        let hopping = [has(AxisName::HopJ), has(AxisName::JOverG)];
        if hopping == [true, true] {
            return Err(Error::InvalidParameter("hop_j and j_over_g cannot both be axes".into()));
        }
        if detuning == [false, false] && self.fixed.delta.is_some() == self.fixed.lambda.is_some() {
            return Err(Error::InvalidParameter("fix exactly one of delta or lambda".into()));
        }
        if hopping == [false, false] && self.fixed.hop_j.is_some() && self.fixed.j_over_g.is_some() {
            return Err(Error::InvalidParameter("fix at most one of hop_j or j_over_g".into()));
        }
        Ok(())
    }

    /// The two-site survey: λ ∈ [1e-2, 1e2] against J/g ∈ [1e-3, 1e2], 50×50 log grid,
    /// ω_c = 1000, g = 1.
    pub fn phase_diagram() -> Self {
        GridSpec {
            axis1: Axis::new(AxisName::Lambda, Scale::Log, 1e-2, 1e2, 50),
            axis2: Axis::new(AxisName::JOverG, Scale::Log, 1e-3, 1e2, 50),
            fixed: FixedParams::default(),
            outputs: vec![
                Observable::Ratio,
                Observable::Variance,
                Observable::Overlaps,
                Observable::Energy,
                Observable::JEff,
                Observable::UEff,
            ],
            k_max: default_k_max(),
        }
    }

    /// C₂⁻ and C₃⁻ over detuning and coupling.
    pub fn coefficient_map() -> Self {
        GridSpec {
            axis1: Axis::new(AxisName::Delta, Scale::Linear, -10.0, 10.0, 41),
            axis2: Axis::new(AxisName::G, Scale::Linear, 0.1, 5.0, 25),
            fixed: FixedParams::default(),
            outputs: vec![Observable::Coefficients],
            k_max: 3,
        }
    }

    fn outputs_dedup(&self) -> Vec<Observable> {
        let mut seen = Vec::new();
        for o in &self.outputs {
            if !seen.contains(o) {
                seen.push(*o);
            }
        }
        seen
    }

    pub fn columns(&self) -> Vec<String> {
        let mut cols = vec![self.axis1.name.as_str().to_string(), self.axis2.name.as_str().to_string()];
        for o in self.outputs_dedup() {
            cols.extend(o.columns(self.k_max));
        }
        cols.push("error".into());
        cols
    }

    /// Physical parameters at one grid point.
    pub fn point_params(&self, v1: f64, v2: f64) -> Result<TwoSiteParams> {
        let f = &self.fixed;
        let (mut omega_c, mut g) = (f.omega_c, f.g);
        let (mut delta, mut lambda, mut hop_j, mut j_over_g) = (f.delta, f.lambda, f.hop_j, f.j_over_g);
        for (axis, v) in [(self.axis1.name, v1), (self.axis2.name, v2)] {
            match axis {
                AxisName::OmegaC => omega_c = v,
                AxisName::G => g = v,
                AxisName::Delta => (delta, lambda) = (Some(v), None),
                AxisName::Lambda => (delta, lambda) = (None, Some(v)),
                AxisName::HopJ => (hop_j, j_over_g) = (Some(v), None),
                AxisName::JOverG => (hop_j, j_over_g) = (None, Some(v)),
            }
        }
        let delta = match (delta, lambda) {
            (Some(d), _) => d,
            (None, Some(l)) if l != 0.0 => g / l,
            _ => return Err(Error::InvalidParameter("lambda must be non-zero".into())),
        };
        let hop_j = match (hop_j, j_over_g) {
            (Some(j), _) => j,
            (None, Some(r)) => r * g,
            (None, None) => 0.0,
        };
        let site = SystemParams::new(omega_c, delta, g)?.with_approach(f.zero_detuning_sign);
        TwoSiteParams::new(site, hop_j)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct PhaseGridRow {
    pub axis1: f64,
    pub axis2: f64,
    pub coefficients: Option<Vec<f64>>,
    pub j_eff1: Option<f64>,
    pub j_eff2: Option<f64>,
    pub u_eff: Option<f64>,
    pub effective_ratio: Option<f64>,
    pub outcoupling: Option<Outcoupling>,
    pub variance: Option<f64>,
    pub overlaps: Option<Overlaps>,
    pub energy: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
enum Cell {
    Num(f64),
    Text(String),
    Empty,
}

/// 17 significant digits, enough to round-trip any f64.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

impl PhaseGridRow {
    fn cells(&self, spec: &GridSpec) -> Vec<Cell> {
        let num = |v: Option<f64>| v.map_or(Cell::Empty, Cell::Num);
        let mut out = vec![Cell::Num(self.axis1), Cell::Num(self.axis2)];
        for o in spec.outputs_dedup() {
            match o {
                Observable::Coefficients => {
                    for k in 0..=spec.k_max as usize {
                        out.push(num(self.coefficients.as_ref().and_then(|c| c.get(k).copied())));
                    }
                }
                Observable::JEff => {
                    out.push(num(self.j_eff1));
                    out.push(num(self.j_eff2));
                }
                Observable::UEff => out.push(num(self.u_eff)),
                Observable::Ratio => out.push(num(self.effective_ratio)),
                Observable::Outcoupling => {
                    match self.outcoupling {
                        Some(o) => out.extend([o.m1, o.m2, o.m3, o.k1, o.k2].map(Cell::Num)),
                        None => out.extend([(); 5].map(|_| Cell::Empty)),
                    }
                }
                Observable::Variance => out.push(num(self.variance)),
                Observable::Overlaps => {
                    match self.overlaps {
                        Some(o) => out.extend([o.dressed_mi, o.photonic_mi, o.dressed_sf, o.photonic_sf].map(Cell::Num)),
                        None => out.extend([(); 4].map(|_| Cell::Empty)),
                    }
                }
                Observable::Energy => out.push(num(self.energy)),
            }
        }
        out.push(self.error.clone().map_or(Cell::Empty, Cell::Text));
        out
    }
}

fn evaluate(spec: &GridSpec, outputs: &[Observable], v1: f64, v2: f64) -> PhaseGridRow {
    let mut row = PhaseGridRow { axis1: v1, axis2: v2, ..Default::default() };
    if let Err(e) = fill(spec, outputs, &mut row) {
        row = PhaseGridRow { axis1: v1, axis2: v2, error: Some(e.to_string()), ..Default::default() };
    }
    row
}

fn fill(spec: &GridSpec, outputs: &[Observable], row: &mut PhaseGridRow) -> Result<()> {
    let p = spec.point_params(row.axis1, row.axis2)?;
    let gs = if outputs.iter().any(|o| o.needs_ground_state()) { Some(ground_state(&p)?) } else { None };
    for o in outputs {
        match o {
            Observable::Coefficients => {
                row.coefficients = Some(coefficient_table(&p.site, Branch::Minus, spec.k_max)?.values);
            }
            Observable::JEff => {
                row.j_eff1 = Some(j_eff(&p, 1)?);
                row.j_eff2 = Some(j_eff(&p, 2)?);
            }
            Observable::UEff => row.u_eff = Some(coefficient(&p.site, 2, Branch::Minus, &PrecisionPolicy::default())?.value),
            Observable::Ratio => {
                let u = coefficient(&p.site, 2, Branch::Minus, &PrecisionPolicy::default())?.value;
                let j2 = j_eff(&p, 2)?;
                row.effective_ratio = Some(j2 / u);
            }
            Observable::Outcoupling => row.outcoupling = Some(outcoupling(&p)?),
            Observable::Variance => row.variance = gs.as_ref().map(|g| g.variance),
            Observable::Overlaps => row.overlaps = gs.as_ref().map(|g| g.overlaps),
            Observable::Energy => row.energy = gs.as_ref().map(|g| g.energy),
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub spec: GridSpec,
    pub rows: Vec<PhaseGridRow>,
}

/// Evaluates every grid point on the current rayon pool.
pub fn run_sweep(spec: &GridSpec) -> Result<SweepTable> {
    spec.validate()?;
    let xs = spec.axis1.values();
    let ys = spec.axis2.values();
    let outputs = spec.outputs_dedup();
    let n2 = ys.len();
    let rows: Vec<PhaseGridRow> = (0..xs.len() * n2)
        .into_par_iter()
        .map(|i| evaluate(spec, &outputs, xs[i / n2], ys[i % n2]))
        .collect();
    Ok(SweepTable { spec: spec.clone(), rows })
}

/// A fixed-size rayon pool for running sweeps and scans off the global pool.
pub struct WorkerPool(rayon::ThreadPool);

impl WorkerPool {
    pub fn new(workers: usize) -> Result<Self> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map(WorkerPool)
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
    }

    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.0.install(f)
    }
}

/// [`run_sweep`] on a dedicated pool of `workers` threads.
pub fn run_sweep_with_workers(spec: &GridSpec, workers: usize) -> Result<SweepTable> {
    WorkerPool::new(workers)?.install(|| run_sweep(spec))
}

fn write_csv(header: &[String], rows: impl Iterator<Item = Vec<Cell>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Numerical(format!("csv: {e}"));
    w.write_record(header).map_err(io)?;
    for cells in rows {
        w.write_record(cells.iter().map(|c| match c {
            Cell::Num(v) => format_float(*v),
            Cell::Text(t) => t.clone(),
            Cell::Empty => String::new(),
        }))
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Numerical(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

struct JsonRows<'a> {
    header: &'a [String],
    rows: Vec<Vec<Cell>>,
}

impl Serialize for JsonRows<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.rows.len()))?;
        for cells in &self.rows {
            seq.serialize_element(&JsonRow { header: self.header, cells })?;
        }
        seq.end()
    }
}

struct JsonRow<'a> {
    header: &'a [String],
    cells: &'a [Cell],
}

impl Serialize for JsonRow<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.cells.len()))?;
        for (k, c) in self.header.iter().zip(self.cells) {
            match c {
                Cell::Num(v) if v.is_finite() => map.serialize_entry(k, v)?,
                Cell::Text(t) => map.serialize_entry(k, t)?,
                _ => map.serialize_entry(k, &Option::<f64>::None)?,
            }
        }
        map.end()
    }
}

fn write_json(header: &[String], rows: Vec<Vec<Cell>>) -> Result<String> {
    serde_json::to_string_pretty(&JsonRows { header, rows })
        .map_err(|e| Error::Numerical(format!("json: {e}")))
}

impl SweepTable {
    pub fn to_csv(&self) -> Result<String> {
        write_csv(&self.spec.columns(), self.rows.iter().map(|r| r.cells(&self.spec)))
    }

    pub fn to_json(&self) -> Result<String> {
        write_json(&self.spec.columns(), self.rows.iter().map(|r| r.cells(&self.spec)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Resonant,
    Dispersive,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub k: u64,
    pub value: Option<f64>,
    pub sign: i8,
    pub log2_abs: Option<f64>,
    pub precision_bits: Option<u32>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientScan {
    pub regime: Regime,
    pub rows: Vec<ScanRow>,
}

fn scan_row(k: u64, r: Result<(f64, i8, f64, Option<u32>)>) -> ScanRow {
    match r {
        Ok((value, sign, log2_abs, bits)) => ScanRow {
            k,
            value: Some(value),
            sign,
            log2_abs: Some(log2_abs),
            precision_bits: bits,
            error: None,
        },
        Err(e) => ScanRow { k, value: None, sign: 0, log2_abs: None, precision_bits: None, error: Some(e.to_string()) },
    }
}

fn sign_of(v: f64) -> i8 {
    (v > 0.0) as i8 - (v < 0.0) as i8
}

/// `C_k^-` against k in one regime. Resonant and dispersive scans start at k = 1.
///
/// `Resonant` uses g and the approach sign of `params`; `Dispersive` uses λ = g/Δ.
pub fn run_coefficient_scan(
    params: &SystemParams,
    k_max: u64,
    regime: Regime,
    policy: &PrecisionPolicy,
) -> Result<CoefficientScan> {
    params.validate()?;
    let ks: Vec<u64> = match regime {
        Regime::Exact => (0..=k_max).collect(),
        _ => (1..=k_max).collect(),
    };
    let lambda = match regime {
        Regime::Dispersive => Some(params.lambda()?),
        _ => None,
    };
    let rows = ks
        .into_par_iter()
        .map(|k| {
            let r = match regime {
                Regime::Exact => coefficient(params, k, Branch::Minus, policy)
                    .map(|c| (c.value, c.sign, c.log2_abs, Some(c.precision_bits))),
                Regime::Resonant => coeff_resonant(params.g, k, params.zero_detuning_sign)
                    .map(|v| (v, sign_of(v), v.abs().log2(), None)),
                Regime::Dispersive => coeff_dispersive(params.g, lambda.expect("set above"), k)
                    .map(|v| (v, sign_of(v), v.abs().log2(), None)),
            };
            scan_row(k, r)
        })
        .collect();
    Ok(CoefficientScan { regime, rows })
}

impl CoefficientScan {
    pub fn columns() -> Vec<String> {
        ["k", "c_k_minus", "sign", "log2_abs", "precision_bits", "error"].iter().map(|s| s.to_string()).collect()
    }

    fn cells(&self) -> impl Iterator<Item = Vec<Cell>> + '_ {
        self.rows.iter().map(|r| {
            vec![
                Cell::Num(r.k as f64),
                r.value.map_or(Cell::Empty, Cell::Num),
                Cell::Text(r.sign.to_string()),
                r.log2_abs.map_or(Cell::Empty, Cell::Num),
                r.precision_bits.map_or(Cell::Empty, |b| Cell::Text(b.to_string())),
                r.error.clone().map_or(Cell::Empty, Cell::Text),
            ]
        })
    }

    pub fn to_csv(&self) -> Result<String> {
        // k is integral, so print it without the float formatting
        let rows = self.cells().map(|mut c| {
            if let Cell::Num(k) = c[0] {
                c[0] = Cell::Text((k as u64).to_string());
            }
            c
        });
        write_csv(&Self::columns(), rows)
    }

    pub fn to_json(&self) -> Result<String> {
        write_json(&Self::columns(), self.cells().collect())
    }
}
