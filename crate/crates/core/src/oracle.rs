//! Brute-force matrices on the truncated Fock ⊗ TLS space.
//!
//! Nothing here uses the closed-form ladder except [`build_unitary`], which needs the
//! mixing angle by construction. The bare Hamiltonian is assembled from operator
//! actions on basis labels and diagonalized numerically, so it serves as an
//! independent reference for `model` and `kbody`.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::model::{eigenvalue, eigenvector_coeffs, Branch, DressedLabel, SystemParams};

/// `|photons, g/e⟩` on one site. Also used for dressed labels `|m, ∓⟩_S`, which the
/// dressed operators act on with the same coefficients as the bare ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct FockTls {
    pub photons: u64,
    pub excited: bool,
}

impl FockTls {
    pub fn new(photons: u64, excited: bool) -> Self {
        FockTls { photons, excited }
    }

    pub fn excitations(&self) -> u64 {
        self.photons + self.excited as u64
    }
}

/// Elementary operators on one site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalOp {
    A,
    ADag,
    SigmaMinus,
    SigmaPlus,
    SigmaZ,
    Number,
}

pub fn apply_local(op: LocalOp, s: FockTls) -> Option<(f64, FockTls)> {
    match op {
        LocalOp::A if s.photons == 0 => None,
        LocalOp::A => Some(((s.photons as f64).sqrt(), FockTls::new(s.photons - 1, s.excited))),
        LocalOp::ADag => Some((((s.photons + 1) as f64).sqrt(), FockTls::new(s.photons + 1, s.excited))),
        LocalOp::SigmaMinus if s.excited => Some((1.0, FockTls::new(s.photons, false))),
        LocalOp::SigmaMinus => None,
        LocalOp::SigmaPlus if s.excited => None,
        LocalOp::SigmaPlus => Some((1.0, FockTls::new(s.photons, true))),
        LocalOp::SigmaZ => Some((if s.excited { 1.0 } else { -1.0 }, s)),
        LocalOp::Number if s.photons == 0 => None,
        LocalOp::Number => Some((s.photons as f64, s)),
    }
}

/// Applies `ops` right to left, i.e. `ops = [ADag, SigmaMinus]` is `a†σ⁻`.
pub fn apply_word(ops: &[LocalOp], s: FockTls) -> Option<(f64, FockTls)> {
    ops.iter().rev().try_fold((1.0, s), |(c, st), &op| {
        apply_local(op, st).map(|(c2, next)| (c * c2, next))
    })
}

/// Basis ordered by manifold, then photon number descending:
/// `|0,g⟩, |1,g⟩, |0,e⟩, |2,g⟩, |1,e⟩, …`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockTlsBasis {
    n_max: u64,
    states: Vec<FockTls>,
}

impl FockTlsBasis {
    pub fn new(n_max: u64) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::InvalidParameter("n_max must be >= 1".into()));
        }
        let mut states = vec![FockTls::new(0, false)];
        for n in 1..=n_max {
            states.push(FockTls::new(n, false));
            states.push(FockTls::new(n - 1, true));
        }
        Ok(FockTlsBasis { n_max, states })
    }

    pub fn n_max(&self) -> u64 {
        self.n_max
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[FockTls] {
        &self.states
    }

    pub fn index_of(&self, s: FockTls) -> Option<usize> {
        let n = s.excitations();
        if n > self.n_max {
            return None;
        }
        Some(if n == 0 { 0 } else { 2 * n as usize - 1 + s.excited as usize })
    }

    pub fn manifold(&self, n: u64) -> Range<usize> {
        if n == 0 { 0..1 } else { (2 * n as usize - 1)..(2 * n as usize + 1) }
    }

    pub fn block_offsets(&self) -> Vec<usize> {
        (0..=self.n_max).map(|n| self.manifold(n).start).collect()
    }

    /// Dressed label sharing the index of a bare state.
    pub fn dressed_label(&self, index: usize) -> DressedLabel {
        let s = self.states[index];
        if s.excited {
            DressedLabel::plus(s.photons + 1).expect("n >= 1")
        } else {
            DressedLabel::minus(s.photons)
        }
    }
}

/// Dense matrix plus the start index of each conserved block.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub matrix: DMatrix<f64>,
    pub block_offsets: Vec<usize>,
}

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.amax()
    }

    pub fn hermiticity_residual(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }

    pub fn unitarity_residual(&self) -> f64 {
        let n = self.dim();
        (self.matrix.transpose() * &self.matrix - DMatrix::identity(n, n)).amax()
    }

    fn block_of(&self, i: usize) -> usize {
        self.block_offsets.partition_point(|&o| o <= i) - 1
    }

    /// Largest element coupling two different blocks.
    pub fn off_block_max(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if self.block_of(i) != self.block_of(j) {
                    worst = worst.max(self.matrix[(i, j)].abs());
                }
            }
        }
        worst
    }

    /// Largest element off the diagonal.
    pub fn off_diagonal_max(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    worst = worst.max(self.matrix[(i, j)].abs());
                }
            }
        }
        worst
    }

    pub fn commutator_norm(&self, other: &DMatrix<f64>) -> f64 {
        (&self.matrix * other - other * &self.matrix).amax()
    }
}

/// Matrix of `Σ coeff·word` on a basis, dropping amplitude that leaves the basis.
pub fn operator_matrix(
    basis: &FockTlsBasis,
    terms: &[(f64, &[LocalOp])],
) -> OperatorMatrix {
    let n = basis.len();
    let mut m = DMatrix::zeros(n, n);
    for (col, &s) in basis.states().iter().enumerate() {
        for &(coeff, word) in terms {
            if coeff == 0.0 {
                continue;
            }
            if let Some((c, out)) = apply_word(word, s) {
                if let Some(row) = basis.index_of(out) {
                    m[(row, col)] += coeff * c;
                }
            }
        }
    }
    OperatorMatrix { matrix: m, block_offsets: basis.block_offsets() }
}

/// Diagonal matrix of the total excitation number.
pub fn number_matrix(basis: &FockTlsBasis) -> DMatrix<f64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        basis.len(),
        basis.states().iter().map(|s| s.excitations() as f64),
    ))
}

/// `ω_c a†a + ½ω_a σz + g(a†σ⁻ + aσ⁺)` on manifolds `0..=n_max`.
pub fn build_bare_hamiltonian(params: &SystemParams, n_max: u64) -> Result<OperatorMatrix> {
    params.validate()?;
    let basis = FockTlsBasis::new(n_max)?;
    use LocalOp::*;
    Ok(operator_matrix(
        &basis,
        &[
            (params.omega_c, &[Number]),
            (0.5 * params.omega_a(), &[SigmaZ]),
            (params.g, &[ADag, SigmaMinus]),
            (params.g, &[A, SigmaPlus]),
        ],
    ))
}

/// Dressing matrix T whose columns are the dressed states in the bare basis.
///
/// Column `i` is the dressed state carrying the label of bare state `i`, so
/// `T†HT` is diagonal. Per manifold the block is `[[c, s], [−s, c]]`.
pub fn build_unitary(params: &SystemParams, n_max: u64) -> Result<OperatorMatrix> {
    params.validate()?;
    let basis = FockTlsBasis::new(n_max)?;
    let mut t = DMatrix::zeros(basis.len(), basis.len());
    t[(0, 0)] = 1.0;
    for n in 1..=n_max {
        let (c, s) = eigenvector_coeffs(params, n)?;
        let r = basis.manifold(n);
        let (g_idx, e_idx) = (r.start, r.start + 1);
        t[(g_idx, g_idx)] = c;
        t[(e_idx, g_idx)] = -s;
        t[(g_idx, e_idx)] = s;
        t[(e_idx, e_idx)] = c;
    }
    Ok(OperatorMatrix { matrix: t, block_offsets: basis.block_offsets() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagonalizationReport {
    pub n_max: u64,
    /// max |(T†HT)_ij| over i ≠ j.
    pub max_offdiag: f64,
    pub max_abs_h: f64,
    pub max_abs_energy: f64,
    /// max_offdiag / max |E|.
    pub relative_offdiag: f64,
    /// Largest |(T†HT)_ii − E_i| against the closed-form ladder.
    pub max_diag_deviation: f64,
    pub hermiticity: f64,
    pub unitarity: f64,
    /// Largest gap between the dense eigenvalues and the closed-form ladder.
    pub dense_spectrum_deviation: f64,
}

impl DiagonalizationReport {
    pub fn passes(&self) -> bool {
        let scale = self.max_abs_energy.max(f64::MIN_POSITIVE);
        self.max_offdiag <= 1e-10 * scale
            && self.max_diag_deviation <= 1e-10 * scale
            && self.dense_spectrum_deviation <= 1e-10 * scale.max(self.max_abs_h)
            && self.hermiticity <= 1e-12 * scale
            && self.unitarity <= 1e-12
    }
}

pub fn verify_diagonalization(params: &SystemParams, n_max: u64) -> Result<DiagonalizationReport> {
    let h = build_bare_hamiltonian(params, n_max)?;
    let t = build_unitary(params, n_max)?;
    let basis = FockTlsBasis::new(n_max)?;
    let d = t.matrix.transpose() * &h.matrix * &t.matrix;
    let closed: Vec<f64> = (0..basis.len())
        .map(|i| eigenvalue(params, &basis.dressed_label(i)))
        .collect();
    let max_abs_energy = closed.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let max_offdiag = OperatorMatrix { matrix: d.clone(), block_offsets: vec![0] }.off_diagonal_max();
    let max_diag_deviation = (0..basis.len())
        .map(|i| (d[(i, i)] - closed[i]).abs())
        .fold(0.0, f64::max);
    let mut sorted = closed.clone();
    sorted.sort_by(f64::total_cmp);
    let dense = spectrum_dense(params, n_max)?;
    let dense_spectrum_deviation = dense
        .iter()
        .zip(&sorted)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(DiagonalizationReport {
        n_max,
        max_offdiag,
        max_abs_h: h.max_abs(),
        max_abs_energy,
        relative_offdiag: if max_abs_energy > 0.0 { max_offdiag / max_abs_energy } else { max_offdiag },
        max_diag_deviation,
        hermiticity: h.hermiticity_residual(),
        unitarity: t.unitarity_residual(),
        dense_spectrum_deviation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LabeledLevel {
    pub label: DressedLabel,
    pub energy: f64,
    /// |⟨n,g|ψ⟩|², the bare-ground weight of the eigenvector.
    pub ground_weight: f64,
}

fn block_levels(params: &SystemParams, h: &DMatrix<f64>, r: Range<usize>, n: u64) -> Result<Vec<LabeledLevel>> {
    if n == 0 {
        let energy = h[(r.start, r.start)];
        return Ok(vec![LabeledLevel { label: DressedLabel::minus(0), energy, ground_weight: 1.0 }]);
    }
    let (i, j) = (r.start, r.start + 1);
    let (a, b, d) = (h[(i, i)], h[(i, j)], h[(j, j)]);
    let mean = 0.5 * (a + d);
    let radius = (0.5 * (a - d)).hypot(b);
    let (lo, hi) = (mean - radius, mean + radius);
    let scale = a.abs().max(d.abs()).max(b.abs());
    if params.g != 0.0 && hi - lo <= 1e-13 * scale {
        return Err(Error::Numerical(format!(
            "manifold {n} eigenvalues coincide ({lo} vs {hi}) although g != 0"
        )));
    }
    // bare-ground weight of the eigenvector for eigenvalue e: (b, e − a) normalized
    let weight = |e: f64| {
        let (x, y) = if b == 0.0 {
            if (e - a).abs() <= (e - d).abs() { (1.0, 0.0) } else { (0.0, 1.0) }
        } else {
            (b, e - a)
        };
        x * x / (x * x + y * y)
    };
    // the Minus level is the lower one for σ = +1 and the upper one for σ = −1
    let (minus, plus) = if params.detuning_sign() > 0.0 { (lo, hi) } else { (hi, lo) };
    Ok(vec![
        LabeledLevel { label: DressedLabel::minus(n), energy: minus, ground_weight: weight(minus) },
        LabeledLevel { label: DressedLabel::plus(n)?, energy: plus, ground_weight: weight(plus) },
    ])
}

/// Labelled spectrum from analytic 2×2 diagonalization of each manifold block.
pub fn spectrum(params: &SystemParams, n_max: u64) -> Result<Vec<LabeledLevel>> {
    let h = build_bare_hamiltonian(params, n_max)?;
    let basis = FockTlsBasis::new(n_max)?;
    let blocks: Result<Vec<Vec<LabeledLevel>>> = (0..=n_max)
        .into_par_iter()
        .map(|n| block_levels(params, &h.matrix, basis.manifold(n), n))
        .collect();
    let mut levels: Vec<LabeledLevel> = blocks?.into_iter().flatten().collect();
    levels.sort_by(|x, y| x.energy.total_cmp(&y.energy).then(x.label.cmp(&y.label)));
    Ok(levels)
}

/// Sorted eigenvalues of the full dense Hamiltonian, ignoring the block structure.
pub fn spectrum_dense(params: &SystemParams, n_max: u64) -> Result<Vec<f64>> {
    let h = build_bare_hamiltonian(params, n_max)?;
    let eig = SymmetricEigen::try_new(h.matrix, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("dense eigensolver did not converge".into()))?;
    let mut e: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    Ok(e)
}

/// Branch of the bare state with the larger weight, if clearly dominant.
pub fn dominant_branch(level: &LabeledLevel) -> Option<Branch> {
    if level.ground_weight > 0.5 + 1e-9 {
        Some(Branch::Minus)
    } else if level.ground_weight < 0.5 - 1e-9 {
        Some(Branch::Plus)
    } else {
        None
    }
}
