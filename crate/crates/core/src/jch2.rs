//! Two identical Jaynes-Cummings sites coupled by photon hopping `J(a₁†a₂ + h.c.)`.
//!
//! The total excitation number is conserved, so everything is built sector by
//! sector. A basis state `|m₁,m₂,s₁,s₂⟩` is read either as bare (m photons, TLS in
//! g for `−` and e for `+`) or as dressed (m dressed bosons on branch s); the dressing
//! matrix maps one reading onto the other.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::fmt;

use crate::error::{Error, Result};
use crate::kbody::{coeff_exact, effective_onsite_n2, EffectiveOnSite};
use crate::model::{eigenvector_coeffs, Branch, SystemParams};
use crate::oracle::{apply_word, FockTls, LocalOp, OperatorMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoSiteParams {
    pub site: SystemParams,
    pub hop_j: f64,
}

impl TwoSiteParams {
    pub fn new(site: SystemParams, hop_j: f64) -> Result<Self> {
        let p = TwoSiteParams { site, hop_j };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.site.validate()?;
        if !(self.hop_j >= 0.0 && self.hop_j.is_finite()) {
            return Err(Error::InvalidParameter(format!("hop_j must be >= 0, got {}", self.hop_j)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct TwoSiteBasisState {
    pub m1: u64,
    pub m2: u64,
    pub s1: Branch,
    pub s2: Branch,
}

impl TwoSiteBasisState {
    pub fn new(m1: u64, m2: u64, s1: Branch, s2: Branch) -> Self {
        TwoSiteBasisState { m1, m2, s1, s2 }
    }

    pub fn n_tot(&self) -> u64 {
        self.site_number(0) + self.site_number(1)
    }

    /// `N_i`, bosons plus the TLS excitation on site i (0 or 1).
    pub fn site_number(&self, site: usize) -> u64 {
        let (m, s) = if site == 0 { (self.m1, self.s1) } else { (self.m2, self.s2) };
        m + (s == Branch::Plus) as u64
    }

    fn sites(&self) -> (FockTls, FockTls) {
        (
            FockTls::new(self.m1, self.s1 == Branch::Plus),
            FockTls::new(self.m2, self.s2 == Branch::Plus),
        )
    }

    fn from_sites(a: FockTls, b: FockTls) -> Self {
        let br = |e: bool| if e { Branch::Plus } else { Branch::Minus };
        TwoSiteBasisState::new(a.photons, b.photons, br(a.excited), br(b.excited))
    }
}

impl fmt::Display for TwoSiteBasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{},{},{},{}>", self.m1, self.m2, self.s1.symbol(), self.s2.symbol())
    }
}

const CONFIGS: [(Branch, Branch); 4] = [
    (Branch::Minus, Branch::Minus),
    (Branch::Plus, Branch::Minus),
    (Branch::Minus, Branch::Plus),
    (Branch::Plus, Branch::Plus),
];

/// Sector basis: branch configurations `−−, +−, −+, ++`; within each, boson pairs
/// `(M,0), (0,M), (M−1,1), (1,M−1), …`.
pub fn sector_basis(n_tot: u64) -> Vec<TwoSiteBasisState> {
    let mut out = Vec::new();
    for (s1, s2) in CONFIGS {
        let plus = (s1 == Branch::Plus) as u64 + (s2 == Branch::Plus) as u64;
        let Some(m) = n_tot.checked_sub(plus) else { continue };
        for a in (m.div_ceil(2)..=m).rev() {
            out.push(TwoSiteBasisState::new(a, m - a, s1, s2));
            if a != m - a {
                out.push(TwoSiteBasisState::new(m - a, a, s1, s2));
            }
        }
    }
    out
}

pub fn sector_dimensions(n_max: u64) -> Vec<usize> {
    (0..=n_max).map(|n| sector_basis(n).len()).collect()
}

/// Union of the sectors `0..=n_max` in order.
pub fn full_basis(n_max: u64) -> (Vec<TwoSiteBasisState>, Vec<usize>) {
    let mut states = Vec::new();
    let mut offsets = Vec::new();
    for n in 0..=n_max {
        offsets.push(states.len());
        states.extend(sector_basis(n));
    }
    (states, offsets)
}

/// A product term `coeff · word₁ ⊗ word₂`.
type Term<'a> = (f64, &'a [LocalOp], &'a [LocalOp]);

fn assemble(basis: &[TwoSiteBasisState], offsets: Vec<usize>, terms: &[Term<'_>]) -> OperatorMatrix {
    let n = basis.len();
    let mut m = DMatrix::zeros(n, n);
    for (col, st) in basis.iter().enumerate() {
        let (a, b) = st.sites();
        for &(coeff, w1, w2) in terms {
            if coeff == 0.0 {
                continue;
            }
            let Some((c1, a2)) = apply_word(w1, a) else { continue };
            let Some((c2, b2)) = apply_word(w2, b) else { continue };
            let target = TwoSiteBasisState::from_sites(a2, b2);
            if let Some(row) = basis.iter().position(|s| *s == target) {
                m[(row, col)] += coeff * c1 * c2;
            }
        }
    }
    OperatorMatrix { matrix: m, block_offsets: offsets }
}

use LocalOp::*;
const ID: &[LocalOp] = &[];

fn bare_terms(p: &TwoSiteParams) -> Vec<Term<'static>> {
    let s = &p.site;
    let half_wa = 0.5 * s.omega_a();
    vec![
        (s.omega_c, &[Number], ID),
        (s.omega_c, ID, &[Number]),
        (half_wa, &[SigmaZ], ID),
        (half_wa, ID, &[SigmaZ]),
        (s.g, &[ADag, SigmaMinus], ID),
        (s.g, &[A, SigmaPlus], ID),
        (s.g, ID, &[ADag, SigmaMinus]),
        (s.g, ID, &[A, SigmaPlus]),
        (p.hop_j, &[ADag], &[A]),
        (p.hop_j, &[A], &[ADag]),
    ]
}

/// Bare two-site Hamiltonian on one excitation sector.
pub fn build_bare_jch(params: &TwoSiteParams, n_tot: u64) -> Result<OperatorMatrix> {
    params.validate()?;
    Ok(assemble(&sector_basis(n_tot), vec![0], &bare_terms(params)))
}

/// Bare Hamiltonian on all sectors up to `n_max` at once, for conservation checks.
pub fn build_bare_jch_full(params: &TwoSiteParams, n_max: u64) -> Result<OperatorMatrix> {
    params.validate()?;
    let (basis, offsets) = full_basis(n_max);
    Ok(assemble(&basis, offsets, &bare_terms(params)))
}

/// ⟨bare|dressed⟩ on one site.
fn site_overlap(params: &SystemParams, bare: FockTls, dressed: FockTls) -> Result<f64> {
    let n = bare.excitations();
    if n != dressed.excitations() {
        return Ok(0.0);
    }
    if n == 0 {
        return Ok(1.0);
    }
    let (c, s) = eigenvector_coeffs(params, n)?;
    Ok(match (dressed.excited, bare.excited) {
        (false, false) => c,
        (false, true) => -s,
        (true, false) => s,
        (true, true) => c,
    })
}

/// Dressing matrix T = T₁ ⊗ T₂ restricted to a sector; columns are dressed states.
pub fn dressing_matrix(params: &TwoSiteParams, n_tot: u64) -> Result<DMatrix<f64>> {
    params.validate()?;
    let basis = sector_basis(n_tot);
    let n = basis.len();
    let mut t = DMatrix::zeros(n, n);
    for (i, bare) in basis.iter().enumerate() {
        let (b1, b2) = bare.sites();
        for (j, dressed) in basis.iter().enumerate() {
            let (d1, d2) = dressed.sites();
            t[(i, j)] = site_overlap(&params.site, b1, d1)? * site_overlap(&params.site, b2, d2)?;
        }
    }
    Ok(t)
}

/// `T†HT` on one sector: on-site parts become diagonal, hopping stays off-diagonal.
pub fn dressed_transform_two_site(params: &TwoSiteParams, n_tot: u64) -> Result<OperatorMatrix> {
    let h = build_bare_jch(params, n_tot)?;
    let t = dressing_matrix(params, n_tot)?;
    Ok(OperatorMatrix { matrix: t.transpose() * h.matrix * t, block_offsets: vec![0] })
}

/// `J_eff^(1) = J c₁²`, `J_eff^(2) = J c₁(c₁c₂ + s₁s₂/√2)`.
pub fn j_eff(params: &TwoSiteParams, manifold: u64) -> Result<f64> {
    params.validate()?;
    let (c1, s1) = eigenvector_coeffs(&params.site, 1)?;
    match manifold {
        1 => Ok(params.hop_j * c1 * c1),
        2 => {
            let (c2, s2) = eigenvector_coeffs(&params.site, 2)?;
            Ok(params.hop_j * c1 * (c1 * c2 + s1 * s2 * FRAC_1_SQRT_2))
        }
        _ => Err(Error::InvalidParameter(format!("manifold must be 1 or 2, got {manifold}"))),
    }
}

/// Hopping amplitudes from the `−−` subspace into the other branches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Outcoupling {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub k1: f64,
    pub k2: f64,
}

pub fn outcoupling(params: &TwoSiteParams) -> Result<Outcoupling> {
    params.validate()?;
    let j = params.hop_j;
    let (c1, s1) = eigenvector_coeffs(&params.site, 1)?;
    let (c2, s2) = eigenvector_coeffs(&params.site, 2)?;
    Ok(Outcoupling {
        m1: j * c1 * s1,
        m2: j * s1 * (SQRT_2 * c1 * c2 + s1 * s2),
        m3: j * c1 * (SQRT_2 * c1 * s2 - s1 * c2),
        k1: j * c1 * (SQRT_2 * s1 * c2 - c1 * s2),
        k2: j * s1 * (SQRT_2 * s1 * c2 - c1 * s2),
    })
}

/// Projected `−−` blocks on `{|10⟩,|01⟩}` and `{|20⟩,|02⟩,|11⟩}`.
pub fn hbar_blocks(params: &TwoSiteParams) -> Result<(Matrix2<f64>, Matrix3<f64>)> {
    let on = effective_onsite_n2(&params.site, Branch::Minus)?;
    let (o, u) = (on.omega_eff, on.u_eff);
    let j1 = j_eff(params, 1)?;
    let j2 = SQRT_2 * j_eff(params, 2)?;
    Ok((
        Matrix2::new(o, j1, j1, o),
        Matrix3::new(
            2.0 * o + u, 0.0, j2,
            0.0, 2.0 * o + u, j2,
            j2, j2, 2.0 * o,
        ),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoseHubbardParams {
    pub mu: f64,
    pub u: f64,
    pub j: f64,
}

pub fn bose_hubbard_blocks(bh: &BoseHubbardParams) -> (Matrix2<f64>, Matrix3<f64>) {
    let (mu, u, j) = (bh.mu, bh.u, bh.j);
    let j2 = SQRT_2 * j;
    (
        Matrix2::new(-mu, j, j, -mu),
        Matrix3::new(
            -2.0 * mu + u, 0.0, j2,
            0.0, -2.0 * mu + u, j2,
            j2, j2, -2.0 * mu,
        ),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Overlaps {
    pub dressed_mi: f64,
    pub photonic_mi: f64,
    pub dressed_sf: f64,
    pub photonic_sf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundStateReport {
    pub energy: f64,
    pub basis: Vec<String>,
    /// Ground state in the dressed n_tot = 2 basis.
    pub amplitudes: Vec<f64>,
    pub variance: f64,
    pub variance_site2: f64,
    pub overlaps: Overlaps,
    pub j_eff1: f64,
    pub j_eff2: f64,
    pub u_eff: f64,
    /// J_eff^(2) / U_eff; infinite when U_eff vanishes.
    pub effective_ratio: f64,
    pub gap: f64,
    pub near_degenerate: bool,
}

/// `⟨N_i²⟩ − ⟨N_i⟩²` for a state given in either reading of the basis.
pub fn number_variance(amplitudes: &[f64], basis: &[TwoSiteBasisState], site: usize) -> f64 {
    let norm: f64 = amplitudes.iter().map(|a| a * a).sum();
    let (mut m1, mut m2) = (0.0, 0.0);
    for (a, st) in amplitudes.iter().zip(basis) {
        let n = st.site_number(site) as f64;
        m1 += a * a * n;
        m2 += a * a * n * n;
    }
    ((m2 / norm) - (m1 / norm).powi(2)).max(0.0)
}

/// Ideal two-particle states in the `−−` layout `{|20⟩,|02⟩,|11⟩}`.
pub fn ideal_superfluid(basis: &[TwoSiteBasisState]) -> DVector<f64> {
    ideal(basis, &[((2, 0), 0.5), ((0, 2), 0.5), ((1, 1), -FRAC_1_SQRT_2)])
}

pub fn ideal_mott(basis: &[TwoSiteBasisState]) -> DVector<f64> {
    ideal(basis, &[((1, 1), 1.0)])
}

fn ideal(basis: &[TwoSiteBasisState], amps: &[((u64, u64), f64)]) -> DVector<f64> {
    let mut v = DVector::zeros(basis.len());
    for &((m1, m2), a) in amps {
        let target = TwoSiteBasisState::new(m1, m2, Branch::Minus, Branch::Minus);
        if let Some(i) = basis.iter().position(|s| *s == target) {
            v[i] = a;
        }
    }
    v
}

fn lowest_two(matrix: DMatrix<f64>) -> Result<(f64, f64, DVector<f64>)> {
    let eig = SymmetricEigen::try_new(matrix, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("two-site eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut v = eig.eigenvectors.column(order[0]).clone_owned();
    // fix the arbitrary overall sign so reports are reproducible
    let lead = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
    if lead < 0.0 {
        v = -v;
    }
    let second = order.get(1).map_or(f64::INFINITY, |&i| eig.eigenvalues[i]);
    Ok((eig.eigenvalues[order[0]], second, v))
}

/// Lowest state of the n_tot = 2 sector with all four branch subspaces included.
pub fn ground_state(params: &TwoSiteParams) -> Result<GroundStateReport> {
    let basis = sector_basis(2);
    let h = dressed_transform_two_site(params, 2)?;
    let t = dressing_matrix(params, 2)?;
    let (energy, second, v) = lowest_two(h.matrix)?;
    let gap = second - energy;

    let sf = ideal_superfluid(&basis);
    let mi = ideal_mott(&basis);
    let bare = &t * &v;
    let amps: Vec<f64> = v.iter().copied().collect();
    let overlaps = Overlaps {
        dressed_mi: clamp_unit(mi.dot(&v).powi(2)),
        photonic_mi: clamp_unit(mi.dot(&bare).powi(2)),
        dressed_sf: clamp_unit(sf.dot(&v).powi(2)),
        photonic_sf: clamp_unit(sf.dot(&bare).powi(2)),
    };
    let j_eff1 = j_eff(params, 1)?;
    let j_eff2 = j_eff(params, 2)?;
    let u_eff = coeff_exact(&params.site, 2, Branch::Minus)?;
    let effective_ratio = if u_eff == 0.0 {
        if j_eff2 == 0.0 { f64::NAN } else { f64::INFINITY }
    } else {
        j_eff2 / u_eff
    };
    Ok(GroundStateReport {
        energy,
        basis: basis.iter().map(|s| s.to_string()).collect(),
        variance: number_variance(&amps, &basis, 0),
        variance_site2: number_variance(&amps, &basis, 1),
        amplitudes: amps,
        overlaps,
        j_eff1,
        j_eff2,
        u_eff,
        effective_ratio,
        gap,
        near_degenerate: gap < 1e-10,
    })
}

fn clamp_unit(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Ground-state vector of an arbitrary sector matrix, for model comparisons.
pub fn lowest_eigenvector(m: &OperatorMatrix) -> Result<(f64, DVector<f64>)> {
    let (e, _, v) = lowest_two(m.matrix.clone())?;
    Ok((e, v))
}

/// Dispersive-limit model in the dressed sector basis.
///
/// Each site carries the branch-dependent on-site ladder `Ω₀ m + U m(m−1)/2 + E₀`,
/// bosons hop with the bare J, and hopping leaks into the other branch through
/// `Jλ(ã₁†σ̃₂⁻ + ã₁σ̃₂⁺ + ã₂†σ̃₁⁻ + ã₂σ̃₁⁺)`.
pub fn dispersive_hamiltonian(params: &TwoSiteParams, n_tot: u64) -> Result<OperatorMatrix> {
    params.validate()?;
    let site = &params.site;
    let lambda = if site.g == 0.0 { 0.0 } else { site.lambda()? };
    if lambda.abs() > 0.1 {
        log::warn!("dispersive model used at lambda = {lambda}, outside its intended range |lambda| <= 0.1");
    }
    let onsite: [EffectiveOnSite; 2] = [
        effective_onsite_n2(site, Branch::Minus)?,
        effective_onsite_n2(site, Branch::Plus)?,
    ];
    let level = |m: u64, s: Branch| {
        let o = &onsite[(s == Branch::Plus) as usize];
        let m = m as f64;
        o.omega_eff * m + 0.5 * o.u_eff * m * (m - 1.0) + o.e0
    };
    let basis = sector_basis(n_tot);
    let jl = params.hop_j * lambda;
    let mut h = assemble(
        &basis,
        vec![0],
        &[
            (params.hop_j, &[ADag], &[A]),
            (params.hop_j, &[A], &[ADag]),
            (jl, &[ADag], &[SigmaMinus]),
            (jl, &[A], &[SigmaPlus]),
            (jl, &[SigmaMinus], &[ADag]),
            (jl, &[SigmaPlus], &[A]),
        ],
    );
    for (i, st) in basis.iter().enumerate() {
        h.matrix[(i, i)] += level(st.m1, st.s1) + level(st.m2, st.s2);
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{eigenvalue, DressedLabel};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn two(omega_c: f64, delta: f64, g: f64, j: f64) -> TwoSiteParams {
        TwoSiteParams::new(SystemParams::new(omega_c, delta, g).unwrap(), j).unwrap()
    }

    fn idx(basis: &[TwoSiteBasisState], m1: u64, m2: u64, s1: Branch, s2: Branch) -> usize {
        basis.iter().position(|s| *s == TwoSiteBasisState::new(m1, m2, s1, s2)).unwrap()
    }

    use Branch::{Minus as M, Plus as P};

    #[test]
    fn sector_layout() {
        assert_eq!(sector_dimensions(2), vec![1, 4, 8]);
        let names: Vec<String> = sector_basis(2).iter().map(|s| s.to_string()).collect();
        assert_eq!(
            names,
            ["|2,0,-,->", "|0,2,-,->", "|1,1,-,->", "|1,0,+,->", "|0,1,+,->", "|1,0,-,+>", "|0,1,-,+>", "|0,0,+,+>"]
        );
        for n in 0..6 {
            assert!(sector_basis(n).iter().all(|s| s.n_tot() == n));
        }
        assert_eq!(sector_dimensions(4), vec![1, 4, 8, 12, 16]);
        assert!(TwoSiteParams::new(SystemParams::new(1.0, 1.0, 1.0).unwrap(), -0.1).is_err());
    }

    #[test]
    fn sectors_do_not_mix() {
        let p = two(5.0, 0.4, 1.2, 0.7);
        let full = build_bare_jch_full(&p, 3).unwrap();
        assert_eq!(full.off_block_max(), 0.0);
        assert_eq!(full.hermiticity_residual(), 0.0);
        let (basis, _) = full_basis(3);
        let n = DMatrix::from_diagonal(&DVector::from_iterator(
            basis.len(),
            basis.iter().map(|s| s.n_tot() as f64),
        ));
        assert_eq!(full.commutator_norm(&n), 0.0);
    }

    #[test]
    fn uncoupled_sites_are_diagonal_in_dressed_basis() {
        let p = two(4.0, 0.6, 1.1, 0.0);
        for n in 0..=3 {
            let d = dressed_transform_two_site(&p, n).unwrap();
            assert!(d.off_diagonal_max() < 1e-13);
            for (i, st) in sector_basis(n).iter().enumerate() {
                let l1 = DressedLabel::new(st.site_number(0), st.s1).unwrap();
                let l2 = DressedLabel::new(st.site_number(1), st.s2).unwrap();
                let e = eigenvalue(&p.site, &l1) + eigenvalue(&p.site, &l2);
                assert_relative_eq!(d.matrix[(i, i)], e, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_coupling_transform_is_identity() {
        let p = two(4.0, 0.6, 0.0, 0.8);
        let t = dressing_matrix(&p, 2).unwrap();
        assert_eq!(t, DMatrix::identity(8, 8));
        let d = dressed_transform_two_site(&p, 2).unwrap();
        assert_eq!(d.matrix, build_bare_jch(&p, 2).unwrap().matrix);
    }

    #[test]
    fn effective_hopping_examples() {
        let res = two(10.0, 0.0, 1.0, 0.8);
        assert_relative_eq!(j_eff(&res, 1).unwrap(), 0.4, epsilon = 1e-15);
        assert_relative_eq!(j_eff(&res, 2).unwrap(), 0.8 * (1.0 + SQRT_2) / 4.0, epsilon = 1e-15);
        let disp = two(10.0, 1e4, 1.0, 0.8);
        assert!((j_eff(&disp, 1).unwrap() - 0.8).abs() < 1e-6);
        assert!((j_eff(&disp, 2).unwrap() - 0.8).abs() < 1e-6);
        assert!(j_eff(&res, 3).is_err());
    }

    #[test]
    fn outcoupling_examples() {
        let res = two(10.0, 0.0, 1.0, 2.0);
        assert_relative_eq!(outcoupling(&res).unwrap().m1, 1.0, epsilon = 1e-15);
        let l = 0.01;
        let j = 3.0;
        let o = outcoupling(&two(10.0, 1.0 / l, 1.0, j)).unwrap();
        assert!((o.m1 / (l * j) - 1.0).abs() < 1e-3);
        assert!((o.m2 / (SQRT_2 * l * j) - 1.0).abs() < 1e-3);
        assert!((o.m3 / (l * j) - 1.0).abs() < 1e-3);
        assert!(o.k1.abs() <= 10.0 * l.powi(3) * j);
        assert!(o.k2.abs() <= 10.0 * l.powi(4) * j);
    }

    #[test]
    fn outcouplings_are_dressed_matrix_elements() {
        let p = two(6.0, 0.9, 1.3, 0.45);
        let o = outcoupling(&p).unwrap();
        let b1 = sector_basis(1);
        let h1 = dressed_transform_two_site(&p, 1).unwrap().matrix;
        assert_relative_eq!(h1[(idx(&b1, 0, 0, P, M), idx(&b1, 0, 1, M, M))], o.m1, epsilon = 1e-13);
        let b = sector_basis(2);
        let h = dressed_transform_two_site(&p, 2).unwrap().matrix;
        let el = |r: (u64, u64, Branch, Branch), c: (u64, u64, Branch, Branch)| {
            h[(idx(&b, r.0, r.1, r.2, r.3), idx(&b, c.0, c.1, c.2, c.3))]
        };
        assert_relative_eq!(el((0, 1, P, M), (0, 2, M, M)), o.m2, epsilon = 1e-13);
        assert_relative_eq!(el((1, 0, P, M), (1, 1, M, M)), o.m3, epsilon = 1e-13);
        assert_relative_eq!(el((0, 1, P, M), (2, 0, M, M)), o.k1, epsilon = 1e-13);
        assert_relative_eq!(el((0, 0, P, P), (2, 0, M, M)), o.k2, epsilon = 1e-13);
        // site-swapped partners
        assert_relative_eq!(el((1, 0, M, P), (2, 0, M, M)), o.m2, epsilon = 1e-13);
        assert_relative_eq!(el((0, 1, M, P), (1, 1, M, M)), o.m3, epsilon = 1e-13);
        assert_relative_eq!(el((1, 0, M, P), (0, 2, M, M)), o.k1, epsilon = 1e-13);
        assert_relative_eq!(el((0, 0, P, P), (0, 2, M, M)), o.k2, epsilon = 1e-13);
    }

    #[test]
    fn hbar_matches_dressed_submatrix() {
        let p = two(10.0, 1.0, 1.0, 0.3);
        let (b1, b2) = hbar_blocks(&p).unwrap();
        let c0 = coeff_exact(&p.site, 0, M).unwrap();
        let shift = 2.0 * c0 - p.site.omega_c;
        let d1 = dressed_transform_two_site(&p, 1).unwrap().matrix;
        let d2 = dressed_transform_two_site(&p, 2).unwrap().matrix;
        for i in 0..2 {
            for j in 0..2 {
                let s = if i == j { shift } else { 0.0 };
                assert!((d1[(i, j)] - s - b1[(i, j)]).abs() < 1e-12);
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let s = if i == j { shift } else { 0.0 };
                assert!((d2[(i, j)] - s - b2[(i, j)]).abs() < 1e-12, "({i},{j})");
            }
        }
    }

    #[test]
    fn hbar_reduces_to_bose_hubbard() {
        let p = two(7.0, 1.0, 0.0, 0.3);
        let (h1, h2) = hbar_blocks(&p).unwrap();
        let (b1, b2) = bose_hubbard_blocks(&BoseHubbardParams { mu: -7.0, u: 0.0, j: 0.3 });
        assert_eq!(h1, b1);
        assert_eq!(h2, b2);
        // with J_eff^(1) in place of J the n = 1 blocks agree but n = 2 does not
        let p = two(7.0, 0.5, 1.0, 0.3);
        let (h1, h2) = hbar_blocks(&p).unwrap();
        let on = effective_onsite_n2(&p.site, M).unwrap();
        let bh = BoseHubbardParams { mu: -on.omega_eff, u: on.u_eff, j: j_eff(&p, 1).unwrap() };
        let (b1, b2) = bose_hubbard_blocks(&bh);
        assert!((h1 - b1).amax() < 1e-15);
        assert!((h2 - b2).amax() > 1e-3);
    }

    #[test]
    fn bose_hubbard_examples() {
        let (_, b2) = bose_hubbard_blocks(&BoseHubbardParams { mu: 0.4, u: 2.0, j: 0.0 });
        assert_eq!(b2, Matrix3::from_diagonal(&nalgebra::Vector3::new(1.2, 1.2, -0.8)));
        let (_, b2) = bose_hubbard_blocks(&BoseHubbardParams { mu: 0.4, u: 0.0, j: 1.0 });
        let eig = SymmetricEigen::new(b2);
        let i = eig.eigenvalues.imin();
        let v = eig.eigenvectors.column(i);
        let sf = nalgebra::Vector3::new(0.5, 0.5, -FRAC_1_SQRT_2);
        assert_relative_eq!(v.dot(&sf).abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ideal_states_are_not_orthogonal() {
        let b = sector_basis(2);
        assert_relative_eq!(ideal_mott(&b).dot(&ideal_superfluid(&b)), -FRAC_1_SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn mott_state_without_hopping() {
        let r = ground_state(&two(1000.0, 2.0, 1.0, 0.0)).unwrap();
        assert_relative_eq!(r.overlaps.dressed_mi, 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.overlaps.dressed_sf, 0.5, epsilon = 1e-10);
        assert!(r.variance < 1e-12);
        assert!(!r.near_degenerate);
    }

    #[test]
    fn free_photons_are_superfluid() {
        let r = ground_state(&two(1.0, 1.0, 0.0, 1.0)).unwrap();
        assert_relative_eq!(r.overlaps.photonic_sf, 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.variance, 0.5, epsilon = 1e-12);
        let norm: f64 = r.amplitudes.iter().map(|a| a * a).sum();
        assert_relative_eq!(norm, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn dispersive_model_checks() {
        let p = two(3.0, 1.0, 0.0, 0.7);
        let d = dispersive_hamiltonian(&p, 2).unwrap();
        assert!((d.matrix - build_bare_jch(&p, 2).unwrap().matrix).amax() < 1e-14);
        // cross terms are λJ times dressed operator elements
        let l = 0.02;
        let p = two(50.0, 1.0 / l, 1.0, 0.9);
        let d = dispersive_hamiltonian(&p, 1).unwrap().matrix;
        let b = sector_basis(1);
        assert_relative_eq!(d[(idx(&b, 0, 0, P, M), idx(&b, 0, 1, M, M))], l * 0.9, max_relative = 1e-12);
        assert_relative_eq!(d[(idx(&b, 0, 0, M, P), idx(&b, 1, 0, M, M))], l * 0.9, max_relative = 1e-12);
        let b2 = sector_basis(2);
        let d2 = dispersive_hamiltonian(&p, 2).unwrap().matrix;
        assert_relative_eq!(
            d2[(idx(&b2, 0, 1, P, M), idx(&b2, 0, 2, M, M))],
            l * 0.9 * SQRT_2,
            max_relative = 1e-12
        );
        assert!(dispersive_hamiltonian(&two(3.0, 0.0, 1.0, 0.1), 2).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn structural_invariants(
            delta in -5.0f64..5.0,
            g in 0.0f64..3.0,
            j in 0.0f64..3.0,
        ) {
            let p = two(20.0, delta, g, j);
            for n in 0..=3 {
                prop_assert!(build_bare_jch(&p, n).unwrap().hermiticity_residual() == 0.0);
                prop_assert!(dressed_transform_two_site(&p, n).unwrap().hermiticity_residual() <= 1e-12);
                let t = dressing_matrix(&p, n).unwrap();
                let k = t.nrows();
                prop_assert!((t.transpose() * &t - DMatrix::identity(k, k)).amax() <= 1e-12);
            }
            let r = ground_state(&p).unwrap();
            let o = r.overlaps;
            for x in [o.dressed_mi, o.photonic_mi, o.dressed_sf, o.photonic_sf] {
                prop_assert!((0.0..=1.0).contains(&x));
            }
            // the two ideal states overlap by 1/√2, so the pair bound is 1 + 1/√2 rather than 1
            prop_assert!(o.dressed_mi + o.dressed_sf <= 1.0 + FRAC_1_SQRT_2 + 1e-12);
            prop_assert!(o.photonic_mi + o.photonic_sf <= 1.0 + FRAC_1_SQRT_2 + 1e-12);
            prop_assert!(r.variance >= 0.0);
            // parity: both sites see the same number fluctuations
            prop_assert!((r.variance - r.variance_site2).abs() <= 1e-12);
            // the variance does not depend on which reading of the basis is used
            let t = dressing_matrix(&p, 2).unwrap();
            let bare: Vec<f64> = (&t * DVector::from_vec(r.amplitudes.clone())).iter().copied().collect();
            let basis = sector_basis(2);
            prop_assert!((number_variance(&bare, &basis, 0) - r.variance).abs() <= 1e-12);
        }
    }
}
