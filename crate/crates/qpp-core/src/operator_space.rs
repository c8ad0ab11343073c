//! States and operators: the nice operator basis, density-matrix and
//! coherence-vector representations, and grouped eigendecomposition.
//!
//! A *nice operator basis* is a set of d² orthonormal Hermitian operators
//! {F_0, ..., F_J} with F_0 = I/√d and Tr F_j = 0 for j ≥ 1. Expanding a
//! density matrix in it,
//!
//!   ρ = I/d + Σ_j v_j F_j,     v_j = Tr(ρ F_j),
//!
//! yields the real *coherence vector* v ∈ ℝ^J (J = d² − 1), which fully
//! determines the state. For a qubit the unnormalized Pauli expansion
//! ρ = ½(I + v·σ) gives the *Bloch vector*, which differs from the coherence
//! vector by a factor of √2. Both conventions are carried explicitly to keep
//! the factor from leaking into formulas.

use nalgebra::{Complex, DMatrix, DVector, Vector3};

use crate::error::{QppError, Result};

pub type C64 = Complex<f64>;

/// Normalization convention for the real coordinate vector of a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convention {
    /// Coordinates w.r.t. an orthonormal Hermitian basis (any d).
    Coherence,
    /// Unnormalized Pauli coordinates, ‖v‖ ≤ 1 (qubit only).
    Bloch,
}

/// Qubit Bloch coordinates are √2 times the coherence coordinates.
pub const BLOCH_PER_COHERENCE: f64 = std::f64::consts::SQRT_2;

/// Orthonormal Hermitian basis {F_j} with F_0 = I/√d.
#[derive(Debug, Clone)]
pub struct OperatorBasis {
    dim: usize,
    elements: Vec<DMatrix<C64>>,
}

impl OperatorBasis {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// All d² elements, F_0 first.
    pub fn elements(&self) -> &[DMatrix<C64>] {
        &self.elements
    }

    /// The J = d² − 1 traceless elements F_1 ... F_J.
    pub fn traceless(&self) -> &[DMatrix<C64>] {
        &self.elements[1..]
    }
}

/// Build the nice operator basis for dimension `d` from the generalized
/// Gell-Mann construction: symmetric pairs, antisymmetric pairs, then
/// diagonal elements, each normalized to ⟨F_j, F_k⟩ = δ_jk.
///
/// For d = 2 the traceless elements are σ^x/√2, σ^y/√2, σ^z/√2 in that order.
pub fn build_nice_basis(d: usize) -> Result<OperatorBasis> {
    if d < 2 {
        return Err(QppError::InvalidDimension(d));
    }
    let mut elements = Vec::with_capacity(d * d);
    let inv_sqrt_d = 1.0 / (d as f64).sqrt();
    elements.push(DMatrix::<C64>::identity(d, d) * C64::new(inv_sqrt_d, 0.0));

    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    // Symmetric family: (|j⟩⟨k| + |k⟩⟨j|)/√2, j < k.
    for j in 0..d {
        for k in (j + 1)..d {
            let mut m = DMatrix::<C64>::zeros(d, d);
            m[(j, k)] = C64::new(inv_sqrt2, 0.0);
            m[(k, j)] = C64::new(inv_sqrt2, 0.0);
            elements.push(m);
        }
    }
    // Antisymmetric family: (-i|j⟩⟨k| + i|k⟩⟨j|)/√2, j < k.
    for j in 0..d {
        for k in (j + 1)..d {
            let mut m = DMatrix::<C64>::zeros(d, d);
            m[(j, k)] = C64::new(0.0, -inv_sqrt2);
            m[(k, j)] = C64::new(0.0, inv_sqrt2);
            elements.push(m);
        }
    }
    // Diagonal family: (Σ_{m<l}|m⟩⟨m| - l|l⟩⟨l|)/√(l(l+1)), l = 1..d-1.
    for l in 1..d {
        let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
        let mut m = DMatrix::<C64>::zeros(d, d);
        for i in 0..l {
            m[(i, i)] = C64::new(norm, 0.0);
        }
        m[(l, l)] = C64::new(-(l as f64) * norm, 0.0);
        elements.push(m);
    }
    Ok(OperatorBasis { dim: d, elements })
}

/// Hilbert-Schmidt inner product ⟨A, B⟩ = Tr(A† B).
pub fn hs_inner(a: &DMatrix<C64>, b: &DMatrix<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Frobenius norm (= Hilbert-Schmidt norm) of a complex matrix.
pub fn hs_norm(a: &DMatrix<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest elementwise deviation from Hermiticity.
pub fn hermiticity_residual(a: &DMatrix<C64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// A validated density matrix: Hermitian, unit trace, positive semidefinite
/// up to a small slack for integrator drift.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    dim: usize,
    entries: DMatrix<C64>,
}

const HERMITICITY_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
/// Eigenvalue slack below zero tolerated on construction.
pub const POSITIVITY_SLACK: f64 = 1e-10;

impl DensityMatrix {
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        let d = entries.nrows();
        if d < 2 || entries.ncols() != d {
            return Err(QppError::InvalidDimension(d));
        }
        let herm = hermiticity_residual(&entries);
        if herm > HERMITICITY_TOL {
            return Err(QppError::NotHermitian(herm));
        }
        let trace: C64 = entries.trace();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(QppError::NumericalFailure(format!(
                "trace is {} + {}i, expected 1",
                trace.re, trace.im
            )));
        }
        let min_eig = min_eigenvalue(&entries);
        if min_eig < -POSITIVITY_SLACK {
            return Err(QppError::PositivityViolation(min_eig));
        }
        Ok(Self { dim: d, entries })
    }

    /// Maximally mixed state I/d.
    pub fn maximally_mixed(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(QppError::InvalidDimension(d));
        }
        let entries = DMatrix::<C64>::identity(d, d) * C64::new(1.0 / d as f64, 0.0);
        Ok(Self { dim: d, entries })
    }

    /// Pure state |ψ⟩⟨ψ| from a (not necessarily normalized) vector.
    pub fn from_pure(psi: &DVector<C64>) -> Result<Self> {
        let n2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if n2 <= 0.0 {
            return Err(QppError::NumericalFailure("zero state vector".into()));
        }
        let d = psi.len();
        let mut m = DMatrix::<C64>::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = psi[i] * psi[j].conj() / n2;
            }
        }
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    /// Tr ρ².
    pub fn purity(&self) -> f64 {
        self.entries
            .iter()
            .zip(self.entries.transpose().iter().map(|z| z.conj()))
            .map(|(a, b)| (a * b).re)
            .sum::<f64>()
    }
}

fn min_eigenvalue(a: &DMatrix<C64>) -> f64 {
    let sym = (a + a.adjoint()) * C64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Real coordinate vector of a state, in either convention.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    dim: usize,
    coords: DVector<f64>,
    convention: Convention,
}

impl StateVector {
    /// Coherence-convention state of dimension `d` (coords length d² − 1).
    pub fn coherence(d: usize, coords: DVector<f64>) -> Result<Self> {
        if d < 2 {
            return Err(QppError::InvalidDimension(d));
        }
        if coords.len() != d * d - 1 {
            return Err(QppError::DimensionMismatch(coords.len(), d * d - 1));
        }
        Ok(Self { dim: d, coords, convention: Convention::Coherence })
    }

    /// Qubit Bloch vector (x, y, z).
    pub fn bloch(x: f64, y: f64, z: f64) -> Self {
        Self {
            dim: 2,
            coords: DVector::from_vec(vec![x, y, z]),
            convention: Convention::Bloch,
        }
    }

    pub fn from_bloch3(v: &Vector3<f64>) -> Self {
        Self::bloch(v.x, v.y, v.z)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn norm(&self) -> f64 {
        self.coords.norm()
    }

    /// Bloch 3-vector view. Panics if not a Bloch-convention qubit state.
    pub fn bloch3(&self) -> Vector3<f64> {
        assert_eq!(self.convention, Convention::Bloch, "state is not in Bloch convention");
        Vector3::new(self.coords[0], self.coords[1], self.coords[2])
    }

    /// Convert a qubit state between the Bloch and coherence conventions.
    pub fn to_convention(&self, target: Convention) -> Result<Self> {
        if self.convention == target {
            return Ok(self.clone());
        }
        if self.dim != 2 {
            return Err(QppError::InvalidDimension(self.dim));
        }
        let coords = match target {
            Convention::Bloch => &self.coords * BLOCH_PER_COHERENCE,
            Convention::Coherence => &self.coords / BLOCH_PER_COHERENCE,
        };
        Ok(Self { dim: 2, coords, convention: target })
    }

    /// Purity P = Tr ρ² computed from the coordinates.
    pub fn purity(&self) -> f64 {
        purity(self)
    }
}

/// Tr ρ² as a function of the coordinate vector:
/// 1/d + ‖v‖² in the coherence convention, ½(1 + ‖v‖²) in Bloch.
pub fn purity(v: &StateVector) -> f64 {
    match v.convention {
        Convention::Coherence => 1.0 / v.dim as f64 + v.coords.norm_squared(),
        Convention::Bloch => 0.5 * (1.0 + v.coords.norm_squared()),
    }
}

/// Coordinates v_j = Tr(ρ F_j) of a density matrix (coherence convention).
pub fn to_state_vector(rho: &DensityMatrix, basis: &OperatorBasis) -> Result<StateVector> {
    if rho.dim() != basis.dim() {
        return Err(QppError::DimensionMismatch(rho.dim(), basis.dim()));
    }
    let coords: Vec<f64> = basis
        .traceless()
        .iter()
        .map(|f| hs_inner(f, rho.entries()).re)
        .collect();
    StateVector::coherence(rho.dim(), DVector::from_vec(coords))
}

/// Reconstruct ρ = I/d + Σ_j v_j F_j (or ½(I + v·σ) in Bloch convention) and
/// validate it. Coordinates outside the state space fail with
/// `PositivityViolation`.
pub fn from_state_vector(v: &StateVector, basis: &OperatorBasis) -> Result<DensityMatrix> {
    let coh = v.to_convention(Convention::Coherence)?;
    if coh.dim() != basis.dim() {
        return Err(QppError::DimensionMismatch(coh.dim(), basis.dim()));
    }
    DensityMatrix::new(hermitian_from_coords(coh.coords(), basis, true))
}

/// Σ_j c_j F_j, optionally with the I/d offset that turns traceless
/// coordinates into a unit-trace matrix.
pub fn hermitian_from_coords(
    coords: &DVector<f64>,
    basis: &OperatorBasis,
    with_identity: bool,
) -> DMatrix<C64> {
    let d = basis.dim();
    let mut m = if with_identity {
        DMatrix::<C64>::identity(d, d) * C64::new(1.0 / d as f64, 0.0)
    } else {
        DMatrix::<C64>::zeros(d, d)
    };
    for (c, f) in coords.iter().zip(basis.traceless()) {
        m += f * C64::new(*c, 0.0);
    }
    m
}

/// Spectral decomposition with near-degenerate eigenvalues merged into
/// common projectors.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub projectors: Vec<DMatrix<C64>>,
    pub group_tol: f64,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.projectors.first().map_or(0, |p| p.nrows())
    }

    /// Rank of each projector.
    pub fn multiplicities(&self) -> Vec<usize> {
        self.projectors
            .iter()
            .map(|p| p.trace().re.round() as usize)
            .collect()
    }

    /// Σ λ_i Π_i.
    pub fn reconstruct(&self) -> DMatrix<C64> {
        let d = self.dim();
        let mut m = DMatrix::<C64>::zeros(d, d);
        for (l, p) in self.eigenvalues.iter().zip(&self.projectors) {
            m += p * C64::new(*l, 0.0);
        }
        m
    }
}

/// Default degeneracy grouping tolerance, relative to the spectral range.
pub const DEFAULT_GROUP_TOL_REL: f64 = 1e-9;

/// Eigendecompose a Hermitian matrix, merging eigenvalues that chain within
/// `group_tol` of each other into a single eigenspace projector.
pub fn eigendecompose_grouped(a: &DMatrix<C64>, group_tol: f64) -> Result<SpectralDecomposition> {
    let herm = hermiticity_residual(a);
    let scale = a.iter().map(|z| z.norm()).fold(0.0f64, f64::max).max(1.0);
    if herm > 1e-10 * scale {
        return Err(QppError::NotHermitian(herm));
    }
    let sym = (a + a.adjoint()) * C64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let d = a.nrows();

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let mut eigenvalues = Vec::new();
    let mut projectors = Vec::new();
    let mut k = 0;
    while k < d {
        let mut members = vec![order[k]];
        while k + 1 < d
            && eig.eigenvalues[order[k + 1]] - eig.eigenvalues[order[k]] <= group_tol
        {
            k += 1;
            members.push(order[k]);
        }
        k += 1;
        let mean =
            members.iter().map(|&i| eig.eigenvalues[i]).sum::<f64>() / members.len() as f64;
        let mut proj = DMatrix::<C64>::zeros(d, d);
        for &i in &members {
            let col = eig.eigenvectors.column(i);
            for r in 0..d {
                for c in 0..d {
                    proj[(r, c)] += col[r] * col[c].conj();
                }
            }
        }
        eigenvalues.push(mean);
        projectors.push(proj);
    }
    Ok(SpectralDecomposition { eigenvalues, projectors, group_tol })
}

/// Group tolerance scaled to the spectral range of `a`.
pub fn default_group_tol(a: &DMatrix<C64>) -> f64 {
    let sym = (a + a.adjoint()) * C64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    DEFAULT_GROUP_TOL_REL * (max - min).max(1e-300)
}
