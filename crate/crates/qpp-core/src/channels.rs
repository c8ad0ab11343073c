//! Noise channels: Lindblad-operator form and the (R, c) matrix/vector form
//! of the dissipator, with conversions between them.
//!
//! The dissipative part of the master equation,
//!
//!   L_D(ρ) = Σ_α γ_α (L_α ρ L_α† − ½{L_α† L_α, ρ}),
//!
//! acts on coherence vectors as v̇ = R v + c with
//!
//!   R_ij = Tr[F_i L_D(F_j)],   c_j = (1/d) Tr[F_j L_D(I)].
//!
//! c = 0 iff the channel is unital. For a qubit, R is symmetric. The qubit
//! built-ins carry their textbook (R, c) in the Bloch convention, where R is
//! the same matrix as in the coherence convention and c picks up a √2.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{QppError, Result};
use crate::operator_space::{
    hermiticity_residual, hs_inner, hs_norm, C64, Convention, OperatorBasis, StateVector,
    BLOCH_PER_COHERENCE,
};

/// One Lindblad operator with its (constant, Markovian) rate.
#[derive(Debug, Clone)]
pub struct LindbladTerm {
    operator: DMatrix<C64>,
    rate: f64,
}

impl LindbladTerm {
    /// A traceless operator with rate γ ≥ 0. The traceful part of a Lindblad
    /// operator belongs in the Hamiltonian, so it is rejected here.
    pub fn new(operator: DMatrix<C64>, rate: f64) -> Result<Self> {
        if operator.nrows() != operator.ncols() || operator.nrows() < 2 {
            return Err(QppError::InvalidLindbladOperator(format!(
                "operator must be square with d >= 2, got {}x{}",
                operator.nrows(),
                operator.ncols()
            )));
        }
        let tr = operator.trace();
        if tr.norm() > 1e-12 {
            return Err(QppError::InvalidLindbladOperator(format!(
                "operator must be traceless (|Tr L| = {:.3e})",
                tr.norm()
            )));
        }
        if !(rate >= 0.0) {
            return Err(QppError::InvalidLindbladOperator(format!(
                "rate must be >= 0, got {rate}"
            )));
        }
        Ok(Self { operator, rate })
    }

    pub fn operator(&self) -> &DMatrix<C64> {
        &self.operator
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn dim(&self) -> usize {
        self.operator.nrows()
    }
}

/// L_D(x) = Σ_α γ_α (L x L† − ½{L†L, x}) for an arbitrary operator x.
pub fn lindblad_action(terms: &[LindbladTerm], x: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let d = x.nrows();
    if x.ncols() != d {
        return Err(QppError::DimensionMismatch(x.nrows(), x.ncols()));
    }
    let mut out = DMatrix::<C64>::zeros(d, d);
    for term in terms {
        if term.dim() != d {
            return Err(QppError::DimensionMismatch(term.dim(), d));
        }
        let l = &term.operator;
        let ldag = l.adjoint();
        let ldl = &ldag * l;
        let g = C64::new(term.rate, 0.0);
        out += (l * x * &ldag - (&ldl * x + x * &ldl) * C64::new(0.5, 0.0)) * g;
    }
    Ok(out)
}

/// The dissipator D = (R, c) of a noise channel, acting as v̇ = R v + c.
#[derive(Debug, Clone)]
pub struct Dissipator {
    r: DMatrix<f64>,
    c: DVector<f64>,
    convention: Convention,
    source: Option<Vec<LindbladTerm>>,
}

impl Dissipator {
    pub fn new(r: DMatrix<f64>, c: DVector<f64>, convention: Convention) -> Result<Self> {
        let n = r.nrows();
        if r.ncols() != n || c.len() != n {
            return Err(QppError::DimensionMismatch(r.ncols(), c.len()));
        }
        Ok(Self { r, c, convention, source: None })
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    /// Lindblad terms this dissipator was built from, if any.
    pub fn source(&self) -> Option<&[LindbladTerm]> {
        self.source.as_deref()
    }

    /// Hilbert-space dimension d (R is (d²−1)×(d²−1)).
    pub fn dim(&self) -> usize {
        (((self.r.nrows() + 1) as f64).sqrt()).round() as usize
    }

    /// c = 0 within tolerance.
    pub fn is_unital(&self) -> bool {
        self.c.norm() <= 1e-12 * self.r.norm().max(1.0)
    }

    /// R v + c. The state must match the dissipator's convention.
    pub fn apply(&self, v: &StateVector) -> Result<DVector<f64>> {
        if v.coords().len() != self.r.nrows() || v.convention() != self.convention {
            return Err(QppError::DimensionMismatch(v.coords().len(), self.r.nrows()));
        }
        Ok(&self.r * v.coords() + &self.c)
    }

    /// Qubit (R, c) as fixed-size types, for the hot integration path.
    pub fn bloch3(&self) -> Result<(Matrix3<f64>, Vector3<f64>)> {
        if self.r.nrows() != 3 || self.convention != Convention::Bloch {
            return Err(QppError::InvalidDimension(self.dim()));
        }
        let r = Matrix3::from_fn(|i, j| self.r[(i, j)]);
        let c = Vector3::new(self.c[0], self.c[1], self.c[2]);
        Ok((r, c))
    }

    /// Convert a qubit dissipator between conventions: R is unchanged,
    /// c scales by √2 from coherence to Bloch.
    pub fn to_convention(&self, target: Convention) -> Result<Self> {
        if self.convention == target {
            return Ok(self.clone());
        }
        if self.r.nrows() != 3 {
            return Err(QppError::InvalidDimension(self.dim()));
        }
        let c = match target {
            Convention::Bloch => &self.c * BLOCH_PER_COHERENCE,
            Convention::Coherence => &self.c / BLOCH_PER_COHERENCE,
        };
        Ok(Self { r: self.r.clone(), c, convention: target, source: self.source.clone() })
    }

    /// Coarse rate scale of the channel, used to size default control caps.
    pub fn rate_scale(&self) -> f64 {
        (self.r.norm() / 2.0 + self.c.norm()).max(f64::MIN_POSITIVE)
    }
}

/// Compute (R, c) from Lindblad terms in the given nice operator basis
/// (coherence convention).
pub fn dissipator_from_lindblad(
    terms: &[LindbladTerm],
    basis: &OperatorBasis,
) -> Result<Dissipator> {
    let d = basis.dim();
    for term in terms {
        if term.dim() != d {
            return Err(QppError::DimensionMismatch(term.dim(), d));
        }
    }
    let j = d * d - 1;
    let mut r = DMatrix::<f64>::zeros(j, j);
    for (col, fj) in basis.traceless().iter().enumerate() {
        let lfj = lindblad_action(terms, fj)?;
        for (row, fi) in basis.traceless().iter().enumerate() {
            r[(row, col)] = hs_inner(fi, &lfj).re;
        }
    }
    let li = lindblad_action(terms, &DMatrix::<C64>::identity(d, d))?;
    let mut c = DVector::<f64>::zeros(j);
    for (row, fi) in basis.traceless().iter().enumerate() {
        c[row] = hs_inner(fi, &li).re / d as f64;
    }
    Ok(Dissipator { r, c, convention: Convention::Coherence, source: Some(terms.to_vec()) })
}

/// Built-in qubit noise channels plus a custom Lindblad escape hatch.
#[derive(Debug, Clone)]
pub enum ChannelSpec {
    Dephasing { gamma: f64 },
    BitFlip { gamma: f64 },
    BitPhaseFlip { gamma: f64 },
    Depolarizing { gamma: f64 },
    Relaxation { gamma: f64, beta_delta: f64 },
    RelaxationDephasing { gamma1: f64, gamma_d: f64, beta_delta: f64 },
    Custom(Vec<LindbladTerm>),
}

/// Cap on the thermal asymmetry a = p_0 − ½ so the stability ellipsoid never
/// degenerates at βΔ → ∞.
const MAX_THERMAL_ASYMMETRY: f64 = 0.5 - 1e-15;

/// a = 1/(1 + e^{−βΔ}) − ½ ∈ [0, ½).
pub fn thermal_asymmetry(beta_delta: f64) -> f64 {
    let a = 1.0 / (1.0 + (-beta_delta).exp()) - 0.5;
    a.min(MAX_THERMAL_ASYMMETRY)
}

impl ChannelSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = |rate: f64| rate > 0.0 && rate.is_finite();
        let valid = match self {
            Self::Dephasing { gamma }
            | Self::BitFlip { gamma }
            | Self::BitPhaseFlip { gamma }
            | Self::Depolarizing { gamma } => ok(*gamma),
            Self::Relaxation { gamma, beta_delta } => ok(*gamma) && *beta_delta >= 0.0,
            Self::RelaxationDephasing { gamma1, gamma_d, beta_delta } => {
                ok(*gamma1) && ok(*gamma_d) && *beta_delta >= 0.0
            }
            Self::Custom(terms) => !terms.is_empty(),
        };
        if valid {
            Ok(())
        } else {
            Err(QppError::InvalidChannel(format!("{self:?}")))
        }
    }

    /// γ₂ = 2γ_d + γ₁/2 for the combined relaxation + dephasing channel;
    /// for pure relaxation this degenerates to γ/2.
    pub fn gamma2(&self) -> Option<f64> {
        match self {
            Self::Relaxation { gamma, .. } => Some(gamma / 2.0),
            Self::RelaxationDephasing { gamma1, gamma_d, .. } => Some(2.0 * gamma_d + gamma1 / 2.0),
            _ => None,
        }
    }

    /// Thermal asymmetry a for the relaxation-family channels.
    pub fn asymmetry(&self) -> Option<f64> {
        match self {
            Self::Relaxation { beta_delta, .. }
            | Self::RelaxationDephasing { beta_delta, .. } => Some(thermal_asymmetry(*beta_delta)),
            _ => None,
        }
    }

    pub fn max_rate(&self) -> f64 {
        match self {
            Self::Dephasing { gamma }
            | Self::BitFlip { gamma }
            | Self::BitPhaseFlip { gamma }
            | Self::Depolarizing { gamma }
            | Self::Relaxation { gamma, .. } => *gamma,
            Self::RelaxationDephasing { gamma1, gamma_d, .. } => gamma1.max(*gamma_d),
            Self::Custom(terms) => terms.iter().map(|t| t.rate()).fold(0.0, f64::max),
        }
    }

    /// The Lindblad-operator form of the channel.
    pub fn lindblad_terms(&self) -> Result<Vec<LindbladTerm>> {
        self.validate()?;
        let sx = DMatrix::from_row_slice(2, 2, &[
            C64::new(0., 0.), C64::new(1., 0.),
            C64::new(1., 0.), C64::new(0., 0.),
        ]);
        let sy = DMatrix::from_row_slice(2, 2, &[
            C64::new(0., 0.), C64::new(0., -1.),
            C64::new(0., 1.), C64::new(0., 0.),
        ]);
        let sz = DMatrix::from_row_slice(2, 2, &[
            C64::new(1., 0.), C64::new(0., 0.),
            C64::new(0., 0.), C64::new(-1., 0.),
        ]);
        // |0⟩ is the ground state (Bloch north pole); σ⁻ lowers into it.
        let lower = DMatrix::from_row_slice(2, 2, &[
            C64::new(0., 0.), C64::new(1., 0.),
            C64::new(0., 0.), C64::new(0., 0.),
        ]);
        let raise = lower.adjoint();

        let thermal_pair = |gamma: f64, beta_delta: f64| -> Result<Vec<LindbladTerm>> {
            let p0 = 0.5 + thermal_asymmetry(beta_delta);
            Ok(vec![
                LindbladTerm::new(lower.clone(), gamma * p0)?,
                LindbladTerm::new(raise.clone(), gamma * (1.0 - p0))?,
            ])
        };

        match self {
            Self::Dephasing { gamma } => Ok(vec![LindbladTerm::new(sz, *gamma)?]),
            Self::BitFlip { gamma } => Ok(vec![LindbladTerm::new(sx, *gamma)?]),
            Self::BitPhaseFlip { gamma } => Ok(vec![LindbladTerm::new(sy, *gamma)?]),
            Self::Depolarizing { gamma } => Ok(vec![
                LindbladTerm::new(sx, gamma / 3.0)?,
                LindbladTerm::new(sy, gamma / 3.0)?,
                LindbladTerm::new(sz, gamma / 3.0)?,
            ]),
            Self::Relaxation { gamma, beta_delta } => thermal_pair(*gamma, *beta_delta),
            Self::RelaxationDephasing { gamma1, gamma_d, beta_delta } => {
                let mut terms = thermal_pair(*gamma1, *beta_delta)?;
                terms.push(LindbladTerm::new(sz, *gamma_d)?);
                Ok(terms)
            }
            Self::Custom(terms) => Ok(terms.clone()),
        }
    }
}

/// Closed-form (R, c) of a channel. Qubit built-ins come out in the Bloch
/// convention; custom channels are computed from their Lindblad form and
/// returned in the Bloch convention when they act on a qubit.
pub fn builtin_dissipator(spec: &ChannelSpec) -> Result<Dissipator> {
    spec.validate()?;
    let diag = |x: f64, y: f64, z: f64| {
        DMatrix::from_diagonal(&DVector::from_vec(vec![x, y, z]))
    };
    let zero3 = DVector::zeros(3);
    let (r, c) = match spec {
        ChannelSpec::Dephasing { gamma } => (diag(-2.0 * gamma, -2.0 * gamma, 0.0), zero3),
        ChannelSpec::BitFlip { gamma } => (diag(0.0, -2.0 * gamma, -2.0 * gamma), zero3),
        ChannelSpec::BitPhaseFlip { gamma } => (diag(-2.0 * gamma, 0.0, -2.0 * gamma), zero3),
        ChannelSpec::Depolarizing { gamma } => {
            let g = 4.0 * gamma / 3.0;
            (diag(-g, -g, -g), zero3)
        }
        ChannelSpec::Relaxation { gamma, beta_delta } => {
            let a = thermal_asymmetry(*beta_delta);
            (
                diag(-gamma / 2.0, -gamma / 2.0, -gamma),
                DVector::from_vec(vec![0.0, 0.0, 2.0 * gamma * a]),
            )
        }
        ChannelSpec::RelaxationDephasing { gamma1, beta_delta, .. } => {
            let g2 = spec.gamma2().unwrap();
            let a = thermal_asymmetry(*beta_delta);
            (
                diag(-g2, -g2, -gamma1),
                DVector::from_vec(vec![0.0, 0.0, 2.0 * gamma1 * a]),
            )
        }
        ChannelSpec::Custom(terms) => {
            let d = terms[0].dim();
            let basis = crate::operator_space::build_nice_basis(d)?;
            let diss = dissipator_from_lindblad(terms, &basis)?;
            return if d == 2 { diss.to_convention(Convention::Bloch) } else { Ok(diss) };
        }
    };
    let mut diss = Dissipator::new(r, c, Convention::Bloch)?;
    diss.source = Some(spec.lindblad_terms()?);
    Ok(diss)
}

/// Check that a Hermitian output stays Hermitian and traceless; used when
/// validating `lindblad_action` against the (R, c) route.
pub fn action_residuals(out: &DMatrix<C64>) -> (f64, f64) {
    (hermiticity_residual(out), out.trace().norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator_space::{build_nice_basis, from_state_vector, to_state_vector};
    use crate::sampling;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn all_builtins() -> Vec<ChannelSpec> {
        vec![
            ChannelSpec::Dephasing { gamma: 1.0 },
            ChannelSpec::BitFlip { gamma: 0.7 },
            ChannelSpec::BitPhaseFlip { gamma: 1.3 },
            ChannelSpec::Depolarizing { gamma: 0.9 },
            ChannelSpec::Relaxation { gamma: 1.1, beta_delta: 2.0 },
            ChannelSpec::RelaxationDephasing { gamma1: 1.0, gamma_d: 0.25, beta_delta: 2.0 },
        ]
    }

    #[test]
    fn traceful_lindblad_operator_rejected() {
        let m = DMatrix::<C64>::identity(2, 2);
        assert!(matches!(
            LindbladTerm::new(m, 1.0),
            Err(QppError::InvalidLindbladOperator(_))
        ));
    }

    #[test]
    fn dephasing_matches_example() {
        let d = builtin_dissipator(&ChannelSpec::Dephasing { gamma: 1.0 }).unwrap();
        assert_abs_diff_eq!(d.r()[(0, 0)], -2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.r()[(1, 1)], -2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.r()[(2, 2)], 0.0, epsilon = 1e-15);
        assert!(d.is_unital());
    }

    #[test]
    fn relaxation_matches_generalized_amplitude_damping() {
        let gamma = 1.0;
        let spec = ChannelSpec::Relaxation { gamma, beta_delta: 2.0 };
        let a = thermal_asymmetry(2.0);
        let d = builtin_dissipator(&spec).unwrap();
        assert_abs_diff_eq!(d.r()[(0, 0)], -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(d.r()[(2, 2)], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.c()[2], 2.0 * gamma * a, epsilon = 1e-15);
        assert!(!d.is_unital());

        // (0, 0, 2a) is the steady state.
        let v = StateVector::bloch(0.0, 0.0, 2.0 * a);
        let vdot = d.apply(&v).unwrap();
        assert!(vdot.norm() < 1e-14);
    }

    #[test]
    fn builtin_agrees_with_lindblad_form() {
        for spec in all_builtins() {
            let closed = builtin_dissipator(&spec).unwrap();
            let basis = build_nice_basis(2).unwrap();
            let from_l = dissipator_from_lindblad(&spec.lindblad_terms().unwrap(), &basis)
                .unwrap()
                .to_convention(Convention::Bloch)
                .unwrap();
            let dr = (closed.r() - from_l.r()).norm();
            let dc = (closed.c() - from_l.c()).norm();
            assert!(dr < 1e-12 && dc < 1e-12, "{spec:?}: dr={dr:.2e} dc={dc:.2e}");
            // Qubit R is symmetric.
            assert!((closed.r() - closed.r().transpose()).norm() < 1e-12);
        }
    }

    #[test]
    fn unital_iff_c_zero() {
        for spec in all_builtins() {
            let terms = spec.lindblad_terms().unwrap();
            let li = lindblad_action(&terms, &DMatrix::<C64>::identity(2, 2)).unwrap();
            let d = builtin_dissipator(&spec).unwrap();
            assert_eq!(d.is_unital(), hs_norm(&li) <= 1e-12, "{spec:?}");
        }
    }

    #[test]
    fn dephasing_action_on_diagonal_state_vanishes() {
        let terms = ChannelSpec::Dephasing { gamma: 1.0 }.lindblad_terms().unwrap();
        let rho = DMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::new(0.7, 0.0),
            C64::new(0.3, 0.0),
        ]));
        let out = lindblad_action(&terms, &rho).unwrap();
        assert!(hs_norm(&out) < 1e-15);
    }

    #[test]
    fn dephasing_decays_off_diagonals_at_4gamma() {
        let gamma = 0.8;
        let terms = ChannelSpec::Dephasing { gamma }.lindblad_terms().unwrap();
        let r = 0.21;
        let rho = DMatrix::from_row_slice(2, 2, &[
            C64::new(0.5, 0.0), C64::new(r, 0.0),
            C64::new(r, 0.0), C64::new(0.5, 0.0),
        ]);
        let out = lindblad_action(&terms, &rho).unwrap();
        // sigma_z rho sigma_z - rho flips the sign of off-diagonals: -2r each,
        // scaled by gamma and doubled by the anticommutator bookkeeping.
        assert_abs_diff_eq!(out[(0, 1)].re, -4.0 * gamma * r, epsilon = 1e-14);
        assert!(out[(0, 0)].norm() < 1e-15);
    }

    #[test]
    fn apply_dissipator_examples() {
        let d = builtin_dissipator(&ChannelSpec::Dephasing { gamma: 1.0 }).unwrap();
        let on_axis = StateVector::bloch(0.0, 0.0, 0.4);
        assert!(d.apply(&on_axis).unwrap().norm() < 1e-15);

        let v = StateVector::bloch(0.5, 0.5, std::f64::consts::FRAC_1_SQRT_2);
        let out = d.apply(&v).unwrap();
        assert_abs_diff_eq!(out[0], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out[1], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out[2], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn vector_and_matrix_routes_agree_on_random_states() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let basis = build_nice_basis(2).unwrap();
        for spec in all_builtins() {
            let terms = spec.lindblad_terms().unwrap();
            let diss = dissipator_from_lindblad(&terms, &basis).unwrap();
            for _ in 0..100 {
                let rho = sampling::random_density(2, &mut rng);
                let v = to_state_vector(&rho, &basis).unwrap();
                let vdot = diss.apply(&v).unwrap();
                let matrix_route = lindblad_action(&terms, rho.entries()).unwrap();
                let vdot_matrix: Vec<f64> = basis
                    .traceless()
                    .iter()
                    .map(|f| hs_inner(f, &matrix_route).re)
                    .collect();
                for (a, b) in vdot.iter().zip(&vdot_matrix) {
                    assert_abs_diff_eq!(a, b, epsilon = 1e-10);
                }
                let (herm, trace) = action_residuals(&matrix_route);
                assert!(herm < 1e-12 && trace < 1e-12);
            }
        }
    }

    #[test]
    fn trace_and_hermiticity_preserved_on_random_states_d3() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        // A custom qutrit channel: dephasing between levels 0 and 1.
        let mut l = DMatrix::<C64>::zeros(3, 3);
        l[(0, 0)] = C64::new(1.0, 0.0);
        l[(1, 1)] = C64::new(-1.0, 0.0);
        let terms = vec![LindbladTerm::new(l, 0.5).unwrap()];
        for _ in 0..200 {
            let rho = sampling::random_density(3, &mut rng);
            let out = lindblad_action(&terms, rho.entries()).unwrap();
            let (herm, trace) = action_residuals(&out);
            assert!(herm < 1e-12 && trace < 1e-12);
        }
    }

    #[test]
    fn convention_round_trip_preserves_action() {
        let spec = ChannelSpec::Relaxation { gamma: 1.3, beta_delta: 1.5 };
        let bloch = builtin_dissipator(&spec).unwrap();
        let coh = bloch.to_convention(Convention::Coherence).unwrap();
        let basis = build_nice_basis(2).unwrap();
        let vb = StateVector::bloch(0.3, -0.2, 0.5);
        let vc = vb.to_convention(Convention::Coherence).unwrap();
        let rho = from_state_vector(&vc, &basis).unwrap();
        let _ = rho;
        let vdot_b = bloch.apply(&vb).unwrap();
        let vdot_c = coh.apply(&vc).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(vdot_b[i], vdot_c[i] * BLOCH_PER_COHERENCE, epsilon = 1e-14);
        }
    }
}
