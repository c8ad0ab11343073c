//! Synthesis of f-preserving control Hamiltonians.
//!
//! The constraint ⟨H, i[ρ, ∇f]⟩ = ⟨∇f, L_D ρ⟩ fixes one component of the
//! control. In operator space a particular solution is
//!
//!   H = i ⟨∇f, L_D ρ⟩ / ‖[ρ, ∇f]‖² · [ρ, ∇f],
//!
//! and on the Bloch sphere the same solution reads
//!
//!   h = [∇f·(Rv + c) / (2‖∇f × v‖²)] ∇f × v,
//!
//! i.e. only the α₃ coefficient of the expansion
//! h = α₁ v + α₂ ∇f + α₃ (∇f × v) is forced. α₁ never affects the dynamics
//! and α₂ moves the state along the level set; both are exploited by the
//! steering and fixed-p constructions below.
//!
//! All factor conventions between the two formalisms (σ vs σ/2 in the
//! Hamiltonian expansion, Bloch vs coherence normalization) are owned by
//! [`bloch_control_from_matrix`] / [`matrix_from_bloch_control`]; every
//! cross-formalism comparison routes through them.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::channels::{lindblad_action, Dissipator, LindbladTerm};
use crate::error::{QppError, Result};
use crate::interp::CubicHermite;
use crate::operator_space::{
    default_group_tol, eigendecompose_grouped, hermitian_from_coords, hermiticity_residual,
    hs_inner, hs_norm, C64, Convention, OperatorBasis, StateVector,
};
use crate::properties::{classify_at, PropertyClassKind, TargetProperty, DEFAULT_CLASS_TOL};

/// Expansion coefficients of h in the frame {v, ∇f, ∇f × v}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alphas {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

/// A synthesized control field, in Bloch or operator form.
#[derive(Debug, Clone)]
pub enum ControlField {
    Qubit {
        /// Pauli coefficients: H = h₀ I + h·σ.
        h: Vector3<f64>,
        /// Identity component; irrelevant to the dynamics, kept at zero.
        h0: f64,
        alphas: Option<Alphas>,
        /// Set when the synthesis point is within 10x of the collinearity
        /// threshold, where ‖h‖ scales like 1/residual.
        conditioning_warning: bool,
    },
    General {
        matrix: DMatrix<C64>,
        conditioning_warning: bool,
    },
}

impl ControlField {
    pub fn zero_qubit() -> Self {
        ControlField::Qubit {
            h: Vector3::zeros(),
            h0: 0.0,
            alphas: Some(Alphas { a1: 0.0, a2: 0.0, a3: 0.0 }),
            conditioning_warning: false,
        }
    }

    /// Euclidean norm of h (qubit) or Frobenius norm of H (general).
    pub fn norm(&self) -> f64 {
        match self {
            ControlField::Qubit { h, .. } => h.norm(),
            ControlField::General { matrix, .. } => hs_norm(matrix),
        }
    }

    pub fn conditioning_warning(&self) -> bool {
        match self {
            ControlField::Qubit { conditioning_warning, .. }
            | ControlField::General { conditioning_warning, .. } => *conditioning_warning,
        }
    }

    pub fn bloch(&self) -> Result<(f64, Vector3<f64>)> {
        match self {
            ControlField::Qubit { h, h0, .. } => Ok((*h0, *h)),
            ControlField::General { matrix, .. } => bloch_control_from_matrix(matrix),
        }
    }

    pub fn matrix(&self) -> DMatrix<C64> {
        match self {
            ControlField::Qubit { h, h0, .. } => matrix_from_bloch_control(*h0, h),
            ControlField::General { matrix, .. } => matrix.clone(),
        }
    }
}

/// H = h₀ I + h·σ → (h₀, h). The inverse of [`matrix_from_bloch_control`];
/// h_k = Re Tr(H σ_k)/2, h₀ = Re Tr(H)/2.
pub fn bloch_control_from_matrix(h_matrix: &DMatrix<C64>) -> Result<(f64, Vector3<f64>)> {
    if h_matrix.nrows() != 2 || h_matrix.ncols() != 2 {
        return Err(QppError::InvalidDimension(h_matrix.nrows()));
    }
    let herm = hermiticity_residual(h_matrix);
    if herm > 1e-10 * hs_norm(h_matrix).max(1.0) {
        return Err(QppError::NotHermitian(herm));
    }
    let h0 = 0.5 * (h_matrix[(0, 0)].re + h_matrix[(1, 1)].re);
    let hx = 0.5 * (h_matrix[(0, 1)].re + h_matrix[(1, 0)].re);
    let hy = 0.5 * (h_matrix[(1, 0)].im - h_matrix[(0, 1)].im);
    let hz = 0.5 * (h_matrix[(0, 0)].re - h_matrix[(1, 1)].re);
    Ok((h0, Vector3::new(hx, hy, hz)))
}

/// (h₀, h) → H = h₀ I + h·σ.
pub fn matrix_from_bloch_control(h0: f64, h: &Vector3<f64>) -> DMatrix<C64> {
    DMatrix::from_row_slice(2, 2, &[
        C64::new(h0 + h.z, 0.0),
        C64::new(h.x, -h.y),
        C64::new(h.x, h.y),
        C64::new(h0 - h.z, 0.0),
    ])
}

/// Control-synthesis policy used by the closed-loop simulator.
#[derive(Debug, Clone)]
pub enum PolicyMode {
    /// Only the forced α₃ component (Eq.-(23)-style minimal control).
    MinimalAlpha3,
    /// Fidelity-preserving control that freezes the direction of the
    /// component of v orthogonal to the (pure) reference w.
    FixedP,
    /// Bit-flip steering law that walks the state along the level set onto
    /// the x-axis using the α₂ freedom.
    Alpha2Steering,
    /// Follow a prescribed realizable trajectory (control reconstructed
    /// per sample, not state feedback).
    TrajectoryPrescribed,
}

#[derive(Debug, Clone)]
pub struct SynthesisPolicy {
    pub mode: PolicyMode,
    /// Control-norm cap used for breakdown detection. `None` defers to the
    /// integrator config (and ultimately to 1e6 x the channel rate scale).
    pub h_max: Option<f64>,
}

impl SynthesisPolicy {
    pub fn minimal() -> Self {
        Self { mode: PolicyMode::MinimalAlpha3, h_max: None }
    }

    pub fn fixed_p() -> Self {
        Self { mode: PolicyMode::FixedP, h_max: None }
    }

    pub fn alpha2_steering() -> Self {
        Self { mode: PolicyMode::Alpha2Steering, h_max: None }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(h) = self.h_max {
            if !(h > 0.0 && h.is_finite()) {
                return Err(QppError::InvalidReference(format!("h_max must be finite and positive, got {h}")));
            }
        }
        Ok(())
    }
}

/// Outcome of the fast Bloch-space synthesis.
pub struct QubitSynthesis {
    pub h: Vector3<f64>,
    pub alphas: Alphas,
    pub conditioning_warning: bool,
    /// ∇f·(2h×v + Rv + c), the constraint residual at the synthesis point.
    pub constraint_residual: f64,
    /// Scale the residual should be compared against.
    pub residual_scale: f64,
}

/// Eq.-(23) synthesis on raw Bloch data; the hot path used at every
/// integrator stage. `TriviallyControllable` points yield h = 0 and
/// uncontrollable points (breakdown) are an error.
pub fn synthesize_qubit_bloch(
    f: &TargetProperty,
    r: &Matrix3<f64>,
    c: &Vector3<f64>,
    v: &Vector3<f64>,
) -> Result<QubitSynthesis> {
    if !f.domain_ok(&StateVector::from_bloch3(v)) {
        return Err(QppError::GradientUndefined);
    }
    let g = f.grad_bloch(v);
    let drift = r * v + c;
    let alignment = g.dot(&drift);
    let gxv = g.cross(v);
    let n2 = gxv.norm_squared();
    let scale = g.norm() * (r.norm() * v.norm() + c.norm());
    let threshold = DEFAULT_CLASS_TOL * scale;

    if alignment.abs() <= threshold {
        let h = Vector3::zeros();
        let residual = g.dot(&(2.0 * h.cross(v) + drift));
        return Ok(QubitSynthesis {
            h,
            alphas: Alphas { a1: 0.0, a2: 0.0, a3: 0.0 },
            conditioning_warning: false,
            constraint_residual: residual,
            residual_scale: scale.max(f64::MIN_POSITIVE),
        });
    }
    let collinearity = n2.sqrt();
    if collinearity <= threshold {
        return Err(QppError::BreakdownPoint(format!(
            "grad f collinear with v (residual {collinearity:.3e}, threshold {threshold:.3e})"
        )));
    }
    let a3 = alignment / (2.0 * n2);
    let h = gxv * a3;
    let residual = g.dot(&(2.0 * h.cross(v) + drift));
    let residual_scale = g.norm() * (2.0 * h.cross(v).norm() + drift.norm()).max(f64::MIN_POSITIVE);
    Ok(QubitSynthesis {
        h,
        alphas: Alphas { a1: 0.0, a2: 0.0, a3 },
        conditioning_warning: collinearity <= 10.0 * threshold,
        constraint_residual: residual,
        residual_scale,
    })
}

/// Qubit f-preserving Hamiltonian at a state (Bloch convention).
pub fn synthesize_qubit(
    f: &TargetProperty,
    d: &Dissipator,
    v: &StateVector,
) -> Result<ControlField> {
    let d = d.to_convention(Convention::Bloch)?;
    let v = v.to_convention(Convention::Bloch)?;
    let (r, c) = d.bloch3()?;
    let syn = synthesize_qubit_bloch(f, &r, &c, &v.bloch3())?;
    Ok(ControlField::Qubit {
        h: syn.h,
        h0: 0.0,
        alphas: Some(syn.alphas),
        conditioning_warning: syn.conditioning_warning,
    })
}

/// Operator-space synthesis: H = i⟨∇f, L_D ρ⟩/‖[ρ, ∇f]‖² [ρ, ∇f].
pub fn synthesize_general(
    grad_f: &DMatrix<C64>,
    terms: &[LindbladTerm],
    rho: &crate::operator_space::DensityMatrix,
) -> Result<ControlField> {
    let class = crate::properties::classify_general(grad_f, terms, rho, DEFAULT_CLASS_TOL)?;
    let threshold = DEFAULT_CLASS_TOL * class.scale;
    if class.collinearity <= threshold {
        return Err(QppError::BreakdownPoint(format!(
            "[rho, grad f] below threshold ({:.3e} <= {:.3e})",
            class.collinearity, threshold
        )));
    }
    let comm = rho.entries() * grad_f - grad_f * rho.entries();
    let n2 = class.collinearity * class.collinearity;
    let matrix = &comm * C64::new(0.0, class.alignment / n2);
    Ok(ControlField::General {
        matrix,
        conditioning_warning: class.collinearity <= 10.0 * threshold,
    })
}

/// Number of relevant control parameters, d − m₀, where m₀ is the
/// multiplicity of the zero eigenvalue of i[ρ, ∇f].
pub fn relevant_parameter_count(
    rho: &crate::operator_space::DensityMatrix,
    grad_f: &DMatrix<C64>,
    tol: f64,
) -> Result<usize> {
    let d = rho.dim();
    if grad_f.nrows() != d || grad_f.ncols() != d {
        return Err(QppError::DimensionMismatch(grad_f.nrows(), d));
    }
    let comm = rho.entries() * grad_f - grad_f * rho.entries();
    let m = comm * C64::new(0.0, 1.0);
    let sym = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let max_abs = eig.eigenvalues.iter().map(|l| l.abs()).fold(0.0f64, f64::max);
    let zero_count = eig
        .eigenvalues
        .iter()
        .filter(|l| l.abs() <= tol * max_abs.max(1e-300))
        .count();
    Ok(d - zero_count.min(d))
}

/// Fixed-p fidelity control: solve the 3x3 system obtained by matching the
/// w, p, and w×p components of 2α_p h×v = Ṗ_D p − α_p (Rv + c).
pub fn fixed_p_control(
    w: &Vector3<f64>,
    v: &StateVector,
    d: &Dissipator,
) -> Result<ControlField> {
    let d = d.to_convention(Convention::Bloch)?;
    let (r, c) = d.bloch3()?;
    let syn = fixed_p_bloch(w, &v.to_convention(Convention::Bloch)?.bloch3(), &r, &c)?;
    Ok(ControlField::Qubit {
        h: syn.0,
        h0: 0.0,
        alphas: None,
        conditioning_warning: syn.1,
    })
}

/// Raw-data fixed-p solve; returns (h, conditioning_warning).
pub fn fixed_p_bloch(
    w: &Vector3<f64>,
    v: &Vector3<f64>,
    r: &Matrix3<f64>,
    c: &Vector3<f64>,
) -> Result<(Vector3<f64>, bool)> {
    if (w.norm() - 1.0).abs() > 1e-10 {
        return Err(QppError::InvalidReference(format!("|w| = {} != 1", w.norm())));
    }
    let alpha_w = v.dot(w);
    let perp = v - w * alpha_w;
    let alpha_p = perp.norm();
    let collinear_threshold = DEFAULT_CLASS_TOL * v.norm().max(1e-12);
    if alpha_p <= collinear_threshold {
        return Err(QppError::BreakdownPoint(format!(
            "v collinear with w (alpha_p = {alpha_p:.3e})"
        )));
    }
    let p = perp / alpha_p;
    let q = w.cross(&p);
    let drift = r * v + c;
    let pdot_d = v.dot(&drift);
    let beta = Vector3::new(w.dot(&drift), p.dot(&drift), q.dot(&drift));

    // Match coefficients of 2α_p h×v = Ṗ_D p − α_p(Rv + c) in {w, p, q}.
    let m = Matrix3::new(
        0.0, 0.0, -2.0 * alpha_p * alpha_p,
        0.0, 0.0, 2.0 * alpha_p * alpha_w,
        2.0 * alpha_p * alpha_p, -2.0 * alpha_p * alpha_w, 0.0,
    );
    let b = Vector3::new(
        -alpha_p * beta.x,
        pdot_d - alpha_p * beta.y,
        -alpha_p * beta.z,
    );
    let svd = m.svd(true, true);
    let x = svd
        .solve(&b, 1e-13 * svd.singular_values.max())
        .map_err(|e| QppError::NumericalFailure(e.to_string()))?;
    let h = w * x[0] + p * x[1] + q * x[2];

    // The solved control must leave only the p-component of v̇.
    let vdot = 2.0 * h.cross(v) + drift;
    let scale = drift.norm().max(2.0 * h.norm() * v.norm()).max(1e-300);
    let res = vdot.dot(w).abs().max(vdot.dot(&q).abs());
    if res > 1e-9 * scale {
        return Err(QppError::NumericalFailure(format!(
            "fixed-p residual {res:.3e} exceeds tolerance"
        )));
    }
    Ok((h, alpha_p <= 10.0 * collinear_threshold * v.norm().max(1.0)))
}

/// Default relative tolerance for the block conditions in
/// [`trajectory_control`].
pub const DEFAULT_BLOCK_TOL: f64 = 1e-7;

/// Reconstruct the control Hamiltonian realizing a time-parametrized
/// trajectory: h_jk = −i⟨λ_j|ρ̇ − L_Dρ|λ_k⟩/(λ_j − λ_k) on the eigenbasis
/// of ρ(t). Fails with `NotRealizable` when a diagonal block of ρ̇ − L_Dρ
/// is nonzero or an off-diagonal demand sits across a closed eigenvalue gap.
pub fn trajectory_control(
    path: &[(f64, StateVector)],
    terms: &[LindbladTerm],
    basis: &OperatorBasis,
    block_tol: f64,
) -> Result<Vec<(f64, ControlField)>> {
    if path.len() < 2 {
        return Err(QppError::InvalidTrajectory("need at least 2 samples".into()));
    }
    let ts: Vec<f64> = path.iter().map(|(t, _)| *t).collect();
    let coords: Vec<DVector<f64>> = path
        .iter()
        .map(|(_, s)| {
            s.to_convention(Convention::Coherence).map(|c| c.coords().clone())
        })
        .collect::<Result<_>>()?;
    let interp = CubicHermite::new(ts.clone(), coords)?;

    let mut out = Vec::with_capacity(path.len());
    for &t in &ts {
        let y = interp.value(t);
        let ydot = interp.derivative(t);
        let sigma = hermitian_from_coords(&y, basis, true);
        let sigma_dot = hermitian_from_coords(&ydot, basis, false);
        let a = &sigma_dot - lindblad_action(terms, &sigma)?;
        let h = hamiltonian_for_unitary_part(&sigma, &a, block_tol)?;
        out.push((t, ControlField::General { matrix: h, conditioning_warning: false }));
    }
    Ok(out)
}

/// Solve −i[H, σ] = A for Hermitian H, given that A has no diagonal blocks
/// on σ's eigenspaces. Shared by trajectory reconstruction and the
/// stable-point control.
pub fn hamiltonian_for_unitary_part(
    sigma: &DMatrix<C64>,
    a: &DMatrix<C64>,
    block_tol: f64,
) -> Result<DMatrix<C64>> {
    let dec = eigendecompose_grouped(sigma, default_group_tol(sigma))?;
    let scale = hs_norm(a).max(1e-300);
    let n = sigma.nrows();
    let mut h = DMatrix::<C64>::zeros(n, n);
    for (i, pi) in dec.projectors.iter().enumerate() {
        let diag_block = pi * a * pi;
        if hs_norm(&diag_block) > block_tol * scale {
            return Err(QppError::NotRealizable(format!(
                "eigenspace block {i} of the dissipation-adjusted velocity is nonzero \
                 ({:.3e} vs scale {:.3e})",
                hs_norm(&diag_block),
                scale
            )));
        }
        for (j, pj) in dec.projectors.iter().enumerate() {
            if i == j {
                continue;
            }
            let gap = dec.eigenvalues[i] - dec.eigenvalues[j];
            let block = pi * a * pj;
            // Gaps below the grouping tolerance were merged already, so any
            // surviving gap here is safe to divide by.
            h += block * C64::new(0.0, -1.0 / gap);
        }
    }
    // -i[H, sigma] should reproduce the off-diagonal part of A.
    let check = (&h * sigma - sigma * &h) * C64::new(0.0, -1.0);
    if hs_norm(&(&check - a)) > (10.0 * block_tol * scale).max(1e-12) {
        return Err(QppError::NotRealizable(format!(
            "reconstruction residual {:.3e} exceeds tolerance",
            hs_norm(&(&check - a))
        )));
    }
    Ok(h)
}

/// Bit-flip steering law (state feedback) that drives the Bloch vector
/// along the level-set path ending on the x-axis. α₂ follows the designed
/// path, α₃ is the forced component.
#[derive(Debug, Clone)]
pub struct SteeringLaw {
    gamma: f64,
    f0: f64,
    vz0: f64,
    /// Initial azimuth measured from the +y axis: atan2(v_x(0), v_y(0)).
    phi0: f64,
    /// Already on the x-axis: nothing to steer.
    trivial: bool,
}

impl SteeringLaw {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn f0(&self) -> f64 {
        self.f0
    }

    /// (α₂, α₃) at the current state.
    pub fn alphas(&self, v: &Vector3<f64>) -> (f64, f64) {
        if self.trivial {
            return (0.0, 0.0);
        }
        let theta = 2.0 * self.phi0 / std::f64::consts::PI;
        let a2 = self.gamma / (2.0 * v.z)
            * (std::f64::consts::PI * (1.0 - theta) * (v.y * v.y + v.z * v.z)
                / (self.vz0 * self.vz0)
                - v.x * v.y / self.f0);
        let a3 = -0.5 * self.gamma * v.y * v.y / (self.f0 * v.z * v.z);
        (a2, a3)
    }

    /// h = α₂ ∇f + α₃ (∇f × v) for f = coherence.
    pub fn control(&self, v: &Vector3<f64>) -> Vector3<f64> {
        if self.trivial {
            return Vector3::zeros();
        }
        let (a2, a3) = self.alphas(v);
        let grad = Vector3::new(2.0 * v.x, 2.0 * v.y, 0.0);
        let gxv = grad.cross(v);
        grad * a2 + gxv * a3
    }

    /// The designed level-set path l(u), u ∈ [0, 1], from v₀ to (√f₀, 0, 0).
    pub fn designed_path(&self, n: usize) -> Vec<(f64, Vector3<f64>)> {
        let sqrt_f0 = self.f0.sqrt();
        (0..n)
            .map(|k| {
                let u = k as f64 / (n - 1) as f64;
                let phi = self.phi0 + (std::f64::consts::FRAC_PI_2 - self.phi0) * u;
                (
                    u,
                    Vector3::new(
                        sqrt_f0 * phi.sin(),
                        sqrt_f0 * phi.cos(),
                        self.vz0 * (1.0 - u).sqrt(),
                    ),
                )
            })
            .collect()
    }

    /// c(u) = v_z²(0) / (4γ (l_y² + l_z²)) along the designed path.
    pub fn c_of_u(&self, u: f64) -> f64 {
        let sqrt_f0 = self.f0.sqrt();
        let phi = self.phi0 + (std::f64::consts::FRAC_PI_2 - self.phi0) * u;
        let ly = sqrt_f0 * phi.cos();
        let lz2 = self.vz0 * self.vz0 * (1.0 - u);
        self.vz0 * self.vz0 / (4.0 * self.gamma * (ly * ly + lz2))
    }
}

/// Build the steering law for a bit-flip channel from the initial state.
/// Requires v_z(0) ≠ 0 unless the state is already on the x-axis.
pub fn alpha2_steering(v0: &Vector3<f64>, d: &Dissipator, f0: f64) -> Result<SteeringLaw> {
    let d = d.to_convention(Convention::Bloch)?;
    let (r, c) = d.bloch3()?;
    let gamma = -r[(1, 1)] / 2.0;
    let is_bitflip = r[(0, 0)].abs() <= 1e-12 * gamma.abs().max(1.0)
        && (r[(1, 1)] - r[(2, 2)]).abs() <= 1e-12 * gamma.abs().max(1.0)
        && c.norm() <= 1e-12 * gamma.abs().max(1.0)
        && gamma > 0.0;
    if !is_bitflip {
        return Err(QppError::InvalidChannel(
            "alpha2 steering is derived for the bit-flip channel".into(),
        ));
    }
    let f0_state = v0.x * v0.x + v0.y * v0.y;
    if (f0_state - f0).abs() > 1e-6 * f0.max(1.0) {
        return Err(QppError::InvalidReference(format!(
            "initial state has coherence {f0_state}, expected {f0}"
        )));
    }
    let on_axis = v0.y.abs() <= 1e-14 && v0.z.abs() <= 1e-14;
    if on_axis {
        return Ok(SteeringLaw { gamma, f0, vz0: 0.0, phi0: 0.0, trivial: true });
    }
    if v0.z.abs() <= 1e-14 {
        return Err(QppError::BreakdownPoint(
            "v_z(0) = 0: state starts in the breakdown plane".into(),
        ));
    }
    if f0 <= 0.0 {
        return Err(QppError::InvalidReference("steering needs nonzero coherence".into()));
    }
    Ok(SteeringLaw {
        gamma,
        f0,
        vz0: v0.z,
        phi0: v0.x.atan2(v0.y),
        trivial: false,
    })
}
