//! Target properties f(v) with analytic gradients, and the pointwise
//! controllability trichotomy.
//!
//! A property is *trivially controllable* at a state when the dissipator
//! already moves the state along the level set (∇f·(Rv + c) = 0), and
//! *uncontrollable* when ∇f is collinear with v while the dissipator still
//! drives f. Everything else is *controllable*: a finite control Hamiltonian
//! can cancel the dissipator's normal component.
//!
//! Built-in qubit properties (Bloch convention):
//! - coherence magnitude f = v_x² + v_y², ∇f = (2v_x, 2v_y, 0)
//! - Uhlmann fidelity against w:
//!   f = F² = ½(1 + v·w + √((1 − ‖v‖²)(1 − ‖w‖²))), ∇f = ½(w − k₀ v)
//!   with k₀ = √((1 − ‖w‖²)/(1 − ‖v‖²))
//! - purity and the von Neumann entropy, both functions of ‖v‖ only and
//!   hence uncontrollable wherever v·(Rv + c) ≠ 0.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Vector3};

use crate::channels::{dissipator_from_lindblad, lindblad_action, Dissipator, LindbladTerm};
use crate::error::{QppError, Result};
use crate::operator_space::{
    build_nice_basis, hs_inner, hs_norm, to_state_vector, C64, Convention, DensityMatrix,
    StateVector,
};

/// Default scale-invariant threshold for the controllability trichotomy.
pub const DEFAULT_CLASS_TOL: f64 = 1e-8;

/// Guard band excluding the log divergence of the von Neumann entropy.
const ENTROPY_EDGE: f64 = 1e-9;

type EvalFn = dyn Fn(&StateVector) -> f64 + Send + Sync;
type GradFn = dyn Fn(&StateVector) -> DVector<f64> + Send + Sync;
type GuardFn = dyn Fn(&StateVector) -> bool + Send + Sync;

/// User-supplied property on coherence/Bloch coordinates.
pub struct CustomProperty {
    pub eval: Box<EvalFn>,
    pub grad: Box<GradFn>,
    pub guard: Box<GuardFn>,
}

#[derive(Clone)]
enum Kind {
    Coherence,
    Fidelity { w: Vector3<f64> },
    Purity,
    VonNeumannEntropy,
    /// f = v_axis (Bloch component), e.g. f = v_z.
    BlochAxis { axis: usize },
    Custom(Arc<CustomProperty>),
}

/// A differentiable scalar target property with analytic gradient.
#[derive(Clone)]
pub struct TargetProperty {
    name: String,
    kind: Kind,
}

impl fmt::Debug for TargetProperty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TargetProperty({})", self.name)
    }
}

/// Coherence magnitude f = v_x² + v_y² (qubit, Bloch convention).
pub fn coherence_property() -> TargetProperty {
    TargetProperty { name: "coherence".into(), kind: Kind::Coherence }
}

/// Uhlmann fidelity squared against the Bloch vector w, ‖w‖ ≤ 1.
pub fn fidelity_property(w: Vector3<f64>) -> Result<TargetProperty> {
    if w.norm() > 1.0 + 1e-10 {
        return Err(QppError::InvalidReference(format!("|w| = {} > 1", w.norm())));
    }
    Ok(TargetProperty { name: "fidelity".into(), kind: Kind::Fidelity { w } })
}

/// Purity P = Tr ρ² (any dimension, both conventions).
pub fn purity_property() -> TargetProperty {
    TargetProperty { name: "purity".into(), kind: Kind::Purity }
}

/// Von Neumann entropy of a qubit as a function of ‖v‖ (Bloch convention).
pub fn von_neumann_entropy_property() -> TargetProperty {
    TargetProperty { name: "von-neumann-entropy".into(), kind: Kind::VonNeumannEntropy }
}

/// Single Bloch component, f = v_x, v_y, or v_z.
pub fn bloch_axis_property(axis: usize) -> Result<TargetProperty> {
    if axis > 2 {
        return Err(QppError::InvalidReference(format!("axis {axis} out of range")));
    }
    let name = ["vx", "vy", "vz"][axis].to_string();
    Ok(TargetProperty { name, kind: Kind::BlochAxis { axis } })
}

/// Wrap user-supplied closures as a property.
pub fn custom_property(name: &str, custom: CustomProperty) -> TargetProperty {
    TargetProperty { name: name.into(), kind: Kind::Custom(Arc::new(custom)) }
}

fn k0(v2: f64, w2: f64) -> f64 {
    let num = 1.0 - w2;
    if num <= 1e-14 {
        // On the ‖w‖ = 1 slice the square-root term vanishes identically;
        // the interior limit of the gradient keeps only w/2.
        0.0
    } else {
        (num / (1.0 - v2).max(f64::MIN_POSITIVE)).sqrt()
    }
}

impl TargetProperty {
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Reference Bloch vector (fidelity only).
    pub fn reference(&self) -> Option<Vector3<f64>> {
        match &self.kind {
            Kind::Fidelity { w } => Some(*w),
            _ => None,
        }
    }

    /// Fast path: evaluate on a Bloch 3-vector.
    pub fn eval_bloch(&self, v: &Vector3<f64>) -> f64 {
        match &self.kind {
            Kind::Coherence => v.x * v.x + v.y * v.y,
            Kind::Fidelity { w } => {
                let v2 = v.norm_squared();
                let w2 = w.norm_squared();
                let cross = ((1.0 - v2).max(0.0) * (1.0 - w2).max(0.0)).sqrt();
                0.5 * (1.0 + v.dot(w) + cross)
            }
            Kind::Purity => 0.5 * (1.0 + v.norm_squared()),
            Kind::VonNeumannEntropy => {
                let n = v.norm().min(1.0);
                let lp = 0.5 * (1.0 + n);
                let lm = 0.5 * (1.0 - n);
                let term = |l: f64| if l > 0.0 { -l * l.ln() } else { 0.0 };
                term(lp) + term(lm)
            }
            Kind::BlochAxis { axis } => v[*axis],
            Kind::Custom(c) => (c.eval)(&StateVector::from_bloch3(v)),
        }
    }

    /// Fast path: analytic gradient on a Bloch 3-vector.
    pub fn grad_bloch(&self, v: &Vector3<f64>) -> Vector3<f64> {
        match &self.kind {
            Kind::Coherence => Vector3::new(2.0 * v.x, 2.0 * v.y, 0.0),
            Kind::Fidelity { w } => {
                let k = k0(v.norm_squared(), w.norm_squared());
                (w - v * k) * 0.5
            }
            Kind::Purity => *v,
            Kind::VonNeumannEntropy => {
                let n = v.norm();
                if n < 1e-14 {
                    return -v;
                }
                let lp = 0.5 * (1.0 + n);
                let lm = 0.5 * (1.0 - n);
                let df_dn = -0.5 * (lp / lm.max(f64::MIN_POSITIVE)).ln();
                v * (df_dn / n)
            }
            Kind::BlochAxis { axis } => {
                let mut g = Vector3::zeros();
                g[*axis] = 1.0;
                g
            }
            Kind::Custom(c) => {
                let g = (c.grad)(&StateVector::from_bloch3(v));
                Vector3::new(g[0], g[1], g[2])
            }
        }
    }

    /// Whether the gradient is defined at this state.
    pub fn domain_ok(&self, v: &StateVector) -> bool {
        match &self.kind {
            Kind::Fidelity { w } => {
                let b = v.to_convention(Convention::Bloch);
                match b {
                    Ok(b) => {
                        w.norm_squared() >= 1.0 - 1e-14 || b.norm() < 1.0 - 1e-12
                    }
                    Err(_) => false,
                }
            }
            Kind::VonNeumannEntropy => match v.to_convention(Convention::Bloch) {
                Ok(b) => b.norm() <= 1.0 - ENTROPY_EDGE,
                Err(_) => false,
            },
            Kind::Custom(c) => (c.guard)(v),
            _ => true,
        }
    }

    /// General entry point; dispatches on the state's convention.
    pub fn eval(&self, v: &StateVector) -> f64 {
        match (&self.kind, v.convention()) {
            (Kind::Purity, _) => crate::operator_space::purity(v),
            (Kind::Custom(c), _) => (c.eval)(v),
            (_, Convention::Bloch) => self.eval_bloch(&v.bloch3()),
            (_, Convention::Coherence) => {
                let b = v.to_convention(Convention::Bloch).expect("qubit property");
                self.eval_bloch(&b.bloch3())
            }
        }
    }

    /// Gradient with respect to the state's own coordinates.
    pub fn grad(&self, v: &StateVector) -> DVector<f64> {
        match (&self.kind, v.convention()) {
            (Kind::Purity, Convention::Coherence) => v.coords() * 2.0,
            (Kind::Purity, Convention::Bloch) => v.coords().clone(),
            (Kind::Custom(c), _) => (c.grad)(v),
            (_, Convention::Bloch) => {
                let g = self.grad_bloch(&v.bloch3());
                DVector::from_vec(vec![g.x, g.y, g.z])
            }
            (_, Convention::Coherence) => {
                // Chain rule through v_bloch = √2 v_coherence.
                let b = v.to_convention(Convention::Bloch).expect("qubit property");
                let g = self.grad_bloch(&b.bloch3());
                DVector::from_vec(vec![g.x, g.y, g.z])
                    * crate::operator_space::BLOCH_PER_COHERENCE
            }
        }
    }

    /// ∇f as a traceless Hermitian matrix, for the operator-space formalism.
    /// Valid for qubit properties: ∇f = Σ_k (∂f/∂v_k^bloch) σ_k.
    pub fn grad_matrix(&self, v: &Vector3<f64>) -> DMatrix<C64> {
        bloch_grad_matrix(&self.grad_bloch(v))
    }
}

/// Σ_k g_k σ_k: the operator form of a Bloch-coordinate gradient.
pub fn bloch_grad_matrix(g: &Vector3<f64>) -> DMatrix<C64> {
    DMatrix::from_row_slice(2, 2, &[
        C64::new(g.z, 0.0),
        C64::new(g.x, -g.y),
        C64::new(g.x, g.y),
        C64::new(-g.z, 0.0),
    ])
}

/// Pointwise controllability class with its diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropertyClassKind {
    TriviallyControllable,
    Uncontrollable,
    Controllable,
}

#[derive(Debug, Clone)]
pub struct PropertyClass {
    pub kind: PropertyClassKind,
    /// ∇f·(Rv + c) (or ⟨∇f, L_D ρ⟩ on the matrix path).
    pub alignment: f64,
    /// ‖∇f × v‖ (or ‖[ρ, ∇f]‖ on the matrix path).
    pub collinearity: f64,
    /// Reference scale ‖∇f‖(‖R‖‖v‖ + ‖c‖) both residuals are compared to.
    pub scale: f64,
}

fn trichotomy(alignment: f64, collinearity: f64, scale: f64, tol: f64) -> PropertyClassKind {
    let threshold = tol * scale;
    if alignment.abs() <= threshold {
        PropertyClassKind::TriviallyControllable
    } else if collinearity <= threshold {
        PropertyClassKind::Uncontrollable
    } else {
        PropertyClassKind::Controllable
    }
}

/// Classify (f, D) at a state using coordinate-space residuals.
pub fn classify_at(
    f: &TargetProperty,
    d: &Dissipator,
    v: &StateVector,
    tol: f64,
) -> Result<PropertyClass> {
    if !f.domain_ok(v) {
        return Err(QppError::GradientUndefined);
    }
    let g = f.grad(v);
    let drift = d.apply(v)?;
    let alignment = g.dot(&drift);
    // ‖g‖‖v‖ sin θ; coincides with ‖g × v‖ in three dimensions.
    let gn = g.norm();
    let vn = v.coords().norm();
    let collinearity = ((gn * vn).powi(2) - g.dot(v.coords()).powi(2)).max(0.0).sqrt();
    let scale = gn * (d.r().norm() * vn + d.c().norm());
    Ok(PropertyClass {
        kind: trichotomy(alignment, collinearity, scale, tol),
        alignment,
        collinearity,
        scale,
    })
}

/// Classify on the operator side: ∇f supplied as a traceless Hermitian
/// matrix, collinearity measured by ‖[ρ, ∇f]‖.
pub fn classify_general(
    grad_f: &DMatrix<C64>,
    terms: &[LindbladTerm],
    rho: &DensityMatrix,
    tol: f64,
) -> Result<PropertyClass> {
    let d = rho.dim();
    if grad_f.nrows() != d || grad_f.ncols() != d {
        return Err(QppError::DimensionMismatch(grad_f.nrows(), d));
    }
    let herm = crate::operator_space::hermiticity_residual(grad_f);
    if herm > 1e-10 * hs_norm(grad_f).max(1.0) {
        return Err(QppError::NotHermitian(herm));
    }
    let ld_rho = lindblad_action(terms, rho.entries())?;
    let alignment = hs_inner(grad_f, &ld_rho).re;
    let comm = rho.entries() * grad_f - grad_f * rho.entries();
    let collinearity = hs_norm(&comm);

    let basis = build_nice_basis(d)?;
    let diss = dissipator_from_lindblad(terms, &basis)?;
    let v = to_state_vector(rho, &basis)?;
    let scale = hs_norm(grad_f) * (diss.r().norm() * v.norm() + diss.c().norm());
    Ok(PropertyClass {
        kind: trichotomy(alignment, collinearity, scale, tol),
        alignment,
        collinearity,
        scale,
    })
}
