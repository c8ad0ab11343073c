//! Geometry of the control problem: the dissipator-induced purity rate,
//! stable-point loci, breakdown-set membership, and control-independent
//! realizability checking of prescribed trajectories.
//!
//! For a qubit the stable points are exactly the zero set of
//! Ṗ_D(v) = v·(Rv + c). Diagonalizing R = O D Oᵀ with D = −diag(d_i) turns
//! that zero set into the quadric Σ' d_i (w_i − r_i)² = Σ' d_i r_i² in the
//! rotated coordinates w = Oᵀv, r_i = c'_i/(2 d_i), which classifies into
//! the origin / a line / a plane (unital) or an ellipsoid / elliptic
//! cylinder / parallel planes (non-unital).
//!
//! A parametrized path l(u) is equivalent to a realizable trajectory iff
//! ∂_u P = c(u) ∂_u P_D with 0 < c(u) < ∞; the reparametrization to
//! physical time is t = φ(u) = ∫₀ᵘ c.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::channels::{lindblad_action, Dissipator, LindbladTerm};
use crate::control::{hamiltonian_for_unitary_part, ControlField};
use crate::error::{QppError, Result};
use crate::interp::CubicHermite;
use crate::operator_space::{
    default_group_tol, eigendecompose_grouped, hermitian_from_coords, hs_norm, C64, Convention,
    DensityMatrix, OperatorBasis, StateVector,
};
use crate::properties::TargetProperty;

/// dP/dt induced by the dissipator alone: v·(Rv + c) in the Bloch
/// convention, 2v·(Rv + c) in the coherence convention. Independent of any
/// control Hamiltonian.
pub fn purity_rate(d: &Dissipator, v: &StateVector) -> Result<f64> {
    let drift = d.apply(v)?;
    let raw = v.coords().dot(&drift);
    Ok(match v.convention() {
        Convention::Bloch => raw,
        Convention::Coherence => 2.0 * raw,
    })
}

/// Raw-data purity rate for the qubit hot path.
pub fn purity_rate_bloch(r: &Matrix3<f64>, c: &Vector3<f64>, v: &Vector3<f64>) -> f64 {
    v.dot(&(r * v + c))
}

/// Eigenvalues of −R count as zero below this fraction of the largest one.
pub const LOCUS_ZERO_TOL: f64 = 1e-12;

/// Geometric classification of the qubit stable locus.
#[derive(Debug, Clone)]
pub enum StableLocusKind {
    Origin,
    Line { axis: Vector3<f64> },
    Plane { normal: Vector3<f64> },
    Ellipsoid { center: Vector3<f64>, semi_axes: Vector3<f64> },
    EllipticCylinder { axis: Vector3<f64>, center: Vector3<f64>, semi_axes: [f64; 2] },
    ParallelPlanes { normal: Vector3<f64>, offsets: [f64; 2] },
}

#[derive(Debug, Clone)]
pub struct StableLocus {
    pub kind: StableLocusKind,
    /// Columns are the eigenvectors of R (the rotated frame).
    pub rotation: Matrix3<f64>,
    /// Quadric center in the rotated frame, r_i = c'_i/(2 d_i).
    pub r_vec: Vector3<f64>,
}

impl StableLocus {
    /// Sample locus points inside the closed unit ball. Point counts may be
    /// slightly below `n` where the locus leaves the ball.
    pub fn sample(&self, n: usize) -> Vec<Vector3<f64>> {
        let mut pts = Vec::with_capacity(n);
        match &self.kind {
            StableLocusKind::Origin => pts.push(Vector3::zeros()),
            StableLocusKind::Line { axis } => {
                for k in 0..n {
                    let t = -1.0 + 2.0 * (k as f64 + 0.5) / n as f64;
                    pts.push(axis * t);
                }
            }
            StableLocusKind::Plane { normal } => {
                let (e1, e2) = orthonormal_complement(normal);
                for (k, phi) in crate::sampling::golden_angles(n).enumerate() {
                    let rad = ((k as f64 + 0.5) / n as f64).sqrt();
                    let p = e1 * (rad * phi.cos()) + e2 * (rad * phi.sin());
                    pts.push(p);
                }
            }
            StableLocusKind::Ellipsoid { center, semi_axes } => {
                // Golden-spiral latitude/longitude; poles avoided so the
                // origin-touching point of a non-unital ellipsoid (where no
                // finite control holds the state) is not emitted.
                for (k, phi) in crate::sampling::golden_angles(n).enumerate() {
                    let cos_t = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
                    let sin_t = (1.0 - cos_t * cos_t).sqrt();
                    let local = Vector3::new(
                        semi_axes.x * sin_t * phi.cos(),
                        semi_axes.y * sin_t * phi.sin(),
                        semi_axes.z * cos_t,
                    );
                    let p = self.rotation * (local + self.r_vec);
                    if p.norm() <= 1.0 {
                        pts.push(p);
                    }
                }
            }
            StableLocusKind::EllipticCylinder { center: _, semi_axes, .. } => {
                // The cylinder axis is the third rotated coordinate.
                let rows = (n as f64).sqrt().ceil() as usize;
                for (k, phi) in crate::sampling::golden_angles(n).enumerate() {
                    let z = -0.9 + 1.8 * ((k % rows) as f64 + 0.5) / rows as f64;
                    let local = Vector3::new(
                        semi_axes[0] * phi.cos(),
                        semi_axes[1] * phi.sin(),
                        z,
                    ) + self.r_vec;
                    let p = self.rotation * local;
                    if p.norm() <= 1.0 {
                        pts.push(p);
                    }
                }
            }
            StableLocusKind::ParallelPlanes { offsets, .. } => {
                let (e1, e2) = orthonormal_complement(&(self.rotation * Vector3::x()));
                for (k, phi) in crate::sampling::golden_angles(n).enumerate() {
                    let off = offsets[k % 2];
                    let rad = ((k as f64 + 0.5) / n as f64).sqrt() * 0.9;
                    let p = self.rotation * Vector3::x() * off
                        + e1 * (rad * phi.cos())
                        + e2 * (rad * phi.sin());
                    if p.norm() <= 1.0 {
                        pts.push(p);
                    }
                }
            }
        }
        pts
    }
}

fn orthonormal_complement(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let n = n.normalize();
    let seed = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let e1 = (seed - n * seed.dot(&n)).normalize();
    let e2 = n.cross(&e1);
    (e1, e2)
}

/// Classify the stable locus of a qubit dissipator by diagonalizing R.
pub fn stable_locus(d: &Dissipator) -> Result<StableLocus> {
    let d = d.to_convention(Convention::Bloch)?;
    let (r, c) = d.bloch3()?;
    let asym = (r - r.transpose()).norm();
    if asym > 1e-10 * r.norm().max(1.0) {
        return Err(QppError::NumericalFailure(format!(
            "qubit R must be symmetric (asymmetry {asym:.3e})"
        )));
    }
    let sym = (r + r.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let rotation = eig.eigenvectors;
    let decay: Vector3<f64> = -eig.eigenvalues; // d_i >= 0
    let d_max = decay.amax();
    if d_max <= 0.0 {
        return Err(QppError::InvalidChannel("R = 0 has no locus structure".into()));
    }
    let zero_tol = LOCUS_ZERO_TOL * d_max;
    let c_rot = rotation.transpose() * c;
    let mut nonzero: Vec<usize> = Vec::new();
    let mut r_vec = Vector3::zeros();
    for i in 0..3 {
        if decay[i] > zero_tol {
            nonzero.push(i);
            r_vec[i] = c_rot[i] / (2.0 * decay[i]);
        } else if c_rot[i].abs() > 1e-10 * c.norm().max(1.0) {
            return Err(QppError::InvalidChannel(
                "c has a component along a null direction of R".into(),
            ));
        }
    }
    let unital = d.is_unital();
    let rhs: f64 = nonzero.iter().map(|&i| decay[i] * r_vec[i] * r_vec[i]).sum();
    let axis_of = |i: usize| Vector3::from(rotation.column(i).clone_owned());

    let kind = match (unital, nonzero.len()) {
        (true, 3) => StableLocusKind::Origin,
        (true, 2) => {
            let zero_axis = (0..3).find(|i| !nonzero.contains(i)).unwrap();
            StableLocusKind::Line { axis: axis_of(zero_axis) }
        }
        (true, 1) => StableLocusKind::Plane { normal: axis_of(nonzero[0]) },
        (false, 3) => {
            let semi = Vector3::from_fn(|i, _| (rhs / decay[i]).sqrt());
            // Center and semi-axes live in the rotated frame; `rotation`
            // carries them back.
            StableLocusKind::Ellipsoid { center: rotation * r_vec, semi_axes: semi }
        }
        (false, 2) => {
            let zero_axis = (0..3).find(|i| !nonzero.contains(i)).unwrap();
            let semi = [
                (rhs / decay[nonzero[0]]).sqrt(),
                (rhs / decay[nonzero[1]]).sqrt(),
            ];
            StableLocusKind::EllipticCylinder {
                axis: axis_of(zero_axis),
                center: rotation * r_vec,
                semi_axes: semi,
            }
        }
        (false, 1) => StableLocusKind::ParallelPlanes {
            normal: axis_of(nonzero[0]),
            offsets: [0.0, 2.0 * r_vec[nonzero[0]]],
        },
        _ => return Err(QppError::InvalidChannel("degenerate dissipator".into())),
    };

    // Reorder the rotated frame so the cylinder axis is the third
    // coordinate, as the sampler assumes.
    if let StableLocusKind::EllipticCylinder { axis, center, semi_axes } = &kind {
        let mut cols = nonzero.clone();
        cols.push((0..3).find(|i| !nonzero.contains(i)).unwrap());
        let rot = Matrix3::from_columns(&[
            axis_of(cols[0]),
            axis_of(cols[1]),
            axis_of(cols[2]),
        ]);
        let r_local = Vector3::new(r_vec[cols[0]], r_vec[cols[1]], 0.0);
        return Ok(StableLocus {
            kind: StableLocusKind::EllipticCylinder {
                axis: *axis,
                center: *center,
                semi_axes: *semi_axes,
            },
            rotation: rot,
            r_vec: r_local,
        });
    }

    Ok(StableLocus { kind, rotation, r_vec })
}

/// Qubit stable-point test: |Ṗ_D| ≤ tol.
pub fn is_stable_point_qubit(d: &Dissipator, v: &StateVector, tol: f64) -> Result<bool> {
    Ok(purity_rate(d, v)?.abs() <= tol)
}

/// General-d stable-point test: every eigenspace-diagonal block of L_D(ρ)
/// vanishes.
pub fn is_stable_point_general(
    terms: &[LindbladTerm],
    rho: &DensityMatrix,
    tol: f64,
) -> Result<bool> {
    let a = lindblad_action(terms, rho.entries())?;
    let dec = eigendecompose_grouped(rho.entries(), default_group_tol(rho.entries()))?;
    let scale = hs_norm(&a).max(1e-300);
    for p in &dec.projectors {
        if hs_norm(&(p * &a * p)) > tol * scale.max(1.0) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Control that pins the state: 2h×v = −(Rv + c) for a qubit on the stable
/// locus. Fails with `NotAStablePoint` off the locus, and at v = 0 of a
/// non-unital channel where no finite control can cancel the drift.
pub fn stabilizing_control(d: &Dissipator, v: &StateVector) -> Result<ControlField> {
    let d = d.to_convention(Convention::Bloch)?;
    let v = v.to_convention(Convention::Bloch)?;
    let (r, c) = d.bloch3()?;
    let v3 = v.bloch3();
    let drift = r * v3 + c;
    let scale = (r.norm() * v3.norm() + c.norm()).max(1e-300);
    let pdot = v3.dot(&drift);
    if pdot.abs() > 1e-8 * scale * v3.norm().max(1e-8) {
        return Err(QppError::NotAStablePoint(pdot));
    }
    if drift.norm() <= 1e-14 * scale {
        return Ok(ControlField::zero_qubit());
    }
    let n2 = v3.norm_squared();
    if n2 < 1e-20 {
        return Err(QppError::NotAStablePoint(drift.norm()));
    }
    // Solve h×v = −drift/2; minimal-norm solution is v×b/‖v‖².
    let b = -drift * 0.5;
    let h = v3.cross(&b) / n2;
    let residual = (2.0 * h.cross(&v3) + drift).norm();
    if residual > 1e-10 * scale {
        return Err(QppError::NotAStablePoint(residual));
    }
    Ok(ControlField::Qubit { h, h0: 0.0, alphas: None, conditioning_warning: false })
}

/// General-d stabilizing control via the commutator-structure construction.
pub fn stabilizing_control_general(
    terms: &[LindbladTerm],
    rho: &DensityMatrix,
) -> Result<ControlField> {
    let a = lindblad_action(terms, rho.entries())?;
    if !is_stable_point_general(terms, rho, 1e-10)? {
        return Err(QppError::NotAStablePoint(hs_norm(&a)));
    }
    // L_D(ρ) = −i[H', ρ] with H' from the block construction; H = −H'.
    let h_prime = hamiltonian_for_unitary_part(rho.entries(), &a, 1e-8)?;
    Ok(ControlField::General { matrix: -h_prime, conditioning_warning: false })
}

/// Breakdown-set membership: ∇f collinear with v while the dissipator still
/// changes the purity.
pub fn breakdown_membership(
    f: &TargetProperty,
    d: &Dissipator,
    v: &StateVector,
    tol: f64,
) -> Result<bool> {
    let class = crate::properties::classify_at(f, d, v, tol)?;
    let pdot = purity_rate(d, v)?;
    Ok(class.collinearity <= tol * class.scale && pdot.abs() > tol)
}

/// A parameterized trajectory l(u) with C¹ interpolation.
#[derive(Debug, Clone)]
pub struct ParamTrajectory {
    dim: usize,
    convention: Convention,
    interp: CubicHermite,
}

impl ParamTrajectory {
    pub fn new(samples: &[(f64, StateVector)]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(QppError::InvalidTrajectory("need at least 2 samples".into()));
        }
        let dim = samples[0].1.dim();
        let convention = samples[0].1.convention();
        for (_, s) in samples {
            if s.dim() != dim || s.convention() != convention {
                return Err(QppError::InvalidTrajectory(
                    "mixed dimensions or conventions".into(),
                ));
            }
        }
        let us: Vec<f64> = samples.iter().map(|(u, _)| *u).collect();
        let ys: Vec<DVector<f64>> = samples.iter().map(|(_, s)| s.coords().clone()).collect();
        Ok(Self { dim, convention, interp: CubicHermite::new(us, ys)? })
    }

    /// Build from Bloch 3-vectors.
    pub fn from_bloch(samples: &[(f64, Vector3<f64>)]) -> Result<Self> {
        let converted: Vec<(f64, StateVector)> = samples
            .iter()
            .map(|(u, v)| (*u, StateVector::from_bloch3(v)))
            .collect();
        Self::new(&converted)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn domain(&self) -> (f64, f64) {
        self.interp.domain()
    }

    pub fn knots(&self) -> &[f64] {
        self.interp.knots()
    }

    pub fn value(&self, u: f64) -> DVector<f64> {
        self.interp.value(u)
    }

    pub fn derivative(&self, u: f64) -> DVector<f64> {
        self.interp.derivative(u)
    }

    pub fn state(&self, u: f64) -> Result<StateVector> {
        match self.convention {
            Convention::Bloch => {
                let y = self.value(u);
                Ok(StateVector::bloch(y[0], y[1], y[2]))
            }
            Convention::Coherence => StateVector::coherence(self.dim, self.value(u)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationReason {
    CNonPositive,
    CInfinite,
    OffLevelSet,
    BreakdownPoint,
}

impl std::fmt::Display for ViolationReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ViolationReason::CNonPositive => "c_nonpositive",
            ViolationReason::CInfinite => "c_infinite",
            ViolationReason::OffLevelSet => "off_level_set",
            ViolationReason::BreakdownPoint => "breakdown_point",
        };
        write!(f, "{s}")
    }
}

/// Result of the control-independent realizability test.
#[derive(Debug, Clone)]
pub struct RealizabilityReport {
    pub realizable: bool,
    /// Valid (u, c(u)) samples; stable 0/0 samples are omitted.
    pub c_samples: Vec<(f64, f64)>,
    pub first_violation: Option<(f64, ViolationReason)>,
    /// The path ends on a stable point approached asymptotically
    /// (physical time diverges there).
    pub asymptotic_endpoint: bool,
}

/// Default number of test points on [0, 1].
pub const REALIZABILITY_SAMPLES: usize = 512;

/// Check whether l(u) is equivalent to a realizable trajectory:
/// ∂_u P = c(u) ∂_u P_D with 0 < c < ∞ at every sample. A final sample
/// sitting exactly on a stable point with the purity still changing is
/// treated as an asymptotic endpoint rather than a violation; interior
/// stable samples require ∂_u P = 0 as well.
pub fn check_realizability(
    l: &ParamTrajectory,
    d: &Dissipator,
    tol: f64,
) -> Result<RealizabilityReport> {
    let d = match (l.convention(), d.convention()) {
        (Convention::Bloch, Convention::Coherence) => d.to_convention(Convention::Bloch)?,
        (Convention::Coherence, Convention::Bloch) => d.to_convention(Convention::Coherence)?,
        _ => d.clone(),
    };
    if d.r().nrows() != l.value(l.domain().0).len() {
        return Err(QppError::DimensionMismatch(d.r().nrows(), l.dim() * l.dim() - 1));
    }
    let (u0, u1) = l.domain();
    let n = REALIZABILITY_SAMPLES.max(l.knots().len());
    let us: Vec<f64> = (0..n)
        .map(|k| u0 + (u1 - u0) * k as f64 / (n - 1) as f64)
        .collect();

    // Scale for "the purity rate is zero" decisions.
    let max_norm = us
        .iter()
        .map(|&u| l.value(u).norm())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let rate_scale = d.r().norm() * max_norm * max_norm + d.c().norm() * max_norm;
    let eps = tol * rate_scale.max(1e-300);

    let mut c_samples = Vec::with_capacity(n);
    let mut violation: Option<(f64, ViolationReason)> = None;
    let mut asymptotic_endpoint = false;

    for (k, &u) in us.iter().enumerate() {
        let y = l.value(u);
        let ydot = l.derivative(u);
        let drift = d.r() * &y + d.c();
        let dp = y.dot(&ydot);
        let dpd = y.dot(&drift);
        if dpd.abs() <= eps {
            if dp.abs() <= eps {
                continue; // 0/0 stable sample: fine, c interpolates across
            }
            if k == n - 1 && dp < 0.0 {
                // Decaying onto a stable endpoint: realizable, infinite time.
                asymptotic_endpoint = true;
                continue;
            }
            violation = Some((
                localize(l, &d, u0.max(us[k.saturating_sub(1)]), u, eps, true),
                ViolationReason::CInfinite,
            ));
            break;
        }
        let c = dp / dpd;
        if c <= 0.0 {
            violation = Some((
                localize(l, &d, u0.max(us[k.saturating_sub(1)]), u, eps, false),
                ViolationReason::CNonPositive,
            ));
            break;
        }
        c_samples.push((u, c));
    }

    Ok(RealizabilityReport {
        realizable: violation.is_none(),
        c_samples,
        first_violation: violation,
        asymptotic_endpoint,
    })
}

/// Bisect the interpolant for the onset of a violation between a good and a
/// bad sample.
fn localize(
    l: &ParamTrajectory,
    d: &Dissipator,
    mut lo: f64,
    mut hi: f64,
    eps: f64,
    infinite: bool,
) -> f64 {
    let bad = |u: f64| {
        let y = l.value(u);
        let ydot = l.derivative(u);
        let drift = d.r() * &y + d.c();
        let dp = y.dot(&ydot);
        let dpd = y.dot(&drift);
        if infinite {
            dpd.abs() <= eps && dp.abs() > eps
        } else {
            dpd.abs() > eps && dp / dpd <= 0.0
        }
    };
    if !bad(hi) {
        return hi;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if bad(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Realizability of an f-preserving prescription: the path must also stay
/// on the level set of f and avoid the breakdown set before its endpoint.
pub fn check_f_preserving(
    l: &ParamTrajectory,
    f: &TargetProperty,
    d: &Dissipator,
    tol: f64,
) -> Result<RealizabilityReport> {
    let mut report = check_realizability(l, d, tol)?;
    if !report.realizable {
        return Ok(report);
    }
    let (u0, u1) = l.domain();
    let n = REALIZABILITY_SAMPLES.max(l.knots().len());
    let f0 = f.eval(&l.state(u0)?);
    let level_tol = tol.max(1e-9) * f0.abs().max(1.0);
    for k in 0..n {
        let u = u0 + (u1 - u0) * k as f64 / (n - 1) as f64;
        let state = l.state(u)?;
        if (f.eval(&state) - f0).abs() > level_tol {
            report.realizable = false;
            report.first_violation = Some((u, ViolationReason::OffLevelSet));
            break;
        }
        // Breakdown points block the path only strictly inside it.
        if k > 0 && k < n - 1 && breakdown_membership(f, d, &state, tol.max(1e-8))? {
            report.realizable = false;
            report.first_violation = Some((u, ViolationReason::BreakdownPoint));
            break;
        }
    }
    Ok(report)
}

/// A trajectory mapped to physical time via t = φ(u) = ∫₀ᵘ c.
#[derive(Debug, Clone)]
pub struct TimedTrajectory {
    pub samples: Vec<(f64, StateVector)>,
    pub total_time: f64,
    /// True when the path ends on a stable point at t → ∞; `samples` then
    /// stop at the last finite-time sample.
    pub asymptotic: bool,
}

/// Reparameterize a realizable trajectory to physical time using the c(u)
/// samples from its report. A trajectory pinned at a stable point (all
/// samples 0/0) admits any positive c; c ≡ 1 is used.
pub fn reparameterize(
    l: &ParamTrajectory,
    report: &RealizabilityReport,
) -> Result<TimedTrajectory> {
    if !report.realizable {
        return Err(QppError::NotRealizable(
            report
                .first_violation
                .map(|(u, r)| format!("{r} at u = {u:.6}"))
                .unwrap_or_else(|| "rejected by the realizability check".into()),
        ));
    }
    let (u0, u1) = l.domain();
    let c_interp: Option<CubicHermite> = if report.c_samples.len() >= 2 {
        Some(CubicHermite::new(
            report.c_samples.iter().map(|(u, _)| *u).collect(),
            report
                .c_samples
                .iter()
                .map(|(_, c)| DVector::from_vec(vec![*c]))
                .collect(),
        )?)
    } else {
        None
    };
    let c_at = |u: f64| -> f64 {
        match &c_interp {
            Some(ci) => {
                let (a, b) = ci.domain();
                ci.value(u.clamp(a, b))[0]
            }
            None => 1.0,
        }
    };

    // Cumulative trapezoid over a dense grid, emitting the knot times.
    let fine = 8 * REALIZABILITY_SAMPLES;
    let mut samples = Vec::with_capacity(l.knots().len());
    let knots: Vec<f64> = l.knots().to_vec();
    let mut ki = 0;
    let mut t = 0.0;
    let mut u_prev = u0;
    let mut c_prev = c_at(u0);
    let u_last_finite = if report.asymptotic_endpoint {
        // Stop just short of the stable endpoint; φ diverges there.
        report.c_samples.last().map(|(u, _)| *u).unwrap_or(u1)
    } else {
        u1
    };
    for k in 0..=fine {
        let u = u0 + (u1 - u0) * k as f64 / fine as f64;
        if u > u_last_finite + 1e-15 {
            break;
        }
        let c = c_at(u);
        if k > 0 {
            t += 0.5 * (c + c_prev) * (u - u_prev);
        }
        while ki < knots.len() && knots[ki] <= u + 1e-15 {
            samples.push((t, l.state(knots[ki])?));
            ki += 1;
        }
        u_prev = u;
        c_prev = c;
    }
    Ok(TimedTrajectory {
        samples,
        total_time: t,
        asymptotic: report.asymptotic_endpoint,
    })
}

/// Eq.-(16)-style general-d realizability: block conditions on
/// ∂_u σ − c(u) L_D σ with c(u) from the purity ratio.
pub fn check_realizability_general(
    l: &ParamTrajectory,
    terms: &[LindbladTerm],
    basis: &OperatorBasis,
    tol: f64,
) -> Result<RealizabilityReport> {
    if l.convention() != Convention::Coherence {
        return Err(QppError::InvalidTrajectory(
            "general-d check expects coherence-convention samples".into(),
        ));
    }
    let diss = crate::channels::dissipator_from_lindblad(terms, basis)?;
    let mut report = check_realizability(l, &diss, tol)?;
    if !report.realizable {
        return Ok(report);
    }
    for &(u, c) in &report.c_samples {
        let y = l.value(u);
        let ydot = l.derivative(u);
        let sigma = hermitian_from_coords(&y, basis, true);
        let sigma_dot = hermitian_from_coords(&ydot, basis, false);
        let adjusted = &sigma_dot - lindblad_action(terms, &sigma)? * C64::new(c, 0.0);
        let dec = eigendecompose_grouped(&sigma, default_group_tol(&sigma))?;
        let scale = hs_norm(&adjusted).max(1e-300);
        for p in &dec.projectors {
            if hs_norm(&(p * &adjusted * p)) > tol.max(1e-8) * scale {
                report.realizable = false;
                report.first_violation = Some((u, ViolationReason::CInfinite));
                return Ok(report);
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{builtin_dissipator, thermal_asymmetry, ChannelSpec};
    use crate::properties::coherence_property;
    use crate::sampling;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn purity_rate_examples() {
        let deph = builtin_dissipator(&ChannelSpec::Dephasing { gamma: 1.0 }).unwrap();
        let v = StateVector::bloch(0.5, 0.5, SQRT_HALF);
        assert_abs_diff_eq!(purity_rate(&deph, &v).unwrap(), -1.0, epsilon = 1e-14);
        let axis = StateVector::bloch(0.0, 0.0, 0.8);
        assert_abs_diff_eq!(purity_rate(&deph, &axis).unwrap(), 0.0, epsilon = 1e-14);

        let a = thermal_asymmetry(2.0);
        let relax = builtin_dissipator(&ChannelSpec::Relaxation { gamma: 1.0, beta_delta: 2.0 })
            .unwrap();
        let steady = StateVector::bloch(0.0, 0.0, 2.0 * a);
        assert_abs_diff_eq!(purity_rate(&relax, &steady).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn locus_kinds_for_builtins() {
        let deph = stable_locus(
            &builtin_dissipator(&ChannelSpec::Dephasing { gamma: 1.0 }).unwrap(),
        )
        .unwrap();
        match deph.kind {
            StableLocusKind::Line { axis } => {
                assert!(axis.cross(&Vector3::z()).norm() < 1e-12)
            }
            ref k => panic!("dephasing should give a line, got {k:?}"),
        }

        let bf = stable_locus(&builtin_dissipator(&ChannelSpec::BitFlip { gamma: 1.0 }).unwrap())
            .unwrap();
        match bf.kind {
            StableLocusKind::Line { axis } => {
                assert!(axis.cross(&Vector3::x()).norm() < 1e-12)
            }
            ref k => panic!("bit-flip should give a line, got {k:?}"),
        }

        let dep = stable_locus(
            &builtin_dissipator(&ChannelSpec::Depolarizing { gamma: 1.0 }).unwrap(),
        )
        .unwrap();
        assert!(matches!(dep.kind, StableLocusKind::Origin));

        let a = thermal_asymmetry(2.0);
        let relax = stable_locus(
            &builtin_dissipator(&ChannelSpec::Relaxation { gamma: 1.0, beta_delta: 2.0 })
                .unwrap(),
        )
        .unwrap();
        match relax.kind {
            StableLocusKind::Ellipsoid { center, semi_axes } => {
                assert!((center - Vector3::new(0.0, 0.0, a)).norm() < 1e-12);
                let mut s: Vec<f64> = semi_axes.iter().cloned().collect();
                s.sort_by(f64::total_cmp);
                assert_abs_diff_eq!(s[0], a, epsilon = 1e-12);
                assert_abs_diff_eq!(s[1], 2f64.sqrt() * a, epsilon = 1e-12);
                assert_abs_diff_eq!(s[2], 2f64.sqrt() * a, epsilon = 1e-12);
            }
            ref k => panic!("relaxation should give an ellipsoid, got {k:?}"),
        }
    }

    #[test]
    fn locus_samples_have_zero_purity_rate() {
        let channels = [
            ChannelSpec::Dephasing { gamma: 1.0 },
            ChannelSpec::BitFlip { gamma: 0.5 },
            ChannelSpec::Depolarizing { gamma: 2.0 },
            ChannelSpec::Relaxation { gamma: 1.0, beta_delta: 2.0 },
            ChannelSpec::RelaxationDephasing { gamma1: 1.0, gamma_d: 0.25, beta_delta: 2.0 },
        ];
        for spec in &channels {
            let d = builtin_dissipator(spec).unwrap();
            let locus = stable_locus(&d).unwrap();
            let pts = locus.sample(200);
            assert!(!pts.is_empty());
            for p in pts {
                let v = StateVector::from_bloch3(&p);
                let rate = purity_rate(&d, &v).unwrap().abs();
                assert!(
                    rate <= 1e-10 * d.r().norm().max(1.0),
                    "{spec:?}: rate {rate:.2e} at {p:?}"
                );
            }
        }
    }

    #[test]
    fn off_locus_points_are_unstable() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let spec = ChannelSpec::Relaxation { gamma: 1.0, beta_delta: 2.0 };
        let d = builtin_dissipator(&spec).unwrap();
        let mut rejected = 0;
        for _ in 0..200 {
            let p = sampling::random_bloch_in_ball(&mut rng);
            let v = StateVector::from_bloch3(&p);
            if purity_rate(&d, &v).unwrap().abs() > 1e-6 {
                assert!(!is_stable_point_qubit(&d, &v, 1e-8).unwrap());
                rejected += 1;
            }
        }
        assert!(rejected > 150);
    }

    #[test]
    fn stable_point_examples() {
        let deph = builtin_dissipator(&ChannelSpec::Dephasing { gamma: 1.0 }).unwrap();
        assert!(is_stable_point_qubit(&deph, &StateVector::bloch(0.0, 0.0, 0.6), 1e-10).unwrap());
        assert!(!is_stable_point_qubit(
            &deph,
            &StateVector::bloch(0.5, 0.5, SQRT_HALF),
            1e-10
        )
        .unwrap());
        let bf = builtin_dissipator(&ChannelSpec::BitFlip { gamma: 1.0 }).unwrap();
        assert!(is_stable_point_qubit(&bf, &StateVector::bloch(0.7, 0.0, 0.0), 1e-10).unwrap());
    }

    #[test]
    fn qubit_and_general_stability_tests_agree() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let basis = crate::operator_space::build_nice_basis(2).unwrap();
        let channels = [
            ChannelSpec::Dephasing { gamma: 1.0 },
            ChannelSpec::BitFlip { gamma: 1.0 },
            ChannelSpec::Relaxation { gamma: 1.0, beta_delta: 2.0 },
        ];
        for spec in &channels {
            let d = builtin_dissipator(spec).unwrap();
            let terms = spec.lindblad_terms().unwrap();
            // Locus points: both say stable.
            for p in stable_locus(&d).unwrap().sample(40) {
                if p.norm() < 1e-6 && !d.is_unital() {
                    continue;
                }
                let v = StateVector::from_bloch3(&p);
                let rho = crate::operator_space::from_state_vector(
                    &v.to_convention(Convention::Coherence).unwrap(),
                    &basis,
                )
                .unwrap();
                assert!(is_stable_point_qubit(&d, &v, 1e-9).unwrap());
                assert!(is_stable_point_general(&terms, &rho, 1e-8).unwrap(), "{spec:?} at {p:?}");
            }
            // Random points: agreement away from the threshold band.
            for _ in 0..150 {
                let p = sampling::random_bloch_in_shell(&mut rng, 0.1, 0.9);
                let v = StateVector::from_bloch3(&p);
                if purity_rate(&d, &v).unwrap().abs() < 1e-4 {
                    continue;
                }
                let rho = crate::operator_space::from_state_vector(
                    &v.to_convention(Convention::Coherence).unwrap(),
                    &basis,
                )
                .unwrap();
                assert_eq!(
                    is_stable_point_qubit(&d, &v, 1e-8).unwrap(),
                    is_stable_point_general(&terms, &rho, 1e-6).unwrap(),
                    "{spec:?} at {p:?}"
                );
            }
        }
    }

    #[test]
    fn stabilizing_control_pins_locus_points() {
        let channels = [
            ChannelSpec::Dephasing { gamma: 1.0 },
            ChannelSpec::Relaxation { gamma: 1.0, beta_delta: 2.0 },
        ];
        for spec in &channels {
            let d = builtin_dissipator(spec).unwrap();
            let (r, c) = d.bloch3().unwrap();
            for p in stable_locus(&d).unwrap().sample(64) {
                if p.norm() < 1e-3 && !d.is_unital() {
                    continue;
                }
                let v = StateVector::from_bloch3(&p);
                let ctrl = stabilizing_control(&d, &v).unwrap();
                let (_, h) = ctrl.bloch().unwrap();
                let vdot = 2.0 * h.cross(&p) + r * p + c;
                assert!(vdot.norm() <= 1e-10, "{spec:?}: |vdot| = {:.2e}", vdot.norm());
            }
        }
    }

    #[test]
    fn stabilizing_control_rejects_unstable_points() {
        let d = builtin_dissipator(&ChannelSpec::Dephasing { gamma: 1.0 }).unwrap();
        let v = StateVector::bloch(0.5, 0.5, SQRT_HALF);
        assert!(matches!(
            stabilizing_control(&d, &v),
            Err(QppError::NotAStablePoint(_))
        ));
    }

    #[test]
    fn relaxation_equator_point_is_stabilizable() {
        let a = thermal_asymmetry(2.0);
        let d = builtin_dissipator(&ChannelSpec::Relaxation { gamma: 1.0, beta_delta: 2.0 })
            .unwrap();
        let p = Vector3::new(2f64.sqrt() * a, 0.0, a);
        let ctrl = stabilizing_control(&d, &StateVector::from_bloch3(&p)).unwrap();
        let (r, c) = d.bloch3().unwrap();
        let (_, h) = ctrl.bloch().unwrap();
        assert!((2.0 * h.cross(&p) + r * p + c).norm() <= 1e-10);
    }

    #[test]
    fn breakdown_membership_examples() {
        let f = coherence_property();
        let deph = builtin_dissipator(&ChannelSpec::Dephasing { gamma: 1.0 }).unwrap();
        let in_plane = StateVector::bloch(0.5, 0.2, 0.0);
        assert!(breakdown_membership(&f, &deph, &in_plane, 1e-8).unwrap());
        let origin = StateVector::bloch(0.0, 0.0, 0.0);
        assert!(!breakdown_membership(&f, &deph, &origin, 1e-8).unwrap());

        // Fidelity with a pure reference: v ∝ w with nonzero purity rate.
        let w = Vector3::new(0.0, 1.0, 0.0);
        let fid = crate::properties::fidelity_property(w).unwrap();
        let v = StateVector::from_bloch3(&(w * 0.4));
        assert!(breakdown_membership(&fid, &deph, &v, 1e-8).unwrap());
    }

    #[test]
    fn increasing_purity_cylinder_path_is_rejected() {
        let d = builtin_dissipator(&ChannelSpec::Dephasing { gamma: 1.0 }).unwrap();
        let f0: f64 = 0.22;
        let samples: Vec<(f64, Vector3<f64>)> = (0..128)
            .map(|k| {
                let u = k as f64 / 127.0;
                let phi = 0.3 + 0.8 * u;
                (
                    u,
                    Vector3::new(
                        f0.sqrt() * phi.cos(),
                        f0.sqrt() * phi.sin(),
                        0.3 + 0.5 * u, // |v_z| grows: purity increases
                    ),
                )
            })
            .collect();
        let l = ParamTrajectory::from_bloch(&samples).unwrap();
        let report = check_realizability(&l, &d, 1e-8).unwrap();
        assert!(!report.realizable);
        assert_eq!(report.first_violation.unwrap().1, ViolationReason::CNonPositive);
    }

    #[test]
    fn decreasing_purity_cylinder_path_is_accepted() {
        let d = builtin_dissipator(&ChannelSpec::Dephasing { gamma: 1.0 }).unwrap();
        let f0: f64 = 0.22;
        let samples: Vec<(f64, Vector3<f64>)> = (0..128)
            .map(|k| {
                let u = k as f64 / 127.0;
                let phi = 0.3 + 0.8 * u;
                (
                    u,
                    Vector3::new(
                        f0.sqrt() * phi.cos(),
                        f0.sqrt() * phi.sin(),
                        0.8 - 0.5 * u, // ends above the breakdown plane
                    ),
                )
            })
            .collect();
        let l = ParamTrajectory::from_bloch(&samples).unwrap();
        let report = check_realizability(&l, &d, 1e-8).unwrap();
        assert!(report.realizable, "violation: {:?}", report.first_violation);
        let f = coherence_property();
        let full = check_f_preserving(&l, &f, &d, 1e-8).unwrap();
        assert!(full.realizable);

        // c(u) should match v_z ż / Ṗ_D analytically.
        for &(u, c) in full.c_samples.iter().skip(5).step_by(37) {
            let vz = 0.8 - 0.5 * u;
            let expect = (vz * -0.5) / (-2.0 * f0);
            assert_abs_diff_eq!(c, expect, epsilon = 1e-6);
        }
    }

    #[test]
    fn constant_path_at_stable_point_is_realizable() {
        let d = builtin_dissipator(&ChannelSpec::BitFlip { gamma: 1.0 }).unwrap();
        let v = Vector3::new(0.6, 0.0, 0.0);
        let samples: Vec<(f64, Vector3<f64>)> =
            (0..64).map(|k| (k as f64 / 63.0, v)).collect();
        let l = ParamTrajectory::from_bloch(&samples).unwrap();
        let report = check_realizability(&l, &d, 1e-8).unwrap();
        assert!(report.realizable);
        // All samples are 0/0: any positive c works; reparameterize uses 1.
        let timed = reparameterize(&l, &report).unwrap();
        assert_abs_diff_eq!(timed.total_time, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn reparameterize_constant_c() {
        // A free dephasing decay solves the master equation with c(u) = t_f.
        let d = builtin_dissipator(&ChannelSpec::Dephasing { gamma: 1.0 }).unwrap();
        let t_f = 2.0;
        let samples: Vec<(f64, Vector3<f64>)> = (0..256)
            .map(|k| {
                let u = k as f64 / 255.0;
                let t = t_f * u;
                (u, Vector3::new(0.8 * (-2.0 * t).exp(), 0.0, 0.3))
            })
            .collect();
        let l = ParamTrajectory::from_bloch(&samples).unwrap();
        let report = check_realizability(&l, &d, 1e-8).unwrap();
        assert!(report.realizable);
        for &(_, c) in report.c_samples.iter().skip(3) {
            assert_abs_diff_eq!(c, t_f, epsilon = 1e-5);
        }
        let timed = reparameterize(&l, &report).unwrap();
        assert_abs_diff_eq!(timed.total_time, t_f, epsilon = 1e-3);
    }

    #[test]
    fn general_d_check_matches_qubit_on_free_decay() {
        let spec = ChannelSpec::Dephasing { gamma: 1.0 };
        let terms = spec.lindblad_terms().unwrap();
        let basis = crate::operator_space::build_nice_basis(2).unwrap();
        let samples: Vec<(f64, StateVector)> = (0..128)
            .map(|k| {
                let u = k as f64 / 127.0;
                let t = 1.5 * u;
                let b = Vector3::new(0.7 * (-2.0 * t).exp(), 0.0, 0.4);
                (
                    u,
                    StateVector::from_bloch3(&b)
                        .to_convention(Convention::Coherence)
                        .unwrap(),
                )
            })
            .collect();
        let l = ParamTrajectory::new(&samples).unwrap();
        let report = check_realizability_general(&l, &terms, &basis, 1e-6).unwrap();
        assert!(report.realizable, "violation: {:?}", report.first_violation);
    }

    #[test]
    fn rng_smoke() {
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let _: f64 = rng.gen();
    }
}
