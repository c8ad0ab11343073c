//! Deterministic random-state sampling used by grid scans, sweeps, and tests.

use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;

use crate::operator_space::{C64, DensityMatrix, StateVector};

/// Full-rank random density matrix ρ = A A† / Tr(A A†) with Ginibre A.
pub fn random_density<R: Rng>(d: usize, rng: &mut R) -> DensityMatrix {
    use rand_distr::StandardNormal;
    let a = DMatrix::<C64>::from_fn(d, d, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let m = &a * a.adjoint();
    let tr = m.trace().re;
    DensityMatrix::new(m / C64::new(tr, 0.0)).expect("Ginibre construction is always valid")
}

/// Uniform point in the closed unit ball.
pub fn random_bloch_in_ball<R: Rng>(rng: &mut R) -> Vector3<f64> {
    let dir = random_unit_vector(rng);
    let radius = rng.gen_range(0.0f64..1.0).cbrt();
    dir * radius
}

/// Uniform point with norm in [r_min, r_max] ⊆ [0, 1].
pub fn random_bloch_in_shell<R: Rng>(rng: &mut R, r_min: f64, r_max: f64) -> Vector3<f64> {
    let dir = random_unit_vector(rng);
    let u = rng.gen_range(0.0f64..1.0);
    let radius = (r_min.powi(3) + u * (r_max.powi(3) - r_min.powi(3))).cbrt();
    dir * radius
}

/// Uniform direction on the unit sphere.
pub fn random_unit_vector<R: Rng>(rng: &mut R) -> Vector3<f64> {
    use rand_distr::StandardNormal;
    loop {
        let v = Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Random Bloch-convention qubit state in the unit ball.
pub fn random_bloch_state<R: Rng>(rng: &mut R) -> StateVector {
    StateVector::from_bloch3(&random_bloch_in_ball(rng))
}

/// Random coherence-convention state for dimension d, drawn from a random
/// density matrix so the coordinates are always physical.
pub fn random_coherence_state<R: Rng>(d: usize, rng: &mut R) -> StateVector {
    let basis = crate::operator_space::build_nice_basis(d).expect("d >= 2");
    let rho = random_density(d, rng);
    crate::operator_space::to_state_vector(&rho, &basis).expect("dimensions match")
}

/// Random traceless Hermitian matrix with entries of order `scale`.
pub fn random_traceless_hermitian<R: Rng>(d: usize, scale: f64, rng: &mut R) -> DMatrix<C64> {
    use rand_distr::StandardNormal;
    let mut m = DMatrix::<C64>::zeros(d, d);
    for i in 0..d {
        for j in (i + 1)..d {
            let z = C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            m[(i, j)] = z * scale;
            m[(j, i)] = z.conj() * scale;
        }
        m[(i, i)] = C64::new(rng.sample::<f64, _>(StandardNormal) * scale, 0.0);
    }
    let shift = m.trace() / C64::new(d as f64, 0.0);
    for i in 0..d {
        m[(i, i)] -= shift;
    }
    m
}

/// Deterministic low-discrepancy azimuths for level-set sampling.
pub fn golden_angles(n: usize) -> impl Iterator<Item = f64> {
    let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    (0..n).map(move |k| (k as f64 + 0.5) * golden)
}

/// DVector view of a Bloch 3-vector.
pub fn dvec3(v: &Vector3<f64>) -> DVector<f64> {
    DVector::from_vec(vec![v.x, v.y, v.z])
}
