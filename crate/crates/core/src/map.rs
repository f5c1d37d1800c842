//! Two-qubit and single-qubit dephasing-map algebra.
//!
//! Basis order is fixed as `|00>, |01>, |10>, |11>` (row/column 0..4), the
//! first label being qubit 1. In that basis the dephasing map multiplies the
//! upper-triangular coherences of a pure-state projector by
//!
//! ```text
//!            |00>   |01>   |10>   |11>
//!   <00|      1     k2     k1     k12
//!   <01|             1     l12    k1
//!   <10|                    1     k2
//!   <11|                           1
//! ```
//!
//! and the lower triangle by the complex conjugates. Populations are never
//! touched.

use nalgebra::{Matrix2, Matrix4, SymmetricEigen};
use num_complex::Complex64;
use thiserror::Error;

pub const NORM_TOL: f64 = 1e-12;
pub const FACTOR_TOL: f64 = 1e-9;
pub const POSITIVITY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),
    #[error("dephasing factor {name} has modulus {modulus} > 1")]
    FactorTooLarge { name: &'static str, modulus: f64 },
    #[error("density matrix is not physical: {0}")]
    Unphysical(String),
    #[error("qubit state is not physical: population {a}, coherence modulus {b_abs}")]
    InvalidQubit { a: f64, b_abs: f64 },
}

/// `a|00> + b|01> + c|10> + d|11>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitPureState {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl TwoQubitPureState {
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self, MapError> {
        let s = Self { a, b, c, d };
        let n = s.norm_sqr();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(MapError::NotNormalized(n));
        }
        Ok(s)
    }

    pub fn from_real(a: f64, b: f64, c: f64, d: f64) -> Result<Self, MapError> {
        Self::new(a.into(), b.into(), c.into(), d.into())
    }

    /// Product state `(x0|0> + x1|1>) ⊗ (y0|0> + y1|1>)`.
    pub fn product(x: [Complex64; 2], y: [Complex64; 2]) -> Result<Self, MapError> {
        Self::new(x[0] * y[0], x[0] * y[1], x[1] * y[0], x[1] * y[1])
    }

    pub fn amplitudes(&self) -> [Complex64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes().iter().map(|z| z.norm_sqr()).sum()
    }

    /// The projector `|psi><psi|`.
    pub fn projector(&self) -> TwoQubitDensityMatrix {
        let amp = self.amplitudes();
        let mut m = [[Complex64::new(0.0, 0.0); 4]; 4];
        for (r, row) in m.iter_mut().enumerate() {
            for (c, entry) in row.iter_mut().enumerate() {
                *entry = amp[r] * amp[c].conj();
            }
        }
        TwoQubitDensityMatrix { m }
    }
}

/// The four decoherence functions at one time point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DephasingFactors {
    pub k1: Complex64,
    pub k2: Complex64,
    pub k12: Complex64,
    pub l12: Complex64,
}

impl DephasingFactors {
    pub fn new(k1: Complex64, k2: Complex64, k12: Complex64, l12: Complex64) -> Self {
        Self { k1, k2, k12, l12 }
    }

    pub fn real(k1: f64, k2: f64, k12: f64, l12: f64) -> Self {
        Self::new(k1.into(), k2.into(), k12.into(), l12.into())
    }

    pub fn identity() -> Self {
        Self::real(1.0, 1.0, 1.0, 1.0)
    }

    pub fn named(&self) -> [(&'static str, Complex64); 4] {
        [
            ("kappa1", self.k1),
            ("kappa2", self.k2),
            ("kappa12", self.k12),
            ("lambda12", self.l12),
        ]
    }

    pub fn moduli(&self) -> [f64; 4] {
        [self.k1.norm(), self.k2.norm(), self.k12.norm(), self.l12.norm()]
    }

    /// Entrywise product: the factors of "apply `self`, then `other`".
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            k1: self.k1 * other.k1,
            k2: self.k2 * other.k2,
            k12: self.k12 * other.k12,
            l12: self.l12 * other.l12,
        }
    }

    pub fn check_contractive(&self) -> Result<(), MapError> {
        for (name, z) in self.named() {
            let modulus = z.norm();
            if !(modulus <= 1.0 + FACTOR_TOL) {
                return Err(MapError::FactorTooLarge { name, modulus });
            }
        }
        Ok(())
    }

    /// Multiplier applied to the `(row, col)` entry of a density matrix.
    pub fn entry_factor(&self, row: usize, col: usize) -> Complex64 {
        let upper = |r: usize, c: usize| match (r, c) {
            (0, 1) | (2, 3) => self.k2,
            (0, 2) | (1, 3) => self.k1,
            (0, 3) => self.k12,
            (1, 2) => self.l12,
            _ => Complex64::new(1.0, 0.0),
        };
        if row <= col {
            upper(row, col)
        } else {
            upper(col, row).conj()
        }
    }
}

/// 4x4 density matrix in the `|00>, |01>, |10>, |11>` basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitDensityMatrix {
    pub m: [[Complex64; 4]; 4],
}

impl TwoQubitDensityMatrix {
    pub fn trace(&self) -> Complex64 {
        (0..4).map(|i| self.m[i][i]).sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..4 {
            for c in 0..4 {
                worst = worst.max((self.m[r][c] - self.m[c][r].conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let mat = Matrix4::from_fn(|r, c| self.m[r][c]);
        // symmetrize so round-off in the input cannot break the Hermitian solver
        let herm = (mat + mat.adjoint()) * Complex64::new(0.5, 0.0);
        SymmetricEigen::new(herm).eigenvalues.min()
    }

    /// Hermitian, unit trace, and eigenvalues above `-POSITIVITY_TOL`.
    pub fn check_physical(&self) -> Result<(), MapError> {
        let herm = self.hermiticity_defect();
        if herm > NORM_TOL {
            return Err(MapError::Unphysical(format!("hermiticity defect {herm:e}")));
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > NORM_TOL || tr.im.abs() > NORM_TOL {
            return Err(MapError::Unphysical(format!("trace {tr}")));
        }
        let min = self.min_eigenvalue();
        if min < -POSITIVITY_TOL {
            return Err(MapError::Unphysical(format!("minimum eigenvalue {min:e}")));
        }
        Ok(())
    }

    /// Applies the dephasing map to an arbitrary (not necessarily pure) state.
    pub fn dephase(&self, f: &DephasingFactors) -> Self {
        let mut out = *self;
        for (r, row) in out.m.iter_mut().enumerate() {
            for (c, entry) in row.iter_mut().enumerate() {
                *entry *= f.entry_factor(r, c);
            }
        }
        out
    }

    /// Marginal of qubit 1 (trace over qubit 2).
    pub fn marginal1(&self) -> (f64, Complex64) {
        let a = (self.m[0][0] + self.m[1][1]).re;
        let lower = self.m[2][0] + self.m[3][1];
        (a, lower)
    }

    /// Marginal of qubit 2 (trace over qubit 1).
    pub fn marginal2(&self) -> (f64, Complex64) {
        let a = (self.m[0][0] + self.m[2][2]).re;
        let lower = self.m[1][0] + self.m[3][2];
        (a, lower)
    }
}

/// Single-qubit state `[[a, b*], [b, 1 - a]]`; `b` is the lower-left entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState {
    pub a: f64,
    pub b: Complex64,
}

impl QubitState {
    pub fn new(a: f64, b: Complex64) -> Result<Self, MapError> {
        let err = MapError::InvalidQubit { a, b_abs: b.norm() };
        if !(-NORM_TOL..=1.0 + NORM_TOL).contains(&a) {
            return Err(err);
        }
        if b.norm_sqr() > a * (1.0 - a) + NORM_TOL {
            return Err(err);
        }
        Ok(Self { a, b })
    }

    pub fn d(&self) -> f64 {
        1.0 - self.a
    }

    pub fn matrix(&self) -> Matrix2<Complex64> {
        Matrix2::new(
            Complex64::new(self.a, 0.0),
            self.b.conj(),
            self.b,
            Complex64::new(self.d(), 0.0),
        )
    }
}

/// Result of mapping a pure state: the density matrix plus its smallest
/// eigenvalue. An unphysical factor combination is reported here rather
/// than raised, so parameter scans can keep going.
#[derive(Debug, Clone, Copy)]
pub struct MappedState {
    pub rho: TwoQubitDensityMatrix,
    pub min_eigenvalue: f64,
}

impl MappedState {
    pub fn is_positive(&self) -> bool {
        self.min_eigenvalue >= -POSITIVITY_TOL
    }
}

pub fn apply_dephasing_map(
    state: &TwoQubitPureState,
    f: &DephasingFactors,
) -> Result<MappedState, MapError> {
    let n = state.norm_sqr();
    if (n - 1.0).abs() > NORM_TOL {
        return Err(MapError::NotNormalized(n));
    }
    f.check_contractive()?;
    let rho = state.projector().dephase(f);
    Ok(MappedState {
        rho,
        min_eigenvalue: rho.min_eigenvalue(),
    })
}

/// Single-qubit dephasing: the lower coherence picks up `conj(gamma)`.
pub fn dephase_qubit(state: &QubitState, gamma: Complex64) -> QubitState {
    QubitState {
        a: state.a,
        b: state.b * gamma.conj(),
    }
}

/// Both single-qubit marginals of a physical two-qubit state.
pub fn reduced_states(
    rho: &TwoQubitDensityMatrix,
) -> Result<(QubitState, QubitState), MapError> {
    rho.check_physical()?;
    let (a1, b1) = rho.marginal1();
    let (a2, b2) = rho.marginal2();
    Ok((QubitState::new(a1, b1)?, QubitState::new(a2, b2)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn assert_matrix_eq(x: &TwoQubitDensityMatrix, y: &TwoQubitDensityMatrix, tol: f64) {
        for r in 0..4 {
            for col in 0..4 {
                assert!(
                    (x.m[r][col] - y.m[r][col]).norm() <= tol,
                    "entry ({r},{col}): {} vs {}",
                    x.m[r][col],
                    y.m[r][col]
                );
            }
        }
    }

    #[test]
    fn identity_factors_keep_projector() {
        let s = TwoQubitPureState::from_real(0.5, 0.5, 0.5, 0.5).unwrap();
        let out = apply_dephasing_map(&s, &DephasingFactors::identity()).unwrap();
        assert_matrix_eq(&out.rho, &s.projector(), 0.0);
        assert!(out.is_positive());
    }

    #[test]
    fn full_dephasing_gives_diagonal() {
        let s = TwoQubitPureState::from_real(0.5, 0.5, 0.5, 0.5).unwrap();
        let out = apply_dephasing_map(&s, &DephasingFactors::real(0.0, 0.0, 0.0, 0.0)).unwrap();
        for r in 0..4 {
            for col in 0..4 {
                let want = if r == col { 0.25 } else { 0.0 };
                assert_eq!(out.rho.m[r][col], c(want, 0.0));
            }
        }
    }

    #[test]
    fn bell_state_corner_coherence() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = TwoQubitPureState::from_real(h, 0.0, 0.0, h).unwrap();
        let out =
            apply_dephasing_map(&s, &DephasingFactors::real(0.5, 0.5, 0.25, 1.0)).unwrap();
        assert_abs_diff_eq!(out.rho.m[0][3].re, 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(out.rho.m[3][0].re, 0.125, epsilon = 1e-15);
        for (r, col) in [(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)] {
            assert_eq!(out.rho.m[r][col], c(0.0, 0.0));
        }
    }

    #[test]
    fn entry_positions_follow_the_map_layout() {
        let s = TwoQubitPureState::new(c(0.5, 0.0), c(0.0, 0.5), c(0.5, 0.0), c(0.0, -0.5))
            .unwrap();
        let f = DephasingFactors::new(c(0.3, 0.1), c(0.2, -0.4), c(0.6, 0.0), c(0.1, 0.7));
        let rho = s.projector().dephase(&f).m;
        let (a, b, cc, d) = (s.a, s.b, s.c, s.d);
        assert_eq!(rho[0][1], a * b.conj() * f.k2);
        assert_eq!(rho[0][2], a * cc.conj() * f.k1);
        assert_eq!(rho[0][3], a * d.conj() * f.k12);
        assert_eq!(rho[1][2], b * cc.conj() * f.l12);
        assert_eq!(rho[1][3], b * d.conj() * f.k1);
        assert_eq!(rho[2][3], cc * d.conj() * f.k2);
        assert_eq!(rho[2][1], cc * b.conj() * f.l12.conj());
    }

    #[test]
    fn rejects_bad_inputs() {
        let bad = TwoQubitPureState {
            a: c(1.0, 0.0),
            b: c(1.0, 0.0),
            c: c(0.0, 0.0),
            d: c(0.0, 0.0),
        };
        assert!(matches!(
            apply_dephasing_map(&bad, &DephasingFactors::identity()),
            Err(MapError::NotNormalized(_))
        ));
        let s = TwoQubitPureState::from_real(1.0, 0.0, 0.0, 0.0).unwrap();
        let f = DephasingFactors::real(1.0, 1.1, 1.0, 1.0);
        assert!(matches!(
            apply_dephasing_map(&s, &f),
            Err(MapError::FactorTooLarge { name: "kappa2", .. })
        ));
    }

    #[test]
    fn unphysical_combination_is_reported_not_raised() {
        // |Phi+> style coherences with k12 = 1 but l12 negative breaks positivity
        let s = TwoQubitPureState::from_real(0.5, 0.5, 0.5, 0.5).unwrap();
        let f = DephasingFactors::real(1.0, 1.0, 1.0, -1.0);
        let out = apply_dephasing_map(&s, &f).unwrap();
        assert!(!out.is_positive());
        assert!(out.min_eigenvalue < -0.1);
        assert!(reduced_states(&out.rho).is_err());
    }

    #[test]
    fn dephase_qubit_examples() {
        let s = QubitState::new(0.5, c(0.5, 0.0)).unwrap();
        assert_eq!(dephase_qubit(&s, c(1.0, 0.0)), s);
        assert_eq!(dephase_qubit(&s, c(0.0, 0.0)).b, c(0.0, 0.0));

        // oracle: mix rho with Z rho Z so the coherence shrinks by (2p - 1)
        let s = QubitState::new(0.3, c(0.0, 0.2)).unwrap();
        let gamma = (-1.0f64).exp();
        let p = (1.0 + gamma) / 2.0;
        let z = Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0));
        let rho = s.matrix();
        let mixed = rho * c(p, 0.0) + z * rho * z * c(1.0 - p, 0.0);
        let out = dephase_qubit(&s, c(gamma, 0.0));
        assert_abs_diff_eq!(out.a, 0.3);
        assert_abs_diff_eq!((out.b - mixed[(1, 0)]).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((out.b - c(0.0, 0.2 * gamma)).norm(), 0.0, epsilon = 1e-15);

        // complex gamma: a phase unitary diag(1, e^{i phi}) maps b -> b e^{i phi}
        let phi = 0.7;
        let u = Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), Complex64::from_polar(1.0, phi));
        let rotated = u * rho * u.adjoint();
        let out = dephase_qubit(&s, Complex64::from_polar(1.0, -phi));
        assert_abs_diff_eq!((out.b - rotated[(1, 0)]).norm(), 0.0, epsilon = 1e-15);
    }

    /// Independent partial trace: explicit index bookkeeping over |i j>.
    fn partial_trace_oracle(rho: &TwoQubitDensityMatrix, keep_first: bool) -> [[Complex64; 2]; 2] {
        let mut out = [[c(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for ip in 0..2 {
                for k in 0..2 {
                    let (r, col) = if keep_first {
                        (2 * i + k, 2 * ip + k)
                    } else {
                        (2 * k + i, 2 * k + ip)
                    };
                    out[i][ip] += rho.m[r][col];
                }
            }
        }
        out
    }

    #[test]
    fn reduced_states_examples() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let x = [c(0.6, 0.0), c(0.0, 0.8)];
        let y = [c(h, 0.0), c(h, 0.0)];
        let s = TwoQubitPureState::product(x, y).unwrap();
        let (r1, r2) = reduced_states(&s.projector()).unwrap();
        assert_abs_diff_eq!(r1.a, 0.36, epsilon = 1e-15);
        assert_abs_diff_eq!((r1.b - x[1] * x[0].conj()).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((r2.b - c(0.5, 0.0)).norm(), 0.0, epsilon = 1e-15);

        // qubit 1 in |+>, qubit 2 in |0>; k1 = 0.5 halves the marginal coherence
        let s = TwoQubitPureState::from_real(h, 0.0, h, 0.0).unwrap();
        let rho = apply_dephasing_map(&s, &DephasingFactors::real(0.5, 1.0, 1.0, 1.0))
            .unwrap()
            .rho;
        let (r1, _) = reduced_states(&rho).unwrap();
        let oracle = partial_trace_oracle(&rho, true);
        assert_abs_diff_eq!((r1.b - oracle[1][0]).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r1.b.re, 0.25, epsilon = 1e-15);

        let s = TwoQubitPureState::from_real(h, 0.0, 0.0, h).unwrap();
        let rho = apply_dephasing_map(&s, &DephasingFactors::real(0.3, 0.9, 0.2, 0.4))
            .unwrap()
            .rho;
        let (r1, r2) = reduced_states(&rho).unwrap();
        assert_eq!(r1.b, c(0.0, 0.0));
        assert_eq!(r2.b, c(0.0, 0.0));
    }

    fn arb_state() -> impl Strategy<Value = TwoQubitPureState> {
        prop::array::uniform8(-1.0f64..1.0).prop_filter_map("nonzero", |v| {
            let amps = [c(v[0], v[1]), c(v[2], v[3]), c(v[4], v[5]), c(v[6], v[7])];
            let n: f64 = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            (n > 1e-3).then(|| TwoQubitPureState {
                a: amps[0] / n,
                b: amps[1] / n,
                c: amps[2] / n,
                d: amps[3] / n,
            })
        })
    }

    fn arb_factors() -> impl Strategy<Value = DephasingFactors> {
        prop::array::uniform8(0.0f64..1.0).prop_map(|v| {
            let z = |r: f64, ph: f64| Complex64::from_polar(r, ph * std::f64::consts::TAU);
            DephasingFactors::new(z(v[0], v[1]), z(v[2], v[3]), z(v[4], v[5]), z(v[6], v[7]))
        })
    }

    fn arb_qubit() -> impl Strategy<Value = [Complex64; 2]> {
        prop::array::uniform4(-1.0f64..1.0).prop_filter_map("nonzero", |v| {
            let (x, y) = (c(v[0], v[1]), c(v[2], v[3]));
            let n = (x.norm_sqr() + y.norm_sqr()).sqrt();
            (n > 1e-3).then(|| [x / n, y / n])
        })
    }

    proptest! {
        #[test]
        fn diagonal_hermiticity_and_trace(s in arb_state(), f in arb_factors()) {
            let rho = apply_dephasing_map(&s, &f).unwrap().rho;
            let amp = s.amplitudes();
            for i in 0..4 {
                prop_assert_eq!(rho.m[i][i], amp[i] * amp[i].conj());
            }
            prop_assert!(rho.hermiticity_defect() <= 1e-12);
            prop_assert!((rho.trace() - c(1.0, 0.0)).norm() <= 1e-12);
        }

        #[test]
        fn composition_multiplies(s in arb_state(), f in arb_factors(), g in arb_factors()) {
            let rho = s.projector();
            let twice = rho.dephase(&f).dephase(&g);
            let once = rho.dephase(&f.compose(&g));
            for r in 0..4 {
                for col in 0..4 {
                    prop_assert!((twice.m[r][col] - once.m[r][col]).norm() <= 1e-15);
                }
            }
        }

        #[test]
        fn reduced_states_match_single_qubit_dephasing(
            x in arb_qubit(), y in arb_qubit(), k1 in 0.0f64..1.0, k2 in 0.0f64..1.0,
        ) {
            let s = TwoQubitPureState::product(x, y).unwrap();
            // factorized factors keep the product state physical
            let f = DephasingFactors::real(k1, k2, k1 * k2, k1 * k2);
            let rho = apply_dephasing_map(&s, &f).unwrap().rho;
            let (r1, r2) = reduced_states(&rho).unwrap();
            let m1 = QubitState::new(x[0].norm_sqr(), x[1] * x[0].conj()).unwrap();
            let m2 = QubitState::new(y[0].norm_sqr(), y[1] * y[0].conj()).unwrap();
            let e1 = dephase_qubit(&m1, c(k1, 0.0));
            let e2 = dephase_qubit(&m2, c(k2, 0.0));
            prop_assert!((r1.a - e1.a).abs() <= 1e-12 && (r1.b - e1.b).norm() <= 1e-12);
            prop_assert!((r2.a - e2.a).abs() <= 1e-12 && (r2.b - e2.b).norm() <= 1e-12);
            let oracle = partial_trace_oracle(&rho, false);
            prop_assert!((r2.b - oracle[1][0]).norm() <= 1e-12);
        }
    }
}
