//! Distances between states and the entropies used alongside them.
//!
//! Conventions: trace distance `D_T = (1/2) sum |lambda_i|` over the spectrum
//! of the difference, Uhlmann fidelity `F = Tr sqrt(sqrt(rho) sigma
//! sqrt(rho))` (the non-squared form), Bures distance `sqrt(2 - 2F)`, and all
//! logarithms base 2.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{eigh, hermitian_sqrt, SUPPORT_TOL};
use crate::scalar::{r, Real, C};
use crate::space::DensityMatrix;

fn check_same_space<T: Real>(rho: &DensityMatrix<T>, sigma: &DensityMatrix<T>) -> Result<()> {
    if rho.space() != sigma.space() {
        return Err(Error::DimensionMismatch(
            "states live on different spaces".into(),
        ));
    }
    Ok(())
}

/// Trace distance `(1/2) Tr |rho - sigma|`.
pub fn trace_distance<T: Real>(rho: &DensityMatrix<T>, sigma: &DensityMatrix<T>) -> Result<T> {
    check_same_space(rho, sigma)?;
    let diff = rho.matrix() - sigma.matrix();
    Ok(trace_norm_halved(&diff))
}

/// `(1/2) sum |lambda_i|` over the spectrum of a Hermitian matrix.
pub(crate) fn trace_norm_halved<T: Real>(m: &DMatrix<C<T>>) -> T {
    let (vals, _) = eigh(m);
    let mut s = T::zero();
    for v in vals {
        s += v.abs();
    }
    s / r(2.0)
}

/// Uhlmann fidelity, symmetric and in `[0, 1]`.
pub fn fidelity<T: Real>(rho: &DensityMatrix<T>, sigma: &DensityMatrix<T>) -> Result<T> {
    check_same_space(rho, sigma)?;
    let sqrt_rho = hermitian_sqrt(rho.matrix());
    let inner = &sqrt_rho * sigma.matrix() * &sqrt_rho;
    let (vals, _) = eigh(&inner);
    let mut f = T::zero();
    for v in vals {
        if v < -r::<T>(SUPPORT_TOL) {
            return Err(Error::InvalidState(format!(
                "fidelity kernel has eigenvalue {v:e} below tolerance"
            )));
        }
        if v > T::zero() {
            f += v.sqrt();
        }
    }
    // numerical drift can push the sum marginally above 1
    Ok(if f > T::one() && f < T::one() + r(1e-9) {
        T::one()
    } else {
        f
    })
}

/// Bures distance `sqrt(2 - 2 F(rho, sigma))`.
pub fn bures_distance<T: Real>(rho: &DensityMatrix<T>, sigma: &DensityMatrix<T>) -> Result<T> {
    let f = fidelity(rho, sigma)?;
    let x = r::<T>(2.0) - r::<T>(2.0) * f;
    Ok(if x > T::zero() { x.sqrt() } else { T::zero() })
}

/// Quantum relative entropy `S(rho|sigma) = Tr rho (log2 rho - log2 sigma)`.
///
/// Returns `+inf` when the support of `rho` is not contained in the support
/// of `sigma` (support test at eigenvalue threshold [`SUPPORT_TOL`]).
pub fn relative_entropy<T: Real>(rho: &DensityMatrix<T>, sigma: &DensityMatrix<T>) -> Result<T> {
    check_same_space(rho, sigma)?;
    let (rvals, rvecs) = eigh(rho.matrix());
    let (svals, svecs) = eigh(sigma.matrix());
    let thr = r::<T>(SUPPORT_TOL);

    // mass of rho falling into the kernel of sigma
    let mut kernel_mass = T::zero();
    for (i, &lam) in rvals.iter().enumerate() {
        if lam <= thr {
            continue;
        }
        let u = rvecs.column(i);
        for (j, &mu) in svals.iter().enumerate() {
            if mu <= thr {
                let ov = svecs.column(j).dotc(&u).norm_sqr();
                kernel_mass += lam * ov;
            }
        }
    }
    if kernel_mass > thr {
        return Ok(T::infinity());
    }

    let mut s = T::zero();
    for (i, &lam) in rvals.iter().enumerate() {
        if lam <= thr {
            continue;
        }
        s += lam * lam.log2();
        let u = rvecs.column(i);
        for (j, &mu) in svals.iter().enumerate() {
            if mu > thr {
                let ov = svecs.column(j).dotc(&u).norm_sqr();
                s -= lam * ov * mu.log2();
            }
        }
    }
    Ok(if s < T::zero() { T::zero() } else { s })
}

/// `(von Neumann entropy, linear entropy)` of a state, base-2 logs.
///
/// The linear entropy `1 - Tr rho^2` never exceeds the von Neumann entropy.
pub fn entropies<T: Real>(rho: &DensityMatrix<T>) -> (T, T) {
    let (vals, _) = eigh(rho.matrix());
    let mut vn = T::zero();
    let mut sq = T::zero();
    for v in vals {
        if v > T::zero() {
            vn -= v * v.log2();
            sq += v * v;
        }
    }
    if vn < T::zero() {
        vn = T::zero();
    }
    (vn, T::one() - sq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{tensor_assemble, MultipartiteSpace, ProductState, PureState};
    use approx::assert_relative_eq;
    use nalgebra::{dvector, DVector};

    type Cx = C<f64>;

    fn cx(re: f64, im: f64) -> Cx {
        Cx::new(re, im)
    }

    fn qubit_pair() -> MultipartiteSpace {
        MultipartiteSpace::qubits(2).unwrap()
    }

    fn bell() -> PureState<f64> {
        let h = 1.0 / 2f64.sqrt();
        PureState::new(
            qubit_pair(),
            dvector![cx(h, 0.0), cx(0.0, 0.0), cx(0.0, 0.0), cx(h, 0.0)],
        )
        .unwrap()
    }

    fn basis2(i: usize, j: usize) -> PureState<f64> {
        PureState::basis_state(qubit_pair(), &[i, j]).unwrap()
    }

    #[test]
    fn trace_distance_identity_and_orthogonal() {
        let rho = bell().projector();
        assert_relative_eq!(trace_distance(&rho, &rho).unwrap(), 0.0, epsilon = 1e-12);

        let single = MultipartiteSpace::new(vec![2]).unwrap();
        let zero = PureState::<f64>::basis_state(single.clone(), &[0]).unwrap().projector();
        let one = PureState::basis_state(single, &[1]).unwrap().projector();
        assert_relative_eq!(trace_distance(&zero, &one).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn trace_distance_pure_pair_identity() {
        // D_T(psi, phi) = sqrt(1 - |<psi|phi>|^2) for pure states
        let psi = bell();
        let phi = basis2(0, 0);
        let ov = psi.inner(&phi).norm_sqr();
        let dt = trace_distance(&psi.projector(), &phi.projector()).unwrap();
        assert_relative_eq!(dt, (1.0 - ov).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn fidelity_examples() {
        let rho = bell().projector();
        assert_relative_eq!(fidelity(&rho, &rho).unwrap(), 1.0, epsilon = 1e-9);

        let single = MultipartiteSpace::new(vec![2]).unwrap();
        let zero = PureState::<f64>::basis_state(single.clone(), &[0]).unwrap().projector();
        let mixed = DensityMatrix::<f64>::maximally_mixed(single);
        assert_relative_eq!(
            fidelity(&zero, &mixed).unwrap(),
            1.0 / 2f64.sqrt(),
            epsilon = 1e-10
        );

        // dephased Bell state: F = sqrt(<Bell|sigma|Bell>) = 1/sqrt(2)
        let sigma = DensityMatrix::mixture(&[
            (0.5, basis2(0, 0).projector()),
            (0.5, basis2(1, 1).projector()),
        ])
        .unwrap();
        assert_relative_eq!(
            fidelity(&rho, &sigma).unwrap(),
            1.0 / 2f64.sqrt(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn bures_examples() {
        let single = MultipartiteSpace::new(vec![2]).unwrap();
        let zero = PureState::<f64>::basis_state(single.clone(), &[0]).unwrap().projector();
        let one = PureState::basis_state(single.clone(), &[1]).unwrap().projector();
        assert_relative_eq!(bures_distance(&zero, &zero).unwrap(), 0.0, epsilon = 1e-9);
        assert_relative_eq!(
            bures_distance(&zero, &one).unwrap(),
            2f64.sqrt(),
            epsilon = 1e-10
        );
        let mixed = DensityMatrix::<f64>::maximally_mixed(single);
        assert_relative_eq!(
            bures_distance(&zero, &mixed).unwrap(),
            (2.0 - 2f64.sqrt()).sqrt(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn relative_entropy_examples() {
        let rho = bell().projector();
        assert_relative_eq!(relative_entropy(&rho, &rho).unwrap(), 0.0, epsilon = 1e-9);

        let single = MultipartiteSpace::new(vec![2]).unwrap();
        let zero = PureState::<f64>::basis_state(single.clone(), &[0]).unwrap().projector();
        let one = PureState::basis_state(single, &[1]).unwrap().projector();
        assert!(relative_entropy(&zero, &one).unwrap().is_infinite());

        let delta = DensityMatrix::mixture(&[
            (0.5, basis2(0, 0).projector()),
            (0.5, basis2(1, 1).projector()),
        ])
        .unwrap();
        assert_relative_eq!(relative_entropy(&rho, &delta).unwrap(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn entropies_examples() {
        let pure = bell().projector();
        let (vn, lin) = entropies(&pure);
        assert_relative_eq!(vn, 0.0, epsilon = 1e-9);
        assert_relative_eq!(lin, 0.0, epsilon = 1e-9);

        let single = MultipartiteSpace::new(vec![2]).unwrap();
        let mixed = DensityMatrix::<f64>::maximally_mixed(single.clone());
        let (vn, lin) = entropies(&mixed);
        assert_relative_eq!(vn, 1.0, epsilon = 1e-12);
        assert_relative_eq!(lin, 0.5, epsilon = 1e-12);

        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![cx(0.75, 0.0), cx(0.25, 0.0)]));
        let rho = DensityMatrix::new(single, m).unwrap();
        let (vn, lin) = entropies(&rho);
        let expect = -(0.75f64 * 0.75f64.log2() + 0.25 * 0.25f64.log2());
        assert_relative_eq!(vn, expect, epsilon = 1e-12);
        assert_relative_eq!(lin, 0.375, epsilon = 1e-12);
    }

    #[test]
    fn product_state_marginal_roundtrip() {
        // partial_trace . tensor_assemble returns the single factors
        let f0 = dvector![cx(0.6, 0.0), cx(0.0, 0.8)];
        let f1 = dvector![cx(0.8, 0.0), cx(0.6, 0.0)];
        let prod = ProductState::new(vec![f0.clone(), f1]).unwrap();
        let rho = tensor_assemble(&prod).unwrap().projector();
        let red = crate::space::partial_trace(&rho, &[0]).unwrap();
        let expect = &f0 * f0.adjoint();
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(
                    (red.matrix()[(i, j)] - expect[(i, j)]).norm(),
                    0.0,
                    epsilon = 1e-12
                );
            }
        }
    }
}
