//! Hermitian eigendecomposition with a fixed ordering contract, plus the
//! matrix functions built on it.

use nalgebra::{DMatrix, DVector};

use crate::scalar::{r, Real, C};

/// Eigenvalue threshold below which a spectral component counts as kernel.
pub const SUPPORT_TOL: f64 = 1e-10;

/// Hermitian eigendecomposition: eigenvalues ascending, eigenvector `k` in
/// column `k`. Ties keep the solver's deterministic order (stable sort).
pub fn eigh<T: Real>(m: &DMatrix<C<T>>) -> (Vec<T>, DMatrix<C<T>>) {
    let se = m.clone().symmetric_eigen();
    let n = se.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        se.eigenvalues[a]
            .partial_cmp(&se.eigenvalues[b])
            .expect("eigenvalues are finite")
    });
    let vals: Vec<T> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vecs = DMatrix::from_element(n, n, C::new(T::zero(), T::zero()));
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &se.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// Index of the largest eigenvalue in an ascending list, stepping over exact
/// ties to the first occurrence.
pub fn top_index<T: Real>(ascending: &[T]) -> usize {
    let top = *ascending.last().expect("nonempty spectrum");
    ascending
        .iter()
        .position(|&v| v == top)
        .expect("top eigenvalue present")
}

/// Clips a spectrum to `[0, 1]`, tolerating drift up to `tol` and leaving
/// larger violations in place so they surface in the caller's checks.
pub fn clip_unit_interval<T: Real>(vals: &mut [T], tol: T) {
    for v in vals.iter_mut() {
        if *v < T::zero() && *v > -tol {
            *v = T::zero();
        }
        if *v > T::one() && *v < T::one() + tol {
            *v = T::one();
        }
    }
}

/// Applies `f` to the spectrum of a Hermitian matrix.
pub fn hermitian_map<T: Real>(m: &DMatrix<C<T>>, f: impl Fn(T) -> T) -> DMatrix<C<T>> {
    let (mut vals, vecs) = eigh(m);
    clip_unit_interval(&mut vals, r(SUPPORT_TOL));
    let d = DVector::from_iterator(vals.len(), vals.iter().map(|&v| C::new(f(v), T::zero())));
    &vecs * DMatrix::from_diagonal(&d) * vecs.adjoint()
}

/// Hermitian square root of a positive semi-definite matrix.
pub fn hermitian_sqrt<T: Real>(m: &DMatrix<C<T>>) -> DMatrix<C<T>> {
    hermitian_map(m, |v| if v > T::zero() { v.sqrt() } else { T::zero() })
}

/// Cyclic complex Jacobi eigensolver for small Hermitian matrices; ascending
/// eigenvalues with eigenvectors in columns, like [`eigh`], but allocation
/// light for the optimizer hot paths.
pub(crate) fn eigh_jacobi<T: Real>(a: &DMatrix<C<T>>) -> (Vec<T>, DMatrix<C<T>>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            C::new(T::one(), T::zero())
        } else {
            C::new(T::zero(), T::zero())
        }
    });
    let scale = (0..n)
        .map(|i| m[(i, i)].re.abs())
        .fold(r::<T>(1e-300), |acc, x| acc.max(x));
    let eps = scale * r(1e-15);
    for _ in 0..30 {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                let beta = m[(p, q)];
                let mag = (beta.re * beta.re + beta.im * beta.im).sqrt();
                off = off.max(mag);
                if mag <= eps {
                    continue;
                }
                let phase = beta / C::new(mag, T::zero());
                let alpha = m[(p, p)].re;
                let gamma = m[(q, q)].re;
                let tau = (gamma - alpha) / (r::<T>(2.0) * mag);
                let t = if tau >= T::zero() {
                    T::one() / (tau + (T::one() + tau * tau).sqrt())
                } else {
                    -T::one() / (-tau + (T::one() + tau * tau).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                let cs = C::new(c, T::zero());
                let sp = C::new(s, T::zero()) * phase;
                // columns p, q of M and of the accumulated basis
                for i in 0..n {
                    let mp = m[(i, p)];
                    let mq = m[(i, q)];
                    m[(i, p)] = cs * mp + sp.conj() * mq;
                    m[(i, q)] = -sp * mp + cs * mq;
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = cs * vp + sp.conj() * vq;
                    v[(i, q)] = -sp * vp + cs * vq;
                }
                // rows p, q of M
                for i in 0..n {
                    let mp = m[(p, i)];
                    let mq = m[(q, i)];
                    m[(p, i)] = cs * mp + sp * mq;
                    m[(q, i)] = -sp.conj() * mp + cs * mq;
                }
            }
        }
        if off <= eps {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[(x, x)].re.partial_cmp(&m[(y, y)].re).expect("finite"));
    let vals: Vec<T> = order.iter().map(|&i| m[(i, i)].re).collect();
    let mut vecs = DMatrix::from_element(n, n, C::new(T::zero(), T::zero()));
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &v.column(src));
    }
    (vals, vecs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eigh_orders_ascending() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                C::new(2.0f64, 0.0),
                C::new(0.0, -1.0),
                C::new(0.0, 1.0),
                C::new(2.0, 0.0),
            ],
        );
        let (vals, vecs) = eigh(&m);
        assert_relative_eq!(vals[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(vals[1], 3.0, epsilon = 1e-12);
        // reconstruct
        let d = DVector::from_iterator(2, vals.iter().map(|&v| C::new(v, 0.0)));
        let rec = &vecs * DMatrix::from_diagonal(&d) * vecs.adjoint();
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!((rec[(i, j)] - m[(i, j)]).norm(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn jacobi_matches_reference_eigh() {
        use crate::optimize::random_density_matrix;
        use crate::space::MultipartiteSpace;
        for seed in 0..6u64 {
            let space = MultipartiteSpace::new(vec![2, 3]).unwrap();
            let rho = random_density_matrix::<f64>(&space, 6, 900 + seed);
            let (va, ua) = eigh(rho.matrix());
            let (vb, ub) = eigh_jacobi(rho.matrix());
            for (x, y) in va.iter().zip(&vb) {
                assert_relative_eq!(x, y, epsilon = 1e-12);
            }
            // both reconstruct the input
            for (vals, vecs) in [(&va, &ua), (&vb, &ub)] {
                let d = DVector::from_iterator(6, vals.iter().map(|&v| C::new(v, 0.0)));
                let rec = vecs.clone() * DMatrix::from_diagonal(&d) * vecs.adjoint();
                for i in 0..6 {
                    for j in 0..6 {
                        assert_relative_eq!(
                            (rec[(i, j)] - rho.matrix()[(i, j)]).norm(),
                            0.0,
                            epsilon = 1e-12
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn sqrt_squares_back() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                C::new(0.5f64, 0.0),
                C::new(0.25, 0.0),
                C::new(0.25, 0.0),
                C::new(0.5, 0.0),
            ],
        );
        let s = hermitian_sqrt(&m);
        let sq = &s * &s;
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!((sq[(i, j)] - m[(i, j)]).norm(), 0.0, epsilon = 1e-12);
            }
        }
    }
}
