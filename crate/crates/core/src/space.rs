//! Multipartite state carriers: joint spaces, pure states, density matrices
//! and fully product states.
//!
//! Parties are indexed `0..n`; the computational basis of the joint space is
//! ordered big-endian in the party index, i.e. the joint basis label is
//! `i_0 * d_1 * ... * d_{n-1} + i_1 * d_2 * ... + ... + i_{n-1}`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{cabs, r, Real, C};

/// Largest supported joint dimension. Everything here is dense.
pub const MAX_TOTAL_DIM: usize = 4096;

/// Tolerance for state validation (norms, Hermiticity, trace).
pub const VALIDATE_TOL: f64 = 1e-12;

/// Tolerance against eigenvalue drift below zero in density matrices.
pub const PSD_TOL: f64 = 1e-10;

/// An ordered list of local dimensions `d_0..d_{n-1}`, each at least 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultipartiteSpace {
    dims: Vec<usize>,
    total: usize,
}

impl MultipartiteSpace {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidParameter("need at least one party".into()));
        }
        if let Some(&d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::InvalidParameter(format!(
                "local dimension {d} < 2"
            )));
        }
        let mut total: usize = 1;
        for &d in &dims {
            total = total
                .checked_mul(d)
                .ok_or(Error::DimensionBudget(usize::MAX, MAX_TOTAL_DIM))?;
            if total > MAX_TOTAL_DIM {
                return Err(Error::DimensionBudget(total, MAX_TOTAL_DIM));
            }
        }
        Ok(Self { dims, total })
    }

    /// `n` qubits.
    pub fn qubits(n: usize) -> Result<Self> {
        Self::new(vec![2; n])
    }

    /// Two parties of equal dimension `d`.
    pub fn bipartite(d: usize) -> Result<Self> {
        Self::new(vec![d, d])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total_dim(&self) -> usize {
        self.total
    }

    pub fn parties(&self) -> usize {
        self.dims.len()
    }

    /// Joint index of a multi-index (big-endian party order).
    pub fn ravel(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        let mut flat = 0;
        for (i, &d) in idx.iter().zip(&self.dims) {
            flat = flat * d + i;
        }
        flat
    }

    /// Multi-index of a joint index.
    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dims.len()];
        for (slot, &d) in idx.iter_mut().zip(&self.dims).rev() {
            *slot = flat % d;
            flat /= d;
        }
        idx
    }
}

/// A normalized pure state on a multipartite space.
#[derive(Debug, Clone)]
pub struct PureState<T: Real> {
    space: MultipartiteSpace,
    amplitudes: DVector<C<T>>,
}

impl<T: Real> PureState<T> {
    pub fn new(space: MultipartiteSpace, amplitudes: DVector<C<T>>) -> Result<Self> {
        if amplitudes.len() != space.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "amplitude vector of length {} on a space of dimension {}",
                amplitudes.len(),
                space.total_dim()
            )));
        }
        let norm = amplitudes.norm();
        if (norm - T::one()).abs() > r(VALIDATE_TOL) {
            return Err(Error::InvalidState(format!(
                "pure state norm deviates from 1 by {:e}",
                (norm - T::one()).abs()
            )));
        }
        Ok(Self { space, amplitudes })
    }

    /// Normalizes the amplitudes before constructing; rejects (near-)zero
    /// vectors.
    pub fn normalized(space: MultipartiteSpace, amplitudes: DVector<C<T>>) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm < r(1e-300) {
            return Err(Error::InvalidState("zero amplitude vector".into()));
        }
        Self::new(space, amplitudes.map(|a| a / C::new(norm, T::zero())))
    }

    /// Computational basis state `|i_0 i_1 ... i_{n-1}>`.
    pub fn basis_state(space: MultipartiteSpace, idx: &[usize]) -> Result<Self> {
        if idx.len() != space.parties() || idx.iter().zip(space.dims()).any(|(&i, &d)| i >= d) {
            return Err(Error::InvalidParameter("basis index out of range".into()));
        }
        let flat = space.ravel(idx);
        let mut amps = DVector::from_element(space.total_dim(), C::new(T::zero(), T::zero()));
        amps[flat] = C::new(T::one(), T::zero());
        Self::new(space, amps)
    }

    pub fn space(&self) -> &MultipartiteSpace {
        &self.space
    }

    pub fn amplitudes(&self) -> &DVector<C<T>> {
        &self.amplitudes
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState<T>) -> C<T> {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// Projector `|psi><psi|` as a density matrix.
    pub fn projector(&self) -> DensityMatrix<T> {
        let m = &self.amplitudes * self.amplitudes.adjoint();
        DensityMatrix {
            space: self.space.clone(),
            matrix: m,
        }
    }
}

/// A valid density matrix: Hermitian, unit trace, positive semi-definite
/// (up to [`PSD_TOL`] eigenvalue drift).
#[derive(Debug, Clone)]
pub struct DensityMatrix<T: Real> {
    space: MultipartiteSpace,
    matrix: DMatrix<C<T>>,
}

impl<T: Real> DensityMatrix<T> {
    pub fn new(space: MultipartiteSpace, matrix: DMatrix<C<T>>) -> Result<Self> {
        let n = space.total_dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix on a space of dimension {}",
                matrix.nrows(),
                matrix.ncols(),
                n
            )));
        }
        let tol = r::<T>(VALIDATE_TOL);
        let mut herm_dev = T::zero();
        for i in 0..n {
            for j in i..n {
                let dev = cabs(matrix[(i, j)] - matrix[(j, i)].conj());
                if dev > herm_dev {
                    herm_dev = dev;
                }
            }
        }
        if herm_dev > tol {
            return Err(Error::InvalidState(format!(
                "not Hermitian: max deviation {herm_dev:e}"
            )));
        }
        let tr = matrix.trace();
        if (tr.re - T::one()).abs() > tol || tr.im.abs() > tol {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        let min_ev = matrix
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(T::infinity(), |a, b| if b < a { b } else { a });
        if min_ev < -r::<T>(PSD_TOL) {
            return Err(Error::InvalidState(format!(
                "not positive semi-definite: min eigenvalue {min_ev:e}"
            )));
        }
        Ok(Self { space, matrix })
    }

    /// Builds the matrix without re-validating; for internal constructions
    /// that are valid by design (projectors, mixtures of valid states).
    pub(crate) fn trusted(space: MultipartiteSpace, matrix: DMatrix<C<T>>) -> Self {
        Self { space, matrix }
    }

    /// Maximally mixed state `1/dim`.
    pub fn maximally_mixed(space: MultipartiteSpace) -> Self {
        let n = space.total_dim();
        let m = DMatrix::from_diagonal_element(
            n,
            n,
            C::new(T::one() / r::<T>(n as f64), T::zero()),
        );
        Self { space, matrix: m }
    }

    /// Probability mixture of valid states on a common space.
    pub fn mixture(parts: &[(T, DensityMatrix<T>)]) -> Result<Self> {
        let (_, first) = parts
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty mixture".into()))?;
        let space = first.space.clone();
        let n = space.total_dim();
        let mut m = DMatrix::from_element(n, n, C::new(T::zero(), T::zero()));
        let mut total = T::zero();
        for (p, rho) in parts {
            if rho.space != space {
                return Err(Error::DimensionMismatch("mixture of unequal spaces".into()));
            }
            if *p < T::zero() {
                return Err(Error::InvalidParameter("negative mixture weight".into()));
            }
            m += rho.matrix.scale(*p);
            total += *p;
        }
        if (total - T::one()).abs() > r(VALIDATE_TOL) {
            return Err(Error::InvalidParameter(format!(
                "mixture weights sum to {total}"
            )));
        }
        Ok(Self { space, matrix: m })
    }

    pub fn space(&self) -> &MultipartiteSpace {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<C<T>> {
        &self.matrix
    }

    /// `Tr(rho^2)`, the purity.
    pub fn purity(&self) -> T {
        let mut s = T::zero();
        for i in 0..self.matrix.nrows() {
            for j in 0..self.matrix.ncols() {
                s += self.matrix[(i, j)].norm_sqr();
            }
        }
        s
    }

    /// `<psi|rho|psi>` (real part; the form is Hermitian).
    pub fn expectation(&self, psi: &PureState<T>) -> T {
        let v = &self.matrix * psi.amplitudes();
        psi.amplitudes().dotc(&v).re
    }
}

/// One unit vector per party; the certificate object for product-state
/// overlap maximizations.
#[derive(Debug, Clone)]
pub struct ProductState<T: Real> {
    factors: Vec<DVector<C<T>>>,
}

impl<T: Real> ProductState<T> {
    pub fn new(factors: Vec<DVector<C<T>>>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidParameter("no factors".into()));
        }
        for f in &factors {
            if (f.norm() - T::one()).abs() > r(VALIDATE_TOL) {
                return Err(Error::InvalidState(format!(
                    "factor norm deviates from 1 by {:e}",
                    (f.norm() - T::one()).abs()
                )));
            }
        }
        Ok(Self { factors })
    }

    /// Normalizes each factor before constructing.
    pub fn normalized(factors: Vec<DVector<C<T>>>) -> Result<Self> {
        let mut out = Vec::with_capacity(factors.len());
        for f in factors {
            let n = f.norm();
            if n < r(1e-300) {
                return Err(Error::InvalidState("zero factor".into()));
            }
            out.push(f.map(|a| a / C::new(n, T::zero())));
        }
        Self::new(out)
    }

    pub fn factors(&self) -> &[DVector<C<T>>] {
        &self.factors
    }

    pub fn space(&self) -> Result<MultipartiteSpace> {
        MultipartiteSpace::new(self.factors.iter().map(|f| f.len()).collect())
    }
}

/// Kronecker product of the factors in party order.
pub fn tensor_assemble<T: Real>(factors: &ProductState<T>) -> Result<PureState<T>> {
    let space = factors.space()?;
    let mut amps = DVector::from_element(1, C::new(T::one(), T::zero()));
    for f in factors.factors() {
        amps = amps.kronecker(f);
    }
    PureState::new(space, amps)
}

/// Same as [`tensor_assemble`] but checks the result lives on `space`.
pub fn tensor_assemble_on<T: Real>(
    factors: &ProductState<T>,
    space: &MultipartiteSpace,
) -> Result<PureState<T>> {
    let st = tensor_assemble(factors)?;
    if st.space() != space {
        return Err(Error::DimensionMismatch(
        "product factors do not match the declared space".into(),
        ));
    }
    Ok(st)
}

/// `<prod|psi>` without materializing the Kronecker product.
pub fn product_overlap<T: Real>(prod: &ProductState<T>, psi: &PureState<T>) -> C<T> {
    let dims = psi.space().dims();
    debug_assert_eq!(dims.len(), prod.factors().len());
    // contract parties one at a time, back to front
    let mut cur: Vec<C<T>> = psi.amplitudes().iter().copied().collect();
    for (k, f) in prod.factors().iter().enumerate().rev() {
        let d = dims[k];
        let blocks = cur.len() / d;
        let mut next = vec![C::new(T::zero(), T::zero()); blocks];
        for (b, slot) in next.iter_mut().enumerate() {
            let mut acc = C::new(T::zero(), T::zero());
            for i in 0..d {
                acc += f[i].conj() * cur[b * d + i];
            }
            *slot = acc;
        }
        cur = next;
    }
    cur[0]
}

/// Traces out all parties not in `kept`; `kept` must be nonempty.
pub fn partial_trace<T: Real>(
    rho: &DensityMatrix<T>,
    kept: &[usize],
) -> Result<DensityMatrix<T>> {
    let space = rho.space();
    let n = space.parties();
    let mut kept: Vec<usize> = kept.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if kept.is_empty() {
        return Err(Error::EmptyKeptSet);
    }
    if kept.iter().any(|&k| k >= n) {
        return Err(Error::InvalidParameter("kept party out of range".into()));
    }
    let traced: Vec<usize> = (0..n).filter(|p| !kept.contains(p)).collect();
    if traced.is_empty() {
        return Ok(rho.clone());
    }
    let kept_dims: Vec<usize> = kept.iter().map(|&p| space.dims()[p]).collect();
    let out_space = MultipartiteSpace::new(kept_dims)?;
    let dk = out_space.total_dim();
    let dt: usize = traced.iter().map(|&p| space.dims()[p]).product();

    // joint index assembled from a kept multi-index and a traced multi-index
    let assemble = |ki: &[usize], ti: &[usize]| -> usize {
        let mut idx = vec![0usize; n];
        for (slot, &p) in kept.iter().enumerate() {
            idx[p] = ki[slot];
        }
        for (slot, &p) in traced.iter().enumerate() {
            idx[p] = ti[slot];
        }
        space.ravel(&idx)
    };
    let traced_dims: Vec<usize> = traced.iter().map(|&p| space.dims()[p]).collect();
    let unravel_in = |mut flat: usize, dims: &[usize]| -> Vec<usize> {
        let mut idx = vec![0; dims.len()];
        for (slot, &d) in idx.iter_mut().zip(dims).rev() {
            *slot = flat % d;
            flat /= d;
        }
        idx
    };

    let mut out = DMatrix::from_element(dk, dk, C::new(T::zero(), T::zero()));
    for a in 0..dk {
        let ia = unravel_in(a, out_space.dims());
        for b in 0..dk {
            let ib = unravel_in(b, out_space.dims());
            let mut acc = C::new(T::zero(), T::zero());
            for t in 0..dt {
                let it = unravel_in(t, &traced_dims);
                acc += rho.matrix()[(assemble(&ia, &it), assemble(&ib, &it))];
            }
            out[(a, b)] = acc;
        }
    }
    Ok(DensityMatrix::trusted(out_space, out))
}

/// Tensor product of two states "on the same Hilbert space": party `j` of the
/// result carries dimension `d_j(rho) * d_j(sigma)`, i.e. the Kronecker
/// product with indices regrouped so both factors of a party are adjacent.
pub fn same_space_tensor<T: Real>(
    rho: &DensityMatrix<T>,
    sigma: &DensityMatrix<T>,
) -> Result<DensityMatrix<T>> {
    let (sa, sb) = (rho.space(), sigma.space());
    if sa.parties() != sb.parties() {
        return Err(Error::DimensionMismatch(format!(
            "party counts differ: {} vs {}",
            sa.parties(),
            sb.parties()
        )));
    }
    let dims: Vec<usize> = sa
        .dims()
        .iter()
        .zip(sb.dims())
        .map(|(&a, &b)| a * b)
        .collect();
    let out_space = MultipartiteSpace::new(dims)?;
    let dim = out_space.total_dim();
    let combine = |ia: &[usize], ib: &[usize]| -> usize {
        let idx: Vec<usize> = ia
            .iter()
            .zip(ib)
            .zip(sb.dims())
            .map(|((&x, &y), &db)| x * db + y)
            .collect();
        out_space.ravel(&idx)
    };
    let mut out = DMatrix::from_element(dim, dim, C::new(T::zero(), T::zero()));
    for ra in 0..sa.total_dim() {
        let ira = sa.unravel(ra);
        for ca in 0..sa.total_dim() {
            let ica = sa.unravel(ca);
            let va = rho.matrix()[(ra, ca)];
            if va.norm_sqr() == T::zero() {
                continue;
            }
            for rb in 0..sb.total_dim() {
                let irb = sb.unravel(rb);
                for cb in 0..sb.total_dim() {
                    let icb = sb.unravel(cb);
                    out[(combine(&ira, &irb), combine(&ica, &icb))] =
                        va * sigma.matrix()[(rb, cb)];
                }
            }
        }
    }
    Ok(DensityMatrix::trusted(out_space, out))
}

/// Pure-state version of [`same_space_tensor`].
pub fn same_space_tensor_pure<T: Real>(
    psi: &PureState<T>,
    phi: &PureState<T>,
) -> Result<PureState<T>> {
    let (sa, sb) = (psi.space(), phi.space());
    if sa.parties() != sb.parties() {
        return Err(Error::DimensionMismatch(format!(
            "party counts differ: {} vs {}",
            sa.parties(),
            sb.parties()
        )));
    }
    let dims: Vec<usize> = sa
        .dims()
        .iter()
        .zip(sb.dims())
        .map(|(&a, &b)| a * b)
        .collect();
    let out_space = MultipartiteSpace::new(dims)?;
    let mut amps = DVector::from_element(out_space.total_dim(), C::new(T::zero(), T::zero()));
    for a in 0..sa.total_dim() {
        let ia = sa.unravel(a);
        for b in 0..sb.total_dim() {
            let ib = sb.unravel(b);
            let idx: Vec<usize> = ia
                .iter()
                .zip(&ib)
                .zip(sb.dims())
                .map(|((&x, &y), &db)| x * db + y)
                .collect();
            amps[out_space.ravel(&idx)] = psi.amplitudes()[a] * phi.amplitudes()[b];
        }
    }
    PureState::new(out_space, amps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    type Cx = C<f64>;

    fn cx(re: f64, im: f64) -> Cx {
        Cx::new(re, im)
    }

    #[test]
    fn ravel_roundtrip() {
        let s = MultipartiteSpace::new(vec![2, 3, 2]).unwrap();
        for flat in 0..s.total_dim() {
            assert_eq!(s.ravel(&s.unravel(flat)), flat);
        }
    }

    #[test]
    fn assemble_basis_products() {
        let zero = dvector![cx(1.0, 0.0), cx(0.0, 0.0)];
        let one = dvector![cx(0.0, 0.0), cx(1.0, 0.0)];
        let p00 = ProductState::new(vec![zero.clone(), zero.clone()]).unwrap();
        let psi = tensor_assemble(&p00).unwrap();
        assert_relative_eq!(psi.amplitudes()[0].re, 1.0);

        let p01 = ProductState::new(vec![zero, one]).unwrap();
        let psi = tensor_assemble(&p01).unwrap();
        assert_relative_eq!(psi.amplitudes()[1].re, 1.0);

        let h = 1.0 / 2f64.sqrt();
        let plus = dvector![cx(h, 0.0), cx(h, 0.0)];
        let pp = ProductState::new(vec![plus.clone(), plus]).unwrap();
        let psi = tensor_assemble(&pp).unwrap();
        for i in 0..4 {
            assert_relative_eq!(psi.amplitudes()[i].re, 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn product_overlap_matches_assembled() {
        let h = 1.0 / 2f64.sqrt();
        let plus = dvector![cx(h, 0.0), cx(0.0, h)];
        let minus = dvector![cx(h, 0.0), cx(-h, 0.0)];
        let prod = ProductState::new(vec![plus, minus]).unwrap();
        let space = MultipartiteSpace::qubits(2).unwrap();
        let bell = PureState::new(
            space,
            dvector![cx(h, 0.0), cx(0.0, 0.0), cx(0.0, 0.0), cx(h, 0.0)],
        )
        .unwrap();
        let via_assemble = tensor_assemble(&prod).unwrap().inner(&bell);
        let direct = product_overlap(&prod, &bell);
        assert_relative_eq!(via_assemble.re, direct.re, epsilon = 1e-14);
        assert_relative_eq!(via_assemble.im, direct.im, epsilon = 1e-14);
    }

    #[test]
    fn partial_trace_bell_is_maximally_mixed() {
        let h = 1.0 / 2f64.sqrt();
        let space = MultipartiteSpace::qubits(2).unwrap();
        let bell = PureState::new(
            space,
            dvector![cx(h, 0.0), cx(0.0, 0.0), cx(0.0, 0.0), cx(h, 0.0)],
        )
        .unwrap();
        let red = partial_trace(&bell.projector(), &[0]).unwrap();
        assert_relative_eq!(red.matrix()[(0, 0)].re, 0.5, epsilon = 1e-14);
        assert_relative_eq!(red.matrix()[(1, 1)].re, 0.5, epsilon = 1e-14);
        assert_relative_eq!(red.matrix()[(0, 1)].norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn partial_trace_of_product_projector() {
        let zero = dvector![cx(1.0, 0.0), cx(0.0, 0.0)];
        let p = ProductState::new(vec![zero.clone(), zero]).unwrap();
        let rho = tensor_assemble(&p).unwrap().projector();
        let red = partial_trace(&rho, &[0]).unwrap();
        assert_relative_eq!(red.matrix()[(0, 0)].re, 1.0, epsilon = 1e-14);
        assert_relative_eq!(red.matrix()[(1, 1)].re, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn partial_trace_requires_kept_parties() {
        let space = MultipartiteSpace::qubits(2).unwrap();
        let rho = DensityMatrix::<f64>::maximally_mixed(space);
        assert!(matches!(partial_trace(&rho, &[]), Err(Error::EmptyKeptSet)));
    }

    #[test]
    fn dimension_budget_enforced() {
        assert!(MultipartiteSpace::new(vec![2; 13]).is_err());
        assert!(MultipartiteSpace::qubits(12).is_ok());
    }

    #[test]
    fn same_space_tensor_regroups_parties() {
        // |0><0| (x) |1><1| per party: party j of the result is 4-dimensional
        let zero = dvector![cx(1.0, 0.0), cx(0.0, 0.0)];
        let one = dvector![cx(0.0, 0.0), cx(1.0, 0.0)];
        let a = tensor_assemble(&ProductState::new(vec![zero.clone(), zero]).unwrap())
            .unwrap()
            .projector();
        let b = tensor_assemble(&ProductState::new(vec![one.clone(), one]).unwrap())
            .unwrap()
            .projector();
        let t = same_space_tensor(&a, &b).unwrap();
        assert_eq!(t.space().dims(), &[4, 4]);
        // party index 0*2+1 = 1 on both parties -> joint index 1*4+1 = 5
        assert_relative_eq!(t.matrix()[(5, 5)].re, 1.0, epsilon = 1e-14);
        assert_relative_eq!(t.matrix().trace().re, 1.0, epsilon = 1e-14);
    }
}
