//! Mixed-state extensions built directly on product states: the trace
//! inner-product maximization, the trace-distance minimization, and a
//! certified two-sided bracket for the squared trace entanglement.
//!
//! One-sided error discipline: maximizer results are certified lower bounds
//! (the achieving product state is returned and re-evaluated), minimizer
//! results are certified upper bounds.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::eigh;
use crate::optimize::{
    alt_max_mixed, canonicalize_factors, random_product, restart_rng, OptimizerOptions,
};
use crate::pure::{clamp_prob, lambda2_pure};
use crate::scalar::{r, Real, C};
use crate::space::{
    partial_trace, tensor_assemble, DensityMatrix, ProductState, PureState,
};

/// Result of maximizing `<phi|rho|phi>` over product states.
#[derive(Debug, Clone)]
pub struct Lambda2mResult<T: Real> {
    /// Best value found; recomputed from `cps`, hence a certified lower bound.
    pub lambda2m: T,
    pub cps: ProductState<T>,
    pub converged: bool,
}

/// `max <phi|rho|phi>` over fully product pure states, by multistart
/// alternating per-party eigen-updates.
pub fn lambda2_mixed<T: Real>(
    rho: &DensityMatrix<T>,
    opts: &OptimizerOptions,
) -> Result<Lambda2mResult<T>> {
    if rho.space().parties() < 2 {
        return Err(Error::InvalidParameter(
            "product overlap needs at least two parties".into(),
        ));
    }
    let dims = rho.space().dims().to_vec();
    let restarts = opts.restarts.max(1);
    let runs: Vec<(T, Vec<DVector<C<T>>>, bool)> = (0..restarts)
        .into_par_iter()
        .map(|i| {
            let mut rng = restart_rng(opts.seed, u64::from(i));
            let start = random_product(&mut rng, &dims);
            let (val, factors, conv, _) = alt_max_mixed(rho, start, opts);
            (val, factors, conv)
        })
        .collect();
    let mut best = 0;
    for i in 1..runs.len() {
        if runs[i].0 > runs[best].0 {
            best = i;
        }
    }
    let (_, mut factors, converged) = runs.into_iter().nth(best).expect("nonempty");
    canonicalize_factors(&mut factors);
    let cps = ProductState::normalized(factors)?;
    let psi = tensor_assemble(&cps)?;
    let lambda2m = clamp_prob(rho.expectation(&psi));
    Ok(Lambda2mResult {
        lambda2m,
        cps,
        converged,
    })
}

/// `(1 - lambda2м, -log2 lambda2m)`: the trace inner-product extension of the
/// linear and logarithmic geometric measure.
pub fn gm_mixed<T: Real>(rho: &DensityMatrix<T>, opts: &OptimizerOptions) -> Result<(T, T)> {
    let res = lambda2_mixed(rho, opts)?;
    Ok(crate::pure::gm_from_lambda2(res.lambda2m))
}

/// Result of minimizing the squared trace distance to product states.
#[derive(Debug, Clone)]
pub struct GtResult<T: Real> {
    /// Minimal `D_T(rho, |phi><phi|)^2` found; a certified upper bound.
    pub value: T,
    pub cps: ProductState<T>,
    pub converged: bool,
}

fn gt_objective<T: Real>(rho: &DensityMatrix<T>, factors: &[DVector<C<T>>]) -> T {
    let prod = ProductState::normalized(factors.to_vec()).expect("unit factors");
    let phi = tensor_assemble(&prod).expect("consistent dims");
    let diff = rho.matrix() - phi.projector().matrix();
    let d = crate::distance::trace_norm_halved(&diff);
    d * d
}

/// Gradient-free coordinate descent on the product-factor entries, one
/// restart. The objective is non-smooth through eigenvalue crossings, so
/// steps halve on stalled sweeps until the floor 1e-7.
fn gt_descent<T: Real>(
    rho: &DensityMatrix<T>,
    mut factors: Vec<DVector<C<T>>>,
    max_sweeps: u32,
) -> (T, Vec<DVector<C<T>>>, bool) {
    let mut best = gt_objective(rho, &factors);
    let mut step = r::<T>(0.25);
    let floor = r::<T>(1e-7);
    let mut sweeps = 0;
    while step > floor && sweeps < max_sweeps {
        sweeps += 1;
        let mut improved = false;
        for j in 0..factors.len() {
            for i in 0..factors[j].len() {
                for comp in 0..2 {
                    for sign in [T::one(), -T::one()] {
                        let mut trial = factors.clone();
                        let delta = step * sign;
                        let z = trial[j][i];
                        trial[j][i] = if comp == 0 {
                            C::new(z.re + delta, z.im)
                        } else {
                            C::new(z.re, z.im + delta)
                        };
                        let n = trial[j].norm();
                        if n < r(1e-8) {
                            continue;
                        }
                        trial[j] = trial[j].map(|a| a / C::new(n, T::zero()));
                        let val = gt_objective(rho, &trial);
                        if val < best - r(1e-15) {
                            best = val;
                            factors = trial;
                            improved = true;
                            break;
                        }
                    }
                }
            }
        }
        if !improved {
            step /= r(2.0);
        }
    }
    (best, factors, step <= floor)
}

/// `min D_T^2(rho, |phi><phi|)` over product states: the trace extension of
/// the linear geometric measure.
///
/// Runs twice the configured restart count (64 with stock options); the
/// first start is the trace inner-product certificate, which also pins the
/// result below `1 - lambda2m`.
pub fn gt<T: Real>(rho: &DensityMatrix<T>, opts: &OptimizerOptions) -> Result<GtResult<T>> {
    let m = lambda2_mixed(rho, opts)?;
    gt_seeded(rho, &m.cps, opts)
}

/// Same as [`gt`] with the first start supplied by the caller.
pub fn gt_seeded<T: Real>(
    rho: &DensityMatrix<T>,
    seed_state: &ProductState<T>,
    opts: &OptimizerOptions,
) -> Result<GtResult<T>> {
    if rho.space().parties() < 2 {
        return Err(Error::InvalidParameter(
            "product minimization needs at least two parties".into(),
        ));
    }
    let dims = rho.space().dims().to_vec();
    let restarts = (opts.restarts.max(1)) * 2;
    let sweep_cap = opts.max_sweeps.min(400);
    let runs: Vec<(T, Vec<DVector<C<T>>>, bool)> = (0..restarts)
        .into_par_iter()
        .map(|i| {
            let start = if i == 0 {
                seed_state.factors().to_vec()
            } else {
                let mut rng = restart_rng(opts.seed ^ 0xD15C0, u64::from(i));
                random_product(&mut rng, &dims)
            };
            let (val, factors, conv) = gt_descent(rho, start, sweep_cap);
            (val, factors, conv)
        })
        .collect();
    let mut best = 0;
    for i in 1..runs.len() {
        if runs[i].0 < runs[best].0 {
            best = i;
        }
    }
    let (_, mut factors, converged) = runs.into_iter().nth(best).expect("nonempty");
    canonicalize_factors(&mut factors);
    let cps = ProductState::normalized(factors)?;
    let value = gt_objective(rho, cps.factors());
    Ok(GtResult {
        value,
        cps,
        converged,
    })
}

/// Two-sided bracket for the squared trace entanglement
/// `min over separable sigma of D_T^2(rho, sigma)`.
#[derive(Debug, Clone)]
pub struct TraceEntBracket<T: Real> {
    pub lower: T,
    pub upper: T,
    /// Separable candidate achieving `upper`.
    pub witness_upper: DensityMatrix<T>,
    /// Which candidate family produced the witness.
    pub witness_kind: String,
}

/// Dephases `rho` in a product basis, one orthonormal basis per party.
/// The result is a mixture of product projectors, hence separable.
fn product_dephase<T: Real>(
    rho: &DensityMatrix<T>,
    bases: &[nalgebra::DMatrix<C<T>>],
) -> DensityMatrix<T> {
    let space = rho.space().clone();
    let dim = space.total_dim();
    let mut out = nalgebra::DMatrix::from_element(dim, dim, C::new(T::zero(), T::zero()));
    for flat in 0..dim {
        let idx = space.unravel(flat);
        let factors: Vec<DVector<C<T>>> = idx
            .iter()
            .zip(bases)
            .map(|(&i, b)| b.column(i).into_owned())
            .collect();
        let prod = ProductState::normalized(factors).expect("orthonormal basis columns");
        let psi = tensor_assemble(&prod).expect("consistent dims");
        let p = rho.expectation(&psi);
        if p > T::zero() {
            out += psi.projector().matrix().scale(p);
        }
    }
    DensityMatrix::trusted(space, out)
}

/// Computational-basis product dephasing (the diagonal of `rho`).
fn computational_dephase<T: Real>(rho: &DensityMatrix<T>) -> DensityMatrix<T> {
    let dim = rho.space().total_dim();
    let mut m = nalgebra::DMatrix::from_element(dim, dim, C::new(T::zero(), T::zero()));
    for i in 0..dim {
        m[(i, i)] = C::new(rho.matrix()[(i, i)].re, T::zero());
    }
    DensityMatrix::trusted(rho.space().clone(), m)
}

/// Is this pure state fully product? Checks every single-party marginal for
/// purity and, when they are all pure, certifies with the explicit product
/// of marginal eigenvectors.
pub(crate) fn product_certificate<T: Real>(psi: &PureState<T>) -> Option<ProductState<T>> {
    let n = psi.space().parties();
    let rho = psi.projector();
    let mut factors = Vec::with_capacity(n);
    for j in 0..n {
        let red = partial_trace(&rho, &[j]).ok()?;
        let (vals, vecs) = eigh(red.matrix());
        let top = vals.len() - 1;
        if vals[top] < T::one() - r(1e-10) {
            return None;
        }
        factors.push(vecs.column(top).into_owned());
    }
    let prod = ProductState::normalized(factors).ok()?;
    if crate::space::product_overlap(&prod, psi).norm_sqr() >= T::one() - r(1e-9) {
        Some(prod)
    } else {
        None
    }
}

/// Measurement branches of a pure state: project the parties in `subset`
/// onto every computational outcome. Returns `(probability, branch)` pairs.
fn measurement_branches<T: Real>(
    psi: &PureState<T>,
    subset: &[usize],
) -> Vec<(T, PureState<T>)> {
    let space = psi.space();
    let dim = space.total_dim();
    let sub_dims: Vec<usize> = subset.iter().map(|&p| space.dims()[p]).collect();
    let outcomes: usize = sub_dims.iter().product();
    let mut branches = Vec::new();
    for z in 0..outcomes {
        // decode outcome into per-party values
        let mut zz = z;
        let mut vals = vec![0usize; subset.len()];
        for (slot, &d) in vals.iter_mut().zip(&sub_dims).rev() {
            *slot = zz % d;
            zz /= d;
        }
        let mut amps = DVector::from_element(dim, C::new(T::zero(), T::zero()));
        let mut norm2 = T::zero();
        for flat in 0..dim {
            let idx = space.unravel(flat);
            if subset.iter().zip(&vals).all(|(&p, &v)| idx[p] == v) {
                amps[flat] = psi.amplitudes()[flat];
                norm2 += amps[flat].norm_sqr();
            }
        }
        if norm2 > r(1e-12) {
            let n = norm2.sqrt();
            let branch =
                PureState::new(space.clone(), amps.map(|a| a / C::new(n, T::zero())))
                    .expect("normalized");
            branches.push((norm2, branch));
        }
    }
    branches
}

/// Certified bracket for the squared trace entanglement.
///
/// The upper end is the best squared trace distance to an explicit separable
/// candidate (product-CPS mixtures from the convex roof, product-basis
/// dephasings, optimized product states, and for pure inputs every
/// measurement dephasing whose branches certify as product). The lower end
/// is `(1 - lambda2)^2` for pure inputs and 0 otherwise.
pub fn trace_ent_bracket<T: Real>(
    rho: &DensityMatrix<T>,
    opts: &OptimizerOptions,
) -> Result<TraceEntBracket<T>> {
    let gt_res = gt(rho, opts)?;
    let roof = crate::roof::convex_roof(rho, crate::roof::RoofKind::Linear, &opts.light(4))?;
    trace_ent_bracket_prepared(rho, opts, &gt_res, &roof)
}

/// Bracket construction reusing already-computed optimizer results.
pub fn trace_ent_bracket_prepared<T: Real>(
    rho: &DensityMatrix<T>,
    opts: &OptimizerOptions,
    gt_res: &GtResult<T>,
    roof: &crate::roof::RoofResult<T>,
) -> Result<TraceEntBracket<T>> {
    let space = rho.space().clone();
    let mut candidates: Vec<(String, DensityMatrix<T>)> = Vec::new();

    // mixture of the roof members' closest product states
    {
        let mut parts = Vec::new();
        for ((p, _), cps) in roof
            .decomposition
            .members()
            .iter()
            .zip(roof.member_cps())
        {
            parts.push((*p, tensor_assemble(cps)?.projector()));
        }
        if !parts.is_empty() {
            let sigma = DensityMatrix::mixture(&parts)?;
            candidates.push(("roof-cps-mixture".into(), sigma));
        }
    }

    // optimized product states
    candidates.push((
        "gt-product".into(),
        tensor_assemble(&gt_res.cps)?.projector(),
    ));

    // product-basis dephasings
    candidates.push(("computational-dephase".into(), computational_dephase(rho)));
    {
        let bases: Vec<nalgebra::DMatrix<C<T>>> = (0..space.parties())
            .map(|j| {
                let red = partial_trace(rho, &[j]).expect("valid party");
                let (_, vecs) = eigh(red.matrix());
                vecs
            })
            .collect();
        candidates.push(("marginal-dephase".into(), product_dephase(rho, &bases)));
    }

    // pure inputs: measurement dephasings with certified product branches
    let purity = rho.purity();
    let is_pure = purity >= T::one() - r(1e-9);
    if is_pure && space.parties() <= 8 && space.total_dim() <= 256 {
        let (vals, vecs) = eigh(rho.matrix());
        let top = vals.len() - 1;
        let psi = PureState::new(space.clone(), vecs.column(top).into_owned())?;
        let n = space.parties();
        for mask in 1u32..(1u32 << n) {
            let subset: Vec<usize> = (0..n).filter(|&p| mask & (1 << p) != 0).collect();
            let branches = measurement_branches(&psi, &subset);
            let mut parts = Vec::new();
            let mut all_product = true;
            for (p, branch) in &branches {
                match product_certificate(branch) {
                    Some(prod) => {
                        parts.push((*p, tensor_assemble(&prod)?.projector()));
                    }
                    None => {
                        all_product = false;
                        break;
                    }
                }
            }
            if all_product && !parts.is_empty() {
                let total: T = parts.iter().fold(T::zero(), |a, (p, _)| a + *p);
                let parts: Vec<(T, DensityMatrix<T>)> =
                    parts.into_iter().map(|(p, m)| (p / total, m)).collect();
                let sigma = DensityMatrix::mixture(&parts)?;
                candidates.push((format!("branch-dephase-{mask:b}"), sigma));
            }
        }
    }

    let mut upper = T::infinity();
    let mut witness = None;
    for (kind, sigma) in candidates {
        let d = crate::distance::trace_distance(rho, &sigma)?;
        let d2 = d * d;
        if d2 < upper {
            upper = d2;
            witness = Some((kind, sigma));
        }
    }
    let (witness_kind, witness_upper) = witness.expect("at least one candidate");

    let lower = if is_pure {
        let (vals, vecs) = eigh(rho.matrix());
        let top = vals.len() - 1;
        let psi = PureState::new(space, vecs.column(top).into_owned())?;
        let l2 = lambda2_pure(&psi, opts)?.lambda2;
        let g = T::one() - l2;
        if g > T::zero() {
            g * g
        } else {
            T::zero()
        }
    } else {
        T::zero()
    };

    Ok(TraceEntBracket {
        lower: lower.min(upper),
        upper,
        witness_upper,
        witness_kind,
    })
}

/// Marginal invariance helper: the trace inner-product maximum of an
/// `n`-partite pure state equals that of any single-party partial trace.
pub fn lambda2m_of_marginal<T: Real>(
    psi: &PureState<T>,
    traced_party: usize,
    opts: &OptimizerOptions,
) -> Result<Lambda2mResult<T>> {
    let n = psi.space().parties();
    let kept: Vec<usize> = (0..n).filter(|&p| p != traced_party).collect();
    let red = partial_trace(&psi.projector(), &kept)?;
    lambda2_mixed(&red, opts)
}

/// Isotropic state helper used across the test batteries.
pub fn isotropic_density<T: Real>(d: usize, p: T) -> Result<DensityMatrix<T>> {
    crate::families::IsotropicSpec::from_p(d, p).map(|s| crate::families::make_isotropic(&s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{make_isotropic, make_mes, IsotropicSpec};
    use crate::space::MultipartiteSpace;
    use approx::assert_relative_eq;

    fn opts() -> OptimizerOptions {
        OptimizerOptions::default()
    }

    #[test]
    fn maximally_mixed_two_qubits() {
        let space = MultipartiteSpace::qubits(2).unwrap();
        let rho = DensityMatrix::<f64>::maximally_mixed(space);
        let res = lambda2_mixed(&rho, &opts()).unwrap();
        assert_relative_eq!(res.lambda2m, 0.25, epsilon = 1e-10);
        let (g, gl) = gm_mixed(&rho, &opts()).unwrap();
        assert_relative_eq!(g, 0.75, epsilon = 1e-10);
        assert_relative_eq!(gl, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn isotropic_closed_form() {
        for (d, p) in [(2usize, 0.3f64), (3, 0.5), (2, 1.0)] {
            let spec = IsotropicSpec::from_p(d, p).unwrap();
            let rho = make_isotropic(&spec);
            let res = lambda2_mixed(&rho, &opts()).unwrap();
            let expect = p / (d * d) as f64 + (1.0 - p) / d as f64;
            assert_relative_eq!(res.lambda2m, expect, epsilon = 1e-8);
        }
    }

    #[test]
    fn pure_input_matches_pure_path() {
        let bell = make_mes::<f64>(2).unwrap();
        let res = lambda2_mixed(&bell.projector(), &opts()).unwrap();
        assert_relative_eq!(res.lambda2m, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn gt_on_pure_bell_is_half() {
        let bell = make_mes::<f64>(2).unwrap();
        let res = gt(&bell.projector(), &opts()).unwrap();
        assert_relative_eq!(res.value, 0.5, epsilon = 1e-7);
    }

    #[test]
    fn gt_on_maximally_mixed() {
        for d in [2usize, 3] {
            let space = MultipartiteSpace::bipartite(d).unwrap();
            let rho = DensityMatrix::<f64>::maximally_mixed(space);
            let mut o = opts();
            o.restarts = 8;
            let res = gt(&rho, &o).unwrap();
            let expect = (1.0 - 1.0 / (d * d) as f64).powi(2);
            assert_relative_eq!(res.value, expect, epsilon = 1e-5);
        }
    }

    #[test]
    fn bracket_on_separable_diagonal_state() {
        let space = MultipartiteSpace::qubits(2).unwrap();
        let rho = DensityMatrix::mixture(&[
            (0.5, PureState::basis_state(space.clone(), &[0, 0]).unwrap().projector()),
            (0.5, PureState::basis_state(space, &[1, 1]).unwrap().projector()),
        ])
        .unwrap();
        let mut o = opts();
        o.restarts = 8;
        let b = trace_ent_bracket(&rho, &o).unwrap();
        assert_relative_eq!(b.lower, 0.0, epsilon = 1e-12);
        assert_relative_eq!(b.upper, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn bracket_on_bell_sits_below_gt() {
        let bell = make_mes(2).unwrap().projector();
        let mut o = opts();
        o.restarts = 8;
        let b = trace_ent_bracket(&bell, &o).unwrap();
        assert_relative_eq!(b.lower, 0.25, epsilon = 1e-8);
        assert_relative_eq!(b.upper, 0.25, epsilon = 1e-8);
        let g = gt(&bell, &o).unwrap();
        assert!(b.upper <= g.value + 1e-9);
        assert!((0.0..=1.0).contains(&b.lower) && b.lower <= b.upper);
    }

    #[test]
    fn marginal_invariance_on_random_pure() {
        for seed in 0..4u64 {
            let psi = crate::optimize::random_pure_state::<f64>(
                &MultipartiteSpace::qubits(3).unwrap(),
                seed,
            );
            let direct = lambda2_pure(&psi, &opts()).unwrap().lambda2;
            let via_marginal = lambda2m_of_marginal(&psi, 2, &opts()).unwrap().lambda2m;
            assert_relative_eq!(direct, via_marginal, epsilon = 1e-6);
        }
    }
}
