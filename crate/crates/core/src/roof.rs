//! Convex-roof measures over pure-state decompositions, the fidelity
//! extension derived from the linear roof, and the equal-overlap
//! decomposition constructor.
//!
//! A decomposition of `rho` with `K` members is parameterized by a `K x r`
//! isometry `U` acting on the scaled eigenbasis: member `i` is
//! `m_i = sum_j U_ij sqrt(lambda_j) v_j`, with weight `|m_i|^2`. Every
//! decomposition with at most `K` members arises this way, so minimizing the
//! weighted member measure over isometries searches the whole roof. The
//! returned value is recomputed from the certificate decomposition and its
//! per-member product-state certificates, making it a certified upper bound
//! on the roof.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::eigh;
use crate::mixed::lambda2_mixed;
use crate::optimize::{hopm_pure, restart_rng, OptimizerOptions};
use crate::pure::{clamp_prob, lambda2_pure_seeded};
use crate::scalar::{cabs, r, Real, C};
use crate::space::{
    tensor_assemble, DensityMatrix, MultipartiteSpace, ProductState, PureState,
};

use rand::Rng;
use rand_distr::StandardNormal;

/// Which pure-state measure is averaged over the decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoofKind {
    /// `1 - lambda2` per member.
    Linear,
    /// `-log2 lambda2` per member.
    Logarithmic,
}

/// A probability-weighted pure-state ensemble.
#[derive(Debug, Clone)]
pub struct Decomposition<T: Real> {
    members: Vec<(T, PureState<T>)>,
}

impl<T: Real> Decomposition<T> {
    pub fn new(members: Vec<(T, PureState<T>)>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidParameter("empty decomposition".into()));
        }
        let sum: T = members.iter().fold(T::zero(), |a, (p, _)| a + *p);
        if members.iter().any(|(p, _)| *p <= T::zero()) {
            return Err(Error::InvalidParameter(
                "decomposition weights must be positive".into(),
            ));
        }
        if (sum - T::one()).abs() > r(1e-10) {
            return Err(Error::InvalidParameter(format!(
                "decomposition weights sum to {sum}"
            )));
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[(T, PureState<T>)] {
        &self.members
    }

    /// `sum p_i |psi_i><psi_i|`.
    pub fn reconstruct(&self) -> DensityMatrix<T> {
        let space = self.members[0].1.space().clone();
        let dim = space.total_dim();
        let mut m = DMatrix::from_element(dim, dim, C::new(T::zero(), T::zero()));
        for (p, psi) in &self.members {
            m += psi.projector().matrix().scale(*p);
        }
        DensityMatrix::trusted(space, m)
    }

    /// Checks the weights sum to 1 (1e-10) and the mixture reproduces `rho`
    /// (1e-8 max-abs).
    pub fn validate_against(&self, rho: &DensityMatrix<T>) -> Result<()> {
        let rec = self.reconstruct();
        if rec.space() != rho.space() {
            return Err(Error::DimensionMismatch(
                "decomposition on a different space".into(),
            ));
        }
        let mut dev = T::zero();
        for i in 0..rec.matrix().nrows() {
            for j in 0..rec.matrix().ncols() {
                let d = cabs(rec.matrix()[(i, j)] - rho.matrix()[(i, j)]);
                if d > dev {
                    dev = d;
                }
            }
        }
        if dev > r(1e-8) {
            return Err(Error::InvalidState(format!(
                "decomposition misses the state by {dev:e}"
            )));
        }
        Ok(())
    }
}

/// Certified roof value with its achieving decomposition.
#[derive(Debug, Clone)]
pub struct RoofResult<T: Real> {
    /// `sum p_i f(lambda2_i)` recomputed from the certificates below.
    pub value: T,
    pub decomposition: Decomposition<T>,
    pub per_member_lambda2: Vec<T>,
    pub converged: bool,
    /// Some eigenvalue sat within a decade of the rank threshold.
    pub rank_ambiguous: bool,
    member_cps: Vec<ProductState<T>>,
}

impl<T: Real> RoofResult<T> {
    /// Product-state certificate per member, aligned with the decomposition.
    pub fn member_cps(&self) -> &[ProductState<T>] {
        &self.member_cps
    }
}

fn member_measure<T: Real>(kind: RoofKind, lambda2: T) -> T {
    match kind {
        RoofKind::Linear => T::one() - lambda2,
        RoofKind::Logarithmic => {
            if lambda2 > T::zero() {
                let v = -lambda2.log2();
                if v < T::zero() {
                    T::zero()
                } else {
                    v
                }
            } else {
                T::infinity()
            }
        }
    }
}

const WEIGHT_FLOOR: f64 = 1e-13;
const MEMBER_CAP: usize = 48;

/// Search-time state of the decomposition: unnormalized member vectors plus
/// cached overlap estimates and warm starts.
struct Members<T: Real> {
    vecs: Vec<DVector<C<T>>>,
    dims: Vec<usize>,
    kind: RoofKind,
}

impl<T: Real> Members<T> {
    fn from_isometry(w: &DMatrix<C<T>>, u: &DMatrix<C<T>>, dims: &[usize], kind: RoofKind) -> Self {
        let m = w * u.transpose();
        let vecs = (0..m.ncols()).map(|i| m.column(i).into_owned()).collect();
        Self {
            vecs,
            dims: dims.to_vec(),
            kind,
        }
    }

    /// Exact per-member evaluation. Returns the contribution, the weight,
    /// the squared overlap, the assembled product certificate, and (for
    /// three or more parties) the per-party factors for warm starts. Any
    /// `candidate` certificate supplied by the caller is kept when it beats
    /// the freshly optimized one, so accepted moves can never regress.
    fn eval_member(
        &self,
        vec: &DVector<C<T>>,
        warm: Option<&DVector<C<T>>>,
        candidate: Option<&DVector<C<T>>>,
    ) -> MemberCache<T> {
        let p = vec.norm_squared();
        if p < r(WEIGHT_FLOOR) {
            return MemberCache::dead();
        }
        let (mut l2, mut cert, factors) = if self.dims.len() == 2 {
            // exact top singular pair of the reshaped member, through the
            // small Gram matrix
            let (d0, d1) = (self.dims[0], self.dims[1]);
            let m = DMatrix::from_fn(d0, d1, |i, j| vec[i * d1 + j]);
            let gram = &m * m.adjoint();
            let (vals, vecs) = crate::linalg::eigh_jacobi(&gram);
            let s2 = vals[d0 - 1].max(T::zero());
            let u = vecs.column(d0 - 1).into_owned();
            let mut v = m.adjoint() * &u;
            let n = v.norm();
            if n <= r(1e-150) {
                return MemberCache::dead();
            }
            v /= C::new(n, T::zero());
            let mut cert = DVector::from_element(d0 * d1, C::new(T::zero(), T::zero()));
            for i in 0..d0 {
                for j in 0..d1 {
                    cert[i * d1 + j] = u[i] * v[j].conj();
                }
            }
            ((s2 / p).min(T::one()), cert, None)
        } else {
            let psi = PureState::normalized(
                MultipartiteSpace::new(self.dims.clone()).expect("valid dims"),
                vec.clone(),
            )
            .expect("nonzero member");
            let start = match warm {
                Some(flat) if flat.len() == self.dims.iter().sum::<usize>() => {
                    unflatten_factors(flat, &self.dims)
                }
                _ => marginal_start(&psi),
            };
            let mut o = OptimizerOptions::default();
            o.max_sweeps = if warm.is_some() { 10 } else { 60 };
            o.tol = 1e-12;
            let (val, factors, _, _) = hopm_pure(&psi, start, &o);
            let prod = ProductState::new(factors.clone()).expect("unit factors");
            let cert = tensor_assemble(&prod).expect("consistent dims");
            (
                clamp_prob(val),
                cert.amplitudes().clone(),
                Some(flatten_factors(&factors)),
            )
        };
        if let Some(cand) = candidate {
            if cand.len() == vec.len() {
                let l2_cand = clamp_prob(cand.dotc(vec).norm_sqr() / p);
                if l2_cand > l2 {
                    l2 = l2_cand;
                    cert = cand.clone();
                }
            }
        }
        let floor = r::<T>(1.0) / r::<T>(vec.len() as f64);
        let l2 = l2.max(floor);
        MemberCache {
            contrib: p * member_measure(self.kind, l2),
            p,
            lambda2: l2,
            cert,
            factors,
        }
    }
}

/// Cached exact evaluation of one member.
struct MemberCache<T: Real> {
    contrib: T,
    p: T,
    lambda2: T,
    /// Assembled product certificate achieving `lambda2` (unit norm), or
    /// empty for members below the weight floor.
    cert: DVector<C<T>>,
    /// Flattened per-party factors, kept for warm starts (>= 3 parties).
    factors: Option<DVector<C<T>>>,
}

impl<T: Real> MemberCache<T> {
    fn dead() -> Self {
        Self {
            contrib: T::zero(),
            p: T::zero(),
            lambda2: T::zero(),
            cert: DVector::zeros(0),
            factors: None,
        }
    }

    fn alive(&self) -> bool {
        self.cert.len() > 0
    }
}

fn flatten_factors<T: Real>(factors: &[DVector<C<T>>]) -> DVector<C<T>> {
    let total: usize = factors.iter().map(|f| f.len()).sum();
    let mut out = DVector::from_element(total, C::new(T::zero(), T::zero()));
    let mut at = 0;
    for f in factors {
        for i in 0..f.len() {
            out[at + i] = f[i];
        }
        at += f.len();
    }
    out
}

fn unflatten_factors<T: Real>(flat: &DVector<C<T>>, dims: &[usize]) -> Vec<DVector<C<T>>> {
    let mut out = Vec::with_capacity(dims.len());
    let mut at = 0;
    for &d in dims {
        let mut f = DVector::from_element(d, C::new(T::zero(), T::zero()));
        for i in 0..d {
            f[i] = flat[at + i];
        }
        let n = f.norm();
        if n > r(1e-150) {
            f /= C::new(n, T::zero());
        } else {
            f[0] = C::new(T::one(), T::zero());
        }
        out.push(f);
        at += d;
    }
    out
}

/// Informed start for a member: per-party marginal top eigenvectors.
fn marginal_start<T: Real>(psi: &PureState<T>) -> Vec<DVector<C<T>>> {
    let n = psi.space().parties();
    let rho = psi.projector();
    (0..n)
        .map(|j| {
            let red = crate::space::partial_trace(&rho, &[j]).expect("valid party");
            let (vals, vecs) = eigh(red.matrix());
            vecs.column(vals.len() - 1).into_owned()
        })
        .collect()
}

/// Thin-QR retraction onto the isometry manifold.
fn retract<T: Real>(m: DMatrix<C<T>>) -> DMatrix<C<T>> {
    m.qr().q()
}

fn random_direction<T: Real>(rng: &mut rand_chacha::ChaCha8Rng, k: usize, rk: usize) -> DMatrix<C<T>> {
    DMatrix::from_fn(k, rk, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C::new(r::<T>(re), r::<T>(im))
    })
}

fn dft_isometry<T: Real>(k: usize, rk: usize) -> DMatrix<C<T>> {
    let scale = 1.0 / (k as f64).sqrt();
    DMatrix::from_fn(k, rk, |i, j| {
        let angle = std::f64::consts::TAU * (i as f64) * (j as f64) / (k as f64);
        C::new(r::<T>(scale * angle.cos()), r::<T>(scale * angle.sin()))
    })
}

fn identity_isometry<T: Real>(k: usize, rk: usize) -> DMatrix<C<T>> {
    DMatrix::from_fn(k, rk, |i, j| {
        if i == j {
            C::new(T::one(), T::zero())
        } else {
            C::new(T::zero(), T::zero())
        }
    })
}

struct SearchState<T: Real> {
    vecs: Vec<DVector<C<T>>>,
    caches: Vec<MemberCache<T>>,
    total: T,
    /// Bumped whenever a member changes; pairs whose members are both
    /// unchanged since their last trial are skipped in later sweeps.
    versions: Vec<u64>,
    pair_seen: Vec<(u64, u64)>,
}

fn evaluate_all<T: Real>(ctx: &Members<T>, vecs: Vec<DVector<C<T>>>) -> SearchState<T> {
    let mut caches = Vec::with_capacity(vecs.len());
    let mut total = T::zero();
    for v in &vecs {
        let cache = ctx.eval_member(v, None, None);
        total += cache.contrib;
        caches.push(cache);
    }
    let k = vecs.len();
    SearchState {
        vecs,
        caches,
        total,
        versions: vec![1; k],
        pair_seen: vec![(0, 0); k * k],
    }
}

/// Random-direction descent with step halving on the isometry manifold.
fn perturbation_descent<T: Real>(
    ctx: &Members<T>,
    w: &DMatrix<C<T>>,
    mut u: DMatrix<C<T>>,
    iters: u32,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> (T, DMatrix<C<T>>) {
    let eval = |uu: &DMatrix<C<T>>| -> T {
        let ms = Members::from_isometry(w, uu, &ctx.dims, ctx.kind);
        let mut total = T::zero();
        for v in &ms.vecs {
            total += ctx.eval_member(v, None, None).contrib;
        }
        total
    };
    let mut best = eval(&u);
    let mut step = r::<T>(0.5);
    let floor = r::<T>(1e-6);
    for _ in 0..iters {
        if step < floor {
            break;
        }
        let dir = random_direction::<T>(rng, u.nrows(), u.ncols());
        let mut accepted = false;
        for sign in [T::one(), -T::one()] {
            let trial = retract(&u + dir.scale(step * sign));
            let val = eval(&trial);
            if val < best - r(1e-15) {
                best = val;
                u = trial;
                accepted = true;
                break;
            }
        }
        if accepted {
            step = (step * r(1.5)).min(r(1.0));
        } else {
            step *= r(0.5);
        }
    }
    (best, u)
}

/// Splits the heaviest member into a dead slot (an exact rotation by pi/4,
/// which leaves the objective unchanged) so later pair rotations can use the
/// extra member. Only meaningful when the member count exceeds the rank.
fn neutral_split<T: Real>(ctx: &Members<T>, state: &mut SearchState<T>) {
    let dead = match state.caches.iter().position(|c| !c.alive()) {
        Some(d) => d,
        None => return,
    };
    let mut heavy = None;
    let mut heavy_p = T::zero();
    for (i, c) in state.caches.iter().enumerate() {
        if c.alive() && c.p > heavy_p {
            heavy_p = c.p;
            heavy = Some(i);
        }
    }
    let Some(i) = heavy else { return };
    let inv = r::<T>(std::f64::consts::FRAC_1_SQRT_2);
    let half_i = state.vecs[i].scale(inv);
    state.vecs[dead] = half_i.clone();
    state.vecs[i] = half_i;
    let cert = state.caches[i].cert.clone();
    let cache_i = ctx.eval_member(&state.vecs[i], state.caches[i].factors.as_ref(), Some(&cert));
    let cache_d = ctx.eval_member(&state.vecs[dead], None, Some(&cert));
    state.total += cache_i.contrib + cache_d.contrib - state.caches[i].contrib;
    state.caches[i] = cache_i;
    state.caches[dead] = cache_d;
    state.versions[i] += 1;
    state.versions[dead] += 1;
}

/// One Jacobi-style sweep of pairwise two-member rotations
/// `(m_i, m_k) -> (c m_i + s e^{i phi} m_k, -s e^{-i phi} m_i + c m_k)`.
///
/// Each pair is first optimized on the certificate surrogate, where the
/// squared overlap of a rotated member with the cached product certificates
/// is an exact trigonometric function of `(theta, phi)` built from four
/// inner products. The surrogate equals the exact objective at the identity
/// rotation and lower-bounds the true overlaps elsewhere, so a surrogate
/// improvement re-evaluated exactly (keeping the certificates as candidates)
/// is guaranteed to improve the objective. Rotations preserve the mixture.
fn pair_sweep<T: Real>(ctx: &Members<T>, state: &mut SearchState<T>) -> T {
    let k = state.vecs.len();
    let floor_l2 = r::<T>(1.0) / r::<T>(state.vecs.first().map_or(1, |v| v.len()) as f64);
    let mut gained = T::zero();
    for i in 0..k {
        for j in (i + 1)..k {
            if !state.caches[i].alive() && !state.caches[j].alive() {
                continue;
            }
            let stamp = (state.versions[i], state.versions[j]);
            if state.pair_seen[i * k + j] == stamp {
                continue;
            }
            state.pair_seen[i * k + j] = stamp;
            let base = state.caches[i].contrib + state.caches[j].contrib;
            let (pi, pj) = (state.caches[i].p, state.caches[j].p);
            // dead partners borrow the live certificate as a proposal basis
            let cert_i = if state.caches[i].alive() {
                &state.caches[i].cert
            } else {
                &state.caches[j].cert
            };
            let cert_j = if state.caches[j].alive() {
                &state.caches[j].cert
            } else {
                &state.caches[i].cert
            };
            let a = cert_i.dotc(&state.vecs[i]);
            let b = cert_i.dotc(&state.vecs[j]);
            let g = cert_j.dotc(&state.vecs[i]);
            let h = cert_j.dotc(&state.vecs[j]);
            let ip = state.vecs[i].dotc(&state.vecs[j]);

            let surrogate = |theta: T, phi: T| -> T {
                let (c, s) = (theta.cos(), theta.sin());
                let e = C::new(phi.cos(), phi.sin());
                let overlap_i = (C::new(c, T::zero()) * a + C::new(s, T::zero()) * e * b)
                    .norm_sqr();
                let overlap_j = (C::new(c, T::zero()) * h
                    - C::new(s, T::zero()) * e.conj() * g)
                    .norm_sqr();
                let p_i = c * c * pi + s * s * pj + r::<T>(2.0) * c * s * (e * ip).re;
                let p_i = p_i.max(T::zero());
                let p_j = (pi + pj - p_i).max(T::zero());
                let wf = r::<T>(WEIGHT_FLOOR);
                let mut total = T::zero();
                for (p, ov) in [(p_i, overlap_i), (p_j, overlap_j)] {
                    if p > wf {
                        let l2 = (ov / p).min(T::one()).max(floor_l2);
                        total += p * member_measure(ctx.kind, l2);
                    }
                }
                total
            };

            // coarse grid, then coordinate halving
            let mut best = (T::zero(), T::zero(), base);
            for it in 1..=7 {
                let theta = r::<T>(it as f64 * std::f64::consts::FRAC_PI_8 * 0.5);
                for sign in [T::one(), -T::one()] {
                    for ipx in 0..8 {
                        let phi = r::<T>(ipx as f64 * std::f64::consts::FRAC_PI_8);
                        let v = surrogate(theta * sign, phi);
                        if v < best.2 - r(1e-16) {
                            best = (theta * sign, phi, v);
                        }
                    }
                }
            }
            let mut dt = r::<T>(0.1);
            let mut dp = r::<T>(0.2);
            for _ in 0..24 {
                let mut moved = false;
                for (ddt, ddp) in [
                    (dt, T::zero()),
                    (-dt, T::zero()),
                    (T::zero(), dp),
                    (T::zero(), -dp),
                ] {
                    let (t, p) = (best.0 + ddt, best.1 + ddp);
                    let v = surrogate(t, p);
                    if v < best.2 - r(1e-16) {
                        best = (t, p, v);
                        moved = true;
                    }
                }
                if !moved {
                    dt /= r(2.0);
                    dp /= r(2.0);
                    if dt < r(1e-9) {
                        break;
                    }
                }
            }

            if best.2 < base - r(1e-14) && best.0 != T::zero() {
                let (theta, phi) = (best.0, best.1);
                let (c, s) = (theta.cos(), theta.sin());
                let e = C::new(phi.cos(), phi.sin());
                let mi = state.vecs[i].scale(c) + state.vecs[j].map(|z| z * e).scale(s);
                let mj = state.vecs[j].scale(c) - state.vecs[i].map(|z| z * e.conj()).scale(s);
                let cert_i = cert_i.clone();
                let cert_j = cert_j.clone();
                let cache_i =
                    ctx.eval_member(&mi, state.caches[i].factors.as_ref(), Some(&cert_i));
                let cache_j =
                    ctx.eval_member(&mj, state.caches[j].factors.as_ref(), Some(&cert_j));
                let new_total = cache_i.contrib + cache_j.contrib;
                if new_total < base - r(1e-15) {
                    gained += base - new_total;
                    state.total += new_total - base;
                    state.vecs[i] = mi;
                    state.vecs[j] = mj;
                    state.caches[i] = cache_i;
                    state.caches[j] = cache_j;
                    state.versions[i] += 1;
                    state.versions[j] += 1;
                }
            }
        }
    }
    gained
}

/// Builds the isometry whose members reproduce a given decomposition (the
/// members must span the eigen-support of `rho`). Used to seed the search
/// with the equal-overlap construction.
fn isometry_from_members<T: Real>(
    vecs: &[DVector<C<T>>],
    w: &DMatrix<C<T>>,
    evals: &[T],
    k: usize,
) -> DMatrix<C<T>> {
    let rk = w.ncols();
    let mut u = DMatrix::from_element(k, rk, C::new(T::zero(), T::zero()));
    for (i, m) in vecs.iter().enumerate().take(k) {
        for j in 0..rk {
            // U_ij = w_j^dag m_i / lambda_j
            let wj = w.column(j);
            u[(i, j)] = wj.dotc(m) / C::new(evals[j], T::zero());
        }
    }
    retract(u)
}

/// Minimizes the decomposition-averaged pure-state measure over
/// decompositions of `rho`.
///
/// Member counts `K = r, 2r, r^2` are tried (capped at 48) and the best kept.
/// Each restart refines a seed isometry by random-direction descent followed
/// by pairwise rotations until stall. Seeds: the spectral decomposition, a
/// discrete-Fourier mixing, the equal-overlap decomposition of the trace
/// inner-product certificate, then random isometries. The certified value is
/// recomputed per member at full restart budget.
pub fn convex_roof<T: Real>(
    rho: &DensityMatrix<T>,
    kind: RoofKind,
    opts: &OptimizerOptions,
) -> Result<RoofResult<T>> {
    if rho.space().parties() < 2 {
        return Err(Error::InvalidParameter(
            "roof needs at least two parties".into(),
        ));
    }
    let (vals, vecs) = eigh(rho.matrix());
    let thr = r::<T>(crate::linalg::SUPPORT_TOL);
    let rank_ambiguous = vals
        .iter()
        .any(|&v| v > thr / r(10.0) && v < thr * r(10.0));
    let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > thr).collect();
    if keep.is_empty() {
        return Err(Error::InvalidState("state has empty support".into()));
    }
    let rk = keep.len();
    let dim = rho.space().total_dim();
    let dims = rho.space().dims().to_vec();

    // scaled eigenbasis W: column j is sqrt(lambda_j) v_j
    let mut w = DMatrix::from_element(dim, rk, C::new(T::zero(), T::zero()));
    let mut evals = Vec::with_capacity(rk);
    for (slot, &j) in keep.iter().enumerate() {
        let col = vecs.column(j).into_owned().scale(vals[j].sqrt());
        w.set_column(slot, &col);
        evals.push(vals[j]);
    }

    // rank one: the state is pure, a single-member decomposition is exact
    if rk == 1 {
        let psi = PureState::normalized(rho.space().clone(), w.column(0).into_owned())?;
        let cps = lambda2_pure_seeded(&psi, &certify_seed(&psi), opts)?;
        let value = member_measure(kind, cps.lambda2);
        return Ok(RoofResult {
            value,
            decomposition: Decomposition::new(vec![(T::one(), psi)])?,
            per_member_lambda2: vec![cps.lambda2],
            converged: cps.converged,
            rank_ambiguous,
            member_cps: vec![cps.cps],
        });
    }

    // trace inner-product certificate and its equal-overlap decomposition
    let light = opts.light(8);
    let phi_m = lambda2_mixed(rho, &light)?;
    let phi_m_state = tensor_assemble(&phi_m.cps)?;
    let eq_overlap = equal_overlap_decomposition(rho, &phi_m_state).ok();

    let full_schedule = opts.restarts > 4;
    let mut ks: Vec<usize> = vec![rk];
    if full_schedule {
        for k in [2 * rk, rk * rk] {
            if k > rk && k <= MEMBER_CAP && !ks.contains(&k) {
                ks.push(k);
            }
        }
    }
    let outer_restarts = (opts.restarts / 4).clamp(2, 12) as usize;
    let p1_iters = if full_schedule { 120 } else { 40 };
    let sweep_cap = if full_schedule { 300 } else { 80 };

    let mut best_vecs: Option<(T, Vec<DVector<C<T>>>, bool)> = None;
    for (ki, &k) in ks.iter().enumerate() {
        let ctx = Members {
            vecs: Vec::new(),
            dims: dims.clone(),
            kind,
        };
        let runs: Vec<(T, Vec<DVector<C<T>>>, bool)> = (0..outer_restarts)
            .into_par_iter()
            .map(|ri| {
                let mut rng = restart_rng(opts.seed ^ 0xC0FFEE, (ki * 64 + ri) as u64);
                let u0 = match ri {
                    0 => identity_isometry(k, rk),
                    1 => dft_isometry(k, rk),
                    2 => match &eq_overlap {
                        Some(d) => {
                            let vecs: Vec<DVector<C<T>>> = d
                                .members()
                                .iter()
                                .map(|(p, psi)| psi.amplitudes().scale(p.sqrt()))
                                .collect();
                            isometry_from_members(&vecs, &w, &evals, k)
                        }
                        None => retract(random_direction(&mut rng, k, rk)),
                    },
                    _ => retract(random_direction(&mut rng, k, rk)),
                };
                let (_, mut u) = perturbation_descent(&ctx, &w, u0, p1_iters, &mut rng);
                let mut best: Option<(T, Vec<DVector<C<T>>>, bool)> = None;
                // alternate rotation sweeps with short perturbation rounds;
                // the latter cross ridges where the certificates co-adapt
                let rounds = if full_schedule { 3 } else { 1 };
                for round in 0..rounds {
                    let ms = Members::from_isometry(&w, &u, &dims, kind);
                    let mut state = evaluate_all(&ctx, ms.vecs);
                    let mut stalled = 0;
                    for sweep in 0..sweep_cap {
                        // keep spare member slots in play: an exact split
                        // leaves the objective unchanged but lets later
                        // rotations use the extra member
                        if sweep % 4 == 0 {
                            neutral_split(&ctx, &mut state);
                        }
                        let gained = pair_sweep(&ctx, &mut state);
                        if gained < r(opts.tol.max(1e-13)) {
                            stalled += 1;
                            if stalled >= 3 {
                                break;
                            }
                        } else {
                            stalled = 0;
                        }
                    }
                    let better = best.as_ref().map_or(true, |(v, _, _)| state.total < *v);
                    if better {
                        best = Some((state.total, state.vecs.clone(), stalled >= 3));
                    }
                    if round + 1 < rounds {
                        let u1 = isometry_from_members(&state.vecs, &w, &evals, k);
                        let (_, u2) = perturbation_descent(&ctx, &w, u1, 40, &mut rng);
                        u = u2;
                    }
                }
                best.expect("at least one round")
            })
            .collect();
        for run in runs {
            let better = match &best_vecs {
                None => true,
                Some((v, _, _)) => run.0 < *v,
            };
            if better {
                best_vecs = Some(run);
            }
        }
    }

    let (_, vecs, converged) = best_vecs.expect("at least one restart");
    certify_roof(rho, kind, vecs, &phi_m_state, converged, rank_ambiguous, opts)
}

fn certify_seed<T: Real>(psi: &PureState<T>) -> ProductState<T> {
    ProductState::normalized(marginal_start(psi)).expect("unit factors")
}

/// Recomputes the roof value from the final decomposition with full-budget
/// per-member certificates.
fn certify_roof<T: Real>(
    rho: &DensityMatrix<T>,
    kind: RoofKind,
    vecs: Vec<DVector<C<T>>>,
    phi_m_state: &PureState<T>,
    converged: bool,
    rank_ambiguous: bool,
    opts: &OptimizerOptions,
) -> Result<RoofResult<T>> {
    let space = rho.space().clone();
    let mut members = Vec::new();
    for v in vecs {
        let p = v.norm_squared();
        if p < r(WEIGHT_FLOOR) {
            continue;
        }
        let psi = PureState::normalized(space.clone(), v)?;
        members.push((p, psi));
    }
    // renormalize away the dropped dust
    let total: T = members.iter().fold(T::zero(), |a, (p, _)| a + *p);
    for (p, _) in members.iter_mut() {
        *p /= total;
    }

    let mut per_member_lambda2 = Vec::with_capacity(members.len());
    let mut member_cps = Vec::with_capacity(members.len());
    let mut value = T::zero();
    let mut all_conv = converged;
    let cert_opts = OptimizerOptions {
        restarts: opts.restarts.max(8),
        ..*opts
    };
    for (p, psi) in &members {
        // the maximizer keeps the trace inner-product certificate as a
        // candidate, so each member bound is at least its overlap with it
        let phi_m_prod = factor_product_from_state(phi_m_state, psi.space());
        let res = match phi_m_prod {
            Some(prod) => lambda2_pure_seeded(psi, &prod, &cert_opts)?,
            None => lambda2_pure_seeded(psi, &certify_seed(psi), &cert_opts)?,
        };
        all_conv &= res.converged;
        value += *p * member_measure(kind, res.lambda2);
        per_member_lambda2.push(res.lambda2);
        member_cps.push(res.cps);
    }
    let decomposition = Decomposition::new(members)?;
    decomposition.validate_against(rho)?;
    Ok(RoofResult {
        value,
        decomposition,
        per_member_lambda2,
        converged: all_conv,
        rank_ambiguous,
        member_cps,
    })
}

/// Extracts per-party factors from a state that is product by construction.
fn factor_product_from_state<T: Real>(
    phi: &PureState<T>,
    space: &MultipartiteSpace,
) -> Option<ProductState<T>> {
    if phi.space() != space {
        return None;
    }
    crate::mixed::product_certificate(phi)
}

/// Both roof kinds with cross-evaluation: each certified decomposition is
/// also scored under the other measure and the better bound kept. Since
/// `1 - x <= -log2 x` holds per member, the returned pair always satisfies
/// `linear.value <= logarithmic.value`.
pub fn convex_roof_pair<T: Real>(
    rho: &DensityMatrix<T>,
    opts: &OptimizerOptions,
) -> Result<(RoofResult<T>, RoofResult<T>)> {
    let lin = convex_roof(rho, RoofKind::Linear, opts)?;
    let log = convex_roof(rho, RoofKind::Logarithmic, opts)?;
    let lin = pick_better(RoofKind::Linear, lin, &log);
    let log = pick_better(RoofKind::Logarithmic, log, &lin);
    Ok((lin, log))
}

fn rescore<T: Real>(kind: RoofKind, res: &RoofResult<T>) -> T {
    res.decomposition
        .members()
        .iter()
        .zip(&res.per_member_lambda2)
        .fold(T::zero(), |acc, ((p, _), &l2)| {
            acc + *p * member_measure(kind, l2)
        })
}

fn pick_better<T: Real>(kind: RoofKind, own: RoofResult<T>, other: &RoofResult<T>) -> RoofResult<T> {
    let other_value = rescore(kind, other);
    if other_value < own.value {
        RoofResult {
            value: other_value,
            decomposition: other.decomposition.clone(),
            per_member_lambda2: other.per_member_lambda2.clone(),
            converged: other.converged,
            rank_ambiguous: other.rank_ambiguous,
            member_cps: other.member_cps.clone(),
        }
    } else {
        own
    }
}

/// Fidelity extension bundle: the linear roof, its logarithmic companion,
/// and a closest-separable-state candidate rebuilt from the roof members'
/// product certificates.
#[derive(Debug, Clone)]
pub struct FidelityExtension<T: Real> {
    pub g_f: T,
    pub g_f_log: T,
    pub lambda2_f: T,
    /// Candidate closest separable state `sum p_i |cps_i><cps_i|`.
    pub css: DensityMatrix<T>,
    /// Recomputed fidelity of `css` to the input state.
    pub css_fidelity: T,
    pub roof: RoofResult<T>,
}

/// The fidelity-of-separability values derived from the linear convex roof.
pub fn fidelity_extension<T: Real>(
    rho: &DensityMatrix<T>,
    opts: &OptimizerOptions,
) -> Result<FidelityExtension<T>> {
    let roof = convex_roof(rho, RoofKind::Linear, opts)?;
    let g_f = roof.value;
    let lambda2_f = T::one() - g_f;
    let g_f_log = if lambda2_f > T::zero() {
        let v = -lambda2_f.log2();
        if v < T::zero() {
            T::zero()
        } else {
            v
        }
    } else {
        T::infinity()
    };
    let mut parts = Vec::new();
    for ((p, _), cps) in roof.decomposition.members().iter().zip(roof.member_cps()) {
        parts.push((*p, tensor_assemble(cps)?.projector()));
    }
    let css = DensityMatrix::mixture(&parts)?;
    let css_fidelity = crate::distance::fidelity(rho, &css)?;
    Ok(FidelityExtension {
        g_f,
        g_f_log,
        lambda2_f,
        css,
        css_fidelity,
        roof,
    })
}

/// Decomposes `rho` into `rank` members that all share the same squared
/// overlap `g = <phi|rho|phi>` with a reference state `phi`.
///
/// Constructive induction on the rank: two spectral members straddling `g`
/// are rotated into one member hitting `g` exactly (1-D bisection on the
/// rotation angle), that member is peeled off and the remainder recursed on.
pub fn equal_overlap_decomposition<T: Real>(
    rho: &DensityMatrix<T>,
    phi: &PureState<T>,
) -> Result<Decomposition<T>> {
    if rho.space() != phi.space() {
        return Err(Error::DimensionMismatch(
            "reference state on a different space".into(),
        ));
    }
    let g = clamp_prob(rho.expectation(phi));
    let thr = r::<T>(crate::linalg::SUPPORT_TOL);
    let mut members: Vec<(T, PureState<T>)> = Vec::new();
    let mut cur = rho.matrix().clone();
    let mut cur_weight = T::one();
    let space = rho.space().clone();

    loop {
        let (vals, vecs) = eigh(&cur);
        let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > thr).collect();
        if keep.is_empty() {
            break;
        }
        if keep.len() == 1 {
            let psi = PureState::normalized(space.clone(), vecs.column(keep[0]).into_owned())?;
            members.push((cur_weight, psi));
            break;
        }
        // weights renormalized to the current remainder
        let total: T = keep.iter().fold(T::zero(), |a, &i| a + vals[i]);
        let probs: Vec<T> = keep.iter().map(|&i| vals[i] / total).collect();
        let states: Vec<DVector<C<T>>> =
            keep.iter().map(|&i| vecs.column(i).into_owned()).collect();
        let overlaps: Vec<C<T>> = states
            .iter()
            .map(|v| {
                let psi = PureState::new(space.clone(), v.clone()).expect("unit eigenvector");
                phi.inner(&psi)
            })
            .collect();
        let o2: Vec<T> = overlaps.iter().map(|z| z.norm_sqr()).collect();

        // members straddling the mean overlap always exist
        let lo = (0..o2.len())
            .min_by(|&a, &b| o2[a].partial_cmp(&o2[b]).unwrap())
            .unwrap();
        let hi = (0..o2.len())
            .max_by(|&a, &b| o2[a].partial_cmp(&o2[b]).unwrap())
            .unwrap();
        if o2[lo] > g + r(1e-9) || o2[hi] < g - r(1e-9) {
            return Err(Error::InvalidState(
                "overlap mean property violated; input is not a valid state".into(),
            ));
        }

        let (p1, p2) = (probs[lo], probs[hi]);
        let (s1, s2) = (o2[lo].sqrt(), o2[hi].sqrt());
        let phase1 = overlaps[lo].im.atan2(overlaps[lo].re);
        let phase2 = overlaps[hi].im.atan2(overlaps[hi].re);

        // |<phi|member(theta)>|^2 rises continuously from o2[lo] to o2[hi]
        let overlap_sq = |theta: T| -> T {
            let c = (theta / r(2.0)).cos();
            let s = (theta / r(2.0)).sin();
            let q = c * c * p1 + s * s * p2;
            if q <= T::zero() {
                return T::zero();
            }
            let num = c * p1.sqrt() * s1 + s * p2.sqrt() * s2;
            num * num / q
        };
        let mut a = T::zero();
        let mut b = T::pi();
        for _ in 0..200 {
            let mid = (a + b) / r(2.0);
            if overlap_sq(mid) - g <= T::zero() {
                a = mid;
            } else {
                b = mid;
            }
            if (overlap_sq((a + b) / r(2.0)) - g).abs() <= r(1e-12) {
                break;
            }
        }
        let theta = (a + b) / r(2.0);
        let c = (theta / r(2.0)).cos();
        let s = (theta / r(2.0)).sin();
        let q1 = c * c * p1 + s * s * p2;
        let rel_phase = C::new((phase1 - phase2).cos(), (phase1 - phase2).sin());
        let member_vec = states[lo].scale(c * p1.sqrt())
            + states[hi].map(|z| z * rel_phase).scale(s * p2.sqrt());
        let member_vec = member_vec.unscale(q1.sqrt());
        let member = PureState::normalized(space.clone(), member_vec)?;
        members.push((cur_weight * q1, member.clone()));

        // peel and renormalize the remainder
        let proj = member.projector();
        cur = (cur.scale(total) - proj.matrix().scale(q1 * total)).unscale((T::one() - q1) * total);
        // guard tiny negative drift
        cur_weight *= T::one() - q1;
        if cur_weight < r(1e-12) {
            break;
        }
    }

    // weights of the peeled members sum to the original trace
    let total: T = members.iter().fold(T::zero(), |a, (p, _)| a + *p);
    let members = members
        .into_iter()
        .map(|(p, psi)| (p / total, psi))
        .collect();
    Decomposition::new(members)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{make_maxcorr_rank2, make_mes};
    use crate::optimize::random_density_matrix;
    use approx::assert_relative_eq;

    fn opts() -> OptimizerOptions {
        OptimizerOptions::default()
    }

    #[test]
    fn pure_input_roof_is_pure_measure() {
        let bell = make_mes::<f64>(2).unwrap().projector();
        let res = convex_roof(&bell, RoofKind::Linear, &opts()).unwrap();
        assert_relative_eq!(res.value, 0.5, epsilon = 1e-9);
        assert_eq!(res.decomposition.members().len(), 1);
        let res = convex_roof(&bell, RoofKind::Logarithmic, &opts()).unwrap();
        assert_relative_eq!(res.value, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn maxcorr_linear_roof_matches_closed_form() {
        // G^c = 1 - sum q_i / block_i
        let rho = make_maxcorr_rank2(1, 3, 0.5).unwrap();
        let res = convex_roof(&rho, RoofKind::Linear, &opts()).unwrap();
        let expect: f64 = 1.0 - (0.5 / 1.0 + 0.5 / 3.0);
        assert!((res.value - expect).abs() < 2e-5, "got {} want {}", res.value, expect);
        res.decomposition.validate_against(&rho).unwrap();
    }

    #[test]
    fn maxcorr_log_roof_three_cases() {
        // representative parameter in each closed-form regime
        let cases = [
            (2usize, 2usize, 0.5f64, 1.0f64),                                  // equal blocks
            (1, 3, 0.95, (1.0f64 / 0.95).log2()),                              // superposition pair
            (1, 3, 0.5, 3f64.log2() - 0.5 * 3.0 * std::f64::consts::LOG2_E / std::f64::consts::E),
        ];
        for (m, n, q, expect) in cases {
            let rho = make_maxcorr_rank2(m, n, q).unwrap();
            let res = convex_roof(&rho, RoofKind::Logarithmic, &opts()).unwrap();
            assert!(
                (res.value - expect).abs() < 5e-5,
                "({m},{n},{q}): got {} want {expect}",
                res.value
            );
        }
    }

    #[test]
    fn equal_overlap_members_share_overlap() {
        let space = MultipartiteSpace::qubits(2).unwrap();
        let rho = random_density_matrix::<f64>(&space, 3, 7);
        let phi = crate::optimize::random_pure_state::<f64>(&space, 9);
        let g = rho.expectation(&phi);
        let dec = equal_overlap_decomposition(&rho, &phi).unwrap();
        assert_eq!(dec.members().len(), 3);
        for (_, psi) in dec.members() {
            assert_relative_eq!(phi.inner(psi).norm_sqr(), g, epsilon = 1e-9);
        }
        dec.validate_against(&rho).unwrap();
    }

    #[test]
    fn equal_overlap_qubit_example() {
        // diag(1/2, 1/2) against |0>: two members, both with overlap 1/2
        let space = MultipartiteSpace::qubits(2).unwrap();
        let rho = DensityMatrix::mixture(&[
            (0.5, PureState::basis_state(space.clone(), &[0, 0]).unwrap().projector()),
            (0.5, PureState::basis_state(space.clone(), &[0, 1]).unwrap().projector()),
        ])
        .unwrap();
        let phi = PureState::basis_state(space, &[0, 0]).unwrap();
        let dec = equal_overlap_decomposition(&rho, &phi).unwrap();
        assert_eq!(dec.members().len(), 2);
        for (p, psi) in dec.members() {
            assert_relative_eq!(*p, 0.5, epsilon = 1e-9);
            assert_relative_eq!(phi.inner(psi).norm_sqr(), 0.5, epsilon = 1e-9);
        }
    }

    #[test]
    fn fidelity_extension_on_separable_state() {
        let space = MultipartiteSpace::qubits(2).unwrap();
        let rho = DensityMatrix::mixture(&[
            (0.5, PureState::basis_state(space.clone(), &[0, 0]).unwrap().projector()),
            (0.5, PureState::basis_state(space, &[1, 1]).unwrap().projector()),
        ])
        .unwrap();
        let fe = fidelity_extension(&rho, &opts()).unwrap();
        assert!(fe.g_f < 1e-8, "separable state got g_f = {}", fe.g_f);
        assert!(fe.g_f_log < 1e-7);
        assert!(fe.lambda2_f > 1.0 - 1e-8);
        assert!(fe.css_fidelity > 1.0 - 1e-6);
    }

    #[test]
    fn roof_upper_bounds_hold_against_trace_product_value() {
        // the equal-overlap seed pins the roof below 1 - lambda2m exactly
        let space = MultipartiteSpace::qubits(2).unwrap();
        for seed in 0..3u64 {
            let rho = random_density_matrix::<f64>(&space, 4, 100 + seed);
            let m = crate::mixed::lambda2_mixed(&rho, &opts()).unwrap();
            let (lin, log) = convex_roof_pair(&rho, &opts()).unwrap();
            assert!(lin.value <= 1.0 - m.lambda2m + 5e-6);
            assert!(log.value <= -m.lambda2m.log2() + 5e-6);
            assert!(lin.value <= log.value + 1e-8);
        }
    }
}
