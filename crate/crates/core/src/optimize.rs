//! Shared optimizer plumbing: options, seeded restart streams, random state
//! generation and the alternating single-party update used by the
//! product-overlap maximizers.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{eigh, top_index};
use crate::scalar::{r, Real, C};
use crate::space::{DensityMatrix, MultipartiteSpace, ProductState, PureState};

/// Knobs shared by every multistart optimizer in the crate.
///
/// Exposed on the CLI as `--restarts --max-sweeps --tol --seed`.
#[derive(Debug, Clone, Copy)]
pub struct OptimizerOptions {
    /// Number of random initializations.
    pub restarts: u32,
    /// Cap on alternating sweeps per restart.
    pub max_sweeps: u32,
    /// Stall tolerance on objective improvement.
    pub tol: f64,
    /// Seed for the deterministic restart streams.
    pub seed: u64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            restarts: 32,
            max_sweeps: 10_000,
            tol: 1e-12,
            seed: 42,
        }
    }
}

impl OptimizerOptions {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    /// Reduced-effort copy for inner loops; certification uses the original.
    pub(crate) fn light(&self, restarts: u32) -> Self {
        Self {
            restarts,
            max_sweeps: self.max_sweeps.min(500),
            ..*self
        }
    }
}

/// Independent deterministic generator for restart `idx` of stream `seed`.
/// SplitMix-style mixing so streams stay decorrelated.
pub(crate) fn restart_rng(seed: u64, idx: u64) -> ChaCha8Rng {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(idx.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}

pub(crate) fn random_unit<T: Real>(rng: &mut ChaCha8Rng, d: usize) -> DVector<C<T>> {
    loop {
        let v = DVector::from_fn(d, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C::new(r::<T>(re), r::<T>(im))
        });
        let n = v.norm();
        if n > r(1e-6) {
            return v.map(|a| a / C::new(n, T::zero()));
        }
    }
}

pub(crate) fn random_product<T: Real>(
    rng: &mut ChaCha8Rng,
    dims: &[usize],
) -> Vec<DVector<C<T>>> {
    dims.iter().map(|&d| random_unit(rng, d)).collect()
}

/// A pure state with normalized complex Gaussian amplitudes.
pub fn random_pure_state<T: Real>(space: &MultipartiteSpace, seed: u64) -> PureState<T> {
    let mut rng = restart_rng(seed, 0);
    let amps = random_unit(&mut rng, space.total_dim());
    PureState::new(space.clone(), amps).expect("normalized by construction")
}

/// A random density matrix `G G^dag / Tr` with `G` complex Gaussian of shape
/// `dim x rank`; `rank = dim` gives a full-rank Hilbert-Schmidt-like draw.
pub fn random_density_matrix<T: Real>(
    space: &MultipartiteSpace,
    rank: usize,
    seed: u64,
) -> DensityMatrix<T> {
    let mut rng = restart_rng(seed, 1);
    let dim = space.total_dim();
    let rank = rank.clamp(1, dim);
    let g = DMatrix::from_fn(dim, rank, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C::new(r::<T>(re), r::<T>(im))
    });
    let mut m = &g * g.adjoint();
    let tr = m.trace().re;
    m /= C::new(tr, T::zero());
    DensityMatrix::new(space.clone(), m).expect("valid by construction")
}

/// Multiplies each factor by a phase making its largest-magnitude entry real
/// and nonnegative, so certificates print identically across runs.
pub(crate) fn canonicalize_factors<T: Real>(factors: &mut [DVector<C<T>>]) {
    for f in factors.iter_mut() {
        let mut best = 0;
        let mut best_mag = T::zero();
        for (i, a) in f.iter().enumerate() {
            let m = a.norm_sqr();
            if m > best_mag {
                best_mag = m;
                best = i;
            }
        }
        let a = f[best];
        let mag = a.norm_sqr().sqrt();
        if mag > T::zero() {
            let phase = C::new(a.re / mag, -a.im / mag);
            for x in f.iter_mut() {
                *x *= phase;
            }
        }
    }
}

/// Kronecker product of a slice of factors; the empty product is the scalar 1.
fn kron_all<T: Real>(factors: &[DVector<C<T>>]) -> DVector<C<T>> {
    let mut out = DVector::from_element(1, C::new(T::one(), T::zero()));
    for f in factors {
        out = out.kronecker(f);
    }
    out
}

/// Contraction of `psi` against all factors except party `j`:
/// `c[x] = sum over rest of conj(prod) * psi[(left, x, right)]`.
/// The optimal factor for party `j` is `c / |c|`.
pub(crate) fn contract_pure<T: Real>(
    psi: &PureState<T>,
    factors: &[DVector<C<T>>],
    j: usize,
) -> DVector<C<T>> {
    let dims = psi.space().dims();
    let left = kron_all(&factors[..j]);
    let right = kron_all(&factors[j + 1..]);
    let dj = dims[j];
    let stride = right.len();
    let mut c = DVector::from_element(dj, C::new(T::zero(), T::zero()));
    let amps = psi.amplitudes();
    for l in 0..left.len() {
        let lc = left[l].conj();
        let base_l = l * dj * stride;
        for x in 0..dj {
            let base = base_l + x * stride;
            let mut acc = C::new(T::zero(), T::zero());
            for rr in 0..stride {
                acc += right[rr].conj() * amps[base + rr];
            }
            c[x] += lc * acc;
        }
    }
    c
}

/// The Hermitian operator seen by party `j` when all other factors are fixed:
/// `M[x, y] = <u_x| rho |u_y>` with `u_x = left (x) e_x (x) right`.
pub(crate) fn contract_mixed<T: Real>(
    rho: &DensityMatrix<T>,
    factors: &[DVector<C<T>>],
    j: usize,
) -> DMatrix<C<T>> {
    let dims = rho.space().dims();
    let left = kron_all(&factors[..j]);
    let right = kron_all(&factors[j + 1..]);
    let dj = dims[j];
    let dim = rho.space().total_dim();
    let stride = right.len();
    // columns u_x
    let mut u = DMatrix::from_element(dim, dj, C::new(T::zero(), T::zero()));
    for l in 0..left.len() {
        for x in 0..dj {
            let base = (l * dj + x) * stride;
            for rr in 0..stride {
                u[(base + rr, x)] = left[l] * right[rr];
            }
        }
    }
    u.adjoint() * rho.matrix() * u
}

/// One full alternating maximization of `<prod|psi>|^2` from a given start.
/// Returns `(value, factors, converged, sweeps)`.
pub(crate) fn hopm_pure<T: Real>(
    psi: &PureState<T>,
    mut factors: Vec<DVector<C<T>>>,
    opts: &OptimizerOptions,
) -> (T, Vec<DVector<C<T>>>, bool, u32) {
    let n = factors.len();
    let tol = r::<T>(opts.tol);
    let mut last = T::zero();
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut val = last;
        for j in 0..n {
            let c = contract_pure(psi, &factors, j);
            let norm = c.norm();
            if norm > r(1e-150) {
                factors[j] = c.map(|a| a / C::new(norm, T::zero()));
                val = norm * norm;
            }
        }
        if val - last < tol {
            converged = true;
            break;
        }
        last = val;
    }
    let prod = ProductState::new(factors.clone()).expect("unit factors");
    let val = crate::space::product_overlap(&prod, psi).norm_sqr();
    (val, factors, converged, sweeps)
}

/// One full alternating maximization of `<prod|rho|prod>` via per-party top
/// eigenvectors. Returns `(value, factors, converged, sweeps)`.
pub(crate) fn alt_max_mixed<T: Real>(
    rho: &DensityMatrix<T>,
    mut factors: Vec<DVector<C<T>>>,
    opts: &OptimizerOptions,
) -> (T, Vec<DVector<C<T>>>, bool, u32) {
    let n = factors.len();
    let tol = r::<T>(opts.tol);
    let mut last = T::zero();
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut val = last;
        for j in 0..n {
            let m = contract_mixed(rho, &factors, j);
            let (vals, vecs) = eigh(&m);
            let top = vals.len() - 1;
            // exact ties in the ascending spectrum: take the first column
            // attaining the top value, keeping the choice deterministic
            let idx = if vals[top_index(&vals)] == vals[top] {
                top_index(&vals)
            } else {
                top
            };
            factors[j] = vecs.column(idx).into_owned();
            val = vals[idx];
        }
        if val - last < tol {
            converged = true;
            break;
        }
        last = val;
    }
    // recompute from the certificate
    let prod = ProductState::normalized(factors.clone()).expect("unit factors");
    let psi = crate::space::tensor_assemble(&prod).expect("consistent dims");
    let val = rho.expectation(&psi);
    (val, prod.factors().to_vec(), converged, sweeps)
}
