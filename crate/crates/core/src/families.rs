//! Constructors and closed-form evaluators for the analyzed state families
//! (maximally entangled, isotropic, maximally correlated, two-qubit), and the
//! classifier that sorts states into the pure/mixed, separable/entangled
//! partition with its three-way split of the mixed entangled set.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::eigh;
use crate::optimize::OptimizerOptions;
use crate::scalar::{cabs, r, Real, C};
use crate::space::{DensityMatrix, MultipartiteSpace, PureState};

// ---------------------------------------------------------------------------
// basic pure families

/// `d`-level bipartite maximally entangled state `(1/sqrt d) sum |ii>`.
pub fn make_mes<T: Real>(d: usize) -> Result<PureState<T>> {
    make_ghz(2, d)
}

/// `n`-party `d`-level GHZ state `(1/sqrt d) sum |i...i>`.
pub fn make_ghz<T: Real>(n: usize, d: usize) -> Result<PureState<T>> {
    if n < 2 || d < 2 {
        return Err(Error::InvalidParameter("GHZ needs n >= 2, d >= 2".into()));
    }
    let space = MultipartiteSpace::new(vec![d; n])?;
    let amp = T::one() / r::<T>(d as f64).sqrt();
    let mut v = DVector::from_element(space.total_dim(), C::new(T::zero(), T::zero()));
    for i in 0..d {
        v[space.ravel(&vec![i; n])] = C::new(amp, T::zero());
    }
    PureState::new(space, v)
}

/// `n`-qubit W state: uniform superposition of single-excitation basis states.
pub fn make_w<T: Real>(n: usize) -> Result<PureState<T>> {
    if n < 2 {
        return Err(Error::InvalidParameter("W needs n >= 2".into()));
    }
    let space = MultipartiteSpace::qubits(n)?;
    let amp = T::one() / r::<T>(n as f64).sqrt();
    let mut v = DVector::from_element(space.total_dim(), C::new(T::zero(), T::zero()));
    for j in 0..n {
        v[1 << (n - 1 - j)] = C::new(amp, T::zero());
    }
    PureState::new(space, v)
}

/// `n`-qubit Dicke state with `k` excitations.
pub fn make_dicke<T: Real>(n: usize, k: usize) -> Result<PureState<T>> {
    if n < 2 || k > n {
        return Err(Error::InvalidParameter("Dicke needs n >= 2, k <= n".into()));
    }
    let space = MultipartiteSpace::qubits(n)?;
    let mut hits = Vec::new();
    for b in 0..space.total_dim() {
        if (b as u32).count_ones() as usize == k {
            hits.push(b);
        }
    }
    let amp = T::one() / r::<T>(hits.len() as f64).sqrt();
    let mut v = DVector::from_element(space.total_dim(), C::new(T::zero(), T::zero()));
    for b in hits {
        v[b] = C::new(amp, T::zero());
    }
    PureState::new(space, v)
}

// ---------------------------------------------------------------------------
// isotropic states

/// Isotropic family `p 1/d^2 + (1-p) |Psi><Psi|`, held canonically by the
/// overlap parameter `F = <Psi|rho|Psi>`, with `p = d^2 (1-F) / (d^2 - 1)`.
#[derive(Debug, Clone, Copy)]
pub struct IsotropicSpec<T: Real> {
    pub d: usize,
    pub fidelity: T,
}

impl<T: Real> IsotropicSpec<T> {
    pub fn from_fidelity(d: usize, fidelity: T) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidParameter("isotropic needs d >= 2".into()));
        }
        if fidelity < T::zero() || fidelity > T::one() {
            return Err(Error::InvalidParameter("F must lie in [0, 1]".into()));
        }
        Ok(Self { d, fidelity })
    }

    pub fn from_p(d: usize, p: T) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidParameter("isotropic needs d >= 2".into()));
        }
        if p < T::zero() || p > T::one() {
            return Err(Error::InvalidParameter("p must lie in [0, 1]".into()));
        }
        let d2 = r::<T>((d * d) as f64);
        let fidelity = T::one() - p * (d2 - T::one()) / d2;
        Ok(Self { d, fidelity })
    }

    pub fn p(&self) -> T {
        let d2 = r::<T>((self.d * self.d) as f64);
        d2 / (d2 - T::one()) * (T::one() - self.fidelity)
    }
}

pub fn make_isotropic<T: Real>(spec: &IsotropicSpec<T>) -> DensityMatrix<T> {
    let d = spec.d;
    let p = spec.p();
    let mes = make_mes::<T>(d).expect("d >= 2");
    let dim = d * d;
    let mut m = mes.projector().matrix().scale(T::one() - p);
    let iso = p / r::<T>(dim as f64);
    for i in 0..dim {
        m[(i, i)] += C::new(iso, T::zero());
    }
    DensityMatrix::trusted(mes.space().clone(), m)
}

/// Closed-form measure values of an isotropic state.
#[derive(Debug, Clone, Copy)]
pub struct IsoClosedForms<T: Real> {
    pub separable: bool,
    pub lambda2_m: T,
    pub lambda2_f: T,
    pub g_fc: T,
    pub g_f_l: T,
    pub g_c_l: T,
    pub g_m: T,
    pub g_m_l: T,
    pub g_t: T,
}

pub fn iso_closed_forms<T: Real>(spec: &IsotropicSpec<T>) -> IsoClosedForms<T> {
    let d = r::<T>(spec.d as f64);
    let f = spec.fidelity;
    let p = spec.p();
    let separable = f <= T::one() / d;
    let lambda2_m = p / (d * d) + (T::one() - p) / d;
    let lambda2_f = if separable {
        T::one()
    } else {
        ((f.sqrt() + ((d - T::one()) * (T::one() - f)).sqrt()).powi(2) / d).min(T::one())
    };
    let g_fc = T::one() - lambda2_f;
    let g_f_l = -lambda2_f.log2();
    let g_f_l = if g_f_l < T::zero() { T::zero() } else { g_f_l };
    IsoClosedForms {
        separable,
        lambda2_m,
        lambda2_f,
        g_fc,
        g_f_l,
        g_c_l: g_f_l,
        g_m: T::one() - lambda2_m,
        g_m_l: -lambda2_m.log2(),
        g_t: crate::appendix::gt_isotropic_closed(spec.d, p).expect("valid parameters"),
    }
}

// ---------------------------------------------------------------------------
// maximally correlated states

/// Block mixture of maximally entangled states: partition `0 = n_0 < ... <
/// n_r = d` of the diagonal `|kk>` and weights `q_i` per block.
#[derive(Debug, Clone)]
pub struct MaxCorrSpec<T: Real> {
    pub d: usize,
    pub partition: Vec<usize>,
    pub weights: Vec<T>,
}

impl<T: Real> MaxCorrSpec<T> {
    pub fn new(d: usize, partition: Vec<usize>, weights: Vec<T>) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidParameter("need d >= 2".into()));
        }
        if partition.first() != Some(&0) || partition.last() != Some(&d) {
            return Err(Error::InvalidParameter(
                "partition must run from 0 to d".into(),
            ));
        }
        if partition.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "partition must be strictly increasing".into(),
            ));
        }
        let blocks = partition.len() - 1;
        if weights.len() != blocks {
            return Err(Error::InvalidParameter(
                "one weight per partition block".into(),
            ));
        }
        if weights.iter().any(|&q| q <= T::zero() || q >= T::one()) && blocks > 1 {
            return Err(Error::InvalidParameter(
                "weights must lie in the open interval (0, 1)".into(),
            ));
        }
        let sum: T = weights.iter().fold(T::zero(), |a, &b| a + b);
        if (sum - T::one()).abs() > r(1e-12) {
            return Err(Error::InvalidParameter(format!("weights sum to {sum}")));
        }
        Ok(Self {
            d,
            partition,
            weights,
        })
    }

    /// Rank-2 spec `q |psi_m> + (1-q) |psi_n>` on `d = m + n` levels.
    pub fn rank2(m: usize, n: usize, q: T) -> Result<Self> {
        Self::new(m + n, vec![0, m, m + n], vec![q, T::one() - q])
    }

    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.partition.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// The block MES `|Theta_i>`.
    pub fn block_state(&self, i: usize) -> PureState<T> {
        let space = MultipartiteSpace::bipartite(self.d).expect("d >= 2");
        let (lo, hi) = (self.partition[i], self.partition[i + 1]);
        let amp = T::one() / r::<T>((hi - lo) as f64).sqrt();
        let mut v = DVector::from_element(space.total_dim(), C::new(T::zero(), T::zero()));
        for k in lo..hi {
            v[k * self.d + k] = C::new(amp, T::zero());
        }
        PureState::new(space, v).expect("normalized")
    }
}

pub fn make_maxcorr<T: Real>(spec: &MaxCorrSpec<T>) -> DensityMatrix<T> {
    let space = MultipartiteSpace::bipartite(spec.d).expect("valid");
    let dim = space.total_dim();
    let mut m = DMatrix::from_element(dim, dim, C::new(T::zero(), T::zero()));
    for (i, &q) in spec.weights.iter().enumerate() {
        m += spec.block_state(i).projector().matrix().scale(q);
    }
    DensityMatrix::trusted(space, m)
}

/// Convenience rank-2 constructor.
pub fn make_maxcorr_rank2<T: Real>(m: usize, n: usize, q: T) -> Result<DensityMatrix<T>> {
    Ok(make_maxcorr(&MaxCorrSpec::rank2(m, n, q)?))
}

/// The logarithmic roof of a maximally correlated state, when closed-form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaxCorrGcl<T: Real> {
    Exact(T),
    /// Rank above 2 with unequal blocks: no closed form, optimizer only.
    OptimizerOnly,
}

/// Closed-form values for a maximally correlated state.
#[derive(Debug, Clone)]
pub struct MaxCorrClosedForms<T: Real> {
    /// `1 - sum q_i / block_i`, the linear roof and fidelity extension.
    pub g_c: T,
    pub g_f_l: T,
    pub lambda2_m: T,
    pub g_m_l: T,
    pub g_c_l: MaxCorrGcl<T>,
    /// Optimal decomposition for the logarithmic roof, when known (rank <= 2
    /// or equal blocks: the spectral blocks; rank-2 superposition regimes:
    /// the closed-form pair or triple).
    pub optimal_log_decomposition: Option<crate::roof::Decomposition<T>>,
}

pub fn maxcorr_closed_forms<T: Real>(spec: &MaxCorrSpec<T>) -> MaxCorrClosedForms<T> {
    let sizes = spec.block_sizes();
    let sum_term: T = spec
        .weights
        .iter()
        .zip(&sizes)
        .fold(T::zero(), |a, (&q, &s)| a + q / r::<T>(s as f64));
    let lambda2_m = spec
        .weights
        .iter()
        .zip(&sizes)
        .map(|(&q, &s)| q / r::<T>(s as f64))
        .fold(T::zero(), |a, b| if b > a { b } else { a });
    let g_f_l = (-sum_term.log2()).max(T::zero());
    let equal_blocks = sizes.windows(2).all(|w| w[0] == w[1]);

    let (g_c_l, opt_dec) = if spec.rank() == 1 {
        let gl = r::<T>(sizes[0] as f64).log2();
        (
            MaxCorrGcl::Exact(gl),
            spectral_decomposition_of(spec),
        )
    } else if equal_blocks {
        (MaxCorrGcl::Exact(g_f_l), spectral_decomposition_of(spec))
    } else if spec.rank() == 2 {
        let (value, dec) = rank2_log_roof(spec, &sizes);
        (MaxCorrGcl::Exact(value), dec)
    } else {
        (MaxCorrGcl::OptimizerOnly, None)
    };

    MaxCorrClosedForms {
        g_c: T::one() - sum_term,
        g_f_l,
        lambda2_m,
        g_m_l: (-lambda2_m.log2()).max(T::zero()),
        g_c_l,
        optimal_log_decomposition: opt_dec,
    }
}

fn spectral_decomposition_of<T: Real>(
    spec: &MaxCorrSpec<T>,
) -> Option<crate::roof::Decomposition<T>> {
    let members: Vec<(T, PureState<T>)> = spec
        .weights
        .iter()
        .enumerate()
        .map(|(i, &q)| (q, spec.block_state(i)))
        .collect();
    crate::roof::Decomposition::new(members).ok()
}

/// The rank-2 logarithmic roof split into its three closed-form regimes,
/// with the achieving decomposition.
fn rank2_log_roof<T: Real>(
    spec: &MaxCorrSpec<T>,
    sizes: &[usize],
) -> (T, Option<crate::roof::Decomposition<T>>) {
    // normalize to block sizes m <= n with q the weight of the m block
    let (mi, ni) = if sizes[0] <= sizes[1] { (0, 1) } else { (1, 0) };
    let m = sizes[mi];
    let n = sizes[ni];
    let q = spec.weights[mi];
    let psi_m = spec.block_state(mi);
    let psi_n = spec.block_state(ni);

    let fhs = crate::appendix::fhs_closed(m, n, q);
    let value = fhs.value;

    let dec = match fhs.case {
        crate::appendix::FhsCase::Origin => spectral_decomposition_of(spec),
        crate::appendix::FhsCase::HBoundary => {
            // equal-weight superpositions sqrt(q) psi_m +- sqrt(1-q) psi_n
            superposition_pair(&psi_m, &psi_n, q, T::one() - q)
                .map(|(a, b)| {
                    crate::roof::Decomposition::new(vec![(r(0.5), a), (r(0.5), b)]).ok()
                })
                .unwrap_or(None)
        }
        crate::appendix::FhsCase::HInterior => {
            // {1 - nq/(em), psi_n} plus the pair with weight nq/(2em) each
            let e = r::<T>(std::f64::consts::E);
            let nn = r::<T>(n as f64);
            let mm = r::<T>(m as f64);
            let w_pair = nn * q / (e * mm);
            let a2 = e * mm / nn;
            superposition_pair(&psi_m, &psi_n, a2, T::one() - a2)
                .map(|(a, b)| {
                    crate::roof::Decomposition::new(vec![
                        (T::one() - w_pair, psi_n.clone()),
                        (w_pair / r(2.0), a),
                        (w_pair / r(2.0), b),
                    ])
                    .ok()
                })
                .unwrap_or(None)
        }
    };
    (value, dec)
}

fn superposition_pair<T: Real>(
    psi_m: &PureState<T>,
    psi_n: &PureState<T>,
    wm: T,
    wn: T,
) -> Option<(PureState<T>, PureState<T>)> {
    let plus = psi_m.amplitudes().scale(wm.sqrt()) + psi_n.amplitudes().scale(wn.sqrt());
    let minus = psi_m.amplitudes().scale(wm.sqrt()) - psi_n.amplitudes().scale(wn.sqrt());
    let space = psi_m.space().clone();
    Some((
        PureState::normalized(space.clone(), plus).ok()?,
        PureState::normalized(space, minus).ok()?,
    ))
}

// ---------------------------------------------------------------------------
// two qubits

/// Closed-form two-qubit values via the concurrence.
#[derive(Debug, Clone, Copy)]
pub struct TwoQubitForms<T: Real> {
    pub concurrence: T,
    /// `G^c_l = G^f_l = -log2((1 + sqrt(1 - C^2)) / 2)`.
    pub g_l: T,
    /// `G^c = G^f = (1 - sqrt(1 - C^2)) / 2`.
    pub g: T,
}

/// Wootters concurrence by the spin-flip spectrum, computed through the
/// Hermitian similarity `sqrt(rho) rho~ sqrt(rho)` with negatives clipped.
pub fn concurrence<T: Real>(rho: &DensityMatrix<T>) -> Result<T> {
    if rho.space().dims() != [2, 2] {
        return Err(Error::DimensionMismatch("concurrence needs 2 x 2".into()));
    }
    let m = rho.matrix();
    // (sigma_y (x) sigma_y) conj(rho) (sigma_y (x) sigma_y)
    let yy = {
        let mut yy = DMatrix::from_element(4, 4, C::new(T::zero(), T::zero()));
        yy[(0, 3)] = C::new(-T::one(), T::zero());
        yy[(1, 2)] = C::new(T::one(), T::zero());
        yy[(2, 1)] = C::new(T::one(), T::zero());
        yy[(3, 0)] = C::new(-T::one(), T::zero());
        yy
    };
    let tilde = &yy * m.map(|z| z.conj()) * &yy;
    let sq = crate::linalg::hermitian_sqrt(m);
    let h = &sq * &tilde * &sq;
    let (vals, _) = eigh(&h);
    // eigensolver noise of order 1e-15 turns into 3e-8 after the square
    // root, so clip the spin-flip spectrum a decade above it
    let mut roots: Vec<T> = vals
        .iter()
        .map(|&v| if v < r(1e-13) { T::zero() } else { v.sqrt() })
        .collect();
    roots.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let c = roots[0] - roots[1] - roots[2] - roots[3];
    Ok(if c > T::zero() { c } else { T::zero() })
}

pub fn two_qubit_closed_forms<T: Real>(rho: &DensityMatrix<T>) -> Result<TwoQubitForms<T>> {
    let c = concurrence(rho)?;
    let root = (T::one() - c * c).max(T::zero()).sqrt();
    let g_l = (-((T::one() + root) / r(2.0)).log2()).max(T::zero());
    let g = (T::one() - root) / r(2.0);
    Ok(TwoQubitForms {
        concurrence: c,
        g_l,
        g,
    })
}

// ---------------------------------------------------------------------------
// classification

/// Partition verdict: pure/mixed and separable/entangled, with the mixed
/// entangled set split by which logarithmic measures coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassLabel {
    /// Pure separable.
    A,
    /// Pure entangled.
    B,
    /// Genuinely mixed separable.
    C,
    /// Mixed entangled, all three logarithmic measures distinct.
    D1,
    /// Mixed entangled, fidelity and roof logs coincide.
    D2,
    /// Mixed entangled, roof and trace inner-product logs coincide.
    D3,
}

impl std::fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ClassLabel::A => "A",
            ClassLabel::B => "B",
            ClassLabel::C => "C",
            ClassLabel::D1 => "D1",
            ClassLabel::D2 => "D2",
            ClassLabel::D3 => "D3",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClassVerdict {
    Label(ClassLabel),
    /// Certified bounds cannot separate the candidate labels at tolerance.
    Undecidable(String),
}

impl std::fmt::Display for ClassVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ClassVerdict::Label(l) => write!(f, "{l}"),
            ClassVerdict::Undecidable(why) => write!(f, "undecidable ({why})"),
        }
    }
}

/// What the classifier saw: the three logarithmic values it could obtain and
/// the path that decided.
#[derive(Debug, Clone)]
pub struct ClassEvidence<T: Real> {
    pub g_f_l: Option<T>,
    pub g_c_l: Option<T>,
    pub g_m_l: Option<T>,
    pub path: String,
}

#[derive(Debug, Clone)]
pub struct Classification<T: Real> {
    pub verdict: ClassVerdict,
    pub evidence: ClassEvidence<T>,
}

/// Tolerance on logarithmic-measure gaps; smaller gaps without an analytic
/// path yield an undecidable verdict rather than a guess.
pub const CLASSIFY_TOL: f64 = 1e-6;

/// Purity threshold separating pure from genuinely mixed.
pub const PURITY_TOL: f64 = 1e-9;

/// Analytic classification of a maximally correlated spec.
pub fn classify_maxcorr<T: Real>(spec: &MaxCorrSpec<T>) -> Classification<T> {
    let sizes = spec.block_sizes();
    let forms = maxcorr_closed_forms(spec);
    let evidence = |g_c_l: Option<T>| ClassEvidence {
        g_f_l: Some(forms.g_f_l),
        g_c_l,
        g_m_l: Some(forms.g_m_l),
        path: "maximally-correlated closed form".into(),
    };
    // all singleton blocks: a classical diagonal mixture, separable
    if sizes.iter().all(|&s| s == 1) {
        let label = if spec.rank() == 1 {
            ClassLabel::A
        } else {
            ClassLabel::C
        };
        return Classification {
            verdict: ClassVerdict::Label(label),
            evidence: evidence(Some(T::zero())),
        };
    }
    if spec.rank() == 1 {
        return Classification {
            verdict: ClassVerdict::Label(ClassLabel::B),
            evidence: evidence(match forms.g_c_l {
                MaxCorrGcl::Exact(v) => Some(v),
                MaxCorrGcl::OptimizerOnly => None,
            }),
        };
    }
    let equal_blocks = sizes.windows(2).all(|w| w[0] == w[1]);
    if equal_blocks {
        return Classification {
            verdict: ClassVerdict::Label(ClassLabel::D2),
            evidence: evidence(Some(forms.g_f_l)),
        };
    }
    if spec.rank() == 2 {
        let (mi, ni) = if sizes[0] <= sizes[1] { (0, 1) } else { (1, 0) };
        let (m, n) = (sizes[mi] as f64, sizes[ni] as f64);
        let q = spec.weights[mi];
        let label = if m / n < 1.0 / std::f64::consts::E && q >= r(std::f64::consts::E * m / n) {
            ClassLabel::D3
        } else {
            ClassLabel::D1
        };
        let g_c_l = match forms.g_c_l {
            MaxCorrGcl::Exact(v) => Some(v),
            MaxCorrGcl::OptimizerOnly => None,
        };
        return Classification {
            verdict: ClassVerdict::Label(label),
            evidence: evidence(g_c_l),
        };
    }
    Classification {
        verdict: ClassVerdict::Undecidable(
            "rank > 2 with unequal blocks has no closed-form roof".into(),
        ),
        evidence: evidence(None),
    }
}

/// Analytic classification of an isotropic spec.
pub fn classify_isotropic<T: Real>(spec: &IsotropicSpec<T>) -> Classification<T> {
    let forms = iso_closed_forms(spec);
    let evidence = ClassEvidence {
        g_f_l: Some(forms.g_f_l),
        g_c_l: Some(forms.g_c_l),
        g_m_l: Some(forms.g_m_l),
        path: "isotropic closed form".into(),
    };
    let label = if spec.fidelity >= T::one() - r(1e-12) {
        ClassLabel::B
    } else if forms.separable {
        ClassLabel::C
    } else {
        ClassLabel::D2
    };
    Classification {
        verdict: ClassVerdict::Label(label),
        evidence,
    }
}

/// Recognizes an isotropic state up to 1e-10 reconstruction error.
pub fn detect_isotropic<T: Real>(rho: &DensityMatrix<T>) -> Option<IsotropicSpec<T>> {
    let dims = rho.space().dims();
    if dims.len() != 2 || dims[0] != dims[1] {
        return None;
    }
    let d = dims[0];
    let mes = make_mes::<T>(d).ok()?;
    let f = crate::pure::clamp_prob(rho.expectation(&mes));
    let spec = IsotropicSpec::from_fidelity(d, f).ok()?;
    let candidate = make_isotropic(&spec);
    let m = rho.matrix() - candidate.matrix();
    let dev = m.iter().map(|z| cabs(*z)).fold(T::zero(), |a, b| a.max(b));
    (dev < r(1e-10)).then_some(spec)
}

/// Recognizes a maximally correlated state up to relabeling of the diagonal
/// blocks (a local permutation, which no measure here sees). Returns the
/// detected spec with blocks made contiguous.
pub fn detect_maxcorr<T: Real>(rho: &DensityMatrix<T>) -> Option<MaxCorrSpec<T>> {
    let dims = rho.space().dims();
    if dims.len() != 2 || dims[0] != dims[1] {
        return None;
    }
    let d = dims[0];
    let tol = r::<T>(1e-10);
    // support must lie on |kk><ll|
    for a in 0..d * d {
        for b in 0..d * d {
            let on_diag_pair = a % d == a / d && b % d == b / d;
            if !on_diag_pair && cabs(rho.matrix()[(a, b)]) > tol {
                return None;
            }
        }
    }
    let corr = DMatrix::<C<T>>::from_fn(d, d, |a, b| rho.matrix()[(a * d + a, b * d + b)]);
    // connected components of the nonzero pattern
    let mut comp = vec![usize::MAX; d];
    let mut n_comp = 0;
    for start in 0..d {
        if comp[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        comp[start] = n_comp;
        while let Some(v) = stack.pop() {
            for w in 0..d {
                if comp[w] == usize::MAX && cabs(corr[(v, w)]) > tol {
                    comp[w] = n_comp;
                    stack.push(w);
                }
            }
        }
        n_comp += 1;
    }
    // each block must be rank one with equal-magnitude entries q_i / s_i
    let mut sizes = vec![0usize; n_comp];
    for &c in &comp {
        sizes[c] += 1;
    }
    let mut weights = vec![T::zero(); n_comp];
    for a in 0..d {
        weights[comp[a]] += corr[(a, a)].re;
    }
    if weights.iter().any(|&q| q <= r(1e-12)) {
        return None;
    }
    for a in 0..d {
        for b in 0..d {
            if comp[a] == comp[b] {
                let expect = weights[comp[a]] / r::<T>(sizes[comp[a]] as f64);
                if (cabs(corr[(a, b)]) - expect).abs() > r(1e-9) {
                    return None;
                }
            }
        }
    }
    let mut partition = vec![0usize];
    for s in &sizes {
        partition.push(partition.last().unwrap() + s);
    }
    MaxCorrSpec::new(d, partition, weights).ok()
}

/// Classifies a state into the partition, preferring analytic paths
/// (two-qubit concurrence, isotropic and maximally correlated detection) and
/// falling back to certified optimizer values with tolerance
/// [`CLASSIFY_TOL`]; gaps inside tolerance without an analytic path come
/// back undecidable.
pub fn classify<T: Real>(
    rho: &DensityMatrix<T>,
    opts: &OptimizerOptions,
) -> Result<Classification<T>> {
    let pure = rho.purity() >= T::one() - r(PURITY_TOL);
    let ctol = r::<T>(CLASSIFY_TOL);

    if let Some(spec) = detect_maxcorr(rho) {
        return Ok(classify_maxcorr(&spec));
    }
    if let Some(spec) = detect_isotropic(rho) {
        return Ok(classify_isotropic(&spec));
    }
    if rho.space().dims() == [2, 2] {
        let forms = two_qubit_closed_forms(rho)?;
        let entangled = forms.concurrence > ctol;
        let label = match (pure, entangled) {
            (true, false) => ClassLabel::A,
            (true, true) => ClassLabel::B,
            (false, false) => ClassLabel::C,
            // two-qubit mixed entangled states all share g_f_l = g_c_l
            (false, true) => ClassLabel::D2,
        };
        return Ok(Classification {
            verdict: ClassVerdict::Label(label),
            evidence: ClassEvidence {
                g_f_l: Some(forms.g_l),
                g_c_l: Some(forms.g_l),
                g_m_l: None,
                path: "two-qubit concurrence closed form".into(),
            },
        });
    }

    if pure {
        let (vals, vecs) = eigh(rho.matrix());
        let psi = PureState::normalized(
            rho.space().clone(),
            vecs.column(vals.len() - 1).into_owned(),
        )?;
        let l2 = crate::pure::lambda2_pure(&psi, opts)?.lambda2;
        let (_, gl) = crate::pure::gm_from_lambda2(l2);
        let label = if l2 >= T::one() - ctol {
            ClassLabel::A
        } else {
            ClassLabel::B
        };
        return Ok(Classification {
            verdict: ClassVerdict::Label(label),
            evidence: ClassEvidence {
                g_f_l: Some(gl),
                g_c_l: Some(gl),
                g_m_l: Some(gl),
                path: "pure-state product overlap".into(),
            },
        });
    }

    // generic mixed path: certified optimizer values
    let fe = crate::roof::fidelity_extension(rho, opts)?;
    let log_roof = crate::roof::convex_roof(rho, crate::roof::RoofKind::Logarithmic, opts)?;
    let m = crate::mixed::lambda2_mixed(rho, opts)?;
    let g_m_l = (-m.lambda2m.log2()).max(T::zero());
    let evidence = ClassEvidence {
        g_f_l: Some(fe.g_f_log),
        g_c_l: Some(log_roof.value),
        g_m_l: Some(g_m_l),
        path: "certified optimizer values".into(),
    };
    if fe.g_f < ctol {
        return Ok(Classification {
            verdict: ClassVerdict::Label(ClassLabel::C),
            evidence,
        });
    }
    let gap_fc = log_roof.value - fe.g_f_log;
    let gap_cm = g_m_l - log_roof.value;
    let verdict = if gap_fc > ctol && gap_cm > ctol {
        ClassVerdict::Label(ClassLabel::D1)
    } else if gap_fc.abs() <= ctol && gap_cm > ctol {
        ClassVerdict::Undecidable("fidelity and roof logs agree only within tolerance".into())
    } else {
        ClassVerdict::Undecidable("roof and trace inner-product logs agree only within tolerance".into())
    };
    Ok(Classification { verdict, evidence })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constructors_are_normalized() {
        assert!(make_mes::<f64>(3).is_ok());
        let w = make_w::<f64>(3).unwrap();
        assert_relative_eq!(w.amplitudes().norm(), 1.0, epsilon = 1e-12);
        let d = make_dicke::<f64>(4, 2).unwrap();
        let nonzero = d.amplitudes().iter().filter(|a| a.norm_sqr() > 0.0).count();
        assert_eq!(nonzero, 6);
        assert_relative_eq!(d.amplitudes().norm(), 1.0, epsilon = 1e-12);
        assert!(make_dicke::<f64>(4, 5).is_err());
    }

    #[test]
    fn isotropic_parameterizations_agree() {
        let spec = IsotropicSpec::<f64>::from_p(3, 0.4).unwrap();
        let back = IsotropicSpec::<f64>::from_fidelity(3, spec.fidelity).unwrap();
        assert_relative_eq!(back.p(), 0.4, epsilon = 1e-12);
        let rho = make_isotropic(&spec);
        let mes = make_mes::<f64>(3).unwrap();
        assert_relative_eq!(rho.expectation(&mes), spec.fidelity, epsilon = 1e-12);
    }

    #[test]
    fn iso_closed_forms_boundaries() {
        // pure end reduces to the maximally entangled values
        let spec = IsotropicSpec::<f64>::from_fidelity(2, 1.0).unwrap();
        let forms = iso_closed_forms(&spec);
        assert_relative_eq!(forms.g_fc, 0.5, epsilon = 1e-12);
        assert_relative_eq!(forms.g_c_l, 1.0, epsilon = 1e-12);

        // separability boundary F = 1/d
        let spec = IsotropicSpec::<f64>::from_fidelity(3, 1.0 / 3.0).unwrap();
        let forms = iso_closed_forms(&spec);
        assert!(forms.separable);
        assert_relative_eq!(forms.g_fc, 0.0, epsilon = 1e-12);
        assert_relative_eq!(forms.g_f_l, 0.0, epsilon = 1e-12);

        let spec = IsotropicSpec::<f64>::from_fidelity(3, 0.9).unwrap();
        let forms = iso_closed_forms(&spec);
        let expect = 1.0 - (0.9f64.sqrt() + (2.0 * 0.1f64).sqrt()).powi(2) / 3.0;
        assert_relative_eq!(forms.g_fc, expect, epsilon = 1e-12);
    }

    #[test]
    fn maxcorr_forms() {
        let spec = MaxCorrSpec::<f64>::rank2(1, 3, 0.5).unwrap();
        let forms = maxcorr_closed_forms(&spec);
        assert_relative_eq!(forms.g_c, 1.0 - (0.5 + 0.5 / 3.0), epsilon = 1e-12);
        assert_relative_eq!(forms.lambda2_m, 0.5, epsilon = 1e-12);
        match forms.g_c_l {
            MaxCorrGcl::Exact(v) => {
                let expect =
                    3f64.log2() - 0.5 * 3.0 * std::f64::consts::LOG2_E / std::f64::consts::E;
                assert_relative_eq!(v, expect, epsilon = 1e-12);
            }
            MaxCorrGcl::OptimizerOnly => panic!("rank 2 must be exact"),
        }
        // the named optimal decomposition reconstructs the state
        let dec = forms.optimal_log_decomposition.unwrap();
        dec.validate_against(&make_maxcorr(&spec)).unwrap();
    }

    #[test]
    fn maxcorr_case_boundaries_are_continuous() {
        // values agree across the regime boundaries m/n = 1/e and q = em/n
        for n in [3usize, 4, 5] {
            let q_star: f64 = std::f64::consts::E * 1.0 / n as f64;
            if q_star < 1.0 {
                let below = maxcorr_closed_forms(&MaxCorrSpec::rank2(1, n, q_star - 1e-9).unwrap());
                let above = maxcorr_closed_forms(&MaxCorrSpec::rank2(1, n, q_star + 1e-9).unwrap());
                match (below.g_c_l, above.g_c_l) {
                    (MaxCorrGcl::Exact(a), MaxCorrGcl::Exact(b)) => {
                        assert!((a - b).abs() < 1e-7, "jump at q* for n = {n}");
                    }
                    _ => panic!("expected exact values"),
                }
            }
        }
    }

    #[test]
    fn concurrence_examples() {
        let bell = make_mes::<f64>(2).unwrap().projector();
        let forms = two_qubit_closed_forms(&bell).unwrap();
        assert_relative_eq!(forms.concurrence, 1.0, epsilon = 1e-12);
        // near C = 1 the square root amplifies eigensolver noise
        assert_relative_eq!(forms.g_l, 1.0, epsilon = 1e-6);

        let space = MultipartiteSpace::qubits(2).unwrap();
        let sep = DensityMatrix::mixture(&[
            (0.5, PureState::basis_state(space.clone(), &[0, 0]).unwrap().projector()),
            (0.5, PureState::basis_state(space, &[1, 1]).unwrap().projector()),
        ])
        .unwrap();
        let forms = two_qubit_closed_forms(&sep).unwrap();
        assert_relative_eq!(forms.concurrence, 0.0, epsilon = 1e-9);
        assert_relative_eq!(forms.g_l, 0.0, epsilon = 1e-9);

        // 0.8 Bell + 0.2 maximally mixed has concurrence 0.7
        let mixed = DensityMatrix::mixture(&[
            (0.8, make_mes::<f64>(2).unwrap().projector()),
            (0.2, DensityMatrix::maximally_mixed(MultipartiteSpace::qubits(2).unwrap())),
        ])
        .unwrap();
        let forms = two_qubit_closed_forms(&mixed).unwrap();
        assert_relative_eq!(forms.concurrence, 0.7, epsilon = 1e-10);
        let expect = -((1.0 + 0.51f64.sqrt()) / 2.0).log2();
        assert_relative_eq!(forms.g_l, expect, epsilon = 1e-10);
    }

    #[test]
    fn detectors_recognize_their_families() {
        let spec = IsotropicSpec::<f64>::from_fidelity(3, 0.7).unwrap();
        let rho = make_isotropic(&spec);
        let hit = detect_isotropic(&rho).unwrap();
        assert_relative_eq!(hit.fidelity, 0.7, epsilon = 1e-10);

        let mc = MaxCorrSpec::<f64>::rank2(2, 3, 0.4).unwrap();
        let rho = make_maxcorr(&mc);
        let hit = detect_maxcorr(&rho).unwrap();
        assert_eq!(hit.block_sizes(), vec![2, 3]);
        assert_relative_eq!(hit.weights[0], 0.4, epsilon = 1e-10);

        // a W state projector is neither
        let w = make_w::<f64>(2).unwrap().projector();
        assert!(detect_isotropic(&w).is_none());
        assert!(detect_maxcorr(&w).is_none());
    }

    #[test]
    fn classify_basics() {
        let opts = OptimizerOptions::default();
        let space = MultipartiteSpace::qubits(2).unwrap();
        let p00 = PureState::<f64>::basis_state(space.clone(), &[0, 0]).unwrap().projector();
        assert_eq!(
            classify(&p00, &opts).unwrap().verdict,
            ClassVerdict::Label(ClassLabel::A)
        );
        let bell = make_mes::<f64>(2).unwrap().projector();
        assert_eq!(
            classify(&bell, &opts).unwrap().verdict,
            ClassVerdict::Label(ClassLabel::B)
        );
        let mm = DensityMatrix::<f64>::maximally_mixed(space);
        assert_eq!(
            classify(&mm, &opts).unwrap().verdict,
            ClassVerdict::Label(ClassLabel::C)
        );
        let iso = make_isotropic(&IsotropicSpec::from_fidelity(3, 0.9).unwrap());
        assert_eq!(
            classify(&iso, &opts).unwrap().verdict,
            ClassVerdict::Label(ClassLabel::D2)
        );
        let d3 = make_maxcorr_rank2(1, 3, 0.95).unwrap();
        assert_eq!(
            classify(&d3, &opts).unwrap().verdict,
            ClassVerdict::Label(ClassLabel::D3)
        );
        let d1 = make_maxcorr_rank2(1, 2, 0.5).unwrap();
        assert_eq!(
            classify(&d1, &opts).unwrap().verdict,
            ClassVerdict::Label(ClassLabel::D1)
        );
    }
}
