//! Graph states: stabilizer construction, exact maximum independent set /
//! minimum vertex cover, the universal closest-separable-state candidate
//! built from measurement branches, and the identity checks it satisfies for
//! minimal-rank graphs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::eigh;
use crate::optimize::OptimizerOptions;
use crate::pure::lambda2_pure;
use crate::scalar::{cabs, r, Real, C};
use crate::space::{DensityMatrix, MultipartiteSpace, ProductState, PureState};

/// Exact-search budget for the maximum independent set.
pub const MAX_GRAPH_VERTICES: usize = 24;

/// Dense-state budget.
pub const MAX_STATE_VERTICES: usize = 12;

/// An undirected simple graph on vertices `0..n`.
#[derive(Debug, Clone)]
pub struct GraphSpec {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl GraphSpec {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("graph needs a vertex".into()));
        }
        let mut norm = Vec::new();
        for &(a, b) in edges {
            if a == b {
                return Err(Error::InvalidParameter(format!("self-loop at {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge ({a},{b}) outside 0..{n}"
                )));
            }
            let e = (a.min(b), a.max(b));
            if !norm.contains(&e) {
                norm.push(e);
            }
        }
        norm.sort_unstable();
        Ok(Self { n, edges: norm })
    }

    /// Linear cluster: the path on `n` vertices.
    pub fn path(n: usize) -> Result<Self> {
        let edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
        Self::new(n, &edges)
    }

    /// Ring on `n` vertices.
    pub fn ring(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParameter("ring needs n >= 3".into()));
        }
        let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
        edges.push((n - 1, 0));
        Self::new(n, &edges)
    }

    /// Parses `"0-1,1-2,2-0"`; the vertex count is `max + 1`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        let mut max_v = 0;
        for part in text.split(',') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let (a, b) = part.split_once('-').ok_or_else(|| {
                Error::Parse(format!("edge '{part}' is not of the form a-b"))
            })?;
            let a: usize = a
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad vertex '{a}'")))?;
            let b: usize = b
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad vertex '{b}'")))?;
            max_v = max_v.max(a).max(b);
            edges.push((a, b));
        }
        if edges.is_empty() {
            return Err(Error::Parse("no edges given".into()));
        }
        Self::new(max_v + 1, &edges)
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    fn neighbor_masks(&self) -> Vec<u32> {
        let mut adj = vec![0u32; self.n];
        for &(a, b) in &self.edges {
            adj[a] |= 1 << b;
            adj[b] |= 1 << a;
        }
        adj
    }
}

/// Maximum independent set and its complementary minimum vertex cover.
#[derive(Debug, Clone)]
pub struct GraphAnalysis {
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
    /// `2^|beta|`: the number of product terms in the graph-state expansion.
    pub d_alpha: usize,
}

/// Exact maximum independent set by branch and bound (branch on a maximum-
/// degree vertex; ties resolved toward the lexicographically smallest set).
pub fn analyze_graph(g: &GraphSpec) -> Result<GraphAnalysis> {
    if g.n > MAX_GRAPH_VERTICES {
        return Err(Error::BudgetExceeded(format!(
            "{} vertices exceeds the exact-search budget {MAX_GRAPH_VERTICES}",
            g.n
        )));
    }
    let adj = g.neighbor_masks();
    let all: u32 = if g.n == 32 { u32::MAX } else { (1 << g.n) - 1 };

    fn set_vec(mask: u32, n: usize) -> Vec<usize> {
        (0..n).filter(|&v| mask & (1 << v) != 0).collect()
    }

    struct Search<'a> {
        adj: &'a [u32],
        n: usize,
        best: u32,
        best_size: u32,
    }
    impl Search<'_> {
        fn better(&self, cand: u32) -> bool {
            let cs = cand.count_ones();
            if cs != self.best_size {
                return cs > self.best_size;
            }
            // lexicographically smaller sorted vertex list wins
            set_vec(cand, self.n) < set_vec(self.best, self.n)
        }
        fn run(&mut self, chosen: u32, open: u32) {
            if open == 0 {
                if self.better(chosen) {
                    self.best = chosen;
                    self.best_size = chosen.count_ones();
                }
                return;
            }
            if chosen.count_ones() + open.count_ones() < self.best_size {
                return;
            }
            // pivot: maximum degree within the open set
            let mut pivot = open.trailing_zeros() as usize;
            let mut deg = 0;
            let mut m = open;
            while m != 0 {
                let v = m.trailing_zeros() as usize;
                m &= m - 1;
                let dv = (self.adj[v] & open).count_ones();
                if dv > deg {
                    deg = dv;
                    pivot = v;
                }
            }
            if deg == 0 {
                // the rest is edge-free: take everything
                let cand = chosen | open;
                if self.better(cand) {
                    self.best = cand;
                    self.best_size = cand.count_ones();
                }
                return;
            }
            let bit = 1u32 << pivot;
            // include the pivot
            self.run(chosen | bit, open & !(bit | self.adj[pivot]));
            // or exclude it
            self.run(chosen, open & !bit);
        }
    }
    let mut s = Search {
        adj: &adj,
        n: g.n,
        best: 0,
        best_size: 0,
    };
    s.run(0, all);
    let alpha = set_vec(s.best, g.n);
    let beta: Vec<usize> = (0..g.n).filter(|v| !alpha.contains(v)).collect();
    let d_alpha = 1usize << beta.len();
    Ok(GraphAnalysis {
        alpha,
        beta,
        d_alpha,
    })
}

/// `|G> = prod CZ |+>^n` as a dense state vector.
pub fn build_graph_state<T: Real>(g: &GraphSpec) -> Result<PureState<T>> {
    if g.n > MAX_STATE_VERTICES {
        return Err(Error::BudgetExceeded(format!(
            "{} vertices exceeds the dense-state budget {MAX_STATE_VERTICES}",
            g.n
        )));
    }
    if g.n == 1 {
        let space = MultipartiteSpace::qubits(1)?;
        let h = T::one() / r::<T>(2.0).sqrt();
        return PureState::new(space, DVector::from_vec(vec![C::new(h, T::zero()); 2]));
    }
    let space = MultipartiteSpace::qubits(g.n)?;
    let dim = space.total_dim();
    let amp = T::one() / r::<T>(dim as f64).sqrt();
    let mut v = DVector::from_element(dim, C::new(amp, T::zero()));
    for b in 0..dim {
        let mut sign = false;
        for &(x, y) in &g.edges {
            let bx = (b >> (g.n - 1 - x)) & 1;
            let by = (b >> (g.n - 1 - y)) & 1;
            sign ^= bx == 1 && by == 1;
        }
        if sign {
            v[b] = -v[b];
        }
    }
    PureState::new(space, v)
}

/// Max-abs deviation of `g_j |G> - |G>` over all stabilizer generators
/// `g_j = X_j prod_{k in N(j)} Z_k`.
pub fn stabilizer_deviation<T: Real>(g: &GraphSpec, psi: &PureState<T>) -> T {
    let n = g.n;
    let dim = psi.amplitudes().len();
    let mut worst = T::zero();
    for j in 0..n {
        let mut out = DVector::from_element(dim, C::new(T::zero(), T::zero()));
        for b in 0..dim {
            // X on j flips bit j; Z on every neighbor contributes the parity
            let flipped = b ^ (1 << (n - 1 - j));
            let mut sign = false;
            for &(x, y) in &g.edges {
                let other = if x == j {
                    Some(y)
                } else if y == j {
                    Some(x)
                } else {
                    None
                };
                if let Some(k) = other {
                    sign ^= (b >> (n - 1 - k)) & 1 == 1;
                }
            }
            let a = psi.amplitudes()[flipped];
            out[b] = if sign { -a } else { a };
        }
        for b in 0..dim {
            let dev = cabs(out[b] - psi.amplitudes()[b]);
            if dev > worst {
                worst = dev;
            }
        }
    }
    worst
}

/// The measurement-branch construction of the universal separable candidate,
/// with the cross-check against the stabilizer-projector form and the
/// minimal-rank diagnosis.
#[derive(Debug, Clone)]
pub struct DeltaBuild<T: Real> {
    pub delta: DensityMatrix<T>,
    /// `(probability, branch state)` per computational outcome on `beta`.
    pub branches: Vec<(T, PureState<T>)>,
    /// Product certificates of the branches that certified as product.
    pub branch_products: Vec<Option<ProductState<T>>>,
    /// Max-abs deviation from the normalized stabilizer projector
    /// `prod_{j in alpha} (1 + g_j)/2 / D_alpha`.
    pub projector_dev: T,
    /// Squared product overlap of the graph state (multistart certificate).
    pub lambda2: T,
    /// Whether the expansion over `D_alpha` branches is of minimal rank:
    /// the certificate matches `2^-|beta|` at 1e-4 and every branch is
    /// product.
    pub minimal_rank: bool,
}

/// Measures the `beta` qubits of `|G>` in the computational basis and mixes
/// the branches uniformly. Equals the normalized stabilizer projector.
pub fn build_delta<T: Real>(
    g: &GraphSpec,
    analysis: &GraphAnalysis,
    opts: &OptimizerOptions,
) -> Result<DeltaBuild<T>> {
    let psi = build_graph_state::<T>(g)?;
    let n = g.n;
    let dim = psi.amplitudes().len();
    let space = psi.space().clone();

    // branches over computational outcomes on beta
    let mut branches = Vec::new();
    let outcomes = 1usize << analysis.beta.len();
    for z in 0..outcomes {
        let mut amps = DVector::from_element(dim, C::new(T::zero(), T::zero()));
        let mut norm2 = T::zero();
        for b in 0..dim {
            let mut keep = true;
            for (slot, &vtx) in analysis.beta.iter().enumerate() {
                let want = (z >> (analysis.beta.len() - 1 - slot)) & 1;
                if (b >> (n - 1 - vtx)) & 1 != want {
                    keep = false;
                    break;
                }
            }
            if keep {
                amps[b] = psi.amplitudes()[b];
                norm2 += amps[b].norm_sqr();
            }
        }
        if norm2 > r(1e-14) {
            let norm = norm2.sqrt();
            branches.push((
                norm2,
                PureState::new(space.clone(), amps.map(|a| a / C::new(norm, T::zero())))?,
            ));
        }
    }

    let mut m = DMatrix::from_element(dim, dim, C::new(T::zero(), T::zero()));
    for (p, b) in &branches {
        m += b.projector().matrix().scale(*p);
    }
    let delta = DensityMatrix::trusted(space.clone(), m);

    // cross-check: uniform average over the subgroup generated by the alpha
    // generators equals the branch mixture
    let projector_dev = {
        let mut acc = DMatrix::from_element(dim, dim, C::new(T::zero(), T::zero()));
        let na = analysis.alpha.len();
        for subset in 0..(1usize << na) {
            let mut diag_sign = vec![false; dim];
            let mut flip = 0usize;
            for (slot, &vtx) in analysis.alpha.iter().enumerate() {
                if (subset >> slot) & 1 == 1 {
                    flip ^= 1 << (n - 1 - vtx);
                    for (b, ds) in diag_sign.iter_mut().enumerate() {
                        let mut s = false;
                        for &(x, y) in &g.edges {
                            let other = if x == vtx {
                                Some(y)
                            } else if y == vtx {
                                Some(x)
                            } else {
                                None
                            };
                            if let Some(k) = other {
                                s ^= (b >> (n - 1 - k)) & 1 == 1;
                            }
                        }
                        *ds ^= s;
                    }
                }
            }
            // the group element maps |b> to +-|b ^ flip>
            for b in 0..dim {
                let sgn = if diag_sign[b] { -T::one() } else { T::one() };
                acc[(b ^ flip, b)] += C::new(sgn, T::zero());
            }
        }
        let scale = T::one() / r::<T>(((1usize << na) * analysis.d_alpha) as f64);
        acc.scale_mut(scale);
        let mut dev = T::zero();
        for i in 0..dim {
            for j in 0..dim {
                let d = cabs(acc[(i, j)] - delta.matrix()[(i, j)]);
                if d > dev {
                    dev = d;
                }
            }
        }
        dev
    };

    // product certificates per branch
    let branch_products: Vec<Option<ProductState<T>>> = branches
        .iter()
        .map(|(_, b)| crate::mixed::product_certificate(b))
        .collect();

    let lambda2 = if n >= 2 {
        lambda2_pure(&psi, opts)?.lambda2
    } else {
        T::one()
    };
    let expected = T::one() / r::<T>(analysis.d_alpha as f64);
    let minimal_rank =
        (lambda2 - expected).abs() <= r(1e-4) && branch_products.iter().all(|p| p.is_some());

    Ok(DeltaBuild {
        delta,
        branches,
        branch_products,
        projector_dev,
        lambda2,
        minimal_rank,
    })
}

/// The identity battery for the universal closest separable state.
#[derive(Debug, Clone)]
pub struct CssReport<T: Real> {
    pub analysis: GraphAnalysis,
    /// Multistart certificate for the squared product overlap.
    pub lambda2: T,
    /// `1 / D_alpha`.
    pub lambda2_expected: T,
    pub trace_distance: T,
    /// `<G| delta |G>`.
    pub fidelity_sq: T,
    pub rel_entropy: T,
    /// Max deviation of the spectrum of `|G><G| - delta` from
    /// `{(D-1)/D, -1/D (D-1 times), 0}`.
    pub spectrum_dev: T,
    pub projector_dev: T,
    pub minimal_rank: bool,
    /// Set when the minimal-rank premise failed: the reported distances are
    /// upper bounds on the corresponding entanglement measures, not values.
    pub bounds_only: bool,
}

pub fn verify_universal_css<T: Real>(
    g: &GraphSpec,
    opts: &OptimizerOptions,
) -> Result<CssReport<T>> {
    let analysis = analyze_graph(g)?;
    let psi = build_graph_state::<T>(g)?;
    let build = build_delta::<T>(g, &analysis, opts)?;
    let rho = psi.projector();

    let trace_distance = crate::distance::trace_distance(&rho, &build.delta)?;
    let fidelity_sq = build.delta.expectation(&psi);
    let rel_entropy = crate::distance::relative_entropy(&rho, &build.delta)?;

    // spectrum of the difference
    let spectrum_dev = {
        let diff = rho.matrix() - build.delta.matrix();
        let (vals, _) = eigh(&diff);
        let d = analysis.d_alpha;
        let dim = vals.len();
        let df = r::<T>(d as f64);
        let mut expected = vec![T::zero(); dim];
        for e in expected.iter_mut().take(d - 1) {
            *e = -T::one() / df;
        }
        expected[dim - 1] = (df - T::one()) / df;
        // both lists ascending
        vals.iter()
            .zip(&expected)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), |acc, x| acc.max(x))
    };

    Ok(CssReport {
        lambda2: build.lambda2,
        lambda2_expected: T::one() / r::<T>(analysis.d_alpha as f64),
        trace_distance,
        fidelity_sq,
        rel_entropy,
        spectrum_dev,
        projector_dev: build.projector_dev,
        minimal_rank: build.minimal_rank,
        bounds_only: !build.minimal_rank,
        analysis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn opts() -> OptimizerOptions {
        OptimizerOptions::default()
    }

    #[test]
    fn analyze_small_graphs() {
        // path on 4: alpha = {0, 2} (lexicographically smallest maximum set)
        let g = GraphSpec::path(4).unwrap();
        let a = analyze_graph(&g).unwrap();
        assert_eq!(a.alpha, vec![0, 2]);
        assert_eq!(a.beta, vec![1, 3]);
        assert_eq!(a.d_alpha, 4);

        let g = GraphSpec::new(2, &[(0, 1)]).unwrap();
        let a = analyze_graph(&g).unwrap();
        assert_eq!(a.beta.len(), 1);
        assert_eq!(a.d_alpha, 2);

        // triangle: exhaustively, the best independent set has one vertex
        let g = GraphSpec::parse("0-1,1-2,2-0").unwrap();
        let a = analyze_graph(&g).unwrap();
        assert_eq!(a.alpha, vec![0]);
        assert_eq!(a.d_alpha, 4);
    }

    #[test]
    fn graph_state_is_stabilized() {
        for g in [
            GraphSpec::path(2).unwrap(),
            GraphSpec::path(4).unwrap(),
            GraphSpec::ring(4).unwrap(),
            GraphSpec::parse("0-1,1-2,2-0").unwrap(),
        ] {
            let psi = build_graph_state::<f64>(&g).unwrap();
            assert!(stabilizer_deviation(&g, &psi) < 1e-10);
        }
    }

    #[test]
    fn single_vertex_is_plus() {
        let g = GraphSpec::new(1, &[]).unwrap();
        let psi = build_graph_state::<f64>(&g).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert_relative_eq!(psi.amplitudes()[0].re, h, epsilon = 1e-15);
        assert_relative_eq!(psi.amplitudes()[1].re, h, epsilon = 1e-15);
    }

    #[test]
    fn edge_graph_identities() {
        let g = GraphSpec::new(2, &[(0, 1)]).unwrap();
        let rep = verify_universal_css::<f64>(&g, &opts()).unwrap();
        assert!(rep.minimal_rank);
        assert_relative_eq!(rep.lambda2, 0.5, epsilon = 1e-9);
        assert_relative_eq!(rep.trace_distance, 0.5, epsilon = 1e-10);
        assert_relative_eq!(rep.fidelity_sq, 0.5, epsilon = 1e-10);
        assert_relative_eq!(rep.rel_entropy, 1.0, epsilon = 1e-9);
        assert!(rep.spectrum_dev < 1e-10);
        assert!(rep.projector_dev < 1e-10);
    }

    #[test]
    fn cluster4_identities() {
        let g = GraphSpec::path(4).unwrap();
        let rep = verify_universal_css::<f64>(&g, &opts()).unwrap();
        assert!(rep.minimal_rank);
        assert_relative_eq!(rep.lambda2, 0.25, epsilon = 1e-6);
        assert_relative_eq!(rep.trace_distance, 0.75, epsilon = 1e-10);
        assert_relative_eq!(rep.fidelity_sq, 0.25, epsilon = 1e-10);
        assert_relative_eq!(rep.rel_entropy, 2.0, epsilon = 1e-9);
        assert!(rep.spectrum_dev < 1e-10);
    }

    #[test]
    fn triangle_raises_minimal_rank_flag() {
        let g = GraphSpec::parse("0-1,1-2,2-0").unwrap();
        let rep = verify_universal_css::<f64>(&g, &opts()).unwrap();
        // the triangle graph state is locally equivalent to a three-qubit
        // GHZ, whose squared product overlap is 1/2, not 1/4
        assert!(!rep.minimal_rank);
        assert!(rep.bounds_only);
        assert_relative_eq!(rep.lambda2, 0.5, epsilon = 1e-6);
    }
}
