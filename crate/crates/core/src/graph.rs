//! Weighted undirected graphs, their Laplacians, and the experiment graph generators.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge<T> {
    pub u: usize,
    pub v: usize,
    pub weight: T,
}

/// Undirected graph with strictly positive edge weights.
///
/// Edges are stored once per unordered pair with `u < v`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph<T> {
    num_nodes: usize,
    edges: Vec<Edge<T>>,
}

impl<T: Scalar> WeightedGraph<T> {
    /// Validates and canonicalizes an edge list.
    pub fn new(num_nodes: usize, edges: impl IntoIterator<Item = (usize, usize, T)>) -> Result<Self> {
        if num_nodes == 0 {
            return Err(Error::InvalidGraph("graph must have at least one node".into()));
        }
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (u, v, w) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) out of range for {num_nodes} nodes"
                )));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at node {u}")));
            }
            if !(w > T::zero()) || !w.is_finite() {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u}, {v}) has non-positive weight {w}"
                )));
            }
            let (a, b) = if u < v { (u, v) } else { (v, u) };
            if !seen.insert((a, b)) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({a}, {b})")));
            }
            out.push(Edge { u: a, v: b, weight: w });
        }
        Ok(Self { num_nodes, edges: out })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn edges(&self) -> &[Edge<T>] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Unweighted degree of every node.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_nodes];
        for e in &self.edges {
            deg[e.u] += 1;
            deg[e.v] += 1;
        }
        deg
    }

    pub fn is_connected(&self) -> bool {
        let mut adj = vec![Vec::new(); self.num_nodes];
        for e in &self.edges {
            adj[e.u].push(e.v);
            adj[e.v].push(e.u);
        }
        let mut seen = vec![false; self.num_nodes];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == self.num_nodes
    }

    /// Laplacian quadratic form `f^T L f = sum_{(u,v)} w_uv (f_u - f_v)^2`.
    pub fn quadratic_form(&self, f: &[T]) -> T {
        assert_eq!(f.len(), self.num_nodes);
        self.edges
            .iter()
            .map(|e| {
                let d = f[e.u] - f[e.v];
                e.weight * d * d
            })
            .sum()
    }

    /// Writes the `N <num_nodes>` header followed by one `u v w` line per edge.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "N {}", self.num_nodes)?;
        for e in &self.edges {
            writeln!(out, "{} {} {}", e.u, e.v, e.weight)?;
        }
        Ok(())
    }

    pub fn read_edge_list<R: BufRead>(input: R) -> Result<Self> {
        let mut num_nodes: Option<usize> = None;
        let mut edges = Vec::new();
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = idx as u64 + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = trimmed.split_whitespace().collect();
            let parse_err = |message: String| Error::Parse { line: lineno, message };
            match num_nodes {
                None => {
                    if parts.len() != 2 || parts[0] != "N" {
                        return Err(parse_err(format!("expected header `N <num_nodes>`, got `{trimmed}`")));
                    }
                    num_nodes = Some(
                        parts[1]
                            .parse()
                            .map_err(|_| parse_err(format!("bad node count `{}`", parts[1])))?,
                    );
                }
                Some(_) => {
                    if parts.len() != 3 {
                        return Err(parse_err(format!("expected `u v w`, got `{trimmed}`")));
                    }
                    let u: usize = parts[0]
                        .parse()
                        .map_err(|_| parse_err(format!("bad node index `{}`", parts[0])))?;
                    let v: usize = parts[1]
                        .parse()
                        .map_err(|_| parse_err(format!("bad node index `{}`", parts[1])))?;
                    let w: f64 = parts[2]
                        .parse()
                        .map_err(|_| parse_err(format!("bad weight `{}`", parts[2])))?;
                    edges.push((u, v, T::lit(w)));
                }
            }
        }
        let n = num_nodes.ok_or_else(|| Error::Parse {
            line: 1,
            message: "missing `N <num_nodes>` header".into(),
        })?;
        Self::new(n, edges)
    }
}

/// Dense graph Laplacian `L = D - W`.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian<T>(Matrix<T>);

impl<T: Scalar> Laplacian<T> {
    pub fn matrix(&self) -> &Matrix<T> {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Wraps a matrix that is already known to be a Laplacian (symmetric, zero row sums).
    pub fn from_matrix(m: Matrix<T>) -> Result<Self> {
        if !m.is_symmetric(T::lit(1e-12).max(T::epsilon() * T::lit(8.0))) {
            return Err(Error::InvalidArgument("laplacian must be symmetric".into()));
        }
        Ok(Self(m))
    }
}

pub fn build_laplacian<T: Scalar>(g: &WeightedGraph<T>) -> Laplacian<T> {
    let n = g.num_nodes();
    let mut l = Matrix::zeros(n, n);
    for e in g.edges() {
        l[(e.u, e.v)] = l[(e.u, e.v)] - e.weight;
        l[(e.v, e.u)] = l[(e.v, e.u)] - e.weight;
        l[(e.u, e.u)] = l[(e.u, e.u)] + e.weight;
        l[(e.v, e.v)] = l[(e.v, e.v)] + e.weight;
    }
    Laplacian(l)
}

/// Edge weight distribution for generated graphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WeightLaw {
    /// i.i.d. uniform on (0, 1]
    Uniform,
    Unit,
}

impl WeightLaw {
    fn draw<T: Scalar>(self, rng: &mut impl Rng) -> T {
        match self {
            // random::<f64>() is in [0, 1)
            WeightLaw::Uniform => T::lit(1.0 - rng.random::<f64>()),
            WeightLaw::Unit => T::one(),
        }
    }
}

impl std::str::FromStr for WeightLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "unit" => Ok(Self::Unit),
            other => Err(Error::InvalidArgument(format!("unknown weight law `{other}`"))),
        }
    }
}

impl std::fmt::Display for WeightLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            WeightLaw::Uniform => "uniform",
            WeightLaw::Unit => "unit",
        })
    }
}

/// Barabási–Albert preferential attachment graph.
///
/// Starts from a complete graph on `m` nodes; every later node attaches to `m`
/// distinct existing nodes, drawn sequentially without replacement with
/// probability proportional to current degree.
pub fn generate_barabasi_albert<T: Scalar>(
    n: usize,
    m: usize,
    seed: u64,
    weight_law: WeightLaw,
) -> Result<WeightedGraph<T>> {
    if m == 0 {
        return Err(Error::InvalidArgument("attachment degree m must be >= 1".into()));
    }
    if n <= m {
        return Err(Error::InvalidArgument(format!(
            "node count n={n} must exceed attachment degree m={m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut degree = vec![0usize; n];
    let mut edges: Vec<(usize, usize, T)> = Vec::with_capacity(m * (m - 1) / 2 + m * (n - m));

    for u in 0..m {
        for v in u + 1..m {
            edges.push((u, v, weight_law.draw(&mut rng)));
            degree[u] += 1;
            degree[v] += 1;
        }
    }

    let mut chosen = vec![false; n];
    let mut targets = Vec::with_capacity(m);
    for new in m..n {
        targets.clear();
        for _ in 0..m {
            let total: usize = (0..new).filter(|&v| !chosen[v]).map(|v| degree[v]).sum();
            let pick = if total == 0 {
                // only reachable from a single isolated seed node (m = 1)
                let free: Vec<usize> = (0..new).filter(|&v| !chosen[v]).collect();
                free[rng.random_range(0..free.len())]
            } else {
                let mut ticket = rng.random_range(0..total);
                let mut pick = None;
                for v in (0..new).filter(|&v| !chosen[v]) {
                    if ticket < degree[v] {
                        pick = Some(v);
                        break;
                    }
                    ticket -= degree[v];
                }
                pick.expect("ticket falls inside the degree mass")
            };
            chosen[pick] = true;
            targets.push(pick);
        }
        for &t in &targets {
            chosen[t] = false;
            edges.push((t, new, weight_law.draw(&mut rng)));
            degree[t] += 1;
            degree[new] += 1;
        }
    }
    WeightedGraph::new(n, edges)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Similarity {
    Cosine,
    /// `1 / (1 + ||a - b||)`
    InverseEuclidean,
}

impl std::str::FromStr for Similarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Self::Cosine),
            "inverse-euclidean" => Ok(Self::InverseEuclidean),
            other => Err(Error::InvalidArgument(format!("unknown similarity `{other}`"))),
        }
    }
}

impl std::fmt::Display for Similarity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Similarity::Cosine => "cosine",
            Similarity::InverseEuclidean => "inverse-euclidean",
        })
    }
}

/// Symmetrized k-nearest-neighbour similarity graph over the rows of `features`.
///
/// Only positive similarities are candidates. Neighbours tied with the k-th most
/// similar candidate are all kept, and the edge set is the union of every
/// node's neighbour list.
pub fn build_knn_graph<T: Scalar>(features: &Matrix<T>, k: usize, similarity: Similarity) -> Result<WeightedGraph<T>> {
    let n = features.nrows();
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!("k={k} must satisfy 1 <= k < N={n}")));
    }
    let norms: Vec<T> = (0..n).map(|i| norm2(features.row(i))).collect();
    if similarity == Similarity::Cosine {
        if let Some(i) = norms.iter().position(|&x| x == T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "row {i} has zero norm under cosine similarity"
            )));
        }
    }
    let sim = |a: usize, b: usize| -> T {
        let (ra, rb) = (features.row(a), features.row(b));
        match similarity {
            Similarity::Cosine => dot(ra, rb) / (norms[a] * norms[b]),
            Similarity::InverseEuclidean => {
                let d2: T = ra.iter().zip(rb).map(|(&x, &y)| (x - y) * (x - y)).sum();
                T::one() / (T::one() + d2.sqrt())
            }
        }
    };

    let mut table = Matrix::zeros(n, n);
    for a in 0..n {
        for b in a + 1..n {
            let s = sim(a, b);
            table[(a, b)] = s;
            table[(b, a)] = s;
        }
    }

    let mut union: BTreeMap<(usize, usize), T> = BTreeMap::new();
    let mut candidates = Vec::with_capacity(n);
    for u in 0..n {
        candidates.clear();
        candidates.extend(
            (0..n)
                .filter(|&v| v != u)
                .map(|v| (table[(u, v)], v))
                .filter(|(s, _)| *s > T::zero()),
        );
        candidates.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let keep = if candidates.len() <= k {
            candidates.len()
        } else {
            let threshold = candidates[k - 1].0;
            let tol = T::epsilon() * T::lit(64.0) * threshold.abs().max(T::one());
            candidates.iter().take_while(|(s, _)| *s >= threshold - tol).count()
        };
        for &(s, v) in &candidates[..keep] {
            union.insert((u.min(v), u.max(v)), s);
        }
    }
    if union.is_empty() {
        return Err(Error::DegenerateSimilarity);
    }
    WeightedGraph::new(n, union.into_iter().map(|((u, v), w)| (u, v, w)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(l: &Laplacian<f64>) -> Vec<Vec<f64>> {
        (0..l.dim()).map(|i| l.matrix().row(i).to_vec()).collect()
    }

    #[test]
    fn two_node_laplacian() {
        let g = WeightedGraph::new(2, [(0, 1, 1.0)]).unwrap();
        assert_eq!(dense(&build_laplacian(&g)), vec![vec![1.0, -1.0], vec![-1.0, 1.0]]);
    }

    #[test]
    fn path_laplacian() {
        let g = WeightedGraph::new(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        assert_eq!(
            dense(&build_laplacian(&g)),
            vec![vec![1.0, -1.0, 0.0], vec![-1.0, 2.0, -1.0], vec![0.0, -1.0, 1.0]]
        );
    }

    #[test]
    fn rejects_invalid_edges() {
        assert!(WeightedGraph::new(3, [(1, 1, 1.0)]).is_err());
        assert!(WeightedGraph::new(3, [(0, 1, -1.0)]).is_err());
        assert!(WeightedGraph::new(3, [(0, 1, 0.0)]).is_err());
        assert!(WeightedGraph::new(3, [(0, 1, 1.0), (1, 0, 2.0)]).is_err());
        assert!(WeightedGraph::new(3, [(0, 3, 1.0)]).is_err());
    }

    #[test]
    fn ba_forced_complete() {
        let g: WeightedGraph<f64> = generate_barabasi_albert(4, 3, 7, WeightLaw::Unit).unwrap();
        assert_eq!(g.num_edges(), 6);
        assert!(g.degrees().iter().all(|&d| d == 3));
    }

    #[test]
    fn ba_rejects_small_n() {
        assert!(generate_barabasi_albert::<f64>(3, 3, 0, WeightLaw::Unit).is_err());
        assert!(generate_barabasi_albert::<f64>(5, 0, 0, WeightLaw::Unit).is_err());
    }

    #[test]
    fn ba_single_attachment_is_tree() {
        let g: WeightedGraph<f64> = generate_barabasi_albert(30, 1, 3, WeightLaw::Uniform).unwrap();
        assert_eq!(g.num_edges(), 29);
        assert!(g.is_connected());
    }

    #[test]
    fn ba_uniform_weights_in_unit_interval() {
        let g: WeightedGraph<f32> = generate_barabasi_albert(50, 2, 11, WeightLaw::Uniform).unwrap();
        assert!(g.edges().iter().all(|e| e.weight > 0.0 && e.weight <= 1.0));
    }

    #[test]
    fn knn_identical_rows_triangle() {
        let f = Matrix::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0]]);
        let g = build_knn_graph(&f, 1, Similarity::Cosine).unwrap();
        assert_eq!(g.num_edges(), 3);
        for e in g.edges() {
            assert!((e.weight - 1.0f64).abs() < 1e-12);
        }
    }

    #[test]
    fn knn_orthogonal_rows_degenerate() {
        let f = Matrix::<f64>::identity(3);
        assert!(matches!(
            build_knn_graph(&f, 1, Similarity::Cosine),
            Err(Error::DegenerateSimilarity)
        ));
    }

    #[test]
    fn knn_line_points() {
        let f = Matrix::from_rows(&(0..5).map(|i| vec![i as f64]).collect::<Vec<_>>());
        let g = build_knn_graph(&f, 1, Similarity::InverseEuclidean).unwrap();
        let pairs: Vec<(usize, usize)> = g.edges().iter().map(|e| (e.u, e.v)).collect();
        assert_eq!(pairs, vec![(0, 1), (1, 2), (2, 3), (3, 4)]);
        // brute force: nearest neighbour of each point by |i - j|
        for i in 0..5i32 {
            let best = (0..5i32).filter(|&j| j != i).map(|j| (i - j).abs()).min().unwrap();
            for j in (0..5i32).filter(|&j| j != i && (i - j).abs() == best) {
                let (a, b) = (i.min(j) as usize, i.max(j) as usize);
                assert!(pairs.contains(&(a, b)));
            }
        }
    }

    #[test]
    fn knn_rejects_bad_input() {
        let f = Matrix::from_rows(&[vec![1.0], vec![0.0], vec![2.0]]);
        assert!(build_knn_graph(&f, 1, Similarity::Cosine).is_err());
        assert!(build_knn_graph(&f, 3, Similarity::InverseEuclidean).is_err());
    }

    #[test]
    fn edge_list_reads_what_it_writes() {
        let g: WeightedGraph<f64> = generate_barabasi_albert(20, 2, 5, WeightLaw::Uniform).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        assert!(buf.starts_with(b"N 20\n"));
        let back = WeightedGraph::<f64>::read_edge_list(&buf[..]).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn edge_list_reports_line() {
        let text = "N 3\n0 1 1.0\n0 x 2\n";
        match WeightedGraph::<f64>::read_edge_list(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
