//! Finite resistance forms on weighted graphs.
//!
//! A [`ConductanceNetwork`] carries the energy
//! `E(f, g) = ½ Σ_{x≠y} c(x, y) (f(x) − f(y)) (g(x) − g(y))`.
//! Traces onto vertex subsets are Schur complements of the graph Laplacian,
//! harmonic extensions are interior Dirichlet solves, and effective resistances
//! come from either a two-point Dirichlet solve or the grounded Laplacian
//! inverse.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::ops::{Deref, DerefMut};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::structure::LevelComplex;
use crate::VertexId;

/// Default magnitude below which Schur-complement conductances are dropped.
pub const DEFAULT_CLAMP: f64 = 1e-14;

/// Real values indexed like the vertex list of the network they are used with.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VertexFunction(pub Vec<f64>);

impl VertexFunction {
    pub fn constant(len: usize, value: f64) -> Self {
        Self(vec![value; len])
    }

    pub fn indicator(len: usize, at: usize) -> Self {
        let mut v = vec![0.0; len];
        v[at] = 1.0;
        Self(v)
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for VertexFunction {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for VertexFunction {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for VertexFunction {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone)]
pub struct ConductanceNetwork {
    ids: Vec<VertexId>,
    index: HashMap<VertexId, usize>,
    /// Strictly positive conductances, sorted by neighbour position.
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl ConductanceNetwork {
    /// Builds a network on `ids`; conductances listed more than once are summed.
    pub fn new(ids: Vec<VertexId>, edges: impl IntoIterator<Item = (VertexId, VertexId, f64)>) -> Result<Self> {
        let mut index = HashMap::with_capacity(ids.len());
        for (k, &id) in ids.iter().enumerate() {
            if index.insert(id, k).is_some() {
                return Err(Error::InvalidNetwork(format!("duplicate vertex id {id}")));
            }
        }
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); ids.len()];
        for (x, y, c) in edges {
            if !c.is_finite() || c < 0.0 {
                return Err(Error::InvalidNetwork(format!(
                    "conductance between {x} and {y} must be finite and nonnegative, got {c}"
                )));
            }
            if x == y {
                return Err(Error::InvalidNetwork(format!("self-loop at vertex {x}")));
            }
            let i = *index.get(&x).ok_or(Error::UnknownVertex(x))?;
            let j = *index.get(&y).ok_or(Error::UnknownVertex(y))?;
            if c == 0.0 {
                continue;
            }
            *rows[i].entry(j).or_insert(0.0) += c;
            *rows[j].entry(i).or_insert(0.0) += c;
        }
        let adjacency = rows.into_iter().map(|r| r.into_iter().collect()).collect();
        Ok(Self { ids, index, adjacency })
    }

    /// Network whose conductances are the negated off-diagonal entries of a
    /// Laplacian-like matrix. Entries with `|c| < clamp` become zero.
    pub fn from_laplacian(ids: Vec<VertexId>, laplacian: &DMatrix<f64>, clamp: f64) -> Result<Self> {
        let n = ids.len();
        if laplacian.nrows() != n || laplacian.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: laplacian.nrows(),
            });
        }
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let c = -0.5 * (laplacian[(i, j)] + laplacian[(j, i)]);
                if c.abs() < clamp {
                    continue;
                }
                if c < 0.0 {
                    return Err(Error::InvalidNetwork(format!(
                        "positive off-diagonal entry {} between {} and {}",
                        -c, ids[i], ids[j]
                    )));
                }
                edges.push((ids[i], ids[j], c));
            }
        }
        Self::new(ids, edges)
    }

    /// All pairs of `ids` joined with conductance `c`.
    pub fn complete(ids: Vec<VertexId>, c: f64) -> Result<Self> {
        let mut edges = Vec::new();
        for (k, &x) in ids.iter().enumerate() {
            for &y in &ids[k + 1..] {
                edges.push((x, y, c));
            }
        }
        Self::new(ids, edges)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[VertexId] {
        &self.ids
    }

    pub fn position(&self, id: VertexId) -> Result<usize> {
        self.index.get(&id).copied().ok_or(Error::UnknownVertex(id))
    }

    /// Neighbours of the vertex at position `i`, as `(position, conductance)`.
    pub fn neighbours(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn conductance(&self, x: VertexId, y: VertexId) -> Result<f64> {
        let (i, j) = (self.position(x)?, self.position(y)?);
        Ok(self.conductance_at(i, j))
    }

    pub fn conductance_at(&self, i: usize, j: usize) -> f64 {
        self.adjacency[i]
            .binary_search_by_key(&j, |&(k, _)| k)
            .map(|k| self.adjacency[i][k].1)
            .unwrap_or(0.0)
    }

    /// Edges as `(position, position, conductance)` with the first position smaller.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().filter(move |&&(j, _)| j > i).map(move |&(j, c)| (i, j, c)))
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.adjacency[i].iter().map(|&(_, c)| c).sum()
    }

    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut l = DMatrix::zeros(n, n);
        for (i, row) in self.adjacency.iter().enumerate() {
            for &(j, c) in row {
                l[(i, j)] -= c;
                l[(i, i)] += c;
            }
        }
        l
    }

    pub fn is_connected(&self) -> bool {
        if self.is_empty() {
            return false;
        }
        let mut seen = vec![false; self.len()];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            for &(j, _) in &self.adjacency[i] {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    queue.push_back(j);
                }
            }
        }
        count == self.len()
    }

    fn check_len(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: f.len(),
            });
        }
        Ok(())
    }

    pub fn energy(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        self.check_len(f)?;
        self.check_len(g)?;
        // each unordered edge once, which absorbs the ½
        Ok(self.edges().map(|(i, j, c)| c * (f[i] - f[j]) * (g[i] - g[j])).sum())
    }

    pub fn quadratic_energy(&self, f: &[f64]) -> Result<f64> {
        self.energy(f, f)
    }

    pub fn trace(&self, boundary: &[VertexId]) -> Result<ConductanceNetwork> {
        self.trace_with(boundary, DEFAULT_CLAMP)
    }

    /// The trace onto `boundary`: a network on `boundary` (in the given order)
    /// whose energy of `f` is the minimal energy over all extensions of `f`.
    pub fn trace_with(&self, boundary: &[VertexId], clamp: f64) -> Result<ConductanceNetwork> {
        if boundary.is_empty() {
            return Err(Error::InvalidArgument("trace onto an empty boundary".into()));
        }
        let (bpos, ipos) = self.split(boundary)?;
        let l = self.laplacian();
        let lbb = l.select_rows(&bpos).select_columns(&bpos);
        if ipos.is_empty() {
            return Self::from_laplacian(boundary.to_vec(), &lbb, clamp);
        }
        let lii = l.select_rows(&ipos).select_columns(&ipos);
        let lib = l.select_rows(&ipos).select_columns(&bpos);
        let chol = lii
            .cholesky()
            .ok_or_else(|| Error::Singular("interior block of the Laplacian is not positive definite".into()))?;
        let schur = lbb - lib.transpose() * chol.solve(&lib);
        Self::from_laplacian(boundary.to_vec(), &schur, clamp)
    }

    /// Positions of `boundary` (validated, distinct) and the remaining positions.
    fn split(&self, boundary: &[VertexId]) -> Result<(Vec<usize>, Vec<usize>)> {
        let mut is_boundary = vec![false; self.len()];
        let mut bpos = Vec::with_capacity(boundary.len());
        for &id in boundary {
            let p = self.position(id)?;
            if is_boundary[p] {
                return Err(Error::InvalidArgument(format!("vertex {id} listed twice")));
            }
            is_boundary[p] = true;
            bpos.push(p);
        }
        let ipos = (0..self.len()).filter(|&p| !is_boundary[p]).collect();
        Ok((bpos, ipos))
    }

    /// The energy minimiser agreeing with `boundary_values` on their vertices.
    pub fn harmonic_extension(&self, boundary_values: &[(VertexId, f64)]) -> Result<VertexFunction> {
        if boundary_values.is_empty() {
            return Err(Error::InvalidArgument("harmonic extension needs boundary data".into()));
        }
        let ids: Vec<VertexId> = boundary_values.iter().map(|&(x, _)| x).collect();
        let (bpos, ipos) = self.split(&ids)?;
        let mut out = vec![0.0; self.len()];
        for (&p, &(_, v)) in bpos.iter().zip(boundary_values) {
            out[p] = v;
        }
        if ipos.is_empty() {
            return Ok(VertexFunction(out));
        }
        // Assemble only the rows we need; no dense full Laplacian.
        let mut interior_slot = vec![usize::MAX; self.len()];
        for (k, &p) in ipos.iter().enumerate() {
            interior_slot[p] = k;
        }
        let m = ipos.len();
        let mut lii = DMatrix::zeros(m, m);
        let mut rhs = DVector::zeros(m);
        for (k, &p) in ipos.iter().enumerate() {
            for &(q, c) in &self.adjacency[p] {
                lii[(k, k)] += c;
                match interior_slot[q] {
                    usize::MAX => rhs[k] += c * out[q],
                    slot => lii[(k, slot)] -= c,
                }
            }
        }
        let chol = lii
            .cholesky()
            .ok_or_else(|| Error::Singular("interior Dirichlet problem is singular".into()))?;
        let u = chol.solve(&rhs);
        for (k, &p) in ipos.iter().enumerate() {
            out[p] = u[k];
        }
        Ok(VertexFunction(out))
    }

    /// `R(x, y)` from the Dirichlet problem `f(x) = 1`, `f(y) = 0`.
    /// Returns 0 when `x == y`.
    pub fn effective_resistance(&self, x: VertexId, y: VertexId) -> Result<f64> {
        self.position(x)?;
        self.position(y)?;
        if x == y {
            return Ok(0.0);
        }
        if !self.is_connected() {
            return Err(Error::Disconnected(format!("no path guaranteed between {x} and {y}")));
        }
        let f = self.harmonic_extension(&[(x, 1.0), (y, 0.0)])?;
        Ok(1.0 / self.quadratic_energy(&f)?)
    }

    /// All pairwise effective resistances, from the Laplacian grounded at the
    /// first vertex: `R(x, y) = G(x, x) + G(y, y) − 2 G(x, y)`.
    pub fn resistance_matrix(&self) -> Result<DMatrix<f64>> {
        if !self.is_connected() {
            return Err(Error::Disconnected("resistance matrix of a disconnected network".into()));
        }
        let n = self.len();
        let mut g = DMatrix::zeros(n, n);
        if n > 1 {
            let reduced = self.laplacian().remove_row(0).remove_column(0);
            let inv = reduced
                .cholesky()
                .ok_or_else(|| Error::Singular("grounded Laplacian".into()))?
                .inverse();
            g.view_mut((1, 1), (n - 1, n - 1)).copy_from(&inv);
        }
        Ok(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                0.0
            } else {
                g[(i, i)] + g[(j, j)] - 2.0 * g[(i, j)]
            }
        }))
    }

    /// `max_{x,y} R(x, y)` over the vertex set.
    pub fn resistance_diameter(&self) -> Result<f64> {
        Ok(self.resistance_matrix()?.iter().fold(0.0f64, |m, &r| m.max(r)))
    }
}

/// Self-similar assembly: the conductance of `{x, y}` is the sum over cells
/// `w` containing both of `r_w^{-1} c_0(F_w^{-1} x, F_w^{-1} y)`.
pub fn assemble_self_similar(
    base: &ConductanceNetwork,
    scales: &[f64],
    complex: &LevelComplex,
) -> Result<ConductanceNetwork> {
    let boundary_size = complex.cells.first().map(|c| c.boundary.len()).unwrap_or(0);
    if base.len() != boundary_size || base.ids().iter().enumerate().any(|(k, &id)| k != id) {
        return Err(Error::DimensionMismatch {
            expected: boundary_size,
            found: base.len(),
        });
    }
    if scales.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
        return Err(Error::InvalidArgument("resistance scales must lie in (0, 1)".into()));
    }
    let mut edges = Vec::with_capacity(complex.cells.len() * base.edge_count());
    for cell in &complex.cells {
        let mut inverse_scale = 1.0;
        for &i in &cell.word {
            let r = *scales.get(i).ok_or_else(|| {
                Error::InvalidArgument(format!("no resistance scale for symbol {i}"))
            })?;
            inverse_scale /= r;
        }
        for (a, b, c) in base.edges() {
            edges.push((cell.boundary[a], cell.boundary[b], c * inverse_scale));
        }
    }
    ConductanceNetwork::new(complex.vertices().collect(), edges)
}
