//! Post-critically finite self-similar structures and their vertex hierarchies.
//!
//! A structure is described entirely by its level-one data: how the boundary
//! points of the `M` first-level cells are glued to each other and to the
//! boundary set `V_0`. Every finer level follows by self-similarity, so
//! `build_level` only ever consults that level-one table.
//!
//! Vertex ids are canonical: `V_0` gets `0..|V_0|`, and each refinement
//! appends the new junction points ordered by their lexicographically smallest
//! `(word, boundary index)` representative. Consequently `V_n` is always the
//! id prefix `0..|V_n|` of `V_{n+1}`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::VertexId;

/// Tolerance for identifying points by coordinates.
pub const COORDINATE_TOLERANCE: f64 = 1e-12;

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub linear: [[f64; 2]; 2],
    pub offset: Point,
}

impl AffineMap {
    /// The contraction `x ↦ (x + p) / 2`.
    pub fn halving_towards(p: Point) -> Self {
        Self {
            linear: [[0.5, 0.0], [0.0, 0.5]],
            offset: [p[0] / 2.0, p[1] / 2.0],
        }
    }

    pub fn apply(&self, x: Point) -> Point {
        [
            self.linear[0][0] * x[0] + self.linear[0][1] * x[1] + self.offset[0],
            self.linear[1][0] * x[0] + self.linear[1][1] * x[1] + self.offset[1],
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub boundary: Vec<Point>,
    pub maps: Vec<AffineMap>,
}

/// Where the boundary point `a` of first-level cell `i` lands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Placement {
    /// Coincides with boundary point `c` of `V_0`.
    Boundary(usize),
    /// A junction point new at level one, numbered by smallest representative.
    Junction(usize),
}

/// `(cell symbol, boundary index)` on the first level.
pub type CellPoint = (usize, usize);

#[derive(Debug, Clone)]
pub struct SelfSimilarStructure {
    symbol_count: usize,
    boundary_size: usize,
    identifications: Vec<[CellPoint; 2]>,
    boundary_maps: Vec<(usize, usize, usize)>,
    embedding: Option<Embedding>,
    placement: Vec<Vec<Placement>>,
    junction_count: usize,
}

impl SelfSimilarStructure {
    /// Builds a structure from combinatorial level-one data.
    ///
    /// `identifications` lists pairs `[(i, a), (j, b)]` meaning
    /// `F_i(p_a) = F_j(p_b)`; `boundary_maps` lists `(i, a, c)` meaning
    /// `F_i(p_a) = p_c`. The pairs are closed into an equivalence relation;
    /// the closure is rejected if it glues two boundary points of one cell,
    /// merges two distinct points of `V_0`, or leaves a point of `V_0` outside
    /// `V_1`.
    pub fn new(
        symbol_count: usize,
        boundary_size: usize,
        identifications: Vec<[CellPoint; 2]>,
        boundary_maps: Vec<(usize, usize, usize)>,
        embedding: Option<Embedding>,
    ) -> Result<Self> {
        if symbol_count < 2 {
            return Err(Error::InvalidStructure(format!(
                "symbol_count must be at least 2, got {symbol_count}"
            )));
        }
        if boundary_size < 2 {
            return Err(Error::InvalidStructure(format!(
                "boundary_size must be at least 2, got {boundary_size}"
            )));
        }
        let node = |(i, a): CellPoint| -> Result<usize> {
            if i >= symbol_count || a >= boundary_size {
                return Err(Error::InvalidStructure(format!(
                    "cell point ({i}, {a}) out of range"
                )));
            }
            Ok(i * boundary_size + a)
        };
        let cell_nodes = symbol_count * boundary_size;
        // Boundary points of V_0 occupy the nodes after the cell points.
        let mut uf = UnionFind::new(cell_nodes + boundary_size);
        for [p, q] in &identifications {
            uf.union(node(*p)?, node(*q)?);
        }
        for &(i, a, c) in &boundary_maps {
            if c >= boundary_size {
                return Err(Error::InvalidStructure(format!(
                    "boundary map target p_{c} out of range"
                )));
            }
            uf.union(node((i, a))?, cell_nodes + c);
        }

        let mut class_boundary = vec![None::<usize>; cell_nodes + boundary_size];
        for c in 0..boundary_size {
            let root = uf.find(cell_nodes + c);
            if let Some(other) = class_boundary[root] {
                return Err(Error::InvalidStructure(format!(
                    "identification is not consistent: boundary points p_{other} and p_{c} merged"
                )));
            }
            class_boundary[root] = Some(c);
        }
        let mut class_cells: Vec<Vec<usize>> = vec![Vec::new(); cell_nodes + boundary_size];
        for v in 0..cell_nodes {
            let root = uf.find(v);
            let cell = v / boundary_size;
            if class_cells[root].contains(&cell) {
                return Err(Error::InvalidStructure(format!(
                    "identification glues two boundary points of cell {cell}"
                )));
            }
            class_cells[root].push(cell);
        }
        for c in 0..boundary_size {
            let root = uf.find(cell_nodes + c);
            if class_cells[root].is_empty() {
                return Err(Error::InvalidStructure(format!(
                    "boundary point p_{c} is not the image of any first-level cell point"
                )));
            }
        }

        // Cell nodes are visited in lexicographic (i, a) order, so junctions
        // are numbered by their smallest representative.
        let mut junction_of_root = vec![None::<usize>; cell_nodes + boundary_size];
        let mut junction_count = 0;
        let mut placement = vec![Vec::with_capacity(boundary_size); symbol_count];
        for v in 0..cell_nodes {
            let root = uf.find(v);
            let place = match class_boundary[root] {
                Some(c) => Placement::Boundary(c),
                None => {
                    let k = *junction_of_root[root].get_or_insert_with(|| {
                        junction_count += 1;
                        junction_count - 1
                    });
                    Placement::Junction(k)
                }
            };
            placement[v / boundary_size].push(place);
        }

        if let Some(emb) = &embedding {
            if emb.boundary.len() != boundary_size || emb.maps.len() != symbol_count {
                return Err(Error::InvalidStructure(format!(
                    "embedding has {} boundary points and {} maps, expected {} and {}",
                    emb.boundary.len(),
                    emb.maps.len(),
                    boundary_size,
                    symbol_count
                )));
            }
        }

        Ok(Self {
            symbol_count,
            boundary_size,
            identifications,
            boundary_maps,
            embedding,
            placement,
            junction_count,
        })
    }

    /// Derives the level-one gluing from coordinates: points closer than
    /// [`COORDINATE_TOLERANCE`] are identified.
    pub fn from_embedding(embedding: Embedding) -> Result<Self> {
        let m = embedding.maps.len();
        let b = embedding.boundary.len();
        let images: Vec<(CellPoint, Point)> = (0..m)
            .flat_map(|i| (0..b).map(move |a| (i, a)))
            .map(|(i, a)| ((i, a), embedding.maps[i].apply(embedding.boundary[a])))
            .collect();
        let close = |p: Point, q: Point| {
            (p[0] - q[0]).abs() <= COORDINATE_TOLERANCE && (p[1] - q[1]).abs() <= COORDINATE_TOLERANCE
        };
        let mut identifications = Vec::new();
        let mut boundary_maps = Vec::new();
        for (k, &(p, x)) in images.iter().enumerate() {
            for &(q, y) in &images[k + 1..] {
                if p.0 != q.0 && close(x, y) {
                    identifications.push([p, q]);
                }
            }
            for (c, &z) in embedding.boundary.iter().enumerate() {
                if close(x, z) {
                    boundary_maps.push((p.0, p.1, c));
                }
            }
        }
        Self::new(m, b, identifications, boundary_maps, Some(embedding))
    }

    pub fn symbol_count(&self) -> usize {
        self.symbol_count
    }

    pub fn boundary_size(&self) -> usize {
        self.boundary_size
    }

    pub fn identifications(&self) -> &[[CellPoint; 2]] {
        &self.identifications
    }

    pub fn boundary_maps(&self) -> &[(usize, usize, usize)] {
        &self.boundary_maps
    }

    pub fn embedding(&self) -> Option<&Embedding> {
        self.embedding.as_ref()
    }

    /// Whether `(i, a)` and `(j, b)` denote the same point of `V_1`.
    pub fn identified(&self, p: CellPoint, q: CellPoint) -> bool {
        p == q || self.placement[p.0][p.1] == self.placement[q.0][q.1]
    }

    /// Number of vertices of `V_n`.
    pub fn vertex_count(&self, n: usize) -> usize {
        // |V_{n+1}| = |V_n| + |W_n| * junctions
        let mut count = self.boundary_size;
        let mut cells = 1usize;
        for _ in 0..n {
            count += cells * self.junction_count;
            cells *= self.symbol_count;
        }
        count
    }

    pub fn build_level(&self, n: usize) -> LevelComplex {
        let b = self.boundary_size;
        let mut cells = vec![Cell {
            word: Vec::new(),
            boundary: (0..b).collect(),
        }];
        let mut coords = self.embedding.as_ref().map(|e| e.boundary.clone());
        let mut cell_maps = self.embedding.as_ref().map(|_| vec![IDENTITY]);
        let mut vertex_count = b;

        for _ in 0..n {
            let mut next = Vec::with_capacity(cells.len() * self.symbol_count);
            let mut next_maps = cell_maps.as_ref().map(|m| Vec::with_capacity(m.len() * self.symbol_count));
            for (parent_idx, parent) in cells.iter().enumerate() {
                let first_new = vertex_count;
                vertex_count += self.junction_count;
                let parent_map = cell_maps.as_ref().map(|m| m[parent_idx]);
                if let (Some(coords), Some(pmap), Some(emb)) =
                    (coords.as_mut(), parent_map, self.embedding.as_ref())
                {
                    // Each junction gets the coordinate of its smallest representative.
                    let mut placed = vec![false; self.junction_count];
                    for i in 0..self.symbol_count {
                        for a in 0..b {
                            if let Placement::Junction(k) = self.placement[i][a] {
                                if !placed[k] {
                                    placed[k] = true;
                                    let p = pmap.apply(emb.maps[i].apply(emb.boundary[a]));
                                    coords.push(p);
                                }
                            }
                        }
                    }
                }
                for i in 0..self.symbol_count {
                    let boundary = self.placement[i]
                        .iter()
                        .map(|place| match *place {
                            Placement::Boundary(c) => parent.boundary[c],
                            Placement::Junction(k) => first_new + k,
                        })
                        .collect();
                    let mut word = parent.word.clone();
                    word.push(i);
                    next.push(Cell { word, boundary });
                    if let (Some(maps), Some(pmap), Some(emb)) =
                        (next_maps.as_mut(), parent_map, self.embedding.as_ref())
                    {
                        maps.push(compose(&pmap, &emb.maps[i]));
                    }
                }
            }
            cells = next;
            cell_maps = next_maps;
        }

        LevelComplex::new(n, vertex_count, coords, cells)
    }
}

const IDENTITY: AffineMap = AffineMap {
    linear: [[1.0, 0.0], [0.0, 1.0]],
    offset: [0.0, 0.0],
};

/// `outer ∘ inner`
fn compose(outer: &AffineMap, inner: &AffineMap) -> AffineMap {
    let a = outer.linear;
    let b = inner.linear;
    let mut linear = [[0.0; 2]; 2];
    for (r, row) in linear.iter_mut().enumerate() {
        for (c, entry) in row.iter_mut().enumerate() {
            *entry = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    AffineMap {
        linear,
        offset: outer.apply(inner.offset),
    }
}

/// The Sierpiński gasket with `p_1 = (1/2, √3/2)`, `p_2 = (0, 0)`,
/// `p_3 = (1, 0)` and `F_i(x) = (x + p_i) / 2`.
pub fn build_sierpinski_structure() -> SelfSimilarStructure {
    let boundary = vec![[0.5, 3f64.sqrt() / 2.0], [0.0, 0.0], [1.0, 0.0]];
    let maps = boundary.iter().map(|&p| AffineMap::halving_towards(p)).collect();
    SelfSimilarStructure::from_embedding(Embedding { boundary, maps })
        .expect("the Sierpinski gasket embedding is a valid p.c.f. structure")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cell {
    /// The word `w ∈ W_n` as 0-based symbols.
    pub word: Vec<usize>,
    /// `F_w(V_0)` as canonical vertex ids, in boundary-index order.
    pub boundary: Vec<VertexId>,
}

#[derive(Debug, Clone)]
pub struct LevelComplex {
    pub level: usize,
    pub vertex_count: usize,
    pub coordinates: Option<Vec<Point>>,
    pub cells: Vec<Cell>,
    pub edges: Vec<(VertexId, VertexId)>,
    incidence: Vec<Vec<usize>>,
}

impl LevelComplex {
    fn new(level: usize, vertex_count: usize, coordinates: Option<Vec<Point>>, cells: Vec<Cell>) -> Self {
        let mut edges = BTreeSet::new();
        let mut incidence = vec![Vec::new(); vertex_count];
        for (idx, cell) in cells.iter().enumerate() {
            for (k, &x) in cell.boundary.iter().enumerate() {
                incidence[x].push(idx);
                for &y in &cell.boundary[k + 1..] {
                    edges.insert((x.min(y), x.max(y)));
                }
            }
        }
        Self {
            level,
            vertex_count,
            coordinates,
            cells,
            edges: edges.into_iter().collect(),
            incidence,
        }
    }

    pub fn vertices(&self) -> std::ops::Range<VertexId> {
        0..self.vertex_count
    }

    pub fn coordinate(&self, x: VertexId) -> Option<Point> {
        self.coordinates.as_ref().and_then(|c| c.get(x).copied())
    }

    /// Cells whose boundary contains `x`.
    pub fn cells_containing(&self, x: VertexId) -> Result<Vec<&Cell>> {
        let idx = self.incidence.get(x).ok_or(Error::UnknownVertex(x))?;
        Ok(idx.iter().map(|&i| &self.cells[i]).collect())
    }

    /// Vertices sharing a cell with `x`, excluding `x` itself.
    pub fn neighbours(&self, x: VertexId) -> Result<Vec<VertexId>> {
        let mut out = BTreeSet::new();
        for cell in self.cells_containing(x)? {
            out.extend(cell.boundary.iter().copied().filter(|&y| y != x));
        }
        Ok(out.into_iter().collect())
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // keep the smaller root so classes are keyed by their least member
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sg_vertex_count(n: u32) -> usize {
        3 * (3usize.pow(n) + 1) / 2
    }

    #[test]
    fn sierpinski_boundary_coordinates() {
        let sg = build_sierpinski_structure();
        let emb = sg.embedding().unwrap();
        assert_eq!(emb.boundary[0], [0.5, 3f64.sqrt() / 2.0]);
        assert_eq!(emb.boundary[1], [0.0, 0.0]);
        assert_eq!(emb.boundary[2], [1.0, 0.0]);
        assert_eq!(sg.symbol_count(), 3);
        assert_eq!(sg.boundary_size(), 3);
        assert_eq!(sg.identifications().len(), 3);
        assert_eq!(sg.boundary_maps(), &[(0, 0, 0), (1, 1, 1), (2, 2, 2)]);
    }

    #[test]
    fn small_levels() {
        let sg = build_sierpinski_structure();
        let l0 = sg.build_level(0);
        assert_eq!((l0.vertex_count, l0.cells.len(), l0.edges.len()), (3, 1, 3));
        let l1 = sg.build_level(1);
        assert_eq!((l1.vertex_count, l1.cells.len(), l1.edges.len()), (6, 3, 9));
        let l2 = sg.build_level(2);
        assert_eq!((l2.vertex_count, l2.cells.len()), (15, 9));
    }

    #[test]
    fn vertex_counts_match_closed_form() {
        let sg = build_sierpinski_structure();
        for n in 0..=5u32 {
            assert_eq!(sg.build_level(n as usize).vertex_count, sg_vertex_count(n));
            assert_eq!(sg.vertex_count(n as usize), sg_vertex_count(n));
        }
    }

    #[test]
    fn cells_containing_counts() {
        let sg = build_sierpinski_structure();
        let l1 = sg.build_level(1);
        for x in 3..6 {
            assert_eq!(l1.cells_containing(x).unwrap().len(), 2);
        }
        let l0 = sg.build_level(0);
        assert_eq!(l0.cells_containing(1).unwrap().len(), 1);
        let l4 = sg.build_level(4);
        assert_eq!(l4.cells_containing(0).unwrap().len(), 1);
        assert!(matches!(l1.cells_containing(6), Err(Error::UnknownVertex(6))));
    }

    #[test]
    fn rejects_gluing_within_one_cell() {
        let err = SelfSimilarStructure::new(2, 2, vec![[(0, 0), (0, 1)]], vec![(0, 0, 0), (1, 1, 1)], None);
        assert!(matches!(err, Err(Error::InvalidStructure(_))));
    }

    #[test]
    fn rejects_merged_boundary_points() {
        let err = SelfSimilarStructure::new(
            2,
            2,
            vec![[(0, 1), (1, 0)]],
            vec![(0, 0, 0), (1, 1, 1), (0, 1, 1)],
            None,
        );
        assert!(matches!(err, Err(Error::InvalidStructure(_))));
    }

    #[test]
    fn rejects_missing_boundary_point() {
        let err = SelfSimilarStructure::new(2, 2, vec![[(0, 1), (1, 0)]], vec![(0, 0, 0)], None);
        assert!(matches!(err, Err(Error::InvalidStructure(_))));
    }

    #[test]
    fn interval_hierarchy() {
        // [0,1] with F_1(x) = x/2, F_2(x) = (x+1)/2
        let s = SelfSimilarStructure::new(2, 2, vec![[(0, 1), (1, 0)]], vec![(0, 0, 0), (1, 1, 1)], None).unwrap();
        let l3 = s.build_level(3);
        assert_eq!(l3.vertex_count, 9);
        assert_eq!(l3.edges.len(), 8);
        assert!(l3.coordinates.is_none());
    }
}
