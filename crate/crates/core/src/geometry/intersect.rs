use super::TriMesh;
use crate::math::Vec3;

/// Closest accepted intersection along a ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub face: usize,
    /// Barycentric weights of the face's second and third vertex.
    pub u: f64,
    pub v: f64,
}

impl Hit {
    /// Orders by distance, then by face index, so every traversal order
    /// picks the same hit.
    fn better_than(&self, other: &Hit) -> bool {
        self.t < other.t || (self.t == other.t && self.face < other.face)
    }
}

const T_MIN: f64 = 1e-9;
/// Barycentric slack, so a ray through a shared edge or vertex cannot slip
/// between neighbouring faces through rounding.
const EDGE_EPS: f64 = 1e-9;

/// Möller–Trumbore, two-sided. Returns `(t, u, v)` for `t > 1e-9`.
pub fn intersect_triangle(origin: Vec3, dir: Vec3, p: [Vec3; 3]) -> Option<(f64, f64, f64)> {
    let e1 = p[1] - p[0];
    let e2 = p[2] - p[0];
    let pv = dir.cross(e2);
    let det = e1.dot(pv);
    if det.abs() < 1e-15 {
        return None;
    }
    let inv = 1.0 / det;
    let tv = origin - p[0];
    let u = tv.dot(pv) * inv;
    if !(-EDGE_EPS..=1.0 + EDGE_EPS).contains(&u) {
        return None;
    }
    let qv = tv.cross(e1);
    let v = dir.dot(qv) * inv;
    if v < -EDGE_EPS || u + v > 1.0 + EDGE_EPS {
        return None;
    }
    let t = e2.dot(qv) * inv;
    (t > T_MIN).then_some((t, u, v))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Accel {
    BruteForce,
    #[default]
    Bvh,
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    lo: Vec3,
    hi: Vec3,
}

impl Aabb {
    fn empty() -> Self {
        Aabb {
            lo: Vec3::splat(f64::INFINITY),
            hi: Vec3::splat(f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: Vec3) {
        self.lo = Vec3::new(self.lo.x.min(p.x), self.lo.y.min(p.y), self.lo.z.min(p.z));
        self.hi = Vec3::new(self.hi.x.max(p.x), self.hi.y.max(p.y), self.hi.z.max(p.z));
    }

    /// Entry distance of the slab test, or `None` on a miss.
    fn entry(&self, origin: Vec3, inv_dir: Vec3, t_max: f64) -> Option<f64> {
        let mut t0: f64 = 0.0;
        let mut t1 = t_max;
        for a in 0..3 {
            let (mut ta, mut tb) = ((self.lo[a] - origin[a]) * inv_dir[a], (self.hi[a] - origin[a]) * inv_dir[a]);
            if ta.is_nan() || tb.is_nan() {
                // ray parallel to and inside the slab plane: no constraint
                ta = f64::NEG_INFINITY;
                tb = f64::INFINITY;
            }
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
        }
        // widened slightly so rounding never culls a box holding the best hit
        (t0 <= t1 * (1.0 + 1e-9) + 1e-12).then_some(t0)
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

/// Median-split bounding volume hierarchy over the faces of a mesh.
#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<usize>,
}

const LEAF_SIZE: usize = 4;

impl Bvh {
    pub fn build(mesh: &TriMesh) -> Self {
        let mut order: Vec<usize> = (0..mesh.faces.len()).collect();
        let centroids: Vec<Vec3> = (0..mesh.faces.len())
            .map(|f| {
                let [a, b, c] = mesh.face_vertices(f);
                (a + b + c) / 3.0
            })
            .collect();
        let mut nodes = Vec::new();
        if !order.is_empty() {
            let n = order.len();
            build_node(mesh, &centroids, &mut order, 0, n, &mut nodes);
        }
        Bvh { nodes, order }
    }

    pub fn intersect(&self, mesh: &TriMesh, origin: Vec3, dir: Vec3) -> Option<Hit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best: Option<Hit> = None;
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let t_max = best.map_or(f64::INFINITY, |h| h.t);
            let Some(_) = self.nodes[i].bounds().entry(origin, inv, t_max) else { continue };
            match &self.nodes[i] {
                Node::Leaf { start, end, .. } => {
                    for &f in &self.order[*start..*end] {
                        if let Some((t, u, v)) = intersect_triangle(origin, dir, mesh.face_vertices(f)) {
                            let hit = Hit { t, face: f, u, v };
                            if best.is_none_or(|b| hit.better_than(&b)) {
                                best = Some(hit);
                            }
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    stack.push(*right);
                    stack.push(*left);
                }
            }
        }
        best
    }
}

fn build_node(
    mesh: &TriMesh,
    centroids: &[Vec3],
    order: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    for &f in &order[start..end] {
        for p in mesh.face_vertices(f) {
            bounds.grow(p);
        }
        cbounds.grow(centroids[f]);
    }
    let me = nodes.len();
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf { bounds, start, end });
        return me;
    }
    let ext = cbounds.hi - cbounds.lo;
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    let mid = (start + end) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |a, b| {
        centroids[*a][axis].total_cmp(&centroids[*b][axis]).then(a.cmp(b))
    });
    // placeholder, patched once both children exist
    nodes.push(Node::Leaf { bounds, start, end });
    let left = build_node(mesh, centroids, order, start, mid, nodes);
    let right = build_node(mesh, centroids, order, mid, end, nodes);
    nodes[me] = Node::Inner { bounds, left, right };
    me
}

/// Ray queries against a mesh, brute force or through a [`Bvh`].
pub struct MeshIntersector<'a> {
    mesh: &'a TriMesh,
    bvh: Option<Bvh>,
}

impl<'a> MeshIntersector<'a> {
    pub fn new(mesh: &'a TriMesh, accel: Accel) -> Self {
        let bvh = (accel == Accel::Bvh).then(|| Bvh::build(mesh));
        MeshIntersector { mesh, bvh }
    }

    pub fn intersect(&self, origin: Vec3, dir: Vec3) -> Option<Hit> {
        match &self.bvh {
            Some(b) => b.intersect(self.mesh, origin, dir),
            None => {
                let mut best: Option<Hit> = None;
                for f in 0..self.mesh.faces.len() {
                    if let Some((t, u, v)) = intersect_triangle(origin, dir, self.mesh.face_vertices(f)) {
                        let hit = Hit { t, face: f, u, v };
                        if best.is_none_or(|b| hit.better_than(&b)) {
                            best = Some(hit);
                        }
                    }
                }
                best
            }
        }
    }
}
