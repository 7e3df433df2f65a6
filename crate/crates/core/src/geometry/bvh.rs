use super::closest::{closest_point_on_triangle, TriangleHit};
use super::mesh::TriangleMesh;
use super::vec3::Vec3;

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
struct Node {
    min: Vec3,
    max: Vec3,
    kind: NodeKind,
}

#[derive(Debug, Clone, Copy)]
enum NodeKind {
    /// `start..start+count` into `Bvh::faces`.
    Leaf { start: u32, count: u32 },
    Inner { left: u32, right: u32 },
}

/// Axis-aligned bounding-volume hierarchy over the non-degenerate faces of a
/// mesh, used for closest-point queries.
#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    faces: Vec<u32>,
}

impl Bvh {
    pub fn build(mesh: &TriangleMesh) -> Self {
        let mut faces: Vec<u32> = (0..mesh.face_count() as u32)
            .filter(|&f| !mesh.degenerate[f as usize])
            .collect();
        let centroids: Vec<Vec3> = (0..mesh.face_count())
            .map(|f| {
                let [a, b, c] = mesh.triangle(f);
                (a + b + c) / 3.0
            })
            .collect();
        let mut nodes = Vec::with_capacity(2 * faces.len() / LEAF_SIZE + 1);
        if !faces.is_empty() {
            let len = faces.len();
            build_node(mesh, &centroids, &mut faces, 0, len, &mut nodes);
        }
        Self { nodes, faces }
    }

    /// Closest non-degenerate face to `p`. Ties in distance resolve to the lowest
    /// face index, so the result matches an exhaustive scan exactly.
    pub fn closest(&self, mesh: &TriangleMesh, p: Vec3) -> Option<(usize, TriangleHit)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<(usize, TriangleHit)> = None;
        let mut best_d2 = f64::INFINITY;
        let mut stack = Vec::with_capacity(64);
        stack.push(0u32);
        while let Some(idx) = stack.pop() {
            let node = &self.nodes[idx as usize];
            if box_distance_squared(node.min, node.max, p) > best_d2 {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, count } => {
                    for &f in &self.faces[start as usize..(start + count) as usize] {
                        let [a, b, c] = mesh.triangle(f as usize);
                        let hit = closest_point_on_triangle(p, a, b, c);
                        let better = match &best {
                            None => true,
                            Some((bf, bh)) => {
                                hit.distance_squared < bh.distance_squared
                                    || (hit.distance_squared == bh.distance_squared
                                        && (f as usize) < *bf)
                            }
                        };
                        if better {
                            best_d2 = hit.distance_squared;
                            best = Some((f as usize, hit));
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    let l = &self.nodes[left as usize];
                    let r = &self.nodes[right as usize];
                    let dl = box_distance_squared(l.min, l.max, p);
                    let dr = box_distance_squared(r.min, r.max, p);
                    // Nearer child on top of the stack.
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        best
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

fn build_node(
    mesh: &TriangleMesh,
    centroids: &[Vec3],
    faces: &mut [u32],
    offset: usize,
    len: usize,
    nodes: &mut Vec<Node>,
) -> u32 {
    let slice = &mut faces[offset..offset + len];
    let (mut min, mut max) = (Vec3::splat(f64::INFINITY), Vec3::splat(f64::NEG_INFINITY));
    let (mut cmin, mut cmax) = (min, max);
    for &f in slice.iter() {
        for v in mesh.triangle(f as usize) {
            min = min.min(v);
            max = max.max(v);
        }
        cmin = cmin.min(centroids[f as usize]);
        cmax = cmax.max(centroids[f as usize]);
    }

    let index = nodes.len() as u32;
    if len <= LEAF_SIZE {
        nodes.push(Node {
            min,
            max,
            kind: NodeKind::Leaf {
                start: offset as u32,
                count: len as u32,
            },
        });
        return index;
    }

    let extent = cmax - cmin;
    let axis = if extent.x >= extent.y && extent.x >= extent.z {
        0
    } else if extent.y >= extent.z {
        1
    } else {
        2
    };
    let mid = len / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a as usize][axis]
            .total_cmp(&centroids[b as usize][axis])
            .then(a.cmp(&b))
    });

    nodes.push(Node {
        min,
        max,
        kind: NodeKind::Leaf { start: 0, count: 0 },
    });
    let left = build_node(mesh, centroids, faces, offset, mid, nodes);
    let right = build_node(mesh, centroids, faces, offset + mid, len - mid, nodes);
    nodes[index as usize].kind = NodeKind::Inner { left, right };
    index
}

fn box_distance_squared(min: Vec3, max: Vec3, p: Vec3) -> f64 {
    let d = (min - p).max(p - max).max(Vec3::ZERO);
    d.norm_squared()
}
