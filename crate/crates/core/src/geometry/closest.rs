use super::vec3::Vec3;

/// Which part of a triangle the closest point lies on. Indices follow the
/// face's vertex order; edge `k` runs from vertex `k` to vertex `(k+1) % 3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosestFeature {
    Vertex(u8),
    Edge(u8),
    Face,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleHit {
    pub point: Vec3,
    pub distance_squared: f64,
    pub feature: ClosestFeature,
}

/// Closest point on triangle `(a, b, c)` to `p` by Voronoi-region
/// classification.
pub fn closest_point_on_triangle(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> TriangleHit {
    let hit = |point: Vec3, feature| TriangleHit {
        point,
        distance_squared: (p - point).norm_squared(),
        feature,
    };

    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return hit(a, ClosestFeature::Vertex(0));
    }

    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return hit(b, ClosestFeature::Vertex(1));
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return hit(a + ab * v, ClosestFeature::Edge(0));
    }

    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return hit(c, ClosestFeature::Vertex(2));
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return hit(a + ac * w, ClosestFeature::Edge(2));
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return hit(b + (c - b) * w, ClosestFeature::Edge(1));
    }

    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    hit(a + ab * v + ac * w, ClosestFeature::Face)
}
