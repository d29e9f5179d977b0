use std::collections::HashMap;

use crate::volumes::filter::smooth_nd;
use crate::volumes::{GridSpec, LabelVolume, ScalarVolume};
use crate::{Error, Point3, Result};

pub const ISO_LEVEL: f64 = 0.5;
const SMOOTHING_VOXELS: f64 = 1.0;
const PAD: usize = 3;

/// Triangulated surface with named per-vertex scalar channels.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SurfaceMesh {
    pub vertices: Vec<Point3>,
    pub triangles: Vec<[u32; 3]>,
    pub channels: Vec<(String, Vec<f64>)>,
}

impl SurfaceMesh {
    /// Signed enclosed volume (positive for outward orientation).
    pub fn volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.vertices[i as usize]);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    fn edge_counts(&self) -> HashMap<(u32, u32), usize> {
        let mut edges = HashMap::new();
        for t in &self.triangles {
            for q in 0..3 {
                let (a, b) = (t[q], t[(q + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        edges
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edge_counts().len() as i64 + self.triangles.len() as i64
    }

    /// Every edge is shared by exactly two triangles.
    pub fn is_closed(&self) -> bool {
        self.edge_counts().values().all(|&c| c == 2)
    }

    /// Every directed edge appears once: neighbouring triangles agree on
    /// orientation.
    pub fn is_consistently_oriented(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        for t in &self.triangles {
            for q in 0..3 {
                if !seen.insert((t[q], t[(q + 1) % 3])) {
                    return false;
                }
            }
        }
        true
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn set_channel(&mut self, name: &str, values: Vec<f64>) {
        match self.channels.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => slot.1 = values,
            None => self.channels.push((name.to_string(), values)),
        }
    }
}

/// Largest 6-connected component of a label volume and the number of
/// components found.
pub fn largest_component(labels: &LabelVolume) -> (LabelVolume, usize) {
    let spec = labels.spec();
    let [nx, ny, nz] = spec.dims;
    let mut comp = vec![0u32; spec.len()];
    let mut sizes = vec![0usize];
    let mut stack = Vec::new();
    for start in 0..spec.len() {
        if labels.data()[start] == 0 || comp[start] != 0 {
            continue;
        }
        let id = sizes.len() as u32;
        sizes.push(0);
        comp[start] = id;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            sizes[id as usize] += 1;
            let [i, j, k] = spec.coords(idx);
            let mut visit = |n: usize| {
                if labels.data()[n] != 0 && comp[n] == 0 {
                    comp[n] = id;
                    stack.push(n);
                }
            };
            if i > 0 { visit(idx - 1); }
            if i + 1 < nx { visit(idx + 1); }
            if j > 0 { visit(idx - nx); }
            if j + 1 < ny { visit(idx + nx); }
            if k > 0 { visit(idx - nx * ny); }
            if k + 1 < nz { visit(idx + nx * ny); }
        }
    }
    let n_components = sizes.len() - 1;
    let best = (1..sizes.len()).max_by_key(|&c| (sizes[c], std::cmp::Reverse(c))).unwrap_or(0) as u32;
    let out = LabelVolume::from_vec(spec.clone(), comp.iter().map(|&c| (c == best && c != 0) as u8).collect())
        .expect("same grid");
    (out, n_components)
}

// Kuhn split of the unit cube into six tetrahedra sharing the 0-7 diagonal.
// Corner c has offset (c & 1, (c >> 1) & 1, (c >> 2) & 1).
const TETS: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 1, 5, 7],
    [0, 2, 3, 7],
    [0, 2, 6, 7],
    [0, 4, 5, 7],
    [0, 4, 6, 7],
];

/// Iso-surface of the smoothed labels at level 0.5 by marching tetrahedra.
///
/// Returns the mesh and whether the labels had to be reduced to their
/// largest connected component.
pub fn extract_mesh(labels: &LabelVolume) -> Result<(SurfaceMesh, bool)> {
    if labels.count() == 0 {
        return Err(Error::EmptyShape("cannot mesh an empty label volume".into()));
    }
    let (main, components) = largest_component(labels);
    let flagged = components > 1;
    if flagged {
        log::warn!("label volume has {components} components; meshing the largest");
    }
    let src = main.spec();
    let dims = src.dims.map(|d| d + 2 * PAD);
    let origin = [0, 1, 2].map(|a| src.origin[a] - PAD as f64 * src.spacing);
    let spec = GridSpec::new(dims, src.spacing, origin)?;
    let mut values = vec![0.0; spec.len()];
    for (idx, &l) in main.data().iter().enumerate() {
        if l != 0 {
            let [i, j, k] = src.coords(idx);
            values[spec.index(i + PAD, j + PAD, k + PAD)] = 1.0;
        }
    }
    smooth_nd(&mut values, &dims, SMOOTHING_VOXELS);
    let field = ScalarVolume::from_vec(spec.clone(), values)?;
    Ok((march(&field, ISO_LEVEL), flagged))
}

/// Marching tetrahedra over every cube of a scalar grid. Values above
/// `iso` are inside; triangles are oriented with normals pointing outward.
pub fn march(field: &ScalarVolume, iso: f64) -> SurfaceMesh {
    let spec = field.spec();
    let [nx, ny, nz] = spec.dims;
    let v = field.data();
    let mut mesh = SurfaceMesh::default();
    let mut edge_vertex: HashMap<(usize, usize), u32> = HashMap::new();
    let mut vertex_on = |a: usize, b: usize, mesh: &mut SurfaceMesh| -> u32 {
        let key = (a.min(b), a.max(b));
        *edge_vertex.entry(key).or_insert_with(|| {
            let (va, vb) = (v[key.0], v[key.1]);
            let (pa, pb) = (spec.world_of_index(key.0), spec.world_of_index(key.1));
            let t = (iso - va) / (vb - va);
            mesh.vertices.push(pa + (pb - pa) * t);
            (mesh.vertices.len() - 1) as u32
        })
    };
    for k in 0..nz.saturating_sub(1) {
        for j in 0..ny.saturating_sub(1) {
            for i in 0..nx.saturating_sub(1) {
                let corner = |c: usize| spec.index(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
                let corners: [usize; 8] = std::array::from_fn(corner);
                let any_in = corners.iter().any(|&c| v[c] > iso);
                let any_out = corners.iter().any(|&c| v[c] <= iso);
                if !(any_in && any_out) {
                    continue;
                }
                for tet in TETS {
                    let ids = tet.map(|c| corners[c]);
                    let (inside, outside): (Vec<usize>, Vec<usize>) = ids.iter().partition(|&&c| v[c] > iso);
                    if inside.is_empty() || outside.is_empty() {
                        continue;
                    }
                    let centroid = |s: &[usize]| {
                        s.iter().map(|&c| spec.world_of_index(c)).sum::<Point3>() / s.len() as f64
                    };
                    let outward = centroid(&outside) - centroid(&inside);
                    let emit = |tri: [u32; 3], mesh: &mut SurfaceMesh| {
                        let [a, b, c] = tri.map(|q| mesh.vertices[q as usize]);
                        let n = (b - a).cross(&(c - a));
                        if n.dot(&outward) < 0.0 {
                            mesh.triangles.push([tri[0], tri[2], tri[1]]);
                        } else {
                            mesh.triangles.push(tri);
                        }
                    };
                    match (inside.len(), outside.len()) {
                        (1, 3) | (3, 1) => {
                            let (lone, rest) = if inside.len() == 1 { (inside[0], &outside) } else { (outside[0], &inside) };
                            let tri = [
                                vertex_on(lone, rest[0], &mut mesh),
                                vertex_on(lone, rest[1], &mut mesh),
                                vertex_on(lone, rest[2], &mut mesh),
                            ];
                            emit(tri, &mut mesh);
                        }
                        _ => {
                            let (a0, a1, b0, b1) = (inside[0], inside[1], outside[0], outside[1]);
                            let q = [
                                vertex_on(a0, b0, &mut mesh),
                                vertex_on(a0, b1, &mut mesh),
                                vertex_on(a1, b1, &mut mesh),
                                vertex_on(a1, b0, &mut mesh),
                            ];
                            emit([q[0], q[1], q[2]], &mut mesh);
                            emit([q[0], q[2], q[3]], &mut mesh);
                        }
                    }
                }
            }
        }
    }
    mesh
}

/// Mean of `map` over voxel centres within `radius` of each vertex; vertices
/// whose sphere holds no voxel centre take a trilinear sample instead.
/// Returns the values and the number of such fallbacks.
pub fn project_to_mesh(map: &ScalarVolume, mesh: &SurfaceMesh, radius: f64) -> Result<(Vec<f64>, usize)> {
    if !(radius > 0.0) {
        return Err(Error::Config(format!("projection radius {radius} must be > 0")));
    }
    let spec = map.spec();
    let r2 = radius * radius;
    let reach = Point3::repeat(radius);
    let mut fallbacks = 0;
    let values = mesh
        .vertices
        .iter()
        .map(|p| {
            let lo = spec.to_voxel(&(p - reach)).map(|c| c.ceil().max(0.0) as usize);
            let hi = spec.to_voxel(&(p + reach));
            let hi = [0, 1, 2].map(|a| (hi[a].floor().min(spec.dims[a] as f64 - 1.0)).max(-1.0) as i64);
            let mut sum = 0.0;
            let mut n = 0usize;
            for k in lo[2] as i64..=hi[2] {
                for j in lo[1] as i64..=hi[1] {
                    for i in lo[0] as i64..=hi[0] {
                        let (i, j, k) = (i as usize, j as usize, k as usize);
                        if (spec.world(i, j, k) - p).norm_squared() <= r2 {
                            sum += *map.get(i, j, k);
                            n += 1;
                        }
                    }
                }
            }
            if n > 0 {
                sum / n as f64
            } else {
                fallbacks += 1;
                map.sample(p)
            }
        })
        .collect();
    Ok((values, fallbacks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ball(r: f64) -> LabelVolume {
        let n = (2.0 * r) as usize + 8;
        let g = GridSpec::centered([n, n, n], 1.0, [0.0; 3]).unwrap();
        LabelVolume::from_fn(g, |_, p| (p.norm() <= r) as u8)
    }

    #[test]
    fn ball_mesh_volume_and_topology() {
        let labels = ball(20.0);
        let (mesh, flagged) = extract_mesh(&labels).unwrap();
        assert!(!flagged);
        let analytic = 4.0 / 3.0 * PI * 20f64.powi(3);
        let v = mesh.volume();
        assert!((v - analytic).abs() / analytic < 0.02, "{v} vs {analytic}");
        assert!((v - labels.count() as f64).abs() / (labels.count() as f64) < 0.02);
        assert!(mesh.is_closed());
        assert!(mesh.is_consistently_oriented());
        assert_eq!(mesh.euler_characteristic(), 2);
    }

    #[test]
    fn vertices_near_label_boundary() {
        let labels = ball(8.0);
        let (mesh, _) = extract_mesh(&labels).unwrap();
        let boundary = labels.boundary_points();
        for p in &mesh.vertices {
            let d = boundary.iter().map(|b| (b - p).norm()).fold(f64::INFINITY, f64::min);
            assert!(d <= 1.0, "{d}");
        }
    }

    #[test]
    fn keeps_largest_component() {
        let g = GridSpec::centered([30, 20, 20], 1.0, [0.0; 3]).unwrap();
        let labels = LabelVolume::from_fn(g, |_, p| {
            ((p - Point3::new(-7.0, 0.0, 0.0)).norm() <= 5.0 || (p - Point3::new(9.0, 0.0, 0.0)).norm() <= 3.0) as u8
        });
        let (mesh, flagged) = extract_mesh(&labels).unwrap();
        assert!(flagged);
        assert!(mesh.vertices.iter().all(|p| p.x < 2.0));
        assert_eq!(mesh.euler_characteristic(), 2);
    }

    #[test]
    fn projection_of_constant_and_ramp() {
        let labels = ball(6.0);
        let (mesh, _) = extract_mesh(&labels).unwrap();
        let g = labels.spec().clone();
        let c = ScalarVolume::filled(g.clone(), 2.5);
        let (vals, fb) = project_to_mesh(&c, &mesh, 4.0).unwrap();
        assert_eq!(fb, 0);
        assert!(vals.iter().all(|&v| (v - 2.5).abs() < 1e-12));
        // radius below the voxel spacing: ramp value within one voxel gradient
        let ramp = ScalarVolume::from_fn(g, |_, p| 0.3 * p.x);
        let (vals, _) = project_to_mesh(&ramp, &mesh, 0.4).unwrap();
        for (v, p) in vals.iter().zip(&mesh.vertices) {
            assert!((v - 0.3 * p.x).abs() <= 0.3 + 1e-12);
        }
    }

    #[test]
    fn projection_ignores_far_values() {
        let labels = ball(6.0);
        let (mesh, _) = extract_mesh(&labels).unwrap();
        let g = labels.spec().clone();
        let a = ScalarVolume::from_fn(g.clone(), |_, p| p.y);
        let b = ScalarVolume::from_fn(g, |_, p| if p.norm() > 12.0 { 100.0 } else { p.y });
        assert_eq!(project_to_mesh(&a, &mesh, 4.0).unwrap(), project_to_mesh(&b, &mesh, 4.0).unwrap());
    }
}
