//! Discretization grids over axis-aligned domains in R^d.
//!
//! A [`Grid`] records the observation sites `t_1, ..., t_p`, the bounding
//! domain box, and the volumes of a disjoint partition `{A_j}` with
//! `t_j in A_j`. Those volumes are the Riemann weights of the functional
//! regression estimator. In 1D cells are midpoint intervals; for d >= 2 they
//! are Voronoi cells discretized on a regular fine grid.

use crate::error::{FlError, Result};

/// Relative separation (to the box diameter) below which two points are
/// treated as duplicates.
const DUPLICATE_REL_TOL: f64 = 1e-12;

/// Fine-grid resolution used for volume and fill-distance computations.
pub fn default_resolution(dim: usize) -> usize {
    match dim {
        0 | 1 => 0,
        2 => 128,
        3 => 48,
        _ => 12,
    }
}

/// Axis-aligned box `[lower_1, upper_1] x ... x [lower_d, upper_d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl DomainBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(FlError::Invalid(format!(
                "domain box corners must be non-empty and of equal length, got {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        for (axis, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(FlError::Invalid(format!(
                    "domain box axis {axis} must satisfy lower < upper with finite bounds, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(DomainBox { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| hi - lo)
            .product()
    }

    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| (hi - lo) * (hi - lo))
            .sum::<f64>()
            .sqrt()
    }

    /// Containment in the closed box.
    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| *x >= *lo && *x <= *hi)
    }
}

/// Observation sites with their partition volumes.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<Vec<f64>>,
    dim: usize,
    domain_box: DomainBox,
    volumes: Vec<f64>,
}

impl Grid {
    /// Number of discretization points `p`.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j]
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn domain_box(&self) -> &DomainBox {
        &self.domain_box
    }

    /// Rebuild a grid from stored parts (model files), revalidating every
    /// invariant.
    pub fn from_parts(
        points: Vec<Vec<f64>>,
        domain_box: DomainBox,
        volumes: Vec<f64>,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(FlError::Invalid("grid needs at least one point".into()));
        }
        if volumes.len() != points.len() {
            return Err(FlError::Invalid(format!(
                "{} volumes for {} points",
                volumes.len(),
                points.len()
            )));
        }
        let dim = domain_box.dim();
        for (j, pt) in points.iter().enumerate() {
            if pt.len() != dim {
                return Err(FlError::Invalid(format!(
                    "point {j} has dimension {}, expected {dim}",
                    pt.len()
                )));
            }
            if pt.iter().any(|x| !x.is_finite()) {
                return Err(FlError::Invalid(format!("point {j} is not finite")));
            }
            if !domain_box.contains(pt) {
                return Err(FlError::Invalid(format!(
                    "point {j} lies outside the domain box"
                )));
            }
        }
        check_distinct(&points, domain_box.diameter())?;
        let mut total = 0.0;
        for (j, v) in volumes.iter().enumerate() {
            if !(*v > 0.0) || !v.is_finite() {
                return Err(FlError::Invalid(format!(
                    "volume {j} must be strictly positive, got {v}"
                )));
            }
            total += v;
        }
        let box_vol = domain_box.volume();
        if ((total - box_vol) / box_vol).abs() > 1e-6 {
            return Err(FlError::Invalid(format!(
                "volumes sum to {total}, expected box volume {box_vol}"
            )));
        }
        Ok(Grid {
            points,
            dim,
            domain_box,
            volumes,
        })
    }
}

fn check_distinct(points: &[Vec<f64>], diameter: f64) -> Result<()> {
    let tol = DUPLICATE_REL_TOL * diameter;
    for j in 1..points.len() {
        for i in 0..j {
            let dist = euclidean(&points[i], &points[j]);
            if dist <= tol {
                return Err(FlError::Invalid(format!(
                    "points {i} and {j} coincide (separation {dist:.3e})"
                )));
            }
        }
    }
    Ok(())
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Build a 1D grid on the open interval `(a, b)` with midpoint cells: cell `j`
/// runs from the midpoint with the left neighbor to the midpoint with the
/// right neighbor, and the boundary cells extend to `a` and `b`. The volumes
/// telescope to `b - a` exactly.
pub fn build_grid_1d(points: &[f64], domain: (f64, f64)) -> Result<Grid> {
    let (a, b) = domain;
    let domain_box = DomainBox::new(vec![a], vec![b])?;
    if points.is_empty() {
        return Err(FlError::Invalid("grid needs at least one point".into()));
    }
    let tol = DUPLICATE_REL_TOL * (b - a);
    for (j, t) in points.iter().enumerate() {
        if !t.is_finite() {
            return Err(FlError::Invalid(format!("point {j} is not finite")));
        }
        if *t <= a || *t >= b {
            return Err(FlError::Invalid(format!(
                "point {j} ({t}) is outside the open domain ({a}, {b})"
            )));
        }
        if j > 0 {
            if points[j] <= points[j - 1] {
                return Err(FlError::Invalid(format!(
                    "points must be strictly increasing; point {j} ({}) does not exceed point {} ({})",
                    points[j],
                    j - 1,
                    points[j - 1]
                )));
            }
            if points[j] - points[j - 1] <= tol {
                return Err(FlError::Invalid(format!(
                    "points {} and {j} coincide (separation {:.3e})",
                    j - 1,
                    points[j] - points[j - 1]
                )));
            }
        }
    }

    let p = points.len();
    let mut volumes = Vec::with_capacity(p);
    for j in 0..p {
        let left = if j == 0 {
            a
        } else {
            0.5 * (points[j - 1] + points[j])
        };
        let right = if j == p - 1 {
            b
        } else {
            0.5 * (points[j] + points[j + 1])
        };
        volumes.push(right - left);
    }

    Ok(Grid {
        points: points.iter().map(|t| vec![*t]).collect(),
        dim: 1,
        domain_box,
        volumes,
    })
}

/// Build a d-dimensional grid (d >= 2) whose cell volumes come from a Voronoi
/// assignment of a regular fine grid of `resolution^d` cells over the box.
/// Ties go to the lowest point index. The volumes sum to the box volume.
pub fn build_grid_nd(
    points: &[Vec<f64>],
    domain_box: &DomainBox,
    resolution: usize,
) -> Result<Grid> {
    let dim = domain_box.dim();
    if dim < 2 {
        return Err(FlError::Invalid(format!(
            "build_grid_nd needs dimension >= 2, got {dim}; use build_grid_1d"
        )));
    }
    if resolution < 32 {
        return Err(FlError::Invalid(format!(
            "fine-grid resolution must be at least 32 per axis, got {resolution}"
        )));
    }
    if points.is_empty() {
        return Err(FlError::Invalid("grid needs at least one point".into()));
    }
    for (j, pt) in points.iter().enumerate() {
        if pt.len() != dim {
            return Err(FlError::Invalid(format!(
                "point {j} has dimension {}, expected {dim}",
                pt.len()
            )));
        }
        if pt.iter().any(|x| !x.is_finite()) {
            return Err(FlError::Invalid(format!("point {j} is not finite")));
        }
        if !domain_box.contains(pt) {
            return Err(FlError::Invalid(format!(
                "point {j} lies outside the domain box"
            )));
        }
    }
    check_distinct(points, domain_box.diameter())?;

    let mut counts = vec![0u64; points.len()];
    for_each_fine_center(domain_box, resolution, |center| {
        counts[nearest_index(points, center)] += 1;
    });

    let total_cells = (resolution as f64).powi(dim as i32);
    let cell_volume = domain_box.volume() / total_cells;
    let mut volumes = Vec::with_capacity(points.len());
    for (j, c) in counts.iter().enumerate() {
        if *c == 0 {
            return Err(FlError::Invalid(format!(
                "point {j} captured no fine cells at resolution {resolution}; \
                 increase the resolution"
            )));
        }
        volumes.push(*c as f64 * cell_volume);
    }

    Ok(Grid {
        points: points.to_vec(),
        dim,
        domain_box: domain_box.clone(),
        volumes,
    })
}

fn nearest_index(points: &[Vec<f64>], center: &[f64]) -> usize {
    let mut best = 0usize;
    let mut best_d2 = f64::INFINITY;
    for (j, pt) in points.iter().enumerate() {
        let d2: f64 = pt
            .iter()
            .zip(center)
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        // Strict inequality keeps the lowest index on ties.
        if d2 < best_d2 {
            best_d2 = d2;
            best = j;
        }
    }
    best
}

fn for_each_fine_center(domain_box: &DomainBox, resolution: usize, mut f: impl FnMut(&[f64])) {
    let dim = domain_box.dim();
    let widths: Vec<f64> = domain_box
        .lower
        .iter()
        .zip(&domain_box.upper)
        .map(|(lo, hi)| (hi - lo) / resolution as f64)
        .collect();
    let mut index = vec![0usize; dim];
    let mut center = vec![0.0; dim];
    loop {
        for k in 0..dim {
            center[k] = domain_box.lower[k] + (index[k] as f64 + 0.5) * widths[k];
        }
        f(&center);
        // odometer increment
        let mut k = 0;
        loop {
            index[k] += 1;
            if index[k] < resolution {
                break;
            }
            index[k] = 0;
            k += 1;
            if k == dim {
                return;
            }
        }
    }
}

/// Fill distance `h_max`, separation distance `h_min`, and their ratio.
///
/// `h_min` is exact. `h_max` is exact in 1D (interval endpoints and half
/// gaps); for d >= 2 it is approximated by maximizing the nearest-point
/// distance over the same fine evaluation grid used for volumes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshReport {
    pub h_max: f64,
    pub h_min: f64,
    pub ratio: f64,
}

pub fn mesh_report(grid: &Grid) -> Result<MeshReport> {
    let p = grid.len();
    if p < 2 {
        return Err(FlError::Invalid(
            "mesh_report needs at least two points (separation undefined for p = 1)".into(),
        ));
    }

    let mut h_min = f64::INFINITY;
    for j in 1..p {
        for i in 0..j {
            h_min = h_min.min(euclidean(grid.point(i), grid.point(j)));
        }
    }

    let h_max = if grid.dim() == 1 {
        let mut ts: Vec<f64> = grid.points().iter().map(|pt| pt[0]).collect();
        ts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let a = grid.domain_box().lower()[0];
        let b = grid.domain_box().upper()[0];
        let mut h = (ts[0] - a).max(b - ts[p - 1]);
        for j in 1..p {
            h = h.max(0.5 * (ts[j] - ts[j - 1]));
        }
        h
    } else {
        let resolution = default_resolution(grid.dim());
        let mut h = 0.0f64;
        for_each_fine_center(grid.domain_box(), resolution, |center| {
            let d2 = grid
                .points()
                .iter()
                .map(|pt| {
                    pt.iter()
                        .zip(center)
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min);
            h = h.max(d2.sqrt());
        });
        h
    };

    let ratio = h_max / h_min;
    if !(h_min > 0.0) || !ratio.is_finite() || !(ratio > 0.0) {
        return Err(FlError::NonFinite(format!(
            "mesh ratio must be positive and finite, got h_max = {h_max}, h_min = {h_min}"
        )));
    }
    Ok(MeshReport {
        h_max,
        h_min,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn midpoint_cells_1d() {
        let g = build_grid_1d(&[0.25, 0.5, 0.75], (0.0, 1.0)).unwrap();
        assert_eq!(g.volumes(), &[0.375, 0.25, 0.375]);
    }

    #[test]
    fn equispaced_midpoints_give_equal_volumes() {
        let p = 10;
        let pts: Vec<f64> = (0..p).map(|j| (j as f64 + 0.5) / p as f64).collect();
        let g = build_grid_1d(&pts, (0.0, 1.0)).unwrap();
        for v in g.volumes() {
            assert_relative_eq!(*v, 1.0 / p as f64, max_relative = 1e-12);
        }
    }

    #[test]
    fn single_point_takes_whole_interval() {
        let g = build_grid_1d(&[0.5], (0.0, 1.0)).unwrap();
        assert_eq!(g.volumes(), &[1.0]);
    }

    #[test]
    fn rejects_duplicates_and_out_of_domain() {
        let err = build_grid_1d(&[0.2, 0.2, 0.4], (0.0, 1.0)).unwrap_err();
        assert!(err.to_string().contains("point 1"), "{err}");
        let err = build_grid_1d(&[0.2, 1.5], (0.0, 1.0)).unwrap_err();
        assert!(err.to_string().contains("point 1"), "{err}");
        // coincident up to 1e-15 is rejected as a duplicate
        let err = build_grid_1d(&[0.2, 0.2 + 1e-15, 0.4], (0.0, 1.0)).unwrap_err();
        assert!(err.is_validation(), "{err}");
    }

    #[test]
    fn voronoi_volumes_respect_symmetry() {
        let unit = DomainBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let g = build_grid_nd(
            &[vec![0.25, 0.5], vec![0.75, 0.5]],
            &unit,
            64,
        )
        .unwrap();
        assert_relative_eq!(g.volumes()[0], 0.5, max_relative = 1e-9);
        assert_relative_eq!(g.volumes()[1], 0.5, max_relative = 1e-9);

        let g1 = build_grid_nd(&[vec![0.3, 0.8]], &unit, 64).unwrap();
        assert_relative_eq!(g1.volumes()[0], 1.0, max_relative = 1e-12);

        let quadrants = vec![
            vec![0.25, 0.25],
            vec![0.75, 0.25],
            vec![0.25, 0.75],
            vec![0.75, 0.75],
        ];
        let g4 = build_grid_nd(&quadrants, &unit, 64).unwrap();
        for v in g4.volumes() {
            assert_relative_eq!(*v, 0.25, max_relative = 1e-9);
        }
    }

    #[test]
    fn mesh_report_1d_exact() {
        let pts: Vec<f64> = (0..4).map(|j| (j as f64 + 0.5) / 4.0).collect();
        let g = build_grid_1d(&pts, (0.0, 1.0)).unwrap();
        let m = mesh_report(&g).unwrap();
        assert_relative_eq!(m.h_min, 0.25, max_relative = 1e-12);
        assert_relative_eq!(m.h_max, 0.125, max_relative = 1e-12);
    }

    #[test]
    fn mesh_report_matches_brute_force_sup() {
        let g = build_grid_1d(&[0.1, 0.9], (0.0, 1.0)).unwrap();
        let m = mesh_report(&g).unwrap();
        assert_relative_eq!(m.h_min, 0.8, max_relative = 1e-12);
        assert_relative_eq!(m.h_max, 0.4, max_relative = 1e-12);
        // independent oracle: enumerate the sup over a 10^4-point mesh
        let mut sup = 0.0f64;
        for k in 0..10_000 {
            let t = (k as f64 + 0.5) / 10_000.0;
            let d = (t - 0.1).abs().min((t - 0.9).abs());
            sup = sup.max(d);
        }
        assert!((m.h_max - sup).abs() < 1e-3, "sup oracle {sup}");
    }

    #[test]
    fn mesh_report_rejects_single_point() {
        let g = build_grid_1d(&[0.5], (0.0, 1.0)).unwrap();
        assert!(mesh_report(&g).is_err());
    }

    #[test]
    fn mesh_report_is_permutation_invariant() {
        let unit = DomainBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let pts = vec![
            vec![0.2, 0.3],
            vec![0.7, 0.6],
            vec![0.4, 0.9],
            vec![0.8, 0.15],
        ];
        let mut perm = pts.clone();
        perm.swap(0, 3);
        perm.swap(1, 2);
        let a = mesh_report(&build_grid_nd(&pts, &unit, 32).unwrap()).unwrap();
        let b = mesh_report(&build_grid_nd(&perm, &unit, 32).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn refinement_keeps_volumes_stable() {
        let unit = DomainBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let pts = vec![
            vec![0.21, 0.34],
            vec![0.67, 0.58],
            vec![0.45, 0.91],
            vec![0.83, 0.12],
            vec![0.12, 0.77],
        ];
        let r = 32;
        let coarse = build_grid_nd(&pts, &unit, r).unwrap();
        let fine = build_grid_nd(&pts, &unit, 2 * r).unwrap();
        for (vc, vf) in coarse.volumes().iter().zip(fine.volumes()) {
            assert!(
                ((vc - vf) / vf).abs() < 4.0 / r as f64,
                "volume moved from {vc} to {vf}"
            );
        }
    }
}
