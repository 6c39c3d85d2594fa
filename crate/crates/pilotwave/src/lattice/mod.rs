//! Rectangular-grid field storage and second-order finite-difference calculus.
//!
//! Grids are 1D or 2D with either periodic or clamped boundaries. All fields
//! are plain `Vec` storage attached to a [`Grid`] descriptor; sites are indexed
//! row-major with the x axis fastest. Operations on fields are pure functions
//! over immutable snapshots.

mod calculus;
mod io;

pub use calculus::{divergence, gradient, integrate, laplacian, pairwise_sum};
pub use io::{
    read_scalar_csv, write_complex_csv, write_scalar_csv, write_vector_csv, FieldManifest,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary handling for differencing, integration and particle motion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Wrap-around topology; spacing `h = extent / points`.
    Periodic,
    /// Finite box; spacing `h = extent / (points - 1)`, one-sided stencils at the edges.
    Clamped,
}

/// Lattice geometry: dimension, per-axis extent/resolution and boundary mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    ndim: usize,
    points: [usize; 2],
    extent: [f64; 2],
    origin: [f64; 2],
    boundary: Boundary,
}

impl Grid {
    /// 1D grid over `[origin, origin + extent]` (clamped) or `[origin, origin + extent)` (periodic).
    pub fn new_1d(points: usize, extent: f64, origin: f64, boundary: Boundary) -> Result<Self> {
        Self::validate_axis(points, extent)?;
        Ok(Grid {
            ndim: 1,
            points: [points, 1],
            extent: [extent, 0.0],
            origin: [origin, 0.0],
            boundary,
        })
    }

    /// 2D grid; axis 0 is x (fastest index), axis 1 is y.
    pub fn new_2d(
        points: [usize; 2],
        extent: [f64; 2],
        origin: [f64; 2],
        boundary: Boundary,
    ) -> Result<Self> {
        Self::validate_axis(points[0], extent[0])?;
        Self::validate_axis(points[1], extent[1])?;
        Ok(Grid {
            ndim: 2,
            points,
            extent,
            origin,
            boundary,
        })
    }

    /// Centered 1D grid over `[-extent/2, extent/2]`.
    pub fn centered_1d(points: usize, extent: f64, boundary: Boundary) -> Result<Self> {
        Self::new_1d(points, extent, -0.5 * extent, boundary)
    }

    /// Centered square 2D grid.
    pub fn centered_2d(points: usize, extent: f64, boundary: Boundary) -> Result<Self> {
        Self::new_2d(
            [points, points],
            [extent, extent],
            [-0.5 * extent, -0.5 * extent],
            boundary,
        )
    }

    fn validate_axis(points: usize, extent: f64) -> Result<()> {
        if points < 8 {
            return Err(Error::Grid(format!(
                "grid needs at least 8 points per axis, got {points}"
            )));
        }
        if !(extent > 0.0) || !extent.is_finite() {
            return Err(Error::Grid(format!(
                "grid extent must be positive, got {extent}"
            )));
        }
        Ok(())
    }

    pub fn ndim(&self) -> usize {
        self.ndim
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Points along axis `axis`.
    pub fn points(&self, axis: usize) -> usize {
        self.points[axis]
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.extent[axis]
    }

    pub fn origin(&self, axis: usize) -> f64 {
        self.origin[axis]
    }

    /// Lattice spacing along `axis`.
    pub fn spacing(&self, axis: usize) -> f64 {
        match self.boundary {
            Boundary::Periodic => self.extent[axis] / self.points[axis] as f64,
            Boundary::Clamped => self.extent[axis] / (self.points[axis] - 1) as f64,
        }
    }

    /// Total number of lattice sites.
    pub fn len(&self) -> usize {
        self.points[..self.ndim].iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of site `i` along `axis`.
    pub fn coord(&self, i: usize, axis: usize) -> f64 {
        self.origin[axis] + i as f64 * self.spacing(axis)
    }

    /// Flat index of the site `(i, j)`; `j` is ignored in 1D.
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i + self.points[0] * j
    }

    /// Inverse of [`Grid::idx`].
    pub fn site(&self, idx: usize) -> (usize, usize) {
        (idx % self.points[0], idx / self.points[0])
    }

    /// Coordinates of the flat site `idx`, `[x, y]` (y = 0 in 1D).
    pub fn site_coords(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.site(idx);
        let y = if self.ndim == 2 {
            self.coord(j, 1)
        } else {
            0.0
        };
        [self.coord(i, 0), y]
    }

    /// Cell volume `h^ndim` for Riemann sums.
    pub fn cell_volume(&self) -> f64 {
        (0..self.ndim).map(|a| self.spacing(a)).product()
    }

    /// True when the site lies within `band` sites of a clamped edge on any axis.
    /// Periodic axes have no edge.
    pub fn in_edge_band(&self, idx: usize, band: usize) -> bool {
        if self.boundary == Boundary::Periodic {
            return false;
        }
        let (i, j) = self.site(idx);
        let near = |pos: usize, n: usize| pos < band || pos + band >= n;
        near(i, self.points[0]) || (self.ndim == 2 && near(j, self.points[1]))
    }
}

/// Real-valued field sampled on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len(), "field length must match grid");
        ScalarField {
            grid: grid.clone(),
            values,
        }
    }

    /// Sample `f(x)` (1D) or `f(x, y)` (2D) at every site.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|idx| {
                let c = grid.site_coords(idx);
                f(c[0], c[1])
            })
            .collect();
        ScalarField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    /// Sitewise combination of two fields on the same grid.
    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        assert_eq!(self.grid, other.grid, "fields attached to different grids");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        ScalarField {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> ScalarField {
        self.map(|v| s * v)
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Maximum absolute value over all sites.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, &v| m.max(v.abs()))
    }
}

/// Complex-valued field (wavefunctions).
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    grid: Grid,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(grid: &Grid) -> Self {
        ComplexField {
            grid: grid.clone(),
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<Complex64>) -> Self {
        assert_eq!(values.len(), grid.len(), "field length must match grid");
        ComplexField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let values = (0..grid.len())
            .map(|idx| {
                let c = grid.site_coords(idx);
                f(c[0], c[1])
            })
            .collect();
        ComplexField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn get(&self, idx: usize) -> Complex64 {
        self.values[idx]
    }

    /// Discrete L2 norm `sqrt(h^ndim * sum |psi|^2)`.
    pub fn l2_norm(&self) -> f64 {
        let vol = self.grid.cell_volume();
        let sum = pairwise_sum(&self.values.iter().map(|v| v.norm_sqr()).collect::<Vec<_>>());
        (vol * sum).sqrt()
    }

    /// Rescale to unit L2 norm.
    pub fn normalized(&self) -> ComplexField {
        let n = self.l2_norm();
        assert!(n > 0.0, "cannot normalize a zero field");
        ComplexField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v / n).collect(),
        }
    }

    /// Sitewise squared modulus as a real field.
    pub fn abs_sqr(&self) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.norm_sqr()).collect(),
        }
    }

    pub fn re(&self) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.re).collect(),
        }
    }

    pub fn im(&self) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.im).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

/// Vector field with one real component per axis per site.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: Grid,
    components: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn zeros(grid: &Grid) -> Self {
        VectorField {
            grid: grid.clone(),
            components: vec![vec![0.0; grid.len()]; grid.ndim()],
        }
    }

    pub fn from_components(grid: &Grid, components: Vec<Vec<f64>>) -> Self {
        assert_eq!(
            components.len(),
            grid.ndim(),
            "component count must equal ndim"
        );
        for c in &components {
            assert_eq!(c.len(), grid.len(), "component length must match grid");
        }
        VectorField {
            grid: grid.clone(),
            components,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn ncomp(&self) -> usize {
        self.components.len()
    }

    /// Component `axis` as a borrowed slice.
    pub fn component(&self, axis: usize) -> &[f64] {
        &self.components[axis]
    }

    pub fn component_mut(&mut self, axis: usize) -> &mut [f64] {
        &mut self.components[axis]
    }

    /// Component `axis` copied into a scalar field.
    pub fn component_field(&self, axis: usize) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.components[axis].clone(),
        }
    }

    pub fn get(&self, idx: usize) -> [f64; 2] {
        let y = if self.ncomp() == 2 {
            self.components[1][idx]
        } else {
            0.0
        };
        [self.components[0][idx], y]
    }

    /// Sitewise squared magnitude `|v|^2`.
    pub fn magnitude_sqr(&self) -> ScalarField {
        let mut values = vec![0.0; self.grid.len()];
        for comp in &self.components {
            for (acc, &v) in values.iter_mut().zip(comp) {
                *acc += v * v;
            }
        }
        ScalarField {
            grid: self.grid.clone(),
            values,
        }
    }

    /// Sitewise dot product with another vector field.
    pub fn dot(&self, other: &VectorField) -> ScalarField {
        assert_eq!(self.grid, other.grid, "fields attached to different grids");
        let mut values = vec![0.0; self.grid.len()];
        for (a, b) in self.components.iter().zip(&other.components) {
            for ((acc, &x), &y) in values.iter_mut().zip(a).zip(b) {
                *acc += x * y;
            }
        }
        ScalarField {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn scale(&self, s: f64) -> VectorField {
        VectorField {
            grid: self.grid.clone(),
            components: self
                .components
                .iter()
                .map(|c| c.iter().map(|&v| s * v).collect())
                .collect(),
        }
    }

    pub fn add(&self, other: &VectorField) -> VectorField {
        assert_eq!(self.grid, other.grid, "fields attached to different grids");
        VectorField {
            grid: self.grid.clone(),
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| x + y).collect())
                .collect(),
        }
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        self.add(&other.scale(-1.0))
    }

    pub fn is_finite(&self) -> bool {
        self.components
            .iter()
            .all(|c| c.iter().all(|v| v.is_finite()))
    }
}

/// Boolean site mask attached to a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    grid: Grid,
    on: Vec<bool>,
}

impl Mask {
    pub fn all_on(grid: &Grid) -> Self {
        Mask {
            grid: grid.clone(),
            on: vec![true; grid.len()],
        }
    }

    pub fn from_values(grid: &Grid, on: Vec<bool>) -> Self {
        assert_eq!(on.len(), grid.len(), "mask length must match grid");
        Mask {
            grid: grid.clone(),
            on,
        }
    }

    /// Sites where `rho > eps * max(rho)`.
    pub fn density_support(rho: &ScalarField, eps: f64) -> Self {
        let cut = eps * rho.max_abs();
        Mask {
            grid: rho.grid().clone(),
            on: rho.values().iter().map(|&v| v > cut).collect(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn is_on(&self, idx: usize) -> bool {
        self.on[idx]
    }

    pub fn count_on(&self) -> usize {
        self.on.iter().filter(|&&b| b).count()
    }

    pub fn values(&self) -> &[bool] {
        &self.on
    }

    /// Intersection with another mask.
    pub fn and(&self, other: &Mask) -> Mask {
        assert_eq!(self.grid, other.grid, "masks attached to different grids");
        Mask {
            grid: self.grid.clone(),
            on: self
                .on
                .iter()
                .zip(&other.on)
                .map(|(&a, &b)| a && b)
                .collect(),
        }
    }

    /// Shrink the mask by `band` sites: a site stays on only if every site within
    /// an axis-aligned distance `band` is on (periodic wrap respected).
    pub fn eroded(&self, band: usize) -> Mask {
        if band == 0 {
            return self.clone();
        }
        let grid = &self.grid;
        let nx = grid.points(0) as isize;
        let ny = if grid.ndim() == 2 {
            grid.points(1) as isize
        } else {
            1
        };
        let periodic = grid.boundary() == Boundary::Periodic;
        let b = band as isize;
        let mut on = vec![false; grid.len()];
        for idx in 0..grid.len() {
            if !self.on[idx] {
                continue;
            }
            let (i, j) = grid.site(idx);
            let (i, j) = (i as isize, j as isize);
            let mut keep = true;
            'outer: for dj in -b..=b {
                let range_i = -b..=b;
                for di in range_i {
                    if grid.ndim() == 1 && dj != 0 {
                        continue;
                    }
                    let (ii, jj) = if periodic {
                        ((i + di).rem_euclid(nx), (j + dj).rem_euclid(ny))
                    } else {
                        let ii = i + di;
                        let jj = j + dj;
                        if ii < 0 || ii >= nx || jj < 0 || jj >= ny {
                            keep = false;
                            break 'outer;
                        }
                        (ii, jj)
                    };
                    if !self.on[grid.idx(ii as usize, jj as usize)] {
                        keep = false;
                        break 'outer;
                    }
                }
            }
            on[idx] = keep;
        }
        Mask {
            grid: grid.clone(),
            on,
        }
    }

    /// Interior evaluation mask: eroded by `band` and clear of clamped edges by `band`.
    pub fn interior(&self, band: usize) -> Mask {
        let er = self.eroded(band);
        let on = (0..self.grid.len())
            .map(|idx| er.on[idx] && !self.grid.in_edge_band(idx, band))
            .collect();
        Mask {
            grid: self.grid.clone(),
            on,
        }
    }

    /// True when the on-region is nonempty and connected under axis-adjacent steps.
    pub fn is_connected(&self) -> bool {
        let total = self.count_on();
        if total == 0 {
            return false;
        }
        let start = self.on.iter().position(|&b| b).unwrap();
        let mut seen = vec![false; self.on.len()];
        let mut stack = vec![start];
        seen[start] = true;
        let mut reached = 0usize;
        while let Some(idx) = stack.pop() {
            reached += 1;
            for n in self.neighbors(idx) {
                if self.on[n] && !seen[n] {
                    seen[n] = true;
                    stack.push(n);
                }
            }
        }
        reached == total
    }

    /// Axis-adjacent neighbor flat indices (wrapping on periodic grids).
    pub fn neighbors(&self, idx: usize) -> Vec<usize> {
        let grid = &self.grid;
        let (i, j) = grid.site(idx);
        let nx = grid.points(0);
        let ny = grid.points(1);
        let periodic = grid.boundary() == Boundary::Periodic;
        let mut out = Vec::with_capacity(4);
        let mut push = |i: isize, j: isize| {
            let (nxi, nyi) = (nx as isize, ny as isize);
            if periodic {
                out.push(grid.idx(i.rem_euclid(nxi) as usize, j.rem_euclid(nyi) as usize));
            } else if i >= 0 && i < nxi && j >= 0 && j < nyi {
                out.push(grid.idx(i as usize, j as usize));
            }
        };
        push(i as isize - 1, j as isize);
        push(i as isize + 1, j as isize);
        if grid.ndim() == 2 {
            push(i as isize, j as isize - 1);
            push(i as isize, j as isize + 1);
        }
        out
    }

    /// Max |f| over on-sites.
    pub fn masked_max_abs(&self, f: &ScalarField) -> f64 {
        assert_eq!(self.grid, *f.grid(), "mask and field grids differ");
        f.values()
            .iter()
            .zip(&self.on)
            .filter(|(_, &m)| m)
            .fold(0.0_f64, |acc, (&v, _)| acc.max(v.abs()))
    }

    /// RMS-style L2 norm over on-sites: `sqrt(mean of f^2)`.
    pub fn masked_l2(&self, f: &ScalarField) -> f64 {
        assert_eq!(self.grid, *f.grid(), "mask and field grids differ");
        let sq: Vec<f64> = f
            .values()
            .iter()
            .zip(&self.on)
            .filter(|(_, &m)| m)
            .map(|(&v, _)| v * v)
            .collect();
        if sq.is_empty() {
            return 0.0;
        }
        (pairwise_sum(&sq) / sq.len() as f64).sqrt()
    }

    /// Mean of f over on-sites.
    pub fn masked_mean(&self, f: &ScalarField) -> f64 {
        assert_eq!(self.grid, *f.grid(), "mask and field grids differ");
        let vals: Vec<f64> = f
            .values()
            .iter()
            .zip(&self.on)
            .filter(|(_, &m)| m)
            .map(|(&v, _)| v)
            .collect();
        if vals.is_empty() {
            return 0.0;
        }
        pairwise_sum(&vals) / vals.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_follows_boundary_convention() {
        let p = Grid::new_1d(256, 2.0, 0.0, Boundary::Periodic).unwrap();
        assert_eq!(p.spacing(0), 2.0 / 256.0);
        let c = Grid::new_1d(256, 2.0, 0.0, Boundary::Clamped).unwrap();
        assert_eq!(c.spacing(0), 2.0 / 255.0);
        // clamped grid endpoint lands on origin + extent
        assert!((c.coord(255, 0) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_tiny_grids() {
        assert!(Grid::new_1d(4, 1.0, 0.0, Boundary::Periodic).is_err());
        assert!(Grid::new_1d(8, 0.0, 0.0, Boundary::Periodic).is_err());
    }

    #[test]
    fn index_round_trip_2d() {
        let g = Grid::centered_2d(16, 4.0, Boundary::Clamped).unwrap();
        for idx in 0..g.len() {
            let (i, j) = g.site(idx);
            assert_eq!(g.idx(i, j), idx);
        }
    }

    #[test]
    fn mask_erosion_and_interior() {
        let g = Grid::new_1d(16, 1.0, 0.0, Boundary::Clamped).unwrap();
        let mut on = vec![true; 16];
        on[7] = false;
        let m = Mask::from_values(&g, on);
        let e = m.eroded(1);
        assert!(!e.is_on(6) && !e.is_on(7) && !e.is_on(8));
        assert!(e.is_on(5));
        // clamped edges always fall out of eroded masks
        assert!(!e.is_on(0) && !e.is_on(15));
        let int = m.interior(2);
        assert!(!int.is_on(1));
        assert!(int.is_on(3));
    }

    #[test]
    fn mask_connectivity() {
        let g = Grid::new_1d(16, 1.0, 0.0, Boundary::Clamped).unwrap();
        let mut on = vec![true; 16];
        on[8] = false;
        let m = Mask::from_values(&g, on);
        assert!(!m.is_connected());
        assert!(Mask::all_on(&g).is_connected());
    }

    #[test]
    fn periodic_mask_wraps_neighbors() {
        let g = Grid::new_1d(8, 1.0, 0.0, Boundary::Periodic).unwrap();
        let m = Mask::all_on(&g);
        let n = m.neighbors(0);
        assert!(n.contains(&7) && n.contains(&1));
    }
}
