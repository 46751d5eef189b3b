//! Uniform 1D/2D grids with cell-centered densities and face-centered
//! (staggered) velocities.
//!
//! Cells are stored row-major with the x index fastest: `idx = j * nx + i`.
//! x-faces are indexed `j * (nx + 1) + f` with `f = 0..=nx`, face `f` lying
//! between cells `f - 1` and `f`; y-faces are indexed `g * nx + i` with
//! `g = 0..=ny`. Boundary faces are stored and always hold zero.

use crate::error::{Error, Result};

/// Minimum number of cells per axis.
pub const MIN_CELLS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < MIN_CELLS {
            return Err(Error::InvalidGrid(format!("need at least {MIN_CELLS} cells per axis, got {n}")));
        }
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidGrid(format!("degenerate bounds [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi, n })
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / self.n as f64
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.spacing()
    }

    /// Coordinate of face `f` (`f = 0` is the lower boundary, `f = n` the upper).
    pub fn face(&self, f: usize) -> f64 {
        self.lo + f as f64 * self.spacing()
    }
}

/// A uniform rectangular mesh in one or two dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    x: Axis,
    y: Option<Axis>,
}

impl Grid {
    /// Builds a grid from per-axis bounds and cell counts. `bounds` and
    /// `cells` must both have length 1 or 2.
    pub fn new(bounds: &[(f64, f64)], cells: &[usize]) -> Result<Self> {
        if bounds.len() != cells.len() || !(1..=2).contains(&bounds.len()) {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1 or 2 with matching bounds/cells (got {} and {})",
                bounds.len(),
                cells.len()
            )));
        }
        let x = Axis::new(bounds[0].0, bounds[0].1, cells[0])?;
        let y = match bounds.get(1) {
            Some(&(lo, hi)) => Some(Axis::new(lo, hi, cells[1])?),
            None => None,
        };
        Ok(Self { x, y })
    }

    pub fn line(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new(&[(lo, hi)], &[n])
    }

    /// Square grid `[lo, hi]^2` with `n` cells per side.
    pub fn square(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new(&[(lo, hi), (lo, hi)], &[n, n])
    }

    pub fn dim(&self) -> usize {
        if self.y.is_some() {
            2
        } else {
            1
        }
    }

    pub fn x_axis(&self) -> &Axis {
        &self.x
    }

    pub fn y_axis(&self) -> Option<&Axis> {
        self.y.as_ref()
    }

    pub fn nx(&self) -> usize {
        self.x.n
    }

    /// Number of cells along y; 1 for a 1D grid.
    pub fn ny(&self) -> usize {
        self.y.map_or(1, |a| a.n)
    }

    pub fn dx(&self) -> f64 {
        self.x.spacing()
    }

    /// Spacing along y; 1 for a 1D grid so that `cell_volume` is `dx`.
    pub fn dy(&self) -> f64 {
        self.y.map_or(1.0, |a| a.spacing())
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx() * self.dy()
    }

    pub fn num_cells(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn num_x_faces(&self) -> usize {
        (self.nx() + 1) * self.ny()
    }

    pub fn num_y_faces(&self) -> usize {
        match self.y {
            Some(_) => self.nx() * (self.ny() + 1),
            None => 0,
        }
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx() + i
    }

    /// Cell center; the y coordinate is 0 on a 1D grid.
    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        (self.x.center(i), self.y.map_or(0.0, |a| a.center(j)))
    }

    /// Iterator over `(flat index, x, y)` for every cell.
    pub fn centers(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        let nx = self.nx();
        (0..self.num_cells()).map(move |k| {
            let (x, y) = self.cell_center(k % nx, k / nx);
            (k, x, y)
        })
    }

    /// Whether a point lies strictly inside the domain.
    pub fn contains_interior(&self, x: f64, y: f64) -> bool {
        let in_x = x > self.x.lo && x < self.x.hi;
        match self.y {
            Some(ay) => in_x && y > ay.lo && y < ay.hi,
            None => in_x,
        }
    }

    /// Samples a function at cell centers.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.centers().map(|(_, x, y)| f(x, y)).collect()
    }
}

/// Cell-centered nonnegative density.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    values: Vec<f64>,
}

impl DensityField {
    pub fn zeros(grid: &Grid) -> Self {
        Self { values: vec![0.0; grid.num_cells()] }
    }

    /// Wraps raw values, rejecting negative or non-finite entries.
    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_cells() {
            return Err(Error::LengthMismatch { expected: grid.num_cells(), actual: values.len() });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidGrid(format!(
                "density must be finite and nonnegative (cell {bad} = {})",
                values[bad]
            )));
        }
        Ok(Self { values })
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Discrete integral `sum(rho) * dx * dy`.
    pub fn mass(&self, grid: &Grid) -> f64 {
        self.values.iter().sum::<f64>() * grid.cell_volume()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Discrete L1 distance `sum |a - b| * dx * dy`.
    pub fn l1_distance(&self, other: &DensityField, grid: &Grid) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).sum::<f64>() * grid.cell_volume()
    }

    /// Largest value found in the outermost ring of cells.
    pub fn boundary_max(&self, grid: &Grid) -> f64 {
        let (nx, ny) = (grid.nx(), grid.ny());
        let mut m = self.values[0].max(self.values[nx - 1]);
        if grid.dim() == 2 {
            for i in 0..nx {
                m = m.max(self.values[i]).max(self.values[(ny - 1) * nx + i]);
            }
            for j in 0..ny {
                m = m.max(self.values[j * nx]).max(self.values[j * nx + nx - 1]);
            }
        }
        m
    }
}

/// Face-centered velocity with zero normal component on the domain boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub x_faces: Vec<f64>,
    pub y_faces: Vec<f64>,
}

impl VelocityField {
    pub fn zeros(grid: &Grid) -> Self {
        Self { x_faces: vec![0.0; grid.num_x_faces()], y_faces: vec![0.0; grid.num_y_faces()] }
    }

    pub fn max_abs(&self) -> f64 {
        self.x_faces.iter().chain(&self.y_faces).fold(0.0, |m, v| m.max(v.abs()))
    }

    /// True when every boundary face holds exactly zero.
    pub fn boundary_is_zero(&self, grid: &Grid) -> bool {
        let (nx, ny) = (grid.nx(), grid.ny());
        let x_ok = (0..ny).all(|j| self.x_faces[j * (nx + 1)] == 0.0 && self.x_faces[j * (nx + 1) + nx] == 0.0);
        let y_ok = grid.dim() == 1 || (0..nx).all(|i| self.y_faces[i] == 0.0 && self.y_faces[ny * nx + i] == 0.0);
        x_ok && y_ok
    }
}

/// Flower-shaped indicator: `amplitude` where
/// `r - 0.5 - 0.5 sin(4 theta) < 0` around `center`, zero elsewhere.
pub fn initial_density_flower(grid: &Grid, center: (f64, f64), amplitude: f64) -> DensityField {
    let values = grid.sample(|x, y| {
        let (dx, dy) = (x - center.0, y - center.1);
        let r = dx.hypot(dy);
        if r == 0.0 {
            return amplitude;
        }
        let theta = dy.atan2(dx);
        if r - 0.5 - 0.5 * (4.0 * theta).sin() < 0.0 {
            amplitude
        } else {
            0.0
        }
    });
    DensityField::from_raw(values)
}

/// Disk indicator: `amplitude` where `|x - center|^2 < radius2`.
pub fn initial_density_disk(grid: &Grid, center: (f64, f64), radius2: f64, amplitude: f64) -> DensityField {
    let values = grid.sample(|x, y| {
        let d2 = (x - center.0).powi(2) + (y - center.1).powi(2);
        if d2 < radius2 {
            amplitude
        } else {
            0.0
        }
    });
    DensityField::from_raw(values)
}

/// Arithmetic mean across each interior face of a 1D array of cell values.
/// Returns `values.len() - 1` entries.
pub fn face_average(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

#[inline]
pub fn minmod(a: f64, b: f64) -> f64 {
    if a > 0.0 && b > 0.0 {
        a.min(b)
    } else if a < 0.0 && b < 0.0 {
        a.max(b)
    } else {
        0.0
    }
}

/// Limited slope of the center cell from its two neighbours.
#[inline]
pub fn minmod_slope(left: f64, center: f64, right: f64, dx: f64) -> f64 {
    minmod((center - left) / dx, (right - center) / dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn experiment_grid_spacing() {
        let g = Grid::square(-2.2, 2.2, 44).unwrap();
        assert!((g.dx() - 0.1).abs() < 1e-15);
        assert!((g.dy() - 0.1).abs() < 1e-15);
        assert_eq!(g.num_cells(), 44 * 44);
    }

    #[test]
    fn unit_line_centers() {
        let g = Grid::line(0.0, 1.0, 10).unwrap();
        let centers: Vec<f64> = g.centers().map(|(_, x, _)| x).collect();
        for (i, c) in centers.iter().enumerate() {
            assert!((c - (0.05 + 0.1 * i as f64)).abs() < 1e-14);
        }
        assert!((g.x_axis().face(3) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn square_forty() {
        let g = Grid::square(-1.0, 1.0, 40).unwrap();
        assert!((g.dx() - 0.05).abs() < 1e-15);
        assert_eq!(g.num_cells(), 1600);
        assert_eq!(g.num_x_faces(), 41 * 40);
        assert_eq!(g.num_y_faces(), 40 * 41);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::line(0.0, 1.0, 3).is_err());
        assert!(Grid::line(1.0, 1.0, 10).is_err());
        assert!(Grid::line(1.0, 0.0, 10).is_err());
        assert!(Grid::new(&[(0.0, 1.0)], &[10, 10]).is_err());
        assert!(Grid::new(&[(0.0, 1.0), (0.0, f64::NAN)], &[10, 10]).is_err());
    }

    #[test]
    fn flower_pointwise() {
        // Thin strip around the x axis: r - 0.5 - 0.5 sin(4 theta) < 0 for r < 0.5.
        let g = Grid::new(&[(0.2, 0.4), (-0.001, 0.001)], &[4, 4]).unwrap();
        let rho = initial_density_flower(&g, (0.0, 0.0), 0.9);
        assert!(rho.values().iter().all(|&v| v == 0.9));

        let far = Grid::new(&[(1.9, 2.1), (-0.05, 0.05)], &[4, 4]).unwrap();
        let rho = initial_density_flower(&far, (0.0, 0.0), 0.9);
        assert!(rho.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn flower_angle_branch_agrees_with_arctan() {
        let g = Grid::square(-2.2, 2.2, 44).unwrap();
        let rho = initial_density_flower(&g, (0.0, 0.0), 0.9);
        for (k, x, y) in g.centers() {
            let r = x.hypot(y);
            let principal = (y / x).atan();
            let inside = r - 0.5 - 0.5 * (4.0 * principal).sin() < 0.0;
            assert_eq!(rho.values()[k] == 0.9, inside, "cell ({x}, {y})");
        }
    }

    #[test]
    fn disk_values_and_mass() {
        let g = Grid::square(-1.0, 1.0, 40).unwrap();
        let rho = initial_density_disk(&g, (0.0, 0.0), 0.2, 0.9);
        let center = g.index(20, 20);
        assert_eq!(rho.values()[center], 0.9);
        assert!(rho.values().iter().all(|&v| v == 0.0 || v == 0.9));
        let exact = 0.9 * std::f64::consts::PI * 0.2;
        // Perimeter layer: 2*pi*R*dx*amplitude.
        let layer = 2.0 * std::f64::consts::PI * 0.2f64.sqrt() * g.dx() * 0.9;
        assert!((rho.mass(&g) - exact).abs() < layer);
    }

    #[test]
    fn disk_mass_refines() {
        let exact = 0.9 * std::f64::consts::PI * 0.2;
        let errs: Vec<f64> = [40, 160, 640]
            .iter()
            .map(|&n| {
                let g = Grid::square(-1.0, 1.0, n).unwrap();
                (initial_density_disk(&g, (0.0, 0.0), 0.2, 0.9).mass(&g) - exact).abs()
            })
            .collect();
        assert!(errs[2] < errs[0], "{errs:?}");
        assert!(errs[2] < 1e-3);
    }

    #[test]
    fn face_average_examples() {
        assert_eq!(face_average(&[1.0, 3.0]), vec![2.0]);
        assert_eq!(face_average(&[0.0, 0.9]), vec![0.45]);
        assert!(face_average(&[0.7; 6]).iter().all(|&v| v == 0.7));
    }

    #[test]
    fn minmod_examples() {
        assert_eq!(minmod_slope(0.0, 1.0, 2.0, 1.0), 1.0);
        assert_eq!(minmod_slope(0.0, 1.0, 0.0, 1.0), 0.0);
        assert_eq!(minmod_slope(0.0, 1.0, 3.0, 1.0), 1.0);
        assert_eq!(minmod_slope(3.0, 1.0, 0.0, 1.0), -1.0);
    }

    #[test]
    fn boundary_max_sees_edges() {
        let g = Grid::square(0.0, 1.0, 5).unwrap();
        let mut v = vec![0.0; 25];
        v[g.index(4, 2)] = 0.3;
        let rho = DensityField::from_values(&g, v).unwrap();
        assert_eq!(rho.boundary_max(&g), 0.3);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn reconstruction_stays_in_stencil_range(
                l in -5.0f64..5.0, c in -5.0f64..5.0, r in -5.0f64..5.0, dx in 0.01f64..2.0
            ) {
                let s = minmod_slope(l, c, r, dx);
                let lo = l.min(c).min(r) - 1e-12;
                let hi = l.max(c).max(r) + 1e-12;
                for edge in [c - 0.5 * dx * s, c + 0.5 * dx * s] {
                    prop_assert!(edge >= lo && edge <= hi);
                }
            }

            #[test]
            fn face_average_exact_on_linear(a in -3.0f64..3.0, b in -3.0f64..3.0) {
                let cells: Vec<f64> = (0..8).map(|i| a + b * (i as f64 + 0.5)).collect();
                for (f, v) in face_average(&cells).iter().enumerate() {
                    prop_assert!((v - (a + b * (f as f64 + 1.0))).abs() < 1e-12);
                }
            }
        }
    }
}
