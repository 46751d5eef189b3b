//! Helpers shared by the integration test targets.
#![allow(dead_code, clippy::needless_range_loop)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use tumor_bayes::grid::{Grid, VelocityField};

pub fn total_variation(v: &[f64]) -> f64 {
    v.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Interior face of the prediction system: position in the velocity arrays
/// plus the two adjacent cells.
pub struct Face {
    pub y_axis: bool,
    pub slot: usize,
    pub lo: usize,
    pub hi: usize,
    pub inv_h: f64,
}

pub fn interior_faces(grid: &Grid) -> Vec<Face> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut faces = Vec::new();
    for j in 0..ny {
        for f in 1..nx {
            faces.push(Face {
                y_axis: false,
                slot: j * (nx + 1) + f,
                lo: j * nx + f - 1,
                hi: j * nx + f,
                inv_h: 1.0 / grid.dx(),
            });
        }
    }
    if grid.dim() == 2 {
        for g in 1..ny {
            for i in 0..nx {
                faces.push(Face {
                    y_axis: true,
                    slot: g * nx + i,
                    lo: (g - 1) * nx + i,
                    hi: g * nx + i,
                    inv_h: 1.0 / grid.dy(),
                });
            }
        }
    }
    faces
}

pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Dense assembly of `(u* - u)/dt = m grad(rho^(m-2) (div(rho_f u*) - rho h))`
/// on interior faces, with `rho_f` the arithmetic face average.
pub fn dense_prediction(grid: &Grid, rho: &[f64], u: &VelocityField, h: &[f64], m: f64, dt: f64) -> VelocityField {
    let faces = interior_faces(grid);
    let n = faces.len();
    let a: Vec<f64> = rho.iter().map(|&r| if r > 0.0 { r.powf(m - 2.0) } else { 0.0 }).collect();
    let rho_f: Vec<f64> = faces.iter().map(|f| 0.5 * (rho[f.lo] + rho[f.hi])).collect();
    // div_i = sum over faces of +-rho_f u_f / h, as a linear map of the face unknowns.
    let mut div = vec![vec![0.0; n]; rho.len()];
    for (k, f) in faces.iter().enumerate() {
        div[f.lo][k] += rho_f[k] * f.inv_h;
        div[f.hi][k] -= rho_f[k] * f.inv_h;
    }
    let mut mat = vec![vec![0.0; n]; n];
    let mut rhs = vec![0.0; n];
    for (r, f) in faces.iter().enumerate() {
        mat[r][r] += 1.0;
        for k in 0..n {
            mat[r][k] -= dt * m * f.inv_h * (a[f.hi] * div[f.hi][k] - a[f.lo] * div[f.lo][k]);
        }
        let old = if f.y_axis { u.y_faces[f.slot] } else { u.x_faces[f.slot] };
        rhs[r] = old - dt * m * f.inv_h * (a[f.hi] * rho[f.hi] * h[f.hi] - a[f.lo] * rho[f.lo] * h[f.lo]);
    }
    let x = gauss_solve(mat, rhs);
    let mut out = VelocityField::zeros(grid);
    for (f, v) in faces.iter().zip(x) {
        if f.y_axis {
            out.y_faces[f.slot] = v;
        } else {
            out.x_faces[f.slot] = v;
        }
    }
    out
}

pub fn random_instance(grid: &Grid, rng: &mut ChaCha8Rng) -> (Vec<f64>, VelocityField, Vec<f64>) {
    let n = grid.num_cells();
    let rho: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let mut u = VelocityField::zeros(grid);
    for f in interior_faces(grid) {
        let v = rng.random_range(-1.0..1.0);
        if f.y_axis {
            u.y_faces[f.slot] = v;
        } else {
            u.x_faces[f.slot] = v;
        }
    }
    let h: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
    (rho, u, h)
}

pub fn max_diff(a: &VelocityField, b: &VelocityField) -> f64 {
    a.x_faces.iter().zip(&b.x_faces).chain(a.y_faces.iter().zip(&b.y_faces)).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
