//! Conservative remap of one cell's velocity profile under an affine map
//! `ξ ↦ shift + λ ξ` (applied componentwise).
//!
//! The image is first built by a piecewise-linear (minmod) remap, which is
//! nonnegative and mass conservative up to box escape. Its interpolation
//! error in the mean and per-axis variance is then removed by a minimal
//! exponential tilt `f_j exp(Σ_a β_a z_a + γ_a z_a²)`, found by Newton on the
//! convex log-partition function. When the target profile is too narrow to
//! be represented on the node set the particles are instead deposited
//! linearly onto their two neighbouring nodes per axis, which keeps mass and
//! mean exact.

use crate::grid::PhaseGrid;

use super::CellMoments;

const MAX_NEWTON: usize = 60;
/// Extra variance, in units of `hv²`, required above the two-node minimum
/// before the tilted remap is attempted.
const VARIANCE_MARGIN: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemapPath {
    Identity,
    Tilted,
    Deposit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemapOutcome {
    pub path: RemapPath,
    /// Mass (in units of summed node values) whose image left the box.
    pub escaped_mass: f64,
}

/// Scratch buffers reused across cells.
#[derive(Debug, Clone)]
pub struct RemapWorkspace {
    line_in: Vec<f64>,
    line_out: Vec<f64>,
    cumulative: Vec<f64>,
    slopes: Vec<f64>,
    marginal: Vec<f64>,
    exponent: Vec<f64>,
    z: Vec<Vec<f64>>,
    table: Vec<Vec<f64>>,
}

impl RemapWorkspace {
    pub fn new(grid: &PhaseGrid) -> Self {
        let nv = grid.nv();
        Self {
            line_in: vec![0.0; nv],
            line_out: vec![0.0; nv],
            cumulative: vec![0.0; nv + 1],
            slopes: vec![0.0; nv],
            marginal: vec![0.0; nv],
            exponent: vec![0.0; grid.n_vel()],
            z: vec![vec![0.0; nv]; grid.dim()],
            table: vec![vec![0.0; nv]; grid.dim()],
        }
    }
}

/// Remaps `src` into `dst` under `ξ ↦ shift + λ ξ`. `moments` must be the
/// moments of `src`; the image has mass `moments.sum`, mean
/// `shift + λ·mean` and per-axis variance `λ²·var` whenever the tilted path
/// succeeds, and exact mass and mean on the deposit path.
pub fn affine_remap(
    grid: &PhaseGrid,
    src: &[f64],
    dst: &mut [f64],
    shift: [f64; 3],
    lambda: f64,
    moments: &CellMoments,
    ws: &mut RemapWorkspace,
) -> RemapOutcome {
    let d = grid.dim();
    let hv = grid.hv();
    if moments.sum <= 0.0 {
        dst.copy_from_slice(src);
        return RemapOutcome { path: RemapPath::Identity, escaped_mass: 0.0 };
    }
    let near_identity = (lambda - 1.0).abs() <= 4.0 * f64::EPSILON
        && shift[..d].iter().all(|s| s.abs() <= 4.0 * f64::EPSILON * grid.vmax());
    if near_identity {
        dst.copy_from_slice(src);
        return RemapOutcome { path: RemapPath::Identity, escaped_mass: 0.0 };
    }

    let mut target_mean = [0.0; 3];
    let mut target_var = [0.0; 3];
    for a in 0..d {
        target_mean[a] = shift[a] + lambda * moments.mean[a];
        target_var[a] = lambda * lambda * moments.cov[4 * a];
    }

    let representable = (0..d).all(|a| target_var[a] >= min_variance(grid, target_mean[a]) + VARIANCE_MARGIN * hv * hv);
    if representable && lambda > 1e-12 {
        dst.copy_from_slice(src);
        for a in 0..d {
            remap_axis(grid, dst, a, shift[a], lambda, ws);
        }
        let kept: f64 = dst.iter().sum();
        let escaped = (moments.sum - kept).max(0.0);
        if tilt(grid, dst, moments.sum, &target_mean, &target_var, ws) {
            return RemapOutcome { path: RemapPath::Tilted, escaped_mass: escaped };
        }
    }
    let escaped = deposit(grid, src, dst, shift, lambda);
    RemapOutcome { path: RemapPath::Deposit, escaped_mass: escaped }
}

/// Tilts `values` in place to node-sum `mass`, per-axis mean `mean` and
/// per-axis variance `var`. Returns false when the targets are not
/// representable on the current support; `values` is then unspecified.
pub fn match_moments(grid: &PhaseGrid, values: &mut [f64], mass: f64, mean: &[f64; 3], var: &[f64; 3], ws: &mut RemapWorkspace) -> bool {
    let hv = grid.hv();
    let representable = (0..grid.dim()).all(|a| var[a] >= min_variance(grid, mean[a]) + VARIANCE_MARGIN * hv * hv);
    representable && tilt(grid, values, mass, mean, var, ws)
}

/// Variance of the two-node representation of a point mass at `c`.
fn min_variance(grid: &PhaseGrid, c: f64) -> f64 {
    let hv = grid.hv();
    let p = (c - grid.vc()[0]) / hv;
    let t = p - p.floor();
    hv * hv * t * (1.0 - t)
}

/// 1-D piecewise-linear conservative remap of every line along `axis`.
fn remap_axis(grid: &PhaseGrid, values: &mut [f64], axis: usize, shift: f64, lambda: f64, ws: &mut RemapWorkspace) {
    if lambda == 1.0 && shift == 0.0 {
        return;
    }
    let nv = grid.nv();
    let stride = grid.vel_stride(axis);
    let n = values.len();
    for start in 0..n {
        if (start / stride) % nv != 0 {
            continue;
        }
        for k in 0..nv {
            ws.line_in[k] = values[start + k * stride];
        }
        if ws.line_in.iter().all(|&v| v == 0.0) {
            continue;
        }
        remap_line(grid, ws, shift, lambda);
        for k in 0..nv {
            values[start + k * stride] = ws.line_out[k];
        }
    }
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

fn remap_line(grid: &PhaseGrid, ws: &mut RemapWorkspace, shift: f64, lambda: f64) {
    let nv = grid.nv();
    let hv = grid.hv();
    let e0 = -grid.vmax();
    let f = &ws.line_in;
    for j in 0..nv {
        let left = if j == 0 { 0.0 } else { f[j - 1] };
        let right = if j + 1 == nv { 0.0 } else { f[j + 1] };
        ws.slopes[j] = minmod(f[j] - left, right - f[j]);
    }
    ws.cumulative[0] = 0.0;
    for j in 0..nv {
        ws.cumulative[j + 1] = ws.cumulative[j] + f[j] * hv;
    }
    let cum = |x: f64| -> f64 {
        let p = (x - e0) / hv;
        if p <= 0.0 {
            return 0.0;
        }
        if p >= nv as f64 {
            return ws.cumulative[nv];
        }
        let j = (p.floor() as usize).min(nv - 1);
        let t = p - j as f64;
        ws.cumulative[j] + hv * (f[j] * t + 0.5 * ws.slopes[j] * (t * t - t))
    };
    let mut lower = cum((e0 - shift) / lambda);
    for i in 0..nv {
        let edge = e0 + (i + 1) as f64 * hv;
        let upper = cum((edge - shift) / lambda);
        ws.line_out[i] = ((upper - lower) / hv).max(0.0);
        lower = upper;
    }
}

/// Deposits node-sum `mass` at velocity `point` onto its neighbouring nodes.
pub fn deposit_point(grid: &PhaseGrid, values: &mut [f64], mass: f64, point: &[f64; 3]) {
    let mut src = vec![0.0; values.len()];
    src[0] = mass;
    let mut shift = [0.0; 3];
    for a in 0..grid.dim() {
        shift[a] = point[a];
    }
    deposit(grid, &src, values, shift, 0.0);
}

/// Linear (cloud-in-cell) deposit of the mapped nodes. Images beyond the
/// outermost nodes are clamped onto them; that mass is returned.
fn deposit(grid: &PhaseGrid, src: &[f64], dst: &mut [f64], shift: [f64; 3], lambda: f64) -> f64 {
    let d = grid.dim();
    let nv = grid.nv();
    let hv = grid.hv();
    let v0 = grid.vc()[0];
    dst.iter_mut().for_each(|v| *v = 0.0);
    let mut escaped = 0.0;
    for (j, &mass) in src.iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        let mut lo = [0usize; 3];
        let mut frac = [0.0f64; 3];
        let mut outside = false;
        for a in 0..d {
            let y = shift[a] + lambda * grid.v(j, a);
            let p = (y - v0) / hv;
            if p <= 0.0 {
                outside |= p < 0.0;
                lo[a] = 0;
                frac[a] = 0.0;
            } else if p >= (nv - 1) as f64 {
                outside |= p > (nv - 1) as f64;
                lo[a] = nv - 2;
                frac[a] = 1.0;
            } else {
                let k = (p.floor() as usize).min(nv - 2);
                lo[a] = k;
                frac[a] = p - k as f64;
            }
        }
        if outside {
            escaped += mass;
        }
        for corner in 0..(1usize << d) {
            let mut weight = mass;
            let mut node = 0;
            for a in 0..d {
                let up = (corner >> a) & 1;
                weight *= if up == 1 { frac[a] } else { 1.0 - frac[a] };
                node += (lo[a] + up) * grid.vel_stride(a);
            }
            dst[node] += weight;
        }
    }
    escaped
}

/// Tilts `values` in place to mass `mass`, per-axis mean `mean` and per-axis
/// variance `var`. Returns false (leaving `values` in an unspecified state)
/// when the constraints cannot be met on the current support.
fn tilt(grid: &PhaseGrid, values: &mut [f64], mass: f64, mean: &[f64; 3], var: &[f64; 3], ws: &mut RemapWorkspace) -> bool {
    let d = grid.dim();
    let nv = grid.nv();
    let vc = grid.vc();

    for a in 0..d {
        if !marginal_admits(grid, values, a, mean[a], var[a], ws) {
            return false;
        }
        let scale = var[a].sqrt();
        for k in 0..nv {
            ws.z[a][k] = (vc[k] - mean[a]) / scale;
        }
    }

    let m = 2 * d;
    let mut theta = [0.0f64; 6];
    let (mut psi, mut grad, mut hess) = tilt_eval(grid, values, &theta, ws);
    for _ in 0..MAX_NEWTON {
        if converged(&grad, d, 1e-13, 1e-12) {
            apply_tilt(grid, values, mass, &theta, ws);
            return true;
        }
        let Some(step) = solve_dense(&hess, &grad, m) else {
            return false;
        };
        let slope: f64 = (0..m).map(|i| -grad[i] * step[i]).sum();
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha > 1e-12 {
            let mut trial = theta;
            for i in 0..m {
                trial[i] -= alpha * step[i];
            }
            let (p, g, h) = tilt_eval(grid, values, &trial, ws);
            if p.is_finite() && p <= psi + 1e-4 * alpha * slope + 1e-15 * psi.abs().max(1.0) {
                theta = trial;
                psi = p;
                grad = g;
                hess = h;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            if converged(&grad, d, 1e-10, 1e-10) {
                apply_tilt(grid, values, mass, &theta, ws);
                return true;
            }
            return false;
        }
    }
    false
}

fn converged(grad: &[f64; 6], d: usize, tol_mean: f64, tol_var: f64) -> bool {
    (0..d).all(|a| grad[a].abs() <= tol_mean && grad[d + a].abs() <= tol_var)
}

/// Support and moment feasibility of the marginal along `axis`.
fn marginal_admits(grid: &PhaseGrid, values: &[f64], axis: usize, mean: f64, var: f64, ws: &mut RemapWorkspace) -> bool {
    let nv = grid.nv();
    let vc = grid.vc();
    ws.marginal.iter_mut().for_each(|v| *v = 0.0);
    for (j, &v) in values.iter().enumerate() {
        ws.marginal[grid.vel_coord(j, axis)] += v;
    }
    let support: Vec<usize> = (0..nv).filter(|&k| ws.marginal[k] > 0.0).collect();
    if support.len() < 3 {
        return false;
    }
    let lo = vc[support[0]];
    let hi = vc[*support.last().unwrap()];
    mean > lo && mean < hi && var < 0.9 * (mean - lo) * (hi - mean)
}

/// Log-partition `ψ(θ) = ln Σ f_j e^{θ·φ_j}` minus `θ·target` (targets are
/// zero mean and unit variance in the scaled coordinates), with gradient and
/// Hessian.
fn tilt_eval(grid: &PhaseGrid, values: &[f64], theta: &[f64; 6], ws: &mut RemapWorkspace) -> (f64, [f64; 6], [[f64; 6]; 6]) {
    let d = grid.dim();
    let nv = grid.nv();
    for a in 0..d {
        for k in 0..nv {
            let z = ws.z[a][k];
            ws.table[a][k] = theta[a] * z + theta[d + a] * z * z;
        }
    }
    let mut smax = f64::NEG_INFINITY;
    for (j, &v) in values.iter().enumerate() {
        if v > 0.0 {
            let s = v.ln() + (0..d).map(|a| ws.table[a][grid.vel_coord(j, a)]).sum::<f64>();
            ws.exponent[j] = s;
            smax = smax.max(s);
        }
    }
    let m = 2 * d;
    let mut z_sum = 0.0;
    let mut first = [0.0f64; 6];
    let mut second = [[0.0f64; 6]; 6];
    let mut phi = [0.0f64; 6];
    for (j, &v) in values.iter().enumerate() {
        if v <= 0.0 {
            continue;
        }
        let w = (ws.exponent[j] - smax).exp();
        if w == 0.0 {
            continue;
        }
        for a in 0..d {
            let z = ws.z[a][grid.vel_coord(j, a)];
            phi[a] = z;
            phi[d + a] = z * z;
        }
        z_sum += w;
        for p in 0..m {
            first[p] += w * phi[p];
            for q in p..m {
                second[p][q] += w * phi[p] * phi[q];
            }
        }
    }
    let mut grad = [0.0; 6];
    let mut hess = [[0.0; 6]; 6];
    for p in 0..m {
        first[p] /= z_sum;
    }
    for p in 0..m {
        for q in p..m {
            let c = second[p][q] / z_sum - first[p] * first[q];
            hess[p][q] = c;
            hess[q][p] = c;
        }
    }
    let mut psi = smax + z_sum.ln();
    for a in 0..d {
        grad[a] = first[a];
        grad[d + a] = first[d + a] - 1.0;
        psi -= theta[d + a];
    }
    (psi, grad, hess)
}

fn apply_tilt(grid: &PhaseGrid, values: &mut [f64], mass: f64, theta: &[f64; 6], ws: &mut RemapWorkspace) {
    // tilt_eval left `exponent` holding the accepted θ only if it was the last
    // evaluation, so recompute.
    let _ = tilt_eval(grid, values, theta, ws);
    let smax = values
        .iter()
        .zip(&ws.exponent)
        .filter(|(v, _)| **v > 0.0)
        .map(|(_, s)| *s)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (v, s) in values.iter_mut().zip(&ws.exponent) {
        if *v > 0.0 {
            *v = (s - smax).exp();
            total += *v;
        }
    }
    let scale = mass / total;
    values.iter_mut().for_each(|v| *v *= scale);
}

/// Solves `h x = g` for a symmetric positive definite `m×m` system by
/// Gaussian elimination with partial pivoting.
fn solve_dense(h: &[[f64; 6]; 6], g: &[f64; 6], m: usize) -> Option<[f64; 6]> {
    let mut a = *h;
    let mut b = *g;
    for col in 0..m {
        let pivot = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..m {
            let factor = a[row][col] / a[col][col];
            for k in col..m {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0; 6];
    for row in (0..m).rev() {
        let mut acc = b[row];
        for k in row + 1..m {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
        if !x[row].is_finite() {
            return None;
        }
    }
    Some(x)
}
