//! Estimators on observable maps and `G(0)` time series.
//!
//! The magnetization correlation is
//!
//! ```text
//! G(dr) = sum_r Re[M*(r + dr) M(r)] / ((g_F mu_B)^2 sum_r n(r + dr) n(r))
//! ```
//!
//! with `M = g_F mu_B F_perp`, so the moment cancels and a fully transverse
//! ferromagnet gives `G = 1`. Both sums run over positions `r` with `r` and
//! `r + dr` inside the analysis region.

use ndarray::{s, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::field::{Grid2D, ObservableMaps};

/// Axis-aligned rectangle centred on the grid origin, in um.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub width_x: f64,
    pub width_z: f64,
}

impl Default for Region {
    fn default() -> Self {
        Self {
            width_x: 16.0,
            width_z: 124.0,
        }
    }
}

impl Region {
    /// Covers the whole grid.
    pub fn full(grid: &Grid2D) -> Self {
        Self {
            width_x: grid.lx(),
            width_z: grid.lz(),
        }
    }

    /// Index ranges `(i0..i1, j0..j1)` of the grid points inside the region.
    pub fn indices(&self, grid: &Grid2D) -> Result<(std::ops::Range<usize>, std::ops::Range<usize>)> {
        if !(self.width_x > 0.0 && self.width_z > 0.0) {
            return Err(Error::EmptyRegion);
        }
        let tol = 1e-9;
        if self.width_x > grid.lx() * (1.0 + tol) || self.width_z > grid.lz() * (1.0 + tol) {
            return Err(Error::Domain(format!(
                "region {} x {} um exceeds the {} x {} um grid",
                self.width_x,
                self.width_z,
                grid.lx(),
                grid.lz()
            )));
        }
        let range = |n: usize, d: f64, w: f64| {
            let count = ((w / d) * (1.0 + tol)).floor() as usize;
            let count = count.min(n);
            let start = (n - count) / 2;
            start..start + count
        };
        let ri = range(grid.nx, grid.dx, self.width_x);
        let rj = range(grid.nz, grid.dz, self.width_z);
        if ri.is_empty() || rj.is_empty() {
            return Err(Error::EmptyRegion);
        }
        Ok((ri, rj))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationResult {
    /// lag spacing (dx, dz), um
    pub spacing: (f64, f64),
    /// largest lag index along x and z; `g` has shape `(2 mx + 1, 2 mz + 1)`
    /// with zero lag at `(mx, mz)`
    pub max_lag: (usize, usize),
    #[serde(skip)]
    pub g: Array2<f64>,
    pub g0: f64,
    pub region: Region,
}

impl CorrelationResult {
    pub fn at(&self, lx: isize, lz: isize) -> f64 {
        let (mx, mz) = self.max_lag;
        self.g[[(mx as isize + lx) as usize, (mz as isize + lz) as usize]]
    }

    /// `G(0, dz)` for `dz >= 0`.
    pub fn long_axis_profile(&self) -> Vec<(f64, f64)> {
        let (mx, mz) = self.max_lag;
        (0..=mz)
            .map(|l| (l as f64 * self.spacing.1, self.g[[mx, mz + l]]))
            .collect()
    }

    /// Azimuthal average of `G` in annuli of width `bin_um`, out to the
    /// shorter half-extent of the lag window. Lags with undefined `G` are
    /// skipped.
    pub fn radial_profile(&self, bin_um: f64) -> Vec<(f64, f64)> {
        let (mx, mz) = self.max_lag;
        let (dx, dz) = self.spacing;
        let r_max = (mx as f64 * dx).min(mz as f64 * dz);
        let nbins = (r_max / bin_um).floor() as usize + 1;
        let mut sum = vec![0.0; nbins];
        let mut count = vec![0usize; nbins];
        for ((i, j), v) in self.g.indexed_iter() {
            if !v.is_finite() {
                continue;
            }
            let x = (i as f64 - mx as f64) * dx;
            let z = (j as f64 - mz as f64) * dz;
            let r = x.hypot(z);
            let b = (r / bin_um + 0.5).floor() as usize;
            if b < nbins {
                sum[b] += v;
                count[b] += 1;
            }
        }
        (0..nbins)
            .filter(|&b| count[b] > 0)
            .map(|b| (b as f64 * bin_um, sum[b] / count[b] as f64))
            .collect()
    }
}

/// Full lag map of `G` over `region`. Lags whose density sum vanishes are
/// `NaN`.
pub fn correlation(maps: &ObservableMaps, region: &Region) -> Result<CorrelationResult> {
    let (ri, rj) = region.indices(&maps.grid)?;
    let (wx, wz) = (ri.len(), rj.len());
    let fp = maps.f_perp.slice(s![ri.clone(), rj.clone()]);
    let n = maps.density.slice(s![ri, rj]);
    let (px, pz) = (2 * wx, 2 * wz);
    let mut fft = Fft2::new(px, pz);
    let autocorr = |fft: &mut Fft2, a: &mut Array2<Complex64>| {
        fft.forward(a);
        a.mapv_inplace(|v| Complex64::new(v.norm_sqr(), 0.0));
        fft.inverse_normalized(a);
    };
    let mut a = Array2::<Complex64>::zeros((px, pz));
    a.slice_mut(s![..wx, ..wz]).assign(&fp);
    let mut b = Array2::<Complex64>::zeros((px, pz));
    b.slice_mut(s![..wx, ..wz])
        .assign(&n.mapv(|v| Complex64::new(v, 0.0)));
    autocorr(&mut fft, &mut a);
    autocorr(&mut fft, &mut b);

    let (mx, mz) = (wx - 1, wz - 1);
    let wrap = |l: isize, p: usize| l.rem_euclid(p as isize) as usize;
    let denom0 = b[[0, 0]].re;
    if !(denom0 > 0.0) {
        return Err(Error::ZeroDenominator);
    }
    let scale = denom0.abs();
    let g = Array2::from_shape_fn((2 * mx + 1, 2 * mz + 1), |(i, j)| {
        let (lx, lz) = (i as isize - mx as isize, j as isize - mz as isize);
        let (ii, jj) = (wrap(lx, px), wrap(lz, pz));
        let den = b[[ii, jj]].re;
        if den > 1e-13 * scale {
            a[[ii, jj]].re / den
        } else {
            f64::NAN
        }
    });
    let g0 = g[[mx, mz]];
    Ok(CorrelationResult {
        spacing: (maps.grid.dx, maps.grid.dz),
        max_lag: (mx, mz),
        g,
        g0,
        region: *region,
    })
}

/// `G(0)` over `region` without computing the lag map.
pub fn g0(maps: &ObservableMaps, region: &Region) -> Result<f64> {
    let (ri, rj) = region.indices(&maps.grid)?;
    let fp = maps.f_perp.slice(s![ri.clone(), rj.clone()]);
    let n = maps.density.slice(s![ri, rj]);
    let num: f64 = fp.iter().map(|v| v.norm_sqr()).sum();
    let den: f64 = n.iter().map(|v| v * v).sum();
    if !(den > 0.0) {
        return Err(Error::ZeroDenominator);
    }
    Ok(num / den)
}

/// Lag of the first local minimum of a sampled profile `(lag, G)` starting
/// at zero lag. The minimum is located where the linearly interpolated
/// finite-difference slope changes sign from negative to non-negative.
pub fn domain_size(profile: &[(f64, f64)]) -> Result<f64> {
    if profile.len() < 3 {
        return Err(Error::NoMinimum);
    }
    // slopes at midpoints
    let slopes: Vec<(f64, f64)> = profile
        .windows(2)
        .map(|w| (0.5 * (w[0].0 + w[1].0), (w[1].1 - w[0].1) / (w[1].0 - w[0].0)))
        .collect();
    for w in slopes.windows(2) {
        let ((x0, s0), (x1, s1)) = (w[0], w[1]);
        if !(s0.is_finite() && s1.is_finite()) {
            return Err(Error::NoMinimum);
        }
        if s0 < 0.0 && s1 >= 0.0 {
            return Ok(x0 + (x1 - x0) * (-s0) / (s1 - s0));
        }
    }
    Err(Error::NoMinimum)
}

/// `10 log10(final / initial)`.
pub fn gain_db(g0_initial: f64, g0_final: f64) -> Result<f64> {
    if !(g0_initial > 0.0) || !(g0_final > 0.0) {
        return Err(Error::Domain("gain needs positive variances".into()));
    }
    Ok(10.0 * (g0_final / g0_initial).log10())
}

/// Largest `|F_z|` over the region relative to the largest `|F|`.
pub fn longitudinal_fraction(maps: &ObservableMaps, region: &Region) -> Result<f64> {
    let (ri, rj) = region.indices(&maps.grid)?;
    let fz = maps.fz.slice(s![ri.clone(), rj.clone()]);
    let fp = maps.f_perp.slice(s![ri, rj]);
    let max_fz = fz.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let max_f = fz
        .iter()
        .zip(fp.iter())
        .fold(0.0_f64, |m, (z, p)| m.max((z * z + p.norm_sqr()).sqrt()));
    if max_f == 0.0 {
        return Ok(0.0);
    }
    Ok(max_fz / max_f)
}

/// A `G(0)` time series, times in ms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub t: Vec<f64>,
    pub g0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSeries {
    pub t: Vec<f64>,
    pub mean: Vec<f64>,
    /// standard error of the mean (sample deviation / sqrt(runs))
    pub stderr: Vec<f64>,
    pub runs: usize,
}

pub fn ensemble_average(runs: &[Series]) -> Result<EnsembleSeries> {
    let first = runs.first().ok_or_else(|| Error::MismatchedGrids("no runs".into()))?;
    for (i, r) in runs.iter().enumerate() {
        if r.t.len() != r.g0.len() {
            return Err(Error::MismatchedGrids(format!("run {i}: {} times, {} values", r.t.len(), r.g0.len())));
        }
        if r.t != first.t {
            return Err(Error::MismatchedGrids(format!("run {i} has a different time grid")));
        }
    }
    let m = runs.len() as f64;
    let n = first.t.len();
    let mut mean = vec![0.0; n];
    let mut stderr = vec![0.0; n];
    for k in 0..n {
        let mu = runs.iter().map(|r| r.g0[k]).sum::<f64>() / m;
        mean[k] = mu;
        if runs.len() > 1 {
            let var = runs.iter().map(|r| (r.g0[k] - mu).powi(2)).sum::<f64>() / (m - 1.0);
            stderr[k] = (var / m).sqrt();
        }
    }
    Ok(EnsembleSeries {
        t: first.t.clone(),
        mean,
        stderr,
        runs: runs.len(),
    })
}

/// `Delta chi^2` levels of the 1, 2 and 3 sigma regions for two parameters.
pub const DELTA_CHI2: [f64; 3] = [2.30, 6.18, 11.83];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub t_m: f64,
    /// points with t above this are ignored, ms
    pub t_max: f64,
    /// samples per axis of the chi^2 surface
    pub surface_points: usize,
    /// half-width of the surface in standard errors of each parameter
    pub surface_span: f64,
    /// rays used to trace each contour
    pub contour_rays: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            t_m: 77.0,
            t_max: 90.0,
            surface_points: 61,
            surface_span: 5.0,
            contour_rays: 72,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiSquareSurface {
    pub g0_tm: Vec<f64>,
    pub tau_ms: Vec<f64>,
    /// `chi2[i][j]` at `(g0_tm[i], tau_ms[j])`
    pub chi2: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Contour {
    pub sigma: usize,
    pub delta_chi2: f64,
    /// closed polyline of `(g0_tm, tau_ms)`
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthFit {
    pub g0_tm: f64,
    pub tau_ms: f64,
    pub t_m: f64,
    pub chi2_min: f64,
    pub weighted: bool,
    pub surface: ChiSquareSurface,
    pub contours: Vec<Contour>,
    #[serde(skip)]
    data: Vec<(f64, f64, f64)>,
}

/// `G(0)|_t = g0_tm sqrt(t / t_m) exp((t - t_m) / tau)`.
pub fn growth_model(t: f64, g0_tm: f64, tau_ms: f64, t_m: f64) -> f64 {
    g0_tm * (t / t_m).sqrt() * ((t - t_m) / tau_ms).exp()
}

impl GrowthFit {
    /// chi^2 of the fitted data at arbitrary parameters.
    pub fn chi2_at(&self, g0_tm: f64, tau_ms: f64) -> f64 {
        chi2(&self.data, g0_tm, tau_ms, self.t_m, self.weighted)
    }

    /// Whether `(g0_tm, tau_ms)` lies inside the `sigma`-level region
    /// (1, 2 or 3).
    pub fn contains(&self, g0_tm: f64, tau_ms: f64, sigma: usize) -> bool {
        let level = DELTA_CHI2[sigma.clamp(1, 3) - 1];
        self.chi2_at(g0_tm, tau_ms) - self.chi2_min <= level
    }
}

fn chi2(data: &[(f64, f64, f64)], g: f64, tau: f64, t_m: f64, weighted: bool) -> f64 {
    if !(g > 0.0) || tau == 0.0 {
        return f64::INFINITY;
    }
    data.iter()
        .map(|&(t, y, s)| {
            let m = growth_model(t, g, tau, t_m);
            if weighted {
                ((y - m) / s).powi(2)
            } else {
                (y.ln() - m.ln()).powi(2)
            }
        })
        .sum()
}

/// Fits the growth model to `(t, G0)` with optional standard errors.
/// Weighted fits minimise chi^2 in linear space; unweighted fits use least
/// squares of `ln G0`.
pub fn fit_growth(t: &[f64], g0: &[f64], sigma: Option<&[f64]>, opts: &FitOptions) -> Result<GrowthFit> {
    if t.len() != g0.len() || sigma.is_some_and(|s| s.len() != t.len()) {
        return Err(Error::Fit("series lengths differ".into()));
    }
    if !(opts.t_m > 0.0) {
        return Err(Error::Fit("t_m must be positive".into()));
    }
    let mut data = Vec::new();
    for k in 0..t.len() {
        if !(t[k] > 0.0 && t[k] <= opts.t_max) {
            continue;
        }
        if !(g0[k] > 0.0) {
            return Err(Error::Fit(format!("non-positive G0 at t = {} ms", t[k])));
        }
        let s = match sigma {
            Some(s) if !(s[k] > 0.0) => {
                return Err(Error::Fit(format!("non-positive error at t = {} ms", t[k])))
            }
            Some(s) => s[k],
            None => 1.0,
        };
        data.push((t[k], g0[k], s));
    }
    if data.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 points with 0 < t <= {} ms, have {}",
            opts.t_max,
            data.len()
        )));
    }
    let weighted = sigma.is_some();
    let t_m = opts.t_m;

    // ln G - ln sqrt(t/t_m) = ln g + (t - t_m) / tau
    let (a, b) = linear_lsq(data.iter().map(|&(t, y, s)| {
        let w = if weighted { (y / s).powi(2) } else { 1.0 };
        (t - t_m, y.ln() - 0.5 * (t / t_m).ln(), w)
    }))?;
    if !(b > 0.0) {
        return Err(Error::Fit("series does not grow; tau is undefined".into()));
    }
    let (mut g, mut rate) = (a.exp(), b);
    if weighted {
        (g, rate) = gauss_newton(&data, g, rate, t_m)?;
    }
    let tau = 1.0 / rate;
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Fit("fit converged to a non-growing solution".into()));
    }
    let chi2_min = chi2(&data, g, tau, t_m, weighted);

    let (sg, stau) = parameter_errors(&data, g, tau, t_m, weighted, chi2_min);
    let surface = surface(&data, g, tau, sg, stau, t_m, weighted, opts);
    let contours = DELTA_CHI2
        .iter()
        .enumerate()
        .map(|(i, &level)| Contour {
            sigma: i + 1,
            delta_chi2: level,
            points: trace_contour(&data, g, tau, sg, stau, t_m, weighted, chi2_min + level, opts.contour_rays),
        })
        .collect();
    Ok(GrowthFit {
        g0_tm: g,
        tau_ms: tau,
        t_m,
        chi2_min,
        weighted,
        surface,
        contours,
        data,
    })
}

/// Weighted straight-line fit `y = a + b x`.
fn linear_lsq(points: impl Iterator<Item = (f64, f64, f64)>) -> Result<(f64, f64)> {
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (x, y, w) in points {
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let det = sw * sxx - sx * sx;
    if !(det.abs() > 1e-300) {
        return Err(Error::Fit("all points at the same time".into()));
    }
    Ok(((sxx * sy - sx * sxy) / det, (sw * sxy - sx * sy) / det))
}

/// Levenberg-Marquardt on `(g, 1/tau)` for the weighted linear-space chi^2.
fn gauss_newton(data: &[(f64, f64, f64)], g: f64, rate: f64, t_m: f64) -> Result<(f64, f64)> {
    let cost = |g: f64, r: f64| chi2(data, g, 1.0 / r, t_m, true);
    let (mut g, mut r) = (g, rate);
    let mut c = cost(g, r);
    let mut lambda = 1e-3;
    for _ in 0..200 {
        let (mut jtj, mut jtr) = ([[0.0; 2]; 2], [0.0; 2]);
        for &(t, y, s) in data {
            let m = g * (t / t_m).sqrt() * ((t - t_m) * r).exp();
            let j = [m / g / s, m * (t - t_m) / s];
            let res = (y - m) / s;
            for p in 0..2 {
                jtr[p] += j[p] * res;
                for q in 0..2 {
                    jtj[p][q] += j[p] * j[q];
                }
            }
        }
        let mut improved = false;
        for _ in 0..30 {
            let a = [[jtj[0][0] * (1.0 + lambda), jtj[0][1]], [jtj[1][0], jtj[1][1] * (1.0 + lambda)]];
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            if det == 0.0 {
                break;
            }
            let dg = (a[1][1] * jtr[0] - a[0][1] * jtr[1]) / det;
            let dr = (a[0][0] * jtr[1] - a[1][0] * jtr[0]) / det;
            let (ng, nr) = (g + dg, r + dr);
            let nc = cost(ng, nr);
            if nc.is_finite() && nc <= c {
                let done = (c - nc) <= 1e-14 * c.max(1e-300) && dg.abs() <= 1e-12 * g && dr.abs() <= 1e-12 * r.abs();
                g = ng;
                r = nr;
                c = nc;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if done {
                    return Ok((g, r));
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            return Ok((g, r));
        }
    }
    Ok((g, r))
}

/// Standard errors of `(g, tau)` from the curvature of chi^2 (scaled so the
/// surface covers the interesting region for unweighted fits too).
fn parameter_errors(data: &[(f64, f64, f64)], g: f64, tau: f64, t_m: f64, weighted: bool, chi2_min: f64) -> (f64, f64) {
    let f = |a: f64, b: f64| chi2(data, a, b, t_m, weighted);
    let (hg, ht) = (1e-4 * g, 1e-4 * tau);
    let c = f(g, tau);
    let d2g = (f(g + hg, tau) - 2.0 * c + f(g - hg, tau)) / (hg * hg);
    let d2t = (f(g, tau + ht) - 2.0 * c + f(g, tau - ht)) / (ht * ht);
    let dgt = (f(g + hg, tau + ht) - f(g + hg, tau - ht) - f(g - hg, tau + ht) + f(g - hg, tau - ht)) / (4.0 * hg * ht);
    // covariance = 2 H^-1
    let det = d2g * d2t - dgt * dgt;
    let mut scale = 1.0;
    if !weighted && data.len() > 2 {
        scale = (chi2_min / (data.len() - 2) as f64).max(1e-30);
    }
    if det > 0.0 && d2g > 0.0 {
        let sg = (2.0 * d2t / det * scale).sqrt();
        let st = (2.0 * d2g / det * scale).sqrt();
        if sg.is_finite() && st.is_finite() && sg > 0.0 && st > 0.0 {
            return (sg, st);
        }
    }
    (0.05 * g, 0.05 * tau)
}

#[allow(clippy::too_many_arguments)]
fn surface(
    data: &[(f64, f64, f64)],
    g: f64,
    tau: f64,
    sg: f64,
    stau: f64,
    t_m: f64,
    weighted: bool,
    opts: &FitOptions,
) -> ChiSquareSurface {
    let n = opts.surface_points.max(3);
    let axis = |c: f64, s: f64| -> Vec<f64> {
        let lo = (c - opts.surface_span * s).max(c * 1e-3);
        let hi = c + opts.surface_span * s;
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    };
    let gs = axis(g, sg);
    let ts = axis(tau, stau);
    let chi2 = gs
        .iter()
        .map(|&a| ts.iter().map(|&b| chi2(data, a, b, t_m, weighted)).collect())
        .collect();
    ChiSquareSurface {
        g0_tm: gs,
        tau_ms: ts,
        chi2,
    }
}

/// Contour of `chi2 = level`, found by bisection along rays from the
/// minimum in coordinates scaled by the parameter errors.
#[allow(clippy::too_many_arguments)]
fn trace_contour(
    data: &[(f64, f64, f64)],
    g: f64,
    tau: f64,
    sg: f64,
    stau: f64,
    t_m: f64,
    weighted: bool,
    level: f64,
    rays: usize,
) -> Vec<(f64, f64)> {
    let f = |u: f64, v: f64| chi2(data, g + u * sg, tau + v * stau, t_m, weighted);
    let mut pts = Vec::with_capacity(rays);
    for k in 0..rays {
        let phi = 2.0 * std::f64::consts::PI * k as f64 / rays as f64;
        let (c, s) = (phi.cos(), phi.sin());
        let mut lo = 0.0;
        let mut hi = 1.0;
        while f(hi * c, hi * s) < level && hi < 1e3 {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if f(mid * c, mid * s) < level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let r = 0.5 * (lo + hi);
        pts.push((g + r * c * sg, tau + r * s * stau));
    }
    pts
}

/// Power growth rate `r` (in inverse units of `t`) of a mode pair from
/// samples of `P(t) = a e^{r t} + b + c e^{-r t}`, the general linear
/// response of an unstable pair. The amplitudes are solved by linear least
/// squares for each trial rate and the rate by golden-section search on the
/// relative residual within `(r_lo, r_hi)`.
pub fn pair_growth_rate(t: &[f64], power: &[f64], r_lo: f64, r_hi: f64) -> Result<f64> {
    if t.len() != power.len() || t.len() < 4 {
        return Err(Error::Fit("need at least four samples".into()));
    }
    let scale = power.iter().fold(0.0_f64, |m, p| m.max(p.abs()));
    if !(scale > 0.0) {
        return Err(Error::Fit("power is identically zero".into()));
    }
    let residual = |r: f64| -> f64 {
        let basis = |tt: f64| [(r * tt).exp(), 1.0, (-r * tt).exp()];
        let mut ata = [[0.0; 3]; 3];
        let mut aty = [0.0; 3];
        for (&tt, &p) in t.iter().zip(power) {
            let phi = basis(tt);
            for i in 0..3 {
                aty[i] += phi[i] * p / scale;
                for j in 0..3 {
                    ata[i][j] += phi[i] * phi[j];
                }
            }
        }
        let Some(coef) = solve3(ata, aty) else {
            return f64::INFINITY;
        };
        t.iter()
            .zip(power)
            .map(|(&tt, &p)| {
                let phi = basis(tt);
                let m: f64 = (0..3).map(|i| coef[i] * phi[i]).sum();
                (p / scale - m).powi(2)
            })
            .sum()
    };
    let gr = 0.5 * (5.0_f64.sqrt() - 1.0);
    let (mut a, mut b) = (r_lo, r_hi);
    let mut x1 = b - gr * (b - a);
    let mut x2 = a + gr * (b - a);
    let (mut f1, mut f2) = (residual(x1), residual(x2));
    for _ in 0..200 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = residual(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = residual(x2);
        }
        if (b - a).abs() < 1e-12 * (a.abs() + b.abs()) {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let mut m = [[0.0; 4]; 3];
    for i in 0..3 {
        m[i][..3].copy_from_slice(&a[i]);
        m[i][3] = b[i];
    }
    for col in 0..3 {
        let piv = (col..3).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        for r in 0..3 {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..4 {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    Some([m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::SpinField;

    fn maps_from(f: &SpinField) -> ObservableMaps {
        f.observables()
    }

    #[test]
    fn region_indices_are_centred() {
        let g = Grid2D::new(64, 512, 0.5, 0.5).unwrap();
        let (ri, rj) = Region::default().indices(&g).unwrap();
        assert_eq!(ri, 16..48);
        assert_eq!(rj, 132..380);
        assert!(Region { width_x: 40.0, width_z: 10.0 }.indices(&g).is_err());
        assert!(matches!(
            Region { width_x: 0.1, width_z: 10.0 }.indices(&g),
            Err(Error::EmptyRegion)
        ));
    }

    #[test]
    fn polar_state_has_zero_correlation() {
        let g = Grid2D::new(4, 8, 1.0, 1.0).unwrap();
        let f = SpinField::polar(g, Array2::from_elem((4, 8), Complex64::new(3.0, 0.0))).unwrap();
        let c = correlation(&maps_from(&f), &Region::full(&g)).unwrap();
        assert!(c.g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn empty_field_is_zero_denominator() {
        let g = Grid2D::new(4, 8, 1.0, 1.0).unwrap();
        let f = SpinField::zeros(g);
        assert!(matches!(correlation(&maps_from(&f), &Region::full(&g)), Err(Error::ZeroDenominator)));
        assert!(matches!(g0(&maps_from(&f), &Region::full(&g)), Err(Error::ZeroDenominator)));
    }

    #[test]
    fn domain_size_of_damped_cosine() {
        let (k, l) = (0.36, 30.0);
        let dz = 0.05;
        let profile: Vec<(f64, f64)> = (0..600)
            .map(|i| {
                let z = i as f64 * dz;
                (z, (k * z).cos() * (-z / l).exp())
            })
            .collect();
        let got = domain_size(&profile).unwrap();
        // d/dz [cos(kz) e^{-z/L}] = 0  ->  tan(kz) = -1/(kL)
        let exact = (std::f64::consts::PI - (1.0 / (k * l)).atan()) / k;
        assert!((got - exact).abs() < 1e-3, "{got} vs {exact}");
        assert!((got - std::f64::consts::PI / k).abs() / (std::f64::consts::PI / k) < 0.05);
    }

    #[test]
    fn monotone_profile_has_no_minimum() {
        let profile: Vec<(f64, f64)> = (0..50).map(|i| (i as f64, (-(i as f64) / 5.0).exp())).collect();
        assert!(matches!(domain_size(&profile), Err(Error::NoMinimum)));
    }

    #[test]
    fn gain_values() {
        assert!((gain_db(1.0, 1000.0).unwrap() - 30.0).abs() < 1e-12);
        assert_eq!(gain_db(2.0, 2.0).unwrap(), 0.0);
        assert!(gain_db(0.0, 1.0).is_err());
        assert!(gain_db(1.0, -1.0).is_err());
    }

    #[test]
    fn ensemble_mean_and_errors() {
        let a = Series { t: vec![1.0, 2.0], g0: vec![1.0, 4.0] };
        let b = Series { t: vec![1.0, 2.0], g0: vec![3.0, 8.0] };
        let e = ensemble_average(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(e.mean, vec![2.0, 6.0]);
        let same = ensemble_average(&[a.clone(), a.clone(), a.clone()]).unwrap();
        assert!(same.stderr.iter().all(|s| *s == 0.0));
        let c = Series { t: vec![1.0, 3.0], g0: vec![1.0, 1.0] };
        assert!(matches!(ensemble_average(&[a, c]), Err(Error::MismatchedGrids(_))));
    }

    #[test]
    fn fit_rejects_bad_series() {
        let opts = FitOptions::default();
        let t = [10.0, 20.0, 30.0];
        assert!(fit_growth(&t, &[1.0, -1.0, 2.0], None, &opts).is_err());
        assert!(fit_growth(&t[..2], &[1.0, 2.0], None, &opts).is_err());
        assert!(fit_growth(&t, &[1.0, 1.0, 1.0], None, &opts).is_err());
        assert!(fit_growth(&[100.0, 110.0, 120.0], &[1.0, 2.0, 3.0], None, &opts).is_err());
    }

    #[test]
    fn pair_growth_rate_recovers_cosh_like_power() {
        let r = 0.08;
        let t: Vec<f64> = (0..100).map(|i| i as f64 * 0.4).collect();
        let p: Vec<f64> = t.iter().map(|&x| 0.25 * (r * x).exp() + 0.5 + 0.25 * (-r * x).exp()).collect();
        let got = pair_growth_rate(&t, &p, 0.01, 0.5).unwrap();
        assert!((got - r).abs() < 1e-6 * r);
    }
}
