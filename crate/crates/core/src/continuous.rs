//! Off-the-grid recovery: multi-level refinement and ADCG.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::atoms::{self, GridTables, RegularGrid};
use crate::error::{Error, Result};
use crate::linalg::{self, czero, l1_norm, matvec, norm, norm_sqr, sub, CMatrix};
use crate::measurement::MeasurementOperator;
use crate::model::{ChannelSpec, Feature, ProblemDims, SampleVector};
use crate::sparse::{self, GridAtomSet, LassoOptions, OmpResult, OmpStop};

/// Why a solver returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    /// Ran the configured number of steps.
    Completed,
    MaxFeatures,
    Residual,
    Stagnation,
    MaxOuter,
    /// No atom survived thresholding; the channel is empty.
    EmptyAtomSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub atoms: usize,
    pub objective: f64,
    pub residual_norm: f64,
}

/// Estimated channel plus solver metadata.
#[derive(Debug, Clone, Serialize)]
pub struct Recovery {
    pub channel: ChannelSpec,
    pub residual_norm: f64,
    pub stop: StopReason,
    pub iterations: usize,
    pub trace: Vec<TraceRow>,
}

impl From<OmpResult> for Recovery {
    fn from(res: OmpResult) -> Self {
        let trace = res
            .residual_norms
            .iter()
            .enumerate()
            .map(|(i, r)| TraceRow {
                iteration: i,
                atoms: i,
                objective: r * r,
                residual_norm: *r,
            })
            .collect();
        Recovery {
            residual_norm: *res.residual_norms.last().unwrap_or(&0.0),
            iterations: res.selected.len(),
            stop: StopReason::Completed,
            channel: res.channel,
            trace,
        }
    }
}

fn real_matvec(m: &CMatrix, x: &[f64]) -> Vec<Complex64> {
    let mut out = vec![czero(); m.nrows()];
    for (k, xk) in x.iter().enumerate() {
        if *xk == 0.0 {
            continue;
        }
        for (o, mk) in out.iter_mut().zip(m.column(k).iter()) {
            *o += mk * xk;
        }
    }
    out
}

/// `G a(tau, nu)` as `(W alpha) .* (E beta)`.
fn atom_image(g: &MeasurementOperator, tau: f64, nu: f64) -> Vec<Complex64> {
    let d = g.dims();
    let wa = real_matvec(g.identifier_samples(), &atoms::tau_factor(d, tau));
    let eb = real_matvec(g.modulations(), &atoms::nu_factor(d, nu));
    wa.iter().zip(&eb).map(|(a, b)| a * b).collect()
}

/// `G a`, `G d_tau a` and `G d_nu a`.
fn atom_image_with_derivs(
    g: &MeasurementOperator,
    tau: f64,
    nu: f64,
) -> (Vec<Complex64>, Vec<Complex64>, Vec<Complex64>) {
    let d = g.dims();
    let w = g.identifier_samples();
    let e = g.modulations();
    let wa = real_matvec(w, &atoms::tau_factor(d, tau));
    let wda = real_matvec(w, &atoms::tau_factor_deriv(d, tau));
    let eb = real_matvec(e, &atoms::nu_factor(d, nu));
    let edb = real_matvec(e, &atoms::nu_factor_deriv(d, nu));
    let ga = wa.iter().zip(&eb).map(|(a, b)| a * b).collect();
    let gt = wda.iter().zip(&eb).map(|(a, b)| a * b).collect();
    let gn = wa.iter().zip(&edb).map(|(a, b)| a * b).collect();
    (ga, gt, gn)
}

fn residual(g: &MeasurementOperator, eta: &[Complex64], points: &[(f64, f64)], y: &[Complex64]) -> Vec<Complex64> {
    let mut r: Vec<Complex64> = y.iter().map(|v| -v).collect();
    for (e, &(tau, nu)) in eta.iter().zip(points) {
        if *e == czero() {
            continue;
        }
        for (ri, gi) in r.iter_mut().zip(atom_image(g, tau, nu)) {
            *ri += e * gi;
        }
    }
    r
}

/// `F(tau, nu) = ||G Z(tau, nu) eta - y||^2` with `eta` held fixed.
pub fn location_objective(
    eta: &[Complex64],
    points: &[(f64, f64)],
    g: &MeasurementOperator,
    y: &[Complex64],
) -> f64 {
    assert_eq!(eta.len(), points.len(), "location_objective: length mismatch");
    norm_sqr(&residual(g, eta, points, y))
}

/// Value and gradient of the location objective.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationGrad {
    pub objective: f64,
    pub grad_tau: Vec<f64>,
    pub grad_nu: Vec<f64>,
    /// Gauss-Newton diagonal `2 |eta_s|^2 ||G d_tau a_s||^2`.
    pub curv_tau: Vec<f64>,
    pub curv_nu: Vec<f64>,
}

/// `F` and `dF/dtau_s = 2 Re{ (G Z^tau diag(eta))^H (G Z eta - y) }_s`, same in `nu`.
pub fn location_objective_grad(
    eta: &[Complex64],
    points: &[(f64, f64)],
    g: &MeasurementOperator,
    y: &[Complex64],
) -> LocationGrad {
    assert_eq!(eta.len(), points.len(), "location_objective_grad: length mismatch");
    let n = points.len();
    let mut r: Vec<Complex64> = y.iter().map(|v| -v).collect();
    let mut parts = Vec::with_capacity(n);
    for (e, &(tau, nu)) in eta.iter().zip(points) {
        let (ga, gt, gn) = atom_image_with_derivs(g, tau, nu);
        for (ri, gi) in r.iter_mut().zip(&ga) {
            *ri += e * gi;
        }
        parts.push((gt, gn));
    }
    let mut out = LocationGrad {
        objective: norm_sqr(&r),
        grad_tau: vec![0.0; n],
        grad_nu: vec![0.0; n],
        curv_tau: vec![0.0; n],
        curv_nu: vec![0.0; n],
    };
    for (s, (gt, gn)) in parts.iter().enumerate() {
        let e = eta[s];
        let dt: Complex64 = gt.iter().zip(&r).map(|(a, b)| (e * a).conj() * b).sum();
        let dn: Complex64 = gn.iter().zip(&r).map(|(a, b)| (e * a).conj() * b).sum();
        out.grad_tau[s] = 2.0 * dt.re;
        out.grad_nu[s] = 2.0 * dn.re;
        out.curv_tau[s] = 2.0 * e.norm_sqr() * norm_sqr(gt);
        out.curv_nu[s] = 2.0 * e.norm_sqr() * norm_sqr(gn);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DescentConfig {
    pub max_steps: usize,
    /// Sufficient-decrease constant of the backtracking line search.
    pub armijo: f64,
    /// Stop once the predicted decrease is below `rel_tol * F`.
    pub rel_tol: f64,
    /// Smallest trial step before giving up (the full step is 1).
    pub step_floor: f64,
}

impl Default for DescentConfig {
    fn default() -> Self {
        DescentConfig {
            max_steps: 50,
            armijo: 1e-4,
            rel_tol: 1e-12,
            step_floor: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentResult {
    pub points: Vec<(f64, f64)>,
    /// Objective before the first and after every accepted step.
    pub history: Vec<f64>,
}

impl DescentResult {
    pub fn objective(&self) -> f64 {
        *self.history.last().unwrap()
    }

    pub fn steps(&self) -> usize {
        self.history.len() - 1
    }
}

/// Projected gradient descent on the locations with `eta` fixed.
///
/// Directions are scaled by the Gauss-Newton diagonal, which makes the unit
/// step natural in both coordinates; steps are halved until the Armijo test
/// passes and iterates are clamped to the parameter domain.
pub fn local_descent(
    eta: &[Complex64],
    points: &[(f64, f64)],
    g: &MeasurementOperator,
    y: &[Complex64],
    cfg: &DescentConfig,
) -> DescentResult {
    let dims = *g.dims();
    let floor = 1e-30 * norm_sqr(y);
    let mut pts: Vec<(f64, f64)> = points.iter().map(|&(t, v)| dims.clamp(t, v)).collect();
    let mut cur = location_objective_grad(eta, &pts, g, y);
    let mut history = vec![cur.objective];
    let mut step = 1.0f64;

    for _ in 0..cfg.max_steps {
        let f = cur.objective;
        if f <= floor {
            break;
        }
        let dir: Vec<(f64, f64)> = (0..pts.len())
            .map(|s| {
                let dt = if cur.curv_tau[s] > 0.0 { -cur.grad_tau[s] / cur.curv_tau[s] } else { 0.0 };
                let dn = if cur.curv_nu[s] > 0.0 { -cur.grad_nu[s] / cur.curv_nu[s] } else { 0.0 };
                (dt, dn)
            })
            .collect();
        let predicted: f64 = (0..pts.len())
            .map(|s| -(cur.grad_tau[s] * dir[s].0 + cur.grad_nu[s] * dir[s].1))
            .sum();
        if predicted <= cfg.rel_tol * f {
            break;
        }

        let mut accepted = None;
        while step >= cfg.step_floor {
            let trial: Vec<(f64, f64)> = pts
                .iter()
                .zip(&dir)
                .map(|(&(t, v), &(dt, dn))| dims.clamp(t + step * dt, v + step * dn))
                .collect();
            let slope: f64 = (0..pts.len())
                .map(|s| {
                    cur.grad_tau[s] * (trial[s].0 - pts[s].0) + cur.grad_nu[s] * (trial[s].1 - pts[s].1)
                })
                .sum();
            let ft = location_objective(eta, &trial, g, y);
            if slope < 0.0 && ft <= f + cfg.armijo * slope {
                accepted = Some(trial);
                break;
            }
            step *= 0.5;
        }
        let Some(trial) = accepted else {
            break;
        };
        pts = trial;
        cur = location_objective_grad(eta, &pts, g, y);
        history.push(cur.objective);
        step = (2.0 * step).min(1.0);
    }
    DescentResult { points: pts, history }
}

/// `|<b, a(tau, nu)>|^2` and its gradient, for refining an expansion point.
fn correlation_grad(dims: &ProblemDims, b: &[Complex64], tau: f64, nu: f64) -> (f64, f64, f64) {
    let l1 = dims.l1();
    let alpha = atoms::tau_factor(dims, tau);
    let dalpha = atoms::tau_factor_deriv(dims, tau);
    let beta = atoms::nu_factor(dims, nu);
    let dbeta = atoms::nu_factor_deriv(dims, nu);
    let (mut c, mut ct, mut cn) = (czero(), czero(), czero());
    for (v, (bv, dbv)) in beta.iter().zip(&dbeta).enumerate() {
        let row = &b[v * l1..(v + 1) * l1];
        let (mut s, mut sd) = (czero(), czero());
        for ((x, a), da) in row.iter().zip(&alpha).zip(&dalpha) {
            s += x * a;
            sd += x * da;
        }
        c += s * bv;
        ct += sd * bv;
        cn += s * dbv;
    }
    (c.norm_sqr(), 2.0 * (c.conj() * ct).re, 2.0 * (c.conj() * cn).re)
}

fn refine_expansion_point(dims: &ProblemDims, b: &[Complex64], start: (f64, f64), grid: &RegularGrid) -> (f64, f64) {
    let (mut tau, mut nu) = start;
    let (mut f, mut gt, mut gn) = correlation_grad(dims, b, tau, nu);
    // steps are measured in grid cells
    let mut step = 0.25;
    for _ in 0..50 {
        let gnorm = (gt * grid.dtau).hypot(gn * grid.dnu);
        if gnorm == 0.0 || step < 1e-8 {
            break;
        }
        let (t2, n2) = dims.clamp(
            tau + step * gt * grid.dtau * grid.dtau / gnorm,
            nu + step * gn * grid.dnu * grid.dnu / gnorm,
        );
        let (f2, gt2, gn2) = correlation_grad(dims, b, t2, n2);
        if f2 > f {
            (tau, nu, f, gt, gn) = (t2, n2, f2, gt2, gn2);
            step *= 1.5;
        } else {
            step *= 0.5;
        }
    }
    (tau, nu)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdcgConfig {
    /// Expansion scan resolution `(P, Q)`.
    pub grid: (usize, usize),
    /// Lasso/descent alternations per outer step.
    pub inner_iters: usize,
    pub lambda: f64,
    pub local_descent: bool,
    /// Polish the argmax of the expansion scan by local ascent.
    pub refine_expansion: bool,
    pub descent: DescentConfig,
    pub lasso: LassoOptions,
    pub max_features: usize,
    /// Stop once `||r|| <= residual_tol * ||y||`.
    pub residual_tol: f64,
    /// Stop once the objective drops by less than this fraction in an outer step.
    pub stagnation_tol: f64,
    pub max_outer: usize,
}

impl Default for AdcgConfig {
    fn default() -> Self {
        AdcgConfig {
            grid: (1024, 1024),
            inner_iters: 25,
            lambda: 0.0,
            local_descent: true,
            refine_expansion: false,
            descent: DescentConfig::default(),
            lasso: LassoOptions::default(),
            max_features: 10,
            residual_tol: 1e-6,
            stagnation_tol: 1e-6,
            max_outer: 30,
        }
    }
}

impl AdcgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.inner_iters == 0 {
            return Err(Error::Config("adcg: inner_iters must be at least 1".into()));
        }
        if self.grid.0 == 0 || self.grid.1 == 0 {
            return Err(Error::Config("adcg: expansion grid must be nonempty".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Config("adcg: lambda must be non-negative".into()));
        }
        Ok(())
    }
}

fn prune(eta: &mut Vec<Complex64>, points: &mut Vec<(f64, f64)>) {
    let max = eta.iter().map(|e| e.norm()).fold(0.0, f64::max);
    let keep: Vec<bool> = eta.iter().map(|e| e.norm() > 1e-8 * max).collect();
    let mut k = keep.iter();
    eta.retain(|_| *k.next().unwrap());
    let mut k = keep.iter();
    points.retain(|_| *k.next().unwrap());
}

fn gz(g: &MeasurementOperator, points: &[(f64, f64)]) -> CMatrix {
    let l2 = g.dims().l2();
    let mut m = CMatrix::zeros(l2, points.len());
    for (k, &(tau, nu)) in points.iter().enumerate() {
        m.column_mut(k).copy_from_slice(&atom_image(g, tau, nu));
    }
    m
}

fn build_channel(dims: ProblemDims, points: &[(f64, f64)], eta: &[Complex64]) -> ChannelSpec {
    let features = points
        .iter()
        .zip(eta)
        .map(|(&(tau, nu), &e)| Feature::new(e, tau, nu))
        .collect();
    ChannelSpec::new(dims, features).expect("solver iterates stay in the domain")
}

/// Alternating descent conditional gradient.
///
/// Each outer step adds the grid point of largest unnormalised correlation
/// with the residual, then alternates lasso over the amplitudes with local
/// descent over all locations, and finally drops zero amplitudes.
pub fn adcg(y: &SampleVector, g: &MeasurementOperator, cfg: &AdcgConfig) -> Result<Recovery> {
    cfg.validate()?;
    let dims = *g.dims();
    let yv = y.values();
    let ynorm = y.norm();
    let grid = RegularGrid::covering(&dims, cfg.grid.0, cfg.grid.1);
    let tables = GridTables::new(&dims, &grid);

    let mut points: Vec<(f64, f64)> = Vec::new();
    let mut eta: Vec<Complex64> = Vec::new();
    let mut r = yv.to_vec();
    let mut objective = ynorm * ynorm;
    let mut trace = vec![TraceRow {
        iteration: 0,
        atoms: 0,
        objective,
        residual_norm: ynorm,
    }];
    let mut stop = StopReason::MaxOuter;
    let mut outer = 0;

    while outer < cfg.max_outer {
        if norm(&r) <= cfg.residual_tol * ynorm {
            stop = StopReason::Residual;
            break;
        }
        if points.len() >= cfg.max_features {
            stop = StopReason::MaxFeatures;
            break;
        }
        outer += 1;

        let b = g.adjoint_apply(&r);
        let corr = tables.correlate(&b);
        let Some((i, j)) = atoms::argmax(&corr) else {
            stop = StopReason::Stagnation;
            break;
        };
        let mut p = (grid.tau(i), grid.nu(j));
        if cfg.refine_expansion {
            p = refine_expansion_point(&dims, &b, p, &grid);
        }
        points.push(p);
        eta.push(czero());

        for _ in 0..cfg.inner_iters {
            let a = gz(g, &points);
            eta = sparse::lasso_warm(&a, yv, cfg.lambda, &cfg.lasso, Some(&eta)).eta;
            if cfg.local_descent {
                points = local_descent(&eta, &points, g, yv, &cfg.descent).points;
            }
        }
        let a = gz(g, &points);
        eta = sparse::lasso_warm(&a, yv, cfg.lambda, &cfg.lasso, Some(&eta)).eta;
        prune(&mut eta, &mut points);

        r = sub(yv, &matvec(&gz(g, &points), &eta));
        let rn = norm(&r);
        let new_objective = rn * rn + cfg.lambda * l1_norm(&eta);
        trace.push(TraceRow {
            iteration: outer,
            atoms: points.len(),
            objective: new_objective,
            residual_norm: rn,
        });
        let decrease = objective - new_objective;
        objective = new_objective;
        if decrease < cfg.stagnation_tol * trace[trace.len() - 2].objective {
            stop = StopReason::Stagnation;
            break;
        }
    }

    Ok(Recovery {
        channel: build_channel(dims, &points, &eta),
        residual_norm: norm(&r),
        stop,
        iterations: outer,
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Keep every atom above the threshold and grid around it.
    Dominant,
    /// Replace each local grid by its amplitude-weighted barycenter.
    Barycenter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefinementConfig {
    /// Coarse OMP grid `(P0, Q0)`.
    pub initial_grid: (usize, usize),
    pub initial_atoms: OmpStop,
    /// Side `k` of the local `k x k` grids.
    pub local_grid: usize,
    pub levels: usize,
    pub shrink: f64,
    /// Threshold as a fraction of the largest amplitude.
    pub epsilon: f64,
    pub strategy: Strategy,
    pub lambda: f64,
    pub lasso: LassoOptions,
    /// Keep at most this many centers per level, most important first.
    pub max_centers: Option<usize>,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        RefinementConfig {
            initial_grid: (256, 256),
            initial_atoms: OmpStop::default(),
            local_grid: 5,
            levels: 15,
            shrink: 0.75,
            epsilon: 0.05,
            strategy: Strategy::Barycenter,
            lambda: 500.0,
            // the tolerance bounds how precisely the barycenters settle
            lasso: LassoOptions {
                tol: 1e-6,
                max_iter: 1000,
            },
            max_centers: None,
        }
    }
}

impl RefinementConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::Config(format!("refine: shrink = {} not in (0, 1)", self.shrink)));
        }
        if self.local_grid < 3 || self.local_grid % 2 == 0 {
            return Err(Error::Config(format!(
                "refine: local grid size {} must be odd and at least 3",
                self.local_grid
            )));
        }
        if self.initial_grid.0 == 0 || self.initial_grid.1 == 0 {
            return Err(Error::Config("refine: initial grid must be nonempty".into()));
        }
        if !(self.epsilon >= 0.0) || !(self.lambda >= 0.0) {
            return Err(Error::Config("refine: epsilon and lambda must be non-negative".into()));
        }
        Ok(())
    }
}

/// Union of `k x k` grids with step `step` around each center, restricted to the domain.
pub fn local_grids(dims: &ProblemDims, centers: &[(f64, f64)], k: usize, step: (f64, f64)) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(centers.len() * k * k);
    for &(tau, nu) in centers {
        let grid = RegularGrid::centered(tau, nu, k, step.0, step.1);
        out.extend(grid.points().filter(|&(t, v)| dims.contains(t, v)));
    }
    out
}

/// Local grids with the index of the center each point came from.
fn local_grids_owned(dims: &ProblemDims, centers: &[(f64, f64)], k: usize, step: (f64, f64)) -> (Vec<(f64, f64)>, Vec<usize>) {
    let mut points = Vec::with_capacity(centers.len() * k * k);
    let mut owner = Vec::with_capacity(centers.len() * k * k);
    for (j, &(tau, nu)) in centers.iter().enumerate() {
        let grid = RegularGrid::centered(tau, nu, k, step.0, step.1);
        for (t, v) in grid.points().filter(|&(t, v)| dims.contains(t, v)) {
            points.push((t, v));
            owner.push(j);
        }
    }
    (points, owner)
}

/// One barycenter per local grid, weighted by `|eta|`.
///
/// Grids whose total amplitude is below `epsilon` are dropped. Barycenters
/// closer than `merge` in both coordinates are fused, heaviest first.
fn grid_barycenters(
    points: &[(f64, f64)],
    owner: &[usize],
    eta: &[Complex64],
    epsilon: f64,
    merge: (f64, f64),
) -> Vec<((f64, f64), Complex64)> {
    let n = owner.iter().max().map_or(0, |m| m + 1);
    let mut acc = vec![(0.0, 0.0, 0.0, czero()); n];
    for ((p, &j), e) in points.iter().zip(owner).zip(eta) {
        let w = e.norm();
        acc[j].0 += w;
        acc[j].1 += w * p.0;
        acc[j].2 += w * p.1;
        acc[j].3 += e;
    }
    acc.retain(|a| a.0 > 0.0 && a.0 >= epsilon);
    acc.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut fused: Vec<(f64, f64, f64, Complex64)> = Vec::new();
    for (w, st, sn, m) in acc {
        let c = (st / w, sn / w);
        let hit = fused
            .iter_mut()
            .find(|f| (f.1 / f.0 - c.0).abs() <= merge.0 && (f.2 / f.0 - c.1).abs() <= merge.1);
        match hit {
            Some(f) => {
                f.0 += w;
                f.1 += st;
                f.2 += sn;
                f.3 += m;
            }
            None => fused.push((w, st, sn, m)),
        }
    }
    fused.into_iter().map(|(w, st, sn, m)| ((st / w, sn / w), m)).collect()
}

/// Points whose amplitude reaches `epsilon`, largest amplitude first.
pub fn dominant_centers(points: &[(f64, f64)], eta: &[Complex64], epsilon: f64) -> Vec<(f64, f64)> {
    assert_eq!(points.len(), eta.len(), "dominant_centers: length mismatch");
    let mut keep: Vec<(f64, (f64, f64))> = points
        .iter()
        .zip(eta)
        .filter(|(_, e)| e.norm() >= epsilon && e.norm() > 0.0)
        .map(|(p, e)| (e.norm(), *p))
        .collect();
    keep.sort_by(|a, b| b.0.total_cmp(&a.0));
    keep.into_iter().map(|(_, p)| p).collect()
}

/// Strategy 1: local grids around every dominant atom.
pub fn strategy_dominant(
    dims: &ProblemDims,
    points: &[(f64, f64)],
    eta: &[Complex64],
    epsilon: f64,
    k: usize,
    step: (f64, f64),
) -> Vec<(f64, f64)> {
    local_grids(dims, &dominant_centers(points, eta, epsilon), k, step)
}

/// Multi-level time-frequency refinement.
///
/// OMP on a coarse grid seeds local grids; each level solves the lasso on the
/// current points and rebuilds smaller local grids by the chosen strategy. The
/// last level's centers are fitted by least squares.
pub fn refine(y: &SampleVector, g: &MeasurementOperator, cfg: &RefinementConfig) -> Result<Recovery> {
    cfg.validate()?;
    let dims = *g.dims();
    let yv = y.values();
    let coarse = RegularGrid::covering(&dims, cfg.initial_grid.0, cfg.initial_grid.1);
    let seed = sparse::omp(y, g, &coarse, &cfg.initial_atoms);
    let seed_points: Vec<(f64, f64)> = seed.channel.features().iter().map(|f| (f.tau, f.nu)).collect();
    let mut trace = vec![TraceRow {
        iteration: 0,
        atoms: seed_points.len(),
        objective: seed.residual_norms.last().map_or(0.0, |r| r * r),
        residual_norm: *seed.residual_norms.last().unwrap_or(&0.0),
    }];

    let k = cfg.local_grid;
    // fuse barycenters that sit inside each other's grids
    let half = (k / 2) as f64;
    let mut step = (coarse.dtau, coarse.dnu);
    let (mut points, mut owner) = local_grids_owned(&dims, &seed_points, k, step);
    let mut centers = Vec::new();

    for level in 0..=cfg.levels {
        if points.is_empty() {
            break;
        }
        let set = GridAtomSet::new(g, points);
        let sol = sparse::lasso(set.gz(), yv, cfg.lambda, &cfg.lasso);
        trace.push(TraceRow {
            iteration: level + 1,
            atoms: set.len(),
            objective: sol.objective,
            residual_norm: sol.residual_norm,
        });
        let eps = cfg.epsilon * sol.eta.iter().map(|e| e.norm()).fold(0.0, f64::max);
        let mut groups: Vec<((f64, f64), Complex64)> = match cfg.strategy {
            Strategy::Dominant => set
                .points()
                .iter()
                .zip(&sol.eta)
                .filter(|(_, e)| e.norm() >= eps && e.norm() > 0.0)
                .map(|(p, e)| (*p, *e))
                .collect(),
            Strategy::Barycenter => grid_barycenters(set.points(), &owner, &sol.eta, eps, (half * step.0, half * step.1)),
        };
        if cfg.strategy == Strategy::Dominant {
            groups.sort_by(|a, b| b.1.norm().total_cmp(&a.1.norm()));
        }
        if let Some(cap) = cfg.max_centers {
            groups.truncate(cap);
        }
        step = (step.0 * cfg.shrink, step.1 * cfg.shrink);
        centers = groups.iter().map(|(c, _)| *c).collect();
        (points, owner) = local_grids_owned(&dims, &centers, k, step);
    }

    if centers.is_empty() {
        return Ok(Recovery {
            channel: ChannelSpec::empty(dims),
            residual_norm: y.norm(),
            stop: StopReason::EmptyAtomSet,
            iterations: cfg.levels + 1,
            trace,
        });
    }
    let a = gz(g, &centers);
    let ls = linalg::least_squares(&a, yv);
    Ok(Recovery {
        channel: build_channel(dims, &centers, &ls.x),
        residual_norm: ls.residual_norm,
        stop: StopReason::Completed,
        iterations: cfg.levels + 1,
        trace,
    })
}
