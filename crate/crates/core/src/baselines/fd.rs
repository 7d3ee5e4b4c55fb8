//! Implicit-Euler finite differences for the 1D heat equation with fixed
//! literature parameters.

use ndarray::Array2;

use crate::dataset::{ReefDataset, SstSeries};
use crate::physics::{kappa_at, solar_heating, PhysicalParams};
use crate::time::{Timestamp, DAY};
use crate::{DepthPredictor, Error, Result};

pub const FD_NZ: usize = 100;
pub const FD_DT: f64 = 3600.0;
/// Leading part of every run treated as spin-up, s.
pub const FD_SPINUP: i64 = 14 * DAY;

/// One column problem on a uniform grid: Dirichlet top, mirrored zero-flux
/// bottom, source evaluated explicitly at the start of each step.
pub struct ColumnProblem<'a> {
    pub nz: usize,
    pub z_max: f64,
    pub dt: f64,
    pub t0: f64,
    pub n_steps: usize,
    pub kappa: &'a dyn Fn(f64) -> f64,
    pub top: &'a dyn Fn(f64) -> f64,
    /// Heating rate, °C/s, at `(z, t)`.
    pub source: &'a dyn Fn(f64, f64) -> f64,
    pub initial: Vec<f64>,
}

/// Field of `(n_steps + 1) × nz` temperatures; row 0 is the initial state
/// with its top node replaced by `top(t0)`.
pub fn solve_column(p: &ColumnProblem) -> Array2<f64> {
    let nz = p.nz;
    assert!(nz >= 3, "need at least 3 nodes");
    assert_eq!(p.initial.len(), nz);
    let dz = p.z_max / (nz - 1) as f64;
    let z: Vec<f64> = (0..nz).map(|i| i as f64 * dz).collect();
    let r: Vec<f64> = z.iter().map(|&zi| p.dt * (p.kappa)(zi) / (dz * dz)).collect();

    let mut field = Array2::<f64>::zeros((p.n_steps + 1, nz));
    let mut cur = p.initial.clone();
    cur[0] = (p.top)(p.t0);
    field.row_mut(0).assign(&ndarray::ArrayView1::from(&cur));

    // Unknowns are nodes 1..nz; the top node is known each step.
    let m = nz - 1;
    let mut sub = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut sup = vec![0.0; m];
    for k in 0..m {
        let i = k + 1;
        diag[k] = 1.0 + 2.0 * r[i];
        if i == nz - 1 {
            sub[k] = -2.0 * r[i];
        } else {
            sub[k] = -r[i];
            sup[k] = -r[i];
        }
    }
    let mut rhs = vec![0.0; m];
    let mut c_prime = vec![0.0; m];
    for n in 0..p.n_steps {
        let t_n = p.t0 + n as f64 * p.dt;
        let top_next = (p.top)(t_n + p.dt);
        for k in 0..m {
            let i = k + 1;
            rhs[k] = cur[i] + p.dt * (p.source)(z[i], t_n);
        }
        rhs[0] += r[1] * top_next;
        thomas(&sub, &diag, &sup, &mut rhs, &mut c_prime);
        cur[0] = top_next;
        cur[1..].copy_from_slice(&rhs);
        field.row_mut(n + 1).assign(&ndarray::ArrayView1::from(&cur));
    }
    field
}

/// Solves a tridiagonal system in place; `d` becomes the solution.
fn thomas(a: &[f64], b: &[f64], c: &[f64], d: &mut [f64], cp: &mut [f64]) {
    let n = d.len();
    cp[0] = c[0] / b[0];
    d[0] /= b[0];
    for i in 1..n {
        let den = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / den;
        d[i] = (d[i] - a[i] * d[i - 1]) / den;
    }
    for i in (0..n - 1).rev() {
        d[i] -= cp[i] * d[i + 1];
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdGrid {
    pub z_max: f64,
    pub nz: usize,
    pub t0: f64,
    pub dt: f64,
    /// `n_t × nz`, one row per time step.
    pub field: Array2<f64>,
}

impl FdGrid {
    pub fn n_t(&self) -> usize {
        self.field.nrows()
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + (self.n_t() - 1) as f64 * self.dt
    }

    /// Bilinear interpolation in `(z, t)`.
    pub fn predict(&self, z: f64, t: f64) -> Result<f64> {
        if !(0.0..=self.z_max).contains(&z) || !(t >= self.t0 && t <= self.t_end()) {
            return Err(Error::OutOfDomain(format!("({z}, {t}) outside FD grid")));
        }
        let dz = self.z_max / (self.nz - 1) as f64;
        let (iz, fz) = cell(z / dz, self.nz);
        let (it, ft) = cell((t - self.t0) / self.dt, self.n_t());
        let f = &self.field;
        let lerp = |a: f64, b: f64, w: f64| if w == 0.0 { a } else { a + w * (b - a) };
        let it1 = (it + 1).min(self.n_t() - 1);
        let lo = lerp(f[[it, iz]], f[[it, iz + 1]], fz);
        let hi = lerp(f[[it1, iz]], f[[it1, iz + 1]], fz);
        Ok(lerp(lo, hi, ft))
    }
}

fn cell(x: f64, n: usize) -> (usize, f64) {
    if n < 2 {
        return (0, 0.0);
    }
    let i = (x.floor().max(0.0) as usize).min(n - 2);
    (i, (x - i as f64).clamp(0.0, 1.0))
}

/// FD forward run from `start` to at least `end` on the default grid.
pub fn fd_solve(sst: &SstSeries, p: &PhysicalParams, z_max: f64, start: Timestamp, end: Timestamp) -> Result<FdGrid> {
    fd_solve_with(sst, p, z_max, start, end, FD_NZ, FD_DT)
}

pub fn fd_solve_with(
    sst: &SstSeries,
    p: &PhysicalParams,
    z_max: f64,
    start: Timestamp,
    end: Timestamp,
    nz: usize,
    dt: f64,
) -> Result<FdGrid> {
    if !sst.covers(start, end) {
        return Err(Error::SstCoverage(format!("FD run {start}..{end}")));
    }
    if end <= start {
        return Err(Error::Invalid("FD run end must follow start".into()));
    }
    let n_steps = ((end - start) as f64 / dt).ceil() as usize;
    let t0 = start as f64;
    let last = sst.end() as f64;
    let top = |t: f64| sst.value_at(t.min(last)).expect("covered");
    let kappa = |z: f64| kappa_at(z, p);
    let source = |z: f64, t: f64| solar_heating(z, t, p) / p.rho_cp;
    let problem = ColumnProblem {
        nz,
        z_max,
        dt,
        t0,
        n_steps,
        kappa: &kappa,
        top: &top,
        source: &source,
        initial: vec![top(t0); nz],
    };
    Ok(FdGrid { z_max, nz, t0, dt, field: solve_column(&problem) })
}

/// FD baseline for a dataset: the run starts up to [`FD_SPINUP`] before the
/// window and only times after the spin-up are evaluated.
#[derive(Debug, Clone)]
pub struct FdBaseline {
    pub grid: FdGrid,
    pub eval_from: f64,
}

impl FdBaseline {
    pub fn fit(ds: &ReefDataset) -> Result<Self> {
        Self::fit_with(ds, &PhysicalParams { tz_offset_hours: ds.tz_offset_hours, ..PhysicalParams::literature() })
    }

    pub fn fit_with(ds: &ReefDataset, p: &PhysicalParams) -> Result<Self> {
        let start = ds.sst.start().max(ds.window.start - FD_SPINUP);
        let grid = fd_solve(&ds.sst, p, ds.z_max, start, ds.window.end)?;
        Ok(Self { grid, eval_from: (start + FD_SPINUP) as f64 })
    }

    pub fn is_evaluable(&self, t: f64) -> bool {
        t >= self.eval_from
    }
}

impl DepthPredictor for FdBaseline {
    fn predict_at(&self, z: f64, t: f64) -> Result<f64> {
        self.grid.predict(z, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn thomas_matches_dense_solve() {
        let a = [0.0, -1.0, -0.5, -2.0];
        let b = [4.0, 5.0, 3.0, 6.0];
        let c = [-1.0, -2.0, -1.0, 0.0];
        let x = [1.0, -2.0, 0.5, 3.0];
        let mut d: Vec<f64> = (0..4)
            .map(|i| {
                let mut s = b[i] * x[i];
                if i > 0 {
                    s += a[i] * x[i - 1];
                }
                if i < 3 {
                    s += c[i] * x[i + 1];
                }
                s
            })
            .collect();
        let mut cp = vec![0.0; 4];
        thomas(&a, &b, &c, &mut d, &mut cp);
        assert!(max_abs_diff(&d, &x) < 1e-14);
    }

    #[test]
    fn uniform_state_is_preserved() {
        let p = ColumnProblem {
            nz: 100,
            z_max: 20.0,
            dt: 3600.0,
            t0: 0.0,
            n_steps: 1000,
            kappa: &|z| 2.5e-4 * (0.05 * z).exp(),
            top: &|_| 25.0,
            source: &|_, _| 0.0,
            initial: vec![25.0; 100],
        };
        let f = solve_column(&p);
        assert!(f.iter().all(|v| (v - 25.0).abs() <= 1e-10));
    }

    #[test]
    fn relaxes_to_uniform_with_zero_flux_bottom() {
        let init: Vec<f64> = (0..50).map(|i| 25.0 + 0.1 * i as f64).collect();
        let p = ColumnProblem {
            nz: 50,
            z_max: 20.0,
            dt: 3600.0,
            t0: 0.0,
            n_steps: 5000,
            kappa: &|_| 1e-3,
            top: &|_| 25.0,
            source: &|_, _| 0.0,
            initial: init,
        };
        let f = solve_column(&p);
        let last = f.row(5000);
        assert!((last[49] - last[48]).abs() < 1e-8);
        assert!(last.iter().all(|v| (v - 25.0).abs() < 1e-6));
    }

    /// Spatially uniform `a + sin(ωt)` driven by a matched source; the
    /// explicit source and implicit step give first-order error in time.
    fn time_error(dt: f64) -> f64 {
        let w = 2.0 * PI / 86_400.0;
        let span = 3.0 * 86_400.0;
        let top = move |t: f64| 25.0 + (w * t).sin();
        let src = move |_: f64, t: f64| w * (w * t).cos();
        let n_steps = (span / dt) as usize;
        let p = ColumnProblem {
            nz: 21,
            z_max: 20.0,
            dt,
            t0: 0.0,
            n_steps,
            kappa: &|_| 2.5e-4,
            top: &top,
            source: &src,
            initial: vec![25.0; 21],
        };
        let f = solve_column(&p);
        let mut err: f64 = 0.0;
        for n in 0..=n_steps {
            let exact = top(n as f64 * dt);
            err = f.row(n).iter().map(|v| (v - exact).abs()).fold(err, f64::max);
        }
        err
    }

    #[test]
    fn first_order_in_time() {
        let (e1, e2, e3) = (time_error(1800.0), time_error(900.0), time_error(450.0));
        for r in [e1 / e2, e2 / e3] {
            assert!((1.8..=2.2).contains(&r), "ratio {r} ({e1}, {e2}, {e3})");
        }
    }

    /// Steady `25 + cos(πz/L)` with matched source and variable κ: nodal
    /// error ∝ Δz².
    fn space_error(nz: usize) -> f64 {
        let l = 20.0;
        let k = |z: f64| 1e-3 * (0.03 * z).exp();
        let exact = move |z: f64| 25.0 + (PI * z / l).cos();
        let src = move |z: f64, _: f64| k(z) * (PI / l).powi(2) * (PI * z / l).cos();
        let p = ColumnProblem {
            nz,
            z_max: l,
            dt: 1e9,
            t0: 0.0,
            n_steps: 50,
            kappa: &k,
            top: &|_| 26.0,
            source: &src,
            initial: vec![25.0; nz],
        };
        let f = solve_column(&p);
        let dz = l / (nz - 1) as f64;
        let z: Vec<f64> = (0..nz).map(|i| exact(i as f64 * dz)).collect();
        max_abs_diff(f.row(50).as_slice().unwrap(), &z)
    }

    #[test]
    fn second_order_in_space() {
        let (e1, e2) = (space_error(11), space_error(41));
        let ratio = e1 / e2;
        assert!((13.0..=19.0).contains(&ratio), "ratio {ratio} ({e1}, {e2})");
    }

    fn sst_const(days: i64, v: f64) -> SstSeries {
        SstSeries::new((0..=days).map(|d| d * DAY).collect(), vec![v; days as usize + 1]).unwrap()
    }

    #[test]
    fn night_only_constant_sst_stays_put() {
        let sst = sst_const(3, 25.0);
        let p = PhysicalParams { q_max: 0.0, ..PhysicalParams::literature() };
        let g = fd_solve(&sst, &p, 20.0, 0, 3 * DAY).unwrap();
        assert_eq!(g.n_t(), 73);
        assert!(g.field.iter().all(|v| (v - 25.0).abs() < 1e-12));
    }

    #[test]
    fn grid_lookup() {
        let sst = SstSeries::new(vec![0, DAY, 2 * DAY], vec![25.0, 27.0, 26.0]).unwrap();
        let g = fd_solve(&sst, &PhysicalParams::literature(), 20.0, 0, 2 * DAY).unwrap();
        let dz = 20.0 / 99.0;
        assert_eq!(g.predict(3.0 * dz, 5.0 * 3600.0).unwrap(), g.field[[5, 3]]);
        let mid = g.predict(3.5 * dz, 5.0 * 3600.0).unwrap();
        assert!((mid - 0.5 * (g.field[[5, 3]] + g.field[[5, 4]])).abs() < 1e-12);
        for n in [0, 7, 30, 48] {
            let t = n as f64 * 3600.0;
            assert!((g.predict(0.0, t).unwrap() - sst.value_at(t).unwrap()).abs() < 1e-12);
        }
        assert!(g.predict(20.0, 2.0 * DAY as f64).is_ok());
        assert!(matches!(g.predict(20.1, 0.0), Err(Error::OutOfDomain(_))));
        assert!(matches!(g.predict(1.0, -1.0), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn daytime_heating_warms_the_column() {
        let sst = sst_const(5, 26.0);
        let g = fd_solve(&sst, &PhysicalParams::literature(), 20.0, 0, 5 * DAY).unwrap();
        assert!(g.field.iter().all(|&v| v >= 26.0 - 1e-12));
        let last = g.field.row(g.n_t() - 1);
        assert!(last[10] > 26.0);
    }
}
