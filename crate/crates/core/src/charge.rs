//! 2D diffusion of the NV charge differential δn after local ionization.
//!
//! Explicit finite-volume scheme with zero-flux walls. The variance of a
//! Gaussian grows as σ² + 2Dt per axis (standard heat kernel).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::CurveSeries;
use crate::numerics::logspace;
use crate::units::{Length, Time};

/// D·dt/dx² used by every evolution (≤ 0.25 for stability in 2D).
pub const STABILITY_NUMBER: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionParams {
    pub a: Length,
    pub t_hop: Time,
}

impl DiffusionParams {
    pub fn new(a: Length, t_hop: Time) -> Result<Self> {
        if !(a.0 > 0.0) || !(t_hop.0 > 0.0) {
            return Err(Error::domain(format!("hop distance and time must be positive, got {a}, {t_hop}")));
        }
        Ok(DiffusionParams { a, t_hop })
    }

    /// a²/T_hop in nm²/µs.
    pub fn d(&self) -> f64 {
        self.a.0 * self.a.0 / self.t_hop.0
    }
}

/// Square grid of δn, row-major, centred on the middle cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChargeGrid {
    pub n: usize,
    /// Cell size in nm.
    pub pitch: f64,
    pub values: Vec<f64>,
}

impl ChargeGrid {
    pub fn zeros(n: usize, pitch: f64) -> Result<Self> {
        if n < 3 || n.is_multiple_of(2) {
            return Err(Error::domain(format!("grid size must be odd and >= 3, got {n}")));
        }
        if !(pitch > 0.0) {
            return Err(Error::domain(format!("pitch must be positive, got {pitch}")));
        }
        Ok(ChargeGrid {
            n,
            pitch,
            values: vec![0.0; n * n],
        })
    }

    /// Fills each cell with `f(x, y)` at the cell centre (nm, origin at the
    /// middle cell).
    pub fn from_fn(n: usize, pitch: f64, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut g = Self::zeros(n, pitch)?;
        let c = (n / 2) as f64;
        for i in 0..n {
            for j in 0..n {
                g.values[i * n + j] = f((j as f64 - c) * pitch, (i as f64 - c) * pitch);
            }
        }
        if g.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("profile produced non-finite values"));
        }
        Ok(g)
    }

    pub fn extent(&self) -> f64 {
        self.n as f64 * self.pitch
    }

    pub fn center(&self) -> f64 {
        self.values[(self.n / 2) * self.n + self.n / 2]
    }

    /// Σ δn·dx², the total charge.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.pitch * self.pitch
    }

    /// CSV matrix with `#` metadata lines; rows run along y.
    pub fn to_csv_matrix(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# quantity: charge differential (dimensionless)");
        let _ = writeln!(s, "# pitch_nm: {}", self.pitch);
        let _ = writeln!(s, "# extent_nm: {}", self.extent());
        let _ = writeln!(s, "# origin: centre cell; kernel convention: variance sigma^2 + 2Dt per axis");
        for row in self.values.chunks(self.n) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(s, "{}", line.join(","));
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurplusAmplitude {
    Value(f64),
    /// Chosen so the grid integral vanishes.
    Balanced,
}

/// Central depletion plus surrounding surplus, both Gaussian.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileParams {
    pub depletion_amp: f64,
    /// σ in nm.
    pub depletion_width: f64,
    pub surplus_amp: SurplusAmplitude,
    pub surplus_width: f64,
    pub n: usize,
    pub pitch: f64,
}

impl Default for ProfileParams {
    fn default() -> Self {
        ProfileParams {
            depletion_amp: 1.0,
            depletion_width: 800.0,
            surplus_amp: SurplusAmplitude::Balanced,
            surplus_width: 1600.0,
            n: 161,
            pitch: 100.0,
        }
    }
}

/// `s·e^{−r²/2σ_s²} − d·e^{−r²/2σ_d²}` on the grid.
pub fn init_profile(p: &ProfileParams) -> Result<ChargeGrid> {
    if !(p.depletion_width > 0.0) || !(p.surplus_width > 0.0) {
        return Err(Error::domain("profile widths must be positive"));
    }
    let dep = ChargeGrid::from_fn(p.n, p.pitch, |x, y| (-(x * x + y * y) / (2.0 * p.depletion_width.powi(2))).exp())?;
    let sur = ChargeGrid::from_fn(p.n, p.pitch, |x, y| (-(x * x + y * y) / (2.0 * p.surplus_width.powi(2))).exp())?;
    let s_amp = match p.surplus_amp {
        SurplusAmplitude::Value(v) => v,
        SurplusAmplitude::Balanced => p.depletion_amp * dep.values.iter().sum::<f64>() / sur.values.iter().sum::<f64>(),
    };
    let values = dep
        .values
        .iter()
        .zip(&sur.values)
        .map(|(d, s)| s_amp * s - p.depletion_amp * d)
        .collect();
    Ok(ChargeGrid { values, ..dep })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evolution {
    pub grid: ChargeGrid,
    pub steps: usize,
    pub warnings: Vec<String>,
}

fn step(src: &[f64], dst: &mut [f64], n: usize, r: f64) {
    for i in 0..n {
        for j in 0..n {
            let k = i * n + j;
            let u = src[k];
            let mut flux = 0.0;
            if i > 0 {
                flux += src[k - n] - u;
            }
            if i + 1 < n {
                flux += src[k + n] - u;
            }
            if j > 0 {
                flux += src[k - 1] - u;
            }
            if j + 1 < n {
                flux += src[k + 1] - u;
            }
            dst[k] = u + r * flux;
        }
    }
}

/// Advances `grid` by `t` with diffusivity `d` (nm²/µs).
///
/// Uses the largest step with D·dt/dx² ≤ 0.2 that divides `t` evenly.
/// Warns when the grid under-resolves the profile or the walls are reached.
pub fn evolve(grid: &ChargeGrid, d: f64, t: Time) -> Result<Evolution> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::domain(format!("diffusivity must be positive, got {d}")));
    }
    if !(t.0 >= 0.0) {
        return Err(Error::domain(format!("time must be >= 0, got {t}")));
    }
    let dx2 = grid.pitch * grid.pitch;
    let s_total = d * t.0 / dx2;
    let steps = (s_total / STABILITY_NUMBER).ceil() as usize;
    let mut a = grid.values.clone();
    if steps > 0 {
        let r = s_total / steps as f64;
        let mut b = vec![0.0; a.len()];
        for _ in 0..steps {
            step(&a, &mut b, grid.n, r);
            std::mem::swap(&mut a, &mut b);
        }
    }
    let out = ChargeGrid { values: a, ..grid.clone() };
    let mut warnings = Vec::new();
    let err = resolution_error(grid);
    if err > 0.01 {
        warnings.push(format!(
            "grid under-resolves the initial profile; estimated relative Laplacian error {err:.2e}"
        ));
    }
    let peak = out.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let n = grid.n;
    let wall = (0..n)
        .flat_map(|k| [k, (n - 1) * n + k, k * n, k * n + n - 1])
        .map(|k| out.values[k].abs())
        .fold(0.0f64, f64::max);
    if peak > 0.0 && wall > 1e-3 * peak {
        warnings.push(format!("solution reaches the domain walls (edge/peak = {:.2e})", wall / peak));
    }
    Ok(Evolution {
        grid: out,
        steps,
        warnings,
    })
}

// (dx²/12)·max|∇⁴u| / max|∇²u|, the leading truncation error of the
// five-point Laplacian relative to its size
fn resolution_error(g: &ChargeGrid) -> f64 {
    let n = g.n;
    let lap = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n * n];
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                let k = i * n + j;
                out[k] = v[k - n] + v[k + n] + v[k - 1] + v[k + 1] - 4.0 * v[k];
            }
        }
        out
    };
    let l1 = lap(&g.values);
    let l2 = lap(&l1);
    let m1 = l1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let m2 = l2.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m1 > 0.0 {
        m2 / (12.0 * m1)
    } else {
        0.0
    }
}

/// |δn(0,0,t)| / |δn(0,0,0)| at increasing `times` (µs).
pub fn center_recovery(grid0: &ChargeGrid, d: f64, times: &[f64]) -> Result<CurveSeries> {
    let c0 = grid0.center().abs();
    if c0 == 0.0 {
        return Err(Error::domain("initial centre value is zero; recovery is undefined"));
    }
    let mut g = grid0.clone();
    let mut now = 0.0;
    let mut y = Vec::with_capacity(times.len());
    for &t in times {
        if t < now {
            return Err(Error::domain("times must be nondecreasing"));
        }
        g = evolve(&g, d, Time(t - now))?.grid;
        now = t;
        y.push(g.center().abs() / c0);
    }
    Ok(CurveSeries::new(times.to_vec(), y, None, "us", "1")?
        .with_meta("quantity", "normalized centre charge differential")
        .with_meta("diffusivity_nm2_per_us", d))
}

/// Centre value of the profile tabulated against s = D·t (nm²) at the native
/// step of the scheme.
struct CenterTable {
    ds: f64,
    values: Vec<f64>,
}

impl CenterTable {
    fn build(grid: &ChargeGrid, s_max: f64) -> Self {
        let ds = STABILITY_NUMBER * grid.pitch * grid.pitch;
        let steps = (s_max / ds).ceil() as usize + 1;
        let mut a = grid.values.clone();
        let mut b = vec![0.0; a.len()];
        let mut values = Vec::with_capacity(steps + 1);
        values.push(grid.center());
        for _ in 0..steps {
            step(&a, &mut b, grid.n, STABILITY_NUMBER);
            std::mem::swap(&mut a, &mut b);
            values.push(a[(grid.n / 2) * grid.n + grid.n / 2]);
        }
        CenterTable { ds, values }
    }

    fn at(&self, s: f64) -> f64 {
        let x = s / self.ds;
        let k = (x.floor() as usize).min(self.values.len() - 2);
        let f = x - k as f64;
        self.values[k] * (1.0 - f) + self.values[k + 1] * f
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopFit {
    pub t_hop: Time,
    pub std_error: Time,
    /// Weighted residual sum of squares at the optimum.
    pub residual: f64,
    /// (T_hop in ns, residual) for every scanned candidate.
    pub residual_trace: Vec<(f64, f64)>,
    /// False when the residual is flat or the optimum sits on the scan edge.
    pub identifiable: bool,
}

/// Least-squares hop time for a normalized centre-recovery curve (µs).
///
/// Candidates are log-spaced over 1 ns – 1 µs and the best one is refined
/// by golden-section search in ln T_hop.
pub fn fit_hop_time(data: &CurveSeries, a: Length, profile: &ProfileParams) -> Result<HopFit> {
    if data.len() < 8 {
        return Err(Error::domain(format!("hop-time fit needs >= 8 points, got {}", data.len())));
    }
    if data.x_unit != "us" {
        return Err(Error::domain(format!("expected times in us, got '{}'", data.x_unit)));
    }
    if !(a.0 > 0.0) {
        return Err(Error::domain("hop distance must be positive"));
    }
    let (t_lo, t_hi) = (1e-3, 1.0);
    let grid = init_profile(profile)?;
    let c0 = grid.center().abs();
    if c0 == 0.0 {
        return Err(Error::domain("profile has zero centre value"));
    }
    let t_max = data.x.iter().fold(0.0f64, |m, v| m.max(*v));
    let table = CenterTable::build(&grid, a.0 * a.0 / t_lo * t_max);
    let residual = |log_t: f64| -> f64 {
        let d = a.0 * a.0 / log_t.exp();
        (0..data.len())
            .map(|i| {
                let m = table.at(d * data.x[i]).abs() / c0;
                ((data.y[i] - m) / data.weight_sigma(i)).powi(2)
            })
            .sum()
    };
    let cands = logspace(t_lo, t_hi, 31);
    let trace: Vec<(f64, f64)> = cands.iter().map(|t| (t * 1e3, residual(t.ln()))).collect();
    if trace.iter().any(|(_, r)| !r.is_finite()) {
        return Err(Error::NonConvergence(format!("non-finite residual in scan: {trace:?}")));
    }
    let (kbest, _) = trace
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |b, (k, (_, r))| if *r < b.1 { (k, *r) } else { b });
    let lo = cands[kbest.saturating_sub(1)].ln();
    let hi = cands[(kbest + 1).min(cands.len() - 1)].ln();
    let (mut x0, mut x3) = (lo, hi);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = x3 - g * (x3 - x0);
    let mut x2 = x0 + g * (x3 - x0);
    let (mut f1, mut f2) = (residual(x1), residual(x2));
    let mut iters = 0;
    while (x3 - x0).abs() > 1e-10 {
        iters += 1;
        if iters > 200 {
            return Err(Error::NonConvergence(format!(
                "golden-section refinement did not converge; scan: {trace:?}"
            )));
        }
        if f1 < f2 {
            x3 = x2;
            x2 = x1;
            f2 = f1;
            x1 = x3 - g * (x3 - x0);
            f1 = residual(x1);
        } else {
            x0 = x1;
            x1 = x2;
            f1 = f2;
            x2 = x0 + g * (x3 - x0);
            f2 = residual(x2);
        }
    }
    let x_best = 0.5 * (x0 + x3);
    let r_best = residual(x_best).min(trace[kbest].1);
    let x_best = if residual(x_best) <= trace[kbest].1 {
        x_best
    } else {
        cands[kbest].ln()
    };
    // curvature of the residual in ln T_hop gives the 1σ interval
    let h = 1e-3;
    let curv = (residual(x_best + h) - 2.0 * r_best + residual(x_best - h)) / (h * h);
    let dof = data.len().saturating_sub(1).max(1) as f64;
    let scale = if data.sigma.is_none() { r_best / dof } else { 1.0 };
    let sigma_log = if curv > 0.0 { (2.0 * scale / curv).sqrt() } else { f64::INFINITY };
    let t_best = x_best.exp();
    let spread = trace.iter().fold(0.0f64, |m, (_, r)| m.max(*r)) - trace[kbest].1;
    let flat = spread <= 1e-9 * trace[kbest].1.max(f64::MIN_POSITIVE) || spread == 0.0;
    let at_edge = kbest == 0 || kbest == cands.len() - 1;
    Ok(HopFit {
        t_hop: Time(t_best),
        std_error: Time(t_best * sigma_log),
        residual: r_best,
        residual_trace: trace,
        identifiable: !(flat || at_edge || !sigma_log.is_finite()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};
    use rand_distr::{Distribution, Normal};

    const D_REF: f64 = 2500.0;

    #[test]
    fn diffusivity() {
        let p = DiffusionParams::new(Length(5.0), Time::from_ns(10.0)).unwrap();
        assert!((p.d() - D_REF).abs() < 1e-9);
        assert!(DiffusionParams::new(Length(0.0), Time(1.0)).is_err());
    }

    #[test]
    fn balanced_profile() {
        let p = ProfileParams::default();
        let g = init_profile(&p).unwrap();
        let scale = g.values.iter().map(|v| v.abs()).sum::<f64>() * p.pitch * p.pitch;
        assert!(g.integral().abs() < 1e-8 * scale);
        let fixed = init_profile(&ProfileParams {
            surplus_amp: SurplusAmplitude::Value(0.3),
            ..p
        })
        .unwrap();
        assert!((fixed.center() - (0.3 - 1.0)).abs() < 1e-15);
        // dip at the centre, sign change to a positive ring further out
        let row: Vec<f64> = (p.n / 2..p.n).map(|j| g.values[(p.n / 2) * p.n + j]).collect();
        let first_pos = row.iter().position(|v| *v > 0.0).unwrap();
        assert!(row[..first_pos].windows(2).all(|w| w[1] >= w[0]));
        assert!(first_pos > 0);
    }

    #[test]
    fn uniform_grid_is_stationary() {
        let g = ChargeGrid::from_fn(21, 10.0, |_, _| 0.7).unwrap();
        let e = evolve(&g, 50.0, Time(100.0)).unwrap();
        assert!(e.grid.values.iter().all(|v| (v - 0.7).abs() < 1e-14));
    }

    #[test]
    fn heat_kernel() {
        for (d, t) in [(2500.0, 20.0), (2500.0, 100.0), (1000.0, 150.0)] {
            let s0: f64 = 800.0;
            let g = ChargeGrid::from_fn(201, 50.0, |x, y| (-(x * x + y * y) / (2.0 * s0 * s0)).exp()).unwrap();
            let out = evolve(&g, d, Time(t)).unwrap().grid;
            let v = s0 * s0 + 2.0 * d * t;
            let exact = ChargeGrid::from_fn(201, 50.0, |x, y| s0 * s0 / v * (-(x * x + y * y) / (2.0 * v)).exp()).unwrap();
            let num: f64 = out.values.iter().zip(&exact.values).map(|(a, b)| (a - b).powi(2)).sum();
            let den: f64 = exact.values.iter().map(|b| b * b).sum();
            assert!((num / den).sqrt() < 0.01, "D={d} t={t}: {}", (num / den).sqrt());
        }
    }

    #[test]
    fn conserves_charge_over_many_steps() {
        let g = init_profile(&ProfileParams {
            surplus_amp: SurplusAmplitude::Value(0.5),
            n: 61,
            pitch: 100.0,
            ..Default::default()
        })
        .unwrap();
        let e = evolve(&g, D_REF, Time(0.8 * 10_000.0)).unwrap();
        assert!(e.steps >= 10_000);
        assert!((e.grid.integral() - g.integral()).abs() < 1e-3 * g.integral().abs());
    }

    #[test]
    fn linear() {
        let g1 = ChargeGrid::from_fn(31, 20.0, |x, y| (-(x * x + 2.0 * y * y) / 2e4).exp()).unwrap();
        let g2 = ChargeGrid::from_fn(31, 20.0, |x, _| (x / 300.0).sin()).unwrap();
        let (a, b) = (1.7, -0.4);
        let mix = ChargeGrid {
            values: g1.values.iter().zip(&g2.values).map(|(u, v)| a * u + b * v).collect(),
            ..g1.clone()
        };
        let t = Time(3.0);
        let e1 = evolve(&g1, 100.0, t).unwrap().grid;
        let e2 = evolve(&g2, 100.0, t).unwrap().grid;
        let em = evolve(&mix, 100.0, t).unwrap().grid;
        for k in 0..em.values.len() {
            assert!((em.values[k] - (a * e1.values[k] + b * e2.values[k])).abs() < 1e-8);
        }
    }

    #[test]
    fn coarse_grid_warns() {
        let g = ChargeGrid::from_fn(21, 100.0, |x, y| (-(x * x + y * y) / (2.0 * 60.0f64.powi(2))).exp()).unwrap();
        let e = evolve(&g, D_REF, Time(1.0)).unwrap();
        assert!(!e.warnings.is_empty());
    }

    #[test]
    fn recovery_is_monotone_and_hits_expected_scale() {
        let g = init_profile(&ProfileParams::default()).unwrap();
        let times: Vec<f64> = (0..=60).map(|k| 5.0 * k as f64).collect();
        let c = center_recovery(&g, D_REF, &times).unwrap();
        assert_eq!(c.y[0], 1.0);
        assert!(c.y.windows(2).all(|w| w[1] <= w[0]));
        let k = c.y.iter().position(|v| *v <= 0.5).unwrap();
        assert!((30.0..=300.0).contains(&c.x[k]), "half recovery at {}", c.x[k]);
    }

    #[test]
    fn grid_refinement() {
        let times = [0.0, 20.0, 60.0, 150.0, 300.0];
        let coarse = center_recovery(&init_profile(&ProfileParams::default()).unwrap(), D_REF, &times).unwrap();
        let fine = center_recovery(
            &init_profile(&ProfileParams {
                n: 321,
                pitch: 50.0,
                ..Default::default()
            })
            .unwrap(),
            D_REF,
            &times,
        )
        .unwrap();
        for (a, b) in coarse.y.iter().zip(&fine.y) {
            assert!((a - b).abs() < 0.005 * b.abs().max(1e-12), "{a} vs {b}");
        }
    }

    fn synthetic(t_hop_ns: f64, noise: f64) -> CurveSeries {
        let g = init_profile(&ProfileParams::default()).unwrap();
        let times: Vec<f64> = logspace(2.0, 600.0, 20);
        let mut c = center_recovery(&g, 25.0 / (t_hop_ns * 1e-3), &times).unwrap();
        let mut rng = stream(3, Domain::Synthetic, 7);
        let n = Normal::new(0.0, noise).unwrap();
        for y in c.y.iter_mut() {
            *y *= 1.0 + n.sample(&mut rng);
        }
        c.sigma = Some(c.y.iter().map(|y| (noise * y).max(1e-6)).collect());
        c
    }

    #[test]
    fn hop_time_round_trip() {
        let data = synthetic(10.0, 0.02);
        let fit = fit_hop_time(&data, Length(5.0), &ProfileParams::default()).unwrap();
        assert!((fit.t_hop.0 * 1e3 / 10.0 - 1.0).abs() < 0.2, "{:?}", fit.t_hop);
        assert!(fit.identifiable);
        // a 100 ns curve is clearly worse explained by 10 ns
        let slow = synthetic(100.0, 0.02);
        let at = |d: &CurveSeries, ns: f64| {
            let f = fit_hop_time(d, Length(5.0), &ProfileParams::default()).unwrap();
            f.residual_trace
                .iter()
                .min_by(|a, b| (a.0 - ns).abs().total_cmp(&(b.0 - ns).abs()))
                .unwrap()
                .1
        };
        assert!(at(&slow, 10.0) > 5.0 * at(&slow, 100.0));
    }

    #[test]
    fn flat_data_not_identifiable() {
        let times: Vec<f64> = logspace(2.0, 600.0, 12);
        let flat = CurveSeries::new(times.clone(), vec![1.0; times.len()], None, "us", "1").unwrap();
        let fit = fit_hop_time(&flat, Length(5.0), &ProfileParams::default()).unwrap();
        assert!(!fit.identifiable);
        let short = CurveSeries::new(times[..5].to_vec(), vec![1.0; 5], None, "us", "1").unwrap();
        assert!(fit_hop_time(&short, Length(5.0), &ProfileParams::default()).is_err());
    }
}
