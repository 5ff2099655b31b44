use rand::Rng;
use rayon::prelude::*;

use super::{effective_rate_unchecked, gaussian, sample_bath_with, BathParams};
use crate::error::{Error, Result};
use crate::fit::CurveSeries;
use crate::rng::{self, Domain};
use crate::units::AngularFrequency;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsembleOptions {
    pub n_configs: usize,
    pub bootstrap_resamples: usize,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        EnsembleOptions {
            n_configs: 10_000,
            bootstrap_resamples: 200,
        }
    }
}

/// γ_eff (1/µs) for `n` independent probe spins, each with a fresh bath and
/// a fresh probe detuning. Configuration `i` uses stream `i`, so the output
/// is identical for any thread count.
pub fn sample_effective_rates(params: &BathParams, delta: AngularFrequency, n: usize, seed: u64) -> Result<Vec<f64>> {
    params.validate()?;
    let sigma = params.disorder.particle_sigma(params.w);
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, Domain::BathConfig, i as u64);
            let ds = gaussian(&mut rng, sigma);
            let bath = sample_bath_with(params, &mut rng);
            effective_rate_unchecked(&bath, params.probe_group, ds, delta.0, params.gamma_f.0)
        })
        .collect())
}

/// Ensemble polarization `P(t) = ⟨e^{−γ_eff t}⟩` with bootstrap errors.
///
/// σ is floored at `1/n_configs`, the resolution of a configuration count,
/// so that points with no spread (t = 0) still carry a finite weight.
pub fn ensemble_polarization(
    params: &BathParams,
    delta: AngularFrequency,
    times: &[f64],
    opts: EnsembleOptions,
    seed: u64,
) -> Result<CurveSeries> {
    if opts.n_configs < 1000 {
        return Err(Error::domain(format!(
            "ensemble needs >= 1000 configurations, got {}",
            opts.n_configs
        )));
    }
    if times.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::domain("times must be >= 0"));
    }
    let rates = sample_effective_rates(params, delta, opts.n_configs, seed)?;
    let n = rates.len();
    let k = times.len();
    let decay: Vec<Vec<f64>> = rates.iter().map(|g| times.iter().map(|t| (-g * t).exp()).collect()).collect();
    let mean_over = |idx: &mut dyn Iterator<Item = usize>| {
        let mut acc = vec![0.0; k];
        for i in idx {
            for (a, v) in acc.iter_mut().zip(&decay[i]) {
                *a += v;
            }
        }
        acc.iter_mut().for_each(|a| *a /= n as f64);
        acc
    };
    let p = mean_over(&mut (0..n));
    let boots: Vec<Vec<f64>> = (0..opts.bootstrap_resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng::stream(seed, Domain::Bootstrap, b as u64);
            mean_over(&mut (0..n).map(|_| rng.random_range(0..n)))
        })
        .collect();
    let sigma: Vec<f64> = (0..k)
        .map(|j| {
            let b = boots.len() as f64;
            let sd = if boots.len() > 1 {
                let m = boots.iter().map(|v| v[j]).sum::<f64>() / b;
                (boots.iter().map(|v| (v[j] - m).powi(2)).sum::<f64>() / (b - 1.0)).sqrt()
            } else {
                0.0
            };
            sd.max(1.0 / n as f64)
        })
        .collect();
    Ok(CurveSeries::new(times.to_vec(), p, Some(sigma), "us", "1")?
        .with_meta("quantity", "ensemble polarization")
        .with_meta("n_configs", n)
        .with_meta("bootstrap_resamples", opts.bootstrap_resamples)
        .with_meta("delta_rad_per_us", delta.0)
        .with_meta("r_outer_nm", params.r_outer.0)
        .with_meta("disorder", params.disorder.label()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::Length;

    fn params() -> BathParams {
        BathParams {
            r_outer: Length(15.0),
            ..BathParams::reference_fit()
        }
    }

    #[test]
    fn starts_at_one_and_is_monotone() {
        let times = [0.0, 1.0, 5.0, 20.0, 100.0, 500.0];
        let c = ensemble_polarization(
            &params(),
            AngularFrequency(0.0),
            &times,
            EnsembleOptions {
                n_configs: 1000,
                bootstrap_resamples: 20,
            },
            4,
        )
        .unwrap();
        assert_eq!(c.y[0], 1.0);
        assert!(c.y.windows(2).all(|w| w[1] <= w[0]));
        assert!(c.y.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn thread_count_independent() {
        let p = params();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| sample_effective_rates(&p, AngularFrequency(10.0), 300, 9).unwrap());
        let b = four.install(|| sample_effective_rates(&p, AngularFrequency(10.0), 300, 9).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_configs_rejected() {
        assert!(ensemble_polarization(
            &params(),
            AngularFrequency(0.0),
            &[0.0],
            EnsembleOptions {
                n_configs: 10,
                bootstrap_resamples: 2
            },
            1
        )
        .is_err());
    }
}
