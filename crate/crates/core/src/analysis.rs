//! End-to-end verification and DoF estimation.
//!
//! Every trial is independent: it derives its seed as `seed ^ trial`, draws
//! its own channels and plan, and the aggregation folds the per-trial results
//! in trial order so the report never depends on thread scheduling.

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{cutset_dof, format_dof, private_only_dof, table1_row, Table1Row};
use crate::channel::{generate_channels, ChannelSet, NetworkConfig};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, trial_seed, Stream};
use crate::ssa_nc::{design_plan, prepare_scheme, random_symbols, run_transmission, PreparedChannels, SchemePlan};

pub const CSV_COLUMNS: [&str; 13] = [
    "K",
    "M",
    "N",
    "L",
    "d",
    "streams",
    "cutset",
    "private_only",
    "slope",
    "slope_stderr",
    "max_err",
    "trials",
    "degenerate",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DofReport {
    pub k: usize,
    pub m: usize,
    pub n: usize,
    pub l: usize,
    pub d: usize,
    /// Streams per channel use, `K (K − 1) d / L`.
    pub achieved_streams: u64,
    pub cutset: u64,
    /// Private-only comparison value; absent for `K = 2`.
    pub private_only: Option<f64>,
    pub slope_estimate: Option<f64>,
    pub slope_stderr: Option<f64>,
    pub noiseless_max_error: f64,
    pub trials: usize,
    pub degenerate_draws: usize,
}

impl DofReport {
    pub fn csv_header() -> String {
        CSV_COLUMNS.join(",")
    }

    pub fn csv_row(&self) -> String {
        let private_only = private_only_dof(self.k, self.m, self.n).map(format_dof).unwrap_or_default();
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{:.3e},{},{}",
            self.k,
            self.m,
            self.n,
            self.l,
            self.d,
            self.achieved_streams,
            self.cutset,
            private_only,
            opt(self.slope_estimate),
            opt(self.slope_stderr),
            self.noiseless_max_error,
            self.trials,
            self.degenerate_draws
        )
    }

    /// Achieved streams reach the cut-set bound and decoding was exact.
    pub fn verified(&self, tolerance: f64) -> bool {
        self.achieved_streams == self.cutset && self.noiseless_max_error <= tolerance
    }
}

/// Channels and plan for one trial. A fixed channel set, when given, replaces
/// the random draw; beamformers and symbols still vary with the trial seed.
pub fn trial_plan(
    config: &NetworkConfig,
    trial: usize,
    fixed: Option<&ChannelSet>,
) -> Result<(PreparedChannels, SchemePlan)> {
    let seed = trial_seed(config.seed, trial as u64);
    let wrap = |e: Error| Error::Trial { trial, seed, source: Box::new(e) };
    let channels = match fixed {
        Some(ch) => ch.clone(),
        None => generate_channels(config, &mut stream_rng(seed, Stream::Channels)),
    };
    let prepared = prepare_scheme(config, &channels).map_err(wrap)?;
    let plan = design_plan(&prepared, config.power, &mut stream_rng(seed, Stream::Design)).map_err(wrap)?;
    Ok((prepared, plan))
}

fn base_report(config: &NetworkConfig, plan: &SchemePlan, trials: usize) -> DofReport {
    DofReport {
        k: config.k,
        m: config.m,
        n: config.n,
        l: plan.extension,
        d: plan.d,
        achieved_streams: (config.k * (config.k - 1) * plan.d / plan.extension) as u64,
        cutset: cutset_dof(config.k, config.m, config.n),
        private_only: private_only_dof(config.k, config.m, config.n)
            .ok()
            .map(|v| *v.numer() as f64 / *v.denom() as f64),
        slope_estimate: None,
        slope_stderr: None,
        noiseless_max_error: 0.0,
        trials,
        degenerate_draws: 0,
    }
}

/// Runs the full chain with noise off and records the worst relative decoding
/// error over all trials, users and messages.
pub fn verify_noiseless(config: &NetworkConfig, trials: usize, fixed: Option<&ChannelSet>) -> Result<DofReport> {
    if trials == 0 {
        return Err(Error::InvalidConfig("at least one trial is required".into()));
    }
    let outcomes: Vec<Result<(SchemePlan, f64)>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let (prepared, plan) = trial_plan(config, trial, fixed)?;
            let seed = trial_seed(config.seed, trial as u64);
            let symbols = random_symbols(config.k, plan.d, &mut stream_rng(seed, Stream::Symbols));
            let trace =
                run_transmission(&plan, &prepared.channels, &symbols, false, &mut stream_rng(seed, Stream::Noise))?;
            Ok((plan, trace.max_relative_error()))
        })
        .collect();
    let mut report: Option<DofReport> = None;
    for outcome in outcomes {
        let (plan, err) = outcome?;
        let r = report.get_or_insert_with(|| base_report(config, &plan, trials));
        r.noiseless_max_error = r.noiseless_max_error.max(err);
        r.degenerate_draws += plan.degenerate as usize;
    }
    Ok(report.expect("at least one trial"))
}

/// Closed-form per-stream SINRs of the linear chain at the plan's power.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StreamSinrs {
    /// `mac[p][i]`: network-coded sum of pair `p`, entry `i`, after relay zero-forcing.
    pub mac: Vec<Vec<f64>>,
    /// `bc[u][p][i]`: forwarded entry as seen by user `u` after its zero-forcing.
    pub bc: Vec<Vec<Vec<f64>>>,
    /// `end_to_end[j][i]`: common stream `i` of user `j`, minimum over every
    /// phase SINR its decoding depends on.
    pub end_to_end: Vec<Vec<f64>>,
}

fn row_norms_sq(m: &crate::linalg::CMatrix) -> Vec<f64> {
    (0..m.rows()).map(|r| (0..m.cols()).map(|c| m.get(r, c).norm_sqr()).sum()).collect()
}

/// MAC noise on `w_p` is `G⁻¹ Fᴴ z / a` with covariance `G⁻¹G⁻ᴴ / a²`; BC
/// noise on `ŵ_p` at user `u` is `E⁻¹ UZFᴴ z / b`. The network-coded signal
/// `s_0 + s_j` has unit-variance components adding to power 2.
pub fn stream_sinrs(plan: &SchemePlan) -> StreamSinrs {
    let a2 = plan.user_amplitude().powi(2);
    let b2 = plan.relay_amplitude().powi(2);
    let signal = 2.0;
    let mac: Vec<Vec<f64>> =
        plan.g_inv.iter().map(|gi| row_norms_sq(gi).into_iter().map(|v| signal * a2 / v).collect()).collect();
    let bc: Vec<Vec<Vec<f64>>> = plan
        .user_eff_inv
        .iter()
        .map(|row| row.iter().map(|ei| row_norms_sq(ei).into_iter().map(|v| signal * b2 / v).collect()).collect())
        .collect();

    let k = plan.k;
    let end_to_end = (0..k)
        .map(|j| {
            (0..plan.d)
                .map(|i| {
                    let mut worst = f64::INFINITY;
                    if j == 0 {
                        for u in 1..k {
                            worst = worst.min(mac[u - 1][i]).min(bc[u][u - 1][i]);
                        }
                    } else {
                        worst = worst.min(mac[j - 1][i]).min(bc[0][j - 1][i]);
                        for u in (1..k).filter(|&u| u != j) {
                            worst =
                                worst.min(mac[j - 1][i]).min(bc[u][j - 1][i]).min(mac[u - 1][i]).min(bc[u][u - 1][i]);
                        }
                    }
                    worst
                })
                .collect()
        })
        .collect();
    StreamSinrs { mac, bc, end_to_end }
}

/// Sum rate per channel use in bits: every common stream is delivered to
/// `K − 1` users, and an extended block spans `L` channel uses.
pub fn sum_rate(plan: &SchemePlan, duplex_factor: f64) -> f64 {
    let sinrs = stream_sinrs(plan);
    let bits: f64 = sinrs.end_to_end.iter().flatten().map(|s| (1.0 + s).log2()).sum();
    duplex_factor * (plan.k - 1) as f64 * bits / plan.extension as f64
}

fn validate_grid(p_grid: &[f64]) -> Result<()> {
    if p_grid.len() < 3 {
        return Err(Error::InvalidGrid(format!("need at least 3 power points, got {}", p_grid.len())));
    }
    if p_grid.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(Error::InvalidGrid("power points must be positive".into()));
    }
    if p_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("power grid must be strictly increasing".into()));
    }
    if p_grid[p_grid.len() - 1] / p_grid[0] < 1e3 {
        return Err(Error::InvalidGrid("power grid must span at least three decades".into()));
    }
    Ok(())
}

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Number of top grid points used in the slope fit, `⌈2·|grid|/3⌉`.
pub fn fit_points(grid_len: usize) -> usize {
    (2 * grid_len).div_ceil(3)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeEstimate {
    pub slope: f64,
    pub stderr: f64,
    /// Trial-averaged sum rate at each grid point.
    pub mean_rates: Vec<f64>,
}

/// Least-squares slope of sum rate against `log₂ P` over the upper part of the
/// grid, one fit per channel trial; reports the mean and its standard error.
pub fn estimate_dof_slope(
    config: &NetworkConfig,
    p_grid: &[f64],
    trials: usize,
    fixed: Option<&ChannelSet>,
) -> Result<SlopeEstimate> {
    validate_grid(p_grid)?;
    if trials == 0 {
        return Err(Error::InvalidConfig("at least one trial is required".into()));
    }
    let start = p_grid.len() - fit_points(p_grid.len());
    let xs: Vec<f64> = p_grid[start..].iter().map(|p| p.log2()).collect();
    let per_trial: Vec<Result<(f64, Vec<f64>)>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let (_, plan) = trial_plan(config, trial, fixed)?;
            let rates: Vec<f64> = p_grid.iter().map(|&p| sum_rate(&plan.with_power(p), config.duplex_factor)).collect();
            Ok((ols_slope(&xs, &rates[start..]), rates))
        })
        .collect();
    let per_trial = per_trial.into_iter().collect::<Result<Vec<_>>>()?;

    let n = trials as f64;
    let slope = per_trial.iter().map(|(s, _)| s).sum::<f64>() / n;
    let stderr = if trials > 1 {
        let var = per_trial.iter().map(|(s, _)| (s - slope).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    let mean_rates = (0..p_grid.len()).map(|i| per_trial.iter().map(|(_, r)| r[i]).sum::<f64>() / n).collect();
    Ok(SlopeEstimate { slope, stderr, mean_rates })
}

/// Noisy per-symbol MSE at the final decoders, averaged over trials, at each
/// power. A trial reuses its channels, plan, symbols and noise seed across the
/// grid so the curves differ only through the power.
pub fn noisy_mse_curve(
    config: &NetworkConfig,
    p_grid: &[f64],
    trials: usize,
    fixed: Option<&ChannelSet>,
) -> Result<Vec<f64>> {
    if trials == 0 || p_grid.is_empty() {
        return Err(Error::InvalidConfig("need at least one trial and one power point".into()));
    }
    let per_trial: Vec<Result<Vec<f64>>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let (prepared, plan) = trial_plan(config, trial, fixed)?;
            let seed = trial_seed(config.seed, trial as u64);
            let symbols = random_symbols(config.k, plan.d, &mut stream_rng(seed, Stream::Symbols));
            p_grid
                .iter()
                .map(|&p| {
                    let trace = run_transmission(
                        &plan.with_power(p),
                        &prepared.channels,
                        &symbols,
                        true,
                        &mut stream_rng(seed, Stream::Noise),
                    )?;
                    Ok(trace.mean_squared_error())
                })
                .collect()
        })
        .collect();
    let per_trial = per_trial.into_iter().collect::<Result<Vec<_>>>()?;
    Ok((0..p_grid.len()).map(|i| per_trial.iter().map(|row| row[i]).sum::<f64>() / trials as f64).collect())
}

/// Verification plus slope estimation: the report for a noisy simulation run.
pub fn simulate(
    config: &NetworkConfig,
    p_grid: &[f64],
    trials: usize,
    fixed: Option<&ChannelSet>,
) -> Result<DofReport> {
    let mut report = verify_noiseless(config, trials, fixed)?;
    let slope = estimate_dof_slope(config, p_grid, trials, fixed)?;
    report.slope_estimate = Some(slope.slope);
    report.slope_stderr = Some(slope.stderr);
    Ok(report)
}

/// Private-only versus common-plus-private comparison for each relay size.
pub fn reproduce_table1(k: usize, m: usize, n_list: &[usize]) -> Result<Vec<Table1Row>> {
    n_list.iter().map(|&n| table1_row(k, m, n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{classify_regime, common_gain, Dof};
    use crate::linalg::CVector;
    use crate::ssa_nc::{bc_phase, mac_phase, recover_forwarded, relay_process};

    fn cfg(k: usize, m: usize, n: usize) -> NetworkConfig {
        NetworkConfig::new(k, m, n).unwrap()
    }

    #[test]
    fn verify_examples() {
        let r = verify_noiseless(&cfg(3, 3, 2), 100, None).unwrap();
        assert!(r.noiseless_max_error <= 1e-8, "{r:?}");
        assert_eq!(r.achieved_streams, 6);

        let r = verify_noiseless(&cfg(5, 5, 4), 50, None).unwrap();
        assert_eq!((r.achieved_streams, r.cutset), (20, 20));

        let r = verify_noiseless(&cfg(2, 2, 1), 10, None).unwrap();
        assert_eq!(r.achieved_streams, 2);
        assert_eq!(r.private_only, None);
    }

    #[test]
    fn verify_independent_of_noise_and_power() {
        let base = cfg(4, 4, 3);
        let r1 = verify_noiseless(&base, 20, None).unwrap();
        let r2 = verify_noiseless(&base.clone().with_power(1e9).unwrap(), 20, None).unwrap();
        assert!(r1.noiseless_max_error <= 1e-8 && r2.noiseless_max_error <= 1e-8);
        assert_eq!(verify_noiseless(&base, 20, None).unwrap(), r1);
    }

    #[test]
    fn verify_rejects_zero_trials() {
        assert!(verify_noiseless(&cfg(3, 3, 2), 0, None).is_err());
    }

    #[test]
    fn sinr_homogeneity_and_limits() {
        let c = cfg(3, 3, 2);
        let (_, plan) = trial_plan(&c, 0, None).unwrap();
        let lo = stream_sinrs(&plan.with_power(1e3));
        let hi = stream_sinrs(&plan.with_power(1e4));
        for (a, b) in lo.mac.iter().flatten().zip(hi.mac.iter().flatten()) {
            assert!((b / a - 10.0).abs() < 1e-9);
        }
        for (a, b) in lo.bc.iter().flatten().flatten().zip(hi.bc.iter().flatten().flatten()) {
            assert!((b / a - 10.0).abs() < 1e-9);
        }
        let tiny = stream_sinrs(&plan.with_power(1e-12));
        assert!(tiny.end_to_end.iter().flatten().all(|&s| s < 1e-6));
    }

    #[test]
    fn end_to_end_is_min_of_phases() {
        let (_, plan) = trial_plan(&cfg(4, 4, 3), 3, None).unwrap();
        let s = stream_sinrs(&plan);
        for (j, row) in s.end_to_end.iter().enumerate() {
            for (i, &e) in row.iter().enumerate() {
                if j > 0 {
                    assert!(e <= s.mac[j - 1][i]);
                    assert!(e <= s.bc[0][j - 1][i]);
                } else {
                    assert!(e <= s.mac[0][i]);
                }
            }
        }
    }

    /// Brute-force oracle: empirical signal and noise powers over many noise
    /// draws, measured on the simulated chain rather than the filter matrices.
    #[test]
    fn sinr_matches_monte_carlo() {
        let c = cfg(3, 3, 2).with_seed(5);
        let (prepared, plan) = trial_plan(&c, 0, None).unwrap();
        let plan = plan.with_power(100.0);
        let closed = stream_sinrs(&plan);
        let draws = 100_000;
        let mut sym_rng = stream_rng(77, Stream::Symbols);
        let mut noise_rng = stream_rng(77, Stream::Noise);
        let mut mac_signal = [0.0; 2];
        let mut mac_noise = [0.0; 2];
        let mut bc_signal = [[0.0; 2]; 3];
        let mut bc_noise = [[0.0; 2]; 3];
        for _ in 0..draws {
            let s = random_symbols(3, 1, &mut sym_rng);
            let clean: Vec<CVector> = (1..3).map(|j| &s[0] + &s[j]).collect();
            let y_r = mac_phase(&plan, &prepared.channels, &s, true, &mut noise_rng).unwrap();
            let w = relay_process(&plan, &y_r).unwrap();
            for p in 0..2 {
                mac_signal[p] += clean[p][0].norm_sqr();
                mac_noise[p] += (w[p][0] - clean[p][0]).norm_sqr();
            }
            // The relay re-encodes the network-coded sums it decoded.
            let ys = bc_phase(&plan, &prepared.channels, &clean, true, &mut noise_rng).unwrap();
            for u in 0..3 {
                let w_hat = recover_forwarded(&plan, &ys[u], u).unwrap();
                for p in 0..2 {
                    bc_signal[u][p] += clean[p][0].norm_sqr();
                    bc_noise[u][p] += (w_hat[p][0] - clean[p][0]).norm_sqr();
                }
            }
        }
        for p in 0..2 {
            let empirical = mac_signal[p] / mac_noise[p];
            assert!((empirical / closed.mac[p][0] - 1.0).abs() < 0.05, "mac {p}: {empirical} vs {}", closed.mac[p][0]);
            for u in 0..3 {
                let empirical = bc_signal[u][p] / bc_noise[u][p];
                let expected = closed.bc[u][p][0];
                assert!((empirical / expected - 1.0).abs() < 0.05, "bc {u},{p}: {empirical} vs {expected}");
            }
        }
    }

    #[test]
    fn grid_validation() {
        let c = cfg(3, 3, 2);
        assert!(estimate_dof_slope(&c, &[1e2, 1e3], 1, None).is_err());
        assert!(estimate_dof_slope(&c, &[1e2, 1e4, 1e3], 1, None).is_err());
        assert!(estimate_dof_slope(&c, &[1e2, 2e2, 3e2], 1, None).is_err());
        assert!(estimate_dof_slope(&c, &[-1.0, 1e2, 1e4], 1, None).is_err());
        assert_eq!(fit_points(5), 4);
        assert_eq!(fit_points(3), 2);
    }

    #[test]
    fn ols_recovers_a_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        assert!((ols_slope(&xs, &ys) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn half_duplex_halves_slope() {
        let grid = [1e2, 1e3, 1e4, 1e5, 1e6];
        let full = estimate_dof_slope(&cfg(3, 3, 2), &grid, 10, None).unwrap();
        let half = estimate_dof_slope(&cfg(3, 3, 2).with_half_duplex(true), &grid, 10, None).unwrap();
        assert!((half.slope * 2.0 - full.slope).abs() < 1e-9);
    }

    #[test]
    fn slope_examples() {
        let grid = [1e2, 1e3, 1e4, 1e5, 1e6];
        let est = estimate_dof_slope(&cfg(3, 3, 2), &grid, 100, None).unwrap();
        assert!((est.slope / 6.0 - 1.0).abs() < 0.03, "{est:?}");
        assert!(est.slope <= 6.0 * 1.05);
        let est = estimate_dof_slope(&cfg(2, 1, 1), &grid, 100, None).unwrap();
        assert!((est.slope / 2.0 - 1.0).abs() < 0.05, "{est:?}");
    }

    #[test]
    fn mse_decays_like_inverse_power() {
        let grid = [1e2, 1e3, 1e4];
        let mse = noisy_mse_curve(&cfg(3, 3, 2), &grid, 200, None).unwrap();
        let xs: Vec<f64> = grid.iter().map(|p| p.log10()).collect();
        let ys: Vec<f64> = mse.iter().map(|e| e.log10()).collect();
        let slope = ols_slope(&xs, &ys);
        assert!((slope + 1.0).abs() <= 0.1, "{slope} {mse:?}");
        assert!(mse.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn table1_examples() {
        let rows = reproduce_table1(3, 2, &[1, 2, 3, 4]).unwrap();
        let private: Vec<Dof> = rows.iter().map(|r| r.private_only).collect();
        let common: Vec<u64> = rows.iter().map(|r| r.cutset).collect();
        assert_eq!(private, [2, 4, 6, 6].map(Dof::from_integer));
        assert_eq!(common, [3, 6, 6, 6]);

        let row = &reproduce_table1(4, 14, &[24]).unwrap()[0];
        assert_eq!(row.private_only, Dof::from_integer(48));
        // The neighbouring case formula agrees on this boundary.
        let lower = crate::bounds::private_only_per_antenna(2, 4, Dof::new(24, 14)) * 14;
        assert_eq!(lower, Dof::from_integer(48));

        let row = &reproduce_table1(4, 1, &[3]).unwrap()[0];
        assert_eq!((row.case_index, row.private_only, row.cutset), (5, Dof::from_integer(4), 4));
        assert_eq!(classify_regime(4, 1, 3).unwrap().case_index, 5);
        assert_eq!(common_gain(4, 1, 3).unwrap(), Dof::from_integer(0));
    }

    #[test]
    fn csv_row_layout() {
        let r = verify_noiseless(&cfg(3, 4, 3), 5, None).unwrap();
        assert_eq!((r.l, r.d, r.achieved_streams), (2, 3, 9));
        let row = r.csv_row();
        assert_eq!(row.split(',').count(), CSV_COLUMNS.len());
        assert!(row.starts_with("3,4,3,2,3,9,9,"));
        assert_eq!(DofReport::csv_header(), CSV_COLUMNS.join(","));
    }
}
