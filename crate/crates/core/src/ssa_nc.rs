//! Signal space alignment for network coding over the multi-way relay.
//!
//! Only common messages are used. Pairs are indexed by the partner of user 1:
//! pair `p` (0-based) couples user 0 with user `p + 1`.
//!
//! MAC phase: user 0 sends its common vector `s_0` along `K − 1` random
//! beams `V1[p]`; user `p + 1` sends `s_{p+1}` along `Vj[p] = H_{p+1}^† H_0 V1[p]`,
//! so both land in the same relay subspace `H_0 V1[p]`. The relay projects onto
//! `F[p]`, orthogonal to every other pair's subspace, and inverts
//! `G[p] = F[p]ᴴ H_0 V1[p]` to obtain `w_p = s_0 + s_{p+1}`.
//!
//! BC phase: the relay sends `Σ_p T[p] w_p`. Each user zero-forces the other
//! pairs with `UZF[u][p]`, recovers every `w_p`, and strips the side
//! information it already knows.
//!
//! Relay antennas beyond `M` are switched off, and when `K − 1` does not
//! divide the remaining relay dimension the channel is extended over `K − 1`
//! slots.

use rand::Rng;
use serde::Serialize;

use crate::bounds::DofAllocation;
use crate::channel::{extend_channels, ChannelSet, NetworkConfig};
use crate::error::{Error, Result};
use crate::linalg::{
    column_space_basis, null_space_basis, numeric_rank, orthonormalize_columns, pseudo_inverse, random_gaussian_matrix,
    random_gaussian_vector, CMatrix, CVector, C64, DEFAULT_TOL,
};

/// Plans whose relay or user effective matrices exceed this condition number
/// are redrawn once, then flagged as degenerate.
pub const MAX_CONDITION: f64 = 1e8;

#[derive(Debug, Clone)]
pub struct PreparedChannels {
    pub channels: ChannelSet,
    /// Streams per pair per extended block.
    pub d: usize,
}

/// Relay antenna shutdown (`N > M`) followed by a `(K − 1)`-slot extension
/// when `K − 1` does not divide the relay dimension.
pub fn prepare_scheme(config: &NetworkConfig, channels: &ChannelSet) -> Result<PreparedChannels> {
    config.validate()?;
    if channels.k() != config.k || channels.m() != config.m || channels.n() != config.n {
        return Err(Error::DimensionMismatch(format!(
            "channels are for (K={}, M={}, N={}), config is (K={}, M={}, N={})",
            channels.k(),
            channels.m(),
            channels.n(),
            config.k,
            config.m,
            config.n
        )));
    }
    let mut effective =
        if channels.n() > channels.m() { channels.shutdown_relay_antennas(channels.m())? } else { channels.clone() };
    let pairs = config.k - 1;
    if effective.relay_dim() % pairs != 0 {
        effective = extend_channels(&effective, pairs)?;
    }
    let d = effective.relay_dim() / pairs;
    debug_assert_eq!((effective.extension_factor(), d), scheme_dimensions(config.k, config.m, config.n));
    Ok(PreparedChannels { channels: effective, d })
}

/// Extension factor `L` and streams per pair `d` that [`prepare_scheme`]
/// arrives at, computed without channels.
pub fn scheme_dimensions(k: usize, m: usize, n: usize) -> (usize, usize) {
    let active = n.min(m);
    let pairs = k - 1;
    let l = if active.is_multiple_of(pairs) { 1 } else { pairs };
    (l, active * l / pairs)
}

#[derive(Debug, Clone, Serialize)]
pub struct SchemePlan {
    pub k: usize,
    pub d: usize,
    pub effective_n: usize,
    pub effective_m: usize,
    pub extension: usize,
    /// User 0's beamformer towards each pair.
    pub v1: Vec<CMatrix>,
    /// Beamformer of user `p + 1`.
    pub vj: Vec<CMatrix>,
    pub f: Vec<CMatrix>,
    pub g: Vec<CMatrix>,
    pub g_inv: Vec<CMatrix>,
    pub t: Vec<CMatrix>,
    /// `uzf[u][p]`: receive filter of user `u` for pair `p`.
    pub uzf: Vec<Vec<CMatrix>>,
    /// `(UZF[u][p]ᴴ H_Ru T[p])⁻¹`, without the relay amplitude.
    pub user_eff_inv: Vec<Vec<CMatrix>>,
    /// User amplitude at unit power; the amplitude at power `P` is `√P` times this.
    pub power_scale: f64,
    /// Relay amplitude at unit power.
    pub relay_scale: f64,
    /// Power the plan is operating at.
    pub power: f64,
    pub max_condition: f64,
    pub degenerate: bool,
}

impl SchemePlan {
    pub fn pairs(&self) -> usize {
        self.k - 1
    }

    pub fn user_amplitude(&self) -> f64 {
        self.power_scale * self.power.sqrt()
    }

    pub fn relay_amplitude(&self) -> f64 {
        self.relay_scale * self.power.sqrt()
    }

    pub fn with_power(&self, power: f64) -> Self {
        Self { power, ..self.clone() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}

/// Random beams for user 0 (jointly orthonormal) and the aligned beams of
/// its partners.
pub fn design_uplink<R: Rng + ?Sized>(
    channels: &ChannelSet,
    d: usize,
    rng: &mut R,
) -> Result<(Vec<CMatrix>, Vec<CMatrix>)> {
    let (n, m, pairs) = (channels.relay_dim(), channels.user_dim(), channels.k() - 1);
    if pairs * d != n {
        return Err(Error::Design(format!("(K-1)·d = {} but relay dimension is {n}", pairs * d)));
    }
    if n > m {
        return Err(Error::Design(format!("relay dimension {n} exceeds user dimension {m}")));
    }
    // Alignment needs H_j H_j† = I for every partner.
    if let Some(j) = (1..channels.k()).find(|&j| numeric_rank(channels.uplink(j), DEFAULT_TOL) < n) {
        return Err(Error::Design(format!("uplink of user {j} is rank deficient, partner beams cannot align")));
    }
    let h0 = channels.uplink(0);
    for attempt in 0..2 {
        let v = orthonormalize_columns(&random_gaussian_matrix(m, n, rng));
        if numeric_rank(&(h0 * &v), DEFAULT_TOL) != n {
            log::debug!("aligned subspaces not independent on attempt {attempt}, redrawing");
            continue;
        }
        let v1: Vec<CMatrix> = (0..pairs).map(|p| v.columns(p * d, d)).collect();
        let vj = v1.iter().enumerate().map(|(p, v1p)| &pseudo_inverse(channels.uplink(p + 1)) * &(h0 * v1p)).collect();
        return Ok((v1, vj));
    }
    Err(Error::Design("aligned relay subspaces are linearly dependent".into()))
}

/// Relay projection filters and the resulting `d × d` mixing matrices.
pub fn design_relay_zf(channels: &ChannelSet, v1: &[CMatrix]) -> Result<(Vec<CMatrix>, Vec<CMatrix>)> {
    let n = channels.relay_dim();
    let aligned: Vec<CMatrix> = v1.iter().map(|v| channels.uplink(0) * v).collect();
    let mut fs = Vec::with_capacity(aligned.len());
    let mut gs = Vec::with_capacity(aligned.len());
    for (p, target) in aligned.iter().enumerate() {
        let d = target.cols();
        let f = if aligned.len() == 1 {
            CMatrix::identity(n)
        } else {
            let others: Vec<CMatrix> =
                aligned.iter().enumerate().filter(|&(i, _)| i != p).map(|(_, a)| a.clone()).collect();
            null_space_basis(&CMatrix::hcat(&others)?.adjoint(), DEFAULT_TOL)
        };
        if f.cols() != d {
            return Err(Error::Design(format!("pair {}: relay filter has {} columns, expected {d}", p + 2, f.cols())));
        }
        let g = &f.adjoint() * target;
        if numeric_rank(&g, DEFAULT_TOL) != d {
            return Err(Error::Singular(format!("relay mixing matrix of pair (1, {}) is singular", p + 2)));
        }
        fs.push(f);
        gs.push(g);
    }
    Ok((fs, gs))
}

pub struct DownlinkDesign {
    pub t: Vec<CMatrix>,
    pub uzf: Vec<Vec<CMatrix>>,
    pub eff: Vec<Vec<CMatrix>>,
}

/// Random orthonormal broadcast precoders and the per-user zero-forcing
/// filters. Each filter spans the projection of the wanted pair's signal onto
/// the null space of the other pairs' signals.
pub fn design_downlink<R: Rng + ?Sized>(channels: &ChannelSet, d: usize, rng: &mut R) -> Result<DownlinkDesign> {
    let (n, m, k) = (channels.relay_dim(), channels.user_dim(), channels.k());
    let pairs = k - 1;
    if m < n {
        return Err(Error::InvalidConfig(format!(
            "user dimension {m} below relay dimension {n}: nullity {} < d = {d}",
            m as i64 - (pairs as i64 - 1) * d as i64
        )));
    }
    let t_all = orthonormalize_columns(&random_gaussian_matrix(n, n, rng));
    let t: Vec<CMatrix> = (0..pairs).map(|p| t_all.columns(p * d, d)).collect();

    let mut uzf = Vec::with_capacity(k);
    let mut eff = Vec::with_capacity(k);
    for u in 0..k {
        let received: Vec<CMatrix> = t.iter().map(|tp| channels.downlink(u) * tp).collect();
        let mut user_filters = Vec::with_capacity(pairs);
        let mut user_eff = Vec::with_capacity(pairs);
        for (p, wanted) in received.iter().enumerate() {
            let null = if pairs == 1 {
                CMatrix::identity(m)
            } else {
                let others: Vec<CMatrix> =
                    received.iter().enumerate().filter(|&(i, _)| i != p).map(|(_, b)| b.clone()).collect();
                null_space_basis(&CMatrix::hcat(&others)?.adjoint(), DEFAULT_TOL)
            };
            if null.cols() < d {
                return Err(Error::InvalidConfig(format!(
                    "user {} pair {}: nullity {} < d = {d}",
                    u + 1,
                    p + 2,
                    null.cols()
                )));
            }
            let projected = &null * &(&null.adjoint() * wanted);
            let filter = column_space_basis(&projected, DEFAULT_TOL);
            if filter.cols() != d {
                return Err(Error::Singular(format!(
                    "user {} cannot separate pair (1, {}) from the other pairs",
                    u + 1,
                    p + 2
                )));
            }
            user_eff.push(&filter.adjoint() * wanted);
            user_filters.push(filter);
        }
        uzf.push(user_filters);
        eff.push(user_eff);
    }
    Ok(DownlinkDesign { t, uzf, eff })
}

fn assemble_plan<R: Rng + ?Sized>(channels: &ChannelSet, d: usize, power: f64, rng: &mut R) -> Result<SchemePlan> {
    let (v1, vj) = design_uplink(channels, d, rng)?;
    let (f, g) = design_relay_zf(channels, &v1)?;
    let down = design_downlink(channels, d, rng)?;

    let g_inv = g.iter().map(CMatrix::inverse).collect::<Result<Vec<_>>>()?;
    let user_eff_inv = down
        .eff
        .iter()
        .map(|row| row.iter().map(CMatrix::inverse).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let max_condition = g.iter().chain(down.eff.iter().flatten()).map(CMatrix::condition_number).fold(0.0, f64::max);

    // Equal per-stream power with one amplitude for all users, sized so the
    // most demanding user meets the budget.
    let combined = v1.iter().skip(1).fold(v1[0].clone(), |acc, v| &acc + v);
    let user0 = combined.frobenius_norm().powi(2);
    let worst = vj.iter().map(|v| v.frobenius_norm().powi(2)).fold(user0, f64::max);
    let power_scale = 1.0 / worst.sqrt();
    // Each network-coded entry s_0 + s_j carries power 2; T is unitary.
    let relay_scale = 1.0 / (2.0 * channels.relay_dim() as f64).sqrt();

    Ok(SchemePlan {
        k: channels.k(),
        d,
        effective_n: channels.relay_dim(),
        effective_m: channels.user_dim(),
        extension: channels.extension_factor(),
        v1,
        vj,
        f,
        g,
        g_inv,
        t: down.t,
        uzf: down.uzf,
        user_eff_inv,
        power_scale,
        relay_scale,
        power,
        max_condition,
        degenerate: false,
    })
}

/// Designs a full plan on prepared channels, applying the condition-number
/// guardrail: one redraw, then the plan is kept but marked degenerate.
pub fn design_plan<R: Rng + ?Sized>(prepared: &PreparedChannels, power: f64, rng: &mut R) -> Result<SchemePlan> {
    let first = assemble_plan(&prepared.channels, prepared.d, power, rng);
    match first {
        Ok(plan) if plan.max_condition <= MAX_CONDITION => return Ok(plan),
        Ok(plan) => log::debug!("plan condition {:.3e} above guardrail, redrawing", plan.max_condition),
        Err(e) => log::debug!("plan design failed ({e}), redrawing"),
    }
    let mut plan = assemble_plan(&prepared.channels, prepared.d, power, rng)?;
    if plan.max_condition > MAX_CONDITION {
        log::info!("degenerate draw: condition number {:.3e}", plan.max_condition);
        plan.degenerate = true;
    }
    Ok(plan)
}

/// Worst-case invariant residuals of a plan.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PlanDiagnostics {
    /// `max_p dist(H_0 V1[p], H_{p+1} Vj[p])`.
    pub alignment: f64,
    /// `max_{i≠p} ‖F[p]ᴴ H_0 V1[i]‖₂`.
    pub relay_leakage: f64,
    /// `max_{u, i≠p} ‖UZF[u][p]ᴴ H_Ru T[i]‖₂`.
    pub user_leakage: f64,
}

pub fn diagnose(plan: &SchemePlan, channels: &ChannelSet) -> Result<PlanDiagnostics> {
    let h0 = channels.uplink(0);
    let mut alignment: f64 = 0.0;
    let mut relay_leakage: f64 = 0.0;
    let mut user_leakage: f64 = 0.0;
    for p in 0..plan.pairs() {
        let a = h0 * &plan.v1[p];
        let b = channels.uplink(p + 1) * &plan.vj[p];
        alignment = alignment.max(crate::linalg::subspace_distance(&a, &b)?);
        for i in (0..plan.pairs()).filter(|&i| i != p) {
            relay_leakage = relay_leakage.max((&plan.f[p].adjoint() * &(h0 * &plan.v1[i])).spectral_norm());
        }
    }
    for u in 0..plan.k {
        for p in 0..plan.pairs() {
            for i in (0..plan.pairs()).filter(|&i| i != p) {
                let leak = &plan.uzf[u][p].adjoint() * &(channels.downlink(u) * &plan.t[i]);
                user_leakage = user_leakage.max(leak.spectral_norm());
            }
        }
    }
    Ok(PlanDiagnostics { alignment, relay_leakage, user_leakage })
}

/// One common-message vector per user, entries CN(0, 1).
pub fn random_symbols<R: Rng + ?Sized>(k: usize, d: usize, rng: &mut R) -> Vec<CVector> {
    (0..k).map(|_| random_gaussian_vector(d, rng)).collect()
}

fn check_symbols(plan: &SchemePlan, symbols: &[CVector]) -> Result<()> {
    if symbols.len() != plan.k || symbols.iter().any(|s| s.len() != plan.d) {
        return Err(Error::DimensionMismatch(format!("expected {} symbol vectors of length {}", plan.k, plan.d)));
    }
    Ok(())
}

fn add_noise<R: Rng + ?Sized>(v: CVector, noise_on: bool, rng: &mut R) -> CVector {
    if noise_on {
        let len = v.len();
        v + random_gaussian_vector(len, rng)
    } else {
        v
    }
}

/// Transmit vectors `x_j` of every user at the plan's power.
pub fn transmit_vectors(plan: &SchemePlan, symbols: &[CVector]) -> Result<Vec<CVector>> {
    check_symbols(plan, symbols)?;
    let a = plan.user_amplitude();
    let mut xs = Vec::with_capacity(plan.k);
    let x0 = plan.v1.iter().fold(CVector::zeros(plan.effective_m), |acc, v| acc + v.apply(&symbols[0]));
    xs.push(x0 * C64::new(a, 0.0));
    for (p, v) in plan.vj.iter().enumerate() {
        xs.push(v.apply(&symbols[p + 1]) * C64::new(a, 0.0));
    }
    Ok(xs)
}

/// `y_r = Σ_j H_jR x_j + z_r`.
pub fn mac_phase<R: Rng + ?Sized>(
    plan: &SchemePlan,
    channels: &ChannelSet,
    symbols: &[CVector],
    noise_on: bool,
    rng: &mut R,
) -> Result<CVector> {
    let xs = transmit_vectors(plan, symbols)?;
    let y =
        xs.iter().enumerate().fold(CVector::zeros(plan.effective_n), |acc, (j, x)| acc + channels.uplink(j).apply(x));
    Ok(add_noise(y, noise_on, rng))
}

/// Network-coded estimates `w_p = G[p]⁻¹ F[p]ᴴ y_r / a ≈ s_0 + s_{p+1}`.
pub fn relay_process(plan: &SchemePlan, y_r: &CVector) -> Result<Vec<CVector>> {
    if y_r.len() != plan.effective_n {
        return Err(Error::DimensionMismatch(format!(
            "relay observation has length {}, expected {}",
            y_r.len(),
            plan.effective_n
        )));
    }
    let a = plan.user_amplitude();
    Ok((0..plan.pairs()).map(|p| plan.g_inv[p].apply(&plan.f[p].adjoint().apply(y_r)) / C64::new(a, 0.0)).collect())
}

pub fn relay_transmit(plan: &SchemePlan, w: &[CVector]) -> Result<CVector> {
    if w.len() != plan.pairs() || w.iter().any(|v| v.len() != plan.d) {
        return Err(Error::DimensionMismatch(format!(
            "expected {} forwarded vectors of length {}",
            plan.pairs(),
            plan.d
        )));
    }
    let b = plan.relay_amplitude();
    Ok(plan.t.iter().zip(w).fold(CVector::zeros(plan.effective_n), |acc, (t, wp)| acc + t.apply(wp)) * C64::new(b, 0.0))
}

/// `y_u = H_Ru x_r + z_u` for every user.
pub fn bc_phase<R: Rng + ?Sized>(
    plan: &SchemePlan,
    channels: &ChannelSet,
    w: &[CVector],
    noise_on: bool,
    rng: &mut R,
) -> Result<Vec<CVector>> {
    let x_r = relay_transmit(plan, w)?;
    Ok((0..plan.k).map(|u| add_noise(channels.downlink(u).apply(&x_r), noise_on, rng)).collect())
}

/// User `u`'s estimates of every forwarded `w_p`.
pub fn recover_forwarded(plan: &SchemePlan, y_u: &CVector, u: usize) -> Result<Vec<CVector>> {
    if u >= plan.k {
        return Err(Error::DimensionMismatch(format!("user {u} out of range for K = {}", plan.k)));
    }
    if y_u.len() != plan.effective_m {
        return Err(Error::DimensionMismatch(format!(
            "user observation has length {}, expected {}",
            y_u.len(),
            plan.effective_m
        )));
    }
    let b = plan.relay_amplitude();
    Ok((0..plan.pairs())
        .map(|p| plan.user_eff_inv[u][p].apply(&plan.uzf[u][p].adjoint().apply(y_u)) / C64::new(b, 0.0))
        .collect())
}

/// Decoded common vectors of all other users, in ascending user order.
///
/// User 0 subtracts its own vector from every `w_p`. User `u ≥ 1` first
/// recovers `s_0 = w_{u-1} − s_u`, then `s_v = w_{v-1} − s_0` for the rest.
pub fn user_decode(plan: &SchemePlan, y_u: &CVector, u: usize, own: &CVector) -> Result<Vec<CVector>> {
    if own.len() != plan.d {
        return Err(Error::DimensionMismatch(format!("own symbols have length {}", own.len())));
    }
    let w = recover_forwarded(plan, y_u, u)?;
    if u == 0 {
        return Ok(w.into_iter().map(|wp| wp - own).collect());
    }
    let s0 = &w[u - 1] - own;
    let mut out = Vec::with_capacity(plan.pairs());
    out.push(s0.clone());
    for v in (1..plan.k).filter(|&v| v != u) {
        out.push(&w[v - 1] - &s0);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct TransmissionTrace {
    pub sent: Vec<CVector>,
    pub relay_rx: CVector,
    pub relay_fwd: Vec<CVector>,
    pub user_rx: Vec<CVector>,
    /// `decoded[u]`: other users' vectors as decoded at user `u`, ascending order.
    pub decoded: Vec<Vec<CVector>>,
    pub noise_on: bool,
}

impl TransmissionTrace {
    /// Transmitted vector that `decoded[u][slot]` estimates.
    pub fn reference(&self, u: usize, slot: usize) -> &CVector {
        let source = if slot < u { slot } else { slot + 1 };
        &self.sent[source]
    }

    /// Largest `‖ŝ − s‖ / ‖s‖` over all users and messages.
    pub fn max_relative_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (u, row) in self.decoded.iter().enumerate() {
            for (slot, est) in row.iter().enumerate() {
                let s = self.reference(u, slot);
                worst = worst.max((est - s).norm() / s.norm().max(f64::MIN_POSITIVE));
            }
        }
        worst
    }

    /// Mean of `|ŝ − s|²` over every decoded entry.
    pub fn mean_squared_error(&self) -> f64 {
        let mut total = 0.0;
        let mut count = 0usize;
        for (u, row) in self.decoded.iter().enumerate() {
            for (slot, est) in row.iter().enumerate() {
                total += (est - self.reference(u, slot)).norm_squared();
                count += est.len();
            }
        }
        total / count as f64
    }
}

/// Runs MAC phase, relay processing, BC phase and decoding for one channel use.
pub fn run_transmission<R: Rng + ?Sized>(
    plan: &SchemePlan,
    channels: &ChannelSet,
    symbols: &[CVector],
    noise_on: bool,
    noise_rng: &mut R,
) -> Result<TransmissionTrace> {
    let relay_rx = mac_phase(plan, channels, symbols, noise_on, noise_rng)?;
    let relay_fwd = relay_process(plan, &relay_rx)?;
    let user_rx = bc_phase(plan, channels, &relay_fwd, noise_on, noise_rng)?;
    let decoded =
        user_rx.iter().enumerate().map(|(u, y)| user_decode(plan, y, u, &symbols[u])).collect::<Result<Vec<_>>>()?;
    Ok(TransmissionTrace { sent: symbols.to_vec(), relay_rx, relay_fwd, user_rx, decoded, noise_on })
}

/// `d` common streams per user per extended block of `L` slots, no private streams.
pub fn build_allocation(plan: &SchemePlan) -> DofAllocation {
    DofAllocation::new(vec![vec![0; plan.k]; plan.k], vec![plan.d as u64; plan.k], plan.extension as u64)
        .expect("well-formed allocation")
}

/// The allocation any plan for `(K, M, N)` would realise.
pub fn planned_allocation(k: usize, m: usize, n: usize) -> DofAllocation {
    let (l, d) = scheme_dimensions(k, m, n);
    DofAllocation::new(vec![vec![0; k]; k], vec![d as u64; k], l as u64).expect("well-formed allocation")
}
