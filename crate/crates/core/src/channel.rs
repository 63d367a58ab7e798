//! Network configuration and channel realizations for the two-phase relay.
//!
//! Uplink matrices `H_jR` are `N × M` (user `j` to relay), downlink matrices
//! `H_Rj` are `M × N`. A channel set may be extended over `L` slots, in which
//! case every matrix becomes the block diagonal `diag(H, …, H)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{numeric_rank, random_gaussian_matrix, CMatrix, DEFAULT_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Number of users.
    pub k: usize,
    /// Antennas per user.
    pub m: usize,
    /// Relay antennas.
    pub n: usize,
    /// Per-node transmit power, linear scale; noise variance is 1.
    pub power: f64,
    pub reciprocal: bool,
    /// 1.0 for full duplex, 0.5 to report half-duplex rates.
    pub duplex_factor: f64,
    pub seed: u64,
}

impl NetworkConfig {
    pub const DEFAULT_POWER: f64 = 1e4;
    pub const DEFAULT_SEED: u64 = 42;

    pub fn new(k: usize, m: usize, n: usize) -> Result<Self> {
        let cfg = Self {
            k,
            m,
            n,
            power: Self::DEFAULT_POWER,
            reciprocal: true,
            duplex_factor: 1.0,
            seed: Self::DEFAULT_SEED,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_power(mut self, power: f64) -> Result<Self> {
        self.power = power;
        self.validate()?;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_reciprocal(mut self, reciprocal: bool) -> Self {
        self.reciprocal = reciprocal;
        self
    }

    pub fn with_half_duplex(mut self, half: bool) -> Self {
        self.duplex_factor = if half { 0.5 } else { 1.0 };
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidConfig(format!("K = {} but at least 2 users are needed", self.k)));
        }
        if self.m == 0 || self.n == 0 {
            return Err(Error::InvalidConfig("antenna counts must be positive".into()));
        }
        if !(self.power.is_finite() && self.power > 0.0) {
            return Err(Error::InvalidConfig(format!("power must be positive, got {}", self.power)));
        }
        if self.duplex_factor != 1.0 && self.duplex_factor != 0.5 {
            return Err(Error::InvalidConfig(format!("duplex factor must be 1.0 or 0.5, got {}", self.duplex_factor)));
        }
        Ok(())
    }

    /// `K = 2` is the two-way relay channel.
    pub fn is_degenerate(&self) -> bool {
        self.k == 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChannelSetDoc", into = "ChannelSetDoc")]
pub struct ChannelSet {
    k: usize,
    m: usize,
    n: usize,
    extension: usize,
    uplink: Vec<CMatrix>,
    downlink: Vec<CMatrix>,
}

#[derive(Serialize, Deserialize)]
#[allow(non_snake_case)]
struct ChannelSetDoc {
    K: usize,
    M: usize,
    N: usize,
    L: usize,
    uplink: Vec<CMatrix>,
    downlink: Vec<CMatrix>,
}

impl From<ChannelSet> for ChannelSetDoc {
    fn from(c: ChannelSet) -> Self {
        Self { K: c.k, M: c.m, N: c.n, L: c.extension, uplink: c.uplink, downlink: c.downlink }
    }
}

impl TryFrom<ChannelSetDoc> for ChannelSet {
    type Error = Error;

    fn try_from(doc: ChannelSetDoc) -> Result<Self> {
        ChannelSet::from_parts(doc.K, doc.M, doc.N, doc.L, doc.uplink, doc.downlink)
    }
}

impl ChannelSet {
    /// Assembles a channel set, checking the shape invariants.
    pub fn from_parts(
        k: usize,
        m: usize,
        n: usize,
        extension: usize,
        uplink: Vec<CMatrix>,
        downlink: Vec<CMatrix>,
    ) -> Result<Self> {
        if k < 2 || m == 0 || n == 0 || extension == 0 {
            return Err(Error::Format(format!("bad dimensions K={k} M={m} N={n} L={extension}")));
        }
        if uplink.len() != k || downlink.len() != k {
            return Err(Error::Format(format!(
                "expected {k} uplink and downlink matrices, got {} and {}",
                uplink.len(),
                downlink.len()
            )));
        }
        let (rows, cols) = (extension * n, extension * m);
        if let Some(h) = uplink.iter().find(|h| h.shape() != (rows, cols)) {
            return Err(Error::Format(format!("uplink matrix is {:?}, expected {rows}x{cols}", h.shape())));
        }
        if let Some(h) = downlink.iter().find(|h| h.shape() != (cols, rows)) {
            return Err(Error::Format(format!("downlink matrix is {:?}, expected {cols}x{rows}", h.shape())));
        }
        Ok(Self { k, m, n, extension, uplink, downlink })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Per-slot antennas at each user.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Per-slot antennas at the relay.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn extension_factor(&self) -> usize {
        self.extension
    }

    /// Relay dimension seen by the scheme, `L · N`.
    pub fn relay_dim(&self) -> usize {
        self.extension * self.n
    }

    /// User dimension seen by the scheme, `L · M`.
    pub fn user_dim(&self) -> usize {
        self.extension * self.m
    }

    /// `H_jR` for 0-based user index `j`.
    pub fn uplink(&self, j: usize) -> &CMatrix {
        &self.uplink[j]
    }

    /// `H_Rj` for 0-based user index `j`.
    pub fn downlink(&self, j: usize) -> &CMatrix {
        &self.downlink[j]
    }

    pub fn uplinks(&self) -> &[CMatrix] {
        &self.uplink
    }

    pub fn downlinks(&self) -> &[CMatrix] {
        &self.downlink
    }

    /// True when every matrix has full rank at the default tolerance.
    pub fn all_full_rank(&self) -> bool {
        self.uplink.iter().chain(&self.downlink).all(|h| numeric_rank(h, DEFAULT_TOL) == h.rows().min(h.cols()))
    }

    /// Copy with user `j`'s uplink replaced; used for perturbation experiments.
    pub fn with_uplink(&self, j: usize, h: CMatrix) -> Result<Self> {
        let mut uplink = self.uplink.clone();
        uplink[j] = h;
        Self::from_parts(self.k, self.m, self.n, self.extension, uplink, self.downlink.clone())
    }

    /// Keeps only the first `keep` relay antennas: uplink rows and downlink columns.
    pub fn shutdown_relay_antennas(&self, keep: usize) -> Result<Self> {
        if self.extension != 1 {
            return Err(Error::AlreadyExtended(self.extension));
        }
        if keep == 0 || keep > self.n {
            return Err(Error::InvalidConfig(format!("cannot keep {keep} of {} relay antennas", self.n)));
        }
        let uplink = self.uplink.iter().map(|h| h.top_rows(keep)).collect();
        let downlink = self.downlink.iter().map(|h| h.left_columns(keep)).collect();
        Self::from_parts(self.k, self.m, keep, 1, uplink, downlink)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("channel set serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Draws all `K` uplinks first, then (only when not reciprocal) all `K`
/// downlinks, so uplink realizations do not depend on the reciprocity flag.
pub fn generate_channels<R: Rng + ?Sized>(config: &NetworkConfig, rng: &mut R) -> ChannelSet {
    let uplink: Vec<CMatrix> = (0..config.k).map(|_| random_gaussian_matrix(config.n, config.m, rng)).collect();
    let downlink = if config.reciprocal {
        uplink.iter().map(CMatrix::transpose).collect()
    } else {
        (0..config.k).map(|_| random_gaussian_matrix(config.m, config.n, rng)).collect()
    };
    ChannelSet { k: config.k, m: config.m, n: config.n, extension: 1, uplink, downlink }
}

/// `L`-slot symbol extension with a channel that is constant across the slots.
pub fn extend_channels(channels: &ChannelSet, l: usize) -> Result<ChannelSet> {
    if channels.extension != 1 {
        return Err(Error::AlreadyExtended(channels.extension));
    }
    if l == 0 {
        return Err(Error::InvalidConfig("extension factor must be at least 1".into()));
    }
    if l == 1 {
        return Ok(channels.clone());
    }
    Ok(ChannelSet {
        extension: l,
        uplink: channels.uplink.iter().map(|h| h.block_diag(l)).collect(),
        downlink: channels.downlink.iter().map(|h| h.block_diag(l)).collect(),
        ..channels.clone()
    })
}
