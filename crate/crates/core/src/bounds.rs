//! Cut-set DoF bound, per-receiver cut checks, and the comparison against
//! private-message-only transmission.
//!
//! All DoF values are exact rationals; they are only turned into floats for
//! display.

use num_rational::Ratio;
use serde::Serialize;

use crate::error::{Error, Result};

pub type Dof = Ratio<i64>;

/// Stream counts for one block of `slots` channel uses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DofAllocation {
    /// `private[j][i]`: streams from user `j` to user `i`.
    private: Vec<Vec<u64>>,
    /// `common[j]`: common streams from user `j` to every other user.
    common: Vec<u64>,
    slots: u64,
}

impl DofAllocation {
    pub fn zeros(k: usize) -> Self {
        Self { private: vec![vec![0; k]; k], common: vec![0; k], slots: 1 }
    }

    pub fn new(private: Vec<Vec<u64>>, common: Vec<u64>, slots: u64) -> Result<Self> {
        let k = common.len();
        if private.len() != k || private.iter().any(|row| row.len() != k) {
            return Err(Error::DimensionMismatch(format!("private matrix must be {k}x{k}")));
        }
        if (0..k).any(|j| private[j][j] != 0) {
            return Err(Error::InvalidConfig("a user cannot send private streams to itself".into()));
        }
        if slots == 0 {
            return Err(Error::InvalidConfig("allocation must span at least one slot".into()));
        }
        Ok(Self { private, common, slots })
    }

    pub fn k(&self) -> usize {
        self.common.len()
    }

    pub fn private(&self, from: usize, to: usize) -> u64 {
        self.private[from][to]
    }

    pub fn common(&self, from: usize) -> u64 {
        self.common[from]
    }

    pub fn slots(&self) -> u64 {
        self.slots
    }

    pub fn set_private(&mut self, from: usize, to: usize, streams: u64) -> Result<()> {
        if from == to && streams != 0 {
            return Err(Error::InvalidConfig("a user cannot send private streams to itself".into()));
        }
        self.private[from][to] = streams;
        Ok(())
    }

    pub fn set_common(&mut self, from: usize, streams: u64) {
        self.common[from] = streams;
    }

    /// Total DoF normalised to a single channel use.
    pub fn dof_per_slot(&self) -> Dof {
        Dof::new(total_dof(self) as i64, self.slots as i64)
    }
}

/// Total streams over the allocation's block: every private stream counts
/// once, every common stream counts `K − 1` times.
pub fn total_dof(alloc: &DofAllocation) -> u64 {
    let k = alloc.k() as u64;
    let private: u64 = alloc.private.iter().flatten().sum();
    let common: u64 = alloc.common.iter().sum();
    private + k.saturating_sub(1) * common
}

/// `K · min(N, M)`.
pub fn cutset_dof(k: usize, m: usize, n: usize) -> u64 {
    (k * m.min(n)) as u64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CutViolation {
    pub receiver: usize,
    pub cut_sum: u64,
    pub bound: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CutCheck {
    /// Incoming stream count at each receiver, in receiver order.
    pub cut_sums: Vec<u64>,
    /// `slots · min(N, M)`.
    pub bound: u64,
    pub violations: Vec<CutViolation>,
}

impl CutCheck {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// Every receiver cut meets the bound with equality.
    pub fn saturated(&self) -> bool {
        self.cut_sums.iter().all(|&s| s == self.bound)
    }
}

/// For every receiver `i`: `Σ_{j≠i} (d_ji + d_jc) ≤ min{N, M}` per slot. The
/// MAC cut gives `min{N, (K−1)M}` and the BC cut `min{N, M}`; the latter is
/// always the binding one.
pub fn check_percut_bounds(alloc: &DofAllocation, m: usize, n: usize) -> CutCheck {
    let k = alloc.k();
    let bound = alloc.slots * m.min(n) as u64;
    let cut_sums: Vec<u64> =
        (0..k).map(|i| (0..k).filter(|&j| j != i).map(|j| alloc.private[j][i] + alloc.common[j]).sum()).collect();
    let violations = cut_sums
        .iter()
        .enumerate()
        .filter(|&(_, &s)| s > bound)
        .map(|(receiver, &cut_sum)| CutViolation { receiver, cut_sum, bound })
        .collect();
    CutCheck { cut_sums, bound, violations }
}

/// Regime boundaries on `N/M`, in increasing order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Thresholds {
    pub unity: Dof,
    pub lower: Dof,
    pub half_k: Dof,
    pub upper: Dof,
}

impl Thresholds {
    pub fn for_users(k: usize) -> Self {
        let k = k as i64;
        Self {
            unity: Dof::from_integer(1),
            lower: Dof::new(2 * k * k - 2 * k, k * k - k + 2),
            half_k: Dof::new(k, 2),
            upper: Dof::new(k * k - 3 * k + 3, k - 1),
        }
    }

    pub fn as_array(&self) -> [Dof; 4] {
        [self.unity, self.lower, self.half_k, self.upper]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RegimeLabel {
    pub case_index: u8,
    pub thresholds: Thresholds,
}

/// Interpretation notes attached to case-4 output.
pub const CASE4_NOTES: [&str; 2] = ["case4-interval-reversed", "case4-bracket-2N+(4-K)M"];

impl RegimeLabel {
    pub fn notes(&self) -> &'static [&'static str] {
        if self.case_index == 4 {
            &CASE4_NOTES
        } else {
            &[]
        }
    }
}

/// Locates `N/M` among the five comparison regimes. Intervals are closed
/// below, so a ratio sitting on a boundary belongs to the higher case.
pub fn classify_regime(k: usize, m: usize, n: usize) -> Result<RegimeLabel> {
    if k < 3 {
        return Err(Error::UnsupportedRegime(format!("regime table needs K >= 3, got K = {k}")));
    }
    if m == 0 || n == 0 {
        return Err(Error::InvalidConfig("antenna counts must be positive".into()));
    }
    let thresholds = Thresholds::for_users(k);
    let ratio = Dof::new(n as i64, m as i64);
    let case_index = 1 + thresholds.as_array().iter().filter(|&&t| ratio >= t).count() as u8;
    Ok(RegimeLabel { case_index, thresholds })
}

/// Private-only total DoF per unit of `M` as a function of `r = N/M`.
pub fn private_only_per_antenna(case_index: u8, k: usize, ratio: Dof) -> Dof {
    let k = k as i64;
    let denom = k * k - k + 2;
    match case_index {
        1 | 2 => ratio * 2,
        3 => Dof::new(4 * k * k - 4 * k, denom),
        4 => Dof::new(k * (k - 1), denom) * (ratio * 2 + (4 - k)),
        5 => Dof::from_integer(k),
        other => panic!("no regime {other}"),
    }
}

pub fn private_only_dof(k: usize, m: usize, n: usize) -> Result<Dof> {
    let label = classify_regime(k, m, n)?;
    let ratio = Dof::new(n as i64, m as i64);
    Ok(private_only_per_antenna(label.case_index, k, ratio) * m as i64)
}

/// Extra DoF from allowing common messages: `cutset − private_only`.
pub fn common_gain(k: usize, m: usize, n: usize) -> Result<Dof> {
    Ok(Dof::from_integer(cutset_dof(k, m, n) as i64) - private_only_dof(k, m, n)?)
}

/// Value of the two neighbouring case formulas at a shared boundary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BoundaryCheck {
    pub lower_case: u8,
    pub ratio: Dof,
    pub lower_value: Dof,
    pub upper_value: Dof,
}

impl BoundaryCheck {
    pub fn continuous(&self) -> bool {
        self.lower_value == self.upper_value
    }
}

/// Evaluates both adjacent formulas at each of the four boundaries.
pub fn boundary_checks(k: usize) -> Vec<BoundaryCheck> {
    Thresholds::for_users(k)
        .as_array()
        .iter()
        .enumerate()
        .map(|(i, &ratio)| {
            let lower_case = i as u8 + 1;
            BoundaryCheck {
                lower_case,
                ratio,
                lower_value: private_only_per_antenna(lower_case, k, ratio),
                upper_value: private_only_per_antenna(lower_case + 1, k, ratio),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Table1Row {
    pub k: usize,
    pub m: usize,
    pub n: usize,
    pub case_index: u8,
    pub private_only: Dof,
    pub cutset: u64,
    pub gain: Dof,
    pub notes: Vec<&'static str>,
}

pub fn table1_row(k: usize, m: usize, n: usize) -> Result<Table1Row> {
    let label = classify_regime(k, m, n)?;
    let private_only = private_only_dof(k, m, n)?;
    let cutset = cutset_dof(k, m, n);
    Ok(Table1Row {
        k,
        m,
        n,
        case_index: label.case_index,
        private_only,
        cutset,
        gain: Dof::from_integer(cutset as i64) - private_only,
        notes: label.notes().to_vec(),
    })
}

/// Integers print bare; other rationals as a six-decimal real.
pub fn format_dof(value: Dof) -> String {
    if value.is_integer() {
        value.to_integer().to_string()
    } else {
        format!("{:.6}", *value.numer() as f64 / *value.denom() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn int(v: i64) -> Dof {
        Dof::from_integer(v)
    }

    #[test]
    fn total_dof_examples() {
        assert_eq!(total_dof(&DofAllocation::zeros(3)), 0);

        let mut a = DofAllocation::zeros(3);
        (0..3).for_each(|j| a.set_common(j, 1));
        assert_eq!(total_dof(&a), 6);

        let mut b = DofAllocation::zeros(4);
        for j in 0..4 {
            for i in (0..4).filter(|&i| i != j) {
                b.set_private(j, i, 1).unwrap();
            }
        }
        assert_eq!(total_dof(&b), 12);
    }

    #[test]
    fn allocation_validation() {
        assert!(DofAllocation::new(vec![vec![1, 0], vec![0, 0]], vec![0, 0], 1).is_err());
        assert!(DofAllocation::new(vec![vec![0, 0]], vec![0, 0], 1).is_err());
        assert!(DofAllocation::new(vec![vec![0, 2], vec![1, 0]], vec![0, 0], 0).is_err());
        assert!(DofAllocation::zeros(2).set_private(1, 1, 1).is_err());
    }

    #[test]
    fn cutset_examples() {
        assert_eq!(cutset_dof(3, 2, 3), 6);
        assert_eq!(cutset_dof(5, 4, 4), 20);
        assert_eq!(cutset_dof(4, 6, 3), 12);
    }

    #[test]
    fn percut_examples() {
        // Common-only allocation with d_jc = N/(K-1), M > N.
        let (k, m, n) = (4, 5, 3);
        let mut a = DofAllocation::zeros(k);
        (0..k).for_each(|j| a.set_common(j, (n / (k - 1)) as u64));
        let check = check_percut_bounds(&a, m, n);
        assert!(check.passed());
        assert!(check.saturated());

        let mut b = DofAllocation::zeros(3);
        b.set_private(1, 0, 2).unwrap();
        b.set_private(2, 0, 2).unwrap();
        let check = check_percut_bounds(&b, 2, 2);
        assert!(!check.passed());
        assert_eq!(check.violations, vec![CutViolation { receiver: 0, cut_sum: 4, bound: 2 }]);

        assert!(check_percut_bounds(&DofAllocation::zeros(3), 2, 2).passed());
    }

    #[test]
    fn thresholds_are_ordered() {
        for k in 3..=12 {
            let t = Thresholds::for_users(k).as_array();
            assert!(t.windows(2).all(|w| w[0] <= w[1]), "K = {k}: {t:?}");
        }
        let t3 = Thresholds::for_users(3);
        assert_eq!(t3.lower, Dof::new(3, 2));
        assert_eq!(t3.half_k, Dof::new(3, 2));
        assert_eq!(t3.upper, Dof::new(3, 2));
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_regime(4, 2, 1).unwrap().case_index, 1);
        assert_eq!(classify_regime(4, 1, 2).unwrap().case_index, 4);
        assert_eq!(classify_regime(3, 2, 3).unwrap().case_index, 5);
        assert!(matches!(classify_regime(2, 1, 1), Err(Error::UnsupportedRegime(_))));
        assert_eq!(classify_regime(4, 1, 2).unwrap().notes(), &CASE4_NOTES);
        assert!(classify_regime(4, 2, 1).unwrap().notes().is_empty());
    }

    #[test]
    fn private_only_examples() {
        assert_eq!(private_only_dof(4, 3, 2).unwrap(), int(4));
        assert_eq!(private_only_dof(3, 2, 3).unwrap(), int(6));
        assert_eq!(classify_regime(4, 7, 14).unwrap().case_index, 4);
        assert_eq!(private_only_dof(4, 7, 14).unwrap(), int(24));
    }

    #[test]
    fn gain_examples() {
        assert_eq!(common_gain(4, 3, 2).unwrap(), int(4));
        assert_eq!(common_gain(3, 2, 3).unwrap(), int(0));
        for k in 3..=8 {
            assert_eq!(common_gain(k, 2, 2).unwrap(), int(((k - 2) * 2) as i64));
        }
        assert_eq!(common_gain(6, 2, 2).unwrap(), int(8));
    }

    #[test]
    fn all_boundaries_are_continuous() {
        // Independent of the tie rule: the formulas agree on every boundary.
        for k in 3..=20 {
            for b in boundary_checks(k) {
                assert!(b.continuous(), "K = {k}: {b:?}");
            }
        }
    }

    #[test]
    fn table_row_and_formatting() {
        let row = table1_row(4, 14, 24).unwrap();
        assert_eq!(row.private_only, int(48));
        assert_eq!(row.cutset, 56);
        assert_eq!(format_dof(Dof::new(48, 7)), "6.857143");
        assert_eq!(format_dof(int(-3)), "-3");
    }
}
