//! Vector-level sparsity: the l0 count, supports, membership in the
//! exact-level strata `A_l` and the cumulative sets `Omega_l`, and the
//! perturbation radii inside which sparsity cannot drop.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of nonzero components of a vector, `0 <= value <= d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SparsityLevel(pub usize);

impl SparsityLevel {
    pub const ZERO: SparsityLevel = SparsityLevel(0);

    pub fn value(self) -> usize {
        self.0
    }

    /// Checked constructor against an ambient dimension.
    pub fn new(value: usize, dim: usize) -> Result<Self> {
        if value > dim {
            return Err(Error::Argument(format!(
                "sparsity level {value} exceeds dimension {dim}"
            )));
        }
        Ok(SparsityLevel(value))
    }
}

impl fmt::Display for SparsityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Threshold below which a computed component counts as zero.
///
/// A component `x_i` is nonzero iff `|x_i| > max(absolute, relative * ||x||_inf)`.
/// With both fields zero this is the exact test `x_i != 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroTolerance {
    pub absolute: f64,
    pub relative: f64,
}

impl Default for ZeroTolerance {
    fn default() -> Self {
        ZeroTolerance {
            absolute: 1e-10,
            relative: 1e-12,
        }
    }
}

impl ZeroTolerance {
    /// Exact mode: only a literal `0.0` counts as zero.
    pub const fn exact() -> Self {
        ZeroTolerance {
            absolute: 0.0,
            relative: 0.0,
        }
    }

    pub fn new(absolute: f64, relative: f64) -> Result<Self> {
        if !(absolute >= 0.0 && relative >= 0.0) || !absolute.is_finite() || !relative.is_finite()
        {
            return Err(Error::Argument(format!(
                "zero tolerance must be finite and nonnegative, got ({absolute}, {relative})"
            )));
        }
        Ok(ZeroTolerance { absolute, relative })
    }

    pub fn is_exact(&self) -> bool {
        self.absolute == 0.0 && self.relative == 0.0
    }

    /// The cut-off for a particular vector.
    pub fn threshold(&self, x: &[f64]) -> f64 {
        if self.relative == 0.0 {
            return self.absolute;
        }
        let inf = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.absolute.max(self.relative * inf)
    }
}

/// Sorted set of indices into `0..ambient_dim`.
///
/// Stored 0-based; [`SupportSet::one_based`] and `Display` use the 1-based
/// convention of reports.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SupportSet {
    indices: Vec<usize>,
    ambient_dim: usize,
}

impl SupportSet {
    /// Builds a support from 0-based indices, sorting and checking them.
    pub fn new(mut indices: Vec<usize>, ambient_dim: usize) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Argument("support indices must be distinct".into()));
        }
        if let Some(&last) = indices.last() {
            if last >= ambient_dim {
                return Err(Error::Argument(format!(
                    "support index {} out of range 1..={ambient_dim}",
                    last + 1
                )));
            }
        }
        Ok(SupportSet {
            indices,
            ambient_dim,
        })
    }

    /// Builds a support from 1-based indices.
    pub fn from_one_based(indices: &[usize], ambient_dim: usize) -> Result<Self> {
        if indices.contains(&0) {
            return Err(Error::Argument("1-based support index 0".into()));
        }
        Self::new(indices.iter().map(|i| i - 1).collect(), ambient_dim)
    }

    pub fn empty(ambient_dim: usize) -> Self {
        SupportSet {
            indices: Vec::new(),
            ambient_dim,
        }
    }

    pub fn full(ambient_dim: usize) -> Self {
        SupportSet {
            indices: (0..ambient_dim).collect(),
            ambient_dim,
        }
    }

    /// Support from a bitmask; bit `i` selects index `i`.
    pub fn from_mask(mask: u64, ambient_dim: usize) -> Self {
        SupportSet {
            indices: (0..ambient_dim).filter(|i| mask >> i & 1 == 1).collect(),
            ambient_dim,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.indices.iter().map(|i| i + 1).collect()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn is_subset_of(&self, other: &SupportSet) -> bool {
        self.indices.iter().all(|&i| other.contains(i))
    }

    /// Indices of `0..ambient_dim` not in the set.
    pub fn complement(&self) -> Vec<usize> {
        (0..self.ambient_dim).filter(|&i| !self.contains(i)).collect()
    }

    /// True when `x` vanishes off the set, i.e. `x` lies in the cone `C_I`.
    pub fn contains_support_of(&self, x: &[f64], tol: ZeroTolerance) -> bool {
        let t = tol.threshold(x);
        x.iter()
            .enumerate()
            .all(|(i, v)| v.abs() <= t || self.contains(i))
    }
}

impl fmt::Display for SupportSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, i) in self.indices.iter().enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}", i + 1)?;
        }
        f.write_str("}")
    }
}

impl PartialOrd for SupportSet {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Size first, then lexicographic on the sorted indices.
impl Ord for SupportSet {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.indices
            .len()
            .cmp(&other.indices.len())
            .then_with(|| self.indices.cmp(&other.indices))
    }
}

impl Serialize for SupportSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.one_based().serialize(serializer)
    }
}

fn check_nonempty(x: &[f64]) -> Result<()> {
    if x.is_empty() {
        Err(Error::EmptyVector)
    } else {
        Ok(())
    }
}

/// Count of components above the zero threshold.
pub fn l0_norm(x: &[f64], tol: ZeroTolerance) -> Result<SparsityLevel> {
    check_nonempty(x)?;
    let t = tol.threshold(x);
    Ok(SparsityLevel(x.iter().filter(|v| v.abs() > t).count()))
}

/// `S(x)`, the indices of the nonzero components.
pub fn support(x: &[f64], tol: ZeroTolerance) -> Result<SupportSet> {
    check_nonempty(x)?;
    let t = tol.threshold(x);
    let indices = x
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > t)
        .map(|(i, _)| i)
        .collect();
    Ok(SupportSet {
        indices,
        ambient_dim: x.len(),
    })
}

/// The unique `l` with `x` in `A_l`. Same value as [`l0_norm`]; the strata
/// `A_0, ..., A_d` partition the space.
pub fn classify_level(x: &[f64], tol: ZeroTolerance) -> Result<SparsityLevel> {
    l0_norm(x, tol)
}

/// Membership in `Omega_l = A_0 ∪ ... ∪ A_l`.
pub fn in_omega(x: &[f64], level: SparsityLevel, tol: ZeroTolerance) -> Result<bool> {
    check_nonempty(x)?;
    if level.0 > x.len() {
        return Err(Error::Argument(format!(
            "level {} out of range 0..={}",
            level.0,
            x.len()
        )));
    }
    Ok(l0_norm(x, tol)? <= level)
}

fn min_nonzero_magnitude(x: &[f64], tol: ZeroTolerance) -> Result<f64> {
    check_nonempty(x)?;
    let t = tol.threshold(x);
    x.iter()
        .map(|v| v.abs())
        .filter(|v| *v > t)
        .min_by(f64::total_cmp)
        .ok_or(Error::UndefinedRadius)
}

/// Smallest nonzero magnitude of `x`.
///
/// Any `y` with `||y - x||_2` below this radius keeps every nonzero of `x`
/// nonzero, so `||y||_0 >= ||x||_0`, and `||y||_0 >= ||x||_0 + 1` as soon as
/// `y` picks up a component outside `S(x)`.
pub fn sparsity_safety_radius(x: &[f64], tol: ZeroTolerance) -> Result<f64> {
    min_nonzero_magnitude(x, tol)
}

/// `mu * min{|x_i| : i in S(x)}` for `0 < mu <= 1/2`.
///
/// Inside this ball every `y` satisfies `S(x) ⊆ S(y)`, with equality when
/// `y` also lies in `C_{S(x)}`.
pub fn support_subset_radius(x: &[f64], mu: f64, tol: ZeroTolerance) -> Result<f64> {
    if !(mu > 0.0 && mu <= 0.5) {
        return Err(Error::Argument(format!("mu must lie in (0, 1/2], got {mu}")));
    }
    match min_nonzero_magnitude(x, tol) {
        Ok(m) => Ok(mu * m),
        Err(Error::UndefinedRadius) => Err(Error::Argument(
            "support_subset_radius needs a nonzero vector".into(),
        )),
        Err(e) => Err(e),
    }
}
