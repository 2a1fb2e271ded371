//! Regularization-parameter intervals that force a prescribed sparsity.
//!
//! All rules compare restricted minima of `g`:
//!
//! - `g*`  the global minimum of `g`,
//! - `g'`  the minimum over `Gamma_l` (or `Omega_l × R^{d′}` when coupled),
//! - `g_j` the minima over the smaller sets `Gamma_j`, `j < l`.
//!
//! For `λ ∈ [g' - g*, min_j (g_j - g')/(l - j)]` the restricted minimizer
//! `x'` is a global minimizer of `f`, with `f(x') - g* ≤ λ`.

use std::collections::BTreeMap;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fidelity::{FidelityModel, Point};
use crate::solver::{self, EnumerationBudget, SolveReport, SOLVER_ZERO_TOL};
use crate::sparsity::{SparsityLevel, SupportSet};
use crate::transform::Transform;

/// Differences of restricted minima below this (relative) size are noise.
const SNAP_REL: f64 = 1e-12;

/// Which rule produced an interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaRule {
    /// `λ ≥ g(x_0) - g*`: the null-space minimizer `x_0` becomes optimal.
    MaxSparsity,
    Level,
    LevelOne,
    /// `0 ≤ λ ≤ min_j (g(x_j) - g*)/(l - j)`: the global minimizer of `g`
    /// stays optimal for `f`.
    Preserve,
    CoupledMax,
    CoupledLevel,
}

impl LambdaRule {
    pub const ALL: [LambdaRule; 6] = [
        LambdaRule::MaxSparsity,
        LambdaRule::Level,
        LambdaRule::LevelOne,
        LambdaRule::Preserve,
        LambdaRule::CoupledMax,
        LambdaRule::CoupledLevel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LambdaRule::MaxSparsity => "max-sparsity",
            LambdaRule::Level => "level",
            LambdaRule::LevelOne => "level-one",
            LambdaRule::Preserve => "preserve",
            LambdaRule::CoupledMax => "coupled-max",
            LambdaRule::CoupledLevel => "coupled-level",
        }
    }

    /// Result tag carried in reports.
    pub fn result_tag(self) -> &'static str {
        match self {
            LambdaRule::MaxSparsity => "Thm3.1",
            LambdaRule::Level => "Thm3.2",
            LambdaRule::LevelOne => "Cor3.3",
            LambdaRule::Preserve => "Thm3.4(ii)",
            LambdaRule::CoupledMax => "Thm4.1",
            LambdaRule::CoupledLevel => "Thm4.2",
        }
    }

    pub fn needs_level(self) -> bool {
        matches!(self, LambdaRule::Level | LambdaRule::CoupledLevel)
    }
}

impl std::str::FromStr for LambdaRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LambdaRule::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = LambdaRule::ALL.iter().map(|r| r.name()).collect();
                Error::Argument(format!("unknown rule {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

/// A restricted minimizer backing an interval endpoint.
#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub point: Point,
    pub value: f64,
    pub level: SparsityLevel,
    pub support: SupportSet,
    pub attained: bool,
}

impl From<&SolveReport> for Witness {
    fn from(r: &SolveReport) -> Self {
        Witness {
            point: r.minimizer.clone(),
            value: r.value_g,
            level: r.achieved_level,
            support: r.achieved_support.clone(),
            attained: r.attained,
        }
    }
}

fn serialize_upper<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() && *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

/// Closed interval `[lo, hi]` of admissible λ, possibly empty.
#[derive(Debug, Clone, Serialize)]
pub struct LambdaInterval {
    pub rule: LambdaRule,
    pub result_tag: &'static str,
    pub target_level: SparsityLevel,
    pub lo: f64,
    /// `+inf` serializes as the string `"inf"`.
    #[serde(serialize_with = "serialize_upper")]
    pub hi: f64,
    pub feasible: bool,
    /// The same feasibility test in weighted-average form:
    /// `g' ≤ (g_j + (l - j) g*) / (l - j + 1)` for every `j < l`.
    pub weighted_average_feasible: Option<bool>,
    /// Level-one rules only: `g' ≤ (g* + g_0) / 2`.
    pub midpoint_condition: Option<bool>,
    /// Some exact-level infimum was not attained and its value was used.
    pub conservative: bool,
    /// Keys: `g_star`, `g_prime`, `g_0`, `g_1`, ...
    pub witnesses: BTreeMap<String, Witness>,
    pub notes: Vec<String>,
}

impl LambdaInterval {
    pub fn contains(&self, lambda: f64) -> bool {
        self.feasible && lambda >= self.lo && lambda <= self.hi
    }

    pub fn witness(&self, role: &str) -> Option<&Witness> {
        self.witnesses.get(role)
    }

    /// `count` values spread over the interval, endpoints included. The
    /// lower end is nudged up by `1e-12 (1 + |lo|)` so rounding in the
    /// witness values cannot put it just outside the guarantee. An
    /// unbounded interval is sampled over `[lo, lo + 1]`.
    pub fn samples(&self, count: usize) -> Vec<f64> {
        if !self.feasible || count == 0 {
            return Vec::new();
        }
        let lo = (self.lo + 1e-12 * (1.0 + self.lo.abs())).min(self.hi);
        let hi = if self.hi.is_finite() { self.hi } else { lo + 1.0 };
        if count == 1 {
            return vec![lo];
        }
        (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect()
    }
}

fn snap(diff: f64, scale: f64) -> f64 {
    if diff.abs() <= SNAP_REL * (1.0 + scale.abs()) {
        0.0
    } else {
        diff
    }
}

/// The global minimizer of `g`, closed form where available.
fn global_witness(model: &FidelityModel, transform: &Transform) -> Result<Witness> {
    let (point, value) = match model.global_min_g() {
        Ok(pv) => pv,
        Err(Error::Unsupported(_)) => {
            let r = solver::minimize_on_support(model, transform, &SupportSet::full(transform.image_dim()))?;
            (r.minimizer, r.value_g)
        }
        Err(e) => return Err(e),
    };
    let support = transform.image_support(point.x.as_slice(), SOLVER_ZERO_TOL)?;
    Ok(Witness {
        point,
        value,
        level: SparsityLevel(support.len()),
        support,
        attained: true,
    })
}

fn check_dims(model: &FidelityModel, transform: &Transform) -> Result<()> {
    if transform.preimage_dim() != model.x_dim() {
        return Err(Error::Dimension {
            what: "transform columns",
            expected: model.x_dim(),
            found: transform.preimage_dim(),
        });
    }
    transform.ensure_supported()
}

fn max_sparsity(
    model: &FidelityModel,
    transform: &Transform,
    budget: &EnumerationBudget,
    rule: LambdaRule,
) -> Result<LambdaInterval> {
    check_dims(model, transform)?;
    let star = global_witness(model, transform)?;
    let zero = Witness::from(&solver::minimize_on_gamma(model, transform, SparsityLevel(0), budget)?);
    let lo = snap(zero.value - star.value, star.value).max(0.0);
    let mut witnesses = BTreeMap::new();
    witnesses.insert("g_star".to_string(), star);
    witnesses.insert("g_0".to_string(), zero);
    Ok(LambdaInterval {
        rule,
        result_tag: rule.result_tag(),
        target_level: SparsityLevel(0),
        lo,
        hi: f64::INFINITY,
        feasible: true,
        weighted_average_feasible: None,
        midpoint_condition: None,
        conservative: false,
        witnesses,
        notes: Vec::new(),
    })
}

fn for_level(
    model: &FidelityModel,
    transform: &Transform,
    level: SparsityLevel,
    budget: &EnumerationBudget,
    rule: LambdaRule,
) -> Result<LambdaInterval> {
    check_dims(model, transform)?;
    let d = transform.image_dim();
    if level.0 == 0 {
        return Err(Error::Argument(
            "target level 0 is the max-sparsity rule; use lambda_for_max_sparsity".into(),
        ));
    }
    if level.0 > d {
        return Err(Error::Argument(format!("target level {} exceeds d = {d}", level.0)));
    }
    let star = global_witness(model, transform)?;
    let prime = Witness::from(&solver::minimize_on_gamma(model, transform, level, budget)?);
    let (gs, gp) = (star.value, prime.value);
    let lo = snap(gp - gs, gs).max(0.0);

    let mut hi = f64::INFINITY;
    let mut weighted = true;
    let mut witnesses = BTreeMap::new();
    for j in 0..level.0 {
        let wj = Witness::from(&solver::minimize_on_gamma(model, transform, SparsityLevel(j), budget)?);
        let gap = (level.0 - j) as f64;
        hi = hi.min(snap(wj.value - gp, gp) / gap);
        weighted &= gp <= (wj.value + gap * gs) / (gap + 1.0) + SNAP_REL * (1.0 + gp.abs());
        witnesses.insert(format!("g_{j}"), wj);
    }
    let midpoint = (level.0 == 1).then(|| {
        let g0 = witnesses["g_0"].value;
        gp <= 0.5 * (gs + g0) + SNAP_REL * (1.0 + gp.abs())
    });
    witnesses.insert("g_star".to_string(), star);
    witnesses.insert("g_prime".to_string(), prime);
    let feasible = lo <= hi;
    let mut notes = Vec::new();
    if feasible {
        notes.push(format!(
            "for λ in [lo, hi] the restricted minimizer of level ≤ {} is a global minimizer of f \
             and f(x') = g(x') + λ·level(x')",
            level.0
        ));
    }
    Ok(LambdaInterval {
        rule,
        result_tag: rule.result_tag(),
        target_level: level,
        lo,
        hi,
        feasible,
        weighted_average_feasible: Some(weighted),
        midpoint_condition: midpoint,
        conservative: false,
        witnesses,
        notes,
    })
}

/// `[g(x_0) - g*, +inf)`: any such λ makes the minimizer `x_0` of `g` over
/// the null space of `M` a global minimizer of `f`, with minimum `g(x_0)`.
pub fn lambda_for_max_sparsity(
    model: &FidelityModel,
    transform: &Transform,
    budget: &EnumerationBudget,
) -> Result<LambdaInterval> {
    max_sparsity(model, transform, budget, LambdaRule::MaxSparsity)
}

/// `[g' - g*, min_j (g_j - g')/(l - j)]` for a target level `l ≥ 1`.
pub fn lambda_interval_for_level(
    model: &FidelityModel,
    transform: &Transform,
    level: SparsityLevel,
    budget: &EnumerationBudget,
) -> Result<LambdaInterval> {
    for_level(model, transform, level, budget, LambdaRule::Level)
}

/// The level-one interval `[g' - g*, g_0 - g']`, with the midpoint
/// condition `g' ≤ (g* + g_0)/2` reported.
pub fn lambda_interval_level_one(
    model: &FidelityModel,
    transform: &Transform,
    budget: &EnumerationBudget,
) -> Result<LambdaInterval> {
    for_level(model, transform, SparsityLevel(1), budget, LambdaRule::LevelOne)
}

/// `[0, min_j (g(x_j) - g*)/(l - j)]` where `l` is the level of the global
/// minimizer `x*` of `g` and `x_j` minimizes `g` over `B_j`. Inside it `x*`
/// remains a global minimizer of `f`.
pub fn lambda_preserving_global_min(
    model: &FidelityModel,
    transform: &Transform,
    budget: &EnumerationBudget,
) -> Result<LambdaInterval> {
    check_dims(model, transform)?;
    let star = global_witness(model, transform)?;
    let level = star.level;
    let gs = star.value;
    let mut witnesses = BTreeMap::new();
    let mut hi = f64::INFINITY;
    let mut conservative = false;
    let mut notes = Vec::new();
    for j in 0..level.0 {
        let wj = Witness::from(&solver::minimize_on_level(model, transform, SparsityLevel(j), budget)?);
        if !wj.attained {
            conservative = true;
            notes.push(format!("infimum over B_{j} is not attained; its value bounds hi"));
        }
        hi = hi.min(snap(wj.value - gs, gs) / (level.0 - j) as f64);
        witnesses.insert(format!("g_{j}"), wj);
    }
    if level.0 == 0 {
        notes.push("the global minimizer of g lies in the null space of M".into());
    }
    witnesses.insert("g_star".to_string(), star);
    let rule = LambdaRule::Preserve;
    Ok(LambdaInterval {
        rule,
        result_tag: rule.result_tag(),
        target_level: level,
        lo: 0.0,
        hi,
        feasible: hi >= 0.0,
        weighted_average_feasible: None,
        midpoint_condition: None,
        conservative,
        witnesses,
        notes,
    })
}

fn coupled_transform(model: &FidelityModel) -> Result<Transform> {
    if !model.is_coupled() {
        return Err(Error::Argument(format!(
            "coupled rules need a coupled model, got {}",
            model.kind()
        )));
    }
    Ok(Transform::identity(model.x_dim()))
}

/// `[g(0, y_0) - g(x*, y*), +inf)` for a coupled model, where `(0, y_0)`
/// minimizes `g` with `x = 0`.
pub fn coupled_lambda_for_max_sparsity(
    model: &FidelityModel,
    budget: &EnumerationBudget,
) -> Result<LambdaInterval> {
    let t = coupled_transform(model)?;
    let mut iv = max_sparsity(model, &t, budget, LambdaRule::CoupledMax)?;
    iv.notes.push(
        "for λ strictly above lo the pair (0, y_0) is claimed to be the unique global minimizer; \
         uniqueness in y_0 is not checked"
            .into(),
    );
    Ok(iv)
}

/// Coupled counterpart of [`lambda_interval_for_level`] over
/// `Omega_l × R^{d′}`. At `l = 1` the midpoint condition
/// `g(x', y') - g* ≤ g(0, y_0) - g(x', y')` is reported.
pub fn coupled_lambda_interval_for_level(
    model: &FidelityModel,
    level: SparsityLevel,
    budget: &EnumerationBudget,
) -> Result<LambdaInterval> {
    let t = coupled_transform(model)?;
    for_level(model, &t, level, budget, LambdaRule::CoupledLevel)
}

/// Dispatch by rule. `level` is required by the level rules and ignored
/// otherwise.
pub fn compute(
    rule: LambdaRule,
    model: &FidelityModel,
    transform: &Transform,
    level: Option<SparsityLevel>,
    budget: &EnumerationBudget,
) -> Result<LambdaInterval> {
    let need = || level.ok_or_else(|| Error::Argument(format!("rule {} needs a target level", rule.name())));
    match rule {
        LambdaRule::MaxSparsity => lambda_for_max_sparsity(model, transform, budget),
        LambdaRule::Level => lambda_interval_for_level(model, transform, need()?, budget),
        LambdaRule::LevelOne => lambda_interval_level_one(model, transform, budget),
        LambdaRule::Preserve => lambda_preserving_global_min(model, transform, budget),
        LambdaRule::CoupledMax => coupled_lambda_for_max_sparsity(model, budget),
        LambdaRule::CoupledLevel => coupled_lambda_interval_for_level(model, need()?, budget),
    }
}
