//! Support-pattern solvers and the brute-force global minimizer of `f`.
//!
//! Every point `x` lies in the pattern of its own image support, so the
//! minimum of `f` over `R^m` is the best of the `2^d` restricted minima
//! `min{g(x) : (Mx)_i = 0, i ∉ S}` scored with `λ · ||Mx||_0`. The same
//! enumeration restricted to `|S| = l` yields minima over `Gamma_l` and
//! infima over `B_l`.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fidelity::{FidelityModel, Point, RegularizedObjective};
use crate::restricted::{self, Restricted};
use crate::sampling;
use crate::sparsity::{SparsityLevel, SupportSet, ZeroTolerance};
use crate::transform::Transform;

/// Zero threshold used to read off achieved levels and supports.
pub const SOLVER_ZERO_TOL: ZeroTolerance = ZeroTolerance {
    absolute: 1e-10,
    relative: 1e-12,
};

/// Target for the KKT residual of exact restricted solves, relative to
/// `1 + ||b||`.
pub const KKT_TOL: f64 = 1e-8;

/// Scores within `TIE_REL * (1 + |best|)` of the best are tied.
pub const TIE_REL: f64 = 1e-12;

/// Limits for exhaustive enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct EnumerationBudget {
    pub max_dimension: usize,
    pub max_patterns: u64,
    /// 0 uses the global thread pool, 1 runs sequentially, n > 1 uses a
    /// dedicated pool of n threads.
    pub parallel_width: usize,
}

impl Default for EnumerationBudget {
    fn default() -> Self {
        EnumerationBudget {
            max_dimension: 20,
            max_patterns: 1 << 20,
            parallel_width: 0,
        }
    }
}

impl EnumerationBudget {
    pub fn sequential() -> Self {
        EnumerationBudget {
            parallel_width: 1,
            ..Self::default()
        }
    }

    fn check(&self, d: usize, patterns: u128, what: String) -> Result<()> {
        if d > self.max_dimension {
            return Err(Error::Budget {
                what: format!("{what} (dimension)"),
                required: d as u128,
                limit: self.max_dimension as u128,
            });
        }
        if patterns > self.max_patterns as u128 {
            return Err(Error::Budget {
                what,
                required: patterns,
                limit: self.max_patterns as u128,
            });
        }
        Ok(())
    }
}

/// `C(n, k)`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// The set a report minimizes over.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RequestedSet {
    /// A single pattern `{x : (Mx)_i = 0, i ∉ S}`.
    Support { support: SupportSet },
    /// `Gamma_l`, image sparsity at most `l`.
    Gamma { level: SparsityLevel },
    /// `B_l`, image sparsity exactly `l`.
    Level { level: SparsityLevel },
    /// The whole space, scored by `f`.
    Full,
}

/// Outcome of a restricted or global solve.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub minimizer: Point,
    pub value_g: f64,
    /// `value_g + lambda * achieved_level`.
    pub value_f: f64,
    pub lambda: f64,
    pub requested: RequestedSet,
    pub achieved_level: SparsityLevel,
    /// Support of `M x`, 1-based when serialized.
    pub achieved_support: SupportSet,
    /// False when the best point of an exact-level search fell into a lower
    /// stratum, i.e. only the infimum over `B_l` is reported.
    pub attained: bool,
    pub solver_tol: f64,
    pub kkt_residual: Option<f64>,
    pub iterations: usize,
    pub patterns_searched: u64,
    /// The minimizer came from a black-box callback.
    pub claimed: bool,
    /// Distinct minimizers of other patterns with a tied score.
    pub tied_minimizers: Vec<Point>,
}

fn check_model(model: &FidelityModel, transform: &Transform) -> Result<()> {
    if transform.preimage_dim() != model.x_dim() {
        return Err(Error::Dimension {
            what: "transform columns",
            expected: model.x_dim(),
            found: transform.preimage_dim(),
        });
    }
    transform.ensure_supported()
}

fn report_from(
    transform: &Transform,
    sol: Restricted,
    requested: RequestedSet,
    lambda: f64,
    patterns: u64,
    b_norm: f64,
) -> Result<SolveReport> {
    let support = transform.image_support(sol.point.x.as_slice(), SOLVER_ZERO_TOL)?;
    let level = SparsityLevel(support.len());
    let attained = match &requested {
        RequestedSet::Level { level: want } => *want == level,
        _ => true,
    };
    Ok(SolveReport {
        value_f: sol.value + lambda * level.0 as f64,
        value_g: sol.value,
        minimizer: sol.point,
        lambda,
        requested,
        achieved_level: level,
        achieved_support: support,
        attained,
        solver_tol: KKT_TOL * (1.0 + b_norm),
        kkt_residual: sol.kkt,
        iterations: sol.iterations,
        patterns_searched: patterns,
        claimed: sol.claimed,
        tied_minimizers: Vec::new(),
    })
}

fn data_norm(model: &FidelityModel) -> f64 {
    match model {
        FidelityModel::Quadratic { b, .. } => b.norm(),
        FidelityModel::CoupledQuadratic(c) | FidelityModel::CoupledCappedL1(c) => c.phi_c.norm(),
        _ => 0.0,
    }
}

/// Minimizes `g` subject to `(Mx)_i = 0` for every `i ∉ support`.
pub fn minimize_on_support(
    model: &FidelityModel,
    transform: &Transform,
    support: &SupportSet,
) -> Result<SolveReport> {
    check_model(model, transform)?;
    let sol = restricted::minimize(model, transform, support)?;
    report_from(
        transform,
        sol,
        RequestedSet::Support {
            support: support.clone(),
        },
        0.0,
        1,
        data_norm(model),
    )
}

#[derive(Debug, Clone, Copy)]
struct Summary {
    mask: u64,
    value_g: f64,
    level: usize,
}

/// Masks with exactly `k` of the low `d` bits set.
fn masks_of_size(d: usize, k: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(binomial(d, k) as usize);
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().fold(0u64, |m, &i| m | 1 << i));
        // advance to the next combination in lexicographic order
        let Some(i) = (0..k).rev().find(|&i| idx[i] < d - k + i) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn summarize(
    model: &FidelityModel,
    transform: &Transform,
    masks: &[u64],
    width: usize,
) -> Result<Vec<Summary>> {
    let d = transform.image_dim();
    let one = |&mask: &u64| -> Result<Summary> {
        let s = SupportSet::from_mask(mask, d);
        let sol = restricted::minimize(model, transform, &s)?;
        let level = transform
            .classify_preimage(sol.point.x.as_slice(), SOLVER_ZERO_TOL)?
            .0;
        Ok(Summary {
            mask,
            value_g: sol.value,
            level,
        })
    };
    let results: Vec<Result<Summary>> = match width {
        1 => masks.iter().map(one).collect(),
        0 => masks.par_iter().map(one).collect(),
        n => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Argument(format!("thread pool: {e}")))?
            .install(|| masks.par_iter().map(one).collect()),
    };
    results.into_iter().collect()
}

/// Picks the winner: minimal score, ties within [`TIE_REL`] resolved by
/// `key` ascending. Returns the winner and the other tied entries.
fn select<K: Ord>(
    summaries: &[Summary],
    score: impl Fn(&Summary) -> f64,
    key: impl Fn(&Summary) -> K,
) -> (Summary, Vec<Summary>) {
    let best = summaries
        .iter()
        .map(&score)
        .fold(f64::INFINITY, f64::min);
    let cut = best + TIE_REL * (1.0 + best.abs());
    let mut tied: Vec<Summary> = summaries.iter().copied().filter(|s| score(s) <= cut).collect();
    tied.sort_by_key(|s| key(s));
    let winner = tied.remove(0);
    (winner, tied)
}

fn finish(
    model: &FidelityModel,
    transform: &Transform,
    winner: Summary,
    tied: Vec<Summary>,
    requested: RequestedSet,
    lambda: f64,
    patterns: u64,
) -> Result<SolveReport> {
    let d = transform.image_dim();
    let sol = restricted::minimize(model, transform, &SupportSet::from_mask(winner.mask, d))?;
    let mut report = report_from(transform, sol, requested, lambda, patterns, data_norm(model))?;
    for t in tied.into_iter().take(8) {
        let other = restricted::minimize(model, transform, &SupportSet::from_mask(t.mask, d))?;
        let distinct = report.minimizer.distance(&other.point) > 1e-8
            && report
                .tied_minimizers
                .iter()
                .all(|p| p.distance(&other.point) > 1e-8);
        if distinct {
            report.tied_minimizers.push(other.point);
        }
    }
    Ok(report)
}

fn sized_search(
    model: &FidelityModel,
    transform: &Transform,
    level: SparsityLevel,
    budget: &EnumerationBudget,
) -> Result<(Vec<Summary>, u64)> {
    check_model(model, transform)?;
    let d = transform.image_dim();
    if level.0 > d {
        return Err(Error::Argument(format!("level {} out of range 0..={d}", level.0)));
    }
    let count = binomial(d, level.0);
    budget.check(d, count, format!("C({d}, {})", level.0))?;
    let masks = masks_of_size(d, level.0);
    Ok((summarize(model, transform, &masks, budget.parallel_width)?, count as u64))
}

/// Minimum of `g` over `Gamma_l`: best restricted minimum over all
/// supports of size `l`.
pub fn minimize_on_gamma(
    model: &FidelityModel,
    transform: &Transform,
    level: SparsityLevel,
    budget: &EnumerationBudget,
) -> Result<SolveReport> {
    let (summaries, count) = sized_search(model, transform, level, budget)?;
    let d = transform.image_dim();
    let (winner, tied) = select(&summaries, |s| s.value_g, |s| {
        (s.level, SupportSet::from_mask(s.mask, d))
    });
    finish(model, transform, winner, tied, RequestedSet::Gamma { level }, 0.0, count)
}

/// Infimum of `g` over `B_l`. `attained` is false when the best point
/// found sits in a lower stratum.
pub fn minimize_on_level(
    model: &FidelityModel,
    transform: &Transform,
    level: SparsityLevel,
    budget: &EnumerationBudget,
) -> Result<SolveReport> {
    let (summaries, count) = sized_search(model, transform, level, budget)?;
    let d = transform.image_dim();
    let (winner, tied) = select(&summaries, |s| s.value_g, |s| {
        (s.level != level.0, SupportSet::from_mask(s.mask, d))
    });
    finish(model, transform, winner, tied, RequestedSet::Level { level }, 0.0, count)
}

/// Exact global minimizer of `f` by enumerating all `2^d` patterns.
pub fn global_minimize_f(
    obj: &RegularizedObjective,
    budget: &EnumerationBudget,
) -> Result<SolveReport> {
    let (model, transform) = (&obj.model, &obj.transform);
    check_model(model, transform)?;
    let d = transform.image_dim();
    let count = if d >= 127 { u128::MAX } else { 1u128 << d };
    budget.check(d, count, format!("2^{d}"))?;
    let masks: Vec<u64> = (0..count as u64).collect();
    let summaries = summarize(model, transform, &masks, budget.parallel_width)?;
    let lambda = obj.lambda;
    let (winner, tied) = select(
        &summaries,
        |s| s.value_g + lambda * s.level as f64,
        |s| (s.level, SupportSet::from_mask(s.mask, d)),
    );
    finish(model, transform, winner, tied, RequestedSet::Full, lambda, count as u64)
}

/// Step sizes per axis in the deterministic part of [`local_min_probe`].
pub const STENCIL_SCALES: usize = 12;

/// Settings for [`local_min_probe`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeOptions {
    pub radius: f64,
    pub samples: usize,
    pub seed: u64,
    pub slack: f64,
}

impl ProbeOptions {
    pub fn new(radius: f64, samples: usize, seed: u64) -> Self {
        ProbeOptions {
            radius,
            samples,
            seed,
            slack: 1e-9,
        }
    }
}

/// Result of a sampled local-minimality check.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeOutcome {
    pub passed: bool,
    pub value_f: f64,
    /// Random samples drawn.
    pub samples: usize,
    /// Deterministic stencil points evaluated after them.
    pub stencil_points: usize,
    pub radius: f64,
    /// The most improving sample, when one beat the point.
    pub improving: Option<(Point, f64)>,
}

/// Samples `f` around `point` and reports whether any sample improves on
/// it by more than `slack`.
///
/// Even-numbered samples are uniform in the full ball. Odd-numbered ones
/// are uniform in the ball intersected with the point's own pattern
/// `{x : (Mx)_i = 0, i ∉ S(Mx)}` (with `y` free), where a generic ball
/// sample would never land. After the random samples come stencil points
/// `±radius·2^-s` (`s = 1..=STENCIL_SCALES`) along each axis of that
/// pattern subspace, which find descent where the improving region is a
/// thin sliver of the ball.
pub fn local_min_probe(
    obj: &RegularizedObjective,
    point: &Point,
    opts: &ProbeOptions,
) -> Result<ProbeOutcome> {
    if !(opts.radius > 0.0 && opts.radius.is_finite()) {
        return Err(Error::Argument(format!("probe radius must be positive, got {}", opts.radius)));
    }
    if opts.samples == 0 {
        return Err(Error::Argument("probe needs at least one sample".into()));
    }
    obj.model.check_point(point)?;
    let tol = SOLVER_ZERO_TOL;
    let base = obj.eval_f(point, tol)?;
    let support = obj.transform.image_support(point.x.as_slice(), tol)?;
    let basis = obj.transform.restriction_basis(&support)?;
    let (m, dy) = (point.x.len(), point.y.as_ref().map_or(0, |y| y.len()));
    let k = basis.ncols();
    let mut rng = sampling::seeded(opts.seed);
    let mut improving: Option<(Point, f64)> = None;
    let stencil = (0..k + dy).flat_map(|axis| {
        (1..=STENCIL_SCALES).flat_map(move |s| {
            let h = opts.radius * 0.5f64.powi(s as i32);
            [h, -h].map(|step| {
                let mut v = DVector::zeros(k + dy);
                v[axis] = step;
                v
            })
        })
    });
    let random = (0..opts.samples).map(|i| {
        if i % 2 == 0 {
            (sampling::uniform_in_ball(&mut rng, m + dy, opts.radius), false)
        } else {
            (sampling::uniform_in_ball(&mut rng, k + dy, opts.radius), true)
        }
    });
    for (v, in_pattern) in random.chain(stencil.map(|v| (v, true))) {
        let (dx, dyv) = if in_pattern {
            (&basis * v.rows(0, k), v.rows(k, dy).into_owned())
        } else {
            (v.rows(0, m).into_owned(), v.rows(m, dy).into_owned())
        };
        let trial = point.offset(&dx, point.y.as_ref().map(|_| &dyv));
        let f = obj.eval_f(&trial, tol)?;
        if f < base - opts.slack && improving.as_ref().is_none_or(|(_, best)| f < *best) {
            improving = Some((trial, f));
        }
    }
    Ok(ProbeOutcome {
        passed: improving.is_none(),
        value_f: base,
        samples: opts.samples,
        stencil_points: 2 * STENCIL_SCALES * (k + dy),
        radius: opts.radius,
        improving,
    })
}
