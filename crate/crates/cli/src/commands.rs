//! The subcommands, callable without going through argument parsing.

use std::time::Instant;

use serde::Serialize;
use terrace_core::solver::{self, SOLVER_ZERO_TOL};
use terrace_core::sparsity::{self, SupportSet};
use terrace_core::verify::{self, ClaimTag};
use terrace_core::{
    lambda, DVector, Error, LambdaInterval, LambdaRule, Point, RegularizedObjective, SolveReport,
    SparsityLevel, Transform, VerificationVerdict,
};

use crate::error::{CliError, CliResult};
use crate::problem::LoadedProblem;
use crate::report::{Report, Timings, ToolInfo};

pub const DEFAULT_PROBE_SAMPLES: usize = 1000;

/// Command-line values that take precedence over the problem file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub lambda: Option<f64>,
    pub level: Option<usize>,
    pub seed: Option<u64>,
    pub max_patterns: Option<u64>,
}

impl LoadedProblem {
    /// Folds the overrides into the problem so the report echoes what ran.
    pub fn apply(&mut self, o: &Overrides) -> CliResult<()> {
        if let Some(l) = o.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(CliError::Usage(format!("--lambda must be finite and nonnegative, got {l}")));
            }
            self.file.lambda = Some(l);
        }
        if let Some(level) = o.level {
            if level > self.transform.image_dim() {
                return Err(CliError::Usage(format!(
                    "--level {level} exceeds the transform dimension {}",
                    self.transform.image_dim()
                )));
            }
            self.file.target_level = Some(level);
        }
        if let Some(seed) = o.seed {
            self.file.seed = Some(seed);
        }
        if let Some(n) = o.max_patterns {
            let mut b = self.budget();
            b.max_patterns = n;
            self.file.budget = Some(b);
        }
        Ok(())
    }

    fn lambda(&self) -> CliResult<f64> {
        self.file
            .lambda
            .ok_or_else(|| CliError::Usage("lambda is required (problem file or --lambda)".into()))
    }

    fn objective(&self) -> CliResult<RegularizedObjective> {
        Ok(RegularizedObjective::new(
            self.model.clone(),
            self.transform.clone(),
            self.lambda()?,
        )?)
    }
}

fn report<T>(command: &'static str, problem: Option<&LoadedProblem>, result: T, start: Instant) -> Report<T> {
    Report {
        tool: ToolInfo::default(),
        command,
        problem: problem.map(|p| p.file.clone()),
        result,
        timings: Timings {
            wall_seconds: start.elapsed().as_secs_f64(),
        },
    }
}

/// Global minimization of `f` by support enumeration.
pub fn cmd_solve(problem: &LoadedProblem) -> CliResult<Report<SolveReport>> {
    let start = Instant::now();
    let obj = problem.objective()?;
    let r = solver::global_minimize_f(&obj, &problem.budget())?;
    Ok(report("solve", Some(problem), r, start))
}

/// The λ interval of a selection rule. An empty interval is a result.
pub fn cmd_lambda(problem: &LoadedProblem, rule: LambdaRule) -> CliResult<Report<LambdaInterval>> {
    let start = Instant::now();
    let level = problem.file.target_level.map(SparsityLevel);
    if rule.needs_level() && level.is_none() {
        return Err(CliError::Usage(format!(
            "rule {} needs a target level (problem file or --level)",
            rule.name()
        )));
    }
    let interval = lambda::compute(rule, &problem.model, &problem.transform, level, &problem.budget())?;
    Ok(report("lambda", Some(problem), interval, start))
}

#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub point: Vec<f64>,
    pub image: Vec<f64>,
    /// `j` with the point in `B_j`.
    pub level: SparsityLevel,
    /// Support of `Mx`, 1-based.
    pub support: SupportSet,
    /// Radius around `Mx` within which no nonzero of `Mx` is lost; absent
    /// when `Mx = 0`.
    pub sparsity_safety_radius: Option<f64>,
    /// Radius around `x` that stays in `B_d`; present only for level `d`.
    pub bd_openness_radius: Option<f64>,
    pub in_null_space: bool,
}

/// Sparsity stratum and safety radii of `point` under `transform`.
pub fn cmd_classify(
    point: &[f64],
    transform: &Transform,
    problem: Option<&LoadedProblem>,
) -> CliResult<Report<Classification>> {
    let start = Instant::now();
    if point.len() != transform.preimage_dim() {
        return Err(CliError::Usage(format!(
            "point has {} components but the transform expects {}",
            point.len(),
            transform.preimage_dim()
        )));
    }
    let image = transform.apply(point)?;
    let level = transform.classify_preimage(point, SOLVER_ZERO_TOL)?;
    let support = transform.image_support(point, SOLVER_ZERO_TOL)?;
    let safety = match sparsity::sparsity_safety_radius(image.as_slice(), SOLVER_ZERO_TOL) {
        Ok(r) => Some(r),
        Err(Error::UndefinedRadius) => None,
        Err(e) => return Err(e.into()),
    };
    let openness = if level.0 == transform.image_dim() {
        Some(transform.bd_openness_radius(point, SOLVER_ZERO_TOL)?)
    } else {
        None
    };
    let result = Classification {
        point: point.to_vec(),
        image: image.iter().copied().collect(),
        in_null_space: level.0 == 0,
        level,
        support,
        sparsity_safety_radius: safety,
        bd_openness_radius: openness,
    };
    Ok(report("classify", problem, result, start))
}

fn needs_seed(claim: ClaimTag) -> bool {
    matches!(claim, ClaimTag::DenseLocalNotGlobal | ClaimTag::LocalEquivalence)
}

/// Checks `claim` at `point`. Sampling claims need a seed.
pub fn cmd_verify(
    problem: &LoadedProblem,
    claim: ClaimTag,
    point: &Point,
    samples: usize,
) -> CliResult<Report<VerificationVerdict>> {
    let start = Instant::now();
    let lambda = problem.lambda()?;
    let seed = problem.file.seed;
    if needs_seed(claim) && seed.is_none() {
        return Err(CliError::Usage(format!(
            "claim {claim} samples around the point and needs a seed (problem file or --seed)"
        )));
    }
    let seed = seed.unwrap_or(0);
    let budget = problem.budget();
    let verdict = match claim {
        ClaimTag::LocalEquivalence => {
            if !problem.transform.is_identity() {
                return Err(CliError::Usage(format!("claim {claim} is stated for the identity transform")));
            }
            verify::check_local_equivalence(&problem.model, lambda, point, samples, seed)?
        }
        _ => {
            let obj = problem.objective()?;
            match claim {
                ClaimTag::NecessaryGammaMinimizer => {
                    verify::check_necessary_minimizer_of_g_on_gamma(&obj, point, &budget)?
                }
                ClaimTag::SparsityDichotomy => verify::check_sparsity_dichotomy(&obj, point, &budget)?,
                ClaimTag::GlobalOptimality => verify::check_global_optimality(&obj, point, &budget)?,
                ClaimTag::DenseLocalNotGlobal => {
                    verify::check_dense_local_not_global(&obj, point, &budget, samples, seed)?
                }
                ClaimTag::LocalEquivalence => unreachable!(),
            }
        }
    };
    Ok(report("verify", Some(problem), verdict, start))
}

/// Rectangle and resolution of a landscape grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
    pub steps: usize,
}

impl Grid {
    fn axis(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
        let n = (steps - 1) as f64;
        (0..steps).map(|i| lo + (hi - lo) * i as f64 / n).collect()
    }

    /// Grid nodes plus the coordinate axes and the points `(0,0)` and
    /// `(0,1)` where they fall inside the rectangle, sorted and deduplicated.
    pub fn points(&self) -> Vec<[f64; 2]> {
        let xs = Self::axis(self.xmin, self.xmax, self.steps);
        let ys = Self::axis(self.ymin, self.ymax, self.steps);
        let in_x = |v: f64| v >= self.xmin && v <= self.xmax;
        let in_y = |v: f64| v >= self.ymin && v <= self.ymax;
        let mut pts: Vec<[f64; 2]> = xs.iter().flat_map(|&x| ys.iter().map(move |&y| [x, y])).collect();
        if in_y(0.0) {
            pts.extend(xs.iter().map(|&x| [x, 0.0]));
        }
        if in_x(0.0) {
            pts.extend(ys.iter().map(|&y| [0.0, y]));
        }
        for p in [[0.0, 0.0], [0.0, 1.0]] {
            if in_x(p[0]) && in_y(p[1]) {
                pts.push(p);
            }
        }
        // -0.0 and 0.0 are the same node.
        for p in pts.iter_mut() {
            for v in p.iter_mut() {
                if *v == 0.0 {
                    *v = 0.0;
                }
            }
        }
        pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        pts.dedup();
        pts
    }
}

impl std::str::FromStr for Grid {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let bad = || CliError::Usage(format!("--grid expects xmin,xmax,ymin,ymax,steps; got {s:?}"));
        if parts.len() != 5 {
            return Err(bad());
        }
        let mut v = [0.0f64; 4];
        for (slot, p) in v.iter_mut().zip(&parts) {
            *slot = p.parse().map_err(|_| bad())?;
        }
        let steps: usize = parts[4].parse().map_err(|_| bad())?;
        if steps < 2 || !v.iter().all(|x| x.is_finite()) || v[0] > v[1] || v[2] > v[3] {
            return Err(CliError::Usage(format!(
                "--grid needs finite bounds with min ≤ max and at least 2 steps; got {s:?}"
            )));
        }
        Ok(Grid {
            xmin: v[0],
            xmax: v[1],
            ymin: v[2],
            ymax: v[3],
            steps,
        })
    }
}

/// CSV rows `x1,x2,g,f,level` over the grid, with a header line.
pub fn cmd_landscape(problem: &LoadedProblem, grid: &Grid) -> CliResult<String> {
    let obj = problem.objective()?;
    if problem.model.is_coupled() || problem.model.x_dim() != 2 || problem.transform.image_dim() != 2 {
        return Err(Error::Unsupported(format!(
            "landscapes are drawn for planar uncoupled problems; this one is {} with x in R^{} and d = {}",
            problem.model.kind(),
            problem.model.x_dim(),
            problem.transform.image_dim()
        ))
        .into());
    }
    let mut out = String::from("x1,x2,g,f,level\n");
    for [x1, x2] in grid.points() {
        let p = Point::new(DVector::from_column_slice(&[x1, x2]));
        let g = obj.eval_g(&p)?;
        let level = obj.level(&p, SOLVER_ZERO_TOL)?.0;
        let f = g + obj.lambda * level as f64;
        out.push_str(&format!("{x1},{x2},{g},{f},{level}\n"));
    }
    Ok(out)
}

/// Parses `x1,x2,...` or `x1,...;y1,...` for coupled pairs.
pub fn parse_point(s: &str) -> CliResult<Point> {
    let parse = |part: &str| -> CliResult<DVector<f64>> {
        let v: Result<Vec<f64>, _> = part.split(',').map(|t| t.trim().parse::<f64>()).collect();
        let v = v.map_err(|_| CliError::Usage(format!("cannot read point {s:?}")))?;
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(CliError::Usage(format!("cannot read point {s:?}")));
        }
        Ok(DVector::from_vec(v))
    };
    match s.split_once(';') {
        Some((x, y)) => Ok(Point::pair(parse(x)?, parse(y)?)),
        None => Ok(Point::new(parse(s)?)),
    }
}

/// Reads `--point` from inline text, or from a file whose first line is
/// `x` and optional second line is `y`.
pub fn read_point(arg: &str) -> CliResult<Point> {
    let path = std::path::Path::new(arg);
    if !path.is_file() {
        return parse_point(arg);
    }
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let lines: Vec<&str> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect();
    match lines.as_slice() {
        [x] => parse_point(x),
        [x, y] => parse_point(&format!("{x};{y}")),
        _ => Err(CliError::Usage(format!("{arg}: expected one or two lines of values"))),
    }
}
