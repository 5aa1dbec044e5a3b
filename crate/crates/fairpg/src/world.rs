//! Exact disparity computations on enumerable joint distributions.
//!
//! A [`DiscreteWorld`] is a finite joint distribution over (X, A, Y) with an
//! attached classifier map, small enough that every expectation is an exact
//! sum. This module computes equalized-odds disparities exactly, applies the
//! label-assignment strategies as distribution transforms (hard argmax
//! pseudo-labeling, confidence-thresholded randomization, and region
//! randomization), and verifies two structural properties of those
//! transforms by enumeration:
//!
//! - **influence dominance** ([`verify_influence_dominance`]): inside the
//!   confidence band, randomizing a point's group posterior estimates that
//!   point's disparity influence strictly better than hard argmax labeling;
//! - **region invariance** ([`verify_region_invariance`]): replacing the
//!   posterior with the class-conditional group marginal on a region removes
//!   exactly that region's contribution to the disparity, leaving the
//!   labeled region's disparity unchanged.
//!
//! Estimated influences are always normalized by the *original* group
//! marginals `P(A|Y)`, which is what makes the region identity exact; the
//! transform constructors themselves return proper renormalized worlds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Finite joint distribution over (X, A, Y) plus a classifier map `x -> y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteWorld {
    nx: usize,
    na: usize,
    ny: usize,
    /// Flat row-major `[x][a][y]`, non-negative, summing to 1.
    joint: Vec<f64>,
    /// `classifier[x]` is the predicted class for point `x`.
    classifier: Vec<usize>,
}

/// Both reductions of the equalized-odds disparity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disparity {
    /// Maximum over classes of the worst pairwise group gap.
    pub max: f64,
    /// Average over classes of the worst pairwise group gap.
    pub avg: f64,
}

impl DiscreteWorld {
    pub fn new(
        nx: usize,
        na: usize,
        ny: usize,
        joint: Vec<f64>,
        classifier: Vec<usize>,
    ) -> Result<Self> {
        if nx == 0 || na == 0 || ny == 0 {
            return Err(Error::InvalidDistribution("zero-sized axis".into()));
        }
        if joint.len() != nx * na * ny {
            return Err(Error::DimensionMismatch {
                what: "joint",
                expected: nx * na * ny,
                got: joint.len(),
            });
        }
        if classifier.len() != nx {
            return Err(Error::DimensionMismatch {
                what: "classifier",
                expected: nx,
                got: classifier.len(),
            });
        }
        if let Some(&bad) = classifier.iter().find(|&&y| y >= ny) {
            return Err(Error::InvalidDistribution(format!(
                "classifier output {bad} out of range 0..{ny}"
            )));
        }
        if joint.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidDistribution(
                "joint entries must be finite and non-negative".into(),
            ));
        }
        let total: f64 = joint.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!(
                "joint sums to {total}, expected 1"
            )));
        }
        Ok(Self {
            nx,
            na,
            ny,
            joint,
            classifier,
        })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn na(&self) -> usize {
        self.na
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn classifier(&self) -> &[usize] {
        &self.classifier
    }

    /// `P(X = x, A = a, Y = y)`.
    pub fn mass(&self, x: usize, a: usize, y: usize) -> f64 {
        self.joint[(x * self.na + a) * self.ny + y]
    }

    /// `P(A = a, Y = y)`.
    pub fn mass_ay(&self, a: usize, y: usize) -> f64 {
        (0..self.nx).map(|x| self.mass(x, a, y)).sum()
    }

    /// `P(X = x, Y = y)`.
    pub fn mass_xy(&self, x: usize, y: usize) -> f64 {
        (0..self.na).map(|a| self.mass(x, a, y)).sum()
    }

    /// `P(Y = y)`.
    pub fn mass_y(&self, y: usize) -> f64 {
        (0..self.nx).map(|x| self.mass_xy(x, y)).sum()
    }

    /// Posterior `P(A | X = x, Y = y)`; `None` when `P(x, y) = 0`.
    pub fn posterior(&self, x: usize, y: usize) -> Option<Vec<f64>> {
        let pxy = self.mass_xy(x, y);
        if pxy <= 0.0 {
            return None;
        }
        Some((0..self.na).map(|a| self.mass(x, a, y) / pxy).collect())
    }

    /// Class-conditional group marginal `P(A | Y = y)`; `None` when `P(y) = 0`.
    pub fn group_marginal(&self, y: usize) -> Option<Vec<f64>> {
        let py = self.mass_y(y);
        if py <= 0.0 {
            return None;
        }
        Some((0..self.na).map(|a| self.mass_ay(a, y) / py).collect())
    }

    /// Rebuilds a world from a modified posterior field, keeping `P(X, Y)`.
    ///
    /// `field(x, y)` returns the replacement `P(A | X = x, Y = y)`; cells
    /// with `P(x, y) = 0` stay zero. The result is a proper world whose
    /// conditionals renormalize against its own recomputed marginals.
    fn with_posteriors(&self, field: impl Fn(usize, usize) -> Option<Vec<f64>>) -> Result<Self> {
        let mut joint = vec![0.0; self.joint.len()];
        for x in 0..self.nx {
            for y in 0..self.ny {
                let pxy = self.mass_xy(x, y);
                if pxy <= 0.0 {
                    continue;
                }
                let q = field(x, y).ok_or_else(|| {
                    Error::InvalidDistribution(format!(
                        "posterior field undefined at x={x}, y={y}"
                    ))
                })?;
                for a in 0..self.na {
                    joint[(x * self.na + a) * self.ny + y] = q[a] * pxy;
                }
            }
        }
        // Sums of q * P(x,y) reproduce 1 up to rounding; rescale to keep the
        // constructor's 1e-12 validity gate meaningful.
        let total: f64 = joint.iter().sum();
        for v in &mut joint {
            *v /= total;
        }
        DiscreteWorld::new(self.nx, self.na, self.ny, joint, self.classifier.clone())
    }
}

fn reduce_gaps(per_class: &[Option<f64>]) -> Result<Disparity> {
    if per_class.iter().all(Option::is_none) {
        return Err(Error::NoComparableClass);
    }
    let gaps: Vec<f64> = per_class.iter().map(|g| g.unwrap_or(0.0)).collect();
    Ok(Disparity {
        max: gaps.iter().cloned().fold(0.0, f64::max),
        avg: gaps.iter().sum::<f64>() / gaps.len() as f64,
    })
}

/// Exact equalized-odds disparity of the world's classifier.
///
/// `acc(a, y) = P(f(X) = y | A = a, Y = y)` by direct summation; classes with
/// fewer than two groups of positive mass contribute 0, and it is an error
/// when no class is comparable.
pub fn exact_deo(world: &DiscreteWorld) -> Result<Disparity> {
    let mut per_class = vec![None; world.ny()];
    for (y, slot) in per_class.iter_mut().enumerate() {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut supported = 0;
        for a in 0..world.na() {
            let pay = world.mass_ay(a, y);
            if pay <= 0.0 {
                continue;
            }
            supported += 1;
            let hit: f64 = (0..world.nx())
                .filter(|&x| world.classifier()[x] == y)
                .map(|x| world.mass(x, a, y))
                .sum();
            let acc = hit / pay;
            lo = lo.min(acc);
            hi = hi.max(acc);
        }
        if supported >= 2 {
            *slot = Some(hi - lo);
        }
    }
    reduce_gaps(&per_class)
}

/// Per-point influence on the disparity, for binary-group worlds:
/// `delta[x][y] = P(X=x | A=1, Y=y) - P(X=x | A=0, Y=y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceTable {
    pub delta: Vec<Vec<f64>>,
}

/// Computes the influence table; requires binary groups with positive
/// `P(A = a, Y = y)` mass for every class and both groups.
pub fn influence_table(world: &DiscreteWorld) -> Result<InfluenceTable> {
    if world.na() != 2 {
        return Err(Error::InvalidDistribution(
            "influence table requires binary groups".into(),
        ));
    }
    let mut delta = vec![vec![0.0; world.ny()]; world.nx()];
    for y in 0..world.ny() {
        let p0 = world.mass_ay(0, y);
        let p1 = world.mass_ay(1, y);
        if p0 <= 0.0 || p1 <= 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "class {y} is missing group mass (P(0,y)={p0}, P(1,y)={p1})"
            )));
        }
        for (x, row) in delta.iter_mut().enumerate() {
            row[y] = world.mass(x, 1, y) / p1 - world.mass(x, 0, y) / p0;
        }
    }
    Ok(InfluenceTable { delta })
}

/// Hard argmax pseudo-labeling as a distribution transform (binary groups):
/// posteriors above one half harden to 1, the rest (including exactly one
/// half) to 0.
pub fn harden_posteriors(world: &DiscreteWorld) -> Result<DiscreteWorld> {
    require_binary(world)?;
    world.with_posteriors(|x, y| {
        let q = world.posterior(x, y)?;
        Some(if q[1] > 0.5 {
            vec![0.0, 1.0]
        } else {
            vec![1.0, 0.0]
        })
    })
}

/// Confidence-thresholded randomization as a distribution transform (binary
/// groups). Per class threshold `taus[y]` in `[0.5, 1]`: posteriors with
/// `P(1|x,y) >= tau` harden to 1, `<= 1 - tau` harden to 0, and the interior
/// band is replaced by the class-conditional marginal `P(A|y)`.
pub fn randomize_low_confidence(world: &DiscreteWorld, taus: &[f64]) -> Result<DiscreteWorld> {
    require_binary(world)?;
    if taus.len() != world.ny() {
        return Err(Error::DimensionMismatch {
            what: "taus",
            expected: world.ny(),
            got: taus.len(),
        });
    }
    if taus.iter().any(|&t| !(0.5..=1.0).contains(&t)) {
        return Err(Error::InvalidConfig(
            "confidence thresholds must lie in [0.5, 1]".into(),
        ));
    }
    world.with_posteriors(|x, y| {
        let q = world.posterior(x, y)?;
        let tau = taus[y];
        Some(if q[1] >= tau {
            vec![0.0, 1.0]
        } else if q[1] <= 1.0 - tau {
            vec![1.0, 0.0]
        } else {
            world.group_marginal(y).expect("P(x,y) > 0 implies P(y) > 0")
        })
    })
}

/// Region randomization as a distribution transform: posteriors are kept on
/// the labeled region and replaced by `P(A|y)` on `unlabeled` points.
pub fn randomize_region(world: &DiscreteWorld, unlabeled: &[usize]) -> Result<DiscreteWorld> {
    let mut is_unlabeled = vec![false; world.nx()];
    for &x in unlabeled {
        if x >= world.nx() {
            return Err(Error::InvalidConfig(format!(
                "unlabeled point {x} out of range 0..{}",
                world.nx()
            )));
        }
        is_unlabeled[x] = true;
    }
    world.with_posteriors(|x, y| {
        if is_unlabeled[x] {
            world.group_marginal(y)
        } else {
            world.posterior(x, y)
        }
    })
}

fn require_binary(world: &DiscreteWorld) -> Result<()> {
    if world.na() != 2 {
        return Err(Error::InvalidDistribution(
            "transform requires binary groups".into(),
        ));
    }
    Ok(())
}

/// Disparity of a modified posterior field, normalized by the original
/// group marginals.
///
/// `S(a, y) = sum over x in the subset with f(x) = y of
/// q(a|x,y) P(x|y) / P(a|y)`, with gaps and reductions as in [`exact_deo`].
/// With the original posteriors and the full point set this reproduces
/// `exact_deo`; it is the estimator under which the region-randomization
/// identity is exact.
fn influence_deo(
    world: &DiscreteWorld,
    field: impl Fn(usize, usize) -> Option<Vec<f64>>,
    include: impl Fn(usize) -> bool,
) -> Result<Disparity> {
    let mut per_class = vec![None; world.ny()];
    for (y, slot) in per_class.iter_mut().enumerate() {
        let py = world.mass_y(y);
        if py <= 0.0 {
            continue;
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut supported = 0;
        for a in 0..world.na() {
            let pay = world.mass_ay(a, y);
            if pay <= 0.0 {
                continue;
            }
            supported += 1;
            let mut s = 0.0;
            for x in 0..world.nx() {
                if !include(x) || world.classifier()[x] != y {
                    continue;
                }
                let pxy = world.mass_xy(x, y);
                if pxy <= 0.0 {
                    continue;
                }
                let q = field(x, y).expect("field defined wherever P(x,y) > 0");
                s += q[a] * pxy / pay;
            }
            lo = lo.min(s);
            hi = hi.max(s);
        }
        if supported >= 2 {
            *slot = Some(hi - lo);
        }
    }
    reduce_gaps(&per_class)
}

/// Result of the region-invariance check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionInvariance {
    /// Disparity carried by the labeled region under the original posteriors.
    pub before: Disparity,
    /// Disparity of the region-randomized posterior field over all points.
    pub after: Disparity,
    /// `max(|before.max - after.max|, |before.avg - after.avg|)`.
    pub max_abs_diff: f64,
}

/// Checks that randomizing the group posterior on `unlabeled` points removes
/// exactly their disparity contribution.
///
/// Both sides normalize by the original `P(A|Y)`: the unlabeled points then
/// contribute the same amount to every group's sum, so the gaps — and both
/// disparity reductions — are identical up to floating-point rounding.
pub fn verify_region_invariance(
    world: &DiscreteWorld,
    unlabeled: &[usize],
) -> Result<RegionInvariance> {
    let mut is_unlabeled = vec![false; world.nx()];
    for &x in unlabeled {
        if x >= world.nx() {
            return Err(Error::InvalidConfig(format!(
                "unlabeled point {x} out of range 0..{}",
                world.nx()
            )));
        }
        is_unlabeled[x] = true;
    }
    let before = influence_deo(
        world,
        |x, y| world.posterior(x, y),
        |x| !is_unlabeled[x],
    )?;
    let after = influence_deo(
        world,
        |x, y| {
            if is_unlabeled[x] {
                world.group_marginal(y)
            } else {
                world.posterior(x, y)
            }
        },
        |_| true,
    )?;
    let max_abs_diff = (before.max - after.max)
        .abs()
        .max((before.avg - after.avg).abs());
    Ok(RegionInvariance {
        before,
        after,
        max_abs_diff,
    })
}

/// One checked point in the influence-dominance report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominancePoint {
    pub x: usize,
    pub y: usize,
    /// Posterior `P(A=1 | x, y)`.
    pub posterior: f64,
    /// `|influence - hardened estimate| - |influence - randomized estimate|`;
    /// positive means randomization is the strictly better estimate.
    pub margin: f64,
}

/// Result of the influence-dominance check on one binary-group world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    /// Per-class thresholds `(P(A=1|y) + 1) / 2`.
    pub taus: Vec<f64>,
    /// Points checked, with their margins.
    pub checked: Vec<DominancePoint>,
    /// Points violating the strict inequality (margin <= 1e-12).
    pub violations: Vec<DominancePoint>,
    /// Points inside the threshold band but below the guaranteed-dominance
    /// band `(max(P(A=0|y), P(A=1|y)) / 2, tau_y)`; reported, not checked.
    pub outside_guarantee: usize,
    /// Points whose posterior is exactly one half (hardening boundary).
    pub boundary_half: usize,
    /// True when no point qualified at all.
    pub vacuous: bool,
}

/// Margin below which the strict inequality is treated as violated.
pub const DOMINANCE_MARGIN: f64 = 1e-12;

/// Checks, point by point, that the confidence-band randomization estimates
/// the disparity influence strictly better than hard argmax labeling.
///
/// For each class the threshold is `tau_y = (P(A=1|y) + 1) / 2`. Qualifying
/// points have `f(x) = 1`, positive `P(x|y)`, and a posterior strictly inside
/// the guaranteed band `(max(P(A=0|y), P(A=1|y)) / 2, tau_y)`; the band's
/// lower end is where the hardened-to-0 side of the argument takes over, by
/// the same case analysis that yields `tau_y` on the hardened-to-1 side.
/// Points between `1 - tau_y` and that lower end fall outside the guarantee
/// (hard labeling can genuinely be the closer estimate there when the groups
/// are imbalanced) and are counted in `outside_guarantee` instead.
pub fn verify_influence_dominance(world: &DiscreteWorld) -> Result<DominanceReport> {
    require_binary(world)?;
    let actual = influence_table(world)?;
    let taus: Vec<f64> = (0..world.ny())
        .map(|y| {
            let marg = world.group_marginal(y).expect("group mass checked above");
            (marg[1] + 1.0) / 2.0
        })
        .collect();

    let mut report = DominanceReport {
        taus: taus.clone(),
        checked: Vec::new(),
        violations: Vec::new(),
        outside_guarantee: 0,
        boundary_half: 0,
        vacuous: true,
    };

    for y in 0..world.ny() {
        let marg = world.group_marginal(y).expect("group mass checked above");
        let (p0, p1) = (marg[0], marg[1]);
        let tau = taus[y];
        let lower = p0.max(p1) / 2.0;
        for x in 0..world.nx() {
            if world.classifier()[x] != 1 {
                continue;
            }
            let pxy = world.mass_xy(x, y);
            if pxy <= 0.0 {
                continue;
            }
            let post = world.posterior(x, y).expect("P(x,y) > 0")[1];
            if post <= 1.0 - tau || post >= tau {
                continue;
            }
            report.vacuous = false;
            if post == 0.5 {
                report.boundary_half += 1;
            }
            if post <= lower {
                report.outside_guarantee += 1;
                continue;
            }
            let px_given_y = pxy / world.mass_y(y);
            // Influence estimates under hardening / randomization, both
            // normalized by the original group marginals.
            let hardened = if post > 0.5 {
                px_given_y / p1
            } else {
                -px_given_y / p0
            };
            let randomized = 0.0;
            let truth = actual.delta[x][y];
            let margin = (truth - hardened).abs() - (truth - randomized).abs();
            let point = DominancePoint {
                x,
                y,
                posterior: post,
                margin,
            };
            report.checked.push(point);
            if margin <= DOMINANCE_MARGIN {
                report.violations.push(point);
            }
        }
    }
    Ok(report)
}

/// Seeded Dirichlet-style world generation for enumeration suites.
///
/// Cell masses are i.i.d. exponential draws normalized to sum 1, resampled
/// until every `(a, y)` pair carries at least `1e-3` mass; for binary-group
/// worlds, posteriors within `1e-9` of one half are nudged off the hardening
/// boundary. The classifier map is uniform over classes.
pub fn random_world(nx: usize, na: usize, ny: usize, rng: &mut SeededRng) -> DiscreteWorld {
    loop {
        let mut joint: Vec<f64> = (0..nx * na * ny)
            .map(|_| -rng.uniform().max(1e-12).ln())
            .collect();
        let total: f64 = joint.iter().sum();
        for v in &mut joint {
            *v /= total;
        }
        let classifier: Vec<usize> = (0..nx).map(|_| rng.index(ny)).collect();
        if na == 2 {
            nudge_half_posteriors(nx, ny, &mut joint);
        }
        let total: f64 = joint.iter().sum();
        for v in &mut joint {
            *v /= total;
        }
        let world = match DiscreteWorld::new(nx, na, ny, joint, classifier) {
            Ok(w) => w,
            Err(_) => continue,
        };
        let well_massed = (0..na).all(|a| (0..ny).all(|y| world.mass_ay(a, y) >= 1e-3));
        if well_massed {
            return world;
        }
    }
}

fn nudge_half_posteriors(nx: usize, ny: usize, joint: &mut [f64]) {
    let na = 2;
    for x in 0..nx {
        for y in 0..ny {
            let i0 = (x * na) * ny + y;
            let i1 = (x * na + 1) * ny + y;
            let pxy = joint[i0] + joint[i1];
            if pxy <= 0.0 {
                continue;
            }
            if (joint[i1] / pxy - 0.5).abs() < 1e-9 {
                joint[i1] *= 1.0 + 1e-6;
            }
        }
    }
}

/// Uniform random subset of points, used as the unlabeled region.
pub fn random_partition(nx: usize, rng: &mut SeededRng) -> Vec<usize> {
    (0..nx).filter(|_| rng.uniform() < 0.5).collect()
}

/// Aggregate result of running both enumeration checks over seeded worlds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnumerationSummary {
    pub seed: u64,
    pub invariance_worlds: usize,
    /// Worst `max_abs_diff` seen across all region-invariance checks.
    pub invariance_worst_diff: f64,
    pub invariance_failures: usize,
    pub dominance_worlds: usize,
    pub dominance_checked_points: usize,
    pub dominance_vacuous_worlds: usize,
    pub dominance_violations: usize,
    /// Smallest dominance margin across all checked points (infinite when
    /// nothing qualified).
    pub dominance_min_margin: f64,
    pub dominance_outside_guarantee: usize,
    pub pass: bool,
}

/// Tolerance for the region-invariance identity.
pub const INVARIANCE_TOLERANCE: f64 = 1e-10;

/// Runs `count` region-invariance worlds (group count up to `max_na`) and
/// `count_binary` influence-dominance worlds, all derived from `seed`.
pub fn run_enumeration_suite(
    count: usize,
    count_binary: usize,
    max_nx: usize,
    max_na: usize,
    max_ny: usize,
    seed: u64,
) -> EnumerationSummary {
    let root = SeededRng::new(seed);
    let mut summary = EnumerationSummary {
        seed,
        invariance_worlds: count,
        invariance_worst_diff: 0.0,
        invariance_failures: 0,
        dominance_worlds: count_binary,
        dominance_checked_points: 0,
        dominance_vacuous_worlds: 0,
        dominance_violations: 0,
        dominance_min_margin: f64::INFINITY,
        dominance_outside_guarantee: 0,
        pass: false,
    };

    let mut rng = root.derive("region-invariance");
    for _ in 0..count {
        let nx = 2 + rng.index(max_nx.saturating_sub(1).max(1));
        let na = 2 + rng.index(max_na.saturating_sub(1).max(1));
        let ny = 1 + rng.index(max_ny.max(1));
        let world = random_world(nx, na, ny, &mut rng);
        let unlabeled = random_partition(nx, &mut rng);
        match verify_region_invariance(&world, &unlabeled) {
            Ok(inv) => {
                summary.invariance_worst_diff = summary.invariance_worst_diff.max(inv.max_abs_diff);
                if inv.max_abs_diff >= INVARIANCE_TOLERANCE {
                    summary.invariance_failures += 1;
                }
            }
            Err(_) => summary.invariance_failures += 1,
        }
    }

    let mut rng = root.derive("influence-dominance");
    for _ in 0..count_binary {
        let nx = 2 + rng.index(max_nx.saturating_sub(1).max(1));
        let ny = 2 + rng.index((max_ny.max(2)) - 1);
        let world = random_world(nx, 2, ny, &mut rng);
        match verify_influence_dominance(&world) {
            Ok(report) => {
                if report.vacuous {
                    summary.dominance_vacuous_worlds += 1;
                }
                summary.dominance_checked_points += report.checked.len();
                summary.dominance_violations += report.violations.len();
                summary.dominance_outside_guarantee += report.outside_guarantee;
                for p in &report.checked {
                    summary.dominance_min_margin = summary.dominance_min_margin.min(p.margin);
                }
            }
            Err(_) => summary.dominance_violations += 1,
        }
    }

    summary.pass = summary.invariance_failures == 0
        && summary.invariance_worst_diff < INVARIANCE_TOLERANCE
        && summary.dominance_violations == 0;
    summary
}
