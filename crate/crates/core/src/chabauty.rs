//! Chabauty distances between closed subgroups.
//!
//! Ultrametric ambients use the local Hausdorff formula
//!
//! ```text
//! d(A,B) = min(1, inf{ε : A ∩ B̄(0,1/ε) ⊆ N_ε(B) and B ∩ B̄(0,1/ε) ⊆ N_ε(A)})
//! ```
//!
//! with closed balls, evaluated on the grid `ε = p^{-j}`, `0 <= j <= K`. The check
//! is monotone in `j`, so the answer is a bracket between the last passing and
//! the first failing grid point; the passing end is the reported value.
//! ℤ, ℝ and the circle use coordinates on their subgroup spaces instead.

use num_traits::{Signed, Zero};
use rayon::prelude::*;

use crate::error::{ClabError, Result};
use crate::interval::{self, Interval};
use crate::module::{Frame, QpModule};
use crate::padic::{fmt_p_power, fmt_rational, p_power, valuation, ExactRational as Q, Valuation};
use crate::subgroups::{
    coset_reps, equal, AmbientGroup, CircleSubgroup, ClosedSubgroup, Element, QpSubgroup,
    RealSubgroup, ShiftSubgroup,
};

/// Convention id recorded in reports.
pub const METRIC_FORMULA: &str = "local-hausdorff/closed-balls/non-strict/cap-1/grid-upper-v1";
/// Convention id for the coordinate metrics on Sub_Z, Sub_R and Sub_circle.
pub const COORDINATE_FORMULA: &str = "Z:|1/m-1/n|;R:|atan(a)-atan(b)|;circle:|1/m-1/n|-v1";

/// How the ε-neighbourhood condition is checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Closed forms for ℚₚ, products and shift subgroups; generators for modules.
    Auto,
    /// Test a ℤₚ-basis of `A ∩ B̄(0,1/ε)`; enough because `N_ε(B)` is a subgroup.
    Generators,
    /// Test every coset representative of `A ∩ B̄(0,1/ε)` over `A ∩ B̄(0,ε)`.
    Cosets,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetricConfig {
    /// Grid depth `K`.
    pub precision: u32,
    /// Cap on the number of coset representatives per check.
    pub budget: usize,
    pub route: Route,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig { precision: 24, budget: 1 << 16, route: Route::Auto }
    }
}

impl MetricConfig {
    pub fn with_precision(precision: u32) -> Self {
        MetricConfig { precision, ..Default::default() }
    }

    pub fn with_route(self, route: Route) -> Self {
        MetricConfig { route, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceKind {
    /// `lower == upper` is the exact value.
    Exact,
    /// Grid bracket: `lower` fails, `upper` passes.
    Grid,
    /// Interval enclosure of a transcendental value.
    Enclosure,
}

/// A Chabauty distance: exact, a grid bracket, or an enclosure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Distance {
    pub lower: Q,
    pub upper: Q,
    pub kind: DistanceKind,
    /// Base of the grid for p-power formatting, when there is one.
    pub base: Option<u64>,
}

impl Distance {
    pub fn exact(v: Q) -> Self {
        Distance { lower: v.clone(), upper: v, kind: DistanceKind::Exact, base: None }
    }

    pub fn zero() -> Self {
        Distance::exact(Q::zero())
    }

    fn grid(p: u64, lower: Q, upper: Q) -> Self {
        Distance { lower, upper, kind: DistanceKind::Grid, base: Some(p) }
    }

    pub fn enclosure(iv: Interval) -> Self {
        Distance { lower: iv.lo, upper: iv.hi, kind: DistanceKind::Enclosure, base: None }
    }

    /// The canonical value used for comparisons and reports.
    pub fn value(&self) -> &Q {
        &self.upper
    }

    pub fn is_zero(&self) -> bool {
        self.upper.is_zero()
    }

    /// Every point of the bracket lies strictly below `x`.
    pub fn below(&self, x: &Q) -> bool {
        &self.upper < x
    }

    /// The reported value lies strictly above `x` (for enclosures, the whole interval).
    pub fn above(&self, x: &Q) -> bool {
        match self.kind {
            DistanceKind::Enclosure => &self.lower > x,
            _ => &self.upper > x,
        }
    }

    /// Human/JSON form of a single endpoint.
    pub fn fmt_endpoint(&self, x: &Q) -> String {
        match self.base {
            Some(p) if !x.is_zero() => fmt_p_power(x, p),
            _ => fmt_rational(x),
        }
    }

    /// Max of two distances (the product metric).
    pub fn max(self, other: Distance) -> Distance {
        let kind = match (self.kind, other.kind) {
            (DistanceKind::Exact, DistanceKind::Exact) => DistanceKind::Exact,
            (DistanceKind::Enclosure, _) | (_, DistanceKind::Enclosure) => DistanceKind::Enclosure,
            _ => DistanceKind::Grid,
        };
        let base = if self.upper >= other.upper { self.base.or(other.base) } else { other.base.or(self.base) };
        let lower = self.lower.max(other.lower);
        let upper = self.upper.max(other.upper);
        let kind = if kind == DistanceKind::Grid && lower == upper { DistanceKind::Exact } else { kind };
        Distance { lower, upper, kind, base }
    }
}

fn qp_norm(x: &Q, p: u64) -> Q {
    match valuation(x, p) {
        Valuation::Infinite => Q::zero(),
        Valuation::Finite(v) => p_power(p, -v),
    }
}

fn qp_dist_point(p: u64, x: &Q, h: QpSubgroup) -> Q {
    match h {
        QpSubgroup::Full => Q::zero(),
        QpSubgroup::Zero => qp_norm(x, p),
        QpSubgroup::Lattice(k) => {
            if valuation(x, p) >= Valuation::Finite(k) {
                Q::zero()
            } else {
                qp_norm(x, p)
            }
        }
    }
}

/// `min_{h ∈ H} ‖x − h‖` for ultrametric ambients.
pub fn dist_point(ambient: &AmbientGroup, x: &Element, h: &ClosedSubgroup) -> Result<Q> {
    h.validate(ambient)?;
    let mismatch = || ClabError::AmbientMismatch("point and subgroup live in different groups".into());
    match (h, x) {
        (ClosedSubgroup::Qp(q), Element::Scalar(a)) => Ok(qp_dist_point(ambient.primes()[0], a, *q)),
        (ClosedSubgroup::Module(m), Element::Vector(v)) => {
            if v.len() != m.dim() {
                return Err(mismatch());
            }
            Ok(m.frame(ambient.primes()[0]).dist_point(v))
        }
        (ClosedSubgroup::Product(cs), Element::Vector(v)) => {
            if v.len() != cs.len() {
                return Err(mismatch());
            }
            Ok(cs
                .iter()
                .zip(v)
                .zip(ambient.primes())
                .map(|((c, x), p)| qp_dist_point(p, x, *c))
                .max()
                .unwrap_or_else(Q::zero))
        }
        (ClosedSubgroup::Shift(s), Element::Shift(e)) => Ok(e
            .iter()
            .filter(|(n, v)| **v != 0 && !s.contains_coord(**n))
            .map(|(n, _)| p_power(2, -n))
            .max()
            .unwrap_or_else(Q::zero)),
        _ if !ambient.is_ultrametric() => Err(ClabError::NotApplicable(format!(
            "dist_point needs an ultrametric ambient, got {}",
            ambient.name()
        ))),
        _ => Err(mismatch()),
    }
}

fn grid_base(ambient: &AmbientGroup) -> u64 {
    match ambient {
        AmbientGroup::ShiftGroup { .. } => 2,
        AmbientGroup::PrimeProduct(_) => 0,
        _ => ambient.primes()[0],
    }
}

/// One direction of the closed-form ℚₚ check at `ε = p^{-j}`.
fn qp_half_check(a: QpSubgroup, b: QpSubgroup, j: i64) -> bool {
    let g = match a {
        QpSubgroup::Zero => return true,
        QpSubgroup::Lattice(k) => k.max(-j),
        QpSubgroup::Full => -j,
    };
    match b {
        QpSubgroup::Full => true,
        QpSubgroup::Lattice(k) if g >= k => true,
        _ => g >= j,
    }
}

fn qp_check(a: QpSubgroup, b: QpSubgroup, j: i64) -> bool {
    qp_half_check(a, b, j) && qp_half_check(b, a, j)
}

fn as_module(ambient: &AmbientGroup, h: &ClosedSubgroup) -> Option<QpModule> {
    let p = *ambient.primes().first()?;
    match h {
        ClosedSubgroup::Module(m) => Some(m.clone()),
        ClosedSubgroup::Qp(q) => Some(match q {
            QpSubgroup::Zero => QpModule::zero(1),
            QpSubgroup::Full => QpModule::full(1),
            QpSubgroup::Lattice(k) => QpModule::lattice(1, vec![vec![p_power(p, *k)]]).ok()?,
        }),
        _ => None,
    }
}

fn shift_half_check(a: &ShiftSubgroup, b: &ShiftSubgroup, j: i64, window: i64) -> bool {
    // generators e_n, n ∈ S ∩ [-j, ∞); those with n >= j are within ε of anything
    let bt = b.truncated(window);
    a.truncated(window).range(-j..j).all(|n| bt.contains(n))
}

/// The neighbourhood condition at grid point `ε = base^{-j}`.
pub fn neighborhood_check(
    ambient: &AmbientGroup,
    a: &ClosedSubgroup,
    b: &ClosedSubgroup,
    j: i64,
    cfg: &MetricConfig,
) -> Result<bool> {
    a.validate(ambient)?;
    b.validate(ambient)?;
    if j < 0 {
        return Err(ClabError::Domain("grid index must be >= 0 (ε <= 1)".into()));
    }
    match cfg.route {
        Route::Auto => match (ambient, a, b) {
            (AmbientGroup::PAdicLine(_), ClosedSubgroup::Qp(x), ClosedSubgroup::Qp(y)) => Ok(qp_check(*x, *y, j)),
            // one grid over several primes is not meaningful; products use per-factor grids
            (AmbientGroup::PrimeProduct(_), _, _) => {
                Err(ClabError::NotApplicable("grid checks are per factor in a product".into()))
            }
            (AmbientGroup::ShiftGroup { window, .. }, ClosedSubgroup::Shift(x), ClosedSubgroup::Shift(y)) => {
                Ok(shift_half_check(x, y, j, *window) && shift_half_check(y, x, j, *window))
            }
            _ => generator_check(ambient, a, b, j),
        },
        Route::Generators => generator_check(ambient, a, b, j),
        Route::Cosets => Ok(coset_half_check(ambient, a, b, j, cfg.budget)?
            && coset_half_check(ambient, b, a, j, cfg.budget)?),
    }
}

fn generator_check(ambient: &AmbientGroup, a: &ClosedSubgroup, b: &ClosedSubgroup, j: i64) -> Result<bool> {
    if let (AmbientGroup::ShiftGroup { window, .. }, ClosedSubgroup::Shift(x), ClosedSubgroup::Shift(y)) = (ambient, a, b) {
        return Ok(shift_half_check(x, y, j, *window) && shift_half_check(y, x, j, *window));
    }
    let p = grid_base(ambient);
    let (Some(ma), Some(mb)) = (as_module(ambient, a), as_module(ambient, b)) else {
        return Err(ClabError::NotApplicable(format!("no generator route for {}", ambient.name())));
    };
    Ok(frame_check(&ma.frame(p), &mb.frame(p), p, j))
}

fn frame_check(fa: &Frame, fb: &Frame, p: u64, j: i64) -> bool {
    let eps = p_power(p, -j);
    let half = |from: &Frame, to: &Frame| from.ball_generators(-j).iter().all(|g| to.dist_point(g) <= eps);
    half(fa, fb) && half(fb, fa)
}

fn coset_half_check(ambient: &AmbientGroup, a: &ClosedSubgroup, b: &ClosedSubgroup, j: i64, budget: usize) -> Result<bool> {
    let p = match grid_base(ambient) {
        0 => return Err(ClabError::NotApplicable("products are checked per factor".into())),
        p => p,
    };
    let eps = p_power(p, -j);
    let big = p_power(p, j);
    let reps = coset_reps(ambient, a, &big, &eps, budget)?;
    for r in &reps {
        if dist_point(ambient, r, b)? > eps {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Pass/fail of the neighbourhood check at every grid point `0..=K`.
pub fn grid_profile(ambient: &AmbientGroup, a: &ClosedSubgroup, b: &ClosedSubgroup, cfg: &MetricConfig) -> Result<Vec<bool>> {
    (0..=grid_depth(ambient, cfg)).map(|j| neighborhood_check(ambient, a, b, j, cfg)).collect()
}

fn grid_depth(ambient: &AmbientGroup, cfg: &MetricConfig) -> i64 {
    match ambient {
        AmbientGroup::ShiftGroup { window, .. } => *window,
        _ => cfg.precision as i64,
    }
}

/// Chabauty distance in any supported ambient.
pub fn chabauty_dist(ambient: &AmbientGroup, a: &ClosedSubgroup, b: &ClosedSubgroup, cfg: &MetricConfig) -> Result<Distance> {
    a.validate(ambient)?;
    b.validate(ambient)?;
    match ambient {
        AmbientGroup::Integers | AmbientGroup::Reals | AmbientGroup::Circle => dist_coordinate(ambient, a, b),
        AmbientGroup::PrimeProduct(_) => product_dist(ambient, a, b, cfg),
        _ => grid_dist(ambient, a, b, cfg),
    }
}

fn grid_dist(ambient: &AmbientGroup, a: &ClosedSubgroup, b: &ClosedSubgroup, cfg: &MetricConfig) -> Result<Distance> {
    if equal(ambient, a, b)? {
        return Ok(Distance { base: Some(grid_base(ambient)), ..Distance::zero() });
    }
    let p = grid_base(ambient);
    let depth = grid_depth(ambient, cfg);
    // modules: build both frames once for the whole scan
    let frames = match (ambient, cfg.route) {
        (AmbientGroup::PAdicSpace(..), Route::Auto | Route::Generators) => {
            match (as_module(ambient, a), as_module(ambient, b)) {
                (Some(x), Some(y)) => Some((x.frame(p), y.frame(p))),
                _ => None,
            }
        }
        _ => None,
    };
    // ε = 1 always passes: A ∩ B̄(0,1) ⊆ B̄(0,1) ⊆ N_1(B)
    let mut last_pass = 0;
    for j in 1..=depth {
        let pass = match &frames {
            Some((fa, fb)) => frame_check(fa, fb, p, j),
            None => neighborhood_check(ambient, a, b, j, cfg)?,
        };
        if pass {
            last_pass = j;
        } else {
            break;
        }
    }
    let upper = p_power(p, -last_pass);
    let lower = if last_pass == depth { Q::zero() } else { p_power(p, -(last_pass + 1)) };
    Ok(Distance::grid(p, lower, upper))
}

/// Max-rule product metric over the factors of `∏ ℚ_{pᵢ}`.
pub fn product_dist(ambient: &AmbientGroup, a: &ClosedSubgroup, b: &ClosedSubgroup, cfg: &MetricConfig) -> Result<Distance> {
    let (AmbientGroup::PrimeProduct(ctxs), ClosedSubgroup::Product(x), ClosedSubgroup::Product(y)) = (ambient, a, b) else {
        return Err(ClabError::AmbientMismatch("product_dist needs product subgroups".into()));
    };
    let mut out = Distance::zero();
    for ((c, xi), yi) in ctxs.iter().zip(x).zip(y) {
        let factor = AmbientGroup::PAdicLine(c.clone());
        let d = grid_dist(&factor, &ClosedSubgroup::Qp(*xi), &ClosedSubgroup::Qp(*yi), cfg)?;
        out = out.max(d);
    }
    Ok(out)
}

/// Shift-group distance: `2^{-k}` for the largest `k <= W` with `(S Δ T) ∩ [-k, k) = ∅`.
pub fn shift_dist(ambient: &AmbientGroup, a: &ShiftSubgroup, b: &ShiftSubgroup) -> Result<Distance> {
    grid_dist(
        ambient,
        &ClosedSubgroup::Shift(a.clone()),
        &ClosedSubgroup::Shift(b.clone()),
        &MetricConfig::default(),
    )
}

fn inv_or_zero(n: u64) -> Q {
    if n == 0 {
        Q::zero()
    } else {
        Q::new(1.into(), n.into())
    }
}

/// Position of a real subgroup on `[0, π/2]`: `arctan α` for `αℤ`.
fn real_coordinate(r: &RealSubgroup, bits: u32) -> Interval {
    match r {
        RealSubgroup::Full => Interval::point(Q::zero()),
        RealSubgroup::Trivial => interval::half_pi(bits),
        RealSubgroup::Spacing(a) => interval::atan(a, bits),
    }
}

/// Enclosure of the Sub_ℝ distance at the given precision.
pub fn real_dist_interval(a: &RealSubgroup, b: &RealSubgroup, bits: u32) -> Interval {
    if a == b {
        return Interval::point(Q::zero());
    }
    if let (RealSubgroup::Spacing(x), RealSubgroup::Spacing(y)) = (a, b) {
        return interval::atan_gap(x, y, bits);
    }
    real_coordinate(a, bits).sub(&real_coordinate(b, bits)).abs()
}

/// Coordinate metrics on Sub_ℤ, Sub_ℝ and Sub_circle.
pub fn dist_coordinate(ambient: &AmbientGroup, a: &ClosedSubgroup, b: &ClosedSubgroup) -> Result<Distance> {
    a.validate(ambient)?;
    b.validate(ambient)?;
    Ok(match (a, b) {
        (ClosedSubgroup::Int(m), ClosedSubgroup::Int(n)) => {
            Distance::exact((inv_or_zero(*m) - inv_or_zero(*n)).abs())
        }
        (ClosedSubgroup::Circle(x), ClosedSubgroup::Circle(y)) => {
            let c = |s: &CircleSubgroup| match s {
                CircleSubgroup::Cyclic(n) => inv_or_zero(*n),
                CircleSubgroup::Full => Q::zero(),
            };
            Distance::exact((c(x) - c(y)).abs())
        }
        (ClosedSubgroup::Real(x), ClosedSubgroup::Real(y)) => {
            if x == y {
                Distance::zero()
            } else {
                Distance::enclosure(real_dist_interval(x, y, interval::START_BITS))
            }
        }
        _ => {
            return Err(ClabError::NotApplicable(format!(
                "coordinate metric is for Z, R and the circle, got {}",
                ambient.name()
            )))
        }
    })
}

/// Distances for many pairs, in parallel, returned in input order.
pub fn batch_dist(
    ambient: &AmbientGroup,
    pairs: &[(ClosedSubgroup, ClosedSubgroup)],
    cfg: &MetricConfig,
) -> Result<Vec<Distance>> {
    pairs.par_iter().map(|(a, b)| chabauty_dist(ambient, a, b, cfg)).collect()
}
