//! Constrained continuous optimization problems.
//!
//! A [`CopInstance`] is a box-bounded minimization problem with linear,
//! diagonal-quadratic and equality constraints. Equalities are relaxed to
//! `|h(x)| <= epsilon`. Every solver in the crate shares [`violation`] and
//! [`epsilon_compare`].

mod document;
mod generate;

pub use document::{from_document, from_document_lenient, to_document};
pub use generate::{random_instance, GeneratorSpec, MAX_GENERATION_RETRIES};

use std::cmp::Ordering;
use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default equality tolerance.
pub const DEFAULT_EPSILON: f64 = 1e-4;

/// Box-shaped search space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl SearchSpace {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::contract("search space dimension must be at least 1"));
        }
        if lower.len() != upper.len() {
            return Err(Error::contract(format!(
                "lower has {} entries, upper has {}",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::contract(format!("bounds of variable {i} are invalid: [{l}, {u}]")));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The same interval `[lo, hi]` in every coordinate.
    pub fn cube(dimension: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dimension], vec![hi; dimension])
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn mean_width(&self) -> f64 {
        (0..self.dimension()).map(|i| self.width(i)).sum::<f64>() / self.dimension() as f64
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dimension()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    /// Projects `x` onto the box in place.
    pub fn clamp(&self, x: &mut [f64]) {
        for ((v, l), u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*l, *u);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveTag {
    Sphere,
    Ackley,
    Rosenbrock,
}

impl ObjectiveTag {
    pub const ALL: [ObjectiveTag; 3] = [ObjectiveTag::Sphere, ObjectiveTag::Ackley, ObjectiveTag::Rosenbrock];

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectiveTag::Sphere => "sphere",
            ObjectiveTag::Ackley => "ackley",
            ObjectiveTag::Rosenbrock => "rosenbrock",
        }
    }

    /// Display name used in report labels.
    pub fn title(self) -> &'static str {
        match self {
            ObjectiveTag::Sphere => "Sphere",
            ObjectiveTag::Ackley => "Ackley",
            ObjectiveTag::Rosenbrock => "Rosenbrock",
        }
    }

    /// Location of the unconstrained minimum in `dimension` coordinates.
    pub fn optimum(self, dimension: usize) -> Vec<f64> {
        match self {
            ObjectiveTag::Sphere | ObjectiveTag::Ackley => vec![0.0; dimension],
            ObjectiveTag::Rosenbrock => vec![1.0; dimension],
        }
    }

    pub fn eval(self, x: &[f64]) -> f64 {
        match self {
            ObjectiveTag::Sphere => x.iter().map(|v| v * v).sum(),
            ObjectiveTag::Ackley => {
                let n = x.len() as f64;
                let sq = x.iter().map(|v| v * v).sum::<f64>() / n;
                let cs = x.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / n;
                -20.0 * (-0.2 * sq.sqrt()).exp() - cs.exp() + 20.0 + E
            }
            ObjectiveTag::Rosenbrock => x
                .windows(2)
                .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
                .sum(),
        }
    }
}

impl fmt::Display for ObjectiveTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObjectiveTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sphere" => Ok(ObjectiveTag::Sphere),
            "ackley" => Ok(ObjectiveTag::Ackley),
            "rosenbrock" => Ok(ObjectiveTag::Rosenbrock),
            other => Err(Error::contract(format!("unknown objective `{other}`"))),
        }
    }
}

/// An objective function together with its known unconstrained optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    tag: ObjectiveTag,
    known_optimum: Vec<f64>,
    known_optimum_value: f64,
}

impl Objective {
    pub fn new(tag: ObjectiveTag, dimension: usize) -> Self {
        Self { tag, known_optimum: tag.optimum(dimension), known_optimum_value: 0.0 }
    }

    pub fn tag(&self) -> ObjectiveTag {
        self.tag
    }

    pub fn known_optimum(&self) -> &[f64] {
        &self.known_optimum
    }

    pub fn known_optimum_value(&self) -> f64 {
        self.known_optimum_value
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    #[serde(rename = "linear")]
    LinearInequality,
    #[serde(rename = "quadratic")]
    QuadraticInequality,
    Equality,
}

impl ConstraintKind {
    pub fn is_inequality(self) -> bool {
        !matches!(self, ConstraintKind::Equality)
    }
}

/// `g(x) = sum quad[i] x_i^2 + sum lin[i] x_i + offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub kind: ConstraintKind,
    pub quad: Vec<f64>,
    pub lin: Vec<f64>,
    pub offset: f64,
}

impl Constraint {
    pub fn linear(lin: Vec<f64>, offset: f64) -> Self {
        let quad = vec![0.0; lin.len()];
        Self { kind: ConstraintKind::LinearInequality, quad, lin, offset }
    }

    pub fn quadratic(quad: Vec<f64>, lin: Vec<f64>, offset: f64) -> Self {
        Self { kind: ConstraintKind::QuadraticInequality, quad, lin, offset }
    }

    pub fn equality(quad: Vec<f64>, lin: Vec<f64>, offset: f64) -> Self {
        Self { kind: ConstraintKind::Equality, quad, lin, offset }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let mut g = self.offset;
        for ((xi, q), l) in x.iter().zip(&self.quad).zip(&self.lin) {
            g += (q * xi + l) * xi;
        }
        g
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.quad).zip(&self.lin).map(|((xi, q), l)| 2.0 * q * xi + l).collect()
    }

    /// Non-negative violation of this constraint at `x`.
    pub fn violation(&self, x: &[f64], epsilon: f64) -> f64 {
        let g = self.value(x);
        match self.kind {
            ConstraintKind::Equality => (g.abs() - epsilon).max(0.0),
            _ => g.max(0.0),
        }
    }

    fn validate(&self, dimension: usize, index: usize) -> Result<()> {
        if self.quad.len() != dimension || self.lin.len() != dimension {
            return Err(Error::contract(format!(
                "constraint {index}: coefficient vectors must have length {dimension}"
            )));
        }
        if !self.offset.is_finite() || self.quad.iter().chain(&self.lin).any(|v| !v.is_finite()) {
            return Err(Error::contract(format!("constraint {index}: non-finite coefficient")));
        }
        let quad_zero = self.quad.iter().all(|q| *q == 0.0);
        let lin_zero = self.lin.iter().all(|l| *l == 0.0);
        match self.kind {
            ConstraintKind::LinearInequality if !quad_zero => Err(Error::contract(format!(
                "constraint {index}: linear constraint with quadratic terms"
            ))),
            ConstraintKind::LinearInequality if lin_zero => Err(Error::contract(format!(
                "constraint {index}: linear constraint with zero normal"
            ))),
            ConstraintKind::QuadraticInequality if quad_zero => Err(Error::contract(format!(
                "constraint {index}: quadratic constraint without quadratic terms"
            ))),
            _ => Ok(()),
        }
    }
}

/// Objective value and aggregate violation of a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fitness {
    pub f: f64,
    pub phi: f64,
}

impl Fitness {
    pub fn new(f: f64, phi: f64) -> Self {
        Self { f, phi }
    }
}

/// A fully evaluated point.
///
/// Non-finite objective values are replaced by the worst-possible sentinel
/// `f = phi = +inf`, so that sentinel points sort after everything else.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatedPoint {
    pub x: Vec<f64>,
    pub f: f64,
    pub phi: f64,
    pub per_constraint: Vec<f64>,
}

impl EvaluatedPoint {
    pub fn fitness(&self) -> Fitness {
        Fitness::new(self.f, self.phi)
    }

    pub fn is_feasible(&self) -> bool {
        self.phi == 0.0
    }
}

/// One constrained optimization problem.
#[derive(Debug, Clone, PartialEq)]
pub struct CopInstance {
    id: String,
    objective: Objective,
    constraints: Vec<Constraint>,
    space: SearchSpace,
    epsilon: f64,
}

impl CopInstance {
    pub fn new(
        id: impl Into<String>,
        objective: ObjectiveTag,
        constraints: Vec<Constraint>,
        space: SearchSpace,
        epsilon: f64,
    ) -> Result<Self> {
        let dimension = space.dimension();
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::contract(format!("epsilon must be positive, got {epsilon}")));
        }
        for (i, c) in constraints.iter().enumerate() {
            c.validate(dimension, i)?;
        }
        let objective = Objective::new(objective, dimension);
        if !space.contains(objective.known_optimum()) {
            return Err(Error::contract("known optimum lies outside the search space"));
        }
        Ok(Self { id: id.into(), objective, constraints, space, epsilon })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dimension(&self) -> usize {
        self.space.dimension()
    }

    /// Same problem with a different id.
    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Same problem with new constraints (validated).
    pub fn with_constraints(&self, constraints: Vec<Constraint>) -> Result<Self> {
        Self::new(self.id.clone(), self.objective.tag, constraints, self.space.clone(), self.epsilon)
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension() {
            return Err(Error::contract(format!(
                "point has {} coordinates, instance dimension is {}",
                x.len(),
                self.dimension()
            )));
        }
        Ok(())
    }

    /// Objective value and violation in one pass.
    pub fn evaluate(&self, x: &[f64]) -> Result<EvaluatedPoint> {
        self.check_len(x)?;
        let f = self.objective.tag.eval(x);
        let per_constraint: Vec<f64> =
            self.constraints.iter().map(|c| c.violation(x, self.epsilon)).collect();
        let phi: f64 = per_constraint.iter().sum();
        let (f, phi) = if f.is_finite() && phi.is_finite() { (f, phi) } else { (f64::INFINITY, f64::INFINITY) };
        Ok(EvaluatedPoint { x: x.to_vec(), f, phi, per_constraint })
    }
}

/// `f(x)` for the instance's objective.
pub fn evaluate_objective(instance: &CopInstance, x: &[f64]) -> Result<f64> {
    instance.check_len(x)?;
    Ok(instance.objective.tag.eval(x))
}

/// Total violation `phi` and its per-constraint breakdown.
pub fn violation(instance: &CopInstance, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    instance.check_len(x)?;
    let per: Vec<f64> = instance.constraints.iter().map(|c| c.violation(x, instance.epsilon)).collect();
    Ok((per.iter().sum(), per))
}

/// Epsilon-level comparison. `Less` means `a` is better.
///
/// When both violations are within `eps_level`, or the violations are equal,
/// the objective decides; otherwise the smaller violation wins.
pub fn epsilon_compare(a: Fitness, b: Fitness, eps_level: f64) -> Result<Ordering> {
    if a.f.is_nan() || a.phi.is_nan() || b.f.is_nan() || b.phi.is_nan() || eps_level.is_nan() {
        return Err(Error::Numeric("NaN in epsilon comparison".into()));
    }
    let by_f = (a.phi <= eps_level && b.phi <= eps_level) || a.phi == b.phi;
    let ord = if by_f { a.f.partial_cmp(&b.f) } else { a.phi.partial_cmp(&b.phi) };
    // Both operands are NaN-free, so partial_cmp is total here.
    Ok(ord.unwrap_or(Ordering::Equal))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_plane() -> CopInstance {
        let space = SearchSpace::cube(2, -5.0, 5.0).unwrap();
        CopInstance::new("hp", ObjectiveTag::Sphere, vec![Constraint::linear(vec![1.0, 0.0], 0.0)], space, 1e-4)
            .unwrap()
    }

    #[test]
    fn objectives_vanish_at_their_optima() {
        for tag in ObjectiveTag::ALL {
            for d in [1, 2, 5, 10, 30] {
                assert!(tag.eval(&tag.optimum(d)).abs() < 1e-9, "{tag} d={d}");
            }
        }
        assert_eq!(ObjectiveTag::Sphere.eval(&[0.0, 0.0]), 0.0);
        assert_eq!(ObjectiveTag::Rosenbrock.eval(&[1.0; 5]), 0.0);
        assert!(ObjectiveTag::Ackley.eval(&[0.0; 10]).abs() < 1e-12);
    }

    #[test]
    fn objective_values_off_optimum() {
        assert_eq!(ObjectiveTag::Sphere.eval(&[1.0, 2.0]), 5.0);
        // 100 (1 - 0)^2 + (1 - 0)^2
        assert_eq!(ObjectiveTag::Rosenbrock.eval(&[0.0, 1.0]), 101.0);
        assert!(ObjectiveTag::Ackley.eval(&[1.0, 1.0]) > 3.0);
    }

    #[test]
    fn evaluate_rejects_wrong_dimension() {
        let inst = half_plane();
        assert!(matches!(evaluate_objective(&inst, &[1.0]), Err(Error::Contract(_))));
        assert!(matches!(violation(&inst, &[1.0, 2.0, 3.0]), Err(Error::Contract(_))));
    }

    #[test]
    fn linear_violation_examples() {
        let inst = half_plane();
        assert_eq!(violation(&inst, &[-1.0, 0.0]).unwrap().0, 0.0);
        assert_eq!(violation(&inst, &[2.0, 0.0]).unwrap().0, 2.0);
    }

    #[test]
    fn equality_is_relaxed_by_epsilon() {
        let space = SearchSpace::cube(2, -1.0, 1.0).unwrap();
        let eq = Constraint::equality(vec![0.0, 0.0], vec![1.0, 0.0], 0.0);
        let inst = CopInstance::new("eq", ObjectiveTag::Sphere, vec![eq], space, 1e-4).unwrap();
        assert_eq!(violation(&inst, &[5e-5, 0.0]).unwrap().0, 0.0);
        let (phi, _) = violation(&inst, &[0.5, 0.0]).unwrap();
        assert!((phi - (0.5 - 1e-4)).abs() < 1e-15);
    }

    #[test]
    fn phi_is_sum_of_parts() {
        let space = SearchSpace::cube(2, -5.0, 5.0).unwrap();
        let cs = vec![
            Constraint::linear(vec![1.0, 0.0], 0.0),
            Constraint::quadratic(vec![1.0, 1.0], vec![0.0, 0.0], -1.0),
        ];
        let inst = CopInstance::new("two", ObjectiveTag::Sphere, cs, space, 1e-4).unwrap();
        let (phi, per) = violation(&inst, &[2.0, 1.0]).unwrap();
        assert_eq!(per, vec![2.0, 4.0]);
        assert_eq!(phi, 6.0);
    }

    #[test]
    fn compare_examples() {
        let cmp = |a: (f64, f64), b: (f64, f64), e| epsilon_compare(Fitness::new(a.0, a.1), Fitness::new(b.0, b.1), e).unwrap();
        assert_eq!(cmp((5.0, 0.0), (3.0, 0.7), 0.0), Ordering::Less);
        assert_eq!(cmp((5.0, 0.0), (3.0, 0.0), 0.0), Ordering::Greater);
        assert_eq!(cmp((5.0, 0.0), (3.0, 0.0), 10.0), Ordering::Greater);
        assert_eq!(cmp((9.0, 0.3), (1.0, 0.5), 1.0), Ordering::Greater);
        assert_eq!(cmp((9.0, 0.3), (1.0, 0.5), 0.0), Ordering::Less);
    }

    #[test]
    fn compare_rejects_nan() {
        assert!(epsilon_compare(Fitness::new(f64::NAN, 0.0), Fitness::new(1.0, 0.0), 0.0).is_err());
        assert!(epsilon_compare(Fitness::new(1.0, 0.0), Fitness::new(1.0, f64::NAN), 0.0).is_err());
    }

    #[test]
    fn overflow_becomes_worst_sentinel() {
        let space = SearchSpace::cube(2, -1e200, 1e200).unwrap();
        let inst = CopInstance::new("big", ObjectiveTag::Rosenbrock, vec![], space, 1e-4).unwrap();
        let p = inst.evaluate(&[1e200, -1e200]).unwrap();
        assert_eq!(p.phi, f64::INFINITY);
        let ok = inst.evaluate(&[0.0, 0.0]).unwrap();
        assert_eq!(epsilon_compare(ok.fitness(), p.fitness(), 0.0).unwrap(), Ordering::Less);
        assert_eq!(epsilon_compare(ok.fitness(), p.fitness(), f64::INFINITY).unwrap(), Ordering::Less);
    }

    #[test]
    fn invalid_instances_are_rejected() {
        let space = SearchSpace::cube(2, -1.0, 1.0).unwrap();
        let bad_lin = Constraint::linear(vec![0.0, 0.0], 1.0);
        assert!(CopInstance::new("a", ObjectiveTag::Sphere, vec![bad_lin], space.clone(), 1e-4).is_err());
        let bad_quad = Constraint::quadratic(vec![0.0, 0.0], vec![1.0, 0.0], 1.0);
        assert!(CopInstance::new("b", ObjectiveTag::Sphere, vec![bad_quad], space.clone(), 1e-4).is_err());
        assert!(CopInstance::new("c", ObjectiveTag::Sphere, vec![], space.clone(), 0.0).is_err());
        let short = Constraint::linear(vec![1.0], 0.0);
        assert!(CopInstance::new("d", ObjectiveTag::Sphere, vec![short], space, 1e-4).is_err());
        assert!(SearchSpace::new(vec![1.0], vec![1.0]).is_err());
        assert!(SearchSpace::new(vec![], vec![]).is_err());
        // Rosenbrock optimum (1, 1) is outside [-1, 0.5]^2.
        let small = SearchSpace::cube(2, -1.0, 0.5).unwrap();
        assert!(CopInstance::new("e", ObjectiveTag::Rosenbrock, vec![], small, 1e-4).is_err());
    }
}
