//! Seeded random instance generation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Constraint, CopInstance, ObjectiveTag, SearchSpace, DEFAULT_EPSILON};
use crate::error::{Error, Result};
use crate::rng::seeded;

/// Retry limit for satisfying the optimum-feasibility request.
pub const MAX_GENERATION_RETRIES: usize = 100;

/// Recipe for random instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub objective: ObjectiveTag,
    pub dimension: usize,
    pub n_linear: usize,
    pub n_quadratic: usize,
    pub n_equality: usize,
    /// Box `[lo, hi]` used in every coordinate.
    pub bounds: (f64, f64),
    pub lin_range: (f64, f64),
    pub quad_range: (f64, f64),
    pub offset_range: (f64, f64),
    pub optimum_feasible: bool,
    pub epsilon: f64,
}

impl GeneratorSpec {
    pub fn new(objective: ObjectiveTag, dimension: usize) -> Self {
        Self {
            objective,
            dimension,
            n_linear: 0,
            n_quadratic: 0,
            n_equality: 0,
            bounds: (-5.0, 5.0),
            lin_range: (-1.0, 1.0),
            quad_range: (-1.0, 1.0),
            offset_range: (-5.0, 5.0),
            optimum_feasible: true,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn n_constraints(&self) -> usize {
        self.n_linear + self.n_quadratic + self.n_equality
    }

    /// Report label such as `Sphere, 2lin` or `Ackley, 4Lin, 1Quad`.
    pub fn label(&self) -> String {
        let mixed = [self.n_linear, self.n_quadratic, self.n_equality].iter().filter(|n| **n > 0).count() > 1;
        let mut parts = vec![self.objective.title().to_string()];
        let names: [(&str, &str); 3] = [("lin", "Lin"), ("Quad", "Quad"), ("eq", "Eq")];
        for (n, (single, multi)) in [self.n_linear, self.n_quadratic, self.n_equality].into_iter().zip(names) {
            if n > 0 {
                parts.push(format!("{n}{}", if mixed { multi } else { single }));
            }
        }
        parts.join(", ")
    }

    /// Applies a label (objective and constraint counts) on top of `self`.
    pub fn with_label(&self, label: &str) -> Result<Self> {
        let mut parts = label.split(',').map(str::trim).filter(|p| !p.is_empty());
        let objective: ObjectiveTag = parts
            .next()
            .ok_or_else(|| Error::config(format!("empty problem label `{label}`")))?
            .parse()
            .map_err(|_| Error::config(format!("unknown objective in label `{label}`")))?;
        let mut spec = Self { objective, n_linear: 0, n_quadratic: 0, n_equality: 0, ..self.clone() };
        for part in parts {
            let digits: String = part.chars().take_while(|c| c.is_ascii_digit()).collect();
            let count: usize =
                digits.parse().map_err(|_| Error::config(format!("bad constraint count `{part}` in `{label}`")))?;
            match part[digits.len()..].to_ascii_lowercase().as_str() {
                "lin" | "linear" => spec.n_linear += count,
                "quad" | "quadratic" => spec.n_quadratic += count,
                "eq" | "equality" => spec.n_equality += count,
                other => return Err(Error::config(format!("unknown constraint type `{other}` in `{label}`"))),
            }
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let ranges = [("bounds", self.bounds), ("lin_range", self.lin_range), ("quad_range", self.quad_range), ("offset_range", self.offset_range)];
        for (name, (lo, hi)) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::config(format!("{name} must be a finite interval, got [{lo}, {hi}]")));
            }
        }
        if self.bounds.0 >= self.bounds.1 {
            return Err(Error::config("bounds must have positive width"));
        }
        if self.dimension == 0 {
            return Err(Error::config("dimension must be at least 1"));
        }
        Ok(())
    }

    pub(crate) fn instance_id(&self, seed: u64) -> String {
        format!(
            "{}-d{}-{}l{}q{}e-{seed:016x}",
            self.objective, self.dimension, self.n_linear, self.n_quadratic, self.n_equality
        )
    }
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn draw_vec(rng: &mut impl Rng, n: usize, range: (f64, f64)) -> Vec<f64> {
    (0..n).map(|_| uniform(rng, range)).collect()
}

fn draw_nonzero(rng: &mut impl Rng, n: usize, range: (f64, f64)) -> Option<Vec<f64>> {
    let v = draw_vec(rng, n, range);
    v.iter().any(|c| *c != 0.0).then_some(v)
}

fn draw_inequality(rng: &mut impl Rng, spec: &GeneratorSpec, quadratic: bool) -> Option<Constraint> {
    let d = spec.dimension;
    if quadratic {
        let quad = draw_nonzero(rng, d, spec.quad_range)?;
        let lin = draw_vec(rng, d, spec.lin_range);
        Some(Constraint::quadratic(quad, lin, uniform(rng, spec.offset_range)))
    } else {
        let lin = draw_nonzero(rng, d, spec.lin_range)?;
        Some(Constraint::linear(lin, uniform(rng, spec.offset_range)))
    }
}

/// Generates a random instance following `spec`; deterministic in `seed`.
///
/// With `optimum_feasible`, each inequality is redrawn until it holds at the
/// known optimum and equalities are shifted to pass through it. Otherwise the
/// whole constraint set is redrawn until the optimum is infeasible.
pub fn random_instance(spec: &GeneratorSpec, seed: u64) -> Result<CopInstance> {
    spec.validate()?;
    let mut rng = seeded(seed);
    let d = spec.dimension;
    let space = SearchSpace::cube(d, spec.bounds.0, spec.bounds.1)?;
    let optimum = spec.objective.optimum(d);
    let build = |cs: Vec<Constraint>| CopInstance::new(spec.instance_id(seed), spec.objective, cs, space.clone(), spec.epsilon);

    if spec.optimum_feasible {
        let mut constraints = Vec::with_capacity(spec.n_constraints());
        for quadratic in std::iter::repeat_n(false, spec.n_linear).chain(std::iter::repeat_n(true, spec.n_quadratic)) {
            let c = (0..MAX_GENERATION_RETRIES)
                .filter_map(|_| draw_inequality(&mut rng, spec, quadratic))
                .find(|c| c.value(&optimum) <= 0.0)
                .ok_or(Error::Generation { retries: MAX_GENERATION_RETRIES })?;
            constraints.push(c);
        }
        for _ in 0..spec.n_equality {
            let lin = (0..MAX_GENERATION_RETRIES)
                .find_map(|_| draw_nonzero(&mut rng, d, spec.lin_range))
                .ok_or(Error::Generation { retries: MAX_GENERATION_RETRIES })?;
            let offset = -lin.iter().zip(&optimum).map(|(l, x)| l * x).sum::<f64>();
            constraints.push(Constraint::equality(vec![0.0; d], lin, offset));
        }
        return build(constraints);
    }

    for _ in 0..MAX_GENERATION_RETRIES {
        let mut constraints = Vec::with_capacity(spec.n_constraints());
        let mut ok = true;
        for quadratic in std::iter::repeat_n(false, spec.n_linear).chain(std::iter::repeat_n(true, spec.n_quadratic)) {
            match draw_inequality(&mut rng, spec, quadratic) {
                Some(c) => constraints.push(c),
                None => ok = false,
            }
        }
        for _ in 0..spec.n_equality {
            match draw_nonzero(&mut rng, d, spec.lin_range) {
                Some(lin) => constraints.push(Constraint::equality(vec![0.0; d], lin, uniform(&mut rng, spec.offset_range))),
                None => ok = false,
            }
        }
        if !ok {
            continue;
        }
        let instance = build(constraints)?;
        if instance.evaluate(&optimum)?.phi > 0.0 {
            return Ok(instance);
        }
    }
    Err(Error::Generation { retries: MAX_GENERATION_RETRIES })
}
