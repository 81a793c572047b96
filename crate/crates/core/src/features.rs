//! Constraint features: counts, coefficient spread, angles between
//! constraint normals at the optimum and Monte Carlo feasibility ratios.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cop::{violation, ConstraintKind, CopInstance};
use crate::error::{Error, Result};
use crate::rng::seeded;

/// Number of fields in [`FeatureVector::to_array`].
pub const FEATURE_LEN: usize = 13;

/// Field names in model input order.
pub const FEATURE_NAMES: [&str; FEATURE_LEN] = [
    "n_linear",
    "n_quadratic",
    "n_equality",
    "coeff_std",
    "coeff_std_per_constraint_mean",
    "angle_mean",
    "angle_min",
    "angle_max",
    "angle_valid",
    "feasibility_ratio_near_optimum",
    "feasibility_ratio_global",
    "optimum_feasible",
    "dimension",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSettings {
    pub n_samples: usize,
    /// Radius of the vicinity ball as a fraction of the mean box width.
    pub vicinity_radius_fraction: f64,
}

impl Default for FeatureSettings {
    fn default() -> Self {
        Self { n_samples: 10_000, vicinity_radius_fraction: 0.1 }
    }
}

impl FeatureSettings {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::config("n_samples must be at least 1"));
        }
        if !(self.vicinity_radius_fraction > 0.0 && self.vicinity_radius_fraction <= 1.0) {
            return Err(Error::config("vicinity_radius_fraction must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub n_linear: usize,
    pub n_quadratic: usize,
    pub n_equality: usize,
    pub coeff_std: f64,
    pub coeff_std_per_constraint_mean: f64,
    pub angle_mean: f64,
    pub angle_min: f64,
    pub angle_max: f64,
    /// True when every pair of constraints produced an angle and there was at least one pair.
    pub angle_valid: bool,
    pub feasibility_ratio_near_optimum: f64,
    pub feasibility_ratio_global: f64,
    pub optimum_feasible: bool,
    pub dimension: usize,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; FEATURE_LEN] {
        [
            self.n_linear as f64,
            self.n_quadratic as f64,
            self.n_equality as f64,
            self.coeff_std,
            self.coeff_std_per_constraint_mean,
            self.angle_mean,
            self.angle_min,
            self.angle_max,
            f64::from(u8::from(self.angle_valid)),
            self.feasibility_ratio_near_optimum,
            self.feasibility_ratio_global,
            f64::from(u8::from(self.optimum_feasible)),
            self.dimension as f64,
        ]
    }

    pub fn from_array(a: &[f64]) -> Result<Self> {
        if a.len() != FEATURE_LEN {
            return Err(Error::contract(format!("feature vector needs {FEATURE_LEN} values, got {}", a.len())));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("feature values must be finite"));
        }
        let count = |v: f64| v.round().max(0.0) as usize;
        Ok(Self {
            n_linear: count(a[0]),
            n_quadratic: count(a[1]),
            n_equality: count(a[2]),
            coeff_std: a[3],
            coeff_std_per_constraint_mean: a[4],
            angle_mean: a[5],
            angle_min: a[6],
            angle_max: a[7],
            angle_valid: a[8] != 0.0,
            feasibility_ratio_near_optimum: a[9],
            feasibility_ratio_global: a[10],
            optimum_feasible: a[11] != 0.0,
            dimension: count(a[12]),
        })
    }
}

/// Population standard deviation; 0 for fewer than two values.
fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Angle in `[0, pi]` between two non-zero vectors.
pub fn angle_between(a: &[f64], b: &[f64]) -> Option<f64> {
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 || !na.is_finite() || !nb.is_finite() {
        return None;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Some((dot / (na * nb)).clamp(-1.0, 1.0).acos())
}

pub fn extract_features(
    instance: &CopInstance,
    n_samples: usize,
    vicinity_radius_fraction: f64,
    seed: u64,
) -> Result<FeatureVector> {
    FeatureSettings { n_samples, vicinity_radius_fraction }.validate().map_err(|e| Error::contract(e.to_string()))?;
    let constraints = instance.constraints();
    let count = |k: ConstraintKind| constraints.iter().filter(|c| c.kind == k).count();

    let pooled: Vec<f64> = constraints.iter().flat_map(|c| c.lin.iter().copied()).collect();
    let per_constraint: Vec<f64> = constraints
        .iter()
        .map(|c| {
            if c.quad.iter().any(|q| *q != 0.0) {
                std_dev(&[c.quad.as_slice(), c.lin.as_slice()].concat())
            } else {
                std_dev(&c.lin)
            }
        })
        .collect();
    let coeff_std_per_constraint_mean =
        if per_constraint.is_empty() { 0.0 } else { per_constraint.iter().sum::<f64>() / per_constraint.len() as f64 };

    let optimum = instance.objective().known_optimum();
    let normals: Vec<Vec<f64>> = constraints.iter().map(|c| c.gradient(optimum)).collect();
    let mut angles = Vec::new();
    let mut skipped = false;
    for i in 0..normals.len() {
        for j in i + 1..normals.len() {
            match angle_between(&normals[i], &normals[j]) {
                Some(a) => angles.push(a),
                None => skipped = true,
            }
        }
    }
    let (angle_mean, angle_min, angle_max) = if angles.is_empty() {
        (0.0, 0.0, 0.0)
    } else {
        (
            angles.iter().sum::<f64>() / angles.len() as f64,
            angles.iter().copied().fold(f64::INFINITY, f64::min),
            angles.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    };

    let mut rng = seeded(seed);
    let space = instance.space();
    let d = space.dimension();
    let mut x = vec![0.0; d];
    let mut feasible = 0usize;
    for _ in 0..n_samples {
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = rng.random_range(space.lower()[i]..space.upper()[i]);
        }
        feasible += usize::from(violation(instance, &x)?.0 == 0.0);
    }
    let feasibility_ratio_global = feasible as f64 / n_samples as f64;

    // Uniform in the ball by rejection against the box.
    let radius = vicinity_radius_fraction * space.mean_width();
    let max_attempts = n_samples.saturating_mul(10_000);
    let (mut accepted, mut attempts, mut near_feasible) = (0usize, 0usize, 0usize);
    let mut dir = vec![0.0; d];
    while accepted < n_samples {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::Numeric("vicinity sampling rejected too many points".into()));
        }
        for v in dir.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
        for i in 0..d {
            x[i] = optimum[i] + r * dir[i] / norm;
        }
        if !space.contains(&x) {
            continue;
        }
        accepted += 1;
        near_feasible += usize::from(violation(instance, &x)?.0 == 0.0);
    }

    Ok(FeatureVector {
        n_linear: count(ConstraintKind::LinearInequality),
        n_quadratic: count(ConstraintKind::QuadraticInequality),
        n_equality: count(ConstraintKind::Equality),
        coeff_std: std_dev(&pooled),
        coeff_std_per_constraint_mean,
        angle_mean,
        angle_min,
        angle_max,
        angle_valid: !angles.is_empty() && !skipped,
        feasibility_ratio_near_optimum: near_feasible as f64 / n_samples as f64,
        feasibility_ratio_global,
        optimum_feasible: violation(instance, optimum)?.0 == 0.0,
        dimension: d,
    })
}

/// Per-field affine map to zero mean and unit variance. Fields with zero
/// variance map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = rows.first() else { return Err(Error::contract("cannot normalize an empty dataset")) };
        let width = first.len();
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::contract("rows of a dataset must have equal length"));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; width];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut std = vec![0.0; width];
        for r in rows {
            for ((s, v), m) in std.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        for (s, m) in std.iter_mut().zip(&mean) {
            *s = (*s / n).sqrt();
            // Variance below rounding noise of the mean counts as constant.
            if *s <= 1e-12 * m.abs().max(1.0) {
                *s = 0.0;
            }
        }
        Ok(Self { mean, std })
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.len() {
            return Err(Error::contract(format!("expected {} values to normalize, got {}", self.len(), x.len())));
        }
        Ok(x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| if *s == 0.0 { 0.0 } else { (v - m) / s })
            .collect())
    }

    /// Inverse of [`NormStats::apply`] on fields with non-zero variance;
    /// constant fields return their mean.
    pub fn invert(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.len() {
            return Err(Error::contract(format!("expected {} values to denormalize, got {}", self.len(), z.len())));
        }
        Ok(z.iter().zip(self.mean.iter().zip(&self.std)).map(|(v, (m, s))| m + s * v).collect())
    }
}

pub fn normalize_features(rows: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, NormStats)> {
    let stats = NormStats::fit(rows)?;
    let normalized = rows.iter().map(|r| stats.apply(r)).collect::<Result<_>>()?;
    Ok((normalized, stats))
}

/// Writes the feature table: `instance_id` followed by [`FEATURE_NAMES`].
pub fn write_feature_table<W: Write>(rows: &[(String, FeatureVector)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["instance_id"];
    header.extend(FEATURE_NAMES);
    w.write_record(&header)?;
    for (id, fv) in rows {
        let mut record = vec![id.clone()];
        record.extend(fv.to_array().iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_feature_table<R: Read>(input: R) -> Result<Vec<(String, FeatureVector)>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let expected: Vec<&str> = std::iter::once("instance_id").chain(FEATURE_NAMES).collect();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Parse { line: 1, field: "header".into(), message: "feature table header does not match".into() });
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let mut values = Vec::with_capacity(FEATURE_LEN);
        for (name, field) in FEATURE_NAMES.iter().zip(rec.iter().skip(1)) {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line: i + 2,
                field: (*name).into(),
                message: format!("`{field}` is not a number"),
            })?;
            values.push(v);
        }
        rows.push((rec[0].to_string(), FeatureVector::from_array(&values)?));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cop::{Constraint, ObjectiveTag, SearchSpace};
    use std::f64::consts::FRAC_PI_2;

    fn inst(cs: Vec<Constraint>, d: usize) -> CopInstance {
        CopInstance::new("t", ObjectiveTag::Sphere, cs, SearchSpace::cube(d, -1.0, 1.0).unwrap(), 1e-4).unwrap()
    }

    #[test]
    fn no_constraints() {
        let f = extract_features(&inst(vec![], 2), 1000, 0.1, 1).unwrap();
        assert_eq!(f.feasibility_ratio_global, 1.0);
        assert_eq!(f.feasibility_ratio_near_optimum, 1.0);
        assert_eq!((f.n_linear, f.n_quadratic, f.n_equality), (0, 0, 0));
        assert!(!f.angle_valid);
        assert_eq!(f.angle_mean, 0.0);
        assert!(f.optimum_feasible);
    }

    #[test]
    fn orthogonal_normals() {
        let cs = vec![Constraint::linear(vec![1.0, 0.0], -0.5), Constraint::linear(vec![0.0, 1.0], -0.5)];
        let f = extract_features(&inst(cs, 2), 100, 0.1, 1).unwrap();
        assert!(f.angle_valid);
        for a in [f.angle_mean, f.angle_min, f.angle_max] {
            assert!((a - FRAC_PI_2).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_gradient_pair_is_skipped() {
        // x1^2 - 1 <= 0 has zero gradient at the origin.
        let cs = vec![Constraint::quadratic(vec![1.0, 0.0], vec![0.0, 0.0], -1.0), Constraint::linear(vec![0.0, 1.0], -0.5)];
        let f = extract_features(&inst(cs, 2), 100, 0.1, 1).unwrap();
        assert!(!f.angle_valid);
        assert_eq!(f.angle_max, 0.0);
    }

    #[test]
    fn half_box_ratio() {
        let f = extract_features(&inst(vec![Constraint::linear(vec![1.0, 0.0], 0.0)], 2), 100_000, 0.1, 3).unwrap();
        assert!((f.feasibility_ratio_global - 0.5).abs() < 0.01);
        assert!((f.feasibility_ratio_near_optimum - 0.5).abs() < 0.01);
    }

    #[test]
    fn deterministic_and_array_round_trip() {
        let cs = vec![Constraint::linear(vec![0.3, -0.2, 0.9], -0.1), Constraint::quadratic(vec![0.5, 0.1, 0.0], vec![0.2, 0.2, 0.2], -0.3)];
        let i = inst(cs, 3);
        let a = extract_features(&i, 500, 0.2, 11).unwrap();
        assert_eq!(a, extract_features(&i, 500, 0.2, 11).unwrap());
        assert_eq!(FeatureVector::from_array(&a.to_array()).unwrap(), a);
        assert!(extract_features(&i, 0, 0.2, 11).is_err());
        assert!(extract_features(&i, 10, 1.5, 11).is_err());
    }

    #[test]
    fn normalization_examples() {
        let same = vec![vec![1.0, 2.0, 3.0]; 4];
        let (z, _) = normalize_features(&same).unwrap();
        assert!(z.iter().flatten().all(|v| *v == 0.0));

        let v = vec![1.5, -2.0, 0.0];
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        let (z, stats) = normalize_features(&[v.clone(), neg]).unwrap();
        assert_eq!(z[0], vec![1.0, -1.0, 0.0]);
        assert_eq!(z[1], vec![-1.0, 1.0, 0.0]);
        assert_eq!(stats.apply(&v).unwrap(), z[0]);
        assert!(normalize_features(&[]).is_err());
    }

    #[test]
    fn feature_table_round_trip() {
        let cs = vec![Constraint::linear(vec![1.0, 0.0], -0.5), Constraint::linear(vec![0.0, 1.0], -0.5)];
        let f = extract_features(&inst(cs, 2), 100, 0.1, 1).unwrap();
        let rows = vec![("a".to_string(), f.clone()), ("b".to_string(), f)];
        let mut buf = Vec::new();
        write_feature_table(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("instance_id,n_linear,n_quadratic,"));
        assert_eq!(read_feature_table(text.as_bytes()).unwrap(), rows);
    }
}
