use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SATURATION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    Linear,
    Quadratic,
    InvertedExponential,
}

impl std::str::FromStr for FitModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "quadratic" => Ok(Self::Quadratic),
            "inverted_exponential" | "inverted-exponential" => Ok(Self::InvertedExponential),
            other => Err(Error::Parse(format!("unknown fit model {other:?}"))),
        }
    }
}

/// Parameters are `(slope, intercept)`, `(a, b, c)` of `ap² + bp + c`, or
/// `(a, b)` of `1 − exp(−a(p − b))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitModel,
    pub params: Vec<f64>,
    #[serde(rename = "r2")]
    pub r_squared: f64,
    pub n_points: usize,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

impl FitResult {
    pub fn predict(&self, x: f64) -> f64 {
        let p = &self.params;
        match self.model {
            FitModel::Linear => p[0] * x + p[1],
            FitModel::Quadratic => p[0] * x * x + p[1] * x + p[2],
            FitModel::InvertedExponential => 1.0 - (-p[0] * (x - p[1])).exp(),
        }
    }
}

pub fn fit(model: FitModel, points: &[(f64, f64)]) -> Result<FitResult> {
    match model {
        FitModel::Linear => fit_linear(points),
        FitModel::Quadratic => fit_quadratic(points),
        FitModel::InvertedExponential => fit_inverted_exponential(points),
    }
}

/// Ordinary least squares `y = slope·x + intercept`.
pub fn fit_linear(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!("linear fit needs 2 points, got {}", points.len())));
    }
    let params = polynomial_least_squares(points, 1)?;
    Ok(finish(FitModel::Linear, vec![params[1], params[0]], points))
}

/// Least-squares `F(p) = ap² + bp + c`.
pub fn fit_quadratic(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!("quadratic fit needs 3 points, got {}", points.len())));
    }
    let params = polynomial_least_squares(points, 2)?;
    Ok(finish(FitModel::Quadratic, vec![params[2], params[1], params[0]], points))
}

/// `F(p) = 1 − exp(−a(p − b))`, started from the log-linear fit of
/// `ln(1 − F) = −a(p − b)` and refined by damped Gauss-Newton on the
/// original residuals. Saturated points (`F ≥ 1 − 1e-12`, including values
/// clipped just below 1) carry no usable logarithm and are dropped.
pub fn fit_inverted_exponential(points: &[(f64, f64)]) -> Result<FitResult> {
    let usable: Vec<(f64, f64)> = points.iter().copied().filter(|&(_, f)| f < 1.0 - SATURATION).collect();
    let dropped = points.len() - usable.len();
    if dropped > 0 {
        log::warn!("inverted-exponential fit: excluded {dropped} point(s) with F >= 1");
    }
    if usable.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "inverted-exponential fit needs 2 points with F < 1, got {}",
            usable.len()
        )));
    }
    let logs: Vec<(f64, f64)> = usable.iter().map(|&(p, f)| (p, (1.0 - f).ln())).collect();
    let line = polynomial_least_squares(&logs, 1)?;
    let mut a = -line[1];
    if a == 0.0 {
        return Err(Error::SingularCoefficient("inverted-exponential rate is zero".into()));
    }
    let mut b = line[0] / a;

    let sse = |a: f64, b: f64| -> f64 {
        usable
            .iter()
            .map(|&(p, f)| {
                let r = f - (1.0 - (-a * (p - b)).exp());
                r * r
            })
            .sum()
    };
    let mut current = sse(a, b);
    for _ in 0..200 {
        // J^T J and J^T r for the two parameters
        let (mut jaa, mut jab, mut jbb, mut ga, mut gb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(p, f) in &usable {
            let e = (-a * (p - b)).exp();
            let r = f - (1.0 - e);
            let da = (p - b) * e;
            let db = -a * e;
            jaa += da * da;
            jab += da * db;
            jbb += db * db;
            ga += da * r;
            gb += db * r;
        }
        let det = jaa * jbb - jab * jab;
        if det.abs() < 1e-300 {
            break;
        }
        let step_a = (jbb * ga - jab * gb) / det;
        let step_b = (jaa * gb - jab * ga) / det;
        let mut scale = 1.0;
        let mut improved = false;
        while scale > 1e-10 {
            let (na, nb) = (a + scale * step_a, b + scale * step_b);
            let trial = sse(na, nb);
            if trial.is_finite() && trial <= current {
                let gain = current - trial;
                a = na;
                b = nb;
                current = trial;
                improved = gain > 1e-15 * current.max(1e-300) && (step_a.abs() + step_b.abs()) * scale > 1e-14;
                break;
            }
            scale *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok(finish(FitModel::InvertedExponential, vec![a, b], &usable))
}

/// Coefficients `c_0..c_degree` of the least-squares polynomial.
fn polynomial_least_squares(points: &[(f64, f64)], degree: usize) -> Result<Vec<f64>> {
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() <= degree {
        return Err(Error::RankDeficient(format!(
            "degree-{degree} fit needs {} distinct abscissae, got {}",
            degree + 1,
            distinct.len()
        )));
    }
    if points.iter().any(|&(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::InsufficientData("non-finite data point".into()));
    }
    // Centre and scale x for conditioning, then map the coefficients back.
    let mean = points.iter().map(|p| p.0).sum::<f64>() / points.len() as f64;
    let spread = points.iter().map(|p| (p.0 - mean).abs()).fold(0.0, f64::max);
    let design = DMatrix::from_fn(points.len(), degree + 1, |i, k| ((points[i].0 - mean) / spread).powi(k as i32));
    let rhs = DVector::from_iterator(points.len(), points.iter().map(|p| p.1));
    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= 1e-12 * smax {
        return Err(Error::RankDeficient("design matrix is singular".into()));
    }
    let scaled = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::RankDeficient(e.to_string()))?;

    // Σ_k s_k ((x − m)/w)^k expanded in powers of x.
    let mut coeffs = vec![0.0; degree + 1];
    for (k, &s) in scaled.iter().enumerate() {
        let factor = s / spread.powi(k as i32);
        for j in 0..=k {
            coeffs[j] += factor * binomial(k, j) as f64 * (-mean).powi((k - j) as i32);
        }
    }
    Ok(coeffs)
}

fn binomial(n: usize, k: usize) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

fn finish(model: FitModel, params: Vec<f64>, points: &[(f64, f64)]) -> FitResult {
    let mut result = FitResult {
        model,
        params,
        r_squared: 0.0,
        n_points: points.len(),
        residuals: Vec::new(),
    };
    result.residuals = points.iter().map(|&(x, y)| y - result.predict(x)).collect();
    let mean = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - mean).powi(2)).sum();
    let ss_res: f64 = result.residuals.iter().map(|r| r * r).sum();
    let scale: f64 = points.iter().map(|p| p.1 * p.1).sum::<f64>().max(f64::MIN_POSITIVE);
    // Constant data leaves only roundoff in ss_tot.
    result.r_squared = if ss_tot > 1e-24 * scale {
        1.0 - ss_res / ss_tot
    } else if ss_res <= 1e-24 * scale {
        1.0
    } else {
        0.0
    };
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn exact_line() {
        let pts: Vec<(f64, f64)> = (2..=10).map(|x| (x as f64, 2.439 * x as f64 + 1.0)).collect();
        let f = fit_linear(&pts).unwrap();
        assert!((f.params[0] - 2.439).abs() < 1e-12);
        assert!((f.params[1] - 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(fit_linear(&[(1.0, 2.0), (1.0, 3.0)]).is_err());
        assert!(fit_linear(&[(1.0, 2.0)]).is_err());
    }

    #[test]
    fn exact_quadratic() {
        let pts: Vec<(f64, f64)> = (1..=8).map(|p| (p as f64, 2.0 * (p * p) as f64 + 3.0 * p as f64 + 1.0)).collect();
        let f = fit_quadratic(&pts).unwrap();
        for (got, want) in f.params.iter().zip([2.0, 3.0, 1.0]) {
            assert!((got - want).abs() < 1e-10, "{:?}", f.params);
        }
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_data() {
        let pts: Vec<(f64, f64)> = (1..=6).map(|p| (p as f64, 0.7)).collect();
        let f = fit_quadratic(&pts).unwrap();
        assert!(f.params[0].abs() < 1e-12 && f.params[1].abs() < 1e-12);
        assert!((f.params[2] - 0.7).abs() < 1e-12);
        assert_eq!(f.r_squared, 1.0);
        let same_p = [(2.0, 0.1), (2.0, 0.2), (2.0, 0.3)];
        assert!(matches!(fit_quadratic(&same_p), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn residuals_orthogonal_to_design() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let pts: Vec<(f64, f64)> = (1..=15)
            .map(|p| (p as f64, 0.01 * (p * p) as f64 - 0.1 * p as f64 + 0.3 + noise.sample(&mut rng)))
            .collect();
        let f = fit_quadratic(&pts).unwrap();
        for k in 0..3 {
            let dot: f64 = pts.iter().zip(&f.residuals).map(|(p, r)| p.0.powi(k) * r).sum();
            assert!(dot.abs() < 1e-8, "column {k}: {dot}");
        }
        let g = fit_linear(&pts).unwrap();
        for k in 0..2 {
            let dot: f64 = pts.iter().zip(&g.residuals).map(|(p, r)| p.0.powi(k) * r).sum();
            assert!(dot.abs() < 1e-8);
        }
    }

    #[test]
    fn noisy_quadratic_recovery() {
        // Monte-Carlo: the spread of fitted coefficients matches the OLS
        // covariance σ²(XᵀX)⁻¹; every trial stays within 4 standard errors.
        let sigma = 0.01;
        let xs: Vec<f64> = (1..=12).map(|p| p as f64).collect();
        let x = DMatrix::from_fn(xs.len(), 3, |i, k| xs[i].powi(2 - k as i32));
        let cov = (x.transpose() * &x).try_inverse().unwrap() * sigma * sigma;
        let truth = [0.02, -0.15, 0.4];
        let noise = Normal::new(0.0, sigma).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut sum_sq = [0.0; 3];
        for _ in 0..100 {
            let pts: Vec<(f64, f64)> = xs
                .iter()
                .map(|&p| (p, truth[0] * p * p + truth[1] * p + truth[2] + noise.sample(&mut rng)))
                .collect();
            let f = fit_quadratic(&pts).unwrap();
            for k in 0..3 {
                let z = (f.params[k] - truth[k]) / cov[(k, k)].sqrt();
                assert!(z.abs() < 4.0, "coefficient {k}: z = {z}");
                sum_sq[k] += z * z;
            }
        }
        for s in sum_sq {
            let var = s / 100.0;
            assert!(var > 0.6 && var < 1.5, "{var}");
        }
    }

    #[test]
    fn inverted_exponential_exact() {
        let pts: Vec<(f64, f64)> = (1..=10).map(|p| (p as f64, 1.0 - (-0.5 * (p as f64 - 1.0)).exp())).collect();
        let f = fit_inverted_exponential(&pts).unwrap();
        assert!((f.params[0] - 0.5).abs() < 1e-8, "{:?}", f.params);
        assert!((f.params[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn inverted_exponential_excludes_saturated() {
        let mut pts: Vec<(f64, f64)> = (1..=6).map(|p| (p as f64, 1.0 - (-0.8 * (p as f64 - 0.5)).exp())).collect();
        pts.push((40.0, 1.0));
        pts.push((41.0, 1.0 - 1e-15));
        let f = fit_inverted_exponential(&pts).unwrap();
        assert_eq!(f.n_points, 6);
        assert!((f.params[0] - 0.8).abs() < 1e-8);
        assert!(fit_inverted_exponential(&[(1.0, 0.5), (2.0, 1.0), (3.0, 1.0)]).is_err());
    }

    #[test]
    fn inverted_exponential_noisy() {
        let noise = Normal::new(0.0, 0.005).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let pts: Vec<(f64, f64)> = (1..=15)
                .map(|p| {
                    let f = 1.0 - (-0.3 * (p as f64 - 0.8)).exp() + noise.sample(&mut rng);
                    (p as f64, f.min(0.999))
                })
                .collect();
            let f = fit_inverted_exponential(&pts).unwrap();
            assert!((f.params[0] - 0.3).abs() < 0.03, "{:?}", f.params);
            assert!((f.params[1] - 0.8).abs() < 0.3, "{:?}", f.params);
            assert!(f.r_squared > 0.99);
        }
    }

    #[test]
    fn json_shape() {
        let f = fit_linear(&[(0.0, 1.0), (1.0, 3.0)]).unwrap();
        let v: serde_json::Value = serde_json::to_value(&f).unwrap();
        let mut keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        keys.sort();
        assert_eq!(keys, ["model", "n_points", "params", "r2"]);
        assert_eq!(v["model"], "linear");
    }
}
