use crate::error::{Error, Result};

/// Endpoint slack when deciding whether `c` is reached.
const ENDPOINT_TOL: f64 = 1e-12;

/// Parses `"a:b:c"`, `"a:c"` (unit step) or a single number into the array
/// `a, a+b, …` up to and including `c`.
///
/// Values are rounded to 12 decimals so that `0.2:0.2:1.6` yields `1.4`
/// rather than `1.4000000000000001`.
pub fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.trim().split(':').map(str::trim).collect();
    let num = |s: &str| -> Result<f64> {
        let v: f64 = s
            .parse()
            .map_err(|_| Error::Parse(format!("bad number {s:?} in range {spec:?}")))?;
        if !v.is_finite() {
            return Err(Error::Parse(format!("non-finite value in range {spec:?}")));
        }
        Ok(v)
    };
    let (a, b, c) = match parts.as_slice() {
        [x] => return Ok(vec![num(x)?]),
        [a, c] => (num(a)?, 1.0, num(c)?),
        [a, b, c] => (num(a)?, num(b)?, num(c)?),
        _ => return Err(Error::Parse(format!("malformed range {spec:?}"))),
    };
    if (c - a).abs() <= ENDPOINT_TOL {
        return Ok(vec![a]);
    }
    if b == 0.0 || (b < 0.0) != (c < a) {
        if c > a {
            return Err(Error::Parse(format!("range {spec:?} has non-positive step")));
        }
        // Empty, as in MATLAB's 5:1.
        return Ok(Vec::new());
    }
    let count = ((c - a) / b + ENDPOINT_TOL / b.abs()).floor() as usize + 1;
    if count > 10_000_000 {
        return Err(Error::Parse(format!("range {spec:?} is too long")));
    }
    Ok((0..count).map(|k| round12(a + k as f64 * b)).collect())
}

/// [`parse_range`] restricted to positive integers.
pub fn parse_depth_range(spec: &str) -> Result<Vec<usize>> {
    parse_range(spec)?
        .into_iter()
        .map(|v| {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::Parse(format!("depth range {spec:?} contains {v}")))
            }
        })
        .collect()
}

fn round12(x: f64) -> f64 {
    let r = (x * 1e12).round() / 1e12;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}
