//! Range syntax for sweep flags: `2..10`, `0..0.25pi`, `pi/8`.

use std::f64::consts::PI;

use crate::config::ConfigError;

/// Inclusive integer range `a..b`, or a single integer.
pub fn parse_dims(s: &str) -> Result<Vec<usize>, ConfigError> {
    let bad = || ConfigError(format!("expected an integer or a..b, got {s:?}"));
    let int = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    let dims: Vec<usize> = match s.split_once("..") {
        Some((a, b)) => {
            let (a, b) = (int(a)?, int(b.trim_start_matches('='))?);
            if a > b {
                return Err(bad());
            }
            (a..=b).collect()
        }
        None => vec![int(s)?],
    };
    if dims.contains(&0) {
        return Err(ConfigError("dimensions must be at least 1".into()));
    }
    Ok(dims)
}

/// A real number with an optional `pi` factor: `0.25pi`, `pi`, `pi/8`, `-2pi`.
pub fn parse_angle(s: &str) -> Result<f64, ConfigError> {
    let bad = || ConfigError(format!("expected an angle such as 0.25pi, got {s:?}"));
    let t = s.trim().to_ascii_lowercase();
    let (scale, rest) = match t.find("pi") {
        None => return t.parse::<f64>().map_err(|_| bad()),
        Some(at) => {
            let coef = t[..at].trim().trim_end_matches('*');
            let coef = match coef {
                "" => 1.0,
                "-" => -1.0,
                c => c.parse::<f64>().map_err(|_| bad())?,
            };
            (coef * PI, t[at + 2..].trim().to_string())
        }
    };
    if rest.is_empty() {
        return Ok(scale);
    }
    let div = rest
        .strip_prefix('/')
        .and_then(|d| d.trim().parse::<f64>().ok())
        .filter(|d| *d != 0.0)
        .ok_or_else(bad)?;
    Ok(scale / div)
}

/// `a..b` of angles, or a single angle `a..a`.
pub fn parse_angle_range(s: &str) -> Result<(f64, f64), ConfigError> {
    match s.split_once("..") {
        Some((a, b)) => Ok((parse_angle(a)?, parse_angle(b)?)),
        None => {
            let a = parse_angle(s)?;
            Ok((a, a))
        }
    }
}

/// `points` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        n => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims() {
        assert_eq!(parse_dims("2..10").unwrap(), (2..=10).collect::<Vec<_>>());
        assert_eq!(parse_dims("4").unwrap(), vec![4]);
        assert_eq!(parse_dims("3..=4").unwrap(), vec![3, 4]);
        assert!(parse_dims("5..2").is_err());
        assert!(parse_dims("0..2").is_err());
        assert!(parse_dims("two").is_err());
    }

    #[test]
    fn angles() {
        assert_eq!(parse_angle("0").unwrap(), 0.0);
        assert_eq!(parse_angle("0.25pi").unwrap(), 0.25 * PI);
        assert_eq!(parse_angle("pi").unwrap(), PI);
        assert_eq!(parse_angle("-pi").unwrap(), -PI);
        assert_eq!(parse_angle("pi/8").unwrap(), PI / 8.0);
        assert_eq!(parse_angle("2*pi").unwrap(), 2.0 * PI);
        assert_eq!(parse_angle("1.5").unwrap(), 1.5);
        assert!(parse_angle("pi/0").is_err());
        assert!(parse_angle("tau").is_err());
        assert_eq!(parse_angle_range("0..0.25pi").unwrap(), (0.0, 0.25 * PI));
    }

    #[test]
    fn spacing() {
        assert_eq!(linspace(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
        assert_eq!(linspace(2.0, 3.0, 1), vec![2.0]);
    }
}
