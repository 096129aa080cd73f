//! Run configuration: flags override a JSON config file, which overrides
//! built-in defaults.

use std::fmt;
use std::path::Path;

use binsync::biphoton::{MeasurementModel, ScanGeometry};
use binsync::classical::SidebandLookup;
use binsync::modeops::SinusoidDrive;
use serde::{Deserialize, Serialize};

use crate::CommonArgs;

/// A configuration problem; maps to exit status 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub rf_frequency_hz: f64,
    pub depth_rad: f64,
    pub bin_width_hz: f64,
    pub signal_bins: usize,
    pub idler_bins: usize,
    pub passband_bins: usize,
    pub integration_s: f64,
    pub seed: u64,
    pub filter_crosstalk: f64,
    pub accidental_rate: f64,
    pub flux_scale: f64,
    pub sideband_window_hz: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = MeasurementModel::default();
        Self {
            rf_frequency_hz: 19e9,
            depth_rad: 1.42,
            bin_width_hz: model.scan.bin_width_hz,
            signal_bins: model.scan.signal_bins,
            idler_bins: model.scan.idler_bins,
            passband_bins: model.passband_bins,
            integration_s: 2.0,
            seed: 0,
            filter_crosstalk: model.filter_crosstalk,
            accidental_rate: model.accidental_rate,
            flux_scale: model.flux_scale,
            sideband_window_hz: SidebandLookup::default().window_hz,
        }
    }
}

impl RunConfig {
    pub fn resolve(common: &CommonArgs) -> anyhow::Result<Self> {
        let mut cfg = match &common.config {
            Some(path) => Self::from_file(path)?,
            None => Self::default(),
        };
        macro_rules! overlay {
            ($($field:ident),*) => {
                $(if let Some(v) = common.$field {
                    cfg.$field = v;
                })*
            };
        }
        overlay!(
            rf_frequency_hz,
            depth_rad,
            bin_width_hz,
            passband_bins,
            integration_s,
            seed
        );
        if let Some(grid) = &common.grid {
            let (s, i) = parse_grid(grid)?;
            cfg.signal_bins = s;
            cfg.idler_bins = i;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            anyhow::Error::new(e).context(format!("reading config {}", path.display()))
        })?;
        serde_json::from_str(&text)
            .map_err(|e| ConfigError(format!("{}: {e}", path.display())).into())
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let positive = |v: f64, name: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ConfigError(format!("{name} must be positive, got {v}")))
            }
        };
        positive(self.rf_frequency_hz, "rf_frequency_hz")?;
        positive(self.bin_width_hz, "bin_width_hz")?;
        positive(self.integration_s, "integration_s")?;
        positive(self.flux_scale, "flux_scale")?;
        if !(self.depth_rad.is_finite() && self.depth_rad >= 0.0) {
            return Err(ConfigError(format!(
                "depth_rad must be nonnegative, got {}",
                self.depth_rad
            )));
        }
        if !(self.sideband_window_hz.is_finite() && self.sideband_window_hz >= 0.0) {
            return Err(ConfigError("sideband_window_hz must be nonnegative".into()));
        }
        if self.signal_bins == 0 || self.idler_bins == 0 || self.passband_bins == 0 {
            return Err(ConfigError("bin counts must be positive".into()));
        }
        self.model()
            .validate()
            .map_err(|e| ConfigError(e.to_string()))
    }

    pub fn drive(&self) -> anyhow::Result<SinusoidDrive> {
        Ok(SinusoidDrive::new(self.rf_frequency_hz, self.depth_rad)?)
    }

    /// Bins are spaced by the RF frequency so the modulators step by one bin.
    pub fn model(&self) -> MeasurementModel {
        MeasurementModel {
            passband_bins: self.passband_bins,
            filter_crosstalk: self.filter_crosstalk,
            accidental_rate: self.accidental_rate,
            flux_scale: self.flux_scale,
            scan: ScanGeometry {
                signal_bins: self.signal_bins,
                idler_bins: self.idler_bins,
                bin_width_hz: self.bin_width_hz,
                bin_spacing_hz: self.rf_frequency_hz,
            },
        }
    }

    pub fn lookup(&self) -> SidebandLookup {
        SidebandLookup {
            window_hz: self.sideband_window_hz,
        }
    }
}

/// `"9x9"` or `"9"`.
fn parse_grid(s: &str) -> Result<(usize, usize), ConfigError> {
    let bad = || ConfigError(format!("grid must look like 9x9, got {s:?}"));
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    match s.split_once(['x', 'X', '×']) {
        Some((a, b)) => Ok((parse(a)?, parse(b)?)),
        None => {
            let n = parse(s)?;
            Ok((n, n))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("9x9").unwrap(), (9, 9));
        assert_eq!(parse_grid("5X7").unwrap(), (5, 7));
        assert_eq!(parse_grid("11").unwrap(), (11, 11));
        assert!(parse_grid("9by9").is_err());
    }

    #[test]
    fn partial_config_keeps_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"depth_rad": 0.5}"#).unwrap();
        assert_eq!(cfg.depth_rad, 0.5);
        assert_eq!(cfg.rf_frequency_hz, 19e9);
        assert!(serde_json::from_str::<RunConfig>(r#"{"depth": 0.5}"#).is_err());
    }
}
