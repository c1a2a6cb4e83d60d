//! Run configuration, read from JSON or TOML.

use std::path::Path;

use latinv_core::geometry::{LimitSign, SpectralParam};
use latinv_core::green::{GreenMethod, GreenOptions};
use latinv_core::lattice::{LatticePoint, RectDomain};
use latinv_core::scattering::Potential;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialSpec {
    Zero,
    Random { lo: f64, hi: f64, seed: u64 },
    Entries { entries: Vec<PotentialEntry> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialEntry {
    pub point: Vec<i64>,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreenConfig {
    pub method: GreenMethod,
    pub tolerance: Option<f64>,
}

/// Gate thresholds; every field can be overridden on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub unitarity: f64,
    pub symmetry: f64,
    pub recovered_symmetry: f64,
    pub factorization: f64,
    pub synth: f64,
    pub consistency: f64,
    /// Defaults to 1e-9 for the reduction method and 1e-4 otherwise.
    pub green_defect: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            unitarity: 1e-4,
            symmetry: 1e-12,
            recovered_symmetry: 1e-4,
            factorization: 1e-3,
            synth: 1e-10,
            consistency: 1e-6,
            green_defect: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub d: usize,
    pub m: i64,
    pub lambda: f64,
    #[serde(default = "default_sign")]
    pub sign: LimitSign,
    #[serde(default)]
    pub potential: Option<PotentialSpec>,
    /// Angular nodes: the count for `d = 2`, the Gauss–Legendre order for `d = 3`.
    #[serde(default)]
    pub n_theta: Option<usize>,
    #[serde(default)]
    pub green: Option<GreenConfig>,
    /// Sup-norm radius of the offsets tabulated by `green`.
    #[serde(default)]
    pub green_radius: Option<i64>,
    #[serde(default)]
    pub surface_samples: Option<usize>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_sign() -> LimitSign {
    LimitSign::Plus
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?
        } else {
            serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.domain()?;
        if !self.lambda.is_finite() {
            return Err(CliError::Config("lambda must be finite".into()));
        }
        self.potential()?;
        if let Some(n) = self.n_theta {
            if n < 2 {
                return Err(CliError::Config("n_theta must be at least 2".into()));
            }
        }
        Ok(())
    }

    pub fn domain(&self) -> Result<RectDomain, CliError> {
        Ok(RectDomain::new(self.d, self.m)?)
    }

    /// The energy as a scattering parameter; rejects thresholds and energies
    /// outside the low band.
    pub fn spectral(&self) -> Result<SpectralParam, CliError> {
        let p = SpectralParam::new(self.d, self.lambda, self.sign)?;
        p.require_low_band()?;
        Ok(p)
    }

    pub fn spectral_any_band(&self) -> Result<SpectralParam, CliError> {
        Ok(SpectralParam::new(self.d, self.lambda, self.sign)?)
    }

    pub fn potential(&self) -> Result<Potential, CliError> {
        let dom = self.domain()?;
        Ok(match self.potential.as_ref().unwrap_or(&PotentialSpec::Zero) {
            PotentialSpec::Zero => Potential::zero(&dom),
            PotentialSpec::Random { lo, hi, seed } => Potential::random(&dom, *lo, *hi, *seed)?,
            PotentialSpec::Entries { entries } => {
                let e: Vec<(LatticePoint, f64)> = entries.iter().map(|e| (LatticePoint::new(e.point.clone()), e.value)).collect();
                Potential::from_entries(self.d, self.m, &e)?
            }
        })
    }

    pub fn seed(&self) -> Option<u64> {
        match self.potential {
            Some(PotentialSpec::Random { seed, .. }) => Some(seed),
            _ => None,
        }
    }

    pub fn green_options(&self) -> GreenOptions {
        match self.green {
            None => GreenOptions::default_for(self.d),
            Some(g) => {
                let mut o = GreenOptions::with_method(self.d, g.method);
                if let Some(t) = g.tolerance {
                    o.tolerance = t;
                }
                o
            }
        }
    }

    pub fn green_defect_tol(&self) -> f64 {
        self.tolerances.green_defect.unwrap_or(match self.green_options().method {
            GreenMethod::Reduction => 1e-9,
            GreenMethod::EpsExtrapolation => 1e-4,
        })
    }

    /// At least four angular nodes per boundary vertex.
    pub fn n_theta(&self) -> usize {
        let nb = self.domain().map(|d| d.n_boundary()).unwrap_or(0);
        self.n_theta.unwrap_or(match self.d {
            2 => 256.max(4 * nb),
            _ => {
                let mut n = 8;
                while 2 * n * n < 4 * nb {
                    n += 1;
                }
                n
            }
        })
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(canon.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_and_toml_agree() {
        let json = r#"{"d": 2, "m": 2, "lambda": 0.3, "potential": {"kind": "random", "lo": -0.5, "hi": 0.5, "seed": 42}}"#;
        let toml_text = "d = 2\nm = 2\nlambda = 0.3\n[potential]\nkind = \"random\"\nlo = -0.5\nhi = 0.5\nseed = 42\n";
        let a: RunConfig = serde_json::from_str(json).unwrap();
        let b: RunConfig = toml::from_str(toml_text).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.seed(), Some(42));
        assert_eq!(a.n_theta(), 256);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad: RunConfig = serde_json::from_str(r#"{"d": 2, "m": 2, "lambda": 1.0}"#).unwrap();
        assert!(bad.validate().is_ok());
        assert!(matches!(bad.spectral(), Err(CliError::Core(latinv_core::Error::ThresholdEnergy(_)))));
        let outside: RunConfig = serde_json::from_str(r#"{"d": 2, "m": 2, "lambda": 0.3, "potential": {"kind": "entries", "entries": [{"point": [0, 1], "value": 1.0}]}}"#).unwrap();
        assert!(outside.validate().is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"d": 2, "m": 2, "lambda": 0.3, "typo": 1}"#).is_err());
    }

    #[test]
    fn grid_rule_for_d3() {
        let c: RunConfig = serde_json::from_str(r#"{"d": 3, "m": 2, "lambda": 0.4}"#).unwrap();
        let nb = c.domain().unwrap().n_boundary();
        let n = c.n_theta();
        assert!(2 * n * n >= 4 * nb);
    }
}
