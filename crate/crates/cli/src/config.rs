//! Plain-text run configuration: one `key = value` per line, `#` comments.
//!
//! ```text
//! # stable cell, derived coefficients
//! alpha_i = 1
//! alpha_o = 2
//! gamma_o = 1
//! sigma = 1
//! R = 2
//! N = 64
//! M = 64
//! initial = mode:2:1e-4
//! initial = (3, 1e-5, -2e-6)
//! dt = 1e-3
//! t_end = 1
//! ```

use hsc_core::dispersion::DEFAULT_N_MAX;
use hsc_core::elliptic::GridConfig;
use hsc_core::evolution::SimulationConfig;
use hsc_core::params::{CellModel, DerivedCoeffs, PhysicalParams};
use hsc_core::verify::random_shape;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

const PHYSICAL: [&str; 10] = ["eta_i", "eta_o", "rho_i", "rho_o", "b", "omega", "e_i", "e_o", "f_i", "f_o"];
const DERIVED: [&str; 6] = ["alpha_i", "alpha_o", "beta_i", "beta_o", "gamma_i", "gamma_o"];
const OTHER: [&str; 14] = [
    "sigma",
    "R",
    "N",
    "M",
    "M_inner",
    "M_outer",
    "dt",
    "t_end",
    "snapshot_every",
    "output_dir",
    "seed",
    "n_max",
    "stop_amplitude",
    "initial",
];

/// Initial perturbation entries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum InitialTerm {
    /// ρ̂_n = re + i·im, with the conjugate at −n.
    Mode { n: i64, re: f64, im: f64 },
    /// amplitude·cos nθ
    Preset { n: i64, amplitude: f64 },
    /// Seeded random shape over modes 0..=8 with ‖ρ‖∞ = amplitude.
    Random { amplitude: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ParamSet {
    Physical(PhysicalParams),
    Derived { coeffs: DerivedCoeffs, sigma: f64, cell_radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub params: ParamSet,
    pub grid: GridConfig,
    pub initial: Vec<InitialTerm>,
    pub dt: Option<f64>,
    pub t_end: f64,
    pub snapshot_every: usize,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub n_max: usize,
    pub stop_amplitude: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
        let mut initial = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(perr(line, format!("expected `key = value`, got `{content}`")));
            };
            let (key, value) = (key.trim(), value.trim());
            if !(PHYSICAL.contains(&key) || DERIVED.contains(&key) || OTHER.contains(&key)) {
                return Err(perr(line, format!("unknown key `{key}`")));
            }
            if value.is_empty() {
                return Err(perr(line, format!("empty value for `{key}`")));
            }
            if key == "initial" {
                initial.extend(parse_initial(value).map_err(|m| perr(line, m))?);
                continue;
            }
            if values.insert(key, (line, value)).is_some() {
                return Err(perr(line, format!("duplicate key `{key}`")));
            }
        }
        let num = |key: &str| -> Result<Option<f64>, ConfigError> {
            match values.get(key) {
                None => Ok(None),
                Some(&(line, v)) => v.parse::<f64>().map(Some).map_err(|_| perr(line, format!("`{key}` expects a number, got `{v}`"))),
            }
        };
        let int = |key: &str| -> Result<Option<u64>, ConfigError> {
            match values.get(key) {
                None => Ok(None),
                Some(&(line, v)) => v.parse::<u64>().map(Some).map_err(|_| perr(line, format!("`{key}` expects a non-negative integer, got `{v}`"))),
            }
        };
        let has_physical = PHYSICAL.iter().any(|k| values.contains_key(k));
        let has_derived = DERIVED.iter().any(|k| values.contains_key(k));
        let sigma = num("sigma")?.ok_or_else(|| ConfigError::Invalid("missing `sigma`".into()))?;
        let cell_radius = num("R")?.ok_or_else(|| ConfigError::Invalid("missing `R`".into()))?;
        let params = match (has_physical, has_derived) {
            (true, true) => return Err(ConfigError::Invalid("physical and derived parameters cannot be mixed".into())),
            (false, false) => return Err(ConfigError::Invalid("no fluid parameters given".into())),
            (true, false) => {
                let get = |k: &str| -> Result<f64, ConfigError> { num(k)?.ok_or_else(|| ConfigError::Invalid(format!("missing `{k}`"))) };
                ParamSet::Physical(PhysicalParams {
                    eta_i: get("eta_i")?,
                    eta_o: get("eta_o")?,
                    rho_i: get("rho_i")?,
                    rho_o: get("rho_o")?,
                    b: get("b")?,
                    omega: get("omega")?,
                    sigma,
                    cell_radius,
                    e_i: get("e_i")?,
                    e_o: get("e_o")?,
                    f_i: num("f_i")?.unwrap_or(0.0),
                    f_o: num("f_o")?.unwrap_or(0.0),
                })
            }
            (false, true) => {
                let get = |k: &str, default: Option<f64>| -> Result<f64, ConfigError> {
                    num(k)?.or(default).ok_or_else(|| ConfigError::Invalid(format!("missing `{k}`")))
                };
                ParamSet::Derived {
                    coeffs: DerivedCoeffs::new(
                        get("alpha_i", None)?,
                        get("alpha_o", None)?,
                        get("beta_i", Some(0.0))?,
                        get("beta_o", Some(0.0))?,
                        get("gamma_i", Some(0.0))?,
                        get("gamma_o", Some(0.0))?,
                    ),
                    sigma,
                    cell_radius,
                }
            }
        };
        let n = int("N")?.unwrap_or(64) as usize;
        let m = int("M")?.unwrap_or(64) as usize;
        let grid = GridConfig {
            n,
            m_inner: int("M_inner")?.map_or(m, |v| v as usize),
            m_outer: int("M_outer")?.map_or(m, |v| v as usize),
        };
        let cfg = RunConfig {
            params,
            grid,
            initial,
            dt: num("dt")?,
            t_end: num("t_end")?.unwrap_or(1.0),
            snapshot_every: int("snapshot_every")?.unwrap_or(10) as usize,
            output_dir: values.get("output_dir").map_or_else(|| PathBuf::from("out"), |&(_, v)| PathBuf::from(v)),
            seed: int("seed")?.unwrap_or(0),
            n_max: int("n_max")?.unwrap_or(DEFAULT_N_MAX as u64) as usize,
            stop_amplitude: num("stop_amplitude")?,
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad(format!("dt must be positive, got {dt}"));
            }
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be non-negative, got {}", self.t_end));
        }
        if self.snapshot_every == 0 {
            return bad("snapshot_every must be at least 1".into());
        }
        if self.n_max == 0 {
            return bad("n_max must be at least 1 (empty mode range)".into());
        }
        if !(self.grid.n.is_power_of_two() && self.grid.n >= 16) {
            return bad(format!("N must be a power of two ≥ 16, got {}", self.grid.n));
        }
        for term in &self.initial {
            let k = match term {
                InitialTerm::Mode { n, .. } | InitialTerm::Preset { n, .. } => n.abs(),
                InitialTerm::Random { .. } => 0,
            };
            if k > (self.grid.n / 2) as i64 {
                return bad(format!("initial mode {k} above the grid Nyquist mode {}", self.grid.n / 2));
            }
        }
        self.model()?;
        Ok(())
    }

    pub fn model(&self) -> Result<CellModel, ConfigError> {
        match &self.params {
            ParamSet::Physical(p) => CellModel::from_physical(p),
            ParamSet::Derived { coeffs, sigma, cell_radius } => CellModel::from_derived(*coeffs, *sigma, *cell_radius),
        }
        .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Initial spectrum as (n, Re, Im) entries, random presets expanded with
    /// the configured seed.
    pub fn initial_modes(&self) -> Result<Vec<(i64, f64, f64)>, ConfigError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::new();
        for term in &self.initial {
            match *term {
                InitialTerm::Mode { n, re, im } => out.push((n, re, im)),
                InitialTerm::Preset { n, amplitude } => out.push(if n == 0 { (0, amplitude, 0.0) } else { (n.abs(), 0.5 * amplitude, 0.0) }),
                InitialTerm::Random { amplitude } => {
                    let shape = random_shape(&mut rng, self.grid.n, amplitude).map_err(ConfigError::Invalid)?;
                    let spec = shape.rho().to_spectral();
                    for k in 0..=spec.nyquist() {
                        let c = spec.get(k);
                        if c.norm() > 0.0 {
                            out.push((k, c.re, c.im));
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn simulation(&self) -> Result<SimulationConfig, ConfigError> {
        Ok(SimulationConfig {
            model: self.model()?,
            grid: self.grid,
            initial: self.initial_modes()?,
            dt: self.dt,
            t_end: self.t_end,
            snapshot_every: self.snapshot_every,
            stop_amplitude: self.stop_amplitude,
        })
    }
}

fn perr(line: usize, msg: String) -> ConfigError {
    ConfigError::Parse { line, msg }
}

/// `mode:n:amplitude`, `random:amplitude` or a list of `(n, re, im)` tuples.
fn parse_initial(value: &str) -> Result<Vec<InitialTerm>, String> {
    let number = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("bad number `{}` in initial data", s.trim()));
    if let Some(rest) = value.strip_prefix("mode:") {
        let (n, a) = rest.split_once(':').ok_or("preset must read mode:n:amplitude")?;
        let n = n.trim().parse::<i64>().map_err(|_| format!("bad mode `{n}`"))?;
        return Ok(vec![InitialTerm::Preset { n, amplitude: number(a)? }]);
    }
    if let Some(rest) = value.strip_prefix("random:") {
        return Ok(vec![InitialTerm::Random { amplitude: number(rest)? }]);
    }
    let mut out = Vec::new();
    let mut rest = value.trim();
    while !rest.is_empty() {
        let open = rest.strip_prefix('(').ok_or_else(|| format!("expected `(n, re, im)`, got `{rest}`"))?;
        let (inner, tail) = open.split_once(')').ok_or("unclosed `(`")?;
        let parts: Vec<&str> = inner.split(',').collect();
        if parts.len() != 3 {
            return Err(format!("tuple `({inner})` needs three entries"));
        }
        let n = parts[0].trim().parse::<i64>().map_err(|_| format!("bad mode `{}`", parts[0].trim()))?;
        out.push(InitialTerm::Mode {
            n,
            re: number(parts[1])?,
            im: number(parts[2])?,
        });
        rest = tail.trim_start().trim_start_matches(',').trim_start();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const P0: &str = "alpha_i = 1\nalpha_o = 2\ngamma_o = 1\nsigma = 1\nR = 2\n";

    #[test]
    fn parses_derived_config_with_defaults() {
        let cfg = RunConfig::parse(&format!("{P0}initial = mode:2:1e-4\ninitial = (3, 1e-5, -2e-6), (-1, 0, 1e-6)\n")).unwrap();
        assert_eq!(cfg.grid, GridConfig::default());
        assert_eq!(cfg.n_max, DEFAULT_N_MAX);
        assert_eq!(
            cfg.initial_modes().unwrap(),
            vec![(2, 5e-5, 0.0), (3, 1e-5, -2e-6), (-1, 0.0, 1e-6)]
        );
        let m = cfg.model().unwrap();
        assert_eq!(m.coeffs.gamma_jump(), 1.0);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let err = RunConfig::parse(&format!("{P0}\n# comment\nN = sixty-four\n")).unwrap_err();
        assert_eq!(err.to_string(), "line 8: `N` expects a non-negative integer, got `sixty-four`");
        let err = RunConfig::parse("alpha_i 1\n").unwrap_err();
        assert!(err.to_string().starts_with("line 1:"));
        let err = RunConfig::parse(&format!("{P0}colour = red\n")).unwrap_err();
        assert!(err.to_string().starts_with("line 6: unknown key"));
        let err = RunConfig::parse(&format!("{P0}initial = (1, 2)\n")).unwrap_err();
        assert!(err.to_string().starts_with("line 6:"));
    }

    #[test]
    fn rejects_inconsistent_settings() {
        assert!(RunConfig::parse(&format!("{P0}n_max = 0\n")).is_err());
        assert!(RunConfig::parse(&format!("{P0}N = 48\n")).is_err());
        assert!(RunConfig::parse(&format!("{P0}eta_i = 1\n")).is_err());
        assert!(RunConfig::parse("alpha_i = 1\nalpha_o = 2\nsigma = 1\nR = 1.5\n").is_err());
        assert!(RunConfig::parse(&format!("{P0}N = 16\ninitial = mode:9:1e-3\n")).is_err());
    }

    #[test]
    fn random_preset_is_seeded() {
        let text = format!("{P0}initial = random:0.01\nseed = 7\n");
        let a = RunConfig::parse(&text).unwrap().initial_modes().unwrap();
        let b = RunConfig::parse(&text).unwrap().initial_modes().unwrap();
        assert_eq!(a, b);
        let c = RunConfig::parse(&text.replace("seed = 7", "seed = 8")).unwrap().initial_modes().unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn physical_parameters() {
        let text = "eta_i = 1\neta_o = 2\nrho_i = 1\nrho_o = 3\nb = 1\nomega = 1\ne_i = 1\ne_o = 1\nsigma = 0.5\nR = 3\n";
        let cfg = RunConfig::parse(text).unwrap();
        let m = cfg.model().unwrap();
        assert_eq!(m.coeffs.alpha_o, 24.0);
        assert_eq!(m.densities, Some((1.0, 3.0)));
    }
}
