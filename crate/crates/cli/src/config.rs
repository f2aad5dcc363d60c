//! Run configuration: flat `key = value` text with optional `[section]`
//! prefixes, validated into a [`RunConfig`] with every violation collected.

use std::f64::consts::PI;
use std::path::PathBuf;

use grapheneqg_core::{EdgePotential, HillConfig, StackSpec, ThetaGrid};
use serde::Serialize;

use crate::error::CliError;

/// Potential kind and its parameters as written in the config.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PotentialConfig {
    Zero,
    Cosine { amplitude: f64 },
    Sampled { values: Vec<f64>, tolerance: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tolerances {
    pub steps: usize,
    pub scan_step: f64,
    pub root_tol: f64,
    pub dirichlet_guard: f64,
    pub touch_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let h = HillConfig::default();
        Tolerances {
            steps: h.steps,
            scan_step: h.scan_step,
            root_tol: h.root_tol,
            dirichlet_guard: h.dirichlet_guard,
            touch_tol: h.touch_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub layers: u32,
    pub t0: f64,
    pub potential: PotentialConfig,
    pub lambda_range: (f64, f64),
    pub theta_grid: (usize, usize),
    pub window: (f64, f64),
    pub slice_samples: usize,
    /// Number of Hill bands (from the bottom of the λ-range) given surfaces.
    pub dispersion_bands: usize,
    pub mode_count: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub csv: bool,
    pub json: bool,
    pub tolerances: Tolerances,
}

impl Default for RunConfig {
    fn default() -> Self {
        let d = 2.0 * PI / 3.0;
        RunConfig {
            layers: 2,
            t0: 0.55,
            potential: PotentialConfig::Zero,
            lambda_range: (0.0, 40.0),
            theta_grid: (128, 128),
            window: (d - PI / 4.0, d + PI / 4.0),
            slice_samples: 256,
            dispersion_bands: 1,
            mode_count: 100,
            seed: 7,
            output_dir: PathBuf::from("out"),
            csv: true,
            json: true,
            tolerances: Tolerances::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub t0: Option<f64>,
    pub layers: Option<u32>,
    pub grid: Option<String>,
}

impl RunConfig {
    pub fn stack(&self) -> Result<StackSpec, CliError> {
        Ok(StackSpec::new(self.layers, self.t0)?)
    }

    pub fn edge_potential(&self) -> Result<EdgePotential, CliError> {
        Ok(match &self.potential {
            PotentialConfig::Zero => EdgePotential::Zero,
            PotentialConfig::Cosine { amplitude } => EdgePotential::cosine(*amplitude),
            PotentialConfig::Sampled { values, tolerance } => {
                EdgePotential::sampled(values.clone(), *tolerance)?
            }
        })
    }

    pub fn hill_config(&self) -> HillConfig {
        let t = &self.tolerances;
        HillConfig {
            steps: t.steps,
            scan_step: t.scan_step,
            root_tol: t.root_tol,
            dirichlet_guard: t.dirichlet_guard,
            touch_tol: t.touch_tol,
        }
    }

    pub fn grid(&self) -> Result<ThetaGrid, CliError> {
        Ok(ThetaGrid::new(self.theta_grid.0, self.theta_grid.1)?)
    }

    /// Applies command-line overrides and revalidates.
    pub fn with_overrides(mut self, o: &Overrides) -> Result<RunConfig, CliError> {
        let mut errors = Vec::new();
        if let Some(out) = &o.out {
            self.output_dir = out.clone();
        }
        if let Some(t0) = o.t0 {
            self.t0 = t0;
        }
        if let Some(layers) = o.layers {
            self.layers = layers;
        }
        if let Some(g) = &o.grid {
            match parse_grid(g) {
                Ok(grid) => self.theta_grid = grid,
                Err(e) => errors.push(format!("--grid: {e}")),
            }
        }
        errors.extend(self.violations());
        if errors.is_empty() {
            Ok(self)
        } else {
            Err(CliError::Validation(errors))
        }
    }

    /// Every rule the configuration breaks.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !matches!(self.layers, 2 | 3) {
            v.push(format!(
                "layers: {} is not supported (use 2 or 3)",
                self.layers
            ));
        }
        if !(self.t0.is_finite() && self.t0 > 0.0) {
            v.push(format!(
                "t0: must be finite and > 0 (t0 = 0 is a singular limit), got {}",
                self.t0
            ));
        }
        match &self.potential {
            PotentialConfig::Zero => {}
            PotentialConfig::Cosine { amplitude } => {
                if !amplitude.is_finite() {
                    v.push("potential.amplitude: must be finite".into());
                }
            }
            PotentialConfig::Sampled { values, tolerance } => {
                if let Err(e) = EdgePotential::sampled(values.clone(), *tolerance) {
                    v.push(format!("potential.values: {e}"));
                }
            }
        }
        let (lo, hi) = self.lambda_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            v.push(format!("lambda: need finite min < max, got [{lo}, {hi}]"));
        }
        let (n1, n2) = self.theta_grid;
        if n1 < 2 || n2 < 2 {
            v.push(format!(
                "grid: need at least 2 nodes per axis, got {n1}x{n2}"
            ));
        }
        let (a, b) = self.window;
        if !(a.is_finite() && b.is_finite() && a < b) {
            v.push(format!("diagonal.window: need lo < hi, got [{a}, {b}]"));
        }
        if self.slice_samples < grapheneqg_core::cones::MIN_SLICE_SAMPLES {
            v.push(format!(
                "diagonal.samples: need at least {}, got {}",
                grapheneqg_core::cones::MIN_SLICE_SAMPLES,
                self.slice_samples
            ));
        }
        if self.dispersion_bands == 0 {
            v.push("dispersion.bands: must be at least 1".into());
        }
        if self.mode_count == 0 {
            v.push("modes.count: must be at least 1".into());
        }
        if !self.csv && !self.json {
            v.push("output: at least one of csv, json must be enabled".into());
        }
        if let Err(e) = self.hill_config().validate() {
            v.push(format!("tolerance: {e}"));
        }
        v
    }
}

/// `N1xN2`
pub fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected N1xN2, got {s:?}"))?;
    let n1 = a
        .trim()
        .parse()
        .map_err(|_| format!("bad grid size {a:?}"))?;
    let n2 = b
        .trim()
        .parse()
        .map_err(|_| format!("bad grid size {b:?}"))?;
    Ok((n1, n2))
}

const KEYS: &[&str] = &[
    "layers",
    "t0",
    "potential.kind",
    "potential.amplitude",
    "potential.values",
    "potential.tolerance",
    "lambda.min",
    "lambda.max",
    "grid.n1",
    "grid.n2",
    "grid",
    "diagonal.window_lo",
    "diagonal.window_hi",
    "diagonal.samples",
    "dispersion.bands",
    "modes.count",
    "modes.seed",
    "output.dir",
    "output.formats",
    "tolerance.steps",
    "tolerance.scan_step",
    "tolerance.root_tol",
    "tolerance.dirichlet_guard",
    "tolerance.touch_tol",
];

/// Parses and validates config text. All problems are reported together.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    let mut errors = Vec::new();
    let mut section = String::new();
    let mut kind: Option<String> = None;
    let mut amplitude = 1.0;
    let mut values: Option<Vec<f64>> = None;
    let mut sample_tol = grapheneqg_core::potential::DEFAULT_SAMPLED_EVENNESS_TOL;
    let mut seen: Vec<String> = Vec::new();

    for (no, raw) in text.lines().enumerate() {
        let line_no = no + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            match rest.strip_suffix(']') {
                Some(name) if !name.trim().is_empty() => section = name.trim().to_string(),
                _ => errors.push(format!("line {line_no}: malformed section header {line:?}")),
            }
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            errors.push(format!(
                "line {line_no}: expected key = value, got {line:?}"
            ));
            continue;
        };
        let k = k.trim();
        let v = v.trim();
        let key = if section.is_empty() || k.contains('.') {
            k.to_string()
        } else {
            format!("{section}.{k}")
        };
        if !KEYS.contains(&key.as_str()) {
            errors.push(format!("line {line_no}: unknown key {key:?}"));
            continue;
        }
        if seen.contains(&key) {
            errors.push(format!("line {line_no}: duplicate key {key:?}"));
            continue;
        }
        seen.push(key.clone());

        let real = |errors: &mut Vec<String>| -> Option<f64> {
            match v.parse::<f64>() {
                Ok(x) if x.is_finite() => Some(x),
                _ => {
                    errors.push(format!(
                        "line {line_no}: {key}: expected a number, got {v:?}"
                    ));
                    None
                }
            }
        };
        let int = |errors: &mut Vec<String>| -> Option<u64> {
            match v.parse::<u64>() {
                Ok(x) => Some(x),
                Err(_) => {
                    errors.push(format!(
                        "line {line_no}: {key}: expected a nonnegative integer, got {v:?}"
                    ));
                    None
                }
            }
        };
        match key.as_str() {
            "layers" => {
                if let Some(x) = int(&mut errors) {
                    cfg.layers = x.min(u32::MAX as u64) as u32;
                }
            }
            "t0" => {
                if let Some(x) = real(&mut errors) {
                    cfg.t0 = x;
                }
            }
            "potential.kind" => kind = Some(v.to_ascii_lowercase()),
            "potential.amplitude" => {
                if let Some(x) = real(&mut errors) {
                    amplitude = x;
                }
            }
            "potential.values" => {
                let parsed: Result<Vec<f64>, _> =
                    v.split(',').map(|s| s.trim().parse::<f64>()).collect();
                match parsed {
                    Ok(xs) => values = Some(xs),
                    Err(_) => errors.push(format!(
                        "line {line_no}: potential.values: expected comma-separated numbers"
                    )),
                }
            }
            "potential.tolerance" => {
                if let Some(x) = real(&mut errors) {
                    sample_tol = x;
                }
            }
            "lambda.min" => {
                if let Some(x) = real(&mut errors) {
                    cfg.lambda_range.0 = x;
                }
            }
            "lambda.max" => {
                if let Some(x) = real(&mut errors) {
                    cfg.lambda_range.1 = x;
                }
            }
            "grid" => match parse_grid(v) {
                Ok(g) => cfg.theta_grid = g,
                Err(e) => errors.push(format!("line {line_no}: grid: {e}")),
            },
            "grid.n1" => {
                if let Some(x) = int(&mut errors) {
                    cfg.theta_grid.0 = x as usize;
                }
            }
            "grid.n2" => {
                if let Some(x) = int(&mut errors) {
                    cfg.theta_grid.1 = x as usize;
                }
            }
            "diagonal.window_lo" => {
                if let Some(x) = real(&mut errors) {
                    cfg.window.0 = x;
                }
            }
            "diagonal.window_hi" => {
                if let Some(x) = real(&mut errors) {
                    cfg.window.1 = x;
                }
            }
            "diagonal.samples" => {
                if let Some(x) = int(&mut errors) {
                    cfg.slice_samples = x as usize;
                }
            }
            "dispersion.bands" => {
                if let Some(x) = int(&mut errors) {
                    cfg.dispersion_bands = x as usize;
                }
            }
            "modes.count" => {
                if let Some(x) = int(&mut errors) {
                    cfg.mode_count = x as usize;
                }
            }
            "modes.seed" => {
                if let Some(x) = int(&mut errors) {
                    cfg.seed = x;
                }
            }
            "output.dir" => cfg.output_dir = PathBuf::from(v),
            "output.formats" => {
                cfg.csv = false;
                cfg.json = false;
                for f in v.split(',').map(str::trim) {
                    match f {
                        "csv" => cfg.csv = true,
                        "json" => cfg.json = true,
                        other => errors.push(format!(
                            "line {line_no}: output.formats: unknown format {other:?}"
                        )),
                    }
                }
            }
            "tolerance.steps" => {
                if let Some(x) = int(&mut errors) {
                    cfg.tolerances.steps = x as usize;
                }
            }
            "tolerance.scan_step" => {
                if let Some(x) = real(&mut errors) {
                    cfg.tolerances.scan_step = x;
                }
            }
            "tolerance.root_tol" => {
                if let Some(x) = real(&mut errors) {
                    cfg.tolerances.root_tol = x;
                }
            }
            "tolerance.dirichlet_guard" => {
                if let Some(x) = real(&mut errors) {
                    cfg.tolerances.dirichlet_guard = x;
                }
            }
            "tolerance.touch_tol" => {
                if let Some(x) = real(&mut errors) {
                    cfg.tolerances.touch_tol = x;
                }
            }
            _ => unreachable!("key list and match arms agree"),
        }
    }

    cfg.potential = match kind.as_deref() {
        None | Some("zero") => PotentialConfig::Zero,
        Some("cosine") => PotentialConfig::Cosine { amplitude },
        Some("sampled") => match values {
            Some(values) => PotentialConfig::Sampled {
                values,
                tolerance: sample_tol,
            },
            None => {
                errors.push("potential.values: required for kind = sampled".into());
                PotentialConfig::Zero
            }
        },
        Some(other) => {
            errors.push(format!(
                "potential.kind: unknown kind {other:?} (use zero, cosine or sampled)"
            ));
            PotentialConfig::Zero
        }
    };

    errors.extend(cfg.violations());
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(CliError::Validation(errors))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn violations(text: &str) -> Vec<String> {
        match parse_config(text) {
            Err(CliError::Validation(v)) => v,
            other => panic!("expected a validation error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = parse_config("layers=3").unwrap();
        assert_eq!(cfg.layers, 3);
        assert_eq!(cfg.t0, 0.55);
        assert_eq!(cfg.theta_grid, (128, 128));
        assert_eq!(cfg.lambda_range, (0.0, 40.0));
        assert_eq!(cfg.dispersion_bands, 1);
        let d = 2.0 * PI / 3.0;
        assert_eq!(cfg.window, (d - PI / 4.0, d + PI / 4.0));
    }

    #[test]
    fn zero_coupling_is_rejected() {
        let v = violations("t0=0");
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("t0"));
    }

    #[test]
    fn unsupported_layers_are_rejected() {
        assert!(violations("layers=5")[0].contains("layers"));
    }

    #[test]
    fn errors_are_aggregated() {
        let v = violations("t0 = -1\nlayers = 4\nbogus = 1\ngrid.n1 = abc\n");
        assert_eq!(v.len(), 4, "{v:?}");
    }

    #[test]
    fn sections_prefix_keys() {
        let text = "# demo\nt0 = 1.0\n[potential]\nkind = cosine\namplitude = 3 # strong\n\
                    [lambda]\nmin = -5\nmax = 25\n[grid]\nn1 = 32\nn2 = 48\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.potential, PotentialConfig::Cosine { amplitude: 3.0 });
        assert_eq!(cfg.lambda_range, (-5.0, 25.0));
        assert_eq!(cfg.theta_grid, (32, 48));
    }

    #[test]
    fn dotted_keys_work_without_sections() {
        let cfg = parse_config("grid = 16x20\ndispersion.bands = 2").unwrap();
        assert_eq!(cfg.theta_grid, (16, 20));
        assert_eq!(cfg.dispersion_bands, 2);
    }

    #[test]
    fn sampled_potential_must_be_even() {
        let v = violations("potential.kind = sampled\npotential.values = 0, 1, 2");
        assert!(v[0].contains("potential.values"));
        let cfg = parse_config("potential.kind = sampled\npotential.values = 1, 0, 1").unwrap();
        assert!(matches!(cfg.potential, PotentialConfig::Sampled { .. }));
    }

    #[test]
    fn overrides_win_and_revalidate() {
        let cfg = parse_config("t0 = 0.3").unwrap();
        let o = Overrides {
            t0: Some(1.0),
            layers: Some(3),
            grid: Some("24x24".into()),
            out: Some("here".into()),
        };
        let cfg = cfg.with_overrides(&o).unwrap();
        assert_eq!((cfg.t0, cfg.layers, cfg.theta_grid), (1.0, 3, (24, 24)));
        assert_eq!(cfg.output_dir, PathBuf::from("here"));
        let bad = Overrides {
            t0: Some(0.0),
            grid: Some("8by8".into()),
            ..Overrides::default()
        };
        let Err(CliError::Validation(v)) = cfg.with_overrides(&bad) else {
            panic!()
        };
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn duplicate_and_malformed_lines() {
        let v = violations("t0 = 1\nt0 = 2\njust words\n[oops\n");
        assert_eq!(v.len(), 3, "{v:?}");
    }
}
