//! JSON configuration schemas for the subcommands.
//!
//! Every schema rejects unknown fields so that a typo fails loudly instead of
//! silently falling back to a default, and every error raised while building
//! model objects out of a config is reported with the config path attached.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;

use qaloha::bvp::BvpConfig;
use qaloha::channel::{Channel2, Channel3, Preset};
use qaloha::policy::{Policy2, Policy3};

use crate::CliError;

/// A parsed config file together with its raw bytes (hashed into the output
/// provenance) and its path (attached to downstream errors).
#[derive(Debug)]
pub struct Loaded<T> {
    pub value: T,
    pub bytes: Vec<u8>,
    pub path: PathBuf,
}

/// Read and parse the `--config` file, failing with a subcommand-specific
/// message when the flag is missing.
pub fn load<T: DeserializeOwned>(path: Option<&Path>, cmd: &str) -> Result<Loaded<T>, CliError> {
    let path = path.ok_or_else(|| {
        CliError::Usage(format!("`{cmd}` needs --config pointing to a JSON file"))
    })?;
    let bytes = fs::read(path).map_err(|e| CliError::Config {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    let value = serde_json::from_slice(&bytes).map_err(|e| CliError::Config {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    Ok(Loaded {
        value,
        bytes,
        path: path.to_path_buf(),
    })
}

/// Attach the config path to a model-layer error.
pub fn in_config<T>(path: &Path, r: qaloha::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Config {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

fn config_err(path: &Path, msg: impl Into<String>) -> CliError {
    CliError::Config {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

/// Two-user channel: either a named preset with its success probabilities or
/// a full conditional-success table.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec2 {
    /// Named reception model, e.g. `{"kind": "mpr", "b": 0.3, "c": 0.1}`.
    #[serde(default)]
    pub preset: Option<Preset>,
    /// Solo-success probability used with `preset`.
    #[serde(default)]
    pub p: Option<f64>,
    /// Solo-success probability once the queue-aware adaptation kicks in;
    /// defaults to 1 (the strongest adaptation).
    #[serde(default)]
    pub p_adapted: Option<f64>,
    /// Full conditional-success table (mutually exclusive with `preset`).
    #[serde(default)]
    pub table: Option<Channel2>,
}

impl ChannelSpec2 {
    pub fn build(&self, path: &Path) -> Result<Channel2, CliError> {
        match (&self.table, &self.preset) {
            (Some(table), None) => {
                if self.p.is_some() || self.p_adapted.is_some() {
                    return Err(config_err(
                        path,
                        "channel: `p`/`p_adapted` only apply to `preset`, not `table`",
                    ));
                }
                Ok(table.clone())
            }
            (None, Some(preset)) => {
                let p = self.p.ok_or_else(|| {
                    config_err(path, "channel: `preset` needs a solo-success probability `p`")
                })?;
                in_config(path, preset.build(p, self.p_adapted.unwrap_or(1.0)))
            }
            _ => Err(config_err(
                path,
                "channel: provide exactly one of `preset` or `table`",
            )),
        }
    }
}

/// Three-user channel: a symmetric or collision shorthand, or the full table.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec3 {
    #[serde(default)]
    pub symmetric: Option<Symmetric3>,
    #[serde(default)]
    pub collision: Option<Collision3>,
    #[serde(default)]
    pub table: Option<Channel3>,
}

/// Success probabilities of a user-symmetric three-user channel, keyed by how
/// many users transmit and how many queues the receiver knows to be empty.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Symmetric3 {
    pub p_solo: f64,
    pub p_pair: f64,
    pub p_triple: f64,
    pub p_solo_one_empty: f64,
    pub p_pair_one_empty: f64,
    pub p_solo_two_empty: f64,
}

/// Collision channel: only lone transmissions succeed, with the success
/// probability improving as queues empty.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Collision3 {
    pub p: f64,
    pub p_one_empty: f64,
    pub p_two_empty: f64,
}

impl ChannelSpec3 {
    pub fn build(&self, path: &Path) -> Result<Channel3, CliError> {
        match (&self.table, &self.symmetric, &self.collision) {
            (Some(table), None, None) => Ok(table.clone()),
            (None, Some(s), None) => in_config(
                path,
                Channel3::symmetric(
                    s.p_solo,
                    s.p_pair,
                    s.p_triple,
                    s.p_solo_one_empty,
                    s.p_pair_one_empty,
                    s.p_solo_two_empty,
                ),
            ),
            (None, None, Some(c)) => {
                in_config(path, Channel3::collision(c.p, c.p_one_empty, c.p_two_empty))
            }
            _ => Err(config_err(
                path,
                "channel: provide exactly one of `symmetric`, `collision`, or `table`",
            )),
        }
    }
}

/// Numerical settings of the boundary-value solver.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    /// Uniform grid size for the conformal map and contour quadrature.
    pub grid: usize,
    /// Fixed-point tolerance of the boundary correspondence.
    pub map_tol: f64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let b = BvpConfig::default();
        SolverSpec {
            grid: b.grid,
            map_tol: b.map_tol,
        }
    }
}

impl SolverSpec {
    pub fn to_bvp(self) -> BvpConfig {
        BvpConfig {
            grid: self.grid,
            map_tol: self.map_tol,
        }
    }
}

/// Inclusive rectangular rate grid; `steps` is the number of points per axis
/// and zero steps on any axis makes the grid empty.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid2 {
    #[serde(default)]
    pub start: [f64; 2],
    pub stop: [f64; 2],
    pub steps: [usize; 2],
}

/// Evenly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|j| a + (b - a) * j as f64 / (n - 1) as f64)
            .collect(),
    }
}

impl Grid2 {
    pub fn points(&self) -> Vec<[f64; 2]> {
        let xs = linspace(self.start[0], self.stop[0], self.steps[0]);
        let ys = linspace(self.start[1], self.stop[1], self.steps[1]);
        let mut pts = Vec::with_capacity(xs.len() * ys.len());
        for &x in &xs {
            for &y in &ys {
                pts.push([x, y]);
            }
        }
        pts
    }
}

/// Three-axis analogue of [`Grid2`].
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid3 {
    #[serde(default)]
    pub start: [f64; 3],
    pub stop: [f64; 3],
    pub steps: [usize; 3],
}

impl Grid3 {
    pub fn points(&self) -> Vec<[f64; 3]> {
        let xs = linspace(self.start[0], self.stop[0], self.steps[0]);
        let ys = linspace(self.start[1], self.stop[1], self.steps[1]);
        let zs = linspace(self.start[2], self.stop[2], self.steps[2]);
        let mut pts = Vec::with_capacity(xs.len() * ys.len() * zs.len());
        for &x in &xs {
            for &y in &ys {
                for &z in &zs {
                    pts.push([x, y, z]);
                }
            }
        }
        pts
    }
}

fn default_eps() -> f64 {
    1e-9
}

/// `region`: classify a rate grid against the two-user region.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub channel: ChannelSpec2,
    pub policy: Policy2,
    pub grid: Grid2,
    /// Half-width of the marginal band around the region boundary.
    #[serde(default = "default_eps")]
    pub eps: f64,
}

/// `region3`: classify a rate grid against the three-user region.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region3Config {
    pub channel: ChannelSpec3,
    pub policy: Policy3,
    pub grid: Grid3,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub solver: SolverSpec,
}

/// Which policy families the closure envelope sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosureVariant {
    /// Busy and empty-watched probabilities vary independently with
    /// `alpha <= alpha_star <= 1`.
    Adaptive,
    /// No adaptation: `alpha_star = alpha`.
    Uniform,
}

impl ClosureVariant {
    pub fn label(self) -> &'static str {
        match self {
            ClosureVariant::Adaptive => "adaptive",
            ClosureVariant::Uniform => "uniform",
        }
    }
}

fn default_variants() -> Vec<ClosureVariant> {
    vec![ClosureVariant::Adaptive, ClosureVariant::Uniform]
}

/// Grid resolution of the closure sweep.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClosureSweep {
    pub alpha_steps: usize,
    pub alpha_star_steps: usize,
    pub rays: usize,
}

impl Default for ClosureSweep {
    fn default() -> Self {
        ClosureSweep {
            alpha_steps: 21,
            alpha_star_steps: 21,
            rays: 90,
        }
    }
}

/// `closure`: envelope of the union of stability regions over a policy grid.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosureConfig {
    pub channel: ChannelSpec2,
    #[serde(default)]
    pub sweep: ClosureSweep,
    #[serde(default = "default_variants")]
    pub variants: Vec<ClosureVariant>,
}

fn default_samples() -> usize {
    256
}

/// `kernel`: branch points and contours of the transform kernel at one rate
/// pair.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub channel: ChannelSpec2,
    pub policy: Policy2,
    pub lambda: [f64; 2],
    /// Contour sample count per plane.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

/// `conformal-diag`: boundary-correspondence diagnostics of the disk map for
/// the kernel contour at one rate pair.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConformalConfig {
    pub channel: ChannelSpec2,
    pub policy: Policy2,
    pub lambda: [f64; 2],
    #[serde(default)]
    pub solver: SolverSpec,
}

/// `delay-bvp`: solver-backed queue and delay figures.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayBvpConfig {
    pub channel: ChannelSpec2,
    pub policy: Policy2,
    #[serde(default)]
    pub solver: SolverSpec,
    /// Rate grid for `--sweep`.
    #[serde(default)]
    pub sweep: Option<Grid2>,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_p_tilde() -> f64 {
    1.0
}

/// One reception model in a symmetric-delay sweep.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    /// Free-form label written to the `channel` column.
    pub label: String,
    /// Success probability of each user when both transmit.
    #[serde(default)]
    pub b: f64,
    /// Probability that both succeed simultaneously.
    #[serde(default)]
    pub c: f64,
}

/// `delay-symmetric`: closed-form delay sweeps for symmetric users.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaySymmetricConfig {
    /// Busy transmit probability.
    pub alpha: f64,
    /// Empty-watched transmit probability.
    pub alpha_star: f64,
    /// Solo-success probability.
    pub p: f64,
    /// Solo-success probability under adaptation.
    #[serde(default = "default_p_tilde")]
    pub p_tilde: f64,
    /// Common arrival rate, required by `--sweep-alpha-star`.
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Reception models to sweep; each becomes one `channel` label.
    pub channels: Vec<CurveSpec>,
}

/// `optimize-alpha`: delay minimization over the busy transmit probability.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeConfig {
    pub alpha_star: f64,
    pub p: f64,
    #[serde(default = "default_p_tilde")]
    pub p_tilde: f64,
    /// Success probability when both users transmit (capture subclass).
    #[serde(default)]
    pub b: f64,
    pub lambda: f64,
}

/// Optional system override for `validate`: the simulation-backed checks run
/// against this system instead of the built-in ones.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec2 {
    pub channel: ChannelSpec2,
    pub policy: Policy2,
    pub lambda: [f64; 2],
}

fn default_validate_slots() -> u64 {
    6_000_000
}

fn default_drift_slots() -> u64 {
    4_000_000
}

/// `validate`: suite parameters; every field is optional.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    /// Extra system whose solver predictions are checked against simulation.
    #[serde(default)]
    pub system: Option<SystemSpec2>,
    /// Slot budget of the simulation-backed checks.
    #[serde(default = "default_validate_slots")]
    pub slots: u64,
    /// Slot budget of the drift (stability-verdict) checks.
    #[serde(default = "default_drift_slots")]
    pub drift_slots: u64,
    /// Base seed of the suite.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig {
            system: None,
            slots: default_validate_slots(),
            drift_slots: default_drift_slots(),
            seed: None,
        }
    }
}

/// Parse `START:STOP:STEP` into the sorted list of sweep values.
pub fn parse_range(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let err = |msg: String| CliError::Usage(format!("range `{s}`: {msg}"));
    if parts.len() != 3 {
        return Err(err("expected START:STOP:STEP".into()));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| err(e.to_string()))?;
    let [start, stop, step] = [nums[0], nums[1], nums[2]];
    if !step.is_finite() || step <= 0.0 {
        return Err(err(format!("step must be positive, got {step}")));
    }
    if !start.is_finite() || !stop.is_finite() || stop < start {
        return Err(err(format!("need START <= STOP, got {start} > {stop}")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

/// Parse a `--mode` override: `normal`, `dominant:K`, or `interfering:K`.
pub fn parse_mode(s: &str) -> Result<qaloha::sim::Mode, CliError> {
    use qaloha::sim::Mode;
    let err = || {
        CliError::Usage(format!(
            "mode `{s}`: expected `normal`, `dominant:K`, or `interfering:K`"
        ))
    };
    if s.eq_ignore_ascii_case("normal") {
        return Ok(Mode::Normal);
    }
    let (kind, user) = s.split_once(':').ok_or_else(err)?;
    let k: usize = user.trim().parse().map_err(|_| err())?;
    match kind.trim().to_ascii_lowercase().as_str() {
        "dominant" => Ok(Mode::Dominant(k)),
        "interfering" => Ok(Mode::Interfering(k)),
        _ => Err(err()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_parse_inclusively() {
        let v = parse_range("0.1:0.3:0.1").unwrap();
        assert_eq!(v.len(), 3);
        assert!((v[2] - 0.3).abs() < 1e-12);
        assert!(parse_range("0.3:0.1:0.1").is_err());
        assert!(parse_range("0:1:0").is_err());
        assert!(parse_range("0:1").is_err());
    }

    #[test]
    fn modes_parse_with_user_index() {
        use qaloha::sim::Mode;
        assert_eq!(parse_mode("normal").unwrap(), Mode::Normal);
        assert_eq!(parse_mode("dominant:1").unwrap(), Mode::Dominant(1));
        assert_eq!(parse_mode("interfering:0").unwrap(), Mode::Interfering(0));
        assert!(parse_mode("dominant").is_err());
        assert!(parse_mode("boss:1").is_err());
    }

    #[test]
    fn linspace_handles_degenerate_counts() {
        assert!(linspace(0.0, 1.0, 0).is_empty());
        assert_eq!(linspace(0.25, 1.0, 1), vec![0.25]);
        let v = linspace(0.0, 1.0, 5);
        assert_eq!(v.len(), 5);
        assert!((v[4] - 1.0).abs() < 1e-15);
    }
}
