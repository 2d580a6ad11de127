use anyhow::{bail, Context, Result};
use platoon_core::assessment::{SimConfig, Thresholds};
use platoon_core::channel::ChannelOverrides;
use platoon_core::protocol::Role;
use platoon_core::scenario::{EnvironmentConditions, Lighting, Scenario};
use platoon_core::vehicle::{CaccGains, ControlConfig, FallbackConfig};
use serde::Deserialize;
use std::path::{Path, PathBuf};

pub const OUT_DIR_ENV: &str = "PLATOON_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "platoon-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Closed,
    Open,
    Comm,
    Sensor,
}

/// Parameter grid of a sweep. Every listed field contributes one axis; rows
/// are the Cartesian product in field order.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub latency_mean: Vec<f64>,
    pub latency_jitter: Vec<f64>,
    pub loss_prob: Vec<f64>,
    pub congestion_extra_latency: Vec<f64>,
    pub congestion_threshold: Vec<usize>,
    pub visibility_factor: Vec<f64>,
    pub lighting: Vec<Lighting>,
}

fn axis<T: Clone>(rows: Vec<ChannelOverrides>, values: &[T], set: impl Fn(&mut ChannelOverrides, T)) -> Vec<ChannelOverrides> {
    if values.is_empty() {
        return rows;
    }
    rows.iter()
        .flat_map(|r| {
            values.iter().map(|v| {
                let mut r = r.clone();
                set(&mut r, v.clone());
                r
            })
        })
        .collect()
}

impl SweepSpec {
    pub fn has_channel_axis(&self) -> bool {
        !(self.latency_mean.is_empty()
            && self.latency_jitter.is_empty()
            && self.loss_prob.is_empty()
            && self.congestion_extra_latency.is_empty()
            && self.congestion_threshold.is_empty())
    }

    pub fn has_environment_axis(&self) -> bool {
        !(self.visibility_factor.is_empty() && self.lighting.is_empty())
    }

    pub fn channel_rows(&self) -> Vec<ChannelOverrides> {
        if !self.has_channel_axis() {
            return Vec::new();
        }
        let rows = vec![ChannelOverrides::default()];
        let rows = axis(rows, &self.latency_mean, |r, v| r.latency_mean = Some(v));
        let rows = axis(rows, &self.latency_jitter, |r, v| r.latency_jitter = Some(v));
        let rows = axis(rows, &self.loss_prob, |r, v| r.loss_prob = Some(v));
        let rows = axis(rows, &self.congestion_extra_latency, |r, v| r.congestion_extra_latency = Some(v));
        axis(rows, &self.congestion_threshold, |r, v| r.congestion_threshold = Some(v))
    }

    /// Environment settings layered over the scenario's own conditions.
    pub fn environment_rows(&self, base: &EnvironmentConditions) -> Vec<EnvironmentConditions> {
        if !self.has_environment_axis() {
            return Vec::new();
        }
        let vis = if self.visibility_factor.is_empty() { vec![base.visibility_factor] } else { self.visibility_factor.clone() };
        let light = if self.lighting.is_empty() { vec![base.lighting] } else { self.lighting.clone() };
        vis.iter()
            .flat_map(|v| {
                light.iter().map(|l| EnvironmentConditions { visibility_factor: *v, lighting: *l, ..base.clone() })
            })
            .collect()
    }
}

/// Contents of a TOML run configuration file; every field is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfigFile {
    pub scenario: Option<String>,
    pub role: Option<Role>,
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub hold_speed: Option<bool>,
    pub gains: Option<CaccGains>,
    pub fallback: Option<FallbackConfig>,
    pub channel: Option<ChannelOverrides>,
    pub thresholds: Option<Thresholds>,
    pub sweep: Option<SweepSpec>,
}

impl RunConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Command-line values; each one overrides the file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct RunFlags {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scenario file, or the name of a bundled scenario.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Role of the vehicle under test; defaults to the scenario's ego role.
    #[arg(long)]
    pub role: Option<Role>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Simulation step, s.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Output directory [default: $PLATOON_OUT_DIR, else ./platoon-out].
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub kp: Option<f64>,
    #[arg(long)]
    pub kd: Option<f64>,
    /// Feed-forward gain on the predecessor's communicated acceleration.
    #[arg(long)]
    pub ff: Option<f64>,
    /// Channel loss probability override.
    #[arg(long)]
    pub loss: Option<f64>,
    /// Channel mean latency override, s.
    #[arg(long)]
    pub latency: Option<f64>,
    /// Actuation suppressed: every truck holds its speed.
    #[arg(long)]
    pub hold_speed: bool,
    /// Comma-separated loss probabilities to sweep.
    #[arg(long, value_delimiter = ',')]
    pub sweep_loss: Vec<f64>,
    /// Comma-separated mean latencies to sweep, s.
    #[arg(long, value_delimiter = ',')]
    pub sweep_latency: Vec<f64>,
    /// Comma-separated visibility factors to sweep.
    #[arg(long, value_delimiter = ',')]
    pub sweep_visibility: Vec<f64>,
    /// Open mode: replay this recorded input log instead of recording one.
    #[arg(long, requires = "reference")]
    pub inputs: Option<PathBuf>,
    /// Open mode: reference outputs to compare the replay against.
    #[arg(long, requires = "inputs")]
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: String,
    pub role: Option<Role>,
    pub mode: Mode,
    pub sim: SimConfig,
    pub out_dir: PathBuf,
    pub sweep: SweepSpec,
    pub replay: Option<(PathBuf, PathBuf)>,
}

impl RunConfig {
    pub fn resolve(flags: &RunFlags, default_mode: Mode) -> Result<Self> {
        let file = match &flags.config {
            Some(p) => RunConfigFile::load(p)?,
            None => RunConfigFile::default(),
        };
        let Some(scenario) = flags.scenario.clone().or(file.scenario) else {
            bail!("no scenario given (use --scenario or `scenario` in the config file)");
        };
        let mut gains = file.gains.unwrap_or_default();
        if let Some(v) = flags.kp {
            gains.kp = v;
        }
        if let Some(v) = flags.kd {
            gains.kd = v;
        }
        if let Some(v) = flags.ff {
            gains.ff = v;
        }
        let mut channel = file.channel.unwrap_or_default();
        channel.merge(&ChannelOverrides { loss_prob: flags.loss, latency_mean: flags.latency, ..Default::default() });
        let mut sweep = file.sweep.unwrap_or_default();
        if !flags.sweep_loss.is_empty() {
            sweep.loss_prob = flags.sweep_loss.clone();
        }
        if !flags.sweep_latency.is_empty() {
            sweep.latency_mean = flags.sweep_latency.clone();
        }
        if !flags.sweep_visibility.is_empty() {
            sweep.visibility_factor = flags.sweep_visibility.clone();
        }
        let defaults = SimConfig::default();
        let sim = SimConfig {
            dt: flags.dt.or(file.dt).unwrap_or(defaults.dt),
            seed: flags.seed.or(file.seed).unwrap_or(defaults.seed),
            control: ControlConfig { gains, fallback: file.fallback.unwrap_or_default(), ..ControlConfig::default() },
            thresholds: file.thresholds.unwrap_or_default(),
            channel,
            hold_speed: flags.hold_speed || file.hold_speed.unwrap_or(false),
        };
        let out_dir = flags
            .out
            .clone()
            .or(file.out_dir)
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
        let cfg = RunConfig {
            scenario,
            role: flags.role.or(file.role),
            mode: flags.mode.or(file.mode).unwrap_or(default_mode),
            sim,
            out_dir,
            sweep,
            replay: flags.inputs.clone().zip(flags.reference.clone()),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate().map_err(|e| anyhow::anyhow!("invalid run configuration: {e}"))?;
        match self.mode {
            Mode::Comm if !self.sweep.has_channel_axis() => {
                bail!("comm mode needs a sweep block with at least one channel parameter list")
            }
            Mode::Sensor if !self.sweep.has_environment_axis() => {
                bail!("sensor mode needs a sweep block with visibility_factor or lighting")
            }
            _ => {}
        }
        let lists = [
            &self.sweep.latency_mean,
            &self.sweep.latency_jitter,
            &self.sweep.loss_prob,
            &self.sweep.congestion_extra_latency,
            &self.sweep.visibility_factor,
        ];
        if lists.iter().flat_map(|l| l.iter()).any(|x| !x.is_finite()) {
            bail!("sweep values must be finite");
        }
        if self.replay.is_some() && self.mode != Mode::Open {
            bail!("--inputs and --reference only apply to open mode");
        }
        Ok(())
    }

    pub fn role_for(&self, s: &Scenario) -> Role {
        self.role.unwrap_or(s.ego_role)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_a_cartesian_product_in_field_order() {
        let sweep = SweepSpec { latency_mean: vec![0.01, 0.05], loss_prob: vec![0.0, 0.3, 1.0], ..Default::default() };
        let rows = sweep.channel_rows();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[0].latency_mean, Some(0.01));
        assert_eq!(rows[0].loss_prob, Some(0.0));
        assert_eq!(rows[1].loss_prob, Some(0.3));
        assert_eq!(rows[3].latency_mean, Some(0.05));
        assert!(sweep.environment_rows(&EnvironmentConditions::default()).is_empty());
    }

    #[test]
    fn sweep_block_parses_from_toml() {
        let file: RunConfigFile =
            toml::from_str("mode = \"comm\"\n[sweep]\nloss_prob = [0.0, 1.0]\nlighting = [\"night\"]\n").unwrap();
        let sweep = file.sweep.unwrap();
        assert_eq!(sweep.loss_prob, vec![0.0, 1.0]);
        let env = sweep.environment_rows(&EnvironmentConditions::default());
        assert_eq!(env.len(), 1);
        assert_eq!(env[0].lighting, Lighting::Night);
    }

    #[test]
    fn comm_mode_requires_a_channel_axis() {
        let flags = RunFlags { scenario: Some("traffic_jam_tail".into()), mode: Some(Mode::Comm), ..Default::default() };
        assert!(RunConfig::resolve(&flags, Mode::Closed).is_err());
        let flags = RunFlags { sweep_loss: vec![0.1], ..flags };
        assert_eq!(RunConfig::resolve(&flags, Mode::Closed).unwrap().sweep.channel_rows().len(), 1);
    }
}
