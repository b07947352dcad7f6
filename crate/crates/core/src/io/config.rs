use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{RunLimits, StepperConfig};
use crate::initdata::{GridSpec, InitParams, Perturbation};
use crate::modulation::{DecomposeOptions, LyapunovParams, TrackerConfig};

/// Everything a pipeline run needs. Top-level keys are the initial-data
/// parameters; the remaining knobs live in `[grid]`, `[stepper]`, `[run]`
/// and `[constants]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub b0: f64,
    pub lambda0: f64,
    pub r0: f64,
    pub z0: f64,
    pub gamma0: f64,
    /// Seed of the initial perturbation.
    pub seed: u64,
    /// L2 size of the perturbation relative to the core.
    pub perturbation_amplitude: f64,
    pub force_negative_energy: bool,
    pub energy_margin: f64,
    pub output_dir: String,
    pub grid: GridSection,
    pub stepper: StepperSection,
    pub run: RunSection,
    pub constants: ConstantsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub r_max: f64,
    pub z_half_width: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepperSection {
    pub dt: f64,
    pub adapt: bool,
    pub theta_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub t_end: f64,
    pub max_steps: u64,
    /// Steps between time-series records.
    pub stride: u64,
    /// Records between modulation decompositions.
    pub diagnostic_stride: u64,
    /// Halt when the core width falls below this many radial cells.
    pub floor_cells: f64,
    /// Reference radius of the localized momentum.
    pub psi_ref: f64,
    pub with_lyapunov: bool,
    pub with_exterior: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantsSection {
    pub eta: f64,
    pub a_param: f64,
    pub delta1: f64,
    pub alpha_star: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = InitParams::default();
        Self {
            b0: p.b0,
            lambda0: p.lambda0,
            r0: p.r0,
            z0: p.z0,
            gamma0: p.gamma0,
            seed: p.perturbation.seed,
            perturbation_amplitude: p.perturbation.amplitude,
            force_negative_energy: p.force_negative_energy,
            energy_margin: p.energy_margin,
            output_dir: "out".into(),
            grid: GridSection::default(),
            stepper: StepperSection::default(),
            run: RunSection::default(),
            constants: ConstantsSection::default(),
        }
    }
}

impl Default for GridSection {
    fn default() -> Self {
        // ring at r = 10 with room for the core; fine enough to follow lambda
        // down by a factor of four before the resolution floor
        Self { r_max: 14.0, z_half_width: 4.5, h: 0.015 }
    }
}

impl Default for StepperSection {
    fn default() -> Self {
        let s = StepperConfig::default();
        Self { dt: s.dt, adapt: s.adapt, theta_max: s.theta_max }
    }
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            t_end: 1.0,
            max_steps: 1_000_000,
            stride: 5,
            diagnostic_stride: 1,
            floor_cells: 5.0,
            psi_ref: 10.0,
            with_lyapunov: true,
            with_exterior: true,
        }
    }
}

impl Default for ConstantsSection {
    fn default() -> Self {
        let l = LyapunovParams::default();
        Self {
            eta: crate::profiles::DEFAULT_ETA,
            a_param: l.a_param,
            delta1: l.delta1,
            alpha_star: InitParams::default().alpha_star,
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&c| c == b'\n').count() + 1
}

impl RunConfig {
    /// Parses `key = value` text with `[section]` headers; absent keys take
    /// their defaults, unknown keys and type mismatches are errors carrying
    /// the offending line.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse {
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            msg: e.message().trim().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical text form; `parse(emit(c))` gives back `c`.
    pub fn emit(&self) -> String {
        toml::to_string(self).expect("plain data always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.init_params().validate()?;
        self.init_params().grid.build()?;
        self.stepper().validate()?;
        let r = &self.run;
        if !(r.t_end > 0.0) || r.stride == 0 || r.diagnostic_stride == 0 || !(r.floor_cells >= 0.0) {
            return Err(Error::Config(
                "run needs t_end > 0, stride >= 1, diagnostic_stride >= 1 and floor_cells >= 0".into(),
            ));
        }
        let c = &self.constants;
        if !(c.eta > 0.0 && c.eta <= crate::profiles::ETA_MAX) {
            return Err(Error::Config(format!("eta must lie in (0, {}], got {}", crate::profiles::ETA_MAX, c.eta)));
        }
        if !(c.a_param > 0.0 && c.delta1 >= 0.0) {
            return Err(Error::Config("a_param > 0 and delta1 >= 0 required".into()));
        }
        Ok(())
    }

    pub fn init_params(&self) -> InitParams {
        InitParams {
            b0: self.b0,
            lambda0: self.lambda0,
            r0: self.r0,
            z0: self.z0,
            gamma0: self.gamma0,
            alpha_star: self.constants.alpha_star,
            perturbation: Perturbation { seed: self.seed, amplitude: self.perturbation_amplitude },
            grid: GridSpec { r_max: self.grid.r_max, z_half_width: self.grid.z_half_width, h: self.grid.h },
            force_negative_energy: self.force_negative_energy,
            energy_margin: self.energy_margin,
        }
    }

    pub fn stepper(&self) -> StepperConfig {
        StepperConfig {
            dt: self.stepper.dt,
            adapt: self.stepper.adapt,
            theta_max: self.stepper.theta_max,
            ..StepperConfig::default()
        }
    }

    /// Run limits; `q0` is the ground-state peak and `s0` the initial
    /// rescaled time.
    pub fn limits(&self, q0: f64, s0: f64) -> RunLimits {
        RunLimits {
            t_end: self.run.t_end,
            max_steps: usize::try_from(self.run.max_steps).unwrap_or(usize::MAX),
            stride: usize::try_from(self.run.stride).unwrap_or(usize::MAX),
            psi_ref: self.run.psi_ref,
            floor_cells: self.run.floor_cells,
            q0,
            s0,
        }
    }

    pub fn tracker(&self) -> TrackerConfig {
        TrackerConfig {
            decompose: DecomposeOptions::default(),
            lyapunov: LyapunovParams { a_param: self.constants.a_param, delta1: self.constants.delta1 },
            with_energy: true,
            with_lyapunov: self.run.with_lyapunov,
            with_exterior: self.run.with_exterior,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn single_override() {
        let c = RunConfig::parse("b0 = 0.15\n").unwrap();
        assert_eq!(c, RunConfig { b0: 0.15, ..RunConfig::default() });
        let c = RunConfig::parse("[grid]\nh = 0.02\n").unwrap();
        assert_eq!(c.grid.h, 0.02);
        assert_eq!(c.grid.r_max, GridSection::default().r_max);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = "lambda0 = 0.3\n\nb0 = fast\n";
        match RunConfig::parse(bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected a parse error, got {other:?}"),
        }
        match RunConfig::parse("b0 = 0.2\n[run]\nstrides = 4\n") {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("strides"), "{msg}");
            }
            other => panic!("expected a parse error, got {other:?}"),
        }
        match RunConfig::parse("[grid]\nh = \"fine\"\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_values_are_config_errors() {
        assert!(matches!(RunConfig::parse("b0 = -0.1"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse("[run]\nstride = 0"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::parse("[constants]\neta = 0.5"), Err(Error::Config(_))));
    }

    #[test]
    fn emit_parse_emit_is_identical() {
        let c = RunConfig {
            b0: 0.123456789,
            seed: 42,
            energy_margin: 1e-7,
            output_dir: "runs/a b".into(),
            ..RunConfig::default()
        };
        let t1 = c.emit();
        let c2 = RunConfig::parse(&t1).unwrap();
        assert_eq!(c2, c);
        assert_eq!(c2.emit(), t1);
    }
}
