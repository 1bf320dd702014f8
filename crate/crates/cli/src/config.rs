use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use lftnav_core::artifact::fmt_f64;
use lftnav_core::cr3bp::{ParameterBox, State};
use lftnav_core::ode::OdeOptions;
use lftnav_core::runtime::{RhoSchedule, SimConfig};
use lftnav_core::sensing::NoiseSpec;
use lftnav_core::synthesis::{ObserverGain, SynthesisOptions};

/// Scenario shipped with the binary.
pub const DEFAULT_SCENARIO: &str = include_str!("../scenarios/earth_moon.json");

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub psi_min: f64,
    pub psi_max: f64,
}

impl BoxConfig {
    pub fn to_box(&self) -> Result<ParameterBox<f64>, String> {
        ParameterBox::new(self.sigma_min, self.sigma_max, self.psi_min, self.psi_max).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub eta_min_arcsec: f64,
    pub eta_max_arcsec: f64,
    pub range_err_min_km: f64,
    pub range_err_max_km: f64,
    /// `null` for white sensor noise.
    pub band_limit_rad_per_tu: Option<f64>,
    pub process_bound: f64,
    pub hold_period_tu: f64,
    /// `false` simulates without noise; synthesis still uses the levels above.
    pub enabled: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub x0: [f64; 4],
    pub xhat0: [f64; 4],
    pub t_end_tu: f64,
    pub sample_dt_tu: f64,
    pub rho_schedule: String,
    pub ode_tol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisConfig {
    pub method: String,
    pub grid: usize,
    pub gamma_lo: f64,
    pub gamma_hi: f64,
    pub rel_gap: f64,
    pub p_floor: f64,
    pub max_dk_rounds: usize,
    pub validation_samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub out_dir: PathBuf,
    pub gain_file: String,
    pub plot_scripts: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub pi2: f64,
    pub r12_km: f64,
    #[serde(rename = "box")]
    pub bounds: BoxConfig,
    /// Box the noise weights are anchored to; defaults to `box`.
    #[serde(default)]
    pub weight_box: Option<BoxConfig>,
    pub noise: NoiseConfig,
    pub simulation: SimulationConfig,
    pub synthesis: SynthesisConfig,
    pub output: OutputConfig,
    pub seed: u64,
}

impl RunConfig {
    pub fn parse(s: &str) -> Result<Self, String> {
        let cfg: RunConfig = serde_json::from_str(s).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let s = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&s).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn earth_moon() -> Self {
        Self::parse(DEFAULT_SCENARIO).expect("bundled scenario is valid")
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.pi2 > 0.0 && self.pi2 < 0.5) {
            return Err(format!("pi2: must lie in (0, 0.5), got {}", self.pi2));
        }
        self.bounds.to_box().map_err(|e| format!("box: {e}"))?;
        if let Some(w) = &self.weight_box {
            w.to_box().map_err(|e| format!("weight_box: {e}"))?;
        }
        self.noise_spec().map_err(|e| format!("noise: {e}"))?;
        self.synthesis_options().validate().map_err(|e| format!("synthesis: {e}"))?;
        match self.synthesis.method.as_str() {
            "hinf" | "dk" => {}
            other => return Err(format!("synthesis.method: expected \"hinf\" or \"dk\", got {other:?}")),
        }
        let s = &self.simulation;
        s.rho_schedule.parse::<RhoSchedule>().map_err(|e| format!("simulation.rho_schedule: {e}"))?;
        if !(s.t_end_tu > 0.0) {
            return Err("simulation.t_end_tu: must be positive".into());
        }
        if !(s.sample_dt_tu > 0.0) {
            return Err("simulation.sample_dt_tu: must be positive".into());
        }
        if !(s.ode_tol > 0.0) {
            return Err("simulation.ode_tol: must be positive".into());
        }
        if s.x0.iter().chain(&s.xhat0).any(|v| !v.is_finite()) {
            return Err("simulation: initial states must be finite".into());
        }
        if self.output.gain_file.is_empty() {
            return Err("output.gain_file: must not be empty".into());
        }
        Ok(())
    }

    pub fn parameter_box(&self) -> ParameterBox<f64> {
        self.bounds.to_box().expect("validated")
    }

    pub fn weight_box(&self) -> ParameterBox<f64> {
        self.weight_box.as_ref().unwrap_or(&self.bounds).to_box().expect("validated")
    }

    pub fn noise_spec(&self) -> Result<NoiseSpec<f64>, String> {
        let n = &self.noise;
        let spec = NoiseSpec::from_units(
            n.eta_min_arcsec,
            n.eta_max_arcsec,
            n.range_err_min_km,
            n.range_err_max_km,
            self.r12_km,
            n.band_limit_rad_per_tu,
            n.process_bound,
            n.hold_period_tu,
            self.seed,
        )
        .map_err(|e| e.to_string())?;
        Ok(spec)
    }

    pub fn sim_noise(&self) -> NoiseSpec<f64> {
        let spec = self.noise_spec().expect("validated");
        if !self.noise.enabled {
            spec.noiseless()
        } else {
            spec
        }
    }

    pub fn synthesis_options(&self) -> SynthesisOptions<f64> {
        let s = &self.synthesis;
        SynthesisOptions {
            grid: s.grid,
            gamma_lo: s.gamma_lo,
            gamma_hi: s.gamma_hi,
            rel_gap: s.rel_gap,
            p_floor: s.p_floor,
            max_dk_rounds: s.max_dk_rounds,
            ..SynthesisOptions::default()
        }
    }

    pub fn sim_config(&self, gain: ObserverGain<f64>) -> SimConfig<f64> {
        let s = &self.simulation;
        SimConfig {
            pi2: self.pi2,
            x0: State::from_slice(&s.x0),
            xhat0: State::from_slice(&s.xhat0),
            bounds: self.parameter_box(),
            noise: self.sim_noise(),
            gain,
            t_end: s.t_end_tu,
            sample_dt: s.sample_dt_tu,
            schedule: s.rho_schedule.parse().expect("validated"),
            ode: OdeOptions::with_tol(s.ode_tol),
        }
    }

    pub fn gain_path(&self) -> PathBuf {
        self.output.out_dir.join(&self.output.gain_file)
    }

    /// SHA-256 over the data a gain certificate depends on: `π2`, the box,
    /// the weight anchor and the angular noise levels.
    pub fn certificate_hash(&self) -> String {
        #[derive(Serialize)]
        struct Canon {
            pi2: String,
            bounds: [String; 4],
            weight_box: [String; 4],
            eta_arcsec: [String; 2],
        }
        let b = self.parameter_box();
        let w = self.weight_box();
        let q = |b: ParameterBox<f64>| [fmt_f64(b.sigma_min), fmt_f64(b.sigma_max), fmt_f64(b.psi_min), fmt_f64(b.psi_max)];
        let canon = Canon {
            pi2: fmt_f64(self.pi2),
            bounds: q(b),
            weight_box: q(w),
            eta_arcsec: [fmt_f64(self.noise.eta_min_arcsec), fmt_f64(self.noise.eta_max_arcsec)],
        };
        let json = serde_json::to_string(&canon).expect("canonical form serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenario_parses() {
        let c = RunConfig::earth_moon();
        assert_eq!(c.synthesis.grid, 3);
        assert_eq!(c.simulation.x0, [0.87, 0.0, 0.0, -1.4827]);
        assert_eq!(c.certificate_hash().len(), 64);
    }

    #[test]
    fn hash_tracks_box_not_outputs() {
        let a = RunConfig::earth_moon();
        let mut b = a.clone();
        b.output.out_dir = "elsewhere".into();
        b.seed = 99;
        assert_eq!(a.certificate_hash(), b.certificate_hash());
        b.bounds.sigma_max = 0.9;
        assert_ne!(a.certificate_hash(), b.certificate_hash());
    }

    #[test]
    fn unknown_key_named_in_error() {
        let s = DEFAULT_SCENARIO.replacen("\"seed\"", "\"sede\"", 1);
        let e = RunConfig::parse(&s).unwrap_err();
        assert!(e.contains("sede"), "{e}");
    }
}
