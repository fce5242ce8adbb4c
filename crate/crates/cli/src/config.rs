//! INI run configuration.
//!
//! Sections: `[params]`, `[grid]`, `[seed]`, `[evolve]`, `[analysis]` and
//! `[sweep]`. Every key is optional; unknown keys and malformed values are
//! reported together, each with its `section.key` name.

use std::path::Path;

use ini::Ini;
use serde::Serialize;
use spinquench_core::analysis::{FitOptions, Region};
use spinquench_core::dynamics::{QuenchProtocol, RampShape};
use spinquench_core::field::Grid2D;
use spinquench_core::params::{
    DensityConvention, PhysicalParams, BOHR_MAGNETON, BOHR_RADIUS,
};
use spinquench_core::seed::{SeedBasis, SeedMode, SeedSpec};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Geometry {
    /// Homogeneous box at the peak column density, no trap.
    Uniform,
    /// Harmonic trap with a Thomas-Fermi or relaxed ground state.
    Trapped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GroundStateKind {
    ThomasFermi,
    ImaginaryTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Profile {
    LongAxis,
    Radial,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamsSection {
    pub physical: PhysicalParams,
    pub convention: DensityConvention,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSection {
    pub grid: Grid2D,
    pub geometry: Geometry,
    pub ground_state: GroundStateKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolveSection {
    pub dt_ms: f64,
    pub protocol: QuenchProtocol,
    pub record_ms: Vec<f64>,
    pub frozen_density: bool,
    pub write_maps: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisSection {
    pub region: Region,
    pub profile: Profile,
    pub radial_bin_um: f64,
    /// constant subtracted from every G(0), standing in for imaging noise
    pub noise_floor: f64,
    pub fit: FitOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSection {
    pub qf_hz: Vec<f64>,
    pub repetitions: usize,
    /// time at which G(0) and l_d are evaluated, ms
    pub t_eval_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub params: ParamsSection,
    pub grid: GridSection,
    pub seed: SeedSpec,
    pub evolve: EvolveSection,
    pub analysis: AnalysisSection,
    pub sweep: SweepSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        let physical = PhysicalParams::rubidium87();
        Self {
            params: ParamsSection {
                physical,
                convention: DensityConvention::default(),
            },
            grid: GridSection {
                grid: Grid2D::new(64, 512, 0.5, 0.5).expect("valid default grid"),
                geometry: Geometry::Uniform,
                ground_state: GroundStateKind::ThomasFermi,
            },
            seed: SeedSpec {
                k_cut: Some(DEFAULT_K_CUT),
                ..SeedSpec::vacuum(1)
            },
            evolve: EvolveSection {
                dt_ms: 0.01,
                protocol: QuenchProtocol {
                    q_initial: 30.0,
                    q_final: 2.0,
                    ramp_ms: 5.0,
                    hold_ms: 152.0,
                    shape: RampShape::LinearQ,
                },
                record_ms: (0..14).map(|i| 27.0 + 10.0 * i as f64).collect(),
                frozen_density: false,
                write_maps: true,
            },
            analysis: AnalysisSection {
                region: Region::default(),
                profile: Profile::LongAxis,
                radial_bin_um: 0.5,
                noise_floor: 0.0,
                fit: FitOptions::default(),
            },
            sweep: SweepSection {
                qf_hz: vec![0.0, 2.0, 4.0, 6.0],
                repetitions: 5,
                t_eval_ms: 87.0,
            },
        }
    }
}

/// Seeded modes extend to twice the wavevector at which `eps_k = q0`, um^-1.
pub const DEFAULT_K_CUT: f64 = 1.0;

struct Reader<'a> {
    ini: &'a Ini,
    errors: Vec<String>,
}

impl<'a> Reader<'a> {
    fn raw(&self, section: &str, key: &str) -> Option<&'a str> {
        self.ini.section(Some(section)).and_then(|p| p.get(key)).map(str::trim)
    }

    fn parse<T: std::str::FromStr>(&mut self, section: &str, key: &str, default: T) -> T {
        match self.raw(section, key) {
            None => default,
            Some(v) => v.parse().unwrap_or_else(|_| {
                self.errors.push(format!("{section}.{key}: cannot parse `{v}`"));
                default
            }),
        }
    }

    fn f64(&mut self, section: &str, key: &str, default: f64) -> f64 {
        let v = self.parse(section, key, default);
        if !v.is_finite() {
            self.errors.push(format!("{section}.{key}: must be finite"));
        }
        v
    }

    fn bool(&mut self, section: &str, key: &str, default: bool) -> bool {
        match self.raw(section, key).map(str::to_ascii_lowercase).as_deref() {
            None => default,
            Some("true" | "yes" | "1" | "on") => true,
            Some("false" | "no" | "0" | "off") => false,
            Some(v) => {
                self.errors.push(format!("{section}.{key}: expected a boolean, got `{v}`"));
                default
            }
        }
    }

    fn list(&mut self, section: &str, key: &str, default: Vec<f64>) -> Vec<f64> {
        match self.raw(section, key) {
            None => default,
            Some(v) => {
                let mut out = Vec::new();
                for item in v.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()) {
                    match item.parse::<f64>() {
                        Ok(x) if x.is_finite() => out.push(x),
                        _ => {
                            self.errors.push(format!("{section}.{key}: cannot parse list item `{item}`"));
                            return default;
                        }
                    }
                }
                out
            }
        }
    }

    fn choice<T: Copy>(&mut self, section: &str, key: &str, default: T, options: &[(&str, T)]) -> T {
        let Some(v) = self.raw(section, key) else {
            return default;
        };
        let lower = v.to_ascii_lowercase();
        match options.iter().find(|(name, _)| *name == lower) {
            Some((_, t)) => *t,
            None => {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                self.errors.push(format!("{section}.{key}: `{v}` is not one of {}", names.join("|")));
                default
            }
        }
    }
}

const KNOWN: &[(&str, &[&str])] = &[
    (
        "params",
        &[
            "mass_kg",
            "delta_a_bohr",
            "abar_bohr",
            "n3d_cm3",
            "radius_y_um",
            "density_convention",
            "n2d_eff_q0_hz",
            "atom_number",
            "trap_hz_x",
            "trap_hz_y",
            "trap_hz_z",
            "moment_bohr_magneton",
        ],
    ),
    ("grid", &["nx", "nz", "dx_um", "dz_um", "geometry", "ground_state"]),
    (
        "seed",
        &["mode", "rng_seed", "n_pm", "k_single", "amp_single", "scale", "k_cut_um", "basis", "basis_q_hz"],
    ),
    (
        "evolve",
        &[
            "dt_ms",
            "ramp_ms",
            "hold_ms",
            "qi_hz",
            "qf_hz",
            "record_ms",
            "frozen_density",
            "ramp_shape",
            "q_offset_hz",
            "write_maps",
        ],
    ),
    (
        "analysis",
        &["region_x_um", "region_z_um", "profile", "radial_bin_um", "noise_floor", "t_m_ms", "t_max_ms"],
    ),
    ("sweep", &["qf_hz", "repetitions", "t_eval_ms"]),
];

impl RunConfig {
    pub fn load(path: &Path) -> Result<(Self, String), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        // a run manifest carries the configuration it was produced from
        let text = if path.extension().is_some_and(|e| e == "json") {
            let v: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            v.get("config_ini")
                .and_then(|s| s.as_str())
                .ok_or_else(|| CliError::Config(format!("{} has no config_ini field", path.display())))?
                .to_string()
        } else {
            text
        };
        Ok((Self::parse(&text)?, text))
    }

    /// `text` with `[seed] rng_seed` replaced.
    pub fn with_seed(text: &str, seed: u64) -> Result<String, CliError> {
        let mut ini = Ini::load_from_str(text).map_err(|e| CliError::Config(format!("malformed config: {e}")))?;
        ini.with_section(Some("seed")).set("rng_seed", seed.to_string());
        let mut out = Vec::new();
        ini.write_to(&mut out)
            .map_err(|e| CliError::Config(format!("cannot rewrite config: {e}")))?;
        Ok(String::from_utf8_lossy(&out).into_owned())
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let ini = Ini::load_from_str(text).map_err(|e| CliError::Config(format!("malformed config: {e}")))?;
        let mut r = Reader {
            ini: &ini,
            errors: Vec::new(),
        };
        for (section, props) in ini.iter() {
            let Some(name) = section else {
                if props.iter().next().is_some() {
                    r.errors.push("keys outside any section".into());
                }
                continue;
            };
            match KNOWN.iter().find(|(s, _)| *s == name) {
                None => r.errors.push(format!("unknown section [{name}]")),
                Some((_, keys)) => {
                    for (k, _) in props.iter() {
                        if !keys.contains(&k) {
                            r.errors.push(format!("{name}.{k}: unknown key"));
                        }
                    }
                }
            }
        }
        let d = RunConfig::default();

        let mut physical = d.params.physical.clone();
        physical.atomic_mass = r.f64("params", "mass_kg", physical.atomic_mass);
        physical.delta_a = r.f64("params", "delta_a_bohr", physical.delta_a / BOHR_RADIUS) * BOHR_RADIUS;
        physical.abar = r.f64("params", "abar_bohr", physical.abar / BOHR_RADIUS) * BOHR_RADIUS;
        physical.peak_density_3d = r.f64("params", "n3d_cm3", physical.peak_density_3d * 1e-6) * 1e6;
        let radius_y = r.f64("params", "radius_y_um", 1.6) * 1e-6;
        physical.column_density_2d_peak = 4.0 / 3.0 * physical.peak_density_3d * radius_y;
        physical.atom_number = r.f64("params", "atom_number", physical.atom_number);
        let two_pi = 2.0 * std::f64::consts::PI;
        for (i, key) in ["trap_hz_x", "trap_hz_y", "trap_hz_z"].iter().enumerate() {
            physical.trap_frequencies[i] = r.f64("params", key, physical.trap_frequencies[i] / two_pi) * two_pi;
        }
        let mu_b = BOHR_MAGNETON;
        physical.magnetic_moment = r.f64("params", "moment_bohr_magneton", physical.magnetic_moment / mu_b) * mu_b;
        let q0_user = r.f64("params", "n2d_eff_q0_hz", 15.0);
        let convention = r.choice(
            "params",
            "density_convention",
            DensityConvention::UserSupplied { q0_hz: q0_user },
            &[
                ("user", DensityConvention::UserSupplied { q0_hz: q0_user }),
                ("peak", DensityConvention::PeakColumn),
                ("mean", DensityConvention::MeanColumn),
            ],
        );
        if let DensityConvention::UserSupplied { q0_hz } = convention {
            if !(q0_hz > 0.0) {
                r.errors.push("params.n2d_eff_q0_hz: must be positive".into());
            }
        }
        if let Err(e) = physical.validate() {
            r.errors.push(format!("params: {e}"));
        }

        let nx = r.parse("grid", "nx", d.grid.grid.nx);
        let nz = r.parse("grid", "nz", d.grid.grid.nz);
        let dx = r.f64("grid", "dx_um", d.grid.grid.dx);
        let dz = r.f64("grid", "dz_um", d.grid.grid.dz);
        let grid = match Grid2D::new(nx, nz, dx, dz) {
            Ok(g) => g,
            Err(e) => {
                r.errors.push(format!("grid: {e}"));
                d.grid.grid
            }
        };
        let geometry = r.choice(
            "grid",
            "geometry",
            d.grid.geometry,
            &[("uniform", Geometry::Uniform), ("trapped", Geometry::Trapped)],
        );
        let ground_state = r.choice(
            "grid",
            "ground_state",
            d.grid.ground_state,
            &[
                ("thomas_fermi", GroundStateKind::ThomasFermi),
                ("imaginary_time", GroundStateKind::ImaginaryTime),
            ],
        );

        #[derive(Clone, Copy)]
        enum Mode {
            Vacuum,
            Thermal,
            None,
            Single,
        }
        let mode = r.choice(
            "seed",
            "mode",
            Mode::Vacuum,
            &[
                ("vacuum", Mode::Vacuum),
                ("thermal", Mode::Thermal),
                ("none", Mode::None),
                ("single_mode", Mode::Single),
            ],
        );
        let n_pm = r.f64("seed", "n_pm", 0.0);
        let k_single = r.f64("seed", "k_single", 0.3);
        let amp_single = r.f64("seed", "amp_single", 0.0);
        let mode = match mode {
            Mode::Vacuum => SeedMode::Vacuum,
            Mode::Thermal => SeedMode::Thermal { n_pm },
            Mode::None => SeedMode::None,
            Mode::Single => SeedMode::SingleMode {
                k: k_single,
                amplitude: amp_single,
            },
        };
        let k_cut = r.f64("seed", "k_cut_um", DEFAULT_K_CUT);
        let basis_q = r.f64("seed", "basis_q_hz", d.evolve.protocol.q_initial);
        let basis = r.choice(
            "seed",
            "basis",
            SeedBasis::PlaneWave,
            &[
                ("plane_wave", SeedBasis::PlaneWave),
                ("bogoliubov", SeedBasis::Bogoliubov { q_hz: basis_q }),
            ],
        );
        let seed = SeedSpec {
            mode,
            rng_seed: r.parse("seed", "rng_seed", d.seed.rng_seed),
            scale: r.f64("seed", "scale", 1.0),
            k_cut: if k_cut > 0.0 { Some(k_cut) } else { None },
            basis,
        };
        if let Err(e) = seed.validate() {
            r.errors.push(format!("seed: {e}"));
        }

        let p = d.evolve.protocol;
        let q_offset = r.f64("evolve", "q_offset_hz", 0.0);
        let protocol = QuenchProtocol {
            q_initial: r.f64("evolve", "qi_hz", p.q_initial),
            q_final: r.f64("evolve", "qf_hz", p.q_final),
            ramp_ms: r.f64("evolve", "ramp_ms", p.ramp_ms),
            hold_ms: r.f64("evolve", "hold_ms", p.hold_ms),
            shape: r.choice(
                "evolve",
                "ramp_shape",
                RampShape::LinearQ,
                &[
                    ("linear_q", RampShape::LinearQ),
                    ("linear_b", RampShape::LinearB { q_offset_hz: q_offset }),
                ],
            ),
        };
        if let Err(e) = protocol.validate() {
            r.errors.push(format!("evolve: {e}"));
        }
        let evolve = EvolveSection {
            dt_ms: r.f64("evolve", "dt_ms", d.evolve.dt_ms),
            protocol,
            record_ms: r.list("evolve", "record_ms", d.evolve.record_ms.clone()),
            frozen_density: r.bool("evolve", "frozen_density", d.evolve.frozen_density),
            write_maps: r.bool("evolve", "write_maps", d.evolve.write_maps),
        };
        if !(evolve.dt_ms > 0.0) {
            r.errors.push("evolve.dt_ms: must be positive".into());
        }
        if evolve.record_ms.windows(2).any(|w| w[1] < w[0]) {
            r.errors.push("evolve.record_ms: must be ascending".into());
        }
        if let Some(last) = evolve.record_ms.last() {
            if *last > protocol.duration_ms() + 1e-9 {
                r.errors.push(format!(
                    "evolve.record_ms: {last} ms is beyond ramp_ms + hold_ms = {} ms",
                    protocol.duration_ms()
                ));
            }
        }

        let a = &d.analysis;
        let analysis = AnalysisSection {
            region: Region {
                width_x: r.f64("analysis", "region_x_um", a.region.width_x),
                width_z: r.f64("analysis", "region_z_um", a.region.width_z),
            },
            profile: r.choice(
                "analysis",
                "profile",
                a.profile,
                &[("long_axis", Profile::LongAxis), ("radial", Profile::Radial)],
            ),
            radial_bin_um: r.f64("analysis", "radial_bin_um", a.radial_bin_um),
            noise_floor: r.f64("analysis", "noise_floor", a.noise_floor),
            fit: FitOptions {
                t_m: r.f64("analysis", "t_m_ms", a.fit.t_m),
                t_max: r.f64("analysis", "t_max_ms", a.fit.t_max),
                ..a.fit
            },
        };
        if let Err(e) = analysis.region.indices(&grid) {
            r.errors.push(format!("analysis.region: {e}"));
        }

        let sweep = SweepSection {
            qf_hz: r.list("sweep", "qf_hz", d.sweep.qf_hz.clone()),
            repetitions: r.parse("sweep", "repetitions", d.sweep.repetitions),
            t_eval_ms: r.f64("sweep", "t_eval_ms", d.sweep.t_eval_ms),
        };
        if sweep.repetitions == 0 {
            r.errors.push("sweep.repetitions: must be >= 1".into());
        }
        if sweep.t_eval_ms < protocol.ramp_ms {
            r.errors.push("sweep.t_eval_ms: must not fall inside the ramp".into());
        }

        if !r.errors.is_empty() {
            return Err(CliError::Config(r.errors.join("\n")));
        }
        Ok(Self {
            params: ParamsSection {
                physical,
                convention,
            },
            grid: GridSection {
                grid,
                geometry,
                ground_state,
            },
            seed,
            evolve,
            analysis,
            sweep,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_default() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn sections_are_read() {
        let c = RunConfig::parse(
            "[seed]\nmode = thermal\nn_pm = 300\nrng_seed = 9\n\n[evolve]\nqf_hz = 4\nrecord_ms = 10, 20 30\nfrozen_density = yes\n\n[sweep]\nqf_hz = 0,2\nrepetitions = 3\n",
        )
        .unwrap();
        assert_eq!(c.seed.mode, SeedMode::Thermal { n_pm: 300.0 });
        assert_eq!(c.seed.rng_seed, 9);
        assert_eq!(c.evolve.protocol.q_final, 4.0);
        assert_eq!(c.evolve.record_ms, vec![10.0, 20.0, 30.0]);
        assert!(c.evolve.frozen_density);
        assert_eq!(c.sweep.qf_hz, vec![0.0, 2.0]);
        assert_eq!(c.sweep.repetitions, 3);
    }

    #[test]
    fn errors_name_every_bad_key() {
        let err = RunConfig::parse("[evolve]\ndt_ms = fast\nbogus = 1\n[seed]\nmode = loud\n[grid]\nnx = 48\n")
            .unwrap_err()
            .to_string();
        for key in ["evolve.dt_ms", "evolve.bogus", "seed.mode", "grid"] {
            assert!(err.contains(key), "{err}");
        }
    }

    #[test]
    fn record_time_beyond_protocol_is_rejected() {
        let err = RunConfig::parse("[evolve]\nramp_ms = 0\nhold_ms = 10\nrecord_ms = 5, 20\n").unwrap_err();
        assert!(err.to_string().contains("evolve.record_ms"));
    }
}
