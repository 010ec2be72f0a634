//! Run configuration: a sectioned TOML file with documented defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::discrete::LinearSolverKind;
use crate::error::{Error, Result};
use crate::mesh::{ContactName, ContactSpec, DeviceGeometry, Edge, Rect};
use crate::optimize::ArmijoConfig;
use crate::real::Real;
use crate::state::{EnthalpyModel, SolverConfig};

/// Complete, validated configuration of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub geometry: GeometrySection,
    pub physics: PhysicsSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub cost: CostSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub gradcheck: GradCheckSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Device domain, grid and reference doping. Defaults describe the MESFET.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub width: f64,
    pub height: f64,
    pub nx: usize,
    pub ny: usize,
    pub channel_doping: f64,
    pub nplus_doping: f64,
    /// `[x0, x1, y0, y1]` per n⁺ block.
    pub nplus_regions: Vec<[f64; 4]>,
    /// Smoothing length of the reference doping in cells; 0 keeps the step profile.
    pub smoothing_length: f64,
    pub contacts: Vec<ContactSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactSection {
    /// `source`, `gate` or `drain`.
    pub name: String,
    /// `top`, `bottom`, `left` or `right`.
    pub edge: String,
    pub span: [f64; 2],
}

impl Default for GeometrySection {
    fn default() -> Self {
        let g = DeviceGeometry::<f64>::mesfet();
        GeometrySection {
            width: g.width,
            height: g.height,
            nx: 80,
            ny: 80,
            channel_doping: g.channel_doping,
            nplus_doping: g.nplus_doping,
            nplus_regions: g.nplus_regions.iter().map(|r| [r.x0, r.x1, r.y0, r.y1]).collect(),
            smoothing_length: 2.0,
            contacts: g
                .contacts
                .iter()
                .map(|c| ContactSection { name: c.name.as_str().into(), edge: edge_name(c.edge).into(), span: [c.span.0, c.span.1] })
                .collect(),
        }
    }
}

fn edge_name(e: Edge) -> &'static str {
    match e {
        Edge::Top => "top",
        Edge::Bottom => "bottom",
        Edge::Left => "left",
        Edge::Right => "right",
    }
}

/// Scaled physical parameters and contact data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    /// Scaled Debye length squared.
    pub lambda2: f64,
    /// Scaled Planck constant squared; 0 selects the classical model.
    pub epsilon2: f64,
    /// Scaled intrinsic carrier density.
    #[serde(default = "one")]
    pub delta_c: f64,
    /// Boundary density factor of the gate; 1 makes it Ohmic.
    #[serde(default = "default_schottky")]
    pub schottky_factor: f64,
    #[serde(default = "default_source_voltage")]
    pub source_voltage: f64,
    #[serde(default = "default_gate_voltage")]
    pub gate_voltage: f64,
    #[serde(default = "default_drain_voltage")]
    pub drain_voltage: f64,
    /// Uniform external potential in the density equation.
    #[serde(default)]
    pub external_potential: f64,
}

fn one() -> f64 {
    1.0
}
fn default_schottky() -> f64 {
    0.1
}
fn default_source_voltage() -> f64 {
    0.1 * 0.0375
}
fn default_gate_voltage() -> f64 {
    0.1 * 0.075
}
fn default_drain_voltage() -> f64 {
    0.1 * 0.15
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub nonlinear_tol: f64,
    pub max_gummel: usize,
    pub damping: f64,
    pub damping_floor: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
    pub rho_floor: f64,
    pub enthalpy_cap: f64,
    pub newton_polish: bool,
    pub polish_below: f64,
    /// `auto`, `direct` or `iterative`.
    pub linear_solver: String,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverConfig::<f64>::default();
        SolverSection {
            nonlinear_tol: s.nonlinear_tol,
            max_gummel: s.max_gummel,
            damping: s.damping,
            damping_floor: s.damping_floor,
            newton_tol: s.newton_tol,
            max_newton: s.max_newton,
            rho_floor: s.rho_floor,
            enthalpy_cap: s.enthalpy.cap,
            newton_polish: s.newton_polish,
            polish_below: s.polish_below,
            linear_solver: "auto".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostSection {
    /// `current` tracks the contact current, `density` the electron density.
    pub kind: String,
    /// Contact whose current is tracked.
    pub contact: String,
    /// Target as a multiple of the reference value (`I_d = f·I_ref` or `n_d = f·n_ref`).
    pub target_factor: f64,
    /// Absolute target current; overrides `target_factor` for current tracking.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_current: Option<f64>,
    pub gamma: f64,
    pub tracking_weight: f64,
}

impl Default for CostSection {
    fn default() -> Self {
        CostSection {
            kind: "current".into(),
            contact: "drain".into(),
            target_factor: 2.0,
            target_current: None,
            gamma: 1.0,
            tracking_weight: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub c1: f64,
    pub beta: f64,
    pub alpha0: f64,
    pub max_backtracks: usize,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let a = ArmijoConfig::<f64>::default();
        OptimizerSection { c1: a.c1, beta: a.beta, alpha0: a.alpha0, max_backtracks: a.max_backtracks, tol: a.tol, max_iters: a.max_iters }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Base `ε²` of the ladder; defaults to `physics.epsilon2`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon2: Option<f64>,
    /// Ladder `ε² · 10^(−2n)` for `n = 0..=n_max`.
    pub n_max: usize,
    /// Grid size of the sweep; defaults to the geometry grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    /// Start each row from the previous row's optimum; rows run in parallel when off.
    pub warm_start: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection { epsilon2: None, n_max: 5, grid: None, warm_start: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradCheckSection {
    pub directions: usize,
    pub taus: Vec<f64>,
    pub seed: u64,
}

impl Default for GradCheckSection {
    fn default() -> Self {
        GradCheckSection { directions: 5, taus: vec![1e-3, 1e-4, 1e-5], seed: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
    /// Write wall times into `trace.csv`; off keeps outputs byte-identical across runs.
    pub record_timing: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: "out".into(), record_timing: false }
    }
}

/// Reads, parses and validates a config file.
pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    parse_config_str(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        e => e,
    })
}

/// Parses and validates config text.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn require(ok: bool, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(msg.into()))
    }
}

fn positive(x: f64) -> bool {
    x > 0.0 && x.is_finite()
}

fn parse_contact(name: &str) -> Option<ContactName> {
    ContactName::ALL.into_iter().find(|c| c.as_str() == name)
}

fn parse_edge(name: &str) -> Option<Edge> {
    [Edge::Top, Edge::Bottom, Edge::Left, Edge::Right].into_iter().find(|&e| edge_name(e) == name)
}

impl RunConfig {
    /// Checks every field and reports the first violation by name.
    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        require(g.nx >= 3 && g.ny >= 3, "geometry.nx and geometry.ny must be >= 3")?;
        require(g.smoothing_length >= 0.0 && g.smoothing_length.is_finite(), "geometry.smoothing_length must be >= 0")?;
        for (k, c) in g.contacts.iter().enumerate() {
            require(parse_contact(&c.name).is_some(), &format!("geometry.contacts[{k}].name must be source, gate or drain"))?;
            require(parse_edge(&c.edge).is_some(), &format!("geometry.contacts[{k}].edge must be top, bottom, left or right"))?;
        }
        self.device::<f64>().validate().map_err(|e| Error::Config(format!("geometry: {e}")))?;

        let p = &self.physics;
        require(positive(p.lambda2), "physics.lambda2 must be > 0")?;
        require(p.epsilon2 >= 0.0 && p.epsilon2.is_finite(), "physics.epsilon2 must be >= 0")?;
        require(positive(p.delta_c), "physics.delta_c must be > 0")?;
        require(p.schottky_factor > 0.0 && p.schottky_factor <= 1.0, "physics.schottky_factor must lie in (0, 1]")?;
        for (v, name) in [(p.source_voltage, "source_voltage"), (p.gate_voltage, "gate_voltage"), (p.drain_voltage, "drain_voltage"), (p.external_potential, "external_potential")] {
            require(v.is_finite(), &format!("physics.{name} must be finite"))?;
        }

        self.solver_config::<f64>()?.validate()?;
        require(positive(self.solver.enthalpy_cap), "solver.enthalpy_cap must be > 0")?;

        let c = &self.cost;
        require(c.kind == "current" || c.kind == "density", "cost.kind must be current or density")?;
        require(parse_contact(&c.contact).is_some(), "cost.contact must be source, gate or drain")?;
        require(c.target_factor.is_finite(), "cost.target_factor must be finite")?;
        require(c.target_current.is_none_or(f64::is_finite), "cost.target_current must be finite")?;
        require(positive(c.gamma), "cost.gamma must be > 0")?;
        require(c.tracking_weight >= 0.0 && c.tracking_weight.is_finite(), "cost.tracking_weight must be >= 0")?;

        self.armijo::<f64>().validate()?;

        let s = &self.sweep;
        require(s.epsilon2.is_none_or(|e| e >= 0.0 && e.is_finite()), "sweep.epsilon2 must be >= 0")?;
        require(s.n_max <= 12, "sweep.n_max must be <= 12")?;
        require(s.grid.is_none_or(|n| n >= 3), "sweep.grid must be >= 3")?;

        let gc = &self.gradcheck;
        require(gc.directions >= 1, "gradcheck.directions must be >= 1")?;
        require(!gc.taus.is_empty() && gc.taus.iter().all(|&t| positive(t)), "gradcheck.taus must be a nonempty list of positive steps")?;

        require(!self.output.dir.is_empty(), "output.dir must not be empty")
    }

    /// Device geometry with voltages and the gate's Schottky factor applied.
    pub fn device<T: Real>(&self) -> DeviceGeometry<T> {
        let g = &self.geometry;
        let p = &self.physics;
        let contacts = g
            .contacts
            .iter()
            .filter_map(|c| {
                let name = parse_contact(&c.name)?;
                let (u, factor) = match name {
                    ContactName::Source => (p.source_voltage, 1.0),
                    ContactName::Gate => (p.gate_voltage, p.schottky_factor),
                    ContactName::Drain => (p.drain_voltage, 1.0),
                };
                Some(ContactSpec {
                    name,
                    edge: parse_edge(&c.edge)?,
                    span: (T::lit(c.span[0]), T::lit(c.span[1])),
                    applied_voltage: T::lit(u),
                    schottky_factor: T::lit(factor),
                })
            })
            .collect();
        DeviceGeometry {
            width: T::lit(g.width),
            height: T::lit(g.height),
            contacts,
            nplus_regions: g.nplus_regions.iter().map(|r| Rect::new(T::lit(r[0]), T::lit(r[1]), T::lit(r[2]), T::lit(r[3]))).collect(),
            channel_doping: T::lit(g.channel_doping),
            nplus_doping: T::lit(g.nplus_doping),
        }
    }

    pub fn solver_config<T: Real>(&self) -> Result<SolverConfig<T>> {
        let s = &self.solver;
        let linear_solver = match s.linear_solver.as_str() {
            "auto" => LinearSolverKind::Auto,
            "direct" => LinearSolverKind::Direct,
            "iterative" => LinearSolverKind::Iterative,
            _ => return Err(Error::Config("solver.linear_solver must be auto, direct or iterative".into())),
        };
        Ok(SolverConfig {
            nonlinear_tol: T::lit(s.nonlinear_tol),
            max_gummel: s.max_gummel,
            damping: T::lit(s.damping),
            damping_floor: T::lit(s.damping_floor),
            newton_tol: T::lit(s.newton_tol),
            max_newton: s.max_newton,
            rho_floor: T::lit(s.rho_floor),
            enthalpy: EnthalpyModel { cap: T::lit(s.enthalpy_cap) },
            newton_polish: s.newton_polish,
            polish_below: T::lit(s.polish_below),
            linear_solver,
        })
    }

    pub fn armijo<T: Real>(&self) -> ArmijoConfig<T> {
        let o = &self.optimizer;
        ArmijoConfig {
            c1: T::lit(o.c1),
            beta: T::lit(o.beta),
            alpha0: T::lit(o.alpha0),
            max_backtracks: o.max_backtracks,
            tol: T::lit(o.tol),
            max_iters: o.max_iters,
        }
    }

    pub fn tracked_contact(&self) -> ContactName {
        parse_contact(&self.cost.contact).unwrap_or(ContactName::Drain)
    }

    /// Grid of the sweep.
    pub fn sweep_grid(&self) -> (usize, usize) {
        self.sweep.grid.map_or((self.geometry.nx, self.geometry.ny), |n| (n, n))
    }

    /// Base `ε²` of the sweep ladder.
    pub fn sweep_epsilon2(&self) -> f64 {
        self.sweep.epsilon2.unwrap_or(self.physics.epsilon2)
    }

    /// Applies command-line overrides: `grid` sets every grid size, `epsilon2` the model and sweep base.
    pub fn apply_overrides(&mut self, grid: Option<usize>, epsilon2: Option<f64>) -> Result<()> {
        if let Some(n) = grid {
            self.geometry.nx = n;
            self.geometry.ny = n;
            self.sweep.grid = Some(n);
        }
        if let Some(e) = epsilon2 {
            self.physics.epsilon2 = e;
            if self.sweep.epsilon2.is_some() {
                self.sweep.epsilon2 = Some(e);
            }
        }
        self.validate()
    }

    /// Canonical TOML rendering with every default spelled out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[geometry]\nnx = 40\nny = 40\n\n[physics]\nlambda2 = 0.0017\nepsilon2 = 1.88e-4\n";

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        assert_eq!(cfg.solver, SolverSection::default());
        assert_eq!(cfg.cost, CostSection::default());
        assert_eq!(cfg.geometry.contacts.len(), 3);
        assert_eq!(cfg.device::<f64>(), DeviceGeometry::mesfet());
        let again = parse_config_str(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn negative_gamma_rejected() {
        let err = parse_config_str(&format!("{MINIMAL}\n[cost]\ngamma = -1.0\n")).unwrap_err();
        assert!(err.to_string().contains("cost.gamma must be > 0"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = parse_config_str("[physics]\nlambda2 = 0.0017\nepsilon2 = = 1\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = parse_config_str(&format!("{MINIMAL}\n[solver]\ndampng = 0.5\n")).unwrap_err();
        assert!(err.to_string().contains("dampng") && err.to_string().contains("line 10"), "{err}");
    }

    #[test]
    fn missing_required_physics_rejected() {
        assert!(matches!(parse_config_str("[physics]\nlambda2 = 0.0017\n"), Err(Error::Config(_))));
        assert!(matches!(parse_config_str("[geometry]\nnx = 10\n"), Err(Error::Config(_))));
    }

    #[test]
    fn field_named_domain_errors() {
        for (extra, field) in [
            ("[solver]\ndamping = 2.0\n", "solver.damping"),
            ("[optimizer]\nbeta = 1.5\n", "beta"),
            ("[cost]\nkind = \"voltage\"\n", "cost.kind"),
            ("[sweep]\ngrid = 2\n", "sweep.grid"),
            ("[gradcheck]\ntaus = []\n", "gradcheck.taus"),
        ] {
            let err = parse_config_str(&format!("{MINIMAL}\n{extra}")).unwrap_err();
            assert!(err.to_string().contains(field), "{err}");
        }
        let bad = MINIMAL.replace("lambda2 = 0.0017", "lambda2 = 0.0");
        assert!(parse_config_str(&bad).unwrap_err().to_string().contains("physics.lambda2"));
    }

    #[test]
    fn overrides_apply_and_revalidate() {
        let mut cfg = parse_config_str(MINIMAL).unwrap();
        cfg.apply_overrides(Some(24), Some(0.0)).unwrap();
        assert_eq!((cfg.geometry.nx, cfg.sweep_grid()), (24, (24, 24)));
        assert_eq!(cfg.physics.epsilon2, 0.0);
        assert!(cfg.apply_overrides(Some(2), None).is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(parse_config("/nonexistent/qdd.cfg"), Err(Error::Io { .. })));
    }
}
