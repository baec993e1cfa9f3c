//! Scenario configuration: TOML `[section]` / `key = value` text with
//! validation that reports every problem at once, each with its line.

use std::collections::BTreeSet;
use std::fmt;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use rhodyn::evolve::Splitting;
use rhodyn::PotentialSpec;
use toml::de::{DeTable, DeValue};
use toml::Spanned;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Closed,
    PositionMeasurement,
    EprPosition,
    EprMomentum,
    KernelValidation,
    OracleComparison,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::Closed,
        Scenario::PositionMeasurement,
        Scenario::EprPosition,
        Scenario::EprMomentum,
        Scenario::KernelValidation,
        Scenario::OracleComparison,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Closed => "closed",
            Scenario::PositionMeasurement => "position-measurement",
            Scenario::EprPosition => "epr-position",
            Scenario::EprMomentum => "epr-momentum",
            Scenario::KernelValidation => "kernel-validation",
            Scenario::OracleComparison => "oracle-comparison",
        }
    }

    fn needs_packet(self) -> bool {
        matches!(
            self,
            Scenario::Closed | Scenario::OracleComparison | Scenario::PositionMeasurement
        )
    }

    fn needs_evolve(self) -> bool {
        self != Scenario::KernelValidation
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
                format!("unknown scenario {s:?}; expected one of {}", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub n: usize,
    pub x_min: f64,
    pub x_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicsConfig {
    pub hbar: f64,
    pub mass: f64,
    /// Mass of the second particle in the EPR scenarios.
    pub mass2: f64,
    pub potential: PotentialSpec,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketConfig {
    pub x0: f64,
    pub sigma: f64,
    pub p0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    pub centers: Vec<f64>,
    pub width: f64,
    pub gain: f64,
    /// Element that registers at the start of the run; drawn from the Born
    /// weights when absent.
    pub fired: Option<usize>,
    pub background_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EprObservable {
    Position { x2m: f64, width: f64 },
    Momentum { p2m: f64, band: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EprConfig {
    pub x0: f64,
    pub sigma_rel: f64,
    pub sigma_cm: f64,
    pub p_scale: f64,
    /// Free flight between breakup and registration.
    pub flight: f64,
    pub gain: f64,
    pub observable: EprObservable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelConfig {
    pub time: f64,
    pub slices: Vec<usize>,
    pub x0: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveSettings {
    pub dt: f64,
    pub steps: usize,
    pub record_every: usize,
    pub normalize_every: usize,
    pub splitting: Splitting,
    pub min_eig: bool,
    pub continuity: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSettings {
    pub n_runs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub out_dir: PathBuf,
    pub rho_abs: bool,
    /// Extra `rho_diag` snapshots every this many steps; 0 keeps only the first and last.
    pub snapshot_every: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub grid: GridConfig,
    pub physics: PhysicsConfig,
    pub packet: Option<PacketConfig>,
    pub detector: Option<DetectorConfig>,
    pub epr: Option<EprConfig>,
    pub kernel: Option<KernelConfig>,
    pub evolve: Option<EvolveSettings>,
    pub ensemble: EnsembleSettings,
    pub output: OutputConfig,
}

/// Values given on the command line; each replaces the corresponding key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub scenario: Option<String>,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub grid_n: Option<usize>,
    pub dt: Option<f64>,
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    CommandLine(&'static str),
    Unplaced,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub origin: Origin,
    pub section: String,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.origin {
            Origin::Line(l) => write!(f, "line {l}: ")?,
            Origin::CommandLine(flag) => write!(f, "{flag}: ")?,
            Origin::Unplaced => {}
        }
        if self.section.is_empty() {
            f.write_str("(top level)")?;
        } else {
            write!(f, "[{}]", self.section)?;
        }
        if let Some(k) = &self.key {
            write!(f, " {k}")?;
        }
        write!(f, ": {}", self.message)
    }
}

/// All problems found in one configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.0.len();
        writeln!(f, "{n} configuration error{}:", if n == 1 { "" } else { "s" })?;
        for e in &self.0 {
            writeln!(f, "  {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

const SCHEMA: &[(&str, &[&str])] = &[
    ("", &["scenario"]),
    ("grid", &["n", "x_min", "x_max"]),
    (
        "physics",
        &["hbar", "mass", "mass2", "potential", "omega", "center", "height", "left", "right"],
    ),
    ("packet", &["x0", "sigma", "p0"]),
    ("detector", &["centers", "width", "gain", "fired", "background_rate"]),
    (
        "epr",
        &["x0", "sigma_rel", "sigma_cm", "p_scale", "flight", "gain", "x2m", "width", "p2m", "band"],
    ),
    ("kernel", &["time", "slices", "x0", "sigma"]),
    (
        "evolve",
        &["dt", "steps", "record_every", "normalize_every", "splitting", "min_eig", "continuity"],
    ),
    ("ensemble", &["n_runs", "seed"]),
    ("output", &["out_dir", "rho_abs", "snapshot_every"]),
];

pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigErrors> {
    parse_config_with(text, &Overrides::default())
}

/// Parses `text`, letting `overrides` replace individual keys before validation.
pub fn parse_config_with(text: &str, overrides: &Overrides) -> Result<ScenarioConfig, ConfigErrors> {
    let (root, syntax) = DeTable::parse_recoverable(text);
    let mut r = Reader {
        text,
        root: root.get_ref(),
        overrides,
        errors: Vec::new(),
        missing_sections: BTreeSet::new(),
    };
    for e in syntax {
        let origin = e.span().map_or(Origin::Unplaced, |s| Origin::Line(r.line(s.start)));
        r.errors.push(ConfigError {
            origin,
            section: String::new(),
            key: None,
            message: format!("syntax error: {}", e.message()),
        });
    }
    if !r.errors.is_empty() {
        return Err(ConfigErrors(r.errors));
    }
    r.check_schema();
    let cfg = r.build();
    if r.errors.is_empty() {
        Ok(cfg.expect("config complete when no errors"))
    } else {
        Err(ConfigErrors(r.errors))
    }
}

struct Reader<'a> {
    text: &'a str,
    root: &'a DeTable<'a>,
    overrides: &'a Overrides,
    errors: Vec<ConfigError>,
    missing_sections: BTreeSet<&'static str>,
}

enum Ov<'a> {
    Str(&'a str),
    Int(u64),
    Float(f64),
}

impl<'a> Reader<'a> {
    fn line(&self, offset: usize) -> usize {
        let end = offset.min(self.text.len());
        self.text.as_bytes()[..end].iter().filter(|&&b| b == b'\n').count() + 1
    }

    fn push(&mut self, origin: Origin, section: &str, key: Option<&str>, message: String) {
        self.errors.push(ConfigError {
            origin,
            section: section.to_string(),
            key: key.map(str::to_string),
            message,
        });
    }

    fn check_schema(&mut self) {
        let root = self.root;
        for (k, v) in root.iter() {
            let name = k.get_ref().as_ref();
            let line = Origin::Line(self.line(k.span().start));
            match (v.get_ref(), SCHEMA.iter().find(|(s, _)| *s == name && !s.is_empty())) {
                (DeValue::Table(t), Some((sec, keys))) => {
                    for (kk, _) in t.iter() {
                        let key = kk.get_ref().as_ref();
                        if !keys.contains(&key) {
                            let origin = Origin::Line(self.line(kk.span().start));
                            self.push(origin, sec, Some(key), format!("unknown key; expected one of {}", keys.join(", ")));
                        }
                    }
                }
                (_, Some((sec, _))) => self.push(line, sec, None, "expected a [section] table".into()),
                (DeValue::Table(_), None) => self.push(line, name, None, "unknown section".into()),
                (_, None) if name == "scenario" => {}
                (_, None) => self.push(line, "", Some(name), "unknown key; expected scenario".into()),
            }
        }
    }

    fn section(&self, section: &str) -> Option<&'a Spanned<DeValue<'a>>> {
        if section.is_empty() {
            return None;
        }
        self.root
            .iter()
            .find(|(k, _)| k.get_ref().as_ref() == section)
            .map(|(_, v)| v)
    }

    fn has_section(&self, section: &str) -> bool {
        matches!(self.section(section).map(Spanned::get_ref), Some(DeValue::Table(_)))
    }

    fn lookup(&self, section: &str, key: &str) -> Option<&'a Spanned<DeValue<'a>>> {
        let table: &'a DeTable<'a> = if section.is_empty() {
            self.root
        } else {
            match self.section(section)?.get_ref() {
                DeValue::Table(t) => t,
                _ => return None,
            }
        };
        table
            .iter()
            .find(|(k, _)| k.get_ref().as_ref() == key)
            .map(|(_, v)| v)
    }

    fn override_for(&self, section: &str, key: &str) -> Option<(&'static str, Ov<'a>)> {
        let o = self.overrides;
        match (section, key) {
            ("", "scenario") => o.scenario.as_deref().map(|s| ("--scenario", Ov::Str(s))),
            ("output", "out_dir") => o
                .out_dir
                .as_ref()
                .and_then(|p| p.to_str())
                .map(|s| ("--out-dir", Ov::Str(s))),
            ("ensemble", "seed") => o.seed.map(|v| ("--seed", Ov::Int(v))),
            ("grid", "n") => o.grid_n.map(|v| ("--grid-n", Ov::Int(v as u64))),
            ("evolve", "dt") => o.dt.map(|v| ("--dt", Ov::Float(v))),
            ("evolve", "steps") => o.steps.map(|v| ("--steps", Ov::Int(v as u64))),
            _ => None,
        }
    }

    /// Raw value with its origin, `None` when the key is absent.
    fn raw(&self, section: &str, key: &str) -> Option<(Origin, Raw<'a>)> {
        if let Some((flag, v)) = self.override_for(section, key) {
            let raw = match v {
                Ov::Str(s) => Raw::Str(s),
                Ov::Int(i) => Raw::Int(i as i128),
                Ov::Float(f) => Raw::Float(f),
            };
            return Some((Origin::CommandLine(flag), raw));
        }
        let v = self.lookup(section, key)?;
        Some((Origin::Line(self.line(v.span().start)), Raw::from_value(v.get_ref())))
    }

    fn missing(&mut self, section: &'static str, key: &str, required: bool) {
        if !required {
            return;
        }
        if !section.is_empty() && !self.has_section(section) {
            if self.missing_sections.insert(section) {
                self.push(Origin::Unplaced, section, None, "missing required section".into());
            }
            return;
        }
        let origin = self
            .section(section)
            .map_or(Origin::Unplaced, |s| Origin::Line(self.line(s.span().start)));
        self.push(origin, section, Some(key), "missing required key".into());
    }

    fn get<T>(
        &mut self,
        section: &'static str,
        key: &'static str,
        required: bool,
        convert: impl FnOnce(&Raw<'a>) -> Result<T, String>,
    ) -> Option<(Origin, T)> {
        match self.raw(section, key) {
            None => {
                self.missing(section, key, required);
                None
            }
            Some((origin, raw)) => match convert(&raw) {
                Ok(v) => Some((origin, v)),
                Err(msg) => {
                    self.push(origin, section, Some(key), msg);
                    None
                }
            },
        }
    }

    /// Reads a float and checks `ok`, reporting `constraint` on failure.
    fn float(
        &mut self,
        section: &'static str,
        key: &'static str,
        default: Option<f64>,
        constraint: Constraint,
    ) -> Option<f64> {
        let got = self.get(section, key, default.is_none(), Raw::as_f64);
        let (origin, v) = match got {
            Some(v) => v,
            None => return default.filter(|_| self.raw(section, key).is_none()),
        };
        if constraint.holds(v) {
            Some(v)
        } else {
            self.push(origin, section, Some(key), format!("must be {}, got {v}", constraint.describe()));
            None
        }
    }

    fn int(
        &mut self,
        section: &'static str,
        key: &'static str,
        default: Option<u64>,
        min: u64,
    ) -> Option<u64> {
        let got = self.get(section, key, default.is_none(), Raw::as_u64);
        let (origin, v) = match got {
            Some(v) => v,
            None => return default.filter(|_| self.raw(section, key).is_none()),
        };
        if v >= min {
            Some(v)
        } else {
            self.push(origin, section, Some(key), format!("must be >= {min}, got {v}"));
            None
        }
    }

    fn usize(&mut self, section: &'static str, key: &'static str, default: Option<usize>, min: usize) -> Option<usize> {
        self.int(section, key, default.map(|d| d as u64), min as u64)
            .map(|v| v as usize)
    }

    fn boolean(&mut self, section: &'static str, key: &'static str, default: bool) -> Option<bool> {
        match self.get(section, key, false, Raw::as_bool) {
            Some((_, v)) => Some(v),
            None if self.raw(section, key).is_none() => Some(default),
            None => None,
        }
    }

    fn string(&mut self, section: &'static str, key: &'static str, default: Option<&str>) -> Option<(Origin, String)> {
        match self.get(section, key, default.is_none(), |r| r.as_str().map(str::to_string)) {
            Some(v) => Some(v),
            None if self.raw(section, key).is_none() => default.map(|d| (Origin::Unplaced, d.to_string())),
            None => None,
        }
    }

    fn choice<T: Copy>(
        &mut self,
        section: &'static str,
        key: &'static str,
        default: Option<&str>,
        options: &[(&str, T)],
    ) -> Option<T> {
        let (origin, s) = self.string(section, key, default)?;
        match options.iter().find(|(name, _)| *name == s) {
            Some((_, v)) => Some(*v),
            None => {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                self.push(origin, section, Some(key), format!("must be one of {}, got {s:?}", names.join(", ")));
                None
            }
        }
    }

    fn float_list(&mut self, section: &'static str, key: &'static str) -> Option<Vec<f64>> {
        let (origin, v) = self.get(section, key, true, |r| r.list(Raw::as_f64))?;
        if v.is_empty() {
            self.push(origin, section, Some(key), "must not be empty".into());
            return None;
        }
        if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
            self.push(origin, section, Some(key), format!("entries must be finite, got {bad}"));
            return None;
        }
        Some(v)
    }

    fn int_list(&mut self, section: &'static str, key: &'static str, min: u64) -> Option<Vec<usize>> {
        let (origin, v) = self.get(section, key, true, |r| r.list(Raw::as_u64))?;
        if v.is_empty() {
            self.push(origin, section, Some(key), "must not be empty".into());
            return None;
        }
        if let Some(bad) = v.iter().find(|&&x| x < min) {
            self.push(origin, section, Some(key), format!("entries must be >= {min}, got {bad}"));
            return None;
        }
        Some(v.into_iter().map(|x| x as usize).collect())
    }

    fn build(&mut self) -> Option<ScenarioConfig> {
        let scenario = match self.string("", "scenario", None) {
            Some((origin, s)) => match s.parse::<Scenario>() {
                Ok(sc) => Some(sc),
                Err(msg) => {
                    self.push(origin, "", Some("scenario"), msg);
                    None
                }
            },
            None => None,
        };

        let grid = self.grid();
        let physics = self.physics();
        let evolve = match scenario {
            Some(sc) if !sc.needs_evolve() && !self.has_section("evolve") => None,
            _ => self.evolve(),
        };
        let ensemble = self.ensemble();
        let output = self.output();

        let packet = match scenario {
            Some(sc) if sc.needs_packet() => self.packet().map(Some),
            _ => Some(None),
        };
        let detector = match scenario {
            Some(Scenario::PositionMeasurement) => self.detector().map(Some),
            _ => Some(None),
        };
        let epr = match scenario {
            Some(Scenario::EprPosition) => self.epr(true).map(Some),
            Some(Scenario::EprMomentum) => self.epr(false).map(Some),
            _ => Some(None),
        };
        let kernel = match scenario {
            Some(Scenario::KernelValidation) => self.kernel().map(Some),
            _ => Some(None),
        };

        if let Some(Some(d)) = &detector {
            if let Some(k) = d.fired.filter(|&k| k >= d.centers.len()) {
                let origin = self.raw("detector", "fired").map_or(Origin::Unplaced, |(o, _)| o);
                let msg = format!("must index one of the {} elements, got {k}", d.centers.len());
                self.push(origin, "detector", Some("fired"), msg);
            }
        }

        Some(ScenarioConfig {
            scenario: scenario?,
            grid: grid?,
            physics: physics?,
            packet: packet?,
            detector: detector?,
            epr: epr?,
            kernel: kernel?,
            evolve: match scenario? {
                sc if sc.needs_evolve() => Some(evolve?),
                _ => evolve,
            },
            ensemble: ensemble?,
            output: output?,
        })
    }

    fn grid(&mut self) -> Option<GridConfig> {
        let n = self.get("grid", "n", true, Raw::as_u64);
        let n = match n {
            Some((origin, v)) if v < 8 || v % 2 != 0 => {
                self.push(origin, "grid", Some("n"), format!("must be even and >= 8, got {v}"));
                None
            }
            v => v.map(|(_, v)| v as usize),
        };
        let x_min = self.float("grid", "x_min", None, Constraint::Finite);
        let x_max = self.float("grid", "x_max", None, Constraint::Finite);
        if let (Some(a), Some(b)) = (x_min, x_max) {
            if b <= a {
                let origin = self.raw("grid", "x_max").map_or(Origin::Unplaced, |(o, _)| o);
                self.push(origin, "grid", Some("x_max"), format!("must exceed x_min = {a}, got {b}"));
                return None;
            }
        }
        Some(GridConfig {
            n: n?,
            x_min: x_min?,
            x_max: x_max?,
        })
    }

    fn physics(&mut self) -> Option<PhysicsConfig> {
        let hbar = self.float("physics", "hbar", Some(1.0), Constraint::Positive);
        let mass = self.float("physics", "mass", Some(1.0), Constraint::Positive);
        let mass2 = self.float("physics", "mass2", Some(1.0), Constraint::Positive);
        #[derive(Clone, Copy)]
        enum Kind {
            Free,
            Harmonic,
            Barrier,
        }
        let kind = self.choice(
            "physics",
            "potential",
            Some("free"),
            &[("free", Kind::Free), ("harmonic", Kind::Harmonic), ("barrier", Kind::Barrier)],
        );
        let potential = match kind? {
            Kind::Free => Some(PotentialSpec::Free),
            Kind::Harmonic => {
                let omega = self.float("physics", "omega", None, Constraint::Positive);
                let center = self.float("physics", "center", Some(0.0), Constraint::Finite);
                Some(PotentialSpec::Harmonic {
                    omega: omega?,
                    center: center?,
                })
            }
            Kind::Barrier => {
                let height = self.float("physics", "height", None, Constraint::Finite);
                let left = self.float("physics", "left", None, Constraint::Finite);
                let right = self.float("physics", "right", None, Constraint::Finite);
                if let (Some(l), Some(r)) = (left, right) {
                    if r <= l {
                        let origin = self.raw("physics", "right").map_or(Origin::Unplaced, |(o, _)| o);
                        self.push(origin, "physics", Some("right"), format!("must exceed left = {l}, got {r}"));
                        return None;
                    }
                }
                Some(PotentialSpec::Barrier {
                    height: height?,
                    left: left?,
                    right: right?,
                })
            }
        };
        Some(PhysicsConfig {
            hbar: hbar?,
            mass: mass?,
            mass2: mass2?,
            potential: potential?,
        })
    }

    fn packet(&mut self) -> Option<PacketConfig> {
        let x0 = self.float("packet", "x0", None, Constraint::Finite);
        let sigma = self.float("packet", "sigma", None, Constraint::Positive);
        let p0 = self.float("packet", "p0", Some(0.0), Constraint::Finite);
        Some(PacketConfig {
            x0: x0?,
            sigma: sigma?,
            p0: p0?,
        })
    }

    fn detector(&mut self) -> Option<DetectorConfig> {
        let centers = self.float_list("detector", "centers");
        let width = self.float("detector", "width", None, Constraint::Positive);
        let gain = self.float("detector", "gain", None, Constraint::NonNegative);
        let fired = match self.get("detector", "fired", false, Raw::as_u64) {
            Some((_, k)) => Some(Some(k as usize)),
            None if self.raw("detector", "fired").is_none() => Some(None),
            None => None,
        };
        let background_rate = self.float("detector", "background_rate", Some(0.0), Constraint::NonNegative);
        Some(DetectorConfig {
            centers: centers?,
            width: width?,
            gain: gain?,
            fired: fired?,
            background_rate: background_rate?,
        })
    }

    fn epr(&mut self, position: bool) -> Option<EprConfig> {
        let x0 = self.float("epr", "x0", Some(0.0), Constraint::Finite);
        let sigma_rel = self.float("epr", "sigma_rel", None, Constraint::Positive);
        let sigma_cm = self.float("epr", "sigma_cm", None, Constraint::Positive);
        let p_scale = self.float("epr", "p_scale", Some(0.0), Constraint::Finite);
        let flight = self.float("epr", "flight", Some(0.0), Constraint::NonNegative);
        let gain = self.float("epr", "gain", None, Constraint::NonNegative);
        let observable = if position {
            let x2m = self.float("epr", "x2m", None, Constraint::Finite);
            let width = self.float("epr", "width", None, Constraint::Positive);
            EprObservable::Position {
                x2m: x2m?,
                width: width?,
            }
        } else {
            let p2m = self.float("epr", "p2m", None, Constraint::Finite);
            let band = self.float("epr", "band", None, Constraint::Positive);
            EprObservable::Momentum {
                p2m: p2m?,
                band: band?,
            }
        };
        Some(EprConfig {
            x0: x0?,
            sigma_rel: sigma_rel?,
            sigma_cm: sigma_cm?,
            p_scale: p_scale?,
            flight: flight?,
            gain: gain?,
            observable,
        })
    }

    fn kernel(&mut self) -> Option<KernelConfig> {
        let time = self.float("kernel", "time", None, Constraint::Positive);
        let slices = self.int_list("kernel", "slices", 1);
        let x0 = self.float("kernel", "x0", Some(0.0), Constraint::Finite);
        let sigma = self.float("kernel", "sigma", Some(0.5), Constraint::Positive);
        Some(KernelConfig {
            time: time?,
            slices: slices?,
            x0: x0?,
            sigma: sigma?,
        })
    }

    fn evolve(&mut self) -> Option<EvolveSettings> {
        let dt = self.float("evolve", "dt", None, Constraint::Positive);
        let steps = self.usize("evolve", "steps", None, 1);
        let record_every = self.usize("evolve", "record_every", Some(1), 1);
        let normalize_every = self.usize("evolve", "normalize_every", Some(1), 1);
        let splitting = self.choice(
            "evolve",
            "splitting",
            Some("symmetric"),
            &[("symmetric", Splitting::Symmetric), ("gain-first", Splitting::GainFirst)],
        );
        let min_eig = self.boolean("evolve", "min_eig", false);
        let continuity = self.boolean("evolve", "continuity", false);
        Some(EvolveSettings {
            dt: dt?,
            steps: steps?,
            record_every: record_every?,
            normalize_every: normalize_every?,
            splitting: splitting?,
            min_eig: min_eig?,
            continuity: continuity?,
        })
    }

    fn ensemble(&mut self) -> Option<EnsembleSettings> {
        let n_runs = self.usize("ensemble", "n_runs", Some(1), 1);
        let seed = self.int("ensemble", "seed", Some(0), 0);
        Some(EnsembleSettings {
            n_runs: n_runs?,
            seed: seed?,
        })
    }

    fn output(&mut self) -> Option<OutputConfig> {
        let out_dir = self.string("output", "out_dir", Some("out"));
        let rho_abs = self.boolean("output", "rho_abs", false);
        let snapshot_every = self.usize("output", "snapshot_every", Some(0), 0);
        Some(OutputConfig {
            out_dir: PathBuf::from(out_dir?.1),
            rho_abs: rho_abs?,
            snapshot_every: snapshot_every?,
        })
    }
}

#[derive(Clone, Copy)]
enum Constraint {
    Finite,
    Positive,
    NonNegative,
}

impl Constraint {
    fn holds(self, v: f64) -> bool {
        match self {
            Constraint::Finite => v.is_finite(),
            Constraint::Positive => v.is_finite() && v > 0.0,
            Constraint::NonNegative => v.is_finite() && v >= 0.0,
        }
    }

    fn describe(self) -> &'static str {
        match self {
            Constraint::Finite => "finite",
            Constraint::Positive => "finite and > 0",
            Constraint::NonNegative => "finite and >= 0",
        }
    }
}

enum Raw<'a> {
    Str(&'a str),
    Int(i128),
    Float(f64),
    Bool(bool),
    List(Vec<Raw<'a>>),
    Other(&'static str),
}

impl<'a> Raw<'a> {
    fn from_value(v: &'a DeValue<'a>) -> Self {
        match v {
            DeValue::String(s) => Raw::Str(s.as_ref()),
            DeValue::Integer(i) if i.radix() == 10 => i
                .as_str()
                .replace('_', "")
                .parse::<i128>()
                .map_or(Raw::Other("an integer out of range"), Raw::Int),
            DeValue::Integer(i) => {
                let digits = i.as_str().replace('_', "");
                let body = digits.get(2..).unwrap_or("");
                i128::from_str_radix(body, i.radix()).map_or(Raw::Other("an integer out of range"), Raw::Int)
            }
            DeValue::Float(f) => f
                .as_str()
                .replace('_', "")
                .parse::<f64>()
                .map_or(Raw::Other("a malformed float"), Raw::Float),
            DeValue::Boolean(b) => Raw::Bool(*b),
            DeValue::Array(a) => Raw::List(a.iter().map(|x| Raw::from_value(x.get_ref())).collect()),
            DeValue::Datetime(_) => Raw::Other("a datetime"),
            DeValue::Table(_) => Raw::Other("a table"),
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Raw::Str(_) => "a string",
            Raw::Int(_) => "an integer",
            Raw::Float(_) => "a float",
            Raw::Bool(_) => "a boolean",
            Raw::List(_) => "an array",
            Raw::Other(k) => k,
        }
    }

    fn as_f64(&self) -> Result<f64, String> {
        match self {
            Raw::Float(f) => Ok(*f),
            Raw::Int(i) => Ok(*i as f64),
            other => Err(format!("expected a number, got {}", other.kind())),
        }
    }

    fn as_u64(&self) -> Result<u64, String> {
        match self {
            Raw::Int(i) => u64::try_from(*i).map_err(|_| format!("must be a nonnegative integer, got {i}")),
            other => Err(format!("expected a nonnegative integer, got {}", other.kind())),
        }
    }

    fn as_bool(&self) -> Result<bool, String> {
        match self {
            Raw::Bool(b) => Ok(*b),
            other => Err(format!("expected true or false, got {}", other.kind())),
        }
    }

    fn as_str(&self) -> Result<&'a str, String> {
        match self {
            Raw::Str(s) => Ok(s),
            other => Err(format!("expected a quoted string, got {}", other.kind())),
        }
    }

    fn list<T>(&self, item: impl Fn(&Raw<'a>) -> Result<T, String>) -> Result<Vec<T>, String> {
        match self {
            Raw::List(v) => v
                .iter()
                .enumerate()
                .map(|(i, x)| item(x).map_err(|e| format!("entry {i}: {e}")))
                .collect(),
            other => Err(format!("expected an array, got {}", other.kind())),
        }
    }
}

impl ScenarioConfig {
    /// The resolved configuration in the input format; parsing it back yields `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let f = |v: f64| format!("{v:?}");
        let _ = writeln!(s, "scenario = \"{}\"", self.scenario);
        let g = &self.grid;
        let _ = write!(s, "\n[grid]\nn = {}\nx_min = {}\nx_max = {}\n", g.n, f(g.x_min), f(g.x_max));
        let p = &self.physics;
        let _ = write!(s, "\n[physics]\nhbar = {}\nmass = {}\nmass2 = {}\n", f(p.hbar), f(p.mass), f(p.mass2));
        match &p.potential {
            PotentialSpec::Free | PotentialSpec::Tabulated(_) => s.push_str("potential = \"free\"\n"),
            PotentialSpec::Harmonic { omega, center } => {
                let _ = write!(s, "potential = \"harmonic\"\nomega = {}\ncenter = {}\n", f(*omega), f(*center));
            }
            PotentialSpec::Barrier { height, left, right } => {
                let _ = write!(
                    s,
                    "potential = \"barrier\"\nheight = {}\nleft = {}\nright = {}\n",
                    f(*height),
                    f(*left),
                    f(*right)
                );
            }
        }
        if let Some(pk) = &self.packet {
            let _ = write!(s, "\n[packet]\nx0 = {}\nsigma = {}\np0 = {}\n", f(pk.x0), f(pk.sigma), f(pk.p0));
        }
        if let Some(d) = &self.detector {
            let centers: Vec<String> = d.centers.iter().map(|&c| f(c)).collect();
            let _ = write!(
                s,
                "\n[detector]\ncenters = [{}]\nwidth = {}\ngain = {}\n",
                centers.join(", "),
                f(d.width),
                f(d.gain)
            );
            if let Some(k) = d.fired {
                let _ = writeln!(s, "fired = {k}");
            }
            let _ = writeln!(s, "background_rate = {}", f(d.background_rate));
        }
        if let Some(e) = &self.epr {
            let _ = write!(
                s,
                "\n[epr]\nx0 = {}\nsigma_rel = {}\nsigma_cm = {}\np_scale = {}\nflight = {}\ngain = {}\n",
                f(e.x0),
                f(e.sigma_rel),
                f(e.sigma_cm),
                f(e.p_scale),
                f(e.flight),
                f(e.gain)
            );
            match e.observable {
                EprObservable::Position { x2m, width } => {
                    let _ = write!(s, "x2m = {}\nwidth = {}\n", f(x2m), f(width));
                }
                EprObservable::Momentum { p2m, band } => {
                    let _ = write!(s, "p2m = {}\nband = {}\n", f(p2m), f(band));
                }
            }
        }
        if let Some(k) = &self.kernel {
            let slices: Vec<String> = k.slices.iter().map(|v| v.to_string()).collect();
            let _ = write!(
                s,
                "\n[kernel]\ntime = {}\nslices = [{}]\nx0 = {}\nsigma = {}\n",
                f(k.time),
                slices.join(", "),
                f(k.x0),
                f(k.sigma)
            );
        }
        if let Some(e) = &self.evolve {
            let splitting = match e.splitting {
                Splitting::Symmetric => "symmetric",
                Splitting::GainFirst => "gain-first",
            };
            let _ = write!(
                s,
                "\n[evolve]\ndt = {}\nsteps = {}\nrecord_every = {}\nnormalize_every = {}\nsplitting = \"{splitting}\"\nmin_eig = {}\ncontinuity = {}\n",
                f(e.dt),
                e.steps,
                e.record_every,
                e.normalize_every,
                e.min_eig,
                e.continuity
            );
        }
        let _ = write!(s, "\n[ensemble]\nn_runs = {}\nseed = {}\n", self.ensemble.n_runs, self.ensemble.seed);
        let o = &self.output;
        let _ = write!(
            s,
            "\n[output]\nout_dir = {:?}\nrho_abs = {}\nsnapshot_every = {}\n",
            o.out_dir.display().to_string(),
            o.rho_abs,
            o.snapshot_every
        );
        s
    }
}
