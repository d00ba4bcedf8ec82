//! Sectioned `key = value` run configs, checked against the schema file.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::OnceLock;

use sinrlab::experiments::degree::DegreeConfig;
use sinrlab::experiments::invariants::InvariantConfig;
use sinrlab::experiments::local::LocalDelayConfig;
use sinrlab::experiments::tail::ExitTailConfig;
use sinrlab::experiments::time_constant::TimeConstantConfig;
use sinrlab::params::{ModelParams, NoiseLaw};
use sinrlab::pointproc::{Position, Window};

use crate::CliError;

pub const SCHEMA: &str = include_str!("../config/schema.txt");
pub const SMALL_CONFIG: &str = include_str!("../config/small.conf");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Float,
    Uint,
    Int,
    Floats,
    Uints,
    Noise,
    Boundary,
}

impl Kind {
    fn parse(s: &str) -> Option<Kind> {
        Some(match s {
            "float" => Kind::Float,
            "uint" => Kind::Uint,
            "int" => Kind::Int,
            "floats" => Kind::Floats,
            "uints" => Kind::Uints,
            "noise" => Kind::Noise,
            "boundary" => Kind::Boundary,
            _ => return None,
        })
    }

    fn check(&self, v: &str) -> Result<(), String> {
        let ok = match self {
            Kind::Float => parse_f64(v).is_ok(),
            Kind::Uint => v.parse::<u64>().is_ok(),
            Kind::Int => v.parse::<i64>().is_ok(),
            Kind::Floats => split(v).all(|x| parse_f64(x).is_ok()),
            Kind::Uints => split(v).all(|x| x.parse::<u64>().is_ok()),
            Kind::Noise => parse_noise(v).is_ok(),
            Kind::Boundary => matches!(v, "torus" | "plane"),
        };
        if ok {
            Ok(())
        } else {
            Err(format!("expected {self:?}, got '{v}'").to_lowercase())
        }
    }
}

#[derive(Debug, Clone)]
pub struct SchemaEntry {
    pub key: &'static str,
    pub kind: Kind,
    pub default: Option<&'static str>,
}

pub fn schema() -> &'static [SchemaEntry] {
    static CELL: OnceLock<Vec<SchemaEntry>> = OnceLock::new();
    CELL.get_or_init(|| {
        SCHEMA
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                let mut it = l.split_whitespace();
                let key = it.next().expect("schema key");
                let kind = Kind::parse(it.next().expect("schema type")).expect("known schema type");
                let default = it.next().expect("schema default");
                SchemaEntry {
                    key,
                    kind,
                    default: (default != "-").then_some(default),
                }
            })
            .collect()
    })
}

fn entry(key: &str) -> Option<&'static SchemaEntry> {
    schema().iter().find(|e| e.key == key)
}

fn split(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim)
}

fn parse_f64(v: &str) -> Result<f64, String> {
    v.parse::<f64>().map_err(|_| format!("'{v}' is not a number"))
}

fn parse_noise(v: &str) -> Result<NoiseLaw, String> {
    let (name, arg) = match v.split_once(':') {
        Some((n, a)) => (n.trim(), Some(a.trim())),
        None => (v, None),
    };
    match (name, arg) {
        ("off", None) => Ok(NoiseLaw::Off),
        ("constant", Some(a)) => Ok(NoiseLaw::Constant(parse_f64(a)?)),
        ("exponential", Some(a)) => Ok(NoiseLaw::Exponential { mean: parse_f64(a)? }),
        _ => Err(format!("unknown noise law '{v}'")),
    }
}

/// A parsed config: explicit values plus the sections that appeared.
#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
    sections: BTreeSet<String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, CliError> {
        let known: BTreeSet<&str> = schema().iter().map(|e| e.key.split_once('.').unwrap().0).collect();
        let mut cfg = Config::default();
        let mut section: Option<String> = None;
        for (n, raw) in text.lines().enumerate() {
            let n = n + 1;
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if !known.contains(name) {
                    return Err(CliError::Config(format!("line {n}: unknown section [{name}]")));
                }
                cfg.sections.insert(name.to_string());
                section = Some(name.to_string());
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {n}: expected `key = value`, got '{line}'")))?;
            let sec = section
                .as_deref()
                .ok_or_else(|| CliError::Config(format!("line {n}: key outside of any section")))?;
            let key = format!("{sec}.{}", k.trim());
            let e = entry(&key).ok_or_else(|| CliError::Config(format!("line {n}: unknown key '{}' in [{sec}]", k.trim())))?;
            let v = v.trim();
            e.kind.check(v).map_err(|m| CliError::Config(format!("line {n}: {key}: {m}")))?;
            if cfg.values.insert(key.clone(), v.to_string()).is_some() {
                return Err(CliError::Config(format!("line {n}: duplicate key '{key}'")));
            }
        }
        Ok(cfg)
    }

    pub fn has_section(&self, name: &str) -> bool {
        self.sections.contains(name)
    }

    pub fn set(&mut self, key: &str, value: String) {
        assert!(entry(key).is_some(), "key {key} missing from schema");
        self.values.insert(key.to_string(), value);
    }

    fn raw(&self, key: &str) -> Option<&str> {
        let e = entry(key).unwrap_or_else(|| panic!("key {key} missing from schema"));
        self.values.get(key).map(String::as_str).or(e.default)
    }

    fn f64(&self, key: &str) -> f64 {
        parse_f64(self.raw(key).expect("float key has a default")).unwrap()
    }

    fn u64(&self, key: &str) -> u64 {
        self.raw(key).expect("uint key has a default").parse().unwrap()
    }

    fn usize(&self, key: &str) -> usize {
        self.u64(key) as usize
    }

    fn i64(&self, key: &str) -> i64 {
        self.raw(key).expect("int key has a default").parse().unwrap()
    }

    fn f64s(&self, key: &str) -> Vec<f64> {
        split(self.raw(key).unwrap()).map(|x| parse_f64(x).unwrap()).collect()
    }

    fn u64s(&self, key: &str) -> Vec<u64> {
        split(self.raw(key).unwrap()).map(|x| x.parse().unwrap()).collect()
    }

    pub fn seed(&self) -> u64 {
        self.u64("model.seed")
    }

    pub fn generate_slot(&self) -> i64 {
        self.i64("generate.slot")
    }

    pub fn window(&self) -> Window {
        let (w, h) = (self.f64("window.width"), self.f64("window.height"));
        let base = match self.raw("window.boundary") {
            Some("plane") => Window::plane(w, h, self.f64("window.margin")),
            _ => Window::torus(w, h),
        };
        base.with_origin(Position::new(self.f64("window.origin_x"), self.f64("window.origin_y")))
    }

    /// Model parameters, validated.
    pub fn model(&self) -> Result<ModelParams, CliError> {
        let noise = parse_noise(self.raw("model.noise").unwrap()).map_err(CliError::Config)?;
        let mut m = ModelParams::poisson(
            self.f64("model.lambda"),
            self.f64("model.p"),
            self.f64("model.mu"),
            self.f64("model.threshold"),
            self.f64("model.a"),
            self.f64("model.beta"),
            noise,
            self.window(),
        )
        .with_seed(self.seed());
        if self.raw("model.grid_step").is_some() {
            m = m.with_grid(self.f64("model.grid_step"));
        }
        m.validate()?;
        Ok(m)
    }

    pub fn degree(&self) -> Result<DegreeConfig, CliError> {
        Ok(DegreeConfig {
            model: self.model()?,
            k_list: self.u64s("degree.k_list").into_iter().map(|k| k as u32).collect(),
            patterns: self.usize("degree.patterns"),
            slots: self.usize("degree.slots"),
        })
    }

    pub fn exit_tail(&self) -> Result<ExitTailConfig, CliError> {
        Ok(ExitTailConfig {
            model: self.model()?,
            qs: self.u64s("exit_tail.q_list"),
            replicates: self.usize("exit_tail.replicates"),
            horizon: self.u64("exit_tail.horizon"),
            slope_range: (self.u64("exit_tail.slope_min"), self.u64("exit_tail.slope_max")),
        })
    }

    pub fn local_delay(&self) -> Result<LocalDelayConfig, CliError> {
        Ok(LocalDelayConfig {
            model: self.model()?,
            r: self.f64("local_delay.r"),
            patterns: self.usize("local_delay.patterns"),
            marks_per_pattern: self.usize("local_delay.marks"),
            horizon: self.u64("local_delay.horizon"),
            chain_patterns: self.usize("local_delay.chain_patterns"),
        })
    }

    pub fn time_constant(&self) -> Result<TimeConstantConfig, CliError> {
        let d = self.f64s("time_constant.direction");
        if d.len() != 2 {
            return Err(CliError::Config("time_constant.direction needs two components".into()));
        }
        Ok(TimeConstantConfig {
            model: self.model()?,
            ladder: self.f64s("time_constant.ladder"),
            direction: (d[0], d[1]),
            patterns: self.usize("time_constant.patterns"),
            marks_per_pattern: self.usize("time_constant.marks"),
            horizon: self.u64("time_constant.horizon"),
        })
    }

    pub fn invariants(&self) -> Result<InvariantConfig, CliError> {
        Ok(InvariantConfig {
            model: self.model()?,
            patterns: self.usize("selftest.patterns"),
            slots: self.usize("selftest.slots"),
            pairs: self.usize("selftest.pairs"),
            horizon: self.u64("selftest.horizon"),
        })
    }

    pub fn z(&self) -> f64 {
        self.f64("validate.z")
    }

    pub fn rel(&self) -> f64 {
        self.f64("validate.rel")
    }

    /// Effective values of the model, window, present sections and `extra`
    /// sections, in config syntax. Parsing the result gives back an
    /// equivalent config.
    pub fn resolved_text(&self, extra: &[&str]) -> String {
        let mut out = String::new();
        let mut current = "";
        for e in schema() {
            let (sec, key) = e.key.split_once('.').unwrap();
            if !(matches!(sec, "model" | "window") || self.has_section(sec) || extra.contains(&sec)) {
                continue;
            }
            let Some(v) = self.raw(e.key) else { continue };
            if sec != current {
                let _ = writeln!(out, "{}[{sec}]", if current.is_empty() { "" } else { "\n" });
                current = sec;
            }
            let _ = writeln!(out, "{key} = {v}");
        }
        out
    }
}
