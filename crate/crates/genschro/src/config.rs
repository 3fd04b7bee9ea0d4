//! Flat dotted-key scenario files: one `key = value` pair per line,
//! `#` comments, quoted or bare strings. Unknown keys are errors, most
//! values have defaults, grid.* and time.* are required.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub physics: PhysicsSection,
    pub grid: GridSection,
    pub time: TimeSection,
    pub mu: MuSection,
    pub potential: PotentialSection,
    pub initial: InitialSection,
    pub assembly: AssemblySection,
    pub spectral: SpectralSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhysicsSection {
    pub hbar: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSection {
    pub half_width: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSection {
    pub dt: f64,
    pub steps: usize,
    pub snapshot_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MuSection {
    pub kind: String,
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
    pub file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialSection {
    pub kind: String,
    pub omega: Option<f64>,
    pub epsilon: Option<f64>,
    pub file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitialSection {
    pub kind: String,
    pub x0: f64,
    pub k0: f64,
    pub sigma: f64,
    pub phi_mode: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssemblySection {
    pub form: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralSection {
    pub enabled: bool,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputSection {
    pub dir: String,
    pub precision: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            physics: PhysicsSection {
                hbar: 1.0,
                mass: 1.0,
            },
            grid: GridSection {
                half_width: 10.0,
                points: 501,
            },
            time: TimeSection {
                dt: 0.005,
                steps: 200,
                snapshot_every: 10,
            },
            mu: MuSection {
                kind: "zero".into(),
                gamma: None,
                lambda: None,
                file: None,
            },
            potential: PotentialSection {
                kind: "zero".into(),
                omega: None,
                epsilon: None,
                file: None,
            },
            initial: InitialSection {
                kind: "gaussian".into(),
                x0: 0.0,
                k0: 0.0,
                sigma: 1.0,
                phi_mode: "pt_of_psi".into(),
            },
            assembly: AssemblySection {
                form: "divergence".into(),
            },
            spectral: SpectralSection {
                enabled: false,
                k: 8,
            },
            output: OutputSection {
                dir: "out".into(),
                precision: 17,
            },
        }
    }
}

/// Strip an unquoted `#` comment from a line.
fn strip_comment(line: &str) -> &str {
    let mut in_quotes = false;
    for (i, ch) in line.char_indices() {
        match ch {
            '"' => in_quotes = !in_quotes,
            '#' if !in_quotes => return &line[..i],
            _ => {}
        }
    }
    line
}

fn unquote(raw: &str) -> String {
    let t = raw.trim();
    if t.len() >= 2 && t.starts_with('"') && t.ends_with('"') {
        t[1..t.len() - 1].to_string()
    } else {
        t.to_string()
    }
}

struct RawEntry {
    line: usize,
    value: String,
}

/// Parse and validate a scenario file.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let mut entries: BTreeMap<String, RawEntry> = BTreeMap::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw_line).trim().to_string();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(Error::ConfigLine {
            line: line_no,
            msg: "expected `key = value`".into(),
        })?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(Error::ConfigLine {
                line: line_no,
                msg: "empty key".into(),
            });
        }
        if entries.contains_key(&key) {
            return Err(Error::ConfigLine {
                line: line_no,
                msg: format!("duplicate key `{key}`"),
            });
        }
        entries.insert(
            key,
            RawEntry {
                line: line_no,
                value: value.trim().to_string(),
            },
        );
    }

    const KNOWN: &[&str] = &[
        "physics.hbar",
        "physics.mass",
        "grid.half_width",
        "grid.points",
        "time.dt",
        "time.steps",
        "time.snapshot_every",
        "mu.kind",
        "mu.gamma",
        "mu.lambda",
        "mu.file",
        "potential.kind",
        "potential.omega",
        "potential.epsilon",
        "potential.file",
        "initial.kind",
        "initial.x0",
        "initial.k0",
        "initial.sigma",
        "initial.phi_mode",
        "assembly.form",
        "spectral.enabled",
        "spectral.k",
        "output.dir",
        "output.precision",
    ];
    for key in entries.keys() {
        if !KNOWN.contains(&key.as_str()) {
            return Err(Error::UnknownKey(key.clone()));
        }
    }
    for required in ["grid.half_width", "grid.points", "time.dt", "time.steps"] {
        if !entries.contains_key(required) {
            return Err(Error::MissingKey(required.to_string()));
        }
    }

    let f64_of = |entries: &BTreeMap<String, RawEntry>, key: &str| -> Result<Option<f64>> {
        match entries.get(key) {
            None => Ok(None),
            Some(e) => e.value.parse::<f64>().map(Some).map_err(|_| Error::ConfigLine {
                line: e.line,
                msg: format!("`{key}` expects a number, got `{}`", e.value),
            }),
        }
    };
    let usize_of = |entries: &BTreeMap<String, RawEntry>, key: &str| -> Result<Option<usize>> {
        match entries.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<usize>()
                .map(Some)
                .map_err(|_| Error::ConfigLine {
                    line: e.line,
                    msg: format!("`{key}` expects a non-negative integer, got `{}`", e.value),
                }),
        }
    };
    let bool_of = |entries: &BTreeMap<String, RawEntry>, key: &str| -> Result<Option<bool>> {
        match entries.get(key) {
            None => Ok(None),
            Some(e) => match unquote(&e.value).as_str() {
                "true" => Ok(Some(true)),
                "false" => Ok(Some(false)),
                other => Err(Error::ConfigLine {
                    line: e.line,
                    msg: format!("`{key}` expects true or false, got `{other}`"),
                }),
            },
        }
    };
    let string_of = |entries: &BTreeMap<String, RawEntry>, key: &str| -> Option<String> {
        entries.get(key).map(|e| unquote(&e.value))
    };

    let defaults = ScenarioConfig::default();
    let config = ScenarioConfig {
        physics: PhysicsSection {
            hbar: f64_of(&entries, "physics.hbar")?.unwrap_or(defaults.physics.hbar),
            mass: f64_of(&entries, "physics.mass")?.unwrap_or(defaults.physics.mass),
        },
        grid: GridSection {
            half_width: f64_of(&entries, "grid.half_width")?.unwrap(),
            points: usize_of(&entries, "grid.points")?.unwrap(),
        },
        time: TimeSection {
            dt: f64_of(&entries, "time.dt")?.unwrap(),
            steps: usize_of(&entries, "time.steps")?.unwrap(),
            snapshot_every: usize_of(&entries, "time.snapshot_every")?
                .unwrap_or(defaults.time.snapshot_every),
        },
        mu: MuSection {
            kind: string_of(&entries, "mu.kind").unwrap_or_else(|| defaults.mu.kind.clone()),
            gamma: f64_of(&entries, "mu.gamma")?,
            lambda: f64_of(&entries, "mu.lambda")?,
            file: string_of(&entries, "mu.file"),
        },
        potential: PotentialSection {
            kind: string_of(&entries, "potential.kind")
                .unwrap_or_else(|| defaults.potential.kind.clone()),
            omega: f64_of(&entries, "potential.omega")?,
            epsilon: f64_of(&entries, "potential.epsilon")?,
            file: string_of(&entries, "potential.file"),
        },
        initial: InitialSection {
            kind: string_of(&entries, "initial.kind")
                .unwrap_or_else(|| defaults.initial.kind.clone()),
            x0: f64_of(&entries, "initial.x0")?.unwrap_or(defaults.initial.x0),
            k0: f64_of(&entries, "initial.k0")?.unwrap_or(defaults.initial.k0),
            sigma: f64_of(&entries, "initial.sigma")?.unwrap_or(defaults.initial.sigma),
            phi_mode: string_of(&entries, "initial.phi_mode")
                .unwrap_or_else(|| defaults.initial.phi_mode.clone()),
        },
        assembly: AssemblySection {
            form: string_of(&entries, "assembly.form")
                .unwrap_or_else(|| defaults.assembly.form.clone()),
        },
        spectral: SpectralSection {
            enabled: bool_of(&entries, "spectral.enabled")?.unwrap_or(defaults.spectral.enabled),
            k: usize_of(&entries, "spectral.k")?.unwrap_or(defaults.spectral.k),
        },
        output: OutputSection {
            dir: string_of(&entries, "output.dir").unwrap_or_else(|| defaults.output.dir.clone()),
            precision: usize_of(&entries, "output.precision")?
                .unwrap_or(defaults.output.precision),
        },
    };
    validate(&config)?;
    Ok(config)
}

fn validate(config: &ScenarioConfig) -> Result<()> {
    if !(config.physics.hbar > 0.0) || !(config.physics.mass > 0.0) {
        return Err(Error::config("physics.hbar and physics.mass must be positive"));
    }
    if !(config.time.dt > 0.0) {
        return Err(Error::config(format!(
            "time.dt must be positive, got {}",
            config.time.dt
        )));
    }
    if config.time.snapshot_every == 0 {
        return Err(Error::config("time.snapshot_every must be at least 1"));
    }
    match config.mu.kind.as_str() {
        "zero" => {}
        "quadratic_real" => {
            if config.mu.gamma.is_none() {
                return Err(Error::MissingParameter {
                    kind: "quadratic_real".into(),
                    param: "mu.gamma".into(),
                });
            }
        }
        "linear_imag" => {
            if config.mu.lambda.is_none() {
                return Err(Error::MissingParameter {
                    kind: "linear_imag".into(),
                    param: "mu.lambda".into(),
                });
            }
        }
        "table" => {
            if config.mu.file.is_none() {
                return Err(Error::MissingParameter {
                    kind: "table".into(),
                    param: "mu.file".into(),
                });
            }
        }
        other => {
            return Err(Error::config(format!(
                "unknown mu.kind `{other}` (zero, quadratic_real, linear_imag, table)"
            )))
        }
    }
    match config.potential.kind.as_str() {
        "zero" => {}
        "harmonic" => {
            if config.potential.omega.is_none() {
                return Err(Error::MissingParameter {
                    kind: "harmonic".into(),
                    param: "potential.omega".into(),
                });
            }
        }
        "cubic_imag" => {
            if config.potential.epsilon.is_none() {
                return Err(Error::MissingParameter {
                    kind: "cubic_imag".into(),
                    param: "potential.epsilon".into(),
                });
            }
        }
        "table" => {
            if config.potential.file.is_none() {
                return Err(Error::MissingParameter {
                    kind: "table".into(),
                    param: "potential.file".into(),
                });
            }
        }
        other => {
            return Err(Error::config(format!(
                "unknown potential.kind `{other}` (zero, harmonic, cubic_imag, table)"
            )))
        }
    }
    if config.initial.kind != "gaussian" {
        return Err(Error::config(format!(
            "unknown initial.kind `{}` (only gaussian is built in)",
            config.initial.kind
        )));
    }
    if !(config.initial.sigma > 0.0) {
        return Err(Error::config("initial.sigma must be positive"));
    }
    config.initial.phi_mode.parse::<crate::fields::PhiMode>()?;
    config.assembly.form.parse::<crate::operators::AssemblyForm>()?;
    if config.spectral.k == 0 {
        return Err(Error::config("spectral.k must be at least 1"));
    }
    if config.output.precision == 0 || config.output.precision > 17 {
        return Err(Error::config(format!(
            "output.precision must lie in 1..=17, got {}",
            config.output.precision
        )));
    }
    Ok(())
}

/// Canonical text form; `parse_config(serialize_config(c))` reproduces `c`.
pub fn serialize_config(config: &ScenarioConfig) -> String {
    let mut out = String::new();
    let mut push = |key: &str, value: String| {
        out.push_str(key);
        out.push_str(" = ");
        out.push_str(&value);
        out.push('\n');
    };
    let quoted = |s: &str| format!("\"{s}\"");
    push("physics.hbar", format!("{:?}", config.physics.hbar));
    push("physics.mass", format!("{:?}", config.physics.mass));
    push("grid.half_width", format!("{:?}", config.grid.half_width));
    push("grid.points", config.grid.points.to_string());
    push("time.dt", format!("{:?}", config.time.dt));
    push("time.steps", config.time.steps.to_string());
    push(
        "time.snapshot_every",
        config.time.snapshot_every.to_string(),
    );
    push("mu.kind", quoted(&config.mu.kind));
    if let Some(g) = config.mu.gamma {
        push("mu.gamma", format!("{g:?}"));
    }
    if let Some(l) = config.mu.lambda {
        push("mu.lambda", format!("{l:?}"));
    }
    if let Some(f) = &config.mu.file {
        push("mu.file", quoted(f));
    }
    push("potential.kind", quoted(&config.potential.kind));
    if let Some(w) = config.potential.omega {
        push("potential.omega", format!("{w:?}"));
    }
    if let Some(e) = config.potential.epsilon {
        push("potential.epsilon", format!("{e:?}"));
    }
    if let Some(f) = &config.potential.file {
        push("potential.file", quoted(f));
    }
    push("initial.kind", quoted(&config.initial.kind));
    push("initial.x0", format!("{:?}", config.initial.x0));
    push("initial.k0", format!("{:?}", config.initial.k0));
    push("initial.sigma", format!("{:?}", config.initial.sigma));
    push("initial.phi_mode", quoted(&config.initial.phi_mode));
    push("assembly.form", quoted(&config.assembly.form));
    push("spectral.enabled", config.spectral.enabled.to_string());
    push("spectral.k", config.spectral.k.to_string());
    push("output.dir", quoted(&config.output.dir));
    push("output.precision", config.output.precision.to_string());
    out
}

/// Read and parse a config file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::config(format!("cannot read config `{}`: {e}", path.display()))
    })?;
    parse_config(&text)
}
