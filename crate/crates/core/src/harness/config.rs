use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ConfigError, Mode};
use crate::criteria::{h0_coefficients, CriteriaError};
use crate::dynamics::{InitialData, ProblemSpec, SimConfig, SourceKind};
use crate::geometry::{Boundary, Domain, DomainKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainConfig {
    pub kind: DomainKind,
    pub extents: Vec<f64>,
    pub dimension: usize,
    pub center: Option<Vec<f64>>,
    pub resolution: usize,
}

impl DomainConfig {
    pub fn build(&self, resolution: usize) -> Result<Domain, ConfigError> {
        Domain::new(
            self.kind,
            &self.extents,
            self.dimension,
            self.center.as_deref(),
            resolution,
        )
        .map_err(|e| ConfigError::Hypothesis {
            hypothesis: "(H1) star-shaped domain".into(),
            detail: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    pub dir: PathBuf,
    pub trace: String,
    pub report: String,
}

/// Fully validated experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub domain: DomainConfig,
    pub problem: ProblemSpec,
    pub mode: Mode,
    pub sim: SimConfig,
    /// Resolutions for convergence runs, strictly increasing.
    pub ladder: Vec<usize>,
    pub seed: u64,
    pub delta: Option<f64>,
    /// Random fields per lemma in `check-lemmas`.
    pub lemma_samples: usize,
    pub output: OutputPaths,
}

const KNOWN_KEYS: &[&str] = &[
    "domain.kind",
    "domain.extents",
    "domain.dimension",
    "domain.center",
    "domain.resolution",
    "problem.m",
    "problem.p",
    "problem.q",
    "problem.k1",
    "problem.k2",
    "problem.h",
    "problem.boundary",
    "problem.source",
    "problem.u0",
    "problem.amplitude",
    "problem.u0_mass",
    "problem.u0_time",
    "run.mode",
    "run.t_end",
    "run.u_max",
    "run.cadence",
    "run.cfl",
    "run.growth",
    "run.window",
    "run.fixed_dt",
    "run.max_steps",
    "run.ladder",
    "run.seed",
    "run.delta",
    "run.lemma_samples",
    "output.dir",
    "output.trace",
    "output.report",
];

/// Splits `key = value` lines, with optional `[section]` headers prefixing
/// the keys that follow. `#` and `;` start comments.
fn tokenize(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    let mut section = String::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                line: n + 1,
                message: format!("unterminated section header `{line}`"),
            })?;
            section = name.trim().to_string();
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: n + 1,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let key = key.trim();
        let full = if section.is_empty() || key.contains('.') {
            key.to_string()
        } else {
            format!("{section}.{key}")
        };
        if !KNOWN_KEYS.contains(&full.as_str()) {
            return Err(ConfigError::UnknownKey(full));
        }
        if map.insert(full.clone(), value.trim().to_string()).is_some() {
            return Err(ConfigError::Syntax {
                line: n + 1,
                message: format!("duplicate key `{full}`"),
            });
        }
    }
    Ok(map)
}

struct Keys(BTreeMap<String, String>);

impl Keys {
    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>().map_err(|e| ConfigError::InvalidValue {
                    key: key.to_string(),
                    message: e.to_string(),
                })
            })
            .transpose()
    }

    fn required<T: FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.parse(key)?.ok_or_else(|| ConfigError::MissingKey(key.to_string()))
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(|x| {
                        x.trim().parse::<f64>().map_err(|e| ConfigError::InvalidValue {
                            key: key.to_string(),
                            message: e.to_string(),
                        })
                    })
                    .collect()
            })
            .transpose()
    }
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue {
        key: key.to_string(),
        message: message.into(),
    }
}

fn hypothesis(name: &str, detail: impl Into<String>) -> ConfigError {
    ConfigError::Hypothesis {
        hypothesis: name.to_string(),
        detail: detail.into(),
    }
}

/// Parses and validates a configuration, naming the violated hypothesis on
/// failure.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let keys = Keys(tokenize(text)?);

    let kind: DomainKind = keys.required("domain.kind")?;
    let extents = keys
        .list("domain.extents")?
        .ok_or_else(|| ConfigError::MissingKey("domain.extents".into()))?;
    let dimension = match keys.parse::<usize>("domain.dimension")? {
        Some(d) => d,
        None if kind == DomainKind::Interval => 1,
        None if extents.len() > 1 => extents.len(),
        None => return Err(ConfigError::MissingKey("domain.dimension".into())),
    };
    let domain = DomainConfig {
        kind,
        extents,
        dimension,
        center: keys.list("domain.center")?,
        resolution: keys.parse("domain.resolution")?.unwrap_or(101),
    };

    let boundary = match keys.raw("problem.boundary").unwrap_or("robin") {
        "robin" => Boundary::Robin {
            h: keys.required("problem.h")?,
        },
        "dirichlet" => {
            if keys.raw("problem.h").is_some() {
                return Err(invalid("problem.h", "h is only meaningful with a Robin boundary"));
            }
            Boundary::Dirichlet
        }
        other => return Err(invalid("problem.boundary", format!("expected robin or dirichlet, got `{other}`"))),
    };
    let source: SourceKind = keys
        .parse("problem.source")?
        .unwrap_or(SourceKind::PowerAbsorption);
    let amplitude: f64 = keys.parse("problem.amplitude")?.unwrap_or(1.0);
    let profile = keys.raw("problem.u0").unwrap_or("eigenfunction");
    if profile != "barenblatt" && (keys.raw("problem.u0_mass").is_some() || keys.raw("problem.u0_time").is_some()) {
        return Err(invalid("problem.u0_mass", "mass and time apply to the barenblatt profile only"));
    }
    let initial = match profile {
        "eigenfunction" => InitialData::Eigenfunction { amplitude },
        "bump" => InitialData::Bump { amplitude },
        "sine" => InitialData::Sine { amplitude },
        "constant" => InitialData::Constant { value: amplitude },
        "barenblatt" => InitialData::Barenblatt {
            mass: keys.parse("problem.u0_mass")?.unwrap_or(1.0),
            time: keys.parse("problem.u0_time")?.unwrap_or(0.1),
        },
        other => return Err(invalid("problem.u0", format!("unknown profile `{other}`"))),
    };
    let problem = ProblemSpec {
        m: keys.required("problem.m")?,
        p: keys.parse("problem.p")?.unwrap_or(1.0),
        q: keys.parse("problem.q")?.unwrap_or(1.0),
        k1: keys.parse("problem.k1")?.unwrap_or(1.0),
        k2: keys.parse("problem.k2")?.unwrap_or(1.0),
        boundary,
        source,
        initial,
    };

    let defaults = SimConfig::default();
    let sim = SimConfig {
        t_end: keys.parse("run.t_end")?.unwrap_or(defaults.t_end),
        u_max: keys.parse("run.u_max")?.unwrap_or(defaults.u_max),
        window: keys.parse("run.window")?.unwrap_or(defaults.window),
        cadence: keys.parse("run.cadence")?.unwrap_or(defaults.cadence),
        cfl: keys.parse("run.cfl")?.unwrap_or(defaults.cfl),
        growth: keys.parse("run.growth")?.unwrap_or(defaults.growth),
        fixed_dt: keys.parse("run.fixed_dt")?,
        max_steps: keys.parse("run.max_steps")?.unwrap_or(defaults.max_steps),
    };
    let ladder = match keys.raw("run.ladder") {
        Some(v) => v
            .split(',')
            .map(|x| x.trim().parse::<usize>().map_err(|e| invalid("run.ladder", e.to_string())))
            .collect::<Result<Vec<_>, _>>()?,
        None => Vec::new(),
    };
    let config = RunConfig {
        domain,
        problem,
        mode: keys.parse("run.mode")?.unwrap_or(Mode::Simulate),
        sim,
        ladder,
        seed: keys.parse("run.seed")?.unwrap_or(0),
        delta: keys.parse("run.delta")?,
        lemma_samples: keys.parse("run.lemma_samples")?.unwrap_or(20),
        output: OutputPaths {
            dir: PathBuf::from(keys.raw("output.dir").unwrap_or("out")),
            trace: keys.raw("output.trace").unwrap_or("trace.csv").to_string(),
            report: keys.raw("output.report").unwrap_or("report.json").to_string(),
        },
    };
    validate(&config)?;
    Ok(config)
}

fn validate(config: &RunConfig) -> Result<(), ConfigError> {
    config.sim.validate().map_err(|e| invalid("run", e.to_string()))?;
    if config.ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("run.ladder", "resolutions must increase strictly"));
    }
    if config.lemma_samples == 0 {
        return Err(invalid("run.lemma_samples", "must be positive"));
    }
    let domain = config.domain.build(config.domain.resolution)?;
    let spec = &config.problem;
    spec.validate().map_err(|e| invalid("problem", e.to_string()))?;
    let (m, p, q) = (spec.m, spec.p, spec.q);
    match config.mode {
        Mode::Simulate => {}
        Mode::Theorem1 => {
            if !matches!(spec.boundary, Boundary::Robin { .. }) {
                return Err(hypothesis("theorem 1: Robin boundary (k = 1)", "boundary is Dirichlet"));
            }
            if spec.source != SourceKind::PowerAbsorption {
                return Err(hypothesis("theorem 1: g = k1 u^p - k2 u^q", "source is not power absorption"));
            }
            if !(q > 1.0) {
                return Err(hypothesis("theorem 1: m, q > 1", format!("q = {q}")));
            }
            if !(p >= m.max(q)) {
                return Err(hypothesis("theorem 1: p ≥ max{m,q}", format!("p = {p}, m = {m}, q = {q}")));
            }
        }
        Mode::Theorem2 => {
            if !matches!(spec.boundary, Boundary::Robin { .. }) {
                return Err(hypothesis("theorem 2: Robin boundary (k = 1)", "boundary is Dirichlet"));
            }
            if spec.source != SourceKind::PowerAbsorption {
                return Err(hypothesis("theorem 2: g = k1 u^p - k2 u^q", "source is not power absorption"));
            }
            if !(p < m) {
                return Err(hypothesis("theorem 2: p < m", format!("p = {p}, m = {m}")));
            }
            if !(spec.k1 > 0.0) {
                return Err(hypothesis("theorem 2: k1 > 0", format!("k1 = {}", spec.k1)));
            }
        }
        Mode::Theorem3 => {
            if domain.dimension() != 3 {
                return Err(hypothesis(
                    "theorem 3 / lemma 3: three-dimensional domain",
                    format!("dimension is {}", domain.dimension()),
                ));
            }
            if spec.boundary != Boundary::Dirichlet {
                return Err(hypothesis("theorem 3: Dirichlet boundary (k = 0)", "boundary is Robin"));
            }
            if spec.source != SourceKind::GradientAbsorption {
                return Err(hypothesis(
                    "theorem 3: g = k1 u^p - k2 |grad u|^q",
                    "source is not gradient absorption",
                ));
            }
            if !(spec.k1 > 0.0 && spec.k2 > 0.0) {
                return Err(hypothesis("theorem 3: k1, k2 > 0", format!("k1 = {}, k2 = {}", spec.k1, spec.k2)));
            }
            h0_coefficients(m, p, q, config.delta).map_err(|e| match e {
                CriteriaError::Regime(msg) => hypothesis("(H0) exponent regime", msg),
                other => hypothesis("(H0) coefficients", other.to_string()),
            })?;
        }
        Mode::Convergence => {
            if spec.source != SourceKind::None || !matches!(spec.initial, InitialData::Barenblatt { .. }) {
                return Err(invalid(
                    "run.mode",
                    "convergence runs need source = none and u0 = barenblatt",
                ));
            }
        }
    }
    spec.initial_field(&domain)
        .map_err(|e| hypothesis("initial data compatibility", e.to_string()))?;
    Ok(())
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    /// Canonical text form; `parse_config(&c.to_text())` reproduces `c`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        let d = &self.domain;
        line("domain.kind", d.kind.name().to_string());
        line("domain.extents", join(&d.extents));
        line("domain.dimension", d.dimension.to_string());
        if let Some(c) = &d.center {
            line("domain.center", join(c));
        }
        line("domain.resolution", d.resolution.to_string());
        let p = &self.problem;
        line("problem.m", p.m.to_string());
        line("problem.p", p.p.to_string());
        line("problem.q", p.q.to_string());
        line("problem.k1", p.k1.to_string());
        line("problem.k2", p.k2.to_string());
        match p.boundary {
            Boundary::Robin { h } => {
                line("problem.boundary", "robin".into());
                line("problem.h", h.to_string());
            }
            Boundary::Dirichlet => line("problem.boundary", "dirichlet".into()),
        }
        line("problem.source", p.source.name().to_string());
        line("problem.u0", p.initial.name().to_string());
        match &p.initial {
            InitialData::Eigenfunction { amplitude }
            | InitialData::Bump { amplitude }
            | InitialData::Sine { amplitude }
            | InitialData::Constant { value: amplitude } => line("problem.amplitude", amplitude.to_string()),
            InitialData::Barenblatt { mass, time } => {
                line("problem.u0_mass", mass.to_string());
                line("problem.u0_time", time.to_string());
            }
            InitialData::Gridded { .. } => {}
        }
        let s = &self.sim;
        line("run.mode", self.mode.name().to_string());
        line("run.t_end", s.t_end.to_string());
        line("run.u_max", s.u_max.to_string());
        line("run.cadence", s.cadence.to_string());
        line("run.cfl", s.cfl.to_string());
        line("run.growth", s.growth.to_string());
        line("run.window", s.window.to_string());
        if let Some(dt) = s.fixed_dt {
            line("run.fixed_dt", dt.to_string());
        }
        line("run.max_steps", s.max_steps.to_string());
        if !self.ladder.is_empty() {
            line(
                "run.ladder",
                self.ladder.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(", "),
            );
        }
        line("run.seed", self.seed.to_string());
        if let Some(delta) = self.delta {
            line("run.delta", delta.to_string());
        }
        line("run.lemma_samples", self.lemma_samples.to_string());
        line("output.dir", self.output.dir.display().to_string());
        line("output.trace", self.output.trace.clone());
        line("output.report", self.output.report.clone());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "
        [domain]
        kind = interval
        extents = 1
        [problem]
        m = 2
        h = 1
    ";

    #[test]
    fn minimal_config_fills_defaults_and_round_trips() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.domain.resolution, 101);
        assert_eq!(c.sim.u_max, 1e8);
        assert_eq!(c.sim.window, 20);
        assert_eq!(c.mode, Mode::Simulate);
        let again = parse_config(&c.to_text()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.to_text(), again.to_text());
    }

    #[test]
    fn dotted_keys_are_equivalent_to_sections() {
        let dotted = "domain.kind = interval\ndomain.extents = 1\nproblem.m = 2\nproblem.h = 1\n";
        assert_eq!(parse_config(dotted).unwrap(), parse_config(MINIMAL).unwrap());
    }

    #[test]
    fn key_errors() {
        assert!(matches!(
            parse_config(&format!("{MINIMAL}\nbogus = 3")),
            Err(ConfigError::UnknownKey(k)) if k == "problem.bogus"
        ));
        assert!(matches!(
            parse_config("domain.kind = interval\nproblem.m = 2\nproblem.h = 1"),
            Err(ConfigError::MissingKey(k)) if k == "domain.extents"
        ));
        assert!(matches!(
            parse_config(&format!("{MINIMAL}\n[run]\nladder = 40, 20")),
            Err(ConfigError::InvalidValue { .. })
        ));
        assert!(matches!(parse_config("domain.kind interval"), Err(ConfigError::Syntax { line: 1, .. })));
    }

    #[test]
    fn hypothesis_violations_are_named() {
        let t1 = "domain.kind = interval\ndomain.extents = 1\nproblem.m = 2\nproblem.p = 2\nproblem.q = 3\nproblem.h = 1\nrun.mode = theorem1\n";
        match parse_config(t1) {
            Err(ConfigError::Hypothesis { hypothesis, .. }) => assert!(hypothesis.contains("p ≥ max{m,q}")),
            other => panic!("{other:?}"),
        }
        let t3 = "domain.kind = box\ndomain.extents = 1, 1\nproblem.m = 2.5\nproblem.p = 3\nproblem.q = 2\n\
                  problem.boundary = dirichlet\nproblem.source = gradient_absorption\nproblem.u0 = bump\nrun.mode = theorem3\n";
        match parse_config(t3) {
            Err(ConfigError::Hypothesis { hypothesis, .. }) => assert!(hypothesis.contains("three-dimensional")),
            other => panic!("{other:?}"),
        }
        let t3_regime = t3.replace("extents = 1, 1", "extents = 1, 1, 1").replace("problem.q = 2", "problem.q = 3");
        match parse_config(&t3_regime) {
            Err(ConfigError::Hypothesis { hypothesis, .. }) => assert!(hypothesis.contains("(H0)")),
            other => panic!("{other:?}"),
        }
        let t2 = "domain.kind = interval\ndomain.extents = 1\nproblem.m = 2\nproblem.p = 3\nproblem.h = 1\nrun.mode = theorem2\n";
        match parse_config(t2) {
            Err(ConfigError::Hypothesis { hypothesis, .. }) => assert!(hypothesis.contains("p < m")),
            other => panic!("{other:?}"),
        }
        let off_center = "domain.kind = interval\ndomain.extents = 1\ndomain.center = 1\nproblem.m = 2\nproblem.h = 1\n";
        match parse_config(off_center) {
            Err(ConfigError::Hypothesis { hypothesis, .. }) => assert!(hypothesis.contains("(H1)")),
            other => panic!("{other:?}"),
        }
        let constant_dirichlet = "domain.kind = interval\ndomain.extents = 1\nproblem.m = 2\nproblem.boundary = dirichlet\nproblem.u0 = constant\n";
        assert!(matches!(parse_config(constant_dirichlet), Err(ConfigError::Hypothesis { .. })));
    }
}
