//! Line-oriented model file format.
//!
//! ```text
//! # comment
//! [global]
//! d = 0.015
//! p = 5
//! y_c = 60
//! T = 0.17          # optional default delay
//!
//! [neuron 1]
//! K = 1500
//! mu = 18
//! alpha_sink = 0    # optional, defaults to 0
//!
//! [edge 1 -> 2]
//! alpha = 0.9
//! kappa = 0.1
//! ```
//!
//! Neurons are numbered `1..n` without gaps; section order is free.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use crate::error::ModelError;
use crate::model::{Edge, HillResponse, NetworkModel, NeuronParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("invalid number '{0}'")]
    InvalidNumber(String),
    #[error("unknown key '{key}' in [{section}]")]
    UnknownKey { section: String, key: String },
    #[error("duplicate key '{0}'")]
    DuplicateKey(String),
    #[error("duplicate section [{0}]")]
    DuplicateSection(String),
    #[error("missing key '{key}' in [{section}]")]
    MissingKey { section: String, key: String },
    #[error("missing [global] section")]
    MissingGlobal,
    #[error("neuron ids are not contiguous from 1 (found {0})")]
    NonContiguous(usize),
    #[error("edge refers to unknown neuron {0}")]
    UnknownNeuron(usize),
    #[error("self-edge on neuron {0}")]
    SelfEdge(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A parse failure at a 1-based line (0 when not tied to a line).
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.kind)
        } else {
            write!(f, "line {}: {}", self.line, self.kind)
        }
    }
}

fn err(line: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, kind }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum SectionId {
    Global,
    Neuron(usize),
    Edge(usize, usize),
}

impl SectionId {
    fn name(&self) -> String {
        match self {
            SectionId::Global => "global".into(),
            SectionId::Neuron(i) => format!("neuron {i}"),
            SectionId::Edge(a, b) => format!("edge {a} -> {b}"),
        }
    }

    fn keys(&self) -> &'static [&'static str] {
        match self {
            SectionId::Global => &["d", "p", "y_c", "T"],
            SectionId::Neuron(_) => &["K", "mu", "T", "alpha_sink"],
            SectionId::Edge(..) => &["alpha", "kappa"],
        }
    }
}

#[derive(Debug, Default)]
struct Section {
    line: usize,
    values: BTreeMap<String, f64>,
}

impl Section {
    fn required(&self, id: SectionId, key: &str) -> Result<f64, ParseError> {
        self.values.get(key).copied().ok_or_else(|| {
            err(
                self.line,
                ParseErrorKind::MissingKey {
                    section: id.name(),
                    key: key.into(),
                },
            )
        })
    }
}

fn regexes() -> &'static [Regex; 4] {
    static RE: OnceLock<[Regex; 4]> = OnceLock::new();
    RE.get_or_init(|| {
        [
            Regex::new(r"^neuron\s+(\d+)$").unwrap(),
            Regex::new(r"^edge\s+(\d+)\s*->\s*(\d+)$").unwrap(),
            Regex::new(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(\S+)$").unwrap(),
            Regex::new(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$").unwrap(),
        ]
    })
}

fn parse_index(text: &str, line: usize) -> Result<usize, ParseError> {
    text.parse()
        .map_err(|_| err(line, ParseErrorKind::Syntax(format!("bad index '{text}'"))))
}

pub fn parse_model(text: &str) -> Result<NetworkModel, ParseError> {
    let [neuron_re, edge_re, entry_re, number_re] = regexes();
    let mut sections: BTreeMap<SectionId, Section> = BTreeMap::new();
    let mut current: Option<SectionId> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(inner) = content.strip_prefix('[') {
            let inner = inner
                .strip_suffix(']')
                .ok_or_else(|| {
                    err(
                        line,
                        ParseErrorKind::Syntax("unterminated section header".into()),
                    )
                })?
                .trim();
            let id = if inner == "global" {
                SectionId::Global
            } else if let Some(c) = neuron_re.captures(inner) {
                SectionId::Neuron(parse_index(&c[1], line)?)
            } else if let Some(c) = edge_re.captures(inner) {
                let (a, b) = (parse_index(&c[1], line)?, parse_index(&c[2], line)?);
                if a == b {
                    return Err(err(line, ParseErrorKind::SelfEdge(a)));
                }
                SectionId::Edge(a, b)
            } else {
                return Err(err(
                    line,
                    ParseErrorKind::Syntax(format!("unknown section header [{inner}]")),
                ));
            };
            if sections.contains_key(&id) {
                return Err(err(line, ParseErrorKind::DuplicateSection(id.name())));
            }
            sections.insert(
                id,
                Section {
                    line,
                    ..Default::default()
                },
            );
            current = Some(id);
            continue;
        }

        let caps = entry_re.captures(content).ok_or_else(|| {
            err(
                line,
                ParseErrorKind::Syntax(format!("expected 'key = value', got '{content}'")),
            )
        })?;
        let id = current.ok_or_else(|| {
            err(
                line,
                ParseErrorKind::Syntax("entry outside of a section".into()),
            )
        })?;
        let key = &caps[1];
        if !id.keys().contains(&key) {
            return Err(err(
                line,
                ParseErrorKind::UnknownKey {
                    section: id.name(),
                    key: key.into(),
                },
            ));
        }
        let literal = &caps[2];
        if !number_re.is_match(literal) {
            return Err(err(line, ParseErrorKind::InvalidNumber(literal.into())));
        }
        let value: f64 = literal
            .parse()
            .map_err(|_| err(line, ParseErrorKind::InvalidNumber(literal.into())))?;
        let section = sections.get_mut(&id).expect("current section exists");
        if section.values.insert(key.into(), value).is_some() {
            return Err(err(line, ParseErrorKind::DuplicateKey(key.into())));
        }
    }

    let global = sections
        .get(&SectionId::Global)
        .ok_or_else(|| err(0, ParseErrorKind::MissingGlobal))?;
    let d = global.required(SectionId::Global, "d")?;
    let p = global.required(SectionId::Global, "p")?;
    let y_c = global.required(SectionId::Global, "y_c")?;
    let default_delay = global.values.get("T").copied();

    let mut neurons = Vec::new();
    for (id, section) in sections.range(SectionId::Neuron(0)..SectionId::Neuron(usize::MAX)) {
        let SectionId::Neuron(index) = *id else {
            unreachable!()
        };
        if index != neurons.len() + 1 {
            return Err(err(section.line, ParseErrorKind::NonContiguous(index)));
        }
        let delay = match section.values.get("T").copied().or(default_delay) {
            Some(t) => t,
            None => section.required(*id, "T")?,
        };
        neurons.push(NeuronParams::new(
            section.required(*id, "K")?,
            section.required(*id, "mu")?,
            delay,
            section.values.get("alpha_sink").copied().unwrap_or(0.0),
        ));
    }
    let n = neurons.len();

    let mut edges = Vec::new();
    for (id, section) in &sections {
        let SectionId::Edge(a, b) = *id else { continue };
        for endpoint in [a, b] {
            if endpoint == 0 || endpoint > n {
                return Err(err(section.line, ParseErrorKind::UnknownNeuron(endpoint)));
            }
        }
        edges.push((
            section.line,
            Edge::new(
                a - 1,
                b - 1,
                section.required(*id, "alpha")?,
                section.required(*id, "kappa")?,
            ),
        ));
    }
    // keep file order so emit/parse round-trips preserve edge positions
    edges.sort_by_key(|(line, _)| *line);
    let edges = edges.into_iter().map(|(_, e)| e).collect();

    NetworkModel::new(neurons, edges, d, HillResponse::new(p, y_c)).map_err(|e| err(0, e.into()))
}

/// Canonical text for a model. Numbers use the shortest representation
/// that parses back to the same value.
pub fn emit_model(model: &NetworkModel) -> String {
    let mut out = String::new();
    let hill = model.feedback();
    let _ = writeln!(out, "[global]");
    let _ = writeln!(out, "d = {:?}", model.interaction());
    let _ = writeln!(out, "p = {:?}", hill.exponent);
    let _ = writeln!(out, "y_c = {:?}", hill.threshold);
    for (i, p) in model.neurons().iter().enumerate() {
        let _ = writeln!(out, "\n[neuron {}]", i + 1);
        let _ = writeln!(out, "K = {:?}", p.production);
        let _ = writeln!(out, "mu = {:?}", p.degradation);
        let _ = writeln!(out, "T = {:?}", p.delay);
        let _ = writeln!(out, "alpha_sink = {:?}", p.alpha_sink);
    }
    for e in model.edges() {
        let _ = writeln!(out, "\n[edge {} -> {}]", e.from + 1, e.to + 1);
        let _ = writeln!(out, "alpha = {:?}", e.alpha);
        let _ = writeln!(out, "kappa = {:?}", e.kappa);
    }
    out
}
