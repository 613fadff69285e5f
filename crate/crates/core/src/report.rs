//! Structured result records shared by every verifier, demo and experiment.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub x: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub y: Option<String>,
    pub c_values: BTreeMap<String, Value>,
}

impl Witness {
    pub fn new(x: Option<String>, y: Option<String>) -> Self {
        Self {
            x,
            y,
            c_values: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.c_values.insert(key.to_string(), value.into());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub pass: bool,
    pub lhs: Value,
    pub rhs: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub demo: String,
    pub params: BTreeMap<String, Value>,
    pub witnesses: Vec<Witness>,
    /// Keys are decimal integers (deficiencies, deviations, sizes).
    pub histogram: BTreeMap<String, u64>,
    pub assertions: Vec<Assertion>,
    #[serde(default)]
    pub metrics: BTreeMap<String, Value>,
    /// The command configuration that produced this report, when run via the CLI.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config: Option<Value>,
    /// Seconds since the Unix epoch; the only field allowed to differ between reruns.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timestamp: Option<u64>,
}

impl Report {
    pub fn new(demo: &str) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            demo: demo.to_string(),
            params: BTreeMap::new(),
            witnesses: Vec::new(),
            histogram: BTreeMap::new(),
            assertions: Vec::new(),
            metrics: BTreeMap::new(),
            config: None,
            timestamp: None,
        }
    }

    pub fn param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn metric(&mut self, key: &str, value: impl Into<Value>) {
        self.metrics.insert(key.to_string(), value.into());
    }

    pub fn assert(&mut self, name: &str, pass: bool, lhs: impl Into<Value>, rhs: impl Into<Value>) {
        self.assertions.push(Assertion {
            name: name.to_string(),
            pass,
            lhs: lhs.into(),
            rhs: rhs.into(),
        });
    }

    pub fn histogram_from<K: ToString>(&mut self, counts: impl IntoIterator<Item = (K, u64)>) {
        for (k, c) in counts {
            *self.histogram.entry(k.to_string()).or_default() += c;
        }
    }

    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }

    /// Deterministic JSON (map keys are ordered).
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }
}
