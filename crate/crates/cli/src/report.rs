//! Command reports: a human summary and a machine-readable JSON block.

use serde_json::{Map, Value};

use crate::canon::{num, to_canonical_string};
use crate::statefile::InputDigest;

#[derive(Debug, Clone, Default)]
pub struct Report {
    command: Vec<String>,
    inputs: Vec<InputDigest>,
    tolerances: Vec<(String, f64)>,
    result: Map<String, Value>,
    lines: Vec<String>,
}

impl Report {
    pub fn new(command: &[String]) -> Self {
        Self {
            command: command.to_vec(),
            ..Self::default()
        }
    }

    pub fn input(&mut self, digest: InputDigest) {
        self.inputs.push(digest);
    }

    pub fn tolerance(&mut self, name: &str, value: f64) {
        self.tolerances.push((name.to_string(), value));
    }

    pub fn field(&mut self, key: &str, value: impl Into<Value>) {
        self.result.insert(key.to_string(), value.into());
    }

    pub fn number(&mut self, key: &str, value: f64) {
        self.result.insert(key.to_string(), num(value));
    }

    pub fn line(&mut self, text: impl Into<String>) {
        self.lines.push(text.into());
    }

    pub fn machine(&self) -> Value {
        let inputs: Vec<Value> = self
            .inputs
            .iter()
            .map(|d| serde_json::json!({ "path": d.path, "sha256": d.sha256 }))
            .collect();
        let tolerances: Map<String, Value> = self.tolerances.iter().map(|(k, v)| (k.clone(), num(*v))).collect();
        serde_json::json!({
            "command": self.command,
            "inputs": inputs,
            "tolerances": tolerances,
            "result": Value::Object(self.result.clone()),
        })
    }

    pub fn human(&self) -> String {
        let mut out = format!("command: qmarginal {}\n", self.command.join(" "));
        for d in &self.inputs {
            out.push_str(&format!("input: {} sha256:{}\n", d.path, d.sha256));
        }
        if !self.tolerances.is_empty() {
            let tols: Vec<String> = self.tolerances.iter().map(|(k, v)| format!("{k}={v:e}")).collect();
            out.push_str(&format!("tolerances: {}\n", tols.join(" ")));
        }
        for l in &self.lines {
            out.push_str(l);
            out.push('\n');
        }
        out
    }

    pub fn render(&self, json: bool) -> String {
        if json {
            to_canonical_string(&self.machine())
        } else {
            self.human()
        }
    }
}
