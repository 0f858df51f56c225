use std::fmt;

use indexmap::IndexMap;

use super::compile::{ModelGraph, ProgramParams};
use super::domain::argmax;
use crate::error::{Error, Result};

/// A discrete program: one value per param, in declaration order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ProgramListing {
    values: IndexMap<String, usize>,
}

impl ProgramListing {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, name: impl Into<String>, value: usize) {
        self.values.insert(name.into(), value);
    }

    pub fn with(mut self, name: impl Into<String>, value: usize) -> Self {
        self.set(name, value);
        self
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.values.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.values.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Parse the `name = value` form written by `Display`. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = ProgramListing::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Listing(format!("line {}: expected `name = value`", i + 1)))?;
            let value = value
                .trim()
                .parse()
                .map_err(|_| Error::Listing(format!("line {}: `{}` is not a value", i + 1, value.trim())))?;
            out.set(name.trim(), value);
        }
        Ok(out)
    }
}

impl fmt::Display for ProgramListing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.values {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

/// Argmax of every param's logits, ties toward the smallest value.
pub fn discretize(graph: &ModelGraph, params: &ProgramParams) -> ProgramListing {
    let mut out = ProgramListing::new();
    for (decl, logits) in graph.model().params().iter().zip(params.logits()) {
        out.set(decl.name.clone(), argmax(logits.data()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terpret::{compile, IntDomain, Model};
    use ntpt_engine::Tensor;

    #[test]
    fn argmax_and_ties() {
        let mut m = Model::new("t");
        m.param("a", IntDomain::new(3).unwrap());
        m.param("b", IntDomain::new(2).unwrap());
        let g = compile(m).unwrap();
        let p = ProgramParams::from_parts(
            &g,
            vec![Tensor::row(&[2.0, -1.0, 0.0]), Tensor::row(&[0.0, 0.0])],
        )
        .unwrap();
        let l = discretize(&g, &p);
        assert_eq!(l.get("a"), Some(0));
        assert_eq!(l.get("b"), Some(0));
    }

    #[test]
    fn text_round_trip() {
        let l = ProgramListing::new().with("instr_0", 3).with("goto_1", 0);
        let back = ProgramListing::parse(&l.to_string()).unwrap();
        assert_eq!(back, l);
        assert!(ProgramListing::parse("x 3").is_err());
        assert!(ProgramListing::parse("x = -1").is_err());
    }
}
