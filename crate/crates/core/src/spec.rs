//! `name:key=value,key=value` strings used for kernels, observables and
//! families on the command line.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

#[derive(Debug, Default)]
pub struct Params {
    values: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

pub fn split_spec(input: &str) -> Result<(&str, Params)> {
    let s = input.trim();
    let (name, rest) = s.split_once(':').unwrap_or((s, ""));
    let mut values = BTreeMap::new();
    for pair in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::parse(input, format!("expected key=value, got {pair:?}")))?;
        if values.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(Error::parse(input, format!("duplicate key {:?}", k.trim())));
        }
    }
    Ok((
        name.trim(),
        Params {
            values,
            used: RefCell::default(),
        },
    ))
}

impl Params {
    pub fn raw(&self, key: &str) -> Option<&str> {
        self.used.borrow_mut().insert(key.to_string());
        self.values.get(key).map(String::as_str)
    }

    pub fn float(&self, key: &str) -> Result<Option<f64>> {
        self.raw(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::parse(v, format!("{key} must be a number")))
            })
            .transpose()
    }

    pub fn float_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.float(key)?.unwrap_or(default))
    }

    pub fn require_float(&self, key: &str) -> Result<f64> {
        self.float(key)?
            .ok_or_else(|| Error::parse(key, format!("missing parameter {key}")))
    }

    pub fn uint(&self, key: &str) -> Result<Option<u64>> {
        self.raw(key)
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|_| Error::parse(v, format!("{key} must be a natural number")))
            })
            .transpose()
    }

    pub fn uint_or(&self, key: &str, default: u64) -> Result<u64> {
        Ok(self.uint(key)?.unwrap_or(default))
    }

    /// Rejects keys that no getter asked for.
    pub fn finish(&self, input: &str) -> Result<()> {
        let used = self.used.borrow();
        match self.values.keys().find(|k| !used.contains(*k)) {
            Some(k) => Err(Error::parse(input, format!("unknown parameter {k:?}"))),
            None => Ok(()),
        }
    }
}
