//! JSON files for POMDPs, policies and start distributions.
//!
//! * POMDP: an object with `n_world`, `n_sensor`, `n_action`, `alpha`
//!   (`[w][a][w']`), `beta` (`[w][s]`) and `reward` (`[w][a]`).
//! * Policy: an array of rows, `[s][a]`.
//! * Distribution: a flat array of probabilities.
//!
//! Indices are 0-based everywhere.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pomdp::{Distribution, Policy, Pomdp, RawPomdp};
use crate::scalar::Scalar;

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn parse<V: DeserializeOwned>(text: &str, what: &'static str) -> Result<V> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        what,
        message: e.to_string(),
    })
}

pub fn parse_pomdp<T: Scalar>(text: &str) -> Result<Pomdp<T>> {
    parse::<RawPomdp<T>>(text, "POMDP file")?.validate()
}

pub fn parse_policy<T: Scalar>(text: &str) -> Result<Policy<T>> {
    Policy::from_rows(&parse::<Vec<Vec<T>>>(text, "policy file")?)
}

pub fn parse_distribution<T: Scalar>(text: &str) -> Result<Distribution<T>> {
    Distribution::new(parse::<Vec<T>>(text, "distribution file")?)
}

pub fn read_pomdp<T: Scalar>(path: impl AsRef<Path>) -> Result<Pomdp<T>> {
    parse_pomdp(&read_text(path.as_ref())?)
}

pub fn read_policy<T: Scalar>(path: impl AsRef<Path>) -> Result<Policy<T>> {
    parse_policy(&read_text(path.as_ref())?)
}

pub fn read_distribution<T: Scalar>(path: impl AsRef<Path>) -> Result<Distribution<T>> {
    parse_distribution(&read_text(path.as_ref())?)
}

/// Pretty-printed JSON followed by a newline.
pub fn to_json<V: Serialize + ?Sized>(value: &V) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

pub fn pomdp_to_json<T: Scalar>(p: &Pomdp<T>) -> String {
    to_json(&p.to_raw())
}

pub fn policy_to_json<T: Scalar>(pi: &Policy<T>) -> String {
    to_json(&pi.to_rows())
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn write_pomdp<T: Scalar>(path: impl AsRef<Path>, p: &Pomdp<T>) -> Result<()> {
    write_text(path, &pomdp_to_json(p))
}

pub fn write_policy<T: Scalar>(path: impl AsRef<Path>, pi: &Policy<T>) -> Result<()> {
    write_text(path, &policy_to_json(pi))
}
