//! JSON persistence of problem instances.
//!
//! Matrices are stored row-major. Numbers are written in shortest
//! round-trip form, so a save/load cycle reproduces every bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::{Map, Value};

use super::{GroundTruth, NoiseModel, ProblemInstance, SensingOperator};
use crate::error::{Result, SenseError};

#[derive(Serialize)]
struct NoiseModelFile {
    kind: &'static str,
    sigma: f64,
}

#[derive(Serialize)]
struct InstanceFile {
    n: usize,
    m: usize,
    r: usize,
    r_star: usize,
    seed: u64,
    noise_model: NoiseModelFile,
    sensing: Vec<Vec<f64>>,
    m_star: Vec<f64>,
    noise: Vec<f64>,
    measurements: Vec<f64>,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

fn from_row_major(n: usize, data: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, data)
}

pub fn instance_to_json(inst: &ProblemInstance) -> String {
    let file = InstanceFile {
        n: inst.n(),
        m: inst.m(),
        r: inst.r(),
        r_star: inst.r_star(),
        seed: inst.seed(),
        noise_model: NoiseModelFile {
            kind: inst.noise_model().kind(),
            sigma: inst.noise_model().sigma(),
        },
        sensing: inst.operator().sensing().iter().map(row_major).collect(),
        m_star: row_major(inst.truth().m_star()),
        noise: inst.noise().as_slice().to_vec(),
        measurements: inst.measurements().as_slice().to_vec(),
    };
    serde_json::to_string(&file).expect("instance serialization cannot fail")
}

/// Writes the instance atomically (temporary file, then rename).
pub fn save_instance(inst: &ProblemInstance, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let tmp = path.with_extension("json.tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(instance_to_json(inst).as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<ProblemInstance> {
    let text = fs::read_to_string(path)?;
    instance_from_json(&text)
}

fn parse_err(field: &str, message: impl Into<String>) -> SenseError {
    SenseError::Parse {
        field: field.into(),
        message: message.into(),
    }
}

fn invalid(field: &str, message: impl Into<String>) -> SenseError {
    SenseError::Validation {
        field: field.into(),
        message: message.into(),
    }
}

fn field<'a>(obj: &'a Map<String, Value>, name: &str) -> Result<&'a Value> {
    obj.get(name).ok_or_else(|| invalid(name, "missing field"))
}

fn get_usize(obj: &Map<String, Value>, name: &str) -> Result<usize> {
    field(obj, name)?
        .as_u64()
        .map(|v| v as usize)
        .ok_or_else(|| parse_err(name, "expected a nonnegative integer"))
}

fn get_f64(obj: &Map<String, Value>, name: &str) -> Result<f64> {
    field(obj, name)?
        .as_f64()
        .ok_or_else(|| parse_err(name, "expected a number"))
}

fn as_f64_array(value: &Value, name: &str) -> Result<Vec<f64>> {
    let arr = value.as_array().ok_or_else(|| parse_err(name, "expected an array"))?;
    arr.iter()
        .map(|v| v.as_f64().ok_or_else(|| parse_err(name, "expected an array of numbers")))
        .collect()
}

fn expect_len(name: &str, v: &[f64], len: usize) -> Result<()> {
    if v.len() != len {
        return Err(invalid(name, format!("expected length {len}, got {}", v.len())));
    }
    Ok(())
}

pub fn instance_from_json(text: &str) -> Result<ProblemInstance> {
    let root: Value = serde_json::from_str(text).map_err(|e| parse_err("<document>", e.to_string()))?;
    let obj = root
        .as_object()
        .ok_or_else(|| parse_err("<document>", "expected a JSON object"))?;

    let n = get_usize(obj, "n")?;
    let m = get_usize(obj, "m")?;
    let r = get_usize(obj, "r")?;
    let r_star = get_usize(obj, "r_star")?;
    let seed = field(obj, "seed")?
        .as_u64()
        .ok_or_else(|| parse_err("seed", "expected an unsigned integer"))?;

    let nm = field(obj, "noise_model")?
        .as_object()
        .ok_or_else(|| parse_err("noise_model", "expected an object"))?;
    let kind = field(nm, "kind")
        .map_err(|_| invalid("noise_model.kind", "missing field"))?
        .as_str()
        .ok_or_else(|| parse_err("noise_model.kind", "expected a string"))?;
    let sigma = get_f64(nm, "sigma").map_err(|e| match e {
        SenseError::Validation { message, .. } => invalid("noise_model.sigma", message),
        SenseError::Parse { message, .. } => parse_err("noise_model.sigma", message),
        other => other,
    })?;
    let noise_model =
        NoiseModel::from_kind(kind, sigma).map_err(|e| invalid("noise_model", e.to_string()))?;

    if n == 0 || m == 0 {
        return Err(invalid("n", "n and m must be positive"));
    }

    let sensing_val = field(obj, "sensing")?
        .as_array()
        .ok_or_else(|| parse_err("sensing", "expected an array of arrays"))?;
    if sensing_val.len() != m {
        return Err(invalid("sensing", format!("expected {m} matrices, got {}", sensing_val.len())));
    }
    let mut sensing = Vec::with_capacity(m);
    for row in sensing_val {
        let data = as_f64_array(row, "sensing")?;
        expect_len("sensing", &data, n * n)?;
        sensing.push(from_row_major(n, &data));
    }

    let m_star = as_f64_array(field(obj, "m_star")?, "m_star")?;
    expect_len("m_star", &m_star, n * n)?;
    let noise = as_f64_array(field(obj, "noise")?, "noise")?;
    expect_len("noise", &noise, m)?;
    let measurements = as_f64_array(field(obj, "measurements")?, "measurements")?;
    expect_len("measurements", &measurements, m)?;

    let operator = SensingOperator::new(sensing).map_err(|e| invalid("sensing", e.to_string()))?;
    let truth = GroundTruth::new(from_row_major(n, &m_star), r_star).map_err(|e| match e {
        SenseError::Validation { .. } => e,
        other => invalid("m_star", other.to_string()),
    })?;
    if r < r_star {
        return Err(invalid("r", format!("search rank {r} is below r_star = {r_star}")));
    }
    let noise = DVector::from_vec(noise);
    let measurements = DVector::from_vec(measurements);
    let expected = operator.apply_forward(truth.m_star())? - &noise;
    let scale = 1.0 + expected.amax();
    if (&expected - &measurements).amax() > 1e-9 * scale {
        return Err(invalid("measurements", "measurements disagree with sensing, m_star and noise"));
    }
    Ok(ProblemInstance::from_parts_unchecked(
        operator,
        truth,
        r,
        noise,
        measurements,
        noise_model,
        seed,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{generate_instance, InstanceSpec};

    fn sample() -> ProblemInstance {
        generate_instance(&InstanceSpec::new(4, 12, 3, 2, NoiseModel::Gaussian { sigma: 0.05 }, 9)).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let inst = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inst.json");
        save_instance(&inst, &path).unwrap();
        let back = load_instance(&path).unwrap();
        assert_eq!(back, inst);
        assert_eq!(instance_to_json(&back), instance_to_json(&inst));
    }

    #[test]
    fn same_seed_same_bytes() {
        assert_eq!(instance_to_json(&sample()), instance_to_json(&sample()));
    }

    #[test]
    fn field_order_follows_format() {
        let text = instance_to_json(&sample());
        let keys = ["\"n\"", "\"m\"", "\"r\"", "\"r_star\"", "\"seed\"", "\"noise_model\"", "\"sensing\"", "\"m_star\"", "\"noise\"", "\"measurements\""];
        let pos: Vec<usize> = keys.iter().map(|k| text.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn missing_noise_names_the_field() {
        let mut v: Value = serde_json::from_str(&instance_to_json(&sample())).unwrap();
        v.as_object_mut().unwrap().remove("noise");
        match instance_from_json(&v.to_string()) {
            Err(SenseError::Validation { field, .. }) => assert_eq!(field, "noise"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_document_is_a_parse_error() {
        let text = instance_to_json(&sample());
        let cut = &text[..text.len() / 2];
        assert!(matches!(instance_from_json(cut), Err(SenseError::Parse { .. })));
    }

    #[test]
    fn wrong_lengths_are_validation_errors() {
        let mut v: Value = serde_json::from_str(&instance_to_json(&sample())).unwrap();
        v["m_star"].as_array_mut().unwrap().pop();
        match instance_from_json(&v.to_string()) {
            Err(SenseError::Validation { field, .. }) => assert_eq!(field, "m_star"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tampered_measurements_rejected() {
        let mut v: Value = serde_json::from_str(&instance_to_json(&sample())).unwrap();
        v["measurements"][0] = Value::from(1.0e3);
        assert!(matches!(instance_from_json(&v.to_string()), Err(SenseError::Validation { .. })));
    }
}
