//! Re-checks the certificates stored in a record stream by fresh simulation.

use rcabench::engine::Rule;
use rcabench::lattice::Geometry;
use rcabench::thermo::{entropy_influx_experiment, ComplexityCertificate, ComplexityTarget};
use rcabench::universality::Certificate;
use serde_json::{json, Value};

use crate::config::Experiment;
use crate::run::{configuration, map_table, region, split};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Verified,
    Failed,
    NoCertificate,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Verified => "verified",
            Verdict::Failed => "FAILED",
            Verdict::NoCertificate => "no certificate",
        }
    }
}

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value, String> {
    v.get(key).ok_or_else(|| format!("record lacks {key:?}"))
}

fn complexity_certificate(g: &Geometry, c: &Value) -> Result<ComplexityCertificate, String> {
    let target = field(c, "target")?;
    let target = if let Some(t) = target.get("config").and_then(Value::as_str) {
        ComplexityTarget::Config(configuration(g, t)?)
    } else if let Some(m) = target.get("map") {
        let spec = serde_json::from_value(m.clone()).map_err(|e| e.to_string())?;
        ComplexityTarget::Map(map_table(g, &spec)?)
    } else {
        return Err("complexity certificate lacks a target".into());
    };
    Ok(ComplexityCertificate {
        target,
        program: configuration(g, field(c, "program")?.as_str().unwrap_or_default())?,
        time: field(c, "time")?.as_u64().ok_or("bad time")?,
        value: field(c, "value")?.as_f64().ok_or("bad value")?,
        hash: field(c, "hash")?.as_str().ok_or("bad hash")?.to_string(),
    })
}

/// Verdict for one record. Errors mean the record itself is malformed.
pub fn verify_record(record: &Value) -> Result<Verdict, String> {
    let rule: Rule = serde_json::from_value(field(record, "rule")?.clone()).map_err(|e| format!("rule: {e}"))?;
    let g: Geometry = serde_json::from_value(field(record, "geometry")?.clone()).map_err(|e| format!("geometry: {e}"))?;
    let inputs: Experiment =
        serde_json::from_value(field(record, "inputs")?.clone()).map_err(|e| format!("inputs: {e}"))?;
    if record.get("status").and_then(Value::as_str) != Some("ok") {
        return Ok(Verdict::NoCertificate);
    }
    let result = field(record, "result")?;
    let cert = result.get("certificate");
    let ok = match (&inputs, cert) {
        (Experiment::SearchPrep { .. } | Experiment::SearchMap { .. }, Some(c)) => {
            let c = Certificate::from_record(&g, c).map_err(|e| e.to_string())?;
            c.verify(&rule, &g).map_err(|e| e.to_string())?
        }
        (Experiment::Complexity { split: s, .. }, Some(c)) => {
            let c = complexity_certificate(&g, c)?;
            c.verify(&rule, &split(&g, s)?).map_err(|e| e.to_string())?
        }
        (
            Experiment::Influx {
                region: r,
                displacement,
                program,
                time,
                initial,
                ..
            },
            _,
        ) => {
            let r = region(&g, r)?;
            let program = configuration(&g, program.as_deref().unwrap_or(""))?;
            let initial = initial
                .as_ref()
                .map(|s| rcabench::lattice::Configuration::from_text(&g, r.clone(), s).map_err(|e| e.to_string()))
                .transpose()?;
            let cap = record.pointer("/caps/enumeration").and_then(Value::as_u64).ok_or("bad caps")?;
            // re-derive the transfer check and entropy, compare with the stored report
            let rep = entropy_influx_experiment(&rule, &g, &r, displacement, &program, *time, initial.as_ref(), cap)
                .map_err(|e| e.to_string())?;
            json!(rep) == *result
        }
        _ => return Ok(Verdict::NoCertificate),
    };
    Ok(if ok { Verdict::Verified } else { Verdict::Failed })
}
