//! Human-readable binding and unbinding of triplets.

use std::fmt::Write as _;

use serde::Deserialize;
use tpsgtr_core::numerics::Tensor;
use tpsgtr_core::rolespace::{bind_triplet, unbind, unbind_column, RoleBasis, Slot, TpsgtrEncoding, Triplet};

use crate::error::{CliError, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TripletIn {
    s: Vec<f64>,
    p: Vec<f64>,
    o: Vec<f64>,
}

/// Input file: triplets to bind, bound `d × R` matrices to take apart, or both.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InspectInput {
    #[serde(default)]
    triplets: Vec<TripletIn>,
    #[serde(default)]
    encodings: Vec<Vec<Vec<f64>>>,
}

impl InspectInput {
    pub fn parse(text: &str) -> Result<Self> {
        let input: InspectInput =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("inspect input: {e}")))?;
        if input.triplets.is_empty() && input.encodings.is_empty() {
            return Err(CliError::Config("inspect input has neither triplets nor encodings".into()));
        }
        Ok(input)
    }

    fn triplets(&self) -> Result<Vec<Triplet>> {
        self.triplets
            .iter()
            .enumerate()
            .map(|(i, t)| {
                Triplet::new(t.s.clone(), t.p.clone(), t.o.clone())
                    .map_err(|e| CliError::Config(format!("triplet {i}: {e}")))
            })
            .collect()
    }
}

fn row(out: &mut String, label: &str, values: &[f64]) {
    out.push_str(label);
    for v in values {
        let _ = write!(out, "\t{v}");
    }
    out.push('\n');
}

fn bind_all(ts: &[Triplet], basis: &RoleBasis) -> Result<Vec<TpsgtrEncoding>> {
    ts.iter()
        .map(|t| bind_triplet(t, basis).map_err(|e| CliError::Config(e.to_string())))
        .collect()
}

/// Worst slot recovery error over every triplet.
fn recovery_error(encs: &[TpsgtrEncoding], basis: &RoleBasis) -> f64 {
    let mut worst = 0.0f64;
    for e in encs {
        for slot in Slot::ALL {
            let got = unbind(e, slot, basis).expect("same basis");
            worst = worst.max(got.max_abs_diff(e.source.slot(slot)));
        }
    }
    worst
}

/// Prints each bound matrix row by row, then the round-trip error.
pub fn bind_report(input: &InspectInput, basis: &RoleBasis) -> Result<String> {
    let ts = input.triplets()?;
    if ts.is_empty() {
        return Err(CliError::Config("--bind needs triplets".into()));
    }
    let encs = bind_all(&ts, basis)?;
    let mut out = String::new();
    for (i, e) in encs.iter().enumerate() {
        let _ = writeln!(out, "triplet {i}");
        for r in 0..e.matrix.rows() {
            row(&mut out, "row", e.matrix.row(r));
        }
    }
    let _ = writeln!(out, "max recovery error\t{:e}", recovery_error(&encs, basis));
    Ok(out)
}

/// Prints every slot filler and the unused role columns of each encoding.
/// Triplets in the input are bound first and their round-trip error shown.
pub fn unbind_report(input: &InspectInput, basis: &RoleBasis) -> Result<String> {
    let mut encs = bind_all(&input.triplets()?, basis)?;
    let from_triplets = encs.len();
    for (i, rows) in input.encodings.iter().enumerate() {
        let bad = |msg: String| CliError::Config(format!("encoding {i}: {msg}"));
        let d = rows.len();
        if d == 0 || rows.iter().any(|r| r.len() != basis.order()) {
            return Err(bad(format!("expected a d × {} matrix", basis.order())));
        }
        let matrix = Tensor::matrix(d, basis.order(), rows.concat()).map_err(|e| bad(e.to_string()))?;
        let zero = vec![0.0; d];
        encs.push(TpsgtrEncoding {
            matrix,
            source: Triplet::new(zero.clone(), zero.clone(), zero).map_err(|e| bad(e.to_string()))?,
        });
    }
    let used = basis.assignment();
    let mut out = String::new();
    for (i, e) in encs.iter().enumerate() {
        let _ = writeln!(out, "encoding {i}");
        for slot in Slot::ALL {
            let v = unbind(e, slot, basis).map_err(|e| CliError::Config(e.to_string()))?;
            row(&mut out, slot.name(), v.data());
        }
        for c in (0..basis.order()).filter(|c| !used.contains(c)) {
            let v = unbind_column(e, c, basis).map_err(|e| CliError::Config(e.to_string()))?;
            row(&mut out, &format!("reserved[{c}]"), v.data());
        }
    }
    if from_triplets > 0 {
        let _ = writeln!(out, "max recovery error\t{:e}", recovery_error(&encs[..from_triplets], basis));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tpsgtr_core::rolespace::hadamard_roles;

    #[test]
    fn two_dimensional_binding_literal() {
        let input = InspectInput::parse(r#"{"triplets":[{"s":[1,0],"p":[0,1],"o":[1,1]}]}"#).unwrap();
        let out = bind_report(&input, &hadamard_roles(4).unwrap()).unwrap();
        let rows: Vec<&str> = out.lines().filter(|l| l.starts_with("row")).collect();
        assert_eq!(rows, ["row\t1\t-1\t0\t0", "row\t1\t0\t-1\t0"]);
        assert!(out.ends_with("max recovery error\t0e0\n"), "{out}");
    }

    #[test]
    fn reserved_column_of_bound_triplet_is_zero() {
        let input = InspectInput::parse(r#"{"encodings":[[[1,-1,0,0],[1,0,-1,0]]]}"#).unwrap();
        let out = unbind_report(&input, &hadamard_roles(4).unwrap()).unwrap();
        assert!(out.contains("subject\t1\t0\n"), "{out}");
        assert!(out.contains("object\t1\t1\n"), "{out}");
        assert!(out.contains("reserved[0]\t0\t0\n"), "{out}");
        assert!(!out.contains("max recovery"));
    }

    #[test]
    fn malformed_input_is_a_config_error() {
        for text in ["", "{}", r#"{"triplets":[{"s":[1],"p":[1,2],"o":[1]}]}"#, r#"{"extra":1}"#] {
            let err = InspectInput::parse(text).and_then(|i| bind_report(&i, &hadamard_roles(4).unwrap()));
            assert_eq!(err.unwrap_err().exit_code(), 2, "{text}");
        }
        let ragged = InspectInput::parse(r#"{"encodings":[[[1,2,3]]]}"#).unwrap();
        assert!(unbind_report(&ragged, &hadamard_roles(4).unwrap()).is_err());
    }
}
