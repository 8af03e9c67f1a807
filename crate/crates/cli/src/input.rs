//! The JSON instance format.

use std::path::Path;

use congested_ot_core::{Matrix, PenalizedInstance, ProblemInstance, ValidationError, ValidationErrors};
use serde::{Deserialize, Serialize};

use crate::exit::{CliError, ExitKind};

/// `{"N", "L", "d", "c", "a", "mu", "nu", "eps"?, "delta"?}`, matrices row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub d: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub a: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<f64>>,
}

/// A parsed instance and whether it carried penalty weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedInstance {
    pub instance: PenalizedInstance,
    pub penalized: bool,
}

impl InstanceFile {
    pub fn from_instance(inst: &PenalizedInstance, penalized: bool) -> Self {
        let b = &inst.base;
        let rows = |m: &Matrix| (0..m.rows()).map(|i| m.row(i).to_vec()).collect();
        InstanceFile {
            n: b.n_types,
            l: b.n_schools,
            d: rows(&b.fixed_cost),
            c: rows(&b.linear_cost),
            a: rows(&b.quad_cost),
            mu: b.supply.clone(),
            nu: b.capacity.clone(),
            eps: penalized.then(|| inst.eps.clone()),
            delta: penalized.then(|| inst.delta.clone()),
        }
    }

    /// Converts to the core types; ragged or mis-sized matrices are validation errors.
    pub fn into_instance(self) -> Result<LoadedInstance, ValidationErrors> {
        let (n, l) = (self.n, self.l);
        let mut errs = Vec::new();
        let mut matrix = |field: &'static str, rows: Vec<Vec<f64>>| {
            let shape_ok = rows.len() == n && rows.iter().all(|r| r.len() == l);
            if !shape_ok {
                let found = match rows.iter().map(Vec::len).find(|&len| len != l) {
                    Some(bad) if rows.len() == n => format!("a row of length {bad}"),
                    _ => format!("{} rows", rows.len()),
                };
                errs.push(ValidationError::DimensionMismatch {
                    field,
                    expected: format!("{n}x{l}"),
                    found,
                });
                return Matrix::zeros(n, l);
            }
            Matrix::from_vec(n, l, rows.into_iter().flatten().collect()).expect("shape checked")
        };
        let fixed = matrix("d", self.d);
        let linear = matrix("c", self.c);
        let quad = matrix("a", self.a);
        if !errs.is_empty() {
            return Err(ValidationErrors(errs));
        }
        let penalized = self.eps.is_some() || self.delta.is_some();
        let mut base = ProblemInstance::congestion(linear, quad, self.mu, self.nu);
        base.fixed_cost = fixed;
        base.n_types = n;
        base.n_schools = l;
        let eps = self.eps.unwrap_or_else(|| vec![0.0; n]);
        let delta = self.delta.unwrap_or_else(|| vec![0.0; l]);
        Ok(LoadedInstance {
            instance: PenalizedInstance::new(base, eps, delta),
            penalized,
        })
    }
}

/// Reads, parses and validates an instance file against `max_cells`.
pub fn load_instance(path: &Path, max_cells: usize) -> Result<LoadedInstance, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::new(ExitKind::Validation, format!("cannot read {}: {e}", path.display())))?;
    parse_instance(&text, max_cells).map_err(|e| e.context(&path.display().to_string()))
}

pub fn parse_instance(text: &str, max_cells: usize) -> Result<LoadedInstance, CliError> {
    let file: InstanceFile = serde_json::from_str(text)
        .map_err(|e| CliError::new(ExitKind::Validation, format!("malformed instance: {e}")))?;
    let loaded = file
        .into_instance()
        .map_err(|e| CliError::new(ExitKind::Validation, format!("invalid instance: {e}")))?;
    loaded
        .instance
        .validate_with_cap(max_cells)
        .map_err(|e| CliError::new(ExitKind::Validation, format!("invalid instance: {e}")))?;
    Ok(loaded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use congested_ot_core::fixtures;

    #[test]
    fn round_trip() {
        let inst = fixtures::appendix_c();
        let file = InstanceFile::from_instance(&inst, true);
        let text = serde_json::to_string(&file).unwrap();
        let back = parse_instance(&text, 4096).unwrap();
        assert!(back.penalized);
        assert_eq!(back.instance, inst);
    }

    #[test]
    fn missing_penalties_mean_unpenalized() {
        let inst = fixtures::example_3_1();
        let text = serde_json::to_string(&InstanceFile::from_instance(
            &PenalizedInstance::unpenalized(inst.clone()),
            false,
        ))
        .unwrap();
        assert!(!text.contains("eps"));
        let back = parse_instance(&text, 4096).unwrap();
        assert!(!back.penalized);
        assert_eq!(back.instance.base, inst);
    }

    #[test]
    fn ragged_and_short_inputs() {
        let text = r#"{"N":2,"L":2,"d":[[0,0],[0]],"c":[[1,1]],"a":[[1,1],[1,1]],"mu":[1,1,1],"nu":[1,1]}"#;
        let err = parse_instance(text, 4096).unwrap_err();
        assert_eq!(err.kind, ExitKind::Validation);
        assert!(
            err.message.contains("d") && err.message.contains("a row of length 1"),
            "{}",
            err.message
        );
        assert!(
            err.message.contains("2 rows") || err.message.contains("1 rows"),
            "{}",
            err.message
        );
    }

    #[test]
    fn supply_length_is_checked() {
        let text = r#"{"N":2,"L":2,"d":[[0,0],[0,0]],"c":[[1,1],[1,1]],"a":[[1,1],[1,1]],"mu":[1,1,1],"nu":[1,2]}"#;
        let err = parse_instance(text, 4096).unwrap_err();
        assert!(err.message.contains("mu"), "{}", err.message);
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = r#"{"N":1,"L":1,"d":[[0]],"c":[[1]],"a":[[1]],"mu":[1],"nu":[1],"alpha":0.5}"#;
        let err = parse_instance(text, 4096).unwrap_err();
        assert!(err.message.contains("alpha"));
    }

    #[test]
    fn size_cap() {
        let text = r#"{"N":2,"L":2,"d":[[0,0],[0,0]],"c":[[1,1],[1,1]],"a":[[1,1],[1,1]],"mu":[1,1],"nu":[1,1]}"#;
        assert!(parse_instance(text, 4).is_ok());
        assert!(parse_instance(text, 3).unwrap_err().message.contains("cap"));
    }
}
