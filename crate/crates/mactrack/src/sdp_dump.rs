//! JSON dump of an SDP instance for cross-checking with external solvers.
//!
//! Layout (a debug aid, not a stable format):
//!
//! ```json
//! {
//!   "dim": 3,
//!   "sense": "maximize",
//!   "objective": {"re": [[...], ...], "im": [[...], ...]},
//!   "eq":   [{"a": {"re": ..., "im": ...}, "b": 1.0}],
//!   "ineq": [{"a": {"re": ..., "im": ...}, "b": 0.0}],
//!   "initial_point": null
//! }
//! ```
//!
//! Equality rows mean `tr(A X) = b`, inequality rows `tr(A X) <= b`, over
//! Hermitian PSD `X`.

use mactrack_core::linalg::HermitianMatrix;
use mactrack_core::sdp::{SdpProblem, Sense};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct MatrixJson {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize)]
pub struct RowJson {
    pub a: MatrixJson,
    pub b: f64,
}

#[derive(Debug, Serialize)]
pub struct SdpJson {
    pub dim: usize,
    pub sense: &'static str,
    pub objective: MatrixJson,
    pub eq: Vec<RowJson>,
    pub ineq: Vec<RowJson>,
    pub initial_point: Option<MatrixJson>,
}

fn matrix(a: &HermitianMatrix) -> MatrixJson {
    let n = a.dim();
    let rows = |f: fn(mactrack_core::C64) -> f64| (0..n).map(|i| (0..n).map(|j| f(a.get(i, j))).collect()).collect();
    MatrixJson {
        re: rows(|z| z.re),
        im: rows(|z| z.im),
    }
}

pub fn to_json(p: &SdpProblem) -> SdpJson {
    let rows = |v: &[(HermitianMatrix, f64)]| v.iter().map(|(a, b)| RowJson { a: matrix(a), b: *b }).collect();
    SdpJson {
        dim: p.dim(),
        sense: match p.sense {
            Sense::Maximize => "maximize",
            Sense::Minimize => "minimize",
        },
        objective: matrix(&p.objective),
        eq: rows(&p.eq_constraints),
        ineq: rows(&p.ineq_constraints),
        initial_point: p.initial_point.as_ref().map(matrix),
    }
}

pub fn to_string(p: &SdpProblem) -> String {
    serde_json::to_string_pretty(&to_json(p)).expect("plain numeric JSON always serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use mactrack_core::linalg::CMatrix;
    use mactrack_core::C64;

    #[test]
    fn dump_round_trips_entries() {
        let m = CMatrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => C64::new(1.0, 2.0),
            (1, 0) => C64::new(1.0, -2.0),
            _ => C64::new(i as f64 + 3.0, 0.0),
        });
        let a = HermitianMatrix::new(m).unwrap();
        let p = SdpProblem::new(a.clone(), Sense::Maximize).with_eq(HermitianMatrix::identity(2), 1.0);
        let v: serde_json::Value = serde_json::from_str(&to_string(&p)).unwrap();
        assert_eq!(v["dim"], 2);
        assert_eq!(v["sense"], "maximize");
        assert_eq!(v["objective"]["im"][0][1], 2.0);
        assert_eq!(v["objective"]["im"][1][0], -2.0);
        assert_eq!(v["eq"][0]["b"], 1.0);
        assert!(v["ineq"].as_array().unwrap().is_empty());
        assert!(v["initial_point"].is_null());
    }
}
