//! JSON forms of functionals, boxes, states and strategies.
//!
//! Tensors are nested arrays indexed `[x][y][a][b]`; matrices of a POVM are
//! `[x][a][i][j]` with each entry a `[re, im]` pair. All indices are 0-based.

use std::path::Path;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{BellError, Result};
use crate::linalg::CMatrix;
use crate::model::{BellFunctional, Povm, ProbBox, PureState, QuantumStrategy};

type Tensor4 = Vec<Vec<Vec<Vec<f64>>>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalJson {
    #[serde(rename = "N")]
    pub inputs: usize,
    #[serde(rename = "K")]
    pub outputs: usize,
    pub coeffs: Tensor4,
    #[serde(default)]
    pub is_game: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxJson {
    #[serde(rename = "N")]
    pub inputs: usize,
    #[serde(rename = "K")]
    pub outputs: usize,
    pub probs: Tensor4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateJson {
    pub schmidt: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyJson {
    pub state: StateJson,
    pub alice: Vec<Vec<Vec<Vec<[f64; 2]>>>>,
    pub bob: Vec<Vec<Vec<Vec<[f64; 2]>>>>,
}

fn nest(n: usize, k: usize, flat: &[f64]) -> Tensor4 {
    let mut it = flat.iter().copied();
    (0..n)
        .map(|_| (0..n).map(|_| (0..k).map(|_| it.by_ref().take(k).collect()).collect()).collect())
        .collect()
}

fn flatten(n: usize, k: usize, t: &Tensor4, what: &str) -> Result<Vec<f64>> {
    let bad = || BellError::InvalidFunctional(format!("{what} tensor must have shape [{n}][{n}][{k}][{k}]"));
    if t.len() != n {
        return Err(bad());
    }
    let mut flat = Vec::with_capacity(n * n * k * k);
    for row in t {
        if row.len() != n {
            return Err(bad());
        }
        for block in row {
            if block.len() != k || block.iter().any(|r| r.len() != k) {
                return Err(bad());
            }
            block.iter().for_each(|r| flat.extend_from_slice(r));
        }
    }
    Ok(flat)
}

impl From<&BellFunctional> for FunctionalJson {
    fn from(m: &BellFunctional) -> Self {
        Self {
            inputs: m.inputs(),
            outputs: m.outputs(),
            coeffs: nest(m.inputs(), m.outputs(), m.coeffs()),
            is_game: m.is_game(),
        }
    }
}

impl TryFrom<FunctionalJson> for BellFunctional {
    type Error = BellError;

    fn try_from(j: FunctionalJson) -> Result<Self> {
        let flat = flatten(j.inputs, j.outputs, &j.coeffs, "coefficient")?;
        Ok(BellFunctional::new(j.inputs, j.outputs, flat)?.with_game_flag(j.is_game))
    }
}

impl From<&ProbBox> for BoxJson {
    fn from(p: &ProbBox) -> Self {
        Self { inputs: p.inputs(), outputs: p.outputs(), probs: nest(p.inputs(), p.outputs(), p.probs()) }
    }
}

impl TryFrom<BoxJson> for ProbBox {
    type Error = BellError;

    fn try_from(j: BoxJson) -> Result<Self> {
        let flat = flatten(j.inputs, j.outputs, &j.probs, "probability")
            .map_err(|e| BellError::InvalidBox(e.to_string()))?;
        ProbBox::new(j.inputs, j.outputs, flat)
    }
}

impl From<&PureState> for StateJson {
    fn from(s: &PureState) -> Self {
        Self { schmidt: s.schmidt().to_vec() }
    }
}

impl TryFrom<StateJson> for PureState {
    type Error = BellError;

    fn try_from(j: StateJson) -> Result<Self> {
        PureState::new(j.schmidt)
    }
}

fn povms_to_json(ps: &[Povm]) -> Vec<Vec<Vec<Vec<[f64; 2]>>>> {
    ps.iter()
        .map(|p| {
            p.elements()
                .iter()
                .map(|e| (0..e.nrows()).map(|i| (0..e.ncols()).map(|j| [e[(i, j)].re, e[(i, j)].im]).collect()).collect())
                .collect()
        })
        .collect()
}

fn povms_from_json(ps: Vec<Vec<Vec<Vec<[f64; 2]>>>>) -> Result<Vec<Povm>> {
    ps.into_iter()
        .map(|p| {
            let elements = p
                .into_iter()
                .map(|rows| {
                    let dim = rows.len();
                    if rows.iter().any(|r| r.len() != dim) {
                        return Err(BellError::InvalidPovm("POVM elements must be square".into()));
                    }
                    Ok(CMatrix::from_fn(dim, dim, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1])))
                })
                .collect::<Result<Vec<_>>>()?;
            Povm::new(elements)
        })
        .collect()
}

impl From<&QuantumStrategy> for StrategyJson {
    fn from(s: &QuantumStrategy) -> Self {
        Self { state: s.state().into(), alice: povms_to_json(s.alice()), bob: povms_to_json(s.bob()) }
    }
}

impl TryFrom<StrategyJson> for QuantumStrategy {
    type Error = BellError;

    fn try_from(j: StrategyJson) -> Result<Self> {
        QuantumStrategy::new(j.state.try_into()?, povms_from_json(j.alice)?, povms_from_json(j.bob)?)
    }
}

fn parse<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| BellError::Precondition(format!("malformed JSON: {e}")))
}

pub fn functional_from_str(text: &str) -> Result<BellFunctional> {
    parse::<FunctionalJson>(text)?.try_into()
}

pub fn box_from_str(text: &str) -> Result<ProbBox> {
    parse::<BoxJson>(text)?.try_into()
}

pub fn state_from_str(text: &str) -> Result<PureState> {
    parse::<StateJson>(text)?.try_into()
}

pub fn strategy_from_str(text: &str) -> Result<QuantumStrategy> {
    parse::<StrategyJson>(text)?.try_into()
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("plain data serializes")
}

pub fn read_to_string(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    std::fs::read_to_string(path).map_err(|e| BellError::Precondition(format!("cannot read {}: {e}", path.display())))
}

pub fn write_string(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, text).map_err(|e| BellError::Precondition(format!("cannot write {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn functional_round_trip() {
        let m = BellFunctional::chsh();
        let text = to_json(&FunctionalJson::from(&m));
        assert!(text.contains("\"N\":2") && text.contains("\"is_game\":true"));
        assert_eq!(functional_from_str(&text).unwrap(), m);
    }

    #[test]
    fn nested_layout_is_x_y_a_b() {
        let m = BellFunctional::from_fn(2, 3, |x, y, a, b| (1000 * x + 100 * y + 10 * a + b) as f64).unwrap();
        let j = FunctionalJson::from(&m);
        assert_eq!(j.coeffs[1][0][2][1], 1021.0);
    }

    #[test]
    fn box_and_state_round_trip() {
        let p = ProbBox::pr_box();
        assert_eq!(box_from_str(&to_json(&BoxJson::from(&p))).unwrap(), p);
        let s = PureState::new(vec![0.8, 0.6]).unwrap();
        assert_eq!(state_from_str(&to_json(&StateJson::from(&s))).unwrap(), s);
        assert!(state_from_str(r#"{"schmidt":[0.5,0.5]}"#).is_err());
    }

    #[test]
    fn strategy_round_trip() {
        let mut r = rng::rng(3);
        let s = QuantumStrategy::random(PureState::maximally_entangled(2), 2, 2, &mut r);
        let back = strategy_from_str(&to_json(&StrategyJson::from(&s))).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn malformed_inputs() {
        assert!(functional_from_str("{").is_err());
        assert!(functional_from_str(r#"{"N":1,"K":1,"coeffs":[[[[1.0,2.0]]]]}"#).is_err());
        assert!(box_from_str(r#"{"N":1,"K":1,"probs":[[[[0.5]]]]}"#).is_err());
    }
}
