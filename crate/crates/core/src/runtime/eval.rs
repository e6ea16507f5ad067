use crate::data::{LabelMap, Window};
use crate::error::{Error, Result};
use crate::metrics::{CiUnit, Confidence, EvalReport};
use crate::model::top_class;
use crate::Model;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub class: usize,
    /// Softmax probability of `class`.
    pub confidence: f32,
}

/// Per-window predictions, in input order.
pub fn predict_windows(model: &Model, windows: &[Window]) -> Result<Vec<Prediction>> {
    windows
        .iter()
        .map(|w| {
            let (logits, _) = model.forward_window(&w.model_input())?;
            let (class, confidence) = top_class(logits.data());
            Ok(Prediction { class, confidence })
        })
        .collect()
}

/// Runs the model over the selected windows and builds the full report.
pub fn evaluate(
    model: &Model,
    windows: &[Window],
    indices: &[usize],
    ci_unit: CiUnit,
    confidence: Confidence,
) -> Result<EvalReport> {
    if indices.is_empty() {
        return Err(Error::Input("nothing to evaluate: no windows selected".into()));
    }
    let selected: Vec<Window> = indices
        .iter()
        .map(|&i| {
            windows
                .get(i)
                .cloned()
                .ok_or_else(|| Error::Input(format!("window index {i} out of range")))
        })
        .collect::<Result<_>>()?;
    let predicted: Vec<usize> = predict_windows(model, &selected)?
        .into_iter()
        .map(|p| p.class)
        .collect();
    let k = model.config.num_classes;
    let actual: Vec<usize> = selected.iter().map(|w| w.label).collect();
    if let Some(&bad) = actual.iter().find(|&&a| a >= k) {
        return Err(Error::Label(format!(
            "window label {bad} outside the model's {k} classes"
        )));
    }
    EvalReport::from_predictions(&actual, &predicted, LabelMap::default().names(k), ci_unit, confidence)
}
