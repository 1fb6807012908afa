//! Batch-normalized Boltzmann importance weights and their truncation.

/// `B * softmax(q)`: mean exactly one, unchanged by adding a constant to `q`.
pub fn normalized_importance_weights(q_values: &[f64]) -> Vec<f64> {
    if q_values.is_empty() {
        return Vec::new();
    }
    let max = q_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = q_values.iter().map(|q| (q - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let b = q_values.len() as f64;
    exps.into_iter().map(|e| b * e / total).collect()
}

/// Truncates a normalized weight to `[1 - c_clip, 1 + c_clip]`.
pub fn clip_weight(w: f64, c_clip: f64) -> f64 {
    w.min(1.0 + c_clip).max(1.0 - c_clip)
}

/// Normalizes then truncates a whole batch.
pub fn truncated_importance_weights(q_values: &[f64], c_clip: f64) -> Vec<f64> {
    normalized_importance_weights(q_values)
        .into_iter()
        .map(|w| clip_weight(w, c_clip))
        .collect()
}
