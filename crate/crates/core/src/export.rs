//! Shared text formatting for CSV outputs.

/// Scientific notation with 17 significant digits; round-trips every `f64`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}
