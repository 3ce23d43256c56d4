use crate::error::{Error, Result};

fn check_lengths(y_model: &[f64], y_measured: &[f64]) -> Result<()> {
    if y_model.len() != y_measured.len() {
        return Err(Error::LengthMismatch {
            expected: y_measured.len(),
            got: y_model.len(),
        });
    }
    if y_measured.is_empty() {
        return Err(Error::EmptyTrace);
    }
    Ok(())
}

/// Coefficient of determination `1 − RSS/TSS` of a model against measurements.
pub fn r_squared(y_model: &[f64], y_measured: &[f64]) -> Result<f64> {
    check_lengths(y_model, y_measured)?;
    if y_measured.len() < 2 {
        return Err(Error::EmptyTrace);
    }
    let mean = y_measured.iter().sum::<f64>() / y_measured.len() as f64;
    let tss: f64 = y_measured.iter().map(|y| (y - mean).powi(2)).sum();
    if tss == 0.0 {
        return Err(Error::ConstantReference);
    }
    let rss: f64 = y_model
        .iter()
        .zip(y_measured)
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    Ok(1.0 - rss / tss)
}

/// Root mean square of the model error.
pub fn rms_error(y_model: &[f64], y_measured: &[f64]) -> Result<f64> {
    check_lengths(y_model, y_measured)?;
    let ss: f64 = y_model
        .iter()
        .zip(y_measured)
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    Ok((ss / y_measured.len() as f64).sqrt())
}
