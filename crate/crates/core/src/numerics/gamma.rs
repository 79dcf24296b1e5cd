use crate::error::{Error, Result};

fn check(a: f64, x: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::InvalidParameter(format!("gamma shape must be positive, got {a}")));
    }
    if !(x >= 0.0) {
        return Err(Error::InvalidParameter(format!("gamma argument must be nonnegative, got {x}")));
    }
    Ok(())
}

/// Complete gamma function Γ(a).
pub fn gamma(a: f64) -> Result<f64> {
    check(a, 0.0)?;
    Ok(statrs::function::gamma::gamma(a))
}

/// Regularized lower incomplete gamma P(a, x).
pub fn regularized_lower(a: f64, x: f64) -> Result<f64> {
    check(a, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    Ok(statrs::function::gamma::gamma_lr(a, x))
}

/// Upper incomplete gamma Γ(a, x) = ∫ₓ^∞ t^{a−1} e^{−t} dt.
pub fn gamma_upper(a: f64, x: f64) -> Result<f64> {
    check(a, x)?;
    if x == 0.0 {
        return gamma(a);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(statrs::function::gamma::gamma_ui(a, x))
}

/// Lower incomplete gamma γ(a, x) = Γ(a) − Γ(a, x).
pub fn gamma_lower(a: f64, x: f64) -> Result<f64> {
    check(a, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return gamma(a);
    }
    Ok(statrs::function::gamma::gamma_li(a, x))
}
