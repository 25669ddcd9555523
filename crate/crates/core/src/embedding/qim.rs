//! Binary quantization index modulation.
//!
//! A coefficient is snapped to the quantizer lattice and then offset by
//! `+q/4` for a one bit or `-q/4` for a zero bit. The lattice index uses
//! round-half-away-from-zero, which keeps the displacement below `3q/4`.

use crate::error::{Error, Result};

pub fn qim_embed(x: f64, bit: bool, q: f64) -> Result<f64> {
    check(x, q)?;
    let base = (x / q).round() * q;
    Ok(if bit { base + q / 4.0 } else { base - q / 4.0 })
}

/// Decodes the bit whose lattice (`kq + q/4` or `kq - q/4`) lies nearest to `x`.
/// Exact midpoints decode to zero.
pub fn qim_extract(x: f64, q: f64) -> Result<bool> {
    check(x, q)?;
    let r = x.rem_euclid(q);
    Ok(r > 0.0 && r < q / 2.0)
}

fn check(x: f64, q: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::NonFinite(x));
    }
    if !(q.is_finite() && q > 0.0) {
        return Err(Error::InvalidParameter(format!("quantizer {q} must be positive")));
    }
    Ok(())
}
