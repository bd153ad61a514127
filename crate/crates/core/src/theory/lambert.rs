use crate::error::{Error, Result};

/// Principal branch of the Lambert function on `[0, ∞)`.
///
/// Above `e` the seed `ln x − ln ln x` is refined by Newton steps on
/// `w + ln w = ln x`, which avoids forming `e^w` for large arguments; below
/// `e` Halley steps on `w·e^w − x` start from `ln(1 + x)`.
pub fn lambert_w(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::domain(format!("lambert_w needs x >= 0, got {x}")));
    }
    if x == 0.0 || x.is_infinite() {
        return Ok(x);
    }
    if x > std::f64::consts::E {
        let lx = x.ln();
        let mut w = lx - lx.ln();
        for _ in 0..64 {
            let step = (w + w.ln() - lx) / (1.0 + 1.0 / w);
            w -= step;
            if step.abs() <= 4.0 * f64::EPSILON * w {
                break;
            }
        }
        return Ok(w);
    }
    let mut w = x.ln_1p();
    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * w.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(w)
}

/// Elementary lower bound on `W`: `ln x − ln ln x` from `e` on, `x/e` below.
pub fn lambert_w_lower(x: f64) -> f64 {
    if x >= std::f64::consts::E {
        x.ln() - x.ln().ln()
    } else {
        x.max(0.0) / std::f64::consts::E
    }
}
