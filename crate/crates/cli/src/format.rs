//! Fixed significant-digit rendering for CSV fields.

pub const ENERGY_DIGITS: usize = 12;
pub const METRIC_DIGITS: usize = 6;
pub const INDEX_DIGITS: usize = 2;

/// Plain decimal notation with `digits` significant figures.
pub fn sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i64;
    let decimals = digits as i64 - 1 - magnitude;
    if decimals >= 0 {
        format!("{:.*}", decimals as usize, x)
    } else {
        let scale = 10f64.powi(-decimals as i32);
        format!("{:.0}", (x / scale).round() * scale)
    }
}

pub fn energy(x: f64) -> String {
    sig(x, ENERGY_DIGITS)
}

pub fn metric(x: f64) -> String {
    sig(x, METRIC_DIGITS)
}

/// Efficiency index, or `NA` when undefined.
pub fn index(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| sig(v, INDEX_DIGITS))
}
