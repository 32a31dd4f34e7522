//! Number formatting for CSV output: '.' decimal, no locale, fixed
//! significant digits. JSON sidecars keep full precision instead.

/// Formats with `sig` significant digits in plain decimal notation,
/// falling back to scientific for extreme magnitudes.
pub fn sig(x: f64, sig: usize) -> String {
    if x == 0.0 {
        return format!("{:.*}", sig - 1, 0.0);
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-9..=12).contains(&exp) {
        return format!("{:.*e}", sig - 1, x);
    }
    let decimals = (sig as i32 - 1 - exp).max(0) as usize;
    format!("{:.*}", decimals, x)
}

/// Default 6-significant-digit CSV cell.
pub fn csv_num(x: f64) -> String {
    sig(x, 6)
}
