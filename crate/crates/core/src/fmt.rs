//! Float formatting shared by every CSV writer.

/// Rounds `x` to 12 significant digits and prints the shortest decimal that
/// parses back to the rounded value.
pub fn sig12(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("scientific literal");
    if rounded == 0.0 {
        return "0".to_string();
    }
    format!("{rounded}")
}

/// Fixed two-decimal rendering used for report tables.
pub fn fixed2(x: f64) -> String {
    let s = format!("{x:.2}");
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}
