//! Float text formatting shared by every CSV writer.

/// Shortest decimal text of `x` rounded to 12 significant digits.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_owned();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    format!("{rounded}")
}
