//! Compact numeric formatting for CSV output: 12 significant digits,
//! positional where reasonable, exponential otherwise, trailing zeros
//! trimmed (printf %.12g behavior).

pub const SIG_DIGITS: usize = 12;

pub fn format_g(value: f64) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    if !value.is_finite() {
        return value.to_string();
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, value);
    let (mantissa, exp) = sci.split_once('e').expect("exponential format");
    let exp: i32 = exp.parse().expect("exponent parses");
    if (-4..SIG_DIGITS as i32).contains(&exp) {
        let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
        let fixed = format!("{value:.decimals$}");
        trim_zeros(&fixed).to_string()
    } else {
        let mantissa = trim_zeros(mantissa);
        format!("{mantissa}e{exp}")
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
