//! Loss curves as `iter,loss` CSV.

use crate::error::{Error, Result};

pub fn curve_csv(curve: &[f64]) -> String {
    let mut s = String::from("iter,loss\n");
    for (i, l) in curve.iter().enumerate() {
        s += &format!("{i},{l:e}\n");
    }
    s
}

pub fn parse_curve_csv(text: &str) -> Result<Vec<f64>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("iter,loss") {
        return Err(Error::format("CSV", "expected header iter,loss"));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let (it, loss) = l.split_once(',').ok_or_else(|| Error::format("CSV", format!("row {i}: expected 2 fields")))?;
            if it.trim().parse::<usize>() != Ok(i) {
                return Err(Error::format("CSV", format!("row {i}: iteration out of sequence")));
            }
            loss.trim().parse().map_err(|_| Error::format("CSV", format!("row {i}: bad loss")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_exact() {
        let c = vec![0.5, 0.1234567890123, 1e-9];
        assert_eq!(parse_curve_csv(&curve_csv(&c)).unwrap(), c);
        assert!(parse_curve_csv("loss\n0,1").is_err());
        assert!(parse_curve_csv("iter,loss\n1,0.5\n").is_err());
    }
}
