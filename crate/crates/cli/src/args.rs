//! Range arguments of the form `a:b:step` and `a:b:n`.

use serde::Serialize;
use std::str::FromStr;

fn split3(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected a:b:c, got '{s}'"));
    }
    let mut out = [0.0f64; 3];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p
            .trim()
            .parse()
            .map_err(|_| format!("'{p}' is not a number"))?;
        if !o.is_finite() {
            return Err(format!("'{p}' is not finite"));
        }
    }
    Ok(out)
}

/// SNR sweep in dB: `start:stop:step`, stop included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SnrRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl FromStr for SnrRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let [start, stop, step] = split3(s)?;
        if !(step > 0.0) || stop < start {
            return Err(format!("need start <= stop and step > 0 in '{s}'"));
        }
        Ok(SnrRange { start, stop, step })
    }
}

/// `a:b:n`: `n` equal cells of `[a, b]`, evaluated at the cell midpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub cells: usize,
}

impl Grid {
    pub fn width(&self) -> f64 {
        (self.stop - self.start) / self.cells as f64
    }

    pub fn midpoints(&self) -> Vec<f64> {
        let w = self.width();
        (0..self.cells)
            .map(|i| self.start + (i as f64 + 0.5) * w)
            .collect()
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let [start, stop, n] = split3(s)?;
        if start < 0.0 || !(stop > start) {
            return Err(format!("need 0 <= a < b in '{s}'"));
        }
        if n < 1.0 || n.fract() != 0.0 {
            return Err(format!("cell count must be a positive integer in '{s}'"));
        }
        Ok(Grid {
            start,
            stop,
            cells: n as usize,
        })
    }
}

/// One element count `n` or an inclusive range `a:b`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ElementList(pub Vec<u32>);

impl FromStr for ElementList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |t: &str| -> Result<u32, String> {
            let v: u32 = t
                .trim()
                .parse()
                .map_err(|_| format!("'{t}' is not a positive integer"))?;
            if v == 0 {
                return Err("M must be at least 1".into());
            }
            Ok(v)
        };
        match s.split_once(':') {
            None => Ok(ElementList(vec![parse(s)?])),
            Some((a, b)) => {
                let (a, b) = (parse(a)?, parse(b)?);
                if b < a {
                    return Err(format!("empty range '{s}'"));
                }
                Ok(ElementList((a..=b).collect()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_ranges() {
        let r: SnrRange = "0:30:2".parse().unwrap();
        assert_eq!((r.start, r.stop, r.step), (0.0, 30.0, 2.0));
        assert!("0:30".parse::<SnrRange>().is_err());
        assert!("0:30:0".parse::<SnrRange>().is_err());
        assert!("30:0:1".parse::<SnrRange>().is_err());

        let g: Grid = "0:10:400".parse().unwrap();
        assert_eq!(g.cells, 400);
        assert_eq!(g.midpoints()[0], 0.0125);
        assert!("0:10:2.5".parse::<Grid>().is_err());
        assert!("-1:10:5".parse::<Grid>().is_err());

        assert_eq!("6".parse::<ElementList>().unwrap().0, vec![6]);
        assert_eq!("2:4".parse::<ElementList>().unwrap().0, vec![2, 3, 4]);
        assert!("0".parse::<ElementList>().is_err());
        assert!("4:2".parse::<ElementList>().is_err());
    }
}
