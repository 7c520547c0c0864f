//! Parsers for the compact flag values (`--bbox`, `--time-window`, `--grid`,
//! `--eval-grid`, `--epsilons`).

use dp_stts::ingest::TimeMode;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct SpecError(pub String);

fn err<T>(msg: impl Into<String>) -> Result<T, SpecError> {
    Err(SpecError(msg.into()))
}

fn parse_f64(s: &str, what: &str) -> Result<f64, SpecError> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => err(format!("{what}: not a finite number: {s:?}")),
    }
}

/// `lat_min,lon_min,lat_max,lon_max` in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub lat_min: f64,
    pub lon_min: f64,
    pub lat_max: f64,
    pub lon_max: f64,
}

pub fn parse_bbox(s: &str) -> Result<BBox, SpecError> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 4 {
        return err(format!(
            "bbox needs lat_min,lon_min,lat_max,lon_max, got {s:?}"
        ));
    }
    let v: Vec<f64> = parts
        .iter()
        .map(|p| parse_f64(p, "bbox"))
        .collect::<Result<_, _>>()?;
    let b = BBox {
        lat_min: v[0],
        lon_min: v[1],
        lat_max: v[2],
        lon_max: v[3],
    };
    if !(b.lat_min < b.lat_max && b.lon_min < b.lon_max) {
        return err(format!("bbox is empty or inverted: {s:?}"));
    }
    Ok(b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeWindow {
    pub mode: TimeMode,
    pub start: f64,
    pub end: f64,
}

fn parse_clock(s: &str) -> Result<f64, SpecError> {
    let (h, m) = s
        .trim()
        .split_once(':')
        .ok_or_else(|| SpecError(format!("time {s:?} is not HH:MM")))?;
    let h: u32 = h
        .parse()
        .map_err(|_| SpecError(format!("bad hour in {s:?}")))?;
    let m: u32 = m
        .parse()
        .map_err(|_| SpecError(format!("bad minute in {s:?}")))?;
    // 24:00 is allowed as an end of day
    if m >= 60 || h > 24 || (h == 24 && m != 0) {
        return err(format!("time {s:?} out of range"));
    }
    Ok(f64::from(h * 3600 + m * 60))
}

/// Either `HH:MM-HH:MM` (daily window, UTC) or `start,end` in the data's own
/// time unit.
pub fn parse_time_window(s: &str) -> Result<TimeWindow, SpecError> {
    let (mode, start, end) = if s.contains(':') {
        let (a, b) = s
            .split_once('-')
            .ok_or_else(|| SpecError(format!("time window {s:?} is not HH:MM-HH:MM")))?;
        (TimeMode::TimeOfDay, parse_clock(a)?, parse_clock(b)?)
    } else {
        let (a, b) = s
            .split_once(',')
            .ok_or_else(|| SpecError(format!("time window {s:?} is not start,end")))?;
        (
            TimeMode::Absolute,
            parse_f64(a, "time window")?,
            parse_f64(b, "time window")?,
        )
    };
    if start.partial_cmp(&end) != Some(std::cmp::Ordering::Less) {
        return err(format!("time window {s:?} is empty or inverted"));
    }
    Ok(TimeWindow { mode, start, end })
}

fn parse_dims<const N: usize>(s: &str, what: &str) -> Result<[u32; N], SpecError> {
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    if parts.len() != N {
        return err(format!("{what} needs {N} 'x'-separated sizes, got {s:?}"));
    }
    let mut out = [0u32; N];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p
            .trim()
            .parse()
            .map_err(|_| SpecError(format!("{what}: bad size {p:?}")))?;
        if *o == 0 {
            return err(format!("{what}: sizes must be positive"));
        }
    }
    Ok(out)
}

/// `WxHxT`.
pub fn parse_grid(s: &str) -> Result<(u32, u32, u32), SpecError> {
    let [w, h, t] = parse_dims::<3>(s, "grid")?;
    Ok((w, h, t))
}

/// `WxH` (columns x rows).
pub fn parse_eval_grid(s: &str) -> Result<(u32, u32), SpecError> {
    let [w, h] = parse_dims::<2>(s, "eval grid")?;
    Ok((w, h))
}

pub fn parse_epsilons(s: &str) -> Result<Vec<f64>, SpecError> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| parse_f64(p, "epsilons"))
        .collect::<Result<_, _>>()?;
    if let Some(e) = v.iter().find(|e| **e <= 0.0) {
        return err(format!("epsilon must be positive, got {e}"));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bbox() {
        let b = parse_bbox("41.104,-8.665,41.250,-8.528").unwrap();
        assert_eq!(b.lat_min, 41.104);
        assert_eq!(b.lon_max, -8.528);
        assert!(parse_bbox("41.25,-8.665,41.104,-8.528").is_err());
        assert!(parse_bbox("1,2,3").is_err());
        assert!(parse_bbox("1,2,3,nan").is_err());
    }

    #[test]
    fn time_windows() {
        let w = parse_time_window("14:00-18:00").unwrap();
        assert_eq!(
            (w.mode, w.start, w.end),
            (TimeMode::TimeOfDay, 50_400.0, 64_800.0)
        );
        let w = parse_time_window("0,3600").unwrap();
        assert_eq!((w.mode, w.start, w.end), (TimeMode::Absolute, 0.0, 3600.0));
        assert_eq!(parse_time_window("00:00-24:00").unwrap().end, 86_400.0);
        assert!(parse_time_window("18:00-14:00").is_err());
        assert!(parse_time_window("14:60-18:00").is_err());
        assert!(parse_time_window("24:30-25:00").is_err());
        assert!(parse_time_window("5,5").is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("20x20x16").unwrap(), (20, 20, 16));
        assert_eq!(parse_eval_grid("20X10").unwrap(), (20, 10));
        assert!(parse_grid("20x20").is_err());
        assert!(parse_grid("0x1x1").is_err());
        assert!(parse_eval_grid("ax2").is_err());
    }

    #[test]
    fn epsilons() {
        assert_eq!(parse_epsilons("0.5,1").unwrap(), vec![0.5, 1.0]);
        assert!(parse_epsilons("1,-2").is_err());
        assert!(parse_epsilons("").is_err());
    }
}
