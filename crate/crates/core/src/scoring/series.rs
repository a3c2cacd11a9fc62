use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Number of past days considered by a strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "WindowRepr", into = "WindowRepr")]
pub enum Window {
    /// The last `n` days before `t`.
    Days(usize),
    /// Every day before `t` (`W = t - 1`).
    AllPast,
}

impl Window {
    /// Zero-based indices of the days `max(1, t - W) ..= t - 1` for a 1-based `t`.
    pub fn range(self, t: usize) -> Range<usize> {
        let end = t.saturating_sub(1);
        let start = match self {
            Window::Days(w) => end.saturating_sub(w),
            Window::AllPast => 0,
        };
        start..end
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Window::Days(n) => write!(f, "{n}"),
            Window::AllPast => f.write_str("all"),
        }
    }
}

impl FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "all" | "t-1" | "all-past" => Ok(Window::AllPast),
            other => match other.parse::<usize>() {
                Ok(0) => Err(Error::InvalidParameter("window must be at least one day".into())),
                Ok(n) => Ok(Window::Days(n)),
                Err(_) => Err(Error::InvalidParameter(format!("invalid window {other:?}"))),
            },
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum WindowRepr {
    Days(usize),
    Text(String),
}

impl TryFrom<WindowRepr> for Window {
    type Error = Error;

    fn try_from(repr: WindowRepr) -> Result<Self, Self::Error> {
        match repr {
            WindowRepr::Days(0) => Err(Error::InvalidParameter("window must be at least one day".into())),
            WindowRepr::Days(n) => Ok(Window::Days(n)),
            WindowRepr::Text(s) => s.parse(),
        }
    }
}

impl From<Window> for WindowRepr {
    fn from(w: Window) -> Self {
        match w {
            Window::Days(n) => WindowRepr::Days(n),
            Window::AllPast => WindowRepr::Text("all".into()),
        }
    }
}

/// Per-day losses with their running totals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreSeries {
    losses: Vec<f64>,
    // prefix[i] = sum of the first i losses
    prefix: Vec<f64>,
}

impl ScoreSeries {
    pub fn new() -> Self {
        Self {
            losses: Vec::new(),
            prefix: vec![0.0],
        }
    }

    pub fn from_losses(losses: impl IntoIterator<Item = f64>) -> Self {
        let mut series = Self::new();
        losses.into_iter().for_each(|l| series.push(l));
        series
    }

    pub fn push(&mut self, loss: f64) {
        let total = self.prefix.last().copied().unwrap_or(0.0) + loss;
        self.losses.push(loss);
        self.prefix.push(total);
    }

    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    /// Running totals; entry `i` is the sum of the first `i + 1` losses.
    pub fn cumulative(&self) -> &[f64] {
        &self.prefix[1..]
    }

    pub fn total(&self) -> f64 {
        *self.prefix.last().unwrap()
    }

    pub fn mean(&self) -> f64 {
        if self.losses.is_empty() {
            0.0
        } else {
            self.total() / self.losses.len() as f64
        }
    }

    /// Sum of the losses of the window before day `t` (1-based).
    pub fn windowed_sum(&self, t: usize, window: Window) -> f64 {
        let r = clip(window.range(t), self.losses.len());
        self.prefix[r.end] - self.prefix[r.start]
    }

    /// Mean loss over the window before day `t`; `None` when there is no past day.
    pub fn windowed_mean(&self, t: usize, window: Window) -> Option<f64> {
        let r = clip(window.range(t), self.losses.len());
        if r.is_empty() {
            return None;
        }
        Some((self.prefix[r.end] - self.prefix[r.start]) / r.len() as f64)
    }
}

fn clip(r: Range<usize>, len: usize) -> Range<usize> {
    r.start.min(len)..r.end.min(len)
}

/// Mean loss over the window before day `t`; `None` means "no history", in which
/// case strategies fall back to equal weights.
pub fn windowed_mean(series: &ScoreSeries, t: usize, window: Window) -> Option<f64> {
    series.windowed_mean(t, window)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_ranges() {
        assert_eq!(Window::Days(7).range(1), 0..0);
        assert_eq!(Window::Days(7).range(3), 0..2);
        assert_eq!(Window::Days(7).range(20), 12..19);
        assert_eq!(Window::AllPast.range(20), 0..19);
    }

    #[test]
    fn constant_losses() {
        let s = ScoreSeries::from_losses(std::iter::repeat_n(0.7, 30));
        for w in [Window::Days(1), Window::Days(7), Window::AllPast] {
            assert!((s.windowed_mean(15, w).unwrap() - 0.7).abs() < 1e-15);
        }
        assert_eq!(s.windowed_mean(1, Window::AllPast), None);
    }

    #[test]
    fn all_past_is_full_history_mean() {
        let s = ScoreSeries::from_losses((1..=10).map(|i| i as f64));
        assert_eq!(s.windowed_mean(11, Window::AllPast), Some(5.5));
        assert_eq!(s.windowed_mean(11, Window::Days(10)), Some(5.5));
    }

    #[test]
    fn ramp_last_seven() {
        let s = ScoreSeries::from_losses((1..=30).map(|i| i as f64));
        // days 13..=19 at t = 20
        let expected = (13..=19).map(|i| i as f64).sum::<f64>() / 7.0;
        assert!((s.windowed_mean(20, Window::Days(7)).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn cumulative_is_running_total() {
        let values = [0.1, 0.2, 0.3, 0.4];
        let s = ScoreSeries::from_losses(values);
        let mut acc = 0.0;
        for (c, v) in s.cumulative().iter().zip(values) {
            acc += v;
            assert_eq!(*c, acc);
        }
    }

    #[test]
    fn window_parsing() {
        assert_eq!("all".parse::<Window>().unwrap(), Window::AllPast);
        assert_eq!("30".parse::<Window>().unwrap(), Window::Days(30));
        assert!("0".parse::<Window>().is_err());
        assert!("x".parse::<Window>().is_err());
    }
}
