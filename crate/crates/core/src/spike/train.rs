use std::cmp::Ordering;
use std::fmt::Write as _;

use super::SimError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spike {
    pub channel: usize,
    /// Seconds.
    pub time: f64,
}

fn order(a: &Spike, b: &Spike) -> Ordering {
    a.time.total_cmp(&b.time).then(a.channel.cmp(&b.channel))
}

/// Time-sorted spike events over a fixed channel set and time span.
///
/// Events are ordered by time then channel, lie within the closed span, and
/// no `(channel, time)` pair repeats.
#[derive(Clone, Debug, PartialEq)]
pub struct SpikeTrain {
    events: Vec<Spike>,
    n_channels: usize,
    t_span: (f64, f64),
}

impl SpikeTrain {
    pub fn new(n_channels: usize, t_span: (f64, f64), mut events: Vec<Spike>) -> Result<Self, SimError> {
        let (t0, t1) = t_span;
        if !(t0.is_finite() && t1.is_finite() && t0 <= t1) {
            return Err(SimError::BadSpan(t0, t1));
        }
        for s in &events {
            if s.channel >= n_channels {
                return Err(SimError::ChannelOutOfRange {
                    channel: s.channel,
                    n_channels,
                });
            }
            if !(s.time >= t0 && s.time <= t1) {
                return Err(SimError::TimeOutOfSpan { time: s.time, t0, t1 });
            }
        }
        events.sort_by(order);
        events.dedup();
        Ok(Self {
            events,
            n_channels,
            t_span,
        })
    }

    pub fn empty(n_channels: usize, t_span: (f64, f64)) -> Self {
        Self {
            events: Vec::new(),
            n_channels,
            t_span,
        }
    }

    pub fn events(&self) -> &[Spike] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn t_span(&self) -> (f64, f64) {
        self.t_span
    }

    /// Keeps the events for which `keep` returns true; channels and span are unchanged.
    pub fn retain(&self, mut keep: impl FnMut(&Spike) -> bool) -> SpikeTrain {
        SpikeTrain {
            events: self.events.iter().copied().filter(|s| keep(s)).collect(),
            n_channels: self.n_channels,
            t_span: self.t_span,
        }
    }

    /// Union of two trains over the same channels; the span covers both.
    pub fn merge(&self, other: &SpikeTrain) -> Result<SpikeTrain, SimError> {
        if self.n_channels != other.n_channels {
            return Err(SimError::ChannelCount {
                expected: self.n_channels,
                got: other.n_channels,
            });
        }
        let span = (self.t_span.0.min(other.t_span.0), self.t_span.1.max(other.t_span.1));
        let mut events = self.events.clone();
        events.extend_from_slice(&other.events);
        SpikeTrain::new(self.n_channels, span, events)
    }

    pub fn with_span(&self, t_span: (f64, f64)) -> Result<SpikeTrain, SimError> {
        SpikeTrain::new(self.n_channels, t_span, self.events.clone())
    }

    /// Whether every event of `self` also occurs in `other`.
    pub fn is_subset_of(&self, other: &SpikeTrain) -> bool {
        let mut it = other.events.iter();
        'next: for s in &self.events {
            for o in it.by_ref() {
                match order(o, s) {
                    Ordering::Less => continue,
                    Ordering::Equal => continue 'next,
                    Ordering::Greater => return false,
                }
            }
            return false;
        }
        true
    }

    /// Text dump: a `#channels=N t0=.. t1=..` header, then `channel<TAB>time` lines.
    pub fn to_dump(&self) -> String {
        let mut out = format!(
            "#channels={} t0={:.9} t1={:.9}\n",
            self.n_channels, self.t_span.0, self.t_span.1
        );
        for s in &self.events {
            let _ = writeln!(out, "{}\t{:.9}", s.channel, s.time);
        }
        out
    }

    pub fn from_dump(text: &str) -> Result<SpikeTrain, SimError> {
        let bad = |line: usize, msg: &str| SimError::Dump {
            line,
            msg: msg.to_string(),
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| bad(1, "missing header"))?;
        let header = header.strip_prefix('#').ok_or_else(|| bad(1, "header must start with '#'"))?;
        let (mut n, mut t0, mut t1) = (None, None, None);
        for field in header.split_whitespace() {
            let (k, v) = field.split_once('=').ok_or_else(|| bad(1, "expected key=value"))?;
            match k {
                "channels" => n = Some(v.parse::<usize>().map_err(|_| bad(1, "bad channel count"))?),
                "t0" => t0 = Some(v.parse::<f64>().map_err(|_| bad(1, "bad t0"))?),
                "t1" => t1 = Some(v.parse::<f64>().map_err(|_| bad(1, "bad t1"))?),
                _ => return Err(bad(1, "unknown header key")),
            }
        }
        let (n, t0, t1) = match (n, t0, t1) {
            (Some(n), Some(t0), Some(t1)) => (n, t0, t1),
            _ => return Err(bad(1, "header needs channels, t0 and t1")),
        };
        let mut events = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let (c, t) = line.split_once('\t').ok_or_else(|| bad(i + 1, "expected channel<TAB>time"))?;
            events.push(Spike {
                channel: c.parse().map_err(|_| bad(i + 1, "bad channel"))?,
                time: t.parse().map_err(|_| bad(i + 1, "bad time"))?,
            });
        }
        SpikeTrain::new(n, (t0, t1), events)
    }
}
