use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// One component of a hypothesis region, in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Piece {
    Interval {
        lo: f64,
        hi: f64,
        lo_closed: bool,
        hi_closed: bool,
    },
    Point(f64),
}

impl Piece {
    pub fn contains(&self, omega_deg: f64) -> bool {
        match *self {
            Piece::Point(p) => p == omega_deg,
            Piece::Interval {
                lo,
                hi,
                lo_closed,
                hi_closed,
            } => {
                let above = if lo_closed { omega_deg >= lo } else { omega_deg > lo };
                let below = if hi_closed { omega_deg <= hi } else { omega_deg < hi };
                above && below
            }
        }
    }

    /// Closed hull `[lo, hi]` with the endpoint flags.
    fn bounds(&self) -> (f64, bool, f64, bool) {
        match *self {
            Piece::Point(p) => (p, true, p, true),
            Piece::Interval {
                lo,
                hi,
                lo_closed,
                hi_closed,
            } => (lo, lo_closed, hi, hi_closed),
        }
    }

    fn overlaps(&self, other: &Piece) -> bool {
        let (alo, alc, ahi, ahc) = self.bounds();
        let (blo, blc, bhi, bhc) = other.bounds();
        // Largest lower end vs smallest upper end, each with its closedness.
        let (lo, lo_closed) = if alo > blo {
            (alo, alc)
        } else if blo > alo {
            (blo, blc)
        } else {
            (alo, alc && blc)
        };
        let (hi, hi_closed) = if ahi < bhi {
            (ahi, ahc)
        } else if bhi < ahi {
            (bhi, bhc)
        } else {
            (ahi, ahc && bhc)
        };
        lo < hi || (lo == hi && lo_closed && hi_closed)
    }

    pub fn length(&self) -> f64 {
        match *self {
            Piece::Point(_) => 0.0,
            Piece::Interval { lo, hi, .. } => hi - lo,
        }
    }
}

/// A finite union of disjoint angle intervals and isolated points.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisSet {
    pieces: Vec<Piece>,
}

impl HypothesisSet {
    pub fn new(pieces: Vec<Piece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidHypothesisSet("set is empty".into()));
        }
        for p in &pieces {
            match *p {
                Piece::Point(x) => {
                    if !(0.0..360.0).contains(&x) {
                        return Err(Error::InvalidHypothesisSet(format!(
                            "point {x} outside [0, 360)"
                        )));
                    }
                }
                Piece::Interval { lo, hi, hi_closed, .. } => {
                    if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || hi > 360.0 || lo >= hi {
                        return Err(Error::InvalidHypothesisSet(format!(
                            "interval ({lo}, {hi}) must satisfy 0 <= lo < hi <= 360"
                        )));
                    }
                    if hi == 360.0 && hi_closed {
                        return Err(Error::InvalidHypothesisSet(
                            "360 is outside [0, 360); use an open upper end".into(),
                        ));
                    }
                }
            }
        }
        for i in 0..pieces.len() {
            for j in (i + 1)..pieces.len() {
                if pieces[i].overlaps(&pieces[j]) {
                    return Err(Error::InvalidHypothesisSet(format!(
                        "pieces {} and {} overlap",
                        Self::piece_string(&pieces[i]),
                        Self::piece_string(&pieces[j])
                    )));
                }
            }
        }
        Ok(HypothesisSet { pieces })
    }

    pub fn point(omega_deg: f64) -> Result<Self> {
        Self::new(vec![Piece::Point(omega_deg)])
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn contains(&self, omega_deg: f64) -> bool {
        self.pieces.iter().any(|p| p.contains(omega_deg))
    }

    pub fn is_disjoint_from(&self, other: &HypothesisSet) -> bool {
        self.pieces
            .iter()
            .all(|a| other.pieces.iter().all(|b| !a.overlaps(b)))
    }

    /// A single isolated point, if that is the whole set.
    pub fn as_simple(&self) -> Option<f64> {
        match self.pieces.as_slice() {
            [Piece::Point(p)] => Some(*p),
            _ => None,
        }
    }

    /// Midpoint of the longest interval; the first point when the set has
    /// no intervals.
    pub fn default_angle(&self) -> f64 {
        let mut best: Option<(f64, f64)> = None;
        for p in &self.pieces {
            if let Piece::Interval { lo, hi, .. } = *p {
                if best.map_or(true, |(len, _)| hi - lo > len) {
                    best = Some((hi - lo, 0.5 * (lo + hi)));
                }
            }
        }
        match best {
            Some((_, mid)) => mid,
            None => match self.pieces[0] {
                Piece::Point(p) => p,
                Piece::Interval { lo, hi, .. } => 0.5 * (lo + hi),
            },
        }
    }

    fn piece_string(p: &Piece) -> String {
        match *p {
            Piece::Point(x) => format!("{{{x}}}"),
            Piece::Interval {
                lo,
                hi,
                lo_closed,
                hi_closed,
            } => format!(
                "{}{lo},{hi}{}",
                if lo_closed { '[' } else { '(' },
                if hi_closed { ']' } else { ')' }
            ),
        }
    }
}

impl fmt::Display for HypothesisSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.pieces.iter().map(Self::piece_string).collect();
        write!(f, "{}", parts.join(" U "))
    }
}

fn parse_number(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::InvalidHypothesisSet(format!("`{}` is not a number", s.trim())))
}

fn parse_piece(s: &str, out: &mut Vec<Piece>) -> Result<()> {
    let s = s.trim();
    let first = s.chars().next();
    let last = s.chars().last();
    match (first, last) {
        (Some('{'), Some('}')) => {
            let inner = &s[1..s.len() - 1];
            if inner.trim().is_empty() {
                return Err(Error::InvalidHypothesisSet("empty point list".into()));
            }
            for tok in inner.split(',') {
                out.push(Piece::Point(parse_number(tok)?));
            }
            Ok(())
        }
        (Some(open @ ('(' | '[')), Some(close @ (')' | ']'))) => {
            let inner = &s[1..s.len() - 1];
            let (a, b) = inner.split_once(',').ok_or_else(|| {
                Error::InvalidHypothesisSet(format!("interval `{s}` needs two endpoints"))
            })?;
            out.push(Piece::Interval {
                lo: parse_number(a)?,
                hi: parse_number(b)?,
                lo_closed: open == '[',
                hi_closed: close == ']',
            });
            Ok(())
        }
        _ => Err(Error::InvalidHypothesisSet(format!(
            "`{s}` is neither an interval like (45,180] nor a point set like {{45,135}}"
        ))),
    }
}

impl FromStr for HypothesisSet {
    type Err = Error;

    /// Accepts intervals `(a,b]`, point sets `{a,b}` and unions joined by
    /// `U` or `∪`, all in degrees.
    fn from_str(s: &str) -> Result<Self> {
        let normalized = s.replace('∪', " U ");
        let mut pieces = Vec::new();
        for part in normalized.split(['U', 'u']) {
            if part.trim().is_empty() {
                return Err(Error::InvalidHypothesisSet(format!("empty union member in `{s}`")));
            }
            parse_piece(part, &mut pieces)?;
        }
        HypothesisSet::new(pieces)
    }
}
