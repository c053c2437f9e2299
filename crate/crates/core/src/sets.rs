//! Exact algebra of the measurable sets the analyzers quantify over.
//!
//! Three outcome spaces are supported: the real line (finite unions of
//! half-open intervals `[a, b)` with extended endpoints), the circle
//! `[0, 2π)` (unions of half-open arcs, split at zero) and the naturals
//! (finite or cofinite subsets). Singletons on the line and circle are
//! carried as zero-length probes since `[x, x)` is empty.
//!
//! All values are immutable once canonicalized.

use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Endpoint coincidence tolerance used when merging pieces.
pub const ENDPOINT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Line,
    Circle,
    Naturals,
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::Line => "line",
            Domain::Circle => "circle",
            Domain::Naturals => "naturals",
        })
    }
}

/// Half-open interval `[lo, hi)` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x < self.hi
    }
}

// Sorted, disjoint, non-adjacent interval lists. Shared by line and circle.

fn merge_sorted(mut pieces: Vec<Interval>) -> Vec<Interval> {
    pieces.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut out: Vec<Interval> = Vec::with_capacity(pieces.len());
    for p in pieces {
        if p.hi - p.lo <= ENDPOINT_TOL {
            continue;
        }
        match out.last_mut() {
            Some(last) if p.lo <= last.hi + ENDPOINT_TOL => {
                if p.hi > last.hi {
                    last.hi = p.hi;
                }
            }
            _ => out.push(p),
        }
    }
    out
}

fn intersect_lists(a: &[Interval], b: &[Interval]) -> Vec<Interval> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        let lo = a[i].lo.max(b[j].lo);
        let hi = a[i].hi.min(b[j].hi);
        if hi - lo > ENDPOINT_TOL {
            out.push(Interval { lo, hi });
        }
        if a[i].hi < b[j].hi {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

fn complement_list(a: &[Interval], universe: Interval) -> Vec<Interval> {
    let mut out = Vec::new();
    let mut cursor = universe.lo;
    for p in a {
        if p.lo - cursor > ENDPOINT_TOL {
            out.push(Interval { lo: cursor, hi: p.lo });
        }
        cursor = p.hi;
    }
    if universe.hi - cursor > ENDPOINT_TOL {
        out.push(Interval {
            lo: cursor,
            hi: universe.hi,
        });
    }
    out
}

fn total_length(a: &[Interval]) -> f64 {
    a.iter().map(Interval::len).sum()
}

fn lists_approx_eq(a: &[Interval], b: &[Interval], tol: f64) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(p, q)| {
            endpoint_close(p.lo, q.lo, tol) && endpoint_close(p.hi, q.hi, tol)
        })
}

fn endpoint_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol
}

fn write_number(f: &mut fmt::Formatter<'_>, x: f64) -> fmt::Result {
    if x == f64::INFINITY {
        f.write_str("inf")
    } else if x == f64::NEG_INFINITY {
        f.write_str("-inf")
    } else {
        write!(f, "{x}")
    }
}

fn write_pieces(f: &mut fmt::Formatter<'_>, pieces: &[Interval]) -> fmt::Result {
    if pieces.is_empty() {
        return f.write_str("∅");
    }
    for (k, p) in pieces.iter().enumerate() {
        if k > 0 {
            f.write_str("∪")?;
        }
        f.write_str(if p.lo == f64::NEG_INFINITY { "(" } else { "[" })?;
        write_number(f, p.lo)?;
        f.write_str(",")?;
        write_number(f, p.hi)?;
        f.write_str(")")?;
    }
    Ok(())
}

/// Finite union of half-open intervals on the extended real line.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LineSet {
    intervals: Vec<Interval>,
}

impl LineSet {
    pub fn empty() -> Self {
        LineSet::default()
    }

    pub fn full() -> Self {
        LineSet {
            intervals: vec![Interval {
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
            }],
        }
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::from_intervals(&[(lo, hi)])
    }

    /// `(-inf, hi)`.
    pub fn below(hi: f64) -> Result<Self> {
        Self::interval(f64::NEG_INFINITY, hi)
    }

    /// `[lo, inf)`.
    pub fn above(lo: f64) -> Result<Self> {
        Self::interval(lo, f64::INFINITY)
    }

    /// Canonicalizes raw pieces: merges overlapping and adjacent ones.
    pub fn from_intervals(raw: &[(f64, f64)]) -> Result<Self> {
        let mut pieces = Vec::with_capacity(raw.len());
        for (index, &(lo, hi)) in raw.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo >= hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY
            {
                return Err(Error::MalformedPiece { index, lo, hi });
            }
            pieces.push(Interval { lo, hi });
        }
        Ok(LineSet {
            intervals: merge_sorted(pieces),
        })
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|p| p.contains(x))
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut all = self.intervals.clone();
        all.extend_from_slice(&other.intervals);
        LineSet {
            intervals: merge_sorted(all),
        }
    }

    pub fn intersection(&self, other: &Self) -> Self {
        LineSet {
            intervals: intersect_lists(&self.intervals, &other.intervals),
        }
    }

    pub fn complement(&self) -> Self {
        LineSet {
            intervals: complement_list(
                &self.intervals,
                Interval {
                    lo: f64::NEG_INFINITY,
                    hi: f64::INFINITY,
                },
            ),
        }
    }

    pub fn difference(&self, other: &Self) -> Self {
        self.intersection(&other.complement())
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.difference(other).is_empty()
    }

    pub fn lebesgue(&self) -> f64 {
        total_length(&self.intervals)
    }

    pub fn translate(&self, s: f64) -> Self {
        LineSet {
            intervals: self
                .intervals
                .iter()
                .map(|p| Interval {
                    lo: p.lo + s,
                    hi: p.hi + s,
                })
                .collect(),
        }
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        lists_approx_eq(&self.intervals, &other.intervals, tol)
    }
}

impl fmt::Display for LineSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_pieces(f, &self.intervals)
    }
}

/// Finite union of half-open arcs on `[0, 2π)`; an arc crossing zero is
/// stored as `[a, 2π)` and `[0, b)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CircleSet {
    arcs: Vec<Interval>,
}

const CIRCLE: Interval = Interval { lo: 0.0, hi: TAU };

fn reduce_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if TAU - r <= ENDPOINT_TOL {
        0.0
    } else {
        r
    }
}

/// Places an arc of the given start and length, splitting at zero.
fn place_arc(start: f64, len: f64, out: &mut Vec<Interval>) {
    if len >= TAU - ENDPOINT_TOL {
        out.push(CIRCLE);
        return;
    }
    let lo = reduce_angle(start);
    let hi = lo + len;
    if hi <= TAU + ENDPOINT_TOL {
        out.push(Interval {
            lo,
            hi: hi.min(TAU),
        });
    } else {
        out.push(Interval { lo, hi: TAU });
        out.push(Interval {
            lo: 0.0,
            hi: hi - TAU,
        });
    }
}

impl CircleSet {
    pub fn empty() -> Self {
        CircleSet::default()
    }

    pub fn full() -> Self {
        CircleSet { arcs: vec![CIRCLE] }
    }

    pub fn arc(start: f64, end: f64) -> Result<Self> {
        Self::from_arcs(&[(start, end)])
    }

    /// Canonicalizes raw arcs `(start, end)`. Endpoints are reduced mod 2π;
    /// a reduced start beyond the reduced end denotes an arc through zero.
    /// A raw span of at least 2π is the whole circle.
    pub fn from_arcs(raw: &[(f64, f64)]) -> Result<Self> {
        let mut pieces = Vec::with_capacity(raw.len() + 1);
        for (index, &(lo, hi)) in raw.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::MalformedPiece { index, lo, hi });
            }
            if hi - lo >= TAU - ENDPOINT_TOL {
                pieces.push(CIRCLE);
                continue;
            }
            let a = reduce_angle(lo);
            let b = reduce_angle(hi);
            if (a - b).abs() <= ENDPOINT_TOL {
                return Err(Error::MalformedPiece { index, lo, hi });
            }
            let len = if b > a { b - a } else { b + TAU - a };
            place_arc(a, len, &mut pieces);
        }
        Ok(CircleSet {
            arcs: merge_sorted(pieces),
        })
    }

    pub fn arcs(&self) -> &[Interval] {
        &self.arcs
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    pub fn contains(&self, theta: f64) -> bool {
        let t = reduce_angle(theta);
        self.arcs.iter().any(|p| p.contains(t))
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut all = self.arcs.clone();
        all.extend_from_slice(&other.arcs);
        CircleSet {
            arcs: merge_sorted(all),
        }
    }

    pub fn intersection(&self, other: &Self) -> Self {
        CircleSet {
            arcs: intersect_lists(&self.arcs, &other.arcs),
        }
    }

    pub fn complement(&self) -> Self {
        CircleSet {
            arcs: complement_list(&self.arcs, CIRCLE),
        }
    }

    pub fn difference(&self, other: &Self) -> Self {
        self.intersection(&other.complement())
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.difference(other).is_empty()
    }

    pub fn length(&self) -> f64 {
        total_length(&self.arcs)
    }

    /// Rotation `Δ ⊕ θ` (addition mod 2π).
    pub fn shift(&self, theta: f64) -> Self {
        let mut pieces = Vec::with_capacity(self.arcs.len() + 1);
        for p in &self.arcs {
            place_arc(p.lo + theta, p.len(), &mut pieces);
        }
        CircleSet {
            arcs: merge_sorted(pieces),
        }
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        lists_approx_eq(&self.arcs, &other.arcs, tol)
    }
}

impl fmt::Display for CircleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("circ:")?;
        write_pieces(f, &self.arcs)
    }
}

/// Finite or cofinite subset of ℕ = {0, 1, 2, ...}.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum NatSet {
    /// Exactly these members.
    Finite(Vec<u64>),
    /// Every natural except these.
    Cofinite(Vec<u64>),
}

impl Default for NatSet {
    fn default() -> Self {
        NatSet::Finite(Vec::new())
    }
}

fn sorted_members(iter: impl IntoIterator<Item = u64>) -> Vec<u64> {
    iter.into_iter().collect::<BTreeSet<_>>().into_iter().collect()
}

fn as_tree(v: &[u64]) -> BTreeSet<u64> {
    v.iter().copied().collect()
}

impl NatSet {
    pub fn empty() -> Self {
        NatSet::Finite(Vec::new())
    }

    pub fn full() -> Self {
        NatSet::Cofinite(Vec::new())
    }

    pub fn finite(members: impl IntoIterator<Item = u64>) -> Self {
        NatSet::Finite(sorted_members(members))
    }

    pub fn cofinite(excluded: impl IntoIterator<Item = u64>) -> Self {
        NatSet::Cofinite(sorted_members(excluded))
    }

    pub fn singleton(n: u64) -> Self {
        NatSet::Finite(vec![n])
    }

    /// `{m : m > n}`.
    pub fn tail_after(n: u64) -> Self {
        NatSet::Cofinite((0..=n).collect())
    }

    pub fn contains(&self, n: u64) -> bool {
        match self {
            NatSet::Finite(v) => v.binary_search(&n).is_ok(),
            NatSet::Cofinite(v) => v.binary_search(&n).is_err(),
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, NatSet::Finite(v) if v.is_empty())
    }

    pub fn is_cofinite(&self) -> bool {
        matches!(self, NatSet::Cofinite(_))
    }

    /// The finite list stored by either mode.
    pub fn listed(&self) -> &[u64] {
        match self {
            NatSet::Finite(v) | NatSet::Cofinite(v) => v,
        }
    }

    pub fn complement(&self) -> Self {
        match self {
            NatSet::Finite(v) => NatSet::Cofinite(v.clone()),
            NatSet::Cofinite(v) => NatSet::Finite(v.clone()),
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        use NatSet::*;
        match (self, other) {
            (Finite(a), Finite(b)) => Finite(sorted_members(a.iter().chain(b).copied())),
            (Finite(a), Cofinite(b)) | (Cofinite(b), Finite(a)) => {
                Cofinite(as_tree(b).difference(&as_tree(a)).copied().collect())
            }
            (Cofinite(a), Cofinite(b)) => {
                Cofinite(as_tree(a).intersection(&as_tree(b)).copied().collect())
            }
        }
    }

    pub fn intersection(&self, other: &Self) -> Self {
        use NatSet::*;
        match (self, other) {
            (Finite(a), Finite(b)) => {
                Finite(as_tree(a).intersection(&as_tree(b)).copied().collect())
            }
            (Finite(a), Cofinite(b)) | (Cofinite(b), Finite(a)) => {
                Finite(as_tree(a).difference(&as_tree(b)).copied().collect())
            }
            (Cofinite(a), Cofinite(b)) => Cofinite(sorted_members(a.iter().chain(b).copied())),
        }
    }

    pub fn difference(&self, other: &Self) -> Self {
        self.intersection(&other.complement())
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.difference(other).is_empty()
    }

    /// Counting measure; `+inf` for cofinite sets.
    pub fn count(&self) -> f64 {
        match self {
            NatSet::Finite(v) => v.len() as f64,
            NatSet::Cofinite(_) => f64::INFINITY,
        }
    }
}

impl fmt::Display for NatSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (prefix, v) = match self {
            NatSet::Finite(v) => ("nat:{", v),
            NatSet::Cofinite(v) => ("nat:co{", v),
        };
        f.write_str(prefix)?;
        for (k, n) in v.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{n}")?;
        }
        f.write_str("}")
    }
}

/// Any set an effect can be evaluated on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum MeasurableSet {
    Line(LineSet),
    Circle(CircleSet),
    Nat(NatSet),
    /// Zero-length probe `{x}` on the line or circle.
    Point { domain: Domain, at: f64 },
}

impl MeasurableSet {
    pub fn domain(&self) -> Domain {
        match self {
            MeasurableSet::Line(_) => Domain::Line,
            MeasurableSet::Circle(_) => Domain::Circle,
            MeasurableSet::Nat(_) => Domain::Naturals,
            MeasurableSet::Point { domain, .. } => *domain,
        }
    }

    pub fn full(domain: Domain) -> Self {
        match domain {
            Domain::Line => LineSet::full().into(),
            Domain::Circle => CircleSet::full().into(),
            Domain::Naturals => NatSet::full().into(),
        }
    }

    pub fn empty(domain: Domain) -> Self {
        match domain {
            Domain::Line => LineSet::empty().into(),
            Domain::Circle => CircleSet::empty().into(),
            Domain::Naturals => NatSet::empty().into(),
        }
    }

    /// Singleton probe. On the naturals this is the ordinary set `{n}`.
    pub fn point(domain: Domain, at: f64) -> Result<Self> {
        match domain {
            Domain::Line => Ok(MeasurableSet::Point { domain, at }),
            Domain::Circle => Ok(MeasurableSet::Point {
                domain,
                at: reduce_angle(at),
            }),
            Domain::Naturals => {
                if at < 0.0 || at.fract() != 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "{at} is not a natural number"
                    )));
                }
                Ok(NatSet::singleton(at as u64).into())
            }
        }
    }

    pub fn is_point(&self) -> bool {
        matches!(self, MeasurableSet::Point { .. })
    }

    pub fn is_empty(&self) -> bool {
        match self {
            MeasurableSet::Line(s) => s.is_empty(),
            MeasurableSet::Circle(s) => s.is_empty(),
            MeasurableSet::Nat(s) => s.is_empty(),
            MeasurableSet::Point { .. } => false,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        match self {
            MeasurableSet::Line(s) => s.contains(x),
            MeasurableSet::Circle(s) => s.contains(x),
            MeasurableSet::Nat(s) => x >= 0.0 && x.fract() == 0.0 && s.contains(x as u64),
            MeasurableSet::Point { domain, at } => match domain {
                Domain::Circle => reduce_angle(x) == *at,
                _ => x == *at,
            },
        }
    }

    fn mismatch(&self, other: &Self) -> Error {
        Error::DomainMismatch {
            left: self.domain(),
            right: other.domain(),
        }
    }

    fn point_error(&self) -> Error {
        Error::InvalidParameter(format!(
            "set algebra is not defined on the singleton probe {self}"
        ))
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        use MeasurableSet::*;
        match (self, other) {
            (Line(a), Line(b)) => Ok(Line(a.union(b))),
            (Circle(a), Circle(b)) => Ok(Circle(a.union(b))),
            (Nat(a), Nat(b)) => Ok(Nat(a.union(b))),
            _ if self.domain() != other.domain() => Err(self.mismatch(other)),
            _ => Err(if self.is_point() { self } else { other }.point_error()),
        }
    }

    pub fn intersection(&self, other: &Self) -> Result<Self> {
        use MeasurableSet::*;
        match (self, other) {
            (Line(a), Line(b)) => Ok(Line(a.intersection(b))),
            (Circle(a), Circle(b)) => Ok(Circle(a.intersection(b))),
            (Nat(a), Nat(b)) => Ok(Nat(a.intersection(b))),
            _ if self.domain() != other.domain() => Err(self.mismatch(other)),
            _ => Err(if self.is_point() { self } else { other }.point_error()),
        }
    }

    pub fn difference(&self, other: &Self) -> Result<Self> {
        use MeasurableSet::*;
        match (self, other) {
            (Line(a), Line(b)) => Ok(Line(a.difference(b))),
            (Circle(a), Circle(b)) => Ok(Circle(a.difference(b))),
            (Nat(a), Nat(b)) => Ok(Nat(a.difference(b))),
            _ if self.domain() != other.domain() => Err(self.mismatch(other)),
            _ => Err(if self.is_point() { self } else { other }.point_error()),
        }
    }

    pub fn complement(&self) -> Result<Self> {
        match self {
            MeasurableSet::Line(a) => Ok(a.complement().into()),
            MeasurableSet::Circle(a) => Ok(a.complement().into()),
            MeasurableSet::Nat(a) => Ok(a.complement().into()),
            MeasurableSet::Point { .. } => Err(self.point_error()),
        }
    }

    /// `self ⊆ other`. A probe `{x}` is contained in `other` iff `x` is.
    pub fn is_subset(&self, other: &Self) -> Result<bool> {
        if self.domain() != other.domain() {
            return Err(self.mismatch(other));
        }
        match (self, other) {
            (MeasurableSet::Point { at, .. }, _) => match other {
                MeasurableSet::Point { at: b, .. } => Ok(at == b),
                _ => Ok(other.contains(*at)),
            },
            (_, MeasurableSet::Point { .. }) => Ok(self.is_empty()),
            _ => Ok(self.difference(other)?.is_empty()),
        }
    }

    pub fn is_disjoint(&self, other: &Self) -> Result<bool> {
        if self.domain() != other.domain() {
            return Err(self.mismatch(other));
        }
        match (self, other) {
            (MeasurableSet::Point { at, .. }, o) | (o, MeasurableSet::Point { at, .. }) => {
                Ok(!o.contains(*at))
            }
            _ => Ok(self.intersection(other)?.is_empty()),
        }
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        use MeasurableSet::*;
        match (self, other) {
            (Line(a), Line(b)) => a.approx_eq(b, tol),
            (Circle(a), Circle(b)) => a.approx_eq(b, tol),
            (Nat(a), Nat(b)) => a == b,
            (Point { domain: d1, at: a }, Point { domain: d2, at: b }) => {
                d1 == d2 && (a - b).abs() <= tol
            }
            _ => false,
        }
    }
}

impl From<LineSet> for MeasurableSet {
    fn from(s: LineSet) -> Self {
        MeasurableSet::Line(s)
    }
}

impl From<CircleSet> for MeasurableSet {
    fn from(s: CircleSet) -> Self {
        MeasurableSet::Circle(s)
    }
}

impl From<NatSet> for MeasurableSet {
    fn from(s: NatSet) -> Self {
        MeasurableSet::Nat(s)
    }
}

impl fmt::Display for MeasurableSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasurableSet::Line(s) => s.fmt(f),
            MeasurableSet::Circle(s) => s.fmt(f),
            MeasurableSet::Nat(s) => s.fmt(f),
            MeasurableSet::Point { domain, at } => {
                if *domain == Domain::Circle {
                    f.write_str("circ:")?;
                }
                f.write_str("{")?;
                write_number(f, *at)?;
                f.write_str("}")
            }
        }
    }
}

/// Disjoint decomposition `Δ = ∪ Δ_j` helper: checks that cells are pairwise
/// disjoint and that they cover the whole domain.
pub fn check_partition(cells: &[MeasurableSet]) -> Result<Domain> {
    let first = cells
        .first()
        .ok_or_else(|| Error::Empty("partition has no cells".into()))?;
    let domain = first.domain();
    for (i, a) in cells.iter().enumerate() {
        if a.domain() != domain {
            return Err(a.mismatch(first));
        }
        for (j, b) in cells.iter().enumerate().skip(i + 1) {
            if !a.is_disjoint(b)? {
                return Err(Error::NonDisjointPartition {
                    first: i,
                    second: j,
                });
            }
        }
    }
    let mut covered = MeasurableSet::empty(domain);
    for c in cells.iter().filter(|c| !c.is_point()) {
        covered = covered.union(c)?;
    }
    if !covered.complement()?.is_empty() {
        return Err(Error::NotACover(domain));
    }
    Ok(domain)
}

// ---------------------------------------------------------------- parsing

fn parse_number(input: &str, token: &str) -> Result<f64> {
    let t = token.trim();
    match t {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => t
            .parse::<f64>()
            .map_err(|_| Error::parse(input, format!("bad number {t:?}"))),
    }
}

fn split_union(body: &str) -> Vec<&str> {
    body.split(['∪', 'U'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

fn parse_pieces(input: &str, body: &str) -> Result<Vec<(f64, f64)>> {
    let mut raw = Vec::new();
    for piece in split_union(body) {
        let open = piece.chars().next().unwrap();
        if !piece.ends_with(')') || !(open == '[' || open == '(') {
            return Err(Error::parse(
                input,
                format!("piece {piece:?} must have the form [a,b)"),
            ));
        }
        let inner = &piece[open.len_utf8()..piece.len() - 1];
        let (a, b) = inner
            .split_once(',')
            .ok_or_else(|| Error::parse(input, format!("piece {piece:?} lacks a comma")))?;
        let lo = parse_number(input, a)?;
        let hi = parse_number(input, b)?;
        if open == '(' && lo != f64::NEG_INFINITY {
            return Err(Error::parse(
                input,
                "only -inf may use an open left bracket (pieces are half-open [a,b))",
            ));
        }
        raw.push((lo, hi));
    }
    Ok(raw)
}

fn parse_nat_list(input: &str, body: &str) -> Result<Vec<u64>> {
    let inner = body
        .strip_prefix('{')
        .and_then(|b| b.strip_suffix('}'))
        .ok_or_else(|| Error::parse(input, "expected {..}"))?;
    let mut out = Vec::new();
    for tok in inner.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        out.push(
            tok.parse::<u64>()
                .map_err(|_| Error::parse(input, format!("bad natural {tok:?}")))?,
        );
    }
    let sorted = sorted_members(out.iter().copied());
    if sorted.len() != out.len() {
        return Err(Error::parse(input, "duplicate members"));
    }
    Ok(sorted)
}

fn parse_point(input: &str, body: &str) -> Option<Result<f64>> {
    let inner = body.strip_prefix('{')?.strip_suffix('}')?;
    Some(parse_number(input, inner))
}

impl FromStr for MeasurableSet {
    type Err = Error;

    /// Text syntax: `[0,1)∪[2,inf)`, `(-inf,0)`, `R`, `∅`, `{0.5}`,
    /// `circ:[0,3.14)`, `circ:full`, `circ:{1}`, `nat:{0,1,2}`, `nat:co{0}`.
    fn from_str(input: &str) -> Result<Self> {
        let s = input.trim();
        if let Some(body) = s.strip_prefix("nat:") {
            let body = body.trim();
            return Ok(match body.strip_prefix("co") {
                Some(rest) => NatSet::Cofinite(parse_nat_list(input, rest.trim())?),
                None => NatSet::Finite(parse_nat_list(input, body)?),
            }
            .into());
        }
        if let Some(body) = s.strip_prefix("circ:") {
            let body = body.trim();
            if let Some(at) = parse_point(input, body) {
                return MeasurableSet::point(Domain::Circle, at?);
            }
            return Ok(match body {
                "∅" | "" => CircleSet::empty(),
                "full" => CircleSet::full(),
                _ => CircleSet::from_arcs(&parse_pieces(input, body)?)?,
            }
            .into());
        }
        if let Some(at) = parse_point(input, s) {
            if s != "{}" {
                return MeasurableSet::point(Domain::Line, at?);
            }
        }
        Ok(match s {
            "∅" | "{}" => LineSet::empty(),
            "R" | "ℝ" => LineSet::full(),
            _ => LineSet::from_intervals(&parse_pieces(input, s)?)?,
        }
        .into())
    }
}

// ------------------------------------------------------ reference measures

/// Reference measure ν for absolute-continuity fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReferenceMeasure {
    LebesgueLine,
    LebesgueCircle,
    Counting,
    /// `ν(Δ) = scale · |Δ ∩ [lo, hi]|`.
    WeightedRestricted { scale: f64, lo: f64, hi: f64 },
}

impl ReferenceMeasure {
    pub fn domain(&self) -> Domain {
        match self {
            ReferenceMeasure::LebesgueLine | ReferenceMeasure::WeightedRestricted { .. } => {
                Domain::Line
            }
            ReferenceMeasure::LebesgueCircle => Domain::Circle,
            ReferenceMeasure::Counting => Domain::Naturals,
        }
    }

    pub fn weighted(scale: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(scale >= 0.0 && scale.is_finite()) || !(lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "weighted measure needs scale >= 0 and lo < hi, got {scale}, [{lo},{hi}]"
            )));
        }
        Ok(ReferenceMeasure::WeightedRestricted { scale, lo, hi })
    }

    /// ν(Δ); may be `+inf`.
    pub fn measure(&self, set: &MeasurableSet) -> Result<f64> {
        if set.domain() != self.domain() {
            return Err(Error::DomainMismatch {
                left: self.domain(),
                right: set.domain(),
            });
        }
        Ok(match (self, set) {
            (_, MeasurableSet::Point { .. }) => 0.0,
            (ReferenceMeasure::LebesgueLine, MeasurableSet::Line(s)) => s.lebesgue(),
            (ReferenceMeasure::LebesgueCircle, MeasurableSet::Circle(s)) => s.length(),
            (ReferenceMeasure::Counting, MeasurableSet::Nat(s)) => s.count(),
            (ReferenceMeasure::WeightedRestricted { scale, lo, hi }, MeasurableSet::Line(s)) => {
                // closed vs half-open window differ by a null set
                let window = LineSet::interval(*lo, *hi)?;
                scale * s.intersection(&window).lebesgue()
            }
            _ => unreachable!("domains checked above"),
        })
    }

    /// ν of the whole domain.
    pub fn is_finite(&self) -> bool {
        matches!(self, ReferenceMeasure::LebesgueCircle | ReferenceMeasure::WeightedRestricted { .. })
    }
}

impl FromStr for ReferenceMeasure {
    type Err = Error;

    /// `lebesgue-line`, `lebesgue-circle`, `counting`, `weighted:scale=1.5,lo=-1,hi=1`.
    fn from_str(input: &str) -> Result<Self> {
        let (name, params) = crate::spec::split_spec(input)?;
        let nu = match name {
            "lebesgue-line" => ReferenceMeasure::LebesgueLine,
            "lebesgue-circle" => ReferenceMeasure::LebesgueCircle,
            "counting" => ReferenceMeasure::Counting,
            "weighted" => ReferenceMeasure::weighted(
                params.float_or("scale", 1.5)?,
                params.float_or("lo", -1.0)?,
                params.float_or("hi", 1.0)?,
            )?,
            other => return Err(Error::parse(input, format!("unknown reference measure {other:?}"))),
        };
        params.finish(input)?;
        Ok(nu)
    }
}

// ------------------------------------------------------------- families

/// Canonical monotone families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ShrinkingKind {
    /// `[start, start + width/i)`; the open ideal members `(start, start + width/i)` decrease to ∅.
    NestedInterval { start: f64, width: f64 },
    /// `(-inf, first - step·(i-1))`, decreasing to ∅.
    EscapingHalfline { first: f64, step: f64 },
    /// `{m : m > offset + i - 1}`, decreasing to ∅.
    NatTail { offset: u64 },
    /// Arc `[start, start + length/i)`.
    ShrinkingArc { start: f64, length: f64 },
    /// `[center - radius/i, center + radius/i)`, decreasing to `{center}`.
    AroundPoint { center: f64, radius: f64 },
}

impl ShrinkingKind {
    /// Whether the ideal intersection of all members is empty.
    pub fn shrinks_to_empty(&self) -> bool {
        !matches!(self, ShrinkingKind::AroundPoint { .. })
    }

    pub fn domain(&self) -> Domain {
        match self {
            ShrinkingKind::NatTail { .. } => Domain::Naturals,
            ShrinkingKind::ShrinkingArc { .. } => Domain::Circle,
            _ => Domain::Line,
        }
    }
}

impl FromStr for ShrinkingKind {
    type Err = Error;

    /// `nested-interval[:start=0,width=1]`, `escaping-halfline[:first=-1,step=1]`,
    /// `nat-tail[:offset=1]`, `shrinking-arc[:start=0,length=3.14159]`,
    /// `around-point[:center=0,radius=1]`.
    fn from_str(input: &str) -> Result<Self> {
        let (name, params) = crate::spec::split_spec(input)?;
        let kind = match name {
            "nested-interval" => ShrinkingKind::NestedInterval {
                start: params.float_or("start", 0.0)?,
                width: params.float_or("width", 1.0)?,
            },
            "escaping-halfline" => ShrinkingKind::EscapingHalfline {
                first: params.float_or("first", -1.0)?,
                step: params.float_or("step", 1.0)?,
            },
            "nat-tail" => ShrinkingKind::NatTail {
                offset: params.uint_or("offset", 1)?,
            },
            "shrinking-arc" => ShrinkingKind::ShrinkingArc {
                start: params.float_or("start", 0.0)?,
                length: params.float_or("length", std::f64::consts::PI)?,
            },
            "around-point" => ShrinkingKind::AroundPoint {
                center: params.float_or("center", 0.0)?,
                radius: params.float_or("radius", 1.0)?,
            },
            other => {
                return Err(Error::parse(input, format!("unknown family kind {other:?}")))
            }
        };
        params.finish(input)?;
        Ok(kind)
    }
}

/// Members `Δ_1 ⊇ Δ_2 ⊇ ... ⊇ Δ_count`.
pub fn shrinking_family(kind: ShrinkingKind, count: usize) -> Result<Vec<MeasurableSet>> {
    if count == 0 {
        return Err(Error::InvalidParameter("family count must be >= 1".into()));
    }
    let positive = |name: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
        }
    };
    match kind {
        ShrinkingKind::NestedInterval { width, .. } => positive("width", width)?,
        ShrinkingKind::EscapingHalfline { step, .. } => positive("step", step)?,
        ShrinkingKind::ShrinkingArc { length, .. } => positive("length", length)?,
        ShrinkingKind::AroundPoint { radius, .. } => positive("radius", radius)?,
        ShrinkingKind::NatTail { .. } => {}
    }
    (1..=count)
        .map(|i| {
            let k = i as f64;
            Ok(match kind {
                ShrinkingKind::NestedInterval { start, width } => {
                    LineSet::interval(start, start + width / k)?.into()
                }
                ShrinkingKind::EscapingHalfline { first, step } => {
                    LineSet::below(first - step * (k - 1.0))?.into()
                }
                ShrinkingKind::NatTail { offset } => {
                    NatSet::tail_after(offset + i as u64 - 1).into()
                }
                ShrinkingKind::ShrinkingArc { start, length } => {
                    let len = (length / k).min(TAU);
                    let mut arcs = Vec::new();
                    place_arc(start, len, &mut arcs);
                    CircleSet {
                        arcs: merge_sorted(arcs),
                    }
                    .into()
                }
                ShrinkingKind::AroundPoint { center, radius } => {
                    LineSet::interval(center - radius / k, center + radius / k)?.into()
                }
            })
        })
        .collect()
}

/// `[lo, hi - (hi - lo)/(i + 1))`, increasing to `[lo, hi)`.
pub fn growing_interval(lo: f64, hi: f64, count: usize) -> Result<Vec<MeasurableSet>> {
    if !(lo < hi && lo.is_finite() && hi.is_finite()) || count == 0 {
        return Err(Error::InvalidParameter(format!(
            "growing family needs a finite interval and count >= 1, got [{lo},{hi}), {count}"
        )));
    }
    (1..=count)
        .map(|i| Ok(LineSet::interval(lo, hi - (hi - lo) / (i as f64 + 1.0))?.into()))
        .collect()
}

/// Rotation on circle sets; the identity elsewhere is a domain error.
pub fn shift_circle(set: &CircleSet, theta: f64) -> CircleSet {
    set.shift(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn line(s: &str) -> MeasurableSet {
        s.parse().unwrap()
    }

    #[test]
    fn adjacent_and_absorbed_pieces_merge() {
        let a = LineSet::from_intervals(&[(0.0, 1.0), (1.0, 2.0)]).unwrap();
        assert_eq!(a.intervals(), &[Interval { lo: 0.0, hi: 2.0 }]);
        let b = LineSet::from_intervals(&[(0.0, 3.0), (1.0, 2.0)]).unwrap();
        assert_eq!(b.intervals(), &[Interval { lo: 0.0, hi: 3.0 }]);
    }

    #[test]
    fn malformed_piece_reports_index() {
        let err = LineSet::from_intervals(&[(0.0, 1.0), (2.0, 2.0)]).unwrap_err();
        assert_eq!(
            err,
            Error::MalformedPiece {
                index: 1,
                lo: 2.0,
                hi: 2.0
            }
        );
        assert!(LineSet::from_intervals(&[(3.0, 1.0)]).is_err());
    }

    #[test]
    fn wrapping_arc_splits_at_zero() {
        let c = CircleSet::arc(1.5 * PI, 0.5 * PI).unwrap();
        assert_eq!(c.arcs().len(), 2);
        assert_eq!(c.arcs()[0], Interval { lo: 0.0, hi: 0.5 * PI });
        assert_eq!(c.arcs()[1], Interval { lo: 1.5 * PI, hi: TAU });
        assert!((c.length() - PI).abs() < 1e-15);
    }

    #[test]
    fn basic_set_ops() {
        let a = LineSet::interval(0.0, 2.0).unwrap();
        let b = LineSet::interval(1.0, 3.0).unwrap();
        assert_eq!(a.intersection(&b), LineSet::interval(1.0, 2.0).unwrap());
        let c = CircleSet::arc(0.0, PI).unwrap();
        assert_eq!(c.complement(), CircleSet::arc(PI, TAU).unwrap());
        let n = NatSet::finite([0, 1]);
        assert_eq!(n.complement(), NatSet::Cofinite(vec![0, 1]));
    }

    #[test]
    fn mixed_domains_rejected() {
        let a = line("[0,1)");
        let b: MeasurableSet = "nat:{1}".parse().unwrap();
        assert!(matches!(a.union(&b), Err(Error::DomainMismatch { .. })));
    }

    #[test]
    fn measures() {
        assert_eq!(
            ReferenceMeasure::LebesgueLine
                .measure(&line("[0,1)∪[2,4)"))
                .unwrap(),
            3.0
        );
        let nu = ReferenceMeasure::weighted(1.5, -1.0, 1.0).unwrap();
        assert_eq!(nu.measure(&line("[0,3)")).unwrap(), 1.5);
        assert_eq!(
            ReferenceMeasure::LebesgueLine
                .measure(&line("(-inf,0)"))
                .unwrap(),
            f64::INFINITY
        );
        assert_eq!(
            ReferenceMeasure::Counting
                .measure(&"nat:co{0}".parse().unwrap())
                .unwrap(),
            f64::INFINITY
        );
        assert_eq!(
            ReferenceMeasure::LebesgueLine
                .measure(&line("{2}"))
                .unwrap(),
            0.0
        );
        assert!(ReferenceMeasure::Counting.measure(&line("[0,1)")).is_err());
    }

    #[test]
    fn families() {
        let f = shrinking_family(
            ShrinkingKind::NestedInterval {
                start: 0.0,
                width: 1.0,
            },
            3,
        )
        .unwrap();
        assert_eq!(f[2], line(&format!("[0,{})", 1.0 / 3.0)));
        let h = shrinking_family(
            ShrinkingKind::EscapingHalfline {
                first: -1.0,
                step: 1.0,
            },
            3,
        )
        .unwrap();
        assert_eq!(h, vec![line("(-inf,-1)"), line("(-inf,-2)"), line("(-inf,-3)")]);
        let t = shrinking_family(ShrinkingKind::NatTail { offset: 1 }, 3).unwrap();
        assert_eq!(t[0], NatSet::Cofinite(vec![0, 1]).into());
        assert_eq!(t[2], NatSet::Cofinite(vec![0, 1, 2, 3]).into());
        assert!(shrinking_family(ShrinkingKind::NatTail { offset: 0 }, 0).is_err());
        assert!("spiral".parse::<ShrinkingKind>().is_err());
        assert_eq!(
            "escaping-halfline:first=-1,step=1".parse::<ShrinkingKind>().unwrap(),
            ShrinkingKind::EscapingHalfline {
                first: -1.0,
                step: 1.0
            }
        );
    }

    #[test]
    fn circle_shifts() {
        let c = CircleSet::arc(0.0, PI).unwrap();
        assert!(c.shift(PI).approx_eq(&CircleSet::arc(PI, TAU).unwrap(), 1e-12));
        let w = c.shift(1.5 * PI);
        let expect = CircleSet::from_arcs(&[(1.5 * PI, TAU), (0.0, 0.5 * PI)]).unwrap();
        assert!(w.approx_eq(&expect, 1e-12), "{w}");
        assert_eq!(c.shift(0.0), c);
    }

    #[test]
    fn text_syntax() {
        for s in [
            "[0,1)∪[2,inf)",
            "(-inf,0)",
            "circ:[0,3.14)",
            "nat:{0,1,2}",
            "nat:co{0}",
            "{0.5}",
            "circ:{1}",
            "∅",
            "(-inf,inf)",
        ] {
            let set: MeasurableSet = s.parse().unwrap();
            assert_eq!(set.to_string(), s);
        }
        assert_eq!(line("R"), LineSet::full().into());
        assert!("[0,1]".parse::<MeasurableSet>().is_err());
        assert!("(0,1)".parse::<MeasurableSet>().is_err());
        assert!("nat:{1,1}".parse::<MeasurableSet>().is_err());
    }

    #[test]
    fn partition_checks() {
        let cells: Vec<MeasurableSet> =
            vec![line("(-inf,0)"), line("[0,1)"), line("[1,inf)")];
        assert_eq!(check_partition(&cells).unwrap(), Domain::Line);
        let overlap = vec![line("(-inf,0.5)"), line("[0,inf)")];
        assert!(matches!(
            check_partition(&overlap),
            Err(Error::NonDisjointPartition { first: 0, second: 1 })
        ));
        let gap = vec![line("(-inf,0)"), line("[1,inf)")];
        assert!(matches!(check_partition(&gap), Err(Error::NotACover(_))));
    }

    #[test]
    fn reference_measure_strings() {
        assert_eq!("counting".parse::<ReferenceMeasure>().unwrap(), ReferenceMeasure::Counting);
        assert_eq!(
            "weighted:scale=2,lo=0,hi=1".parse::<ReferenceMeasure>().unwrap(),
            ReferenceMeasure::WeightedRestricted { scale: 2.0, lo: 0.0, hi: 1.0 }
        );
        assert!("weighted:lo=1,hi=0".parse::<ReferenceMeasure>().is_err());
        assert!("lebesgue".parse::<ReferenceMeasure>().is_err());
    }
}
