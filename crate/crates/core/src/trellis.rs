//! Syndrome trellises over the partial OR syndrome.
//!
//! Depth `l` of the trellis holds the partial syndromes reachable after the
//! first `l` elements have been assigned. Element `l` moves a state `s` to
//! `s` (label 0) or to `s | a_l` (label 1). When `a_l` is already covered by
//! `s`, both edges land on `s` and are kept as two distinct parallel edges.
//!
//! Three shapes are built:
//! * the complete trellis, spelling every defectivity vector,
//! * the expurgated trellis, keeping only paths that end at an observed
//!   noiseless syndrome,
//! * the reduced trellis, which drops the zero tests and every element they
//!   cover before building and expurgating.
//!
//! # Dump format
//!
//! [`Trellis::write_dump`] emits `#`-prefixed header lines followed by one
//! `depth src dst label` line per edge, sections in increasing depth and
//! edges in construction order. `depth` is one-based; `src` lives at
//! `depth - 1` and `dst` at `depth`.

use std::collections::HashMap;
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::model::{DefectivityVector, TestMatrix, TestVector};

/// Default cap on the number of tests spanned by a trellis state word.
pub const DEFAULT_MAX_TESTS: usize = 24;

/// Up to this many tests the state lookup is a dense array.
const DENSE_STATE_BITS: usize = 16;

/// Hard limit on [`enumerate_paths`] output.
pub const MAX_ENUMERATED_PATHS: u128 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    /// Source state index at depth `l - 1`.
    pub from: u32,
    /// Destination state index at depth `l`.
    pub to: u32,
    /// Value of the element spelled by this edge.
    pub label: bool,
    pub(crate) from_pos: u32,
    pub(crate) to_pos: u32,
}

impl Edge {
    /// Position of the source state within [`Trellis::states`] at depth `l - 1`.
    pub fn from_pos(&self) -> usize {
        self.from_pos as usize
    }

    /// Position of the destination state within [`Trellis::states`] at depth `l`.
    pub fn to_pos(&self) -> usize {
        self.to_pos as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeSection {
    depth: usize,
    edges: Vec<Edge>,
}

impl EdgeSection {
    /// One-based depth of the section.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edges_with_label(&self, label: bool) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.label == label)
    }
}

/// Bookkeeping for a reduced trellis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reduction {
    /// Observed test vector the reduction was built for.
    pub test_vector: TestVector,
    /// Number of positive tests.
    pub m0: usize,
    /// Number of kept elements (sections).
    pub n0: usize,
    /// Zero-based rows of the positive tests, in order; row `rows[j]` maps to
    /// reduced state bit `j`.
    pub rows: Vec<usize>,
    /// Zero-based elements that only take part in positive tests.
    pub kept_elements: Vec<usize>,
    /// Zero-based elements that take part in at least one negative test.
    pub zero_covered_elements: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrellisKind {
    Complete,
    Expurgated { final_state: u32 },
    Reduced(Reduction),
}

impl TrellisKind {
    pub fn name(&self) -> &'static str {
        match self {
            TrellisKind::Complete => "complete",
            TrellisKind::Expurgated { .. } => "expurgated",
            TrellisKind::Reduced(_) => "reduced",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trellis {
    m: usize,
    population: usize,
    elements: Vec<usize>,
    masks: Vec<u32>,
    states: Vec<Vec<u32>>,
    sections: Vec<EdgeSection>,
    kind: TrellisKind,
}

enum StateIndex {
    Dense(Vec<u32>),
    Sparse(HashMap<u32, u32>),
}

impl StateIndex {
    fn new(m: usize) -> Self {
        if m <= DENSE_STATE_BITS {
            StateIndex::Dense(vec![u32::MAX; 1 << m])
        } else {
            StateIndex::Sparse(HashMap::new())
        }
    }

    fn load(&mut self, states: &[u32]) {
        match self {
            StateIndex::Dense(v) => {
                for (pos, &s) in states.iter().enumerate() {
                    v[s as usize] = pos as u32;
                }
            }
            StateIndex::Sparse(map) => {
                map.clear();
                map.extend(states.iter().enumerate().map(|(p, &s)| (s, p as u32)));
            }
        }
    }

    fn unload(&mut self, states: &[u32]) {
        if let StateIndex::Dense(v) = self {
            for &s in states {
                v[s as usize] = u32::MAX;
            }
        }
    }

    fn pos(&self, state: u32) -> u32 {
        match self {
            StateIndex::Dense(v) => v[state as usize],
            StateIndex::Sparse(map) => map[&state],
        }
    }
}

fn check_width(m: usize, cap: usize) -> Result<()> {
    if m > cap.min(32) {
        return Err(Error::TooManyTests { m, cap });
    }
    Ok(())
}

/// Builds the complete trellis layers for `m`-bit states and the given
/// per-section column masks.
fn complete_layers(m: usize, masks: &[u32]) -> (Vec<Vec<u32>>, Vec<EdgeSection>) {
    let mut states = Vec::with_capacity(masks.len() + 1);
    let mut sections = Vec::with_capacity(masks.len());
    states.push(vec![0u32]);
    let mut prev_index = StateIndex::new(m);
    let mut next_index = StateIndex::new(m);
    prev_index.load(&states[0]);

    for (l, &mask) in masks.iter().enumerate() {
        let prev = &states[l];
        let mut next: Vec<u32> = prev.iter().flat_map(|&s| [s, s | mask]).collect();
        next.sort_unstable();
        next.dedup();
        next_index.load(&next);

        let mut edges = Vec::with_capacity(2 * prev.len());
        for (p, &s) in prev.iter().enumerate() {
            for (label, to) in [(false, s), (true, s | mask)] {
                edges.push(Edge {
                    from: s,
                    to,
                    label,
                    from_pos: p as u32,
                    to_pos: next_index.pos(to),
                });
            }
        }
        sections.push(EdgeSection {
            depth: l + 1,
            edges,
        });
        prev_index.unload(prev);
        std::mem::swap(&mut prev_index, &mut next_index);
        states.push(next);
    }
    (states, sections)
}

/// Keeps only states that lie on a path from state 0 at depth 0 to a state
/// marked in `terminal` (positions at the last depth).
fn prune(
    states: &[Vec<u32>],
    sections: &[EdgeSection],
    terminal: Vec<bool>,
) -> (Vec<Vec<u32>>, Vec<EdgeSection>) {
    let n = sections.len();

    // backward reachability
    let mut alive: Vec<Vec<bool>> = states.iter().map(|d| vec![false; d.len()]).collect();
    alive[n] = terminal;
    for l in (1..=n).rev() {
        let (head, tail) = alive.split_at_mut(l);
        for e in &sections[l - 1].edges {
            if tail[0][e.to_pos()] {
                head[l - 1][e.from_pos()] = true;
            }
        }
    }

    // forward reachability through alive states
    let mut keep: Vec<Vec<bool>> = states.iter().map(|d| vec![false; d.len()]).collect();
    keep[0] = alive[0].clone();
    for l in 1..=n {
        let (head, tail) = keep.split_at_mut(l);
        for e in &sections[l - 1].edges {
            if head[l - 1][e.from_pos()] && alive[l][e.to_pos()] {
                tail[0][e.to_pos()] = true;
            }
        }
    }

    let mut remap: Vec<Vec<u32>> = Vec::with_capacity(n + 1);
    let mut new_states = Vec::with_capacity(n + 1);
    for (depth, kept) in states.iter().zip(&keep) {
        let mut map = vec![u32::MAX; depth.len()];
        let mut list = Vec::new();
        for (pos, (&s, &k)) in depth.iter().zip(kept).enumerate() {
            if k {
                map[pos] = list.len() as u32;
                list.push(s);
            }
        }
        remap.push(map);
        new_states.push(list);
    }

    let new_sections = sections
        .iter()
        .enumerate()
        .map(|(idx, sec)| EdgeSection {
            depth: sec.depth,
            edges: sec
                .edges
                .iter()
                .filter(|e| keep[idx][e.from_pos()] && keep[idx + 1][e.to_pos()])
                .map(|e| Edge {
                    from_pos: remap[idx][e.from_pos()],
                    to_pos: remap[idx + 1][e.to_pos()],
                    ..*e
                })
                .collect(),
        })
        .collect();
    (new_states, new_sections)
}

/// Packs the bits of `word` selected by `select` into the low bits, in order.
fn extract_bits(word: u64, select: &[usize]) -> u32 {
    select
        .iter()
        .enumerate()
        .fold(0u32, |acc, (j, &i)| acc | ((((word >> i) & 1) as u32) << j))
}

impl Trellis {
    /// Builds the complete trellis of `a` with the default width cap.
    pub fn complete(a: &TestMatrix) -> Result<Trellis> {
        Trellis::complete_with_cap(a, DEFAULT_MAX_TESTS)
    }

    pub fn complete_with_cap(a: &TestMatrix, max_tests: usize) -> Result<Trellis> {
        check_width(a.m(), max_tests)?;
        let masks: Vec<u32> = a.column_masks().iter().map(|&c| c as u32).collect();
        let (states, sections) = complete_layers(a.m(), &masks);
        Ok(Trellis {
            m: a.m(),
            population: a.n(),
            elements: (0..a.n()).collect(),
            masks,
            states,
            sections,
            kind: TrellisKind::Complete,
        })
    }

    /// Expurgates a complete trellis to the paths ending at `[t]_D`.
    pub fn expurgate(&self, t: &TestVector) -> Result<Trellis> {
        if self.kind != TrellisKind::Complete {
            return Err(Error::param(
                "trellis",
                format!("expurgation needs a complete trellis, got {}", self.kind.name()),
            ));
        }
        if t.len() != self.m {
            return Err(Error::DimensionMismatch {
                what: "test vector",
                expected: self.m,
                found: t.len(),
            });
        }
        let final_state = t.word() as u32;
        let last = &self.states[self.n()];
        let terminal: Vec<bool> = last.iter().map(|&s| s == final_state).collect();
        if !terminal.contains(&true) {
            return Err(Error::NotASyndrome(t.to_string()));
        }
        let (states, sections) = prune(&self.states, &self.sections, terminal);
        Ok(Trellis {
            m: self.m,
            population: self.population,
            elements: self.elements.clone(),
            masks: self.masks.clone(),
            states,
            sections,
            kind: TrellisKind::Expurgated { final_state },
        })
    }

    /// Builds the reduced trellis for a noiseless observation `t`.
    pub fn reduced(a: &TestMatrix, t: &TestVector) -> Result<Trellis> {
        Trellis::reduced_with_cap(a, t, DEFAULT_MAX_TESTS)
    }

    pub fn reduced_with_cap(a: &TestMatrix, t: &TestVector, max_tests: usize) -> Result<Trellis> {
        if t.len() != a.m() {
            return Err(Error::DimensionMismatch {
                what: "test vector",
                expected: a.m(),
                found: t.len(),
            });
        }
        let rows: Vec<usize> = (0..a.m()).filter(|&i| t.get(i)).collect();
        let m0 = rows.len();
        check_width(m0, max_tests)?;

        let mut kept = Vec::new();
        let mut zero_covered = Vec::new();
        let mut masks = Vec::new();
        for (l, &col) in a.column_masks().iter().enumerate() {
            if col & !t.word() != 0 {
                zero_covered.push(l);
            } else {
                kept.push(l);
                masks.push(extract_bits(col, &rows));
            }
        }

        let (states, sections) = complete_layers(m0, &masks);
        let full = if m0 == 0 { 0 } else { u32::MAX >> (32 - m0) };
        let terminal: Vec<bool> = states[kept.len()].iter().map(|&s| s == full).collect();
        if !terminal.contains(&true) {
            return Err(Error::NotASyndrome(t.to_string()));
        }
        let (states, sections) = prune(&states, &sections, terminal);
        Ok(Trellis {
            m: m0,
            population: a.n(),
            elements: kept.clone(),
            masks,
            states,
            sections,
            kind: TrellisKind::Reduced(Reduction {
                test_vector: *t,
                m0,
                n0: kept.len(),
                rows,
                kept_elements: kept,
                zero_covered_elements: zero_covered,
            }),
        })
    }

    /// Number of tests spanned by the state word.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of sections.
    pub fn n(&self) -> usize {
        self.sections.len()
    }

    /// Size of the population the trellis describes; exceeds [`Trellis::n`]
    /// for reduced trellises.
    pub fn population(&self) -> usize {
        self.population
    }

    /// Population element spelled by each section.
    pub fn elements(&self) -> &[usize] {
        &self.elements
    }

    /// Column mask used by each section (restricted to positive tests for a
    /// reduced trellis).
    pub fn section_masks(&self) -> &[u32] {
        &self.masks
    }

    pub fn kind(&self) -> &TrellisKind {
        &self.kind
    }

    /// Active states at `depth` in increasing order.
    pub fn states(&self, depth: usize) -> &[u32] {
        &self.states[depth]
    }

    pub fn sections(&self) -> &[EdgeSection] {
        &self.sections
    }

    /// Section at one-based `depth`.
    pub fn section(&self, depth: usize) -> &EdgeSection {
        &self.sections[depth - 1]
    }

    pub fn edge_count(&self) -> usize {
        self.sections.iter().map(|s| s.edges.len()).sum()
    }

    pub fn max_states(&self) -> usize {
        self.states.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Maps a label path (one bit per section) back onto the population.
    /// Elements without a section are set to 0.
    pub fn lift(&self, path: &DefectivityVector) -> DefectivityVector {
        let mut x = DefectivityVector::zeros(self.population);
        for (sec, &l) in self.elements.iter().enumerate() {
            x.set(l, path.get(sec));
        }
        x
    }

    /// Number of label paths from depth 0 to depth `n`, saturating.
    pub fn path_count(&self) -> u128 {
        let mut counts = vec![1u128; self.states[0].len()];
        for (l, sec) in self.sections.iter().enumerate() {
            let mut next = vec![0u128; self.states[l + 1].len()];
            for e in &sec.edges {
                next[e.to_pos()] = next[e.to_pos()].saturating_add(counts[e.from_pos()]);
            }
            counts = next;
        }
        counts.into_iter().fold(0u128, u128::saturating_add)
    }

    /// Checks the structural invariants, returning a description of the
    /// first violation.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        if self.states.len() != self.sections.len() + 1 {
            return Err("depth count mismatch".into());
        }
        if self.states[0] != [0] {
            return Err(format!("depth 0 holds {:?}", self.states[0]));
        }
        let cap = if self.m >= 32 { usize::MAX } else { 1usize << self.m };
        for (l, sec) in self.sections.iter().enumerate() {
            let mask = self.masks[l];
            let src = &self.states[l];
            let dst = &self.states[l + 1];
            if dst.len() > cap {
                return Err(format!("depth {} has {} > 2^m states", l + 1, dst.len()));
            }
            let mut incoming = vec![false; dst.len()];
            let mut outgoing = vec![false; src.len()];
            for e in &sec.edges {
                if src.get(e.from_pos()) != Some(&e.from) || dst.get(e.to_pos()) != Some(&e.to) {
                    return Err(format!("section {}: stale edge positions {e:?}", l + 1));
                }
                let expected = if e.label { e.from | mask } else { e.from };
                if e.to != expected {
                    return Err(format!("section {}: edge {e:?} breaks the OR update", l + 1));
                }
                incoming[e.to_pos()] = true;
                outgoing[e.from_pos()] = true;
            }
            if let Some(p) = incoming.iter().position(|&b| !b) {
                return Err(format!("depth {}: state {} has no incoming edge", l + 1, dst[p]));
            }
            if !matches!(self.kind, TrellisKind::Complete) {
                if let Some(p) = outgoing.iter().position(|&b| !b) {
                    return Err(format!("depth {l}: state {} is a dead end", src[p]));
                }
            }
        }
        match &self.kind {
            TrellisKind::Expurgated { final_state } => {
                if self.states[self.n()] != [*final_state] {
                    return Err("expurgated trellis must end in its final state only".into());
                }
            }
            TrellisKind::Reduced(r) => {
                let full = if r.m0 == 0 { 0 } else { u32::MAX >> (32 - r.m0) };
                if self.states[self.n()] != [full] {
                    return Err("reduced trellis must end in the all-ones state".into());
                }
            }
            TrellisKind::Complete => {}
        }
        Ok(())
    }

    pub fn write_dump<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# kind {}", self.kind.name())?;
        writeln!(w, "# m {} sections {} population {}", self.m, self.n(), self.population)?;
        writeln!(w, "# depth src dst label")?;
        for sec in &self.sections {
            for e in &sec.edges {
                writeln!(w, "{} {} {} {}", sec.depth, e.from, e.to, e.label as u8)?;
            }
        }
        Ok(())
    }

    pub fn dump_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_dump(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("dump is ASCII")
    }
}

/// Every label path of the trellis, as one bit per section.
pub fn enumerate_paths(trellis: &Trellis) -> Result<Vec<DefectivityVector>> {
    Ok(enumerate_paths_with_terminal(trellis)?
        .into_iter()
        .map(|(x, _)| x)
        .collect())
}

/// Like [`enumerate_paths`], also returning the terminal state of each path.
pub fn enumerate_paths_with_terminal(trellis: &Trellis) -> Result<Vec<(DefectivityVector, u32)>> {
    let count = trellis.path_count();
    if count > MAX_ENUMERATED_PATHS {
        return Err(Error::GuardExceeded {
            what: "path enumeration",
            count,
            limit: MAX_ENUMERATED_PATHS,
        });
    }
    let n = trellis.n();
    let mut out = Vec::with_capacity(count as usize);
    // (depth, position, labels so far)
    let mut stack: Vec<(usize, usize, Vec<bool>)> = vec![(0, 0, Vec::with_capacity(n))];
    while let Some((depth, pos, labels)) = stack.pop() {
        if depth == n {
            out.push((DefectivityVector::new(labels), trellis.states[n][pos]));
            continue;
        }
        for e in trellis.sections[depth].edges.iter().rev() {
            if e.from_pos() == pos {
                let mut next = labels.clone();
                next.push(e.label);
                stack.push((depth + 1, e.to_pos(), next));
            }
        }
    }
    Ok(out)
}
