//! The Shoemaker universe: three civilizations paused on a calendar schedule,
//! non-Markovian in its visible state and Markovian once the clock `Q` is added.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

pub const DAYS_PER_YEAR: u64 = 365;
/// Pause periods of civilizations A, B and C in years.
pub const PERIODS: [u64; 3] = [3, 4, 5];
pub const NAMES: [char; 3] = ['A', 'B', 'C'];

/// What the inhabitants can see: days of progress and whether each civilization sat out the last day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Visible {
    pub progress: [u64; 3],
    pub paused: [bool; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShoemakerState {
    pub visible: Visible,
    /// 1..=365, derived from `q`.
    pub day_of_year: u64,
    /// ≥ 1, derived from `q`.
    pub year: u64,
    /// Latent clock in days.
    pub q: f64,
}

/// Calendar position of the day that starts at clock value `q`.
pub fn calendar(q: f64) -> (u64, u64) {
    let d = q.max(0.0).floor() as u64;
    (d / DAYS_PER_YEAR + 1, d % DAYS_PER_YEAR + 1)
}

/// Whether each civilization is paused during `year`.
pub fn paused_in(year: u64) -> [bool; 3] {
    PERIODS.map(|p| year.is_multiple_of(p))
}

impl ShoemakerState {
    /// A fresh universe with the clock at `q0` days; no day has been lived yet.
    pub fn new(q0: f64) -> Self {
        let (year, day_of_year) = calendar(q0);
        Self { visible: Visible { progress: [0; 3], paused: [false; 3] }, day_of_year, year, q: q0 }
    }

    /// Lives one day of length `dt` (in days).
    pub fn step(&self, dt: f64) -> Self {
        let paused = paused_in(self.year);
        let mut progress = self.visible.progress;
        for (p, &stop) in progress.iter_mut().zip(&paused) {
            if !stop {
                *p += 1;
            }
        }
        let q = self.q + dt;
        let (year, day_of_year) = calendar(q);
        Self { visible: Visible { progress, paused }, day_of_year, year, q }
    }

    /// The visible state together with the exact clock value.
    pub fn augmented(&self) -> (Visible, u64) {
        (self.visible, self.q.to_bits())
    }
}

/// States after 0, 1, …, `days` steps of one day.
pub fn trace(q0: f64, days: u64) -> Vec<ShoemakerState> {
    let mut out = Vec::with_capacity(days as usize + 1);
    let mut s = ShoemakerState::new(q0);
    out.push(s);
    for _ in 0..days {
        s = s.step(1.0);
        out.push(s);
    }
    out
}

/// Two trace positions with equal observed states but different successors.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub first: usize,
    pub second: usize,
    /// `(year, day)` of the day whose end each position records.
    pub first_day: (u64, u64),
    pub second_day: (u64, u64),
    pub visible: Visible,
    pub first_successor: Visible,
    pub second_successor: Visible,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "witness = found")?;
        writeln!(f, "first = end of year {} day {} (step {})", self.first_day.0, self.first_day.1, self.first)?;
        writeln!(f, "second = end of year {} day {} (step {})", self.second_day.0, self.second_day.1, self.second)?;
        writeln!(f, "visible = {}", visible_text(&self.visible))?;
        writeln!(f, "first_successor = {}", visible_text(&self.first_successor))?;
        write!(f, "second_successor = {}", visible_text(&self.second_successor))
    }
}

fn visible_text(v: &Visible) -> String {
    (0..3).map(|i| format!("{}:{}{}", NAMES[i], v.progress[i], if v.paused[i] { "(paused)" } else { "" })).collect::<Vec<_>>().join(" ")
}

/// Calendar day whose end is recorded at trace position `k` (position 0 precedes any day).
fn lived_day(states: &[ShoemakerState], k: usize) -> (u64, u64) {
    if k == 0 {
        return (0, 0);
    }
    calendar(states[k - 1].q)
}

/// First repeat of a key with a different successor key, in chronological order.
fn first_conflict<K: Eq + std::hash::Hash + Copy>(keys: &[K]) -> Option<(usize, usize)> {
    let mut seen: HashMap<K, (usize, K)> = HashMap::new();
    for i in 0..keys.len().saturating_sub(1) {
        match seen.get(&keys[i]) {
            Some(&(j, succ)) if succ != keys[i + 1] => return Some((j, i)),
            Some(_) => {}
            None => {
                seen.insert(keys[i], (i, keys[i + 1]));
            }
        }
    }
    None
}

/// Searches the visible-only trace over `horizon_years` for a non-Markov witness.
pub fn non_markov_witness(horizon_years: u64) -> Option<Witness> {
    let states = trace(0.0, horizon_years * DAYS_PER_YEAR);
    let keys: Vec<Visible> = states.iter().map(|s| s.visible).collect();
    let (a, b) = first_conflict(&keys)?;
    Some(Witness {
        first: a,
        second: b,
        first_day: lived_day(&states, a),
        second_day: lived_day(&states, b),
        visible: keys[a],
        first_successor: keys[a + 1],
        second_successor: keys[b + 1],
    })
}

/// The same search over `(visible, Q)`; `None` means the augmented trace is Markov.
pub fn augmented_witness(q0: f64, horizon_years: u64) -> Option<(usize, usize)> {
    let states = trace(q0, horizon_years * DAYS_PER_YEAR);
    let keys: Vec<(Visible, u64)> = states.iter().map(ShoemakerState::augmented).collect();
    first_conflict(&keys)
}

/// Years within `1..=years` in which every civilization is paused.
pub fn full_pause_years(years: u64) -> Vec<u64> {
    (1..=years).filter(|&y| paused_in(y).iter().all(|&p| p)).collect()
}

/// Determinism and independence audit over one full 60-year cycle from clock offset `q0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleAudit {
    pub states: usize,
    /// Augmented keys mapped to more than one successor.
    pub conflicts: usize,
    /// Steps where re-stepping the recorded state disagreed with the trace.
    pub replay_mismatches: usize,
    /// Steps where the clock update depended on the visible state.
    pub backreaction: usize,
}

impl CycleAudit {
    pub fn passes(&self) -> bool {
        self.conflicts == 0 && self.replay_mismatches == 0 && self.backreaction == 0
    }
}

pub fn audit_cycle(q0: f64) -> CycleAudit {
    let cycle = PERIODS.iter().product::<u64>() * DAYS_PER_YEAR;
    let states = trace(q0, cycle);
    let mut table: HashMap<(Visible, u64), (Visible, u64)> = HashMap::new();
    let mut conflicts = 0;
    let mut replay_mismatches = 0;
    let mut backreaction = 0;
    let scrambled = Visible { progress: [7, 11, 13], paused: [true, false, true] };
    for w in states.windows(2) {
        let (s, next) = (w[0], w[1]);
        let key = s.augmented();
        let val = next.augmented();
        if let Some(prev) = table.insert(key, val) {
            if prev != val {
                conflicts += 1;
            }
        }
        if s.step(1.0) != next {
            replay_mismatches += 1;
        }
        let other = ShoemakerState { visible: scrambled, ..s }.step(1.0);
        if other.q != next.q || other.year != next.year || other.day_of_year != next.day_of_year {
            backreaction += 1;
        }
    }
    CycleAudit { states: states.len(), conflicts, replay_mismatches, backreaction }
}

/// `step,year,day,q,A,B,C,A_paused,B_paused,C_paused` rows.
pub fn trace_csv(states: &[ShoemakerState]) -> String {
    let mut s = String::from("step,year,day,q,A,B,C,A_paused,B_paused,C_paused\n");
    for (k, st) in states.iter().enumerate() {
        let v = &st.visible;
        writeln!(
            s,
            "{k},{},{},{},{},{},{},{},{},{}",
            st.year,
            st.day_of_year,
            st.q,
            v.progress[0],
            v.progress[1],
            v.progress[2],
            v.paused[0] as u8,
            v.paused[1] as u8,
            v.paused[2] as u8
        )
        .unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(year: u64, day: u64) -> ShoemakerState {
        let q = ((year - 1) * DAYS_PER_YEAR + day - 1) as f64;
        let mut s = ShoemakerState::new(0.0);
        while s.q < q {
            s = s.step(1.0);
        }
        s
    }

    #[test]
    fn first_day_advances_everyone() {
        let s = ShoemakerState::new(0.0);
        assert_eq!((s.year, s.day_of_year), (1, 1));
        assert_eq!(s.step(1.0).visible.progress, [1, 1, 1]);
    }

    #[test]
    fn year_sixty_pauses_everyone() {
        for day in [1, 200, 365] {
            let s = at(60, day);
            assert_eq!(s.step(1.0).visible.progress, s.visible.progress);
        }
    }

    #[test]
    fn year_sixty_one_resumes() {
        let s = at(61, 1);
        let n = s.step(1.0);
        assert!(n.visible.progress.iter().zip(&s.visible.progress).all(|(a, b)| a == &(b + 1)));
        assert_eq!(n.visible.paused, [false; 3]);
    }

    #[test]
    fn partial_pauses_follow_periods() {
        assert_eq!(paused_in(3), [true, false, false]);
        assert_eq!(paused_in(4), [false, true, false]);
        assert_eq!(paused_in(15), [true, false, true]);
        assert_eq!(paused_in(60), [true; 3]);
        assert_eq!(full_pause_years(180), vec![60, 120, 180]);
    }

    #[test]
    fn clock_advances_by_dt() {
        let t = trace(0.0, 1000);
        assert!(t.windows(2).all(|w| w[1].q - w[0].q == 1.0));
        assert!(t.iter().all(|s| (1..=365).contains(&s.day_of_year)));
    }

    #[test]
    fn witness_search() {
        assert!(non_markov_witness(2).is_none());
        assert!(non_markov_witness(60).is_none());
        let w = non_markov_witness(61).unwrap();
        assert_eq!(w.first_day, (60, 1));
        assert_eq!(w.second_day, (60, 365));
        assert_ne!(w.first_successor, w.second_successor);
        assert!(augmented_witness(0.0, 121).is_none());
    }

    #[test]
    fn cycle_audit_passes_for_offsets() {
        for q0 in [0.0, 17.0, 365.0 * 7.0 + 3.0] {
            assert!(audit_cycle(q0).passes());
        }
    }

    #[test]
    fn offset_shifts_schedule() {
        let base = trace(0.0, 800);
        let shifted = trace(100.0, 700);
        for (k, s) in shifted.iter().enumerate().skip(1) {
            assert_eq!(s.visible.paused, base[k + 100].visible.paused);
        }
    }
}
