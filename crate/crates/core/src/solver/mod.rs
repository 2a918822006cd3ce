//! Conflict-driven clause-learning search with an injectable restart
//! schedule.
//!
//! The solver is resumable: [`Solver::run`] returns [`RunStatus::Paused`]
//! once the configured pause conflict is reached, so a caller can inspect
//! the state, install a different schedule with
//! [`Solver::switch_schedule`], and continue with the learnt clauses intact.

mod heap;
pub mod window;

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cnf::{Clause, Formula, Lit, PreprocessResult};
use crate::cputime::CpuClock;
use crate::restart::Schedule;
use heap::VarHeap;
pub use window::{record_window, ConflictEvent, WbeState, WindowStats};

const NO_REASON: u32 = u32::MAX;
const UNDEF: i8 = 0;
const TRUE: i8 = 1;
const FALSE: i8 = -1;

/// Literal scores decay by this factor every `DECAY_PERIOD` conflicts.
const SCORE_DECAY: f64 = 0.95;
const DECAY_PERIOD: u64 = 128;
const CLAUSE_DECAY: f64 = 0.999;
/// CPU time is polled against the cutoff every this many conflicts.
const TIME_POLL: u64 = 64;
/// How many satisfied recent learnt clauses the decision heuristic skips
/// before falling back to the score heap.
const RECENT_SCAN_LIMIT: usize = 256;
const MIN_LEARNT_LIMIT: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    /// First conflict index (1-based, inclusive) recorded.
    pub first_conflict: u64,
    /// Last conflict index (inclusive) recorded.
    pub last_conflict: u64,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub cutoff_seconds: f64,
    pub seed: u64,
    pub log_restarts: bool,
    pub window: Option<WindowSpec>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            cutoff_seconds: f64::INFINITY,
            seed: 0,
            log_restarts: false,
            window: None,
        }
    }
}

impl SolverConfig {
    pub fn with_cutoff(cutoff_seconds: f64) -> SolverConfig {
        SolverConfig {
            cutoff_seconds,
            ..SolverConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Sat,
    Unsat,
    Timeout,
    Paused,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RestartEvent {
    /// 1-based restart index: the restart that just ended.
    pub index: u64,
    /// Conflict budget that restart ran under.
    pub length: u64,
    pub total_conflicts: u64,
}

impl fmt::Display for RestartEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "restart {} {} {}",
            self.index, self.length, self.total_conflicts
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveStatus {
    /// Model indexed by 0-based variable.
    Sat(Vec<bool>),
    Unsat,
    Timeout,
}

impl SolveStatus {
    pub fn label(&self) -> &'static str {
        match self {
            SolveStatus::Sat(_) => "sat",
            SolveStatus::Unsat => "unsat",
            SolveStatus::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub cpu_seconds: f64,
    pub conflicts: u64,
    pub restarts: u64,
    pub window: Option<WindowStats>,
    pub restart_log: Vec<RestartEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolverError {
    #[error("restart schedule was already switched once")]
    AlreadySwitched,
    #[error("solver has already terminated")]
    Finished,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("variable {0} is unassigned")]
    Unassigned(u32),
}

/// True iff every clause has a satisfied literal. `model` is indexed by
/// 0-based variable; missing or `None` entries are errors.
pub fn check_model(formula: &Formula, model: &[Option<bool>]) -> Result<bool, ModelError> {
    for v in 0..formula.num_vars as usize {
        if model.get(v).copied().flatten().is_none() {
            return Err(ModelError::Unassigned(v as u32 + 1));
        }
    }
    Ok(formula.clauses.iter().all(|c| {
        c.iter()
            .any(|l| model[l.var_index()] == Some(l.is_positive()))
    }))
}

/// Convenience wrapper for complete models.
pub fn check_full_model(formula: &Formula, model: &[bool]) -> Result<bool, ModelError> {
    let partial: Vec<Option<bool>> = model.iter().map(|&b| Some(b)).collect();
    check_model(formula, &partial)
}

#[derive(Debug, Clone)]
struct ClauseData {
    lits: Vec<Lit>,
    learnt: bool,
    deleted: bool,
    activity: f64,
}

#[derive(Debug, Clone, Copy)]
struct Watcher {
    cref: u32,
    blocker: Lit,
}

pub struct Solver {
    num_vars: usize,
    clauses: Vec<ClauseData>,
    /// Watchers visited when the indexing literal becomes true.
    watches: Vec<Vec<Watcher>>,
    values: Vec<i8>,
    level: Vec<u32>,
    reason: Vec<u32>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,

    lit_score: Vec<f64>,
    var_score: Vec<f64>,
    score_inc: f64,
    heap: VarHeap,
    phase: Vec<bool>,
    clause_inc: f64,
    /// Live learnt clauses in creation order.
    learnts: Vec<u32>,
    recent_cursor: usize,
    max_learnts: usize,

    seen: Vec<bool>,
    analyze_stack: Vec<Lit>,
    analyze_clear: Vec<Lit>,

    schedule: Schedule,
    budget: u64,
    switched: bool,
    conflicts: u64,
    conflicts_since_restart: u64,
    restarts: u64,
    decisions: u64,

    fixed: BTreeMap<u32, bool>,
    trivially_unsat: bool,
    initialized: bool,
    finished: Option<RunStatus>,
    model: Option<Vec<bool>>,

    wbe: WbeState,
    window_spec: Option<WindowSpec>,
    window: WindowStats,
    log_restarts: bool,
    restart_log: Vec<RestartEvent>,
    pause_at: Option<u64>,

    clock: CpuClock,
    cutoff_seconds: f64,
}

impl Solver {
    /// Builds a solver over `formula`. Clauses are normalized on load, so
    /// unit, empty or tautological input clauses are handled.
    pub fn new(formula: &Formula, schedule: Schedule, config: SolverConfig) -> Solver {
        let clock = CpuClock::start();
        let n = formula.num_vars as usize;
        let mut schedule = schedule;
        let budget = schedule.next().unwrap_or(u64::MAX);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let var_score: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 1e-6).collect();
        let mut heap = VarHeap::new(n);
        for v in 0..n {
            heap.insert(v, &var_score);
        }
        let mut solver = Solver {
            num_vars: n,
            clauses: Vec::with_capacity(formula.clauses.len()),
            watches: vec![Vec::new(); 2 * n],
            values: vec![UNDEF; n],
            level: vec![0; n],
            reason: vec![NO_REASON; n],
            trail: Vec::with_capacity(n),
            trail_lim: Vec::new(),
            qhead: 0,
            lit_score: vec![0.0; 2 * n],
            var_score,
            score_inc: 1.0,
            heap,
            phase: vec![false; n],
            clause_inc: 1.0,
            learnts: Vec::new(),
            recent_cursor: 0,
            max_learnts: MIN_LEARNT_LIMIT.max(2 * formula.clauses.len()),
            seen: vec![false; n],
            analyze_stack: Vec::new(),
            analyze_clear: Vec::new(),
            schedule,
            budget,
            switched: false,
            conflicts: 0,
            conflicts_since_restart: 0,
            restarts: 0,
            decisions: 0,
            fixed: BTreeMap::new(),
            trivially_unsat: false,
            initialized: false,
            finished: None,
            model: None,
            wbe: WbeState::default(),
            window_spec: config.window,
            window: WindowStats::default(),
            log_restarts: config.log_restarts,
            restart_log: Vec::new(),
            pause_at: None,
            clock,
            cutoff_seconds: config.cutoff_seconds,
        };
        for clause in &formula.clauses {
            solver.load_clause(clause);
        }
        solver
    }

    /// Builds a solver over a preprocessed formula; fixed variables are
    /// merged back into the model on success.
    pub fn from_preprocessed(
        p: &PreprocessResult,
        schedule: Schedule,
        config: SolverConfig,
    ) -> Solver {
        let mut solver = Solver::new(&p.formula, schedule, config);
        solver.fixed = p.fixed.clone();
        if p.is_unsat() {
            solver.trivially_unsat = true;
        }
        solver
    }

    fn load_clause(&mut self, clause: &[Lit]) {
        let mut lits = clause.to_vec();
        lits.sort_unstable();
        lits.dedup();
        if lits.windows(2).any(|w| w[0].var() == w[1].var()) {
            return;
        }
        match lits.len() {
            0 => self.trivially_unsat = true,
            1 => match self.lit_value(lits[0]) {
                UNDEF => self.enqueue(lits[0], NO_REASON),
                FALSE => self.trivially_unsat = true,
                _ => {}
            },
            _ => {
                self.attach(lits, false);
            }
        }
    }

    fn attach(&mut self, lits: Vec<Lit>, learnt: bool) -> u32 {
        let cref = self.clauses.len() as u32;
        self.watches[(!lits[0]).code()].push(Watcher {
            cref,
            blocker: lits[1],
        });
        self.watches[(!lits[1]).code()].push(Watcher {
            cref,
            blocker: lits[0],
        });
        self.clauses.push(ClauseData {
            lits,
            learnt,
            deleted: false,
            activity: 0.0,
        });
        cref
    }

    #[inline]
    fn lit_value(&self, lit: Lit) -> i8 {
        lit_value(&self.values, lit)
    }

    #[inline]
    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    fn enqueue(&mut self, lit: Lit, reason: u32) {
        let v = lit.var_index();
        debug_assert_eq!(self.values[v], UNDEF);
        self.values[v] = if lit.is_positive() { TRUE } else { FALSE };
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(lit);
    }

    /// Two-watched-literal unit propagation. Returns a conflicting clause.
    fn propagate(&mut self) -> Option<u32> {
        let mut conflict = None;
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let false_lit = !p;
            let mut ws = std::mem::take(&mut self.watches[p.code()]);
            let (mut i, mut j) = (0, 0);
            'watchers: while i < ws.len() {
                let w = ws[i];
                i += 1;
                if lit_value(&self.values, w.blocker) == TRUE {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let lits = &mut self.clauses[w.cref as usize].lits;
                if lits[0] == false_lit {
                    lits.swap(0, 1);
                }
                debug_assert_eq!(lits[1], false_lit);
                let first = lits[0];
                let kept = Watcher {
                    cref: w.cref,
                    blocker: first,
                };
                if first != w.blocker && lit_value(&self.values, first) == TRUE {
                    ws[j] = kept;
                    j += 1;
                    continue;
                }
                for k in 2..lits.len() {
                    if lit_value(&self.values, lits[k]) != FALSE {
                        lits.swap(1, k);
                        self.watches[(!lits[1]).code()].push(kept);
                        continue 'watchers;
                    }
                }
                ws[j] = kept;
                j += 1;
                if lit_value(&self.values, first) == FALSE {
                    conflict = Some(w.cref);
                    self.qhead = self.trail.len();
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.enqueue(first, w.cref);
                }
            }
            ws.truncate(j);
            self.watches[p.code()] = ws;
            if conflict.is_some() {
                break;
            }
        }
        conflict
    }

    fn bump_literal(&mut self, lit: Lit) {
        self.lit_score[lit.code()] += self.score_inc;
        let v = lit.var_index();
        self.var_score[v] += self.score_inc;
        self.heap.increased(v, &self.var_score);
    }

    fn decay_scores(&mut self) {
        self.score_inc /= SCORE_DECAY;
        if self.score_inc > 1e100 {
            for s in self.lit_score.iter_mut().chain(self.var_score.iter_mut()) {
                *s *= 1e-100;
            }
            self.score_inc *= 1e-100;
        }
    }

    fn bump_clause(&mut self, cref: u32) {
        let c = &mut self.clauses[cref as usize];
        if !c.learnt {
            return;
        }
        c.activity += self.clause_inc;
        if c.activity > 1e20 {
            for &l in &self.learnts {
                self.clauses[l as usize].activity *= 1e-20;
            }
            self.clause_inc *= 1e-20;
        }
    }

    /// First-UIP analysis with recursive minimization. Returns the learnt
    /// clause (asserting literal first, highest remaining level second) and
    /// the assertion level.
    fn analyze(&mut self, conflict: u32) -> (Vec<Lit>, u32) {
        let current = self.decision_level();
        let mut learnt: Vec<Lit> = vec![Lit::from_code(0)];
        let mut pending = 0usize;
        let mut index = self.trail.len();
        let mut cref = conflict;
        let mut uip: Option<Lit> = None;

        loop {
            self.bump_clause(cref);
            let skip = usize::from(uip.is_some());
            let len = self.clauses[cref as usize].lits.len();
            for k in skip..len {
                let q = self.clauses[cref as usize].lits[k];
                let v = q.var_index();
                if !self.seen[v] && self.level[v] > 0 {
                    self.bump_literal(q);
                    self.seen[v] = true;
                    if self.level[v] >= current {
                        pending += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                index -= 1;
                if self.seen[self.trail[index].var_index()] {
                    break;
                }
            }
            let p = self.trail[index];
            cref = self.reason[p.var_index()];
            self.seen[p.var_index()] = false;
            pending -= 1;
            uip = Some(p);
            if pending == 0 {
                break;
            }
        }
        learnt[0] = !uip.unwrap();

        // minimization
        self.analyze_clear.clear();
        self.analyze_clear.extend_from_slice(&learnt);
        let abstract_levels = learnt[1..]
            .iter()
            .fold(0u32, |acc, l| acc | self.abstract_level(l.var_index()));
        let mut kept = 1;
        for k in 1..learnt.len() {
            let l = learnt[k];
            if self.reason[l.var_index()] == NO_REASON
                || !self.literal_redundant(l, abstract_levels)
            {
                learnt[kept] = l;
                kept += 1;
            }
        }
        learnt.truncate(kept);
        for k in 0..self.analyze_clear.len() {
            let v = self.analyze_clear[k].var_index();
            self.seen[v] = false;
        }

        let assertion_level = if learnt.len() == 1 {
            0
        } else {
            let mut max_k = 1;
            for k in 2..learnt.len() {
                if self.level[learnt[k].var_index()] > self.level[learnt[max_k].var_index()] {
                    max_k = k;
                }
            }
            learnt.swap(1, max_k);
            self.level[learnt[1].var_index()]
        };
        (learnt, assertion_level)
    }

    #[inline]
    fn abstract_level(&self, v: usize) -> u32 {
        1 << (self.level[v] & 31)
    }

    fn literal_redundant(&mut self, lit: Lit, abstract_levels: u32) -> bool {
        self.analyze_stack.clear();
        self.analyze_stack.push(lit);
        let top = self.analyze_clear.len();
        while let Some(q) = self.analyze_stack.pop() {
            let cref = self.reason[q.var_index()];
            debug_assert_ne!(cref, NO_REASON);
            let len = self.clauses[cref as usize].lits.len();
            for k in 1..len {
                let l = self.clauses[cref as usize].lits[k];
                let v = l.var_index();
                if !self.seen[v] && self.level[v] > 0 {
                    if self.reason[v] != NO_REASON && self.abstract_level(v) & abstract_levels != 0
                    {
                        self.seen[v] = true;
                        self.analyze_stack.push(l);
                        self.analyze_clear.push(l);
                    } else {
                        for j in top..self.analyze_clear.len() {
                            let u = self.analyze_clear[j].var_index();
                            self.seen[u] = false;
                        }
                        self.analyze_clear.truncate(top);
                        return false;
                    }
                }
            }
        }
        true
    }

    fn backtrack(&mut self, level: u32) {
        if self.decision_level() <= level {
            return;
        }
        let start = self.trail_lim[level as usize];
        for k in (start..self.trail.len()).rev() {
            let lit = self.trail[k];
            let v = lit.var_index();
            self.values[v] = UNDEF;
            self.reason[v] = NO_REASON;
            self.phase[v] = lit.is_positive();
            self.heap.insert(v, &self.var_score);
        }
        self.trail.truncate(start);
        self.trail_lim.truncate(level as usize);
        self.qhead = start;
        self.recent_cursor = self.learnts.len();
    }

    fn restart(&mut self) {
        self.restarts += 1;
        if self.log_restarts {
            self.restart_log.push(RestartEvent {
                index: self.restarts,
                length: self.budget,
                total_conflicts: self.conflicts,
            });
        }
        self.backtrack(0);
        self.budget = self.schedule.next().unwrap_or(u64::MAX);
        self.conflicts_since_restart = 0;
        self.wbe.reset();
    }

    fn locked(&self, cref: u32) -> bool {
        let first = self.clauses[cref as usize].lits[0];
        self.reason[first.var_index()] == cref && self.lit_value(first) == TRUE
    }

    /// Deletes the less active half of the learnt clauses, never touching
    /// binary clauses or current reasons.
    fn reduce_db(&mut self) {
        let mut candidates: Vec<u32> = self
            .learnts
            .iter()
            .copied()
            .filter(|&c| self.clauses[c as usize].lits.len() > 2 && !self.locked(c))
            .collect();
        candidates.sort_by(|&a, &b| {
            self.clauses[a as usize]
                .activity
                .total_cmp(&self.clauses[b as usize].activity)
        });
        let remove = (self.learnts.len() / 2).min(candidates.len());
        for &c in &candidates[..remove] {
            let cd = &mut self.clauses[c as usize];
            cd.deleted = true;
            cd.lits = Vec::new();
        }
        let clauses = &self.clauses;
        for ws in &mut self.watches {
            ws.retain(|w| !clauses[w.cref as usize].deleted);
        }
        self.learnts.retain(|&c| !clauses[c as usize].deleted);
        self.recent_cursor = self.learnts.len();
    }

    /// Branching: the highest-scoring free variable of the most recent
    /// learnt clause that is not yet satisfied, else the highest-scoring
    /// free variable overall. Polarity comes from the saved phase.
    fn pick_branch(&mut self) -> Option<Lit> {
        let mut scanned = 0;
        while self.recent_cursor > 0 && scanned < RECENT_SCAN_LIMIT {
            let cref = self.learnts[self.recent_cursor - 1];
            let lits = &self.clauses[cref as usize].lits;
            let mut best: Option<usize> = None;
            let mut satisfied = false;
            for &l in lits {
                match lit_value(&self.values, l) {
                    TRUE => {
                        satisfied = true;
                        break;
                    }
                    UNDEF => {
                        let v = l.var_index();
                        if best.map_or(true, |b| self.var_score[v] > self.var_score[b]) {
                            best = Some(v);
                        }
                    }
                    _ => {}
                }
            }
            if !satisfied {
                if let Some(v) = best {
                    return Some(Lit::new(v as u32 + 1, self.phase[v]));
                }
            }
            self.recent_cursor -= 1;
            scanned += 1;
        }
        while let Some(v) = self.heap.pop(&self.var_score) {
            if self.values[v] == UNDEF {
                return Some(Lit::new(v as u32 + 1, self.phase[v]));
            }
        }
        None
    }

    fn finish(&mut self, status: RunStatus) -> RunStatus {
        self.finished = Some(status);
        status
    }

    fn timed_out(&self) -> bool {
        self.clock.elapsed() > self.cutoff_seconds
    }

    /// Searches until the formula is decided, the CPU cutoff passes, or the
    /// pause conflict is reached.
    pub fn run(&mut self) -> RunStatus {
        if let Some(status) = self.finished {
            return status;
        }
        if !self.initialized {
            self.initialized = true;
            if self.trivially_unsat || self.propagate().is_some() {
                return self.finish(RunStatus::Unsat);
            }
        }
        loop {
            if self.conflicts_since_restart >= self.budget {
                self.restart();
            }
            if let Some(conflict) = self.propagate() {
                self.conflicts += 1;
                self.conflicts_since_restart += 1;
                let depth = self.decision_level();
                if depth == 0 {
                    return self.finish(RunStatus::Unsat);
                }
                let (learnt, assertion_level) = self.analyze(conflict);
                let event =
                    ConflictEvent::new(self.conflicts, depth, assertion_level, learnt.len() as u32);
                self.backtrack(assertion_level);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], NO_REASON);
                } else {
                    let first = learnt[0];
                    let cref = self.attach(learnt, true);
                    self.learnts.push(cref);
                    self.bump_clause(cref);
                    self.enqueue(first, cref);
                }
                self.recent_cursor = self.learnts.len();

                self.wbe.add_leaf(depth);
                if let Some(spec) = self.window_spec {
                    if (spec.first_conflict..=spec.last_conflict).contains(&self.conflicts) {
                        self.window.record(&event, &self.wbe);
                    }
                }

                if self.conflicts % DECAY_PERIOD == 0 {
                    self.decay_scores();
                }
                self.clause_inc /= CLAUSE_DECAY;
                if self.learnts.len() > self.max_learnts {
                    self.reduce_db();
                }
                if self.conflicts % TIME_POLL == 0 && self.timed_out() {
                    return self.finish(RunStatus::Timeout);
                }
                if self.pause_at == Some(self.conflicts) {
                    return RunStatus::Paused;
                }
            } else {
                match self.pick_branch() {
                    None => {
                        self.model = Some(self.build_model());
                        return self.finish(RunStatus::Sat);
                    }
                    Some(lit) => {
                        self.decisions += 1;
                        self.trail_lim.push(self.trail.len());
                        self.enqueue(lit, NO_REASON);
                    }
                }
            }
        }
    }

    fn build_model(&self) -> Vec<bool> {
        let model: Vec<bool> = self.values.iter().map(|&v| v == TRUE).collect();
        for c in self.clauses.iter().filter(|c| !c.learnt && !c.deleted) {
            assert!(
                c.lits
                    .iter()
                    .any(|l| model[l.var_index()] == l.is_positive()),
                "internal invariant violated: model falsifies clause {:?}",
                c.lits
            );
        }
        let mut model = model;
        for (&v, &b) in &self.fixed {
            model[v as usize - 1] = b;
        }
        model
    }

    /// Pauses `run` right after the given conflict has been handled.
    pub fn set_pause_at(&mut self, conflicts: u64) {
        self.pause_at = Some(conflicts);
    }

    /// Replaces the restart schedule. The restart in progress keeps its
    /// budget; the next restart takes the new schedule's first length.
    pub fn switch_schedule(&mut self, schedule: Schedule) -> Result<(), SolverError> {
        if self.finished.is_some() {
            return Err(SolverError::Finished);
        }
        if self.switched {
            return Err(SolverError::AlreadySwitched);
        }
        self.switched = true;
        self.schedule = schedule;
        Ok(())
    }

    pub fn conflicts(&self) -> u64 {
        self.conflicts
    }

    pub fn restarts(&self) -> u64 {
        self.restarts
    }

    pub fn decisions(&self) -> u64 {
        self.decisions
    }

    pub fn cpu_seconds(&self) -> f64 {
        self.clock.elapsed()
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_learnts(&self) -> usize {
        self.learnts.len()
    }

    pub fn learnt_clauses(&self) -> Vec<Clause> {
        self.learnts
            .iter()
            .map(|&c| self.clauses[c as usize].lits.clone())
            .collect()
    }

    /// Problem clauses currently attached (excludes units, which live on
    /// the trail).
    pub fn original_clauses(&self) -> Vec<Clause> {
        self.clauses
            .iter()
            .filter(|c| !c.learnt && !c.deleted)
            .map(|c| c.lits.clone())
            .collect()
    }

    /// Literals assigned at decision level 0.
    pub fn level0_literals(&self) -> Vec<Lit> {
        let end = self.trail_lim.first().copied().unwrap_or(self.trail.len());
        self.trail[..end].to_vec()
    }

    pub fn fixed(&self) -> &BTreeMap<u32, bool> {
        &self.fixed
    }

    pub fn window(&self) -> &WindowStats {
        &self.window
    }

    pub fn wbe(&self) -> &WbeState {
        &self.wbe
    }

    pub fn restart_log(&self) -> &[RestartEvent] {
        &self.restart_log
    }

    pub fn status(&self) -> Option<RunStatus> {
        self.finished
    }

    pub fn model(&self) -> Option<&[bool]> {
        self.model.as_deref()
    }

    /// Clause database at level 0: problem clauses, learnt clauses, and one
    /// unit clause per level-0 literal. Feed it to `cnf::preprocess` to get
    /// the reduced post-search database.
    pub fn level0_snapshot(&self) -> Formula {
        let mut clauses: Vec<Clause> = self
            .clauses
            .iter()
            .filter(|c| !c.deleted)
            .map(|c| c.lits.clone())
            .collect();
        clauses.extend(self.level0_literals().into_iter().map(|l| vec![l]));
        Formula {
            num_vars: self.num_vars as u32,
            clauses,
            source_name: String::new(),
        }
    }

    pub fn into_outcome(self) -> SolveOutcome {
        let status = match self.finished {
            Some(RunStatus::Sat) => {
                SolveStatus::Sat(self.model.clone().expect("model recorded on sat"))
            }
            Some(RunStatus::Unsat) => SolveStatus::Unsat,
            _ => SolveStatus::Timeout,
        };
        SolveOutcome {
            status,
            cpu_seconds: self.clock.elapsed(),
            conflicts: self.conflicts,
            restarts: self.restarts,
            window: self.window_spec.map(|_| self.window.clone()),
            restart_log: self.restart_log,
        }
    }
}

#[inline]
fn lit_value(values: &[i8], lit: Lit) -> i8 {
    let v = values[lit.var_index()];
    if lit.is_positive() {
        v
    } else {
        -v
    }
}

/// Runs a complete search on a preprocessed formula.
pub fn solve(p: &PreprocessResult, schedule: Schedule, config: SolverConfig) -> SolveOutcome {
    let mut solver = Solver::from_preprocessed(p, schedule, config);
    solver.run();
    solver.into_outcome()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::preprocess;
    use crate::restart::RestartStrategy;

    fn luby() -> Schedule {
        RestartStrategy::luby(512).schedule()
    }

    #[test]
    fn forced_implication() {
        let f = Formula::from_ints(2, &[&[1, 2], &[-1, 2]]);
        let out = solve(&preprocess(&f), luby(), SolverConfig::default());
        match out.status {
            SolveStatus::Sat(m) => {
                assert!(m[1]);
                assert!(check_full_model(&f, &m).unwrap());
            }
            other => panic!("expected sat, got {other:?}"),
        }
    }

    #[test]
    fn complete_contradiction() {
        let f = Formula::from_ints(2, &[&[1, 2], &[1, -2], &[-1, 2], &[-1, -2]]);
        let out = solve(&preprocess(&f), luby(), SolverConfig::default());
        assert_eq!(out.status, SolveStatus::Unsat);
        assert!(out.conflicts >= 1);
    }

    #[test]
    fn raw_units_and_empty_clauses() {
        let f = Formula::from_ints(2, &[&[1], &[-1, 2]]);
        let mut s = Solver::new(&f, luby(), SolverConfig::default());
        assert_eq!(s.run(), RunStatus::Sat);
        assert_eq!(s.model().unwrap(), &[true, true]);

        let f = Formula::new(1, vec![vec![]]);
        let mut s = Solver::new(&f, luby(), SolverConfig::default());
        assert_eq!(s.run(), RunStatus::Unsat);
    }

    #[test]
    fn check_model_cases() {
        let f = Formula::from_ints(2, &[&[1, 2]]);
        assert!(check_model(&f, &[Some(false), Some(true)]).unwrap());
        let g = Formula::from_ints(1, &[&[1]]);
        assert!(!check_model(&g, &[Some(false)]).unwrap());
        assert_eq!(
            check_model(&f, &[Some(true), None]),
            Err(ModelError::Unassigned(2))
        );
        assert_eq!(
            check_model(&f, &[Some(true)]),
            Err(ModelError::Unassigned(2))
        );
    }

    #[test]
    fn switch_twice_rejected() {
        let f = Formula::from_ints(2, &[&[1, 2]]);
        let mut s = Solver::new(&f, luby(), SolverConfig::default());
        s.switch_schedule(RestartStrategy::fixed(512).schedule())
            .unwrap();
        assert_eq!(s.switch_schedule(luby()), Err(SolverError::AlreadySwitched));
    }

    #[test]
    fn restart_event_format() {
        let e = RestartEvent {
            index: 3,
            length: 64,
            total_conflicts: 128,
        };
        assert_eq!(e.to_string(), "restart 3 64 128");
    }
}
