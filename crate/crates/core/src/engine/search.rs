use std::collections::HashSet;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::state::{init_batch, BatchState};
use super::{EngineError, SearchConfig};
use crate::compiler::{eval_tree, CompiledLoss};

/// An assignment whose loss reached the candidate threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub assignment: Vec<f64>,
    /// Loss recomputed with the tree interpreter.
    pub loss: f64,
    /// Constraint values `p_atom(assignment)` in atom order.
    pub per_atom: Vec<f64>,
    pub round: u64,
    pub iter: u64,
}

/// Caller's answer for an emitted candidate.
#[derive(Debug, Clone, PartialEq)]
pub enum Verdict<T> {
    /// Stop the search and return the value.
    Accept(T),
    /// Restart the emitting sample from a fresh random point.
    Reject,
    /// Leave the sample where it is.
    Keep,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SearchStatus {
    /// Stopped because a candidate was accepted. Lists every emitted candidate, the accepted one last.
    CandidateFound(Vec<Candidate>),
    Exhausted,
    TimedOut,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchStats {
    pub iterations: u64,
    pub rounds: u64,
    pub wall: Duration,
    pub candidates: u64,
    pub rejected: u64,
    /// Lowest batch loss seen.
    pub best_loss: f64,
    /// `(iteration, min batch loss)` sampled every `progress_every` iterations.
    pub trajectory: Vec<(u64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome<T> {
    pub status: SearchStatus,
    pub stats: SearchStats,
    pub accepted: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Progress {
    pub iteration: u64,
    pub round: u64,
    pub min_loss: f64,
    pub best_loss: f64,
    pub candidates: u64,
    pub elapsed: Duration,
}

/// Runs the descent loop until `check` accepts a candidate, the round budget is spent or
/// the wall clock runs out.
pub fn search<T>(
    c: &CompiledLoss,
    cfg: &SearchConfig,
    mut check: impl FnMut(&Candidate) -> Verdict<T>,
    mut progress: impl FnMut(&Progress),
) -> Result<SearchOutcome<T>, EngineError> {
    cfg.validate()?;
    let start = Instant::now();
    let bounds = cfg.bounds_for(&c.spec, c.num_vars())?;
    let mut state = init_batch(cfg, bounds, ChaCha8Rng::seed_from_u64(cfg.seed));
    let mut seen: HashSet<Vec<i64>> = HashSet::new();
    let mut emitted: Vec<Candidate> = Vec::new();
    let mut stats = SearchStats {
        rounds: 1,
        best_loss: f64::INFINITY,
        ..SearchStats::default()
    };
    let mut since_new = 0u64;

    let finish = |status, mut stats: SearchStats, accepted| {
        stats.wall = start.elapsed();
        Ok(SearchOutcome { status, stats, accepted })
    };

    loop {
        if cfg.wall_timeout.is_some_and(|t| start.elapsed() >= t) {
            return finish(SearchStatus::TimedOut, stats, None);
        }
        state.evaluate(c, cfg.deterministic)?;
        let min_loss = state.loss.iter().copied().fold(f64::INFINITY, f64::min);
        stats.best_loss = stats.best_loss.min(min_loss);

        let mut this_step = 0;
        for i in candidate_rows(&state, cfg.candidate_threshold) {
            if this_step >= cfg.max_candidates_per_step {
                break;
            }
            let key = grid_key(state.x.row(i), cfg.dedup_grid);
            if seen.contains(&key) {
                continue;
            }
            let Some(cand) = rebuild(c, state.x.row(i), stats.rounds, stats.iterations) else { continue };
            if cand.loss > cfg.candidate_threshold {
                continue;
            }
            seen.insert(key);
            this_step += 1;
            stats.candidates += 1;
            let verdict = check(&cand);
            emitted.push(cand);
            match verdict {
                Verdict::Accept(v) => {
                    stats.iterations += 1;
                    return finish(SearchStatus::CandidateFound(emitted), stats, Some(v));
                }
                // A rejected candidate is not progress; only kept ones extend the round.
                Verdict::Reject => {
                    stats.rejected += 1;
                    state.resample_row(i);
                    state.grad.row_mut(i).iter_mut().for_each(|g| *g = 0.0);
                }
                Verdict::Keep => since_new = 0,
            }
        }

        state.apply_update(cfg, cfg.deterministic);
        stats.iterations += 1;
        since_new += 1;

        if cfg.progress_every > 0 && stats.iterations.is_multiple_of(cfg.progress_every) {
            stats.trajectory.push((stats.iterations, min_loss));
            progress(&Progress {
                iteration: stats.iterations,
                round: stats.rounds,
                min_loss,
                best_loss: stats.best_loss,
                candidates: stats.candidates,
                elapsed: start.elapsed(),
            });
        }

        if since_new >= cfg.max_iters_per_round {
            if cfg.max_rounds.is_some_and(|m| stats.rounds >= m) {
                return finish(SearchStatus::Exhausted, stats, None);
            }
            state.resample_all();
            stats.rounds += 1;
            since_new = 0;
        }
    }
}

/// Runs [`search`] and accepts the first candidate.
pub fn search_first(c: &CompiledLoss, cfg: &SearchConfig) -> Result<SearchOutcome<Candidate>, EngineError> {
    search(c, cfg, |cand| Verdict::Accept(cand.clone()), |_| {})
}

// Rows at or below the threshold, lowest loss first.
fn candidate_rows(state: &BatchState, threshold: f64) -> Vec<usize> {
    let mut rows: Vec<usize> = (0..state.batch_size()).filter(|&i| state.loss[i] <= threshold).collect();
    rows.sort_by(|&a, &b| state.loss[a].total_cmp(&state.loss[b]).then(a.cmp(&b)));
    rows
}

fn grid_key(x: &[f64], grid: f64) -> Vec<i64> {
    x.iter().map(|v| (v / grid).round() as i64).collect()
}

fn rebuild(c: &CompiledLoss, x: &[f64], round: u64, iter: u64) -> Option<Candidate> {
    let per_atom: Vec<f64> = c
        .spec
        .atoms
        .iter()
        .map(|a| eval_tree(&a.poly, x).ok())
        .collect::<Option<_>>()?;
    let loss = c.spec.total_with(c.atom_loss(), &per_atom, &mut Vec::new());
    Some(Candidate {
        assignment: x.to_vec(),
        loss,
        per_atom,
        round,
        iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::CompileOptions;
    use crate::frontend::{eval_bool_exact, parse_script};
    use crate::l2o::build_loss;
    use crate::rational::from_f64;

    fn compile(src: &str) -> (crate::frontend::ParsedProblem, CompiledLoss) {
        let p = parse_script(src).unwrap();
        let c = CompiledLoss::new(build_loss(&p.formula, 1e-4), p.num_vars(), CompileOptions::default()).unwrap();
        (p, c)
    }

    fn small(batch: usize) -> SearchConfig {
        SearchConfig {
            batch_size: batch,
            wall_timeout: Some(Duration::from_secs(30)),
            ..SearchConfig::default()
        }
    }

    #[test]
    fn interior_candidate_in_first_round() {
        let (p, c) = compile("(declare-fun x () Real)(assert (<= (* x x) (/ 1 4)))");
        let out = search_first(&c, &small(64)).unwrap();
        let cand = out.accepted.unwrap();
        assert_eq!(out.stats.rounds, 1);
        assert!(cand.assignment[0].abs() <= 0.5);
        assert!(cand.loss <= 0.0);
        let point = [from_f64(cand.assignment[0]).unwrap()];
        assert!(eval_bool_exact(&p.formula, &point).unwrap());
    }

    #[test]
    fn constant_false_is_exhausted() {
        let (_, c) = compile("(assert (<= 1 0))");
        let cfg = SearchConfig {
            max_iters_per_round: 20,
            max_rounds: Some(2),
            ..small(8)
        };
        let out = search_first(&c, &cfg).unwrap();
        assert_eq!(out.status, SearchStatus::Exhausted);
        assert_eq!(out.stats.rounds, 2);
        assert_eq!(out.stats.iterations, 40);
        assert_eq!(out.stats.best_loss, 1.0);
        assert!(out.accepted.is_none());
    }

    #[test]
    fn timeout() {
        let (_, c) = compile("(assert (<= 1 0))");
        let cfg = SearchConfig {
            wall_timeout: Some(Duration::from_millis(50)),
            ..small(8)
        };
        assert_eq!(search_first(&c, &cfg).unwrap().status, SearchStatus::TimedOut);
    }

    #[test]
    fn small_kissing_configuration() {
        let (_, c) = compile(
            "(declare-fun a0 () Real)(declare-fun a1 () Real)(declare-fun b0 () Real)(declare-fun b1 () Real)
             (assert (= (+ (* a0 a0) (* a1 a1)) 1))
             (assert (= (+ (* b0 b0) (* b1 b1)) 1))
             (assert (>= (+ (* (- a0 b0) (- a0 b0)) (* (- a1 b1) (- a1 b1))) 1))",
        );
        let out = search_first(&c, &small(1000)).unwrap();
        let cand = out.accepted.expect("candidate");
        assert!(cand.loss <= 0.0);
        assert!(cand.per_atom[0].abs() <= 1e-4 && cand.per_atom[1].abs() <= 1e-4);
        assert!(cand.per_atom[2] <= 0.0);
    }

    #[test]
    fn rejected_candidates_are_resampled_and_deduplicated() {
        let (_, c) = compile("(declare-fun x () Real)(assert (<= (* x x) (/ 1 4)))");
        let cfg = SearchConfig {
            max_iters_per_round: 3,
            max_rounds: Some(2),
            max_candidates_per_step: 4,
            ..small(16)
        };
        let mut seen = Vec::new();
        let out = search(
            &c,
            &cfg,
            |cand| {
                seen.push(cand.assignment.clone());
                Verdict::<()>::Reject
            },
            |_| {},
        )
        .unwrap();
        assert_eq!(out.status, SearchStatus::Exhausted);
        assert_eq!(out.stats.rejected as usize, seen.len());
        assert!(seen.len() >= 4);
        let keys: HashSet<Vec<i64>> = seen.iter().map(|x| grid_key(x, 1e-6)).collect();
        assert_eq!(keys.len(), seen.len());
    }

    fn stream(c: &CompiledLoss, cfg: &SearchConfig) -> Vec<Candidate> {
        let mut all = Vec::new();
        search(
            c,
            cfg,
            |cand| {
                all.push(cand.clone());
                Verdict::<()>::Keep
            },
            |_| {},
        )
        .unwrap();
        all
    }

    #[test]
    fn deterministic_candidate_stream() {
        let (_, c) = compile("(declare-fun x () Real)(declare-fun y () Real)(assert (< (+ (* x y) (* x x)) 0))");
        let cfg = SearchConfig {
            deterministic: true,
            seed: 11,
            max_iters_per_round: 5,
            max_rounds: Some(3),
            ..small(300)
        };
        let a = stream(&c, &cfg);
        assert!(!a.is_empty());
        assert_eq!(a, stream(&c, &cfg));
        let parallel = SearchConfig { deterministic: false, ..cfg };
        assert_eq!(a, stream(&c, &parallel));
    }

    #[test]
    fn progress_events() {
        let (_, c) = compile("(assert (<= 1 0))");
        let cfg = SearchConfig {
            max_iters_per_round: 10,
            max_rounds: Some(1),
            progress_every: 5,
            ..small(4)
        };
        let mut events = Vec::new();
        let out = search(&c, &cfg, |_| Verdict::<()>::Keep, |p| events.push(p.iteration)).unwrap();
        assert_eq!(events, vec![5, 10]);
        assert_eq!(out.stats.trajectory, vec![(5, 1.0), (10, 1.0)]);
    }
}
