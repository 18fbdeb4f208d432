use std::cmp::Ordering;
use std::collections::HashMap;

use super::{Constraints, DecodeConfig, DecodeError, GenerationState, ScoreContext, Scorer, TraceStep};
use crate::model::Document;
use crate::symbols::{TokenId, Vocab};

#[derive(Debug, Clone)]
pub(super) struct Hypothesis {
    pub ids: Vec<TokenId>,
    pub score: f64,
    pub state: GenerationState,
    pub trace: Vec<TraceStep>,
    pub truncated: bool,
}

fn rank(score: f64, len: usize, penalty: f64) -> f64 {
    if penalty == 0.0 {
        score
    } else {
        score / (len.max(1) as f64).powf(penalty)
    }
}

/// Higher rank first, then the lexicographically smaller sequence.
fn order(a: (&[TokenId], f64), b: (&[TokenId], f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0))
}

fn checked_scores(
    scorer: &dyn Scorer,
    ctx: &ScoreContext<'_>,
    vocab: &Vocab,
) -> Result<Vec<f64>, DecodeError> {
    let raw = scorer.score(ctx)?;
    if raw.len() != vocab.len() {
        return Err(DecodeError::ScoreLength { expected: vocab.len(), got: raw.len() });
    }
    if let Some(i) = raw.iter().position(|s| !s.is_finite()) {
        return Err(DecodeError::NonFinite { step: ctx.prefix.len() - 1, token: vocab.token(i as TokenId).to_string() });
    }
    Ok(raw)
}

fn map_hypotheses<T, F>(beam: &[Hypothesis], parallel: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&Hypothesis) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel && beam.len() > 1 {
        use rayon::prelude::*;
        return beam.par_iter().map(f).collect();
    }
    let _ = parallel;
    beam.iter().map(f).collect()
}

pub(super) fn search(
    doc: &Document,
    scorer: &dyn Scorer,
    c: &Constraints<'_>,
    cfg: &DecodeConfig,
) -> Result<Hypothesis, DecodeError> {
    let vocab = c.vocab();
    let width = cfg.beam_width.max(1);
    let limit = cfg.step_limit(doc);
    let mut beam = vec![Hypothesis {
        ids: vec![vocab.special.seq_start],
        score: 0.0,
        state: c.initial(),
        trace: Vec::new(),
        truncated: false,
    }];
    for step in 0..limit {
        if beam[0].state.finished {
            return Ok(beam.swap_remove(0));
        }
        let expanded = map_hypotheses(&beam, cfg.parallel && scorer.concurrent(), |h| expand(h, doc, scorer, c, cfg, step));
        let mut pool: HashMap<Vec<TokenId>, Hypothesis> = HashMap::new();
        for children in expanded {
            for h in children? {
                match pool.get(&h.ids) {
                    Some(old) if old.score >= h.score => {}
                    _ => {
                        pool.insert(h.ids.clone(), h);
                    }
                }
            }
        }
        let mut next: Vec<Hypothesis> = pool.into_values().collect();
        next.sort_by(|a, b| {
            order(
                (&a.ids, rank(a.score, a.ids.len() - 1, cfg.length_penalty)),
                (&b.ids, rank(b.score, b.ids.len() - 1, cfg.length_penalty)),
            )
        });
        next.truncate(width);
        beam = next;
    }
    if beam[0].state.finished {
        return Ok(beam.swap_remove(0));
    }
    let start = beam.iter().position(|h| !h.state.finished).unwrap_or(0);
    force_close(beam.swap_remove(start), doc, scorer, c, cfg)
}

fn expand(
    h: &Hypothesis,
    doc: &Document,
    scorer: &dyn Scorer,
    c: &Constraints<'_>,
    cfg: &DecodeConfig,
    step: usize,
) -> Result<Vec<Hypothesis>, DecodeError> {
    if h.state.finished {
        return Ok(vec![h.clone()]);
    }
    let vocab = c.vocab();
    let ctx = ScoreContext { doc, vocab, prefix: &h.ids, state: Some(&h.state) };
    let raw = checked_scores(scorer, &ctx, vocab)?;
    let mask = c.mask(&h.state);
    if mask.allowed.is_empty() {
        return Err(DecodeError::Deadlock { step, state: h.state.tag().to_string() });
    }
    let mut scored = mask.apply(&raw);
    // Only the best `width` children of one parent can survive selection.
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(cfg.beam_width.max(1));
    Ok(scored
        .into_iter()
        .map(|(tok, s)| {
            let mut ids = h.ids.clone();
            ids.push(tok);
            let mut trace = Vec::new();
            if cfg.trace {
                trace = h.trace.clone();
                trace.push(TraceStep {
                    step,
                    tag: h.state.tag().to_string(),
                    allowed: mask.allowed.len(),
                    chosen: vocab.token(tok).to_string(),
                    forced: false,
                });
            }
            Hypothesis { ids, score: h.score + s, state: c.advance_unchecked(&h.state, tok), trace, truncated: false }
        })
        .collect())
}

/// Priority used to finish a hypothesis once the step limit is reached:
/// close what is open before starting anything new.
fn closure_priority(c: &Constraints<'_>, tok: TokenId) -> (u8, TokenId) {
    let v = c.vocab();
    let sp = &v.special;
    let class = if tok == sp.seq_end {
        0
    } else if tok == sp.mention_end || v.cluster_end_value(tok).is_some() {
        1
    } else if v.integer_value(tok).is_some() {
        2
    } else if tok == sp.separator {
        3
    } else if tok == sp.sentence_end {
        4
    } else if tok == sp.sentence_start {
        6
    } else if tok == sp.mention_start {
        7
    } else {
        5
    };
    (class, tok)
}

fn force_close(
    mut h: Hypothesis,
    doc: &Document,
    scorer: &dyn Scorer,
    c: &Constraints<'_>,
    cfg: &DecodeConfig,
) -> Result<Hypothesis, DecodeError> {
    let vocab = c.vocab();
    h.truncated = true;
    let mut step = h.ids.len() - 1;
    // Generous bound: every forced move either closes markup or consumes input.
    let bound = step + 8 * (doc.len() + h.state.depth() + 8) + 64;
    while !h.state.finished {
        if step > bound {
            return Err(DecodeError::Deadlock { step, state: h.state.tag().to_string() });
        }
        let mask = c.mask(&h.state);
        let Some(&tok) = mask.allowed.iter().min_by_key(|&&t| closure_priority(c, t)) else {
            return Err(DecodeError::Deadlock { step, state: h.state.tag().to_string() });
        };
        let ctx = ScoreContext { doc, vocab, prefix: &h.ids, state: Some(&h.state) };
        let raw = checked_scores(scorer, &ctx, vocab)?;
        let s = mask.apply(&raw).into_iter().find(|(t, _)| *t == tok).map_or(0.0, |(_, s)| s);
        if cfg.trace {
            h.trace.push(TraceStep {
                step,
                tag: h.state.tag().to_string(),
                allowed: mask.allowed.len(),
                chosen: vocab.token(tok).to_string(),
                forced: true,
            });
        }
        h.score += s;
        h.state = c.advance_unchecked(&h.state, tok);
        h.ids.push(tok);
        step += 1;
    }
    Ok(h)
}

#[derive(Clone)]
struct Raw {
    actions: Vec<TokenId>,
    z: Vec<TokenId>,
    cursor: usize,
    clusters: usize,
    score: f64,
    done: bool,
}

pub(super) fn search_unconstrained(
    doc: &Document,
    scorer: &dyn Scorer,
    vocab: &Vocab,
    cfg: &DecodeConfig,
) -> Result<(Vec<TokenId>, Vec<TokenId>), DecodeError> {
    let sp = vocab.special;
    let width = cfg.beam_width.max(1);
    let source: Vec<Option<TokenId>> = doc.tokens.iter().map(|t| vocab.id(t)).collect();
    let mut beam = vec![Raw { actions: Vec::new(), z: vec![sp.seq_start], cursor: 1, clusters: 0, score: 0.0, done: false }];
    for _ in 0..cfg.step_limit(doc) {
        if beam[0].done {
            break;
        }
        let mut pool: Vec<Raw> = Vec::new();
        for h in &beam {
            if h.done {
                pool.push(h.clone());
                continue;
            }
            let ctx = ScoreContext { doc, vocab, prefix: &h.z, state: None };
            let raw = checked_scores(scorer, &ctx, vocab)?;
            let mut best: Vec<(TokenId, f64)> =
                (0..raw.len() as TokenId).filter(|&t| t != sp.seq_start).map(|t| (t, raw[t as usize])).collect();
            best.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            best.truncate(width);
            for (a, s) in best {
                let mut n = h.clone();
                n.actions.push(a);
                n.score += s;
                let z_tok = if a == sp.copy {
                    match source.get(n.cursor - 1) {
                        Some(Some(t)) => {
                            n.cursor += 1;
                            *t
                        }
                        _ => a,
                    }
                } else if a == sp.new_cluster && n.clusters < vocab.max_clusters() {
                    n.clusters += 1;
                    vocab.cluster_end(n.clusters)
                } else {
                    if let Some(l) = vocab.cluster_end_value(a) {
                        n.clusters = n.clusters.max(l);
                    } else if source.get(n.cursor - 1) == Some(&Some(a)) {
                        n.cursor += 1;
                    }
                    a
                };
                n.z.push(z_tok);
                n.done = a == sp.seq_end;
                pool.push(n);
            }
        }
        pool.sort_by(|a, b| {
            order(
                (&a.z, rank(a.score, a.actions.len(), cfg.length_penalty)),
                (&b.z, rank(b.score, b.actions.len(), cfg.length_penalty)),
            )
        });
        let mut seen = std::collections::HashSet::new();
        pool.retain(|h| seen.insert(h.z.clone()));
        pool.truncate(width);
        beam = pool;
    }
    let best = beam.swap_remove(0);
    Ok((best.actions, best.z))
}
