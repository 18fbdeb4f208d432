//! Brute-force oracles shared by the integration tests.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use seqcoref::corpus::Segment;
use seqcoref::decoder::{Constraints, GenerationState};
use seqcoref::{CorefAnnotation, Span, TokenId};

pub fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

fn crosses(a: (usize, usize), b: (usize, usize)) -> bool {
    (a.0 < b.0 && b.0 <= a.1 && a.1 < b.1) || (b.0 < a.0 && a.0 <= b.1 && b.1 < a.1)
}

/// Every set of pairwise non-crossing spans over `1..=n`.
pub fn non_crossing_span_sets(n: usize) -> Vec<Vec<(usize, usize)>> {
    let spans: Vec<(usize, usize)> = (1..=n).flat_map(|s| (s..=n).map(move |e| (s, e))).collect();
    let mut out = Vec::new();
    fn rec(i: usize, spans: &[(usize, usize)], cur: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        if i == spans.len() {
            out.push(cur.clone());
            return;
        }
        rec(i + 1, spans, cur, out);
        if cur.iter().all(|&c| !crosses(c, spans[i])) {
            cur.push(spans[i]);
            rec(i + 1, spans, cur, out);
            cur.pop();
        }
    }
    rec(0, &spans, &mut Vec::new(), &mut out);
    out
}

/// Every annotation with at most two clusters over each non-crossing span
/// set: each span goes to cluster 1, cluster 2 or both.
pub fn two_cluster_annotations(n: usize) -> Vec<CorefAnnotation> {
    let mut out = Vec::new();
    for u in non_crossing_span_sets(n) {
        let k = u.len() as u32;
        for code in 0..3usize.pow(k) {
            let mut c = code;
            let mut spans = Vec::new();
            for &(s, e) in &u {
                match c % 3 {
                    0 => spans.push(Span::new(s, e, 1)),
                    1 => spans.push(Span::new(s, e, 2)),
                    _ => {
                        spans.push(Span::new(s, e, 1));
                        spans.push(Span::new(s, e, 2));
                    }
                }
                c /= 3;
            }
            let ann = CorefAnnotation::new(spans);
            // labels must be dense
            if ann.spans.iter().any(|s| s.cluster == 2) && !ann.spans.iter().any(|s| s.cluster == 1) {
                continue;
            }
            out.push(ann);
        }
    }
    out
}

/// Number of distinct sequences the codecs produce for annotations with at
/// most two clusters over `n` tokens.
///
/// For a span set of size k there are 3^k assignments. Swapping the two
/// labels pairs them up except for the single assignment putting every
/// span in both clusters. The sequence form distinguishes the two members
/// of a swapped pair only when both clusters start at the first span (in
/// label order) and the clusters differ: 3^(k-1) - 1 assignments, half of
/// which are extra sequences.
pub fn two_cluster_sequence_count(n: usize) -> u64 {
    non_crossing_span_sets(n)
        .iter()
        .map(|u| {
            let k = u.len() as u32;
            if k == 0 {
                1
            } else {
                (3u64.pow(k) + 1) / 2 + (3u64.pow(k - 1) - 1) / 2
            }
        })
        .sum()
}

/// Depth-first walk over every sequence the constraints accept.
pub fn walk(c: &Constraints<'_>, st: &GenerationState, z: &mut Vec<TokenId>, leaf: &mut dyn FnMut(&[TokenId])) {
    if st.finished {
        leaf(z);
        return;
    }
    let m = c.mask(st);
    assert!(!m.allowed.is_empty(), "dead end after {:?}", c.vocab().strings(z));
    for &t in &m.allowed {
        z.push(t);
        let next = c.advance_unchecked(st, t);
        walk(c, &next, z, leaf);
        z.pop();
    }
}

/// Number of accepted sequences, memoized on states with their token
/// tallies cleared.
pub fn language_size(c: &Constraints<'_>) -> u64 {
    fn rec(c: &Constraints<'_>, st: GenerationState, memo: &mut HashMap<GenerationState, u64>) -> u64 {
        if st.finished {
            return 1;
        }
        if let Some(&n) = memo.get(&st) {
            return n;
        }
        let m = c.mask(&st);
        assert!(!m.allowed.is_empty(), "dead end in state {}", st.tag());
        let mut total = 0;
        for &t in &m.allowed {
            let mut next = c.advance_unchecked(&st, t);
            next.counts = Default::default();
            total += rec(c, next, memo);
        }
        memo.insert(st, total);
        total
    }
    rec(c, c.initial(), &mut HashMap::new())
}

/// Best alignment score by enumerating every monotone set of aligned
/// pairs, with the unaligned runs between them scored as gaps.
pub fn brute_alignment_score(source: &[&str], target: &[&str], slope: f64) -> f64 {
    let gap = |n: usize| if n == 0 { 0.0 } else { -1.0 - slope * (n as f64 - 1.0) };
    fn rec(
        source: &[&str],
        target: &[&str],
        i: usize,
        j: usize,
        acc: f64,
        gap: &dyn Fn(usize) -> f64,
        best: &mut f64,
    ) {
        let stop = acc + gap(source.len() - i) + gap(target.len() - j);
        if stop > *best {
            *best = stop;
        }
        for a in i + 1..=source.len() {
            for b in j + 1..=target.len() {
                let pair = if source[a - 1] == target[b - 1] { 1.0 } else { -1.0 };
                rec(source, target, a, b, acc + gap(a - i - 1) + gap(b - j - 1) + pair, gap, best);
            }
        }
    }
    let mut best = f64::NEG_INFINITY;
    rec(source, target, 0, 0, 0.0, &gap, &mut best);
    best
}

/// φ4 similarity of two mention sets.
pub fn phi4(a: &BTreeSet<(usize, usize)>, b: &BTreeSet<(usize, usize)>) -> f64 {
    2.0 * a.intersection(b).count() as f64 / (a.len() + b.len()) as f64
}

/// Best total weight over all partial one-to-one matchings.
pub fn brute_matching(w: &[Vec<f64>]) -> f64 {
    fn rec(w: &[Vec<f64>], i: usize, used: &mut Vec<bool>) -> f64 {
        if i == w.len() {
            return 0.0;
        }
        let mut best = rec(w, i + 1, used);
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                best = best.max(w[i][j] + rec(w, i + 1, used));
                used[j] = false;
            }
        }
        best
    }
    let cols = w.first().map_or(0, Vec::len);
    rec(w, 0, &mut vec![false; cols])
}

/// Segment predictions stitched by connected components over clusters
/// that share a span across segments.
pub fn merge_by_components(parts: &[(Segment, CorefAnnotation)]) -> BTreeSet<BTreeSet<(usize, usize)>> {
    let mut nodes: Vec<(usize, usize)> = Vec::new();
    let mut members: Vec<BTreeSet<(usize, usize)>> = Vec::new();
    for (k, (seg, pred)) in parts.iter().enumerate() {
        for s in &pred.spans {
            let g = (s.start + seg.offset, s.end + seg.offset);
            let idx = match nodes.iter().position(|&n| n == (k, s.cluster)) {
                Some(i) => i,
                None => {
                    nodes.push((k, s.cluster));
                    members.push(BTreeSet::new());
                    nodes.len() - 1
                }
            };
            members[idx].insert(g);
        }
    }
    let linked = |a: usize, b: usize| nodes[a].0 != nodes[b].0 && !members[a].is_disjoint(&members[b]);
    let mut seen = vec![false; nodes.len()];
    let mut out = BTreeSet::new();
    for root in 0..nodes.len() {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        let mut cluster = BTreeSet::new();
        while let Some(a) = queue.pop_front() {
            cluster.extend(members[a].iter().copied());
            for b in 0..nodes.len() {
                if !seen[b] && linked(a, b) {
                    seen[b] = true;
                    queue.push_back(b);
                }
            }
        }
        out.insert(cluster);
    }
    out
}

pub fn distinct<T: std::hash::Hash + Eq>(items: impl IntoIterator<Item = T>) -> usize {
    items.into_iter().collect::<HashSet<_>>().len()
}

/// Clusters as a sorted multiset, so identical clusters are kept apart.
pub fn clusters_of(ann: &CorefAnnotation) -> Vec<BTreeSet<(usize, usize)>> {
    let mut by_label = vec![BTreeSet::new(); ann.num_clusters];
    for s in &ann.spans {
        by_label[s.cluster - 1].insert(s.bounds());
    }
    by_label.sort();
    by_label
}
