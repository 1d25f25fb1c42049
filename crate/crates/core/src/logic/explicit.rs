//! Breadth-first reachability over concrete states, restricted to the
//! variables that can influence the bad states.

use std::collections::{BTreeSet, HashMap, VecDeque};

use super::term::{mask, Term, VarId};
use crate::encode::{Trace, TransitionSystem};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reachability {
    Safe { states: usize },
    Unsafe(Trace),
    BudgetExceeded,
}

impl Reachability {
    pub fn is_safe(&self) -> Option<bool> {
        match self {
            Reachability::Safe { .. } => Some(true),
            Reachability::Unsafe(_) => Some(false),
            Reachability::BudgetExceeded => None,
        }
    }
}

/// State and input variables that can affect `bad`.
pub fn word_coi(ts: &TransitionSystem) -> (Vec<VarId>, Vec<VarId>) {
    let next = ts.next_terms();
    let n = ts.vars.len() as u32;
    let mut state: BTreeSet<VarId> = BTreeSet::new();
    let mut inputs: BTreeSet<VarId> = BTreeSet::new();
    let mut work: Vec<VarId> = ts.bad.vars().into_iter().collect();
    while let Some(v) = work.pop() {
        if v.0 >= n {
            inputs.insert(v);
            continue;
        }
        if state.insert(v) {
            work.extend(next[v.0 as usize].vars());
        }
    }
    (state.into_iter().collect(), inputs.into_iter().collect())
}

fn domain(ts: &TransitionSystem, v: VarId) -> u64 {
    let w = ts.width_of(v);
    if w >= 63 {
        u64::MAX
    } else {
        1u64 << w
    }
}

/// Enumerate every valuation of `vars`, calling `f` in lexicographic order.
fn for_each_valuation(
    ts: &TransitionSystem,
    vars: &[VarId],
    fixed: &dyn Fn(VarId) -> Option<u64>,
    mut f: impl FnMut(&[u64]),
) {
    let dom: Vec<(u64, u64)> = vars
        .iter()
        .map(|&v| match fixed(v) {
            Some(c) => (c, 1),
            None => (0, domain(ts, v)),
        })
        .collect();
    let mut cur: Vec<u64> = vec![0; vars.len()];
    loop {
        let vals: Vec<u64> = cur.iter().zip(&dom).map(|(c, (base, _))| base + c).collect();
        f(&vals);
        let mut i = vars.len();
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            cur[i] += 1;
            if cur[i] < dom[i].1 {
                break;
            }
            cur[i] = 0;
        }
    }
}

fn count(ts: &TransitionSystem, vars: &[VarId], fixed: &dyn Fn(VarId) -> Option<u64>) -> u128 {
    vars.iter().map(|&v| if fixed(v).is_some() { 1u128 } else { domain(ts, v) as u128 }).product()
}

/// A visited state with its parent index and the inputs taken from it.
type Node = (Vec<u64>, Option<(usize, Vec<u64>)>);

pub const DEFAULT_STATE_BUDGET: usize = 1 << 20;

/// Shortest counterexample or a proof of safety by exhaustive search.
pub fn explicit_reachable(ts: &TransitionSystem, state_budget: usize) -> Reachability {
    let (svars, ivars) = word_coi(ts);
    let next = ts.next_terms();
    let total = ts.vars.len() + ts.inputs.len();
    let init_of = |v: VarId| ts.init_value(v);
    let no_fix = |_: VarId| None;
    if count(ts, &svars, &init_of) > state_budget as u128 || count(ts, &ivars, &no_fix) > state_budget as u128 {
        return Reachability::BudgetExceeded;
    }

    // Per transition: whether its guard reads only COI state, and the COI
    // inputs it reads. A state only needs the inputs of the transitions
    // that can fire in it.
    let in_coi: BTreeSet<VarId> = svars.iter().copied().collect();
    let input_pos = |v: &VarId| ivars.iter().position(|x| x == v);
    let shapes: Vec<(bool, Vec<usize>)> = ts
        .trans
        .iter()
        .map(|g| {
            let gv = g.guard.vars();
            let decidable = gv.iter().all(|v| in_coi.contains(v));
            let mut read: BTreeSet<usize> = gv.iter().filter_map(input_pos).collect();
            for (v, t) in &g.updates {
                if in_coi.contains(v) {
                    read.extend(t.vars().iter().filter_map(input_pos));
                }
            }
            (decidable, read.into_iter().collect())
        })
        .collect();
    let mut valuations: HashMap<Vec<usize>, Vec<Vec<u64>>> = HashMap::new();

    let bad_terms: &Term = &ts.bad;
    let mut env = vec![0u64; total];
    let is_bad = |s: &[u64], env: &mut Vec<u64>| {
        for (k, v) in svars.iter().enumerate() {
            env[v.0 as usize] = s[k];
        }
        bad_terms.eval(env) == 1
    };

    let mut nodes: Vec<Node> = Vec::new();
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    let mut found = None;
    for_each_valuation(ts, &svars, &init_of, |vals| {
        if found.is_none() && !index.contains_key(vals) {
            index.insert(vals.to_vec(), nodes.len());
            queue.push_back(nodes.len());
            nodes.push((vals.to_vec(), None));
            if is_bad(vals, &mut env) {
                found = Some(nodes.len() - 1);
            }
        }
    });

    while found.is_none() {
        let Some(i) = queue.pop_front() else { break };
        let cur = nodes[i].0.clone();
        env.iter_mut().for_each(|x| *x = 0);
        for (k, v) in svars.iter().enumerate() {
            env[v.0 as usize] = cur[k];
        }
        let mut read: BTreeSet<usize> = BTreeSet::new();
        for (g, (decidable, inputs)) in ts.trans.iter().zip(&shapes) {
            if *decidable && g.guard.eval(&env) == 0 {
                continue;
            }
            read.extend(inputs);
            if *decidable {
                break;
            }
        }
        let read: Vec<usize> = read.into_iter().collect();
        let choices = valuations.entry(read.clone()).or_insert_with(|| {
            let vars: Vec<VarId> = read.iter().map(|&k| ivars[k]).collect();
            let mut out = Vec::new();
            for_each_valuation(ts, &vars, &no_fix, |vals| {
                let mut full = vec![0u64; ivars.len()];
                for (&k, &x) in read.iter().zip(vals) {
                    full[k] = x;
                }
                out.push(full);
            });
            out
        });
        for inp in choices.iter() {
            for (k, v) in ivars.iter().enumerate() {
                env[v.0 as usize] = inp[k];
            }
            let succ: Vec<u64> = svars.iter().map(|v| next[v.0 as usize].eval(&env) & mask(ts.width_of(*v))).collect();
            if index.contains_key(&succ) {
                continue;
            }
            if nodes.len() >= state_budget {
                return Reachability::BudgetExceeded;
            }
            index.insert(succ.clone(), nodes.len());
            nodes.push((succ.clone(), Some((i, inp.clone()))));
            let mut probe = env.clone();
            if is_bad(&succ, &mut probe) {
                found = Some(nodes.len() - 1);
                break;
            }
            queue.push_back(nodes.len() - 1);
        }
    }

    let Some(end) = found else {
        return Reachability::Safe { states: nodes.len() };
    };
    let mut chain = vec![end];
    while let Some((p, _)) = &nodes[*chain.last().unwrap()].1 {
        chain.push(*p);
    }
    chain.reverse();

    // Replay at full width from the initial node, irrelevant variables at
    // their initial value or zero.
    let mut s0 = vec![0u64; ts.vars.len()];
    for &(v, c) in &ts.init {
        s0[v.0 as usize] = c;
    }
    for (k, v) in svars.iter().enumerate() {
        s0[v.0 as usize] = nodes[chain[0]].0[k];
    }
    let mut states = vec![s0];
    let mut inputs = Vec::new();
    for w in chain.windows(2) {
        let (_, taken) = nodes[w[1]].1.as_ref().unwrap();
        let mut inp = vec![0u64; ts.inputs.len()];
        for (k, v) in ivars.iter().enumerate() {
            inp[v.0 as usize - ts.vars.len()] = taken[k];
        }
        let s = ts.step(states.last().unwrap(), &inp);
        states.push(s);
        inputs.push(inp);
    }
    let trace = Trace { states, inputs };
    debug_assert!(trace.check_counterexample(ts).is_ok());
    Reachability::Unsafe(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encode::{encode_speculative, encode_standard, fence_sites, PcPoint, Placement, SpecMode};
    use crate::ir::{parse_program, Label, FIG1_SOURCE};
    use crate::threat::{compute_vinst, ThreatModel};

    fn fig1_spec(active: &[&str]) -> TransitionSystem {
        let p = parse_program(FIG1_SOURCE).unwrap();
        let v = compute_vinst(&p, ThreatModel::Classical);
        let sites = fence_sites(&p, &v, Placement::AfterBranch);
        let act = active.iter().map(|s| s.to_string()).collect();
        encode_speculative(&p, &v, &sites, SpecMode::Unbounded, &act).unwrap()
    }

    #[test]
    fn fig1_unfenced_leaks_in_four_states() {
        let ts = fig1_spec(&[]);
        match explicit_reachable(&ts, DEFAULT_STATE_BUDGET) {
            Reachability::Unsafe(t) => {
                assert_eq!(t.len(), 4);
                assert_eq!(
                    t.points(&ts),
                    vec![
                        PcPoint::Inst(Label(0)),
                        PcPoint::Inst(Label(1)),
                        PcPoint::Assertion(Label(2)),
                        PcPoint::Bottom
                    ]
                );
                assert_eq!(t.split_point(&ts), Ok(1));
                assert!(t.check_counterexample(&ts).is_ok());
            }
            other => panic!("expected a leak, got {other:?}"),
        }
    }

    #[test]
    fn fig1_then_fence_is_safe() {
        assert_eq!(explicit_reachable(&fig1_spec(&["then@L0"]), DEFAULT_STATE_BUDGET).is_safe(), Some(true));
        assert_eq!(explicit_reachable(&fig1_spec(&["else@L0"]), DEFAULT_STATE_BUDGET).is_safe(), Some(false));
    }

    #[test]
    fn standard_fig1_is_safe() {
        let ts = encode_standard(&parse_program(FIG1_SOURCE).unwrap()).unwrap();
        assert_eq!(explicit_reachable(&ts, DEFAULT_STATE_BUDGET).is_safe(), Some(true));
    }

    #[test]
    fn budget_is_reported() {
        assert_eq!(explicit_reachable(&fig1_spec(&[]), 3), Reachability::BudgetExceeded);
    }
}
