use super::{PcPoint, TransitionSystem};

/// A concrete execution: `states[t+1] = step(states[t], inputs[t])`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub states: Vec<Vec<u64>>,
    pub inputs: Vec<Vec<u64>>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> &[u64] {
        self.states.last().expect("non-empty trace")
    }

    /// First step index `t` whose successor disagrees with `ts`, if any.
    pub fn first_mismatch(&self, ts: &TransitionSystem) -> Option<usize> {
        (0..self.inputs.len()).find(|&t| ts.step(&self.states[t], &self.inputs[t]) != self.states[t + 1])
    }

    /// Starts in Init, follows Tr, ends in Bad.
    pub fn check_counterexample(&self, ts: &TransitionSystem) -> Result<(), String> {
        if self.states.is_empty() || self.inputs.len() + 1 != self.states.len() {
            return Err("malformed trace shape".into());
        }
        if !ts.is_init(&self.states[0]) {
            return Err("first state is not initial".into());
        }
        if let Some(t) = self.first_mismatch(ts) {
            return Err(format!("step {t} is not a transition"));
        }
        if !ts.is_bad(self.last()) {
            return Err("last state is not bad".into());
        }
        Ok(())
    }

    /// Index `k` with `spec = 0` at `k-1` and `spec > 0` at `k`; it must be
    /// unique.
    pub fn split_point(&self, ts: &TransitionSystem) -> Result<usize, String> {
        let spec: Vec<u64> = self.states.iter().map(|s| ts.spec_value(s)).collect();
        let flips: Vec<usize> = (1..spec.len()).filter(|&k| spec[k - 1] == 0 && spec[k] > 0).collect();
        match flips.as_slice() {
            [k] if spec[..*k].iter().all(|&v| v == 0) && spec[*k..].iter().all(|&v| v > 0) => Ok(*k),
            [] => Err("speculation never starts".into()),
            _ => Err(format!("speculation flips {} times", flips.len())),
        }
    }

    pub fn points(&self, ts: &TransitionSystem) -> Vec<PcPoint> {
        self.states.iter().map(|s| ts.pc_point(s)).collect()
    }

    /// Code point sequence; `~>` marks the step that starts speculating.
    pub fn render(&self, ts: &TransitionSystem) -> String {
        let mut out = String::new();
        for (t, s) in self.states.iter().enumerate() {
            if t > 0 {
                let flip = ts.spec_value(&self.states[t - 1]) == 0 && ts.spec_value(s) > 0;
                out.push_str(if flip { " ~> " } else { " -> " });
            }
            out.push_str(&ts.pc_point(s).to_string());
        }
        out
    }

    /// Replays the recorded initial state and inputs in `ts`, overriding the
    /// initial values `ts` fixes. Returns the first step whose successor
    /// differs from the recorded one, ignoring variables `ts` initialises
    /// differently.
    pub fn replay_divergence(&self, ts: &TransitionSystem) -> Option<usize> {
        let overridden: Vec<(usize, u64)> = ts
            .init
            .iter()
            .filter(|(v, c)| self.states[0][v.0 as usize] != *c)
            .map(|&(v, c)| (v.0 as usize, c))
            .collect();
        let patch = |s: &[u64]| {
            let mut s = s.to_vec();
            for &(i, c) in &overridden {
                s[i] = c;
            }
            s
        };
        let mut cur = patch(&self.states[0]);
        for t in 0..self.inputs.len() {
            let next = ts.step(&cur, &self.inputs[t]);
            if next != patch(&self.states[t + 1]) {
                return Some(t);
            }
            cur = next;
        }
        None
    }
}
