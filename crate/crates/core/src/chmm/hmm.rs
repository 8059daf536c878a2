use serde::{Deserialize, Serialize};

use super::{check_stochastic, default_names, first_argmax, log_matrix, normalize, normalize_rows, HmmError, MODEL_VERSION};

pub const HMM_FORMAT: &str = "engage-hmm";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmModel {
    pub format: String,
    pub version: u32,
    pub n_states: usize,
    pub n_symbols: usize,
    pub initial: Vec<f64>,
    /// `trans[i][j] = p(s_t = j | s_{t-1} = i)`
    pub trans: Vec<Vec<f64>>,
    /// `emit[j][o] = p(o | s = j)`
    pub emit: Vec<Vec<f64>>,
    pub state_names: Vec<String>,
    pub symbol_names: Vec<String>,
}

/// One gold-labelled training sequence. Steps without an observation still
/// count towards transitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSequence {
    pub states: Vec<usize>,
    pub obs: Vec<Option<usize>>,
}

impl LabeledSequence {
    pub fn observed(states: Vec<usize>, obs: Vec<usize>) -> Self {
        Self {
            states,
            obs: obs.into_iter().map(Some).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViterbiPath {
    pub states: Vec<usize>,
    pub log_score: f64,
}

impl HmmModel {
    pub fn new(initial: Vec<f64>, trans: Vec<Vec<f64>>, emit: Vec<Vec<f64>>) -> Result<Self, HmmError> {
        let n_states = initial.len();
        let n_symbols = emit.first().map_or(0, |r| r.len());
        let model = Self {
            format: HMM_FORMAT.into(),
            version: MODEL_VERSION,
            n_states,
            n_symbols,
            initial,
            trans,
            emit,
            state_names: default_names(n_states),
            symbol_names: default_names(n_symbols),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), HmmError> {
        if self.format != HMM_FORMAT || self.version != MODEL_VERSION {
            return Err(HmmError::InvalidModel(format!(
                "unsupported document {} v{}",
                self.format, self.version
            )));
        }
        if self.n_states == 0 || self.n_symbols == 0 {
            return Err(HmmError::InvalidModel("empty state or symbol alphabet".into()));
        }
        if self.trans.len() != self.n_states || self.emit.len() != self.n_states {
            return Err(HmmError::InvalidModel("matrix height differs from n_states".into()));
        }
        if self.state_names.len() != self.n_states || self.symbol_names.len() != self.n_symbols {
            return Err(HmmError::InvalidModel("name tables do not match alphabet sizes".into()));
        }
        check_stochastic("initial", std::slice::from_ref(&self.initial), self.n_states)?;
        check_stochastic("trans", &self.trans, self.n_states)?;
        check_stochastic("emit", &self.emit, self.n_symbols)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialises")
    }

    pub fn from_json(s: &str) -> Result<Self, HmmError> {
        let model: Self = serde_json::from_str(s).map_err(|e| HmmError::InvalidModel(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    /// Log probability of a state path jointly with the observations.
    pub fn path_log_score(&self, states: &[usize], obs: &[Option<usize>]) -> f64 {
        let mut score = 0.0;
        for (t, (&s, o)) in states.iter().zip(obs).enumerate() {
            score += if t == 0 {
                self.initial[s].ln()
            } else {
                self.trans[states[t - 1]][s].ln()
            };
            if let Some(o) = o {
                score += self.emit[s][*o].ln();
            }
        }
        score
    }
}

/// Counting estimate of initial, transition and emission probabilities with
/// additive smoothing `alpha`.
pub fn train_hmm_supervised(
    seqs: &[LabeledSequence],
    n_states: usize,
    n_symbols: usize,
    alpha: f64,
) -> Result<HmmModel, HmmError> {
    if alpha.is_nan() || alpha < 0.0 {
        return Err(HmmError::InvalidModel(format!("smoothing must be >= 0, got {alpha}")));
    }
    if seqs.iter().all(|s| s.states.is_empty()) || n_states == 0 || n_symbols == 0 {
        return Err(HmmError::EmptyTraining);
    }
    let mut initial = vec![0.0; n_states];
    let mut trans = vec![vec![0.0; n_states]; n_states];
    let mut emit = vec![vec![0.0; n_symbols]; n_states];
    for seq in seqs {
        if seq.states.len() != seq.obs.len() {
            return Err(HmmError::LengthMismatch(seq.states.len(), seq.obs.len()));
        }
        for (t, (&s, o)) in seq.states.iter().zip(&seq.obs).enumerate() {
            if s >= n_states {
                return Err(HmmError::StateOutOfRange { state: s, n_states });
            }
            if t == 0 {
                initial[s] += 1.0;
            } else {
                trans[seq.states[t - 1]][s] += 1.0;
            }
            if let Some(o) = *o {
                if o >= n_symbols {
                    return Err(HmmError::SymbolOutOfRange { symbol: o, n_symbols });
                }
                emit[s][o] += 1.0;
            }
        }
    }
    HmmModel::new(
        normalize(&initial, alpha),
        normalize_rows(&trans, alpha),
        normalize_rows(&emit, alpha),
    )
}

pub fn viterbi_hmm(model: &HmmModel, obs: &[usize]) -> Result<ViterbiPath, HmmError> {
    let obs: Vec<Option<usize>> = obs.iter().copied().map(Some).collect();
    viterbi_hmm_partial(model, &obs)
}

/// Viterbi over observations that may be missing; a missing step
/// contributes no emission factor.
///
/// The recursion runs backwards (best suffix score from each state) and the
/// path is then read forwards, taking the lowest state index whenever
/// several continue an optimal path. That yields the lexicographically
/// smallest optimal path.
pub fn viterbi_hmm_partial(model: &HmmModel, obs: &[Option<usize>]) -> Result<ViterbiPath, HmmError> {
    if obs.is_empty() {
        return Err(HmmError::EmptyObservation);
    }
    let n = model.n_states;
    if let Some(&bad) = obs.iter().flatten().find(|&&o| o >= model.n_symbols) {
        return Err(HmmError::SymbolOutOfRange {
            symbol: bad,
            n_symbols: model.n_symbols,
        });
    }
    let log_trans = log_matrix(&model.trans);
    let log_emit = log_matrix(&model.emit);
    let emission = |s: usize, t: usize| obs[t].map_or(0.0, |o| log_emit[s][o]);

    let len = obs.len();
    // suffix[t][s]: best log score of steps t+1.. given state s at t
    let mut suffix = vec![vec![0.0; n]; len];
    for t in (0..len - 1).rev() {
        for s in 0..n {
            suffix[t][s] = (0..n)
                .map(|s2| log_trans[s][s2] + emission(s2, t + 1) + suffix[t + 1][s2])
                .fold(f64::NEG_INFINITY, f64::max);
        }
    }

    let mut states = Vec::with_capacity(len);
    let (first, _) = first_argmax((0..n).map(|s| model.initial[s].ln() + emission(s, 0) + suffix[0][s]));
    states.push(first);
    for t in 1..len {
        let prev = states[t - 1];
        let (s, _) = first_argmax((0..n).map(|s| log_trans[prev][s] + emission(s, t) + suffix[t][s]));
        states.push(s);
    }
    let log_score = model.path_log_score(&states, obs);
    Ok(ViterbiPath { states, log_score })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_counted_three_steps() {
        // states [1, 1, 2], obs [a, b, a] with 1-based states and a=0, b=1
        let seq = LabeledSequence::observed(vec![0, 0, 1], vec![0, 1, 0]);
        let m = train_hmm_supervised(&[seq], 2, 2, 0.0).unwrap();
        assert_eq!(m.initial, vec![1.0, 0.0]);
        assert_eq!(m.trans[0], vec![0.5, 0.5]);
        assert_eq!(m.emit[0], vec![0.5, 0.5]);
        assert_eq!(m.emit[1], vec![1.0, 0.0]);
        // no transitions leave state 2: uniform
        assert_eq!(m.trans[1], vec![0.5, 0.5]);
    }

    #[test]
    fn laplace_smoothing() {
        let seq = LabeledSequence::observed(vec![0, 0, 1], vec![0, 1, 0]);
        let m = train_hmm_supervised(&[seq], 2, 2, 1.0).unwrap();
        assert_eq!(m.trans[1], vec![0.5, 0.5]);
        assert_eq!(m.trans[0], vec![0.5, 0.5]);
        assert_eq!(m.emit[1], vec![2.0 / 3.0, 1.0 / 3.0]);
        assert!(m.trans.iter().flatten().all(|&p| p > 0.0));
    }

    #[test]
    fn training_errors() {
        assert_eq!(train_hmm_supervised(&[], 2, 2, 1.0), Err(HmmError::EmptyTraining));
        let bad = LabeledSequence::observed(vec![0, 3], vec![0, 0]);
        assert_eq!(
            train_hmm_supervised(&[bad], 2, 2, 1.0),
            Err(HmmError::StateOutOfRange { state: 3, n_states: 2 })
        );
        let mismatch = LabeledSequence {
            states: vec![0, 1],
            obs: vec![None],
        };
        assert_eq!(
            train_hmm_supervised(&[mismatch], 2, 2, 1.0),
            Err(HmmError::LengthMismatch(2, 1))
        );
    }

    #[test]
    fn missing_observation_still_counts_transitions() {
        let seq = LabeledSequence {
            states: vec![0, 1, 1],
            obs: vec![Some(0), None, Some(1)],
        };
        let m = train_hmm_supervised(&[seq], 2, 2, 0.0).unwrap();
        assert_eq!(m.trans[0], vec![0.0, 1.0]);
        assert_eq!(m.trans[1], vec![0.0, 1.0]);
        assert_eq!(m.emit[1], vec![0.0, 1.0]);
    }

    #[test]
    fn deterministic_emissions_force_the_path() {
        let identity = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let m = HmmModel::new(vec![1.0 / 3.0; 3], vec![vec![1.0 / 3.0; 3]; 3], identity).unwrap();
        let obs = [2, 0, 0, 1, 2];
        assert_eq!(viterbi_hmm(&m, &obs).unwrap().states, obs);
    }

    #[test]
    fn uniform_model_ties_to_first_state() {
        let m = HmmModel::new(vec![0.5; 2], vec![vec![0.5; 2]; 2], vec![vec![0.5; 2]; 2]).unwrap();
        assert_eq!(viterbi_hmm(&m, &[1, 0, 1, 1]).unwrap().states, vec![0, 0, 0, 0]);
    }

    #[test]
    fn tie_rule_is_lexicographic_not_last_state_first() {
        // paths (0,1) and (1,0) both score 0.5, every other path scores 0
        let m = HmmModel::new(
            vec![0.5, 0.5],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![vec![1.0], vec![1.0]],
        )
        .unwrap();
        assert_eq!(viterbi_hmm(&m, &[0, 0]).unwrap().states, vec![0, 1]);
    }

    #[test]
    fn decoding_errors() {
        let m = HmmModel::new(vec![1.0], vec![vec![1.0]], vec![vec![0.5, 0.5]]).unwrap();
        assert_eq!(viterbi_hmm(&m, &[]), Err(HmmError::EmptyObservation));
        assert_eq!(
            viterbi_hmm(&m, &[2]),
            Err(HmmError::SymbolOutOfRange { symbol: 2, n_symbols: 2 })
        );
    }

    #[test]
    fn json_round_trip_and_validation() {
        let seq = LabeledSequence::observed(vec![0, 1, 1, 0], vec![0, 1, 1, 0]);
        let m = train_hmm_supervised(&[seq], 2, 2, 1.0).unwrap();
        assert_eq!(HmmModel::from_json(&m.to_json()).unwrap(), m);
        let mut broken = m.clone();
        broken.trans[0][0] += 0.1;
        assert!(matches!(
            HmmModel::from_json(&broken.to_json()),
            Err(HmmError::InvalidModel(_))
        ));
    }
}
