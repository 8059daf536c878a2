//! Two-chain coupled HMM.
//!
//! Between steps each chain moves according to its own previous state and
//! the other chain's previous state. The per-step potential is
//!
//! ```text
//! trans1[i1][j1] * trans2[i2][j2] * cross1[i2][j1] * cross2[i1][j2] * emit1[j1][o1] * emit2[j2][o2]
//! ```
//!
//! where `cross1` is chain 1's influence table `p(s1_t | s2_{t-1})` and
//! `cross2` the reverse. The product is not normalised over `(j1, j2)`; it
//! is used as a max-product potential. The first step uses each chain's
//! initial distribution and emissions only.

use serde::{Deserialize, Serialize};

use super::{check_stochastic, default_names, first_argmax, log_matrix, normalize, normalize_rows, HmmError, MODEL_VERSION};

pub const CHMM_FORMAT: &str = "engage-chmm";

/// Parameters of one chain `m`; `cross[i][j] = p(s^m_t = j | s^n_{t-1} = i)`
/// for the other chain `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub initial: Vec<f64>,
    pub trans: Vec<Vec<f64>>,
    pub cross: Vec<Vec<f64>>,
    pub emit: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChmmModel {
    pub format: String,
    pub version: u32,
    pub n_states: usize,
    pub n_symbols: usize,
    pub chains: [ChainParams; 2],
    pub state_names: Vec<String>,
    pub symbol_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadStep {
    /// Observation of each participant; `None` while that participant is silent.
    pub obs: [Option<usize>; 2],
    /// Gold engagement state of each participant, when known.
    pub gold: [Option<usize>; 2],
    pub t: f64,
}

/// Aligned two-participant event sequence of one dialogue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadTimeline {
    pub dialogue: String,
    pub speakers: [String; 2],
    pub steps: Vec<DyadStep>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPath {
    pub chains: [Vec<usize>; 2],
    pub log_score: f64,
}

impl DyadTimeline {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Checks that timestamps never decrease and every step observes at
    /// least one participant.
    pub fn validate(&self) -> Result<(), HmmError> {
        for (i, s) in self.steps.iter().enumerate() {
            if s.obs.iter().all(Option::is_none) {
                return Err(HmmError::InvalidTimeline(format!("step {i} observes neither participant")));
            }
            if i > 0 && s.t < self.steps[i - 1].t {
                return Err(HmmError::InvalidTimeline(format!("timestamp decreases at step {i}")));
            }
        }
        Ok(())
    }

    pub fn observations(&self, chain: usize) -> Vec<Option<usize>> {
        self.steps.iter().map(|s| s.obs[chain]).collect()
    }

    pub fn gold(&self, chain: usize) -> Vec<Option<usize>> {
        self.steps.iter().map(|s| s.gold[chain]).collect()
    }

    /// The same dialogue with participants swapped.
    pub fn swapped(&self) -> Self {
        Self {
            dialogue: self.dialogue.clone(),
            speakers: [self.speakers[1].clone(), self.speakers[0].clone()],
            steps: self
                .steps
                .iter()
                .map(|s| DyadStep {
                    obs: [s.obs[1], s.obs[0]],
                    gold: [s.gold[1], s.gold[0]],
                    t: s.t,
                })
                .collect(),
        }
    }
}

impl ChmmModel {
    pub fn new(chains: [ChainParams; 2]) -> Result<Self, HmmError> {
        let n_states = chains[0].initial.len();
        let n_symbols = chains[0].emit.first().map_or(0, |r| r.len());
        let model = Self {
            format: CHMM_FORMAT.into(),
            version: MODEL_VERSION,
            n_states,
            n_symbols,
            chains,
            state_names: default_names(n_states),
            symbol_names: default_names(n_symbols),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), HmmError> {
        if self.format != CHMM_FORMAT || self.version != MODEL_VERSION {
            return Err(HmmError::InvalidModel(format!(
                "unsupported document {} v{}",
                self.format, self.version
            )));
        }
        let (n, k) = (self.n_states, self.n_symbols);
        if n == 0 || k == 0 {
            return Err(HmmError::InvalidModel("empty state or symbol alphabet".into()));
        }
        if self.state_names.len() != n || self.symbol_names.len() != k {
            return Err(HmmError::InvalidModel("name tables do not match alphabet sizes".into()));
        }
        for (m, c) in self.chains.iter().enumerate() {
            if c.trans.len() != n || c.cross.len() != n || c.emit.len() != n {
                return Err(HmmError::InvalidModel(format!(
                    "chain {m} matrix height differs from n_states"
                )));
            }
            check_stochastic("initial", std::slice::from_ref(&c.initial), n)?;
            check_stochastic("trans", &c.trans, n)?;
            check_stochastic("cross", &c.cross, n)?;
            check_stochastic("emit", &c.emit, k)?;
        }
        Ok(())
    }

    /// Two independent HMMs joined with uniform cross tables.
    pub fn from_independent(a: &super::HmmModel, b: &super::HmmModel) -> Result<Self, HmmError> {
        if a.n_states != b.n_states || a.n_symbols != b.n_symbols {
            return Err(HmmError::InvalidModel("chains must share alphabets".into()));
        }
        let n = a.n_states;
        let chain = |h: &super::HmmModel| ChainParams {
            initial: h.initial.clone(),
            trans: h.trans.clone(),
            cross: vec![vec![1.0 / n as f64; n]; n],
            emit: h.emit.clone(),
        };
        Self::new([chain(a), chain(b)])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialises")
    }

    pub fn from_json(s: &str) -> Result<Self, HmmError> {
        let model: Self = serde_json::from_str(s).map_err(|e| HmmError::InvalidModel(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    /// Log of the unnormalised potential of a pair of paths.
    pub fn path_log_score(&self, paths: &[Vec<usize>; 2], timeline: &DyadTimeline) -> f64 {
        let [c1, c2] = &self.chains;
        let mut score = 0.0;
        for (t, step) in timeline.steps.iter().enumerate() {
            let (j1, j2) = (paths[0][t], paths[1][t]);
            if t == 0 {
                score += c1.initial[j1].ln() + c2.initial[j2].ln();
            } else {
                let (i1, i2) = (paths[0][t - 1], paths[1][t - 1]);
                score += c1.trans[i1][j1].ln() + c2.trans[i2][j2].ln() + c1.cross[i2][j1].ln() + c2.cross[i1][j2].ln();
            }
            if let Some(o) = step.obs[0] {
                score += c1.emit[j1][o].ln();
            }
            if let Some(o) = step.obs[1] {
                score += c2.emit[j2][o].ln();
            }
        }
        score
    }
}

/// Counts within-chain transitions `s^m_{t-1} -> s^m_t`, cross transitions
/// `s^n_{t-1} -> s^m_t` and emissions at steps where chain `m` is observed.
pub fn train_chmm_supervised(
    dyads: &[DyadTimeline],
    n_states: usize,
    n_symbols: usize,
    alpha: f64,
) -> Result<ChmmModel, HmmError> {
    if alpha.is_nan() || alpha < 0.0 {
        return Err(HmmError::InvalidModel(format!("smoothing must be >= 0, got {alpha}")));
    }
    if dyads.iter().all(|d| d.is_empty()) || n_states == 0 || n_symbols == 0 {
        return Err(HmmError::EmptyTraining);
    }
    let square = || vec![vec![0.0; n_states]; n_states];
    let mut initial = [vec![0.0; n_states], vec![0.0; n_states]];
    let mut trans = [square(), square()];
    let mut cross = [square(), square()];
    let mut emit = [vec![vec![0.0; n_symbols]; n_states], vec![vec![0.0; n_symbols]; n_states]];

    for d in dyads {
        let mut prev: Option<[usize; 2]> = None;
        for (t, step) in d.steps.iter().enumerate() {
            let mut cur = [0; 2];
            for (m, c) in cur.iter_mut().enumerate() {
                let s = step.gold[m].ok_or(HmmError::MissingGold { step: t, chain: m })?;
                if s >= n_states {
                    return Err(HmmError::StateOutOfRange { state: s, n_states });
                }
                *c = s;
            }
            for m in 0..2 {
                let other = 1 - m;
                match prev {
                    None => initial[m][cur[m]] += 1.0,
                    Some(p) => {
                        trans[m][p[m]][cur[m]] += 1.0;
                        cross[m][p[other]][cur[m]] += 1.0;
                    }
                }
                if let Some(o) = step.obs[m] {
                    if o >= n_symbols {
                        return Err(HmmError::SymbolOutOfRange { symbol: o, n_symbols });
                    }
                    emit[m][cur[m]][o] += 1.0;
                }
            }
            prev = Some(cur);
        }
    }

    let chain = |m: usize| ChainParams {
        initial: normalize(&initial[m], alpha),
        trans: normalize_rows(&trans[m], alpha),
        cross: normalize_rows(&cross[m], alpha),
        emit: normalize_rows(&emit[m], alpha),
    };
    ChmmModel::new([chain(0), chain(1)])
}

/// The unnormalised potential of moving from `prev` to `cur` while seeing
/// `obs`. A missing observation contributes a factor of 1.
pub fn coupled_step_score(
    model: &ChmmModel,
    prev: (usize, usize),
    cur: (usize, usize),
    obs: [Option<usize>; 2],
) -> Result<f64, HmmError> {
    let n = model.n_states;
    for s in [prev.0, prev.1, cur.0, cur.1] {
        if s >= n {
            return Err(HmmError::StateOutOfRange { state: s, n_states: n });
        }
    }
    if let Some(&o) = obs.iter().flatten().find(|&&o| o >= model.n_symbols) {
        return Err(HmmError::SymbolOutOfRange {
            symbol: o,
            n_symbols: model.n_symbols,
        });
    }
    let [c1, c2] = &model.chains;
    let (i1, i2) = prev;
    let (j1, j2) = cur;
    let e1 = obs[0].map_or(1.0, |o| c1.emit[j1][o]);
    let e2 = obs[1].map_or(1.0, |o| c2.emit[j2][o]);
    Ok(c1.trans[i1][j1] * c2.trans[i2][j2] * c1.cross[i2][j1] * c2.cross[i1][j2] * e1 * e2)
}

/// Joint Viterbi over the `n_states^2` product space. Joint state
/// `(j1, j2)` is indexed `j1 * n + j2`, so the lowest-index tie rule gives
/// the lexicographically smallest joint path.
pub fn viterbi_coupled(model: &ChmmModel, timeline: &DyadTimeline) -> Result<CoupledPath, HmmError> {
    if timeline.is_empty() {
        return Err(HmmError::EmptyObservation);
    }
    if let Some(&o) = timeline
        .steps
        .iter()
        .flat_map(|s| s.obs.iter().flatten())
        .find(|&&o| o >= model.n_symbols)
    {
        return Err(HmmError::SymbolOutOfRange {
            symbol: o,
            n_symbols: model.n_symbols,
        });
    }
    let n = model.n_states;
    let joint = n * n;
    let [c1, c2] = &model.chains;
    let (t1, t2) = (log_matrix(&c1.trans), log_matrix(&c2.trans));
    let (x1, x2) = (log_matrix(&c1.cross), log_matrix(&c2.cross));
    let (e1, e2) = (log_matrix(&c1.emit), log_matrix(&c2.emit));
    let steps = &timeline.steps;

    let emission = |j: usize, t: usize| {
        let (j1, j2) = (j / n, j % n);
        steps[t].obs[0].map_or(0.0, |o| e1[j1][o]) + steps[t].obs[1].map_or(0.0, |o| e2[j2][o])
    };
    // log potential of the joint move i -> j, emissions excluded
    let mut log_move = vec![0.0; joint * joint];
    for i in 0..joint {
        let (i1, i2) = (i / n, i % n);
        for j in 0..joint {
            let (j1, j2) = (j / n, j % n);
            log_move[i * joint + j] = t1[i1][j1] + t2[i2][j2] + x1[i2][j1] + x2[i1][j2];
        }
    }

    let len = steps.len();
    let mut suffix = vec![vec![0.0; joint]; len];
    for t in (0..len - 1).rev() {
        let next: Vec<f64> = (0..joint).map(|j| emission(j, t + 1) + suffix[t + 1][j]).collect();
        for i in 0..joint {
            let row = &log_move[i * joint..(i + 1) * joint];
            suffix[t][i] = row.iter().zip(&next).map(|(m, v)| m + v).fold(f64::NEG_INFINITY, f64::max);
        }
    }

    let mut path = Vec::with_capacity(len);
    let (first, _) =
        first_argmax((0..joint).map(|j| c1.initial[j / n].ln() + c2.initial[j % n].ln() + emission(j, 0) + suffix[0][j]));
    path.push(first);
    for t in 1..len {
        let i = path[t - 1];
        let (j, _) = first_argmax((0..joint).map(|j| log_move[i * joint + j] + emission(j, t) + suffix[t][j]));
        path.push(j);
    }
    let chains = [
        path.iter().map(|j| j / n).collect::<Vec<_>>(),
        path.iter().map(|j| j % n).collect::<Vec<_>>(),
    ];
    let log_score = model.path_log_score(&chains, timeline);
    Ok(CoupledPath { chains, log_score })
}
