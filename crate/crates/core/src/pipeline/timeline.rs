//! Merging two speakers' utterances into a dyad timeline.

use std::collections::BTreeSet;

use crate::chmm::{DyadStep, DyadTimeline};

use super::PipelineError;

/// One utterance as seen by the timeline builder. `obs` and `gold` are
/// 0-based symbol and state indices.
#[derive(Debug, Clone, PartialEq)]
pub struct TimelineEvent {
    pub speaker: String,
    pub start_s: f64,
    pub obs: Option<usize>,
    pub gold: Option<usize>,
}

/// Orders utterances by start time (ties go to the lexicographically lower
/// speaker id) and emits one step per utterance. Chain 0 is the lower
/// speaker id. The silent participant gets no observation and no gold.
pub fn build_timeline(dialogue: &str, events: &[TimelineEvent]) -> Result<DyadTimeline, PipelineError> {
    let speakers: BTreeSet<&str> = events.iter().map(|e| e.speaker.as_str()).collect();
    if speakers.len() != 2 {
        return Err(PipelineError::NotTwoSpeakers {
            dialogue: dialogue.to_string(),
            count: speakers.len(),
        });
    }
    if let Some(e) = events.iter().find(|e| !e.start_s.is_finite()) {
        return Err(PipelineError::InvalidConfig(format!(
            "non-finite start time for speaker {}",
            e.speaker
        )));
    }
    let ids: Vec<&str> = speakers.into_iter().collect();
    let steps = timeline_order(events)
        .into_iter()
        .map(|i| {
            let e = &events[i];
            let m = usize::from(e.speaker != ids[0]);
            let mut step = DyadStep {
                obs: [None, None],
                gold: [None, None],
                t: e.start_s,
            };
            step.obs[m] = e.obs;
            step.gold[m] = e.gold;
            step
        })
        .collect();
    Ok(DyadTimeline {
        dialogue: dialogue.to_string(),
        speakers: [ids[0].to_string(), ids[1].to_string()],
        steps,
    })
}

/// Event indices in timeline step order.
pub fn timeline_order(events: &[TimelineEvent]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..events.len()).collect();
    order.sort_by(|&a, &b| {
        let (ea, eb) = (&events[a], &events[b]);
        ea.start_s
            .total_cmp(&eb.start_s)
            .then_with(|| ea.speaker.cmp(&eb.speaker))
            .then(a.cmp(&b))
    });
    order
}

/// Index of the chain that speaks at each step, if any.
pub fn speaking_chain(step: &DyadStep) -> Option<usize> {
    (0..2).find(|&m| step.obs[m].is_some() || step.gold[m].is_some())
}

/// Fills each chain's missing gold states with its most recent labelled
/// state, or its first labelled state before it has spoken. A chain that is
/// never labelled stays empty.
pub fn fill_gold(timeline: &DyadTimeline) -> DyadTimeline {
    let mut out = timeline.clone();
    for m in 0..2 {
        let first = timeline.steps.iter().find_map(|s| s.gold[m]);
        let mut last = first;
        for step in &mut out.steps {
            match step.gold[m] {
                Some(g) => last = Some(g),
                None => step.gold[m] = last,
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(speaker: &str, start_s: f64, obs: usize) -> TimelineEvent {
        TimelineEvent {
            speaker: speaker.into(),
            start_s,
            obs: Some(obs),
            gold: Some(obs),
        }
    }

    #[test]
    fn interleaves_by_time_with_missing_partner() {
        let events = [ev("B", 1.0, 1), ev("A", 0.0, 0), ev("A", 2.0, 2)];
        let tl = build_timeline("d", &events).unwrap();
        assert_eq!(tl.speakers, ["A".to_string(), "B".to_string()]);
        assert_eq!(tl.observations(0), vec![Some(0), None, Some(2)]);
        assert_eq!(tl.observations(1), vec![None, Some(1), None]);
        assert_eq!(
            tl.steps.iter().map(speaking_chain).collect::<Vec<_>>(),
            vec![Some(0), Some(1), Some(0)]
        );
    }

    #[test]
    fn equal_start_goes_to_lower_id() {
        let tl = build_timeline("d", &[ev("b", 1.0, 1), ev("a", 1.0, 0)]).unwrap();
        assert_eq!(tl.observations(0), vec![Some(0), None]);
    }

    #[test]
    fn needs_two_speakers() {
        let err = build_timeline("d", &[ev("a", 0.0, 0), ev("a", 1.0, 0)]).unwrap_err();
        assert!(matches!(err, PipelineError::NotTwoSpeakers { count: 1, .. }));
        let err = build_timeline("d", &[ev("a", 0.0, 0), ev("b", 1.0, 0), ev("c", 2.0, 0)]).unwrap_err();
        assert!(matches!(err, PipelineError::NotTwoSpeakers { count: 3, .. }));
    }

    #[test]
    fn fill_carries_forward_and_back() {
        let tl = build_timeline("d", &[ev("a", 0.0, 3), ev("b", 1.0, 1), ev("a", 2.0, 4), ev("b", 3.0, 2)]).unwrap();
        let filled = fill_gold(&tl);
        assert_eq!(filled.gold(0), vec![Some(3), Some(3), Some(4), Some(4)]);
        assert_eq!(filled.gold(1), vec![Some(1), Some(1), Some(1), Some(2)]);
        assert_eq!(filled.observations(1), tl.observations(1));
    }
}
