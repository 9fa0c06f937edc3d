//! Streaming detection over a data CSV, in constant memory.

use std::io::{BufRead, Write};

use crate::detect::{AlarmEvent, DetectorBank, DetectorConfig};
use crate::error::Result;
use crate::io::{write_event, write_trajectory_row, DataReader, EventRecord, TRAJECTORY_HEADER};
use crate::model::MixedModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StreamSummary {
    pub observations: u64,
    pub events: u64,
}

pub fn event_record(model: &MixedModel, event: &AlarmEvent) -> EventRecord {
    EventRecord {
        t: event.t,
        variable: model.variable_name(event.kind, event.index).to_string(),
        statistic: event.statistic,
        threshold: event.threshold,
    }
}

/// Reads observations one line at a time, writes one JSON line per alarm to
/// `events` and, if requested, every `S̄` to `trajectory`.
pub fn detect_stream<R: BufRead>(
    model: &MixedModel,
    input: R,
    config: DetectorConfig,
    events: &mut dyn Write,
    mut trajectory: Option<&mut dyn Write>,
) -> Result<StreamSummary> {
    let mut bank = DetectorBank::new(model, config)?;
    let names: Vec<String> = bank
        .detectors()
        .iter()
        .map(|d| model.variable_name(d.kind, d.index).to_string())
        .collect();
    if let Some(w) = trajectory.as_deref_mut() {
        writeln!(w, "{TRAJECTORY_HEADER}")?;
    }
    let mut summary = StreamSummary::default();
    for obs in DataReader::new(input, model.n_cat(), model.n_quant()) {
        let obs = obs?;
        for event in bank.update(model, &obs)? {
            write_event(events, &event_record(model, &event))?;
            summary.events += 1;
        }
        if let Some(w) = trajectory.as_deref_mut() {
            for (name, s) in names.iter().zip(bank.s_bar()) {
                write_trajectory_row(w, obs.t(), name, s)?;
            }
        }
        summary.observations += 1;
    }
    events.flush()?;
    if let Some(w) = trajectory {
        w.flush()?;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::model::ModelParams;

    fn model() -> MixedModel {
        ModelParams {
            theta: vec![vec![-0.5]],
            mu: vec![0.0],
            delta: vec![vec![1.0]],
            phi: vec![vec![0.5]],
            cat_names: None,
            quant_names: None,
        }
        .validate()
        .unwrap()
    }

    #[test]
    fn empty_input_gives_no_events() {
        let mut events = Vec::new();
        let summary = detect_stream(&model(), "".as_bytes(), DetectorConfig::new(1.0, 5.0), &mut events, None).unwrap();
        assert_eq!(summary, StreamSummary::default());
        assert!(events.is_empty());
    }

    #[test]
    fn emits_events_and_trajectory() {
        let input = "t,c0,q0\n1,0,5.0\n2,0,5.0\n3,1,0.5\n";
        let mut events = Vec::new();
        let mut traj = Vec::new();
        let summary = detect_stream(
            &model(),
            input.as_bytes(),
            DetectorConfig::new(1.0, 5.0),
            &mut events,
            Some(&mut traj),
        )
        .unwrap();
        assert_eq!(summary.observations, 3);
        let text = String::from_utf8(events).unwrap();
        assert_eq!(summary.events as usize, text.lines().count());
        assert!(text.contains(r#""variable":"q0""#));
        let traj = String::from_utf8(traj).unwrap();
        assert_eq!(traj.lines().next(), Some("t,variable,S_bar"));
        assert_eq!(traj.lines().count(), 1 + 3 * 2);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let input = "t,c0,q0\n1,0,5.0\n2,x,5.0\n";
        let mut events = Vec::new();
        let err = detect_stream(&model(), input.as_bytes(), DetectorConfig::new(1.0, 5.0), &mut events, None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }
}
