use serde::Serialize;

use super::{agresti_coull, ProportionEstimate, StatsError};
use crate::remediation::{Outcome, RemediationAttempt};

/// Outcome proportions over attempts that got an answer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeProportions {
    pub correct: ProportionEstimate,
    pub wrong: ProportionEstimate,
    pub refused: ProportionEstimate,
    pub provider_errors: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct OutcomeCounts {
    pub correct: u64,
    pub wrong: u64,
    pub refused: u64,
    pub provider_errors: u64,
}

impl OutcomeCounts {
    pub fn tally(outcomes: impl IntoIterator<Item = Option<Outcome>>) -> Self {
        let mut c = Self::default();
        for o in outcomes {
            match o {
                Some(Outcome::Correct) => c.correct += 1,
                Some(Outcome::Wrong) => c.wrong += 1,
                Some(Outcome::Refused) => c.refused += 1,
                None => c.provider_errors += 1,
            }
        }
        c
    }

    pub fn classified(&self) -> u64 {
        self.correct + self.wrong + self.refused
    }

    pub fn attempts(&self) -> u64 {
        self.classified() + self.provider_errors
    }

    pub fn get(&self, outcome: Outcome) -> u64 {
        match outcome {
            Outcome::Correct => self.correct,
            Outcome::Wrong => self.wrong,
            Outcome::Refused => self.refused,
        }
    }
}

pub fn proportions_from_outcomes(attempts: &[RemediationAttempt], z: f64) -> Result<OutcomeProportions, StatsError> {
    let c = OutcomeCounts::tally(attempts.iter().map(|a| a.outcome));
    let n = c.classified();
    Ok(OutcomeProportions {
        correct: agresti_coull(c.correct, n, z)?,
        wrong: agresti_coull(c.wrong, n, z)?,
        refused: agresti_coull(c.refused, n, z)?,
        provider_errors: c.provider_errors,
    })
}
